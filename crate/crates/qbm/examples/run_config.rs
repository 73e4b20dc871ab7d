//! Drive a subcommand from an inline experiment file.

use qbm::config::{Command, parse_str};
use qbm::runner::run;

const EXPERIMENT: &str = r#"
[internal]
hamiltonian = "two_level(0.8)"

[bath.thermal]
occupation = "bose_einstein(2.0)"

[rates]
points = [[0, 0], [1, 0]]
omegas = [-0.8, 0.8]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = tempfile::tempdir()?;
    let mut file = parse_str(EXPERIMENT, "inline")?;
    file.out_dir = Some(out.path().to_path_buf());
    let config = file.validate()?;
    println!("config sha256 {}", config.hash());
    let outcome = run(Command::Rates, &config)?;
    println!("{}", std::fs::read_to_string(&outcome.report)?);
    Ok(())
}
