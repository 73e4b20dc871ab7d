use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::BathError;

/// Piecewise-linear radial profile `k ↦ value`, constant beyond its ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    pub k: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialTable {
    pub fn new(k: Vec<f64>, values: Vec<f64>) -> Result<Self, String> {
        if k.len() != values.len() || k.len() < 2 {
            return Err("a radial table needs at least two (k, value) samples".into());
        }
        if k.windows(2).any(|w| w[1] <= w[0]) {
            return Err("radial table abscissae must be strictly increasing".into());
        }
        if k.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err("radial table entries must be finite".into());
        }
        Ok(Self { k, values })
    }

    pub fn eval(&self, k: f64) -> f64 {
        let n = self.k.len();
        if k <= self.k[0] {
            return self.values[0];
        }
        if k >= self.k[n - 1] {
            return self.values[n - 1];
        }
        let j = self.k.partition_point(|&p| p <= k) - 1;
        let s = (k - self.k[j]) / (self.k[j + 1] - self.k[j]);
        self.values[j] + s * (self.values[j + 1] - self.values[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Dispersion {
    /// ν(q) = |q|.
    Linear,
    Tabulated(RadialTable),
}

/// Radial form factor, cut to zero at the support radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FormFactor {
    Constant { amplitude: f64 },
    /// `a·b(|q|/r)` with `b(u) = exp(1 - 1/(1-u²))`.
    SmoothBump { amplitude: f64 },
    /// `a·sqrt(|q|/r)·b(|q|/r)`; vanishes at q = 0 like an acoustic coupling.
    AcousticBump { amplitude: f64 },
    Tabulated(RadialTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Occupation {
    Zero,
    BoseEinstein { beta: f64 },
    Tabulated(RadialTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub label: String,
    pub dimension: usize,
    pub dispersion: Dispersion,
    pub form_factor: FormFactor,
    pub occupation: Occupation,
    pub support_radius: f64,
}

fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 { 0.0 } else { (1.0 - 1.0 / (1.0 - u * u)).exp() }
}

/// Radii at which spec invariants are sampled.
const CHECK_POINTS: usize = 256;

impl BathSpec {
    pub fn new(
        label: impl Into<String>,
        dimension: usize,
        dispersion: Dispersion,
        form_factor: FormFactor,
        occupation: Occupation,
        support_radius: f64,
    ) -> Result<Self, BathError> {
        let spec = Self {
            label: label.into(),
            dimension,
            dispersion,
            form_factor,
            occupation,
            support_radius,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Linear dispersion, smooth bump, Bose–Einstein occupation (or zero
    /// temperature when `beta` is `None`).
    pub fn smooth_bump(dimension: usize, radius: f64, amplitude: f64, beta: Option<f64>) -> Result<Self, BathError> {
        Self::new(
            "bath",
            dimension,
            Dispersion::Linear,
            FormFactor::SmoothBump { amplitude },
            beta.map_or(Occupation::Zero, |beta| Occupation::BoseEinstein { beta }),
            radius,
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn invalid(&self, reason: impl Into<String>) -> BathError {
        BathError::InvalidSpec { label: self.label.clone(), reason: reason.into() }
    }

    pub fn validate(&self) -> Result<(), BathError> {
        if self.dimension == 0 {
            return Err(self.invalid("dimension must be positive"));
        }
        let r = self.support_radius;
        if !(r > 0.0 && r <= PI) {
            return Err(self.invalid(format!("support radius {r} outside (0, π]")));
        }
        if let Occupation::BoseEinstein { beta } = self.occupation
            && !(beta > 0.0 && beta.is_finite()) {
                return Err(self.invalid(format!("inverse temperature {beta} must be positive")));
            }
        for j in 1..=CHECK_POINTS {
            let k = PI * j as f64 / CHECK_POINTS as f64;
            let nu = self.energy(k);
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(self.invalid(format!("dispersion not positive at |q|={k:.4}")));
            }
            let z = self.occupation(k);
            if !(z >= 0.0 && z.is_finite()) {
                return Err(self.invalid(format!("occupation negative or infinite at |q|={k:.4}")));
            }
            if !self.form_factor(k).is_finite() {
                return Err(self.invalid(format!("form factor not finite at |q|={k:.4}")));
            }
        }
        // |g|²ζ must be integrable against k^{d-1} at the origin.
        if self.dimension == 1 && !matches!(self.occupation, Occupation::Zero) {
            let k = 1e-8;
            let w = self.absorption_weight(k);
            if w * k > 1e-6 * (1.0 + self.absorption_weight(0.5 * r)) {
                return Err(self.invalid("|g|²ζ is not integrable at q=0 in one dimension"));
            }
        }
        Ok(())
    }

    pub fn is_radial_linear(&self) -> bool {
        matches!(self.dispersion, Dispersion::Linear)
    }

    pub fn beta(&self) -> Option<f64> {
        match self.occupation {
            Occupation::BoseEinstein { beta } => Some(beta),
            _ => None,
        }
    }

    pub fn is_zero_temperature(&self) -> bool {
        matches!(self.occupation, Occupation::Zero)
    }

    /// ν at radius k.
    pub fn energy(&self, k: f64) -> f64 {
        match &self.dispersion {
            Dispersion::Linear => k,
            Dispersion::Tabulated(t) => t.eval(k),
        }
    }

    /// g at radius k (real for every preset).
    pub fn form_factor(&self, k: f64) -> f64 {
        let r = self.support_radius;
        if k >= r {
            return 0.0;
        }
        let u = k / r;
        match &self.form_factor {
            FormFactor::Constant { amplitude } => *amplitude,
            FormFactor::SmoothBump { amplitude } => amplitude * bump(u),
            FormFactor::AcousticBump { amplitude } => amplitude * u.sqrt() * bump(u),
            FormFactor::Tabulated(t) => t.eval(k),
        }
    }

    /// ζ at radius k.
    pub fn occupation(&self, k: f64) -> f64 {
        match &self.occupation {
            Occupation::Zero => 0.0,
            Occupation::BoseEinstein { beta } => 1.0 / (beta * self.energy(k)).exp_m1(),
            Occupation::Tabulated(t) => t.eval(k),
        }
    }

    /// |g|²ζ, the weight of the `e^{+itν}` (absorption) branch.
    pub fn absorption_weight(&self, k: f64) -> f64 {
        let g = self.form_factor(k);
        if g == 0.0 { 0.0 } else { g * g * self.occupation(k) }
    }

    /// |g|²(1+ζ), the weight of the `e^{-itν}` (emission) branch.
    pub fn emission_weight(&self, k: f64) -> f64 {
        let g = self.form_factor(k);
        if g == 0.0 { 0.0 } else { g * g * (1.0 + self.occupation(k)) }
    }

    /// Radii where ν(k) = e for 0 < k < r.
    pub fn resonances(&self, e: f64) -> Vec<f64> {
        let r = self.support_radius;
        match &self.dispersion {
            Dispersion::Linear => {
                if e > 0.0 && e < r { vec![e] } else { vec![] }
            }
            Dispersion::Tabulated(_) => {
                let n = 2048;
                let mut out = Vec::new();
                let h = r / n as f64;
                for j in 0..n {
                    let (mut a, mut b) = (j as f64 * h, (j + 1) as f64 * h);
                    let (fa, fb) = (self.energy(a) - e, self.energy(b) - e);
                    if fa == 0.0 {
                        out.push(a);
                        continue;
                    }
                    if fa * fb < 0.0 {
                        for _ in 0..60 {
                            let m = 0.5 * (a + b);
                            if (self.energy(m) - e) * fa > 0.0 { a = m } else { b = m }
                        }
                        out.push(0.5 * (a + b));
                    }
                }
                out
            }
        }
    }
}
