use serde::Serialize;

use super::{DysonError, MAX_PAIRING_ORDER};
use crate::numerics::quad::gauss_legendre;

/// A perfect matching of the vertices `0..2n` into pairs `(opener, closer)`,
/// sorted by opener.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Pairing {
    pub n: usize,
    pub pairs: Vec<(usize, usize)>,
}

/// What a vertex does in the time-ordered product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexRole {
    Opens(usize),
    Closes(usize),
}

impl Pairing {
    pub fn new(mut pairs: Vec<(usize, usize)>) -> Result<Self, DysonError> {
        let n = pairs.len();
        pairs.sort_unstable();
        let mut seen = vec![false; 2 * n];
        for &(a, b) in &pairs {
            if a >= b || b >= 2 * n || seen[a] || seen[b] {
                return Err(DysonError::Invalid(format!("{pairs:?} is not a pairing of 0..{}", 2 * n)));
            }
            seen[a] = true;
            seen[b] = true;
        }
        Ok(Self { n, pairs })
    }

    pub fn ladder(n: usize) -> Self {
        Self { n, pairs: (0..n).map(|m| (2 * m, 2 * m + 1)).collect() }
    }

    pub fn is_ladder(&self) -> bool {
        self.pairs.iter().enumerate().all(|(m, &p)| p == (2 * m, 2 * m + 1))
    }

    /// Role of every vertex, indexed by time order.
    pub fn roles(&self) -> Vec<VertexRole> {
        let mut roles = vec![VertexRole::Opens(0); 2 * self.n];
        for (m, &(a, b)) in self.pairs.iter().enumerate() {
            roles[a] = VertexRole::Opens(m);
            roles[b] = VertexRole::Closes(m);
        }
        roles
    }
}

/// `(2n-1)!!`, the number of pairings of `2n` points.
pub fn pairing_count(n: usize) -> usize {
    (1..=n).map(|k| 2 * k - 1).product()
}

/// All pairings of `0..2n` in lexicographic order.
pub fn enumerate_pairings(n: usize) -> Result<Vec<Pairing>, DysonError> {
    if n > MAX_PAIRING_ORDER {
        return Err(DysonError::OrderTooLarge { n, max: MAX_PAIRING_ORDER });
    }
    let mut out = Vec::with_capacity(pairing_count(n));
    let mut current = Vec::with_capacity(n);
    extend(&mut vec![false; 2 * n], &mut current, &mut out);
    Ok(out)
}

fn extend(used: &mut [bool], current: &mut Vec<(usize, usize)>, out: &mut Vec<Pairing>) {
    let Some(first) = used.iter().position(|u| !u) else {
        out.push(Pairing { n: current.len(), pairs: current.clone() });
        return;
    };
    used[first] = true;
    for partner in first + 1..used.len() {
        if used[partner] {
            continue;
        }
        used[partner] = true;
        current.push((first, partner));
        extend(used, current, out);
        current.pop();
        used[partner] = false;
    }
    used[first] = false;
}

/// Both sides of the pair-reordering identity for a scalar integrand `g`:
/// the sum over pairings of the ordered simplex integral, and the integral
/// over ordered openers with each closer after its opener. `nodes` is the
/// Gauss order per dimension on every panel of `[t0, t]`.
pub fn pair_reordering_sides<G>(n: usize, t0: f64, t: f64, nodes: usize, g: G) -> Result<(f64, f64), DysonError>
where
    G: Fn(&[(f64, f64)]) -> f64 + Sync,
{
    let pairings = enumerate_pairings(n)?;
    let mut simplex = 0.0;
    for p in &pairings {
        simplex += nested(2 * n, t0, t, nodes, &mut Vec::new(), &|times: &[f64]| {
            let args: Vec<(f64, f64)> = p.pairs.iter().map(|&(a, b)| (times[a], times[b])).collect();
            g(&args)
        });
    }
    let openers = nested(n, t0, t, nodes, &mut Vec::new(), &|u: &[f64]| {
        closers(u, 0, t, nodes, &mut Vec::new(), &g)
    });
    Ok((simplex, openers))
}

/// Ordered integral `t0 ≤ s_1 ≤ … ≤ s_k ≤ t` by nested Gauss rules.
fn nested(k: usize, lo: f64, hi: f64, nodes: usize, prefix: &mut Vec<f64>, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    if prefix.len() == k {
        return f(prefix);
    }
    let rule = gauss_legendre(nodes);
    let mut acc = 0.0;
    for (s, w) in rule.mapped(lo, hi) {
        prefix.push(s);
        acc += w * nested(k, s, hi, nodes, prefix, f);
        prefix.pop();
    }
    acc
}

fn closers<G>(u: &[f64], m: usize, t: f64, nodes: usize, prefix: &mut Vec<f64>, g: &G) -> f64
where
    G: Fn(&[(f64, f64)]) -> f64,
{
    if m == u.len() {
        let args: Vec<(f64, f64)> = u.iter().copied().zip(prefix.iter().copied()).collect();
        return g(&args);
    }
    let rule = gauss_legendre(nodes);
    let mut acc = 0.0;
    for (s, w) in rule.mapped(u[m], t) {
        prefix.push(s);
        acc += w * closers(u, m + 1, t, nodes, prefix, g);
        prefix.pop();
    }
    acc
}
