//! Gauss–Legendre rules and a globally adaptive panel integrator.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        assert!(order >= 2, "Gauss-Legendre order must be at least 2");
        let rule = gauss_quad::legendre::GaussLegendre::new(
            order.try_into().expect("order >= 2 fits the rule constructor"),
        );
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }

    pub fn integrate_real<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }
}

const CACHED_ORDERS: usize = 65;
static RULES: [OnceLock<GaussRule>; CACHED_ORDERS] = [const { OnceLock::new() }; CACHED_ORDERS];

/// Shared rule of the given order (orders up to 64 are cached).
pub fn gauss_legendre(order: usize) -> &'static GaussRule {
    assert!(order < CACHED_ORDERS, "orders above 64 are not cached");
    RULES[order].get_or_init(|| GaussRule::new(order))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub fn target(&self, magnitude: f64) -> f64 {
        self.abs.max(self.rel * magnitude)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveConfig {
    pub tol: Tolerance,
    pub order: usize,
    pub max_panels: usize,
    /// Initial panels are split until no wider than this.
    pub max_width: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            tol: Tolerance { rel: 1e-9, abs: 1e-14 },
            order: 10,
            max_panels: 20_000,
            max_width: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    /// Estimate of the integral of |f|, the scale for relative tolerances.
    pub magnitude: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("adaptive quadrature stalled: error {error:.3e} above target {target:.3e} after {panels} panels")]
    NonConvergence { error: f64, target: f64, panels: usize },
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    magnitude: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn evaluate_panel<F: FnMut(f64) -> Complex64>(
    rule: &GaussRule,
    a: f64,
    b: f64,
    f: &mut F,
) -> Panel {
    let mid = 0.5 * (a + b);
    let mut whole = Complex64::new(0.0, 0.0);
    for (x, w) in rule.mapped(a, b) {
        whole += f(x) * w;
    }
    let mut halves = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    for (lo, hi) in [(a, mid), (mid, b)] {
        for (x, w) in rule.mapped(lo, hi) {
            let v = f(x);
            halves += v * w;
            magnitude += v.norm() * w.abs();
        }
    }
    Panel {
        a,
        b,
        value: halves,
        error: (whole - halves).norm(),
        magnitude,
    }
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, bisecting the panel with the
/// largest error estimate until the total estimate drops below
/// `max(abs, rel * ∫|f|)`. Breakpoints must be sorted; duplicates are ignored.
pub fn integrate_adaptive<F: FnMut(f64) -> Complex64>(
    mut f: F,
    breaks: &[f64],
    cfg: &AdaptiveConfig,
) -> Result<Estimate, QuadError> {
    let rule = gauss_legendre(cfg.order);
    let mut heap = BinaryHeap::new();
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a <= 0.0 {
            continue;
        }
        let pieces = if cfg.max_width.is_finite() {
            ((b - a) / cfg.max_width).ceil().max(1.0) as usize
        } else {
            1
        };
        let h = (b - a) / pieces as f64;
        for k in 0..pieces {
            let lo = a + h * k as f64;
            let hi = if k + 1 == pieces { b } else { lo + h };
            heap.push(evaluate_panel(rule, lo, hi, &mut f));
        }
    }
    loop {
        let error: f64 = heap.iter().map(|p| p.error).sum();
        let magnitude: f64 = heap.iter().map(|p| p.magnitude).sum();
        let target = cfg.tol.target(magnitude);
        if error <= target {
            let value = heap.iter().map(|p| p.value).sum();
            return Ok(Estimate { value, error, magnitude });
        }
        if heap.len() >= cfg.max_panels {
            return Err(QuadError::NonConvergence { error, target, panels: heap.len() });
        }
        // Bisect a batch of the worst panels before re-summing.
        let batch = (heap.len() / 8).max(1);
        for _ in 0..batch {
            let Some(worst) = heap.pop() else { break };
            if worst.error <= 0.25 * target / heap.len().max(1) as f64 {
                heap.push(worst);
                break;
            }
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                heap.push(worst);
                return Err(QuadError::NonConvergence { error, target, panels: heap.len() });
            }
            heap.push(evaluate_panel(rule, worst.a, mid, &mut f));
            heap.push(evaluate_panel(rule, mid, worst.b, &mut f));
        }
    }
}

/// Points `center ± extent·2^{-k}` for k = 1..=levels, clipped to (a, b).
pub fn graded_points(center: f64, extent: f64, levels: u32, a: f64, b: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * levels as usize + 1);
    out.push(center);
    for k in 1..=levels {
        let h = extent * 0.5f64.powi(k as i32);
        out.push(center - h);
        out.push(center + h);
    }
    out.retain(|&p| p > a && p < b);
    out
}

/// Sorts, clips to [a, b] and deduplicates a breakpoint list, adding the ends.
pub fn normalize_breaks(mut pts: Vec<f64>, a: f64, b: f64) -> Vec<f64> {
    pts.retain(|p| p.is_finite() && *p > a && *p < b);
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
    pts
}

/// Integral matrix of the Lagrange basis on the Gauss nodes: entry (i, l) is
/// ∫_{-1}^{ξ_i} L_l(ξ) dξ. Used for cumulative (collocation) integration.
pub fn cumulative_matrix(rule: &GaussRule) -> Vec<Vec<f64>> {
    let n = rule.order();
    let legendre = |m: usize, x: f64| -> f64 {
        let (mut p0, mut p1) = (1.0, x);
        if m == 0 {
            return 1.0;
        }
        for k in 1..m {
            let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
            p0 = p1;
            p1 = p2;
        }
        p1
    };
    let antiderivative = |m: usize, x: f64| -> f64 {
        if m == 0 {
            x + 1.0
        } else {
            (legendre(m + 1, x) - legendre(m - 1, x)) / (2 * m + 1) as f64
        }
    };
    let mut out = vec![vec![0.0; n]; n];
    for (i, row) in out.iter_mut().enumerate() {
        let xi = rule.nodes[i];
        for (l, entry) in row.iter_mut().enumerate() {
            let xl = rule.nodes[l];
            let wl = rule.weights[l];
            *entry = (0..n)
                .map(|m| wl * legendre(m, xl) * (2 * m + 1) as f64 / 2.0 * antiderivative(m, xi))
                .sum();
        }
    }
    out
}
