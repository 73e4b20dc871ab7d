use std::collections::HashMap;

use nalgebra::{DMatrixView, DMatrixViewMut};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::model::DysonBox;
use super::pairing::{Pairing, VertexRole, enumerate_pairings};
use super::{DysonError, MAX_DENSE_DIM, MAX_SERIES_ORDER, TAIL_LIMIT};
use crate::CMatrix;
use crate::lindblad::{unvec, vec_of};
use crate::numerics::linalg::hermitian_eigen;
use crate::numerics::quad::{cumulative_matrix, gauss_legendre};

/// Composite Gauss–Legendre rule for time-ordered integrals: every time
/// variable uses the same panels, with at most `phase_per_panel` radians of
/// the fastest integrand oscillation on a panel.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadratureGrid {
    pub nodes_per_panel: usize,
    pub phase_per_panel: f64,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self { nodes_per_panel: 12, phase_per_panel: 3.0 }
    }
}

impl QuadratureGrid {
    fn validate(&self) -> Result<(), DysonError> {
        if self.nodes_per_panel < 8 || self.nodes_per_panel > 64 {
            return Err(DysonError::Invalid(format!(
                "{} nodes per panel is outside 8..=64",
                self.nodes_per_panel
            )));
        }
        if !(self.phase_per_panel > 0.0 && self.phase_per_panel.is_finite()) {
            return Err(DysonError::Invalid("phase per panel must be positive".into()));
        }
        Ok(())
    }

    pub fn panels(&self, t: f64, frequency: f64) -> usize {
        ((t * frequency / self.phase_per_panel).ceil() as usize).max(1)
    }
}

/// Nodes of the composite rule on `[0, t]` with the per-panel cumulative matrix.
#[derive(Debug, Clone)]
pub(super) struct TimeGrid {
    pub(super) nodes: Vec<f64>,
    weights: Vec<f64>,
    half_width: f64,
    per_panel: usize,
    cumulative: Vec<Vec<f64>>,
}

impl TimeGrid {
    pub(super) fn new(t: f64, panels: usize, per_panel: usize) -> Self {
        let rule = gauss_legendre(per_panel);
        let h = t / panels as f64;
        let mut nodes = Vec::with_capacity(panels * per_panel);
        let mut weights = Vec::with_capacity(panels * per_panel);
        for p in 0..panels {
            for (s, w) in rule.mapped(p as f64 * h, (p + 1) as f64 * h) {
                nodes.push(s);
                weights.push(w);
            }
        }
        Self { nodes, weights, half_width: 0.5 * h, per_panel, cumulative: cumulative_matrix(rule) }
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    /// `G(s_j) = ∫_0^{s_j} F` at every node, plus the full integral.
    pub(super) fn integrate(&self, values: &[CMatrix]) -> (Vec<CMatrix>, CMatrix) {
        let (rows, cols) = values[0].shape();
        let mut base = CMatrix::zeros(rows, cols);
        let mut out = Vec::with_capacity(values.len());
        for panel in values.chunks(self.per_panel) {
            for row in &self.cumulative {
                let mut g = base.clone();
                let target = g.as_mut_slice();
                for (c, f) in row.iter().zip(panel) {
                    let c = c * self.half_width;
                    target.iter_mut().zip(f.as_slice()).for_each(|(t, v)| *t += v * c);
                }
                out.push(g);
            }
            let target = base.as_mut_slice();
            for (f, w) in panel.iter().zip(&self.weights) {
                target.iter_mut().zip(f.as_slice()).for_each(|(t, v)| *t += v * w);
            }
        }
        (out, base)
    }
}

/// Label of an open pair: bath mode and the sign of its plane wave.
type Label = (u16, bool);

/// Precomputed interaction-picture vertices on a time grid.
#[derive(Debug)]
pub struct SeriesEvaluator<'a> {
    system: &'a DysonBox,
    t: f64,
    grid: TimeGrid,
    /// `waves[j][2m + s]` = `e^{isH}(W ⊗ e^{±i q_m·x})e^{-isH}` at node j,
    /// `s = 0` for `+q_m` and `s = 1` for `-q_m`.
    waves: Vec<Vec<CMatrix>>,
}

impl<'a> SeriesEvaluator<'a> {
    pub fn new(system: &'a DysonBox, t: f64, quadrature: QuadratureGrid) -> Result<Self, DysonError> {
        quadrature.validate()?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(DysonError::Invalid(format!("time {t} must be finite and non-negative")));
        }
        let panels = quadrature.panels(t, system.frequency_scale());
        let grid = TimeGrid::new(t, panels, quadrature.nodes_per_panel);
        let (energies, vectors) = hermitian_eigen(system.hamiltonian());
        let plane: Vec<CMatrix> = system
            .modes()
            .iter()
            .flat_map(|m| {
                let minus: Vec<f64> = m.momentum.iter().map(|q| -q).collect();
                [system.plane_wave_coupling(&m.momentum), system.plane_wave_coupling(&minus)]
            })
            .map(|p| vectors.adjoint() * p * &vectors)
            .collect();
        let waves = grid
            .nodes
            .par_iter()
            .map(|&s| {
                let phases: Vec<Complex64> = energies.iter().map(|&e| Complex64::from_polar(1.0, s * e)).collect();
                let rotate = CMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, k| vectors[(i, k)] * phases[k]);
                plane.iter().map(|p| &rotate * p * rotate.adjoint()).collect()
            })
            .collect();
        Ok(Self { system, t, grid, waves })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn node_count(&self) -> usize {
        self.grid.len()
    }

    pub fn system(&self) -> &DysonBox {
        self.system
    }

    /// `∫_{Z_{2n}(t)} Σ_{x,l} 𝒱(π, t, x, l)(ρ)` for one pairing.
    pub fn pairing_apply(&self, pairing: &Pairing, rho: &CMatrix) -> CMatrix {
        // A batch of one is laid out exactly like ρ.
        self.pairing_apply_packed(pairing, rho)
    }

    /// Same as [`Self::pairing_apply`] on every operator of a packed batch.
    fn pairing_apply_packed(&self, pairing: &Pairing, packed: &CMatrix) -> CMatrix {
        let n = pairing.n;
        if n == 0 {
            return packed.clone();
        }
        let nodes = self.grid.len();
        let modes = self.system.modes();
        let lambda_sq = self.system.lambda * self.system.lambda;
        let prefactor = Complex64::new((-lambda_sq).powi(n as i32), 0.0);
        let mut branches: Vec<(Vec<Option<Label>>, Vec<CMatrix>)> =
            vec![(vec![None; n], vec![packed.clone(); nodes])];
        let roles = pairing.roles();
        for (k, role) in roles.iter().enumerate() {
            let mut next: HashMap<Vec<Option<Label>>, Vec<CMatrix>> = HashMap::new();
            for (labels, integrated) in &branches {
                match *role {
                    VertexRole::Opens(m) => {
                        for (mi, mode) in modes.iter().enumerate() {
                            for positive in [true, false] {
                                let (left, right) = if positive {
                                    (mode.absorption, mode.emission)
                                } else {
                                    (mode.emission, mode.absorption)
                                };
                                if left == 0.0 && right == 0.0 {
                                    continue;
                                }
                                let sign = if positive { 1.0 } else { -1.0 };
                                let wave = 2 * mi + usize::from(positive);
                                let f = self.vertex(integrated, wave, -sign * mode.frequency, left, right);
                                let mut key = labels.clone();
                                key[m] = Some((mi as u16, positive));
                                accumulate(&mut next, key, f);
                            }
                        }
                    }
                    VertexRole::Closes(m) => {
                        let (mi, positive) = labels[m].expect("closer follows its opener");
                        let mode = &modes[mi as usize];
                        let sign = if positive { 1.0 } else { -1.0 };
                        let wave = 2 * mi as usize + usize::from(!positive);
                        let f = self.vertex(integrated, wave, sign * mode.frequency, 1.0, 1.0);
                        let mut key = labels.clone();
                        key[m] = None;
                        accumulate(&mut next, key, f);
                    }
                }
            }
            if k + 1 == roles.len() {
                let total = next
                    .into_values()
                    .map(|f| self.grid.integrate(&f).1)
                    .fold(CMatrix::zeros(packed.nrows(), packed.ncols()), |a, b| a + b);
                return total * prefactor;
            }
            branches = next.into_iter().map(|(key, f)| (key, self.grid.integrate(&f).0)).collect();
        }
        unreachable!("the last vertex returns")
    }

    /// `e^{iθs}(a_L V(s)X - a_R X V(s))` at every node, for every operator of
    /// a packed batch.
    fn vertex(&self, x: &[CMatrix], wave: usize, theta: f64, left: f64, right: f64) -> Vec<CMatrix> {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        x.par_iter()
            .zip(self.grid.nodes.par_iter())
            .enumerate()
            .map(|(j, (xj, &s))| {
                let v = &self.waves[j][wave];
                let d = v.nrows();
                let phase = Complex64::from_polar(1.0, theta * s);
                let mut out = CMatrix::zeros(xj.nrows(), xj.ncols());
                if left != 0.0 {
                    out.gemm(phase * left, v, xj, zero);
                }
                if right != 0.0 {
                    let rows = xj.len() / d;
                    let stacked = DMatrixView::from_slice(xj.as_slice(), rows, d);
                    let mut target = DMatrixViewMut::from_slice(out.as_mut_slice(), rows, d);
                    target.gemm(-phase * right, &stacked, v, one);
                }
                out
            })
            .collect()
    }

    /// Order-`n` contribution applied to ρ, summed over pairings.
    pub fn order_apply(&self, n: usize, rho: &CMatrix) -> Result<CMatrix, DysonError> {
        Ok(enumerate_pairings(n)?
            .iter()
            .map(|p| self.pairing_apply(p, rho))
            .fold(CMatrix::zeros(rho.nrows(), rho.ncols()), |a, b| a + b))
    }

    /// Dense matrix of `ρ ↦ pairing_apply(π, ρ)` on column-stacked `vec(ρ)`.
    pub fn pairing_superoperator(&self, pairing: &Pairing) -> Result<CMatrix, DysonError> {
        let d = self.system.dim();
        check_dense(d)?;
        let labels = 2 * self.system.modes().len();
        let branches = labels.saturating_pow(max_open(pairing) as u32).max(1);
        // Two branch sets live at once, each holding one batch per node.
        let per_operator = 2 * branches * self.grid.len() * d * d * std::mem::size_of::<Complex64>();
        let batch = (BATCH_BYTES / per_operator.max(1)).clamp(1, d * (d + 1) / 2);
        // Each pairing maps X† to its image's adjoint, so only the units
        // E_ij with i ≤ j are propagated.
        let upper: Vec<(usize, usize)> = (0..d).flat_map(|j| (0..=j).map(move |i| (i, j))).collect();
        let mut out = CMatrix::zeros(d * d, d * d);
        for chunk in upper.chunks(batch) {
            let units: Vec<CMatrix> = chunk
                .iter()
                .map(|&(i, j)| {
                    let mut e = CMatrix::zeros(d, d);
                    e[(i, j)] = Complex64::new(1.0, 0.0);
                    e
                })
                .collect();
            let images = unpack(&self.pairing_apply_packed(pairing, &pack(&units)), d, units.len());
            for (&(i, j), image) in chunk.iter().zip(&images) {
                out.set_column(i + d * j, &vec_of(image));
                if i != j {
                    out.set_column(j + d * i, &vec_of(&image.adjoint()));
                }
            }
        }
        Ok(out)
    }

    /// Dense matrix of the order-`n` contribution.
    pub fn order_superoperator(&self, n: usize) -> Result<CMatrix, DysonError> {
        let d = self.system.dim();
        let mut out = CMatrix::zeros(d * d, d * d);
        for p in enumerate_pairings(n)? {
            out += self.pairing_superoperator(&p)?;
        }
        Ok(out)
    }
}

/// Memory allowed for the branch histories of one packed batch.
const BATCH_BYTES: usize = 768 << 20;

/// Most pairs open at once along the time order.
fn max_open(pairing: &Pairing) -> usize {
    let mut open = 0usize;
    let mut most = 0;
    for role in pairing.roles() {
        match role {
            VertexRole::Opens(_) => {
                open += 1;
                most = most.max(open);
            }
            VertexRole::Closes(_) => open -= 1,
        }
    }
    most
}

/// Operators `X_b` side by side as a `D × BD` matrix with `X_b[(i, j)]` at
/// column `b + Bj`. Read as `BD × D`, the same buffer has `X_b[(i, j)]` at row
/// `i + Db`, so left and right products are each one matrix product.
fn pack(ops: &[CMatrix]) -> CMatrix {
    let d = ops[0].nrows();
    let b = ops.len();
    CMatrix::from_fn(d, b * d, |i, c| ops[c % b][(i, c / b)])
}

fn unpack(packed: &CMatrix, d: usize, b: usize) -> Vec<CMatrix> {
    (0..b).map(|k| CMatrix::from_fn(d, d, |i, j| packed[(i, k + b * j)])).collect()
}

fn accumulate(map: &mut HashMap<Vec<Option<Label>>, Vec<CMatrix>>, key: Vec<Option<Label>>, f: Vec<CMatrix>) {
    match map.get_mut(&key) {
        Some(acc) => acc.iter_mut().zip(f).for_each(|(a, b)| *a += b),
        None => {
            map.insert(key, f);
        }
    }
}

fn check_dense(d: usize) -> Result<(), DysonError> {
    if d > MAX_DENSE_DIM {
        return Err(DysonError::BoxTooLarge { dim: d, max: MAX_DENSE_DIM });
    }
    Ok(())
}

/// `x = (|Λ|λ‖W‖t)²·2f^Λ(0,0)`, the ratio of the norm-convergent majorant.
pub fn majorant_ratio(system: &DysonBox, t: f64) -> f64 {
    let sites = system.lattice.sites() as f64;
    (sites * system.lambda * system.coupling_norm() * t).powi(2) * 2.0 * system.correlation_origin()
}

/// `Σ_{n > n_max} xⁿ/n!`.
pub fn majorant_tail(x: f64, n_max: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut term = (1..=n_max).fold(1.0, |acc, k| acc * x / k as f64);
    let mut tail = 0.0;
    let mut k = n_max + 1;
    loop {
        term *= x / k as f64;
        tail += term;
        if term <= 1e-17 * tail || k > 10_000 {
            return tail;
        }
        k += 1;
    }
}

/// Partial sum of the series applied to one state.
#[derive(Debug, Clone)]
pub struct DysonOutput {
    pub state: CMatrix,
    /// Contribution of each order `0..=n_max`.
    pub orders: Vec<CMatrix>,
    pub tail_bound: f64,
    pub nodes: usize,
}

/// Partial sum of the series as a dense superoperator.
#[derive(Debug, Clone)]
pub struct DysonPropagator {
    pub superoperator: CMatrix,
    pub orders: Vec<CMatrix>,
    pub tail_bound: f64,
    pub nodes: usize,
}

impl DysonPropagator {
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        unvec(&(&self.superoperator * vec_of(rho)), rho.nrows())
    }
}

fn checked_tail(system: &DysonBox, t: f64, n_max: usize) -> Result<f64, DysonError> {
    if n_max > MAX_SERIES_ORDER {
        return Err(DysonError::OrderTooLarge { n: n_max, max: MAX_SERIES_ORDER });
    }
    let tail = majorant_tail(majorant_ratio(system, t), n_max);
    if !(tail <= TAIL_LIMIT) {
        return Err(DysonError::TailTooLarge { tail, limit: TAIL_LIMIT });
    }
    Ok(tail)
}

/// Interaction-picture series through order `n_max` applied to ρ.
pub fn dyson_apply(
    system: &DysonBox,
    t: f64,
    n_max: usize,
    quadrature: QuadratureGrid,
    rho: &CMatrix,
) -> Result<DysonOutput, DysonError> {
    let tail_bound = checked_tail(system, t, n_max)?;
    if rho.shape() != (system.dim(), system.dim()) {
        return Err(DysonError::Invalid("state does not match the box".into()));
    }
    let ev = SeriesEvaluator::new(system, t, quadrature)?;
    let orders = (0..=n_max).map(|n| ev.order_apply(n, rho)).collect::<Result<Vec<_>, _>>()?;
    let state = orders.iter().fold(CMatrix::zeros(rho.nrows(), rho.ncols()), |a, b| a + b);
    Ok(DysonOutput { state, orders, tail_bound, nodes: ev.node_count() })
}

/// Interaction-picture series through order `n_max` as a superoperator.
pub fn dyson_propagator(
    system: &DysonBox,
    t: f64,
    n_max: usize,
    quadrature: QuadratureGrid,
) -> Result<DysonPropagator, DysonError> {
    let tail_bound = checked_tail(system, t, n_max)?;
    let d = system.dim();
    check_dense(d)?;
    let ev = SeriesEvaluator::new(system, t, quadrature)?;
    let orders = (0..=n_max).map(|n| ev.order_superoperator(n)).collect::<Result<Vec<_>, _>>()?;
    let superoperator = orders.iter().fold(CMatrix::zeros(d * d, d * d), |a, b| a + b);
    Ok(DysonPropagator { superoperator, orders, tail_bound, nodes: ev.node_count() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_batch_products() {
        let d = 3;
        let ops: Vec<CMatrix> =
            (0..4).map(|k| CMatrix::from_fn(d, d, |i, j| Complex64::new((i + 2 * j + k) as f64, k as f64))).collect();
        let v = CMatrix::from_fn(d, d, |i, j| Complex64::new(i as f64 - j as f64, 0.5));
        let packed = pack(&ops);
        let mut right = CMatrix::zeros(d, 4 * d);
        DMatrixViewMut::from_slice(right.as_mut_slice(), 4 * d, d).gemm(
            Complex64::new(1.0, 0.0),
            &DMatrixView::from_slice(packed.as_slice(), 4 * d, d),
            &v,
            Complex64::new(0.0, 0.0),
        );
        for ((x, l), r) in ops.iter().zip(unpack(&(&v * &packed), d, 4)).zip(unpack(&right, d, 4)) {
            assert!((&v * x - l).norm() < 1e-12);
            assert!((x * &v - r).norm() < 1e-12);
        }
    }

    #[test]
    fn tail_of_exponential_series() {
        let x: f64 = 0.3;
        let head = 1.0 + x + x * x / 2.0;
        assert!((majorant_tail(x, 2) - (x.exp() - head)).abs() < 1e-15);
        assert_eq!(majorant_tail(0.0, 1), 0.0);
    }

    #[test]
    fn cumulative_grid_integrates_oscillation() {
        let grid = TimeGrid::new(6.0, 6, 12);
        let f: Vec<CMatrix> = grid
            .nodes
            .iter()
            .map(|&s| CMatrix::from_element(1, 1, Complex64::from_polar(1.0, 1.7 * s)))
            .collect();
        let (g, total) = grid.integrate(&f);
        let exact = |s: f64| (Complex64::from_polar(1.0, 1.7 * s) - 1.0) / Complex64::new(0.0, 1.7);
        assert!((total[(0, 0)] - exact(6.0)).norm() < 1e-11);
        for (s, gj) in grid.nodes.iter().zip(&g) {
            assert!((gj[(0, 0)] - exact(*s)).norm() < 1e-10);
        }
    }
}
