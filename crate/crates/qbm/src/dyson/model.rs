use num_complex::Complex64;

use super::DysonError;
use crate::CMatrix;
use crate::bath::{BathSpec, FiniteVolumeBath, torus_correlation};
use crate::numerics::linalg::{expm, spectral_norm};
use crate::particle::{HoppingSpec, InternalSystem, PeriodicBox};

/// Which side of the density matrix a vertex multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];
}

/// One plane wave of the finite-volume correlation:
/// `f(x,t) ∋ absorption·e^{i(q·x+νt)} + emission·e^{-i(q·x+νt)}`.
#[derive(Debug, Clone)]
pub struct BathMode {
    pub momentum: Vec<f64>,
    pub frequency: f64,
    pub absorption: f64,
    pub emission: f64,
}

/// A particle on a small periodic box coupled through one bath, with the
/// scaled Hamiltonian `λ²H_hop + S`.
#[derive(Debug, Clone)]
pub struct DysonBox {
    pub lattice: PeriodicBox,
    pub system: InternalSystem,
    pub hopping: HoppingSpec,
    pub bath: BathSpec,
    pub lambda: f64,
    /// Side of the torus the bath lives on; at least the box side.
    pub bath_side: usize,
    hamiltonian: CMatrix,
    modes: Vec<BathMode>,
    coupling_norm: f64,
}

impl DysonBox {
    pub fn new(
        lattice: PeriodicBox,
        system: InternalSystem,
        hopping: HoppingSpec,
        bath: BathSpec,
        lambda: f64,
    ) -> Result<Self, DysonError> {
        Self::with_bath_side(lattice, system, hopping, bath, lambda, lattice.side)
    }

    /// Box whose sites sit at coordinates `0..side` of a larger bath torus.
    /// Pair contractions then use plain coordinate differences, so the
    /// correlation can decay before it recurs.
    pub fn with_bath_side(
        lattice: PeriodicBox,
        system: InternalSystem,
        hopping: HoppingSpec,
        bath: BathSpec,
        lambda: f64,
        bath_side: usize,
    ) -> Result<Self, DysonError> {
        if bath_side < lattice.side {
            return Err(DysonError::Invalid(format!("bath torus side {bath_side} below the box side {}", lattice.side)));
        }
        if system.couplings().len() != 1 {
            return Err(DysonError::Invalid(format!(
                "the expansion takes one bath, the system has {} couplings",
                system.couplings().len()
            )));
        }
        if bath.dimension != lattice.dim || hopping.dim() != lattice.dim {
            return Err(DysonError::Invalid("bath, hopping and box dimensions differ".into()));
        }
        if hopping.internal_dim() != system.dim() {
            return Err(DysonError::Invalid("hopping and internal dimensions differ".into()));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(DysonError::Invalid(format!("coupling {lambda} must be finite and non-negative")));
        }
        bath.validate()?;
        let volume = (bath_side as f64).powi(lattice.dim as i32);
        let modes = FiniteVolumeBath::new(bath.clone(), bath_side)
            .modes()
            .into_iter()
            .map(|(momentum, frequency, wa, we)| BathMode {
                momentum,
                frequency,
                absorption: wa / volume,
                emission: we / volume,
            })
            .collect();
        let sites = CMatrix::identity(lattice.sites(), lattice.sites());
        let hamiltonian = hopping.dense(&lattice) * Complex64::new(lambda * lambda, 0.0)
            + sites.kronecker(system.hamiltonian());
        let coupling_norm = spectral_norm(system.coupling(0));
        Ok(Self { lattice, system, hopping, bath, lambda, bath_side, hamiltonian, modes, coupling_norm })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self, DysonError> {
        Self::with_bath_side(
            self.lattice,
            self.system.clone(),
            self.hopping.clone(),
            self.bath.clone(),
            lambda,
            self.bath_side,
        )
    }

    /// `|Λ|·N`.
    pub fn dim(&self) -> usize {
        self.lattice.sites() * self.system.dim()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn modes(&self) -> &[BathMode] {
        &self.modes
    }

    pub fn coupling(&self) -> &CMatrix {
        self.system.coupling(0)
    }

    pub fn coupling_norm(&self) -> f64 {
        self.coupling_norm
    }

    /// `f^Λ(x, t)` summed directly over the bath-torus momenta.
    pub fn correlation(&self, x: &[i64], t: f64) -> Result<Complex64, DysonError> {
        Ok(torus_correlation(&self.bath, self.bath_side, x, t)?)
    }

    /// Coordinate difference `to − from`, unwrapped.
    pub fn separation(&self, from: usize, to: usize) -> Vec<i64> {
        let (a, b) = (self.lattice.coords(from), self.lattice.coords(to));
        a.iter().zip(&b).map(|(x, y)| y - x).collect()
    }

    /// `f^Λ(x,t,l)`: the correlation on the left, its conjugate on the right.
    pub fn correlation_sided(&self, x: &[i64], t: f64, side: Side) -> Result<Complex64, DysonError> {
        let f = self.correlation(x, t)?;
        Ok(match side {
            Side::Left => f,
            Side::Right => f.conj(),
        })
    }

    /// `f^Λ(0, 0)`.
    pub fn correlation_origin(&self) -> f64 {
        self.modes.iter().map(|m| m.absorption + m.emission).sum()
    }

    /// `W ⊗ |x⟩⟨x|` on the box.
    pub fn site_coupling(&self, site: usize) -> CMatrix {
        let n = self.system.dim();
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        out.view_mut((site * n, site * n), (n, n)).copy_from(self.coupling());
        out
    }

    /// `W ⊗ Σ_x e^{i p·x}|x⟩⟨x|`.
    pub fn plane_wave_coupling(&self, momentum: &[f64]) -> CMatrix {
        let n = self.system.dim();
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for site in 0..self.lattice.sites() {
            let phase: f64 =
                self.lattice.coords(site).iter().zip(momentum).map(|(&x, &p)| x as f64 * p).sum();
            let block = self.coupling() * Complex64::from_polar(1.0, phase);
            out.view_mut((site * n, site * n), (n, n)).copy_from(&block);
        }
        out
    }

    /// `e^{-itH_P}`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        expm(&(&self.hamiltonian * Complex64::new(0.0, -t)))
    }

    /// `V(t) = e^{itH_P} A e^{-itH_P}`.
    pub fn heisenberg(&self, a: &CMatrix, t: f64) -> CMatrix {
        let u = self.propagator(t);
        u.adjoint() * a * u
    }

    /// Largest phase rate of the interaction-picture integrand: the spread of
    /// `H_P` plus the fastest bath mode.
    pub fn frequency_scale(&self) -> f64 {
        let (e, _) = crate::numerics::linalg::hermitian_eigen(&self.hamiltonian);
        let spread = e.last().copied().unwrap_or(0.0) - e.first().copied().unwrap_or(0.0);
        spread + self.modes.iter().map(|m| m.frequency).fold(0.0, f64::max)
    }
}
