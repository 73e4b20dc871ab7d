//! Small dense linear-algebra helpers on complex matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::CMatrix;

/// Eigenvalues (ascending) and matching eigenvector columns of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let sym = hermitian_part(m);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().sum()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn expm(m: &CMatrix) -> CMatrix {
    m.clone().exp()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn real_scalar(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Lowest Ritz value of a Hermitian operator given only through its action.
///
/// Full reorthogonalisation keeps the Krylov basis clean; the returned value is
/// an upper bound on the smallest eigenvalue that tightens with `steps`.
pub fn lanczos_min_eigenvalue<F>(dim: usize, steps: usize, mut apply: F) -> f64
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    let steps = steps.min(dim).max(1);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(steps);
    let mut start: Vec<Complex64> = (0..dim)
        .map(|i| {
            let t = (i as f64 + 1.0) * 0.618_033_988_749_895;
            Complex64::new((t * 12.9898).sin(), (t * 78.233).cos())
        })
        .collect();
    normalize(&mut start);
    basis.push(start);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    for j in 0..steps {
        apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for v in &basis {
            let c = dot(v, &w);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= c * vi;
            }
        }
        let b = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if j + 1 == steps || b < 1e-12 {
            break;
        }
        beta.push(b);
        let next: Vec<Complex64> = w.iter().map(|z| z / b).collect();
        basis.push(next);
    }
    let k = alpha.len();
    let t = DMatrix::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    t.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize(v: &mut [Complex64]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v {
        *z /= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_hermitian(n: usize) -> CMatrix {
        let m = CMatrix::from_fn(n, n, |i, j| {
            Complex64::new(((3 * i + 7 * j) as f64).sin(), ((5 * i + j) as f64).cos())
        });
        hermitian_part(&m)
    }

    #[test]
    fn eigen_is_sorted_and_reconstructs() {
        let m = sample_hermitian(6);
        let (vals, vecs) = hermitian_eigen(&m);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            6,
            vals.iter().map(|&v| real_scalar(v)),
        ));
        assert!(max_abs(&(&vecs * d * vecs.adjoint() - &m)) < 1e-12);
    }

    #[test]
    fn lanczos_finds_lowest_eigenvalue() {
        let m = sample_hermitian(40);
        let exact = min_hermitian_eigenvalue(&m);
        let est = lanczos_min_eigenvalue(40, 40, |v, out| {
            let r = &m * nalgebra::DVector::from_column_slice(v);
            out.copy_from_slice(r.as_slice());
        });
        assert!((est - exact).abs() < 1e-9, "{est} vs {exact}");
    }

    #[test]
    fn norms_of_diagonal() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            real_scalar(-3.0),
            real_scalar(1.0),
        ]));
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-14);
        assert!((trace_norm(&m) - 4.0).abs() < 1e-14);
    }
}
