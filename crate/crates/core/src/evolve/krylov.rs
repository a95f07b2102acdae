//! Lanczos approximation of `exp(-i H t) v` for real symmetric sparse `H`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::SparseHamiltonian;

/// Upper bound on the Krylov subspace dimension.
pub const MAX_KRYLOV_DIM: usize = 40;
/// Per-step error target on the propagated vector.
pub const STEP_TOL: f64 = 1e-11;

const BREAKDOWN: f64 = 1e-13;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// A Lanczos basis for one starting vector.
struct Lanczos {
    basis: Vec<Vec<Complex64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Residual norm after the last vector; zero on an invariant subspace.
    residual: f64,
}

impl Lanczos {
    fn build(h: &SparseHamiltonian, start: &[Complex64], max_dim: usize) -> Self {
        let n = h.dim();
        let norm0 = norm(start);
        let mut basis = vec![start.iter().map(|z| z / norm0).collect::<Vec<_>>()];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let mut w = vec![Complex64::default(); n];
        let limit = max_dim.min(n);
        loop {
            let k = basis.len() - 1;
            h.apply(&basis[k], &mut w);
            let a = dot(&basis[k], &w).re;
            alpha.push(a);
            // Full reorthogonalization, done twice.
            for _ in 0..2 {
                for v in &basis {
                    let proj = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= proj * vi);
                }
            }
            let b = norm(&w);
            if b < BREAKDOWN * (1.0 + a.abs()) || basis.len() == limit {
                return Self { basis, alpha, beta, residual: if b < BREAKDOWN { 0.0 } else { b } };
            }
            beta.push(b);
            basis.push(w.iter().map(|z| z / b).collect());
        }
    }

    fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        let m = self.alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = self.alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        SymmetricEigen::new(t)
    }
}

/// `exp(-i T tau) e_1` in the Lanczos coordinates.
fn small_exp(eig: &SymmetricEigen<f64, nalgebra::Dyn>, tau: f64) -> Vec<Complex64> {
    let m = eig.eigenvalues.len();
    (0..m)
        .map(|r| {
            (0..m)
                .map(|k| {
                    let phase = Complex64::new(0.0, -eig.eigenvalues[k] * tau).exp();
                    phase * eig.eigenvectors[(r, k)] * eig.eigenvectors[(0, k)]
                })
                .sum()
        })
        .collect()
}

/// `exp(-i H t) v` with adaptive substeps; each substep keeps the Lanczos residual
/// estimate below `STEP_TOL`.
pub fn expm_apply(h: &SparseHamiltonian, v: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    let mut psi = v.to_vec();
    let scale = norm(v);
    if t == 0.0 || scale == 0.0 {
        return Ok(psi);
    }
    let mut elapsed: f64 = 0.0;
    let mut steps = 0usize;
    while elapsed.abs() < t.abs() {
        steps += 1;
        if steps > 100_000 {
            return Err(Error::Krylov(format!("no progress after {steps} substeps")));
        }
        let lanczos = Lanczos::build(h, &psi, MAX_KRYLOV_DIM);
        let eig = lanczos.eigen();
        let m = lanczos.alpha.len();
        let remaining = t - elapsed;
        let mut tau = remaining;
        let mut coeffs;
        loop {
            coeffs = small_exp(&eig, tau);
            let err = lanczos.residual * coeffs[m - 1].norm();
            if err <= STEP_TOL || lanczos.residual == 0.0 {
                break;
            }
            tau *= 0.5;
            if tau.abs() < 1e-300 {
                return Err(Error::Krylov("step size underflow".into()));
            }
        }
        let current = norm(&psi);
        let mut next = vec![Complex64::default(); psi.len()];
        for (c, vk) in coeffs.iter().zip(&lanczos.basis) {
            let c = c * current;
            next.iter_mut().zip(vk).for_each(|(n, x)| *n += c * x);
        }
        psi = next;
        if tau == remaining {
            break;
        }
        elapsed += tau;
    }
    Ok(psi)
}
