//! Exact and numerical facts about the two-site ladder matrices behind the exact transfer
//! times: the Sylvester-Kac spectrum, closed-form eigenvectors, the half-period corner
//! amplitude, and the strong-interaction limit of the resonant ladder.
//!
//! Matrices are indexed by `m = 0..=M`, the occupation of the left site.

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// The symmetric ladder `G`, the Sylvester-Kac matrix `G~`, and the diagonal scaling
/// `gamma` with `G~ = diag(gamma) G diag(gamma)^-1` and `gamma_0 = 1`.
#[derive(Debug, Clone)]
pub struct KacSystem {
    pub m: usize,
    pub g: DMatrix<f64>,
    pub g_tilde: DMatrix<f64>,
    pub scaling: Vec<f64>,
}

impl KacSystem {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Parameter("the ladder needs M >= 1".into()));
        }
        let n = m + 1;
        let mut g = DMatrix::zeros(n, n);
        let mut g_tilde = DMatrix::zeros(n, n);
        for r in 0..m {
            let up = (((r + 1) * (m - r)) as f64).sqrt();
            g[(r, r + 1)] = up;
            g[(r + 1, r)] = up;
            g_tilde[(r, r + 1)] = (r + 1) as f64;
            g_tilde[(r + 1, r)] = (m - r) as f64;
        }
        let mut scaling = vec![1.0; n];
        for r in 0..m {
            // gamma_r / gamma_{r+1} = sqrt((r+1) / (M-r)).
            scaling[r + 1] = scaling[r] * (((m - r) as f64) / ((r + 1) as f64)).sqrt();
        }
        Ok(Self { m, g, g_tilde, scaling })
    }

    /// `max |P G P^-1 - G~|`.
    pub fn similarity_defect(&self) -> f64 {
        let n = self.m + 1;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let v = self.scaling[a] * self.g[(a, b)] / self.scaling[b];
                worst = worst.max((v - self.g_tilde[(a, b)]).abs());
            }
        }
        worst
    }
}

/// Eigenvalues of `G~`, largest first, computed from the symmetric similar matrix `G`.
pub fn kac_spectrum(m: usize) -> Result<Vec<f64>> {
    let sys = KacSystem::new(m)?;
    let mut values: Vec<f64> = SymmetricEigen::new(sys.g).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Closed-form eigenvectors of `G~` for eigenvalues `M - 2k`.
///
/// `right[k][m] = sum_i (-1)^(m-i) C(k, m-i) C(M-k, i)`, the coefficients of
/// `(1+z)^(M-k) (1-z)^k`. `left_scaled[k][m] = sum_i (-1)^(k-i) C(m, k-i) C(M-m, i)` is the
/// left eigenvector times `2^M`.
#[derive(Debug, Clone)]
pub struct KacEigenvectors {
    pub m: usize,
    pub right: Vec<Vec<BigInt>>,
    pub left_scaled: Vec<Vec<BigInt>>,
}

pub fn kac_eigenvectors(m: usize) -> Result<KacEigenvectors> {
    if m == 0 {
        return Err(Error::Parameter("the ladder needs M >= 1".into()));
    }
    let signed = |p: isize| if p.rem_euclid(2) == 0 { BigInt::one() } else { -BigInt::one() };
    let mut right = vec![vec![BigInt::zero(); m + 1]; m + 1];
    let mut left = vec![vec![BigInt::zero(); m + 1]; m + 1];
    for k in 0..=m {
        for r in 0..=m {
            let mut acc = BigInt::zero();
            for i in 0..=r {
                acc += signed(r as isize - i as isize) * binomial(k, r - i) * binomial(m - k, i);
            }
            right[k][r] = acc;
            let mut acc = BigInt::zero();
            for i in 0..=k {
                acc += signed(k as isize - i as isize) * binomial(r, k - i) * binomial(m - r, i);
            }
            left[k][r] = acc;
        }
    }
    Ok(KacEigenvectors { m, right, left_scaled: left })
}

impl KacEigenvectors {
    /// `sum_m left[i][m] right[j][m]` times `2^M`, exactly.
    pub fn gram_scaled(&self) -> Vec<Vec<BigInt>> {
        let n = self.m + 1;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|r| &self.left_scaled[i][r] * &self.right[j][r]).sum())
                    .collect()
            })
            .collect()
    }

    /// Whether the Gram matrix equals `2^M` times the identity.
    pub fn is_biorthogonal(&self) -> bool {
        let scale = BigInt::one() << self.m;
        self.gram_scaled().iter().enumerate().all(|(i, row)| {
            row.iter()
                .enumerate()
                .all(|(j, v)| if i == j { *v == scale } else { v.is_zero() })
        })
    }

    /// `max |<l_i, r_j> - delta_ij|` in floating point.
    pub fn biorthogonality_defect(&self) -> f64 {
        let scale = 2f64.powi(self.m as i32);
        let mut worst: f64 = 0.0;
        for (i, row) in self.gram_scaled().iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v.to_f64().unwrap_or(f64::INFINITY) / scale - target).abs());
            }
        }
        worst
    }

    /// Whether `G~ r_k = (M - 2k) r_k` and `l_k G~ = (M - 2k) l_k` hold exactly.
    pub fn satisfies_eigen_equations(&self) -> bool {
        let m = self.m;
        let at = |v: &[BigInt], r: isize| -> BigInt {
            if r < 0 || r > m as isize {
                BigInt::zero()
            } else {
                v[r as usize].clone()
            }
        };
        (0..=m).all(|k| {
            let lambda = BigInt::from(m as isize - 2 * k as isize);
            (0..=m).all(|r| {
                let ri = r as isize;
                // Row r of G~: (M - r + 1) at column r-1, (r + 1) at column r+1.
                let gr = BigInt::from(m + 1 - r) * at(&self.right[k], ri - 1)
                    + BigInt::from(r + 1) * at(&self.right[k], ri + 1);
                // Column r of G~: r at row r-1, (M - r) at row r+1.
                let lg = BigInt::from(r) * at(&self.left_scaled[k], ri - 1)
                    + BigInt::from(m - r) * at(&self.left_scaled[k], ri + 1);
                gr == &lambda * &self.right[k][r] && lg == &lambda * &self.left_scaled[k][r]
            })
        })
    }

    /// `max |G~ r_k - (M - 2k) r_k| / max |r_k|` in floating point.
    pub fn eigen_residual(&self) -> f64 {
        let sys = KacSystem::new(self.m).expect("validated at construction");
        let mut worst: f64 = 0.0;
        for k in 0..=self.m {
            let v: Vec<f64> = self.right[k].iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
            let norm = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let lambda = self.m as f64 - 2.0 * k as f64;
            for r in 0..=self.m {
                let gv: f64 = (0..=self.m).map(|c| sys.g_tilde[(r, c)] * v[c]).sum();
                worst = worst.max((gv - lambda * v[r]).abs() / norm);
            }
        }
        worst
    }
}

/// `[exp(-i pi G~ / 2)]_{1, M-1}` by dense eigendecomposition of `G`.
pub fn corner_amplitude(m: usize) -> Result<Complex64> {
    if m < 2 {
        return Err(Error::Parameter("the corner amplitude needs M >= 2".into()));
    }
    let sys = KacSystem::new(m)?;
    let eig = SymmetricEigen::new(sys.g.clone());
    let (a, b) = (1, m - 1);
    let mut acc = Complex64::default();
    for k in 0..=m {
        let phase = Complex64::new(0.0, -std::f64::consts::FRAC_PI_2 * eig.eigenvalues[k]).exp();
        acc += phase * eig.eigenvectors[(a, k)] * eig.eigenvectors[(b, k)];
    }
    Ok(acc * sys.scaling[a] / sys.scaling[b])
}

/// The same entry from the closed-form eigenvectors, summed exactly:
/// `(-i)^M 2^-M sum_k (-1)^k right[k][1] left_scaled[k][M-1]`.
pub fn corner_amplitude_exact(m: usize) -> Result<Complex64> {
    if m < 2 {
        return Err(Error::Parameter("the corner amplitude needs M >= 2".into()));
    }
    let vecs = kac_eigenvectors(m)?;
    let mut sum = BigInt::zero();
    for k in 0..=m {
        let term = &vecs.right[k][1] * &vecs.left_scaled[k][m - 1];
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let magnitude = sum.abs().to_f64().unwrap_or(f64::INFINITY) / 2f64.powi(m as i32);
    let sign = if sum.is_negative() { -1.0 } else { 1.0 };
    // (-i)^M cycles through 1, -i, -1, i.
    let unit = match m % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    };
    Ok(unit * sign * magnitude)
}

/// Outcome of the closing binomial identities for one `M`, each checked exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BinomialIdentities {
    pub m: usize,
    /// `sum_{k<M} C(M,k) = 2^M - 1`
    pub total: bool,
    /// `sum_{k<M} k C(M,k) = M 2^(M-1) - M`
    pub first_moment: bool,
    /// `sum_{k<M} k(k-1) C(M,k) = M(M-1) 2^(M-2) - M(M-1)`
    pub second_moment: bool,
    /// `M + sum_{k<M} (M-2k)^2 C(M-1,k) / (M-k) = 2^M`
    pub bracket: bool,
}

impl BinomialIdentities {
    pub fn all(&self) -> bool {
        self.total && self.first_moment && self.second_moment && self.bracket
    }
}

pub fn binomial_identity_suite(m: usize) -> Result<BinomialIdentities> {
    if m < 2 {
        return Err(Error::Parameter("the identities need M >= 2".into()));
    }
    let big = |v: usize| BigInt::from(v);
    let pow2 = |e: usize| BigInt::one() << e;
    let (mut s0, mut s1, mut s2) = (BigInt::zero(), BigInt::zero(), BigInt::zero());
    // Bracket sum times M: C(M-1,k) / (M-k) = C(M,k) / M.
    let mut bracket = big(m) * big(m);
    for k in 0..m {
        let c = binomial(m, k);
        s1 += big(k) * &c;
        s2 += big(k) * big(k.saturating_sub(1)) * &c;
        let d = BigInt::from(m as isize - 2 * k as isize);
        bracket += &d * &d * &c;
        s0 += c;
    }
    Ok(BinomialIdentities {
        m,
        total: s0 == pow2(m) - 1,
        first_moment: s1 == big(m) * pow2(m - 1) - big(m),
        second_moment: s2 == big(m) * big(m - 1) * pow2(m - 2) - big(m) * big(m - 1),
        bracket: bracket == big(m) * pow2(m),
    })
}

/// The resonant ladder `g_{m,m-1} = J M sqrt(m (M-m+1))`, `g_mm = U (M-m)(M+m-2k+1)`.
pub fn resonant_ladder(m: usize, k: usize, j: f64, u: f64) -> Result<DMatrix<f64>> {
    if m == 0 || k == 0 || k > m {
        return Err(Error::Parameter(format!("need 1 <= k <= M, got k = {k}, M = {m}")));
    }
    let n = m + 1;
    let mut g = DMatrix::zeros(n, n);
    for r in 0..n {
        g[(r, r)] = u * (m - r) as f64 * (m as f64 + r as f64 + 1.0 - 2.0 * k as f64);
        if r > 0 {
            let off = j * m as f64 * ((r * (m - r + 1)) as f64).sqrt();
            g[(r, r - 1)] = off;
            g[(r - 1, r)] = off;
        }
    }
    Ok(g)
}

/// Strong-interaction behaviour of the resonant ladder at one `U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitRow {
    pub u: f64,
    /// The resonant pair of eigenvalues minus the shared diagonal, larger first.
    pub shifted_pair: (f64, f64),
    /// `J M sqrt(k (M-k+1))`.
    pub target: f64,
    /// `max |shifted_pair -/+ target|`.
    pub pair_error: f64,
    /// Largest `|lambda - diagonal|` over the remaining eigenvalues.
    pub off_pair_shift: f64,
    /// Smaller squared overlap of the pair's eigenvectors with `(e_{k-1} +/- e_k) / sqrt 2`.
    pub overlap: f64,
}

pub fn resonant_limit_spectrum(m: usize, k: usize, j: f64, us: &[f64]) -> Result<Vec<LimitRow>> {
    us.iter()
        .map(|&u| {
            let g = resonant_ladder(m, k, j, u)?;
            let diag: Vec<f64> = (0..=m).map(|r| g[(r, r)]).collect();
            let eig = SymmetricEigen::new(g);
            let n = m + 1;
            let weight = |c: usize| {
                let v = eig.eigenvectors.column(c);
                v[k - 1].powi(2) + v[k].powi(2)
            };
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| weight(b).total_cmp(&weight(a)));
            let (p, q) = (order[0], order[1]);
            let (hi, lo) = if eig.eigenvalues[p] >= eig.eigenvalues[q] { (p, q) } else { (q, p) };
            let shift = diag[k - 1];
            let target = j * m as f64 * ((k * (m - k + 1)) as f64).sqrt();
            let pair = (eig.eigenvalues[hi] - shift, eig.eigenvalues[lo] - shift);
            let pair_error = (pair.0 - target).abs().max((pair.1 + target).abs());
            let mut rest_vals: Vec<f64> = order[2..].iter().map(|&c| eig.eigenvalues[c]).collect();
            let mut rest_diag: Vec<f64> = (0..n).filter(|&r| r != k - 1 && r != k).map(|r| diag[r]).collect();
            rest_vals.sort_by(f64::total_cmp);
            rest_diag.sort_by(f64::total_cmp);
            let off_pair_shift = rest_vals.iter().zip(&rest_diag).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let overlap_with = |c: usize, sign: f64| {
                let v = eig.eigenvectors.column(c);
                (h * v[k - 1] + sign * h * v[k]).powi(2)
            };
            let overlap = overlap_with(hi, 1.0).min(overlap_with(lo, -1.0));
            Ok(LimitRow { u, shifted_pair: pair, target, pair_error, off_pair_shift, overlap })
        })
        .collect()
}
