//! Dense tableau simplex for `max c^T x` subject to `A x <= b`, `x >= 0`, `b >= 0`.
//!
//! The origin is feasible, so a single phase suffices. Dantzig pricing with Bland's rule
//! after a run of degenerate pivots.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

pub fn maximize(objective: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> Result<LpSolution> {
    let nv = objective.len();
    let nr = rows.len();
    if rhs.len() != nr || rows.iter().any(|r| r.len() != nv) {
        return Err(Error::Lp("inconsistent constraint dimensions".into()));
    }
    if rhs.iter().any(|&b| b < 0.0 || !b.is_finite()) {
        return Err(Error::Lp("right-hand sides must be finite and nonnegative".into()));
    }
    // Columns: nv structural, nr slack, then rhs.
    let width = nv + nr + 1;
    let mut t = vec![0.0; (nr + 1) * width];
    for (r, row) in rows.iter().enumerate() {
        t[r * width..r * width + nv].copy_from_slice(row);
        t[r * width + nv + r] = 1.0;
        t[r * width + width - 1] = rhs[r];
    }
    // Objective row holds reduced costs -c; optimal when all are >= 0.
    let obj = nr * width;
    for (k, &c) in objective.iter().enumerate() {
        t[obj + k] = -c;
    }
    let mut basic: Vec<usize> = (nv..nv + nr).collect();
    let mut pivots = 0;
    let mut streak = 0;
    let limit = 100 * (nr + nv).max(100);
    loop {
        let bland = streak >= DEGENERATE_STREAK;
        let mut enter = None;
        let mut best = -PIVOT_TOL;
        for k in 0..nv + nr {
            let rc = t[obj + k];
            if rc < best {
                enter = Some(k);
                if bland {
                    break;
                }
                best = rc;
            }
        }
        let Some(e) = enter else { break };
        let mut leave = None;
        let mut ratio = f64::INFINITY;
        for r in 0..nr {
            let a = t[r * width + e];
            if a > PIVOT_TOL {
                let q = t[r * width + width - 1] / a;
                let tie = leave.is_some_and(|l: usize| q == ratio && basic[r] < basic[l]);
                if q < ratio || tie {
                    ratio = q;
                    leave = Some(r);
                }
            }
        }
        let Some(l) = leave else {
            return Err(Error::Lp("objective unbounded".into()));
        };
        streak = if ratio <= PIVOT_TOL { streak + 1 } else { 0 };
        pivot(&mut t, width, nr + 1, l, e);
        basic[l] = e;
        pivots += 1;
        if pivots > limit {
            return Err(Error::Lp(format!("simplex exceeded {limit} pivots")));
        }
    }
    let mut x = vec![0.0; nv];
    for (r, &b) in basic.iter().enumerate() {
        if b < nv {
            x[b] = t[r * width + width - 1];
        }
    }
    let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { value, x, pivots })
}

fn pivot(t: &mut [f64], width: usize, rows: usize, pr: usize, pc: usize) {
    let p = t[pr * width + pc];
    for k in 0..width {
        t[pr * width + k] /= p;
    }
    let pivot_row: Vec<f64> = t[pr * width..(pr + 1) * width].to_vec();
    for r in 0..rows {
        if r == pr {
            continue;
        }
        let f = t[r * width + pc];
        if f != 0.0 {
            for (k, pv) in pivot_row.iter().enumerate() {
                t[r * width + k] -= f * pv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // max 3x + 5y; x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6).
        let sol = maximize(&[3.0, 5.0], &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]], &[4.0, 12.0, 18.0]).unwrap();
        assert!((sol.value - 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_reported() {
        assert!(maximize(&[1.0], &[vec![-1.0]], &[1.0]).is_err());
    }
}
