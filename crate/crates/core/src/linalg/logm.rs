//! Principal matrix logarithm through the real Jordan form.

use nalgebra::DMatrix;

use super::jordan::{real_jordan, BlockKind, JordanBlock, DEFAULT_CLUSTER_TOL};
use crate::{Error, Result};

/// Real principal logarithm of `a`.
///
/// Fails with [`Error::LogDomain`] when a real eigenvalue is zero or negative.
pub fn principal_log(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    principal_log_with(a, None)
}

/// Like [`principal_log`], but real eigenvalues within `unit_snap` of 1 map
/// to exactly 0. Used for the DC state of discrete signal models, whose
/// eigenvalue legitimately sits at 1 up to numerical jitter.
pub fn principal_log_with(a: &DMatrix<f64>, unit_snap: Option<f64>) -> Result<DMatrix<f64>> {
    let jd = real_jordan(a, DEFAULT_CLUSTER_TOL)?;
    let n = a.nrows();
    let mut log_j = DMatrix::zeros(n, n);
    for b in &jd.blocks {
        let l = block_log(b, unit_snap)?;
        let s = b.start;
        log_j.view_mut((s, s), l.shape()).copy_from(&l);
    }
    Ok(&jd.t * log_j * &jd.t_inv)
}

fn block_log(b: &JordanBlock, unit_snap: Option<f64>) -> Result<DMatrix<f64>> {
    let w = b.width();
    let len = b.len();
    let mut head = DMatrix::zeros(w, w);
    let mut diag_inv = DMatrix::zeros(w, w);
    match b.kind {
        BlockKind::Real => {
            if b.sigma <= 0.0 {
                return Err(Error::LogDomain { re: b.sigma, im: 0.0 });
            }
            let snapped = unit_snap.is_some_and(|tol| (b.sigma - 1.0).abs() <= tol);
            head[(0, 0)] = if snapped { 0.0 } else { b.sigma.ln() };
            diag_inv[(0, 0)] = 1.0 / b.sigma;
        }
        BlockKind::ComplexPair => {
            let r2 = b.sigma * b.sigma + b.omega * b.omega;
            let ln_r = 0.5 * r2.ln();
            let theta = b.omega.atan2(b.sigma);
            head[(0, 0)] = ln_r;
            head[(1, 1)] = ln_r;
            head[(0, 1)] = theta;
            head[(1, 0)] = -theta;
            // [[σ, ω], [−ω, σ]]⁻¹ = [[σ, −ω], [ω, σ]] / r²
            diag_inv[(0, 0)] = b.sigma / r2;
            diag_inv[(1, 1)] = b.sigma / r2;
            diag_inv[(0, 1)] = -b.omega / r2;
            diag_inv[(1, 0)] = b.omega / r2;
        }
    }

    let mut out = DMatrix::zeros(len, len);
    for k in 0..b.multiplicity {
        out.view_mut((k * w, k * w), (w, w)).copy_from(&head);
    }
    if b.multiplicity > 1 {
        // log(D + N) = log D + Σ (−1)^{k+1} (D⁻¹N)^k / k, finite since D⁻¹N is
        // nilpotent and commutes with D.
        let mut m = DMatrix::zeros(len, len);
        for k in 0..b.multiplicity - 1 {
            m.view_mut((k * w, (k + 1) * w), (w, w)).copy_from(&diag_inv);
        }
        let mut power = m.clone();
        for k in 1..b.multiplicity {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            out += &power * (sign / k as f64);
            power = &power * &m;
        }
    }
    Ok(out)
}
