//! Purely stochastic subspace identification.
//!
//! Output data are stacked into a block Hankel matrix, the future rows are
//! projected onto the past rows, and a (weighted) SVD of the projection
//! yields the extended observability matrix. Every projection is carried
//! out through one LQ factorization of the stacked data, so beyond that
//! factorization only small `2mi × 2mi` matrices are touched.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{inverse, pinv, rank, spectral_radius, svd_sorted, DEFAULT_PINV_TOL};
use crate::{Error, Result};

/// Default maximum iteration count for the covariance-form Riccati.
pub const RICCATI_MAX_ITER: usize = 10_000;

/// Relative convergence tolerance of the Riccati fixed point.
pub const RICCATI_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeReport {
    pub rank: usize,
    pub satisfied: bool,
}

/// Persistent-excitation order check on the input record `u` (`r × N`).
///
/// Builds the `i`-block-row Hankel matrix starting at sample `from` and
/// tests whether its sample Gram matrix has full rank `r·i`.
pub fn pe_order(u: &DMatrix<f64>, i: usize, from: usize) -> Result<PeReport> {
    let (r, n) = u.shape();
    if i == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    if n < from + i {
        return Err(Error::InsufficientData { needed: from + i, have: n });
    }
    let cols = n - from - i + 1;
    let mut gram = DMatrix::zeros(r * i, r * i);
    let mut col = DVector::zeros(r * i);
    for c in 0..cols {
        for b in 0..i {
            col.rows_mut(b * r, r).copy_from(&u.column(from + c + b));
        }
        gram.ger(1.0, &col, &col, 1.0);
    }
    gram /= cols as f64;
    let rk = rank(&gram, 1e-8);
    Ok(PeReport { rank: rk, satisfied: rk == r * i })
}

/// Output block Hankel matrix `[Y_p; Y_f]` with `i` block rows each.
#[derive(Debug, Clone)]
pub struct HankelPartition {
    /// `2mi × j`: rows `0..mi` are `Y_p`, rows `mi..2mi` are `Y_f`.
    pub data: DMatrix<f64>,
    pub i: usize,
    pub j: usize,
    pub m: usize,
}

impl HankelPartition {
    pub fn y_p(&self) -> DMatrix<f64> {
        self.data.rows(0, self.m * self.i).into_owned()
    }

    pub fn y_f(&self) -> DMatrix<f64> {
        self.data.rows(self.m * self.i, self.m * self.i).into_owned()
    }

    pub fn y_p_plus(&self) -> DMatrix<f64> {
        self.data.rows(0, self.m * (self.i + 1)).into_owned()
    }

    pub fn y_f_minus(&self) -> DMatrix<f64> {
        self.data.rows(self.m * (self.i + 1), self.m * (self.i - 1)).into_owned()
    }
}

/// Largest admissible column count for `N` samples and `i` block rows.
pub fn max_columns(n: usize, i: usize) -> usize {
    (n + 1).saturating_sub(2 * i)
}

/// Builds the Hankel partition from `y` (`m × N`). `j = None` uses the
/// maximal column count.
pub fn block_hankel(y: &DMatrix<f64>, i: usize, j: Option<usize>) -> Result<HankelPartition> {
    let (m, n) = y.shape();
    if i < 1 {
        return Err(Error::InvalidArgument("need at least one block row".into()));
    }
    let j = j.unwrap_or_else(|| max_columns(n, i));
    if j == 0 || n < 2 * i + j - 1 {
        return Err(Error::InsufficientData { needed: 2 * i + j.max(1) - 1, have: n });
    }
    let mut data = DMatrix::zeros(2 * m * i, j);
    for b in 0..2 * i {
        data.view_mut((b * m, 0), (m, j)).copy_from(&y.columns(b, j));
    }
    Ok(HankelPartition { data, i, j, m })
}

/// Lower-triangular factor of `H/√j` and the projection coefficients.
///
/// `O_i = coeff · Y_p` and `O_{i−1} = coeff_minus · Y_p⁺`, so the full
/// projections are only materialized on request.
#[derive(Debug, Clone)]
pub struct Projections {
    /// `L` with `H/√j = L·Qᵀ`; `L·Lᵀ` is the sample covariance of the rows.
    pub l: DMatrix<f64>,
    pub coeff: DMatrix<f64>,
    pub coeff_minus: DMatrix<f64>,
    /// False when the past block was rank deficient and a pseudo-inverse
    /// carried the projection.
    pub past_full_rank: bool,
    i: usize,
    m: usize,
}

impl Projections {
    /// `Y_f / Y_p` as an `mi × j` matrix.
    pub fn o_i(&self, h: &HankelPartition) -> DMatrix<f64> {
        &self.coeff * h.y_p()
    }

    /// `Y_f⁻ / Y_p⁺` as an `m(i−1) × j` matrix.
    pub fn o_i_minus(&self, h: &HankelPartition) -> DMatrix<f64> {
        &self.coeff_minus * h.y_p_plus()
    }

    /// `O_i` in the orthonormal row basis of the data (`mi × mi`). Same
    /// left singular vectors and singular values as `O_i / √j`.
    pub fn o_i_compact(&self) -> DMatrix<f64> {
        let mi = self.m * self.i;
        &self.coeff * self.l.view((0, 0), (mi, mi))
    }

    /// Sample covariance `H·Hᵀ/j`.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }
}

/// Orthogonal projections of the future rows onto the past rows.
pub fn project(h: &HankelPartition) -> Projections {
    let rows = h.data.nrows();
    let l = if h.j >= rows {
        tall_r(&h.data, 1.0 / (h.j as f64).sqrt()).transpose()
    } else {
        // Fewer columns than rows: fall back to a Cholesky-free square root
        // of the Gram matrix through its SVD (rare, tiny records only).
        let g = &h.data * h.data.transpose() / h.j as f64;
        let (u, s, _) = svd_sorted(&g);
        let mut us = u.clone();
        for (k, mut c) in us.column_iter_mut().enumerate() {
            c *= s[k].sqrt();
        }
        us
    };
    let mi = h.m * h.i;
    let (coeff, full1) = split_coeff(&l, mi, mi);
    let (coeff_minus, full2) = split_coeff(&l, h.m * (h.i + 1), h.m * (h.i - 1));
    Projections {
        l,
        coeff,
        coeff_minus,
        past_full_rank: full1 && full2,
        i: h.i,
        m: h.m,
    }
}

/// Triangular factor `R` of `(scale·H)ᵀ = Q·R`, accumulated over column
/// chunks of `H` so that each QR stays cache sized.
fn tall_r(h: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let rows = h.nrows();
    let cols = h.ncols();
    let chunk = (2 * rows).max(256);
    let mut r: Option<DMatrix<f64>> = None;
    let mut start = 0;
    while start < cols {
        let width = chunk.min(cols - start);
        let block = h.columns(start, width).transpose() * scale;
        let stacked = match r.take() {
            None => block,
            Some(prev) => {
                let mut s = DMatrix::zeros(prev.nrows() + width, rows);
                s.rows_mut(0, prev.nrows()).copy_from(&prev);
                s.rows_mut(prev.nrows(), width).copy_from(&block);
                s
            }
        };
        r = Some(stacked.qr().r());
        start += width;
    }
    let r = r.unwrap_or_else(|| DMatrix::zeros(0, rows));
    if r.nrows() < rows {
        let mut full = DMatrix::zeros(rows, rows);
        full.rows_mut(0, r.nrows()).copy_from(&r);
        full
    } else {
        r
    }
}

/// `L_fp · L_pp†`: projection of rows `p..p+f` onto rows `0..p`.
fn split_coeff(l: &DMatrix<f64>, p: usize, f: usize) -> (DMatrix<f64>, bool) {
    if f == 0 {
        return (DMatrix::zeros(0, p), true);
    }
    let lpp = l.view((0, 0), (p, p)).into_owned();
    let lfp = l.view((p, 0), (f, p)).into_owned();
    let dmax = lpp.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let dmin = lpp.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if dmax > 0.0 && dmin > 1e-10 * dmax {
        if let Some(x) = lpp.transpose().solve_upper_triangular(&lfp.transpose()) {
            return (x.transpose(), true);
        }
    }
    log::warn!("past Hankel block is rank deficient; projecting through a pseudo-inverse");
    (lfp * pinv(&lpp, DEFAULT_PINV_TOL), false)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedSvd {
    pub u1: DMatrix<f64>,
    pub s1: DVector<f64>,
    pub v1: DMatrix<f64>,
    pub order: usize,
    pub singular_values: Vec<f64>,
}

/// SVD of `W1·O·W2` truncated at `order_hint`, or at the largest
/// logarithmic gap of the spectrum when no hint is given.
pub fn weighted_svd(
    o: &DMatrix<f64>,
    w1: Option<&DMatrix<f64>>,
    w2: Option<&DMatrix<f64>>,
    order_hint: Option<usize>,
) -> Result<WeightedSvd> {
    let mut target = match w1 {
        Some(w) => w * o,
        None => o.clone(),
    };
    if let Some(w) = w2 {
        target = &target * w;
    }
    let (u, s, v) = svd_sorted(&target);
    let singular_values: Vec<f64> = s.iter().cloned().collect();
    let order = match order_hint {
        Some(k) => {
            if k > s.len() {
                return Err(Error::InvalidArgument(format!(
                    "order {k} exceeds the {} available singular values",
                    s.len()
                )));
            }
            k
        }
        None => gap_order(&singular_values),
    };
    Ok(WeightedSvd {
        u1: u.columns(0, order).into_owned(),
        s1: s.rows(0, order).into_owned(),
        v1: v.columns(0, order).into_owned(),
        order,
        singular_values,
    })
}

/// Index after the largest ratio `s_k / s_{k+1}` among nonzero values.
pub fn gap_order(s: &[f64]) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    let floor = smax * 1e-300_f64.max(f64::EPSILON * 1e-3);
    let mut best = (0.0, s.len());
    for k in 0..s.len().saturating_sub(1) {
        let ratio = (s[k].max(floor) / s[k + 1].max(floor)).ln();
        if ratio > best.0 {
            best = (ratio, k + 1);
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AEstimation {
    #[default]
    ShiftInvariance,
    StateSequence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StochasticRealization {
    pub a_d: DMatrix<f64>,
    pub c_d: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub lambda0: DMatrix<f64>,
    pub d_offset: DVector<f64>,
    pub singular_values: Vec<f64>,
    pub order: usize,
    pub t_s: f64,
    /// Extended observability matrix `Γ_i`.
    pub gamma: DMatrix<f64>,
    /// Residual covariances `[[Q, S], [Sᵀ, R]]` of the state-sequence fit,
    /// used when the covariance Riccati fails.
    pub qrs: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>,
    pub past_full_rank: bool,
}

/// Row weighting `W1` of the projection before the SVD (`W2 = I`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// `W1 = I`.
    #[default]
    Identity,
    /// `W1 = (Y_f Y_fᵀ/j)^{-1/2}`: canonical variate weighting.
    Cva,
}

/// SSI settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SsiOptions {
    /// Block rows; `None` picks `ceil(1.5·order/m) + 2`.
    pub i: Option<usize>,
    /// Hankel columns; `None` is maximal.
    pub j: Option<usize>,
    pub order_hint: Option<usize>,
    pub a_estimation: AEstimation,
    pub weighting: Weighting,
    /// Remove the sample mean as an output offset before building the
    /// Hankel matrix. Disable when the data carry no offset term: the sample
    /// mean of a transient is not zero and would add a spurious DC state.
    pub demean: bool,
}

impl Default for SsiOptions {
    fn default() -> Self {
        SsiOptions {
            i: None,
            j: None,
            order_hint: None,
            a_estimation: AEstimation::ShiftInvariance,
            weighting: Weighting::Identity,
            demean: true,
        }
    }
}

/// Default block-row count.
pub fn default_block_rows(order: usize, m: usize) -> usize {
    (1.5 * order as f64 / m as f64).ceil() as usize + 2
}

/// Block rows for a record holding sinusoids at `freqs_hz`, capped at `cap`
/// but never below [`default_block_rows`].
///
/// The Hankel window is made to span 1.25 periods of the slowest component:
/// a much shorter window leaves the observability matrix numerically rank
/// deficient when the sampling is fast. Windows holding a near-integer
/// number of periods of any component are skipped, since there the signal
/// part of the state repeats from past to future and the projection loses
/// accuracy.
pub fn block_rows_for_band(order: usize, m: usize, t_s: f64, freqs_hz: &[f64], cap: usize) -> usize {
    let base = default_block_rows(order, m);
    let f_min = freqs_hz.iter().cloned().filter(|f| *f > 0.0).fold(f64::INFINITY, f64::min);
    if !f_min.is_finite() || !(t_s > 0.0) {
        return base;
    }
    let start = base.max(((1.25 / (f_min * t_s)).ceil() as usize).min(cap));
    let aligned = |i: usize| {
        freqs_hz.iter().filter(|f| **f > 0.0).any(|f| {
            let periods = i as f64 * t_s * f;
            periods >= 0.5 && (periods - periods.round()).abs() < 0.1
        })
    };
    (start..=cap.max(start)).chain((base..start).rev()).find(|&i| !aligned(i)).unwrap_or(start)
}

/// Full identification of `(A, C, G, Λ₀)` from an output record `y`
/// (`m × N`, not demeaned).
pub fn identify(y: &DMatrix<f64>, t_s: f64, opts: &SsiOptions) -> Result<StochasticRealization> {
    let (m, n) = y.shape();
    if m == 0 || n == 0 {
        return Err(Error::InsufficientData { needed: 1, have: n });
    }
    let d_offset = if opts.demean {
        DVector::from_iterator(m, y.row_iter().map(|r| r.mean()))
    } else {
        DVector::zeros(m)
    };
    let mut yc = y.clone();
    for (mut row, d) in yc.row_iter_mut().zip(d_offset.iter()) {
        row.add_scalar_mut(-d);
    }
    let i = match (opts.i, opts.order_hint) {
        (Some(i), _) => i,
        (None, Some(order)) => default_block_rows(order, m),
        (None, None) => 10,
    };
    if i < 2 {
        return Err(Error::InvalidArgument("need at least two block rows".into()));
    }
    let h = block_hankel(&yc, i, opts.j)?;
    let proj = project(&h);
    let svd = match opts.weighting {
        Weighting::Identity => weighted_svd(&proj.o_i_compact(), None, None, opts.order_hint)?,
        Weighting::Cva => {
            let (w1, w1_inv) = cva_weights(&proj, m * i)?;
            let mut svd = weighted_svd(&proj.o_i_compact(), Some(&w1), None, opts.order_hint)?;
            // Γ_i = W1⁻¹·U1·S1^{1/2}: fold W1⁻¹ into U1.
            svd.u1 = &w1_inv * &svd.u1;
            svd
        }
    };
    realize(&svd, &proj, &yc, d_offset, t_s, opts.a_estimation, i, m)
}

/// `(Y_f Y_fᵀ/j)^{∓1/2}` from the lower rows of `L`.
fn cva_weights(proj: &Projections, mi: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let lf = proj.l.view((mi, 0), (mi, 2 * mi));
    let cov = lf * lf.transpose();
    let eig = cov.symmetric_eigen();
    let smax = eig.eigenvalues.max();
    if eig.eigenvalues.iter().any(|&v| !(v > 1e-14 * smax)) {
        return Err(Error::Singular("future output covariance for CVA weighting".into()));
    }
    let q = &eig.eigenvectors;
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok((q * inv_sqrt * q.transpose(), q * sqrt * q.transpose()))
}

/// Realization step from the SVD of the projection.
#[allow(clippy::too_many_arguments)]
pub fn realize(
    svd: &WeightedSvd,
    proj: &Projections,
    y_centered: &DMatrix<f64>,
    d_offset: DVector<f64>,
    t_s: f64,
    a_estimation: AEstimation,
    i: usize,
    m: usize,
) -> Result<StochasticRealization> {
    let order = svd.order;
    if order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    let mi = m * i;
    let sqrt_s = DMatrix::from_diagonal(&svd.s1.map(f64::sqrt));
    let gamma = &svd.u1 * &sqrt_s;
    let c_d = gamma.rows(0, m).into_owned();
    let gamma_up = gamma.rows(0, mi - m).into_owned();
    let gamma_down = gamma.rows(m, mi - m).into_owned();
    let gamma_pinv = pinv(&gamma, DEFAULT_PINV_TOL);
    let gamma_up_pinv = pinv(&gamma_up, DEFAULT_PINV_TOL);

    // Row maps of the stacked data H (2mi rows) giving state sequences and
    // the first future output block: X_i = P1·H, X_{i+1} = P2·H, Y_{i|i} = E·H.
    let rows = 2 * mi;
    let mut p1 = DMatrix::zeros(order, rows);
    p1.view_mut((0, 0), (order, mi)).copy_from(&(&gamma_pinv * &proj.coeff));
    let mut p2 = DMatrix::zeros(order, rows);
    p2.view_mut((0, 0), (order, m * (i + 1)))
        .copy_from(&(&gamma_up_pinv * &proj.coeff_minus));
    let mut e = DMatrix::zeros(m, rows);
    e.view_mut((0, mi), (m, m)).fill_with_identity();
    let gram = proj.gram();

    let sxx = &p1 * &gram * p1.transpose();
    let a_d = match a_estimation {
        AEstimation::ShiftInvariance => {
            let a = &gamma_up_pinv * &gamma_down;
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Singular("shift-invariance solve".into()));
            }
            a
        }
        AEstimation::StateSequence => {
            let s2x = &p2 * &gram * p1.transpose();
            &s2x * pinv(&sxx, DEFAULT_PINV_TOL)
        }
    };

    // Y_f·Y_pᵀ/j = L21·L11ᵀ; its last block column is Γ_i·G.
    let l = &proj.l;
    let cross = l.view((mi, 0), (mi, mi)) * l.view((0, 0), (mi, mi)).transpose();
    let g = &gamma_pinv * cross.columns(mi - m, m);

    let n = y_centered.ncols() as f64;
    let lambda0 = y_centered * y_centered.transpose() / n;

    // Residuals w = X_{i+1} − A X_i, v = Y_{i|i} − C X_i.
    let rw = &p2 - &a_d * &p1;
    let rv = &e - &c_d * &p1;
    let q = &rw * &gram * rw.transpose();
    let s = &rw * &gram * rv.transpose();
    let r = &rv * &gram * rv.transpose();

    Ok(StochasticRealization {
        a_d,
        c_d,
        g,
        lambda0,
        d_offset,
        singular_values: svd.singular_values.clone(),
        order,
        t_s,
        gamma,
        qrs: Some((symmetrize(&q), s, symmetrize(&r))),
        past_full_rank: proj.past_full_rank,
    })
}

fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KalmanModel {
    pub a_d: DMatrix<f64>,
    pub c_d: DMatrix<f64>,
    pub k_f: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub innovation_cov: DMatrix<f64>,
    /// Relative residual of the Riccati equation that produced `p`.
    pub riccati_residual: f64,
    pub iterations: usize,
    /// Which Riccati form produced the gain.
    pub source: RiccatiSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiccatiSource {
    Covariance,
    NoiseCovariances,
}

/// Residual of the covariance-form Riccati equation, relative to `‖P‖`.
pub fn covariance_riccati_residual(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    g: &DMatrix<f64>,
    lambda0: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let apc = a * p * c.transpose();
    let gm = g - &apc;
    let inn = lambda0 - c * p * c.transpose();
    let rhs = match inn.clone().try_inverse() {
        Some(inv) => a * p * a.transpose() + &gm * inv * gm.transpose(),
        None => return f64::INFINITY,
    };
    (p - rhs).norm() / p.norm().max(f64::MIN_POSITIVE)
}

/// Forward Riccati in covariance form, iterated from `P₀ = 0`:
/// `P ← APAᵀ + (G − APCᵀ)(Λ₀ − CPCᵀ)⁻¹(G − APCᵀ)ᵀ`.
pub fn solve_riccati(re: &StochasticRealization) -> Result<KalmanModel> {
    solve_riccati_with(&re.a_d, &re.c_d, &re.g, &re.lambda0, RICCATI_MAX_ITER)
}

pub fn solve_riccati_with(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    g: &DMatrix<f64>,
    lambda0: &DMatrix<f64>,
    max_iter: usize,
) -> Result<KalmanModel> {
    let n = a.nrows();
    let m = c.nrows();
    let lam_scale = lambda0.trace().abs().max(f64::MIN_POSITIVE) / m as f64;
    let mut p = DMatrix::zeros(n, n);
    for it in 1..=max_iter {
        let inn = symmetrize(&(lambda0 - c * &p * c.transpose()));
        let chol = inn.clone().cholesky().ok_or_else(|| {
            Error::Riccati(format!("innovation covariance lost definiteness at iteration {it}"))
        })?;
        let min_diag = chol.l().diagonal().iter().fold(f64::INFINITY, |a, v| a.min(*v));
        if min_diag * min_diag < 1e-12 * lam_scale {
            return Err(Error::Riccati(format!(
                "innovation covariance nearly singular at iteration {it}"
            )));
        }
        let gm = g - a * &p * c.transpose();
        let next = symmetrize(&(a * &p * a.transpose() + &gm * chol.solve(&gm.transpose())));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Riccati(format!("iteration diverged at step {it}")));
        }
        // The step from `p` is its own Riccati residual, so stopping on it
        // bounds the residual of the returned `p`.
        let delta = (&next - &p).norm();
        if delta <= RICCATI_TOL * p.norm() {
            return finish_covariance(a, c, g, lambda0, p, it);
        }
        p = next;
    }
    Err(Error::Riccati(format!("no convergence within {max_iter} iterations")))
}

fn finish_covariance(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    g: &DMatrix<f64>,
    lambda0: &DMatrix<f64>,
    p: DMatrix<f64>,
    iterations: usize,
) -> Result<KalmanModel> {
    let inn = symmetrize(&(lambda0 - c * &p * c.transpose()));
    let inv = inverse(&inn, "innovation covariance")?;
    let k_f = (g - a * &p * c.transpose()) * inv;
    let riccati_residual = covariance_riccati_residual(a, c, g, lambda0, &p);
    Ok(KalmanModel {
        a_d: a.clone(),
        c_d: c.clone(),
        k_f,
        p,
        innovation_cov: inn,
        riccati_residual,
        iterations,
        source: RiccatiSource::Covariance,
    })
}

/// Kalman filter Riccati from noise covariances `(Q, R, S)` by the
/// structured doubling algorithm:
/// `P = APAᵀ − (APCᵀ + S)(CPCᵀ + R)⁻¹(APCᵀ + S)ᵀ + Q`.
pub fn solve_riccati_noise(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<KalmanModel> {
    let n = a.nrows();
    let r_inv = inverse(r, "measurement noise covariance")?;
    // Remove the cross term: Ā = A − S R⁻¹ C, Q̄ = Q − S R⁻¹ Sᵀ.
    let a_bar = a - s * &r_inv * c;
    let q_bar = symmetrize(&(q - s * &r_inv * s.transpose()));
    let mut ak = a_bar.transpose();
    let mut gk = c.transpose() * &r_inv * c;
    let mut hk = q_bar;
    let id = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    for it in 1..=100 {
        iterations = it;
        let w = inverse(&(&id + &gk * &hk), "doubling step")?;
        let a_next = &ak * &w * &ak;
        let g_next = symmetrize(&(&gk + &ak * &w * &gk * ak.transpose()));
        let h_next = symmetrize(&(&hk + ak.transpose() * &hk * &w * &ak));
        let delta = (&h_next - &hk).norm();
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if hk.iter().any(|v| !v.is_finite()) {
            return Err(Error::Riccati("doubling iteration diverged".into()));
        }
        if delta <= 1e-13 * hk.norm() {
            break;
        }
    }
    let p = hk;
    let inn = symmetrize(&(c * &p * c.transpose() + r));
    let k_f = (a * &p * c.transpose() + s) * inverse(&inn, "innovation covariance")?;
    let apc = a * &p * c.transpose() + s;
    let rhs = a * &p * a.transpose() - &apc * inverse(&inn, "innovation covariance")? * apc.transpose() + q;
    let riccati_residual = (&p - rhs).norm() / p.norm().max(f64::MIN_POSITIVE);
    Ok(KalmanModel {
        a_d: a.clone(),
        c_d: c.clone(),
        k_f,
        p,
        innovation_cov: inn,
        riccati_residual,
        iterations,
        source: RiccatiSource::NoiseCovariances,
    })
}

/// Gain for the realization: covariance form first, falling back to the
/// noise-covariance form built from the state-sequence residuals.
pub fn kalman_gain(re: &StochasticRealization) -> Result<KalmanModel> {
    match solve_riccati(re) {
        Ok(km) => Ok(km),
        Err(err) => {
            log::info!("covariance Riccati failed ({err}); using residual noise covariances");
            let (q, s, r) = re
                .qrs
                .clone()
                .ok_or_else(|| Error::Riccati("no residual covariances available".into()))?;
            let n = re.order;
            let m = re.c_d.nrows();
            let q_floor = 1e-8 * q.trace().abs().max(re.lambda0.trace().abs()) / n as f64;
            let r_floor = 1e-8 * re.lambda0.trace().abs() / m as f64;
            let q = q + DMatrix::identity(n, n) * q_floor.max(f64::MIN_POSITIVE);
            let r = r + DMatrix::identity(m, m) * r_floor.max(f64::MIN_POSITIVE);
            solve_riccati_noise(&re.a_d, &re.c_d, &q, &r, &s)
        }
    }
}

#[derive(Debug, Clone)]
pub struct StateSequence {
    /// `order × N`; column `k` is the prediction `x̂(k)` made from `y(0..k)`.
    pub x: DMatrix<f64>,
    pub innovations: DMatrix<f64>,
    /// Samples at the start that should be discarded.
    pub burn_in: usize,
}

/// Innovation-form filter `x̂(k+1) = A x̂(k) + K (y(k) − d − C x̂(k))`.
pub fn kalman_states(
    km: &KalmanModel,
    y: &DMatrix<f64>,
    x0: Option<&DVector<f64>>,
    d_offset: &DVector<f64>,
) -> Result<StateSequence> {
    let n = km.a_d.nrows();
    let (m, len) = y.shape();
    if km.c_d.nrows() != m || d_offset.len() != m {
        return Err(Error::Dimension(format!("filter expects {} outputs, record has {m}", km.c_d.nrows())));
    }
    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(n));
    let mut xs = DMatrix::zeros(n, len);
    let mut es = DMatrix::zeros(m, len);
    for k in 0..len {
        let e = y.column(k) - d_offset - &km.c_d * &x;
        xs.set_column(k, &x);
        x = &km.a_d * &x + &km.k_f * &e;
        es.set_column(k, &e);
    }
    Ok(StateSequence { x: xs, innovations: es, burn_in: burn_in(km, len) })
}

/// `ceil(10 · settling length)` of `A − K C`, capped at half the record.
pub fn burn_in(km: &KalmanModel, len: usize) -> usize {
    let closed = &km.a_d - &km.k_f * &km.c_d;
    let rho = spectral_radius(&closed);
    let cap = len / 2;
    if rho <= 0.0 {
        return 1.min(cap);
    }
    if rho >= 1.0 {
        return cap;
    }
    let settle = -1.0 / rho.ln();
    ((10.0 * settle).ceil() as usize).clamp(1, cap.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hankel_layout() {
        let y = DMatrix::from_row_slice(1, 5, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let h = block_hankel(&y, 2, Some(2)).unwrap();
        assert_eq!(h.y_p(), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
        assert_eq!(h.y_f(), DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 4.0, 5.0]));
        assert_eq!(h.y_p_plus().nrows(), 3);
        assert_eq!(h.y_p_plus().rows(0, 2).into_owned(), h.y_p());
        assert_eq!(h.y_f_minus(), DMatrix::from_row_slice(1, 2, &[4.0, 5.0]));
        assert_eq!(max_columns(5, 2), 2);
        assert!(block_hankel(&y, 3, None).is_err());
    }

    #[test]
    fn block_rows_span_slow_period_and_avoid_alignment() {
        // 1 Hz at 100 Hz sampling: 1.25 periods is 125 rows, capped at 80.
        assert_eq!(block_rows_for_band(6, 3, 0.01, &[1.0], 80), 80);
        // 10 Hz: 13 rows would cover 1.3 periods, fine as is.
        assert_eq!(block_rows_for_band(6, 3, 0.01, &[10.0], 80), 13);
        // 25 Hz puts 13 rows at 3.25 periods, but 8 Hz puts it at 1.04.
        let i = block_rows_for_band(6, 3, 0.01, &[8.0, 25.0], 80);
        assert!(i >= 13);
        for f in [8.0, 25.0] {
            let p = i as f64 * 0.01 * f;
            assert!((p - p.round()).abs() >= 0.1, "i = {i} holds {p} periods of {f} Hz");
        }
        // No frequency information: the default.
        assert_eq!(block_rows_for_band(6, 3, 0.01, &[], 80), default_block_rows(6, 3));
        assert_eq!(block_rows_for_band(6, 3, 0.01, &[0.0], 80), default_block_rows(6, 3));
    }

    #[test]
    fn pe_of_constant_and_sine() {
        let c = DMatrix::from_element(1, 500, 2.0);
        let r = pe_order(&c, 2, 0).unwrap();
        assert_eq!(r.rank, 1);
        assert!(!r.satisfied);
        let s = DMatrix::from_fn(1, 2000, |_, k| (0.3 * k as f64).sin());
        let r = pe_order(&s, 3, 0).unwrap();
        assert_eq!(r.rank, 2);
        assert!(!r.satisfied);
    }

    #[test]
    fn scalar_riccati_fixed_point() {
        let a = DMatrix::from_element(1, 1, 0.5);
        let c = DMatrix::from_element(1, 1, 1.0);
        let g = DMatrix::from_element(1, 1, 0.5);
        let l = DMatrix::from_element(1, 1, 1.0);
        let km = solve_riccati_with(&a, &c, &g, &l, RICCATI_MAX_ITER).unwrap();
        // p = 0.25p + (0.5 − 0.5p)²/(1 − p) = 0.25p + 0.25(1 − p) = 0.25
        assert_relative_eq!(km.p[(0, 0)], 0.25, epsilon = 1e-12);
        assert_relative_eq!(km.k_f[(0, 0)], 0.5, epsilon = 1e-12);
        assert!(km.riccati_residual < 1e-10);
    }

    #[test]
    fn zero_correlation_gives_zero_gain() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let km = solve_riccati_with(&a, &c, &DMatrix::zeros(2, 1), &DMatrix::identity(1, 1), 100).unwrap();
        assert_eq!(km.p, DMatrix::zeros(2, 2));
        assert_eq!(km.k_f, DMatrix::zeros(2, 1));
    }

    #[test]
    fn gap_order_picks_cliff() {
        assert_eq!(gap_order(&[10.0, 5.0, 1e-9, 1e-10]), 2);
        assert_eq!(gap_order(&[0.0, 0.0]), 0);
    }

    #[test]
    fn zero_gain_filter_is_open_loop() {
        let km = KalmanModel {
            a_d: DMatrix::from_element(1, 1, 0.9),
            c_d: DMatrix::from_element(1, 1, 1.0),
            k_f: DMatrix::zeros(1, 1),
            p: DMatrix::zeros(1, 1),
            innovation_cov: DMatrix::identity(1, 1),
            riccati_residual: 0.0,
            iterations: 0,
            source: RiccatiSource::Covariance,
        };
        let y = DMatrix::from_element(1, 5, 100.0);
        let x0 = DVector::from_element(1, 1.0);
        let seq = kalman_states(&km, &y, Some(&x0), &DVector::zeros(1)).unwrap();
        for k in 0..5 {
            assert_relative_eq!(seq.x[(0, k)], 0.9f64.powi(k as i32), epsilon = 1e-15);
        }
    }
}
