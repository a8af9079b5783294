//! Real Jordan decomposition `A = T · J · T⁻¹`.
//!
//! Complex conjugate eigenpairs `σ ± jω` with eigenvector `α ± jβ` become
//! real 2×2 blocks `[[σ, ω], [−ω, σ]]` acting on the column pair `(α, β)`.
//! Blocks are ordered by `ω` ascending, then `σ` descending, then discovery
//! order.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{condition_number, inverse, svd_sorted, svd_sorted_complex};
use crate::{Error, Result};

/// Default relative tolerance for treating two eigenvalues as one cluster.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;

/// Eigenvector bases worse than this are rejected as defective.
const CONDITION_CAP: f64 = 1e12;

type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    Real,
    ComplexPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanBlock {
    pub kind: BlockKind,
    pub sigma: f64,
    /// Imaginary part magnitude; exactly zero for real blocks.
    pub omega: f64,
    pub multiplicity: usize,
    /// First row/column of the block inside `J`.
    pub start: usize,
}

impl JordanBlock {
    /// Number of rows the block occupies in `J`.
    pub fn len(&self) -> usize {
        self.multiplicity * self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.multiplicity == 0
    }

    /// 1 for real eigenvalues, 2 for complex pairs.
    pub fn width(&self) -> usize {
        match self.kind {
            BlockKind::Real => 1,
            BlockKind::ComplexPair => 2,
        }
    }

    pub fn span(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len()
    }

    /// The square matrix this block contributes to `J`.
    pub fn matrix(&self) -> DMatrix<f64> {
        block_matrix(self.kind, self.sigma, self.omega, self.multiplicity)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JordanDecomposition {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub blocks: Vec<JordanBlock>,
}

impl JordanDecomposition {
    /// `T · J · T⁻¹`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.t * &self.j * &self.t_inv
    }

    /// Eigenvalues read off the blocks, one entry per eigenvalue (conjugates
    /// included), as `(re, im)`.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.j.nrows());
        for b in &self.blocks {
            for _ in 0..b.multiplicity {
                match b.kind {
                    BlockKind::Real => out.push((b.sigma, 0.0)),
                    BlockKind::ComplexPair => {
                        out.push((b.sigma, b.omega));
                        out.push((b.sigma, -b.omega));
                    }
                }
            }
        }
        out
    }
}

fn block_matrix(kind: BlockKind, sigma: f64, omega: f64, multiplicity: usize) -> DMatrix<f64> {
    let w = match kind {
        BlockKind::Real => 1,
        BlockKind::ComplexPair => 2,
    };
    let n = w * multiplicity;
    let mut m = DMatrix::zeros(n, n);
    for k in 0..multiplicity {
        let o = k * w;
        match kind {
            BlockKind::Real => m[(o, o)] = sigma,
            BlockKind::ComplexPair => {
                m[(o, o)] = sigma;
                m[(o, o + 1)] = omega;
                m[(o + 1, o)] = -omega;
                m[(o + 1, o + 1)] = sigma;
            }
        }
        if k + 1 < multiplicity {
            for d in 0..w {
                m[(o + d, o + w + d)] = 1.0;
            }
        }
    }
    m
}

/// One block before placement: eigenvalue plus its real basis columns.
struct PendingBlock {
    kind: BlockKind,
    sigma: f64,
    omega: f64,
    multiplicity: usize,
    columns: Vec<DVector<f64>>,
    discovery: usize,
}

/// Real Jordan decomposition of a square matrix.
///
/// Semisimple repeated eigenvalues yield one multiplicity-1 block per
/// eigenvector; a single Jordan chain yields one block with identity
/// super-blocks. Mixed structures and ill-conditioned bases are rejected with
/// [`Error::DefectiveMatrix`].
pub fn real_jordan(a: &DMatrix<f64>, cluster_tol: f64) -> Result<JordanDecomposition> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "real_jordan needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok(JordanDecomposition {
            t: DMatrix::zeros(0, 0),
            t_inv: DMatrix::zeros(0, 0),
            j: DMatrix::zeros(0, 0),
            blocks: Vec::new(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }

    let scale = a.norm().max(1.0);
    let imag_tol = 1e-13 * scale;
    let eig = a.complex_eigenvalues();

    let mut reals: Vec<f64> = Vec::new();
    let mut uppers: Vec<C64> = Vec::new();
    for z in eig.iter() {
        if z.im.abs() <= imag_tol {
            reals.push(z.re);
        } else if z.im > 0.0 {
            uppers.push(*z);
        }
    }
    if reals.len() + 2 * uppers.len() != n {
        return Err(Error::DefectiveMatrix(
            "unpaired complex eigenvalues in Schur spectrum".into(),
        ));
    }

    let real_clusters = cluster(
        reals.iter().map(|&r| C64::new(r, 0.0)).collect(),
        cluster_tol,
    );
    let complex_clusters = cluster(uppers, cluster_tol);

    let mut pending: Vec<PendingBlock> = Vec::new();
    let mut discovery = 0usize;
    for (lambda, count) in real_clusters {
        for blk in real_eigen_blocks(a, lambda.re, count, scale)? {
            pending.push(PendingBlock { discovery, ..blk });
            discovery += 1;
        }
    }
    for (lambda, count) in complex_clusters {
        for blk in complex_eigen_blocks(a, lambda, count, scale)? {
            pending.push(PendingBlock { discovery, ..blk });
            discovery += 1;
        }
    }

    pending.sort_by(|x, y| {
        x.omega
            .partial_cmp(&y.omega)
            .unwrap()
            .then(y.sigma.partial_cmp(&x.sigma).unwrap())
            .then(x.discovery.cmp(&y.discovery))
    });

    let mut t = DMatrix::zeros(n, n);
    let mut j = DMatrix::zeros(n, n);
    let mut blocks = Vec::with_capacity(pending.len());
    let mut col = 0usize;
    for p in pending {
        let blk = JordanBlock {
            kind: p.kind,
            sigma: p.sigma,
            omega: p.omega,
            multiplicity: p.multiplicity,
            start: col,
        };
        let len = blk.len();
        j.view_mut((col, col), (len, len)).copy_from(&blk.matrix());
        for (k, c) in p.columns.iter().enumerate() {
            t.set_column(col + k, c);
        }
        col += len;
        blocks.push(blk);
    }
    debug_assert_eq!(col, n);

    let cond = condition_number(&t);
    if !(cond <= CONDITION_CAP) {
        return Err(Error::DefectiveMatrix(format!(
            "eigenvector basis condition {cond:.3e} exceeds {CONDITION_CAP:.0e}"
        )));
    }
    let t_inv = inverse(&t, "eigenvector basis")?;
    Ok(JordanDecomposition { t, t_inv, j, blocks })
}

/// Greedy clustering; returns (representative, count) in first-seen order.
fn cluster(mut values: Vec<C64>, tol: f64) -> Vec<(C64, usize)> {
    values.sort_by(|x, y| {
        x.im.partial_cmp(&y.im)
            .unwrap()
            .then(x.re.partial_cmp(&y.re).unwrap())
    });
    let mut out: Vec<(C64, Vec<C64>)> = Vec::new();
    for v in values {
        let hit = out
            .iter_mut()
            .find(|(rep, _)| (*rep - v).norm() <= tol * rep.norm().max(1.0));
        match hit {
            Some((rep, members)) => {
                members.push(v);
                let k = members.len() as f64;
                *rep = members.iter().fold(C64::new(0.0, 0.0), |acc, z| acc + z) / k;
            }
            None => out.push((v, vec![v])),
        }
    }
    out.into_iter().map(|(rep, m)| (rep, m.len())).collect()
}

/// Singular values at or below this (relative to the matrix scale) count as
/// null directions when a cluster has multiplicity above one.
fn null_threshold(scale: f64) -> f64 {
    1e-8 * scale
}

fn real_eigen_blocks(
    a: &DMatrix<f64>,
    lambda: f64,
    count: usize,
    scale: f64,
) -> Result<Vec<PendingBlock>> {
    let n = a.nrows();
    let shifted = a - DMatrix::identity(n, n) * lambda;
    let (_, s, v) = svd_sorted(&shifted);
    // Ascending singular values, smallest (null directions) first.
    let order: Vec<usize> = (0..s.len()).rev().collect();

    let null_vec = |k: usize| -> DVector<f64> { v.column(order[k]).into_owned() };

    let geometric = if count == 1 {
        1
    } else {
        order
            .iter()
            .take(count)
            .filter(|&&i| s[i] <= null_threshold(scale))
            .count()
            .max(1)
    };

    if geometric == count {
        return Ok((0..count)
            .map(|k| PendingBlock {
                kind: BlockKind::Real,
                sigma: lambda,
                omega: 0.0,
                multiplicity: 1,
                columns: vec![normalize_real(null_vec(k))],
                discovery: 0,
            })
            .collect());
    }
    if geometric != 1 {
        return Err(Error::DefectiveMatrix(format!(
            "eigenvalue {lambda:.6e} has {geometric} eigenvectors for multiplicity {count}"
        )));
    }
    // Single chain: (A − λI) v_{k+1} = v_k, with the null direction removed
    // from the solve.
    let head = normalize_real(null_vec(0));
    let mut chain = vec![head];
    let cutoff = null_threshold(scale);
    let pinv = pinv_cut(&shifted, cutoff);
    for _ in 1..count {
        let next = &pinv * chain.last().unwrap();
        chain.push(next);
    }
    Ok(vec![PendingBlock {
        kind: BlockKind::Real,
        sigma: lambda,
        omega: 0.0,
        multiplicity: count,
        columns: chain,
        discovery: 0,
    }])
}

fn complex_eigen_blocks(
    a: &DMatrix<f64>,
    lambda: C64,
    count: usize,
    scale: f64,
) -> Result<Vec<PendingBlock>> {
    let n = a.nrows();
    let ac: DMatrix<C64> = a.map(|v| C64::new(v, 0.0));
    let shifted = ac - DMatrix::<C64>::identity(n, n) * lambda;
    let (_, s, v) = svd_sorted_complex(&shifted);
    let order: Vec<usize> = (0..s.len()).rev().collect();
    let null_vec = |k: usize| -> DVector<C64> { v.column(order[k]).into_owned() };

    let geometric = if count == 1 {
        1
    } else {
        order
            .iter()
            .take(count)
            .filter(|&&i| s[i] <= null_threshold(scale))
            .count()
            .max(1)
    };

    let (sigma, omega) = (lambda.re, lambda.im);
    if geometric == count {
        return Ok((0..count)
            .map(|k| {
                let v = null_vec(k);
                let phase = normalizing_phase(&v);
                let v = v * phase;
                PendingBlock {
                    kind: BlockKind::ComplexPair,
                    sigma,
                    omega,
                    multiplicity: 1,
                    columns: vec![v.map(|z| z.re), v.map(|z| z.im)],
                    discovery: 0,
                }
            })
            .collect());
    }
    if geometric != 1 {
        return Err(Error::DefectiveMatrix(format!(
            "eigenvalue {sigma:.6e}{omega:+.6e}i has {geometric} eigenvectors for multiplicity {count}"
        )));
    }
    let head = null_vec(0);
    let phase = normalizing_phase(&head);
    let mut chain = vec![head * phase];
    let pinv = pinv_cut_complex(&shifted, null_threshold(scale));
    for _ in 1..count {
        let next = &pinv * chain.last().unwrap();
        chain.push(next);
    }
    let mut columns = Vec::with_capacity(2 * count);
    for v in chain {
        columns.push(v.map(|z| z.re));
        columns.push(v.map(|z| z.im));
    }
    Ok(vec![PendingBlock {
        kind: BlockKind::ComplexPair,
        sigma,
        omega,
        multiplicity: count,
        columns,
        discovery: 0,
    }])
}

/// Unit norm, largest-magnitude entry positive.
fn normalize_real(mut v: DVector<f64>) -> DVector<f64> {
    let norm = v.norm();
    if norm > 0.0 {
        v /= norm;
    }
    let imax = v.iamax();
    if v[imax] < 0.0 {
        v.neg_mut();
    }
    v
}

/// Complex scalar making the largest-modulus entry real positive and
/// `‖α‖² + ‖β‖² = 1`.
fn normalizing_phase(v: &DVector<C64>) -> C64 {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut best = 0;
    let mut best_mod = -1.0;
    for (k, z) in v.iter().enumerate() {
        // Ties resolve to the first index.
        if z.norm() > best_mod * (1.0 + 1e-12) {
            best = k;
            best_mod = z.norm();
        }
    }
    if norm == 0.0 || best_mod == 0.0 {
        return C64::new(1.0, 0.0);
    }
    v[best].conj() / (best_mod * norm)
}

fn pinv_cut(a: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let (u, sv, v) = svd_sorted(a);
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for (k, &s) in sv.iter().enumerate() {
        if s > cutoff {
            out += v.column(k) * u.column(k).transpose() / s;
        }
    }
    out
}

fn pinv_cut_complex(a: &DMatrix<C64>, cutoff: f64) -> DMatrix<C64> {
    let (u, sv, v) = svd_sorted_complex(a);
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for (k, &s) in sv.iter().enumerate() {
        if s > cutoff {
            out += v.column(k) * u.column(k).adjoint() * C64::new(1.0 / s, 0.0);
        }
    }
    out
}
