//! Recovery of physical-coordinate matrices and of the effective input
//! from an identified augmented model.
//!
//! In real Jordan coordinates the augmented model is block diagonal. The
//! physical augmented model is block upper triangular, and the two are tied
//! by `x_a = [[T_s, T_s·X], [0, T_u]]·x̄` (Roth's removal rule). `T_s`
//! follows from the plant structure `A_s = [[0, I], [−𝒦, −𝒟]]` and the
//! sensor equation; `X` then follows from the zero top half of `B_s` and
//! from the signal part of the output matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::linalg::{
    inverse, kron, pinv, principal_log_with, rank, real_jordan, solve_lsq, unvec, vec, BlockKind,
    JordanBlock, DEFAULT_CLUSTER_TOL, DEFAULT_PINV_TOL,
};
use crate::mech::SensorConfig;
use crate::ssi::StochasticRealization;
use crate::{Error, Result};

/// Discrete eigenvalues this close to 1 map to continuous eigenvalue 0.
pub const UNIT_SNAP: f64 = 1e-8;

/// `(A_a, C_a) = (ln(A_d)/T_s, C_d)`.
pub fn to_continuous(re: &StochasticRealization, t_s: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(t_s > 0.0) {
        return Err(Error::InvalidArgument(format!("sampling time must be positive, got {t_s}")));
    }
    let a = principal_log_with(&re.a_d, Some(UNIT_SNAP))? / t_s;
    Ok((a, re.c_d.clone()))
}

/// Input-signal content to route into the signal part of the Jordan form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTargets {
    /// Oscillator frequencies in Hz, one per expected complex block.
    pub freqs_hz: Vec<f64>,
    /// Number of expected DC (zero) blocks.
    pub dc_count: usize,
}

impl SignalTargets {
    pub fn dim(&self) -> usize {
        2 * self.freqs_hz.len() + self.dc_count
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparatedJordan {
    pub j_s: DMatrix<f64>,
    pub j_u: DMatrix<f64>,
    pub cbar_s: DMatrix<f64>,
    pub cbar_u: DMatrix<f64>,
    pub xbar0_s: Option<DVector<f64>>,
    pub xbar0_u: Option<DVector<f64>>,
    /// Columns are the Jordan basis in identified coordinates, structural
    /// blocks first: `A_a = basis · diag(J_s, J_u) · basis⁻¹`.
    pub basis: DMatrix<f64>,
    pub basis_inv: DMatrix<f64>,
    pub blocks_s: Vec<JordanBlock>,
    pub blocks_u: Vec<JordanBlock>,
    /// `(target Hz, matched block Hz)` pairs.
    pub matches: Vec<(f64, f64)>,
}

impl SeparatedJordan {
    pub fn plant_dim(&self) -> usize {
        self.j_s.nrows()
    }

    pub fn signal_dim(&self) -> usize {
        self.j_u.nrows()
    }

    /// Maps identified-basis states to `x̄_u`.
    pub fn signal_states(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let ns = self.plant_dim();
        self.basis_inv.rows(ns, self.signal_dim()) * x
    }
}

/// Frequency in Hz used for matching: `ω/2π` for complex blocks, `|σ|/2π`
/// for real ones.
fn block_hz(b: &JordanBlock) -> f64 {
    match b.kind {
        BlockKind::ComplexPair => b.omega / (2.0 * PI),
        BlockKind::Real => b.sigma.abs() / (2.0 * PI),
    }
}

/// Splits the Jordan form of `A_a` into structural and signal blocks by
/// matching block frequencies against `targets` within `tol_hz`.
pub fn separate_blocks(
    a_a: &DMatrix<f64>,
    c_a: &DMatrix<f64>,
    x0: Option<&DVector<f64>>,
    targets: &SignalTargets,
    plant_dim: usize,
    tol_hz: f64,
) -> Result<SeparatedJordan> {
    let jd = real_jordan(a_a, DEFAULT_CLUSTER_TOL)?;
    let blocks = &jd.blocks;

    // Targets: complex first, then DC entries at 0 Hz.
    let mut target_list: Vec<(f64, BlockKind)> =
        targets.freqs_hz.iter().map(|&f| (f, BlockKind::ComplexPair)).collect();
    target_list.extend(std::iter::repeat_n((0.0, BlockKind::Real), targets.dc_count));

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, &(f, kind)) in target_list.iter().enumerate() {
        for (bi, b) in blocks.iter().enumerate() {
            if b.kind != kind || b.multiplicity != 1 {
                continue;
            }
            let d = (block_hz(b) - f).abs();
            if d <= tol_hz {
                pairs.push((d, ti, bi));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut target_block: Vec<Option<usize>> = vec![None; target_list.len()];
    let mut block_used = vec![false; blocks.len()];
    for (_, ti, bi) in pairs {
        if target_block[ti].is_none() && !block_used[bi] {
            target_block[ti] = Some(bi);
            block_used[bi] = true;
        }
    }
    let missing: Vec<f64> = target_list
        .iter()
        .zip(&target_block)
        .filter(|(_, b)| b.is_none())
        .map(|((f, _), _)| *f)
        .collect();
    if !missing.is_empty() {
        return Err(Error::CountMismatch(format!(
            "no Jordan block within {tol_hz:.4e} Hz of input frequencies {missing:?} Hz"
        )));
    }
    for (bi, b) in blocks.iter().enumerate() {
        if block_used[bi] {
            continue;
        }
        let f = block_hz(b);
        if let Some(&(t, _)) = target_list
            .iter()
            .find(|&&(t, kind)| kind == b.kind && (f - t).abs() <= tol_hz)
        {
            return Err(Error::AmbiguousMatch(format!(
                "structural block at {f:.6} Hz lies within {tol_hz:.4e} Hz of input frequency {t:.6} Hz"
            )));
        }
    }

    let structural: Vec<usize> = (0..blocks.len()).filter(|&bi| !block_used[bi]).collect();
    let signal: Vec<usize> = target_block.iter().map(|b| b.unwrap()).collect();
    let ns: usize = structural.iter().map(|&bi| blocks[bi].len()).sum();
    if ns != plant_dim {
        return Err(Error::CountMismatch(format!(
            "structural part has dimension {ns}, expected {plant_dim}"
        )));
    }

    let n = a_a.nrows();
    let mut cols = Vec::with_capacity(n);
    let mut blocks_s = Vec::new();
    let mut blocks_u = Vec::new();
    let mut start = 0;
    for (dst, list) in [(&mut blocks_s, &structural), (&mut blocks_u, &signal)] {
        for &bi in list.iter() {
            let b = &blocks[bi];
            cols.extend(b.span());
            dst.push(JordanBlock { start, ..b.clone() });
            start += b.len();
        }
    }
    let basis = DMatrix::from_fn(n, n, |r, c| jd.t[(r, cols[c])]);
    let basis_inv = DMatrix::from_fn(n, n, |r, c| jd.t_inv[(cols[r], c)]);
    let jbar = DMatrix::from_fn(n, n, |r, c| jd.j[(cols[r], cols[c])]);
    let cbar = c_a * &basis;
    let xbar0 = x0.map(|x| &basis_inv * x);
    let nu = n - ns;
    let matches = target_list
        .iter()
        .zip(&target_block)
        .map(|((f, _), b)| (*f, block_hz(&blocks[b.unwrap()])))
        .collect();

    Ok(SeparatedJordan {
        j_s: jbar.view((0, 0), (ns, ns)).into_owned(),
        j_u: jbar.view((ns, ns), (nu, nu)).into_owned(),
        cbar_s: cbar.columns(0, ns).into_owned(),
        cbar_u: cbar.columns(ns, nu).into_owned(),
        xbar0_s: xbar0.as_ref().map(|x| x.rows(0, ns).into_owned()),
        xbar0_u: xbar0.as_ref().map(|x| x.rows(ns, nu).into_owned()),
        basis,
        basis_inv,
        blocks_s,
        blocks_u,
        matches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeShape {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Natural frequency in rad/s.
    pub f_nat: f64,
    /// Natural frequency in Hz (`f_nat / 2π`).
    pub f_nat_hz: f64,
    pub zeta: f64,
    pub sigma: f64,
    pub omega: f64,
    pub shape: Option<ModeShape>,
    /// Index of the block inside `J_s`.
    #[serde(skip)]
    pub block: usize,
}

/// Natural frequencies and damping ratios of the structural blocks,
/// sorted by natural frequency.
pub fn modal_params(sj: &SeparatedJordan) -> Vec<Mode> {
    let mut modes: Vec<Mode> = sj
        .blocks_s
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let f_nat = (b.sigma * b.sigma + b.omega * b.omega).sqrt();
            let zeta = match b.kind {
                BlockKind::Real => 1.0,
                BlockKind::ComplexPair if f_nat > 0.0 => b.sigma.abs() / f_nat,
                BlockKind::ComplexPair => 0.0,
            };
            Mode { f_nat, f_nat_hz: f_nat / (2.0 * PI), zeta, sigma: b.sigma, omega: b.omega, shape: None, block: k }
        })
        .collect();
    modes.sort_by(|a, b| a.f_nat.partial_cmp(&b.f_nat).unwrap());
    modes
}

/// Fills in displacement mode shapes from the recovered `T_s`: the
/// eigenvector `α + jβ` of each block, restricted to the first `n`
/// coordinates, scaled to unit maximum modulus with zero phase there.
pub fn attach_mode_shapes(modes: &mut [Mode], sj: &SeparatedJordan, t_s: &DMatrix<f64>) {
    let n = t_s.nrows() / 2;
    for mode in modes.iter_mut() {
        let b = &sj.blocks_s[mode.block];
        let c = b.start;
        let (re, im): (Vec<f64>, Vec<f64>) = match b.kind {
            BlockKind::Real => ((0..n).map(|r| t_s[(r, c)]).collect(), vec![0.0; n]),
            BlockKind::ComplexPair => (
                (0..n).map(|r| t_s[(r, c)]).collect(),
                (0..n).map(|r| t_s[(r, c + 1)]).collect(),
            ),
        };
        let (mut best, mut best_mod) = (0, -1.0);
        for k in 0..n {
            let md = re[k].hypot(im[k]);
            if md > best_mod {
                best = k;
                best_mod = md;
            }
        }
        if best_mod <= 0.0 {
            mode.shape = Some(ModeShape { re, im });
            continue;
        }
        // Multiply by conj(z_best)/|z_best|², giving z_best = 1.
        let (pr, pi) = (re[best] / (best_mod * best_mod), -im[best] / (best_mod * best_mod));
        let shape = ModeShape {
            re: (0..n).map(|k| re[k] * pr - im[k] * pi).collect(),
            im: (0..n).map(|k| re[k] * pi + im[k] * pr).collect(),
        };
        mode.shape = Some(shape);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub rank: usize,
    pub cols: usize,
    pub condition: f64,
    pub residual: f64,
}

impl SolveDiagnostics {
    pub fn full_rank(&self) -> bool {
        self.rank == self.cols
    }
}

fn split_2x2(m: &DMatrix<f64>, n: usize) -> [DMatrix<f64>; 4] {
    [
        m.view((0, 0), (n, n)).into_owned(),
        m.view((0, n), (n, n)).into_owned(),
        m.view((n, 0), (n, n)).into_owned(),
        m.view((n, n), (n, n)).into_owned(),
    ]
}

/// Assembles the linear system for `vec(T11), vec(T12), vec(T21), vec(T22)`.
///
/// Top rows of `A_s·T_s = T_s·J_s` give, with `A_s`'s `[0 I]` top half,
///   `T11 J11 + T12 J21 − T21 = 0` and `T11 J12 + T12 J22 − T22 = 0`.
/// The output equation `C̄_s = C_s·T_s` with the bottom rows of the same
/// similarity eliminates `𝒦` and `𝒟`:
///   `C_p T11 + C_v T21 + C_ac (T21 J11 + T22 J21) = C̄11`,
///   `C_p T12 + C_v T22 + C_ac (T21 J12 + T22 J22) = C̄12`.
pub fn ts_system(j_s: &DMatrix<f64>, cbar_s: &DMatrix<f64>, sensors: &SensorConfig) -> Result<(DMatrix<f64>, DVector<f64>)> {
    sensors.validate()?;
    let n2 = j_s.nrows();
    if !n2.is_multiple_of(2) {
        return Err(Error::Dimension(format!("structural Jordan block has odd size {n2}")));
    }
    let n = n2 / 2;
    let m = sensors.outputs();
    if sensors.dof() != n || cbar_s.shape() != (m, n2) {
        return Err(Error::Dimension(format!(
            "sensors are {m}x{}, C̄_s is {:?}, J_s is {n2}x{n2}",
            sensors.dof(),
            cbar_s.shape()
        )));
    }
    let [j11, j12, j21, j22] = split_2x2(j_s, n);
    let i_n = DMatrix::<f64>::identity(n, n);
    let i_nn = DMatrix::<f64>::identity(n * n, n * n);
    let (cp, cv, cac) = (&sensors.c_p, &sensors.c_v, &sensors.c_ac);

    let nn = n * n;
    let rows = 2 * nn + 2 * m * n;
    let mut v = DMatrix::zeros(rows, 4 * nn);
    let mut put = |r: usize, c: usize, blk: DMatrix<f64>| {
        let mut dst = v.view_mut((r, c * nn), blk.shape());
        dst += blk;
    };
    put(0, 0, kron(&j11.transpose(), &i_n));
    put(0, 1, kron(&j21.transpose(), &i_n));
    put(0, 2, -&i_nn);
    put(nn, 0, kron(&j12.transpose(), &i_n));
    put(nn, 1, kron(&j22.transpose(), &i_n));
    put(nn, 3, -&i_nn);
    let r3 = 2 * nn;
    put(r3, 0, kron(&i_n, cp));
    put(r3, 2, kron(&i_n, cv) + kron(&j11.transpose(), cac));
    put(r3, 3, kron(&j21.transpose(), cac));
    let r4 = 2 * nn + m * n;
    put(r4, 1, kron(&i_n, cp));
    put(r4, 2, kron(&j12.transpose(), cac));
    put(r4, 3, kron(&i_n, cv) + kron(&j22.transpose(), cac));

    let mut w = DVector::zeros(rows);
    w.rows_mut(r3, m * n).copy_from(&vec(&cbar_s.columns(0, n).into_owned()));
    w.rows_mut(r4, m * n).copy_from(&vec(&cbar_s.columns(n, n).into_owned()));
    Ok((v, w))
}

/// Physical similarity transform `T_s` with `A_s = T_s·J_s·T_s⁻¹`.
pub fn solve_ts(sj: &SeparatedJordan, sensors: &SensorConfig) -> Result<(DMatrix<f64>, SolveDiagnostics)> {
    solve_ts_raw(&sj.j_s, &sj.cbar_s, sensors)
}

pub fn solve_ts_raw(
    j_s: &DMatrix<f64>,
    cbar_s: &DMatrix<f64>,
    sensors: &SensorConfig,
) -> Result<(DMatrix<f64>, SolveDiagnostics)> {
    let (v, w) = ts_system(j_s, cbar_s, sensors)?;
    let n = j_s.nrows() / 2;
    let sol = solve_lsq(&v, &w, DEFAULT_PINV_TOL);
    let diag = SolveDiagnostics { rank: sol.rank, cols: sol.cols, condition: sol.condition, residual: sol.residual };
    if !diag.full_rank() {
        log::warn!(
            "T_s system is rank deficient ({} < {}); change the type or number of sensors",
            diag.rank,
            diag.cols
        );
    }
    let nn = n * n;
    let part = |k: usize| unvec(&sol.x.rows(k * nn, nn).into_owned(), n, n);
    let mut t = DMatrix::zeros(2 * n, 2 * n);
    t.view_mut((0, 0), (n, n)).copy_from(&part(0));
    t.view_mut((0, n), (n, n)).copy_from(&part(1));
    t.view_mut((n, 0), (n, n)).copy_from(&part(2));
    t.view_mut((n, n), (n, n)).copy_from(&part(3));
    if rank(&t, 1e-12) < 2 * n {
        return Err(Error::Singular("recovered T_s".into()));
    }
    Ok((t, diag))
}

/// Linear system `F·vec(X) = g` for the Roth coupling block.
///
/// With `W = −J_s X + X J_u`, the zero top half of `B_s` gives
/// `H1·T_s·W = 0`, and the signal columns of the output matrix give
/// `C̄_s X + C_ac·H2·T_s·W = C̄_u`.
pub fn x_system(
    j_s: &DMatrix<f64>,
    j_u: &DMatrix<f64>,
    cbar_s: &DMatrix<f64>,
    cbar_u: &DMatrix<f64>,
    t_s: &DMatrix<f64>,
    sensors: &SensorConfig,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n2 = j_s.nrows();
    let n = n2 / 2;
    let nu = j_u.nrows();
    let m = sensors.outputs();
    if cbar_u.shape() != (m, nu) || t_s.shape() != (n2, n2) {
        return Err(Error::Dimension(format!(
            "C̄_u is {:?} (expected {m}x{nu}), T_s is {:?}",
            cbar_u.shape(),
            t_s.shape()
        )));
    }
    let h1t = t_s.rows(0, n).into_owned();
    let h2t = t_s.rows(n, n).into_owned();
    let i_u = DMatrix::<f64>::identity(nu, nu);
    let ju_t = j_u.transpose();

    let top = kron(&ju_t, &h1t) - kron(&i_u, &(&h1t * j_s));
    let cac_h2t = &sensors.c_ac * &h2t;
    let bottom = kron(&i_u, &(cbar_s - &cac_h2t * j_s)) + kron(&ju_t, &cac_h2t);

    let mut f = DMatrix::zeros(n * nu + m * nu, n2 * nu);
    f.view_mut((0, 0), top.shape()).copy_from(&top);
    f.view_mut((n * nu, 0), bottom.shape()).copy_from(&bottom);
    let mut g = DVector::zeros(n * nu + m * nu);
    g.rows_mut(n * nu, m * nu).copy_from(&vec(cbar_u));
    Ok((f, g))
}

/// Roth coupling block `X` (`2n × n_u`).
pub fn solve_x(sj: &SeparatedJordan, t_s: &DMatrix<f64>, sensors: &SensorConfig) -> Result<(DMatrix<f64>, SolveDiagnostics)> {
    solve_x_raw(&sj.j_s, &sj.j_u, &sj.cbar_s, &sj.cbar_u, t_s, sensors)
}

pub fn solve_x_raw(
    j_s: &DMatrix<f64>,
    j_u: &DMatrix<f64>,
    cbar_s: &DMatrix<f64>,
    cbar_u: &DMatrix<f64>,
    t_s: &DMatrix<f64>,
    sensors: &SensorConfig,
) -> Result<(DMatrix<f64>, SolveDiagnostics)> {
    let (f, g) = x_system(j_s, j_u, cbar_s, cbar_u, t_s, sensors)?;
    let sol = solve_lsq(&f, &g, DEFAULT_PINV_TOL);
    let diag = SolveDiagnostics { rank: sol.rank, cols: sol.cols, condition: sol.condition, residual: sol.residual };
    if !diag.full_rank() {
        return Err(Error::RankDeficient {
            system: "X system",
            rank: sol.rank,
            cols: sol.cols,
            remedy: "change the frequency components of the input signal",
        });
    }
    Ok((unvec(&sol.x, j_s.nrows(), j_u.nrows()), diag))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicalEstimate {
    pub a_s: DMatrix<f64>,
    pub c_s: DMatrix<f64>,
    pub b_s: Option<DMatrix<f64>>,
    pub d_s: Option<DMatrix<f64>>,
    pub k_norm: DMatrix<f64>,
    pub d_norm: DMatrix<f64>,
    pub b_norm: Option<DMatrix<f64>>,
    pub t_s: DMatrix<f64>,
    pub x: DMatrix<f64>,
    /// `‖A_s[top] − (0, I)‖_F`.
    pub structural_residual: f64,
    /// Number of right-half-plane eigenvalues reflected (0 when disabled).
    pub reflected: usize,
    pub ts_diagnostics: Option<SolveDiagnostics>,
    pub x_diagnostics: Option<SolveDiagnostics>,
}

/// `Â_s = T_s Ĵ_s T_s⁻¹`, `Ĉ_s = C̄_s T_s⁻¹`, and the normalized matrices.
///
/// With `enforce_stability`, blocks with `σ > 0` are reflected to `−σ`
/// before assembling.
pub fn assemble_physical(
    sj: &SeparatedJordan,
    t_s: &DMatrix<f64>,
    x: &DMatrix<f64>,
    enforce_stability: bool,
) -> Result<PhysicalEstimate> {
    let n2 = sj.plant_dim();
    let n = n2 / 2;
    let mut j_s = sj.j_s.clone();
    let mut reflected = 0;
    if enforce_stability {
        for b in &sj.blocks_s {
            if b.sigma > 0.0 {
                reflected += 1;
                let s = b.start;
                for d in 0..b.len() {
                    j_s[(s + d, s + d)] = -b.sigma;
                }
            }
        }
    }
    let t_inv = inverse(t_s, "T_s")?;
    let a_s = t_s * &j_s * &t_inv;
    let c_s = &sj.cbar_s * &t_inv;
    let k_norm = -a_s.view((n, 0), (n, n)).into_owned();
    let d_norm = -a_s.view((n, n), (n, n)).into_owned();
    let top_left = a_s.view((0, 0), (n, n)).norm_squared();
    let top_right = (a_s.view((0, n), (n, n)) - DMatrix::<f64>::identity(n, n)).norm_squared();
    Ok(PhysicalEstimate {
        a_s,
        c_s,
        b_s: None,
        d_s: None,
        k_norm,
        d_norm,
        b_norm: None,
        t_s: t_s.clone(),
        x: x.clone(),
        structural_residual: (top_left + top_right).sqrt(),
        reflected,
        ts_diagnostics: None,
        x_diagnostics: None,
    })
}

#[derive(Debug, Clone)]
pub struct InputEstimate {
    /// `T_s(−J_s X + X J_u)·x̄_u(k)` for every sample, `2n × N`. The top
    /// half estimates the (zero) upper block of `B_s u`.
    pub full: DMatrix<f64>,
    /// Lower half: the normalized effective input `ℬ·u(k)`, `n × N`.
    pub f_e: DMatrix<f64>,
    /// First sample past the filter burn-in.
    pub valid_from: usize,
}

/// Effective input from filtered states `x̂(k)` (identified basis,
/// `order × N`).
pub fn reconstruct_input(
    sj: &SeparatedJordan,
    t_s: &DMatrix<f64>,
    x: &DMatrix<f64>,
    states: &DMatrix<f64>,
    burn_in: usize,
) -> InputEstimate {
    let w = t_s * (-&sj.j_s * x + x * &sj.j_u);
    let xu = sj.signal_states(states);
    let full = w * xu;
    let n = sj.plant_dim() / 2;
    let f_e = full.rows(n, n).into_owned();
    InputEstimate { full, f_e, valid_from: burn_in.min(states.ncols()) }
}

/// `B̂_s = F_e·U†` over samples `from..`, and `D̂_s = C_ac·H2·B̂_s`.
/// With `center`, both records are demeaned first (needed when the DC
/// component is not part of the identified model).
pub fn estimate_bs(
    f_full: &DMatrix<f64>,
    u: &DMatrix<f64>,
    from: usize,
    center: bool,
    sensors: &SensorConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let len = f_full.ncols();
    if u.ncols() != len {
        return Err(Error::Dimension(format!("input has {} samples, estimate has {len}", u.ncols())));
    }
    if from >= len {
        return Err(Error::InsufficientData { needed: from + 1, have: len });
    }
    let cols = len - from;
    let mut f = f_full.columns(from, cols).into_owned();
    let mut uu = u.columns(from, cols).into_owned();
    if center {
        for mut row in f.row_iter_mut() {
            let mu = row.mean();
            row.add_scalar_mut(-mu);
        }
        for mut row in uu.row_iter_mut() {
            let mu = row.mean();
            row.add_scalar_mut(-mu);
        }
    }
    let r = uu.nrows();
    let gram = &uu * uu.transpose();
    if rank(&gram, 1e-12) < r || gram.norm() == 0.0 {
        return Err(Error::NotPersistentlyExciting(format!(
            "input Gram matrix has rank {} < {r}",
            rank(&gram, 1e-12)
        )));
    }
    let b_s = &f * pinv(&uu, DEFAULT_PINV_TOL);
    let n = b_s.nrows() / 2;
    let b_norm = b_s.rows(n, n).into_owned();
    let d_s = &sensors.c_ac * &b_norm;
    Ok((b_s, d_s, b_norm))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservabilityVerdict {
    pub observable: bool,
    pub reason: String,
}

/// Observability of the augmented model for `n` DOFs, `r` inputs and `m`
/// outputs.
pub fn check_observability(n: usize, r: usize, m: usize, sensors: &SensorConfig) -> ObservabilityVerdict {
    if r < m {
        return ObservabilityVerdict {
            observable: true,
            reason: format!("fewer inputs than outputs (r = {r} < m = {m})"),
        };
    }
    if r > m {
        return ObservabilityVerdict {
            observable: false,
            reason: format!("more inputs than outputs (r = {r} > m = {m})"),
        };
    }
    let shapes_ok = sensors.c_ac.shape() == (m, n) && sensors.validate().is_ok();
    let acc_only = sensors.acceleration_only();
    let full = shapes_ok && rank(&sensors.c_ac, 1e-12) == m.min(n) && m <= n;
    if acc_only && full {
        ObservabilityVerdict {
            observable: true,
            reason: format!("r = m = {m} with acceleration-only sensing and full-rank C_ac"),
        }
    } else {
        ObservabilityVerdict {
            observable: false,
            reason: format!(
                "r = m = {m} requires C_p = 0, C_v = 0 and full-rank C_ac (acceleration only: {acc_only}, full rank: {full})"
            ),
        }
    }
}
