//! Autonomous state-space models of band-limited periodic signals.
//!
//! A signal `a₀ + Σ aᵢ sin(i·2πf_T·t + αᵢ)` is the output of a marginally
//! stable autonomous model: one integrator (continuous) or unit pole
//! (discrete) for the offset, and one oscillator block per harmonic.

use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::linalg::{block_diag, solve_lsq, DEFAULT_PINV_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicSignalModel {
    pub domain: Domain,
    /// Fundamental frequency in Hz.
    pub f_t: f64,
    /// Sampling time; `None` for continuous models.
    pub t_s: Option<f64>,
    /// Whether the DC state is present.
    pub offset: bool,
    /// Harmonic indices `i` of the oscillator blocks, in state order.
    pub harmonics: Vec<usize>,
    pub a_u: DMatrix<f64>,
    pub c_u: DMatrix<f64>,
}

impl PeriodicSignalModel {
    /// The harmonic-count parameter: offset plus `n_a − 1` sinusoids.
    pub fn n_a(&self) -> usize {
        self.harmonics.len() + 1
    }

    pub fn state_dim(&self) -> usize {
        self.a_u.nrows()
    }

    /// Frequencies in Hz of the oscillator blocks.
    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.harmonics.iter().map(|&i| i as f64 * self.f_t).collect()
    }

    /// Drops the DC state (for channels known to be zero mean, or when the
    /// offset is unobservable from the sensors).
    pub fn without_offset(self) -> Self {
        if !self.offset {
            return self;
        }
        let n = self.a_u.nrows();
        PeriodicSignalModel {
            offset: false,
            a_u: self.a_u.view((1, 1), (n - 1, n - 1)).into_owned(),
            c_u: self.c_u.columns(1, n - 1).into_owned(),
            ..self
        }
    }
}

/// Continuous-time model with harmonics `1..n_a−1` of `f_t`.
pub fn build_ct_periodic(f_t: f64, n_a: usize) -> Result<PeriodicSignalModel> {
    check_basic(f_t, n_a)?;
    build_harmonic_model(Domain::Continuous, f_t, &(1..n_a).collect::<Vec<_>>(), true, None)
}

/// Discrete-time model with harmonics `1..n_a−1` of `f_t`, sampled at `t_s`.
pub fn build_dt_periodic(f_t: f64, n_a: usize, t_s: f64) -> Result<PeriodicSignalModel> {
    check_basic(f_t, n_a)?;
    build_harmonic_model(Domain::Discrete, f_t, &(1..n_a).collect::<Vec<_>>(), true, Some(t_s))
}

fn check_basic(f_t: f64, n_a: usize) -> Result<()> {
    if !(f_t > 0.0) {
        return Err(Error::InvalidArgument(format!("fundamental frequency must be positive, got {f_t}")));
    }
    if n_a == 0 {
        return Err(Error::InvalidArgument("n_a must be at least 1".into()));
    }
    Ok(())
}

/// General constructor over an arbitrary set of harmonic indices.
pub fn build_harmonic_model(
    domain: Domain,
    f_t: f64,
    harmonics: &[usize],
    offset: bool,
    t_s: Option<f64>,
) -> Result<PeriodicSignalModel> {
    if !(f_t > 0.0) {
        return Err(Error::InvalidArgument(format!("fundamental frequency must be positive, got {f_t}")));
    }
    if harmonics.contains(&0) {
        return Err(Error::InvalidArgument("harmonic index 0 is the offset state".into()));
    }
    if domain == Domain::Discrete {
        let t_s = t_s.ok_or_else(|| Error::InvalidArgument("discrete model needs a sampling time".into()))?;
        if !(t_s > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling time must be positive, got {t_s}")));
        }
        let nyquist = 0.5 / t_s;
        if let Some(&top) = harmonics.iter().max() {
            let highest = top as f64 * f_t;
            if highest >= nyquist {
                return Err(Error::Nyquist { highest_hz: highest, nyquist_hz: nyquist });
            }
        }
    }

    let mut a_blocks: Vec<DMatrix<f64>> = Vec::new();
    let mut c = Vec::new();
    if offset {
        let dc = match domain {
            Domain::Continuous => 0.0,
            Domain::Discrete => 1.0,
        };
        a_blocks.push(DMatrix::from_element(1, 1, dc));
        c.push(1.0);
    }
    for &i in harmonics {
        let w = i as f64 * 2.0 * PI * f_t;
        let blk = match domain {
            Domain::Continuous => DMatrix::from_row_slice(2, 2, &[0.0, w, -w, 0.0]),
            Domain::Discrete => {
                let two_cos = 2.0 * (w * t_s.unwrap()).cos();
                DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, two_cos])
            }
        };
        a_blocks.push(blk);
        c.extend_from_slice(&[1.0, 0.0]);
    }
    let refs: Vec<&DMatrix<f64>> = a_blocks.iter().collect();
    let a_u = block_diag(&refs);
    let c_u = DMatrix::from_row_slice(1, c.len(), &c);
    Ok(PeriodicSignalModel {
        domain,
        f_t,
        t_s: if domain == Domain::Discrete { t_s } else { None },
        offset,
        harmonics: harmonics.to_vec(),
        a_u,
        c_u,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MimoSignalModel {
    pub channels: Vec<PeriodicSignalModel>,
    pub a_u: DMatrix<f64>,
    /// `r × n_u`; row `k` reads only channel `k`'s states.
    pub c_u: DMatrix<f64>,
    pub n_u: usize,
}

impl MimoSignalModel {
    pub fn domain(&self) -> Domain {
        self.channels[0].domain
    }

    /// Oscillator frequencies of all channels, in Hz, with duplicates kept.
    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.channels.iter().flat_map(|c| c.frequencies_hz()).collect()
    }

    /// Number of DC states across channels.
    pub fn offset_count(&self) -> usize {
        self.channels.iter().filter(|c| c.offset).count()
    }
}

/// Block-diagonal stacking of single-channel models.
pub fn stack_mimo(channels: Vec<PeriodicSignalModel>) -> Result<MimoSignalModel> {
    let first = channels
        .first()
        .ok_or_else(|| Error::InvalidArgument("stack_mimo needs at least one channel".into()))?;
    if channels.iter().any(|c| c.domain != first.domain) {
        return Err(Error::InvalidArgument("channels mix continuous and discrete models".into()));
    }
    if channels.iter().any(|c| c.t_s != first.t_s) {
        return Err(Error::InvalidArgument("channels use different sampling times".into()));
    }
    let a_refs: Vec<&DMatrix<f64>> = channels.iter().map(|c| &c.a_u).collect();
    let c_refs: Vec<&DMatrix<f64>> = channels.iter().map(|c| &c.c_u).collect();
    let a_u = block_diag(&a_refs);
    let c_u = block_diag(&c_refs);
    let n_u = a_u.nrows();
    Ok(MimoSignalModel { channels, a_u, c_u, n_u })
}

/// Fourier coefficients of `a₀ + Σ (aₙ cos(nwt) + bₙ sin(nwt))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCoeffs {
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// A length-`N` record treated as one period of a periodic signal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteLengthModel {
    pub n: usize,
    pub t_s: f64,
    pub offset: bool,
    pub harmonics: Vec<usize>,
    pub a_v: DMatrix<f64>,
    pub c_v: DMatrix<f64>,
    pub fourier_coeffs: Option<FourierCoeffs>,
}

impl FiniteLengthModel {
    pub fn n_a(&self) -> usize {
        self.harmonics.len() + 1
    }

    pub fn state_dim(&self) -> usize {
        self.a_v.nrows()
    }

    /// Fundamental frequency `1/(N·T_s)` in Hz.
    pub fn f_t(&self) -> f64 {
        1.0 / (self.n as f64 * self.t_s)
    }

    pub fn frequencies_hz(&self) -> Vec<f64> {
        let f = self.f_t();
        self.harmonics.iter().map(|&i| i as f64 * f).collect()
    }

    /// Initial state reproducing `v` on `0..N` up to the truncated
    /// harmonics. Stores the Fourier coefficients on the model.
    pub fn fit(&mut self, v: &[f64]) -> Result<DVector<f64>> {
        if v.len() != self.n {
            return Err(Error::Dimension(format!("record has {} samples, model expects {}", v.len(), self.n)));
        }
        let coeffs = fourier_coeffs(v, &self.harmonics);
        let mut x0 = Vec::with_capacity(self.state_dim());
        if self.offset {
            x0.push(coeffs.a0);
        }
        // With R = [[c, s], [−s, c]], (1 0)·Rᵏ·(a, b)ᵀ = a·cos(kθ) + b·sin(kθ).
        for (a, b) in coeffs.a.iter().zip(&coeffs.b) {
            x0.push(*a);
            x0.push(*b);
        }
        self.fourier_coeffs = Some(coeffs);
        Ok(DVector::from_vec(x0))
    }

    /// As a generic discrete [`PeriodicSignalModel`], for augmentation.
    pub fn as_periodic(&self) -> PeriodicSignalModel {
        PeriodicSignalModel {
            domain: Domain::Discrete,
            f_t: self.f_t(),
            t_s: Some(self.t_s),
            offset: self.offset,
            harmonics: self.harmonics.clone(),
            a_u: self.a_v.clone(),
            c_u: self.c_v.clone(),
        }
    }
}

/// Finite-length model keeping the offset and harmonics `1..n_a−1`.
pub fn build_finite_length(n: usize, t_s: f64, n_a: usize) -> Result<FiniteLengthModel> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("record length must be at least 2, got {n}")));
    }
    if n_a == 0 || n_a > n / 2 {
        return Err(Error::InvalidArgument(format!("n_a must lie in 1..={}, got {n_a}", n / 2)));
    }
    finite_length_with(n, t_s, &(1..n_a).collect::<Vec<_>>(), true)
}

/// Finite-length model over a selected set of harmonics.
pub fn finite_length_with(n: usize, t_s: f64, harmonics: &[usize], offset: bool) -> Result<FiniteLengthModel> {
    if !(t_s > 0.0) {
        return Err(Error::InvalidArgument(format!("sampling time must be positive, got {t_s}")));
    }
    if let Some(&i) = harmonics.iter().find(|&&i| i == 0 || 2 * i > n) {
        return Err(Error::InvalidArgument(format!("harmonic {i} outside 1..={}", n / 2)));
    }
    let mut blocks = Vec::new();
    let mut c = Vec::new();
    if offset {
        blocks.push(DMatrix::from_element(1, 1, 1.0));
        c.push(1.0);
    }
    for &i in harmonics {
        let th = i as f64 * 2.0 * PI / n as f64;
        let (s, co) = th.sin_cos();
        blocks.push(DMatrix::from_row_slice(2, 2, &[co, s, -s, co]));
        c.extend_from_slice(&[1.0, 0.0]);
    }
    let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
    Ok(FiniteLengthModel {
        n,
        t_s,
        offset,
        harmonics: harmonics.to_vec(),
        a_v: block_diag(&refs),
        c_v: DMatrix::from_row_slice(1, c.len(), &c),
        fourier_coeffs: None,
    })
}

/// Discrete Fourier series coefficients of `v` at the given harmonics.
pub fn fourier_coeffs(v: &[f64], harmonics: &[usize]) -> FourierCoeffs {
    let n = v.len();
    let spec = fft(v);
    let nf = n as f64;
    let a0 = spec[0].re / nf;
    let mut a = Vec::with_capacity(harmonics.len());
    let mut b = Vec::with_capacity(harmonics.len());
    for &i in harmonics {
        // X_i = Σ v e^{−j2πik/N}: Re = Σ v cos, −Im = Σ v sin.
        let scale = if 2 * i == n { 1.0 / nf } else { 2.0 / nf };
        a.push(spec[i].re * scale);
        b.push(-spec[i].im * scale);
    }
    FourierCoeffs { a0, a, b }
}

fn fft(v: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(v.len()).process(&mut buf);
    buf
}

/// Free response `y(k) = C·Aᵏ·x₀`, `k = 0..n`, as an `m × n` record.
pub fn free_response(a: &DMatrix<f64>, c: &DMatrix<f64>, x0: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(c.nrows(), n);
    let mut x = x0.clone();
    for k in 0..n {
        y.set_column(k, &(c * &x));
        x = a * x;
    }
    y
}

/// Least-squares initial state of `x(k+1) = A x(k), y = C x` over the full
/// record `y` (`m × N`). Returns the state and the residual 2-norm.
pub fn fit_initial_state(a: &DMatrix<f64>, c: &DMatrix<f64>, y: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let (m, n) = y.shape();
    let dim = a.nrows();
    let mut phi = DMatrix::zeros(m * n, dim);
    let mut ca = c.clone();
    for k in 0..n {
        phi.view_mut((k * m, 0), (m, dim)).copy_from(&ca);
        ca = &ca * a;
    }
    let w = DVector::from_iterator(m * n, y.iter().cloned());
    let sol = solve_lsq(&phi, &w, DEFAULT_PINV_TOL);
    (sol.x, sol.residual)
}

/// Harmonics of `1/(N·T_s)` whose periodogram energy (summed over the rows
/// of `y`) exceeds `threshold` times the total energy inside `band_hz`.
/// The DC bin is never returned.
pub fn select_harmonics(y: &DMatrix<f64>, t_s: f64, band_hz: Option<(f64, f64)>, threshold: f64) -> Vec<usize> {
    let Some((energy, in_band, total)) = band_energy(y, t_s, band_hz) else {
        return Vec::new();
    };
    in_band.into_iter().filter(|&k| energy[k] > threshold * total).collect()
}

/// As [`select_harmonics`], but every run of adjacent selected bins is
/// reduced to its most energetic bin. A sinusoid off the DFT grid leaks
/// into its neighbours; the collapsed set keeps one harmonic per line.
pub fn select_peak_harmonics(y: &DMatrix<f64>, t_s: f64, band_hz: Option<(f64, f64)>, threshold: f64) -> Vec<usize> {
    let Some((energy, in_band, total)) = band_energy(y, t_s, band_hz) else {
        return Vec::new();
    };
    let kept: Vec<usize> = in_band.into_iter().filter(|&k| energy[k] > threshold * total).collect();
    let mut peaks = Vec::new();
    let mut run: Vec<usize> = Vec::new();
    for k in kept {
        if run.last().is_some_and(|&last| k != last + 1) {
            peaks.push(argmax_bin(&run, &energy));
            run.clear();
        }
        run.push(k);
    }
    if !run.is_empty() {
        peaks.push(argmax_bin(&run, &energy));
    }
    peaks
}

fn argmax_bin(run: &[usize], energy: &[f64]) -> usize {
    *run.iter().max_by(|&&a, &&b| energy[a].total_cmp(&energy[b])).unwrap()
}

/// Periodogram summed over rows, the in-band bins and their total energy.
fn band_energy(y: &DMatrix<f64>, t_s: f64, band_hz: Option<(f64, f64)>) -> Option<(Vec<f64>, Vec<usize>, f64)> {
    let n = y.ncols();
    if n < 4 {
        return None;
    }
    let df = 1.0 / (n as f64 * t_s);
    let (lo, hi) = band_hz.unwrap_or((0.0, 0.5 / t_s));
    let mut energy = vec![0.0; n / 2 + 1];
    for row in y.row_iter() {
        let v: Vec<f64> = row.iter().cloned().collect();
        for (k, z) in fft(&v).iter().take(n / 2 + 1).enumerate() {
            energy[k] += z.norm_sqr();
        }
    }
    let in_band: Vec<usize> = (1..=n / 2)
        .filter(|&k| {
            let f = k as f64 * df;
            f >= lo && f <= hi
        })
        .collect();
    let total: f64 = in_band.iter().map(|&k| energy[k]).sum();
    (total > 0.0).then_some((energy, in_band, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ct_two_harmonics() {
        let m = build_ct_periodic(1.0, 2).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 2.0 * PI, 0.0, -2.0 * PI, 0.0]);
        assert_eq!(m.a_u, expected);
        assert_eq!(m.c_u.as_slice(), &[1.0, 1.0, 0.0]);
        assert_eq!(m.n_a(), 2);
    }

    #[test]
    fn offset_only_models() {
        assert_eq!(build_ct_periodic(3.0, 1).unwrap().a_u, DMatrix::from_element(1, 1, 0.0));
        assert_eq!(build_dt_periodic(3.0, 1, 0.01).unwrap().a_u, DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn ct_second_block() {
        let m = build_ct_periodic(1.0, 3).unwrap();
        let blk = m.a_u.view((3, 3), (2, 2)).into_owned();
        assert_eq!(blk, DMatrix::from_row_slice(2, 2, &[0.0, 4.0 * PI, -4.0 * PI, 0.0]));
    }

    #[test]
    fn dt_quarter_rate_block() {
        let m = build_dt_periodic(1.0, 2, 0.25).unwrap();
        let blk = m.a_u.view((1, 1), (2, 2)).into_owned();
        assert_relative_eq!(blk, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]), epsilon = 1e-12);
    }

    #[test]
    fn dt_rejects_nyquist() {
        assert!(matches!(build_dt_periodic(10.0, 6, 0.01), Err(Error::Nyquist { .. })));
    }

    #[test]
    fn finite_length_quarter_block() {
        let m = build_finite_length(4, 1.0, 2).unwrap();
        let blk = m.a_v.view((1, 1), (2, 2)).into_owned();
        assert_relative_eq!(blk, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn finite_length_single_sine_exact() {
        let v: Vec<f64> = (0..8).map(|k| (2.0 * PI * k as f64 / 8.0).sin()).collect();
        let mut m = build_finite_length(8, 0.1, 2).unwrap();
        let x0 = m.fit(&v).unwrap();
        let y = free_response(&m.a_v, &m.c_v, &x0, 8);
        for k in 0..8 {
            assert_relative_eq!(y[(0, k)], v[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn stack_two_channels() {
        let ch = build_dt_periodic(0.5, 4, 0.01).unwrap();
        let s = stack_mimo(vec![ch.clone(), ch.clone()]).unwrap();
        assert_eq!(s.n_u, 14);
        assert_eq!(s.a_u, block_diag(&[&ch.a_u, &ch.a_u]));
        assert_eq!(s.c_u.shape(), (2, 14));
        assert_eq!(s.c_u.row(0).columns(7, 7).sum(), 0.0);
        assert_eq!(s.c_u.row(1).columns(0, 7).sum(), 0.0);
    }

    #[test]
    fn stack_rejects_mixed_domains() {
        let a = build_dt_periodic(0.5, 2, 0.01).unwrap();
        let b = build_ct_periodic(0.5, 2).unwrap();
        assert!(stack_mimo(vec![a, b]).is_err());
    }

    #[test]
    fn without_offset_drops_dc_state() {
        let m = build_dt_periodic(0.5, 4, 0.01).unwrap().without_offset();
        assert_eq!(m.state_dim(), 6);
        assert!(!m.offset);
        assert_eq!(m.c_u.as_slice(), &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn harmonic_selection_finds_tones() {
        let n = 200;
        let y = DMatrix::from_fn(1, n, |_, k| {
            let t = k as f64 / n as f64;
            (2.0 * PI * 3.0 * t).sin() + 0.5 * (2.0 * PI * 11.0 * t).cos()
        });
        assert_eq!(select_harmonics(&y, 1.0 / n as f64, None, 1e-4), vec![3, 11]);
        assert_eq!(select_harmonics(&y, 1.0 / n as f64, Some((5.0, 20.0)), 1e-4), vec![11]);
    }
}
