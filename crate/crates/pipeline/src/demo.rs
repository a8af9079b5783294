//! Input estimation on a known discrete model.
//!
//! A band-limited signal `v` is generated, a segment `v₁` of length `N₁` is
//! cut out and repeated to drive the model `x⁺ = Ax + Bu + Ge, y = Cx + e`.
//! The segment is then estimated from `y` through the augmented model of the
//! plant and a finite-length signal model of period `N₁`. Once the plant
//! transient has died out the plant state is a linear function `X·x_v` of
//! the signal state, with `X` solving `X·A_v − A·X = B·C_v`, so the output
//! is `C·X·A_vᵏ·x_v`. Its harmonics are mutually orthogonal over whole
//! periods, which lets the least-squares fit for `x_v` split into one 2×2
//! problem per harmonic.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use physid_core::linalg::{inverse, kron, spectral_radius};
use physid_core::mech::noise_rng;
use physid_core::signal::fourier_coeffs;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::config::{DemoConfig, ExperimentConfig, Mode};
use crate::error::{PipelineError, Result};
use crate::report::{DemoReport, Provenance};

const SIGNAL_STREAM: u64 = 3;
const NOISE_STREAM: u64 = 4;

/// Demo report plus the true and estimated segment.
#[derive(Debug, Clone)]
pub struct DemoOutput {
    pub report: DemoReport,
    pub t: Vec<f64>,
    pub v1: Vec<f64>,
    pub v1_hat: Vec<f64>,
}

struct Model {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DMatrix<f64>,
    g: DVector<f64>,
}

fn model_of(d: &DemoConfig) -> Result<Model> {
    let n = d.a.len();
    if n == 0 || d.a.iter().any(|r| r.len() != n) || d.b.len() != n || d.c.len() != n || d.g.len() != n {
        return Err(PipelineError::Config(format!("demo: A must be square and B, C, G of length {n}")));
    }
    let a = DMatrix::from_fn(n, n, |i, j| d.a[i][j]);
    if spectral_radius(&a) >= 1.0 {
        return Err(PipelineError::Config("demo: A must be stable".into()));
    }
    Ok(Model {
        a,
        b: DVector::from_column_slice(&d.b),
        c: DMatrix::from_row_slice(1, n, &d.c),
        g: DVector::from_column_slice(&d.g),
    })
}

fn check(d: &DemoConfig) -> Result<()> {
    let bad = |m: String| Err(PipelineError::Config(format!("demo: {m}")));
    if d.n1 < 4 || d.n < 2 * d.n1 {
        return bad(format!("need n1 >= 4 and n >= 2·n1, got n = {}, n1 = {}", d.n, d.n1));
    }
    if d.segment_start + d.n1 > d.n {
        return bad(format!("segment {}..{} exceeds the record", d.segment_start, d.segment_start + d.n1));
    }
    if !(d.fs_hz > 0.0) || !(d.noise_cov >= 0.0) {
        return bad("fs_hz must be positive and noise_cov non-negative".into());
    }
    if !(d.signal_band_hz > 0.0 && d.signal_band_hz < 0.5 * d.fs_hz) || d.components == 0 {
        return bad("signal band must lie below Nyquist and hold at least one component".into());
    }
    Ok(())
}

/// Sum of sinusoids at random frequencies inside the band, scaled to unit
/// RMS over the record.
fn test_signal(d: &DemoConfig, seed: u64) -> Vec<f64> {
    let mut rng = noise_rng(seed, SIGNAL_STREAM);
    let lo = 0.05 * d.signal_band_hz;
    let comps: Vec<(f64, f64, f64)> = (0..d.components)
        .map(|_| (rng.random_range(lo..d.signal_band_hz), rng.random_range(0.0..2.0 * PI), rng.random_range(0.2..1.0)))
        .collect();
    let t_s = 1.0 / d.fs_hz;
    let mut v: Vec<f64> = (0..d.n)
        .map(|k| {
            let t = k as f64 * t_s;
            comps.iter().map(|&(f, p, a)| a * (2.0 * PI * f * t + p).sin()).sum()
        })
        .collect();
    let rms = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    v.iter_mut().for_each(|x| *x /= rms);
    v
}

fn simulate(m: &Model, u: &[f64], noise_cov: f64, seed: u64) -> Vec<f64> {
    let mut rng = noise_rng(seed, NOISE_STREAM);
    let normal = Normal::new(0.0, noise_cov.sqrt()).expect("finite standard deviation");
    let mut x = DVector::zeros(m.a.nrows());
    u.iter()
        .map(|&uk| {
            let e = if noise_cov > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            let y = (&m.c * &x)[0] + e;
            x = &m.a * &x + &m.b * uk + &m.g * e;
            y
        })
        .collect()
}

/// `C·X` for one signal block `R` with output row `c_v`, where
/// `X·R − A·X = B·c_v`.
fn block_gain(m: &Model, r: &DMatrix<f64>, c_v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.a.nrows();
    let w = r.nrows();
    let lhs = kron(&r.transpose(), &DMatrix::identity(n, n)) - kron(&DMatrix::identity(w, w), &m.a);
    let rhs = &m.b * c_v;
    let vx = inverse(&lhs, "plant/signal Sylvester operator").map_err(|e| PipelineError::Stage {
        stage: "demo",
        source: e,
    })? * DVector::from_column_slice(rhs.as_slice());
    let x = DMatrix::from_column_slice(n, w, vx.as_slice());
    Ok(&m.c * x)
}

/// Estimates one period of the input from `y`, skipping the first period.
/// Returns the Fourier series `(a₀, aₕ, bₕ)` of the estimate at segment
/// phase zero; index 0 of `a`/`b` is harmonic 1.
fn estimate_segment(m: &Model, y: &[f64], n1: usize, harmonics: usize) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let periods = y.len() / n1 - 1;
    let mut avg = vec![0.0; n1];
    for p in 1..=periods {
        for (k, s) in avg.iter_mut().enumerate() {
            *s += y[p * n1 + k];
        }
    }
    avg.iter_mut().for_each(|s| *s /= periods as f64);
    let hs: Vec<usize> = (1..=harmonics).collect();
    let coeffs = fourier_coeffs(&avg, &hs);

    let one = DMatrix::from_element(1, 1, 1.0);
    let g0 = block_gain(m, &one, &one)?[0];
    let a0 = coeffs.a0 / g0;
    let c2 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let mut a = Vec::with_capacity(harmonics);
    let mut b = Vec::with_capacity(harmonics);
    for (idx, &h) in hs.iter().enumerate() {
        let (ah, bh) = (coeffs.a[idx], coeffs.b[idx]);
        if 2 * h == n1 {
            let g = block_gain(m, &(-&one), &one)?[0];
            a.push(ah / g);
            b.push(0.0);
            continue;
        }
        let (s, c) = (2.0 * PI * h as f64 / n1 as f64).sin_cos();
        let r = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        let cx = block_gain(m, &r, &c2)?;
        let (p, q) = (cx[0], cx[1]);
        let den = p * p + q * q;
        a.push((p * ah - q * bh) / den);
        b.push((q * ah + p * bh) / den);
    }
    Ok((a0, a, b))
}

/// Time series of a Fourier series on `0..n`.
fn synthesize(n: usize, a0: f64, a: &[f64], b: &[f64]) -> Vec<f64> {
    let nf = n as f64;
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    spec[0] = Complex::new(nf * a0, 0.0);
    for (idx, (&ah, &bh)) in a.iter().zip(b).enumerate() {
        let h = idx + 1;
        if 2 * h == n {
            spec[h] = Complex::new(nf * ah, 0.0);
        } else {
            spec[h] = Complex::new(0.5 * nf * ah, -0.5 * nf * bh);
            spec[n - h] = spec[h].conj();
        }
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    spec.iter().map(|z| z.re / nf).collect()
}

fn nrmse_corr(est: &[f64], truth: &[f64]) -> (f64, f64) {
    let diff: f64 = est.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum();
    let norm: f64 = truth.iter().map(|t| t * t).sum();
    let (me, mt) = (mean(est), mean(truth));
    let cov: f64 = est.iter().zip(truth).map(|(e, t)| (e - me) * (t - mt)).sum();
    let ve: f64 = est.iter().map(|e| (e - me).powi(2)).sum();
    let vt: f64 = truth.iter().map(|t| (t - mt).powi(2)).sum();
    ((diff / norm).sqrt(), cov / (ve * vt).sqrt())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Relative error of the DFT magnitudes over harmonics inside the band.
fn spectral_error(est: &[f64], truth: &[f64], band_harmonics: usize) -> f64 {
    let hs: Vec<usize> = (1..=band_harmonics.max(1)).collect();
    let ce = fourier_coeffs(est, &hs);
    let ct = fourier_coeffs(truth, &hs);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..hs.len() {
        let me = ce.a[k].hypot(ce.b[k]);
        let mt = ct.a[k].hypot(ct.b[k]);
        num += (me - mt).powi(2);
        den += mt * mt;
    }
    (num / den).sqrt()
}

/// Runs the demo for `cfg.demo`.
pub fn run_input_estimation_demo(cfg: &ExperimentConfig, seed: u64) -> Result<DemoOutput> {
    if cfg.mode != Mode::InputEstimationDemo {
        return Err(PipelineError::Config("demo needs mode = \"input-estimation-demo\"".into()));
    }
    demo_with(&cfg.demo, seed, Provenance::new(cfg.hash(), seed))
}

/// Runs the demo for an explicit setup.
pub fn demo_with(d: &DemoConfig, seed: u64, provenance: Provenance) -> Result<DemoOutput> {
    check(d)?;
    let m = model_of(d)?;
    let v = test_signal(d, seed);
    let v1 = v[d.segment_start..d.segment_start + d.n1].to_vec();
    let u: Vec<f64> = (0..d.n).map(|k| v1[k % d.n1]).collect();
    let y = simulate(&m, &u, d.noise_cov, seed);

    let harmonics = d.harmonics.unwrap_or(d.n1 / 2).min(d.n1 / 2);
    let (a0, a, b) = estimate_segment(&m, &y, d.n1, harmonics)?;
    let v1_hat = synthesize(d.n1, a0, &a, &b);

    let (nrmse, correlation) = nrmse_corr(&v1_hat, &v1);
    let band_harmonics = (d.signal_band_hz * d.n1 as f64 / d.fs_hz).floor() as usize;
    let spectral_rel_error = spectral_error(&v1_hat, &v1, band_harmonics.min(d.n1 / 2));
    let signal_states = 1 + 2 * harmonics - usize::from(2 * harmonics == d.n1);
    let t_s = 1.0 / d.fs_hz;
    Ok(DemoOutput {
        report: DemoReport {
            nrmse,
            spectral_rel_error,
            correlation,
            harmonics,
            signal_states,
            settle_samples: d.n1,
            noise_cov: d.noise_cov,
            fe_series_path: None,
            provenance,
        },
        t: (0..d.n1).map(|k| (d.segment_start + k) as f64 * t_s).collect(),
        v1,
        v1_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance::new(String::new(), 0)
    }

    #[test]
    fn synthesis_inverts_fourier_coeffs() {
        let n = 64;
        let v: Vec<f64> = (0..n).map(|k| ((k * k) % 17) as f64 - 3.0).collect();
        let hs: Vec<usize> = (1..=n / 2).collect();
        let c = fourier_coeffs(&v, &hs);
        let back = synthesize(n, c.a0, &c.a, &c.b);
        for (x, y) in v.iter().zip(&back) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn block_gain_matches_frequency_response() {
        let d = DemoConfig::default();
        let m = model_of(&d).unwrap();
        // Steady-state gain of a sinusoid e^{jθk}: H(e^{jθ}) = C(e^{jθ}I − A)⁻¹B.
        let th: f64 = 0.3;
        let (s, c) = th.sin_cos();
        let r = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        let cx = block_gain(&m, &r, &DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        let z = Complex::new(c, s);
        let h: Complex<f64> = (0..2).map(|i| m.c[i] * m.b[i] / (z - m.a[(i, i)])).sum();
        // Input cos(kθ) gives Re(H·e^{jkθ}) = Re H·cos(kθ) − Im H·sin(kθ).
        assert!((cx[0] - h.re).abs() < 1e-12);
        assert!((cx[1] - h.im).abs() < 1e-12);
    }

    #[test]
    fn noise_free_recovery_is_exact() {
        let d = DemoConfig { noise_cov: 0.0, ..Default::default() };
        let out = demo_with(&d, 3, prov()).unwrap();
        assert!(out.report.nrmse < 1e-9, "{}", out.report.nrmse);
    }

    #[test]
    fn invalid_setup_is_rejected() {
        let d = DemoConfig { n: 15_000, ..Default::default() };
        assert!(demo_with(&d, 0, prov()).is_err());
        let d = DemoConfig { a: vec![vec![1.5, 0.0], vec![0.0, 0.6]], ..Default::default() };
        assert!(demo_with(&d, 0, prov()).is_err());
    }
}
