//! Report documents emitted by the runners.

use nalgebra::DMatrix;
use physid_core::recovery::Mode as CoreMode;
use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::filter::FilterDesign;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalEntry {
    pub f_nat_rad_s: f64,
    pub f_nat_hz: f64,
    pub zeta: f64,
    /// Displacement shape, unit modulus at its largest entry.
    pub shape: Vec<f64>,
    /// Imaginary part of the shape (near zero for proportional damping).
    pub shape_im: Vec<f64>,
}

impl From<&CoreMode> for ModalEntry {
    fn from(m: &CoreMode) -> Self {
        let (shape, shape_im) = m.shape.as_ref().map_or((Vec::new(), Vec::new()), |s| (s.re.clone(), s.im.clone()));
        ModalEntry { f_nat_rad_s: m.f_nat, f_nat_hz: m.f_nat_hz, zeta: m.zeta, shape, shape_im }
    }
}

/// Per-row summary of the reconstructed effective input after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub rows: usize,
    pub samples: usize,
    pub valid_from: usize,
    pub t_s: f64,
    pub mean: Vec<f64>,
    pub rms: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl SeriesSummary {
    pub fn of(x: &DMatrix<f64>, valid_from: usize, t_s: f64) -> Self {
        let len = x.ncols();
        let from = valid_from.min(len);
        let tail = x.columns(from, len - from);
        let cnt = (len - from).max(1) as f64;
        let row_stat = |f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> {
            tail.row_iter().map(|r| f(&r.iter().cloned().collect::<Vec<_>>())).collect()
        };
        SeriesSummary {
            rows: x.nrows(),
            samples: len,
            valid_from: from,
            t_s,
            mean: row_stat(&|v| v.iter().sum::<f64>() / cnt),
            rms: row_stat(&|v| (v.iter().map(|a| a * a).sum::<f64>() / cnt).sqrt()),
            min: row_stat(&|v| v.iter().cloned().fold(f64::INFINITY, f64::min)),
            max: row_stat(&|v| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
        }
    }
}

/// Errors against simulation ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthErrors {
    /// Relative Frobenius error of `𝒦̂`.
    pub k_rel: f64,
    pub d_rel: f64,
    /// Only when `ℬ̂` was estimated.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub b_rel: Option<f64>,
    /// Per mode, sorted by frequency.
    pub freq_rel: Vec<f64>,
    pub zeta_rel: Vec<f64>,
    pub max_freq_rel: f64,
    /// Normalized RMS error of `f̂_e` after burn-in (means removed when the
    /// DC part of the input is not identifiable).
    pub fe_nrmse: f64,
    /// Correlation of the stacked, row-centred `f̂_e` and `f_e`.
    pub fe_corr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub order: usize,
    pub plant_dim: usize,
    pub signal_dim: usize,
    pub block_rows: usize,
    pub decimate: usize,
    pub t_s_identification: f64,
    pub samples_identification: usize,
    pub singular_values: Vec<f64>,
    pub past_full_rank: bool,
    pub ts_rank: usize,
    pub ts_cols: usize,
    pub ts_condition: f64,
    pub ts_residual: f64,
    pub x_rank: usize,
    pub x_cols: usize,
    pub x_condition: f64,
    pub x_residual: f64,
    pub structural_residual: f64,
    pub reflected_modes: usize,
    pub riccati_source: String,
    pub riccati_residual: f64,
    pub riccati_iterations: usize,
    pub burn_in: usize,
    pub tol_hz: f64,
    /// `(target Hz, matched block Hz)`.
    pub matches: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub filters: Vec<FilterDesign>,
    /// Harmonics of `1/(N·T_s)` used by the blind signal model.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub harmonics: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub harmonic_threshold: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Provenance { config_hash, seed, version: env!("CARGO_PKG_VERSION").to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub mode: Mode,
    pub k_norm: Vec<Vec<f64>>,
    pub d_norm: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub b_norm: Option<Vec<Vec<f64>>>,
    pub modal: Vec<ModalEntry>,
    pub fe_summary: SeriesSummary,
    pub fe_series_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub errors: Option<TruthErrors>,
    pub diagnostics: Diagnostics,
    pub provenance: Provenance,
}

/// Row-major nested vectors, the report's matrix encoding.
pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

/// Fit of the input-estimation demo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    /// `‖v̂₁ − v₁‖ / ‖v₁‖` over the segment.
    pub nrmse: f64,
    /// Relative error of the DFT magnitudes inside the signal band.
    pub spectral_rel_error: f64,
    pub correlation: f64,
    pub harmonics: usize,
    pub signal_states: usize,
    /// Periods of the segment skipped while the plant settles.
    pub settle_samples: usize,
    pub noise_cov: f64,
    pub fe_series_path: Option<String>,
    pub provenance: Provenance,
}
