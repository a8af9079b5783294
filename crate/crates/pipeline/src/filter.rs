//! Zero-phase Butterworth filtering and decimation of multichannel records.

use nalgebra::DMatrix;
use sci_rs::signal::filter::design::{butter_dyn, DigitalFilter, FilterBandType, FilterOutputType, Sos};
use sci_rs::signal::filter::sosfiltfilt_dyn;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// What was applied, for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    pub family: String,
    pub band: String,
    pub order: usize,
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub fs_hz: f64,
    pub sections: usize,
    pub zero_phase: bool,
}

fn design(order: usize, wn: Vec<f64>, band: FilterBandType, fs: f64) -> Vec<Sos<f64>> {
    match butter_dyn(order, wn, Some(band), Some(false), Some(FilterOutputType::Sos), Some(fs)) {
        DigitalFilter::Sos(f) => f.sos,
        _ => unreachable!("second-order sections were requested"),
    }
}

fn apply_rows(y: &DMatrix<f64>, sos: &[Sos<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(y.nrows(), y.ncols());
    for (r, row) in y.row_iter().enumerate() {
        let f = sosfiltfilt_dyn(row.iter(), sos);
        for (c, v) in f.into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    out
}

/// Forward-backward Butterworth band-pass on every row of `y`.
///
/// `lo_hz = 0` degenerates to a low-pass. The effective magnitude response
/// is the square of the designed one, with zero phase.
pub fn bandpass(y: &DMatrix<f64>, t_s: f64, lo_hz: f64, hi_hz: f64, order: usize) -> Result<(DMatrix<f64>, FilterDesign)> {
    let fs = 1.0 / t_s;
    let nyq = 0.5 * fs;
    if !(t_s > 0.0) || !(lo_hz >= 0.0) || !(hi_hz > lo_hz) || hi_hz >= nyq || order == 0 {
        return Err(PipelineError::InvalidBand(format!(
            "need 0 <= lo < hi < Nyquist ({nyq} Hz) and order > 0, got lo = {lo_hz}, hi = {hi_hz}, order = {order}"
        )));
    }
    let (sos, band) = if lo_hz == 0.0 {
        (design(order, vec![hi_hz], FilterBandType::Lowpass, fs), "lowpass")
    } else {
        (design(order, vec![lo_hz, hi_hz], FilterBandType::Bandpass, fs), "bandpass")
    };
    let min_len = 3 * (2 * sos.len() + 1) + 1;
    if y.ncols() < min_len {
        return Err(PipelineError::InvalidBand(format!("record of {} samples is too short for the filter", y.ncols())));
    }
    let out = apply_rows(y, &sos);
    let design = FilterDesign {
        family: "butterworth".into(),
        band: band.into(),
        order,
        lo_hz,
        hi_hz,
        fs_hz: fs,
        sections: sos.len(),
        zero_phase: true,
    };
    Ok((out, design))
}

/// Anti-aliased downsampling by `factor`: zero-phase low-pass at 80% of the
/// new Nyquist frequency, then every `factor`-th sample from the first.
pub fn decimate(y: &DMatrix<f64>, t_s: f64, factor: usize, order: usize) -> Result<(DMatrix<f64>, Option<FilterDesign>)> {
    if factor == 0 {
        return Err(PipelineError::Config("decimation factor must be positive".into()));
    }
    if factor == 1 {
        return Ok((y.clone(), None));
    }
    let cutoff = 0.8 * 0.5 / (t_s * factor as f64);
    let (f, design) = bandpass(y, t_s, 0.0, cutoff, order)?;
    Ok((downsample(&f, factor), Some(design)))
}

/// Every `factor`-th column, starting with the first.
pub fn downsample(y: &DMatrix<f64>, factor: usize) -> DMatrix<f64> {
    let n = y.ncols().div_ceil(factor);
    DMatrix::from_fn(y.nrows(), n, |r, c| y[(r, c * factor)])
}
