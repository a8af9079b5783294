//! Output directories: the report document plus companion CSVs for plotting.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::demo::DemoOutput;
use crate::error::Result;
use crate::io::{emit_report, write_columns, write_csv, Dataset};
use crate::run::RunOutput;
use crate::sweep::SweepReport;

pub const REPORT: &str = "report.json";
pub const FE_SERIES: &str = "fe.csv";
pub const FE_SPECTRUM: &str = "fe_spectrum.csv";
pub const SINGULAR_VALUES: &str = "singular_values.csv";
pub const DATASET: &str = "data.csv";
pub const DEMO_SERIES: &str = "input_estimate.csv";
pub const DEMO_SPECTRUM: &str = "input_spectrum.csv";
pub const SWEEP_REPORT: &str = "sweep.json";
pub const SWEEP_CELLS: &str = "sweep_cells.csv";

/// One-sided amplitude spectrum of each row: `(frequencies Hz, |X_k|·2/N)`.
pub fn amplitude_spectrum(x: &DMatrix<f64>, t_s: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = x.ncols();
    if n == 0 {
        return (Vec::new(), vec![Vec::new(); x.nrows()]);
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let bins = n / 2 + 1;
    let freqs = (0..bins).map(|k| k as f64 / (n as f64 * t_s)).collect();
    let rows = x
        .row_iter()
        .map(|r| {
            let mut buf: Vec<Complex<f64>> = r.iter().map(|&v| Complex::new(v, 0.0)).collect();
            fft.process(&mut buf);
            (0..bins)
                .map(|k| {
                    let scale = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
                    buf[k].norm() * scale / n as f64
                })
                .collect()
        })
        .collect();
    (freqs, rows)
}

fn numbered(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|k| format!("{prefix}_{k}")).collect()
}

/// Writes `report.json`, the `f̂_e` trace and spectrum and the singular
/// values. The report's `fe_series_path` is set to the trace file.
pub fn write_run(dir: &Path, out: &mut RunOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let fe = &out.fe;
    let t: Vec<f64> = (0..fe.ncols()).map(|k| k as f64 * out.t_s).collect();
    let mut names = vec!["t".to_string()];
    names.extend(numbered("fe", fe.nrows()));
    let mut cols = vec![t];
    cols.extend(fe.row_iter().map(|r| r.iter().cloned().collect::<Vec<_>>()));
    write_columns(&dir.join(FE_SERIES), &names, &cols)?;

    // Spectrum after burn-in, where the filter has settled.
    let from = out.report.fe_summary.valid_from.min(fe.ncols());
    let tail = fe.columns(from, fe.ncols() - from).into_owned();
    let (freqs, amps) = amplitude_spectrum(&tail, out.t_s);
    let mut names = vec!["f_hz".to_string()];
    names.extend(numbered("fe", fe.nrows()));
    let mut cols = vec![freqs];
    cols.extend(amps);
    write_columns(&dir.join(FE_SPECTRUM), &names, &cols)?;

    let sv = &out.report.diagnostics.singular_values;
    write_columns(
        &dir.join(SINGULAR_VALUES),
        &["index".to_string(), "sigma".to_string()],
        &[(1..=sv.len()).map(|k| k as f64).collect(), sv.clone()],
    )?;

    out.report.fe_series_path = Some(FE_SERIES.to_string());
    emit_report(&out.report, &dir.join(REPORT))?;
    Ok([REPORT, FE_SERIES, FE_SPECTRUM, SINGULAR_VALUES].iter().map(|f| dir.join(f)).collect())
}

/// Writes the demo report with the true and estimated segment input and
/// their spectra.
pub fn write_demo(dir: &Path, out: &mut DemoOutput, fs_hz: f64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    write_columns(
        &dir.join(DEMO_SERIES),
        &["t".into(), "v".into(), "v_hat".into()],
        &[out.t.clone(), out.v1.clone(), out.v1_hat.clone()],
    )?;
    let both = DMatrix::from_fn(2, out.v1.len(), |r, k| if r == 0 { out.v1[k] } else { out.v1_hat[k] });
    let (freqs, amps) = amplitude_spectrum(&both, 1.0 / fs_hz);
    let mut cols = vec![freqs];
    cols.extend(amps);
    write_columns(&dir.join(DEMO_SPECTRUM), &["f_hz".into(), "v".into(), "v_hat".into()], &cols)?;
    out.report.fe_series_path = Some(DEMO_SERIES.to_string());
    emit_report(&out.report, &dir.join(REPORT))?;
    Ok([REPORT, DEMO_SERIES, DEMO_SPECTRUM].iter().map(|f| dir.join(f)).collect())
}

/// Writes the sweep document and a flat table of its cells.
pub fn write_sweep(dir: &Path, rep: &SweepReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    emit_report(rep, &dir.join(SWEEP_REPORT))?;
    let mut w = csv::Writer::from_path(dir.join(SWEEP_CELLS)).map_err(std::io::Error::from)?;
    w.write_record([
        "dof", "snr_db", "runs", "failures", "rank_failures", "median_k_rel", "median_d_rel", "median_freq_rel",
        "median_zeta_rel", "pass",
    ])
    .map_err(std::io::Error::from)?;
    for c in &rep.cells {
        w.write_record([
            c.dof.to_string(),
            c.snr_db.map_or_else(|| "inf".to_string(), |s| s.to_string()),
            c.runs.to_string(),
            c.failures.to_string(),
            c.rank_failures.to_string(),
            format!("{:e}", c.median_k_rel),
            format!("{:e}", c.median_d_rel),
            format!("{:e}", c.median_freq_rel),
            format!("{:e}", c.median_zeta_rel),
            c.pass.to_string(),
        ])
        .map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok([SWEEP_REPORT, SWEEP_CELLS].iter().map(|f| dir.join(f)).collect())
}

/// Writes a simulated record in the dataset CSV layout.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join(DATASET);
    write_csv(ds, &p)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_reads_sine_amplitude() {
        let n = 200;
        let x = DMatrix::from_fn(1, n, |_, k| 0.5 + 2.0 * (2.0 * std::f64::consts::PI * 5.0 * k as f64 / n as f64).cos());
        let (f, a) = amplitude_spectrum(&x, 1.0 / n as f64);
        assert_eq!(f.len(), n / 2 + 1);
        assert!((f[5] - 5.0).abs() < 1e-12);
        assert!((a[0][0] - 0.5).abs() < 1e-12);
        assert!((a[0][5] - 2.0).abs() < 1e-12);
        assert!(a[0][7] < 1e-12);
    }
}
