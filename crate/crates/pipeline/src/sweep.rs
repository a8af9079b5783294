//! Monte Carlo sweeps over DOF counts, SNRs and seeds.

use physid_core::mech::{ChainSpec, Damping};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ChainSource, ExperimentConfig, Mode};
use crate::error::{PipelineError, Result};
use crate::report::Provenance;
use crate::run::{run_blind, run_pssid, RunOutput};

/// Pass thresholds applied to every cell. They are chosen by this tool, not
/// taken from published results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepThresholds {
    pub k_rel: f64,
    pub freq_rel: f64,
    pub zeta_rel: f64,
    pub source: String,
}

impl Default for SweepThresholds {
    fn default() -> Self {
        SweepThresholds { k_rel: 0.05, freq_rel: 0.01, zeta_rel: 0.10, source: "self-set".into() }
    }
}

/// Outcome of one run, reduced to scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub k_rel: f64,
    pub d_rel: f64,
    /// Worst mode.
    pub freq_rel: f64,
    pub zeta_rel: f64,
    pub fe_corr: f64,
    pub ts_full_rank: bool,
    pub x_full_rank: bool,
}

impl RunSummary {
    fn of(out: &RunOutput) -> Result<Self> {
        let e = out
            .report
            .errors
            .as_ref()
            .ok_or_else(|| PipelineError::Config("sweeps need simulated data with ground truth".into()))?;
        let d = &out.report.diagnostics;
        Ok(RunSummary {
            k_rel: e.k_rel,
            d_rel: e.d_rel,
            freq_rel: e.max_freq_rel,
            zeta_rel: e.zeta_rel.iter().cloned().fold(0.0, f64::max),
            fe_corr: e.fe_corr,
            ts_full_rank: d.ts_rank == d.ts_cols,
            x_full_rank: d.x_rank == d.x_cols,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub dof: usize,
    pub snr_db: Option<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub summary: Option<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Medians over the seeds of one `(dof, snr)` pair. Failed runs count as
/// infinite error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub dof: usize,
    pub snr_db: Option<f64>,
    pub runs: usize,
    pub failures: usize,
    pub rank_failures: usize,
    pub median_k_rel: f64,
    pub median_d_rel: f64,
    pub median_freq_rel: f64,
    pub median_zeta_rel: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub mode: Mode,
    pub thresholds: SweepThresholds,
    pub cells: Vec<SweepCell>,
    pub points: Vec<SweepPoint>,
    pub provenance: Provenance,
}

/// The base configuration resized to `dof` masses. When the sweep lists
/// SNRs, both output and input noise are set to `snr_db`.
pub fn point_config(base: &ExperimentConfig, dof: usize, snr_db: Option<f64>) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    let ChainSource::Spec(spec) = &base.chain else {
        return Err(PipelineError::Config("sweeps need a chain specification".into()));
    };
    if dof != spec.dof() {
        if matches!(spec.damping, Damping::Explicit { .. }) {
            return Err(PipelineError::Config("DOF sweeps need Rayleigh damping".into()));
        }
        cfg.chain = ChainSource::Spec(ChainSpec {
            masses: vec![spec.masses[0]; dof],
            stiffnesses: vec![spec.stiffnesses[0]; dof + 1],
            ..spec.clone()
        });
    }
    if !base.monte_carlo.snr_list.is_empty() {
        cfg.sensors.snr_db = snr_db;
        cfg.sensors.input_snr_db = snr_db;
    }
    Ok(cfg)
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn run_point(base: &ExperimentConfig, dof: usize, snr_db: Option<f64>, seed: u64) -> SweepPoint {
    let outcome = point_config(base, dof, snr_db).and_then(|cfg| {
        let out = match cfg.mode {
            Mode::Pssid => run_pssid(&cfg, seed),
            Mode::Blind => run_blind(&cfg, seed),
            Mode::InputEstimationDemo => Err(PipelineError::Config("sweeps run pssid or blind configurations".into())),
        }?;
        RunSummary::of(&out)
    });
    match outcome {
        Ok(s) => SweepPoint { dof, snr_db, seed, summary: Some(s), error: None },
        Err(e) => {
            log::warn!("sweep point dof={dof} snr={snr_db:?} seed={seed} failed: {e}");
            SweepPoint { dof, snr_db, seed, summary: None, error: Some(e.to_string()) }
        }
    }
}

fn cell(dof: usize, snr_db: Option<f64>, points: &[&SweepPoint], th: &SweepThresholds) -> SweepCell {
    let pick = |f: fn(&RunSummary) -> f64| -> Vec<f64> {
        points.iter().map(|p| p.summary.as_ref().map_or(f64::INFINITY, f)).collect()
    };
    let failures = points.iter().filter(|p| p.summary.is_none()).count();
    let rank_failures = points
        .iter()
        .filter(|p| p.summary.as_ref().is_some_and(|s| !(s.ts_full_rank && s.x_full_rank)))
        .count();
    let median_k_rel = median(pick(|s| s.k_rel));
    let median_freq_rel = median(pick(|s| s.freq_rel));
    let median_zeta_rel = median(pick(|s| s.zeta_rel));
    SweepCell {
        dof,
        snr_db,
        runs: points.len(),
        failures,
        rank_failures,
        median_k_rel,
        median_d_rel: median(pick(|s| s.d_rel)),
        median_freq_rel,
        median_zeta_rel,
        pass: median_k_rel <= th.k_rel && median_freq_rel <= th.freq_rel && median_zeta_rel <= th.zeta_rel,
    }
}

/// Runs every `(dof, snr, seed)` combination of `cfg.monte_carlo`
/// concurrently. Empty lists fall back to the base chain size and noise
/// level. Points and cells come back in the order of the lists, so the
/// report does not depend on scheduling.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let mc = &cfg.monte_carlo;
    let dofs = if mc.dof_list.is_empty() { vec![cfg.chain.dof()] } else { mc.dof_list.clone() };
    let snrs: Vec<Option<f64>> =
        if mc.snr_list.is_empty() { vec![cfg.sensors.snr_db] } else { mc.snr_list.iter().map(|&s| Some(s)).collect() };
    let seeds = cfg.seeds();
    let mut tasks = Vec::with_capacity(dofs.len() * snrs.len() * seeds.len());
    for &d in &dofs {
        for &s in &snrs {
            tasks.extend(seeds.iter().map(|&seed| (d, s, seed)));
        }
    }
    // Validate once up front so configuration errors are not repeated per run.
    for &d in &dofs {
        point_config(cfg, d, snrs[0])?;
    }
    let points: Vec<SweepPoint> = tasks.par_iter().map(|&(d, s, seed)| run_point(cfg, d, s, seed)).collect();

    let th = SweepThresholds::default();
    let mut cells = Vec::new();
    for &d in &dofs {
        for &s in &snrs {
            let group: Vec<&SweepPoint> = points.iter().filter(|p| p.dof == d && p.snr_db == s).collect();
            cells.push(cell(d, s, &group, &th));
        }
    }
    Ok(SweepReport { mode: cfg.mode, thresholds: th, cells, points, provenance: Provenance::new(cfg.hash(), cfg.seed) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_handles_even_odd_and_infinite() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(vec![1.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
    }

    #[test]
    fn point_config_resizes_chain_and_sets_noise() {
        let mut base = ExperimentConfig::benchmark_pssid();
        base.monte_carlo.snr_list = vec![30.0];
        let cfg = point_config(&base, 5, Some(30.0)).unwrap();
        assert_eq!(cfg.chain.dof(), 5);
        let ChainSource::Spec(s) = &cfg.chain else { panic!() };
        assert_eq!(s.stiffnesses.len(), 6);
        assert_eq!(cfg.sensors.snr_db, Some(30.0));
        assert_eq!(cfg.sensors.input_snr_db, Some(30.0));
    }
}
