//! PSSID and blind identification runs.

use nalgebra::{DMatrix, DVector};
use physid_core::linalg::{real_jordan, BlockKind, DEFAULT_CLUSTER_TOL};
use physid_core::mech::{build_chain, simulate_continuous, to_state_space, ChainSpec, ContinuousSimOptions, SensorConfig};
use physid_core::recovery::{
    assemble_physical, attach_mode_shapes, estimate_bs, modal_params, reconstruct_input, separate_blocks, solve_ts,
    solve_x, to_continuous, Mode as CoreMode, SignalTargets,
};
use physid_core::signal::{finite_length_with, select_peak_harmonics};
use physid_core::ssi::{block_rows_for_band, identify, kalman_gain, kalman_states, SsiOptions};

use crate::config::{ChainSource, ExperimentConfig, Mode, OrderPolicy};
use crate::error::{PipelineError, Result, Stage};
use crate::filter::{bandpass, decimate, FilterDesign};
use crate::io::{ingest_csv, Dataset};
use crate::report::{rows_of, Diagnostics, IdentificationReport, ModalEntry, Provenance, SeriesSummary, TruthErrors};

/// Known physical parameters of a simulated chain.
#[derive(Debug, Clone)]
pub struct ChainTruth {
    pub k_norm: DMatrix<f64>,
    pub d_norm: DMatrix<f64>,
    pub b_norm: DMatrix<f64>,
    /// `(f_nat rad/s, ζ)` sorted by frequency.
    pub modes: Vec<(f64, f64)>,
}

impl ChainTruth {
    pub fn of(spec: &ChainSpec) -> Result<Self> {
        let sys = build_chain(spec).stage("build_chain")?;
        let (k_norm, d_norm, b_norm) = sys.normalized().stage("build_chain")?;
        let plant = to_state_space(&sys, &SensorConfig::acceleration(sys.dof())).stage("to_state_space")?;
        let jd = real_jordan(&plant.a, DEFAULT_CLUSTER_TOL).stage("truth modes")?;
        let mut modes: Vec<(f64, f64)> = jd
            .blocks
            .iter()
            .map(|b| {
                let w = b.sigma.hypot(b.omega);
                let zeta = match b.kind {
                    BlockKind::Real => 1.0,
                    BlockKind::ComplexPair => b.sigma.abs() / w,
                };
                (w, zeta)
            })
            .collect();
        modes.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(ChainTruth { k_norm, d_norm, b_norm, modes })
    }
}

/// Everything a run produces: the report and the reconstructed `f̂_e`.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: IdentificationReport,
    /// `n × N'` at the identification sampling time.
    pub fe: DMatrix<f64>,
    pub t_s: f64,
}

/// Simulates the configured chain. Needs `chain` to be a specification and an
/// excitation to be available.
pub fn simulate_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    let ChainSource::Spec(spec) = &cfg.chain else {
        return Err(PipelineError::Config("simulation needs a chain specification".into()));
    };
    let excitation = cfg
        .input_spec
        .excitation()
        .ok_or_else(|| PipelineError::Config("simulation needs input_spec values or an excitation".into()))?;
    let sys = build_chain(spec).stage("build_chain")?;
    if !excitation.freqs.is_empty() && sys.b.ncols() != 1 {
        return Err(PipelineError::Config("multisine excitation drives exactly one input channel".into()));
    }
    let sensors = cfg.sensors.to_sensors(sys.dof());
    let plant = to_state_space(&sys, &sensors).stage("to_state_space")?;
    let opts = ContinuousSimOptions {
        oversample: cfg.sampling.oversample,
        input_snr_db: cfg.sensors.input_snr_db,
        x0: None,
    };
    let input = |t: f64| DVector::from_element(1, excitation.eval(t));
    let rec = simulate_continuous(&plant, &sys.b, &input, cfg.sampling.t_s, cfg.sampling.n, &sensors, &opts, seed)
        .stage("simulate")?;
    Ok(Dataset { t: rec.t, u: rec.u, y: rec.y, fe: rec.f_e })
}

/// Simulated data plus truth, or the external record without truth.
pub fn load_data(cfg: &ExperimentConfig, seed: u64) -> Result<(Dataset, Option<ChainTruth>)> {
    match &cfg.chain {
        ChainSource::Spec(spec) => Ok((simulate_dataset(cfg, seed)?, Some(ChainTruth::of(spec)?))),
        ChainSource::External { external, .. } => Ok((ingest_csv(external)?, None)),
    }
}

/// Band-pass (if configured) and decimation, applied identically to every
/// record passed in.
struct Front {
    t_s: f64,
    filters: Vec<FilterDesign>,
}

fn front_end(cfg: &ExperimentConfig, t_s: f64, records: &mut [&mut DMatrix<f64>]) -> Result<Front> {
    let mut filters = Vec::new();
    if let Some(bp) = &cfg.bandpass {
        let mut design = None;
        for r in records.iter_mut().filter(|r| r.nrows() > 0) {
            let (f, d) = bandpass(r, t_s, bp.lo_hz, bp.hi_hz, bp.order)?;
            **r = f;
            design = Some(d);
        }
        filters.extend(design);
    }
    let dec = cfg.ssi.decimate;
    if dec > 1 {
        let mut design = None;
        for r in records.iter_mut().filter(|r| r.nrows() > 0) {
            let (f, d) = decimate(r, t_s, dec, 8)?;
            **r = f;
            design = d;
        }
        filters.extend(design);
    }
    Ok(Front { t_s: t_s * dec as f64, filters })
}

/// Intermediate results shared by both identification modes.
struct Recovered {
    modes: Vec<CoreMode>,
    k_norm: DMatrix<f64>,
    d_norm: DMatrix<f64>,
    fe_full: DMatrix<f64>,
    fe: DMatrix<f64>,
    burn_in: usize,
    diagnostics: Diagnostics,
}

fn recover(
    cfg: &ExperimentConfig,
    y: &DMatrix<f64>,
    front: Front,
    targets: &SignalTargets,
    sensors: &SensorConfig,
    n: usize,
    mut warnings: Vec<String>,
) -> Result<Recovered> {
    let (m, len) = y.shape();
    let t_s = front.t_s;
    let model_order = 2 * n + targets.dim();
    let order_hint = match cfg.ssi.order_hint {
        OrderPolicy::Model => Some(model_order),
        OrderPolicy::Gap => None,
    };
    let i = cfg.ssi.i.unwrap_or_else(|| block_rows_for_band(model_order, m, t_s, &targets.freqs_hz, cfg.ssi.i_cap));
    let opts = SsiOptions {
        i: Some(i),
        j: cfg.ssi.j,
        order_hint,
        a_estimation: cfg.ssi.a_estimation,
        weighting: cfg.ssi.weights,
        demean: false,
    };
    let re = identify(y, t_s, &opts).stage("ssi")?;
    if !re.past_full_rank {
        warnings.push("past Hankel block rank deficient; projection used a pseudo-inverse".into());
    }
    let (a_a, c_a) = to_continuous(&re, t_s).stage("to_continuous")?;
    let tol_hz = cfg.recovery.tol_hz.unwrap_or(2.0 / (len as f64 * t_s));
    let sj = separate_blocks(&a_a, &c_a, None, targets, 2 * n, tol_hz).stage("separate_blocks")?;
    let (ts, ts_diag) = solve_ts(&sj, sensors).stage("solve_ts")?;
    if !ts_diag.full_rank() {
        warnings.push(format!("T_s system rank {} of {}", ts_diag.rank, ts_diag.cols));
    }
    let (x, x_diag) = solve_x(&sj, &ts, sensors).stage("solve_x")?;
    let mut pe = assemble_physical(&sj, &ts, &x, cfg.recovery.stability_enforce).stage("assemble_physical")?;
    pe.ts_diagnostics = Some(ts_diag.clone());
    pe.x_diagnostics = Some(x_diag.clone());
    let mut modes = modal_params(&sj);
    attach_mode_shapes(&mut modes, &sj, &ts);

    let km = kalman_gain(&re).stage("kalman_gain")?;
    let seq = kalman_states(&km, y, None, &re.d_offset).stage("kalman_states")?;
    let burn_in = cfg.recovery.burn_in.unwrap_or(seq.burn_in).min(len.saturating_sub(1));
    let est = reconstruct_input(&sj, &ts, &x, &seq.x, burn_in);

    let diagnostics = Diagnostics {
        order: re.order,
        plant_dim: sj.plant_dim(),
        signal_dim: sj.signal_dim(),
        block_rows: i,
        decimate: cfg.ssi.decimate,
        t_s_identification: t_s,
        samples_identification: len,
        singular_values: re.singular_values.clone(),
        past_full_rank: re.past_full_rank,
        ts_rank: ts_diag.rank,
        ts_cols: ts_diag.cols,
        ts_condition: ts_diag.condition,
        ts_residual: ts_diag.residual,
        x_rank: x_diag.rank,
        x_cols: x_diag.cols,
        x_condition: x_diag.condition,
        x_residual: x_diag.residual,
        structural_residual: pe.structural_residual,
        reflected_modes: pe.reflected,
        riccati_source: format!("{:?}", km.source),
        riccati_residual: km.riccati_residual,
        riccati_iterations: km.iterations,
        burn_in,
        tol_hz,
        matches: sj.matches.clone(),
        filters: front.filters,
        harmonics: None,
        harmonic_threshold: None,
        warnings,
    };
    Ok(Recovered {
        modes,
        k_norm: pe.k_norm,
        d_norm: pe.d_norm,
        fe_full: est.full,
        fe: est.f_e,
        burn_in,
        diagnostics,
    })
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn centered_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        let mu = row.mean();
        row.add_scalar_mut(-mu);
    }
    c
}

/// `(NRMSE, correlation)` of `est` against `truth` over columns `from..`.
pub fn series_fit(est: &DMatrix<f64>, truth: &DMatrix<f64>, from: usize, center: bool) -> (f64, f64) {
    let len = est.ncols().min(truth.ncols());
    let from = from.min(len);
    let e = est.columns(from, len - from).into_owned();
    let t = truth.columns(from, len - from).into_owned();
    let (ec, tc) = (centered_rows(&e), centered_rows(&t));
    let nrmse = if center { (&ec - &tc).norm() / tc.norm() } else { (&e - &t).norm() / t.norm() };
    let corr = ec.dot(&tc) / (ec.norm() * tc.norm());
    (nrmse, corr)
}

fn truth_errors(
    rec: &Recovered,
    truth: &ChainTruth,
    b_hat: Option<&DMatrix<f64>>,
    fe_truth: &DMatrix<f64>,
    center: bool,
) -> TruthErrors {
    let mut freq_rel = Vec::new();
    let mut zeta_rel = Vec::new();
    for (m, &(w, z)) in rec.modes.iter().zip(&truth.modes) {
        freq_rel.push((m.f_nat - w).abs() / w);
        zeta_rel.push((m.zeta - z).abs() / z);
    }
    if rec.modes.len() != truth.modes.len() {
        freq_rel.push(f64::INFINITY);
    }
    let (fe_nrmse, fe_corr) = if fe_truth.nrows() == rec.fe.nrows() && fe_truth.ncols() > 0 {
        series_fit(&rec.fe, fe_truth, rec.burn_in, center)
    } else {
        (f64::NAN, f64::NAN)
    };
    TruthErrors {
        k_rel: rel(&rec.k_norm, &truth.k_norm),
        d_rel: rel(&rec.d_norm, &truth.d_norm),
        b_rel: b_hat.map(|b| rel(b, &truth.b_norm)),
        max_freq_rel: freq_rel.iter().cloned().fold(0.0, f64::max),
        freq_rel,
        zeta_rel,
        fe_nrmse,
        fe_corr,
    }
}

fn sensors_for(cfg: &ExperimentConfig) -> SensorConfig {
    cfg.sensors.to_sensors(cfg.chain.dof())
}

/// Known-input identification on the configured data source.
pub fn run_pssid(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let (data, truth) = load_data(cfg, seed)?;
    pssid_on(cfg, &data, truth.as_ref(), seed)
}

/// Known-input identification on a given record.
pub fn pssid_on(cfg: &ExperimentConfig, data: &Dataset, truth: Option<&ChainTruth>, seed: u64) -> Result<RunOutput> {
    if cfg.mode != Mode::Pssid {
        return Err(PipelineError::Config("run_pssid needs mode = \"pssid\"".into()));
    }
    let ms = cfg
        .input_spec
        .known()
        .ok_or_else(|| PipelineError::Config("pssid needs a known input".into()))?;
    let t_s = data.t_s().unwrap_or(cfg.sampling.t_s);
    if data.u.nrows() == 0 {
        return Err(PipelineError::Config("pssid needs the input record".into()));
    }
    let n = cfg.chain.dof();
    let sensors = sensors_for(cfg);
    let (mut y, mut u, mut fe) = (data.y.clone(), data.u.clone(), data.fe.clone());
    let front = front_end(cfg, t_s, &mut [&mut y, &mut u, &mut fe])?;
    let nyq = 0.5 / front.t_s;
    if let Some(&f) = ms.freqs.iter().find(|&&f| f >= nyq) {
        return Err(PipelineError::Stage {
            stage: "signal model",
            source: physid_core::Error::Nyquist { highest_hz: f, nyquist_hz: nyq },
        });
    }
    // The offset reaches the outputs only through displacement or velocity
    // sensing; with accelerations alone it is unobservable.
    let dc_count = usize::from(ms.offset != 0.0 && !sensors.acceleration_only());
    let targets = SignalTargets { freqs_hz: ms.freqs.clone(), dc_count };
    let t_s_id = front.t_s;
    let rec = recover(cfg, &y, front, &targets, &sensors, n, Vec::new())?;
    let center = dc_count == 0;
    let (_, _, b_norm) = estimate_bs(&rec.fe_full, &u, rec.burn_in, center, &sensors).stage("estimate_bs")?;
    let errors = truth.map(|t| truth_errors(&rec, t, Some(&b_norm), &fe, center));
    Ok(finish(cfg, seed, rec, Some(b_norm), errors, t_s_id))
}

/// Output-only identification on the configured data source. The input
/// record is dropped before identification.
pub fn run_blind(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let (data, truth) = load_data(cfg, seed)?;
    let t_s = data.t_s().unwrap_or(cfg.sampling.t_s);
    let fe = (data.fe.nrows() > 0).then_some(&data.fe);
    blind_on(cfg, &data.y, t_s, truth.as_ref().zip(fe), seed)
}

/// Output-only identification from `y` alone. `truth` is used for scoring
/// only, after identification.
pub fn blind_on(
    cfg: &ExperimentConfig,
    y: &DMatrix<f64>,
    t_s: f64,
    truth: Option<(&ChainTruth, &DMatrix<f64>)>,
    seed: u64,
) -> Result<RunOutput> {
    if cfg.mode != Mode::Blind {
        return Err(PipelineError::Config("run_blind needs mode = \"blind\"".into()));
    }
    let n = cfg.chain.dof();
    let sensors = sensors_for(cfg);
    let mut y = y.clone();
    let mut fe = truth.map(|(_, f)| f.clone()).unwrap_or_else(|| DMatrix::zeros(0, 0));
    let front = front_end(cfg, t_s, &mut [&mut y, &mut fe])?;
    let band = cfg.blind.band_hz.or(cfg.bandpass.as_ref().map(|b| (b.lo_hz, b.hi_hz)));
    let harmonics = select_peak_harmonics(&y, front.t_s, band, cfg.blind.threshold);
    if harmonics.is_empty() {
        return Err(PipelineError::Stage {
            stage: "harmonic detection",
            source: physid_core::Error::CountMismatch("no input lines above the detection threshold".into()),
        });
    }
    let flm = finite_length_with(y.ncols(), front.t_s, &harmonics, false).stage("signal model")?;
    let targets = SignalTargets { freqs_hz: flm.frequencies_hz(), dc_count: 0 };
    let mut warnings = Vec::new();
    let order = 2 * n + targets.dim();
    if order > cfg.blind.order_cap {
        let w = format!("augmented order {order} exceeds the configured cap {}", cfg.blind.order_cap);
        log::warn!("{w}");
        warnings.push(w);
    }
    let t_s_id = front.t_s;
    let mut rec = recover(cfg, &y, front, &targets, &sensors, n, warnings)?;
    rec.diagnostics.harmonics = Some(harmonics);
    rec.diagnostics.harmonic_threshold = Some(cfg.blind.threshold);
    let errors = truth.map(|(t, _)| truth_errors(&rec, t, None, &fe, true));
    Ok(finish(cfg, seed, rec, None, errors, t_s_id))
}

fn finish(
    cfg: &ExperimentConfig,
    seed: u64,
    rec: Recovered,
    b_norm: Option<DMatrix<f64>>,
    errors: Option<TruthErrors>,
    t_s: f64,
) -> RunOutput {
    let report = IdentificationReport {
        mode: cfg.mode,
        k_norm: rows_of(&rec.k_norm),
        d_norm: rows_of(&rec.d_norm),
        b_norm: b_norm.as_ref().map(rows_of),
        modal: rec.modes.iter().map(ModalEntry::from).collect(),
        fe_summary: SeriesSummary::of(&rec.fe, rec.burn_in, t_s),
        fe_series_path: None,
        errors,
        diagnostics: rec.diagnostics,
        provenance: Provenance::new(cfg.hash(), seed),
    };
    RunOutput { report, fe: rec.fe, t_s }
}
