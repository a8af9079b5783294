//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use physid_core::mech::{ChainSpec, Multisine, SensorConfig};
use physid_core::ssi::{AEstimation, Weighting};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Pssid,
    Blind,
    InputEstimationDemo,
}

/// Either a chain to simulate or recorded data for a chain of known size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChainSource {
    Spec(ChainSpec),
    External { external: PathBuf, dof: usize },
}

impl ChainSource {
    pub fn dof(&self) -> usize {
        match self {
            ChainSource::Spec(s) => s.dof(),
            ChainSource::External { dof, .. } => *dof,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SensorKind {
    #[default]
    Acceleration,
    Velocity,
    Displacement,
}

/// One sensor of the given kind per DOF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    #[serde(default)]
    pub kind: SensorKind,
    /// Output SNR in dB; absent means noise-free outputs.
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Process noise on the applied input, in dB relative to the input
    /// variance.
    #[serde(default)]
    pub input_snr_db: Option<f64>,
}

impl SensorSpec {
    pub fn to_sensors(&self, n: usize) -> SensorConfig {
        let z = nalgebra::DMatrix::zeros(n, n);
        let i = nalgebra::DMatrix::identity(n, n);
        let (c_p, c_v, c_ac) = match self.kind {
            SensorKind::Acceleration => (z.clone(), z.clone(), i),
            SensorKind::Velocity => (z.clone(), i, z.clone()),
            SensorKind::Displacement => (i, z.clone(), z.clone()),
        };
        SensorConfig { c_p, c_v, c_ac, noise_snr_db: self.snr_db }
    }
}

/// Input description. `Unknown` still carries the excitation used to
/// generate synthetic data; identification never sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputSpec {
    Multisine {
        freqs_hz: Vec<f64>,
        amps: Vec<f64>,
        phases: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    Unknown {
        #[serde(default)]
        excitation: Option<Excitation>,
    },
}

/// Sum of sinusoids used to excite the plant in blind experiments; the
/// frequencies need not be harmonics of the record length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Excitation {
    pub freqs_hz: Vec<f64>,
    pub amps: Vec<f64>,
    pub phases: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

impl Excitation {
    pub fn to_multisine(&self) -> Multisine {
        Multisine {
            freqs: self.freqs_hz.clone(),
            amps: self.amps.clone(),
            phases: self.phases.clone(),
            offset: self.offset,
        }
    }
}

impl InputSpec {
    /// The known input as a multisine; `None` for unknown inputs.
    pub fn known(&self) -> Option<Multisine> {
        match self {
            InputSpec::Multisine { freqs_hz, amps, phases, offset } => Some(Multisine {
                freqs: freqs_hz.clone(),
                amps: amps.clone(),
                phases: phases.clone(),
                offset: *offset,
            }),
            InputSpec::Unknown { .. } => None,
        }
    }

    /// The signal driving the simulator.
    pub fn excitation(&self) -> Option<Multisine> {
        match self {
            InputSpec::Multisine { .. } => self.known(),
            InputSpec::Unknown { excitation } => excitation.as_ref().map(Excitation::to_multisine),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub t_s: f64,
    pub n: usize,
    /// Integration substeps per sample in the simulator.
    #[serde(default = "default_oversample")]
    pub oversample: usize,
}

fn default_oversample() -> usize {
    20
}

/// How the SSI order is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OrderPolicy {
    /// `2n + n_u` from the configured DOF and signal model.
    #[default]
    Model,
    /// Largest gap of the singular-value spectrum.
    Gap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsiConfig {
    /// Block rows; absent picks a window spanning the slowest component.
    #[serde(default)]
    pub i: Option<usize>,
    #[serde(default)]
    pub j: Option<usize>,
    #[serde(default)]
    pub weights: Weighting,
    #[serde(default)]
    pub order_hint: OrderPolicy,
    #[serde(default)]
    pub a_estimation: AEstimation,
    /// Anti-aliased downsampling factor applied to the outputs (and known
    /// inputs) before identification.
    #[serde(default = "one")]
    pub decimate: usize,
    /// Upper limit for automatically chosen block rows.
    #[serde(default = "default_i_cap")]
    pub i_cap: usize,
}

fn one() -> usize {
    1
}

fn default_i_cap() -> usize {
    80
}

impl Default for SsiConfig {
    fn default() -> Self {
        SsiConfig {
            i: None,
            j: None,
            weights: Weighting::Identity,
            order_hint: OrderPolicy::Model,
            a_estimation: AEstimation::ShiftInvariance,
            decimate: 1,
            i_cap: default_i_cap(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    /// Matching tolerance in Hz; absent means two frequency bins of the
    /// identification record.
    #[serde(default)]
    pub tol_hz: Option<f64>,
    #[serde(default)]
    pub stability_enforce: bool,
    #[serde(default)]
    pub burn_in: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandpassConfig {
    pub lo_hz: f64,
    pub hi_hz: f64,
    #[serde(default = "default_filter_order")]
    pub order: usize,
}

fn default_filter_order() -> usize {
    4
}

/// Harmonic detection for blind runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlindConfig {
    /// Fraction of in-band periodogram energy a bin must exceed.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Band searched for input lines; absent means the band-pass band, or
    /// everything below Nyquist.
    #[serde(default)]
    pub band_hz: Option<(f64, f64)>,
    /// Warn when the augmented order exceeds this.
    #[serde(default = "default_order_cap")]
    pub order_cap: usize,
}

fn default_threshold() -> f64 {
    1e-4
}

fn default_order_cap() -> usize {
    60
}

impl Default for BlindConfig {
    fn default() -> Self {
        BlindConfig { threshold: default_threshold(), band_hz: None, order_cap: default_order_cap() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    #[serde(default = "one")]
    pub runs: usize,
    /// Explicit seeds; absent means `seed, seed+1, …` for `runs` runs.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub snr_list: Vec<f64>,
    #[serde(default)]
    pub dof_list: Vec<usize>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig { runs: 1, seeds: None, snr_list: Vec::new(), dof_list: Vec::new() }
    }
}

/// Setup of the input-estimation demo on a known discrete model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub g: Vec<f64>,
    pub noise_cov: f64,
    pub fs_hz: f64,
    pub n: usize,
    pub n1: usize,
    /// Start of the estimated segment inside the long record.
    pub segment_start: usize,
    /// Upper edge of the band-limited test signal.
    pub signal_band_hz: f64,
    /// Harmonics of `fs/n1` retained by the signal model; absent keeps
    /// every harmonic below Nyquist.
    pub harmonics: Option<usize>,
    /// Number of sinusoids in the test signal.
    pub components: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            a: vec![vec![0.5, 0.0], vec![0.0, 0.6]],
            b: vec![1.0, 0.5],
            c: vec![1.0, 1.0],
            g: vec![1.0, 0.5],
            noise_cov: 1e-4,
            fs_hz: 10_000.0,
            n: 60_000,
            n1: 10_000,
            segment_start: 20_000,
            signal_band_hz: 50.0,
            harmonics: None,
            components: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    pub chain: ChainSource,
    #[serde(default)]
    pub sensors: SensorSpec,
    pub input_spec: InputSpec,
    pub sampling: Sampling,
    #[serde(default)]
    pub ssi: SsiConfig,
    #[serde(default)]
    pub recovery: RecoveryConfig,
    #[serde(default)]
    pub bandpass: Option<BandpassConfig>,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub blind: BlindConfig,
    #[serde(default)]
    pub demo: DemoConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.sampling.t_s > 0.0) {
            return bad(format!("sampling.t_s must be positive, got {}", self.sampling.t_s));
        }
        if self.sampling.n < 16 {
            return bad(format!("sampling.n must be at least 16, got {}", self.sampling.n));
        }
        if self.ssi.decimate == 0 {
            return bad("ssi.decimate must be positive".into());
        }
        match (&self.mode, &self.input_spec) {
            (Mode::Pssid, InputSpec::Unknown { .. }) => {
                return bad("pssid mode needs a known input_spec (kind = \"multisine\")".into());
            }
            (Mode::Blind, InputSpec::Multisine { .. }) => {
                return bad("blind mode needs input_spec kind = \"unknown\"".into());
            }
            _ => {}
        }
        if let InputSpec::Multisine { freqs_hz, amps, phases, .. } = &self.input_spec {
            if freqs_hz.len() != amps.len() || freqs_hz.len() != phases.len() {
                return bad("input_spec: freqs_hz, amps and phases must have equal length".into());
            }
        }
        if let InputSpec::Unknown { excitation: Some(e) } = &self.input_spec {
            if e.freqs_hz.len() != e.amps.len() || e.freqs_hz.len() != e.phases.len() {
                return bad("input_spec.excitation: freqs_hz, amps and phases must have equal length".into());
            }
        }
        if let Some(b) = &self.bandpass {
            let nyq = 0.5 / self.sampling.t_s;
            if !(b.lo_hz >= 0.0 && b.hi_hz > b.lo_hz && b.hi_hz < nyq) {
                return bad(format!("bandpass needs 0 <= lo < hi < {nyq}, got ({}, {})", b.lo_hz, b.hi_hz));
            }
        }
        if let ChainSource::Spec(spec) = &self.chain {
            physid_core::mech::build_chain(spec).map_err(|e| PipelineError::Config(format!("chain: {e}")))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configuration serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Seeds for Monte Carlo runs.
    pub fn seeds(&self) -> Vec<u64> {
        match &self.monte_carlo.seeds {
            Some(s) => s.clone(),
            None => (0..self.monte_carlo.runs.max(1) as u64).map(|k| self.seed + k).collect(),
        }
    }

    /// Three-mass benchmark chain with a known multisine input.
    pub fn benchmark_pssid() -> Self {
        ExperimentConfig {
            mode: Mode::Pssid,
            seed: 1,
            chain: ChainSource::Spec(ChainSpec::uniform(3, 100.0, 0.1, 0.001)),
            sensors: SensorSpec::default(),
            input_spec: InputSpec::Multisine {
                freqs_hz: vec![0.5, 1.0, 1.5],
                amps: vec![1.0, 0.8, 0.6],
                phases: vec![0.3, 1.1, -0.7],
                offset: 0.5,
            },
            sampling: Sampling { t_s: 0.005, n: 50_000, oversample: 20 },
            ssi: SsiConfig::default(),
            recovery: RecoveryConfig::default(),
            bandpass: None,
            monte_carlo: MonteCarloConfig::default(),
            blind: BlindConfig::default(),
            demo: DemoConfig::default(),
        }
    }

    /// Same chain driven by a non-periodic sum of sinusoids that the
    /// identifier never sees.
    pub fn benchmark_blind() -> Self {
        ExperimentConfig {
            mode: Mode::Blind,
            input_spec: InputSpec::Unknown {
                excitation: Some(Excitation {
                    freqs_hz: vec![0.3712, 0.6391, 0.8547],
                    amps: vec![1.0, 0.9, 0.8],
                    phases: vec![0.4, 2.1, -1.3],
                    offset: 0.0,
                }),
            },
            ssi: SsiConfig { decimate: 10, ..SsiConfig::default() },
            blind: BlindConfig { threshold: 1e-3, band_hz: Some((0.05, 1.0)), ..BlindConfig::default() },
            ..Self::benchmark_pssid()
        }
    }

    /// The state-space input-estimation demo with its default constants.
    pub fn demo_default() -> Self {
        ExperimentConfig { mode: Mode::InputEstimationDemo, ..Self::benchmark_pssid() }
    }
}
