//! Mass-spring-damper chains, their state-space form, augmentation with
//! signal models, discretization and simulation.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::linalg::{block_diag, inverse};
use crate::signal::{Domain, MimoSignalModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Damping {
    /// Dashpots `d_1..d_{n+1}`, laid out like the springs.
    Explicit { values: Vec<f64> },
    /// `D = ε·M + ν·K`.
    Rayleigh { epsilon: f64, nu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub masses: Vec<f64>,
    /// `k_1..k_{n+1}`; `k_1` ties mass 1 to ground, `k_{i+1}` joins masses
    /// `i` and `i+1`, `k_{n+1}` ties mass `n` to ground.
    pub stiffnesses: Vec<f64>,
    pub damping: Damping,
    pub include_last_anchor: bool,
    /// Zero-based DOFs driven by each input channel.
    pub input_dofs: Vec<usize>,
}

impl ChainSpec {
    /// Unit masses, equal springs and Rayleigh damping.
    pub fn uniform(n: usize, k: f64, epsilon: f64, nu: f64) -> Self {
        ChainSpec {
            masses: vec![1.0; n],
            stiffnesses: vec![k; n + 1],
            damping: Damping::Rayleigh { epsilon, nu },
            include_last_anchor: true,
            input_dofs: vec![0],
        }
    }

    pub fn dof(&self) -> usize {
        self.masses.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MechanicalSystem {
    pub m: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// Input influence, `n × r`.
    pub b: DMatrix<f64>,
}

impl MechanicalSystem {
    pub fn dof(&self) -> usize {
        self.m.nrows()
    }

    /// `(M⁻¹K, M⁻¹D, M⁻¹B)`.
    pub fn normalized(&self) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let mi = inverse(&self.m, "mass matrix")?;
        Ok((&mi * &self.k, &mi * &self.d, &mi * &self.b))
    }
}

fn chain_matrix(values: &[f64], n: usize, last_anchor: bool) -> Result<DMatrix<f64>> {
    if values.len() != n + 1 && values.len() != n {
        return Err(Error::Dimension(format!(
            "chain of {n} masses needs {} or {} spring/dashpot values, got {}",
            n,
            n + 1,
            values.len()
        )));
    }
    if values.len() == n && last_anchor {
        return Err(Error::Dimension(format!(
            "include_last_anchor needs {} values, got {n}",
            n + 1
        )));
    }
    let v = |i: usize| -> f64 {
        if i == n && !last_anchor {
            0.0
        } else {
            values.get(i).copied().unwrap_or(0.0)
        }
    };
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = v(i) + v(i + 1);
        if i + 1 < n {
            k[(i, i + 1)] = -v(i + 1);
            k[(i + 1, i)] = -v(i + 1);
        }
    }
    Ok(k)
}

pub fn build_chain(spec: &ChainSpec) -> Result<MechanicalSystem> {
    let n = spec.dof();
    if n == 0 {
        return Err(Error::InvalidArgument("chain needs at least one mass".into()));
    }
    if let Some(m) = spec.masses.iter().find(|&&m| !(m > 0.0)) {
        return Err(Error::InvalidArgument(format!("masses must be positive, got {m}")));
    }
    if let Some(k) = spec.stiffnesses.iter().find(|&&k| !(k >= 0.0)) {
        return Err(Error::InvalidArgument(format!("stiffnesses must be nonnegative, got {k}")));
    }
    let m = DMatrix::from_diagonal(&DVector::from_column_slice(&spec.masses));
    let k = chain_matrix(&spec.stiffnesses, n, spec.include_last_anchor)?;
    if (0..n).any(|i| k.row(i).iter().all(|&x| x == 0.0)) {
        return Err(Error::InvalidArgument("every mass needs at least one spring".into()));
    }
    let d = match &spec.damping {
        Damping::Explicit { values } => chain_matrix(values, n, spec.include_last_anchor)?,
        Damping::Rayleigh { epsilon, nu } => &m * *epsilon + &k * *nu,
    };
    if spec.input_dofs.is_empty() {
        return Err(Error::InvalidArgument("at least one input DOF is required".into()));
    }
    let mut b = DMatrix::zeros(n, spec.input_dofs.len());
    for (c, &dof) in spec.input_dofs.iter().enumerate() {
        if dof >= n {
            return Err(Error::InvalidArgument(format!("input DOF {dof} outside chain of {n}")));
        }
        b[(dof, c)] = 1.0;
    }
    Ok(MechanicalSystem { m, d, k, b })
}

/// Sensor sensitivities: `y = C_p q + C_v q̇ + C_ac q̈ + e_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub c_p: DMatrix<f64>,
    pub c_v: DMatrix<f64>,
    pub c_ac: DMatrix<f64>,
    pub noise_snr_db: Option<f64>,
}

impl SensorConfig {
    /// One accelerometer per DOF, no displacement or velocity sensing.
    pub fn acceleration(n: usize) -> Self {
        SensorConfig {
            c_p: DMatrix::zeros(n, n),
            c_v: DMatrix::zeros(n, n),
            c_ac: DMatrix::identity(n, n),
            noise_snr_db: None,
        }
    }

    pub fn displacement(n: usize) -> Self {
        SensorConfig {
            c_p: DMatrix::identity(n, n),
            c_v: DMatrix::zeros(n, n),
            c_ac: DMatrix::zeros(n, n),
            noise_snr_db: None,
        }
    }

    pub fn with_snr(mut self, snr_db: Option<f64>) -> Self {
        self.noise_snr_db = snr_db;
        self
    }

    pub fn outputs(&self) -> usize {
        self.c_ac.nrows()
    }

    pub fn dof(&self) -> usize {
        self.c_ac.ncols()
    }

    /// True when only accelerations are measured.
    pub fn acceleration_only(&self) -> bool {
        self.c_p.iter().all(|&v| v == 0.0) && self.c_v.iter().all(|&v| v == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.c_ac.shape();
        if self.c_p.shape() != (m, n) || self.c_v.shape() != (m, n) {
            return Err(Error::Dimension(format!(
                "sensor matrices disagree: C_p {:?}, C_v {:?}, C_ac {:?}",
                self.c_p.shape(),
                self.c_v.shape(),
                self.c_ac.shape()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantStateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub domain: Domain,
    pub t_s: Option<f64>,
}

impl PlantStateSpace {
    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}

/// Physical-coordinate form with state `(q, q̇)`.
pub fn to_state_space(sys: &MechanicalSystem, sensors: &SensorConfig) -> Result<PlantStateSpace> {
    sensors.validate()?;
    let n = sys.dof();
    if sensors.dof() != n {
        return Err(Error::Dimension(format!("sensors cover {} DOFs, system has {n}", sensors.dof())));
    }
    let (kn, dn, bn) = sys.normalized()?;
    let r = bn.ncols();
    let m = sensors.outputs();

    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(-&kn));
    a.view_mut((n, n), (n, n)).copy_from(&(-&dn));

    let mut b = DMatrix::zeros(2 * n, r);
    b.view_mut((n, 0), (n, r)).copy_from(&bn);

    let mut c = DMatrix::zeros(m, 2 * n);
    c.view_mut((0, 0), (m, n)).copy_from(&(&sensors.c_p - &sensors.c_ac * &kn));
    c.view_mut((0, n), (m, n)).copy_from(&(&sensors.c_v - &sensors.c_ac * &dn));
    let d = &sensors.c_ac * &bn;

    Ok(PlantStateSpace { a, b, c, d, domain: Domain::Continuous, t_s: None })
}

/// Plant plus signal model as one autonomous system. `k`/`v` route the
/// unmodeled signal residual into the state and output equations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentedModel {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub plant_dim: usize,
    pub signal_dim: usize,
    pub domain: Domain,
}

pub fn augment(plant: &PlantStateSpace, sig: &MimoSignalModel) -> Result<AugmentedModel> {
    let r = plant.inputs();
    if sig.c_u.nrows() != r {
        return Err(Error::Dimension(format!(
            "signal model has {} channels, plant has {r} inputs",
            sig.c_u.nrows()
        )));
    }
    if sig.domain() != plant.domain {
        return Err(Error::InvalidArgument("plant and signal model live in different time domains".into()));
    }
    let np = plant.states();
    let nu = sig.n_u;
    let mut a = block_diag(&[&plant.a, &sig.a_u]);
    a.view_mut((0, np), (np, nu)).copy_from(&(&plant.b * &sig.c_u));
    let mut c = DMatrix::zeros(plant.outputs(), np + nu);
    c.view_mut((0, 0), plant.c.shape()).copy_from(&plant.c);
    c.view_mut((0, np), (plant.outputs(), nu)).copy_from(&(&plant.d * &sig.c_u));
    let mut k = DMatrix::zeros(np + nu, r);
    k.view_mut((0, 0), (np, r)).copy_from(&plant.b);
    Ok(AugmentedModel {
        a,
        c,
        k,
        v: plant.d.clone(),
        plant_dim: np,
        signal_dim: nu,
        domain: plant.domain,
    })
}

/// Zero-order-hold discretization through the block exponential
/// `exp([[A, B], [0, 0]]·T)`.
pub fn discretize(plant: &PlantStateSpace, t_s: f64) -> Result<PlantStateSpace> {
    if !(t_s > 0.0) {
        return Err(Error::InvalidArgument(format!("sampling time must be positive, got {t_s}")));
    }
    if plant.domain != Domain::Continuous {
        return Err(Error::InvalidArgument("plant is already discrete".into()));
    }
    let (ns, r) = (plant.states(), plant.inputs());
    let mut m = DMatrix::zeros(ns + r, ns + r);
    m.view_mut((0, 0), (ns, ns)).copy_from(&(&plant.a * t_s));
    m.view_mut((0, ns), (ns, r)).copy_from(&(&plant.b * t_s));
    let e = m.exp();
    Ok(PlantStateSpace {
        a: e.view((0, 0), (ns, ns)).into_owned(),
        b: e.view((0, ns), (ns, r)).into_owned(),
        c: plant.c.clone(),
        d: plant.d.clone(),
        domain: Domain::Discrete,
        t_s: Some(t_s),
    })
}

/// First-order-hold factors `(Φ, Γ₀, Γ₁)` for
/// `x⁺ = Φx + Γ₀u_k + Γ₁(u_{k+1} − u_k)`, exact for inputs that are linear
/// between samples.
fn foh_factors(plant: &PlantStateSpace, h: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (ns, r) = (plant.states(), plant.inputs());
    let dim = ns + 2 * r;
    let mut m = DMatrix::zeros(dim, dim);
    m.view_mut((0, 0), (ns, ns)).copy_from(&(&plant.a * h));
    m.view_mut((0, ns), (ns, r)).copy_from(&(&plant.b * h));
    m.view_mut((ns, ns + r), (r, r)).fill_with_identity();
    let e = m.exp();
    (
        e.view((0, 0), (ns, ns)).into_owned(),
        e.view((0, ns), (ns, r)).into_owned(),
        e.view((0, ns + r), (ns, r)).into_owned(),
    )
}

/// A simulated record. Columns are samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimRecord {
    pub t: Vec<f64>,
    /// `r × N` input as known to the experimenter.
    pub u: DMatrix<f64>,
    /// `m × N` measured outputs.
    pub y: DMatrix<f64>,
    /// `n × N` effective input `B·u` actually applied.
    pub f_e: DMatrix<f64>,
    /// State trajectory, `2n × N`.
    pub x: DMatrix<f64>,
}

impl SimRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Per-row white Gaussian noise at `snr_db` relative to each row's variance.
pub fn add_noise(y: &mut DMatrix<f64>, snr_db: f64, rng: &mut ChaCha8Rng) {
    let n = y.ncols();
    if n == 0 {
        return;
    }
    let scale = 10f64.powf(-snr_db / 10.0);
    for mut row in y.row_iter_mut() {
        let mean = row.mean();
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = (var * scale).sqrt();
        if sd == 0.0 {
            continue;
        }
        let dist = Normal::new(0.0, sd).expect("finite standard deviation");
        for v in row.iter_mut() {
            *v += dist.sample(rng);
        }
    }
}

/// Noise streams derived from one seed: output noise and input noise never
/// share draws.
pub fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const OUTPUT_STREAM: u64 = 1;
const INPUT_STREAM: u64 = 2;

/// Discrete simulation with held inputs. `b_influence` is only used to
/// record `f_e = B·u`.
pub fn simulate(
    plant_d: &PlantStateSpace,
    b_influence: &DMatrix<f64>,
    u: &DMatrix<f64>,
    sensors: &SensorConfig,
    seed: u64,
    x0: Option<&DVector<f64>>,
) -> Result<SimRecord> {
    if plant_d.domain != Domain::Discrete {
        return Err(Error::InvalidArgument("simulate needs a discrete plant".into()));
    }
    check_input(plant_d, u)?;
    let t_s = plant_d.t_s.unwrap_or(1.0);
    let n = u.ncols();
    let ns = plant_d.states();
    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(ns));
    let mut xs = DMatrix::zeros(ns, n);
    let mut y = DMatrix::zeros(plant_d.outputs(), n);
    for k in 0..n {
        let uk = u.column(k);
        xs.set_column(k, &x);
        y.set_column(k, &(&plant_d.c * &x + &plant_d.d * uk));
        x = &plant_d.a * &x + &plant_d.b * uk;
    }
    if let Some(snr) = sensors.noise_snr_db {
        add_noise(&mut y, snr, &mut noise_rng(seed, OUTPUT_STREAM));
    }
    Ok(SimRecord {
        t: (0..n).map(|k| k as f64 * t_s).collect(),
        u: u.clone(),
        y,
        f_e: b_influence * u,
        x: xs,
    })
}

fn check_input(plant: &PlantStateSpace, u: &DMatrix<f64>) -> Result<()> {
    if u.nrows() != plant.inputs() {
        return Err(Error::Dimension(format!("input has {} rows, plant takes {}", u.nrows(), plant.inputs())));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("input record has non-finite samples".into()));
    }
    Ok(())
}

/// Options for [`simulate_continuous`].
#[derive(Debug, Clone, Default)]
pub struct ContinuousSimOptions {
    /// Integration steps per output sample; at least 1.
    pub oversample: usize,
    /// Process noise added to the applied input at this SNR.
    pub input_snr_db: Option<f64>,
    pub x0: Option<DVector<f64>>,
}

/// Simulates a continuous plant driven by `input(t)` (returning `r` values)
/// and samples the outputs every `t_s`.
///
/// Integration runs at `t_s / oversample` with a first-order hold, so smooth
/// inputs are tracked closely. Input noise, if requested, is white at the
/// output rate and interpolated linearly in between.
pub fn simulate_continuous(
    plant: &PlantStateSpace,
    b_influence: &DMatrix<f64>,
    input: &dyn Fn(f64) -> DVector<f64>,
    t_s: f64,
    n: usize,
    sensors: &SensorConfig,
    opts: &ContinuousSimOptions,
    seed: u64,
) -> Result<SimRecord> {
    if plant.domain != Domain::Continuous {
        return Err(Error::InvalidArgument("simulate_continuous needs a continuous plant".into()));
    }
    if !(t_s > 0.0) {
        return Err(Error::InvalidArgument(format!("sampling time must be positive, got {t_s}")));
    }
    let l = opts.oversample.max(1);
    let h = t_s / l as f64;
    let (phi, g0, g1) = foh_factors(plant, h);
    let r = plant.inputs();
    let ns = plant.states();

    let mut u_clean = DMatrix::zeros(r, n + 1);
    for k in 0..=n {
        let v = input(k as f64 * t_s);
        if v.len() != r {
            return Err(Error::Dimension(format!("input function returned {} values, plant takes {r}", v.len())));
        }
        u_clean.set_column(k, &v);
    }
    let mut noise = DMatrix::zeros(r, n + 1);
    if let Some(snr) = opts.input_snr_db {
        let mut probe = u_clean.columns(0, n).into_owned();
        let before = probe.clone();
        add_noise(&mut probe, snr, &mut noise_rng(seed, INPUT_STREAM));
        noise.columns_mut(0, n).copy_from(&(probe - before));
    }

    let mut x = opts.x0.clone().unwrap_or_else(|| DVector::zeros(ns));
    let mut xs = DMatrix::zeros(ns, n);
    let mut y = DMatrix::zeros(plant.outputs(), n);
    let mut applied = DMatrix::zeros(r, n);
    for k in 0..n {
        let uk = u_clean.column(k) + noise.column(k);
        xs.set_column(k, &x);
        y.set_column(k, &(&plant.c * &x + &plant.d * &uk));
        applied.set_column(k, &uk);
        let w0 = noise.column(k).into_owned();
        let w1 = noise.column(k + 1).into_owned();
        let mut u_prev = uk;
        for s in 1..=l {
            let t = (k as f64 + s as f64 / l as f64) * t_s;
            let frac = s as f64 / l as f64;
            let w = &w0 * (1.0 - frac) + &w1 * frac;
            let u_next = if s == l {
                u_clean.column(k + 1) + &w
            } else {
                input(t) + &w
            };
            x = &phi * &x + &g0 * &u_prev + &g1 * (&u_next - &u_prev);
            u_prev = u_next;
        }
    }
    if let Some(snr) = sensors.noise_snr_db {
        add_noise(&mut y, snr, &mut noise_rng(seed, OUTPUT_STREAM));
    }
    Ok(SimRecord {
        t: (0..n).map(|k| k as f64 * t_s).collect(),
        u: u_clean.columns(0, n).into_owned(),
        y,
        f_e: b_influence * &applied,
        x: xs,
    })
}

/// `offset + Σ aᵢ sin(2π fᵢ t + αᵢ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multisine {
    pub freqs: Vec<f64>,
    pub amps: Vec<f64>,
    pub phases: Vec<f64>,
    pub offset: f64,
}

impl Multisine {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset
            + self
                .freqs
                .iter()
                .zip(&self.amps)
                .zip(&self.phases)
                .map(|((f, a), p)| a * (2.0 * PI * f * t + p).sin())
                .sum::<f64>()
    }

    pub fn sample(&self, n: usize, t_s: f64) -> DMatrix<f64> {
        DMatrix::from_fn(1, n, |_, k| self.eval(k as f64 * t_s))
    }
}

/// Sampled multisine as a `1 × N` record.
pub fn multisine(freqs: &[f64], amps: &[f64], phases: &[f64], offset: f64, n: usize, t_s: f64) -> Result<DMatrix<f64>> {
    if freqs.len() != amps.len() || freqs.len() != phases.len() {
        return Err(Error::Dimension("freqs, amps and phases must have equal length".into()));
    }
    let nyq = 0.5 / t_s;
    if let Some(&f) = freqs.iter().find(|&&f| f >= nyq) {
        return Err(Error::Nyquist { highest_hz: f, nyquist_hz: nyq });
    }
    let ms = Multisine {
        freqs: freqs.to_vec(),
        amps: amps.to_vec(),
        phases: phases.to_vec(),
        offset,
    };
    Ok(ms.sample(n, t_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{build_dt_periodic, fit_initial_state, free_response, stack_mimo};
    use approx::assert_relative_eq;

    fn one_dof() -> MechanicalSystem {
        MechanicalSystem {
            m: DMatrix::from_element(1, 1, 1.0),
            d: DMatrix::from_element(1, 1, 0.4),
            k: DMatrix::from_element(1, 1, 4.0),
            b: DMatrix::from_element(1, 1, 1.0),
        }
    }

    #[test]
    fn chain_stiffness_pattern() {
        let mut spec = ChainSpec::uniform(2, 100.0, 0.1, 0.001);
        let sys = build_chain(&spec).unwrap();
        assert_eq!(sys.k, DMatrix::from_row_slice(2, 2, &[200.0, -100.0, -100.0, 200.0]));
        assert_relative_eq!(sys.d, &sys.m * 0.1 + &sys.k * 0.001, epsilon = 1e-15);

        spec.stiffnesses = vec![100.0, 100.0];
        spec.include_last_anchor = false;
        let sys = build_chain(&spec).unwrap();
        assert_eq!(sys.k, DMatrix::from_row_slice(2, 2, &[200.0, -100.0, -100.0, 100.0]));
    }

    #[test]
    fn chain_rejects_bad_mass() {
        let mut spec = ChainSpec::uniform(2, 100.0, 0.1, 0.001);
        spec.masses[1] = 0.0;
        assert!(build_chain(&spec).is_err());
    }

    #[test]
    fn one_dof_state_space() {
        let p = to_state_space(&one_dof(), &SensorConfig::acceleration(1)).unwrap();
        assert_eq!(p.a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -4.0, -0.4]));
        assert_eq!(p.b.as_slice(), &[0.0, 1.0]);
        assert_eq!(p.c, DMatrix::from_row_slice(1, 2, &[-4.0, -0.4]));
        assert_eq!(p.d[(0, 0)], 1.0);
    }

    #[test]
    fn displacement_sensing() {
        let sys = build_chain(&ChainSpec::uniform(2, 100.0, 0.1, 0.001)).unwrap();
        let p = to_state_space(&sys, &SensorConfig::displacement(2)).unwrap();
        let mut expected = DMatrix::zeros(2, 4);
        expected.view_mut((0, 0), (2, 2)).fill_with_identity();
        assert_eq!(p.c, expected);
        assert_eq!(p.d, DMatrix::zeros(2, 1));
    }

    #[test]
    fn augmentation_dimensions() {
        let mut spec = ChainSpec::uniform(3, 100.0, 0.1, 0.001);
        spec.input_dofs = vec![0, 2];
        let sys = build_chain(&spec).unwrap();
        let p = discretize(&to_state_space(&sys, &SensorConfig::acceleration(3)).unwrap(), 0.01).unwrap();
        let ch = build_dt_periodic(0.5, 4, 0.01).unwrap();
        let sig = stack_mimo(vec![ch.clone(), ch]).unwrap();
        let aug = augment(&p, &sig).unwrap();
        assert_eq!(aug.a.nrows(), 20);
        assert_eq!(aug.a.view((6, 0), (14, 6)).norm(), 0.0);
    }

    #[test]
    fn scalar_discretization() {
        let p = PlantStateSpace {
            a: DMatrix::from_element(1, 1, -1.0),
            b: DMatrix::from_element(1, 1, 1.0),
            c: DMatrix::from_element(1, 1, 1.0),
            d: DMatrix::zeros(1, 1),
            domain: Domain::Continuous,
            t_s: None,
        };
        let pd = discretize(&p, 0.1).unwrap();
        assert_relative_eq!(pd.a[(0, 0)], (-0.1f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(pd.b[(0, 0)], 1.0 - (-0.1f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn null_simulation() {
        let p = to_state_space(&one_dof(), &SensorConfig::acceleration(1)).unwrap();
        let pd = discretize(&p, 0.01).unwrap();
        let rec = simulate(&pd, &DMatrix::identity(1, 1), &DMatrix::zeros(1, 100), &SensorConfig::acceleration(1), 0, None).unwrap();
        assert!(rec.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn quarter_period_sine() {
        let u = multisine(&[1.0], &[1.0], &[0.0], 0.0, 5, 0.25).unwrap();
        let expected = [0.0, 1.0, 0.0, -1.0, 0.0];
        for (a, b) in u.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        let dc = multisine(&[], &[], &[], 2.0, 4, 0.1).unwrap();
        assert!(dc.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn multisine_reproduced_by_signal_model() {
        let t_s = 0.01;
        let u = multisine(&[0.5, 1.0, 1.5], &[1.0, 0.7, 0.3], &[0.2, -1.0, 2.0], 0.4, 400, t_s).unwrap();
        let m = build_dt_periodic(0.5, 4, t_s).unwrap();
        let (x0, res) = fit_initial_state(&m.a_u, &m.c_u, &u);
        assert!(res < 1e-10, "residual {res}");
        let rebuilt = free_response(&m.a_u, &m.c_u, &x0, 400);
        assert_relative_eq!(rebuilt, u, epsilon = 1e-10);
    }
}
