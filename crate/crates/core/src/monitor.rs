//! Sequential monitoring: detector, boundary, stopping rule and restarts.
//!
//! The detector after `k` monitored steps is `d(k) = |Σ (Γ_t − 1)/√2|` and
//! the boundary is `c · ν*(k; m)` with
//! `ν*(k; m) = √m (1 + k/m) (k/(k+m))^η`. Monitoring stops at the first `k`
//! where the detector reaches the boundary; the break date is reported as
//! `k̂ + m` past the origin of the current segment.

use std::io::Write;
use std::str::FromStr;

use nalgebra::{DVector, DVectorView};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{eigen_symmetric, estimate_num_factors, EigenSpectrum, RollingCovariance};
use crate::error::{invalid, Error, Result};
use crate::panel::Panel;
use crate::randomize::{GammaStat, Randomizer, RandomizerConfig, StepStatistics};
use crate::rng::keyed_stream;

/// Tabulated `(η, α, c)` values of the Wiener-sup quantile.
pub const WIENER_LOOKUP: [(f64, f64, f64); 2] = [(0.45, 0.05, 2.7992), (0.45, 0.10, 2.5437)];

/// Minimum grid resolution accepted by the Monte Carlo critical value.
pub const MIN_WIENER_GRID: usize = 1000;

/// `√m (1 + k/m) (k/(k+m))^η`.
pub fn nu_star(k: usize, m: usize, eta: f64) -> f64 {
    let (k, m) = (k as f64, m as f64);
    m.sqrt() * (1.0 + k / m) * (k / (k + m)).powf(eta)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&eta) {
        return Err(invalid(format!("eta = {eta} must lie in [0, 0.5]")));
    }
    Ok(())
}

/// Gumbel-type critical value for `η = 1/2`.
pub fn critical_value_eta_half(m: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if m < 16 {
        return Err(invalid(format!(
            "m = {m} too small for the eta = 0.5 critical value: ln ln ln m requires ln ln m > 1, i.e. m >= 16"
        )));
    }
    let lnln = (m as f64).ln().ln();
    let a = (2.0 * lnln).sqrt();
    let d = 2.0 * lnln + 0.5 * lnln.ln() - 0.5 * std::f64::consts::PI.ln();
    Ok((d - (-(1.0 - alpha).ln()).ln()) / a)
}

/// Simulation settings for the Wiener-sup quantile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WienerMc {
    pub grid_points: usize,
    pub replications: usize,
    pub seed: u64,
}

impl Default for WienerMc {
    fn default() -> Self {
        Self { grid_points: 10_000, replications: 100_000, seed: 0 }
    }
}

/// How a critical value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalSource {
    ClosedForm,
    Lookup,
    MonteCarlo,
}

impl CriticalSource {
    pub fn as_str(self) -> &'static str {
        match self {
            CriticalSource::ClosedForm => "closed-form",
            CriticalSource::Lookup => "lookup",
            CriticalSource::MonteCarlo => "monte-carlo",
        }
    }
}

fn lookup(eta: f64, alpha: f64) -> Option<f64> {
    WIENER_LOOKUP
        .iter()
        .find(|&&(e, a, _)| (e - eta).abs() < 1e-12 && (a - alpha).abs() < 1e-12)
        .map(|&(_, _, c)| c)
}

/// `sup_{0<t≤1} |B(t)| / t^η` over one simulated path.
fn wiener_sup(weights: &[f64], seed: u64, path: u64) -> f64 {
    let mut rng = keyed_stream(seed, path);
    let step = (weights.len() as f64).sqrt().recip();
    let mut b = 0.0_f64;
    let mut best = 0.0_f64;
    for &w in weights {
        let z: f64 = StandardNormal.sample(&mut rng);
        b += z * step;
        best = best.max(b.abs() * w);
    }
    best
}

/// Simulated `(1−α)` quantile of `sup |B(t)|/t^η`, ignoring the lookup table.
pub fn wiener_quantile_mc(eta: f64, alpha: f64, mc: &WienerMc) -> Result<f64> {
    if !(0.0..0.5).contains(&eta) {
        return Err(invalid(format!("eta = {eta} must lie in [0, 0.5) for the Wiener critical value")));
    }
    check_alpha(alpha)?;
    if mc.grid_points < MIN_WIENER_GRID {
        return Err(invalid(format!(
            "grid_points = {} is below the minimum of {MIN_WIENER_GRID}",
            mc.grid_points
        )));
    }
    if mc.replications == 0 {
        return Err(invalid("Monte Carlo replications must be positive"));
    }
    let g = mc.grid_points as f64;
    let weights: Vec<f64> = (1..=mc.grid_points).map(|i| (i as f64 / g).powf(-eta)).collect();
    let mut sups: Vec<f64> = (0..mc.replications as u64)
        .into_par_iter()
        .map(|p| wiener_sup(&weights, mc.seed, p))
        .collect();
    sups.sort_by(f64::total_cmp);
    let idx = ((1.0 - alpha) * sups.len() as f64).ceil() as usize;
    Ok(sups[idx.clamp(1, sups.len()) - 1])
}

/// Critical value for `η < 1/2`: tabulated when available, simulated otherwise.
pub fn critical_value_wiener(eta: f64, alpha: f64, mc: &WienerMc) -> Result<(f64, CriticalSource)> {
    if !(0.0..0.5).contains(&eta) {
        return Err(invalid(format!("eta = {eta} must lie in [0, 0.5) for the Wiener critical value")));
    }
    check_alpha(alpha)?;
    if let Some(c) = lookup(eta, alpha) {
        return Ok((c, CriticalSource::Lookup));
    }
    Ok((wiener_quantile_mc(eta, alpha, mc)?, CriticalSource::MonteCarlo))
}

/// Dispatches on η: closed form at `η = 1/2` (needs `m`), Wiener quantile below.
pub fn critical_value(eta: f64, alpha: f64, m: Option<usize>, mc: &WienerMc) -> Result<(f64, CriticalSource)> {
    check_eta(eta)?;
    check_alpha(alpha)?;
    if eta == 0.5 {
        let m = m.ok_or_else(|| invalid("eta = 0.5 requires the training length m"))?;
        Ok((critical_value_eta_half(m, alpha)?, CriticalSource::ClosedForm))
    } else {
        critical_value_wiener(eta, alpha, mc)
    }
}

/// Boundary parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub eta: f64,
    pub alpha: f64,
    pub critical_value: f64,
    pub m: usize,
}

impl ThresholdSpec {
    pub fn new(eta: f64, alpha: f64, critical_value: f64, m: usize) -> Result<Self> {
        check_eta(eta)?;
        check_alpha(alpha)?;
        if !(critical_value > 0.0) || !critical_value.is_finite() {
            return Err(invalid(format!("critical value {critical_value} must be positive")));
        }
        if m < 2 {
            return Err(invalid(format!("training length m = {m} must be at least 2")));
        }
        Ok(Self { eta, alpha, critical_value, m })
    }

    /// Builds the spec with its critical value resolved by [`critical_value`].
    pub fn resolve(eta: f64, alpha: f64, m: usize, mc: &WienerMc) -> Result<(Self, CriticalSource)> {
        let (c, source) = critical_value(eta, alpha, Some(m), mc)?;
        Ok((Self::new(eta, alpha, c, m)?, source))
    }

    /// `c · ν*(k; m)`.
    pub fn boundary(&self, k: usize) -> f64 {
        self.critical_value * nu_star(k, self.m, self.eta)
    }
}

/// Running detector sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    pub cumulative_sum: f64,
    pub k: usize,
    pub m: usize,
    next_t: usize,
}

impl DetectorState {
    /// Fresh detector whose first statistic must carry time stamp `first_t`.
    pub fn new(m: usize, first_t: usize) -> Self {
        Self { cumulative_sum: 0.0, k: 0, m, next_t: first_t }
    }

    pub fn value(&self) -> f64 {
        self.cumulative_sum.abs()
    }

    pub fn next_time(&self) -> usize {
        self.next_t
    }

    pub fn step(&mut self, gamma: &GammaStat) -> Result<f64> {
        if gamma.t != self.next_t {
            return Err(Error::OutOfOrder { expected: self.next_t, actual: gamma.t });
        }
        self.cumulative_sum += (gamma.value - 1.0) / std::f64::consts::SQRT_2;
        self.k += 1;
        self.next_t += 1;
        Ok(self.value())
    }
}

/// One monitored step of the detector path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub k: usize,
    pub t: usize,
    pub gamma: f64,
    pub d: f64,
    pub nu: f64,
    pub crossed: bool,
}

/// Outcome of one monitoring segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub stopped: bool,
    /// Stopping index, or the number of monitored steps when not stopped.
    pub k_hat: usize,
    /// Estimated break date in panel time (`origin + k̂ + m`) when stopped.
    pub tau_hat: Option<usize>,
    /// Panel time preceding the segment's first training observation.
    pub origin: usize,
    pub m: usize,
    pub r: usize,
    pub detector_at_stop: Option<f64>,
    pub threshold_at_stop: Option<f64>,
    /// Empty unless path recording was requested.
    pub path: Vec<PathPoint>,
}

impl Detection {
    /// Same decision, ignoring the recorded path.
    pub fn same_decision(&self, other: &Detection) -> bool {
        self.stopped == other.stopped
            && self.k_hat == other.k_hat
            && self.tau_hat == other.tau_hat
            && self.origin == other.origin
    }
}

/// Detector plus boundary, fed one statistic at a time.
#[derive(Debug, Clone)]
pub struct Detector {
    threshold: ThresholdSpec,
    state: DetectorState,
    origin: usize,
    record_path: bool,
    path: Vec<PathPoint>,
    stop: Option<(f64, f64)>,
}

impl Detector {
    /// Detector for the segment whose training starts after `origin`.
    pub fn new(threshold: ThresholdSpec, origin: usize, record_path: bool) -> Self {
        let m = threshold.m;
        Self {
            threshold,
            state: DetectorState::new(m, origin + m + 1),
            origin,
            record_path,
            path: Vec::new(),
            stop: None,
        }
    }

    pub fn threshold(&self) -> &ThresholdSpec {
        &self.threshold
    }

    pub fn state(&self) -> &DetectorState {
        &self.state
    }

    pub fn is_stopped(&self) -> bool {
        self.stop.is_some()
    }

    /// Feeds one statistic; returns `None` once the detector has stopped.
    pub fn observe(&mut self, gamma: &GammaStat) -> Result<Option<PathPoint>> {
        if self.stop.is_some() {
            return Ok(None);
        }
        let d = self.state.step(gamma)?;
        let nu = self.threshold.boundary(self.state.k);
        let crossed = d >= nu;
        let point = PathPoint { k: self.state.k, t: gamma.t, gamma: gamma.value, d, nu, crossed };
        if self.record_path {
            self.path.push(point);
        }
        if crossed {
            self.stop = Some((d, nu));
        }
        Ok(Some(point))
    }

    pub fn finish(self, r: usize) -> Detection {
        let m = self.threshold.m;
        Detection {
            stopped: self.stop.is_some(),
            k_hat: self.state.k,
            tau_hat: self.stop.map(|_| self.origin + self.state.k + m),
            origin: self.origin,
            m,
            r,
            detector_at_stop: self.stop.map(|s| s.0),
            threshold_at_stop: self.stop.map(|s| s.1),
            path: self.path,
        }
    }
}

/// Runs a detector over a precomputed statistic sequence.
pub fn run_detector<I>(gammas: I, threshold: ThresholdSpec, origin: usize, record_path: bool) -> Result<Detection>
where
    I: IntoIterator<Item = GammaStat>,
{
    let mut det = Detector::new(threshold, origin, record_path);
    for g in gammas {
        det.observe(&g)?;
        if det.is_stopped() {
            break;
        }
    }
    Ok(det.finish(0))
}

/// How the number of factors is chosen for each segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RPolicy {
    Fixed(usize),
    /// Eigenvalue-ratio estimate on the training window, searching `1..=k_max`.
    Auto { k_max: usize },
}

impl RPolicy {
    pub const DEFAULT_K_MAX: usize = 8;
}

impl FromStr for RPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(RPolicy::Auto { k_max: Self::DEFAULT_K_MAX });
        }
        s.parse::<usize>()
            .map(RPolicy::Fixed)
            .map_err(|_| invalid(format!("r must be a nonnegative integer or \"auto\", got {s:?}")))
    }
}

/// Which eigenvalue statistic drives the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Two randomisations of the (r+1)-th eigenvalue (new or changed factors).
    #[default]
    Break,
    /// One randomisation of the r-th eigenvalue (a factor disappearing).
    Vanishing,
}

/// Training, rolling spectrum and randomisation for one segment.
pub struct Pipeline {
    randomizer: Randomizer,
    n: usize,
    m: usize,
    mode: Mode,
    policy: RPolicy,
    r: Option<usize>,
    center: bool,
    origin: usize,
    seen: usize,
    training: Vec<DVector<f64>>,
    mean: Option<DVector<f64>>,
    cov: RollingCovariance,
    last_spectrum: Option<EigenSpectrum>,
}

impl Pipeline {
    pub fn new(
        n: usize,
        m: usize,
        policy: RPolicy,
        cfg: RandomizerConfig,
        mode: Mode,
        center: bool,
        origin: usize,
    ) -> Result<Self> {
        if m < 2 {
            return Err(invalid(format!("training length m = {m} must be at least 2")));
        }
        match policy {
            RPolicy::Fixed(r) if r >= n => {
                return Err(invalid(format!("r = {r} must be smaller than N = {n}")));
            }
            RPolicy::Fixed(0) if mode == Mode::Vanishing => {
                return Err(invalid("vanishing-factor monitoring needs r >= 1"));
            }
            RPolicy::Auto { k_max: 0 } => return Err(invalid("k_max must be at least 1")),
            _ => {}
        }
        let randomizer = Randomizer::new(cfg, n, m)?;
        let r = match policy {
            RPolicy::Fixed(r) => Some(r),
            RPolicy::Auto { .. } => None,
        };
        Ok(Self {
            randomizer,
            n,
            m,
            mode,
            policy,
            r,
            center,
            origin,
            seen: 0,
            training: Vec::new(),
            mean: None,
            cov: RollingCovariance::new(n, m)?,
            last_spectrum: None,
        })
    }

    pub fn r(&self) -> Option<usize> {
        self.r
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn is_training(&self) -> bool {
        self.seen < self.m
    }

    /// Panel time of the next observation.
    pub fn next_time(&self) -> usize {
        self.origin + self.seen + 1
    }

    /// Spectrum behind the most recent statistic.
    pub fn last_spectrum(&self) -> Option<&EigenSpectrum> {
        self.last_spectrum.as_ref()
    }

    /// Training-window mean (zero vector when centering is off).
    pub fn mean(&self) -> Option<&DVector<f64>> {
        self.mean.as_ref()
    }

    fn finish_training(&mut self) -> Result<()> {
        let mut mean = DVector::zeros(self.n);
        if self.center {
            for x in &self.training {
                mean += x;
            }
            mean /= self.m as f64;
        }
        for x in std::mem::take(&mut self.training) {
            let centered = x - &mean;
            self.cov.push(centered.as_view())?;
        }
        self.mean = Some(mean);
        if let RPolicy::Auto { k_max } = self.policy {
            let cov = self.cov.current().ok_or(Error::WindowNotFull { have: 0, need: self.m })?;
            let spectrum = eigen_symmetric(cov)?;
            let k_max = k_max.min(self.n - 1);
            self.r = Some(estimate_num_factors(&spectrum, k_max)?);
        }
        Ok(())
    }

    /// Consumes the next observation; statistics are produced only once the
    /// training window is full.
    pub fn push(&mut self, x: DVectorView<'_, f64>) -> Result<Option<StepStatistics>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: x.len() });
        }
        let t = self.next_time();
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { series: i + 1, time: t });
        }
        self.seen += 1;
        if self.seen <= self.m {
            self.training.push(x.into_owned());
            if self.seen == self.m {
                self.finish_training()?;
            }
            return Ok(None);
        }
        let mean = self.mean.as_ref().expect("training finished");
        let centered = x - mean;
        let cov = self.cov.push(centered.as_view())?.expect("window is full after training");
        let mut spectrum = eigen_symmetric(cov)?;
        spectrum.t = t;
        let r = self.r.expect("r fixed after training");
        let stats = match self.mode {
            Mode::Break => self.randomizer.double(&spectrum, r, t)?,
            Mode::Vanishing => self.randomizer.single(&spectrum, r, t)?,
        };
        self.last_spectrum = Some(spectrum);
        Ok(Some(stats))
    }
}

/// Everything needed to run a monitoring session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub m: usize,
    pub r_policy: RPolicy,
    pub threshold: ThresholdSpec,
    pub randomizer: RandomizerConfig,
    pub mode: Mode,
    /// Subtract each segment's training mean.
    pub center: bool,
    /// Start a new segment after each detection.
    pub restart: bool,
    pub record_path: bool,
}

impl SessionConfig {
    pub fn new(m: usize, r_policy: RPolicy, threshold: ThresholdSpec, randomizer: RandomizerConfig) -> Self {
        Self {
            m,
            r_policy,
            threshold,
            randomizer,
            mode: Mode::Break,
            center: true,
            restart: false,
            record_path: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.threshold.m != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, actual: self.threshold.m });
        }
        self.randomizer.validate()
    }
}

/// Per-observation output of a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub segment: usize,
    pub r: usize,
    pub stats: StepStatistics,
    pub point: PathPoint,
}

/// Result of a finished session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    /// Segments that ended with a boundary crossing, in time order.
    pub detections: Vec<Detection>,
    /// The last segment if it was still monitoring when the data ended.
    pub open_segment: Option<Detection>,
}

/// Online monitor over a stream of observations, with optional restarts.
pub struct MonitorSession {
    config: SessionConfig,
    n: usize,
    pipeline: Pipeline,
    detector: Detector,
    segment: usize,
    detections: Vec<Detection>,
    halted: bool,
    last_spectrum: Option<EigenSpectrum>,
}

impl MonitorSession {
    pub fn new(n: usize, config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let pipeline = Self::pipeline(n, &config, 0)?;
        let detector = Detector::new(config.threshold, 0, config.record_path);
        Ok(Self {
            config,
            n,
            pipeline,
            detector,
            segment: 0,
            detections: Vec::new(),
            halted: false,
            last_spectrum: None,
        })
    }

    fn pipeline(n: usize, config: &SessionConfig, origin: usize) -> Result<Pipeline> {
        Pipeline::new(
            n,
            config.m,
            config.r_policy,
            config.randomizer.clone(),
            config.mode,
            config.center,
            origin,
        )
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Panel time of the next observation.
    pub fn next_time(&self) -> usize {
        self.pipeline.next_time()
    }

    /// Origin of the current segment.
    pub fn segment_start(&self) -> usize {
        self.pipeline.origin()
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    /// Spectrum behind the most recent event.
    pub fn last_spectrum(&self) -> Option<&EigenSpectrum> {
        self.last_spectrum.as_ref()
    }

    /// True once no further observation can change the outcome.
    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn push(&mut self, x: DVectorView<'_, f64>) -> Result<Option<SessionEvent>> {
        if self.halted {
            return Ok(None);
        }
        let Some(stats) = self.pipeline.push(x)? else {
            return Ok(None);
        };
        self.last_spectrum = self.pipeline.last_spectrum().cloned();
        let gamma = GammaStat { value: stats.gamma, psi: stats.psi, t: stats.t };
        let point = self.detector.observe(&gamma)?.expect("detector is live");
        let r = self.pipeline.r().expect("r known after training");
        let event = SessionEvent { segment: self.segment, r, stats, point };
        if point.crossed {
            let origin = point.t;
            let fresh = Detector::new(self.config.threshold, origin, self.config.record_path);
            let done = std::mem::replace(&mut self.detector, fresh);
            self.detections.push(done.finish(r));
            if self.config.restart {
                self.pipeline = Self::pipeline(self.n, &self.config, origin)?;
                self.segment += 1;
            } else {
                self.halted = true;
            }
        }
        Ok(Some(event))
    }

    pub fn finish(self) -> SessionOutcome {
        let open_segment = if self.halted || self.pipeline.is_training() {
            None
        } else {
            Some(self.detector.finish(self.pipeline.r().unwrap_or(0)))
        };
        SessionOutcome { detections: self.detections, open_segment }
    }
}

fn feed_panel(panel: &Panel, config: SessionConfig) -> Result<SessionOutcome> {
    let mut session = MonitorSession::new(panel.n_series(), config)?;
    for t in 0..panel.n_periods() {
        session.push(panel.observation(t))?;
        if session.is_halted() {
            break;
        }
    }
    Ok(session.finish())
}

fn single_segment(panel: &Panel, config: SessionConfig) -> Result<Detection> {
    let m = config.m;
    if panel.n_periods() < m + 1 {
        return Err(invalid(format!(
            "panel has {} periods; monitoring needs at least m + 1 = {}",
            panel.n_periods(),
            m + 1
        )));
    }
    let outcome = feed_panel(panel, SessionConfig { restart: false, ..config })?;
    Ok(outcome
        .detections
        .into_iter()
        .next()
        .or(outcome.open_segment)
        .expect("at least one monitored step"))
}

/// Monitors `panel` once from `t = m + 1`, stopping at the first crossing.
pub fn run_online(
    panel: &Panel,
    m: usize,
    r: usize,
    threshold: ThresholdSpec,
    cfg: &RandomizerConfig,
) -> Result<Detection> {
    single_segment(panel, SessionConfig::new(m, RPolicy::Fixed(r), threshold, cfg.clone()))
}

/// As [`run_online`] but driven by the r-th eigenvalue with one randomisation.
pub fn monitor_vanishing(
    panel: &Panel,
    m: usize,
    r: usize,
    threshold: ThresholdSpec,
    cfg: &RandomizerConfig,
) -> Result<Detection> {
    if r == 0 {
        return Err(invalid("vanishing-factor monitoring needs r >= 1"));
    }
    let config = SessionConfig {
        mode: Mode::Vanishing,
        ..SessionConfig::new(m, RPolicy::Fixed(r), threshold, cfg.clone())
    };
    single_segment(panel, config)
}

/// Monitors with restarts after each detection; returns the detections only.
pub fn run_with_restarts(
    panel: &Panel,
    m: usize,
    policy: RPolicy,
    threshold: ThresholdSpec,
    cfg: &RandomizerConfig,
) -> Result<Vec<Detection>> {
    if panel.n_periods() <= 2 * m {
        return Err(invalid(format!(
            "restart monitoring needs T > 2m, got T = {} and m = {m}",
            panel.n_periods()
        )));
    }
    let config = SessionConfig { restart: true, ..SessionConfig::new(m, policy, threshold, cfg.clone()) };
    Ok(feed_panel(panel, config)?.detections)
}

/// Writes `k,t,d,nu,crossed` rows.
pub struct PathWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> PathWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(["k", "t", "d", "nu", "crossed"])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, p: &PathPoint) -> Result<()> {
        self.inner.write_record(&[
            p.k.to_string(),
            p.t.to_string(),
            format!("{:?}", p.d),
            format!("{:?}", p.nu),
            p.crossed.to_string(),
        ])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
