//! Synthetic factor panels and the Monte Carlo replication harness.
//!
//! Panels follow `X_it = a_i′ f_t + u_it` with VAR(1) factors and
//! idiosyncratic terms `u = D ε G`, where `D` and `G` are Toeplitz matrices
//! with geometric decay across series and time. The common component is
//! rescaled row by row so that `Var(X_i) / Var(u_i)` equals the target
//! signal-to-noise ratio, using population variances.

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::monitor::{Detection, Detector, Mode, Pipeline, RPolicy, ThresholdSpec, WienerMc};
use crate::panel::Panel;
use crate::randomize::{GammaStat, RandomizerConfig};
use crate::rng::{derive_seed, keyed_stream};

/// Steps discarded before recording any autoregressive process.
pub const BURN_IN: usize = 100;

/// Data-generating scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Null,
    BreakLoadings,
    NewFactor,
    WeakBreak,
    IdioVarBreak,
    VanishingFactor,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Null,
        Scenario::BreakLoadings,
        Scenario::NewFactor,
        Scenario::WeakBreak,
        Scenario::IdioVarBreak,
        Scenario::VanishingFactor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Null => "null",
            Scenario::BreakLoadings => "break_loadings",
            Scenario::NewFactor => "new_factor",
            Scenario::WeakBreak => "weak_break",
            Scenario::IdioVarBreak => "idio_var_break",
            Scenario::VanishingFactor => "vanishing_factor",
        }
    }

    pub fn has_break(self) -> bool {
        self != Scenario::Null
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::ALL.iter().map(|s| s.as_str()).collect();
                invalid(format!("unknown scenario {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Panel design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    #[serde(alias = "N")]
    pub n: usize,
    #[serde(alias = "T")]
    pub t: usize,
    pub m: usize,
    pub r: usize,
    pub scenario: Scenario,
    /// First period (1-based) of the post-break regime.
    pub tau: usize,
    pub var_coef_radius: f64,
    pub ar_coef_new_factor: f64,
    pub idio_cross_decay: f64,
    pub idio_time_decay: f64,
    pub snr: f64,
    pub kappa: f64,
    pub seed: u64,
}

impl Default for DgpSpec {
    fn default() -> Self {
        Self {
            n: 100,
            t: 1000,
            m: 100,
            r: 1,
            scenario: Scenario::Null,
            tau: 500,
            var_coef_radius: 0.7,
            ar_coef_new_factor: 0.7,
            idio_cross_decay: 0.3,
            idio_time_decay: 0.5,
            snr: 2.0,
            kappa: 0.5,
            seed: 0,
        }
    }
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.t < 2 {
            return Err(invalid(format!("panel must be at least 2 x 2, got N = {}, T = {}", self.n, self.t)));
        }
        if self.r == 0 {
            return Err(invalid("r must be at least 1"));
        }
        if self.m == 0 || self.m >= self.t {
            return Err(invalid(format!("m = {} must lie in 1..T = {}", self.m, self.t)));
        }
        if self.scenario.has_break() && !(self.m < self.tau && self.tau < self.t) {
            return Err(invalid(format!(
                "break time tau = {} must satisfy m < tau < T (m = {}, T = {})",
                self.tau, self.m, self.t
            )));
        }
        if !(self.snr > 1.0) || !self.snr.is_finite() {
            return Err(invalid(format!("snr = {} must exceed 1", self.snr)));
        }
        for (name, v) in [
            ("var_coef_radius", self.var_coef_radius),
            ("ar_coef_new_factor", self.ar_coef_new_factor),
            ("idio_cross_decay", self.idio_cross_decay),
            ("idio_time_decay", self.idio_time_decay),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(invalid(format!("{name} = {v} must lie in [0, 1)")));
            }
        }
        if self.scenario == Scenario::WeakBreak && !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(invalid(format!("kappa = {} must lie in (0, 1]", self.kappa)));
        }
        Ok(())
    }

    pub fn planted_tau(&self) -> Option<usize> {
        self.scenario.has_break().then_some(self.tau)
    }
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(h: &DMatrix<f64>) -> f64 {
    h.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Gaussian `r × r` matrix rescaled to spectral radius `radius`.
pub fn gen_var_matrix<R: Rng + ?Sized>(r: usize, radius: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    if r == 0 {
        return Err(invalid("r must be at least 1"));
    }
    if !(0.0..1.0).contains(&radius) {
        return Err(invalid(format!("VAR spectral radius {radius} must lie in [0, 1) for stationarity")));
    }
    let h = normal_matrix(rng, r, r);
    if radius == 0.0 {
        return Ok(DMatrix::zeros(r, r));
    }
    let rho = spectral_radius(&h);
    if !(rho > 0.0) {
        return Err(Error::DegenerateSpectrum);
    }
    Ok(h * (radius / rho))
}

/// VAR(1) path `f_t = H f_{t−1} + e_t` after a burn-in from zero; `r × T`.
pub fn simulate_var<R: Rng + ?Sized>(h: &DMatrix<f64>, t: usize, rng: &mut R) -> DMatrix<f64> {
    let r = h.nrows();
    let mut f = DVector::zeros(r);
    let mut out = DMatrix::zeros(r, t);
    for step in 0..BURN_IN + t {
        let e: DVector<f64> = DVector::from_fn(r, |_, _| rng.sample(StandardNormal));
        f = h * f + e;
        if step >= BURN_IN {
            out.set_column(step - BURN_IN, &f);
        }
    }
    out
}

/// VAR(1) factors with a freshly drawn transition matrix of the given radius.
pub fn gen_factors<R: Rng + ?Sized>(r: usize, t: usize, radius: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let h = gen_var_matrix(r, radius, rng)?;
    Ok(simulate_var(&h, t, rng))
}

/// Stationary covariance of `f_t = H f_{t−1} + e_t` with unit innovations.
pub fn var_stationary_covariance(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = h.nrows();
    let id = DMatrix::<f64>::identity(r, r);
    let mut sigma = id.clone();
    for _ in 0..100_000 {
        let next = h * &sigma * h.transpose() + &id;
        let change = (&next - &sigma).amax();
        sigma = next;
        if change <= 1e-14 * sigma.amax() {
            return Ok(sigma);
        }
    }
    Err(invalid("VAR covariance iteration did not converge"))
}

/// Applies the symmetric Toeplitz matrix `ρ^{|i−j|}` along a strided
/// sequence in O(n): the result is the forward plus the backward
/// geometric filter minus the input.
fn toeplitz_filter(x: &mut [f64], rho: f64) {
    if rho == 0.0 || x.len() < 2 {
        return;
    }
    let n = x.len();
    let mut fwd = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc = x[i] + rho * acc;
        fwd[i] = acc;
    }
    acc = 0.0;
    for i in (0..n).rev() {
        acc = x[i] + rho * acc;
        let orig = x[i];
        x[i] = fwd[i] + acc - orig;
    }
}

/// Dense symmetric Toeplitz matrix with `(i, j)` entry `rho^{|i−j|}`.
pub fn toeplitz_dense(n: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// `D ε G` for the given noise matrix.
pub fn toeplitz_sandwich(eps: &DMatrix<f64>, cross_decay: f64, time_decay: f64) -> DMatrix<f64> {
    let mut u = eps.clone();
    // D ε: filter each column across series.
    for mut col in u.column_iter_mut() {
        toeplitz_filter(col.as_mut_slice(), cross_decay);
    }
    // (D ε) G: filter each row across time.
    let mut row = vec![0.0; u.ncols()];
    for i in 0..u.nrows() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = u[(i, j)];
        }
        toeplitz_filter(&mut row, time_decay);
        for (j, v) in row.iter().enumerate() {
            u[(i, j)] = *v;
        }
    }
    u
}

/// Idiosyncratic panel `D ε G`; `N × T`.
pub fn gen_idio<R: Rng + ?Sized>(
    n: usize,
    t: usize,
    cross_decay: f64,
    time_decay: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    for (name, v) in [("cross_decay", cross_decay), ("time_decay", time_decay)] {
        if !(0.0..1.0).contains(&v) {
            return Err(invalid(format!("{name} = {v} must lie in [0, 1)")));
        }
    }
    let eps = normal_matrix(rng, n, t);
    Ok(toeplitz_sandwich(&eps, cross_decay, time_decay))
}

/// Population variance of each row of `D ε G`, averaged over time.
pub fn idio_row_variance(n: usize, t: usize, cross_decay: f64, time_decay: f64) -> Vec<f64> {
    // Σ_t Σ_s ρ^{2|s−t|} / T via the lag counts.
    let q = time_decay * time_decay;
    let mut time_sum = t as f64;
    let mut p = 1.0;
    for lag in 1..t {
        p *= q;
        if p == 0.0 {
            break;
        }
        time_sum += 2.0 * (t - lag) as f64 * p;
    }
    let time_factor = time_sum / t as f64;
    let c = cross_decay * cross_decay;
    (0..n)
        .map(|i| {
            let row: f64 = (0..n).map(|j| c.powi(i.abs_diff(j) as i32)).sum();
            row * time_factor
        })
        .collect()
}

/// Row scales making `a_i′ Σ_F a_i · s_i² = (snr − 1) Var(u_i)`.
fn calibrate(loadings: &DMatrix<f64>, sigma_f: &DMatrix<f64>, var_u: &[f64], snr: f64) -> DVector<f64> {
    DVector::from_fn(loadings.nrows(), |i, _| {
        let a = loadings.row(i).transpose();
        let v = (a.transpose() * sigma_f * &a)[(0, 0)];
        if v > 0.0 {
            ((snr - 1.0) * var_u[i] / v).sqrt()
        } else {
            0.0
        }
    })
}

fn scale_rows(mut a: DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row *= s[i];
    }
    a
}

/// What was planted in a generated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub scenario: Scenario,
    pub tau: Option<usize>,
    pub seed: u64,
    pub r: usize,
    /// SHA-256 of the pre-break scaled loadings (row-major little-endian f64).
    pub loadings_digest: String,
}

/// Generated panel with its ground truth and the pieces it was built from.
#[derive(Debug, Clone)]
pub struct GeneratedPanel {
    pub panel: Panel,
    pub truth: PlantedTruth,
    pub common: DMatrix<f64>,
    pub idio: DMatrix<f64>,
    /// Scaled pre-break loadings, `N × r`.
    pub loadings: DMatrix<f64>,
    pub var_matrix: DMatrix<f64>,
}

fn digest(m: &DMatrix<f64>) -> String {
    let mut hasher = Sha256::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            hasher.update(m[(i, j)].to_le_bytes());
        }
    }
    hasher.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

mod stream {
    pub const FACTORS: u64 = 1;
    pub const IDIO: u64 = 2;
    pub const LOADINGS: u64 = 3;
    pub const POST_LOADINGS: u64 = 4;
    pub const NEW_FACTOR: u64 = 5;
    pub const IDIO_SCALES: u64 = 6;
}

/// Draws a panel according to `spec`.
pub fn gen_panel(spec: &DgpSpec) -> Result<GeneratedPanel> {
    spec.validate()?;
    let (n, t, r) = (spec.n, spec.t, spec.r);
    let rng = |key: u64| -> ChaCha8Rng { keyed_stream(spec.seed, key) };

    let mut frng = rng(stream::FACTORS);
    let h = gen_var_matrix(r, spec.var_coef_radius, &mut frng)?;
    let factors = simulate_var(&h, t, &mut frng);
    let sigma_f = var_stationary_covariance(&h)?;

    let mut idio = gen_idio(n, t, spec.idio_cross_decay, spec.idio_time_decay, &mut rng(stream::IDIO))?;
    let var_u = idio_row_variance(n, t, spec.idio_cross_decay, spec.idio_time_decay);

    let raw = normal_matrix(&mut rng(stream::LOADINGS), n, r);
    let scales = calibrate(&raw, &sigma_f, &var_u, spec.snr);
    let loadings = scale_rows(raw, &scales);
    let mut common = &loadings * &factors;

    let start = spec.tau.saturating_sub(1);
    match spec.scenario {
        Scenario::Null => {}
        Scenario::BreakLoadings => {
            let fresh = normal_matrix(&mut rng(stream::POST_LOADINGS), n, r);
            let s = calibrate(&fresh, &sigma_f, &var_u, spec.snr);
            let post = scale_rows(fresh, &s);
            for j in start..t {
                common.set_column(j, &(&post * factors.column(j)));
            }
        }
        Scenario::NewFactor | Scenario::WeakBreak => {
            let mut g_rng = rng(stream::NEW_FACTOR);
            let g = simulate_var(&DMatrix::from_element(1, 1, spec.ar_coef_new_factor), t, &mut g_rng);
            let mut b: DVector<f64> = DVector::from_fn(n, |_, _| g_rng.sample(StandardNormal));
            if spec.scenario == Scenario::WeakBreak {
                let keep = ((n as f64).powf(spec.kappa).ceil() as usize).min(n);
                let mut sparse = DVector::zeros(n);
                for i in sample(&mut g_rng, n, keep).iter() {
                    sparse[i] = b[i];
                }
                b = sparse;
            }
            for j in start..t {
                let mut col = common.column_mut(j);
                col.axpy(g[(0, j)], &b, 1.0);
            }
        }
        Scenario::IdioVarBreak => {
            let mut s_rng = rng(stream::IDIO_SCALES);
            for i in 0..n {
                let s: f64 = s_rng.random_range(1.0..=2.0);
                for j in start..t {
                    idio[(i, j)] *= s;
                }
            }
        }
        Scenario::VanishingFactor => {
            let mut post = loadings.clone();
            post.column_mut(r - 1).fill(0.0);
            for j in start..t {
                common.set_column(j, &(&post * factors.column(j)));
            }
        }
    }

    let panel = Panel::new(&common + &idio)?;
    let truth = PlantedTruth {
        scenario: spec.scenario,
        tau: spec.planted_tau(),
        seed: spec.seed,
        r,
        loadings_digest: digest(&loadings),
    };
    Ok(GeneratedPanel { panel, truth, common, idio, loadings, var_matrix: h })
}

/// Harness configuration: a grid of `(m, r)` cells, each evaluated for every
/// `(η, α)` pair on the same replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub replications: usize,
    /// Template design; `m`, `r` and `seed` are overridden per cell and replication.
    pub dgp: DgpSpec,
    pub m_values: Vec<usize>,
    pub r_values: Vec<usize>,
    pub etas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub base_seed: u64,
    pub mode: Mode,
    /// Settings for simulated critical values; `None` uses the defaults.
    pub wiener: Option<WienerMc>,
    /// Rayon worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(dgp: DgpSpec, replications: usize) -> Self {
        Self {
            replications,
            m_values: vec![dgp.m],
            r_values: vec![dgp.r],
            dgp,
            etas: vec![0.45],
            alphas: vec![0.05],
            base_seed: 0,
            mode: Mode::Break,
            wiener: None,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        for (name, empty) in [
            ("m_values", self.m_values.is_empty()),
            ("r_values", self.r_values.is_empty()),
            ("etas", self.etas.is_empty()),
            ("alphas", self.alphas.is_empty()),
        ] {
            if empty {
                return Err(invalid(format!("{name} must not be empty")));
            }
        }
        if self.workers == Some(0) {
            return Err(invalid("workers must be at least 1"));
        }
        for &m in &self.m_values {
            for &r in &self.r_values {
                DgpSpec { m, r, ..self.dgp.clone() }.validate()?;
                if r >= self.dgp.n {
                    return Err(invalid(format!("r = {r} must be smaller than N = {}", self.dgp.n)));
                }
            }
        }
        Ok(())
    }
}

/// Five-number summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data (`(n−1)p` rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Quantiles {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            p25: quantile_sorted(&v, 0.25),
            p50: quantile_sorted(&v, 0.5),
            p75: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// One replication's decision for one `(m, r, η, α)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub m: usize,
    pub r: usize,
    pub eta: f64,
    pub alpha: f64,
    pub stopped: bool,
    pub tau_hat: Option<usize>,
}

/// Aggregates for one `(m, r, η, α)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scenario: Scenario,
    pub m: usize,
    pub r: usize,
    pub eta: f64,
    pub alpha: f64,
    pub critical_value: f64,
    pub replications: usize,
    /// Share of replications stopping in `[τ, τ + m)`; absent without a break.
    pub detect_fraction_in_window: Option<f64>,
    /// Share of replications stopping anywhere in `[m + 1, T]`.
    pub detect_fraction_total: f64,
    /// Quantiles of `τ̂` over detections at or after `τ`.
    pub location_quantiles: Option<Quantiles>,
    pub records: Vec<RepRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub cells: Vec<CellResult>,
}

/// Runs one replication of one `(m, r)` cell for every threshold.
pub fn run_replication(
    dgp: &DgpSpec,
    thresholds: &[ThresholdSpec],
    mode: Mode,
    seed: u64,
) -> Result<Vec<Detection>> {
    let spec = DgpSpec { seed, ..dgp.clone() };
    let panel = gen_panel(&spec)?.panel;
    monitor_many(&panel, spec.m, spec.r, thresholds, mode, &RandomizerConfig::for_dimension(spec.n, seed))
}

/// One pass of the pipeline feeding several detectors; each result equals
/// the single-threshold monitor run on the same panel and seed.
pub fn monitor_many(
    panel: &Panel,
    m: usize,
    r: usize,
    thresholds: &[ThresholdSpec],
    mode: Mode,
    cfg: &RandomizerConfig,
) -> Result<Vec<Detection>> {
    if panel.n_periods() < m + 1 {
        return Err(invalid(format!("panel has {} periods; need at least m + 1 = {}", panel.n_periods(), m + 1)));
    }
    let mut pipeline = Pipeline::new(panel.n_series(), m, RPolicy::Fixed(r), cfg.clone(), mode, true, 0)?;
    let mut detectors: Vec<Detector> = thresholds.iter().map(|th| Detector::new(*th, 0, false)).collect();
    for t in 0..panel.n_periods() {
        if let Some(stats) = pipeline.push(panel.observation(t))? {
            let g = GammaStat { value: stats.gamma, psi: stats.psi, t: stats.t };
            for det in detectors.iter_mut() {
                det.observe(&g)?;
            }
            if detectors.iter().all(Detector::is_stopped) {
                break;
            }
        }
    }
    Ok(detectors.into_iter().map(|d| d.finish(r)).collect())
}

fn summarize(
    dgp: &DgpSpec,
    th: &ThresholdSpec,
    r: usize,
    outcomes: &[(usize, u64, Detection)],
) -> CellResult {
    let reps = outcomes.len() as f64;
    let stopped = outcomes.iter().filter(|o| o.2.stopped).count() as f64;
    let tau = dgp.planted_tau();
    let in_window = tau.map(|tau| {
        outcomes
            .iter()
            .filter(|o| matches!(o.2.tau_hat, Some(h) if h >= tau && h < tau + th.m))
            .count() as f64
            / reps
    });
    let located: Vec<f64> = match tau {
        Some(tau) => outcomes
            .iter()
            .filter_map(|o| o.2.tau_hat)
            .filter(|&h| h >= tau && h <= dgp.t)
            .map(|h| h as f64)
            .collect(),
        None => Vec::new(),
    };
    CellResult {
        scenario: dgp.scenario,
        m: th.m,
        r,
        eta: th.eta,
        alpha: th.alpha,
        critical_value: th.critical_value,
        replications: outcomes.len(),
        detect_fraction_in_window: in_window,
        detect_fraction_total: stopped / reps,
        location_quantiles: Quantiles::from_values(&located),
        records: outcomes
            .iter()
            .map(|(rep, seed, d)| RepRecord {
                rep: *rep,
                seed: *seed,
                m: th.m,
                r,
                eta: th.eta,
                alpha: th.alpha,
                stopped: d.stopped,
                tau_hat: d.tau_hat,
            })
            .collect(),
    }
}

fn run_cells(mc: &McConfig) -> Result<McResult> {
    let wiener = mc.wiener.unwrap_or_default();
    let mut cells = Vec::new();
    for &m in &mc.m_values {
        let mut thresholds = Vec::new();
        for &eta in &mc.etas {
            for &alpha in &mc.alphas {
                thresholds.push(ThresholdSpec::resolve(eta, alpha, m, &wiener)?.0);
            }
        }
        for &r in &mc.r_values {
            let dgp = DgpSpec { m, r, ..mc.dgp.clone() };
            let per_rep: Vec<Vec<Detection>> = (0..mc.replications)
                .into_par_iter()
                .map(|rep| {
                    let seed = derive_seed(mc.base_seed, rep as u64);
                    run_replication(&dgp, &thresholds, mc.mode, seed).map_err(|e| Error::Replication {
                        rep,
                        seed,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<_>>()?;
            for (i, th) in thresholds.iter().enumerate() {
                let outcomes: Vec<_> = per_rep
                    .iter()
                    .enumerate()
                    .map(|(rep, dets)| (rep, derive_seed(mc.base_seed, rep as u64), dets[i].clone()))
                    .collect();
                cells.push(summarize(&dgp, th, r, &outcomes));
            }
        }
    }
    Ok(McResult { cells })
}

/// Runs every cell of the grid. Results do not depend on the worker count.
pub fn run_table(mc: &McConfig) -> Result<McResult> {
    mc.validate()?;
    match mc.workers {
        None => run_cells(mc),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?
            .install(|| run_cells(mc)),
    }
}

/// Output format of [`emit_tables`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(invalid(format!("unknown table format {other:?}; expected csv or markdown"))),
        }
    }
}

const STAT_COLUMNS: [&str; 7] = ["in_window", "total", "min", "p25", "p50", "p75", "max"];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Rows of the `(m, r)` grid with one column group per `(η, α)` pair.
pub fn table_rows(result: &McResult) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    if result.cells.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut combos: Vec<(f64, f64)> = Vec::new();
    let mut keys: Vec<(Scenario, usize, usize)> = Vec::new();
    for c in &result.cells {
        if !combos.contains(&(c.eta, c.alpha)) {
            combos.push((c.eta, c.alpha));
        }
        if !keys.contains(&(c.scenario, c.m, c.r)) {
            keys.push((c.scenario, c.m, c.r));
        }
    }
    let mut header = vec!["scenario".to_string(), "m".to_string(), "r".to_string()];
    for (eta, alpha) in &combos {
        for col in STAT_COLUMNS {
            header.push(format!("eta{eta}_alpha{alpha}_{col}"));
        }
    }
    let mut rows = Vec::new();
    for (scenario, m, r) in keys {
        let mut row = vec![scenario.as_str().to_string(), m.to_string(), r.to_string()];
        for &(eta, alpha) in &combos {
            let cell = result
                .cells
                .iter()
                .find(|c| c.scenario == scenario && c.m == m && c.r == r && c.eta == eta && c.alpha == alpha);
            match cell {
                Some(c) => {
                    let q = c.location_quantiles;
                    row.push(fmt_opt(c.detect_fraction_in_window));
                    row.push(format!("{}", c.detect_fraction_total));
                    row.push(fmt_opt(q.map(|q| q.min)));
                    row.push(fmt_opt(q.map(|q| q.p25)));
                    row.push(fmt_opt(q.map(|q| q.p50)));
                    row.push(fmt_opt(q.map(|q| q.p75)));
                    row.push(fmt_opt(q.map(|q| q.max)));
                }
                None => row.extend(std::iter::repeat_n(String::new(), STAT_COLUMNS.len())),
            }
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Writes the result grid as CSV or a markdown pipe table.
pub fn emit_tables<W: Write>(result: &McResult, format: TableFormat, mut writer: W) -> Result<()> {
    let (header, rows) = table_rows(result)?;
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(&header)?;
            for row in &rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        TableFormat::Markdown => {
            writeln!(writer, "| {} |", header.join(" | "))?;
            writeln!(writer, "|{}", "---|".repeat(header.len()))?;
            for row in &rows {
                writeln!(writer, "| {} |", row.join(" | "))?;
            }
        }
    }
    Ok(())
}

/// One JSON object per replication and cell.
pub fn write_replication_log<W: Write>(result: &McResult, mut writer: W) -> Result<()> {
    for cell in &result.cells {
        for rec in &cell.records {
            let line = serde_json::to_string(rec).map_err(|e| invalid(e.to_string()))?;
            writeln!(writer, "{line}")?;
        }
    }
    Ok(())
}
