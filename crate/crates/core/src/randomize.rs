//! Two-stage randomisation of the (r+1)-th eigenvalue.
//!
//! At each monitored time `t` the scale-free statistic
//! `φ = g(N^{-δ} λ_{r+1} / mean(λ))` is compared against `R` artificial
//! draws `ξ_j ~ G_φ` through the indicators `1{ξ_j ≤ u/φ}`; the squared,
//! standardised indicator sums integrated over `F_φ` give `Θ_t`. When `φ`
//! diverges the indicators are fair coins and `Θ_t` is approximately `χ²₁`;
//! when `φ` vanishes they are deterministic and `Θ_t / R` tends to a
//! constant. The second stage repeats the construction on
//! `ψ = h(Θ_t / l̃(N, m, R))` with `W` draws, flipping the roles so that the
//! resulting `Γ_t` is approximately `χ²₁` when there is no break.
//!
//! Draws for time `t` come from a stream keyed by `(seed, t, stage)`, so the
//! sequence `{Γ_t}` is independent across `t` and reproducible.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::eigen::EigenSpectrum;
use crate::error::{invalid, Error, Result};
use crate::rng::{time_stream, Stage};

/// Monotone map applied to a statistic before randomisation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Identity,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
        }
    }
}

/// Finite discrete distribution for the integration variable `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    points: Vec<(f64, f64)>,
}

impl Support {
    /// `points` are `(u, mass)` pairs; masses must be positive and sum to one.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("support must contain at least one point"));
        }
        if points.iter().any(|&(u, p)| !u.is_finite() || !(p > 0.0)) {
            return Err(invalid("support points must be finite with positive mass"));
        }
        let total: f64 = points.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("support masses sum to {total}, not 1")));
        }
        Ok(Self { points })
    }

    /// Equal mass at `±u`.
    pub fn symmetric_pair(u: f64) -> Self {
        Self { points: vec![(u, 0.5), (-u, 0.5)] }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

impl Default for Support {
    fn default() -> Self {
        Self::symmetric_pair(std::f64::consts::SQRT_2)
    }
}

/// Parameters of both randomisation stages.
///
/// `G_φ` and `G_ψ` are normal with unit variance, located so that their CDF
/// at zero equals `g0_phi` / `g0_psi`; the defaults are standard normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizerConfig {
    /// Added to the lower bound on δ.
    pub delta_slack: f64,
    /// Exponent offset ε in the log normaliser `l̃`.
    pub epsilon_log: f64,
    /// First-stage draws per time step (R).
    pub r_draws: usize,
    /// Second-stage draws per time step (W).
    pub w_draws: usize,
    pub g_transform: Transform,
    pub h_transform: Transform,
    pub support_phi: Support,
    pub support_psi: Support,
    pub g0_phi: f64,
    pub g0_psi: f64,
    pub seed: u64,
}

impl RandomizerConfig {
    /// Defaults for an `n`-series panel: `R = W = N`.
    pub fn for_dimension(n: usize, seed: u64) -> Self {
        Self {
            delta_slack: 0.05,
            epsilon_log: 0.01,
            r_draws: n,
            w_draws: n,
            g_transform: Transform::Identity,
            h_transform: Transform::Identity,
            support_phi: Support::default(),
            support_psi: Support::default(),
            g0_phi: 0.5,
            g0_psi: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_slack > 0.0 && self.delta_slack < 0.5) {
            return Err(invalid(format!("delta_slack = {} outside (0, 0.5)", self.delta_slack)));
        }
        if !(self.epsilon_log > 0.0) || !self.epsilon_log.is_finite() {
            return Err(invalid(format!("epsilon_log = {} must be positive", self.epsilon_log)));
        }
        if self.r_draws == 0 || self.w_draws == 0 {
            return Err(invalid("R and W must be positive"));
        }
        for g0 in [self.g0_phi, self.g0_psi] {
            if !(g0 > 0.0 && g0 < 1.0) {
                return Err(invalid(format!("G(0) = {g0} must lie strictly inside (0, 1)")));
            }
        }
        Support::new(self.support_phi.points.clone())?;
        Support::new(self.support_psi.points.clone())?;
        Ok(())
    }

    /// Largest value Θ can take.
    pub fn theta_bound(&self) -> f64 {
        self.r_draws as f64 / (self.g0_phi * (1.0 - self.g0_phi))
    }

    /// Largest value Γ can take.
    pub fn gamma_bound(&self) -> f64 {
        self.w_draws as f64 / (self.g0_psi * (1.0 - self.g0_psi))
    }
}

/// δ just above its admissible lower bound for the given `N` and `m`,
/// capped at 0.999.
pub fn compute_delta(n: usize, m: usize, slack: f64) -> Result<f64> {
    if n < 2 || m < 2 {
        return Err(invalid(format!("δ needs N ≥ 2 and m ≥ 2, got N = {n}, m = {m}")));
    }
    if !(slack > 0.0 && slack < 0.5) {
        return Err(invalid(format!("slack = {slack} outside (0, 0.5)")));
    }
    let (n, m) = (n as f64, m as f64);
    if n <= m.sqrt() {
        Ok(slack)
    } else {
        Ok((1.0 - m.ln() / (2.0 * n.ln()) + slack).min(0.999))
    }
}

/// Scale-free eigenvalue statistic `g(N^{-δ} λ_{r+1} / mean(λ))`.
pub fn phi_stat(spectrum: &EigenSpectrum, r: usize, delta: f64, g: Transform) -> Result<f64> {
    let n = spectrum.len();
    if r >= n {
        return Err(invalid(format!("r = {r} must be below N = {n}")));
    }
    eigen_ratio_stat(spectrum, r + 1, delta, g)
}

/// `g(N^{-δ} λ_k / mean(λ))` for an arbitrary 1-based index `k`.
pub fn eigen_ratio_stat(spectrum: &EigenSpectrum, k: usize, delta: f64, g: Transform) -> Result<f64> {
    let n = spectrum.len();
    if k == 0 || k > n {
        return Err(invalid(format!("eigenvalue index {k} outside 1..={n}")));
    }
    let mean = spectrum.mean();
    if !(mean > 0.0) {
        return Err(Error::DegenerateSpectrum);
    }
    let scaled = (n as f64).powf(-delta) * spectrum.lambda(k) / mean;
    Ok(g.apply(scaled.max(0.0)))
}

/// Squared standardised indicator sums integrated over `support`.
///
/// Each draw contributes `1{ξ ≤ u/stat}`; `stat = 0` uses the pointwise
/// limit `1{u ≥ 0}` and `stat = ∞` the limit `1{ξ ≤ 0}`.
pub fn randomized_statistic(stat: f64, draws: &[f64], support: &Support, g0: f64) -> f64 {
    let k = draws.len() as f64;
    let norm = (g0 * (1.0 - g0)).sqrt() * k.sqrt();
    support
        .points()
        .iter()
        .map(|&(u, mass)| {
            let hits = if stat == 0.0 {
                if u >= 0.0 {
                    draws.len()
                } else {
                    0
                }
            } else {
                let threshold = u / stat;
                draws.iter().filter(|&&xi| xi <= threshold).count()
            };
            let v = (hits as f64 - k * g0) / norm;
            mass * v * v
        })
        .sum()
}

fn location_for(g0: f64) -> f64 {
    if g0 == 0.5 {
        0.0
    } else {
        // P(Z + loc ≤ 0) = Φ(-loc) = g0
        -Normal::standard().inverse_cdf(g0)
    }
}

fn draw_normals<R: Rng + ?Sized>(rng: &mut R, count: usize, g0: f64) -> Vec<f64> {
    let loc = location_for(g0);
    (0..count).map(|_| rng.sample::<f64, _>(StandardNormal) + loc).collect()
}

fn check_stat(name: &str, value: f64) -> Result<()> {
    if value.is_nan() || value < 0.0 {
        return Err(invalid(format!("{name} = {value} must be nonnegative")));
    }
    Ok(())
}

/// First-stage output at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaStat {
    pub value: f64,
    pub phi: f64,
    pub t: usize,
}

/// Second-stage output at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaStat {
    pub value: f64,
    pub psi: f64,
    pub t: usize,
}

/// First randomisation with `R` fresh draws from `rng`.
pub fn theta_stat<R: Rng + ?Sized>(
    phi: f64,
    cfg: &RandomizerConfig,
    t: usize,
    rng: &mut R,
) -> Result<ThetaStat> {
    if cfg.r_draws == 0 {
        return Err(invalid("R must be positive"));
    }
    check_stat("φ", phi)?;
    let draws = draw_normals(rng, cfg.r_draws, cfg.g0_phi);
    let value = randomized_statistic(phi, &draws, &cfg.support_phi, cfg.g0_phi);
    Ok(ThetaStat { value, phi, t })
}

/// `l̃(N, m, R) = (ln N)^{2+ε} (ln m)^{2+ε} (ln R)^{2+ε}`.
pub fn log_normalizer(n: usize, m: usize, r: usize, epsilon: f64) -> Result<f64> {
    let e = std::f64::consts::E;
    for (name, v) in [("N", n), ("m", m), ("R", r)] {
        if (v as f64) <= e {
            return Err(invalid(format!("{name} = {v} must exceed e for the log normaliser")));
        }
    }
    let p = 2.0 + epsilon;
    Ok((n as f64).ln().powf(p) * (m as f64).ln().powf(p) * (r as f64).ln().powf(p))
}

/// `h(Θ / l̃(N, m, R))`.
pub fn psi_stat(theta: &ThetaStat, n: usize, m: usize, cfg: &RandomizerConfig) -> Result<f64> {
    check_stat("Θ", theta.value)?;
    let norm = log_normalizer(n, m, cfg.r_draws, cfg.epsilon_log)?;
    Ok(cfg.h_transform.apply(theta.value / norm))
}

/// Second randomisation with `W` fresh draws from `rng`.
pub fn gamma_stat<R: Rng + ?Sized>(
    psi: f64,
    cfg: &RandomizerConfig,
    t: usize,
    rng: &mut R,
) -> Result<GammaStat> {
    if cfg.w_draws == 0 {
        return Err(invalid("W must be positive"));
    }
    check_stat("ψ", psi)?;
    let draws = draw_normals(rng, cfg.w_draws, cfg.g0_psi);
    let value = randomized_statistic(psi, &draws, &cfg.support_psi, cfg.g0_psi);
    Ok(GammaStat { value, psi, t })
}

/// Every intermediate of one randomised time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStatistics {
    pub t: usize,
    pub lambda: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub gamma: f64,
}

/// Precomputed randomiser for a fixed `(N, m)`.
#[derive(Debug, Clone)]
pub struct Randomizer {
    cfg: RandomizerConfig,
    n: usize,
    m: usize,
    delta: f64,
    normalizer: Option<f64>,
}

impl Randomizer {
    pub fn new(cfg: RandomizerConfig, n: usize, m: usize) -> Result<Self> {
        cfg.validate()?;
        let delta = compute_delta(n, m, cfg.delta_slack)?;
        // Only the two-stage statistic needs l̃; its domain error is raised on use.
        let normalizer = log_normalizer(n, m, cfg.r_draws, cfg.epsilon_log).ok();
        Ok(Self { cfg, n, m, delta, normalizer })
    }

    pub fn config(&self) -> &RandomizerConfig {
        &self.cfg
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn normalizer(&self) -> Result<f64> {
        match self.normalizer {
            Some(v) => Ok(v),
            None => log_normalizer(self.n, self.m, self.cfg.r_draws, self.cfg.epsilon_log),
        }
    }

    fn check_dim(&self, spectrum: &EigenSpectrum) -> Result<()> {
        if spectrum.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: spectrum.len() });
        }
        Ok(())
    }

    /// Both stages for the (r+1)-th eigenvalue at time `t`.
    pub fn double(&self, spectrum: &EigenSpectrum, r: usize, t: usize) -> Result<StepStatistics> {
        self.check_dim(spectrum)?;
        let normalizer = self.normalizer()?;
        let phi = phi_stat(spectrum, r, self.delta, self.cfg.g_transform)?;
        let theta = theta_stat(phi, &self.cfg, t, &mut time_stream(self.cfg.seed, t, Stage::Theta))?;
        let psi = self.cfg.h_transform.apply(theta.value / normalizer);
        let gamma = gamma_stat(psi, &self.cfg, t, &mut time_stream(self.cfg.seed, t, Stage::Gamma))?;
        Ok(StepStatistics {
            t,
            lambda: spectrum.lambda(r + 1),
            phi,
            theta: theta.value,
            psi,
            gamma: gamma.value,
        })
    }

    /// Single randomisation of the r-th eigenvalue (vanishing-factor
    /// monitoring). Θ is reported in both the `theta` and `gamma` slots.
    pub fn single(&self, spectrum: &EigenSpectrum, r: usize, t: usize) -> Result<StepStatistics> {
        self.check_dim(spectrum)?;
        if r == 0 {
            return Err(invalid("vanishing-factor monitoring needs r ≥ 1"));
        }
        let phi = eigen_ratio_stat(spectrum, r, self.delta, self.cfg.g_transform)?;
        let mut rng = time_stream(self.cfg.seed, t, Stage::Vanishing);
        let theta = theta_stat(phi, &self.cfg, t, &mut rng)?;
        Ok(StepStatistics {
            t,
            lambda: spectrum.lambda(r),
            phi,
            theta: theta.value,
            psi: f64::NAN,
            gamma: theta.value,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }
}

/// Γ_t for the spectrum observed at time `t`; bit-reproducible from
/// `(cfg.seed, t)`.
pub fn gamma_for_time(
    spectrum: &EigenSpectrum,
    r: usize,
    n: usize,
    m: usize,
    cfg: &RandomizerConfig,
    t: usize,
) -> Result<GammaStat> {
    let step = Randomizer::new(cfg.clone(), n, m)?.double(spectrum, r, t)?;
    Ok(GammaStat { value: step.gamma, psi: step.psi, t })
}

/// Γ statistics in strictly increasing time order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GammaSequence {
    items: Vec<GammaStat>,
}

impl GammaSequence {
    pub fn push(&mut self, g: GammaStat) -> Result<()> {
        if let Some(last) = self.items.last() {
            if g.t <= last.t {
                return Err(Error::OutOfOrder { expected: last.t + 1, actual: g.t });
            }
        }
        self.items.push(g);
        Ok(())
    }

    pub fn as_slice(&self) -> &[GammaStat] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Writes `t,lambda_r1,phi,theta,psi,gamma` rows.
pub struct DiagnosticsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> DiagnosticsWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(["t", "lambda_r1", "phi", "theta", "psi", "gamma"])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, s: &StepStatistics) -> Result<()> {
        self.inner.write_record(&[
            s.t.to_string(),
            format!("{:?}", s.lambda),
            format!("{:?}", s.phi),
            format!("{:?}", s.theta),
            format!("{:?}", s.psi),
            format!("{:?}", s.gamma),
        ])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;


    #[test]
    fn delta_first_branch() {
        assert_eq!(compute_delta(4, 100, 0.05).unwrap(), 0.05);
    }

    #[test]
    fn delta_second_branch() {
        // 1 - ln 50 / (2 ln 100) + 0.05 and the m = 250 analogue.
        assert_relative_eq!(compute_delta(100, 50, 0.05).unwrap(), 0.625_257_498_915_995, epsilon = 1e-12);
        assert_relative_eq!(compute_delta(100, 250, 0.05).unwrap(), 0.450_514_997_831_991, epsilon = 1e-12);
    }

    #[test]
    fn delta_is_capped_and_validated() {
        let d = compute_delta(1_000_000, 3, 0.49).unwrap();
        assert!(d <= 0.999 && d > 0.0);
        assert!(compute_delta(1, 10, 0.05).is_err());
        assert!(compute_delta(10, 10, 0.0).is_err());
        assert!(compute_delta(10, 10, 0.5).is_err());
    }

    fn spike_spectrum() -> EigenSpectrum {
        let mut v = vec![1.0; 100];
        v[0] = 50.0;
        EigenSpectrum::new(v, 0)
    }

    #[test]
    fn phi_hand_value() {
        let delta = compute_delta(100, 50, 0.05).unwrap();
        let phi = phi_stat(&spike_spectrum(), 1, delta, Transform::Identity).unwrap();
        // 100^{-δ} · 1 / 1.49
        assert_relative_eq!(phi, 0.037_696_300_755_804, max_relative = 1e-12);
        assert_relative_eq!(phi, 0.03770, max_relative = 1e-3);
    }

    #[test]
    fn phi_is_scale_invariant() {
        let s = spike_spectrum();
        let scaled = EigenSpectrum::new(s.eigenvalues.iter().map(|v| v * 4.0).collect(), 0);
        let a = phi_stat(&s, 1, 0.6, Transform::Identity).unwrap();
        let b = phi_stat(&scaled, 1, 0.6, Transform::Identity).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn phi_zero_eigenvalue_and_degenerate() {
        let s = EigenSpectrum::new(vec![3.0, 0.0, 0.0], 0);
        assert_eq!(phi_stat(&s, 1, 0.5, Transform::Identity).unwrap(), 0.0);
        let z = EigenSpectrum::new(vec![0.0; 3], 0);
        assert!(matches!(phi_stat(&z, 1, 0.5, Transform::Identity), Err(Error::DegenerateSpectrum)));
        assert!(phi_stat(&s, 3, 0.5, Transform::Identity).is_err());
    }

    #[test]
    fn theta_divergent_regime_hand_case() {
        let draws = [-0.3, 0.2, -1.1, 0.5];
        let theta = randomized_statistic(f64::INFINITY, &draws, &Support::default(), 0.5);
        assert_eq!(theta, 0.0);
    }

    #[test]
    fn theta_vanishing_regime_hand_case() {
        let draws = [-0.3, 0.2, -1.1, 0.5];
        for phi in [0.0, 1e-300] {
            let theta = randomized_statistic(phi, &draws, &Support::default(), 0.5);
            assert_relative_eq!(theta, 4.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn gamma_hand_cases() {
        let draws = [0.1, -0.2, 0.3, -0.4];
        assert_relative_eq!(randomized_statistic(0.0, &draws, &Support::default(), 0.5), 4.0);
        // W = 1, ξ = 0.5, ψ → ∞: both indicators zero, each term (0 - ½)/½ = -1.
        assert_relative_eq!(randomized_statistic(f64::INFINITY, &[0.5], &Support::default(), 0.5), 1.0);
    }

    #[test]
    fn psi_normalizer_hand_value() {
        let cfg = RandomizerConfig::for_dimension(100, 0);
        let norm = log_normalizer(100, 100, 100, 0.01).unwrap();
        assert_relative_eq!(norm, 9985.538_183_754_03, max_relative = 1e-12);
        let one = ThetaStat { value: 1.0, phi: 0.0, t: 0 };
        assert_relative_eq!(psi_stat(&one, 100, 100, &cfg).unwrap(), 1.001_448_276_094_873e-4, max_relative = 1e-12);
        let null = ThetaStat { value: 100.0, phi: 0.0, t: 0 };
        assert_relative_eq!(psi_stat(&null, 100, 100, &cfg).unwrap(), 0.010_014_482_760_948_73, max_relative = 1e-12);
        let zero = ThetaStat { value: 0.0, phi: 0.0, t: 0 };
        assert_eq!(psi_stat(&zero, 100, 100, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn psi_rejects_small_arguments() {
        let cfg = RandomizerConfig::for_dimension(2, 0);
        let th = ThetaStat { value: 1.0, phi: 0.0, t: 0 };
        assert!(psi_stat(&th, 2, 100, &cfg).is_err());
        assert!(log_normalizer(100, 2, 100, 0.01).is_err());
        assert!(log_normalizer(3, 3, 3, 0.01).is_ok());
    }

    #[test]
    fn zero_draw_counts_are_errors() {
        let mut cfg = RandomizerConfig::for_dimension(10, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        cfg.r_draws = 0;
        assert!(theta_stat(1.0, &cfg, 0, &mut rng).is_err());
        cfg.w_draws = 0;
        assert!(gamma_stat(1.0, &cfg, 0, &mut rng).is_err());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn negative_inputs_rejected() {
        let cfg = RandomizerConfig::for_dimension(10, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(theta_stat(-1.0, &cfg, 0, &mut rng).is_err());
        assert!(gamma_stat(f64::NAN, &cfg, 0, &mut rng).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = RandomizerConfig::for_dimension(10, 0);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.g0_phi = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.delta_slack = 0.6;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.epsilon_log = 0.0;
        assert!(bad.validate().is_err());
        assert!(Support::new(vec![(1.0, 0.5), (-1.0, 0.4)]).is_err());
        assert!(Support::new(vec![(1.0, 1.0), (-1.0, 0.0)]).is_err());
        assert!(Support::new(vec![(1.0, 0.25), (0.0, 0.25), (-1.0, 0.5)]).is_ok());
    }

    #[test]
    fn shifted_draw_distribution_matches_g0() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = draw_normals(&mut rng, 200_000, 0.3);
        let frac = draws.iter().filter(|&&x| x <= 0.0).count() as f64 / draws.len() as f64;
        assert!((frac - 0.3).abs() < 0.005, "{frac}");
    }

    #[test]
    fn bounds_hold_for_skewed_g0() {
        let mut cfg = RandomizerConfig::for_dimension(50, 3);
        cfg.g0_phi = 0.2;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for phi in [0.0, 0.01, 1.0, 100.0, f64::INFINITY] {
            let th = theta_stat(phi, &cfg, 0, &mut rng).unwrap();
            assert!(th.value >= 0.0 && th.value <= cfg.theta_bound());
        }
    }

    #[test]
    fn gamma_for_time_is_deterministic() {
        let cfg = RandomizerConfig::for_dimension(100, 42);
        let s = spike_spectrum();
        let a = gamma_for_time(&s, 1, 100, 100, &cfg, 150).unwrap();
        let b = gamma_for_time(&s, 1, 100, 100, &cfg, 150).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sequence_rejects_out_of_order() {
        let mut seq = GammaSequence::default();
        seq.push(GammaStat { value: 1.0, psi: 1.0, t: 5 }).unwrap();
        assert!(seq.push(GammaStat { value: 1.0, psi: 1.0, t: 5 }).is_err());
        seq.push(GammaStat { value: 1.0, psi: 1.0, t: 6 }).unwrap();
        assert_eq!(seq.len(), 2);
    }
}
