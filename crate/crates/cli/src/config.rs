//! Flat key-value configuration for `simulate`.

use factor_monitor::monitor::{Mode, WienerMc};
use factor_monitor::simulate::{DgpSpec, McConfig, Scenario};
use serde::Deserialize;

use crate::{invalid, CliResult};

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SimFile {
    replications: Option<usize>,
    scenario: Option<String>,
    #[serde(alias = "N")]
    n: Option<usize>,
    #[serde(alias = "T")]
    t: Option<usize>,
    m: Option<OneOrMany<usize>>,
    r: Option<OneOrMany<usize>>,
    eta: Option<OneOrMany<f64>>,
    alpha: Option<OneOrMany<f64>>,
    tau: Option<usize>,
    seed: Option<u64>,
    snr: Option<f64>,
    kappa: Option<f64>,
    var_coef_radius: Option<f64>,
    ar_coef_new_factor: Option<f64>,
    idio_cross_decay: Option<f64>,
    idio_time_decay: Option<f64>,
    mode: Option<String>,
    mc_reps: Option<usize>,
    mc_grid: Option<usize>,
    workers: Option<usize>,
}

fn parse_file(text: &str) -> CliResult<SimFile> {
    if text.trim().is_empty() {
        return Err(invalid("configuration file is empty"));
    }
    toml::from_str(text).map_err(|e| invalid(format!("bad configuration: {}", e.message())))
}

pub fn has_seed(text: &str) -> CliResult<bool> {
    Ok(parse_file(text)?.seed.is_some())
}

pub fn parse(text: &str) -> CliResult<McConfig> {
    let f = parse_file(text)?;
    let d = DgpSpec::default();
    let scenario: Scenario = f.scenario.as_deref().unwrap_or("null").parse()?;
    let m_values = f.m.map(OneOrMany::into_vec).unwrap_or_else(|| vec![d.m]);
    let r_values = f.r.map(OneOrMany::into_vec).unwrap_or_else(|| vec![d.r]);
    let mode = match f.mode.as_deref().unwrap_or("break") {
        "break" => Mode::Break,
        "vanishing" => Mode::Vanishing,
        other => return Err(invalid(format!("unknown mode {other:?}; expected break or vanishing"))),
    };
    let dgp = DgpSpec {
        n: f.n.unwrap_or(d.n),
        t: f.t.unwrap_or(d.t),
        m: *m_values.first().ok_or_else(|| invalid("m must not be empty"))?,
        r: *r_values.first().ok_or_else(|| invalid("r must not be empty"))?,
        scenario,
        tau: f.tau.unwrap_or(d.tau),
        var_coef_radius: f.var_coef_radius.unwrap_or(d.var_coef_radius),
        ar_coef_new_factor: f.ar_coef_new_factor.unwrap_or(d.ar_coef_new_factor),
        idio_cross_decay: f.idio_cross_decay.unwrap_or(d.idio_cross_decay),
        idio_time_decay: f.idio_time_decay.unwrap_or(d.idio_time_decay),
        snr: f.snr.unwrap_or(d.snr),
        kappa: f.kappa.unwrap_or(d.kappa),
        seed: 0,
    };
    let wiener = WienerMc {
        grid_points: f.mc_grid.unwrap_or(WienerMc::default().grid_points),
        replications: f.mc_reps.unwrap_or(WienerMc::default().replications),
        seed: f.seed.unwrap_or(0),
    };
    Ok(McConfig {
        replications: f.replications.unwrap_or(100),
        dgp,
        m_values,
        r_values,
        etas: f.eta.map(OneOrMany::into_vec).unwrap_or_else(|| vec![0.45]),
        alphas: f.alpha.map(OneOrMany::into_vec).unwrap_or_else(|| vec![0.05]),
        base_seed: f.seed.unwrap_or(0),
        mode,
        wiener: Some(wiener),
        workers: f.workers,
    })
}
