use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use factor_monitor::eigen::SpectrumWriter;
use factor_monitor::monitor::{
    critical_value, Detection, Mode, MonitorSession, PathWriter, RPolicy, SessionConfig, SessionEvent, ThresholdSpec,
    WienerMc,
};
use factor_monitor::randomize::{DiagnosticsWriter, RandomizerConfig};
use factor_monitor::simulate::{
    emit_tables, gen_panel, run_table, write_replication_log, DgpSpec, McConfig, Scenario, TableFormat,
};
use factor_monitor::{Error, Orientation, Panel};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::json;

mod config;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "factor-monitor", version, about = "Online structural-break monitoring for factor models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monitor a panel for breaks and print a JSON report.
    Monitor(MonitorArgs),
    /// Run the Monte Carlo harness and write result tables.
    Simulate(SimulateArgs),
    /// Print a boundary critical value.
    Critval(CritvalArgs),
    /// Generate a synthetic panel with its planted truth.
    Dgp(DgpArgs),
}

#[derive(Args, Debug)]
struct MonitorArgs {
    /// Panel CSV; `-` reads observations from standard input one row per line.
    input: PathBuf,
    /// Training window length.
    #[arg(long)]
    m: usize,
    /// Number of factors, or `auto` for the eigenvalue-ratio estimate.
    #[arg(long, default_value = "auto")]
    r: String,
    #[arg(long, default_value_t = 0.45)]
    eta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Restart monitoring after each detection.
    #[arg(long)]
    restart: bool,
    #[arg(long, default_value = "rows_are_time")]
    orientation: String,
    /// Write the detector path as CSV.
    #[arg(long)]
    path_out: Option<PathBuf>,
    /// Write per-step randomisation diagnostics as CSV.
    #[arg(long)]
    diagnostics_out: Option<PathBuf>,
    /// Write the full eigenvalue spectrum at each monitored step as CSV.
    #[arg(long)]
    spectrum_out: Option<PathBuf>,
    /// Monitor for a vanishing factor instead of a new or changed one.
    #[arg(long)]
    vanishing: bool,
    /// Skip subtracting the training-window mean.
    #[arg(long)]
    no_center: bool,
    #[arg(long, default_value_t = 100_000)]
    mc_reps: usize,
    #[arg(long, default_value_t = 10_000)]
    mc_grid: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    reps: Option<usize>,
    /// Table output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-replication JSON lines log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CritvalArgs {
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Training length; required when eta = 0.5.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    mc_reps: usize,
    #[arg(long, default_value_t = 10_000)]
    mc_grid: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct DgpArgs {
    #[arg(long, default_value = "null")]
    scenario: String,
    #[arg(long = "N", visible_alias = "n", default_value_t = 100)]
    n: usize,
    #[arg(long = "T", visible_alias = "t", default_value_t = 1000)]
    t: usize,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 500)]
    tau: usize,
    #[arg(long, default_value_t = 2.0)]
    snr: f64,
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Panel CSV path; the truth sidecar goes next to it as `<stem>.truth.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_invalid_input() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string(value).map_err(|e| CliError::Runtime(e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct DetectionEntry {
    tau_hat: usize,
    k_hat: usize,
    detector_at_stop: f64,
    threshold_at_stop: f64,
    segment_start: usize,
    r: usize,
}

impl DetectionEntry {
    fn from_detection(d: &Detection) -> Option<Self> {
        Some(Self {
            tau_hat: d.tau_hat?,
            k_hat: d.k_hat,
            detector_at_stop: d.detector_at_stop?,
            threshold_at_stop: d.threshold_at_stop?,
            segment_start: d.origin,
            r: d.r,
        })
    }
}

/// Optional CSV side outputs of `monitor`.
struct Dumps {
    path: Option<PathWriter<BufWriter<File>>>,
    diagnostics: Option<DiagnosticsWriter<BufWriter<File>>>,
    spectrum: Option<SpectrumWriter<BufWriter<File>>>,
}

impl Dumps {
    fn open(args: &MonitorArgs) -> CliResult<Self> {
        Ok(Self {
            path: args.path_out.as_deref().map(|p| -> CliResult<_> { Ok(PathWriter::new(create(p)?)?) }).transpose()?,
            diagnostics: args.diagnostics_out.as_deref().map(|p| -> CliResult<_> { Ok(DiagnosticsWriter::new(create(p)?)?) }).transpose()?,
            spectrum: args.spectrum_out.as_deref().map(|p| -> CliResult<_> { Ok(SpectrumWriter::new(create(p)?)?) }).transpose()?,
        })
    }

    fn record(&mut self, session: &MonitorSession, ev: &SessionEvent) -> CliResult<()> {
        if let Some(w) = &mut self.path {
            w.write(&ev.point)?;
        }
        if let Some(w) = &mut self.diagnostics {
            w.write(&ev.stats)?;
        }
        if let (Some(w), Some(s)) = (&mut self.spectrum, session.last_spectrum()) {
            w.write(s)?;
        }
        Ok(())
    }

    fn flush(&mut self) -> CliResult<()> {
        if let Some(w) = &mut self.path {
            w.flush()?;
        }
        if let Some(w) = &mut self.diagnostics {
            w.flush()?;
        }
        if let Some(w) = &mut self.spectrum {
            w.flush()?;
        }
        Ok(())
    }
}

fn parse_row(line: &str, lineno: usize) -> CliResult<Option<Vec<f64>>> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let mut out = Vec::with_capacity(fields.len());
    for (j, f) in fields.iter().enumerate() {
        match f.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if lineno == 1 => return Ok(None),
            _ => {
                return Err(invalid(format!("row {lineno}, column {}: cannot parse {f:?} as a number", j + 1)));
            }
        }
    }
    Ok(Some(out))
}

fn cmd_monitor(args: MonitorArgs) -> CliResult<()> {
    let policy: RPolicy = args.r.parse()?;
    let orientation: Orientation = args.orientation.parse()?;
    let seed = resolve_seed(args.seed);
    let wiener = WienerMc { grid_points: args.mc_grid, replications: args.mc_reps, seed };
    let (c, source) = critical_value(args.eta, args.alpha, Some(args.m), &wiener)?;
    let threshold = ThresholdSpec::new(args.eta, args.alpha, c, args.m)?;
    let streaming = args.input.as_os_str() == "-";

    let panel = if streaming {
        None
    } else {
        let p = Panel::load_csv(&args.input, orientation).map_err(|e| match e {
            Error::Io(io) => invalid(format!("cannot read {}: {io}", args.input.display())),
            other => other.into(),
        })?;
        if p.n_periods() < args.m + 1 {
            return Err(invalid(format!(
                "panel has {} periods; monitoring needs at least m + 1 = {}",
                p.n_periods(),
                args.m + 1
            )));
        }
        if args.restart && p.n_periods() <= 2 * args.m {
            return Err(invalid(format!(
                "restart monitoring needs T > 2m, got T = {} and m = {}",
                p.n_periods(),
                args.m
            )));
        }
        Some(p)
    };

    let session_config = |n: usize| -> CliResult<SessionConfig> {
        Ok(SessionConfig {
            mode: if args.vanishing { Mode::Vanishing } else { Mode::Break },
            center: !args.no_center,
            restart: args.restart,
            record_path: false,
            ..SessionConfig::new(args.m, policy, threshold, RandomizerConfig::for_dimension(n, seed))
        })
    };
    let mut dumps = Dumps::open(&args)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();

    let (n, periods, session) = match &panel {
        Some(p) => {
            let mut session = MonitorSession::new(p.n_series(), session_config(p.n_series())?)?;
            for t in 0..p.n_periods() {
                if let Some(ev) = session.push(p.observation(t))? {
                    dumps.record(&session, &ev)?;
                }
                if session.is_halted() {
                    break;
                }
            }
            (p.n_series(), p.n_periods(), session)
        }
        None => {
            let stdin = io::stdin();
            let mut session: Option<MonitorSession> = None;
            let mut n = 0;
            let mut periods = 0;
            for (i, line) in stdin.lock().lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let Some(row) = parse_row(&line, i + 1)? else { continue };
                if session.is_none() {
                    n = row.len();
                    if n < 2 {
                        return Err(invalid("each observation needs at least 2 series"));
                    }
                    session = Some(MonitorSession::new(n, session_config(n)?)?);
                }
                let s = session.as_mut().expect("session started");
                if row.len() != n {
                    return Err(invalid(format!("row {}: expected {n} fields, found {}", i + 1, row.len())));
                }
                periods += 1;
                if let Some(ev) = s.push(DVector::from_vec(row).as_view())? {
                    dumps.record(s, &ev)?;
                    let line = json!({
                        "type": "step",
                        "t": ev.point.t,
                        "k": ev.point.k,
                        "segment": ev.segment,
                        "r": ev.r,
                        "gamma": ev.point.gamma,
                        "d": ev.point.d,
                        "nu": ev.point.nu,
                        "crossed": ev.point.crossed,
                    });
                    writeln!(out, "{line}")?;
                    out.flush()?;
                }
            }
            let session = session.ok_or_else(|| invalid("standard input contained no observations"))?;
            (n, periods, session)
        }
    };
    dumps.flush()?;

    let outcome = session.finish();
    let monitored = outcome.detections.iter().chain(outcome.open_segment.iter()).map(|d| d.k_hat).sum::<usize>();
    let detections: Vec<DetectionEntry> =
        outcome.detections.iter().filter_map(DetectionEntry::from_detection).collect();
    let r_echo = match policy {
        RPolicy::Fixed(r) => json!(r),
        RPolicy::Auto { .. } => json!("auto"),
    };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "config": {
            "input": args.input.display().to_string(),
            "m": args.m,
            "r": r_echo,
            "eta": args.eta,
            "alpha": args.alpha,
            "critical_value": c,
            "critical_value_source": source.as_str(),
            "seed": seed,
            "restart": args.restart,
            "vanishing": args.vanishing,
            "center": !args.no_center,
            "orientation": if streaming { "rows_are_time" } else { orientation_name(orientation) },
            "n_series": n,
            "n_periods": periods,
        },
        "monitored_steps": monitored,
        "detections": detections,
        "path_file": args.path_out.as_ref().map(|p| p.display().to_string()),
    });
    if streaming {
        writeln!(out, "{}", to_json(&report)?)?;
    } else {
        writeln!(out, "{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?)?;
    }
    Ok(())
}

fn orientation_name(o: Orientation) -> &'static str {
    match o {
        Orientation::RowsAreTime => "rows_are_time",
        Orientation::RowsAreSeries => "rows_are_series",
    }
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| invalid(format!("cannot read {}: {e}", args.config.display())))?;
    let mut mc: McConfig = config::parse(&text)?;
    if let Some(r) = args.reps {
        mc.replications = r;
    }
    if let Some(w) = args.workers {
        mc.workers = Some(w);
    }
    mc.base_seed = match args.seed {
        Some(s) => s,
        None if config::has_seed(&text)? => mc.base_seed,
        None => resolve_seed(None),
    };
    let format: TableFormat = args.format.parse()?;
    let result = run_table(&mc)?;
    for cell in &result.cells {
        let window = cell.detect_fraction_in_window.map(|f| format!("{f:.3}")).unwrap_or_else(|| "-".into());
        eprintln!(
            "scenario={} m={} r={} eta={} alpha={} reps={} in_window={} total={:.3}",
            cell.scenario.as_str(),
            cell.m,
            cell.r,
            cell.eta,
            cell.alpha,
            cell.replications,
            window,
            cell.detect_fraction_total
        );
    }
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            emit_tables(&result, format, &mut w)?;
            w.flush()?;
        }
        None => emit_tables(&result, format, io::stdout().lock())?,
    }
    if let Some(path) = &args.log {
        let mut w = create(path)?;
        write_replication_log(&result, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_critval(args: CritvalArgs) -> CliResult<()> {
    if args.eta == 0.5 && args.m.is_none() {
        return Err(invalid("eta = 0.5 requires --m (the critical value depends on the training length)"));
    }
    let needs_seed = args.eta < 0.5 && !(args.eta == 0.45 && (args.alpha == 0.05 || args.alpha == 0.10));
    let seed = if needs_seed { resolve_seed(args.seed) } else { args.seed.unwrap_or(0) };
    let mc = WienerMc { grid_points: args.mc_grid, replications: args.mc_reps, seed };
    let (c, source) = critical_value(args.eta, args.alpha, args.m, &mc)?;
    println!("{c:.6} {}", source.as_str());
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "panel".into());
    out.with_file_name(format!("{stem}.truth.json"))
}

fn cmd_dgp(args: DgpArgs) -> CliResult<()> {
    let scenario: Scenario = args.scenario.parse()?;
    let seed = resolve_seed(args.seed);
    let spec = DgpSpec {
        n: args.n,
        t: args.t,
        m: args.m,
        r: args.r,
        scenario,
        tau: args.tau,
        snr: args.snr,
        kappa: args.kappa,
        seed,
        ..DgpSpec::default()
    };
    let generated = gen_panel(&spec)?;
    let mut w = create(&args.out)?;
    generated.panel.write_csv(&mut w, Orientation::RowsAreTime)?;
    w.flush()?;
    let truth = &generated.truth;
    let sidecar = json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": truth.scenario.as_str(),
        "tau": truth.tau,
        "seed": truth.seed,
        "N": spec.n,
        "T": spec.t,
        "m": spec.m,
        "r": truth.r,
        "snr": spec.snr,
        "kappa": spec.kappa,
        "loadings_digest": truth.loadings_digest,
    });
    let path = sidecar_path(&args.out);
    let mut w = create(&path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::Runtime(e.to_string()))?)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let head: Vec<&str> = text.lines().take_while(|l| !l.starts_with("Usage:")).collect();
            eprintln!("error[invalid-input]: {}", one_line(head.join(" ").trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Monitor(a) => cmd_monitor(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Critval(a) => cmd_critval(a),
        Command::Dgp(a) => cmd_dgp(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(msg)) => {
            eprintln!("error[invalid-input]: {}", one_line(&msg));
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error[runtime]: {}", one_line(&msg));
            ExitCode::from(3)
        }
    }
}
