//! `periodica` command-line front end.
//!
//! Exit codes: 0 success, 2 bad flags or input, 3 estimation failure,
//! 4 I/O failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use periodica::csvio::{self, csv_table, format_sample, write_atomic};
use periodica::experiments::{self, parse_snr, ExperimentConfig, ExperimentReport};
use periodica::period_finder::{self, subsampled_profile};
use periodica::ramanujan::{self, decompose, normalized_strengths, reconstruct_components};
use periodica::signal::{measure_snr, ComponentSpec, GroundTruth, Waveform};
use periodica::svd_baseline::{estimate_period_svd_with, svd_spectrum_with, SvdConfig};
use periodica::{Error, Method, MonteCarloParams, Signal, DEFAULT_SEED, SCHEMA_VERSION};

#[derive(Parser, Debug)]
#[command(name = "periodica", version, about = "Period estimation and hidden periodic component reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a composite periodic signal and a noisy observation of it.
    Synth(SynthArgs),
    /// Estimate the composite period of a signal file.
    Estimate(EstimateArgs),
    /// Project a signal onto the Ramanujan subspaces of its period and
    /// rebuild the hidden components.
    Decompose(DecomposeArgs),
    /// Runtime scaling of the estimators over a sweep of signal lengths.
    Bench(ExperimentArgs),
    /// Hit-miss tally of repeated estimation on fresh noise.
    Hitmiss(ExperimentArgs),
    /// Reconstruction quality over an SNR sweep.
    Recon(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Variance,
    Montecarlo,
    Svd,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Variance => Method::Mvpf,
            MethodArg::Montecarlo => Method::MonteCarlo,
            MethodArg::Svd => Method::Svd,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Hidden periods, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    periods: Vec<usize>,
    /// Waveform per period: tri, cos or rand. A single value applies to all.
    #[arg(long, value_delimiter = ',', default_value = "tri")]
    wave: Vec<String>,
    /// Amplitude per period. A single value applies to all.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    amplitudes: Vec<f64>,
    /// Signal length.
    #[arg(long)]
    n: usize,
    /// SNR in dB; `inf` for a noiseless copy.
    #[arg(long, default_value = "inf", value_parser = snr_arg)]
    snr: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output directory for clean.csv, noisy.csv and truth.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Signal file; repeat for several independent records (Monte Carlo).
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "variance")]
    method: MethodArg,
    #[command(flatten)]
    mc: McArgs,
    /// Ratio recorded where σ2 is negligible (SVD).
    #[arg(long, default_value_t = SvdConfig::default().cap_value)]
    svd_cap: f64,
    /// Write the variance or σ1/σ2 spectrum as `P,value` CSV.
    #[arg(long)]
    emit_profile: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct McArgs {
    /// Monte Carlo runs; defaults to 5, or to the number of inputs.
    #[arg(long)]
    resends: Option<usize>,
    /// Columns sampled per assumed period.
    #[arg(long, default_value_t = MonteCarloParams::default().columns)]
    columns: usize,
    /// Rows sampled per column.
    #[arg(long, default_value_t = MonteCarloParams::default().rows)]
    rows: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Composite period; estimated with the variance method when omitted.
    #[arg(long)]
    period: Option<usize>,
    /// Hidden periods to rebuild; by default every divisor whose strength
    /// reaches --min-strength.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.01)]
    min_strength: f64,
    /// Output directory for strengths.csv and components.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// ExperimentConfig JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    periods: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    wave: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    amplitudes: Option<Vec<f64>>,
    /// Signal length, or the length sweep for `bench`.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_parser = snr_arg)]
    snr: Option<f64>,
    #[arg(long, value_delimiter = ',', value_parser = snr_arg)]
    snr_sweep: Option<Vec<f64>>,
    #[arg(long)]
    seeds_per_snr: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Estimators compared by `bench`.
    #[arg(long, value_delimiter = ',', value_enum)]
    methods: Option<Vec<MethodArg>>,
    #[arg(long)]
    resends: Option<usize>,
    #[arg(long)]
    columns: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json and the CSV tables.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn snr_arg(s: &str) -> Result<f64, String> {
    parse_snr(s).map_err(|e| e.to_string())
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_estimation_failure() => 3,
            CliError::Core(Error::Io(_) | Error::Parse { .. }) => 4,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn broadcast<T: Clone>(values: &[T], k: usize, what: &str) -> CliResult<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0].clone(); k]),
        n if n == k => Ok(values.to_vec()),
        n => Err(CliError::Usage(format!("{n} {what} given for {k} periods"))),
    }
}

fn parse_waves(waves: &[String], k: usize) -> CliResult<Vec<Waveform>> {
    broadcast(waves, k, "waveforms")?
        .iter()
        .map(|w| w.parse::<Waveform>().map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(write_atomic(path, text.as_bytes())?)
}

fn snr_json(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!("inf")
    }
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    let k = a.periods.len();
    let waves = parse_waves(&a.wave, k)?;
    let amps = broadcast(&a.amplitudes, k, "amplitudes")?;
    let specs: Vec<ComponentSpec> = a
        .periods
        .iter()
        .zip(&waves)
        .zip(&amps)
        .map(|((&p, &w), &amp)| ComponentSpec::new(p, w, amp))
        .collect();
    let gt = GroundTruth::synthesize(&specs, a.n, a.snr, a.seed)?;
    let templates: BTreeMap<String, Vec<f64>> = gt
        .components
        .iter()
        .map(|(p, s)| (p.to_string(), s.samples()[..*p].to_vec()))
        .collect();
    let realized = measure_snr(&gt.clean, &gt.noisy).ok();
    let truth = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "n": a.n,
        "components": specs,
        "composite_period": gt.composite_period(),
        "snr_db": snr_json(a.snr),
        "realized_snr_db": realized,
        "seed": a.seed,
        "templates": templates,
    });
    let header_clean = format!("clean periods={:?} n={} seed={}", a.periods, a.n, a.seed);
    let header_noisy = format!("noisy periods={:?} n={} snr_db={} seed={}", a.periods, a.n, a.snr, a.seed);
    csvio::write_signal(&a.out.join("clean.csv"), &gt.clean, &[&header_clean])?;
    csvio::write_signal(&a.out.join("noisy.csv"), &gt.noisy, &[&header_noisy])?;
    write_text(&a.out.join("truth.json"), &(to_json(&truth) + "\n"))?;
    Ok(())
}

fn read_inputs(paths: &[PathBuf]) -> CliResult<Vec<Signal>> {
    paths
        .iter()
        .map(|p| csvio::read_signal(p).map_err(CliError::from))
        .collect()
}

fn mc_params(mc: &McArgs, inputs: usize) -> MonteCarloParams {
    MonteCarloParams {
        resends: mc.resends.unwrap_or(if inputs > 1 { inputs } else { MonteCarloParams::default().resends }),
        columns: mc.columns,
        rows: mc.rows,
        seed: mc.seed,
    }
}

fn profile_csv(points: impl Iterator<Item = (usize, f64)>) -> String {
    csv_table(&["P", "value"], points.map(|(p, v)| vec![p.to_string(), format_sample(v)]))
}

fn cmd_estimate(a: EstimateArgs) -> CliResult<()> {
    let records = read_inputs(&a.input)?;
    let method = Method::from(a.method);
    let svd = SvdConfig { cap_value: a.svd_cap, ..SvdConfig::default() };
    let params = mc_params(&a.mc, records.len());
    if method != Method::MonteCarlo && records.len() > 1 {
        return Err(CliError::Usage("several --input files need --method montecarlo".into()));
    }
    let estimate = match method {
        Method::Mvpf => period_finder::estimate_period_mvpf(&records[0]),
        Method::MonteCarlo => period_finder::estimate_period_montecarlo(&records, &params),
        Method::Svd => estimate_period_svd_with(&records[0], &svd),
    };
    if let Some(path) = &a.emit_profile {
        let text = match method {
            Method::Mvpf => profile_csv(period_finder::variance_profile(&records[0])?.iter()),
            // the first run's subsampled profile
            Method::MonteCarlo => profile_csv(subsampled_profile(&records[0], &params, 0)?.iter()),
            Method::Svd => profile_csv(svd_spectrum_with(&records[0], &svd)?.iter()),
        };
        write_text(path, &text)?;
    }
    let estimate = estimate?;
    match a.format {
        Format::Json => {
            let mut v = serde_json::to_value(&estimate).expect("serializable");
            v["schema_version"] = serde_json::json!(SCHEMA_VERSION);
            println!("{}", to_json(&v));
        }
        Format::Csv => {
            println!("period,score,method");
            println!("{},{},{}", estimate.period, estimate.score, estimate.method);
        }
    }
    Ok(())
}

fn cmd_decompose(a: DecomposeArgs) -> CliResult<()> {
    let signal = csvio::read_signal(&a.input)?;
    let period = match a.period {
        Some(p) => p,
        None => period_finder::estimate_period_mvpf(&signal)?.period,
    };
    if period == 0 {
        return Err(CliError::Usage("--period must be positive".into()));
    }
    let dec = decompose(&signal, period)?;
    let strengths = normalized_strengths(&dec)?;
    let hidden: Vec<usize> = match a.hidden {
        Some(h) => h,
        None => strengths
            .iter()
            .filter(|(&q, &s)| q > 1 && s >= a.min_strength)
            .map(|(&q, _)| q)
            .collect(),
    };

    let rows = strengths.iter().map(|(q, s)| {
        vec![q.to_string(), format_sample(*s), format_sample(dec.energies[q])]
    });
    write_text(&a.out.join("strengths.csv"), &csv_table(&["q", "strength", "energy"], rows))?;

    let components = if hidden.is_empty() {
        None
    } else {
        Some(reconstruct_components(&dec, &hidden)?)
    };
    if let Some(set) = &components {
        let mut header = vec!["n".to_string()];
        header.extend(set.components.keys().map(|p| format!("p{p}")));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = (0..period).map(|n| {
            let mut row = vec![n.to_string()];
            row.extend(set.components.values().map(|c| format_sample(c[n])));
            row
        });
        write_text(&a.out.join("components.csv"), &csv_table(&header_refs, rows))?;
    }

    let assignment: BTreeMap<String, usize> = ramanujan::assign_divisors(period, &hidden)
        .into_iter()
        .map(|(q, h)| (q.to_string(), h))
        .collect();
    match a.format {
        Format::Json => {
            let summary = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "period": period,
                "dc_value": dec.dc_value,
                "hidden_periods": hidden,
                "assignment": assignment,
                "strengths": strengths.iter().map(|(q, s)| (q.to_string(), *s)).collect::<BTreeMap<_, _>>(),
                "alphas": components.as_ref().map(|c| c.alphas.iter().map(|(p, a)| (p.to_string(), *a)).collect::<BTreeMap<_, _>>()),
            });
            println!("{}", to_json(&summary));
        }
        Format::Csv => {
            println!("period,dc_value,hidden_periods");
            let h: Vec<String> = hidden.iter().map(usize::to_string).collect();
            println!("{},{},{}", period, format_sample(dec.dc_value), h.join(";"));
        }
    }
    Ok(())
}

fn experiment_config(a: &ExperimentArgs, bench: bool) -> CliResult<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &a.periods {
        cfg.hidden_periods = p.clone();
        let k = p.len();
        if a.wave.is_none() {
            cfg.waveforms = vec![Waveform::Triangle; k];
        }
        if a.amplitudes.is_none() {
            cfg.amplitudes = vec![1.0; k];
        }
    }
    let k = cfg.hidden_periods.len();
    if let Some(w) = &a.wave {
        cfg.waveforms = parse_waves(w, k)?;
    }
    if let Some(amp) = &a.amplitudes {
        cfg.amplitudes = broadcast(amp, k, "amplitudes")?;
    }
    if let Some(n) = &a.n {
        if bench {
            cfg.n_sweep = n.clone();
        } else {
            match n.as_slice() {
                [one] => cfg.n = *one,
                _ => return Err(CliError::Usage("--n takes a single length here".into())),
            }
        }
    }
    if let Some(s) = a.snr {
        cfg.snr_db = s;
    }
    if let Some(s) = &a.snr_sweep {
        cfg.snr_sweep = s.clone();
    }
    if let Some(s) = a.seeds_per_snr {
        cfg.seeds_per_snr = s;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(m) = a.method {
        cfg.method = Some(m.into());
    }
    if let Some(ms) = &a.methods {
        cfg.bench_methods = ms.iter().map(|&m| m.into()).collect();
    }
    if let Some(r) = a.resends {
        cfg.monte_carlo.resends = r;
    }
    if let Some(c) = a.columns {
        cfg.monte_carlo.columns = c;
    }
    if let Some(r) = a.rows {
        cfg.monte_carlo.rows = r;
    }
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    if let Some(t) = a.threads {
        cfg.threads = t;
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn write_report(report: &ExperimentReport, out: &Path) -> CliResult<()> {
    write_text(&out.join("report.json"), &(report.to_json() + "\n"))?;
    for (name, text) in report.csv_tables() {
        write_text(&out.join(name), &text)?;
    }
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs, which: &str) -> CliResult<()> {
    let cfg = experiment_config(&a, which == "bench")?;
    let report = match which {
        "bench" => experiments::run_runtime_comparison(&cfg)?,
        "hitmiss" => experiments::run_hit_miss(&cfg)?,
        _ => experiments::run_reconstruction_eval(&cfg)?,
    };
    write_report(&report, &a.out)?;
    if let Some(h) = &report.hit_miss {
        println!("hits={} misses={} method={}", h.hits, h.misses, h.method);
    }
    if let Some(rt) = &report.runtime {
        println!("method,slope");
        for s in &rt.slopes {
            println!("{},{:.3}", s.method, s.slope);
        }
    }
    if let Some(rc) = &report.reconstruction {
        println!("snr_db,valid,mean_max_nondivisor_strength,mean_correlations");
        for agg in &rc.per_snr {
            let corr: Vec<String> = agg
                .mean_correlations
                .iter()
                .map(|(p, c)| format!("{p}:{c:.4}"))
                .collect();
            println!(
                "{},{},{},{}",
                agg.snr_db,
                agg.valid,
                agg.mean_max_nondivisor_strength.map_or(String::new(), |s| format!("{s:.3e}")),
                corr.join(";")
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Bench(a) => cmd_experiment(a, "bench"),
        Command::Hitmiss(a) => cmd_experiment(a, "hitmiss"),
        Command::Recon(a) => cmd_experiment(a, "recon"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
