use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use pens_core::config::{parse_config, RunConfig};
use pens_core::decay::{
    default_fit_channels, fit_power_law, report_from_series, saturation_time, WindowPolicy,
};
use pens_core::diagnostics::sample_channels;
use pens_core::envelope::{builtin_profiles, envelope_series};
use pens_core::mild::compare_with_stepper;
use pens_core::snapshot::{read_snapshot, write_snapshot};
use pens_core::solver::run;
use pens_core::timeseries::{SeriesMeta, TimeSeries};
use pens_core::PensError;

#[derive(Debug, Parser)]
#[command(name = "pens", version, about = "Pressureless Euler / Navier-Stokes decay laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a configuration, writing series.csv and initial/final snapshots.
    Run {
        /// Config file (defaults for every key if omitted).
        config: Option<PathBuf>,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        dry_run: bool,
        /// Override out_dir from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print every diagnostic channel of a snapshot.
    Diagnose {
        snapshot: PathBuf,
        /// Config supplying m and s (defaults for the snapshot dimension otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit power laws to a series CSV and print the decay report as JSON.
    FitDecay {
        csv: PathBuf,
        /// Config the series was produced with.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fit window `t0,t1` (default: [max(1, 50 dt_max), min(t_sat, t_end)]).
        #[arg(long, value_parser = parse_pair)]
        window: Option<(f64, f64)>,
        /// Comma-separated channels to fit.
        #[arg(long, value_delimiter = ',')]
        channels: Vec<String>,
    },
    /// Compare the stepper with the Picard mild-form oracle.
    CompareMild {
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
    },
    /// Fit the decay exponent of a continuous heat envelope.
    Envelope {
        #[arg(long, default_value = "gaussian")]
        profile: String,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0.0)]
        k: f64,
        #[arg(long, default_value_t = 1e2)]
        t0: f64,
        #[arg(long, default_value_t = 1e4)]
        t1: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected t0,t1")?;
    let a = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
    let b = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
    Ok((a, b))
}

type CliResult = Result<(), String>;

fn load_config(path: Option<&Path>) -> Result<RunConfig, String> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| format!("io: {}: {e}", p.display()))?,
        None => String::new(),
    };
    parse_config(&text).map_err(|e| e.to_string())
}

fn pe(e: PensError) -> String {
    e.to_string()
}

fn cmd_run(config: Option<PathBuf>, dry_run: bool, out_dir: Option<PathBuf>) -> CliResult {
    let mut cfg = load_config(config.as_deref())?;
    if let Some(dir) = out_dir {
        cfg.out_dir = dir;
    }
    if dry_run {
        print!("{}", cfg.to_config_string());
        return Ok(());
    }
    let out = run(&cfg.solver, &cfg.diagnostics).map_err(pe)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| format!("io: {}: {e}", cfg.out_dir.display()))?;
    let series = match &cfg.channels {
        Some(ch) => out.series.select(ch).map_err(pe)?,
        None => out.series,
    };
    let csv = cfg.out_dir.join("series.csv");
    let file = fs::File::create(&csv).map_err(|e| format!("io: {}: {e}", csv.display()))?;
    series.write_csv(std::io::BufWriter::new(file)).map_err(pe)?;
    write_snapshot(&out.initial, cfg.out_dir.join("initial.snap")).map_err(pe)?;
    write_snapshot(&out.final_state, cfg.out_dir.join("final.snap")).map_err(pe)?;
    println!(
        "{}",
        json!({
            "steps": out.steps,
            "samples": series.len(),
            "t_end": out.final_state.t,
            "series": csv.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_diagnose(snapshot: PathBuf, config: Option<PathBuf>) -> CliResult {
    let state = read_snapshot(&snapshot).map_err(pe)?;
    let mut settings = pens_core::diagnostics::DiagnosticSettings::for_dim(state.grid().dim());
    if config.is_some() {
        let cfg = load_config(config.as_deref())?;
        settings.m = cfg.diagnostics.m;
        settings.s = cfg.diagnostics.s;
    }
    let channels = sample_channels(&state, &settings).map_err(pe)?;
    let mut buf = ryu::Buffer::new();
    println!("t\t{}", buf.format(state.t));
    println!("mass\t{}", buf.format(state.mass()));
    println!("min_rho\t{}", buf.format(state.min_rho()));
    for (name, value) in channels {
        println!("{name}\t{}", buf.format(value));
    }
    Ok(())
}

fn cmd_fit_decay(
    csv: PathBuf,
    config: Option<PathBuf>,
    window: Option<(f64, f64)>,
    channels: Vec<String>,
) -> CliResult {
    let cfg = load_config(config.as_deref())?;
    let meta = SeriesMeta { d: cfg.solver.grid.dim(), m: cfg.diagnostics.m, s: cfg.diagnostics.s };
    let file = fs::File::open(&csv).map_err(|e| format!("io: {}: {e}", csv.display()))?;
    let series = TimeSeries::read_csv(BufReader::new(file), meta).map_err(pe)?;
    let t_sat = saturation_time(cfg.solver.grid.length());
    let t_end = *series.times().last().ok_or("series is empty")?;
    let policy = match window {
        Some((a, b)) => WindowPolicy::Explicit(a, b),
        None => WindowPolicy::Default,
    };
    let window = policy.resolve(cfg.solver.dt_max, t_sat, t_end).map_err(pe)?;
    let channels = if channels.is_empty() {
        default_fit_channels(&cfg.diagnostics)
            .into_iter()
            .filter(|c| series.has_channel(c))
            .collect()
    } else {
        channels
    };
    let report = report_from_series(&series, &cfg.diagnostics, &channels, window, t_sat).map_err(pe)?;
    println!("{}", report.to_json());
    Ok(())
}

fn cmd_compare_mild(config: Option<PathBuf>, tol: f64, max_iter: usize) -> CliResult {
    let cfg = load_config(config.as_deref())?;
    let cmp = compare_with_stepper(&cfg.solver, tol, max_iter).map_err(pe)?;
    let out = json!({
        "final_relative_v": cmp.final_relative_v,
        "max_relative_v": cmp.max_relative_v,
        "iterates": cmp.picard.history.len(),
        "history": cmp.picard.history,
        "contraction_ratios": cmp.picard.contraction_ratios(),
        "residual": cmp.picard.residual,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn cmd_envelope(profile: String, d: usize, k: f64, t0: f64, t1: f64, points: usize) -> CliResult {
    builtin_profiles().get(&profile).map_err(pe)?;
    let (times, values) = envelope_series(&profile, d, k, t0, t1, points).map_err(pe)?;
    let fit = fit_power_law(&times, &values, (t0, t1)).map_err(pe)?;
    let expected = -(d as f64 / 4.0 + k / 2.0);
    let out = json!({
        "profile": profile,
        "d": d,
        "k": k,
        "window": [t0, t1],
        "exponent": fit.exponent,
        "expected": expected,
        "residual": fit.residual,
        "values": times.iter().zip(&values).map(|(t, v)| [*t, *v]).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", first.trim());
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Run { config, dry_run, out_dir } => cmd_run(config, dry_run, out_dir),
        Command::Diagnose { snapshot, config } => cmd_diagnose(snapshot, config),
        Command::FitDecay { csv, config, window, channels } => cmd_fit_decay(csv, config, window, channels),
        Command::CompareMild { config, tol, max_iter } => cmd_compare_mild(config, tol, max_iter),
        Command::Envelope { profile, d, k, t0, t1, points } => cmd_envelope(profile, d, k, t0, t1, points),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
