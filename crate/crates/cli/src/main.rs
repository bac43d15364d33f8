mod settings;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use settings::Settings;
use zsnas::bench::{compare_report, load_bench, read_entries, tau_sweep};
use zsnas::hardware::{load_latency_table, CostModel, LatencyTable, HEADER, OVERHEAD_OP};
use zsnas::proxies::score_arch;
use zsnas::search::run_search;
use zsnas::space::enumerate_space;
use zsnas::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "zsnas", version, about = "Training-free, hardware-aware cell architecture search")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Score one architecture: κ, linear regions, FLOPs, params, latency.
    Score(Settings),
    /// Prune the supernet down to one architecture.
    Search(Settings),
    /// List every architecture string in index order.
    Enumerate(Settings),
    /// FLOPs and parameter breakdown of one architecture.
    Flops(Settings),
    /// Latency breakdown of one architecture (or a table template).
    Latency(Settings),
    /// Kendall τ of a proxy against benchmark accuracies over a sweep.
    Tau(Settings),
    /// Comparison table of several models.
    Report(Settings),
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Input => 2,
            ErrorKind::Lut => 3,
            ErrorKind::Infeasible => 4,
            ErrorKind::Internal => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure::input(format!("{}: {e}", path.display()))
    }
}

type Outcome = Result<(), Failure>;

/// A closed pipe (`zsnas enumerate | head`) ends the run quietly.
fn write_failure(e: io::Error) -> Failure {
    if e.kind() == io::ErrorKind::BrokenPipe {
        std::process::exit(0);
    }
    Failure::input(format!("write failed: {e}"))
}

/// Destination of the primary output: `--out` or stdout.
struct Sink {
    w: Box<dyn Write>,
    to_file: bool,
}

impl Sink {
    fn open(path: Option<&Path>) -> Result<Self, Failure> {
        Ok(match path {
            Some(p) => Sink {
                w: Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::io(p, e))?)),
                to_file: true,
            },
            None => Sink {
                w: Box::new(BufWriter::new(io::stdout())),
                to_file: false,
            },
        })
    }

    fn line(&mut self, s: &str) -> Outcome {
        writeln!(self.w, "{s}").map_err(write_failure)
    }

    fn json<T: Serialize>(&mut self, v: &T) -> Outcome {
        let s = serde_json::to_string(v).map_err(|e| Failure::input(e.to_string()))?;
        self.line(&s)
    }

    fn finish(mut self) -> Outcome {
        self.w.flush().map_err(write_failure)
    }
}

fn load_lut(s: &Settings) -> Result<Option<LatencyTable>, Failure> {
    Ok(s.lut.as_deref().map(load_latency_table).transpose()?)
}

fn cmd_score(s: &Settings) -> Outcome {
    let a = s.require_arch()?;
    let lut = load_lut(s)?;
    let m = s.macro_config()?;
    let proxy = s.proxy_config()?;
    let mut out = Sink::open(s.out.as_deref())?;
    let scores = score_arch(&a, &m, &proxy, lut.as_ref())?;
    out.json(&json!({ "arch": a.to_string(), "scores": scores }))?;
    out.finish()
}

fn cmd_search(s: &Settings) -> Outcome {
    let lut = load_lut(s)?;
    let cfg = s.search_config()?;
    let mut out = Sink::open(s.out.as_deref())?;
    let report = run_search(&cfg, lut.as_ref())?;
    for p in &report.prunes {
        out.json(p)?;
    }
    out.json(&json!({
        "final": true,
        "arch": report.arch,
        "scores": report.scores,
        "evaluations": report.evaluations,
        "sweeps": report.sweeps,
        "prunes": report.prunes.len(),
        "wall_time_s": report.wall_time_s,
        "config": cfg,
    }))?;
    let to_file = out.to_file;
    out.finish()?;
    if to_file {
        println!("{}", report.arch);
    } else {
        eprintln!("{}", report.arch);
    }
    Ok(())
}

fn cmd_enumerate(s: &Settings) -> Outcome {
    let mut out = Sink::open(s.out.as_deref())?;
    for a in enumerate_space() {
        out.line(&a.to_string())?;
    }
    out.finish()
}

fn cmd_flops(s: &Settings) -> Outcome {
    let a = s.require_arch()?;
    let m = s.macro_config()?;
    let mut out = Sink::open(s.out.as_deref())?;
    let b = CostModel::new(&m, None)?.breakdown(&a)?;
    out.json(&json!({ "arch": a.to_string(), "flops": b.flops, "params": b.params, "records": b.records }))?;
    out.finish()
}

fn cmd_latency(s: &Settings) -> Outcome {
    let m = s.macro_config()?;
    if s.template.unwrap_or(false) {
        let mut out = Sink::open(s.out.as_deref())?;
        out.line(&HEADER.join(","))?;
        out.line(&format!("{OVERHEAD_OP},0,0,0,0,0,0"))?;
        for k in CostModel::new(&m, None)?.table_keys() {
            out.line(&format!("{},{},{},{},{},{},0", k.op, k.c_in, k.c_out, k.h, k.w, k.stride))?;
        }
        return out.finish();
    }
    let a = s.require_arch()?;
    let lut = load_lut(s)?.ok_or(Error::MissingLut)?;
    let mut out = Sink::open(s.out.as_deref())?;
    let b = CostModel::new(&m, Some(&lut))?.breakdown(&a)?;
    out.json(&json!({
        "arch": a.to_string(),
        "device": lut.device_label(),
        "latency_us": b.latency_us,
        "records": b.records,
    }))?;
    out.finish()
}

fn cmd_tau(s: &Settings) -> Outcome {
    let path = s.bench.as_deref().ok_or_else(|| Failure::input("tau needs --bench"))?;
    let records = load_bench(path)?;
    let lut = load_lut(s)?;
    let cfg = s.tau_config()?;
    let (proxy, axis, values) = s.sweep()?;
    let mut out = Sink::open(s.out.as_deref())?;
    let r = tau_sweep(&records, proxy, axis, &values, &cfg, lut.as_ref())?;
    for p in &r.points {
        out.json(&json!({
            "proxy": r.proxy,
            "axis": r.axis,
            "axis_value": p.axis_value,
            "tau": p.tau,
            "sample_size": r.sample_size,
            "seed": r.seed,
        }))?;
    }
    out.finish()
}

fn cmd_report(s: &Settings) -> Outcome {
    let path = s.entries.as_deref().ok_or_else(|| Failure::input("report needs --entries"))?;
    let entries = read_entries(File::open(path).map_err(|e| Failure::io(path, e))?)?;
    let lut = load_lut(s)?;
    let m = s.macro_config()?;
    let report = compare_report(&entries, &m, lut.as_ref())?;
    print!("{}", report.to_table());
    if let Some(p) = s.out.as_deref() {
        let mut out = Sink::open(Some(p))?;
        for row in &report.rows {
            out.json(row)?;
        }
        out.finish()?;
    }
    Ok(())
}

fn run(verb: &Verb) -> Outcome {
    let (s, f): (&Settings, fn(&Settings) -> Outcome) = match verb {
        Verb::Score(s) => (s, cmd_score),
        Verb::Search(s) => (s, cmd_search),
        Verb::Enumerate(s) => (s, cmd_enumerate),
        Verb::Flops(s) => (s, cmd_flops),
        Verb::Latency(s) => (s, cmd_latency),
        Verb::Tau(s) => (s, cmd_tau),
        Verb::Report(s) => (s, cmd_report),
    };
    let s = s.clone().with_config_file()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(s.threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::input(e.to_string()))?;
    pool.install(|| f(&s))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
