//! `risd2d`: single-draw solves, Monte Carlo sweeps and the RIS power table.
//!
//! Exit status: 0 on success, 2 when some sweep axis value had no feasible
//! draw for some scheme, 1 on any error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use risd2d_core::channel::ConfigFile;
use risd2d_core::ee_optimizer::{per_element_power, RisPowerModel};
use risd2d_core::harness::{
    draw_seed, emit_results, parse_feasible_set, realization, run_scheme, run_sweep, Axis, Format, ResultRow,
    Scheme, SweepSpec,
};
use risd2d_core::se_optimizer::{FeasibleSet, Metric, SolveReport};
use risd2d_core::{default_topology, SystemConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "risd2d", version, about = "Resource allocation for RIS-assisted D2D underlay networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one channel draw and print the report.
    Solve(SolveArgs),
    /// Average one or more schemes over many draws along an axis.
    Sweep(SweepArgs),
    /// Print the per-element RIS power (mW) for each element count and bit depth.
    RisPower(RisPowerArgs),
}

/// Options shared by `solve` and `sweep`.
#[derive(Args)]
struct Common {
    /// Scenario file (TOML); defaults to the reference cell.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// se or ee.
    #[arg(long)]
    metric: Option<String>,
    /// f1, f2, f3 (at --bits) or f3/B.
    #[arg(long)]
    feasible_set: Option<String>,
    /// Phase-shifter resolution: the F3 grid and the RIS power budget.
    #[arg(long)]
    bits: Option<u32>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "proposed")]
    scheme: String,
    /// Which draw of a sweep with the same seed to reproduce.
    #[arg(long, default_value_t = 0)]
    draw: usize,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
    /// Write the objective after each outer iteration, one value per line.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    realizations: Option<usize>,
    /// p_max (dBm), m, b, r_min_c (bps/Hz), rician_factor or k.
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Comma-separated: proposed, no_ris, random_phase, ideal_pairing.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long)]
    out: PathBuf,
    /// csv or json; inferred from --out when omitted.
    #[arg(long)]
    format: Option<String>,
    /// Mean objective per outer iteration (single axis value only).
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct RisPowerArgs {
    /// Comma-separated element counts.
    #[arg(long, value_delimiter = ',', default_value = "200,500,1000")]
    elements: Vec<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::RisPower(a) => ris_power_table(a),
    }
}

fn load(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(ConfigFile {
            system: default_topology(),
            sweep: Default::default(),
        }),
    }
}

/// Apply `--bits` to the scenario and resolve the feasible set against it.
fn resolve(common: &Common, cfg: &mut SystemConfig, default_fs: FeasibleSet) -> Result<FeasibleSet> {
    if let Some(b) = common.bits {
        cfg.bits = b;
        cfg.validate()?;
    }
    Ok(match &common.feasible_set {
        Some(s) => parse_feasible_set(s, cfg.bits)?,
        None => match default_fs {
            FeasibleSet::F3(_) if common.bits.is_some() => FeasibleSet::F3(cfg.bits),
            fs => fs,
        },
    })
}

fn solve(a: SolveArgs) -> Result<ExitCode> {
    let mut cfg = load(a.common.config.as_deref())?.system;
    let fs = resolve(&a.common, &mut cfg, FeasibleSet::F1)?;
    let metric: Metric = a.common.metric.as_deref().unwrap_or("se").parse()?;
    let scheme: Scheme = a.scheme.parse()?;
    let seed = a.common.seed.unwrap_or(cfg.seed);
    cfg.seed = draw_seed(seed, a.draw);
    let ch = realization(&cfg, cfg.seed)?;
    let report = run_scheme(scheme, &ch, &cfg, metric, fs)?;

    if let Some(path) = &a.trace_out {
        let mut out = create(path)?;
        for v in &report.trace {
            writeln!(out, "{v:.9e}")?;
        }
        out.flush()?;
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match a.format {
        ReportFormat::Text => print_text(&mut out, scheme, seed, a.draw, &report)?,
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &report_json(scheme, seed, a.draw, &report))?;
            writeln!(out)?;
        }
    }
    Ok(if report.feasible { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn print_text(out: &mut impl Write, scheme: Scheme, seed: u64, draw: usize, r: &SolveReport) -> io::Result<()> {
    writeln!(out, "scheme            {scheme}")?;
    writeln!(out, "metric            {}", r.metric)?;
    writeln!(out, "feasible set      {}", r.feasible_set)?;
    writeln!(out, "seed / draw       {seed} / {draw} (draw seed {})", r.seed)?;
    writeln!(out, "feasible          {}", r.feasible)?;
    if !r.feasible {
        return Ok(());
    }
    writeln!(out, "objective         {:.6}", r.objective)?;
    writeln!(out, "sum rate          {:.6} bps/Hz", r.sum_rate)?;
    writeln!(out, "energy efficiency {:.6} bps/J/Hz", r.energy_efficiency)?;
    writeln!(out, "outer iterations  {}", r.iterations)?;
    if let Some(p) = &r.pairing {
        writeln!(out, "pairing (D2D→CU)  {:?}", p.as_slice())?;
    }
    if let Some(a) = &r.allocation {
        let mw: Vec<String> = a.p.iter().map(|p| format!("{:.3}", p * 1e3)).collect();
        writeln!(out, "powers (mW)       [{}]", mw.join(", "))?;
        let mean_amp = a.theta.iter().map(|z| z.norm()).sum::<f64>() / a.theta.len() as f64;
        writeln!(out, "mean |θ|          {mean_amp:.4}")?;
    }
    if r.pairing_fallback {
        writeln!(out, "note              RCS pairing infeasible; fell back to another pairing")?;
    }
    if r.repaired {
        writeln!(out, "note              projected reflection needed a power repair")?;
    }
    writeln!(out, "elapsed           {:.3} s", r.elapsed.as_secs_f64())
}

fn report_json(scheme: Scheme, seed: u64, draw: usize, r: &SolveReport) -> serde_json::Value {
    let finite = |x: f64| x.is_finite().then_some(x);
    json!({
        "scheme": scheme.name(),
        "metric": r.metric.to_string(),
        "feasible_set": r.feasible_set.to_string(),
        "seed": seed,
        "draw": draw,
        "draw_seed": r.seed,
        "feasible": r.feasible,
        "objective": finite(r.objective),
        "sum_rate": finite(r.sum_rate),
        "energy_efficiency": finite(r.energy_efficiency),
        "iterations": r.iterations,
        "trace": r.trace,
        "pairing": r.pairing.as_ref().map(|p| p.as_slice().to_vec()),
        "powers_w": r.allocation.as_ref().map(|a| a.p.as_slice().to_vec()),
        "theta": r.allocation.as_ref().map(|a| a.theta.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()),
        "pairing_fallback": r.pairing_fallback,
        "repaired": r.repaired,
    })
}

fn sweep(a: SweepArgs) -> Result<ExitCode> {
    let file = load(a.common.config.as_deref())?;
    let mut base = file.system;
    let table_fs = file.sweep.get("feasible_set").and_then(|v| v.as_str()).map(str::to_owned);
    if let Some(b) = a.common.bits {
        base.bits = b;
    }
    let mut spec = SweepSpec::from_table(base, &file.sweep)?;
    // Re-resolve a bare `f3` in the file against an overridden bit depth.
    if let (Some(fs), Some(_)) = (&table_fs, a.common.bits) {
        spec.feasible_set = parse_feasible_set(fs, spec.base.bits)?;
    }
    if let Some(s) = &a.common.feasible_set {
        spec.feasible_set = parse_feasible_set(s, spec.base.bits)?;
    }
    if let Some(s) = a.common.seed {
        spec.seed = s;
    }
    if let Some(m) = &a.common.metric {
        spec.metric = m.parse()?;
    }
    if let Some(n) = a.realizations {
        spec.realizations = n;
    }
    if let Some(ax) = &a.axis {
        spec.axis = ax.parse::<Axis>()?;
    }
    if let Some(v) = a.values {
        spec.values = v;
    }
    if let Some(s) = &a.schemes {
        spec.schemes = s.iter().map(|x| x.parse()).collect::<Result<_, _>>()?;
    }
    if a.trace_out.is_some() && spec.values.len() != 1 {
        bail!("--trace-out needs exactly one axis value (got {})", spec.values.len());
    }
    let format = match &a.format {
        Some(f) => f.parse()?,
        None => infer_format(&a.out),
    };

    let out = run_sweep(&spec)?;
    for f in &out.failures {
        eprintln!(
            "warning: {} draw {} (seed {}) at {}={} failed: {}",
            f.scheme, f.draw, f.seed, spec.axis, f.axis_value, f.message
        );
    }
    emit_results(&out.rows, format, &a.out)?;
    if let Some(path) = &a.trace_out {
        emit_results(&out.traces, infer_format(path), path)?;
    }
    print_summary(&out.rows);

    let infeasible = out.infeasible_values();
    if !infeasible.is_empty() {
        eprintln!("warning: no feasible draw for some scheme at {}={infeasible:?}", spec.axis);
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn infer_format(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    }
}

fn print_summary(rows: &[ResultRow]) {
    eprintln!("{:<14} {:>10} {:>12} {:>10} {:>9} {:>7}", "scheme", "value", "mean", "stderr", "feasible", "iters");
    for r in rows {
        eprintln!(
            "{:<14} {:>10} {:>12.4} {:>10.4} {:>9.3} {:>7.2}",
            r.scheme, r.axis_value, r.mean, r.stderr, r.feasibility_rate, r.mean_iterations
        );
    }
}

fn ris_power_table(a: RisPowerArgs) -> Result<ExitCode> {
    let cfg = load(a.config.as_deref())?.system;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    write!(out, "{:>6}", "M \\ B")?;
    for b in 1..=10 {
        write!(out, " {b:>8}")?;
    }
    writeln!(out)?;
    for &m in &a.elements {
        if m == 0 {
            bail!("element count must be positive");
        }
        write!(out, "{m:>6}")?;
        for b in 1..=10 {
            let model = RisPowerModel {
                elements: m,
                ..RisPowerModel::from_config(&cfg, b)
            };
            write!(out, " {:>8.3}", per_element_power(&model)? * 1e3)?;
        }
        writeln!(out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}
