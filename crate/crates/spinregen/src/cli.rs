//! Command-line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{load_config, LoadedConfig, RunConfig};
use crate::error::{Error, Result};
use crate::output::{emit_traces, write_table, Format, RunMeta, RunSummary, Table};
use crate::protocol::{
    calibrate_experiment, fig2_experiment, lifetime_scan, run_sequence, tp_experiment,
};
use crate::regeneration::{noise_budget, oracle_grid_check};

#[derive(Parser, Debug)]
#[command(
    name = "spinregen",
    version,
    about = "Warm-vapor Raman memory with spin-wave regeneration"
)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overrides `master_seed`.
    #[arg(long, global = true, value_name = "N",
          value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Output directory, overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Output format, overrides `output.format`.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AssistArg {
    On,
    Off,
    Both,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured pulse sequence and write its time series.
    Simulate,
    /// Pulse-train experiment: efficiency table and pulse traces.
    Fig2,
    /// Retrieval efficiency against storage time.
    LifetimeScan {
        #[arg(long, value_enum, default_value = "both")]
        assist: AssistArg,
    },
    /// Probe transmission after pump-off, with and without assisted light.
    TpScan,
    /// Fit κ so the assisted first read reaches the configured target.
    Calibrate,
    /// Gain closed forms against the number-basis oracle.
    OracleCheck,
    /// Intrinsic noise photons from raw counts and detection efficiency.
    NoiseBudget {
        /// Raw noise counts per trial.
        #[arg(long, default_value_t = 0.012)]
        raw: f64,
        /// Total detection efficiency; `memory.detection_efficiency` when omitted.
        #[arg(long)]
        eta: Option<f64>,
    },
}

/// Runs the CLI on `argv` (program name first) and returns the exit code:
/// 0 on success, 1 for usage or validation errors, 2 for runtime errors.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Context {
    loaded: LoadedConfig,
    out: PathBuf,
    format: Format,
    meta: RunMeta,
}

impl Context {
    fn config(&self) -> &RunConfig {
        &self.loaded.config
    }

    fn path(&self, stem: &str) -> PathBuf {
        self.out.join(format!("{stem}.{}", self.format.extension()))
    }

    fn summary(
        &self,
        command: &str,
        headline: BTreeMap<String, f64>,
        kappa: Option<f64>,
    ) -> Result<()> {
        let s = RunSummary {
            command: command.to_string(),
            meta: self.meta.clone(),
            config_echo: self.config().to_toml(),
            defaulted_keys: self.loaded.defaulted.clone(),
            calibrated_kappa: kappa,
            headline,
        };
        let path = self.out.join(format!("{command}_summary.json"));
        s.write(&path)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn context(cli: &Cli) -> Result<Context> {
    let mut loaded = match &cli.config {
        Some(p) => load_config(p)?,
        None => LoadedConfig {
            config: RunConfig::default(),
            defaulted: Vec::new(),
            path: None,
        },
    };
    if let Some(seed) = cli.seed {
        loaded.config.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        loaded.config.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(f) = cli.format {
        loaded.config.output.format = match f {
            FormatArg::Csv => "csv".into(),
            FormatArg::Json => "json".into(),
        };
    }
    let format = Format::parse(&loaded.config.output.format)?;
    let meta = RunMeta {
        config_sha256: loaded.config.sha256(),
        master_seed: loaded.config.master_seed,
    };
    let out = PathBuf::from(&loaded.config.output.dir);
    Ok(Context {
        loaded,
        out,
        format,
        meta,
    })
}

fn run(cli: Cli) -> Result<i32> {
    if let Command::OracleCheck = cli.command {
        return oracle_check();
    }
    let ctx = context(&cli)?;
    match cli.command {
        Command::Simulate => simulate(&ctx),
        Command::Fig2 => fig2(&ctx),
        Command::LifetimeScan { assist } => lifetime(&ctx, assist),
        Command::TpScan => tp(&ctx),
        Command::Calibrate => calibrate(&ctx),
        Command::NoiseBudget { raw, eta } => {
            let eta = eta.unwrap_or(ctx.config().memory.detection_efficiency);
            println!("{:.3}", noise_budget(raw, eta)?);
            Ok(0)
        }
        Command::OracleCheck => unreachable!(),
    }
}

fn oracle_check() -> Result<i32> {
    let check = oracle_grid_check()?;
    println!("grid points: {}", check.points.len());
    println!("max |mean error|: {:.3e}", check.max_mean_error);
    println!("max |variance error|: {:.3e}", check.max_variance_error);
    println!("max |closed form - oracle|: {:.3e}", check.max_error());
    Ok(if check.max_error() < 1e-8 { 0 } else { 2 })
}

fn simulate(ctx: &Context) -> Result<i32> {
    let c = ctx.config();
    let exp = c.to_experiment()?;
    let seq = c.to_sequence(&exp)?;
    let r = run_sequence(&seq, &exp)?;
    let path = ctx.path("traces");
    emit_traces(&r, ctx.format, &path, &ctx.meta)?;
    println!("wrote {}", path.display());
    let mut headline = BTreeMap::new();
    for (i, read) in r.reads.iter().enumerate() {
        println!(
            "read {} at {:.0} ns: efficiency {:.4}, noise {:.4} photons",
            i + 1,
            read.time * 1e9,
            read.efficiency,
            read.noise_photons
        );
        headline.insert(format!("read{}_efficiency", i + 1), read.efficiency);
        headline.insert(format!("read{}_noise_photons", i + 1), read.noise_photons);
    }
    headline.insert("leaked_fraction".into(), r.leaked_fraction);
    headline.insert("lost".into(), r.budget.lost);
    headline.insert("remaining".into(), r.remaining);
    ctx.summary("simulate", headline, None)?;
    Ok(0)
}

fn fig2(ctx: &Context) -> Result<i32> {
    let exp = ctx.config().to_experiment()?;
    let f = fig2_experiment(&exp)?;
    let [s_in, s_leak, no_a, a, a_no_sin] = f.traces.clone();
    let table = Table::new()
        .with("time_s", f.time_s.clone())
        .with("S_in", s_in)
        .with("S_leak", s_leak)
        .with("S_out_noA", no_a)
        .with("S_out_A", a)
        .with("S_out_A_noSin", a_no_sin);
    let path = ctx.path("fig2");
    write_table(&table, ctx.format, &ctx.meta, &path)?;
    println!("wrote {}", path.display());
    println!("{:<15} {:>12} {:>12}", "", "vs input", "vs stored");
    let mut headline = BTreeMap::new();
    for (name, input, stored) in f.table.rows() {
        println!("{name:<15} {input:>12.5} {stored:>12.5}");
        headline.insert(name.to_string(), input);
        if stored.is_finite() {
            headline.insert(format!("{name}_vs_stored"), stored);
        }
    }
    println!(
        "noise photons without signal: {:.4}",
        f.table.noise_photons_a_no_sin
    );
    println!(
        "shape residual noA {:.4}, A {:.4}",
        f.table.shape_residual_no_a, f.table.shape_residual_a
    );
    headline.insert(
        "noise_photons_A_noSin".into(),
        f.table.noise_photons_a_no_sin,
    );
    headline.insert("shape_residual_noA".into(), f.table.shape_residual_no_a);
    headline.insert("shape_residual_A".into(), f.table.shape_residual_a);
    ctx.summary("fig2", headline, None)?;
    Ok(0)
}

fn lifetime(ctx: &Context, assist: AssistArg) -> Result<i32> {
    let exp = ctx.config().to_experiment()?;
    let mut headline = BTreeMap::new();
    let runs: Vec<(bool, &[f64], &str)> = match assist {
        AssistArg::Off => vec![(false, &exp.lifetime.delays_no_assist, "lifetime_noA")],
        AssistArg::On => vec![(true, &exp.lifetime.delays_assist, "lifetime_A")],
        AssistArg::Both => vec![
            (false, &exp.lifetime.delays_no_assist, "lifetime_noA"),
            (true, &exp.lifetime.delays_assist, "lifetime_A"),
        ],
    };
    for (on, delays, stem) in runs {
        let c = lifetime_scan(delays, on, &exp)?;
        let table = Table::new()
            .with("delay_s", c.delays.clone())
            .with("retrieval", c.retrieval.clone());
        let path = ctx.path(stem);
        write_table(&table, ctx.format, &ctx.meta, &path)?;
        println!("wrote {}", path.display());
        let key = if on {
            "one_over_e_A_s"
        } else {
            "one_over_e_noA_s"
        };
        match c.one_over_e {
            Some(t) => {
                println!("{stem}: 1/e time {:.3} us", t * 1e6);
                headline.insert(key.to_string(), t);
            }
            None => println!("{stem}: RE stays above RE(0)/e over the scanned delays"),
        }
        headline.insert(
            format!("{stem}_peak"),
            c.retrieval.iter().cloned().fold(0.0, f64::max),
        );
    }
    ctx.summary("lifetime-scan", headline, None)?;
    Ok(0)
}

fn tp(ctx: &Context) -> Result<i32> {
    let exp = ctx.config().to_experiment()?;
    let dark = tp_experiment(false, &exp)?;
    let lit = tp_experiment(true, &exp)?;
    let table = Table::new()
        .with("time_s", dark.times.clone())
        .with("tp_noA", dark.transmission.clone())
        .with("tp_A", lit.transmission.clone())
        .with("pop1_noA", dark.pop1.clone())
        .with("pop1_A", lit.pop1.clone());
    let path = ctx.path("tp");
    write_table(&table, ctx.format, &ctx.meta, &path)?;
    println!("wrote {}", path.display());
    println!(
        "dark relaxation fit: {:.3} us (TP {:.4} -> {:.4})",
        dark.fit.lifetime * 1e6,
        dark.fit.initial,
        dark.fit.equilibrium
    );
    let mut headline = BTreeMap::new();
    headline.insert("dark_lifetime_fit_s".into(), dark.fit.lifetime);
    headline.insert("tp_initial".into(), dark.fit.initial);
    headline.insert("tp_equilibrium".into(), dark.fit.equilibrium);
    if let Some(t) = crate::protocol::one_over_e_time(
        &lit.times,
        &absorbance_excess(&lit.transmission, dark.fit.equilibrium),
    ) {
        headline.insert("assist_one_over_e_s".into(), t);
        println!("assisted 1/e time: {:.3} us", t * 1e6);
    }
    ctx.summary("tp-scan", headline, None)?;
    Ok(0)
}

/// |ln TP − ln TP_eq|, which relaxes to zero.
fn absorbance_excess(tp: &[f64], tp_eq: f64) -> Vec<f64> {
    tp.iter().map(|p| (p.ln() - tp_eq.ln()).abs()).collect()
}

fn calibrate(ctx: &Context) -> Result<i32> {
    let c = ctx.config();
    let exp = c.to_experiment()?;
    let cal = match calibrate_experiment(
        &exp,
        c.gain.calibration_target,
        c.gain.calibration_tolerance,
    ) {
        Ok(cal) => cal,
        Err(Error::Calibration { reason, curve }) => {
            write_curve(ctx, &curve)?;
            return Err(Error::Calibration { reason, curve });
        }
        Err(e) => return Err(e),
    };
    write_curve(ctx, &cal.curve)?;
    println!(
        "kappa = {:.6e} /s gives S_out(A) = {:.5}",
        cal.kappa, cal.achieved
    );
    let mut headline = BTreeMap::new();
    headline.insert("S_out_A".into(), cal.achieved);
    headline.insert("target".into(), c.gain.calibration_target);
    ctx.summary("calibrate", headline, Some(cal.kappa))?;
    Ok(0)
}

fn write_curve(ctx: &Context, curve: &[(f64, f64)]) -> Result<()> {
    let table = Table::new()
        .with("kappa_per_s", curve.iter().map(|c| c.0).collect())
        .with("S_out_A", curve.iter().map(|c| c.1).collect());
    let path: PathBuf = ctx.path("calibration");
    write_table(&table, ctx.format, &ctx.meta, Path::new(&path))?;
    println!("wrote {}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(cli_dispatch(["spinregen"]), 1);
        assert_eq!(cli_dispatch(["spinregen", "frobnicate"]), 1);
        assert_eq!(cli_dispatch(["spinregen", "fig2", "--format", "xml"]), 1);
    }

    #[test]
    fn noise_budget_command() {
        assert_eq!(
            cli_dispatch([
                "spinregen",
                "noise-budget",
                "--raw",
                "0.012",
                "--eta",
                "0.07"
            ]),
            0
        );
        assert_eq!(
            cli_dispatch(["spinregen", "noise-budget", "--raw", "0.012", "--eta", "0"]),
            1
        );
    }

    #[test]
    fn missing_config_is_a_runtime_error() {
        assert_eq!(
            cli_dispatch(["spinregen", "--config", "/nonexistent/run.toml", "fig2"]),
            2
        );
    }
}
