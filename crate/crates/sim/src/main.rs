use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fdsim::emit::{to_csv, write_file, Document};
use fdsim::model::Context;
use fdsim::sweep::{phase_name, run_single, sweep_power, sweep_rho, with_threads, SingleReport, SweepResult};
use fdsim::{validate, ScenarioConfig, SimError};
use fdsim_core::channel::watts_to_dbm;
use fdsim_core::Phase;

#[derive(Parser)]
#[command(name = "fdsim", version = env!("FDSIM_GIT_DESCRIBE"), about = "Energy-recycling full-duplex link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean eta_R and eta_E over the rho grid at the configured power.
    SweepRho(Common),
    /// Optimal rho, eta_R and eta_E over the power grid.
    SweepPower(Common),
    /// Verbose dump of one realization at one rho.
    Single {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Realization index within the seed's stream family.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Run the invariant suite on `--realizations` draws (default 20).
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; the shipped preset when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads; all cores when absent.
    #[arg(long, env = "FD_SIM_THREADS")]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = PhaseArg::Both)]
    phase: PhaseArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Forward,
    Backward,
    Both,
}

impl PhaseArg {
    fn phases(self) -> Vec<Phase> {
        match self {
            Self::Forward => vec![Phase::Forward],
            Self::Backward => vec![Phase::Backward],
            Self::Both => vec![Phase::Forward, Phase::Backward],
        }
    }
}

impl Common {
    fn config(&self) -> Result<ScenarioConfig, SimError> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.realizations {
            cfg.n_realizations = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn phase_path(out: &Path, phase: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    out.with_file_name(format!("{stem}_{phase}{ext}"))
}

fn emit(common: &Common, cfg: &ScenarioConfig, results: Vec<SweepResult>) -> Result<(), SimError> {
    match common.format {
        Format::Json => {
            let text = Document::new(cfg, results).to_json();
            match &common.out {
                Some(path) => write_file(path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Format::Csv => match &common.out {
            Some(path) if results.len() == 1 => write_file(path, &to_csv(&results[0])),
            Some(path) => {
                for r in &results {
                    write_file(&phase_path(path, &r.phase), &to_csv(r))?;
                }
                Ok(())
            }
            None => {
                let parts: Vec<String> = results.iter().map(to_csv).collect();
                print!("{}", parts.join("\n"));
                Ok(())
            }
        },
    }
}

fn sweep(common: &Common, run: fn(&Context, Phase) -> Result<SweepResult, SimError>) -> Result<(), SimError> {
    let cfg = common.config()?;
    let ctx = Context::new(&cfg)?;
    let phases = common.phase.phases();
    let results = with_threads(common.threads, || phases.iter().map(|&p| run(&ctx, p)).collect::<Result<Vec<_>, _>>())??;
    for r in &results {
        if r.resample_flag {
            eprintln!("warning: {} phase resampled {} degenerate draws", r.phase, r.resamples);
        }
    }
    emit(common, &cfg, results)
}

fn single_text(report: &SingleReport, rho: f64) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "realization {} (resampled {} times), rho = {rho}", report.index, report.resamples);
    let energy = |t: &fdsim_core::channel::ChannelTaps| t.energy();
    let d = &report.draw;
    let _ = writeln!(
        s,
        "tap energies: an11 {:.4} an12 {:.4} an21 {:.4} an22 {:.4} hs {:.4} m1 {:.4} m2 {:.4}",
        energy(&d.an[0][0]),
        energy(&d.an[0][1]),
        energy(&d.an[1][0]),
        energy(&d.an[1][1]),
        energy(&d.hs),
        energy(&d.multipath[0]),
        energy(&d.multipath[1])
    );
    for (phase, p, point, base) in &report.phases {
        let _ = writeln!(s, "{} phase, P = {:.2} dBm, regime {:?}", phase_name(*phase), watts_to_dbm(*p), point.regime);
        for (name, now, then) in
            [("ofdm", &point.ofdm, &base.ofdm), ("signaling", &point.signaling, &base.signaling)]
        {
            let active = now.allocation.per_channel.iter().filter(|&&x| x > 0.0).count();
            let _ = writeln!(
                s,
                "  {name:<9} rate {:.6e} bit/use, baseline {:.6e}, eta_R {:.6}, active channels {active}/{}",
                now.rate,
                then.rate,
                now.rate / then.rate,
                now.allocation.per_channel.len()
            );
        }
        let e = &point.energy;
        let _ = writeln!(
            s,
            "  energy    exact {:.6e} J, approx {:.6e} J, eta_E {:.6e}",
            e.exact, e.approx, e.eta_e
        );
    }
    s
}

fn single(common: &Common, rho: f64, index: u64) -> Result<(), SimError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(SimError::Config("rho must lie in [0, 1]".into()));
    }
    let cfg = common.config()?;
    let ctx = Context::new(&cfg)?;
    let report = run_single(&ctx, index, rho, &common.phase.phases())?;
    let text = single_text(&report, rho);
    match &common.out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_validate(common: &Common) -> Result<bool, SimError> {
    let cfg = common.config()?;
    let ctx = Context::new(&cfg)?;
    let draws = common.realizations.unwrap_or(20) as u64;
    let checks = validate::run(&ctx, draws)?;
    let mut text = String::new();
    for c in &checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        text.push_str(&format!("{status} {:<32} worst {:.3e} limit {:.1e}\n", c.name, c.worst, c.limit));
    }
    match &common.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(checks.iter().all(|c| c.passed()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::SweepRho(c) => sweep(c, sweep_rho),
        Command::SweepPower(c) => sweep(c, sweep_power),
        Command::Single { common, rho, index } => single(common, *rho, *index),
        Command::Validate(c) => match run_validate(c) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
