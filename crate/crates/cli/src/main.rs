use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use physid_pipeline::config::{ChainSource, ExperimentConfig, Mode};
use physid_pipeline::{demo, emit, run, sweep, PipelineError, Result};

#[derive(Parser)]
#[command(name = "physid", version, about = "Physical-coordinate identification of mechanical chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML). Defaults to the built-in benchmark
    /// for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Recorded dataset CSV (`t,u_1..,y_1..,fe_1..`) used instead of simulation.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate the configured chain and write the dataset CSV.
    Simulate,
    /// Known-input identification.
    Pssid,
    /// Output-only identification.
    Blind,
    /// Segment input estimation on the two-state demo system.
    DemoInputEst,
    /// Monte Carlo sweep over DOF counts, SNRs and seeds.
    Sweep,
}

fn config_for(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => match cli.command {
            Command::Blind => ExperimentConfig::benchmark_blind(),
            Command::DemoInputEst => ExperimentConfig::demo_default(),
            _ => ExperimentConfig::benchmark_pssid(),
        },
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.data {
        cfg.chain = ChainSource::External { external: d.clone(), dof: cfg.chain.dof() };
    }
    let wanted = match cli.command {
        Command::Pssid => Some(Mode::Pssid),
        Command::Blind => Some(Mode::Blind),
        Command::DemoInputEst => Some(Mode::InputEstimationDemo),
        Command::Simulate | Command::Sweep => None,
    };
    if let Some(m) = wanted {
        if cfg.mode != m {
            return Err(PipelineError::Config(format!("configuration mode is {:?}, subcommand needs {m:?}", cfg.mode)));
        }
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = config_for(cli)?;
    let seed = cfg.seed;
    let dir = &cli.out;
    match cli.command {
        Command::Simulate => {
            let ds = run::simulate_dataset(&cfg, seed)?;
            Ok(vec![emit::write_dataset(dir, &ds)?])
        }
        Command::Pssid => {
            let mut out = run::run_pssid(&cfg, seed)?;
            log_run(&out);
            emit::write_run(dir, &mut out)
        }
        Command::Blind => {
            let mut out = run::run_blind(&cfg, seed)?;
            log_run(&out);
            emit::write_run(dir, &mut out)
        }
        Command::DemoInputEst => {
            let mut out = demo::run_input_estimation_demo(&cfg, seed)?;
            log::info!("input estimate NRMSE {:.3e}, correlation {:.6}", out.report.nrmse, out.report.correlation);
            emit::write_demo(dir, &mut out, cfg.demo.fs_hz)
        }
        Command::Sweep => {
            let rep = sweep::sweep(&cfg)?;
            for c in &rep.cells {
                log::info!(
                    "dof {} snr {:?}: median K error {:.3e}, failures {}, pass {}",
                    c.dof,
                    c.snr_db,
                    c.median_k_rel,
                    c.failures,
                    c.pass
                );
            }
            emit::write_sweep(dir, &rep)
        }
    }
}

fn log_run(out: &run::RunOutput) {
    for (k, m) in out.report.modal.iter().enumerate() {
        log::info!("mode {}: {:.5} Hz, zeta {:.4e}", k + 1, m.f_nat_hz, m.zeta);
    }
    if let Some(e) = &out.report.errors {
        log::info!("K error {:.3e}, D error {:.3e}, f_e NRMSE {:.3e}", e.k_rel, e.d_rel, e.fe_nrmse);
    }
    for w in &out.report.diagnostics.warnings {
        log::warn!("{w}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Info })
        .parse_default_env()
        .init();
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
