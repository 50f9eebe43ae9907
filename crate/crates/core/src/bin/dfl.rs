use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dfedsgpsm::config::ExperimentConfig;
use dfedsgpsm::math::SeededRng;
use dfedsgpsm::protocol::{run_experiment_with, Mixing};
use dfedsgpsm::topology::{check_b_connectivity, gen_round, NeighborSelection, TopologySchedule};
use dfedsgpsm::verify::run_suite;
use dfedsgpsm::Result;

#[derive(Parser)]
#[command(name = "dfl", version, about = "Decentralized federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Replace an existing manifest in the output directory.
        #[arg(long)]
        overwrite: bool,
    },
    /// Run a grid over one hyperparameter.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Config key to vary, e.g. `rho` or `dirichlet-alpha`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        overwrite: bool,
    },
    /// Graph utilities.
    Topology {
        #[command(subcommand)]
        command: TopologyCommand,
    },
    /// Run the oracle suite.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum TopologyCommand {
    /// Check that every window of B consecutive rounds is strongly connected.
    Check {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set rho=0.2 --set synthetic.classes=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| dfedsgpsm::Error::Config(format!("override `{o}` is not KEY=VALUE")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(a) = &self.algorithm {
            cfg.algorithm = a.parse()?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.rounds {
            cfg.rounds = r;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn summary(label: &str, series: &[dfedsgpsm::RoundMetrics]) {
    if let Some(last) = series.last() {
        let acc = last.test_accuracy.map_or("-".to_string(), |a| format!("{:.4}", a));
        println!(
            "{label}: round {} train_loss {:.6} test_acc {} grad_norm_sq {:.3e} consensus {:.3e}",
            last.round, last.train_loss, acc, last.grad_norm_sq, last.consensus_error
        );
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { cfg, overwrite } => {
            let cfg = cfg.resolve()?;
            let series = run_experiment_with(&cfg, overwrite)?;
            summary(cfg.algorithm.name(), &series);
            Ok(true)
        }
        Command::Sweep {
            cfg,
            param,
            values,
            overwrite,
        } => {
            let base = cfg.resolve()?;
            for v in values {
                let mut c = base.clone();
                c.set(&param, &v)?;
                if let Some(out) = &base.out {
                    c.out = Some(out.join(format!("{param}={v}")));
                }
                let series = run_experiment_with(&c, overwrite)?;
                summary(&format!("{param}={v}"), &series);
            }
            Ok(true)
        }
        Command::Topology {
            command: TopologyCommand::Check { cfg },
        } => {
            let cfg = cfg.resolve()?;
            if cfg.algorithm.mixing() == Mixing::Server {
                println!("{} uses a server, no graph to check", cfg.algorithm);
                return Ok(true);
            }
            let sched = TopologySchedule {
                n: cfg.clients,
                generator: cfg.generator(),
                time_varying: cfg.time_varying,
                window: cfg.window,
            };
            let rounds = (0..cfg.rounds.max(cfg.window))
                .map(|t| gen_round(&sched, t, SeededRng::new(cfg.seed), NeighborSelection::Uniform))
                .collect::<Result<Vec<_>>>()?;
            let worst = rounds.iter().map(|g| g.column_residual()).fold(0.0, f64::max);
            let c = check_b_connectivity(&rounds, cfg.window)?;
            println!(
                "{:?}: {} rounds, B={}, max column residual {:.1e}",
                sched.generator,
                rounds.len(),
                cfg.window,
                worst
            );
            match c.failing_window {
                None => println!("every window is strongly connected"),
                Some(w) => println!("window starting at round {w} is not strongly connected"),
            }
            Ok(c.connected)
        }
        Command::Verify { seed } => {
            let reports = run_suite(seed);
            for r in &reports {
                println!("{r}");
            }
            Ok(reports.iter().all(|r| r.pass))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
