use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fluid_pa::io::{parse_scale, replay, resolve_out_dir, run, Command, RunConfig, WeightConfig};
use fluid_pa::spectral::TailClosure;
use fluid_pa::{Error, Model};

#[derive(Parser)]
#[command(name = "fluid-pa", version, about = "Fluid limits of sublinear preferential attachment")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve for s* and the limit proportions a_k.
    FixedPoint(Common),
    /// Integrate the rate equations.
    Ode {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ode: OdeArgs,
    },
    /// Dominant eigenpair of the truncated generator and its adjoint.
    Spectral(Common),
    /// Simulate replicas of the chain.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Deviation from the fluid limit across network sizes.
    Study {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        /// Comma-separated scales, e.g. 1e3,1e4,1e5.
        #[arg(long, value_delimiter = ',', value_parser = scale)]
        ns: Option<Vec<u64>>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        grid_step: Option<f64>,
    },
    /// Rerun the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML file; flags override its values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory (default $FLUIDPA_OUT_DIR, then ./fluid-pa-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    model: Option<Model>,
    #[arg(short, long)]
    p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    /// Tabulated weights w(1), w(2), ...; the last ratio is extended as a power law.
    #[arg(long, value_delimiter = ',', conflicts_with = "kappa")]
    weight_table: Option<Vec<f64>>,
    #[arg(long)]
    probe: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    kmax: Option<usize>,
    /// open or absorbing.
    #[arg(long, value_parser = tail)]
    tail: Option<TailClosure>,
    /// `small` or `csv:FILE` with columns k,c.
    #[arg(long)]
    init: Option<String>,
}

#[derive(Args)]
struct OdeArgs {
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    t_step: Option<f64>,
    /// Also integrate the time-changed linear system up to this s.
    #[arg(long)]
    s_end: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(short, long, value_parser = scale)]
    n: Option<u64>,
    #[arg(short, long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// start:stop:step in units of n steps.
    #[arg(long)]
    grid: Option<String>,
    /// Classes recorded per replica.
    #[arg(long)]
    k_cut: Option<usize>,
}

fn scale(s: &str) -> Result<u64, String> {
    parse_scale(s).map_err(|e| e.to_string())
}

fn tail(s: &str) -> Result<TailClosure, String> {
    match s {
        "open" => Ok(TailClosure::Open),
        "absorbing" => Ok(TailClosure::Absorbing),
        _ => Err(format!("expected open or absorbing, got `{s}`")),
    }
}

impl Common {
    fn into_config(self) -> Result<(RunConfig, Option<PathBuf>), Error> {
        let base = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let table = self.weight_table.is_some();
        let flags = RunConfig {
            model: self.model,
            p: self.p,
            weight: WeightConfig {
                kind: table.then(|| "table".to_string()),
                kappa: self.kappa,
                table: self.weight_table,
                probe: self.probe,
            },
            tol: self.tol,
            kmax: self.kmax,
            tail: self.tail,
            init: self.init.clone(),
            ..RunConfig::default()
        };
        let mut cfg = base.merged(flags);
        if self.init.is_some() {
            cfg.init_c = None;
        }
        // a table on the command line replaces a power law from the file, and vice versa
        if table {
            cfg.weight.kappa = None;
        } else if self.kappa.is_some() {
            cfg.weight.kind = Some("power".into());
            cfg.weight.table = None;
        }
        Ok((cfg, self.out))
    }
}

fn sim_flags(sim: SimArgs) -> RunConfig {
    RunConfig {
        n: sim.n,
        replicas: sim.replicas,
        seed: sim.seed,
        grid: sim.grid,
        k_cut: sim.k_cut,
        ..RunConfig::default()
    }
}

fn execute(cmd: Cmd) -> Result<(), Error> {
    let (command, cfg, out) = match cmd {
        Cmd::Replay { manifest, out } => {
            let m = replay(&manifest, &resolve_out_dir(out))?;
            return print_summary(&m.audit);
        }
        Cmd::FixedPoint(c) => {
            let (cfg, out) = c.into_config()?;
            (Command::FixedPoint, cfg, out)
        }
        Cmd::Spectral(c) => {
            let (cfg, out) = c.into_config()?;
            (Command::Spectral, cfg, out)
        }
        Cmd::Ode { common, ode } => {
            let (cfg, out) = common.into_config()?;
            let flags = RunConfig {
                t_end: ode.t_end,
                t_step: ode.t_step,
                s_end: ode.s_end,
                rtol: ode.rtol,
                atol: ode.atol,
                ..RunConfig::default()
            };
            (Command::Ode, cfg.merged(flags), out)
        }
        Cmd::Simulate { common, sim } => {
            let (cfg, out) = common.into_config()?;
            (Command::Simulate, cfg.merged(sim_flags(sim)), out)
        }
        Cmd::Study {
            common,
            sim,
            ns,
            horizon,
            grid_step,
        } => {
            let (cfg, out) = common.into_config()?;
            let flags = RunConfig {
                ns,
                horizon,
                grid_step,
                ..sim_flags(sim)
            };
            (Command::Study, cfg.merged(flags), out)
        }
    };
    let out = resolve_out_dir(out);
    let m = run(command, cfg, &out)?;
    log::info!("{} finished in {:.3}s, outputs in {}", command, m.wall_clock_seconds, out.display());
    print_summary(&m.audit)
}

/// A closed pipe on stdout (e.g. `| head`) is not an error.
fn print_summary(v: &serde_json::Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    match std::io::stdout().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
