use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pacman_core::action_lang::{parse_action_description, ActionDescription, PartialState};
use pacman_core::envs::{build_env, EnvKind};
use pacman_core::harness::{curves_from_dir, run_experiment, ExperimentConfig};
use pacman_core::planner::{
    dump_translation, reachable_states, sample_availability, solve_with, validate_plan,
    StatePolicy, UniformPolicy,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "pacman-lab",
    version,
    about = "Planner-actor-critic experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config and write its outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the config's `output`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Plan once under a uniform policy and print the plan and translation.
    Plan {
        /// Action description file.
        #[arg(long, conflicts_with = "env", required_unless_present = "env")]
        domain: Option<PathBuf>,
        /// Use a built-in environment's symbolic model instead.
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial condition, e.g. `Loc=1`.
        #[arg(long)]
        init: Option<String>,
        /// Goal condition, e.g. `Loc=3`.
        #[arg(long)]
        goal: Option<String>,
        #[arg(long, default_value_t = 16)]
        maxstamp: usize,
        /// Leave out the timestamped translation.
        #[arg(long)]
        no_dump: bool,
    },
    /// Serve live trainer sessions over HTTP and WebSocket.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
    /// Print plot-ready learning curves for an output directory.
    Curves {
        dir: PathBuf,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    match Cli::parse().command {
        Command::Run { config, output } => run(&config, output),
        Command::Plan {
            domain,
            env,
            seed,
            init,
            goal,
            maxstamp,
            no_dump,
        } => {
            let problem = load_problem(domain.as_deref(), env.as_deref(), init, goal)?;
            plan(&problem, seed, maxstamp, !no_dump)
        }
        Command::Serve { port, host } => serve(SocketAddr::new(host, port)),
        Command::Curves { dir, out } => {
            let table = curves_from_dir(&dir)?;
            match out {
                Some(path) => std::fs::write(&path, table)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{table}"),
            }
            Ok(())
        }
    }
}

fn run(path: &Path, output: Option<PathBuf>) -> Result<()> {
    let mut config = ExperimentConfig::load(path)?;
    if output.is_some() {
        config.output = output;
    }
    let curve = run_experiment(&config)?;
    for (i, r) in curve.runs.iter().enumerate() {
        println!(
            "run {i} seed {} final_mean {:.4} plan_failures {} feedback_updates {}/{}",
            r.seed,
            r.final_mean(50),
            r.plan_failures.len(),
            r.feedback_updates,
            r.updates
        );
    }
    let n = curve.aggregate.mean.len();
    let tail = n.saturating_sub(50);
    let mean = curve.aggregate.mean[tail..].iter().sum::<f64>() / (n - tail).max(1) as f64;
    println!("mean return over the last {} episodes: {mean:.4}", n - tail);
    if let Some(dir) = &config.output {
        println!("outputs written to {}", dir.display());
    }
    Ok(())
}

struct Problem {
    desc: ActionDescription,
    initial: PartialState,
    goal: PartialState,
}

fn load_problem(
    domain: Option<&Path>,
    env: Option<&str>,
    init: Option<String>,
    goal: Option<String>,
) -> Result<Problem> {
    let (desc, default_init, default_goal) = match (domain, env) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let desc = parse_action_description(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            (desc, None, None)
        }
        (None, Some(name)) => {
            let env = build_env(EnvKind::parse(name)?, None)?;
            let sym = env.symbolic();
            (
                sym.description().clone(),
                Some(sym.initial().clone()),
                Some(sym.goal().clone()),
            )
        }
        (None, None) => bail!("give --domain or --env"),
    };
    let condition =
        |text: Option<String>, default: Option<PartialState>, what: &str| match (text, default) {
            (Some(t), _) => desc
                .parse_condition(&t)
                .with_context(|| format!("parsing --{what}")),
            (None, Some(d)) => Ok(d),
            (None, None) => bail!("--{what} is required with --domain"),
        };
    let initial = condition(init, default_init, "init")?;
    let goal = condition(goal, default_goal, "goal")?;
    Ok(Problem {
        desc,
        initial,
        goal,
    })
}

fn plan(problem: &Problem, seed: u64, maxstamp: usize, dump: bool) -> Result<()> {
    let desc = &problem.desc;
    let start = desc.complete(&problem.initial)?;
    let states = reachable_states(desc, &start)?;
    let policy = UniformPolicy(desc.actions().len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (plan, availability) = solve_with(desc, &problem.initial, &problem.goal, maxstamp, |_| {
        sample_availability(&policy as &dyn StatePolicy, &states, &mut rng)
    })?;
    println!(
        "% states reachable from the initial state: {}",
        states.len()
    );
    println!("% horizons sampled: {}", availability.horizon());
    match &plan {
        Some(plan) => {
            validate_plan(plan, desc, &availability, &problem.initial, &problem.goal)
                .map_err(|e| anyhow::anyhow!("plan failed validation: {e}"))?;
            println!("plan: {}", plan.describe(desc));
            println!("actions: {}", plan.action_count());
            for step in &plan.steps {
                let action = step.action.map_or("skip", |a| desc.action_name(a));
                println!(
                    "  {} [{}] {action}",
                    step.timestamp,
                    desc.format_state(&step.state)
                );
            }
            println!("  end [{}]", desc.format_state(&plan.terminal));
        }
        None => println!("no plan within maxstamp {maxstamp}"),
    }
    if dump {
        println!();
        print!(
            "{}",
            dump_translation(desc, &availability, &problem.initial, &problem.goal)
        );
    }
    if plan.is_none() {
        std::process::exit(2);
    }
    Ok(())
}

fn serve(addr: SocketAddr) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = pacman_service::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!(addr = %listener.local_addr()?, "serving trainer sessions");
        pacman_service::serve(listener).await?;
        Ok(())
    })
}
