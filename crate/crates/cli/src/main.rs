use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use decpomdp::bench::{self, BenchmarkSpec};
use decpomdp::dp::{plan_with_observer, Algorithm, HeuristicKind, PlannerConfig};
use decpomdp::experiment::{emit_results, evaluate_policy, run_experiment_with, OutputFormat};
use decpomdp::policy::policy_to_json;
use decpomdp::psmbdp::AgentOrder;
use decpomdp::{mdp_value_at, parse_model, value_iteration, DecPomdp, Error, HeuristicSpace};

#[derive(Parser)]
#[command(
    name = "decpomdp",
    version,
    about = "Finite-horizon Dec-POMDP planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan once and report the value at the initial belief.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        planner: PlannerArgs,
        /// Write the joint policy as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat planning over consecutive seeds and tabulate AEV, sigma and time.
    Experiment {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        planner: PlannerArgs,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value = "table")]
        output: OutputFormat,
        /// Write results to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the exact and simulated value of a stored policy.
    Evaluate {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Policy JSON file written by `solve --out`.
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Value of the underlying fully observable MDP at the initial belief.
    MdpBound {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Parse and validate a model, then print its dimensions.
    Validate {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// List the built-in benchmarks.
    ListBenchmarks,
}

#[derive(Args)]
struct ProblemArgs {
    /// Benchmark name or `file:<path>`.
    #[arg(long)]
    problem: String,
    /// Benchmark parameter as `key=value`; repeatable.
    #[arg(long = "problem-param", value_parser = parse_param)]
    params: Vec<(String, usize)>,
}

#[derive(Args)]
struct PlannerArgs {
    #[arg(long, default_value = "psmbdp-befs")]
    algorithm: Vec<Algorithm>,
    /// Defaults to the model's horizon.
    #[arg(long)]
    horizon: Option<usize>,
    /// Trees kept per agent; comma-separated values run several widths.
    #[arg(long, default_value = "3", value_delimiter = ',')]
    width: Vec<usize>,
    /// Belief samples per stage for PSMBDP.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sampling mix such as `mdp:0.5,random:0.5`.
    #[arg(long, default_value = "mdp:0.5,random:0.5", value_parser = parse_mix)]
    heuristic: HeuristicMix,
    /// `belief` or `state-prior`; defaults per algorithm.
    #[arg(long, value_parser = parse_space)]
    heuristic_space: Option<HeuristicSpace>,
    /// MDP particles per state-prior point.
    #[arg(long)]
    prior_particles: Option<usize>,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long, default_value = "round-robin")]
    agent_order: AgentOrder,
}

#[derive(Clone)]
struct HeuristicMix(Vec<(HeuristicKind, f64)>);

fn parse_param(s: &str) -> Result<(String, usize), String> {
    let (k, v) = s.split_once('=').ok_or("expected key=value")?;
    let v = v.parse().map_err(|e| format!("bad value for {k}: {e}"))?;
    Ok((k.to_string(), v))
}

fn parse_mix(s: &str) -> Result<HeuristicMix, String> {
    let mut mix = Vec::new();
    for part in s.split(',') {
        let (name, frac) = match part.split_once(':') {
            Some((n, f)) => (n, f.parse::<f64>().map_err(|e| e.to_string())?),
            None => (part, 1.0),
        };
        let kind = match name {
            "mdp" => HeuristicKind::Mdp,
            "random" => HeuristicKind::Random,
            _ => return Err(format!("unknown heuristic `{name}`")),
        };
        mix.push((kind, frac));
    }
    Ok(HeuristicMix(mix))
}

fn parse_space(s: &str) -> Result<HeuristicSpace, String> {
    match s {
        "belief" => Ok(HeuristicSpace::Belief),
        "state-prior" => Ok(HeuristicSpace::StatePrior),
        _ => Err(format!("unknown heuristic space `{s}`")),
    }
}

fn load_problem(args: &ProblemArgs) -> decpomdp::Result<DecPomdp> {
    if let Some(path) = args.problem.strip_prefix("file:") {
        if !args.params.is_empty() {
            return Err(Error::InvalidConfig(
                "--problem-param applies to benchmarks only".into(),
            ));
        }
        return parse_model(&fs::read_to_string(path)?);
    }
    let mut spec = BenchmarkSpec::named(&args.problem)?;
    for (k, v) in &args.params {
        spec.set(k, *v)?;
    }
    bench::build(&spec)
}

impl PlannerArgs {
    fn configs(&self, model: &DecPomdp) -> Vec<PlannerConfig> {
        let horizon = self.horizon.unwrap_or(model.default_horizon());
        let mut out = Vec::new();
        for &algorithm in &self.algorithm {
            for &width in &self.width {
                let mut c = PlannerConfig::new(algorithm, horizon, width);
                c.samples = self.samples;
                c.seed = self.seed;
                c.heuristics = self.heuristic.0.clone();
                c.heuristic_space = self.heuristic_space;
                c.agent_order = self.agent_order;
                if let Some(k) = self.prior_particles {
                    c.prior_particles = k;
                }
                if let Some(n) = self.node_limit {
                    c.node_limit = n;
                }
                out.push(c);
            }
        }
        out
    }
}

fn write_output(out: Option<&PathBuf>, text: &str) -> decpomdp::Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> decpomdp::Result<()> {
    match cli.command {
        Command::Solve {
            problem,
            planner,
            out,
        } => {
            let model = load_problem(&problem)?;
            for config in planner.configs(&model) {
                let outcome = plan_with_observer(&model, &config, &mut |r| {
                    eprintln!(
                        "stage {:>3}: kept {:?} ({:.2}s)",
                        r.stage,
                        r.sizes,
                        r.elapsed.as_secs_f64()
                    );
                })?;
                println!(
                    "{} W={} H={} seed={} value={}",
                    config.algorithm, config.width, config.horizon, config.seed, outcome.value
                );
                if let Some(path) = &out {
                    fs::write(path, policy_to_json(&model, &outcome.policy)?)?;
                }
            }
            Ok(())
        }
        Command::Experiment {
            problem,
            planner,
            runs,
            output,
            out,
        } => {
            let model = load_problem(&problem)?;
            let mut results = Vec::new();
            for config in planner.configs(&model) {
                let r = run_experiment_with(&model, &config, runs, planner.seed, &mut |k, v| {
                    eprintln!("{} W={} run {k}: {v:.4}", config.algorithm, config.width);
                })?;
                results.push(r);
            }
            write_output(out.as_ref(), &emit_results(&results, output))
        }
        Command::Evaluate {
            problem,
            policy,
            episodes,
            seed,
        } => {
            let model = load_problem(&problem)?;
            let text = fs::read_to_string(&policy)?;
            let e = evaluate_policy(&model, &text, episodes, seed)?;
            println!("exact={} simulated={} stderr={}", e.exact, e.mean, e.stderr);
            if e.discrepant() {
                eprintln!(
                    "warning: simulated value is more than 4 standard errors from the exact value"
                );
            }
            Ok(())
        }
        Command::MdpBound { problem, horizon } => {
            let model = load_problem(&problem)?;
            let h = horizon.unwrap_or(model.default_horizon());
            let values = value_iteration(&model.underlying_mdp(), h);
            println!("{}", mdp_value_at(&values, model.initial_belief(), 0));
            Ok(())
        }
        Command::Validate { problem } => {
            let m = load_problem(&problem)?;
            println!(
                "agents={} states={} joint_actions={} joint_observations={}",
                m.num_agents(),
                m.num_states(),
                m.num_joint_actions(),
                m.num_joint_observations()
            );
            for (i, a) in m.agents().iter().enumerate() {
                println!(
                    "agent {i} `{}`: {} actions, {} observations",
                    a.name,
                    m.num_actions(i),
                    m.num_observations(i)
                );
            }
            Ok(())
        }
        Command::ListBenchmarks => {
            for info in bench::list_benchmarks() {
                let params: Vec<String> = info
                    .spec
                    .params
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect();
                println!(
                    "{:<22} {:<34} {}",
                    info.spec.name,
                    params.join(" "),
                    info.description
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = if e.is_resource_limit() {
                4
            } else if e.is_model_error() {
                3
            } else if matches!(e, Error::InvalidConfig(_)) {
                2
            } else {
                1
            };
            ExitCode::from(code)
        }
    }
}
