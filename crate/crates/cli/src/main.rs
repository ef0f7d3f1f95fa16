use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use medp_core::decomposition::{build_decomposition_heuristic, validate, DecompositionJson, Elimination, TreeDecomposition};
use medp_core::exact::{exact_lp_small, exact_medp};
use medp_core::flow::solve_lp;
use medp_core::generators::{generate, Family};
use medp_core::instance::{normalize_to_matching, InstanceJson};
use medp_core::pipeline::{check_epsilon, run_pipeline, RunConfig};
use medp_core::rational::{format_q, parse_q, Q};
use medp_core::rounding::Mode;
use medp_core::routing::RoutingJson;
use medp_core::{Error, Instance};

#[derive(Parser)]
#[command(name = "medp", version, about = "Edge-disjoint paths by LP rounding")]
struct Cli {
    /// Write JSON here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance with its construction decomposition.
    Gen {
        #[arg(long)]
        family: Family,
        /// Node count, or side length for grids.
        #[arg(long)]
        size: usize,
        /// Width for partial k-trees.
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        demands: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve the LP relaxation.
    Lp {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "1/20", value_parser = rational)]
        epsilon: Q,
    },
    /// Round the LP solution and print the routing.
    Round(RunArgs),
    /// Run the pipeline and print the report with its ledger.
    Report(RunArgs),
    /// Exhaustive optimum (and LP optimum with --lp) on a small instance.
    Exact {
        #[command(flatten)]
        input: Input,
        #[arg(long = "congestion-cap", default_value_t = 1)]
        cap: u64,
        #[arg(long)]
        lp: bool,
    },
    /// Check a routing file against an instance, or a decomposition.
    Validate {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        routing: Option<PathBuf>,
        #[arg(long = "congestion-cap", value_parser = rational)]
        cap: Option<Q>,
    },
}

#[derive(Args)]
struct Input {
    /// Instance JSON, or the output of `gen`.
    #[arg(long)]
    instance: PathBuf,
    /// Decomposition JSON; overrides one bundled with the instance.
    #[arg(long)]
    decomp: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value = "treewidth")]
    mode: Mode,
    #[arg(long, default_value = "1/20", value_parser = rational)]
    epsilon: Q,
    /// small:<q>
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long = "congestion-cap", value_parser = rational)]
    cap: Option<Q>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Accepted for symmetry with `gen`; the pipeline is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report ms = 0.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Serialize, Deserialize)]
struct Bundle {
    instance: InstanceJson,
    decomposition: DecompositionJson,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum InstanceFile {
    Bundle(Bundle),
    Bare(InstanceJson),
}

fn rational(s: &str) -> Result<Q, String> {
    parse_q(s).map_err(|e| e.to_string())
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", path.display()))
}

impl Input {
    fn load(&self) -> anyhow::Result<(Instance, Option<TreeDecomposition>)> {
        let file: InstanceFile = serde_json::from_str(&read(&self.instance)?)
            .map_err(Error::from)
            .with_context(|| format!("parsing {}", self.instance.display()))?;
        let (inst, bundled) = match file {
            InstanceFile::Bundle(b) => (b.instance.into_instance()?, Some(b.decomposition.into_decomposition()?)),
            InstanceFile::Bare(i) => (i.into_instance()?, None),
        };
        let decomp = match &self.decomp {
            Some(p) => Some(TreeDecomposition::from_json(&read(p)?).with_context(|| format!("parsing {}", p.display()))?),
            None => bundled,
        };
        Ok((inst, decomp))
    }

    /// Falls back to a min-fill decomposition.
    fn load_with_decomp(&self) -> anyhow::Result<(Instance, TreeDecomposition)> {
        let (inst, d) = self.load()?;
        let d = d.unwrap_or_else(|| build_decomposition_heuristic(&inst.graph, Elimination::MinFill));
        Ok((inst, d))
    }
}

fn emit(out: &Option<PathBuf>, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => fs::write(p, text + "\n")
            .map_err(Error::from)
            .with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn config(args: &RunArgs) -> RunConfig {
    RunConfig {
        epsilon: args.epsilon.clone(),
        mode: args.mode,
        k: args.k,
        p: args.p,
        oracle: args.oracle.clone(),
        congestion_cap: args.cap.clone(),
        omit_timing: args.omit_timing,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen {
            family,
            size,
            k,
            demands,
            seed,
        } => {
            let g = generate(family, size, k, demands, seed)?;
            emit(
                &cli.out,
                &Bundle {
                    instance: g.instance.to_json(),
                    decomposition: g.decomposition.to_json(),
                },
            )
        }
        Command::Lp { input, epsilon } => {
            check_epsilon(&epsilon)?;
            let (inst, _) = input.load()?;
            let norm = normalize_to_matching(&inst.graph, &inst.demands)?;
            let f = solve_lp(&norm.instance, &epsilon)?;
            // leaf edges are dropped so paths refer to the input graph
            let mut json = f.to_json();
            for p in &mut json.paths {
                p.edges.retain(|&e| e < norm.base_edges);
            }
            emit(
                &cli.out,
                &serde_json::json!({ "value": format_q(&f.value()), "routing": json }),
            )
        }
        Command::Round(args) => {
            let (inst, d) = args.input.load_with_decomp()?;
            let out = run_pipeline(&inst, &d, &config(&args))?;
            emit(&cli.out, &out.routing.sorted().to_json())
        }
        Command::Report(args) => {
            let (inst, d) = args.input.load_with_decomp()?;
            let out = run_pipeline(&inst, &d, &config(&args))?;
            emit(&cli.out, &out.report)
        }
        Command::Exact { input, cap, lp } => {
            let (inst, _) = input.load()?;
            let res = exact_medp(&inst.graph, &inst.demands, cap)?;
            let lp = if lp {
                Some(format_q(&exact_lp_small(&inst.graph, &inst.demands)?))
            } else {
                None
            };
            emit(
                &cli.out,
                &serde_json::json!({
                    "opt": res.value,
                    "congestion_cap": cap,
                    "lp": lp,
                    "routing": res.routing.to_json(),
                    "stats": res.stats,
                }),
            )
        }
        Command::Validate { input, routing, cap } => {
            let (inst, d) = input.load()?;
            match (routing, d) {
                (Some(path), _) => {
                    let r: RoutingJson = serde_json::from_str(&read(&path)?).map_err(Error::from)?;
                    let r = r.into_integral()?;
                    r.validate_on(&inst.graph, &inst.demands, cap.as_ref())?;
                    let congestion = if r.paths.is_empty() {
                        Q::from_integer(0.into())
                    } else {
                        r.congestion(&inst.graph)?
                    };
                    emit(
                        &cli.out,
                        &serde_json::json!({
                            "valid": true,
                            "routed": r.routed(),
                            "congestion": format_q(&congestion),
                        }),
                    )
                }
                (None, Some(d)) => {
                    let report = validate(&d, &inst.graph, None);
                    emit(&cli.out, &report)?;
                    if !report.is_valid() {
                        return Err(Error::Decomposition(report.violations).into());
                    }
                    Ok(())
                }
                (None, None) => bail!(Error::invalid("nothing to validate: pass --routing or a decomposition")),
            }
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) else {
        return 2;
    };
    match e.root() {
        Error::Guarantee(_) | Error::Internal(_) => 3,
        Error::GuardExceeded(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
