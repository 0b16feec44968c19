use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use gsdag::bundle::{Meta, StrategyBundle};
use gsdag::model::{parse_document, Uid};
use gsdag::potential::Potential;
use gsdag::sdag::{expand_normal_form, sdag_dot, skeleton_dot};
use gsdag::solver::{solve_traced, TraceEvent};
use gsdag::{build_skeleton, oracle, temporal_order, validate, BuildOptions, Error, Result};

// Like println!, but a closed pipe (`gsdag ... | head`) ends the process quietly.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if let Err(e) = writeln!(std::io::stdout().lock(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            return Err(Error::Io(e));
        }
    }};
}

#[derive(Parser)]
#[command(name = "gsdag", version, about = "Solve unconstrained influence diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model and list every violation.
    Validate { file: PathBuf },
    /// Print the temporal order as an edge list.
    Order { file: PathBuf },
    /// Build the skeleton of the strategy search space.
    Skeleton {
        file: PathBuf,
        #[arg(long)]
        trim_relevance: bool,
        /// Write the skeleton as DOT.
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
        /// Write the expanded normal-form S-DAG as DOT.
        #[arg(long, value_name = "PATH")]
        sdag: Option<PathBuf>,
    },
    /// Solve the model and print its maximum expected utility.
    Solve {
        file: PathBuf,
        #[arg(long)]
        trim_relevance: bool,
        /// Write the strategy bundle here.
        #[arg(long, value_name = "PATH")]
        bundle: Option<PathBuf>,
        /// Print every potential produced during elimination to stderr.
        #[arg(long)]
        dump_potentials: bool,
    },
    /// Exhaustive MEU, and the exact value of a bundled strategy.
    Eval {
        file: PathBuf,
        #[arg(long, value_name = "PATH")]
        bundle: Option<PathBuf>,
    },
    /// Monte Carlo rollouts of a bundled strategy.
    Simulate {
        file: PathBuf,
        #[arg(long, value_name = "PATH")]
        bundle: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// `x` with 12 significant digits.
fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (11 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn load(path: &Path) -> Result<Uid> {
    let doc = parse_document(&fs::read_to_string(path)?)?;
    let uid = Uid::from_document(doc)?;
    let violations = validate(&uid);
    if violations.is_empty() {
        Ok(uid)
    } else {
        Err(Error::Invalid(violations))
    }
}

fn load_bundle(model: &Uid, path: &Path) -> Result<(Uid, gsdag::Strategy)> {
    let (uid, s) = StrategyBundle::from_json(&fs::read_to_string(path)?)?.to_strategy()?;
    if &uid != model {
        return Err(Error::StrategyMismatch("bundle was solved for a different model".into()));
    }
    Ok((uid, s))
}

#[derive(Serialize)]
struct Dump<'a> {
    step: &'a str,
    node: Option<usize>,
    var: Option<&'a str>,
    domain: Vec<&'a str>,
    values: &'a [f64],
}

fn dump(uid: &Uid, step: &str, node: Option<usize>, var: Option<gsdag::VarId>, p: &Potential) {
    let d = Dump {
        step,
        node,
        var: var.map(|v| uid.var(v).id.as_str()),
        domain: p.domain.iter().map(|v| uid.var(*v).id.as_str()).collect(),
        values: &p.values,
    };
    eprintln!("{}", serde_json::to_string(&d).expect("plain data"));
}

fn dump_trace(uid: &Uid, trace: &[TraceEvent]) {
    for e in trace {
        match e {
            TraceEvent::EliminateChance { node, var, phi, psi } => {
                let node = node.map(|n| n.0);
                if let Some(p) = phi {
                    dump(uid, "chance-phi", node, Some(*var), p);
                }
                if let Some(p) = psi {
                    dump(uid, "chance-psi", node, Some(*var), p);
                }
            }
            TraceEvent::EliminateDecision { node, var, psi, .. } => {
                if let Some(p) = psi {
                    dump(uid, "decision-psi", Some(node.0), Some(*var), p);
                }
            }
            TraceEvent::Unify { node, totals, unified, .. } => {
                for t in totals {
                    dump(uid, "branch-total", Some(node.0), None, t);
                }
                dump(uid, "unified", Some(node.0), None, unified);
            }
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { file } => {
            let uid = Uid::from_document(parse_document(&fs::read_to_string(&file)?)?)?;
            let violations = validate(&uid);
            for v in &violations {
                out!("{v}");
            }
            if violations.is_empty() {
                out!("ok");
            }
            Ok(violations.is_empty())
        }
        Command::Order { file } => {
            let uid = load(&file)?;
            for (a, b) in temporal_order(&uid).pairs() {
                out!("{} -> {}", uid.var(a).id, uid.var(b).id);
            }
            Ok(true)
        }
        Command::Skeleton { file, trim_relevance, dot, sdag } => {
            let uid = load(&file)?;
            let sk = build_skeleton(&uid, BuildOptions { trim_relevance });
            let names = |s: &std::collections::BTreeSet<gsdag::VarId>| uid.names(s.iter().copied()).join(",");
            out!("nodes {} edges {} sources {}", sk.len(), sk.edge_count(), sk.sources().len());
            for (i, n) in sk.nodes.iter().enumerate() {
                let after = n.future.difference(&n.label).copied().collect();
                let children: Vec<String> = n.children.iter().map(|c| c.to_string()).collect();
                out!(
                    "{i}: [{}] after [{}] releases [{}] -> [{}]",
                    names(&n.label),
                    names(&after),
                    names(&n.released),
                    children.join(",")
                );
            }
            if let Some(path) = dot {
                fs::write(path, skeleton_dot(&uid, &sk))?;
            }
            if let Some(path) = sdag {
                fs::write(path, sdag_dot(&uid, &expand_normal_form(&uid, &sk)))?;
            }
            Ok(true)
        }
        Command::Solve { file, trim_relevance, bundle, dump_potentials } => {
            let uid = load(&file)?;
            let sk = build_skeleton(&uid, BuildOptions { trim_relevance });
            let g = expand_normal_form(&uid, &sk);
            let mut trace = Vec::new();
            let s = solve_traced(&uid, &g, &mut trace)?;
            if dump_potentials {
                dump_trace(&uid, &trace);
            }
            out!("{}", sig12(s.meu));
            if let Some(path) = bundle {
                let flags = BTreeMap::from([("trim_relevance".to_string(), trim_relevance)]);
                fs::write(path, StrategyBundle::from_strategy(&uid, &s, Meta::now(flags)).to_json())?;
            }
            Ok(true)
        }
        Command::Eval { file, bundle } => {
            let uid = load(&file)?;
            out!("brute_meu {}", sig12(oracle::brute_meu(&uid)?));
            if let Some(path) = bundle {
                let (uid, s) = load_bundle(&uid, &path)?;
                out!("strategy_eu {}", sig12(oracle::strategy_eu(&uid, &s)?));
            }
            Ok(true)
        }
        Command::Simulate { file, bundle, n, seed } => {
            if n == 0 {
                return Err(Error::InvalidQuery("--n must be at least 1".into()));
            }
            let uid = load(&file)?;
            let (uid, s) = load_bundle(&uid, &bundle)?;
            let (mean, se) = oracle::simulate(&uid, &s, n, seed)?;
            out!("{} ± {}", sig12(mean), sig12(se));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
