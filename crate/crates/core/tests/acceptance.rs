//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gsdag::fixtures::{self, RandomShape};
use gsdag::model::Uid;
use gsdag::oracle::{brute_meu, brute_meu_full, simulate, strategy_eu};
use gsdag::order::is_admissible_with;
use gsdag::potential::Potential;
use gsdag::sdag::expand_normal_form;
use gsdag::solver::{solve_traced, solve_uid, SolveOptions, SolveStats, Strategy, TraceEvent};
use gsdag::{build_skeleton, temporal_order, BuildOptions, VarId};

const SUITE: u64 = 200;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn suite() -> Vec<Uid> {
    let shape = RandomShape::default();
    (0..SUITE).map(|s| fixtures::random_uid(s, &shape)).collect()
}

/// Solved suite shared by several criteria, with merge statistics.
struct Solved {
    models: Vec<Uid>,
    strategies: Vec<Result<Strategy, String>>,
    elapsed: Duration,
}

fn solve_suite() -> Solved {
    let started = Instant::now();
    let models = suite();
    let strategies = models
        .iter()
        .map(|m| solve_uid(m, SolveOptions::default()).map_err(|e| e.to_string()))
        .collect();
    Solved { models, strategies, elapsed: started.elapsed() }
}

fn oracle_equivalence(s: &Solved) -> Outcome {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (i, (m, st)) in s.models.iter().zip(&s.strategies).enumerate() {
        let brute = match brute_meu(m) {
            Ok(v) => v,
            Err(e) => {
                bad.push(format!("seed {i}: oracle {e}"));
                continue;
            }
        };
        match st {
            Ok(st) => {
                let err = (st.meu - brute).abs() / (1.0 + brute.abs());
                worst = worst.max(err);
                if err > 1e-9 {
                    bad.push(format!("seed {i}: {} vs {brute}", st.meu));
                }
            }
            Err(e) => bad.push(format!("seed {i}: {e}")),
        }
    }
    let total = s.elapsed + started.elapsed();
    let pass = bad.is_empty() && total < Duration::from_secs(60);
    outcome(
        pass,
        format!("{SUITE} models, worst relative error {worst:.1e}, {:.2}s{}", total.as_secs_f64(), failures(&bad)),
    )
}

fn failures(bad: &[String]) -> String {
    if bad.is_empty() {
        String::new()
    } else {
        format!("; {} failures, first: {}", bad.len(), bad[0])
    }
}

fn strategy_achievement(s: &Solved) -> Outcome {
    let mut bad = Vec::new();
    let mut mutations = 0usize;
    for (i, (m, st)) in s.models.iter().zip(&s.strategies).enumerate() {
        let Ok(st) = st else {
            bad.push(format!("seed {i}: unsolved"));
            continue;
        };
        match strategy_eu(m, st) {
            Ok(eu) if close(eu, st.meu, 1e-9) => {}
            Ok(eu) => bad.push(format!("seed {i}: strategy_eu {eu} vs meu {}", st.meu)),
            Err(e) => bad.push(format!("seed {i}: {e}")),
        }
        let mut probe = st.clone();
        for p in 0..probe.policies.len() {
            let card = m.card(probe.policies[p].decision);
            for cell in 0..probe.policies[p].choices.len() {
                let original = probe.policies[p].choices[cell];
                for alt in (0..card).filter(|&a| a != original) {
                    probe.policies[p].choices[cell] = alt;
                    mutations += 1;
                    match strategy_eu(m, &probe) {
                        Ok(eu) if eu <= st.meu + 1e-9 * (1.0 + st.meu.abs()) => {}
                        Ok(eu) => bad.push(format!("seed {i}: mutated cell raised EU to {eu} > {}", st.meu)),
                        Err(e) => bad.push(format!("seed {i}: {e}")),
                    }
                }
                probe.policies[p].choices[cell] = original;
            }
        }
    }
    outcome(bad.is_empty(), format!("{SUITE} strategies re-scored, {mutations} single-cell mutations{}", failures(&bad)))
}

fn delayed_observation() -> Outcome {
    let shape = RandomShape::tiny();
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let m = fixtures::random_uid(10_000 + seed, &shape);
        match (brute_meu(&m), brute_meu_full(&m)) {
            (Ok(a), Ok(b)) => {
                let err = (a - b).abs() / a.abs().max(1.0);
                worst = worst.max(err);
                if err > 1e-12 {
                    bad.push(format!("seed {seed}: {a} vs {b}"));
                }
            }
            (a, b) => bad.push(format!("seed {seed}: {:?} / {:?}", a.err(), b.err())),
        }
    }
    outcome(bad.is_empty(), format!("50 tiny models, worst difference {worst:.1e}{}", failures(&bad)))
}

fn merge_consistency(s: &Solved, trimmed: &[Result<Strategy, String>]) -> Outcome {
    let mut total = SolveStats::default();
    let mut bad = Vec::new();
    let extra: Vec<Result<Strategy, String>> = [fixtures::four_decisions(), fixtures::king(), fixtures::unconstrained(5)]
        .iter()
        .map(|m| solve_uid(m, SolveOptions::default()).map_err(|e| e.to_string()))
        .collect();
    for r in s.strategies.iter().chain(trimmed).chain(&extra) {
        match r {
            Ok(st) => {
                total.merges += st.stats.merges;
                total.phi_exact_matches += st.stats.phi_exact_matches;
                total.phi_product_matches += st.stats.phi_product_matches;
            }
            Err(e) => bad.push(e.clone()),
        }
    }
    outcome(
        bad.is_empty() && total.merges > 0,
        format!(
            "{} merges checked ({} factor-wise, {} by product){}",
            total.merges,
            total.phi_exact_matches,
            total.phi_product_matches,
            failures(&bad)
        ),
    )
}

fn domain_set(uid: &Uid, p: &Potential) -> BTreeSet<String> {
    p.domain.iter().map(|v| uid.name(*v).to_string()).collect()
}

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn four_decisions_walkthrough() -> Outcome {
    let uid = fixtures::four_decisions();
    let g = expand_normal_form(&uid, &build_skeleton(&uid, BuildOptions::default()));
    let mut trace = Vec::new();
    let st = match solve_traced(&uid, &g, &mut trace) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let var = |n: &str| uid.v(n);
    let mut checks: Vec<(&str, bool)> = Vec::new();

    let elim_a = trace.iter().find_map(|e| match e {
        TraceEvent::EliminateChance { node: None, var: v, phi, psi } if *v == var("A") => Some((phi, psi)),
        _ => None,
    });
    checks.push((
        "A gives (B,D1) and (B,D1,D2)",
        elim_a.is_some_and(|(phi, psi)| {
            phi.as_ref().is_some_and(|p| domain_set(&uid, p) == set(&["B", "D1"]))
                && psi.as_ref().is_some_and(|p| domain_set(&uid, p) == set(&["B", "D1", "D2"]))
        }),
    ));

    let elim_f = trace.iter().find_map(|e| match e {
        TraceEvent::EliminateChance { node: None, var: v, phi, psi } if *v == var("F") => Some((phi, psi)),
        _ => None,
    });
    checks.push((
        "F gives (C,E,D4) and a neutral marginal",
        elim_f.is_some_and(|(phi, psi)| {
            phi.is_none() && psi.as_ref().is_some_and(|p| domain_set(&uid, p) == set(&["C", "E", "D4"]))
        }),
    ));

    let elim_d4 = trace.iter().find_map(|e| match e {
        TraceEvent::EliminateDecision { var: v, psi, policy_domain, .. } if *v == var("D4") => Some((psi, policy_domain)),
        _ => None,
    });
    checks.push((
        "D4 gives (C,E) and a policy over (C,E)",
        elim_d4.is_some_and(|(psi, dom)| {
            let dom: BTreeSet<String> = dom.iter().map(|v: &VarId| uid.name(*v).to_string()).collect();
            psi.as_ref().is_some_and(|p| domain_set(&uid, p) == set(&["C", "E"])) && dom == set(&["C", "E"])
        }),
    ));

    let merge = trace.iter().rev().find_map(|e| match e {
        TraceEvent::Unify { totals, unified, step_domain, .. } => Some((totals, unified, step_domain)),
        _ => None,
    });
    checks.push((
        "merge maxes two (B,D1) tables into a step policy over (B,D1)",
        merge.is_some_and(|(totals, unified, step)| {
            let step: BTreeSet<String> = step.iter().map(|v| uid.name(*v).to_string()).collect();
            totals.len() == 2
                && totals.iter().all(|t| domain_set(&uid, t) == set(&["B", "D1"]))
                && domain_set(&uid, unified) == set(&["B", "D1"])
                && step == set(&["B", "D1"])
        }),
    ));

    let brute = brute_meu(&uid).unwrap_or(f64::NAN);
    checks.push(("MEU equals the exhaustive oracle", close(st.meu, brute, 1e-9)));
    checks.push(("probability sets agree at the merge", st.stats.merges == 1));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} checks, MEU {:.6}", checks.len(), st.meu)
        } else {
            format!("failed: {}", failed.join("; "))
        },
    )
}

fn kings_problem() -> Outcome {
    let uid = fixtures::king();
    let started = Instant::now();
    let sk = build_skeleton(&uid, BuildOptions::default());
    let g = expand_normal_form(&uid, &sk);
    let solved = solve_uid(&uid, SolveOptions::default());
    let elapsed = started.elapsed();
    let po = temporal_order(&uid);
    let paths = g.paths();
    let admissible = paths.iter().all(|p| is_admissible_with(&uid, &po, &g.path_sequence(&po, p)));
    let sink_has_rt = sk.nodes[sk.sink].label.contains(&uid.v("Rt"));
    let tasks: BTreeSet<VarId> = ["T1", "T2", "T3"].iter().map(|t| uid.v(t)).collect();
    let branches = sk.nodes.iter().any(|n| {
        let labels: BTreeSet<VarId> =
            n.parents.iter().flat_map(|&p| sk.nodes[p].label.iter().copied()).collect();
        n.parents.len() == 3 && labels == tasks
    });
    let ok = solved.is_ok() && elapsed < Duration::from_secs(5);
    outcome(
        sink_has_rt && admissible && branches && ok,
        format!(
            "sink contains Rt: {sink_has_rt}, {} paths admissible: {admissible}, branches over T1..T3: {branches}, \
             solved in {:.3}s{}",
            paths.len(),
            elapsed.as_secs_f64(),
            solved.map_or_else(|e| format!(" ({e})"), |s| format!(" (MEU {:.6})", s.meu))
        ),
    )
}

/// Skeleton keys of the unconstrained family, straight from the
/// definition: for every order of the decisions, each decision paired with
/// the set of decisions after it, plus the empty sink.
fn enumerate_keys(n: usize) -> BTreeSet<(BTreeSet<usize>, BTreeSet<usize>)> {
    fn permute(rest: &mut Vec<usize>, prefix: &mut Vec<usize>, out: &mut BTreeSet<(BTreeSet<usize>, BTreeSet<usize>)>) {
        if rest.is_empty() {
            for (k, &d) in prefix.iter().enumerate() {
                out.insert((BTreeSet::from([d]), prefix[k + 1..].iter().copied().collect()));
            }
            return;
        }
        for i in 0..rest.len() {
            let d = rest.remove(i);
            prefix.push(d);
            permute(rest, prefix, out);
            prefix.pop();
            rest.insert(i, d);
        }
    }
    let mut out = BTreeSet::from([(BTreeSet::new(), BTreeSet::new())]);
    permute(&mut (1..=n).collect(), &mut Vec::new(), &mut out);
    out
}

fn worst_case_scaling() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut counts = Vec::new();
    for n in 3..=6 {
        let uid = fixtures::unconstrained(n);
        let sk = build_skeleton(&uid, BuildOptions::default());
        let index = |v: &VarId| uid.name(*v)[1..].parse::<usize>().expect("Di");
        let keys: BTreeSet<(BTreeSet<usize>, BTreeSet<usize>)> = sk
            .nodes
            .iter()
            .map(|nd| {
                let after = nd.future.difference(&nd.label).map(index).collect();
                (nd.label.iter().map(index).collect(), after)
            })
            .collect();
        let want = enumerate_keys(n);
        if keys != want || sk.len() != want.len() {
            pass = false;
            notes.push(format!("n={n}: {} nodes, oracle {}", sk.len(), want.len()));
        }
        counts.push(sk.len());
    }
    // n 2^(n-1) + 1 nodes: successive ratios fall towards 2 from above
    let ratios: Vec<f64> = counts.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
    if ratios.iter().any(|r| !(2.0..=3.0).contains(r)) {
        pass = false;
    }
    notes.push(format!("nodes n=3..6: {counts:?}"));

    let started = Instant::now();
    let nine = solve_uid(&fixtures::unconstrained(9), SolveOptions::default());
    let t9 = started.elapsed();
    pass &= nine.is_ok() && t9 < Duration::from_secs(60);
    notes.push(format!("n=9 solved in {:.2}s", t9.as_secs_f64()));
    if let Err(e) = &nine {
        notes.push(e.to_string());
    }

    let started = Instant::now();
    let ten = build_skeleton(&fixtures::unconstrained(10), BuildOptions::default());
    pass &= ten.len() == 10 * 512 + 1;
    notes.push(format!("n=10 skeleton {} nodes in {:.2}s", ten.len(), started.elapsed().as_secs_f64()));
    outcome(pass, notes.join(", "))
}

fn trimmed_suite() -> Vec<(Uid, Result<Strategy, String>)> {
    let shape = RandomShape::default();
    (0..50)
        .map(|s| {
            let m = fixtures::random_uid(500 + s, &shape);
            let r = solve_uid(&m, SolveOptions { trim_relevance: true }).map_err(|e| e.to_string());
            (m, r)
        })
        .collect()
}

fn trimming_soundness(trimmed: &[(Uid, Result<Strategy, String>)]) -> Outcome {
    let mut bad = Vec::new();
    let mut smaller = 0;
    for (i, (m, t)) in trimmed.iter().enumerate() {
        let full = solve_uid(m, SolveOptions::default());
        match (full, t) {
            (Ok(f), Ok(t)) => {
                if !close(f.meu, t.meu, 1e-9) {
                    bad.push(format!("model {i}: {} vs {}", f.meu, t.meu));
                }
                if t.sdag.len() < f.sdag.len() {
                    smaller += 1;
                }
            }
            (f, t) => bad.push(format!("model {i}: {:?} / {:?}", f.err().map(|e| e.to_string()), t.as_ref().err())),
        }
    }
    outcome(bad.is_empty(), format!("50 models, {smaller} with a smaller trimmed S-DAG{}", failures(&bad)))
}

fn monte_carlo() -> Outcome {
    let mut models = vec![fixtures::four_decisions(), fixtures::king(), fixtures::coin_match(), fixtures::unconstrained(3)];
    let shape = RandomShape::default();
    models.extend((0..6).map(|s| fixtures::random_uid(900 + s, &shape)));
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for (i, m) in models.iter().enumerate() {
        let res = solve_uid(m, SolveOptions::default())
            .map_err(|e| e.to_string())
            .and_then(|s| {
                let eu = strategy_eu(m, &s).map_err(|e| e.to_string())?;
                let (mean, se) = simulate(m, &s, 100_000, 7 + i as u64).map_err(|e| e.to_string())?;
                Ok((eu, mean, se))
            });
        match res {
            Ok((eu, mean, se)) => {
                let z = if se > 0.0 { (mean - eu).abs() / se } else { 0.0 };
                worst = worst.max(z);
                if (mean - eu).abs() > 4.0 * se + 1e-9 * (1.0 + eu.abs()) {
                    bad.push(format!("model {i}: mean {mean} eu {eu} se {se}"));
                }
            }
            Err(e) => bad.push(format!("model {i}: {e}")),
        }
    }
    outcome(bad.is_empty(), format!("10 models x 1e5 rollouts, largest deviation {worst:.2} standard errors{}", failures(&bad)))
}

fn main() -> ExitCode {
    let solved = solve_suite();
    let trimmed = trimmed_suite();
    let trimmed_results: Vec<Result<Strategy, String>> = trimmed.iter().map(|(_, r)| r.clone()).collect();

    let results: Vec<(&str, Outcome)> = vec![
        ("oracle equivalence", oracle_equivalence(&solved)),
        ("strategy achievement", strategy_achievement(&solved)),
        ("delayed observation never helps", delayed_observation()),
        ("merge consistency", merge_consistency(&solved, &trimmed_results)),
        ("four-decision walkthrough", four_decisions_walkthrough()),
        ("king's problem", kings_problem()),
        ("worst-case scaling", worst_case_scaling()),
        ("trimming soundness", trimming_soundness(&trimmed)),
        ("monte carlo", monte_carlo()),
    ];
    let mut all = true;
    for (i, (name, o)) in results.iter().enumerate() {
        all &= o.pass;
        println!("criterion {}: {} [{name}] {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        println!("acceptance: all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
