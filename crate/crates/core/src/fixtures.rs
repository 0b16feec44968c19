//! Reference models used by the tests, the acceptance suite and the CLI
//! examples, plus a seeded generator of small random UIDs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{ModelBuilder, Uid};

const BIN: &[&str] = &["0", "1"];

/// Three optional tests T1..T3 with results R1..R3 feed the main decision
/// MP; MP and a second, unrelated decision Wr jointly shape Wth, and the
/// final decision Rt is taken after Wr. The model forces the skeleton to
/// branch over the order of the three tests.
pub fn king() -> Uid {
    let mut b = ModelBuilder::new();
    b.observable("Wnd", &["calm", "windy"], &[], vec![0.7, 0.3])
        .hidden("QW", &["low", "high"], &["Wnd"], vec![0.6, 0.4, 0.3, 0.7])
        .hidden("QG", &["low", "high"], &["QW"], vec![0.8, 0.2, 0.25, 0.75]);
    let skip_test = [0.5, 0.5, 0.5, 0.5];
    let accuracy = [[0.8, 0.2, 0.3, 0.7], [0.75, 0.25, 0.2, 0.8], [0.9, 0.1, 0.4, 0.6]];
    for (i, acc) in accuracy.iter().enumerate() {
        let t = format!("T{}", i + 1);
        let r = format!("R{}", i + 1);
        b.decision(&t, &["skip", "test"], &[]);
        // rows (T, QW); a skipped test is uninformative
        let mut cpt = skip_test.to_vec();
        cpt.extend_from_slice(acc);
        b.observable(&r, &["neg", "pos"], &[&t, "QW"], cpt);
        b.cost(&t, vec![0.0, -(1.0 + i as f64 * 0.5)]);
    }
    b.decision("MP", &["no", "yes"], &["R1", "R2", "R3"])
        .observable("Wd", &["no", "yes"], &["MP"], vec![0.95, 0.05, 0.1, 0.9])
        .observable("Os", &["bad", "good"], &["Wd", "QW"], vec![0.5, 0.5, 0.5, 0.5, 0.7, 0.3, 0.15, 0.85])
        .decision("Wr", &["no", "yes"], &[])
        .observable(
            "Wth",
            &["bad", "good"],
            &["Wr", "QG", "Wd"],
            vec![
                0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, //
                0.9, 0.1, 0.6, 0.4, 0.4, 0.6, 0.05, 0.95,
            ],
        )
        .decision("Rt", &["stay", "go"], &["Wr"])
        .utility("U1", &["Os"], vec![-20.0, 40.0])
        .utility("U2", &["Wth"], vec![-5.0, 15.0])
        .utility(
            "U3",
            &["Rt", "Wd", "QW"],
            vec![0.0, 0.0, 5.0, 10.0, 2.0, -3.0, -8.0, 12.0],
        )
        .cost("Wr", vec![0.0, -2.0]);
    b.build().expect("king fixture is valid")
}

/// Four decisions where D2 and D3 may be taken in either order after D1
/// and the observation of B; D4 comes last.
pub fn four_decisions() -> Uid {
    let mut b = ModelBuilder::new();
    b.decision("D1", BIN, &[])
        .hidden("A", BIN, &["D1"], vec![0.7, 0.3, 0.2, 0.8])
        .observable("B", BIN, &["A"], vec![0.9, 0.1, 0.25, 0.75])
        .decision("D2", BIN, &["B"])
        .observable("C", BIN, &["D2"], vec![0.6, 0.4, 0.1, 0.9])
        .decision("D3", BIN, &["B"])
        .observable("E", BIN, &["D3"], vec![0.5, 0.5, 0.85, 0.15])
        .hidden("F", BIN, &["C", "E"], vec![0.9, 0.1, 0.4, 0.6, 0.3, 0.7, 0.05, 0.95])
        .decision("D4", BIN, &["C", "E"])
        .utility("U1", &["D1"], vec![0.0, -1.5])
        .utility("U2", &["A", "D2"], vec![4.0, -2.0, 0.0, 6.0])
        .utility("U3", &["D3"], vec![0.0, -0.5])
        .utility("U4", &["F", "D4"], vec![10.0, 2.0, -4.0, 8.0]);
    b.build().expect("four-decision fixture is valid")
}

/// A fair coin is seen before guessing it; a correct guess pays 1.
pub fn coin_match() -> Uid {
    let mut b = ModelBuilder::new();
    b.observable("X", &["h", "t"], &[], vec![0.5, 0.5])
        .decision("D", &["h", "t"], &["X"])
        .utility("U", &["X", "D"], vec![1.0, 0.0, 0.0, 1.0]);
    b.build().expect("coin fixture is valid")
}

/// As [`coin_match`] but the coin is never seen.
pub fn hidden_coin() -> Uid {
    let mut b = ModelBuilder::new();
    b.hidden("X", &["h", "t"], &[], vec![0.5, 0.5])
        .decision("D", &["h", "t"], &[])
        .utility("U", &["X", "D"], vec![1.0, 0.0, 0.0, 1.0]);
    b.build().expect("coin fixture is valid")
}

/// `n` binary decisions D1..Dn, each releasing its own observable Oi, and a
/// single utility over all observables. No order is imposed between the
/// decisions, so every order has to be considered.
pub fn unconstrained(n: usize) -> Uid {
    assert!(n >= 1);
    let mut b = ModelBuilder::new();
    let names: Vec<(String, String)> = (1..=n).map(|i| (format!("D{i}"), format!("O{i}"))).collect();
    for (i, (d, o)) in names.iter().enumerate() {
        let q = 0.55 + 0.4 * (i as f64 + 1.0) / (n as f64 + 1.0);
        b.decision(d, BIN, &[])
            .observable(o, BIN, &[d], vec![0.5, 0.5, 1.0 - q, q])
            .cost(d, vec![0.0, -0.1 * (i as f64 + 1.0)]);
    }
    let domain: Vec<&str> = names.iter().map(|(_, o)| o.as_str()).collect();
    let values = (0..1usize << n)
        .map(|cfg| {
            let ones = cfg.count_ones() as f64;
            // rewards runs of positive outcomes with a parity twist
            let bonus = if cfg & 1 == (cfg >> (n - 1)) & 1 { 1.5 } else { -0.5 };
            ones * ones / n as f64 + bonus
        })
        .collect();
    b.utility("U", &domain, values);
    b.build().expect("unconstrained fixture is valid")
}

/// Bounds for [`random_uid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomShape {
    pub max_decisions: usize,
    pub max_chance: usize,
    pub max_observables: usize,
    pub max_states: usize,
    pub max_utilities: usize,
    pub max_parents: usize,
    /// Chance that a CPT cell is forced to zero.
    pub zero_probability: f64,
    /// Chance that a decision gets a cost vector.
    pub cost_probability: f64,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape {
            max_decisions: 3,
            max_chance: 5,
            max_observables: 5,
            max_states: 3,
            max_utilities: 2,
            max_parents: 2,
            zero_probability: 0.1,
            cost_probability: 0.3,
        }
    }
}

impl RandomShape {
    /// Small enough for the oracle that also considers postponing
    /// observations.
    pub fn tiny() -> Self {
        RandomShape { max_decisions: 2, max_chance: 4, max_observables: 3, ..Self::default() }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Decision,
    Observable,
    Hidden,
}

/// A valid UID drawn deterministically from `seed`.
pub fn random_uid(seed: u64, shape: &RandomShape) -> Uid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_dec = rng.gen_range(1..=shape.max_decisions);
    let n_chance = rng.gen_range(1..=shape.max_chance);
    let n_obs = rng.gen_range(n_chance / 2..=n_chance).min(shape.max_observables);
    let mut slots = vec![Slot::Decision; n_dec];
    slots.extend(std::iter::repeat_n(Slot::Observable, n_obs));
    slots.extend(std::iter::repeat_n(Slot::Hidden, n_chance - n_obs));
    slots.shuffle(&mut rng);
    if rng.gen_bool(0.5) {
        // decisions first, so chance variables can depend on any of them
        slots.sort_by_key(|s| *s != Slot::Decision);
    }

    struct Var {
        name: String,
        slot: Slot,
        card: usize,
    }
    let mut vars: Vec<Var> = Vec::new();
    let (mut d, mut o, mut h) = (0, 0, 0);
    for slot in slots {
        let name = match slot {
            Slot::Decision => {
                d += 1;
                format!("D{d}")
            }
            Slot::Observable => {
                o += 1;
                format!("O{o}")
            }
            Slot::Hidden => {
                h += 1;
                format!("H{h}")
            }
        };
        vars.push(Var { name, slot, card: rng.gen_range(2..=shape.max_states) });
    }

    let mut b = ModelBuilder::new();
    for (i, v) in vars.iter().enumerate() {
        let pool: Vec<usize> = (0..i)
            .filter(|&j| v.slot != Slot::Decision || vars[j].slot != Slot::Hidden)
            .collect();
        let mut parents: Vec<usize> = Vec::new();
        let mut room = shape.max_parents;
        if v.slot == Slot::Decision {
            // half of the decisions get no information arcs at all
            if rng.gen_bool(0.5) {
                room = 0;
            }
        } else {
            // chance variables usually hang off some decision, which is what
            // leaves the order of decisions open
            let decisions: Vec<usize> = pool.iter().copied().filter(|&j| vars[j].slot == Slot::Decision).collect();
            if let Some(&d) = decisions.choose(&mut rng) {
                if room > 0 && rng.gen_bool(0.9) {
                    parents.push(d);
                }
            }
        }
        let rest: Vec<usize> = pool.iter().copied().filter(|j| !parents.contains(j)).collect();
        let k = rng.gen_range(0..=room.saturating_sub(parents.len()).min(rest.len()));
        parents.extend(rest.choose_multiple(&mut rng, k).copied());
        parents.sort();
        let pnames: Vec<&str> = parents.iter().map(|&j| vars[j].name.as_str()).collect();
        let states: Vec<String> = (0..v.card).map(|s| format!("s{s}")).collect();
        let states: Vec<&str> = states.iter().map(String::as_str).collect();
        match v.slot {
            Slot::Decision => {
                b.decision(&v.name, &states, &pnames);
                if rng.gen_bool(shape.cost_probability) {
                    let cost = (0..v.card).map(|_| -(rng.gen_range(0..4) as f64) * 0.5).collect();
                    b.cost(&v.name, cost);
                }
            }
            Slot::Observable | Slot::Hidden => {
                let rows: usize = parents.iter().map(|&j| vars[j].card).product();
                let cpt = (0..rows).flat_map(|_| random_row(&mut rng, v.card, shape.zero_probability)).collect();
                if v.slot == Slot::Observable {
                    b.observable(&v.name, &states, &pnames, cpt);
                } else {
                    b.hidden(&v.name, &states, &pnames, cpt);
                }
            }
        }
    }

    let n_util = rng.gen_range(1..=shape.max_utilities);
    for u in 0..n_util {
        // at least one decision or chance variable in every utility
        let k = rng.gen_range(1..=shape.max_parents.min(vars.len()).max(1));
        let mut dom: Vec<usize> = (0..vars.len()).collect::<Vec<_>>().choose_multiple(&mut rng, k).copied().collect();
        dom.sort();
        let size: usize = dom.iter().map(|&j| vars[j].card).product();
        let values = (0..size).map(|_| (rng.gen_range(-20..=40) as f64) * 0.25).collect();
        let names: Vec<&str> = dom.iter().map(|&j| vars[j].name.as_str()).collect();
        b.utility(&format!("U{}", u + 1), &names, values);
    }
    b.build().expect("random fixtures are valid by construction")
}

fn random_row(rng: &mut ChaCha8Rng, k: usize, zero: f64) -> Vec<f64> {
    let mut row: Vec<f64> = (0..k)
        .map(|_| if rng.gen_bool(zero) { 0.0 } else { rng.gen_range(1..=20) as f64 })
        .collect();
    if row.iter().all(|&x| x == 0.0) {
        row[rng.gen_range(0..k)] = 1.0;
    }
    let total: f64 = row.iter().sum();
    for x in &mut row {
        *x /= total;
    }
    // absorb rounding so the row sums to one within validation tolerance
    let drift: f64 = 1.0 - row.iter().sum::<f64>();
    let last = row.iter().rposition(|&x| x > 0.0).unwrap();
    row[last] += drift;
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VarKind;

    #[test]
    fn random_models_respect_the_shape() {
        let shape = RandomShape::default();
        for seed in 0..200 {
            let uid = random_uid(seed, &shape);
            assert!((1..=3).contains(&uid.decisions().len()));
            assert!(uid.chance().len() <= 5);
            assert!((1..=2).contains(&uid.utility_vars().len()));
            for v in uid.ids() {
                if uid.kind(v) != VarKind::Utility {
                    assert!(uid.card(v) <= 3);
                }
            }
        }
    }

    #[test]
    fn random_models_are_deterministic() {
        let shape = RandomShape::default();
        assert_eq!(random_uid(11, &shape), random_uid(11, &shape));
        assert_ne!(random_uid(11, &shape), random_uid(12, &shape));
    }

    #[test]
    fn tiny_shape() {
        for seed in 0..50 {
            let uid = random_uid(seed, &RandomShape::tiny());
            assert!(uid.decisions().len() <= 2 && uid.observables().len() <= 3);
        }
    }
}
