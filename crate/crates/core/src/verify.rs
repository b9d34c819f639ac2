//! Counterexample hunts for every guarantee the mechanisms make.
//!
//! Each suite turns one claimed property — truthfulness, threshold payments,
//! budget feasibility, approximation ceilings, the statistical lemmas behind
//! the sampling steps — into a seeded search for a violating input, and
//! reports what it found. A report with an empty violation list is a pass.
//! Every report is reproducible from (suite, master seed, scale) alone:
//! trials parallelize across instances, but results are collected and
//! aggregated in instance order, so reruns are byte-identical.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::generate::{
    arrival_order, gen_constraint, gen_instance, ConstraintKind, Family, GenParams,
};
use crate::indep::{rank_quotient, ConstraintSpec, IndependenceOracle};
use crate::mechanisms::{payments_by_bid_search, run_mechanism, MechanismId};
use crate::model::{mix_seed, Instance, MechanismOutcome, RandomTape};
use crate::subroutines::{brute_force_opt, random_half};
use crate::valuation::{
    check_submodular, generate_xos_hard_pair, SubmodularityMode, ValuationSpec, ValueOracle,
};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// One concrete property failure, with enough coordinates to replay it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub instance: String,
    pub tape_seed: u64,
    pub agent: Option<usize>,
    pub deviation: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub suite: String,
    pub trials: u64,
    pub stats: BTreeMap<String, f64>,
    pub notices: Vec<String>,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    fn new(suite: impl Into<String>) -> Self {
        VerificationReport {
            suite: suite.into(),
            trials: 0,
            stats: BTreeMap::new(),
            notices: Vec::new(),
            violations: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Keeps reports readable when a property is badly broken.
    fn cap_violations(&mut self) {
        const CAP: usize = 50;
        if self.violations.len() > CAP {
            let extra = self.violations.len() - CAP;
            self.violations.truncate(CAP);
            self.notices.push(format!("{extra} further violations truncated"));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Seconds; wired into unit tests.
    Smoke,
    /// The acceptance scale: minutes on a laptop.
    Desk,
    /// Overnight-ish; larger corpora and trial counts.
    Full,
}

impl std::str::FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smoke" => Ok(Scale::Smoke),
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(format!("unknown scale '{s}'; expected smoke, desk, or full")),
        }
    }
}

fn pick(scale: Scale, smoke: u64, desk: u64, full: u64) -> u64 {
    match scale {
        Scale::Smoke => smoke,
        Scale::Desk => desk,
        Scale::Full => full,
    }
}

/// Whether the mechanism accepts this instance at all (the constrained
/// variants refuse unconstrained or non-monotone input).
fn applicable(id: MechanismId, inst: &Instance) -> bool {
    match id {
        MechanismId::MonsmConstrained => {
            inst.valuation.is_monotone() && inst.constraint != ConstraintSpec::None
        }
        MechanismId::GensmConstrained => inst.constraint != ConstraintSpec::None,
        _ => true,
    }
}

fn utility(out: &MechanismOutcome, agent: usize, true_cost: f64) -> f64 {
    if out.is_winner(agent) {
        out.payments[agent] - true_cost
    } else {
        0.0
    }
}

/// Deviation bids for one agent: both sides of its own cost, the budget, and
/// (for winners) both sides of the committed threshold price.
fn deviation_grid(cost: f64, budget: f64, committed: Option<f64>) -> Vec<f64> {
    let mut grid = vec![0.0, cost / 2.0, cost, budget];
    if let Some(price) = committed {
        let delta = 1e-6 * budget;
        grid.extend([price - delta, price, price + delta, 2.0 * price]);
    }
    grid.retain(|b| b.is_finite() && *b >= 0.0);
    grid
}

/// A mixed corpus: `per_family` instances of each valuation family, sizes
/// cycling through `n_lo..=n_hi`, constraint kinds rotating so every
/// mechanism sees every kind.
fn corpus(master: u64, per_family: usize, n_lo: usize, n_hi: usize) -> Vec<(String, Instance)> {
    let kinds = [
        ConstraintKind::Cardinality,
        ConstraintKind::Partition,
        ConstraintKind::Matching,
    ];
    let mut out = Vec::with_capacity(3 * per_family);
    for (fi, family) in Family::ALL.iter().enumerate() {
        for k in 0..per_family {
            let seed = mix_seed(&[master, fi as u64, k as u64]);
            let n = n_lo + (mix_seed(&[seed, 99]) as usize) % (n_hi - n_lo + 1);
            let mut inst = gen_instance(*family, n, &GenParams::default(), seed);
            inst.constraint = gen_constraint(kinds[k % kinds.len()], n, mix_seed(&[seed, 5]));
            out.push((format!("{}/n{n}/i{k}", family.as_str()), inst));
        }
    }
    out
}

/// Replays every mechanism run against every grid deviation of every agent,
/// asserting the truthful report is a dominant strategy for the fixed tape.
pub fn check_truthfulness(
    ids: &[MechanismId],
    instances: &[(String, Instance)],
    tapes_per_instance: u64,
    master: u64,
) -> VerificationReport {
    let per_instance: Vec<(u64, Vec<Violation>)> = instances
        .par_iter()
        .enumerate()
        .map(|(idx, (name, inst))| {
            let mut trials = 0u64;
            let mut violations = Vec::new();
            for t in 0..tapes_per_instance {
                let tape_seed = mix_seed(&[master, idx as u64, t]);
                let tape = RandomTape::draw(tape_seed, inst.n);
                let order = arrival_order(inst.n, mix_seed(&[tape_seed, 7]));
                for &id in ids {
                    if !applicable(id, inst) {
                        continue;
                    }
                    let base = run_mechanism(id, inst, &inst.costs, Some(&order), &tape).unwrap();
                    for agent in 0..inst.n {
                        let truth_utility = utility(&base, agent, inst.costs[agent]);
                        let committed = if base.is_winner(agent) {
                            Some(base.payments[agent])
                        } else {
                            None
                        };
                        for dev in deviation_grid(inst.costs[agent], inst.budget, committed) {
                            trials += 1;
                            let mut bids = inst.costs.clone();
                            bids[agent] = dev;
                            let out =
                                run_mechanism(id, inst, &bids, Some(&order), &tape).unwrap();
                            let dev_utility = utility(&out, agent, inst.costs[agent]);
                            if dev_utility > truth_utility + 1e-9 {
                                violations.push(Violation {
                                    instance: format!("{name}/{id}"),
                                    tape_seed,
                                    agent: Some(agent),
                                    deviation: Some(dev),
                                    detail: format!(
                                        "deviating to {dev:.6} earns {dev_utility:.9}, truth earns {truth_utility:.9}"
                                    ),
                                });
                            }
                        }
                    }
                }
            }
            (trials, violations)
        })
        .collect();

    let mut report = VerificationReport::new("truthfulness");
    for (t, v) in per_instance {
        report.trials += t;
        report.violations.extend(v);
    }
    report
        .stats
        .insert("instances".into(), instances.len() as f64);
    report.cap_violations();
    report
}

/// Structural invariants any single outcome must satisfy. Returns the first
/// failure. `enforce_independence` applies to the constrained mechanisms,
/// whose winners must stay independent.
pub fn check_outcome(
    inst: &Instance,
    bids: &[f64],
    out: &MechanismOutcome,
    enforce_independence: bool,
) -> Option<String> {
    if out.payments.len() != inst.n {
        return Some(format!(
            "payments arity {} != n {}",
            out.payments.len(),
            inst.n
        ));
    }
    for w in out.winners.windows(2) {
        if w[0] >= w[1] {
            return Some(format!("winners not strictly increasing: {:?}", out.winners));
        }
    }
    if out.winners.iter().any(|&i| i >= inst.n) {
        return Some(format!("winner out of range: {:?}", out.winners));
    }
    let total = out.total_payment();
    if total > inst.budget * (1.0 + 1e-9) {
        return Some(format!(
            "total payment {total} exceeds budget {}",
            inst.budget
        ));
    }
    for i in 0..inst.n {
        if out.is_winner(i) {
            if out.payments[i] < bids[i] - 1e-12 {
                return Some(format!(
                    "winner {i} paid {} below its bid {}",
                    out.payments[i], bids[i]
                ));
            }
        } else if out.payments[i] != 0.0 {
            return Some(format!("non-winner {i} paid {}", out.payments[i]));
        }
    }
    if enforce_independence && !inst.constraint.is_independent(&out.winners) {
        return Some(format!("winners {:?} violate the constraint", out.winners));
    }
    let fresh = ValueOracle::new(&inst.valuation).value(&out.winners);
    if (out.value - fresh).abs() > 1e-9 * fresh.abs().max(1.0) {
        return Some(format!(
            "reported value {} differs from re-evaluated {fresh}",
            out.value
        ));
    }
    None
}

/// Budget feasibility, individual rationality, and constraint compliance on
/// `pairs_per_mechanism` fresh (instance, tape) pairs per mechanism.
pub fn check_budget_ir_feasibility(
    ids: &[MechanismId],
    instances: &[(String, Instance)],
    pairs_per_mechanism: u64,
    master: u64,
) -> VerificationReport {
    let jobs: Vec<(usize, u64)> = ids
        .iter()
        .enumerate()
        .flat_map(|(mi, _)| (0..pairs_per_mechanism).map(move |k| (mi, k)))
        .collect();
    let results: Vec<Option<Violation>> = jobs
        .par_iter()
        .map(|&(mi, k)| {
            let id = ids[mi];
            let usable: Vec<&(String, Instance)> = instances
                .iter()
                .filter(|(_, inst)| applicable(id, inst))
                .collect();
            let (name, inst) = usable[k as usize % usable.len()];
            let tape_seed = mix_seed(&[master, mi as u64, k]);
            let tape = RandomTape::draw(tape_seed, inst.n);
            let order = arrival_order(inst.n, mix_seed(&[tape_seed, 7]));
            let out = run_mechanism(id, inst, &inst.costs, Some(&order), &tape).unwrap();
            let enforce = matches!(
                id,
                MechanismId::MonsmConstrained | MechanismId::GensmConstrained
            );
            check_outcome(inst, &inst.costs, &out, enforce).map(|detail| Violation {
                instance: format!("{name}/{id}"),
                tape_seed,
                agent: None,
                deviation: None,
                detail,
            })
        })
        .collect();

    let mut report = VerificationReport::new("feasibility");
    report.trials = jobs.len() as u64;
    report.violations.extend(results.into_iter().flatten());
    report
        .stats
        .insert("pairs_per_mechanism".into(), pairs_per_mechanism as f64);
    report.cap_violations();
    report
}

/// Cross-validates every committed price against an independent bid search
/// until `target_winners` winners have been checked.
pub fn check_payment_crossval(
    ids: &[MechanismId],
    instances: &[(String, Instance)],
    target_winners: u64,
    master: u64,
) -> VerificationReport {
    let mut report = VerificationReport::new("payments");
    let mut checked = 0u64;
    'outer: for k in 0..10_000u64 {
        let (name, inst) = &instances[k as usize % instances.len()];
        let tape_seed = mix_seed(&[master, 3000 + k]);
        let tape = RandomTape::draw(tape_seed, inst.n);
        let order = arrival_order(inst.n, mix_seed(&[tape_seed, 7]));
        for &id in ids {
            if !applicable(id, inst) {
                continue;
            }
            let out = run_mechanism(id, inst, &inst.costs, Some(&order), &tape).unwrap();
            for &w in &out.winners {
                let found =
                    payments_by_bid_search(id, inst, &inst.costs, Some(&order), &tape, w).unwrap();
                report.trials += 1;
                checked += 1;
                if (found - out.payments[w]).abs() > 1e-8 * inst.budget {
                    report.violations.push(Violation {
                        instance: format!("{name}/{id}"),
                        tape_seed,
                        agent: Some(w),
                        deviation: None,
                        detail: format!(
                            "bid search found threshold {found}, mechanism committed {}",
                            out.payments[w]
                        ),
                    });
                }
                if checked >= target_winners {
                    break 'outer;
                }
            }
        }
    }
    if checked < target_winners {
        report
            .notices
            .push(format!("only {checked} winners found before the walk ended"));
    }
    report.stats.insert("winners_checked".into(), checked as f64);
    report.cap_violations();
    report
}

/// For each winner, every strictly lower bid must leave the winner set
/// bit-identical (allocation monotonicity in its strong form).
pub fn check_output_invariance(
    ids: &[MechanismId],
    instances: &[(String, Instance)],
    target_winners: u64,
    master: u64,
) -> VerificationReport {
    const LOWER_FRACTIONS: [f64; 6] = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9];
    let mut report = VerificationReport::new("invariance");
    let mut checked = 0u64;
    'outer: for k in 0..10_000u64 {
        let (name, inst) = &instances[k as usize % instances.len()];
        let tape_seed = mix_seed(&[master, 4000 + k]);
        let tape = RandomTape::draw(tape_seed, inst.n);
        let order = arrival_order(inst.n, mix_seed(&[tape_seed, 7]));
        for &id in ids {
            if !applicable(id, inst) {
                continue;
            }
            let base = run_mechanism(id, inst, &inst.costs, Some(&order), &tape).unwrap();
            for &w in &base.winners {
                if inst.costs[w] <= 0.0 {
                    continue;
                }
                checked += 1;
                for frac in LOWER_FRACTIONS {
                    report.trials += 1;
                    let mut bids = inst.costs.clone();
                    bids[w] = frac * inst.costs[w];
                    let out = run_mechanism(id, inst, &bids, Some(&order), &tape).unwrap();
                    if out.winners != base.winners {
                        report.violations.push(Violation {
                            instance: format!("{name}/{id}"),
                            tape_seed,
                            agent: Some(w),
                            deviation: Some(bids[w]),
                            detail: format!(
                                "lowering the bid changed winners from {:?} to {:?}",
                                base.winners, out.winners
                            ),
                        });
                    }
                }
                if checked >= target_winners {
                    break 'outer;
                }
            }
        }
    }
    if checked < target_winners {
        report
            .notices
            .push(format!("only {checked} winners found before the walk ended"));
    }
    report.stats.insert("winners_checked".into(), checked as f64);
    report.cap_violations();
    report
}

/// One approximation measurement: a family of instances, one mechanism, the
/// printed worst-case constant as a ceiling.
#[derive(Debug, Clone, Copy)]
pub struct RatioConfig {
    pub id: MechanismId,
    pub family: Family,
    pub constraint: ConstraintKind,
    pub instances: usize,
    pub n: usize,
    pub tapes: u64,
}

fn ratio_ceiling(id: MechanismId, p: f64) -> f64 {
    match id {
        MechanismId::GensmMain | MechanismId::SimultaneousGreedy => 505.0,
        MechanismId::GensmOnline | MechanismId::Sks => 1710.0,
        MechanismId::MonsmConstrained => 138.0 * (p + 10.0),
        MechanismId::GensmConstrained => 410.0 * (p + 10.0),
        MechanismId::BrokenFirstPrice => f64::INFINITY,
    }
}

/// Compares brute-force optima against the mechanism's mean value over many
/// tapes (mean first, then one ratio per instance). Fails if any instance's
/// ratio exceeds the ceiling for that mechanism and constraint class.
pub fn measure_ratio(cfg: &RatioConfig, master: u64) -> VerificationReport {
    let per_instance: Vec<Result<(f64, f64), String>> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let seed = mix_seed(&[master, i as u64]);
            let mut inst = gen_instance(cfg.family, cfg.n, &GenParams::default(), seed);
            inst.constraint = gen_constraint(cfg.constraint, cfg.n, mix_seed(&[seed, 5]));
            let oracle = ValueOracle::new(&inst.valuation);
            let domain: Vec<usize> = (0..inst.n).collect();
            let constrained = inst.constraint != ConstraintSpec::None;
            let opt = brute_force_opt(
                &oracle,
                &domain,
                &inst.costs,
                Some(inst.budget),
                &inst.constraint,
            )
            .value;
            if opt <= 0.0 {
                return Err(format!("instance {i}: optimum is 0, skipped"));
            }
            let mut sum = 0.0;
            for t in 0..cfg.tapes {
                let tape_seed = mix_seed(&[master, i as u64, 1000 + t]);
                let tape = RandomTape::draw(tape_seed, inst.n);
                let order = arrival_order(inst.n, mix_seed(&[tape_seed, 7]));
                let out = run_mechanism(cfg.id, &inst, &inst.costs, Some(&order), &tape).unwrap();
                sum += out.value;
            }
            let mean = sum / cfg.tapes as f64;
            let p = if constrained {
                rank_quotient(&inst.constraint, inst.n).ceil()
            } else {
                1.0
            };
            if mean <= 0.0 {
                return Ok((f64::INFINITY, p));
            }
            Ok((opt / mean, p))
        })
        .collect();

    let mut report = VerificationReport::new(match cfg.constraint {
        ConstraintKind::None => format!("ratio/{}", cfg.id),
        kind => format!("ratio/{}/{}", cfg.id, kind.as_str()),
    });
    let mut max_ratio = 0.0_f64;
    let mut sum_ratio = 0.0;
    let mut measured = 0u64;
    let mut max_ceiling = 0.0_f64;
    for (i, res) in per_instance.into_iter().enumerate() {
        match res {
            Err(notice) => report.notices.push(notice),
            Ok((ratio, p)) => {
                let ceiling = ratio_ceiling(cfg.id, p);
                max_ceiling = max_ceiling.max(ceiling);
                measured += 1;
                report.trials += cfg.tapes;
                max_ratio = max_ratio.max(ratio);
                sum_ratio += ratio;
                if ratio > ceiling {
                    report.violations.push(Violation {
                        instance: format!("{}/n{}/i{i}", cfg.family.as_str(), cfg.n),
                        tape_seed: mix_seed(&[master, i as u64]),
                        agent: None,
                        deviation: None,
                        detail: format!("ratio {ratio:.3} exceeds the ceiling {ceiling}"),
                    });
                }
            }
        }
    }
    if measured > 0 {
        report.stats.insert("max_ratio".into(), max_ratio);
        report
            .stats
            .insert("mean_ratio".into(), sum_ratio / measured as f64);
        report.stats.insert("ceiling".into(), max_ceiling);
    }
    report.stats.insert("instances_measured".into(), measured as f64);
    report.cap_violations();
    report
}

/// Monte-Carlo check that a uniformly random split leaves at least a
/// (k−1)/4k fraction of v(T) on both sides with probability ≥ 1/2.
/// Skips (with a notice) when v(T) < k · max singleton, the lemma's
/// precondition.
pub fn check_sampling_lemma(
    label: &str,
    spec: &ValuationSpec,
    n: usize,
    t_set: &[usize],
    k: u64,
    trials: u64,
    seed: u64,
    report: &mut VerificationReport,
) {
    let oracle = ValueOracle::new(spec);
    let v_t = oracle.value(t_set);
    let max_single = t_set
        .iter()
        .map(|&i| oracle.value(&[i]))
        .fold(0.0_f64, f64::max);
    if v_t + 1e-9 < k as f64 * max_single {
        report.notices.push(format!(
            "{label}: skipped, v(T) = {v_t:.3} < k·max singleton = {:.3}",
            k as f64 * max_single
        ));
        return;
    }
    let threshold = (k - 1) as f64 / (4 * k) as f64 * v_t;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0u64;
    for _ in 0..trials {
        let coins: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let t1 = random_half(t_set, &coins);
        let t2: Vec<usize> = t_set.iter().copied().filter(|&i| !coins[i]).collect();
        if oracle.value(&t1) >= threshold - 1e-12 && oracle.value(&t2) >= threshold - 1e-12 {
            successes += 1;
        }
    }
    report.trials += trials;
    let p_hat = successes as f64 / trials as f64;
    let sigma = (0.25 / trials as f64).sqrt();
    report.stats.insert(format!("{label}/p_hat"), p_hat);
    if p_hat < 0.5 - 3.0 * sigma {
        report.violations.push(Violation {
            instance: label.to_string(),
            tape_seed: seed,
            agent: None,
            deviation: None,
            detail: format!(
                "split success probability {p_hat:.4} below 0.5 - 3σ = {:.4}",
                0.5 - 3.0 * sigma
            ),
        });
    }
}

/// Monte-Carlo check that a uniformly random half of the ground set carries,
/// in expectation, at least a quarter of the unconstrained optimum.
pub fn check_feige_bound(
    label: &str,
    spec: &ValuationSpec,
    n: usize,
    trials: u64,
    seed: u64,
    report: &mut VerificationReport,
) {
    let oracle = ValueOracle::new(spec);
    let domain: Vec<usize> = (0..n).collect();
    let costs = vec![0.0; n];
    let opt = brute_force_opt(&oracle, &domain, &costs, None, &ConstraintSpec::None).value;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..trials {
        let coins: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let v = oracle.value(&random_half(&domain, &coins));
        sum += v;
        sumsq += v * v;
    }
    report.trials += trials;
    let mean = sum / trials as f64;
    let variance = (sumsq / trials as f64 - mean * mean).max(0.0);
    let stderr = (variance / trials as f64).sqrt();
    report.stats.insert(format!("{label}/mean"), mean);
    report.stats.insert(format!("{label}/quarter_opt"), 0.25 * opt);
    if opt <= 0.0 {
        report
            .notices
            .push(format!("{label}: unconstrained optimum is 0, trivial pass"));
        return;
    }
    if mean < 0.25 * opt - 3.0 * stderr {
        report.violations.push(Violation {
            instance: label.to_string(),
            tape_seed: seed,
            agent: None,
            deviation: None,
            detail: format!(
                "mean half-value {mean:.4} below opt/4 - 3·stderr = {:.4}",
                0.25 * opt - 3.0 * stderr
            ),
        });
    }
}

/// The non-submodular fixture the exhaustive checker must flag; losing it
/// would mean the checker lost its teeth.
pub fn xos_violation_fixture() -> ValuationSpec {
    ValuationSpec::Xos {
        tables: vec![vec![2.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]],
    }
}

/// Exhaustive diminishing-returns checks for the shipped families, plus the
/// negative control.
pub fn submodularity_suite(master: u64, scale: Scale) -> VerificationReport {
    let mut report = VerificationReport::new("submodularity");
    let per_family = pick(scale, 3, 10, 20) as usize;
    let n = match scale {
        Scale::Smoke => 6,
        _ => 8,
    };
    for family in Family::ALL {
        for i in 0..per_family {
            let seed = mix_seed(&[master, family as u64, i as u64]);
            let inst = gen_instance(family, n, &GenParams::default(), seed);
            let oracle = ValueOracle::new(&inst.valuation);
            let sub = check_submodular(&oracle, n, SubmodularityMode::Exhaustive);
            report.trials += sub.checks;
            if !sub.passed {
                report.violations.push(Violation {
                    instance: format!("{}/n{n}/i{i}", family.as_str()),
                    tape_seed: seed,
                    agent: None,
                    deviation: None,
                    detail: format!("counterexample: {:?}", sub.counterexample),
                });
            }
        }
    }
    let fixture = xos_violation_fixture();
    let oracle = ValueOracle::new(&fixture);
    let sub = check_submodular(&oracle, 3, SubmodularityMode::Exhaustive);
    report.trials += sub.checks;
    match sub.counterexample {
        Some(cex) if cex.form == 1 => {
            report.stats.insert("fixture_form".into(), 1.0);
        }
        other => {
            report.violations.push(Violation {
                instance: "xos-fixture".into(),
                tape_seed: 0,
                agent: None,
                deviation: None,
                detail: format!(
                    "the known non-submodular fixture was not flagged on form (i): {other:?}"
                ),
            });
        }
    }
    report
        .stats
        .insert("instances_checked".into(), (3 * per_family) as f64);
    report.cap_violations();
    report
}

/// Brute-force confirmation that the hard pair hides a factor-n^(1−ε/2) gap
/// behind sets that agree everywhere outside R.
pub fn hard_pair_suite(master: u64) -> VerificationReport {
    let mut report = VerificationReport::new("hard-pair");
    let n = 16;
    let pair = generate_xos_hard_pair(n, 1.0, mix_seed(&[master, 77])).unwrap();
    let base_oracle = ValueOracle::new(&pair.base.valuation);
    let planted_oracle = ValueOracle::new(&pair.planted.valuation);
    let domain: Vec<usize> = (0..n).collect();
    let costs = vec![0.0; n];
    let opt_base = brute_force_opt(&base_oracle, &domain, &costs, None, &ConstraintSpec::None).value;
    let opt_planted =
        brute_force_opt(&planted_oracle, &domain, &costs, None, &ConstraintSpec::None).value;
    report.stats.insert("opt_base".into(), opt_base);
    report.stats.insert("opt_planted".into(), opt_planted);
    let ratio = opt_planted / opt_base;
    report.stats.insert("gap".into(), ratio);
    if (ratio - 4.0).abs() > 1e-9 {
        report.violations.push(Violation {
            instance: "hard-pair/n16".into(),
            tape_seed: mix_seed(&[master, 77]),
            agent: None,
            deviation: None,
            detail: format!("optima gap {ratio} differs from the expected 4"),
        });
    }
    let r_mask: u32 = pair.r.iter().map(|&i| 1u32 << i).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[master, 78]));
    let mut sampled = 0u64;
    while sampled < 1000 {
        let mask = rng.gen::<u32>() & ((1 << n) - 1);
        if mask & !r_mask == 0 {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
        sampled += 1;
        report.trials += 1;
        let a = base_oracle.value(&set);
        let b = planted_oracle.value(&set);
        if (a - b).abs() > 1e-12 {
            report.violations.push(Violation {
                instance: "hard-pair/n16".into(),
                tape_seed: mix_seed(&[master, 78]),
                agent: None,
                deviation: None,
                detail: format!("set {set:?} not inside R separates the pair: {a} vs {b}"),
            });
            break;
        }
    }
    report.cap_violations();
    report
}

fn truthfulness_corpus(master: u64, scale: Scale) -> Vec<(String, Instance)> {
    let per_family = pick(scale, 4, 200, 300) as usize;
    let (n_lo, n_hi) = match scale {
        Scale::Smoke => (2, 7),
        _ => (2, 10),
    };
    corpus(master, per_family, n_lo, n_hi)
}

pub fn truthfulness_suite(master: u64, scale: Scale) -> VerificationReport {
    let instances = truthfulness_corpus(mix_seed(&[master, 1]), scale);
    let tapes = pick(scale, 3, 20, 40);
    check_truthfulness(
        &MechanismId::MECHANISMS,
        &instances,
        tapes,
        mix_seed(&[master, 11]),
    )
}

pub fn feasibility_suite(master: u64, scale: Scale) -> VerificationReport {
    let instances = truthfulness_corpus(mix_seed(&[master, 2]), scale);
    let pairs = pick(scale, 40, 500, 1500);
    check_budget_ir_feasibility(
        &MechanismId::MECHANISMS,
        &instances,
        pairs,
        mix_seed(&[master, 12]),
    )
}

pub fn payment_suite(master: u64, scale: Scale) -> VerificationReport {
    let instances = truthfulness_corpus(mix_seed(&[master, 3]), scale);
    let winners = pick(scale, 12, 120, 300);
    check_payment_crossval(
        &MechanismId::MECHANISMS,
        &instances,
        winners,
        mix_seed(&[master, 13]),
    )
}

pub fn invariance_suite(master: u64, scale: Scale) -> VerificationReport {
    let instances = truthfulness_corpus(mix_seed(&[master, 4]), scale);
    let winners = pick(scale, 12, 120, 300);
    check_output_invariance(
        &MechanismId::MECHANISMS,
        &instances,
        winners,
        mix_seed(&[master, 14]),
    )
}

pub fn ratio_suites(master: u64, scale: Scale) -> Vec<VerificationReport> {
    let tapes = pick(scale, 150, 2000, 4000);
    let instances = pick(scale, 4, 50, 80) as usize;
    let small = pick(scale, 3, 30, 50) as usize;
    let n_free = match scale {
        Scale::Smoke => 8,
        _ => 10,
    };
    let n_sys = match scale {
        Scale::Smoke => 7,
        _ => 9,
    };
    let configs = [
        RatioConfig {
            id: MechanismId::GensmMain,
            family: Family::Cut,
            constraint: ConstraintKind::None,
            instances,
            n: n_free,
            tapes,
        },
        RatioConfig {
            id: MechanismId::GensmOnline,
            family: Family::Cut,
            constraint: ConstraintKind::None,
            instances: small,
            n: n_free,
            tapes,
        },
        RatioConfig {
            id: MechanismId::MonsmConstrained,
            family: Family::Coverage,
            constraint: ConstraintKind::Cardinality,
            instances: small,
            n: n_sys,
            tapes,
        },
        RatioConfig {
            id: MechanismId::MonsmConstrained,
            family: Family::Coverage,
            constraint: ConstraintKind::Matching,
            instances: small,
            n: n_sys,
            tapes,
        },
        RatioConfig {
            id: MechanismId::GensmConstrained,
            family: Family::Cut,
            constraint: ConstraintKind::Partition,
            instances: small,
            n: n_sys,
            tapes,
        },
    ];
    configs
        .iter()
        .enumerate()
        .map(|(i, cfg)| measure_ratio(cfg, mix_seed(&[master, 15, i as u64])))
        .collect()
}

pub fn sampling_lemma_suite(master: u64, scale: Scale) -> VerificationReport {
    let mut report = VerificationReport::new("sampling-lemma");
    let trials = pick(scale, 2000, 10_000, 20_000);
    let n = 12;
    let all: Vec<usize> = (0..n).collect();
    let uniform = ValuationSpec::Additive {
        weights: vec![1.0; n],
    };
    let mixed = gen_instance(Family::Additive, n, &GenParams::default(), mix_seed(&[master, 31]));
    // Overlapping triples on a 24-element ring: v(T) = 24 against a max
    // singleton of 3, so the v(T) >= k * max precondition holds up to k = 8.
    let ring = ValuationSpec::Coverage {
        element_weights: vec![1.0; 2 * n],
        agent_sets: (0..n).map(|i| vec![2 * i, 2 * i + 1, (2 * i + 2) % (2 * n)]).collect(),
    };
    // Sparse random coverage keeps singletons small relative to v(T); if a
    // seed still lands outside the precondition the case skips with a notice.
    let sparse_params = GenParams { p: 0.1, ..GenParams::default() };
    let sparse = gen_instance(Family::Coverage, n, &sparse_params, mix_seed(&[master, 33]));
    let cases: [(&str, &ValuationSpec, u64); 6] = [
        ("additive-uniform-k2", &uniform, 2),
        ("additive-uniform-k4", &uniform, 4),
        ("additive-uniform-k11", &uniform, 11),
        ("additive-mixed-k2", &mixed.valuation, 2),
        ("coverage-ring-k4", &ring, 4),
        ("coverage-sparse-k2", &sparse.valuation, 2),
    ];
    for (i, (label, spec, k)) in cases.iter().enumerate() {
        check_sampling_lemma(
            label,
            spec,
            n,
            &all,
            *k,
            trials,
            mix_seed(&[master, 16, i as u64]),
            &mut report,
        );
    }
    let skipped = report.notices.len() as f64;
    report.stats.insert("cases_skipped".into(), skipped);
    report
        .stats
        .insert("cases_run".into(), cases.len() as f64 - skipped);
    report
}

pub fn feige_suite(master: u64, scale: Scale) -> VerificationReport {
    let mut report = VerificationReport::new("feige");
    let trials = pick(scale, 1000, 4000, 8000);
    let n = 12;
    for i in 0..5u64 {
        let inst = gen_instance(Family::Cut, n, &GenParams::default(), mix_seed(&[master, 41, i]));
        check_feige_bound(
            &format!("cut-{i}"),
            &inst.valuation,
            n,
            trials,
            mix_seed(&[master, 17, i]),
            &mut report,
        );
    }
    let additive = gen_instance(
        Family::Additive,
        n,
        &GenParams::default(),
        mix_seed(&[master, 42]),
    );
    check_feige_bound(
        "additive",
        &additive.valuation,
        n,
        trials,
        mix_seed(&[master, 17, 99]),
        &mut report,
    );
    report
}

/// The truthfulness checker run on the deliberately manipulable first-price
/// control; this report is expected to FAIL, proving the harness can see
/// violations at all.
pub fn broken_control_suite(master: u64, scale: Scale) -> VerificationReport {
    let per_family = pick(scale, 3, 10, 10) as usize;
    let instances = corpus(mix_seed(&[master, 5]), per_family, 2, 6);
    let mut report = check_truthfulness(
        &[MechanismId::BrokenFirstPrice],
        &instances,
        pick(scale, 2, 5, 5),
        mix_seed(&[master, 18]),
    );
    report.suite = "broken-control".into();
    report
}

/// Every suite at the given scale, in a fixed order. The broken control is
/// not included: its report fails by design.
pub fn run_all(master: u64, scale: Scale) -> Vec<VerificationReport> {
    let mut reports = vec![
        truthfulness_suite(master, scale),
        payment_suite(master, scale),
        invariance_suite(master, scale),
        feasibility_suite(master, scale),
    ];
    reports.extend(ratio_suites(master, scale));
    reports.push(sampling_lemma_suite(master, scale));
    reports.push(feige_suite(master, scale));
    reports.push(submodularity_suite(mix_seed(&[master, 19]), scale));
    reports.push(hard_pair_suite(master));
    reports
}

pub const SUITES: [&str; 7] = [
    "truthfulness",
    "feasibility",
    "sampling-lemma",
    "feige",
    "ratios",
    "submodularity",
    "all",
];

/// Runs one named suite (see [`SUITES`]). `truthfulness` bundles the payment
/// cross-validation and output-invariance reports; `submodularity` bundles
/// the hard-pair confirmation.
pub fn run_suite(name: &str, master: u64, scale: Scale) -> Result<Vec<VerificationReport>, String> {
    match name {
        "truthfulness" => Ok(vec![
            truthfulness_suite(master, scale),
            payment_suite(master, scale),
            invariance_suite(master, scale),
        ]),
        "feasibility" => Ok(vec![feasibility_suite(master, scale)]),
        "sampling-lemma" => Ok(vec![sampling_lemma_suite(master, scale)]),
        "feige" => Ok(vec![feige_suite(master, scale)]),
        "ratios" => Ok(ratio_suites(master, scale)),
        "submodularity" => Ok(vec![
            submodularity_suite(mix_seed(&[master, 19]), scale),
            hard_pair_suite(master),
        ]),
        "all" => Ok(run_all(master, scale)),
        _ => Err(format!(
            "unknown suite '{name}'; expected one of {}",
            SUITES.join(", ")
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoke_truthfulness_is_clean() {
        let report = truthfulness_suite(7, Scale::Smoke);
        assert!(report.passed(), "violations: {:#?}", report.violations);
        assert!(report.trials > 500);
    }

    #[test]
    fn broken_control_is_caught() {
        let report = broken_control_suite(7, Scale::Smoke);
        assert!(!report.passed());
        assert!(report
            .violations
            .iter()
            .all(|v| v.detail.contains("earns")));
    }

    #[test]
    fn outcome_checker_catches_injected_damage() {
        let inst = gen_instance(Family::Additive, 3, &GenParams::default(), 1);
        let tape = RandomTape::draw(5, 3);
        let out = run_mechanism(MechanismId::GensmMain, &inst, &inst.costs, None, &tape).unwrap();
        assert_eq!(check_outcome(&inst, &inst.costs, &out, false), None);

        let mut overpaid = out.clone();
        if overpaid.winners.is_empty() {
            overpaid.winners = vec![0];
        }
        overpaid.payments[overpaid.winners[0]] = inst.budget + 1.0;
        let msg = check_outcome(&inst, &inst.costs, &overpaid, false).unwrap();
        assert!(msg.contains("exceeds budget") || msg.contains("differs"));

        let mut underpaid = out.clone();
        underpaid.winners = vec![0, 1];
        underpaid.payments = vec![0.0; 3];
        assert!(check_outcome(&inst, &inst.costs, &underpaid, false).is_some());
    }

    #[test]
    fn smoke_feasibility_is_clean() {
        let report = feasibility_suite(7, Scale::Smoke);
        assert!(report.passed(), "violations: {:#?}", report.violations);
    }

    #[test]
    fn smoke_payment_crossval_is_clean() {
        let report = payment_suite(7, Scale::Smoke);
        assert!(report.passed(), "violations: {:#?}", report.violations);
        assert!(report.stats["winners_checked"] >= 12.0);
    }

    #[test]
    fn smoke_invariance_is_clean() {
        let report = invariance_suite(7, Scale::Smoke);
        assert!(report.passed(), "violations: {:#?}", report.violations);
    }

    #[test]
    fn sampling_lemma_skips_unsatisfiable_preconditions() {
        let mut report = VerificationReport::new("sampling-lemma");
        let spec = ValuationSpec::Additive {
            weights: vec![1.0; 4],
        };
        check_sampling_lemma("tiny-k9", &spec, 4, &[0, 1, 2, 3], 9, 100, 3, &mut report);
        assert_eq!(report.trials, 0);
        assert_eq!(report.notices.len(), 1);
        assert!(report.passed());
    }

    #[test]
    fn feige_bound_is_tight_for_additive() {
        let mut report = VerificationReport::new("feige");
        let spec = ValuationSpec::Additive {
            weights: vec![2.0; 6],
        };
        check_feige_bound("additive", &spec, 6, 2000, 3, &mut report);
        assert!(report.passed());
        let mean = report.stats["additive/mean"];
        assert!((mean - 6.0).abs() < 0.5);
    }

    #[test]
    fn submodularity_smoke_flags_only_the_fixture() {
        let report = submodularity_suite(7, Scale::Smoke);
        assert!(report.passed(), "violations: {:#?}", report.violations);
        assert_eq!(report.stats["fixture_form"], 1.0);
    }

    #[test]
    fn hard_pair_confirms_the_gap() {
        let report = hard_pair_suite(7);
        assert!(report.passed(), "violations: {:#?}", report.violations);
        assert_eq!(report.stats["gap"], 4.0);
    }

    #[test]
    fn reports_are_byte_identical_across_runs() {
        let a = serde_json::to_string(&run_suite("feasibility", 42, Scale::Smoke).unwrap()).unwrap();
        let b = serde_json::to_string(&run_suite("feasibility", 42, Scale::Smoke).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&truthfulness_suite(42, Scale::Smoke)).unwrap();
        let d = serde_json::to_string(&truthfulness_suite(42, Scale::Smoke)).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn unknown_suite_names_are_rejected() {
        assert!(run_suite("nope", 1, Scale::Smoke).is_err());
        for name in SUITES {
            if name == "all" {
                continue;
            }
            assert!(
                run_suite(name, 1, Scale::Smoke).is_ok(),
                "suite {name} failed to run"
            );
        }
    }
}
