//! Truthful budget-feasible procurement mechanisms.
//!
//! All of them share one skeleton: burn a random half of the agents to
//! estimate a benchmark x, then walk the remaining agents offering each a
//! take-it-or-leave-it price proportional to its marginal value. An agent's
//! bid influences nothing but its own accept/reject test, so the quoted
//! price is exactly its threshold payment. A separate branch, taken with
//! constant probability, buys the best single agent (offline) or runs the
//! classic secretary rule (online) at price equal to the whole budget; that
//! branch covers instances dominated by one large agent.
//!
//! Randomness comes exclusively from a pre-drawn [`RandomTape`], making every
//! mechanism a deterministic function of (bids, tape) — the form in which
//! universal truthfulness is testable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indep::{ConstraintSpec, IndependenceOracle};
use crate::model::{mix_seed, Branch, Instance, MechanismOutcome, RandomTape, RejectReason, Trace};
use crate::subroutines::{
    constrained_greedy, double_greedy_unconstrained, dynkin, prune_independent,
    two_pass_knapsack, SolverResult,
};
use crate::valuation::ValueOracle;

/// Probability of buying the best single agent instead of running the
/// offline greedy.
pub const SINGLETON_PROB_OFFLINE: f64 = 0.201;
/// Price multiplier of the offline two-set greedy.
pub const BETA_OFFLINE: f64 = 9.185;
/// Probability of the online secretary branch.
pub const SECRETARY_PROB: f64 = 0.4;
/// Price multiplier of the online greedy.
pub const BETA_ONLINE: f64 = 8.725;
/// Singleton probability of the constrained mechanism for monotone
/// valuations.
pub const SINGLETON_PROB_MONOTONE: f64 = 0.2;
pub const BETA_MONOTONE: f64 = 13.0 / 3.0;
/// Singleton probability of the constrained mechanism for general
/// valuations.
pub const SINGLETON_PROB_CONSTRAINED: f64 = 1.0 / 3.0;
pub const BETA_CONSTRAINED: f64 = 8.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismId {
    /// The two-set greedy run standalone with a bid-independent benchmark
    /// (the best singleton value); mainly a harness for incentive tests.
    SimultaneousGreedy,
    /// Offline mechanism for general submodular valuations.
    GensmMain,
    /// Online (secretary) mechanism for general submodular valuations.
    GensmOnline,
    /// Cost-oblivious mode of the online mechanism: bids are the true costs.
    Sks,
    /// Constrained mechanism for monotone valuations under a p-system.
    MonsmConstrained,
    /// Constrained mechanism for general valuations under a p-system.
    GensmConstrained,
    /// Deliberately manipulable first-price greedy; exists so the
    /// verification harness can prove it catches violations.
    BrokenFirstPrice,
}

impl MechanismId {
    pub const ALL: [MechanismId; 7] = [
        MechanismId::SimultaneousGreedy,
        MechanismId::GensmMain,
        MechanismId::GensmOnline,
        MechanismId::Sks,
        MechanismId::MonsmConstrained,
        MechanismId::GensmConstrained,
        MechanismId::BrokenFirstPrice,
    ];

    /// The five incentive-bearing mechanisms (excludes the cost-oblivious
    /// mode and the deliberately broken control).
    pub const MECHANISMS: [MechanismId; 5] = [
        MechanismId::SimultaneousGreedy,
        MechanismId::GensmMain,
        MechanismId::GensmOnline,
        MechanismId::MonsmConstrained,
        MechanismId::GensmConstrained,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MechanismId::SimultaneousGreedy => "simultaneous-greedy",
            MechanismId::GensmMain => "gensm-main",
            MechanismId::GensmOnline => "gensm-online",
            MechanismId::Sks => "sks",
            MechanismId::MonsmConstrained => "monsm-constrained",
            MechanismId::GensmConstrained => "gensm-constrained",
            MechanismId::BrokenFirstPrice => "broken-first-price",
        }
    }

    pub fn needs_arrival_order(&self) -> bool {
        matches!(self, MechanismId::GensmOnline | MechanismId::Sks)
    }
}

impl std::fmt::Display for MechanismId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MechanismId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MechanismId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = MechanismId::ALL.iter().map(|id| id.as_str()).collect();
                format!("unknown mechanism '{s}'; expected one of {}", known.join(", "))
            })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MechanismError {
    #[error("{mechanism} requires a monotone valuation (additive or coverage); this instance's valuation is not structurally monotone")]
    RequiresMonotone { mechanism: &'static str },
    #[error("{mechanism} requires an independence constraint; this instance has none")]
    RequiresConstraint { mechanism: &'static str },
    #[error("bids must have one entry per agent (expected {n}, got {got})")]
    BadBidCount { n: usize, got: usize },
    #[error("bids[{agent}] must be a non-negative finite number, got {bid}")]
    BadBid { agent: usize, bid: f64 },
    #[error("arrival order must be a permutation of 0..{n}")]
    BadArrivalOrder { n: usize },
    #[error("{mechanism} is an online mechanism and needs an arrival order")]
    MissingArrivalOrder { mechanism: &'static str },
    #[error("agent {agent} is not a winner under the given bids")]
    NotAWinner { agent: usize },
}

fn validate_bids(n: usize, bids: &[f64]) -> Result<(), MechanismError> {
    if bids.len() != n {
        return Err(MechanismError::BadBidCount {
            n,
            got: bids.len(),
        });
    }
    for (agent, &bid) in bids.iter().enumerate() {
        if !bid.is_finite() || bid < 0.0 {
            return Err(MechanismError::BadBid { agent, bid });
        }
    }
    Ok(())
}

fn validate_order(n: usize, order: &[usize]) -> Result<(), MechanismError> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(MechanismError::BadArrivalOrder { n });
    }
    for &i in order {
        if i >= n || seen[i] {
            return Err(MechanismError::BadArrivalOrder { n });
        }
        seen[i] = true;
    }
    Ok(())
}

/// Mutable state of a running two-set greedy: the candidate sets in
/// acceptance order, their residual budgets, the unexamined pool, and the
/// prices committed so far.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyState {
    pub sets: [Vec<usize>; 2],
    pub residual: [f64; 2],
    pub unexamined: Vec<usize>,
    pub prices: BTreeMap<usize, f64>,
}

impl GreedyState {
    fn new(domain: &[usize], budget: f64) -> Self {
        let mut unexamined: Vec<usize> = domain.to_vec();
        unexamined.sort_unstable();
        GreedyState {
            sets: [Vec::new(), Vec::new()],
            residual: [budget, budget],
            unexamined,
            prices: BTreeMap::new(),
        }
    }
}

/// Offers agent `i` the price quoted for joining set `j`; commits on accept.
/// Returns whether the agent was accepted. Tag precedence on rejection:
/// COST before BUDGET.
fn offer(
    state: &mut GreedyState,
    trace: &mut Trace,
    bids: &[f64],
    i: usize,
    j: usize,
    price: f64,
) -> bool {
    trace.examined.push((i, j as u8 + 1));
    if bids[i] <= price && price <= state.residual[j] {
        state.sets[j].push(i);
        state.residual[j] -= price;
        state.prices.insert(i, price);
        true
    } else {
        if price < bids[i] {
            trace.reject(i, RejectReason::Cost);
        } else {
            trace.reject(i, RejectReason::Budget);
        }
        false
    }
}

/// Completes a greedy run: recomputes the secondary candidates from the
/// built sets, picks the best of the four (fixed order: set 1, set 2,
/// post-pass 1, post-pass 2; first strict maximum wins), and pays each winner
/// the price committed when it was accepted.
fn finish_candidates(
    oracle: &ValueOracle,
    n: usize,
    state: GreedyState,
    t1: Vec<usize>,
    t2: Vec<usize>,
    mut trace: Trace,
) -> MechanismOutcome {
    trace.s1 = state.sets[0].clone();
    trace.s2 = state.sets[1].clone();
    trace.t1 = t1.clone();
    trace.t2 = t2.clone();
    trace.b1 = state.residual[0];
    trace.b2 = state.residual[1];

    let candidates = [&trace.s1, &trace.s2, &trace.t1, &trace.t2];
    let mut chosen: &Vec<usize> = candidates[0];
    let mut best = f64::NEG_INFINITY;
    for cand in candidates {
        let mut sorted = cand.clone();
        sorted.sort_unstable();
        let v = oracle.value(&sorted);
        if v > best {
            best = v;
            chosen = cand;
        }
    }
    let mut winners = chosen.clone();
    winners.sort_unstable();
    let mut payments = vec![0.0; n];
    for &i in &winners {
        payments[i] = state.prices[&i];
    }
    trace.normalize();
    MechanismOutcome {
        winners,
        payments,
        value: best,
        queries: oracle.queries(),
        trace,
    }
}

/// The two-set greedy: repeatedly examine the (agent, set) pair with the
/// largest marginal — restricted to independence-preserving pairs when a
/// system is given — and offer the price (beta * budget / x) times that
/// marginal. Ties prefer the first set, then the lowest agent index. Every
/// examined agent is discarded from the pool, accepted or not.
fn greedy_core(
    oracle: &ValueOracle,
    bids: &[f64],
    domain: &[usize],
    budget: f64,
    x: f64,
    beta: f64,
    sys: Option<&dyn IndependenceOracle>,
    tape_seed: u64,
    mut trace: Trace,
) -> MechanismOutcome {
    assert!(x > 0.0, "benchmark x must be positive; callers skip x = 0");
    let n = bids.len();
    trace.x = x;
    let mut state = GreedyState::new(domain, budget);

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        let mut any_feasible = false;
        for j in 0..2 {
            for &i in &state.unexamined {
                if let Some(sys) = sys {
                    state.sets[j].push(i);
                    let ok = sys.is_independent(&state.sets[j]);
                    state.sets[j].pop();
                    if !ok {
                        continue;
                    }
                }
                any_feasible = true;
                let m = oracle.marginal(i, &state.sets[j]);
                if best.as_ref().is_none_or(|(bm, _, _)| m > *bm) {
                    best = Some((m, j, i));
                }
            }
        }
        if state.unexamined.is_empty() || !any_feasible || best.as_ref().unwrap().0 <= 0.0 {
            // Tag whoever the loop never reached: agents with no
            // independence-preserving slot first, the rest as unexamined.
            for &i in &state.unexamined {
                let feasible = |j: usize| {
                    sys.is_none_or(|sys| {
                        let mut probe = state.sets[j].clone();
                        probe.push(i);
                        sys.is_independent(&probe)
                    })
                };
                if feasible(0) || feasible(1) {
                    trace.reject(i, RejectReason::NonpositiveMarginal);
                } else {
                    trace.reject(i, RejectReason::Independence);
                }
            }
            break;
        }
        let (m, j, i) = best.unwrap();
        let price = beta * budget / x * m;
        offer(&mut state, &mut trace, bids, i, j, price);
        state.unexamined.retain(|&a| a != i);
    }

    let t1 = double_greedy_unconstrained(oracle, &state.sets[0], mix_seed(&[tape_seed, 3])).set;
    let t2 = double_greedy_unconstrained(oracle, &state.sets[1], mix_seed(&[tape_seed, 4])).set;
    let (t1, t2) = match sys {
        Some(sys) => (prune_independent(&t1, sys), prune_independent(&t2, sys)),
        None => (t1, t2),
    };
    finish_candidates(oracle, n, state, t1, t2, trace)
}

/// The two-set greedy with explicit benchmark and price multiplier, exposed
/// for direct study. `domain` members bidding above the budget can never be
/// accepted (their price test fails), but callers wanting clean trace tags
/// should filter them out first.
pub fn simultaneous_greedy(
    oracle: &ValueOracle,
    domain: &[usize],
    bids: &[f64],
    budget: f64,
    x: f64,
    beta: f64,
    tape_seed: u64,
) -> MechanismOutcome {
    greedy_core(
        oracle,
        bids,
        domain,
        budget,
        x,
        beta,
        None,
        tape_seed,
        Trace::new(Branch::Greedy, budget),
    )
}

/// Splits the eligible agents (bid within budget) into the benchmark sample
/// and the live half, tagging as it goes.
fn sample_split(
    n: usize,
    bids: &[f64],
    budget: f64,
    tape: &RandomTape,
    trace: &mut Trace,
) -> (Vec<usize>, Vec<usize>) {
    let mut sample = Vec::new();
    let mut live = Vec::new();
    for i in 0..n {
        if bids[i] > budget {
            trace.reject(i, RejectReason::OverBudgetCost);
        } else if tape.partition_coins[i] < 0.5 {
            trace.reject(i, RejectReason::SampleHalf);
            sample.push(i);
        } else {
            live.push(i);
        }
    }
    (sample, live)
}

/// Best single eligible agent by value (ties: lowest index), optionally
/// restricted to independent singletons. Returns (agent, value).
fn best_singleton(
    oracle: &ValueOracle,
    n: usize,
    bids: &[f64],
    budget: f64,
    sys: Option<&dyn IndependenceOracle>,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..n {
        if bids[i] > budget {
            continue;
        }
        if let Some(sys) = sys {
            if !sys.is_independent(&[i]) {
                continue;
            }
        }
        let v = oracle.value(&[i]);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((i, v));
        }
    }
    best
}

fn singleton_outcome(
    oracle: &ValueOracle,
    n: usize,
    bids: &[f64],
    budget: f64,
    sys: Option<&dyn IndependenceOracle>,
) -> MechanismOutcome {
    let mut trace = Trace::new(Branch::Singleton, budget);
    for i in 0..n {
        if bids[i] > budget {
            trace.reject(i, RejectReason::OverBudgetCost);
        }
    }
    match best_singleton(oracle, n, bids, budget, sys) {
        None => {
            let mut out = MechanismOutcome::empty(n, trace);
            out.queries = oracle.queries();
            out
        }
        Some((i, v)) => {
            let mut payments = vec![0.0; n];
            payments[i] = budget;
            trace.normalize();
            MechanismOutcome {
                winners: vec![i],
                payments,
                value: v,
                queries: oracle.queries(),
                trace,
            }
        }
    }
}

fn empty_greedy_outcome(
    oracle: &ValueOracle,
    n: usize,
    x: f64,
    mut trace: Trace,
    skipped: impl IntoIterator<Item = usize>,
    bids: &[f64],
    budget: f64,
) -> MechanismOutcome {
    trace.x = x;
    for i in skipped {
        if bids[i] > budget {
            trace.reject(i, RejectReason::OverBudgetCost);
        } else {
            trace.reject(i, RejectReason::NonpositiveMarginal);
        }
    }
    trace.normalize();
    let mut out = MechanismOutcome::empty(n, trace);
    out.queries = oracle.queries();
    out
}

/// Offline mechanism for general (possibly non-monotone) submodular
/// valuations: with small constant probability buy the best single agent at
/// the full budget; otherwise estimate a benchmark on a random half and run
/// the two-set greedy on the rest.
pub fn gensm_main(
    inst: &Instance,
    bids: &[f64],
    tape: &RandomTape,
) -> Result<MechanismOutcome, MechanismError> {
    validate_bids(inst.n, bids)?;
    let oracle = ValueOracle::new(&inst.valuation);
    let budget = inst.budget;

    if tape.branch_coin < SINGLETON_PROB_OFFLINE {
        return Ok(singleton_outcome(&oracle, inst.n, bids, budget, None));
    }
    let mut trace = Trace::new(Branch::Greedy, budget);
    let (sample, live) = sample_split(inst.n, bids, budget, tape, &mut trace);
    let x = two_pass_knapsack(&oracle, &sample, bids, budget, mix_seed(&[tape.sub_seed, 10])).value;
    if x <= 0.0 {
        return Ok(empty_greedy_outcome(
            &oracle, inst.n, x, trace, live, bids, budget,
        ));
    }
    let mut out = greedy_core(
        &oracle,
        bids,
        &live,
        budget,
        x,
        BETA_OFFLINE,
        None,
        mix_seed(&[tape.sub_seed, 20]),
        trace,
    );
    out.queries = oracle.queries();
    Ok(out)
}

fn online_slot(s_choice: f64) -> usize {
    if s_choice < 0.1 {
        0
    } else if s_choice < 0.2 {
        1
    } else if s_choice < 0.6 {
        2
    } else {
        3
    }
}

/// Online mechanism: agents arrive in `order` and each decision is
/// irrevocable. A 40% branch runs the secretary rule on singleton values and
/// pays the stopped agent the whole budget. Otherwise the first
/// xi ~ Bin(n, 1/2) arrivals are burned as the benchmark sample and each
/// later arrival is offered a price for the set where its marginal is
/// larger; which of the four candidate sets is actually bought was fixed by
/// the tape before the first arrival.
pub fn gensm_online(
    inst: &Instance,
    bids: &[f64],
    order: &[usize],
    tape: &RandomTape,
) -> Result<MechanismOutcome, MechanismError> {
    validate_bids(inst.n, bids)?;
    validate_order(inst.n, order)?;
    let oracle = ValueOracle::new(&inst.valuation);
    let budget = inst.budget;
    let n = inst.n;

    if tape.branch_coin < SECRETARY_PROB {
        let mut trace = Trace::new(Branch::Secretary, budget);
        let mut stream = Vec::new();
        for &i in order {
            if bids[i] > budget {
                trace.reject(i, RejectReason::OverBudgetCost);
            } else {
                stream.push(i);
            }
        }
        let values: Vec<f64> = stream.iter().map(|&i| oracle.value(&[i])).collect();
        let sample = (stream.len() as f64 / std::f64::consts::E).floor() as usize;
        for &i in &stream[..sample] {
            trace.reject(i, RejectReason::SampleHalf);
        }
        let outcome = match dynkin(&values) {
            None => {
                trace.normalize();
                let mut out = MechanismOutcome::empty(n, trace);
                out.queries = oracle.queries();
                out
            }
            Some(k) => {
                let winner = stream[k];
                let mut payments = vec![0.0; n];
                payments[winner] = budget;
                trace.normalize();
                MechanismOutcome {
                    winners: vec![winner],
                    payments,
                    value: values[k],
                    queries: oracle.queries(),
                    trace,
                }
            }
        };
        return Ok(outcome);
    }

    let mut trace = Trace::new(Branch::Greedy, budget);
    let xi = tape.xi_draws.iter().filter(|&&h| h).count();
    let sample: Vec<usize> = order[..xi].to_vec();
    for &i in &sample {
        trace.reject(i, RejectReason::SampleHalf);
    }
    let x = two_pass_knapsack(&oracle, &sample, bids, budget, mix_seed(&[tape.sub_seed, 10])).value;
    if x <= 0.0 {
        return Ok(empty_greedy_outcome(
            &oracle,
            n,
            x,
            trace,
            order[xi..].iter().copied(),
            bids,
            budget,
        ));
    }
    trace.x = x;

    let mut state = GreedyState::new(&[], budget);
    let mut t_sets: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for &i in &order[xi..] {
        if bids[i] > budget {
            trace.reject(i, RejectReason::OverBudgetCost);
            continue;
        }
        let m1 = oracle.marginal(i, &state.sets[0]);
        let m2 = oracle.marginal(i, &state.sets[1]);
        let (j, m) = if m2 > m1 { (1, m2) } else { (0, m1) };
        let price = BETA_ONLINE * budget / x * m;
        if offer(&mut state, &mut trace, bids, i, j, price) && tape.t_coins[i] {
            t_sets[j].push(i);
        }
    }

    let slot = online_slot(tape.s_choice);
    let chosen: &Vec<usize> = match slot {
        0 => &state.sets[0],
        1 => &state.sets[1],
        2 => &t_sets[0],
        _ => &t_sets[1],
    };
    let mut winners = chosen.clone();
    winners.sort_unstable();
    let value = oracle.value(&winners);
    let mut payments = vec![0.0; n];
    for &i in &winners {
        payments[i] = state.prices[&i];
    }
    trace.s1 = state.sets[0].clone();
    trace.s2 = state.sets[1].clone();
    trace.t1 = t_sets[0].clone();
    trace.t2 = t_sets[1].clone();
    trace.b1 = state.residual[0];
    trace.b2 = state.residual[1];
    trace.normalize();
    Ok(MechanismOutcome {
        winners,
        payments,
        value,
        queries: oracle.queries(),
        trace,
    })
}

/// The online mechanism run cost-obliviously: bids are the recorded costs,
/// and only the selected set matters. This is the algorithmic mode used for
/// approximation measurements of the online rule.
pub fn sks_run(
    inst: &Instance,
    order: &[usize],
    tape: &RandomTape,
) -> Result<SolverResult, MechanismError> {
    let out = gensm_online(inst, &inst.costs, order, tape)?;
    Ok(SolverResult {
        set: out.winners,
        value: out.value,
        queries: out.queries,
    })
}

/// Constrained mechanism for monotone valuations: one greedy set under the
/// independence system, prices proportional to marginals against a benchmark
/// from the sampled half. The loop examines every live agent exactly once,
/// largest current marginal first.
pub fn monsm_constrained(
    inst: &Instance,
    bids: &[f64],
    tape: &RandomTape,
) -> Result<MechanismOutcome, MechanismError> {
    validate_bids(inst.n, bids)?;
    if !inst.valuation.is_monotone() {
        return Err(MechanismError::RequiresMonotone {
            mechanism: MechanismId::MonsmConstrained.as_str(),
        });
    }
    if inst.constraint == ConstraintSpec::None {
        return Err(MechanismError::RequiresConstraint {
            mechanism: MechanismId::MonsmConstrained.as_str(),
        });
    }
    let oracle = ValueOracle::new(&inst.valuation);
    let budget = inst.budget;
    let sys = &inst.constraint;

    if tape.branch_coin < SINGLETON_PROB_MONOTONE {
        return Ok(singleton_outcome(&oracle, inst.n, bids, budget, Some(sys)));
    }
    let mut trace = Trace::new(Branch::Greedy, budget);
    let (sample, live) = sample_split(inst.n, bids, budget, tape, &mut trace);
    let x = constrained_greedy(
        &oracle,
        &sample,
        bids,
        budget,
        sys,
        true,
        mix_seed(&[tape.sub_seed, 10]),
    )
    .value;
    if x <= 0.0 {
        return Ok(empty_greedy_outcome(
            &oracle, inst.n, x, trace, live, bids, budget,
        ));
    }
    trace.x = x;

    let mut s: Vec<usize> = Vec::new();
    let mut residual = budget;
    let mut prices: BTreeMap<usize, f64> = BTreeMap::new();
    let mut alive = live;
    while !alive.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for &i in &alive {
            let m = oracle.marginal(i, &s);
            if best.as_ref().is_none_or(|(bm, _)| m > *bm) {
                best = Some((m, i));
            }
        }
        let (m, i) = best.unwrap();
        let price = BETA_MONOTONE * budget / x * m;
        trace.examined.push((i, 1));
        s.push(i);
        let independent = sys.is_independent(&s);
        s.pop();
        if bids[i] > price {
            trace.reject(i, RejectReason::Cost);
        } else if price > residual {
            trace.reject(i, RejectReason::Budget);
        } else if !independent {
            trace.reject(i, RejectReason::Independence);
        } else {
            s.push(i);
            residual -= price;
            prices.insert(i, price);
        }
        alive.retain(|&a| a != i);
    }

    let mut winners = s;
    winners.sort_unstable();
    let value = oracle.value(&winners);
    let mut payments = vec![0.0; inst.n];
    for &i in &winners {
        payments[i] = prices[&i];
    }
    trace.s1 = winners.clone();
    trace.b1 = residual;
    trace.normalize();
    Ok(MechanismOutcome {
        winners,
        payments,
        value,
        queries: oracle.queries(),
        trace,
    })
}

/// Constrained mechanism for general valuations: the two-set greedy
/// restricted to independence-preserving moves, with pruned double-greedy
/// post-passes.
pub fn gensm_constrained(
    inst: &Instance,
    bids: &[f64],
    tape: &RandomTape,
) -> Result<MechanismOutcome, MechanismError> {
    validate_bids(inst.n, bids)?;
    if inst.constraint == ConstraintSpec::None {
        return Err(MechanismError::RequiresConstraint {
            mechanism: MechanismId::GensmConstrained.as_str(),
        });
    }
    let oracle = ValueOracle::new(&inst.valuation);
    let budget = inst.budget;
    let sys = &inst.constraint;

    if tape.branch_coin < SINGLETON_PROB_CONSTRAINED {
        return Ok(singleton_outcome(&oracle, inst.n, bids, budget, Some(sys)));
    }
    let mut trace = Trace::new(Branch::Greedy, budget);
    let (sample, live) = sample_split(inst.n, bids, budget, tape, &mut trace);
    let x = constrained_greedy(
        &oracle,
        &sample,
        bids,
        budget,
        sys,
        false,
        mix_seed(&[tape.sub_seed, 10]),
    )
    .value;
    if x <= 0.0 {
        return Ok(empty_greedy_outcome(
            &oracle, inst.n, x, trace, live, bids, budget,
        ));
    }
    let mut out = greedy_core(
        &oracle,
        bids,
        &live,
        budget,
        x,
        BETA_CONSTRAINED,
        Some(sys),
        mix_seed(&[tape.sub_seed, 20]),
        trace,
    );
    out.queries = oracle.queries();
    Ok(out)
}

/// First-price density greedy: picks by marginal-per-bid and pays winners
/// their own bids. Overbidding up to the drop-out point raises a winner's
/// payment, so this rule is manipulable by design. Used as a control to show
/// the truthfulness checker has teeth.
pub fn broken_first_price_greedy(inst: &Instance, bids: &[f64]) -> Result<MechanismOutcome, MechanismError> {
    validate_bids(inst.n, bids)?;
    let oracle = ValueOracle::new(&inst.valuation);
    let budget = inst.budget;
    let mut trace = Trace::new(Branch::Greedy, budget);
    let eligible: Vec<usize> = (0..inst.n)
        .filter(|&i| {
            if bids[i] > budget {
                trace.reject(i, RejectReason::OverBudgetCost);
                false
            } else {
                true
            }
        })
        .collect();

    let mut s: Vec<usize> = Vec::new();
    let mut spent = 0.0;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for &i in &eligible {
            if s.contains(&i) || bids[i] > budget - spent {
                continue;
            }
            let m = oracle.marginal(i, &s);
            if m <= 0.0 {
                continue;
            }
            s.push(i);
            let independent = inst.constraint.is_independent(&s);
            s.pop();
            if !independent {
                continue;
            }
            let density = if bids[i] == 0.0 {
                f64::INFINITY
            } else {
                m / bids[i]
            };
            if best.is_none_or(|(_, bd)| density > bd) {
                best = Some((i, density));
            }
        }
        match best {
            Some((i, _)) => {
                spent += bids[i];
                s.push(i);
            }
            None => break,
        }
    }
    let mut winners = s;
    winners.sort_unstable();
    let value = oracle.value(&winners);
    let mut payments = vec![0.0; inst.n];
    for &i in &winners {
        payments[i] = bids[i];
    }
    trace.s1 = winners.clone();
    trace.b1 = budget - spent;
    trace.normalize();
    Ok(MechanismOutcome {
        winners,
        payments,
        value,
        queries: oracle.queries(),
        trace,
    })
}

/// Uniform dispatch over every runnable rule. Online rules require `order`;
/// the cost-oblivious mode ignores `bids` and uses the instance's recorded
/// costs.
pub fn run_mechanism(
    id: MechanismId,
    inst: &Instance,
    bids: &[f64],
    order: Option<&[usize]>,
    tape: &RandomTape,
) -> Result<MechanismOutcome, MechanismError> {
    let need_order = || {
        order.ok_or(MechanismError::MissingArrivalOrder {
            mechanism: id.as_str(),
        })
    };
    match id {
        MechanismId::SimultaneousGreedy => {
            validate_bids(inst.n, bids)?;
            let oracle = ValueOracle::new(&inst.valuation);
            let budget = inst.budget;
            let mut trace = Trace::new(Branch::Greedy, budget);
            let mut live = Vec::new();
            for i in 0..inst.n {
                if bids[i] > budget {
                    trace.reject(i, RejectReason::OverBudgetCost);
                } else {
                    live.push(i);
                }
            }
            // Benchmark from values only, so no bid can move it (bids only
            // gate eligibility, which is what the price test enforces
            // anyway).
            let x = live
                .iter()
                .map(|&i| oracle.value(&[i]))
                .fold(0.0_f64, f64::max);
            if x <= 0.0 {
                return Ok(empty_greedy_outcome(
                    &oracle, inst.n, x, trace, live, bids, budget,
                ));
            }
            trace.x = x;
            let mut out = greedy_core(
                &oracle,
                bids,
                &live,
                budget,
                x,
                BETA_OFFLINE,
                None,
                mix_seed(&[tape.sub_seed, 20]),
                trace,
            );
            out.queries = oracle.queries();
            Ok(out)
        }
        MechanismId::GensmMain => gensm_main(inst, bids, tape),
        MechanismId::GensmOnline => gensm_online(inst, bids, need_order()?, tape),
        MechanismId::Sks => gensm_online(inst, &inst.costs, need_order()?, tape),
        MechanismId::MonsmConstrained => monsm_constrained(inst, bids, tape),
        MechanismId::GensmConstrained => gensm_constrained(inst, bids, tape),
        MechanismId::BrokenFirstPrice => broken_first_price_greedy(inst, bids),
    }
}

/// Recovers a winner's threshold payment by binary search over its bid,
/// holding everyone else and the tape fixed. Converges to within
/// `1e-9 * budget` of the supremum winning bid; cross-checks the explicit
/// price a mechanism committed to.
pub fn payments_by_bid_search(
    id: MechanismId,
    inst: &Instance,
    bids: &[f64],
    order: Option<&[usize]>,
    tape: &RandomTape,
    winner: usize,
) -> Result<f64, MechanismError> {
    let wins = |bid: f64| -> Result<bool, MechanismError> {
        let mut deviated = bids.to_vec();
        deviated[winner] = bid;
        Ok(run_mechanism(id, inst, &deviated, order, tape)?.is_winner(winner))
    };
    if !wins(bids[winner])? {
        return Err(MechanismError::NotAWinner { agent: winner });
    }
    if wins(inst.budget)? {
        return Ok(inst.budget);
    }
    let mut lo = bids[winner];
    let mut hi = inst.budget;
    while hi - lo > 1e-9 * inst.budget {
        let mid = 0.5 * (lo + hi);
        if wins(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
