//! Procurement instances and the pre-drawn random tape.
//!
//! An [`Instance`] bundles the agents' true costs, the buyer's budget, a
//! valuation over agent subsets, and an independence constraint. Mechanisms
//! never read `costs` directly — they see declared bids, which coincide with
//! the costs only in truthful play.
//!
//! A [`RandomTape`] fixes in advance every coin a mechanism may flip, so that
//! for a fixed tape each mechanism is a deterministic function of the bids.
//! That is what makes universal truthfulness directly testable.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indep::ConstraintSpec;
use crate::valuation::ValuationSpec;

/// One procurement instance over agents `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub n: usize,
    pub budget: f64,
    pub costs: Vec<f64>,
    pub valuation: ValuationSpec,
    pub constraint: ConstraintSpec,
}

impl Instance {
    /// Checks arity and range of every field, naming the offending field in
    /// the error message.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.budget.is_finite() || self.budget <= 0.0 {
            return Err(ModelError::Validation(format!(
                "budget: must be a positive finite number, got {}",
                self.budget
            )));
        }
        if self.costs.len() != self.n {
            return Err(ModelError::Validation(format!(
                "costs: expected {} entries to match n, found {}",
                self.n,
                self.costs.len()
            )));
        }
        for (i, c) in self.costs.iter().enumerate() {
            if !c.is_finite() || *c < 0.0 {
                return Err(ModelError::Validation(format!(
                    "costs[{i}]: must be a non-negative finite number, got {c}"
                )));
            }
        }
        self.valuation
            .validate(self.n)
            .map_err(|e| ModelError::Validation(format!("valuation.{e}")))?;
        self.constraint
            .validate(self.n)
            .map_err(|e| ModelError::Validation(format!("constraint.{e}")))?;
        Ok(())
    }
}

/// An instance whose agents all have cost at most the budget, together with
/// the map back to the original agent indices (`kept[new] == original`).
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub instance: Instance,
    pub kept: Vec<usize>,
}

/// Drops every agent whose declared cost exceeds the budget. The surviving
/// instance has the same feasible solutions (an over-budget agent can never
/// be bought), so optima are preserved. Idempotent.
pub fn preprocess(instance: &Instance) -> Preprocessed {
    let kept: Vec<usize> = (0..instance.n)
        .filter(|&i| instance.costs[i] <= instance.budget)
        .collect();
    let instance = Instance {
        n: kept.len(),
        budget: instance.budget,
        costs: kept.iter().map(|&i| instance.costs[i]).collect(),
        valuation: instance.valuation.restrict(&kept),
        constraint: instance.constraint.restrict(&kept),
    };
    Preprocessed { instance, kept }
}

/// Every random decision a mechanism can make, drawn up front from a master
/// seed. Per-agent coins are indexed by agent id, so the number of draws
/// consumed never depends on the bids.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomTape {
    pub seed: u64,
    /// Selects the singleton/secretary branch vs. the greedy branch.
    pub branch_coin: f64,
    /// Offline sample split: agent i lands in the sample half iff `< 0.5`.
    pub partition_coins: Vec<f64>,
    /// n fair bits; their popcount is the online sample size xi ~ Bin(n, 1/2).
    pub xi_draws: Vec<bool>,
    /// Online per-agent coin for joining the secondary candidate set.
    pub t_coins: Vec<bool>,
    /// Online choice among the four candidate sets.
    pub s_choice: f64,
    /// Seed handed to randomized subroutines.
    pub sub_seed: u64,
}

impl RandomTape {
    pub fn draw(seed: u64, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let branch_coin = rng.gen::<f64>();
        let partition_coins = (0..n).map(|_| rng.gen::<f64>()).collect();
        let xi_draws = (0..n).map(|_| rng.gen::<bool>()).collect();
        let t_coins = (0..n).map(|_| rng.gen::<bool>()).collect();
        let s_choice = rng.gen::<f64>();
        let sub_seed = rng.gen::<u64>();
        RandomTape {
            seed,
            branch_coin,
            partition_coins,
            xi_draws,
            t_coins,
            s_choice,
            sub_seed,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive seed derivation for independent random streams.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut acc = 0u64;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

/// Why an agent was not bought.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    /// The quoted price was below the agent's bid.
    Cost,
    /// The quoted price exceeded the remaining budget of the target set.
    Budget,
    /// Adding the agent would have broken the independence constraint.
    Independence,
    /// The loop ended with the agent unexamined (no positive marginal left).
    NonpositiveMarginal,
    /// The agent was burned as part of the benchmark sample.
    SampleHalf,
    /// The declared cost alone exceeded the whole budget.
    OverBudgetCost,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RejectReason::Cost => "COST",
            RejectReason::Budget => "BUDGET",
            RejectReason::Independence => "INDEPENDENCE",
            RejectReason::NonpositiveMarginal => "NONPOSITIVE_MARGINAL",
            RejectReason::SampleHalf => "SAMPLE_HALF",
            RejectReason::OverBudgetCost => "OVER_BUDGET_COST",
        };
        f.write_str(s)
    }
}

/// Which top-level branch of a mechanism the tape selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Singleton,
    Secretary,
    Greedy,
}

/// Diagnostic record of a single mechanism run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub branch: Branch,
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub t1: Vec<usize>,
    pub t2: Vec<usize>,
    /// Benchmark value computed on the sample half (0 when not applicable).
    pub x: f64,
    /// Residual budgets of the two greedy sets after the loop.
    pub b1: f64,
    pub b2: f64,
    /// Greedy decision sequence: (agent, target set 1 or 2), acceptances and
    /// price-based rejections alike, in examination order.
    pub examined: Vec<(usize, u8)>,
    pub rejections: Vec<(usize, RejectReason)>,
}

impl Trace {
    pub fn new(branch: Branch, budget: f64) -> Self {
        Trace {
            branch,
            s1: Vec::new(),
            s2: Vec::new(),
            t1: Vec::new(),
            t2: Vec::new(),
            x: 0.0,
            b1: budget,
            b2: budget,
            examined: Vec::new(),
            rejections: Vec::new(),
        }
    }

    pub fn reject(&mut self, agent: usize, reason: RejectReason) {
        self.rejections.push((agent, reason));
    }

    /// Sorts the diagnostic lists so equal runs compare bit-identically.
    pub fn normalize(&mut self) {
        self.s1.sort_unstable();
        self.s2.sort_unstable();
        self.t1.sort_unstable();
        self.t2.sort_unstable();
        self.rejections.sort_unstable();
    }
}

/// The result a mechanism hands back: who is bought, at what payment, and the
/// bought set's value. `payments[i] == 0` for every non-winner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismOutcome {
    pub winners: Vec<usize>,
    pub payments: Vec<f64>,
    pub value: f64,
    /// Value-oracle queries consumed by the run, subroutines included.
    pub queries: u64,
    pub trace: Trace,
}

impl MechanismOutcome {
    pub fn empty(n: usize, trace: Trace) -> Self {
        MechanismOutcome {
            winners: Vec::new(),
            payments: vec![0.0; n],
            value: 0.0,
            queries: 0,
            trace,
        }
    }

    pub fn total_payment(&self) -> f64 {
        self.payments.iter().sum()
    }

    pub fn is_winner(&self, agent: usize) -> bool {
        self.winners.binary_search(&agent).is_ok()
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid instance: {0}")]
    Validation(String),
}

/// Reads and validates an instance from a JSON file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let instance: Instance = serde_json::from_str(&text)?;
    instance.validate()?;
    Ok(instance)
}

/// Validates and writes an instance as pretty-printed JSON.
pub fn save_instance(path: impl AsRef<Path>, instance: &Instance) -> Result<(), ModelError> {
    instance.validate()?;
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(instance)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| ModelError::Write {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuation::ValuationSpec;

    fn additive(n: usize, budget: f64, costs: Vec<f64>) -> Instance {
        Instance {
            n,
            budget,
            costs,
            valuation: ValuationSpec::Additive {
                weights: vec![1.0; n],
            },
            constraint: ConstraintSpec::None,
        }
    }

    #[test]
    fn preprocess_drops_over_budget_agents() {
        let inst = additive(3, 10.0, vec![2.0, 15.0, 3.0]);
        let pre = preprocess(&inst);
        assert_eq!(pre.kept, vec![0, 2]);
        assert_eq!(pre.instance.n, 2);
        assert_eq!(pre.instance.costs, vec![2.0, 3.0]);
    }

    #[test]
    fn preprocess_keeps_cost_exactly_at_budget() {
        let inst = additive(2, 5.0, vec![5.0, 5.1]);
        let pre = preprocess(&inst);
        assert_eq!(pre.kept, vec![0]);
    }

    #[test]
    fn preprocess_is_idempotent() {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 1 + (rng.gen::<usize>() % 8);
            let costs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0).collect();
            let inst = additive(n, 2.0, costs);
            let once = preprocess(&inst);
            let twice = preprocess(&once.instance);
            assert_eq!(once.instance, twice.instance);
            assert_eq!(twice.kept, (0..once.instance.n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn tape_is_deterministic_in_the_seed() {
        let a = RandomTape::draw(7, 5);
        let b = RandomTape::draw(7, 5);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_seeds_give_distinct_tapes() {
        for s in 0..100u64 {
            let a = RandomTape::draw(s, 5);
            let b = RandomTape::draw(s + 1000, 5);
            assert_ne!(a, b, "seeds {s} and {} collided", s + 1000);
        }
    }

    #[test]
    fn tape_handles_zero_agents() {
        let tape = RandomTape::draw(3, 0);
        assert!(tape.partition_coins.is_empty());
        assert!(tape.xi_draws.is_empty());
        assert!(tape.t_coins.is_empty());
    }

    #[test]
    fn validation_rejects_bad_budget_and_costs() {
        let mut inst = additive(2, 0.0, vec![1.0, 1.0]);
        let err = inst.validate().unwrap_err().to_string();
        assert!(err.contains("budget"), "{err}");

        inst.budget = 5.0;
        inst.costs[1] = -1.0;
        let err = inst.validate().unwrap_err().to_string();
        assert!(err.contains("costs[1]"), "{err}");
    }

    #[test]
    fn parse_error_names_missing_field() {
        let dir = std::env::temp_dir().join("bfm-model-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("missing-budget.json");
        fs::write(
            &path,
            r#"{"n": 1, "costs": [1.0],
                "valuation": {"type": "additive", "weights": [1.0]},
                "constraint": {"type": "none"}}"#,
        )
        .unwrap();
        let err = load_instance(&path).unwrap_err().to_string();
        assert!(err.contains("budget"), "{err}");
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join("bfm-model-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round-trip.json");
        let inst = additive(3, 2.5, vec![0.5, 1.0, 2.0]);
        save_instance(&path, &inst).unwrap();
        let back = load_instance(&path).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn mix_seed_is_order_sensitive() {
        assert_ne!(mix_seed(&[1, 2]), mix_seed(&[2, 1]));
        assert_eq!(mix_seed(&[1, 2]), mix_seed(&[1, 2]));
    }
}
