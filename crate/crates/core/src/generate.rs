//! Seeded random instances for the verification harness and the CLI.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::indep::ConstraintSpec;
use crate::model::Instance;
use crate::valuation::ValuationSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Additive,
    Cut,
    Coverage,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Additive, Family::Cut, Family::Coverage];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Additive => "additive",
            Family::Cut => "cut",
            Family::Coverage => "coverage",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown family '{s}'; expected additive, cut, or coverage"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    /// Edge probability (cut) or element-inclusion probability (coverage).
    pub p: f64,
    /// Budget as a fraction of the total declared cost.
    pub budget_frac: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            p: 0.4,
            budget_frac: 0.5,
        }
    }
}

/// A random instance of the given family: costs uniform on [0.1, 1], budget
/// a fixed fraction of their sum, no constraint. Deterministic in `seed`.
pub fn gen_instance(family: Family, n: usize, params: &GenParams, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..=1.0)).collect();
    let total: f64 = costs.iter().sum();
    let budget = if total > 0.0 {
        params.budget_frac * total
    } else {
        1.0
    };
    let valuation = match family {
        Family::Additive => ValuationSpec::Additive {
            weights: (0..n).map(|_| rng.gen_range(0.5..=5.0)).collect(),
        },
        Family::Cut => {
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen::<f64>() < params.p {
                        edges.push((u, v, 1.0));
                    }
                }
            }
            ValuationSpec::Cut {
                vertices: n,
                edges,
                agent_vertex: (0..n).collect(),
            }
        }
        Family::Coverage => {
            let elements = 2 * n;
            let element_weights: Vec<f64> =
                (0..elements).map(|_| rng.gen_range(0.5..=2.0)).collect();
            let agent_sets: Vec<Vec<usize>> = (0..n)
                .map(|_| {
                    (0..elements)
                        .filter(|_| rng.gen::<f64>() < params.p.min(0.5))
                        .collect()
                })
                .collect();
            ValuationSpec::Coverage {
                element_weights,
                agent_sets,
            }
        }
    };
    Instance {
        n,
        budget,
        costs,
        valuation,
        constraint: ConstraintSpec::None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    None,
    Cardinality,
    Partition,
    Matching,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 4] = [
        ConstraintKind::None,
        ConstraintKind::Cardinality,
        ConstraintKind::Partition,
        ConstraintKind::Matching,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ConstraintKind::None => "none",
            ConstraintKind::Cardinality => "cardinality",
            ConstraintKind::Partition => "partition",
            ConstraintKind::Matching => "matching",
        }
    }
}

impl std::str::FromStr for ConstraintKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConstraintKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                format!("unknown constraint '{s}'; expected none, cardinality, partition, or matching")
            })
    }
}

/// A random constraint of the given kind over `n` agents. Cardinality caps
/// at roughly half the agents, partitions use two to three parts covering
/// everyone with per-part caps of one or two, matchings place each agent on
/// a random edge of an `n`-vertex graph (minimum two vertices so loops are
/// avoidable). Deterministic in `seed`.
pub fn gen_constraint(kind: ConstraintKind, n: usize, seed: u64) -> ConstraintSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n == 0 {
        return match kind {
            ConstraintKind::None => ConstraintSpec::None,
            ConstraintKind::Cardinality => ConstraintSpec::Cardinality { k: 1 },
            ConstraintKind::Partition => ConstraintSpec::Partition {
                parts: Vec::new(),
                caps: Vec::new(),
            },
            ConstraintKind::Matching => ConstraintSpec::Matching {
                vertices: 2,
                agent_edge: Vec::new(),
            },
        };
    }
    match kind {
        ConstraintKind::None => ConstraintSpec::None,
        ConstraintKind::Cardinality => ConstraintSpec::Cardinality {
            k: rng.gen_range(1..=n.div_ceil(2)),
        },
        ConstraintKind::Partition => {
            let part_count = rng.gen_range(2..=3.min(n.max(2)));
            let mut parts: Vec<Vec<usize>> = vec![Vec::new(); part_count];
            for i in 0..n {
                parts[rng.gen_range(0..part_count)].push(i);
            }
            parts.retain(|p| !p.is_empty());
            let caps = parts.iter().map(|_| rng.gen_range(1..=2)).collect();
            ConstraintSpec::Partition { parts, caps }
        }
        ConstraintKind::Matching => {
            let vertices = n.max(2);
            let agent_edge = (0..n)
                .map(|_| {
                    let u = rng.gen_range(0..vertices);
                    let mut v = rng.gen_range(0..vertices - 1);
                    if v >= u {
                        v += 1;
                    }
                    (u, v)
                })
                .collect();
            ConstraintSpec::Matching {
                vertices,
                agent_edge,
            }
        }
    }
}

/// A uniformly random arrival permutation of `0..n`.
pub fn arrival_order(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_instances_validate_across_families_and_sizes() {
        for family in Family::ALL {
            for n in [0, 1, 2, 6, 10] {
                for seed in 0..10 {
                    let inst = gen_instance(family, n, &GenParams::default(), seed);
                    inst.validate().unwrap_or_else(|e| {
                        panic!("{} n={n} seed={seed}: {e}", family.as_str())
                    });
                    assert!(inst.budget > 0.0);
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        for family in Family::ALL {
            let a = gen_instance(family, 8, &GenParams::default(), 33);
            let b = gen_instance(family, 8, &GenParams::default(), 33);
            assert_eq!(a, b);
            let c = gen_instance(family, 8, &GenParams::default(), 34);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn generated_constraints_validate_and_attach() {
        for kind in ConstraintKind::ALL {
            for n in [0, 1, 2, 7, 12] {
                for seed in 0..10 {
                    let c = gen_constraint(kind, n, seed);
                    c.validate(n).unwrap_or_else(|e| {
                        panic!("{} n={n} seed={seed}: {e}", kind.as_str())
                    });
                    let mut inst = gen_instance(Family::Additive, n, &GenParams::default(), seed);
                    inst.constraint = c;
                    inst.validate().unwrap();
                }
            }
        }
    }

    #[test]
    fn partitions_cover_every_agent_exactly_once() {
        for seed in 0..20 {
            match gen_constraint(ConstraintKind::Partition, 9, seed) {
                ConstraintSpec::Partition { parts, caps } => {
                    assert_eq!(parts.len(), caps.len());
                    let mut all: Vec<usize> = parts.into_iter().flatten().collect();
                    all.sort_unstable();
                    assert_eq!(all, (0..9).collect::<Vec<_>>());
                }
                other => panic!("expected a partition, got {other:?}"),
            }
        }
    }

    #[test]
    fn arrival_orders_are_permutations() {
        for n in [0, 1, 5, 13] {
            for seed in 0..10 {
                let order = arrival_order(n, seed);
                let mut sorted = order.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..n).collect::<Vec<_>>());
                assert_eq!(order, arrival_order(n, seed));
            }
        }
    }

    #[test]
    fn family_names_round_trip() {
        for family in Family::ALL {
            assert_eq!(family.as_str().parse::<Family>().unwrap(), family);
        }
        assert!("xos".parse::<Family>().is_err());
        for kind in ConstraintKind::ALL {
            assert_eq!(kind.as_str().parse::<ConstraintKind>().unwrap(), kind);
        }
    }
}
