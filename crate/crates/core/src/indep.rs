//! Downward-closed independence systems over agents and their rank quotient.
//!
//! The quotient bounds how far the system is from a matroid: for every
//! subset, the sizes of its maximal independent subsets differ by at most
//! that factor. Cardinality and partition constraints have quotient 1
//! (matroids); matchings have quotient at most 2.

use serde::{Deserialize, Serialize};

/// Membership test for an independence system. Implemented by
/// [`ConstraintSpec`]; tests may supply ad-hoc systems (e.g. vertex
/// independent sets of a graph) through the same trait.
pub trait IndependenceOracle {
    /// `set` holds distinct agent indices in any order.
    fn is_independent(&self, set: &[usize]) -> bool;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ConstraintSpec {
    None,
    Cardinality {
        k: usize,
    },
    /// `parts` lists disjoint agent groups; at most `caps[t]` agents may be
    /// chosen from `parts[t]`. Agents in no part are unconstrained.
    Partition {
        parts: Vec<Vec<usize>>,
        caps: Vec<usize>,
    },
    /// Each agent owns an edge; a set is independent when its edges form a
    /// matching.
    Matching {
        vertices: usize,
        agent_edge: Vec<(usize, usize)>,
    },
}

impl ConstraintSpec {
    pub fn validate(&self, n: usize) -> Result<(), String> {
        match self {
            ConstraintSpec::None | ConstraintSpec::Cardinality { .. } => Ok(()),
            ConstraintSpec::Partition { parts, caps } => {
                if parts.len() != caps.len() {
                    return Err(format!(
                        "caps: expected {} entries to match parts, found {}",
                        parts.len(),
                        caps.len()
                    ));
                }
                let mut owner = vec![None; n];
                for (t, part) in parts.iter().enumerate() {
                    for &i in part {
                        if i >= n {
                            return Err(format!("parts[{t}]: agent {i} out of range (n = {n})"));
                        }
                        if let Some(prev) = owner[i] {
                            return Err(format!(
                                "parts[{t}]: agent {i} already in parts[{prev}]"
                            ));
                        }
                        owner[i] = Some(t);
                    }
                }
                Ok(())
            }
            ConstraintSpec::Matching {
                vertices,
                agent_edge,
            } => {
                if agent_edge.len() != n {
                    return Err(format!(
                        "agent_edge: expected {n} entries, found {}",
                        agent_edge.len()
                    ));
                }
                for (i, (u, v)) in agent_edge.iter().enumerate() {
                    if *u >= *vertices || *v >= *vertices {
                        return Err(format!("agent_edge[{i}]: endpoint out of range"));
                    }
                    if u == v {
                        return Err(format!("agent_edge[{i}]: self-loop at vertex {u}"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Restriction to a sub-universe of agents, in `kept` order.
    pub fn restrict(&self, kept: &[usize]) -> ConstraintSpec {
        match self {
            ConstraintSpec::None => ConstraintSpec::None,
            ConstraintSpec::Cardinality { k } => ConstraintSpec::Cardinality { k: *k },
            ConstraintSpec::Partition { parts, caps } => {
                let new_index = |orig: usize| kept.iter().position(|&m| m == orig);
                ConstraintSpec::Partition {
                    parts: parts
                        .iter()
                        .map(|part| part.iter().filter_map(|&i| new_index(i)).collect())
                        .collect(),
                    caps: caps.clone(),
                }
            }
            ConstraintSpec::Matching {
                vertices,
                agent_edge,
            } => ConstraintSpec::Matching {
                vertices: *vertices,
                agent_edge: kept.iter().map(|&i| agent_edge[i]).collect(),
            },
        }
    }
}

impl IndependenceOracle for ConstraintSpec {
    fn is_independent(&self, set: &[usize]) -> bool {
        match self {
            ConstraintSpec::None => true,
            ConstraintSpec::Cardinality { k } => set.len() <= *k,
            ConstraintSpec::Partition { parts, caps } => {
                parts.iter().zip(caps).all(|(part, cap)| {
                    set.iter().filter(|i| part.contains(i)).count() <= *cap
                })
            }
            ConstraintSpec::Matching {
                vertices,
                agent_edge,
            } => {
                let mut used = vec![false; *vertices];
                for &i in set {
                    let (u, v) = agent_edge[i];
                    if used[u] || used[v] {
                        return false;
                    }
                    used[u] = true;
                    used[v] = true;
                }
                true
            }
        }
    }
}

/// Brute-force rank quotient max_S ur(S)/lr(S): the ratio of the largest to
/// the smallest maximal independent subset, maximized over all S ⊆ [n].
/// Returns 1.0 for systems whose singletons are all dependent. n <= 16.
pub fn rank_quotient(sys: &impl IndependenceOracle, n: usize) -> f64 {
    assert!(n <= 16, "rank quotient brute force limited to n <= 16, got {n}");
    let full: u32 = if n == 0 { 0 } else { (1 << n) - 1 };
    let size = (full as usize) + 1;

    let mut buf = Vec::with_capacity(n);
    let mut indep = vec![false; size];
    // ext[m]: elements e outside independent m with m ∪ {e} independent.
    let mut ext = vec![0u32; size];
    for mask in 0..=full {
        buf.clear();
        buf.extend((0..n).filter(|b| mask >> b & 1 == 1));
        indep[mask as usize] = sys.is_independent(&buf);
    }
    for mask in 0..=full {
        if !indep[mask as usize] {
            continue;
        }
        for e in 0..n {
            let bit = 1u32 << e;
            if mask & bit == 0 && indep[(mask | bit) as usize] {
                ext[mask as usize] |= bit;
            }
        }
    }

    let mut quotient = 1.0_f64;
    for s in 0..=full {
        let mut upper = 0u32;
        let mut lower = u32::MAX;
        let mut t = s;
        loop {
            if indep[t as usize] {
                let size = t.count_ones();
                upper = upper.max(size);
                // Maximal within s: no extension element of t lies in s.
                if ext[t as usize] & s == 0 {
                    lower = lower.min(size);
                }
            }
            if t == 0 {
                break;
            }
            t = (t - 1) & s;
        }
        if upper >= 1 {
            debug_assert!(lower >= 1, "independent subset exists but no maximal one");
            quotient = quotient.max(upper as f64 / lower as f64);
        }
    }
    quotient
}
