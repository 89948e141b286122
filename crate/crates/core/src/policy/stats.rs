//! Node reachability statistics: `P(q^t|π)`, `P(h^t|q^t,π)`, expected beliefs
//! and the other-agent node distributions `P(q_{−i}^t | q_i^t, π)`.

use super::{CompiledPolicy, JointPolicy};
use crate::belief::{observation_split, Belief, JointHistory};
use crate::error::{Error, Result};
use crate::model::{JointSpace, Problem};

/// Default cap on enumerated entries (histories per layer, or branches for
/// evaluation).
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// A positive-probability history consistent with the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub history: JointHistory,
    /// `P(h)`.
    pub joint_prob: f64,
    /// `P(h | q)` for the node the history ends at.
    pub prob: f64,
    /// `τ(h)`.
    pub belief: Belief,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointNodeStats {
    /// Per-agent local indices.
    pub node: Vec<usize>,
    pub reach_prob: f64,
    /// Empty when the node is unreachable.
    pub histories: Vec<HistoryEntry>,
    /// `Σ_h P(h|q) τ(h)`; `None` when unreachable.
    pub expected_belief: Option<Belief>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalNodeStats {
    pub reach_prob: f64,
    /// `(flat joint node, P(q_{−i} | q_i))` for every joint node containing this
    /// local node with positive probability, in flat order.
    pub cross: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStats {
    pub space: JointSpace,
    /// Indexed by flat joint node.
    pub joint: Vec<JointNodeStats>,
    /// `local[agent][k]`.
    pub local: Vec<Vec<LocalNodeStats>>,
}

/// Statistics for every layer of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats {
    pub layers: Vec<LayerStats>,
}

impl NodeStats {
    pub fn joint(&self, t: usize, node: usize) -> &JointNodeStats {
        &self.layers[t].joint[node]
    }

    pub fn local(&self, agent: usize, t: usize, k: usize) -> &LocalNodeStats {
        &self.layers[t].local[agent][k]
    }

    /// Total number of stored histories.
    pub fn history_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.joint)
            .map(|j| j.histories.len())
            .sum()
    }
}

struct Frontier {
    history: JointHistory,
    prob: f64,
    belief: Belief,
    node: usize,
}

fn summarize(
    space: &JointSpace,
    agents: usize,
    widths: &[usize],
    entries: &[Frontier],
) -> LayerStats {
    let n_s = entries.first().map_or(0, |e| e.belief.len());
    let mut reach = vec![0.0; space.size()];
    for e in entries {
        reach[e.node] += e.prob;
    }
    let mut joint: Vec<JointNodeStats> = (0..space.size())
        .map(|q| JointNodeStats {
            node: space.decode(q),
            reach_prob: reach[q],
            histories: Vec::new(),
            expected_belief: None,
        })
        .collect();
    let mut expected: Vec<Vec<f64>> = vec![Vec::new(); space.size()];
    for e in entries {
        let q = e.node;
        let cond = e.prob / reach[q];
        let acc = &mut expected[q];
        if acc.is_empty() {
            acc.resize(n_s, 0.0);
        }
        for (x, &b) in acc.iter_mut().zip(e.belief.as_slice()) {
            *x += cond * b;
        }
        joint[q].histories.push(HistoryEntry {
            history: e.history.clone(),
            joint_prob: e.prob,
            prob: cond,
            belief: e.belief.clone(),
        });
    }
    for (q, acc) in expected.into_iter().enumerate() {
        if !acc.is_empty() {
            joint[q].expected_belief = Some(Belief::from_vec(acc));
        }
    }

    let local = (0..agents)
        .map(|i| {
            (0..widths[i])
                .map(|k| {
                    let members: Vec<usize> = (0..space.size())
                        .filter(|&q| space.component(q, i) == k && reach[q] > 0.0)
                        .collect();
                    let total: f64 = members.iter().map(|&q| reach[q]).sum();
                    LocalNodeStats {
                        reach_prob: total,
                        cross: members.into_iter().map(|q| (q, reach[q] / total)).collect(),
                    }
                })
                .collect()
        })
        .collect();

    LayerStats {
        space: space.clone(),
        joint,
        local,
    }
}

/// Enumerates all consistent positive-probability histories of `policy` and
/// summarizes them per node, failing if any layer holds more than `cap`
/// histories.
pub fn compute_node_stats_with_cap(
    problem: &Problem,
    policy: &JointPolicy,
    cap: u128,
) -> Result<NodeStats> {
    policy.check(problem)?;
    let compiled = CompiledPolicy::new(problem, policy);
    let horizon = policy.horizon();
    let mut frontier = vec![Frontier {
        history: JointHistory::default(),
        prob: 1.0,
        belief: problem.initial_belief.clone(),
        node: 0,
    }];
    let mut layers = Vec::with_capacity(horizon);
    for t in 0..horizon {
        layers.push(summarize(
            compiled.layer_space(t),
            policy.agent_count(),
            &policy.widths(t),
            &frontier,
        ));
        if t + 1 == horizon {
            break;
        }
        let mut next = Vec::new();
        for e in &frontier {
            let action = compiled.action(t, e.node);
            for branch in observation_split(problem, e.belief.as_slice(), action) {
                next.push(Frontier {
                    history: e.history.extended(action, branch.observation),
                    prob: e.prob * branch.prob,
                    belief: branch.posterior,
                    node: compiled.next(t, e.node, branch.observation),
                });
                if next.len() as u128 > cap {
                    return Err(Error::CombinatorialLimitExceeded {
                        count: next.len() as u128,
                        cap,
                    });
                }
            }
        }
        frontier = next;
    }
    Ok(NodeStats { layers })
}

/// [`compute_node_stats_with_cap`] with [`DEFAULT_ENUMERATION_CAP`].
pub fn compute_node_stats(problem: &Problem, policy: &JointPolicy) -> Result<NodeStats> {
    compute_node_stats_with_cap(problem, policy, DEFAULT_ENUMERATION_CAP)
}
