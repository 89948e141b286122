//! Layered policy graphs, node statistics and exact evaluation.
//!
//! A local policy is stored layer by layer. Node `(t, k)` of agent `i` emits
//! `layers[t][k].action` and moves to node `(t + 1, next[z_i])` after local
//! observation `z_i`. Nodes in the last layer have no transitions. A joint node
//! at layer `t` is a tuple of per-agent indices, flattened with agent 0 most
//! significant (the same convention as joint actions).

mod eval;
mod format;
mod rollout;
mod stats;

use rand::Rng;

use crate::belief::JointHistory;
use crate::error::{Error, Result};
use crate::model::{JointSpace, Problem};

pub use eval::{
    evaluate, evaluate_with_cap, local_node_value, node_value, node_value_lower_bound, value_at,
    CompiledPolicy, ValueCache,
};
pub use format::{parse_policy, serialize_policy};
pub use rollout::{rollout_estimate, RolloutEstimate};
pub use stats::{
    compute_node_stats, compute_node_stats_with_cap, HistoryEntry, JointNodeStats, LayerStats,
    LocalNodeStats, NodeStats, DEFAULT_ENUMERATION_CAP,
};

/// Attempts made to draw a node policy distinct from its siblings before a
/// duplicate is accepted.
pub const RANDOMIZE_ATTEMPTS: usize = 100;

/// Output action and per-observation successor of one policy node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolicyNode {
    pub action: usize,
    /// Successor index in the next layer for each local observation; empty in
    /// the last layer.
    pub next: Vec<usize>,
}

/// Temporally consistent policy graph of one agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalPolicy {
    pub layers: Vec<Vec<PolicyNode>>,
}

impl LocalPolicy {
    pub fn horizon(&self) -> usize {
        self.layers.len()
    }

    pub fn width(&self, t: usize) -> usize {
        self.layers[t].len()
    }

    pub fn node(&self, t: usize, k: usize) -> &PolicyNode {
        &self.layers[t][k]
    }

    /// Checks temporal consistency against the agent's action and observation
    /// counts.
    pub fn check(&self, actions: usize, observations: usize) -> Result<()> {
        let horizon = self.layers.len();
        if horizon == 0 {
            return Err(Error::InvalidPolicy("policy has no layers".into()));
        }
        if self.layers[0].len() != 1 {
            return Err(Error::InvalidPolicy(
                "first layer must hold exactly one node".into(),
            ));
        }
        for (t, layer) in self.layers.iter().enumerate() {
            if layer.is_empty() {
                return Err(Error::InvalidPolicy(format!("layer {t} is empty")));
            }
            let last = t + 1 == horizon;
            for (k, node) in layer.iter().enumerate() {
                if node.action >= actions {
                    return Err(Error::InvalidPolicy(format!(
                        "node ({t}, {k}) emits action {} of {actions}",
                        node.action
                    )));
                }
                if last {
                    if !node.next.is_empty() {
                        return Err(Error::InvalidPolicy(format!(
                            "last-layer node ({t}, {k}) has transitions"
                        )));
                    }
                    continue;
                }
                if node.next.len() != observations {
                    return Err(Error::InvalidPolicy(format!(
                        "node ({t}, {k}) has {} transitions, expected {observations}",
                        node.next.len()
                    )));
                }
                let bound = self.layers[t + 1].len();
                if let Some(&bad) = node.next.iter().find(|&&n| n >= bound) {
                    return Err(Error::InvalidPolicy(format!(
                        "node ({t}, {k}) transitions to missing node ({}, {bad})",
                        t + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One local policy per agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointPolicy {
    pub locals: Vec<LocalPolicy>,
}

impl JointPolicy {
    pub fn horizon(&self) -> usize {
        self.locals.first().map_or(0, LocalPolicy::horizon)
    }

    pub fn agent_count(&self) -> usize {
        self.locals.len()
    }

    /// Per-agent widths of layer `t`.
    pub fn widths(&self, t: usize) -> Vec<usize> {
        self.locals.iter().map(|l| l.width(t)).collect()
    }

    /// Flat indexing of the joint nodes of layer `t`.
    pub fn layer_space(&self, t: usize) -> JointSpace {
        JointSpace::new(&self.widths(t))
    }

    /// Joint output `γ(q)` as a flat joint action.
    pub fn joint_action(&self, problem: &Problem, t: usize, node: &[usize]) -> usize {
        let locals: Vec<usize> = node
            .iter()
            .enumerate()
            .map(|(i, &k)| self.locals[i].layers[t][k].action)
            .collect();
        problem.action_space().encode(&locals)
    }

    /// Joint transition `λ(q, z)`.
    pub fn next_node(
        &self,
        problem: &Problem,
        t: usize,
        node: &[usize],
        observation: usize,
    ) -> Vec<usize> {
        let zs = problem.observation_space();
        node.iter()
            .enumerate()
            .map(|(i, &k)| self.locals[i].layers[t][k].next[zs.component(observation, i)])
            .collect()
    }

    /// Checks temporal consistency and agreement with the problem's sizes.
    pub fn check(&self, problem: &Problem) -> Result<()> {
        if self.locals.len() != problem.agent_count {
            return Err(Error::InvalidPolicy(format!(
                "policy has {} agents, problem has {}",
                self.locals.len(),
                problem.agent_count
            )));
        }
        for (i, local) in self.locals.iter().enumerate() {
            if local.horizon() != problem.horizon {
                return Err(Error::InvalidPolicy(format!(
                    "agent {i} policy has horizon {}, problem has {}",
                    local.horizon(),
                    problem.horizon
                )));
            }
            local
                .check(problem.local_actions[i], problem.local_observations[i])
                .map_err(|e| Error::InvalidPolicy(format!("agent {i}: {e}")))?;
        }
        Ok(())
    }

    /// Width-one policy executing the given joint action at each step,
    /// regardless of observations.
    pub fn open_loop(problem: &Problem, actions: &[usize]) -> JointPolicy {
        let aspace = problem.action_space();
        let locals = (0..problem.agent_count)
            .map(|i| LocalPolicy {
                layers: actions
                    .iter()
                    .enumerate()
                    .map(|(t, &a)| {
                        let next = if t + 1 == actions.len() {
                            Vec::new()
                        } else {
                            vec![0; problem.local_observations[i]]
                        };
                        vec![PolicyNode {
                            action: aspace.component(a, i),
                            next,
                        }]
                    })
                    .collect(),
            })
            .collect();
        JointPolicy { locals }
    }

    /// Number of output/transition entries that differ from `other`.
    pub fn structural_difference(&self, other: &JointPolicy) -> usize {
        let mut diff = 0;
        for (a, b) in self.locals.iter().zip(&other.locals) {
            for (la, lb) in a.layers.iter().zip(&b.layers) {
                for (na, nb) in la.iter().zip(lb) {
                    diff += usize::from(na.action != nb.action);
                    diff += na.next.iter().zip(&nb.next).filter(|(x, y)| x != y).count();
                }
                diff += la.len().abs_diff(lb.len());
            }
        }
        diff
    }
}

/// Returns the joint node at which `history` ends, or `None` when some agent's
/// recorded action disagrees with its policy.
pub fn ends_at(
    problem: &Problem,
    policy: &JointPolicy,
    history: &JointHistory,
) -> Option<Vec<usize>> {
    let t_end = history.len();
    if t_end >= policy.horizon() || history.observations.len() != t_end {
        return None;
    }
    let aspace = problem.action_space();
    let zspace = problem.observation_space();
    let mut node = vec![0usize; policy.agent_count()];
    for (t, (&a, &z)) in history
        .actions
        .iter()
        .zip(&history.observations)
        .enumerate()
    {
        for (i, k) in node.iter_mut().enumerate() {
            let pn = &policy.locals[i].layers[t][*k];
            if pn.action != aspace.component(a, i) {
                return None;
            }
            *k = pn.next[zspace.component(z, i)];
        }
    }
    Some(node)
}

/// Layer widths for one agent: one start node, at most `width` nodes per
/// layer, never more than the number of structurally distinct local policies
/// a layer can hold, and the last layer clamped to the action count.
pub fn layer_widths(problem: &Problem, agent: usize, width: usize) -> Vec<usize> {
    let horizon = problem.horizon;
    let actions = problem.local_actions[agent] as u128;
    let observations = problem.local_observations[agent] as u32;
    let mut widths = vec![0usize; horizon];
    let mut next_width: u128 = 0;
    for t in (0..horizon).rev() {
        let capacity = if t + 1 == horizon {
            actions
        } else {
            next_width
                .checked_pow(observations)
                .and_then(|c| c.checked_mul(actions))
                .unwrap_or(u128::MAX)
        };
        let w = if t == 0 {
            1
        } else {
            (width.max(1) as u128).min(capacity) as usize
        };
        widths[t] = w;
        next_width = w as u128;
    }
    widths
}

fn random_node<R: Rng + ?Sized>(
    actions: usize,
    next: Option<(usize, usize)>,
    rng: &mut R,
) -> PolicyNode {
    let action = rng.gen_range(0..actions);
    let next = match next {
        Some((observations, width)) => (0..observations).map(|_| rng.gen_range(0..width)).collect(),
        None => Vec::new(),
    };
    PolicyNode { action, next }
}

/// Draws a random policy with the given width, avoiding structurally identical
/// nodes within a layer.
pub fn init_random_policy<R: Rng + ?Sized>(
    problem: &Problem,
    width: usize,
    rng: &mut R,
) -> JointPolicy {
    let horizon = problem.horizon;
    let locals = (0..problem.agent_count)
        .map(|i| {
            let widths = layer_widths(problem, i, width);
            let layers = (0..horizon)
                .map(|t| {
                    let next =
                        (t + 1 < horizon).then(|| (problem.local_observations[i], widths[t + 1]));
                    let mut layer: Vec<PolicyNode> = Vec::with_capacity(widths[t]);
                    for _ in 0..widths[t] {
                        let mut node = random_node(problem.local_actions[i], next, rng);
                        let mut attempts = 1;
                        while layer.contains(&node) && attempts < 10 * RANDOMIZE_ATTEMPTS {
                            node = random_node(problem.local_actions[i], next, rng);
                            attempts += 1;
                        }
                        layer.push(node);
                    }
                    layer
                })
                .collect();
            LocalPolicy { layers }
        })
        .collect();
    JointPolicy { locals }
}

/// Resamples node `(t, k)` of `agent` until it differs from every other node
/// of its layer, giving up after [`RANDOMIZE_ATTEMPTS`] draws.
pub fn randomize_node<R: Rng + ?Sized>(
    problem: &Problem,
    policy: &mut JointPolicy,
    agent: usize,
    t: usize,
    k: usize,
    rng: &mut R,
) {
    let local = &mut policy.locals[agent];
    let next =
        (t + 1 < local.horizon()).then(|| (problem.local_observations[agent], local.width(t + 1)));
    let mut node = random_node(problem.local_actions[agent], next, rng);
    let clashes = |layer: &[PolicyNode], node: &PolicyNode| {
        layer
            .iter()
            .enumerate()
            .any(|(j, other)| j != k && other == node)
    };
    let mut attempts = 1;
    while clashes(&local.layers[t], &node) && attempts < RANDOMIZE_ATTEMPTS {
        node = random_node(problem.local_actions[agent], next, rng);
        attempts += 1;
    }
    local.layers[t][k] = node;
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::belief::Belief;
    use crate::model::{FinalRewardSpec, Labels, RewardSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Single agent, 2 actions, 2 observations, 4 states, horizon 3.
    pub(crate) fn single_agent(horizon: usize) -> Problem {
        let n_s = 4;
        Problem {
            agent_count: 1,
            state_count: n_s,
            local_actions: vec![2],
            local_observations: vec![2],
            transition: vec![(0..n_s).map(|s| vec![(s, 1.0)]).collect(); 2],
            observation: vec![(0..n_s).map(|_| vec![(0, 0.5), (1, 0.5)]).collect(); 2],
            initial_belief: Belief::uniform(n_s),
            horizon,
            step_rewards: vec![RewardSpec::zero_linear(2, n_s); horizon],
            final_reward: FinalRewardSpec::Zero,
            labels: Labels::default(),
        }
    }

    /// Three layers: one start node, then two nodes per layer.
    fn example_graph() -> LocalPolicy {
        LocalPolicy {
            layers: vec![
                vec![PolicyNode {
                    action: 0,
                    next: vec![0, 1],
                }],
                vec![
                    PolicyNode {
                        action: 1,
                        next: vec![0, 1],
                    },
                    PolicyNode {
                        action: 1,
                        next: vec![1, 0],
                    },
                ],
                vec![
                    PolicyNode {
                        action: 0,
                        next: vec![],
                    },
                    PolicyNode {
                        action: 1,
                        next: vec![],
                    },
                ],
            ],
        }
    }

    #[test]
    fn example_graph_is_consistent() {
        let p = single_agent(3);
        let pol = JointPolicy {
            locals: vec![example_graph()],
        };
        pol.check(&p).unwrap();
    }

    #[test]
    fn ends_at_follows_observations() {
        let p = single_agent(3);
        let pol = JointPolicy {
            locals: vec![example_graph()],
        };
        assert_eq!(ends_at(&p, &pol, &JointHistory::default()), Some(vec![0]));
        let h = JointHistory {
            actions: vec![0],
            observations: vec![1],
        };
        assert_eq!(ends_at(&p, &pol, &h), Some(vec![1]));
        let wrong = JointHistory {
            actions: vec![1],
            observations: vec![1],
        };
        assert_eq!(ends_at(&p, &pol, &wrong), None);
        let h2 = h.extended(1, 0);
        assert_eq!(ends_at(&p, &pol, &h2), Some(vec![1]));
    }

    #[test]
    fn check_rejects_bad_graphs() {
        let p = single_agent(3);
        let mut g = example_graph();
        g.layers[1][0].next = vec![0, 2];
        assert!(JointPolicy { locals: vec![g] }.check(&p).is_err());
        let mut g = example_graph();
        g.layers[2][0].next = vec![0];
        assert!(JointPolicy { locals: vec![g] }.check(&p).is_err());
        let mut g = example_graph();
        g.layers[0].push(PolicyNode {
            action: 0,
            next: vec![0, 0],
        });
        assert!(JointPolicy { locals: vec![g] }.check(&p).is_err());
    }

    #[test]
    fn widths_follow_example_shape() {
        let p = single_agent(3);
        assert_eq!(layer_widths(&p, 0, 2), vec![1, 2, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pol = init_random_policy(&p, 2, &mut rng);
        assert_eq!(pol.widths(0), vec![1]);
        assert_eq!(pol.widths(1), vec![2]);
        assert_eq!(pol.widths(2), vec![2]);
        pol.check(&p).unwrap();
    }

    #[test]
    fn last_layer_clamped_to_action_count() {
        let p = single_agent(3);
        assert_eq!(layer_widths(&p, 0, 4), vec![1, 4, 2]);
        let p1 = single_agent(1);
        assert_eq!(layer_widths(&p1, 0, 4), vec![1]);
    }

    #[test]
    fn same_seed_same_policy() {
        let p = single_agent(4);
        let a = init_random_policy(&p, 3, &mut ChaCha8Rng::seed_from_u64(11));
        let b = init_random_policy(&p, 3, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    #[test]
    fn random_layers_have_distinct_nodes() {
        let p = single_agent(4);
        for seed in 0..20 {
            let pol = init_random_policy(&p, 3, &mut ChaCha8Rng::seed_from_u64(seed));
            for layer in &pol.locals[0].layers {
                for (j, a) in layer.iter().enumerate() {
                    assert!(layer[j + 1..].iter().all(|b| b != a));
                }
            }
        }
    }

    #[test]
    fn randomize_keeps_layer_distinct() {
        let p = single_agent(3);
        let mut pol = JointPolicy {
            locals: vec![example_graph()],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            randomize_node(&p, &mut pol, 0, 1, 1, &mut rng);
            assert_ne!(pol.locals[0].layers[1][0], pol.locals[0].layers[1][1]);
            pol.check(&p).unwrap();
        }
    }

    #[test]
    fn open_loop_policy_shape() {
        let p = single_agent(3);
        let pol = JointPolicy::open_loop(&p, &[1, 0, 1]);
        pol.check(&p).unwrap();
        assert_eq!(pol.locals[0].layers[2][0].action, 1);
        assert_eq!(pol.structural_difference(&pol.clone()), 0);
    }
}
