//! Exact policy evaluation by forward enumeration of observation branches.

use std::collections::HashMap;

use super::{JointPolicy, NodeStats, DEFAULT_ENUMERATION_CAP};
use crate::belief::{observation_split, Belief};
use crate::error::{Error, Result};
use crate::model::{JointSpace, Problem};

struct CompiledLayer {
    space: JointSpace,
    action: Vec<usize>,
    /// `next[q * n_z + z]`, empty for the last layer.
    next: Vec<usize>,
}

/// Flat lookup tables for `γ` and `λ` over joint nodes.
pub struct CompiledPolicy {
    layers: Vec<CompiledLayer>,
    observations: usize,
}

impl CompiledPolicy {
    pub fn new(problem: &Problem, policy: &JointPolicy) -> Self {
        let horizon = policy.horizon();
        let mut compiled = CompiledPolicy {
            layers: Vec::with_capacity(horizon),
            observations: problem.joint_observation_count(),
        };
        for t in 0..horizon {
            compiled
                .layers
                .push(Self::compile_layer(problem, policy, t));
        }
        compiled
    }

    fn compile_layer(problem: &Problem, policy: &JointPolicy, t: usize) -> CompiledLayer {
        let aspace = problem.action_space();
        let zspace = problem.observation_space();
        let space = policy.layer_space(t);
        let last = t + 1 == policy.horizon();
        let next_space = (!last).then(|| policy.layer_space(t + 1));
        let n_z = zspace.size();
        let mut action = Vec::with_capacity(space.size());
        let mut next = Vec::with_capacity(if last { 0 } else { space.size() * n_z });
        let mut locals = vec![0usize; policy.agent_count()];
        let mut succ = vec![0usize; policy.agent_count()];
        for q in 0..space.size() {
            for (i, l) in locals.iter_mut().enumerate() {
                *l = space.component(q, i);
            }
            let acts: Vec<usize> = locals
                .iter()
                .enumerate()
                .map(|(i, &k)| policy.locals[i].layers[t][k].action)
                .collect();
            action.push(aspace.encode(&acts));
            if let Some(ns) = &next_space {
                for z in 0..n_z {
                    for (i, s) in succ.iter_mut().enumerate() {
                        *s = policy.locals[i].layers[t][locals[i]].next[zspace.component(z, i)];
                    }
                    next.push(ns.encode(&succ));
                }
            }
        }
        CompiledLayer {
            space,
            action,
            next,
        }
    }

    /// Rebuilds the tables of layer `t` after the policy changed there.
    pub fn recompile_layer(&mut self, problem: &Problem, policy: &JointPolicy, t: usize) {
        self.layers[t] = Self::compile_layer(problem, policy, t);
    }

    pub fn horizon(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_space(&self, t: usize) -> &JointSpace {
        &self.layers[t].space
    }

    #[inline]
    pub fn action(&self, t: usize, node: usize) -> usize {
        self.layers[t].action[node]
    }

    #[inline]
    pub fn next(&self, t: usize, node: usize, observation: usize) -> usize {
        self.layers[t].next[node * self.observations + observation]
    }
}

type BeliefKey = Vec<(u32, u64)>;

fn belief_key(belief: &[f64]) -> BeliefKey {
    belief
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(s, &p)| (s as u32, p.to_bits()))
        .collect()
}

/// Memo of `V_t(b, q)` keyed on layer, joint node and the exact belief bits.
///
/// Entries stay valid only while the policy layers they depend on (`t` and
/// later) are unchanged.
#[derive(Default)]
pub struct ValueCache {
    map: HashMap<(usize, usize, BeliefKey), f64>,
    pub hits: u64,
    pub misses: u64,
}

impl ValueCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.map.clear();
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

struct Walker<'a> {
    problem: &'a Problem,
    policy: &'a CompiledPolicy,
    cache: Option<&'a mut ValueCache>,
    expansions: u128,
    cap: u128,
}

impl Walker<'_> {
    fn value(&mut self, t: usize, belief: &[f64], node: usize) -> f64 {
        if self.expansions > self.cap {
            return 0.0;
        }
        self.expansions += 1;
        let key = self.cache.as_ref().map(|_| (t, node, belief_key(belief)));
        if let (Some(cache), Some(key)) = (self.cache.as_deref_mut(), key.as_ref()) {
            if let Some(&v) = cache.map.get(key) {
                cache.hits += 1;
                return v;
            }
            cache.misses += 1;
        }
        let problem = self.problem;
        let action = self.policy.action(t, node);
        let mut value = problem.step_rewards[t].evaluate(belief, action);
        let last = t + 1 == self.policy.horizon();
        for branch in observation_split(problem, belief, action) {
            let future = if last {
                problem.final_reward.evaluate(branch.posterior.as_slice())
            } else {
                let next = self.policy.next(t, node, branch.observation);
                self.value(t + 1, branch.posterior.as_slice(), next)
            };
            value += branch.prob * future;
        }
        if let (Some(cache), Some(key)) = (self.cache.as_deref_mut(), key) {
            cache.map.insert(key, value);
        }
        value
    }
}

/// `V_t(b, q)` for an arbitrary belief, by the backward value recursion
/// evaluated over all positive-probability observation branches.
pub fn value_at(
    problem: &Problem,
    policy: &CompiledPolicy,
    t: usize,
    belief: &[f64],
    node: usize,
    cache: Option<&mut ValueCache>,
) -> f64 {
    let mut walker = Walker {
        problem,
        policy,
        cache,
        expansions: 0,
        cap: u128::MAX,
    };
    walker.value(t, belief, node)
}

/// Exact value `V_0(b⁰, q⁰)` with a cap on the number of enumerated branches.
pub fn evaluate_with_cap(problem: &Problem, policy: &JointPolicy, cap: u128) -> Result<f64> {
    policy.check(problem)?;
    let compiled = CompiledPolicy::new(problem, policy);
    let mut walker = Walker {
        problem,
        policy: &compiled,
        cache: None,
        expansions: 0,
        cap,
    };
    let v = walker.value(0, problem.initial_belief.as_slice(), 0);
    if walker.expansions > cap {
        return Err(Error::CombinatorialLimitExceeded {
            count: walker.expansions,
            cap,
        });
    }
    Ok(v)
}

/// Exact value `V_0(b⁰, q⁰)` of a joint policy.
pub fn evaluate(problem: &Problem, policy: &JointPolicy) -> Result<f64> {
    evaluate_with_cap(problem, policy, DEFAULT_ENUMERATION_CAP)
}

fn reached(stats: &NodeStats, t: usize, node: usize) -> Result<&super::JointNodeStats> {
    let js = &stats.layers[t].joint[node];
    if js.reach_prob <= 0.0 {
        return Err(Error::UnreachableNode {
            layer: t,
            node: js.node.clone(),
        });
    }
    Ok(js)
}

/// Expected value of joint node `q^t` over the histories ending there.
pub fn node_value(
    problem: &Problem,
    policy: &JointPolicy,
    stats: &NodeStats,
    t: usize,
    node: usize,
) -> Result<f64> {
    let js = reached(stats, t, node)?;
    let compiled = CompiledPolicy::new(problem, policy);
    let mut cache = ValueCache::new();
    Ok(js
        .histories
        .iter()
        .map(|h| {
            h.prob
                * value_at(
                    problem,
                    &compiled,
                    t,
                    h.belief.as_slice(),
                    node,
                    Some(&mut cache),
                )
        })
        .sum())
}

/// Value of joint node `q^t` evaluated at its expected belief. Never exceeds
/// [`node_value`] when all rewards are convex in the belief; equal to it when
/// all rewards are linear.
pub fn node_value_lower_bound(
    problem: &Problem,
    policy: &JointPolicy,
    stats: &NodeStats,
    t: usize,
    node: usize,
) -> Result<f64> {
    let js = reached(stats, t, node)?;
    let compiled = CompiledPolicy::new(problem, policy);
    let b: &Belief = js
        .expected_belief
        .as_ref()
        .expect("reachable node has an expected belief");
    Ok(value_at(problem, &compiled, t, b.as_slice(), node, None))
}

/// Value of local node `(t, k)` of `agent`: the expectation of joint node
/// values over the other agents' nodes.
pub fn local_node_value(
    problem: &Problem,
    policy: &JointPolicy,
    stats: &NodeStats,
    agent: usize,
    t: usize,
    k: usize,
) -> Result<f64> {
    let ls = &stats.layers[t].local[agent][k];
    if ls.reach_prob <= 0.0 {
        let mut node = vec![0; policy.agent_count()];
        node[agent] = k;
        return Err(Error::UnreachableNode { layer: t, node });
    }
    let mut total = 0.0;
    for &(q, w) in &ls.cross {
        total += w * node_value(problem, policy, stats, t, q)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FinalRewardSpec, Labels, RewardSpec};
    use crate::policy::tests::single_agent;
    use crate::policy::{compute_node_stats, LocalPolicy, PolicyNode};

    #[test]
    fn zero_rewards_give_zero() {
        let p = single_agent(3);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let pol = crate::policy::init_random_policy(&p, 2, &mut rng);
        assert_eq!(evaluate(&p, &pol).unwrap(), 0.0);
    }

    #[test]
    fn revealing_observation_removes_entropy() {
        // Identity dynamics, observation equals the state, uniform prior.
        let p = Problem {
            agent_count: 1,
            state_count: 2,
            local_actions: vec![1],
            local_observations: vec![2],
            transition: vec![vec![vec![(0, 1.0)], vec![(1, 1.0)]]],
            observation: vec![vec![vec![(0, 1.0)], vec![(1, 1.0)]]],
            initial_belief: Belief::uniform(2),
            horizon: 1,
            step_rewards: vec![RewardSpec::zero_linear(1, 2)],
            final_reward: FinalRewardSpec::NegEntropy,
            labels: Labels::default(),
        };
        let pol = JointPolicy::open_loop(&p, &[0]);
        let v = evaluate(&p, &pol).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn start_node_value_equals_policy_value() {
        let mut p = single_agent(2);
        p.step_rewards[0] = RewardSpec::LinearStateAction {
            table: vec![vec![1.0, 0.0, 0.0, 0.5], vec![0.0, 2.0, 0.0, 0.0]],
        };
        p.final_reward = FinalRewardSpec::NegEntropy;
        let pol = JointPolicy {
            locals: vec![LocalPolicy {
                layers: vec![
                    vec![PolicyNode {
                        action: 1,
                        next: vec![0, 1],
                    }],
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
            }],
        };
        let stats = compute_node_stats(&p, &pol).unwrap();
        let v = evaluate(&p, &pol).unwrap();
        assert!((node_value(&p, &pol, &stats, 0, 0).unwrap() - v).abs() < 1e-12);
        // A single agent has no other nodes to average over.
        for k in 0..2 {
            let a = local_node_value(&p, &pol, &stats, 0, 1, k).unwrap();
            let b = node_value(&p, &pol, &stats, 1, k).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let p = single_agent(4);
        let pol = JointPolicy::open_loop(&p, &[0, 0, 0, 0]);
        assert!(matches!(
            evaluate_with_cap(&p, &pol, 5),
            Err(Error::CombinatorialLimitExceeded { .. })
        ));
        assert!(evaluate_with_cap(&p, &pol, 1000).is_ok());
    }

    #[test]
    fn cache_does_not_change_values() {
        let mut p = single_agent(3);
        p.final_reward = FinalRewardSpec::NegEntropy;
        p.observation = vec![
            (0..4)
                .map(|s| if s < 2 {
                    vec![(0, 0.7), (1, 0.3)]
                } else {
                    vec![(0, 0.2), (1, 0.8)]
                })
                .collect();
            2
        ];
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
        let pol = crate::policy::init_random_policy(&p, 2, &mut rng);
        let compiled = CompiledPolicy::new(&p, &pol);
        let mut cache = ValueCache::new();
        let b = p.initial_belief.as_slice();
        let plain = value_at(&p, &compiled, 0, b, 0, None);
        let first = value_at(&p, &compiled, 0, b, 0, Some(&mut cache));
        let second = value_at(&p, &compiled, 0, b, 0, Some(&mut cache));
        assert_eq!(plain, first);
        assert_eq!(first, second);
        assert!(cache.hits > 0);
    }
}
