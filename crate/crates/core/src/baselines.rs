//! Reference policies: best blind policy, open-loop sequences and an exhaustive
//! policy-tree oracle.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{JointSpace, Problem};
use crate::policy::{evaluate, JointPolicy, LocalPolicy, PolicyNode};

/// Default limit on `|A|^T` for exhaustive open-loop search.
pub const DEFAULT_OPEN_LOOP_CAP: u128 = 100_000;

/// Default limit on the number of joint policy trees the oracle enumerates.
pub const DEFAULT_ORACLE_CAP: u128 = 10_000_000;

/// The width-one policy repeating the best constant joint action, with its
/// value. Ties go to the lowest joint action.
pub fn best_blind_policy(problem: &Problem) -> Result<(JointPolicy, f64)> {
    let mut best: Option<(JointPolicy, f64)> = None;
    for a in 0..problem.joint_action_count() {
        let policy = JointPolicy::open_loop(problem, &vec![a; problem.horizon]);
        let value = evaluate(problem, &policy)?;
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((policy, value));
        }
    }
    Ok(best.expect("at least one joint action"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpenLoopSearch {
    Exhaustive,
    /// Heuristic stepwise choice, used when `|A|^T` exceeds the cap.
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenLoopResult {
    pub actions: Vec<usize>,
    pub value: f64,
    pub search: OpenLoopSearch,
}

fn sequence_value(problem: &Problem, actions: &[usize]) -> Result<f64> {
    evaluate(problem, &JointPolicy::open_loop(problem, actions))
}

/// Best fixed joint-action sequence. Exhaustive when `|A|^T ≤ cap`; otherwise
/// each step takes the action that is best if the episode ended right after it.
pub fn greedy_open_loop(problem: &Problem, cap: u128) -> Result<OpenLoopResult> {
    let n_a = problem.joint_action_count();
    let horizon = problem.horizon;
    let count = (n_a as u128).checked_pow(horizon as u32);
    if count.is_some_and(|c| c <= cap) {
        let space = JointSpace::new(&vec![n_a; horizon]);
        let values: Vec<Result<f64>> = (0..space.size())
            .into_par_iter()
            .map(|idx| sequence_value(problem, &space.decode(idx)))
            .collect();
        let mut best = (0, f64::NEG_INFINITY);
        for (idx, v) in values.into_iter().enumerate() {
            let v = v?;
            if v > best.1 {
                best = (idx, v);
            }
        }
        return Ok(OpenLoopResult {
            actions: space.decode(best.0),
            value: best.1,
            search: OpenLoopSearch::Exhaustive,
        });
    }
    let mut actions = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let truncated = problem.with_horizon(t + 1);
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..n_a {
            actions.push(a);
            let v = sequence_value(&truncated, &actions)?;
            actions.pop();
            if v > best.1 {
                best = (a, v);
            }
        }
        actions.push(best.0);
    }
    let value = sequence_value(problem, &actions)?;
    Ok(OpenLoopResult {
        actions,
        value,
        search: OpenLoopSearch::Greedy,
    })
}

/// States that may hold after agent `agent` takes `a_i` and then sees `z_i`,
/// over every choice of the other agents' actions. Empty when that local
/// observation is impossible.
fn local_successor_support(
    problem: &Problem,
    agent: usize,
    support: &[usize],
    a_i: usize,
    z_i: usize,
) -> Vec<usize> {
    let aspace = problem.action_space();
    let zspace = problem.observation_space();
    let mut reached = vec![false; problem.state_count];
    for a in (0..aspace.size()).filter(|&a| aspace.component(a, agent) == a_i) {
        for &s in support {
            for &(s2, p) in &problem.transition[a][s] {
                if p > 0.0
                    && !reached[s2]
                    && problem.observation[a][s2]
                        .iter()
                        .any(|&(z, pz)| pz > 0.0 && zspace.component(z, agent) == z_i)
                {
                    reached[s2] = true;
                }
            }
        }
    }
    (0..problem.state_count).filter(|&s| reached[s]).collect()
}

#[derive(Debug, Clone)]
struct Tree {
    action: usize,
    /// `None` for observations that cannot occur.
    children: Vec<Option<Tree>>,
}

fn count_trees(problem: &Problem, agent: usize, support: &[usize], depth: usize) -> u128 {
    let last = depth + 1 == problem.horizon;
    let n_a = problem.local_actions[agent];
    if last {
        return n_a as u128;
    }
    let mut total: u128 = 0;
    for a in 0..n_a {
        let mut product: u128 = 1;
        for z in 0..problem.local_observations[agent] {
            let child = local_successor_support(problem, agent, support, a, z);
            if !child.is_empty() {
                product = product.saturating_mul(count_trees(problem, agent, &child, depth + 1));
            }
        }
        total = total.saturating_add(product);
    }
    total
}

fn enumerate_trees(problem: &Problem, agent: usize, support: &[usize], depth: usize) -> Vec<Tree> {
    let n_a = problem.local_actions[agent];
    if depth + 1 == problem.horizon {
        return (0..n_a)
            .map(|action| Tree {
                action,
                children: Vec::new(),
            })
            .collect();
    }
    let mut out = Vec::new();
    for action in 0..n_a {
        let options: Vec<Option<Vec<Tree>>> = (0..problem.local_observations[agent])
            .map(|z| {
                let child = local_successor_support(problem, agent, support, action, z);
                (!child.is_empty()).then(|| enumerate_trees(problem, agent, &child, depth + 1))
            })
            .collect();
        let radices: Vec<usize> = options
            .iter()
            .map(|o| o.as_ref().map_or(1, Vec::len))
            .collect();
        let space = JointSpace::new(&radices);
        for idx in 0..space.size() {
            let children = options
                .iter()
                .enumerate()
                .map(|(z, o)| {
                    o.as_ref()
                        .map(|trees| trees[space.component(idx, z)].clone())
                })
                .collect();
            out.push(Tree { action, children });
        }
    }
    out
}

/// Lays a policy tree out as a layered graph, one node per tree node. Branches
/// for impossible observations point at node 0 of the next layer.
fn tree_to_local(tree: &Tree, horizon: usize) -> LocalPolicy {
    let mut layers: Vec<Vec<PolicyNode>> = Vec::with_capacity(horizon);
    let mut frontier = vec![tree];
    for t in 0..horizon {
        let mut next_frontier = Vec::new();
        let mut layer = Vec::with_capacity(frontier.len());
        for node in &frontier {
            let next = if t + 1 == horizon {
                Vec::new()
            } else {
                node.children
                    .iter()
                    .map(|c| match c {
                        Some(child) => {
                            next_frontier.push(child);
                            next_frontier.len() - 1
                        }
                        None => 0,
                    })
                    .collect()
            };
            layer.push(PolicyNode {
                action: node.action,
                next,
            });
        }
        layers.push(layer);
        frontier = next_frontier;
    }
    LocalPolicy { layers }
}

/// Number of joint policy trees the oracle would enumerate. Branches for local
/// observations that have probability zero under every joint policy are not
/// expanded, since their contents cannot affect the value.
pub fn oracle_tree_count(problem: &Problem) -> u128 {
    let support: Vec<usize> = (0..problem.state_count)
        .filter(|&s| problem.initial_belief.as_slice()[s] > 0.0)
        .collect();
    (0..problem.agent_count)
        .map(|i| count_trees(problem, i, &support, 0))
        .fold(1u128, u128::saturating_mul)
}

/// Optimal deterministic joint policy by exhaustive enumeration of policy
/// trees. Fails with [`Error::CapExceeded`] when more than `cap` joint trees
/// would be evaluated. Ties go to the first tree in enumeration order.
pub fn brute_force_optimal(problem: &Problem, cap: u128) -> Result<(JointPolicy, f64)> {
    let count = oracle_tree_count(problem);
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let support: Vec<usize> = (0..problem.state_count)
        .filter(|&s| problem.initial_belief.as_slice()[s] > 0.0)
        .collect();
    let per_agent: Vec<Vec<LocalPolicy>> = (0..problem.agent_count)
        .map(|i| {
            enumerate_trees(problem, i, &support, 0)
                .iter()
                .map(|t| tree_to_local(t, problem.horizon))
                .collect()
        })
        .collect();
    let space = JointSpace::new(&per_agent.iter().map(Vec::len).collect::<Vec<_>>());
    let build = |idx: usize| JointPolicy {
        locals: per_agent
            .iter()
            .enumerate()
            .map(|(i, list)| list[space.component(idx, i)].clone())
            .collect(),
    };
    let values: Vec<Result<f64>> = (0..space.size())
        .into_par_iter()
        .map(|idx| evaluate(problem, &build(idx)))
        .collect();
    let mut best = (0, f64::NEG_INFINITY);
    for (idx, v) in values.into_iter().enumerate() {
        let v = v?;
        if v > best.1 {
            best = (idx, v);
        }
    }
    Ok((build(best.0), best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::Belief;
    use crate::model::{FinalRewardSpec, Labels, RewardSpec};
    use crate::policy::tests::single_agent;

    fn sequence_problem() -> Problem {
        // One agent, 2 actions, 1 observation, T=2: trees collapse to sequences.
        Problem {
            agent_count: 1,
            state_count: 2,
            local_actions: vec![2],
            local_observations: vec![1],
            transition: vec![
                vec![vec![(1, 1.0)], vec![(1, 1.0)]],
                vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            ],
            observation: vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]; 2],
            initial_belief: Belief::point(2, 0),
            horizon: 2,
            step_rewards: vec![
                RewardSpec::LinearStateAction {
                    table: vec![vec![0.0, 0.0], vec![0.5, 0.0]],
                },
                RewardSpec::LinearStateAction {
                    table: vec![vec![0.0, 2.0], vec![0.0, 0.0]],
                },
            ],
            final_reward: FinalRewardSpec::Zero,
            labels: Labels::default(),
        }
    }

    #[test]
    fn single_observation_reduces_to_sequences() {
        let p = sequence_problem();
        assert_eq!(oracle_tree_count(&p), 4);
        // Sequence values: (0,0)=2, (0,1)=0, (1,0)=0.5, (1,1)=0.5.
        let (pol, v) = brute_force_optimal(&p, 100).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(pol.locals[0].layers[0][0].action, 0);
        let ol = greedy_open_loop(&p, DEFAULT_OPEN_LOOP_CAP).unwrap();
        assert_eq!(
            (ol.actions.as_slice(), ol.value, ol.search),
            (&[0, 0][..], 2.0, OpenLoopSearch::Exhaustive)
        );
        // Stepwise greedy grabs the immediate 0.5 and misses the later 2.
        let g = greedy_open_loop(&p, 1).unwrap();
        assert_eq!(
            (g.actions.as_slice(), g.value, g.search),
            (&[1, 0][..], 0.5, OpenLoopSearch::Greedy)
        );
        let (_, blind) = best_blind_policy(&p).unwrap();
        assert_eq!(blind, 2.0);
    }

    #[test]
    fn cap_reports_count() {
        let p = single_agent(3);
        // 2 * (2 * 2^2)^2 trees.
        assert_eq!(oracle_tree_count(&p), 2 * 8 * 8);
        assert_eq!(
            brute_force_optimal(&p, 10),
            Err(Error::CapExceeded {
                count: 128,
                cap: 10
            })
        );
    }

    #[test]
    fn impossible_observations_are_pruned() {
        let mut p = single_agent(2);
        p.observation = vec![(0..4).map(|_| vec![(0, 1.0)]).collect(); 2];
        // Observation 1 never occurs: 2 actions times 2 for the single live branch.
        assert_eq!(oracle_tree_count(&p), 4);
    }

    #[test]
    fn tree_layout_is_consistent() {
        let p = single_agent(3);
        let support = vec![0, 1, 2, 3];
        for tree in enumerate_trees(&p, 0, &support, 0).iter().take(20) {
            let local = tree_to_local(tree, 3);
            assert_eq!(
                local.layers.iter().map(Vec::len).collect::<Vec<_>>(),
                vec![1, 2, 4]
            );
            local.check(2, 2).unwrap();
        }
    }
}
