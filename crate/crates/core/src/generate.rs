//! Random problems and beliefs for property tests and oracle comparisons.

use rand::Rng;

use crate::belief::Belief;
use crate::model::{BeliefFunctional, FinalRewardSpec, Labels, Problem, RewardSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    /// Linear step rewards and a linear final reward.
    Linear,
    /// Negative entropy minus action costs at every step and at the end.
    Convex,
    /// Each step independently linear or convex; negative-entropy final reward.
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomProblemSpec {
    pub agents: usize,
    pub states: usize,
    pub actions: usize,
    pub observations: usize,
    pub horizon: usize,
    pub rewards: RewardKind,
    /// Probability that a table entry is forced to zero before normalizing.
    pub sparsity: f64,
}

impl Default for RandomProblemSpec {
    fn default() -> Self {
        RandomProblemSpec {
            agents: 2,
            states: 3,
            actions: 2,
            observations: 2,
            horizon: 2,
            rewards: RewardKind::Mixed,
            sparsity: 0.3,
        }
    }
}

/// Random probability vector; at least one entry stays positive.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize, sparsity: f64) -> Vec<f64> {
    let keep = rng.gen_range(0..n);
    let mut v: Vec<f64> = (0..n)
        .map(|j| {
            if j != keep && rng.gen_bool(sparsity) {
                0.0
            } else {
                rng.gen_range(0.05..1.0)
            }
        })
        .collect();
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    v
}

/// Dense random belief with every entry positive.
pub fn random_belief<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Belief {
    Belief::from_vec(random_distribution(rng, n, 0.0))
}

fn sparse(dense: Vec<f64>) -> Vec<(usize, f64)> {
    dense
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p != 0.0)
        .collect()
}

/// Random valid problem matching `spec`.
pub fn random_problem<R: Rng + ?Sized>(rng: &mut R, spec: &RandomProblemSpec) -> Problem {
    let n_s = spec.states;
    let n_a = spec.actions.pow(spec.agents as u32);
    let n_z = spec.observations.pow(spec.agents as u32);
    let transition = (0..n_a)
        .map(|_| {
            (0..n_s)
                .map(|_| sparse(random_distribution(rng, n_s, spec.sparsity)))
                .collect()
        })
        .collect();
    let observation = (0..n_a)
        .map(|_| {
            (0..n_s)
                .map(|_| sparse(random_distribution(rng, n_z, spec.sparsity)))
                .collect()
        })
        .collect();
    let linear = |rng: &mut R| RewardSpec::LinearStateAction {
        table: (0..n_a)
            .map(|_| (0..n_s).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
    };
    let convex = |rng: &mut R| RewardSpec::ConvexBelief {
        functional: BeliefFunctional::NegEntropy,
        cost: (0..n_a).map(|_| rng.gen_range(0.0..0.5)).collect(),
    };
    let step_rewards = (0..spec.horizon)
        .map(|_| match spec.rewards {
            RewardKind::Linear => linear(rng),
            RewardKind::Convex => convex(rng),
            RewardKind::Mixed => {
                if rng.gen_bool(0.5) {
                    linear(rng)
                } else {
                    convex(rng)
                }
            }
        })
        .collect();
    let final_reward = match spec.rewards {
        RewardKind::Linear => {
            FinalRewardSpec::LinearState((0..n_s).map(|_| rng.gen_range(-1.0..1.0)).collect())
        }
        RewardKind::Convex | RewardKind::Mixed => FinalRewardSpec::NegEntropy,
    };
    Problem {
        agent_count: spec.agents,
        state_count: n_s,
        local_actions: vec![spec.actions; spec.agents],
        local_observations: vec![spec.observations; spec.agents],
        transition,
        observation,
        initial_belief: Belief::from_vec(random_distribution(rng, n_s, spec.sparsity)),
        horizon: spec.horizon,
        step_rewards,
        final_reward,
        labels: Labels::default(),
    }
}
