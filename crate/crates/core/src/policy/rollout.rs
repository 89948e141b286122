//! Monte-Carlo policy evaluation by sampling states and observations.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use rand::Rng;

use super::{CompiledPolicy, JointPolicy};
use crate::belief::{bayes_update, Belief};
use crate::error::Result;
use crate::model::Problem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub episodes: usize,
}

fn sample_index<R: Rng + ?Sized>(
    entries: impl Iterator<Item = (usize, f64)>,
    rng: &mut R,
) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (idx, p) in entries {
        acc += p;
        last = idx;
        if u < acc {
            return idx;
        }
    }
    last
}

/// Simulates `episodes` runs of the policy. Rewards are evaluated on the joint
/// belief filtered along each sampled history, so the estimate targets the
/// same quantity as [`super::evaluate`].
pub fn rollout_estimate<R: Rng + ?Sized>(
    problem: &Problem,
    policy: &JointPolicy,
    episodes: usize,
    rng: &mut R,
) -> Result<RolloutEstimate> {
    policy.check(problem)?;
    let compiled = CompiledPolicy::new(problem, policy);
    let horizon = problem.horizon;
    // Beliefs depend only on the observation sequence once the policy is fixed.
    let mut beliefs: HashMap<Vec<usize>, Belief> = HashMap::new();
    beliefs.insert(Vec::new(), problem.initial_belief.clone());
    let b0 = problem.initial_belief.as_slice();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut observations = Vec::with_capacity(horizon);
    for _ in 0..episodes {
        observations.clear();
        let mut state = sample_index(b0.iter().copied().enumerate(), rng);
        let mut node = 0usize;
        let mut total = 0.0;
        for t in 0..horizon {
            let action = compiled.action(t, node);
            let belief = beliefs[&observations].clone();
            total += problem.step_rewards[t].evaluate(belief.as_slice(), action);
            state = sample_index(problem.transition[action][state].iter().copied(), rng);
            let z = sample_index(problem.observation[action][state].iter().copied(), rng);
            let mut key = observations.clone();
            key.push(z);
            if let Entry::Vacant(slot) = beliefs.entry(key) {
                slot.insert(bayes_update(problem, &belief, action, z)?.0);
            }
            observations.push(z);
            if t + 1 < horizon {
                node = compiled.next(t, node, z);
            }
        }
        total += problem
            .final_reward
            .evaluate(beliefs[&observations].as_slice());
        sum += total;
        sum_sq += total * total;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let var = if episodes > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(RolloutEstimate {
        mean,
        std_error: (var / n).sqrt(),
        episodes,
    })
}
