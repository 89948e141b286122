//! Independent reference computations: dense tables and plain recursion over
//! joint histories, sharing no code with the library's evaluators.

#![allow(dead_code)]

use npgi_core::{JointPolicy, Problem};

pub struct Dense {
    pub n_s: usize,
    pub n_z: usize,
    /// `t[a][s][s']`
    pub t: Vec<Vec<Vec<f64>>>,
    /// `o[a][s'][z]`
    pub o: Vec<Vec<Vec<f64>>>,
}

pub fn dense(problem: &Problem) -> Dense {
    let n_s = problem.state_count;
    let n_a: usize = problem.local_actions.iter().product();
    let n_z: usize = problem.local_observations.iter().product();
    let mut t = vec![vec![vec![0.0; n_s]; n_s]; n_a];
    let mut o = vec![vec![vec![0.0; n_z]; n_s]; n_a];
    for a in 0..n_a {
        for s in 0..n_s {
            for &(s2, p) in &problem.transition[a][s] {
                t[a][s][s2] += p;
            }
            for &(z, p) in &problem.observation[a][s] {
                o[a][s][z] += p;
            }
        }
    }
    Dense { n_s, n_z, t, o }
}

/// Digits of `flat` in mixed radix with the first component most significant.
pub fn digits(mut flat: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for i in (0..radices.len()).rev() {
        out[i] = flat % radices[i];
        flat /= radices[i];
    }
    out
}

pub fn undigits(values: &[usize], radices: &[usize]) -> usize {
    values
        .iter()
        .zip(radices)
        .fold(0, |acc, (&v, &r)| acc * r + v)
}

pub fn entropy_bits(b: &[f64]) -> f64 {
    -b.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Unnormalized posterior `O(z|s',a) Σ_s T(s'|s,a) b(s)`.
pub fn joint_posterior(d: &Dense, b: &[f64], a: usize, z: usize) -> Vec<f64> {
    (0..d.n_s)
        .map(|s2| d.o[a][s2][z] * (0..d.n_s).map(|s| d.t[a][s][s2] * b[s]).sum::<f64>())
        .collect()
}

pub fn step_reward(problem: &Problem, t: usize, b: &[f64], a: usize) -> f64 {
    use npgi_core::model::{BeliefFunctional, RewardSpec};
    match &problem.step_rewards[t] {
        RewardSpec::LinearStateAction { table } => {
            b.iter().zip(&table[a]).map(|(p, r)| p * r).sum()
        }
        RewardSpec::ConvexBelief { functional, cost } => {
            let f = match functional {
                BeliefFunctional::NegEntropy => -entropy_bits(b),
                BeliefFunctional::Zero => 0.0,
            };
            f - cost[a]
        }
    }
}

pub fn final_reward(problem: &Problem, b: &[f64]) -> f64 {
    use npgi_core::model::FinalRewardSpec;
    match &problem.final_reward {
        FinalRewardSpec::LinearState(r) => b.iter().zip(r).map(|(p, r)| p * r).sum(),
        FinalRewardSpec::NegEntropy => -entropy_bits(b),
        FinalRewardSpec::Zero => 0.0,
    }
}

pub fn joint_action(problem: &Problem, policy: &JointPolicy, t: usize, node: &[usize]) -> usize {
    let acts: Vec<usize> = node
        .iter()
        .enumerate()
        .map(|(i, &k)| policy.locals[i].layers[t][k].action)
        .collect();
    undigits(&acts, &problem.local_actions)
}

pub fn joint_next(
    problem: &Problem,
    policy: &JointPolicy,
    t: usize,
    node: &[usize],
    z: usize,
) -> Vec<usize> {
    let zs = digits(z, &problem.local_observations);
    node.iter()
        .enumerate()
        .map(|(i, &k)| policy.locals[i].layers[t][k].next[zs[i]])
        .collect()
}

/// `V_t(b, q)` by plain recursion.
pub fn value_from(
    problem: &Problem,
    policy: &JointPolicy,
    t: usize,
    b: &[f64],
    node: &[usize],
) -> f64 {
    let d = dense(problem);
    value_rec(problem, &d, policy, t, b, node)
}

fn value_rec(
    problem: &Problem,
    d: &Dense,
    policy: &JointPolicy,
    t: usize,
    b: &[f64],
    node: &[usize],
) -> f64 {
    let a = joint_action(problem, policy, t, node);
    let mut v = step_reward(problem, t, b, a);
    for z in 0..d.n_z {
        let post = joint_posterior(d, b, a, z);
        let eta: f64 = post.iter().sum();
        if eta <= 1e-12 {
            continue;
        }
        let post: Vec<f64> = post.iter().map(|p| p / eta).collect();
        let future = if t + 1 == problem.horizon {
            final_reward(problem, &post)
        } else {
            value_rec(
                problem,
                d,
                policy,
                t + 1,
                &post,
                &joint_next(problem, policy, t, node, z),
            )
        };
        v += eta * future;
    }
    v
}

pub fn value(problem: &Problem, policy: &JointPolicy) -> f64 {
    value_from(
        problem,
        policy,
        0,
        problem.initial_belief.as_slice(),
        &vec![0; problem.agent_count],
    )
}

/// One positive-probability history at layer `t`: probability, belief and end node.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub prob: f64,
    pub belief: Vec<f64>,
    pub node: Vec<usize>,
}

/// All positive-probability histories per layer, by breadth-first expansion.
pub fn histories(problem: &Problem, policy: &JointPolicy) -> Vec<Vec<Leaf>> {
    let d = dense(problem);
    let mut layers = vec![vec![Leaf {
        prob: 1.0,
        belief: problem.initial_belief.as_slice().to_vec(),
        node: vec![0; problem.agent_count],
    }]];
    for t in 0..problem.horizon - 1 {
        let mut next = Vec::new();
        for leaf in &layers[t] {
            let a = joint_action(problem, policy, t, &leaf.node);
            for z in 0..d.n_z {
                let post = joint_posterior(&d, &leaf.belief, a, z);
                let eta: f64 = post.iter().sum();
                if eta <= 1e-12 {
                    continue;
                }
                next.push(Leaf {
                    prob: leaf.prob * eta,
                    belief: post.iter().map(|p| p / eta).collect(),
                    node: joint_next(problem, policy, t, &leaf.node, z),
                });
            }
        }
        layers.push(next);
    }
    layers
}
