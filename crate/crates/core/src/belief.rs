//! Exact joint beliefs: Bayes filter, observation priors and belief rewards.

use crate::error::{Error, Result};
use crate::model::{Problem, PROBABILITY_TOLERANCE};

/// Observation priors at or below this value are treated as impossible; the
/// posterior is left undefined and the branch is skipped.
pub const MIN_OBSERVATION_PROB: f64 = 1e-12;

/// Probability mass function over states.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Wraps a vector without checking it.
    pub fn from_vec(values: Vec<f64>) -> Self {
        Belief(values)
    }

    /// Wraps a vector after checking non-negativity and normalization.
    pub fn try_new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidProblem(
                "belief has a negative or non-finite entry".into(),
            ));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::InvalidProblem(format!("belief sums to {sum}")));
        }
        Ok(Belief(values))
    }

    pub fn uniform(n: usize) -> Self {
        Belief(vec![1.0 / n as f64; n])
    }

    pub fn point(n: usize, state: usize) -> Self {
        let mut v = vec![0.0; n];
        v[state] = 1.0;
        Belief(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `λ·self + (1 − λ)·other`.
    pub fn mix(&self, other: &Belief, lambda: f64) -> Belief {
        Belief(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect(),
        )
    }
}

/// One positive-probability branch of an observation split.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBranch {
    pub observation: usize,
    /// Prior probability `η(z | b, a)`.
    pub prob: f64,
    pub posterior: Belief,
}

/// Joint action-observation history from `b⁰`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct JointHistory {
    /// Flat joint actions `a⁰ .. a^{t−1}`.
    pub actions: Vec<usize>,
    /// Flat joint observations `z¹ .. z^t`.
    pub observations: Vec<usize>,
}

impl JointHistory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn extended(&self, action: usize, observation: usize) -> JointHistory {
        let mut h = self.clone();
        h.actions.push(action);
        h.observations.push(observation);
        h
    }
}

/// One-step prediction `Σ_s P(s'|s,a) b(s)`.
pub fn predict(problem: &Problem, belief: &[f64], action: usize) -> Vec<f64> {
    let mut out = vec![0.0; problem.state_count];
    let rows = &problem.transition[action];
    for (s, &p) in belief.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for &(s2, q) in &rows[s] {
            out[s2] += p * q;
        }
    }
    out
}

/// Unnormalized posteriors `P(z|s',a)·pred(s')` for every joint observation
/// with nonzero mass, in increasing observation order.
fn unnormalized_split(problem: &Problem, belief: &[f64], action: usize) -> Vec<(usize, Vec<f64>)> {
    let pred = predict(problem, belief, action);
    let n_z = problem.joint_observation_count();
    let mut slots: Vec<Option<Vec<f64>>> = vec![None; n_z];
    let rows = &problem.observation[action];
    for (s2, &p) in pred.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for &(z, q) in &rows[s2] {
            let v = slots[z].get_or_insert_with(|| vec![0.0; problem.state_count]);
            v[s2] += p * q;
        }
    }
    slots
        .into_iter()
        .enumerate()
        .filter_map(|(z, v)| v.map(|v| (z, v)))
        .collect()
}

/// All branches `(z, η(z|b,a), ζ(b,a,z))` with `η > MIN_OBSERVATION_PROB`,
/// ordered by joint observation index.
pub fn observation_split(
    problem: &Problem,
    belief: &[f64],
    action: usize,
) -> Vec<ObservationBranch> {
    unnormalized_split(problem, belief, action)
        .into_iter()
        .filter_map(|(z, mut v)| {
            let eta: f64 = v.iter().sum();
            if eta <= MIN_OBSERVATION_PROB {
                return None;
            }
            v.iter_mut().for_each(|x| *x /= eta);
            Some(ObservationBranch {
                observation: z,
                prob: eta,
                posterior: Belief(v),
            })
        })
        .collect()
}

/// Prior probability `η(z | b, a)`.
pub fn observation_prob(
    problem: &Problem,
    belief: &[f64],
    action: usize,
    observation: usize,
) -> f64 {
    let pred = predict(problem, belief, action);
    let rows = &problem.observation[action];
    pred.iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(s2, &p)| {
            rows[s2]
                .iter()
                .find(|(z, _)| *z == observation)
                .map_or(0.0, |&(_, q)| p * q)
        })
        .sum()
}

/// Bayes filter: returns `(ζ(b,a,z), η(z|b,a))`.
pub fn bayes_update(
    problem: &Problem,
    belief: &Belief,
    action: usize,
    observation: usize,
) -> Result<(Belief, f64)> {
    let pred = predict(problem, belief.as_slice(), action);
    let rows = &problem.observation[action];
    let mut post = vec![0.0; problem.state_count];
    for (s2, &p) in pred.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        if let Some(&(_, q)) = rows[s2].iter().find(|(z, _)| *z == observation) {
            post[s2] = p * q;
        }
    }
    let eta: f64 = post.iter().sum();
    if eta <= MIN_OBSERVATION_PROB {
        return Err(Error::ZeroProbabilityObservation {
            action,
            observation,
        });
    }
    post.iter_mut().for_each(|x| *x /= eta);
    Ok((Belief(post), eta))
}

/// `τ(h)` and `P(h)`. The belief is `None` when the history has probability 0.
pub fn history_belief(problem: &Problem, history: &JointHistory) -> Result<(Option<Belief>, f64)> {
    if history.actions.len() != history.observations.len() {
        return Err(Error::InvalidConfig(
            "history has unequal action and observation counts".into(),
        ));
    }
    if history.len() > problem.horizon {
        return Err(Error::InvalidConfig(
            "history longer than the horizon".into(),
        ));
    }
    let mut belief = problem.initial_belief.clone();
    let mut prob = 1.0;
    for (&a, &z) in history.actions.iter().zip(&history.observations) {
        if a >= problem.joint_action_count() || z >= problem.joint_observation_count() {
            return Err(Error::InvalidConfig("history index out of range".into()));
        }
        match bayes_update(problem, &belief, a, z) {
            Ok((b, eta)) => {
                belief = b;
                prob *= eta;
            }
            Err(_) => return Ok((None, 0.0)),
        }
    }
    Ok((Some(belief), prob))
}

/// `Σ_s b(s) log₂ b(s)` with `0·log 0 = 0`.
#[inline]
pub fn neg_entropy(belief: &[f64]) -> f64 {
    belief
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum()
}

/// Step reward `ρ_t(b, a)`.
pub fn reward(problem: &Problem, t: usize, belief: &[f64], action: usize) -> f64 {
    problem.step_rewards[t].evaluate(belief, action)
}

/// Final reward `ρ_T(b)`.
pub fn final_reward(problem: &Problem, belief: &[f64]) -> f64 {
    problem.final_reward.evaluate(belief)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FinalRewardSpec, Labels, RewardSpec};

    /// Identity dynamics, 4 joint observations drawn uniformly.
    fn identity_uniform() -> Problem {
        Problem {
            agent_count: 2,
            state_count: 3,
            local_actions: vec![1, 1],
            local_observations: vec![2, 2],
            transition: vec![(0..3).map(|s| vec![(s, 1.0)]).collect()],
            observation: vec![(0..3)
                .map(|_| (0..4).map(|z| (z, 0.25)).collect())
                .collect()],
            initial_belief: Belief::from_vec(vec![0.2, 0.3, 0.5]),
            horizon: 2,
            step_rewards: vec![RewardSpec::zero_linear(1, 3); 2],
            final_reward: FinalRewardSpec::Zero,
            labels: Labels::default(),
        }
    }

    /// One static binary site measured with symmetric error 0.2.
    fn single_site() -> Problem {
        Problem {
            agent_count: 1,
            state_count: 2,
            local_actions: vec![1],
            local_observations: vec![2],
            transition: vec![vec![vec![(0, 1.0)], vec![(1, 1.0)]]],
            // state 0 = good site; observation 1 = positive reading
            observation: vec![vec![vec![(0, 0.2), (1, 0.8)], vec![(0, 0.8), (1, 0.2)]]],
            initial_belief: Belief::from_vec(vec![0.5, 0.5]),
            horizon: 1,
            step_rewards: vec![RewardSpec::zero_linear(1, 2)],
            final_reward: FinalRewardSpec::NegEntropy,
            labels: Labels::default(),
        }
    }

    #[test]
    fn identity_dynamics_keep_belief() {
        let p = identity_uniform();
        let (post, eta) = bayes_update(&p, &p.initial_belief, 0, 2).unwrap();
        assert!((eta - 0.25).abs() < 1e-15);
        for (a, b) in post.as_slice().iter().zip(p.initial_belief.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_site_positive_reading() {
        let p = single_site();
        let (post, eta) = bayes_update(&p, &p.initial_belief, 0, 1).unwrap();
        assert!((eta - 0.5).abs() < 1e-15);
        assert!((post.as_slice()[0] - 0.8).abs() < 1e-15);
        assert!((post.as_slice()[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn impossible_observation_is_an_error() {
        let mut p = single_site();
        p.observation[0] = vec![vec![(0, 1.0)], vec![(0, 1.0)]];
        assert_eq!(
            bayes_update(&p, &p.initial_belief, 0, 1),
            Err(Error::ZeroProbabilityObservation {
                action: 0,
                observation: 1
            })
        );
        let h = JointHistory {
            actions: vec![0],
            observations: vec![1],
        };
        assert_eq!(history_belief(&p, &h).unwrap(), (None, 0.0));
    }

    #[test]
    fn history_beliefs() {
        let p = identity_uniform();
        let (b, prob) = history_belief(&p, &JointHistory::default()).unwrap();
        assert_eq!(b.unwrap(), p.initial_belief);
        assert_eq!(prob, 1.0);
        let h = JointHistory::default().extended(0, 3);
        let (_, prob) = history_belief(&p, &h).unwrap();
        assert!((prob - 0.25).abs() < 1e-15);
    }

    #[test]
    fn entropy_values() {
        assert!((neg_entropy(Belief::uniform(8).as_slice()) + 3.0).abs() < 1e-12);
        assert_eq!(neg_entropy(Belief::point(5, 2).as_slice()), 0.0);
        // 0.8 log2 0.8 + 0.2 log2 0.2, evaluated independently with ln.
        let expected = (0.8f64 * 0.8f64.ln() + 0.2 * 0.2f64.ln()) / std::f64::consts::LN_2;
        assert!((neg_entropy(&[0.8, 0.2]) - expected).abs() < 1e-15);
        assert!((neg_entropy(&[0.8, 0.2]) + 0.721_928_094_887_362_3).abs() < 1e-12);
    }

    #[test]
    fn reward_variants() {
        let p = identity_uniform();
        assert_eq!(reward(&p, 0, p.initial_belief.as_slice(), 0), 0.0);
        let linear = RewardSpec::LinearStateAction {
            table: vec![vec![1.0; 3]],
        };
        assert!((linear.evaluate(&[0.1, 0.6, 0.3], 0) - 1.0).abs() < 1e-15);
        let convex = RewardSpec::ConvexBelief {
            functional: crate::model::BeliefFunctional::NegEntropy,
            cost: vec![0.5],
        };
        assert!((convex.evaluate(&[0.5, 0.5, 0.0], 0) + 1.5).abs() < 1e-15);
    }

    #[test]
    fn split_totals_match_prediction() {
        let p = single_site();
        let branches = observation_split(&p, p.initial_belief.as_slice(), 0);
        let total: f64 = branches.iter().map(|b| b.prob).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let pred = predict(&p, p.initial_belief.as_slice(), 0);
        for (s, expected) in pred.iter().enumerate() {
            let mixed: f64 = branches
                .iter()
                .map(|b| b.prob * b.posterior.as_slice()[s])
                .sum();
            assert!((mixed - expected).abs() < 1e-12);
        }
    }
}
