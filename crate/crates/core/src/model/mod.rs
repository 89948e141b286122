//! Finite-horizon Dec-POMDP problem representation.
//!
//! Transition and observation tables are stored as sparse rows in canonical
//! form: entries sorted by index, exact zeros omitted. Joint actions and joint
//! observations are addressed by a flat mixed-radix index in which agent 0 is
//! the most significant digit (see [`JointSpace`]).

mod format;

use std::fmt;

use crate::belief::{neg_entropy, Belief};

pub use format::{parse_problem, parse_problem_unchecked, serialize_problem};

/// Normalization tolerance for every probability table.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Sparse probability row: `(index, probability)` pairs sorted by index.
pub type SparseRow = Vec<(usize, f64)>;

/// Converts a dense row into canonical sparse form.
pub fn sparse_from_dense(dense: &[f64]) -> SparseRow {
    dense
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(i, &p)| (i, p))
        .collect()
}

/// Mixed-radix indexing over a Cartesian product of per-agent sets.
///
/// Agent 0 is the most significant digit, so `encode(&[a0, a1])` with radices
/// `[n0, n1]` is `a0 * n1 + a1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSpace {
    radices: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl JointSpace {
    pub fn new(radices: &[usize]) -> Self {
        let mut strides = vec![1; radices.len()];
        let mut size = 1usize;
        for i in (0..radices.len()).rev() {
            strides[i] = size;
            size = size.saturating_mul(radices[i]);
        }
        JointSpace {
            radices: radices.to_vec(),
            strides,
            size,
        }
    }

    /// Number of joint elements.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn encode(&self, locals: &[usize]) -> usize {
        debug_assert_eq!(locals.len(), self.radices.len());
        locals.iter().zip(&self.strides).map(|(&l, &s)| l * s).sum()
    }

    pub fn decode(&self, flat: usize) -> Vec<usize> {
        (0..self.radices.len())
            .map(|i| self.component(flat, i))
            .collect()
    }

    /// Local index of `agent` inside a flat joint index.
    #[inline]
    pub fn component(&self, flat: usize, agent: usize) -> usize {
        (flat / self.strides[agent]) % self.radices[agent]
    }

    /// Replaces the component of `agent` and returns the new flat index.
    #[inline]
    pub fn with_component(&self, flat: usize, agent: usize, value: usize) -> usize {
        flat - self.component(flat, agent) * self.strides[agent] + value * self.strides[agent]
    }
}

/// Built-in belief functionals that are convex on the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeliefFunctional {
    /// `Σ b(s) log₂ b(s)`.
    NegEntropy,
    Zero,
}

impl BeliefFunctional {
    pub fn evaluate(self, belief: &[f64]) -> f64 {
        match self {
            BeliefFunctional::NegEntropy => neg_entropy(belief),
            BeliefFunctional::Zero => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BeliefFunctional::NegEntropy => "negentropy",
            BeliefFunctional::Zero => "zero",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "negentropy" => Some(BeliefFunctional::NegEntropy),
            "zero" => Some(BeliefFunctional::Zero),
            _ => None,
        }
    }
}

/// Reward for one decision step.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardSpec {
    /// `ρ(b, a) = Σ_s b(s) R(s, a)`; `table[a][s]`.
    LinearStateAction { table: Vec<Vec<f64>> },
    /// `ρ(b, a) = f(b) − c(a)`.
    ConvexBelief {
        functional: BeliefFunctional,
        cost: Vec<f64>,
    },
}

impl RewardSpec {
    /// All-zero linear reward.
    pub fn zero_linear(joint_actions: usize, states: usize) -> Self {
        RewardSpec::LinearStateAction {
            table: vec![vec![0.0; states]; joint_actions],
        }
    }

    #[inline]
    pub fn evaluate(&self, belief: &[f64], action: usize) -> f64 {
        match self {
            RewardSpec::LinearStateAction { table } => {
                let row = &table[action];
                belief
                    .iter()
                    .zip(row)
                    .filter(|(&b, _)| b != 0.0)
                    .map(|(&b, &r)| b * r)
                    .sum()
            }
            RewardSpec::ConvexBelief { functional, cost } => {
                functional.evaluate(belief) - cost[action]
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, RewardSpec::LinearStateAction { .. })
    }
}

/// Reward collected after the last decision.
#[derive(Debug, Clone, PartialEq)]
pub enum FinalRewardSpec {
    /// `ρ_T(b) = Σ_s b(s) R_T(s)`.
    LinearState(Vec<f64>),
    NegEntropy,
    Zero,
}

impl FinalRewardSpec {
    #[inline]
    pub fn evaluate(&self, belief: &[f64]) -> f64 {
        match self {
            FinalRewardSpec::LinearState(r) => belief
                .iter()
                .zip(r)
                .filter(|(&b, _)| b != 0.0)
                .map(|(&b, &r)| b * r)
                .sum(),
            FinalRewardSpec::NegEntropy => neg_entropy(belief),
            FinalRewardSpec::Zero => 0.0,
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, FinalRewardSpec::NegEntropy)
    }
}

/// Optional human-readable names. Empty vectors mean "no labels".
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Labels {
    pub states: Vec<String>,
    pub actions: Vec<Vec<String>>,
    pub observations: Vec<Vec<String>>,
}

impl Labels {
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
            && self.actions.iter().all(Vec::is_empty)
            && self.observations.iter().all(Vec::is_empty)
    }
}

/// A finite-horizon Dec-POMDP.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub agent_count: usize,
    pub state_count: usize,
    pub local_actions: Vec<usize>,
    pub local_observations: Vec<usize>,
    /// `transition[a][s]` is the sparse distribution over next states.
    pub transition: Vec<Vec<SparseRow>>,
    /// `observation[a][s']` is the sparse distribution over joint observations.
    pub observation: Vec<Vec<SparseRow>>,
    pub initial_belief: Belief,
    pub horizon: usize,
    /// One entry per decision step `t = 0..horizon`.
    pub step_rewards: Vec<RewardSpec>,
    pub final_reward: FinalRewardSpec,
    pub labels: Labels,
}

impl Problem {
    pub fn action_space(&self) -> JointSpace {
        JointSpace::new(&self.local_actions)
    }

    pub fn observation_space(&self) -> JointSpace {
        JointSpace::new(&self.local_observations)
    }

    pub fn joint_action_count(&self) -> usize {
        self.local_actions.iter().product()
    }

    pub fn joint_observation_count(&self) -> usize {
        self.local_observations.iter().product()
    }

    /// True when every step reward and the final reward are linear in the belief.
    pub fn has_linear_rewards(&self) -> bool {
        self.step_rewards.iter().all(RewardSpec::is_linear) && self.final_reward.is_linear()
    }

    /// Returns a copy with a different horizon; step rewards are truncated or
    /// extended by repeating the last step's reward.
    pub fn with_horizon(&self, horizon: usize) -> Problem {
        let mut p = self.clone();
        p.horizon = horizon;
        let last = p.step_rewards.last().cloned();
        p.step_rewards.truncate(horizon);
        if let Some(last) = last {
            while p.step_rewards.len() < horizon {
                p.step_rewards.push(last.clone());
            }
        }
        p
    }

    /// Checks every structural and probabilistic invariant.
    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptySet {
        what: &'static str,
    },
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    IndexOutOfRange {
        what: String,
        index: usize,
        bound: usize,
    },
    NegativeProbability {
        what: String,
        value: f64,
    },
    NonFinite {
        what: String,
    },
    TransitionRowSum {
        action: usize,
        state: usize,
        sum: f64,
    },
    ObservationRowSum {
        action: usize,
        next_state: usize,
        sum: f64,
    },
    InitialBeliefSum {
        sum: f64,
    },
    NegativeInitialBelief {
        state: usize,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptySet { what } => write!(f, "{what} must be at least 1"),
            Violation::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected {expected} entries, found {found}"),
            Violation::IndexOutOfRange { what, index, bound } => {
                write!(f, "{what}: index {index} out of range 0..{bound}")
            }
            Violation::NegativeProbability { what, value } => {
                write!(f, "{what}: negative probability {value}")
            }
            Violation::NonFinite { what } => write!(f, "{what}: non-finite value"),
            Violation::TransitionRowSum { action, state, sum } => write!(
                f,
                "transition row (s={state}, a={action}) sums to {sum} (deficit {})",
                1.0 - sum
            ),
            Violation::ObservationRowSum {
                action,
                next_state,
                sum,
            } => write!(
                f,
                "observation row (s'={next_state}, a={action}) sums to {sum} (deficit {})",
                1.0 - sum
            ),
            Violation::InitialBeliefSum { sum } => {
                write!(f, "initial belief sums to {sum} (deficit {})", 1.0 - sum)
            }
            Violation::NegativeInitialBelief { state, value } => {
                write!(
                    f,
                    "initial belief has negative entry {value} at state {state}"
                )
            }
        }
    }
}

/// Result of [`Problem::validate`]; empty iff all invariants hold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn check_row(
    row: &SparseRow,
    bound: usize,
    what: impl Fn() -> String,
    out: &mut Vec<Violation>,
) -> f64 {
    let mut sum = 0.0;
    for &(idx, p) in row {
        if idx >= bound {
            out.push(Violation::IndexOutOfRange {
                what: what(),
                index: idx,
                bound,
            });
        }
        if !p.is_finite() {
            out.push(Violation::NonFinite { what: what() });
        } else if p < 0.0 {
            out.push(Violation::NegativeProbability {
                what: what(),
                value: p,
            });
        }
        sum += p;
    }
    sum
}

/// Lists every violated problem invariant.
pub fn validate(problem: &Problem) -> ValidationReport {
    let mut out = Vec::new();
    if problem.agent_count == 0 {
        out.push(Violation::EmptySet {
            what: "agent count",
        });
    }
    if problem.state_count == 0 {
        out.push(Violation::EmptySet {
            what: "state count",
        });
    }
    if problem.horizon == 0 {
        out.push(Violation::EmptySet { what: "horizon" });
    }
    for (what, v) in [
        ("local action counts", &problem.local_actions),
        ("local observation counts", &problem.local_observations),
    ] {
        if v.len() != problem.agent_count {
            out.push(Violation::DimensionMismatch {
                what: what.to_string(),
                expected: problem.agent_count,
                found: v.len(),
            });
        }
    }
    if problem.local_actions.contains(&0) {
        out.push(Violation::EmptySet {
            what: "local action set",
        });
    }
    if problem.local_observations.contains(&0) {
        out.push(Violation::EmptySet {
            what: "local observation set",
        });
    }
    if !out.is_empty() {
        // Table checks below rely on consistent dimensions.
        return ValidationReport { violations: out };
    }

    let n_s = problem.state_count;
    let n_a = problem.joint_action_count();
    let n_z = problem.joint_observation_count();

    if problem.transition.len() != n_a {
        out.push(Violation::DimensionMismatch {
            what: "transition actions".into(),
            expected: n_a,
            found: problem.transition.len(),
        });
    } else {
        for (a, rows) in problem.transition.iter().enumerate() {
            if rows.len() != n_s {
                out.push(Violation::DimensionMismatch {
                    what: format!("transition rows for action {a}"),
                    expected: n_s,
                    found: rows.len(),
                });
                continue;
            }
            for (s, row) in rows.iter().enumerate() {
                let sum = check_row(row, n_s, || format!("transition (s={s}, a={a})"), &mut out);
                if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                    out.push(Violation::TransitionRowSum {
                        action: a,
                        state: s,
                        sum,
                    });
                }
            }
        }
    }

    if problem.observation.len() != n_a {
        out.push(Violation::DimensionMismatch {
            what: "observation actions".into(),
            expected: n_a,
            found: problem.observation.len(),
        });
    } else {
        for (a, rows) in problem.observation.iter().enumerate() {
            if rows.len() != n_s {
                out.push(Violation::DimensionMismatch {
                    what: format!("observation rows for action {a}"),
                    expected: n_s,
                    found: rows.len(),
                });
                continue;
            }
            for (s, row) in rows.iter().enumerate() {
                let sum = check_row(
                    row,
                    n_z,
                    || format!("observation (s'={s}, a={a})"),
                    &mut out,
                );
                if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                    out.push(Violation::ObservationRowSum {
                        action: a,
                        next_state: s,
                        sum,
                    });
                }
            }
        }
    }

    let b0 = problem.initial_belief.as_slice();
    if b0.len() != n_s {
        out.push(Violation::DimensionMismatch {
            what: "initial belief".into(),
            expected: n_s,
            found: b0.len(),
        });
    } else {
        for (s, &p) in b0.iter().enumerate() {
            if !p.is_finite() {
                out.push(Violation::NonFinite {
                    what: format!("initial belief state {s}"),
                });
            } else if p < 0.0 {
                out.push(Violation::NegativeInitialBelief { state: s, value: p });
            }
        }
        let sum: f64 = b0.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            out.push(Violation::InitialBeliefSum { sum });
        }
    }

    if problem.step_rewards.len() != problem.horizon {
        out.push(Violation::DimensionMismatch {
            what: "step rewards".into(),
            expected: problem.horizon,
            found: problem.step_rewards.len(),
        });
    }
    for (t, r) in problem.step_rewards.iter().enumerate() {
        match r {
            RewardSpec::LinearStateAction { table } => {
                if table.len() != n_a {
                    out.push(Violation::DimensionMismatch {
                        what: format!("linear reward actions at step {t}"),
                        expected: n_a,
                        found: table.len(),
                    });
                } else if let Some((a, row)) =
                    table.iter().enumerate().find(|(_, r)| r.len() != n_s)
                {
                    out.push(Violation::DimensionMismatch {
                        what: format!("linear reward states at step {t}, action {a}"),
                        expected: n_s,
                        found: row.len(),
                    });
                }
                if table.iter().flatten().any(|v| !v.is_finite()) {
                    out.push(Violation::NonFinite {
                        what: format!("linear reward at step {t}"),
                    });
                }
            }
            RewardSpec::ConvexBelief { cost, .. } => {
                if cost.len() != n_a {
                    out.push(Violation::DimensionMismatch {
                        what: format!("action costs at step {t}"),
                        expected: n_a,
                        found: cost.len(),
                    });
                }
                if cost.iter().any(|v| !v.is_finite()) {
                    out.push(Violation::NonFinite {
                        what: format!("action costs at step {t}"),
                    });
                }
            }
        }
    }
    if let FinalRewardSpec::LinearState(r) = &problem.final_reward {
        if r.len() != n_s {
            out.push(Violation::DimensionMismatch {
                what: "final reward".into(),
                expected: n_s,
                found: r.len(),
            });
        }
    }

    let labels = &problem.labels;
    if !labels.states.is_empty() && labels.states.len() != n_s {
        out.push(Violation::DimensionMismatch {
            what: "state labels".into(),
            expected: n_s,
            found: labels.states.len(),
        });
    }
    for (kind, per_agent, counts) in [
        ("action labels", &labels.actions, &problem.local_actions),
        (
            "observation labels",
            &labels.observations,
            &problem.local_observations,
        ),
    ] {
        for (i, names) in per_agent.iter().enumerate() {
            let expected = counts.get(i).copied().unwrap_or(0);
            if !names.is_empty() && names.len() != expected {
                out.push(Violation::DimensionMismatch {
                    what: format!("{kind} for agent {i}"),
                    expected,
                    found: names.len(),
                });
            }
        }
    }

    ValidationReport { violations: out }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two states, one agent with one action and one observation.
    pub(crate) fn toy() -> Problem {
        Problem {
            agent_count: 1,
            state_count: 2,
            local_actions: vec![1],
            local_observations: vec![1],
            transition: vec![vec![vec![(0, 1.0)], vec![(1, 1.0)]]],
            observation: vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]],
            initial_belief: Belief::from_vec(vec![0.5, 0.5]),
            horizon: 1,
            step_rewards: vec![RewardSpec::zero_linear(1, 2)],
            final_reward: FinalRewardSpec::Zero,
            labels: Labels::default(),
        }
    }

    #[test]
    fn well_formed_toy_validates() {
        assert!(toy().validate().is_empty());
    }

    #[test]
    fn short_transition_row_reports_deficit() {
        let mut p = toy();
        p.transition[0][1] = vec![(0, 0.4), (1, 0.5)];
        let report = p.validate();
        assert_eq!(report.violations.len(), 1);
        match &report.violations[0] {
            Violation::TransitionRowSum { action, state, sum } => {
                assert_eq!((*action, *state), (0, 1));
                assert!((1.0 - sum - 0.1).abs() < 1e-12);
            }
            v => panic!("unexpected violation {v:?}"),
        }
        assert!(report.to_string().contains("deficit"));
    }

    #[test]
    fn negative_initial_entry_cites_state() {
        let mut p = toy();
        p.initial_belief = Belief::from_vec(vec![1.5, -0.5]);
        let report = p.validate();
        assert!(report
            .violations
            .contains(&Violation::NegativeInitialBelief {
                state: 1,
                value: -0.5
            }));
    }

    #[test]
    fn zero_horizon_rejected() {
        let mut p = toy();
        p.horizon = 0;
        p.step_rewards.clear();
        assert!(!p.validate().is_empty());
    }

    #[test]
    fn joint_space_is_big_endian_by_agent() {
        let js = JointSpace::new(&[2, 3]);
        assert_eq!(js.size(), 6);
        assert_eq!(js.encode(&[1, 0]), 3);
        assert_eq!(js.encode(&[0, 2]), 2);
        assert_eq!(js.decode(5), vec![1, 2]);
        assert_eq!(js.component(4, 0), 1);
        assert_eq!(js.component(4, 1), 1);
        assert_eq!(js.with_component(4, 1, 2), 5);
        assert_eq!(js.with_component(4, 0, 0), 1);
    }

    #[test]
    fn with_horizon_extends_rewards() {
        let p = toy().with_horizon(3);
        assert_eq!(p.step_rewards.len(), 3);
        assert!(p.validate().is_empty());
    }

    proptest::proptest! {
        #[test]
        fn joint_space_round_trips(radices in proptest::collection::vec(1usize..5, 1..4), seed in 0usize..10_000) {
            let js = JointSpace::new(&radices);
            let flat = seed % js.size();
            proptest::prop_assert_eq!(js.encode(&js.decode(flat)), flat);
        }
    }
}
