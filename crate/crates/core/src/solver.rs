//! Nonlinear policy graph improvement.
//!
//! Each pass runs a forward pass (node statistics of the incumbent policy), then
//! a backward pass that re-optimizes every local node from the last layer to the
//! first. The improved policy replaces the incumbent when its exact value is at
//! least as high.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::belief::observation_split;
use crate::error::{Error, Result};
use crate::model::Problem;
use crate::policy::{
    compute_node_stats_with_cap, evaluate_with_cap, init_random_policy, randomize_node, value_at,
    CompiledPolicy, JointPolicy, NodeStats, PolicyNode, ValueCache, DEFAULT_ENUMERATION_CAP,
};

/// Scores closer than this are treated as ties and resolved towards the lowest
/// index.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Objective optimized at each node during the backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Expectation of the value over the histories ending at each joint node.
    Exact,
    /// Value at the expected belief of each joint node.
    LowerBound,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::LowerBound => "lb",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mode: Mode,
    pub max_passes: usize,
    /// Wall-clock budget for the whole solve, checked before every pass.
    pub time_limit: Option<Duration>,
    pub rng_seed: u64,
    pub restart_count: usize,
    pub width: usize,
    /// Worker threads for restarts; 0 uses the global pool.
    pub jobs: usize,
    pub enumeration_cap: u128,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: Mode::LowerBound,
            max_passes: 30,
            time_limit: None,
            rng_seed: 0,
            restart_count: 1,
            width: 2,
            jobs: 0,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_passes == 0 {
            return Err(Error::InvalidConfig("max_passes must be at least 1".into()));
        }
        if self.restart_count == 0 {
            return Err(Error::InvalidConfig(
                "restart_count must be at least 1".into(),
            ));
        }
        if self.width == 0 {
            return Err(Error::InvalidConfig("width must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed,
    TimeLimitExceeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartReport {
    pub restart: usize,
    pub initial_value: f64,
    /// Incumbent value after each pass.
    pub value_trace: Vec<f64>,
    /// Wall time of each full pass (forward, backward and acceptance check).
    pub pass_durations: Vec<Duration>,
    pub backward_durations: Vec<Duration>,
    pub converged: bool,
    pub timed_out: bool,
    pub final_value: f64,
    pub policy: JointPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub best_policy: JointPolicy,
    pub best_value: f64,
    pub best_restart: usize,
    pub value_trace: Vec<f64>,
    pub pass_durations: Vec<Duration>,
    pub restarts: Vec<RestartReport>,
    pub seed: u64,
    pub mode: Mode,
    pub width: usize,
    pub termination: Termination,
}

impl SolveReport {
    pub fn mean_value(&self) -> f64 {
        self.restarts.iter().map(|r| r.final_value).sum::<f64>() / self.restarts.len() as f64
    }

    pub fn mean_backward_seconds(&self) -> Option<f64> {
        let all: Vec<f64> = self
            .restarts
            .iter()
            .flat_map(|r| r.backward_durations.iter().map(Duration::as_secs_f64))
            .collect();
        (!all.is_empty()).then(|| all.iter().sum::<f64>() / all.len() as f64)
    }
}

/// The node statistics of the incumbent policy, including expected beliefs.
pub fn forward_pass(problem: &Problem, policy: &JointPolicy) -> Result<NodeStats> {
    compute_node_stats_with_cap(problem, policy, DEFAULT_ENUMERATION_CAP)
}

/// Node objective split into separable parts: `base[a_i]` collects the
/// immediate reward (and, in the last layer, the final reward), and
/// `successor[a_i][z_i][n]` the future value routed through observation `z_i`
/// to successor `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTable {
    pub base: Vec<f64>,
    pub successor: Vec<Vec<Vec<f64>>>,
}

fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 + TIE_TOLERANCE {
            best = (i, v);
        }
    }
    best
}

impl CandidateTable {
    /// Objective of emitting `action` and moving to `next[z_i]`.
    pub fn objective(&self, action: usize, next: &[usize]) -> f64 {
        let future: f64 = self.successor[action]
            .iter()
            .zip(next)
            .map(|(row, &n)| row[n])
            .sum();
        self.base[action] + future
    }

    fn best_successors(&self, action: usize) -> (Vec<usize>, f64) {
        let mut total = 0.0;
        let next = self.successor[action]
            .iter()
            .map(|row| {
                let (n, v) = argmax(row.iter().copied());
                total += v;
                n
            })
            .collect();
        (next, total)
    }

    /// Maximizer with ties broken towards the lowest action, then the lowest
    /// successor per observation.
    pub fn best(&self) -> PolicyNode {
        let scored: Vec<(Vec<usize>, f64)> = (0..self.base.len())
            .map(|a| {
                let (next, future) = self.best_successors(a);
                (next, self.base[a] + future)
            })
            .collect();
        let (action, _) = argmax(scored.iter().map(|(_, v)| *v));
        PolicyNode {
            action,
            next: scored[action].0.clone(),
        }
    }
}

/// Builds the objective table for local node `(t, k)` of `agent`. Other agents'
/// actions and transitions come from `policy`, future values from `compiled`
/// (which must reflect `policy` on layers after `t`), and node and history
/// distributions from `stats`.
#[allow(clippy::too_many_arguments)]
fn candidate_table_with(
    problem: &Problem,
    policy: &JointPolicy,
    compiled: &CompiledPolicy,
    stats: &NodeStats,
    agent: usize,
    t: usize,
    k: usize,
    mode: Mode,
    cache: &mut ValueCache,
) -> CandidateTable {
    let horizon = policy.horizon();
    let last = t + 1 == horizon;
    let n_actions = problem.local_actions[agent];
    let n_obs = problem.local_observations[agent];
    let next_width = if last {
        0
    } else {
        policy.locals[agent].width(t + 1)
    };
    let aspace = problem.action_space();
    let zspace = problem.observation_space();
    let next_space = (!last).then(|| policy.layer_space(t + 1));

    let mut base = vec![0.0; n_actions];
    let mut successor = vec![vec![vec![0.0; next_width]; if last { 0 } else { n_obs }]; n_actions];

    let layer = &stats.layers[t];
    for &(q, weight) in &layer.local[agent][k].cross {
        let js = &layer.joint[q];
        let beliefs: Vec<(f64, &[f64])> = match mode {
            Mode::LowerBound => match &js.expected_belief {
                Some(b) => vec![(1.0, b.as_slice())],
                None => continue,
            },
            Mode::Exact => js
                .histories
                .iter()
                .map(|h| (h.prob, h.belief.as_slice()))
                .collect(),
        };
        let mut locals_action: Vec<usize> = js
            .node
            .iter()
            .enumerate()
            .map(|(j, &kj)| policy.locals[j].layers[t][kj].action)
            .collect();
        let mut next_node = vec![0usize; policy.agent_count()];
        for a_i in 0..n_actions {
            locals_action[agent] = a_i;
            let action = aspace.encode(&locals_action);
            for &(p, belief) in &beliefs {
                let w = weight * p;
                base[a_i] += w * problem.step_rewards[t].evaluate(belief, action);
                for branch in observation_split(problem, belief, action) {
                    let wz = w * branch.prob;
                    if last {
                        base[a_i] +=
                            wz * problem.final_reward.evaluate(branch.posterior.as_slice());
                        continue;
                    }
                    for (j, slot) in next_node.iter_mut().enumerate() {
                        if j != agent {
                            let zj = zspace.component(branch.observation, j);
                            *slot = policy.locals[j].layers[t][js.node[j]].next[zj];
                        }
                    }
                    let z_i = zspace.component(branch.observation, agent);
                    let space = next_space.as_ref().expect("non-final layer");
                    for (n, slot) in successor[a_i][z_i].iter_mut().enumerate() {
                        next_node[agent] = n;
                        let q_next = space.encode(&next_node);
                        *slot += wz
                            * value_at(
                                problem,
                                compiled,
                                t + 1,
                                branch.posterior.as_slice(),
                                q_next,
                                Some(cache),
                            );
                    }
                }
            }
        }
    }
    CandidateTable { base, successor }
}

/// Objective table of local node `(t, k)` of `agent` against `policy` as it
/// stands, using statistics `stats`.
pub fn candidate_table(
    problem: &Problem,
    policy: &JointPolicy,
    stats: &NodeStats,
    agent: usize,
    t: usize,
    k: usize,
    mode: Mode,
) -> Result<CandidateTable> {
    let ls = stats.local(agent, t, k);
    if ls.reach_prob <= 0.0 {
        let mut node = vec![0; policy.agent_count()];
        node[agent] = k;
        return Err(Error::UnreachableNode { layer: t, node });
    }
    let compiled = CompiledPolicy::new(problem, policy);
    let mut cache = ValueCache::new();
    Ok(candidate_table_with(
        problem, policy, &compiled, stats, agent, t, k, mode, &mut cache,
    ))
}

/// Best local action for a last-layer node.
pub fn optimize_last_step(
    problem: &Problem,
    policy: &JointPolicy,
    stats: &NodeStats,
    agent: usize,
    k: usize,
    mode: Mode,
) -> Result<usize> {
    let t = policy.horizon() - 1;
    Ok(candidate_table(problem, policy, stats, agent, t, k, mode)?
        .best()
        .action)
}

/// Best local action and successor map for a node before the last layer.
pub fn optimize_step(
    problem: &Problem,
    policy: &JointPolicy,
    stats: &NodeStats,
    agent: usize,
    t: usize,
    k: usize,
    mode: Mode,
) -> Result<PolicyNode> {
    Ok(candidate_table(problem, policy, stats, agent, t, k, mode)?.best())
}

/// Improves every local node of `policy` in place of a copy, from the last
/// layer to the first. `stats` must describe `policy` and stays fixed for the
/// whole pass.
pub fn backward_pass(
    problem: &Problem,
    policy: &JointPolicy,
    stats: &NodeStats,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> JointPolicy {
    let horizon = policy.horizon();
    let mut plus = policy.clone();
    let mut compiled = CompiledPolicy::new(problem, &plus);
    // Layers after `t` are final while layer `t` is processed, so cached
    // values stay valid for the whole pass.
    let mut cache = ValueCache::new();
    for t in (0..horizon).rev() {
        if t + 1 < horizon {
            compiled.recompile_layer(problem, &plus, t + 1);
        }
        for agent in 0..plus.agent_count() {
            let width = plus.locals[agent].width(t);
            for k in 0..width {
                if stats.local(agent, t, k).reach_prob <= 0.0 {
                    randomize_node(problem, &mut plus, agent, t, k, rng);
                    continue;
                }
                let table = candidate_table_with(
                    problem, &plus, &compiled, stats, agent, t, k, mode, &mut cache,
                );
                let node = table.best();
                let local = &mut plus.locals[agent];
                let same = local.layers[t][..k].iter().position(|w| *w == node);
                local.layers[t][k] = node;
                if let Some(w) = same {
                    if t > 0 {
                        for x in &mut local.layers[t - 1] {
                            for n in &mut x.next {
                                if *n == k {
                                    *n = w;
                                }
                            }
                        }
                    }
                    randomize_node(problem, &mut plus, agent, t, k, rng);
                }
            }
        }
    }
    plus
}

/// RNG of one restart: the master seed with the restart index as stream, so
/// adding restarts never perturbs earlier ones.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Runs one restart to convergence, the pass limit or the deadline.
pub fn solve_restart(
    problem: &Problem,
    config: &SolverConfig,
    restart: usize,
    deadline: Option<Instant>,
) -> Result<RestartReport> {
    let mut rng = restart_rng(config.rng_seed, restart);
    let mut policy = init_random_policy(problem, config.width, &mut rng);
    let cap = config.enumeration_cap;
    let mut value = evaluate_with_cap(problem, &policy, cap)?;
    let mut report = RestartReport {
        restart,
        initial_value: value,
        value_trace: Vec::new(),
        pass_durations: Vec::new(),
        backward_durations: Vec::new(),
        converged: false,
        timed_out: false,
        final_value: value,
        policy: policy.clone(),
    };
    for _ in 0..config.max_passes {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            report.timed_out = true;
            break;
        }
        let start = Instant::now();
        let stats = compute_node_stats_with_cap(problem, &policy, cap)?;
        let bstart = Instant::now();
        let plus = backward_pass(problem, &policy, &stats, config.mode, &mut rng);
        report.backward_durations.push(bstart.elapsed());
        let changed = policy.structural_difference(&plus);
        let plus_value = evaluate_with_cap(problem, &plus, cap)?;
        if plus_value >= value {
            policy = plus;
            value = plus_value;
        }
        report.value_trace.push(value);
        report.pass_durations.push(start.elapsed());
        if changed == 0 {
            report.converged = true;
            break;
        }
    }
    report.final_value = value;
    report.policy = policy;
    Ok(report)
}

/// Runs all restarts, in parallel when `config.jobs` allows, and reports the
/// best policy (ties to the lowest restart index).
pub fn solve(problem: &Problem, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let report = problem.validate();
    if !report.is_empty() {
        return Err(Error::InvalidProblem(report.to_string()));
    }
    let deadline = config.time_limit.map(|d| Instant::now() + d);
    let run = || -> Result<Vec<RestartReport>> {
        (0..config.restart_count)
            .into_par_iter()
            .map(|r| solve_restart(problem, config, r, deadline))
            .collect()
    };
    let restarts = if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(run)?
    } else {
        run()?
    };
    let mut best = 0;
    for (i, r) in restarts.iter().enumerate() {
        if r.final_value > restarts[best].final_value {
            best = i;
        }
    }
    let termination = if restarts.iter().any(|r| r.timed_out) {
        Termination::TimeLimitExceeded
    } else {
        Termination::Completed
    };
    let b = &restarts[best];
    Ok(SolveReport {
        best_policy: b.policy.clone(),
        best_value: b.final_value,
        best_restart: best,
        value_trace: b.value_trace.clone(),
        pass_durations: b.pass_durations.clone(),
        seed: config.rng_seed,
        mode: config.mode,
        width: config.width,
        termination,
        restarts,
    })
}
