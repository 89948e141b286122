//! Line-oriented text format for problems.
//!
//! ```text
//! # comment
//! agents: 2
//! states: 8
//! actions: 2 2
//! observations: 4 4
//! horizon: 2
//! start: 0.125 0.125 ...          (or `start: uniform`)
//! T: <a_1 .. a_n> : <s> : <s'> <prob>
//! O: <a_1 .. a_n> : <s'> : <z_1 .. z_n> <prob>
//! R: linear <t> : <a_1 .. a_n> : <s> <value>
//! R: belief <t> negentropy|zero
//! R: cost <t> : <a_1 .. a_n> <value>
//! Rfinal: negentropy | zero | linear <|S| values>
//! labels states: <names>
//! labels actions <agent>: <names>
//! labels observations <agent>: <names>
//! ```
//!
//! Every index position accepts `*`, which expands to all values. Later lines
//! overwrite earlier ones; unlisted table entries are zero. A step with any
//! `belief` or `cost` line is a convex-belief step (functional `zero` unless
//! declared); other steps are linear.

use std::fmt::Write as _;

use super::{
    sparse_from_dense, BeliefFunctional, FinalRewardSpec, JointSpace, Labels, Problem, RewardSpec,
};
use crate::belief::Belief;
use crate::error::{Error, ParseError, Result};

#[derive(Debug, Clone)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() || c == ':' {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &line[s..i],
                    column: s + 1,
                });
            }
            if c == ':' {
                out.push(Token {
                    text: &line[i..i + 1],
                    column: i + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &line[s..],
            column: s + 1,
        });
    }
    out
}

/// Splits tokens into colon-separated segments.
fn segments<'a, 'b>(tokens: &'b [Token<'a>]) -> Vec<&'b [Token<'a>]> {
    tokens.split(|t| t.text == ":").collect()
}

struct Header {
    agents: Option<usize>,
    states: Option<usize>,
    actions: Option<Vec<usize>>,
    observations: Option<Vec<usize>>,
    horizon: Option<usize>,
}

struct Dims {
    agents: usize,
    states: usize,
    actions: JointSpace,
    observations: JointSpace,
    horizon: usize,
}

enum StepDraft {
    Unset,
    Linear(Vec<Vec<f64>>),
    Convex {
        functional: BeliefFunctional,
        cost: Vec<f64>,
    },
}

struct Parser {
    line: usize,
    header: Header,
    dims: Option<Dims>,
    start: Option<Vec<f64>>,
    transition: Vec<Vec<Vec<f64>>>,
    observation: Vec<Vec<Vec<f64>>>,
    steps: Vec<StepDraft>,
    final_reward: Option<FinalRewardSpec>,
    labels: Labels,
}

impl Parser {
    fn err(&self, tok: &Token<'_>, msg: impl Into<String>) -> ParseError {
        ParseError::syntax(self.line, tok.column, msg)
    }

    fn err_at(&self, column: usize, msg: impl Into<String>) -> ParseError {
        ParseError::syntax(self.line, column, msg)
    }

    fn usize_tok(&self, tok: &Token<'_>) -> std::result::Result<usize, ParseError> {
        tok.text.parse::<usize>().map_err(|_| {
            self.err(
                tok,
                format!("expected a non-negative integer, found `{}`", tok.text),
            )
        })
    }

    fn f64_tok(&self, tok: &Token<'_>) -> std::result::Result<f64, ParseError> {
        tok.text
            .parse::<f64>()
            .map_err(|_| self.err(tok, format!("expected a number, found `{}`", tok.text)))
    }

    /// Expands an index token (`*` or integer) bounded by `bound`.
    fn index_tok(
        &self,
        tok: &Token<'_>,
        bound: usize,
    ) -> std::result::Result<Vec<usize>, ParseError> {
        if tok.text == "*" {
            return Ok((0..bound).collect());
        }
        let v = self.usize_tok(tok)?;
        if v >= bound {
            return Err(self.err(tok, format!("index {v} out of range 0..{bound}")));
        }
        Ok(vec![v])
    }

    /// Expands a joint index written as one token per agent.
    fn joint_tok(
        &self,
        toks: &[Token<'_>],
        space: &JointSpace,
        column: usize,
    ) -> std::result::Result<Vec<usize>, ParseError> {
        let radices = space.radices();
        if toks.len() != radices.len() {
            return Err(self.err_at(
                toks.first().map_or(column, |t| t.column),
                format!(
                    "expected {} local indices, found {}",
                    radices.len(),
                    toks.len()
                ),
            ));
        }
        let mut flats = vec![0usize];
        for (agent, tok) in toks.iter().enumerate() {
            let locals = self.index_tok(tok, radices[agent])?;
            let mut next = Vec::with_capacity(flats.len() * locals.len());
            for &f in &flats {
                for &l in &locals {
                    next.push(space.with_component(f, agent, l));
                }
            }
            flats = next;
        }
        Ok(flats)
    }

    fn dims(&mut self, key: &Token<'_>) -> std::result::Result<&Dims, ParseError> {
        if self.dims.is_none() {
            let h = &self.header;
            let missing = [
                ("agents", h.agents.is_none()),
                ("states", h.states.is_none()),
                ("actions", h.actions.is_none()),
                ("observations", h.observations.is_none()),
                ("horizon", h.horizon.is_none()),
            ]
            .into_iter()
            .find(|(_, m)| *m);
            if let Some((name, _)) = missing {
                return Err(self.err(
                    key,
                    format!("header key `{name}` must precede `{}` lines", key.text),
                ));
            }
            let agents = h.agents.unwrap();
            let actions = h.actions.clone().unwrap();
            let observations = h.observations.clone().unwrap();
            if actions.len() != agents {
                return Err(ParseError::semantic(
                    "actions",
                    format!("expected {agents} counts, found {}", actions.len()),
                ));
            }
            if observations.len() != agents {
                return Err(ParseError::semantic(
                    "observations",
                    format!("expected {agents} counts, found {}", observations.len()),
                ));
            }
            let states = h.states.unwrap();
            let horizon = h.horizon.unwrap();
            let actions = JointSpace::new(&actions);
            let observations = JointSpace::new(&observations);
            self.transition = vec![vec![vec![0.0; states]; states]; actions.size()];
            self.observation = vec![vec![vec![0.0; observations.size()]; states]; actions.size()];
            self.steps = (0..horizon).map(|_| StepDraft::Unset).collect();
            self.dims = Some(Dims {
                agents,
                states,
                actions,
                observations,
                horizon,
            });
        }
        Ok(self.dims.as_ref().unwrap())
    }

    fn header_value(
        &self,
        key: &Token<'_>,
        rest: &[Token<'_>],
    ) -> std::result::Result<usize, ParseError> {
        match rest {
            [tok] => self.usize_tok(tok),
            _ => Err(self.err(key, format!("`{}` takes exactly one integer", key.text))),
        }
    }

    fn line(&mut self, tokens: &[Token<'_>]) -> std::result::Result<(), ParseError> {
        let colon = tokens.iter().position(|t| t.text == ":");
        let Some(colon) = colon else {
            return Err(self.err(&tokens[0], "expected `key:`"));
        };
        if colon == 0 {
            return Err(self.err(&tokens[0], "missing key before `:`"));
        }
        let key_toks = &tokens[..colon];
        let key = &key_toks[0];
        let rest = &tokens[colon + 1..];
        if self.dims.is_some()
            && matches!(
                key.text,
                "agents" | "states" | "actions" | "observations" | "horizon"
            )
        {
            return Err(self.err(key, format!("header key `{}` after body lines", key.text)));
        }
        match (key.text, key_toks.len()) {
            ("agents", 1) => self.header.agents = Some(self.header_value(key, rest)?),
            ("states", 1) => self.header.states = Some(self.header_value(key, rest)?),
            ("horizon", 1) => self.header.horizon = Some(self.header_value(key, rest)?),
            ("actions", 1) | ("observations", 1) => {
                let v = rest
                    .iter()
                    .map(|t| self.usize_tok(t))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                if v.is_empty() {
                    return Err(self.err(key, "expected one count per agent"));
                }
                if key.text == "actions" {
                    self.header.actions = Some(v);
                } else {
                    self.header.observations = Some(v);
                }
            }
            ("start", 1) => {
                let values = if rest.len() == 1 && rest[0].text == "uniform" {
                    let n = self
                        .header
                        .states
                        .ok_or_else(|| self.err(key, "`states` must precede `start: uniform`"))?;
                    vec![1.0 / n as f64; n]
                } else {
                    rest.iter()
                        .map(|t| self.f64_tok(t))
                        .collect::<std::result::Result<Vec<_>, _>>()?
                };
                self.start = Some(values);
            }
            ("T", 1) => self.transition_line(key, rest)?,
            ("O", 1) => self.observation_line(key, rest)?,
            ("R", 1) => self.reward_line(key, rest)?,
            ("Rfinal", 1) => self.final_line(key, rest)?,
            ("labels", 2) | ("labels", 3) => self.labels_line(key_toks, rest)?,
            _ => {
                return Err(self.err(
                    key,
                    format!(
                        "unknown key `{}`",
                        key_toks
                            .iter()
                            .map(|t| t.text)
                            .collect::<Vec<_>>()
                            .join(" ")
                    ),
                ));
            }
        }
        Ok(())
    }

    fn transition_line(
        &mut self,
        key: &Token<'_>,
        rest: &[Token<'_>],
    ) -> std::result::Result<(), ParseError> {
        self.dims(key)?;
        let segs = segments(rest);
        if segs.len() != 3 || segs[1].len() != 1 || segs[2].len() != 2 {
            return Err(self.err(key, "expected `T: <joint action> : <s> : <s'> <prob>`"));
        }
        let dims = self.dims.as_ref().unwrap();
        let actions = self.joint_tok(segs[0], &dims.actions, key.column)?;
        let from = self.index_tok(&segs[1][0], dims.states)?;
        let to = self.index_tok(&segs[2][0], dims.states)?;
        let p = self.f64_tok(&segs[2][1])?;
        for &a in &actions {
            for &s in &from {
                for &s2 in &to {
                    self.transition[a][s][s2] = p;
                }
            }
        }
        Ok(())
    }

    fn observation_line(
        &mut self,
        key: &Token<'_>,
        rest: &[Token<'_>],
    ) -> std::result::Result<(), ParseError> {
        self.dims(key)?;
        let segs = segments(rest);
        let dims = self.dims.as_ref().unwrap();
        if segs.len() != 3 || segs[1].len() != 1 || segs[2].len() != dims.agents + 1 {
            return Err(self.err(
                key,
                "expected `O: <joint action> : <s'> : <joint observation> <prob>`",
            ));
        }
        let actions = self.joint_tok(segs[0], &dims.actions, key.column)?;
        let to = self.index_tok(&segs[1][0], dims.states)?;
        let n = segs[2].len();
        let obs = self.joint_tok(&segs[2][..n - 1], &dims.observations, key.column)?;
        let p = self.f64_tok(&segs[2][n - 1])?;
        for &a in &actions {
            for &s2 in &to {
                for &z in &obs {
                    self.observation[a][s2][z] = p;
                }
            }
        }
        Ok(())
    }

    fn steps_tok(
        &self,
        tok: &Token<'_>,
        horizon: usize,
    ) -> std::result::Result<Vec<usize>, ParseError> {
        self.index_tok(tok, horizon)
    }

    fn reward_line(
        &mut self,
        key: &Token<'_>,
        rest: &[Token<'_>],
    ) -> std::result::Result<(), ParseError> {
        self.dims(key)?;
        let segs = segments(rest);
        let head = segs[0];
        if head.is_empty() {
            return Err(self.err(key, "expected `linear`, `cost` or `belief` after `R:`"));
        }
        let dims = self.dims.as_ref().unwrap();
        let (n_a, n_s, horizon) = (dims.actions.size(), dims.states, dims.horizon);
        let kind = &head[0];
        match kind.text {
            "linear" => {
                if head.len() != 2 || segs.len() != 3 || segs[2].len() != 2 {
                    return Err(self.err(
                        kind,
                        "expected `R: linear <t> : <joint action> : <s> <value>`",
                    ));
                }
                let steps = self.steps_tok(&head[1], horizon)?;
                let actions = self.joint_tok(segs[1], &dims.actions, kind.column)?;
                let states = self.index_tok(&segs[2][0], n_s)?;
                let v = self.f64_tok(&segs[2][1])?;
                for &t in &steps {
                    let table = match &mut self.steps[t] {
                        d @ StepDraft::Unset => {
                            *d = StepDraft::Linear(vec![vec![0.0; n_s]; n_a]);
                            match d {
                                StepDraft::Linear(table) => table,
                                _ => unreachable!(),
                            }
                        }
                        StepDraft::Linear(table) => table,
                        StepDraft::Convex { .. } => {
                            return Err(ParseError::semantic(
                                format!("R: linear {t}"),
                                "step already declared as a convex-belief reward",
                            ))
                        }
                    };
                    for &a in &actions {
                        for &s in &states {
                            table[a][s] = v;
                        }
                    }
                }
            }
            "cost" | "belief" => {
                let (steps, functional, cost) = if kind.text == "cost" {
                    if head.len() != 2 || segs.len() != 2 || segs[1].len() != dims.agents + 1 {
                        return Err(
                            self.err(kind, "expected `R: cost <t> : <joint action> <value>`")
                        );
                    }
                    let steps = self.steps_tok(&head[1], horizon)?;
                    let n = segs[1].len();
                    let actions = self.joint_tok(&segs[1][..n - 1], &dims.actions, kind.column)?;
                    let v = self.f64_tok(&segs[1][n - 1])?;
                    (steps, None, Some((actions, v)))
                } else {
                    if head.len() != 3 || segs.len() != 1 {
                        return Err(self.err(kind, "expected `R: belief <t> <functional>`"));
                    }
                    let steps = self.steps_tok(&head[1], horizon)?;
                    let f = BeliefFunctional::from_name(head[2].text).ok_or_else(|| {
                        ParseError::semantic(
                            format!("R: belief {}", head[1].text),
                            format!("unknown belief functional `{}`", head[2].text),
                        )
                    })?;
                    (steps, Some(f), None)
                };
                for &t in &steps {
                    if let StepDraft::Unset = self.steps[t] {
                        self.steps[t] = StepDraft::Convex {
                            functional: BeliefFunctional::Zero,
                            cost: vec![0.0; n_a],
                        };
                    }
                    match &mut self.steps[t] {
                        StepDraft::Convex {
                            functional: f,
                            cost: c,
                        } => {
                            if let Some(new_f) = functional {
                                *f = new_f;
                            }
                            if let Some((actions, v)) = &cost {
                                for &a in actions {
                                    c[a] = *v;
                                }
                            }
                        }
                        _ => {
                            return Err(ParseError::semantic(
                                format!("R: {} {t}", kind.text),
                                "step already declared as a linear reward",
                            ))
                        }
                    }
                }
            }
            other => {
                return Err(ParseError::semantic(
                    format!("R: {other}"),
                    "unknown reward variant (expected linear, cost or belief)",
                ))
            }
        }
        Ok(())
    }

    fn final_line(
        &mut self,
        key: &Token<'_>,
        rest: &[Token<'_>],
    ) -> std::result::Result<(), ParseError> {
        let Some(kind) = rest.first() else {
            return Err(self.err(key, "expected `negentropy`, `zero` or `linear <values>`"));
        };
        let spec = match (kind.text, rest.len()) {
            ("negentropy", 1) => FinalRewardSpec::NegEntropy,
            ("zero", 1) => FinalRewardSpec::Zero,
            ("linear", _) => FinalRewardSpec::LinearState(
                rest[1..]
                    .iter()
                    .map(|t| self.f64_tok(t))
                    .collect::<std::result::Result<Vec<_>, _>>()?,
            ),
            (other, _) => {
                return Err(ParseError::semantic(
                    format!("Rfinal: {other}"),
                    "unknown final reward variant",
                ))
            }
        };
        self.final_reward = Some(spec);
        Ok(())
    }

    fn labels_line(
        &mut self,
        key_toks: &[Token<'_>],
        rest: &[Token<'_>],
    ) -> std::result::Result<(), ParseError> {
        let names: Vec<String> = rest.iter().map(|t| t.text.to_string()).collect();
        match (key_toks[1].text, key_toks.get(2)) {
            ("states", None) => self.labels.states = names,
            (kind @ ("actions" | "observations"), Some(agent_tok)) => {
                let agent = self.usize_tok(agent_tok)?;
                let target = if kind == "actions" {
                    &mut self.labels.actions
                } else {
                    &mut self.labels.observations
                };
                if target.len() <= agent {
                    target.resize(agent + 1, Vec::new());
                }
                target[agent] = names;
            }
            _ => return Err(self.err(
                &key_toks[1],
                "expected `labels states:`, `labels actions <i>:` or `labels observations <i>:`",
            )),
        }
        Ok(())
    }

    fn finish(mut self) -> std::result::Result<Problem, ParseError> {
        let Some(dims) = self.dims.take() else {
            let h = &self.header;
            let name = if h.agents.is_none() {
                "agents"
            } else if h.states.is_none() {
                "states"
            } else if h.actions.is_none() {
                "actions"
            } else if h.observations.is_none() {
                "observations"
            } else {
                "horizon"
            };
            if h.agents.is_some()
                && h.states.is_some()
                && h.actions.is_some()
                && h.observations.is_some()
                && h.horizon.is_some()
            {
                return Err(ParseError::semantic("T", "problem has no transition table"));
            }
            return Err(ParseError::semantic(name, "missing header key"));
        };
        let start = self
            .start
            .take()
            .ok_or_else(|| ParseError::semantic("start", "missing initial belief"))?;
        if start.len() != dims.states {
            return Err(ParseError::semantic(
                "start",
                format!("expected {} values, found {}", dims.states, start.len()),
            ));
        }
        let final_reward = self
            .final_reward
            .take()
            .ok_or_else(|| ParseError::semantic("Rfinal", "missing final reward"))?;
        if let FinalRewardSpec::LinearState(r) = &final_reward {
            if r.len() != dims.states {
                return Err(ParseError::semantic(
                    "Rfinal",
                    format!("expected {} values, found {}", dims.states, r.len()),
                ));
            }
        }
        for (kind, per_agent) in [
            ("actions", &self.labels.actions),
            ("observations", &self.labels.observations),
        ] {
            if per_agent.len() > dims.agents {
                return Err(ParseError::semantic(
                    format!("labels {kind} {}", per_agent.len() - 1),
                    "agent index out of range",
                ));
            }
        }
        let n_a = dims.actions.size();
        let step_rewards = self
            .steps
            .into_iter()
            .map(|d| match d {
                StepDraft::Unset => RewardSpec::zero_linear(n_a, dims.states),
                StepDraft::Linear(table) => RewardSpec::LinearStateAction { table },
                StepDraft::Convex { functional, cost } => {
                    RewardSpec::ConvexBelief { functional, cost }
                }
            })
            .collect();
        let to_sparse = |t: Vec<Vec<Vec<f64>>>| -> Vec<Vec<super::SparseRow>> {
            t.into_iter()
                .map(|rows| rows.iter().map(|r| sparse_from_dense(r)).collect())
                .collect()
        };
        let mut labels = self.labels;
        if labels.actions.iter().all(Vec::is_empty) {
            labels.actions.clear();
        }
        if labels.observations.iter().all(Vec::is_empty) {
            labels.observations.clear();
        }
        Ok(Problem {
            agent_count: dims.agents,
            state_count: dims.states,
            local_actions: dims.actions.radices().to_vec(),
            local_observations: dims.observations.radices().to_vec(),
            transition: to_sparse(self.transition),
            observation: to_sparse(self.observation),
            initial_belief: Belief::from_vec(start),
            horizon: dims.horizon,
            step_rewards,
            final_reward,
            labels,
        })
    }
}

/// Parses a problem without checking probabilistic invariants.
pub fn parse_problem_unchecked(text: &str) -> std::result::Result<Problem, ParseError> {
    let mut parser = Parser {
        line: 0,
        header: Header {
            agents: None,
            states: None,
            actions: None,
            observations: None,
            horizon: None,
        },
        dims: None,
        start: None,
        transition: Vec::new(),
        observation: Vec::new(),
        steps: Vec::new(),
        final_reward: None,
        labels: Labels::default(),
    };
    let mut any = false;
    for (k, raw) in text.lines().enumerate() {
        parser.line = k + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        if tokens.is_empty() {
            continue;
        }
        any = true;
        parser.line(&tokens)?;
    }
    if !any {
        return Err(ParseError::syntax(1, 1, "empty problem file"));
    }
    parser.finish()
}

/// Parses a problem and rejects it unless every invariant holds.
pub fn parse_problem(text: &str) -> Result<Problem> {
    let problem = parse_problem_unchecked(text)?;
    let report = problem.validate();
    if !report.is_empty() {
        return Err(Error::InvalidProblem(report.to_string()));
    }
    Ok(problem)
}

fn joint_str(space: &JointSpace, flat: usize) -> String {
    space
        .decode(flat)
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Writes the canonical text form. Floats use the shortest representation
/// that parses back to the same bits.
pub fn serialize_problem(problem: &Problem) -> String {
    let mut out = String::new();
    let aspace = problem.action_space();
    let zspace = problem.observation_space();
    let join = |v: &[usize]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let floats = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let _ = writeln!(out, "agents: {}", problem.agent_count);
    let _ = writeln!(out, "states: {}", problem.state_count);
    let _ = writeln!(out, "actions: {}", join(&problem.local_actions));
    let _ = writeln!(out, "observations: {}", join(&problem.local_observations));
    let _ = writeln!(out, "horizon: {}", problem.horizon);
    let _ = writeln!(out, "start: {}", floats(problem.initial_belief.as_slice()));

    let labels = &problem.labels;
    if !labels.states.is_empty() {
        let _ = writeln!(out, "labels states: {}", labels.states.join(" "));
    }
    for (i, names) in labels.actions.iter().enumerate() {
        if !names.is_empty() {
            let _ = writeln!(out, "labels actions {i}: {}", names.join(" "));
        }
    }
    for (i, names) in labels.observations.iter().enumerate() {
        if !names.is_empty() {
            let _ = writeln!(out, "labels observations {i}: {}", names.join(" "));
        }
    }

    for (a, rows) in problem.transition.iter().enumerate() {
        let astr = joint_str(&aspace, a);
        for (s, row) in rows.iter().enumerate() {
            for &(s2, p) in row {
                let _ = writeln!(out, "T: {astr} : {s} : {s2} {p:?}");
            }
        }
    }
    for (a, rows) in problem.observation.iter().enumerate() {
        let astr = joint_str(&aspace, a);
        for (s2, row) in rows.iter().enumerate() {
            for &(z, p) in row {
                let _ = writeln!(out, "O: {astr} : {s2} : {} {p:?}", joint_str(&zspace, z));
            }
        }
    }
    for (t, r) in problem.step_rewards.iter().enumerate() {
        match r {
            RewardSpec::LinearStateAction { table } => {
                for (a, row) in table.iter().enumerate() {
                    let astr = joint_str(&aspace, a);
                    for (s, &v) in row.iter().enumerate() {
                        if v != 0.0 {
                            let _ = writeln!(out, "R: linear {t} : {astr} : {s} {v:?}");
                        }
                    }
                }
            }
            RewardSpec::ConvexBelief { functional, cost } => {
                let _ = writeln!(out, "R: belief {t} {}", functional.name());
                for (a, &v) in cost.iter().enumerate() {
                    if v != 0.0 {
                        let _ = writeln!(out, "R: cost {t} : {} {v:?}", joint_str(&aspace, a));
                    }
                }
            }
        }
    }
    match &problem.final_reward {
        FinalRewardSpec::NegEntropy => out.push_str("Rfinal: negentropy\n"),
        FinalRewardSpec::Zero => out.push_str("Rfinal: zero\n"),
        FinalRewardSpec::LinearState(r) => {
            let _ = writeln!(out, "Rfinal: linear {}", floats(r));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "\
# two states, one agent
agents: 1
states: 2
actions: 2
observations: 2
horizon: 2
start: 0.5 0.5
T: * : 0 : 0 1.0
T: * : 1 : 1 1.0
O: * : * : * 0.5
R: linear 0 : 1 : * 1.0
R: belief 1 negentropy
R: cost 1 : 1 0.25
Rfinal: negentropy
";

    #[test]
    fn parses_toy_with_wildcards() {
        let p = parse_problem(TOY).unwrap();
        assert_eq!(p.state_count, 2);
        assert_eq!(p.local_actions, vec![2]);
        assert_eq!(p.transition[1][1], vec![(1, 1.0)]);
        assert_eq!(p.observation[0][1], vec![(0, 0.5), (1, 0.5)]);
        assert_eq!(
            p.step_rewards[0],
            RewardSpec::LinearStateAction {
                table: vec![vec![0.0, 0.0], vec![1.0, 1.0]]
            }
        );
        assert_eq!(
            p.step_rewards[1],
            RewardSpec::ConvexBelief {
                functional: BeliefFunctional::NegEntropy,
                cost: vec![0.0, 0.25]
            }
        );
        assert_eq!(p.final_reward, FinalRewardSpec::NegEntropy);
    }

    #[test]
    fn empty_stream_is_syntax_error_on_line_one() {
        match parse_problem_unchecked("") {
            Err(ParseError::Syntax { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_problem_unchecked("# only a comment\n\n"),
            Err(ParseError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn bad_number_reports_line_and_column() {
        let text = TOY.replace("T: * : 1 : 1 1.0", "T: * : 1 : 1 x.0");
        match parse_problem_unchecked(&text) {
            Err(ParseError::Syntax { line, column, .. }) => {
                assert_eq!(line, 9);
                assert_eq!(column, 14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_reward_variant_is_semantic() {
        let text = TOY.replace("R: belief 1 negentropy", "R: quadratic 1 : 0 1.0");
        assert!(matches!(
            parse_problem_unchecked(&text),
            Err(ParseError::Semantic { .. })
        ));
        let text = TOY.replace("Rfinal: negentropy", "Rfinal: renyi");
        match parse_problem_unchecked(&text) {
            Err(ParseError::Semantic { key, .. }) => assert_eq!(key, "Rfinal: renyi"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_semantic() {
        let text = TOY.replace("start: 0.5 0.5", "start: 0.5 0.25 0.25");
        match parse_problem_unchecked(&text) {
            Err(ParseError::Semantic { key, .. }) => assert_eq!(key, "start"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn body_before_header_is_rejected() {
        let text = "agents: 1\nT: 0 : 0 : 0 1.0\n";
        assert!(matches!(
            parse_problem_unchecked(text),
            Err(ParseError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn invalid_rows_fail_checked_parse() {
        let text = TOY.replace("T: * : 1 : 1 1.0", "T: * : 1 : 1 0.9");
        assert!(parse_problem_unchecked(&text).is_ok());
        assert!(matches!(
            parse_problem(&text),
            Err(Error::InvalidProblem(_))
        ));
    }

    #[test]
    fn labels_survive_round_trip() {
        let mut text = TOY.to_string();
        text.push_str("labels states: left right\nlabels actions 0: wait listen\n");
        let p = parse_problem(&text).unwrap();
        assert_eq!(p.labels.states, vec!["left", "right"]);
        let q = parse_problem(&serialize_problem(&p)).unwrap();
        assert_eq!(p, q);
        assert_eq!(q.labels.actions[0], vec!["wait", "listen"]);
    }

    #[test]
    fn serialize_round_trips_toy() {
        let p = parse_problem(TOY).unwrap();
        let text = serialize_problem(&p);
        assert_eq!(parse_problem(&text).unwrap(), p);
        // Canonical text is a fixpoint.
        assert_eq!(serialize_problem(&parse_problem(&text).unwrap()), text);
    }
}
