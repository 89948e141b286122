//! Line-based text format for joint policies.
//!
//! ```text
//! agents: 2
//! horizon: 3
//! agent 0
//! node 0 0 action=1
//! edge 0 0 obs=0 -> 1
//! ```
//!
//! Every node of every layer must appear, and every non-final node needs one
//! edge per local observation.

use std::collections::BTreeMap;

use super::{JointPolicy, LocalPolicy, PolicyNode};
use crate::error::{Error, ParseError, Result};

pub fn serialize_policy(policy: &JointPolicy) -> String {
    let mut out = String::new();
    out.push_str(&format!("agents: {}\n", policy.agent_count()));
    out.push_str(&format!("horizon: {}\n", policy.horizon()));
    for (i, local) in policy.locals.iter().enumerate() {
        out.push_str(&format!("agent {i}\n"));
        for (t, layer) in local.layers.iter().enumerate() {
            for (k, node) in layer.iter().enumerate() {
                out.push_str(&format!("node {t} {k} action={}\n", node.action));
                for (z, n) in node.next.iter().enumerate() {
                    out.push_str(&format!("edge {t} {k} obs={z} -> {n}\n"));
                }
            }
        }
    }
    out
}

#[derive(Default)]
struct Draft {
    actions: BTreeMap<(usize, usize), usize>,
    edges: BTreeMap<(usize, usize), BTreeMap<usize, usize>>,
}

fn number(token: Option<&str>, line: usize, what: &str) -> std::result::Result<usize, ParseError> {
    let tok = token.ok_or_else(|| ParseError::syntax(line, 1, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| ParseError::syntax(line, 1, format!("expected {what}, found '{tok}'")))
}

fn keyed(token: Option<&str>, key: &str, line: usize) -> std::result::Result<usize, ParseError> {
    let tok = token.ok_or_else(|| ParseError::syntax(line, 1, format!("missing {key}=")))?;
    let value = tok
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| ParseError::syntax(line, 1, format!("expected {key}=<n>, found '{tok}'")))?;
    number(Some(value), line, key)
}

/// Parses the policy text format. The result is structurally checked for
/// temporal consistency but not against any problem.
pub fn parse_policy(text: &str) -> Result<JointPolicy> {
    let mut agents: Option<usize> = None;
    let mut horizon: Option<usize> = None;
    let mut drafts: Vec<Draft> = Vec::new();
    let mut current: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let head = tokens.next().unwrap_or_default();
        match head {
            "agents:" => {
                let n = number(tokens.next(), line, "agent count")?;
                agents = Some(n);
                drafts = (0..n).map(|_| Draft::default()).collect();
            }
            "horizon:" => horizon = Some(number(tokens.next(), line, "horizon")?),
            "agent" => {
                let i = number(tokens.next(), line, "agent index")?;
                if i >= drafts.len() {
                    return Err(
                        ParseError::semantic("agent", format!("agent {i} out of range")).into(),
                    );
                }
                current = Some(i);
            }
            "node" | "edge" => {
                let i = current.ok_or_else(|| {
                    ParseError::syntax(line, 1, format!("'{head}' before 'agent'"))
                })?;
                let t = number(tokens.next(), line, "layer")?;
                let k = number(tokens.next(), line, "node index")?;
                if head == "node" {
                    let a = keyed(tokens.next(), "action", line)?;
                    drafts[i].actions.insert((t, k), a);
                } else {
                    let z = keyed(tokens.next(), "obs", line)?;
                    if tokens.next() != Some("->") {
                        return Err(ParseError::syntax(line, 1, "expected '->'").into());
                    }
                    let n = number(tokens.next(), line, "successor")?;
                    drafts[i].edges.entry((t, k)).or_default().insert(z, n);
                }
            }
            other => {
                return Err(
                    ParseError::syntax(line, 1, format!("unknown directive '{other}'")).into(),
                );
            }
        }
        if let Some(extra) = tokens.next() {
            return Err(ParseError::syntax(line, 1, format!("unexpected token '{extra}'")).into());
        }
    }
    let agents = agents.ok_or_else(|| ParseError::semantic("agents", "missing agent count"))?;
    let horizon = horizon.ok_or_else(|| ParseError::semantic("horizon", "missing horizon"))?;
    if agents == 0 || horizon == 0 {
        return Err(Error::InvalidPolicy(
            "agent count and horizon must be positive".into(),
        ));
    }

    let mut locals = Vec::with_capacity(agents);
    for (i, draft) in drafts.into_iter().enumerate() {
        let mut layers: Vec<Vec<PolicyNode>> = vec![Vec::new(); horizon];
        for (&(t, k), &action) in &draft.actions {
            if t >= horizon {
                return Err(Error::InvalidPolicy(format!(
                    "agent {i}: node ({t}, {k}) beyond horizon"
                )));
            }
            if k != layers[t].len() {
                return Err(Error::InvalidPolicy(format!(
                    "agent {i}: node ({t}, {}) missing",
                    layers[t].len()
                )));
            }
            let next = match draft.edges.get(&(t, k)) {
                Some(edges) => {
                    let expected: Vec<usize> = (0..edges.len()).collect();
                    if edges.keys().copied().collect::<Vec<_>>() != expected {
                        return Err(Error::InvalidPolicy(format!(
                            "agent {i}: node ({t}, {k}) has non-contiguous observation edges"
                        )));
                    }
                    edges.values().copied().collect()
                }
                None => Vec::new(),
            };
            layers[t].push(PolicyNode { action, next });
        }
        if let Some(&(t, k)) = draft
            .edges
            .keys()
            .find(|key| !draft.actions.contains_key(key))
        {
            return Err(Error::InvalidPolicy(format!(
                "agent {i}: edge from undeclared node ({t}, {k})"
            )));
        }
        let local = LocalPolicy { layers };
        let observations = local
            .layers
            .first()
            .and_then(|l| l.first())
            .map_or(0, |n| n.next.len());
        let actions = local
            .layers
            .iter()
            .flatten()
            .map(|n| n.action + 1)
            .max()
            .unwrap_or(1);
        if horizon > 1 {
            local
                .check(actions, observations)
                .map_err(|e| Error::InvalidPolicy(format!("agent {i}: {e}")))?;
        } else {
            local
                .check(actions, 0)
                .map_err(|e| Error::InvalidPolicy(format!("agent {i}: {e}")))?;
        }
        locals.push(local);
    }
    Ok(JointPolicy { locals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::init_random_policy;
    use crate::policy::tests::single_agent;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip() {
        let p = single_agent(4);
        for seed in 0..10 {
            let pol = init_random_policy(&p, 3, &mut ChaCha8Rng::seed_from_u64(seed));
            let text = serialize_policy(&pol);
            let back = parse_policy(&text).unwrap();
            assert_eq!(back, pol);
            assert_eq!(serialize_policy(&back), text);
        }
    }

    #[test]
    fn missing_edge_is_rejected() {
        let text = "agents: 1\nhorizon: 2\nagent 0\nnode 0 0 action=0\nedge 0 0 obs=1 -> 0\nnode 1 0 action=0\n";
        assert!(matches!(parse_policy(text), Err(Error::InvalidPolicy(_))));
    }

    #[test]
    fn unknown_directive_reports_line() {
        let text = "agents: 1\nhorizon: 1\nagent 0\nleaf 0 0\n";
        match parse_policy(text) {
            Err(Error::Parse(ParseError::Syntax { line, .. })) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
