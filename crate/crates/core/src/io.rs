//! JSON documents for networks and swap sequences, DOT export and readers
//! for the combinatorial input formats used by the gadget generators.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clearing::ClearingState;
use crate::dynamics::SwapSequence;
use crate::gadgets::{Clause, Formula, Literal, SetSystem};
use crate::money::Money;
use crate::network::{AllocationRule, BankId, Edge, EdgeId, FinancialNetwork};
use crate::transforms::{apply_swap, DebtSwap};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Parse(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct BankDoc {
    pub name: String,
    #[serde(default = "Money::zero")]
    pub external_assets: Money,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub debtor: String,
    pub creditor: String,
    pub liability: Money,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "lowercase")]
pub enum RuleDoc {
    /// Creditor names in payment order.
    Ranking { ranking: Vec<String> },
    Proportional,
}

/// On-disk form of a network. Edges are listed in id order; banks without
/// a rule entry pay their creditors in the order the edges are listed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub version: u32,
    pub banks: Vec<BankDoc>,
    pub edges: Vec<EdgeDoc>,
    #[serde(default)]
    pub rules: BTreeMap<String, RuleDoc>,
}

impl NetworkDocument {
    pub fn from_network(net: &FinancialNetwork) -> Result<Self, IoError> {
        let name = |b: BankId| net.name(b).to_string();
        let banks = net
            .banks()
            .map(|v| BankDoc {
                name: name(v),
                external_assets: net.external_assets(v).clone(),
            })
            .collect();
        let edges = net
            .edges()
            .iter()
            .map(|e| EdgeDoc {
                debtor: name(e.debtor),
                creditor: name(e.creditor),
                liability: e.liability.clone(),
            })
            .collect();
        let mut rules = BTreeMap::new();
        for v in net.banks() {
            let doc = match net.rule(v) {
                AllocationRule::EdgeRanking(r) => RuleDoc::Ranking {
                    ranking: r.iter().map(|&e| name(net.edge(e).creditor)).collect(),
                },
                AllocationRule::Proportional => RuleDoc::Proportional,
                AllocationRule::Shifted { .. } => {
                    return Err(IoError::Unsupported(format!("shifted rule on bank {}", name(v))))
                }
            };
            rules.insert(name(v), doc);
        }
        Ok(NetworkDocument {
            version: SCHEMA_VERSION,
            banks,
            edges,
            rules,
        })
    }

    pub fn to_network(&self) -> Result<FinancialNetwork, IoError> {
        let bad = |s: String| Err(IoError::Validation(s));
        if self.version != SCHEMA_VERSION {
            return bad(format!("version: expected {SCHEMA_VERSION}, got {}", self.version));
        }
        let mut index = BTreeMap::new();
        for (i, b) in self.banks.iter().enumerate() {
            if index.insert(b.name.as_str(), BankId(i)).is_some() {
                return bad(format!("banks[{i}].name: duplicate bank '{}'", b.name));
            }
        }
        let lookup = |field: String, n: &str| {
            index
                .get(n)
                .copied()
                .ok_or_else(|| IoError::Validation(format!("{field}: unknown bank '{n}'")))
        };
        let mut edges = Vec::new();
        let mut outgoing: Vec<Vec<EdgeId>> = vec![Vec::new(); self.banks.len()];
        for (i, e) in self.edges.iter().enumerate() {
            let d = lookup(format!("edges[{i}].debtor"), &e.debtor)?;
            let c = lookup(format!("edges[{i}].creditor"), &e.creditor)?;
            outgoing[d.0].push(EdgeId(i));
            edges.push(Edge {
                id: EdgeId(i),
                debtor: d,
                creditor: c,
                liability: e.liability.clone(),
            });
        }
        for name in self.rules.keys() {
            lookup(format!("rules.{name}"), name)?;
        }
        let mut rules = Vec::new();
        for (i, b) in self.banks.iter().enumerate() {
            let rule = match self.rules.get(&b.name) {
                None => AllocationRule::EdgeRanking(outgoing[i].clone()),
                Some(RuleDoc::Proportional) => AllocationRule::Proportional,
                Some(RuleDoc::Ranking { ranking }) => {
                    let mut order = Vec::new();
                    for (k, cname) in ranking.iter().enumerate() {
                        let field = format!("rules.{}.ranking[{k}]", b.name);
                        let c = lookup(field.clone(), cname)?;
                        let e = outgoing[i].iter().find(|&&e| edges[e.0].creditor == c);
                        match e {
                            Some(&e) => order.push(e),
                            None => return bad(format!("{field}: '{cname}' is not a creditor of '{}'", b.name)),
                        }
                    }
                    AllocationRule::EdgeRanking(order)
                }
            };
            rules.push(rule);
        }
        let names = self.banks.iter().map(|b| b.name.clone()).collect();
        let assets = self.banks.iter().map(|b| b.external_assets.clone()).collect();
        let net = FinancialNetwork::from_parts(names, assets, edges, rules);
        if let Some(v) = net.validate().first() {
            return bad(describe_violation(&net, v));
        }
        Ok(net)
    }
}

fn describe_violation(net: &FinancialNetwork, v: &crate::network::Violation) -> String {
    use crate::network::Violation as V;
    let n = |b: BankId| net.name(b).to_string();
    let e = |id: EdgeId| {
        let e = net.edge(id);
        format!("edges[{}] ({} -> {})", id.0, n(e.debtor), n(e.creditor))
    };
    match v {
        V::SelfLoop { edge } => format!("{}: self-loop", e(*edge)),
        V::MultiEdge { debtor, creditor } => {
            format!("edges: multi-edge from '{}' to '{}'", n(*debtor), n(*creditor))
        }
        V::NonPositiveLiability { edge } => format!("{}.liability: must be positive", e(*edge)),
        V::IncompletePermutation { bank } => {
            format!("rules.{}.ranking: incomplete permutation of creditors", n(*bank))
        }
        other => other.to_string(),
    }
}

pub fn network_from_json(text: &str) -> Result<FinancialNetwork, IoError> {
    let doc: NetworkDocument = serde_json::from_str(text)?;
    doc.to_network()
}

pub fn network_to_json(net: &FinancialNetwork) -> Result<String, IoError> {
    let mut s = serde_json::to_string_pretty(&NetworkDocument::from_network(net)?)?;
    s.push('\n');
    Ok(s)
}

fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<FinancialNetwork, IoError> {
    network_from_json(&read(path.as_ref())?)
}

pub fn save(net: &FinancialNetwork, path: impl AsRef<Path>) -> Result<(), IoError> {
    write(path.as_ref(), &network_to_json(net)?)
}

/// A swap named by its two edges rather than internal ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwapDoc {
    pub debtor1: String,
    pub creditor1: String,
    pub debtor2: String,
    pub creditor2: String,
    pub liability: Money,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceDocument {
    pub version: u32,
    pub swaps: Vec<SwapDoc>,
}

impl SequenceDocument {
    /// Names every swap against the network it is applied to.
    pub fn from_sequence(seq: &SwapSequence) -> Result<Self, IoError> {
        let mut net = seq.initial.clone();
        let mut swaps = Vec::new();
        for step in &seq.steps {
            let a = net.edge(step.swap.e1);
            let b = net.edge(step.swap.e2);
            swaps.push(SwapDoc {
                debtor1: net.name(a.debtor).into(),
                creditor1: net.name(a.creditor).into(),
                debtor2: net.name(b.debtor).into(),
                creditor2: net.name(b.creditor).into(),
                liability: a.liability.clone(),
                kind: step.classification.as_ref().map(|c| c.kind.to_string()),
            });
            net = apply_swap(&net, step.swap).map_err(|e| IoError::Validation(e.to_string()))?;
        }
        Ok(SequenceDocument {
            version: SCHEMA_VERSION,
            swaps,
        })
    }

    /// Resolves the named swaps by replaying them from `initial`.
    pub fn resolve(&self, initial: &FinancialNetwork) -> Result<Vec<DebtSwap>, IoError> {
        let mut net = initial.clone();
        let mut out = Vec::new();
        for (i, s) in self.swaps.iter().enumerate() {
            let find = |d: &str, c: &str| -> Result<EdgeId, IoError> {
                let bank = |n: &str| {
                    net.bank_by_name(n)
                        .ok_or_else(|| IoError::Validation(format!("swaps[{i}]: unknown bank '{n}'")))
                };
                let e = net.find_edge(bank(d)?, bank(c)?).ok_or_else(|| {
                    IoError::Validation(format!("swaps[{i}]: no edge from '{d}' to '{c}'"))
                })?;
                if net.edge(e).liability != s.liability {
                    return Err(IoError::Validation(format!(
                        "swaps[{i}].liability: edge '{d}' -> '{c}' owes {}",
                        net.edge(e).liability
                    )));
                }
                Ok(e)
            };
            let swap = DebtSwap::new(find(&s.debtor1, &s.creditor1)?, find(&s.debtor2, &s.creditor2)?);
            net = apply_swap(&net, swap).map_err(|e| IoError::Validation(format!("swaps[{i}]: {e}")))?;
            out.push(swap);
        }
        Ok(out)
    }
}

pub fn sequence_to_json(seq: &SwapSequence) -> Result<String, IoError> {
    let mut s = serde_json::to_string_pretty(&SequenceDocument::from_sequence(seq)?)?;
    s.push('\n');
    Ok(s)
}

pub fn sequence_from_json(initial: &FinancialNetwork, text: &str) -> Result<Vec<DebtSwap>, IoError> {
    let doc: SequenceDocument = serde_json::from_str(text)?;
    doc.resolve(initial)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n"))
}

/// Deterministic DOT rendering. Edge labels are `p/l` with a clearing state
/// and `l` without; nodes carry their external assets.
pub fn export_dot(net: &FinancialNetwork, state: Option<&ClearingState>) -> String {
    let mut out = String::from("digraph network {\n  rankdir=LR;\n");
    for v in net.banks() {
        let mut label = format!("{}\nx={}", net.name(v), net.external_assets(v));
        if let Some(st) = state {
            let _ = write!(label, " a={}", st.asset(v));
        }
        let _ = writeln!(out, "  {} [label={}];", quote(net.name(v)), quote(&label));
    }
    for e in net.edges() {
        let label = match state {
            Some(st) => format!("{}/{}", st.payment(e.id), e.liability),
            None => e.liability.to_string(),
        };
        let _ = writeln!(
            out,
            "  {} -> {} [label={}];",
            quote(net.name(e.debtor)),
            quote(net.name(e.creditor)),
            quote(&label)
        );
    }
    out.push_str("}\n");
    out
}

/// Reads weighted CNF in DIMACS style. `p wcnf` lines put the clause weight
/// first; `p cnf` clauses get weight 1.
pub fn parse_dimacs(text: &str) -> Result<Formula, IoError> {
    let mut header: Option<(bool, usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut pending: Vec<i64> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        let ctx = |m: &str| IoError::Parse(format!("line {}: {m}", ln + 1));
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() < 4 || !matches!(parts[1], "cnf" | "wcnf") {
                return Err(ctx("malformed header"));
            }
            let nv = parts[2].parse().map_err(|_| ctx("bad variable count"))?;
            let nc = parts[3].parse().map_err(|_| ctx("bad clause count"))?;
            header = Some((parts[1] == "wcnf", nv, nc));
            continue;
        }
        let (weighted, nv, _) = header.ok_or_else(|| ctx("clause before header"))?;
        for tok in line.split_whitespace() {
            let x: i64 = tok.parse().map_err(|_| ctx(&format!("bad token '{tok}'")))?;
            if x != 0 {
                pending.push(x);
                continue;
            }
            let (weight, lits) = if weighted {
                match pending.split_first() {
                    Some((&w, rest)) if w > 0 => (w as u64, rest.to_vec()),
                    _ => return Err(ctx("missing positive clause weight")),
                }
            } else {
                (1, pending.clone())
            };
            let mut literals = Vec::new();
            for l in lits {
                let lit = Literal::from_dimacs(l).unwrap();
                if lit.var > nv {
                    return Err(ctx(&format!("variable {} exceeds header", lit.var)));
                }
                literals.push(lit);
            }
            if literals.is_empty() {
                return Err(ctx("empty clause"));
            }
            clauses.push(Clause { literals, weight });
            pending.clear();
        }
    }
    let (_, nv, nc) = header.ok_or_else(|| IoError::Parse("missing header".into()))?;
    if !pending.is_empty() {
        return Err(IoError::Parse("unterminated clause".into()));
    }
    if clauses.len() != nc {
        return Err(IoError::Parse(format!("header announces {nc} clauses, found {}", clauses.len())));
    }
    Ok(Formula {
        num_vars: nv,
        clauses,
    })
}

/// Set system with 1-based items; `c` is the target cover size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSystemDoc {
    pub universe: usize,
    pub sets: Vec<Vec<usize>>,
    #[serde(default)]
    pub c: Option<usize>,
}

impl SetSystemDoc {
    pub fn system(&self) -> SetSystem {
        SetSystem {
            universe: self.universe,
            sets: self.sets.iter().map(|s| s.iter().copied().collect::<BTreeSet<_>>()).collect(),
        }
    }
}

pub fn parse_set_system(text: &str) -> Result<SetSystemDoc, IoError> {
    Ok(serde_json::from_str(text)?)
}

/// Integers separated by whitespace or commas.
pub fn parse_int_list(text: &str) -> Result<Vec<u64>, IoError> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| IoError::Parse(format!("not a non-negative integer: '{t}'"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearing::clear;
    use crate::fixtures::{ex1, ex1_swapped};

    #[test]
    fn ex1_round_trip() {
        for net in [ex1(), ex1_swapped()] {
            let text = network_to_json(&net).unwrap();
            assert_eq!(network_from_json(&text).unwrap(), net);
        }
    }

    #[test]
    fn duplicate_edge_rejected() {
        let text = r#"{"version":1,"banks":[{"name":"a","externalAssets":1},{"name":"b"}],
            "edges":[{"debtor":"a","creditor":"b","liability":1},{"debtor":"a","creditor":"b","liability":2}]}"#;
        let err = network_from_json(text).unwrap_err();
        assert!(matches!(err, IoError::Validation(ref m) if m.contains("multi-edge")), "{err}");
    }

    #[test]
    fn ranking_of_non_creditor_rejected() {
        let text = r#"{"version":1,"banks":[{"name":"a"},{"name":"b"},{"name":"c"}],
            "edges":[{"debtor":"a","creditor":"b","liability":1}],
            "rules":{"a":{"type":"ranking","ranking":["c"]}}}"#;
        let err = network_from_json(text).unwrap_err();
        assert!(matches!(err, IoError::Validation(ref m) if m.contains("rules.a.ranking[0]")), "{err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"version":1,"banks":[],"edges":[],"extra":0}"#;
        assert!(matches!(network_from_json(text), Err(IoError::Parse(_))));
    }

    #[test]
    fn dot_labels() {
        let net = ex1();
        let st = clear(&net).unwrap();
        let dot = export_dot(&net, Some(&st));
        assert!(dot.contains("\"v2\" -> \"w2\" [label=\"1/1\"];"));
        assert_eq!(dot, export_dot(&net, Some(&st)));
        let bare = export_dot(&net, None);
        assert!(bare.contains("\"v2\" -> \"w2\" [label=\"1\"];"));
    }

    #[test]
    fn sequence_round_trip() {
        let g = ex1_swapped();
        let seq = crate::reach::greedy_reach(&ex1(), &g).unwrap();
        let text = sequence_to_json(&seq).unwrap();
        assert_eq!(sequence_from_json(&ex1(), &text).unwrap(), seq.swaps());
        assert!(sequence_from_json(&g, &text).is_err());
    }

    #[test]
    fn dimacs_reader() {
        let f = parse_dimacs("c demo\np wcnf 2 2\n3 1 2 0\n5 -1 2 0\n").unwrap();
        assert_eq!(f.num_vars, 2);
        assert_eq!(f.clauses[1].weight, 5);
        assert!(!f.clauses[1].literals[0].positive);
        let plain = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        assert_eq!(plain.clauses[0].weight, 1);
        assert!(parse_dimacs("p cnf 1 1\n2 0\n").is_err());
    }

    #[test]
    fn int_lists() {
        assert_eq!(parse_int_list("1, 2 3\n4").unwrap(), vec![1, 2, 3, 4]);
        assert!(parse_int_list("1 -2").is_err());
    }
}
