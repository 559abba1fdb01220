//! Financial networks: banks, external assets, debt edges and allocation rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::money::Money;

/// Dense index of a bank inside its network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BankId(pub usize);

/// Stable index of an edge record. Swaps rewrite endpoints in place, so an
/// id keeps referring to the same debtor stub for the life of a sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

impl fmt::Display for BankId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// A debt contract: `debtor` owes `creditor` the amount `liability`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub id: EdgeId,
    pub debtor: BankId,
    pub creditor: BankId,
    pub liability: Money,
}

/// How a bank splits its available assets over its outgoing edges.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AllocationRule {
    /// Pay edges fully, one after another, in the listed order.
    EdgeRanking(Vec<EdgeId>),
    /// Pay every edge in proportion to its liability.
    Proportional,
    /// `f(b) = inner(base + b) - inner(base)`, evaluated against the
    /// original liabilities. Produced only by network separation.
    Shifted {
        inner: Box<AllocationRule>,
        base: Money,
        liabilities: Vec<(EdgeId, Money)>,
    },
}

impl AllocationRule {
    pub fn is_edge_ranking(&self) -> bool {
        matches!(self, AllocationRule::EdgeRanking(_))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AllocationRule::EdgeRanking(_) => "ranking",
            AllocationRule::Proportional => "proportional",
            AllocationRule::Shifted { .. } => "shifted",
        }
    }
}

/// Rule family used when (re)building networks wholesale.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    /// Edge ranking in ascending edge-id order.
    Ranking,
    Proportional,
}

/// An invariant violation reported by [`FinancialNetwork::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    SelfLoop { edge: EdgeId },
    MultiEdge { debtor: BankId, creditor: BankId },
    NonPositiveLiability { edge: EdgeId },
    NonIntegralInput { what: String },
    UnknownBank { edge: EdgeId },
    EdgeIdMismatch { position: usize, id: EdgeId },
    IncompletePermutation { bank: BankId },
    ForeignEdgeInRanking { bank: BankId, edge: EdgeId },
    ShiftedRule { bank: BankId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop { edge } => write!(f, "self-loop on edge {edge}"),
            Violation::MultiEdge { debtor, creditor } => {
                write!(f, "multi-edge between {debtor} and {creditor}")
            }
            Violation::NonPositiveLiability { edge } => {
                write!(f, "non-positive liability on edge {edge}")
            }
            Violation::NonIntegralInput { what } => write!(f, "non-integral input: {what}"),
            Violation::UnknownBank { edge } => write!(f, "edge {edge} references an unknown bank"),
            Violation::EdgeIdMismatch { position, id } => {
                write!(f, "edge at position {position} carries id {id}")
            }
            Violation::IncompletePermutation { bank } => {
                write!(f, "incomplete permutation in ranking of {bank}")
            }
            Violation::ForeignEdgeInRanking { bank, edge } => {
                write!(f, "ranking of {bank} references foreign edge {edge}")
            }
            Violation::ShiftedRule { bank } => {
                write!(f, "shifted rule on {bank} outside a difference network")
            }
        }
    }
}

/// Direction of an edge stub as seen from one bank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    In,
    Out,
}

/// Per-bank sorted multiset of `(direction, liability)` stubs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceProfile {
    pub banks: Vec<Vec<(Direction, Money)>>,
}

/// A financial network `(G, l, a^x, f)`.
///
/// Values are immutable once built; operations that change structure
/// return a new network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinancialNetwork {
    names: Vec<String>,
    external_assets: Vec<Money>,
    edges: Vec<Edge>,
    rules: Vec<AllocationRule>,
    outgoing: Vec<Vec<EdgeId>>,
    incoming: Vec<Vec<EdgeId>>,
}

impl FinancialNetwork {
    /// Assembles a network from raw parts. No validation is performed; use
    /// [`FinancialNetwork::validate`] to check the model invariants.
    ///
    /// Panics if the per-bank vectors disagree in length or an edge points
    /// outside the bank range.
    pub fn from_parts(
        names: Vec<String>,
        external_assets: Vec<Money>,
        edges: Vec<Edge>,
        rules: Vec<AllocationRule>,
    ) -> Self {
        let n = names.len();
        assert_eq!(external_assets.len(), n, "external assets length");
        assert_eq!(rules.len(), n, "rules length");
        let mut outgoing = vec![Vec::new(); n];
        let mut incoming = vec![Vec::new(); n];
        for e in &edges {
            assert!(e.debtor.0 < n && e.creditor.0 < n, "edge {} out of range", e.id);
            outgoing[e.debtor.0].push(e.id);
            incoming[e.creditor.0].push(e.id);
        }
        FinancialNetwork {
            names,
            external_assets,
            edges,
            rules,
            outgoing,
            incoming,
        }
    }

    pub fn bank_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn banks(&self) -> impl Iterator<Item = BankId> {
        (0..self.names.len()).map(BankId)
    }

    pub fn name(&self, v: BankId) -> &str {
        &self.names[v.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn bank_by_name(&self, name: &str) -> Option<BankId> {
        self.names.iter().position(|n| n == name).map(BankId)
    }

    pub fn external_assets(&self, v: BankId) -> &Money {
        &self.external_assets[v.0]
    }

    pub fn all_external_assets(&self) -> &[Money] {
        &self.external_assets
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn rule(&self, v: BankId) -> &AllocationRule {
        &self.rules[v.0]
    }

    pub fn rules(&self) -> &[AllocationRule] {
        &self.rules
    }

    /// Outgoing edges of `v` in ascending id order.
    pub fn outgoing(&self, v: BankId) -> &[EdgeId] {
        &self.outgoing[v.0]
    }

    /// Incoming edges of `v` in ascending id order.
    pub fn incoming(&self, v: BankId) -> &[EdgeId] {
        &self.incoming[v.0]
    }

    pub fn find_edge(&self, debtor: BankId, creditor: BankId) -> Option<EdgeId> {
        self.outgoing[debtor.0]
            .iter()
            .copied()
            .find(|&e| self.edges[e.0].creditor == creditor)
    }

    pub fn is_sink(&self, v: BankId) -> bool {
        self.outgoing[v.0].is_empty()
    }

    pub fn is_source(&self, v: BankId) -> bool {
        self.incoming[v.0].is_empty()
    }

    /// `L_v`: the sum of liabilities on the outgoing edges of `v`.
    pub fn total_liabilities(&self, v: BankId) -> Money {
        self.outgoing[v.0]
            .iter()
            .map(|&e| &self.edges[e.0].liability)
            .sum()
    }

    /// True iff every bank uses an edge-ranking rule.
    pub fn is_edge_ranking(&self) -> bool {
        self.rules.iter().all(AllocationRule::is_edge_ranking)
    }

    /// Rank position of `e` within its debtor's ranking, if the debtor ranks.
    pub fn rank_position(&self, e: EdgeId) -> Option<usize> {
        match &self.rules[self.edges[e.0].debtor.0] {
            AllocationRule::EdgeRanking(r) => r.iter().position(|&x| x == e),
            _ => None,
        }
    }

    /// Collects every invariant violation; an empty list means the network
    /// is a valid input instance.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.bank_count();
        let mut out = Vec::new();
        let mut pairs = BTreeSet::new();
        for (pos, e) in self.edges.iter().enumerate() {
            if e.id.0 != pos {
                out.push(Violation::EdgeIdMismatch { position: pos, id: e.id });
            }
            if e.debtor.0 >= n || e.creditor.0 >= n {
                out.push(Violation::UnknownBank { edge: e.id });
                continue;
            }
            if e.debtor == e.creditor {
                out.push(Violation::SelfLoop { edge: e.id });
            }
            if !pairs.insert((e.debtor, e.creditor)) {
                out.push(Violation::MultiEdge {
                    debtor: e.debtor,
                    creditor: e.creditor,
                });
            }
            if e.liability.is_zero() {
                out.push(Violation::NonPositiveLiability { edge: e.id });
            } else if !e.liability.is_integer() {
                out.push(Violation::NonIntegralInput {
                    what: format!("liability of {}", e.id),
                });
            }
        }
        for v in self.banks() {
            if !self.external_assets[v.0].is_integer() {
                out.push(Violation::NonIntegralInput {
                    what: format!("external assets of {v}"),
                });
            }
            match &self.rules[v.0] {
                AllocationRule::EdgeRanking(ranking) => {
                    let own: BTreeSet<EdgeId> = self.outgoing[v.0].iter().copied().collect();
                    let mut seen = BTreeSet::new();
                    for &e in ranking {
                        if !own.contains(&e) {
                            out.push(Violation::ForeignEdgeInRanking { bank: v, edge: e });
                        }
                        seen.insert(e);
                    }
                    if seen.len() != ranking.len() || !own.is_subset(&seen) {
                        out.push(Violation::IncompletePermutation { bank: v });
                    }
                }
                AllocationRule::Proportional => {}
                AllocationRule::Shifted { .. } => out.push(Violation::ShiftedRule { bank: v }),
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Per-bank multiset of stub directions and weights.
    pub fn incidence_profile(&self) -> IncidenceProfile {
        let mut banks = vec![Vec::new(); self.bank_count()];
        for e in &self.edges {
            banks[e.debtor.0].push((Direction::Out, e.liability.clone()));
            banks[e.creditor.0].push((Direction::In, e.liability.clone()));
        }
        for b in &mut banks {
            b.sort();
        }
        IncidenceProfile { banks }
    }

    /// Rule structure of `v` with edges replaced by their liabilities:
    /// the ranked weight sequence for edge ranking, sorted weights otherwise.
    pub fn rule_signature(&self, v: BankId) -> (String, Vec<Money>) {
        match &self.rules[v.0] {
            AllocationRule::EdgeRanking(r) => (
                "ranking".into(),
                r.iter().map(|&e| self.edges[e.0].liability.clone()).collect(),
            ),
            other => {
                let mut w: Vec<Money> = self.outgoing[v.0]
                    .iter()
                    .map(|&e| self.edges[e.0].liability.clone())
                    .collect();
                w.sort();
                (other.kind_name().into(), w)
            }
        }
    }

    /// Edge set keyed by debtor stub: `(debtor, rank position, creditor,
    /// liability)`. Rank position is `None` for non-ranking debtors, whose
    /// equal-weight stubs are interchangeable. Two networks with the same
    /// banks, assets and key set are structurally identical.
    pub fn stub_edges(&self) -> BTreeMap<(BankId, Option<usize>, BankId), Money> {
        self.edges
            .iter()
            .map(|e| {
                (
                    (e.debtor, self.rank_position(e.id), e.creditor),
                    e.liability.clone(),
                )
            })
            .collect()
    }

    /// Structural equality ignoring edge ids and bank names.
    pub fn same_structure(&self, other: &FinancialNetwork) -> bool {
        self.bank_count() == other.bank_count()
            && self.external_assets == other.external_assets
            && self.banks().all(|v| self.rule_signature(v) == other.rule_signature(v))
            && self.stub_edges() == other.stub_edges()
    }

    /// Copy with different external assets.
    pub fn with_external_assets(&self, assets: Vec<Money>) -> FinancialNetwork {
        assert_eq!(assets.len(), self.bank_count());
        FinancialNetwork {
            external_assets: assets,
            ..self.clone()
        }
    }

    /// Copy with external assets of `v` replaced.
    pub fn with_bank_assets(&self, v: BankId, amount: Money) -> FinancialNetwork {
        let mut assets = self.external_assets.clone();
        assets[v.0] = amount;
        self.with_external_assets(assets)
    }

    /// Copy with every bank switched to the given rule family.
    pub fn with_rule_kind(&self, kind: RuleKind) -> FinancialNetwork {
        let rules = self
            .banks()
            .map(|v| match kind {
                RuleKind::Ranking => AllocationRule::EdgeRanking(self.outgoing[v.0].clone()),
                RuleKind::Proportional => AllocationRule::Proportional,
            })
            .collect();
        FinancialNetwork::from_parts(
            self.names.clone(),
            self.external_assets.clone(),
            self.edges.clone(),
            rules,
        )
    }

    /// Decomposes into raw parts, the inverse of [`FinancialNetwork::from_parts`].
    pub fn into_parts(self) -> (Vec<String>, Vec<Money>, Vec<Edge>, Vec<AllocationRule>) {
        (self.names, self.external_assets, self.edges, self.rules)
    }
}

/// Incremental construction of networks, mostly for fixtures and gadgets.
///
/// Banks without an explicit rule rank their outgoing edges in insertion
/// order.
#[derive(Clone, Debug, Default)]
pub struct NetworkBuilder {
    names: Vec<String>,
    assets: Vec<Money>,
    edges: Vec<Edge>,
    rules: Vec<Option<AllocationRule>>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bank(&mut self, name: impl Into<String>, external_assets: impl Into<Money>) -> BankId {
        self.names.push(name.into());
        self.assets.push(external_assets.into());
        self.rules.push(None);
        BankId(self.names.len() - 1)
    }

    pub fn edge(&mut self, debtor: BankId, creditor: BankId, liability: impl Into<Money>) -> EdgeId {
        let id = EdgeId(self.edges.len());
        self.edges.push(Edge {
            id,
            debtor,
            creditor,
            liability: liability.into(),
        });
        id
    }

    pub fn ranking(&mut self, bank: BankId, order: Vec<EdgeId>) -> &mut Self {
        self.rules[bank.0] = Some(AllocationRule::EdgeRanking(order));
        self
    }

    pub fn proportional(&mut self, bank: BankId) -> &mut Self {
        self.rules[bank.0] = Some(AllocationRule::Proportional);
        self
    }

    pub fn all_proportional(&mut self) -> &mut Self {
        for r in &mut self.rules {
            *r = Some(AllocationRule::Proportional);
        }
        self
    }

    pub fn set_assets(&mut self, bank: BankId, amount: impl Into<Money>) -> &mut Self {
        self.assets[bank.0] = amount.into();
        self
    }

    pub fn build(&self) -> FinancialNetwork {
        let rules = self
            .rules
            .iter()
            .enumerate()
            .map(|(v, r)| {
                r.clone().unwrap_or_else(|| {
                    AllocationRule::EdgeRanking(
                        self.edges
                            .iter()
                            .filter(|e| e.debtor.0 == v)
                            .map(|e| e.id)
                            .collect(),
                    )
                })
            })
            .collect();
        FinancialNetwork::from_parts(
            self.names.clone(),
            self.assets.clone(),
            self.edges.clone(),
            rules,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn ex1_is_valid() {
        assert!(fixtures::ex1().validate().is_empty());
    }

    #[test]
    fn self_loop_reported() {
        let mut b = NetworkBuilder::new();
        let v = b.bank("v", 0);
        b.edge(v, v, 1);
        let violations = b.build().validate();
        assert!(violations.iter().any(|x| matches!(x, Violation::SelfLoop { .. })));
        assert!(violations.iter().any(|x| x.to_string().contains("self-loop")));
    }

    #[test]
    fn incomplete_ranking_reported() {
        let net = fixtures::ex1();
        let v1 = net.bank_by_name("v1").unwrap();
        let mut b = NetworkBuilder::new();
        let ids: Vec<BankId> = net.banks().map(|v| b.bank(net.name(v), 0)).collect();
        for e in net.edges() {
            b.edge(ids[e.debtor.0], ids[e.creditor.0], e.liability.clone());
        }
        let first = net.outgoing(v1)[0];
        b.ranking(v1, vec![first]);
        let violations = b.build().validate();
        assert_eq!(violations, vec![Violation::IncompletePermutation { bank: v1 }]);
        assert!(violations[0].to_string().contains("incomplete permutation"));
    }

    #[test]
    fn multi_edge_and_zero_liability_reported() {
        let mut b = NetworkBuilder::new();
        let u = b.bank("u", 0);
        let v = b.bank("v", 0);
        b.edge(u, v, 1);
        b.edge(u, v, 0);
        let violations = b.build().validate();
        assert!(violations.contains(&Violation::MultiEdge { debtor: u, creditor: v }));
        assert!(violations.contains(&Violation::NonPositiveLiability { edge: EdgeId(1) }));
    }

    #[test]
    fn total_liabilities_examples() {
        let net = fixtures::ex1();
        let v1 = net.bank_by_name("v1").unwrap();
        assert_eq!(net.total_liabilities(v1), Money::from_int(2));
        let w2 = net.bank_by_name("w2").unwrap();
        assert_eq!(net.total_liabilities(w2), Money::zero());

        let mut b = NetworkBuilder::new();
        let s = b.bank("s", 0);
        for (i, l) in [2u64, 3, 5].into_iter().enumerate() {
            let t = b.bank(format!("t{i}"), 0);
            b.edge(s, t, l);
        }
        assert_eq!(b.build().total_liabilities(s), Money::from_int(10));
    }

    #[test]
    fn ex1_profile_of_v1() {
        let net = fixtures::ex1();
        let v1 = net.bank_by_name("v1").unwrap();
        let one = Money::one();
        assert_eq!(
            net.incidence_profile().banks[v1.0],
            vec![
                (Direction::In, one.clone()),
                (Direction::In, one.clone()),
                (Direction::Out, one.clone()),
                (Direction::Out, one)
            ]
        );
    }

    #[test]
    fn isolated_bank_has_empty_profile() {
        let mut b = NetworkBuilder::new();
        b.bank("lonely", 4);
        assert!(b.build().incidence_profile().banks[0].is_empty());
    }
}
