//! Structural surgery on networks: debt swaps, source/sink splitting and
//! pre/difference separation, plus executable checks of the identities that
//! relate them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::clearing::{clear, ClearingError};
use crate::money::Money;
use crate::network::{AllocationRule, BankId, Edge, EdgeId, FinancialNetwork};

/// Exchange of the creditors of two equal-liability edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DebtSwap {
    pub e1: EdgeId,
    pub e2: EdgeId,
}

impl DebtSwap {
    pub fn new(e1: EdgeId, e2: EdgeId) -> Self {
        DebtSwap { e1, e2 }
    }

    pub fn reversed(self) -> Self {
        DebtSwap {
            e1: self.e2,
            e2: self.e1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error("invalid swap: {0}")]
    InvalidSwap(String),
    #[error("swap would create a multi-edge from {debtor} to {creditor}")]
    MultiEdge { debtor: BankId, creditor: BankId },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
}

/// Checks the swap invariants without applying it.
pub fn check_swap(net: &FinancialNetwork, swap: DebtSwap) -> Result<(), TransformError> {
    let m = net.edge_count();
    if swap.e1.0 >= m || swap.e2.0 >= m {
        return Err(TransformError::InvalidSwap("unknown edge".into()));
    }
    let a = net.edge(swap.e1);
    let b = net.edge(swap.e2);
    if a.liability != b.liability {
        return Err(TransformError::InvalidSwap(format!(
            "liabilities differ ({} vs {})",
            a.liability, b.liability
        )));
    }
    let ends: BTreeSet<BankId> = [a.debtor, a.creditor, b.debtor, b.creditor].into();
    if ends.len() != 4 {
        return Err(TransformError::InvalidSwap("endpoints are not pairwise distinct".into()));
    }
    for (debtor, creditor) in [(a.debtor, b.creditor), (b.debtor, a.creditor)] {
        if net.find_edge(debtor, creditor).is_some() {
            return Err(TransformError::MultiEdge { debtor, creditor });
        }
    }
    Ok(())
}

/// Applies a debt swap. Edge `e1 = (u1,v1)` becomes `(u1,v2)` and
/// `e2 = (u2,v2)` becomes `(u2,v1)`: each record keeps its id, debtor and
/// rank position, only the creditor changes.
pub fn apply_swap(net: &FinancialNetwork, swap: DebtSwap) -> Result<FinancialNetwork, TransformError> {
    check_swap(net, swap)?;
    let v1 = net.edge(swap.e1).creditor;
    let v2 = net.edge(swap.e2).creditor;
    let (names, assets, mut edges, rules) = net.clone().into_parts();
    edges[swap.e1.0].creditor = v2;
    edges[swap.e2.0].creditor = v1;
    Ok(FinancialNetwork::from_parts(names, assets, edges, rules))
}

fn fresh_name(net: &FinancialNetwork, base: String) -> String {
    if net.bank_by_name(&base).is_none() {
        return base;
    }
    (1..)
        .map(|i| format!("{base}_{i}"))
        .find(|n| net.bank_by_name(n).is_none())
        .unwrap()
}

fn sink_rule(like: &AllocationRule) -> AllocationRule {
    match like {
        AllocationRule::Proportional => AllocationRule::Proportional,
        _ => AllocationRule::EdgeRanking(Vec::new()),
    }
}

/// Replaces `v` by a source and a sink. The source keeps the id, name,
/// outgoing edges and rule of `v` and gets `source_assets`; the sink is
/// appended as a new bank and receives all incoming edges of `v`.
pub fn split_bank(net: &FinancialNetwork, v: BankId, source_assets: Money) -> FinancialNetwork {
    let sink_name = fresh_name(net, format!("t_{}", net.name(v)));
    let sink_rule = sink_rule(net.rule(v));
    let (mut names, mut assets, mut edges, mut rules) = net.clone().into_parts();
    let t = BankId(names.len());
    names.push(sink_name);
    assets.push(Money::zero());
    rules.push(sink_rule);
    assets[v.0] = source_assets;
    for e in &mut edges {
        if e.creditor == v {
            e.creditor = t;
        }
    }
    FinancialNetwork::from_parts(names, assets, edges, rules)
}

/// Redirects `e = (u,v)` to a new sink and credits `v` with the clearing
/// payment of `e` as external assets.
pub fn split_edge(net: &FinancialNetwork, e: EdgeId) -> Result<FinancialNetwork, TransformError> {
    let st = clear(net)?;
    let edge = net.edge(e).clone();
    let sink_name = fresh_name(
        net,
        format!("t_{}_{}", net.name(edge.debtor), net.name(edge.creditor)),
    );
    let sink_rule = sink_rule(net.rule(edge.creditor));
    let (mut names, mut assets, mut edges, mut rules) = net.clone().into_parts();
    let t = BankId(names.len());
    names.push(sink_name);
    assets.push(Money::zero());
    rules.push(sink_rule);
    assets[edge.creditor.0] += st.payment(e);
    edges[e.0].creditor = t;
    Ok(FinancialNetwork::from_parts(names, assets, edges, rules))
}

/// A pre-network with reduced external assets and the difference network
/// carrying what is left.
#[derive(Clone, Debug)]
pub struct SeparationResult {
    pub pre: FinancialNetwork,
    pub difference: FinancialNetwork,
}

/// Splits `net` at external assets `reduced`. The difference network has
/// residual liabilities `l_e - p̂_e`, external assets `a^x - â^x` and
/// shifted rules anchored at the pre-network's total assets.
pub fn separate(net: &FinancialNetwork, reduced: &[Money]) -> Result<SeparationResult, TransformError> {
    if reduced.len() != net.bank_count() {
        return Err(TransformError::Precondition("reduced assets length".into()));
    }
    if reduced
        .iter()
        .zip(net.all_external_assets())
        .any(|(r, a)| r > a)
    {
        return Err(TransformError::Precondition(
            "reduced assets exceed external assets".into(),
        ));
    }
    let pre = net.with_external_assets(reduced.to_vec());
    let pst = clear(&pre)?;
    let edges: Vec<Edge> = net
        .edges()
        .iter()
        .map(|e| Edge {
            liability: e.liability.saturating_sub(pst.payment(e.id)),
            ..e.clone()
        })
        .collect();
    let rules = net
        .banks()
        .map(|v| AllocationRule::Shifted {
            inner: Box::new(net.rule(v).clone()),
            base: pst.asset(v).clone(),
            liabilities: net
                .outgoing(v)
                .iter()
                .map(|&e| (e, net.edge(e).liability.clone()))
                .collect(),
        })
        .collect();
    let assets = net
        .all_external_assets()
        .iter()
        .zip(reduced)
        .map(|(a, r)| a.saturating_sub(r))
        .collect();
    let difference = FinancialNetwork::from_parts(net.names().to_vec(), assets, edges, rules);
    Ok(SeparationResult { pre, difference })
}

fn sink_total(assets: &[Money], sinks: &[BankId]) -> Money {
    sinks.iter().map(|t| &assets[t.0]).sum()
}

/// Raises the external assets of `source` by `delta` and checks that the
/// sinks gain at most `delta` in total.
pub fn check_non_expansivity(
    net: &FinancialNetwork,
    source: BankId,
    delta: &Money,
) -> Result<bool, TransformError> {
    if !net.is_source(source) {
        return Err(TransformError::Precondition(format!(
            "{} has incoming edges",
            net.name(source)
        )));
    }
    if delta.is_zero() {
        return Err(TransformError::Precondition("delta must be positive".into()));
    }
    let sinks: Vec<BankId> = net.banks().filter(|&t| net.is_sink(t)).collect();
    let before = clear(net)?;
    let raised = net.with_bank_assets(source, net.external_assets(source) + delta);
    let after = clear(&raised)?;
    let lhs = sink_total(&after.assets, &sinks);
    let rhs = delta + &sink_total(&before.assets, &sinks);
    Ok(lhs <= rhs)
}

/// Raises the external assets of `v` by `delta` and checks that `sinks`
/// gain exactly `delta` in total.
pub fn check_linearity(
    net: &FinancialNetwork,
    v: BankId,
    sinks: &[BankId],
    delta: &Money,
) -> Result<bool, TransformError> {
    if let Some(t) = sinks.iter().find(|&&t| !net.is_sink(t)) {
        return Err(TransformError::Precondition(format!(
            "{} has outgoing edges",
            net.name(*t)
        )));
    }
    if delta.is_zero() {
        return Err(TransformError::Precondition("delta must be positive".into()));
    }
    let before = clear(net)?;
    let raised = net.with_bank_assets(v, net.external_assets(v) + delta);
    let after = clear(&raised)?;
    let gain = sink_total(&after.assets, sinks).delta(&sink_total(&before.assets, sinks));
    Ok(&gain == delta.as_rational())
}
