//! Swap enumeration, the swap taxonomy and the forest of active edges.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{Signed, Zero};

use crate::clearing::{clear, ClearingError, ClearingState};
use crate::money::{Delta, Money};
use crate::network::{AllocationRule, BankId, EdgeId, FinancialNetwork};
use crate::transforms::{apply_swap, check_swap, DebtSwap, TransformError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("active edges form a cycle through {0:?}")]
    CyclicActiveEdges(Vec<BankId>),
    #[error("operation requires edge-ranking rules")]
    NotEdgeRanking,
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
}

/// Active edges and the in-trees they form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveForest {
    /// Highest-ranked outgoing edge that is not fully paid, per bank.
    pub active: Vec<Option<EdgeId>>,
    /// Creditor of the active edge.
    pub parent: Vec<Option<BankId>>,
    /// Distance to the root of the bank's in-tree.
    pub depth: Vec<usize>,
    /// Root of the bank's in-tree.
    pub root: Vec<BankId>,
    pub roots: BTreeSet<BankId>,
}

impl ActiveForest {
    pub fn is_active(&self, net: &FinancialNetwork, e: EdgeId) -> bool {
        self.active[net.edge(e).debtor.0] == Some(e)
    }

    pub fn active_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.active.iter().flatten().copied()
    }

    /// True if `a` lies on the path from `b` to its root (including `b`).
    pub fn is_ancestor(&self, a: BankId, b: BankId) -> bool {
        let mut cur = Some(b);
        while let Some(x) = cur {
            if x == a {
                return true;
            }
            cur = self.parent[x.0];
        }
        false
    }

    /// Active edges from `from` up to `to`, if `to` is an ancestor.
    pub fn path(&self, from: BankId, to: BankId) -> Option<Vec<EdgeId>> {
        let mut edges = Vec::new();
        let mut cur = from;
        while cur != to {
            edges.push(self.active[cur.0]?);
            cur = self.parent[cur.0]?;
        }
        Some(edges)
    }
}

fn ranking(net: &FinancialNetwork, v: BankId) -> Result<&[EdgeId], ClassifyError> {
    match net.rule(v) {
        AllocationRule::EdgeRanking(r) => Ok(r),
        _ => Err(ClassifyError::NotEdgeRanking),
    }
}

/// Builds the active forest of an edge-ranking network from its clearing
/// state.
pub fn active_forest(net: &FinancialNetwork, state: &ClearingState) -> Result<ActiveForest, ClassifyError> {
    let n = net.bank_count();
    let mut active = vec![None; n];
    let mut parent = vec![None; n];
    for v in net.banks() {
        let e = ranking(net, v)?
            .iter()
            .copied()
            .find(|&e| !state.is_saturated(net, e));
        active[v.0] = e;
        parent[v.0] = e.map(|e| net.edge(e).creditor);
    }
    let mut depth = vec![usize::MAX; n];
    let mut root = vec![BankId(0); n];
    for v in net.banks() {
        let mut chain = Vec::new();
        let mut cur = v;
        let mut seen = BTreeSet::new();
        while depth[cur.0] == usize::MAX {
            if !seen.insert(cur) {
                let start = chain.iter().position(|&x| x == cur).unwrap();
                return Err(ClassifyError::CyclicActiveEdges(chain[start..].to_vec()));
            }
            chain.push(cur);
            match parent[cur.0] {
                Some(p) => cur = p,
                None => {
                    depth[cur.0] = 0;
                    root[cur.0] = cur;
                    chain.pop();
                    break;
                }
            }
        }
        for &x in chain.iter().rev() {
            let p = parent[x.0].unwrap();
            depth[x.0] = depth[p.0] + 1;
            root[x.0] = root[p.0];
        }
    }
    let roots = net.banks().filter(|v| parent[v.0].is_none()).collect();
    Ok(ActiveForest {
        active,
        parent,
        depth,
        root,
        roots,
    })
}

/// Every admissible swap: equal liabilities, four distinct endpoints and no
/// resulting multi-edge. Pairs are listed with `e1 < e2`.
pub fn enumerate_swaps(net: &FinancialNetwork) -> Vec<DebtSwap> {
    let m = net.edge_count();
    let mut out = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let s = DebtSwap::new(EdgeId(i), EdgeId(j));
            if check_swap(net, s).is_ok() {
                out.push(s);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtensionType {
    NonActive,
    SemiActive,
    FullyActive,
    /// Activity is undefined outside edge ranking.
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapKind {
    Saturating,
    Extension(ExtensionType),
    NotSemiPositive,
}

impl SwapKind {
    pub fn is_active_extension(self) -> bool {
        matches!(self, SwapKind::Extension(ExtensionType::FullyActive))
    }
}

impl fmt::Display for SwapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwapKind::Saturating => write!(f, "saturating"),
            SwapKind::Extension(ExtensionType::NonActive) => write!(f, "extension/non-active"),
            SwapKind::Extension(ExtensionType::SemiActive) => write!(f, "extension/semi-active"),
            SwapKind::Extension(ExtensionType::FullyActive) => write!(f, "extension/fully-active"),
            SwapKind::Extension(ExtensionType::NotApplicable) => write!(f, "extension"),
            SwapKind::NotSemiPositive => write!(f, "not-semi-positive"),
        }
    }
}

/// The four defining conditions of an extension swap, evaluated on a swap
/// oriented so that `e1` carries the lower payment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionCheck {
    pub no_new_saturation: bool,
    pub active_path: Option<Vec<EdgeId>>,
    /// Every path edge has residual strictly above `p_e2 - p_e1`.
    pub residuals_exceed: bool,
    /// Both debtors pay what they paid before the swap.
    pub payments_kept: bool,
}

impl ExtensionCheck {
    pub fn holds(&self) -> bool {
        self.no_new_saturation && self.active_path.is_some() && self.residuals_exceed && self.payments_kept
    }
}

/// Full verdict on one swap.
#[derive(Clone, Debug)]
pub struct SwapClassification {
    /// Oriented swap: `e1` never pays more than `e2` before the swap.
    pub swap: DebtSwap,
    pub v1: BankId,
    pub v2: BankId,
    pub delta_v1: Delta,
    pub delta_v2: Delta,
    pub positive: bool,
    pub semi_positive: bool,
    pub pareto_improving: bool,
    pub improved_banks: BTreeSet<BankId>,
    pub kind: SwapKind,
    pub deltas: Vec<Delta>,
    pub newly_saturated: Vec<EdgeId>,
    pub before: ClearingState,
    pub after: ClearingState,
    pub extension: Option<ExtensionCheck>,
}

impl SwapClassification {
    pub fn delta(&self, v: BankId) -> &Delta {
        &self.deltas[v.0]
    }

    pub fn improves(&self, v: BankId) -> bool {
        self.deltas[v.0].is_positive()
    }
}

fn orient(state: &ClearingState, swap: DebtSwap) -> DebtSwap {
    if state.payment(swap.e2) < state.payment(swap.e1) {
        swap.reversed()
    } else {
        swap
    }
}

/// Clears the network before and after the swap and derives every field of
/// the taxonomy.
pub fn classify_swap(net: &FinancialNetwork, swap: DebtSwap) -> Result<SwapClassification, ClassifyError> {
    let before = clear(net)?;
    classify_with(net, &before, swap)
}

/// [`classify_swap`] reusing a known clearing state of `net`.
pub fn classify_with(
    net: &FinancialNetwork,
    before: &ClearingState,
    swap: DebtSwap,
) -> Result<SwapClassification, ClassifyError> {
    let swap = orient(before, swap);
    let swapped = apply_swap(net, swap)?;
    let after = clear(&swapped)?;
    let v1 = net.edge(swap.e1).creditor;
    let v2 = net.edge(swap.e2).creditor;
    let deltas: Vec<Delta> = net
        .banks()
        .map(|v| after.asset(v).delta(before.asset(v)))
        .collect();
    let d1 = deltas[v1.0].clone();
    let d2 = deltas[v2.0].clone();
    let positive = d1.is_positive() && d2.is_positive();
    let semi_positive = !d1.is_negative() && !d2.is_negative() && (d1.is_positive() != d2.is_positive());
    let pareto_improving =
        deltas.iter().all(|d| !d.is_negative()) && deltas.iter().any(|d| d.is_positive());
    let improved_banks = net.banks().filter(|v| deltas[v.0].is_positive()).collect();
    let newly_saturated: Vec<EdgeId> = net
        .edges()
        .iter()
        .map(|e| e.id)
        .filter(|&e| after.is_saturated(&swapped, e) && !before.is_saturated(net, e))
        .collect();

    let mut extension = None;
    let kind = if !semi_positive {
        SwapKind::NotSemiPositive
    } else if !newly_saturated.is_empty() {
        SwapKind::Saturating
    } else if !net.is_edge_ranking() {
        SwapKind::Extension(ExtensionType::NotApplicable)
    } else {
        let forest = active_forest(net, before)?;
        let a1 = forest.is_active(net, swap.e1);
        let a2 = forest.is_active(net, swap.e2);
        extension = Some(extension_check(net, before, &after, &forest, swap, newly_saturated.is_empty()));
        SwapKind::Extension(match (a1, a2) {
            (true, true) => ExtensionType::FullyActive,
            (false, false) => ExtensionType::NonActive,
            _ => ExtensionType::SemiActive,
        })
    };

    Ok(SwapClassification {
        swap,
        v1,
        v2,
        delta_v1: d1,
        delta_v2: d2,
        positive,
        semi_positive,
        pareto_improving,
        improved_banks,
        kind,
        deltas,
        newly_saturated,
        before: before.clone(),
        after,
        extension,
    })
}

fn extension_check(
    net: &FinancialNetwork,
    before: &ClearingState,
    after: &ClearingState,
    forest: &ActiveForest,
    swap: DebtSwap,
    no_new_saturation: bool,
) -> ExtensionCheck {
    let v1 = net.edge(swap.e1).creditor;
    let v2 = net.edge(swap.e2).creditor;
    let gap = before.payment(swap.e2).delta(before.payment(swap.e1));
    let active_path = forest.path(v1, v2);
    let residuals_exceed = active_path.as_ref().is_some_and(|p| {
        p.iter()
            .all(|&e| net.edge(e).liability.delta(before.payment(e)) > gap)
    });
    let payments_kept = before.payment(swap.e1) == after.payment(swap.e1)
        && before.payment(swap.e2) == after.payment(swap.e2);
    ExtensionCheck {
        no_new_saturation,
        active_path,
        residuals_exceed,
        payments_kept,
    }
}

/// Classifies every swap of [`enumerate_swaps`].
pub fn classify_all(net: &FinancialNetwork) -> Result<Vec<SwapClassification>, ClassifyError> {
    let before = clear(net)?;
    enumerate_swaps(net)
        .into_iter()
        .map(|s| classify_with(net, &before, s))
        .collect()
}

/// Pairs of active edges that could form an active extension swap: equal
/// liability, `p_e1 < p_e2`, `v2` an ancestor of `v1`, `u1`, `u2` in the
/// same in-tree and `u1` not an ancestor of `v1`.
pub fn potential_active_swaps(
    net: &FinancialNetwork,
    state: &ClearingState,
) -> Result<Vec<DebtSwap>, ClassifyError> {
    let forest = active_forest(net, state)?;
    Ok(potential_from_forest(net, state, &forest))
}

fn potential_from_forest(net: &FinancialNetwork, state: &ClearingState, forest: &ActiveForest) -> Vec<DebtSwap> {
    let active: Vec<EdgeId> = forest.active_edges().collect();
    let mut out = Vec::new();
    for &e1 in &active {
        for &e2 in &active {
            if e1 == e2 {
                continue;
            }
            let (a, b) = (net.edge(e1), net.edge(e2));
            if a.liability != b.liability || state.payment(e1) >= state.payment(e2) {
                continue;
            }
            let (u1, v1, u2, v2) = (a.debtor, a.creditor, b.debtor, b.creditor);
            if !(forest.is_ancestor(v2, v1) && forest.is_ancestor(v2, u1) && forest.is_ancestor(v2, u2)) {
                continue;
            }
            if forest.is_ancestor(u1, v1) {
                continue;
            }
            let s = DebtSwap::new(e1, e2);
            if check_swap(net, s).is_ok() {
                out.push(s);
            }
        }
    }
    out.sort();
    out
}

/// True iff every potential active swap has residual at least
/// `p_e2 - p_e1` on each edge of its active path.
pub fn has_sufficient_residuals(net: &FinancialNetwork, state: &ClearingState) -> Result<bool, ClassifyError> {
    let forest = active_forest(net, state)?;
    Ok(potential_from_forest(net, state, &forest).into_iter().all(|s| {
        let gap = state.payment(s.e2).delta(state.payment(s.e1));
        let v1 = net.edge(s.e1).creditor;
        let v2 = net.edge(s.e2).creditor;
        forest.path(v1, v2).is_some_and(|p| {
            p.iter()
                .all(|&e| net.edge(e).liability.delta(state.payment(e)) >= gap)
        })
    }))
}

/// Number of active edges entering each bank.
pub fn active_indegree(net: &FinancialNetwork, forest: &ActiveForest) -> Vec<usize> {
    let mut deg = vec![0; net.bank_count()];
    for e in forest.active_edges() {
        deg[net.edge(e).creditor.0] += 1;
    }
    deg
}

/// Saturated edges of a state, by id.
pub fn saturated_edges(net: &FinancialNetwork, state: &ClearingState) -> BTreeSet<EdgeId> {
    net.edges()
        .iter()
        .map(|e| e.id)
        .filter(|&e| state.is_saturated(net, e))
        .collect()
}

/// Sum of deltas is zero only for swaps that change nothing.
pub fn is_neutral(c: &SwapClassification) -> bool {
    c.deltas.iter().all(Zero::is_zero)
}

/// Amount by which `e` is not yet paid.
pub fn residual(net: &FinancialNetwork, state: &ClearingState, e: EdgeId) -> Money {
    net.edge(e).liability.saturating_sub(state.payment(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::network::NetworkBuilder;
    use num_rational::BigRational;

    fn edge(net: &FinancialNetwork, a: &str, b: &str) -> EdgeId {
        net.find_edge(net.bank_by_name(a).unwrap(), net.bank_by_name(b).unwrap())
            .unwrap()
    }

    fn int(x: i64) -> Delta {
        BigRational::from_integer(x.into())
    }

    #[test]
    fn ex1_forest() {
        let net = fixtures::ex1();
        let st = clear(&net).unwrap();
        let f = active_forest(&net, &st).unwrap();
        let got: BTreeSet<EdgeId> = f.active_edges().collect();
        let want: BTreeSet<EdgeId> = [("u1", "v1"), ("u2", "v2"), ("v1", "u2"), ("w1", "v1")]
            .iter()
            .map(|(a, b)| edge(&net, a, b))
            .collect();
        assert_eq!(got, want);
        assert!(!f.is_active(&net, edge(&net, "v2", "w2")));
    }

    #[test]
    fn ext_forest_and_potential_swaps() {
        let net = fixtures::ext(10, 3);
        let st = clear(&net).unwrap();
        let f = active_forest(&net, &st).unwrap();
        assert_eq!(f.active_edges().count(), 3);
        let want = DebtSwap::new(edge(&net, "u1", "v1"), edge(&net, "u2", "v2"));
        assert!(potential_active_swaps(&net, &st).unwrap().contains(&want));
        assert!(has_sufficient_residuals(&net, &st).unwrap());
    }

    #[test]
    fn tight_residuals() {
        let net = fixtures::ext(4, 3);
        let st = clear(&net).unwrap();
        assert!(has_sufficient_residuals(&net, &st).unwrap());
        let net = fixtures::ext(3, 3);
        let st = clear(&net).unwrap();
        // u2 saturates its edge, so no potential swap exists
        assert!(potential_active_swaps(&net, &st).unwrap().is_empty());
        assert!(has_sufficient_residuals(&net, &st).unwrap());
    }

    #[test]
    fn all_saturated_has_empty_forest() {
        let mut b = NetworkBuilder::new();
        let s = b.bank("s", 5);
        let t = b.bank("t", 0);
        b.edge(s, t, 2);
        let net = b.build();
        let st = clear(&net).unwrap();
        let f = active_forest(&net, &st).unwrap();
        assert_eq!(f.active_edges().count(), 0);
        assert!(has_sufficient_residuals(&net, &st).unwrap());
    }

    #[test]
    fn enumerate_ex1() {
        let net = fixtures::ex1();
        let swaps = enumerate_swaps(&net);
        let a = edge(&net, "u1", "v1");
        let b = edge(&net, "u2", "v2");
        assert!(swaps.contains(&DebtSwap::new(a, b)));
        let c = edge(&net, "w1", "v1");
        assert!(!swaps.iter().any(|s| (s.e1, s.e2) == (a.min(c), a.max(c))));
        let m = net.edge_count();
        assert!(swaps.len() <= m * (m - 1) / 2);
    }

    #[test]
    fn distinct_liabilities_no_swaps() {
        let mut b = NetworkBuilder::new();
        let x: Vec<BankId> = (0..4).map(|i| b.bank(format!("b{i}"), 0)).collect();
        b.edge(x[0], x[1], 1);
        b.edge(x[2], x[3], 2);
        assert!(enumerate_swaps(&b.build()).is_empty());
    }

    #[test]
    fn classify_ex1() {
        let net = fixtures::ex1();
        let c = classify_swap(&net, DebtSwap::new(edge(&net, "u1", "v1"), edge(&net, "u2", "v2"))).unwrap();
        assert_eq!(c.delta_v1, int(2));
        assert_eq!(c.delta_v2, int(0));
        assert!(c.semi_positive && c.pareto_improving && !c.positive);
        assert_eq!(c.kind, SwapKind::Saturating);
    }

    #[test]
    fn classify_ext() {
        let net = fixtures::ext(10, 3);
        let c = classify_swap(&net, DebtSwap::new(edge(&net, "u2", "v2"), edge(&net, "u1", "v1"))).unwrap();
        assert_eq!(c.swap.e1, edge(&net, "u1", "v1"));
        assert_eq!(c.delta_v1, int(3));
        assert_eq!(c.delta_v2, int(0));
        assert_eq!(c.kind, SwapKind::Extension(ExtensionType::FullyActive));
        assert!(c.extension.unwrap().holds());
    }

    #[test]
    fn zero_payment_swap_is_neutral() {
        let mut b = NetworkBuilder::new();
        let x: Vec<BankId> = (0..4).map(|i| b.bank(format!("b{i}"), 0)).collect();
        b.edge(x[0], x[1], 1);
        b.edge(x[2], x[3], 1);
        let net = b.build();
        let c = classify_swap(&net, DebtSwap::new(EdgeId(0), EdgeId(1))).unwrap();
        assert_eq!(c.kind, SwapKind::NotSemiPositive);
        assert!(is_neutral(&c));
    }
}
