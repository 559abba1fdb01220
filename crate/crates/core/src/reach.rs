//! Consistency of network pairs and reaching sequences of debt swaps.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clearing::{clear, ClearingError};
use crate::dynamics::{SwapSequence, SwapStep};
use crate::money::Money;
use crate::network::{AllocationRule, BankId, EdgeId, FinancialNetwork};
use crate::transforms::{apply_swap, check_swap, DebtSwap};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReachError {
    #[error("inconsistent networks")]
    Inconsistent,
    #[error("identical networks")]
    IdenticalNetworks,
    #[error("no admissible swap fixes any remaining edge")]
    Stuck,
}

/// Side condition on every network along a reaching sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReachConstraint {
    None,
    /// Assets of the bank increase strictly with every step.
    VImproving(BankId),
    /// Assets of the bank never drop below the floor.
    MinAssets(BankId, Money),
}

/// True when both networks share bank count, external assets, per-bank
/// stub multisets and rules (ranking rules compared by the liabilities in
/// rank order).
pub fn consistent(f: &FinancialNetwork, g: &FinancialNetwork) -> bool {
    f.bank_count() == g.bank_count()
        && f.all_external_assets() == g.all_external_assets()
        && f.incidence_profile() == g.incidence_profile()
        && f.banks().all(|v| f.rule_signature(v) == g.rule_signature(v))
}

/// Pairs every edge of `f` with an edge of `g` sharing debtor, liability
/// and, for ranking debtors, rank position. Elsewhere edges already at
/// their creditor are matched first.
fn stub_matching(f: &FinancialNetwork, g: &FinancialNetwork) -> Vec<EdgeId> {
    let mut target = vec![EdgeId(usize::MAX); f.edge_count()];
    for v in f.banks() {
        match (f.rule(v), g.rule(v)) {
            (AllocationRule::EdgeRanking(a), AllocationRule::EdgeRanking(b)) => {
                for (&x, &y) in a.iter().zip(b) {
                    target[x.0] = y;
                }
            }
            _ => {
                let mut pool: BTreeMap<Money, Vec<EdgeId>> = BTreeMap::new();
                for &e in g.outgoing(v) {
                    pool.entry(g.edge(e).liability.clone()).or_default().push(e);
                }
                let mut rest = Vec::new();
                for &e in f.outgoing(v) {
                    let bucket = pool.get_mut(&f.edge(e).liability).unwrap();
                    if let Some(i) = bucket.iter().position(|&y| g.edge(y).creditor == f.edge(e).creditor) {
                        target[e.0] = bucket.remove(i);
                    } else {
                        rest.push(e);
                    }
                }
                for e in rest {
                    target[e.0] = pool.get_mut(&f.edge(e).liability).unwrap().remove(0);
                }
            }
        }
    }
    target
}

/// Upper bound on search nodes explored by [`greedy_reach`] before it gives up.
pub const REACH_NODE_LIMIT: usize = 200_000;

/// Transforms `f` into `g`. First tries swaps that each move at least one
/// misplaced edge to its target creditor, never touching a placed edge, so
/// the result has at most as many steps as `f` has misplaced edges; swaps
/// fixing two edges are tried first and dead ends are backtracked.
///
/// Two misplaced edges of one ranking debtor cannot trade creditors by a
/// swap, and the multi-edge ban can block the remaining candidates. When no
/// fixing sequence exists, a shortest sequence of arbitrary swaps is
/// searched instead (bounded by [`REACH_NODE_LIMIT`]).
pub fn greedy_reach(f: &FinancialNetwork, g: &FinancialNetwork) -> Result<SwapSequence, ReachError> {
    if !consistent(f, g) {
        return Err(ReachError::Inconsistent);
    }
    if f.same_structure(g) {
        return Err(ReachError::IdenticalNetworks);
    }
    let pi = stub_matching(f, g);
    let want: Vec<BankId> = pi.iter().map(|&y| g.edge(y).creditor).collect();
    let mut search = Search {
        want,
        dead: BTreeSet::new(),
        budget: REACH_NODE_LIMIT,
        path: Vec::new(),
    };
    let path = if search.run(f) {
        search.path
    } else {
        shortest_reach(f, g).ok_or(ReachError::Stuck)?
    };
    let mut seq = SwapSequence::new(f.clone());
    seq.steps = path.into_iter().map(SwapStep::plain).collect();
    Ok(seq)
}

/// A* over arbitrary swaps on stub structure, so equal-weight edges of
/// non-ranking debtors are interchangeable. A swap changes two stubs, so
/// half the number of stubs missing from `g` is an admissible estimate.
fn shortest_reach(f: &FinancialNetwork, g: &FinancialNetwork) -> Option<Vec<DebtSwap>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let goal = g.stub_edges();
    let missing = |net: &FinancialNetwork| {
        net.stub_edges()
            .iter()
            .filter(|(k, w)| goal.get(k) != Some(w))
            .count()
            .div_ceil(2)
    };
    let mut nets = vec![f.clone()];
    let mut parent: Vec<Option<(usize, DebtSwap)>> = vec![None];
    let mut best = BTreeMap::from([(f.stub_edges(), 0usize)]);
    let mut heap = BinaryHeap::from([(Reverse((missing(f), 0usize)), 0usize)]);
    while let Some((Reverse((_, depth)), idx)) = heap.pop() {
        let net = nets[idx].clone();
        let k = net.stub_edges();
        if best.get(&k).is_some_and(|&d| d < depth) {
            continue;
        }
        if k == goal {
            let mut out = Vec::new();
            let mut at = idx;
            while let Some((p, s)) = parent[at] {
                out.push(s);
                at = p;
            }
            out.reverse();
            return Some(out);
        }
        if nets.len() > REACH_NODE_LIMIT {
            return None;
        }
        for s in crate::classify::enumerate_swaps(&net) {
            let next = apply_swap(&net, s).expect("enumerated swap");
            let nk = next.stub_edges();
            if best.get(&nk).is_some_and(|&d| d <= depth + 1) {
                continue;
            }
            let h = missing(&next);
            best.insert(nk, depth + 1);
            nets.push(next);
            parent.push(Some((idx, s)));
            heap.push((Reverse((depth + 1 + h, depth + 1)), nets.len() - 1));
        }
    }
    None
}

struct Search {
    want: Vec<BankId>,
    dead: BTreeSet<Vec<BankId>>,
    budget: usize,
    path: Vec<DebtSwap>,
}

impl Search {
    fn candidates(&self, net: &FinancialNetwork) -> Vec<DebtSwap> {
        let bad: Vec<EdgeId> = net
            .edges()
            .iter()
            .filter(|e| e.creditor != self.want[e.id.0])
            .map(|e| e.id)
            .collect();
        let mut double = Vec::new();
        let mut single = Vec::new();
        for &a in &bad {
            let ea = net.edge(a);
            for &b in &bad {
                let eb = net.edge(b);
                if eb.creditor != self.want[a.0] || eb.liability != ea.liability {
                    continue;
                }
                let s = DebtSwap::new(a, b);
                if check_swap(net, s).is_err() {
                    continue;
                }
                if ea.creditor == self.want[b.0] {
                    if a < b {
                        double.push(s);
                    }
                } else {
                    single.push(s);
                }
            }
        }
        double.extend(single);
        double
    }

    fn run(&mut self, net: &FinancialNetwork) -> bool {
        if net.edges().iter().all(|e| e.creditor == self.want[e.id.0]) {
            return true;
        }
        let key: Vec<BankId> = net.edges().iter().map(|e| e.creditor).collect();
        if self.budget == 0 || self.dead.contains(&key) {
            return false;
        }
        self.budget -= 1;
        for s in self.candidates(net) {
            let next = apply_swap(net, s).expect("checked swap");
            self.path.push(s);
            if self.run(&next) {
                return true;
            }
            self.path.pop();
            if self.budget == 0 {
                return false;
            }
        }
        self.dead.insert(key);
        false
    }
}

/// Outcome of [`verify_sequence`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub ok: bool,
    pub reason: String,
}

impl Verdict {
    fn fail(reason: impl Into<String>) -> Self {
        Verdict {
            ok: false,
            reason: reason.into(),
        }
    }
}

/// Replays `swaps` from `f` and checks that the result is `g` and that the
/// constraint holds on every network visited.
pub fn verify_sequence(
    f: &FinancialNetwork,
    g: &FinancialNetwork,
    swaps: &[DebtSwap],
    constraint: &ReachConstraint,
) -> Verdict {
    match verify_inner(f, g, swaps, constraint) {
        Ok(v) => v,
        Err(e) => Verdict::fail(format!("clearing failed: {e}")),
    }
}

fn verify_inner(
    f: &FinancialNetwork,
    g: &FinancialNetwork,
    swaps: &[DebtSwap],
    constraint: &ReachConstraint,
) -> Result<Verdict, ClearingError> {
    let assets_of = |net: &FinancialNetwork, v: BankId| -> Result<Money, ClearingError> {
        Ok(clear(net)?.asset(v).clone())
    };
    let mut nets = vec![f.clone()];
    for (i, &s) in swaps.iter().enumerate() {
        match apply_swap(nets.last().unwrap(), s) {
            Ok(n) => nets.push(n),
            Err(e) => return Ok(Verdict::fail(format!("step {}: {e}", i + 1))),
        }
    }
    if !nets.last().unwrap().same_structure(g) {
        return Ok(Verdict::fail("final network differs from target"));
    }
    match constraint {
        ReachConstraint::None => {}
        ReachConstraint::VImproving(v) => {
            let mut prev = assets_of(f, *v)?;
            for (i, n) in nets.iter().enumerate().skip(1) {
                let a = assets_of(n, *v)?;
                if a <= prev {
                    return Ok(Verdict::fail(format!(
                        "step {i}: assets of {} go from {prev} to {a}",
                        f.name(*v)
                    )));
                }
                prev = a;
            }
        }
        ReachConstraint::MinAssets(v, floor) => {
            for (i, n) in nets.iter().enumerate() {
                let a = assets_of(n, *v)?;
                if &a < floor {
                    return Ok(Verdict::fail(format!(
                        "network {i}: assets of {} are {a} < {floor}",
                        f.name(*v)
                    )));
                }
            }
        }
    }
    Ok(Verdict {
        ok: true,
        reason: format!("reached target in {} steps", swaps.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ex1, ex1_swapped};

    #[test]
    fn consistency_examples() {
        let f = ex1();
        assert!(consistent(&f, &f));
        assert!(consistent(&f, &ex1_swapped()));
        let (n, a, mut e, r) = f.clone().into_parts();
        e[0].liability = Money::from_int(2);
        assert!(!consistent(&f, &FinancialNetwork::from_parts(n, a, e, r)));
    }

    #[test]
    fn ex1_reach_is_one_swap() {
        let seq = greedy_reach(&ex1(), &ex1_swapped()).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.final_network().unwrap(), ex1_swapped());
        assert!(verify_sequence(&ex1(), &ex1_swapped(), &seq.swaps(), &ReachConstraint::None).ok);
        assert_eq!(greedy_reach(&ex1(), &ex1()).unwrap_err(), ReachError::IdenticalNetworks);
    }

    /// One ranking debtor must trade the creditors of its two unit edges:
    /// no swap fixes either edge, but a third unit edge allows a detour.
    fn same_debtor_pair(with_third: bool) -> (FinancialNetwork, FinancialNetwork) {
        let build = |flip: bool| {
            let mut b = crate::network::NetworkBuilder::new();
            let d = b.bank("d", 1);
            let x = b.bank("x", 0);
            let y = b.bank("y", 0);
            let (c0, c1) = if flip { (y, x) } else { (x, y) };
            let e0 = b.edge(d, c0, 1);
            let e1 = b.edge(d, c1, 1);
            b.ranking(d, vec![e0, e1]);
            if with_third {
                let w = b.bank("w", 0);
                let z = b.bank("z", 0);
                b.edge(w, z, 1);
            }
            b.build()
        };
        (build(false), build(true))
    }

    #[test]
    fn same_debtor_exchange_needs_a_detour() {
        let (f, g) = same_debtor_pair(true);
        assert!(consistent(&f, &g));
        let seq = greedy_reach(&f, &g).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.final_network().unwrap(), g);

        let (f, g) = same_debtor_pair(false);
        assert!(consistent(&f, &g));
        assert_eq!(greedy_reach(&f, &g).unwrap_err(), ReachError::Stuck);
    }

    #[test]
    fn verify_examples() {
        let f = ex1();
        let g = ex1_swapped();
        let v2 = f.bank_by_name("v2").unwrap();
        let v1 = f.bank_by_name("v1").unwrap();
        let swaps = greedy_reach(&f, &g).unwrap().swaps();
        let floor = ReachConstraint::MinAssets(v2, Money::one());
        assert!(verify_sequence(&f, &g, &swaps, &floor).ok);
        let back: Vec<DebtSwap> = greedy_reach(&g, &f).unwrap().swaps();
        let verdict = verify_sequence(&g, &f, &back, &ReachConstraint::VImproving(v1));
        assert!(!verdict.ok);
        assert!(verdict.reason.contains("step 1"));
        assert!(!verify_sequence(&f, &f, &swaps, &ReachConstraint::None).ok);
    }
}
