//! Maximal clearing states.
//!
//! [`clear`] computes the greatest fixed point of the asset map
//! `b -> a^x + sum_in f_e(b_u)` by decreasing Kleene iteration from the top
//! element. Every allocation rule is piecewise linear, so at each round the
//! iteration also tries to jump straight to the fixed point of the affine
//! map given by the current pieces; a jump is taken only when it provably
//! lands on the greatest fixed point.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::money::Money;
use crate::network::{AllocationRule, BankId, Edge, EdgeId, FinancialNetwork};

/// Payments and total assets at the maximal fixed point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClearingState {
    pub payments: Vec<Money>,
    pub assets: Vec<Money>,
    pub available: Vec<Money>,
}

impl ClearingState {
    pub fn payment(&self, e: EdgeId) -> &Money {
        &self.payments[e.0]
    }

    pub fn asset(&self, v: BankId) -> &Money {
        &self.assets[v.0]
    }

    pub fn is_saturated(&self, net: &FinancialNetwork, e: EdgeId) -> bool {
        self.payments[e.0] == net.edge(e).liability
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClearingError {
    #[error("clearing did not converge within {0} rounds")]
    IterationCap(u64),
    #[error("brute force needs {0} candidate vectors, above the limit of {1}")]
    TooLarge(u128, u128),
    #[error("brute force requires an integral edge-ranking network")]
    Unsupported,
    #[error("feasible payment vectors have no coordinate-wise maximum")]
    NoMaximum,
}

/// Candidate limit for [`brute_force_clear`].
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Edges of `edges` with their liabilities replaced by the originals stored
/// in a shifted rule.
fn with_liabilities(edges: &[Edge], originals: &[(EdgeId, Money)]) -> Vec<Edge> {
    edges
        .iter()
        .map(|e| {
            let l = originals
                .iter()
                .find(|(id, _)| *id == e.id)
                .map(|(_, l)| l.clone())
                .unwrap_or_else(|| e.liability.clone());
            Edge {
                liability: l,
                ..e.clone()
            }
        })
        .collect()
}

/// `f_e(budget)` for every edge in `edges`, which must be the bank's
/// complete outgoing edge list. Output is aligned with `edges`.
pub fn pay(rule: &AllocationRule, edges: &[Edge], budget: &Money) -> Vec<Money> {
    match rule {
        AllocationRule::EdgeRanking(order) => {
            let mut out = vec![Money::zero(); edges.len()];
            let mut left = budget.clone();
            for id in order {
                if left.is_zero() {
                    break;
                }
                if let Some(i) = edges.iter().position(|e| e.id == *id) {
                    let p = left.lesser(&edges[i].liability);
                    left = left.saturating_sub(&p);
                    out[i] = p;
                }
            }
            out
        }
        AllocationRule::Proportional => {
            let total: Money = edges.iter().map(|e| &e.liability).sum();
            if budget >= &total {
                edges.iter().map(|e| e.liability.clone()).collect()
            } else {
                let share = budget / &total;
                edges.iter().map(|e| &share * &e.liability).collect()
            }
        }
        AllocationRule::Shifted {
            inner,
            base,
            liabilities,
        } => {
            let full = with_liabilities(edges, liabilities);
            let hi = pay(inner, &full, &(base + budget));
            let lo = pay(inner, &full, base);
            hi.iter()
                .zip(&lo)
                .map(|(h, l)| h.saturating_sub(l))
                .collect()
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    /// Piece containing `(x - eps, x]`.
    Left,
    /// Piece containing `[x, x + eps)`.
    Right,
}

/// Affine piece `f_e(y) = intercept_e + slope_e * y`, valid for `y` in
/// `[lower, upper]` around the query point.
struct Piece {
    intercept: Vec<BigRational>,
    slope: Vec<BigRational>,
    lower: BigRational,
}

fn piece(rule: &AllocationRule, edges: &[Edge], x: &BigRational, side: Side) -> Piece {
    let zero = BigRational::zero();
    match rule {
        AllocationRule::EdgeRanking(order) => {
            let ranked: Vec<&Edge> = order
                .iter()
                .filter_map(|id| edges.iter().find(|e| e.id == *id))
                .collect();
            let mut intercept = vec![zero.clone(); edges.len()];
            let mut slope = vec![zero.clone(); edges.len()];
            let mut before = zero.clone();
            for r in &ranked {
                let after = &before + r.liability.as_rational();
                let inside = match side {
                    Side::Left => x > &before && x <= &after,
                    Side::Right => x >= &before && x < &after,
                };
                let i = edges.iter().position(|e| e.id == r.id).unwrap();
                if inside {
                    intercept[i] = -before.clone();
                    slope[i] = BigRational::one();
                    return Piece {
                        intercept,
                        slope,
                        lower: before,
                    };
                }
                intercept[i] = r.liability.as_rational().clone();
                before = after;
            }
            Piece {
                intercept,
                slope,
                lower: before,
            }
        }
        AllocationRule::Proportional => {
            let total: BigRational = edges.iter().map(|e| e.liability.as_rational()).sum();
            let solvent = match side {
                Side::Left => x > &total,
                Side::Right => x >= &total,
            };
            if solvent || total.is_zero() {
                Piece {
                    intercept: edges.iter().map(|e| e.liability.as_rational().clone()).collect(),
                    slope: vec![zero; edges.len()],
                    lower: total,
                }
            } else {
                Piece {
                    intercept: vec![zero; edges.len()],
                    slope: edges.iter().map(|e| e.liability.as_rational() / &total).collect(),
                    lower: BigRational::zero(),
                }
            }
        }
        AllocationRule::Shifted {
            inner,
            base,
            liabilities,
        } => {
            let full = with_liabilities(edges, liabilities);
            let b = base.as_rational();
            let p = piece(inner, &full, &(b + x), side);
            let at_base = pay(inner, &full, base);
            let intercept = p
                .intercept
                .iter()
                .zip(&p.slope)
                .zip(&at_base)
                .map(|((i, s), f)| i + s * b - f.as_rational())
                .collect();
            let lower = &p.lower - b;
            Piece {
                intercept,
                slope: p.slope,
                lower: if lower < zero { zero } else { lower },
            }
        }
    }
}

/// Solves `a x = rhs` exactly; `None` if `a` is singular.
fn solve(mut a: Vec<Vec<BigRational>>, mut rhs: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        let inv = BigRational::one() / &a[col][col];
        for c in col..n {
            a[col][c] = &a[col][c] * &inv;
        }
        rhs[col] = &rhs[col] * &inv;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in col..n {
                let sub = &factor * &a[col][c];
                a[r][c] -= sub;
            }
            let sub = &factor * &rhs[col];
            rhs[r] -= sub;
        }
    }
    Some(rhs)
}

struct Evaluator<'a> {
    net: &'a FinancialNetwork,
    out_edges: Vec<Vec<Edge>>,
}

impl<'a> Evaluator<'a> {
    fn new(net: &'a FinancialNetwork) -> Self {
        let out_edges = net
            .banks()
            .map(|v| net.outgoing(v).iter().map(|&e| net.edge(e).clone()).collect())
            .collect();
        Evaluator { net, out_edges }
    }

    fn payments(&self, b: &[Money]) -> Vec<Money> {
        let mut p = vec![Money::zero(); self.net.edge_count()];
        for v in self.net.banks() {
            let out = &self.out_edges[v.0];
            for (e, x) in out.iter().zip(pay(self.net.rule(v), out, &b[v.0])) {
                p[e.id.0] = x;
            }
        }
        p
    }

    fn assets_from(&self, p: &[Money]) -> Vec<Money> {
        let mut a = self.net.all_external_assets().to_vec();
        for e in self.net.edges() {
            a[e.creditor.0] += &p[e.id.0];
        }
        a
    }

    /// Fixed point of the affine map given by the pieces left of `b`, if it
    /// is provably the greatest fixed point below `b`.
    fn accelerate(&self, b: &[Money]) -> Option<Vec<Money>> {
        let n = self.net.bank_count();
        let mut mat = vec![vec![BigRational::zero(); n]; n];
        let mut rhs: Vec<BigRational> = self
            .net
            .all_external_assets()
            .iter()
            .map(|m| m.as_rational().clone())
            .collect();
        let mut lower = Vec::with_capacity(n);
        for (i, row) in mat.iter_mut().enumerate() {
            row[i] = BigRational::one();
        }
        for v in self.net.banks() {
            let out = &self.out_edges[v.0];
            let x = b[v.0].as_rational();
            let side = if x.is_zero() { Side::Right } else { Side::Left };
            let pc = piece(self.net.rule(v), out, x, side);
            for (k, e) in out.iter().enumerate() {
                let c = e.creditor.0;
                rhs[c] += &pc.intercept[k];
                mat[c][v.0] -= &pc.slope[k];
            }
            lower.push(pc.lower);
        }
        let y = solve(mat, rhs)?;
        let mut cand = Vec::with_capacity(n);
        for (i, yi) in y.into_iter().enumerate() {
            if yi < lower[i] || &yi > b[i].as_rational() {
                return None;
            }
            cand.push(Money::from_rational(yi)?);
        }
        let next = self.assets_from(&self.payments(&cand));
        (next == cand).then_some(cand)
    }
}

/// Round limit for [`clear`]: `10 * n * (sum of liabilities + 1)`, rounded
/// up to an integer.
pub fn iteration_cap(net: &FinancialNetwork) -> u64 {
    let total: Money = net.edges().iter().map(|e| &e.liability).sum();
    let r = total.as_rational();
    let ceil = r.ceil().to_integer().to_u64().unwrap_or(u64::MAX / 4);
    10u64
        .saturating_mul(net.bank_count().max(1) as u64)
        .saturating_mul(ceil.saturating_add(1))
}

/// The maximal clearing state.
pub fn clear(net: &FinancialNetwork) -> Result<ClearingState, ClearingError> {
    let ev = Evaluator::new(net);
    let top: Vec<Money> = net.edges().iter().map(|e| e.liability.clone()).collect();
    let mut b = ev.assets_from(&top);
    let cap = iteration_cap(net);
    for _ in 0..cap {
        let next = ev.assets_from(&ev.payments(&b));
        if next == b {
            return Ok(finish(&ev, b));
        }
        if let Some(y) = ev.accelerate(&next) {
            return Ok(finish(&ev, y));
        }
        b = next;
    }
    Err(ClearingError::IterationCap(cap))
}

fn finish(ev: &Evaluator<'_>, b: Vec<Money>) -> ClearingState {
    ClearingState {
        payments: ev.payments(&b),
        assets: b.clone(),
        available: b,
    }
}

/// Capacity, flow-conservation and rule-consistency check for a payment
/// vector.
pub fn is_feasible(net: &FinancialNetwork, payments: &[Money]) -> bool {
    if payments.len() != net.edge_count() {
        return false;
    }
    if net
        .edges()
        .iter()
        .any(|e| payments[e.id.0] > e.liability)
    {
        return false;
    }
    let ev = Evaluator::new(net);
    let assets = ev.assets_from(payments);
    for v in net.banks() {
        let paid: Money = net.outgoing(v).iter().map(|e| &payments[e.0]).sum();
        if paid != assets[v.0].lesser(&net.total_liabilities(v)) {
            return false;
        }
    }
    ev.payments(&assets).as_slice() == payments
}

/// Exhaustive oracle for small integral edge-ranking networks: enumerates
/// every integer payment vector, keeps the feasible ones and returns their
/// coordinate-wise maximum.
pub fn brute_force_clear(net: &FinancialNetwork) -> Result<ClearingState, ClearingError> {
    let m = net.edge_count();
    let n = net.bank_count();
    let caps: Vec<u64> = net
        .edges()
        .iter()
        .map(|e| e.liability.to_u64())
        .collect::<Option<_>>()
        .ok_or(ClearingError::Unsupported)?;
    let ext: Vec<u64> = net
        .all_external_assets()
        .iter()
        .map(Money::to_u64)
        .collect::<Option<_>>()
        .ok_or(ClearingError::Unsupported)?;
    let mut rankings = Vec::with_capacity(n);
    for v in net.banks() {
        match net.rule(v) {
            AllocationRule::EdgeRanking(r) => rankings.push(r.iter().map(|e| e.0).collect::<Vec<_>>()),
            _ => return Err(ClearingError::Unsupported),
        }
    }
    let count = caps
        .iter()
        .try_fold(1u128, |acc, &c| acc.checked_mul(c as u128 + 1))
        .unwrap_or(u128::MAX);
    if count > BRUTE_FORCE_LIMIT {
        return Err(ClearingError::TooLarge(count, BRUTE_FORCE_LIMIT));
    }

    let creditor: Vec<usize> = net.edges().iter().map(|e| e.creditor.0).collect();
    let mut p = vec![0u64; m];
    let mut assets = vec![0u64; n];
    let mut best: Option<Vec<u64>> = None;
    let mut feasible = Vec::new();
    loop {
        assets.copy_from_slice(&ext);
        for (e, &x) in p.iter().enumerate() {
            assets[creditor[e]] += x;
        }
        let ok = rankings.iter().enumerate().all(|(v, order)| {
            let mut left = assets[v];
            order.iter().all(|&e| {
                let want = left.min(caps[e]);
                left -= want;
                p[e] == want
            })
        });
        if ok {
            feasible.push(p.clone());
            best = Some(match best {
                None => p.clone(),
                Some(b) => b.iter().zip(&p).map(|(x, y)| *x.max(y)).collect(),
            });
        }
        // odometer
        let mut i = 0;
        while i < m && p[i] == caps[i] {
            p[i] = 0;
            i += 1;
        }
        if i == m {
            break;
        }
        p[i] += 1;
    }
    let best = best.ok_or(ClearingError::NoMaximum)?;
    if !feasible.contains(&best) {
        return Err(ClearingError::NoMaximum);
    }
    let payments: Vec<Money> = best.into_iter().map(Money::from_int).collect();
    let assets = Evaluator::new(net).assets_from(&payments);
    Ok(ClearingState {
        payments,
        available: assets.clone(),
        assets,
    })
}
