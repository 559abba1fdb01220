//! Swap-sequence runners and their bookkeeping.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::classify::{
    active_forest, active_indegree, classify_with, enumerate_swaps, has_sufficient_residuals,
    ClassifyError, ExtensionType, SwapClassification, SwapKind,
};
use crate::clearing::{clear, ClearingError};
use crate::gadgets::{gen_exponential, GadgetError};
use crate::money::Money;
use crate::network::{BankId, FinancialNetwork};
use crate::transforms::{apply_swap, DebtSwap, TransformError};

#[derive(Debug, Clone, thiserror::Error)]
pub enum DynamicsError {
    #[error("operation requires edge-ranking rules")]
    NotEdgeRanking,
    #[error("step budget of {0} exceeded")]
    StepBudgetExceeded(usize),
    #[error("precondition violated before step {step}: {reason}")]
    PreconditionViolated {
        step: usize,
        reason: String,
        network: Box<FinancialNetwork>,
    },
    #[error("bound violated: {0}")]
    BoundViolated(String),
    #[error("scheduled swap {step} ({swap:?}) is not admitted")]
    ClassificationMismatch { step: usize, swap: DebtSwap },
    #[error("step {0} carries no classification")]
    Unclassified(usize),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
    #[error(transparent)]
    Gadget(#[from] GadgetError),
}

/// One applied swap with the verdict computed just before applying it.
#[derive(Clone, Debug)]
pub struct SwapStep {
    pub swap: DebtSwap,
    pub classification: Option<SwapClassification>,
    /// Stage index for steps admitted by the staged scheduler.
    pub stage: Option<usize>,
}

impl SwapStep {
    pub fn plain(swap: DebtSwap) -> Self {
        SwapStep {
            swap,
            classification: None,
            stage: None,
        }
    }

    /// Total assets after the step, when a classification is attached.
    pub fn assets(&self) -> Option<&[Money]> {
        self.classification.as_ref().map(|c| c.after.assets.as_slice())
    }
}

#[derive(Clone, Debug)]
pub struct SwapSequence {
    pub initial: FinancialNetwork,
    pub steps: Vec<SwapStep>,
}

impl SwapSequence {
    pub fn new(initial: FinancialNetwork) -> Self {
        SwapSequence {
            initial,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn swaps(&self) -> Vec<DebtSwap> {
        self.steps.iter().map(|s| s.swap).collect()
    }

    /// Every intermediate network, starting with the initial one.
    pub fn replay(&self) -> Result<Vec<FinancialNetwork>, TransformError> {
        let mut nets = vec![self.initial.clone()];
        for s in &self.steps {
            let next = apply_swap(nets.last().unwrap(), s.swap)?;
            nets.push(next);
        }
        Ok(nets)
    }

    pub fn final_network(&self) -> Result<FinancialNetwork, TransformError> {
        Ok(self.replay()?.pop().unwrap())
    }

    /// Re-clears every replayed network and compares with the stored
    /// snapshots.
    pub fn snapshots_match(&self) -> Result<bool, DynamicsError> {
        let nets = self.replay()?;
        for (s, net) in self.steps.iter().zip(&nets[1..]) {
            if let Some(a) = s.assets() {
                if clear(net)?.assets != a {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Choice among admissible swaps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// Smallest `(e1, e2)` in enumeration order.
    #[default]
    Lexicographic,
    /// Largest gain for the focus bank, lexicographic among equals.
    MaxGain,
    /// Largest `(e1, e2)` in enumeration order.
    Last,
    /// Smallest gain for the focus bank, lexicographic among equals.
    MinGain,
}

/// `(m^2 + 2m + 1)(m + 1)`.
pub fn v_improving_cap(m: usize) -> usize {
    (m * m + 2 * m + 1) * (m + 1)
}

/// `(m + 1)(m^2 + 2m + 1 + n^(d+1))`.
pub fn staged_cap(m: usize, n: usize, d: usize) -> usize {
    let pow = (n as u128).saturating_pow(d as u32 + 1).min(1 << 40) as usize;
    (m + 1) * (m * m + 2 * m + 1 + pow)
}

fn admissible<F>(net: &FinancialNetwork, keep: F) -> Result<Vec<SwapClassification>, DynamicsError>
where
    F: Fn(&SwapClassification) -> bool,
{
    let before = clear(net)?;
    let mut out = Vec::new();
    for s in enumerate_swaps(net) {
        let c = classify_with(net, &before, s)?;
        if keep(&c) {
            out.push(c);
        }
    }
    Ok(out)
}

fn pick(mut cands: Vec<SwapClassification>, v: BankId, tie: TieBreak) -> Option<SwapClassification> {
    match tie {
        TieBreak::Lexicographic => cands.into_iter().next(),
        TieBreak::Last => cands.pop(),
        TieBreak::MaxGain => {
            let mut best: Option<SwapClassification> = None;
            for c in cands {
                if best.as_ref().is_none_or(|b| c.delta(v) > b.delta(v)) {
                    best = Some(c);
                }
            }
            best
        }
        TieBreak::MinGain => {
            let mut best: Option<SwapClassification> = None;
            for c in cands {
                if best.as_ref().is_none_or(|b| c.delta(v) < b.delta(v)) {
                    best = Some(c);
                }
            }
            best
        }
    }
}

/// All v-improving semi-positive swaps of `net`.
pub fn v_improving_swaps(net: &FinancialNetwork, v: BankId) -> Result<Vec<SwapClassification>, DynamicsError> {
    admissible(net, |c| c.semi_positive && c.improves(v))
}

/// Repeats v-improving semi-positive swaps until none is left.
pub fn run_v_improving(
    net: &FinancialNetwork,
    v: BankId,
    tie: TieBreak,
) -> Result<(FinancialNetwork, SwapSequence), DynamicsError> {
    let cap = v_improving_cap(net.edge_count());
    let mut seq = SwapSequence::new(net.clone());
    let mut cur = net.clone();
    loop {
        let Some(c) = pick(v_improving_swaps(&cur, v)?, v, tie) else {
            return Ok((cur, seq));
        };
        if seq.len() == cap {
            return Err(DynamicsError::StepBudgetExceeded(cap));
        }
        cur = apply_swap(&cur, c.swap)?;
        seq.steps.push(SwapStep {
            swap: c.swap,
            classification: Some(c),
            stage: None,
        });
    }
}

/// Semi-positive swaps in stages: saturating, non-active and semi-active
/// swaps go first; active extension swaps are admitted stage by stage, stage
/// `i` taking swaps whose non-profiting creditor sits at depth `i - 1` of its
/// in-tree. Sufficient residuals and active in-degree at most `d` are checked
/// before every active swap.
pub fn run_staged_semiswap(
    net: &FinancialNetwork,
    d: usize,
) -> Result<(FinancialNetwork, SwapSequence), DynamicsError> {
    if !net.is_edge_ranking() {
        return Err(DynamicsError::NotEdgeRanking);
    }
    let cap = staged_cap(net.edge_count(), net.bank_count(), d);
    let mut seq = SwapSequence::new(net.clone());
    let mut cur = net.clone();
    let mut stage = 1usize;
    loop {
        let cands = admissible(&cur, |c| c.semi_positive)?;
        if cands.is_empty() {
            return Ok((cur, seq));
        }
        if seq.len() == cap {
            return Err(DynamicsError::StepBudgetExceeded(cap));
        }
        let (chosen, st) = if let Some(c) = cands.iter().find(|c| !c.kind.is_active_extension()) {
            stage = 1;
            (c.clone(), None)
        } else {
            let state = clear(&cur)?;
            let violation = |reason: String| DynamicsError::PreconditionViolated {
                step: seq.len(),
                reason,
                network: Box::new(cur.clone()),
            };
            if !has_sufficient_residuals(&cur, &state)? {
                return Err(violation("sufficient residuals".into()));
            }
            let forest = active_forest(&cur, &state)?;
            let deg = active_indegree(&cur, &forest);
            if let Some((v, k)) = deg.iter().enumerate().find(|(_, &k)| k > d) {
                return Err(violation(format!(
                    "active in-degree {k} of {} exceeds {d}",
                    cur.name(BankId(v))
                )));
            }
            let depth_of = |c: &SwapClassification| forest.depth[c.v2.0] + 1;
            let next = cands
                .iter()
                .filter(|c| depth_of(c) >= stage)
                .min_by_key(|c| depth_of(c))
                .or_else(|| cands.iter().min_by_key(|c| depth_of(c)))
                .unwrap();
            stage = depth_of(next);
            (next.clone(), Some(stage))
        };
        cur = apply_swap(&cur, chosen.swap)?;
        seq.steps.push(SwapStep {
            swap: chosen.swap,
            classification: Some(chosen),
            stage: st,
        });
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchStatus {
    LocalOptimum,
    BudgetExhausted,
}

/// First-improvement walk over arbitrary swaps that raise the assets of `v`.
pub fn run_local_search_maxassets(
    net: &FinancialNetwork,
    v: BankId,
    max_steps: usize,
) -> Result<(FinancialNetwork, SwapSequence, SearchStatus), DynamicsError> {
    let mut seq = SwapSequence::new(net.clone());
    let mut cur = net.clone();
    loop {
        let before = clear(&cur)?;
        let mut found = None;
        for s in enumerate_swaps(&cur) {
            let next = apply_swap(&cur, s)?;
            if clear(&next)?.asset(v) > before.asset(v) {
                found = Some((s, next));
                break;
            }
        }
        let Some((s, next)) = found else {
            return Ok((cur, seq, SearchStatus::LocalOptimum));
        };
        if seq.len() == max_steps {
            return Ok((cur, seq, SearchStatus::BudgetExhausted));
        }
        let c = classify_with(&cur, &before, s)?;
        seq.steps.push(SwapStep {
            swap: s,
            classification: Some(c),
            stage: None,
        });
        cur = next;
    }
}

/// Period and phase structure of a sequence of semi-positive swaps.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SequenceAccounting {
    pub saturating_count: usize,
    pub extension_count: usize,
    pub active_extension_count: usize,
    /// Maximal runs of consecutive extension swaps.
    pub periods: Vec<Range<usize>>,
    /// Maximal runs of consecutive fully-active extension swaps.
    pub phases: Vec<Range<usize>>,
    /// Per period: non-active and semi-active swaps by non-profiting creditor.
    pub non_semi_active: Vec<BTreeMap<BankId, usize>>,
}

fn runs<F: Fn(usize) -> bool>(len: usize, inside: F) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for i in 0..=len {
        match (start, i < len && inside(i)) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Derives periods and phases and checks the two counting bounds.
pub fn account(seq: &SwapSequence) -> Result<SequenceAccounting, DynamicsError> {
    let kinds: Vec<&SwapClassification> = seq
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| s.classification.as_ref().ok_or(DynamicsError::Unclassified(i)))
        .collect::<Result<_, _>>()?;
    let is_ext = |i: usize| matches!(kinds[i].kind, SwapKind::Extension(_));
    let is_active = |i: usize| kinds[i].kind.is_active_extension();
    let periods = runs(kinds.len(), is_ext);
    let phases = runs(kinds.len(), is_active);
    let mut non_semi_active = Vec::new();
    for p in &periods {
        let mut counts = BTreeMap::new();
        for c in &kinds[p.clone()] {
            if matches!(
                c.kind,
                SwapKind::Extension(ExtensionType::NonActive | ExtensionType::SemiActive)
            ) {
                *counts.entry(c.v2).or_insert(0) += 1;
            }
        }
        non_semi_active.push(counts);
    }
    let acc = SequenceAccounting {
        saturating_count: kinds.iter().filter(|c| c.kind == SwapKind::Saturating).count(),
        extension_count: (0..kinds.len()).filter(|&i| is_ext(i)).count(),
        active_extension_count: (0..kinds.len()).filter(|&i| is_active(i)).count(),
        periods,
        phases,
        non_semi_active,
    };
    let m = seq.initial.edge_count();
    if acc.saturating_count > m {
        return Err(DynamicsError::BoundViolated(format!(
            "{} saturating swaps with {m} edges",
            acc.saturating_count
        )));
    }
    for (p, counts) in acc.non_semi_active.iter().enumerate() {
        for (v, &k) in counts {
            let indeg = seq.initial.incoming(*v).len();
            if k > 2 * indeg {
                return Err(DynamicsError::BoundViolated(format!(
                    "period {p}: {k} non/semi-active swaps at {} with in-degree {indeg}",
                    seq.initial.name(*v)
                )));
            }
        }
    }
    Ok(acc)
}

/// Network state of the exponential construction: the cycle through `v`
/// and the path leaving `v`, each listed without `v`.
struct Shape {
    v: BankId,
    cycle: Vec<BankId>,
    path: Vec<BankId>,
}

impl Shape {
    /// Swaps the cycle edge entering `cycle[at]` (or `v` when `at` is the
    /// cycle length) with the second path edge. The path head and its
    /// successor become the new cycle prefix.
    fn graft(&mut self, net: &FinancialNetwork, at: usize) -> DebtSwap {
        let from = self.cycle[at - 1];
        let to = self.cycle.get(at).copied().unwrap_or(self.v);
        let e1 = net.find_edge(from, to).expect("cycle edge");
        let e2 = net.find_edge(self.path[1], self.path[2]).expect("path edge");
        let mut cycle = vec![self.path[0], self.path[1]];
        cycle.extend_from_slice(&self.cycle[at..]);
        let mut path = self.cycle[..at].to_vec();
        path.extend_from_slice(&self.path[2..]);
        self.cycle = cycle;
        self.path = path;
        DebtSwap::new(e1, e2)
    }
}

/// Moves the path prefix `u_0..u_{t-1}` into the cycle in front of the last
/// `tail` cycle banks, taking `2^t - 1` swaps.
fn bring(shape: &mut Shape, t: usize, tail: usize, net: &mut FinancialNetwork, out: &mut Vec<DebtSwap>) {
    if t == 0 {
        return;
    }
    bring(shape, t - 1, tail, net, out);
    let at = shape.cycle.len() - tail;
    let s = shape.graft(net, at);
    *net = apply_swap(net, s).expect("graft swap");
    out.push(s);
    bring(shape, t - 1, tail + 1, net, out);
}

/// The explicit `2^(n-4) - 1` step schedule of v-improving semi-positive
/// swaps on the proportional construction with `n` banks. Every step is
/// classified and must be admitted.
pub fn exponential_schedule(n: usize) -> Result<(FinancialNetwork, SwapSequence), DynamicsError> {
    let g = gen_exponential(n)?;
    let net = g.network.clone();
    let v = g.focus;
    let role = |r: &str| g.role(r).expect("role");
    let m = n - 4;
    let mut shape = Shape {
        v,
        cycle: vec![role("w0")],
        path: std::iter::once(role("w1"))
            .chain((0..=m).map(|i| role(&format!("u{i}"))))
            .collect(),
    };
    let mut swaps = Vec::new();
    let mut scratch = net.clone();
    bring(&mut shape, m, 0, &mut scratch, &mut swaps);

    let mut seq = SwapSequence::new(net.clone());
    let mut cur = net;
    for (i, s) in swaps.into_iter().enumerate() {
        let before = clear(&cur)?;
        let c = classify_with(&cur, &before, s)?;
        if !(c.semi_positive && c.improves(v)) {
            return Err(DynamicsError::ClassificationMismatch { step: i, swap: s });
        }
        cur = apply_swap(&cur, s)?;
        seq.steps.push(SwapStep {
            swap: s,
            classification: Some(c),
            stage: None,
        });
    }
    Ok((cur, seq))
}
