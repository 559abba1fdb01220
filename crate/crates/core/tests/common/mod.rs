//! Random instance generators and small independent oracles shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use debtswap::classify::enumerate_swaps;
use debtswap::{apply_swap, BankId, EdgeId, FinancialNetwork, Money, NetworkBuilder};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_banks: usize,
    pub max_edges: usize,
    pub max_liability: u64,
    pub max_assets: u64,
    pub proportional: bool,
}

impl Shape {
    pub fn small() -> Self {
        Shape { max_banks: 5, max_edges: 8, max_liability: 3, max_assets: 3, proportional: false }
    }

    pub fn medium() -> Self {
        Shape { max_banks: 8, max_edges: 12, max_liability: 3, max_assets: 3, proportional: false }
    }

    pub fn proportional(self) -> Self {
        Shape { proportional: true, ..self }
    }
}

/// Random simple digraph with random weights, assets and rankings.
pub fn random_network(r: &mut impl Rng, s: Shape) -> FinancialNetwork {
    let n = r.gen_range(2..=s.max_banks);
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    pairs.shuffle(r);
    let m = r.gen_range(1..=s.max_edges.min(pairs.len()));
    let mut b = NetworkBuilder::new();
    let banks: Vec<BankId> = (0..n)
        .map(|i| b.bank(format!("b{i}"), r.gen_range(0..=s.max_assets)))
        .collect();
    let mut out: Vec<Vec<EdgeId>> = vec![Vec::new(); n];
    for &(x, y) in &pairs[..m] {
        let e = b.edge(banks[x], banks[y], r.gen_range(1..=s.max_liability));
        out[x].push(e);
    }
    for (i, mut order) in out.into_iter().enumerate() {
        if s.proportional {
            b.proportional(banks[i]);
        } else {
            order.shuffle(r);
            b.ranking(banks[i], order);
        }
    }
    b.build()
}

/// Random network that has at least one valid swap. Liabilities are drawn
/// from a narrow range so equal weights are common.
pub fn swappable_network(r: &mut impl Rng, s: Shape) -> FinancialNetwork {
    loop {
        let net = random_network(r, s);
        if !enumerate_swaps(&net).is_empty() {
            return net;
        }
    }
}

/// Applies up to `k` random valid swaps; returns the visited networks.
pub fn scramble(r: &mut impl Rng, net: &FinancialNetwork, k: usize) -> Vec<FinancialNetwork> {
    let mut path = vec![net.clone()];
    for _ in 0..k {
        let cur = path.last().unwrap();
        let swaps = enumerate_swaps(cur);
        let Some(&s) = swaps.choose(r) else { break };
        path.push(apply_swap(cur, s).unwrap());
    }
    path
}

/// Payments of an edge-ranking bank with budget `b`, written out directly.
pub fn ranking_payments(net: &FinancialNetwork, v: BankId, budget: &Money) -> Vec<(EdgeId, Money)> {
    let order = match net.rule(v) {
        debtswap::AllocationRule::EdgeRanking(o) => o.clone(),
        _ => panic!("ranking rule expected"),
    };
    let mut left = budget.clone();
    order
        .into_iter()
        .map(|e| {
            let l = &net.edge(e).liability;
            let p = if &left >= l { l.clone() } else { left.clone() };
            left = left.saturating_sub(&p);
            (e, p)
        })
        .collect()
}

/// Fixed-point check written independently of the library's evaluator:
/// every ranking bank pays its total assets in rank order.
pub fn is_ranking_fixed_point(net: &FinancialNetwork, payments: &[Money]) -> bool {
    net.banks().all(|v| {
        let mut a = net.external_assets(v).clone();
        for &e in net.incoming(v) {
            a += payments[e.0].clone();
        }
        ranking_payments(net, v, &a)
            .into_iter()
            .all(|(e, p)| payments[e.0] == p)
    })
}

/// Greatest fixed point by exhaustive search over integer payment vectors,
/// independent of the library's brute-force oracle.
pub fn exhaustive_gfp(net: &FinancialNetwork) -> Vec<Money> {
    let caps: Vec<u64> = net.edges().iter().map(|e| e.liability.to_u64().unwrap()).collect();
    let mut cur = vec![0u64; caps.len()];
    let mut best: Option<Vec<u64>> = None;
    loop {
        let p: Vec<Money> = cur.iter().map(|&x| Money::from_int(x)).collect();
        if is_ranking_fixed_point(net, &p) {
            best = Some(match best {
                None => cur.clone(),
                Some(b) => b.iter().zip(&cur).map(|(x, y)| *x.max(y)).collect(),
            });
        }
        let mut i = 0;
        loop {
            if i == caps.len() {
                return best.expect("zero vector fallback").into_iter().map(Money::from_int).collect();
            }
            if cur[i] < caps[i] {
                cur[i] += 1;
                break;
            }
            cur[i] = 0;
            i += 1;
        }
    }
}

/// All subsets of `0..n` of the given size.
pub fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == size)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

pub fn covers(universe: usize, sets: &[BTreeSet<usize>], pick: &[usize]) -> bool {
    let seen: BTreeSet<usize> = pick.iter().flat_map(|&j| sets[j].iter().copied()).collect();
    (1..=universe).all(|x| seen.contains(&x))
}

/// Independence number by enumeration.
pub fn independence_number(nodes: usize, edges: &[(usize, usize)]) -> usize {
    (0u32..1 << nodes)
        .filter(|m| edges.iter().all(|&(a, b)| !(m >> a & 1 == 1 && m >> b & 1 == 1)))
        .map(|m| m.count_ones() as usize)
        .max()
        .unwrap()
}

/// Appends a source bank with edges into up to two random banks.
pub fn add_source(net: &FinancialNetwork, r: &mut impl Rng) -> FinancialNetwork {
    let (mut names, mut assets, mut edges, mut rules) = net.clone().into_parts();
    let s = BankId(names.len());
    names.push("src".into());
    assets.push(Money::from_int(r.gen_range(0..=3)));
    let targets: BTreeSet<usize> = (0..2).map(|_| r.gen_range(0..net.bank_count())).collect();
    let mut own = Vec::new();
    for t in targets {
        let id = debtswap::EdgeId(edges.len());
        edges.push(debtswap::Edge { id, debtor: s, creditor: BankId(t), liability: Money::from_int(r.gen_range(1..=3)) });
        own.push(id);
    }
    rules.push(match net.rule(BankId(0)) {
        debtswap::AllocationRule::Proportional => debtswap::AllocationRule::Proportional,
        _ => debtswap::AllocationRule::EdgeRanking(own),
    });
    FinancialNetwork::from_parts(names, assets, edges, rules)
}
