//! Reduction gadgets: combinatorial instances compiled into financial
//! networks whose reachable configurations mirror the source problem.

use std::collections::{BTreeMap, BTreeSet};

use crate::money::Money;
use crate::network::{BankId, EdgeId, FinancialNetwork, NetworkBuilder, RuleKind};
use crate::transforms::{apply_swap, DebtSwap};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GadgetError {
    #[error("instance too small: {0}")]
    TooSmall(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("parameter overflow")]
    Overflow,
}

/// A generated network plus the named banks and parameters of its
/// construction.
#[derive(Clone, Debug)]
pub struct GadgetInstance {
    pub network: FinancialNetwork,
    pub focus: BankId,
    pub roles: BTreeMap<String, BankId>,
    pub params: BTreeMap<String, Money>,
}

impl GadgetInstance {
    pub fn role(&self, name: &str) -> Option<BankId> {
        self.roles.get(name).copied()
    }

    pub fn param(&self, name: &str) -> Option<&Money> {
        self.params.get(name)
    }

    fn param_u64(&self, name: &str) -> u64 {
        self.params[name].to_u64().expect("integral parameter")
    }

    /// Edge between two named roles.
    pub fn edge(&self, net: &FinancialNetwork, a: &str, b: &str) -> Option<EdgeId> {
        net.find_edge(self.role(a)?, self.role(b)?)
    }

    /// Same instance with every bank switched to the given rule family.
    pub fn with_rule_kind(&self, kind: RuleKind) -> GadgetInstance {
        GadgetInstance {
            network: self.network.with_rule_kind(kind),
            ..self.clone()
        }
    }
}

/// Builder that records roles alongside banks.
struct Roles {
    b: NetworkBuilder,
    roles: BTreeMap<String, BankId>,
    params: BTreeMap<String, Money>,
}

impl Roles {
    fn new() -> Self {
        Roles {
            b: NetworkBuilder::new(),
            roles: BTreeMap::new(),
            params: BTreeMap::new(),
        }
    }

    fn bank(&mut self, name: impl Into<String>, assets: u64) -> BankId {
        let name = name.into();
        let id = self.b.bank(name.clone(), assets);
        self.roles.insert(name, id);
        id
    }

    fn param(&mut self, name: impl Into<String>, value: u64) {
        self.params.insert(name.into(), Money::from_int(value));
    }

    fn finish(self, focus: BankId) -> GadgetInstance {
        GadgetInstance {
            network: self.b.build(),
            focus,
            roles: self.roles,
            params: self.params,
        }
    }
}

/// Smallest `d` with `2^(d-1) > bound`.
fn bit_width(bound: u64) -> Result<u32, GadgetError> {
    let mut d = 1u32;
    while (1u64.checked_shl(d - 1).ok_or(GadgetError::Overflow)?) <= bound {
        d += 1;
        if d > 62 {
            return Err(GadgetError::Overflow);
        }
    }
    Ok(d)
}

/// Proportional network with a 2-cycle `v <-> w0` and a path
/// `v, w1, u0, ..., u_{n-4}`; all liabilities `2^n`, `u_i` holds `2^i`.
pub fn gen_exponential(n: usize) -> Result<GadgetInstance, GadgetError> {
    if n < 6 {
        return Err(GadgetError::TooSmall(format!("need n >= 6, got {n}")));
    }
    if n > 60 {
        return Err(GadgetError::Overflow);
    }
    let w = 1u64 << n;
    let mut r = Roles::new();
    let v = r.bank("v", 0);
    let w0 = r.bank("w0", 0);
    let w1 = r.bank("w1", 0);
    let us: Vec<BankId> = (0..=n - 4).map(|i| r.bank(format!("u{i}"), 1 << i)).collect();
    r.b.edge(v, w0, w);
    r.b.edge(w0, v, w);
    r.b.edge(v, w1, w);
    r.b.edge(w1, us[0], w);
    for pair in us.windows(2) {
        r.b.edge(pair[0], pair[1], w);
    }
    r.b.all_proportional();
    r.param("liability", w);
    Ok(r.finish(v))
}

/// A literal over 1-based variable indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    /// DIMACS style: `3` is `x3`, `-3` is `not x3`.
    pub fn from_dimacs(x: i64) -> Option<Literal> {
        if x == 0 {
            return None;
        }
        Some(Literal {
            var: x.unsigned_abs() as usize,
            positive: x > 0,
        })
    }

    pub fn holds(self, assignment: &[bool]) -> bool {
        assignment[self.var - 1] == self.positive
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub literals: Vec<Literal>,
    pub weight: u64,
}

/// Weighted CNF formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Formula {
    pub num_vars: usize,
    pub clauses: Vec<Clause>,
}

impl Formula {
    pub fn satisfied_weight(&self, assignment: &[bool]) -> u64 {
        self.clauses
            .iter()
            .filter(|c| c.literals.iter().any(|l| l.holds(assignment)))
            .map(|c| c.weight)
            .sum()
    }

    pub fn is_satisfied(&self, assignment: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.literals.iter().any(|l| l.holds(assignment)))
    }

    fn check(&self) -> Result<(), GadgetError> {
        if self.num_vars == 0 || self.clauses.is_empty() {
            return Err(GadgetError::TooSmall("need a variable and a clause".into()));
        }
        for c in &self.clauses {
            if c.weight == 0 {
                return Err(GadgetError::InvalidInstance("clause weight must be positive".into()));
            }
            if c.literals.is_empty() {
                return Err(GadgetError::InvalidInstance("empty clause".into()));
            }
            if c.literals.iter().any(|l| l.var == 0 || l.var > self.num_vars) {
                return Err(GadgetError::InvalidInstance("literal out of range".into()));
            }
        }
        Ok(())
    }
}

/// Literal value `2^(d-1) + 2i + [positive]` with `d` minimal such that
/// `2^(d-1)` exceeds every clause weight and `2k`.
pub fn literal_value(d: u32, lit: Literal) -> u64 {
    (1u64 << (d - 1)) + 2 * lit.var as u64 + u64::from(lit.positive)
}

/// Max-SAT gadget in its all-TRUE configuration. Banks `x_i`, `s_i`,
/// `x_i^T`, `x_i^F`, one bank per clause and the focus `v`. Variable banks
/// hold and owe `K * M_i` with `K = max(2, k, max literal occurrences)`, so
/// a literal bank with incoming funds settles all of its clause edges.
pub fn gen_max2sat(formula: &Formula) -> Result<GadgetInstance, GadgetError> {
    formula.check()?;
    let k = formula.num_vars as u64;
    let max_w = formula.clauses.iter().map(|c| c.weight).max().unwrap();
    let d = bit_width(max_w.max(2 * k))?;
    let clause_lits: Vec<BTreeSet<Literal>> = formula
        .clauses
        .iter()
        .map(|c| c.literals.iter().copied().collect())
        .collect();
    let mut occ: BTreeMap<Literal, u64> = BTreeMap::new();
    for lits in &clause_lits {
        for &l in lits {
            *occ.entry(l).or_insert(0) += 1;
        }
    }
    let mult = 2.max(k).max(occ.values().copied().max().unwrap_or(0));

    let mut r = Roles::new();
    let v = r.bank("v", 0);
    let mut lit_bank = BTreeMap::new();
    for i in 1..=formula.num_vars {
        let pos = Literal { var: i, positive: true };
        let neg = Literal { var: i, positive: false };
        let mi = literal_value(d, pos).max(literal_value(d, neg));
        let big = mi.checked_mul(mult).ok_or(GadgetError::Overflow)?;
        let x = r.bank(format!("x{i}"), big);
        let s = r.bank(format!("s{i}"), 0);
        let t = r.bank(format!("x{i}T"), 0);
        let f = r.bank(format!("x{i}F"), 0);
        r.b.edge(x, t, big);
        r.b.edge(s, f, big);
        lit_bank.insert(pos, t);
        lit_bank.insert(neg, f);
        r.param(format!("M{i}T"), literal_value(d, pos));
        r.param(format!("M{i}F"), literal_value(d, neg));
        r.param(format!("KM{i}"), big);
    }
    for (j, (c, lits)) in formula.clauses.iter().zip(&clause_lits).enumerate() {
        let kb = r.bank(format!("k{}", j + 1), 0);
        for &l in lits {
            r.b.edge(lit_bank[&l], kb, literal_value(d, l));
        }
        r.b.edge(kb, v, c.weight);
        r.param(format!("w{}", j + 1), c.weight);
    }
    r.param("k", k);
    r.param("K", mult);
    r.param("d", u64::from(d));
    Ok(r.finish(v))
}

/// The swap that flips variable `i` (1-based) in any configuration.
pub fn flip_swap(g: &GadgetInstance, net: &FinancialNetwork, i: usize) -> DebtSwap {
    let x = format!("x{i}");
    let s = format!("s{i}");
    let (t, f) = (format!("x{i}T"), format!("x{i}F"));
    let from_x = g.edge(net, &x, &t).or_else(|| g.edge(net, &x, &f)).unwrap();
    let from_s = g.edge(net, &s, &t).or_else(|| g.edge(net, &s, &f)).unwrap();
    DebtSwap::new(from_x, from_s)
}

/// The configuration of a Max-SAT gadget encoding `assignment`: `x_i` pays
/// `x_i^T` when variable `i` is TRUE and `x_i^F` otherwise.
pub fn assignment_network(g: &GadgetInstance, assignment: &[bool]) -> FinancialNetwork {
    let k = g.param_u64("k") as usize;
    assert_eq!(assignment.len(), k, "assignment length");
    let mut net = g.network.clone();
    for (i, &val) in assignment.iter().enumerate() {
        let i = i + 1;
        let is_true = g.edge(&net, &format!("x{i}"), &format!("x{i}T")).is_some();
        if is_true != val {
            net = apply_swap(&net, flip_swap(g, &net, i)).expect("flip swap");
        }
    }
    net
}

/// Reads the assignment encoded by a Max-SAT gadget configuration.
pub fn read_assignment(g: &GadgetInstance, net: &FinancialNetwork) -> Vec<bool> {
    let k = g.param_u64("k") as usize;
    (1..=k)
        .map(|i| g.edge(net, &format!("x{i}"), &format!("x{i}T")).is_some())
        .collect()
}

/// Unit-weight Max-SAT gadget for the connectivity question: start and
/// target configurations plus the asset floor (the clause count) that
/// characterises satisfying assignments.
pub fn gen_sat_connectivity(
    formula: &Formula,
    init: &[bool],
    target: &[bool],
) -> Result<(GadgetInstance, FinancialNetwork, Money), GadgetError> {
    for a in [init, target] {
        if a.len() != formula.num_vars || !formula.is_satisfied(a) {
            return Err(GadgetError::InvalidInstance(
                "endpoint assignment does not satisfy the formula".into(),
            ));
        }
    }
    let unit = Formula {
        num_vars: formula.num_vars,
        clauses: formula
            .clauses
            .iter()
            .map(|c| Clause {
                literals: c.literals.clone(),
                weight: 1,
            })
            .collect(),
    };
    let g = gen_max2sat(&unit)?;
    let start = GadgetInstance {
        network: assignment_network(&g, init),
        ..g.clone()
    };
    let goal = assignment_network(&g, target);
    Ok((start, goal, Money::from_int(unit.clauses.len() as u64)))
}

/// Set-cover instance over items `1..=k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetSystem {
    pub universe: usize,
    pub sets: Vec<BTreeSet<usize>>,
}

impl SetSystem {
    pub fn covers(&self, selection: &[usize]) -> bool {
        let mut seen = BTreeSet::new();
        for &j in selection {
            seen.extend(self.sets[j].iter().copied());
        }
        seen.len() == self.universe
    }

    pub fn covered(&self, selection: &[usize]) -> usize {
        let mut seen = BTreeSet::new();
        for &j in selection {
            seen.extend(self.sets[j].iter().copied());
        }
        seen.len()
    }
}

/// Set-cover gadget in the configuration selecting every set. Banks `u_j`
/// hold and owe `M`, `w_1..w_{l-c}` owe `M`, set banks `S_j` owe `M_j` to each
/// of their items, items owe 1 to `v`. `M = 2^d * max|S_j|` so a funded set
/// bank settles all its debt.
pub fn gen_setcover(sys: &SetSystem, c: usize) -> Result<GadgetInstance, GadgetError> {
    let l = sys.sets.len();
    let k = sys.universe;
    if k == 0 || l == 0 {
        return Err(GadgetError::TooSmall("empty set system".into()));
    }
    if c == 0 || c >= l {
        return Err(GadgetError::InvalidInstance(format!("need 0 < c < {l}, got {c}")));
    }
    if sys.sets.iter().flatten().any(|&x| x == 0 || x > k) {
        return Err(GadgetError::InvalidInstance("item out of range".into()));
    }
    if !sys.covers(&(0..l).collect::<Vec<_>>()) {
        return Err(GadgetError::InvalidInstance("sets do not cover the universe".into()));
    }
    let d = bit_width(k.max(l) as u64)?;
    let max_size = sys.sets.iter().map(BTreeSet::len).max().unwrap().max(1) as u64;
    let big = (1u64 << d).checked_mul(max_size).ok_or(GadgetError::Overflow)?;

    let mut r = Roles::new();
    let v = r.bank("v", 0);
    let items: Vec<BankId> = (1..=k).map(|i| r.bank(format!("x{i}"), 0)).collect();
    for (j, set) in sys.sets.iter().enumerate() {
        let mj = (1u64 << (d - 1)) + j as u64 + 1;
        let sb = r.bank(format!("S{}", j + 1), 0);
        let ub = r.bank(format!("u{}", j + 1), big);
        r.b.edge(ub, sb, big);
        for &x in set {
            r.b.edge(sb, items[x - 1], mj);
        }
        r.param(format!("M{}", j + 1), mj);
    }
    for h in 1..=l - c {
        let wb = r.bank(format!("w{h}"), 0);
        r.b.edge(wb, v, big);
    }
    for &x in &items {
        r.b.edge(x, v, 1);
    }
    r.param("M", big);
    r.param("k", k as u64);
    r.param("l", l as u64);
    r.param("c", c as u64);
    Ok(r.finish(v))
}

/// Set-cover configuration selecting `selection` (0-based set indices,
/// at least `c` of them): unselected sets are fed by `w` banks, freed `u`
/// banks pay `v` directly.
pub fn setcover_selection_network(
    g: &GadgetInstance,
    selection: &[usize],
) -> Result<FinancialNetwork, GadgetError> {
    let l = g.param_u64("l") as usize;
    let c = g.param_u64("c") as usize;
    let chosen: BTreeSet<usize> = selection.iter().copied().collect();
    if chosen.len() < c || chosen.iter().any(|&j| j >= l) {
        return Err(GadgetError::InvalidInstance(format!(
            "selection must name at least {c} distinct sets"
        )));
    }
    let mut net = g.network.clone();
    let mut free_w = 1..=l - c;
    for j in (0..l).filter(|j| !chosen.contains(j)) {
        let h = free_w.next().unwrap();
        let e1 = g.edge(&net, &format!("u{}", j + 1), &format!("S{}", j + 1)).unwrap();
        let e2 = g.edge(&net, &format!("w{h}"), "v").unwrap();
        net = apply_swap(&net, DebtSwap::new(e1, e2)).expect("selection swap");
    }
    Ok(net)
}

/// Sets currently funded by a `u` bank.
pub fn read_selection(g: &GadgetInstance, net: &FinancialNetwork) -> Vec<usize> {
    let l = g.param_u64("l") as usize;
    (0..l)
        .filter(|j| {
            let s = g.role(&format!("S{}", j + 1)).unwrap();
            net.incoming(s)
                .iter()
                .any(|&e| net.name(net.edge(e).debtor).starts_with('u'))
        })
        .collect()
}

/// Simple undirected graph on nodes `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    fn check(&self) -> Result<(), GadgetError> {
        let mut seen = BTreeSet::new();
        for &(a, b) in &self.edges {
            if a == b || a >= self.nodes || b >= self.nodes {
                return Err(GadgetError::InvalidInstance(format!("bad edge ({a},{b})")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(GadgetError::InvalidInstance(format!("duplicate edge ({a},{b})")));
            }
        }
        Ok(())
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        self.edges
            .iter()
            .all(|(a, b)| !(set.contains(a) && set.contains(b)))
    }
}

/// Independent-set gadget: node banks `v_i`, edge banks `e_j`, focus `v`,
/// collector `u`, and per node a pair `x_i -> v_i`, `y_i -> u` of weight
/// `deg + 1` where `y_i` holds `deg + 1`.
pub fn gen_independent_set(graph: &Graph) -> Result<GadgetInstance, GadgetError> {
    graph.check()?;
    let k = graph.nodes;
    let mut r = Roles::new();
    let v = r.bank("v", 0);
    let u = r.bank("u", 0);
    let nodes: Vec<BankId> = (1..=k).map(|i| r.bank(format!("v{i}"), 0)).collect();
    let edge_banks: Vec<BankId> = (1..=graph.edges.len()).map(|j| r.bank(format!("e{j}"), 0)).collect();
    for (j, &(a, b)) in graph.edges.iter().enumerate() {
        r.b.edge(nodes[a], edge_banks[j], 1);
        r.b.edge(nodes[b], edge_banks[j], 1);
        r.b.edge(edge_banks[j], u, 1);
    }
    for &n in &nodes {
        r.b.edge(n, v, 1);
    }
    r.b.edge(v, u, k.max(1) as u64);
    for i in 0..k {
        let w = graph.degree(i) as u64 + 1;
        let x = r.bank(format!("x{}", i + 1), 0);
        let y = r.bank(format!("y{}", i + 1), w);
        r.b.edge(x, nodes[i], w);
        r.b.edge(y, u, w);
    }
    r.param("k", k as u64);
    Ok(r.finish(v))
}

/// Independent-set configuration activating the given nodes (0-based).
pub fn is_selection_network(g: &GadgetInstance, set: &[usize]) -> FinancialNetwork {
    let mut net = g.network.clone();
    for &i in set {
        let e1 = g.edge(&net, &format!("x{}", i + 1), &format!("v{}", i + 1)).unwrap();
        let e2 = g.edge(&net, &format!("y{}", i + 1), "u").unwrap();
        net = apply_swap(&net, DebtSwap::new(e1, e2)).expect("selection swap");
    }
    net
}

/// Partition gadget: `a_i -> u` and `s_i -> v` of weight `max a + 1`,
/// `v -> u` of weight `A/2`, `a_i` holds `a_i`.
pub fn gen_partition(values: &[u64]) -> Result<GadgetInstance, GadgetError> {
    if values.is_empty() || values.contains(&0) {
        return Err(GadgetError::InvalidInstance("values must be positive".into()));
    }
    let total: u64 = values.iter().try_fold(0u64, |a, &x| a.checked_add(x)).ok_or(GadgetError::Overflow)?;
    if total % 2 == 1 {
        return Err(GadgetError::InvalidInstance(format!("odd total {total}")));
    }
    let big = values.iter().max().unwrap() + 1;
    let mut r = Roles::new();
    let v = r.bank("v", 0);
    let u = r.bank("u", 0);
    for (i, &a) in values.iter().enumerate() {
        let ab = r.bank(format!("a{}", i + 1), a);
        let sb = r.bank(format!("s{}", i + 1), 0);
        r.b.edge(ab, u, big);
        r.b.edge(sb, v, big);
    }
    r.b.edge(v, u, total / 2);
    r.param("M", big);
    r.param("A", total);
    r.param("k", values.len() as u64);
    Ok(r.finish(v))
}

/// Partition configuration redirecting the items of `subset` (0-based) to `v`.
pub fn partition_selection_network(g: &GadgetInstance, subset: &[usize]) -> FinancialNetwork {
    let mut net = g.network.clone();
    for &i in subset {
        let e1 = g.edge(&net, &format!("a{}", i + 1), "u").unwrap();
        let e2 = g.edge(&net, &format!("s{}", i + 1), "v").unwrap();
        net = apply_swap(&net, DebtSwap::new(e1, e2)).expect("selection swap");
    }
    net
}

/// 3-partition gadget. `v` ranks `u_1..u_l` (`l = 2k/3 - 1`): odd `u_h`
/// take `T` and owe `M` to the root `r`, even `u_h` take 1 and are owed `d`
/// by a unit source `s_h`. Items `a_i` owe `c` to `r`; `k` empty banks owe
/// `c` to `v` and `(l-1)/2` empty banks owe `d` to `v`. `M, c, d = T+1..T+3`.
pub fn gen_3partition(values: &[u64], k: usize) -> Result<GadgetInstance, GadgetError> {
    if k == 0 || k % 3 != 0 || values.len() != k {
        return Err(GadgetError::InvalidInstance(format!(
            "need k divisible by 3 and k values, got k={k} with {} values",
            values.len()
        )));
    }
    let total: u64 = values.iter().try_fold(0u64, |a, &x| a.checked_add(x)).ok_or(GadgetError::Overflow)?;
    if (3 * total) % k as u64 != 0 {
        return Err(GadgetError::InvalidInstance("3A/k is not an integer".into()));
    }
    let t = 3 * total / k as u64;
    if values.iter().any(|&a| !(4 * a > t && 2 * a < t)) {
        return Err(GadgetError::InvalidInstance(format!("values must lie strictly between T/4 and T/2, T={t}")));
    }
    let (m, c, d) = (t + 1, t + 2, t + 3);
    let l = 2 * k / 3 - 1;

    let mut r = Roles::new();
    let v = r.bank("v", 0);
    let root = r.bank("r", 0);
    for (i, &a) in values.iter().enumerate() {
        let ab = r.bank(format!("a{}", i + 1), a);
        r.b.edge(ab, root, c);
    }
    let mut order = Vec::new();
    for h in 1..=l {
        let uh = r.bank(format!("u{h}"), 0);
        if h % 2 == 1 {
            order.push(r.b.edge(v, uh, t));
            r.b.edge(uh, root, m);
        } else {
            order.push(r.b.edge(v, uh, 1));
            let sh = r.bank(format!("s{h}"), 1);
            r.b.edge(sh, uh, d);
        }
    }
    r.b.ranking(v, order);
    for i in 1..=k {
        let p = r.bank(format!("p{i}"), 0);
        r.b.edge(p, v, c);
    }
    for i in 1..=(l - 1) / 2 {
        let q = r.bank(format!("q{i}"), 0);
        r.b.edge(q, v, d);
    }
    r.param("T", t);
    r.param("M", m);
    r.param("c", c);
    r.param("d", d);
    r.param("l", l as u64);
    r.param("A", total);
    Ok(r.finish(v))
}

/// Appends a path `v -> b_1 -> ... -> b_B` behind a sink focus bank so that
/// every path bank mirrors the focus assets. Weights start above every
/// existing liability and every possible asset total.
pub fn add_amplifier(g: &GadgetInstance, length: usize) -> Result<GadgetInstance, GadgetError> {
    let net = &g.network;
    if !net.is_sink(g.focus) {
        return Err(GadgetError::InvalidInstance("focus bank must be a sink".into()));
    }
    let assets: Money = net.all_external_assets().iter().sum();
    let top = net
        .edges()
        .iter()
        .map(|e| e.liability.clone())
        .max()
        .unwrap_or_else(Money::zero)
        .max(assets);
    let base = top.to_u64().ok_or(GadgetError::Overflow)? + 1;
    let (mut names, mut ext, mut edges, mut rules) = net.clone().into_parts();
    let mut roles = g.roles.clone();
    let mut prev = g.focus;
    for i in 1..=length {
        let b = BankId(names.len());
        let name = format!("b{i}");
        names.push(name.clone());
        ext.push(Money::zero());
        rules.push(crate::network::AllocationRule::EdgeRanking(Vec::new()));
        roles.insert(name, b);
        let id = EdgeId(edges.len());
        edges.push(crate::network::Edge {
            id,
            debtor: prev,
            creditor: b,
            liability: Money::from_int(base + i as u64),
        });
        if let crate::network::AllocationRule::EdgeRanking(r) = &mut rules[prev.0] {
            r.push(id);
        }
        prev = b;
    }
    Ok(GadgetInstance {
        network: FinancialNetwork::from_parts(names, ext, edges, rules),
        focus: g.focus,
        roles,
        params: g.params.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearing::clear;

    fn lit(x: i64) -> Literal {
        Literal::from_dimacs(x).unwrap()
    }

    fn two_clause() -> Formula {
        Formula {
            num_vars: 2,
            clauses: vec![
                Clause { literals: vec![lit(1), lit(2)], weight: 3 },
                Clause { literals: vec![lit(-1), lit(2)], weight: 5 },
            ],
        }
    }

    #[test]
    fn exponential_initial_state() {
        let g = gen_exponential(8).unwrap();
        assert!(g.network.validate().is_empty());
        let st = clear(&g.network).unwrap();
        let net = &g.network;
        for i in 0..4 {
            let a = g.role(&format!("u{i}")).unwrap();
            let b = g.role(&format!("u{}", i + 1)).unwrap();
            let e = net.find_edge(a, b).unwrap();
            assert_eq!(st.payment(e), &Money::from_int((1 << (i + 1)) - 1));
        }
        for (a, b) in [("v", "w0"), ("w0", "v"), ("v", "w1"), ("w1", "u0")] {
            let e = net.find_edge(g.role(a).unwrap(), g.role(b).unwrap()).unwrap();
            assert!(st.payment(e).is_zero());
        }
        let g6 = gen_exponential(6).unwrap();
        let ext: Vec<u64> = (0..3)
            .map(|i| g6.network.external_assets(g6.role(&format!("u{i}")).unwrap()).to_u64().unwrap())
            .collect();
        assert_eq!(ext, vec![1, 2, 4]);
        assert!(gen_exponential(5).is_err());
    }

    #[test]
    fn max2sat_examples() {
        let f = two_clause();
        let g = gen_max2sat(&f).unwrap();
        assert!(g.network.validate().is_empty());
        let v = g.focus;
        let all_true = clear(&assignment_network(&g, &[true, true])).unwrap();
        assert_eq!(all_true.asset(v), &Money::from_int(8));
        let ff = clear(&assignment_network(&g, &[false, false])).unwrap();
        assert_eq!(ff.asset(v), &Money::from_int(5));

        let mut lits = BTreeSet::new();
        for i in 1..=2 {
            for s in ["T", "F"] {
                let m = g.param(&format!("M{i}{s}")).unwrap().clone();
                assert!(m >= Money::from_int(5));
                assert!(lits.insert(m));
            }
        }
    }

    #[test]
    fn flip_is_one_swap_and_consistent() {
        let f = two_clause();
        let g = gen_max2sat(&f).unwrap();
        let a = assignment_network(&g, &[true, true]);
        let b = assignment_network(&g, &[false, true]);
        assert_eq!(apply_swap(&a, flip_swap(&g, &a, 1)).unwrap(), b);
        assert_eq!(a.incidence_profile(), assignment_network(&g, &[false, false]).incidence_profile());
        assert_eq!(read_assignment(&g, &b), vec![false, true]);
    }

    #[test]
    fn setcover_example() {
        let sys = SetSystem {
            universe: 3,
            sets: vec![[1, 2].into(), [2, 3].into(), [3].into()],
        };
        let g = gen_setcover(&sys, 2).unwrap();
        assert!(g.network.validate().is_empty());
        let m = g.param("M").unwrap().clone();
        let net = setcover_selection_network(&g, &[0, 1]).unwrap();
        let st = clear(&net).unwrap();
        assert_eq!(st.asset(g.focus), &(&m + &Money::from_int(3)));
        let bad = clear(&setcover_selection_network(&g, &[0, 2]).unwrap()).unwrap();
        assert_eq!(bad.asset(g.focus), &(&m + &Money::from_int(3)));
        let bad = clear(&setcover_selection_network(&g, &[1, 2]).unwrap()).unwrap();
        assert!(bad.asset(g.focus) < &(&m + &Money::from_int(3)));
        // set banks are either empty or solvent
        for j in 1..=3 {
            let s = g.role(&format!("S{j}")).unwrap();
            let a = st.asset(s);
            assert!(a.is_zero() || a >= &net.total_liabilities(s));
        }
    }

    #[test]
    fn independent_set_examples() {
        let tri = Graph { nodes: 3, edges: vec![(0, 1), (1, 2), (0, 2)] };
        let g = gen_independent_set(&tri).unwrap();
        assert!(g.network.validate().is_empty());
        assert!(clear(&g.network).unwrap().asset(g.focus).is_zero());
        let one = clear(&is_selection_network(&g, &[0])).unwrap();
        assert_eq!(one.asset(g.focus), &Money::one());

        let p3 = Graph { nodes: 3, edges: vec![(0, 1), (1, 2)] };
        let g = gen_independent_set(&p3).unwrap();
        let two = clear(&is_selection_network(&g, &[0, 2])).unwrap();
        assert_eq!(two.asset(g.focus), &Money::from_int(2));
    }

    /// Outside the selection swaps, unit edges can be rewired without loss:
    /// on a single edge, `v` ends up above the independence number.
    #[test]
    fn independent_set_unit_swaps_escape_the_bound() {
        let k2 = Graph { nodes: 2, edges: vec![(0, 1)] };
        let g = gen_independent_set(&k2).unwrap();
        let net = is_selection_network(&g, &[0]);
        let s = DebtSwap::new(g.edge(&net, "v2", "v").unwrap(), g.edge(&net, "e1", "u").unwrap());
        let c = crate::classify::classify_swap(&net, s).unwrap();
        assert!(c.semi_positive);
        assert_eq!(c.after.asset(g.focus), &Money::from_int(2));
    }

    #[test]
    fn partition_examples() {
        let g = gen_partition(&[1, 1, 2]).unwrap();
        assert!(g.network.validate().is_empty());
        assert!(clear(&g.network).unwrap().asset(g.focus).is_zero());
        for subset in [vec![2], vec![0, 1]] {
            let st = clear(&partition_selection_network(&g, &subset)).unwrap();
            assert_eq!(st.asset(g.focus), &Money::from_int(2));
        }
        assert!(gen_partition(&[1, 2]).is_err());
    }

    #[test]
    fn three_partition_example() {
        let g = gen_3partition(&[5, 5, 5], 3).unwrap();
        assert!(g.network.validate().is_empty());
        assert_eq!(g.param("T"), Some(&Money::from_int(15)));
        let net = &g.network;
        assert!(clear(net).unwrap().asset(g.focus).is_zero());
        let mut cur = net.clone();
        for i in 1..=3 {
            let e1 = cur.find_edge(g.role(&format!("a{i}")).unwrap(), g.role("r").unwrap()).unwrap();
            let e2 = cur.find_edge(g.role(&format!("p{i}")).unwrap(), g.focus).unwrap();
            cur = apply_swap(&cur, DebtSwap::new(e1, e2)).unwrap();
        }
        let st = clear(&cur).unwrap();
        assert_eq!(st.asset(g.focus), &Money::from_int(15));
        let e = cur.find_edge(g.focus, g.role("u1").unwrap()).unwrap();
        assert_eq!(st.payment(e), &Money::from_int(15));
        assert!(gen_3partition(&[1, 5, 9], 3).is_err());
    }

    #[test]
    fn amplifier_mirrors_focus() {
        let f = two_clause();
        let g = add_amplifier(&gen_max2sat(&f).unwrap(), 3).unwrap();
        assert!(g.network.validate().is_empty());
        let st = clear(&g.network).unwrap();
        let b3 = g.role("b3").unwrap();
        assert_eq!(st.asset(b3), st.asset(g.focus));
    }
}
