//! Small reference networks used throughout the tests and the CLI.

use crate::money::Money;
use crate::network::{FinancialNetwork, NetworkBuilder};

/// Six-bank example with unit edges: `u1->v1`, `u2->v2`, `v1->u2`, `v1->w1`,
/// `w1->v1`, `v2->w2`. `v1` prefers `u2` over `w1`; `v2` holds one unit.
pub fn ex1() -> FinancialNetwork {
    ex1_with(false)
}

/// [`ex1`] after swapping the creditors of `u1->v1` and `u2->v2`.
pub fn ex1_swapped() -> FinancialNetwork {
    ex1_with(true)
}

fn ex1_with(swapped: bool) -> FinancialNetwork {
    let mut b = NetworkBuilder::new();
    let u1 = b.bank("u1", 0);
    let v1 = b.bank("v1", 0);
    let u2 = b.bank("u2", 0);
    let v2 = b.bank("v2", 1);
    let w1 = b.bank("w1", 0);
    let w2 = b.bank("w2", 0);
    if swapped {
        b.edge(u1, v2, 1);
        b.edge(u2, v1, 1);
    } else {
        b.edge(u1, v1, 1);
        b.edge(u2, v2, 1);
    }
    let to_u2 = b.edge(v1, u2, 1);
    let to_w1 = b.edge(v1, w1, 1);
    b.edge(w1, v1, 1);
    b.edge(v2, w2, 1);
    b.ranking(v1, vec![to_u2, to_w1]);
    b.build()
}

/// Minimal extension-swap network: `u1->v1`, `u2->v2`, `v1->v2`, all of
/// weight `m`, with `k` external assets at `u2`. Requires `m > k`.
pub fn ext(m: u64, k: u64) -> FinancialNetwork {
    let mut b = NetworkBuilder::new();
    let u1 = b.bank("u1", 0);
    let u2 = b.bank("u2", k);
    let v1 = b.bank("v1", 0);
    let v2 = b.bank("v2", 0);
    b.edge(u1, v1, m);
    b.edge(u2, v2, m);
    b.edge(v1, v2, m);
    b.build()
}

/// Zero amount shorthand for fixtures written by hand.
pub fn zero() -> Money {
    Money::zero()
}
