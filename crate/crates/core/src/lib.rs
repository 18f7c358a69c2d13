//! Exact and arbitrary-precision machinery for Ramanujan's theta-function
//! product `a_{m,n}`, its companion `b_{m,n}`, the P-Q modular equations
//! behind their evaluation, and the class invariants feeding them.

pub mod bignum;
pub mod blocks;
pub mod etaq;
pub mod invariants;
pub mod exactseries;
pub mod harness;
pub mod products;
pub mod radicals;
pub mod syntax;
pub mod theorems;
