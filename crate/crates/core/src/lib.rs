//! Bounded model checking of asynchronous HyperLTL over acyclic Kripke
//! structures.
//!
//! The pipeline is: parse models ([`model`]) and a formula ([`formula`]),
//! unroll every trace variable ([`unroll`]), build trajectory position
//! constraints ([`trajectory`]), translate the temporal body and quantifier
//! prefix into a prenex QBF ([`encoder`]) and hand the result to a solver
//! ([`qbf`]). The [`oracle`] evaluates the same bounded semantics by explicit
//! enumeration and serves as ground truth in tests.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod encoder;
pub mod formula;
pub mod model;
pub mod oracle;
pub mod qbf;
pub mod trajectory;
pub mod unroll;

pub use encoder::{encode, Encoding, EncodeError};
pub use formula::{parse_formula, AhltlFormula, Body, PrefixShape};
pub use model::{parse_model, KripkeModel, ModelBundle, StateId};
pub use qbf::{QbfQuery, Quant};

/// Which bounded semantics to use when the unrolling runs out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Semantics {
    /// Halting pessimistic: pending eventualities fail at the bound.
    Hpes,
    /// Halting optimistic: pending eventualities succeed at the bound.
    Hopt,
}

impl Semantics {
    pub fn name(self) -> &'static str {
        match self {
            Semantics::Hpes => "hpes",
            Semantics::Hopt => "hopt",
        }
    }

    pub fn dual(self) -> Self {
        match self {
            Semantics::Hpes => Semantics::Hopt,
            Semantics::Hopt => Semantics::Hpes,
        }
    }
}

impl core::fmt::Display for Semantics {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}
