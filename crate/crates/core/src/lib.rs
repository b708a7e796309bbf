//! Cryptographic protocols as distributed processes: a typed term algebra,
//! a state logic, transition graphs with symbolic facts, and a bounded
//! explorer with an active adversary.

pub mod cc;
pub mod check;
pub mod corpus;
pub mod dsl;
pub mod explore;
pub mod export;
pub mod intruder;
pub mod logic;
pub mod process;
pub mod term;
pub mod tg;

pub use dsl::{parse, print, ParseError, ProtocolSpec};
pub use term::{Binding, Sym, Term, Ty};
