//! Differential cost analysis of integer programs by simultaneous synthesis
//! of polynomial potential and anti-potential functions.

pub mod analysis;
pub mod constraints;
pub mod error;
pub mod handelman;
pub mod interval;
pub mod invariants;
pub mod linear;
pub mod lp;
pub mod oracle;
pub mod parse;
pub mod poly;
pub mod ts;
