pub mod exec;
pub mod dde;
pub mod criteria;
pub mod expr;
pub mod fraccalc;
pub mod quad;
pub mod scenarios;
pub mod serde_f64;
