//! Slow, obviously-correct reference implementations used to validate the
//! `lsssc` crate from the outside. Nothing here shares code with the main
//! crate: the lasso oracle enumerates support sign patterns, the basis
//! pursuit oracle runs a dense two-phase simplex, and the inradius oracles
//! sweep unit directions. Everything favors transparency over speed and is
//! meant for test harnesses only.

pub mod lasso;
pub mod lp;
pub mod sweep;
