//! Oriented PL chains, intersection and linking numbers, and the
//! orientation sign rules.

pub mod chain;
pub mod orient;
pub mod signs;
