//! Bohm-style guided worldlines for Klein-Gordon plane-wave superpositions.

pub mod quadrature;
pub mod wavefield;
pub mod packet;
pub mod trajectory;
pub mod analysis;
pub mod cli;
