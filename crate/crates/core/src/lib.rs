//! Thermodynamic formalism for self-affine iterated function systems.
//!
//! The crate computes, for finite and infinitely generated families of
//! contracting invertible matrices `(T_i)`:
//!
//! - the singular value function `φ^s` and partition sums
//!   `Z_n = Σ_{|ω|=n} φ^s(T_ω)` ([`linalg`], [`pressure`]);
//! - two-sided brackets for the sub-additive pressure `P(φ^s)` backed by a
//!   quasi-multiplicativity certificate, truncation ladders for infinite
//!   alphabets, and the finiteness threshold `s_∞` ([`pressure`]);
//! - entropy, Lyapunov exponents and dimensions of level-k Bernoulli
//!   measures plus Gibbs-weight diagnostics ([`measures`]);
//! - the multifractal spectrum of Birkhoff averages through a convex dual
//!   over `q ∈ ℝ^N` ([`spectrum`]);
//! - point clouds of the projected attractor ([`attractor`]).

pub mod attractor;
pub mod error;
pub mod ifs;
pub mod linalg;
pub mod measures;
pub mod pressure;
pub mod spectrum;
pub mod symbolic;

pub use error::{Error, Result};
