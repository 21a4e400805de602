//! Exact symbolic engine for local conservation laws of differential
//! equation systems.
//!
//! The engine computes, generates, and verifies conservation laws through
//! three interlocking routes:
//!
//! - the **pair formula**: a symmetry characteristic `P` and an
//!   adjoint-symmetry `Q` combine through the Fréchet-derivative boundary
//!   identity into a conserved current `Psi(P,Q;F)` with multiplier
//!   `R_P*(Q) - R_Q*(P)`;
//! - **multiplier determining systems**: multipliers are adjoint-symmetries
//!   satisfying Helmholtz-type conditions, generated here by coefficient
//!   splitting with slack-variable bookkeeping;
//! - the **extended-Lagrangian construction**: the system is embedded into
//!   the Euler-Lagrange equations of `L = v.F`, symmetries extend to
//!   variational symmetries of the enlarged system, and the Noether current
//!   of the extension reproduces the pair formula exactly under `v -> Q`.
//!
//! All coefficients are exact rationals and every verdict is an exact
//! zero-test of a normalized expression; there is no floating point
//! anywhere in the kernel.

pub mod conslaw;
pub mod corpus;
pub mod desystem;
pub mod expr;
pub mod ibragimov;
pub mod jet;
pub mod variational;

pub mod cli;
