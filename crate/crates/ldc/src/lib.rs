//! Multilevel finite element discretizations based on local defect-correction
//! for nonsymmetric second-order elliptic eigenproblems on singular 2-D
//! polygonal domains.
//!
//! The pipeline: solve the generalized eigenproblem `a(u,v) = λ b(u,v)` on a
//! coarse grid (primal and adjoint), correct it with one linear solve on a
//! globally mesoscopic grid, then repeatedly solve residual equations on
//! nested, locally refined subdomain grids around the singular point (and,
//! in the parallel variant, on boundary layers). Eigenvalues are recovered
//! with the generalized Rayleigh quotient `a(u,u*)/b(u,u*)` evaluated
//! exactly over a composite partition.

// index loops over small coefficient matrices mirror the math notation
#![allow(clippy::needless_range_loop)]

pub mod composite;
pub mod eigen;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod scheme;
pub mod sparse;

pub use composite::CompositeFunction;
pub use error::{Error, Result};
pub use fem::{FeFunction, ProblemCoeffs};
pub use mesh::{build_mesh, DomainSpec, Mesh, SubdomainKind, SubdomainSpec};
pub use scheme::{
    plan_parallel_schedule, plan_schedule, reference_lambda, run, Frac, RunReport, SchemeConfig,
    SchemeMode,
};
