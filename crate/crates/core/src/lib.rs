//! Numerical toolkit for variational problems driven by families of Lipschitz
//! vector fields.

pub mod anisotropy;
pub mod cc;
pub mod checks;
pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod expr;
pub mod grid;
pub mod lagrangian;
pub mod pseudoinverse;
pub mod report;
pub mod suite;
pub mod zigzag;

pub use anisotropy::{Anisotropy, AnisotropyConfig, CatalogParams};
pub use domain::BoxDomain;
pub use error::{Error, Result};
pub use expr::Expr;
pub use lagrangian::{lift, project, pushforward, Lagrangian, LagrangianKind};
pub use pseudoinverse::{pinv, pinv_regularized, verify_penrose, PointLinearData};
pub use report::{CheckReport, Witness};
pub use zigzag::{zigzag_sequence, PiecewiseAffineFn, ZigZag};
pub use grid::{best_affine_fit, functional_eval, sobolev_norm, x_gradient, Grid, GridFunction};
pub use cc::{cc_distance, Distance, DistanceQuery, HorizontalGraph};
