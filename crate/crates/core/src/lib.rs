//! Partial linear additive models.
//!
//! The library fits generalized additive models whose smooth terms are cubic
//! regression splines, augments them with linearly entering pairwise
//! interactions, and selects those interactions on double residuals (both the
//! target and each candidate are first residualized on the additive part).
//! Selection is done either by (adaptive) lasso with cross-validated tuning or
//! by a general-to-specific search with a target size.
//!
//! Around that core sit the comparison models (augmented OLS, CART, random
//! forest, gradient boosting, penalized logistic tree regression), the
//! evaluation statistics (k-fold CV, MSE, AUC, DeLong test, model confidence
//! set, potency and gauge) and a Monte Carlo harness for the four simulation
//! designs.
//!
//! Data-parallel loops (first-stage fits, forest trees, CV folds, bootstrap
//! draws, Monte Carlo replications) run on rayon when the `parallel` feature is
//! enabled (the default) and sequentially otherwise.

pub mod baselines;
pub mod basis;
pub mod data;
pub mod design;
pub mod error;
pub mod evaluation;
pub mod gam;
pub mod gamla;
pub mod linalg;
pub mod models;
pub mod par;
pub mod persist;

pub mod rng;
pub mod selection;
pub mod simulation;

pub use data::{ColumnKind, Dataset};
pub use error::{Error, Result};
pub use gam::{AdditiveModel, Family, GamConfig};
pub use gamla::PartialLinearModel;
pub use models::{FittedModel, ModelSpec};
