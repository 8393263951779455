//! Comparison models: least squares on raw or augmented designs, CART, random
//! forests, gradient boosting and penalized logistic tree regression.

pub mod ensemble;
pub mod linear;
pub mod logistic;
pub mod pltr;
pub mod tree;

pub use ensemble::{
    fit_gradient_boosting, fit_random_forest, BoostingConfig, EnsembleKind, EnsembleModel, ForestConfig, Loss,
};
pub use linear::{augment, fit_ols, fit_ols_matrix, AugmentedDesign, LinearModel};
pub use pltr::{fit_pltr, DeepLeaf, PltrConfig, PltrModel};
pub use tree::{fit_tree, Task, Tree, TreeConfig, TreeModel};

use crate::data::{DataError, Dataset};

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("{n} rows cannot identify {columns} coefficients")]
    TooFewRows { n: usize, columns: usize },
    #[error("normal equations are singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("target must be binary")]
    NotBinary,
    #[error("at least two variables are required")]
    TooFewVariables,
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Names and values of the active feature columns.
pub fn feature_columns(data: &Dataset) -> (Vec<String>, Vec<Vec<f64>>) {
    data.active_features()
        .into_iter()
        .map(|c| (data.name(c).to_string(), data.column(c).to_vec()))
        .unzip()
}

/// Columns of `data` in the order of `names`.
pub fn columns_for(data: &Dataset, names: &[String]) -> Result<Vec<Vec<f64>>, BaselineError> {
    Ok(data
        .resolve(names)?
        .into_iter()
        .map(|c| data.column(c).to_vec())
        .collect())
}

pub fn task_of(data: &Dataset) -> Task {
    if data.target_is_binary() {
        Task::Classification
    } else {
        Task::Regression
    }
}
