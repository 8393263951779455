//! Linear terms: products of powers of named columns.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, DataError, Dataset};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Factor {
    pub column: String,
    pub power: u32,
}

/// A single regressor such as `Rm`, `Lstat^2` or `Lstat:Rm`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term {
    pub factors: Vec<Factor>,
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::power(name, 1)
    }

    pub fn power(name: &str, power: u32) -> Self {
        Term {
            factors: vec![Factor {
                column: name.to_string(),
                power,
            }],
        }
    }

    pub fn pair(a: &str, b: &str) -> Self {
        Term {
            factors: vec![
                Factor {
                    column: a.to_string(),
                    power: 1,
                },
                Factor {
                    column: b.to_string(),
                    power: 1,
                },
            ],
        }
    }

    /// The two columns of a pairwise interaction.
    pub fn as_pair(&self) -> Option<(&str, &str)> {
        match self.factors.as_slice() {
            [a, b] if a.power == 1 && b.power == 1 => Some((&a.column, &b.column)),
            _ => None,
        }
    }

    /// The column of a plain first-power term.
    pub fn as_var(&self) -> Option<&str> {
        match self.factors.as_slice() {
            [a] if a.power == 1 => Some(&a.column),
            _ => None,
        }
    }

    pub fn involves(&self, column: &str) -> bool {
        self.factors.iter().any(|f| f.column == column)
    }

    pub fn evaluate(&self, data: &Dataset) -> Result<Vec<f64>, DataError> {
        let mut out = vec![1.0; data.n_rows()];
        for f in &self.factors {
            let idx = data
                .index_of(&f.column)
                .ok_or_else(|| DataError::SchemaMismatch(format!("missing column `{}`", f.column)))?;
            let col = data.column(idx);
            for (o, v) in out.iter_mut().zip(col) {
                *o *= v.powi(f.power as i32);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, factor) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, ":")?;
            }
            if factor.power == 1 {
                write!(f, "{}", factor.column)?;
            } else {
                write!(f, "{}^{}", factor.column, factor.power)?;
            }
        }
        Ok(())
    }
}

pub fn term_matrix(terms: &[Term], data: &Dataset) -> Result<DMatrix<f64>, DataError> {
    let n = data.n_rows();
    let mut m = DMatrix::zeros(n, terms.len());
    for (j, t) in terms.iter().enumerate() {
        let v = t.evaluate(data)?;
        m.column_mut(j).copy_from_slice(&v);
    }
    Ok(m)
}

/// All pairwise products of the given columns, in lexicographic order of the
/// column positions.
pub fn pairwise_terms(data: &Dataset, columns: &[usize]) -> Vec<Term> {
    let mut out = Vec::new();
    for (a, &i) in columns.iter().enumerate() {
        for &j in &columns[a + 1..] {
            out.push(Term::pair(data.name(i), data.name(j)));
        }
    }
    out
}

/// Augmented polynomial design: every active feature, squares and cubes of
/// continuous features, then all pairwise interactions.
pub fn augmented_terms(data: &Dataset, powers: u32, interactions: bool) -> Vec<Term> {
    let active = data.active_features();
    let mut out: Vec<Term> = active.iter().map(|&c| Term::var(data.name(c))).collect();
    for p in 2..=powers {
        for &c in &active {
            if data.kind(c) == ColumnKind::Continuous {
                out.push(Term::power(data.name(c), p));
            }
        }
    }
    if interactions {
        out.extend(pairwise_terms(data, &active));
    }
    out
}
