//! Cubic B-spline smoothing basis with an exact curvature penalty.
//!
//! Knots sit at quantiles of the distinct training values with the boundary
//! knots at the data range. Outside that range the basis continues along the
//! tangent line of the boundary, so fitted curves extrapolate linearly.
//!
//! B-splines sum to one, so the column-centred design has rank `dim - 1`.
//! Fitting therefore works in a reduced parametrization `theta = C beta`,
//! where `C` spans the coefficient vectors orthogonal to the all-ones vector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub const DEFAULT_DIM: usize = 6;

/// Penalized systems with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BasisError {
    #[error("{distinct} distinct values, at least {required} needed for a smooth term")]
    TooFewDistinctValues { distinct: usize, required: usize },
    #[error("basis dimension {0} is below the minimum of 4")]
    InvalidDim(usize),
    #[error("penalized normal matrix is numerically singular (condition {condition:.3e})")]
    SingularSystem { condition: f64 },
    #[error("non-finite input value")]
    NonFinite,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "BasisRepr", into = "BasisRepr")]
pub struct SplineBasis {
    dim: usize,
    /// Distinct knots, boundary included (`dim - 2` of them).
    knots: Vec<f64>,
    /// Training means of the raw basis columns.
    centering: Vec<f64>,
    /// Clamped knot vector of length `dim + 4`.
    t: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BasisRepr {
    dim: usize,
    knots: Vec<f64>,
    centering: Vec<f64>,
}

impl From<BasisRepr> for SplineBasis {
    fn from(r: BasisRepr) -> Self {
        SplineBasis::from_parts(r.knots, r.centering)
    }
}

impl From<SplineBasis> for BasisRepr {
    fn from(b: SplineBasis) -> Self {
        BasisRepr {
            dim: b.dim,
            knots: b.knots,
            centering: b.centering,
        }
    }
}

fn clamped(knots: &[f64]) -> Vec<f64> {
    let lo = knots[0];
    let hi = *knots.last().unwrap();
    let mut t = vec![lo; 3];
    t.extend_from_slice(knots);
    t.extend([hi; 3]);
    t
}

#[inline]
fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Builds the basis from training values and returns it with the centred
/// `n x dim` design block.
pub fn build_cubic_basis(x: &[f64], dim: usize) -> Result<(SplineBasis, DMatrix<f64>), BasisError> {
    let basis = SplineBasis::fit(x, dim)?;
    let design = basis.design(x);
    Ok((basis, design))
}

impl SplineBasis {
    pub fn fit(x: &[f64], dim: usize) -> Result<Self, BasisError> {
        if dim < 4 {
            return Err(BasisError::InvalidDim(dim));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BasisError::NonFinite);
        }
        let mut uniq = x.to_vec();
        uniq.sort_by(|a, b| a.total_cmp(b));
        uniq.dedup();
        if uniq.len() < dim + 2 {
            return Err(BasisError::TooFewDistinctValues {
                distinct: uniq.len(),
                required: dim + 2,
            });
        }
        let segments = dim - 3;
        let knots: Vec<f64> = (0..=segments)
            .map(|i| crate::linalg::quantile_sorted(&uniq, i as f64 / segments as f64))
            .collect();
        let mut basis = SplineBasis::from_parts(knots, vec![0.0; dim]);
        let raw = basis.raw_design(x);
        let n = x.len() as f64;
        basis.centering = (0..dim).map(|j| raw.column(j).sum() / n).collect();
        Ok(basis)
    }

    pub fn from_parts(knots: Vec<f64>, centering: Vec<f64>) -> Self {
        let dim = knots.len() + 2;
        assert_eq!(centering.len(), dim, "centering length must equal dim");
        let t = clamped(&knots);
        SplineBasis {
            dim,
            knots,
            centering,
            t,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn centering(&self) -> &[f64] {
        &self.centering
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    fn span(&self, x: f64) -> usize {
        let hi = self.dim - 1;
        if x >= self.t[hi + 1] {
            return hi;
        }
        // largest i in [3, hi] with t[i] <= x
        let mut lo = 3;
        let mut up = hi;
        while lo < up {
            let mid = (lo + up).div_ceil(2);
            if self.t[mid] <= x {
                lo = mid;
            } else {
                up = mid - 1;
            }
        }
        lo
    }

    /// Raw basis values (or first/second derivatives) at a point inside the
    /// knot range.
    fn inside(&self, x: f64, deriv: usize, out: &mut [f64]) {
        let t = &self.t;
        let d = self.dim;
        let s = self.span(x);
        let mut n0 = vec![0.0; d + 3];
        n0[s] = 1.0;
        let step = |prev: &[f64], k: usize| -> Vec<f64> {
            (0..prev.len() - 1)
                .map(|i| {
                    ratio(x - t[i], t[i + k] - t[i]) * prev[i]
                        + ratio(t[i + k + 1] - x, t[i + k + 1] - t[i + 1]) * prev[i + 1]
                })
                .collect()
        };
        let n1 = step(&n0, 1);
        let n2 = step(&n1, 2);
        match deriv {
            0 => {
                let n3 = step(&n2, 3);
                out.copy_from_slice(&n3);
            }
            1 => {
                for i in 0..d {
                    out[i] = 3.0
                        * (ratio(n2[i], t[i + 3] - t[i]) - ratio(n2[i + 1], t[i + 4] - t[i + 1]));
                }
            }
            _ => {
                let dn2: Vec<f64> = (0..d + 1)
                    .map(|i| {
                        2.0 * (ratio(n1[i], t[i + 2] - t[i])
                            - ratio(n1[i + 1], t[i + 3] - t[i + 1]))
                    })
                    .collect();
                for i in 0..d {
                    out[i] = 3.0
                        * (ratio(dn2[i], t[i + 3] - t[i])
                            - ratio(dn2[i + 1], t[i + 4] - t[i + 1]));
                }
            }
        }
    }

    /// Raw (uncentred) basis values or derivatives, with linear continuation
    /// outside the knot range.
    pub fn raw_at(&self, x: f64, deriv: usize, out: &mut [f64]) {
        let (lo, hi) = self.range();
        let edge = if x < lo {
            Some(lo)
        } else if x > hi {
            Some(hi)
        } else {
            None
        };
        match (edge, deriv) {
            (None, _) => self.inside(x, deriv, out),
            (Some(_), 2..) => out.iter_mut().for_each(|v| *v = 0.0),
            (Some(b), 1) => self.inside(b, 1, out),
            (Some(b), _) => {
                let mut slope = vec![0.0; self.dim];
                self.inside(b, 0, out);
                self.inside(b, 1, &mut slope);
                for (o, s) in out.iter_mut().zip(&slope) {
                    *o += s * (x - b);
                }
            }
        }
    }

    pub fn raw_design(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(x.len(), self.dim);
        let mut row = vec![0.0; self.dim];
        for (i, &xi) in x.iter().enumerate() {
            self.raw_at(xi, 0, &mut row);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    /// Centred `n x dim` design block.
    pub fn design(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.raw_design(x);
        for (j, c) in self.centering.iter().enumerate() {
            m.column_mut(j).add_scalar_mut(-c);
        }
        m
    }

    /// `dim x (dim - 1)` orthonormal basis of the complement of the ones vector
    /// (trailing columns of a Householder reflector).
    pub fn constraint(&self) -> DMatrix<f64> {
        constraint_matrix(self.dim)
    }

    /// Full-rank `n x (dim - 1)` design used for fitting.
    pub fn reduced_design(&self, x: &[f64]) -> DMatrix<f64> {
        self.design(x) * self.constraint()
    }

    pub fn reduced_penalty(&self) -> DMatrix<f64> {
        let c = self.constraint();
        c.transpose() * penalty_matrix(self) * c
    }

    /// Maps reduced coefficients to full-length coefficients.
    pub fn expand(&self, beta: &[f64]) -> Vec<f64> {
        let theta = self.constraint() * DVector::from_column_slice(beta);
        theta.as_slice().to_vec()
    }

    /// Value of the centred smooth `sum theta_l (B_l(x) - c_l)`.
    pub fn eval(&self, theta: &[f64], x: f64) -> f64 {
        let mut row = vec![0.0; self.dim];
        self.raw_at(x, 0, &mut row);
        row.iter()
            .zip(&self.centering)
            .zip(theta)
            .map(|((b, c), t)| (b - c) * t)
            .sum()
    }

    pub fn eval_many(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let mut row = vec![0.0; self.dim];
        let offset: f64 = self.centering.iter().zip(theta).map(|(c, t)| c * t).sum();
        x.iter()
            .map(|&xi| {
                self.raw_at(xi, 0, &mut row);
                crate::linalg::dot(&row, theta) - offset
            })
            .collect()
    }

    /// First or second derivative of the smooth.
    pub fn derivative(&self, theta: &[f64], x: f64, order: usize) -> f64 {
        assert!(order == 1 || order == 2, "derivative order must be 1 or 2");
        let mut row = vec![0.0; self.dim];
        self.raw_at(x, order, &mut row);
        crate::linalg::dot(&row, theta)
    }

    /// Greville abscissae: coefficients equal to `a + b * greville` reproduce
    /// the line `a + b x`.
    pub fn greville(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (self.t[i + 1] + self.t[i + 2] + self.t[i + 3]) / 3.0)
            .collect()
    }
}

pub fn constraint_matrix(dim: usize) -> DMatrix<f64> {
    let mut v = DVector::from_element(dim, 1.0);
    v[0] += (dim as f64).sqrt();
    let vv = v.dot(&v);
    let h = DMatrix::identity(dim, dim) - (&v * v.transpose()) * (2.0 / vv);
    h.columns(1, dim - 1).into_owned()
}

/// `S_ij = integral of B_i'' B_j''` over the knot range. The second derivatives
/// are linear on each knot interval, so two-point Gauss-Legendre is exact.
pub fn penalty_matrix(basis: &SplineBasis) -> DMatrix<f64> {
    let d = basis.dim;
    let mut s = DMatrix::zeros(d, d);
    let mut b2 = vec![0.0; d];
    let off = 0.5 / 3f64.sqrt();
    for w in basis.knots.windows(2) {
        let h = w[1] - w[0];
        let mid = 0.5 * (w[0] + w[1]);
        for x in [mid - off * h, mid + off * h] {
            basis.inside(x, 2, &mut b2);
            for i in 0..d {
                if b2[i] == 0.0 {
                    continue;
                }
                for j in 0..d {
                    s[(i, j)] += 0.5 * h * b2[i] * b2[j];
                }
            }
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct PenalizedFit {
    pub coefficients: Vec<f64>,
    pub edf: f64,
    pub hat_diag: Vec<f64>,
}

/// Minimizes `|y - X theta|^2 + psi theta' S theta`.
pub fn penalized_ls(
    design: &DMatrix<f64>,
    penalty: &DMatrix<f64>,
    y: &[f64],
    psi: f64,
) -> Result<PenalizedFit, BasisError> {
    assert!(psi >= 0.0, "psi must be non-negative");
    let xtx = crate::linalg::gram(design);
    let a = &xtx + penalty * psi;
    let eig = SymmetricEigen::new(a.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(BasisError::SingularSystem { condition });
    }
    let chol = nalgebra::Cholesky::new(a).ok_or(BasisError::SingularSystem { condition })?;
    let xty = design.tr_mul(&DVector::from_column_slice(y));
    let theta = chol.solve(&xty);
    let a_inv_xt = chol.solve(&design.transpose());
    let hat_diag: Vec<f64> = (0..design.nrows())
        .map(|i| design.row(i).dot(&a_inv_xt.column(i).transpose()))
        .collect();
    let edf = hat_diag.iter().sum();
    Ok(PenalizedFit {
        coefficients: theta.as_slice().to_vec(),
        edf,
        hat_diag,
    })
}
