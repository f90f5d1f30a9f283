//! Sparse direct solves with residual verification.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use serde::{Deserialize, Serialize};

use super::operator::C64;
use crate::error::{Error, Result};

/// Bound on `‖Ax − b‖ / ‖b‖` accepted from any solve.
pub const RESIDUAL_LIMIT: f64 = 1e-8;
/// Residual below which iterative refinement stops.
const REFINE_TARGET: f64 = 1e-12;
const MAX_REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub unknowns: usize,
    pub relative_residual: f64,
    pub refinement_steps: usize,
}

pub(crate) type SparseMatrix = SparseColMat<usize, C64>;

/// Builds a CSC matrix; duplicate entries are summed.
pub(crate) fn from_triplets(
    n: usize,
    triplets: &[Triplet<usize, usize, C64>],
) -> Result<SparseMatrix> {
    SparseColMat::try_new_from_triplets(n, n, triplets)
        .map_err(|e| Error::Assembly(format!("sparse matrix construction failed: {e:?}")))
}

pub(crate) fn matvec(a: &SparseMatrix, x: &[C64]) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); a.nrows()];
    let col_ptr = a.symbolic().col_ptr();
    let row_idx = a.symbolic().row_idx();
    let vals = a.val();
    for (j, &xj) in x.iter().enumerate() {
        for k in col_ptr[j]..col_ptr[j + 1] {
            y[row_idx[k]] += vals[k] * xj;
        }
    }
    y
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `b − A x`.
pub(crate) fn residual(a: &SparseMatrix, x: &[C64], b: &[C64]) -> Vec<C64> {
    let ax = matvec(a, x);
    b.iter().zip(ax).map(|(bi, axi)| bi - axi).collect()
}

pub(crate) fn relative(r: &[C64], b: &[C64]) -> f64 {
    let nb = norm(b);
    if nb == 0.0 {
        norm(r)
    } else {
        norm(r) / nb
    }
}

/// LU factorisation of a square sparse matrix.
pub(crate) struct SparseLu {
    lu: Lu<usize, C64>,
    n: usize,
}

impl SparseLu {
    pub fn symbolic(a: &SparseMatrix) -> Result<SymbolicLu<usize>> {
        SymbolicLu::try_new(a.symbolic())
            .map_err(|e| Error::Assembly(format!("symbolic factorisation failed: {e:?}")))
    }

    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        Self::factor_with(a, Self::symbolic(a)?)
    }

    /// Numeric factorisation reusing an analysis of the same pattern.
    pub fn factor_with(a: &SparseMatrix, symbolic: SymbolicLu<usize>) -> Result<Self> {
        let lu = Lu::try_new_with_symbolic(symbolic, a.as_ref())
            .map_err(|e| Error::Assembly(format!("numeric factorisation failed: {e:?}")))?;
        Ok(SparseLu { lu, n: a.nrows() })
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves for every column of `rhs` in place.
    pub fn solve_many(&self, rhs: &mut Mat<C64>) {
        self.lu.solve_in_place(rhs.as_mut());
    }
}

/// Solves `A x = b` and refines until the residual meets the bound.
pub(crate) fn solve_checked(
    a: &SparseMatrix,
    lu: &SparseLu,
    b: &[C64],
) -> Result<(Vec<C64>, SolveReport)> {
    let mut x = lu.solve(b);
    let mut r = residual(a, &x, b);
    let mut rel = relative(&r, b);
    let mut steps = 0;
    while rel > REFINE_TARGET && steps < MAX_REFINEMENT_STEPS {
        let dx = lu.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        r = residual(a, &x, b);
        rel = relative(&r, b);
        steps += 1;
    }
    if !rel.is_finite() || rel > RESIDUAL_LIMIT {
        return Err(Error::Solver {
            residual: rel,
            limit: RESIDUAL_LIMIT,
        });
    }
    Ok((
        x,
        SolveReport {
            unknowns: b.len(),
            relative_residual: rel,
            refinement_steps: steps,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_triplets_are_summed() {
        let t = [
            Triplet::new(0, 0, C64::new(1.0, 0.0)),
            Triplet::new(0, 0, C64::new(2.0, 0.0)),
            Triplet::new(1, 1, C64::new(0.0, 4.0)),
            Triplet::new(0, 1, C64::new(1.0, 0.0)),
        ];
        let a = from_triplets(2, &t).unwrap();
        let y = matvec(&a, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert_eq!(y[0], C64::new(4.0, 0.0));
        assert_eq!(y[1], C64::new(0.0, 4.0));
    }

    #[test]
    fn small_complex_system_round_trips() {
        let t = [
            Triplet::new(0, 0, C64::new(2.0, 1.0)),
            Triplet::new(0, 1, C64::new(-1.0, 0.0)),
            Triplet::new(1, 0, C64::new(-1.0, 0.0)),
            Triplet::new(1, 1, C64::new(2.0, -0.5)),
        ];
        let a = from_triplets(2, &t).unwrap();
        let lu = SparseLu::factor(&a).unwrap();
        let b = [C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        let (x, report) = solve_checked(&a, &lu, &b).unwrap();
        assert!(report.relative_residual < 1e-14);
        assert!(relative(&residual(&a, &x, &b), &b) < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let t = [
            Triplet::new(0, 0, C64::new(1.0, 0.0)),
            Triplet::new(0, 1, C64::new(1.0, 0.0)),
            Triplet::new(1, 0, C64::new(1.0, 0.0)),
            Triplet::new(1, 1, C64::new(1.0, 0.0)),
        ];
        let a = from_triplets(2, &t).unwrap();
        let outcome = SparseLu::factor(&a)
            .and_then(|lu| solve_checked(&a, &lu, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]));
        assert!(outcome.is_err());
    }
}
