//! Sparse symmetric positive definite solves.
//!
//! Two backends: Jacobi-preconditioned conjugate gradients (the default) and
//! an envelope (profile) Cholesky factorisation in natural pixel order. Both
//! are single-threaded with a fixed summation order, so repeated solves of
//! the same system are bit-identical.

use crate::constraints::LinearSystem;
use crate::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix from triplets sorted by `(row, col)`;
    /// duplicates are summed in the given order.
    pub fn from_sorted_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len() / 2);
        let mut values = Vec::with_capacity(triplets.len() / 2);
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in triplets {
            debug_assert!(i < n && j < n);
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                debug_assert!(last.is_none_or(|l| l < (i, j)), "triplets not sorted");
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Sparse copy of a dense square matrix, dropping exact zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let triplets: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                assert_eq!(r.len(), n, "matrix must be square");
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(move |(j, &v)| (i, j, v))
            })
            .collect();
        Self::from_sorted_triplets(n, &triplets)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// Exact (bitwise) symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i).to_bits() == v.to_bits()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Jacobi-preconditioned conjugate gradients.
    #[default]
    ConjugateGradient,
    /// Envelope Cholesky factorisation.
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Stop when `|Ax - b| <= cg_rel_residual * |b|`.
    pub cg_rel_residual: f64,
    /// Iteration cap; `None` means ten times the number of unknowns.
    pub cg_max_iters: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolveMethod::ConjugateGradient,
            cg_rel_residual: 1e-12,
            cg_max_iters: None,
        }
    }
}

impl SolveOptions {
    pub fn direct() -> Self {
        SolveOptions {
            method: SolveMethod::Direct,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.cg_rel_residual > 0.0) || self.cg_max_iters == Some(0) {
            return Err(Error::Domain(format!("invalid solve options {self:?}")));
        }
        Ok(())
    }
}

/// Convergence summary of an iterative solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    /// `|b - Ax| / |b|` recomputed from scratch at the returned `x`.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) {
    a.mul_vec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

fn check_system(a: &CsrMatrix, b: &[f64]) -> Result<()> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: (a.dim(), 1),
            actual: (b.len(), 1),
        });
    }
    Ok(())
}

/// Jacobi-preconditioned conjugate gradients from the initial guess `x0`.
///
/// Convergence is declared on the true residual `b - Ax`, recomputed when the
/// recurrence says the tolerance is met.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, CgStats)> {
    check_system(a, b)?;
    check_system(a, x0)?;
    let n = a.dim();
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::SingularSystem {
            unknown: i,
            pixel: None,
        });
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            CgStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let target = rel_tol * b_norm;

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    residual(a, b, &x, &mut r);
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut true_norm = norm(&r);
    let mut iterations = 0;

    while true_norm > target {
        if iterations == max_iters {
            return Err(Error::ConvergenceFailure {
                iterations,
                residual: true_norm / b_norm,
            });
        }
        iterations += 1;
        a.mul_vec_into(&p, &mut q);
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            let worst = (0..n)
                .max_by(|&i, &j| p[i].abs().total_cmp(&p[j].abs()))
                .unwrap_or(0);
            return Err(Error::SingularSystem {
                unknown: worst,
                pixel: None,
            });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if norm(&r) <= target {
            residual(a, b, &x, &mut r);
            true_norm = norm(&r);
            if true_norm <= target {
                break;
            }
            // Recurrence drifted: restart from the true residual.
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok((
        x,
        CgStats {
            iterations,
            relative_residual: true_norm / b_norm,
        },
    ))
}

/// Lower-triangular Cholesky factor stored by rows, each row spanning from
/// its first structural nonzero to the diagonal.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Relative pivot floor below which the matrix is reported singular.
    const PIVOT_FLOOR: f64 = 64.0 * f64::EPSILON;

    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(i).map(|(j, _)| j).next().map_or(i, |j| j.min(i)))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; start[n]];
        for i in 0..n {
            let (fi, si) = (first[i], start[i]);
            for (j, v) in a.row(i).take_while(|&(j, _)| j <= i) {
                values[si + j - fi] = v;
            }
            for j in fi..i {
                let (fj, sj) = (first[j], start[j]);
                let k0 = fi.max(fj);
                let mut s = values[si + j - fi];
                for k in k0..j {
                    s -= values[si + k - fi] * values[sj + k - fj];
                }
                values[si + j - fi] = s / values[sj + j - fj];
            }
            let a_ii = values[si + i - fi];
            let mut d = a_ii;
            for k in fi..i {
                let l = values[si + k - fi];
                d -= l * l;
            }
            if !(d > Self::PIVOT_FLOOR * a_ii.abs()) || !(a_ii > 0.0) {
                return Err(Error::SingularSystem {
                    unknown: i,
                    pixel: None,
                });
            }
            values[si + i - fi] = d.sqrt();
        }
        Ok(EnvelopeCholesky {
            first,
            start,
            values,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.first.len();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // L y = b
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            let mut s = x[i];
            for k in fi..i {
                s -= self.values[si + k - fi] * x[k];
            }
            x[i] = s / self.values[si + i - fi];
        }
        // L^T x = y
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            x[i] /= self.values[si + i - fi];
            let xi = x[i];
            for k in fi..i {
                x[k] -= self.values[si + k - fi] * xi;
            }
        }
        x
    }

    /// Stored entries, including explicit zeros inside the envelope.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }
}

/// Solves `A x = b` for symmetric positive definite `A`, starting CG at zero.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    solve_spd_from(a, b, &vec![0.0; a.dim()], opts)
}

/// As [`solve_spd`] with an explicit CG initial guess (ignored by the direct
/// method).
pub fn solve_spd_from(a: &CsrMatrix, b: &[f64], x0: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    opts.check()?;
    check_system(a, b)?;
    match opts.method {
        SolveMethod::ConjugateGradient => {
            let max_iters = opts.cg_max_iters.unwrap_or(10 * a.dim().max(1));
            conjugate_gradient(a, b, x0, opts.cg_rel_residual, max_iters).map(|(x, _)| x)
        }
        SolveMethod::Direct => Ok(EnvelopeCholesky::factor(a)?.solve(b)),
    }
}

/// Assembles and solves a row system, returning the minimiser of its energy.
///
/// Components of the pixel graph without any absolute (single-unknown) row
/// are rejected up front as singular.
pub fn solve_rows(sys: &LinearSystem, opts: &SolveOptions, x0: Option<&[f64]>) -> Result<Vec<f64>> {
    let width = sys.dims().0;
    let with_pixel = |e: Error| match e {
        Error::SingularSystem { unknown, .. } => Error::SingularSystem {
            unknown,
            pixel: Some((unknown % width, unknown / width)),
        },
        other => other,
    };
    if sys.rows().is_empty() {
        return Err(Error::EmptySystem);
    }
    if let Some(i) = sys.unanchored_unknown() {
        return Err(with_pixel(Error::SingularSystem {
            unknown: i,
            pixel: None,
        }));
    }
    let assembled = sys.assemble()?;
    let zeros;
    let x0 = match x0 {
        Some(x) => x,
        None => {
            zeros = vec![0.0; sys.n_unknowns()];
            &zeros
        }
    };
    solve_spd_from(&assembled.matrix, &assembled.rhs, x0, opts).map_err(with_pixel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::LinearRow;
    use approx::assert_relative_eq;

    fn both() -> [SolveOptions; 2] {
        [SolveOptions::default(), SolveOptions::direct()]
    }

    #[test]
    fn identity_and_diagonal() {
        let eye = CsrMatrix::from_dense(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let diag = CsrMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        for opts in both() {
            let x = solve_spd(&eye, &[1.0, 2.0, 3.0], &opts).unwrap();
            assert!(x.iter().zip([1.0, 2.0, 3.0]).all(|(a, b)| (a - b).abs() < 1e-14), "{x:?}");
            let x = solve_spd(&diag, &[2.0, 4.0], &opts).unwrap();
            assert!(x.iter().all(|a| (a - 1.0).abs() < 1e-14), "{x:?}");
        }
    }

    #[test]
    fn tridiagonal_two_by_two() {
        let a = CsrMatrix::from_dense(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        for opts in both() {
            let x = solve_spd(&a, &[1.0, 1.0], &opts).unwrap();
            assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
            assert_relative_eq!(x[1], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn indefinite_and_singular_are_detected() {
        let indefinite = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let singular = CsrMatrix::from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let zero_diag = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        for opts in both() {
            assert!(matches!(
                solve_spd(&indefinite, &[1.0, 0.0], &opts),
                Err(Error::SingularSystem { .. })
            ));
            assert!(matches!(
                solve_spd(&zero_diag, &[1.0, 0.0], &opts),
                Err(Error::SingularSystem { unknown: 1, .. })
            ));
        }
        assert!(matches!(
            solve_spd(&singular, &[1.0, 0.0], &SolveOptions::direct()),
            Err(Error::SingularSystem { unknown: 1, .. })
        ));
    }

    #[test]
    fn convergence_failure_reports_residual() {
        let n = 50;
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|i: usize| {
                (0..n)
                    .map(|j| match i.abs_diff(j) {
                        0 => 2.0 + 1e-3,
                        1 => -1.0,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        let a = CsrMatrix::from_dense(&dense);
        let opts = SolveOptions {
            cg_max_iters: Some(2),
            ..SolveOptions::default()
        };
        match solve_spd(&a, &vec![1.0; n], &opts) {
            Err(Error::ConvergenceFailure { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-10);
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn rows_least_squares() {
        let data = |p: usize, d: f64, w: f64| LinearRow {
            entries: vec![(p, 1.0)],
            rhs: d,
            weight: w,
        };
        let mut sys = LinearSystem::new(1, 1);
        sys.push_row(data(0, 2.0, 1.0)).unwrap();
        assert_eq!(solve_rows(&sys, &SolveOptions::default(), None).unwrap(), vec![2.0]);

        sys.push_row(data(0, 1.0, 1.0)).unwrap();
        sys.push_row(data(0, 3.0, 1.0)).unwrap();
        let x = solve_rows(&sys, &SolveOptions::default(), None).unwrap();
        // Rows 2, 1, 3 average to 2.
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-12);

        let mut sys = LinearSystem::new(2, 1);
        sys.push_row(data(0, 1.0, 1.0)).unwrap();
        sys.push_row(data(0, 3.0, 1.0)).unwrap();
        sys.add_smoothness_rows(1.0);
        let x = solve_rows(&sys, &SolveOptions::direct(), None).unwrap();
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn unanchored_rows_name_the_pixel() {
        let mut sys = LinearSystem::new(3, 2);
        sys.add_smoothness_rows(1.0);
        match solve_rows(&sys, &SolveOptions::default(), None) {
            Err(Error::SingularSystem { unknown: 0, pixel: Some((0, 0)) }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            solve_rows(&LinearSystem::new(2, 2), &SolveOptions::default(), None),
            Err(Error::EmptySystem)
        ));
    }

    #[test]
    fn csr_basics() {
        let a = CsrMatrix::from_sorted_triplets(3, &[(0, 0, 1.0), (0, 0, 2.0), (0, 2, 5.0), (2, 0, 5.0), (2, 2, 1.0)]);
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.diagonal(), vec![3.0, 0.0, 1.0]);
        assert!(a.is_symmetric());
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![8.0, 0.0, 6.0]);
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let mut sys = LinearSystem::new(8, 8);
        sys.add_smoothness_rows(1.0);
        sys.add_anchor_row((3, 4), 2.0, 10.0).unwrap();
        sys.add_anchor_row((0, 0), 1.0, 10.0).unwrap();
        let a = solve_rows(&sys, &SolveOptions::default(), None).unwrap();
        let b = solve_rows(&sys, &SolveOptions::default(), None).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
