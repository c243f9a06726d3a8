//! Weighted least-squares rows over per-pixel depth unknowns.
//!
//! Every pixel of a `width x height` grid is one unknown, holes and observed
//! pixels alike. Each energy term contributes rows `w * (r . x - rhs)^2`; the
//! rows are assembled into normal equations `A x = b` with
//! `A = sum w r^T r` and `b = sum w rhs r`.
//!
//! Rows are appended in a fixed order (row-major pixel order, then neighbour
//! order) and assembled sequentially, so the same inputs always give
//! bit-identical systems.

use crate::geometry::CameraIntrinsics;
use crate::image::{check_dims, neighbor, BoundaryMap, DepthImage, DerivativeMap, Direction, NormalMap, UNIT_NORM_TOLERANCE};
use crate::solver::CsrMatrix;
use crate::{Error, Result};

/// 4-neighbour offsets used by the normal term.
const NEIGHBORS_4: [(isize, isize); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// One weighted squared residual `weight * (sum coeff * x[index] - rhs)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub entries: Vec<(usize, f64)>,
    pub rhs: f64,
    pub weight: f64,
}

impl LinearRow {
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, c)| c * x[i]).sum::<f64>() - self.rhs
    }
}

/// Multiplier applied to normal-type rows at a pixel with boundary
/// probability `b`: `(1 - b)^2`, with `b` clamped to `[0, 1]`.
pub fn boundary_weight(b: f64) -> f64 {
    let keep = 1.0 - b.clamp(0.0, 1.0);
    keep * keep
}

/// Normal equations of a [`LinearSystem`].
#[derive(Clone, Debug, PartialEq)]
pub struct Assembled {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// `sum w * rhs^2`, so that `x^T A x - 2 b^T x + constant` is the energy.
    pub constant: f64,
}

impl Assembled {
    /// Energy at `x` evaluated through the quadratic form.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        let xax: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let bx: f64 = self.rhs.iter().zip(x).map(|(a, b)| a * b).sum();
        xax - 2.0 * bx + self.constant
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    width: usize,
    height: usize,
    rows: Vec<LinearRow>,
}

impl LinearSystem {
    pub fn new(width: usize, height: usize) -> Self {
        LinearSystem {
            width,
            height,
            rows: Vec::new(),
        }
    }

    pub fn n_unknowns(&self) -> usize {
        self.width * self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn rows(&self) -> &[LinearRow] {
        &self.rows
    }

    /// Appends an arbitrary row after checking its invariants.
    pub fn push_row(&mut self, row: LinearRow) -> Result<()> {
        if row.entries.is_empty() {
            return Err(Error::Domain("row has no entries".into()));
        }
        if !(row.weight >= 0.0 && row.weight.is_finite()) || !row.rhs.is_finite() {
            return Err(Error::Domain(format!("invalid row weight/rhs: {row:?}")));
        }
        for &(i, c) in &row.entries {
            if i >= self.n_unknowns() || !c.is_finite() {
                return Err(Error::Domain(format!("invalid row entry ({i}, {c})")));
            }
        }
        let mut row = row;
        // Repeated unknowns are merged so each (i, j) product appears once.
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.entries.len());
        for (i, c) in row.entries {
            match merged.iter_mut().find(|(j, _)| *j == i) {
                Some((_, acc)) => *acc += c,
                None => merged.push((i, c)),
            }
        }
        row.entries = merged;
        self.rows.push(row);
        Ok(())
    }

    /// One row `D(p) = D0(p)` per observed pixel.
    pub fn add_data_rows(&mut self, depth: &DepthImage, weight: f64) -> Result<usize> {
        check_dims(self.dims(), depth.dims())?;
        let before = self.rows.len();
        for p in depth.valid_indices() {
            self.rows.push(LinearRow {
                entries: vec![(p, 1.0)],
                rhs: depth.data()[p],
                weight,
            });
        }
        Ok(self.rows.len() - before)
    }

    /// A single data row fixing pixel `(u, v)` to `depth`.
    pub fn add_anchor_row(&mut self, (u, v): (usize, usize), depth: f64, weight: f64) -> Result<()> {
        if u >= self.width || v >= self.height {
            return Err(Error::OutOfBounds {
                u,
                v,
                width: self.width,
                height: self.height,
            });
        }
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::Domain(format!("anchor depth must be positive, got {depth}")));
        }
        self.rows.push(LinearRow {
            entries: vec![(v * self.width + u, 1.0)],
            rhs: depth,
            weight,
        });
        Ok(())
    }

    /// One row `D(p) - D(q) = 0` per unordered 4-neighbour pair: all
    /// horizontal pairs first, then all vertical pairs.
    pub fn add_smoothness_rows(&mut self, weight: f64) -> usize {
        let (w, h) = self.dims();
        let before = self.rows.len();
        for v in 0..h {
            for u in 0..w.saturating_sub(1) {
                let p = v * w + u;
                self.rows.push(LinearRow {
                    entries: vec![(p, 1.0), (p + 1, -1.0)],
                    rhs: 0.0,
                    weight,
                });
            }
        }
        for v in 0..h.saturating_sub(1) {
            for u in 0..w {
                let p = v * w + u;
                self.rows.push(LinearRow {
                    entries: vec![(p, 1.0), (p + w, -1.0)],
                    rhs: 0.0,
                    weight,
                });
            }
        }
        self.rows.len() - before
    }

    /// Linearised normal consistency `<X(q) - X(p), N(p)> = 0` for every
    /// pixel `p` with a normal and each in-bounds 4-neighbour `q`, where
    /// `X(.) = D(.) * ray(.)`.
    ///
    /// With a boundary map the rows of `p` are weighted by
    /// [`boundary_weight`]`(B(p))`.
    pub fn add_normal_rows(
        &mut self,
        normals: &NormalMap,
        boundary: Option<&BoundaryMap>,
        k: &CameraIntrinsics,
        weight: f64,
    ) -> Result<usize> {
        let (w, h) = self.dims();
        check_dims((w, h), normals.dims())?;
        check_dims((w, h), k.dims())?;
        if let Some(b) = boundary {
            check_dims((w, h), b.dims())?;
        }
        let before = self.rows.len();
        for v in 0..h {
            for u in 0..w {
                let p = v * w + u;
                let Some(n) = normals.normal(p) else { continue };
                let norm = n.norm();
                if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE || !norm.is_finite() {
                    self.rows.truncate(before);
                    return Err(Error::NonUnitNormal { pixel: p, norm });
                }
                let row_weight = weight * boundary.map_or(1.0, |b| boundary_weight(b.get(p)));
                let cp = -k.ray(u, v).dot(&n);
                for offset in NEIGHBORS_4 {
                    let Some((qu, qv)) = neighbor(u, v, offset, w, h) else { continue };
                    let cq = k.ray(qu, qv).dot(&n);
                    self.rows.push(LinearRow {
                        entries: vec![(qv * w + qu, cq), (p, cp)],
                        rhs: 0.0,
                        weight: row_weight,
                    });
                }
            }
        }
        Ok(self.rows.len() - before)
    }

    /// Rows `D(q) - D(p) = delta_dir(p)` toward all eight in-bounds
    /// neighbours, optionally boundary-weighted like the normal rows.
    pub fn add_derivative_rows(
        &mut self,
        derivs: &DerivativeMap,
        boundary: Option<&BoundaryMap>,
        weight: f64,
    ) -> Result<usize> {
        let (w, h) = self.dims();
        check_dims((w, h), derivs.dims())?;
        if let Some(b) = boundary {
            check_dims((w, h), b.dims())?;
        }
        let before = self.rows.len();
        for v in 0..h {
            for u in 0..w {
                let p = v * w + u;
                let row_weight = weight * boundary.map_or(1.0, |b| boundary_weight(b.get(p)));
                for dir in Direction::ALL {
                    let Some((qu, qv)) = neighbor(u, v, dir.offset(), w, h) else { continue };
                    self.rows.push(LinearRow {
                        entries: vec![(qv * w + qu, 1.0), (p, -1.0)],
                        rhs: derivs.get(p, dir),
                        weight: row_weight,
                    });
                }
            }
        }
        Ok(self.rows.len() - before)
    }

    /// Weighted sum of squared residuals at `x`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let e = r.residual(x);
                r.weight * e * e
            })
            .sum()
    }

    /// Builds `A = sum w r^T r` and `b = sum w rhs r`. Zero-weight rows are
    /// skipped.
    pub fn assemble(&self) -> Result<Assembled> {
        if self.rows.is_empty() {
            return Err(Error::EmptySystem);
        }
        let n = self.n_unknowns();
        let mut triplets = Vec::with_capacity(self.rows.len() * 4);
        let mut rhs = vec![0.0; n];
        let mut constant = 0.0;
        for row in self.rows.iter().filter(|r| r.weight > 0.0) {
            for &(i, ci) in &row.entries {
                for &(j, cj) in &row.entries {
                    // ci * cj is commutative, keeping A exactly symmetric.
                    triplets.push((i, j, row.weight * (ci * cj)));
                }
                rhs[i] += row.weight * row.rhs * ci;
            }
            constant += row.weight * row.rhs * row.rhs;
        }
        // Stable sort keeps row order among duplicates, so sums are
        // accumulated in the same order for (i, j) and (j, i).
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        Ok(Assembled {
            matrix: CsrMatrix::from_sorted_triplets(n, &triplets),
            rhs,
            constant,
        })
    }

    /// First unknown whose connected component (through rows of positive
    /// weight) contains no single-unknown row. Such a component has no
    /// absolute depth reference and its depths are indeterminate.
    pub fn unanchored_unknown(&self) -> Option<usize> {
        let n = self.n_unknowns();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut anchored_unknowns = Vec::new();
        for row in self.rows.iter().filter(|r| r.weight > 0.0) {
            let first = row.entries[0].0;
            if row.entries.iter().all(|&(i, _)| i == first) {
                anchored_unknowns.push(first);
            }
            for &(i, _) in &row.entries[1..] {
                let (a, b) = (find(&mut parent, first), find(&mut parent, i));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut anchored = vec![false; n];
        for i in anchored_unknowns {
            let root = find(&mut parent, i);
            anchored[root] = true;
        }
        (0..n).find(|&i| {
            let root = find(&mut parent, i);
            !anchored[root]
        })
    }
}
