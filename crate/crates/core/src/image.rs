//! Image-grid types shared by every stage of the pipeline.
//!
//! All grids are row-major, pixel `(u, v)` lives at index `v * width + u`.
//! Camera coordinates are x right, y down, z forward; normals of visible
//! surfaces point back toward the camera (z <= 0).

use nalgebra::Vector3;

use crate::{Error, Result};

/// Tolerance on the Euclidean norm of a stored unit normal.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if width.checked_mul(height) == Some(len) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{width}x{height} grid needs {} values, got {len}",
            width.saturating_mul(height)
        )))
    }
}

/// Rule broken by a pixel, as reported by the `validate` methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// A valid depth pixel is zero or negative.
    NonPositiveDepth,
    /// A valid depth pixel is NaN or infinite.
    NonFiniteDepth,
    /// A normal that is not the invalid sentinel has non-unit length.
    NonUnitNormal,
    /// A normal faces away from the camera.
    BackFacingNormal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub pixel: (usize, usize),
    pub rule: Rule,
}

/// Metric depth with an explicit observed-mask.
///
/// The depth stored under an invalid pixel carries no meaning.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        check_len(width, height, data.len())?;
        check_len(width, height, valid.len())?;
        Ok(DepthImage {
            width,
            height,
            data,
            valid,
        })
    }

    /// Every pixel valid at the given depths.
    pub fn from_depths(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let valid = vec![true; data.len()];
        Self::new(width, height, data, valid)
    }

    pub fn filled(width: usize, height: usize, depth: f64) -> Self {
        DepthImage {
            width,
            height,
            data: vec![depth; width * height],
            valid: vec![true; width * height],
        }
    }

    /// An image with no observed pixel.
    pub fn invalid(width: usize, height: usize) -> Self {
        DepthImage {
            width,
            height,
            data: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    /// Builds an image from a closure returning `None` for missing pixels.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Self {
        let mut data = Vec::with_capacity(width * height);
        let mut valid = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                match f(u, v) {
                    Some(d) => {
                        data.push(d);
                        valid.push(true);
                    }
                    None => {
                        data.push(0.0);
                        valid.push(false);
                    }
                }
            }
        }
        DepthImage {
            width,
            height,
            data,
            valid,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, index: usize) -> bool {
        self.valid[index]
    }

    /// Depth at a flat index, `None` when unobserved.
    pub fn depth(&self, index: usize) -> Option<f64> {
        self.valid[index].then(|| self.data[index])
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        if u < self.width && v < self.height {
            self.depth(v * self.width + u)
        } else {
            None
        }
    }

    /// Copy of `self` with a different observed-mask.
    pub fn with_mask(&self, valid: Vec<bool>) -> Result<Self> {
        check_len(self.width, self.height, valid.len())?;
        Ok(DepthImage {
            valid,
            ..self.clone()
        })
    }

    /// Copy where pixels failing `keep` become invalid.
    pub fn masked(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let valid = (0..self.len()).map(|i| self.valid[i] && keep(i)).collect();
        DepthImage {
            valid,
            ..self.clone()
        }
    }

    /// Depths scaled by `factor`; the mask is kept.
    pub fn scaled(&self, factor: f64) -> Self {
        DepthImage {
            data: self.data.iter().map(|d| d * factor).collect(),
            ..self.clone()
        }
    }

    pub fn count_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn valid_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.valid
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| v.then_some(i))
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for i in self.valid_indices() {
            let d = self.data[i];
            let pixel = (i % self.width, i / self.width);
            if !d.is_finite() {
                out.push(Violation {
                    pixel,
                    rule: Rule::NonFiniteDepth,
                });
            } else if d <= 0.0 {
                out.push(Violation {
                    pixel,
                    rule: Rule::NonPositiveDepth,
                });
            }
        }
        out
    }
}

/// Per-pixel unit normals in camera coordinates.
///
/// `(0, 0, 0)` marks a pixel without a normal; consumers skip it.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalMap {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl NormalMap {
    pub const INVALID: [f64; 3] = [0.0, 0.0, 0.0];

    pub fn new(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        check_len(width, height, data.len())?;
        Ok(NormalMap {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, normal: Vector3<f64>) -> Self {
        let n = to_array(&normal.normalize());
        NormalMap {
            width,
            height,
            data: vec![n; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn raw(&self, index: usize) -> [f64; 3] {
        self.data[index]
    }

    /// The normal at `index`, or `None` for the invalid sentinel.
    pub fn normal(&self, index: usize) -> Option<Vector3<f64>> {
        let n = self.data[index];
        if n == Self::INVALID {
            None
        } else {
            Some(Vector3::from(n))
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for i in 0..self.data.len() {
            let Some(n) = self.normal(i) else { continue };
            let pixel = (i % self.width, i / self.width);
            if (n.norm() - 1.0).abs() > UNIT_NORM_TOLERANCE || !n.iter().all(|c| c.is_finite()) {
                out.push(Violation {
                    pixel,
                    rule: Rule::NonUnitNormal,
                });
            } else if n.z > 0.0 {
                out.push(Violation {
                    pixel,
                    rule: Rule::BackFacingNormal,
                });
            }
        }
        out
    }
}

pub(crate) fn to_array(n: &Vector3<f64>) -> [f64; 3] {
    [n.x, n.y, n.z]
}

/// Per-pixel probability of lying on an occlusion boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl BoundaryMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if let Some(i) = data.iter().position(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::Domain(format!(
                "boundary probability {} at index {i} is outside [0, 1]",
                data[i]
            )));
        }
        Ok(BoundaryMap {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        BoundaryMap {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, index: usize) -> f64 {
        self.data[index]
    }

    pub fn count_above(&self, threshold: f64) -> usize {
        self.data.iter().filter(|&&b| b > threshold).count()
    }
}

/// The eight compass neighbours used by depth-derivative maps, in storage
/// order. North is up in the image, i.e. toward smaller `v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    E,
    NE,
    N,
    NW,
    W,
    SW,
    S,
    SE,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::E,
        Direction::NE,
        Direction::N,
        Direction::NW,
        Direction::W,
        Direction::SW,
        Direction::S,
        Direction::SE,
    ];

    /// Pixel offset `(du, dv)` of the neighbour.
    pub fn offset(self) -> (isize, isize) {
        match self {
            Direction::E => (1, 0),
            Direction::NE => (1, -1),
            Direction::N => (0, -1),
            Direction::NW => (-1, -1),
            Direction::W => (-1, 0),
            Direction::SW => (-1, 1),
            Direction::S => (0, 1),
            Direction::SE => (1, 1),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Neighbour of `(u, v)` at `offset`, if inside a `width x height` grid.
pub(crate) fn neighbor(
    u: usize,
    v: usize,
    (du, dv): (isize, isize),
    width: usize,
    height: usize,
) -> Option<(usize, usize)> {
    let nu = u.checked_add_signed(du)?;
    let nv = v.checked_add_signed(dv)?;
    (nu < width && nv < height).then_some((nu, nv))
}

/// Predicted depth differences `D(q) - D(p)` in metres toward each of the
/// eight neighbours `q`, indexed by [`Direction::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeMap {
    width: usize,
    height: usize,
    data: Vec<[f64; 8]>,
}

impl DerivativeMap {
    pub fn new(width: usize, height: usize, data: Vec<[f64; 8]>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if data.iter().flatten().any(|d| !d.is_finite()) {
            return Err(Error::Domain("derivative map has non-finite values".into()));
        }
        Ok(DerivativeMap {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        DerivativeMap {
            width,
            height,
            data: vec![[0.0; 8]; width * height],
        }
    }

    /// Exact differences of a depth image; directions touching an invalid
    /// pixel or leaving the grid are zero.
    pub fn from_depth(depth: &DepthImage) -> Self {
        let (w, h) = depth.dims();
        let mut data = vec![[0.0f64; 8]; w * h];
        for v in 0..h {
            for u in 0..w {
                let p = v * w + u;
                let Some(dp) = depth.depth(p) else { continue };
                for dir in Direction::ALL {
                    if let Some((qu, qv)) = neighbor(u, v, dir.offset(), w, h) {
                        if let Some(dq) = depth.depth(qv * w + qu) {
                            data[p][dir.index()] = dq - dp;
                        }
                    }
                }
            }
        }
        DerivativeMap {
            width: w,
            height: h,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[[f64; 8]] {
        &self.data
    }

    pub fn get(&self, index: usize, dir: Direction) -> f64 {
        self.data[index][dir.index()]
    }
}

/// RGB intensities in `[0, 1]`, used only as guidance by the bilateral
/// baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<[f32; 3]>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<Self> {
        check_len(width, height, data.len())?;
        Ok(ColorImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        ColorImage {
            width,
            height,
            data: vec![rgb; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[[f32; 3]] {
        &self.data
    }

    pub fn get(&self, index: usize) -> [f32; 3] {
        self.data[index]
    }
}

/// Relative weights of the energy terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverWeights {
    /// Observed-depth data term.
    pub lambda_d: f64,
    /// Normal-consistency term.
    pub lambda_n: f64,
    /// Neighbour smoothness term.
    pub lambda_s: f64,
    /// Depth-derivative term.
    pub lambda_dd: f64,
    /// Down-weight normal and derivative rows by the boundary map.
    pub use_boundary_weight: bool,
}

impl Default for SolverWeights {
    fn default() -> Self {
        SolverWeights {
            lambda_d: 1e3,
            lambda_n: 1.0,
            lambda_s: 1e-3,
            lambda_dd: 1.0,
            use_boundary_weight: true,
        }
    }
}

impl SolverWeights {
    pub fn check(&self) -> Result<()> {
        let all = [self.lambda_d, self.lambda_n, self.lambda_s, self.lambda_dd];
        if all.iter().all(|l| l.is_finite() && *l >= 0.0) {
            Ok(())
        } else {
            Err(Error::Domain(format!("weights must be finite and nonnegative: {self:?}")))
        }
    }
}
