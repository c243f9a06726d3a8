//! End-to-end depth completion.

use crate::constraints::LinearSystem;
use crate::geometry::CameraIntrinsics;
use crate::image::{check_dims, BoundaryMap, DepthImage, DerivativeMap, NormalMap, SolverWeights};
use crate::solver::{solve_rows, SolveOptions};
use crate::{Error, Result};

/// Which predicted quantities drive the completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Representation {
    /// Surface normals ("N").
    #[default]
    Normals,
    /// Depth derivatives in eight directions ("DD").
    Derivatives,
    /// Both row families ("N+DD").
    NormalsAndDerivatives,
}

impl Representation {
    pub const ALL: [Representation; 3] = [
        Representation::Derivatives,
        Representation::NormalsAndDerivatives,
        Representation::Normals,
    ];

    pub fn uses_normals(self) -> bool {
        matches!(self, Representation::Normals | Representation::NormalsAndDerivatives)
    }

    pub fn uses_derivatives(self) -> bool {
        matches!(self, Representation::Derivatives | Representation::NormalsAndDerivatives)
    }

    pub fn label(self) -> &'static str {
        match self {
            Representation::Normals => "N",
            Representation::Derivatives => "DD",
            Representation::NormalsAndDerivatives => "N+DD",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CompletionConfig {
    pub representation: Representation,
    pub weights: SolverWeights,
    /// Pixel pinned to a depth in metres, needed when nothing is observed.
    pub anchor: Option<((usize, usize), f64)>,
    pub solve_options: SolveOptions,
}

/// Result of [`complete_depth`]. Every pixel of `depth` is marked valid.
#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub depth: DepthImage,
    /// Flat indices whose solved depth is not positive. They are left as
    /// solved, not clamped.
    pub non_physical: Vec<usize>,
}

/// The middle pixel of a grid, the conventional anchor location.
pub fn middle_pixel(width: usize, height: usize) -> (usize, usize) {
    (width / 2, height / 2)
}

/// Builds the row system for a completion problem without solving it.
pub fn build_system(
    raw: &DepthImage,
    normals: Option<&NormalMap>,
    boundary: Option<&BoundaryMap>,
    derivs: Option<&DerivativeMap>,
    k: &CameraIntrinsics,
    cfg: &CompletionConfig,
) -> Result<LinearSystem> {
    let dims = raw.dims();
    let w = &cfg.weights;
    w.check()?;
    check_dims(dims, k.dims())?;
    let boundary = match boundary {
        Some(b) if w.use_boundary_weight => {
            check_dims(dims, b.dims())?;
            Some(b)
        }
        _ => None,
    };

    let mut sys = LinearSystem::new(dims.0, dims.1);
    sys.add_data_rows(raw, w.lambda_d)?;
    if let Some((pixel, depth)) = cfg.anchor {
        sys.add_anchor_row(pixel, depth, w.lambda_d)?;
    }
    if cfg.representation.uses_normals() {
        let normals = normals.ok_or(Error::MissingMap("normal map"))?;
        sys.add_normal_rows(normals, boundary, k, w.lambda_n)?;
    }
    if cfg.representation.uses_derivatives() {
        let derivs = derivs.ok_or(Error::MissingMap("derivative map"))?;
        sys.add_derivative_rows(derivs, boundary, w.lambda_dd)?;
    }
    sys.add_smoothness_rows(w.lambda_s);
    Ok(sys)
}

/// CG starting point: observed depth where valid, else the mean observed
/// depth, else the anchor depth.
pub fn initial_guess(raw: &DepthImage, anchor: Option<f64>) -> Vec<f64> {
    let n_valid = raw.count_valid();
    let fill = if n_valid > 0 {
        raw.valid_indices().map(|i| raw.data()[i]).sum::<f64>() / n_valid as f64
    } else {
        anchor.unwrap_or(1.0)
    };
    (0..raw.len()).map(|i| raw.depth(i).unwrap_or(fill)).collect()
}

/// Completes `raw` by minimising the weighted data, normal, derivative and
/// smoothness energy over all pixels.
pub fn complete_depth(
    raw: &DepthImage,
    normals: Option<&NormalMap>,
    boundary: Option<&BoundaryMap>,
    derivs: Option<&DerivativeMap>,
    k: &CameraIntrinsics,
    cfg: &CompletionConfig,
) -> Result<Completion> {
    let sys = build_system(raw, normals, boundary, derivs, k, cfg)?;
    let guess = initial_guess(raw, cfg.anchor.map(|(_, d)| d));
    let x = solve_rows(&sys, &cfg.solve_options, Some(&guess))?;
    let non_physical = x
        .iter()
        .enumerate()
        .filter_map(|(i, &d)| (!(d > 0.0)).then_some(i))
        .collect();
    Ok(Completion {
        depth: DepthImage::from_depths(raw.width(), raw.height(), x)?,
        non_physical,
    })
}

/// Rescales `pred` so that it matches `truth` exactly at `pixel`.
pub fn anchored_scale_align(pred: &DepthImage, truth: &DepthImage, (u, v): (usize, usize)) -> Result<DepthImage> {
    check_dims(truth.dims(), pred.dims())?;
    let (Some(p), Some(t)) = (pred.get(u, v), truth.get(u, v)) else {
        return Err(Error::Domain(format!("pixel ({u}, {v}) is not valid in both images")));
    };
    if !(p > 0.0) {
        return Err(Error::Domain(format!("predicted depth {p} at ({u}, {v}) is not positive")));
    }
    Ok(pred.scaled(t / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn fronto(w: usize, h: usize) -> (CameraIntrinsics, NormalMap) {
        (
            CameraIntrinsics::with_fov(w, h, 60.0),
            NormalMap::filled(w, h, Vector3::new(0.0, 0.0, -1.0)),
        )
    }

    #[test]
    fn single_observation_fills_plane() {
        let (k, normals) = fronto(4, 4);
        let raw = DepthImage::filled(4, 4, 2.0).masked(|i| i == 5);
        let out = complete_depth(&raw, Some(&normals), None, None, &k, &CompletionConfig::default()).unwrap();
        assert!(out.non_physical.is_empty());
        assert_eq!(out.depth.count_valid(), 16);
        for &d in out.depth.data() {
            assert!((d - 2.0).abs() < 1e-6, "{d}");
        }
    }

    #[test]
    fn anchored_constant() {
        let (k, normals) = fronto(4, 4);
        let raw = DepthImage::invalid(4, 4);
        let cfg = CompletionConfig {
            anchor: Some((middle_pixel(4, 4), 3.0)),
            ..Default::default()
        };
        let out = complete_depth(&raw, Some(&normals), None, None, &k, &cfg).unwrap();
        for &d in out.depth.data() {
            assert!((d - 3.0).abs() < 1e-6, "{d}");
        }
    }

    #[test]
    fn nothing_observed_without_anchor_is_singular() {
        let (k, normals) = fronto(4, 4);
        let raw = DepthImage::invalid(4, 4);
        let err = complete_depth(&raw, Some(&normals), None, None, &k, &CompletionConfig::default()).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { .. }), "{err}");
    }

    #[test]
    fn missing_maps_are_reported() {
        let (k, _) = fronto(4, 4);
        let raw = DepthImage::filled(4, 4, 1.0);
        let err = complete_depth(&raw, None, None, None, &k, &CompletionConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MissingMap(_)));
        let cfg = CompletionConfig {
            representation: Representation::Derivatives,
            ..Default::default()
        };
        assert!(matches!(
            complete_depth(&raw, None, None, None, &k, &cfg),
            Err(Error::MissingMap(_))
        ));
    }

    #[test]
    fn negative_solutions_are_reported_not_clamped() {
        // Derivatives push the right column 5 m below an observed 1 m.
        let k = CameraIntrinsics::with_fov(2, 1, 60.0);
        let mut dd = vec![[0.0f64; 8]; 2];
        dd[0][crate::image::Direction::E.index()] = -5.0;
        dd[1][crate::image::Direction::W.index()] = 5.0;
        let derivs = DerivativeMap::new(2, 1, dd).unwrap();
        let raw = DepthImage::filled(2, 1, 1.0).masked(|i| i == 0);
        let cfg = CompletionConfig {
            representation: Representation::Derivatives,
            ..Default::default()
        };
        let out = complete_depth(&raw, None, None, Some(&derivs), &k, &cfg).unwrap();
        assert_eq!(out.non_physical, vec![1]);
        assert!(out.depth.data()[1] < -3.9);
    }

    #[test]
    fn scale_alignment() {
        let truth = DepthImage::from_depths(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(anchored_scale_align(&truth, &truth, (1, 1)).unwrap(), truth);
        let doubled = truth.scaled(2.0);
        assert_eq!(anchored_scale_align(&doubled, &truth, (0, 1)).unwrap(), truth);
        let uniform = DepthImage::filled(2, 2, 3.0);
        let half = DepthImage::filled(2, 2, 1.5);
        assert_eq!(anchored_scale_align(&uniform, &half, (0, 0)).unwrap(), half);
        let bad = DepthImage::from_depths(2, 2, vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(anchored_scale_align(&bad, &truth, (0, 0)).is_err());
    }

    #[test]
    fn initial_guess_fills_holes_with_mean() {
        let raw = DepthImage::new(3, 1, vec![1.0, 0.0, 3.0], vec![true, false, true]).unwrap();
        assert_eq!(initial_guess(&raw, None), vec![1.0, 2.0, 3.0]);
        assert_eq!(initial_guess(&DepthImage::invalid(2, 1), Some(3.0)), vec![3.0, 3.0]);
    }
}
