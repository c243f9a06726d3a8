//! Non-learned inpainting baselines.

use crate::constraints::LinearSystem;
use crate::image::{check_dims, ColorImage, DepthImage, SolverWeights};
use crate::solver::{solve_rows, SolveOptions};
use crate::completion::initial_guess;
use crate::{Error, Result};

/// Smoothness-only completion: the data and smoothness terms of the full
/// energy without any normal rows.
pub fn inpaint_smooth(raw: &DepthImage, weights: &SolverWeights, opts: &SolveOptions) -> Result<DepthImage> {
    weights.check()?;
    let (w, h) = raw.dims();
    let mut sys = LinearSystem::new(w, h);
    sys.add_data_rows(raw, weights.lambda_d)?;
    sys.add_smoothness_rows(weights.lambda_s);
    let x = solve_rows(&sys, opts, Some(&initial_guess(raw, None)))?;
    DepthImage::from_depths(w, h, x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilateralParams {
    /// Spatial Gaussian sigma in pixels.
    pub sigma_spatial: f64,
    /// Color Gaussian sigma in intensity units.
    pub sigma_color: f64,
    /// Window radius in pixels (disc).
    pub radius: usize,
    pub max_passes: usize,
}

impl Default for BilateralParams {
    fn default() -> Self {
        BilateralParams {
            sigma_spatial: 8.0,
            sigma_color: 0.1,
            radius: 16,
            max_passes: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BilateralFill {
    /// Observed pixels unchanged, filled holes valid, unfilled holes invalid.
    pub depth: DepthImage,
    /// Flat indices still missing after the last pass.
    pub unfilled: Vec<usize>,
}

/// Joint bilateral hole filling guided by `color`.
///
/// Each pass fills every hole pixel with the spatial- and color-weighted mean
/// of the pixels that were valid at the start of the pass; passes repeat until
/// nothing is missing, nothing changes, or `max_passes` is reached.
pub fn inpaint_joint_bilateral(raw: &DepthImage, color: &ColorImage, params: &BilateralParams) -> Result<BilateralFill> {
    check_dims(raw.dims(), color.dims())?;
    if !(params.sigma_spatial > 0.0 && params.sigma_color > 0.0) {
        return Err(Error::Domain(format!("bilateral sigmas must be positive: {params:?}")));
    }
    let (w, h) = raw.dims();
    let r = params.radius as isize;
    let inv_2ss = 1.0 / (2.0 * params.sigma_spatial * params.sigma_spatial);
    let inv_2sc = 1.0 / (2.0 * params.sigma_color * params.sigma_color);

    let mut depth = raw.data().to_vec();
    let mut valid = raw.valid_mask().to_vec();
    for _ in 0..params.max_passes {
        let mut fills = Vec::new();
        for p in (0..w * h).filter(|&p| !valid[p]) {
            let (pu, pv) = ((p % w) as isize, (p / w) as isize);
            let cp = color.get(p);
            let (mut sum_w, mut sum_d) = (0.0, 0.0);
            for dv in -r..=r {
                let qv = pv + dv;
                if qv < 0 || qv >= h as isize {
                    continue;
                }
                for du in -r..=r {
                    let qu = pu + du;
                    let d2 = (du * du + dv * dv) as f64;
                    if qu < 0 || qu >= w as isize || d2 > (r * r) as f64 {
                        continue;
                    }
                    let q = qv as usize * w + qu as usize;
                    if !valid[q] {
                        continue;
                    }
                    let cq = color.get(q);
                    let c2: f64 = (0..3).map(|c| ((cp[c] - cq[c]) as f64).powi(2)).sum();
                    let wq = (-d2 * inv_2ss - c2 * inv_2sc).exp();
                    sum_w += wq;
                    sum_d += wq * depth[q];
                }
            }
            if sum_w > 0.0 {
                fills.push((p, sum_d / sum_w));
            }
        }
        if fills.is_empty() {
            break;
        }
        for (p, d) in fills {
            depth[p] = d;
            valid[p] = true;
        }
    }
    let unfilled = (0..w * h).filter(|&p| !valid[p]).collect();
    Ok(BilateralFill {
        depth: DepthImage::new(w, h, depth, valid)?,
        unfilled,
    })
}
