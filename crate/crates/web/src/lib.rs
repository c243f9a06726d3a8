//! WebAssembly bindings for the browser demo in `www/`.
//!
//! A [`Session`] holds one rendered synthetic scene. The page can complete
//! it with any ablation method, compare methods side by side and run a
//! sparsity sweep. Images cross the boundary as RGBA bytes.

use depthfill::experiments::{
    evaluate_unobserved, prepare_entry, run_method, sparsity_sweep, Method, NoiseLevels, PreparedEntry, RunSettings,
    SampleCount,
};
use depthfill::metrics::MetricsReport;
use depthfill::synthetic::SuiteEntry;
use depthfill::{DepthImage, Error, Result, SolverWeights};
use wasm_bindgen::prelude::*;

/// Absolute error shown at full intensity in error images, metres.
pub const ERROR_SCALE: f64 = 0.1;

const INVALID_RGBA: [u8; 4] = [255, 0, 255, 255];

const PALETTE: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

/// Colour for `t` in `[0, 1]`; values outside are clamped.
pub fn colormap(t: f64) -> [u8; 4] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (PALETTE.len() - 1) as f64;
    let i = (x.floor() as usize).min(PALETTE.len() - 2);
    let f = x - i as f64;
    let c = |k: usize| (PALETTE[i][k] + f * (PALETTE[i + 1][k] - PALETTE[i][k])).round() as u8;
    [c(0), c(1), c(2), 255]
}

/// Depth mapped linearly from `range`, near is bright; invalid pixels are magenta.
pub fn depth_rgba(depth: &DepthImage, range: (f64, f64)) -> Vec<u8> {
    let span = (range.1 - range.0).max(1e-9);
    (0..depth.len())
        .flat_map(|i| match depth.depth(i) {
            Some(d) => colormap(1.0 - (d - range.0) / span),
            None => INVALID_RGBA,
        })
        .collect()
}

/// `|pred - truth|` scaled by [`ERROR_SCALE`]; pixels missing from either are magenta.
pub fn error_rgba(pred: &DepthImage, truth: &DepthImage) -> Vec<u8> {
    (0..truth.len())
        .flat_map(|i| match (pred.depth(i), truth.depth(i)) {
            (Some(p), Some(t)) => colormap((p - t).abs() / ERROR_SCALE),
            _ => INVALID_RGBA,
        })
        .collect()
}

fn valid_range(depth: &DepthImage) -> (f64, f64) {
    depth
        .valid_indices()
        .filter_map(|i| depth.depth(i))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)))
}

/// Parses a method label as written in ablation tables, e.g. `N_boundary`.
pub fn parse_method(label: &str) -> Result<Method> {
    Method::ablation()
        .into_iter()
        .find(|m| m.to_string() == label)
        .ok_or_else(|| Error::Format {
            format: "method",
            reason: format!("unknown method {label:?}"),
        })
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Outcome {
    rgba: Vec<u8>,
    error_rgba: Vec<u8>,
    metrics: MetricsReport,
}

#[wasm_bindgen]
impl Outcome {
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    #[wasm_bindgen(js_name = errorRgba)]
    pub fn error_rgba(&self) -> Vec<u8> {
        self.error_rgba.clone()
    }

    /// Median relative error on the holes.
    pub fn rel(&self) -> f64 {
        self.metrics.rel
    }

    /// RMSE on the holes, metres.
    pub fn rmse(&self) -> f64 {
        self.metrics.rmse
    }

    /// Percentage of hole pixels within a ratio of 1.25.
    pub fn d125(&self) -> f64 {
        self.metrics.delta[2]
    }

    #[wasm_bindgen(js_name = nEval)]
    pub fn n_eval(&self) -> usize {
        self.metrics.n_eval
    }
}

impl Outcome {
    pub fn metrics(&self) -> &MetricsReport {
        &self.metrics
    }
}

#[wasm_bindgen]
pub struct Session {
    entry: PreparedEntry,
    range: (f64, f64),
}

impl Session {
    /// Renders suite entry `name` (e.g. `sphere_on_plane_128x128_drop`)
    /// with normal and derivative noise of `noise_deg` degrees.
    pub fn create(name: &str, noise_deg: f64, seed: u64) -> Result<Session> {
        let entry = SuiteEntry::from_name(name, seed)?;
        let noise = NoiseLevels {
            normal_sigma_deg: noise_deg,
            derivative_sigma_deg: noise_deg,
        };
        let entry = prepare_entry(&entry, &noise, seed)?;
        let range = valid_range(&entry.truth);
        Ok(Session { entry, range })
    }

    pub fn entry(&self) -> &PreparedEntry {
        &self.entry
    }

    fn settings(lambda_s: f64) -> RunSettings {
        RunSettings {
            weights: SolverWeights {
                lambda_s,
                ..SolverWeights::default()
            },
            ..RunSettings::default()
        }
    }

    /// Completes the scene with `method` and scores it on the holes.
    pub fn run(&self, method: Method, lambda_s: f64) -> Result<Outcome> {
        let pred = run_method(&self.entry, method, &Self::settings(lambda_s))?;
        Ok(Outcome {
            rgba: depth_rgba(&pred, self.range),
            error_rgba: error_rgba(&pred, &self.entry.truth),
            metrics: evaluate_unobserved(&self.entry, &pred)?,
        })
    }

    /// `(n_input, rel, rmse)` on the holes for each sample count.
    pub fn sweep(&self, counts: &[usize], seed: u64) -> Result<Vec<(usize, f64, f64)>> {
        let counts: Vec<SampleCount> = counts.iter().map(|&n| SampleCount::Count(n)).collect();
        let points = sparsity_sweep(&self.entry, &counts, &RunSettings::default(), seed)?;
        Ok(points
            .iter()
            .map(|p| (p.n_input, p.unobserved.rel, p.unobserved.rmse))
            .collect())
    }
}

#[wasm_bindgen]
impl Session {
    #[wasm_bindgen(constructor)]
    pub fn new(name: &str, noise_deg: f64, seed: u32) -> std::result::Result<Session, JsError> {
        Session::create(name, noise_deg, seed.into()).map_err(js)
    }

    pub fn width(&self) -> usize {
        self.entry.truth.width()
    }

    pub fn height(&self) -> usize {
        self.entry.truth.height()
    }

    #[wasm_bindgen(js_name = rawRgba)]
    pub fn raw_rgba(&self) -> Vec<u8> {
        depth_rgba(&self.entry.raw, self.range)
    }

    #[wasm_bindgen(js_name = truthRgba)]
    pub fn truth_rgba(&self) -> Vec<u8> {
        depth_rgba(&self.entry.truth, self.range)
    }

    #[wasm_bindgen(js_name = normalsRgba)]
    pub fn normals_rgba(&self) -> Vec<u8> {
        let to_byte = |c: f64| ((c + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8;
        self.entry
            .normals
            .data()
            .iter()
            .flat_map(|n| {
                if *n == depthfill::NormalMap::INVALID {
                    INVALID_RGBA
                } else {
                    [to_byte(n[0]), to_byte(-n[1]), to_byte(-n[2]), 255]
                }
            })
            .collect()
    }

    #[wasm_bindgen(js_name = boundaryRgba)]
    pub fn boundary_rgba(&self) -> Vec<u8> {
        self.entry
            .boundary
            .data()
            .iter()
            .flat_map(|&b| {
                let g = (255.0 * (1.0 - b.clamp(0.0, 1.0))).round() as u8;
                [g, g, g, 255]
            })
            .collect()
    }

    /// Runs a method by its table label, e.g. `N_boundary` or `bilateral`.
    pub fn complete(&self, method: &str, lambda_s: f64) -> std::result::Result<Outcome, JsError> {
        self.run(parse_method(method).map_err(js)?, lambda_s).map_err(js)
    }

    /// Flattened `[n_input, rel, rmse]` triples, one per count.
    pub fn sparsity(&self, counts: Vec<u32>, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
        let counts: Vec<usize> = counts.into_iter().map(|n| n as usize).collect();
        let points = self.sweep(&counts, seed.into()).map_err(js)?;
        Ok(points
            .into_iter()
            .flat_map(|(n, rel, rmse)| [n as f64, rel, rmse])
            .collect())
    }
}

/// Labels accepted by [`Session::complete`], in table order.
#[wasm_bindgen(js_name = methodLabels)]
pub fn method_labels() -> Vec<String> {
    Method::ablation().iter().map(ToString::to_string).collect()
}
