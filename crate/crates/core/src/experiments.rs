//! Experiment harnesses over synthetic scenes: method comparison,
//! representation/boundary ablation and the sparsity sweep.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{inpaint_joint_bilateral, inpaint_smooth, BilateralParams};
use crate::completion::{complete_depth, CompletionConfig, Representation};
use crate::geometry::CameraIntrinsics;
use crate::image::{BoundaryMap, ColorImage, DepthImage, DerivativeMap, NormalMap, SolverWeights};
use crate::io::ReportTable;
use crate::metrics::{depth_metrics, EvalSet, MetricsReport};
use crate::solver::SolveOptions;
use crate::synthetic::{apply_holes, perturb_derivatives, perturb_normals, HoleSpec, SuiteEntry};
use crate::{Error, Result};

/// Angular noise applied to oracle normals in the experiments, degrees.
pub const NORMAL_NOISE_DEG: f64 = 10.0;

/// Noise applied to the oracle predictions of an entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseLevels {
    pub normal_sigma_deg: f64,
    /// Slope-equivalent noise of each derivative, degrees: a derivative at
    /// depth `D` gets standard deviation `tan(sigma) * D / fx`.
    pub derivative_sigma_deg: f64,
}

impl Default for NoiseLevels {
    fn default() -> Self {
        NoiseLevels {
            normal_sigma_deg: NORMAL_NOISE_DEG,
            derivative_sigma_deg: NORMAL_NOISE_DEG,
        }
    }
}

impl NoiseLevels {
    pub const NONE: NoiseLevels = NoiseLevels {
        normal_sigma_deg: 0.0,
        derivative_sigma_deg: 0.0,
    };
}

/// Everything a method may consume for one scene.
#[derive(Clone, Debug)]
pub struct PreparedEntry {
    pub name: String,
    pub intrinsics: CameraIntrinsics,
    pub truth: DepthImage,
    pub raw: DepthImage,
    pub normals: NormalMap,
    pub boundary: BoundaryMap,
    pub derivs: DerivativeMap,
    pub color: ColorImage,
}

/// Renders `entry`, punches its holes and perturbs the oracle normals and
/// derivatives with independent streams derived from `seed`.
pub fn prepare_entry(entry: &SuiteEntry, noise: &NoiseLevels, seed: u64) -> Result<PreparedEntry> {
    let r = entry.render();
    let k = entry.intrinsics;
    let raw = apply_holes(&r.depth, &entry.holes, Some((&r.normals, &k)))?;
    let normals = perturb_normals(&r.normals, noise.normal_sigma_deg, seed.wrapping_mul(2))?;
    let rel = noise.derivative_sigma_deg.to_radians().tan() / k.fx;
    let derivs = perturb_derivatives(
        &DerivativeMap::from_depth(&r.depth),
        &r.depth,
        rel,
        seed.wrapping_mul(2).wrapping_add(1),
    )?;
    Ok(PreparedEntry {
        name: entry.name.clone(),
        intrinsics: k,
        truth: r.depth,
        raw,
        normals,
        boundary: r.boundary,
        derivs,
        color: r.color,
    })
}

/// A completion method compared in the experiments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Ours { representation: Representation, boundary: bool },
    Smooth,
    Bilateral,
}

impl Method {
    /// Table rows: every representation with and without boundary weighting,
    /// then the two baselines.
    pub fn ablation() -> Vec<Method> {
        let mut out = Vec::new();
        for representation in Representation::ALL {
            for boundary in [false, true] {
                out.push(Method::Ours {
                    representation,
                    boundary,
                });
            }
        }
        out.extend([Method::Smooth, Method::Bilateral]);
        out
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ours {
                representation,
                boundary,
            } => {
                let b = if *boundary { "boundary" } else { "noboundary" };
                write!(f, "{}_{b}", representation.label())
            }
            Method::Smooth => f.write_str("smooth"),
            Method::Bilateral => f.write_str("bilateral"),
        }
    }
}

/// Shared settings for running methods.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RunSettings {
    pub weights: SolverWeights,
    pub solve_options: SolveOptions,
    pub bilateral: BilateralParams,
}

/// Runs `method` on `e.raw`. Bilateral leaves unreachable holes invalid.
pub fn run_method(e: &PreparedEntry, method: Method, s: &RunSettings) -> Result<DepthImage> {
    match method {
        Method::Ours {
            representation,
            boundary,
        } => {
            let cfg = CompletionConfig {
                representation,
                weights: SolverWeights {
                    use_boundary_weight: boundary,
                    ..s.weights
                },
                anchor: None,
                solve_options: s.solve_options,
            };
            let out = complete_depth(
                &e.raw,
                Some(&e.normals),
                Some(&e.boundary),
                Some(&e.derivs),
                &e.intrinsics,
                &cfg,
            )?;
            Ok(out.depth)
        }
        Method::Smooth => inpaint_smooth(&e.raw, &s.weights, &s.solve_options),
        Method::Bilateral => Ok(inpaint_joint_bilateral(&e.raw, &e.color, &s.bilateral)?.depth),
    }
}

/// Metrics of `pred` on the pixels missing from `e.raw`.
pub fn evaluate_unobserved(e: &PreparedEntry, pred: &DepthImage) -> Result<MetricsReport> {
    depth_metrics(pred, &e.truth, Some(e.raw.valid_mask()), EvalSet::Unobserved)
}

/// Per-entry metrics averaged over entries; `n_eval` is the total.
pub fn mean_report(reports: &[MetricsReport]) -> Result<MetricsReport> {
    if reports.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(MetricsReport {
        rel: mean(&|r| r.rel),
        rmse: mean(&|r| r.rmse),
        delta: std::array::from_fn(|i| mean(&|r| r.delta[i])),
        n_eval: reports.iter().map(|r| r.n_eval).sum(),
    })
}

/// Evaluates every method on every entry. Entry `i` is perturbed with seed
/// `seed * 1000 + i`. Returns per-method mean reports in `methods` order.
pub fn compare_methods(
    entries: &[SuiteEntry],
    methods: &[Method],
    noise: &NoiseLevels,
    settings: &RunSettings,
    seed: u64,
) -> Result<Vec<(Method, MetricsReport)>> {
    let mut per_method = vec![Vec::with_capacity(entries.len()); methods.len()];
    for (i, entry) in entries.iter().enumerate() {
        let e = prepare_entry(entry, noise, seed.wrapping_mul(1000).wrapping_add(i as u64))?;
        for (m, reports) in methods.iter().zip(&mut per_method) {
            let pred = run_method(&e, *m, settings)?;
            reports.push(evaluate_unobserved(&e, &pred)?);
        }
    }
    methods
        .iter()
        .zip(&per_method)
        .map(|(m, r)| Ok((*m, mean_report(r)?)))
        .collect()
}

/// The representation/boundary ablation as a metrics table.
pub fn ablation_table(
    entries: &[SuiteEntry],
    noise: &NoiseLevels,
    settings: &RunSettings,
    seed: u64,
) -> Result<ReportTable> {
    let mut table = ReportTable::metrics();
    for (method, report) in compare_methods(entries, &Method::ablation(), noise, settings, seed)? {
        table.push_metrics(method.to_string(), &report)?;
    }
    Ok(table)
}

/// Number of input samples in the sparsity sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleCount {
    Count(usize),
    /// Every pixel of the raw observation.
    All,
}

impl fmt::Display for SampleCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleCount::Count(n) => write!(f, "{n}"),
            SampleCount::All => f.write_str("all"),
        }
    }
}

impl FromStr for SampleCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(SampleCount::All),
            t => t
                .parse()
                .map(SampleCount::Count)
                .map_err(|_| Error::format("sample count", format!("expected a count or `all`, got {s:?}"))),
        }
    }
}

pub const SWEEP_HEADER: [&str; 6] = [
    "samples",
    "n_input",
    "rel_observed",
    "rmse_observed",
    "rel_unobserved",
    "rmse_unobserved",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub samples: SampleCount,
    /// Pixels actually fed to the solver.
    pub n_input: usize,
    /// On pixels of the raw observation.
    pub observed: MetricsReport,
    /// On the holes of the raw observation.
    pub unobserved: MetricsReport,
}

/// Completes `e` from `n` pixels drawn at random from `e.raw` for each
/// requested count. Splits refer to the full raw observation, so the
/// unobserved pixels are the same for every count.
pub fn sparsity_sweep(
    e: &PreparedEntry,
    samples: &[SampleCount],
    settings: &RunSettings,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    let method = Method::Ours {
        representation: Representation::Normals,
        boundary: true,
    };
    samples
        .iter()
        .map(|&count| {
            let input = match count {
                SampleCount::All => e.raw.clone(),
                SampleCount::Count(n) => apply_holes(&e.raw, &HoleSpec::RandomKeep { n, seed }, None)?,
            };
            let sub = PreparedEntry {
                raw: input,
                ..e.clone()
            };
            let pred = run_method(&sub, method, settings)?;
            let mask = Some(e.raw.valid_mask());
            Ok(SweepPoint {
                samples: count,
                n_input: sub.raw.count_valid(),
                observed: depth_metrics(&pred, &e.truth, mask, EvalSet::Observed)?,
                unobserved: depth_metrics(&pred, &e.truth, mask, EvalSet::Unobserved)?,
            })
        })
        .collect()
}

pub fn sweep_table(points: &[SweepPoint]) -> Result<ReportTable> {
    let mut table = ReportTable::new(&SWEEP_HEADER);
    for p in points {
        table.push(
            p.samples.to_string(),
            vec![
                p.n_input as f64,
                p.observed.rel,
                p.observed.rmse,
                p.unobserved.rel,
                p.unobserved.rmse,
            ],
        )?;
    }
    Ok(table)
}
