use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use depthfill::baselines::{inpaint_joint_bilateral, inpaint_smooth, BilateralParams};
use depthfill::experiments::{
    ablation_table, prepare_entry, sparsity_sweep, sweep_table, NoiseLevels, PreparedEntry, RunSettings, SampleCount,
};
use depthfill::io::{self, ReportTable};
use depthfill::metrics::{depth_metrics_with, DeltaMode, EvalSet};
use depthfill::synthetic::{
    apply_holes, perturb_derivatives, perturb_normals, render_scene, standard_suite, HoleSpec, Scene, SuiteEntry,
};
use depthfill::{
    complete_depth, CompletionConfig, DepthImage, DerivativeMap, Representation, SolveOptions,
    SolverWeights,
};

#[derive(Parser)]
#[command(name = "depthfill", version, about = "Depth completion from normals and occlusion boundaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render synthetic scenes to depth, normal, boundary and intrinsics files.
    Synth(SynthArgs),
    /// Complete a depth image from normals (and optionally boundaries and derivatives).
    Complete(CompleteArgs),
    /// Fill holes with a smoothness-only or joint bilateral baseline.
    Baseline(BaselineArgs),
    /// Compare a predicted depth image with ground truth.
    Eval(EvalArgs),
    /// Error as a function of the number of observed pixels.
    SweepSparsity(SweepArgs),
    /// Representation and boundary-weight ablation over the standard suite.
    AblateRep(AblateArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Render every entry of the standard suite with this seed.
    #[arg(long, conflicts_with_all = ["scene", "holes"], required_unless_present = "scene")]
    suite: Option<u64>,
    /// Scene file with a `camera` line.
    #[arg(long, requires = "holes")]
    scene: Option<PathBuf>,
    /// Hole spec, e.g. `drop:0.5:7`, `keep:2000`, `rect:10,10,40,30`.
    #[arg(long)]
    holes: Option<HoleSpec>,
    /// Angular noise added to the written normals and derivatives, degrees.
    #[arg(long, default_value_t = 0.0)]
    noise_deg: f64,
    /// Seed for the noise (scene mode).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rep {
    Normal,
    Deriv,
    Both,
}

impl From<Rep> for Representation {
    fn from(r: Rep) -> Self {
        match r {
            Rep::Normal => Representation::Normals,
            Rep::Deriv => Representation::Derivatives,
            Rep::Both => Representation::NormalsAndDerivatives,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Cg,
    Direct,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1000.0)]
    lambda_d: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_n: f64,
    #[arg(long, default_value_t = 0.001)]
    lambda_s: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_dd: f64,
    /// CG stopping threshold on the relative residual.
    #[arg(long)]
    cg_tol: Option<f64>,
}

impl SolverArgs {
    fn weights(&self, use_boundary_weight: bool) -> SolverWeights {
        SolverWeights {
            lambda_d: self.lambda_d,
            lambda_n: self.lambda_n,
            lambda_s: self.lambda_s,
            lambda_dd: self.lambda_dd,
            use_boundary_weight,
        }
    }

    fn options(&self, method: Method) -> SolveOptions {
        let mut opts = match method {
            Method::Cg => SolveOptions::default(),
            Method::Direct => SolveOptions::direct(),
        };
        if let Some(tol) = self.cg_tol {
            opts.cg_rel_residual = tol;
        }
        opts
    }
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    normals: Option<PathBuf>,
    #[arg(long)]
    boundary: Option<PathBuf>,
    #[arg(long)]
    derivs: Option<PathBuf>,
    #[arg(long)]
    intrinsics: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Rep::Normal)]
    rep: Rep,
    #[arg(long)]
    no_boundary_weight: bool,
    /// Pin pixel `u,v` to a depth in metres, e.g. `32,32,3.0`.
    #[arg(long, value_parser = parse_anchor)]
    anchor: Option<((usize, usize), f64)>,
    #[arg(long, value_enum, default_value_t = Method::Cg)]
    method: Method,
    #[command(flatten)]
    solver: SolverArgs,
}

fn parse_anchor(s: &str) -> Result<((usize, usize), f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || format!("expected u,v,depth but got {s:?}");
    match parts[..] {
        [u, v, d] => Ok((
            (u.parse().map_err(|_| bad())?, v.parse().map_err(|_| bad())?),
            d.parse().map_err(|_| bad())?,
        )),
        _ => Err(bad()),
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    Smooth,
    Bilateral,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    method: BaselineMethod,
    #[arg(long)]
    depth: PathBuf,
    /// Guidance image, required by `bilateral`.
    #[arg(long)]
    color: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8.0)]
    sigma_spatial: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma_color: f64,
    #[arg(long, default_value_t = 16)]
    radius: usize,
    #[arg(long, default_value_t = 8)]
    max_passes: usize,
    /// Linear solver for `smooth`.
    #[arg(long, value_enum, default_value_t = Method::Cg)]
    solver: Method,
    #[command(flatten)]
    weights: SolverArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pixels {
    Observed,
    Unobserved,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Delta {
    MaxRatio,
    Literal,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Raw input whose valid mask defines the observed/unobserved split.
    #[arg(long)]
    raw: Option<PathBuf>,
    /// Defaults to `unobserved` with `--raw`, `all` without.
    #[arg(long, value_enum)]
    pixels: Option<Pixels>,
    #[arg(long, value_enum, default_value_t = Delta::MaxRatio)]
    delta: Delta,
    /// Label written in the `method` column.
    #[arg(long, default_value = "pred")]
    label: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Entry name `KIND_WxH_VARIANT`, e.g. `box_room_320x256_rect`.
    #[arg(long)]
    suite_entry: String,
    /// Comma-separated sample counts; `all` uses every raw pixel.
    #[arg(long, value_delimiter = ',', default_value = "20,50,100,200,500,1000,2000")]
    samples: Vec<SampleCount>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = depthfill::experiments::NORMAL_NOISE_DEG)]
    noise_deg: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    /// Seed of the standard suite.
    #[arg(long)]
    suite: u64,
    #[arg(long, default_value_t = depthfill::experiments::NORMAL_NOISE_DEG)]
    noise_deg: f64,
    #[arg(long)]
    out: PathBuf,
}

fn read_depth(path: &Path) -> Result<DepthImage> {
    io::read_depth_png(path).with_context(|| format!("reading {}", path.display()))
}

fn write_prepared(dir: &Path, e: &PreparedEntry) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let ctx = |f: &str| format!("writing {}", dir.join(f).display());
    io::write_depth_png(dir.join("depth.png"), &e.raw).with_context(|| ctx("depth.png"))?;
    io::write_depth_png(dir.join("truth.png"), &e.truth).with_context(|| ctx("truth.png"))?;
    io::write_normals_pfm(dir.join("normals.pfm"), &e.normals).with_context(|| ctx("normals.pfm"))?;
    io::write_boundary_pfm(dir.join("boundary.pfm"), &e.boundary).with_context(|| ctx("boundary.pfm"))?;
    io::write_derivatives_pfm(dir.join("derivs.pfm"), &e.derivs).with_context(|| ctx("derivs.pfm"))?;
    io::write_color_png(dir.join("color.png"), &e.color).with_context(|| ctx("color.png"))?;
    io::write_intrinsics(dir.join("intrinsics.txt"), &e.intrinsics).with_context(|| ctx("intrinsics.txt"))?;
    Ok(())
}

fn noise(deg: f64) -> NoiseLevels {
    NoiseLevels {
        normal_sigma_deg: deg,
        derivative_sigma_deg: deg,
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let levels = noise(a.noise_deg);
    if let Some(seed) = a.suite {
        for (i, entry) in standard_suite(seed).iter().enumerate() {
            let e = prepare_entry(entry, &levels, seed.wrapping_mul(1000).wrapping_add(i as u64))?;
            write_prepared(&a.out.join(&entry.name), &e)?;
        }
        return Ok(());
    }
    let (Some(path), Some(holes)) = (a.scene, a.holes) else {
        bail!("either --suite or --scene with --holes is required");
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let (scene, camera) = Scene::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    let k = camera.with_context(|| format!("{} has no camera line", path.display()))?;
    scene.validate(&k)?;
    let r = render_scene(&scene, &k);
    let raw = apply_holes(&r.depth, &holes, Some((&r.normals, &k)))?;
    let normals = perturb_normals(&r.normals, levels.normal_sigma_deg, a.seed.wrapping_mul(2))?;
    let derivs = perturb_derivatives(
        &DerivativeMap::from_depth(&r.depth),
        &r.depth,
        levels.derivative_sigma_deg.to_radians().tan() / k.fx,
        a.seed.wrapping_mul(2).wrapping_add(1),
    )?;
    let name = path.file_stem().map_or("scene".into(), |s| s.to_string_lossy().into_owned());
    let e = PreparedEntry {
        name,
        intrinsics: k,
        truth: r.depth,
        raw,
        normals,
        boundary: r.boundary,
        derivs,
        color: r.color,
    };
    write_prepared(&a.out, &e)
}

fn complete(a: CompleteArgs) -> Result<()> {
    let raw = read_depth(&a.depth)?;
    let normals = a
        .normals
        .as_ref()
        .map(|p| io::read_normals_pfm(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let boundary = a
        .boundary
        .as_ref()
        .map(|p| io::read_boundary_pfm(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let derivs = a
        .derivs
        .as_ref()
        .map(|p| io::read_derivatives_pfm(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let k = io::read_intrinsics(&a.intrinsics).with_context(|| format!("reading {}", a.intrinsics.display()))?;
    let cfg = CompletionConfig {
        representation: a.rep.into(),
        weights: a.solver.weights(!a.no_boundary_weight),
        anchor: a.anchor,
        solve_options: a.solver.options(a.method),
    };
    let out = complete_depth(
        &raw,
        normals.as_ref(),
        boundary.as_ref(),
        derivs.as_ref(),
        &k,
        &cfg,
    )?;
    let depth = if out.non_physical.is_empty() {
        out.depth
    } else {
        eprintln!(
            "warning: {} pixels solved to non-positive depth and are written as invalid",
            out.non_physical.len()
        );
        let bad: std::collections::HashSet<usize> = out.non_physical.into_iter().collect();
        out.depth.masked(|i| !bad.contains(&i))
    };
    io::write_depth_png(&a.out, &depth).with_context(|| format!("writing {}", a.out.display()))
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let raw = read_depth(&a.depth)?;
    let depth = match a.method {
        BaselineMethod::Smooth => inpaint_smooth(&raw, &a.weights.weights(false), &a.weights.options(a.solver))?,
        BaselineMethod::Bilateral => {
            let path = a.color.as_ref().context("--method bilateral needs --color")?;
            let color = io::read_color_png(path).with_context(|| format!("reading {}", path.display()))?;
            let params = BilateralParams {
                sigma_spatial: a.sigma_spatial,
                sigma_color: a.sigma_color,
                radius: a.radius,
                max_passes: a.max_passes,
            };
            let fill = inpaint_joint_bilateral(&raw, &color, &params)?;
            if !fill.unfilled.is_empty() {
                eprintln!("warning: {} pixels could not be filled", fill.unfilled.len());
            }
            fill.depth
        }
    };
    io::write_depth_png(&a.out, &depth).with_context(|| format!("writing {}", a.out.display()))
}

fn eval(a: EvalArgs) -> Result<()> {
    let pred = read_depth(&a.pred)?;
    let truth = read_depth(&a.truth)?;
    let raw = a.raw.as_deref().map(read_depth).transpose()?;
    let set = match (a.pixels, &raw) {
        (Some(Pixels::Observed), _) => EvalSet::Observed,
        (Some(Pixels::Unobserved), _) | (None, Some(_)) => EvalSet::Unobserved,
        (Some(Pixels::All), _) | (None, None) => EvalSet::All,
    };
    let mode = match a.delta {
        Delta::MaxRatio => DeltaMode::MaxRatio,
        Delta::Literal => DeltaMode::Literal,
    };
    let report = depth_metrics_with(&pred, &truth, raw.as_ref().map(|r| r.valid_mask()), set, mode)?;
    let mut table = ReportTable::metrics();
    table.push_metrics(a.label, &report)?;
    table.write(&a.out).with_context(|| format!("writing {}", a.out.display()))
}

fn sweep(a: SweepArgs) -> Result<()> {
    if a.samples.is_empty() {
        bail!("--samples needs at least one count");
    }
    let entry = SuiteEntry::from_name(&a.suite_entry, a.seed)?;
    let e = prepare_entry(&entry, &noise(a.noise_deg), a.seed)?;
    let points = sparsity_sweep(&e, &a.samples, &RunSettings::default(), a.seed)?;
    sweep_table(&points)?
        .write(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))
}

fn ablate(a: AblateArgs) -> Result<()> {
    let table = ablation_table(&standard_suite(a.suite), &noise(a.noise_deg), &RunSettings::default(), a.suite)?;
    table.write(&a.out).with_context(|| format!("writing {}", a.out.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Complete(a) => complete(a),
        Command::Baseline(a) => baseline(a),
        Command::Eval(a) => eval(a),
        Command::SweepSparsity(a) => sweep(a),
        Command::AblateRep(a) => ablate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let head: Vec<&str> = text.lines().map(str::trim).take_while(|l| !l.is_empty()).collect();
            eprintln!("{}", head.join(" "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
