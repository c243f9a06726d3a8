//! Analytic scenes rendered by ray casting, hole masks emulating sensor
//! failures, and prediction-noise models.
//!
//! # Scene files
//!
//! One directive per line, `#` starts a comment, values are `key=value`
//! pairs and vectors are comma-separated without spaces:
//!
//! ```text
//! camera fx=55.4 fy=55.4 cx=32 cy=32 width=64 height=64
//! plane  id=wall  normal=0,0,-1 offset=-4 albedo=0.8,0.8,0.8
//! sphere id=ball  center=0,0,3 radius=0.5
//! box    id=crate min=-1,0,2 max=0,1,3
//! ```
//!
//! A plane is the set `normal . X = offset` (the normal is normalised on
//! load). `id` defaults to the directive name followed by its index and
//! `albedo` to a fixed palette colour.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Point3, Vector3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{face_camera, CameraIntrinsics};
use crate::image::{to_array, BoundaryMap, ColorImage, DepthImage, DerivativeMap, NormalMap};
use crate::{Error, Result};

/// Depth jump (metres) that counts as an occlusion in rendered boundaries.
pub const RENDER_JUMP_THRESHOLD: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Points with `normal . X = offset`; `normal` is unit length.
    Plane { normal: Vector3<f64>, offset: f64 },
    Sphere { center: Point3<f64>, radius: f64 },
    /// Axis-aligned box.
    Cuboid { min: Point3<f64>, max: Point3<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Primitive {
    pub id: String,
    pub shape: Shape,
    pub albedo: [f32; 3],
}

/// A ray hit: distance along the unnormalised ray (equal to the depth) and
/// the outward surface normal.
#[derive(Clone, Copy, Debug)]
struct Hit {
    t: f64,
    normal: Vector3<f64>,
}

impl Shape {
    pub fn plane(normal: Vector3<f64>, offset: f64) -> Self {
        let len = normal.norm();
        Shape::Plane {
            normal: normal / len,
            offset: offset / len,
        }
    }

    /// Plane with the given normal passing through `point`.
    pub fn plane_through(normal: Vector3<f64>, point: Point3<f64>) -> Self {
        let n = normal.normalize();
        Shape::Plane {
            normal: n,
            offset: n.dot(&point.coords),
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match self {
            Shape::Plane { normal, offset } => normal.norm() > 0.0 && offset.is_finite(),
            Shape::Sphere { radius, center } => *radius > 0.0 && center.iter().all(|c| c.is_finite()),
            Shape::Cuboid { min, max } => (0..3).all(|i| min[i] < max[i]),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("degenerate primitive {self:?}")))
        }
    }

    /// Value of the surface's implicit function at `x`; zero on the surface.
    pub fn implicit(&self, x: &Point3<f64>) -> f64 {
        match self {
            Shape::Plane { normal, offset } => normal.dot(&x.coords) - offset,
            Shape::Sphere { center, radius } => (x - center).norm() - radius,
            Shape::Cuboid { min, max } => (0..3)
                .map(|i| (min[i] - x[i]).max(x[i] - max[i]))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn intersect(&self, ray: &Vector3<f64>) -> Option<Hit> {
        match self {
            Shape::Plane { normal, offset } => {
                let denom = normal.dot(ray);
                if denom == 0.0 {
                    return None;
                }
                let t = offset / denom;
                (t > 0.0).then_some(Hit { t, normal: *normal })
            }
            Shape::Sphere { center, radius } => {
                let a = ray.norm_squared();
                let b = -2.0 * ray.dot(&center.coords);
                let c = center.coords.norm_squared() - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                // Numerically stable pair of roots.
                let q = -0.5 * (b + b.signum() * sq);
                let (r0, r1) = (q / a, c / q);
                let (near, far) = (r0.min(r1), r0.max(r1));
                let t = if near > 0.0 {
                    near
                } else if far > 0.0 {
                    far
                } else {
                    return None;
                };
                let x = ray * t;
                Some(Hit {
                    t,
                    normal: (x - center.coords) / *radius,
                })
            }
            Shape::Cuboid { min, max } => {
                let (mut t_near, mut t_far) = (f64::NEG_INFINITY, f64::INFINITY);
                let (mut near_axis, mut far_axis) = (0, 0);
                for i in 0..3 {
                    if ray[i] == 0.0 {
                        if !(min[i]..=max[i]).contains(&0.0) {
                            return None;
                        }
                        continue;
                    }
                    let (t0, t1) = {
                        let a = min[i] / ray[i];
                        let b = max[i] / ray[i];
                        (a.min(b), a.max(b))
                    };
                    if t0 > t_near {
                        t_near = t0;
                        near_axis = i;
                    }
                    if t1 < t_far {
                        t_far = t1;
                        far_axis = i;
                    }
                }
                if t_near > t_far {
                    return None;
                }
                let (t, axis) = if t_near > 0.0 {
                    (t_near, near_axis)
                } else if t_far > 0.0 {
                    (t_far, far_axis)
                } else {
                    return None;
                };
                let mut normal = Vector3::zeros();
                normal[axis] = 1.0;
                Some(Hit { t, normal })
            }
        }
    }
}

const PALETTE: [[f32; 3]; 6] = [
    [0.80, 0.78, 0.72],
    [0.35, 0.45, 0.70],
    [0.75, 0.30, 0.25],
    [0.30, 0.65, 0.35],
    [0.90, 0.75, 0.30],
    [0.55, 0.35, 0.60],
];

fn palette(index: usize) -> [f32; 3] {
    PALETTE[index % PALETTE.len()]
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
}

impl Scene {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a primitive with the default id and palette albedo.
    pub fn with(mut self, shape: Shape) -> Self {
        let i = self.primitives.len();
        let kind = match shape {
            Shape::Plane { .. } => "plane",
            Shape::Sphere { .. } => "sphere",
            Shape::Cuboid { .. } => "box",
        };
        self.primitives.push(Primitive {
            id: format!("{kind}{i}"),
            shape,
            albedo: palette(i),
        });
        self
    }

    /// Checks primitive parameters and that each primitive is hit by at
    /// least one camera ray.
    pub fn validate(&self, k: &CameraIntrinsics) -> Result<()> {
        for p in &self.primitives {
            p.shape.check()?;
            let visible = (0..k.height).any(|v| (0..k.width).any(|u| p.shape.intersect(&k.ray(u, v)).is_some()));
            if !visible {
                return Err(Error::Domain(format!("primitive {} is not in front of the camera", p.id)));
            }
        }
        Ok(())
    }

    /// Parses the scene-file grammar; returns the camera when a `camera`
    /// line is present.
    pub fn parse(text: &str) -> Result<(Scene, Option<CameraIntrinsics>)> {
        let mut scene = Scene::new();
        let mut camera = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::format("scene", format!("line {}: {reason}", lineno + 1));
            let mut tokens = line.split_whitespace();
            let kind = tokens.next().expect("line is not empty");
            let mut fields = std::collections::BTreeMap::new();
            for tok in tokens {
                let (k, v) = tok
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, got {tok:?}")))?;
                if fields.insert(k, v).is_some() {
                    return Err(err(format!("duplicate key {k:?}")));
                }
            }
            let mut take = |key: &str| fields.remove(key).ok_or_else(|| err(format!("missing {key}")));
            let scalar = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
            let triple = |s: &str| -> Result<[f64; 3]> {
                let parts: Vec<_> = s.split(',').map(scalar).collect::<Result<_>>()?;
                parts
                    .try_into()
                    .map_err(|_| err(format!("expected three comma-separated values, got {s:?}")))
            };
            if kind == "camera" {
                let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("{s:?}: {e}")));
                let k = CameraIntrinsics::new(
                    scalar(take("fx")?)?,
                    scalar(take("fy")?)?,
                    scalar(take("cx")?)?,
                    scalar(take("cy")?)?,
                    int(take("width")?)?,
                    int(take("height")?)?,
                )?;
                camera = Some(k);
            } else {
                let shape = match kind {
                    "plane" => {
                        let n = triple(take("normal")?)?;
                        Shape::plane(Vector3::from(n), scalar(take("offset")?)?)
                    }
                    "sphere" => Shape::Sphere {
                        center: Point3::from(triple(take("center")?)?),
                        radius: scalar(take("radius")?)?,
                    },
                    "box" => Shape::Cuboid {
                        min: Point3::from(triple(take("min")?)?),
                        max: Point3::from(triple(take("max")?)?),
                    },
                    other => return Err(err(format!("unknown directive {other:?}"))),
                };
                shape.check().map_err(|e| err(e.to_string()))?;
                scene = scene.with(shape);
                let last = scene.primitives.last_mut().expect("just pushed");
                if let Some(id) = fields.remove("id") {
                    last.id = id.to_string();
                }
                if let Some(a) = fields.remove("albedo") {
                    let a = triple(a)?;
                    last.albedo = [a[0] as f32, a[1] as f32, a[2] as f32];
                }
            }
            if let Some(k) = fields.keys().next() {
                return Err(err(format!("unknown key {k:?}")));
            }
        }
        Ok((scene, camera))
    }

    /// Serialises to the scene-file grammar.
    pub fn to_text(&self, camera: Option<&CameraIntrinsics>) -> String {
        let v = |x: &[f64]| x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        if let Some(k) = camera {
            out += &format!(
                "camera fx={} fy={} cx={} cy={} width={} height={}\n",
                k.fx, k.fy, k.cx, k.cy, k.width, k.height
            );
        }
        for p in &self.primitives {
            let albedo = v(&p.albedo.map(|c| c as f64));
            let body = match &p.shape {
                Shape::Plane { normal, offset } => format!("plane id={} normal={} offset={}", p.id, v(normal.as_slice()), offset),
                Shape::Sphere { center, radius } => format!("sphere id={} center={} radius={}", p.id, v(center.coords.as_slice()), radius),
                Shape::Cuboid { min, max } => {
                    format!("box id={} min={} max={}", p.id, v(min.coords.as_slice()), v(max.coords.as_slice()))
                }
            };
            out += &format!("{body} albedo={albedo}\n");
        }
        out
    }
}

/// Ground truth rendered from a [`Scene`].
#[derive(Clone, Debug, PartialEq)]
pub struct Rendering {
    pub depth: DepthImage,
    pub normals: NormalMap,
    pub boundary: BoundaryMap,
    /// Flat per-primitive albedo, black where nothing is hit.
    pub color: ColorImage,
    /// Index of the primitive seen at each pixel.
    pub primitive: Vec<Option<usize>>,
}

/// Casts one ray per pixel and keeps the nearest positive hit.
///
/// The boundary map marks every pixel whose visible primitive differs from a
/// 4-neighbour's, and pixel pairs whose depths depart by more than
/// [`RENDER_JUMP_THRESHOLD`] from each other's tangent plane. Measuring the
/// jump against the tangent plane keeps steep but smooth surfaces unmarked.
pub fn render_scene(scene: &Scene, k: &CameraIntrinsics) -> Rendering {
    let (w, h) = k.dims();
    let mut depth = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    let mut normals = Vec::with_capacity(w * h);
    let mut color = Vec::with_capacity(w * h);
    let mut primitive = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let ray = k.ray(u, v);
            let best = scene
                .primitives
                .iter()
                .enumerate()
                .filter_map(|(i, p)| p.shape.intersect(&ray).map(|hit| (i, hit)))
                .fold(None, |best: Option<(usize, Hit)>, (i, hit)| match best {
                    Some((_, b)) if b.t <= hit.t => best,
                    _ => Some((i, hit)),
                });
            match best {
                Some((i, hit)) => {
                    depth.push(hit.t);
                    valid.push(true);
                    normals.push(to_array(&face_camera(hit.normal.normalize(), &ray)));
                    color.push(scene.primitives[i].albedo);
                    primitive.push(Some(i));
                }
                None => {
                    depth.push(0.0);
                    valid.push(false);
                    normals.push(NormalMap::INVALID);
                    color.push([0.0; 3]);
                    primitive.push(None);
                }
            }
        }
    }
    let depth = DepthImage::new(w, h, depth, valid).expect("sized by construction");
    // Depth of the ray through `q` on the tangent plane at `p`.
    let tangent_depth = |p: usize, q: usize| -> Option<f64> {
        let n = Vector3::from(normals[p]);
        let denom = n.dot(&k.ray_at(q));
        let t = n.dot(&k.ray_at(p)) * depth.data()[p] / denom;
        (denom != 0.0 && t.is_finite()).then_some(t)
    };
    let jump = |p: usize, q: usize| -> bool {
        let dq = depth.data()[q];
        tangent_depth(p, q).is_none_or(|t| (t - dq).abs() > RENDER_JUMP_THRESHOLD)
    };
    let mut boundary = vec![0.0; w * h];
    for v in 0..h {
        for u in 0..w {
            let p = v * w + u;
            for q in [(u + 1 < w).then(|| p + 1), (v + 1 < h).then(|| p + w)].into_iter().flatten() {
                let occluded = match (primitive[p], primitive[q]) {
                    (Some(a), Some(b)) => a != b || jump(p, q) || jump(q, p),
                    (a, b) => a != b,
                };
                if occluded {
                    boundary[p] = 1.0;
                    boundary[q] = 1.0;
                }
            }
        }
    }
    Rendering {
        depth,
        normals: NormalMap::new(w, h, normals).expect("sized by construction"),
        boundary: BoundaryMap::new(w, h, boundary).expect("values are 0 or 1"),
        color: ColorImage::new(w, h, color).expect("sized by construction"),
        primitive,
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn contains(&self, u: usize, v: usize) -> bool {
        (self.x0..self.x1).contains(&u) && (self.y0..self.y1).contains(&v)
    }
}

/// How sensor holes are punched into a depth image.
#[derive(Clone, Debug, PartialEq)]
pub enum HoleSpec {
    /// Keep exactly `n` randomly chosen observed pixels (all if fewer).
    RandomKeep { n: usize, seed: u64 },
    /// Drop `round(fraction * observed)` randomly chosen observed pixels.
    RandomDrop { fraction: f64, seed: u64 },
    Rectangles(Vec<Rect>),
    /// Drop pixels viewed more obliquely than `max_angle_deg`.
    Grazing { max_angle_deg: f64 },
    /// Drop pixels deeper than `max_depth` metres.
    FarRange { max_depth: f64 },
}

impl HoleSpec {
    fn check(&self, width: usize, height: usize) -> Result<()> {
        let ok = match self {
            HoleSpec::RandomKeep { .. } => true,
            HoleSpec::RandomDrop { fraction, .. } => (0.0..=1.0).contains(fraction),
            HoleSpec::Rectangles(rects) => rects
                .iter()
                .all(|r| r.x0 <= r.x1 && r.y0 <= r.y1 && r.x1 <= width && r.y1 <= height),
            HoleSpec::Grazing { max_angle_deg } => *max_angle_deg > 0.0 && *max_angle_deg < 90.0,
            HoleSpec::FarRange { max_depth } => *max_depth > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid hole spec {self} for {width}x{height}")))
        }
    }
}

impl fmt::Display for HoleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HoleSpec::RandomKeep { n, seed } => write!(f, "keep:{n}:{seed}"),
            HoleSpec::RandomDrop { fraction, seed } => write!(f, "drop:{fraction}:{seed}"),
            HoleSpec::Rectangles(rects) => {
                let parts: Vec<_> = rects
                    .iter()
                    .map(|r| format!("{},{},{},{}", r.x0, r.y0, r.x1, r.y1))
                    .collect();
                write!(f, "rect:{}", parts.join(";"))
            }
            HoleSpec::Grazing { max_angle_deg } => write!(f, "grazing:{max_angle_deg}"),
            HoleSpec::FarRange { max_depth } => write!(f, "far:{max_depth}"),
        }
    }
}

/// `keep:N[:SEED]`, `drop:F[:SEED]`, `rect:X0,Y0,X1,Y1[;...]`,
/// `grazing:DEG` or `far:M`. Seeds default to 0.
impl FromStr for HoleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: &str| Error::format("hole spec", format!("{s:?}: {reason}"));
        let (kind, rest) = s.split_once(':').ok_or_else(|| err("expected KIND:ARGS"))?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| err("bad number"));
        let int = |t: &str| t.trim().parse::<u64>().map_err(|_| err("bad integer"));
        fn split_seed(rest: &str) -> (&str, Option<&str>) {
            match rest.split_once(':') {
                Some((a, seed)) => (a, Some(seed)),
                None => (rest, None),
            }
        }
        let seeded = |rest| -> Result<(&str, u64)> {
            let (a, seed) = split_seed(rest);
            Ok((a, seed.map(int).transpose()?.unwrap_or(0)))
        };
        match kind {
            "keep" => {
                let (n, seed) = seeded(rest)?;
                Ok(HoleSpec::RandomKeep {
                    n: int(n)? as usize,
                    seed,
                })
            }
            "drop" => {
                let (f, seed) = seeded(rest)?;
                Ok(HoleSpec::RandomDrop { fraction: num(f)?, seed })
            }
            "rect" => rest
                .split(';')
                .map(|r| {
                    let c: Vec<usize> = r.split(',').map(|t| int(t).map(|v| v as usize)).collect::<Result<_>>()?;
                    match c[..] {
                        [x0, y0, x1, y1] => Ok(Rect { x0, y0, x1, y1 }),
                        _ => Err(err("rectangles need four coordinates")),
                    }
                })
                .collect::<Result<_>>()
                .map(HoleSpec::Rectangles),
            "grazing" => Ok(HoleSpec::Grazing {
                max_angle_deg: num(rest)?,
            }),
            "far" => Ok(HoleSpec::FarRange { max_depth: num(rest)? }),
            _ => Err(err("unknown kind")),
        }
    }
}

/// Returns a copy of `depth` with its observed-mask reduced per `spec`.
///
/// Grazing-angle holes need the surface normals and the camera.
pub fn apply_holes(
    depth: &DepthImage,
    spec: &HoleSpec,
    geometry: Option<(&NormalMap, &CameraIntrinsics)>,
) -> Result<DepthImage> {
    let (w, h) = depth.dims();
    spec.check(w, h)?;
    let valid: Vec<usize> = depth.valid_indices().collect();
    match spec {
        HoleSpec::RandomKeep { n, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let n = (*n).min(valid.len());
            let mut keep = vec![false; depth.len()];
            for i in sample(&mut rng, valid.len(), n) {
                keep[valid[i]] = true;
            }
            Ok(depth.masked(|i| keep[i]))
        }
        HoleSpec::RandomDrop { fraction, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let n_drop = ((fraction * valid.len() as f64).round() as usize).min(valid.len());
            let mut drop = vec![false; depth.len()];
            for i in sample(&mut rng, valid.len(), n_drop) {
                drop[valid[i]] = true;
            }
            Ok(depth.masked(|i| !drop[i]))
        }
        HoleSpec::Rectangles(rects) => Ok(depth.masked(|i| !rects.iter().any(|r| r.contains(i % w, i / w)))),
        HoleSpec::Grazing { max_angle_deg } => {
            let (normals, k) = geometry.ok_or(Error::MissingMap("normals and intrinsics for grazing-angle holes"))?;
            crate::image::check_dims((w, h), normals.dims())?;
            crate::image::check_dims((w, h), k.dims())?;
            let cos_max = max_angle_deg.to_radians().cos();
            Ok(depth.masked(|i| match normals.normal(i) {
                Some(n) => -k.ray_at(i).normalize().dot(&n) >= cos_max,
                None => false,
            }))
        }
        HoleSpec::FarRange { max_depth } => Ok(depth.masked(|i| depth.data()[i] <= *max_depth)),
    }
}

/// Rotates every normal by a random angle `|N(0, sigma)|` about a random axis
/// in its tangent plane.
pub fn perturb_normals(normals: &NormalMap, sigma_deg: f64, seed: u64) -> Result<NormalMap> {
    if !(sigma_deg >= 0.0) {
        return Err(Error::Domain(format!("sigma must be nonnegative, got {sigma_deg}")));
    }
    if sigma_deg == 0.0 {
        return Ok(normals.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle = Normal::new(0.0, sigma_deg.to_radians()).expect("positive sigma");
    let data = (0..normals.data().len())
        .map(|i| {
            let Some(n) = normals.normal(i) else {
                return NormalMap::INVALID;
            };
            let n = n.normalize();
            let theta: f64 = angle.sample(&mut rng);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            let t1 = n.cross(&helper).normalize();
            let t2 = n.cross(&t1);
            let axis = t1 * phi.cos() + t2 * phi.sin();
            let rotated = n * theta.cos() + axis.cross(&n) * theta.sin();
            to_array(&face_camera(rotated.normalize(), &-n))
        })
        .collect();
    NormalMap::new(normals.width(), normals.height(), data)
}

/// Adds Gaussian noise with standard deviation `rel_sigma * D(p)` to every
/// derivative of pixel `p`, so that errors scale with depth.
pub fn perturb_derivatives(derivs: &DerivativeMap, depth: &DepthImage, rel_sigma: f64, seed: u64) -> Result<DerivativeMap> {
    crate::image::check_dims(derivs.dims(), depth.dims())?;
    if !(rel_sigma >= 0.0) {
        return Err(Error::Domain(format!("sigma must be nonnegative, got {rel_sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let data = derivs
        .data()
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let scale = rel_sigma * depth.depth(i).unwrap_or(0.0).abs();
            d.map(|x| x + scale * unit.sample(&mut rng))
        })
        .collect();
    DerivativeMap::new(derivs.width(), derivs.height(), data)
}

/// Scenes of the standard benchmark suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SceneKind {
    FrontoPlane,
    SlantedPlane,
    /// Near slab occluding the left half of a far slanted wall.
    OcclusionStep,
    /// Sphere resting on a floor in front of a back wall.
    SphereOnPlane,
    /// Inside a room of five planes.
    BoxRoom,
}

impl SceneKind {
    pub const ALL: [SceneKind; 5] = [
        SceneKind::FrontoPlane,
        SceneKind::SlantedPlane,
        SceneKind::OcclusionStep,
        SceneKind::SphereOnPlane,
        SceneKind::BoxRoom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::FrontoPlane => "fronto_plane",
            SceneKind::SlantedPlane => "slanted_plane",
            SceneKind::OcclusionStep => "occlusion_step",
            SceneKind::SphereOnPlane => "sphere_on_plane",
            SceneKind::BoxRoom => "box_room",
        }
    }

    pub fn scene(self) -> Scene {
        let p = Point3::new;
        let v = Vector3::new;
        match self {
            SceneKind::FrontoPlane => Scene::new().with(Shape::plane(v(0.0, 0.0, -1.0), -2.5)),
            SceneKind::SlantedPlane => Scene::new().with(Shape::plane_through(v(0.4, -0.3, -1.0), p(0.0, 0.0, 3.0))),
            SceneKind::OcclusionStep => Scene::new()
                .with(Shape::plane_through(v(0.2, 0.0, -1.0), p(0.0, 0.0, 4.0)))
                .with(Shape::Cuboid {
                    min: p(-50.0, -50.0, 2.0),
                    max: p(0.0, 50.0, 2.3),
                }),
            SceneKind::SphereOnPlane => Scene::new()
                .with(Shape::plane(v(0.0, 1.0, 0.0), 1.0))
                .with(Shape::plane(v(0.0, 0.0, 1.0), 7.0))
                .with(Shape::Sphere {
                    center: p(0.3, 0.3, 4.0),
                    radius: 0.7,
                }),
            SceneKind::BoxRoom => Scene::new()
                .with(Shape::plane(v(0.0, 1.0, 0.0), 1.2))
                .with(Shape::plane(v(0.0, 1.0, 0.0), -1.2))
                .with(Shape::plane(v(1.0, 0.0, 0.0), -1.8))
                .with(Shape::plane(v(1.0, 0.0, 0.0), 1.8))
                .with(Shape::plane(v(0.0, 0.0, 1.0), 5.0)),
        }
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SceneKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::format("scene kind", format!("unknown scene {s:?}")))
    }
}

/// Hole patterns of the standard suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HoleVariant {
    /// Half of the pixels dropped at random.
    Drop,
    /// A central rectangle and a lower-left rectangle.
    Rect,
}

impl HoleVariant {
    pub const ALL: [HoleVariant; 2] = [HoleVariant::Drop, HoleVariant::Rect];

    pub fn name(self) -> &'static str {
        match self {
            HoleVariant::Drop => "drop",
            HoleVariant::Rect => "rect",
        }
    }

    pub fn spec(self, width: usize, height: usize, seed: u64) -> HoleSpec {
        let x = |f: f64| (f * width as f64).round() as usize;
        let y = |f: f64| (f * height as f64).round() as usize;
        match self {
            HoleVariant::Drop => HoleSpec::RandomDrop { fraction: 0.5, seed },
            HoleVariant::Rect => HoleSpec::Rectangles(vec![
                Rect {
                    x0: x(0.35),
                    y0: y(0.3),
                    x1: x(0.65),
                    y1: y(0.7),
                },
                Rect {
                    x0: x(0.05),
                    y0: y(0.6),
                    x1: x(0.3),
                    y1: y(0.95),
                },
            ]),
        }
    }
}

impl FromStr for HoleVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HoleVariant::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::format("hole variant", format!("unknown variant {s:?}")))
    }
}

/// Horizontal field of view of suite cameras, degrees.
pub const SUITE_HFOV_DEG: f64 = 60.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteEntry {
    pub name: String,
    pub kind: SceneKind,
    pub variant: HoleVariant,
    pub scene: Scene,
    pub intrinsics: CameraIntrinsics,
    pub holes: HoleSpec,
}

impl SuiteEntry {
    pub fn new(kind: SceneKind, width: usize, height: usize, variant: HoleVariant, seed: u64) -> Self {
        SuiteEntry {
            name: format!("{}_{}x{}_{}", kind.name(), width, height, variant.name()),
            kind,
            variant,
            scene: kind.scene(),
            intrinsics: CameraIntrinsics::with_fov(width, height, SUITE_HFOV_DEG),
            holes: variant.spec(width, height, seed),
        }
    }

    /// Parses `KIND_WxH_VARIANT`, e.g. `box_room_320x256_drop`.
    pub fn from_name(name: &str, seed: u64) -> Result<Self> {
        let err = || Error::format("suite entry", format!("cannot parse {name:?}"));
        let (rest, variant) = name.rsplit_once('_').ok_or_else(err)?;
        let (kind, size) = rest.rsplit_once('_').ok_or_else(err)?;
        let (w, h) = size.split_once('x').ok_or_else(err)?;
        let (w, h) = (w.parse().map_err(|_| err())?, h.parse().map_err(|_| err())?);
        if w == 0 || h == 0 {
            return Err(err());
        }
        Ok(Self::new(kind.parse()?, w, h, variant.parse()?, seed))
    }

    pub fn render(&self) -> Rendering {
        render_scene(&self.scene, &self.intrinsics)
    }
}

/// Suite resolutions (square).
pub const SUITE_SIZES: [usize; 2] = [64, 128];

/// Five scenes at two resolutions with two hole variants each, 20 entries.
/// Random hole seeds derive from `seed` and the entry position.
pub fn standard_suite(seed: u64) -> Vec<SuiteEntry> {
    let mut out = Vec::new();
    for kind in SceneKind::ALL {
        for size in SUITE_SIZES {
            for variant in HoleVariant::ALL {
                let entry_seed = seed.wrapping_mul(1000).wrapping_add(out.len() as u64);
                out.push(SuiteEntry::new(kind, size, size, variant, entry_seed));
            }
        }
    }
    out
}
