//! Acceptance suite. Prints one PASS/FAIL line per criterion and a
//! summary line. Set `ACCEPTANCE_STRICT=1` to exit non-zero on any FAIL.

use std::io::Cursor;
use std::time::Instant;

use depthfill::completion::middle_pixel;
use depthfill::constraints::{LinearRow, LinearSystem};
use depthfill::experiments::{
    compare_methods, prepare_entry, run_method, sparsity_sweep, sweep_table, Method, NoiseLevels, RunSettings,
    SampleCount,
};
use depthfill::geometry::normals_from_depth;
use depthfill::io::{self, Pfm, ReportTable};
use depthfill::metrics::{depth_metrics, metrics_from_pairs, normal_metrics, DeltaMode, EvalSet};
use depthfill::solver::{solve_spd, CsrMatrix};
use depthfill::synthetic::{render_scene, standard_suite, HoleVariant, SceneKind, Shape, SuiteEntry};
use depthfill::{
    complete_depth, BoundaryMap, CameraIntrinsics, CompletionConfig, DepthImage, DerivativeMap, NormalMap,
    Representation, SolveOptions,
};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos().to_degrees()
}

fn ours(boundary: bool) -> Method {
    Method::Ours {
        representation: Representation::Normals,
        boundary,
    }
}

fn planar_exactness() -> Outcome {
    let mut worst_err: f64 = 0.0;
    let mut worst_time: f64 = 0.0;
    for kind in [SceneKind::FrontoPlane, SceneKind::SlantedPlane] {
        let entry = SuiteEntry::new(kind, 128, 128, HoleVariant::Drop, 0);
        let e = prepare_entry(&entry, &NoiseLevels::NONE, 0).unwrap();
        let start = Instant::now();
        let out = complete_depth(
            &e.raw,
            Some(&e.normals),
            Some(&e.boundary),
            None,
            &e.intrinsics,
            &CompletionConfig::default(),
        )
        .unwrap();
        worst_time = worst_time.max(start.elapsed().as_secs_f64());
        for (a, b) in out.depth.data().iter().zip(e.truth.data()) {
            worst_err = worst_err.max((a - b).abs());
        }
    }
    outcome(
        worst_err < 1e-5 && worst_time < 10.0,
        format!("max |error| {worst_err:.3e} m (< 1e-5), slowest solve {worst_time:.2} s (< 10 s)"),
    )
}

fn boundary_weighting_helps() -> Outcome {
    let entry = SuiteEntry::new(SceneKind::OcclusionStep, 128, 128, HoleVariant::Rect, 0);
    let e = prepare_entry(&entry, &NoiseLevels::default(), 0).unwrap();
    let settings = RunSettings::default();
    let rmse = |b: bool| {
        let pred = run_method(&e, ours(b), &settings).unwrap();
        depth_metrics(&pred, &e.truth, Some(e.raw.valid_mask()), EvalSet::Unobserved)
            .unwrap()
            .rmse
    };
    let (with, without) = (rmse(true), rmse(false));
    let gain = (without - with) / without;
    outcome(
        with < without && gain >= 0.05,
        format!("RMSE with B {with:.4} m, without {without:.4} m, improvement {:.1}% (>= 5%)", 100.0 * gain),
    )
}

fn baseline_ordering() -> Outcome {
    let methods = [ours(true), Method::Bilateral, Method::Smooth];
    let res = compare_methods(&standard_suite(0), &methods, &NoiseLevels::default(), &RunSettings::default(), 0).unwrap();
    let (o, b, s) = (res[0].1.rel, res[1].1.rel, res[2].1.rel);
    outcome(
        o < b && b < s,
        format!("mean Rel ours {o:.4} < bilateral {b:.4} < smooth {s:.4}"),
    )
}

fn sparsity_robustness() -> Outcome {
    let entry = SuiteEntry::new(SceneKind::BoxRoom, 320, 256, HoleVariant::Rect, 0);
    let e = prepare_entry(&entry, &NoiseLevels::default(), 0).unwrap();
    let mut counts: Vec<SampleCount> = [20, 50, 100, 200, 500, 1000, 2000]
        .into_iter()
        .map(SampleCount::Count)
        .collect();
    counts.push(SampleCount::All);
    let points = sparsity_sweep(&e, &counts, &RunSettings::default(), 0).unwrap();
    // Read the curve back from the CSV as a user of the sweep would.
    let mut csv = Vec::new();
    sweep_table(&points[..7]).unwrap().encode(&mut csv).unwrap();
    let table = ReportTable::decode(&csv[..]).unwrap();
    let col = table.column("rel_unobserved").unwrap();
    let curve: Vec<f64> = table.rows.iter().map(|r| r.values[col]).collect();
    let monotone = curve.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    let (at_2000, full) = (points[6].unobserved.rel, points[7].unobserved.rel);
    let curve_text: Vec<String> = curve.iter().map(|r| format!("{r:.4}")).collect();
    outcome(
        at_2000 <= 2.0 * full && monotone && table.rows.len() == 7,
        format!(
            "Rel@2000 {at_2000:.4} <= 2 x Rel@all {full:.4}; curve [{}] monotone within 10%: {monotone}",
            curve_text.join(", ")
        ),
    )
}

fn anchored_scale_equivariance() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, entry) in standard_suite(0).iter().filter(|e| e.intrinsics.width == 64).enumerate() {
        let e = prepare_entry(entry, &NoiseLevels::default(), i as u64).unwrap();
        let (w, h) = e.truth.dims();
        let empty = DepthImage::invalid(w, h);
        let solve = |d: f64| {
            let cfg = CompletionConfig {
                anchor: Some((middle_pixel(w, h), d)),
                ..Default::default()
            };
            complete_depth(&empty, Some(&e.normals), Some(&e.boundary), None, &e.intrinsics, &cfg)
                .unwrap()
                .depth
        };
        let (a, b) = (solve(3.0), solve(6.0));
        for (x3, x6) in a.data().iter().zip(b.data()) {
            worst = worst.max((x6 - 2.0 * x3).abs() / (2.0 * x3).abs().max(f64::MIN_POSITIVE));
        }
    }
    outcome(
        worst <= 1e-6,
        format!("max relative deviation from 2x over 10 scenes {worst:.3e} (<= 1e-6)"),
    )
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize) -> LinearSystem {
    let mut sys = LinearSystem::new(n, 1);
    for _ in 0..rng.random_range(1..3 * n) {
        let k = rng.random_range(1..=4.min(n));
        let entries = (0..k)
            .map(|_| (rng.random_range(0..n), rng.random_range(-2.0..2.0)))
            .collect();
        sys.push_row(LinearRow {
            entries,
            rhs: rng.random_range(-5.0..5.0),
            weight: rng.random_range(0.0..10.0),
        })
        .unwrap();
    }
    sys
}

fn random_grid_system(rng: &mut ChaCha8Rng) -> LinearSystem {
    let w = rng.random_range(1..=8);
    let h = rng.random_range(1..=64 / w);
    let depth = DepthImage::from_fn(w, h, |_, _| Some(rng.random_range(0.5..5.0)));
    let first = rng.random_range(0..w * h);
    let raw = depth.masked(|i| i == first || rng.random_bool(0.2));
    let normals: Vec<[f64; 3]> = (0..w * h)
        .map(|_| {
            let n = Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), -1.0).normalize();
            [n.x, n.y, n.z]
        })
        .collect();
    let normals = NormalMap::new(w, h, normals).unwrap();
    let k = CameraIntrinsics::with_fov(w, h, 60.0);
    let mut sys = LinearSystem::new(w, h);
    sys.add_data_rows(&raw, 1000.0).unwrap();
    sys.add_normal_rows(&normals, None, &k, 1.0).unwrap();
    sys.add_smoothness_rows(1e-3);
    sys
}

fn energy_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut symmetric = true;
    for _ in 0..100 {
        let n = rng.random_range(1..=64);
        let sys = random_rows(&mut rng, n);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let direct: f64 = sys
            .rows()
            .iter()
            .map(|r| {
                let s: f64 = r.entries.iter().map(|&(i, c)| c * x[i]).sum::<f64>() - r.rhs;
                r.weight * s * s
            })
            .sum();
        let asm = sys.assemble().unwrap();
        let quad = asm.energy(&x);
        worst = worst.max((quad - direct).abs() / direct.abs().max(1e-300));
        symmetric &= asm.matrix.is_symmetric();
    }
    let mut min_probe = f64::INFINITY;
    for _ in 0..100 {
        let sys = random_grid_system(&mut rng);
        let a = sys.assemble().unwrap().matrix;
        let z: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let az = a.mul_vec(&z);
        let zz: f64 = z.iter().map(|v| v * v).sum();
        min_probe = min_probe.min(z.iter().zip(&az).map(|(p, q)| p * q).sum::<f64>() / zz);
    }
    outcome(
        worst <= 1e-9 && symmetric && min_probe > 0.0,
        format!(
            "max relative energy mismatch {worst:.2e} (<= 1e-9), all symmetric: {symmetric}, min z'Az/z'z {min_probe:.3e} (> 0)"
        ),
    )
}

/// Gaussian elimination restricted to the band of `a`, without pivoting.
fn banded_elimination(a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    let n = a.dim();
    let bw = (0..n).flat_map(|i| a.row(i).map(move |(j, _)| i.abs_diff(j))).max().unwrap_or(0);
    let stride = 2 * bw + 1;
    let at = |i: usize, j: usize| i * stride + j + bw - i;
    let mut m = vec![0.0; n * stride];
    for i in 0..n {
        for (j, v) in a.row(i) {
            m[at(i, j)] = v;
        }
    }
    let mut rhs = b.to_vec();
    for k in 0..n {
        let last = (k + bw).min(n - 1);
        for i in k + 1..=last {
            let f = m[at(i, k)] / m[at(k, k)];
            if f == 0.0 {
                continue;
            }
            for j in k..=last {
                m[at(i, j)] -= f * m[at(k, j)];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let last = (k + bw).min(n - 1);
        let s: f64 = (k + 1..=last).map(|j| m[at(k, j)] * x[j]).sum();
        x[k] = (rhs[k] - s) / m[at(k, k)];
    }
    x
}

fn solver_cross_check() -> Outcome {
    let opts = SolveOptions::default();
    let mut worst_rel: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    let mut count = 0;
    for (i, entry) in standard_suite(0).iter().filter(|e| e.intrinsics.width == 64).enumerate() {
        let e = prepare_entry(entry, &NoiseLevels::default(), i as u64).unwrap();
        for rep in Representation::ALL {
            let cfg = CompletionConfig {
                representation: rep,
                ..Default::default()
            };
            let sys = depthfill::completion::build_system(
                &e.raw,
                Some(&e.normals),
                Some(&e.boundary),
                Some(&e.derivs),
                &e.intrinsics,
                &cfg,
            )
            .unwrap();
            let asm = sys.assemble().unwrap();
            let x = solve_spd(&asm.matrix, &asm.rhs, &opts).unwrap();
            let oracle = banded_elimination(&asm.matrix, &asm.rhs);
            for (a, b) in x.iter().zip(&oracle) {
                worst_rel = worst_rel.max((a - b).abs() / b.abs());
            }
            let ax = asm.matrix.mul_vec(&x);
            let grad: f64 = ax.iter().zip(&asm.rhs).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let bnorm: f64 = asm.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst_grad = worst_grad.max(grad / (opts.cg_rel_residual * bnorm));
            count += 1;
        }
    }
    outcome(
        worst_rel <= 1e-6 && worst_grad <= 10.0,
        format!(
            "{count} systems: max relative CG-vs-elimination gap {worst_rel:.2e} (<= 1e-6), max |Ax-b| / (tol |b|) {worst_grad:.2} (<= 10)"
        ),
    )
}

fn metric_correctness() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let img = |v: &[f64]| DepthImage::from_depths(v.len(), 1, v.to_vec()).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;

    let t = img(&[1.0, 2.0, 3.0]);
    let m = depth_metrics(&t, &t, None, EvalSet::All).unwrap();
    check("identity", m.rel == 0.0 && m.rmse == 0.0 && m.delta == [100.0; 5]);

    let m = depth_metrics(&img(&[1.0, 2.0, 4.0]), &img(&[1.0, 2.0, 2.0]), None, EvalSet::All).unwrap();
    check(
        "pred [1,2,4] vs truth [1,2,2]",
        m.rel == 0.0 && close(m.rmse, (4.0f64 / 3.0).sqrt()) && m.delta.iter().all(|&d| close(d, 200.0 / 3.0)),
    );

    let t = img(&[1.0, 2.0, 3.0, 5.0]);
    let m = depth_metrics(&t.scaled(1.04), &t, None, EvalSet::All).unwrap();
    check("uniform 1.04 ratio", m.delta[0] == 100.0 && close(m.rel, 0.04));

    let z = NormalMap::filled(4, 1, Vector3::new(0.0, 0.0, -1.0));
    let r = normal_metrics(&z, &z, None).unwrap();
    check("identical normals", r.mean_deg == 0.0 && r.median_deg == 0.0 && r.pct == [100.0; 3]);

    let x = NormalMap::filled(4, 1, Vector3::new(-1.0, 0.0, 0.0));
    let r = normal_metrics(&x, &z, None).unwrap();
    check("orthogonal normals", close(r.mean_deg, 90.0) && r.pct == [0.0; 3]);

    let a = 20f64.to_radians();
    let half: Vec<[f64; 3]> = (0..4)
        .map(|i| if i < 2 { [0.0, 0.0, -1.0] } else { [-a.sin(), 0.0, -a.cos()] })
        .collect();
    let r = normal_metrics(&NormalMap::new(4, 1, half).unwrap(), &z, None).unwrap();
    check(
        "half at 20 degrees",
        close(r.median_deg, 10.0) && r.pct[0] == 50.0 && r.pct[1] == 100.0,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut monotone = true;
    for _ in 0..1000 {
        let n = rng.random_range(1..50);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.01..10.0), rng.random_range(0.01..10.0)))
            .collect();
        for mode in [DeltaMode::MaxRatio, DeltaMode::Literal] {
            let d = metrics_from_pairs(&pairs, mode).unwrap().delta;
            monotone &= d.windows(2).all(|w| w[0] <= w[1]);
        }
    }
    check("delta monotonicity on 1000 inputs", monotone);
    let pass = failures.is_empty();
    outcome(
        pass,
        if pass {
            "6 hand-computed examples within 1e-9, delta monotone on 1000 random inputs".into()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn geometry_agreement() -> Outcome {
    let mut plane_worst: f64 = 0.0;
    let mut sphere_worst: f64 = 0.0;
    let mut implicit_worst: f64 = 0.0;
    for entry in standard_suite(0) {
        let k = entry.intrinsics;
        let r = render_scene(&entry.scene, &k);
        let (w, h) = k.dims();
        for v in 0..h {
            for u in 0..w {
                let p = v * w + u;
                let prim = r.primitive[p].unwrap();
                let x = k.back_project(u, v, r.depth.data()[p]).unwrap();
                implicit_worst = implicit_worst.max(entry.scene.primitives[prim].shape.implicit(&x).abs());
            }
        }
        let est = normals_from_depth(&r.depth, &k);
        match entry.kind {
            SceneKind::FrontoPlane | SceneKind::SlantedPlane => {
                for p in 0..w * h {
                    plane_worst = plane_worst.max(angle_deg(&est.normal(p).unwrap(), &r.normals.normal(p).unwrap()));
                }
            }
            SceneKind::SphereOnPlane => {
                let sphere = entry
                    .scene
                    .primitives
                    .iter()
                    .position(|p| matches!(p.shape, Shape::Sphere { .. }))
                    .unwrap();
                for v in 1..h - 1 {
                    for u in 1..w - 1 {
                        let p = v * w + u;
                        let stencil = [p, p - 1, p + 1, p - w, p + w];
                        if stencil.iter().all(|&q| r.primitive[q] == Some(sphere) && r.boundary.get(q) == 0.0) {
                            sphere_worst =
                                sphere_worst.max(angle_deg(&est.normal(p).unwrap(), &r.normals.normal(p).unwrap()));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    outcome(
        plane_worst < 0.5 && sphere_worst < 1.0 && implicit_worst <= 1e-9,
        format!(
            "planes {plane_worst:.2e} deg (< 0.5), sphere interior {sphere_worst:.3} deg (< 1), implicit residual {implicit_worst:.2e} (<= 1e-9)"
        ),
    )
}

fn format_round_trips() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (w, h) = (37, 23);

    let depth = DepthImage::from_fn(w, h, |_, _| rng.random_bool(0.8).then(|| rng.random_range(0.001..65.5)));
    let mut png = Vec::new();
    io::encode_depth_png(&depth, &mut png).unwrap();
    let back = io::decode_depth_png(Cursor::new(png)).unwrap();
    let png_ok = back.valid_mask() == depth.valid_mask()
        && depth
            .valid_indices()
            .all(|i| (back.data()[i] - depth.data()[i]).abs() <= 0.0005 + 1e-12);
    if !png_ok {
        failures.push("PNG-16");
    }

    let normals: Vec<[f64; 3]> = (0..w * h)
        .map(|_| {
            let n = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), -1.0f64).normalize();
            [n.x as f32 as f64, n.y as f32 as f64, n.z as f32 as f64]
        })
        .collect();
    let normals = NormalMap::new(w, h, normals).unwrap();
    let boundary = BoundaryMap::new(w, h, (0..w * h).map(|_| rng.random_range(0.0f32..=1.0) as f64).collect()).unwrap();
    let derivs = DerivativeMap::new(
        w,
        h,
        (0..w * h)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0f32..1.0) as f64))
            .collect(),
    )
    .unwrap();
    let pfm = |p: Pfm| {
        let mut buf = Vec::new();
        p.encode(&mut buf).unwrap();
        Pfm::decode(&buf[..]).unwrap()
    };
    let bits = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
    let n_back = NormalMap::try_from(pfm(Pfm::from(&normals))).unwrap();
    let b_back = BoundaryMap::try_from(pfm(Pfm::from(&boundary))).unwrap();
    let d_back = DerivativeMap::try_from(pfm(Pfm::from(&derivs))).unwrap();
    let pfm_ok = bits(normals.data().as_flattened(), n_back.data().as_flattened())
        && bits(boundary.data(), b_back.data())
        && bits(derivs.data().as_flattened(), d_back.data().as_flattened());
    if !pfm_ok {
        failures.push("PFM");
    }

    let k = CameraIntrinsics::new(525.5, 523.25, 319.5, 239.5, 640, 480).unwrap();
    if io::parse_intrinsics(&io::format_intrinsics(&k)).unwrap() != k {
        failures.push("intrinsics");
    }

    let mut table = ReportTable::metrics();
    let m = depthfill::metrics::MetricsReport {
        rel: 0.089,
        rmse: 0.1234,
        delta: [12.5, 25.0, 50.0, 75.0, 100.0],
        n_eval: 4096,
    };
    table.push_metrics("N_boundary", &m).unwrap();
    let mut csv = Vec::new();
    table.encode(&mut csv).unwrap();
    let back = ReportTable::decode(&csv[..]).unwrap();
    if back != table || back.metrics_row(0).unwrap() != m {
        failures.push("CSV");
    }

    let pass = failures.is_empty();
    outcome(
        pass,
        if pass {
            "PNG-16 (mask exact, <= 0.5 mm), PFM normals/boundary/derivatives (bit-exact), intrinsics, CSV".into()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("planar exactness", planar_exactness),
        ("boundary weighting helps", boundary_weighting_helps),
        ("baseline ordering", baseline_ordering),
        ("sparsity robustness", sparsity_robustness),
        ("anchored scale equivariance", anchored_scale_equivariance),
        ("energy/assembly identity", energy_identity),
        ("solver cross-check", solver_cross_check),
        ("metric correctness", metric_correctness),
        ("geometry oracle agreement", geometry_agreement),
        ("format round-trips", format_round_trips),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {status} {name}: {} [{:.1} s]",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v != "0");
    if failed > 0 && strict {
        std::process::exit(1);
    }
}
