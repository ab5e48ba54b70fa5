//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test -p pfl-core --release --test acceptance`. The process exits
//! non-zero on a failed criterion only when `PFL_ACCEPTANCE_STRICT=1`.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pfl_core::assembly::{assemble_motion, DamageMass, Discretization, FieldState};
use pfl_core::cases;
use pfl_core::classify::{
    knn_cross_validate, split, AnnModel, AnnParams, CaseData, ConfusionMatrix, Dataset, KnnModel, Metric, SplitSpec,
    Task, TaskData,
};
use pfl_core::constitutive::{
    degradation, elasticity_tensor, fatigue_source, inverse_lambda, potential_h, potential_h_prime, potential_hf,
    potential_hf_prime, MaterialParams,
};
use pfl_core::labeling::{compute_load_curve, transition_index, BinaryCriterion, LabelScheme, Thresholds};
use pfl_core::mesh::{build_specimen, select_sensors, GridSpec, Mesh, SensorSet, SpecimenParams, DESK_EDGE, PRODUCTION_EDGE};
use pfl_core::sparse::{LinearSolver, SpdSolver};
use pfl_core::timestepper::{newmark_alphas, run_case, step_motion, CaseConfig, FixedEnd, Prescribed, SimulationRecord};
use pfl_core::uq::{derive_seed, mc_accuracy, Algorithm, UqSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
}

struct Runs {
    spec: SpecimenParams,
    mesh: Mesh,
    sensors: SensorSet,
    records: Vec<SimulationRecord>,
}

fn simulate(edge: f64, continued: &[u8]) -> Runs {
    let spec = SpecimenParams::default();
    let mesh = build_specimen(&spec, edge).unwrap();
    let sensors = select_sensors(&mesh, &GridSpec::coarse_to_fine(&spec)).unwrap();
    let records = (1..=6)
        .map(|id| {
            let mut config = CaseConfig::for_case(id).unwrap();
            config.stop.continue_after_failure = continued.contains(&id);
            run_case(&config, &mesh, &sensors).unwrap()
        })
        .collect();
    Runs { spec, mesh, sensors, records }
}

fn case_data(runs: &Runs) -> Vec<CaseData> {
    runs.records.iter().map(|r| CaseData::from_record(r, &runs.sensors).unwrap()).collect()
}

fn criterion_1() -> Outcome {
    let mut bad = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        let ok = if want == 0.0 { got == 0.0 } else { close(got, want, 1e-12) };
        if !ok {
            bad.push(format!("{name}: {got} vs {want}"));
        }
    };
    let d = 1e-3;
    check("g(0)", degradation(0.0), 1.0);
    check("g(1)", degradation(1.0), 0.0);
    check("g(0.5)", degradation(0.5), 0.25);
    check("H(0.5)", potential_h(0.5, d), 0.125);
    check("H'(0.5)", potential_h_prime(0.5, d), 0.5);
    check("H(1.5)", potential_h(1.5, d), 0.5005);
    check("H'(1.5)", potential_h_prime(1.5, d), d);
    check("H(-0.2)", potential_h(-0.2, d), 0.2 * d);
    check("H'(-0.2)", potential_h_prime(-0.2, d), -d);
    check("Hf(0.5)", potential_hf(0.5), -0.5);
    check("Hf(2)", potential_hf(2.0), -1.0);
    check("Hf(-1)", potential_hf(-1.0), 0.0);
    check("Hf'(0.5)", potential_hf_prime(0.5), -1.0);
    check("Hf'(2)", potential_hf_prime(2.0), 0.0);
    check("Hf'(-1)", potential_hf_prime(-1.0), 0.0);
    check("1/lambda(0)", inverse_lambda(0.0, 2e-6, d, 1.0), 2e-6 / 1.001);
    check("1/lambda(1)", inverse_lambda(1.0, 2e-6, d, 1.0), 2e-3);
    let c = elasticity_tensor(160e9, 0.3).unwrap();
    check("C11", c[0][0], 160e9 / 0.91);
    check("C12", c[0][1], 0.3 * 160e9 / 0.91);
    check("C33", c[2][2], 160e9 / 2.6);
    let c0 = elasticity_tensor(7.0, 0.0).unwrap();
    check("C11 nu=0", c0[0][0], 7.0);
    check("C12 nu=0", c0[0][1], 0.0);
    check("C33 nu=0", c0[2][2], 3.5);
    let (a, b, eps, phi) = (5e-7, 1e8, 1e-3, 0.25);
    let want = a * (1.0 - phi) * (c[0][0] * eps * eps + b * eps * eps);
    check("F uniaxial", fatigue_source(&[eps, 0.0, 0.0], &[eps, 0.0, 0.0], phi, &c, a, b), want);
    check("F D=0", fatigue_source(&[eps, 0.0, 0.0], &[0.0; 3], phi, &c, a, b), 0.0);
    check("F phi=1", fatigue_source(&[eps, 0.0, 0.0], &[eps, 0.0, 0.0], 1.0, &c, a, b), 0.0);
    let n = newmark_alphas(0.5, 0.25, 5e-4).unwrap();
    for (name, got, want) in [
        ("a1", n.alpha1, 1.6e7),
        ("a2", n.alpha2, 8000.0),
        ("a3", n.alpha3, 1.0),
        ("a4", n.alpha4, 4000.0),
        ("a5", n.alpha5, -1.0),
        ("a6", n.alpha6, 0.0),
    ] {
        check(name, got, want);
    }
    let total = 33;
    outcome(bad.is_empty(), if bad.is_empty() { format!("{total} closed-form values at 1e-12") } else { bad.join("; ") })
}

fn bar_mesh() -> (SpecimenParams, Mesh) {
    let spec = SpecimenParams { grip_width: 12e-3, fillet_radius: 1e-9, ..SpecimenParams::default() };
    let mesh = build_specimen(&spec, 2e-3).unwrap();
    (spec, mesh)
}

/// Undamped free vibration of the clamped bar from a half-sine velocity.
fn free_vibration_drift() -> f64 {
    let (spec, mesh) = bar_mesh();
    let material = MaterialParams { b: 0.0, c: 0.0, a: 0.0, ..MaterialParams::default() };
    let disc = Discretization::new(&mesh, &material, DamageMass::Lumped).unwrap();
    let n = mesh.n_nodes();
    let ops = assemble_motion(&disc, &vec![0.0; n], &material);
    let fixed = Prescribed::tensile(&mesh, FixedEnd::Clamped, 0.0);
    let l = spec.total_length;
    let omega = std::f64::consts::PI / l * (material.e / material.rho).sqrt();
    let period = 2.0 * std::f64::consts::PI / omega;
    let coeffs = newmark_alphas(0.5, 0.25, period / 40.0).unwrap();

    let mut v = vec![0.0; 2 * n];
    for (i, p) in mesh.nodes.iter().enumerate() {
        v[2 * i] = (std::f64::consts::PI * p[0] / l).sin();
    }
    for &d in &fixed.dofs {
        v[d] = 0.0;
    }
    let mut s = FieldState { u: vec![0.0; 2 * n], v, acc: vec![0.0; 2 * n], phi: vec![0.0; n], fat: vec![0.0; n], t: 0.0 };
    let energy = |s: &FieldState| {
        let mv = disc.mass.mul_vec(&s.v);
        let ku = ops.k_u.mul_vec(&s.u);
        let kin: f64 = s.v.iter().zip(&mv).map(|(a, b)| a * b).sum();
        let pot: f64 = s.u.iter().zip(&ku).map(|(a, b)| -a * b).sum();
        0.5 * (kin + pot)
    };
    let e0 = energy(&s);
    let mut solver = SpdSolver::new(LinearSolver::Direct, disc.vector_pattern());
    let mut worst: f64 = 0.0;
    for _ in 0..40 * 100 {
        let t = s.t + coeffs.dt;
        let (u, v, acc) = step_motion(&s, &ops, &disc.mass, &disc.k_v, &coeffs, &fixed, t, &mut solver).unwrap();
        s = FieldState { u, v, acc, t, ..s };
        worst = worst.max((energy(&s) / e0 - 1.0).abs());
    }
    worst
}

fn elastic_slope_error() -> f64 {
    let (spec, mesh) = bar_mesh();
    let mut config = CaseConfig::for_case(1).unwrap();
    config.case_id = None;
    config.material.c = 0.0;
    config.material.a = 0.0;
    config.fixed_end = FixedEnd::Roller;
    config.stop.t_max = 0.05;
    let sensors = select_sensors(&mesh, &GridSpec::single([0.5 * spec.total_length, 0.0])).unwrap();
    let rec = run_case(&config, &mesh, &sensors).unwrap();
    let n = rec.n_steps();
    let (i, j) = (n / 2, n - 1);
    let slope = (rec.reaction[j] - rec.reaction[i]) / (rec.applied_disp[j] - rec.applied_disp[i]);
    let analytic = config.material.e * spec.gauge_width * spec.thickness / spec.total_length;
    (slope / analytic - 1.0).abs()
}

fn criterion_2() -> Outcome {
    let drift = free_vibration_drift();
    let slope = elastic_slope_error();
    outcome(
        drift < 1e-3 && slope < 0.01,
        format!("energy drift {drift:.2e} over 100 periods (< 1e-3); elastic f/u error {:.3}% (< 1%)", 100.0 * slope),
    )
}

/// After the force first falls below half its peak it never recovers above
/// half, and the run ends below 5% of the peak.
fn single_dominant_peak(f: &[f64]) -> bool {
    let (k, peak) = f.iter().enumerate().fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    if peak <= 0.0 || k == 0 || k + 1 == f.len() {
        return false;
    }
    let Some(first_low) = f[k..].iter().position(|&v| v < 0.5 * peak) else {
        return false;
    };
    f[k + first_low..].iter().all(|&v| v < 0.5 * peak) && *f.last().unwrap() < 0.05 * peak
}

fn criterion_3(desk: &Runs) -> Outcome {
    let delta = cases::table().material(1).unwrap().delta;
    let mut bad = Vec::new();
    let mut lines = Vec::new();
    for r in &desk.records {
        let id = r.case_id.unwrap();
        let df = r.fat_increment_min.iter().copied().fold(f64::INFINITY, f64::min);
        let lo = r.phi_min.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = r.phi_max.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let peak = single_dominant_peak(&r.reaction);
        if df < 0.0 {
            bad.push(format!("case {id} fatigue decreased by {df:.2e}"));
        }
        if lo < -10.0 * delta || hi > 1.0 + 10.0 * delta {
            bad.push(format!("case {id} phi in [{lo}, {hi}]"));
        }
        if !peak {
            bad.push(format!("case {id} force has no single dominant peak"));
        }
        lines.push(format!("{id}: dF>={df:.1e} phi[{lo:.4},{hi:.4}]"));
    }
    let detail = format!("{} nodes; {}", desk.mesh.n_nodes(), if bad.is_empty() { lines.join(" ") } else { bad.join("; ") });
    outcome(bad.is_empty() && desk.mesh.n_nodes() >= 800, detail)
}

/// Region of the most damaged node: mid-gauge, fillet (within 5 mm of a
/// gauge end) or grip.
fn region(spec: &SpecimenParams, mesh: &Mesh, phi: &[f64]) -> (&'static str, f64) {
    let k = (0..phi.len()).max_by(|&a, &b| phi[a].total_cmp(&phi[b])).unwrap();
    let x = mesh.nodes[k][0];
    let d = (x - 0.5 * spec.total_length).abs();
    let half = 0.5 * spec.gauge_length;
    let r = if d < half - 5e-3 {
        "mid-gauge"
    } else if d < half + spec.fillet_radius {
        "fillet"
    } else {
        "grip"
    };
    (r, x)
}

fn criterion_4(prod: &Runs) -> Outcome {
    let reference = [0.48, 0.48, 0.62, 0.78, 0.62, 0.64];
    let mut bad = Vec::new();
    let mut times = Vec::new();
    for (r, want) in prod.records.iter().zip(reference) {
        let id = r.case_id.unwrap();
        match r.failure_time {
            Some(t) => {
                times.push(format!("{id}:{t:.3}/{want}"));
                if !close(t, want, 0.15) {
                    bad.push(format!("case {id} failed at {t:.4} s, reference {want} s"));
                }
            }
            None => bad.push(format!("case {id} did not fail")),
        }
    }
    let regions: Vec<_> =
        prod.records[..3].iter().map(|r| region(&prod.spec, &prod.mesh, &r.final_state.phi)).collect();
    let mut distinct: Vec<_> = regions.iter().map(|r| r.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        bad.push(format!("cases 1-3 all localize in the {}", distinct[0]));
    }
    let where_ = regions.iter().enumerate().map(|(i, (r, x))| format!("{}:{r}@{:.1}mm", i + 1, x * 1e3)).collect::<Vec<_>>();
    outcome(
        bad.is_empty(),
        format!(
            "{} nodes; failure s {}; localization {}{}",
            prod.mesh.n_nodes(),
            times.join(" "),
            where_.join(" "),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn criterion_5(prod: &Runs) -> Outcome {
    let curve = compute_load_curve(&prod.records[0]).unwrap();
    let at = |c| transition_index(&curve, c).map(|k| curve.t[k]).ok();
    let t1 = at(BinaryCriterion::PeakForce);
    let t3 = at(BinaryCriterion::ForceDrop { fraction: 0.90 });
    let t2 = at(BinaryCriterion::MinSlope { window: pfl_core::labeling::DEFAULT_WINDOW });
    let (Some(t1), Some(t3), Some(t2)) = (t1, t3, t2) else {
        return outcome(false, format!("missing transition: {t1:?} {t3:?} {t2:?}"));
    };
    let ordered = t1 < t3 && t3 < t2;
    let within = close(t1, 0.39, 0.1) && close(t3, 0.47, 0.1) && close(t2, 0.51, 0.1);
    outcome(
        ordered && within,
        format!("case 1 Type1 {t1:.4} < Type3(90%) {t3:.4} < Type2 {t2:.4} s; reference 0.39 / 0.47 / 0.51 (+-10%)"),
    )
}

fn evaluate(data: &Dataset, seed: u64) -> (f64, f64) {
    let parts = split(&data.y, &SplitSpec { comb: 2, seed: derive_seed(seed, 0, 0), ..SplitSpec::default() }).unwrap();
    let test = data.subset(&parts.test);
    let pool: Vec<usize> = parts.train.iter().chain(&parts.val).copied().collect();
    let knn = KnnModel::fit(&data.subset(&pool), 2, Metric::Cosine).unwrap().predict_all(&test.x).unwrap();
    let ann = AnnModel::train(&data.subset(&parts.train), &data.subset(&parts.val), AnnParams::default(), derive_seed(seed, 0, 1))
        .unwrap()
        .predict_all(&test.x);
    let acc = |p: &[u8]| ConfusionMatrix::new(p, &test.y, &data.class_domain).unwrap().total_accuracy();
    (acc(&knn), acc(&ann))
}

fn criterion_6(cases: &[CaseData]) -> Outcome {
    let mut bad = Vec::new();
    let mut lines = Vec::new();
    for id in 1..=6 {
        let data = TaskData::build(Task::Presence { case_id: id }, LabelScheme::Multi3, cases).unwrap();
        let (knn, ann) = evaluate(&data.dataset().unwrap(), 0);
        lines.push(format!("{id}:{knn:.3}/{ann:.3}"));
        if knn < 0.97 || ann < 0.97 {
            bad.push(format!("presence case {id} knn {knn:.4} ann {ann:.4} (need 0.97)"));
        }
    }
    let loc = TaskData::build(Task::Location, LabelScheme::Location9, cases).unwrap();
    let (knn, ann) = evaluate(&loc.dataset().unwrap(), 0);
    if knn < 0.93 {
        bad.push(format!("location knn {knn:.4} (need 0.93)"));
    }
    if ann < 0.75 {
        bad.push(format!("location ann {ann:.4} (need 0.75)"));
    }
    outcome(
        bad.is_empty(),
        format!(
            "presence knn/ann {}; location knn {knn:.4} ann {ann:.4}{}",
            lines.join(" "),
            if bad.is_empty() { String::new() } else { format!("; below bar: {}", bad.join("; ")) }
        ),
    )
}

fn criterion_7(cases: &[CaseData]) -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for (name, base) in [("multi3", LabelScheme::Multi3), ("multi4", LabelScheme::Multi4(Thresholds::default()))] {
        let ds = TaskData::build(Task::Location, base, cases).unwrap().dataset().unwrap();
        let parts = split(&ds.y, &SplitSpec { comb: 2, seed: derive_seed(0, 0, 0), ..SplitSpec::default() }).unwrap();
        let pool: Vec<usize> = parts.train.iter().chain(&parts.val).copied().collect();
        let cv = knn_cross_validate(&ds.subset(&pool), &[2, 10], 10, Metric::Cosine, 11).unwrap();
        pass &= cv[0].1 >= cv[1].1;
        lines.push(format!("{name} base: k=2 {:.4} vs k=10 {:.4}", cv[0].1, cv[1].1));
    }
    outcome(pass, format!("10-fold CV, location task; {}", lines.join("; ")))
}

fn brute_force_knn(train: &[Vec<f64>], labels: &[u8], q: &[f64], k: usize) -> u8 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut d: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let dot: f64 = x.iter().zip(q).map(|(a, b)| a * b).sum();
            (1.0 - dot / (norm(x) * norm(q)), i)
        })
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let near = &d[..k];
    let mut best = (0usize, 0u8);
    for &(_, i) in near {
        let c = labels[i];
        let votes = near.iter().filter(|&&(_, j)| labels[j] == c).count();
        if votes > best.0 {
            best = (votes, c);
        }
    }
    best.1
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, dim) = (300, 12);
    let train: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(1..=3)).collect();
    let x = Array2::from_shape_fn((n, dim), |(i, j)| train[i][j]);
    let ds = Dataset::new(x, labels.clone(), vec![1, 2, 3]).unwrap();
    let mut mismatches = 0;
    let mut queries = 0;
    for (qi, k) in (0..1000).zip([1usize, 2, 3, 5].iter().cycle()) {
        let model = KnnModel::fit(&ds, *k, Metric::Cosine).unwrap();
        let q: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let got = model.predict(ndarray::ArrayView1::from(&q)).unwrap();
        if got != brute_force_knn(&train, &labels, &q, *k) {
            mismatches += 1;
        }
        queries = qi + 1;
    }

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n_in = rng.random_range(2..=6);
        let classes: Vec<u8> = (1..=rng.random_range(2u8..=4)).collect();
        let mut model = AnnModel::random(n_in, classes.clone(), AnnParams::default(), &mut rng);
        let rows = 8;
        let x = Array2::from_shape_fn((rows, n_in), |_| rng.random::<f64>());
        let target: Vec<usize> = (0..rows).map(|_| rng.random_range(0..classes.len())).collect();
        let idx: Vec<usize> = (0..rows).collect();
        let (_, grad) = model.loss_and_gradient(&x, &target, &idx);
        let p0 = model.parameters();
        let h = 1e-6;
        let mut fd = vec![0.0; p0.len()];
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] = p0[i] + h;
            model.set_parameters(&p).unwrap();
            let up = model.loss_and_gradient(&x, &target, &idx).0;
            p[i] = p0[i] - h;
            model.set_parameters(&p).unwrap();
            let down = model.loss_and_gradient(&x, &target, &idx).0;
            fd[i] = (up - down) / (2.0 * h);
        }
        model.set_parameters(&p0).unwrap();
        let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = fd.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(diff / scale);
    }
    outcome(
        mismatches == 0 && worst < 1e-5,
        format!("k-NN {mismatches} mismatches in {queries} queries; ANN worst relative gradient error {worst:.2e} over 20 networks"),
    )
}

fn criterion_9(cases: &[CaseData]) -> Outcome {
    let mut bad = Vec::new();
    let mut clean = Vec::new();
    for id in 1..=6 {
        let spec = UqSpec {
            runs: 100,
            noise_stds: vec![0.0],
            task: Task::Presence { case_id: id },
            algorithms: vec![Algorithm::Knn],
            ..UqSpec::default()
        };
        let cell = mc_accuracy(&spec, cases).unwrap().cells[0].clone();
        clean.push(format!("{id}:{:.4}+-{:.4}", cell.mean, cell.std));
        if !(cell.mean > 0.99 && cell.std < 0.01) {
            bad.push(format!("clean case {id} mean {:.4} std {:.4}", cell.mean, cell.std));
        }
    }
    let spec = UqSpec {
        runs: 100,
        noise_stds: vec![0.0, 0.01, 0.02, 0.05, 0.10, 0.20],
        task: Task::Presence { case_id: 3 },
        algorithms: vec![Algorithm::Knn],
        ..UqSpec::default()
    };
    let result = mc_accuracy(&spec, cases).unwrap();
    let trend = result.trend(Algorithm::Knn);
    for w in trend.windows(2) {
        let se = (w[0].standard_error().powi(2) + w[1].standard_error().powi(2)).sqrt();
        if w[1].mean > w[0].mean + 2.0 * se {
            bad.push(format!("mean rises from {:.4} to {:.4} at noise {}", w[0].mean, w[1].mean, w[1].noise_std));
        }
    }
    let means = trend.iter().map(|c| format!("{}:{:.4}", c.noise_std, c.mean)).collect::<Vec<_>>();
    outcome(
        bad.is_empty(),
        format!(
            "100 runs, k-NN presence; clean {}; case 3 vs noise {}{}",
            clean.join(" "),
            means.join(" "),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    let mut run = |n: usize, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("criterion {n}: {} ({secs:.1} s) {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, o, secs));
    };

    run(1, &mut criterion_1);
    run(2, &mut criterion_2);
    let t = Instant::now();
    let desk = simulate(DESK_EDGE, &[1, 2, 3, 4, 5, 6]);
    println!("desk runs of cases 1-6: {:.1} s", t.elapsed().as_secs_f64());
    let desk_cases = case_data(&desk);
    run(3, &mut || criterion_3(&desk));
    let t = Instant::now();
    let prod = simulate(PRODUCTION_EDGE, &[1]);
    println!("production runs of cases 1-6: {:.1} s", t.elapsed().as_secs_f64());
    run(4, &mut || criterion_4(&prod));
    run(5, &mut || criterion_5(&prod));
    run(6, &mut || criterion_6(&desk_cases));
    run(7, &mut || criterion_7(&desk_cases));
    run(8, &mut criterion_8);
    run(9, &mut || criterion_9(&desk_cases));

    let failed: Vec<usize> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass ({:.0} s total){}",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failed: {failed:?}") }
    );
    if !failed.is_empty() && std::env::var("PFL_ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
