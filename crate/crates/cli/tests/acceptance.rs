//! Acceptance checks, one PASS/FAIL line per criterion.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use gdrc_conic::{SolveOptions, SolveStatus};
use gdrc_core::bench::{
    gaussian_generator, preset, run_experiment, BenchmarkReport, ExperimentConfig, ModelChoice, SourceSpec,
};
use gdrc_core::data::Dataset;
use gdrc_core::models::{compile, prepare, Fitted};
use gdrc_core::{fit, gap_bound, support_function, CoreSet, ModelKind, ModelParams, NormOrder};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

const VALIDATION_TOL: f64 = 1e-6;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Worst certificate margins of every optimal GDRC solve seen so far.
#[derive(Default)]
struct Certificates {
    solves: usize,
    worst: f64,
    failures: Vec<String>,
}

impl Certificates {
    fn record(&mut self, label: &str, passed: bool, margin: f64) {
        self.solves += 1;
        self.worst = if self.solves == 1 { margin } else { self.worst.min(margin) };
        if !passed || margin < -VALIDATION_TOL {
            self.failures.push(format!("{label} (margin {margin:.2e})"));
        }
    }

    fn fitted(&mut self, label: &str, f: &Fitted) {
        if f.solution.status == SolveStatus::Optimal {
            self.record(label, f.validation.passed, f.validation.worst_margin());
        }
    }

    fn report(&mut self, r: &BenchmarkReport) {
        for rec in r.records.iter().filter(|t| t.model.starts_with("GDRC") && t.status == Some(SolveStatus::Optimal)) {
            let label = format!("{} {} trial {}", r.experiment, rec.model, rec.trial);
            self.record(&label, rec.validation_passed.unwrap_or(false), rec.worst_margin.unwrap_or(f64::NEG_INFINITY));
        }
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

fn run(cfg: &ExperimentConfig) -> BenchmarkReport {
    run_experiment(&cfg.source.load().expect("source loads"), cfg).expect("experiment runs")
}

fn acc(r: &BenchmarkReport, model: &str) -> (f64, f64) {
    let row = r.row(model).unwrap_or_else(|| panic!("row {model}"));
    (row.acc_mean.unwrap_or(f64::NAN), row.acc_std.unwrap_or(f64::NAN))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Twenty generator instances with n in 4..=12 and N = 80, alternating
/// between the default and the shrunken core-set radius.
fn instances() -> Vec<(Dataset, ModelParams)> {
    (0..20)
        .map(|i| {
            let n = 4 + i % 9;
            let ds = gaussian_generator(n, 80, 1.0, 1.0, 500 + i as u64).unwrap();
            let mut p = ModelParams::default();
            p.ambiguity.radius_scale = if i % 2 == 0 { 1.0 } else { 0.05 };
            (ds, p)
        })
        .collect()
}

fn criteria_1_and_2a(certs: &mut Certificates) -> (Outcome, Outcome) {
    let mut worst_rel = 0.0f64;
    let mut eq_fail = Vec::new();
    let mut sound_fail = Vec::new();
    let mut worst_slack = f64::INFINITY;
    for (i, (ds, params)) in instances().iter().enumerate() {
        let n = ds.n();
        let prepared = prepare(ds, params).unwrap();
        let solve = |kind| compile(kind, ds, &prepared, params).unwrap().solve(&opts());
        let (full, same, half) = match (
            solve(ModelKind::Gdrc),
            solve(ModelKind::GdrcApp { rank: n }),
            solve(ModelKind::GdrcApp { rank: n.div_ceil(2) }),
        ) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            (a, b, c) => {
                let err = [a.err(), b.err(), c.err()].into_iter().flatten().next().unwrap();
                eq_fail.push(format!("instance {i}: {err}"));
                sound_fail.push(format!("instance {i}: {err}"));
                continue;
            }
        };
        for (label, f) in [("full", &full), ("app(n)", &same), ("app(n/2)", &half)] {
            certs.fitted(&format!("instance {i} {label}"), f);
        }
        let (vn, vr) = (full.classifier.objective, half.classifier.objective);
        let d = rel(vn, same.classifier.objective);
        worst_rel = worst_rel.max(d);
        if d > 1e-4 {
            eq_fail.push(format!("instance {i} (n={n}): {vn} vs {}", same.classifier.objective));
        }
        let bound = gap_bound(&half.classifier, &prepared.profiles, params.c).unwrap();
        let gap = vn - vr;
        worst_slack = worst_slack.min(bound + 1e-6 - gap);
        if gap < -1e-6 || gap > bound + 1e-6 {
            sound_fail.push(format!("instance {i} (n={n}): gap {gap:.3e} bound {bound:.3e}"));
        }
    }
    let c1 = outcome(
        eq_fail.is_empty(),
        format!("worst relative difference {worst_rel:.2e} over 20 instances{}", failures_suffix(&eq_fail)),
    );
    let c2 = outcome(
        sound_fail.is_empty(),
        format!("min(bound - gap) = {worst_slack:.3e} over 20 instances{}", failures_suffix(&sound_fail)),
    );
    (c1, c2)
}

fn failures_suffix(f: &[String]) -> String {
    if f.is_empty() {
        String::new()
    } else {
        format!("; failures: {}", f.join("; "))
    }
}

fn criterion_2b(certs: &mut Certificates) -> Outcome {
    let mut cfg = preset("table3", &data_dir()).unwrap().remove(0);
    if let SourceSpec::Gaussian(g) = &mut cfg.source {
        g.total = 200;
    }
    cfg.models = vec![ModelChoice::Gdrc, ModelChoice::GdrcApp { rank_fraction: 0.5 }];
    cfg.trials = 3;
    let r = run(&cfg);
    certs.report(&r);
    let pairs: Vec<(f64, f64)> = r
        .records
        .iter()
        .filter(|t| t.model == "GDRC-SVM-app(50%)")
        .filter_map(|t| Some((t.true_gap?, t.bound?)))
        .collect();
    let full_failed = r.row("GDRC-SVM").map_or(0, |m| m.trials_failed);
    if pairs.is_empty() {
        return outcome(false, format!("no trial with both solves optimal ({full_failed} full solves failed)"));
    }
    let gap = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
    let bound = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
    let ratio = bound / gap;
    outcome(
        ratio > 10.0 || gap <= 0.0,
        format!(
            "n=50 N=200 r=25: mean gap {gap:.4e}, mean bound {bound:.4e}, ratio {ratio:.1} over {} trials \
             ({full_failed} of 3 full solves failed)",
            pairs.len()
        ),
    )
}

fn criterion_3(certs: &mut Certificates) -> Outcome {
    let demo = preset("demo2d", &data_dir()).unwrap();
    let mut zero = demo[0].clone();
    zero.params.ambiguity.theta = 0.0;
    let zr = run(&zero);
    let max_w = zr.records.iter().filter_map(|t| t.w_norm).fold(0.0f64, f64::max);
    let all_ok = zr.records.iter().all(|t| t.ok);
    let mut accs = Vec::new();
    for cfg in &demo {
        let r = run(cfg);
        certs.report(&r);
        accs.push(acc(&r, "GDRC-SVM").0);
    }
    let monotone = accs.windows(2).all(|w| w[1] >= w[0] - 1.0);
    outcome(
        all_ok && max_w <= 1e-3 && monotone,
        format!(
            "theta=0 max ||w|| {max_w:.2e} over 20 seeds; mean accuracy at lambda 0/0.1/0.2: {:.2} / {:.2} / {:.2}",
            accs[0], accs[1], accs[2]
        ),
    )
}

fn criterion_4(certs: &mut Certificates) -> Outcome {
    let cfg = preset("table1", &data_dir()).unwrap().remove(0);
    let r = run(&cfg);
    certs.report(&r);
    let (g, gs) = acc(&r, "GDRC-SVM");
    let (s, ss) = acc(&r, "SVM");
    outcome(
        g >= s - 0.3 && (97.0..=99.5).contains(&g),
        format!("n=30 N=600 20% train, 20 trials: GDRC {g:.2} ± {gs:.2}, SVM {s:.2} ± {ss:.2}"),
    )
}

fn criteria_5_and_8(certs: &mut Certificates) -> (Outcome, Outcome) {
    let cfgs = preset("table5", &data_dir()).unwrap();
    let wis = run(&cfgs[0]);
    let bal = run(&cfgs[1]);
    certs.report(&wis);
    certs.report(&bal);
    let (wg, wgs) = acc(&wis, "GDRC-SVM");
    let (ws, wss) = acc(&wis, "SVM");
    let (bg, bgs) = acc(&bal, "GDRC-SVM");
    let (bs, bss) = acc(&bal, "SVM");
    let c5 = outcome(
        (94.0..=97.5).contains(&wg) && wgs <= wss + 0.5 && (93.5..=96.5).contains(&bg) && bgs <= bss + 0.5,
        format!(
            "Wisconsin GDRC {wg:.2} ± {wgs:.2} (SVM {ws:.2} ± {wss:.2}); \
             Balance GDRC {bg:.2} ± {bgs:.2} (SVM {bs:.2} ± {bss:.2})"
        ),
    );
    let (d, _) = acc(&wis, "DRC-SVM");
    let (dm, _) = acc(&wis, "DRC-mu-SVM");
    let c8 = outcome(d >= ws - 0.5 && dm >= ws - 0.5, format!("Wisconsin SVM {ws:.2}, DRC {d:.2}, DRC-mu {dm:.2}"));
    (c5, c8)
}

fn random_core_set(rng: &mut ChaCha8Rng, n: usize, p: NormOrder) -> CoreSet {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let a = &g * g.transpose() + DMatrix::identity(n, n) * 0.5;
    let center = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    CoreSet::new(center, a, rng.gen_range(0.1..4.0), p, 1.0).unwrap()
}

/// Largest `v'x` over random boundary points of the set: a global sweep of
/// random directions, then random perturbations of the incumbent with a
/// shrinking step.
fn monte_carlo_support(rng: &mut ChaCha8Rng, cs: &CoreSet, v: &DVector<f64>, samples: usize) -> f64 {
    let n = cs.dim();
    let atv = cs.perturbation.transpose() * v;
    let value = |u: &DVector<f64>| atv.dot(u) / cs.norm_order.norm(u.as_slice());
    let mut draw = |scale: f64| {
        DVector::<f64>::from_fn(n, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
    };
    let mut best_u = draw(1.0);
    let mut best = value(&best_u);
    for _ in 0..samples {
        let u = draw(1.0);
        let f = value(&u);
        if f > best {
            best = f;
            best_u = u;
        }
    }
    let mut step = 0.1;
    for _ in 0..samples / 10 {
        let norm = cs.norm_order.norm(best_u.as_slice());
        best_u /= norm;
        let u = &best_u + draw(step);
        let f = value(&u);
        if f > best {
            best = f;
            best_u = u;
        } else {
            step = (step * 0.999).max(1e-9);
        }
    }
    cs.center.dot(v) + cs.radius_sq.sqrt() * best
}

fn criterion_7() -> Outcome {
    let two = Dataset::new("two", DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, -1.0]), vec![1, -1]).unwrap();
    let svm = fit(ModelKind::Svm, &two, &ModelParams::default(), &opts()).unwrap().classifier;
    let svm_err = (svm.w[0] - 0.5).abs().max((svm.w[1] - 0.5).abs()).max(svm.b.abs()).max((svm.objective - 0.25).abs());

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_support = 0.0f64;
    for i in 0..50 {
        let p = [NormOrder::L1, NormOrder::L2, NormOrder::Linf][i % 3];
        let n = 2 + i % 2;
        let cs = random_core_set(&mut rng, n, p);
        let v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let h = support_function(&cs, &v);
        let mc = monte_carlo_support(&mut rng, &cs, &v, 200_000);
        worst_support = worst_support.max((h - mc).abs() / h.abs().max(1.0));
    }

    let mut worst_drc = 0.0f64;
    for (n, total) in [(2, 20), (3, 40), (5, 60)] {
        let ds = gaussian_generator(n, total, 1.0, 0.0, 1).unwrap();
        let s = fit(ModelKind::Svm, &ds, &ModelParams::default(), &opts()).unwrap().classifier.objective;
        let d = fit(ModelKind::Drc, &ds, &ModelParams::default(), &opts()).unwrap().classifier.objective;
        worst_drc = worst_drc.max(rel(s, d));
    }
    outcome(
        svm_err <= 1e-6 && worst_support <= 1e-3 && worst_drc <= 1e-6,
        format!(
            "2-point SVM max error {svm_err:.1e}; support vs Monte Carlo worst {worst_support:.1e} (50 sets); \
             DRC vs SVM at zero covariance worst {worst_drc:.1e}"
        ),
    )
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !k.starts_with("time"));
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn criterion_9() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let cfg = dir.path().join("repro.cfg");
    std::fs::write(
        &cfg,
        "data = gaussian:n=4,N=60\nmodels = svm,drc,drc-mu,gdrc,gdrc-app:0.5\ntrials = 3\nseed = 11\n",
    )
    .unwrap();
    let mut texts = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_gdrc"))
            .args(["benchmark", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        if !status.status.success() {
            return outcome(false, format!("run {k} failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("custom.json")).unwrap()).unwrap();
        strip_timing(&mut v);
        texts.push(serde_json::to_string_pretty(&v).unwrap());
    }
    outcome(texts[0] == texts[1], format!("two CLI runs, {} bytes of JSON without timing fields", texts[0].len()))
}

fn main() -> ExitCode {
    gdrc_core::single_threaded_blas();
    let mut certs = Certificates::default();
    let mut results: Vec<(String, Outcome)> = Vec::new();
    let mut emit = |id: &str, o: Outcome| {
        println!("criterion {id}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id.to_string(), o));
    };

    let (c1, c2a) = criteria_1_and_2a(&mut certs);
    emit("1", c1);
    let c2b = criterion_2b(&mut certs);
    emit("2", outcome(c2a.pass && c2b.pass, format!("soundness: {}; looseness: {}", c2a.detail, c2b.detail)));
    emit("3", criterion_3(&mut certs));
    emit("4", criterion_4(&mut certs));
    let (c5, c8) = criteria_5_and_8(&mut certs);
    emit("5", c5);
    let c7 = criterion_7();
    let c9 = criterion_9();
    emit(
        "6",
        outcome(
            certs.failures.is_empty() && certs.solves > 0,
            format!(
                "{} optimal GDRC solves validated, worst margin {:.2e}{}",
                certs.solves,
                certs.worst,
                failures_suffix(&certs.failures)
            ),
        ),
    );
    emit("7", c7);
    emit("8", c8);
    emit("9", c9);

    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(id, _)| id.as_str()).collect();
    if failed.is_empty() {
        println!("acceptance: all 9 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
