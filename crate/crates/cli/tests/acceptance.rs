//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Failures are reported but do not fail `cargo test` unless
//! `EPIFORECAST_ACCEPTANCE_STRICT=1` is set, in which case any failed hard
//! criterion exits non-zero.
//!
//! The reference-trend criterion needs real data. Point `EPIFORECAST_REAL_DATA`
//! at a run configuration (TOML) naming the series and static CSVs to
//! evaluate it; otherwise it is reported as SKIP.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use epiforecast::featsel::{
    feature_correlations, lasso_select, no_fs, pcorr_eliminate, pcorr_thresholds, rfs_select, LassoOptions, Scorer,
};
use epiforecast::harness::{mc_cv, run_sweep, CvProtocol, Mode, SweepConfig, SweepResult};
use epiforecast::models::lstm::SequenceLayout;
use epiforecast::models::mlp::MlpShape;
use epiforecast::models::train::Differentiable;
use epiforecast::models::{Architecture, ForecasterConfig, ModelKind, TrainingConfig};
use epiforecast::numerics::{
    grad_check, kkt_residual, lambda_max, lasso_cd, least_squares, pearson, r2_score, soft_threshold, LassoProblem,
    GRAD_CHECK_STEP, LASSO_MAX_ITER, LASSO_TOL,
};
use epiforecast::samples::{build_samples, FeatureSpec, SampleSet, DEFAULT_WINDOW};
use epiforecast::synthetic::{epidemic_panel, linear_panel, noise_targets, sparse_linear_samples, write_epidemic_csvs};
use epiforecast::{Lstm, Mlp};
use epiforecast_cli::EXIT_OK;

/// Desk scale: three synthetic countries over 50 days, 21 pooled rows at
/// K_max = 30.
const DESK_COUNTRIES: usize = 3;
const DESK_DAYS: usize = 50;
const DESK_SEED: u64 = 7;
const WORKERS: &str = "4";

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Line {
    id: &'static str,
    name: &'static str,
    status: Status,
    elapsed: Duration,
    detail: String,
}

fn verdict(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed <= Duration::from_secs(secs)
}

fn criterion_1() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_self, mut worst_mean, mut worst_perfect) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let n = rng.random_range(3..60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        worst_self = worst_self.max((pearson(&x, &x).unwrap().rho - 1.0).abs());
        worst_mean = worst_mean.max(r2_score(&x, &vec![mean; n]).unwrap().abs());
        worst_perfect = worst_perfect.max((r2_score(&x, &x).unwrap() - 1.0).abs());
    }
    let ok = worst_self <= 1e-12 && worst_mean <= 1e-12 && worst_perfect == 0.0;
    (ok, format!("max |pearson(x,x)-1| {worst_self:.1e}, max |r2(y,mean)| {worst_mean:.1e}, max |r2(y,y)-1| {worst_perfect:.1e}"))
}

fn centered(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (Array2<f64>, Vec<f64>) {
    let mut x = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-2.0..2.0));
    for mut c in x.columns_mut() {
        let m = c.mean().unwrap();
        c.mapv_inplace(|v| v - m);
    }
    let mut y: Vec<f64> = (0..rows).map(|_| rng.random_range(-3.0..3.0)).collect();
    let m = y.iter().sum::<f64>() / rows as f64;
    y.iter_mut().for_each(|v| *v -= m);
    (x, y)
}

fn criterion_2() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut kkt, mut zero_ok, mut closed, mut ls) = (0.0_f64, true, 0.0_f64, 0.0_f64);
    for _ in 0..50 {
        let rows = rng.random_range(12..=40);
        let cols = rng.random_range(1..=10);
        let (x, y) = centered(&mut rng, rows, cols);
        let lmax = lambda_max(x.view(), &y);
        let problem = LassoProblem::new(x.view(), &y, lmax * rng.random_range(0.0..1.0)).unwrap();
        let fit = lasso_cd(&problem, LASSO_TOL, LASSO_MAX_ITER);
        kkt = kkt.max(kkt_residual(&problem, &fit.weights));
        let at_max = lasso_cd(&LassoProblem::new(x.view(), &y, lmax).unwrap(), LASSO_TOL, LASSO_MAX_ITER);
        zero_ok &= at_max.weights.iter().all(|&w| w == 0.0);

        let col = x.column(0).to_owned().insert_axis(ndarray::Axis(1));
        let l = rows as f64;
        let xty: f64 = col.column(0).iter().zip(&y).map(|(a, b)| a * b).sum();
        let xtx: f64 = col.column(0).iter().map(|a| a * a).sum();
        let lambda = lambda_max(col.view(), &y) * rng.random_range(0.0..1.2);
        let one = lasso_cd(&LassoProblem::new(col.view(), &y, lambda).unwrap(), LASSO_TOL, LASSO_MAX_ITER);
        closed = closed.max((one.weights[0] - soft_threshold(xty / l, lambda) / (xtx / l)).abs());

        if rows > cols + 1 {
            let unpenalized = lasso_cd(&LassoProblem::new(x.view(), &y, 0.0).unwrap(), 1e-12, 100_000);
            let exact = least_squares(x.view(), &y).unwrap();
            for (a, b) in unpenalized.weights.iter().zip(&exact.weights) {
                ls = ls.max((a - b).abs());
            }
        }
    }
    let ok = kkt <= 1e-6 && zero_ok && closed <= 1e-8 && ls <= 1e-6;
    (ok, format!("max KKT {kkt:.1e}, zero at lambda_max {zero_ok}, 1-D oracle {closed:.1e}, lambda=0 vs LS {ls:.1e}"))
}

fn criterion_3() -> (bool, String) {
    let (mut mlp, mut lstm) = (0.0_f64, 0.0_f64);
    for draw in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + draw);
        let shape = MlpShape {
            inputs: rng.random_range(1..8),
            hidden1: rng.random_range(1..9),
            hidden2: rng.random_range(1..9),
        };
        let m = Mlp::init(shape, &mut rng);
        let rows = rng.random_range(1..12);
        let x = Array2::from_shape_fn((rows, shape.inputs), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(rows, |_| rng.random_range(-2.0..2.0));
        let mut g = vec![0.0; m.params.len()];
        m.loss_and_grad(x.view(), y.view(), &mut g);
        let err = grad_check(|p: &[f64]| Mlp { shape, params: p.to_vec() }.loss(x.view(), y.view()), &g, &m.params, GRAD_CHECK_STEP);
        mlp = mlp.max(err);

        let window = rng.random_range(1..6);
        let statics: Vec<String> = (0..rng.random_range(0..4)).map(|i| format!("s{i}")).collect();
        let layout = SequenceLayout::from_descriptors(window, &FeatureSpec::new(window, &statics).descriptors);
        let m = Lstm::init(layout.clone(), rng.random_range(1..6), rng.random_range(1..5), rng.random_range(1..5), &mut rng);
        let x = Array2::from_shape_fn((rows, layout.n_inputs()), |_| rng.random_range(-1.5..1.5));
        let mut g = vec![0.0; m.params.len()];
        m.loss_and_grad(x.view(), y.view(), &mut g);
        let err = grad_check(
            |p: &[f64]| Lstm { params: p.to_vec(), ..m.clone() }.loss(x.view(), y.view()),
            &g,
            &m.params,
            GRAD_CHECK_STEP,
        );
        lstm = lstm.max(err);
    }
    (mlp <= 1e-4 && lstm <= 1e-4, format!("max relative error MLP {mlp:.1e}, LSTM {lstm:.1e}"))
}

fn criterion_4() -> (bool, String) {
    let panel = linear_panel(10, 80, 1e-6, 4);
    let samples = build_samples(&panel, 30, DEFAULT_WINDOW).unwrap();
    let config = ForecasterConfig::new(Architecture::Linear, TrainingConfig::default());
    let mask = no_fs(&samples.spec);
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    for k in [1, 5, 15, 30] {
        let r = mc_cv(&samples, &mask, &config, k, &CvProtocol::default()).unwrap();
        let t = r.mean_test.unwrap_or(f64::NEG_INFINITY);
        worst = worst.min(t);
        parts.push(format!("K={k} {t:.6}"));
    }
    (worst >= 0.99, format!("{} rows; mean test r2 {}", samples.len(), parts.join(", ")))
}

fn lr_scorer(seed: u64) -> Scorer {
    Scorer {
        config: ForecasterConfig::new(Architecture::Linear, TrainingConfig::default()),
        protocol: CvProtocol::default().with_seed(seed),
    }
}

fn criterion_5() -> (bool, String) {
    // (a) duplicate column
    let (base, _) = sparse_linear_samples(80, 12, 3, 1, 0.1, 5);
    let mut x = base.x.clone();
    x.push_column(base.x.column(4)).unwrap();
    let dup = SampleSet::from_parts(x, base.targets.clone(), &base.groups(), FeatureSpec::anonymous(13)).unwrap();
    let corr = feature_correlations(&dup).unwrap();
    let a = pcorr_thresholds().iter().all(|&p| {
        let m = pcorr_eliminate(corr.values.view(), p).unwrap();
        m.contains(4) != m.contains(12)
    });
    // (b) RFS on 3 of 20
    let mut b_hits = 0;
    for seed in 0..10 {
        let (samples, support) = sparse_linear_samples(100, 20, 3, 1, 1e-6, 500 + seed);
        let sel = rfs_select(&samples, 1, &lr_scorer(seed)).unwrap();
        b_hits += usize::from(sel.mask.indices == support);
    }
    // (c) Lasso on 5 of 78
    let mut c_hits = 0;
    for seed in 0..10 {
        let (samples, support) = sparse_linear_samples(200, 78, 5, 1, 1e-6, 600 + seed);
        let sel = lasso_select(&samples, 1, &LassoOptions::new(seed)).unwrap();
        c_hits += usize::from(support.iter().all(|&j| sel.mask.contains(j)) && sel.mask.len() <= 15);
    }
    (a && b_hits >= 9 && c_hits >= 9, format!("(a) duplicate dropped at all 50 p: {a}; (b) RFS exact {b_hits}/10; (c) Lasso {c_hits}/10"))
}

fn cli(args: &[&str]) -> i32 {
    let mut full = vec!["epiforecast"];
    full.extend_from_slice(args);
    epiforecast_cli::run(full)
}

fn desk_config(dir: &Path) -> PathBuf {
    write_epidemic_csvs(dir.join("data"), DESK_COUNTRIES, DESK_DAYS, DESK_SEED).unwrap();
    let path = dir.join("desk.toml");
    fs::write(
        &path,
        "confirmed = \"data/confirmed.csv\"\n\
         deaths = \"data/deaths.csv\"\n\
         recovered = \"data/recovered.csv\"\n\
         statics = [\"data/statics.csv\"]\n\
         seed = 0\n",
    )
    .unwrap();
    path
}

/// Ingest, fast sweep and report into `out`; returns the sweep's duration.
fn fast_run(config: &Path, out: &Path) -> Result<Duration, String> {
    let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
    let base = ["--config", c, "--out", o, "--fast", "--workers", WORKERS];
    let step = |cmd: &str| -> Result<(), String> {
        let mut args = base.to_vec();
        args.push(cmd);
        match cli(&args) {
            EXIT_OK => Ok(()),
            code => Err(format!("`{cmd}` exited with {code}")),
        }
    };
    step("ingest")?;
    let start = Instant::now();
    step("sweep")?;
    let elapsed = start.elapsed();
    step("report")?;
    Ok(elapsed)
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let Ok(entries) = fs::read_dir(dir) else { return };
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn criterion_6(first: &Path, second: &Path) -> (bool, String) {
    let mut n = 0;
    for sub in ["sweep", "report"] {
        let (a, b) = (tree(&first.join(sub)), tree(&second.join(sub)));
        if a.is_empty() {
            return (false, format!("no files under {sub}/"));
        }
        if a.keys().ne(b.keys()) {
            return (false, format!("{sub}/ file lists differ"));
        }
        if let Some((path, _)) = a.iter().find(|(p, bytes)| b[*p] != **bytes) {
            return (false, format!("{} differs", path.display()));
        }
        n += a.len();
    }
    (true, format!("{n} result and report files byte-identical"))
}

/// Cells breaking the noise property, formatted, and the best passing test r2.
fn gap_violations(result: &SweepResult) -> (Vec<String>, f64) {
    let mut bad = Vec::new();
    let mut max_test = f64::NEG_INFINITY;
    for c in &result.cells {
        match (c.report.mean_train, c.report.mean_test) {
            (Some(tr), Some(te)) if tr > te && te <= 0.05 => max_test = max_test.max(te),
            (tr, te) => bad.push(format!("{} {} K={} train {tr:?} test {te:?}", c.model, c.method, c.k)),
        }
    }
    (bad, max_test)
}

fn criterion_7() -> (bool, String) {
    let panel = epidemic_panel(DESK_COUNTRIES, DESK_DAYS, DESK_SEED).unwrap();
    // Statics identify each country, so a finite noise draw with uneven
    // country means is predictable across random row splits. Holding out
    // whole countries removes that.
    let config = SweepConfig {
        group_by_country: true,
        ..SweepConfig::fast()
    };
    let samples = noise_targets(&build_samples(&panel, config.k_max(), DEFAULT_WINDOW).unwrap(), 77);
    let workers = WORKERS.parse().unwrap();
    let result = match run_sweep(&samples, &config, None, workers) {
        Ok(r) => r,
        Err(e) => return (false, format!("sweep failed: {e}")),
    };
    let (bad, max_test) = gap_violations(&result);
    if bad.is_empty() {
        return (true, format!("{} cells, max mean test r2 {max_test:.3}", result.cells.len()));
    }
    // Diagnostic only: the same LR cells with selection inside each split.
    let strict = SweepConfig {
        mode: Mode::StrictNested,
        models: vec![ModelKind::Lr],
        ..config.clone()
    };
    let nested = match run_sweep(&samples, &strict, None, workers) {
        Ok(r) => {
            let (nb, _) = gap_violations(&r);
            format!("{} of {} LR cells violate under strict_nested", nb.len(), r.cells.len())
        }
        Err(e) => format!("strict_nested diagnostic failed: {e}"),
    };
    let detail = format!("{} of {} cells violate: {}; {nested}", bad.len(), result.cells.len(), bad.join("; "));
    (false, detail)
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn criterion_8(config: &Path, out: &Path) -> (bool, String) {
    let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
    for cmd in ["ingest", "heatmap", "sweep"] {
        let code = cli(&["--config", c, "--out", o, "--fast", "--workers", WORKERS, cmd]);
        if code != EXIT_OK {
            return (false, format!("`{cmd}` exited with {code}"));
        }
    }
    let text = fs::read_to_string(out.join("heatmap/correlation.csv")).unwrap_or_default();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: BTreeMap<&str, Vec<&str>> = lines.map(|l| l.split(',').collect::<Vec<_>>()).map(|r| (r[0], r)).collect();
    let entry = |a: &str, b: &str| -> Option<f64> {
        let j = header.iter().position(|h| *h == b)?;
        rows.get(a)?.get(j)?.parse().ok()
    };
    let lat_temp = entry("latitude", "Avg-Temperature");
    let age_fert = entry("Median-Age", "Fertility");
    let a = lat_temp.is_some_and(|v| (v + 0.82).abs() <= 0.1) && age_fert.is_some_and(|v| (v + 0.84).abs() <= 0.1);

    let best = csv_rows(&out.join("sweep/best_methods.csv"));
    let score = |r: &Vec<String>| r.get(4).and_then(|v| v.parse::<f64>().ok());
    let k_of = |r: &Vec<String>| r[1].parse::<usize>().unwrap_or(0);
    let b = best.iter().filter(|r| k_of(r) <= 3).all(|r| score(r).is_some_and(|s| s > 0.9));
    let cc = best.iter().filter(|r| k_of(r) > 20).all(|r| score(r).is_some_and(|s| s < 0.0));

    let counts: Vec<f64> = csv_rows(&out.join("sweep/selected_counts.csv"))
        .iter()
        .filter(|r| r[0] == "LR" && r[1] == "Lasso")
        .filter_map(|r| r[3].parse().ok())
        .collect();
    let d = !counts.is_empty() && counts.windows(2).all(|w| w[1] >= w[0] - 3.0);
    (
        a && b && cc && d,
        format!("(a) lat/temp {lat_temp:?}, age/fertility {age_fert:?}: {a}; (b) {b}; (c) {cc}; (d) Lasso counts {counts:?}: {d}"),
    )
}

fn timed(id: &'static str, name: &'static str, budget: u64, f: impl FnOnce() -> (bool, String)) -> Line {
    let start = Instant::now();
    let (ok, detail) = f();
    let elapsed = start.elapsed();
    let fast_enough = within(elapsed, budget);
    let detail = if fast_enough { detail } else { format!("{detail}; over the {budget} s budget") };
    Line {
        id,
        name,
        status: verdict(ok && fast_enough),
        elapsed,
        detail,
    }
}

fn main() {
    let mut lines = vec![
        timed("1", "metric identities", 1, criterion_1),
        timed("2", "lasso solver", 10, criterion_2),
        timed("3", "gradient checks", 30, criterion_3),
        timed("4", "linear recovery", 60, criterion_4),
        timed("5", "selection recovery", 300, criterion_5),
    ];

    let work = tempfile::tempdir().unwrap();
    let config = desk_config(work.path());
    let (out_a, out_b) = (work.path().join("run-a"), work.path().join("run-b"));
    let first = fast_run(&config, &out_a);
    let second = fast_run(&config, &out_b);
    let (ok6, detail6) = match (&first, &second) {
        (Ok(_), Ok(_)) => criterion_6(&out_a, &out_b),
        (Err(e), _) | (_, Err(e)) => (false, e.clone()),
    };
    lines.push(Line {
        id: "6",
        name: "determinism",
        status: verdict(ok6),
        elapsed: Duration::ZERO,
        detail: detail6,
    });
    lines.push(timed("7", "generalization gap", 1800, criterion_7));

    match std::env::var_os("EPIFORECAST_REAL_DATA") {
        Some(cfg) => {
            let out = work.path().join("real");
            lines.push(timed("8", "reference trends (advisory)", u64::MAX, || criterion_8(Path::new(&cfg), &out)));
        }
        None => lines.push(Line {
            id: "8",
            name: "reference trends (advisory)",
            status: Status::Skip,
            elapsed: Duration::ZERO,
            detail: "EPIFORECAST_REAL_DATA not set".into(),
        }),
    }

    let (ok9, elapsed9, detail9) = match first {
        Ok(t) => (
            within(t, 30 * 60),
            t,
            format!("{DESK_COUNTRIES} countries x {DESK_DAYS} days, {WORKERS} workers"),
        ),
        Err(e) => (false, Duration::ZERO, e),
    };
    lines.push(Line {
        id: "9",
        name: "fast sweep time",
        status: verdict(ok9),
        elapsed: elapsed9,
        detail: detail9,
    });

    let mut failed = 0;
    for l in &lines {
        let tag = match l.status {
            Status::Pass => "PASS",
            Status::Fail => {
                if l.id != "8" {
                    failed += 1;
                }
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!("{tag} [{}] {} ({:.2} s): {}", l.id, l.name, l.elapsed.as_secs_f64(), l.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        if std::env::var("EPIFORECAST_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
