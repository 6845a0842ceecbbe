//! Acceptance criteria A1-A8. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test -p pcfd-cli --test acceptance -- --nocapture --test-threads 1`
//! to see them in order.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use pcfd_core::baseline::{cross_entropy, cross_entropy_gradient, softmax};
use pcfd_core::eval::{trial_outcomes, trial_seed};
use pcfd_core::io::{load_calibration, load_outcomes, load_scores, read_outcomes, write_outcomes};
use pcfd_core::simulate::{simulate, SimulateConfig};
use pcfd_core::{
    calibrate, classify_names, p_value, p_values_all, permutation_oracle, sweep, Alpha,
    CalibrationModel, Decision, LabelSpace, ScoreRecord, SweepConfig, SweepReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed for the simulated pool and for the sweep; the CLI default.
const SEED: u64 = 0;
const TRIALS: usize = 100;

fn verdict(id: &str, title: &str, pass: bool, detail: &str) {
    println!("{id} {title}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{id} failed: {detail}");
}

struct A1Run {
    space: LabelSpace,
    records: Vec<ScoreRecord>,
    grid: Vec<Alpha>,
    report: SweepReport,
    elapsed: Duration,
}

fn a1_run() -> &'static A1Run {
    static RUN: OnceLock<A1Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let cfg = SimulateConfig::with_defaults(SEED);
        let sim = simulate(&cfg).expect("simulate");
        let grid = Alpha::parse_grid("0.1:0.9:0.1").unwrap();
        let space = cfg.synth.label_space;
        let report = sweep(&sim.records, &space, &SweepConfig::new(grid.clone(), TRIALS, SEED)).expect("sweep");
        A1Run {
            space,
            records: sim.records,
            grid,
            report,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn a1_coverage_validity() {
    let run = a1_run();
    assert_eq!(run.records.len(), 240);
    let mut failures = Vec::new();
    for s in &run.report.summaries {
        let target = 1.0 - s.alpha.value();
        let se_bound = target - 2.0 * s.ecr_sd / (TRIALS as f64).sqrt();
        let abs_bound = target - 0.02;
        println!(
            "  alpha={:.1} ecr_mean={:.6} sd={:.6} bound_se={:.6} bound_abs={:.6}",
            s.alpha.value(),
            s.ecr_mean,
            s.ecr_sd,
            se_bound,
            abs_bound
        );
        if s.ecr_mean < se_bound || s.ecr_mean < abs_bound {
            failures.push(s.alpha.value());
        }
    }
    let fast = run.elapsed < Duration::from_secs(10);
    verdict(
        "A1",
        "coverage validity",
        failures.is_empty() && fast,
        &format!("failing alphas {failures:?}, simulate+sweep took {:.2?}", run.elapsed),
    );
}

#[test]
fn a2_p_value_super_uniformity() {
    let space = LabelSpace::with_normal(&["N", "F"], &["N"]).unwrap();
    let alphas: Vec<Alpha> = ["0.19", "0.2", "0.5", "0.9"].iter().map(|s| s.parse().unwrap()).collect();
    let draws = 10_000;
    let mut worst = Vec::new();
    let mut pass = true;
    for n in [1usize, 4, 9] {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + n as u64);
        let mut hits = vec![0usize; alphas.len()];
        for d in 0..draws {
            // continuous scores: exchangeable and tie-free with probability one
            let mut rec = |id: String| {
                let s: f64 = rng.random();
                ScoreRecord::new(id, Some(0), vec![s, 1.0 - s], &space).unwrap()
            };
            let cal: Vec<ScoreRecord> = (0..n).map(|i| rec(format!("c{d}-{i}"))).collect();
            let test = rec(format!("t{d}"));
            let model = calibrate(&cal, &space).unwrap();
            let p = p_values_all(&model, &test, &space).unwrap()[0];
            for (h, a) in hits.iter_mut().zip(&alphas) {
                if !p.exceeds(*a) {
                    *h += 1;
                }
            }
        }
        for (h, a) in hits.iter().zip(&alphas) {
            let oracle = permutation_oracle(n, *a).unwrap();
            // the enumeration agrees with floor(alpha (N + 1)) / (N + 1)
            assert_eq!(oracle.num, a.floor_times(n as u64 + 1));
            let q = oracle.value();
            let freq = *h as f64 / draws as f64;
            let tol = 3.0 * (q * (1.0 - q) / draws as f64).sqrt();
            let ok = (freq - q).abs() <= tol;
            pass &= ok;
            println!("  N={n} alpha={} freq={freq:.4} oracle={q:.4} tol={tol:.4} {}", a, if ok { "ok" } else { "MISS" });
            worst.push((freq - q).abs() - tol);
        }
    }
    let margin = worst.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    verdict("A2", "p-value super-uniformity", pass, &format!("max(|freq-q| - tol) = {margin:.4}"));
}

#[test]
fn a3_nesting_and_monotonicity() {
    let run = a1_run();
    let mut violations = 0usize;
    for t in 0..TRIALS {
        let per_alpha = trial_outcomes(&run.records, &run.space, &run.grid, 0.5, trial_seed(SEED, t)).unwrap();
        for w in per_alpha.windows(2) {
            for (lo, hi) in w[0].iter().zip(&w[1]) {
                assert_eq!(lo.sample_id, hi.sample_id);
                if !hi.set_members.iter().all(|m| lo.set_members.contains(m)) {
                    violations += 1;
                }
            }
        }
        let rows: Vec<_> = run.report.rows.iter().filter(|r| r.trial == t).collect();
        assert_eq!(rows.len(), run.grid.len());
        for w in rows.windows(2) {
            if w[1].apss > w[0].apss || w[1].ecr > w[0].ecr {
                violations += 1;
            }
        }
    }
    let first = run.report.summaries.first().unwrap().apss_mean;
    let last = run.report.summaries.last().unwrap().apss_mean;
    verdict(
        "A3",
        "nesting and monotonicity",
        violations == 0 && last < first,
        &format!("{violations} violations over {TRIALS} trials; mean APSS {first:.3} -> {last:.3}"),
    );
}

#[test]
fn a4_decision_rule_oracle() {
    let space = LabelSpace::with_normal(&["Normal", "IR", "OR", "Ball"], &["Normal"]).unwrap();
    use Decision::*;
    // hand-evaluated rule branches for every subset
    let table: [(&[&str], Decision); 16] = [
        (&[], Ambiguous),
        (&["Normal"], Normal),
        (&["IR"], Faulty),
        (&["OR"], Faulty),
        (&["Ball"], Faulty),
        (&["Normal", "IR"], Faulty),
        (&["Normal", "OR"], Faulty),
        (&["Normal", "Ball"], Faulty),
        (&["IR", "OR"], Faulty),
        (&["IR", "Ball"], Faulty),
        (&["OR", "Ball"], Faulty),
        (&["Normal", "IR", "OR"], Faulty),
        (&["Normal", "IR", "Ball"], Faulty),
        (&["Normal", "OR", "Ball"], Faulty),
        (&["IR", "OR", "Ball"], Faulty),
        (&["Normal", "IR", "OR", "Ball"], Faulty),
    ];
    let mut mismatches = Vec::new();
    for (set, want) in table {
        let got = classify_names(set, &space).unwrap();
        if got != want || (got == Ambiguous) != set.is_empty() {
            mismatches.push(format!("{set:?}: {got}"));
        }
    }
    verdict("A4", "decision-rule oracle", mismatches.is_empty(), &format!("mismatches {mismatches:?}"));
}

#[test]
fn a5_miscoverage_on_normal_bound() {
    let run = a1_run();
    let mut failures = Vec::new();
    for a in &run.grid {
        let mis = run.report.miscoverage_mean(*a);
        let t1 = run.report.type1_mean(*a);
        let ok = mis <= a.value() + 0.02;
        println!(
            "  alpha={:.1} miscoverage_normal={mis:.6} bound={:.2} type1_rate={t1:.6} {}",
            a.value(),
            a.value() + 0.02,
            if ok { "ok" } else { "MISS" }
        );
        if !ok {
            failures.push(a.value());
        }
    }
    verdict(
        "A5",
        "miscoverage-on-normal bound",
        failures.is_empty(),
        &format!("failing alphas {failures:?}"),
    );
}

#[test]
fn a6_numerical_checks() {
    let x = vec![
        vec![0.5, -1.2, 0.3],
        vec![1.5, 0.2, -0.7],
        vec![-0.3, 0.8, 1.1],
        vec![0.0, -0.4, 0.9],
        vec![2.1, 1.0, 0.2],
        vec![-1.7, 0.3, -0.5],
        vec![0.9, -0.9, -1.3],
        vec![-0.6, 1.6, 0.4],
    ];
    let y = vec![0, 1, 2, 3, 0, 1, 2, 3];
    let w: Vec<Vec<f64>> = (0..4)
        .map(|k| (0..4).map(|j| 0.3 * (k as f64 - 1.5) - 0.2 * j as f64 + 0.1 * (k * j) as f64).collect())
        .collect();
    let g = cross_entropy_gradient(&w, &x, &y).unwrap();
    let h = 1e-5;
    let mut worst_rel: f64 = 0.0;
    for k in 0..4 {
        for j in 0..4 {
            let mut plus = w.clone();
            plus[k][j] += h;
            let mut minus = w.clone();
            minus[k][j] -= h;
            let fd = (cross_entropy(&plus, &x, &y).unwrap() - cross_entropy(&minus, &x, &y).unwrap()) / (2.0 * h);
            let rel = (fd - g[k][j]).abs() / fd.abs().max(g[k][j].abs());
            worst_rel = worst_rel.max(rel);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_sum: f64 = 0.0;
    let mut in_range = true;
    for _ in 0..1000 {
        let len = rng.random_range(2..10);
        let z: Vec<f64> = (0..len).map(|_| rng.random_range(-50.0..50.0)).collect();
        let p = softmax(&z);
        in_range &= p.iter().all(|v| (0.0..=1.0).contains(v));
        worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    verdict(
        "A6",
        "numerical checks",
        worst_rel < 1e-5 && worst_sum < 1e-9 && in_range,
        &format!("max gradient rel err {worst_rel:.2e}, max |sum-1| {worst_sum:.2e}"),
    );
}

fn pcfd(args: &[&str], cwd: &Path) {
    let out = Command::new(env!("CARGO_BIN_EXE_pcfd"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn a7_determinism_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pcfd(&["simulate", "--seed", "3", "--out", "a.csv"], d);
    pcfd(&["simulate", "--seed", "3", "--out", "b.csv"], d);
    let same_scores = fs::read(d.join("a.csv")).unwrap() == fs::read(d.join("b.csv")).unwrap();

    let sweep_args = |jobs: &'static str, out: &'static str| {
        ["sweep", "--scores", "a.csv", "--seed", "5", "--trials", "40", "--jobs", jobs, "--out", out]
    };
    pcfd(&sweep_args("1", "r1"), d);
    pcfd(&sweep_args("1", "r1b"), d);
    pcfd(&sweep_args("4", "r4"), d);
    let read = |p: &str| fs::read(d.join(p)).unwrap();
    let same_reports = ["trials.csv", "summary.csv"].iter().all(|f| {
        let one = read(&format!("r1/{f}"));
        one == read(&format!("r1b/{f}")) && one == read(&format!("r4/{f}"))
    });

    // outcomes through the CLI equal the in-memory computation, exactly
    let table = load_scores(d.join("a.csv")).unwrap();
    let space = LabelSpace::with_normal(&table.labels, &["Normal".to_string()]).unwrap();
    let (cal, eval) = table.records.split_at(120);
    let cal_csv = to_csv(&space, cal);
    let eval_csv = to_csv(&space, eval);
    fs::write(d.join("cal.csv"), cal_csv).unwrap();
    fs::write(d.join("eval.csv"), eval_csv).unwrap();
    pcfd(&["calibrate", "--scores", "cal.csv", "--out", "cal.json"], d);
    pcfd(&["predict", "--calibration", "cal.json", "--scores", "eval.csv", "--alpha", "0.3", "--out", "o.csv"], d);
    let model = calibrate(cal, &space).unwrap();
    let expected: Vec<_> = eval
        .iter()
        .map(|r| pcfd_core::predict(&model, r, &space, "0.3".parse().unwrap()).unwrap())
        .collect();
    let loaded = load_outcomes(d.join("o.csv")).unwrap();
    let cli_matches = loaded.outcomes == expected;

    let mut buf = Vec::new();
    write_outcomes(&mut buf, &space, &expected).unwrap();
    let round_trip = read_outcomes(buf.as_slice()).unwrap().outcomes == expected;

    verdict(
        "A7",
        "determinism and round-trip",
        same_scores && same_reports && cli_matches && round_trip,
        &format!(
            "score files identical {same_scores}, reports identical across runs/jobs {same_reports}, \
             CLI outcomes exact {cli_matches}, save/load identity {round_trip}"
        ),
    );
}

fn to_csv(space: &LabelSpace, records: &[ScoreRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    pcfd_core::io::write_scores(&mut buf, space, records).unwrap();
    buf
}

#[test]
fn a8_p_value_lattice() {
    let run = a1_run();
    let mut checked = 0usize;
    let mut off_lattice = 0usize;
    for t in 0..10 {
        let outs = trial_outcomes(&run.records, &run.space, &run.grid[..1], 0.5, trial_seed(SEED, t)).unwrap();
        for o in &outs[0] {
            for p in &o.p_values {
                checked += 1;
                if p.denominator() != 121 || p.numerator() < 1 || p.numerator() > 121 {
                    off_lattice += 1;
                }
            }
        }
    }

    // through the files: denominators equal the stored calibration size plus one
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pcfd(&["simulate", "--out", "s.csv"], d);
    pcfd(&["calibrate", "--scores", "s.csv", "--out", "cal.json"], d);
    pcfd(&["predict", "--calibration", "cal.json", "--scores", "s.csv", "--alpha", "0.1", "--out", "o.csv"], d);
    let n = load_calibration(d.join("cal.json")).unwrap().calibration.n() as u64;
    let text = fs::read_to_string(d.join("o.csv")).unwrap();
    for line in text.lines().skip(1) {
        for rational in line.split(',').skip(9) {
            checked += 1;
            let (k, m) = rational.split_once('/').unwrap();
            let (k, m): (u64, u64) = (k.parse().unwrap(), m.parse().unwrap());
            if m != n + 1 || k < 1 || k > n + 1 {
                off_lattice += 1;
            }
        }
    }

    // a direct lattice sweep over a small model, including ties
    let model = CalibrationModel::from_scores(vec![0.1, 0.1, 0.4, 0.7]).unwrap();
    for c in [0.0, 0.1, 0.2, 0.4, 0.5, 0.7, 0.9] {
        let p = p_value(&model, c);
        checked += 1;
        if p.denominator() != 5 || !(1..=5).contains(&p.numerator()) {
            off_lattice += 1;
        }
    }
    verdict(
        "A8",
        "p-value lattice",
        off_lattice == 0 && checked > 0,
        &format!("{checked} p-values checked, {off_lattice} off the k/(N+1) lattice"),
    );
}
