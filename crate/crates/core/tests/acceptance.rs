//! Acceptance criteria 1 to 10, one PASS/FAIL line each.
//!
//! Runs as a plain binary so the lines show up in `cargo test` output.
//! Arguments select criteria (`cargo test --test acceptance -- 4 10`);
//! `--full` also runs the p = 200 size/power cell.
//!
//! Simulation criteria use out-of-bag nuisance estimation and 200 trees per
//! forest (500 for the RMSE diagnostic).

use std::collections::BTreeSet;
use std::time::Instant;

use factrf::fact::{
    kappa_oracle, threshold, FactConfig, FeatureLaw, Sizes, SplitMode, Transform, Variant,
};
use factrf::forest::best_split;
use factrf::inference::bh_fdr;
use factrf::sim::{
    rmse_diagnostic, run_qq, run_qq_variants, run_size_power, run_spurious, ScoreMethod,
    SimulationSpec, SPURIOUS_COMPARISONS,
};
use factrf::{Dataset, ForestParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIM_TREES: usize = 200;
const REPS: usize = 100;
const ROOT_SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

fn sim_config(variant: Variant) -> FactConfig {
    FactConfig::default()
        .with_variant(variant)
        .with_split_mode(SplitMode::Oob)
        .with_forest(ForestParams::default().with_n_trees(SIM_TREES))
        .with_seed(ROOT_SEED)
}

fn identity_only(cfg: FactConfig) -> FactConfig {
    cfg.with_transforms(vec![Transform::Identity])
}

// ---------------------------------------------------------------- 1

fn sse(ys: &[f64]) -> f64 {
    let m = ys.iter().sum::<f64>() / ys.len() as f64;
    ys.iter().map(|y| (y - m) * (y - m)).sum()
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Every (feature, midpoint) candidate with its decrease
/// `SSE(parent) - SSE(left) - SSE(right)`, in feature-then-value order.
fn enumerate_splits(rows: &[usize], data: &Dataset, features: &[usize], min_leaf: usize) -> Vec<(usize, f64, f64)> {
    let y = data.response();
    let parent: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    let parent_sse = sse(&parent);
    let mut out = Vec::new();
    for &f in features {
        let col = data.column(f);
        let mut values: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let cut = midpoint(w[0], w[1]);
            let (l, r): (Vec<f64>, Vec<f64>) = {
                let l = rows.iter().filter(|&&i| col[i] <= cut).map(|&i| y[i]).collect();
                let r = rows.iter().filter(|&&i| col[i] > cut).map(|&i| y[i]).collect();
                (l, r)
            };
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            out.push((f, cut, parent_sse - sse(&l) - sse(&r)));
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(ROOT_SEED);
    let mut worst_decrease: f64 = 0.0;
    let mut worst_value: f64 = 0.0;
    let mut splits = 0;
    for case in 0..1000 {
        let n = rng.gen_range(2..=12);
        let p = rng.gen_range(1..=3);
        let coarse = rng.gen_bool(0.4);
        let rows_x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..p)
                    .map(|_| if coarse { rng.gen_range(0..4) as f64 / 3.0 } else { rng.gen() })
                    .collect()
            })
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|_| if coarse { rng.gen_range(0..3) as f64 } else { rng.gen::<f64>() * 4.0 - 2.0 })
            .collect();
        let data = Dataset::from_rows(&rows_x, y).unwrap();
        // A bootstrap-like multiset of rows.
        let m = rng.gen_range(1..=n);
        let rows: Vec<usize> = (0..m).map(|_| rng.gen_range(0..n)).collect();
        let mut features: Vec<usize> = (0..p).filter(|_| rng.gen_bool(0.7)).collect();
        if features.is_empty() {
            features.push(rng.gen_range(0..p));
        }
        let min_leaf = rng.gen_range(1..=3);

        let y = data.response();
        let parent_sse = sse(&rows.iter().map(|&r| y[r]).collect::<Vec<_>>());
        let tol = 1e-12 * parent_sse.max(1.0);
        let candidates = enumerate_splits(&rows, &data, &features, min_leaf);
        let max = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
        // Smallest feature, then smallest value, among the maximizers.
        let expected = candidates
            .iter()
            .find(|c| max > tol && c.2 >= max - tol)
            .copied();
        let got = best_split(&rows, &data, &features, min_leaf);
        match (expected, got) {
            (None, None) => {}
            (Some((f, v, d)), Some(s)) => {
                if s.feature != f {
                    return outcome(false, format!("case {case}: feature {} vs brute force {f}", s.feature));
                }
                worst_decrease = worst_decrease.max((s.impurity_decrease - d).abs());
                worst_value = worst_value.max((s.value - v).abs());
                if (s.impurity_decrease - d).abs() > tol || (s.value - v).abs() > 1e-12 {
                    return outcome(false, format!("case {case}: {s:?} vs ({f}, {v}, {d})"));
                }
                splits += 1;
            }
            (e, g) => return outcome(false, format!("case {case}: brute force {e:?}, best_split {g:?}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        secs < 5.0,
        format!(
            "1000 datasets ({splits} with a split), max |decrease diff| {worst_decrease:.1e}, max |value diff| {worst_value:.1e}, {secs:.2}s"
        ),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for (k, a) in [0.0, 0.25, 0.5].into_iter().enumerate() {
        let kappa = kappa_oracle(
            |x| (x - a) * (x - a),
            Transform::Identity,
            FeatureLaw::UniformIid,
            1_000_000,
            ROOT_SEED + k as u64,
        )
        .unwrap();
        let exact = 1.0 / 12.0 - a / 6.0;
        let z = (kappa.kappa_marginal - exact) / kappa.mc_stderr;
        pass &= z.abs() <= 3.0 && kappa.kappa_conditional == kappa.kappa_marginal;
        parts.push(format!("a={a}: {:.5} (exact {exact:.5}, z={z:+.2})", kappa.kappa_marginal));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs < 30.0, format!("{}, {secs:.2}s", parts.join("; ")))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let t = |alpha, blocks| {
        threshold(alpha, Variant::General, Sizes { transforms: 2, blocks }).unwrap()
    };
    let q3 = t(0.1, 3);
    let q1: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&a| t(a, 1)).collect();
    let pass = (q3 - 2.40).abs() <= 0.01
        && q1.iter().zip([1.96, 2.25, 2.50]).all(|(got, want)| (got - want).abs() <= 0.01);
    outcome(
        pass,
        format!("|Q|=3, a=0.1: {q3:.4}; |Q|=1: {:.4} {:.4} {:.4}", q1[0], q1[1], q1[2]),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> (Outcome, Vec<u8>) {
    let spec = SimulationSpec::new(200, 200, 0.0, 5.0, REPS, ROOT_SEED).labelled("null");
    let qq = run_qq(&spec, &identity_only(sim_config(Variant::Basic)), 12).unwrap();
    let mut table = Vec::new();
    qq.write_csv(&mut table).unwrap();
    let pass = qq.ks.p_value > 0.01 && qq.mean.abs() <= 0.3 && (0.7..=1.3).contains(&qq.sd);
    (
        outcome(
            pass,
            format!(
                "basic, X12, 100 seeds: KS p={:.3}, mean={:+.3}, sd={:.3}",
                qq.ks.p_value, qq.mean, qq.sd
            ),
        ),
        table,
    )
}

// ---------------------------------------------------------------- 5

fn size_power(p: usize) -> (Outcome, Vec<u8>) {
    let mut spec = SimulationSpec::size_power_case("I").unwrap();
    spec.p = p;
    spec.reps = REPS;
    spec.seed = ROOT_SEED;
    let features = [11, 31, 2, 12, 22, 32];
    let table = run_size_power(&spec, &sim_config(Variant::General), &[0.05], &features).unwrap();
    let mut csv = Vec::new();
    table.write_csv(&mut csv).unwrap();
    let rate = |l| table.rate(0.05, l).unwrap();
    let sizes: Vec<f64> = [2, 12, 22, 32].iter().map(|&l| rate(l)).collect();
    let pass = rate(11) >= 0.95 && rate(31) >= 0.85 && sizes.iter().all(|&s| s <= 0.12);
    (
        outcome(
            pass,
            format!(
                "case I at p={p}, alpha=0.05: power X11={:.2} X31={:.2}; size X2={:.2} X12={:.2} X22={:.2} X32={:.2}",
                rate(11),
                rate(31),
                sizes[0],
                sizes[1],
                sizes[2],
                sizes[3]
            ),
        ),
        csv,
    )
}

fn criterion_5() -> (Outcome, Vec<u8>) {
    size_power(50)
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> (Outcome, Vec<u8>) {
    let cfg = sim_config(Variant::General);
    let mut csv = Vec::new();
    let mut tables = Vec::new();
    for case in ["I", "II"] {
        let mut spec = SimulationSpec::size_power_case(case).unwrap();
        spec.reps = REPS;
        spec.seed = ROOT_SEED;
        let table = run_spurious(&spec, &cfg, &ScoreMethod::ALL, &SPURIOUS_COMPARISONS, 50).unwrap();
        table.write_csv(&mut csv).unwrap();
        tables.push(table);
    }
    let (one, two) = (&tables[0], &tables[1]);
    let f = |t: &factrf::sim::SpuriousTable, m, r| t.fraction(m, 12, r).unwrap();
    let case_one_max = one.rows.iter().map(|r| r.fraction).fold(0.0, f64::max);
    let fact = f(two, ScoreMethod::Fact, 21);
    let mdi = f(two, ScoreMethod::Mdi, 21);
    let mda = f(two, ScoreMethod::Mda, 21);
    let pass = fact <= 0.15 && mdi >= 0.5 && mda >= 0.5 && case_one_max <= 0.20;
    let list = |t: &factrf::sim::SpuriousTable| {
        t.rows
            .iter()
            .map(|r| format!("{}/X{}={:.2}", r.method, r.comparison.relevant, r.fraction))
            .collect::<Vec<_>>()
            .join(" ")
    };
    (
        outcome(
            pass,
            format!("case II X12>X21: FACT={fact:.2} MDI={mdi:.2} MDA={mda:.2}; case I: {}; case II: {}", list(one), list(two)),
        ),
        csv,
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let spec = SimulationSpec::new(200, 200, 0.6, 5.0, REPS, ROOT_SEED).labelled("debias");
    let cfgs = vec![
        identity_only(sim_config(Variant::Basic)),
        identity_only(sim_config(Variant::Conditioning)),
        identity_only(sim_config(Variant::General)).with_k_n(3),
        identity_only(sim_config(Variant::General)).with_k_n(7),
    ];
    let results = run_qq_variants(&spec, &cfgs, 12).unwrap();
    let m: Vec<f64> = results.iter().map(|r| r.mean.abs()).collect();
    let pass = m[0] > m[1] && m[1] > m[2] && m[3] <= m[2] + 0.1;
    outcome(
        pass,
        format!(
            "|mean| basic={:.3} conditioning(k=1)={:.3} general(k=3)={:.3} general(k=7)={:.3}",
            m[0], m[1], m[2], m[3]
        ),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let fp = ForestParams::default();
    let small = SimulationSpec::new(500, 50, 0.0, 5.0, 50, ROOT_SEED);
    let large = SimulationSpec { n: 1000, ..small.clone() };
    let a = rmse_diagnostic(&small, &fp, 10_000).unwrap();
    let b = rmse_diagnostic(&large, &fp, 10_000).unwrap();
    let improved = a.per_rep.iter().zip(&b.per_rep).filter(|(s, l)| l < s).count();
    let pass = (2.4..=3.2).contains(&a.mean) && improved == a.per_rep.len();
    outcome(
        pass,
        format!(
            "50 reps: RMSE n=500 {:.3}, n=1000 {:.3}; n=1000 better on {improved}/50 seeds",
            a.mean, b.mean
        ),
    )
}

// ---------------------------------------------------------------- 9

fn brute_force_bh(p: &[f64], q: f64) -> Vec<usize> {
    let m = p.len();
    let bound = |k: usize| k as f64 * q / m as f64;
    let k = (1..=m)
        .filter(|&k| p.iter().filter(|&&v| v <= bound(k)).count() >= k)
        .max();
    match k {
        Some(k) => (0..m).filter(|&i| p[i] <= bound(k)).collect(),
        None => Vec::new(),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(ROOT_SEED);
    let mut rejections = 0;
    for case in 0..10_000 {
        let m = rng.gen_range(1..=8);
        let coarse = rng.gen_bool(0.5);
        let p: Vec<f64> = (0..m)
            .map(|_| if coarse { rng.gen_range(0..=16) as f64 / 32.0 } else { rng.gen::<f64>().powi(2) })
            .collect();
        let q = [0.05, 0.1, 0.2, 0.25][rng.gen_range(0..4)];
        let got = bh_fdr(&p, q).unwrap();
        let want = brute_force_bh(&p, q);
        if got != want {
            return outcome(false, format!("case {case}: p={p:?} q={q}: {got:?} vs {want:?}"));
        }
        rejections += got.len();
    }
    outcome(true, format!("10000 vectors agree exactly ({rejections} rejections)"))
}

// ---------------------------------------------------------------- 10

type TableFn = fn() -> (Outcome, Vec<u8>);

fn criterion_10(cached: &[(u8, Vec<u8>)]) -> Outcome {
    let runs: [(u8, TableFn); 3] = [(4, criterion_4), (5, criterion_5), (6, criterion_6)];
    let mut parts = Vec::new();
    let mut pass = true;
    for (id, run) in runs {
        let eight = match cached.iter().find(|(c, _)| *c == id) {
            Some((_, t)) => t.clone(),
            None => pool(8, run).1,
        };
        let one = pool(1, run).1;
        let same = one == eight;
        pass &= same;
        parts.push(format!(
            "criterion {id}: {} ({} bytes)",
            if same { "identical" } else { "DIFFERENT" },
            one.len()
        ));
    }
    outcome(pass, format!("1 vs 8 threads: {}", parts.join(", ")))
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let full = args.iter().any(|a| a == "--full");
    let picked: BTreeSet<u8> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: u8| picked.is_empty() || picked.contains(&id);

    let mut failures = 0;
    let mut report = |label: String, o: Outcome, secs: f64| {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{label}: {verdict} [{secs:.1}s] {}", o.detail);
        failures += usize::from(!o.pass);
    };
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (o, t.elapsed().as_secs_f64())
    };

    let plain: [(u8, fn() -> Outcome); 3] = [(1, criterion_1), (2, criterion_2), (3, criterion_3)];
    for (id, f) in plain {
        if wanted(id) {
            let (o, s) = timed(&f);
            report(format!("criterion {id}"), o, s);
        }
    }
    let mut cached = Vec::new();
    let tabled: [(u8, TableFn); 3] = [(4, criterion_4), (5, criterion_5), (6, criterion_6)];
    for (id, f) in tabled {
        if wanted(id) {
            let t = Instant::now();
            let (o, table) = pool(8, f);
            report(format!("criterion {id}"), o, t.elapsed().as_secs_f64());
            cached.push((id, table));
        }
    }
    if full && wanted(5) {
        let (o, s) = timed(&|| size_power(200).0);
        report("criterion 5 (full p=200 cell)".into(), o, s);
    }
    for (id, f) in [(7u8, criterion_7 as fn() -> Outcome), (8, criterion_8), (9, criterion_9)] {
        if wanted(id) {
            let (o, s) = timed(&f);
            report(format!("criterion {id}"), o, s);
        }
    }
    if wanted(10) {
        let (o, s) = timed(&|| criterion_10(&cached));
        report("criterion 10".into(), o, s);
    }
    if failures > 0 {
        println!("{failures} criterion check(s) failed");
        std::process::exit(1);
    }
}
