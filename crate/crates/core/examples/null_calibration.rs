//! Empirical size of FACT variants when Y is independent of X.
//! Usage: null_calibration N P REPS TREES
use factrf::fact::{run_fact, FactConfig, SplitMode, Variant};
use factrf::{Dataset, ForestParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let a: Vec<usize> = std::env::args().skip(1).map(|s| s.parse().unwrap()).collect();
    let (n, p, reps, trees) = (a[0], a[1], a[2], a[3]);
    let fp = ForestParams::default().with_n_trees(trees);
    let configs = [
        ("basic/oob", FactConfig::default().with_variant(Variant::Basic)),
        ("cond/oob", FactConfig::default().with_variant(Variant::Conditioning)),
        ("general k1/oob", FactConfig::default().with_k_n(1)),
        ("basic/split", FactConfig::default().with_variant(Variant::Basic).with_split_mode(SplitMode::SampleSplit { train_fraction: 0.5 })),
        ("general k1/split", FactConfig::default().with_k_n(1).with_split_mode(SplitMode::SampleSplit { train_fraction: 0.5 })),
    ];
    for (name, cfg) in configs {
        let mut rej = 0;
        let mut stats = Vec::new();
        for s in 0..reps as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen()).collect()).collect();
            let y = (0..n).map(|_| rng.gen::<f64>()).collect();
            let d = Dataset::from_rows(&rows, y).unwrap();
            let r = run_fact(0, &d, &cfg.clone().with_forest(fp.clone()).with_seed(s)).unwrap();
            stats.push(r.components[0].value);
            if r.p_value < 0.05 { rej += 1; }
        }
        let m = stats.iter().sum::<f64>() / reps as f64;
        let sd = (stats.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
        println!("{name:18} size {:.3}  first-component mean {m:+.3} sd {sd:.3}", rej as f64 / reps as f64);
    }
}
