use std::time::Instant;

use factrf::forest::{ForestParams, RegressionForest};
use factrf::sim::SimulationSpec;

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let (n, p, trees) = (args[0], args[1], args[2]);
    let spec = SimulationSpec::new(n, p, 0.3, 5.0, 1, 0);
    let s = spec.generate(0).unwrap();
    let data = s.data.without_feature(11).unwrap();
    let params = ForestParams::default().with_n_trees(trees);
    let t = Instant::now();
    let f = RegressionForest::fit(&data, &params, 1).unwrap();
    let fit = t.elapsed();
    let t = Instant::now();
    let oob = f.predict_oob(&data).unwrap();
    println!(
        "fit {:?} oob {:?} present {} depth {}",
        fit,
        t.elapsed(),
        oob.iter().filter(|o| o.is_some()).count(),
        f.trees()[0].depth()
    );
}
