//! The interval evaluation suite on hand-made intervals: coverage, width,
//! CWC at several penalty strengths, size-stratified coverage, sparsification,
//! and per-group coverage.

use tessera::conformal::PredictionInterval;
use tessera::metrics::{
    cwc, default_grid, groupwise_picp, mpiw_nmpiw, picp, sparsification, ssc, CwcConfig, MetricsError,
};
use tessera::numerics::Rng;

fn main() -> Result<(), MetricsError> {
    let mut rng = Rng::new(3);
    let n = 2000;
    let mut intervals = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for i in 0..n {
        let sigma = rng.uniform_range(0.2, 2.0);
        // intervals sized for 90% coverage under Gaussian noise
        intervals.push(PredictionInterval::symmetric(0.0, 1.645 * sigma, sigma));
        labels.push(sigma * rng.normal());
        groups.push(format!("g{}", i % 25));
    }

    let coverage = picp(&intervals, &labels)?;
    let (mpiw, nmpiw) = mpiw_nmpiw(&intervals, &labels)?;
    println!("PICP {coverage:.3}  MPIW {mpiw:.3}  NMPIW {nmpiw:.3}");
    for eta in [10.0, 50.0, 100.0] {
        println!("CWC(eta = {eta}) = {:.4}", cwc(coverage, nmpiw, CwcConfig { eta, mu: 0.9 }));
    }

    for bins in [3, 5, 10] {
        let cov: Vec<String> = ssc(&intervals, &labels, bins)?.iter().map(|b| format!("{:.2}", b.coverage)).collect();
        println!("SSC J={bins}: {}", cov.join(" "));
    }

    let widths: Vec<f64> = intervals.iter().map(|iv| iv.width).collect();
    let curve = sparsification(&widths, &labels, &default_grid())?;
    let mut shuffled = widths.clone();
    rng.shuffle(&mut shuffled);
    let random = sparsification(&shuffled, &labels, &default_grid())?;
    println!("AUSE with width ordering {:.4}, with shuffled widths {:.4}", curve.ause, random.ause);

    let table = groupwise_picp(&intervals, &labels, &groups, 10, 5)?;
    for g in &table.most_frequent {
        println!("group {:>4}: n = {:>3}, PICP = {:.3}", g.group, g.n, g.picp);
    }

    let constant: Vec<_> = (0..n).map(|_| PredictionInterval::symmetric(0.0, 1.0, 1.0)).collect();
    println!("SSC on constant widths: {}", ssc(&constant, &labels, 5).unwrap_err());
    Ok(())
}
