//! Split-conformal intervals from a point prediction and a difficulty scale,
//! without any model training: the "model" here is the true mean plus a
//! noisy guess of the noise level.

use tessera::conformal::{build_intervals, calibrate, ScaleKind};
use tessera::numerics::Rng;

fn sample(rng: &mut Rng, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut y, mut center, mut scale) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let x = rng.uniform_range(-1.0, 1.0);
        let sigma = 0.1 + x.abs();
        center.push(x.sin());
        y.push(x.sin() + sigma * rng.normal());
        // an imperfect but informative scale estimate
        scale.push(sigma * rng.uniform_range(0.8, 1.25));
    }
    (y, center, scale)
}

fn main() {
    let mut rng = Rng::new(7);
    let (y_cal, c_cal, s_cal) = sample(&mut rng, 1000);
    let (y_test, c_test, s_test) = sample(&mut rng, 5000);
    let alpha = 0.1;

    println!("{:<10} {:>8} {:>8} {:>10} {:>10}", "scale", "q_hat", "PICP", "mean width", "width sd");
    for kind in [ScaleKind::Aleatoric, ScaleKind::Constant] {
        let calib = calibrate(&y_cal, &c_cal, &s_cal, kind, alpha, 1e-8).expect("calibration");
        let intervals = build_intervals(&calib, &c_test, &s_test).expect("intervals");
        let covered = intervals.iter().zip(&y_test).filter(|(iv, y)| iv.contains(**y)).count();
        let widths: Vec<f64> = intervals.iter().map(|iv| iv.width).collect();
        let mean = widths.iter().sum::<f64>() / widths.len() as f64;
        let sd = (widths.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / widths.len() as f64).sqrt();
        println!(
            "{:<10} {:>8.4} {:>8.3} {:>10.4} {:>10.4}",
            kind.as_str(),
            calib.q_hat,
            covered as f64 / y_test.len() as f64,
            mean,
            sd
        );
    }

    // with too few calibration points the quantile is infinite
    let tiny = calibrate(&y_cal[..5], &c_cal[..5], &s_cal[..5], ScaleKind::Aleatoric, alpha, 1e-8).unwrap();
    println!("n_cal = 5 at alpha = {alpha}: q_hat = {} (intervals are unbounded)", tiny.q_hat);
}
