use std::fmt;

/// Central-difference gradient of `f` at `params` with step `h`.
pub fn central_difference<F>(params: &[f64], h: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let plus = f(&p);
            p[i] = orig - h;
            let minus = f(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientMismatch {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl fmt::Display for GradientMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "gradient mismatch at parameter {}: analytic {:e}, numeric {:e}",
            self.index, self.analytic, self.numeric
        )
    }
}

/// Entrywise check `|a − n| ≤ rel·max(|a|, |n|) + abs_floor`.
pub fn compare_gradients(
    analytic: &[f64],
    numeric: &[f64],
    rel: f64,
    abs_floor: f64,
) -> Result<(), GradientMismatch> {
    assert_eq!(analytic.len(), numeric.len());
    for (index, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let tol = rel * a.abs().max(n.abs()) + abs_floor;
        if !((a - n).abs() <= tol) {
            return Err(GradientMismatch {
                index,
                analytic: a,
                numeric: n,
            });
        }
    }
    Ok(())
}
