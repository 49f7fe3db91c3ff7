use super::model::{MoeWorkspace, RawForward};
use super::prediction::gaussian_log_density;
use super::{MoeError, MoeModel};
use crate::numerics::{log_sum_exp, sigmoid, Matrix, NumericsError};

/// Mean mixture negative log-likelihood over all rows, with its exact
/// gradient in the model's flat parameter layout.
pub fn mixture_nll(model: &MoeModel, x: &Matrix, y: &[f64]) -> Result<(f64, Vec<f64>), MoeError> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    let mut grad = vec![0.0; model.num_params()];
    let loss = mixture_nll_rows(model, x, y, &rows, Some(&mut grad))?;
    Ok((loss, grad))
}

/// Mean mixture NLL over `rows`. When `grad` is given, the gradient of the
/// mean is written into it (overwriting).
pub fn mixture_nll_rows(
    model: &MoeModel,
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    mut grad: Option<&mut [f64]>,
) -> Result<f64, MoeError> {
    if rows.is_empty() {
        return Err(MoeError::EmptyBatch);
    }
    if x.rows() != y.len() {
        return Err(NumericsError::Dimension {
            expected: x.rows(),
            got: y.len(),
        }
        .into());
    }
    if let Some(g) = grad.as_deref_mut() {
        if g.len() != model.num_params() {
            return Err(NumericsError::Dimension {
                expected: model.num_params(),
                got: g.len(),
            }
            .into());
        }
        g.fill(0.0);
    }
    let k = model.num_experts();
    let scale = 1.0 / rows.len() as f64;
    let offsets = model.block_offsets();
    let mut ws: MoeWorkspace = model.workspace();
    let mut raw = RawForward::default();
    let mut terms = vec![0.0; k];
    let mut gate_up = vec![0.0; k];
    let mut total = 0.0;
    for &i in rows {
        let yi = y[i];
        model.forward_raw(x.row(i), &mut ws, &mut raw)?;
        for (t, ((lw, &m), &v)) in terms
            .iter_mut()
            .zip(raw.log_weights.iter().zip(&raw.means).zip(&raw.variances))
        {
            *t = lw + gaussian_log_density(yi, m, v);
        }
        let log_p = log_sum_exp(&terms);
        total -= log_p;
        let Some(g) = grad.as_deref_mut() else {
            continue;
        };
        // responsibilities γ_k = w_k N_k / p
        for kk in 0..k {
            let gamma = (terms[kk] - log_p).exp();
            let w = raw.log_weights[kk].exp();
            gate_up[kk] = scale * (w - gamma);
            let v = raw.variances[kk];
            let r = yi - raw.means[kk];
            let d_mean = -gamma * r / v;
            let d_var = 0.5 * gamma * (1.0 / v - r * r / (v * v));
            let d_raw = d_var * sigmoid(raw.raw_var[kk]);
            let (start, end) = (offsets[kk + 1], offsets[kk + 1] + model.experts[kk].num_params());
            model.experts[kk].backward_acc(&mut ws.experts[kk], &[scale * d_mean, scale * d_raw], &mut g[start..end])?;
        }
        model
            .gate
            .backward_acc(&mut ws.gate, &gate_up, &mut g[..offsets.get(1).copied().unwrap_or(0)])?;
    }
    let loss = total * scale;
    if !loss.is_finite() {
        return Err(MoeError::NonFinite { layer: "loss".into() });
    }
    Ok(loss)
}

/// Mean mixture NLL without gradients.
pub fn mean_nll(model: &MoeModel, x: &Matrix, y: &[f64]) -> Result<f64, MoeError> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    mixture_nll_rows(model, x, y, &rows, None)
}
