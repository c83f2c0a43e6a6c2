use super::discretize::SelectiveInputs;
use super::selective::{selective_scan, selective_scan_backward, selective_scan_forward};
use crate::error::Result;
use crate::Tensor;

/// Central-difference gradient of a scalar function of one tensor.
pub fn finite_diff_grad(f: impl Fn(&Tensor) -> f64, x: &Tensor, step: f64) -> Tensor {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.numel() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + step;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - step;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// `max|a − b| / max(max|b|, max|a|)`, zero when both vanish.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    let diff = analytic.max_abs_diff(numeric);
    let scale = analytic.max_abs().max(numeric.max_abs());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Parameter groups of the selective scan, in the order reported by
/// [`selective_gradient_errors`].
pub const SELECTIVE_GROUPS: [&str; 6] = ["u", "delta_t", "b_t", "c_t", "a_log", "d_skip"];

/// Relative error between the analytic reverse pass and central differences
/// for every parameter group, under the loss `Σ y ⊙ dy`.
pub fn selective_gradient_errors(
    u: &Tensor,
    sel: &SelectiveInputs,
    a_log: &Tensor,
    d_skip: &Tensor,
    dy: &Tensor,
    step: f64,
) -> Result<[f64; 6]> {
    let (_, cache) = selective_scan_forward(u, sel, a_log, d_skip)?;
    let g = selective_scan_backward(&cache, dy)?;
    let loss = |u: &Tensor, sel: &SelectiveInputs, a_log: &Tensor, d: &Tensor| {
        let y = selective_scan(u, sel, a_log, d).expect("shapes fixed by the forward pass");
        y.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum::<f64>()
    };
    let swap = |which: usize, x: &Tensor| {
        let mut s = sel.clone();
        match which {
            0 => s.delta_t = x.clone(),
            1 => s.b_t = x.clone(),
            _ => s.c_t = x.clone(),
        }
        s
    };
    let numeric = [
        finite_diff_grad(|x| loss(x, sel, a_log, d_skip), u, step),
        finite_diff_grad(|x| loss(u, &swap(0, x), a_log, d_skip), &sel.delta_t, step),
        finite_diff_grad(|x| loss(u, &swap(1, x), a_log, d_skip), &sel.b_t, step),
        finite_diff_grad(|x| loss(u, &swap(2, x), a_log, d_skip), &sel.c_t, step),
        finite_diff_grad(|x| loss(u, sel, x, d_skip), a_log, step),
        finite_diff_grad(|x| loss(u, sel, a_log, x), d_skip, step),
    ];
    let analytic = [&g.u, &g.delta_t, &g.b_t, &g.c_t, &g.a_log, &g.d_skip];
    Ok(std::array::from_fn(|i| relative_error(analytic[i], &numeric[i])))
}
