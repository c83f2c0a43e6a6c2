//! Input-dependent SSM: `Δ`, `B`, `C` are projections of the input itself.

use super::discretize::{zoh_coefficients, zoh_discretize, SelectiveInputs, SsmParams};
use crate::error::{Error, Result};
use crate::tensor::{linear, softplus};
use crate::Tensor;

pub fn selective_parameterize(
    u: &Tensor,
    w_delta: &Tensor,
    w_b: &Tensor,
    w_c: &Tensor,
    delta_bias: &Tensor,
) -> Result<SelectiveInputs> {
    let delta_t = linear(u, w_delta, Some(delta_bias))?.map(softplus);
    let b_t = linear(u, w_b, None)?;
    let c_t = linear(u, w_c, None)?;
    SelectiveInputs::new(delta_t, b_t, c_t)
}

fn check_inputs(u: &Tensor, sel: &SelectiveInputs, a_log: &Tensor, d_skip: &Tensor) -> Result<()> {
    if u.rank() != 2 || u.shape() != sel.delta_t.shape() {
        return Err(Error::dim("selective scan input", u.shape(), sel.delta_t.shape()));
    }
    let (d, n) = (sel.channels(), sel.state_size());
    if a_log.shape() != [d, n] {
        return Err(Error::dim("selective scan a_log", a_log.shape(), &[d, n]));
    }
    if d_skip.shape() != [d] {
        return Err(Error::dim("selective scan d_skip", d_skip.shape(), &[d]));
    }
    Ok(())
}

/// Streaming evaluation that keeps only the current `D×N` state.
pub fn selective_scan(
    u: &Tensor,
    sel: &SelectiveInputs,
    a_log: &Tensor,
    d_skip: &Tensor,
) -> Result<Tensor> {
    check_inputs(u, sel, a_log, d_skip)?;
    let (len, dch, n) = (sel.len(), sel.channels(), sel.state_size());
    let a = a_log.map(|v| -v.exp());
    let mut h = Tensor::zeros(&[dch, n]);
    let mut y = Tensor::zeros(&[len, dch]);
    for t in 0..len {
        let (delta, bt, ct, ut) = (
            sel.delta_t.outer(t),
            sel.b_t.outer(t),
            sel.c_t.outer(t),
            u.outer(t),
        );
        let hs = h.data_mut();
        let yt = y.outer_mut(t);
        for d in 0..dch {
            let ud = ut[d];
            let mut acc = 0.0;
            for s in 0..n {
                let i = d * n + s;
                let (a_bar, g) = zoh_coefficients(a.data()[i], delta[d]);
                hs[i] = a_bar * hs[i] + (g * bt[s]) * ud;
                acc += ct[s] * hs[i];
            }
            yt[d] = acc + d_skip.data()[d] * ud;
        }
    }
    Ok(y)
}

/// Everything the reverse pass needs, captured by [`selective_scan_forward`].
#[derive(Debug, Clone)]
pub struct SelectiveCache {
    u: Tensor,
    delta_t: Tensor,
    b_t: Tensor,
    c_t: Tensor,
    a_log: Tensor,
    d_skip: Tensor,
    /// `L×D×N` each
    a_bar: Tensor,
    b_bar_u: Tensor,
    states: Tensor,
}

impl SelectiveCache {
    pub fn len(&self) -> usize {
        self.u.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channels(&self) -> usize {
        self.u.shape()[1]
    }

    pub fn state_size(&self) -> usize {
        self.a_log.shape()[1]
    }

    /// Hidden states `h_1..h_L`, `L×D×N`.
    pub fn states(&self) -> &Tensor {
        &self.states
    }

    fn validate(&self) -> Result<()> {
        let (l, d, n) = (self.len(), self.channels(), self.state_size());
        let lddn = [l, d, n];
        let ok = self.delta_t.shape() == [l, d]
            && self.b_t.shape() == [l, n]
            && self.c_t.shape() == [l, n]
            && self.a_log.shape() == [d, n]
            && self.d_skip.shape() == [d]
            && self.a_bar.shape() == lddn
            && self.b_bar_u.shape() == lddn
            && self.states.shape() == lddn;
        if ok {
            Ok(())
        } else {
            Err(Error::Contract("selective cache is internally inconsistent".into()))
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectiveGrads {
    pub u: Tensor,
    pub delta_t: Tensor,
    pub b_t: Tensor,
    pub c_t: Tensor,
    pub a_log: Tensor,
    pub d_skip: Tensor,
}

pub fn selective_scan_forward(
    u: &Tensor,
    sel: &SelectiveInputs,
    a_log: &Tensor,
    d_skip: &Tensor,
) -> Result<(Tensor, SelectiveCache)> {
    check_inputs(u, sel, a_log, d_skip)?;
    let (len, dch, n) = (sel.len(), sel.channels(), sel.state_size());
    let dp = zoh_discretize(SsmParams::Selective { inputs: sel, a_log })?;
    let dn = dch * n;
    let mut b_bar_u = Tensor::zeros(&[len, dch, n]);
    let mut states = Tensor::zeros(&[len, dch, n]);
    let mut y = Tensor::zeros(&[len, dch]);
    for t in 0..len {
        let (a, b) = (dp.a_bar.outer(t), dp.b_bar.outer(t));
        let (ct, ut) = (sel.c_t.outer(t), u.outer(t));
        for d in 0..dch {
            let ud = ut[d];
            let mut acc = 0.0;
            for s in 0..n {
                let i = d * n + s;
                let prev = if t == 0 {
                    0.0
                } else {
                    states.data()[(t - 1) * dn + i]
                };
                let bu = b[i] * ud;
                let h = a[i] * prev + bu;
                b_bar_u.data_mut()[t * dn + i] = bu;
                states.data_mut()[t * dn + i] = h;
                acc += ct[s] * h;
            }
            y.data_mut()[t * dch + d] = acc + d_skip.data()[d] * ud;
        }
    }
    let cache = SelectiveCache {
        u: u.clone(),
        delta_t: sel.delta_t.clone(),
        b_t: sel.b_t.clone(),
        c_t: sel.c_t.clone(),
        a_log: a_log.clone(),
        d_skip: d_skip.clone(),
        a_bar: dp.a_bar.clone(),
        b_bar_u,
        states,
    };
    Ok((y, cache))
}

/// `∂g/∂A` for `g = (e^{δA} − 1)/A`. Uses the series near `δA = 0`, where
/// the closed form cancels catastrophically.
fn dg_da(a: f64, delta: f64, a_bar: f64, g: f64) -> f64 {
    let x = delta * a;
    if x.abs() < 1e-3 {
        delta * delta * (0.5 + x * (1.0 / 3.0 + x * (1.0 / 8.0 + x / 30.0)))
    } else {
        (delta * a_bar - g) / a
    }
}

/// Reverse-time adjoint of the cached recurrence.
pub fn selective_scan_backward(cache: &SelectiveCache, dy: &Tensor) -> Result<SelectiveGrads> {
    cache.validate()?;
    let (len, dch, n) = (cache.len(), cache.channels(), cache.state_size());
    if dy.shape() != [len, dch] {
        return Err(Error::Contract(format!(
            "output gradient {:?} does not match cached forward of shape {:?}",
            dy.shape(),
            [len, dch]
        )));
    }
    let dn = dch * n;
    let a: Vec<f64> = cache.a_log.data().iter().map(|v| -v.exp()).collect();

    let mut du = Tensor::zeros(&[len, dch]);
    let mut ddelta = Tensor::zeros(&[len, dch]);
    let mut db = Tensor::zeros(&[len, n]);
    let mut dc = Tensor::zeros(&[len, n]);
    let mut da = vec![0.0; dn];
    let mut dd = Tensor::zeros(&[dch]);
    // Adjoint of h_t carried from step t+1: ā_{t+1}·λ_{t+1}.
    let mut carry = vec![0.0; dn];

    for t in (0..len).rev() {
        let ct = cache.c_t.outer(t);
        let bt = cache.b_t.outer(t);
        let ut = cache.u.outer(t);
        let dyt = dy.outer(t);
        let delta = cache.delta_t.outer(t);
        for d in 0..dch {
            let (gy, ud, dt) = (dyt[d], ut[d], delta[d]);
            dd.data_mut()[d] += gy * ud;
            let mut du_acc = cache.d_skip.data()[d] * gy;
            let mut ddelta_acc = 0.0;
            for s in 0..n {
                let i = d * n + s;
                let h = cache.states.data()[t * dn + i];
                let h_prev = if t == 0 {
                    0.0
                } else {
                    cache.states.data()[(t - 1) * dn + i]
                };
                let a_bar = cache.a_bar.data()[t * dn + i];
                let (_, g) = zoh_coefficients(a[i], dt);

                dc.data_mut()[t * n + s] += gy * h;
                let lambda = gy * ct[s] + carry[i];

                let d_abar = lambda * h_prev;
                let d_bbar = lambda * ud;
                du_acc += lambda * g * bt[s];
                let dg = d_bbar * bt[s];
                db.data_mut()[t * n + s] += d_bbar * g;

                ddelta_acc += d_abar * a[i] * a_bar + dg * a_bar;
                da[i] += d_abar * dt * a_bar + dg * dg_da(a[i], dt, a_bar, g);

                carry[i] = a_bar * lambda;
            }
            du.data_mut()[t * dch + d] = du_acc;
            ddelta.data_mut()[t * dch + d] = ddelta_acc;
        }
    }
    let a_log_grad = Tensor::from_fn(&[dch, n], |i| da[i] * a[i]);
    Ok(SelectiveGrads {
        u: du,
        delta_t: ddelta,
        b_t: db,
        c_t: dc,
        a_log: a_log_grad,
        d_skip: dd,
    })
}
