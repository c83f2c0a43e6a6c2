use crate::error::{Error, Result};
use crate::Tensor;

/// Below this `|Δ·A|` the closed-form input coefficient is replaced by its
/// first-order series, since `(e^x - 1) / x` is 0/0 at the origin.
pub const ZOH_SERIES_THRESHOLD: f64 = 1e-8;

/// Time-invariant diagonal SSM. `A = -exp(a_log)` is strictly negative.
#[derive(Debug, Clone)]
pub struct DiagSsmParams {
    /// `D×N`, stores `log(-A)`.
    pub a_log: Tensor,
    /// `N`
    pub b: Tensor,
    /// `N`
    pub c: Tensor,
    /// `D`
    pub d_skip: Tensor,
    pub delta: f64,
}

impl DiagSsmParams {
    pub fn new(a_log: Tensor, b: Tensor, c: Tensor, d_skip: Tensor, delta: f64) -> Result<Self> {
        if a_log.rank() != 2 {
            return Err(Error::Shape {
                shape: a_log.shape().to_vec(),
                reason: "a_log must be D×N".into(),
            });
        }
        let (d, n) = (a_log.shape()[0], a_log.shape()[1]);
        if b.shape() != [n] {
            return Err(Error::dim("DiagSsmParams b", a_log.shape(), b.shape()));
        }
        if c.shape() != [n] {
            return Err(Error::dim("DiagSsmParams c", a_log.shape(), c.shape()));
        }
        if d_skip.shape() != [d] {
            return Err(Error::dim("DiagSsmParams d_skip", a_log.shape(), d_skip.shape()));
        }
        if !a_log.all_finite() {
            return Err(Error::Domain("a_log must be finite".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::Domain(format!("delta must be > 0, got {delta}")));
        }
        Ok(Self {
            a_log,
            b,
            c,
            d_skip,
            delta,
        })
    }

    pub fn channels(&self) -> usize {
        self.a_log.shape()[0]
    }

    pub fn state_size(&self) -> usize {
        self.a_log.shape()[1]
    }
}

/// Per-step `Δ`, `B`, `C` computed from the input sequence.
#[derive(Debug, Clone)]
pub struct SelectiveInputs {
    /// `L×D`, strictly positive
    pub delta_t: Tensor,
    /// `L×N`
    pub b_t: Tensor,
    /// `L×N`
    pub c_t: Tensor,
}

impl SelectiveInputs {
    pub fn new(delta_t: Tensor, b_t: Tensor, c_t: Tensor) -> Result<Self> {
        if delta_t.rank() != 2 || b_t.rank() != 2 || c_t.rank() != 2 {
            return Err(Error::Shape {
                shape: delta_t.shape().to_vec(),
                reason: "selective inputs must be rank-2 (L×D, L×N, L×N)".into(),
            });
        }
        let len = delta_t.shape()[0];
        if b_t.shape()[0] != len || b_t.shape() != c_t.shape() {
            return Err(Error::dim("SelectiveInputs", b_t.shape(), c_t.shape()));
        }
        if let Some(bad) = delta_t.data().iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::Domain(format!("delta_t must be > 0, found {bad}")));
        }
        Ok(Self { delta_t, b_t, c_t })
    }

    pub fn len(&self) -> usize {
        self.delta_t.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channels(&self) -> usize {
        self.delta_t.shape()[1]
    }

    pub fn state_size(&self) -> usize {
        self.b_t.shape()[1]
    }
}

/// Discretized transition and input coefficients. Either `D×N` (constant
/// over time) or `L×D×N` (one slice per step).
#[derive(Debug, Clone)]
pub struct DiscreteParams {
    pub a_bar: Tensor,
    pub b_bar: Tensor,
}

impl DiscreteParams {
    pub fn new(a_bar: Tensor, b_bar: Tensor) -> Result<Self> {
        if a_bar.shape() != b_bar.shape() || !(a_bar.rank() == 2 || a_bar.rank() == 3) {
            return Err(Error::dim("DiscreteParams", a_bar.shape(), b_bar.shape()));
        }
        Ok(Self { a_bar, b_bar })
    }

    /// Number of steps for time-varying parameters, `None` if constant.
    pub fn steps(&self) -> Option<usize> {
        (self.a_bar.rank() == 3).then(|| self.a_bar.shape()[0])
    }

    pub fn channels(&self) -> usize {
        let s = self.a_bar.shape();
        s[s.len() - 2]
    }

    pub fn state_size(&self) -> usize {
        self.a_bar.last_dim()
    }

    pub(crate) fn a_at(&self, t: usize) -> &[f64] {
        match self.steps() {
            Some(_) => self.a_bar.outer(t),
            None => self.a_bar.data(),
        }
    }

    pub(crate) fn b_at(&self, t: usize) -> &[f64] {
        match self.steps() {
            Some(_) => self.b_bar.outer(t),
            None => self.b_bar.data(),
        }
    }
}

/// Parameters accepted by discretization: constant, or selective plus the
/// shared `a_log`.
#[derive(Debug, Clone, Copy)]
pub enum SsmParams<'a> {
    Lti(&'a DiagSsmParams),
    Selective {
        inputs: &'a SelectiveInputs,
        a_log: &'a Tensor,
    },
}

/// `(ā, g)` with `ā = exp(ΔA)` and `B̄ = g·B`, where
/// `g = (ΔA)⁻¹(exp(ΔA) − 1)·Δ`.
#[inline]
pub fn zoh_coefficients(a: f64, delta: f64) -> (f64, f64) {
    let x = delta * a;
    let a_bar = x.exp();
    let g = if x.abs() < ZOH_SERIES_THRESHOLD {
        delta * (1.0 + 0.5 * x)
    } else {
        delta * (x.exp_m1() / x)
    };
    (a_bar, g)
}

/// Zero-order hold for one diagonal entry: returns `(ā, b̄)`.
#[inline]
pub fn zoh(a: f64, delta: f64, b: f64) -> (f64, f64) {
    let (a_bar, g) = zoh_coefficients(a, delta);
    (a_bar, g * b)
}

pub fn zoh_discretize(params: SsmParams<'_>) -> Result<DiscreteParams> {
    match params {
        SsmParams::Lti(p) => {
            if !(p.delta > 0.0) {
                return Err(Error::Domain(format!("delta must be > 0, got {}", p.delta)));
            }
            let n = p.state_size();
            let mut a_bar = Tensor::zeros(p.a_log.shape());
            let mut b_bar = Tensor::zeros(p.a_log.shape());
            for (i, &al) in p.a_log.data().iter().enumerate() {
                let (ab, bb) = zoh(-al.exp(), p.delta, p.b.data()[i % n]);
                a_bar.data_mut()[i] = ab;
                b_bar.data_mut()[i] = bb;
            }
            DiscreteParams::new(a_bar, b_bar)
        }
        SsmParams::Selective { inputs, a_log } => {
            let (len, d, n) = (inputs.len(), inputs.channels(), inputs.state_size());
            if a_log.shape() != [d, n] {
                return Err(Error::dim("zoh_discretize a_log", &[d, n], a_log.shape()));
            }
            if let Some(bad) = inputs.delta_t.data().iter().find(|&&v| !(v > 0.0)) {
                return Err(Error::Domain(format!("delta must be > 0, got {bad}")));
            }
            let a: Vec<f64> = a_log.data().iter().map(|v| -v.exp()).collect();
            let mut a_bar = Tensor::zeros(&[len, d, n]);
            let mut b_bar = Tensor::zeros(&[len, d, n]);
            let dn = d * n;
            for t in 0..len {
                let delta = inputs.delta_t.outer(t);
                let b = inputs.b_t.outer(t);
                let ab = &mut a_bar.data_mut()[t * dn..(t + 1) * dn];
                let bb = &mut b_bar.data_mut()[t * dn..(t + 1) * dn];
                for ch in 0..d {
                    for s in 0..n {
                        let (x, y) = zoh(a[ch * n + s], delta[ch], b[s]);
                        ab[ch * n + s] = x;
                        bb[ch * n + s] = y;
                    }
                }
            }
            DiscreteParams::new(a_bar, b_bar)
        }
    }
}
