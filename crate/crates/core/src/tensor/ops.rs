use super::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Non-linearity σ. Production models always use `LeakyRelu`; `Identity`
/// exists so hand-calculated layer tests can see the raw pre-activation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Identity,
}

impl Default for Activation {
    fn default() -> Self {
        Activation::LeakyRelu(DEFAULT_LEAKY_SLOPE)
    }
}

impl Activation {
    pub fn apply(&self, x: &Tensor) -> Tensor {
        match *self {
            Activation::LeakyRelu(slope) => leaky_relu(x, slope),
            Activation::Identity => x.clone(),
        }
    }

    /// `upstream ⊙ σ'(pre)`
    pub fn backward(&self, pre: &Tensor, upstream: &Tensor) -> Tensor {
        match *self {
            Activation::LeakyRelu(slope) => leaky_relu_grad(pre, slope, upstream),
            Activation::Identity => upstream.clone(),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Activation::LeakyRelu(slope) => format!("leaky_relu({slope})"),
            Activation::Identity => "identity".to_string(),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    /// Inverse of [`Activation::name`].
    fn from_str(s: &str) -> Result<Self> {
        if s == "identity" {
            return Ok(Activation::Identity);
        }
        if s == "leaky_relu" {
            return Ok(Activation::default());
        }
        s.strip_prefix("leaky_relu(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|v| v.parse().ok())
            .map(Activation::LeakyRelu)
            .ok_or_else(|| Error::Config(format!("unknown activation `{s}`")))
    }
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
    out
}

/// Gradient of [`leaky_relu`] w.r.t. its input, chained with `upstream`.
/// At exactly zero the right derivative (1) is used.
pub fn leaky_relu_grad(pre: &Tensor, slope: f64, upstream: &Tensor) -> Tensor {
    assert_eq!(pre.shape(), upstream.shape());
    let mut out = upstream.clone();
    for (g, &p) in out.data_mut().iter_mut().zip(pre.data()) {
        if p < 0.0 {
            *g *= slope;
        }
    }
    out
}

pub fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

/// Mean over rows of `w[target] · −log softmax(logits)[target]`.
///
/// Returns the loss and its gradient w.r.t. `logits`.
pub fn cross_entropy(logits: &Tensor, targets: &[usize], class_weights: Option<&[f64]>) -> Result<(f64, Tensor)> {
    let (n, classes) = logits.shape();
    if classes < 2 {
        return Err(Error::Shape(format!(
            "cross-entropy needs at least 2 classes, got {classes}"
        )));
    }
    if targets.len() != n {
        return Err(Error::Shape(format!("{} targets for {n} logit rows", targets.len())));
    }
    if let Some(w) = class_weights {
        if w.len() != classes {
            return Err(Error::Shape(format!("{} class weights for {classes} classes", w.len())));
        }
    }
    let mut grad = Tensor::zeros(n, classes);
    if n == 0 {
        return Ok((0.0, grad));
    }
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    for (i, &t) in targets.iter().enumerate() {
        if t >= classes {
            return Err(Error::TargetOutOfRange { target: t, classes });
        }
        let w = class_weights.map_or(1.0, |w| w[t]);
        let logp = log_softmax_row(logits.row(i));
        loss -= w * logp[t];
        let g = grad.row_mut(i);
        for (c, lp) in logp.iter().enumerate() {
            g[c] = w * inv_n * (lp.exp() - if c == t { 1.0 } else { 0.0 });
        }
    }
    Ok((loss * inv_n, grad))
}

/// Sigmoid binary cross-entropy on an `n×1` logit column, averaged over rows.
pub fn binary_cross_entropy(logits: &Tensor, targets: &[f64]) -> Result<(f64, Tensor)> {
    let (n, cols) = logits.shape();
    if cols != 1 {
        return Err(Error::Shape(format!(
            "binary cross-entropy expects n×1 logits, got n×{cols}"
        )));
    }
    if targets.len() != n {
        return Err(Error::Shape(format!("{} targets for {n} logits", targets.len())));
    }
    let mut grad = Tensor::zeros(n, 1);
    if n == 0 {
        return Ok((0.0, grad));
    }
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    for (i, (&x, &y)) in logits.data().iter().zip(targets).enumerate() {
        // max(x,0) − x·y + ln(1 + e^{−|x|})
        loss += x.max(0.0) - x * y + (-x.abs()).exp().ln_1p();
        grad.data_mut()[i] = (sigmoid(x) - y) * inv_n;
    }
    Ok((loss * inv_n, grad))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse-frequency weights `N / (C · count_c)`. Classes that never occur
/// get weight 0 since they contribute no loss terms anyway.
pub fn class_weights(targets: &[usize], classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; classes];
    for &t in targets {
        if t < classes {
            counts[t] += 1;
        }
    }
    let n = targets.len() as f64;
    counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { n / (classes as f64 * c as f64) })
        .collect()
}
