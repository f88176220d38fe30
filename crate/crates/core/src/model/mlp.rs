use crate::error::Result;
use crate::tensor::{Activation, ParameterSet, Rng, Tensor};

/// Fully connected stack with σ between layers and a linear output.
/// Parameters are `{prefix}.W{i}` (`in × out`) and `{prefix}.b{i}` (`1 × out`), `i` from 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub prefix: String,
    pub dims: Vec<usize>,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct MlpTrace {
    /// Input of every layer.
    pub inputs: Vec<Tensor>,
    /// Pre-activations of the hidden layers.
    pub hidden_pre: Vec<Tensor>,
}

impl Mlp {
    pub fn new(prefix: impl Into<String>, dims: Vec<usize>, activation: Activation) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output widths");
        Mlp {
            prefix: prefix.into(),
            dims,
            activation,
        }
    }

    pub fn weight_name(&self, layer: usize) -> String {
        format!("{}.W{}", self.prefix, layer + 1)
    }

    pub fn bias_name(&self, layer: usize) -> String {
        format!("{}.b{}", self.prefix, layer + 1)
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn init(&self, rng: &mut Rng, params: &mut ParameterSet) {
        for l in 0..self.num_layers() {
            params.insert(self.weight_name(l), rng.glorot(self.dims[l], self.dims[l + 1]));
            params.insert(self.bias_name(l), Tensor::zeros(1, self.dims[l + 1]));
        }
    }

    pub fn forward(&self, params: &ParameterSet, x: &Tensor) -> Result<(Tensor, MlpTrace)> {
        let mut trace = MlpTrace {
            inputs: Vec::with_capacity(self.num_layers()),
            hidden_pre: Vec::with_capacity(self.num_layers() - 1),
        };
        let mut h = x.clone();
        for l in 0..self.num_layers() {
            let w = params.require(&self.weight_name(l))?;
            let b = params.require(&self.bias_name(l))?;
            let mut z = h.matmul(w);
            z.add_row_vector(b.data());
            trace.inputs.push(h);
            if l + 1 < self.num_layers() {
                h = self.activation.apply(&z);
                trace.hidden_pre.push(z);
            } else {
                h = z;
            }
        }
        Ok((h, trace))
    }

    /// Accumulates parameter gradients into `grads`; returns the input gradient.
    pub fn backward(
        &self,
        params: &ParameterSet,
        trace: &MlpTrace,
        grad_out: &Tensor,
        grads: &mut ParameterSet,
    ) -> Result<Tensor> {
        let mut g = grad_out.clone();
        for l in (0..self.num_layers()).rev() {
            if l + 1 < self.num_layers() {
                g = self.activation.backward(&trace.hidden_pre[l], &g);
            }
            let w = params.require(&self.weight_name(l))?;
            let x = &trace.inputs[l];
            x.t_matmul_acc(&g, grads.entry_zeros(&self.weight_name(l), w.rows(), w.cols()));
            let bias = grads.entry_zeros(&self.bias_name(l), 1, w.cols());
            for (b, s) in bias.data_mut().iter_mut().zip(g.sum_rows()) {
                *b += s;
            }
            g = g.matmul_t(w);
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::check_gradients;

    #[test]
    fn gradients_match_finite_differences() {
        let mlp = Mlp::new("head", vec![3, 4, 2], Activation::default());
        let mut rng = Rng::new(5);
        let mut params = ParameterSet::new();
        mlp.init(&mut rng, &mut params);
        for (_, t) in params.iter_mut() {
            for v in t.data_mut() {
                *v += 0.1;
            }
        }
        let x = rng.uniform_tensor(5, 3, 1.0);
        let up = rng.uniform_tensor(5, 2, 1.0);
        let report = check_gradients(
            |p| {
                let (y, trace) = mlp.forward(p, &x).unwrap();
                let loss = y.data().iter().zip(up.data()).map(|(a, b)| a * b).sum();
                let mut g = ParameterSet::new();
                mlp.backward(p, &trace, &up, &mut g).unwrap();
                (loss, g)
            },
            &params,
            1e-6,
        );
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn names_are_one_based() {
        let mlp = Mlp::new("classifier", vec![8, 8, 3], Activation::default());
        assert_eq!(mlp.weight_name(0), "classifier.W1");
        assert_eq!(mlp.bias_name(1), "classifier.b2");
    }
}
