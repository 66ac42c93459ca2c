//! Small tanh multilayer perceptron over a flat parameter vector.

use crate::error::{Error, Result};

/// Fully connected network with tanh activations on every layer, including
/// the output, so actions are bounded in (-1, 1).
///
/// Parameters are stored flat, layer by layer, weights before biases:
/// `count = sum_i (n_i * n_{i+1} + n_{i+1})`. The cart-pole layout
/// `[5, 10, 1]` has exactly 71 parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    sizes: Vec<usize>,
    pub w: Vec<f64>,
}

impl Policy {
    /// Zero-initialized policy with the given layer sizes.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!("bad layer sizes {sizes:?}")));
        }
        let count = Self::param_count_for(sizes);
        Ok(Policy {
            sizes: sizes.to_vec(),
            w: vec![0.0; count],
        })
    }

    /// Policy with the given flat parameter vector.
    pub fn from_params(sizes: &[usize], w: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(sizes)?;
        if w.len() != p.w.len() {
            return Err(Error::LengthMismatch {
                expected: p.w.len(),
                got: w.len(),
            });
        }
        p.w = w;
        Ok(p)
    }

    pub fn param_count_for(sizes: &[usize]) -> usize {
        sizes
            .windows(2)
            .map(|pair| pair[0] * pair[1] + pair[1])
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.w.len()
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Forward pass; output lies in (-1, 1) componentwise.
    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.input_size() {
            return Err(Error::LengthMismatch {
                expected: self.input_size(),
                got: state.len(),
            });
        }
        let mut act = state.to_vec();
        let mut offset = 0;
        for pair in self.sizes.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            let mut next = vec![0.0; n_out];
            for (j, nj) in next.iter_mut().enumerate() {
                let row = &self.w[offset + j * n_in..offset + (j + 1) * n_in];
                let mut s = self.w[offset + n_in * n_out + j]; // bias
                for (wij, ai) in row.iter().zip(act.iter()) {
                    s += wij * ai;
                }
                *nj = s.tanh();
            }
            offset += n_in * n_out + n_out;
            act = next;
        }
        Ok(act)
    }
}

/// Forward pass as a free function.
pub fn mlp_forward(policy: &Policy, state: &[f64]) -> Result<Vec<f64>> {
    policy.forward(state)
}
