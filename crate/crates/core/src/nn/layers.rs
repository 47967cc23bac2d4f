use rand::Rng;

use super::init::xavier_uniform;
use super::tape::{ParamVars, Tape, Var};
use super::tensor::{ParamId, ParamStore, Tensor};
use super::Result;

/// Affine map `x W + b` on row-major batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        let weight = store.add(format!("{name}.weight"), xavier_uniform(fan_in, fan_out, gain, rng));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[1, fan_out]));
        Self { weight, bias, fan_in, fan_out }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamVars, x: Var) -> Result<Var> {
        let y = tape.matmul(x, params.get(self.weight))?;
        tape.add_row(y, params.get(self.bias))
    }
}

/// Stack of [`Linear`] layers with `tanh` between them. The last layer is
/// linear unless `tanh_output` is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub tanh_output: bool,
}

impl Mlp {
    /// `widths` lists every layer boundary, input first. `out_gain` scales
    /// the initialization of the final layer.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        tanh_output: bool,
        out_gain: f64,
        rng: &mut R,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least input and output widths");
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let gain = if i + 1 == n { out_gain } else { 1.0 };
                Linear::new(store, &format!("{name}.{i}"), widths[i], widths[i + 1], gain, rng)
            })
            .collect();
        Self { layers, tanh_output }
    }

    pub fn fan_in(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.layers.last().unwrap().fan_out
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamVars, mut x: Var) -> Result<Var> {
        let n = self.layers.len();
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, params, x)?;
            if i + 1 < n || self.tanh_output {
                x = tape.tanh(x);
            }
        }
        Ok(x)
    }
}
