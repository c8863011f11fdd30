//! Dense multilayer perceptrons with a reverse-mode gradient tape.
//!
//! A forward pass records each primitive op (affine map, activation) together
//! with the values its backward rule needs. `DenseNet::backward` replays the
//! tape in reverse exactly once.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{matmul_into, matmul_nt_into, matmul_tn_acc, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Act {
    Tanh,
    Relu,
}

/// One affine layer `y = x·W + b`, with `W` of shape `(fan_in, fan_out)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor2,
    pub bias: Vec<f64>,
}

impl Dense {
    fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    fn fan_out(&self) -> usize {
        self.weight.cols()
    }
}

/// Multilayer perceptron. Hidden layers share one activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: OutputActivation,
    layers: Vec<Dense>,
}

/// Gradients for every parameter of a [`DenseNet`], laid out like the net.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads {
    pub layers: Vec<Dense>,
}

/// Parameter gradients plus the gradient with respect to the net input.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: NetGrads,
    pub input: Tensor2,
}

#[derive(Debug, Clone)]
enum TapeOp {
    Affine { layer: usize, input: Tensor2 },
    Activation { kind: Act, output: Tensor2 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
enum TapeState {
    #[default]
    Empty,
    Recorded,
    Consumed,
}

/// Ops and cached activations of a single forward pass.
#[derive(Debug, Clone, Default)]
pub struct GradTape {
    ops: Vec<TapeOp>,
    state: TapeState,
    out_shape: (usize, usize),
    param_count: usize,
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_consumed(&self) -> bool {
        self.state == TapeState::Consumed
    }

    fn take_ops(&mut self, net: &DenseNet, output_grad: &Tensor2) -> Result<Vec<TapeOp>> {
        match self.state {
            TapeState::Empty => return Err(Error::TapeEmpty),
            TapeState::Consumed => return Err(Error::TapeConsumed),
            TapeState::Recorded => {}
        }
        if self.param_count != net.param_count() {
            return Err(Error::Shape("tape was recorded on a different network".into()));
        }
        if output_grad.shape() != self.out_shape {
            return Err(Error::Shape(format!(
                "output gradient {:?} does not match forward output {:?}",
                output_grad.shape(),
                self.out_shape
            )));
        }
        self.state = TapeState::Consumed;
        Ok(std::mem::take(&mut self.ops))
    }
}

impl DenseNet {
    /// Builds a net with the given layer sizes `[input, hidden.., output]`,
    /// weights drawn uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden_activation: Activation,
        output_activation: OutputActivation,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!("bad layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let weight = (0..w[0] * w[1]).map(|_| rng.gen_range(-bound..bound)).collect();
                let bias = (0..w[1]).map(|_| rng.gen_range(-bound..bound)).collect();
                Dense { weight: Tensor2::from_vec(w[0], w[1], weight).expect("sized"), bias }
            })
            .collect();
        Ok(Self { sizes: sizes.to_vec(), hidden_activation, output_activation, layers })
    }

    /// Builds a net from explicit layers, validating that shapes chain.
    pub fn from_layers(
        layers: Vec<Dense>,
        hidden_activation: Activation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("network needs at least one layer".into()));
        }
        let mut sizes = vec![layers[0].fan_in()];
        for (i, l) in layers.iter().enumerate() {
            if l.fan_in() != *sizes.last().expect("nonempty") {
                return Err(Error::Shape(format!("layer {i} expects {} inputs", l.fan_in())));
            }
            if l.bias.len() != l.fan_out() {
                return Err(Error::Shape(format!("layer {i} bias has wrong length")));
            }
            sizes.push(l.fan_out());
        }
        Ok(Self { sizes, hidden_activation, output_activation, layers })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("nonempty")
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.data().len() + l.bias.len()).sum()
    }

    /// All parameters, weights before biases, layer by layer.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimMismatch { expected: self.param_count(), got: flat.len() });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let w = l.weight.data_mut();
            w.copy_from_slice(&flat[off..off + w.len()]);
            off += w.len();
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Visits matching parameter slices of `self` and `other` in flat order.
    pub fn zip_params_mut(&mut self, other: &DenseNet, mut f: impl FnMut(&mut [f64], &[f64])) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            f(a.weight.data_mut(), b.weight.data());
            f(&mut a.bias, &b.bias);
        }
    }

    /// `self ← tau·online + (1 − tau)·self`, parameter-wise.
    pub fn soft_update_from(&mut self, online: &DenseNet, tau: f64) {
        self.zip_params_mut(online, |t, o| {
            for (t, o) in t.iter_mut().zip(o) {
                *t = tau * o + (1.0 - tau) * *t;
            }
        });
    }

    /// Sets every parameter of the output layer to zero.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("nonempty");
        last.weight.data_mut().fill(0.0);
        last.bias.fill(0.0);
    }

    fn act_for(&self, layer: usize) -> Option<Act> {
        if layer + 1 < self.layers.len() {
            Some(match self.hidden_activation {
                Activation::Tanh => Act::Tanh,
                Activation::Relu => Act::Relu,
            })
        } else {
            match self.output_activation {
                OutputActivation::Identity => None,
                OutputActivation::Tanh => Some(Act::Tanh),
            }
        }
    }

    fn check_input(&self, input: &Tensor2) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                input.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn affine(&self, layer: usize, x: &Tensor2) -> Tensor2 {
        let l = &self.layers[layer];
        let mut z = Tensor2::zeros(x.rows(), l.fan_out());
        matmul_into(x, &l.weight, &mut z);
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&l.bias) {
                *v += b;
            }
        }
        z
    }

    /// Forward pass without recording anything.
    pub fn predict(&self, input: &Tensor2) -> Result<Tensor2> {
        self.check_input(input)?;
        let mut x = input.clone();
        for i in 0..self.layers.len() {
            x = self.affine(i, &x);
            if let Some(act) = self.act_for(i) {
                apply_act(act, &mut x);
            }
        }
        x.check_finite("network forward pass")?;
        Ok(x)
    }

    /// Forward pass that records into `tape`, replacing whatever it held.
    pub fn forward(&self, input: &Tensor2, tape: &mut GradTape) -> Result<Tensor2> {
        self.check_input(input)?;
        tape.ops.clear();
        tape.state = TapeState::Empty;
        let mut x = input.clone();
        for i in 0..self.layers.len() {
            let z = self.affine(i, &x);
            tape.ops.push(TapeOp::Affine { layer: i, input: x });
            x = z;
            if let Some(act) = self.act_for(i) {
                apply_act(act, &mut x);
                tape.ops.push(TapeOp::Activation { kind: act, output: x.clone() });
            }
        }
        x.check_finite("network forward pass")?;
        tape.state = TapeState::Recorded;
        tape.out_shape = x.shape();
        tape.param_count = self.param_count();
        Ok(x)
    }

    /// Reverse pass: parameter gradients and the input gradient.
    pub fn backward(&self, tape: &mut GradTape, output_grad: &Tensor2) -> Result<Gradients> {
        let ops = tape.take_ops(self, output_grad)?;
        let mut params = self.zero_grads();
        let input = self.replay(ops, output_grad, Some(&mut params))?;
        Ok(Gradients { params, input })
    }

    /// Reverse pass computing only the input gradient.
    pub fn backward_input(&self, tape: &mut GradTape, output_grad: &Tensor2) -> Result<Tensor2> {
        let ops = tape.take_ops(self, output_grad)?;
        self.replay(ops, output_grad, None)
    }

    fn replay(&self, ops: Vec<TapeOp>, output_grad: &Tensor2, mut params: Option<&mut NetGrads>) -> Result<Tensor2> {
        let mut g = output_grad.clone();
        for op in ops.into_iter().rev() {
            match op {
                TapeOp::Activation { kind, output } => {
                    for (gv, y) in g.data_mut().iter_mut().zip(output.data()) {
                        *gv *= match kind {
                            Act::Tanh => 1.0 - y * y,
                            Act::Relu => {
                                if *y > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                        };
                    }
                }
                TapeOp::Affine { layer, input } => {
                    let l = &self.layers[layer];
                    if let Some(p) = params.as_deref_mut() {
                        let pg = &mut p.layers[layer];
                        matmul_tn_acc(&input, &g, pg.weight.data_mut());
                        for r in 0..g.rows() {
                            for (b, v) in pg.bias.iter_mut().zip(g.row(r)) {
                                *b += v;
                            }
                        }
                    }
                    let mut gx = Tensor2::zeros(g.rows(), l.fan_in());
                    matmul_nt_into(&g, &l.weight, &mut gx);
                    g = gx;
                }
            }
        }
        g.check_finite("network backward pass")?;
        Ok(g)
    }

    pub fn zero_grads(&self) -> NetGrads {
        NetGrads {
            layers: self
                .layers
                .iter()
                .map(|l| Dense { weight: Tensor2::zeros(l.fan_in(), l.fan_out()), bias: vec![0.0; l.fan_out()] })
                .collect(),
        }
    }
}

fn apply_act(act: Act, x: &mut Tensor2) {
    match act {
        Act::Tanh => x.data_mut().iter_mut().for_each(|v| *v = v.tanh()),
        Act::Relu => x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
    }
}

impl NetGrads {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// `self += other`.
    pub fn add_assign(&mut self, other: &NetGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.data_mut().iter_mut().zip(b.weight.data()) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.is_finite() && l.bias.iter().all(|v| v.is_finite()))
    }
}
