//! Fully-connected and pedigree-convolutional networks.
//!
//! Parameters of every architecture live in one flat vector. A [`Layout`]
//! records where each layer's weight matrix (row-major, one row per unit or
//! filter) and bias vector start. Both architectures end in a single sigmoid
//! unit.

mod checkpoint;
mod conv;
mod dense;
mod search;
mod train;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::NeighborhoodMap;
use crate::error::{Error, Result};
use crate::seed;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use search::{random_search, Candidate, SearchResult, SearchSpace};
pub use train::{gradient_check, train, TrainOutput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Fcnn,
    PedigreeCnn,
    Logistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Elu,
    Logistic,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Logistic => sigmoid(z),
        }
    }

    /// Derivative at `z`, given `a = apply(z)`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
            Activation::Logistic => a * (1.0 - a),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    CrossEntropy,
}

impl Loss {
    /// Loss for output logit `z` (prediction `sigmoid(z)`) and label `y`, with
    /// its derivative with respect to `z`.
    #[inline]
    pub fn eval(self, z: f64, y: f64) -> (f64, f64) {
        let p = sigmoid(z);
        match self {
            Loss::Mse => ((p - y) * (p - y), 2.0 * (p - y) * p * (1.0 - p)),
            Loss::CrossEntropy => {
                // log p = -softplus(-z), log(1 - p) = -softplus(z)
                let loss = y * softplus(-z) + (1.0 - y) * softplus(z);
                (loss, p - y)
            }
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Architecture and optimizer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub kind: Kind,
    /// Hidden widths (fcnn) or filter counts (cnn); empty for logistic.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Dropout rate applied after the first hidden layer while training.
    pub dropout: f64,
    pub loss: Loss,
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl ArchitectureSpec {
    pub fn fcnn() -> Self {
        ArchitectureSpec {
            kind: Kind::Fcnn,
            hidden: vec![30, 10],
            activation: Activation::Elu,
            dropout: 0.2,
            loss: Loss::Mse,
            weight_decay: 0.0,
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 256,
            seed: 0,
        }
    }

    pub fn cnn() -> Self {
        ArchitectureSpec {
            kind: Kind::PedigreeCnn,
            hidden: vec![10, 5],
            epochs: 15,
            ..Self::fcnn()
        }
    }

    pub fn logistic() -> Self {
        ArchitectureSpec {
            kind: Kind::Logistic,
            hidden: Vec::new(),
            dropout: 0.0,
            ..Self::fcnn()
        }
    }

    pub fn check(&self) -> Result<()> {
        match self.kind {
            Kind::Logistic if !self.hidden.is_empty() => {
                return Err(Error::Config("logistic models have no hidden layers".into()))
            }
            Kind::Fcnn | Kind::PedigreeCnn if self.hidden.is_empty() => {
                return Err(Error::Config(
                    "networks need at least one hidden layer; use the logistic kind".into(),
                ))
            }
            _ => {}
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layers must have at least one unit".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("learning rate must be > 0 and weight decay >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Input geometry a network is built for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Dense {
        input_len: usize,
    },
    Pedigree {
        slots: usize,
        features: usize,
        /// Counselee-level covariates appended after the slot block; they
        /// feed the output unit directly.
        extras: usize,
        map: NeighborhoodMap,
    },
}

impl Geometry {
    pub fn input_len(&self) -> usize {
        match self {
            Geometry::Dense { input_len } => *input_len,
            Geometry::Pedigree {
                slots,
                features,
                extras,
                ..
            } => slots * features + extras,
        }
    }
}

/// Offsets of one weight matrix and its bias vector in the parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub w: usize,
    pub rows: usize,
    pub cols: usize,
    pub b: usize,
}

impl Block {
    fn weight_range(&self) -> std::ops::Range<usize> {
        self.w..self.w + self.rows * self.cols
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub hidden: Vec<Block>,
    pub out: Block,
    pub total: usize,
}

impl Layout {
    fn new(spec: &ArchitectureSpec, geometry: &Geometry) -> Result<Layout> {
        let mut total = 0;
        let mut block = |rows: usize, cols: usize| {
            let b = Block {
                w: total,
                rows,
                cols,
                b: total + rows * cols,
            };
            total += rows * cols + rows;
            b
        };
        let (hidden, out) = match (spec.kind, geometry) {
            (
                Kind::PedigreeCnn,
                Geometry::Pedigree {
                    features, extras, map, ..
                },
            ) => {
                let mut prev = *features;
                let mut hidden = Vec::new();
                for &m in &spec.hidden {
                    hidden.push(block(m, map.u * prev));
                    prev = m;
                }
                (hidden, block(1, prev + extras))
            }
            (Kind::PedigreeCnn, _) => return Err(Error::Config("a pedigree CNN needs pedigree geometry".into())),
            (_, g) => {
                let mut prev = g.input_len();
                let mut hidden = Vec::new();
                for &n in &spec.hidden {
                    hidden.push(block(n, prev));
                    prev = n;
                }
                (hidden, block(1, prev))
            }
        };
        Ok(Layout { hidden, out, total })
    }

    fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.hidden.iter().chain(std::iter::once(&self.out))
    }

    /// True for entries that are weights (subject to decay), false for biases.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.total];
        for b in self.blocks() {
            for i in b.weight_range() {
                mask[i] = true;
            }
        }
        mask
    }
}

/// A network: architecture, geometry and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub spec: ArchitectureSpec,
    pub geometry: Geometry,
    pub params: Vec<f64>,
    layout: Layout,
    /// CNN only: slots whose activations are needed at each layer.
    receptive: Vec<Vec<usize>>,
}

/// Scratch space and dropout masks for one forward/backward pass.
pub(crate) struct Pass<'a> {
    pub dropout: Option<(f64, &'a mut ChaCha8Rng)>,
}

impl Network {
    /// Network with all parameters zero.
    pub fn zeros(spec: ArchitectureSpec, geometry: Geometry) -> Result<Network> {
        spec.check()?;
        let layout = Layout::new(&spec, &geometry)?;
        let receptive = match &geometry {
            Geometry::Pedigree { map, .. } => conv::receptive_sets(map, spec.hidden.len()),
            Geometry::Dense { .. } => Vec::new(),
        };
        Ok(Network {
            params: vec![0.0; layout.total],
            spec,
            geometry,
            layout,
            receptive,
        })
    }

    /// Glorot-uniform weights and zero biases, seeded from the spec.
    pub fn init(spec: ArchitectureSpec, geometry: Geometry) -> Result<Network> {
        let mut net = Network::zeros(spec, geometry)?;
        let mut rng = seed::rng(seed::derive(net.spec.seed, 0));
        for b in net.layout.blocks().copied().collect::<Vec<_>>() {
            let s = (6.0 / (b.cols + b.rows) as f64).sqrt();
            for i in b.weight_range() {
                net.params[i] = rng.gen_range(-s..s);
            }
        }
        Ok(net)
    }

    /// Rebuilds a network from stored parameters.
    pub fn from_parts(spec: ArchitectureSpec, geometry: Geometry, params: Vec<f64>) -> Result<Network> {
        let mut net = Network::zeros(spec, geometry)?;
        if params.len() != net.layout.total {
            return Err(Error::Shape {
                expected: net.layout.total,
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn n_params(&self) -> usize {
        self.layout.total
    }

    pub fn input_len(&self) -> usize {
        self.geometry.input_len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::Shape {
                expected: self.input_len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Output logit for one input, with `grad` (if given) receiving
    /// `d_out * d logit / d params` and `input_grad` receiving the same with
    /// respect to inputs. `d_out` is computed from the logit by the callback.
    pub(crate) fn run(
        &self,
        params: &[f64],
        x: &[f64],
        pass: &mut Pass<'_>,
        backward: Option<(&mut dyn FnMut(f64) -> f64, &mut [f64], Option<&mut [f64]>)>,
    ) -> f64 {
        match &self.geometry {
            Geometry::Pedigree { .. } => conv::run(self, params, x, pass, backward),
            Geometry::Dense { .. } => dense::run(self, params, x, pass, backward),
        }
    }

    /// Inference: predicted probability, dropout disabled.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(sigmoid(self.run(&self.params, x, &mut Pass { dropout: None }, None)))
    }

    pub fn predict_batch<R: AsRef<[f64]> + Sync>(&self, xs: &[R]) -> Result<Vec<f64>> {
        xs.par_iter().map(|x| self.predict(x.as_ref())).collect()
    }

    /// Gradient of the predicted probability with respect to the inputs.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut grad = vec![0.0; self.n_params()];
        let mut gx = vec![0.0; x.len()];
        let mut d = |z: f64| {
            let p = sigmoid(z);
            p * (1.0 - p)
        };
        self.run(
            &self.params,
            x,
            &mut Pass { dropout: None },
            Some((&mut d, &mut grad, Some(&mut gx))),
        );
        Ok(gx)
    }
}
