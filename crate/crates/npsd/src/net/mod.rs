//! Stacked LSTM sequence regressor, built from scratch: forward pass,
//! backpropagation through time, Adam, training loop and checkpoint IO.
//!
//! The network is two stacked LSTM layers followed by a time-distributed
//! dense head with a single output per step. Parameters live in one flat
//! buffer in a fixed layout (`W1, U1, b1, W2, U2, b2, w_d, b_d`, row-major,
//! gate order `i, f, g, o` inside each packed kernel), which keeps the
//! optimizer, checkpoint IO and gradient checks uniform.
//!
//! Training and inference run in `f32`; the same code instantiated with
//! `f64` exists solely for gradient verification.

mod adam;
mod checkpoint;
mod rnn;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use rnn::{backward, forward, lstm_cell_step, predict, ForwardCache, LstmState};
pub use train::{train, EarlyStopping, EpochStats, StopAction, TrainOptions, TrainOutcome};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Floating-point scalar the network can run in.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::iter::Sum
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn r<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 conversion")
}

/// Layer sizes. The output dimension is fixed to 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetworkDims {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
}

impl Default for NetworkDims {
    fn default() -> Self {
        Self {
            input: 3,
            hidden1: 128,
            hidden2: 64,
        }
    }
}

impl NetworkDims {
    pub fn new(input: usize, hidden1: usize, hidden2: usize) -> Self {
        Self {
            input,
            hidden1,
            hidden2,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input < 1 || self.hidden1 < 1 || self.hidden2 < 1 {
            return Err(Error::InvalidArgument(format!(
                "network dims must all be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Total learnable parameter count for the given dims:
/// `4·(H_j·(I_j + H_j) + H_j)` per LSTM layer plus `H_2 + 1` for the head.
pub fn count_parameters(dims: NetworkDims) -> usize {
    let NetworkDims {
        input,
        hidden1,
        hidden2,
    } = dims;
    let l1 = 4 * (hidden1 * (input + hidden1) + hidden1);
    let l2 = 4 * (hidden2 * (hidden1 + hidden2) + hidden2);
    l1 + l2 + hidden2 + 1
}

/// Offsets of each parameter group inside the flat buffer.
#[derive(Clone, Copy, Debug)]
struct Layout {
    w1: usize,
    u1: usize,
    b1: usize,
    w2: usize,
    u2: usize,
    b2: usize,
    wd: usize,
    bd: usize,
    total: usize,
}

impl Layout {
    fn new(dims: NetworkDims) -> Self {
        let (i, h1, h2) = (dims.input, dims.hidden1, dims.hidden2);
        let w1 = 0;
        let u1 = w1 + 4 * h1 * i;
        let b1 = u1 + 4 * h1 * h1;
        let w2 = b1 + 4 * h1;
        let u2 = w2 + 4 * h2 * h1;
        let b2 = u2 + 4 * h2 * h2;
        let wd = b2 + 4 * h2;
        let bd = wd + h2;
        let total = bd + 1;
        Self {
            w1,
            u1,
            b1,
            w2,
            u2,
            b2,
            wd,
            bd,
            total,
        }
    }
}

/// Borrowed view of one LSTM layer's kernels.
///
/// `w` is the input kernel (4H × input_dim), `u` the recurrent kernel
/// (4H × H), `b` the bias (4H), all row-major with gate order (i, f, g, o).
pub struct LayerView<'a, T> {
    pub w: &'a [T],
    pub u: &'a [T],
    pub b: &'a [T],
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Weights and biases of the full network in one flat buffer.
///
/// The same container doubles as gradient storage, since gradients share
/// every shape with the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams<T> {
    dims: NetworkDims,
    data: Vec<T>,
}

impl<T: Real> NetworkParams<T> {
    pub fn zeros(dims: NetworkDims) -> Self {
        Self {
            dims,
            data: vec![T::zero(); Layout::new(dims).total],
        }
    }

    pub fn from_data(dims: NetworkDims, data: Vec<T>) -> Result<Self> {
        dims.validate()?;
        let total = Layout::new(dims).total;
        if data.len() != total {
            return Err(Error::ShapeMismatch(format!(
                "parameter buffer has {} values, dims {dims:?} need {total}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    /// Seeded initialization: kernels uniform in [-r, r] with
    /// `r = sqrt(6 / (fan_in + fan_out))`, biases zero except the forget-gate
    /// bias, which starts at 1 to stabilize long backpropagation spans.
    pub fn init(dims: NetworkDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(dims);
        let layout = Layout::new(dims);
        let (i, h1, h2) = (dims.input, dims.hidden1, dims.hidden2);

        let mut fill = |rng: &mut ChaCha8Rng, start: usize, len: usize, fan_in: usize, fan_out: usize| {
            let radius = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut params.data[start..start + len] {
                *v = r(rng.random_range(-radius..radius));
            }
        };
        fill(&mut rng, layout.w1, 4 * h1 * i, i, 4 * h1);
        fill(&mut rng, layout.u1, 4 * h1 * h1, h1, 4 * h1);
        fill(&mut rng, layout.w2, 4 * h2 * h1, h1, 4 * h2);
        fill(&mut rng, layout.u2, 4 * h2 * h2, h2, 4 * h2);
        fill(&mut rng, layout.wd, h2, h2, 1);

        for v in &mut params.data[layout.b1 + h1..layout.b1 + 2 * h1] {
            *v = T::one();
        }
        for v in &mut params.data[layout.b2 + h2..layout.b2 + 2 * h2] {
            *v = T::one();
        }
        Ok(params)
    }

    pub fn dims(&self) -> NetworkDims {
        self.dims
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn layer1(&self) -> LayerView<'_, T> {
        let l = Layout::new(self.dims);
        LayerView {
            w: &self.data[l.w1..l.u1],
            u: &self.data[l.u1..l.b1],
            b: &self.data[l.b1..l.w2],
            input_dim: self.dims.input,
            hidden_dim: self.dims.hidden1,
        }
    }

    pub fn layer2(&self) -> LayerView<'_, T> {
        let l = Layout::new(self.dims);
        LayerView {
            w: &self.data[l.w2..l.u2],
            u: &self.data[l.u2..l.b2],
            b: &self.data[l.b2..l.wd],
            input_dim: self.dims.hidden1,
            hidden_dim: self.dims.hidden2,
        }
    }

    pub fn dense_w(&self) -> &[T] {
        let l = Layout::new(self.dims);
        &self.data[l.wd..l.bd]
    }

    pub fn dense_b(&self) -> T {
        let l = Layout::new(self.dims);
        self.data[l.bd]
    }

    /// Lengths of every stored array, in layout order. Summing them is the
    /// independent tally checked against `count_parameters`.
    pub fn group_lens(&self) -> [usize; 8] {
        let (i, h1, h2) = (self.dims.input, self.dims.hidden1, self.dims.hidden2);
        [
            4 * h1 * i,
            4 * h1 * h1,
            4 * h1,
            4 * h2 * h1,
            4 * h2 * h2,
            4 * h2,
            h2,
            1,
        ]
    }

    pub fn cast<U: Real>(&self) -> NetworkParams<U> {
        NetworkParams {
            dims: self.dims,
            data: self
                .data
                .iter()
                .map(|v| U::from_f64(v.to_f64().unwrap()).unwrap())
                .collect(),
        }
    }

    pub(crate) fn layout_offsets(&self) -> (usize, usize, usize, usize, usize, usize, usize, usize) {
        let l = Layout::new(self.dims);
        (l.w1, l.u1, l.b1, l.w2, l.u2, l.b2, l.wd, l.bd)
    }
}

/// Mean squared error over one sequence: `(1/T)·Σ_t (y_t − ŷ_t)²`.
pub fn mse_loss<T: Real>(predictions: &[T], targets: &[T]) -> T {
    assert_eq!(
        predictions.len(),
        targets.len(),
        "prediction/target length mismatch"
    );
    let n = r::<T>(predictions.len() as f64);
    predictions
        .iter()
        .zip(targets)
        .map(|(&y, &t)| (y - t) * (y - t))
        .sum::<T>()
        / n
}
