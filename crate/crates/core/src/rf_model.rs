//! Random-features networks: fixed random hidden layers (dense Gaussian or
//! bit-packed sign weights), an activation, and a trained linear read-out.

use crate::activation::ActivationKind;
use crate::bitpack::PackedOneBit;
use crate::error::{CoreError, Result};
use crate::real::Real;
use crate::{Matrix, Vector};
use ndarray::Axis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Weight law requested at construction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// Entries i.i.d. N(0, 1/d_in).
    Gaussian,
    /// Entries i.i.d. uniform on {+1/sqrt(d_in), -1/sqrt(d_in)}.
    Rademacher,
}

impl WeightKind {
    pub fn name(self) -> &'static str {
        match self {
            WeightKind::Gaussian => "gaussian",
            WeightKind::Rademacher => "rademacher",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "g" => Some(WeightKind::Gaussian),
            "rademacher" | "r" | "sign" | "onebit" => Some(WeightKind::Rademacher),
            _ => None,
        }
    }
}

/// One hidden layer: dense reals or packed sign bits. Packed layers store
/// entries of {+1,-1}/sqrt(d_in) exactly.
#[derive(Debug, Clone)]
pub enum WeightLayer<T> {
    Dense(Matrix<T>),
    Packed(PackedOneBit<T>),
}

impl<T: Real> WeightLayer<T> {
    pub fn d_out(&self) -> usize {
        match self {
            WeightLayer::Dense(w) => w.nrows(),
            WeightLayer::Packed(p) => p.d_out(),
        }
    }

    pub fn d_in(&self) -> usize {
        match self {
            WeightLayer::Dense(w) => w.ncols(),
            WeightLayer::Packed(p) => p.d_in(),
        }
    }

    /// X (n x d_in) times the layer transpose: returns n x d_out.
    pub fn apply_batch(&self, x: &Matrix<T>) -> Matrix<T> {
        match self {
            WeightLayer::Dense(w) => x.dot(&w.t()),
            WeightLayer::Packed(p) => p.matmul(x),
        }
    }

    /// W v for a single d_in vector.
    pub fn apply_vec(&self, v: &Vector<T>) -> Vector<T> {
        match self {
            WeightLayer::Dense(w) => w.dot(v),
            WeightLayer::Packed(p) => p.matvec(v),
        }
    }

    /// W^T v for a single d_out vector.
    pub fn apply_transpose_vec(&self, v: &Vector<T>) -> Vector<T> {
        match self {
            WeightLayer::Dense(w) => w.t().dot(v),
            WeightLayer::Packed(p) => p.matvec_transpose(v),
        }
    }

    /// Dense view of the weights (packed layers are expanded).
    pub fn to_dense(&self) -> Matrix<T> {
        match self {
            WeightLayer::Dense(w) => w.clone(),
            WeightLayer::Packed(p) => p.unpack(),
        }
    }
}

/// Ground-truth read-out vector; labels are a_star^T x^(L).
#[derive(Debug, Clone)]
pub struct GroundTruth<T> {
    pub a_star: Vector<T>,
}

/// A depth-L random features map x -> x^(L).
#[derive(Debug, Clone)]
pub struct RfNetwork<T> {
    pub layers: Vec<WeightLayer<T>>,
    pub activation: ActivationKind,
    pub dims: Vec<usize>,
}

/// Samples a dense Gaussian layer with entries N(0, 1/d_in).
fn sample_gaussian_layer<T: Real>(d_out: usize, d_in: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    let std = T::one() / T::of(d_in as f64).sqrt();
    let mut w = Matrix::<T>::zeros((d_out, d_in));
    for v in w.iter_mut() {
        *v = T::standard_normal(rng) * std;
    }
    w
}

impl<T: Real> RfNetwork<T> {
    /// Builds a network with the given widths `dims = [d_0, ..., d_L]`.
    /// Deterministic per seed; layer l consumes an independent substream.
    pub fn build(
        dims: &[usize],
        activation: ActivationKind,
        kind: WeightKind,
        seed: u64,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(CoreError::EmptyDims);
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(CoreError::ZeroDim(pos));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (d_in, d_out) = (dims[l], dims[l + 1]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(l as u64 + 1);
            match kind {
                WeightKind::Gaussian => {
                    layers.push(WeightLayer::Dense(sample_gaussian_layer(d_out, d_in, &mut rng)))
                }
                WeightKind::Rademacher => {
                    // sign of a Gaussian draw is an exact Unif{-1,+1}; reusing
                    // the Gaussian stream makes (seed, Gaussian) and
                    // (seed, Rademacher) a coupled pair: the latter is the
                    // one-bit quantization of the former.
                    let dense = sample_gaussian_layer::<T>(d_out, d_in, &mut rng);
                    layers.push(WeightLayer::Packed(PackedOneBit::pack_signs(&dense.view())?));
                }
            }
        }
        Ok(RfNetwork {
            layers,
            activation,
            dims: dims.to_vec(),
        })
    }

    /// One-bit quantization of every hidden layer: sign of each entry,
    /// rescaled by 1/sqrt(d_in). Already-packed layers are copied.
    pub fn quantize(&self) -> Result<Self> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                WeightLayer::Dense(w) => Ok(WeightLayer::Packed(PackedOneBit::pack_signs(&w.view())?)),
                WeightLayer::Packed(p) => Ok(WeightLayer::Packed(p.clone())),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RfNetwork {
            layers,
            activation: self.activation,
            dims: self.dims.clone(),
        })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn d_in(&self) -> usize {
        self.dims[0]
    }

    pub fn d_out(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Feature map on a batch: row i of the result is x_i^(L). One live
    /// buffer per layer; intermediate activations are not kept.
    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.ncols() != self.d_in() {
            return Err(CoreError::DimMismatch {
                expected: self.d_in(),
                got: x.ncols(),
                context: "forward input width",
            });
        }
        let mut cur = self.layers[0].apply_batch(x);
        cur.mapv_inplace(|z| self.activation.apply(z));
        for layer in &self.layers[1..] {
            let mut next = layer.apply_batch(&cur);
            next.mapv_inplace(|z| self.activation.apply(z));
            cur = next;
        }
        Ok(cur)
    }

    /// Feature map up to (and including) hidden layer `l` (1-based);
    /// `l = 0` returns the input unchanged.
    pub fn forward_to_layer(&self, x: &Matrix<T>, l: usize) -> Result<Matrix<T>> {
        if l > self.depth() {
            return Err(CoreError::LayerOutOfRange {
                got: l,
                depth: self.depth(),
            });
        }
        if x.ncols() != self.d_in() {
            return Err(CoreError::DimMismatch {
                expected: self.d_in(),
                got: x.ncols(),
                context: "forward input width",
            });
        }
        let mut cur = x.clone();
        for layer in &self.layers[..l] {
            let mut next = layer.apply_batch(&cur);
            next.mapv_inplace(|z| self.activation.apply(z));
            cur = next;
        }
        Ok(cur)
    }

    /// Predictions Phi(X) a for a single read-out vector.
    pub fn predict(&self, a: &Vector<T>, x: &Matrix<T>) -> Result<Vector<T>> {
        if a.len() != self.d_out() {
            return Err(CoreError::DimMismatch {
                expected: self.d_out(),
                got: a.len(),
                context: "read-out length",
            });
        }
        Ok(self.forward(x)?.dot(a))
    }

    /// Predictions Phi(X) A for a d_L x k read-out matrix.
    pub fn predict_multi(&self, a: &Matrix<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
        if a.nrows() != self.d_out() {
            return Err(CoreError::DimMismatch {
                expected: self.d_out(),
                got: a.nrows(),
                context: "read-out rows",
            });
        }
        Ok(self.forward(x)?.dot(a))
    }

    /// Labels y_i = a_star^T x_i^(L); definitionally `predict` at a_star.
    pub fn make_labels(&self, truth: &GroundTruth<T>, x: &Matrix<T>) -> Result<Vector<T>> {
        self.predict(&truth.a_star, x)
    }

    /// Samples a_star ~ N(0, I/d_L), deterministic per seed.
    pub fn sample_ground_truth(&self, seed: u64) -> GroundTruth<T> {
        let d = self.d_out();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0xa57a);
        let std = T::one() / T::of(d as f64).sqrt();
        let a_star = Vector::from_shape_fn(d, |_| T::standard_normal(&mut rng) * std);
        GroundTruth { a_star }
    }
}

/// Mean and variance of all entries of a dense matrix, for the
/// second-moment diagnostics.
pub fn entry_stats<T: Real>(w: &Matrix<T>) -> (T, T) {
    let n = T::of(w.len() as f64);
    let mean = w.sum() / n;
    let var = w.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    (mean, var)
}

#[allow(unused)]
fn _axis_hint(_a: Axis) {}
