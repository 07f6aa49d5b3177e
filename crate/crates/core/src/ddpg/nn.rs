//! Dense feed-forward networks with hand-written backpropagation and Adam.
//!
//! Networks are generic over the float type: training runs in `f32` for
//! throughput, while gradient checks run the same code in `f64`.

use std::fmt::Debug;
use std::ops::{AddAssign, Neg};

use ndarray::{s, Array, Array1, Array2, ArrayView2, Axis, Dimension, LinalgScalar, Zip};
use rand::distr::uniform::SampleUniform;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Float types a [`DenseNet`] can be built from.
pub trait Real:
    LinalgScalar + PartialOrd + Neg<Output = Self> + AddAssign + Debug + Send + Sync + SampleUniform + Serialize + DeserializeOwned
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn is_finite(self) -> bool;
    fn min_positive() -> Self;

    /// Replaces subnormal values by zero. Subnormal arithmetic is slow on
    /// common hardware and the values carry no useful signal here.
    fn flush(self) -> Self {
        if self.abs_lt(Self::min_positive()) {
            Self::zero()
        } else {
            self
        }
    }

    fn abs_lt(self, bound: Self) -> bool {
        self < bound && -self < bound
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
            fn min_positive() -> Self {
                <$t>::MIN_POSITIVE
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    /// Logistic squash into (0,1); used by the actor.
    Sigmoid,
    /// Used by the critic.
    Identity,
}

fn sigmoid<T: Real>(x: T) -> T {
    (T::one() / (T::one() + (-x).exp())).flush()
}

fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Affine layer `y = x·W + b` with `W` stored as `inputs × outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T = f64> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Real> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }

    fn uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, bound: f64, rng: &mut R) -> Self {
        let (lo, hi) = (T::from_f64(-bound), T::from_f64(bound));
        Self {
            w: Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(lo..hi)),
            b: Array1::from_shape_fn(outputs, |_| rng.random_range(lo..hi)),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.ncols()
    }
}

/// Rectifier hidden layers followed by a configurable output activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet<T = f64> {
    pub layers: Vec<Layer<T>>,
    pub output: OutputActivation,
}

// Observations are mostly zero columns (adjacency blocks of sparse graphs),
// so the input layer multiplies only the columns that are nonzero somewhere
// in the batch.
fn live_columns<T: Real>(x: ArrayView2<T>) -> Option<Vec<usize>> {
    let live: Vec<usize> = (0..x.ncols())
        .filter(|&j| x.column(j).iter().any(|&v| v != T::zero()))
        .collect();
    (2 * live.len() <= x.ncols()).then_some(live)
}

/// `x · w`.
fn input_dot<T: Real>(x: ArrayView2<T>, w: &Array2<T>) -> Array2<T> {
    match live_columns(x) {
        Some(live) => x.select(Axis(1), &live).dot(&w.select(Axis(0), &live)),
        None => x.dot(w),
    }
}

/// `xᵀ · delta`.
fn input_tdot<T: Real>(x: &Array2<T>, delta: &Array2<T>) -> Array2<T> {
    let Some(live) = live_columns(x.view()) else {
        return x.t().dot(delta);
    };
    let packed = x.select(Axis(1), &live).t().dot(delta);
    let mut out = Array2::zeros((x.ncols(), delta.ncols()));
    for (k, &j) in live.iter().enumerate() {
        out.row_mut(j).assign(&packed.row(k));
    }
    out
}

/// Intermediate values of a batched forward pass, consumed by [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T = f64> {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Array2<T>>,
    /// Pre-activations of the hidden layers.
    hidden_pre: Vec<Array2<T>>,
    pub output: Array2<T>,
}

/// Parameter gradients, one `(dW, db)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f64> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn flatten(&self) -> Vec<T> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers<T: Real>(layers: &[Layer<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.w.iter());
        out.extend(l.b.iter());
    }
    out
}

impl<T: Real> DenseNet<T> {
    /// Fan-in uniform initialization; the last layer gets `final_bound`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, final_bound: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "a network needs input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = if i == last { final_bound } else { 1.0 / (w[0] as f64).sqrt() };
                Layer::uniform(w[0], w[1], bound, rng)
            })
            .collect();
        Self { layers, output }
    }

    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            output,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_size()];
        s.extend(self.layers.iter().map(Layer::outputs));
        s
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, Layer::outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<T> {
        flatten_layers(&self.layers)
    }

    pub fn set_params_flat(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ShapeMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|x| *x = it.next().unwrap());
            l.b.iter_mut().for_each(|x| *x = it.next().unwrap());
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|x| x.is_finite()))
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_size() {
            return Err(Error::ShapeMismatch {
                expected: self.input_size(),
                got: cols,
            });
        }
        Ok(())
    }

    fn activate_output(&self, z: &mut Array2<T>) {
        if self.output == OutputActivation::Sigmoid {
            z.mapv_inplace(sigmoid);
        }
    }

    /// Batched forward pass; one sample per row.
    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(x.ncols())?;
        let mut h = input_dot(x, &self.layers[0].w) + &self.layers[0].b;
        for layer in self.layers.iter().skip(1) {
            h.mapv_inplace(relu);
            h = h.dot(&layer.w) + &layer.b;
        }
        self.activate_output(&mut h);
        Ok(h)
    }

    pub fn forward_one(&self, x: &[T]) -> Result<Vec<T>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> Result<ForwardCache<T>> {
        self.check_input(x.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut hidden_pre = Vec::with_capacity(self.layers.len() - 1);
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = if i == 0 { input_dot(h.view(), &layer.w) } else { h.dot(&layer.w) } + &layer.b;
            inputs.push(h);
            if i < last {
                h = z.mapv(relu);
                hidden_pre.push(z);
            } else {
                h = z;
            }
        }
        self.activate_output(&mut h);
        Ok(ForwardCache {
            inputs,
            hidden_pre,
            output: h,
        })
    }

    /// Backpropagates `grad_out = dL/d(output)` through the cached pass.
    ///
    /// Returns the parameter gradients (when requested) and, when `input_from`
    /// is given, `dL/d(input)` restricted to input columns `input_from..`.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        grad_out: ArrayView2<T>,
        param_grads: bool,
        input_from: Option<usize>,
    ) -> (Option<Gradients<T>>, Option<Array2<T>>) {
        let mut delta = grad_out.to_owned();
        if self.output == OutputActivation::Sigmoid {
            delta.zip_mut_with(&cache.output, |d, &y| *d = (*d * y * (T::one() - y)).flush());
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut input_grad = None;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if param_grads {
                let w = if i == 0 {
                    input_tdot(&cache.inputs[0], &delta)
                } else {
                    cache.inputs[i].t().dot(&delta)
                };
                grads.push(Layer {
                    w,
                    b: delta.sum_axis(Axis(0)),
                });
            }
            if i == 0 {
                if let Some(from) = input_from {
                    input_grad = Some(delta.dot(&layer.w.slice(s![from.., ..]).t()));
                }
                break;
            }
            let mut dx = delta.dot(&layer.w.t());
            dx.zip_mut_with(&cache.hidden_pre[i - 1], |d, &z| {
                if z <= T::zero() {
                    *d = T::zero();
                }
            });
            delta = dx;
        }
        grads.reverse();
        (param_grads.then_some(Gradients { layers: grads }), input_grad)
    }

    /// `θ_target ← rate·θ_online + (1 − rate)·θ_target` for every parameter.
    pub fn soft_update_from(&mut self, online: &DenseNet<T>, rate: f64) -> Result<()> {
        if self.sizes() != online.sizes() {
            return Err(Error::ShapeMismatch {
                expected: self.param_count(),
                got: online.param_count(),
            });
        }
        let keep = T::from_f64(1.0 - rate);
        let rate = T::from_f64(rate);
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.w.zip_mut_with(&o.w, |a, &b| *a = rate * b + keep * *a);
            t.b.zip_mut_with(&o.b, |a, &b| *a = rate * b + keep * *a);
        }
        Ok(())
    }

    /// Converts every parameter to another float type.
    pub fn cast<U: Real>(&self) -> DenseNet<U> {
        DenseNet {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    w: l.w.mapv(|x| U::from_f64(x.to_f64())),
                    b: l.b.mapv(|x| U::from_f64(x.to_f64())),
                })
                .collect(),
            output: self.output,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T = f64> {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Layer<T>>,
    v: Vec<Layer<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(net: &DenseNet<T>, lr: f64) -> Self {
        let zeros: Vec<Layer<T>> = net.layers.iter().map(|l| Layer::zeros(l.inputs(), l.outputs())).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut DenseNet<T>, grads: &Gradients<T>) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let k = AdamCoefficients {
            b1: T::from_f64(b1),
            b2: T::from_f64(b2),
            step: T::from_f64(self.lr * c2.sqrt() / c1),
            eps: T::from_f64(self.eps * c2.sqrt()),
        };
        for ((layer, g), (m, v)) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            adam_update(&mut layer.w, &g.w, &mut m.w, &mut v.w, k);
            adam_update(&mut layer.b, &g.b, &mut m.b, &mut v.b, k);
        }
    }
}

#[derive(Clone, Copy)]
struct AdamCoefficients<T> {
    b1: T,
    b2: T,
    /// Learning rate with both bias corrections folded in.
    step: T,
    eps: T,
}

fn adam_update<T: Real, D: Dimension>(
    p: &mut Array<T, D>,
    g: &Array<T, D>,
    m: &mut Array<T, D>,
    v: &mut Array<T, D>,
    k: AdamCoefficients<T>,
) {
    let one = T::one();
    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        // moments of units that stop receiving gradient decay geometrically
        *m = (k.b1 * *m + (one - k.b1) * g).flush();
        *v = (k.b2 * *v + (one - k.b2) * g * g).flush();
        *p = *p - k.step * *m / (v.sqrt() + k.eps);
    });
}

/// Serialized form of a network: flat row-major weights per layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub(crate) struct NetFile<T> {
    output: OutputActivation,
    layers: Vec<LayerFile<T>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct LayerFile<T> {
    inputs: usize,
    outputs: usize,
    w: Vec<T>,
    b: Vec<T>,
}

impl<T: Real> From<&DenseNet<T>> for NetFile<T> {
    fn from(net: &DenseNet<T>) -> Self {
        Self {
            output: net.output,
            layers: net
                .layers
                .iter()
                .map(|l| LayerFile {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    w: l.w.iter().copied().collect(),
                    b: l.b.to_vec(),
                })
                .collect(),
        }
    }
}

impl<T: Real> TryFrom<NetFile<T>> for DenseNet<T> {
    type Error = Error;

    fn try_from(file: NetFile<T>) -> Result<Self> {
        let mut layers = Vec::with_capacity(file.layers.len());
        for l in file.layers {
            if l.b.len() != l.outputs {
                return Err(Error::ShapeMismatch {
                    expected: l.outputs,
                    got: l.b.len(),
                });
            }
            let got = l.w.len();
            let w = Array2::from_shape_vec((l.inputs, l.outputs), l.w).map_err(|_| Error::ShapeMismatch {
                expected: l.inputs * l.outputs,
                got,
            })?;
            layers.push(Layer {
                w,
                b: Array1::from_vec(l.b),
            });
        }
        if layers.is_empty() || layers.windows(2).any(|p| p[0].outputs() != p[1].inputs()) {
            return Err(crate::error::invalid("inconsistent layer sizes in network file"));
        }
        Ok(DenseNet {
            layers,
            output: file.output,
        })
    }
}

impl<T: Real> Serialize for DenseNet<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NetFile::from(self).serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for DenseNet<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        NetFile::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn zero_actor_outputs_half() {
        let net = DenseNet::<f64>::zeros(&[6, 4, 3], OutputActivation::Sigmoid);
        let out = net.forward_one(&[0.3, 1.0, 0.0, 0.2, 0.9, 0.5]).unwrap();
        assert_eq!(out, vec![0.5; 3]);
    }

    #[test]
    fn very_negative_bias_drives_outputs_to_zero() {
        let mut net = DenseNet::<f64>::new(&[5, 8, 3], OutputActivation::Sigmoid, 1e-3, &mut rng_from_seed(1));
        net.layers.last_mut().unwrap().b.fill(-20.0);
        let out = net.forward_one(&[1.0; 5]).unwrap();
        assert!(out.iter().all(|&y| y < 1e-8 && y > 0.0));
    }

    #[test]
    fn forward_is_deterministic_and_checks_shape() {
        let net = DenseNet::<f64>::new(&[4, 8, 2], OutputActivation::Identity, 0.1, &mut rng_from_seed(2));
        let x = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(net.forward_one(&x).unwrap(), net.forward_one(&x).unwrap());
        assert!(matches!(net.forward_one(&[0.0; 3]), Err(Error::ShapeMismatch { expected: 4, got: 3 })));
    }

    #[test]
    fn zero_critic_outputs_zero() {
        let net = DenseNet::<f64>::zeros(&[7, 5, 5, 1], OutputActivation::Identity);
        assert_eq!(net.forward_one(&[0.9; 7]).unwrap(), vec![0.0]);
    }

    #[test]
    fn linear_critic_is_dot_product() {
        let mut net = DenseNet::<f64>::zeros(&[3, 1], OutputActivation::Identity);
        net.layers[0].w = array![[0.5], [-1.0], [2.0]];
        net.layers[0].b = array![0.25];
        let y = net.forward_one(&[1.0, 2.0, 3.0]).unwrap()[0];
        assert!((y - (0.5 - 2.0 + 6.0 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn soft_update_extremes() {
        let mut rng = rng_from_seed(3);
        let online = DenseNet::<f64>::new(&[3, 4, 2], OutputActivation::Identity, 0.5, &mut rng);
        let target0 = DenseNet::<f64>::new(&[3, 4, 2], OutputActivation::Identity, 0.5, &mut rng);
        let mut t = target0.clone();
        t.soft_update_from(&online, 1.0).unwrap();
        assert_eq!(t, online);
        let mut t = target0.clone();
        t.soft_update_from(&online, 0.0).unwrap();
        assert_eq!(t, target0);
        let mut t = target0.clone();
        t.soft_update_from(&online, 1e-12).unwrap();
        for (a, b) in t.params_flat().iter().zip(target0.params_flat()) {
            assert!((a - b).abs() < 1e-9);
        }
        let wrong = DenseNet::<f64>::zeros(&[3, 5, 2], OutputActivation::Identity);
        assert!(t.soft_update_from(&wrong, 0.5).is_err());
    }

    #[test]
    fn soft_update_scalar_midpoint() {
        let mut target = DenseNet::<f64>::zeros(&[1, 1], OutputActivation::Identity);
        let mut online = target.clone();
        online.set_params_flat(&[1.0, 1.0]).unwrap();
        target.soft_update_from(&online, 0.5).unwrap();
        assert_eq!(target.params_flat(), vec![0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn soft_update_twice_composes(seed in 0u64..1000, r in 0.001f64..1.0) {
            let mut rng = rng_from_seed(seed);
            let online = DenseNet::<f64>::new(&[3, 4, 2], OutputActivation::Identity, 0.5, &mut rng);
            let target = DenseNet::<f64>::new(&[3, 4, 2], OutputActivation::Identity, 0.5, &mut rng);
            let mut twice = target.clone();
            twice.soft_update_from(&online, r).unwrap();
            twice.soft_update_from(&online, r).unwrap();
            let mut once = target.clone();
            once.soft_update_from(&online, 2.0 * r - r * r).unwrap();
            for (a, b) in twice.params_flat().iter().zip(once.params_flat()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn serde_round_trip_is_bit_exact() {
        let net = DenseNet::<f64>::new(&[5, 7, 3], OutputActivation::Sigmoid, 0.3, &mut rng_from_seed(4));
        let text = serde_json::to_string(&net).unwrap();
        let back: DenseNet = serde_json::from_str(&text).unwrap();
        let bits = |n: &DenseNet| n.params_flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&net), bits(&back));
        assert_eq!(back.output, OutputActivation::Sigmoid);
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut net = DenseNet::<f64>::zeros(&[1, 1], OutputActivation::Identity);
        let mut opt = Adam::new(&net, 0.1);
        let grads = Gradients {
            layers: vec![Layer {
                w: array![[1.0]],
                b: array![-1.0],
            }],
        };
        opt.step(&mut net, &grads);
        let p = net.params_flat();
        assert!((p[0] + 0.1).abs() < 1e-6);
        assert!((p[1] - 0.1).abs() < 1e-6);
    }
}
