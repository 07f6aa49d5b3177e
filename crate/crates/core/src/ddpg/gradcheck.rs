//! Finite-difference verification of the hand-written backward pass.

use ndarray::{Array1, Array2, ArrayView2};

use super::nn::{DenseNet, OutputActivation};
use crate::error::Result;

/// A scalar loss of the network outputs together with its gradient.
pub trait LossProbe {
    fn loss(&self, output: &Array2<f64>) -> (f64, Array2<f64>);
}

/// `½·Σ(y − target)²`.
pub struct QuadraticProbe {
    pub target: Array2<f64>,
}

impl LossProbe for QuadraticProbe {
    fn loss(&self, output: &Array2<f64>) -> (f64, Array2<f64>) {
        let diff = output - &self.target;
        (0.5 * diff.iter().map(|d| d * d).sum::<f64>(), diff)
    }
}

/// A loss that ignores the network entirely.
pub struct ConstantProbe(pub f64);

impl LossProbe for ConstantProbe {
    fn loss(&self, output: &Array2<f64>) -> (f64, Array2<f64>) {
        (self.0, Array2::zeros(output.raw_dim()))
    }
}

pub const FD_STEP: f64 = 1e-5;

/// Plain forward pass kept separate from the network's own code: pre-activations
/// of every layer, with `acts[0]` the input and `acts[k]` the input of layer `k`.
struct Trace {
    pre: Vec<Array2<f64>>,
    acts: Vec<Array2<f64>>,
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn trace(net: &DenseNet, input: ArrayView2<f64>) -> Trace {
    let mut acts = vec![input.to_owned()];
    let mut pre = Vec::new();
    for layer in &net.layers {
        let z = acts.last().expect("input").dot(&layer.w) + &layer.b;
        acts.push(z.mapv(relu));
        pre.push(z);
    }
    acts.pop();
    Trace { pre, acts }
}

/// Output of the network given the pre-activation `z` of layer `k`.
fn finish(net: &DenseNet, mut k: usize, mut z: Array2<f64>) -> Array2<f64> {
    while k + 1 < net.layers.len() {
        k += 1;
        z = z.mapv(relu).dot(&net.layers[k].w) + &net.layers[k].b;
    }
    match net.output {
        OutputActivation::Sigmoid => z.mapv(|x| 1.0 / (1.0 + (-x).exp())),
        OutputActivation::Identity => z,
    }
}

/// Network output after shifting output column `j` of layer `k`'s
/// pre-activation by `shift` (one entry per batch row).
///
/// A parameter of layer `k` touches only that column, so the next layer sees a
/// rank-one change; only the layers after it are recomputed in full.
fn output_with_shift(net: &DenseNet, t: &Trace, k: usize, j: usize, shift: &Array1<f64>) -> Array2<f64> {
    let mut col = t.pre[k].column(j).to_owned();
    col += shift;
    if k + 1 == net.layers.len() {
        let mut z = t.pre[k].clone();
        z.column_mut(j).assign(&col);
        return finish(net, k, z);
    }
    let delta = col.mapv(relu) - t.pre[k].column(j).mapv(relu);
    let next_row = net.layers[k + 1].w.row(j);
    let mut z = t.pre[k + 1].clone();
    for (mut row, d) in z.rows_mut().into_iter().zip(&delta) {
        if *d != 0.0 {
            row.scaled_add(*d, &next_row);
        }
    }
    finish(net, k + 1, z)
}

/// Analytic and central-difference gradients over every parameter.
pub fn gradient_pair(net: &DenseNet, input: ArrayView2<f64>, probe: &dyn LossProbe) -> Result<(Vec<f64>, Vec<f64>)> {
    let cache = net.forward_cached(input)?;
    let (_, grad_out) = probe.loss(&cache.output);
    let (grads, _) = net.backward(&cache, grad_out.view(), true, None);
    let analytic = grads.expect("requested").flatten();

    let t = trace(net, input);
    let rows = input.nrows();
    let loss_at = |k: usize, j: usize, shift: Array1<f64>| probe.loss(&output_with_shift(net, &t, k, j, &shift)).0;
    let mut numeric = Vec::with_capacity(analytic.len());
    for (k, layer) in net.layers.iter().enumerate() {
        // weights in row-major order, then biases, matching the flattened layout
        for i in 0..layer.w.nrows() {
            let x = t.acts[k].column(i);
            for j in 0..layer.w.ncols() {
                let plus = loss_at(k, j, x.mapv(|v| v * FD_STEP));
                let minus = loss_at(k, j, x.mapv(|v| -v * FD_STEP));
                numeric.push((plus - minus) / (2.0 * FD_STEP));
            }
        }
        for j in 0..layer.b.len() {
            let plus = loss_at(k, j, Array1::from_elem(rows, FD_STEP));
            let minus = loss_at(k, j, Array1::from_elem(rows, -FD_STEP));
            numeric.push((plus - minus) / (2.0 * FD_STEP));
        }
    }
    Ok((analytic, numeric))
}

/// `|a − n| / max(|a|, |n|, 1e-6)`; the floor keeps round-off on vanishing
/// gradients from registering as relative error.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / scale
}

/// Maximum relative error between analytic and finite-difference gradients.
pub fn backprop_check(net: &DenseNet, input: ArrayView2<f64>, probe: &dyn LossProbe) -> Result<f64> {
    let (analytic, numeric) = gradient_pair(net, input, probe)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddpg::nn::OutputActivation;
    use crate::seed::rng_from_seed;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_from_seed(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn two_layer_quadratic() {
        let mut rng = rng_from_seed(0);
        for output in [OutputActivation::Sigmoid, OutputActivation::Identity] {
            let net = DenseNet::new(&[6, 10, 4], output, 0.5, &mut rng);
            let probe = QuadraticProbe {
                target: random_matrix(3, 4, 1),
            };
            let err = backprop_check(&net, random_matrix(3, 6, 2).view(), &probe).unwrap();
            assert!(err < 1e-4, "{output:?}: {err}");
        }
    }

    #[test]
    fn constant_loss_has_zero_gradients() {
        let net = DenseNet::zeros(&[4, 5, 2], OutputActivation::Sigmoid);
        let (a, n) = gradient_pair(&net, random_matrix(2, 4, 3).view(), &ConstantProbe(1.5)).unwrap();
        assert!(a.iter().all(|&g| g == 0.0));
        assert!(n.iter().all(|&g| g == 0.0));
    }

    struct SquaredError {
        target: f64,
    }

    impl LossProbe for SquaredError {
        fn loss(&self, output: &Array2<f64>) -> (f64, Array2<f64>) {
            let d = output[[0, 0]] - self.target;
            (d * d, Array2::from_elem((1, 1), 2.0 * d))
        }
    }

    #[test]
    fn linear_net_matches_closed_form() {
        let mut rng = rng_from_seed(5);
        let net = DenseNet::new(&[4, 1], OutputActivation::Identity, 1.0, &mut rng);
        let x = random_matrix(1, 4, 6);
        let probe = SquaredError { target: 0.7 };
        let pred = net.forward(x.view()).unwrap()[[0, 0]];
        let (analytic, _) = gradient_pair(&net, x.view(), &probe).unwrap();
        for j in 0..4 {
            assert!((analytic[j] - 2.0 * (pred - 0.7) * x[[0, j]]).abs() < 1e-10);
        }
        assert!((analytic[4] - 2.0 * (pred - 0.7)).abs() < 1e-10);
    }
}
