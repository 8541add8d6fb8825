use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    ModelError, PredictionDataset, Result, DEMOGRAPHIC_WIDTH, DEMO_HIDDEN, HEAD_HIDDEN, HEAD_OUT,
    TSS_HIDDEN, TSS_OUT,
};
use crate::scalar::Scalar;

/// Fully connected layer; `weights` is `outputs × inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = Self::glorot_bound(inputs, outputs);
        let mut layer = Self::zeros(inputs, outputs);
        for w in &mut layer.weights {
            *w = T::lit(rng.gen_range(-bound..=bound));
        }
        layer
    }

    pub fn glorot_bound(inputs: usize, outputs: usize) -> f64 {
        (6.0 / (inputs + outputs) as f64).sqrt()
    }

    pub fn weight(&self, out: usize, inp: usize) -> T {
        self.weights[out * self.inputs + inp]
    }

    pub fn forward(&self, x: &[T], z: &mut [T]) {
        debug_assert_eq!(x.len(), self.inputs);
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut acc = self.bias[o];
            for (w, xi) in row.iter().zip(x) {
                acc += *w * *xi;
            }
            *zo = acc;
        }
    }

    /// Accumulates parameter gradients for upstream gradient `dz` at input
    /// `x`, and writes the input gradient into `dx` when requested.
    fn backward(&self, x: &[T], dz: &[T], grad: &mut Dense<T>, dx: Option<&mut [T]>) {
        for (o, &g) in dz.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            grad.bias[o] += g;
            let row = &mut grad.weights[o * self.inputs..(o + 1) * self.inputs];
            for (gw, xi) in row.iter_mut().zip(x) {
                *gw += g * *xi;
            }
        }
        if let Some(dx) = dx {
            dx.iter_mut().for_each(|d| *d = T::zero());
            for (o, &g) in dz.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                for (d, w) in dx.iter_mut().zip(row) {
                    *d += g * *w;
                }
            }
        }
    }

    fn map_pairs(&mut self, other: &Dense<T>, mut f: impl FnMut(&mut T, T)) {
        for (a, &b) in self.weights.iter_mut().zip(&other.weights) {
            f(a, b);
        }
        for (a, &b) in self.bias.iter_mut().zip(&other.bias) {
            f(a, b);
        }
    }
}

/// Parameters of the two-branch network, layers in fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights<T> {
    pub tss_hidden: Dense<T>,
    pub tss_out: Dense<T>,
    pub demo_hidden: Dense<T>,
    pub head_hidden: Dense<T>,
    pub head_out: Dense<T>,
    pub output: Dense<T>,
}

pub(crate) const LAYER_NAMES: [&str; 6] = [
    "tss_hidden",
    "tss_out",
    "demo_hidden",
    "head_hidden",
    "head_out",
    "output",
];

fn relu<T: Scalar>(z: &[T], a: &mut [T]) {
    // NaN passes through so a broken input shows up in the loss
    for (ai, &zi) in a.iter_mut().zip(z) {
        *ai = if zi < T::zero() { T::zero() } else { zi };
    }
}

fn relu_grad<T: Scalar>(z: &[T], da: &mut [T]) {
    for (d, &zi) in da.iter_mut().zip(z) {
        if zi <= T::zero() {
            *d = T::zero();
        }
    }
}

pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Binary cross-entropy of `sigmoid(z)` against `y`, computed from the logit.
pub(crate) fn bce_from_logit<T: Scalar>(z: T, y: T) -> T {
    z.max(T::zero()) - z * y + (T::one() + (-z.abs()).exp()).ln()
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    z1: Vec<T>,
    a1: Vec<T>,
    mask1: Option<Vec<T>>,
    z2: Vec<T>,
    z3: Vec<T>,
    concat: Vec<T>,
    z4: Vec<T>,
    a4: Vec<T>,
    mask4: Option<Vec<T>>,
    z5: Vec<T>,
    a5: Vec<T>,
    pub logit: T,
    pub probability: T,
}

fn dropout_mask<T: Scalar>(n: usize, rate: f64, rng: &mut impl Rng) -> Vec<T> {
    let keep = T::lit(1.0 / (1.0 - rate));
    (0..n)
        .map(|_| {
            if rng.gen::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect()
}

impl<T: Scalar> NetworkWeights<T> {
    pub fn zeros(tss_width: usize) -> Self {
        Self {
            tss_hidden: Dense::zeros(tss_width, TSS_HIDDEN),
            tss_out: Dense::zeros(TSS_HIDDEN, TSS_OUT),
            demo_hidden: Dense::zeros(DEMOGRAPHIC_WIDTH, DEMO_HIDDEN),
            head_hidden: Dense::zeros(TSS_OUT + DEMO_HIDDEN, HEAD_HIDDEN),
            head_out: Dense::zeros(HEAD_HIDDEN, HEAD_OUT),
            output: Dense::zeros(HEAD_OUT, 1),
        }
    }

    /// Glorot-uniform initialization, drawing layers in their listed order
    /// from a ChaCha8 stream seeded with `seed`.
    pub fn init(tss_width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            tss_hidden: Dense::glorot(tss_width, TSS_HIDDEN, &mut rng),
            tss_out: Dense::glorot(TSS_HIDDEN, TSS_OUT, &mut rng),
            demo_hidden: Dense::glorot(DEMOGRAPHIC_WIDTH, DEMO_HIDDEN, &mut rng),
            head_hidden: Dense::glorot(TSS_OUT + DEMO_HIDDEN, HEAD_HIDDEN, &mut rng),
            head_out: Dense::glorot(HEAD_HIDDEN, HEAD_OUT, &mut rng),
            output: Dense::glorot(HEAD_OUT, 1, &mut rng),
        }
    }

    pub fn tss_width(&self) -> usize {
        self.tss_hidden.inputs
    }

    pub fn layers(&self) -> [&Dense<T>; 6] {
        [
            &self.tss_hidden,
            &self.tss_out,
            &self.demo_hidden,
            &self.head_hidden,
            &self.head_out,
            &self.output,
        ]
    }

    pub fn layers_mut(&mut self) -> [&mut Dense<T>; 6] {
        [
            &mut self.tss_hidden,
            &mut self.tss_out,
            &mut self.demo_hidden,
            &mut self.head_hidden,
            &mut self.head_out,
            &mut self.output,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.layers()
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }

    /// Applies `f(param, other_param)` across matching parameters.
    pub(crate) fn zip_apply(&mut self, other: &Self, mut f: impl FnMut(&mut T, T)) {
        for (a, b) in self.layers_mut().into_iter().zip(other.layers()) {
            a.map_pairs(b, &mut f);
        }
    }

    pub(crate) fn fill(&mut self, value: T) {
        for layer in self.layers_mut() {
            layer.weights.iter_mut().for_each(|w| *w = value);
            layer.bias.iter_mut().for_each(|b| *b = value);
        }
    }

    fn check_widths(&self, tss: &[T], demo: &[T]) -> Result<()> {
        if tss.len() != self.tss_width() {
            return Err(ModelError::Width {
                what: "timed state sample",
                expected: self.tss_width(),
                found: tss.len(),
            });
        }
        if demo.len() != DEMOGRAPHIC_WIDTH {
            return Err(ModelError::Width {
                what: "demographic",
                expected: DEMOGRAPHIC_WIDTH,
                found: demo.len(),
            });
        }
        Ok(())
    }

    /// Inference: dropout is the identity.
    pub fn forward(&self, tss: &[T], demo: &[T]) -> Result<T> {
        self.check_widths(tss, demo)?;
        Ok(self
            .forward_cached::<rand_chacha::ChaCha8Rng>(tss, demo, None)
            .probability)
    }

    /// Training-mode pass with fresh dropout masks drawn from `rng`.
    pub fn forward_train(
        &self,
        tss: &[T],
        demo: &[T],
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Result<ForwardCache<T>> {
        self.check_widths(tss, demo)?;
        Ok(self.forward_cached(tss, demo, Some((dropout, rng))))
    }

    pub(crate) fn forward_cached<R: Rng>(
        &self,
        tss: &[T],
        demo: &[T],
        dropout: Option<(f64, &mut R)>,
    ) -> ForwardCache<T> {
        let (mask1, mask4) = match dropout {
            Some((rate, rng)) if rate > 0.0 => (
                Some(dropout_mask(TSS_HIDDEN, rate, rng)),
                Some(dropout_mask(HEAD_HIDDEN, rate, rng)),
            ),
            _ => (None, None),
        };

        let mut z1 = vec![T::zero(); TSS_HIDDEN];
        self.tss_hidden.forward(tss, &mut z1);
        let mut a1 = vec![T::zero(); TSS_HIDDEN];
        relu(&z1, &mut a1);
        if let Some(m) = &mask1 {
            a1.iter_mut().zip(m).for_each(|(a, &k)| *a *= k);
        }

        let mut z2 = vec![T::zero(); TSS_OUT];
        self.tss_out.forward(&a1, &mut z2);
        let mut z3 = vec![T::zero(); DEMO_HIDDEN];
        self.demo_hidden.forward(demo, &mut z3);

        let mut concat = vec![T::zero(); TSS_OUT + DEMO_HIDDEN];
        relu(&z2, &mut concat[..TSS_OUT]);
        relu(&z3, &mut concat[TSS_OUT..]);

        let mut z4 = vec![T::zero(); HEAD_HIDDEN];
        self.head_hidden.forward(&concat, &mut z4);
        let mut a4 = vec![T::zero(); HEAD_HIDDEN];
        relu(&z4, &mut a4);
        if let Some(m) = &mask4 {
            a4.iter_mut().zip(m).for_each(|(a, &k)| *a *= k);
        }

        let mut z5 = vec![T::zero(); HEAD_OUT];
        self.head_out.forward(&a4, &mut z5);
        let mut a5 = vec![T::zero(); HEAD_OUT];
        relu(&z5, &mut a5);

        let mut z6 = [T::zero()];
        self.output.forward(&a5, &mut z6);
        ForwardCache {
            z1,
            a1,
            mask1,
            z2,
            z3,
            concat,
            z4,
            a4,
            mask4,
            z5,
            a5,
            logit: z6[0],
            probability: sigmoid(z6[0]),
        }
    }

    /// Accumulates into `grad` the gradient of `scale · BCE(p, y)` for one
    /// row whose forward pass produced `cache`.
    pub(crate) fn backward(
        &self,
        tss: &[T],
        demo: &[T],
        cache: &ForwardCache<T>,
        y: T,
        scale: T,
        grad: &mut Self,
    ) {
        let dz6 = [(cache.probability - y) * scale];

        let mut da5 = vec![T::zero(); HEAD_OUT];
        self.output
            .backward(&cache.a5, &dz6, &mut grad.output, Some(&mut da5));
        relu_grad(&cache.z5, &mut da5);

        let mut da4 = vec![T::zero(); HEAD_HIDDEN];
        self.head_out
            .backward(&cache.a4, &da5, &mut grad.head_out, Some(&mut da4));
        if let Some(m) = &cache.mask4 {
            da4.iter_mut().zip(m).for_each(|(d, &k)| *d *= k);
        }
        relu_grad(&cache.z4, &mut da4);

        let mut dconcat = vec![T::zero(); TSS_OUT + DEMO_HIDDEN];
        self.head_hidden.backward(
            &cache.concat,
            &da4,
            &mut grad.head_hidden,
            Some(&mut dconcat),
        );
        let (dz2, dz3) = dconcat.split_at_mut(TSS_OUT);
        relu_grad(&cache.z2, dz2);
        relu_grad(&cache.z3, dz3);

        self.demo_hidden
            .backward(demo, dz3, &mut grad.demo_hidden, None);

        let mut da1 = vec![T::zero(); TSS_HIDDEN];
        self.tss_out
            .backward(&cache.a1, dz2, &mut grad.tss_out, Some(&mut da1));
        if let Some(m) = &cache.mask1 {
            da1.iter_mut().zip(m).for_each(|(d, &k)| *d *= k);
        }
        relu_grad(&cache.z1, &mut da1);
        self.tss_hidden
            .backward(tss, &da1, &mut grad.tss_hidden, None);
    }

    /// Mean binary cross-entropy over `ds` and its gradient, dropout off.
    pub fn loss_and_gradient(&self, ds: &PredictionDataset<T>) -> Result<(T, Self)> {
        if ds.is_empty() {
            return Err(ModelError::Empty("gradient"));
        }
        let mut grad = Self::zeros(self.tss_width());
        let scale = T::lit(1.0 / ds.len() as f64);
        let mut loss = T::zero();
        for i in 0..ds.len() {
            let (tss, demo) = (ds.tss_row(i), ds.demo_row(i));
            self.check_widths(tss, demo)?;
            let cache = self.forward_cached::<ChaCha8Rng>(tss, demo, None);
            let y = T::lit(f64::from(ds.labels()[i]));
            loss += bce_from_logit(cache.logit, y) * scale;
            self.backward(tss, demo, &cache, y, scale, &mut grad);
        }
        Ok((loss, grad))
    }

    pub fn cast<U: Scalar>(&self) -> NetworkWeights<U> {
        let conv = |l: &Dense<T>| Dense {
            inputs: l.inputs,
            outputs: l.outputs,
            weights: l.weights.iter().map(|x| U::lit(x.as_f64())).collect(),
            bias: l.bias.iter().map(|x| U::lit(x.as_f64())).collect(),
        };
        NetworkWeights {
            tss_hidden: conv(&self.tss_hidden),
            tss_out: conv(&self.tss_out),
            demo_hidden: conv(&self.demo_hidden),
            head_hidden: conv(&self.head_hidden),
            head_out: conv(&self.head_out),
            output: conv(&self.output),
        }
    }
}
