//! Tanh multilayer perceptrons with the boundary distance function applied to
//! every neuron of the final hidden layer.
//!
//! The field is `u(x) = Σ_i W_out[·, i] · φ(x) · h̃_i(x)`: the inner
//! parameters (hidden layers) build the basis `h_i = φ h̃_i` and the outer
//! parameters (the bias-free output layer) are its coefficients. The flat
//! parameter vector stores layers in order (weights row-major, then bias), so
//! the outer block is the trailing slice.
//!
//! Evaluation is batched over points and carries spatial jets, so one sweep
//! yields values and spatial derivatives at every point. [`NetworkJets::backward`]
//! is the matching reverse sweep over the recorded layer activations.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet, Real, Scalar};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    /// `x + tanh x`, which does not saturate.
    XPlusTanh,
}

impl Activation {
    /// σ, σ', σ'', σ''' at `z`.
    #[inline]
    fn derivatives<T: Real>(self, z: T) -> [T; 4] {
        let t = z.tanh();
        let s = T::one() - t * t;
        let s2 = T::from_f64(-2.0) * t * s;
        let s3 = (T::from_f64(-2.0) * s + T::from_f64(4.0) * t * t) * s;
        match self {
            Activation::Tanh => [t, s, s2, s3],
            Activation::XPlusTanh => [z + t, s + 1.0, s2, s3],
        }
    }

    fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::XPlusTanh => z + z.tanh(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceFunction {
    /// `sin(πx)` on [0, 1].
    SinPiX,
    /// `1 − X₁² − X₂²` on the unit disk.
    UnitDisk,
}

impl DistanceFunction {
    pub fn input_dim(self) -> usize {
        match self {
            DistanceFunction::SinPiX => 1,
            DistanceFunction::UnitDisk => 2,
        }
    }

    pub fn eval<S: Scalar>(self, x: &[S]) -> S {
        match self {
            DistanceFunction::SinPiX => (x[0] * std::f64::consts::PI).sin(),
            DistanceFunction::UnitDisk => -(x[0] * x[0] + x[1] * x[1]) + 1.0,
        }
    }

    /// Jet components of φ at `point` in `layout`.
    fn jet(self, point: &[f64], layout: JetLayout, out: &mut [f64]) {
        let xs = Jet::<f64>::coordinates(&point[..layout.dim]);
        let phi = self.eval(&xs);
        layout.store(&phi, out);
    }
}

/// Which spatial derivatives a batched evaluation carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JetLayout {
    pub dim: usize,
    pub order: usize,
}

impl JetLayout {
    pub fn new(dim: usize, order: usize) -> Self {
        assert!((1..=2).contains(&dim) && order <= 2, "jet layout dim {dim} order {order}");
        Self { dim, order }
    }

    /// Components per scalar: value, gradient, upper-triangular Hessian.
    pub fn ncomp(&self) -> usize {
        let mut n = 1;
        if self.order >= 1 {
            n += self.dim;
        }
        if self.order >= 2 {
            n += self.dim * (self.dim + 1) / 2;
        }
        n
    }

    pub fn grad(&self, k: usize) -> usize {
        debug_assert!(self.order >= 1 && k < self.dim);
        1 + k
    }

    pub fn hess(&self, k: usize, l: usize) -> usize {
        debug_assert!(self.order >= 2);
        let (k, l) = if k <= l { (k, l) } else { (l, k) };
        1 + self.dim + k * self.dim - k * (k + 1) / 2 + l
    }

    /// (k, l, index) for every stored Hessian entry, k ≤ l.
    fn hess_entries(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let dim = self.dim;
        let active = self.order >= 2;
        (0..dim)
            .flat_map(move |k| (k..dim).map(move |l| (k, l)))
            .filter(move |_| active)
            .map(move |(k, l)| (k, l, self.hess(k, l)))
    }

    fn store<T: Real>(&self, jet: &Jet<T>, out: &mut [T]) {
        out[0] = jet.value;
        if self.order >= 1 {
            for k in 0..self.dim {
                out[self.grad(k)] = jet.d1[k];
            }
        }
        for (k, l, idx) in self.hess_entries() {
            out[idx] = jet.d2[k][l];
        }
    }

    /// Rebuilds a [`Jet`] from stored components (missing orders are zero).
    pub fn load<T: Real>(&self, comps: &[T]) -> Jet<T> {
        let mut jet = Jet::constant(self.dim, comps[0]);
        if self.order >= 1 {
            for k in 0..self.dim {
                jet.d1[k] = comps[self.grad(k)];
            }
        }
        for (k, l, idx) in self.hess_entries() {
            jet.d2[k][l] = comps[idx];
            jet.d2[l][k] = comps[idx];
        }
        jet
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    pub distance: DistanceFunction,
}

impl NetworkSpec {
    /// Two hidden tanh layers, 1 → 1, boundary factor sin(πx).
    pub fn elliptic_1d(width: usize) -> Self {
        Self {
            input_dim: 1,
            output_dim: 1,
            hidden_widths: vec![width, width],
            activation: Activation::Tanh,
            distance: DistanceFunction::SinPiX,
        }
    }

    /// Two hidden tanh layers, 2 → 2, boundary factor 1 − |X|².
    pub fn neohookean_2d(width: usize) -> Self {
        Self {
            input_dim: 2,
            output_dim: 2,
            hidden_widths: vec![width, width],
            activation: Activation::Tanh,
            distance: DistanceFunction::UnitDisk,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.input_dim) {
            return Err(Error::Config(format!("input_dim must be 1 or 2, got {}", self.input_dim)));
        }
        if !(1..=2).contains(&self.output_dim) {
            return Err(Error::Config(format!("output_dim must be 1 or 2, got {}", self.output_dim)));
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(Error::Config("hidden_widths must be a nonempty list of positive widths".into()));
        }
        if self.distance.input_dim() != self.input_dim {
            return Err(Error::Config(format!(
                "distance function {:?} is defined in {} dimensions but input_dim is {}",
                self.distance,
                self.distance.input_dim(),
                self.input_dim
            )));
        }
        Ok(())
    }

    pub fn basis_size(&self) -> usize {
        *self.hidden_widths.last().expect("validated spec has hidden layers")
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self)
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlice {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `fan_out × fan_in`.
    pub weights: Range<usize>,
    pub bias: Option<Range<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    /// Hidden layers followed by the output layer.
    pub layers: Vec<LayerSlice>,
    pub total: usize,
    /// Index where the outer (output-layer) block starts; inner is `0..split`.
    pub split: usize,
}

/// One layer's parameters, as produced by [`ParamLayout::unflatten`].
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weights: Matrix,
    pub bias: Option<Vec<f64>>,
}

impl ParamLayout {
    fn new(spec: &NetworkSpec) -> Self {
        let mut layers = Vec::new();
        let mut offset = 0;
        let mut fan_in = spec.input_dim;
        for &width in &spec.hidden_widths {
            let weights = offset..offset + fan_in * width;
            let bias = weights.end..weights.end + width;
            offset = bias.end;
            layers.push(LayerSlice { fan_in, fan_out: width, weights, bias: Some(bias) });
            fan_in = width;
        }
        let split = offset;
        let weights = offset..offset + fan_in * spec.output_dim;
        offset = weights.end;
        layers.push(LayerSlice { fan_in, fan_out: spec.output_dim, weights, bias: None });
        Self { layers, total: offset, split }
    }

    pub fn inner(&self) -> Range<usize> {
        0..self.split
    }

    pub fn outer(&self) -> Range<usize> {
        self.split..self.total
    }

    pub fn output_layer(&self) -> &LayerSlice {
        self.layers.last().expect("layout has an output layer")
    }

    pub fn unflatten(&self, params: &[f64]) -> Result<Vec<LayerParams>> {
        check_len(params.len(), self.total)?;
        Ok(self
            .layers
            .iter()
            .map(|l| LayerParams {
                weights: Matrix::from_rows(l.fan_out, l.fan_in, params[l.weights.clone()].to_vec()),
                bias: l.bias.clone().map(|b| params[b].to_vec()),
            })
            .collect())
    }

    pub fn flatten(&self, layers: &[LayerParams]) -> Result<Vec<f64>> {
        if layers.len() != self.layers.len() {
            return Err(Error::Dimension { what: "layer count", expected: self.layers.len(), got: layers.len() });
        }
        let mut out = vec![0.0; self.total];
        for (slice, layer) in self.layers.iter().zip(layers) {
            check_len(layer.weights.as_slice().len(), slice.weights.len())?;
            out[slice.weights.clone()].copy_from_slice(layer.weights.as_slice());
            match (&slice.bias, &layer.bias) {
                (Some(range), Some(b)) => {
                    check_len(b.len(), range.len())?;
                    out[range.clone()].copy_from_slice(b);
                }
                (None, None) => {}
                _ => return Err(Error::Contract("bias presence does not match layout".into())),
            }
        }
        Ok(out)
    }
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Dimension { what: "parameter vector length", expected, got });
    }
    Ok(())
}

/// Uniform `±scale/√fan_in` draws for every weight and bias, layer by layer.
pub fn init_params(spec: &NetworkSpec, seed: u64, scale: f64) -> Vec<f64> {
    let mut stream = rng::stream(seed, "init");
    init_params_from(spec, &mut stream, scale)
}

pub fn init_params_from(spec: &NetworkSpec, stream: &mut impl Rng, scale: f64) -> Vec<f64> {
    let layout = spec.layout();
    let mut params = vec![0.0; layout.total];
    for layer in &layout.layers {
        let bound = 1.0 / (layer.fan_in as f64).sqrt();
        let ranges = std::iter::once(layer.weights.clone()).chain(layer.bias.clone());
        for range in ranges {
            for p in &mut params[range] {
                *p = stream.random_range(-bound..bound) * scale;
            }
        }
    }
    params
}

/// Field values and spatial derivatives of every output component at one
/// point, computed with scalar jet arithmetic.
pub fn eval_with_spatial(spec: &NetworkSpec, params: &[f64], point: &[f64]) -> Result<Vec<Jet<f64>>> {
    spec.validate()?;
    check_len(params.len(), spec.param_count())?;
    if point.len() != spec.input_dim {
        return Err(Error::Dimension { what: "point coordinates", expected: spec.input_dim, got: point.len() });
    }
    let xs = Jet::<f64>::coordinates(point);
    Ok(eval_scalar(spec, params, &xs))
}

/// Field values at one point.
pub fn forward(spec: &NetworkSpec, params: &[f64], point: &[f64]) -> Result<Vec<f64>> {
    Ok(eval_with_spatial(spec, params, point)?.into_iter().map(|j| j.value).collect())
}

/// Generic single-point evaluation over any [`Scalar`].
pub fn eval_scalar<S: Scalar>(spec: &NetworkSpec, params: &[f64], x: &[S]) -> Vec<S> {
    let layout = spec.layout();
    let hidden = layout.layers.len() - 1;
    let zero = x[0].constant_like(0.0);
    let mut act: Vec<S> = x.to_vec();
    for layer in &layout.layers[..hidden] {
        let w = &params[layer.weights.clone()];
        let b = &params[layer.bias.clone().expect("hidden layers carry a bias")];
        act = (0..layer.fan_out)
            .map(|i| {
                let z = (0..layer.fan_in).fold(zero + b[i], |acc, j| acc + act[j] * w[i * layer.fan_in + j]);
                spec.activation.apply(z)
            })
            .collect();
    }
    let phi = spec.distance.eval(x);
    let out = layout.output_layer();
    let w = &params[out.weights.clone()];
    (0..out.fan_out)
        .map(|o| (0..out.fan_in).fold(zero, |acc, i| acc + phi * act[i] * w[o * out.fan_in + i]))
        .collect()
}

/// Jets recorded by a batched forward sweep; storage is `[neuron][point][component]`.
#[derive(Clone, Debug)]
pub struct NetworkJets<T> {
    pub layout: JetLayout,
    pub npoints: usize,
    pre: Vec<Vec<T>>,
    post: Vec<Vec<T>>,
    basis: Vec<T>,
    dist: Vec<f64>,
    /// `[output][point][component]`.
    pub out: Vec<T>,
}

impl<T: Real> NetworkJets<T> {
    pub fn output(&self, o: usize, p: usize) -> &[T] {
        let m = self.layout.ncomp();
        let base = (o * self.npoints + p) * m;
        &self.out[base..base + m]
    }

    /// Basis value `h_i` at point `p`.
    pub fn basis_value(&self, i: usize, p: usize) -> T {
        self.basis[(i * self.npoints + p) * self.layout.ncomp()]
    }

    /// Value and spatial derivatives of `h_i` at point `p`.
    pub fn basis_jet(&self, i: usize, p: usize) -> &[T] {
        let m = self.layout.ncomp();
        &self.basis[(i * self.npoints + p) * m..(i * self.npoints + p + 1) * m]
    }

    /// Forward sweep at `points` carrying derivatives up to `order`.
    pub fn forward(spec: &NetworkSpec, params: &[T], points: &[[f64; 2]], order: usize) -> Self {
        let layout = JetLayout::new(spec.input_dim, order);
        let m = layout.ncomp();
        let np = points.len();
        let stride = np * m;
        let plan = spec.layout();
        let hidden = plan.layers.len() - 1;

        let mut pre: Vec<Vec<T>> = Vec::with_capacity(hidden);
        let mut post: Vec<Vec<T>> = Vec::with_capacity(hidden);

        // First layer: affine in the input coordinates.
        let first = &plan.layers[0];
        let w = &params[first.weights.clone()];
        let b = &params[first.bias.clone().expect("hidden bias")];
        let mut z = vec![T::zero(); first.fan_out * stride];
        for i in 0..first.fan_out {
            for (p, x) in points.iter().enumerate() {
                let cell = &mut z[i * stride + p * m..i * stride + (p + 1) * m];
                let mut v = b[i];
                for k in 0..first.fan_in {
                    v += w[i * first.fan_in + k] * x[k];
                    if order >= 1 {
                        cell[layout.grad(k)] = w[i * first.fan_in + k];
                    }
                }
                cell[0] = v;
            }
        }
        let a = activate(spec.activation, &z, layout);
        pre.push(z);
        post.push(a);

        for layer in &plan.layers[1..hidden] {
            let w = &params[layer.weights.clone()];
            let b = &params[layer.bias.clone().expect("hidden bias")];
            let prev = post.last().expect("previous layer");
            let mut z = vec![T::zero(); layer.fan_out * stride];
            for i in 0..layer.fan_out {
                let zrow = &mut z[i * stride..(i + 1) * stride];
                for j in 0..layer.fan_in {
                    axpy(w[i * layer.fan_in + j], &prev[j * stride..(j + 1) * stride], zrow);
                }
                for p in 0..np {
                    zrow[p * m] += b[i];
                }
            }
            let a = activate(spec.activation, &z, layout);
            pre.push(z);
            post.push(a);
        }

        // Distance factor on every final hidden neuron.
        let mut dist = vec![0.0; stride];
        for (p, x) in points.iter().enumerate() {
            spec.distance.jet(&x[..spec.input_dim], layout, &mut dist[p * m..(p + 1) * m]);
        }
        let last = post.last().expect("hidden layer");
        let width = plan.output_layer().fan_in;
        let mut basis = vec![T::zero(); width * stride];
        for i in 0..width {
            for p in 0..np {
                let off = i * stride + p * m;
                jet_scale(layout, &dist[p * m..(p + 1) * m], &last[off..off + m], &mut basis[off..off + m]);
            }
        }

        let out_layer = plan.output_layer();
        let w = &params[out_layer.weights.clone()];
        let mut out = vec![T::zero(); out_layer.fan_out * stride];
        for o in 0..out_layer.fan_out {
            let orow = &mut out[o * stride..(o + 1) * stride];
            for i in 0..width {
                axpy(w[o * width + i], &basis[i * stride..(i + 1) * stride], orow);
            }
        }

        Self { layout, npoints: np, pre, post, basis, dist, out }
    }

    /// Reverse sweep: parameter adjoints given adjoints of the output jets
    /// (same storage as [`NetworkJets::out`]).
    pub fn backward(&self, spec: &NetworkSpec, params: &[T], points: &[[f64; 2]], out_bar: &[T]) -> Vec<T> {
        let layout = self.layout;
        let m = layout.ncomp();
        let np = self.npoints;
        let stride = np * m;
        let plan = spec.layout();
        let hidden = plan.layers.len() - 1;
        let mut grad = vec![T::zero(); plan.total];

        let out_layer = plan.output_layer();
        let width = out_layer.fan_in;
        let w = &params[out_layer.weights.clone()];
        let mut basis_bar = vec![T::zero(); width * stride];
        for o in 0..out_layer.fan_out {
            let obar = &out_bar[o * stride..(o + 1) * stride];
            for i in 0..width {
                grad[out_layer.weights.start + o * width + i] = dot(obar, &self.basis[i * stride..(i + 1) * stride]);
                axpy(w[o * width + i], obar, &mut basis_bar[i * stride..(i + 1) * stride]);
            }
        }

        let mut a_bar = vec![T::zero(); width * stride];
        for i in 0..width {
            for p in 0..np {
                let off = i * stride + p * m;
                jet_scale_adjoint(layout, &self.dist[p * m..(p + 1) * m], &basis_bar[off..off + m], &mut a_bar[off..off + m]);
            }
        }

        for l in (0..hidden).rev() {
            let layer = &plan.layers[l];
            let z_bar = activate_adjoint(spec.activation, &self.pre[l], &a_bar, layout);
            let bias = layer.bias.clone().expect("hidden bias");
            for i in 0..layer.fan_out {
                let zrow = &z_bar[i * stride..(i + 1) * stride];
                let mut bsum = T::zero();
                for p in 0..np {
                    bsum += zrow[p * m];
                }
                grad[bias.start + i] = bsum;
            }
            if l == 0 {
                for i in 0..layer.fan_out {
                    let zrow = &z_bar[i * stride..(i + 1) * stride];
                    for k in 0..layer.fan_in {
                        let mut acc = T::zero();
                        for (p, x) in points.iter().enumerate() {
                            acc += zrow[p * m] * x[k];
                            if layout.order >= 1 {
                                acc += zrow[p * m + layout.grad(k)];
                            }
                        }
                        grad[layer.weights.start + i * layer.fan_in + k] = acc;
                    }
                }
            } else {
                let prev = &self.post[l - 1];
                let w = &params[layer.weights.clone()];
                let mut prev_bar = vec![T::zero(); layer.fan_in * stride];
                for i in 0..layer.fan_out {
                    let zrow = &z_bar[i * stride..(i + 1) * stride];
                    for j in 0..layer.fan_in {
                        let prow = &prev[j * stride..(j + 1) * stride];
                        grad[layer.weights.start + i * layer.fan_in + j] = dot(zrow, prow);
                        axpy(w[i * layer.fan_in + j], zrow, &mut prev_bar[j * stride..(j + 1) * stride]);
                    }
                }
                a_bar = prev_bar;
            }
        }
        grad
    }
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        total += a[i] * b[i];
    }
    total
}

fn activate<T: Real>(act: Activation, z: &[T], layout: JetLayout) -> Vec<T> {
    let m = layout.ncomp();
    let mut y = vec![T::zero(); z.len()];
    for (zc, yc) in z.chunks_exact(m).zip(y.chunks_exact_mut(m)) {
        let [s0, s1, s2, _] = act.derivatives(zc[0]);
        yc[0] = s0;
        if layout.order >= 1 {
            for k in 0..layout.dim {
                yc[1 + k] = s1 * zc[1 + k];
            }
        }
        for (k, l, idx) in layout.hess_entries() {
            yc[idx] = s1 * zc[idx] + s2 * zc[1 + k] * zc[1 + l];
        }
    }
    y
}

fn activate_adjoint<T: Real>(act: Activation, z: &[T], y_bar: &[T], layout: JetLayout) -> Vec<T> {
    let m = layout.ncomp();
    let mut z_bar = vec![T::zero(); z.len()];
    for ((zc, yb), zb) in z.chunks_exact(m).zip(y_bar.chunks_exact(m)).zip(z_bar.chunks_exact_mut(m)) {
        let [_, s1, s2, s3] = act.derivatives(zc[0]);
        let mut v = s1 * yb[0];
        if layout.order >= 1 {
            for k in 0..layout.dim {
                v += s2 * yb[1 + k] * zc[1 + k];
                zb[1 + k] = s1 * yb[1 + k];
            }
        }
        for (k, l, idx) in layout.hess_entries() {
            let ybi = yb[idx];
            v += ybi * (s2 * zc[idx] + s3 * zc[1 + k] * zc[1 + l]);
            zb[idx] = s1 * ybi;
            zb[1 + k] += s2 * ybi * zc[1 + l];
            zb[1 + l] += s2 * ybi * zc[1 + k];
        }
        zb[0] = v;
    }
    z_bar
}

/// `out = d · a` for a constant jet `d`.
#[inline]
fn jet_scale<T: Real>(layout: JetLayout, d: &[f64], a: &[T], out: &mut [T]) {
    out[0] = a[0] * d[0];
    if layout.order >= 1 {
        for k in 0..layout.dim {
            out[1 + k] = a[1 + k] * d[0] + a[0] * d[1 + k];
        }
    }
    for (k, l, idx) in layout.hess_entries() {
        out[idx] = a[idx] * d[0] + a[1 + l] * d[1 + k] + a[1 + k] * d[1 + l] + a[0] * d[idx];
    }
}

#[inline]
fn jet_scale_adjoint<T: Real>(layout: JetLayout, d: &[f64], s_bar: &[T], a_bar: &mut [T]) {
    let mut v = s_bar[0] * d[0];
    if layout.order >= 1 {
        for k in 0..layout.dim {
            v += s_bar[1 + k] * d[1 + k];
            a_bar[1 + k] = s_bar[1 + k] * d[0];
        }
    }
    for (k, l, idx) in layout.hess_entries() {
        let sb = s_bar[idx];
        v += sb * d[idx];
        a_bar[idx] = sb * d[0];
        a_bar[1 + l] += sb * d[1 + k];
        a_bar[1 + k] += sb * d[1 + l];
    }
    a_bar[0] = v;
}

/// Basis functions `h_i` sampled at `points`: rows are points, columns neurons.
#[derive(Clone, Debug)]
pub struct BasisSet {
    pub values: Matrix,
}

impl BasisSet {
    pub fn size(&self) -> usize {
        self.values.cols()
    }

    /// `H θ^O` for one output component.
    pub fn combine(&self, coefficients: &[f64]) -> Vec<f64> {
        self.values.matvec(coefficients)
    }
}

pub fn extract_basis(spec: &NetworkSpec, params: &[f64], points: &[[f64; 2]]) -> Result<BasisSet> {
    spec.validate()?;
    check_len(params.len(), spec.param_count())?;
    if points.is_empty() {
        return Err(Error::Contract("basis extraction needs at least one point".into()));
    }
    let jets = NetworkJets::<f64>::forward(spec, params, points, 0);
    let n = spec.basis_size();
    let values = Matrix::from_fn(points.len(), n, |p, i| jets.basis_value(i, p));
    Ok(BasisSet { values })
}

/// Spatial derivatives of the basis up to `order`: one matrix per jet
/// component after the value (∂₁, ∂₂, then second derivatives), each laid
/// out like [`BasisSet::values`].
pub fn extract_basis_derivatives(spec: &NetworkSpec, params: &[f64], points: &[[f64; 2]], order: usize) -> Result<Vec<Matrix>> {
    spec.validate()?;
    check_len(params.len(), spec.param_count())?;
    let jets = NetworkJets::<f64>::forward(spec, params, points, order);
    let n = spec.basis_size();
    Ok((1..jets.layout.ncomp()).map(|c| Matrix::from_fn(points.len(), n, |p, i| jets.basis_jet(i, p)[c])).collect())
}

/// Outer coefficients of output component `o` (one per basis function).
pub fn outer_coefficients(spec: &NetworkSpec, params: &[f64], o: usize) -> Vec<f64> {
    let layout = spec.layout();
    let out = layout.output_layer();
    params[out.weights.start + o * out.fan_in..out.weights.start + (o + 1) * out.fan_in].to_vec()
}

/// Field values at many points: `[output][point]`.
pub fn forward_batch(spec: &NetworkSpec, params: &[f64], points: &[[f64; 2]]) -> Vec<Vec<f64>> {
    let jets = NetworkJets::<f64>::forward(spec, params, points, 0);
    (0..spec.output_dim).map(|o| (0..points.len()).map(|p| jets.output(o, p)[0]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Dual;

    fn spec_2d_small() -> NetworkSpec {
        NetworkSpec { hidden_widths: vec![4, 3, 5], ..NetworkSpec::neohookean_2d(4) }
    }

    #[test]
    fn reference_parameter_counts() {
        assert_eq!(NetworkSpec::elliptic_1d(20).param_count(), 480);
        assert_eq!(NetworkSpec::neohookean_2d(25).param_count(), 775);
        assert_eq!(NetworkSpec::neohookean_2d(15).param_count(), 315);
        let layout = NetworkSpec::elliptic_1d(20).layout();
        assert_eq!(layout.outer(), 460..480);
    }

    #[test]
    fn flatten_roundtrip() {
        let spec = spec_2d_small();
        let params = init_params(&spec, 9, 1.0);
        let layout = spec.layout();
        let layers = layout.unflatten(&params).unwrap();
        assert_eq!(layout.flatten(&layers).unwrap(), params);
        assert!(layers.last().unwrap().bias.is_none());
    }

    #[test]
    fn init_scaling_and_determinism() {
        let spec = NetworkSpec::elliptic_1d(20);
        let a = init_params(&spec, 4, 1.0);
        let b = init_params(&spec, 4, 1.0);
        let c = init_params(&spec, 4, 5.0);
        assert_eq!(a, b);
        for (x, y) in a.iter().zip(&c) {
            assert_eq!(x * 5.0, *y);
        }
        assert!(init_params(&spec, 4, 0.0).iter().all(|&v| v == 0.0));
        // first-layer bound is 1, second 1/sqrt(20)
        assert!(a[..40].iter().all(|v| v.abs() <= 1.0));
        assert!(a[40..460].iter().all(|v| v.abs() <= 1.0 / 20f64.sqrt()));
    }

    #[test]
    fn boundary_values_vanish() {
        let spec = NetworkSpec::elliptic_1d(6);
        let params = init_params(&spec, 1, 3.0);
        for x in [0.0, 1.0] {
            assert!(forward(&spec, &params, &[x]).unwrap()[0].abs() < 1e-14);
        }
        let spec = NetworkSpec::neohookean_2d(5);
        let params = init_params(&spec, 1, 2.0);
        for k in 0..12 {
            let t = k as f64 * 0.5;
            let u = forward(&spec, &params, &[t.cos(), t.sin()]).unwrap();
            assert!(u.iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn zero_outer_layer_gives_zero_field() {
        let spec = NetworkSpec::elliptic_1d(5);
        let mut params = init_params(&spec, 2, 1.0);
        for p in &mut params[spec.layout().outer()] {
            *p = 0.0;
        }
        let j = &eval_with_spatial(&spec, &params, &[0.37]).unwrap()[0];
        assert_eq!((j.value, j.d1[0], j.d2[0][0]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn batched_jets_match_scalar_jets() {
        for (spec, pts) in [
            (NetworkSpec::elliptic_1d(5), vec![[0.1, 0.0], [0.55, 0.0], [0.93, 0.0]]),
            (spec_2d_small(), vec![[0.1, -0.3], [0.5, 0.4], [-0.7, 0.2]]),
        ] {
            let params = init_params(&spec, 3, 2.0);
            let jets = NetworkJets::<f64>::forward(&spec, &params, &pts, 2);
            for (p, x) in pts.iter().enumerate() {
                let scalar = eval_with_spatial(&spec, &params, &x[..spec.input_dim]).unwrap();
                for o in 0..spec.output_dim {
                    let batched = jets.layout.load(jets.output(o, p));
                    let s = &scalar[o];
                    assert!((batched.value - s.value).abs() < 1e-13);
                    for k in 0..spec.input_dim {
                        assert!((batched.d1[k] - s.d1[k]).abs() < 1e-12);
                        for l in 0..spec.input_dim {
                            assert!((batched.d2[k][l] - s.d2[k][l]).abs() < 1e-11);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn x_plus_tanh_activation_jets() {
        let spec = NetworkSpec { activation: Activation::XPlusTanh, ..NetworkSpec::elliptic_1d(4) };
        let params = init_params(&spec, 5, 1.0);
        let pts = [[0.3, 0.0]];
        let jets = NetworkJets::<f64>::forward(&spec, &params, &pts, 2);
        let s = &eval_with_spatial(&spec, &params, &[0.3]).unwrap()[0];
        assert!((jets.output(0, 0)[2] - s.d2[0][0]).abs() < 1e-12);
    }

    /// Backward sweep against forward-mode directional derivatives of every
    /// output component, for random output adjoints.
    #[test]
    fn backward_matches_forward_directional_derivative() {
        for order in 0..=2 {
            let spec = spec_2d_small();
            let params = init_params(&spec, 8, 1.5);
            let pts = vec![[0.2, 0.1], [-0.4, 0.6], [0.0, -0.9], [0.7, 0.3]];
            let jets = NetworkJets::<f64>::forward(&spec, &params, &pts, order);
            let mut rng = rng::stream(1, "test");
            let out_bar: Vec<f64> = (0..jets.out.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let grad = jets.backward(&spec, &params, &pts, &out_bar);
            let dir: Vec<f64> = (0..params.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lifted: Vec<Dual<1>> = params.iter().zip(&dir).map(|(&p, &d)| Dual::new(p, [d])).collect();
            let djets = NetworkJets::<Dual<1>>::forward(&spec, &lifted, &pts, order);
            let forward_dd: f64 = djets.out.iter().zip(&out_bar).map(|(o, b)| o.du[0] * b).sum();
            let reverse_dd: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            assert!((forward_dd - reverse_dd).abs() < 1e-11 * forward_dd.abs().max(1.0), "order {order}");
        }
    }

    #[test]
    fn basis_reproduces_field_and_respects_split() {
        let spec = NetworkSpec::elliptic_1d(20);
        let params = init_params(&spec, 2, 1.0);
        let pts: Vec<[f64; 2]> = (0..100).map(|i| [(i as f64 + 0.5) / 100.0, 0.0]).collect();
        let basis = extract_basis(&spec, &params, &pts).unwrap();
        assert_eq!((basis.values.rows(), basis.size()), (100, 20));
        let u = forward_batch(&spec, &params, &pts);
        let hu = basis.combine(&outer_coefficients(&spec, &params, 0));
        let err = u[0].iter().zip(&hu).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12);

        let layout = spec.layout();
        let mut outer_moved = params.clone();
        outer_moved[layout.split] += 0.3;
        assert_eq!(extract_basis(&spec, &outer_moved, &pts).unwrap().values, basis.values);
        let mut inner_moved = params.clone();
        inner_moved[3] += 0.3;
        assert_ne!(extract_basis(&spec, &inner_moved, &pts).unwrap().values, basis.values);
    }

    #[test]
    fn rejects_bad_specs_and_points() {
        let mut spec = NetworkSpec::elliptic_1d(3);
        spec.distance = DistanceFunction::UnitDisk;
        assert!(spec.validate().is_err());
        let spec = NetworkSpec::elliptic_1d(3);
        let params = init_params(&spec, 0, 1.0);
        assert!(matches!(eval_with_spatial(&spec, &params, &[0.1, 0.2]), Err(Error::Dimension { .. })));
        assert!(matches!(eval_with_spatial(&spec, &params[1..], &[0.1]), Err(Error::Dimension { .. })));
    }
}
