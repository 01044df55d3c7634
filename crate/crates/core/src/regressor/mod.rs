//! Point cloud to SH coefficient regression.
//!
//! A shared per-point MLP lifts every point to a global feature width, a
//! coordinate-wise max over points pools them, and a fully connected head
//! maps the pooled feature to the coefficient vector. Gradients are written
//! out by hand; the max-pool routes each feature's gradient to the point
//! that attained the maximum (lowest index on ties).

mod codec;
mod eval;
mod train;

pub use codec::{decode, encode, MODEL_MAGIC, MODEL_VERSION};
pub use eval::{evaluate_pairs, evaluate_testset, histogram, percentile, NreReport, HISTOGRAM_BINS};
pub use train::{lr_at_epoch, target_moments, train, train_from, Adam, EpochLog, Sample, TrainConfig, TrainOutcome};

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gemm::{gemm, Op};
use crate::geom::Vec3;
use crate::pointcloud::{align_incoming, PointCloud, REGRESSOR_POINTS};
use crate::rng;
use crate::shfield::SHCoefficients;
use crate::sphgeom::Direction;
use crate::{asf_band_index, ASF_BANDS};

/// Widths of the shared per-point layers.
pub const ENCODER_WIDTHS: [usize; 4] = [64, 64, 128, 256];
/// Widths of the fully connected head; the last is the coefficient count.
pub const HEAD_WIDTHS: [usize; 3] = [256, 128, 16];

/// Layer sizes of a network. The input is always 3 coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkConfig {
    pub n_points: usize,
    pub encoder: Vec<usize>,
    pub head: Vec<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            n_points: REGRESSOR_POINTS,
            encoder: ENCODER_WIDTHS.to_vec(),
            head: HEAD_WIDTHS.to_vec(),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 || self.encoder.is_empty() || self.head.is_empty() {
            return Err(Error::invalid("network needs points, an encoder and a head"));
        }
        if self.encoder.iter().chain(&self.head).any(|&w| w == 0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every layer, encoder first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.encoder.len() + self.head.len());
        let mut prev = 3;
        for &w in self.encoder.iter().chain(&self.head) {
            shapes.push((prev, w));
            prev = w;
        }
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|&(i, o)| i * o + o).sum()
    }

    pub fn output_len(&self) -> usize {
        *self.head.last().expect("validated head")
    }

    fn global_width(&self) -> usize {
        *self.encoder.last().expect("validated encoder")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    fan_in: usize,
    fan_out: usize,
    w: usize,
    b: usize,
}

fn layout(cfg: &NetworkConfig) -> Vec<Slot> {
    let mut off = 0;
    cfg.layer_shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let s = Slot {
                fan_in,
                fan_out,
                w: off,
                b: off + fan_in * fan_out,
            };
            off += fan_in * fan_out + fan_out;
            s
        })
        .collect()
}

/// Weights and biases of all layers in one flat vector. Each layer stores
/// its `fan_in × fan_out` weight matrix row-major, followed by its biases.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    config: NetworkConfig,
    slots: Vec<Slot>,
    values: Vec<f64>,
}

/// Intermediate values of one forward pass.
struct Cache {
    /// Post-activation output of each encoder layer, `n × width`.
    encoder: Vec<Vec<f64>>,
    argmax: Vec<usize>,
    /// Inputs to each head layer; the first is the pooled feature.
    head_in: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl NetworkParams {
    /// Zero weights and biases.
    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let n = config.param_count();
        Ok(NetworkParams {
            slots: layout(&config),
            config,
            values: vec![0.0; n],
        })
    }

    /// Fan-in scaled uniform weights `U(−√(6/fan_in), √(6/fan_in))`, zero biases.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = rng::seeded(seed);
        for s in p.slots.clone() {
            let bound = (6.0 / s.fan_in as f64).sqrt();
            for v in &mut p.values[s.w..s.b] {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(p)
    }

    pub fn from_values(config: NetworkConfig, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if values.len() != config.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                config.param_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite network parameter"));
        }
        Ok(NetworkParams {
            slots: layout(&config),
            config,
            values,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Weights (`fan_in × fan_out`, row-major) and biases of layer `i`.
    pub fn layer(&self, i: usize) -> (&[f64], &[f64]) {
        let s = self.slots[i];
        (
            &self.values[s.w..s.b],
            &self.values[s.b..s.b + s.fan_out],
        )
    }

    /// Rescales the last layer so the network outputs `scale ⊙ y + shift`
    /// where it used to output `y`.
    pub fn affine_output(&mut self, scale: &[f64], shift: &[f64]) -> Result<()> {
        let s = *self.slots.last().expect("validated network");
        if scale.len() != s.fan_out || shift.len() != s.fan_out {
            return Err(Error::invalid(format!(
                "output affine needs {} entries, got {} and {}",
                s.fan_out,
                scale.len(),
                shift.len()
            )));
        }
        for row in self.values[s.w..s.b].chunks_mut(s.fan_out) {
            for (w, k) in row.iter_mut().zip(scale) {
                *w *= k;
            }
        }
        for ((b, k), c) in self.values[s.b..s.b + s.fan_out].iter_mut().zip(scale).zip(shift) {
            *b = *b * k + c;
        }
        Ok(())
    }

    pub fn layer_count(&self) -> usize {
        self.slots.len()
    }

    fn check_points(&self, points: &[Vec3]) -> Result<()> {
        if points.len() != self.config.n_points {
            return Err(Error::invalid(format!(
                "network expects {} points, got {}",
                self.config.n_points,
                points.len()
            )));
        }
        Ok(())
    }

    /// Raw output vector for one cloud.
    pub fn forward(&self, points: &[Vec3]) -> Result<Vec<f64>> {
        self.check_points(points)?;
        Ok(self.run(&flatten(points)).output)
    }

    /// Output interpreted as SH coefficients at `frequency`.
    pub fn predict(&self, pc: &PointCloud, frequency: f64) -> Result<SHCoefficients> {
        let out = self.forward(&pc.points)?;
        let order = (out.len() as f64).sqrt() as u32 - 1;
        SHCoefficients::new(order, out, frequency)
    }

    fn run(&self, x: &[f64]) -> Cache {
        let n = x.len() / 3;
        let n_enc = self.config.encoder.len();
        let mut encoder: Vec<Vec<f64>> = Vec::with_capacity(n_enc);
        for li in 0..n_enc {
            let s = self.slots[li];
            let input: &[f64] = if li == 0 { x } else { &encoder[li - 1] };
            let mut z = vec![0.0; n * s.fan_out];
            let (w, b) = self.layer(li);
            gemm(Op::new(input, n, s.fan_in), Op::new(w, s.fan_in, s.fan_out), 0.0, &mut z);
            for row in z.chunks_exact_mut(s.fan_out) {
                for (v, &bj) in row.iter_mut().zip(b) {
                    *v = relu(*v + bj);
                }
            }
            encoder.push(z);
        }

        let width = self.config.global_width();
        let last = &encoder[n_enc - 1];
        let mut pooled = last[..width].to_vec();
        let mut argmax = vec![0usize; width];
        for (r, row) in last.chunks_exact(width).enumerate().skip(1) {
            for j in 0..width {
                if row[j] > pooled[j] {
                    pooled[j] = row[j];
                    argmax[j] = r;
                }
            }
        }

        let n_head = self.config.head.len();
        let mut head_in = Vec::with_capacity(n_head);
        let mut h = pooled;
        for hi in 0..n_head {
            let li = n_enc + hi;
            let s = self.slots[li];
            let (w, b) = self.layer(li);
            let mut z = b.to_vec();
            for (i, &hv) in h.iter().enumerate() {
                if hv != 0.0 {
                    let wr = &w[i * s.fan_out..(i + 1) * s.fan_out];
                    for (zj, &wj) in z.iter_mut().zip(wr) {
                        *zj += hv * wj;
                    }
                }
            }
            if hi + 1 < n_head {
                z.iter_mut().for_each(|v| *v = relu(*v));
            }
            head_in.push(h);
            h = z;
        }
        Cache {
            encoder,
            argmax,
            head_in,
            output: h,
        }
    }

    /// Accumulates `∂L/∂θ` into `grad` given `dy = ∂L/∂output`.
    fn backward(&self, x: &[f64], cache: &Cache, dy: &[f64], grad: &mut [f64]) {
        let n_enc = self.config.encoder.len();
        let n_head = self.config.head.len();

        // head, last layer first
        let mut dz = dy.to_vec();
        for hi in (0..n_head).rev() {
            let li = n_enc + hi;
            let s = self.slots[li];
            let h = &cache.head_in[hi];
            for (i, &hv) in h.iter().enumerate() {
                if hv != 0.0 {
                    let gw = &mut grad[s.w + i * s.fan_out..s.w + (i + 1) * s.fan_out];
                    for (g, &d) in gw.iter_mut().zip(&dz) {
                        *g += hv * d;
                    }
                }
            }
            for (g, &d) in grad[s.b..s.b + s.fan_out].iter_mut().zip(&dz) {
                *g += d;
            }
            let (w, _) = self.layer(li);
            let mut dh: Vec<f64> = w
                .chunks_exact(s.fan_out)
                .map(|wr| wr.iter().zip(&dz).map(|(a, b)| a * b).sum())
                .collect();
            if hi > 0 {
                // h was the ReLU output of the previous head layer
                for (d, &hv) in dh.iter_mut().zip(h) {
                    if hv <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            dz = dh;
        }
        let dpool = dz;

        // encoder, restricted to the rows that won a max
        let mut rows: Vec<usize> = cache.argmax.clone();
        rows.sort_unstable();
        rows.dedup();
        let r = rows.len();
        let width = self.config.global_width();
        let mut da = vec![0.0; r * width];
        for (j, &am) in cache.argmax.iter().enumerate() {
            let ri = rows.binary_search(&am).expect("argmax row present");
            da[ri * width + j] += dpool[j];
        }
        for li in (0..n_enc).rev() {
            let s = self.slots[li];
            let act = &cache.encoder[li];
            let mut dzr = da;
            for (ri, &row) in rows.iter().enumerate() {
                let a = &act[row * s.fan_out..(row + 1) * s.fan_out];
                for (d, &av) in dzr[ri * s.fan_out..(ri + 1) * s.fan_out].iter_mut().zip(a) {
                    if av <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input: &[f64] = if li == 0 { x } else { &cache.encoder[li - 1] };
            let mut in_r = Vec::with_capacity(r * s.fan_in);
            for &row in &rows {
                in_r.extend_from_slice(&input[row * s.fan_in..(row + 1) * s.fan_in]);
            }
            gemm(
                Op::new(&in_r, r, s.fan_in).t(),
                Op::new(&dzr, r, s.fan_out),
                1.0,
                &mut grad[s.w..s.b],
            );
            let gb = &mut grad[s.b..s.b + s.fan_out];
            for row in dzr.chunks_exact(s.fan_out) {
                for (g, &d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if li == 0 {
                break;
            }
            let (w, _) = self.layer(li);
            let mut prev = vec![0.0; r * s.fan_in];
            gemm(
                Op::new(&dzr, r, s.fan_out),
                Op::new(w, s.fan_in, s.fan_out).t(),
                0.0,
                &mut prev,
            );
            da = prev;
        }
    }

    /// Loss and gradient for one sample, with the loss scaled by `scale`.
    fn sample_gradient(&self, points: &[Vec3], target: &[f64], scale: f64) -> (f64, Vec<f64>) {
        let x = flatten(points);
        let cache = self.run(&x);
        let m = target.len() as f64;
        let dy: Vec<f64> = cache
            .output
            .iter()
            .zip(target)
            .map(|(y, t)| 2.0 * (y - t) / m * scale)
            .collect();
        let loss = mse(&cache.output, target);
        let mut grad = vec![0.0; self.values.len()];
        self.backward(&x, &cache, &dy, &mut grad);
        (loss, grad)
    }

    /// Mean batch loss and its exact gradient. Per-sample gradients are
    /// combined by a fixed pairwise tree so the result does not depend on
    /// `threads`.
    pub fn gradient(&self, batch: &[Sample<'_>], threads: usize) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::invalid("gradient of an empty batch"));
        }
        let out = self.config.output_len();
        for s in batch {
            self.check_points(s.points)?;
            if s.target.len() != out {
                return Err(Error::invalid(format!(
                    "target has {} values, network outputs {out}",
                    s.target.len()
                )));
            }
        }
        let scale = 1.0 / batch.len() as f64;
        let (loss, grad) = tree_gradient(self, batch, scale, threads.max(1));
        Ok((loss * scale, grad))
    }

    /// Mean loss over samples without gradients.
    pub fn mean_loss(&self, samples: &[Sample<'_>]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::invalid("loss of an empty set"));
        }
        let mut total = 0.0;
        for s in samples {
            total += loss(&self.forward(s.points)?, s.target)?;
        }
        Ok(total / samples.len() as f64)
    }
}

fn tree_gradient(p: &NetworkParams, batch: &[Sample<'_>], scale: f64, threads: usize) -> (f64, Vec<f64>) {
    #[cfg(feature = "std")]
    if threads > 1 && batch.len() > 1 {
        let mid = batch.len() / 2;
        let (l, r) = batch.split_at(mid);
        let half = threads / 2;
        let ((la, ga), (lb, gb)) = std::thread::scope(|sc| {
            let h = sc.spawn(|| tree_gradient(p, r, scale, threads - half));
            let left = tree_gradient(p, l, scale, half);
            (left, h.join().expect("gradient worker panicked"))
        });
        return (la + lb, add(ga, &gb));
    }
    let _ = threads;
    if batch.len() == 1 {
        return p.sample_gradient(batch[0].points, batch[0].target, scale);
    }
    let mid = batch.len() / 2;
    let (la, ga) = tree_gradient(p, &batch[..mid], scale, 1);
    let (lb, gb) = tree_gradient(p, &batch[mid..], scale, 1);
    (la + lb, add(ga, &gb))
}

fn add(mut a: Vec<f64>, b: &[f64]) -> Vec<f64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn flatten(points: &[Vec3]) -> Vec<f64> {
    points.iter().flat_map(|p| p.to_array()).collect()
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Mean squared difference between two coefficient vectors.
pub fn loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::invalid(format!(
            "loss needs equal non-empty lengths ({} vs {})",
            pred.len(),
            target.len()
        )));
    }
    Ok(mse(pred, target))
}

/// One trained network per ASF band.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    models: [Option<NetworkParams>; ASF_BANDS.len()],
}

impl ModelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, frequency: f64, params: NetworkParams) -> Result<()> {
        let i = band(frequency)?;
        self.models[i] = Some(params);
        Ok(())
    }

    pub fn get(&self, frequency: f64) -> Option<&NetworkParams> {
        asf_band_index(frequency).and_then(|i| self.models[i].as_ref())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        ASF_BANDS
            .iter()
            .zip(&self.models)
            .filter(|(_, m)| m.is_some())
            .map(|(&f, _)| f)
            .collect()
    }
}

fn band(frequency: f64) -> Result<usize> {
    asf_band_index(frequency).ok_or_else(|| {
        Error::invalid(format!(
            "no scattering model for {frequency} Hz (supported: 125, 250, 500, 1000)"
        ))
    })
}

/// Aligns a world-frame cloud with the incoming direction and runs the
/// band's network on it.
pub fn predict_asf(
    models: &ModelSet,
    pc: &PointCloud,
    incoming: Direction,
    frequency: f64,
) -> Result<SHCoefficients> {
    band(frequency)?;
    let net = models
        .get(frequency)
        .ok_or_else(|| Error::invalid(format!("model for {frequency} Hz not loaded")))?;
    net.predict(&align_incoming(pc, incoming), frequency)
}
