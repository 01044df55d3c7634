//! Monte Carlo path tracing with next-event estimation.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_PI, PI, TAU};

use rand::Rng;

use super::asf::{AsfCache, AsfFields, AsfProvider};
use super::bvh::Hit;
use super::histogram::EnergyHistogram;
use super::scene::{FrameScene, Material, Scene, SimConfig};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::pointcloud::REGION_OFFSET;
use crate::rng;
use crate::sphgeom::uniform_unit_vector;
use crate::{ASF_BANDS, BANDS, NUM_BANDS};

/// Rays per generator stream. Fixes the partition, so results do not
/// depend on the number of workers.
pub const CHUNK_RAYS: usize = 2048;
/// Lowest survival probability of Russian roulette.
pub const MIN_SURVIVAL: f64 = 0.05;

const LOW: usize = ASF_BANDS.len();

pub type Bands = [f64; NUM_BANDS];

/// `p²` towards a visible receiver, `1 − p²` towards an occluded one, with
/// `p` clamped to [0, 1]. The two branches sum to one.
pub fn scatter_gain(p: f64, visible: bool) -> f64 {
    let p2 = p.clamp(0.0, 1.0).powi(2);
    if visible {
        p2
    } else {
        1.0 - p2
    }
}

/// Monte Carlo estimate `(1/N) Σ f_j / Pr_j`.
pub fn mc_estimate(samples: &[f64], probabilities: &[f64]) -> Result<f64> {
    if samples.len() != probabilities.len() || samples.is_empty() {
        return Err(Error::invalid("need equally many samples and probabilities, at least one"));
    }
    if probabilities.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::invalid("probabilities must be positive"));
    }
    let s: f64 = samples.iter().zip(probabilities).map(|(f, p)| f / p).sum();
    Ok(s / samples.len() as f64)
}

/// Surface interaction seen from the arriving ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub point: Vec3,
    /// Geometric normal of the hit triangle, either orientation.
    pub normal: Vec3,
    /// Propagation direction of the arriving ray.
    pub incoming: Vec3,
}

impl SurfaceHit {
    /// Normal on the side the ray arrived from.
    pub fn facing_normal(&self) -> Vec3 {
        if self.normal.dot(self.incoming) > 0.0 {
            -self.normal
        } else {
            self.normal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    pub direction: Vec3,
    pub energy: Bands,
    pub diffuse: bool,
}

/// Cosine-weighted direction about unit normal `n`.
pub fn cosine_direction<R: Rng + ?Sized>(n: Vec3, rng: &mut R) -> Vec3 {
    let u = n.any_orthonormal();
    let v = n.cross(u);
    let r1: f64 = rng.random();
    let r2: f64 = rng.random();
    let phi = TAU * r1;
    let s = r2.sqrt();
    (u * (s * phi.cos()) + v * (s * phi.sin()) + n * (1.0 - r2).sqrt()).normalized()
}

/// Wall reflection: diffuse with probability `s`, otherwise mirror; every
/// band scaled by `1 − α`.
pub fn reflect<R: Rng + ?Sized>(hit: &SurfaceHit, energy: &Bands, material: &Material, rng: &mut R) -> Reflection {
    let n = hit.facing_normal();
    let mut out = *energy;
    for (e, a) in out.iter_mut().zip(&material.alpha) {
        *e *= 1.0 - a;
    }
    let u: f64 = rng.random();
    if u < material.scatter {
        Reflection {
            direction: cosine_direction(n, rng),
            energy: out,
            diffuse: true,
        }
    } else {
        let d = hit.incoming;
        Reflection {
            direction: (d - n * (2.0 * d.dot(n))).normalized(),
            energy: out,
            diffuse: false,
        }
    }
}

/// One sampled scattering direction and the weighted band intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterOutcome {
    /// World direction, uniform over the sphere.
    pub direction: Vec3,
    pub pdf: f64,
    /// `I · gain` per band; zero for bands handled geometrically.
    pub values: Bands,
    /// Bands without a field, to be reflected geometrically instead.
    pub geometric: [bool; NUM_BANDS],
}

/// Samples a direction uniformly and weights the low bands by the
/// visibility-switched gain of their field. Dividing `values` by `pdf` and
/// averaging gives the scattered intensity integral.
pub fn scatter_event<R: Rng + ?Sized>(
    incoming: &Bands,
    fields: &AsfFields,
    visible: bool,
    rng: &mut R,
) -> ScatterOutcome {
    let direction = uniform_unit_vector(rng);
    let mut values = [0.0; NUM_BANDS];
    let mut geometric = [true; NUM_BANDS];
    for b in 0..LOW {
        if let Some(p) = fields.gain(b, direction) {
            values[b] = incoming[b] * scatter_gain(p, visible);
            geometric[b] = false;
        }
    }
    ScatterOutcome {
        direction,
        pdf: 1.0 / (4.0 * PI),
        values,
        geometric,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceStats {
    pub rays: usize,
    pub scatter_events: usize,
    /// Low-band scatterer hits reflected geometrically for lack of a field.
    pub asf_fallbacks: usize,
    pub detector_hits: usize,
    pub escaped: usize,
    pub roulette_kills: usize,
}

impl TraceStats {
    fn add(&mut self, o: &TraceStats) {
        self.rays += o.rays;
        self.scatter_events += o.scatter_events;
        self.asf_fallbacks += o.asf_fallbacks;
        self.detector_hits += o.detector_hits;
        self.escaped += o.escaped;
        self.roulette_kills += o.roulette_kills;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceOutput {
    /// One histogram per band, ascending.
    pub histograms: Vec<EnergyHistogram>,
    pub stats: TraceStats,
}

impl TraceOutput {
    pub fn band_totals(&self) -> Bands {
        let mut t = [0.0; NUM_BANDS];
        for (x, h) in t.iter_mut().zip(&self.histograms) {
            *x = h.total();
        }
        t
    }
}

#[derive(Debug, Clone, Copy)]
struct Path {
    origin: Vec3,
    dir: Vec3,
    energy: Bands,
    length: f64,
    bounce: usize,
    /// The segment leaves a mirror reflection and may hit the detector.
    specular: bool,
    skip: Option<u32>,
}

struct Worker<'a> {
    frame: &'a FrameScene,
    sim: &'a SimConfig,
    provider: &'a dyn AsfProvider,
    cache: AsfCache,
    hits: Vec<Hit>,
    hists: Vec<EnergyHistogram>,
    stats: TraceStats,
}

fn empty_histograms(sim: &SimConfig) -> Result<Vec<EnergyHistogram>> {
    BANDS
        .iter()
        .map(|&b| EnergyHistogram::new(b, sim.bin_width, sim.ir_length))
        .collect()
}

impl<'a> Worker<'a> {
    fn new(frame: &'a FrameScene, sim: &'a SimConfig, provider: &'a dyn AsfProvider) -> Result<Self> {
        Ok(Worker {
            frame,
            sim,
            provider,
            cache: AsfCache::new(),
            hits: Vec::new(),
            hists: empty_histograms(sim)?,
            stats: TraceStats::default(),
        })
    }

    fn deposit(&mut self, length: f64, energy: &Bands) {
        let delay = length / self.sim.sound_speed;
        for (h, &e) in self.hists.iter_mut().zip(energy) {
            if e > 0.0 {
                h.deposit(delay, e);
            }
        }
    }

    /// Per-band transmission along `a → b`: zero through walls; through
    /// scatterers `1 − p²` of the forward lobe at low bands when
    /// compensation is on, zero otherwise. `skip` is ignored entirely.
    fn transmission(&mut self, a: Vec3, b: Vec3, skip: Option<u32>) -> Bands {
        let d = b - a;
        let len = d.norm();
        let mut t = [1.0; NUM_BANDS];
        if len <= 0.0 {
            return t;
        }
        let dir = d / len;
        let mut hits = core::mem::take(&mut self.hits);
        self.frame.bvh().all_hits(a, dir, len, &mut hits);
        hits.retain(|h| Some(h.object) != skip);
        if hits.is_empty() {
            self.hits = hits;
            return t;
        }
        let blocked = hits.iter().any(|h| !self.frame.objects[h.object as usize].flags.is_scatterer);
        if blocked || !self.sim.compensation {
            self.hits = hits;
            return [0.0; NUM_BANDS];
        }
        // first entry into each distinct scatterer
        hits.sort_by(|x, y| x.object.cmp(&y.object).then(x.t.total_cmp(&y.t)));
        hits.dedup_by_key(|h| h.object);
        for h in &hits {
            let entry = a + dir * h.t;
            match self.cache.lookup(self.provider, self.frame, h.object as usize, entry, dir) {
                Some(f) => {
                    for (b, tb) in t.iter_mut().enumerate().take(LOW) {
                        *tb *= f.gain(b, dir).map_or(0.0, |p| scatter_gain(p, false));
                    }
                }
                None => t[..LOW].iter_mut().for_each(|x| *x = 0.0),
            }
        }
        t[LOW..].iter_mut().for_each(|x| *x = 0.0);
        self.hits = hits;
        t
    }

    /// Whether `object` lies between `a` and `b`.
    fn separated_by(&mut self, a: Vec3, b: Vec3, object: u32) -> bool {
        let d = b - a;
        let len = d.norm();
        if len <= 0.0 {
            return false;
        }
        let mut hits = core::mem::take(&mut self.hits);
        self.frame.bvh().all_hits(a, d / len, len, &mut hits);
        let r = hits.iter().any(|h| h.object == object);
        self.hits = hits;
        r
    }

    fn detector(&mut self, p: &Path, t_hit: f64) {
        let l = self.frame.listener;
        let r = self.frame.detector_radius;
        let oc = l - p.origin;
        if oc.norm_squared() <= r * r {
            return;
        }
        let tc = oc.dot(p.dir);
        if tc <= 0.0 {
            return;
        }
        let d2 = oc.norm_squared() - tc * tc;
        if d2 > r * r {
            return;
        }
        let t_in = tc - (r * r - d2).sqrt();
        if t_in >= t_hit {
            return;
        }
        self.stats.detector_hits += 1;
        let s = 1.0 / (PI * r * r);
        let e = p.energy.map(|x| x * s);
        self.deposit(p.length + tc, &e);
    }

    /// Diffuse next-event connection from a wall vertex.
    fn wall_nee(&mut self, x: Vec3, n: Vec3, energy: &Bands, scatter: f64, length: f64) {
        if scatter <= 0.0 {
            return;
        }
        let v = self.frame.listener - x;
        let d = v.norm();
        if d <= 0.0 {
            return;
        }
        let cos = n.dot(v) / d;
        if cos <= 0.0 {
            return;
        }
        let t = self.transmission(x, self.frame.listener, None);
        let g = scatter * cos * FRAC_1_PI / (d * d);
        let mut e = [0.0; NUM_BANDS];
        for b in 0..NUM_BANDS {
            e[b] = energy[b] * g * t[b];
        }
        self.deposit(length + d, &e);
    }

    fn geometric(&mut self, p: &Path, hit: &SurfaceHit, material: &Material, energy: &Bands, rng: &mut rng::Rng, stack: &mut Vec<Path>) {
        let r = reflect(hit, energy, material, rng);
        self.wall_nee(hit.point, hit.facing_normal(), &r.energy, material.scatter, p.length);
        if r.energy.iter().any(|&e| e > 0.0) {
            stack.push(Path {
                origin: hit.point,
                dir: r.direction,
                energy: r.energy,
                length: p.length,
                bounce: p.bounce,
                specular: !r.diffuse,
                skip: None,
            });
        }
    }

    fn scatter(&mut self, p: &Path, hit: &SurfaceHit, object: u32, fields: &AsfFields, energy: &Bands, rng: &mut rng::Rng, stack: &mut Vec<Path>) {
        self.stats.scatter_events += 1;
        let c = hit.point + hit.incoming * REGION_OFFSET;
        let length = p.length + REGION_OFFSET;
        let l = self.frame.listener;
        if !self.separated_by(p.origin, l, object) {
            let v = l - c;
            let d = v.norm();
            if d > 0.0 {
                let dir_l = v / d;
                let t = self.transmission(c, l, Some(object));
                let mut e = [0.0; NUM_BANDS];
                for b in 0..LOW {
                    if let Some(g) = fields.gain(b, dir_l) {
                        e[b] = energy[b] * scatter_gain(g, true) * t[b] / (4.0 * PI * d * d);
                    }
                }
                self.deposit(length + d, &e);
            }
        }
        let out = scatter_event(energy, fields, true, rng);
        if out.values.iter().any(|&e| e > 0.0) {
            stack.push(Path {
                origin: c,
                dir: out.direction,
                energy: out.values,
                length,
                bounce: p.bounce,
                specular: false,
                skip: Some(object),
            });
        }
    }

    fn trace_ray(&mut self, dir: Vec3, e0: Bands, rng: &mut rng::Rng) {
        self.stats.rays += 1;
        let e0_total: f64 = e0.iter().sum();
        let mut stack = vec![Path {
            origin: self.frame.source.position,
            dir,
            energy: e0,
            length: 0.0,
            bounce: 0,
            specular: false,
            skip: None,
        }];
        while let Some(mut p) = stack.pop() {
            let hit = self.frame.bvh().closest(p.origin, p.dir, f64::INFINITY, p.skip);
            if p.specular {
                self.detector(&p, hit.map_or(f64::INFINITY, |h| h.t));
            }
            let Some(hit) = hit else {
                self.stats.escaped += 1;
                continue;
            };
            p.bounce += 1;
            if p.bounce > self.sim.max_order {
                continue;
            }
            p.length += hit.t;
            if p.bounce > self.sim.roulette_depth {
                let total: f64 = p.energy.iter().sum();
                let q = (total / (self.sim.roulette_threshold * e0_total)).clamp(MIN_SURVIVAL, 1.0);
                let u: f64 = rng.random();
                if u >= q {
                    self.stats.roulette_kills += 1;
                    continue;
                }
                for e in &mut p.energy {
                    *e /= q;
                }
            }
            let tri = self.frame.triangle(&hit);
            let sh = SurfaceHit {
                point: p.origin + p.dir * hit.t,
                normal: tri.normal,
                incoming: p.dir,
            };
            let obj = &self.frame.objects[hit.object as usize];
            let material = obj.material;
            let low_energy = p.energy[..LOW].iter().any(|&e| e > 0.0);
            let fields = if obj.flags.is_scatterer && low_energy {
                let f = self.cache.lookup(self.provider, self.frame, hit.object as usize, sh.point, p.dir);
                if f.is_none() {
                    self.stats.asf_fallbacks += 1;
                }
                f
            } else {
                None
            };
            match fields {
                Some(f) => {
                    let mut low = [0.0; NUM_BANDS];
                    let mut rest = p.energy;
                    for b in 0..LOW {
                        if f.coeffs[b].is_some() {
                            low[b] = p.energy[b];
                            rest[b] = 0.0;
                        }
                    }
                    if rest.iter().any(|&e| e > 0.0) {
                        self.geometric(&p, &sh, &material, &rest, rng, &mut stack);
                    }
                    self.scatter(&p, &sh, hit.object, &f, &low, rng, &mut stack);
                }
                None => self.geometric(&p, &sh, &material, &p.energy, rng, &mut stack),
            }
        }
    }

    fn run_chunk(&mut self, chunk: usize) {
        let first = chunk * CHUNK_RAYS;
        let last = (first + CHUNK_RAYS).min(self.sim.n_rays);
        let mut rng = rng::stream(self.sim.seed, chunk as u64);
        let per_ray = self.frame.source.power.map(|p| p / self.sim.n_rays as f64);
        for _ in first..last {
            let dir = uniform_unit_vector(&mut rng);
            self.trace_ray(dir, per_ray, &mut rng);
        }
    }
}

fn chunk_count(sim: &SimConfig) -> usize {
    sim.n_rays.div_ceil(CHUNK_RAYS)
}

type ChunkResult = (Vec<EnergyHistogram>, TraceStats);

fn run_chunks(
    frame: &FrameScene,
    sim: &SimConfig,
    provider: &dyn AsfProvider,
    chunks: impl Iterator<Item = usize>,
) -> Result<Vec<(usize, ChunkResult)>> {
    let mut w = Worker::new(frame, sim, provider)?;
    let mut out = Vec::new();
    for c in chunks {
        w.hists = empty_histograms(sim)?;
        w.stats = TraceStats::default();
        w.run_chunk(c);
        out.push((c, (core::mem::take(&mut w.hists), w.stats)));
    }
    Ok(out)
}

/// Traces one frame: the analytic direct path plus `sim.n_rays` paths from
/// the source. Deterministic for a given seed; the thread count does not
/// change the result.
pub fn trace(frame: &FrameScene, sim: &SimConfig, provider: &dyn AsfProvider) -> Result<TraceOutput> {
    sim.validate()?;
    let n = chunk_count(sim);
    let threads = sim.threads.clamp(1, n);
    let mut results: Vec<(usize, ChunkResult)> = if threads == 1 {
        run_chunks(frame, sim, provider, 0..n)?
    } else {
        parallel(frame, sim, provider, n, threads)?
    };
    results.sort_by_key(|r| r.0);

    let mut w = Worker::new(frame, sim, provider)?;
    let s = frame.source.position;
    let l = frame.listener;
    let d = s.distance(l);
    if d > 0.0 {
        let t = w.transmission(s, l, None);
        let mut e = [0.0; NUM_BANDS];
        for b in 0..NUM_BANDS {
            e[b] = frame.source.power[b] / (4.0 * PI * d * d) * t[b];
        }
        w.deposit(d, &e);
    }
    let mut hists = w.hists;
    let mut stats = TraceStats::default();
    for (_, (h, st)) in &results {
        for (a, b) in hists.iter_mut().zip(h) {
            a.merge(b)?;
        }
        stats.add(st);
    }
    Ok(TraceOutput { histograms: hists, stats })
}

#[cfg(feature = "std")]
fn parallel(
    frame: &FrameScene,
    sim: &SimConfig,
    provider: &dyn AsfProvider,
    n: usize,
    threads: usize,
) -> Result<Vec<(usize, ChunkResult)>> {
    let parts: Vec<Result<Vec<(usize, ChunkResult)>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| s.spawn(move || run_chunks(frame, sim, provider, (t..n).step_by(threads))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("trace worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[cfg(not(feature = "std"))]
fn parallel(
    frame: &FrameScene,
    sim: &SimConfig,
    provider: &dyn AsfProvider,
    n: usize,
    _threads: usize,
) -> Result<Vec<(usize, ChunkResult)>> {
    run_chunks(frame, sim, provider, 0..n)
}

/// Traces every frame of the scene.
pub fn trace_scene(scene: &Scene, provider: &dyn AsfProvider) -> Result<Vec<TraceOutput>> {
    scene
        .sim
        .frames
        .iter()
        .map(|&t| trace(&FrameScene::build(scene, t)?, &scene.sim, provider))
        .collect()
}
