//! The subcommands. Each takes a fully resolved options struct, writes its
//! outputs and a manifest, and returns a small report for the terminal.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use asfnet_core::dataset::{generate, split, DatasetConfig, Record, RecordKind};
use asfnet_core::oracle::{compute_asf, ScatterConfig, SphereScatterer, DEFAULT_REFERENCE_RADIUS};
use asfnet_core::pointcloud::{farthest_point_sample, sample_surface, Frame, ObjectFlags, PointCloud, REGRESSOR_POINTS};
use asfnet_core::propagate::{
    histograms_csv, trace, AsfProvider, FrameScene, NetworkAsf, NoAsf, OracleAsf, TraceStats,
};
use asfnet_core::regressor::{
    evaluate_pairs, predict_asf, train, NetworkConfig, NreReport, Sample, TrainConfig,
};
use asfnet_core::render::{convolve, envelopes, synthesize, ImpulseResponse, DEFAULT_SAMPLE_RATE};
use asfnet_core::shfield::{fit_error_curve, SHCoefficients};
use asfnet_core::sphgeom::{icosphere, Direction, FieldGrid, DEFAULT_LEVEL};
use asfnet_core::{rng, Vec3, ASF_BANDS, NUM_BANDS};
use log::{info, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ToolError, ToolResult};
use crate::manifest::{manifest_path, Manifest};
use crate::{io, model, scene};

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> ToolResult<&'a Path> {
    p.as_deref().ok_or_else(|| ToolError::usage(format!("--{flag} is required")))
}

fn field_grid() -> ToolResult<Arc<FieldGrid>> {
    Ok(Arc::new(icosphere(DEFAULT_LEVEL)?))
}

// ---------------------------------------------------------------- gen-dataset

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDatasetOpts {
    pub count: usize,
    pub freqs: Vec<f64>,
    pub seed: u64,
    /// Fraction of two-sphere composites among base objects.
    pub composites: f64,
    /// Skip the rotated copies.
    pub no_augment: bool,
    pub out: Option<PathBuf>,
}

impl Default for GenDatasetOpts {
    fn default() -> Self {
        GenDatasetOpts {
            count: 100,
            freqs: ASF_BANDS.to_vec(),
            seed: 0,
            composites: 0.3,
            no_augment: false,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetReport {
    pub records: usize,
    pub composites: usize,
    pub out: PathBuf,
}

pub fn gen_dataset(o: &GenDatasetOpts) -> ToolResult<DatasetReport> {
    let out = required(&o.out, "out")?;
    let cfg = DatasetConfig {
        count: o.count,
        frequencies: o.freqs.clone(),
        seed: o.seed,
        composite_fraction: o.composites,
        augment: !o.no_augment,
        ..DatasetConfig::default()
    };
    let records = generate(&cfg)?;
    io::write_dataset(out, &records)?;
    let mut m = Manifest::new("gen-dataset", o.seed, o)?;
    m.output(out)?;
    m.write(&manifest_path(out, false))?;
    Ok(DatasetReport {
        records: records.len(),
        composites: records.iter().filter(|r| r.kind == RecordKind::Composite).count(),
        out: out.to_path_buf(),
    })
}

// --------------------------------------------------------------------- fit-sh

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitShOpts {
    /// Dataset whose scatterers are refit. Without it, `count` random
    /// centred spheres with radius in [0.5, 1] m are used.
    pub dataset: Option<PathBuf>,
    pub count: usize,
    pub freqs: Vec<f64>,
    pub seed: u64,
    pub max_order: u32,
    pub out: Option<PathBuf>,
}

impl Default for FitShOpts {
    fn default() -> Self {
        FitShOpts {
            dataset: None,
            count: 50,
            freqs: ASF_BANDS.to_vec(),
            seed: 0,
            max_order: 5,
            out: None,
        }
    }
}

/// Fit error at one order, aggregated over objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitRow {
    pub frequency: f64,
    pub order: u32,
    /// Mean of `Σ(f − f̂)² / Σ f²` over objects.
    pub relative_error: f64,
    pub max_relative_error: f64,
    pub objects: usize,
}

/// Random centred spheres for the order study.
pub fn study_spheres(count: usize, seed: u64) -> ToolResult<Vec<Vec<SphereScatterer>>> {
    (0..count)
        .map(|i| {
            let r: f64 = rng::stream(seed, i as u64).random_range(0.5..=1.0);
            Ok(vec![SphereScatterer::centered(r)?])
        })
        .collect()
}

/// Fit error versus order of the oracle fields of `objects` at each frequency.
pub fn fit_study(objects: &[Vec<SphereScatterer>], freqs: &[f64], max_order: u32) -> ToolResult<Vec<FitRow>> {
    if objects.is_empty() {
        return Err(ToolError::usage("no objects to fit"));
    }
    let grid = field_grid()?;
    let mut rows = Vec::new();
    for &f in freqs {
        let mut sums = vec![(0.0, 0.0f64); max_order as usize + 1];
        for spheres in objects {
            let sol = compute_asf(&ScatterConfig::new(spheres.clone(), f)?, &grid, DEFAULT_REFERENCE_RADIUS)?;
            for e in fit_error_curve(&sol.field, max_order)? {
                let s = &mut sums[e.order as usize];
                s.0 += e.relative_error;
                s.1 = s.1.max(e.relative_error);
            }
        }
        for (order, (sum, max)) in sums.into_iter().enumerate() {
            rows.push(FitRow {
                frequency: f,
                order: order as u32,
                relative_error: sum / objects.len() as f64,
                max_relative_error: max,
                objects: objects.len(),
            });
        }
    }
    Ok(rows)
}

pub fn fit_rows_csv(rows: &[FitRow]) -> String {
    let mut s = String::from("frequency,order,relative_error,max_relative_error,objects\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.frequency, r.order, r.relative_error, r.max_relative_error, r.objects
        );
    }
    s
}

pub fn fit_sh(o: &FitShOpts) -> ToolResult<Vec<FitRow>> {
    let out = required(&o.out, "out")?;
    let objects = match &o.dataset {
        Some(p) => io::read_dataset(p)?.into_iter().map(|r| r.scatterers).collect(),
        None => study_spheres(o.count, o.seed)?,
    };
    let rows = fit_study(&objects, &o.freqs, o.max_order)?;
    io::write_bytes(out, fit_rows_csv(&rows).as_bytes())?;
    let mut m = Manifest::new("fit-sh", o.seed, o)?;
    if let Some(p) = &o.dataset {
        m.input(p)?;
    }
    m.output(out)?;
    m.write(&manifest_path(out, false))?;
    Ok(rows)
}

// ---------------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOpts {
    pub dataset: Option<PathBuf>,
    /// Output directory for the model files and metrics.
    pub out: Option<PathBuf>,
    /// Bands to train; all labelled bands when empty.
    pub freqs: Vec<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Halve the step size whenever an epoch raises the train loss.
    pub safeguard: bool,
}

impl Default for TrainOpts {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainOpts {
            dataset: None,
            out: None,
            freqs: Vec::new(),
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            seed: 0,
            safeguard: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub param_count: usize,
    /// `(frequency, initial train loss, final train loss, best test loss)`.
    pub bands: Vec<(f64, f64, f64, f64)>,
}

fn labelled_freqs(records: &[Record]) -> Vec<f64> {
    let mut f: Vec<f64> = records.iter().flat_map(|r| r.labels.iter().map(|l| l.frequency)).collect();
    f.sort_by(f64::total_cmp);
    f.dedup();
    f
}

fn samples<'a>(records: &'a [Record], idx: &[usize], f: f64) -> ToolResult<Vec<Sample<'a>>> {
    idx.iter()
        .map(|&i| {
            let r = &records[i];
            let l = r
                .label(f)
                .ok_or_else(|| ToolError::usage(format!("record {} has no {f} Hz label", r.id)))?;
            Ok(Sample {
                points: &r.points,
                target: &l.sh.coeffs,
            })
        })
        .collect()
}

pub fn train_models(o: &TrainOpts, threads: usize) -> ToolResult<TrainReport> {
    let data = required(&o.dataset, "dataset")?;
    let out = required(&o.out, "out")?;
    let records = io::read_dataset(data)?;
    let freqs = if o.freqs.is_empty() { labelled_freqs(&records) } else { o.freqs.clone() };
    let (tr, te) = split(&records, o.seed);
    let tc = TrainConfig {
        epochs: o.epochs,
        batch_size: o.batch_size,
        learning_rate: o.learning_rate,
        lr_floor: TrainConfig::default().lr_floor.min(o.learning_rate),
        seed: o.seed,
        threads,
        safeguard: o.safeguard,
        ..TrainConfig::default()
    };
    let net = NetworkConfig::default();
    info!("network has {} trainable parameters", net.param_count());
    info!("{} train and {} test records", tr.len(), te.len());
    io::ensure_dir(out)?;
    let mut metrics = String::from("frequency,epoch,train_loss,test_loss,lr\n");
    let mut trained = Vec::new();
    let mut report = TrainReport {
        param_count: net.param_count(),
        bands: Vec::new(),
    };
    for (bi, &f) in freqs.iter().enumerate() {
        let band_cfg = TrainConfig {
            seed: o.seed.wrapping_add(bi as u64),
            ..tc.clone()
        };
        let t0 = Instant::now();
        let outcome = train(net.clone(), &samples(&records, &tr, f)?, &samples(&records, &te, f)?, &band_cfg)?;
        for h in &outcome.history {
            let _ = writeln!(metrics, "{f},{},{},{},{}", h.epoch, h.train_loss, h.test_loss, h.lr);
        }
        let last = outcome.history.last().map_or(f64::NAN, |h| h.train_loss);
        let best = outcome.history.get(outcome.best_epoch).map_or(f64::NAN, |h| h.test_loss);
        info!(
            "{f} Hz: loss {:.4e} -> {last:.4e}, best test {best:.4e} at epoch {} ({:.1} s)",
            outcome.initial_loss,
            outcome.best_epoch,
            t0.elapsed().as_secs_f64()
        );
        report.bands.push((f, outcome.initial_loss, last, best));
        trained.push((f, outcome));
    }
    let metrics_path = out.join("metrics.csv");
    io::write_bytes(&metrics_path, metrics.as_bytes())?;
    let refs: Vec<_> = trained.iter().map(|(f, t)| (*f, &t.params, t.best_epoch)).collect();
    let files = model::save(out, &refs, &tc, io::sha256_file(data)?, o.seed)?;
    let mut m = Manifest::new("train", o.seed, o)?;
    m.input(data)?;
    for p in files.iter().chain([&metrics_path]) {
        m.output(p)?;
    }
    m.write(&manifest_path(out, true))?;
    Ok(report)
}

// -------------------------------------------------------------------- predict

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictOpts {
    pub model: Option<PathBuf>,
    /// Scatterer mesh; its surface is sampled into a cloud.
    pub obj: Option<PathBuf>,
    /// Alternatively a dataset and the id of one of its records.
    pub dataset: Option<PathBuf>,
    pub record: usize,
    /// Propagation direction of the incoming wave.
    pub incoming: [f64; 3],
    /// Bands to predict; all loaded bands when empty.
    pub freqs: Vec<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for PredictOpts {
    fn default() -> Self {
        PredictOpts {
            model: None,
            obj: None,
            dataset: None,
            record: 0,
            incoming: [-1.0, 0.0, 0.0],
            freqs: Vec::new(),
            seed: 0,
            out: None,
        }
    }
}

/// Surface cloud of a mesh reduced to the regressor's point count, centred.
pub fn mesh_cloud(mesh: &asfnet_core::pointcloud::TriangleMesh, seed: u64) -> ToolResult<PointCloud> {
    let dense = sample_surface(mesh, 4 * REGRESSOR_POINTS, seed)?;
    Ok(farthest_point_sample(&dense, REGRESSOR_POINTS, seed)?.centered())
}

pub fn coefficients_csv(coeffs: &[SHCoefficients]) -> String {
    let mut s = String::from("frequency,l,m,coefficient\n");
    for c in coeffs {
        let mut i = 0;
        for l in 0..=c.order as i32 {
            for m in -l..=l {
                let _ = writeln!(s, "{},{l},{m},{}", c.frequency, c.coeffs[i]);
                i += 1;
            }
        }
    }
    s
}

pub fn predict(o: &PredictOpts) -> ToolResult<Vec<SHCoefficients>> {
    let model_dir = required(&o.model, "model")?;
    let out = required(&o.out, "out")?;
    let (models, _) = model::load(model_dir)?;
    let pc = match (&o.obj, &o.dataset) {
        (Some(p), None) => mesh_cloud(&io::read_obj(p, ObjectFlags::SCATTERER)?, o.seed)?,
        (None, Some(p)) => {
            let recs = io::read_dataset(p)?;
            let r = recs
                .iter()
                .find(|r| r.id == o.record)
                .ok_or_else(|| ToolError::usage(format!("record {} not in {}", o.record, p.display())))?;
            PointCloud::new(r.points.clone(), Frame::World)?
        }
        _ => return Err(ToolError::usage("give exactly one of --obj and --dataset")),
    };
    let dir = Direction::from_vector(Vec3::from_array(o.incoming).normalized())?;
    let freqs = if o.freqs.is_empty() { models.frequencies() } else { o.freqs.clone() };
    let coeffs = freqs
        .iter()
        .map(|&f| predict_asf(&models, &pc, dir, f))
        .collect::<Result<Vec<_>, _>>()?;
    io::write_bytes(out, coefficients_csv(&coeffs).as_bytes())?;
    let mut m = Manifest::new("predict", o.seed, o)?;
    for p in [&o.obj, &o.dataset].into_iter().flatten() {
        m.input(p)?;
    }
    m.input(&model_dir.join(model::SIDECAR))?;
    m.output(out)?;
    m.write(&manifest_path(out, false))?;
    Ok(coeffs)
}

// ------------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateOpts {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Score every record instead of the held-out split.
    pub all: bool,
    /// Split seed; defaults to the one stored with the model.
    pub split_seed: Option<u64>,
    /// Use the labels themselves as predictions (a pipeline check).
    pub replay_labels: bool,
}

impl Default for EvaluateOpts {
    fn default() -> Self {
        EvaluateOpts {
            dataset: None,
            model: None,
            out: None,
            all: false,
            split_seed: None,
            replay_labels: false,
        }
    }
}

pub fn nre_table_csv(r: &NreReport) -> String {
    let mut s = String::from("frequency,mean_nre,count\n");
    for (f, m, n) in &r.per_frequency {
        let _ = writeln!(s, "{f},{m},{n}");
    }
    let _ = writeln!(s, "overall,{},{}", r.overall, r.samples.len());
    s
}

/// Histogram rows with the percentile markers that fall in each bin.
pub fn nre_histogram_csv(r: &NreReport) -> String {
    let mut s = String::from("bin_lo,bin_hi,count,markers\n");
    let last = r.histogram.len().saturating_sub(1);
    for (i, (lo, hi, c)) in r.histogram.iter().enumerate() {
        let marks: Vec<&str> = [("p50", r.p50), ("p75", r.p75), ("p95", r.p95)]
            .into_iter()
            .filter(|&(_, v)| (v >= *lo && v < *hi) || (i == last && v >= *lo))
            .map(|(n, _)| n)
            .collect();
        let _ = writeln!(s, "{lo},{hi},{c},{}", marks.join(";"));
    }
    s
}

/// Scores records against their labels, using the models or the labels.
pub fn score(records: &[&Record], models: Option<&asfnet_core::regressor::ModelSet>) -> ToolResult<NreReport> {
    let grid = field_grid()?;
    let mut preds = Vec::new();
    for r in records {
        for l in &r.labels {
            let p = match models {
                Some(m) => {
                    let net = m
                        .get(l.frequency)
                        .ok_or_else(|| ToolError::usage(format!("no model for {} Hz", l.frequency)))?;
                    SHCoefficients::new(l.sh.order, net.forward(&r.points)?, l.frequency)?
                }
                None => l.sh.clone(),
            };
            preds.push((r.id, &l.sh, p));
        }
    }
    let r_ref = records.first().map_or(DEFAULT_REFERENCE_RADIUS, |r| r.reference_radius);
    let pairs: Vec<_> = preds.iter().map(|(id, t, p)| (*id, *t, p)).collect();
    Ok(evaluate_pairs(&grid, &pairs, r_ref)?)
}

pub fn evaluate(o: &EvaluateOpts) -> ToolResult<NreReport> {
    let data = required(&o.dataset, "dataset")?;
    let out = required(&o.out, "out")?;
    let records = io::read_dataset(data)?;
    let loaded = match (&o.model, o.replay_labels) {
        (Some(p), false) => Some(model::load(p)?),
        (None, true) => None,
        _ => return Err(ToolError::usage("give either --model or --replay-labels")),
    };
    let picked: Vec<&Record> = if o.all {
        records.iter().collect()
    } else {
        let seed = o.split_seed.or(loaded.as_ref().map(|l| l.1.split_seed)).unwrap_or(0);
        split(&records, seed).1.into_iter().map(|i| &records[i]).collect()
    };
    let report = score(&picked, loaded.as_ref().map(|l| &l.0))?;
    io::ensure_dir(out)?;
    let table = out.join("nre_by_frequency.csv");
    let hist = out.join("nre_histogram.csv");
    io::write_bytes(&table, nre_table_csv(&report).as_bytes())?;
    io::write_bytes(&hist, nre_histogram_csv(&report).as_bytes())?;
    let mut m = Manifest::new("evaluate", o.split_seed.unwrap_or(0), o)?;
    m.input(data)?;
    if let Some(p) = &o.model {
        m.input(&p.join(model::SIDECAR))?;
    }
    m.output(&table)?;
    m.output(&hist)?;
    m.write(&manifest_path(out, true))?;
    Ok(report)
}

// ------------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOpts {
    pub scene: Option<PathBuf>,
    /// Built-in stand-in scene used instead of a scene file.
    pub standin: Option<String>,
    pub out: Option<PathBuf>,
    /// Field provider for scatterers: `none`, `oracle` or `network`.
    pub asf: String,
    /// Model directory for `--asf network`.
    pub model: Option<PathBuf>,
    pub rays: Option<usize>,
    pub seed: Option<u64>,
    pub frames: Vec<f64>,
    pub no_compensation: bool,
    pub sample_rate: f64,
    /// Phase seed of the IR synthesis.
    pub ir_seed: u64,
    /// Also dump each IR as CSV.
    pub ir_csv: bool,
}

impl Default for SimulateOpts {
    fn default() -> Self {
        SimulateOpts {
            scene: None,
            standin: None,
            out: None,
            asf: "oracle".into(),
            model: None,
            rays: None,
            seed: None,
            frames: Vec::new(),
            no_compensation: false,
            sample_rate: DEFAULT_SAMPLE_RATE,
            ir_seed: 0,
            ir_csv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub time: f64,
    pub band_totals: [f64; NUM_BANDS],
    pub stats: TraceStats,
    pub trace_ms: f64,
    pub synth_ms: f64,
}

pub fn simulate(o: &SimulateOpts, threads: usize) -> ToolResult<Vec<FrameReport>> {
    let out = required(&o.out, "out")?;
    let mut sc = match (&o.scene, &o.standin) {
        (Some(p), None) => scene::load_scene(p)?,
        (None, Some(name)) => scene::standin(name)?.to_scene(Path::new("."))?,
        _ => return Err(ToolError::usage("give exactly one of --scene and --standin")),
    };
    if let Some(n) = o.rays {
        sc.sim.n_rays = n;
    }
    if let Some(s) = o.seed {
        sc.sim.seed = s;
    }
    if !o.frames.is_empty() {
        sc.sim.frames = o.frames.clone();
    }
    if o.no_compensation {
        sc.sim.compensation = false;
    }
    sc.sim.threads = threads;
    sc.validate()?;
    let provider: Box<dyn AsfProvider> = match o.asf.as_str() {
        "none" => Box::new(NoAsf),
        "oracle" => Box::new(OracleAsf::new()?),
        "network" => {
            let dir = required(&o.model, "model")?;
            Box::new(NetworkAsf {
                models: model::load(dir)?.0,
                seed: sc.sim.seed,
            })
        }
        other => return Err(ToolError::usage(format!("unknown --asf {other:?} (none, oracle, network)"))),
    };
    io::ensure_dir(out)?;
    let mut m = Manifest::new("simulate", sc.sim.seed, o)?;
    if let Some(p) = &o.scene {
        m.input(p)?;
    }
    let mut timing = String::from(
        "frame,time_s,trace_ms,synth_ms,rays,scatter_events,asf_fallbacks,detector_hits,escaped,roulette_kills\n",
    );
    let mut reports = Vec::new();
    for (k, &t) in sc.sim.frames.iter().enumerate() {
        let t0 = Instant::now();
        let frame = FrameScene::build(&sc, t)?;
        let traced = trace(&frame, &sc.sim, provider.as_ref())?;
        let trace_ms = t0.elapsed().as_secs_f64() * 1e3;
        let t1 = Instant::now();
        let ir = synthesize(&envelopes(&traced.histograms)?, o.sample_rate, o.ir_seed)?;
        let synth_ms = t1.elapsed().as_secs_f64() * 1e3;
        let s = traced.stats;
        if s.asf_fallbacks > 0 {
            warn!("frame {k}: {} scatterer hits had no field and reflected geometrically", s.asf_fallbacks);
        }
        info!("frame {k} (t = {t} s): traced in {trace_ms:.1} ms, IR in {synth_ms:.1} ms");
        let _ = writeln!(
            timing,
            "{k},{t},{trace_ms:.3},{synth_ms:.3},{},{},{},{},{},{}",
            s.rays, s.scatter_events, s.asf_fallbacks, s.detector_hits, s.escaped, s.roulette_kills
        );
        let hist = out.join(format!("frame_{k:03}_histograms.csv"));
        io::write_bytes(&hist, histograms_csv(&traced.histograms).as_bytes())?;
        let wav = out.join(format!("frame_{k:03}_ir.wav"));
        io::write_wav(&wav, &ir.samples, ir.sample_rate, true)?;
        m.output(&hist)?;
        m.output(&wav)?;
        if o.ir_csv {
            let csv = out.join(format!("frame_{k:03}_ir.csv"));
            io::write_bytes(&csv, ir.to_csv().as_bytes())?;
            m.output(&csv)?;
        }
        reports.push(FrameReport {
            time: t,
            band_totals: traced.band_totals(),
            stats: s,
            trace_ms,
            synth_ms,
        });
    }
    // timings differ between runs, so the log is not digested
    io::write_bytes(&out.join("timing.csv"), timing.as_bytes())?;
    m.write(&manifest_path(out, true))?;
    Ok(reports)
}

// --------------------------------------------------------------------- render

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOpts {
    pub ir: Option<PathBuf>,
    pub dry: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Write 16-bit PCM instead of 32-bit float.
    pub pcm16: bool,
}

/// Returns the normalization gain applied to the convolved signal.
pub fn render(o: &RenderOpts) -> ToolResult<f64> {
    let ir_path = required(&o.ir, "ir")?;
    let dry_path = required(&o.dry, "dry")?;
    let out = required(&o.out, "out")?;
    let (ir_samples, ir_rate) = io::read_wav(ir_path)?;
    let (dry, dry_rate) = io::read_wav(dry_path)?;
    let ir = ImpulseResponse {
        samples: ir_samples,
        sample_rate: ir_rate,
        seed: 0,
    };
    let wet = convolve(&ir, &dry, dry_rate)?;
    io::write_wav(out, &wet.samples, dry_rate, !o.pcm16)?;
    let mut m = Manifest::new("render", 0, o)?;
    m.input(ir_path)?;
    m.input(dry_path)?;
    m.output(out)?;
    m.write(&manifest_path(out, false))?;
    Ok(wet.gain)
}

// -------------------------------------------------------------------- standin

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StandinOpts {
    pub name: String,
    pub out: Option<PathBuf>,
}

pub fn write_standin(o: &StandinOpts) -> ToolResult<()> {
    let out = required(&o.out, "out")?;
    let s = scene::standin(&o.name)?;
    let mut text = serde_json::to_string_pretty(&s).map_err(|e| ToolError::usage(e.to_string()))?;
    text.push('\n');
    io::write_bytes(out, text.as_bytes())?;
    let mut m = Manifest::new("standin", s.sim.seed, o)?;
    m.output(out)?;
    m.write(&manifest_path(out, false))
}
