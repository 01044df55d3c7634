//! Test-set evaluation by normalized reproduction error (NRE).

#[allow(unused_imports)]
use num_traits::Float;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::ModelSet;
use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::shfield::{nre, SHCoefficients, SphericalField};
use crate::sphgeom::FieldGrid;

/// Histogram bins over NRE ∈ [0, 1]; larger values land in the last bin.
pub const HISTOGRAM_BINS: usize = 20;

/// One evaluated (record, frequency) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NreSample {
    pub record: usize,
    pub frequency: f64,
    pub nre: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NreReport {
    /// `(frequency, mean NRE, count)` in ascending frequency.
    pub per_frequency: Vec<(f64, f64, usize)>,
    pub overall: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub samples: Vec<NreSample>,
    /// `(lower edge, upper edge, count)`.
    pub histogram: Vec<(f64, f64, usize)>,
}

/// Linear-interpolation percentile of `sorted` (ascending), `q` in [0, 100].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let t = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * t
}

/// Counts of `values` in [`HISTOGRAM_BINS`] equal bins over [0, 1].
pub fn histogram(values: &[f64]) -> Vec<(f64, f64, usize)> {
    let w = 1.0 / HISTOGRAM_BINS as f64;
    let mut counts = alloc::vec![0usize; HISTOGRAM_BINS];
    for &v in values {
        let i = ((v / w).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 * w, (i + 1) as f64 * w, c))
        .collect()
}

/// NRE of predicted against target coefficients, both evaluated on `grid`
/// and clamped to [0, 1]. Each pair is `(record id, target, prediction)`.
pub fn evaluate_pairs(
    grid: &Arc<FieldGrid>,
    pairs: &[(usize, &SHCoefficients, &SHCoefficients)],
    reference_radius: f64,
) -> Result<NreReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let mut samples = Vec::with_capacity(pairs.len());
    for &(record, target, pred) in pairs {
        let t = SphericalField::from_coefficients(grid.clone(), target, reference_radius);
        let p = SphericalField::from_coefficients(grid.clone(), pred, reference_radius);
        samples.push(NreSample {
            record,
            frequency: target.frequency,
            nre: nre(&t, &p)?,
        });
    }
    let mut freqs: Vec<f64> = samples.iter().map(|s| s.frequency).collect();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup();
    let per_frequency = freqs
        .iter()
        .map(|&f| {
            let v: Vec<f64> = samples.iter().filter(|s| s.frequency == f).map(|s| s.nre).collect();
            (f, v.iter().sum::<f64>() / v.len() as f64, v.len())
        })
        .collect();
    let mut all: Vec<f64> = samples.iter().map(|s| s.nre).collect();
    let overall = all.iter().sum::<f64>() / all.len() as f64;
    let hist = histogram(&all);
    all.sort_by(f64::total_cmp);
    Ok(NreReport {
        per_frequency,
        overall,
        p50: percentile(&all, 50.0),
        p75: percentile(&all, 75.0),
        p95: percentile(&all, 95.0),
        samples,
        histogram: hist,
    })
}

/// Runs each band model on the records' canonical clouds and scores the
/// predictions against the labels.
pub fn evaluate_testset(models: &ModelSet, records: &[&Record], grid: &Arc<FieldGrid>) -> Result<NreReport> {
    let mut owned = Vec::new();
    for rec in records {
        for label in &rec.labels {
            let net = models.get(label.frequency).ok_or_else(|| {
                Error::invalid(alloc::format!("model for {} Hz not loaded", label.frequency))
            })?;
            let out = net.forward(&rec.points)?;
            let pred = SHCoefficients::new(label.sh.order, out, label.frequency)?;
            owned.push((rec.id, &label.sh, pred, rec.reference_radius));
        }
    }
    let r_ref = owned.first().map(|o| o.3).unwrap_or(crate::oracle::DEFAULT_REFERENCE_RADIUS);
    let pairs: Vec<_> = owned.iter().map(|(id, t, p, _)| (*id, *t, p)).collect();
    evaluate_pairs(grid, &pairs, r_ref)
}
