//! Impulse response synthesis from per-band energy histograms.
//!
//! Each band histogram becomes a pressure envelope (√energy). Bins are
//! grouped into overlapping frames; for every frame a magnitude spectrum is
//! interpolated in log frequency between band centres, given random phase,
//! transformed back, Hann-windowed, scaled to the frame's energy and
//! overlap-added.

pub mod fft;

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::propagate::EnergyHistogram;
use crate::rng;
use fft::{fft_in_place, next_pow2, rfft};

pub const DEFAULT_SAMPLE_RATE: f64 = 44_100.0;
pub const MIN_SAMPLE_RATE: f64 = 16_000.0;
pub const FRAME_LEN: usize = 1024;
pub const HOP: usize = FRAME_LEN / 2;
/// Output peak after convolution, in dBFS.
pub const PEAK_DBFS: f64 = -1.0;

/// Pressure envelopes (√energy) of several bands on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BandEnvelopes {
    /// Band centres in Hz, ascending.
    pub bands: Vec<f64>,
    pub bin_width: f64,
    /// `values[band][bin]`.
    pub values: Vec<Vec<f64>>,
}

impl BandEnvelopes {
    pub fn bin_count(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Length in seconds.
    pub fn duration(&self) -> f64 {
        self.bin_count() as f64 * self.bin_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub seed: u64,
}

impl ImpulseResponse {
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// `index,time_s,pressure` rows with a header.
    pub fn to_csv(&self) -> alloc::string::String {
        use core::fmt::Write;
        let mut s = alloc::string::String::from("index,time_s,pressure\n");
        for (i, v) in self.samples.iter().enumerate() {
            let _ = writeln!(s, "{i},{},{v}", i as f64 / self.sample_rate);
        }
        s
    }
}

/// Square root of every bin. Histograms must share bin width and length.
pub fn envelopes(hists: &[EnergyHistogram]) -> Result<BandEnvelopes> {
    let first = hists
        .first()
        .ok_or_else(|| Error::invalid("no histograms to convert"))?;
    let mut order: Vec<usize> = (0..hists.len()).collect();
    order.sort_by(|&a, &b| hists[a].band.total_cmp(&hists[b].band));
    let mut bands = Vec::with_capacity(hists.len());
    let mut values = Vec::with_capacity(hists.len());
    for i in order {
        let h = &hists[i];
        if h.bins.len() != first.bins.len() || h.bin_width != first.bin_width {
            return Err(Error::invalid("histograms have different time grids"));
        }
        if let Some(e) = h.bins.iter().find(|e| !(**e >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "negative or non-finite energy {e} in {} Hz histogram",
                h.band
            )));
        }
        bands.push(h.band);
        values.push(h.bins.iter().map(|e| e.sqrt()).collect());
    }
    Ok(BandEnvelopes {
        bands,
        bin_width: first.bin_width,
        values,
    })
}

/// Magnitude at `f` by linear interpolation in log frequency between band
/// centres, held flat beyond the outermost bands.
pub fn interpolate_log(bands: &[f64], amps: &[f64], f: f64) -> f64 {
    if f <= bands[0] {
        return amps[0];
    }
    let last = bands.len() - 1;
    if f >= bands[last] {
        return amps[last];
    }
    let i = bands.partition_point(|&b| b <= f) - 1;
    let t = (f / bands[i]).ln() / (bands[i + 1] / bands[i]).ln();
    amps[i] + (amps[i + 1] - amps[i]) * t
}

fn hann(n: usize, len: usize) -> f64 {
    0.5 - 0.5 * (TAU * n as f64 / len as f64).cos()
}

/// Random-phase overlap-add synthesis. Frame `f` is centred on sample
/// `f · HOP`, and each histogram bin feeds the frame nearest its centre.
pub fn synthesize(env: &BandEnvelopes, sample_rate: f64, seed: u64) -> Result<ImpulseResponse> {
    if !(sample_rate >= MIN_SAMPLE_RATE) {
        return Err(Error::invalid(format!(
            "sample rate {sample_rate} Hz is below {MIN_SAMPLE_RATE} Hz"
        )));
    }
    if env.bands.len() < 2 {
        return Err(Error::invalid("synthesis needs at least two bands"));
    }
    let n_out = (env.duration() * sample_rate).round() as usize;
    let mut out = vec![0.0; n_out];
    if n_out == 0 {
        return Ok(ImpulseResponse {
            samples: out,
            sample_rate,
            seed,
        });
    }
    let n_frames = n_out / HOP + 1;
    let nb = env.bands.len();
    let mut frame_energy = vec![vec![0.0; nb]; n_frames];
    for bin in 0..env.bin_count() {
        let centre = (bin as f64 + 0.5) * env.bin_width * sample_rate;
        let f = ((centre / HOP as f64).round() as usize).min(n_frames - 1);
        for b in 0..nb {
            let a = env.values[b][bin];
            frame_energy[f][b] += a * a;
        }
    }

    let half = FRAME_LEN / 2;
    let freqs: Vec<f64> = (0..=half).map(|k| k as f64 * sample_rate / FRAME_LEN as f64).collect();
    let mut amps = vec![0.0; nb];
    let mut spec = vec![Complex64::new(0.0, 0.0); FRAME_LEN];
    for (fi, energies) in frame_energy.iter().enumerate() {
        if energies.iter().all(|&e| e == 0.0) {
            continue;
        }
        for (a, &e) in amps.iter_mut().zip(energies) {
            *a = e.sqrt();
        }
        let mut r = rng::stream(seed, fi as u64);
        let mut target = 0.0;
        for k in 0..=half {
            let m = interpolate_log(&env.bands, &amps, freqs[k]);
            let weight = if k == 0 || k == half { 1.0 } else { 2.0 };
            target += weight * m * m;
            spec[k] = if k == 0 || k == half {
                Complex64::new(if r.random::<bool>() { m } else { -m }, 0.0)
            } else {
                Complex64::from_polar(m, r.random_range(0.0..TAU))
            };
        }
        target /= FRAME_LEN as f64;
        for k in 1..half {
            spec[FRAME_LEN - k] = spec[k].conj();
        }
        fft_in_place(&mut spec, true);

        let start = fi as isize * HOP as isize - half as isize;
        let mut frame = Vec::with_capacity(FRAME_LEN);
        let mut energy = 0.0;
        for n in 0..FRAME_LEN {
            let idx = start + n as isize;
            let v = if idx >= 0 && (idx as usize) < n_out {
                spec[n].re * hann(n, FRAME_LEN)
            } else {
                0.0
            };
            energy += v * v;
            frame.push(v);
        }
        if energy > 0.0 {
            let g = (target / energy).sqrt();
            for (n, v) in frame.iter().enumerate() {
                let idx = start + n as isize;
                if idx >= 0 && (idx as usize) < n_out {
                    out[idx as usize] += v * g;
                }
            }
        }
    }
    Ok(ImpulseResponse {
        samples: out,
        sample_rate,
        seed,
    })
}

/// Result of [`convolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct Convolved {
    pub samples: Vec<f64>,
    /// Linear gain applied to reach the target peak.
    pub gain: f64,
}

/// FFT linear convolution of a dry signal with an IR, normalized so the
/// output peak sits at −1 dBFS.
pub fn convolve(ir: &ImpulseResponse, dry: &[f64], dry_rate: f64) -> Result<Convolved> {
    if ir.sample_rate != dry_rate {
        return Err(Error::invalid(format!(
            "sample rate mismatch: IR {} Hz, audio {dry_rate} Hz",
            ir.sample_rate
        )));
    }
    if ir.samples.is_empty() || dry.is_empty() {
        return Err(Error::invalid("cannot convolve an empty signal"));
    }
    let len = ir.samples.len() + dry.len() - 1;
    let n = next_pow2(len);
    let a = rfft(&ir.samples, n);
    let mut prod = rfft(dry, n);
    for (p, x) in prod.iter_mut().zip(&a) {
        *p *= x;
    }
    fft_in_place(&mut prod, true);
    let mut samples: Vec<f64> = prod[..len].iter().map(|c| c.re).collect();
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 0.0 {
        10f64.powf(PEAK_DBFS / 20.0) / peak
    } else {
        1.0
    };
    samples.iter_mut().for_each(|v| *v *= gain);
    Ok(Convolved { samples, gain })
}
