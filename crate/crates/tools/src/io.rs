//! File formats: Wavefront OBJ meshes, WAV audio, JSON-lines datasets and
//! small text helpers.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use asfnet_core::dataset::Record;
use asfnet_core::pointcloud::{ObjectFlags, TriangleMesh};
use asfnet_core::Vec3;
use sha2::{Digest, Sha256};

use crate::error::{ToolError, ToolResult};

pub fn read_bytes(path: &Path) -> ToolResult<Vec<u8>> {
    fs::read(path).map_err(|e| ToolError::io(path, e))
}

pub fn read_text(path: &Path) -> ToolResult<String> {
    fs::read_to_string(path).map_err(|e| ToolError::io(path, e))
}

/// Writes `bytes`, creating parent directories as needed.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> ToolResult<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| ToolError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> ToolResult<()> {
    fs::create_dir_all(dir).map_err(|e| ToolError::io(dir, e))
}

fn ensure_parent(path: &Path) -> ToolResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> ToolResult<String> {
    Ok(sha256_hex(&read_bytes(path)?))
}

/// `path` with `suffix` appended to the file name (`a.jsonl` → `a.jsonl.manifest.json`).
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Parses `v` and `f` records of an OBJ file. Faces may use `v/vt/vn`
/// syntax and negative indices; polygons are fan-triangulated.
pub fn parse_obj(text: &str, flags: ObjectFlags, path: &Path) -> ToolResult<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let err = |m: &str| ToolError::parse(path, format!("line {}: {m}", n + 1));
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| err("bad vertex coordinate"))?;
                if c.len() != 3 {
                    return Err(err("vertex needs three coordinates"));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in it {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| err("bad face index"))?;
                    let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(err("face index out of range"));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(err("face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriangleMesh::new(vertices, triangles, flags)?)
}

pub fn read_obj(path: &Path, flags: ObjectFlags) -> ToolResult<TriangleMesh> {
    parse_obj(&read_text(path)?, flags, path)
}

pub fn write_obj(path: &Path, mesh: &TriangleMesh) -> ToolResult<()> {
    let mut s = String::new();
    for v in &mesh.vertices {
        s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in &mesh.triangles {
        s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    write_bytes(path, s.as_bytes())
}

/// Mono samples in [-1, 1] and the sample rate. Multichannel files are
/// averaged down to one channel.
pub fn read_wav(path: &Path) -> ToolResult<(Vec<f64>, f64)> {
    let mut r = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = r.spec();
    let raw: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => r
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| wav_error(path, e))?,
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            r.samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()
                .map_err(|e| wav_error(path, e))?
        }
    };
    let ch = spec.channels.max(1) as usize;
    let mono = raw.chunks(ch).map(|c| c.iter().sum::<f64>() / ch as f64).collect();
    Ok((mono, spec.sample_rate as f64))
}

fn wav_error(path: &Path, e: hound::Error) -> ToolError {
    match e {
        hound::Error::IoError(io) => ToolError::io(path, io),
        other => ToolError::parse(path, other),
    }
}

/// Mono WAV, 32-bit float or 16-bit PCM (clipped to [-1, 1]).
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: f64, float: bool) -> ToolResult<()> {
    ensure_parent(path)?;
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate.round() as u32,
        bits_per_sample: if float { 32 } else { 16 },
        sample_format: if float {
            hound::SampleFormat::Float
        } else {
            hound::SampleFormat::Int
        },
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &s in samples {
        let res = if float {
            w.write_sample(s as f32)
        } else {
            w.write_sample((s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16)
        };
        res.map_err(|e| wav_error(path, e))?;
    }
    w.finalize().map_err(|e| wav_error(path, e))
}

/// One JSON record per line. Raw grid pressures are dropped: labels keep
/// their SH coefficients and the scatterers, from which the oracle can
/// regenerate the fields.
pub fn write_dataset(path: &Path, records: &[Record]) -> ToolResult<()> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| ToolError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        let mut slim = rec.clone();
        slim.labels.iter_mut().for_each(|l| l.pressures.clear());
        serde_json::to_writer(&mut w, &slim).map_err(|e| ToolError::parse(path, e))?;
        w.write_all(b"\n").map_err(|e| ToolError::io(path, e))?;
    }
    w.flush().map_err(|e| ToolError::io(path, e))
}

pub fn read_dataset(path: &Path) -> ToolResult<Vec<Record>> {
    let file = fs::File::open(path).map_err(|e| ToolError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ToolError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(&line).map_err(|e| ToolError::parse(path, format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(ToolError::parse(path, "dataset has no records"));
    }
    Ok(out)
}
