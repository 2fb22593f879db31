//! CSV and sidecar formats.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! read back yields bit-identical values.

use super::study::{CellRecord, KlRow};
use crate::error::{Error, Result};
use crate::prior::TraceRow;
use crate::sim::ObservationSet;
use crate::wavelet::{BasisSpec, CoeffVector, TensorIndex};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("{what}: {s:?} is not a number")))
}

/// Metadata stored next to an observation CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationMeta {
    pub d_interval: f64,
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    /// JSON description of the generating field, if known.
    pub truth: Option<String>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut p = csv_path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// Writes `i,t,x1,...,xd` rows and the JSON sidecar.
pub fn write_observations(path: &Path, obs: &ObservationSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["i".to_string(), "t".to_string()];
    header.extend((1..=obs.dim).map(|k| format!("x{k}")));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..=obs.n() {
        let mut rec = vec![i.to_string(), (i as f64 * obs.d_interval).to_string()];
        rec.extend(obs.point(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    let meta = ObservationMeta { d_interval: obs.d_interval, n: obs.n(), dim: obs.dim, seed: obs.seed, truth: obs.truth_id.clone() };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta).map_err(|e| Error::Parse(e.to_string()))?)?;
    Ok(())
}

/// Reads an observation CSV; `D` and the seed come from the sidecar when
/// present, otherwise from the time column.
pub fn read_observations(path: &Path) -> Result<ObservationSet> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.len() < 3 || &header[0] != "i" || &header[1] != "t" {
        return Err(Error::Parse(format!("{}: expected header i,t,x1,...", path.display())));
    }
    let dim = header.len() - 2;
    let mut points = Vec::new();
    let mut times = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        times.push(parse_f64(&rec[1], "t")?);
        for k in 0..dim {
            points.push(parse_f64(&rec[k + 2], "coordinate")?);
        }
    }
    let side = sidecar_path(path);
    let meta: Option<ObservationMeta> = if side.exists() {
        Some(serde_json::from_str(&std::fs::read_to_string(&side)?).map_err(|e| Error::Parse(format!("{}: {e}", side.display())))?)
    } else {
        None
    };
    let d_interval = match &meta {
        Some(m) => m.d_interval,
        None if times.len() >= 2 => times[1] - times[0],
        None => return Err(Error::Parse("cannot infer the sampling interval from a single row".into())),
    };
    let mut obs = ObservationSet::new(dim, d_interval, meta.as_ref().map_or(0, |m| m.seed), points)?;
    if let Some(m) = meta {
        if m.n != obs.n() || m.dim != dim {
            return Err(Error::Parse(format!("sidecar says N = {}, d = {}; file has N = {}, d = {dim}", m.n, m.dim, obs.n())));
        }
        obs.truth_id = m.truth;
    }
    Ok(obs)
}

/// `l,kind,r1,...,rd,value`.
pub fn write_coefficients(path: &Path, coeffs: &CoeffVector) -> Result<()> {
    let d = coeffs.basis.dim();
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["l".to_string(), "kind".to_string()];
    header.extend((1..=d).map(|k| format!("r{k}")));
    header.push("value".into());
    w.write_record(&header).map_err(csv_err)?;
    for (idx, v) in coeffs.basis.indices().iter().zip(&coeffs.values) {
        let mut rec = vec![idx.level.to_string(), idx.kind(d)];
        rec.extend(idx.shift.iter().map(|r| r.to_string()));
        rec.push(v.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads coefficients written by [`write_coefficients`] into `basis`.
pub fn read_coefficients(path: &Path, basis: &std::sync::Arc<BasisSpec>) -> Result<CoeffVector> {
    let d = basis.dim();
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut values = vec![0.0; basis.len()];
    let mut seen = vec![false; basis.len()];
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != d + 3 {
            return Err(Error::Parse(format!("coefficient row has {} fields, expected {}", rec.len(), d + 3)));
        }
        let level: u32 = rec[0].parse().map_err(|_| Error::Parse(format!("bad level {:?}", &rec[0])))?;
        let pattern = TensorIndex::parse_kind(&rec[1])?;
        let shift = (0..d)
            .map(|k| rec[k + 2].parse::<i64>().map_err(|_| Error::Parse(format!("bad shift {:?}", &rec[k + 2]))))
            .collect::<Result<Vec<_>>>()?;
        let idx = TensorIndex { level, pattern, shift };
        let k = basis.position(&idx).ok_or_else(|| Error::Parse(format!("index {idx:?} is not in the basis")))?;
        values[k] = parse_f64(&rec[d + 2], "value")?;
        seen[k] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Parse("coefficient file does not cover the basis".into()));
    }
    CoeffVector::new(basis.clone(), values)
}

/// Gridded dump `x1,...,xd,f_hat,f_hat_star`.
pub fn write_field_dump(path: &Path, nodes: &[Vec<f64>], f_hat: &[f64], f_hat_star: &[f64]) -> Result<()> {
    let d = nodes.first().map_or(0, |x| x.len());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    header.push("f_hat".into());
    header.push("f_hat_star".into());
    w.write_record(&header).map_err(csv_err)?;
    for ((x, a), b) in nodes.iter().zip(f_hat).zip(f_hat_star) {
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        rec.push(a.to_string());
        rec.push(b.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends rows, writing the header only to a new or empty file. An existing
/// file must carry the same header.
pub fn append_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let head = header.join(",");
    let existing = path.exists() && std::fs::metadata(path)?.len() > 0;
    if existing {
        let mut first = String::new();
        BufReader::new(File::open(path)?).read_line(&mut first)?;
        if first.trim_end() != head {
            return Err(Error::Parse(format!("{} has header {:?}, expected {head:?}", path.display(), first.trim_end())));
        }
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if !existing {
        writeln!(f, "{head}")?;
    }
    for r in rows {
        writeln!(f, "{}", r.join(","))?;
    }
    Ok(())
}

/// `N,replicate,l2_error,runtime_s`.
pub fn append_rate_study(path: &Path, cells: &[CellRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| vec![c.n.to_string(), c.replicate.to_string(), c.error.to_string(), c.runtime_s.to_string()])
        .collect();
    append_csv(path, &["N", "replicate", "l2_error", "runtime_s"], &rows)
}

/// `N,replicate,l2_error,runtime_s,aux` for studies with a second metric.
pub fn append_cells_with_aux(path: &Path, cells: &[CellRecord], aux_name: &str) -> Result<()> {
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| vec![c.n.to_string(), c.replicate.to_string(), c.error.to_string(), c.runtime_s.to_string(), c.aux.to_string()])
        .collect();
    append_csv(path, &["N", "replicate", "l2_error", "runtime_s", aux_name], &rows)
}

/// `epsilon,N,mean_per_transition,var_sum,stderr`.
pub fn append_kl_sweep(path: &Path, rows: &[KlRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.epsilon.to_string(), r.n.to_string(), r.mean.to_string(), r.var_sum.to_string(), r.stderr.to_string()])
        .collect();
    append_csv(path, &["epsilon", "N", "mean_per_transition", "var_sum", "stderr"], &rows)
}

/// `iter,loglik,accept,l2_to_truth`.
pub fn write_chain_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["iter", "loglik", "accept", "l2_to_truth"]).map_err(csv_err)?;
    for t in trace {
        w.write_record([t.iter.to_string(), t.loglik.to_string(), (t.accept as u8).to_string(), t.l2_to_truth.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Git-style content hash: SHA-256 of `blob <len>\0<content>`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// `key,value` manifest, appended.
pub fn append_manifest(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let rows: Vec<Vec<String>> = entries.iter().map(|(k, v)| vec![k.clone(), v.replace(',', ";")]).collect();
    append_csv(path, &["key", "value"], &rows)
}
