//! CSV dumps of the constructed function and their independent re-audit.
//!
//! `f.csv` rows, in order: one per node, five per probe (center, `+h`, `−h`,
//! `+ih`, `−ih`), one per real-axis sample. Coordinates are in the working
//! frame recorded in `f.json`.

use crate::config::RunConfig;
use crate::correction::STENCIL;
use crate::error::{Error, Result};
use crate::instance::InterpolationInstance;
use crate::pipeline::{Construction, ExitChecks, Normalization, Samples};
use crate::report::write_atomic;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

pub const CSV_NAME: &str = "f.csv";
pub const META_NAME: &str = "f.json";
const HEADER: &str = "x,y,re,im";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpMeta {
    pub config_hash: String,
    pub seed: u64,
    pub normalization: Normalization,
    pub epsilon: f64,
    pub fd_step: f64,
    pub nodes: usize,
    pub probes: usize,
    pub boundary: usize,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
}

fn row(out: &mut String, z: C64, f: C64) {
    writeln!(out, "{},{},{},{}", z.re, z.im, f.re, f.im).expect("string write");
}

pub fn write_dump(dir: &Path, c: &Construction, cfg: &RunConfig) -> Result<()> {
    let s = &c.samples;
    let mut csv = String::from(HEADER);
    csv.push('\n');
    for (z, f) in c.points.iter().zip(&s.nodes) {
        row(&mut csv, *z, *f);
    }
    for (z0, st) in &s.probes {
        let h = s.fd_step * z0.im;
        for ((dx, dy), f) in STENCIL.iter().zip(st) {
            row(&mut csv, z0 + C64::new(dx * h, dy * h), *f);
        }
    }
    for (x, f) in &s.boundary {
        row(&mut csv, C64::new(*x, 0.0), *f);
    }
    let g = &cfg.grid;
    let meta = DumpMeta {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        normalization: c.normalization,
        epsilon: c.epsilon,
        fd_step: s.fd_step,
        nodes: s.nodes.len(),
        probes: s.probes.len(),
        boundary: s.boundary.len(),
        x_range: [g.x_min, g.x_max],
        y_range: [g.y_min, g.y_max],
    };
    write_atomic(&dir.join(CSV_NAME), csv.as_bytes())?;
    let json = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
    write_atomic(&dir.join(META_NAME), json.as_bytes())
}

fn parse_rows(text: &str) -> Result<Vec<(C64, C64)>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(HEADER) {
        return Err(Error::Schema(format!("dump must start with the header {HEADER}")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Schema(format!("row {}: {e}", k + 2)))?;
            if v.len() != 4 {
                return Err(Error::Schema(format!("row {} has {} fields", k + 2, v.len())));
            }
            Ok((C64::new(v[0], v[1]), C64::new(v[2], v[3])))
        })
        .collect()
}

pub fn read_dump(dir: &Path) -> Result<(DumpMeta, Vec<(C64, C64)>)> {
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read_to_string(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
    };
    let meta: DumpMeta = serde_json::from_str(&read(META_NAME)?)?;
    let rows = parse_rows(&read(CSV_NAME)?)?;
    Ok((meta, rows))
}

/// Re-derives the three exit conditions from the dump alone.
///
/// Metadata that does not match the instance or the configuration is a
/// schema error.
pub fn verify_dump(dir: &Path, inst: &InterpolationInstance, cfg: &RunConfig) -> Result<ExitChecks> {
    let (meta, rows) = read_dump(dir)?;
    if meta.config_hash != cfg.hash() {
        return Err(Error::Schema("dump was produced under a different configuration".into()));
    }
    if meta.nodes != inst.len() || rows.len() != meta.nodes + 5 * meta.probes + meta.boundary {
        return Err(Error::Schema(format!(
            "dump holds {} rows, metadata and instance expect {} nodes, {} probes, {} boundary samples",
            rows.len(),
            inst.len(),
            meta.probes,
            meta.boundary
        )));
    }
    for (k, (&z, (zd, _))) in inst.points.iter().zip(&rows).enumerate() {
        let w = meta.normalization.forward(z);
        if (w - zd).norm() > 1e-12 * (1.0 + w.norm()) {
            return Err(Error::Schema(format!("node {k} sits at {zd} in the dump, expected {w}")));
        }
    }
    let nodes = rows[..meta.nodes].iter().map(|r| r.1).collect();
    let probes = rows[meta.nodes..meta.nodes + 5 * meta.probes]
        .chunks(5)
        .map(|ch| {
            let mut st = [C64::new(0.0, 0.0); 5];
            for (s, r) in st.iter_mut().zip(ch) {
                *s = r.1;
            }
            (ch[0].0, st)
        })
        .collect();
    let boundary = rows[meta.nodes + 5 * meta.probes..]
        .iter()
        .map(|(z, f)| {
            if z.im != 0.0 {
                return Err(Error::Schema(format!("boundary row at {z} is off the real axis")));
            }
            Ok((z.re, *f))
        })
        .collect::<Result<_>>()?;
    let samples = Samples {
        nodes,
        probes,
        boundary,
        fd_step: meta.fd_step,
    };
    Ok(ExitChecks::from_samples(&samples, &inst.values, cfg))
}
