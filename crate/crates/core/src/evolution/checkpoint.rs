//! Binary checkpoint of a running [`Simulator`].
//!
//! Layout: the 8-byte magic `RNLSCKPT`, a little-endian `u32` header length, a
//! JSON header, then the raw little-endian `f64` payload: field samples as
//! interleaved `(re, im)`, each norm series in header order, and the
//! conservation log as `(t, mass, energy)` triples. Floats never pass through
//! text, so a round trip is bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ConservationEntry, Dealias, Equation, NormPair, NormSeries, Simulator, StepPolicy};
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};

const MAGIC: &[u8; 8] = b"RNLSCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    n: usize,
    r_max: u64,
    p: u64,
    nonlinear: bool,
    dt: u64,
    snapshot_stride: usize,
    log_stride: usize,
    dealias: Dealias,
    oversample_factor: u64,
    boundary_tol: u64,
    step: u64,
    /// Readable copy of `step * dt`; ignored on load.
    t: f64,
    pairs: Vec<PairHeader>,
    log_steps: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct PairHeader {
    q_t: u64,
    r_x: u64,
    gradient: bool,
    len: usize,
}

/// Complete integrator state at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub equation: Equation,
    pub policy: StepPolicy,
    pub step: u64,
    pub field: RadialField,
    pub norms: Vec<NormSeries>,
    pub log: Vec<ConservationEntry>,
}

impl Checkpoint {
    pub fn time(&self) -> f64 {
        self.step as f64 * self.policy.dt
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let grid = self.field.grid();
        let header = Header {
            version: FORMAT_VERSION,
            n: grid.n(),
            r_max: grid.r_max().to_bits(),
            p: self.equation.p.to_bits(),
            nonlinear: self.equation.nonlinear,
            dt: self.policy.dt.to_bits(),
            snapshot_stride: self.policy.snapshot_stride,
            log_stride: self.policy.log_stride,
            dealias: self.policy.dealias,
            oversample_factor: self.policy.oversample_factor.to_bits(),
            boundary_tol: self.policy.boundary_tol.to_bits(),
            step: self.step,
            t: self.time(),
            pairs: self
                .norms
                .iter()
                .map(|s| PairHeader {
                    q_t: s.pair.q_t.to_bits(),
                    r_x: s.pair.r_x.to_bits(),
                    gradient: s.pair.gradient,
                    len: s.values.len(),
                })
                .collect(),
            log_steps: self.log.iter().map(|e| e.step).collect(),
        };
        let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
        let mut out = Vec::with_capacity(12 + json.len() + 16 * grid.n());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        let mut put = |x: f64| out.extend_from_slice(&x.to_le_bytes());
        for v in self.field.values() {
            put(v.re);
            put(v.im);
        }
        for s in &self.norms {
            s.values.iter().for_each(|&x| put(x));
        }
        for e in &self.log {
            put(e.t);
            put(e.mass);
            put(e.energy);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic bytes"));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes.get(12..12 + len).ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| Error::Checkpoint(format!("malformed header: {e}")))?;
        if header.version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", header.version)));
        }
        let payload = &bytes[12 + len..];
        let expected = 2 * header.n + header.pairs.iter().map(|p| p.len).sum::<usize>() + 3 * header.log_steps.len();
        if payload.len() != 8 * expected {
            return Err(Error::Checkpoint(format!(
                "payload holds {} bytes, header describes {}",
                payload.len(),
                8 * expected
            )));
        }
        let mut floats = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut take = |k: usize| -> Vec<f64> { floats.by_ref().take(k).collect() };

        let grid = RadialGrid::new(f64::from_bits(header.r_max), header.n)?;
        let samples = take(2 * header.n);
        let values = samples.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let field = RadialField::new(grid, values)?;
        let norms = header
            .pairs
            .iter()
            .map(|p| NormSeries {
                pair: NormPair { q_t: f64::from_bits(p.q_t), r_x: f64::from_bits(p.r_x), gradient: p.gradient },
                values: take(p.len),
            })
            .collect();
        let log = header
            .log_steps
            .iter()
            .map(|&step| {
                let v = take(3);
                ConservationEntry { step, t: v[0], mass: v[1], energy: v[2] }
            })
            .collect();
        Ok(Self {
            equation: Equation { p: f64::from_bits(header.p), nonlinear: header.nonlinear },
            policy: StepPolicy {
                dt: f64::from_bits(header.dt),
                snapshot_stride: header.snapshot_stride,
                log_stride: header.log_stride,
                dealias: header.dealias,
                oversample_factor: f64::from_bits(header.oversample_factor),
                boundary_tol: f64::from_bits(header.boundary_tol),
            },
            step: header.step,
            field,
            norms,
            log,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        file.sync_all()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

impl Simulator {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            equation: self.equation,
            policy: self.policy,
            step: self.step,
            field: self.field.clone(),
            norms: self.norms.clone(),
            log: self.log.clone(),
        }
    }

    /// Continue from a checkpoint. Snapshots restart at the resume step.
    pub fn resume(ckpt: Checkpoint) -> Result<Self> {
        ckpt.equation.validate()?;
        ckpt.policy.check_phase_guard(ckpt.field.grid())?;
        let snapshot = super::Snapshot { step: ckpt.step, t: ckpt.time(), field: ckpt.field.clone() };
        let mut sim = Self::assemble(ckpt.field, ckpt.equation, ckpt.policy, ckpt.step);
        sim.norms = ckpt.norms;
        sim.log = ckpt.log;
        sim.snapshots.push(snapshot);
        Ok(sim)
    }
}
