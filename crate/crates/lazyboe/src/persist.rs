//! Binary persistence of edge bundles.
//!
//! Bundles are large and reloaded often, so the on-disk format is a compact
//! little-endian layout with a checksum and provenance digests:
//!
//! ```text
//! magic            b"LZBE"
//! schema_version   u32
//! dof              u32
//! robot_digest     [u8; 32]   SHA-256 of the canonical robot+limits config
//! world_digest     [u8; 32]   SHA-256 of the canonical world config
//! theta            f64
//! generation       rng_seed u64, n_edges u64, steps_min u32, steps_max u32,
//!                  segment_len u32, dt f64, max_accel_jump f64,
//!                  attempt_budget_factor u64
//! annotation       u8 flag; if 1: p u64, theta f64, rng_seed u64
//! n_edges          u64
//! edge records     id u64, q0 [f64; dof], n_controls u32,
//!                  controls [f64; dof × n_controls], dt f64, qf [f64; dof],
//!                  p_lazy_prop f64, p_collision f64
//! checksum         [u8; 32]   SHA-256 of all preceding bytes
//! ```
//!
//! All floats are IEEE-754 bit patterns, so `load(save(b))` reproduces the
//! bundle field-for-field and same-seed builds serialize byte-identically.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::bundle::{AnnotationInfo, BundleMetadata, Edge, EdgeBundle, GenerationConfig};
use crate::{Error, JointVector, Result};

pub const MAGIC: &[u8; 4] = b"LZBE";
pub const SCHEMA_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, v: &[u8]) {
        self.0.extend_from_slice(v);
    }
    fn vector(&mut self, v: &JointVector) {
        for x in v.iter() {
            self.f64(*x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn vector(&mut self, dof: usize) -> Result<JointVector> {
        let mut v = JointVector::zeros(dof);
        for i in 0..dof {
            v[i] = self.f64()?;
        }
        Ok(v)
    }
}

/// Serialize a bundle to its binary byte layout (checksum included).
pub fn encode_bundle(bundle: &EdgeBundle) -> Vec<u8> {
    let meta = bundle.metadata();
    let dof = bundle
        .edges()
        .first()
        .map_or(0, |e| e.q0.len()) as u32;
    let mut w = Writer(Vec::new());
    w.bytes(MAGIC);
    w.u32(meta.schema_version);
    w.u32(dof);
    w.bytes(&meta.robot_digest);
    w.bytes(&meta.world_digest);
    w.f64(bundle.theta());
    w.u64(meta.rng_seed);
    w.u64(meta.generation.n_edges as u64);
    w.u32(meta.generation.steps_min as u32);
    w.u32(meta.generation.steps_max as u32);
    w.u32(meta.generation.segment_len as u32);
    w.f64(meta.generation.dt);
    w.f64(meta.generation.max_accel_jump);
    w.u64(meta.generation.attempt_budget_factor as u64);
    match meta.annotation {
        Some(a) => {
            w.u8(1);
            w.u64(a.p as u64);
            w.f64(a.theta);
            w.u64(a.rng_seed);
        }
        None => w.u8(0),
    }
    w.u64(bundle.len() as u64);
    for e in bundle.edges() {
        w.u64(e.id);
        w.vector(&e.q0);
        w.u32(e.controls.len() as u32);
        for c in &e.controls {
            w.vector(c);
        }
        w.f64(e.dt);
        w.vector(&e.qf);
        w.f64(e.p_lazy_prop);
        w.f64(e.p_collision);
    }
    let checksum = Sha256::digest(&w.0);
    w.bytes(&checksum);
    w.0
}

/// Write a bundle to `path`.
pub fn save_bundle(bundle: &EdgeBundle, path: &Path) -> Result<()> {
    fs::write(path, encode_bundle(bundle))?;
    Ok(())
}

/// Parse bundle bytes, verifying magic, schema version and checksum.
pub fn decode_bundle(buf: &[u8]) -> Result<EdgeBundle> {
    if buf.len() < 32 {
        return Err(Error::Format("file too short".into()));
    }
    let (body, stored) = buf.split_at(buf.len() - 32);
    let computed = Sha256::digest(body);
    if computed.as_slice() != stored {
        return Err(Error::ChecksumMismatch);
    }

    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let schema_version = r.u32()?;
    if schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersionMismatch { file: schema_version, supported: SCHEMA_VERSION });
    }
    let dof = r.u32()? as usize;
    let robot_digest: [u8; 32] = r.take(32)?.try_into().unwrap();
    let world_digest: [u8; 32] = r.take(32)?.try_into().unwrap();
    let theta = r.f64()?;
    let rng_seed = r.u64()?;
    let generation = GenerationConfig {
        n_edges: r.u64()? as usize,
        steps_min: r.u32()? as usize,
        steps_max: r.u32()? as usize,
        segment_len: r.u32()? as usize,
        dt: r.f64()?,
        max_accel_jump: r.f64()?,
        attempt_budget_factor: r.u64()? as usize,
        rng_seed,
    };
    let annotation = match r.u8()? {
        0 => None,
        1 => Some(AnnotationInfo { p: r.u64()? as usize, theta: r.f64()?, rng_seed: r.u64()? }),
        other => return Err(Error::Format(format!("bad annotation flag {other}"))),
    };
    let n_edges = r.u64()? as usize;
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let id = r.u64()?;
        let q0 = r.vector(dof)?;
        let n_controls = r.u32()? as usize;
        let mut controls = Vec::with_capacity(n_controls);
        for _ in 0..n_controls {
            controls.push(r.vector(dof)?);
        }
        let dt = r.f64()?;
        let qf = r.vector(dof)?;
        let p_lazy_prop = r.f64()?;
        let p_collision = r.f64()?;
        edges.push(Edge { id, q0, controls, dt, qf, p_lazy_prop, p_collision });
    }
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes after edge records".into()));
    }

    EdgeBundle::new(
        edges,
        theta,
        BundleMetadata {
            schema_version,
            rng_seed,
            robot_digest,
            world_digest,
            generation,
            annotation,
        },
    )
}

/// Load a bundle without provenance checks (used by `bundle info`).
pub fn load_bundle_unchecked(path: &Path) -> Result<EdgeBundle> {
    decode_bundle(&fs::read(path)?)
}

/// Load a bundle and reject it unless its digests match the active robot and
/// world configuration.
pub fn load_bundle(path: &Path, robot_digest: [u8; 32], world_digest: [u8; 32]) -> Result<EdgeBundle> {
    let bundle = load_bundle_unchecked(path)?;
    if bundle.metadata().robot_digest != robot_digest {
        return Err(Error::DigestMismatch("robot"));
    }
    if bundle.metadata().world_digest != world_digest {
        return Err(Error::DigestMismatch("world"));
    }
    Ok(bundle)
}
