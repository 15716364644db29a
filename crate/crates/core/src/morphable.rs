//! Linear morphable face model: mean geometry plus coefficient-weighted
//! identity and expression bases, `S = μ + α_id·A_id + α_exp·A_exp`.
//!
//! Includes Gaussian/uniform parameter sampling, a procedural desk-scale toy
//! model (icosphere mean, smooth orthonormal random bases), binary model
//! persistence (`.fmm`), and Wavefront OBJ export for visual inspection.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::stream;

const MODEL_MAGIC: &[u8; 4] = b"FMM1";

/// Documented default first-term of the identity scale sequence
/// (raw parameter units; the shape pipeline later normalizes by 1e-5).
pub const ID_SCALE_0: f64 = 2.0e5;
/// Documented default first-term of the expression scale sequence.
pub const EXP_SCALE_0: f64 = 2.0;
/// Default geometric decay of both scale sequences.
pub const DEFAULT_SCALE_DECAY: f64 = 0.85;

/// Which coefficient family a vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Identity,
    Expression,
}

impl ParamGroup {
    pub fn tag(self) -> u64 {
        match self {
            ParamGroup::Identity => 0,
            ParamGroup::Expression => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Identity => "identity",
            ParamGroup::Expression => "expression",
        }
    }
}

/// A coefficient vector for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub group: ParamGroup,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(group: ParamGroup, len: usize) -> Self {
        ParamVector { group, values: vec![0.0; len] }
    }
}

/// A synthesized mesh: flattened xyz positions plus the model's topology.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceMesh {
    pub positions: Vec<f64>,
    pub triangles: Vec<[u32; 3]>,
}

/// The linear face model. Basis matrices are row-major `P × 3N`; the scale
/// arrays hold the per-parameter standard deviations used by both samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphableModel {
    pub vertex_count: usize,
    pub mean: Vec<f64>,
    pub id_basis: Vec<f64>,
    pub exp_basis: Vec<f64>,
    pub id_scale: Vec<f64>,
    pub exp_scale: Vec<f64>,
    pub triangles: Vec<[u32; 3]>,
}

impl MorphableModel {
    pub fn p_id(&self) -> usize {
        self.id_scale.len()
    }

    pub fn p_exp(&self) -> usize {
        self.exp_scale.len()
    }

    pub fn param_count(&self, group: ParamGroup) -> usize {
        match group {
            ParamGroup::Identity => self.p_id(),
            ParamGroup::Expression => self.p_exp(),
        }
    }

    pub fn scale(&self, group: ParamGroup) -> &[f64] {
        match group {
            ParamGroup::Identity => &self.id_scale,
            ParamGroup::Expression => &self.exp_scale,
        }
    }

    fn basis(&self, group: ParamGroup) -> &[f64] {
        match group {
            ParamGroup::Identity => &self.id_basis,
            ParamGroup::Expression => &self.exp_basis,
        }
    }

    /// Checks consistency of all fields; used after construction and load.
    pub fn validate(&self) -> Result<()> {
        let n3 = self.vertex_count * 3;
        if self.vertex_count == 0 {
            return Err(Error::Invalid("model has zero vertices".into()));
        }
        if self.mean.len() != n3 {
            return Err(Error::Mismatch { what: "mean length", expected: n3, actual: self.mean.len() });
        }
        for (name, basis, p) in [
            ("id_basis", &self.id_basis, self.p_id()),
            ("exp_basis", &self.exp_basis, self.p_exp()),
        ] {
            if basis.len() != p * n3 {
                return Err(Error::Mismatch {
                    what: if name == "id_basis" { "id_basis size" } else { "exp_basis size" },
                    expected: p * n3,
                    actual: basis.len(),
                });
            }
        }
        for s in self.id_scale.iter().chain(&self.exp_scale) {
            if !(*s > 0.0) {
                return Err(Error::Invalid(format!("scale entries must be strictly positive, got {s}")));
            }
        }
        let finite = self
            .mean
            .iter()
            .chain(&self.id_basis)
            .chain(&self.exp_basis)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Invalid("model contains non-finite entries".into()));
        }
        for tri in &self.triangles {
            for &ix in tri {
                if ix as usize >= self.vertex_count {
                    return Err(Error::Invalid(format!(
                        "triangle index {ix} out of range for {} vertices",
                        self.vertex_count
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_param(model: &MorphableModel, v: &ParamVector, group: ParamGroup) -> Result<()> {
    if v.group != group {
        return Err(Error::Invalid(format!(
            "expected a {} parameter vector, got {}",
            group.name(),
            v.group.name()
        )));
    }
    let expected = model.param_count(group);
    if v.values.len() != expected {
        return Err(Error::Mismatch {
            what: match group {
                ParamGroup::Identity => "identity coefficient count",
                ParamGroup::Expression => "expression coefficient count",
            },
            expected,
            actual: v.values.len(),
        });
    }
    Ok(())
}

/// Synthesize mesh positions: `mean + Σ id[k]·id_basis[k] + Σ exp[k]·exp_basis[k]`.
pub fn synthesize_face(
    model: &MorphableModel,
    id: &ParamVector,
    exp: &ParamVector,
) -> Result<FaceMesh> {
    check_param(model, id, ParamGroup::Identity)?;
    check_param(model, exp, ParamGroup::Expression)?;
    let n3 = model.vertex_count * 3;
    let mut positions = model.mean.clone();
    for coeffs in [id, exp] {
        let basis = model.basis(coeffs.group);
        for (k, &c) in coeffs.values.iter().enumerate() {
            if c != 0.0 {
                let row = &basis[k * n3..(k + 1) * n3];
                for (p, &b) in positions.iter_mut().zip(row) {
                    *p += c * b;
                }
            }
        }
    }
    Ok(FaceMesh { positions, triangles: model.triangles.clone() })
}

/// Draw `values[i] ~ Normal(0, scale[i])` (scale is a standard deviation).
pub fn sample_normal(model: &MorphableModel, group: ParamGroup, seed: u64) -> ParamVector {
    let mut rng = stream(seed, "sample-normal", &[group.tag()]);
    let values = model
        .scale(group)
        .iter()
        .map(|&s| {
            let z: f64 = rng.sample(StandardNormal);
            s * z
        })
        .collect();
    ParamVector { group, values }
}

/// Draw `values[i] ~ Uniform(−k·scale[i], +k·scale[i])`.
pub fn sample_uniform(
    model: &MorphableModel,
    group: ParamGroup,
    k: f64,
    seed: u64,
) -> Result<ParamVector> {
    if !(k > 0.0) {
        return Err(Error::Invalid(format!("uniform interval multiplier must be > 0, got {k}")));
    }
    let mut rng = stream(seed, "sample-uniform", &[group.tag()]);
    let values = model
        .scale(group)
        .iter()
        .map(|&s| k * s * rng.random_range(-1.0..1.0))
        .collect();
    Ok(ParamVector { group, values })
}

/// Construction knobs for the procedural toy model.
///
/// `vertex_count` is a minimum: the smallest icosphere subdivision with at
/// least that many vertices is used (12, 42, 162, 642, 2562, or 10242).
#[derive(Debug, Clone)]
pub struct ToyModelConfig {
    pub vertex_count: usize,
    pub p_id: usize,
    pub p_exp: usize,
    pub scale_decay: f64,
    pub id_scale_0: f64,
    pub exp_scale_0: f64,
    pub seed: u64,
}

impl ToyModelConfig {
    pub fn new(vertex_count: usize, p_id: usize, p_exp: usize, scale_decay: f64, seed: u64) -> Self {
        ToyModelConfig {
            vertex_count,
            p_id,
            p_exp,
            scale_decay,
            id_scale_0: ID_SCALE_0,
            exp_scale_0: EXP_SCALE_0,
            seed,
        }
    }
}

/// Build the desk-scale stand-in model with the documented default scale
/// magnitudes ([`ID_SCALE_0`], [`EXP_SCALE_0`]).
pub fn make_toy_model(
    vertex_count: usize,
    p_id: usize,
    p_exp: usize,
    scale_decay: f64,
    seed: u64,
) -> Result<MorphableModel> {
    make_toy_model_cfg(&ToyModelConfig::new(vertex_count, p_id, p_exp, scale_decay, seed))
}

/// Build the toy model with explicit scale magnitudes.
pub fn make_toy_model_cfg(cfg: &ToyModelConfig) -> Result<MorphableModel> {
    if cfg.vertex_count < 4 {
        return Err(Error::Invalid(format!(
            "vertex count must be at least 4, got {}",
            cfg.vertex_count
        )));
    }
    if cfg.p_id == 0 || cfg.p_exp == 0 {
        return Err(Error::Invalid("parameter counts must be at least 1".into()));
    }
    if !(cfg.scale_decay > 0.0 && cfg.scale_decay <= 1.0) {
        return Err(Error::Invalid(format!(
            "scale decay must lie in (0, 1], got {}",
            cfg.scale_decay
        )));
    }
    if !(cfg.id_scale_0 > 0.0) || !(cfg.exp_scale_0 > 0.0) {
        return Err(Error::Invalid("scale magnitudes must be strictly positive".into()));
    }

    let max_subdivisions = 5;
    let subdivisions = (0..=max_subdivisions)
        .find(|&n| icosphere_vertex_count(n) >= cfg.vertex_count)
        .ok_or_else(|| {
            Error::Invalid(format!(
                "no icosphere subdivision yields {} vertices (maximum {})",
                cfg.vertex_count,
                icosphere_vertex_count(max_subdivisions)
            ))
        })?;
    let (positions, triangles) = icosphere(subdivisions);
    let n = positions.len() / 3;
    for (name, p) in [("p_id", cfg.p_id), ("p_exp", cfg.p_exp)] {
        if p > 3 * n {
            return Err(Error::Invalid(format!(
                "{name}={p} exceeds the model's degrees of freedom (3N = {})",
                3 * n
            )));
        }
    }

    let id_basis = smooth_basis(&positions, cfg.p_id, stream(cfg.seed, "toy-basis", &[0]))?;
    let exp_basis = smooth_basis(&positions, cfg.p_exp, stream(cfg.seed, "toy-basis", &[1]))?;
    let geometric = |first: f64, len: usize| -> Vec<f64> {
        (0..len).map(|i| first * cfg.scale_decay.powi(i as i32)).collect()
    };

    let model = MorphableModel {
        vertex_count: n,
        mean: positions,
        id_basis,
        exp_basis,
        id_scale: geometric(cfg.id_scale_0, cfg.p_id),
        exp_scale: geometric(cfg.exp_scale_0, cfg.p_exp),
        triangles,
    };
    model.validate()?;
    Ok(model)
}

fn icosphere_vertex_count(subdivisions: usize) -> usize {
    10 * 4usize.pow(subdivisions as u32) + 2
}

/// Unit icosphere: icosahedron subdivided `n` times, midpoints projected onto
/// the sphere. Vertex order is deterministic.
fn icosphere(subdivisions: usize) -> (Vec<f64>, Vec<[u32; 3]>) {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    #[rustfmt::skip]
    let raw: [[f64; 3]; 12] = [
        [-1.0, phi, 0.0], [1.0, phi, 0.0], [-1.0, -phi, 0.0], [1.0, -phi, 0.0],
        [0.0, -1.0, phi], [0.0, 1.0, phi], [0.0, -1.0, -phi], [0.0, 1.0, -phi],
        [phi, 0.0, -1.0], [phi, 0.0, 1.0], [-phi, 0.0, -1.0], [-phi, 0.0, 1.0],
    ];
    let mut vertices: Vec<[f64; 3]> = raw.iter().map(|v| normalize3(*v)).collect();
    #[rustfmt::skip]
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for face in &faces {
            let mut mids = [0u32; 3];
            for e in 0..3 {
                let (a, b) = (face[e], face[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mids[e] = *midpoint.entry(key).or_insert_with(|| {
                    let pa = vertices[a as usize];
                    let pb = vertices[b as usize];
                    let m = normalize3([
                        (pa[0] + pb[0]) / 2.0,
                        (pa[1] + pb[1]) / 2.0,
                        (pa[2] + pb[2]) / 2.0,
                    ]);
                    vertices.push(m);
                    (vertices.len() - 1) as u32
                });
            }
            next.push([face[0], mids[0], mids[2]]);
            next.push([face[1], mids[1], mids[0]]);
            next.push([face[2], mids[2], mids[1]]);
            next.push([mids[0], mids[1], mids[2]]);
        }
        faces = next;
    }

    let mut flat = Vec::with_capacity(vertices.len() * 3);
    for v in &vertices {
        flat.extend_from_slice(v);
    }
    (flat, faces)
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// `p` smooth displacement fields over the vertex set, built from random
/// combinations of low-degree monomials in the unit-sphere coordinates and
/// orthonormalized by Gram–Schmidt (two passes).
fn smooth_basis(positions: &[f64], p: usize, mut rng: ChaCha8Rng) -> Result<Vec<f64>> {
    let n3 = positions.len();

    // Smallest monomial degree whose field space comfortably spans p rows.
    // Restricted to the unit sphere, polynomials of degree <= d span only
    // (d+1)^2 independent functions (x^2+y^2+z^2 = 1 collapses the rest),
    // and evaluation on n vertices caps the rank at n per component.
    let monomial_count = |d: usize| (d + 1) * (d + 2) * (d + 3) / 6;
    let sphere_dim = |d: usize| (d + 1) * (d + 1);
    let needed = (p + p / 4 + 3).min(n3);
    let degree = (1..).find(|&d| 3 * sphere_dim(d).min(n3 / 3) >= needed).unwrap();

    let mut exponents = Vec::with_capacity(monomial_count(degree));
    for total in 0..=degree {
        for a in 0..=total {
            for b in 0..=(total - a) {
                exponents.push((a, b, total - a - b));
            }
        }
    }

    // per-vertex monomial table, reused by every row
    let n = n3 / 3;
    let mut table = vec![0.0; n * exponents.len()];
    for v in 0..n {
        let (x, y, z) = (positions[3 * v], positions[3 * v + 1], positions[3 * v + 2]);
        for (m, &(a, b, c)) in exponents.iter().enumerate() {
            table[v * exponents.len() + m] =
                x.powi(a as i32) * y.powi(b as i32) * z.powi(c as i32);
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(p);
    for _ in 0..p {
        let coeffs: Vec<f64> = (0..3 * exponents.len())
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z
            })
            .collect();
        let mut row = vec![0.0; n3];
        for v in 0..n {
            let monos = &table[v * exponents.len()..(v + 1) * exponents.len()];
            for d in 0..3 {
                let c = &coeffs[d * exponents.len()..(d + 1) * exponents.len()];
                let mut acc = 0.0;
                for (cm, mv) in c.iter().zip(monos) {
                    acc += cm * mv;
                }
                row[3 * v + d] = acc;
            }
        }
        normalize(&mut row)?;
        for _pass in 0..2 {
            for q in &rows {
                let proj = dot(&row, q);
                for (r, qv) in row.iter_mut().zip(q) {
                    *r -= proj * qv;
                }
            }
        }
        normalize(&mut row)?;
        rows.push(row);
    }

    Ok(rows.into_iter().flatten().collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let n = dot(v, v).sqrt();
    if n < 1e-8 {
        return Err(Error::Invalid(
            "basis construction degenerated (rank-deficient random fields)".into(),
        ));
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    Ok(())
}

/// Write the model in the `.fmm` binary format (little-endian).
pub fn save_model(model: &MorphableModel, path: &Path) -> Result<()> {
    model.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    w.write_u32::<LittleEndian>(model.vertex_count as u32)?;
    w.write_u32::<LittleEndian>(model.p_id() as u32)?;
    w.write_u32::<LittleEndian>(model.p_exp() as u32)?;
    w.write_u32::<LittleEndian>(model.triangles.len() as u32)?;
    for section in [
        &model.mean,
        &model.id_basis,
        &model.exp_basis,
        &model.id_scale,
        &model.exp_scale,
    ] {
        for &v in section.iter() {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    for tri in &model.triangles {
        for &ix in tri {
            w.write_u32::<LittleEndian>(ix)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_f64_section<R: Read>(r: &mut R, count: usize, section: &'static str) -> Result<Vec<f64>> {
    let mut buf = vec![0.0; count];
    r.read_f64_into::<LittleEndian>(&mut buf)
        .map_err(|_| Error::Truncated { section })?;
    Ok(buf)
}

/// Load and validate a `.fmm` model file.
pub fn load_model(path: &Path) -> Result<MorphableModel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Truncated { section: "magic" })?;
    if &magic != MODEL_MAGIC {
        return Err(Error::BadMagic { expected: "FMM1", found: magic });
    }
    let n = r.read_u32::<LittleEndian>().map_err(|_| Error::Truncated { section: "header" })? as u64;
    let p_id = r.read_u32::<LittleEndian>().map_err(|_| Error::Truncated { section: "header" })? as u64;
    let p_exp = r.read_u32::<LittleEndian>().map_err(|_| Error::Truncated { section: "header" })? as u64;
    let t = r.read_u32::<LittleEndian>().map_err(|_| Error::Truncated { section: "header" })? as u64;

    let n3 = n.checked_mul(3).ok_or_else(overflow)?;
    let id_len = p_id.checked_mul(n3).ok_or_else(overflow)?;
    let exp_len = p_exp.checked_mul(n3).ok_or_else(overflow)?;
    let total = n3
        .checked_add(id_len)
        .and_then(|s| s.checked_add(exp_len))
        .and_then(|s| s.checked_add(p_id + p_exp))
        .ok_or_else(overflow)?;
    if total > (1u64 << 34) {
        return Err(overflow());
    }

    let mean = read_f64_section(&mut r, n3 as usize, "mean")?;
    let id_basis = read_f64_section(&mut r, id_len as usize, "id_basis")?;
    let exp_basis = read_f64_section(&mut r, exp_len as usize, "exp_basis")?;
    let id_scale = read_f64_section(&mut r, p_id as usize, "id_scale")?;
    let exp_scale = read_f64_section(&mut r, p_exp as usize, "exp_scale")?;

    let mut triangles = Vec::with_capacity(t as usize);
    for _ in 0..t {
        let mut tri = [0u32; 3];
        for slot in tri.iter_mut() {
            *slot = r
                .read_u32::<LittleEndian>()
                .map_err(|_| Error::Truncated { section: "triangles" })?;
        }
        triangles.push(tri);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Header("trailing bytes after triangle section".into()));
    }

    let model = MorphableModel {
        vertex_count: n as usize,
        mean,
        id_basis,
        exp_basis,
        id_scale,
        exp_scale,
        triangles,
    };
    model.validate()?;
    Ok(model)
}

fn overflow() -> Error {
    Error::Header("declared dimensions overflow the supported model size".into())
}

/// Render a mesh as Wavefront OBJ text: `v x y z` lines with fixed 6-decimal
/// formatting, then 1-based `f a b c` lines.
pub fn export_obj(mesh: &FaceMesh) -> String {
    let mut out = String::new();
    for v in mesh.positions.chunks_exact(3) {
        out.push_str(&format!("v {:.6} {:.6} {:.6}\n", v[0], v[1], v[2]));
    }
    for tri in &mesh.triangles {
        out.push_str(&format!("f {} {} {}\n", tri[0] + 1, tri[1] + 1, tri[2] + 1));
    }
    out
}
