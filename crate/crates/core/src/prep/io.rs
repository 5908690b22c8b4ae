//! Scene files.
//!
//! The native format is an 8-byte magic, a `u32` version, a `u32` particle
//! count, then per particle 14 little-endian `f32`: position (3), rotation
//! quaternion `w, x, y, z` (4), scale (3), opacity (1), colour (3).
//! Polygon (`.ply`) point clouds are imported as well.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{Quat, Vec3};
use crate::scene::Particle;

pub const SCENE_MAGIC: &[u8; 8] = b"TSSCENE\0";
pub const SCENE_VERSION: u32 = 1;
const RECORD_FLOATS: usize = 14;

/// Splat size given to imported points that carry no scale.
pub const DEFAULT_IMPORT_SCALE: f64 = 0.01;

/// Loads a native scene or a `.ply` point cloud, chosen by content.
pub fn load_scene(path: &Path) -> Result<Vec<Particle>> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let bytes = std::fs::read(path)?;
    let ctx = path.display().to_string();
    if bytes.is_empty() {
        return Err(Error::EmptyScene);
    }
    if bytes.starts_with(b"ply") {
        read_ply(&bytes, &ctx)
    } else {
        decode_scene(&bytes, &ctx)
    }
}

pub fn save_scene(path: &Path, particles: &[Particle]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&encode_scene(particles)?)?;
    w.flush()?;
    Ok(())
}

pub fn encode_scene(particles: &[Particle]) -> Result<Vec<u8>> {
    let count = u32::try_from(particles.len())
        .map_err(|_| Error::InvalidConfig("too many particles for the scene format".into()))?;
    let mut out = Vec::with_capacity(16 + particles.len() * RECORD_FLOATS * 4);
    out.extend_from_slice(SCENE_MAGIC);
    out.extend_from_slice(&SCENE_VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for p in particles {
        let q = p.rotation.into_inner();
        let rec = [
            p.position.x, p.position.y, p.position.z,
            q.w, q.i, q.j, q.k,
            p.scale.x, p.scale.y, p.scale.z,
            p.opacity,
            p.color.x, p.color.y, p.color.z,
        ];
        for v in rec {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_scene(bytes: &[u8], ctx: &str) -> Result<Vec<Particle>> {
    if bytes.len() < 16 || &bytes[..8] != SCENE_MAGIC {
        return Err(Error::parse(ctx, "missing scene magic"));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = word(8);
    if version != SCENE_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = word(12) as usize;
    if count == 0 {
        return Err(Error::EmptyScene);
    }
    let body = &bytes[16..];
    let rec_len = RECORD_FLOATS * 4;
    if body.len() != count * rec_len {
        let complete = body.len() / rec_len;
        return Err(Error::parse(
            ctx,
            format!("record {complete}: expected {count} records of {rec_len} bytes, found {} bytes", body.len()),
        ));
    }
    let particles = body
        .chunks_exact(rec_len)
        .enumerate()
        .map(|(i, rec)| {
            let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap()) as f64;
            let v: [f64; RECORD_FLOATS] = std::array::from_fn(f);
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::parse(ctx, format!("record {i}: non-finite value")));
            }
            let rotation = unit_quaternion(v[3], v[4], v[5], v[6])
                .ok_or_else(|| Error::parse(ctx, format!("record {i}: zero quaternion")))?;
            Ok(Particle::splat(
                Vec3::new(v[0], v[1], v[2]),
                rotation,
                Vec3::new(v[7], v[8], v[9]),
                v[10],
                Vec3::new(v[11], v[12], v[13]),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(particles)
}

/// Keeps stored quaternions bit-for-bit when they are unit to `f32`
/// precision, renormalizes otherwise.
fn unit_quaternion(w: f64, x: f64, y: f64, z: f64) -> Option<Quat> {
    let q = nalgebra::Quaternion::new(w, x, y, z);
    let n = q.norm();
    if !(n > 0.0) {
        return None;
    }
    Some(if (n - 1.0).abs() <= 1e-6 {
        Quat::new_unchecked(q)
    } else {
        Quat::new_normalize(q)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Element {
    name: String,
    count: usize,
    props: Vec<(String, Scalar)>,
    has_list: bool,
}

/// Zeroth-order spherical harmonic constant, used for splat exports that
/// store colour as `f_dc_*`.
const SH_C0: f64 = 0.282_094_791_773_878_14;

fn read_ply(bytes: &[u8], ctx: &str) -> Result<Vec<Particle>> {
    let mut reader = BufReader::new(bytes);
    let mut line = String::new();
    let mut binary = false;
    let mut elements: Vec<Element> = Vec::new();
    let mut header_len = 0usize;
    let mut line_no = 0usize;
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(Error::parse(ctx, "unterminated ply header"));
        }
        header_len += n;
        line_no += 1;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("ply") | Some("comment") | Some("obj_info") | None => {}
            Some("format") => match tok.next() {
                Some("ascii") => binary = false,
                Some("binary_little_endian") => binary = true,
                other => {
                    return Err(Error::parse(
                        ctx,
                        format!("line {line_no}: unsupported ply format {other:?}"),
                    ))
                }
            },
            Some("element") => {
                let name = tok.next().unwrap_or_default().to_string();
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(ctx, format!("line {line_no}: bad element count")))?;
                elements.push(Element { name, count, props: Vec::new(), has_list: false });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(ctx, format!("line {line_no}: property before element")))?;
                let ty = tok.next().unwrap_or_default();
                if ty == "list" {
                    el.has_list = true;
                    continue;
                }
                let scalar = Scalar::parse(ty)
                    .ok_or_else(|| Error::parse(ctx, format!("line {line_no}: unknown type {ty}")))?;
                el.props.push((tok.next().unwrap_or_default().to_string(), scalar));
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(Error::parse(ctx, format!("line {line_no}: unexpected `{other}`")))
            }
        }
    }
    let vi = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::parse(ctx, "no vertex element"))?;
    if elements[..=vi].iter().any(|e| e.has_list) {
        return Err(Error::parse(ctx, "list properties before vertex data are not supported"));
    }
    let vertex = &elements[vi];
    if vertex.count == 0 {
        return Err(Error::EmptyScene);
    }
    let find = |n: &str| vertex.props.iter().position(|(p, _)| p == n);
    let xyz = [find("x"), find("y"), find("z")];
    if xyz.iter().any(Option::is_none) {
        return Err(Error::parse(ctx, "vertex element lacks x, y or z"));
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(vertex.count);
    if binary {
        let skip: usize = elements[..vi]
            .iter()
            .map(|e| e.count * e.props.iter().map(|p| p.1.size()).sum::<usize>())
            .sum();
        let stride: usize = vertex.props.iter().map(|p| p.1.size()).sum();
        let data = &bytes[header_len..];
        if data.len() < skip + stride * vertex.count {
            return Err(Error::parse(ctx, "binary ply body is truncated"));
        }
        for r in 0..vertex.count {
            let mut off = skip + r * stride;
            let mut row = Vec::with_capacity(vertex.props.len());
            for (_, ty) in &vertex.props {
                row.push(ty.read_le(&data[off..]));
                off += ty.size();
            }
            rows.push(row);
        }
    } else {
        let mut rest = String::new();
        reader.read_to_string(&mut rest).map_err(|e| Error::parse(ctx, e))?;
        let mut lines = rest.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let skip: usize = elements[..vi].iter().map(|e| e.count).sum();
        for _ in 0..skip {
            lines.next();
        }
        for r in 0..vertex.count {
            let (k, l) = lines.next().ok_or_else(|| {
                Error::parse(ctx, format!("vertex {r}: unexpected end of data"))
            })?;
            let row: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(ctx, format!("line {}: {e}", line_no + k + 1)))?;
            if row.len() < vertex.props.len() {
                return Err(Error::parse(ctx, format!("line {}: too few values", line_no + k + 1)));
            }
            rows.push(row);
        }
    }

    let get = |row: &[f64], name: &str| find(name).map(|i| row[i]);
    let color_scale = |name: &str| match find(name).map(|i| vertex.props[i].1) {
        Some(Scalar::U8) => 1.0 / 255.0,
        Some(Scalar::U16) => 1.0 / 65535.0,
        _ => 1.0,
    };
    let (rs, gs, bs) = (color_scale("red"), color_scale("green"), color_scale("blue"));
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            let pos = Vec3::new(row[xyz[0].unwrap()], row[xyz[1].unwrap()], row[xyz[2].unwrap()]);
            if pos.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(ctx, format!("vertex {r}: non-finite position")));
            }
            let color = match (get(row, "red"), get(row, "green"), get(row, "blue")) {
                (Some(cr), Some(cg), Some(cb)) => Vec3::new(cr * rs, cg * gs, cb * bs),
                _ => match (get(row, "f_dc_0"), get(row, "f_dc_1"), get(row, "f_dc_2")) {
                    (Some(a), Some(b), Some(c)) => Vec3::new(a, b, c).map(|v| 0.5 + SH_C0 * v),
                    _ => Vec3::repeat(0.5),
                },
            }
            .map(|v| v.clamp(0.0, 1.0));
            // Splat exports store opacity as a logit and scales as logs.
            let opacity = get(row, "opacity").map_or(1.0, |o| 1.0 / (1.0 + (-o).exp()));
            let scale = match (get(row, "scale_0"), get(row, "scale_1"), get(row, "scale_2")) {
                (Some(a), Some(b), Some(c)) => Vec3::new(a, b, c).map(f64::exp),
                _ => Vec3::repeat(DEFAULT_IMPORT_SCALE),
            };
            let rotation = match (get(row, "rot_0"), get(row, "rot_1"), get(row, "rot_2"), get(row, "rot_3")) {
                (Some(w), Some(x), Some(y), Some(z)) => unit_quaternion(w, x, y, z).unwrap_or_else(Quat::identity),
                _ => Quat::identity(),
            };
            Ok(Particle::splat(pos, rotation, scale, opacity, color))
        })
        .collect()
}
