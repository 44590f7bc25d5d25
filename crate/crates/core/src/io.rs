//! Binary interchange formats.
//!
//! All three formats share the same skeleton: a 4-byte magic, a u32
//! little-endian version, fixed-width little-endian arrays, and a UTF-8
//! JSON trailer running to the end of the file.
//!
//! Shape file (`ALFD`):
//! magic, version, N u32, N x 3 f32 positions, N u8 role codes
//! (0=interior, 1=wall, 2=inlet, 3=outlet), N x 9 f32 features, JSON
//! trailer `{id, params, centerline}`.
//!
//! Velocity file (`ALFV`):
//! magic, version, N u32, N x 3 f32 values, JSON trailer
//! `{shape_id, constants, inflow}`.
//!
//! Model checkpoint (`ALFM`):
//! magic, version, u32 JSON length, config JSON `{config, normalizer}`,
//! u64 parameter count, f64 parameter block.
//!
//! Positions, features, and written velocity values are f32 on disk;
//! shapes quantize at generation and the velocity writer quantizes, so a
//! write-then-read round trip reproduces arrays bitwise.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BifurcationParams, CenterlineSegment, PointRole, Shape};
use crate::math;
use crate::oracle::{FluidConstants, VelocityField};
use crate::surrogate::{FeatureNormalizer, ModelConfig, SurrogateModel};

pub const SHAPE_MAGIC: &[u8; 4] = b"ALFD";
pub const VELOCITY_MAGIC: &[u8; 4] = b"ALFV";
pub const MODEL_MAGIC: &[u8; 4] = b"ALFM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ShapeTrailer {
    id: String,
    params: Option<BifurcationParams>,
    centerline: Vec<CenterlineSegment>,
}

/// Provenance stored with a velocity file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityTrailer {
    pub shape_id: String,
    pub constants: FluidConstants,
    pub inflow: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModelHeader {
    config: ModelConfig,
    normalizer: FeatureNormalizer,
}

fn check_magic(format: &'static str, expect: &[u8; 4], got: &[u8; 4]) -> Result<()> {
    if expect != got {
        return Err(Error::Format {
            format,
            reason: format!("bad magic {got:?}"),
        });
    }
    Ok(())
}

fn check_version(format: &'static str, version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::Format {
            format,
            reason: format!("unsupported version {version}"),
        });
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f32s(r: &mut impl Read, count: usize) -> std::io::Result<Vec<f32>> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_f32s(w: &mut impl Write, values: impl Iterator<Item = f64>) -> std::io::Result<()> {
    for v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Writes a shape to an `ALFD` file.
pub fn write_shape(path: &Path, shape: &Shape, params: Option<&BifurcationParams>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SHAPE_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    write_f32s(&mut w, shape.points.iter().flat_map(|p| p.iter().copied()))?;
    let codes: Vec<u8> = shape.roles.iter().map(|r| r.code()).collect();
    w.write_all(&codes)?;
    write_f32s(&mut w, shape.features.iter().flat_map(|f| f.iter().copied()))?;
    let trailer = ShapeTrailer {
        id: shape.id.clone(),
        params: params.cloned(),
        centerline: shape.centerline.clone(),
    };
    serde_json::to_writer(&mut w, &trailer)?;
    w.flush()?;
    Ok(())
}

/// Reads an `ALFD` file back into a shape and its generator parameters.
pub fn read_shape(path: &Path) -> Result<(Shape, Option<BifurcationParams>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    check_magic("ALFD", SHAPE_MAGIC, &magic)?;
    check_version("ALFD", read_u32(&mut r)?)?;
    let n = read_u32(&mut r)? as usize;

    let pos = read_f32s(&mut r, n * 3)?;
    let points: Vec<[f64; 3]> = pos
        .chunks_exact(3)
        .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
        .collect();

    let mut codes = vec![0u8; n];
    r.read_exact(&mut codes)?;
    let roles: Vec<PointRole> = codes
        .iter()
        .map(|&c| PointRole::from_code(c))
        .collect::<Result<_>>()?;

    let feats = read_f32s(&mut r, n * 9)?;
    let features: Vec<[f64; 9]> = feats
        .chunks_exact(9)
        .map(|c| {
            let mut row = [0.0; 9];
            for (dst, src) in row.iter_mut().zip(c) {
                *dst = *src as f64;
            }
            row
        })
        .collect();

    let mut trailer_bytes = Vec::new();
    r.read_to_end(&mut trailer_bytes)?;
    let trailer: ShapeTrailer = serde_json::from_slice(&trailer_bytes)?;

    // Stored features must agree with recomputation from points+roles.
    let shape = Shape::new(trailer.id, points, roles, trailer.centerline)?;
    if shape.features != features {
        return Err(Error::Format {
            format: "ALFD",
            reason: "stored features disagree with recomputation".into(),
        });
    }
    Ok((shape, trailer.params))
}

/// Writes a velocity field to an `ALFV` file. Values are rounded through
/// f32 on the way out.
pub fn write_velocity_field(
    path: &Path,
    field: &VelocityField,
    trailer: &VelocityTrailer,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(VELOCITY_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(field.len() as u32).to_le_bytes())?;
    write_f32s(&mut w, field.values.iter().flat_map(|v| v.iter().copied()))?;
    serde_json::to_writer(&mut w, trailer)?;
    w.flush()?;
    Ok(())
}

/// Reads an `ALFV` file.
pub fn read_velocity_field(path: &Path) -> Result<(VelocityField, VelocityTrailer)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    check_magic("ALFV", VELOCITY_MAGIC, &magic)?;
    check_version("ALFV", read_u32(&mut r)?)?;
    let n = read_u32(&mut r)? as usize;
    let raw = read_f32s(&mut r, n * 3)?;
    let values: Vec<[f64; 3]> = raw
        .chunks_exact(3)
        .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
        .collect();
    let mut trailer_bytes = Vec::new();
    r.read_to_end(&mut trailer_bytes)?;
    let trailer: VelocityTrailer = serde_json::from_slice(&trailer_bytes)?;
    Ok((VelocityField::new(values), trailer))
}

/// Writes a model checkpoint to an `ALFM` file. Parameters are stored as
/// f64, so checkpoints round-trip bitwise.
pub fn write_model(path: &Path, model: &SurrogateModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let header = serde_json::to_vec(&ModelHeader {
        config: model.config.clone(),
        normalizer: model.normalizer.clone(),
    })?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    w.write_all(&(model.params.len() as u64).to_le_bytes())?;
    for p in &model.params {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `ALFM` checkpoint.
pub fn read_model(path: &Path) -> Result<SurrogateModel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    check_magic("ALFM", MODEL_MAGIC, &magic)?;
    check_version("ALFM", read_u32(&mut r)?)?;
    let header_len = read_u32(&mut r)? as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: ModelHeader = serde_json::from_slice(&header_bytes)?;
    let count = read_u64(&mut r)? as usize;
    if count != header.config.param_count() {
        return Err(Error::Format {
            format: "ALFM",
            reason: format!(
                "parameter count {count} does not match config layout {}",
                header.config.param_count()
            ),
        });
    }
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let params: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(SurrogateModel {
        config: header.config,
        params,
        normalizer: header.normalizer,
        train_log: Vec::new(),
    })
}

/// True when every component of the field is exactly representable in
/// f32, i.e. survives an `ALFV` round trip bitwise.
pub fn is_f32_clean(field: &VelocityField) -> bool {
    field
        .values
        .iter()
        .all(|v| v.iter().all(|&x| math::quantize_f32(x) == x))
}
