//! Integral (soft-argmax) keypoint extraction from per-keypoint probability
//! and depth maps, and pinhole back-projection.
//!
//! Pixel convention: `(u, v) = (column, row)`, origin at the center of the
//! top-left pixel. Grids are stored row-major.
//!
//! Binary file layout (little endian):
//!
//! ```text
//! b"KPHM" | version: u32 = 1 | width: u32 | height: u32 | num_keypoints: u32
//! num_keypoints × (height × width) f32 probability grids
//! num_keypoints × (height × width) f32 depth grids
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{KpamError, Result};
use crate::geometry::Vec3;
use crate::taskspec::from_json;

pub const HEATMAP_MAGIC: &[u8; 4] = b"KPHM";
pub const HEATMAP_VERSION: u32 = 1;

/// Probability mass may deviate this much from 1 before evaluation fails.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;
/// Loaded grids within this deviation are rescaled to unit mass.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    probability: Vec<Vec<f64>>,
    depth: Vec<Vec<f64>>,
}

impl Heatmap {
    /// Checks shapes and values; does not rescale.
    pub fn new(width: usize, height: usize, probability: Vec<Vec<f64>>, depth: Vec<Vec<f64>>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(KpamError::validation("heatmap", "width and height must be positive"));
        }
        if probability.is_empty() || probability.len() != depth.len() {
            return Err(KpamError::validation(
                "heatmap",
                format!("{} probability grids but {} depth grids", probability.len(), depth.len()),
            ));
        }
        let cells = width.checked_mul(height).ok_or_else(|| KpamError::validation("heatmap", "grid size overflows"))?;
        for (k, (g, d)) in probability.iter().zip(&depth).enumerate() {
            if g.len() != cells || d.len() != cells {
                return Err(KpamError::validation(format!("keypoints[{k}]"), format!("grids must have {cells} cells")));
            }
            if g.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(KpamError::validation(
                    format!("keypoints[{k}].probability"),
                    "values must be finite and >= 0",
                ));
            }
            if d.iter().any(|x| !x.is_finite()) {
                return Err(KpamError::validation(format!("keypoints[{k}].depth"), "values must be finite"));
            }
        }
        Ok(Self { width, height, probability, depth })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_keypoints(&self) -> usize {
        self.probability.len()
    }

    pub fn probability(&self, k: usize) -> &[f64] {
        &self.probability[k]
    }

    pub fn depth(&self, k: usize) -> &[f64] {
        &self.depth[k]
    }

    /// Rescales every grid to unit mass if it is within
    /// [`RENORMALIZE_TOLERANCE`] of it.
    pub fn renormalized(mut self) -> Result<Self> {
        for (index, g) in self.probability.iter_mut().enumerate() {
            let sum: f64 = g.iter().sum();
            if !((sum - 1.0).abs() <= RENORMALIZE_TOLERANCE) {
                return Err(KpamError::UnnormalizedHeatmap { index, sum });
            }
            g.iter_mut().for_each(|x| *x /= sum);
        }
        Ok(self)
    }

    fn checked_mass(&self, index: usize) -> Result<f64> {
        if index >= self.num_keypoints() {
            return Err(KpamError::IndexOutOfRange { index, len: self.num_keypoints() });
        }
        let sum: f64 = self.probability[index].iter().sum();
        if !((sum - 1.0).abs() <= NORMALIZATION_TOLERANCE) {
            return Err(KpamError::UnnormalizedHeatmap { index, sum });
        }
        Ok(sum)
    }
}

/// Expected pixel coordinates `(u, v)` under the keypoint's distribution.
pub fn integral_uv(hm: &Heatmap, keypoint_index: usize) -> Result<(f64, f64)> {
    let mass = hm.checked_mass(keypoint_index)?;
    let g = &hm.probability[keypoint_index];
    let (mut su, mut sv) = (0.0, 0.0);
    for (row, cells) in g.chunks_exact(hm.width).enumerate() {
        let mut row_mass = 0.0;
        for (col, &p) in cells.iter().enumerate() {
            su += col as f64 * p;
            row_mass += p;
        }
        sv += row as f64 * row_mass;
    }
    let u = (su / mass).clamp(0.0, (hm.width - 1) as f64);
    let v = (sv / mass).clamp(0.0, (hm.height - 1) as f64);
    Ok((u, v))
}

/// Probability-weighted mean depth, meters.
pub fn integral_depth(hm: &Heatmap, keypoint_index: usize) -> Result<f64> {
    let mass = hm.checked_mass(keypoint_index)?;
    let z: f64 = hm.probability[keypoint_index].iter().zip(&hm.depth[keypoint_index]).map(|(g, d)| g * d).sum();
    Ok(z / mass)
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(KpamError::validation("intrinsics", "fx and fy must be positive"));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(KpamError::validation("intrinsics", "cx and cy must be finite"));
        }
        Ok(())
    }
}

pub fn parse_intrinsics(text: &[u8]) -> Result<Intrinsics> {
    let intr: Intrinsics = from_json(text)?;
    intr.validate()?;
    Ok(intr)
}

/// Camera-frame point from pixel coordinates and depth.
pub fn backproject(u: f64, v: f64, z: f64, intrinsics: &Intrinsics) -> Result<Vec3> {
    intrinsics.validate()?;
    if !(z > 0.0 && z.is_finite()) {
        return Err(KpamError::NonPositiveDepth(z));
    }
    Ok(Vec3::new((u - intrinsics.cx) * z / intrinsics.fx, (v - intrinsics.cy) * z / intrinsics.fy, z))
}

/// Pixel coordinates of a camera-frame point.
pub fn project(p: &Vec3, intrinsics: &Intrinsics) -> Result<(f64, f64)> {
    intrinsics.validate()?;
    if !(p.z > 0.0) {
        return Err(KpamError::NonPositiveDepth(p.z));
    }
    Ok((intrinsics.fx * p.x / p.z + intrinsics.cx, intrinsics.fy * p.y / p.z + intrinsics.cy))
}

/// Camera-frame 3D keypoints for every grid in `hm`.
pub fn detect(hm: &Heatmap, intrinsics: &Intrinsics) -> Result<Vec<Vec3>> {
    (0..hm.num_keypoints())
        .map(|k| {
            let (u, v) = integral_uv(hm, k)?;
            backproject(u, v, integral_depth(hm, k)?, intrinsics)
        })
        .collect()
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Decodes the binary form and renormalizes.
pub fn read_heatmap_binary(bytes: &[u8]) -> Result<Heatmap> {
    const HEADER: usize = 20;
    if bytes.len() < HEADER || &bytes[..4] != HEATMAP_MAGIC {
        return Err(KpamError::Parse("not a KPHM heatmap".into()));
    }
    let version = read_u32(bytes, 4);
    if version != HEATMAP_VERSION {
        return Err(KpamError::Parse(format!("unsupported heatmap version {version}")));
    }
    let width = read_u32(bytes, 8) as usize;
    let height = read_u32(bytes, 12) as usize;
    let count = read_u32(bytes, 16) as usize;
    let cells = width.checked_mul(height);
    let expected =
        cells.and_then(|c| c.checked_mul(count)).and_then(|n| n.checked_mul(8)).and_then(|n| n.checked_add(HEADER));
    if expected != Some(bytes.len()) {
        return Err(KpamError::Parse(format!(
            "heatmap body length {} does not match header {width}x{height}x{count}",
            bytes.len() - HEADER
        )));
    }
    let cells = cells.expect("checked");
    let mut floats = bytes[HEADER..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
    let mut grids = |n: usize| -> Vec<Vec<f64>> { (0..n).map(|_| floats.by_ref().take(cells).collect()).collect() };
    let probability = grids(count);
    let depth = grids(count);
    Heatmap::new(width, height, probability, depth)?.renormalized()
}

/// Encodes to the binary form (values stored as f32).
pub fn write_heatmap_binary(hm: &Heatmap) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * hm.num_keypoints() * hm.width * hm.height);
    out.extend_from_slice(HEATMAP_MAGIC);
    for v in [HEATMAP_VERSION, hm.width as u32, hm.height as u32, hm.num_keypoints() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for grid in hm.probability.iter().chain(&hm.depth) {
        for &x in grid {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeatmapDocument {
    kpam_heatmap_version: u32,
    width: usize,
    height: usize,
    keypoints: Vec<HeatmapGrids>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeatmapGrids {
    /// Rows of cells.
    probability: Vec<Vec<f64>>,
    depth: Vec<Vec<f64>>,
}

/// Decodes the JSON debug form and renormalizes.
pub fn read_heatmap_json(text: &[u8]) -> Result<Heatmap> {
    let doc: HeatmapDocument = from_json(text)?;
    if doc.kpam_heatmap_version != HEATMAP_VERSION {
        return Err(KpamError::validation("kpam_heatmap_version", "unsupported version"));
    }
    let flatten = |k: usize, field: &str, rows: Vec<Vec<f64>>| -> Result<Vec<f64>> {
        if rows.len() != doc.height || rows.iter().any(|r| r.len() != doc.width) {
            return Err(KpamError::validation(
                format!("keypoints[{k}].{field}"),
                format!("expected {} rows of {} cells", doc.height, doc.width),
            ));
        }
        Ok(rows.into_iter().flatten().collect())
    };
    let mut probability = Vec::new();
    let mut depth = Vec::new();
    for (k, g) in doc.keypoints.into_iter().enumerate() {
        probability.push(flatten(k, "probability", g.probability)?);
        depth.push(flatten(k, "depth", g.depth)?);
    }
    Heatmap::new(doc.width, doc.height, probability, depth)?.renormalized()
}

pub fn write_heatmap_json(hm: &Heatmap) -> Vec<u8> {
    let rows = |g: &[f64]| g.chunks_exact(hm.width).map(<[f64]>::to_vec).collect();
    let doc = HeatmapDocument {
        kpam_heatmap_version: HEATMAP_VERSION,
        width: hm.width,
        height: hm.height,
        keypoints: (0..hm.num_keypoints())
            .map(|k| HeatmapGrids { probability: rows(&hm.probability[k]), depth: rows(&hm.depth[k]) })
            .collect(),
    };
    serde_json::to_vec(&doc).expect("heatmap serializes")
}

/// Reads either form, sniffing the magic bytes.
pub fn read_heatmap(bytes: &[u8]) -> Result<Heatmap> {
    if bytes.starts_with(HEATMAP_MAGIC) {
        read_heatmap_binary(bytes)
    } else {
        read_heatmap_json(bytes)
    }
}
