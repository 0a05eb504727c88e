//! Blur corruptions on single `[c, h, w]` images.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

pub const MAX_SEVERITY: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlurKind {
    Glass,
    Motion,
    Zoom,
}

impl BlurKind {
    pub const ALL: [BlurKind; 3] = [BlurKind::Glass, BlurKind::Motion, BlurKind::Zoom];
}

impl fmt::Display for BlurKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlurKind::Glass => "glass",
            BlurKind::Motion => "motion",
            BlurKind::Zoom => "zoom",
        })
    }
}

impl FromStr for BlurKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glass" => Ok(BlurKind::Glass),
            "motion" => Ok(BlurKind::Motion),
            "zoom" => Ok(BlurKind::Zoom),
            other => Err(Error::InvalidArgument(format!("unknown blur `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: BlurKind,
    /// 0 (identity) to 5.
    pub severity: u8,
    /// Only used by glass blur.
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: BlurKind, severity: u8, seed: u64) -> Self {
        CorruptionSpec {
            kind,
            severity,
            seed,
        }
    }

    /// Metric suffix, e.g. `motion3`.
    pub fn tag(&self) -> String {
        format!("{}{}", self.kind, self.severity)
    }
}

/// `kind` + severity, e.g. `glass3`.
impl FromStr for CorruptionSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let split = s
            .find(|c: char| c.is_ascii_digit())
            .ok_or_else(|| Error::InvalidArgument(format!("corruption `{s}` lacks a severity")))?;
        let severity: u8 = s[split..]
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad severity in `{s}`")))?;
        if severity > MAX_SEVERITY {
            return Err(Error::InvalidArgument(format!("severity {severity} > {MAX_SEVERITY}")));
        }
        Ok(CorruptionSpec::new(s[..split].parse()?, severity, 0))
    }
}

/// Mirror index without repeating the edge sample (`d c b | a b c d | c b a`).
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

fn motion(src: &[f32], c: usize, h: usize, w: usize, severity: usize) -> Vec<f32> {
    let len = 2 * severity + 1;
    let mut out = vec![0.0; src.len()];
    for p in 0..c * h {
        let row = &src[p * w..(p + 1) * w];
        for x in 0..w {
            let acc: f64 = (-(severity as isize)..=severity as isize)
                .map(|d| row[reflect(x as isize + d, w)] as f64)
                .sum();
            out[p * w + x] = (acc / len as f64) as f32;
        }
    }
    out
}

fn bilinear(plane: &[f32], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let at = |yy: usize, xx: usize| plane[yy * w + xx] as f64;
    (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1))
}

/// Mean of center-crop-and-upscale zooms at factors `1 + 0.04 i`, `i = 0..=severity`.
fn zoom(src: &[f32], c: usize, h: usize, w: usize, severity: usize) -> Vec<f32> {
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let factors: Vec<f64> = (0..=severity).map(|i| 1.0 + 0.04 * i as f64).collect();
    let mut out = vec![0.0; src.len()];
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let sum: f64 = factors
                    .iter()
                    .map(|z| bilinear(plane, h, w, (y as f64 - cy) / z + cy, (x as f64 - cx) / z + cx))
                    .sum();
                out[(ch * h + y) * w + x] = (sum / factors.len() as f64) as f32;
            }
        }
    }
    out
}

/// `severity` scan-order passes; each pixel swaps (all channels) with a
/// random neighbour at offset in `{-1, 0, 1}^2`, skipped if outside.
fn glass(src: &[f32], c: usize, h: usize, w: usize, severity: usize, seed: u64) -> Vec<f32> {
    let mut out = src.to_vec();
    let mut rng = rng::seeded(seed);
    for _ in 0..severity {
        for y in 0..h {
            for x in 0..w {
                let ny = y as isize + rng.random_range(-1i64..=1) as isize;
                let nx = x as isize + rng.random_range(-1i64..=1) as isize;
                if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                    continue;
                }
                let (ny, nx) = (ny as usize, nx as usize);
                for ch in 0..c {
                    out.swap((ch * h + y) * w + x, (ch * h + ny) * w + nx);
                }
            }
        }
    }
    out
}

/// Applies a blur to one `[c, h, w]` image. Severity 0 returns the input
/// unchanged; outputs are clipped to `[0, 1]`.
pub fn corrupt(image: &Tensor, spec: &CorruptionSpec) -> Result<Tensor> {
    if spec.severity > MAX_SEVERITY {
        return Err(Error::InvalidArgument(format!(
            "severity {} outside 0..={MAX_SEVERITY}",
            spec.severity
        )));
    }
    let &[c, h, w] = image.shape() else {
        return Err(Error::InvalidArgument(format!(
            "expected a [c, h, w] image, got {:?}",
            image.shape()
        )));
    };
    if spec.severity == 0 {
        return Ok(image.clone());
    }
    let s = spec.severity as usize;
    let mut data = match spec.kind {
        BlurKind::Motion => motion(image.data(), c, h, w, s),
        BlurKind::Zoom => zoom(image.data(), c, h, w, s),
        BlurKind::Glass => glass(image.data(), c, h, w, s, spec.seed),
    };
    data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Tensor::new(image.shape().to_vec(), data)
}
