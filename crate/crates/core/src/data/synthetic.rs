//! Download-free corpus: each class is a blurred arrangement of bars,
//! crosses, rings and blobs; samples jitter, rescale and add noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::rng;

/// Templates depend only on class index and image shape, never on the
/// sampling seed, so independently seeded splits share classes.
const TEMPLATE_SEED: u64 = 0x7E4D_1A7E;
const NOISE_STD: f64 = 0.1;
/// Minimum RMS distance between any two templates.
const MIN_SEPARATION: f64 = 0.18;

#[derive(Debug, Clone, Copy)]
enum Primitive {
    HBar,
    VBar,
    Cross,
    Blob,
    Ring,
    Diagonal,
}

fn draw_primitive(canvas: &mut [f64], h: usize, w: usize, rng: &mut rng::Rng64) {
    let kind = match rng.random_range(0..6) {
        0 => Primitive::HBar,
        1 => Primitive::VBar,
        2 => Primitive::Cross,
        3 => Primitive::Blob,
        4 => Primitive::Ring,
        _ => Primitive::Diagonal,
    };
    let cy = rng.random_range(0.25..0.75) * h as f64;
    let cx = rng.random_range(0.25..0.75) * w as f64;
    let extent = rng.random_range(0.15..0.35) * h.min(w) as f64;
    let thick = (h.min(w) as f64 / 14.0).max(1.0);
    for y in 0..h {
        for x in 0..w {
            let dy = y as f64 + 0.5 - cy;
            let dx = x as f64 + 0.5 - cx;
            let r = (dy * dy + dx * dx).sqrt();
            let hbar = dy.abs() <= thick && dx.abs() <= extent;
            let vbar = dx.abs() <= thick && dy.abs() <= extent;
            let on = match kind {
                Primitive::HBar => hbar,
                Primitive::VBar => vbar,
                Primitive::Cross => hbar || vbar,
                Primitive::Blob => r <= extent * 0.6,
                Primitive::Ring => (r - extent * 0.8).abs() <= thick,
                Primitive::Diagonal => (dy - dx).abs() <= thick * 1.4 && r <= extent,
            };
            if on {
                canvas[y * w + x] = 1.0;
            }
        }
    }
}

/// Separable Gaussian blur (sigma 1, radius 2) with clamped borders.
fn gaussian_blur(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let k: Vec<f64> = (-2i32..=2).map(|d| (-(d * d) as f64 / 2.0).exp()).collect();
    let norm: f64 = k.iter().sum();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (0..5)
                .map(|i| k[i] * src[y * w + clamp(x as isize + i as isize - 2, w)])
                .sum::<f64>()
                / norm;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (0..5)
                .map(|i| k[i] * tmp[clamp(y as isize + i as isize - 2, h) * w + x])
                .sum::<f64>()
                / norm;
        }
    }
    out
}

fn rms_distance(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Class templates, each `c*h*w` values in `[0, 1]`.
pub fn class_templates(classes: usize, [c, h, w]: [usize; 3]) -> Vec<Vec<f64>> {
    let mut rng = rng::seeded(rng::derive_seed(TEMPLATE_SEED, (h * 1000 + w) as u64));
    let mut planes: Vec<Vec<f64>> = Vec::with_capacity(classes);
    let mut attempts = 0;
    while planes.len() < classes {
        let mut canvas = vec![0.0; h * w];
        for _ in 0..rng.random_range(2..=3) {
            draw_primitive(&mut canvas, h, w, &mut rng);
        }
        let mut blurred = gaussian_blur(&canvas, h, w);
        let max = blurred.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            blurred.iter_mut().for_each(|v| *v /= max);
        }
        attempts += 1;
        // Tiny canvases can't host many distinct templates; relax then.
        let separation = if attempts > 200 { 0.0 } else { MIN_SEPARATION };
        if planes.iter().all(|p| rms_distance(p, &blurred) >= separation) {
            planes.push(blurred);
        }
    }
    let gains: Vec<f64> = (0..c).map(|ch| 1.0 - 0.2 * ch as f64 / c.max(1) as f64).collect();
    planes
        .into_iter()
        .map(|p| gains.iter().flat_map(|g| p.iter().map(move |v| v * g)).collect())
        .collect()
}

/// `n_per_class` samples of each class, interleaved by class. Each sample is
/// its class template shifted by up to one pixel, scaled by U(0.7, 1) and
/// perturbed with N(0, 0.1) noise, then clipped to `[0, 1]`.
pub fn make_synthetic(
    classes: usize,
    n_per_class: usize,
    shape: [usize; 3],
    seed: u64,
    split: Split,
) -> Result<LabeledDataset> {
    if classes < 2 {
        return Err(Error::InvalidArgument("synthetic data needs >= 2 classes".into()));
    }
    if shape.contains(&0) {
        return Err(Error::InvalidArgument(format!("bad image shape {shape:?}")));
    }
    let [c, h, w] = shape;
    let templates = class_templates(classes, shape);
    let noise = Normal::new(0.0, NOISE_STD).expect("valid std");
    let mut rng = rng::seeded(seed);
    let mut samples = Vec::with_capacity(classes * n_per_class);
    for _ in 0..n_per_class {
        for (label, t) in templates.iter().enumerate() {
            let dy = rng.random_range(-1i32..=1);
            let dx = rng.random_range(-1i32..=1);
            let gain = rng.random_range(0.7..1.0);
            let mut img = Vec::with_capacity(c * h * w);
            for ch in 0..c {
                for y in 0..h as i32 {
                    for x in 0..w as i32 {
                        let (sy, sx) = (y - dy, x - dx);
                        let base = if sy >= 0 && sx >= 0 && sy < h as i32 && sx < w as i32 {
                            t[(ch * h + sy as usize) * w + sx as usize]
                        } else {
                            0.0
                        };
                        let v = gain * base + noise.sample(&mut rng);
                        img.push(v.clamp(0.0, 1.0) as f32);
                    }
                }
            }
            samples.push((img, label));
        }
    }
    LabeledDataset::from_samples(shape, samples, split, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_keeps_shape() {
        let d = make_synthetic(3, 0, [1, 8, 8], 0, Split::Train).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.images().shape(), &[0, 1, 8, 8]);
        assert_eq!(d.class_count(), 3);
    }

    #[test]
    fn deterministic() {
        let a = make_synthetic(4, 5, [1, 12, 12], 9, Split::Train).unwrap();
        let b = make_synthetic(4, 5, [1, 12, 12], 9, Split::Train).unwrap();
        assert_eq!(a, b);
        let c = make_synthetic(4, 5, [1, 12, 12], 10, Split::Train).unwrap();
        assert_ne!(a.images(), c.images());
    }

    #[test]
    fn templates_are_separated() {
        let t = class_templates(10, [1, 28, 28]);
        for i in 0..10 {
            for j in 0..i {
                assert!(rms_distance(&t[i], &t[j]) >= MIN_SEPARATION);
            }
        }
    }

    #[test]
    fn rejects_single_class() {
        assert!(make_synthetic(1, 5, [1, 8, 8], 0, Split::Train).is_err());
    }
}
