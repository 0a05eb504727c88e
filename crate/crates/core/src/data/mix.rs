use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixMode {
    /// `ratio * a + (1 - ratio) * b`.
    Blend,
    /// A seeded rectangle covering `(1 - ratio)` of the area is copied from `b`.
    Cutmix,
}

/// Height and width of the cutmix patch for a given keep ratio.
pub fn cutmix_patch(h: usize, w: usize, ratio: f64) -> (usize, usize) {
    let target = (1.0 - ratio) * (h * w) as f64;
    let ph = ((h as f64) * (1.0 - ratio).sqrt()).round().clamp(0.0, h as f64) as usize;
    if ph == 0 {
        return (0, 0);
    }
    let pw = (target / ph as f64).round().clamp(0.0, w as f64) as usize;
    (ph, pw)
}

/// Mixes two `[c, h, w]` images. The label follows the dominant component:
/// `a`'s when `ratio >= 0.5`, otherwise `b`'s.
pub fn mix_samples(
    a: (&Tensor, usize),
    b: (&Tensor, usize),
    ratio: f64,
    mode: MixMode,
    seed: u64,
) -> Result<(Tensor, usize)> {
    let (ia, la) = a;
    let (ib, lb) = b;
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidArgument(format!("mix ratio {ratio} outside [0, 1]")));
    }
    if ia.shape() != ib.shape() || ia.shape().len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "cannot mix {:?} with {:?}",
            ia.shape(),
            ib.shape()
        )));
    }
    let label = if ratio >= 0.5 { la } else { lb };
    if ratio == 1.0 {
        return Ok((ia.clone(), label));
    }
    let out = match mode {
        MixMode::Blend => {
            let data = ia
                .data()
                .iter()
                .zip(ib.data())
                .map(|(x, y)| (ratio * *x as f64 + (1.0 - ratio) * *y as f64).clamp(0.0, 1.0) as f32)
                .collect();
            Tensor::new(ia.shape().to_vec(), data)?
        }
        MixMode::Cutmix => {
            let (c, h, w) = (ia.shape()[0], ia.shape()[1], ia.shape()[2]);
            let (ph, pw) = cutmix_patch(h, w, ratio);
            let mut rng = rng::seeded(seed);
            let y0 = rng.random_range(0..=h - ph);
            let x0 = rng.random_range(0..=w - pw);
            let mut out = ia.clone();
            let data = out.data_mut();
            for ch in 0..c {
                for y in y0..y0 + ph {
                    for x in x0..x0 + pw {
                        let i = (ch * h + y) * w + x;
                        data[i] = ib.data()[i];
                    }
                }
            }
            out
        }
    };
    Ok((out, label))
}
