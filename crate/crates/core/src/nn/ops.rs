//! Batch kernels over raw row-major slices. Every reduction accumulates in
//! `f64` and rounds once on store.

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn new(
        n: usize,
        input: [usize; 3],
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let [cin, h, w] = input;
        ConvGeom {
            n,
            cin,
            h,
            w,
            cout,
            k,
            stride,
            pad,
            oh: (h + 2 * pad - k) / stride + 1,
            ow: (w + 2 * pad - k) / stride + 1,
        }
    }

    pub fn out_len(&self) -> usize {
        self.n * self.cout * self.oh * self.ow
    }

    /// Outputs `lo..hi` whose input coordinate for kernel tap `t` lies in
    /// `0..limit`; output `o` reads input `o * stride + t - pad`.
    #[inline]
    fn valid(&self, t: usize, limit: usize, outs: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = if self.pad > t { (self.pad - t).div_ceil(s) } else { 0 };
        let hi = if limit + self.pad > t { (limit + self.pad - t).div_ceil(s) } else { 0 };
        (lo.min(outs), hi.min(outs).max(lo.min(outs)))
    }
}

/// Dot product in `f64` over four interleaved lanes, summed in a fixed order.
#[inline]
fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut lanes = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            lanes[l] += a[4 * i + l] as f64 * b[4 * i + l] as f64;
        }
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] as f64 * b[i] as f64;
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// `acc += alpha * x`.
#[inline]
fn axpy(acc: &mut [f64], alpha: f64, x: &[f32]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += alpha * *v as f64;
    }
}

pub(crate) fn dense_forward(
    x: &[f32],
    n: usize,
    fin: usize,
    weight: &[f32],
    bias: &[f32],
    fout: usize,
) -> Vec<f32> {
    let mut y = vec![0.0f32; n * fout];
    for s in 0..n {
        let xr = &x[s * fin..(s + 1) * fin];
        for j in 0..fout {
            let wr = &weight[j * fin..(j + 1) * fin];
            y[s * fout + j] = (bias[j] as f64 + dot(xr, wr)) as f32;
        }
    }
    y
}

/// Returns `(dx, dweight, dbias)`. `dx` is skipped when `need_dx` is false.
pub(crate) fn dense_backward(
    x: &[f32],
    n: usize,
    fin: usize,
    weight: &[f32],
    fout: usize,
    dy: &[f32],
    need_dx: bool,
) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let mut dw = vec![0.0f64; fout * fin];
    let mut db = vec![0.0f64; fout];
    let mut dx = if need_dx { vec![0.0f32; n * fin] } else { Vec::new() };
    let mut row = vec![0.0f64; fin];
    for s in 0..n {
        let xr = &x[s * fin..(s + 1) * fin];
        if need_dx {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        for j in 0..fout {
            let g = dy[s * fout + j] as f64;
            if g == 0.0 {
                continue;
            }
            db[j] += g;
            axpy(&mut dw[j * fin..(j + 1) * fin], g, xr);
            if need_dx {
                axpy(&mut row, g, &weight[j * fin..(j + 1) * fin]);
            }
        }
        if need_dx {
            for (d, v) in dx[s * fin..(s + 1) * fin].iter_mut().zip(&row) {
                *d = *v as f32;
            }
        }
    }
    (dx, to_f32(dw), to_f32(db))
}

pub(crate) fn conv2d_forward(x: &[f32], g: &ConvGeom, weight: &[f32], bias: &[f32]) -> Vec<f32> {
    let plane = g.oh * g.ow;
    let in_plane = g.h * g.w;
    let mut y = vec![0.0f32; g.out_len()];
    let mut acc = vec![0.0f64; plane];
    let mut strided = vec![0.0f32; g.ow];
    for s in 0..g.n {
        for co in 0..g.cout {
            acc.iter_mut().for_each(|v| *v = bias[co] as f64);
            for ci in 0..g.cin {
                let xp = &x[(s * g.cin + ci) * in_plane..(s * g.cin + ci + 1) * in_plane];
                for ky in 0..g.k {
                    let (oy0, oy1) = g.valid(ky, g.h, g.oh);
                    for kx in 0..g.k {
                        let wv = weight[((co * g.cin + ci) * g.k + ky) * g.k + kx] as f64;
                        let (ox0, ox1) = g.valid(kx, g.w, g.ow);
                        if ox0 >= ox1 {
                            continue;
                        }
                        let ix0 = ox0 * g.stride + kx - g.pad;
                        for oy in oy0..oy1 {
                            let iy = oy * g.stride + ky - g.pad;
                            let xrow = &xp[iy * g.w..(iy + 1) * g.w];
                            let arow = &mut acc[oy * g.ow + ox0..oy * g.ow + ox1];
                            if g.stride == 1 {
                                axpy(arow, wv, &xrow[ix0..ix0 + (ox1 - ox0)]);
                            } else {
                                for (j, v) in strided[..ox1 - ox0].iter_mut().enumerate() {
                                    *v = xrow[ix0 + j * g.stride];
                                }
                                axpy(arow, wv, &strided[..ox1 - ox0]);
                            }
                        }
                    }
                }
            }
            let base = (s * g.cout + co) * plane;
            for (d, a) in y[base..base + plane].iter_mut().zip(&acc) {
                *d = *a as f32;
            }
        }
    }
    y
}

pub(crate) fn conv2d_backward(
    x: &[f32],
    g: &ConvGeom,
    weight: &[f32],
    dy: &[f32],
    need_dx: bool,
) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let plane = g.oh * g.ow;
    let in_plane = g.h * g.w;
    let mut dw = vec![0.0f64; weight.len()];
    let mut db = vec![0.0f64; g.cout];
    let mut dx = if need_dx {
        vec![0.0f64; g.n * g.cin * in_plane]
    } else {
        Vec::new()
    };
    let mut xs = vec![0.0f32; g.ow];
    for s in 0..g.n {
        for co in 0..g.cout {
            let dyp = &dy[(s * g.cout + co) * plane..(s * g.cout + co + 1) * plane];
            db[co] += dyp.iter().map(|v| *v as f64).sum::<f64>();
            for ci in 0..g.cin {
                let xoff = (s * g.cin + ci) * in_plane;
                let xp = &x[xoff..xoff + in_plane];
                for ky in 0..g.k {
                    let (oy0, oy1) = g.valid(ky, g.h, g.oh);
                    for kx in 0..g.k {
                        let (ox0, ox1) = g.valid(kx, g.w, g.ow);
                        if ox0 >= ox1 {
                            continue;
                        }
                        let widx = ((co * g.cin + ci) * g.k + ky) * g.k + kx;
                        let wv = weight[widx] as f64;
                        let ix0 = ox0 * g.stride + kx - g.pad;
                        let len = ox1 - ox0;
                        let mut acc = 0.0f64;
                        for oy in oy0..oy1 {
                            let iy = oy * g.stride + ky - g.pad;
                            let grow = &dyp[oy * g.ow + ox0..oy * g.ow + ox1];
                            let xrow = &xp[iy * g.w..(iy + 1) * g.w];
                            if g.stride == 1 {
                                acc += dot(grow, &xrow[ix0..ix0 + len]);
                                if need_dx {
                                    let d = &mut dx[xoff + iy * g.w + ix0..xoff + iy * g.w + ix0 + len];
                                    axpy(d, wv, grow);
                                }
                            } else {
                                for (j, v) in xs[..len].iter_mut().enumerate() {
                                    *v = xrow[ix0 + j * g.stride];
                                }
                                acc += dot(grow, &xs[..len]);
                                if need_dx {
                                    for (j, gv) in grow.iter().enumerate() {
                                        dx[xoff + iy * g.w + ix0 + j * g.stride] += *gv as f64 * wv;
                                    }
                                }
                            }
                        }
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
    (to_f32(dx), to_f32(dw), to_f32(db))
}

/// Max pooling without padding. Ties resolve to the first position in
/// scan order. Returns outputs and flat input indices of the winners.
pub(crate) fn maxpool_forward(
    x: &[f32],
    n: usize,
    [c, h, w]: [usize; 3],
    k: usize,
    stride: usize,
) -> (Vec<f32>, Vec<usize>) {
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let mut y = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::with_capacity(n * c * oh * ow);
    for p in 0..n * c {
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f32::NEG_INFINITY;
                let mut best_i = base + oy * stride * w + ox * stride;
                for ky in 0..k {
                    for kx in 0..k {
                        let i = base + (oy * stride + ky) * w + ox * stride + kx;
                        if x[i] > best {
                            best = x[i];
                            best_i = i;
                        }
                    }
                }
                y.push(x[best_i]);
                arg.push(best_i);
            }
        }
    }
    (y, arg)
}

pub(crate) fn maxpool_backward(dy: &[f32], argmax: &[usize], in_len: usize) -> Vec<f32> {
    let mut dx = vec![0.0f64; in_len];
    for (g, &i) in dy.iter().zip(argmax) {
        dx[i] += *g as f64;
    }
    to_f32(dx)
}

pub(crate) fn relu_forward(x: &[f32]) -> Vec<f32> {
    x.iter().map(|v| v.max(0.0)).collect()
}

/// Gates `dy` by the forward output (`out > 0`); zero gradient at the kink.
pub(crate) fn relu_backward(out: &[f32], dy: &[f32]) -> Vec<f32> {
    out.iter()
        .zip(dy)
        .map(|(o, g)| if *o > 0.0 { *g } else { 0.0 })
        .collect()
}

pub(crate) fn gap_forward(x: &[f32], n: usize, c: usize, plane: usize) -> Vec<f32> {
    (0..n * c)
        .map(|p| {
            let s: f64 = x[p * plane..(p + 1) * plane].iter().map(|v| *v as f64).sum();
            (s / plane as f64) as f32
        })
        .collect()
}

pub(crate) fn gap_backward(dy: &[f32], plane: usize) -> Vec<f32> {
    let mut dx = Vec::with_capacity(dy.len() * plane);
    for g in dy {
        let v = (*g as f64 / plane as f64) as f32;
        dx.extend(std::iter::repeat_n(v, plane));
    }
    dx
}

pub(crate) fn add_into(dst: &mut [f32], src: &[f32]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = (*d as f64 + *s as f64) as f32;
    }
}

fn to_f32(v: Vec<f64>) -> Vec<f32> {
    v.into_iter().map(|x| x as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_identity_kernel() {
        let x: Vec<f32> = (0..9).map(|v| v as f32).collect();
        let g = ConvGeom::new(1, [1, 3, 3], 1, 3, 1, 1);
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        assert_eq!(conv2d_forward(&x, &g, &w, &[0.0]), x);
    }

    #[test]
    fn conv_sums_neighbourhood() {
        let x = vec![1.0f32; 9];
        let g = ConvGeom::new(1, [1, 3, 3], 1, 3, 1, 1);
        let y = conv2d_forward(&x, &g, &[1.0; 9], &[0.5]);
        assert_eq!(y, vec![4.5, 6.5, 4.5, 6.5, 9.5, 6.5, 4.5, 6.5, 4.5]);
    }

    #[test]
    fn maxpool_picks_first_of_ties() {
        let x = vec![1.0, 1.0, 0.0, 1.0];
        let (y, arg) = maxpool_forward(&x, 1, [1, 2, 2], 2, 2);
        assert_eq!(y, vec![1.0]);
        assert_eq!(arg, vec![0]);
        assert_eq!(maxpool_backward(&[2.0], &arg, 4), vec![2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dense_matches_hand_product() {
        // [1 2] . [[1 0],[0 1],[1 1]]^T + [0, 0, 1]
        let y = dense_forward(&[1.0, 2.0], 1, 2, &[1., 0., 0., 1., 1., 1.], &[0., 0., 1.], 3);
        assert_eq!(y, vec![1.0, 2.0, 4.0]);
    }

    fn naive_conv(x: &[f32], g: &ConvGeom, w: &[f32], b: &[f32]) -> Vec<f64> {
        let mut y = vec![0.0; g.out_len()];
        for s in 0..g.n {
            for co in 0..g.cout {
                for oy in 0..g.oh {
                    for ox in 0..g.ow {
                        let mut acc = b[co] as f64;
                        for ci in 0..g.cin {
                            for ky in 0..g.k {
                                for kx in 0..g.k {
                                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                                    let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                                    if iy < 0 || ix < 0 || iy >= g.h as isize || ix >= g.w as isize {
                                        continue;
                                    }
                                    let xi = ((s * g.cin + ci) * g.h + iy as usize) * g.w + ix as usize;
                                    acc += x[xi] as f64 * w[((co * g.cin + ci) * g.k + ky) * g.k + kx] as f64;
                                }
                            }
                        }
                        y[((s * g.cout + co) * g.oh + oy) * g.ow + ox] = acc;
                    }
                }
            }
        }
        y
    }

    #[test]
    fn strided_padded_conv_matches_direct_sum() {
        for (stride, pad, k) in [(2, 1, 3), (1, 0, 3), (2, 0, 1), (3, 2, 3)] {
            let g = ConvGeom::new(2, [2, 7, 6], 3, k, stride, pad);
            let x: Vec<f32> = (0..2 * 2 * 7 * 6).map(|i| ((i * 37 % 11) as f32 - 5.0) / 4.0).collect();
            let w: Vec<f32> = (0..3 * 2 * k * k).map(|i| ((i * 13 % 7) as f32 - 3.0) / 8.0).collect();
            let b = [0.25, -0.5, 0.0];
            let got = conv2d_forward(&x, &g, &w, &b);
            let want = naive_conv(&x, &g, &w, &b);
            for (a, e) in got.iter().zip(&want) {
                assert!((*a as f64 - e).abs() < 1e-5, "stride {stride} pad {pad}: {a} vs {e}");
            }
        }
    }
}
