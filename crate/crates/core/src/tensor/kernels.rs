//! Slice-level compute kernels shared by the tape ops and the tape-free
//! inference paths. Convolutions lower to im2col plus a single GEMM per item.

/// Geometry of a batched dilated 1-D convolution.
#[derive(Debug, Clone, Copy)]
pub struct Conv1dDims {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub len: usize,
    pub taps: usize,
    pub dilation: usize,
}

/// Geometry of a batched same-padded 2-D convolution.
#[derive(Debug, Clone, Copy)]
pub struct Conv2dDims {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub height: usize,
    pub width: usize,
    pub kh: usize,
    pub kw: usize,
}

impl Conv2dDims {
    fn pad_top(&self) -> usize {
        (self.kh - 1) / 2
    }
    fn pad_left(&self) -> usize {
        (self.kw - 1) / 2
    }
}

/// `c = a · b + beta · c` for row-major `a: m×k`, `b: k×n`, `c: m×n`.
/// `trans_a`/`trans_b` read the operand as stored transposed.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    trans_a: bool,
    b: &[f32],
    trans_b: bool,
    beta: f32,
    c: &mut [f32],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn im2col_1d(x: &[f32], d: &Conv1dDims, cols: &mut [f32]) {
    let t = d.len;
    for i in 0..d.c_in {
        let src = &x[i * t..(i + 1) * t];
        for j in 0..d.taps {
            let row = &mut cols[(i * d.taps + j) * t..(i * d.taps + j + 1) * t];
            let shift = j * d.dilation;
            if shift >= t {
                row.fill(0.0);
            } else {
                row[..t - shift].copy_from_slice(&src[shift..]);
                row[t - shift..].fill(0.0);
            }
        }
    }
}

fn col2im_1d(cols: &[f32], d: &Conv1dDims, dx: &mut [f32]) {
    let t = d.len;
    for i in 0..d.c_in {
        let dst = &mut dx[i * t..(i + 1) * t];
        for j in 0..d.taps {
            let shift = j * d.dilation;
            if shift >= t {
                continue;
            }
            let row = &cols[(i * d.taps + j) * t..(i * d.taps + j) * t + (t - shift)];
            for (o, v) in dst[shift..].iter_mut().zip(row) {
                *o += *v;
            }
        }
    }
}

/// `out[n, c, t] = Σ_{i,j} w[c, i, j] · x[n, i, t + j·dilation]`, zero past the end.
pub fn conv1d_forward(x: &[f32], w: &[f32], d: &Conv1dDims, out: &mut [f32]) {
    let rows = d.c_in * d.taps;
    let mut cols = vec![0.0f32; rows * d.len];
    for b in 0..d.batch {
        let xb = &x[b * d.c_in * d.len..(b + 1) * d.c_in * d.len];
        im2col_1d(xb, d, &mut cols);
        let ob = &mut out[b * d.c_out * d.len..(b + 1) * d.c_out * d.len];
        gemm(d.c_out, rows, d.len, w, false, &cols, false, 0.0, ob);
    }
}

/// Accumulates input and/or weight gradients of [`conv1d_forward`].
pub fn conv1d_backward(
    x: &[f32],
    w: &[f32],
    dout: &[f32],
    d: &Conv1dDims,
    mut dx: Option<&mut [f32]>,
    mut dw: Option<&mut [f32]>,
) {
    let rows = d.c_in * d.taps;
    let mut cols = vec![0.0f32; rows * d.len];
    for b in 0..d.batch {
        let ob = &dout[b * d.c_out * d.len..(b + 1) * d.c_out * d.len];
        if let Some(dw) = dw.as_deref_mut() {
            let xb = &x[b * d.c_in * d.len..(b + 1) * d.c_in * d.len];
            im2col_1d(xb, d, &mut cols);
            gemm(d.c_out, d.len, rows, ob, false, &cols, true, 1.0, dw);
        }
        if let Some(dx) = dx.as_deref_mut() {
            gemm(rows, d.c_out, d.len, w, true, ob, false, 0.0, &mut cols);
            let dxb = &mut dx[b * d.c_in * d.len..(b + 1) * d.c_in * d.len];
            col2im_1d(&cols, d, dxb);
        }
    }
}

fn im2col_2d(x: &[f32], d: &Conv2dDims, cols: &mut [f32]) {
    let (h, w) = (d.height, d.width);
    let hw = h * w;
    let (pt, pl) = (d.pad_top(), d.pad_left());
    for i in 0..d.c_in {
        let plane = &x[i * hw..(i + 1) * hw];
        for a in 0..d.kh {
            for bb in 0..d.kw {
                let row_idx = (i * d.kh + a) * d.kw + bb;
                let row = &mut cols[row_idx * hw..(row_idx + 1) * hw];
                // valid output columns: 0 <= ow + bb - pl < w
                let lo = pl.saturating_sub(bb);
                let hi = (w + pl).saturating_sub(bb).min(w);
                for oh in 0..h {
                    let dst = &mut row[oh * w..(oh + 1) * w];
                    let ih = oh + a;
                    if ih < pt || ih - pt >= h || lo >= hi {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[(ih - pt) * w..(ih - pt + 1) * w];
                    dst[..lo].fill(0.0);
                    dst[lo..hi].copy_from_slice(&src[lo + bb - pl..hi + bb - pl]);
                    dst[hi..].fill(0.0);
                }
            }
        }
    }
}

fn col2im_2d(cols: &[f32], d: &Conv2dDims, dx: &mut [f32]) {
    let (h, w) = (d.height, d.width);
    let hw = h * w;
    let (pt, pl) = (d.pad_top(), d.pad_left());
    for i in 0..d.c_in {
        let plane = &mut dx[i * hw..(i + 1) * hw];
        for a in 0..d.kh {
            for bb in 0..d.kw {
                let row_idx = (i * d.kh + a) * d.kw + bb;
                let row = &cols[row_idx * hw..(row_idx + 1) * hw];
                let lo = pl.saturating_sub(bb);
                let hi = (w + pl).saturating_sub(bb).min(w);
                if lo >= hi {
                    continue;
                }
                for oh in 0..h {
                    let ih = oh + a;
                    if ih < pt || ih - pt >= h {
                        continue;
                    }
                    let src = &row[oh * w + lo..oh * w + hi];
                    let dst = &mut plane[(ih - pt) * w + lo + bb - pl..(ih - pt) * w + hi + bb - pl];
                    for (o, v) in dst.iter_mut().zip(src) {
                        *o += *v;
                    }
                }
            }
        }
    }
}

/// Same-padded cross-correlation. For even kernel extents the extra padding
/// goes to the bottom/right.
pub fn conv2d_forward(x: &[f32], w: &[f32], d: &Conv2dDims, out: &mut [f32]) {
    let rows = d.c_in * d.kh * d.kw;
    let hw = d.height * d.width;
    let mut cols = vec![0.0f32; rows * hw];
    for b in 0..d.batch {
        im2col_2d(&x[b * d.c_in * hw..(b + 1) * d.c_in * hw], d, &mut cols);
        let ob = &mut out[b * d.c_out * hw..(b + 1) * d.c_out * hw];
        gemm(d.c_out, rows, hw, w, false, &cols, false, 0.0, ob);
    }
}

pub fn conv2d_backward(
    x: &[f32],
    w: &[f32],
    dout: &[f32],
    d: &Conv2dDims,
    mut dx: Option<&mut [f32]>,
    mut dw: Option<&mut [f32]>,
) {
    let rows = d.c_in * d.kh * d.kw;
    let hw = d.height * d.width;
    let mut cols = vec![0.0f32; rows * hw];
    for b in 0..d.batch {
        let ob = &dout[b * d.c_out * hw..(b + 1) * d.c_out * hw];
        if let Some(dw) = dw.as_deref_mut() {
            im2col_2d(&x[b * d.c_in * hw..(b + 1) * d.c_in * hw], d, &mut cols);
            gemm(d.c_out, hw, rows, ob, false, &cols, true, 1.0, dw);
        }
        if let Some(dx) = dx.as_deref_mut() {
            gemm(rows, d.c_out, hw, w, true, ob, false, 0.0, &mut cols);
            col2im_2d(&cols, d, &mut dx[b * d.c_in * hw..(b + 1) * d.c_in * hw]);
        }
    }
}

/// Mean of non-overlapping-or-strided windows along the last axis of `[rows, len]`.
pub fn avg_pool1d_forward(x: &[f32], rows: usize, len: usize, size: usize, stride: usize, out: &mut [f32]) {
    let out_len = (len - size) / stride + 1;
    let inv = 1.0 / size as f64;
    for r in 0..rows {
        let src = &x[r * len..(r + 1) * len];
        for o in 0..out_len {
            let s: f64 = src[o * stride..o * stride + size].iter().map(|&v| v as f64).sum();
            out[r * out_len + o] = (s * inv) as f32;
        }
    }
}

pub fn avg_pool1d_backward(dout: &[f32], rows: usize, len: usize, size: usize, stride: usize, dx: &mut [f32]) {
    let out_len = (len - size) / stride + 1;
    let inv = 1.0 / size as f32;
    for r in 0..rows {
        let dst = &mut dx[r * len..(r + 1) * len];
        for o in 0..out_len {
            let g = dout[r * out_len + o] * inv;
            for v in &mut dst[o * stride..o * stride + size] {
                *v += g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        gemm(2, 2, 2, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        gemm(2, 2, 2, &a, true, &b, false, 0.0, &mut c);
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
        gemm(2, 2, 2, &a, false, &b, true, 0.0, &mut c);
        assert_eq!(c, [17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn even_kernel_padding_goes_bottom_right() {
        // 2x2 kernel with a single 1 at (0,0) is the identity under top/left pad 0.
        let d = Conv2dDims { batch: 1, c_in: 1, c_out: 1, height: 2, width: 3, kh: 2, kw: 2 };
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let w = [1.0, 0.0, 0.0, 0.0];
        let mut out = [0.0; 6];
        conv2d_forward(&x, &w, &d, &mut out);
        assert_eq!(out, x);
    }
}
