//! Per-sample forward and backward kernels. All feature maps are `[C, H, W]`
//! row-major slices.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dGeom {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub h: usize,
    pub w: usize,
}

pub fn out_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    (len + 2 * padding)
        .checked_sub(kernel)
        .map(|span| span / stride + 1)
}

impl Conv2dGeom {
    pub fn out_hw(&self) -> (usize, usize) {
        (
            out_len(self.h, self.kernel, self.stride, self.padding).unwrap_or(0),
            out_len(self.w, self.kernel, self.stride, self.padding).unwrap_or(0),
        )
    }

    pub fn weight_len(&self) -> usize {
        self.c_out * self.c_in * self.kernel * self.kernel
    }
}

/// Output positions `o` in `0..out` with `o * stride + offset - padding` in `0..input`.
#[inline]
fn valid(out: usize, input: usize, offset: usize, stride: usize, padding: usize) -> (usize, usize) {
    let lo = if padding > offset {
        (padding - offset).div_ceil(stride)
    } else {
        0
    };
    let hi = if input + padding > offset {
        ((input - 1 + padding - offset) / stride + 1).min(out)
    } else {
        0
    };
    (lo, hi.max(lo))
}

impl Conv2dGeom {
    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.padding == 0
    }

    /// Rows of the unfolded input: `c_in · kernel²`.
    fn col_rows(&self) -> usize {
        self.c_in * self.kernel * self.kernel
    }
}

/// Unfolds `x` into `[c_in·k·k, ho·wo]` patches; out-of-bounds taps are zero.
fn im2col(g: &Conv2dGeom, x: &[f64], col: &mut [f64]) {
    let (ho, wo) = g.out_hw();
    let k = g.kernel;
    let plane_out = ho * wo;
    col.fill(0.0);
    for ci in 0..g.c_in {
        let inp = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for kh in 0..k {
            let (oh_lo, oh_hi) = valid(ho, g.h, kh, g.stride, g.padding);
            for kw in 0..k {
                let (ow_lo, ow_hi) = valid(wo, g.w, kw, g.stride, g.padding);
                let row = &mut col[((ci * k + kh) * k + kw) * plane_out..][..plane_out];
                for oh in oh_lo..oh_hi {
                    let ih = oh * g.stride + kh - g.padding;
                    let dst = &mut row[oh * wo..(oh + 1) * wo];
                    for ow in ow_lo..ow_hi {
                        dst[ow] = inp[ih * g.w + ow * g.stride + kw - g.padding];
                    }
                }
            }
        }
    }
}

/// Adds the patches in `col` back onto the image gradient `gx`.
fn col2im(g: &Conv2dGeom, col: &[f64], gx: &mut [f64]) {
    let (ho, wo) = g.out_hw();
    let k = g.kernel;
    let plane_out = ho * wo;
    for ci in 0..g.c_in {
        let gi = &mut gx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for kh in 0..k {
            let (oh_lo, oh_hi) = valid(ho, g.h, kh, g.stride, g.padding);
            for kw in 0..k {
                let (ow_lo, ow_hi) = valid(wo, g.w, kw, g.stride, g.padding);
                let row = &col[((ci * k + kh) * k + kw) * plane_out..][..plane_out];
                for oh in oh_lo..oh_hi {
                    let ih = oh * g.stride + kh - g.padding;
                    for ow in ow_lo..ow_hi {
                        gi[ih * g.w + ow * g.stride + kw - g.padding] += row[oh * wo + ow];
                    }
                }
            }
        }
    }
}

/// `c += op(a) · op(b)` for row-major operands; `ta`/`tb` transpose.
#[allow(clippy::too_many_arguments)]
fn gemm_acc(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the assertion above bounds every access made with these strides.
    unsafe {
        matrixmultiply::dgemm(
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
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn conv2d_forward(g: &Conv2dGeom, weight: &[f64], bias: &[f64], x: &[f64], y: &mut [f64]) {
    let (ho, wo) = g.out_hw();
    let plane_out = ho * wo;
    for (co, out) in y[..g.c_out * plane_out].chunks_exact_mut(plane_out).enumerate() {
        out.fill(bias[co]);
    }
    if g.is_pointwise() {
        gemm_acc(g.c_out, g.c_in, plane_out, weight, false, x, false, y);
    } else {
        let mut col = vec![0.0; g.col_rows() * plane_out];
        im2col(g, x, &mut col);
        gemm_acc(g.c_out, g.col_rows(), plane_out, weight, false, &col, false, y);
    }
}

/// Accumulates into `gw`, `gb` and `gx` (when given).
pub fn conv2d_backward(
    g: &Conv2dGeom,
    weight: &[f64],
    x: &[f64],
    gy: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    gx: Option<&mut [f64]>,
) {
    let (ho, wo) = g.out_hw();
    let plane_out = ho * wo;
    for (co, go) in gy[..g.c_out * plane_out].chunks_exact(plane_out).enumerate() {
        gb[co] += go.iter().sum::<f64>();
    }
    let rows = g.col_rows();
    if g.is_pointwise() {
        gemm_acc(g.c_out, plane_out, rows, gy, false, x, true, gw);
        if let Some(gx) = gx {
            gemm_acc(rows, g.c_out, plane_out, weight, true, gy, false, gx);
        }
        return;
    }
    let mut col = vec![0.0; rows * plane_out];
    im2col(g, x, &mut col);
    gemm_acc(g.c_out, plane_out, rows, gy, false, &col, true, gw);
    if let Some(gx) = gx {
        col.fill(0.0);
        gemm_acc(rows, g.c_out, plane_out, weight, true, gy, false, &mut col);
        col2im(g, &col, gx);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeom {
    pub c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub h: usize,
    pub w: usize,
}

impl PoolGeom {
    pub fn out_hw(&self) -> (usize, usize) {
        (
            out_len(self.h, self.kernel, self.stride, self.padding).unwrap_or(0),
            out_len(self.w, self.kernel, self.stride, self.padding).unwrap_or(0),
        )
    }

    /// Window of output `(oh, ow)` clipped to the input: `(h0, h1, w0, w1)`.
    #[inline]
    fn window(&self, oh: usize, ow: usize) -> (usize, usize, usize, usize) {
        let h0 = (oh * self.stride).saturating_sub(self.padding);
        let h1 = (oh * self.stride + self.kernel - self.padding).min(self.h);
        let w0 = (ow * self.stride).saturating_sub(self.padding);
        let w1 = (ow * self.stride + self.kernel - self.padding).min(self.w);
        (h0, h1, w0, w1)
    }
}

/// Average pooling; padded positions are excluded from the divisor.
pub fn avg_pool_forward(g: &PoolGeom, x: &[f64], y: &mut [f64]) {
    let (ho, wo) = g.out_hw();
    for c in 0..g.c {
        let inp = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for oh in 0..ho {
            for ow in 0..wo {
                let (h0, h1, w0, w1) = g.window(oh, ow);
                let mut s = 0.0;
                for ih in h0..h1 {
                    s += inp[ih * g.w + w0..ih * g.w + w1].iter().sum::<f64>();
                }
                y[(c * ho + oh) * wo + ow] = s / ((h1 - h0) * (w1 - w0)) as f64;
            }
        }
    }
}

pub fn avg_pool_backward(g: &PoolGeom, gy: &[f64], gx: &mut [f64]) {
    let (ho, wo) = g.out_hw();
    for c in 0..g.c {
        let gin = &mut gx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for oh in 0..ho {
            for ow in 0..wo {
                let (h0, h1, w0, w1) = g.window(oh, ow);
                let v = gy[(c * ho + oh) * wo + ow] / ((h1 - h0) * (w1 - w0)) as f64;
                for ih in h0..h1 {
                    for t in &mut gin[ih * g.w + w0..ih * g.w + w1] {
                        *t += v;
                    }
                }
            }
        }
    }
}

pub fn linear_forward(in_f: usize, out_f: usize, weight: &[f64], bias: &[f64], x: &[f64], y: &mut [f64]) {
    for o in 0..out_f {
        let row = &weight[o * in_f..(o + 1) * in_f];
        y[o] = bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
}

#[allow(clippy::too_many_arguments)]
pub fn linear_backward(
    in_f: usize,
    out_f: usize,
    weight: &[f64],
    x: &[f64],
    gy: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    mut gx: Option<&mut [f64]>,
) {
    for o in 0..out_f {
        let go = gy[o];
        if go == 0.0 {
            continue;
        }
        gb[o] += go;
        for (gwi, &xi) in gw[o * in_f..(o + 1) * in_f].iter_mut().zip(x) {
            *gwi += go * xi;
        }
        if let Some(gx) = gx.as_deref_mut() {
            for (gxi, &wi) in gx.iter_mut().zip(&weight[o * in_f..(o + 1) * in_f]) {
                *gxi += wi * go;
            }
        }
    }
}
