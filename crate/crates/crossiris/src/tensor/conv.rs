//! Spatial ops: convolution, transpose convolution, pooling, pixel shuffle,
//! batch normalization and dropout.
//!
//! Convolutions are lowered to im2col + a small hand-rolled GEMM. The column
//! buffers are rebuilt during backward from the parent tensors instead of
//! being captured, which keeps graph memory proportional to activations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::error::{Error, Result};

pub fn conv_out_dim(extent: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if extent + 2 * pad < k {
        return Err(Error::arg(
            "conv2d",
            format!("kernel {k} larger than padded extent {}", extent + 2 * pad),
        ));
    }
    Ok((extent + 2 * pad - k) / stride + 1)
}

/// out[m,n] += a[m,k] * b[k,n]
fn gemm(a: &[f32], b: &[f32], out: &mut [f32], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// out[m,n] += a[m,k] * b[n,k]^T
fn gemm_nt(a: &[f32], b: &[f32], out: &mut [f32], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = 0.0f32;
            for kk in 0..k {
                acc += arow[kk] * brow[kk];
            }
            out[i * n + j] += acc;
        }
    }
}

/// out[m,n] += a[k,m]^T * b[k,n]
fn gemm_tn(a: &[f32], b: &[f32], out: &mut [f32], m: usize, k: usize, n: usize) {
    for kk in 0..k {
        let brow = &b[kk * n..(kk + 1) * n];
        for i in 0..m {
            let av = a[kk * m + i];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }
    fn cols(&self) -> usize {
        self.oh * self.ow
    }
}

/// Unfold one image (C,H,W) into columns [C*kh*kw, OH*OW].
fn im2col(img: &[f32], g: &ConvGeom, out: &mut [f32]) {
    debug_assert_eq!(out.len(), g.rows() * g.cols());
    out.fill(0.0);
    let (h, w, ow) = (g.h, g.w, g.ow);
    for ci in 0..g.c {
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (ci * g.kh + ky) * g.kw + kx;
                let dst = &mut out[row * g.cols()..(row + 1) * g.cols()];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src_base = ci * h * w + iy as usize * w;
                    let dst_base = oy * ow;
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[dst_base + ox] = img[src_base + ix as usize];
                        }
                    }
                }
            }
        }
    }
}

/// Fold columns back into an image, accumulating overlaps (adjoint of im2col).
fn col2im(cols: &[f32], g: &ConvGeom, img: &mut [f32]) {
    debug_assert_eq!(img.len(), g.c * g.h * g.w);
    let (h, w, ow) = (g.h, g.w, g.ow);
    for ci in 0..g.c {
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (ci * g.kh + ky) * g.kw + kx;
                let src = &cols[row * g.cols()..(row + 1) * g.cols()];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_base = ci * h * w + iy as usize * w;
                    let src_base = oy * ow;
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < w as isize {
                            img[dst_base + ix as usize] += src[src_base + ox];
                        }
                    }
                }
            }
        }
    }
}

fn geom(input: &[usize; 4], wshape: &[usize], stride: usize, pad: usize) -> Result<ConvGeom> {
    let [_, c, h, w] = *input;
    let (kc, kh, kw) = match wshape {
        [_, kc, kh, kw] => (*kc, *kh, *kw),
        other => return Err(Error::shape("conv2d", format!("weight {:?}", other))),
    };
    if kc != c {
        return Err(Error::shape(
            "conv2d",
            format!("input has {c} channels, weight expects {kc}"),
        ));
    }
    if stride < 1 {
        return Err(Error::arg("conv2d", "stride must be >= 1"));
    }
    Ok(ConvGeom {
        c,
        h,
        w,
        kh,
        kw,
        stride,
        pad,
        oh: conv_out_dim(h, kh, stride, pad)?,
        ow: conv_out_dim(w, kw, stride, pad)?,
    })
}

impl Tensor {
    /// 2-D cross-correlation. input: N,C,H,W; weight: O,C,kH,kW; bias: [O].
    pub fn conv2d(&self, weight: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
        let dims = self.dims4("conv2d")?;
        let g = geom(&dims, weight.shape(), stride, pad)?;
        let [n, _, _, _] = dims;
        let o = weight.shape()[0];
        if bias.shape() != [o] {
            return Err(Error::shape("conv2d", format!("bias {:?}, expected [{o}]", bias.shape())));
        }
        let x = self.data();
        let wv = weight.data();
        let bv = bias.data();
        let (rows, cols) = (g.rows(), g.cols());
        let mut out = vec![0.0f32; n * o * cols];
        let mut colbuf = vec![0.0f32; rows * cols];
        for ni in 0..n {
            im2col(&x[ni * g.c * g.h * g.w..], &g, &mut colbuf);
            let dst = &mut out[ni * o * cols..(ni + 1) * o * cols];
            for oc in 0..o {
                dst[oc * cols..(oc + 1) * cols].fill(bv[oc]);
            }
            gemm(&wv, &colbuf, dst, o, rows, cols);
        }
        drop(x);
        drop(wv);
        drop(bv);
        let (oh, ow) = (g.oh, g.ow);
        Tensor::from_op(
            "conv2d",
            vec![n, o, oh, ow],
            out,
            vec![self.clone(), weight.clone(), bias.clone()],
            Box::new(move |gout, parents| {
                let g = geom(
                    &[n, parents[0].shape()[1], parents[0].shape()[2], parents[0].shape()[3]],
                    parents[1].shape(),
                    stride,
                    pad,
                )
                .expect("geometry validated in forward");
                let (rows, cols) = (g.rows(), g.cols());
                let x = parents[0].data();
                let wv = parents[1].data();
                let img_len = g.c * g.h * g.w;
                let mut gx = vec![0.0f32; n * img_len];
                let mut gw = vec![0.0f32; o * rows];
                let mut gb = vec![0.0f32; o];
                let mut colbuf = vec![0.0f32; rows * cols];
                let mut gcols = vec![0.0f32; rows * cols];
                for ni in 0..n {
                    let go = &gout[ni * o * cols..(ni + 1) * o * cols];
                    for oc in 0..o {
                        gb[oc] += go[oc * cols..(oc + 1) * cols].iter().sum::<f32>();
                    }
                    im2col(&x[ni * img_len..], &g, &mut colbuf);
                    gemm_nt(go, &colbuf, &mut gw, o, cols, rows);
                    gcols.fill(0.0);
                    gemm_tn(&wv, go, &mut gcols, rows, o, cols);
                    col2im(&gcols, &g, &mut gx[ni * img_len..(ni + 1) * img_len]);
                }
                drop(x);
                drop(wv);
                parents[0].accumulate_grad(&gx);
                parents[1].accumulate_grad(&gw);
                parents[2].accumulate_grad(&gb);
            }),
        )
    }

    /// Transpose convolution (adjoint of `conv2d` at padding 0).
    /// input: N,InC,H,W; weight: InC,OutC,kH,kW; output spatial = (H-1)*stride + k.
    pub fn conv2d_transpose(&self, weight: &Tensor, stride: usize) -> Result<Tensor> {
        let [n, ic, h, w] = self.dims4("conv2d_transpose")?;
        let (wic, oc, kh, kw) = match weight.shape() {
            [a, b, c, d] => (*a, *b, *c, *d),
            other => return Err(Error::shape("conv2d_transpose", format!("weight {:?}", other))),
        };
        if wic != ic {
            return Err(Error::shape(
                "conv2d_transpose",
                format!("input has {ic} channels, weight expects {wic}"),
            ));
        }
        if stride < 1 {
            return Err(Error::arg("conv2d_transpose", "stride must be >= 1"));
        }
        let oh = (h - 1) * stride + kh;
        let ow = (w - 1) * stride + kw;
        // Output plays the role of the conv input in the adjoint relation.
        let g = ConvGeom { c: oc, h: oh, w: ow, kh, kw, stride, pad: 0, oh: h, ow: w };
        let (rows, cols) = (g.rows(), g.cols());
        let x = self.data();
        let wv = weight.data();
        let out_len = oc * oh * ow;
        let mut out = vec![0.0f32; n * out_len];
        let mut colbuf = vec![0.0f32; rows * cols];
        for ni in 0..n {
            colbuf.fill(0.0);
            // cols = W^T (rows x InC) * x_n (InC x H*W)
            gemm_tn(&wv, &x[ni * ic * cols..(ni + 1) * ic * cols], &mut colbuf, rows, ic, cols);
            col2im(&colbuf, &g, &mut out[ni * out_len..(ni + 1) * out_len]);
        }
        drop(x);
        drop(wv);
        Tensor::from_op(
            "conv2d_transpose",
            vec![n, oc, oh, ow],
            out,
            vec![self.clone(), weight.clone()],
            Box::new(move |gout, parents| {
                let g = ConvGeom { c: oc, h: oh, w: ow, kh, kw, stride, pad: 0, oh: h, ow: w };
                let (rows, cols) = (g.rows(), g.cols());
                let x = parents[0].data();
                let wv = parents[1].data();
                let mut gx = vec![0.0f32; n * ic * cols];
                let mut gw = vec![0.0f32; ic * rows];
                let mut colbuf = vec![0.0f32; rows * cols];
                for ni in 0..n {
                    // dL/dx = conv(gout, W): both via im2col of gout.
                    im2col(&gout[ni * oc * oh * ow..], &g, &mut colbuf);
                    gemm(&wv, &colbuf, &mut gx[ni * ic * cols..(ni + 1) * ic * cols], ic, rows, cols);
                    gemm_nt(
                        &x[ni * ic * cols..(ni + 1) * ic * cols],
                        &colbuf,
                        &mut gw,
                        ic,
                        cols,
                        rows,
                    );
                }
                drop(x);
                drop(wv);
                parents[0].accumulate_grad(&gx);
                parents[1].accumulate_grad(&gw);
            }),
        )
    }

    /// Sub-pixel rearrangement: N,C,H,W -> N,C/r^2,H*r,W*r.
    pub fn pixel_shuffle(&self, r: usize) -> Result<Tensor> {
        let [n, c, h, w] = self.dims4("pixel_shuffle")?;
        if r == 0 || c % (r * r) != 0 {
            return Err(Error::arg(
                "pixel_shuffle",
                format!("channels {c} not divisible by r^2 = {}", r * r),
            ));
        }
        let oc = c / (r * r);
        let (oh, ow) = (h * r, w * r);
        let x = self.data();
        let mut out = vec![0.0f32; x.len()];
        for ni in 0..n {
            for co in 0..oc {
                for dy in 0..r {
                    for dx in 0..r {
                        let ci = co * r * r + dy * r + dx;
                        for iy in 0..h {
                            let src = ((ni * c + ci) * h + iy) * w;
                            let dst = ((ni * oc + co) * oh + iy * r + dy) * ow + dx;
                            for ix in 0..w {
                                out[dst + ix * r] = x[src + ix];
                            }
                        }
                    }
                }
            }
        }
        drop(x);
        Tensor::from_op(
            "pixel_shuffle",
            vec![n, oc, oh, ow],
            out,
            vec![self.clone()],
            Box::new(move |gout, parents| {
                let mut gx = vec![0.0f32; gout.len()];
                for ni in 0..n {
                    for co in 0..oc {
                        for dy in 0..r {
                            for dx in 0..r {
                                let ci = co * r * r + dy * r + dx;
                                for iy in 0..h {
                                    let dst = ((ni * c + ci) * h + iy) * w;
                                    let src = ((ni * oc + co) * oh + iy * r + dy) * ow + dx;
                                    for ix in 0..w {
                                        gx[dst + ix] = gout[src + ix * r];
                                    }
                                }
                            }
                        }
                    }
                }
                parents[0].accumulate_grad(&gx);
            }),
        )
    }

    /// Inverse of `pixel_shuffle` (used by tests and by no production path).
    pub fn pixel_unshuffle(&self, r: usize) -> Result<Tensor> {
        let [n, c, h, w] = self.dims4("pixel_unshuffle")?;
        if r == 0 || h % r != 0 || w % r != 0 {
            return Err(Error::arg("pixel_unshuffle", "spatial dims not divisible by r"));
        }
        let (oc, oh, ow) = (c * r * r, h / r, w / r);
        let x = self.data();
        let mut out = vec![0.0f32; x.len()];
        for ni in 0..n {
            for co in 0..c {
                for dy in 0..r {
                    for dx in 0..r {
                        let ci = co * r * r + dy * r + dx;
                        for iy in 0..oh {
                            let dst = ((ni * oc + ci) * oh + iy) * ow;
                            let src = ((ni * c + co) * h + iy * r + dy) * w + dx;
                            for ix in 0..ow {
                                out[dst + ix] = x[src + ix * r];
                            }
                        }
                    }
                }
            }
        }
        drop(x);
        Tensor::from_op(
            "pixel_unshuffle",
            vec![n, oc, oh, ow],
            out,
            vec![self.clone()],
            Box::new(move |gout, parents| {
                let mut gx = vec![0.0f32; gout.len()];
                for ni in 0..n {
                    for co in 0..c {
                        for dy in 0..r {
                            for dx in 0..r {
                                let ci = co * r * r + dy * r + dx;
                                for iy in 0..oh {
                                    let src = ((ni * oc + ci) * oh + iy) * ow;
                                    let dst = ((ni * c + co) * h + iy * r + dy) * w + dx;
                                    for ix in 0..ow {
                                        gx[dst + ix * r] = gout[src + ix];
                                    }
                                }
                            }
                        }
                    }
                }
                parents[0].accumulate_grad(&gx);
            }),
        )
    }

    /// Max pooling; ties route the gradient to the first element in row-major
    /// window order so backward is deterministic.
    pub fn max_pool2d(&self, k: usize, stride: usize) -> Result<Tensor> {
        let [n, c, h, w] = self.dims4("max_pool2d")?;
        if h < k || w < k {
            return Err(Error::arg("max_pool2d", format!("input {h}x{w} smaller than window {k}")));
        }
        let oh = (h - k) / stride + 1;
        let ow = (w - k) / stride + 1;
        let x = self.data();
        let mut out = vec![0.0f32; n * c * oh * ow];
        let mut argmax = vec![0usize; out.len()];
        for nc in 0..n * c {
            let img = &x[nc * h * w..(nc + 1) * h * w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f32::NEG_INFINITY;
                    let mut best_idx = 0;
                    for ky in 0..k {
                        for kx in 0..k {
                            let idx = (oy * stride + ky) * w + ox * stride + kx;
                            if img[idx] > best {
                                best = img[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = (nc * oh + oy) * ow + ox;
                    out[o] = best;
                    argmax[o] = nc * h * w + best_idx;
                }
            }
        }
        drop(x);
        let total_in = n * c * h * w;
        Tensor::from_op(
            "max_pool2d",
            vec![n, c, oh, ow],
            out,
            vec![self.clone()],
            Box::new(move |gout, parents| {
                let mut gx = vec![0.0f32; total_in];
                for (o, &src) in argmax.iter().enumerate() {
                    gx[src] += gout[o];
                }
                parents[0].accumulate_grad(&gx);
            }),
        )
    }

    /// Batch normalization in training mode. Returns the normalized output
    /// together with the per-channel batch mean and (biased) variance so the
    /// caller can maintain running statistics.
    pub fn batch_norm_train(
        &self,
        gamma: &Tensor,
        beta: &Tensor,
        eps: f32,
    ) -> Result<(Tensor, Vec<f32>, Vec<f32>)> {
        let [n, c, h, w] = self.dims4("batch_norm")?;
        if n < 2 {
            return Err(Error::arg("batch_norm", "train mode requires batch size >= 2"));
        }
        if gamma.shape() != [c] || beta.shape() != [c] {
            return Err(Error::shape("batch_norm", "gamma/beta must be [C]"));
        }
        let m = (n * h * w) as f32;
        let x = self.to_vec();
        let hw = h * w;
        let mut mean = vec![0.0f32; c];
        let mut var = vec![0.0f32; c];
        for ci in 0..c {
            let mut s = 0.0f64;
            for ni in 0..n {
                let base = (ni * c + ci) * hw;
                s += x[base..base + hw].iter().map(|&v| v as f64).sum::<f64>();
            }
            mean[ci] = (s / m as f64) as f32;
            let mu = mean[ci] as f64;
            let mut v = 0.0f64;
            for ni in 0..n {
                let base = (ni * c + ci) * hw;
                v += x[base..base + hw].iter().map(|&e| (e as f64 - mu).powi(2)).sum::<f64>();
            }
            var[ci] = (v / m as f64) as f32;
        }
        let gv = gamma.to_vec();
        let bv = beta.to_vec();
        let mut xhat = vec![0.0f32; x.len()];
        let mut out = vec![0.0f32; x.len()];
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * hw;
                let inv = 1.0 / (var[ci] + eps).sqrt();
                for i in 0..hw {
                    let xh = (x[base + i] - mean[ci]) * inv;
                    xhat[base + i] = xh;
                    out[base + i] = gv[ci] * xh + bv[ci];
                }
            }
        }
        let (mean_c, var_c) = (mean.clone(), var.clone());
        let var_cap = var.clone();
        let t = Tensor::from_op(
            "batch_norm",
            self.shape().to_vec(),
            out,
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |gout, parents| {
                let gvv = parents[1].to_vec();
                let mut gx = vec![0.0f32; xhat.len()];
                let mut ggamma = vec![0.0f32; c];
                let mut gbeta = vec![0.0f32; c];
                for ci in 0..c {
                    let inv = 1.0 / (var_cap[ci] + eps).sqrt();
                    let mut sum_dxhat = 0.0f64;
                    let mut sum_dxhat_xhat = 0.0f64;
                    for ni in 0..n {
                        let base = (ni * c + ci) * hw;
                        for i in 0..hw {
                            let dy = gout[base + i];
                            let xh = xhat[base + i];
                            ggamma[ci] += dy * xh;
                            gbeta[ci] += dy;
                            let dxh = dy * gvv[ci];
                            sum_dxhat += dxh as f64;
                            sum_dxhat_xhat += (dxh * xh) as f64;
                        }
                    }
                    let sd = sum_dxhat as f32;
                    let sdx = sum_dxhat_xhat as f32;
                    for ni in 0..n {
                        let base = (ni * c + ci) * hw;
                        for i in 0..hw {
                            let dxh = gout[base + i] * gvv[ci];
                            let xh = xhat[base + i];
                            gx[base + i] = inv / m * (m * dxh - sd - xh * sdx);
                        }
                    }
                }
                parents[0].accumulate_grad(&gx);
                parents[1].accumulate_grad(&ggamma);
                parents[2].accumulate_grad(&gbeta);
            }),
        )?;
        Ok((t, mean_c, var_c))
    }

    /// Batch normalization with frozen statistics (inference mode).
    pub fn batch_norm_eval(
        &self,
        gamma: &Tensor,
        beta: &Tensor,
        mean: &[f32],
        var: &[f32],
        eps: f32,
    ) -> Result<Tensor> {
        let [n, c, h, w] = self.dims4("batch_norm")?;
        if gamma.shape() != [c] || beta.shape() != [c] || mean.len() != c || var.len() != c {
            return Err(Error::shape("batch_norm", "stats must be [C]"));
        }
        let hw = h * w;
        let x = self.to_vec();
        let gv = gamma.to_vec();
        let bv = beta.to_vec();
        let inv: Vec<f32> = var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
        let mut out = vec![0.0f32; x.len()];
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * hw;
                for i in 0..hw {
                    out[base + i] = gv[ci] * (x[base + i] - mean[ci]) * inv[ci] + bv[ci];
                }
            }
        }
        let (mean_v, inv_v) = (mean.to_vec(), inv);
        Tensor::from_op(
            "batch_norm_eval",
            self.shape().to_vec(),
            out,
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |gout, parents| {
                let gvv = parents[1].to_vec();
                let x = parents[0].to_vec();
                let mut gx = vec![0.0f32; x.len()];
                let mut ggamma = vec![0.0f32; c];
                let mut gbeta = vec![0.0f32; c];
                for ni in 0..n {
                    for ci in 0..c {
                        let base = (ni * c + ci) * hw;
                        for i in 0..hw {
                            let dy = gout[base + i];
                            gx[base + i] = dy * gvv[ci] * inv_v[ci];
                            ggamma[ci] += dy * (x[base + i] - mean_v[ci]) * inv_v[ci];
                            gbeta[ci] += dy;
                        }
                    }
                }
                parents[0].accumulate_grad(&gx);
                parents[1].accumulate_grad(&ggamma);
                parents[2].accumulate_grad(&gbeta);
            }),
        )
    }

    /// Inverted dropout; active only when called (training paths).
    pub fn dropout(&self, p: f32, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::arg("dropout", format!("p {p} not in [0,1)")));
        }
        let keep = 1.0 - p;
        let mask: Vec<f32> = (0..self.numel())
            .map(|_| if rng.gen::<f32>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let x = self.to_vec();
        let out: Vec<f32> = x.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        Tensor::from_op(
            "dropout",
            self.shape().to_vec(),
            out,
            vec![self.clone()],
            Box::new(move |gout, parents| {
                let g: Vec<f32> = gout.iter().zip(&mask).map(|(&g, &m)| g * m).collect();
                parents[0].accumulate_grad(&g);
            }),
        )
    }
}
