//! Elementwise ops, reductions, dense layers and shape ops on `Tensor`.

use super::Tensor;
use crate::error::{Error, Result};

impl Tensor {
    fn binary(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f32, f32) -> f32,
        dl: impl Fn(f32, f32) -> f32 + 'static,
        dr: impl Fn(f32, f32) -> f32 + 'static,
    ) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        let a = self.data();
        let b = other.data();
        let out: Vec<f32> = a.iter().zip(b.iter()).map(|(&x, &y)| f(x, y)).collect();
        let (av, bv) = (a.clone(), b.clone());
        drop(a);
        drop(b);
        Tensor::from_op(
            op,
            self.shape().to_vec(),
            out,
            vec![self.clone(), other.clone()],
            Box::new(move |gout, parents| {
                let ga: Vec<f32> = gout
                    .iter()
                    .zip(av.iter().zip(bv.iter()))
                    .map(|(&g, (&x, &y))| g * dl(x, y))
                    .collect();
                parents[0].accumulate_grad(&ga);
                let gb: Vec<f32> = gout
                    .iter()
                    .zip(av.iter().zip(bv.iter()))
                    .map(|(&g, (&x, &y))| g * dr(x, y))
                    .collect();
                parents[1].accumulate_grad(&gb);
            }),
        )
    }

    fn unary(
        &self,
        op: &'static str,
        f: impl Fn(f32) -> f32,
        // derivative as a function of (input, output)
        df: impl Fn(f32, f32) -> f32 + 'static,
    ) -> Result<Tensor> {
        let x = self.to_vec();
        let y: Vec<f32> = x.iter().map(|&v| f(v)).collect();
        let yv = y.clone();
        Tensor::from_op(
            op,
            self.shape().to_vec(),
            y,
            vec![self.clone()],
            Box::new(move |gout, parents| {
                let g: Vec<f32> = gout
                    .iter()
                    .zip(x.iter().zip(yv.iter()))
                    .map(|(&g, (&xi, &yi))| g * df(xi, yi))
                    .collect();
                parents[0].accumulate_grad(&g);
            }),
        )
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "add", |a, b| a + b, |_, _| 1.0, |_, _| 1.0)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "sub", |a, b| a - b, |_, _| 1.0, |_, _| -1.0)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "mul", |a, b| a * b, |_, b| b, |a, _| a)
    }

    pub fn scale(&self, c: f32) -> Result<Tensor> {
        self.unary("scale", move |x| c * x, move |_, _| c)
    }

    pub fn add_scalar(&self, c: f32) -> Result<Tensor> {
        self.unary("add_scalar", move |x| x + c, |_, _| 1.0)
    }

    pub fn sqr(&self) -> Result<Tensor> {
        self.unary("sqr", |x| x * x, |x, _| 2.0 * x)
    }

    pub fn abs(&self) -> Result<Tensor> {
        self.unary("abs", f32::abs, |x, _| if x >= 0.0 { 1.0 } else { -1.0 })
    }

    pub fn sqrt_eps(&self, eps: f32) -> Result<Tensor> {
        self.unary(
            "sqrt",
            move |x| (x.max(0.0) + eps).sqrt(),
            move |_, y| 0.5 / y.max(1e-12),
        )
    }

    /// ln(clamp(x, eps, 1/eps)); the clamp keeps adversarial losses finite at
    /// discriminator saturation.
    pub fn log_clamped(&self, eps: f32) -> Result<Tensor> {
        self.unary(
            "log_clamped",
            move |x| x.clamp(eps, 1.0 / eps).ln(),
            move |x, _| {
                if x <= eps || x >= 1.0 / eps {
                    0.0
                } else {
                    1.0 / x
                }
            },
        )
    }

    pub fn relu(&self) -> Result<Tensor> {
        self.unary("relu", |x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn leaky_relu(&self, slope: f32) -> Result<Tensor> {
        if !(0.0..1.0).contains(&slope) || slope == 0.0 {
            return Err(Error::arg("leaky_relu", format!("slope {slope} not in (0,1)")));
        }
        self.unary(
            "leaky_relu",
            move |x| if x > 0.0 { x } else { slope * x },
            move |x, _| if x > 0.0 { 1.0 } else { slope },
        )
    }

    pub fn sigmoid(&self) -> Result<Tensor> {
        self.unary(
            "sigmoid",
            |x| 1.0 / (1.0 + (-x).exp()),
            |_, y| y * (1.0 - y),
        )
    }

    pub fn tanh_act(&self) -> Result<Tensor> {
        self.unary("tanh", f32::tanh, |_, y| 1.0 - y * y)
    }

    /// PReLU with one learned slope per channel (input is N,C,H,W; slope is [C]).
    pub fn prelu(&self, slope: &Tensor) -> Result<Tensor> {
        let [n, c, h, w] = self.dims4("prelu")?;
        if slope.shape() != [c] {
            return Err(Error::shape("prelu", format!("slope {:?}, expected [{c}]", slope.shape())));
        }
        let x = self.to_vec();
        let a = slope.to_vec();
        let hw = h * w;
        let mut y = vec![0.0f32; x.len()];
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * hw;
                let s = a[ci];
                for i in 0..hw {
                    let v = x[base + i];
                    y[base + i] = if v > 0.0 { v } else { s * v };
                }
            }
        }
        Tensor::from_op(
            "prelu",
            self.shape().to_vec(),
            y,
            vec![self.clone(), slope.clone()],
            Box::new(move |gout, parents| {
                let mut gx = vec![0.0f32; x.len()];
                let mut ga = vec![0.0f32; a.len()];
                for ni in 0..n {
                    for ci in 0..c {
                        let base = (ni * c + ci) * hw;
                        let s = a[ci];
                        for i in 0..hw {
                            let v = x[base + i];
                            let g = gout[base + i];
                            if v > 0.0 {
                                gx[base + i] = g;
                            } else {
                                gx[base + i] = g * s;
                                ga[ci] += g * v;
                            }
                        }
                    }
                }
                parents[0].accumulate_grad(&gx);
                parents[1].accumulate_grad(&ga);
            }),
        )
    }

    pub fn sum_all(&self) -> Result<Tensor> {
        let x = self.to_vec();
        let s: f32 = x.iter().map(|&v| v as f64).sum::<f64>() as f32;
        let n = x.len();
        Tensor::from_op(
            "sum",
            vec![1],
            vec![s],
            vec![self.clone()],
            Box::new(move |gout, parents| {
                parents[0].accumulate_grad(&vec![gout[0]; n]);
            }),
        )
    }

    /// Row sums of a [N, L] tensor, yielding shape [N].
    pub fn sum_rows(&self) -> Result<Tensor> {
        let (n, l) = match self.shape() {
            [n, l] => (*n, *l),
            s => return Err(Error::shape("sum_rows", format!("expected [N,L], got {s:?}"))),
        };
        let x = self.to_vec();
        let y: Vec<f32> = (0..n)
            .map(|i| x[i * l..(i + 1) * l].iter().map(|&v| v as f64).sum::<f64>() as f32)
            .collect();
        Tensor::from_op(
            "sum_rows",
            vec![n],
            y,
            vec![self.clone()],
            Box::new(move |gout, parents| {
                let mut gx = vec![0.0f32; n * l];
                for i in 0..n {
                    gx[i * l..(i + 1) * l].fill(gout[i]);
                }
                parents[0].accumulate_grad(&gx);
            }),
        )
    }

    pub fn mean_all(&self) -> Result<Tensor> {
        if self.numel() == 0 {
            return Err(Error::Empty("mean_all"));
        }
        let n = self.numel() as f32;
        self.sum_all()?.scale(1.0 / n)
    }

    /// View with a new shape (same element count, row-major order preserved).
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if shape.iter().product::<usize>() != self.numel() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {:?}", self.shape(), shape),
            ));
        }
        let old = self.shape().to_vec();
        let _ = &old;
        Tensor::from_op(
            "reshape",
            shape.to_vec(),
            self.to_vec(),
            vec![self.clone()],
            Box::new(move |gout, parents| {
                parents[0].accumulate_grad(gout);
            }),
        )
    }

    /// Affine map y = x Wᵀ + b with x: [N,F], W: [O,F], b: [O].
    pub fn dense(&self, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
        let (n, f) = match self.shape() {
            [n, f] => (*n, *f),
            other => {
                return Err(Error::shape("dense", format!("input {:?}, expected [N,F]", other)))
            }
        };
        let (o, fw) = match weight.shape() {
            [o, fw] => (*o, *fw),
            other => {
                return Err(Error::shape("dense", format!("weight {:?}, expected [O,F]", other)))
            }
        };
        if fw != f || bias.shape() != [o] {
            return Err(Error::shape(
                "dense",
                format!("input F={f}, weight F={fw}, bias {:?}", bias.shape()),
            ));
        }
        let x = self.to_vec();
        let w = weight.to_vec();
        let b = bias.to_vec();
        let mut y = vec![0.0f32; n * o];
        for ni in 0..n {
            for oi in 0..o {
                let mut acc = b[oi];
                let xrow = &x[ni * f..(ni + 1) * f];
                let wrow = &w[oi * f..(oi + 1) * f];
                for k in 0..f {
                    acc += xrow[k] * wrow[k];
                }
                y[ni * o + oi] = acc;
            }
        }
        Tensor::from_op(
            "dense",
            vec![n, o],
            y,
            vec![self.clone(), weight.clone(), bias.clone()],
            Box::new(move |gout, parents| {
                let mut gx = vec![0.0f32; n * f];
                let mut gw = vec![0.0f32; o * f];
                let mut gb = vec![0.0f32; o];
                for ni in 0..n {
                    for oi in 0..o {
                        let g = gout[ni * o + oi];
                        gb[oi] += g;
                        let xrow = &x[ni * f..(ni + 1) * f];
                        let wrow = &w[oi * f..(oi + 1) * f];
                        let gxrow = &mut gx[ni * f..(ni + 1) * f];
                        for k in 0..f {
                            gxrow[k] += g * wrow[k];
                        }
                        let gwrow = &mut gw[oi * f..(oi + 1) * f];
                        for k in 0..f {
                            gwrow[k] += g * xrow[k];
                        }
                    }
                }
                parents[0].accumulate_grad(&gx);
                parents[1].accumulate_grad(&gw);
                parents[2].accumulate_grad(&gb);
            }),
        )
    }

    /// Concatenate along the channel axis (all inputs N,C_i,H,W).
    pub fn concat_channels(inputs: &[Tensor]) -> Result<Tensor> {
        if inputs.is_empty() {
            return Err(Error::Empty("concat_channels"));
        }
        let [n, _, h, w] = inputs[0].dims4("concat_channels")?;
        let mut channels = Vec::with_capacity(inputs.len());
        for t in inputs {
            let [tn, tc, th, tw] = t.dims4("concat_channels")?;
            if tn != n || th != h || tw != w {
                return Err(Error::shape("concat_channels", "N/H/W mismatch"));
            }
            channels.push(tc);
        }
        let c_total: usize = channels.iter().sum();
        let hw = h * w;
        let mut out = vec![0.0f32; n * c_total * hw];
        for ni in 0..n {
            let mut coff = 0;
            for (t, &tc) in inputs.iter().zip(&channels) {
                let src = t.data();
                let sbase = ni * tc * hw;
                let dbase = (ni * c_total + coff) * hw;
                out[dbase..dbase + tc * hw].copy_from_slice(&src[sbase..sbase + tc * hw]);
                coff += tc;
            }
        }
        let ch = channels.clone();
        Tensor::from_op(
            "concat_channels",
            vec![n, c_total, h, w],
            out,
            inputs.to_vec(),
            Box::new(move |gout, parents| {
                for (pi, p) in parents.iter().enumerate() {
                    let tc = ch[pi];
                    let coff: usize = ch[..pi].iter().sum();
                    let mut g = vec![0.0f32; p.numel()];
                    for ni in 0..n {
                        let dbase = ni * tc * hw;
                        let sbase = (ni * c_total + coff) * hw;
                        g[dbase..dbase + tc * hw].copy_from_slice(&gout[sbase..sbase + tc * hw]);
                    }
                    p.accumulate_grad(&g);
                }
            }),
        )
    }

    /// Per-channel global average pool: N,C,H,W -> N,C.
    pub fn global_avg_pool(&self) -> Result<Tensor> {
        let [n, c, h, w] = self.dims4("global_avg_pool")?;
        let hw = h * w;
        let x = self.data();
        let mut y = vec![0.0f32; n * c];
        for i in 0..n * c {
            let s: f32 = x[i * hw..(i + 1) * hw].iter().sum();
            y[i] = s / hw as f32;
        }
        drop(x);
        Tensor::from_op(
            "global_avg_pool",
            vec![n, c],
            y,
            vec![self.clone()],
            Box::new(move |gout, parents| {
                let mut g = vec![0.0f32; n * c * hw];
                for i in 0..n * c {
                    let gv = gout[i] / hw as f32;
                    for v in &mut g[i * hw..(i + 1) * hw] {
                        *v = gv;
                    }
                }
                parents[0].accumulate_grad(&g);
            }),
        )
    }

    pub(crate) fn dims4(&self, op: &'static str) -> Result<[usize; 4]> {
        match self.shape() {
            [n, c, h, w] => Ok([*n, *c, *h, *w]),
            other => Err(Error::shape(op, format!("expected N,C,H,W, got {:?}", other))),
        }
    }
}
