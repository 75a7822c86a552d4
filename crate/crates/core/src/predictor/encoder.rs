//! Transformer encoder regressor over a fixed-length window.
//!
//! Input rows are projected to the model width, offset by sinusoidal
//! position codes, and passed through post-norm encoder layers
//! (multi-head self-attention and a ReLU feed-forward block, each with a
//! residual connection and layer norm). A linear head reads the final
//! position. The last layer therefore only computes that position's row;
//! earlier layers compute every row.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{gemm, Mat};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderDims {
    pub inputs: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub ff_dim: usize,
    pub window: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, Copy)]
struct Block {
    off: usize,
    rows: usize,
    cols: usize,
}

impl Block {
    fn len(&self) -> usize {
        self.rows * self.cols
    }
    fn range(&self) -> core::ops::Range<usize> {
        self.off..self.off + self.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerBlocks {
    wq: Block,
    bq: Block,
    wk: Block,
    bk: Block,
    wv: Block,
    bv: Block,
    wo: Block,
    bo: Block,
    g1: Block,
    be1: Block,
    w1: Block,
    b1: Block,
    w2: Block,
    b2: Block,
    g2: Block,
    be2: Block,
}

#[derive(Debug, Clone)]
struct Layout {
    w_in: Block,
    b_in: Block,
    layers: Vec<LayerBlocks>,
    w_head: Block,
    b_head: Block,
    total: usize,
}

fn layout(d: &EncoderDims) -> Layout {
    let mut off = 0;
    let mut block = |rows: usize, cols: usize| {
        let b = Block { off, rows, cols };
        off += rows * cols;
        b
    };
    let w_in = block(d.inputs, d.model_dim);
    let b_in = block(1, d.model_dim);
    let layers = (0..d.layers)
        .map(|_| LayerBlocks {
            wq: block(d.model_dim, d.model_dim),
            bq: block(1, d.model_dim),
            wk: block(d.model_dim, d.model_dim),
            bk: block(1, d.model_dim),
            wv: block(d.model_dim, d.model_dim),
            bv: block(1, d.model_dim),
            wo: block(d.model_dim, d.model_dim),
            bo: block(1, d.model_dim),
            g1: block(1, d.model_dim),
            be1: block(1, d.model_dim),
            w1: block(d.model_dim, d.ff_dim),
            b1: block(1, d.ff_dim),
            w2: block(d.ff_dim, d.model_dim),
            b2: block(1, d.model_dim),
            g2: block(1, d.model_dim),
            be2: block(1, d.model_dim),
        })
        .collect();
    let w_head = block(d.model_dim, d.outputs);
    let b_head = block(1, d.outputs);
    Layout { w_in, b_in, layers, w_head, b_head, total: off }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub dims: EncoderDims,
    pub params: Vec<f64>,
}

struct LnCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

struct LayerCache {
    x: Mat,
    q_start: usize,
    q: Mat,
    k: Mat,
    v: Mat,
    /// Attention weights per head, `nq × window`.
    attn: Vec<Mat>,
    ctx: Mat,
    ln1: LnCache,
    h1: Mat,
    f1: Mat,
    ln2: LnCache,
}

pub struct EncoderCache {
    input: Mat,
    layers: Vec<LayerCache>,
    /// Final-position hidden row read by the head.
    head_in: Mat,
    last: Vec<f64>,
}

fn affine(x: &Mat, params: &[f64], w: Block, b: Block) -> Mat {
    let mut y = Mat::zeros(x.rows, w.cols);
    let bias = &params[b.range()];
    for i in 0..x.rows {
        y.row_mut(i).copy_from_slice(bias);
    }
    gemm(1.0, &x.data, (x.rows, x.cols), false, &params[w.range()], (w.rows, w.cols), false, 1.0, &mut y.data);
    y
}

/// Accumulate weight/bias grads of `y = x W + b` and return `dx`.
fn affine_back(x: &Mat, dy: &Mat, params: &[f64], grads: &mut [f64], w: Block, b: Block) -> Mat {
    gemm(1.0, &x.data, (x.rows, x.cols), true, &dy.data, (dy.rows, dy.cols), false, 1.0, &mut grads[w.range()]);
    let gb = &mut grads[b.range()];
    for i in 0..dy.rows {
        for (g, d) in gb.iter_mut().zip(dy.row(i)) {
            *g += d;
        }
    }
    let mut dx = Mat::zeros(x.rows, x.cols);
    gemm(1.0, &dy.data, (dy.rows, dy.cols), false, &params[w.range()], (w.rows, w.cols), true, 0.0, &mut dx.data);
    dx
}

fn layer_norm(x: &Mat, params: &[f64], g: Block, b: Block) -> (Mat, LnCache) {
    let gain = &params[g.range()];
    let bias = &params[b.range()];
    let n = x.cols as f64;
    let mut y = Mat::zeros(x.rows, x.cols);
    let mut xhat = Mat::zeros(x.rows, x.cols);
    let mut inv_std = Vec::with_capacity(x.rows);
    for i in 0..x.rows {
        let row = x.row(i);
        let mu = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        let inv = 1.0 / libm::sqrt(var + LN_EPS);
        inv_std.push(inv);
        for j in 0..x.cols {
            let h = (row[j] - mu) * inv;
            xhat.data[i * x.cols + j] = h;
            y.data[i * x.cols + j] = gain[j] * h + bias[j];
        }
    }
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_back(dy: &Mat, cache: &LnCache, params: &[f64], grads: &mut [f64], g: Block, b: Block) -> Mat {
    let n = dy.cols as f64;
    let mut dx = Mat::zeros(dy.rows, dy.cols);
    for i in 0..dy.rows {
        let xh = cache.xhat.row(i);
        let d = dy.row(i);
        let mut dxhat = vec![0.0; dy.cols];
        for j in 0..dy.cols {
            grads[g.off + j] += d[j] * xh[j];
            grads[b.off + j] += d[j];
            dxhat[j] = d[j] * params[g.off + j];
        }
        let m1 = dxhat.iter().sum::<f64>() / n;
        let m2 = dxhat.iter().zip(xh).map(|(a, h)| a * h).sum::<f64>() / n;
        for j in 0..dy.cols {
            dx.data[i * dy.cols + j] = cache.inv_std[i] * (dxhat[j] - m1 - xh[j] * m2);
        }
    }
    dx
}

fn positional(window: usize, dim: usize) -> Mat {
    let mut p = Mat::zeros(window, dim);
    for pos in 0..window {
        for i in 0..dim {
            let expo = (2 * (i / 2)) as f64 / dim as f64;
            let angle = pos as f64 / libm::pow(10_000.0, expo);
            p.data[pos * dim + i] = if i % 2 == 0 { libm::sin(angle) } else { libm::cos(angle) };
        }
    }
    p
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(dims: EncoderDims, rng: &mut R) -> Self {
        assert!(dims.heads > 0 && dims.model_dim % dims.heads == 0, "model_dim must divide into heads");
        assert!(dims.window >= 1 && dims.layers >= 1);
        let lay = layout(&dims);
        let mut params = vec![0.0; lay.total];
        let mut xavier = |b: Block, params: &mut [f64]| {
            let bound = libm::sqrt(6.0 / (b.rows + b.cols) as f64);
            for p in &mut params[b.range()] {
                *p = rng.random_range(-bound..=bound);
            }
        };
        xavier(lay.w_in, &mut params);
        for l in &lay.layers {
            for w in [l.wq, l.wk, l.wv, l.wo, l.w1, l.w2] {
                xavier(w, &mut params);
            }
            params[l.g1.range()].iter_mut().for_each(|g| *g = 1.0);
            params[l.g2.range()].iter_mut().for_each(|g| *g = 1.0);
        }
        xavier(lay.w_head, &mut params);
        Self { dims, params }
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, input: &Mat) -> Vec<f64> {
        self.forward_cached(input).last
    }

    pub fn forward_cached(&self, input: &Mat) -> EncoderCache {
        let d = &self.dims;
        assert_eq!((input.rows, input.cols), (d.window, d.inputs), "encoder input shape");
        let lay = layout(d);
        let p = &self.params;
        let mut x = affine(input, p, lay.w_in, lay.b_in);
        let pe = positional(d.window, d.model_dim);
        x.data.iter_mut().zip(&pe.data).for_each(|(a, b)| *a += b);

        let dh = d.model_dim / d.heads;
        let scale = 1.0 / libm::sqrt(dh as f64);
        let mut caches = Vec::with_capacity(d.layers);
        for (li, lb) in lay.layers.iter().enumerate() {
            let q_start = if li + 1 == d.layers { d.window - 1 } else { 0 };
            let xq = Mat::from_vec(d.window - q_start, d.model_dim, x.data[q_start * d.model_dim..].to_vec());
            let q = affine(&xq, p, lb.wq, lb.bq);
            let k = affine(&x, p, lb.wk, lb.bk);
            let v = affine(&x, p, lb.wv, lb.bv);
            let nq = xq.rows;
            let mut ctx = Mat::zeros(nq, d.model_dim);
            let mut attn = Vec::with_capacity(d.heads);
            for h in 0..d.heads {
                let qh = q.columns(h * dh, dh);
                let kh = k.columns(h * dh, dh);
                let vh = v.columns(h * dh, dh);
                let mut s = Mat::zeros(nq, d.window);
                gemm(scale, &qh.data, (nq, dh), false, &kh.data, (d.window, dh), true, 0.0, &mut s.data);
                for i in 0..nq {
                    let row = s.row_mut(i);
                    let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut z = 0.0;
                    for v in row.iter_mut() {
                        *v = libm::exp(*v - mx);
                        z += *v;
                    }
                    row.iter_mut().for_each(|v| *v /= z);
                }
                let mut ch = Mat::zeros(nq, dh);
                gemm(1.0, &s.data, (nq, d.window), false, &vh.data, (d.window, dh), false, 0.0, &mut ch.data);
                for i in 0..nq {
                    ctx.row_mut(i)[h * dh..(h + 1) * dh].copy_from_slice(ch.row(i));
                }
                attn.push(s);
            }
            let o = affine(&ctx, p, lb.wo, lb.bo);
            let mut r1 = xq.clone();
            r1.data.iter_mut().zip(&o.data).for_each(|(a, b)| *a += b);
            let (h1, ln1) = layer_norm(&r1, p, lb.g1, lb.be1);
            let mut f1 = affine(&h1, p, lb.w1, lb.b1);
            f1.data.iter_mut().for_each(|v| *v = v.max(0.0));
            let f2 = affine(&f1, p, lb.w2, lb.b2);
            let mut r2 = h1.clone();
            r2.data.iter_mut().zip(&f2.data).for_each(|(a, b)| *a += b);
            let (h2, ln2) = layer_norm(&r2, p, lb.g2, lb.be2);
            caches.push(LayerCache { x, q_start, q, k, v, attn, ctx, ln1, h1, f1, ln2 });
            x = h2;
        }
        let last_row = Mat::from_vec(1, d.model_dim, x.row(x.rows - 1).to_vec());
        let out = affine(&last_row, p, lay.w_head, lay.b_head);
        EncoderCache { input: input.clone(), layers: caches, head_in: last_row, last: out.data }
    }

    pub fn output(cache: &EncoderCache) -> &[f64] {
        &cache.last
    }

    /// Accumulate gradients of `sum(d_out ⊙ output)` into `grads`.
    pub fn backward(&self, cache: &EncoderCache, d_out: &[f64], grads: &mut [f64]) {
        let d = &self.dims;
        let lay = layout(d);
        let p = &self.params;
        assert_eq!(grads.len(), p.len());

        let dy = Mat::from_vec(1, d.outputs, d_out.to_vec());
        let d_last = affine_back(&cache.head_in, &dy, p, grads, lay.w_head, lay.b_head);

        let dh = d.model_dim / d.heads;
        let scale = 1.0 / libm::sqrt(dh as f64);
        // gradient w.r.t. the query rows output by the current layer
        let mut d_out_rows = d_last;
        for li in (0..d.layers).rev() {
            let c = &cache.layers[li];
            let lb = lay.layers[li];
            let nq = d.window - c.q_start;
            // only the rows this layer produced can carry gradient
            let d_h2 = if d_out_rows.rows == nq {
                d_out_rows
            } else {
                Mat::from_vec(nq, d.model_dim, d_out_rows.data[(d_out_rows.rows - nq) * d.model_dim..].to_vec())
            };
            let d_r2 = layer_norm_back(&d_h2, &c.ln2, p, grads, lb.g2, lb.be2);
            let mut d_f1 = affine_back(&c.f1, &d_r2, p, grads, lb.w2, lb.b2);
            for (g, a) in d_f1.data.iter_mut().zip(&c.f1.data) {
                if *a <= 0.0 {
                    *g = 0.0;
                }
            }
            let mut d_h1 = affine_back(&c.h1, &d_f1, p, grads, lb.w1, lb.b1);
            d_h1.data.iter_mut().zip(&d_r2.data).for_each(|(a, b)| *a += b);
            let d_r1 = layer_norm_back(&d_h1, &c.ln1, p, grads, lb.g1, lb.be1);
            let d_ctx = affine_back(&c.ctx, &d_r1, p, grads, lb.wo, lb.bo);

            let mut d_q = Mat::zeros(nq, d.model_dim);
            let mut d_k = Mat::zeros(d.window, d.model_dim);
            let mut d_v = Mat::zeros(d.window, d.model_dim);
            for h in 0..d.heads {
                let a = &c.attn[h];
                let qh = c.q.columns(h * dh, dh);
                let kh = c.k.columns(h * dh, dh);
                let vh = c.v.columns(h * dh, dh);
                let dch = d_ctx.columns(h * dh, dh);
                let mut da = Mat::zeros(nq, d.window);
                gemm(1.0, &dch.data, (nq, dh), false, &vh.data, (d.window, dh), true, 0.0, &mut da.data);
                let mut dvh = Mat::zeros(d.window, dh);
                gemm(1.0, &a.data, (nq, d.window), true, &dch.data, (nq, dh), false, 0.0, &mut dvh.data);
                let mut ds = Mat::zeros(nq, d.window);
                for i in 0..nq {
                    let dot: f64 = a.row(i).iter().zip(da.row(i)).map(|(x, y)| x * y).sum();
                    for j in 0..d.window {
                        ds.data[i * d.window + j] = a.at(i, j) * (da.at(i, j) - dot);
                    }
                }
                let mut dqh = Mat::zeros(nq, dh);
                gemm(scale, &ds.data, (nq, d.window), false, &kh.data, (d.window, dh), false, 0.0, &mut dqh.data);
                let mut dkh = Mat::zeros(d.window, dh);
                gemm(scale, &ds.data, (nq, d.window), true, &qh.data, (nq, dh), false, 0.0, &mut dkh.data);
                for i in 0..nq {
                    d_q.row_mut(i)[h * dh..(h + 1) * dh].copy_from_slice(dqh.row(i));
                }
                for j in 0..d.window {
                    d_k.row_mut(j)[h * dh..(h + 1) * dh].copy_from_slice(dkh.row(j));
                    d_v.row_mut(j)[h * dh..(h + 1) * dh].copy_from_slice(dvh.row(j));
                }
            }
            let xq = Mat::from_vec(nq, d.model_dim, c.x.data[c.q_start * d.model_dim..].to_vec());
            let d_xq = affine_back(&xq, &d_q, p, grads, lb.wq, lb.bq);
            let mut d_x = affine_back(&c.x, &d_k, p, grads, lb.wk, lb.bk);
            let d_xv = affine_back(&c.x, &d_v, p, grads, lb.wv, lb.bv);
            d_x.data.iter_mut().zip(&d_xv.data).for_each(|(a, b)| *a += b);
            let tail = &mut d_x.data[c.q_start * d.model_dim..];
            for ((t, a), b) in tail.iter_mut().zip(&d_xq.data).zip(&d_r1.data) {
                *t += a + b;
            }
            d_out_rows = d_x;
        }
        // embedding: positional codes are fixed
        affine_back(&cache.input, &d_out_rows, p, grads, lay.w_in, lay.b_in);
    }
}
