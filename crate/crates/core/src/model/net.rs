use alloc::format;
use alloc::vec::Vec;

use super::{ModelParams, Scalar};
use crate::error::{Error, Result};
use crate::labeling::{MASKED, NUM_CLASSES};

/// Activations kept for the backward pass. All row-major, one row per frame.
pub struct ForwardOutput<T> {
    pub frames: usize,
    pub valid: usize,
    embed: Vec<T>,
    scales: Vec<T>,
    fused: Vec<T>,
    z: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    att: Vec<T>,
    y: Vec<T>,
    /// `frames x 10`.
    pub logits: Vec<T>,
}

fn linear<T: Scalar>(x: &[T], rows: usize, n_in: usize, w: &[T], b: &[T], n_out: usize) -> Vec<T> {
    let mut y = alloc::vec![T::zero(); rows * n_out];
    for r in 0..rows {
        let xr = &x[r * n_in..(r + 1) * n_in];
        for o in 0..n_out {
            let wo = &w[o * n_in..(o + 1) * n_in];
            let mut acc = b[o];
            for i in 0..n_in {
                acc += xr[i] * wo[i];
            }
            y[r * n_out + o] = acc;
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn linear_backward<T: Scalar>(
    x: &[T],
    dy: &[T],
    rows: usize,
    n_in: usize,
    n_out: usize,
    w: &[T],
    dw: &mut [T],
    db: &mut [T],
    dx: Option<&mut [T]>,
) {
    for r in 0..rows {
        let xr = &x[r * n_in..(r + 1) * n_in];
        for o in 0..n_out {
            let g = dy[r * n_out + o];
            if g == T::zero() {
                continue;
            }
            db[o] += g;
            let dwo = &mut dw[o * n_in..(o + 1) * n_in];
            for i in 0..n_in {
                dwo[i] += g * xr[i];
            }
        }
    }
    if let Some(dx) = dx {
        for r in 0..rows {
            for o in 0..n_out {
                let g = dy[r * n_out + o];
                if g == T::zero() {
                    continue;
                }
                let wo = &w[o * n_in..(o + 1) * n_in];
                let dxr = &mut dx[r * n_in..(r + 1) * n_in];
                for i in 0..n_in {
                    dxr[i] += g * wo[i];
                }
            }
        }
    }
}

#[inline]
fn src_frame(t: usize, kk: usize, pad: usize, frames: usize) -> usize {
    (t + kk).saturating_sub(pad).min(frames - 1)
}

/// Temporal convolution with edge replication. Output rows are written into
/// `out` with row stride `stride` starting at column `col`.
#[allow(clippy::too_many_arguments)]
fn conv<T: Scalar>(
    x: &[T],
    frames: usize,
    cin: usize,
    w: &[T],
    b: &[T],
    cout: usize,
    k: usize,
    out: &mut [T],
    stride: usize,
    col: usize,
) {
    let pad = (k - 1) / 2;
    for t in 0..frames {
        let row = &mut out[t * stride + col..t * stride + col + cout];
        row.copy_from_slice(b);
        for kk in 0..k {
            let src = &x[src_frame(t, kk, pad, frames) * cin..][..cin];
            for (o, acc) in row.iter_mut().enumerate() {
                let wo = &w[o * cin * k..];
                let mut s = T::zero();
                for i in 0..cin {
                    s += wo[i * k + kk] * src[i];
                }
                *acc += s;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Scalar>(
    x: &[T],
    dy: &[T],
    stride: usize,
    col: usize,
    frames: usize,
    cin: usize,
    cout: usize,
    k: usize,
    w: &[T],
    dw: &mut [T],
    db: &mut [T],
    dx: &mut [T],
) {
    let pad = (k - 1) / 2;
    for t in 0..frames {
        let g = &dy[t * stride + col..t * stride + col + cout];
        for (o, &go) in g.iter().enumerate() {
            db[o] += go;
        }
        for kk in 0..k {
            let s = src_frame(t, kk, pad, frames);
            let src = &x[s * cin..][..cin];
            let dsrc = &mut dx[s * cin..][..cin];
            for (o, &go) in g.iter().enumerate() {
                if go == T::zero() {
                    continue;
                }
                let base = o * cin * k + kk;
                for i in 0..cin {
                    dw[base + i * k] += go * src[i];
                    dsrc[i] += go * w[base + i * k];
                }
            }
        }
    }
}

fn relu<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

fn relu_backward<T: Scalar>(out: &[T], d: &mut [T]) {
    for (g, &o) in d.iter_mut().zip(out) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Splits head `h` out of a `frames x dim` matrix into a contiguous `frames x dh` block.
fn head_block<T: Scalar>(m: &[T], frames: usize, dim: usize, h: usize, dh: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(frames * dh);
    for t in 0..frames {
        out.extend_from_slice(&m[t * dim + h * dh..t * dim + (h + 1) * dh]);
    }
    out
}

/// Softmax of scaled scores of query `qi` against the first `valid` keys.
fn attention_row<T: Scalar>(qi: &[T], kh: &[T], valid: usize, dh: usize, scale: T, p: &mut [T]) {
    let mut max = T::neg_infinity();
    for j in 0..valid {
        let kj = &kh[j * dh..(j + 1) * dh];
        let mut s = T::zero();
        for d in 0..dh {
            s += qi[d] * kj[d];
        }
        s *= scale;
        p[j] = s;
        if s > max {
            max = s;
        }
    }
    let mut sum = T::zero();
    for pj in &mut p[..valid] {
        *pj = (*pj - max).exp();
        sum += *pj;
    }
    let inv = T::one() / sum;
    for pj in &mut p[..valid] {
        *pj *= inv;
    }
}

/// Runs the network on `frames x input_bins` features. Frames at and after
/// `valid` are padding: they are never attended to.
pub fn forward<T: Scalar>(params: &ModelParams<T>, x: &[T], frames: usize, valid: usize) -> Result<ForwardOutput<T>> {
    let cfg = &params.config;
    let bins = cfg.input_bins;
    if x.len() != frames * bins || frames == 0 {
        return Err(Error::BadTensor(format!("input has {} values, expected {frames} x {bins}", x.len())));
    }
    if valid == 0 || valid > frames {
        return Err(Error::BadTensor(format!("valid length {valid} outside 1..={frames}")));
    }
    let (c0, c1, a) = (cfg.c0(), cfg.c1(), cfg.attention_dim);
    let n_scales = cfg.conv_scales.len();
    let cat = c0 * n_scales;

    let embed = linear(x, frames, bins, params.get("embed.weight"), params.get("embed.bias"), c0);

    let mut scales = alloc::vec![T::zero(); frames * cat];
    for (s, &k) in cfg.conv_scales.iter().enumerate() {
        let w = params.get(&format!("msconv.{s}.weight"));
        let b = params.get(&format!("msconv.{s}.bias"));
        conv(&embed, frames, c0, w, b, c0, k, &mut scales, cat, s * c0);
    }
    relu(&mut scales);

    let mut fused = alloc::vec![T::zero(); frames * c1];
    conv(&scales, frames, cat, params.get("fuse.weight"), params.get("fuse.bias"), c1, 3, &mut fused, c1, 0);
    relu(&mut fused);

    let z = linear(&fused, frames, c1, params.get("proj.weight"), params.get("proj.bias"), a);
    let q = linear(&z, frames, a, params.get("attn.q.weight"), params.get("attn.q.bias"), a);
    let k = linear(&z, frames, a, params.get("attn.k.weight"), params.get("attn.k.bias"), a);
    let v = linear(&z, frames, a, params.get("attn.v.weight"), params.get("attn.v.bias"), a);

    let heads = cfg.attention_heads;
    let dh = a / heads;
    let scale = T::one() / T::of(dh as f64).sqrt();
    let mut att = alloc::vec![T::zero(); frames * a];
    let mut p = alloc::vec![T::zero(); valid];
    for h in 0..heads {
        let qh = head_block(&q, frames, a, h, dh);
        let kh = head_block(&k, frames, a, h, dh);
        let vh = head_block(&v, frames, a, h, dh);
        for i in 0..frames {
            attention_row(&qh[i * dh..(i + 1) * dh], &kh, valid, dh, scale, &mut p);
            let oi = &mut att[i * a + h * dh..i * a + (h + 1) * dh];
            for (j, &pj) in p.iter().enumerate() {
                let vj = &vh[j * dh..(j + 1) * dh];
                for d in 0..dh {
                    oi[d] += pj * vj[d];
                }
            }
        }
    }

    let mut y = linear(&att, frames, a, params.get("attn.out.weight"), params.get("attn.out.bias"), a);
    for (yi, &zi) in y.iter_mut().zip(&z) {
        *yi += zi;
    }
    let logits = linear(&y, frames, a, params.get("head.weight"), params.get("head.bias"), cfg.classes);
    Ok(ForwardOutput { frames, valid, embed, scales, fused, z, q, k, v, att, y, logits })
}

/// Weighted mean cross-entropy over frames whose label is not [`MASKED`],
/// and the matching gradient with respect to the logits.
///
/// Returns `(sum of weighted losses, sum of weights, dlogits)` with `dlogits`
/// scaled by `grad_scale` rather than normalized, so batches can share a
/// denominator.
fn cross_entropy_parts<T: Scalar>(
    logits: &[T],
    labels: &[u8],
    weights: Option<&[f64; NUM_CLASSES]>,
    grad_scale: f64,
) -> Result<(f64, f64, Vec<T>)> {
    let n = labels.len();
    if logits.len() != n * NUM_CLASSES {
        return Err(Error::LengthMismatch(logits.len() / NUM_CLASSES, n));
    }
    let mut dlogits = alloc::vec![T::zero(); logits.len()];
    let (mut loss, mut total) = (0.0f64, 0.0f64);
    for t in 0..n {
        let y = labels[t];
        if y == MASKED {
            continue;
        }
        if y as usize >= NUM_CLASSES {
            return Err(Error::BadTensor(format!("label {y} at frame {t} is not a class")));
        }
        let w = weights.map_or(1.0, |w| w[y as usize]);
        let row = &logits[t * NUM_CLASSES..(t + 1) * NUM_CLASSES];
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        loss += w * (lse - row[y as usize]).f64();
        total += w;
        let g = T::of(w * grad_scale);
        for c in 0..NUM_CLASSES {
            let pc = (row[c] - lse).exp();
            let target = if c == y as usize { T::one() } else { T::zero() };
            dlogits[t * NUM_CLASSES + c] = g * (pc - target);
        }
    }
    Ok((loss, total, dlogits))
}

/// Mean cross-entropy over labeled frames. Errors when every frame is masked.
pub fn masked_cross_entropy<T: Scalar>(logits: &[T], labels: &[u8]) -> Result<f64> {
    let (loss, total, _) = cross_entropy_parts(logits, labels, None, 0.0)?;
    if total == 0.0 {
        return Err(Error::AllMasked);
    }
    Ok(loss / total)
}

/// Backpropagates `dlogits` through the network, accumulating into `grads`.
pub(crate) fn backward<T: Scalar>(
    params: &ModelParams<T>,
    x: &[T],
    fw: &ForwardOutput<T>,
    dlogits: &[T],
    grads: &mut ModelParams<T>,
) {
    let cfg = &params.config;
    let (frames, valid) = (fw.frames, fw.valid);
    let (bins, c0, c1, a) = (cfg.input_bins, cfg.c0(), cfg.c1(), cfg.attention_dim);
    let n_scales = cfg.conv_scales.len();
    let cat = c0 * n_scales;
    let classes = cfg.classes;

    let mut dy = alloc::vec![T::zero(); frames * a];
    accumulate_linear(params, grads, "head", &fw.y, dlogits, frames, a, classes, Some(&mut dy));

    // residual: dz receives dy directly
    let mut dz = dy.clone();
    let mut datt = alloc::vec![T::zero(); frames * a];
    accumulate_linear(params, grads, "attn.out", &fw.att, &dy, frames, a, a, Some(&mut datt));

    let heads = cfg.attention_heads;
    let dh = a / heads;
    let scale = T::one() / T::of(dh as f64).sqrt();
    let mut dq = alloc::vec![T::zero(); frames * a];
    let mut dk = alloc::vec![T::zero(); frames * a];
    let mut dv = alloc::vec![T::zero(); frames * a];
    let mut p = alloc::vec![T::zero(); valid];
    let mut dp = alloc::vec![T::zero(); valid];
    for h in 0..heads {
        let qh = head_block(&fw.q, frames, a, h, dh);
        let kh = head_block(&fw.k, frames, a, h, dh);
        let vh = head_block(&fw.v, frames, a, h, dh);
        let doh = head_block(&datt, frames, a, h, dh);
        let mut dqh = alloc::vec![T::zero(); frames * dh];
        let mut dkh = alloc::vec![T::zero(); frames * dh];
        let mut dvh = alloc::vec![T::zero(); frames * dh];
        for i in 0..frames {
            let doi = &doh[i * dh..(i + 1) * dh];
            if doi.iter().all(|&g| g == T::zero()) {
                continue;
            }
            let qi = &qh[i * dh..(i + 1) * dh];
            attention_row(qi, &kh, valid, dh, scale, &mut p);
            let mut dot = T::zero();
            for j in 0..valid {
                let vj = &vh[j * dh..(j + 1) * dh];
                let mut s = T::zero();
                for d in 0..dh {
                    s += doi[d] * vj[d];
                }
                dp[j] = s;
                dot += p[j] * s;
            }
            let dqi = &mut dqh[i * dh..(i + 1) * dh];
            for j in 0..valid {
                let pj = p[j];
                let ds = pj * (dp[j] - dot) * scale;
                let kj = &kh[j * dh..(j + 1) * dh];
                let dkj = &mut dkh[j * dh..(j + 1) * dh];
                for d in 0..dh {
                    dqi[d] += ds * kj[d];
                    dkj[d] += ds * qi[d];
                }
                let dvj = &mut dvh[j * dh..(j + 1) * dh];
                for d in 0..dh {
                    dvj[d] += pj * doi[d];
                }
            }
        }
        for t in 0..frames {
            let r = t * a + h * dh;
            dq[r..r + dh].copy_from_slice(&dqh[t * dh..(t + 1) * dh]);
            dk[r..r + dh].copy_from_slice(&dkh[t * dh..(t + 1) * dh]);
            dv[r..r + dh].copy_from_slice(&dvh[t * dh..(t + 1) * dh]);
        }
    }
    accumulate_linear(params, grads, "attn.q", &fw.z, &dq, frames, a, a, Some(&mut dz));
    accumulate_linear(params, grads, "attn.k", &fw.z, &dk, frames, a, a, Some(&mut dz));
    accumulate_linear(params, grads, "attn.v", &fw.z, &dv, frames, a, a, Some(&mut dz));

    let mut dfused = alloc::vec![T::zero(); frames * c1];
    accumulate_linear(params, grads, "proj", &fw.fused, &dz, frames, c1, a, Some(&mut dfused));
    relu_backward(&fw.fused, &mut dfused);

    let mut dscales = alloc::vec![T::zero(); frames * cat];
    accumulate_conv(params, grads, "fuse", &fw.scales, &dfused, c1, 0, frames, cat, c1, 3, &mut dscales);
    relu_backward(&fw.scales, &mut dscales);

    let mut dembed = alloc::vec![T::zero(); frames * c0];
    for (s, &k) in cfg.conv_scales.iter().enumerate() {
        let name = format!("msconv.{s}");
        accumulate_conv(params, grads, &name, &fw.embed, &dscales, cat, s * c0, frames, c0, c0, k, &mut dembed);
    }
    accumulate_linear(params, grads, "embed", x, &dembed, frames, bins, c0, None);
}

#[allow(clippy::too_many_arguments)]
fn accumulate_linear<T: Scalar>(
    params: &ModelParams<T>,
    grads: &mut ModelParams<T>,
    layer: &str,
    x: &[T],
    dy: &[T],
    rows: usize,
    n_in: usize,
    n_out: usize,
    dx: Option<&mut [T]>,
) {
    let wn = format!("{layer}.weight");
    let bn = format!("{layer}.bias");
    let mut dw = core::mem::take(&mut grads.tensors.get_mut(&wn).expect("tensor").data);
    let mut db = core::mem::take(&mut grads.tensors.get_mut(&bn).expect("tensor").data);
    linear_backward(x, dy, rows, n_in, n_out, params.get(&wn), &mut dw, &mut db, dx);
    grads.tensors.get_mut(&wn).expect("tensor").data = dw;
    grads.tensors.get_mut(&bn).expect("tensor").data = db;
}

#[allow(clippy::too_many_arguments)]
fn accumulate_conv<T: Scalar>(
    params: &ModelParams<T>,
    grads: &mut ModelParams<T>,
    layer: &str,
    x: &[T],
    dy: &[T],
    stride: usize,
    col: usize,
    frames: usize,
    cin: usize,
    cout: usize,
    k: usize,
    dx: &mut [T],
) {
    let wn = format!("{layer}.weight");
    let bn = format!("{layer}.bias");
    let mut dw = core::mem::take(&mut grads.tensors.get_mut(&wn).expect("tensor").data);
    let mut db = core::mem::take(&mut grads.tensors.get_mut(&bn).expect("tensor").data);
    conv_backward(x, dy, stride, col, frames, cin, cout, k, params.get(&wn), &mut dw, &mut db, dx);
    grads.tensors.get_mut(&wn).expect("tensor").data = dw;
    grads.tensors.get_mut(&bn).expect("tensor").data = db;
}

/// Forward pass, weighted loss parts and accumulated gradients for one window.
/// Gradients are scaled by `grad_scale`; returns `(loss sum, weight sum, forward)`.
pub(crate) fn accumulate_window<T: Scalar>(
    params: &ModelParams<T>,
    x: &[T],
    labels: &[u8],
    valid: usize,
    weights: Option<&[f64; NUM_CLASSES]>,
    grad_scale: f64,
    grads: &mut ModelParams<T>,
) -> Result<(f64, f64, ForwardOutput<T>)> {
    let frames = labels.len();
    let fw = forward(params, x, frames, valid)?;
    let (loss, total, dlogits) = cross_entropy_parts(&fw.logits, labels, weights, grad_scale)?;
    if total > 0.0 {
        backward(params, x, &fw, &dlogits, grads);
    }
    Ok((loss, total, fw))
}

/// Mean masked cross-entropy of one window and its gradient for every tensor.
pub fn loss_and_gradients<T: Scalar>(
    params: &ModelParams<T>,
    x: &[T],
    labels: &[u8],
    valid: usize,
) -> Result<(f64, ModelParams<T>)> {
    let (_, total, _) = {
        let fw = forward(params, x, labels.len(), valid)?;
        cross_entropy_parts(&fw.logits, labels, None, 0.0)?
    };
    if total == 0.0 {
        return Err(Error::AllMasked);
    }
    let mut grads = ModelParams::zeros(&params.config);
    let (loss, total, _) = accumulate_window(params, x, labels, valid, None, 1.0 / total, &mut grads)?;
    Ok((loss / total, grads))
}

#[cfg(test)]
mod tests {
    use super::super::{init_model, ModelConfig};
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny(seed: u64) -> ModelConfig {
        ModelConfig {
            input_bins: 8,
            conv_scales: vec![3, 5],
            channels: vec![4, 6],
            attention_heads: 2,
            attention_dim: 8,
            classes: NUM_CLASSES,
            sequence_length: 32,
            seed,
        }
    }

    fn sample(seed: u64, frames: usize, bins: usize) -> (Vec<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let x = (0..frames * bins).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = (0..frames).map(|_| if rng.random_bool(0.2) { MASKED } else { rng.random_range(0..10u8) }).collect();
        (x, y)
    }

    fn loss_at(params: &ModelParams<f64>, x: &[f64], y: &[u8], valid: usize) -> f64 {
        let fw = forward(params, x, y.len(), valid).unwrap();
        masked_cross_entropy(&fw.logits, y).unwrap()
    }

    /// Five-point central differences on every parameter, compared tensor by
    /// tensor as `|g - n| / (|g| + |n|)` in the L2 norm. Tensors whose true
    /// gradient vanishes (the key bias, by softmax shift invariance) only
    /// carry difference noise, so norms below 1e-7 are compared absolutely.
    fn gradient_check(seed: u64, valid: usize) -> f64 {
        let cfg = tiny(seed);
        let mut params = init_model::<f64>(&cfg).unwrap();
        let (x, y) = sample(seed, 32, 8);
        let (_, grads) = loss_and_gradients(&params, &x, &y, valid).unwrap();
        let h = 1e-5;
        let names: Vec<_> = params.tensors.keys().cloned().collect();
        let mut worst = 0.0f64;
        for name in names {
            let n = params.get(&name).len();
            let mut diff2 = 0.0;
            let mut norm_a = 0.0;
            let mut norm_n = 0.0;
            for i in 0..n {
                let orig = params.get(&name)[i];
                let mut at = |d: f64| {
                    params.get_mut(&name)[i] = orig + d;
                    loss_at(&params, &x, &y, valid)
                };
                let num = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
                params.get_mut(&name)[i] = orig;
                let ana = grads.get(&name)[i];
                diff2 += (num - ana) * (num - ana);
                norm_a += ana * ana;
                norm_n += num * num;
            }
            let denom = norm_a.sqrt() + norm_n.sqrt();
            let rel = diff2.sqrt() / denom.max(1e-7);
            assert!(rel < 1e-4, "{name}: relative error {rel}");
            worst = worst.max(rel);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            gradient_check(seed, 32);
        }
    }

    #[test]
    fn gradients_with_padding_mask() {
        gradient_check(11, 20);
    }

    #[test]
    fn uniform_logits_give_ln10() {
        let cfg = tiny(0);
        let mut params = init_model::<f64>(&cfg).unwrap();
        params.get_mut("head.weight").fill(0.0);
        params.get_mut("head.bias").fill(0.0);
        let (x, y) = sample(0, 32, 8);
        let l = loss_at(&params, &x, &y, 32);
        assert!((l - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn small_cross_entropy_by_hand() {
        let mut logits = vec![0.0f64; 30];
        logits[0] = 1.0;
        logits[11] = 2.0;
        logits[25] = 7.0;
        let labels = [0u8, 1, MASKED];
        let e = core::f64::consts::E;
        let expected = (((e + 9.0).ln() - 1.0) + ((e * e + 9.0).ln() - 2.0)) / 2.0;
        assert!((masked_cross_entropy(&logits, &labels).unwrap() - expected).abs() < 1e-12);
        // a huge correct margin drives the loss to zero
        let mut sharp = vec![0.0f64; 10];
        sharp[3] = 100.0;
        assert!(masked_cross_entropy(&sharp, &[3]).unwrap() < 1e-40);
    }

    #[test]
    fn all_masked_is_an_error() {
        let params = init_model::<f64>(&tiny(0)).unwrap();
        let (x, _) = sample(0, 32, 8);
        let y = vec![MASKED; 32];
        assert_eq!(loss_and_gradients(&params, &x, &y, 32).unwrap_err(), Error::AllMasked);
    }

    #[test]
    fn unused_class_gradients_are_finite() {
        let params = init_model::<f64>(&tiny(3)).unwrap();
        let (x, _) = sample(3, 32, 8);
        let y = vec![4u8; 32];
        let (_, g) = loss_and_gradients(&params, &x, &y, 32).unwrap();
        assert!(g.is_finite());
    }

    #[test]
    fn constant_input_gives_constant_output() {
        let params = init_model::<f64>(&tiny(2)).unwrap();
        let x = vec![0.0; 32 * 8];
        let fw = forward(&params, &x, 32, 32).unwrap();
        for t in 1..32 {
            for c in 0..10 {
                assert!((fw.logits[t * 10 + c] - fw.logits[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn padded_keys_are_ignored() {
        // with a width-1 scale and a fuse kernel reduced to its center tap,
        // every layer before attention is per-frame, so the only way padding
        // can reach valid frames is by being attended to
        let cfg = ModelConfig { conv_scales: vec![1], ..tiny(4) };
        let mut params = init_model::<f64>(&cfg).unwrap();
        for (i, w) in params.get_mut("fuse.weight").iter_mut().enumerate() {
            if i % 3 != 1 {
                *w = 0.0;
            }
        }
        let (x, _) = sample(4, 32, 8);
        let short = forward(&params, &x[..20 * 8], 20, 20).unwrap();
        let padded = forward(&params, &x, 32, 20).unwrap();
        let unmasked = forward(&params, &x, 32, 32).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(p, q)| (p - q).abs() < 1e-12);
        assert!(close(&short.logits, &padded.logits[..200]));
        assert!(!close(&short.logits, &unmasked.logits[..200]));
    }
}
