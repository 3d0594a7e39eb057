//! Dense row-major `f32` tensors and the handful of kernels the pipeline needs.
//!
//! Image-like tensors are channel-last (`H×W×C`). Every kernel accumulates in
//! `f32` in a fixed order, so results are bit-reproducible across runs.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.contains(&0) {
            return dim_err(format!("zero extent in shape {shape:?}"));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return dim_err(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f32) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// `(H, W, C)` of a rank-3 tensor.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            &[h, w, c] => Ok((h, w, c)),
            s => dim_err(format!("expected H×W×C tensor, got shape {s:?}")),
        }
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            s => dim_err(format!("expected matrix, got shape {s:?}")),
        }
    }

    /// Flattens an `H×W×C` map into an `HW×C` matrix (no copy).
    pub fn flatten_pixels(self) -> Result<Self> {
        let (h, w, c) = self.dims3()?;
        self.reshape(vec![h * w, c])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(mut self, f: impl Fn(f32) -> f32) -> Self {
        self.data.iter_mut().for_each(|v| *v = f(*v));
        self
    }

    pub fn relu(self) -> Self {
        self.map(|v| v.max(0.0))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return dim_err(format!(
                "add: shapes {:?} and {:?} differ",
                self.shape, other.shape
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }
}

/// Channel concatenation of `H×W×C` maps with identical spatial extents.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let Some(first) = parts.first() else {
        return dim_err("concat of zero tensors");
    };
    let (h, w, _) = first.dims3()?;
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        let (ph, pw, pc) = p.dims3()?;
        if (ph, pw) != (h, w) {
            return dim_err(format!(
                "concat: spatial extents {ph}×{pw} differ from {h}×{w}"
            ));
        }
        widths.push(pc);
    }
    let total: usize = widths.iter().sum();
    let mut data = Vec::with_capacity(h * w * total);
    for px in 0..h * w {
        for (p, &c) in parts.iter().zip(&widths) {
            data.extend_from_slice(&p.data[px * c..(px + 1) * c]);
        }
    }
    Tensor::new(vec![h, w, total], data)
}

/// Rearranges each `r×r` spatial block into channels; block offset `(dy, dx)`
/// lands in channel group `dy·r + dx`.
pub fn space_to_depth(f: &Tensor, r: usize) -> Result<Tensor> {
    let (h, w, c) = f.dims3()?;
    if r == 0 {
        return dim_err("block factor must be ≥ 1");
    }
    if h % r != 0 || w % r != 0 {
        return dim_err(format!("extents {h}×{w} not divisible by block {r}"));
    }
    let (oh, ow, oc) = (h / r, w / r, c * r * r);
    let mut out = Vec::with_capacity(f.len());
    for oy in 0..oh {
        for ox in 0..ow {
            for dy in 0..r {
                for dx in 0..r {
                    let src = ((oy * r + dy) * w + ox * r + dx) * c;
                    out.extend_from_slice(&f.data[src..src + c]);
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, oc], out)
}

/// Exact inverse of [`space_to_depth`].
pub fn depth_to_space(f: &Tensor, r: usize) -> Result<Tensor> {
    let (h, w, c) = f.dims3()?;
    if r == 0 {
        return dim_err("block factor must be ≥ 1");
    }
    if c % (r * r) != 0 {
        return dim_err(format!("{c} channels not divisible by {}", r * r));
    }
    let (oh, ow, oc) = (h * r, w * r, c / (r * r));
    let mut out = vec![0.0; f.len()];
    for y in 0..h {
        for x in 0..w {
            let src = (y * w + x) * c;
            for dy in 0..r {
                for dx in 0..r {
                    let g = (dy * r + dx) * oc;
                    let dst = ((y * r + dy) * ow + x * r + dx) * oc;
                    out[dst..dst + oc].copy_from_slice(&f.data[src + g..src + g + oc]);
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, oc], out)
}

/// `a (M×K) · b (K×N)`. Each output accumulates over `K` left to right.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (kb, n) = b.dims2()?;
    if k != kb {
        return dim_err(format!("matmul: {m}×{k} · {kb}×{n}"));
    }
    let mut out = vec![0.0f32; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a.data[i * k..(i + 1) * k].iter().enumerate() {
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// `a (M×K) · bᵀ` for `b` stored as `N×K`; every entry is a contiguous dot product.
pub fn matmul_transposed(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (n, kb) = b.dims2()?;
    if k != kb {
        return dim_err(format!("matmul_transposed: {m}×{k} · ({n}×{kb})ᵀ"));
    }
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        let arow = &a.data[i * k..(i + 1) * k];
        for j in 0..n {
            out.push(dot(arow, &b.data[j * k..(j + 1) * k]));
        }
    }
    Tensor::new(vec![m, n], out)
}

#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(a: &Tensor) -> Result<Tensor> {
    let mut out = a.clone();
    softmax_rows_in_place(&mut out)?;
    Ok(out)
}

pub fn softmax_rows_in_place(a: &mut Tensor) -> Result<()> {
    let (_, n) = a.dims2()?;
    for row in a.data.chunks_exact_mut(n) {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f32;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = 1.0 / sum;
        row.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(())
}

/// 2-D convolution over a channel-last map with weights laid out `k×k×Cin×Cout`.
pub fn conv2d(
    f: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (h, w, cin) = f.dims3()?;
    let (kh, kw, wcin, cout) = match weight.shape() {
        &[kh, kw, ci, co] => (kh, kw, ci, co),
        s => return dim_err(format!("conv weight must be k×k×Cin×Cout, got {s:?}")),
    };
    if kh != kw {
        return dim_err(format!("non-square kernel {kh}×{kw}"));
    }
    if wcin != cin {
        return dim_err(format!(
            "conv: input has {cin} channels, weight expects {wcin}"
        ));
    }
    if stride == 0 {
        return dim_err("stride must be ≥ 1");
    }
    if let Some(b) = bias {
        if b.len() != cout {
            return dim_err(format!("bias length {} ≠ {cout}", b.len()));
        }
    }
    let k = kh;
    if h + 2 * pad < k || w + 2 * pad < k {
        return dim_err(format!("kernel {k} larger than padded input {h}×{w}"));
    }
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0f32; oh * ow * cout];
    let wd = weight.data();
    for oy in 0..oh {
        for ox in 0..ow {
            let acc = &mut out[(oy * ow + ox) * cout..(oy * ow + ox + 1) * cout];
            if let Some(b) = bias {
                acc.copy_from_slice(b);
            }
            for ky in 0..k {
                let iy = (oy * stride + ky) as isize - pad as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * stride + kx) as isize - pad as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let src = (iy as usize * w + ix as usize) * cin;
                    let wbase = (ky * k + kx) * cin * cout;
                    for (ci, &v) in f.data[src..src + cin].iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        let wrow = &wd[wbase + ci * cout..wbase + (ci + 1) * cout];
                        for (a, &wv) in acc.iter_mut().zip(wrow) {
                            *a += v * wv;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, cout], out)
}

/// Bilinear resize, align-corners = false (half-pixel centers, edge clamped).
pub fn resize_bilinear(f: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (h, w, c) = f.dims3()?;
    if out_h == 0 || out_w == 0 {
        return dim_err("resize to zero extent");
    }
    let ys = sample_positions(h, out_h);
    let xs = sample_positions(w, out_w);
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p00 = &f.data[(y0 * w + x0) * c..][..c];
            let p01 = &f.data[(y0 * w + x1) * c..][..c];
            let p10 = &f.data[(y1 * w + x0) * c..][..c];
            let p11 = &f.data[(y1 * w + x1) * c..][..c];
            for ch in 0..c {
                let top = p00[ch] + (p01[ch] - p00[ch]) * fx;
                let bot = p10[ch] + (p11[ch] - p10[ch]) * fx;
                out.push(top + (bot - top) * fy);
            }
        }
    }
    Tensor::new(vec![out_h, out_w, c], out)
}

fn sample_positions(input: usize, output: usize) -> Vec<(usize, usize, f32)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(input - 1);
            let i1 = (i0 + 1).min(input - 1);
            (i0, i1, (src - i0 as f64) as f32)
        })
        .collect()
}

pub fn upsample_bilinear_x2(f: &Tensor) -> Result<Tensor> {
    let (h, w, _) = f.dims3()?;
    resize_bilinear(f, 2 * h, 2 * w)
}

/// Mean over non-overlapping `r×r` blocks.
pub fn avg_pool(f: &Tensor, r: usize) -> Result<Tensor> {
    let (h, w, c) = f.dims3()?;
    if r == 0 || h % r != 0 || w % r != 0 {
        return dim_err(format!("avg_pool: {h}×{w} not divisible by {r}"));
    }
    let (oh, ow) = (h / r, w / r);
    let mut out = vec![0.0f32; oh * ow * c];
    let inv = 1.0 / (r * r) as f32;
    for oy in 0..oh {
        for ox in 0..ow {
            let acc = &mut out[(oy * ow + ox) * c..(oy * ow + ox + 1) * c];
            for dy in 0..r {
                for dx in 0..r {
                    let src = ((oy * r + dy) * w + ox * r + dx) * c;
                    for (a, &v) in acc.iter_mut().zip(&f.data[src..src + c]) {
                        *a += v;
                    }
                }
            }
            acc.iter_mut().for_each(|a| *a *= inv);
        }
    }
    Tensor::new(vec![oh, ow, c], out)
}

/// Keeps the first `n` channels of an `H×W×C` map.
pub fn take_channels(f: &Tensor, range: std::ops::Range<usize>) -> Result<Tensor> {
    let (h, w, c) = f.dims3()?;
    if range.end > c || range.start >= range.end {
        return Err(Error::Dimension(format!(
            "channel range {range:?} invalid for {c} channels"
        )));
    }
    let n = range.len();
    let mut out = Vec::with_capacity(h * w * n);
    for px in f.data.chunks_exact(c) {
        out.extend_from_slice(&px[range.clone()]);
    }
    Tensor::new(vec![h, w, n], out)
}
