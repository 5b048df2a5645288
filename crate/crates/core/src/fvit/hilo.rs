//! HiLo attention: high-frequency heads attend within non-overlapping
//! `s × s` windows; low-frequency heads let every token attend to the
//! window-averaged tokens. Head outputs are concatenated Hi first, then Lo,
//! and mixed by the output projection. No positional terms, no biases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{matmul, FvitError, TensorF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiLoConfig {
    pub dim: usize,
    pub n_heads: usize,
    /// Fraction of heads assigned to the low-frequency branch.
    pub alpha: f64,
    pub window: usize,
}

impl HiLoConfig {
    pub fn validate(&self) -> Result<(), FvitError> {
        if self.n_heads == 0 || self.dim == 0 || self.dim % self.n_heads != 0 {
            return Err(FvitError::InvalidConfig(format!(
                "dim {} must be a positive multiple of n_heads {}",
                self.dim, self.n_heads
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(FvitError::InvalidConfig(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.window == 0 {
            return Err(FvitError::InvalidConfig("window must be at least 1".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.n_heads
    }

    /// `floor(alpha * n_heads)`.
    pub fn lo_heads(&self) -> usize {
        ((self.alpha * self.n_heads as f64).floor() as usize).min(self.n_heads)
    }

    pub fn hi_heads(&self) -> usize {
        self.n_heads - self.lo_heads()
    }

    pub fn hi_width(&self) -> usize {
        self.hi_heads() * self.head_dim()
    }

    pub fn lo_width(&self) -> usize {
        self.lo_heads() * self.head_dim()
    }
}

/// Projections of shape `(dim, heads * head_dim)` per branch, and the
/// `(dim, dim)` output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct HiLoWeights {
    pub hi_q: TensorF,
    pub hi_k: TensorF,
    pub hi_v: TensorF,
    pub lo_q: TensorF,
    pub lo_k: TensorF,
    pub lo_v: TensorF,
    pub out: TensorF,
}

impl HiLoWeights {
    pub fn zeros(cfg: &HiLoConfig) -> Self {
        let (c, a, b) = (cfg.dim, cfg.hi_width(), cfg.lo_width());
        Self {
            hi_q: TensorF::zeros(vec![c, a]),
            hi_k: TensorF::zeros(vec![c, a]),
            hi_v: TensorF::zeros(vec![c, a]),
            lo_q: TensorF::zeros(vec![c, b]),
            lo_k: TensorF::zeros(vec![c, b]),
            lo_v: TensorF::zeros(vec![c, b]),
            out: TensorF::zeros(vec![c, c]),
        }
    }

    /// Gaussian weights with standard deviation `1/sqrt(dim)`.
    pub fn random(cfg: &HiLoConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (cfg.dim as f32).sqrt();
        let mut w = Self::zeros(cfg);
        for t in w.tensors_mut() {
            for v in t.data_mut() {
                let z: f32 = StandardNormal.sample(&mut rng);
                *v = z * scale;
            }
        }
        w
    }

    fn tensors_mut(&mut self) -> [&mut TensorF; 7] {
        [
            &mut self.hi_q,
            &mut self.hi_k,
            &mut self.hi_v,
            &mut self.lo_q,
            &mut self.lo_k,
            &mut self.lo_v,
            &mut self.out,
        ]
    }

    pub fn check(&self, cfg: &HiLoConfig) -> Result<(), FvitError> {
        cfg.validate()?;
        let (c, a, b) = (cfg.dim, cfg.hi_width(), cfg.lo_width());
        self.hi_q.expect_shape("hi.q", &[c, a])?;
        self.hi_k.expect_shape("hi.k", &[c, a])?;
        self.hi_v.expect_shape("hi.v", &[c, a])?;
        self.lo_q.expect_shape("lo.q", &[c, b])?;
        self.lo_k.expect_shape("lo.k", &[c, b])?;
        self.lo_v.expect_shape("lo.v", &[c, b])?;
        self.out.expect_shape("attn.out", &[c, c])
    }
}

/// Attention probability rows recorded during a forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttentionTrace {
    /// One row per (window, head, query), over the window's tokens.
    pub hi: Vec<Vec<f32>>,
    /// One row per (head, query), over the pooled tokens.
    pub lo: Vec<Vec<f32>>,
}

struct MapShape {
    h: usize,
    w: usize,
    c: usize,
}

fn check_input(x: &TensorF, cfg: &HiLoConfig) -> Result<MapShape, FvitError> {
    cfg.validate()?;
    let &[h, w, c] = x.shape() else {
        return Err(FvitError::ShapeMismatch {
            name: "input".into(),
            expected: vec![0, 0, cfg.dim],
            found: x.shape().to_vec(),
        });
    };
    if c != cfg.dim {
        return Err(FvitError::ShapeMismatch {
            name: "input".into(),
            expected: vec![h, w, cfg.dim],
            found: x.shape().to_vec(),
        });
    }
    if h == 0 || w == 0 || h % cfg.window != 0 || w % cfg.window != 0 {
        return Err(FvitError::WindowIndivisible {
            h,
            w,
            window: cfg.window,
        });
    }
    Ok(MapShape { h, w, c })
}

/// Token indices (row-major over the map) of each window, windows in
/// row-major order.
fn windows(h: usize, w: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity((h / s) * (w / s));
    for wy in 0..h / s {
        for wx in 0..w / s {
            let mut tokens = Vec::with_capacity(s * s);
            for dy in 0..s {
                for dx in 0..s {
                    tokens.push((wy * s + dy) * w + wx * s + dx);
                }
            }
            out.push(tokens);
        }
    }
    out
}

fn softmax_in_place(logits: &mut [f32]) {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

/// Scaled dot-product attention of one head: query row `q` against key and
/// value rows selected by `keys`, each `hd` wide at column offset `off` of
/// row stride `stride`. Accumulates into `out`.
#[allow(clippy::too_many_arguments)]
fn attend_one(
    q: &[f32],
    k: &[f32],
    v: &[f32],
    keys: &[usize],
    stride: usize,
    off: usize,
    hd: usize,
    scale: f32,
    out: &mut [f32],
    trace: Option<&mut Vec<Vec<f32>>>,
) {
    let mut p: Vec<f32> = keys
        .iter()
        .map(|&j| {
            let kj = &k[j * stride + off..j * stride + off + hd];
            q.iter().zip(kj).map(|(a, b)| a * b).sum::<f32>() * scale
        })
        .collect();
    softmax_in_place(&mut p);
    for (&pj, &j) in p.iter().zip(keys) {
        let vj = &v[j * stride + off..j * stride + off + hd];
        for (o, &vv) in out.iter_mut().zip(vj) {
            *o += pj * vv;
        }
    }
    if let Some(t) = trace {
        t.push(p);
    }
}

fn hi_impl(
    x: &TensorF,
    cfg: &HiLoConfig,
    wts: &HiLoWeights,
    mut trace: Option<&mut Vec<Vec<f32>>>,
) -> Result<TensorF, FvitError> {
    let m = check_input(x, cfg)?;
    wts.check(cfg)?;
    let n = m.h * m.w;
    let width = cfg.hi_width();
    let hd = cfg.head_dim();
    let scale = 1.0 / (hd as f32).sqrt();
    let q = matmul(x.data(), n, m.c, wts.hi_q.data(), width);
    let k = matmul(x.data(), n, m.c, wts.hi_k.data(), width);
    let v = matmul(x.data(), n, m.c, wts.hi_v.data(), width);
    let mut out = vec![0.0f32; n * width];
    for tokens in windows(m.h, m.w, cfg.window) {
        for head in 0..cfg.hi_heads() {
            let off = head * hd;
            for &t in &tokens {
                let qt = &q[t * width + off..t * width + off + hd];
                let dst = &mut out[t * width + off..t * width + off + hd];
                attend_one(qt, &k, &v, &tokens, width, off, hd, scale, dst, trace.as_deref_mut());
            }
        }
    }
    TensorF::new(vec![m.h, m.w, width], out)
}

/// Window-averaged tokens, `(H/s · W/s, C)` in window order.
fn pool(x: &TensorF, m: &MapShape, s: usize) -> Vec<f32> {
    let inv = 1.0 / (s * s) as f32;
    let mut out = Vec::new();
    for tokens in windows(m.h, m.w, s) {
        let mut acc = vec![0.0f32; m.c];
        for &t in &tokens {
            for (a, &xv) in acc.iter_mut().zip(&x.data()[t * m.c..(t + 1) * m.c]) {
                *a += xv;
            }
        }
        out.extend(acc.into_iter().map(|a| a * inv));
    }
    out
}

fn lo_impl(
    x: &TensorF,
    cfg: &HiLoConfig,
    wts: &HiLoWeights,
    mut trace: Option<&mut Vec<Vec<f32>>>,
) -> Result<TensorF, FvitError> {
    let m = check_input(x, cfg)?;
    wts.check(cfg)?;
    let n = m.h * m.w;
    let width = cfg.lo_width();
    let hd = cfg.head_dim();
    let scale = 1.0 / (hd as f32).sqrt();
    let pooled = pool(x, &m, cfg.window);
    let n_pooled = pooled.len() / m.c;
    let q = matmul(x.data(), n, m.c, wts.lo_q.data(), width);
    let k = matmul(&pooled, n_pooled, m.c, wts.lo_k.data(), width);
    let v = matmul(&pooled, n_pooled, m.c, wts.lo_v.data(), width);
    let keys: Vec<usize> = (0..n_pooled).collect();
    let mut out = vec![0.0f32; n * width];
    for head in 0..cfg.lo_heads() {
        let off = head * hd;
        for t in 0..n {
            let qt = &q[t * width + off..t * width + off + hd];
            let dst = &mut out[t * width + off..t * width + off + hd];
            attend_one(qt, &k, &v, &keys, width, off, hd, scale, dst, trace.as_deref_mut());
        }
    }
    TensorF::new(vec![m.h, m.w, width], out)
}

/// High-frequency head outputs before the output projection,
/// `(H, W, Hh · head_dim)`.
pub fn hi_branch(x: &TensorF, cfg: &HiLoConfig, w: &HiLoWeights) -> Result<TensorF, FvitError> {
    hi_impl(x, cfg, w, None)
}

/// Low-frequency head outputs before the output projection,
/// `(H, W, Lh · head_dim)`.
pub fn lo_branch(x: &TensorF, cfg: &HiLoConfig, w: &HiLoWeights) -> Result<TensorF, FvitError> {
    lo_impl(x, cfg, w, None)
}

pub fn hilo_forward(x: &TensorF, cfg: &HiLoConfig, w: &HiLoWeights) -> Result<TensorF, FvitError> {
    forward(x, cfg, w, None)
}

pub fn hilo_forward_traced(
    x: &TensorF,
    cfg: &HiLoConfig,
    w: &HiLoWeights,
) -> Result<(TensorF, AttentionTrace), FvitError> {
    let mut trace = AttentionTrace::default();
    let y = forward(x, cfg, w, Some(&mut trace))?;
    Ok((y, trace))
}

fn forward(
    x: &TensorF,
    cfg: &HiLoConfig,
    w: &HiLoWeights,
    trace: Option<&mut AttentionTrace>,
) -> Result<TensorF, FvitError> {
    let (hi_trace, lo_trace) = match trace {
        Some(t) => (Some(&mut t.hi), Some(&mut t.lo)),
        None => (None, None),
    };
    let hi = hi_impl(x, cfg, w, hi_trace)?;
    let lo = lo_impl(x, cfg, w, lo_trace)?;
    let (h, wd, c) = (x.shape()[0], x.shape()[1], cfg.dim);
    let (a, b) = (cfg.hi_width(), cfg.lo_width());
    let n = h * wd;
    let mut cat = Vec::with_capacity(n * c);
    for t in 0..n {
        cat.extend_from_slice(&hi.data()[t * a..(t + 1) * a]);
        cat.extend_from_slice(&lo.data()[t * b..(t + 1) * b]);
    }
    let y = matmul(&cat, n, c, w.out.data(), c);
    TensorF::new(vec![h, wd, c], y)
}
