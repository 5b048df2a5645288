//! Three-layer grasp regression head:
//! `FC1 (768→2048) → leaky-ReLU → FC2 (2048→1024) → leaky-ReLU → FC3 (1024→5|8)`.
//! Dropout is the identity at inference and does not appear here.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::hilo::{HiLoConfig, HiLoWeights};
use super::{matmul, FvitError, TensorF};

pub const FEATURE_DIM: usize = 768;
pub const FC1_OUT: usize = 2048;
pub const FC2_OUT: usize = 1024;
pub const LEAKY_SLOPE: f32 = 0.1;

/// `x` for `x >= 0`, `0.1 * x` otherwise.
pub fn leaky_relu(x: f32) -> f32 {
    if x >= 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionWeights {
    pub fc1_w: TensorF,
    pub fc1_b: TensorF,
    pub fc2_w: TensorF,
    pub fc2_b: TensorF,
    pub fc3_w: TensorF,
    pub fc3_b: TensorF,
}

impl RegressionWeights {
    pub fn zeros(out_dim: usize) -> Self {
        Self {
            fc1_w: TensorF::zeros(vec![FEATURE_DIM, FC1_OUT]),
            fc1_b: TensorF::zeros(vec![FC1_OUT]),
            fc2_w: TensorF::zeros(vec![FC1_OUT, FC2_OUT]),
            fc2_b: TensorF::zeros(vec![FC2_OUT]),
            fc3_w: TensorF::zeros(vec![FC2_OUT, out_dim]),
            fc3_b: TensorF::zeros(vec![out_dim]),
        }
    }

    /// Gaussian weights with standard deviation `1/sqrt(fan_in)` and biases
    /// with standard deviation 0.1.
    pub fn random(out_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Self::zeros(out_dim);
        let layers: [(&mut TensorF, f32); 6] = [
            (&mut w.fc1_w, 1.0 / (FEATURE_DIM as f32).sqrt()),
            (&mut w.fc1_b, 0.1),
            (&mut w.fc2_w, 1.0 / (FC1_OUT as f32).sqrt()),
            (&mut w.fc2_b, 0.1),
            (&mut w.fc3_w, 1.0 / (FC2_OUT as f32).sqrt()),
            (&mut w.fc3_b, 0.1),
        ];
        for (t, scale) in layers {
            for v in t.data_mut() {
                let z: f32 = StandardNormal.sample(&mut rng);
                *v = z * scale;
            }
        }
        w
    }

    pub fn out_dim(&self) -> usize {
        self.fc3_b.shape()[0]
    }

    pub fn check(&self) -> Result<(), FvitError> {
        let out = match self.fc3_w.shape() {
            [FC2_OUT, d @ (5 | 8)] => *d,
            _ => {
                return Err(FvitError::ShapeMismatch {
                    name: "fc3.weight".into(),
                    expected: vec![FC2_OUT, 5],
                    found: self.fc3_w.shape().to_vec(),
                })
            }
        };
        self.fc1_w.expect_shape("fc1.weight", &[FEATURE_DIM, FC1_OUT])?;
        self.fc1_b.expect_shape("fc1.bias", &[FC1_OUT])?;
        self.fc2_w.expect_shape("fc2.weight", &[FC1_OUT, FC2_OUT])?;
        self.fc2_b.expect_shape("fc2.bias", &[FC2_OUT])?;
        self.fc3_b.expect_shape("fc3.bias", &[out])
    }
}

/// Everything stored in a weight container.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    pub hilo: HiLoWeights,
    pub regression: RegressionWeights,
}

impl HeadWeights {
    pub fn zeros(cfg: &HiLoConfig, out_dim: usize) -> Self {
        Self {
            hilo: HiLoWeights::zeros(cfg),
            regression: RegressionWeights::zeros(out_dim),
        }
    }

    pub fn random(cfg: &HiLoConfig, out_dim: usize, seed: u64) -> Self {
        Self {
            hilo: HiLoWeights::random(cfg, seed),
            regression: RegressionWeights::random(out_dim, seed.wrapping_add(1)),
        }
    }
}

fn dense(x: &[f32], w: &TensorF, b: &TensorF) -> Vec<f32> {
    let (k, m) = (w.shape()[0], w.shape()[1]);
    let mut y = matmul(x, 1, k, w.data(), m);
    for (yi, bi) in y.iter_mut().zip(b.data()) {
        *yi += bi;
    }
    y
}

fn check_call(feat: &TensorF, w: &RegressionWeights, out_dim: usize) -> Result<(), FvitError> {
    feat.expect_shape("feature", &[FEATURE_DIM])?;
    w.check()?;
    if w.out_dim() != out_dim {
        return Err(FvitError::ShapeMismatch {
            name: "fc3.weight".into(),
            expected: vec![FC2_OUT, out_dim],
            found: w.fc3_w.shape().to_vec(),
        });
    }
    Ok(())
}

/// Maps a 768-dim feature to `out_dim` grasp parameters: `(x, y, θ, w, h)`
/// for 5, four `(x, y)` corners for 8.
pub fn regression_forward(
    feat: &TensorF,
    w: &RegressionWeights,
    out_dim: usize,
) -> Result<TensorF, FvitError> {
    check_call(feat, w, out_dim)?;
    let h1: Vec<f32> = dense(feat.data(), &w.fc1_w, &w.fc1_b)
        .into_iter()
        .map(leaky_relu)
        .collect();
    let h2: Vec<f32> = dense(&h1, &w.fc2_w, &w.fc2_b)
        .into_iter()
        .map(leaky_relu)
        .collect();
    TensorF::new(vec![out_dim], dense(&h2, &w.fc3_w, &w.fc3_b))
}

/// Same computation with double-precision accumulation, used as a
/// cross-check of the single-precision path.
pub fn regression_forward_f64(
    feat: &TensorF,
    w: &RegressionWeights,
    out_dim: usize,
) -> Result<Vec<f64>, FvitError> {
    check_call(feat, w, out_dim)?;
    fn layer(x: &[f64], w: &TensorF, b: &TensorF, act: bool) -> Vec<f64> {
        let m = w.shape()[1];
        (0..m)
            .map(|j| {
                let s = x
                    .iter()
                    .enumerate()
                    .map(|(i, xi)| xi * w.data()[i * m + j] as f64)
                    .sum::<f64>()
                    + b.data()[j] as f64;
                if act && s < 0.0 {
                    0.1 * s
                } else {
                    s
                }
            })
            .collect()
    }
    let x: Vec<f64> = feat.data().iter().map(|&v| v as f64).collect();
    let h1 = layer(&x, &w.fc1_w, &w.fc1_b, true);
    let h2 = layer(&h1, &w.fc2_w, &w.fc2_b, true);
    Ok(layer(&h2, &w.fc3_w, &w.fc3_b, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_exact() {
        assert_eq!(leaky_relu(2.5), 2.5);
        assert_eq!(leaky_relu(0.0), 0.0);
        assert_eq!(leaky_relu(-2.0), 0.1f32 * -2.0);
        assert_eq!(leaky_relu(-1e-30), 0.1f32 * -1e-30);
    }

    #[test]
    fn zero_weights_zero_output() {
        let feat = TensorF::new(vec![FEATURE_DIM], vec![1.0; FEATURE_DIM]).unwrap();
        let y = regression_forward(&feat, &RegressionWeights::zeros(5), 5).unwrap();
        assert_eq!(y.data(), &[0.0; 5]);
    }

    #[test]
    fn bias_passthrough() {
        let mut w = RegressionWeights::random(8, 3);
        w.fc3_w = TensorF::zeros(vec![FC2_OUT, 8]);
        let b: Vec<f32> = (0..8).map(|i| i as f32 - 3.5).collect();
        w.fc3_b = TensorF::new(vec![8], b.clone()).unwrap();
        for seed in 0..3 {
            let feat = RegressionWeights::random(5, seed).fc1_b;
            let feat = TensorF::new(vec![FEATURE_DIM], feat.data()[..FEATURE_DIM].to_vec()).unwrap();
            assert_eq!(regression_forward(&feat, &w, 8).unwrap().data(), &b[..]);
        }
    }

    #[test]
    fn out_dim_mismatch() {
        let feat = TensorF::zeros(vec![FEATURE_DIM]);
        assert!(matches!(
            regression_forward(&feat, &RegressionWeights::zeros(5), 8),
            Err(FvitError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            regression_forward(&TensorF::zeros(vec![767]), &RegressionWeights::zeros(5), 5),
            Err(FvitError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn f64_path_agrees() {
        let w = RegressionWeights::random(5, 9);
        let feat = TensorF::new(
            vec![FEATURE_DIM],
            (0..FEATURE_DIM).map(|i| ((i * 37 % 101) as f32 - 50.0) / 50.0).collect(),
        )
        .unwrap();
        let a = regression_forward(&feat, &w, 5).unwrap();
        let b = regression_forward_f64(&feat, &w, 5).unwrap();
        for (x, y) in a.data().iter().zip(&b) {
            assert!((*x as f64 - y).abs() < 1e-5);
        }
    }
}
