//! Layer primitives: convolutions, fully connected, and activations.
//!
//! Inputs and outputs are flat row-major slices; each layer documents its
//! layout. `forward` is pure; `backward` takes the forward input plus the
//! output gradient and returns parameter gradients and the input gradient.

use rand::Rng;

/// Uniform Glorot initialisation: ±sqrt(6 / (fan_in + fan_out)).
pub(crate) fn glorot<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

/// 1D convolution over `[len][in_ch]` input producing `[out_len][filters]`,
/// zero "same" padding, odd kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub filters: usize,
    pub in_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `[filters][in_ch][kernel]` row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Conv1d {
    pub fn new<R: Rng>(rng: &mut R, in_ch: usize, filters: usize, kernel: usize) -> Self {
        assert!(kernel % 2 == 1, "same padding requires an odd kernel");
        let w = glorot(rng, in_ch * kernel, filters * kernel, filters * in_ch * kernel);
        Conv1d {
            filters,
            in_ch,
            kernel,
            stride: 1,
            w,
            b: vec![0.0; filters],
        }
    }

    pub fn out_len(&self, len: usize) -> usize {
        len.div_ceil(self.stride)
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn forward(&self, x: &[f64], len: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), len * self.in_ch);
        let pad = (self.kernel - 1) / 2;
        let out_len = self.out_len(len);
        let mut y = vec![0.0; out_len * self.filters];
        for o in 0..out_len {
            for f in 0..self.filters {
                let mut acc = self.b[f];
                for c in 0..self.in_ch {
                    let wbase = (f * self.in_ch + c) * self.kernel;
                    for j in 0..self.kernel {
                        let i = (o * self.stride + j) as isize - pad as isize;
                        if i >= 0 && (i as usize) < len {
                            acc += self.w[wbase + j] * x[i as usize * self.in_ch + c];
                        }
                    }
                }
                y[o * self.filters + f] = acc;
            }
        }
        y
    }

    /// Returns `(dw, db, dx)`.
    pub fn backward(&self, x: &[f64], len: usize, gout: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let pad = (self.kernel - 1) / 2;
        let out_len = self.out_len(len);
        debug_assert_eq!(gout.len(), out_len * self.filters);
        let mut dw = vec![0.0; self.w.len()];
        let mut db = vec![0.0; self.b.len()];
        let mut dx = vec![0.0; x.len()];
        for o in 0..out_len {
            for f in 0..self.filters {
                let g = gout[o * self.filters + f];
                db[f] += g;
                for c in 0..self.in_ch {
                    let wbase = (f * self.in_ch + c) * self.kernel;
                    for j in 0..self.kernel {
                        let i = (o * self.stride + j) as isize - pad as isize;
                        if i >= 0 && (i as usize) < len {
                            let xi = i as usize * self.in_ch + c;
                            dw[wbase + j] += g * x[xi];
                            dx[xi] += g * self.w[wbase + j];
                        }
                    }
                }
            }
        }
        (dw, db, dx)
    }
}

/// 2D convolution over `[h][w][in_ch]` input producing `[h][w][filters]`,
/// zero "same" padding, stride 1, odd kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub filters: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
    /// `[filters][in_ch][kh][kw]` row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Conv2d {
    pub fn new<R: Rng>(rng: &mut R, in_ch: usize, filters: usize, kh: usize, kw: usize) -> Self {
        assert!(kh % 2 == 1 && kw % 2 == 1, "same padding requires odd kernels");
        let n = filters * in_ch * kh * kw;
        let w = glorot(rng, in_ch * kh * kw, filters * kh * kw, n);
        Conv2d {
            filters,
            in_ch,
            kh,
            kw,
            w,
            b: vec![0.0; filters],
        }
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn forward(&self, x: &[f64], h: usize, w: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), h * w * self.in_ch);
        let (ph, pw) = ((self.kh - 1) / 2, (self.kw - 1) / 2);
        let mut y = vec![0.0; h * w * self.filters];
        for r in 0..h {
            for col in 0..w {
                for f in 0..self.filters {
                    let mut acc = self.b[f];
                    for c in 0..self.in_ch {
                        for i in 0..self.kh {
                            let rr = (r + i) as isize - ph as isize;
                            if rr < 0 || rr as usize >= h {
                                continue;
                            }
                            for j in 0..self.kw {
                                let cc = (col + j) as isize - pw as isize;
                                if cc < 0 || cc as usize >= w {
                                    continue;
                                }
                                let xi = (rr as usize * w + cc as usize) * self.in_ch + c;
                                let wi = ((f * self.in_ch + c) * self.kh + i) * self.kw + j;
                                acc += self.w[wi] * x[xi];
                            }
                        }
                    }
                    y[(r * w + col) * self.filters + f] = acc;
                }
            }
        }
        y
    }

    /// Returns `(dw, db, dx)`.
    pub fn backward(
        &self,
        x: &[f64],
        h: usize,
        w: usize,
        gout: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        debug_assert_eq!(gout.len(), h * w * self.filters);
        let (ph, pw) = ((self.kh - 1) / 2, (self.kw - 1) / 2);
        let mut dw = vec![0.0; self.w.len()];
        let mut db = vec![0.0; self.b.len()];
        let mut dx = vec![0.0; x.len()];
        for r in 0..h {
            for col in 0..w {
                for f in 0..self.filters {
                    let g = gout[(r * w + col) * self.filters + f];
                    db[f] += g;
                    for c in 0..self.in_ch {
                        for i in 0..self.kh {
                            let rr = (r + i) as isize - ph as isize;
                            if rr < 0 || rr as usize >= h {
                                continue;
                            }
                            for j in 0..self.kw {
                                let cc = (col + j) as isize - pw as isize;
                                if cc < 0 || cc as usize >= w {
                                    continue;
                                }
                                let xi = (rr as usize * w + cc as usize) * self.in_ch + c;
                                let wi = ((f * self.in_ch + c) * self.kh + i) * self.kw + j;
                                dw[wi] += g * x[xi];
                                dx[xi] += g * self.w[wi];
                            }
                        }
                    }
                }
            }
        }
        (dw, db, dx)
    }
}

/// Fully connected layer, `w` stored `[out][in]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn new<R: Rng>(rng: &mut R, in_dim: usize, out_dim: usize) -> Self {
        let w = glorot(rng, in_dim, out_dim, in_dim * out_dim);
        Dense {
            in_dim,
            out_dim,
            w,
            b: vec![0.0; out_dim],
        }
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut y = self.b.clone();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            y[o] += row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
        }
        y
    }

    /// Returns `(dw, db, dx)`.
    pub fn backward(&self, x: &[f64], gout: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        debug_assert_eq!(gout.len(), self.out_dim);
        let mut dw = vec![0.0; self.w.len()];
        let mut dx = vec![0.0; self.in_dim];
        for o in 0..self.out_dim {
            let g = gout[o];
            for i in 0..self.in_dim {
                dw[o * self.in_dim + i] = g * x[i];
                dx[i] += g * self.w[o * self.in_dim + i];
            }
        }
        (dw, gout.to_vec(), dx)
    }
}

pub(crate) fn tanh_inplace(xs: &mut [f64]) {
    for v in xs {
        *v = v.tanh();
    }
}

/// d(tanh)/dz expressed through the forward output y = tanh(z).
pub(crate) fn tanh_backward(y: &[f64], gout: &[f64], gin: &mut [f64]) {
    for ((gi, &yi), &go) in gin.iter_mut().zip(y).zip(gout) {
        *gi = go * (1.0 - yi * yi);
    }
}

/// Numerically stable softmax (max subtraction); output sums to 1.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Gradient through softmax: gin_i = p_i (g_i − Σ_j p_j g_j).
pub fn softmax_backward(probs: &[f64], gout: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(gout).map(|(p, g)| p * g).sum();
    probs
        .iter()
        .zip(gout)
        .map(|(p, g)| p * (g - dot))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_of_zero_logits_is_uniform() {
        let p = softmax(&[0.0; 8]);
        for v in &p {
            assert!((v - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_sums_to_one_for_extreme_logits() {
        let p = softmax(&[500.0, -500.0, 250.0, 0.0]);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn conv1d_single_tap_identity() {
        // kernel [0,1,0] with one filter reproduces the input channel
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv1d::new(&mut rng, 1, 1, 3);
        conv.w = vec![0.0, 1.0, 0.0];
        conv.b = vec![0.0];
        let x = [0.3, -0.7, 1.5, 0.0, 2.0];
        let y = conv.forward(&x, 5);
        assert_eq!(y, x.to_vec());
    }

    #[test]
    fn dense_forward_matches_hand_computation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut d = Dense::new(&mut rng, 2, 2);
        d.w = vec![1.0, 2.0, 3.0, 4.0];
        d.b = vec![0.5, -0.5];
        let y = d.forward(&[1.0, -1.0]);
        assert_eq!(y, vec![1.0 - 2.0 + 0.5, 3.0 - 4.0 - 0.5]);
    }
}
