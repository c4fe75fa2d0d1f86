//! The actor/critic network shape used by the scheduler agent: one 1D
//! convolution per input column, outputs stacked into a multi-channel map,
//! one 2D convolution over the stack, then a fully connected head. tanh
//! activations on both convolution stages; the actor head feeds a softmax,
//! the critic head is linear.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::layer::{softmax, softmax_backward, tanh_backward, tanh_inplace, Conv1d, Conv2d, Dense};
use crate::NnError;

/// Architecture hyperparameters. `n_rows` is the number of schedulable
/// resources, `n_cols` the per-resource feature count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchSpec {
    pub n_rows: usize,
    pub n_cols: usize,
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub conv2_filters: usize,
    pub conv2_kh: usize,
    pub conv2_kw: usize,
    pub n_actions: usize,
}

impl ArchSpec {
    /// Default sizing for a pool of `n_tbs` resources: four input columns,
    /// 8 conv filters with 3-wide kernels, one action per resource.
    pub fn for_pool(n_tbs: usize) -> Self {
        ArchSpec {
            n_rows: n_tbs,
            n_cols: 4,
            conv1_filters: 8,
            conv1_kernel: 3,
            conv2_filters: 8,
            conv2_kh: 3,
            conv2_kw: 3,
            n_actions: n_tbs,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let positive = [
            self.n_rows,
            self.n_cols,
            self.conv1_filters,
            self.conv1_kernel,
            self.conv2_filters,
            self.conv2_kh,
            self.conv2_kw,
            self.n_actions,
        ];
        if positive.iter().any(|&d| d == 0) {
            return Err(NnError::InvalidArch("zero dimension".into()));
        }
        if self.conv1_kernel % 2 == 0 || self.conv2_kh % 2 == 0 || self.conv2_kw % 2 == 0 {
            return Err(NnError::InvalidArch(
                "same padding requires odd kernels".into(),
            ));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.n_rows * self.n_cols
    }

    /// Flattened output size of the convolution stack.
    pub fn feature_dim(&self) -> usize {
        self.n_rows * self.conv1_filters * self.conv2_filters
    }
}

/// Shared convolutional body: per-column Conv1d branches merged into a
/// `[n_rows][conv1_filters][n_cols]` map, then a Conv2d over the map.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTrunk {
    pub col_convs: Vec<Conv1d>,
    pub merge: Conv2d,
    n_rows: usize,
    n_cols: usize,
}

/// Activations cached by the forward pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct TrunkCache {
    input: Vec<f64>,
    merged: Vec<f64>,
    features: Vec<f64>,
}

impl TrunkCache {
    pub fn features(&self) -> &[f64] {
        &self.features
    }
}

impl ConvTrunk {
    fn new(spec: &ArchSpec, rng: &mut ChaCha8Rng) -> Self {
        let col_convs = (0..spec.n_cols)
            .map(|_| Conv1d::new(rng, 1, spec.conv1_filters, spec.conv1_kernel))
            .collect();
        let merge = Conv2d::new(
            rng,
            spec.n_cols,
            spec.conv2_filters,
            spec.conv2_kh,
            spec.conv2_kw,
        );
        ConvTrunk {
            col_convs,
            merge,
            n_rows: spec.n_rows,
            n_cols: spec.n_cols,
        }
    }

    fn forward(&self, x: &[f64]) -> TrunkCache {
        let (rows, f1) = (self.n_rows, self.col_convs[0].filters);
        let mut merged = vec![0.0; rows * f1 * self.n_cols];
        let mut col = vec![0.0; rows];
        for (c, conv) in self.col_convs.iter().enumerate() {
            for r in 0..rows {
                col[r] = x[r * self.n_cols + c];
            }
            let mut a1 = conv.forward(&col, rows);
            tanh_inplace(&mut a1);
            for (i, v) in a1.iter().enumerate() {
                merged[i * self.n_cols + c] = *v;
            }
        }
        let mut features = self.merge.forward(&merged, rows, f1);
        tanh_inplace(&mut features);
        TrunkCache {
            input: x.to_vec(),
            merged,
            features,
        }
    }

    /// Backward from d(loss)/d(features); appends parameter gradients for
    /// the branches then the merge conv, in parameter-packing order.
    fn backward(&self, cache: &TrunkCache, gfeat: &[f64], grads: &mut Vec<f64>) {
        let (rows, f1) = (self.n_rows, self.col_convs[0].filters);
        let mut gz2 = vec![0.0; gfeat.len()];
        tanh_backward(&cache.features, gfeat, &mut gz2);
        let (dw2, db2, gm) = self.merge.backward(&cache.merged, rows, f1, &gz2);

        let mut col = vec![0.0; rows];
        let mut branch_grads = Vec::with_capacity(self.n_cols);
        for (c, conv) in self.col_convs.iter().enumerate() {
            let mut ga1 = vec![0.0; rows * f1];
            let mut a1 = vec![0.0; rows * f1];
            for i in 0..rows * f1 {
                ga1[i] = gm[i * self.n_cols + c];
                a1[i] = cache.merged[i * self.n_cols + c];
            }
            let mut gz1 = vec![0.0; ga1.len()];
            tanh_backward(&a1, &ga1, &mut gz1);
            for r in 0..rows {
                col[r] = cache.input[r * self.n_cols + c];
            }
            let (dw1, db1, _) = conv.backward(&col, rows, &gz1);
            branch_grads.push((dw1, db1));
        }
        for (dw1, db1) in branch_grads {
            grads.extend_from_slice(&dw1);
            grads.extend_from_slice(&db1);
        }
        grads.extend_from_slice(&dw2);
        grads.extend_from_slice(&db2);
    }

    fn n_params(&self) -> usize {
        self.col_convs.iter().map(Conv1d::n_params).sum::<usize>() + self.merge.n_params()
    }

    fn pack(&self, out: &mut Vec<f64>) {
        for conv in &self.col_convs {
            out.extend_from_slice(&conv.w);
            out.extend_from_slice(&conv.b);
        }
        out.extend_from_slice(&self.merge.w);
        out.extend_from_slice(&self.merge.b);
    }

    fn unpack(&mut self, src: &[f64], pos: &mut usize) {
        for conv in &mut self.col_convs {
            take(src, pos, &mut conv.w);
            take(src, pos, &mut conv.b);
        }
        take(src, pos, &mut self.merge.w);
        take(src, pos, &mut self.merge.b);
    }
}

fn take(src: &[f64], pos: &mut usize, dst: &mut [f64]) {
    dst.copy_from_slice(&src[*pos..*pos + dst.len()]);
    *pos += dst.len();
}

/// Actor network: trunk + fully connected head + softmax over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub trunk: ConvTrunk,
    pub head: Dense,
    spec: ArchSpec,
}

#[derive(Debug, Clone)]
pub struct PolicyCache {
    trunk: TrunkCache,
    probs: Vec<f64>,
}

impl PolicyNet {
    pub fn new(spec: &ArchSpec, rng: &mut ChaCha8Rng) -> Self {
        let trunk = ConvTrunk::new(spec, rng);
        let head = Dense::new(rng, spec.feature_dim(), spec.n_actions);
        PolicyNet {
            trunk,
            head,
            spec: *spec,
        }
    }

    pub fn spec(&self) -> &ArchSpec {
        &self.spec
    }

    /// Forward pass; returns action probabilities (summing to 1 within 1e-9)
    /// and the activation cache for `backward`.
    pub fn forward(&self, state: &[f64]) -> Result<(Vec<f64>, PolicyCache), NnError> {
        if state.len() != self.spec.input_dim() {
            return Err(NnError::ShapeMismatch {
                what: "policy input",
                expected: self.spec.input_dim(),
                got: state.len(),
            });
        }
        let trunk = self.trunk.forward(state);
        let logits = self.head.forward(trunk.features());
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite("policy logits"));
        }
        let probs = softmax(&logits);
        Ok((probs.clone(), PolicyCache { trunk, probs }))
    }

    /// Backward from d(loss)/d(probabilities); returns the flat parameter
    /// gradient in packing order (branches, merge conv, head).
    pub fn backward(&self, cache: &PolicyCache, dprobs: &[f64]) -> Vec<f64> {
        let dlogits = softmax_backward(&cache.probs, dprobs);
        let (dwh, dbh, gfeat) = self.head.backward(cache.trunk.features(), &dlogits);
        let mut grads = Vec::with_capacity(self.n_params());
        self.trunk.backward(&cache.trunk, &gfeat, &mut grads);
        grads.extend_from_slice(&dwh);
        grads.extend_from_slice(&dbh);
        grads
    }

    pub fn n_params(&self) -> usize {
        self.trunk.n_params() + self.head.n_params()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.trunk.pack(&mut out);
        out.extend_from_slice(&self.head.w);
        out.extend_from_slice(&self.head.b);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NnError> {
        if params.len() != self.n_params() {
            return Err(NnError::ShapeMismatch {
                what: "policy parameters",
                expected: self.n_params(),
                got: params.len(),
            });
        }
        let mut pos = 0;
        self.trunk.unpack(params, &mut pos);
        take(params, &mut pos, &mut self.head.w);
        take(params, &mut pos, &mut self.head.b);
        Ok(())
    }
}

/// Critic network: trunk + single linear output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    pub trunk: ConvTrunk,
    pub head: Dense,
    spec: ArchSpec,
}

#[derive(Debug, Clone)]
pub struct ValueCache {
    trunk: TrunkCache,
}

impl ValueNet {
    pub fn new(spec: &ArchSpec, rng: &mut ChaCha8Rng) -> Self {
        let trunk = ConvTrunk::new(spec, rng);
        let head = Dense::new(rng, spec.feature_dim(), 1);
        ValueNet {
            trunk,
            head,
            spec: *spec,
        }
    }

    pub fn forward(&self, state: &[f64]) -> Result<(f64, ValueCache), NnError> {
        if state.len() != self.spec.input_dim() {
            return Err(NnError::ShapeMismatch {
                what: "value input",
                expected: self.spec.input_dim(),
                got: state.len(),
            });
        }
        let trunk = self.trunk.forward(state);
        let v = self.head.forward(trunk.features())[0];
        if !v.is_finite() {
            return Err(NnError::NonFinite("state value"));
        }
        Ok((v, ValueCache { trunk }))
    }

    pub fn backward(&self, cache: &ValueCache, dv: f64) -> Vec<f64> {
        let (dwh, dbh, gfeat) = self.head.backward(cache.trunk.features(), &[dv]);
        let mut grads = Vec::with_capacity(self.n_params());
        self.trunk.backward(&cache.trunk, &gfeat, &mut grads);
        grads.extend_from_slice(&dwh);
        grads.extend_from_slice(&dbh);
        grads
    }

    pub fn n_params(&self) -> usize {
        self.trunk.n_params() + self.head.n_params()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.trunk.pack(&mut out);
        out.extend_from_slice(&self.head.w);
        out.extend_from_slice(&self.head.b);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NnError> {
        if params.len() != self.n_params() {
            return Err(NnError::ShapeMismatch {
                what: "value parameters",
                expected: self.n_params(),
                got: params.len(),
            });
        }
        let mut pos = 0;
        self.trunk.unpack(params, &mut pos);
        take(params, &mut pos, &mut self.head.w);
        take(params, &mut pos, &mut self.head.b);
        Ok(())
    }
}

/// Actor and critic built together from one seed.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub actor: PolicyNet,
    pub critic: ValueNet,
}

impl ActorCritic {
    pub fn new(spec: &ArchSpec, seed: u64) -> Result<Self, NnError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(ActorCritic {
            actor: PolicyNet::new(spec, &mut rng),
            critic: ValueNet::new(spec, &mut rng),
        })
    }

    /// All-zero parameters: the actor emits a uniform distribution.
    pub fn zeroed(spec: &ArchSpec) -> Result<Self, NnError> {
        let mut ac = Self::new(spec, 0)?;
        let na = ac.actor.n_params();
        let nc = ac.critic.n_params();
        ac.actor.set_params(&vec![0.0; na])?;
        ac.critic.set_params(&vec![0.0; nc])?;
        Ok(ac)
    }

    pub fn spec(&self) -> &ArchSpec {
        self.actor.spec()
    }
}
