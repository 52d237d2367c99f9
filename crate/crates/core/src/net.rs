//! Emission model: one GRU shared by every speaker, a two-layer output
//! network, and Gaussian emissions around each speaker's running mean output.
//!
//! GRU convention (fixed; checkpoints depend on it):
//!
//! ```text
//! u  = σ(W_u x + U_u h + b_u)
//! r  = σ(W_r x + U_r h + b_r)
//! h̃  = tanh(W_c x + U_c (r ⊙ h) + b_c)
//! h' = (1 − u) ⊙ h + u ⊙ h̃
//! ```
//!
//! Output network: `m = W₂ relu(W₁ h + b₁) + b₂`, optionally rectified.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingSequence, LabelSequence};
use crate::error::{Error, Result};
use crate::linalg::{sigmoid, squared_distance, Matrix};
use crate::scalar::Scalar;

/// Tag identifying the gate convention above.
pub const GRU_CONVENTION: &str = "u=sig(Wu.x+Uu.h+bu);r=sig(Wr.x+Ur.h+br);c=tanh(Wc.x+Uc.(r*h)+bc);h'=(1-u)*h+u*c";

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetDims {
    /// Embedding dimension `d`.
    pub input: usize,
    /// GRU state size `H`.
    pub hidden: usize,
    /// Width `F` of the first fully-connected layer.
    pub fc: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct GruParams<S> {
    pub w_update: Matrix<S>,
    pub u_update: Matrix<S>,
    pub b_update: Vec<S>,
    pub w_reset: Matrix<S>,
    pub u_reset: Matrix<S>,
    pub b_reset: Vec<S>,
    pub w_cand: Matrix<S>,
    pub u_cand: Matrix<S>,
    pub b_cand: Vec<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct NetParams<S> {
    pub gru: GruParams<S>,
    pub fc1_w: Matrix<S>,
    pub fc1_b: Vec<S>,
    pub fc2_w: Matrix<S>,
    pub fc2_b: Vec<S>,
    /// Rectify the final layer too (restricts means to the nonnegative orthant).
    #[serde(default)]
    pub rectify_output: bool,
}

/// Names of the tensors in [`NetParams::tensors`] order.
pub const TENSOR_NAMES: [&str; 13] = [
    "gru.w_update",
    "gru.u_update",
    "gru.b_update",
    "gru.w_reset",
    "gru.u_reset",
    "gru.b_reset",
    "gru.w_cand",
    "gru.u_cand",
    "gru.b_cand",
    "fc1.w",
    "fc1.b",
    "fc2.w",
    "fc2.b",
];

impl<S: Scalar> NetParams<S> {
    pub fn zeros(dims: NetDims) -> Self {
        let NetDims { input: d, hidden: h, fc: f } = dims;
        NetParams {
            gru: GruParams {
                w_update: Matrix::zeros(h, d),
                u_update: Matrix::zeros(h, h),
                b_update: vec![S::zero(); h],
                w_reset: Matrix::zeros(h, d),
                u_reset: Matrix::zeros(h, h),
                b_reset: vec![S::zero(); h],
                w_cand: Matrix::zeros(h, d),
                u_cand: Matrix::zeros(h, h),
                b_cand: vec![S::zero(); h],
            },
            fc1_w: Matrix::zeros(f, h),
            fc1_b: vec![S::zero(); f],
            fc2_w: Matrix::zeros(d, f),
            fc2_b: vec![S::zero(); d],
            rectify_output: false,
        }
    }

    /// Uniform initialisation in `±1/√fan_in`, where `fan_in` is the column
    /// count of each weight matrix (the hidden size for GRU biases, the
    /// layer input size for fully-connected biases).
    pub fn init<R: Rng + ?Sized>(dims: NetDims, rng: &mut R) -> Self {
        Self::init_scaled(dims, 1.0, rng)
    }

    /// As [`NetParams::init`] with every bound multiplied by `gain`.
    pub fn init_scaled<R: Rng + ?Sized>(dims: NetDims, gain: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(dims);
        let fans = net.fan_ins();
        for (tensor, fan_in) in net.tensors_mut().into_iter().zip(fans) {
            let bound = gain / (fan_in as f64).sqrt();
            for v in tensor.iter_mut() {
                *v = S::of(rng.random_range(-bound..=bound));
            }
        }
        net
    }

    fn fan_ins(&self) -> [usize; 13] {
        let d = self.dims();
        [
            d.input, d.hidden, d.hidden, d.input, d.hidden, d.hidden, d.input, d.hidden, d.hidden, d.hidden,
            d.hidden, d.fc, d.fc,
        ]
    }

    pub fn dims(&self) -> NetDims {
        NetDims {
            input: self.gru.w_update.cols(),
            hidden: self.gru.u_update.rows(),
            fc: self.fc1_w.rows(),
        }
    }

    pub fn tensors(&self) -> [&[S]; 13] {
        let g = &self.gru;
        [
            g.w_update.as_slice(),
            g.u_update.as_slice(),
            &g.b_update,
            g.w_reset.as_slice(),
            g.u_reset.as_slice(),
            &g.b_reset,
            g.w_cand.as_slice(),
            g.u_cand.as_slice(),
            &g.b_cand,
            self.fc1_w.as_slice(),
            &self.fc1_b,
            self.fc2_w.as_slice(),
            &self.fc2_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [S]; 13] {
        let g = &mut self.gru;
        [
            g.w_update.as_mut_slice(),
            g.u_update.as_mut_slice(),
            &mut g.b_update,
            g.w_reset.as_mut_slice(),
            g.u_reset.as_mut_slice(),
            &mut g.b_reset,
            g.w_cand.as_mut_slice(),
            g.u_cand.as_mut_slice(),
            &mut g.b_cand,
            self.fc1_w.as_mut_slice(),
            &mut self.fc1_b,
            self.fc2_w.as_mut_slice(),
            &mut self.fc2_b,
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Checks shape consistency and finiteness (used after deserialisation).
    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        let g = &self.gru;
        let shapes: [(&'static str, usize, usize, usize, usize); 8] = [
            ("gru.w_update", g.w_update.rows(), g.w_update.cols(), d.hidden, d.input),
            ("gru.u_update", g.u_update.rows(), g.u_update.cols(), d.hidden, d.hidden),
            ("gru.w_reset", g.w_reset.rows(), g.w_reset.cols(), d.hidden, d.input),
            ("gru.u_reset", g.u_reset.rows(), g.u_reset.cols(), d.hidden, d.hidden),
            ("gru.w_cand", g.w_cand.rows(), g.w_cand.cols(), d.hidden, d.input),
            ("gru.u_cand", g.u_cand.rows(), g.u_cand.cols(), d.hidden, d.hidden),
            ("fc1.w", self.fc1_w.rows(), self.fc1_w.cols(), d.fc, d.hidden),
            ("fc2.w", self.fc2_w.rows(), self.fc2_w.cols(), d.input, d.fc),
        ];
        for (what, rows, cols, er, ec) in shapes {
            if rows != er {
                return Err(Error::DimensionMismatch { what, expected: er, got: rows });
            }
            if cols != ec {
                return Err(Error::DimensionMismatch { what, expected: ec, got: cols });
            }
        }
        let biases = [
            ("gru.b_update", g.b_update.len(), d.hidden),
            ("gru.b_reset", g.b_reset.len(), d.hidden),
            ("gru.b_cand", g.b_cand.len(), d.hidden),
            ("fc1.b", self.fc1_b.len(), d.fc),
            ("fc2.b", self.fc2_b.len(), d.input),
        ];
        for (what, got, expected) in biases {
            if got != expected {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        if d.input == 0 || d.hidden == 0 || d.fc == 0 {
            return Err(Error::InvalidParameter("network dimensions must be positive".into()));
        }
        if self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(())
    }

    /// Converts storage precision.
    pub fn cast<T: Scalar>(&self) -> NetParams<T> {
        let mut out = NetParams::<T>::zeros(self.dims());
        out.rectify_output = self.rectify_output;
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = T::of(s.wide());
            }
        }
        out
    }

    fn check_len(&self, what: &'static str, v: &[f64], expected: usize) -> Result<()> {
        if v.len() != expected {
            return Err(Error::DimensionMismatch {
                what,
                expected,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// One GRU update `h' = GRU(x, h)`.
    pub fn gru_forward(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        let dims = self.dims();
        self.check_len("gru input", x, dims.input)?;
        self.check_len("gru state", h, dims.hidden)?;
        Ok(self.gru_step(x, h).hidden)
    }

    pub(crate) fn gru_step(&self, x: &[f64], h: &[f64]) -> GruStep {
        let g = &self.gru;
        let gate = |w: &Matrix<S>, u: &Matrix<S>, b: &[S], hv: &[f64]| {
            let mut pre: Vec<f64> = b.iter().map(|v| v.wide()).collect();
            w.mul_vec_acc(x, &mut pre);
            u.mul_vec_acc(hv, &mut pre);
            pre
        };
        let update: Vec<f64> = gate(&g.w_update, &g.u_update, &g.b_update, h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let reset: Vec<f64> = gate(&g.w_reset, &g.u_reset, &g.b_reset, h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let reset_h: Vec<f64> = reset.iter().zip(h).map(|(r, hv)| r * hv).collect();
        let cand: Vec<f64> = gate(&g.w_cand, &g.u_cand, &g.b_cand, &reset_h)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let hidden = h
            .iter()
            .zip(&update)
            .zip(&cand)
            .map(|((hv, u), c)| (1.0 - u) * hv + u * c)
            .collect();
        GruStep {
            update,
            reset,
            cand,
            hidden,
        }
    }

    /// Output network `m = f(h)`.
    pub fn output_forward(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.check_len("output network input", h, self.dims().hidden)?;
        Ok(self.output_step(h).output)
    }

    pub(crate) fn output_step(&self, h: &[f64]) -> OutputStep {
        let mut act: Vec<f64> = self.fc1_b.iter().map(|v| v.wide()).collect();
        self.fc1_w.mul_vec_acc(h, &mut act);
        for a in act.iter_mut() {
            *a = a.max(0.0);
        }
        let mut output: Vec<f64> = self.fc2_b.iter().map(|v| v.wide()).collect();
        self.fc2_w.mul_vec_acc(&act, &mut output);
        if self.rectify_output {
            for o in output.iter_mut() {
                *o = o.max(0.0);
            }
        }
        OutputStep { act, output }
    }
}

pub(crate) struct GruStep {
    pub update: Vec<f64>,
    pub reset: Vec<f64>,
    pub cand: Vec<f64>,
    pub hidden: Vec<f64>,
}

pub(crate) struct OutputStep {
    /// Post-rectifier hidden activation of the first layer.
    pub act: Vec<f64>,
    pub output: Vec<f64>,
}

/// Scalar emission variance, stored in log space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionParams {
    pub log_sigma2: f64,
}

impl EmissionParams {
    pub fn from_sigma2(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
        }
        Ok(EmissionParams {
            log_sigma2: sigma2.ln(),
        })
    }

    pub fn sigma2(&self) -> f64 {
        self.log_sigma2.exp()
    }
}

/// `ln N(x; μ, σ² I)`.
pub fn gaussian_log_pdf(x: &[f64], mu: &[f64], sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    if x.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            what: "gaussian mean",
            expected: x.len(),
            got: mu.len(),
        });
    }
    Ok(log_pdf_unchecked(x, mu, sigma2))
}

#[inline]
pub(crate) fn log_pdf_unchecked(x: &[f64], mu: &[f64], sigma2: f64) -> f64 {
    -0.5 * x.len() as f64 * (LN_2PI + sigma2.ln()) - squared_distance(x, mu) / (2.0 * sigma2)
}

/// Per-speaker recurrent state used while scoring or decoding online.
///
/// Besides the committed state, a thread caches the GRU state and network
/// output its speaker would produce at its next segment; both depend only on
/// the speaker's own past, so every candidate score costs `O(d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerThread {
    hidden: Vec<f64>,
    last_input: Vec<f64>,
    mean_sum: Vec<f64>,
    count: usize,
    next_hidden: Vec<f64>,
    next_output: Vec<f64>,
}

impl SpeakerThread {
    /// A thread that has not emitted yet (`x₀ = 0`, `h₀ = 0`).
    pub fn fresh<S: Scalar>(net: &NetParams<S>) -> Self {
        let dims = net.dims();
        let hidden = vec![0.0; dims.hidden];
        let last_input = vec![0.0; dims.input];
        let next_hidden = net.gru_step(&last_input, &hidden).hidden;
        let next_output = net.output_step(&next_hidden).output;
        SpeakerThread {
            hidden,
            last_input,
            mean_sum: vec![0.0; dims.input],
            count: 0,
            next_hidden,
            next_output,
        }
    }

    pub fn hidden(&self) -> &[f64] {
        &self.hidden
    }

    pub fn mean_sum(&self) -> &[f64] {
        &self.mean_sum
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Emission mean if this speaker produced the next segment.
    pub fn predicted_mean(&self) -> Vec<f64> {
        let n = (self.count + 1) as f64;
        self.mean_sum
            .iter()
            .zip(&self.next_output)
            .map(|(s, m)| (s + m) / n)
            .collect()
    }

    /// `ln p(x | this speaker emits next)`.
    pub fn emission_log_prob(&self, x: &[f64], sigma2: f64) -> f64 {
        let n = (self.count + 1) as f64;
        let sq: f64 = x
            .iter()
            .zip(self.mean_sum.iter().zip(&self.next_output))
            .map(|(xv, (s, m))| {
                let diff = xv - (s + m) / n;
                diff * diff
            })
            .sum();
        -0.5 * x.len() as f64 * (LN_2PI + sigma2.ln()) - sq / (2.0 * sigma2)
    }

    /// Commits `x` as this speaker's next segment.
    pub fn observe<S: Scalar>(&mut self, net: &NetParams<S>, x: &[f64]) {
        std::mem::swap(&mut self.hidden, &mut self.next_hidden);
        for (s, m) in self.mean_sum.iter_mut().zip(&self.next_output) {
            *s += m;
        }
        self.count += 1;
        self.last_input.clear();
        self.last_input.extend_from_slice(x);
        self.next_hidden = net.gru_step(&self.last_input, &self.hidden).hidden;
        self.next_output = net.output_step(&self.next_hidden).output;
    }
}

/// Result of a teacher-forced forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub log_likelihood: f64,
    /// `μ_t` for every step.
    pub means: Vec<Vec<f64>>,
}

struct StepTrace {
    speaker: usize,
    prev_input: Vec<f64>,
    prev_hidden: Vec<f64>,
    gru: GruStep,
    out: OutputStep,
    count: usize,
    mean: Vec<f64>,
}

fn check_pair<S: Scalar>(x: &EmbeddingSequence<S>, y: &LabelSequence, net: &NetParams<S>) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            embeddings: x.len(),
            labels: y.len(),
        });
    }
    let d = net.dims().input;
    if x.dim() != d {
        return Err(Error::DimensionMismatch {
            what: "embedding dimension",
            expected: d,
            got: x.dim(),
        });
    }
    Ok(())
}

type TraceState = (Vec<f64>, Vec<f64>, Vec<f64>, usize);

fn trace<S: Scalar>(x: &EmbeddingSequence<S>, y: &LabelSequence, net: &NetParams<S>, sigma2: f64) -> (f64, Vec<StepTrace>) {
    let dims = net.dims();
    let k = y.num_speakers();
    // Per speaker: (last input, last hidden, running sum of outputs, count).
    let mut state: Vec<TraceState> =
        vec![(vec![0.0; dims.input], vec![0.0; dims.hidden], vec![0.0; dims.input], 0); k];
    let mut ll = 0.0;
    let mut steps = Vec::with_capacity(y.len());
    for (t, &speaker) in y.as_slice().iter().enumerate() {
        let xt = x.row_f64(t);
        let (prev_input, prev_hidden, sum, count) = &mut state[speaker - 1];
        let gru = net.gru_step(prev_input, prev_hidden);
        let out = net.output_step(&gru.hidden);
        *count += 1;
        for (s, m) in sum.iter_mut().zip(&out.output) {
            *s += m;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / *count as f64).collect();
        ll += log_pdf_unchecked(&xt, &mean, sigma2);
        steps.push(StepTrace {
            speaker,
            prev_input: std::mem::replace(prev_input, xt),
            prev_hidden: std::mem::replace(prev_hidden, gru.hidden.clone()),
            gru,
            out,
            count: *count,
            mean,
        });
    }
    (ll, steps)
}

/// `ln p(X | Y, θ, σ²)` with teacher-forced speaker threads.
pub fn forward_log_likelihood<S: Scalar>(
    x: &EmbeddingSequence<S>,
    y: &LabelSequence,
    net: &NetParams<S>,
    em: &EmissionParams,
) -> Result<Forward> {
    check_pair(x, y, net)?;
    let (log_likelihood, steps) = trace(x, y, net, em.sigma2());
    Ok(Forward {
        log_likelihood,
        means: steps.into_iter().map(|s| s.mean).collect(),
    })
}

/// Gradients of [`forward_log_likelihood`].
#[derive(Clone, Debug)]
pub struct Gradients {
    pub log_likelihood: f64,
    pub net: NetParams<f64>,
    pub log_sigma2: f64,
}

/// Exact reverse-mode gradients of the teacher-forced log-likelihood.
///
/// Two paths reach each `m_s`: the running mean of every later step of the
/// same speaker (weight `1/count_t`), and through that speaker's GRU chain to
/// all of its later states.
pub fn backward_gradients<S: Scalar>(
    x: &EmbeddingSequence<S>,
    y: &LabelSequence,
    net: &NetParams<S>,
    em: &EmissionParams,
) -> Result<Gradients> {
    check_pair(x, y, net)?;
    let dims = net.dims();
    let sigma2 = em.sigma2();
    let (log_likelihood, steps) = trace(x, y, net, sigma2);
    let mut grads = NetParams::<f64>::zeros(dims);
    grads.rectify_output = net.rectify_output;
    let k = y.num_speakers();
    let mut mean_acc = vec![vec![0.0; dims.input]; k];
    let mut hidden_carry = vec![vec![0.0; dims.hidden]; k];
    let mut grad_log_sigma2 = 0.0;

    for (t, step) in steps.iter().enumerate().rev() {
        let xt = x.row_f64(t);
        let sq = squared_distance(&xt, &step.mean);
        grad_log_sigma2 += sq / (2.0 * sigma2) - 0.5 * dims.input as f64;

        // dL/dm_t accumulates (x_s − μ_s)/(σ² count_s) over later steps s of this speaker.
        let acc = &mut mean_acc[step.speaker - 1];
        for ((a, xv), mv) in acc.iter_mut().zip(&xt).zip(&step.mean) {
            *a += (xv - mv) / (sigma2 * step.count as f64);
        }
        let mut d_out = acc.clone();
        if net.rectify_output {
            for (g, o) in d_out.iter_mut().zip(&step.out.output) {
                if *o <= 0.0 {
                    *g = 0.0;
                }
            }
        }

        grads.fc2_w.add_outer(&d_out, &step.out.act);
        for (b, g) in grads.fc2_b.iter_mut().zip(&d_out) {
            *b += g;
        }
        let mut d_act = vec![0.0; dims.fc];
        net.fc2_w.tr_mul_vec_acc(&d_out, &mut d_act);
        for (g, a) in d_act.iter_mut().zip(&step.out.act) {
            if *a <= 0.0 {
                *g = 0.0;
            }
        }
        grads.fc1_w.add_outer(&d_act, &step.gru.hidden);
        for (b, g) in grads.fc1_b.iter_mut().zip(&d_act) {
            *b += g;
        }
        let carry = &mut hidden_carry[step.speaker - 1];
        net.fc1_w.tr_mul_vec_acc(&d_act, carry);
        let d_hidden = std::mem::replace(carry, vec![0.0; dims.hidden]);
        *carry = gru_backward(net, &mut grads, step, &d_hidden);
    }

    Ok(Gradients {
        log_likelihood,
        net: grads,
        log_sigma2: grad_log_sigma2,
    })
}

/// Backpropagates `d_hidden` through one GRU step, accumulating weight
/// gradients and returning the gradient for the previous state.
fn gru_backward<S: Scalar>(net: &NetParams<S>, grads: &mut NetParams<f64>, step: &StepTrace, d_hidden: &[f64]) -> Vec<f64> {
    let g = &net.gru;
    let gg = &mut grads.gru;
    let h = &step.prev_hidden;
    let x = &step.prev_input;
    let GruStep { update, reset, cand, .. } = &step.gru;
    let n = h.len();

    let mut d_prev: Vec<f64> = d_hidden.iter().zip(update).map(|(d, u)| d * (1.0 - u)).collect();
    let mut d_update_pre = vec![0.0; n];
    let mut d_cand_pre = vec![0.0; n];
    for i in 0..n {
        let du = d_hidden[i] * (cand[i] - h[i]);
        d_update_pre[i] = du * update[i] * (1.0 - update[i]);
        let dc = d_hidden[i] * update[i];
        d_cand_pre[i] = dc * (1.0 - cand[i] * cand[i]);
    }

    let reset_h: Vec<f64> = reset.iter().zip(h).map(|(r, hv)| r * hv).collect();
    gg.w_cand.add_outer(&d_cand_pre, x);
    gg.u_cand.add_outer(&d_cand_pre, &reset_h);
    for (b, d) in gg.b_cand.iter_mut().zip(&d_cand_pre) {
        *b += d;
    }
    let mut d_reset_h = vec![0.0; n];
    g.u_cand.tr_mul_vec_acc(&d_cand_pre, &mut d_reset_h);
    let mut d_reset_pre = vec![0.0; n];
    for i in 0..n {
        d_prev[i] += d_reset_h[i] * reset[i];
        let dr = d_reset_h[i] * h[i];
        d_reset_pre[i] = dr * reset[i] * (1.0 - reset[i]);
    }

    gg.w_update.add_outer(&d_update_pre, x);
    gg.u_update.add_outer(&d_update_pre, h);
    for (b, d) in gg.b_update.iter_mut().zip(&d_update_pre) {
        *b += d;
    }
    g.u_update.tr_mul_vec_acc(&d_update_pre, &mut d_prev);

    gg.w_reset.add_outer(&d_reset_pre, x);
    gg.u_reset.add_outer(&d_reset_pre, h);
    for (b, d) in gg.b_reset.iter_mut().zip(&d_reset_pre) {
        *b += d;
    }
    g.u_reset.tr_mul_vec_acc(&d_reset_pre, &mut d_prev);
    d_prev
}
