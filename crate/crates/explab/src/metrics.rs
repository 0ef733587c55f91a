//! Decoding metrics `g(Q_XY)` and the stochastic decoder they induce.
//!
//! The generalized likelihood decoder selects message `m` with probability
//! proportional to `exp{n g(P̂_{x_m y})}`, where `P̂` is the joint empirical
//! distribution of the candidate codeword and the channel output. The metric
//! kinds implemented here:
//!
//! - `likelihood(β)`  — `g(Q) = β Σ Q(x,y) ln W(y|x)`;
//! - `mismatched(β)`  — the same against a different channel `W'`;
//! - `mmi(β)`         — `g(Q) = β I_Q(X;Y)`;
//! - `linear`         — `g(Q) = Σ Q(x,y) c(x,y)` for a fixed table `c`;
//! - `ml_limit`       — the deterministic `β → ∞` limit of `likelihood(β)`,
//!   which ranks by `Σ Q ln W` and resolves ties uniformly.
//!
//! Scores are per-symbol quantities; a score is `-∞` exactly when the joint
//! puts mass on a transition whose underlying `W` (or `W'`) entry is zero.

use crate::info::{Channel, InfoError, JointDist, ProbDist, TIE_TOL};
use crate::sim::Codebook;
use thiserror::Error;

/// Per-symbol decoding score. Finite unless a zero-probability transition
/// is hit, in which case `-∞`.
pub type Score = f64;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("beta must be nonnegative, got {0}")]
    NegativeBeta(f64),
    #[error("linear metric coefficients must be finite")]
    NonFiniteCoeffs,
    #[error("coefficient table has {got} entries, expected {expected}")]
    CoeffShape { expected: usize, got: usize },
    #[error("metric shape {mx}x{my} does not match joint shape {jx}x{jy}")]
    ShapeMismatch {
        mx: usize,
        my: usize,
        jx: usize,
        jy: usize,
    },
    #[error("the ML limit has no finite metric value; use the constrained formulas or the decoder")]
    MlLimitNotFinite,
    #[error("empty codebook")]
    EmptyCodebook,
    #[error(transparent)]
    Info(#[from] InfoError),
}

#[derive(Clone, Debug)]
enum Kind {
    /// Coefficients `β ln W(y|x)`; `beta` kept for reporting.
    Likelihood { beta: f64, coeffs: Vec<f64> },
    /// Coefficients `β ln W'(y|x)` for a mismatched channel.
    Mismatched {
        beta: f64,
        coeffs: Vec<f64>,
        wprime: Channel,
    },
    Mmi { beta: f64 },
    Linear { coeffs: Vec<f64> },
    /// Reference coefficients `ln W(y|x)` used only for ranking.
    MlLimit { coeffs: Vec<f64> },
}

/// A decoding metric tied to the alphabets of a channel.
#[derive(Clone, Debug)]
pub struct DecodingMetric {
    kind: Kind,
    nx: usize,
    ny: usize,
}

fn log_coeffs(w: &Channel, beta: f64) -> Vec<f64> {
    let (nx, ny) = (w.input().size(), w.output().size());
    let mut c = Vec::with_capacity(nx * ny);
    for x in 0..nx {
        for y in 0..ny {
            let p = w.prob(x, y);
            c.push(if p > 0.0 { beta * p.ln() } else { f64::NEG_INFINITY });
        }
    }
    c
}

impl DecodingMetric {
    pub fn likelihood(beta: f64, w: &Channel) -> Result<Self, MetricError> {
        if !(beta >= 0.0) {
            return Err(MetricError::NegativeBeta(beta));
        }
        Ok(DecodingMetric {
            kind: Kind::Likelihood {
                beta,
                coeffs: log_coeffs(w, beta),
            },
            nx: w.input().size(),
            ny: w.output().size(),
        })
    }

    pub fn mismatched(beta: f64, wprime: &Channel) -> Result<Self, MetricError> {
        if !(beta >= 0.0) {
            return Err(MetricError::NegativeBeta(beta));
        }
        Ok(DecodingMetric {
            kind: Kind::Mismatched {
                beta,
                coeffs: log_coeffs(wprime, beta),
                wprime: wprime.clone(),
            },
            nx: wprime.input().size(),
            ny: wprime.output().size(),
        })
    }

    pub fn mmi(beta: f64, w: &Channel) -> Result<Self, MetricError> {
        if !(beta >= 0.0) {
            return Err(MetricError::NegativeBeta(beta));
        }
        Ok(DecodingMetric {
            kind: Kind::Mmi { beta },
            nx: w.input().size(),
            ny: w.output().size(),
        })
    }

    pub fn linear(coeffs: Vec<f64>, nx: usize, ny: usize) -> Result<Self, MetricError> {
        if coeffs.len() != nx * ny {
            return Err(MetricError::CoeffShape {
                expected: nx * ny,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(MetricError::NonFiniteCoeffs);
        }
        Ok(DecodingMetric {
            kind: Kind::Linear { coeffs },
            nx,
            ny,
        })
    }

    pub fn ml_limit(w: &Channel) -> Self {
        DecodingMetric {
            kind: Kind::MlLimit {
                coeffs: log_coeffs(w, 1.0),
            },
            nx: w.input().size(),
            ny: w.output().size(),
        }
    }

    pub fn is_ml_limit(&self) -> bool {
        matches!(self.kind, Kind::MlLimit { .. })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn beta(&self) -> Option<f64> {
        match &self.kind {
            Kind::Likelihood { beta, .. } | Kind::Mismatched { beta, .. } | Kind::Mmi { beta } => {
                Some(*beta)
            }
            _ => None,
        }
    }

    /// Kind tag for serialization.
    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            Kind::Likelihood { .. } => "likelihood",
            Kind::Mismatched { .. } => "mismatched",
            Kind::Mmi { .. } => "mmi",
            Kind::Linear { .. } => "linear",
            Kind::MlLimit { .. } => "ml_limit",
        }
    }

    pub fn linear_coeffs(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Linear { coeffs } => Some(coeffs),
            _ => None,
        }
    }

    pub fn mismatched_channel(&self) -> Option<&Channel> {
        match &self.kind {
            Kind::Mismatched { wprime, .. } => Some(wprime),
            _ => None,
        }
    }

    /// Evaluates the metric on a joint X-Y distribution.
    ///
    /// Errors on `ml_limit`, which has no finite value; it is only ever used
    /// through constrained formulas or argmax decoding.
    pub fn eval(&self, j: &JointDist) -> Result<Score, MetricError> {
        let dims = j.dims();
        if dims.len() != 2 || dims[0] != self.nx || dims[1] != self.ny {
            return Err(MetricError::ShapeMismatch {
                mx: self.nx,
                my: self.ny,
                jx: dims[0],
                jy: *dims.get(1).unwrap_or(&0),
            });
        }
        if self.is_ml_limit() {
            return Err(MetricError::MlLimitNotFinite);
        }
        Ok(self.eval_table(j.mass()))
    }

    /// Evaluates on a raw 2-axis table of the metric's shape. For `ml_limit`
    /// this is the reference ranking score `Σ Q ln W`, not a metric value.
    pub(crate) fn eval_table(&self, mass: &[f64]) -> f64 {
        match &self.kind {
            Kind::Likelihood { coeffs, .. }
            | Kind::Mismatched { coeffs, .. }
            | Kind::Linear { coeffs }
            | Kind::MlLimit { coeffs } => dot_with_neg_inf(mass, coeffs),
            Kind::Mmi { beta } => beta * crate::info::mi_of_table(mass, self.nx, self.ny),
        }
    }

    /// Score of a codeword/output sequence pair: the metric evaluated at
    /// their joint type.
    pub fn sequence_score(&self, xs: &[usize], ys: &[usize]) -> Result<Score, MetricError> {
        let ax = crate::info::Alphabet::new(self.nx)?;
        let ay = crate::info::Alphabet::new(self.ny)?;
        let j = crate::info::joint_type(xs, ys, &ax, &ay)?;
        self.eval(&j)
    }

    /// Ranking score used by deterministic decoders (argmax, list, erasure).
    /// Equal to the metric value for finite kinds and to the `β = 1`
    /// log-likelihood for `ml_limit`.
    pub(crate) fn ranking_score_table(&self, mass: &[f64]) -> f64 {
        match &self.kind {
            Kind::MlLimit { coeffs } => dot_with_neg_inf(mass, coeffs),
            _ => self.eval_table(mass),
        }
    }

    /// Count-table variant of [`Self::eval_table`]; `lni` is a table of
    /// integer logarithms covering `0..=denom`.
    pub(crate) fn eval_counts(&self, counts: &[u32], denom: u32, lni: &[f64]) -> f64 {
        match &self.kind {
            Kind::Likelihood { coeffs, .. }
            | Kind::Mismatched { coeffs, .. }
            | Kind::Linear { coeffs }
            | Kind::MlLimit { coeffs } => count_dot_with_neg_inf(counts, coeffs, denom),
            Kind::Mmi { beta } => {
                beta * crate::info::mi_of_counts(counts, self.nx, self.ny, denom, lni)
            }
        }
    }

    /// Count-table variant of [`Self::ranking_score_table`].
    pub(crate) fn ranking_counts(&self, counts: &[u32], denom: u32, lni: &[f64]) -> f64 {
        self.eval_counts(counts, denom, lni)
    }
}

fn count_dot_with_neg_inf(counts: &[u32], coeffs: &[f64], denom: u32) -> f64 {
    debug_assert_eq!(counts.len(), coeffs.len());
    let mut s = 0.0;
    for (&c, &w) in counts.iter().zip(coeffs) {
        if c > 0 {
            if w == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            s += c as f64 * w;
        }
    }
    s / denom as f64
}

/// `Σ Q·c` with the convention that cells with zero mass contribute zero
/// even when the coefficient is `-∞`.
fn dot_with_neg_inf(mass: &[f64], coeffs: &[f64]) -> f64 {
    debug_assert_eq!(mass.len(), coeffs.len());
    let mut s = 0.0;
    for (&q, &c) in mass.iter().zip(coeffs) {
        if q > 0.0 {
            if c == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            s += q * c;
        }
    }
    s
}

/// Decoder posterior over messages from per-symbol scores.
///
/// For finite-β kinds the posterior is the softmax of `n·score`, computed
/// after subtracting the maximum so that `β` up to `10^3` at `n` up to `20`
/// cannot overflow. Messages with score `-∞` get mass zero unless every
/// message is `-∞`, in which case the posterior is uniform. For the ML limit
/// the posterior is uniform over the argmax set, which is the exact `β → ∞`
/// limit of the finite-β posterior.
pub(crate) fn posterior_from_scores(n: usize, scores: &[f64], ml: bool) -> Vec<f64> {
    let m = scores.len();
    let smax = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if smax == f64::NEG_INFINITY {
        return vec![1.0 / m as f64; m];
    }
    if ml {
        let mut post = vec![0.0; m];
        let winners: Vec<usize> = (0..m).filter(|&i| scores[i] >= smax - TIE_TOL).collect();
        let share = 1.0 / winners.len() as f64;
        for i in winners {
            post[i] = share;
        }
        return post;
    }
    let nf = n as f64;
    let mut post: Vec<f64> = scores
        .iter()
        .map(|&s| {
            if s == f64::NEG_INFINITY {
                0.0
            } else {
                (nf * (s - smax)).exp()
            }
        })
        .collect();
    let z: f64 = post.iter().sum();
    for p in &mut post {
        *p /= z;
    }
    post
}

/// Posterior of the generalized likelihood decoder over the messages of a
/// codebook, given a channel output sequence.
pub fn gld_posterior(
    m: &DecodingMetric,
    cb: &Codebook,
    ys: &[usize],
) -> Result<ProbDist, MetricError> {
    if cb.codewords().is_empty() {
        return Err(MetricError::EmptyCodebook);
    }
    let n = ys.len();
    let ny = m.shape().1;
    let mut buf = vec![0.0; m.shape().0 * ny];
    let scores: Vec<f64> = cb
        .codewords()
        .iter()
        .map(|xs| {
            debug_assert_eq!(xs.len(), n);
            type_into(xs, ys, ny, &mut buf);
            m.ranking_score_table(&buf)
        })
        .collect();
    let post = posterior_from_scores(n, &scores, m.is_ml_limit());
    let a = crate::info::Alphabet::new(post.len())?;
    Ok(ProbDist::new(a, post)?)
}

/// Writes the joint type of `(xs, ys)` into `buf` (shape `nx × ny`).
pub(crate) fn type_into(xs: &[usize], ys: &[usize], ny: usize, buf: &mut [f64]) {
    for v in buf.iter_mut() {
        *v = 0.0;
    }
    let inv = 1.0 / xs.len() as f64;
    for (&x, &y) in xs.iter().zip(ys) {
        buf[x * ny + y] += inv;
    }
}
