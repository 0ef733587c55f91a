//! Exact small-blocklength evaluation of error probabilities for sampled
//! fixed-composition codebooks.
//!
//! The channel output space is enumerated in full, so per-code error
//! probabilities are exact expectations over both the channel and the
//! decoder randomness — the only randomness left is the code draw, which is
//! precisely what quenched (`-E[ln P_e]/n`) and annealed (`-ln E[P_e]/n`)
//! averages integrate over. Full enumeration is capped at
//! `n·ln|Y| ≤ 18·ln 2`.
//!
//! Codebooks are drawn with independently keyed RNG streams per codeword,
//! so runs are reproducible per `(seed, code index, draw index)` and results
//! do not depend on thread count.

use crate::info::{entropy_of_slice, Alphabet, Channel, InfoError, ProbDist, TIE_TOL};
use crate::metrics::{posterior_from_scores, type_into, DecodingMetric, MetricError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

/// Full output enumeration cap: `n·ln|Y| ≤ 18·ln 2`.
pub const OUTPUT_ENUM_CAP_NATS: f64 = 18.0 * std::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("composition times n must be integral; n = {n} requires denominators dividing n (entry {index} gives {scaled})")]
    NonIntegralComposition { n: usize, index: usize, scaled: f64 },
    #[error("output enumeration cap exceeded: n·ln|Y| = {requested:.2} nats > {cap:.2}")]
    CapExceeded { requested: f64, cap: f64 },
    #[error("codebook must contain at least one codeword")]
    EmptyCodebook,
    #[error("all {codes} sampled codes had zero error probability; quenched average undefined")]
    AllZeroPe { codes: usize },
    #[error("erasure threshold must be finite")]
    NonFiniteThreshold,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Info(#[from] InfoError),
}

/// A sampled fixed-composition codebook.
#[derive(Clone, Debug)]
pub struct Codebook {
    n: usize,
    codewords: Vec<Vec<usize>>,
    composition: ProbDist,
    seed: u64,
    code_index: u64,
}

impl Codebook {
    /// Wraps explicit codewords; they must share one empirical type.
    pub fn from_codewords(codewords: Vec<Vec<usize>>, n: usize) -> Codebook {
        assert!(!codewords.is_empty(), "empty codebook");
        let nx = codewords
            .iter()
            .flat_map(|c| c.iter())
            .max()
            .map(|&m| m + 1)
            .unwrap_or(1)
            .max(2);
        let count = |cw: &[usize]| {
            let mut c = vec![0usize; nx];
            for &x in cw {
                c[x] += 1;
            }
            c
        };
        let first = count(&codewords[0]);
        for cw in &codewords {
            assert_eq!(cw.len(), n, "codeword length mismatch");
            assert_eq!(count(cw), first, "codewords must share one type");
        }
        let mass = first.iter().map(|&c| c as f64 / n as f64).collect();
        let composition = ProbDist::new(Alphabet::new(nx).unwrap(), mass).unwrap();
        Codebook {
            n,
            codewords,
            composition,
            seed: 0,
            code_index: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn codewords(&self) -> &[Vec<usize>] {
        &self.codewords
    }

    pub fn size(&self) -> usize {
        self.codewords.len()
    }

    pub fn composition(&self) -> &ProbDist {
        &self.composition
    }

    /// Sampling seed and codebook index within its run.
    pub fn seed_record(&self) -> (u64, u64) {
        (self.seed, self.code_index)
    }
}

fn composition_counts(n: usize, composition: &ProbDist) -> Result<Vec<usize>, SimError> {
    let mut counts = Vec::with_capacity(composition.len());
    for (i, &p) in composition.mass().iter().enumerate() {
        let scaled = p * n as f64;
        let c = scaled.round();
        if (scaled - c).abs() > 1e-9 {
            return Err(SimError::NonIntegralComposition {
                n,
                index: i,
                scaled,
            });
        }
        counts.push(c as usize);
    }
    Ok(counts)
}

/// Draws `m` codewords independently and uniformly from the type class of
/// `composition` at blocklength `n`, via seeded shuffles of the base
/// multiset. Deterministic per `(seed, draw index)`.
pub fn sample_codebook(
    n: usize,
    composition: &ProbDist,
    m: usize,
    seed: u64,
) -> Result<Codebook, SimError> {
    sample_codebook_indexed(n, composition, m, seed, 0)
}

/// As [`sample_codebook`], with an additional code index keying the RNG
/// streams so that ensembles of codebooks stay reproducible code by code.
pub fn sample_codebook_indexed(
    n: usize,
    composition: &ProbDist,
    m: usize,
    seed: u64,
    code_index: u64,
) -> Result<Codebook, SimError> {
    assert!(m >= 1, "M must be at least 1");
    let counts = composition_counts(n, composition)?;
    let mut base = Vec::with_capacity(n);
    for (sym, &c) in counts.iter().enumerate() {
        base.extend(std::iter::repeat(sym).take(c));
    }
    debug_assert_eq!(base.len(), n);
    let codewords = (0..m)
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((code_index << 32) | j as u64);
            let mut cw = base.clone();
            cw.shuffle(&mut rng);
            cw
        })
        .collect();
    Ok(Codebook {
        n,
        codewords,
        composition: composition.clone(),
        seed,
        code_index,
    })
}

fn check_cap(n: usize, ny: usize) -> Result<(), SimError> {
    let requested = n as f64 * (ny as f64).ln();
    if requested > OUTPUT_ENUM_CAP_NATS + 1e-9 {
        return Err(SimError::CapExceeded {
            requested,
            cap: OUTPUT_ENUM_CAP_NATS,
        });
    }
    Ok(())
}

/// Iterates over all of `Y^n` in lexicographic order.
fn for_each_output(n: usize, ny: usize, mut f: impl FnMut(&[usize])) {
    let mut ys = vec![0usize; n];
    loop {
        f(&ys);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            ys[i] += 1;
            if ys[i] < ny {
                break;
            }
            ys[i] = 0;
        }
    }
}

/// Per-symbol ranking scores of all codewords against one output sequence.
fn all_scores(cb: &Codebook, metric: &DecodingMetric, ys: &[usize], buf: &mut [f64]) -> Vec<f64> {
    let ny = metric.shape().1;
    cb.codewords()
        .iter()
        .map(|xs| {
            type_into(xs, ys, ny, buf);
            metric.ranking_score_table(buf)
        })
        .collect()
}

/// Exact error probability of a codebook under the generalized likelihood
/// decoder: the expectation over the channel output and the decoder's own
/// randomization, with no sampling.
pub fn error_prob_exact(
    cb: &Codebook,
    w: &Channel,
    metric: &DecodingMetric,
) -> Result<f64, SimError> {
    let (n, ny) = (cb.n(), w.output().size());
    check_cap(n, ny)?;
    let m_count = cb.size();
    let ml = metric.is_ml_limit();
    let mut buf = vec![0.0; metric.shape().0 * metric.shape().1];
    let mut pe = vec![0.0f64; m_count];
    for_each_output(n, ny, |ys| {
        let scores = all_scores(cb, metric, ys, &mut buf);
        let post = posterior_from_scores(n, &scores, ml);
        for (m, cw) in cb.codewords().iter().enumerate() {
            let wp = w.seq_prob(cw, ys);
            if wp > 0.0 {
                pe[m] += wp * (1.0 - post[m]);
            }
        }
    });
    Ok(pe.iter().sum::<f64>() / m_count as f64)
}

/// Probability that the transmitted message is in the top-`list_size` score
/// set, with boundary ties split uniformly.
fn prob_in_list(scores: &[f64], m: usize, list_size: usize) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let cut = sorted[list_size - 1];
    let above = scores.iter().filter(|&&s| s > cut + TIE_TOL).count();
    let tied = scores.iter().filter(|&&s| (s - cut).abs() <= TIE_TOL).count();
    let s = scores[m];
    if s > cut + TIE_TOL {
        1.0
    } else if (s - cut).abs() <= TIE_TOL {
        (list_size - above) as f64 / tied as f64
    } else {
        0.0
    }
}

/// Exact list error probability: the chance the transmitted message is
/// absent from the list of the two highest-scoring messages. Ties at the
/// list boundary are split uniformly (the deterministic `β → ∞`
/// convention). Returns 0 when fewer than three messages exist.
pub fn list_error_prob_exact(
    cb: &Codebook,
    w: &Channel,
    metric: &DecodingMetric,
) -> Result<f64, SimError> {
    const LIST_SIZE: usize = 2;
    let (n, ny) = (cb.n(), w.output().size());
    check_cap(n, ny)?;
    let m_count = cb.size();
    if m_count <= LIST_SIZE {
        return Ok(0.0);
    }
    let mut buf = vec![0.0; metric.shape().0 * metric.shape().1];
    let mut pe = vec![0.0f64; m_count];
    for_each_output(n, ny, |ys| {
        let scores = all_scores(cb, metric, ys, &mut buf);
        for (m, cw) in cb.codewords().iter().enumerate() {
            let wp = w.seq_prob(cw, ys);
            if wp > 0.0 {
                pe[m] += wp * (1.0 - prob_in_list(&scores, m, LIST_SIZE));
            }
        }
    });
    Ok(pe.iter().sum::<f64>() / m_count as f64)
}

/// Whether message `mp` passes the erasure/list threshold test against the
/// other scores: `exp{n g_mp} ≥ e^{nT} Σ_{m̃≠mp} exp{n g_m̃}`.
///
/// For the ML limit this is evaluated in the `β → ∞` sense: a strict argmax
/// passes for every `T`; an exact tie with `c` top competitors passes only
/// when `T ≤ -ln(c)/n`; zero-likelihood candidates never pass.
fn passes_threshold(scores: &[f64], mp: usize, n: usize, t: f64, ml: bool) -> bool {
    let nf = n as f64;
    if ml {
        let s = scores[mp];
        if s == f64::NEG_INFINITY {
            return false;
        }
        let best_other = scores
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != mp)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if s > best_other + TIE_TOL {
            return true;
        }
        if (s - best_other).abs() <= TIE_TOL {
            // The finite-β pass event at an exact c-way tie holds strictly
            // below T = -ln(c)/n (lower-scored competitors keep the
            // denominator strictly larger), so ties pass only there.
            let c = scores
                .iter()
                .enumerate()
                .filter(|&(i, &v)| i != mp && (v - best_other).abs() <= TIE_TOL)
                .count();
            return t < -((c as f64).ln()) / nf;
        }
        return false;
    }
    let shift = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != mp)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = if shift == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        let z: f64 = scores
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != mp && v > f64::NEG_INFINITY)
            .map(|(_, &v)| (nf * (v - shift)).exp())
            .sum();
        nf * shift + z.ln()
    };
    nf * scores[mp] >= nf * t + lse
}

/// Exact undetected-error probability of the erasure/list decoder with
/// threshold `T`: the chance that some incorrect message passes the
/// threshold test.
pub fn ue_prob_exact(
    cb: &Codebook,
    w: &Channel,
    metric: &DecodingMetric,
    t: f64,
) -> Result<f64, SimError> {
    if !t.is_finite() {
        return Err(SimError::NonFiniteThreshold);
    }
    let (n, ny) = (cb.n(), w.output().size());
    check_cap(n, ny)?;
    let m_count = cb.size();
    let ml = metric.is_ml_limit();
    let mut buf = vec![0.0; metric.shape().0 * metric.shape().1];
    let mut pe = vec![0.0f64; m_count];
    for_each_output(n, ny, |ys| {
        let scores = all_scores(cb, metric, ys, &mut buf);
        let passers: Vec<bool> = (0..m_count)
            .map(|mp| passes_threshold(&scores, mp, n, t, ml))
            .collect();
        for (m, cw) in cb.codewords().iter().enumerate() {
            let wp = w.seq_prob(cw, ys);
            if wp > 0.0 && passers.iter().enumerate().any(|(mp, &p)| p && mp != m) {
                pe[m] += wp;
            }
        }
    });
    Ok(pe.iter().sum::<f64>() / m_count as f64)
}

/// Which error event a simulation measures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SimMode {
    Plain,
    List2,
    Erasure(f64),
}

impl std::fmt::Display for SimMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimMode::Plain => write!(f, "plain"),
            SimMode::List2 => write!(f, "list2"),
            SimMode::Erasure(t) => write!(f, "erasure({t})"),
        }
    }
}

/// Quenched/annealed summary of an ensemble run.
#[derive(Clone, Debug)]
pub struct SimulationReport {
    /// Per-code `ln P_e`; `-∞` for codes with zero error probability.
    pub per_code_ln_pe: Vec<f64>,
    /// `-mean(ln P_e)/n` over codes with positive error probability.
    pub quenched: f64,
    /// `-ln(mean P_e)/n` over all codes.
    pub annealed: f64,
    /// Sample standard deviation of `-ln(P_e)/n` over finite entries.
    pub std_normalized: f64,
    pub codes: usize,
    /// Codes with `P_e = 0`, excluded from the quenched mean.
    pub zero_pe_count: usize,
    pub mode: SimMode,
}

/// Number of messages for a target rate: `M = round(e^{nR})`.
pub fn messages_for_rate(n: usize, rate: f64) -> usize {
    (rate * n as f64).exp().round().max(1.0) as usize
}

/// Samples `k_codes` codebooks and evaluates each one exactly.
///
/// Errors when every code has zero error probability (the quenched average
/// is then undefined); a report with a nonzero `zero_pe_count` is returned
/// otherwise.
pub fn ensemble_run(
    n: usize,
    composition: &ProbDist,
    m_count: usize,
    k_codes: usize,
    seed: u64,
    mode: SimMode,
    w: &Channel,
    metric: &DecodingMetric,
) -> Result<SimulationReport, SimError> {
    assert!(k_codes >= 1);
    let pes: Result<Vec<f64>, SimError> = (0..k_codes)
        .into_par_iter()
        .map(|i| {
            let cb = sample_codebook_indexed(n, composition, m_count, seed, i as u64)?;
            match mode {
                SimMode::Plain => error_prob_exact(&cb, w, metric),
                SimMode::List2 => list_error_prob_exact(&cb, w, metric),
                SimMode::Erasure(t) => ue_prob_exact(&cb, w, metric, t),
            }
        })
        .collect();
    let pes = pes?;
    let per_code_ln_pe: Vec<f64> = pes.iter().map(|&p| p.ln()).collect();
    let finite: Vec<f64> = per_code_ln_pe.iter().cloned().filter(|v| v.is_finite()).collect();
    let zero_pe_count = k_codes - finite.len();
    if finite.is_empty() {
        return Err(SimError::AllZeroPe { codes: k_codes });
    }
    let nf = n as f64;
    let quenched = -finite.iter().sum::<f64>() / finite.len() as f64 / nf;
    let mean_pe = pes.iter().sum::<f64>() / k_codes as f64;
    let annealed = -mean_pe.ln() / nf;
    let std_normalized = if finite.len() > 1 {
        let vals: Vec<f64> = finite.iter().map(|&v| -v / nf).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (vals.len() - 1) as f64;
        var.sqrt()
    } else {
        0.0
    };
    Ok(SimulationReport {
        per_code_ln_pe,
        quenched,
        annealed,
        std_normalized,
        codes: k_codes,
        zero_pe_count,
        mode,
    })
}

/// Ordered-pair counts of codeword joint types.
#[derive(Clone, Debug)]
pub struct EnumeratorTable {
    /// Joint-type counts (denominator `n`, row-major over X×X') mapped to
    /// the number of ordered codeword pairs with that type.
    pub counts: BTreeMap<Vec<u16>, u64>,
    pub pairs_total: u64,
}

/// Exact ordered-pair type counts `N(Q_{XX'})` of a codebook.
pub fn enumerator_stats(cb: &Codebook) -> EnumeratorTable {
    let nx = cb.composition().len();
    let mut counts: BTreeMap<Vec<u16>, u64> = BTreeMap::new();
    let mut buf = vec![0u16; nx * nx];
    let m = cb.size();
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            for v in buf.iter_mut() {
                *v = 0;
            }
            for (&x, &xp) in cb.codewords()[a].iter().zip(&cb.codewords()[b]) {
                buf[x * nx + xp] += 1;
            }
            *counts.entry(buf.clone()).or_insert(0) += 1;
        }
    }
    EnumeratorTable {
        counts,
        pairs_total: (m * (m - 1)) as u64,
    }
}

/// Concentration regime of a pair type relative to `2R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    /// `I < 2R - 0.1`: populated types, mean predicted by `e^{n(2R-I)}`.
    Typical,
    /// `I > 2R + 0.1`: types that should be empty with high probability.
    Rare,
    Boundary,
}

/// Statistics of one pair type across an ensemble of codebooks.
#[derive(Clone, Debug)]
pub struct TypeRow {
    pub counts: Vec<u16>,
    pub mi: f64,
    /// `2R - I`, the predicted growth exponent of `N`.
    pub predicted_exponent: f64,
    /// Exact closed-form mean `M(M-1)·Pr{pair ∈ type}`.
    pub exact_mean: f64,
    pub emp_mean: f64,
    pub var_over_mean_sq: Option<f64>,
    /// Fraction of codes with `N ≥ 1`.
    pub freq_ge1: f64,
    pub regime: Regime,
}

#[derive(Clone, Debug)]
pub struct ConcentrationReport {
    pub rows: Vec<TypeRow>,
    pub n: usize,
    pub m_count: usize,
    pub codes: usize,
    pub rate: f64,
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Empirical pair-type enumerator statistics across `k_codes` sampled
/// codebooks, against the exact closed-form means.
pub fn enumerator_concentration(
    n: usize,
    composition: &ProbDist,
    rate: f64,
    k_codes: usize,
    seed: u64,
) -> Result<ConcentrationReport, SimError> {
    let m_count = messages_for_rate(n, rate);
    let comp_counts = composition_counts(n, composition)?;
    let nx = composition.len();
    // All pair types with both margins equal to the composition.
    let margins = [
        Some(comp_counts.iter().map(|&c| c as u32).collect::<Vec<u32>>()),
        Some(comp_counts.iter().map(|&c| c as u32).collect::<Vec<u32>>()),
    ];
    let dims = [nx, nx];
    let mut types: Vec<Vec<u16>> = Vec::new();
    crate::opt::enumerate_tables(
        &dims,
        n as u32,
        &margins,
        &vec![0; nx * nx],
        &vec![n as u32; nx * nx],
        &mut |counts| {
            types.push(counts.iter().map(|&c| c as u16).collect());
        },
    );
    let index: std::collections::HashMap<Vec<u16>, usize> = types
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();

    // Per-code counts, accumulated in code order.
    let per_code: Result<Vec<Vec<u64>>, SimError> = (0..k_codes)
        .into_par_iter()
        .map(|i| {
            let cb = sample_codebook_indexed(n, composition, m_count, seed, i as u64)?;
            let mut local = vec![0u64; types.len()];
            let mut buf = vec![0u16; nx * nx];
            let m = cb.size();
            for a in 0..m {
                for b in 0..m {
                    if a == b {
                        continue;
                    }
                    for v in buf.iter_mut() {
                        *v = 0;
                    }
                    for (&x, &xp) in cb.codewords()[a].iter().zip(&cb.codewords()[b]) {
                        buf[x * nx + xp] += 1;
                    }
                    local[index[buf.as_slice()]] += 1;
                }
            }
            Ok(local)
        })
        .collect();
    let per_code = per_code?;

    let ln_type_class_x = ln_factorial(n) - comp_counts.iter().map(|&c| ln_factorial(c)).sum::<f64>();
    let kf = k_codes as f64;
    let rows = types
        .iter()
        .enumerate()
        .map(|(ti, t)| {
            let mass: Vec<f64> = t.iter().map(|&c| c as f64 / n as f64).collect();
            let mi = crate::info::mi_of_table(&mass, nx, nx);
            let ln_pair_class = ln_factorial(n)
                - t.iter().map(|&c| ln_factorial(c as usize)).sum::<f64>();
            let p = (ln_pair_class - 2.0 * ln_type_class_x).exp();
            let exact_mean = (m_count * (m_count - 1)) as f64 * p;
            let vals: Vec<f64> = per_code.iter().map(|c| c[ti] as f64).collect();
            let emp_mean = vals.iter().sum::<f64>() / kf;
            let var = vals.iter().map(|v| (v - emp_mean) * (v - emp_mean)).sum::<f64>() / kf;
            let var_over_mean_sq = if emp_mean > 0.0 {
                Some(var / (emp_mean * emp_mean))
            } else {
                None
            };
            let freq_ge1 = vals.iter().filter(|&&v| v >= 1.0).count() as f64 / kf;
            let regime = if mi < 2.0 * rate - 0.1 {
                Regime::Typical
            } else if mi > 2.0 * rate + 0.1 {
                Regime::Rare
            } else {
                Regime::Boundary
            };
            TypeRow {
                counts: t.clone(),
                mi,
                predicted_exponent: 2.0 * rate - mi,
                exact_mean,
                emp_mean,
                var_over_mean_sq,
                freq_ge1,
                regime,
            }
        })
        .collect();
    Ok(ConcentrationReport {
        rows,
        n,
        m_count,
        codes: k_codes,
        rate,
    })
}

/// Entropy of a composition, for rate sanity checks.
pub fn composition_entropy(composition: &ProbDist) -> f64 {
    entropy_of_slice(composition.mass())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::Alphabet;

    fn uniform2() -> ProbDist {
        ProbDist::uniform(Alphabet::new(2).unwrap())
    }

    #[test]
    fn sampled_codewords_have_exact_type() {
        let cb = sample_codebook(4, &uniform2(), 8, 7).unwrap();
        for cw in cb.codewords() {
            assert_eq!(cw.iter().filter(|&&x| x == 1).count(), 2);
        }
    }

    #[test]
    fn same_seed_same_codebook() {
        let a = sample_codebook(6, &uniform2(), 5, 42).unwrap();
        let b = sample_codebook(6, &uniform2(), 5, 42).unwrap();
        assert_eq!(a.codewords(), b.codewords());
        let c = sample_codebook(6, &uniform2(), 5, 43).unwrap();
        assert_ne!(a.codewords(), c.codewords());
    }

    #[test]
    fn single_codeword_has_no_pairs() {
        let cb = sample_codebook(4, &uniform2(), 1, 3).unwrap();
        let table = enumerator_stats(&cb);
        assert!(table.counts.is_empty());
        assert_eq!(table.pairs_total, 0);
    }

    #[test]
    fn non_integral_composition_rejected() {
        let comp = ProbDist::new(Alphabet::new(2).unwrap(), vec![0.3, 0.7]).unwrap();
        match sample_codebook(4, &comp, 2, 0) {
            Err(SimError::NonIntegralComposition { n, .. }) => assert_eq!(n, 4),
            other => panic!("expected NonIntegralComposition, got {other:?}"),
        }
    }

    #[test]
    fn identical_codewords_err_half() {
        let w = Channel::bsc(0.1);
        let m = DecodingMetric::mmi(1.0, &w).unwrap();
        let cb = Codebook::from_codewords(vec![vec![0, 1], vec![0, 1]], 2);
        assert_eq!(error_prob_exact(&cb, &w, &m).unwrap(), 0.5);
    }

    #[test]
    fn noiseless_distinct_ml_err_zero() {
        let w = Channel::identity(2);
        let m = DecodingMetric::ml_limit(&w);
        let cb = Codebook::from_codewords(vec![vec![0, 1], vec![1, 0]], 2);
        assert_eq!(error_prob_exact(&cb, &w, &m).unwrap(), 0.0);
    }

    #[test]
    fn bsc_quarter_hand_enumeration() {
        // BSC(0.25), n=2, codewords (0,1) and (1,0), ML with uniform ties:
        // the four outputs give 0.09375 + 0 + 0.0625 + 0.09375 = 0.25.
        let w = Channel::bsc(0.25);
        let m = DecodingMetric::ml_limit(&w);
        let cb = Codebook::from_codewords(vec![vec![0, 1], vec![1, 0]], 2);
        assert!((error_prob_exact(&cb, &w, &m).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cap_exceeded_rejected() {
        let w = Channel::bsc(0.1);
        let m = DecodingMetric::ml_limit(&w);
        let n = 20;
        let cw: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let cb = Codebook::from_codewords(vec![cw.clone(), cw], n);
        assert!(matches!(
            error_prob_exact(&cb, &w, &m),
            Err(SimError::CapExceeded { .. })
        ));
    }

    #[test]
    fn list_error_small_codebooks() {
        let w = Channel::bsc(0.2);
        let m = DecodingMetric::ml_limit(&w);
        // M = 2: the list covers the codebook.
        let cb = Codebook::from_codewords(vec![vec![0, 1], vec![1, 0]], 2);
        assert_eq!(list_error_prob_exact(&cb, &w, &m).unwrap(), 0.0);
        // M = 3 identical codewords: uniform 2-of-3 tie split misses the
        // true message with probability 1/3.
        let cb = Codebook::from_codewords(vec![vec![0, 1]; 3], 2);
        assert!((list_error_prob_exact(&cb, &w, &m).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        // Noiseless, distinct codewords: no list error.
        let w = Channel::identity(2);
        let m = DecodingMetric::ml_limit(&w);
        let cb = Codebook::from_codewords(
            vec![vec![0, 0, 1, 1], vec![0, 1, 0, 1], vec![1, 1, 0, 0]],
            4,
        );
        assert_eq!(list_error_prob_exact(&cb, &w, &m).unwrap(), 0.0);
    }

    #[test]
    fn erasure_huge_threshold_all_erased() {
        let w = Channel::bsc(0.2);
        let m = DecodingMetric::likelihood(1.0, &w).unwrap();
        let cb = Codebook::from_codewords(vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0]], 4);
        assert_eq!(ue_prob_exact(&cb, &w, &m, 1e9).unwrap(), 0.0);
    }

    #[test]
    fn erasure_ml_negative_threshold_is_argmax_error() {
        // With T very negative and the ML limit, a wrong message is decided
        // exactly when it beats the rest, which is the argmax error event.
        let w = Channel::bsc(0.2);
        let m = DecodingMetric::ml_limit(&w);
        let cb = Codebook::from_codewords(vec![vec![0, 0, 1], vec![0, 1, 0]], 3);
        let ue = ue_prob_exact(&cb, &w, &m, -1e9).unwrap();
        // Direct enumeration of the argmax rule (no ties on this instance
        // except symmetric ones handled identically).
        let score = |xs: &[usize], ys: &[usize]| {
            let mut buf = vec![0.0; 4];
            type_into(xs, ys, 2, &mut buf);
            m.ranking_score_table(&buf)
        };
        let mut direct = 0.0;
        for_each_output(3, 2, |ys| {
            let s0 = score(&cb.codewords()[0], ys);
            let s1 = score(&cb.codewords()[1], ys);
            let w0 = w.seq_prob(&cb.codewords()[0], ys);
            let w1 = w.seq_prob(&cb.codewords()[1], ys);
            if s1 > s0 + TIE_TOL {
                direct += 0.5 * w0;
            }
            if s0 > s1 + TIE_TOL {
                direct += 0.5 * w1;
            }
            if (s0 - s1).abs() <= TIE_TOL {
                // Exact tie passes the threshold test at very negative T.
                direct += 0.5 * w0 + 0.5 * w1;
            }
        });
        assert!((ue - direct).abs() < 1e-12);
    }

    #[test]
    fn undetected_at_nonneg_threshold_below_plain_ml_error() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let p = 0.1 + 0.3 * rng.gen::<f64>();
            let w = Channel::bsc(p);
            let m = DecodingMetric::ml_limit(&w);
            let n = 6;
            let comp = uniform2();
            let cb = sample_codebook(n, &comp, 3, 100 + trial).unwrap();
            let plain = error_prob_exact(&cb, &w, &m).unwrap();
            let ue = ue_prob_exact(&cb, &w, &m, 0.0).unwrap();
            assert!(
                ue <= plain + 1e-12,
                "ue {ue} > plain {plain} on trial {trial}"
            );
        }
    }

    #[test]
    fn ensemble_single_code_quenched_equals_annealed() {
        let w = Channel::bsc(0.25);
        let m = DecodingMetric::ml_limit(&w);
        let rep = ensemble_run(6, &uniform2(), 2, 1, 5, SimMode::Plain, &w, &m).unwrap();
        assert_eq!(rep.quenched, rep.annealed);
        assert_eq!(rep.per_code_ln_pe.len(), 1);
    }

    #[test]
    fn ensemble_jensen_and_determinism() {
        let w = Channel::bsc(0.25);
        let m = DecodingMetric::ml_limit(&w);
        let rep = ensemble_run(8, &uniform2(), 4, 40, 9, SimMode::Plain, &w, &m).unwrap();
        assert!(rep.quenched >= rep.annealed - 1e-12);
        assert_eq!(rep.zero_pe_count, 0);
        let rep2 = ensemble_run(8, &uniform2(), 4, 40, 9, SimMode::Plain, &w, &m).unwrap();
        assert_eq!(rep.quenched.to_bits(), rep2.quenched.to_bits());
        assert_eq!(rep.annealed.to_bits(), rep2.annealed.to_bits());
        assert_eq!(rep.per_code_ln_pe, rep2.per_code_ln_pe);
    }

    #[test]
    fn ensemble_all_zero_pe_flagged() {
        let w = Channel::identity(2);
        let m = DecodingMetric::ml_limit(&w);
        // Seed chosen so every sampled pair of codewords is distinct; on a
        // noiseless channel every code then has zero error probability.
        let rep = ensemble_run(8, &uniform2(), 2, 20, 7, SimMode::Plain, &w, &m);
        assert!(matches!(rep, Err(SimError::AllZeroPe { .. })));
    }

    #[test]
    fn large_beta_matches_ml() {
        let w = Channel::bsc(0.3);
        let ml = DecodingMetric::ml_limit(&w);
        let big = DecodingMetric::likelihood(1000.0, &w).unwrap();
        let cb = Codebook::from_codewords(vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]], 3);
        let pe_ml = error_prob_exact(&cb, &w, &ml).unwrap();
        let pe_big = error_prob_exact(&cb, &w, &big).unwrap();
        assert!((pe_ml - pe_big).abs() < 1e-6);
    }

    #[test]
    fn finite_beta_error_positive_with_two_messages() {
        let w = Channel::bsc(0.2);
        let m = DecodingMetric::likelihood(1.0, &w).unwrap();
        let cb = Codebook::from_codewords(vec![vec![0, 1], vec![1, 0]], 2);
        let pe = error_prob_exact(&cb, &w, &m).unwrap();
        assert!(pe > 0.0 && pe <= 1.0);
    }

    #[test]
    fn enumerator_table_totals() {
        let cb = sample_codebook(6, &uniform2(), 4, 17).unwrap();
        let table = enumerator_stats(&cb);
        let total: u64 = table.counts.values().sum();
        assert_eq!(total, 12);
        assert_eq!(table.pairs_total, 12);
        // Two identical codewords put all pair mass on the diagonal type.
        let cb = Codebook::from_codewords(vec![vec![0, 1, 0, 1]; 2], 4);
        let table = enumerator_stats(&cb);
        assert_eq!(table.counts.len(), 1);
        let t = table.counts.keys().next().unwrap();
        // Diagonal type: counts at (0,0) and (1,1) only.
        assert_eq!(t.as_slice(), &[2, 0, 0, 2]);
    }

    #[test]
    fn concentration_product_type_matches_closed_form() {
        let rep = enumerator_concentration(8, &uniform2(), 0.35, 100, 21).unwrap();
        // Product type: counts (2,2,2,2) at n = 8.
        let row = rep
            .rows
            .iter()
            .find(|r| r.counts == vec![2, 2, 2, 2])
            .unwrap();
        assert!(row.exact_mean > 0.0);
        // Empirical mean within a generous factor of the exact mean.
        assert!(row.emp_mean > row.exact_mean / 3.0);
        assert!(row.emp_mean < row.exact_mean * 3.0);
        // Union bound for rare types: freq(N ≥ 1) ≤ exact mean.
        for r in &rep.rows {
            if r.regime == Regime::Rare {
                assert!(r.freq_ge1 <= r.exact_mean.min(1.0) + 3.0 * (r.exact_mean / rep.codes as f64).sqrt() + 1e-9);
            }
        }
    }
}
