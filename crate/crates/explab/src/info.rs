//! Alphabets, probability distributions, empirical types, and the
//! information-theoretic functionals used by every exponent formula.
//!
//! Conventions used throughout the crate:
//!
//! - all logarithms are natural, so entropies, rates and divergences are in
//!   nats;
//! - `0·ln 0 = 0` and `0·ln(0/0) = 0`, while `q·ln(q/0) = +∞` for `q > 0`;
//! - simplex membership and marginal matching are checked to `1e-9`.

use thiserror::Error;

/// Tolerance for simplex membership and marginal-constraint matching.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Tie tolerance for score comparisons (argmax sets, list boundaries).
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum InfoError {
    #[error("alphabet size must be at least 1")]
    EmptyAlphabet,
    #[error("expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("negative probability mass {value} at index {index}")]
    NegativeMass { index: usize, value: f64 },
    #[error("probability mass sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("joint distribution must have {expected} axes, got {got}")]
    AxisCount { expected: &'static str, got: usize },
    #[error("mass table has {got} entries, expected {expected}")]
    MassShape { expected: usize, got: usize },
    #[error("channel row {row} sums to {sum}, expected 1")]
    RowNotStochastic { row: usize, sum: f64 },
    #[error("sequence lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("symbol {symbol} out of range for alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },
    #[error("marginal mismatch: max deviation {deviation} exceeds tolerance")]
    MarginalMismatch { deviation: f64 },
}

/// A finite alphabet, optionally carrying display labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    size: usize,
    labels: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self, InfoError> {
        if size == 0 {
            return Err(InfoError::EmptyAlphabet);
        }
        Ok(Alphabet { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self, InfoError> {
        if labels.is_empty() {
            return Err(InfoError::EmptyAlphabet);
        }
        Ok(Alphabet {
            size: labels.len(),
            labels: Some(labels),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Display label of a symbol; defaults to its index.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

/// A probability vector over an [`Alphabet`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbDist {
    alphabet: Alphabet,
    mass: Vec<f64>,
}

impl ProbDist {
    pub fn new(alphabet: Alphabet, mass: Vec<f64>) -> Result<Self, InfoError> {
        if mass.len() != alphabet.size() {
            return Err(InfoError::MassShape {
                expected: alphabet.size(),
                got: mass.len(),
            });
        }
        validate_simplex(&mass)?;
        Ok(ProbDist { alphabet, mass })
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let n = alphabet.size();
        ProbDist {
            alphabet,
            mass: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(alphabet: Alphabet, index: usize) -> Result<Self, InfoError> {
        if index >= alphabet.size() {
            return Err(InfoError::SymbolOutOfRange {
                symbol: index,
                size: alphabet.size(),
            });
        }
        let mut mass = vec![0.0; alphabet.size()];
        mass[index] = 1.0;
        Ok(ProbDist { alphabet, mass })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn get(&self, i: usize) -> f64 {
        self.mass[i]
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }
}

fn validate_simplex(mass: &[f64]) -> Result<(), InfoError> {
    for (i, &v) in mass.iter().enumerate() {
        if !(v >= 0.0) {
            return Err(InfoError::NegativeMass { index: i, value: v });
        }
    }
    let sum: f64 = mass.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(InfoError::NotNormalized { sum });
    }
    Ok(())
}

/// A joint distribution over two or three alphabets, stored as a dense
/// row-major table.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDist {
    axes: Vec<Alphabet>,
    mass: Vec<f64>,
}

impl JointDist {
    pub fn new(axes: Vec<Alphabet>, mass: Vec<f64>) -> Result<Self, InfoError> {
        if axes.len() < 2 || axes.len() > 3 {
            return Err(InfoError::AxisCount {
                expected: "2 or 3",
                got: axes.len(),
            });
        }
        let expected: usize = axes.iter().map(|a| a.size()).product();
        if mass.len() != expected {
            return Err(InfoError::MassShape {
                expected,
                got: mass.len(),
            });
        }
        validate_simplex(&mass)?;
        Ok(JointDist { axes, mass })
    }

    /// 2-axis joint from a nested row table.
    pub fn from_rows(ax: Alphabet, ay: Alphabet, rows: &[Vec<f64>]) -> Result<Self, InfoError> {
        let mut mass = Vec::with_capacity(ax.size() * ay.size());
        for r in rows {
            mass.extend_from_slice(r);
        }
        JointDist::new(vec![ax, ay], mass)
    }

    /// Product coupling of two marginals.
    pub fn product(pa: &ProbDist, pb: &ProbDist) -> Self {
        let mut mass = Vec::with_capacity(pa.len() * pb.len());
        for &a in pa.mass() {
            for &b in pb.mass() {
                mass.push(a * b);
            }
        }
        JointDist {
            axes: vec![pa.alphabet.clone(), pb.alphabet.clone()],
            mass,
        }
    }

    pub fn axes(&self) -> &[Alphabet] {
        &self.axes
    }

    pub fn num_axes(&self) -> usize {
        self.axes.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.size()).collect()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Entry at the given coordinates (row-major indexing).
    pub fn get(&self, coords: &[usize]) -> f64 {
        debug_assert_eq!(coords.len(), self.axes.len());
        let mut idx = 0;
        for (c, a) in coords.iter().zip(&self.axes) {
            idx = idx * a.size() + c;
        }
        self.mass[idx]
    }

    /// Marginal along one axis.
    pub fn marginal(&self, axis: usize) -> ProbDist {
        let dims = self.dims();
        let mut out = vec![0.0; dims[axis]];
        for (idx, &v) in self.mass.iter().enumerate() {
            out[coord_of(idx, &dims, axis)] += v;
        }
        ProbDist {
            alphabet: self.axes[axis].clone(),
            mass: out,
        }
    }

    /// Pair marginal of a 3-axis joint (axes must be distinct and ascending).
    pub fn pair_marginal(&self, a: usize, b: usize) -> JointDist {
        debug_assert!(self.axes.len() == 3 && a < b && b < 3);
        let dims = self.dims();
        let mut out = vec![0.0; dims[a] * dims[b]];
        for (idx, &v) in self.mass.iter().enumerate() {
            let ca = coord_of(idx, &dims, a);
            let cb = coord_of(idx, &dims, b);
            out[ca * dims[b] + cb] += v;
        }
        JointDist {
            axes: vec![self.axes[a].clone(), self.axes[b].clone()],
            mass: out,
        }
    }
}

/// Coordinate along `axis` of the flat row-major index `idx`.
pub(crate) fn coord_of(idx: usize, dims: &[usize], axis: usize) -> usize {
    let mut stride = 1;
    for d in dims[axis + 1..].iter() {
        stride *= d;
    }
    (idx / stride) % dims[axis]
}

/// A discrete memoryless channel: a row-stochastic table `W(y|x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    input: Alphabet,
    output: Alphabet,
    w: Vec<f64>, // row-major, w[x * ny + y]
}

impl Channel {
    pub fn new(input: Alphabet, output: Alphabet, rows: &[Vec<f64>]) -> Result<Self, InfoError> {
        if rows.len() != input.size() {
            return Err(InfoError::MassShape {
                expected: input.size(),
                got: rows.len(),
            });
        }
        let ny = output.size();
        let mut w = Vec::with_capacity(input.size() * ny);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != ny {
                return Err(InfoError::MassShape {
                    expected: ny,
                    got: row.len(),
                });
            }
            for (y, &v) in row.iter().enumerate() {
                if !(v >= 0.0) {
                    return Err(InfoError::NegativeMass {
                        index: x * ny + y,
                        value: v,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(InfoError::RowNotStochastic { row: x, sum });
            }
            w.extend_from_slice(row);
        }
        Ok(Channel { input, output, w })
    }

    /// Binary symmetric channel with crossover probability `p`.
    pub fn bsc(p: f64) -> Self {
        let b = Alphabet::new(2).unwrap();
        Channel::new(b.clone(), b, &[vec![1.0 - p, p], vec![p, 1.0 - p]]).unwrap()
    }

    /// Channel whose output is independent of the input: `W(y|x) = q(y)`.
    pub fn useless(input: Alphabet, q: &ProbDist) -> Self {
        let mut w = Vec::with_capacity(input.size() * q.len());
        for _ in 0..input.size() {
            w.extend_from_slice(q.mass());
        }
        Channel {
            input,
            output: q.alphabet().clone(),
            w,
        }
    }

    /// Noiseless identity channel on an alphabet of the given size.
    pub fn identity(size: usize) -> Self {
        let a = Alphabet::new(size).unwrap();
        let mut w = vec![0.0; size * size];
        for i in 0..size {
            w[i * size + i] = 1.0;
        }
        Channel {
            input: a.clone(),
            output: a,
            w,
        }
    }

    pub fn input(&self) -> &Alphabet {
        &self.input
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.w[x * self.output.size() + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let ny = self.output.size();
        &self.w[x * ny..(x + 1) * ny]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.input.size()).map(|x| self.row(x).to_vec()).collect()
    }

    /// Per-sequence transition probability `W(y|x) = Π W(y_i|x_i)`.
    pub fn seq_prob(&self, xs: &[usize], ys: &[usize]) -> f64 {
        debug_assert_eq!(xs.len(), ys.len());
        let mut p = 1.0;
        for (&x, &y) in xs.iter().zip(ys) {
            p *= self.prob(x, y);
        }
        p
    }
}

/// A real number extended by `+∞`. Used for divergences over empty supports
/// and for exponents of infeasible optimization problems. `+∞` absorbs
/// addition; `NaN` and `-∞` are rejected at construction.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ExtReal(f64);

impl ExtReal {
    pub const INF: ExtReal = ExtReal(f64::INFINITY);

    pub fn finite(v: f64) -> ExtReal {
        assert!(v.is_finite(), "ExtReal::finite called with {v}");
        ExtReal(v)
    }

    /// Wraps a raw float; accepts finite values and `+∞`.
    pub fn from_f64(v: f64) -> ExtReal {
        assert!(
            !v.is_nan() && v != f64::NEG_INFINITY,
            "ExtReal cannot hold {v}"
        );
        ExtReal(v)
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn as_f64(self) -> f64 {
        self.0
    }
}

impl std::ops::Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        ExtReal(self.0 + rhs.0)
    }
}

impl std::ops::Add<f64> for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: f64) -> ExtReal {
        debug_assert!(rhs.is_finite());
        ExtReal(self.0 + rhs)
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// `-Σ p ln p` over a raw mass slice, with `0·ln 0 = 0`.
pub(crate) fn entropy_of_slice(mass: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in mass {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// Shannon entropy `H(p)` in nats; lies in `[0, ln |alphabet|]`.
pub fn entropy(p: &ProbDist) -> f64 {
    entropy_of_slice(p.mass())
}

/// Mutual information `I(X;Y) = H(X) + H(Y) - H(X,Y)` of a 2-axis joint.
pub fn mutual_information(j: &JointDist) -> f64 {
    assert_eq!(j.num_axes(), 2, "mutual_information expects a 2-axis joint");
    mi_of_table(j.mass(), j.axes[0].size(), j.axes[1].size())
}

/// Mutual information of a raw 2-axis table.
pub(crate) fn mi_of_table(mass: &[f64], nx: usize, ny: usize) -> f64 {
    let mut mx = vec![0.0; nx];
    let mut my = vec![0.0; ny];
    for x in 0..nx {
        for y in 0..ny {
            let v = mass[x * ny + y];
            mx[x] += v;
            my[y] += v;
        }
    }
    entropy_of_slice(&mx) + entropy_of_slice(&my) - entropy_of_slice(mass)
}

pub(crate) const MAX_COUNT_AXIS: usize = 32;

/// `Σ c·ln(c)` over a count slice; `lni` is a table of integer logarithms.
#[inline]
pub(crate) fn count_log_sum(counts: &[u32], lni: &[f64]) -> f64 {
    counts.iter().map(|&c| c as f64 * lni[c as usize]).sum()
}

/// Mutual information of a 2-axis count table summing to `denom`.
pub(crate) fn mi_of_counts(counts: &[u32], nx: usize, ny: usize, denom: u32, lni: &[f64]) -> f64 {
    debug_assert!(nx <= MAX_COUNT_AXIS && ny <= MAX_COUNT_AXIS);
    let mut mx = [0u32; MAX_COUNT_AXIS];
    let mut my = [0u32; MAX_COUNT_AXIS];
    for x in 0..nx {
        for y in 0..ny {
            let c = counts[x * ny + y];
            mx[x] += c;
            my[y] += c;
        }
    }
    // H(X) + H(Y) - H(XY) = ln d + (S_xy - S_x - S_y)/d.
    let s_xy = count_log_sum(counts, lni);
    let s_x = count_log_sum(&mx[..nx], lni);
    let s_y = count_log_sum(&my[..ny], lni);
    lni[denom as usize] + (s_xy - s_x - s_y) / denom as f64
}

/// Conditional mutual information `I(A;B|C)` of a 3-axis joint, where
/// `a`, `b`, `given` name the axes (a permutation of `{0,1,2}`).
///
/// Computed as `H(A,C) + H(B,C) - H(C) - H(A,B,C)`.
pub fn conditional_mi(j: &JointDist, a: usize, b: usize, given: usize) -> f64 {
    assert_eq!(j.num_axes(), 3, "conditional_mi expects a 3-axis joint");
    assert!(a != b && b != given && a != given && a < 3 && b < 3 && given < 3);
    let (lo1, hi1) = if a < given { (a, given) } else { (given, a) };
    let (lo2, hi2) = if b < given { (b, given) } else { (given, b) };
    let hac = entropy_of_slice(j.pair_marginal(lo1, hi1).mass());
    let hbc = entropy_of_slice(j.pair_marginal(lo2, hi2).mass());
    let hc = entropy(&j.marginal(given));
    let habc = entropy_of_slice(j.mass());
    hac + hbc - hc - habc
}

/// Multi-information `I(X;X';X̃) = H(X) + H(X') + H(X̃) - H(X,X',X̃)` of a
/// 3-axis joint.
pub fn multi_information(j: &JointDist) -> f64 {
    assert_eq!(j.num_axes(), 3, "multi_information expects a 3-axis joint");
    let h: f64 = (0..3).map(|ax| entropy(&j.marginal(ax))).sum();
    h - entropy_of_slice(j.mass())
}

/// Weighted divergence `D(Q_{Y|X} ‖ W | Q_X)` of the conditional induced by
/// a 2-axis joint against a channel.
///
/// Returns `+∞` exactly when the joint puts positive mass on a transition
/// with `W(y|x) = 0`. The joint's X-marginal must equal `q_x` within
/// [`SIMPLEX_TOL`].
pub fn weighted_divergence(
    j: &JointDist,
    w: &Channel,
    q_x: &ProbDist,
) -> Result<ExtReal, InfoError> {
    assert_eq!(j.num_axes(), 2);
    let mx = j.marginal(0);
    let dev = mx
        .mass()
        .iter()
        .zip(q_x.mass())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if dev > SIMPLEX_TOL {
        return Err(InfoError::MarginalMismatch { deviation: dev });
    }
    let nx = j.axes[0].size();
    let ny = j.axes[1].size();
    Ok(ExtReal::from_f64(wdiv_table(j.mass(), nx, ny, |x, y| {
        w.prob(x, y)
    })))
}

/// `D(Q_{Y|X} ‖ W | Q_X)` over a raw 2-axis table, using the table's own
/// X-marginal as the weighting.
pub(crate) fn wdiv_table(mass: &[f64], nx: usize, ny: usize, w: impl Fn(usize, usize) -> f64) -> f64 {
    let mut mx = vec![0.0; nx];
    for x in 0..nx {
        for y in 0..ny {
            mx[x] += mass[x * ny + y];
        }
    }
    let mut d = 0.0;
    for x in 0..nx {
        for y in 0..ny {
            let q = mass[x * ny + y];
            if q > 0.0 {
                let wxy = w(x, y);
                if wxy <= 0.0 {
                    return f64::INFINITY;
                }
                d += q * (q / (mx[x] * wxy)).ln();
            }
        }
    }
    d
}

/// Joint empirical distribution of two equal-length symbol sequences.
pub fn joint_type(
    xs: &[usize],
    ys: &[usize],
    ax: &Alphabet,
    ay: &Alphabet,
) -> Result<JointDist, InfoError> {
    if xs.len() != ys.len() {
        return Err(InfoError::LengthMismatch {
            a: xs.len(),
            b: ys.len(),
        });
    }
    if xs.is_empty() {
        return Err(InfoError::EmptySequence);
    }
    let (nx, ny) = (ax.size(), ay.size());
    let mut counts = vec![0usize; nx * ny];
    for (&x, &y) in xs.iter().zip(ys) {
        if x >= nx {
            return Err(InfoError::SymbolOutOfRange { symbol: x, size: nx });
        }
        if y >= ny {
            return Err(InfoError::SymbolOutOfRange { symbol: y, size: ny });
        }
        counts[x * ny + y] += 1;
    }
    let n = xs.len() as f64;
    let mass = counts.iter().map(|&c| c as f64 / n).collect();
    Ok(JointDist {
        axes: vec![ax.clone(), ay.clone()],
        mass,
    })
}

/// All single-axis marginals of a joint.
pub fn marginals(j: &JointDist) -> Vec<ProbDist> {
    (0..j.num_axes()).map(|ax| j.marginal(ax)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bin() -> Alphabet {
        Alphabet::new(2).unwrap()
    }

    #[test]
    fn entropy_uniform_binary_is_ln2() {
        let p = ProbDist::uniform(bin());
        assert!((entropy(&p) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn entropy_point_mass_is_zero() {
        let p = ProbDist::point_mass(bin(), 0).unwrap();
        assert_eq!(entropy(&p), 0.0);
    }

    #[test]
    fn entropy_quarter_three_quarters() {
        // -0.25 ln 0.25 - 0.75 ln 0.75
        let p = ProbDist::new(bin(), vec![0.25, 0.75]).unwrap();
        assert!((entropy(&p) - 0.562335).abs() < 1e-6);
    }

    #[test]
    fn mi_product_is_zero() {
        let p = ProbDist::new(bin(), vec![0.3, 0.7]).unwrap();
        let q = ProbDist::new(bin(), vec![0.6, 0.4]).unwrap();
        let j = JointDist::product(&p, &q);
        assert!(mutual_information(&j).abs() < 1e-12);
    }

    #[test]
    fn mi_identity_coupling_is_ln2() {
        let j = JointDist::from_rows(bin(), bin(), &[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!((mutual_information(&j) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn mi_hand_value() {
        let j = JointDist::from_rows(bin(), bin(), &[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        assert!((mutual_information(&j) - 0.192745).abs() < 1e-6);
    }

    #[test]
    fn conditional_mi_independent_triple_is_zero() {
        let mass = vec![0.125; 8];
        let j = JointDist::new(vec![bin(), bin(), bin()], mass).unwrap();
        assert!(conditional_mi(&j, 1, 2, 0).abs() < 1e-12);
    }

    #[test]
    fn conditional_mi_xp_equals_y_independent_of_x() {
        // X uniform and independent; X' = Y uniform.
        let mut mass = vec![0.0; 8];
        for x in 0..2 {
            for v in 0..2 {
                mass[x * 4 + v * 2 + v] = 0.25;
            }
        }
        let j = JointDist::new(vec![bin(), bin(), bin()], mass).unwrap();
        assert!((conditional_mi(&j, 1, 2, 0) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn multi_information_cases() {
        // Independent triple.
        let j = JointDist::new(vec![bin(), bin(), bin()], vec![0.125; 8]).unwrap();
        assert!(multi_information(&j).abs() < 1e-12);
        // X = X' = X̃ uniform: 3H - H = 2 ln 2.
        let mut mass = vec![0.0; 8];
        mass[0] = 0.5;
        mass[7] = 0.5;
        let j = JointDist::new(vec![bin(), bin(), bin()], mass).unwrap();
        assert!((multi_information(&j) - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        // X = X' uniform, X̃ independent uniform: ln 2.
        let mut mass = vec![0.0; 8];
        for t in 0..2 {
            mass[t] = 0.25; // x=0, x'=0
            mass[6 + t] = 0.25; // x=1, x'=1
        }
        let j = JointDist::new(vec![bin(), bin(), bin()], mass).unwrap();
        assert!((multi_information(&j) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn weighted_divergence_at_channel_is_zero() {
        let w = Channel::bsc(0.1);
        let qx = ProbDist::uniform(bin());
        let j = JointDist::from_rows(bin(), bin(), &[vec![0.45, 0.05], vec![0.05, 0.45]]).unwrap();
        let d = weighted_divergence(&j, &w, &qx).unwrap();
        assert!(d.is_finite() && d.as_f64().abs() < 1e-12);
    }

    #[test]
    fn weighted_divergence_zero_transition_is_infinite() {
        let w = Channel::identity(2);
        let qx = ProbDist::uniform(bin());
        let j = JointDist::from_rows(bin(), bin(), &[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        let d = weighted_divergence(&j, &w, &qx).unwrap();
        assert!(d.is_infinite());
    }

    #[test]
    fn weighted_divergence_bsc_hand_value() {
        // Q_{Y|X} = BSC(0.3) against W = BSC(0.1), uniform Q_X:
        // 0.3 ln(0.3/0.1) + 0.7 ln(0.7/0.9).
        let w = Channel::bsc(0.1);
        let qx = ProbDist::uniform(bin());
        let j = JointDist::from_rows(bin(), bin(), &[vec![0.35, 0.15], vec![0.15, 0.35]]).unwrap();
        let d = weighted_divergence(&j, &w, &qx).unwrap().as_f64();
        let expected = 0.3 * (0.3f64 / 0.1).ln() + 0.7 * (0.7f64 / 0.9).ln();
        assert!((expected - 0.153664).abs() < 1e-6);
        assert!((d - expected).abs() < 1e-12);
    }

    #[test]
    fn weighted_divergence_marginal_mismatch_rejected() {
        let w = Channel::bsc(0.1);
        let qx = ProbDist::new(bin(), vec![0.9, 0.1]).unwrap();
        let j = JointDist::from_rows(bin(), bin(), &[vec![0.45, 0.05], vec![0.05, 0.45]]).unwrap();
        assert!(weighted_divergence(&j, &w, &qx).is_err());
    }

    #[test]
    fn joint_type_basic() {
        let j = joint_type(&[0, 1], &[0, 0], &bin(), &bin()).unwrap();
        assert_eq!(j.mass(), &[0.5, 0.0, 0.5, 0.0]);
        // xs = ys gives a diagonal joint equal to the type of xs.
        let j = joint_type(&[0, 1, 1], &[0, 1, 1], &bin(), &bin()).unwrap();
        assert!((j.get(&[0, 0]) - 1.0 / 3.0).abs() < 1e-12);
        assert!((j.get(&[1, 1]) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(j.get(&[0, 1]), 0.0);
        // n = 4 checkerboard: uniform over the 4 cells.
        let j = joint_type(&[0, 0, 1, 1], &[0, 1, 0, 1], &bin(), &bin()).unwrap();
        assert_eq!(j.mass(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn joint_type_length_mismatch() {
        assert!(joint_type(&[0, 1], &[0], &bin(), &bin()).is_err());
    }

    #[test]
    fn marginals_of_type_are_types() {
        let j = joint_type(&[0, 1, 1, 0], &[1, 1, 0, 0], &bin(), &bin()).unwrap();
        let ms = marginals(&j);
        assert_eq!(ms[0].mass(), &[0.5, 0.5]);
        assert_eq!(ms[1].mass(), &[0.5, 0.5]);
    }

    #[test]
    fn extreal_absorbs_addition() {
        let inf = ExtReal::INF;
        let one = ExtReal::finite(1.0);
        assert!((inf + one).is_infinite());
        assert!((one + one).as_f64() == 2.0);
        assert!(one < inf);
    }

    fn arb_dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn entropy_bounds(mass in arb_dist(4)) {
            let a = Alphabet::new(4).unwrap();
            let p = ProbDist::new(a, mass).unwrap();
            let h = entropy(&p);
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (4f64).ln() + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn nonnegativity_and_chain_rule(mass in arb_dist(8)) {
            let j = JointDist::new(vec![bin(), bin(), bin()], mass).unwrap();
            // Nonnegativity.
            prop_assert!(multi_information(&j) >= -1e-12);
            prop_assert!(conditional_mi(&j, 1, 2, 0) >= -1e-12);
            let pair = j.pair_marginal(0, 1);
            prop_assert!(mutual_information(&pair) >= -1e-12);
            // Chain rule: I(X';Y|X) + I(X';X) = I(X'; X,Y).
            // I(X'; X,Y) = H(X') + H(X,Y) - H(X,X',Y).
            let lhs = conditional_mi(&j, 1, 2, 0) + mutual_information(&j.pair_marginal(0, 1));
            let rhs = entropy(&j.marginal(1)) + entropy_of_slice(j.pair_marginal(0, 2).mass())
                - entropy_of_slice(j.mass());
            prop_assert!((lhs - rhs).abs() < 1e-9);
            // Multi-information decomposition: I(X;X';X̃) = I(X;X') + I((X,X');X̃).
            let multi = multi_information(&j);
            let i_pair = mutual_information(&j.pair_marginal(0, 1));
            let i_rest = entropy_of_slice(j.pair_marginal(0, 1).mass())
                + entropy(&j.marginal(2))
                - entropy_of_slice(j.mass());
            prop_assert!((multi - (i_pair + i_rest)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn divergence_zero_iff_equal_on_support(mass in arb_dist(4), p in 0.05f64..0.45) {
            let w = Channel::bsc(p);
            let j = JointDist::new(vec![bin(), bin()], mass).unwrap();
            let qx = j.marginal(0);
            let d = weighted_divergence(&j, &w, &qx).unwrap().as_f64();
            prop_assert!(d >= -1e-12);
            // Zero iff the conditional equals W on the support of Q_X.
            let m = j.mass();
            let cond_dev = (0..2).flat_map(|x| (0..2).map(move |y| (x, y)))
                .map(|(x, y)| {
                    let px = m[x * 2] + m[x * 2 + 1];
                    if px > 0.0 { (m[x * 2 + y] / px - w.prob(x, y)).abs() } else { 0.0 }
                })
                .fold(0.0, f64::max);
            if d.abs() <= 1e-9 {
                prop_assert!(cond_dev < 1e-4);
            }
            if cond_dev < 1e-12 {
                prop_assert!(d.abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn marginal_of_marginal_consistent(mass in arb_dist(8)) {
            let j = JointDist::new(vec![bin(), bin(), bin()], mass).unwrap();
            for axis in 0..3 {
                let direct = j.marginal(axis);
                // Marginalize through a pair marginal containing this axis.
                let other = (0..3).find(|&o| o != axis).unwrap();
                let (lo, hi) = if axis < other { (axis, other) } else { (other, axis) };
                let pair = j.pair_marginal(lo, hi);
                let through = pair.marginal(if axis == lo { 0 } else { 1 });
                for (a, b) in direct.mass().iter().zip(through.mass()) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
