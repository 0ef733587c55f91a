//! Deterministic constrained optimization over probability simplices and
//! transportation polytopes (joint tables with pinned marginals).
//!
//! The variational problems this crate evaluates are infima/suprema over
//! continuous spaces of distributions. They are realized numerically as
//! exact rational grids: every probed table has entries `c/k` for integer
//! counts `c`, so pinned-marginal constraints hold exactly by construction
//! rather than by penalty. A run proceeds in three phases:
//!
//! 1. exhaustive enumeration of the feasible grid at resolution `k`;
//! 2. `refine_levels` rounds of nested re-gridding at doubled resolution in
//!    a shrinking box around the incumbent (small conditional domains are
//!    re-enumerated exhaustively instead, which can only improve the
//!    incumbent);
//! 3. up to `local_steps` of marginal-preserving local descent, moving one
//!    grid unit at a time between cells.
//!
//! Results are deterministic: probes are visited in ascending lexicographic
//! order and the first minimizer wins ties. Reported values are upper bounds
//! (for minimization) that converge as `k` grows; callers should report `k`
//! alongside values.

use crate::info::{JointDist, ProbDist};
use thiserror::Error;

/// Grid resolution and refinement policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    /// Denominator of the coarse grid; entries are multiples of `1/k`.
    pub k: u32,
    /// Number of nested refinement levels; each doubles the resolution.
    pub refine_levels: u32,
    /// Maximum number of local descent steps at the finest resolution.
    pub local_steps: u32,
    /// Witness-fidelity tolerance.
    pub tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            k: 20,
            refine_levels: 2,
            local_steps: 200,
            tolerance: 1e-9,
        }
    }
}

impl GridSpec {
    pub fn with_k(k: u32) -> Self {
        GridSpec {
            k,
            ..GridSpec::default()
        }
    }
}

/// A dense probability table on a rational grid. `mass[i]` is exactly
/// `counts[i] / denom`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub dims: Vec<usize>,
    pub mass: Vec<f64>,
    /// Integer numerators of the entries.
    pub counts: Vec<u32>,
    /// Grid denominator the table was probed at.
    pub denom: u32,
}

/// Shape of the feasible set.
#[derive(Clone, Debug)]
pub enum Domain {
    /// Tables with single-axis marginals pinned to the given targets
    /// (`None` leaves an axis free). Targets are rounded to the grid at each
    /// level, to the nearest rational vector with matching total.
    Margins {
        dims: Vec<usize>,
        targets: Vec<Option<Vec<f64>>>,
    },
    /// Tables over `base_dims × out` whose marginal over the base axes is
    /// pinned exactly to `base_counts / base_denom`; the conditional on the
    /// last axis is free. Level-0 resolution is the base's own denominator.
    Conditional {
        base_dims: Vec<usize>,
        base_counts: Vec<u32>,
        base_denom: u32,
        out: usize,
    },
}

impl Domain {
    /// 2-axis tables with both marginals pinned.
    pub fn pinned_pair(pa: &ProbDist, pb: &ProbDist) -> Domain {
        Domain::Margins {
            dims: vec![pa.len(), pb.len()],
            targets: vec![Some(pa.mass().to_vec()), Some(pb.mass().to_vec())],
        }
    }

    fn table_dims(&self) -> Vec<usize> {
        match self {
            Domain::Margins { dims, .. } => dims.clone(),
            Domain::Conditional {
                base_dims, out, ..
            } => {
                let mut d = base_dims.clone();
                d.push(*out);
                d
            }
        }
    }

    /// Dims used for enumeration and moves; conditional domains are
    /// flattened to `[base_cells, out]` with axis 0 pinned.
    fn cell_dims(&self) -> Vec<usize> {
        match self {
            Domain::Margins { dims, .. } => dims.clone(),
            Domain::Conditional {
                base_dims, out, ..
            } => vec![base_dims.iter().product(), *out],
        }
    }

    fn base_denom(&self, grid: &GridSpec) -> u32 {
        match self {
            Domain::Margins { .. } => grid.k,
            Domain::Conditional { base_denom, .. } => *base_denom,
        }
    }

    fn margins_at(&self, denom: u32) -> Vec<Option<Vec<u32>>> {
        match self {
            Domain::Margins { targets, .. } => targets
                .iter()
                .map(|t| t.as_ref().map(|p| round_counts(p, denom)))
                .collect(),
            Domain::Conditional {
                base_counts,
                base_denom,
                ..
            } => {
                let scale = denom / base_denom;
                vec![
                    Some(base_counts.iter().map(|&c| c * scale).collect()),
                    None,
                ]
            }
        }
    }
}

/// Outcome of a grid optimization.
#[derive(Clone, Debug)]
pub struct OptResult {
    /// For minimization: the best probed feasible value, `+∞` if the
    /// feasible set is empty or every feasible probe evaluated to `+∞`.
    /// For maximization the sign conventions mirror (`-∞` in the degenerate
    /// all-`-∞` case).
    pub value: f64,
    /// Best probed point when the value is finite.
    pub witness: Option<Table>,
    /// Number of objective evaluations.
    pub probes: u64,
    /// Whether any probe satisfied the feasibility predicate.
    pub feasible: bool,
}

#[derive(Debug, Error)]
pub enum OptError {
    #[error("rounded marginals inconsistent: row counts sum to {sum_a}, column counts to {sum_b}")]
    InconsistentRounding { sum_a: u32, sum_b: u32 },
    #[error("grid denominator must be at least 2, got {0}")]
    GridTooCoarse(u32),
}

/// Rounds a probability vector to integer counts at `denom`, choosing the
/// nearest vector with total exactly `denom` (largest-remainder method,
/// ties broken by index).
pub(crate) fn round_counts(target: &[f64], denom: u32) -> Vec<u32> {
    let scaled: Vec<f64> = target
        .iter()
        .map(|&p| (p * denom as f64).max(0.0))
        .collect();
    let mut counts: Vec<u32> = scaled.iter().map(|&s| s.floor() as u32).collect();
    let assigned: i64 = counts.iter().map(|&c| c as i64).sum();
    let mut rem = denom as i64 - assigned;
    let mut order: Vec<usize> = (0..target.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = scaled[a] - scaled[a].floor();
        let fb = scaled[b] - scaled[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut i = 0;
    while rem > 0 {
        counts[order[i % order.len()]] += 1;
        rem -= 1;
        i += 1;
    }
    counts
}

/// Enumerates, in ascending lexicographic order, every integer table over
/// `dims` with total `denom`, per-cell bounds `lo ≤ c ≤ hi`, and the given
/// pinned single-axis margins.
pub(crate) fn enumerate_tables(
    dims: &[usize],
    denom: u32,
    margins: &[Option<Vec<u32>>],
    lo: &[u32],
    hi: &[u32],
    visit: &mut dyn FnMut(&[u32]),
) {
    let cells: usize = dims.iter().product();
    debug_assert_eq!(lo.len(), cells);
    debug_assert_eq!(hi.len(), cells);
    // coords[cell][axis]
    let mut coords = vec![vec![0usize; dims.len()]; cells];
    for (idx, c) in coords.iter_mut().enumerate() {
        let mut rest = idx;
        for ax in (0..dims.len()).rev() {
            c[ax] = rest % dims[ax];
            rest /= dims[ax];
        }
    }
    // Suffix capacities for pruning.
    let mut cap_total = vec![0i64; cells + 1];
    let mut lo_total = vec![0i64; cells + 1];
    for i in (0..cells).rev() {
        cap_total[i] = cap_total[i + 1] + hi[i] as i64;
        lo_total[i] = lo_total[i + 1] + lo[i] as i64;
    }
    let mut cap_ax: Vec<Vec<Vec<i64>>> = Vec::new();
    let mut lo_ax: Vec<Vec<Vec<i64>>> = Vec::new();
    for ax in 0..dims.len() {
        let mut cap = vec![vec![0i64; cells + 1]; dims[ax]];
        let mut lov = vec![vec![0i64; cells + 1]; dims[ax]];
        for i in (0..cells).rev() {
            for v in 0..dims[ax] {
                cap[v][i] = cap[v][i + 1];
                lov[v][i] = lov[v][i + 1];
            }
            let v = coords[i][ax];
            cap[v][i] += hi[i] as i64;
            lov[v][i] += lo[i] as i64;
        }
        cap_ax.push(cap);
        lo_ax.push(lov);
    }
    let mut rem: Vec<Option<Vec<i64>>> = margins
        .iter()
        .map(|m| m.as_ref().map(|v| v.iter().map(|&c| c as i64).collect()))
        .collect();
    let mut current = vec![0u32; cells];

    fn recurse(
        i: usize,
        cells: usize,
        rem_total: i64,
        dims_len: usize,
        coords: &[Vec<usize>],
        lo: &[u32],
        hi: &[u32],
        cap_total: &[i64],
        lo_total: &[i64],
        cap_ax: &[Vec<Vec<i64>>],
        lo_ax: &[Vec<Vec<i64>>],
        rem: &mut [Option<Vec<i64>>],
        current: &mut [u32],
        visit: &mut dyn FnMut(&[u32]),
    ) {
        if i == cells {
            if rem_total == 0 {
                visit(current);
            }
            return;
        }
        let c = &coords[i];
        let mut ub = (hi[i] as i64)
            .min(rem_total - lo_total[i + 1]);
        let mut lb = (lo[i] as i64).max(rem_total - cap_total[i + 1]);
        for ax in 0..dims_len {
            if let Some(r) = &rem[ax] {
                let v = c[ax];
                ub = ub.min(r[v] - lo_ax[ax][v][i + 1]);
                lb = lb.max(r[v] - cap_ax[ax][v][i + 1]);
            }
        }
        if lb < 0 {
            lb = 0;
        }
        if lb > ub {
            return;
        }
        for val in lb..=ub {
            current[i] = val as u32;
            for ax in 0..dims_len {
                if let Some(r) = rem[ax].as_mut() {
                    r[c[ax]] -= val;
                }
            }
            recurse(
                i + 1,
                cells,
                rem_total - val,
                dims_len,
                coords,
                lo,
                hi,
                cap_total,
                lo_total,
                cap_ax,
                lo_ax,
                rem,
                current,
                visit,
            );
            for ax in 0..dims_len {
                if let Some(r) = rem[ax].as_mut() {
                    r[c[ax]] += val;
                }
            }
        }
        current[i] = 0;
    }

    recurse(
        0,
        cells,
        denom as i64,
        dims.len(),
        &coords,
        lo,
        hi,
        &cap_total,
        &lo_total,
        &cap_ax,
        &lo_ax,
        &mut rem,
        &mut current,
        visit,
    );
}

/// Number of grid conditionals for a pinned base: `Π C(c_i + out - 1, out - 1)`.
fn conditional_count(base_counts: &[u32], scale: u32, out: usize) -> f64 {
    let mut total = 1.0f64;
    for &c in base_counts {
        let c = (c * scale) as f64;
        let mut ways = 1.0;
        for j in 1..out {
            ways *= (c + j as f64) / j as f64;
        }
        total *= ways;
        if total > 1e12 {
            return total;
        }
    }
    total
}

const BOX_HALF_WIDTH: u32 = 3;
const BOX_HALF_WIDTH_WIDE: u32 = 8;
const FULL_ENUM_BUDGET: f64 = 300_000.0;

struct Incumbent {
    value: f64,
    counts: Vec<u32>,
    denom: u32,
}

fn run<F, P>(mut objective: F, mut feasible: P, domain: &Domain, grid: &GridSpec) -> OptResult
where
    F: FnMut(&Table) -> f64,
    P: FnMut(&Table) -> bool,
{
    let cell_dims = domain.cell_dims();
    let table_dims = domain.table_dims();
    let cells: usize = cell_dims.iter().product();
    let denom0 = domain.base_denom(grid);

    let mut scratch = Table {
        dims: table_dims.clone(),
        mass: vec![0.0; cells],
        counts: vec![0; cells],
        denom: denom0,
    };
    let mut probes: u64 = 0;
    let mut any_feasible = false;
    let mut best: Option<Incumbent> = None;

    for level in 0..=grid.refine_levels {
        let denom = denom0 << level;
        let margins = domain.margins_at(denom);
        // Choose bounds: full enumeration, or a box around the incumbent.
        let full = level == 0
            || best.is_none()
            || matches!(domain, Domain::Conditional { base_counts, base_denom, out, .. }
                if conditional_count(base_counts, denom / base_denom, *out) <= FULL_ENUM_BUDGET);
        let widths: &[Option<u32>] = if full { &[None] } else { &[Some(BOX_HALF_WIDTH), Some(BOX_HALF_WIDTH_WIDE)] };
        for &width in widths {
            let (lo, hi) = match width {
                None => (vec![0u32; cells], vec![denom; cells]),
                Some(w) => {
                    let inc = best.as_ref().unwrap();
                    let scale = denom / inc.denom;
                    let lo = inc
                        .counts
                        .iter()
                        .map(|&c| (c * scale).saturating_sub(w))
                        .collect();
                    let hi = inc
                        .counts
                        .iter()
                        .map(|&c| (c * scale + w).min(denom))
                        .collect();
                    (lo, hi)
                }
            };
            let mut visited = false;
            enumerate_tables(&cell_dims, denom, &margins, &lo, &hi, &mut |counts| {
                visited = true;
                scratch.denom = denom;
                scratch.counts.copy_from_slice(counts);
                let inv = 1.0 / denom as f64;
                for (m, &c) in scratch.mass.iter_mut().zip(counts) {
                    *m = c as f64 * inv;
                }
                if !feasible(&scratch) {
                    return;
                }
                any_feasible = true;
                probes += 1;
                let v = objective(&scratch);
                let better = match &best {
                    None => true,
                    Some(b) => v < b.value,
                };
                if better {
                    best = Some(Incumbent {
                        value: v,
                        counts: counts.to_vec(),
                        denom,
                    });
                }
            });
            if visited {
                break; // no need to widen the box
            }
        }
    }

    // Local descent: marginal-preserving unit moves at the incumbent's
    // resolution, first improving move wins, stop when none improves.
    if let Some(inc) = &best {
        if grid.local_steps > 0 && inc.value.is_finite() {
            let denom = inc.denom;
            let margins = domain.margins_at(denom);
            let moves = build_moves(&cell_dims, &margins);
            let mut cur = inc.counts.clone();
            let mut cur_val = inc.value;
            let mut cand = cur.clone();
            'outer: for _ in 0..grid.local_steps {
                for mv in &moves {
                    cand.copy_from_slice(&cur);
                    if !apply_move(&mut cand, mv, denom) {
                        continue;
                    }
                    scratch.denom = denom;
                    scratch.counts.copy_from_slice(&cand);
                    let inv = 1.0 / denom as f64;
                    for (m, &c) in scratch.mass.iter_mut().zip(cand.iter()) {
                        *m = c as f64 * inv;
                    }
                    if !feasible(&scratch) {
                        continue;
                    }
                    probes += 1;
                    let v = objective(&scratch);
                    if v < cur_val {
                        cur.copy_from_slice(&cand);
                        cur_val = v;
                        continue 'outer;
                    }
                }
                break;
            }
            if cur_val < inc.value {
                best = Some(Incumbent {
                    value: cur_val,
                    counts: cur,
                    denom,
                });
            }
        }
    }

    match best {
        Some(inc) if inc.value.is_finite() => {
            let inv = 1.0 / inc.denom as f64;
            let mass = inc.counts.iter().map(|&c| c as f64 * inv).collect();
            OptResult {
                value: inc.value,
                witness: Some(Table {
                    dims: table_dims,
                    mass,
                    counts: inc.counts,
                    denom: inc.denom,
                }),
                probes,
                feasible: true,
            }
        }
        Some(inc) => OptResult {
            value: inc.value,
            witness: None,
            probes,
            feasible: any_feasible,
        },
        None => OptResult {
            value: f64::INFINITY,
            witness: None,
            probes,
            feasible: false,
        },
    }
}

/// An elementary marginal-preserving move: add one grid unit to `plus`
/// cells and remove one from `minus` cells.
struct Move {
    plus: Vec<usize>,
    minus: Vec<usize>,
}

fn apply_move(counts: &mut [u32], mv: &Move, denom: u32) -> bool {
    for &i in &mv.minus {
        if counts[i] == 0 {
            return false;
        }
    }
    for &i in &mv.plus {
        if counts[i] >= denom {
            return false;
        }
    }
    for &i in &mv.minus {
        counts[i] -= 1;
    }
    for &i in &mv.plus {
        counts[i] += 1;
    }
    true
}

/// Deterministic move list: single-unit transfers along free axes, and 2x2
/// swaps across every pair of axes (both preserve all pinned margins).
fn build_moves(dims: &[usize], margins: &[Option<Vec<u32>>]) -> Vec<Move> {
    let cells: usize = dims.iter().product();
    let coords = |idx: usize| -> Vec<usize> {
        let mut c = vec![0usize; dims.len()];
        let mut rest = idx;
        for ax in (0..dims.len()).rev() {
            c[ax] = rest % dims[ax];
            rest /= dims[ax];
        }
        c
    };
    let index = |c: &[usize]| -> usize {
        let mut idx = 0;
        for (ax, &v) in c.iter().enumerate() {
            idx = idx * dims[ax] + v;
        }
        idx
    };
    let mut moves = Vec::new();
    // Transfers between cells that agree on all pinned axes.
    for u in 0..cells {
        for v in 0..cells {
            if u == v {
                continue;
            }
            let cu = coords(u);
            let cv = coords(v);
            let ok = (0..dims.len()).all(|ax| margins[ax].is_none() || cu[ax] == cv[ax]);
            if ok {
                moves.push(Move {
                    plus: vec![u],
                    minus: vec![v],
                });
            }
        }
    }
    // 2x2 swaps on each axis pair, at every assignment of the other axes.
    for ai in 0..dims.len() {
        for aj in ai + 1..dims.len() {
            let mut others: Vec<usize> = (0..dims.len()).filter(|&a| a != ai && a != aj).collect();
            others.sort_unstable();
            let other_dims: Vec<usize> = others.iter().map(|&a| dims[a]).collect();
            let other_count: usize = other_dims.iter().product::<usize>().max(1);
            for vi in 0..dims[ai] {
                for vi2 in vi + 1..dims[ai] {
                    for vj in 0..dims[aj] {
                        for vj2 in vj + 1..dims[aj] {
                            for o in 0..other_count {
                                let mut base = vec![0usize; dims.len()];
                                let mut rest = o;
                                for (pos, &ax) in others.iter().enumerate().rev() {
                                    base[ax] = rest % other_dims[pos];
                                    rest /= other_dims[pos];
                                }
                                let mut a = base.clone();
                                a[ai] = vi;
                                a[aj] = vj;
                                let mut b = base.clone();
                                b[ai] = vi;
                                b[aj] = vj2;
                                let mut c = base.clone();
                                c[ai] = vi2;
                                c[aj] = vj;
                                let mut d = base;
                                d[ai] = vi2;
                                d[aj] = vj2;
                                let (ia, ib, ic, id) = (index(&a), index(&b), index(&c), index(&d));
                                moves.push(Move {
                                    plus: vec![ia, id],
                                    minus: vec![ib, ic],
                                });
                                moves.push(Move {
                                    plus: vec![ib, ic],
                                    minus: vec![ia, id],
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    moves
}

/// Minimizes `objective` over the feasible grid points of `domain`.
///
/// The objective must be total on feasible points (`+∞` allowed). If no
/// probe satisfies `feasible`, the result reports `feasible = false` and
/// value `+∞`.
pub fn minimize<F, P>(objective: F, feasible: P, domain: &Domain, grid: &GridSpec) -> OptResult
where
    F: FnMut(&Table) -> f64,
    P: FnMut(&Table) -> bool,
{
    run(objective, feasible, domain, grid)
}

/// Mirror of [`minimize`]. An infeasible maximization reports
/// `feasible = false`; the caller maps that per-formula.
pub fn maximize<F, P>(mut objective: F, feasible: P, domain: &Domain, grid: &GridSpec) -> OptResult
where
    F: FnMut(&Table) -> f64,
    P: FnMut(&Table) -> bool,
{
    let mut res = run(|t| -objective(t), feasible, domain, grid);
    res.value = -res.value;
    res
}

/// Golden-section minimization of a continuous objective on `[0, 1]`.
///
/// Used by the verification suites as an independent oracle for
/// binary-alphabet problems whose transportation polytope is
/// one-dimensional.
pub fn golden_section_1d(mut f: impl FnMut(f64) -> f64, tol: f64) -> (f64, f64) {
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Enumerates every joint on the `1/k` grid whose marginals match the
/// per-entry roundings `round(k·pA)`, `round(k·pB)` exactly, in ascending
/// lexicographic order.
///
/// Errors when the per-entry roundings are inconsistent (their sums
/// differ) — distinct from an empty enumeration, which cannot happen for
/// consistent single-axis margins.
pub fn enumerate_pinned_joints(
    pa: &ProbDist,
    pb: &ProbDist,
    k: u32,
) -> Result<Vec<JointDist>, OptError> {
    if k < 2 {
        return Err(OptError::GridTooCoarse(k));
    }
    let ra: Vec<u32> = pa.mass().iter().map(|&p| (p * k as f64).round() as u32).collect();
    let rb: Vec<u32> = pb.mass().iter().map(|&p| (p * k as f64).round() as u32).collect();
    let (sa, sb): (u32, u32) = (ra.iter().sum(), rb.iter().sum());
    if sa != sb {
        return Err(OptError::InconsistentRounding { sum_a: sa, sum_b: sb });
    }
    let dims = [pa.len(), pb.len()];
    let cells = dims[0] * dims[1];
    let margins = [Some(ra), Some(rb)];
    let mut out = Vec::new();
    let denom = sa;
    enumerate_tables(
        &dims,
        denom,
        &margins,
        &vec![0; cells],
        &vec![denom; cells],
        &mut |counts| {
            let mass: Vec<f64> = counts.iter().map(|&c| c as f64 / denom as f64).collect();
            out.push(
                JointDist::new(vec![pa.alphabet().clone(), pb.alphabet().clone()], mass)
                    .expect("grid table is a valid joint"),
            );
        },
    );
    Ok(out)
}
