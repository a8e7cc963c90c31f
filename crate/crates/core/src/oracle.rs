//! Brute-force ground truth for the explicit formulas: direct minimization of
//! the implicit exponent expressions over joint distributions, the
//! constant-composition counterparts, exact finite-blocklength event
//! probabilities by type enumeration, and the minimum over low-capacity
//! supports that appears in the convergence-to-zero condition.
//!
//! Nothing here calls into `exponents` except `capacity` and, in
//! `min_over_small_supports`, the explicit `E_c^ML` it is defined through.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::error::{arg, Error, Result};
use crate::exponents::{capacity, correct_exponent_ml};
use crate::itcore::{
    codebook_size, composition_count, metric_from_counts, Channel, Compositions, Distribution,
    TypeWithDenominator, DEFAULT_TYPE_CAP,
};

/// Two metrics closer than this are treated as equal by every decision rule.
pub const TIE_EPS: f64 = 1e-9;
/// Largest number of grid points evaluated before local refinement.
pub const GRID_BUDGET: u64 = 250_000;
/// Refinement stops once the pattern step falls below this.
pub const REFINE_STEP: f64 = 1e-8;
pub const MAX_CELLS: usize = 9;
pub const MIN_RESOLUTION: u32 = 20;
/// Largest codebook `exact_finite_n` accepts.
pub const EXACT_MAX_CODEWORDS: f64 = (1u64 << 30) as f64;

const SURFACE_STARTS: usize = 4;
const REGION_STARTS: usize = 3;
const SEARCH_EVAL_CAP: usize = 400_000;

/// `a` beats `b` when it exceeds it by more than `delta` (ties never beat).
#[inline]
pub fn beats(a: f64, b: f64, delta: f64) -> bool {
    a - b > delta + TIE_EPS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImplicitKind {
    /// `min D(T∘V∥Q∘P) + |D(T∘V∥T×Q) − R|⁺`
    ErrorIid,
    /// `min D(T∘V∥Q∘P) + |R − D(T∘V∥T×Q)|⁺`
    CorrectMl,
    /// `min D(T∘V∥Q∘P)` subject to `D(T∘V∥T×Q) ≥ R`
    CorrectStrict,
}

impl ImplicitKind {
    pub const ALL: [ImplicitKind; 3] = [
        ImplicitKind::ErrorIid,
        ImplicitKind::CorrectMl,
        ImplicitKind::CorrectStrict,
    ];

    fn objective(self, d1: f64, d2: f64, rate: f64) -> f64 {
        match self {
            ImplicitKind::ErrorIid => d1 + (d2 - rate).max(0.0),
            ImplicitKind::CorrectMl => d1 + (rate - d2).max(0.0),
            ImplicitKind::CorrectStrict => {
                if d2 >= rate {
                    d1
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Search space: cells with positive reference mass, grouped in blocks whose
/// totals are held fixed (one block for joints, one per input letter for
/// constant-composition conditionals).
struct Space {
    ny: usize,
    cell_y: Vec<usize>,
    ln_a: Vec<f64>,
    ln_q: Vec<f64>,
    a: Vec<f64>,
    blocks: Vec<std::ops::Range<usize>>,
    totals: Vec<f64>,
    pairs: Vec<(usize, usize, usize)>,
}

impl Space {
    fn new(q: &Distribution, p: &Channel, per_letter: bool) -> Self {
        let (nx, ny) = (p.nx(), p.ny());
        let mut cells = Vec::new();
        let mut blocks = Vec::new();
        let mut totals = Vec::new();
        let qp = q.probs();
        if per_letter {
            for x in q.support() {
                let start = cells.len();
                cells.extend((0..ny).filter(|&y| p.p(x, y) > 0.0).map(|y| (y, x)));
                blocks.push(start..cells.len());
                totals.push(qp[x]);
            }
        } else {
            for y in 0..ny {
                for x in 0..nx {
                    if qp[x] * p.p(x, y) > 0.0 {
                        cells.push((y, x));
                    }
                }
            }
            blocks.push(0..cells.len());
            totals.push(1.0);
        }
        let a: Vec<f64> = cells.iter().map(|&(y, x)| qp[x] * p.p(x, y)).collect();
        let mut pairs = Vec::new();
        for (b, r) in blocks.iter().enumerate() {
            for i in r.clone() {
                for j in r.clone() {
                    if i != j {
                        pairs.push((b, i, j));
                    }
                }
            }
        }
        Space {
            ny,
            cell_y: cells.iter().map(|c| c.0).collect(),
            ln_a: a.iter().map(|v| v.ln()).collect(),
            ln_q: cells.iter().map(|&(_, x)| qp[x].ln()).collect(),
            a,
            blocks,
            totals,
            pairs,
        }
    }

    /// `(D(m∥Q∘P), D(m∥T_m×Q))`.
    fn eval(&self, m: &[f64]) -> (f64, f64) {
        let mut t = [0.0f64; MAX_CELLS];
        let mut ent = 0.0;
        let mut cross_a = 0.0;
        let mut cross_q = 0.0;
        for (i, &v) in m.iter().enumerate() {
            if v > 0.0 {
                ent += v * v.ln();
                cross_a += v * self.ln_a[i];
                cross_q += v * self.ln_q[i];
                t[self.cell_y[i]] += v;
            }
        }
        let ent_t: f64 = t[..self.ny]
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * v.ln())
            .sum();
        let d1 = (ent - cross_a).max(0.0);
        let d2 = (ent - ent_t - cross_q).max(0.0);
        (d1, d2)
    }

    fn d2(&self, m: &[f64]) -> f64 {
        self.eval(m).1
    }

    /// Largest denominator `<= resolution` whose grid fits the budget.
    fn grid_denominator(&self, resolution: u32) -> u32 {
        let count = |n: u32| {
            self.blocks
                .iter()
                .map(|r| composition_count(n as u64, r.len()))
                .fold(1u64, |acc, c| acc.saturating_mul(c))
        };
        let mut n = resolution;
        while n > 1 && count(n) > GRID_BUDGET {
            n -= 1;
        }
        n
    }

    /// Radial projection onto `{D2 = rate}` along the ray from `anchor`
    /// (which must satisfy `D2(anchor) < rate`) through `w`.
    fn project(&self, anchor: &[f64], w: &[f64], rate: f64) -> Option<Vec<f64>> {
        let mut t_max = f64::INFINITY;
        for (&a, &b) in anchor.iter().zip(w) {
            if b < a {
                t_max = t_max.min(a / (a - b));
            }
        }
        if !t_max.is_finite() {
            return None;
        }
        let mut buf = vec![0.0; w.len()];
        let g = |t: f64, buf: &mut Vec<f64>| -> f64 {
            for ((o, &a), &b) in buf.iter_mut().zip(anchor).zip(w) {
                *o = (a + t * (b - a)).max(0.0);
            }
            self.d2(buf) - rate
        };
        let (mut lo, mut hi) = (0.0, t_max);
        let (mut g_lo, mut g_hi) = (g(lo, &mut buf), g(hi, &mut buf));
        if g_hi < 0.0 || g_lo >= 0.0 {
            return None;
        }
        if g_hi == 0.0 {
            g(hi, &mut buf);
            return Some(buf);
        }
        // Illinois variant of regula falsi; the root is simple because D2 is
        // convex along the ray and negative at the anchor.
        let mut side = 0i8;
        for _ in 0..200 {
            if hi - lo <= 1e-15 * hi {
                break;
            }
            let mut t = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
            if !(t > lo && t < hi) {
                t = 0.5 * (lo + hi);
            }
            let gt = g(t, &mut buf);
            if gt == 0.0 {
                hi = t;
                break;
            }
            if gt < 0.0 {
                lo = t;
                g_lo = gt;
                if side == -1 {
                    g_hi *= 0.5;
                }
                side = -1;
            } else {
                hi = t;
                g_hi = gt;
                if side == 1 {
                    g_lo *= 0.5;
                }
                side = 1;
            }
        }
        g(hi, &mut buf);
        Some(buf)
    }

    /// Compass search over mass transfers inside blocks. `propose` maps a
    /// moved point to the accepted point and its value, or rejects it.
    fn compass(
        &self,
        start: Vec<f64>,
        value: f64,
        step0: f64,
        mut propose: impl FnMut(&[f64]) -> Option<(Vec<f64>, f64)>,
    ) -> (Vec<f64>, f64) {
        let (mut m, mut f) = (start, value);
        let mut h = step0;
        let mut evals = 0;
        let mut w = m.clone();
        while h >= REFINE_STEP && evals < SEARCH_EVAL_CAP {
            let mut improved = false;
            for &(b, i, j) in &self.pairs {
                // Keep doubling the transfer along a direction while it pays off.
                let mut scale = 1.0;
                loop {
                    let amount = (scale * h * self.totals[b]).min(m[j]);
                    if amount <= 0.0 {
                        break;
                    }
                    w.copy_from_slice(&m);
                    w[i] += amount;
                    w[j] -= amount;
                    if w[j] < 1e-300 {
                        w[j] = 0.0;
                    }
                    evals += 1;
                    match propose(&w) {
                        Some((m2, f2)) if f2 < f => {
                            m = m2;
                            f = f2;
                            improved = true;
                            scale *= 2.0;
                        }
                        _ => break,
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        (m, f)
    }
}

struct Grid {
    denominator: u32,
    d1: Vec<f64>,
    d2: Vec<f64>,
    points: Vec<f64>,
    dim: usize,
}

impl Grid {
    fn build(space: &Space, denominator: u32) -> Grid {
        let dim = space.a.len();
        let per_block: Vec<Vec<Vec<u32>>> = space
            .blocks
            .iter()
            .map(|r| Compositions::new(denominator, r.len()).collect())
            .collect();
        let mut grid = Grid {
            denominator,
            d1: Vec::new(),
            d2: Vec::new(),
            points: Vec::new(),
            dim,
        };
        if dim == 0 {
            return grid;
        }
        let mut idx = vec![0usize; per_block.len()];
        let mut m = vec![0.0; dim];
        let n = denominator as f64;
        'outer: loop {
            for (b, r) in space.blocks.iter().enumerate() {
                let comp = &per_block[b][idx[b]];
                for (k, i) in r.clone().enumerate() {
                    m[i] = space.totals[b] * comp[k] as f64 / n;
                }
            }
            let (d1, d2) = space.eval(&m);
            grid.d1.push(d1);
            grid.d2.push(d2);
            grid.points.extend_from_slice(&m);
            for b in (0..idx.len()).rev() {
                idx[b] += 1;
                if idx[b] < per_block[b].len() {
                    continue 'outer;
                }
                idx[b] = 0;
            }
            break;
        }
        grid
    }

    fn len(&self) -> usize {
        self.d1.len()
    }

    fn point(&self, i: usize) -> Vec<f64> {
        self.points[i * self.dim..(i + 1) * self.dim].to_vec()
    }

    /// Indices of the `k` smallest scores (ties by index).
    fn best_by(&self, k: usize, score: impl Fn(f64, f64) -> f64) -> Vec<usize> {
        let mut order: Vec<(f64, usize)> = (0..self.len())
            .map(|i| (score(self.d1[i], self.d2[i]), i))
            .filter(|(s, _)| s.is_finite())
            .collect();
        let k = k.min(order.len());
        if k == 0 {
            return Vec::new();
        }
        order.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
        order.truncate(k);
        order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        order.into_iter().map(|(_, i)| i).collect()
    }
}

/// Cached grid of `(D1, D2)` values for one `(Q, P)` pair, reusable across
/// kinds and rates.
pub struct ImplicitOracle {
    space: Space,
    grid: Grid,
    max_d2: f64,
    d2_ref: f64,
}

impl ImplicitOracle {
    /// Minimization over joint distributions `T∘V` on `Y×X`.
    pub fn new(q: &Distribution, p: &Channel, resolution: u32) -> Result<Self> {
        Self::build(q, p, resolution, false)
    }

    /// Minimization over conditionals `W(y|x)` with the input marginal fixed to `Q`.
    pub fn constant_composition(q: &Distribution, p: &Channel, resolution: u32) -> Result<Self> {
        Self::build(q, p, resolution, true)
    }

    fn build(q: &Distribution, p: &Channel, resolution: u32, per_letter: bool) -> Result<Self> {
        p.check_input(q)?;
        if p.nx() * p.ny() > MAX_CELLS {
            return Err(Error::Resource(format!(
                "{}x{} alphabets exceed the {MAX_CELLS}-cell limit of the brute-force oracle",
                p.nx(),
                p.ny()
            )));
        }
        if resolution < MIN_RESOLUTION {
            return arg(format!("resolution {resolution} is below {MIN_RESOLUTION}"));
        }
        let space = Space::new(q, p, per_letter);
        let n = space.grid_denominator(resolution);
        let grid = Grid::build(&space, n);
        let max_d2 = grid.d2.iter().cloned().fold(0.0, f64::max);
        let d2_ref = space.d2(&space.a);
        Ok(ImplicitOracle {
            space,
            grid,
            max_d2,
            d2_ref,
        })
    }

    /// Denominator of the grid actually evaluated.
    pub fn grid_denominator(&self) -> u32 {
        self.grid.denominator
    }

    /// Largest `D(T∘V∥T×Q)` over the feasible set (attained at a grid vertex).
    pub fn max_metric(&self) -> f64 {
        self.max_d2
    }

    /// `D(Q∘P ∥ T×Q)`, the mutual information at the reference joint.
    pub fn reference_metric(&self) -> f64 {
        self.d2_ref
    }

    pub fn value(&self, kind: ImplicitKind, rate: f64) -> f64 {
        let sp = &self.space;
        if sp.a.is_empty() {
            return f64::INFINITY;
        }
        let f = |m: &[f64]| {
            let (d1, d2) = sp.eval(m);
            kind.objective(d1, d2, rate)
        };
        match kind {
            ImplicitKind::ErrorIid if self.d2_ref <= rate => return 0.0,
            ImplicitKind::CorrectMl | ImplicitKind::CorrectStrict if self.d2_ref >= rate => {
                return 0.0
            }
            ImplicitKind::CorrectStrict if rate > self.max_d2 => return f64::INFINITY,
            _ => {}
        }
        let step0 = 1.0 / self.grid.denominator.max(2) as f64;
        let mut best = self
            .grid
            .best_by(1, |d1, d2| kind.objective(d1, d2, rate))
            .first()
            .map(|&i| f(&self.grid.point(i)))
            .unwrap_or(f64::INFINITY);

        // Smooth piece away from the kink, searched inside its own region.
        let (piece, inside): (fn(f64, f64, f64) -> f64, fn(f64, f64) -> bool) = match kind {
            ImplicitKind::ErrorIid => (|d1, d2, r| d1 + d2 - r, |d2, r| d2 >= r),
            ImplicitKind::CorrectMl => (|d1, d2, r| d1 - d2 + r, |d2, r| d2 <= r),
            ImplicitKind::CorrectStrict => (|d1, _, _| d1, |d2, r| d2 >= r),
        };
        let region_value = |m: &[f64]| {
            let (d1, d2) = sp.eval(m);
            inside(d2, rate).then(|| piece(d1, d2, rate))
        };
        let mut starts = vec![sp.a.clone()];
        starts.extend(
            self.grid
                .best_by(REGION_STARTS, |d1, d2| {
                    if inside(d2, rate) {
                        piece(d1, d2, rate)
                    } else {
                        f64::INFINITY
                    }
                })
                .into_iter()
                .map(|i| self.grid.point(i)),
        );
        let mut low_anchor: Option<Vec<f64>> = None;
        for s in starts {
            let (d1, d2) = sp.eval(&s);
            let free = kind == ImplicitKind::ErrorIid;
            if !free && !inside(d2, rate) {
                continue;
            }
            let v0 = piece(d1, d2, rate);
            let (m, _) = sp.compass(s, v0, step0, |w| {
                if free {
                    let (d1, d2) = sp.eval(w);
                    Some((w.to_vec(), piece(d1, d2, rate)))
                } else {
                    region_value(w).map(|v| (w.to_vec(), v))
                }
            });
            best = best.min(f(&m));
            if kind == ImplicitKind::ErrorIid {
                let d2m = sp.d2(&m);
                if d2m < rate && low_anchor.as_ref().map_or(true, |a| sp.d2(a) > d2m) {
                    low_anchor = Some(m);
                }
            }
        }

        // The kink surface D2 = R, searched by radial projection from a point
        // strictly below it.
        let anchor = match kind {
            ImplicitKind::ErrorIid => match low_anchor {
                Some(a) => a,
                None => return best,
            },
            _ => sp.a.clone(),
        };
        if sp.d2(&anchor) >= rate {
            return best;
        }
        let candidates = self.grid.best_by(64, |d1, d2| d1 + 10.0 * (d2 - rate).abs());
        let mut projected: Vec<(f64, Vec<f64>)> = candidates
            .into_iter()
            .filter_map(|i| sp.project(&anchor, &self.grid.point(i), rate))
            .map(|m| (sp.eval(&m).0, m))
            .collect();
        projected.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (v0, s) in projected.into_iter().take(SURFACE_STARTS) {
            let (m, _) = sp.compass(s, v0, step0, |w| {
                let m = sp.project(&anchor, w, rate)?;
                let d1 = sp.eval(&m).0;
                Some((m, d1))
            });
            best = best.min(f(&m));
        }
        best
    }
}

/// Brute-force minimum of the selected implicit expression over joint
/// distributions, refined from the best grid point.
pub fn implicit_exponent(
    kind: ImplicitKind,
    rate: f64,
    q: &Distribution,
    p: &Channel,
    resolution: u32,
) -> Result<f64> {
    Ok(ImplicitOracle::new(q, p, resolution)?.value(kind, rate))
}

/// Constant-composition counterpart: the same objectives over `Q∘W` with the
/// input marginal pinned to `Q`, so the metric term becomes `I(Q∘W)`.
pub fn cc_bound(
    kind: ImplicitKind,
    rate: f64,
    q: &Distribution,
    p: &Channel,
    resolution: u32,
) -> Result<f64> {
    Ok(ImplicitOracle::constant_composition(q, p, resolution)?.value(kind, rate))
}

/// Event probabilities of one transmitted joint type.
#[derive(Debug, Clone, Serialize)]
pub struct TypeBreakdown {
    pub joint_type: TypeWithDenominator,
    pub probability: f64,
    pub metric: f64,
    /// Probabilities conditioned on this joint type.
    pub p_correct_strict: f64,
    pub p_feedback1: f64,
    pub p_feedback1_total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactFiniteNReport {
    pub n: u32,
    pub m: u64,
    pub rate: f64,
    pub delta: f64,
    /// The sent message is not the strict unique winner (ties count as errors).
    pub p_error: f64,
    pub p_correct_strict: f64,
    /// The sent message wins by a margin larger than `delta`.
    pub p_feedback1: f64,
    /// Some message, sent or not, wins by a margin larger than `delta`.
    pub p_feedback1_total: f64,
    pub per_type_breakdown: Vec<TypeBreakdown>,
}

/// Metric distribution of a codeword drawn independently of a received word
/// with the given output composition.
struct CompetitorTable {
    metric: Vec<f64>,
    /// `tail[i] = P(metric >= metric[i])`, `tail[len] = 0`.
    tail: Vec<f64>,
    prob: Vec<f64>,
}

impl CompetitorTable {
    fn build(y_counts: &[u32], q: &Distribution, nx: usize) -> CompetitorTable {
        let supp = q.support();
        let ln_q: Vec<f64> = q.probs().iter().map(|v| v.ln()).collect();
        let ny = y_counts.len();
        let rows: Vec<Vec<(Vec<u32>, f64)>> = y_counts
            .iter()
            .map(|&t| {
                Compositions::new(t, supp.len())
                    .map(|c| {
                        let mut row = vec![0u32; nx];
                        let mut lp = ln_factorial(t as u64);
                        for (k, &x) in c.iter().zip(&supp) {
                            row[x] = *k;
                            lp += *k as f64 * ln_q[x] - ln_factorial(*k as u64);
                        }
                        (row, lp)
                    })
                    .collect()
            })
            .collect();
        let mut entries: Vec<(f64, f64)> = Vec::new();
        let mut idx = vec![0usize; ny];
        let mut counts = vec![0u32; ny * nx];
        'outer: loop {
            let mut lp = 0.0;
            for y in 0..ny {
                let (row, l) = &rows[y][idx[y]];
                counts[y * nx..(y + 1) * nx].copy_from_slice(row);
                lp += l;
            }
            entries.push((metric_from_counts(&counts, ny, nx, &ln_q), lp.exp()));
            for y in (0..ny).rev() {
                idx[y] += 1;
                if idx[y] < rows[y].len() {
                    continue 'outer;
                }
                idx[y] = 0;
            }
            break;
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let metric: Vec<f64> = entries.iter().map(|e| e.0).collect();
        let prob: Vec<f64> = entries.iter().map(|e| e.1).collect();
        let mut tail = vec![0.0; prob.len() + 1];
        for i in (0..prob.len()).rev() {
            tail[i] = tail[i + 1] + prob[i];
        }
        CompetitorTable { metric, tail, prob }
    }

    /// `P(a competitor is not beaten by a codeword with metric `v`)`.
    fn not_beaten_by(&self, v: f64, delta: f64) -> f64 {
        let k = self.metric.partition_point(|&b| beats(v, b, delta));
        self.tail[k].min(1.0)
    }
}

/// `(1 − tail)^k` for a real exponent `k`, stable for tiny tails and huge `k`.
fn survive(tail: f64, k: f64) -> f64 {
    if k == 0.0 {
        1.0
    } else if tail >= 1.0 {
        0.0
    } else {
        (k * (-tail).ln_1p()).exp()
    }
}

/// Exact probabilities of the decoding and feedback events at blocklength `n`
/// for the i.i.d. ensemble with `⌈e^{nR}⌉` codewords, by enumerating the joint
/// type of the transmitted pair and the metric law of each competitor.
pub fn exact_finite_n(
    n: u32,
    rate: f64,
    delta: f64,
    q: &Distribution,
    p: &Channel,
) -> Result<ExactFiniteNReport> {
    p.check_input(q)?;
    if n == 0 {
        return arg("blocklength must be positive");
    }
    if delta.is_nan() || delta < 0.0 {
        return arg(format!("delta = {delta} must be non-negative"));
    }
    let m = codebook_size(n, rate)?;
    if m > EXACT_MAX_CODEWORDS {
        return Err(Error::Resource(format!(
            "codebook of {m:.3e} codewords exceeds the exact analyzer's 2^30 limit"
        )));
    }
    let (nx, ny) = (p.nx(), p.ny());
    let qp = q.probs();
    let active: Vec<(usize, usize)> = (0..ny)
        .flat_map(|y| (0..nx).map(move |x| (y, x)))
        .filter(|&(y, x)| qp[x] * p.p(x, y) > 0.0)
        .collect();
    let count = composition_count(n as u64, active.len());
    if count > DEFAULT_TYPE_CAP {
        return Err(Error::Resource(format!(
            "{count} joint types exceed the cap of {DEFAULT_TYPE_CAP}"
        )));
    }
    let ln_a: Vec<f64> = active.iter().map(|&(y, x)| (qp[x] * p.p(x, y)).ln()).collect();
    let ln_q: Vec<f64> = qp.iter().map(|v| v.ln()).collect();
    let others = m - 1.0;
    let mut tables: HashMap<Vec<u32>, CompetitorTable> = HashMap::new();
    let mut report = ExactFiniteNReport {
        n,
        m: m as u64,
        rate,
        delta,
        p_error: 0.0,
        p_correct_strict: 0.0,
        p_feedback1: 0.0,
        p_feedback1_total: 0.0,
        per_type_breakdown: Vec::new(),
    };
    let ln_n_fact = ln_factorial(n as u64);
    for comp in Compositions::new(n, active.len()) {
        let mut counts = vec![0u32; ny * nx];
        let mut lp = ln_n_fact;
        for ((&k, &(y, x)), &la) in comp.iter().zip(&active).zip(&ln_a) {
            counts[y * nx + x] = k;
            lp += k as f64 * la - ln_factorial(k as u64);
        }
        let prob = lp.exp();
        let joint_type = TypeWithDenominator::new(ny, nx, counts)?;
        let metric = metric_from_counts(joint_type.counts(), ny, nx, &ln_q);
        let y_counts = joint_type.y_counts();
        let table = tables
            .entry(y_counts.clone())
            .or_insert_with(|| CompetitorTable::build(&y_counts, q, nx));

        let blocked = table.not_beaten_by(metric, 0.0);
        let c_strict = survive(blocked, others);
        let err = if others == 0.0 || blocked >= 1.0 {
            1.0 - c_strict
        } else {
            -(others * (-blocked).ln_1p()).exp_m1()
        };
        let (fb, fb_total) = if delta.is_infinite() {
            (0.0, 0.0)
        } else {
            let fb = survive(table.not_beaten_by(metric, delta), others);
            let mut wrong = 0.0;
            if others >= 1.0 {
                for (i, &v) in table.metric.iter().enumerate() {
                    if beats(v, metric, delta) {
                        wrong += table.prob[i] * survive(table.not_beaten_by(v, delta), others - 1.0);
                    }
                }
                wrong *= others;
            }
            (fb, (fb + wrong).min(1.0))
        };
        report.p_correct_strict += prob * c_strict;
        report.p_error += prob * err;
        report.p_feedback1 += prob * fb;
        report.p_feedback1_total += prob * fb_total;
        report.per_type_breakdown.push(TypeBreakdown {
            joint_type,
            probability: prob,
            metric,
            p_correct_strict: c_strict,
            p_feedback1: fb,
            p_feedback1_total: fb_total,
        });
    }
    for v in [
        &mut report.p_error,
        &mut report.p_correct_strict,
        &mut report.p_feedback1,
        &mut report.p_feedback1_total,
    ] {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportMinimum {
    pub value: f64,
    /// Empty when no support qualifies (`value = +inf`).
    pub worst_support: Vec<usize>,
    pub q: Option<Distribution>,
}

const SUPPORT_STARTS: usize = 20;
const SUPPORT_REFINE: f64 = 1e-6;
const SUPPORT_MAX_INPUTS: usize = 6;

/// Minimum of `E_c^ML(R, Q)` over all `Q` whose support `Z` has
/// `C(Z) < R`, searched support by support with multi-start compass descent.
pub fn min_over_small_supports(rate: f64, p: &Channel, resolution: u32) -> Result<SupportMinimum> {
    let nx = p.nx();
    if nx > SUPPORT_MAX_INPUTS {
        return Err(Error::Resource(format!(
            "{nx} inputs exceed the {SUPPORT_MAX_INPUTS}-letter limit of the support search"
        )));
    }
    if !rate.is_finite() || rate < 0.0 {
        return arg(format!("rate {rate} must be a non-negative finite number"));
    }
    if resolution == 0 {
        return arg("resolution must be positive");
    }
    let mut best = SupportMinimum {
        value: f64::INFINITY,
        worst_support: Vec::new(),
        q: None,
    };
    let eval = |w: &[f64]| -> Option<f64> {
        let d = Distribution::new(w.to_vec()).ok()?;
        correct_exponent_ml(rate, &d, p).ok().map(|r| r.value)
    };
    for mask in 1u32..(1 << nx) {
        let z: Vec<usize> = (0..nx).filter(|&x| mask & (1 << x) != 0).collect();
        if capacity(p, &z)? >= rate {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + mask as u64);
        let mut starts: Vec<Vec<f64>> = Vec::new();
        let uniform: Vec<f64> = (0..nx)
            .map(|x| if mask & (1 << x) != 0 { 1.0 / z.len() as f64 } else { 0.0 })
            .collect();
        starts.push(uniform);
        if z.len() > 1 {
            while starts.len() < SUPPORT_STARTS {
                let mut w = vec![0.0; nx];
                for &x in &z {
                    w[x] = -rng.gen::<f64>().max(1e-300).ln();
                }
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|v| *v /= s);
                starts.push(w);
            }
        }
        for start in starts {
            let Some(v0) = eval(&start) else { continue };
            let (w, v) = descend_simplex(&z, start, v0, 1.0 / resolution as f64, &eval);
            if v < best.value {
                best = SupportMinimum {
                    value: v,
                    worst_support: z.clone(),
                    q: Distribution::new(w).ok(),
                };
            }
        }
    }
    Ok(best)
}

fn descend_simplex(
    letters: &[usize],
    start: Vec<f64>,
    v0: f64,
    step0: f64,
    eval: &impl Fn(&[f64]) -> Option<f64>,
) -> (Vec<f64>, f64) {
    let (mut w, mut v) = (start, v0);
    let mut h = step0;
    let mut trial = w.clone();
    while h >= SUPPORT_REFINE {
        let mut improved = false;
        for &i in letters {
            for &j in letters {
                if i == j || w[j] <= 0.0 {
                    continue;
                }
                let amount = h.min(w[j]);
                trial.copy_from_slice(&w);
                trial[i] += amount;
                trial[j] -= amount;
                if let Some(v2) = eval(&trial) {
                    if v2 < v {
                        w.copy_from_slice(&trial);
                        v = v2;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (w, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_infeasible_above_max_metric() {
        let q = Distribution::uniform(2).unwrap();
        let p = Channel::bsc(0.1).unwrap();
        let o = ImplicitOracle::new(&q, &p, 60).unwrap();
        assert_eq!(o.value(ImplicitKind::CorrectStrict, o.max_metric() + 0.01), f64::INFINITY);
        assert_eq!(o.value(ImplicitKind::ErrorIid, 0.5), 0.0);
    }

    #[test]
    fn rejects_large_alphabets_and_coarse_grids() {
        let q = Distribution::uniform(4).unwrap();
        let p = Channel::identity(4).unwrap();
        assert!(matches!(ImplicitOracle::new(&q, &p, 60), Err(Error::Resource(_))));
        let q = Distribution::uniform(2).unwrap();
        let p = Channel::bsc(0.1).unwrap();
        assert!(matches!(ImplicitOracle::new(&q, &p, 10), Err(Error::Argument(_))));
    }

    #[test]
    fn single_codeword_is_always_decoded() {
        let q = Distribution::uniform(2).unwrap();
        let p = Channel::bsc(0.1).unwrap();
        let r = exact_finite_n(5, 0.0, 0.3, &q, &p).unwrap();
        assert_eq!(r.m, 1);
        assert!((r.p_correct_strict - 1.0).abs() < 1e-12);
        assert!(r.p_error.abs() < 1e-12);
        assert!((r.p_feedback1 - 1.0).abs() < 1e-12);
        let r = exact_finite_n(5, 0.2, f64::INFINITY, &q, &p).unwrap();
        assert_eq!(r.p_feedback1, 0.0);
    }

    #[test]
    fn survive_is_stable() {
        assert_eq!(survive(0.3, 0.0), 1.0);
        assert_eq!(survive(1.0, 2.0), 0.0);
        let v = survive(1e-20, 1e10);
        assert!((v - (-1e-10f64).exp()).abs() < 1e-18);
    }
}
