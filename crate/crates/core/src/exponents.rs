//! Gallager's `E₀(ρ,Q)`, the tilted minimizers `T_ρ∘V_ρ`, the explicit error and
//! correct-decoding exponents, the limiting `ρ = −1` family and a capacity solver.
//!
//! Internally the tilt is parameterized by `s = 1 + ρ` so that slopes close to
//! `ρ = −1` do not suffer from cancellation in `1 + ρ`.

use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::itcore::{log_sum_exp, xlogx_over, Channel, Distribution, JointDistribution};

/// Closest approach to `ρ = −1` used by the slope bisection.
pub const RHO_MINUS_ONE_GUARD: f64 = 1e-6;
/// Entries within this relative distance of a column maximum belong to its argmax set.
pub const ARGMAX_REL_TOL: f64 = 1e-12;
const BISECTION_CAP: usize = 200;
const CAPACITY_TOL: f64 = 1e-9;
const CAPACITY_ITER_CAP: usize = 100_000;

/// Log tables for a fixed `(Q, P)` pair.
struct Prepared<'a> {
    p: &'a Channel,
    supp: Vec<usize>,
    ln_q: Vec<f64>,
    ln_p: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(q: &Distribution, p: &'a Channel) -> Result<Self> {
        p.check_input(q)?;
        let ln_p = (0..p.nx())
            .flat_map(|x| p.row(x).iter().map(|v| v.ln()))
            .collect();
        Ok(Prepared {
            p,
            supp: q.support(),
            ln_q: q.probs().iter().map(|v| v.ln()).collect(),
            ln_p,
        })
    }

    #[inline]
    fn ln_p(&self, x: usize, y: usize) -> f64 {
        self.ln_p[x * self.p.ny() + y]
    }

    /// `ln S_y = ln Σ_x Q(x) P(y|x)^{1/s}` for every `y`.
    fn ln_s_y(&self, s: f64) -> Vec<f64> {
        let g = 1.0 / s;
        (0..self.p.ny())
            .map(|y| {
                log_sum_exp(
                    self.supp
                        .iter()
                        .filter(|&&x| self.p.p(x, y) > 0.0)
                        .map(|&x| self.ln_q[x] + g * self.ln_p(x, y)),
                )
            })
            .collect()
    }

    fn tilt(&self, s: f64) -> Tilt {
        let ln_s_y = self.ln_s_y(s);
        let ln_z = log_sum_exp(ln_s_y.iter().map(|&l| s * l));
        Tilt { s, ln_s_y, ln_z }
    }

    /// `Σ_y T(y) Σ_x V(x|y) ln(V(x|y)/Q(x))` at tilt `s`.
    fn slope(&self, t: &Tilt) -> f64 {
        let g = 1.0 / t.s;
        let mut d = 0.0;
        for (y, &ls) in t.ln_s_y.iter().enumerate() {
            if ls == f64::NEG_INFINITY {
                continue;
            }
            let ty = (t.s * ls - t.ln_z).exp();
            let mut row = 0.0;
            for &x in &self.supp {
                if self.p.p(x, y) > 0.0 {
                    let ln_ratio = g * self.ln_p(x, y) - ls;
                    row += (self.ln_q[x] + ln_ratio).exp() * ln_ratio;
                }
            }
            d += ty * row;
        }
        d.max(0.0)
    }

    /// `T_s(y)V_s(x|y)` and the conditional table with `Q` filled into rows where `T_s(y) = 0`.
    fn joint(&self, t: &Tilt) -> (JointDistribution, Vec<f64>) {
        let (nx, ny) = (self.p.nx(), self.p.ny());
        let g = 1.0 / t.s;
        let mut mass = vec![0.0; ny * nx];
        let mut cond = vec![0.0; ny * nx];
        for (y, &ls) in t.ln_s_y.iter().enumerate() {
            if ls == f64::NEG_INFINITY {
                for &x in &self.supp {
                    cond[y * nx + x] = self.ln_q[x].exp();
                }
                continue;
            }
            let ty = (t.s * ls - t.ln_z).exp();
            for &x in &self.supp {
                if self.p.p(x, y) > 0.0 {
                    let v = (self.ln_q[x] + g * self.ln_p(x, y) - ls).exp();
                    cond[y * nx + x] = v;
                    mass[y * nx + x] = ty * v;
                }
            }
        }
        let joint = JointDistribution::new(ny, nx, mass).expect("tilted joint is normalized");
        (joint, cond)
    }

    fn e0_minus_one(&self) -> f64 {
        let total: f64 = (0..self.p.ny())
            .map(|y| {
                self.supp
                    .iter()
                    .map(|&x| self.p.p(x, y))
                    .fold(0.0, f64::max)
            })
            .sum();
        -total.ln()
    }

    /// Largest `s` in `[lo, hi]` with `slope(s) >= rate`, by bisection on the
    /// nonincreasing map `s ↦ slope(s)`.
    fn solve_slope(&self, mut lo: f64, mut hi: f64, rate: f64) -> f64 {
        for _ in 0..BISECTION_CAP {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.slope(&self.tilt(mid)) > rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

struct Tilt {
    s: f64,
    ln_s_y: Vec<f64>,
    ln_z: f64,
}

impl Tilt {
    fn e0(&self) -> f64 {
        -self.ln_z
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !rate.is_finite() || rate < 0.0 {
        return arg(format!("rate {rate} must be a non-negative finite number"));
    }
    Ok(())
}

/// `E₀(ρ,Q) = −ln Σ_y [Σ_x Q(x) P(y|x)^{1/(1+ρ)}]^{1+ρ}` for `ρ > −1`, and its limit
/// `−ln Σ_y max_{x ∈ supp Q} P(y|x)` at `ρ = −1`.
pub fn e0(rho: f64, q: &Distribution, p: &Channel) -> Result<f64> {
    if rho.is_nan() || rho < -1.0 || rho == f64::INFINITY {
        return arg(format!("rho = {rho} is outside [-1, inf)"));
    }
    let prep = Prepared::new(q, p)?;
    if rho == -1.0 {
        return Ok(prep.e0_minus_one());
    }
    Ok(prep.tilt(1.0 + rho).e0())
}

/// Tilted minimizer of `D(T∘V∥Q∘P) + ρ D(T∘V∥T×Q)` with its `E₀` and slope.
#[derive(Debug, Clone, Serialize)]
pub struct TiltedSolution {
    pub rho: f64,
    pub joint: JointDistribution,
    /// `V_ρ(x|y)`, y-major; rows with `T_ρ(y) = 0` hold `Q`.
    pub conditional: Vec<f64>,
    pub e0: f64,
    /// `D(T_ρ∘V_ρ ∥ T_ρ×Q) = ∂E₀/∂ρ`.
    pub slope: f64,
}

pub fn tilted_joint(rho: f64, q: &Distribution, p: &Channel) -> Result<TiltedSolution> {
    if rho.is_nan() || rho <= -1.0 || rho == f64::INFINITY {
        return arg(format!(
            "rho = {rho} must exceed -1 (use minus_one_family at the limit)"
        ));
    }
    let prep = Prepared::new(q, p)?;
    let t = prep.tilt(1.0 + rho);
    let (joint, conditional) = prep.joint(&t);
    Ok(TiltedSolution {
        rho,
        joint,
        conditional,
        e0: t.e0(),
        slope: prep.slope(&t),
    })
}

/// Limiting minimizers at `ρ = −1`: output marginal, per-output argmax sets and
/// the two extreme conditionals spanning divergences `[r_minus, r_plus]`.
#[derive(Debug, Clone, Serialize)]
pub struct MinusOneFamily {
    pub t_minus1: Vec<f64>,
    pub argmax_sets: Vec<Vec<usize>>,
    pub e0_minus1: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    /// Conditional `∝ Q` on each argmax set, y-major.
    pub v_minus: Vec<f64>,
    /// Point mass on the least likely letter of each argmax set, y-major.
    pub v_plus: Vec<f64>,
    q: Vec<f64>,
}

impl MinusOneFamily {
    pub fn nx(&self) -> usize {
        self.q.len()
    }

    /// `(1 − λ) v_minus + λ v_plus`.
    pub fn interpolate(&self, lambda: f64) -> Vec<f64> {
        self.v_minus
            .iter()
            .zip(&self.v_plus)
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect()
    }

    /// `D(T₋₁∘V ∥ T₋₁×Q)` for a conditional table `v`.
    pub fn divergence(&self, v: &[f64]) -> f64 {
        let nx = self.nx();
        self.t_minus1
            .iter()
            .enumerate()
            .filter(|(_, &t)| t > 0.0)
            .map(|(y, &t)| {
                t * (0..nx)
                    .map(|x| xlogx_over(v[y * nx + x], self.q[x]))
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn joint(&self, v: &[f64]) -> JointDistribution {
        JointDistribution::from_parts(&self.t_minus1, v, self.nx())
            .expect("family conditionals are normalized")
    }
}

pub fn minus_one_family(q: &Distribution, p: &Channel) -> Result<MinusOneFamily> {
    p.check_input(q)?;
    let (nx, ny) = (p.nx(), p.ny());
    let supp = q.support();
    let qp = q.probs();
    let maxima: Vec<f64> = (0..ny)
        .map(|y| supp.iter().map(|&x| p.p(x, y)).fold(0.0, f64::max))
        .collect();
    let total: f64 = maxima.iter().sum();
    let t_minus1: Vec<f64> = maxima.iter().map(|m| m / total).collect();
    let mut argmax_sets = Vec::with_capacity(ny);
    let mut v_minus = vec![0.0; ny * nx];
    let mut v_plus = vec![0.0; ny * nx];
    let (mut r_minus, mut r_plus) = (0.0, 0.0);
    for y in 0..ny {
        let set: Vec<usize> = if maxima[y] > 0.0 {
            supp.iter()
                .copied()
                .filter(|&x| p.p(x, y) >= maxima[y] * (1.0 - ARGMAX_REL_TOL))
                .collect()
        } else {
            Vec::new()
        };
        if set.is_empty() {
            v_minus[y * nx..(y + 1) * nx].copy_from_slice(qp);
            v_plus[y * nx..(y + 1) * nx].copy_from_slice(qp);
        } else {
            let mass: f64 = set.iter().map(|&x| qp[x]).sum();
            for &x in &set {
                v_minus[y * nx + x] = qp[x] / mass;
            }
            let mut vertex = set[0];
            for &x in &set[1..] {
                if qp[x] < qp[vertex] {
                    vertex = x;
                }
            }
            v_plus[y * nx + vertex] = 1.0;
            r_minus -= t_minus1[y] * mass.ln();
            r_plus -= t_minus1[y] * qp[vertex].ln();
        }
        argmax_sets.push(set);
    }
    Ok(MinusOneFamily {
        t_minus1,
        argmax_sets,
        e0_minus1: -total.ln(),
        r_minus,
        r_plus,
        v_minus,
        v_plus,
        q: qp.to_vec(),
    })
}

/// Which constraint of the `ρ` range is active at the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Interior,
    RhoZero,
    RhoOne,
    RhoMinusOne,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentResult {
    pub value: f64,
    pub rho_star: f64,
    pub minimizer: JointDistribution,
    pub boundary: Boundary,
}

fn at_rho_zero(q: &Distribution, p: &Channel) -> Result<ExponentResult> {
    Ok(ExponentResult {
        value: 0.0,
        rho_star: 0.0,
        minimizer: JointDistribution::from_input(q, p)?,
        boundary: Boundary::RhoZero,
    })
}

fn interior(prep: &Prepared, s: f64, rate: f64, boundary: Boundary) -> ExponentResult {
    let t = prep.tilt(s);
    let rho = s - 1.0;
    ExponentResult {
        value: (t.e0() - rho * rate).max(0.0),
        rho_star: rho,
        minimizer: prep.joint(&t).0,
        boundary,
    }
}

/// `E_e(R,Q) = max_{0≤ρ≤1} E₀(ρ,Q) − ρR`.
pub fn error_exponent(rate: f64, q: &Distribution, p: &Channel) -> Result<ExponentResult> {
    check_rate(rate)?;
    let prep = Prepared::new(q, p)?;
    let mi = prep.slope(&prep.tilt(1.0));
    if rate >= mi {
        return at_rho_zero(q, p);
    }
    if rate <= prep.slope(&prep.tilt(2.0)) {
        return Ok(interior(&prep, 2.0, rate, Boundary::RhoOne));
    }
    let s = prep.solve_slope(1.0, 2.0, rate);
    Ok(interior(&prep, s, rate, Boundary::Interior))
}

/// Shared core of the two correct-decoding exponents; also returns the family
/// when the optimum sits at `ρ = −1`.
fn correct_core(
    rate: f64,
    q: &Distribution,
    p: &Channel,
) -> Result<(ExponentResult, Option<MinusOneFamily>)> {
    check_rate(rate)?;
    let prep = Prepared::new(q, p)?;
    let mi = prep.slope(&prep.tilt(1.0));
    if rate <= mi {
        return Ok((at_rho_zero(q, p)?, None));
    }
    let fam = minus_one_family(q, p)?;
    if rate >= fam.r_minus || prep.slope(&prep.tilt(RHO_MINUS_ONE_GUARD)) < rate {
        let res = ExponentResult {
            value: (fam.e0_minus1 + rate).max(0.0),
            rho_star: -1.0,
            minimizer: fam.joint(&fam.v_minus),
            boundary: Boundary::RhoMinusOne,
        };
        return Ok((res, Some(fam)));
    }
    let s = prep.solve_slope(RHO_MINUS_ONE_GUARD, 1.0, rate);
    Ok((interior(&prep, s, rate, Boundary::Interior), None))
}

/// `E_c^ML(R,Q) = max_{−1≤ρ≤0} E₀(ρ,Q) − ρR`. At `ρ* = −1` the minimizer is
/// `T₋₁∘v_minus`.
pub fn correct_exponent_ml(rate: f64, q: &Distribution, p: &Channel) -> Result<ExponentResult> {
    Ok(correct_core(rate, q, p)?.0)
}

/// Strict correct-decoding exponent, or a report that the rate lies beyond
/// `r_plus` where the explicit formula stops describing the strict minimum.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StrictExponent {
    Value(ExponentResult),
    OutOfDomain { rate: f64, r_plus: f64 },
}

impl StrictExponent {
    pub fn value(&self) -> Option<f64> {
        match self {
            StrictExponent::Value(r) => Some(r.value),
            StrictExponent::OutOfDomain { .. } => None,
        }
    }

    pub fn result(&self) -> Option<&ExponentResult> {
        match self {
            StrictExponent::Value(r) => Some(r),
            StrictExponent::OutOfDomain { .. } => None,
        }
    }
}

pub fn correct_exponent_strict(rate: f64, q: &Distribution, p: &Channel) -> Result<StrictExponent> {
    check_rate(rate)?;
    let fam = minus_one_family(q, p)?;
    if rate > fam.r_plus {
        return Ok(StrictExponent::OutOfDomain {
            rate,
            r_plus: fam.r_plus,
        });
    }
    let (mut res, fam) = correct_core(rate, q, p)?;
    if let Some(fam) = fam {
        // D(λ) is convex with its minimum r_minus at λ = 0, so it increases on [0, 1].
        let lambda = if rate <= fam.r_minus {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..BISECTION_CAP {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if fam.divergence(&fam.interpolate(mid)) < rate {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        res.minimizer = fam.joint(&fam.interpolate(lambda));
    }
    Ok(StrictExponent::Value(res))
}

/// `(I(w), max_x D(P_x ∥ wP))`, the two sides of the capacity sandwich;
/// fills `d[x] = D(P_x ∥ wP)`.
fn capacity_bounds(rows: &[&[f64]], w: &[f64], d: &mut [f64]) -> (f64, f64) {
    let mut out = vec![0.0; rows[0].len()];
    for (row, &a) in rows.iter().zip(w) {
        for (o, &py) in out.iter_mut().zip(row.iter()) {
            *o += a * py;
        }
    }
    for (di, row) in d.iter_mut().zip(rows) {
        *di = row.iter().zip(&out).map(|(&a, &b)| xlogx_over(a, b)).sum();
    }
    let lower = w.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
    (lower, d.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Newton direction for `max I(w)` on the letters with positive weight,
/// constrained to `Σ Δ = 0`; slightly regularized because the Hessian is
/// singular whenever rows are (nearly) linearly dependent.
fn capacity_newton_direction(rows: &[&[f64]], w: &[f64], d: &[f64]) -> Option<Vec<f64>> {
    use nalgebra::{DMatrix, DVector};
    let active: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let a = active.len();
    if a < 2 {
        return None;
    }
    let ny = rows[0].len();
    let mut out = vec![0.0; ny];
    for &i in &active {
        for (o, &py) in out.iter_mut().zip(rows[i].iter()) {
            *o += w[i] * py;
        }
    }
    let mut kkt = DMatrix::<f64>::zeros(a + 1, a + 1);
    for (r, &i) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            kkt[(r, c)] = (0..ny)
                .filter(|&y| out[y] > 0.0)
                .map(|y| rows[i][y] * rows[j][y] / out[y])
                .sum();
        }
    }
    let scale = (0..a).map(|r| kkt[(r, r)]).fold(0.0, f64::max);
    for r in 0..a {
        kkt[(r, r)] += 1e-12 * scale.max(1e-300);
        kkt[(r, a)] = 1.0;
        kkt[(a, r)] = 1.0;
    }
    let rhs = DVector::from_iterator(a + 1, active.iter().map(|&i| d[i]).chain([0.0]));
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut dir = vec![0.0; w.len()];
    for (r, &i) in active.iter().enumerate() {
        dir[i] = sol[r];
    }
    Some(dir)
}

/// Capacity of `p` restricted to the input letters in `support`: active-set
/// Newton steps with alternating maximization as the fallback, returning the
/// lower bound `I(w)` once `max_x D(P_x ∥ wP) − I(w)` is below 1e-9.
pub fn capacity(p: &Channel, support: &[usize]) -> Result<f64> {
    if support.is_empty() {
        return arg("capacity of an empty input set");
    }
    let mut letters = support.to_vec();
    letters.sort_unstable();
    letters.dedup();
    if letters.len() != support.len() || *letters.last().unwrap() >= p.nx() {
        return arg(format!("invalid input support {support:?}"));
    }
    let rows: Vec<&[f64]> = letters.iter().map(|&x| p.row(x)).collect();
    let k = rows.len();
    let mut w = vec![1.0 / k as f64; k];
    let mut d = vec![0.0; k];
    let (mut lower, mut upper) = capacity_bounds(&rows, &w, &mut d);
    let mut d_try = vec![0.0; k];
    for _ in 0..CAPACITY_ITER_CAP {
        if upper - lower < CAPACITY_TOL {
            return Ok(lower.max(0.0));
        }
        // A letter dropped by a Newton step comes back once it beats every
        // letter still in use.
        let best_active = (0..k)
            .filter(|&i| w[i] > 0.0)
            .map(|i| d[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut revived = false;
        for i in 0..k {
            if w[i] == 0.0 && d[i] > best_active {
                w[i] = 1e-3;
                revived = true;
            }
        }
        if revived {
            let z: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= z);
            (lower, upper) = capacity_bounds(&rows, &w, &mut d);
            continue;
        }
        let mut next = None;
        if let Some(dir) = capacity_newton_direction(&rows, &w, &d) {
            let mut t_max = 1.0f64;
            let mut block = None;
            for (i, (&a, &b)) in w.iter().zip(&dir).enumerate() {
                if b < 0.0 && a / -b < t_max {
                    t_max = a / -b;
                    block = Some(i);
                }
            }
            let mut t = t_max;
            for _ in 0..30 {
                let mut cand: Vec<f64> = w.iter().zip(&dir).map(|(&a, &b)| (a + t * b).max(0.0)).collect();
                if t == t_max {
                    if let Some(i) = block {
                        cand[i] = 0.0;
                    }
                }
                let z: f64 = cand.iter().sum();
                cand.iter_mut().for_each(|v| *v /= z);
                let (lo, up) = capacity_bounds(&rows, &cand, &mut d_try);
                if lo >= lower || up - lo < upper - lower {
                    next = Some((cand, lo, up));
                    break;
                }
                t *= 0.5;
            }
        }
        let (cand, lo, up) = next.unwrap_or_else(|| {
            // Alternating-maximization step; never decreases `I(w)`.
            let mut cand: Vec<f64> = w.iter().zip(&d).map(|(&a, &b)| a * (b - upper).exp()).collect();
            let z: f64 = cand.iter().sum();
            cand.iter_mut().for_each(|v| *v /= z);
            let (lo, up) = capacity_bounds(&rows, &cand, &mut d_try);
            (cand, lo, up)
        });
        w = cand;
        std::mem::swap(&mut d, &mut d_try);
        lower = lo;
        upper = up;
    }
    Err(Error::Numeric(format!(
        "capacity iteration did not reach tolerance {CAPACITY_TOL} in {CAPACITY_ITER_CAP} steps (bounds {lower} .. {upper})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::itcore::mutual_information;

    fn bsc() -> Channel {
        Channel::bsc(0.1).unwrap()
    }

    fn unif(k: usize) -> Distribution {
        Distribution::uniform(k).unwrap()
    }

    #[test]
    fn e0_anchors() {
        let (q, p) = (unif(2), bsc());
        assert!(e0(0.0, &q, &p).unwrap().abs() < 1e-15);
        let cutoff = (2.0 / (1.0 + 2.0 * 0.09f64.sqrt())).ln();
        assert!((e0(1.0, &q, &p).unwrap() - cutoff).abs() < 1e-12);
        assert!((e0(-1.0, &q, &p).unwrap() + 1.8f64.ln()).abs() < 1e-12);
        assert!(matches!(e0(-1.5, &q, &p), Err(Error::Argument(_))));
        assert!(tilted_joint(-1.0, &q, &p).is_err());
    }

    #[test]
    fn tilted_at_zero_is_input_joint() {
        let q = Distribution::new(vec![0.2, 0.8]).unwrap();
        let p = Channel::new(vec![vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let t = tilted_joint(0.0, &q, &p).unwrap();
        let qp = JointDistribution::from_input(&q, &p).unwrap();
        assert!(t.joint.l1(&qp) < 1e-14);
        assert!((t.slope - mutual_information(&qp)).abs() < 1e-12);
    }

    #[test]
    fn slope_matches_finite_difference() {
        let (q, p) = (unif(2), bsc());
        let h = 1e-5;
        let fd = (e0(1.0 + h, &q, &p).unwrap() - e0(1.0 - h, &q, &p).unwrap()) / (2.0 * h);
        assert!((tilted_joint(1.0, &q, &p).unwrap().slope - fd).abs() < 1e-6);
    }

    #[test]
    fn family_examples() {
        let fam = minus_one_family(&unif(2), &Channel::identity(2).unwrap()).unwrap();
        assert_eq!(fam.argmax_sets, vec![vec![0], vec![1]]);
        assert_eq!(fam.t_minus1, vec![0.5, 0.5]);
        assert!((fam.r_minus - 2f64.ln()).abs() < 1e-15);
        assert!((fam.r_plus - 2f64.ln()).abs() < 1e-15);

        let p = Channel::new(vec![vec![0.9, 0.1], vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let q = Distribution::new(vec![0.25, 0.25, 0.5]).unwrap();
        let fam = minus_one_family(&q, &p).unwrap();
        assert_eq!(fam.argmax_sets, vec![vec![0, 1], vec![2]]);
        assert!((fam.t_minus1[0] - 0.5).abs() < 1e-15);
        assert!((fam.r_minus - 2f64.ln()).abs() < 1e-14);
        assert!((fam.r_plus - 1.5 * 2f64.ln()).abs() < 1e-14);
        assert!((fam.divergence(&fam.v_minus) - fam.r_minus).abs() < 1e-14);
        assert!((fam.divergence(&fam.v_plus) - fam.r_plus).abs() < 1e-14);
    }

    #[test]
    fn error_exponent_cases() {
        let (q, p) = (unif(2), bsc());
        let r = error_exponent(0.5, &q, &p).unwrap();
        assert_eq!((r.value, r.rho_star, r.boundary), (0.0, 0.0, Boundary::RhoZero));
        let r = error_exponent(0.0, &q, &p).unwrap();
        assert_eq!(r.boundary, Boundary::RhoOne);
        assert!((r.value - e0(1.0, &q, &p).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn correct_exponent_identity_channel() {
        let r = correct_exponent_ml(1.0, &unif(2), &Channel::identity(2).unwrap()).unwrap();
        assert_eq!(r.boundary, Boundary::RhoMinusOne);
        assert!((r.value - (1.0 - 2f64.ln())).abs() < 1e-15);
        let r = correct_exponent_ml(0.2, &unif(2), &bsc()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn strict_minimizer_hits_rate() {
        let p = Channel::new(vec![vec![0.9, 0.1], vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let q = Distribution::new(vec![0.25, 0.25, 0.5]).unwrap();
        let rate = 0.85;
        let StrictExponent::Value(r) = correct_exponent_strict(rate, &q, &p).unwrap() else {
            panic!("rate is inside the domain");
        };
        assert_eq!(r.boundary, Boundary::RhoMinusOne);
        let d = crate::itcore::metric_divergence(&r.minimizer, &q).unwrap();
        assert!((d - rate).abs() < 1e-8);
        assert!(matches!(
            correct_exponent_strict(1.1, &q, &p).unwrap(),
            StrictExponent::OutOfDomain { .. }
        ));
    }

    #[test]
    fn capacity_cases() {
        let id = Channel::identity(2).unwrap();
        assert!((capacity(&id, &[0, 1]).unwrap() - 2f64.ln()).abs() < 1e-9);
        let hb = -(0.1f64 * 0.1f64.ln() + 0.9 * 0.9f64.ln());
        assert!((capacity(&bsc(), &[0, 1]).unwrap() - (2f64.ln() - hb)).abs() < 1e-9);
        let flat = Channel::new(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        assert!(capacity(&flat, &[0, 1]).unwrap().abs() < 1e-12);
        assert!(capacity(&bsc(), &[]).is_err());
    }
}
