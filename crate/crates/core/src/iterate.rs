//! The two deterministic minimizations over the input distribution: the
//! fixed-rate iteration that drives `E_c^ML(R,Q)` down by replacing `Q` with
//! the X-marginal of the current minimizer, and the fixed-slope alternating
//! minimization of `E₀(ρ,Q)` for `ρ ∈ (−1,0)`.

use serde::Serialize;

use crate::error::{arg, Result};
use crate::exponents::{correct_exponent_ml, e0, tilted_joint};
use crate::itcore::{
    kl_joint, log_sum_exp, metric_divergence, Channel, Distribution,
    JointDistribution,
};
use crate::oracle::{min_over_small_supports, SupportMinimum};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Grid resolution handed to the support search of `check_lower_than`.
pub const SUPPORT_RESOLUTION: u32 = 60;

#[derive(Debug, Clone, Serialize)]
pub struct RateStepRecord {
    pub q_before: Distribution,
    pub q_after: Distribution,
    /// Supporting-line slope at `q_before`.
    pub rho_hat: f64,
    /// Supporting-line slope at `q_after`.
    pub rho_hat_after: f64,
    pub minimizer: JointDistribution,
    pub exponent_before: f64,
    pub exponent_after: f64,
    /// `(1 + rho_hat_after) · D(q_after ∥ q_before)`.
    pub guaranteed_decrease: f64,
    pub kl_step: f64,
}

/// One update `Q ← Σ_y T̆(y)V̆(x|y)` with the minimizer of `E_c^ML(R,Q)`.
pub fn fixed_rate_step(q: &Distribution, rate: f64, p: &Channel) -> Result<RateStepRecord> {
    let before = correct_exponent_ml(rate, q, p)?;
    let q_after = before.minimizer.x_marginal()?;
    let after = correct_exponent_ml(rate, &q_after, p)?;
    let kl_step = q_after.kl(q)?;
    Ok(RateStepRecord {
        q_before: q.clone(),
        rho_hat: before.rho_star,
        rho_hat_after: after.rho_star,
        exponent_before: before.value,
        exponent_after: after.value,
        guaranteed_decrease: (1.0 + after.rho_star) * kl_step,
        kl_step,
        minimizer: before.minimizer,
        q_after,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RateTrace {
    pub steps: Vec<RateStepRecord>,
    pub final_q: Distribution,
    pub final_exponent: f64,
    /// Terminal exponent below the tolerance.
    pub reached_zero: bool,
    /// The terminal support is strictly smaller than the initial one.
    pub support_shrank: bool,
    /// Stopped by the tolerance test rather than the iteration cap.
    pub converged: bool,
}

/// Repeats `fixed_rate_step` until both the exponent change and the
/// total-variation change of `Q` fall below `tol`, or `max_iter` steps.
pub fn fixed_rate_run(
    q0: &Distribution,
    rate: f64,
    p: &Channel,
    tol: f64,
    max_iter: usize,
) -> Result<RateTrace> {
    if tol.is_nan() || tol <= 0.0 {
        return arg(format!("tolerance {tol} must be positive"));
    }
    let mut q = q0.clone();
    let mut steps = Vec::new();
    let mut converged = false;
    let mut exponent = correct_exponent_ml(rate, q0, p)?.value;
    while steps.len() < max_iter {
        let step = fixed_rate_step(&q, rate, p)?;
        let change = (step.exponent_before - step.exponent_after).abs();
        let moved = step.q_after.total_variation(&step.q_before);
        q = step.q_after.clone();
        exponent = step.exponent_after;
        steps.push(step);
        if change < tol && moved < tol {
            converged = true;
            break;
        }
    }
    Ok(RateTrace {
        support_shrank: q.support().len() < q0.support().len(),
        reached_zero: exponent < tol,
        final_exponent: exponent,
        final_q: q,
        steps,
        converged,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerThanCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub worst: SupportMinimum,
}

/// Whether `E_c^ML(R,Q₀)` lies strictly below the minimum of `E_c^ML(R,·)`
/// over every support whose capacity is below `R`.
pub fn check_lower_than(q0: &Distribution, rate: f64, p: &Channel) -> Result<LowerThanCheck> {
    let lhs = correct_exponent_ml(rate, q0, p)?.value;
    let worst = min_over_small_supports(rate, p, SUPPORT_RESOLUTION)?;
    Ok(LowerThanCheck {
        holds: lhs < worst.value,
        lhs,
        rhs: worst.value,
        worst,
    })
}

fn check_open_slope(rho: f64) -> Result<()> {
    if !(rho > -1.0 && rho < 0.0) {
        return arg(format!("rho = {rho} must lie strictly inside (-1, 0)"));
    }
    Ok(())
}

/// `F_ρ(T∘V, Q) = D(T∘V∥Q∘P) + ρ D(T∘V∥T×Q)`.
pub fn slope_objective(
    joint: &JointDistribution,
    q: &Distribution,
    rho: f64,
    p: &Channel,
) -> Result<f64> {
    let reference = JointDistribution::from_input(q, p)?;
    Ok(kl_joint(joint, &reference)? + rho * metric_divergence(joint, q)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeStepRecord {
    pub q_before: Distribution,
    pub q_after: Distribution,
    /// `F_ρ` after the `(T,V)` update, at `q_before`.
    pub objective_mid: f64,
    /// `F_ρ` after the `Q` update.
    pub objective_after: f64,
    pub kl_step: f64,
}

pub fn fixed_slope_step(q: &Distribution, rho: f64, p: &Channel) -> Result<SlopeStepRecord> {
    check_open_slope(rho)?;
    let tilt = tilted_joint(rho, q, p)?;
    let q_after = tilt.joint.x_marginal()?;
    Ok(SlopeStepRecord {
        objective_mid: slope_objective(&tilt.joint, q, rho, p)?,
        objective_after: slope_objective(&tilt.joint, &q_after, rho, p)?,
        kl_step: q_after.kl(q)?,
        q_before: q.clone(),
        q_after,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeTrace {
    pub steps: Vec<SlopeStepRecord>,
    pub final_q: Distribution,
    /// `E₀(ρ, final_q)`.
    pub final_objective: f64,
    pub stationarity_residual: f64,
    pub converged: bool,
}

pub fn fixed_slope_run(
    q0: &Distribution,
    rho: f64,
    p: &Channel,
    tol: f64,
    max_iter: usize,
) -> Result<SlopeTrace> {
    check_open_slope(rho)?;
    if tol.is_nan() || tol <= 0.0 {
        return arg(format!("tolerance {tol} must be positive"));
    }
    let mut q = q0.clone();
    let mut steps: Vec<SlopeStepRecord> = Vec::new();
    let mut converged = false;
    while steps.len() < max_iter {
        let step = fixed_slope_step(&q, rho, p)?;
        let change = (step.objective_mid - step.objective_after).abs();
        let moved = step.q_after.total_variation(&step.q_before);
        q = step.q_after.clone();
        steps.push(step);
        if change < tol && moved < tol {
            converged = true;
            break;
        }
    }
    Ok(SlopeTrace {
        final_objective: e0(rho, &q, p)?,
        stationarity_residual: stationarity_residual(&q, rho, p)?,
        final_q: q,
        steps,
        converged,
    })
}

/// Spread `max − min` over `supp(Q)` of `Σ_y P(y|x)^γ [Σ_a Q(a)P(y|a)^γ]^ρ`,
/// `γ = 1/(1+ρ)`; zero exactly at a fixed point of the slope update.
pub fn stationarity_residual(q: &Distribution, rho: f64, p: &Channel) -> Result<f64> {
    check_open_slope(rho)?;
    p.check_input(q)?;
    let g = 1.0 / (1.0 + rho);
    let supp = q.support();
    let qp = q.probs();
    let ln_s: Vec<f64> = (0..p.ny())
        .map(|y| {
            log_sum_exp(
                supp.iter()
                    .filter(|&&a| p.p(a, y) > 0.0)
                    .map(|&a| qp[a].ln() + g * p.p(a, y).ln()),
            )
        })
        .collect();
    let values: Vec<f64> = supp
        .iter()
        .map(|&x| {
            (0..p.ny())
                .filter(|&y| p.p(x, y) > 0.0)
                .map(|y| (g * p.p(x, y).ln() + rho * ln_s[y]).exp())
                .sum()
        })
        .collect();
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

/// `I(Q∘P)`.
pub fn input_mutual_information(q: &Distribution, p: &Channel) -> Result<f64> {
    let j = JointDistribution::from_input(q, p)?;
    metric_divergence(&j, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_exponent_is_a_fixed_point() {
        let q = Distribution::uniform(2).unwrap();
        let p = Channel::bsc(0.1).unwrap();
        let s = fixed_rate_step(&q, 0.2, &p).unwrap();
        assert_eq!(s.rho_hat, 0.0);
        assert!(s.q_after.l1(&q) < 1e-12);
        let run = fixed_rate_run(&q, 0.2, &p, 1e-9, 100).unwrap();
        assert_eq!(run.steps.len(), 1);
        assert!(run.reached_zero);
    }

    #[test]
    fn slope_step_rejects_closed_endpoints() {
        let q = Distribution::uniform(2).unwrap();
        let p = Channel::bsc(0.1).unwrap();
        assert!(fixed_slope_step(&q, 0.0, &p).is_err());
        assert!(fixed_slope_step(&q, -1.0, &p).is_err());
        assert!(stationarity_residual(&q, -0.5, &p).unwrap() < 1e-12);
    }
}
