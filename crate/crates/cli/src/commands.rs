use nts_core::iterate::{input_mutual_information, slope_objective};
use nts_core::oracle::ImplicitOracle;
use nts_core::simulate::{DecoderKind, Decision, Sampler, Scheme, DEFAULT_CODEBOOK_CAP};
use nts_core::{
    capacity, check_lower_than, correct_exponent_ml, correct_exponent_strict, error_exponent, tilted_joint,
    exact_finite_n, fixed_rate_run, fixed_slope_run, iterate, nts_run, Distribution, Error,
    ImplicitKind, SimConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{require, ConfigFile};
use crate::error::CliError;
use crate::output::{fmt_g, fmt_opt, Csv, OutDir};

pub const DEFAULT_RESOLUTION: u32 = 60;

fn q_header(nx: usize) -> impl Iterator<Item = String> {
    (0..nx).map(|i| format!("q{i}"))
}

fn q_cells(q: &Distribution) -> impl Iterator<Item = String> + '_ {
    q.probs().iter().map(|&v| fmt_g(v))
}

/// Rates from `rate_grid`, or the single `rate` when `allow_single`.
fn rates(cfg: &ConfigFile, allow_single: bool) -> Result<Vec<f64>, CliError> {
    match (&cfg.params.rate_grid, cfg.params.rate) {
        (Some(g), _) => g.points(),
        (None, Some(r)) if allow_single => Ok(vec![r]),
        _ => Err(CliError::Config("field `params.rate_grid` is required".into())),
    }
}

pub fn curves(mut cfg: ConfigFile, out: &mut OutDir) -> Result<ConfigFile, CliError> {
    let r = cfg.resolve()?;
    let grid = rates(&cfg, false)?;
    let rows: Vec<Vec<String>> = grid
        .par_iter()
        .map(|&rate| -> Result<Vec<String>, CliError> {
            let ee = error_exponent(rate, &r.q0, &r.channel)?;
            let ec = correct_exponent_ml(rate, &r.q0, &r.channel)?;
            let strict = correct_exponent_strict(rate, &r.q0, &r.channel)?;
            Ok(vec![
                fmt_g(rate),
                fmt_g(ee.value),
                fmt_g(ec.value),
                fmt_opt(strict.value()),
                fmt_g(ee.rho_star),
                fmt_g(ec.rho_star),
            ])
        })
        .collect::<Result<_, _>>()?;
    let header = [
        "rate",
        "error_exponent",
        "correct_ml",
        "correct_strict",
        "rho_star_err",
        "rho_star_corr",
    ];
    let mut csv = Csv::new(&header.map(String::from));
    rows.into_iter().for_each(|row| csv.row(row));
    out.write("curves.csv", &csv.into_string())?;
    cfg.channel = cfg.channel.normalized(&r.channel);
    Ok(cfg)
}

#[derive(Serialize)]
struct LowerThanReport {
    holds: bool,
    lhs: f64,
    rhs: f64,
    worst_support: Vec<usize>,
}

#[derive(Serialize)]
struct RateSummary {
    rate: f64,
    steps: usize,
    converged: bool,
    reached_zero: bool,
    support_shrank: bool,
    final_exponent: f64,
    final_q: Vec<f64>,
    final_information: f64,
    capacity: f64,
    /// `None` when the channel has too many inputs for the support search.
    check_lower_than: Option<LowerThanReport>,
}

pub fn iterate_rate(mut cfg: ConfigFile, out: &mut OutDir) -> Result<ConfigFile, CliError> {
    let r = cfg.resolve()?;
    let rate = require(cfg.params.rate, "rate")?;
    let tol = *cfg.params.tol.get_or_insert(iterate::DEFAULT_TOL);
    let max_iter = *cfg.params.max_iter.get_or_insert(iterate::DEFAULT_MAX_ITER);
    let (p, q0) = (&r.channel, &r.q0);
    let run = fixed_rate_run(q0, rate, p, tol, max_iter)?;
    let start = correct_exponent_ml(rate, q0, p)?;
    let head: Vec<String> = ["iter", "exponent", "kl_step", "rho_hat"]
        .into_iter()
        .map(String::from)
        .chain(q_header(p.nx()))
        .collect();
    let mut csv = Csv::new(&head);
    csv.row(
        ["0".into(), fmt_g(start.value), "0".into(), fmt_g(start.rho_star)]
            .into_iter()
            .chain(q_cells(q0))
            .collect(),
    );
    for (l, s) in run.steps.iter().enumerate() {
        csv.row(
            [
                (l + 1).to_string(),
                fmt_g(s.exponent_after),
                fmt_g(s.kl_step),
                fmt_g(s.rho_hat_after),
            ]
            .into_iter()
            .chain(q_cells(&s.q_after))
            .collect(),
        );
    }
    out.write("iterate_rate.csv", &csv.into_string())?;
    let check = match check_lower_than(q0, rate, p) {
        Ok(c) => Some(LowerThanReport {
            holds: c.holds,
            lhs: c.lhs,
            rhs: c.rhs,
            worst_support: c.worst.worst_support,
        }),
        Err(Error::Resource(m)) => {
            log::warn!("support check skipped: {m}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let summary = RateSummary {
        rate,
        steps: run.steps.len(),
        converged: run.converged,
        reached_zero: run.reached_zero,
        support_shrank: run.support_shrank,
        final_exponent: run.final_exponent,
        final_information: input_mutual_information(&run.final_q, p)?,
        final_q: run.final_q.probs().to_vec(),
        capacity: capacity(p, &(0..p.nx()).collect::<Vec<_>>())?,
        check_lower_than: check,
    };
    out.write_json("iterate_rate.json", &summary)?;
    cfg.channel = cfg.channel.normalized(p);
    Ok(cfg)
}

#[derive(Serialize)]
struct SlopeSummary {
    rho: f64,
    steps: usize,
    converged: bool,
    final_objective: f64,
    final_e0: f64,
    stationarity_residual: f64,
    final_q: Vec<f64>,
}

pub fn iterate_slope(mut cfg: ConfigFile, out: &mut OutDir) -> Result<ConfigFile, CliError> {
    let r = cfg.resolve()?;
    let rho = require(cfg.params.rho, "rho")?;
    let tol = *cfg.params.tol.get_or_insert(iterate::DEFAULT_TOL);
    let max_iter = *cfg.params.max_iter.get_or_insert(iterate::DEFAULT_MAX_ITER);
    let (p, q0) = (&r.channel, &r.q0);
    let run = fixed_slope_run(q0, rho, p, tol, max_iter)?;
    // Minimum over (T,V) of the objective at the starting input.
    let start = slope_objective(&tilted_joint(rho, q0, p)?.joint, q0, rho, p)?;
    let head: Vec<String> = ["iter", "objective", "kl_step", "rho_hat"]
        .into_iter()
        .map(String::from)
        .chain(q_header(p.nx()))
        .collect();
    let mut csv = Csv::new(&head);
    csv.row(
        ["0".into(), fmt_g(start), "0".into(), fmt_g(rho)]
            .into_iter()
            .chain(q_cells(q0))
            .collect(),
    );
    for (l, s) in run.steps.iter().enumerate() {
        csv.row(
            [
                (l + 1).to_string(),
                fmt_g(s.objective_after),
                fmt_g(s.kl_step),
                fmt_g(rho),
            ]
            .into_iter()
            .chain(q_cells(&s.q_after))
            .collect(),
        );
    }
    out.write("iterate_slope.csv", &csv.into_string())?;
    out.write_json(
        "iterate_slope.json",
        &SlopeSummary {
            rho,
            steps: run.steps.len(),
            converged: run.converged,
            final_objective: run.steps.last().map_or(start, |s| s.objective_after),
            final_e0: run.final_objective,
            stationarity_residual: run.stationarity_residual,
            final_q: run.final_q.probs().to_vec(),
        },
    )?;
    cfg.channel = cfg.channel.normalized(p);
    Ok(cfg)
}

fn kind_name(kind: ImplicitKind) -> &'static str {
    match kind {
        ImplicitKind::ErrorIid => "error_iid",
        ImplicitKind::CorrectMl => "correct_ml",
        ImplicitKind::CorrectStrict => "correct_strict",
    }
}

pub fn oracle(mut cfg: ConfigFile, out: &mut OutDir) -> Result<ConfigFile, CliError> {
    let r = cfg.resolve()?;
    let grid = rates(&cfg, true)?;
    let resolution = *cfg.params.resolution.get_or_insert(DEFAULT_RESOLUTION);
    let (p, q) = (&r.channel, &r.q0);
    let iid = ImplicitOracle::new(q, p, resolution)?;
    let cc = ImplicitOracle::constant_composition(q, p, resolution)?;
    let rows: Vec<[Vec<String>; 2]> = grid
        .par_iter()
        .flat_map_iter(|&rate| ImplicitKind::ALL.into_iter().map(move |k| (rate, k)))
        .map(|(rate, kind)| -> Result<[Vec<String>; 2], CliError> {
            let explicit = match kind {
                ImplicitKind::ErrorIid => Some(error_exponent(rate, q, p)?.value),
                ImplicitKind::CorrectMl => Some(correct_exponent_ml(rate, q, p)?.value),
                ImplicitKind::CorrectStrict => correct_exponent_strict(rate, q, p)?.value(),
            };
            let implicit = iid.value(kind, rate);
            let name = kind_name(kind).to_string();
            Ok([
                vec![
                    fmt_g(rate),
                    name.clone(),
                    fmt_opt(explicit),
                    fmt_g(implicit),
                    fmt_opt(explicit.map(|e| (e - implicit).abs())),
                ],
                vec![fmt_g(rate), name, fmt_g(implicit), fmt_g(cc.value(kind, rate))],
            ])
        })
        .collect::<Result<_, _>>()?;
    let mut cmp = Csv::new(&["rate", "kind", "explicit", "implicit", "abs_diff"].map(String::from));
    let mut ccb = Csv::new(&["rate", "kind", "iid", "constant_composition"].map(String::from));
    for [a, b] in rows {
        cmp.row(a);
        ccb.row(b);
    }
    out.write("oracle.csv", &cmp.into_string())?;
    out.write("cc_bound.csv", &ccb.into_string())?;
    cfg.channel = cfg.channel.normalized(p);
    Ok(cfg)
}

pub fn exact(mut cfg: ConfigFile, out: &mut OutDir) -> Result<ConfigFile, CliError> {
    let r = cfg.resolve()?;
    let n = require(cfg.params.n, "n")?;
    let rate = require(cfg.params.rate, "rate")?;
    let delta = *cfg.params.delta.get_or_insert(0.0);
    let report = exact_finite_n(n, rate, delta, &r.q0, &r.channel)?;
    out.write_json("exact.json", &report)?;
    cfg.channel = cfg.channel.normalized(&r.channel);
    Ok(cfg)
}

fn decision_name(d: Decision) -> &'static str {
    match d {
        Decision::Correct => "correct",
        Decision::Wrong => "wrong",
        Decision::Erasure => "erasure",
    }
}

pub fn simulate(mut cfg: ConfigFile, out: &mut OutDir) -> Result<ConfigFile, CliError> {
    let r = cfg.resolve()?;
    let prm = &mut cfg.params;
    let n = require(prm.n, "n")?;
    let rate = require(prm.rate, "rate")?;
    let blocks = require(prm.blocks, "blocks")?;
    let mut sim = SimConfig::new(
        n,
        rate,
        *prm.delta.get_or_insert(0.0),
        r.q0.clone(),
        r.channel.clone(),
    );
    sim.blocks = blocks;
    sim.seed = *prm.seed.get_or_insert(0);
    sim.scheme = *prm.scheme.get_or_insert(Scheme::Margin);
    sim.decoder = *prm.decoder.get_or_insert(DecoderKind::Natural);
    sim.sampler = *prm.sampler.get_or_insert(Sampler::Auto);
    sim.codebook_cap = *prm.codebook_cap.get_or_insert(DEFAULT_CODEBOOK_CAP);
    if let Some(schedule) = prm.schedule.as_mut() {
        for (k, entry) in schedule.iter_mut().enumerate() {
            let ch = entry.channel.resolve(&format!("params.schedule[{k}].channel"))?;
            entry.channel = entry.channel.normalized(&ch);
            sim.channel_schedule.push((entry.start_block, ch));
        }
    }
    let run = nts_run(&sim)?;
    let nx = r.channel.nx();
    let head: Vec<String> = [
        "block",
        "decision",
        "decoded",
        "feedback",
        "winner_metric",
        "runner_up_metric",
        "desynced",
    ]
    .into_iter()
    .map(String::from)
    .chain(q_header(nx))
    .collect();
    let mut csv = Csv::new(&head);
    for o in &run.outcomes {
        csv.row(
            [
                o.block.to_string(),
                decision_name(o.decision).to_string(),
                o.decoded.map_or_else(|| "NA".to_string(), |d| d.to_string()),
                (o.feedback as u8).to_string(),
                fmt_g(o.winner_metric),
                fmt_g(o.runner_up_metric),
                (o.desynced as u8).to_string(),
            ]
            .into_iter()
            .chain(q_cells(&o.q_next))
            .collect(),
        );
    }
    out.write("simulate.csv", &csv.into_string())?;
    out.write_json("simulate.json", &run.summary)?;
    cfg.channel = cfg.channel.normalized(&r.channel);
    Ok(cfg)
}
