//! Monte Carlo model of one-bit-feedback natural type selection: i.i.d.
//! random codebooks, transmission over a DMC, the channel-independent decoder
//! with confidence margin `Δ`, the threshold variant, and the `Q` update driven
//! by the type of the winning codeword.
//!
//! Codebooks with at most `codebook_cap` words are drawn explicitly. Larger
//! ensembles are sampled exactly in distribution: given the received word, the
//! metrics of the `M − 1` competing codewords are i.i.d. with a law determined
//! by the output type, so the decoder only needs the top two order statistics
//! of that law, which are drawn directly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{arg, Error, Result};
use crate::exponents::{correct_exponent_ml, correct_exponent_strict, error_exponent};
use crate::itcore::{
    codebook_size, empirical_joint_type, Channel, Compositions, Distribution, JointDistribution,
    TypeWithDenominator,
};
use crate::oracle::beats;

pub const DEFAULT_CODEBOOK_CAP: u64 = 1 << 20;
/// Competitor-law tables kept per `(Q, channel)` epoch.
const TABLE_CACHE_LIMIT: usize = 512;

/// Reproducible generator for trial `index` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Feedback when the winner beats every other codeword by more than `Δ`.
    Margin,
    /// Feedback when the winner's metric exceeds `R + Δ`.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    /// Maximizes `D(T∘V_m ∥ T×Q)`; never reads the channel.
    Natural,
    /// Maximizes `Σ ln P(y_i|x_i)`; only meaningful with the threshold scheme.
    MaximumLikelihood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Explicit codebooks up to `codebook_cap` words, ensemble sampling above.
    Auto,
    Explicit,
    Ensemble,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub n: u32,
    pub rate: f64,
    pub delta: f64,
    pub scheme: Scheme,
    pub decoder: DecoderKind,
    pub sampler: Sampler,
    pub blocks: usize,
    pub q0: Distribution,
    /// `(first block, channel)` pairs; the first entry starts at block 0.
    pub channel_schedule: Vec<(usize, Channel)>,
    pub seed: u64,
    pub codebook_cap: u64,
}

impl SimConfig {
    /// Margin scheme, natural decoder, automatic sampler, fixed channel.
    pub fn new(n: u32, rate: f64, delta: f64, q0: Distribution, channel: Channel) -> Self {
        SimConfig {
            n,
            rate,
            delta,
            scheme: Scheme::Margin,
            decoder: DecoderKind::Natural,
            sampler: Sampler::Auto,
            blocks: 0,
            q0,
            channel_schedule: vec![(0, channel)],
            seed: 0,
            codebook_cap: DEFAULT_CODEBOOK_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return arg("blocklength must be positive");
        }
        if !self.rate.is_finite() || self.rate < 0.0 {
            return arg(format!("rate {} must be a non-negative finite number", self.rate));
        }
        if self.delta.is_nan() || self.delta < 0.0 {
            return arg(format!("delta {} must be non-negative", self.delta));
        }
        let Some((first, ch0)) = self.channel_schedule.first() else {
            return arg("channel schedule is empty");
        };
        if *first != 0 {
            return arg("channel schedule must start at block 0");
        }
        for w in self.channel_schedule.windows(2) {
            if w[1].0 <= w[0].0 {
                return arg("channel schedule indices must be strictly increasing");
            }
        }
        for (_, ch) in &self.channel_schedule {
            if ch.nx() != ch0.nx() || ch.ny() != ch0.ny() {
                return arg("all scheduled channels must share alphabets");
            }
        }
        ch0.check_input(&self.q0)?;
        if ch0.nx() > 256 || ch0.ny() > 256 {
            return arg("alphabets larger than 256 symbols are not supported");
        }
        let m = codebook_size(self.n, self.rate)?;
        if self.sampler == Sampler::Explicit && m > self.codebook_cap as f64 {
            return Err(Error::Resource(format!(
                "codebook of {m:.3e} words exceeds the cap of {}",
                self.codebook_cap
            )));
        }
        Ok(())
    }

    fn channel_at(&self, block: usize) -> &Channel {
        let i = self
            .channel_schedule
            .partition_point(|(start, _)| *start <= block);
        &self.channel_schedule[i - 1].1
    }
}

/// `M × n` symbol array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    n: usize,
    symbols: Vec<u8>,
}

impl Codebook {
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.first().map_or(0, |r| r.len());
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return arg("codewords must be non-empty and of equal length");
        }
        Ok(Codebook {
            n,
            symbols: rows.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn codeword(&self, i: usize) -> &[u8] {
        &self.symbols[i * self.n..(i + 1) * self.n]
    }
}

fn cdf(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut c: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    // Route any rounding slack to the last letter with positive mass.
    if let Some(last) = probs.iter().rposition(|&p| p > 0.0) {
        c[last..].iter_mut().for_each(|v| *v = f64::INFINITY);
    }
    c
}

#[inline]
fn draw(cdf: &[f64], u: f64) -> u8 {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u8
}

pub fn build_codebook(q: &Distribution, n: u32, rate: f64, rng: &mut impl Rng) -> Result<Codebook> {
    build_codebook_capped(q, n, rate, rng, DEFAULT_CODEBOOK_CAP)
}

pub fn build_codebook_capped(
    q: &Distribution,
    n: u32,
    rate: f64,
    rng: &mut impl Rng,
    cap: u64,
) -> Result<Codebook> {
    if n == 0 {
        return arg("blocklength must be positive");
    }
    if q.len() > 256 {
        return arg("alphabets larger than 256 symbols are not supported");
    }
    let m = codebook_size(n, rate)?;
    if m > cap as f64 {
        return Err(Error::Resource(format!(
            "codebook of {m:.3e} words exceeds the cap of {cap}"
        )));
    }
    let c = cdf(q.probs());
    let total = m as usize * n as usize;
    Ok(Codebook {
        n: n as usize,
        symbols: (0..total).map(|_| draw(&c, rng.gen())).collect(),
    })
}

/// Outcome of the natural decoder on one received word.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeResult {
    /// Unique maximizer, or `None` on a tie (erasure).
    pub winner: Option<usize>,
    pub winner_metric: f64,
    /// Best metric among the other codewords, `-inf` if there are none.
    pub runner_up_metric: f64,
    /// The winner beats every other codeword by more than `delta`.
    pub feedback: bool,
}

fn pair_counts(x: &[u8], y: &[u8], nx: usize, ny: usize, counts: &mut [u32]) {
    counts[..nx * ny].iter_mut().for_each(|c| *c = 0);
    for (&a, &b) in x.iter().zip(y) {
        counts[b as usize * nx + a as usize] += 1;
    }
}

fn decide(metrics: impl Iterator<Item = f64>, delta: f64) -> DecodeResult {
    let (mut best, mut best_i, mut second) = (f64::NEG_INFINITY, 0usize, f64::NEG_INFINITY);
    for (i, v) in metrics.enumerate() {
        if i == 0 || v > best {
            second = best;
            best = v;
            best_i = i;
        } else if v > second {
            second = v;
        }
    }
    let unique = beats(best, second, 0.0);
    DecodeResult {
        winner: unique.then_some(best_i),
        winner_metric: best,
        runner_up_metric: second,
        feedback: unique && beats(best, second, delta),
    }
}

/// Natural decoding of `y` against `codebook` with reference `q`. Ties are
/// erasures; the feedback bit requires a margin larger than `delta`.
pub fn natural_decode(codebook: &Codebook, y: &[u8], q: &Distribution, delta: f64) -> DecodeResult {
    let nx = q.len();
    let ny = y.iter().map(|&b| b as usize + 1).max().unwrap_or(1);
    let ln_q: Vec<f64> = q.probs().iter().map(|v| v.ln()).collect();
    let mut counts = vec![0u32; nx * ny];
    decide(
        (0..codebook.len()).map(|i| {
            pair_counts(codebook.codeword(i), y, nx, ny, &mut counts);
            crate::itcore::metric_from_counts(&counts, ny, nx, &ln_q)
        }),
        delta,
    )
}

/// Maximum-likelihood decoding; `feedback` follows the margin rule on the
/// log-likelihood and is normally overridden by `threshold_decide`.
pub fn ml_decode(codebook: &Codebook, y: &[u8], p: &Channel, delta: f64) -> DecodeResult {
    decide(
        (0..codebook.len()).map(|i| ml_metric(codebook.codeword(i), y, p)),
        delta,
    )
}

fn ml_metric(x: &[u8], y: &[u8], p: &Channel) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| p.p(a as usize, b as usize).ln())
        .sum::<f64>()
        / x.len() as f64
}

/// Threshold-scheme feedback bit: `winner_metric > rate + delta`.
pub fn threshold_decide(winner_metric: f64, rate: f64, delta: f64) -> bool {
    winner_metric > rate + delta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Correct,
    Wrong,
    Erasure,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockOutcome {
    pub block: usize,
    pub decision: Decision,
    /// Decoded message index; `None` on erasure and for wrong decisions of the
    /// ensemble sampler, which does not materialize indices.
    pub decoded: Option<u64>,
    pub correct: bool,
    pub feedback: bool,
    pub winner_metric: f64,
    pub runner_up_metric: f64,
    /// Joint type of the transmitted codeword and the received word.
    pub joint_type: TypeWithDenominator,
    /// Joint type of the decoded codeword and the received word.
    pub winner_type: Option<TypeWithDenominator>,
    /// Encoder and decoder entered the block with different `Q`.
    pub desynced: bool,
    /// Decoder-side distribution after the block.
    pub q_next: Distribution,
    /// Encoder-side distribution after the block.
    pub q_enc_next: Distribution,
}

/// One entry of the competitor law: a conditional type given the output type.
#[derive(Debug, Clone)]
struct Competitor {
    decision_metric: f64,
    natural_metric: f64,
    prob: f64,
    /// Per output letter, index into `CompetitorLaw::rows`.
    code: Vec<u32>,
}

/// Competitor law sorted by decision metric, grouped into tie classes.
struct CompetitorLaw {
    nx: usize,
    /// Per output letter, the admissible rows of joint counts.
    rows: Vec<Vec<Vec<u32>>>,
    entries: Vec<Competitor>,
    /// Start offsets of tie groups in `entries`, plus a final sentinel.
    group_start: Vec<usize>,
    group_metric: Vec<f64>,
    group_prob: Vec<f64>,
    /// `tail[g] = Σ_{h ≥ g} group_prob[h]`, `tail[G] = 0`.
    tail: Vec<f64>,
}

impl CompetitorLaw {
    fn build(
        y_counts: &[u32],
        q: &Distribution,
        p: &Channel,
        decoder: DecoderKind,
        n: u32,
    ) -> CompetitorLaw {
        let nx = q.len();
        let ny = y_counts.len();
        let supp = q.support();
        let ln_q: Vec<f64> = q.probs().iter().map(|v| v.ln()).collect();
        // Per output letter: (counts, ln prob, natural contribution, ML contribution).
        let rows: Vec<Vec<(Vec<u32>, f64, f64, f64)>> = (0..ny)
            .map(|y| {
                let t = y_counts[y];
                Compositions::new(t, supp.len())
                    .map(|c| {
                        let mut row = vec![0u32; nx];
                        let mut lp = ln_factorial(t as u64);
                        let (mut nat, mut ml) = (0.0, 0.0);
                        for (&k, &x) in c.iter().zip(&supp) {
                            row[x] = k;
                            if k > 0 {
                                let kf = k as f64;
                                lp += kf * ln_q[x] - ln_factorial(k as u64);
                                nat += kf * (kf.ln() - (t as f64).ln() - ln_q[x]);
                                ml += kf * p.p(x, y).ln();
                            }
                        }
                        (row, lp, nat, ml)
                    })
                    .collect()
            })
            .collect();
        let nf = n as f64;
        let mut entries = Vec::new();
        let mut idx = vec![0usize; ny];
        'outer: loop {
            let (mut lp, mut nat, mut ml) = (0.0, 0.0, 0.0);
            for y in 0..ny {
                let r = &rows[y][idx[y]];
                lp += r.1;
                nat += r.2;
                ml += r.3;
            }
            let (nat, ml) = (nat / nf, ml / nf);
            let prob = lp.exp();
            if prob > 0.0 {
                entries.push(Competitor {
                    decision_metric: match decoder {
                        DecoderKind::Natural => nat,
                        DecoderKind::MaximumLikelihood => ml,
                    },
                    natural_metric: nat,
                    prob,
                    code: idx.iter().map(|&i| i as u32).collect(),
                });
            }
            for y in (0..ny).rev() {
                idx[y] += 1;
                if idx[y] < rows[y].len() {
                    continue 'outer;
                }
                idx[y] = 0;
            }
            break;
        }
        entries.sort_unstable_by(|a, b| a.decision_metric.total_cmp(&b.decision_metric));
        let mut group_start = Vec::new();
        let mut group_metric = Vec::new();
        let mut group_prob: Vec<f64> = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            let new_group = match group_metric.last() {
                None => true,
                Some(&g) => beats(e.decision_metric, g, 0.0),
            };
            if new_group {
                group_start.push(i);
                group_metric.push(e.decision_metric);
                group_prob.push(e.prob);
            } else {
                *group_prob.last_mut().unwrap() += e.prob;
            }
        }
        group_start.push(entries.len());
        let g = group_prob.len();
        let mut tail = vec![0.0; g + 1];
        for i in (0..g).rev() {
            tail[i] = tail[i + 1] + group_prob[i];
        }
        CompetitorLaw {
            nx,
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().map(|e| e.0).collect())
                .collect(),
            entries,
            group_start,
            group_metric,
            group_prob,
            tail,
        }
    }

    fn counts(&self, c: &Competitor) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.rows.len() * self.nx);
        for (y, &i) in c.code.iter().enumerate() {
            out.extend_from_slice(&self.rows[y][i as usize]);
        }
        out
    }

    fn groups(&self) -> usize {
        self.group_prob.len()
    }

    /// `ln P(metric ≤ group g)`.
    #[inline]
    fn ln_cdf(&self, g: usize) -> f64 {
        (-self.tail[g + 1].min(1.0)).ln_1p()
    }

    /// Group of the maximum of `k` i.i.d. draws restricted to groups `0..=top`.
    fn sample_max(&self, k: f64, top: usize, rng: &mut impl Rng) -> usize {
        let ln_u = rng.gen::<f64>().ln();
        let f_top = self.ln_cdf(top).exp();
        // P(max ≤ g | all ≤ top) = exp(k (ln F_g − ln F_top)), increasing in g.
        let (mut lo, mut hi) = (0usize, top);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let ln_ratio = if mid == top {
                0.0
            } else {
                let gap = self.tail[mid + 1] - self.tail[top + 1];
                (-(gap / f_top)).ln_1p()
            };
            if k * ln_ratio >= ln_u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// Top competitor group, whether it is shared by two or more draws, and
    /// the group of the next-best draw when it is not.
    fn sample_top(&self, k: f64, rng: &mut impl Rng) -> (usize, bool, Option<usize>) {
        let last = self.groups() - 1;
        let g = self.sample_max(k, last, rng);
        if k <= 1.0 {
            return (g, false, None);
        }
        if g == 0 {
            return (0, true, None);
        }
        // P(exactly one draw in g | max in g) = k π_g F_{g−1}^{k−1} / (F_g^k − F_{g−1}^k).
        let (lf_g, lf_prev) = (self.ln_cdf(g), self.ln_cdf(g - 1));
        let ln_num = k.ln() + self.group_prob[g].ln() + (k - 1.0) * lf_prev;
        let ln_den = k * lf_g + (-(k * (lf_prev - lf_g)).exp_m1()).ln();
        let p_single = (ln_num - ln_den).exp().min(1.0);
        if rng.gen::<f64>() >= p_single {
            return (g, true, None);
        }
        (g, false, Some(self.sample_max(k - 1.0, g - 1, rng)))
    }

    /// Entry within group `g`, drawn proportionally to its probability.
    fn sample_entry(&self, g: usize, rng: &mut impl Rng) -> &Competitor {
        let (s, e) = (self.group_start[g], self.group_start[g + 1]);
        let mut u = rng.gen::<f64>() * self.group_prob[g];
        for c in &self.entries[s..e - 1] {
            if u < c.prob {
                return c;
            }
            u -= c.prob;
        }
        &self.entries[e - 1]
    }
}

/// Decoder-side state for one block at fixed `(Q_enc, Q_dec, P)`.
struct BlockModel<'a> {
    n: u32,
    m: f64,
    rate: f64,
    delta: f64,
    scheme: Scheme,
    decoder: DecoderKind,
    explicit: bool,
    p: &'a Channel,
    q_enc: &'a Distribution,
    q_dec: &'a Distribution,
}

type LawMap = HashMap<Vec<u32>, Arc<CompetitorLaw>>;

enum Laws<'m> {
    /// Owned by a sequential run; cleared when `Q` or the channel changes.
    Cache(&'m mut LawMap),
    /// Shared between worker threads at fixed `Q`.
    Shared(&'m Mutex<LawMap>),
}

struct RawOutcome {
    decision: Decision,
    decoded: Option<u64>,
    feedback: bool,
    winner_metric: f64,
    runner_up_metric: f64,
    joint_type: TypeWithDenominator,
    winner_type: Option<TypeWithDenominator>,
    x_enc_type: Distribution,
}

impl<'a> BlockModel<'a> {
    fn transmit(&self, x: &[u8], rng: &mut impl Rng) -> Vec<u8> {
        let cdfs: Vec<Vec<f64>> = (0..self.p.nx()).map(|a| cdf(self.p.row(a))).collect();
        x.iter()
            .map(|&a| draw(&cdfs[a as usize], rng.gen()))
            .collect()
    }

    fn natural_metric(&self, x: &[u8], y: &[u8]) -> f64 {
        empirical_joint_type(x, y, self.p.nx(), self.p.ny())
            .expect("symbols inside alphabets")
            .metric(self.q_dec)
    }

    fn decision_metric(&self, x: &[u8], y: &[u8]) -> f64 {
        match self.decoder {
            DecoderKind::Natural => self.natural_metric(x, y),
            DecoderKind::MaximumLikelihood => ml_metric(x, y, self.p),
        }
    }

    fn feedback(&self, unique: bool, winner_natural: f64, winner: f64, runner_up: f64) -> bool {
        if !unique || self.delta.is_infinite() {
            return false;
        }
        match self.scheme {
            Scheme::Margin => beats(winner, runner_up, self.delta),
            Scheme::Threshold => threshold_decide(winner_natural, self.rate, self.delta),
        }
    }

    fn run(&self, rng: &mut ChaCha8Rng, laws: Laws<'_>) -> RawOutcome {
        let (nx, ny) = (self.p.nx(), self.p.ny());
        if self.explicit {
            self.run_explicit(rng, nx, ny)
        } else {
            self.run_ensemble(rng, nx, ny, laws)
        }
    }

    fn run_explicit(&self, rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> RawOutcome {
        let m = self.m as u64;
        let message = rng.gen_range(0..m);
        let cb_seed: u64 = rng.gen();
        let enc = build_codebook_capped(
            self.q_enc,
            self.n,
            self.rate,
            &mut ChaCha8Rng::seed_from_u64(cb_seed),
            u64::MAX,
        )
        .expect("size checked by the caller");
        let dec = if self.q_dec == self.q_enc {
            enc.clone()
        } else {
            build_codebook_capped(
                self.q_dec,
                self.n,
                self.rate,
                &mut ChaCha8Rng::seed_from_u64(cb_seed),
                u64::MAX,
            )
            .expect("size checked by the caller")
        };
        let x = enc.codeword(message as usize);
        let y = self.transmit(x, rng);
        let metrics: Vec<f64> = (0..dec.len())
            .map(|i| self.decision_metric(dec.codeword(i), &y))
            .collect();
        let r = decide(metrics.iter().copied(), 0.0);
        let winner_natural = r
            .winner
            .map_or(f64::NEG_INFINITY, |w| self.natural_metric(dec.codeword(w), &y));
        let feedback = self.feedback(
            r.winner.is_some(),
            winner_natural,
            r.winner_metric,
            r.runner_up_metric,
        );
        let decision = match r.winner {
            None => Decision::Erasure,
            Some(w) if w as u64 == message => Decision::Correct,
            Some(_) => Decision::Wrong,
        };
        RawOutcome {
            decision,
            decoded: r.winner.map(|w| w as u64),
            feedback,
            winner_metric: r.winner_metric,
            runner_up_metric: r.runner_up_metric,
            joint_type: empirical_joint_type(x, &y, nx, ny).expect("valid symbols"),
            winner_type: r
                .winner
                .map(|w| empirical_joint_type(dec.codeword(w), &y, nx, ny).expect("valid symbols")),
            x_enc_type: Distribution::from_counts(&symbol_counts(x, nx)).expect("n > 0"),
        }
    }

    fn run_ensemble(
        &self,
        rng: &mut ChaCha8Rng,
        nx: usize,
        ny: usize,
        laws: Laws<'_>,
    ) -> RawOutcome {
        let n = self.n as usize;
        let message = if self.m <= (1u64 << 53) as f64 {
            rng.gen_range(0..self.m as u64)
        } else {
            0
        };
        let (c_enc, c_dec) = (cdf(self.q_enc.probs()), cdf(self.q_dec.probs()));
        let uniforms: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let x_enc: Vec<u8> = uniforms.iter().map(|&u| draw(&c_enc, u)).collect();
        let x_dec: Vec<u8> = uniforms.iter().map(|&u| draw(&c_dec, u)).collect();
        let y = self.transmit(&x_enc, rng);
        let sent_type = empirical_joint_type(&x_dec, &y, nx, ny).expect("valid symbols");
        let b0 = self.decision_metric(&x_dec, &y);
        let b0_nat = sent_type.metric(self.q_dec);
        let joint_type = empirical_joint_type(&x_enc, &y, nx, ny).expect("valid symbols");
        let x_enc_type = Distribution::from_counts(&symbol_counts(&x_enc, nx)).expect("n > 0");
        let others = self.m - 1.0;

        let (decision, winner_metric, runner_up, winner_type, winner_nat) = if others < 1.0 {
            (Decision::Correct, b0, f64::NEG_INFINITY, Some(sent_type), b0_nat)
        } else {
            let y_counts = sent_type.y_counts();
            let build = || {
                Arc::new(CompetitorLaw::build(&y_counts, self.q_dec, self.p, self.decoder, self.n))
            };
            let law = match laws {
                Laws::Cache(cache) => lookup(cache, &y_counts, build),
                Laws::Shared(shared) => {
                    let hit = shared.lock().expect("law cache").get(&y_counts).cloned();
                    match hit {
                        Some(l) => l,
                        None => {
                            // Built outside the lock; a concurrent duplicate is identical.
                            let l = build();
                            lookup(&mut shared.lock().expect("law cache"), &y_counts, || l)
                        }
                    }
                }
            };
            let (g, shared, second) = law.sample_top(others, rng);
            let c1 = law.group_metric[g];
            let c2 = second.map_or(f64::NEG_INFINITY, |h| law.group_metric[h]);
            if beats(b0, c1, 0.0) {
                (Decision::Correct, b0, c1, Some(sent_type), b0_nat)
            } else if beats(c1, b0, 0.0) && !shared {
                let e = law.sample_entry(g, rng);
                let t = TypeWithDenominator::new(ny, nx, law.counts(e)).expect("valid counts");
                (Decision::Wrong, c1, b0.max(c2), Some(t), e.natural_metric)
            } else {
                let top = b0.max(c1);
                (Decision::Erasure, top, top, None, f64::NEG_INFINITY)
            }
        };
        let unique = decision != Decision::Erasure;
        let runner_up = if unique { runner_up } else { winner_metric };
        let feedback = self.feedback(unique, winner_nat, winner_metric, runner_up);
        RawOutcome {
            decision,
            decoded: match decision {
                Decision::Correct => Some(message),
                _ => None,
            },
            feedback,
            winner_metric,
            runner_up_metric: runner_up,
            joint_type,
            winner_type,
            x_enc_type,
        }
    }
}

fn lookup(cache: &mut LawMap, key: &[u32], build: impl FnOnce() -> Arc<CompetitorLaw>) -> Arc<CompetitorLaw> {
    if cache.len() >= TABLE_CACHE_LIMIT && !cache.contains_key(key) {
        cache.clear();
    }
    cache.entry(key.to_vec()).or_insert_with(build).clone()
}

fn symbol_counts(x: &[u8], nx: usize) -> Vec<u32> {
    let mut c = vec![0u32; nx];
    for &a in x {
        c[a as usize] += 1;
    }
    c
}

fn use_explicit(sampler: Sampler, m: f64, cap: u64) -> Result<bool> {
    match sampler {
        Sampler::Explicit if m > cap as f64 => Err(Error::Resource(format!(
            "codebook of {m:.3e} words exceeds the cap of {cap}"
        ))),
        Sampler::Explicit => Ok(true),
        Sampler::Ensemble => Ok(false),
        Sampler::Auto => Ok(m <= cap as f64),
    }
}

/// Per-update diagnostics of an adaptation run.
#[derive(Debug, Clone, Serialize)]
pub struct UpdateRecord {
    pub block: usize,
    /// L1 distance between the winner's joint type and the minimizer of the
    /// strict `E_c(R+Δ, Q)`; `None` when `R+Δ` is outside its domain.
    pub l1_gap: Option<f64>,
    /// `E_e(R, Q)`.
    pub guard_error_exponent: f64,
    /// `E_c^ML(R+Δ, Q)`.
    pub guard_correct_exponent: f64,
    pub guard_holds: bool,
    /// The decoder updated from a codeword that was not transmitted.
    pub undetected: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub blocks: usize,
    pub explicit_codebooks: bool,
    pub feedback_rate: f64,
    pub error_rate: f64,
    pub updates: usize,
    pub undetected_updates: usize,
    pub desynced_blocks: usize,
    pub guard_violations: usize,
    pub mean_l1_gap: Option<f64>,
    pub updates_detail: Vec<UpdateRecord>,
    pub q_final: Distribution,
    pub q_enc_final: Distribution,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimRun {
    pub outcomes: Vec<BlockOutcome>,
    pub summary: SimSummary,
}

/// Adaptation run: a fresh codebook from the current `Q` every block and, on
/// `F = 1`, `Q ←` the type of the decoded codeword (decoder) or of the
/// transmitted codeword (encoder).
pub fn nts_run(config: &SimConfig) -> Result<SimRun> {
    config.validate()?;
    let m = codebook_size(config.n, config.rate)?;
    let explicit = use_explicit(config.sampler, m, config.codebook_cap)?;
    let mut q_enc = config.q0.clone();
    let mut q_dec = config.q0.clone();
    let mut outcomes = Vec::with_capacity(config.blocks);
    let mut updates = Vec::new();
    let mut cache = LawMap::new();
    let mut cache_channel: Option<usize> = None;
    let (mut feedbacks, mut errors, mut desynced_blocks) = (0usize, 0usize, 0usize);
    for block in 0..config.blocks {
        let p = config.channel_at(block);
        let epoch = config
            .channel_schedule
            .partition_point(|(s, _)| *s <= block);
        if cache_channel != Some(epoch) {
            cache.clear();
            cache_channel = Some(epoch);
        }
        let desynced = q_enc != q_dec;
        let model = BlockModel {
            n: config.n,
            m,
            rate: config.rate,
            delta: config.delta,
            scheme: config.scheme,
            decoder: config.decoder,
            explicit,
            p,
            q_enc: &q_enc,
            q_dec: &q_dec,
        };
        let mut rng = trial_rng(config.seed, block as u64);
        let raw = model.run(&mut rng, Laws::Cache(&mut cache));
        desynced_blocks += desynced as usize;
        feedbacks += raw.feedback as usize;
        errors += (raw.decision != Decision::Correct) as usize;
        let (mut q_next, mut q_enc_next) = (q_dec.clone(), q_enc.clone());
        if raw.feedback {
            let wt = raw.winner_type.as_ref().expect("feedback implies a winner");
            let joint = wt.to_joint();
            let guard_e = error_exponent(config.rate, &q_dec, p)?.value;
            let guard_c = correct_exponent_ml(config.rate + config.delta, &q_dec, p)?.value;
            let l1_gap = correct_exponent_strict(config.rate + config.delta, &q_dec, p)?
                .result()
                .map(|r| joint.l1(&r.minimizer));
            let guard_holds = guard_e > guard_c;
            if !guard_holds {
                log::debug!(
                    "block {block}: guard violated (E_e = {guard_e:.6} <= E_c = {guard_c:.6})"
                );
            }
            updates.push(UpdateRecord {
                block,
                l1_gap,
                guard_error_exponent: guard_e,
                guard_correct_exponent: guard_c,
                guard_holds,
                undetected: raw.decision != Decision::Correct,
            });
            q_next = wt.x_type();
            q_enc_next = raw.x_enc_type.clone();
        }
        outcomes.push(BlockOutcome {
            block,
            decision: raw.decision,
            decoded: raw.decoded,
            correct: raw.decision == Decision::Correct,
            feedback: raw.feedback,
            winner_metric: raw.winner_metric,
            runner_up_metric: raw.runner_up_metric,
            joint_type: raw.joint_type,
            winner_type: raw.winner_type,
            desynced,
            q_next: q_next.clone(),
            q_enc_next: q_enc_next.clone(),
        });
        if q_next != q_dec {
            cache.clear();
        }
        q_dec = q_next;
        q_enc = q_enc_next;
    }
    let guard_violations = updates.iter().filter(|u| !u.guard_holds).count();
    if guard_violations > 0 {
        log::warn!("guard condition failed at {guard_violations} of {} updates", updates.len());
    }
    let gaps: Vec<f64> = updates.iter().filter_map(|u| u.l1_gap).collect();
    let blocks = config.blocks.max(1) as f64;
    let summary = SimSummary {
        blocks: config.blocks,
        explicit_codebooks: explicit,
        feedback_rate: feedbacks as f64 / blocks,
        error_rate: errors as f64 / blocks,
        updates: updates.len(),
        undetected_updates: updates.iter().filter(|u| u.undetected).count(),
        desynced_blocks,
        guard_violations,
        mean_l1_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
        updates_detail: updates,
        q_final: q_dec,
        q_enc_final: q_enc,
    };
    Ok(SimRun { outcomes, summary })
}

/// Repeated independent blocks at a fixed `Q`.
#[derive(Debug, Clone, Serialize)]
pub struct FixedQExperiment {
    pub n: u32,
    pub rate: f64,
    pub delta: f64,
    pub scheme: Scheme,
    pub decoder: DecoderKind,
    pub sampler: Sampler,
    pub codebook_cap: u64,
    pub trials: u64,
    pub seed: u64,
}

impl FixedQExperiment {
    pub fn new(n: u32, rate: f64, delta: f64, trials: u64, seed: u64) -> Self {
        FixedQExperiment {
            n,
            rate,
            delta,
            scheme: Scheme::Margin,
            decoder: DecoderKind::Natural,
            sampler: Sampler::Auto,
            codebook_cap: DEFAULT_CODEBOOK_CAP,
            trials,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EventFrequencies {
    pub trials: u64,
    pub explicit_codebooks: bool,
    pub correct: u64,
    pub wrong: u64,
    pub erasure: u64,
    /// `F = 1` with any winner.
    pub feedback: u64,
    /// `F = 1` with the transmitted message as winner.
    pub feedback_correct: u64,
    /// For every `F = 1` trial, the L1 distance between the winner's joint type
    /// and `reference` (if one was supplied), in trial order.
    pub feedback_gaps: Vec<f64>,
}

impl EventFrequencies {
    pub fn freq(&self, count: u64) -> f64 {
        count as f64 / self.trials as f64
    }
}

/// Event counts of `trials` independent blocks at fixed `Q`; trial `i` uses
/// the stream `trial_rng(seed, i)`, so results do not depend on thread count.
pub fn fixed_q_events(
    exp: &FixedQExperiment,
    q: &Distribution,
    p: &Channel,
    reference: Option<&JointDistribution>,
) -> Result<EventFrequencies> {
    let mut cfg = SimConfig::new(exp.n, exp.rate, exp.delta, q.clone(), p.clone());
    cfg.sampler = exp.sampler;
    cfg.codebook_cap = exp.codebook_cap;
    cfg.validate()?;
    let m = codebook_size(exp.n, exp.rate)?;
    let explicit = use_explicit(exp.sampler, m, exp.codebook_cap)?;
    let model = BlockModel {
        n: exp.n,
        m,
        rate: exp.rate,
        delta: exp.delta,
        scheme: exp.scheme,
        decoder: exp.decoder,
        explicit,
        p,
        q_enc: q,
        q_dec: q,
    };
    let laws = Mutex::new(LawMap::new());
    let outcomes: Vec<(Decision, bool, Option<f64>)> = (0..exp.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(exp.seed, i);
            let raw = model.run(&mut rng, Laws::Shared(&laws));
            let gap = match (raw.feedback, reference, &raw.winner_type) {
                (true, Some(r), Some(t)) => Some(t.to_joint().l1(r)),
                _ => None,
            };
            (raw.decision, raw.feedback, gap)
        })
        .collect();
    let mut f = EventFrequencies {
        trials: exp.trials,
        explicit_codebooks: explicit,
        correct: 0,
        wrong: 0,
        erasure: 0,
        feedback: 0,
        feedback_correct: 0,
        feedback_gaps: Vec::new(),
    };
    for (d, fb, gap) in outcomes {
        match d {
            Decision::Correct => f.correct += 1,
            Decision::Wrong => f.wrong += 1,
            Decision::Erasure => f.erasure += 1,
        }
        if fb {
            f.feedback += 1;
            f.feedback_correct += (d == Decision::Correct) as u64;
        }
        if let Some(g) = gap {
            f.feedback_gaps.push(g);
        }
    }
    Ok(f)
}

/// Least-squares exponent fit.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentEstimate {
    /// Slope of `−ln(frequency)` against `n`, nats per symbol.
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    /// Blocklengths excluded because their frequency was zero.
    pub censored: Vec<u32>,
}

pub fn estimate_exponent(samples: &[(u32, f64)]) -> Result<ExponentEstimate> {
    let mut pts = Vec::new();
    let mut censored = Vec::new();
    for &(n, f) in samples {
        if !(0.0..=1.0).contains(&f) {
            return arg(format!("frequency {f} at n = {n} is not in [0, 1]"));
        }
        if f == 0.0 {
            log::warn!("zero frequency at n = {n} censored from the exponent fit");
            censored.push(n);
        } else {
            pts.push((n as f64, -f.ln()));
        }
    }
    let mut distinct: Vec<u64> = pts.iter().map(|p| p.0 as u64).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return arg(format!(
            "exponent fit needs at least 3 distinct blocklengths with nonzero frequency, got {}",
            distinct.len()
        ));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = if pts.len() > 2 {
        (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(ExponentEstimate {
        slope,
        stderr,
        intercept,
        censored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codebook_shape_and_cap() {
        let q = Distribution::new(vec![0.5, 0.5]).unwrap();
        let mut rng = trial_rng(1, 0);
        let cb = build_codebook(&q, 8, 0.3, &mut rng).unwrap();
        assert_eq!(cb.len(), 12);
        assert_eq!(cb.n(), 8);
        let err = build_codebook_capped(&q, 100, 0.5, &mut rng, 1 << 10).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
    }

    #[test]
    fn zero_mass_letters_never_drawn() {
        let q = Distribution::new(vec![0.0, 1.0, 0.0]).unwrap();
        let cb = build_codebook(&q, 50, 0.1, &mut trial_rng(3, 0)).unwrap();
        assert!((0..cb.len()).all(|i| cb.codeword(i).iter().all(|&a| a == 1)));
    }

    #[test]
    fn decoder_margin_and_ties() {
        let q = Distribution::uniform(2).unwrap();
        let cb = Codebook::from_rows(&[vec![0, 0, 1, 1], vec![0, 1, 0, 1], vec![0, 1, 1, 0]]).unwrap();
        let y = [0u8, 0, 1, 1];
        let r = natural_decode(&cb, &y, &q, 0.0);
        assert_eq!(r.winner, Some(0));
        assert!((r.winner_metric - 2f64.ln()).abs() < 1e-12);
        assert!(r.feedback);
        // Exactly at the margin the bit stays 0.
        let r = natural_decode(&cb, &y, &q, r.winner_metric - r.runner_up_metric);
        assert!(!r.feedback);
        let r = natural_decode(&cb, &y, &q, f64::INFINITY);
        assert!(!r.feedback);
        // Codewords 0 and 2 are complements: identical metric, erasure.
        let tie = Codebook::from_rows(&[vec![0, 0, 1, 1], vec![1, 1, 0, 0]]).unwrap();
        let r = natural_decode(&tie, &y, &q, 0.0);
        assert_eq!(r.winner, None);
        assert!(!r.feedback);
    }

    #[test]
    fn single_codeword_feedback_depends_on_delta_only() {
        let q = Distribution::uniform(2).unwrap();
        let cb = Codebook::from_rows(&[vec![0, 1, 1]]).unwrap();
        assert!(natural_decode(&cb, &[1, 1, 0], &q, 5.0).feedback);
        assert!(!natural_decode(&cb, &[1, 1, 0], &q, f64::INFINITY).feedback);
    }

    #[test]
    fn threshold_is_strict() {
        assert!(!threshold_decide(0.3, 0.2, 0.1));
        assert!(threshold_decide(0.3 + 1e-12, 0.2, 0.1));
    }

    #[test]
    fn schedule_validation() {
        let q = Distribution::uniform(2).unwrap();
        let mut c = SimConfig::new(10, 0.1, 0.0, q, Channel::bsc(0.1).unwrap());
        assert!(c.validate().is_ok());
        c.channel_schedule.push((0, Channel::bsc(0.2).unwrap()));
        assert!(c.validate().is_err());
        c.channel_schedule[1].0 = 5;
        assert!(c.validate().is_ok());
        assert_eq!(c.channel_at(4).p(0, 1), 0.1);
        assert_eq!(c.channel_at(5).p(0, 1), 0.2);
        c.channel_schedule[0].0 = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn exponent_fit_recovers_slope() {
        let s: Vec<(u32, f64)> = [10u32, 20, 30, 40].iter().map(|&n| (n, 0.5 * (-0.07 * n as f64).exp())).collect();
        let e = estimate_exponent(&s).unwrap();
        assert!((e.slope - 0.07).abs() < 1e-12);
        assert!(e.stderr < 1e-9);
        let e = estimate_exponent(&[(5, 0.1), (6, 0.0), (7, 0.05), (8, 0.02)]).unwrap();
        assert_eq!(e.censored, vec![6]);
        assert!(estimate_exponent(&[(5, 0.1), (6, 0.0), (7, 0.05)]).is_err());
    }
}
