mod common;

use common::{bsc, dist};
use nts_core::simulate::*;
use nts_core::*;
use proptest::prelude::*;

fn small_config(seed: u64) -> SimConfig {
    let mut c = SimConfig::new(12, 0.2, 0.05, dist(&[0.8, 0.2]), bsc(0.1));
    c.blocks = 200;
    c.seed = seed;
    c
}

#[test]
fn empty_run_leaves_q_alone() {
    let mut c = small_config(1);
    c.blocks = 0;
    let r = nts_run(&c).unwrap();
    assert!(r.outcomes.is_empty());
    assert_eq!(r.summary.q_final, c.q0);
}

#[test]
fn unreachable_margin_never_updates() {
    let mut c = small_config(2);
    c.delta = f64::INFINITY;
    let r = nts_run(&c).unwrap();
    assert_eq!(r.summary.updates, 0);
    assert!(r.outcomes.iter().all(|o| !o.feedback && o.q_next == c.q0));
}

#[test]
fn runs_are_reproducible() {
    let a = nts_run(&small_config(3)).unwrap();
    let b = nts_run(&small_config(3)).unwrap();
    let ja = serde_json::to_string(&a.outcomes).unwrap();
    let jb = serde_json::to_string(&b.outcomes).unwrap();
    assert_eq!(ja, jb);
    let c = nts_run(&small_config(4)).unwrap();
    assert_ne!(ja, serde_json::to_string(&c.outcomes).unwrap());
}

#[test]
fn updated_q_stays_inside_initial_support() {
    let p = Channel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.5, 0.5]]).unwrap();
    for sampler in [Sampler::Explicit, Sampler::Ensemble] {
        let mut c = SimConfig::new(10, 0.15, 0.0, dist(&[0.5, 0.5, 0.0]), p.clone());
        c.blocks = 300;
        c.sampler = sampler;
        let r = nts_run(&c).unwrap();
        assert!(r.summary.updates > 0);
        for o in &r.outcomes {
            assert_eq!(o.q_next.probs()[2], 0.0);
            assert_eq!(o.q_enc_next.probs()[2], 0.0);
        }
    }
}

#[test]
fn feedback_blocks_carry_margin() {
    let r = nts_run(&small_config(5)).unwrap();
    for o in r.outcomes.iter().filter(|o| o.feedback) {
        assert!(o.decision != Decision::Erasure);
        assert!(o.winner_metric - o.runner_up_metric > 0.05);
        let wt = o.winner_type.as_ref().unwrap();
        assert_eq!(o.q_next, wt.x_type());
    }
}

#[test]
fn desync_is_counted() {
    // Large codebook, no margin: wrong decodings with F=1 are common.
    let mut c = SimConfig::new(6, 0.45, 0.0, dist(&[0.5, 0.5]), bsc(0.3));
    c.blocks = 400;
    c.seed = 9;
    let r = nts_run(&c).unwrap();
    assert!(r.summary.undetected_updates > 0);
    assert!(r.summary.desynced_blocks > 0);
    let desynced = r.outcomes.iter().filter(|o| o.desynced).count();
    assert_eq!(desynced, r.summary.desynced_blocks);
}

#[test]
fn channel_schedule_switches() {
    let mut c = SimConfig::new(20, 0.1, 0.05, dist(&[0.5, 0.5]), bsc(0.01));
    c.channel_schedule.push((100, bsc(0.45)));
    c.blocks = 200;
    let r = nts_run(&c).unwrap();
    let before = r.outcomes[..100].iter().filter(|o| o.correct).count();
    let after = r.outcomes[100..].iter().filter(|o| o.correct).count();
    assert!(before > after);
}

#[test]
fn explicit_cap_is_enforced() {
    let mut c = SimConfig::new(100, 0.3, 0.0, dist(&[0.5, 0.5]), bsc(0.1));
    c.sampler = Sampler::Explicit;
    c.blocks = 1;
    assert!(matches!(nts_run(&c).unwrap_err(), Error::Resource(_)));
    c.sampler = Sampler::Auto;
    assert!(!nts_run(&c).unwrap().summary.explicit_codebooks);
}

#[test]
fn threshold_scheme_with_ml_decoder() {
    let mut c = SimConfig::new(16, 0.15, 0.05, dist(&[0.5, 0.5]), bsc(0.05));
    c.scheme = Scheme::Threshold;
    c.decoder = DecoderKind::MaximumLikelihood;
    c.blocks = 100;
    let r = nts_run(&c).unwrap();
    let mut q = c.q0.clone();
    for o in &r.outcomes {
        if let Some(wt) = &o.winner_type {
            assert_eq!(o.feedback, wt.metric(&q) > 0.2);
        }
        q = o.q_next.clone();
    }
    assert!(r.summary.updates > 0);
}

#[test]
fn fixed_q_events_ignore_thread_count() {
    let e = FixedQExperiment::new(8, 0.2, 0.1, 3000, 17);
    let q = dist(&[0.6, 0.4]);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| fixed_q_events(&e, &q, &bsc(0.1), None).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!((a.correct, a.feedback, a.feedback_correct), (b.correct, b.feedback, b.feedback_correct));
}

#[test]
fn samplers_agree_with_exact_analysis() {
    let p = Channel::new(vec![vec![0.85, 0.15], vec![0.25, 0.75]]).unwrap();
    let q = dist(&[0.55, 0.45]);
    let (n, rate, delta) = (5u32, 7.5f64.ln() / 5.0, 0.1);
    let exact = exact_finite_n(n, rate, delta, &q, &p).unwrap();
    for sampler in [Sampler::Explicit, Sampler::Ensemble] {
        let mut e = FixedQExperiment::new(n, rate, delta, 40_000, 23);
        e.sampler = sampler;
        let f = fixed_q_events(&e, &q, &p, None).unwrap();
        for (count, prob) in [
            (f.correct, exact.p_correct_strict),
            (f.feedback_correct, exact.p_feedback1),
            (f.feedback, exact.p_feedback1_total),
        ] {
            let se = (prob * (1.0 - prob) / f.trials as f64).sqrt();
            assert!((f.freq(count) - prob).abs() < 4.0 * se, "{sampler:?}: {} vs {prob}", f.freq(count));
        }
    }
}

#[test]
fn exponent_fit_examples() {
    let s: Vec<(u32, f64)> = (1..6).map(|k| (10 * k, (-0.2 * (10 * k) as f64).exp())).collect();
    let e = estimate_exponent(&s).unwrap();
    assert!((e.slope - 0.2).abs() < 1e-12 && e.stderr < 1e-9);
    let e = estimate_exponent(&[(4, 1.0), (6, 1.0), (8, 1.0)]).unwrap();
    assert_eq!(e.slope, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decoding_commutes_with_permutation(
        rows in prop::collection::vec(prop::collection::vec(0u8..2, 6), 2..8),
        y in prop::collection::vec(0u8..2, 6),
        shift in 0usize..8,
        delta in 0.0f64..0.3,
    ) {
        let q = dist(&[0.6, 0.4]);
        let m = rows.len();
        let perm: Vec<usize> = (0..m).map(|i| (i + shift) % m).collect();
        let permuted: Vec<Vec<u8>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let a = natural_decode(&Codebook::from_rows(&rows).unwrap(), &y, &q, delta);
        let b = natural_decode(&Codebook::from_rows(&permuted).unwrap(), &y, &q, delta);
        prop_assert_eq!(a.winner, b.winner.map(|j| perm[j]));
        prop_assert_eq!(a.feedback, b.feedback);
        prop_assert_eq!(a.winner_metric, b.winner_metric);
        if a.feedback {
            prop_assert!(a.winner.is_some());
            prop_assert!(a.winner_metric - a.runner_up_metric > delta);
        }
    }

    #[test]
    fn threshold_bit_is_strict_comparison(w in -1.0f64..2.0, r in 0.0f64..1.0, d in 0.0f64..0.5) {
        prop_assert_eq!(threshold_decide(w, r, d), w > r + d);
    }
}
