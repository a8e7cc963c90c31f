mod common;

use common::{bsc, dist, random_instance};
use nts_core::oracle::{beats, min_over_small_supports};
use nts_core::simulate::{natural_decode, Codebook};
use nts_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `(p_error, p_correct_strict, p_feedback1, p_feedback1_total)` by summing
/// over every codebook and output sequence, message 0 transmitted.
fn exhaustive(n: usize, m: usize, delta: f64, q: &Distribution, p: &Channel) -> [f64; 4] {
    let words: Vec<Vec<u8>> = (0..1usize << n)
        .map(|w| (0..n).map(|i| ((w >> i) & 1) as u8).collect())
        .collect();
    let word_prob = |w: &[u8]| w.iter().map(|&a| q.probs()[a as usize]).product::<f64>();
    let mut out = [0.0; 4];
    let mut idx = vec![0usize; m];
    loop {
        let rows: Vec<Vec<u8>> = idx.iter().map(|&i| words[i].clone()).collect();
        let pc: f64 = rows.iter().map(|w| word_prob(w)).product();
        let cb = Codebook::from_rows(&rows).unwrap();
        for y in &words {
            let py: f64 = rows[0]
                .iter()
                .zip(y)
                .map(|(&a, &b)| p.p(a as usize, b as usize))
                .product();
            let r = natural_decode(&cb, y, q, delta);
            let w = pc * py;
            if r.winner == Some(0) {
                out[1] += w;
                if r.feedback {
                    out[2] += w;
                }
            } else {
                out[0] += w;
            }
            if r.feedback {
                out[3] += w;
            }
        }
        let mut k = 0;
        while k < m {
            idx[k] += 1;
            if idx[k] < words.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == m {
            break;
        }
    }
    out
}

#[test]
fn exact_matches_exhaustive_enumeration() {
    let p = bsc(0.1);
    for q in [Distribution::uniform(2).unwrap(), dist(&[0.7, 0.3])] {
        for delta in [0.0, 0.2, 0.5] {
            let rep = exact_finite_n(2, 3f64.ln() / 2.0, delta, &q, &p).unwrap();
            assert_eq!(rep.m, 3);
            let ex = exhaustive(2, 3, delta, &q, &p);
            let got = [rep.p_error, rep.p_correct_strict, rep.p_feedback1, rep.p_feedback1_total];
            for (a, b) in got.iter().zip(&ex) {
                assert!((a - b).abs() < 1e-12, "q {:?} delta {delta}: {got:?} vs {ex:?}", q.probs());
            }
        }
    }
}

#[test]
fn exact_matches_exhaustive_enumeration_n3() {
    let p = Channel::new(vec![vec![0.8, 0.2], vec![0.35, 0.65]]).unwrap();
    let q = dist(&[0.4, 0.6]);
    for m in [1usize, 2, 4] {
        let rate = (m as f64 - 0.5).max(0.5).ln() / 3.0;
        let rep = exact_finite_n(3, rate.max(0.0), 0.1, &q, &p).unwrap();
        assert_eq!(rep.m as usize, m);
        let ex = exhaustive(3, m, 0.1, &q, &p);
        let got = [rep.p_error, rep.p_correct_strict, rep.p_feedback1, rep.p_feedback1_total];
        for (a, b) in got.iter().zip(&ex) {
            assert!((a - b).abs() < 1e-12, "m {m}: {got:?} vs {ex:?}");
        }
    }
}

#[test]
fn exact_report_consistency() {
    let p = bsc(0.1);
    let q = dist(&[0.6, 0.4]);
    let rep = exact_finite_n(6, 0.3, 0.1, &q, &p).unwrap();
    let total: f64 = rep.per_type_breakdown.iter().map(|t| t.probability).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!((rep.p_error + rep.p_correct_strict - 1.0).abs() < 1e-12);
    assert!(rep.p_feedback1 <= rep.p_correct_strict + 1e-15);
    assert!(rep.p_feedback1 <= rep.p_feedback1_total + 1e-15);
    let inf = exact_finite_n(6, 0.3, f64::INFINITY, &q, &p).unwrap();
    assert_eq!(inf.p_feedback1, 0.0);
    assert_eq!(inf.p_feedback1_total, 0.0);
    assert!(matches!(
        exact_finite_n(40, 1.0, 0.0, &q, &p).unwrap_err(),
        Error::Resource(_)
    ));
}

#[test]
fn feedback_probability_decreases_with_margin() {
    let p = bsc(0.1);
    let q = Distribution::uniform(2).unwrap();
    let mut last = 1.0;
    for delta in [0.0, 0.05, 0.1, 0.2, 0.4] {
        let v = exact_finite_n(8, 0.25, delta, &q, &p).unwrap().p_feedback1;
        assert!(v <= last);
        last = v;
    }
}

#[test]
fn implicit_examples() {
    let p = bsc(0.1);
    let q = Distribution::uniform(2).unwrap();
    let explicit = error_exponent(0.1, &q, &p).unwrap().value;
    let implicit = implicit_exponent(ImplicitKind::ErrorIid, 0.1, &q, &p, 60).unwrap();
    assert!((explicit - implicit).abs() < 2e-2);
    assert_eq!(implicit_exponent(ImplicitKind::ErrorIid, 0.4, &q, &p, 60).unwrap(), 0.0);
    assert_eq!(
        implicit_exponent(ImplicitKind::CorrectStrict, 2.0, &q, &p, 60).unwrap(),
        f64::INFINITY
    );
}

#[test]
fn constant_composition_examples() {
    let q = Distribution::uniform(2).unwrap();
    let id = Channel::identity(2).unwrap();
    assert!(cc_bound(ImplicitKind::CorrectMl, 2f64.ln(), &q, &id, 60).unwrap().abs() < 1e-9);
    let q = dist(&[0.8, 0.2]);
    let over = q.entropy() + 0.01;
    assert_eq!(cc_bound(ImplicitKind::CorrectStrict, over, &q, &bsc(0.2), 60).unwrap(), f64::INFINITY);
    // Pinning the input marginal can only raise the correct-decoding minimum.
    let r = 0.5;
    let iid = implicit_exponent(ImplicitKind::CorrectMl, r, &q, &bsc(0.2), 60).unwrap();
    let cc = cc_bound(ImplicitKind::CorrectMl, r, &q, &bsc(0.2), 60).unwrap();
    assert!(cc >= iid - 1e-9);
}

#[test]
fn strict_implicit_dominates_ml() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let (p, q) = random_instance(&mut rng, 2, 2);
        let o = oracle::ImplicitOracle::new(&q, &p, 40).unwrap();
        let i = o.reference_metric();
        for f in [1.1, 1.5, 2.0] {
            let ml = o.value(ImplicitKind::CorrectMl, i * f);
            let strict = o.value(ImplicitKind::CorrectStrict, i * f);
            assert!(strict >= ml - 1e-12);
        }
    }
}

#[test]
fn small_support_examples() {
    let r = min_over_small_supports(0.3, &Channel::identity(2).unwrap(), 60).unwrap();
    assert!((r.value - 0.3).abs() < 1e-9);
    assert_eq!(r.worst_support.len(), 1);
    let r = min_over_small_supports(0.2, &bsc(0.1), 60).unwrap();
    assert!((r.value - 0.2).abs() < 1e-9);
    let r = min_over_small_supports(0.0, &bsc(0.1), 60).unwrap();
    assert_eq!(r.value, f64::INFINITY);
    assert!(r.worst_support.is_empty());
}

#[test]
fn tie_rule() {
    assert!(!beats(1.0, 1.0, 0.0));
    assert!(!beats(1.0 + 1e-12, 1.0, 0.0));
    assert!(beats(1.0 + 1e-6, 1.0, 0.0));
    assert!(!beats(1.5, 1.0, 0.5));
    assert!(!beats(f64::INFINITY, 1.0, f64::INFINITY));
}
