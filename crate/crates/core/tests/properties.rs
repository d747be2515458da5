use iptree::extended::{Finite, NegInf, PosInf};
use iptree::game::{finitary_upper, limit_upper};
use iptree::gambles::expr::{compile, parse_gamble};
use iptree::local::CutSchedule;
use iptree::oracle::{conditional_prob, envelope_sup, precise_expectation, EnvelopeMethod};
use iptree::random;
use iptree::supermartingale::{canonical_supermartingale, certified_upper_bound, verify};
use iptree::tree::{enumerate_compatible, is_compatible, situations_below};
use iptree::{
    ApproxPolicy, CredalSet, Direction, ExtendedReal, FinitaryGamble, LimitVariable, LocalGamble, Situation,
};
use proptest::prelude::*;
use rand::Rng;

fn credal_and_gamble(seed: u64) -> (CredalSet, Vec<f64>) {
    let mut rng = random::rng(seed);
    let k = rng.gen_range(1..=5);
    (random::credal_set(&mut rng, k, 5), random::local_gamble(&mut rng, k, 100.0))
}

fn extended_pair(seed: u64) -> (CredalSet, LocalGamble, LocalGamble) {
    let mut rng = random::rng(seed);
    let k = rng.gen_range(1..=4);
    let credal = random::credal_set(&mut rng, k, 4);
    let f = random::extended_gamble(&mut rng, k, 10.0);
    // g ≥ f pointwise
    let g = LocalGamble::new(
        f.values()
            .iter()
            .map(|v| match (v, rng.gen_range(0..4)) {
                (_, 0) => PosInf,
                (NegInf, 1) => Finite(rng.gen_range(-10.0..10.0)),
                (Finite(x), _) => Finite(x + rng.gen_range(0.0..5.0)),
                (other, _) => *other,
            })
            .collect(),
    );
    (credal, f, g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lower_and_upper_lie_within_the_range(seed in any::<u64>()) {
        let (credal, f) = credal_and_gamble(seed);
        let (inf, sup) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let (lo, up) = (credal.lower(&f), credal.upper(&f));
        prop_assert!(inf - 1e-12 <= lo && lo <= up + 1e-12 && up <= sup + 1e-12, "{inf} {lo} {up} {sup}");
    }

    #[test]
    fn lower_is_the_exact_conjugate(seed in any::<u64>()) {
        let (credal, f) = credal_and_gamble(seed);
        let neg: Vec<f64> = f.iter().map(|x| -x).collect();
        prop_assert_eq!(credal.lower(&f).to_bits(), (-credal.upper(&neg)).to_bits());
    }

    #[test]
    fn extended_value_equals_the_cut_limit(seed in any::<u64>()) {
        let (credal, f, g) = extended_pair(seed);
        let schedule = CutSchedule::default();
        for h in [&f, &g] {
            let direct = credal.extended_upper_expectation(h).unwrap();
            prop_assert_eq!(direct, credal.cut_limit_upper(h, &schedule).unwrap());
        }
    }

    #[test]
    fn constants_are_preserved(seed in any::<u64>(), c in -1e6f64..1e6) {
        let (credal, _) = credal_and_gamble(seed);
        let v = credal.extended_upper_expectation(&LocalGamble::constant(credal.dim(), Finite(c))).unwrap();
        prop_assert!((v.to_f64() - c).abs() <= 1e-9 * (1.0 + c.abs()));
    }

    #[test]
    fn extended_monotonicity(seed in any::<u64>()) {
        let (credal, f, g) = extended_pair(seed);
        let (uf, ug) = (credal.extended_upper_expectation(&f).unwrap(), credal.extended_upper_expectation(&g).unwrap());
        let ok = match (uf, ug) {
            (Finite(a), Finite(b)) => a <= b + 1e-9 * (1.0 + a.abs()),
            _ => uf <= ug,
        };
        prop_assert!(ok, "{uf} > {ug}");
    }

    /// Non-decreasing non-negative sequences that stabilize or diverge: the
    /// value of the pointwise limit is the limit of the values.
    #[test]
    fn monotone_continuity_of_local_models(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let k = rng.gen_range(1..=4);
        let credal = random::credal_set(&mut rng, k, 4);
        let base: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..5.0)).collect();
        let grows: Vec<bool> = (0..k).map(|_| rng.gen_bool(0.3)).collect();
        let stop = rng.gen_range(1..6);
        let at = |n: usize| -> Vec<f64> {
            base.iter()
                .zip(&grows)
                .map(|(&b, &grow)| if grow { b + 10f64.powi(n as i32) } else { b + n.min(stop) as f64 })
                .collect()
        };
        let limit = LocalGamble::new(
            base.iter().zip(&grows).map(|(&b, &grow)| if grow { PosInf } else { Finite(b + stop as f64) }).collect(),
        );
        let expected = credal.extended_upper_expectation(&limit).unwrap();
        let last = credal.upper(&at(300));
        match expected {
            PosInf => prop_assert!(last > 1e250),
            Finite(v) => prop_assert!((last - v).abs() <= 1e-9 * (1.0 + v.abs()), "{last} vs {v}"),
            NegInf => prop_assert!(false, "non-negative sequence cannot reach -inf"),
        }
    }

    #[test]
    fn enumerated_trees_are_compatible(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let k = rng.gen_range(2..=3);
        let q = random::imprecise_tree(&mut rng, k, 3);
        let depth = rng.gen_range(1..=2);
        for p in enumerate_compatible(&q, depth, 1 << 14).unwrap() {
            prop_assert!(is_compatible(&p, &q, Some(depth)));
        }
        let mixed = random::compatible_tree(&mut rng, &q, depth);
        prop_assert!(is_compatible(&mixed, &q, None));
    }

    #[test]
    fn local_models_are_referentially_transparent(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let k = rng.gen_range(2..=3);
        let q = random::imprecise_tree(&mut rng, k, 3);
        let s = random::situation(&mut rng, k, 6);
        let a = q.local_model(&s).unwrap().clone();
        let b = q.local_model(&s.clone()).unwrap();
        prop_assert_eq!(&a, b);
        prop_assert_eq!(q.at_context(&q.context_of(&s)), b);
    }

    #[test]
    fn lifting_does_not_change_expectations(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let k = rng.gen_range(2..=3);
        let q = random::imprecise_tree(&mut rng, k, 3);
        let depth = rng.gen_range(0..=3);
        let f = random::gamble(&mut rng, k, depth, 5.0);
        let s = random::situation(&mut rng, k, depth + 1);
        let lifted = f.lift(depth + rng.gen_range(1..=2));
        prop_assert_eq!(finitary_upper(&q, &f, &s).unwrap(), finitary_upper(&q, &lifted, &s).unwrap());
    }

    #[test]
    fn one_step_gambles_match_the_local_model(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let k = rng.gen_range(2..=3);
        let q = random::imprecise_tree(&mut rng, k, 3);
        let s = random::situation(&mut rng, k, 4);
        let h = random::local_gamble(&mut rng, k, 5.0);
        let n = s.len();
        let g = FinitaryGamble::from_fn(k, n + 1, usize::MAX, |z| h[z.states()[n]]).unwrap();
        prop_assert_eq!(finitary_upper(&q, &g, &s).unwrap(), q.local_model(&s).unwrap().upper(&h));
    }

    #[test]
    fn upper_expectations_are_monotone(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let k = rng.gen_range(2..=3);
        let q = random::imprecise_tree(&mut rng, k, 3);
        let depth = rng.gen_range(1..=3);
        let f = random::gamble(&mut rng, k, depth, 5.0);
        let bump = random::gamble(&mut rng, k, depth, 0.5);
        let g = f.zip_with(&bump, |a, b| a + b + 0.5);
        let s = random::situation(&mut rng, k, depth);
        prop_assert!(finitary_upper(&q, &f, &s).unwrap() <= finitary_upper(&q, &g, &s).unwrap() + 1e-12);
    }

    #[test]
    fn valid_certificates_bound_the_upper_expectation(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let k = rng.gen_range(2..=3);
        let q = random::imprecise_tree(&mut rng, k, 3);
        let depth = rng.gen_range(1..=3);
        let f = random::gamble(&mut rng, k, depth, 5.0);
        let s = random::situation(&mut rng, k, depth);
        // any process above f at depth n, repaired into a supermartingale
        let bump = random::gamble(&mut rng, k, depth, 0.5);
        let m = canonical_supermartingale(&q, &FinitaryGamble::constant(k, 0.0).lift(depth), &Situation::root())
            .unwrap()
            .map(|z, _| if z.len() == depth { Finite(f.value(z) + bump.value(z) + 0.5) } else { Finite(-5.0) })
            .unwrap()
            .supermartingale_envelope(&q);
        let cert = certified_upper_bound(&m, &f, &q, &s).unwrap();
        prop_assert!(cert.valid);
        prop_assert!(cert.bound.to_f64() >= finitary_upper(&q, &f, &s).unwrap() - 1e-9);
    }

    #[test]
    fn sums_of_supermartingales_are_supermartingales(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let k = rng.gen_range(2..=3);
        let q = random::imprecise_tree(&mut rng, k, 3);
        let (da, db) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let a = canonical_supermartingale(&q, &random::gamble(&mut rng, k, da, 5.0), &Situation::root()).unwrap();
        let b = canonical_supermartingale(&q, &random::gamble(&mut rng, k, db, 5.0), &Situation::root()).unwrap();
        prop_assert!(verify(&a, &q).unwrap().passed && verify(&b, &q).unwrap().passed);
        prop_assert!(verify(&(&a + &b), &q).unwrap().passed);
    }

    #[test]
    fn conditional_probabilities_normalize_and_marginalize(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let k = rng.gen_range(2..=3);
        let p = random::precise_tree(&mut rng, k);
        let s = random::situation(&mut rng, k, 2);
        for m in 0..=5 {
            let total: f64 = situations_below(k, m + 1)
                .iter()
                .filter(|z| z.len() == m)
                .map(|z| conditional_prob(&p, z, &s))
                .sum();
            prop_assert!((total - 1.0).abs() <= 1e-12, "m={m}: {total}");
        }
        let z = random::situation(&mut rng, k, 4);
        let split: f64 = (0..k).map(|x| conditional_prob(&p, &z.child(x), &s)).sum();
        prop_assert!((conditional_prob(&p, &z, &s) - split).abs() <= 1e-12);
    }

    /// Mixed (non-extreme) selections never beat the extreme-point envelope.
    #[test]
    fn mixtures_stay_below_the_envelope(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let (q, f, s) = random::oracle_instance(&mut rng, &[2, 3], 3, 3, 1 << 12);
        let env = envelope_sup(&q, &f, &s, EnvelopeMethod::Enumerate, 1 << 12).unwrap();
        let p = random::compatible_tree(&mut rng, &q, f.depth());
        prop_assert!(precise_expectation(&p, &f, &s).unwrap() <= env.value + 1e-12);
    }
}

#[test]
fn non_monotone_sequences_are_rejected_eagerly() {
    let q = random::imprecise_tree(&mut random::rng(1), 2, 2);
    let up = FinitaryGamble::constant(2, 1.0);
    let down = FinitaryGamble::constant(2, 0.0);
    let v = LimitVariable::from_sequence(Direction::NonDecreasing, 0.0, vec![up, down]).unwrap();
    let err = limit_upper(&q, &v, &Situation::root(), &ApproxPolicy::default()).unwrap_err();
    assert!(err.to_string().contains("monoton") || err.to_string().contains("decreas"), "{err}");
}

#[test]
fn expressions_round_trip_through_their_printed_form() {
    let space = iptree::StateSpace::new(["H", "T"]).unwrap();
    for source in [
        "sum(i=1..3, ind(X[i] == H))",
        "max(ind(X[1] == H && X[2] != T), 0.5) * -2",
        "min(1, 2) - 3 + ind(!(X[2] == T) || X[1] == H)",
    ] {
        let parsed = parse_gamble(source, &space).unwrap();
        let printed = parsed.expr.to_string();
        let again = parse_gamble(&printed, &space).unwrap();
        assert_eq!(parsed, again, "{source} -> {printed}");
        let a = compile(&parsed, 2, None, 1 << 12).unwrap();
        let b = compile(&again, 2, None, 1 << 12).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn infinite_values_are_allowed_but_minus_infinity_is_not() {
    let ok = iptree::TailConstantProcess::new(2, vec![vec![PosInf]]);
    assert!(ok.is_ok());
    assert!(iptree::TailConstantProcess::new(2, vec![vec![ExtendedReal::NegInf]]).is_err());
}
