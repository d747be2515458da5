//! Measure-theoretic cross-checks at finite depth.
//!
//! A precise tree determines conditional probabilities of finite strings by
//! multiplying its one-step mass functions; the expectation of a finitary
//! gamble is then a finite weighted sum. The upper envelope of these
//! expectations over all compatible precise trees is an independent route to
//! the global upper expectation, computed here by brute-force enumeration of
//! extreme-point selections.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::game::{self, forward_expectation, ApproxPolicy, ApproxResult, SequentialPolicy};
use crate::gambles::{Approximant, FinitaryGamble, LimitVariable, SequentialGamble};
use crate::tree::{enumerate_compatible, is_compatible, ImpreciseTree, PreciseTree, Situation};

/// Enumerations at most this large keep every per-selection value in the report.
pub const AUDIT_TRAIL_LIMIT: u128 = 64;

/// Tolerance for domination verdicts.
pub const DOMINATION_TOLERANCE: f64 = 1e-9;

/// `P(z | x)` for a precise tree.
///
/// With `n = |x|` and `m = |z|`: the product `Π_{i=n}^{m−1} p(z_{i+1} | z_{1:i})`
/// when `n < m` and `z` extends `x`; `1` when `n ≥ m` and `x` extends `z`;
/// `0` otherwise.
pub fn conditional_prob(p: &PreciseTree, z: &Situation, x: &Situation) -> f64 {
    let (n, m) = (x.len(), z.len());
    if n < m {
        if !z.starts_with(x) {
            return 0.0;
        }
        let mut prob = 1.0;
        for i in n..m {
            prob *= p.model_at(&z.prefix(i)).get(z.states()[i]);
        }
        prob
    } else if x.starts_with(z) {
        1.0
    } else {
        0.0
    }
}

/// `Σ_z f(z) P(z | s)` over all strings `z` of length `depth(f)`.
///
/// Strings not extending `s` have probability zero and are skipped; the
/// remaining probabilities are built prefix by prefix from the same product.
pub fn precise_expectation(p: &PreciseTree, f: &FinitaryGamble, s: &Situation) -> Result<f64> {
    if f.k() != p.k() {
        return Err(Error::invalid("gamble and tree have different state spaces"));
    }
    s.validate(p.space())?;
    let n = f.depth();
    if s.len() >= n {
        return Ok(f.value(s));
    }
    let k = p.k();
    let mut probs = vec![1.0];
    for m in s.len()..n {
        let mut next = Vec::with_capacity(probs.len() * k);
        for (j, &prob) in probs.iter().enumerate() {
            let mut states = s.states().to_vec();
            states.extend_from_slice(Situation::from_rank(j, m - s.len(), k).states());
            let mass = p.model_at(&Situation::new(states));
            next.extend((0..k).map(|x| prob * mass.get(x)));
        }
        probs = next;
    }
    Ok(f.block(s).iter().zip(&probs).map(|(v, q)| v * q).sum())
}

/// Expectation of a sequential gamble under a precise tree, by forward
/// propagation of probability mass.
pub fn precise_sequential_expectation<G: SequentialGamble + ?Sized>(
    p: &PreciseTree,
    g: &G,
    s: &Situation,
) -> Result<f64> {
    s.validate(p.space())?;
    Ok(forward_expectation(p, g, s, |_, _, ctx| p.at_context(ctx).clone()))
}

/// Expectation of a sequential gamble under the precise tree that follows a
/// maximizing policy of `q` (first extreme point where the policy is silent).
pub fn policy_expectation<G: SequentialGamble + ?Sized>(
    q: &ImpreciseTree,
    policy: &SequentialPolicy,
    g: &G,
    s: &Situation,
) -> Result<f64> {
    s.validate(q.space())?;
    Ok(forward_expectation(q, g, s, |level, key, ctx| {
        q.at_context(ctx).points()[policy.choice(level, key, ctx)].clone()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMethod {
    Enumerate,
    Recursion,
}

#[derive(Debug, Clone)]
pub struct Envelope {
    pub value: f64,
    /// The maximizing selection (enumeration only; first maximizer wins).
    pub argmax: Option<PreciseTree>,
    /// Number of compatible trees examined.
    pub examined: u128,
    /// Per-selection values, for enumerations of at most [`AUDIT_TRAIL_LIMIT`] trees.
    pub per_selection: Option<Vec<f64>>,
}

/// Upper envelope of precise expectations over compatible trees.
pub fn envelope_sup(
    q: &ImpreciseTree,
    f: &FinitaryGamble,
    s: &Situation,
    method: EnvelopeMethod,
    cap: u128,
) -> Result<Envelope> {
    match method {
        EnvelopeMethod::Recursion => Ok(Envelope {
            value: game::finitary_upper(q, f, s)?,
            argmax: None,
            examined: 0,
            per_selection: None,
        }),
        EnvelopeMethod::Enumerate => {
            let trees = enumerate_compatible(q, f.depth(), cap)?;
            let total = trees.total();
            let mut per_selection = (total <= AUDIT_TRAIL_LIMIT).then(Vec::new);
            let mut best: Option<(f64, PreciseTree)> = None;
            for p in trees {
                let v = precise_expectation(&p, f, s)?;
                if let Some(list) = per_selection.as_mut() {
                    list.push(v);
                }
                if best.as_ref().is_none_or(|(b, _)| v > *b) {
                    best = Some((v, p));
                }
            }
            let (value, argmax) = best.expect("at least one compatible tree");
            Ok(Envelope {
                value,
                argmax: Some(argmax),
                examined: total,
                per_selection,
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleVerdict {
    pub sample: usize,
    pub iterates: Vec<(usize, f64)>,
    pub precise_limit: f64,
    pub dominated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdversarialGap {
    pub horizon: usize,
    /// Upper expectation of the approximant at this horizon.
    pub upper_at_horizon: f64,
    /// Its expectation under the maximizing selection, by forward propagation.
    pub precise_at_horizon: f64,
    /// `limit upper − precise_at_horizon`.
    pub gap_to_limit: ExtendedReal,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub upper: ApproxResult,
    pub samples: Vec<SampleVerdict>,
    pub adversarial: AdversarialGap,
    pub passed: bool,
}

fn precise_approximant(p: &PreciseTree, a: &Approximant, s: &Situation) -> Result<f64> {
    match a {
        Approximant::Dense(f) => precise_expectation(p, f, s),
        Approximant::Hitting(h) => precise_sequential_expectation(p, h, s),
    }
}

/// Checks that every sampled compatible precise tree gives a limit
/// expectation no larger than the engine's upper expectation, and measures
/// how close the maximizing selection at the final horizon comes to it.
pub fn domination_check(
    q: &ImpreciseTree,
    v: &LimitVariable,
    s: &Situation,
    samples: &[PreciseTree],
    policy: &ApproxPolicy,
) -> Result<DominationReport> {
    for (i, p) in samples.iter().enumerate() {
        if !is_compatible(p, q, None) {
            return Err(Error::invalid(format!("sample {i} is not compatible with the model")));
        }
    }
    let upper = game::limit_upper(q, v, s, policy)?;
    let upper_value = upper.value;
    let horizon = upper.iterates.last().map_or(1, |&(m, _)| m);

    let mut verdicts = Vec::with_capacity(samples.len());
    for (i, p) in samples.iter().enumerate() {
        let mut iterates = Vec::new();
        for m in 1..=horizon {
            let a = v.approximant(m)?;
            let value = precise_approximant(p, &a, s)?;
            let done = iterates.last().is_some_and(|&(_, last): &(usize, f64)| (value - last).abs() < policy.tol);
            iterates.push((m, value));
            if done {
                break;
            }
        }
        let precise_limit = iterates.last().map_or(0.0, |&(_, x)| x);
        let dominated = match upper_value {
            ExtendedReal::PosInf => true,
            ExtendedReal::NegInf => false,
            ExtendedReal::Finite(u) => precise_limit <= u + DOMINATION_TOLERANCE,
        };
        verdicts.push(SampleVerdict {
            sample: i,
            iterates,
            precise_limit,
            dominated,
        });
    }

    let a = v.approximant(horizon)?;
    let (upper_at_horizon, precise_at_horizon) = match &a {
        Approximant::Hitting(h) => {
            let (value, pol) = game::sequential_upper_with_policy(q, h, s)?;
            (value, policy_expectation(q, &pol, h, s)?)
        }
        Approximant::Dense(f) => {
            let p = game::adversarial_selection(q, f, s)?;
            (game::finitary_upper(q, f, s)?, precise_expectation(&p, f, s)?)
        }
    };
    let adversarial = AdversarialGap {
        horizon,
        upper_at_horizon,
        precise_at_horizon,
        gap_to_limit: upper_value + ExtendedReal::Finite(-precise_at_horizon),
    };
    let passed = verdicts.iter().all(|v| v.dominated);
    Ok(DominationReport {
        upper,
        samples: verdicts,
        adversarial,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gambles::{compile, parse_gamble, DEFAULT_TABLE_CAP};
    use crate::local::{CredalSet, MassFunction, StateSpace};
    use crate::tree::{situations_below, Assignment, Tree, DEFAULT_ENUMERATION_CAP};

    fn space() -> StateSpace {
        StateSpace::new(["H", "T"]).unwrap()
    }

    fn precise(h: f64) -> PreciseTree {
        Tree::new(space(), Assignment::Homogeneous(MassFunction::new(vec![h, 1.0 - h]).unwrap())).unwrap()
    }

    fn coin() -> ImpreciseTree {
        ImpreciseTree::homogeneous(space(), CredalSet::from_weights(vec![vec![0.4, 0.6], vec![0.6, 0.4]]).unwrap())
            .unwrap()
    }

    fn gamble(src: &str) -> FinitaryGamble {
        compile(&parse_gamble(src, &space()).unwrap(), 2, None, DEFAULT_TABLE_CAP).unwrap()
    }

    fn sit(v: &[usize]) -> Situation {
        Situation::new(v.to_vec())
    }

    #[test]
    fn conditional_probability_cases() {
        let fair = precise(0.5);
        assert_eq!(conditional_prob(&fair, &sit(&[0, 0]), &Situation::root()), 0.25);
        assert_eq!(conditional_prob(&fair, &sit(&[0]), &sit(&[0, 1])), 1.0);
        assert_eq!(conditional_prob(&fair, &sit(&[1, 0]), &sit(&[0])), 0.0);
        let s = sit(&[1, 0, 1]);
        assert_eq!(conditional_prob(&fair, &s, &s), 1.0);
    }

    #[test]
    fn normalization_and_marginalization() {
        let p = Tree::new(
            space(),
            Assignment::Markov {
                initial: MassFunction::new(vec![0.3, 0.7]).unwrap(),
                transitions: vec![
                    MassFunction::new(vec![0.9, 0.1]).unwrap(),
                    MassFunction::new(vec![0.25, 0.75]).unwrap(),
                ],
            },
        )
        .unwrap();
        for s in [Situation::root(), sit(&[1]), sit(&[0, 1])] {
            for m in 0..=5 {
                let total: f64 = (0..1usize << m)
                    .map(|r| conditional_prob(&p, &Situation::from_rank(r, m, 2), &s))
                    .sum();
                assert!((total - 1.0).abs() < 1e-12, "m={m} s={s}: {total}");
            }
            for z in situations_below(2, 4) {
                let direct = conditional_prob(&p, &z, &s);
                let split: f64 = (0..2).map(|x| conditional_prob(&p, &z.child(x), &s)).sum();
                assert!((direct - split).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn precise_expectation_examples() {
        let fair = precise(0.5);
        let heads = gamble("ind(X[1]==H) + ind(X[2]==H)");
        assert_eq!(precise_expectation(&fair, &heads, &Situation::root()).unwrap(), 1.0);
        let second = gamble("ind(X[2]==H)");
        assert_eq!(precise_expectation(&fair, &second, &sit(&[1])).unwrap(), 0.5);
        let biased = precise(0.6);
        let hh = gamble("ind(X[1]==H && X[2]==H)");
        assert!((precise_expectation(&biased, &hh, &Situation::root()).unwrap() - 0.36).abs() < 1e-15);
    }

    #[test]
    fn enumeration_finds_the_two_heads_adversary() {
        let hh = gamble("ind(X[1]==H && X[2]==H)");
        let env = envelope_sup(&coin(), &hh, &Situation::root(), EnvelopeMethod::Enumerate, DEFAULT_ENUMERATION_CAP)
            .unwrap();
        assert_eq!(env.examined, 8);
        assert!((env.value - 0.36).abs() < 1e-15);
        assert_eq!(env.per_selection.as_ref().unwrap().len(), 8);
        let argmax = env.argmax.unwrap();
        assert_eq!(argmax.model_at(&Situation::root()).get(0), 0.6);
        assert_eq!(argmax.model_at(&sit(&[0])).get(0), 0.6);
        let rec = envelope_sup(&coin(), &hh, &Situation::root(), EnvelopeMethod::Recursion, 0).unwrap();
        assert!((rec.value - env.value).abs() < 1e-12);
    }

    #[test]
    fn singleton_envelope_is_the_precise_expectation() {
        let p = precise(0.3);
        let f = gamble("sum(i=1..3, ind(X[i]==T)) * 2 - 1");
        let env = envelope_sup(&p.to_imprecise(), &f, &Situation::root(), EnvelopeMethod::Enumerate, 16).unwrap();
        assert_eq!(env.examined, 1);
        assert_eq!(env.value, precise_expectation(&p, &f, &Situation::root()).unwrap());
    }

    #[test]
    fn domination_for_hitting_times() {
        let v = LimitVariable::hitting_time(2, &[1]).unwrap();
        let policy = ApproxPolicy {
            tol: 1e-13,
            max_horizon: 80,
            ..Default::default()
        };
        let report = domination_check(&coin(), &v, &Situation::root(), &[precise(0.5)], &policy).unwrap();
        assert!(report.passed);
        assert!((report.samples[0].precise_limit - 2.0).abs() < 1e-9);
        assert!(report.adversarial.gap_to_limit.to_f64().abs() < 1e-6);
        assert!(domination_check(&coin(), &v, &Situation::root(), &[precise(0.7)], &policy).is_err());
    }
}
