//! Seeded random instances for the property suites and oracle cross-checks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::extended::{Finite, NegInf, PosInf};
use crate::gambles::FinitaryGamble;
use crate::local::{CredalSet, LocalGamble, MassFunction, StateSpace};
use crate::tree::{situations_below, Assignment, ImpreciseTree, PreciseTree, Situation, Tree};

pub use rand::SeedableRng;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn space(k: usize) -> StateSpace {
    StateSpace::new((0..k).map(|i| format!("s{i}"))).expect("distinct labels")
}

/// A random mass function; roughly one in four has a zero weight.
pub fn mass_function(rng: &mut impl Rng, k: usize) -> MassFunction {
    loop {
        let mut w: Vec<f64> = (0..k).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
        if k > 1 && rng.gen_bool(0.25) {
            let zero = rng.gen_range(0..k);
            w[zero] = 0.0;
        }
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return MassFunction::new(w.into_iter().map(|x| x / total).collect()).expect("normalized");
        }
    }
}

pub fn credal_set(rng: &mut impl Rng, k: usize, max_points: usize) -> CredalSet {
    let n = rng.gen_range(1..=max_points.max(1));
    CredalSet::new((0..n).map(|_| mass_function(rng, k)).collect()).expect("same dimension")
}

fn base_assignment<R: Rng, T>(rng: &mut R, k: usize, model: &mut impl FnMut(&mut R) -> T) -> Assignment<T> {
    if rng.gen_bool(0.5) {
        Assignment::Homogeneous(model(rng))
    } else {
        Assignment::Markov {
            initial: model(rng),
            transitions: (0..k).map(|_| model(rng)).collect(),
        }
    }
}

fn assignment<R: Rng, T>(rng: &mut R, k: usize, mut model: impl FnMut(&mut R) -> T) -> Assignment<T> {
    match rng.gen_range(0..3) {
        0 => Assignment::Homogeneous(model(rng)),
        1 => base_assignment(rng, k, &mut model),
        _ => {
            let depth = rng.gen_range(0..=2);
            let mut entries = BTreeMap::new();
            for s in situations_below(k, depth + 1) {
                if rng.gen_bool(0.5) {
                    entries.insert(s, model(rng));
                }
            }
            Assignment::Table {
                depth,
                entries,
                base: Box::new(base_assignment(rng, k, &mut model)),
            }
        }
    }
}

/// A random homogeneous, Markov or table tree.
pub fn imprecise_tree(rng: &mut impl Rng, k: usize, max_points: usize) -> ImpreciseTree {
    let a = assignment(rng, k, |r| credal_set(r, k, max_points));
    Tree::new(space(k), a).expect("consistent dimensions")
}

pub fn precise_tree(rng: &mut impl Rng, k: usize) -> PreciseTree {
    let a = assignment(rng, k, |r| mass_function(r, k));
    Tree::new(space(k), a).expect("consistent dimensions")
}

/// A random compatible precise tree: a random convex combination of extreme
/// points at every situation of length `< depth`, the first point beyond.
pub fn compatible_tree(rng: &mut impl Rng, q: &ImpreciseTree, depth: usize) -> PreciseTree {
    let k = q.k();
    let entries = situations_below(k, depth)
        .into_iter()
        .map(|s| {
            let credal = q.local_model(&s).expect("valid situation");
            let w: Vec<f64> = credal.points().iter().map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = w.iter().sum::<f64>().max(1e-12);
            let mix: Vec<f64> = (0..k)
                .map(|x| credal.points().iter().zip(&w).map(|(p, wi)| p.get(x) * wi / total).sum())
                .collect();
            let p = MassFunction::new(mix).unwrap_or_else(|_| credal.points()[0].clone());
            (s, p)
        })
        .collect();
    Tree::new(
        q.space().clone(),
        Assignment::Table {
            depth: depth.saturating_sub(1),
            entries,
            base: Box::new(q.first_selection().assignment().clone()),
        },
    )
    .expect("consistent dimensions")
}

/// Payoffs uniform in `[-range, range]`.
pub fn gamble(rng: &mut impl Rng, k: usize, depth: usize, range: f64) -> FinitaryGamble {
    let size = k.pow(depth as u32);
    let values = (0..size).map(|_| rng.gen_range(-range..=range)).collect();
    FinitaryGamble::new(k, depth, values).expect("finite payoffs")
}

pub fn situation(rng: &mut impl Rng, k: usize, max_len: usize) -> Situation {
    let len = rng.gen_range(0..=max_len);
    Situation::new((0..len).map(|_| rng.gen_range(0..k)).collect())
}

pub fn local_gamble(rng: &mut impl Rng, k: usize, range: f64) -> Vec<f64> {
    (0..k).map(|_| rng.gen_range(-range..=range)).collect()
}

/// Extended local gamble; each value is `±∞` with probability 0.15 each.
pub fn extended_gamble(rng: &mut impl Rng, k: usize, range: f64) -> LocalGamble {
    LocalGamble::new(
        (0..k)
            .map(|_| match rng.gen_range(0..20) {
                0..=2 => PosInf,
                3..=5 => NegInf,
                _ => Finite(rng.gen_range(-range..=range)),
            })
            .collect(),
    )
}

/// Number of extreme-point selections up to `depth`.
pub fn selection_count(q: &ImpreciseTree, depth: usize) -> u128 {
    situations_below(q.k(), depth)
        .iter()
        .map(|s| q.model_at(s).points().len() as u128)
        .fold(1u128, |a, b| a.saturating_mul(b))
}

/// A tree, gamble and conditioning situation whose selection count stays
/// within `cap`; the depth is lowered until it fits.
pub fn oracle_instance(
    rng: &mut impl Rng,
    ks: &[usize],
    max_depth: usize,
    max_points: usize,
    cap: u128,
) -> (ImpreciseTree, FinitaryGamble, Situation) {
    let k = *ks.choose(rng).expect("non-empty");
    let q = imprecise_tree(rng, k, max_points);
    let (f, s) = oracle_gamble(rng, &q, max_depth, cap);
    (q, f, s)
}

/// A gamble and conditioning situation for a fixed tree, with the depth
/// lowered until the selection count fits within `cap`.
pub fn oracle_gamble(rng: &mut impl Rng, q: &ImpreciseTree, max_depth: usize, cap: u128) -> (FinitaryGamble, Situation) {
    let k = q.k();
    let mut depth = rng.gen_range(1..=max_depth.max(1));
    while depth > 1 && selection_count(q, depth) > cap {
        depth -= 1;
    }
    let f = gamble(rng, k, depth, 5.0);
    let s = situation(rng, k, depth);
    (f, s)
}
