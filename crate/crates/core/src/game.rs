//! Global upper and lower expectations.
//!
//! For a finitary gamble `f` of depth `n` the global upper expectation in a
//! situation `s` is obtained by backward recursion: `g_n = f` and
//! `g_m(x_{1:m}) = Q̄_{x_{1:m}}(g_{m+1}(x_{1:m} ·))` for `m = n−1, …, |s|`. The
//! answer is `g_{|s|}(s)`. This is the unique most conservative model that is
//! compatible with the local models and satisfies the law of iterated upper
//! expectations, and it coincides with the game-theoretic upper expectation
//! (the infimum starting capital of a dominating bounded-below supermartingale).
//!
//! Limit variables are handled through their monotone approximating
//! sequences: the upper expectation of the limit is the limit of the upper
//! expectations of the approximants.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, Finite, NegInf, PosInf};
use crate::gambles::{Approximant, Direction, EventSpec, FinitaryGamble, Indicator, LimitVariable, SequentialGamble};
use crate::local::MassFunction;
use crate::tree::{Assignment, Context, ImpreciseTree, PreciseTree, Situation, Tree};

/// Levels with at least this many situations are maximized in parallel.
const PARALLEL_LEVEL: usize = 4096;

fn check_inputs(tree: &ImpreciseTree, k: usize, s: &Situation) -> Result<()> {
    if k != tree.k() {
        return Err(Error::invalid(format!(
            "gamble is over {k} states, the tree over {}",
            tree.k()
        )));
    }
    s.validate(tree.space())
}

/// One backward step: maximizes over each situation of length `m` extending `s`.
fn backward_level(
    tree: &ImpreciseTree,
    s: &Situation,
    m: usize,
    next: &[f64],
    argmax: Option<&mut Vec<usize>>,
) -> Vec<f64> {
    let k = tree.k();
    let count = next.len() / k;
    let tail = m - s.len();
    let solve = |j: usize| -> (f64, usize) {
        let mut states = s.states().to_vec();
        states.extend_from_slice(Situation::from_rank(j, tail, k).states());
        let credal = tree.model_at(&Situation::new(states));
        credal.upper_with_argmax(&next[j * k..(j + 1) * k])
    };
    let solved: Vec<(f64, usize)> = if count >= PARALLEL_LEVEL {
        (0..count).into_par_iter().map(solve).collect()
    } else {
        (0..count).map(solve).collect()
    };
    if let Some(out) = argmax {
        *out = solved.iter().map(|&(_, i)| i).collect();
    }
    solved.into_iter().map(|(v, _)| v).collect()
}

/// Upper expectation of a finitary gamble conditional on `s`, by dense
/// level-by-level backward recursion.
pub fn finitary_upper(tree: &ImpreciseTree, f: &FinitaryGamble, s: &Situation) -> Result<f64> {
    check_inputs(tree, f.k(), s)?;
    if s.len() >= f.depth() {
        return Ok(f.value(s));
    }
    let mut level = f.block(s).to_vec();
    for m in (s.len()..f.depth()).rev() {
        level = backward_level(tree, s, m, &level, None);
    }
    Ok(level[0])
}

/// Lower expectation by conjugacy.
pub fn finitary_lower(tree: &ImpreciseTree, f: &FinitaryGamble, s: &Situation) -> Result<f64> {
    Ok(-finitary_upper(tree, &f.neg(), s)?)
}

/// The backward-recursion values `Q̄(f | t)` for every `t` extending `s` with
/// `|s| ≤ |t| ≤ depth(f)`, one vector per level (indexed by the rank of the
/// part of `t` beyond `s`), together with the lowest-index maximizing extreme
/// point at every non-terminal situation.
pub struct Recursion {
    pub values: Vec<Vec<f64>>,
    pub argmax: Vec<Vec<usize>>,
}

pub fn finitary_recursion(tree: &ImpreciseTree, f: &FinitaryGamble, s: &Situation) -> Result<Recursion> {
    check_inputs(tree, f.k(), s)?;
    let n = f.depth().max(s.len());
    let f = f.lift(n);
    let levels = n - s.len();
    let mut values = vec![Vec::new(); levels + 1];
    let mut argmax = vec![Vec::new(); levels];
    values[levels] = f.block(s).to_vec();
    for m in (s.len()..n).rev() {
        let i = m - s.len();
        values[i] = backward_level(tree, s, m, &values[i + 1], Some(&mut argmax[i]));
    }
    Ok(Recursion { values, argmax })
}

/// A precise tree that attains the upper expectation of `f` given `s`: it
/// picks the maximizing extreme point (lowest index on ties) at every
/// situation extending `s` below the gamble's depth, and the first extreme
/// point elsewhere.
pub fn adversarial_selection(tree: &ImpreciseTree, f: &FinitaryGamble, s: &Situation) -> Result<PreciseTree> {
    let rec = finitary_recursion(tree, f, s)?;
    let k = tree.k();
    let mut entries = std::collections::BTreeMap::new();
    for (i, choices) in rec.argmax.iter().enumerate() {
        for (j, &choice) in choices.iter().enumerate() {
            let mut states = s.states().to_vec();
            states.extend_from_slice(Situation::from_rank(j, i, k).states());
            let t = Situation::new(states);
            let p = tree.model_at(&t).points()[choice].clone();
            entries.insert(t, p);
        }
    }
    let depth = entries.keys().map(Situation::len).max().unwrap_or(0);
    let base = tree.first_selection();
    Tree::new(
        tree.space().clone(),
        Assignment::Table {
            depth,
            entries,
            base: Box::new(base.assignment().clone()),
        },
    )
}

/// Reachable `(automaton key, tree context)` pairs, level by level, starting
/// from `s`. `children[t][i]` lists the successor indices of node `i` at level `t`.
pub(crate) struct ProductChain {
    pub nodes: Vec<Vec<(u64, Context)>>,
    pub children: Vec<Vec<Vec<usize>>>,
}

pub(crate) fn product_chain<T, G: SequentialGamble + ?Sized>(tree: &Tree<T>, g: &G, s: &Situation) -> ProductChain {
    let k = tree.k();
    let start = (g.key_after(s), tree.context_of(s));
    let mut nodes = vec![vec![start]];
    let mut children = Vec::new();
    for t in s.len()..g.depth() {
        let mut index: HashMap<(u64, Context), usize> = HashMap::new();
        let mut next_nodes = Vec::new();
        let mut links = Vec::with_capacity(nodes.last().map_or(0, Vec::len));
        for (key, ctx) in nodes.last().expect("non-empty") {
            let mut kids = Vec::with_capacity(k);
            for x in 0..k {
                let child = (g.advance(*key, t + 1, x), tree.next_context(ctx, x));
                let id = *index.entry(child.clone()).or_insert_with(|| {
                    next_nodes.push(child);
                    next_nodes.len() - 1
                });
                kids.push(id);
            }
            links.push(kids);
        }
        children.push(links);
        nodes.push(next_nodes);
    }
    ProductChain { nodes, children }
}

/// Maximizing extreme point per `(level, key, context)` of a sequential recursion.
#[derive(Debug, Clone, Default)]
pub struct SequentialPolicy {
    pub(crate) choices: HashMap<(usize, u64, Context), usize>,
}

impl SequentialPolicy {
    pub fn choice(&self, level: usize, key: u64, ctx: &Context) -> usize {
        self.choices.get(&(level, key, ctx.clone())).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }
}

/// Upper expectation of a sequential gamble by backward recursion over the
/// product of automaton keys and tree contexts, with the maximizing policy.
///
/// Equal to [`finitary_upper`] on the tabulated gamble; the state space of
/// the recursion is the set of reachable `(key, context)` pairs rather than
/// all `k^n` strings.
pub fn sequential_upper_with_policy<G: SequentialGamble + ?Sized>(
    tree: &ImpreciseTree,
    g: &G,
    s: &Situation,
) -> Result<(f64, SequentialPolicy)> {
    s.validate(tree.space())?;
    let mut policy = SequentialPolicy::default();
    if s.len() >= g.depth() {
        return Ok((g.payoff(g.key_after(s)), policy));
    }
    let chain = product_chain(tree, g, s);
    let mut values: Vec<f64> = chain.nodes.last().expect("levels").iter().map(|(key, _)| g.payoff(*key)).collect();
    let mut buf = vec![0.0; tree.k()];
    for level in (0..chain.children.len()).rev() {
        let mut next_values = Vec::with_capacity(chain.nodes[level].len());
        for ((key, ctx), kids) in chain.nodes[level].iter().zip(&chain.children[level]) {
            for (slot, &kid) in buf.iter_mut().zip(kids) {
                *slot = values[kid];
            }
            let (v, arg) = tree.at_context(ctx).upper_with_argmax(&buf);
            policy.choices.insert((s.len() + level, *key, ctx.clone()), arg);
            next_values.push(v);
        }
        values = next_values;
    }
    Ok((values[0], policy))
}

pub fn sequential_upper<G: SequentialGamble + ?Sized>(tree: &ImpreciseTree, g: &G, s: &Situation) -> Result<f64> {
    sequential_upper_with_policy(tree, g, s).map(|(v, _)| v)
}

fn approximant_upper(tree: &ImpreciseTree, a: &Approximant, s: &Situation) -> Result<f64> {
    match a {
        Approximant::Dense(f) => finitary_upper(tree, f, s),
        Approximant::Hitting(h) => sequential_upper(tree, h, s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxPolicy {
    pub tol: f64,
    pub max_horizon: usize,
    pub divergence_threshold: f64,
}

impl Default for ApproxPolicy {
    fn default() -> Self {
        ApproxPolicy {
            tol: 1e-9,
            max_horizon: 200,
            divergence_threshold: 1e12,
        }
    }
}

impl ApproxPolicy {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0;
        if !positive(self.tol) || self.max_horizon == 0 || !positive(self.divergence_threshold) {
            return Err(Error::invalid("policy values must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StopReason {
    Stabilized { tol: f64 },
    HorizonCap,
    Diverging,
}

/// Result of a monotone approximation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxResult {
    pub value: ExtendedReal,
    pub iterates: Vec<(usize, f64)>,
    pub converged: bool,
    /// Horizon of the first iterate within `tol` of its successor.
    pub converged_at: Option<usize>,
    pub stop_reason: StopReason,
}

impl ApproxResult {
    fn negated(self) -> ApproxResult {
        ApproxResult {
            value: -self.value,
            iterates: self.iterates.into_iter().map(|(m, v)| (m, -v)).collect(),
            ..self
        }
    }

    /// The iterate at horizon `m`, if computed.
    pub fn iterate(&self, m: usize) -> Option<f64> {
        self.iterates.iter().find(|(h, _)| *h == m).map(|(_, v)| *v)
    }
}

/// Upper expectation of a limit variable as the limit of the upper
/// expectations of its approximants.
pub fn limit_upper(tree: &ImpreciseTree, v: &LimitVariable, s: &Situation, policy: &ApproxPolicy) -> Result<ApproxResult> {
    policy.validate()?;
    s.validate(tree.space())?;
    let mut iterates: Vec<(usize, f64)> = Vec::new();
    let mut previous: Option<Approximant> = None;
    for m in 1..=policy.max_horizon {
        let a = v.approximant(m)?;
        v.check_bound(m, &a)?;
        if let Some(prev) = &previous {
            v.check_step(m, prev, &a)?;
        }
        let value = approximant_upper(tree, &a, s)?;
        if let Some(&(_, last)) = iterates.last() {
            let slack = 1e-9 * (1.0 + last.abs());
            let backwards = match v.direction {
                Direction::NonDecreasing => value < last - slack,
                Direction::NonIncreasing => value > last + slack,
            };
            if backwards {
                return Err(Error::invalid(format!(
                    "iterates are not monotone: {last} at horizon {} then {value} at {m}",
                    m - 1
                )));
            }
        }
        iterates.push((m, value));
        if iterates.len() >= 2 {
            let last = iterates[iterates.len() - 2].1;
            if (value - last).abs() < policy.tol {
                return Ok(ApproxResult {
                    value: Finite(value),
                    iterates,
                    converged: true,
                    converged_at: Some(m - 1),
                    stop_reason: StopReason::Stabilized { tol: policy.tol },
                });
            }
        }
        let diverging = match v.direction {
            Direction::NonDecreasing => value > policy.divergence_threshold,
            Direction::NonIncreasing => value < -policy.divergence_threshold,
        };
        if diverging {
            return Ok(ApproxResult {
                value: if v.direction == Direction::NonDecreasing { PosInf } else { NegInf },
                iterates,
                converged: false,
                converged_at: None,
                stop_reason: StopReason::Diverging,
            });
        }
        previous = Some(a);
    }
    let value = Finite(iterates.last().map_or(0.0, |&(_, v)| v));
    Ok(ApproxResult {
        value,
        iterates,
        converged: false,
        converged_at: None,
        stop_reason: StopReason::HorizonCap,
    })
}

/// Lower expectation of a limit variable, `−E(−v | s)`.
pub fn limit_lower(tree: &ImpreciseTree, v: &LimitVariable, s: &Situation, policy: &ApproxPolicy) -> Result<ApproxResult> {
    Ok(limit_upper(tree, &v.negated(), s, policy)?.negated())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Probability {
    Exact(f64),
    Approx(ApproxResult),
}

impl Probability {
    pub fn value(&self) -> f64 {
        match self {
            Probability::Exact(v) => *v,
            Probability::Approx(r) => r.value.to_f64(),
        }
    }
}

pub fn upper_probability(
    tree: &ImpreciseTree,
    event: &EventSpec,
    s: &Situation,
    policy: &ApproxPolicy,
    cap: usize,
) -> Result<Probability> {
    match event.indicator(tree.k(), cap)? {
        Indicator::Finitary(f) => finitary_upper(tree, &f, s).map(Probability::Exact),
        Indicator::Limit(v) => limit_upper(tree, &v, s, policy).map(Probability::Approx),
    }
}

pub fn lower_probability(
    tree: &ImpreciseTree,
    event: &EventSpec,
    s: &Situation,
    policy: &ApproxPolicy,
    cap: usize,
) -> Result<Probability> {
    match event.indicator(tree.k(), cap)? {
        Indicator::Finitary(f) => finitary_lower(tree, &f, s).map(Probability::Exact),
        Indicator::Limit(v) => limit_lower(tree, &v, s, policy).map(Probability::Approx),
    }
}

/// Forward propagation of probability mass over the product chain; the
/// mass function used at each node is supplied by `mass`.
pub(crate) fn forward_expectation<T, G: SequentialGamble + ?Sized>(
    tree: &Tree<T>,
    g: &G,
    s: &Situation,
    mass: impl Fn(usize, u64, &Context) -> MassFunction,
) -> f64 {
    if s.len() >= g.depth() {
        return g.payoff(g.key_after(s));
    }
    let chain = product_chain(tree, g, s);
    let mut prob = vec![1.0];
    for level in 0..chain.children.len() {
        let mut next = vec![0.0; chain.nodes[level + 1].len()];
        for (((key, ctx), kids), &p) in chain.nodes[level].iter().zip(&chain.children[level]).zip(&prob) {
            if p == 0.0 {
                continue;
            }
            let m = mass(s.len() + level, *key, ctx);
            for (x, &kid) in kids.iter().enumerate() {
                next[kid] += p * m.get(x);
            }
        }
        prob = next;
    }
    chain
        .nodes
        .last()
        .expect("levels")
        .iter()
        .zip(&prob)
        .map(|((key, _), p)| p * g.payoff(*key))
        .sum()
}
