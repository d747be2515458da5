//! Global gambles: finitary tables, sequential (automaton) gambles, limit
//! variables given by monotone approximating sequences, and events.

pub mod expr;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tree::Situation;

pub use expr::{compile, parse_gamble, BoolExpr, Expr, GambleExpr, Index};

/// Default cap on the number of table entries (`k^n`), i.e. depth 12 for two states.
pub const DEFAULT_TABLE_CAP: usize = 1 << 12;

/// A gamble that depends on the first `depth` states only, stored densely
/// over the `k^depth` state strings in base-`k` rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitaryGamble {
    k: usize,
    depth: usize,
    values: Vec<f64>,
}

pub(crate) fn table_size(k: usize, depth: usize, cap: usize) -> Result<usize> {
    let mut size: u128 = 1;
    for _ in 0..depth {
        size = size.saturating_mul(k as u128);
    }
    if size > cap as u128 {
        return Err(Error::ResourceLimit {
            what: format!("gamble table over {k} states at depth {depth}"),
            count: size,
            cap: cap as u128,
        });
    }
    Ok(size as usize)
}

impl FinitaryGamble {
    pub fn new(k: usize, depth: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("state space is empty"));
        }
        let expected = table_size(k, depth, usize::MAX)?;
        if values.len() != expected {
            return Err(Error::invalid(format!(
                "depth-{depth} gamble over {k} states needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("payoff {i} is not finite")));
        }
        Ok(FinitaryGamble { k, depth, values })
    }

    pub fn constant(k: usize, c: f64) -> Self {
        FinitaryGamble {
            k,
            depth: 0,
            values: vec![c],
        }
    }

    /// Tabulates `f` over every state string of length `depth`.
    pub fn from_fn(k: usize, depth: usize, cap: usize, mut f: impl FnMut(&Situation) -> f64) -> Result<Self> {
        let size = table_size(k, depth, cap)?;
        let values = (0..size).map(|r| f(&Situation::from_rank(r, depth, k))).collect();
        FinitaryGamble::new(k, depth, values)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `f(s_{1:n})`; `s` must have at least `depth` states.
    pub fn value(&self, s: &Situation) -> f64 {
        self.values[s.prefix(self.depth).rank(self.k)]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The same gamble, tabulated at a larger depth.
    pub fn lift(&self, depth: usize) -> FinitaryGamble {
        assert!(depth >= self.depth, "cannot lift a depth-{} gamble to depth {depth}", self.depth);
        let repeat = self.k.pow((depth - self.depth) as u32);
        let values = self
            .values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, repeat))
            .collect();
        FinitaryGamble {
            k: self.k,
            depth,
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FinitaryGamble {
        FinitaryGamble {
            k: self.k,
            depth: self.depth,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination at the larger of the two depths.
    pub fn zip_with(&self, other: &FinitaryGamble, f: impl Fn(f64, f64) -> f64) -> FinitaryGamble {
        assert_eq!(self.k, other.k);
        let depth = self.depth.max(other.depth);
        let (a, b) = (self.lift(depth), other.lift(depth));
        FinitaryGamble {
            k: self.k,
            depth,
            values: a.values.iter().zip(&b.values).map(|(&x, &y)| f(x, y)).collect(),
        }
    }

    pub fn neg(&self) -> FinitaryGamble {
        self.map(|v| -v)
    }

    /// First state string where `self > other`, if any.
    pub fn first_excess(&self, other: &FinitaryGamble, tol: f64) -> Option<Situation> {
        let depth = self.depth.max(other.depth);
        let (a, b) = (self.lift(depth), other.lift(depth));
        a.values
            .iter()
            .zip(&b.values)
            .position(|(x, y)| *x > *y + tol)
            .map(|r| Situation::from_rank(r, depth, self.k))
    }

    /// `f · 𝕀_s`: `f` on strings through `s`, zero elsewhere.
    ///
    /// When `s` is longer than the gamble, the result is tabulated at `|s|`.
    pub fn restrict(&self, s: &Situation) -> FinitaryGamble {
        let f = if s.len() > self.depth {
            self.lift(s.len())
        } else {
            self.clone()
        };
        let block = self.k.pow((f.depth - s.len()) as u32);
        let start = s.rank(self.k) * block;
        let values = f
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if (start..start + block).contains(&i) { v } else { 0.0 })
            .collect();
        FinitaryGamble {
            k: self.k,
            depth: f.depth,
            values,
        }
    }

    /// The block of payoffs on strings through `s`, `|s| ≤ depth`.
    pub(crate) fn block(&self, s: &Situation) -> &[f64] {
        let width = self.k.pow((self.depth - s.len()) as u32);
        let start = s.rank(self.k) * width;
        &self.values[start..start + width]
    }
}

/// A gamble read sequentially by a deterministic automaton with `u64` keys.
///
/// The key after reading the first `depth` states determines the payoff.
/// Engines evaluate such gambles over the product of automaton keys and tree
/// contexts, so long horizons stay tractable when the key space is small.
pub trait SequentialGamble {
    fn depth(&self) -> usize;
    fn start(&self) -> u64;
    /// Key after reading state `x` at 1-based `position`.
    fn advance(&self, key: u64, position: usize, x: usize) -> u64;
    fn payoff(&self, key: u64) -> f64;

    fn key_after(&self, s: &Situation) -> u64 {
        s.states()
            .iter()
            .take(self.depth())
            .enumerate()
            .fold(self.start(), |key, (i, &x)| self.advance(key, i + 1, x))
    }
}

impl SequentialGamble for FinitaryGamble {
    fn depth(&self) -> usize {
        self.depth
    }

    fn start(&self) -> u64 {
        0
    }

    fn advance(&self, key: u64, _position: usize, x: usize) -> u64 {
        key * self.k as u64 + x as u64
    }

    fn payoff(&self, key: u64) -> f64 {
        self.values[key as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HitKind {
    /// `min(τ, m)` with `τ` the first index whose state is a target.
    Time,
    /// `𝕀{τ ≤ m}`.
    Indicator,
}

/// Truncated first-hitting gambles, represented by a two-phase automaton:
/// key `0` means "not hit yet", otherwise the key is the hitting index
/// (or `1` for the indicator).
#[derive(Debug, Clone, PartialEq)]
pub struct HittingGamble {
    targets: Vec<bool>,
    horizon: usize,
    kind: HitKind,
    sign: f64,
}

impl HittingGamble {
    pub fn new(k: usize, targets: &[usize], horizon: usize, kind: HitKind) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid("hitting target set is empty"));
        }
        if horizon == 0 {
            return Err(Error::invalid("hitting horizon must be at least 1"));
        }
        let mut mask = vec![false; k];
        for &t in targets {
            if t >= k {
                return Err(Error::invalid(format!("target state {t} out of range")));
            }
            mask[t] = true;
        }
        Ok(HittingGamble {
            targets: mask,
            horizon,
            kind,
            sign: 1.0,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn kind(&self) -> HitKind {
        self.kind
    }

    pub fn negated(&self) -> Self {
        HittingGamble {
            sign: -self.sign,
            ..self.clone()
        }
    }

    pub fn tabulate(&self, cap: usize) -> Result<FinitaryGamble> {
        let k = self.targets.len();
        FinitaryGamble::from_fn(k, self.horizon, cap, |s| self.payoff(self.key_after(s)))
    }
}

impl SequentialGamble for HittingGamble {
    fn depth(&self) -> usize {
        self.horizon
    }

    fn start(&self) -> u64 {
        0
    }

    fn advance(&self, key: u64, position: usize, x: usize) -> u64 {
        if key != 0 || !self.targets[x] {
            return key;
        }
        match self.kind {
            HitKind::Time => position as u64,
            HitKind::Indicator => 1,
        }
    }

    fn payoff(&self, key: u64) -> f64 {
        let raw = match (self.kind, key) {
            (HitKind::Time, 0) => self.horizon as f64,
            (HitKind::Time, t) => t as f64,
            (HitKind::Indicator, hit) => hit as f64,
        };
        self.sign * raw
    }
}

/// `min(τ_A, m)` as a depth-`m` table.
pub fn truncated_hitting_time(k: usize, targets: &[usize], horizon: usize, cap: usize) -> Result<FinitaryGamble> {
    HittingGamble::new(k, targets, horizon, HitKind::Time)?.tabulate(cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::NonDecreasing => Direction::NonIncreasing,
            Direction::NonIncreasing => Direction::NonDecreasing,
        }
    }
}

/// One element of an approximating sequence.
#[derive(Debug, Clone)]
pub enum Approximant {
    Dense(FinitaryGamble),
    Hitting(HittingGamble),
}

type GeneratorFn = Arc<dyn Fn(usize) -> Result<FinitaryGamble> + Send + Sync>;

#[derive(Clone)]
pub enum Generator {
    Hitting {
        k: usize,
        targets: Vec<usize>,
        kind: HitKind,
        negated: bool,
    },
    /// Explicit finite sequence, constant after its last element.
    Sequence(Vec<FinitaryGamble>),
    /// Index `m ≥ 1` to gamble; must be pure.
    Function(GeneratorFn),
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Hitting {
                targets,
                kind,
                negated,
                ..
            } => write!(f, "Hitting({targets:?}, {kind:?}, negated={negated})"),
            Generator::Sequence(seq) => write!(f, "Sequence(len={})", seq.len()),
            Generator::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// A global variable given as the pointwise limit of a monotone sequence of
/// finitary gambles, with a uniform bound (below for non-decreasing
/// sequences, above for non-increasing ones).
#[derive(Debug, Clone)]
pub struct LimitVariable {
    pub generator: Generator,
    pub direction: Direction,
    pub bound: f64,
}

impl LimitVariable {
    /// The first-hitting time of `targets`, approximated by `min(τ, m)`.
    pub fn hitting_time(k: usize, targets: &[usize]) -> Result<Self> {
        HittingGamble::new(k, targets, 1, HitKind::Time)?;
        Ok(LimitVariable {
            generator: Generator::Hitting {
                k,
                targets: targets.to_vec(),
                kind: HitKind::Time,
                negated: false,
            },
            direction: Direction::NonDecreasing,
            bound: 1.0,
        })
    }

    /// The indicator of ever reaching `targets`.
    pub fn hitting_indicator(k: usize, targets: &[usize]) -> Result<Self> {
        HittingGamble::new(k, targets, 1, HitKind::Indicator)?;
        Ok(LimitVariable {
            generator: Generator::Hitting {
                k,
                targets: targets.to_vec(),
                kind: HitKind::Indicator,
                negated: false,
            },
            direction: Direction::NonDecreasing,
            bound: 0.0,
        })
    }

    pub fn from_sequence(direction: Direction, bound: f64, sequence: Vec<FinitaryGamble>) -> Result<Self> {
        if sequence.is_empty() {
            return Err(Error::invalid("approximating sequence is empty"));
        }
        Ok(LimitVariable {
            generator: Generator::Sequence(sequence),
            direction,
            bound,
        })
    }

    pub fn from_fn(
        direction: Direction,
        bound: f64,
        f: impl Fn(usize) -> Result<FinitaryGamble> + Send + Sync + 'static,
    ) -> Self {
        LimitVariable {
            generator: Generator::Function(Arc::new(f)),
            direction,
            bound,
        }
    }

    /// The `m`-th approximant, `m ≥ 1`.
    pub fn approximant(&self, m: usize) -> Result<Approximant> {
        let m = m.max(1);
        match &self.generator {
            Generator::Hitting {
                k,
                targets,
                kind,
                negated,
            } => {
                let g = HittingGamble::new(*k, targets, m, *kind)?;
                Ok(Approximant::Hitting(if *negated { g.negated() } else { g }))
            }
            Generator::Sequence(seq) => Ok(Approximant::Dense(seq[(m - 1).min(seq.len() - 1)].clone())),
            Generator::Function(f) => f(m).map(Approximant::Dense),
        }
    }

    /// `−v`, with the direction and bound flipped.
    pub fn negated(&self) -> LimitVariable {
        let generator = match &self.generator {
            Generator::Hitting {
                k,
                targets,
                kind,
                negated,
            } => Generator::Hitting {
                k: *k,
                targets: targets.clone(),
                kind: *kind,
                negated: !negated,
            },
            Generator::Sequence(seq) => Generator::Sequence(seq.iter().map(FinitaryGamble::neg).collect()),
            Generator::Function(f) => {
                let f = f.clone();
                Generator::Function(Arc::new(move |m| f(m).map(|g| g.neg())))
            }
        };
        LimitVariable {
            generator,
            direction: self.direction.flip(),
            bound: -self.bound,
        }
    }

    /// Checks the uniform bound on one approximant.
    pub fn check_bound(&self, m: usize, g: &Approximant) -> Result<()> {
        let Approximant::Dense(g) = g else {
            return Ok(());
        };
        let violated = match self.direction {
            Direction::NonDecreasing => g.min_value() < self.bound,
            Direction::NonIncreasing => g.max_value() > self.bound,
        };
        if violated {
            return Err(Error::invalid(format!(
                "approximant {m} crosses the declared bound {} (range [{}, {}])",
                self.bound,
                g.min_value(),
                g.max_value()
            )));
        }
        Ok(())
    }

    /// Checks `prev ≤ next` (or `≥`) pointwise; hitting approximants are
    /// monotone by construction.
    pub fn check_step(&self, m: usize, prev: &Approximant, next: &Approximant) -> Result<()> {
        let (Approximant::Dense(a), Approximant::Dense(b)) = (prev, next) else {
            return Ok(());
        };
        let witness = match self.direction {
            Direction::NonDecreasing => a.first_excess(b, 0.0),
            Direction::NonIncreasing => b.first_excess(a, 0.0),
        };
        let order = match self.direction {
            Direction::NonDecreasing => "non-decreasing",
            Direction::NonIncreasing => "non-increasing",
        };
        match witness {
            Some(s) => Err(Error::invalid(format!("approximants {} and {m} are not {order} at {s}", m - 1))),
            None => Ok(()),
        }
    }
}

/// Events whose indicators the engines can evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum EventSpec {
    Cylinder(Situation),
    /// Union of cylinders of strings of one common length.
    UnionAtDepth { depth: usize, strings: Vec<Situation> },
    /// Ever reaching one of the target states.
    Hitting(Vec<usize>),
}

/// An event indicator, either finitary or a limit variable.
#[derive(Debug, Clone)]
pub enum Indicator {
    Finitary(FinitaryGamble),
    Limit(LimitVariable),
}

impl EventSpec {
    pub fn indicator(&self, k: usize, cap: usize) -> Result<Indicator> {
        match self {
            EventSpec::Cylinder(s) => {
                s.states()
                    .iter()
                    .try_for_each(|&x| if x < k { Ok(()) } else { Err(Error::invalid("state out of range")) })?;
                Ok(Indicator::Finitary(
                    FinitaryGamble::from_fn(k, s.len(), cap, |t| if t == s { 1.0 } else { 0.0 })?,
                ))
            }
            EventSpec::UnionAtDepth { depth, strings } => {
                if let Some(bad) = strings.iter().find(|s| s.len() != *depth) {
                    return Err(Error::invalid(format!("string {bad} does not have length {depth}")));
                }
                Ok(Indicator::Finitary(FinitaryGamble::from_fn(k, *depth, cap, |t| {
                    if strings.contains(t) {
                        1.0
                    } else {
                        0.0
                    }
                })?))
            }
            EventSpec::Hitting(targets) => Ok(Indicator::Limit(LimitVariable::hitting_indicator(k, targets)?)),
        }
    }

    /// The complement, when it is representable at finite depth.
    pub fn complement(&self, k: usize) -> Option<EventSpec> {
        let (depth, strings): (usize, Vec<Situation>) = match self {
            EventSpec::Cylinder(s) => (s.len(), vec![s.clone()]),
            EventSpec::UnionAtDepth { depth, strings } => (*depth, strings.clone()),
            EventSpec::Hitting(_) => return None,
        };
        let size = k.checked_pow(depth as u32)?;
        let rest = (0..size)
            .map(|r| Situation::from_rank(r, depth, k))
            .filter(|s| !strings.contains(s))
            .collect();
        Some(EventSpec::UnionAtDepth { depth, strings: rest })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restrict_examples() {
        let one = FinitaryGamble::constant(2, 1.0).lift(1);
        let h = Situation::new(vec![0]);
        assert_eq!(one.restrict(&h).values(), &[1.0, 0.0]);
        let f = FinitaryGamble::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.restrict(&h).restrict(&h), f.restrict(&h));
        assert_eq!(f.restrict(&Situation::root()), f);
        assert_eq!(f.restrict(&Situation::new(vec![1])).values(), &[0.0, 0.0, 3.0, 4.0]);
    }

    #[test]
    fn lift_preserves_values() {
        let f = FinitaryGamble::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let g = f.lift(3);
        for r in 0..27 {
            let s = Situation::from_rank(r, 3, 3);
            assert_eq!(g.value(&s), f.value(&s));
        }
    }

    #[test]
    fn hitting_time_table() {
        let t = truncated_hitting_time(2, &[1], 3, DEFAULT_TABLE_CAP).unwrap();
        assert_eq!(t.value(&Situation::new(vec![0, 0, 0])), 3.0);
        assert_eq!(t.value(&Situation::new(vec![0, 1, 0])), 2.0);
        assert_eq!(t.value(&Situation::new(vec![1, 1, 1])), 1.0);
        for m in 1..6 {
            let a = truncated_hitting_time(2, &[1], m, DEFAULT_TABLE_CAP).unwrap();
            let b = truncated_hitting_time(2, &[1], m + 1, DEFAULT_TABLE_CAP).unwrap();
            assert!(a.first_excess(&b, 0.0).is_none());
            assert!(a.min_value() >= 1.0);
        }
        assert!(truncated_hitting_time(2, &[], 3, DEFAULT_TABLE_CAP).is_err());
    }

    #[test]
    fn sequential_key_matches_table() {
        let g = HittingGamble::new(3, &[2], 4, HitKind::Indicator).unwrap();
        let table = g.tabulate(DEFAULT_TABLE_CAP).unwrap();
        for r in 0..81 {
            let s = Situation::from_rank(r, 4, 3);
            assert_eq!(g.payoff(g.key_after(&s)), table.value(&s));
            assert_eq!(table.payoff(table.key_after(&s)), table.value(&s));
        }
    }

    #[test]
    fn table_cap_is_enforced() {
        let err = FinitaryGamble::from_fn(2, 13, DEFAULT_TABLE_CAP, |_| 0.0).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { count: 8192, .. }));
        assert!(FinitaryGamble::from_fn(2, 12, DEFAULT_TABLE_CAP, |_| 0.0).is_ok());
    }

    #[test]
    fn monotonicity_violations_name_a_witness() {
        let a = FinitaryGamble::new(2, 1, vec![1.0, 0.0]).unwrap();
        let b = FinitaryGamble::new(2, 1, vec![0.5, 1.0]).unwrap();
        let v = LimitVariable::from_sequence(Direction::NonDecreasing, 0.0, vec![a.clone(), b.clone()]).unwrap();
        let err = v
            .check_step(2, &Approximant::Dense(a), &Approximant::Dense(b))
            .unwrap_err();
        assert!(err.to_string().contains("at 0"), "{err}");
    }

    #[test]
    fn complements_of_finite_events() {
        let e = EventSpec::Cylinder(Situation::new(vec![0]));
        let c = e.complement(2).unwrap();
        assert_eq!(
            c,
            EventSpec::UnionAtDepth {
                depth: 1,
                strings: vec![Situation::new(vec![1])]
            }
        );
    }
}
