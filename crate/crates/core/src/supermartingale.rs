//! Tail-constant supermartingales as certificates for upper expectations.
//!
//! A process `M` on situations is a supermartingale when
//! `Q̄_s(M(s ·)) ≤ M(s)` at every situation. If it is bounded below and its
//! limit inferior dominates `f` on every path through `s`, then `M(s)` is an
//! upper bound on the game-theoretic upper expectation of `f` given `s`. For
//! a process that is constant beyond depth `n`, the limit inferior along a
//! path is simply its depth-`n` value, so both conditions are finitely
//! checkable.

use std::ops::Add;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, Finite, NegInf, PosInf};
use crate::game::{finitary_recursion, finitary_upper};
use crate::gambles::FinitaryGamble;
use crate::tree::{ImpreciseTree, Situation};

/// Tolerance for the supermartingale inequality and for domination.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;

/// A process on situations, tabulated up to `depth` and constant beyond:
/// `M(s) = M(s_{1:n})` for `|s| > n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailConstantProcess {
    k: usize,
    depth: usize,
    /// `levels[m]` holds the `k^m` values of situations of length `m`, in rank order.
    levels: Vec<Vec<ExtendedReal>>,
}

impl TailConstantProcess {
    pub fn new(k: usize, levels: Vec<Vec<ExtendedReal>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("process needs at least the root level"));
        }
        let mut width = 1usize;
        for (m, level) in levels.iter().enumerate() {
            if level.len() != width {
                return Err(Error::invalid(format!(
                    "level {m} has {} values, expected {width}",
                    level.len()
                )));
            }
            if let Some(r) = level.iter().position(|v| *v == NegInf) {
                let s = Situation::from_rank(r, m, k);
                return Err(Error::invalid(format!("value at {s} is -inf; the process must be bounded below")));
            }
            width *= k;
        }
        Ok(TailConstantProcess {
            k,
            depth: levels.len() - 1,
            levels,
        })
    }

    pub fn constant(k: usize, c: f64) -> Self {
        TailConstantProcess {
            k,
            depth: 0,
            levels: vec![vec![Finite(c)]],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn levels(&self) -> &[Vec<ExtendedReal>] {
        &self.levels
    }

    pub fn value(&self, s: &Situation) -> ExtendedReal {
        let m = s.len().min(self.depth);
        self.levels[m][s.prefix(m).rank(self.k)]
    }

    /// Largest finite `c` with `M ≥ c` everywhere.
    pub fn lower_bound(&self) -> f64 {
        self.levels
            .iter()
            .flatten()
            .filter_map(|v| v.finite())
            .fold(f64::INFINITY, f64::min)
    }

    /// The same process tabulated to a larger depth.
    pub fn lift(&self, depth: usize) -> TailConstantProcess {
        assert!(depth >= self.depth);
        let mut levels = self.levels.clone();
        for _ in self.depth..depth {
            let last = levels.last().expect("root level");
            let next = last.iter().flat_map(|&v| std::iter::repeat_n(v, self.k)).collect();
            levels.push(next);
        }
        TailConstantProcess {
            k: self.k,
            depth,
            levels,
        }
    }

    pub fn map(&self, f: impl Fn(&Situation, ExtendedReal) -> ExtendedReal) -> Result<TailConstantProcess> {
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(m, level)| {
                level
                    .iter()
                    .enumerate()
                    .map(|(r, &v)| f(&Situation::from_rank(r, m, self.k), v))
                    .collect()
            })
            .collect();
        TailConstantProcess::new(self.k, levels)
    }

    /// The smallest supermartingale with the same depth-`n` values that lies
    /// above `self`: `M(s) ← max(M(s), Q̄_s(M(s ·)))`, bottom-up.
    pub fn supermartingale_envelope(&self, tree: &ImpreciseTree) -> TailConstantProcess {
        let mut levels = self.levels.clone();
        for m in (0..self.depth).rev() {
            let (upper, lower) = levels.split_at_mut(m + 1);
            let children = &lower[0];
            for (r, slot) in upper[m].iter_mut().enumerate() {
                let s = Situation::from_rank(r, m, self.k);
                let q = tree.model_at(&s).extended_upper(&children[r * self.k..(r + 1) * self.k]);
                *slot = slot.max(q);
            }
        }
        TailConstantProcess {
            k: self.k,
            depth: self.depth,
            levels,
        }
    }
}

impl Add for &TailConstantProcess {
    type Output = TailConstantProcess;

    fn add(self, rhs: &TailConstantProcess) -> TailConstantProcess {
        assert_eq!(self.k, rhs.k);
        let depth = self.depth.max(rhs.depth);
        let (a, b) = (self.lift(depth), rhs.lift(depth));
        let levels = a
            .levels
            .iter()
            .zip(&b.levels)
            .map(|(x, y)| x.iter().zip(y).map(|(&u, &v)| u + v).collect())
            .collect();
        TailConstantProcess {
            k: self.k,
            depth,
            levels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlackViolation {
    pub situation: Situation,
    pub upper: ExtendedReal,
    pub value: ExtendedReal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checked: usize,
    /// Largest `M(s) − Q̄_s(M(s·))` over situations where both are finite.
    pub max_slack: f64,
    pub violations: Vec<SlackViolation>,
}

/// Checks `Q̄_s(M(s·)) ≤ M(s)` for every `|s| < depth`; deeper situations
/// satisfy it automatically because the process is constant there.
pub fn verify(m: &TailConstantProcess, tree: &ImpreciseTree) -> Result<VerifyReport> {
    if m.k != tree.k() {
        return Err(Error::invalid("process and tree have different state spaces"));
    }
    let k = m.k;
    let per_situation: Vec<(Situation, ExtendedReal, ExtendedReal)> = (0..m.depth)
        .flat_map(|level| (0..m.levels[level].len()).map(move |r| (level, r)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(level, r)| {
            let s = Situation::from_rank(r, level, k);
            let children = &m.levels[level + 1][r * k..(r + 1) * k];
            let upper = tree.model_at(&s).extended_upper(children);
            (s, upper, m.levels[level][r])
        })
        .collect();

    let mut max_slack = 0.0_f64;
    let mut violations = Vec::new();
    for (s, upper, value) in &per_situation {
        let ok = match (*upper, *value) {
            (_, PosInf) => true,
            (Finite(u), Finite(v)) => {
                max_slack = max_slack.max(v - u);
                u <= v + CERTIFICATE_TOLERANCE
            }
            (NegInf, _) => true,
            _ => false,
        };
        if !ok {
            violations.push(SlackViolation {
                situation: s.clone(),
                upper: *upper,
                value: *value,
            });
        }
    }
    Ok(VerifyReport {
        passed: violations.is_empty(),
        checked: per_situation.len(),
        max_slack,
        violations,
    })
}

/// The process `M(x_{1:m}) = Q̄(f | x_{1:m})` for `m ≤ depth(f)`, constant
/// beyond. It is a supermartingale with equality everywhere, its depth-`n`
/// values are `f`, and `M(base)` is the upper expectation of `f` given `base`.
pub fn canonical_supermartingale(
    tree: &ImpreciseTree,
    f: &FinitaryGamble,
    base: &Situation,
) -> Result<TailConstantProcess> {
    base.validate(tree.space())?;
    let rec = finitary_recursion(tree, f, &Situation::root())?;
    let levels = rec
        .values
        .into_iter()
        .map(|level| level.into_iter().map(Finite).collect())
        .collect();
    TailConstantProcess::new(tree.k(), levels)
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub valid: bool,
    /// `M(s)`, an upper bound on the upper expectation when `valid`.
    pub bound: ExtendedReal,
    /// The backward-recursion value, for cross-checking.
    pub engine_value: f64,
    pub verify: VerifyReport,
    /// Depth-`n` strings through `s` where `M < f`.
    pub domination_witnesses: Vec<Situation>,
}

/// Validates `M` as a certificate for `f` given `s` and reports its bound.
pub fn certified_upper_bound(
    m: &TailConstantProcess,
    f: &FinitaryGamble,
    tree: &ImpreciseTree,
    s: &Situation,
) -> Result<Certificate> {
    if m.depth < f.depth() {
        return Err(Error::invalid(format!(
            "process depth {} is below the gamble depth {}",
            m.depth,
            f.depth()
        )));
    }
    if f.k() != m.k {
        return Err(Error::invalid("process and gamble have different state spaces"));
    }
    s.validate(tree.space())?;
    let report = verify(m, tree)?;
    let depth = m.depth.max(s.len());
    let width = m.k.pow((depth - s.len()) as u32);
    let mut witnesses = Vec::new();
    for r in 0..width {
        let mut states = s.states().to_vec();
        states.extend_from_slice(Situation::from_rank(r, depth - s.len(), m.k).states());
        let z = Situation::new(states);
        let dominated = match m.value(&z) {
            PosInf => true,
            Finite(v) => v >= f.value(&z) - CERTIFICATE_TOLERANCE,
            NegInf => false,
        };
        if !dominated {
            witnesses.push(z);
        }
    }
    Ok(Certificate {
        valid: report.passed && witnesses.is_empty(),
        bound: m.value(s),
        engine_value: finitary_upper(tree, f, s)?,
        verify: report,
        domination_witnesses: witnesses,
    })
}
