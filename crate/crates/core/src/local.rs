//! Local uncertainty models on a finite state space.
//!
//! A local model is a finitely generated credal set: a non-empty list of
//! probability mass functions whose convex hull is the set of admissible
//! one-step forecasts. Its upper expectation of a gamble `f` is the maximum
//! of `Σ_x f(x) p(x)` over the extreme points, which is attained because the
//! objective is linear.
//!
//! The extension to extended-real gambles uses the same maximum, with each
//! inner product evaluated under the conventions of [`ExtendedReal`]. An
//! independent route, [`CredalSet::cut_limit_upper`], obtains the same value
//! as the iterated limit of upper and lower cuts using only finite gambles.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, Finite, NegInf, PosInf};

/// Bound on `|Σ w − 1|` accepted before normalization.
pub const MASS_SUM_TOLERANCE: f64 = 1e-9;

/// Tolerance used by the axiom checkers.
pub const AXIOM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl StateSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::invalid("state space must contain at least one state"));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::invalid(format!("state {i} has an empty label")));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate state label {label:?}")));
            }
        }
        Ok(StateSpace { labels, index })
    }

    /// Number of states `k`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn indices_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.index_of(l.as_ref())
                    .ok_or_else(|| Error::invalid(format!("unknown state label {:?}", l.as_ref())))
            })
            .collect()
    }
}

/// A probability mass function on the state space.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MassFunction {
    weights: Vec<f64>,
}

impl MassFunction {
    /// Validates and normalizes a weight vector.
    ///
    /// Weights must be finite and non-negative and sum to one within
    /// [`MASS_SUM_TOLERANCE`]; the result is divided by its sum.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("mass function has no weights"));
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::invalid(format!("weight {i} is {w}, expected a finite value ≥ 0")));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_SUM_TOLERANCE {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(MassFunction { weights })
    }

    /// Point mass on state `x`.
    pub fn degenerate(k: usize, x: usize) -> Self {
        let mut weights = vec![0.0; k];
        weights[x] = 1.0;
        MassFunction { weights }
    }

    pub fn uniform(k: usize) -> Self {
        MassFunction {
            weights: vec![1.0 / k as f64; k],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, x: usize) -> f64 {
        self.weights[x]
    }

    /// `Σ_x f(x) p(x)` summed in state order.
    pub fn expectation(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.weights.len());
        let mut acc = 0.0;
        for (w, v) in self.weights.iter().zip(f) {
            acc += w * v;
        }
        acc
    }

    /// Extended inner product: finite terms first, then `+∞` terms, then `−∞`
    /// terms, with `0 · (±∞) = 0`.
    pub fn extended_expectation(&self, f: &[ExtendedReal]) -> ExtendedReal {
        debug_assert_eq!(f.len(), self.weights.len());
        let mut finite = 0.0;
        let mut plus = false;
        let mut minus = false;
        for (w, v) in self.weights.iter().zip(f) {
            match v {
                Finite(x) => finite += w * x,
                PosInf if *w > 0.0 => plus = true,
                NegInf if *w > 0.0 => minus = true,
                _ => {}
            }
        }
        let mut acc = Finite(finite);
        if plus {
            acc = acc + PosInf;
        }
        if minus {
            acc = acc + NegInf;
        }
        acc
    }
}

/// A finitely generated credal set, stored as its list of extreme points.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CredalSet {
    points: Vec<MassFunction>,
}

impl CredalSet {
    /// Builds a credal set, dropping bitwise-identical duplicate points.
    pub fn new(points: Vec<MassFunction>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::invalid("credal set must have at least one extreme point"));
        };
        let k = first.len();
        let mut unique: Vec<MassFunction> = Vec::with_capacity(points.len());
        for (i, p) in points.into_iter().enumerate() {
            if p.len() != k {
                return Err(Error::invalid(format!(
                    "extreme point {i} has {} weights, expected {k}",
                    p.len()
                )));
            }
            let dup = unique.iter().any(|q| {
                q.weights
                    .iter()
                    .zip(&p.weights)
                    .all(|(a, b)| a.to_bits() == b.to_bits())
            });
            if !dup {
                unique.push(p);
            }
        }
        Ok(CredalSet { points: unique })
    }

    pub fn from_weights(points: Vec<Vec<f64>>) -> Result<Self> {
        let points = points
            .into_iter()
            .map(MassFunction::new)
            .collect::<Result<Vec<_>>>()?;
        CredalSet::new(points)
    }

    pub fn singleton(p: MassFunction) -> Self {
        CredalSet { points: vec![p] }
    }

    /// The vacuous model: all point masses.
    pub fn vacuous(k: usize) -> Self {
        CredalSet {
            points: (0..k).map(|x| MassFunction::degenerate(k, x)).collect(),
        }
    }

    pub fn points(&self) -> &[MassFunction] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn is_precise(&self) -> bool {
        self.points.len() == 1
    }

    /// Upper expectation of a finite gamble given as a slice.
    ///
    /// Callers guarantee `f.len() == self.dim()`.
    pub fn upper(&self, f: &[f64]) -> f64 {
        self.upper_with_argmax(f).0
    }

    /// Upper expectation together with the lowest-index maximizing point.
    pub fn upper_with_argmax(&self, f: &[f64]) -> (f64, usize) {
        if f.iter().all(|v| *v == f[0]) {
            return (f[0], 0);
        }
        let mut best = self.points[0].expectation(f);
        let mut arg = 0;
        for (i, p) in self.points.iter().enumerate().skip(1) {
            let v = p.expectation(f);
            if v > best {
                best = v;
                arg = i;
            }
        }
        (best, arg)
    }

    /// Lower expectation by conjugacy, `−upper(−f)`.
    pub fn lower(&self, f: &[f64]) -> f64 {
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        -self.upper(&neg)
    }

    fn check_dim(&self, f: &LocalGamble) -> Result<()> {
        if f.len() != self.dim() {
            return Err(Error::invalid(format!(
                "gamble has {} values but the state space has {} states",
                f.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn upper_expectation(&self, f: &LocalGamble) -> Result<f64> {
        self.check_dim(f)?;
        let values = f.finite_values()?;
        Ok(self.upper(&values))
    }

    pub fn lower_expectation(&self, f: &LocalGamble) -> Result<f64> {
        self.check_dim(f)?;
        let values = f.finite_values()?;
        Ok(self.lower(&values))
    }

    /// Upper expectation of an extended-real gamble.
    pub fn extended_upper_expectation(&self, f: &LocalGamble) -> Result<ExtendedReal> {
        self.check_dim(f)?;
        Ok(self.extended_upper(f.values()))
    }

    pub(crate) fn extended_upper(&self, f: &[ExtendedReal]) -> ExtendedReal {
        if f.iter().all(|v| *v == f[0]) {
            return f[0];
        }
        self.points
            .iter()
            .map(|p| p.extended_expectation(f))
            .fold(NegInf, ExtendedReal::max)
    }

    /// `lim_{c→−∞} lim_{d→+∞} upper(clip(f, c, d))`, evaluated on finite
    /// gambles only.
    ///
    /// Once the cut levels are beyond every finite value of `f`, the upper
    /// expectation of the clipped gamble is a maximum of affine functions of
    /// the cut level. In `d` it is convex and non-decreasing, so any strict
    /// increase certifies divergence to `+∞`. In `c` it is convex and
    /// non-decreasing too, so two equal consecutive values certify that the
    /// limit has been reached; a sequence that never flattens diverges to `−∞`.
    pub fn cut_limit_upper(&self, f: &LocalGamble, schedule: &CutSchedule) -> Result<ExtendedReal> {
        self.check_dim(f)?;
        let base = 1.0
            + f.values()
                .iter()
                .filter_map(|v| v.finite())
                .fold(0.0_f64, |m, v| m.max(v.abs()));
        let levels = schedule.levels(base);

        let clipped_upper = |c: f64, d: f64| -> f64 {
            let g: Vec<f64> = f
                .values()
                .iter()
                .map(|v| v.cut_below(c).cut_above(d).to_f64())
                .collect();
            self.upper(&g)
        };
        let inner = |c: f64| -> ExtendedReal {
            let first = clipped_upper(c, levels[0]);
            let last = clipped_upper(c, levels[levels.len() - 1]);
            if last > first {
                PosInf
            } else {
                Finite(last)
            }
        };

        let mut previous = inner(-levels[0]);
        if previous == PosInf {
            return Ok(PosInf);
        }
        for level in &levels[1..] {
            let current = inner(-level);
            if current == previous {
                return Ok(current);
            }
            previous = current;
        }
        Ok(NegInf)
    }

    /// Checks the coherence properties on the supplied finite gambles.
    ///
    /// Perturbations are derived from the sample itself: consecutive pairs
    /// `(f, g)` give `f + g`, `f ∨ g ≥ f`, the scale `|g(0)|` and the shift
    /// `g(k−1)`.
    pub fn check_local_axioms(&self, gambles: &[Vec<f64>]) -> AxiomReport {
        let mut report = AxiomReport::default();
        let tol = AXIOM_TOLERANCE;
        for (i, f) in gambles.iter().enumerate() {
            if f.len() != self.dim() {
                report.fail("input", format!("gamble {i} has wrong dimension"));
                continue;
            }
            let g = &gambles[(i + 1) % gambles.len()];
            if g.len() != self.dim() {
                continue;
            }
            let up = self.upper(f);
            let low = self.lower(f);
            let sup = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let inf = f.iter().copied().fold(f64::INFINITY, f64::min);

            report.check("sup-bound", up <= sup + tol, || format!("upper {up} > sup {sup} for {f:?}"));

            let sum: Vec<f64> = f.iter().zip(g).map(|(a, b)| a + b).collect();
            let (uf, ug, us) = (up, self.upper(g), self.upper(&sum));
            report.check("subadditivity", us <= uf + ug + tol, || {
                format!("upper(f+g)={us} > {uf}+{ug} for f={f:?} g={g:?}")
            });

            for lambda in [0.0, g[0].abs(), 1.0 + g[0].abs()] {
                let scaled: Vec<f64> = f.iter().map(|v| lambda * v).collect();
                let us = self.upper(&scaled);
                report.check("homogeneity", (us - lambda * up).abs() <= tol * (1.0 + lambda), || {
                    format!("upper({lambda}·f)={us} ≠ {lambda}·{up} for {f:?}")
                });
            }

            let dominating: Vec<f64> = f.iter().zip(g).map(|(a, b)| a.max(*b)).collect();
            let ud = self.upper(&dominating);
            report.check("monotonicity", up <= ud + tol, || format!("monotonicity: {up} > {ud} for {f:?} ≤ {dominating:?}"));

            report.check("bounds", inf - tol <= low && low <= up + tol && up <= sup + tol, || {
                format!("bounds: inf={inf} lower={low} upper={up} sup={sup}")
            });

            let mu = g[g.len() - 1];
            let shifted: Vec<f64> = f.iter().map(|v| v + mu).collect();
            let ush = self.upper(&shifted);
            report.check("constant-additivity", (ush - (up + mu)).abs() <= tol, || {
                format!("upper(f+{mu})={ush} ≠ {up}+{mu}")
            });

            let dist = f.iter().zip(g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            report.check("continuity", (up - ug).abs() <= dist + tol, || {
                format!("|upper(f)-upper(g)|={} > sup|f-g|={dist}", (up - ug).abs())
            });
        }
        report
    }

    /// Checks the coherence properties on extended gambles, plus agreement with the cut-limit
    /// route (exact equality).
    pub fn check_extended_axioms(&self, gambles: &[LocalGamble], schedule: &CutSchedule) -> AxiomReport {
        let mut report = AxiomReport::default();
        let tol = AXIOM_TOLERANCE;
        let near = |a: ExtendedReal, b: ExtendedReal| match (a, b) {
            (Finite(x), Finite(y)) => (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())),
            _ => a == b,
        };
        for (i, f) in gambles.iter().enumerate() {
            if f.len() != self.dim() {
                report.fail("input", format!("gamble {i} has wrong dimension"));
                continue;
            }
            let g = &gambles[(i + 1) % gambles.len()];
            if g.len() != self.dim() {
                continue;
            }
            let uf = self.extended_upper(f.values());
            let ug = self.extended_upper(g.values());

            match self.cut_limit_upper(f, schedule) {
                Ok(cut) => report.check("cut-limit", cut == uf, || {
                    format!("extended {uf} ≠ cut limit {cut} for {f}")
                }),
                Err(e) => report.fail("cut-limit", e.to_string()),
            }

            if let Some(c) = f.values()[0].finite() {
                let constant = vec![Finite(c); self.dim()];
                let uc = self.extended_upper(&constant);
                report.check("extended-constants", near(uc, Finite(c)), || format!("upper({c}) = {uc}"));
            }

            let sum: Vec<ExtendedReal> = f.values().iter().zip(g.values()).map(|(a, b)| *a + *b).collect();
            let us = self.extended_upper(&sum);
            let bound = uf + ug;
            report.check("extended-subadditivity", match (us, bound) {
                (Finite(a), Finite(b)) => a <= b + tol,
                _ => us <= bound,
            }, || format!("upper(f+g)={us} > {uf}+{ug} for f={f} g={g}"));

            let lambda = 0.5 + g.values()[0].finite().map_or(1.0, f64::abs);
            let scaled: Vec<ExtendedReal> = f.values().iter().map(|v| lambda * *v).collect();
            let usc = self.extended_upper(&scaled);
            report.check("extended-homogeneity", near(usc, lambda * uf), || {
                format!("upper({lambda}·f)={usc} ≠ {lambda}·{uf}")
            });

            let dominating: Vec<ExtendedReal> = f.values().iter().zip(g.values()).map(|(a, b)| a.max(*b)).collect();
            let ud = self.extended_upper(&dominating);
            report.check("extended-monotonicity", match (uf, ud) {
                (Finite(a), Finite(b)) => a <= b + tol,
                _ => uf <= ud,
            }, || format!("monotonicity: {uf} > {ud}"));

            // Monotone convergence on the non-decreasing, non-negative sequence min(f⁺, n).
            let positive: Vec<ExtendedReal> = f.values().iter().map(|v| v.cut_below(0.0)).collect();
            let limit = self.extended_upper(&positive);
            let top = positive.iter().filter_map(|v| v.finite()).fold(0.0, f64::max);
            let at = |n: f64| -> f64 {
                let h: Vec<f64> = positive.iter().map(|v| v.cut_above(n).to_f64()).collect();
                self.upper(&h)
            };
            let (far, farther) = (at(1.0 + 2.0 * top), at(1e6 * (1.0 + top)));
            let ok = match limit {
                PosInf => farther > far,
                Finite(v) => far == v && farther == v,
                NegInf => false,
            };
            report.check("monotone-convergence", ok, || {
                format!("limit value {limit} but sequence values {far}, {farther} for {f}")
            });
        }
        report
    }
}

/// Geometric schedule of cut levels `base · growth^j`, `j = 0..count`.
#[derive(Debug, Clone, Copy)]
pub struct CutSchedule {
    pub growth: f64,
    pub count: usize,
}

impl Default for CutSchedule {
    fn default() -> Self {
        CutSchedule {
            growth: 1e4,
            count: 60,
        }
    }
}

impl CutSchedule {
    fn levels(&self, base: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.count.max(2));
        let mut level = base;
        for _ in 0..self.count.max(2) {
            out.push(level);
            level *= self.growth;
        }
        out
    }
}

/// A gamble on the state space with extended-real values.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGamble {
    values: Vec<ExtendedReal>,
}

impl LocalGamble {
    pub fn new(values: Vec<ExtendedReal>) -> Self {
        LocalGamble { values }
    }

    pub fn finite(values: &[f64]) -> Result<Self> {
        values
            .iter()
            .map(|v| {
                if v.is_finite() {
                    Ok(Finite(*v))
                } else {
                    Err(Error::invalid(format!("gamble value {v} is not finite")))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(LocalGamble::new)
    }

    pub fn constant(k: usize, c: ExtendedReal) -> Self {
        LocalGamble::new(vec![c; k])
    }

    pub fn values(&self) -> &[ExtendedReal] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn finite_values(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|v| v.finite().ok_or_else(|| Error::invalid("gamble takes an infinite value")))
            .collect()
    }

    /// `f ∧ c`.
    pub fn cut_above(&self, c: f64) -> Self {
        LocalGamble::new(self.values.iter().map(|v| v.cut_above(c)).collect())
    }

    /// `f ∨ c`.
    pub fn cut_below(&self, c: f64) -> Self {
        LocalGamble::new(self.values.iter().map(|v| v.cut_below(c)).collect())
    }
}

impl fmt::Display for LocalGamble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub axiom: String,
    pub detail: String,
}

/// Outcome of a property suite: how many checks ran and which failed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AxiomReport {
    pub checks: usize,
    pub violations: Vec<Violation>,
}

impl AxiomReport {
    pub fn check(&mut self, axiom: &str, ok: bool, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(Violation {
                axiom: axiom.to_string(),
                detail: detail(),
            });
        }
    }

    pub fn fail(&mut self, axiom: &str, detail: String) {
        self.check(axiom, false, || detail);
    }

    pub fn merge(&mut self, other: AxiomReport) {
        self.checks += other.checks;
        self.violations.extend(other.violations);
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin() -> CredalSet {
        CredalSet::from_weights(vec![vec![0.4, 0.6], vec![0.6, 0.4]]).unwrap()
    }

    fn lg(v: &[f64]) -> LocalGamble {
        LocalGamble::finite(v).unwrap()
    }

    #[test]
    fn upper_and_lower_on_small_sets() {
        let single = CredalSet::from_weights(vec![vec![0.5, 0.5]]).unwrap();
        assert_eq!(single.upper_expectation(&lg(&[1.0, 0.0])).unwrap(), 0.5);
        assert_eq!(coin().upper_expectation(&lg(&[1.0, 0.0])).unwrap(), 0.6);
        assert_eq!(coin().lower_expectation(&lg(&[1.0, 0.0])).unwrap(), 0.4);
        assert_eq!(CredalSet::vacuous(2).lower_expectation(&lg(&[1.0, 0.0])).unwrap(), 0.0);
        assert_eq!(coin().upper_expectation(&lg(&[3.25, 3.25])).unwrap(), 3.25);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(matches!(
            coin().upper_expectation(&lg(&[1.0, 0.0, 2.0])),
            Err(Error::InvalidInput(_))
        ));
        assert!(coin().upper_expectation(&LocalGamble::new(vec![PosInf, Finite(0.0)])).is_err());
    }

    #[test]
    fn mass_functions_are_validated() {
        assert!(MassFunction::new(vec![0.5, 0.6]).is_err());
        assert!(MassFunction::new(vec![-0.1, 1.1]).is_err());
        assert!(MassFunction::new(vec![f64::NAN, 1.0]).is_err());
        let p = MassFunction::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_points_are_removed_exactly() {
        let c = CredalSet::from_weights(vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.4, 0.6]]).unwrap();
        assert_eq!(c.points().len(), 2);
        assert!(CredalSet::new(vec![]).is_err());
    }

    #[test]
    fn extended_examples() {
        let half = CredalSet::from_weights(vec![vec![0.5, 0.5]]).unwrap();
        let f = LocalGamble::new(vec![PosInf, Finite(1.0)]);
        assert_eq!(half.extended_upper_expectation(&f).unwrap(), PosInf);
        assert_eq!(half.cut_limit_upper(&f, &CutSchedule::default()).unwrap(), PosInf);

        let tails = CredalSet::from_weights(vec![vec![0.0, 1.0]]).unwrap();
        assert_eq!(tails.extended_upper_expectation(&f).unwrap(), Finite(1.0));
        assert_eq!(tails.cut_limit_upper(&f, &CutSchedule::default()).unwrap(), Finite(1.0));

        let g = LocalGamble::new(vec![NegInf, Finite(2.0)]);
        assert_eq!(coin().extended_upper_expectation(&g).unwrap(), NegInf);
        assert_eq!(coin().cut_limit_upper(&g, &CutSchedule::default()).unwrap(), NegInf);

        let both = LocalGamble::new(vec![NegInf, NegInf]);
        assert_eq!(coin().cut_limit_upper(&both, &CutSchedule::default()).unwrap(), NegInf);
    }

    #[test]
    fn plus_infinity_wins_over_minus_infinity() {
        let c = CredalSet::from_weights(vec![vec![0.5, 0.5]]).unwrap();
        let f = LocalGamble::new(vec![PosInf, NegInf]);
        assert_eq!(c.extended_upper_expectation(&f).unwrap(), PosInf);
        assert_eq!(c.cut_limit_upper(&f, &CutSchedule::default()).unwrap(), PosInf);
    }

    #[test]
    fn subadditivity_by_hand() {
        let (f, g) = (vec![1.0, 0.0], vec![0.0, 1.0]);
        let c = coin();
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        assert_eq!(c.upper(&sum), 1.0);
        assert!((c.upper(&f) + c.upper(&g) - 1.2).abs() < 1e-15);
        assert!(c.check_local_axioms(&[f, g]).passed());
    }

    #[test]
    fn zero_scaling_of_extended_gamble() {
        let f = LocalGamble::new(vec![PosInf, NegInf]);
        let zero: Vec<ExtendedReal> = f.values().iter().map(|v| 0.0 * *v).collect();
        assert_eq!(coin().extended_upper(&zero), Finite(0.0));
    }

    #[test]
    fn precise_model_passes_c_axioms() {
        let c = CredalSet::from_weights(vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let gambles: Vec<Vec<f64>> = (0..100)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin() * 5.0, (t * 1.3).cos() * 3.0, t % 7.0 - 3.0]
            })
            .collect();
        let report = c.check_local_axioms(&gambles);
        assert!(report.passed(), "{:?}", report.violations);
        assert_eq!(report.checks, 100 * 9);
    }
}
