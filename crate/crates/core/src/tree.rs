//! Situations and probability trees.
//!
//! A tree assigns a local model to every situation (finite state history).
//! Three assignment forms are supported: homogeneous (one model everywhere),
//! Markov (the model depends on the last state only) and table (explicit
//! models for finitely many situations on top of a base assignment).
//!
//! Every assignment admits a finite [`Context`] abstraction: the local model
//! of a situation depends only on its context, and the context of `s·x` is a
//! function of the context of `s` and `x`. The sequential engines use this to
//! run backward and forward recursions over long horizons without expanding
//! the full tree.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::local::{CredalSet, MassFunction, StateSpace};

/// Default bound on the number of compatible trees `enumerate_compatible`
/// will produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 20;

/// Tolerance for convex-hull membership.
pub const HULL_TOLERANCE: f64 = 1e-9;

/// A finite sequence of state indices; the empty sequence is the initial
/// situation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, serde::Serialize)]
pub struct Situation(Vec<usize>);

impl Situation {
    pub fn root() -> Self {
        Situation(Vec::new())
    }

    pub fn new(states: Vec<usize>) -> Self {
        Situation(states)
    }

    /// Parses comma-separated state labels; the empty string is the root.
    pub fn parse(text: &str, space: &StateSpace) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() || text == "□" {
            return Ok(Situation::root());
        }
        let labels: Vec<&str> = text.split(',').map(str::trim).collect();
        Ok(Situation(space.indices_of(&labels)?))
    }

    pub fn from_labels<S: AsRef<str>>(labels: &[S], space: &StateSpace) -> Result<Self> {
        Ok(Situation(space.indices_of(labels)?))
    }

    pub fn states(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn child(&self, x: usize) -> Situation {
        let mut states = self.0.clone();
        states.push(x);
        Situation(states)
    }

    pub fn prefix(&self, n: usize) -> Situation {
        Situation(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn starts_with(&self, other: &Situation) -> bool {
        self.0.starts_with(&other.0)
    }

    pub fn validate(&self, space: &StateSpace) -> Result<()> {
        match self.0.iter().find(|&&x| x >= space.len()) {
            Some(x) => Err(Error::invalid(format!(
                "state index {x} out of range for {} states",
                space.len()
            ))),
            None => Ok(()),
        }
    }

    /// Renders with labels, comma separated; the root renders as `""`.
    pub fn display(&self, space: &StateSpace) -> String {
        self.0
            .iter()
            .map(|&x| space.label(x))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Position of this situation among all situations of the same length,
    /// in base-`k` order with the first state most significant.
    pub fn rank(&self, k: usize) -> usize {
        self.0.iter().fold(0, |acc, &x| acc * k + x)
    }

    /// Inverse of [`Situation::rank`].
    pub fn from_rank(mut rank: usize, len: usize, k: usize) -> Self {
        let mut states = vec![0; len];
        for slot in states.iter_mut().rev() {
            *slot = rank % k;
            rank /= k;
        }
        Situation(states)
    }
}

impl fmt::Display for Situation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("□");
        }
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// The set of paths through a situation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CylinderEvent {
    pub situation: Situation,
}

/// How local models are attached to situations.
#[derive(Debug, Clone, PartialEq)]
pub enum Assignment<T> {
    Homogeneous(T),
    /// `initial` applies at the root, `transitions[x]` after state `x`.
    Markov { initial: T, transitions: Vec<T> },
    /// Explicit models for situations of length `≤ depth`; everything else
    /// falls through to `base`.
    Table {
        depth: usize,
        entries: BTreeMap<Situation, T>,
        base: Box<Assignment<T>>,
    },
}

/// Finite summary of a situation that determines its local model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Context {
    Homogeneous,
    Markov(Option<usize>),
    /// Inside a table, on a branch that still leads to explicit entries.
    Exact(Situation),
    /// Inside a table, past every explicit entry.
    Base(Box<Context>),
}

impl<T> Assignment<T> {
    pub fn get(&self, s: &Situation) -> &T {
        match self {
            Assignment::Homogeneous(model) => model,
            Assignment::Markov {
                initial,
                transitions,
            } => match s.last() {
                None => initial,
                Some(x) => &transitions[x],
            },
            Assignment::Table { entries, base, .. } => {
                entries.get(s).unwrap_or_else(|| base.get(s))
            }
        }
    }

    pub fn map<U>(&self, f: &impl Fn(&T) -> U) -> Assignment<U> {
        match self {
            Assignment::Homogeneous(model) => Assignment::Homogeneous(f(model)),
            Assignment::Markov {
                initial,
                transitions,
            } => Assignment::Markov {
                initial: f(initial),
                transitions: transitions.iter().map(f).collect(),
            },
            Assignment::Table {
                depth,
                entries,
                base,
            } => Assignment::Table {
                depth: *depth,
                entries: entries.iter().map(|(s, m)| (s.clone(), f(m))).collect(),
                base: Box::new(base.map(f)),
            },
        }
    }

    pub fn context_of(&self, s: &Situation) -> Context {
        match self {
            Assignment::Homogeneous(_) => Context::Homogeneous,
            Assignment::Markov { .. } => Context::Markov(s.last()),
            Assignment::Table { entries, base, .. } => {
                let leads_to_entry = entries
                    .range(s.clone()..)
                    .next()
                    .is_some_and(|(key, _)| key.starts_with(s));
                if leads_to_entry {
                    Context::Exact(s.clone())
                } else {
                    Context::Base(Box::new(base.context_of(s)))
                }
            }
        }
    }

    pub fn next_context(&self, ctx: &Context, x: usize) -> Context {
        match (self, ctx) {
            (Assignment::Homogeneous(_), _) => Context::Homogeneous,
            (Assignment::Markov { .. }, _) => Context::Markov(Some(x)),
            (Assignment::Table { .. }, Context::Exact(s)) => self.context_of(&s.child(x)),
            (Assignment::Table { base, .. }, Context::Base(inner)) => {
                Context::Base(Box::new(base.next_context(inner, x)))
            }
            _ => unreachable!("context {ctx:?} does not belong to this assignment"),
        }
    }

    pub fn at_context(&self, ctx: &Context) -> &T {
        match (self, ctx) {
            (Assignment::Homogeneous(model), _) => model,
            (Assignment::Markov { initial, .. }, Context::Markov(None)) => initial,
            (Assignment::Markov { transitions, .. }, Context::Markov(Some(x))) => &transitions[*x],
            (Assignment::Table { .. }, Context::Exact(s)) => self.get(s),
            (Assignment::Table { base, .. }, Context::Base(inner)) => base.at_context(inner),
            _ => unreachable!("context {ctx:?} does not belong to this assignment"),
        }
    }

    fn for_each_model(&self, visit: &mut impl FnMut(&T)) {
        match self {
            Assignment::Homogeneous(model) => visit(model),
            Assignment::Markov {
                initial,
                transitions,
            } => {
                visit(initial);
                transitions.iter().for_each(visit);
            }
            Assignment::Table { entries, base, .. } => {
                entries.values().for_each(&mut *visit);
                base.for_each_model(visit);
            }
        }
    }

    fn validate_shape(&self, k: usize) -> Result<()> {
        match self {
            Assignment::Homogeneous(_) => Ok(()),
            Assignment::Markov { transitions, .. } => {
                if transitions.len() != k {
                    return Err(Error::invalid(format!(
                        "markov model has {} transition models for {k} states",
                        transitions.len()
                    )));
                }
                Ok(())
            }
            Assignment::Table {
                depth,
                entries,
                base,
            } => {
                for s in entries.keys() {
                    if s.len() > *depth {
                        return Err(Error::invalid(format!(
                            "table entry {s} is deeper than the declared depth {depth}"
                        )));
                    }
                    if let Some(x) = s.states().iter().find(|&&x| x >= k) {
                        return Err(Error::invalid(format!("table entry uses state index {x} ≥ {k}")));
                    }
                }
                base.validate_shape(k)
            }
        }
    }
}

pub trait LocalModel {
    fn dim(&self) -> usize;
}

impl LocalModel for CredalSet {
    fn dim(&self) -> usize {
        CredalSet::dim(self)
    }
}

impl LocalModel for MassFunction {
    fn dim(&self) -> usize {
        self.len()
    }
}

/// A probability tree over a state space with local models of type `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree<T> {
    space: StateSpace,
    assignment: Assignment<T>,
}

/// Credal sets at every situation.
pub type ImpreciseTree = Tree<CredalSet>;
/// A single mass function at every situation.
pub type PreciseTree = Tree<MassFunction>;

impl<T: LocalModel> Tree<T> {
    pub fn new(space: StateSpace, assignment: Assignment<T>) -> Result<Self> {
        let k = space.len();
        assignment.validate_shape(k)?;
        let mut bad = None;
        assignment.for_each_model(&mut |m: &T| {
            if m.dim() != k && bad.is_none() {
                bad = Some(m.dim());
            }
        });
        if let Some(dim) = bad {
            return Err(Error::invalid(format!(
                "local model has dimension {dim}, state space has {k} states"
            )));
        }
        Ok(Tree { space, assignment })
    }
}

impl<T> Tree<T> {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn k(&self) -> usize {
        self.space.len()
    }

    pub fn assignment(&self) -> &Assignment<T> {
        &self.assignment
    }

    /// Resolves the local model of `s`.
    pub fn local_model(&self, s: &Situation) -> Result<&T> {
        s.validate(&self.space)?;
        Ok(self.assignment.get(s))
    }

    /// Unchecked lookup for situations already known to be valid.
    pub(crate) fn model_at(&self, s: &Situation) -> &T {
        self.assignment.get(s)
    }

    pub fn context_of(&self, s: &Situation) -> Context {
        self.assignment.context_of(s)
    }

    pub fn next_context(&self, ctx: &Context, x: usize) -> Context {
        self.assignment.next_context(ctx, x)
    }

    pub fn at_context(&self, ctx: &Context) -> &T {
        self.assignment.at_context(ctx)
    }
}

impl ImpreciseTree {
    pub fn homogeneous(space: StateSpace, credal: CredalSet) -> Result<Self> {
        Tree::new(space, Assignment::Homogeneous(credal))
    }

    /// The precise tree that picks the first extreme point everywhere.
    pub fn first_selection(&self) -> PreciseTree {
        Tree {
            space: self.space.clone(),
            assignment: self.assignment.map(&|c: &CredalSet| c.points()[0].clone()),
        }
    }
}

impl PreciseTree {
    pub fn to_imprecise(&self) -> ImpreciseTree {
        Tree {
            space: self.space.clone(),
            assignment: self.assignment.map(&|p: &MassFunction| CredalSet::singleton(p.clone())),
        }
    }
}

/// Whether `p` lies in the convex hull of the credal set's extreme points.
///
/// By Carathéodory it suffices to test subsets of at most `k` points; each
/// subset is a small least-squares problem for barycentric coordinates.
pub fn hull_contains(credal: &CredalSet, p: &MassFunction, tol: f64) -> bool {
    use nalgebra::{DMatrix, DVector};

    let points = credal.points();
    let k = credal.dim();
    if p.len() != k {
        return false;
    }
    let target = DVector::from_iterator(k + 1, p.weights().iter().copied().chain(std::iter::once(1.0)));
    let max_size = points.len().min(k);
    let mut subset = Vec::with_capacity(max_size);

    fn search(
        points: &[MassFunction],
        target: &DVector<f64>,
        start: usize,
        remaining: usize,
        subset: &mut Vec<usize>,
        tol: f64,
    ) -> bool {
        if !subset.is_empty() {
            let k = target.len() - 1;
            let a = DMatrix::from_fn(k + 1, subset.len(), |row, col| {
                if row < k {
                    points[subset[col]].get(row)
                } else {
                    1.0
                }
            });
            if let Ok(lambda) = a.clone().svd(true, true).solve(target, 1e-14) {
                let residual = (&a * &lambda - target).amax();
                if residual <= tol && lambda.iter().all(|&l| l >= -tol) {
                    return true;
                }
            }
        }
        if remaining == 0 {
            return false;
        }
        for i in start..points.len() {
            subset.push(i);
            if search(points, target, i + 1, remaining - 1, subset, tol) {
                return true;
            }
            subset.pop();
        }
        false
    }

    search(points, &target, 0, max_size, &mut subset, tol)
}

/// Whether `p` selects a member of `q`'s credal set at every situation of
/// length `< depth` (or at every situation when `depth` is `None`).
///
/// Works on pairs of contexts, so it is exact for unbounded depth too.
pub fn is_compatible(p: &PreciseTree, q: &ImpreciseTree, depth: Option<usize>) -> bool {
    if p.k() != q.k() {
        return false;
    }
    let k = p.k();
    let root = Situation::root();
    let start = (p.context_of(&root), q.context_of(&root));
    let mut seen: HashSet<(Context, Context)> = HashSet::new();
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some(((pc, qc), level)) = queue.pop_front() {
        if depth.is_some_and(|d| level >= d) {
            continue;
        }
        if !seen.insert((pc.clone(), qc.clone())) {
            continue;
        }
        if !hull_contains(q.at_context(&qc), p.at_context(&pc), HULL_TOLERANCE) {
            return false;
        }
        for x in 0..k {
            queue.push_back(((p.next_context(&pc, x), q.next_context(&qc, x)), level + 1));
        }
    }
    true
}

/// All situations of length `< depth`, shortest first, each level in rank order.
pub fn situations_below(k: usize, depth: usize) -> Vec<Situation> {
    let mut out = Vec::new();
    let mut width = 1usize;
    for len in 0..depth {
        out.extend((0..width).map(|r| Situation::from_rank(r, len, k)));
        width *= k;
    }
    out
}

/// Iterator over compatible precise trees that select one extreme point per
/// situation of length `< depth`, and the first extreme point beyond.
pub struct CompatibleTrees<'a> {
    q: &'a ImpreciseTree,
    depth: usize,
    situations: Vec<Situation>,
    radices: Vec<usize>,
    counter: Option<Vec<usize>>,
    base: Assignment<MassFunction>,
    total: u128,
}

impl<'a> CompatibleTrees<'a> {
    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn situations(&self) -> &[Situation] {
        &self.situations
    }

    fn build(&self, choice: &[usize]) -> PreciseTree {
        let entries = self
            .situations
            .iter()
            .zip(choice)
            .map(|(s, &i)| (s.clone(), self.q.model_at(s).points()[i].clone()))
            .collect();
        Tree {
            space: self.q.space.clone(),
            assignment: Assignment::Table {
                depth: self.depth.saturating_sub(1),
                entries,
                base: Box::new(self.base.clone()),
            },
        }
    }
}

impl Iterator for CompatibleTrees<'_> {
    type Item = PreciseTree;

    fn next(&mut self) -> Option<PreciseTree> {
        let counter = self.counter.as_mut()?;
        let current = counter.clone();
        // mixed-radix increment, last situation fastest
        let mut carry = true;
        for (digit, radix) in counter.iter_mut().zip(&self.radices).rev() {
            if !carry {
                break;
            }
            *digit += 1;
            if *digit == *radix {
                *digit = 0;
            } else {
                carry = false;
            }
        }
        if carry {
            self.counter = None;
        }
        Some(self.build(&current))
    }
}

/// Enumerates every extreme-point selection up to `depth`.
///
/// Fails with a resource-limit error when the number of selections exceeds
/// `cap`.
pub fn enumerate_compatible(q: &ImpreciseTree, depth: usize, cap: u128) -> Result<CompatibleTrees<'_>> {
    let situations = situations_below(q.k(), depth);
    let radices: Vec<usize> = situations.iter().map(|s| q.model_at(s).points().len()).collect();
    let total = radices
        .iter()
        .fold(1u128, |acc, &r| acc.saturating_mul(r as u128));
    if total > cap {
        return Err(Error::ResourceLimit {
            what: format!("compatible trees up to depth {depth}"),
            count: total,
            cap,
        });
    }
    Ok(CompatibleTrees {
        q,
        depth,
        counter: Some(vec![0; situations.len()]),
        situations,
        radices,
        base: q.first_selection().assignment,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> StateSpace {
        StateSpace::new(["H", "T"]).unwrap()
    }

    fn coin() -> CredalSet {
        CredalSet::from_weights(vec![vec![0.4, 0.6], vec![0.6, 0.4]]).unwrap()
    }

    fn point(w: &[f64]) -> CredalSet {
        CredalSet::from_weights(vec![w.to_vec()]).unwrap()
    }

    #[test]
    fn lookups_follow_assignment_form() {
        let sp = space();
        let h = ImpreciseTree::homogeneous(sp.clone(), coin()).unwrap();
        assert_eq!(h.local_model(&Situation::new(vec![1, 0, 1])).unwrap(), &coin());

        let (ca, cb) = (point(&[0.1, 0.9]), point(&[0.8, 0.2]));
        let m = Tree::new(
            sp.clone(),
            Assignment::Markov {
                initial: coin(),
                transitions: vec![ca.clone(), cb.clone()],
            },
        )
        .unwrap();
        assert_eq!(m.local_model(&Situation::new(vec![0, 1])).unwrap(), &cb);
        assert_eq!(m.local_model(&Situation::root()).unwrap(), &coin());

        let (c0, c1) = (point(&[0.5, 0.5]), point(&[0.3, 0.7]));
        let t = Tree::new(
            sp,
            Assignment::Table {
                depth: 1,
                entries: BTreeMap::from([(Situation::new(vec![0]), c1.clone())]),
                base: Box::new(Assignment::Homogeneous(c0.clone())),
            },
        )
        .unwrap();
        assert_eq!(t.local_model(&Situation::new(vec![1, 0])).unwrap(), &c0);
        assert_eq!(t.local_model(&Situation::new(vec![0])).unwrap(), &c1);
        assert!(t.local_model(&Situation::new(vec![2])).is_err());
    }

    #[test]
    fn table_entries_deeper_than_declared_are_rejected() {
        let res = Tree::new(
            space(),
            Assignment::Table {
                depth: 0,
                entries: BTreeMap::from([(Situation::new(vec![0]), coin())]),
                base: Box::new(Assignment::Homogeneous(coin())),
            },
        );
        assert!(res.is_err());
    }

    #[test]
    fn contexts_agree_with_direct_lookup() {
        let sp = space();
        let mut entries = BTreeMap::new();
        entries.insert(Situation::new(vec![0, 1]), point(&[0.2, 0.8]));
        entries.insert(Situation::new(vec![1]), point(&[0.9, 0.1]));
        let base = Assignment::Markov {
            initial: coin(),
            transitions: vec![point(&[0.3, 0.7]), point(&[0.7, 0.3])],
        };
        let t = Tree::new(sp, Assignment::Table { depth: 2, entries, base: Box::new(base) }).unwrap();
        for s in situations_below(2, 5) {
            let mut ctx = t.context_of(&Situation::root());
            for &x in s.states() {
                ctx = t.next_context(&ctx, x);
            }
            assert_eq!(t.at_context(&ctx), t.local_model(&s).unwrap(), "at {s}");
            assert_eq!(ctx, t.context_of(&s));
        }
    }

    #[test]
    fn hull_membership() {
        let c = coin();
        let mid = MassFunction::new(vec![0.5, 0.5]).unwrap();
        let out = MassFunction::new(vec![0.7, 0.3]).unwrap();
        assert!(hull_contains(&c, &c.points()[0], HULL_TOLERANCE));
        assert!(hull_contains(&c, &mid, HULL_TOLERANCE));
        assert!(!hull_contains(&c, &out, HULL_TOLERANCE));

        let tri = CredalSet::vacuous(3);
        assert!(hull_contains(&tri, &MassFunction::new(vec![0.2, 0.3, 0.5]).unwrap(), HULL_TOLERANCE));
        let edge = CredalSet::from_weights(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert!(!hull_contains(&edge, &MassFunction::new(vec![0.2, 0.3, 0.5]).unwrap(), HULL_TOLERANCE));
    }

    #[test]
    fn compatibility_checks() {
        let q = ImpreciseTree::homogeneous(space(), coin()).unwrap();
        let p_ext = Tree::new(space(), Assignment::Homogeneous(MassFunction::new(vec![0.6, 0.4]).unwrap())).unwrap();
        let p_mid = Tree::new(space(), Assignment::Homogeneous(MassFunction::uniform(2))).unwrap();
        let p_out = Tree::new(space(), Assignment::Homogeneous(MassFunction::new(vec![0.7, 0.3]).unwrap())).unwrap();
        assert!(is_compatible(&p_ext, &q, None));
        assert!(is_compatible(&p_mid, &q, Some(3)));
        assert!(!is_compatible(&p_out, &q, Some(1)));
        assert!(is_compatible(&p_out, &q, Some(0)));
    }

    #[test]
    fn enumeration_counts() {
        let q = ImpreciseTree::homogeneous(space(), coin()).unwrap();
        assert_eq!(enumerate_compatible(&q, 1, DEFAULT_ENUMERATION_CAP).unwrap().count(), 2);
        let trees: Vec<_> = enumerate_compatible(&q, 2, DEFAULT_ENUMERATION_CAP).unwrap().collect();
        assert_eq!(trees.len(), 8);
        for t in &trees {
            assert!(is_compatible(t, &q, Some(2)));
            assert!(is_compatible(t, &q, None));
        }
        let distinct: HashSet<String> = trees.iter().map(|t| format!("{:?}", t.assignment())).collect();
        assert_eq!(distinct.len(), 8);

        let single = ImpreciseTree::homogeneous(space(), point(&[0.5, 0.5])).unwrap();
        assert_eq!(enumerate_compatible(&single, 3, DEFAULT_ENUMERATION_CAP).unwrap().count(), 1);

        match enumerate_compatible(&q, 5, 1000) {
            Err(Error::ResourceLimit { count, .. }) => assert_eq!(count, 1 << 31),
            other => panic!("expected resource limit, got {:?}", other.map(|t| t.total())),
        }
    }

    #[test]
    fn rank_round_trip() {
        for r in 0..27 {
            assert_eq!(Situation::from_rank(r, 3, 3).rank(3), r);
        }
        assert_eq!(Situation::new(vec![1, 0]).rank(2), 2);
    }
}
