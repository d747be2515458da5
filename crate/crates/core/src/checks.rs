//! Property suites: local coherence, the extended local axioms, the global
//! properties of the backward-recursion model, Fatou on stabilizing
//! sequences and the oracle cross-check.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::game::finitary_upper;
use crate::gambles::FinitaryGamble;
use crate::local::{AxiomReport, CutSchedule, AXIOM_TOLERANCE};
use crate::oracle::{envelope_sup, EnvelopeMethod};
use crate::random;
use crate::tree::{ImpreciseTree, Situation};

/// Evaluates `E(f | s)`; lets the same checks run against the recursion
/// engine and the enumeration oracle.
pub type Evaluator<'a> = dyn Fn(&FinitaryGamble, &Situation) -> Result<f64> + 'a;

/// Sup and inf of `f` over strings through `s`.
fn range_through(f: &FinitaryGamble, s: &Situation) -> (f64, f64) {
    if s.len() >= f.depth() {
        let v = f.value(s);
        return (v, v);
    }
    let block = f.block(s);
    (
        block.iter().copied().fold(f64::INFINITY, f64::min),
        block.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

/// Global properties of the upper expectation on one instance.
///
/// `g` is a second gamble of the same depth; `lambda ≥ 0` and `mu` are the
/// scale and shift for the homogeneity and constant-additivity checks.
#[allow(clippy::too_many_arguments)]
pub fn check_global_properties(
    tree: &ImpreciseTree,
    upper: &Evaluator<'_>,
    f: &FinitaryGamble,
    g: &FinitaryGamble,
    s: &Situation,
    lambda: f64,
    mu: f64,
    one_step: &[f64],
) -> Result<AxiomReport> {
    let tol = AXIOM_TOLERANCE;
    let k = tree.k();
    let mut report = AxiomReport::default();
    let uf = upper(f, s)?;

    // A gamble on the next state only reduces to the local model.
    let n = s.len();
    let h = FinitaryGamble::from_fn(k, n + 1, usize::MAX, |z| one_step[z.states()[n]])?;
    let global = upper(&h, s)?;
    let local = tree.model_at(s).upper(one_step);
    report.check("local-agreement", (global - local).abs() <= tol, || {
        format!("global {global} ≠ local {local} at {s}")
    });

    // Only the paths through s matter.
    let restricted = upper(&f.restrict(s), s)?;
    report.check("restriction", (restricted - uf).abs() <= tol, || {
        format!("E(f|s)={uf} but E(f·1_s|s)={restricted} at {s}")
    });

    // Iterated expectation: replace f by its one-step-ahead conditional upper expectation.
    let depth = f.depth().max(n + 1);
    let mut failure = None;
    let ahead = FinitaryGamble::from_fn(k, n + 1, usize::MAX, |z| {
        upper(f, z).unwrap_or_else(|e| {
            failure = Some(e);
            0.0
        })
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let iterated = upper(&ahead, s)?;
    report.check("iterated-expectation", (iterated - uf).abs() <= tol, || {
        format!("E(f|s)={uf} but E(E(f|s·)|s)={iterated} at {s} (depth {depth})")
    });

    let dominating = f.zip_with(g, f64::max);
    let ud = upper(&dominating, s)?;
    report.check("monotonicity", uf <= ud + tol, || format!("E(f|s)={uf} > E(f∨g|s)={ud}"));

    let lower = -upper(&f.neg(), s)?;
    let (inf, sup) = range_through(f, s);
    report.check("bounds", inf - tol <= lower && lower <= uf + tol && uf <= sup + tol, || {
        format!("bounds inf={inf} lower={lower} upper={uf} sup={sup} at {s}")
    });

    let sum = f.zip_with(g, |a, b| a + b);
    let (us, ug) = (upper(&sum, s)?, upper(g, s)?);
    report.check("subadditivity", us <= uf + ug + tol, || format!("E(f+g)={us} > {uf}+{ug}"));

    let scaled = upper(&f.map(|v| lambda * v), s)?;
    report.check("homogeneity", (scaled - lambda * uf).abs() <= tol * (1.0 + lambda), || {
        format!("E({lambda}f)={scaled} ≠ {lambda}·{uf}")
    });

    let shifted = upper(&f.map(|v| v + mu), s)?;
    report.check("constant-additivity", (shifted - (uf + mu)).abs() <= tol, || {
        format!("E(f+{mu})={shifted} ≠ {uf}+{mu}")
    });

    Ok(report)
}

/// Fatou's inequality for a finite sequence that is constant from index
/// `stable_from` on: `E(liminf f_n | s) ≤ liminf E(f_n | s)`, together with
/// `E(inf_{m≥n} f_m | s) ≤ inf_{m≥n} E(f_m | s)` for every `n`.
pub fn check_fatou(tree: &ImpreciseTree, sequence: &[FinitaryGamble], s: &Situation) -> Result<AxiomReport> {
    let mut report = AxiomReport::default();
    let values = sequence
        .iter()
        .map(|f| finitary_upper(tree, f, s))
        .collect::<Result<Vec<_>>>()?;
    for n in 0..sequence.len() {
        let tail_inf = sequence[n + 1..]
            .iter()
            .fold(sequence[n].clone(), |acc, f| acc.zip_with(f, f64::min));
        let lhs = finitary_upper(tree, &tail_inf, s)?;
        let rhs = values[n..].iter().copied().fold(f64::INFINITY, f64::min);
        report.check("Fatou", lhs <= rhs + AXIOM_TOLERANCE, || {
            format!("E(inf_(m≥{n}) f_m)={lhs} > inf E(f_m)={rhs} at {s}")
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteSection {
    pub name: String,
    pub instances: usize,
    pub report: AxiomReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub sections: Vec<SuiteSection>,
    pub passed: bool,
}

impl SuiteReport {
    fn new(seed: u64, sections: Vec<SuiteSection>) -> Self {
        let passed = sections.iter().all(|s| s.report.passed());
        SuiteReport { seed, sections, passed }
    }
}

/// Sizes of the random axiom suite.
#[derive(Debug, Clone, Copy)]
pub struct AxiomSuiteSize {
    pub local_gambles: usize,
    pub extended_gambles: usize,
    pub global_instances: usize,
    pub fatou_sequences: usize,
}

impl Default for AxiomSuiteSize {
    fn default() -> Self {
        AxiomSuiteSize {
            local_gambles: 500,
            extended_gambles: 200,
            global_instances: 200,
            fatou_sequences: 100,
        }
    }
}

/// Runs the local, extended (with the cut-limit comparison) and global suites and
/// Fatou on seeded random instances.
pub fn run_axiom_suite(seed: u64, size: AxiomSuiteSize) -> Result<SuiteReport> {
    let mut rng = random::rng(seed);
    let mut sections = Vec::new();

    let mut local = AxiomReport::default();
    let mut remaining = size.local_gambles;
    while remaining > 0 {
        let k = rng.gen_range(2..=4);
        let credal = random::credal_set(&mut rng, k, 4);
        let batch = remaining.min(10);
        let gambles: Vec<Vec<f64>> = (0..batch).map(|_| random::local_gamble(&mut rng, k, 10.0)).collect();
        local.merge(credal.check_local_axioms(&gambles));
        remaining -= batch;
    }
    sections.push(SuiteSection {
        name: "local coherence".into(),
        instances: size.local_gambles,
        report: local,
    });

    let mut extended = AxiomReport::default();
    let mut remaining = size.extended_gambles;
    let schedule = CutSchedule::default();
    while remaining > 0 {
        let k = rng.gen_range(2..=4);
        let credal = random::credal_set(&mut rng, k, 4);
        let batch = remaining.min(10);
        let gambles: Vec<_> = (0..batch).map(|_| random::extended_gamble(&mut rng, k, 10.0)).collect();
        extended.merge(credal.check_extended_axioms(&gambles, &schedule));
        remaining -= batch;
    }
    sections.push(SuiteSection {
        name: "extended coherence".into(),
        instances: size.extended_gambles,
        report: extended,
    });

    let mut global = AxiomReport::default();
    for _ in 0..size.global_instances {
        let k = rng.gen_range(2..=3);
        let tree = random::imprecise_tree(&mut rng, k, 3);
        let depth = rng.gen_range(1..=4);
        let f = random::gamble(&mut rng, k, depth, 5.0);
        let g = random::gamble(&mut rng, k, depth, 5.0);
        let s = random::situation(&mut rng, k, depth);
        let lambda = rng.gen_range(0.0..3.0);
        let mu = rng.gen_range(-5.0..5.0);
        let one_step = random::local_gamble(&mut rng, k, 5.0);
        let upper = |f: &FinitaryGamble, s: &Situation| finitary_upper(&tree, f, s);
        global.merge(check_global_properties(&tree, &upper, &f, &g, &s, lambda, mu, &one_step)?);
    }
    sections.push(SuiteSection {
        name: "global properties".into(),
        instances: size.global_instances,
        report: global,
    });

    let mut fatou = AxiomReport::default();
    for _ in 0..size.fatou_sequences {
        let k = rng.gen_range(2..=3);
        let tree = random::imprecise_tree(&mut rng, k, 3);
        let depth = rng.gen_range(1..=3);
        let stable_from = rng.gen_range(1..=6);
        let bound = -5.0;
        let mut sequence: Vec<FinitaryGamble> = (0..stable_from)
            .map(|_| random::gamble(&mut rng, k, depth, 5.0).map(|v| v.max(bound)))
            .collect();
        let last = sequence.last().cloned().expect("non-empty");
        sequence.extend(std::iter::repeat_n(last, 3));
        let s = random::situation(&mut rng, k, depth);
        fatou.merge(check_fatou(&tree, &sequence, &s)?);
    }
    sections.push(SuiteSection {
        name: "Fatou".into(),
        instances: size.fatou_sequences,
        report: fatou,
    });

    Ok(SuiteReport::new(seed, sections))
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleCase {
    pub k: usize,
    pub depth: usize,
    pub situation: String,
    pub selections: u128,
    pub enumerate: f64,
    pub recursion: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub trials: usize,
    pub max_difference: f64,
    pub cases: Vec<OracleCase>,
    /// Global properties evaluated with the enumeration oracle itself.
    pub oracle_properties: AxiomReport,
    pub passed: bool,
}

/// Tolerance for enumeration vs recursion.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

/// Compares the enumerated envelope with the backward recursion on random
/// instances, and checks the global properties on the enumerated envelope directly. With a
/// `model`, only the gambles and situations are random.
pub fn run_oracle_suite(
    model: Option<&ImpreciseTree>,
    seed: u64,
    trials: usize,
    max_depth: usize,
    cap: u128,
) -> Result<OracleReport> {
    let mut rng = random::rng(seed);
    let mut cases = Vec::with_capacity(trials);
    let mut props = AxiomReport::default();
    for trial in 0..trials {
        let (q, f, s) = match model {
            Some(q) => {
                let (f, s) = random::oracle_gamble(&mut rng, q, max_depth, cap);
                (q.clone(), f, s)
            }
            None => random::oracle_instance(&mut rng, &[2, 3], max_depth, 3, cap),
        };
        let enumerated = envelope_sup(&q, &f, &s, EnvelopeMethod::Enumerate, cap)?;
        let recursion = envelope_sup(&q, &f, &s, EnvelopeMethod::Recursion, cap)?;
        let difference = (enumerated.value - recursion.value).abs();
        cases.push(OracleCase {
            k: q.k(),
            depth: f.depth(),
            situation: s.display(q.space()),
            selections: enumerated.examined,
            enumerate: enumerated.value,
            recursion: recursion.value,
            difference,
        });

        // the oracle properties need gambles one level deeper; keep them small
        if trial % 4 == 0 && f.depth() <= 2 {
            let k = q.k();
            let g = random::gamble(&mut rng, k, f.depth(), 5.0);
            let one_step = random::local_gamble(&mut rng, k, 5.0);
            let s = s.prefix(f.depth().saturating_sub(1));
            let oracle = |h: &FinitaryGamble, t: &Situation| {
                envelope_sup(&q, h, t, EnvelopeMethod::Enumerate, cap).map(|e| e.value)
            };
            let report = check_global_properties(&q, &oracle, &f, &g, &s, 1.5, -0.5, &one_step)?;
            props.merge(report);
        }
    }
    let max_difference = cases.iter().map(|c| c.difference).fold(0.0, f64::max);
    let passed = max_difference <= ORACLE_TOLERANCE && props.passed();
    Ok(OracleReport {
        seed,
        trials,
        max_difference,
        cases,
        oracle_properties: props,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_axiom_suite_passes() {
        let size = AxiomSuiteSize {
            local_gambles: 50,
            extended_gambles: 40,
            global_instances: 20,
            fatou_sequences: 10,
        };
        let report = run_axiom_suite(3, size).unwrap();
        for section in &report.sections {
            assert!(section.report.passed(), "{}: {:?}", section.name, section.report.violations);
        }
    }

    #[test]
    fn small_oracle_suite_passes() {
        let report = run_oracle_suite(None, 7, 20, 3, 4096).unwrap();
        assert!(report.passed, "{:?}", report.oracle_properties.violations);
    }
}
