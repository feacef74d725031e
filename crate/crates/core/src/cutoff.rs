//! Cutoff verification: an indexed formula is decided on the instance with
//! as many agents as it has distinct indices.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checker::{Checker, Witness};
use crate::error::{Error, Result};
use crate::iis::ConcreteModel;
use crate::logic::{expand_full, index_count, reduce_symmetry, GroundFormula, IndexedFormula};
use crate::template::{instantiate, TemplateAgent};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub agents: usize,
    pub states: usize,
    pub transitions: usize,
    pub build_ms: f64,
    pub check_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub formula: String,
    /// The formula as written.
    pub property: String,
    /// `None` for a fixed (non-parameterised) system.
    pub cutoff: Option<usize>,
    /// The formula actually checked.
    pub reduced: GroundFormula,
    pub instance: InstanceStats,
    pub verdict: bool,
    pub witness: Option<Witness>,
    /// The witness rendered with state names.
    pub witness_text: Vec<String>,
    pub claim: String,
}

/// Number of distinct indices of `f`.
pub fn cutoff_of(f: &IndexedFormula) -> usize {
    index_count(f)
}

fn ms_since(t: Instant) -> f64 {
    (t.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

fn claim(verdict: bool, cutoff: Option<usize>) -> String {
    let word = if verdict { "holds" } else { "fails" };
    match cutoff {
        Some(c) => format!("{word} for every T(n), n \u{2265} {c}"),
        None => format!("{word} on the given system"),
    }
}

fn build(t: &Arc<TemplateAgent>, n: usize, cap: usize) -> Result<(ConcreteModel, f64)> {
    let start = Instant::now();
    let m = instantiate(t, n, cap)?;
    Ok((m, ms_since(start)))
}

/// Checks `g` on `m` and packages the outcome.
pub fn report_on(
    m: &ConcreteModel,
    name: &str,
    property: String,
    cutoff: Option<usize>,
    g: &GroundFormula,
    build_ms: f64,
) -> Result<CutoffReport> {
    let start = Instant::now();
    let v = Checker::new(m).check_at(m.init(), g)?;
    let check_ms = ms_since(start);
    let witness_text = v.witness.as_ref().map(|w| w.render(m)).unwrap_or_default();
    Ok(CutoffReport {
        formula: name.to_string(),
        property,
        cutoff,
        reduced: g.clone(),
        instance: InstanceStats {
            agents: m.agent_count(),
            states: m.state_count(),
            transitions: m.transition_count(),
            build_ms,
            check_ms,
        },
        verdict: v.holds,
        witness: v.witness,
        witness_text,
        claim: claim(v.holds, cutoff),
    })
}

/// Builds `T(c)` for `c = cutoff_of(f)` and checks the canonical reduced
/// formula there.
pub fn verify(t: &Arc<TemplateAgent>, name: &str, f: &IndexedFormula, cap: usize) -> Result<CutoffReport> {
    let c = cutoff_of(f);
    let g = reduce_symmetry(f)?;
    let (m, build_ms) = build(t, c, cap)?;
    report_on(&m, name, f.to_string(), Some(c), &g, build_ms)
}

/// Checks a formula over fixed agents `1..=k` on `T(k)`, `k` its largest
/// agent index. The verdict carries over to every larger instance.
pub fn verify_ground(t: &Arc<TemplateAgent>, name: &str, g: &GroundFormula, cap: usize) -> Result<CutoffReport> {
    let k = g.max_agent().max(1);
    let (m, build_ms) = build(t, k, cap)?;
    report_on(&m, name, g.to_string(), Some(k), g, build_ms)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    /// `None` on the row where the state cap was reached.
    pub verdict: Option<bool>,
    pub states: Option<usize>,
    pub transitions: Option<usize>,
    pub ms: f64,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub formula: String,
    pub cutoff: usize,
    pub reduced: GroundFormula,
    pub rows: Vec<SweepRow>,
    /// Whether the table stops early at a capped row.
    pub truncated: bool,
}

impl SweepTable {
    /// All computed verdicts agree.
    pub fn constant(&self) -> bool {
        let mut vs = self.rows.iter().filter_map(|r| r.verdict);
        match vs.next() {
            Some(first) => vs.all(|v| v == first),
            None => true,
        }
    }
}

fn sweep_row(t: &Arc<TemplateAgent>, g: &GroundFormula, n: usize, cap: usize) -> Result<SweepRow> {
    let start = Instant::now();
    match instantiate(t, n, cap) {
        Ok(m) => {
            let v = Checker::new(&m).check_at(m.init(), g)?;
            Ok(SweepRow {
                n,
                verdict: Some(v.holds),
                states: Some(m.state_count()),
                transitions: Some(m.transition_count()),
                ms: ms_since(start),
                note: None,
            })
        }
        Err(Error::StateCap { cap }) => Ok(SweepRow {
            n,
            verdict: None,
            states: None,
            transitions: None,
            ms: ms_since(start),
            note: Some(format!("state cap of {cap} reached")),
        }),
        Err(e) => Err(e),
    }
}

/// Checks the reduced formula on every `T(n)` from the cutoff to `max_n`.
/// Rows are computed in parallel; the table ends at the first capped row.
pub fn sweep(t: &Arc<TemplateAgent>, name: &str, f: &IndexedFormula, max_n: usize, cap: usize) -> Result<SweepTable> {
    let c = cutoff_of(f);
    if max_n < c {
        return Err(Error::TooFewAgents { n: max_n, needed: c });
    }
    let g = reduce_symmetry(f)?;
    let mut rows = (c..=max_n)
        .into_par_iter()
        .map(|n| sweep_row(t, &g, n, cap))
        .collect::<Result<Vec<_>>>()?;
    let truncated = match rows.iter().position(|r| r.verdict.is_none()) {
        Some(k) => {
            rows.truncate(k + 1);
            true
        }
        None => false,
    };
    Ok(SweepTable {
        formula: name.to_string(),
        cutoff: c,
        reduced: g,
        rows,
        truncated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpandReport {
    pub formula: String,
    pub n: usize,
    pub conjuncts: usize,
    pub reduced: bool,
    pub expanded: bool,
    pub states: usize,
    pub ms: f64,
}

impl ExpandReport {
    pub fn agree(&self) -> bool {
        self.reduced == self.expanded
    }
}

/// Checks both the reduced formula and the full conjunction over all
/// injective index assignments on `T(n)`.
pub fn expand_check(
    t: &Arc<TemplateAgent>,
    name: &str,
    f: &IndexedFormula,
    n: usize,
    cap: usize,
) -> Result<ExpandReport> {
    let start = Instant::now();
    let conjuncts = expand_full(f, n)?;
    let g = reduce_symmetry(f)?;
    let m = instantiate(t, n, cap)?;
    let mut checker = Checker::new(&m);
    let reduced = checker.sat(&g)?.contains(m.init().index());
    let mut expanded = true;
    for c in &conjuncts {
        if !checker.sat(c)?.contains(m.init().index()) {
            expanded = false;
            break;
        }
    }
    Ok(ExpandReport {
        formula: name.to_string(),
        n,
        conjuncts: conjuncts.len(),
        reduced,
        expanded,
        states: m.state_count(),
        ms: ms_since(start),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::iis::DEFAULT_STATE_CAP;
    use crate::pispl::{load, CompileOptions, Program, Property};

    fn robot() -> Program {
        load(corpus::ROBOT, &CompileOptions::default()).unwrap()
    }

    fn indexed(p: &Program, name: &str) -> IndexedFormula {
        match &p.formula(name).unwrap().property {
            Property::Indexed(f) => f.clone(),
            Property::Ground(_) => panic!(),
        }
    }

    #[test]
    fn robot_cutoffs() {
        let p = robot();
        let cs: Vec<usize> = ["AR1", "AR2", "AR3", "AR4"].iter().map(|n| cutoff_of(&indexed(&p, n))).collect();
        assert_eq!(cs, vec![1, 1, 2, 2]);
    }

    #[test]
    fn verify_robot_formulas() {
        let p = robot();
        let t = p.template().unwrap();
        let ar3 = verify(t, "AR3", &indexed(&p, "AR3"), DEFAULT_STATE_CAP).unwrap();
        assert!(ar3.verdict);
        assert_eq!(ar3.claim, "holds for every T(n), n \u{2265} 2");
        assert_eq!(ar3.instance.states, 201);
        let ar4 = verify(t, "AR4", &indexed(&p, "AR4"), DEFAULT_STATE_CAP).unwrap();
        assert!(!ar4.verdict);
        assert!(ar4.witness_text.iter().any(|l| l.contains("cannot distinguish")));
        let ar1 = verify(t, "AR1", &indexed(&p, "AR1"), DEFAULT_STATE_CAP).unwrap();
        assert!(ar1.verdict);
        assert_eq!(ar1.instance.agents, 1);
    }

    #[test]
    fn capped_sweep_is_truncated() {
        let p = robot();
        let t = p.template().unwrap();
        let s = sweep(t, "AR3", &indexed(&p, "AR3"), 4, 500).unwrap();
        assert!(s.truncated);
        assert_eq!(s.rows.len(), 2);
        assert_eq!(s.rows[0].verdict, Some(true));
        assert!(s.rows[1].note.as_deref().unwrap().contains("500"));
        assert!(sweep(t, "AR3", &indexed(&p, "AR3"), 1, 500).is_err());
    }

    #[test]
    fn expansion_agrees_at_three() {
        let p = robot();
        let t = p.template().unwrap();
        let r = expand_check(t, "AR3", &indexed(&p, "AR3"), 3, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(r.conjuncts, 6);
        assert!(r.reduced && r.expanded);
        let r = expand_check(t, "AR1", &indexed(&p, "AR1"), 1, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(r.conjuncts, 1);
        assert!(r.agree());
    }
}
