//! End-to-end stages over a scenario and the artifacts they produce.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value};

use crate::abstraction::{build_wts, product_gwts, secure_system, AbstractionError, SecurityMode, TransitionSystem};
use crate::feasibility::{prune_infeasible, SegmentCache};
use crate::ltl::{eval_lasso, to_hoa, translate_formula, Buchi, Symbol};
use crate::oracle::{check_lasso, check_path, collapse_stutter, trajectory_to_path, GlobalPath, SecurityVerdict};
use crate::planner::{assemble_trajectory, build_pba, search_prefix_suffix, PrefixSuffixPlan, ProductAutomaton, Role, TrajectoryBundle};
use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Usage(String),
    #[error("task infeasible: {0}")]
    TaskInfeasible(String),
    #[error("security infeasible: {0}")]
    SecurityInfeasible(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Scenario(_) | PipelineError::Usage(_) => 2,
            PipelineError::TaskInfeasible(_) => 3,
            PipelineError::SecurityInfeasible(_) => 4,
            PipelineError::Internal(_) => 5,
        }
    }
}

fn internal(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Internal(e.to_string())
}

/// Wall-clock time per stage, kept apart from the deterministic artifacts.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings(pub Vec<(String, f64)>);

impl Timings {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let secs = Duration::as_secs_f64(&start.elapsed());
        log::info!("{stage}: {secs:.3} s");
        self.0.push((stage.to_string(), secs));
        out
    }
}

pub fn validate_report(s: &Scenario) -> Value {
    let p = &s.partition;
    let regions: Vec<Value> = (0..p.len())
        .map(|q| {
            let poly = p.region(q);
            let (radius, _) = poly.chebyshev_ball().unwrap_or((f64::NAN, None));
            json!({
                "name": p.name(q),
                "center": p.center(q),
                "facets": poly.len(),
                "chebyshev_radius": radius,
                "volume": poly.volume().ok(),
                "neighbors": p.adjacent_pairs().filter(|&(a, _)| a == q).map(|(_, b)| p.name(b)).collect::<Vec<_>>(),
            })
        })
        .collect();
    let agents: Vec<Value> = s
        .agents
        .iter()
        .map(|a| {
            json!({
                "name": a.name,
                "initial": a.initial.iter().map(|&q| p.name(q)).collect::<Vec<_>>(),
                "secret": a.secret.iter().map(|&q| p.name(q)).collect::<Vec<_>>(),
                "observations": a.observations,
                "has_dynamics": a.dynamics.is_some(),
            })
        })
        .collect();
    json!({
        "scenario": s.name,
        "dimension": p.dim(),
        "regions": regions,
        "agents": agents,
        "formula": s.formula.as_ref().map(|f| f.to_string()),
        "security": s.security,
    })
}

pub struct Abstraction {
    pub mode: SecurityMode,
    pub gwts: TransitionSystem,
    pub secure: TransitionSystem,
    /// Secure system after dropping dynamically infeasible transitions.
    pub pruned: TransitionSystem,
    pub cache: Option<SegmentCache>,
}

impl Abstraction {
    pub fn report(&self) -> Value {
        json!({
            "mode": self.mode,
            "global_states": self.gwts.num_states(),
            "global_transitions": self.gwts.num_transitions(),
            "secure_kind": self.secure.kind(),
            "secure_states": self.secure.num_states(),
            "secure_transitions": self.secure.num_transitions(),
            "pruned_transitions": self.secure.num_transitions() - self.pruned.num_transitions(),
            "feasibility_checked": self.cache.is_some(),
            "local_problems": self.cache.as_ref().map(SegmentCache::len),
            "solver_warnings": self.cache.as_ref().map(|c| c.warnings.clone()).unwrap_or_default(),
        })
    }
}

pub fn build_abstraction(s: &Scenario, mode: SecurityMode, timings: &mut Timings) -> Result<Abstraction, PipelineError> {
    let n = s.partition.len();
    if mode.type_a() {
        for a in &s.agents {
            a.validate_for_type_a(n).map_err(|e| PipelineError::SecurityInfeasible(e.to_string()))?;
        }
    }
    let gwts = timings.time("abstraction", || {
        let wts = s
            .agents
            .iter()
            .map(|a| build_wts(&s.partition, a, &s.params.weight_rule()))
            .collect::<Result<Vec<_>, _>>()?;
        product_gwts(&wts)
    });
    let gwts = gwts.map_err(internal)?;
    let secure = timings.time("security", || secure_system(&gwts, mode)).map_err(|e| match e {
        AbstractionError::NoInitialStates(_) => PipelineError::SecurityInfeasible(e.to_string()),
        other => internal(other),
    })?;
    let (pruned, cache) = if s.has_dynamics() {
        let (p, c) = timings
            .time("feasibility", || prune_infeasible(&secure, &s.partition, &s.params.feasibility()))
            .map_err(internal)?;
        for w in &c.warnings {
            log::warn!("{w}");
        }
        log::info!("feasibility pruned {} of {} transitions", secure.num_transitions() - p.num_transitions(), secure.num_transitions());
        (p, Some(c))
    } else {
        (secure.clone(), None)
    };
    Ok(Abstraction { mode, gwts, secure, pruned, cache })
}

pub struct PlanOutcome {
    pub abstraction: Abstraction,
    pub nba: Buchi,
    pub pba: ProductAutomaton,
    pub plan: PrefixSuffixPlan,
    pub bundle: Option<TrajectoryBundle>,
}

impl PlanOutcome {
    fn system(&self) -> &TransitionSystem {
        &self.abstraction.pruned
    }

    /// Real region tuples of the prefix and of the cycle.
    pub fn real_lasso(&self) -> (GlobalPath, GlobalPath) {
        let (pre, cyc) = self.plan.system_lasso(&self.pba);
        let real = |v: &[usize]| v.iter().map(|&q| self.system().state(q).real.clone()).collect();
        (real(&pre), real(&cyc))
    }

    /// Copy region tuples, for twin systems.
    pub fn copy_lasso(&self) -> Option<(GlobalPath, GlobalPath)> {
        let (pre, cyc) = self.plan.system_lasso(&self.pba);
        let copy = |v: &[usize]| v.iter().map(|&q| self.system().state(q).copy.clone()).collect::<Option<Vec<_>>>();
        Some((copy(&pre)?, copy(&cyc)?))
    }
}

pub fn plan(s: &Scenario, mode: SecurityMode, beta: f64, timings: &mut Timings) -> Result<PlanOutcome, PipelineError> {
    let Some(formula) = &s.formula else {
        return Err(PipelineError::Usage("scenario has no formula".into()));
    };
    if !(0.0..=1.0).contains(&beta) {
        return Err(PipelineError::Usage(format!("beta must lie in [0, 1], got {beta}")));
    }
    let abstraction = build_abstraction(s, mode, timings)?;
    let nba = timings.time("translation", || translate_formula(formula)).map_err(|e| PipelineError::Usage(e.to_string()))?;
    if nba.num_states() == 0 {
        return Err(PipelineError::TaskInfeasible("formula is unsatisfiable".into()));
    }
    let pba = timings
        .time("product", || build_pba(&abstraction.pruned, &nba))
        .map_err(|e| PipelineError::Usage(e.to_string()))?;
    let plan = timings
        .time("search", || search_prefix_suffix(&pba, beta))
        .map_err(internal)?
        .ok_or_else(|| PipelineError::TaskInfeasible(format!("no accepting lasso among {} product states", pba.num_states())))?;
    let bundle = match &abstraction.cache {
        Some(cache) => Some(
            timings
                .time("trajectory", || assemble_trajectory(&plan, &pba, &abstraction.pruned, cache, s.params.suffix_repeats))
                .map_err(internal)?,
        ),
        None => None,
    };
    Ok(PlanOutcome { abstraction, nba, pba, plan, bundle })
}

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub nba_accepts: bool,
    pub formula_holds: bool,
    pub security: SecurityVerdict,
    pub type_a_required: bool,
    pub type_b_required: bool,
    /// Region sequence recovered from the real trajectories, if there are any.
    pub replay: Option<GlobalPath>,
    pub replay_matches: Option<bool>,
    pub passed: bool,
}

fn trace(gwts: &TransitionSystem, path: &[Vec<usize>]) -> Vec<Symbol> {
    path.iter().map(|t| gwts.tuple_label(t)).collect()
}

/// Re-checks a plan with the independent machinery: formula evaluation and automaton
/// acceptance on the real lasso trace, the security oracle on the real lasso, and the
/// region sequence of the replayed trajectories.
pub fn verify_plan(s: &Scenario, out: &PlanOutcome) -> Result<Verification, PipelineError> {
    let g = &out.abstraction.gwts;
    let (pre, cyc) = out.real_lasso();
    let (tp, tc) = (trace(g, &pre), trace(g, &cyc));
    let nba_accepts = out.nba.accepts_lasso(&tp, &tc).map_err(internal)?;
    let formula_holds = match &s.formula {
        Some(f) => eval_lasso(f, &tp, &tc).map_err(internal)?,
        None => false,
    };
    let security = check_lasso(g, &pre, &cyc).map_err(internal)?;
    let mode = out.abstraction.mode;

    let (replay, replay_matches) = match &out.bundle {
        Some(b) => {
            let real: Vec<Vec<Vec<f64>>> = b.tracks.iter().filter(|t| t.role == Role::Real).map(|t| t.states.clone()).collect();
            let projected = trajectory_to_path(&s.partition, &real, s.params.tolerance).map_err(internal)?;
            let mut expected: GlobalPath = pre.clone();
            for _ in 0..b.repeats {
                expected.extend(cyc.iter().cloned());
            }
            expected.push(cyc[0].clone());
            let matches = collapse_stutter(&expected) == projected.steps;
            (Some(projected.steps), Some(matches))
        }
        None => (None, None),
    };
    let passed = nba_accepts
        && formula_holds
        && (!mode.type_a() || security.type_a.secure)
        && (!mode.type_b() || security.type_b.secure)
        && replay_matches.unwrap_or(true);
    Ok(Verification {
        nba_accepts,
        formula_holds,
        security,
        type_a_required: mode.type_a(),
        type_b_required: mode.type_b(),
        replay,
        replay_matches,
        passed,
    })
}

/// Parses `(A,B)->(C,D)` into region tuples.
pub fn parse_path(s: &Scenario, text: &str) -> Result<GlobalPath, PipelineError> {
    let bad = |m: String| PipelineError::Usage(format!("bad path `{text}`: {m}"));
    let mut out = Vec::new();
    for step in text.split("->") {
        let inner = step.trim().strip_prefix('(').and_then(|t| t.strip_suffix(')')).ok_or_else(|| bad(format!("step `{}` needs parentheses", step.trim())))?;
        let tuple = inner
            .split(',')
            .map(|r| s.partition.index_of(r.trim()).ok_or_else(|| bad(format!("unknown region `{}`", r.trim()))))
            .collect::<Result<Vec<_>, _>>()?;
        if tuple.len() != s.agents.len() {
            return Err(bad(format!("step has {} regions for {} agents", tuple.len(), s.agents.len())));
        }
        out.push(tuple);
    }
    Ok(out)
}

/// Security verdict of an explicit finite path of the global system.
pub fn verify_path(s: &Scenario, text: &str) -> Result<(GlobalPath, SecurityVerdict), PipelineError> {
    let path = parse_path(s, text)?;
    let wts = s
        .agents
        .iter()
        .map(|a| build_wts(&s.partition, a, &s.params.weight_rule()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(internal)?;
    let g = product_gwts(&wts).map_err(internal)?;
    let verdict = check_path(&g, &path).map_err(|e| PipelineError::Usage(e.to_string()))?;
    Ok((path, verdict))
}

pub fn names(s: &Scenario, path: &[Vec<usize>]) -> Vec<Vec<String>> {
    path.iter().map(|t| t.iter().map(|&q| s.partition.name(q).to_string()).collect()).collect()
}

pub fn plan_json(s: &Scenario, out: &PlanOutcome) -> Value {
    let sys = out.system();
    let (pre_states, cyc_states) = out.plan.system_lasso(&out.pba);
    let (pre, cyc) = out.real_lasso();
    let mut seq = pre_states.clone();
    seq.extend(&cyc_states);
    seq.push(cyc_states[0]);
    let edges: Vec<Value> = seq
        .windows(2)
        .map(|w| json!({"from": sys.state_name(w[0]), "to": sys.state_name(w[1]), "weight": sys.weight(w[0], w[1])}))
        .collect();
    json!({
        "scenario": s.name,
        "formula": s.formula.as_ref().map(|f| f.to_string()),
        "security": out.abstraction.mode,
        "beta": out.plan.beta,
        "cost": {"j": out.plan.j, "j_prefix": out.plan.j_prefix, "j_suffix": out.plan.j_suffix},
        "prefix_states": pre_states,
        "suffix_states": cyc_states,
        "real": {"prefix": names(s, &pre), "suffix": names(s, &cyc)},
        "copy": out.copy_lasso().map(|(p, c)| json!({"prefix": names(s, &p), "suffix": names(s, &c)})),
        "edges": edges,
        "cycle_start_step": pre.len(),
        "suffix_repeats": out.bundle.as_ref().map(|b| b.repeats),
        "sizes": {
            "global_states": out.abstraction.gwts.num_states(),
            "secure_states": out.abstraction.secure.num_states(),
            "secure_transitions": out.abstraction.secure.num_transitions(),
            "feasible_transitions": out.abstraction.pruned.num_transitions(),
            "nba_states": out.nba.num_states(),
            "nba_edges": out.nba.num_edges(),
            "pba_states": out.pba.num_states(),
            "pba_transitions": out.pba.num_transitions(),
        },
    })
}

/// One row per sample: time, agent, role, state, input (empty on the final sample),
/// region, observation and secrecy.
pub fn trajectory_csv(s: &Scenario, bundle: &TrajectoryBundle) -> String {
    let n = s.partition.dim();
    let m = bundle.tracks.first().and_then(|t| t.inputs.first()).map_or(0, Vec::len);
    let mut out = String::from("time,agent_id,role");
    for d in 1..=n {
        let _ = write!(out, ",x{d}");
    }
    for d in 1..=m {
        let _ = write!(out, ",u{d}");
    }
    out.push_str(",region_id,observation,is_secret\n");
    for track in &bundle.tracks {
        let agent = &s.agents[track.agent];
        let role = match track.role {
            Role::Real => "real",
            Role::Copy => "copy",
        };
        for (k, x) in track.states.iter().enumerate() {
            let q = track.regions[k];
            let _ = write!(out, "{},{},{role}", bundle.times[k], track.agent + 1);
            for v in x {
                let _ = write!(out, ",{v}");
            }
            match track.inputs.get(k) {
                Some(u) => u.iter().for_each(|v| {
                    let _ = write!(out, ",{v}");
                }),
                None => out.push_str(&",".repeat(m)),
            }
            let _ = writeln!(out, ",{},{},{}", s.partition.name(q), agent.observations[q], agent.secret.contains(&q));
        }
    }
    out
}

pub fn nba_hoa(s: &Scenario, nba: &Buchi) -> String {
    to_hoa(nba, s.formula_text.as_deref().unwrap_or(&s.name))
}
