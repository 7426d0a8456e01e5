//! Dispatch-time selection: for each supply type pick the candidate time
//! minimizing `a * (expected closing + lateness) + b * expected unmet`,
//! where lateness is the shortfall between the required lead time (plus any
//! delay buffer) and the chosen time.
//!
//! Expected unmet demand is carried through the scenario layer as a
//! fraction in [0, 1] and expressed here in percent, matching the hour
//! scale of the closing-time term; the `a`/`b` weights convert units beyond
//! that. Because the lateness operator involves only parameters, the
//! default path enumerates the candidate rows directly. An equivalent
//! mixed-integer path with an explicit auxiliary lateness variable is kept
//! alongside and cross-checked in tests.
//!
//! Ties between equally good times break toward the later dispatch, i.e.
//! the smaller hours-before-landfall value.

use crate::model::SupplyType;
use crate::opt::{solve_mip, LinearModel, Relation, SolveError, SolveStatus};
use crate::scenario::DispatchExpectation;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRow {
    /// Hours before landfall.
    pub time_hours: f64,
    /// Expected closing time, hours.
    pub exp_closing: f64,
    /// max(0, lead_time + delay_buffer - t), hours.
    pub lateness: f64,
    /// Expected unmet demand, percent.
    pub unmet_pct: f64,
    /// exp_closing + lateness, hours.
    pub time_penalty: f64,
    /// a * time_penalty + b * unmet_pct.
    pub composite: f64,
}

/// Per-supply chosen dispatch time plus the full per-time row table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingDecision {
    /// Hours before landfall, descending (forecast-tree order).
    pub times: Vec<f64>,
    /// (supply, time index) -> row.
    pub rows: BTreeMap<(String, usize), TimingRow>,
    /// supply -> chosen time index.
    pub chosen: BTreeMap<String, usize>,
}

impl TimingDecision {
    pub fn chosen_time_hours(&self, supply: &str) -> Option<f64> {
        self.chosen.get(supply).map(|&t| self.times[t])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoPoint {
    pub time_idx: usize,
    pub time_hours: f64,
    pub time_penalty: f64,
    pub unmet_pct: f64,
    pub dominated: bool,
}

#[derive(Debug, Clone)]
pub enum TimingError {
    EmptyTimes,
    MissingExpectation { supply: String, time_idx: usize },
    UnknownSupply(String),
    Solver(SolveError),
}

impl fmt::Display for TimingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimingError::EmptyTimes => write!(f, "candidate dispatch time set is empty"),
            TimingError::MissingExpectation { supply, time_idx } => {
                write!(f, "no expectation cell for supply {supply} at time index {time_idx}")
            }
            TimingError::UnknownSupply(k) => write!(f, "unknown supply {k:?}"),
            TimingError::Solver(e) => write!(f, "dispatch MIP failed: {e}"),
        }
    }
}

impl core::error::Error for TimingError {}

impl From<SolveError> for TimingError {
    fn from(e: SolveError) -> Self {
        TimingError::Solver(e)
    }
}

pub fn lateness(supply: &SupplyType, time_hours: f64) -> f64 {
    (supply.lead_time + supply.delay_buffer - time_hours).max(0.0)
}

fn build_rows(
    expect: &DispatchExpectation,
    supply: &SupplyType,
) -> Result<Vec<TimingRow>, TimingError> {
    let mut rows = Vec::with_capacity(expect.times.len());
    for (t, &time_hours) in expect.times.iter().enumerate() {
        let key = (supply.id.clone(), t);
        let e = expect
            .exp_closing
            .get(&key)
            .ok_or(TimingError::MissingExpectation { supply: supply.id.clone(), time_idx: t })?;
        let u = expect
            .exp_unmet
            .get(&key)
            .ok_or(TimingError::MissingExpectation { supply: supply.id.clone(), time_idx: t })?;
        let late = lateness(supply, time_hours);
        let unmet_pct = u * 100.0;
        let time_penalty = e + late;
        rows.push(TimingRow {
            time_hours,
            exp_closing: *e,
            lateness: late,
            unmet_pct,
            time_penalty,
            composite: supply.time_weight * time_penalty + supply.demand_weight * unmet_pct,
        });
    }
    Ok(rows)
}

/// Default enumeration path: computes every per-time row and picks the
/// composite minimum, ties toward later dispatch.
pub fn select_dispatch(
    expect: &DispatchExpectation,
    supplies: &[SupplyType],
) -> Result<TimingDecision, TimingError> {
    if expect.times.is_empty() {
        return Err(TimingError::EmptyTimes);
    }
    let mut decision = TimingDecision { times: expect.times.clone(), ..TimingDecision::default() };
    for supply in supplies {
        let rows = build_rows(expect, supply)?;
        // Scan in ascending hours (later dispatch first) so equal
        // composites keep the later time.
        let mut best: Option<usize> = None;
        for t in (0..rows.len()).rev() {
            let better = match best {
                None => true,
                Some(b) => rows[t].composite < rows[b].composite,
            };
            if better {
                best = Some(t);
            }
        }
        decision.chosen.insert(supply.id.clone(), best.expect("nonempty rows"));
        for (t, row) in rows.into_iter().enumerate() {
            decision.rows.insert((supply.id.clone(), t), row);
        }
    }
    Ok(decision)
}

/// Mixed-integer path: one selection binary per (supply, time) and an
/// auxiliary lateness variable bounded below by the lead-time shortfall.
/// The lateness-selection product is linearized with a big-M equal to the
/// shortfall itself. Kept as an independent route and cross-checked against
/// [`select_dispatch`].
pub fn select_dispatch_mip(
    expect: &DispatchExpectation,
    supplies: &[SupplyType],
) -> Result<TimingDecision, TimingError> {
    if expect.times.is_empty() {
        return Err(TimingError::EmptyTimes);
    }
    let mut model = LinearModel::new("dispatch_timing");
    // (supply idx, time idx) -> selection var
    let mut select_vars: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (si, supply) in supplies.iter().enumerate() {
        let rows = build_rows(expect, supply)?;
        let mut one_of: Vec<(usize, f64)> = Vec::new();
        // Ascending hours so the lowest variable id is the later dispatch;
        // solver ties then match the enumeration path's tie rule.
        for t in (0..expect.times.len()).rev() {
            let row = &rows[t];
            let z = model.add_var(format!("select[{},{t}]", supply.id), 0.0, 1.0, true);
            let shortfall = row.lateness;
            let w = model.add_var(
                format!("lateness[{},{t}]", supply.id),
                0.0,
                f64::INFINITY,
                false,
            );
            let y = model.add_var(
                format!("charged_lateness[{},{t}]", supply.id),
                0.0,
                f64::INFINITY,
                false,
            );
            // w >= shortfall (lateness definition), w >= 0 via bounds.
            model.add_constraint(
                format!("lateness_def[{},{t}]", supply.id),
                alloc::vec![(w, 1.0)],
                Relation::Ge,
                supply.lead_time + supply.delay_buffer - expect.times[t],
            );
            // y >= w - M (1 - z) charges lateness only on the chosen time.
            model.add_constraint(
                format!("charge[{},{t}]", supply.id),
                alloc::vec![(y, 1.0), (w, -1.0), (z, -shortfall)],
                Relation::Ge,
                -shortfall,
            );
            model.add_objective_term(
                z,
                supply.time_weight * row.exp_closing + supply.demand_weight * row.unmet_pct,
            );
            model.add_objective_term(y, supply.time_weight);
            one_of.push((z, 1.0));
            select_vars.insert((si, t), z);
        }
        model.add_constraint(format!("one_time[{}]", supply.id), one_of, Relation::Eq, 1.0);
    }

    let sol = solve_mip(&model, 0.0)?;
    if sol.status != SolveStatus::Optimal {
        return Err(TimingError::Solver(SolveError::Numerics(
            "dispatch MIP not optimal".into(),
        )));
    }
    let mut decision = TimingDecision { times: expect.times.clone(), ..TimingDecision::default() };
    for (si, supply) in supplies.iter().enumerate() {
        let rows = build_rows(expect, supply)?;
        for (t, row) in rows.into_iter().enumerate() {
            decision.rows.insert((supply.id.clone(), t), row);
        }
        let chosen = (0..expect.times.len())
            .find(|t| {
                let var = select_vars[&(si, *t)];
                sol.value(&model.variables()[var].id) > 0.5
            })
            .expect("exactly one time selected");
        decision.chosen.insert(supply.id.clone(), chosen);
    }
    Ok(decision)
}

/// Labels every (time penalty, unmet) row for `supply` as dominated or not,
/// both coordinates minimized. Duplicate rows are kept as nondominated.
pub fn pareto_points(
    decision: &TimingDecision,
    supply: &str,
) -> Result<Vec<ParetoPoint>, TimingError> {
    let rows: Vec<(usize, &TimingRow)> = decision
        .rows
        .iter()
        .filter(|((k, _), _)| k == supply)
        .map(|((_, t), row)| (*t, row))
        .collect();
    if rows.is_empty() {
        return Err(TimingError::UnknownSupply(supply.into()));
    }
    let mut out = Vec::with_capacity(rows.len());
    for &(t, row) in &rows {
        let dominated = rows.iter().any(|&(t2, other)| {
            t2 != t
                && other.time_penalty <= row.time_penalty
                && other.unmet_pct <= row.unmet_pct
                && (other.time_penalty < row.time_penalty || other.unmet_pct < row.unmet_pct)
        });
        out.push(ParetoPoint {
            time_idx: t,
            time_hours: row.time_hours,
            time_penalty: row.time_penalty,
            unmet_pct: row.unmet_pct,
            dominated,
        });
    }
    Ok(out)
}
