//! Pre-staging LP: allocate supplies to candidate sites to minimize travel
//! time plus a site-loss risk penalty, with unmet demand priced at a large
//! penalty. Also the alpha sweep used to study how the risk weight pushes
//! allocations away from exposed sites.

use crate::model::ProblemInstance;
use crate::opt::{solve_lp, LinearModel, Relation, SolveError, SolveStatus};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Threshold below which solver outputs are treated as zero flow.
pub const FLOW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveComponents {
    pub travel: f64,
    pub risk: f64,
    pub unmet: f64,
}

impl ObjectiveComponents {
    pub fn total(&self) -> f64 {
        self.travel + self.risk + self.unmet
    }
}

/// A solved allocation: shipment quantities keyed by
/// (site, demand location, supply type, mode), plus unmet demand and the
/// objective split into its three terms.
#[derive(Debug, Clone, PartialEq)]
pub struct PrestagePlan {
    pub allocations: BTreeMap<(String, String, String, String), f64>,
    pub unmet: BTreeMap<(String, String), f64>,
    pub objective: f64,
    pub components: ObjectiveComponents,
}

impl PrestagePlan {
    /// Total units of `supply` staged at `site`, summed over destinations
    /// and modes. This is the committed stock the scenario re-solves hold
    /// fixed.
    pub fn stock_at(&self, site: &str, supply: &str) -> f64 {
        self.allocations
            .iter()
            .filter(|((i, _, k, _), _)| i == site && k == supply)
            .map(|(_, &x)| x)
            .sum()
    }

    /// Per-(site, supply) committed stock for the whole plan.
    pub fn stock_by_site(&self) -> BTreeMap<(String, String), f64> {
        let mut out: BTreeMap<(String, String), f64> = BTreeMap::new();
        for ((i, _, k, _), &x) in &self.allocations {
            *out.entry((i.clone(), k.clone())).or_insert(0.0) += x;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub enum PrestageError {
    NegativeDemand { location: String, supply: String },
    AlphasNotAscending,
    /// Structurally infeasible; only possible when unmet-demand variables
    /// are disabled or the penalty is infinite.
    Infeasible,
    Solver(SolveError),
}

impl fmt::Display for PrestageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrestageError::NegativeDemand { location, supply } => {
                write!(f, "negative demand for ({location}, {supply})")
            }
            PrestageError::AlphasNotAscending => {
                write!(f, "alpha sweep values must be nonnegative and ascending")
            }
            PrestageError::Infeasible => write!(f, "pre-staging model is infeasible"),
            PrestageError::Solver(e) => write!(f, "solver error: {e}"),
        }
    }
}

impl core::error::Error for PrestageError {}

impl From<SolveError> for PrestageError {
    fn from(e: SolveError) -> Self {
        PrestageError::Solver(e)
    }
}

/// Solves the pre-staging LP against `demand` using site capacities as the
/// per-(site, supply) limits.
pub fn solve_prestage(
    instance: &ProblemInstance,
    demand: &BTreeMap<(String, String), f64>,
) -> Result<PrestagePlan, PrestageError> {
    let mut caps: BTreeMap<(String, String), f64> = BTreeMap::new();
    for loc in instance.locations.iter().filter(|l| l.prestage_candidate) {
        for (supply, &cap) in &loc.capacity_by_supply {
            if cap > 0.0 {
                caps.insert((loc.id.clone(), supply.clone()), cap);
            }
        }
    }
    solve_distribution(instance, demand, &caps)
}

/// Shared distribution LP: ship from sites (limited by `supply_caps`) to
/// demand locations over the available mode arcs, minimizing
/// travel + risk + unmet-demand penalty. The pre-stage solve and the
/// scenario re-solves differ only in the caps they pass.
pub(crate) fn solve_distribution(
    instance: &ProblemInstance,
    demand: &BTreeMap<(String, String), f64>,
    supply_caps: &BTreeMap<(String, String), f64>,
) -> Result<PrestagePlan, PrestageError> {
    for ((j, k), &d) in demand {
        if d < 0.0 {
            return Err(PrestageError::NegativeDemand {
                location: j.clone(),
                supply: k.clone(),
            });
        }
    }
    let rho = instance.effective_unmet_penalty();
    let alpha: BTreeMap<&str, f64> = instance
        .supply_types
        .iter()
        .map(|s| (s.id.as_str(), s.alpha))
        .collect();
    let destruction: BTreeMap<&str, f64> = instance
        .locations
        .iter()
        .map(|l| (l.id.as_str(), l.destruction_prob))
        .collect();

    let mut model = LinearModel::new("prestage");
    // (site, demand, supply, mode) -> (var, travel coeff, risk coeff)
    let mut ship_vars: Vec<((String, String, String, String), usize, f64, f64)> = Vec::new();
    let mut unmet_vars: Vec<((String, String), usize)> = Vec::new();
    let mut cap_rows: BTreeMap<(String, String), Vec<(usize, f64)>> = BTreeMap::new();
    let mut cover_rows: BTreeMap<(String, String), Vec<(usize, f64)>> = BTreeMap::new();

    for ((j, k), &d) in demand {
        if d == 0.0 {
            continue;
        }
        for ((i, k2), _) in supply_caps.iter() {
            if k2 != k {
                continue;
            }
            for (dest, mode, tau) in instance.modes.arcs_from(i) {
                if dest != j {
                    continue;
                }
                let key = (i.clone(), j.clone(), k.clone(), mode.to_string());
                let var = model.add_var(
                    format!("X[{i},{j},{k},{mode}]"),
                    0.0,
                    f64::INFINITY,
                    false,
                );
                let travel = tau;
                let risk = alpha.get(k.as_str()).copied().unwrap_or(0.0)
                    * destruction.get(i.as_str()).copied().unwrap_or(0.0);
                model.add_objective_term(var, travel + risk);
                cap_rows.entry((i.clone(), k.clone())).or_default().push((var, 1.0));
                cover_rows.entry((j.clone(), k.clone())).or_default().push((var, 1.0));
                ship_vars.push((key, var, travel, risk));
            }
        }
        let var = model.add_var(format!("unmet[{j},{k}]"), 0.0, f64::INFINITY, false);
        model.add_objective_term(var, rho);
        cover_rows.entry((j.clone(), k.clone())).or_default().push((var, 1.0));
        unmet_vars.push(((j.clone(), k.clone()), var));
    }

    for ((i, k), terms) in cap_rows {
        let cap = supply_caps.get(&(i.clone(), k.clone())).copied().unwrap_or(0.0);
        model.add_constraint(format!("capacity[{i},{k}]"), terms, Relation::Le, cap);
    }
    for ((j, k), terms) in cover_rows {
        let d = demand.get(&(j.clone(), k.clone())).copied().unwrap_or(0.0);
        model.add_constraint(format!("coverage[{j},{k}]"), terms, Relation::Ge, d);
    }

    let sol = solve_lp(&model)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(PrestageError::Infeasible),
        SolveStatus::Unbounded => {
            return Err(PrestageError::Solver(SolveError::Numerics(
                "pre-staging LP reported unbounded".into(),
            )))
        }
    }

    let mut allocations = BTreeMap::new();
    let mut components = ObjectiveComponents { travel: 0.0, risk: 0.0, unmet: 0.0 };
    for (key, var, travel, risk) in &ship_vars {
        let x = sol.value(&model.variables()[*var].id);
        if x > FLOW_TOL {
            allocations.insert(key.clone(), x);
            components.travel += travel * x;
            components.risk += risk * x;
        }
    }
    let mut unmet = BTreeMap::new();
    for (key, var) in &unmet_vars {
        let d = sol.value(&model.variables()[*var].id);
        if d > FLOW_TOL {
            unmet.insert(key.clone(), d);
            components.unmet += rho * d;
        }
    }
    Ok(PrestagePlan {
        allocations,
        unmet,
        objective: components.total(),
        components,
    })
}

/// Solves the pre-staging LP once per alpha value, applying each value
/// uniformly to every supply type. Used to reproduce the outward shift of
/// allocations as the risk weight grows.
pub fn sweep_alpha(
    instance: &ProblemInstance,
    demand: &BTreeMap<(String, String), f64>,
    alphas: &[f64],
) -> Result<Vec<(f64, PrestagePlan)>, PrestageError> {
    if alphas.iter().any(|a| a.is_nan() || *a < 0.0)
        || alphas.windows(2).any(|w| w[1] < w[0])
    {
        return Err(PrestageError::AlphasNotAscending);
    }
    let mut out = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let mut variant = instance.clone();
        for s in &mut variant.supply_types {
            s.alpha = a;
        }
        out.push((a, solve_prestage(&variant, demand)?));
    }
    Ok(out)
}
