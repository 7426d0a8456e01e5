//! Exact linear and mixed-integer linear solver for desk-scale models.
//!
//! The simplex and branch-and-bound implementations are deliberately dense
//! and simple: models in this crate have at most a few hundred rows, and the
//! priority is bit-for-bit determinism (fixed pivot rule, fixed branching
//! rule, all ties broken by lowest variable id) rather than raw speed.
//! Instances above [`MAX_VARIABLES`] are rejected outright.

mod branch;
mod simplex;

pub use branch::{solve_mip, solve_mip_with_stats, MipStats};
pub use simplex::solve_lp;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Declared desk-scale limit on variable count.
pub const MAX_VARIABLES: usize = 5000;

/// Absolute feasibility tolerance for optimal solutions.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// A variable flagged integral must land within this distance of an integer.
pub const INTEGRALITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub id: String,
    pub lower: f64,
    pub upper: f64,
    pub integral: bool,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    /// Sparse row as (variable index, coefficient) pairs.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A minimization model over bounded, optionally integral variables.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub name: String,
    variables: Vec<Variable>,
    /// Sparse objective, sense is always minimize.
    objective: Vec<(usize, f64)>,
    constraints: Vec<Constraint>,
}

impl LinearModel {
    pub fn new(name: impl Into<String>) -> Self {
        LinearModel {
            name: name.into(),
            variables: Vec::new(),
            objective: Vec::new(),
            constraints: Vec::new(),
        }
    }

    /// Adds a variable and returns its index.
    pub fn add_var(
        &mut self,
        id: impl Into<String>,
        lower: f64,
        upper: f64,
        integral: bool,
    ) -> usize {
        self.variables.push(Variable {
            id: id.into(),
            lower,
            upper,
            integral,
        });
        self.variables.len() - 1
    }

    pub fn add_objective_term(&mut self, var: usize, coeff: f64) {
        if coeff != 0.0 {
            self.objective.push((var, coeff));
        }
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            relation,
            rhs,
        });
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variables_mut(&mut self) -> &mut [Variable] {
        &mut self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(usize, f64)] {
        &self.objective
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.variables[var].lower = lower;
        self.variables[var].upper = upper;
    }

    pub fn has_integral_vars(&self) -> bool {
        self.variables.iter().any(|v| v.integral)
    }

    /// Objective value of an assignment, evaluated directly from the model.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * values[j]).sum()
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.variables.len() > MAX_VARIABLES {
            return Err(SolveError::DeskScale(self.variables.len()));
        }
        for (idx, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(SolveError::Malformed(format!(
                    "variable {} (index {idx}) has invalid bounds [{}, {}]",
                    v.id, v.lower, v.upper
                )));
            }
        }
        for (j, c) in &self.objective {
            if *j >= self.variables.len() {
                return Err(SolveError::Malformed(format!(
                    "objective references undeclared variable index {j}"
                )));
            }
            if !c.is_finite() {
                return Err(SolveError::Malformed("objective coefficient is not finite".into()));
            }
        }
        for con in &self.constraints {
            if !con.rhs.is_finite() {
                return Err(SolveError::Malformed(format!(
                    "constraint {} has non-finite rhs",
                    con.name
                )));
            }
            for (j, c) in &con.terms {
                if *j >= self.variables.len() {
                    return Err(SolveError::Malformed(format!(
                        "constraint {} references undeclared variable index {j}",
                        con.name
                    )));
                }
                if !c.is_finite() {
                    return Err(SolveError::Malformed(format!(
                        "constraint {} has a non-finite coefficient",
                        con.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Renders the model in the conventional LP text format so it can be
    /// cross-checked with external solvers. Identifiers are sanitized and
    /// prefixed with their index to stay unique.
    pub fn to_lp_format(&self) -> String {
        fn sanitize(s: &str) -> String {
            s.chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
                .collect()
        }
        let var_name = |j: usize| format!("x{j}_{}", sanitize(&self.variables[j].id));
        let mut out = String::new();
        out.push_str(&format!("\\ Problem: {}\n", self.name));
        out.push_str("Minimize\n obj:");
        if self.objective.is_empty() {
            out.push_str(" 0 x0");
        }
        for (j, c) in &self.objective {
            out.push_str(&format!(" {c:+} {}", var_name(*j)));
        }
        out.push_str("\nSubject To\n");
        for (i, con) in self.constraints.iter().enumerate() {
            out.push_str(&format!(" c{i}_{}:", sanitize(&con.name)));
            if con.terms.is_empty() {
                out.push_str(" 0 x0");
            }
            for (j, c) in &con.terms {
                out.push_str(&format!(" {c:+} {}", var_name(*j)));
            }
            out.push_str(&format!(" {} {}\n", con.relation, con.rhs));
        }
        out.push_str("Bounds\n");
        for (j, v) in self.variables.iter().enumerate() {
            let name = var_name(j);
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) => out.push_str(&format!(" {} <= {name} <= {}\n", v.lower, v.upper)),
                (true, false) => out.push_str(&format!(" {name} >= {}\n", v.lower)),
                (false, true) => out.push_str(&format!(" -inf <= {name} <= {}\n", v.upper)),
                (false, false) => out.push_str(&format!(" {name} free\n")),
            }
        }
        let generals: Vec<String> = self
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.integral)
            .map(|(j, _)| var_name(j))
            .collect();
        if !generals.is_empty() {
            out.push_str("General\n");
            for g in generals {
                out.push_str(&format!(" {g}\n"));
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    /// Values by variable id; empty unless status is optimal.
    pub values: BTreeMap<String, f64>,
    pub objective_value: f64,
}

impl Solution {
    pub(crate) fn non_optimal(status: SolveStatus) -> Self {
        Solution {
            status,
            values: BTreeMap::new(),
            objective_value: f64::NAN,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, id: &str) -> f64 {
        self.values.get(id).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub enum SolveError {
    /// The model itself is ill-formed (bad indices, NaN data, bad bounds).
    Malformed(String),
    /// Variable count exceeds the declared desk-scale limit.
    DeskScale(usize),
    /// Branch-and-bound hit its node limit; carries the best incumbent.
    NodeLimit { incumbent: Option<Solution> },
    /// The simplex lost feasibility beyond tolerance (ill-conditioned data).
    Numerics(String),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::Malformed(msg) => write!(f, "malformed model: {msg}"),
            SolveError::DeskScale(n) => {
                write!(f, "instance exceeds desk scale: {n} variables > {MAX_VARIABLES}")
            }
            SolveError::NodeLimit { incumbent } => write!(
                f,
                "node limit reached ({})",
                if incumbent.is_some() { "incumbent available" } else { "no incumbent" }
            ),
            SolveError::Numerics(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl core::error::Error for SolveError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_bound() {
        let mut m = LinearModel::new("bound");
        let x = m.add_var("x", f64::NEG_INFINITY, 10.0, false);
        m.add_objective_term(x, 1.0);
        m.add_constraint("floor", vec![(x, 1.0)], Relation::Ge, 3.0);
        let sol = solve_lp(&m).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.value("x") - 3.0).abs() <= 1e-9);
        assert!((sol.objective_value - 3.0).abs() <= 1e-9);
    }

    #[test]
    fn degenerate_face_objective() {
        let mut m = LinearModel::new("face");
        let x = m.add_var("x", 0.0, f64::INFINITY, false);
        let y = m.add_var("y", 0.0, f64::INFINITY, false);
        m.add_objective_term(x, 1.0);
        m.add_objective_term(y, 1.0);
        m.add_constraint("cover", vec![(x, 1.0), (y, 1.0)], Relation::Ge, 1.0);
        let sol = solve_lp(&m).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.objective_value - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded_are_statuses() {
        let mut m = LinearModel::new("infeasible");
        let x = m.add_var("x", 0.0, 1.0, false);
        m.add_constraint("too_big", vec![(x, 1.0)], Relation::Ge, 2.0);
        assert_eq!(solve_lp(&m).unwrap().status, SolveStatus::Infeasible);

        let mut m = LinearModel::new("unbounded");
        let x = m.add_var("x", 0.0, f64::INFINITY, false);
        m.add_objective_term(x, -1.0);
        assert_eq!(solve_lp(&m).unwrap().status, SolveStatus::Unbounded);
    }

    #[test]
    fn lp_rejects_integrality_flags() {
        let mut m = LinearModel::new("mip");
        m.add_var("x", 0.0, 1.0, true);
        assert!(matches!(solve_lp(&m), Err(SolveError::Malformed(_))));
    }

    #[test]
    fn single_binary_mip() {
        let mut m = LinearModel::new("binary");
        let x = m.add_var("x", 0.0, 1.0, true);
        m.add_objective_term(x, -1.0);
        let sol = solve_mip(&m, 0.0).unwrap();
        assert!(sol.is_optimal());
        assert_eq!(sol.value("x"), 1.0);
        assert_eq!(sol.objective_value, -1.0);
    }

    #[test]
    fn integral_relaxation_needs_no_branching() {
        // Transportation-like equalities have an integral optimal vertex.
        let mut m = LinearModel::new("integral");
        let x = m.add_var("x", 0.0, f64::INFINITY, true);
        let y = m.add_var("y", 0.0, f64::INFINITY, true);
        m.add_objective_term(x, 2.0);
        m.add_objective_term(y, 3.0);
        m.add_constraint("sum", vec![(x, 1.0), (y, 1.0)], Relation::Eq, 4.0);
        let (sol, stats) = solve_mip_with_stats(&m, 0.0).unwrap();
        assert_eq!(stats.nodes_branched, 0);
        assert_eq!(stats.nodes_solved, 1);
        let mut lp = m.clone();
        for j in 0..lp.variables().len() {
            lp.variables_mut()[j].integral = false;
        }
        let relaxed = solve_lp(&lp).unwrap();
        assert!((sol.objective_value - relaxed.objective_value).abs() <= 1e-9);
        assert_eq!(sol.value("x"), 4.0);
    }

    #[test]
    fn fractional_relaxation_branches_to_optimum() {
        // max x + y  s.t. 2x + 2y <= 3, binaries -> one variable at 1.
        let mut m = LinearModel::new("frac");
        let x = m.add_var("x", 0.0, 1.0, true);
        let y = m.add_var("y", 0.0, 1.0, true);
        m.add_objective_term(x, -1.0);
        m.add_objective_term(y, -1.0);
        m.add_constraint("pack", vec![(x, 2.0), (y, 2.0)], Relation::Le, 3.0);
        let sol = solve_mip(&m, 0.0).unwrap();
        assert_eq!(sol.objective_value, -1.0);
        assert_eq!(sol.value("x") + sol.value("y"), 1.0);
    }

    #[test]
    fn desk_scale_cap_enforced() {
        let mut m = LinearModel::new("huge");
        for j in 0..(MAX_VARIABLES + 1) {
            m.add_var(format!("x{j}"), 0.0, 1.0, false);
        }
        let err = solve_lp(&m).unwrap_err();
        assert!(matches!(err, SolveError::DeskScale(_)));
        assert!(format!("{err}").contains("exceeds desk scale"));
    }

    #[test]
    fn deterministic_resolve() {
        let mut m = LinearModel::new("det");
        let vars: Vec<usize> = (0..6).map(|j| m.add_var(format!("x{j}"), 0.0, 5.0, false)).collect();
        for (i, &v) in vars.iter().enumerate() {
            m.add_objective_term(v, 1.0 + (i as f64) * 0.25);
        }
        m.add_constraint("c0", vars.iter().map(|&v| (v, 1.0)).collect(), Relation::Ge, 7.0);
        m.add_constraint("c1", vec![(vars[0], 1.0), (vars[3], 2.0)], Relation::Le, 4.0);
        let a = solve_lp(&m).unwrap();
        let b = solve_lp(&m).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
    }

    #[test]
    fn lp_format_dump_mentions_every_section() {
        let mut m = LinearModel::new("dump");
        let x = m.add_var("flow[a->b]", 0.0, 2.0, true);
        m.add_objective_term(x, 1.5);
        m.add_constraint("cap", vec![(x, 1.0)], Relation::Le, 2.0);
        let text = m.to_lp_format();
        for needle in ["Minimize", "Subject To", "Bounds", "General", "End"] {
            assert!(text.contains(needle), "missing {needle} in:\n{text}");
        }
    }
}
