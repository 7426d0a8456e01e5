//! Two-phase dense simplex over general bounded variables.
//!
//! Bounds are handled by substitution: finite lower bounds shift the
//! variable, upper bounds become explicit rows, free variables split into a
//! positive and negative part, and fixed variables are folded into the right
//! hand side. Pivoting uses the most-negative reduced cost with ties broken
//! by lowest column, the leaving row breaks ratio ties by lowest basic
//! column, and after 1000 degenerate pivots the entering rule drops to
//! Bland's rule so cycling cannot occur.

use super::{LinearModel, Relation, SolveError, Solution, SolveStatus, FEASIBILITY_TOL};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

const REDUCED_COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE_TOL: f64 = 1e-9;
const DEGENERATE_RATIO_TOL: f64 = 1e-10;
const DEGENERATE_PIVOT_LIMIT: usize = 1000;

/// Solves a pure LP. Models carrying integrality flags are rejected; use
/// [`super::solve_mip`] for those.
pub fn solve_lp(model: &LinearModel) -> Result<Solution, SolveError> {
    model.validate()?;
    if model.has_integral_vars() {
        return Err(SolveError::Malformed(
            "model has integrality flags set; use solve_mip".into(),
        ));
    }
    solve_relaxation(model)
}

/// Solves the continuous relaxation, ignoring integrality flags.
pub(crate) fn solve_relaxation(model: &LinearModel) -> Result<Solution, SolveError> {
    model.validate()?;
    let std_form = StandardForm::build(model)?;
    let raw = match std_form.solve(model.objective())? {
        RawOutcome::Optimal(y) => y,
        RawOutcome::Infeasible => return Ok(Solution::non_optimal(SolveStatus::Infeasible)),
        RawOutcome::Unbounded => return Ok(Solution::non_optimal(SolveStatus::Unbounded)),
    };
    let xs = std_form.recover(&raw, model);
    check_feasibility(model, &xs)?;
    let mut values = BTreeMap::new();
    for (j, v) in model.variables().iter().enumerate() {
        values.insert(v.id.clone(), xs[j]);
    }
    Ok(Solution {
        status: SolveStatus::Optimal,
        values,
        objective_value: model.objective_value(&xs),
    })
}

fn check_feasibility(model: &LinearModel, xs: &[f64]) -> Result<(), SolveError> {
    for con in model.constraints() {
        let lhs: f64 = con.terms.iter().map(|&(j, a)| a * xs[j]).sum();
        let ok = match con.relation {
            Relation::Le => lhs <= con.rhs + FEASIBILITY_TOL,
            Relation::Ge => lhs >= con.rhs - FEASIBILITY_TOL,
            Relation::Eq => (lhs - con.rhs).abs() <= FEASIBILITY_TOL,
        };
        if !ok {
            return Err(SolveError::Numerics(format!(
                "constraint {} violated by {:.3e} at claimed optimum",
                con.name,
                (lhs - con.rhs).abs()
            )));
        }
    }
    Ok(())
}

enum VarMap {
    /// lower == upper: folded into the right hand side.
    Constant(f64),
    /// x = base + sign * y with y >= 0.
    Shifted { col: usize, base: f64, sign: f64 },
    /// Free variable split as x = y_pos - y_neg.
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    structural: usize,
    rows: Vec<(Vec<f64>, Relation, f64)>,
    map: Vec<VarMap>,
}

enum RawOutcome {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

impl StandardForm {
    fn build(model: &LinearModel) -> Result<StandardForm, SolveError> {
        let mut map = Vec::with_capacity(model.variables().len());
        let mut structural = 0usize;
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for v in model.variables() {
            if v.lower == v.upper {
                map.push(VarMap::Constant(v.lower));
            } else if v.lower.is_finite() {
                let col = structural;
                structural += 1;
                map.push(VarMap::Shifted { col, base: v.lower, sign: 1.0 });
                if v.upper.is_finite() {
                    bound_rows.push((col, v.upper - v.lower));
                }
            } else if v.upper.is_finite() {
                let col = structural;
                structural += 1;
                map.push(VarMap::Shifted { col, base: v.upper, sign: -1.0 });
            } else {
                let pos = structural;
                let neg = structural + 1;
                structural += 2;
                map.push(VarMap::Split { pos, neg });
            }
        }

        let mut rows = Vec::with_capacity(model.constraints().len() + bound_rows.len());
        for con in model.constraints() {
            let mut dense = vec![0.0; structural];
            let mut shift = 0.0;
            for &(j, a) in &con.terms {
                match map[j] {
                    VarMap::Constant(c) => shift += a * c,
                    VarMap::Shifted { col, base, sign } => {
                        dense[col] += a * sign;
                        shift += a * base;
                    }
                    VarMap::Split { pos, neg } => {
                        dense[pos] += a;
                        dense[neg] -= a;
                    }
                }
            }
            rows.push((dense, con.relation, con.rhs - shift));
        }
        for (col, cap) in bound_rows {
            let mut dense = vec![0.0; structural];
            dense[col] = 1.0;
            rows.push((dense, Relation::Le, cap));
        }
        // Normalize to nonnegative right hand sides.
        for (dense, rel, rhs) in rows.iter_mut() {
            if *rhs < 0.0 {
                for a in dense.iter_mut() {
                    *a = -*a;
                }
                *rhs = -*rhs;
                *rel = match *rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }
        Ok(StandardForm { structural, rows, map })
    }

    /// Runs both phases and returns values for the standard-form columns.
    /// `objective` is sparse over the original variable indices.
    fn solve(&self, objective: &[(usize, f64)]) -> Result<RawOutcome, SolveError> {
        let m = self.rows.len();
        let n_slack = self
            .rows
            .iter()
            .filter(|(_, rel, _)| matches!(rel, Relation::Le | Relation::Ge))
            .count();
        let n_art = self
            .rows
            .iter()
            .filter(|(_, rel, _)| matches!(rel, Relation::Ge | Relation::Eq))
            .count();
        let art_start = self.structural + n_slack;
        let width = art_start + n_art;
        // Column layout: structural | slack/surplus | artificial | rhs.
        let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut basis: Vec<usize> = Vec::with_capacity(m);
        let mut next_slack = self.structural;
        let mut next_art = art_start;
        for (dense, rel, rhs) in &self.rows {
            let mut row = vec![0.0; width + 1];
            row[..self.structural].copy_from_slice(dense);
            row[width] = *rhs;
            match rel {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            tab.push(row);
        }

        // Phase-2 cost row: reduced costs of the true objective. Slack and
        // artificial basics carry zero cost, so it starts already reduced.
        let mut z_obj = vec![0.0; width + 1];
        for &(j, c) in objective {
            match self.map[j] {
                VarMap::Constant(_) => {}
                VarMap::Shifted { col, sign, .. } => z_obj[col] += c * sign,
                VarMap::Split { pos, neg } => {
                    z_obj[pos] += c;
                    z_obj[neg] -= c;
                }
            }
        }
        // Phase-1 cost row: sum of artificials, reduced against the basis.
        let mut z_art = vec![0.0; width + 1];
        for col in art_start..width {
            z_art[col] = 1.0;
        }
        for (r, row) in tab.iter().enumerate() {
            if basis[r] >= art_start {
                for j in 0..=width {
                    z_art[j] -= row[j];
                }
            }
        }

        let mut state = Tableau {
            tab,
            basis,
            width,
            art_start,
            bland: false,
            degenerate_pivots: 0,
        };

        // Phase 1.
        if n_art > 0 {
            match state.run(&mut z_art, &mut z_obj, true) {
                PhaseEnd::Optimal => {}
                PhaseEnd::Unbounded => {
                    return Err(SolveError::Numerics("phase 1 reported unbounded".into()))
                }
            }
            let infeasibility = -z_art[state.width];
            if infeasibility > FEASIBILITY_TOL {
                return Ok(RawOutcome::Infeasible);
            }
            state.drive_out_artificials(&mut z_art, &mut z_obj);
        }

        // Phase 2 over non-artificial columns only.
        match state.run(&mut z_obj, &mut z_art, false) {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => return Ok(RawOutcome::Unbounded),
        }

        let mut y = vec![0.0; state.width];
        for (r, &b) in state.basis.iter().enumerate() {
            let v = state.tab[r][state.width];
            y[b] = if v < 0.0 && v > -FEASIBILITY_TOL { 0.0 } else { v };
        }
        Ok(RawOutcome::Optimal(y))
    }

    fn recover(&self, y: &[f64], model: &LinearModel) -> Vec<f64> {
        let mut xs = Vec::with_capacity(self.map.len());
        for (j, mapping) in self.map.iter().enumerate() {
            let mut x = match *mapping {
                VarMap::Constant(c) => c,
                VarMap::Shifted { col, base, sign } => base + sign * y[col],
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            };
            let v = &model.variables()[j];
            // Snap values that drifted within tolerance back onto their bounds.
            if v.lower.is_finite() && x < v.lower && x > v.lower - FEASIBILITY_TOL {
                x = v.lower;
            }
            if v.upper.is_finite() && x > v.upper && x < v.upper + FEASIBILITY_TOL {
                x = v.upper;
            }
            xs.push(x);
        }
        xs
    }
}

struct Tableau {
    tab: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    art_start: usize,
    bland: bool,
    degenerate_pivots: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    /// Pivots until the active cost row is optimal. `shadow` is the other
    /// phase's cost row, kept reduced through the same eliminations.
    fn run(&mut self, active: &mut [f64], shadow: &mut [f64], allow_artificials: bool) -> PhaseEnd {
        let col_end = if allow_artificials { self.width } else { self.art_start };
        loop {
            let entering = self.pick_entering(active, col_end);
            let Some(e) = entering else { return PhaseEnd::Optimal };
            let Some(r) = self.pick_leaving(e) else { return PhaseEnd::Unbounded };
            let ratio = self.tab[r][self.width] / self.tab[r][e];
            if !self.bland && ratio.abs() <= DEGENERATE_RATIO_TOL {
                self.degenerate_pivots += 1;
                if self.degenerate_pivots > DEGENERATE_PIVOT_LIMIT {
                    self.bland = true;
                }
            }
            self.pivot(r, e, active, shadow);
        }
    }

    fn pick_entering(&self, z: &[f64], col_end: usize) -> Option<usize> {
        if self.bland {
            return (0..col_end).find(|&j| z[j] < -REDUCED_COST_TOL);
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..col_end {
            if z[j] < -REDUCED_COST_TOL && best.map_or(true, |(_, v)| z[j] < v) {
                best = Some((j, z[j]));
            }
        }
        best.map(|(j, _)| j)
    }

    fn pick_leaving(&self, e: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.tab.len() {
            let a = self.tab[r][e];
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.tab[r][self.width] / a;
            let take = match best {
                None => true,
                Some((br, bratio)) => {
                    ratio < bratio - RATIO_TIE_TOL
                        || (ratio < bratio + RATIO_TIE_TOL && self.basis[r] < self.basis[br])
                }
            };
            if take {
                best = Some((r, ratio));
            }
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, r: usize, e: usize, active: &mut [f64], shadow: &mut [f64]) {
        let p = self.tab[r][e];
        for x in self.tab[r].iter_mut() {
            *x /= p;
        }
        let pivot_row = self.tab[r].clone();
        for (rr, row) in self.tab.iter_mut().enumerate() {
            if rr == r {
                continue;
            }
            let f = row[e];
            if f != 0.0 {
                for (x, &pv) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= f * pv;
                }
                row[e] = 0.0;
            }
        }
        for z in [active, shadow] {
            let f = z[e];
            if f != 0.0 {
                for (x, &pv) in z.iter_mut().zip(pivot_row.iter()) {
                    *x -= f * pv;
                }
                z[e] = 0.0;
            }
        }
        self.basis[r] = e;
    }

    /// Pivots zero-valued basic artificials onto real columns; rows that
    /// cannot pivot are linearly dependent and are dropped.
    fn drive_out_artificials(&mut self, z_a: &mut Vec<f64>, z_b: &mut Vec<f64>) {
        let mut r = 0;
        while r < self.tab.len() {
            if self.basis[r] >= self.art_start {
                let e = (0..self.art_start).find(|&j| self.tab[r][j].abs() > PIVOT_TOL);
                match e {
                    Some(e) => {
                        // Degenerate pivot: basic value is (near) zero.
                        let (active, shadow) = (&mut *z_a, &mut *z_b);
                        self.pivot(r, e, active, shadow);
                        r += 1;
                    }
                    None => {
                        self.tab.remove(r);
                        self.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }
}
