//! Branch-and-bound over the simplex relaxation.
//!
//! Node selection is best-bound (ties by lowest node id), branching picks
//! the integral variable whose fractional part is closest to one half (ties
//! by lowest variable index). Both rules are fixed so a given model always
//! produces the same solution.

use super::simplex::solve_relaxation;
use super::{LinearModel, SolveError, Solution, SolveStatus, INTEGRALITY_TOL};
use crate::num;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

const NODE_LIMIT: usize = 250_000;
const BOUND_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default)]
pub struct MipStats {
    /// LP relaxations solved, including the root.
    pub nodes_solved: usize,
    /// Nodes that produced children.
    pub nodes_branched: usize,
}

/// Total order on node bounds; `total_cmp` keeps the queue deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bound(f64);

impl Eq for Bound {}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Node {
    bounds: Vec<(f64, f64)>,
    relaxation: Solution,
}

/// Solves a mixed-integer model to within relative `gap` of the optimum
/// (`gap = 0` is exact at desk scale).
pub fn solve_mip(model: &LinearModel, gap: f64) -> Result<Solution, SolveError> {
    solve_mip_with_stats(model, gap).map(|(s, _)| s)
}

pub fn solve_mip_with_stats(
    model: &LinearModel,
    gap: f64,
) -> Result<(Solution, MipStats), SolveError> {
    model.validate()?;
    if !gap.is_finite() || gap < 0.0 {
        return Err(SolveError::Malformed("gap must be a nonnegative number".into()));
    }
    let int_vars: Vec<usize> = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.integral)
        .map(|(j, _)| j)
        .collect();

    let mut stats = MipStats::default();
    let mut relaxed = model.clone();
    let root = solve_relaxation(&relaxed)?;
    stats.nodes_solved += 1;
    match root.status {
        SolveStatus::Infeasible => return Ok((root, stats)),
        SolveStatus::Unbounded => return Ok((root, stats)),
        SolveStatus::Optimal => {}
    }
    if int_vars.is_empty() {
        return Ok((root, stats));
    }

    let root_bounds: Vec<(f64, f64)> = model
        .variables()
        .iter()
        .map(|v| (v.lower, v.upper))
        .collect();
    let mut queue: BTreeMap<(Bound, usize), Node> = BTreeMap::new();
    queue.insert(
        (Bound(root.objective_value), 0),
        Node { bounds: root_bounds, relaxation: root },
    );
    let mut next_id = 1usize;
    let mut incumbent: Option<Solution> = None;

    while let Some((key, node)) = queue.pop_first() {
        let bound = key.0 .0;
        if let Some(best) = &incumbent {
            // Best-bound order: once the tightest bound cannot beat the
            // incumbent by more than the gap, the search is complete.
            let cutoff = best.objective_value - gap * best.objective_value.abs().max(1.0);
            if bound >= cutoff - BOUND_EPS {
                break;
            }
        }
        let frac = most_fractional(&int_vars, model, &node.relaxation);
        match frac {
            None => {
                let candidate = snap_integral(model, &int_vars, &node.relaxation);
                let better = incumbent
                    .as_ref()
                    .map_or(true, |best| candidate.objective_value < best.objective_value - BOUND_EPS);
                if better {
                    incumbent = Some(candidate);
                }
            }
            Some((var, value)) => {
                stats.nodes_branched += 1;
                let floors = num::floor(value);
                for (lo, hi) in [
                    (node.bounds[var].0, floors),
                    (floors + 1.0, node.bounds[var].1),
                ] {
                    if lo > hi {
                        continue;
                    }
                    if stats.nodes_solved >= NODE_LIMIT {
                        return Err(SolveError::NodeLimit { incumbent });
                    }
                    let mut bounds = node.bounds.clone();
                    bounds[var] = (lo, hi);
                    for (j, &(l, u)) in bounds.iter().enumerate() {
                        relaxed.set_bounds(j, l, u);
                    }
                    let sol = solve_relaxation(&relaxed)?;
                    stats.nodes_solved += 1;
                    if sol.status != SolveStatus::Optimal {
                        continue;
                    }
                    if let Some(best) = &incumbent {
                        if sol.objective_value >= best.objective_value - BOUND_EPS {
                            continue;
                        }
                    }
                    queue.insert(
                        (Bound(sol.objective_value), next_id),
                        Node { bounds, relaxation: sol },
                    );
                    next_id += 1;
                }
            }
        }
    }

    match incumbent {
        Some(sol) => Ok((sol, stats)),
        None => Ok((Solution::non_optimal(SolveStatus::Infeasible), stats)),
    }
}

/// Picks the integral variable whose value is farthest from integrality,
/// i.e. fractional part closest to one half; ties go to the lowest index.
fn most_fractional(
    int_vars: &[usize],
    model: &LinearModel,
    sol: &Solution,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for &j in int_vars {
        let v = sol.value(&model.variables()[j].id);
        let dist = num::int_distance(v);
        if dist <= INTEGRALITY_TOL {
            continue;
        }
        let frac = v - num::floor(v);
        let score = (frac - 0.5).abs();
        if best.map_or(true, |(_, _, s)| score < s) {
            best = Some((j, v, score));
        }
    }
    best.map(|(j, v, _)| (j, v))
}

/// Rounds integral variables onto their integers and re-evaluates the
/// objective directly from the model, so incumbents compare independent of
/// the simplex's internal arithmetic.
fn snap_integral(model: &LinearModel, int_vars: &[usize], sol: &Solution) -> Solution {
    let mut values = sol.values.clone();
    for &j in int_vars {
        let id = &model.variables()[j].id;
        if let Some(v) = values.get_mut(id) {
            *v = num::round(*v);
        }
    }
    let xs: Vec<f64> = model
        .variables()
        .iter()
        .map(|v| values.get(&v.id).copied().unwrap_or(0.0))
        .collect();
    Solution {
        status: SolveStatus::Optimal,
        objective_value: model.objective_value(&xs),
        values,
    }
}
