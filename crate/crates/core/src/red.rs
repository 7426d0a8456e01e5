//! Adversarial disruption: given the planner's per-link truck counts,
//! allocate disruption effort `W` on flow-carrying links to maximize
//!
//! ```text
//! sum_l n_l (e^{W_l} - 1) + eps * sum_l ln(b_l - W_l)
//!                         + eps_hat * ln(beta - sum_l W_l)
//! ```
//!
//! subject to `0 <= W_l <= 1`. The log barriers keep effort strictly inside
//! the per-link and total budgets and model diminishing returns near them.
//! The exposure term is convex in `W`, so the objective as a whole is not
//! concave; each coordinate is maximized globally by a dense scan plus
//! derivative bisection, cycled until stationary. Links with zero flow get
//! zero effort: they contribute neither exposure nor barrier terms.

use crate::num;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Strict-interior margin kept between effort and its budget bounds.
pub const INTERIOR_MARGIN: f64 = 1e-9;
/// Stationarity tolerance targeted by the coordinate solver.
pub const KKT_TOL: f64 = 1e-8;

const SCAN_POINTS: usize = 1024;
const BISECT_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 500;
const SWEEP_TOL: f64 = 1e-13;

pub type LinkKey = (String, String);

/// Disruption budgets: barrier weights plus per-link and total limits.
#[derive(Debug, Clone, PartialEq)]
pub struct RedBudget {
    pub epsilon: f64,
    pub epsilon_hat: f64,
    pub total: f64,
    /// Per-link budget overrides; links not listed use `per_link_default`.
    pub per_link: BTreeMap<LinkKey, f64>,
    pub per_link_default: f64,
}

impl Default for RedBudget {
    fn default() -> Self {
        RedBudget {
            epsilon: 0.01,
            epsilon_hat: 0.01,
            total: 1.0,
            per_link: BTreeMap::new(),
            per_link_default: 1.0,
        }
    }
}

impl RedBudget {
    pub fn link_budget(&self, link: &LinkKey) -> f64 {
        self.per_link.get(link).copied().unwrap_or(self.per_link_default)
    }

    pub fn validate(&self) -> Result<(), RedError> {
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("epsilon_hat", self.epsilon_hat),
            ("total", self.total),
            ("per_link_default", self.per_link_default),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(RedError::InvalidBudget(format!("{name} must be strictly positive")));
            }
        }
        for (link, &b) in &self.per_link {
            if !(b > 0.0) || !b.is_finite() {
                return Err(RedError::InvalidBudget(format!(
                    "per-link budget for ({}, {}) must be strictly positive",
                    link.0, link.1
                )));
            }
        }
        Ok(())
    }
}

/// Effort and induced per-unit cost increase per link.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DisruptionProfile {
    pub effort: BTreeMap<LinkKey, f64>,
    pub cost_increase: BTreeMap<LinkKey, f64>,
    pub objective: f64,
    pub warnings: Vec<String>,
}

impl DisruptionProfile {
    /// Links whose cost increase reaches `z_min`, the loop's heavy-link set.
    pub fn heavy_links(&self, z_min: f64) -> BTreeMap<LinkKey, f64> {
        self.cost_increase
            .iter()
            .filter(|(_, &z)| z >= z_min)
            .map(|(k, &z)| (k.clone(), z))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum RedError {
    InvalidBudget(String),
    EffortDomain(String),
}

impl fmt::Display for RedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RedError::InvalidBudget(msg) => write!(f, "invalid disruption budget: {msg}"),
            RedError::EffortDomain(msg) => write!(f, "effort out of domain: {msg}"),
        }
    }
}

impl core::error::Error for RedError {}

/// Elementwise `Z = e^W - 1` with a domain check on `W`.
pub fn effort_to_impact(
    effort: &BTreeMap<LinkKey, f64>,
) -> Result<BTreeMap<LinkKey, f64>, RedError> {
    let mut out = BTreeMap::new();
    for (link, &w) in effort {
        if !(0.0..=1.0).contains(&w) {
            return Err(RedError::EffortDomain(format!(
                "effort on ({}, {}) is {w}, outside [0, 1]",
                link.0, link.1
            )));
        }
        out.insert(link.clone(), num::exp(w) - 1.0);
    }
    Ok(out)
}

/// Objective value at `effort` for the links carrying positive flow.
pub fn red_objective(
    flows: &BTreeMap<LinkKey, f64>,
    budget: &RedBudget,
    effort: &BTreeMap<LinkKey, f64>,
) -> f64 {
    let mut value = 0.0;
    let mut total_effort = 0.0;
    for (link, &n) in flows {
        if n <= 0.0 {
            continue;
        }
        let w = effort.get(link).copied().unwrap_or(0.0);
        value += n * (num::exp(w) - 1.0);
        value += budget.epsilon * num::ln(budget.link_budget(link) - w);
        total_effort += w;
    }
    value + budget.epsilon_hat * num::ln(budget.total - total_effort)
}

/// Worst stationarity violation over the flow-carrying links: the gradient
/// must vanish at interior points, be nonpositive at `W = 0`, and be
/// nonnegative at `W = 1`.
pub fn kkt_residual(
    flows: &BTreeMap<LinkKey, f64>,
    budget: &RedBudget,
    effort: &BTreeMap<LinkKey, f64>,
) -> f64 {
    let total: f64 = flows
        .iter()
        .filter(|(_, &n)| n > 0.0)
        .map(|(l, _)| effort.get(l).copied().unwrap_or(0.0))
        .sum();
    let mut worst = 0.0_f64;
    for (link, &n) in flows {
        if n <= 0.0 {
            continue;
        }
        let w = effort.get(link).copied().unwrap_or(0.0);
        let b = budget.link_budget(link);
        let grad = n * num::exp(w) - budget.epsilon / (b - w)
            - budget.epsilon_hat / (budget.total - total);
        let residual = if w <= 0.0 {
            grad.max(0.0)
        } else if w >= 1.0 {
            (-grad).max(0.0)
        } else {
            grad.abs()
        };
        worst = worst.max(residual);
    }
    worst
}

/// Maximizes the disruption objective over the links with positive flow.
/// Deterministic: links are swept in key order from the fixed interior
/// start until no coordinate moves.
pub fn solve_red(
    flows: &BTreeMap<LinkKey, f64>,
    budget: &RedBudget,
) -> Result<DisruptionProfile, RedError> {
    budget.validate()?;
    let active: Vec<(LinkKey, f64)> = flows
        .iter()
        .filter(|(_, &n)| n > 0.0)
        .map(|(l, &n)| (l.clone(), n))
        .collect();

    let mut profile = DisruptionProfile::default();
    for link in flows.keys() {
        profile.effort.insert(link.clone(), 0.0);
        profile.cost_increase.insert(link.clone(), 0.0);
    }
    if active.is_empty() {
        return Ok(profile);
    }

    let budget_sum: f64 = active.iter().map(|(l, _)| budget.link_budget(l)).sum();
    if budget.total > budget_sum {
        profile.warnings.push(format!(
            "total budget {} exceeds the sum of per-link budgets {budget_sum}; the total barrier may never bind",
            budget.total
        ));
    }

    // The exposure term rewards concentrating effort while the shared
    // budget couples the links, so coordinate ascent can settle into a
    // balanced local optimum. Run it from a symmetric interior start plus
    // one start concentrated on each link and keep the best.
    let count = active.len() as f64;
    let symmetric: Vec<f64> = active
        .iter()
        .map(|(l, _)| {
            (0.5_f64)
                .min(budget.link_budget(l) / 2.0)
                .min(budget.total / (2.0 * count))
        })
        .collect();
    let mut starts: Vec<Vec<f64>> = alloc::vec![symmetric];
    for i in 0..active.len() {
        // Fully saturate one link so the sweep cannot reallocate its budget
        // to an earlier coordinate before this link's slice is optimized.
        let mut start = alloc::vec![0.0; active.len()];
        let b = budget.link_budget(&active[i].0);
        start[i] = 1.0_f64.min(b - INTERIOR_MARGIN).min(budget.total - INTERIOR_MARGIN).max(0.0);
        starts.push(start);
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for mut w in starts {
        for _ in 0..MAX_SWEEPS {
            let mut max_delta = 0.0_f64;
            for i in 0..active.len() {
                let (link, n) = &active[i];
                let others: f64 =
                    w.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).sum();
                let b = budget.link_budget(link);
                let hi = 1.0_f64
                    .min(b - INTERIOR_MARGIN)
                    .min(budget.total - others - INTERIOR_MARGIN)
                    .max(0.0);
                let next = maximize_coordinate(*n, b, budget.total - others, budget, hi);
                max_delta = max_delta.max((next - w[i]).abs());
                w[i] = next;
            }
            if max_delta <= SWEEP_TOL {
                break;
            }
        }
        let mut effort = profile.effort.clone();
        for (i, (link, _)) in active.iter().enumerate() {
            effort.insert(link.clone(), w[i]);
        }
        let value = red_objective(flows, budget, &effort);
        if best.as_ref().map_or(true, |(_, bv)| value > *bv) {
            best = Some((w, value));
        }
    }
    let (w, _) = best.expect("at least one start");

    for (i, (link, _)) in active.iter().enumerate() {
        profile.effort.insert(link.clone(), w[i]);
        profile.cost_increase.insert(link.clone(), num::exp(w[i]) - 1.0);
    }
    profile.objective = red_objective(flows, budget, &profile.effort);
    Ok(profile)
}

/// Globally maximizes `n (e^w - 1) + eps ln(b - w) + eps_hat ln(rem - w)`
/// on `[0, hi]`. The shape can hold up to two stationary points, so the
/// interval is scanned densely for descending sign changes of the
/// derivative, each refined by bisection, and the best candidate wins.
fn maximize_coordinate(n: f64, b: f64, rem: f64, budget: &RedBudget, hi: f64) -> f64 {
    if hi <= 0.0 {
        return 0.0;
    }
    let value = |w: f64| {
        n * (num::exp(w) - 1.0)
            + budget.epsilon * num::ln(b - w)
            + budget.epsilon_hat * num::ln(rem - w)
    };
    let deriv =
        |w: f64| n * num::exp(w) - budget.epsilon / (b - w) - budget.epsilon_hat / (rem - w);

    let second = |w: f64| {
        n * num::exp(w)
            - budget.epsilon / ((b - w) * (b - w))
            - budget.epsilon_hat / ((rem - w) * (rem - w))
    };

    let mut candidates: Vec<f64> = alloc::vec![0.0, hi];
    let step = hi / SCAN_POINTS as f64;
    let mut prev_w = 0.0;
    let mut prev_d = deriv(0.0);
    for i in 1..=SCAN_POINTS {
        let cur_w = step * i as f64;
        let cur_d = deriv(cur_w);
        if prev_d > 0.0 && cur_d <= 0.0 {
            // Descending crossing: a local maximum sits in this bracket.
            let (mut lo, mut up) = (prev_w, cur_w);
            while up - lo > BISECT_TOL {
                let mid = 0.5 * (lo + up);
                if mid <= lo || mid >= up {
                    break;
                }
                if deriv(mid) > 0.0 {
                    lo = mid;
                } else {
                    up = mid;
                }
            }
            // Newton polish: the barriers make the derivative extremely
            // steep near its root, so bisection alone can leave a residual
            // far above the stationarity tolerance.
            let mut w = 0.5 * (lo + up);
            for _ in 0..30 {
                let g = deriv(w);
                if g == 0.0 {
                    break;
                }
                let h = second(w);
                if h == 0.0 {
                    break;
                }
                let next = (w - g / h).clamp(prev_w, cur_w);
                if next == w {
                    break;
                }
                w = next;
            }
            candidates.push(w);
        }
        prev_w = cur_w;
        prev_d = cur_d;
    }

    let mut best = candidates[0];
    let mut best_value = value(best);
    for &c in &candidates[1..] {
        let v = value(c);
        if v > best_value {
            best = c;
            best_value = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn link(a: &str, b: &str) -> LinkKey {
        (a.to_string(), b.to_string())
    }

    #[test]
    fn zero_flow_gets_zero_effort() {
        let flows: BTreeMap<LinkKey, f64> =
            [(link("a", "b"), 0.0), (link("b", "c"), 0.0)].into_iter().collect();
        let profile = solve_red(&flows, &RedBudget::default()).unwrap();
        assert!(profile.effort.values().all(|&w| w == 0.0));
        assert!(profile.cost_increase.values().all(|&z| z == 0.0));
    }

    #[test]
    fn effort_to_impact_analytic_points() {
        let w: BTreeMap<LinkKey, f64> = [
            (link("a", "b"), 0.0),
            (link("b", "c"), core::f64::consts::LN_2),
            (link("c", "d"), 1.0),
        ]
        .into_iter()
        .collect();
        let z = effort_to_impact(&w).unwrap();
        assert_eq!(z[&link("a", "b")], 0.0);
        assert!((z[&link("b", "c")] - 1.0).abs() <= 1e-12);
        assert!((z[&link("c", "d")] - (core::f64::consts::E - 1.0)).abs() <= 1e-12);
    }

    #[test]
    fn effort_domain_enforced() {
        let w: BTreeMap<LinkKey, f64> = [(link("a", "b"), 1.2)].into_iter().collect();
        assert!(matches!(effort_to_impact(&w), Err(RedError::EffortDomain(_))));
    }

    #[test]
    fn heavier_flow_draws_more_effort() {
        let flows: BTreeMap<LinkKey, f64> =
            [(link("a", "b"), 30.0), (link("c", "d"), 1.0)].into_iter().collect();
        let profile = solve_red(&flows, &RedBudget::default()).unwrap();
        let w_heavy = profile.effort[&link("a", "b")];
        let w_light = profile.effort[&link("c", "d")];
        assert!(
            w_heavy > w_light,
            "expected strictly more effort on the heavy link: {w_heavy} vs {w_light}"
        );
    }

    #[test]
    fn solution_stays_interior_and_stationary() {
        let flows: BTreeMap<LinkKey, f64> =
            [(link("a", "b"), 10.0), (link("c", "d"), 4.0)].into_iter().collect();
        let budget = RedBudget::default();
        let profile = solve_red(&flows, &budget).unwrap();
        let total: f64 = profile.effort.values().sum();
        for (l, &w) in &profile.effort {
            assert!(budget.link_budget(l) - w >= INTERIOR_MARGIN);
        }
        assert!(budget.total - total >= INTERIOR_MARGIN);
        assert!(kkt_residual(&flows, &budget, &profile.effort) <= KKT_TOL);
    }

    #[test]
    fn budget_validation_rejects_nonpositive() {
        let budget = RedBudget { epsilon: 0.0, ..RedBudget::default() };
        assert!(matches!(
            solve_red(&BTreeMap::new(), &budget),
            Err(RedError::InvalidBudget(_))
        ));
    }

    #[test]
    fn warns_when_total_budget_exceeds_link_sum() {
        let flows: BTreeMap<LinkKey, f64> = [(link("a", "b"), 5.0)].into_iter().collect();
        let budget = RedBudget { total: 3.0, per_link_default: 1.0, ..RedBudget::default() };
        let profile = solve_red(&flows, &budget).unwrap();
        assert_eq!(profile.warnings.len(), 1);
    }

    #[test]
    fn deterministic_effort() {
        let flows: BTreeMap<LinkKey, f64> =
            [(link("a", "b"), 12.0), (link("b", "c"), 7.0), (link("c", "d"), 2.0)]
                .into_iter()
                .collect();
        let a = solve_red(&flows, &RedBudget::default()).unwrap();
        let b = solve_red(&flows, &RedBudget::default()).unwrap();
        assert_eq!(a.effort, b.effort);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }
}
