//! Economic dispatch solved four ways: closed form, exhaustive grid oracle,
//! dual decomposition (dual ascent on the price) and the method of multipliers.
//!
//! Every iterative solver records an [`IterationTrace`]. With `S = Σ 1/(2a_i)`
//! the imbalance `D − ΣP` evolves as an affine map of the price, contracting by
//! `|1 − αS|` per dual-ascent step and by `1/(1 + ρS)` per multiplier step.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::linalg::solve_diag_plus_ones;
use crate::model::{DispatchSolution, Scenario};

/// Imbalance beyond `DIVERGENCE_FACTOR · max(|D|, 1)` stops an iteration as diverged.
pub const DIVERGENCE_FACTOR: f64 = 1e9;

/// Largest grid the brute-force oracle will enumerate.
const MAX_GRID_POINTS: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterState {
    pub k: usize,
    /// Price, $/MWh.
    pub lambda: f64,
    /// Power commands, MW.
    pub p: Vec<f64>,
    /// `D − Σp`, MW.
    pub imbalance: f64,
    /// `−imbalance / β`, Hz. Surplus generation reads as positive deviation.
    pub delta_f: f64,
}

impl IterState {
    pub fn new(k: usize, lambda: f64, p: Vec<f64>, s: &Scenario) -> Self {
        let imbalance = s.total_load() - p.iter().sum::<f64>();
        Self {
            k,
            lambda,
            p,
            imbalance,
            delta_f: -imbalance / s.beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIterations,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub states: Vec<IterState>,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl IterationTrace {
    pub fn last(&self) -> &IterState {
        self.states.last().expect("trace is never empty")
    }

    /// Number of steps taken (the index of the final state).
    pub fn iterations(&self) -> usize {
        self.last().k
    }

    /// Geometric mean of consecutive `|imbalance|` ratios over the last 80% of
    /// the usable tail. States with `|imbalance| < 10·tol` are excluded.
    /// `None` when fewer than two usable consecutive states exist.
    pub fn empirical_ratio(&self, tol: f64) -> Option<f64> {
        let floor = 10.0 * tol;
        let ratios: Vec<f64> = self
            .states
            .windows(2)
            .filter_map(|w| {
                let (prev, next) = (w[0].imbalance.abs(), w[1].imbalance.abs());
                (prev >= floor && next >= floor && prev.is_finite() && next.is_finite())
                    .then(|| next / prev)
            })
            .collect();
        if ratios.is_empty() {
            return None;
        }
        let keep = ((ratios.len() as f64) * 0.8).ceil() as usize;
        let tail = &ratios[ratios.len() - keep..];
        let mean_log = tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64;
        Some(mean_log.exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterOptions {
    /// Convergence threshold on `|imbalance|`, MW.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting price. Defaults to generator 1's marginal cost at its `p_init`.
    pub lambda0: Option<f64>,
}

impl Default for IterOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 10_000,
            lambda0: None,
        }
    }
}

impl IterOptions {
    pub fn with_lambda0(mut self, lambda0: f64) -> Self {
        self.lambda0 = Some(lambda0);
        self
    }

    pub fn initial_price(&self, s: &Scenario) -> f64 {
        self.lambda0.unwrap_or_else(|| {
            let g = &s.generators[0];
            g.cost.marginal(g.p_init)
        })
    }

    fn check(&self) -> Result<()> {
        require_positive("tol", self.tol)?;
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        if let Some(l) = self.lambda0 {
            if !l.is_finite() {
                return Err(Error::param("lambda0", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Closed-form optimum: equal marginal cost `λ*` substituted into the balance constraint.
pub fn analytic_dispatch(s: &Scenario) -> DispatchSolution {
    let sensitivity = s.price_sensitivity();
    let offset: f64 = s.costs().map(|c| c.b / (2.0 * c.a)).sum();
    let lambda_star = (s.total_load() + offset) / sensitivity;
    let p: Vec<f64> = s.costs().map(|c| c.output_at_price(lambda_star)).collect();
    let total_cost = s.total_cost(&p);
    DispatchSolution {
        p,
        lambda_star,
        total_cost,
    }
}

/// Exhaustive grid search over `P_1..P_{N-1}` with `P_N = D − Σ P_i`.
///
/// The search box starts at `[−2D, 2D]` per coordinate (at least `[−1, 1]`)
/// and doubles whenever the best grid point touches its boundary. The price
/// reported is the mean marginal cost at the grid optimum.
pub fn brute_force_dispatch(s: &Scenario, grid_step: f64) -> Result<DispatchSolution> {
    require_positive("grid_step", grid_step)?;
    let n = s.n_generators();
    if n > 4 {
        return Err(Error::TooManyGenerators(n));
    }
    let demand = s.total_load();
    let free = n - 1;

    let mut half_width = (2.0 * demand.abs()).max(1.0);
    let p = loop {
        let cells = (2.0 * half_width / grid_step).ceil();
        if cells.powi(free as i32) > MAX_GRID_POINTS {
            return Err(Error::param(
                "grid_step",
                format!("grid of {cells} cells per axis is too fine for {n} generators"),
            ));
        }
        let search = GridSearch::new(s, -half_width, grid_step, cells as usize);
        let (best, on_edge) = search.run();
        if !on_edge {
            break best;
        }
        half_width *= 2.0;
    };

    let marginals = s.marginal_costs(&p);
    let lambda_star = marginals.iter().sum::<f64>() / n as f64;
    let total_cost = s.total_cost(&p);
    Ok(DispatchSolution {
        p,
        lambda_star,
        total_cost,
    })
}

struct GridSearch<'a> {
    s: &'a Scenario,
    lo: f64,
    step: f64,
    cells: usize,
    /// Cost of the first N−1 generators at each grid point.
    tables: Vec<Vec<f64>>,
}

impl<'a> GridSearch<'a> {
    fn new(s: &'a Scenario, lo: f64, step: f64, cells: usize) -> Self {
        let n = s.n_generators();
        let tables = s.generators[..n - 1]
            .iter()
            .map(|g| (0..=cells).map(|j| g.cost.cost(lo + j as f64 * step)).collect())
            .collect();
        Self {
            s,
            lo,
            step,
            cells,
            tables,
        }
    }

    fn point(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.step
    }

    /// Returns the best power vector and whether any free coordinate sits on the box edge.
    fn run(&self) -> (Vec<f64>, bool) {
        let free = self.tables.len();
        let mut idx = vec![0usize; free];
        let mut best_idx = vec![0usize; free];
        let mut best_cost = f64::INFINITY;
        self.descend(0, 0.0, 0.0, &mut idx, &mut best_idx, &mut best_cost);

        let demand = self.s.total_load();
        let mut p: Vec<f64> = best_idx.iter().map(|&j| self.point(j)).collect();
        let last = demand - p.iter().sum::<f64>();
        p.push(last);
        let on_edge = best_idx.iter().any(|&j| j == 0 || j == self.cells);
        (p, on_edge)
    }

    fn descend(
        &self,
        depth: usize,
        cost_so_far: f64,
        power_so_far: f64,
        idx: &mut [usize],
        best_idx: &mut [usize],
        best_cost: &mut f64,
    ) {
        let last = &self.s.generators[self.s.n_generators() - 1].cost;
        let demand = self.s.total_load();
        if depth == self.tables.len() {
            let total = cost_so_far + last.cost(demand - power_so_far);
            if total < *best_cost {
                *best_cost = total;
                best_idx.copy_from_slice(idx);
            }
            return;
        }
        let table = &self.tables[depth];
        if depth + 1 == self.tables.len() {
            // innermost free coordinate: flat loop
            let mut local_best = f64::INFINITY;
            let mut local_j = 0;
            for (j, c) in table.iter().enumerate() {
                let total = cost_so_far + c + last.cost(demand - power_so_far - self.point(j));
                if total < local_best {
                    local_best = total;
                    local_j = j;
                }
            }
            if local_best < *best_cost {
                *best_cost = local_best;
                idx[depth] = local_j;
                best_idx.copy_from_slice(idx);
            }
            return;
        }
        for (j, c) in table.iter().enumerate() {
            idx[depth] = j;
            self.descend(
                depth + 1,
                cost_so_far + c,
                power_so_far + self.point(j),
                idx,
                best_idx,
                best_cost,
            );
        }
    }
}

/// Per-generator minimizers of `C_i(P_i) − λ·P_i`: `P_i = (λ − b_i)/(2a_i)`.
pub fn dual_inner_minimize(lambda: f64, s: &Scenario) -> Vec<f64> {
    s.costs().map(|c| c.output_at_price(lambda)).collect()
}

pub fn dual_ascent_initial(s: &Scenario, lambda0: f64) -> IterState {
    IterState::new(0, lambda0, dual_inner_minimize(lambda0, s), s)
}

/// One price update `λ ← λ + α·(D − ΣP)` followed by the per-generator minimizations.
pub fn dual_ascent_step(st: &IterState, s: &Scenario, alpha: f64) -> IterState {
    let lambda = st.lambda + alpha * st.imbalance;
    IterState::new(st.k + 1, lambda, dual_inner_minimize(lambda, s), s)
}

pub fn dual_ascent_solve(s: &Scenario, alpha: f64, opts: &IterOptions) -> Result<IterationTrace> {
    require_positive("alpha", alpha)?;
    opts.check()?;
    let init = dual_ascent_initial(s, opts.initial_price(s));
    Ok(run_iteration(s, opts, init, |st| dual_ascent_step(st, s, alpha)))
}

/// Dual ascent converges iff `0 < α < 2/S`.
pub fn stability_bound_alpha(s: &Scenario) -> f64 {
    2.0 / s.price_sensitivity()
}

/// Per-step imbalance ratio of dual ascent, `|1 − αS|`.
pub fn dual_contraction_factor(s: &Scenario, alpha: f64) -> f64 {
    (1.0 - alpha * s.price_sensitivity()).abs()
}

/// Exact minimizer of the augmented Lagrangian at price `lambda`:
/// solves `2a_i·P_i + b_i − ρ·(D − ΣP) = λ` for every `i`.
pub fn mom_inner_minimize(lambda: f64, s: &Scenario, rho: f64) -> Vec<f64> {
    let diag: Vec<f64> = s.costs().map(|c| 2.0 * c.a).collect();
    let demand = s.total_load();
    let rhs: Vec<f64> = s.costs().map(|c| lambda - c.b + rho * demand).collect();
    solve_diag_plus_ones(&diag, rho, &rhs)
}

pub fn mom_initial(s: &Scenario, lambda0: f64, rho: f64) -> IterState {
    IterState::new(0, lambda0, mom_inner_minimize(lambda0, s, rho), s)
}

/// `λ ← λ + ρ·(D − ΣP)` with `P` the augmented minimizer at the current price,
/// then re-minimize at the new price.
pub fn mom_step(st: &IterState, s: &Scenario, rho: f64) -> IterState {
    let lambda = st.lambda + rho * st.imbalance;
    IterState::new(st.k + 1, lambda, mom_inner_minimize(lambda, s, rho), s)
}

pub fn mom_solve(s: &Scenario, rho: f64, opts: &IterOptions) -> Result<IterationTrace> {
    require_positive("rho", rho)?;
    opts.check()?;
    let init = mom_initial(s, opts.initial_price(s), rho);
    Ok(run_iteration(s, opts, init, |st| mom_step(st, s, rho)))
}

/// Per-step imbalance ratio of the method of multipliers, `1/(1 + ρS)`.
pub fn mom_contraction_factor(s: &Scenario, rho: f64) -> f64 {
    1.0 / (1.0 + rho * s.price_sensitivity())
}

fn run_iteration(
    s: &Scenario,
    opts: &IterOptions,
    init: IterState,
    step: impl Fn(&IterState) -> IterState,
) -> IterationTrace {
    let guard = DIVERGENCE_FACTOR * s.total_load().abs().max(1.0);
    let mut states = vec![init];
    let stop_reason = loop {
        let st = states.last().expect("non-empty");
        let mag = st.imbalance.abs();
        if mag < opts.tol {
            break StopReason::Tolerance;
        }
        if mag.is_nan() || mag > guard {
            break StopReason::Diverged;
        }
        if st.k >= opts.max_iter {
            break StopReason::MaxIterations;
        }
        let next = step(st);
        states.push(next);
    };
    IterationTrace {
        states,
        converged: stop_reason == StopReason::Tolerance,
        stop_reason,
    }
}
