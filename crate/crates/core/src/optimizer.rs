//! Descent loop with a geometric line search.

use std::fmt;

use crate::error::{Error, Result};
use crate::levelset::{HeavisideKernel, ScalarField};
use crate::mesh::BoundaryLabel;
use crate::par;
use crate::sensitivity::{compute_d, descent_direction, directional_derivative, DescentChoice, SensitivityField};
use crate::state::{solve_state, Problem, StateSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Stop once two consecutive costs differ by less than this.
    pub tol: f64,
    /// Threshold on `|J'(g) w|`; `None` means `1e-8 max(1, |J(g0)|)`.
    pub grad_tol: Option<f64>,
    /// Trial steps are `rho^i` for `i = 0..ls_max`.
    pub rho: f64,
    pub ls_max: usize,
    pub direction: DescentChoice,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { max_iters: 50, tol: 1e-6, grad_tol: None, rho: 0.6, ls_max: 10, direction: DescentChoice::DirI }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidInput(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if self.max_iters == 0 || self.ls_max == 0 {
            return Err(Error::InvalidInput("max_iters and ls_max must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tol must be positive, got {}", self.tol)));
        }
        if let Some(t) = self.grad_tol {
            if !(t >= 0.0) {
                return Err(Error::InvalidInput(format!("grad_tol must be nonnegative, got {t}")));
            }
        }
        if let DescentChoice::DirIII { gamma } = self.direction {
            if !(gamma > 0.0) {
                return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradZero,
    MaxIters,
    Stagnation,
    LineSearchFailed,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::GradZero => "GradZero",
            StopReason::MaxIters => "MaxIters",
            StopReason::Stagnation => "Stagnation",
            StopReason::LineSearchFailed => "LineSearchFailed",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One iteration: the cost and derivative at `g_n`, and the step taken from it.
/// `lambda` is zero when no step was taken.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub jprime_w: f64,
    pub lambda: f64,
    pub volume: f64,
    pub ls_trials: usize,
    pub stop_reason: Option<StopReason>,
}

#[derive(Debug)]
pub struct LineSearchOutcome<T> {
    /// Best trial as `(index, lambda, cost, payload)`, if any trial succeeded.
    pub best: Option<(usize, f64, f64, T)>,
    pub trials: usize,
    pub failed_trials: Vec<(usize, Error)>,
}

impl<T> LineSearchOutcome<T> {
    /// Whether the best trial improves on `current`.
    pub fn improves_on(&self, current: f64) -> bool {
        matches!(self.best, Some((_, _, cost, _)) if cost < current)
    }
}

/// Evaluates `eval(rho^i)` for `i = 0..ls_max` and keeps the smallest cost.
/// Trials may run concurrently; ties go to the lowest index, so the choice
/// does not depend on scheduling.
pub fn line_search<T, F>(rho: f64, ls_max: usize, eval: F) -> LineSearchOutcome<T>
where
    T: Send,
    F: Fn(f64) -> Result<(f64, T)> + Sync + Send,
{
    let results = par::map_coarse(ls_max, |i| {
        let lambda = rho.powi(i as i32);
        (lambda, eval(lambda))
    });
    let mut best: Option<(usize, f64, f64, T)> = None;
    let mut failed_trials = Vec::new();
    for (i, (lambda, r)) in results.into_iter().enumerate() {
        match r {
            Ok((cost, payload)) if cost.is_finite() => {
                if best.as_ref().is_none_or(|b| cost < b.2) {
                    best = Some((i, lambda, cost, payload));
                }
            }
            Ok((cost, _)) => failed_trials.push((i, Error::InvalidInput(format!("non-finite cost {cost}")))),
            Err(e) => failed_trials.push((i, e)),
        }
    }
    LineSearchOutcome { best, trials: ls_max, failed_trials }
}

/// Everything the per-iteration callback sees: the record and the iterate it
/// describes, with its state and sensitivity.
pub struct IterationView<'a> {
    pub record: &'a IterationRecord,
    pub g: &'a ScalarField,
    pub state: &'a StateSolution,
    pub sensitivity: &'a SensitivityField,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub history: Vec<IterationRecord>,
    /// The last iterate, which follows the last record when that record took a step.
    pub g: ScalarField,
    pub state: StateSolution,
    pub stop_reason: StopReason,
}

impl OptimizeOutcome {
    pub fn final_cost(&self) -> f64 {
        self.state.cost
    }
}

/// A run cut short by a hard solver failure.
#[derive(Debug)]
pub struct Aborted {
    pub history: Vec<IterationRecord>,
    pub g: ScalarField,
    pub error: Error,
}

impl fmt::Display for Aborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "optimization aborted after {} iterations: {}", self.history.len(), self.error)
    }
}

impl std::error::Error for Aborted {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Runs the descent loop from `g0`. `kernel` defines the cost; derivatives
/// always use its smooth counterpart.
pub fn optimize<F>(
    problem: &Problem,
    kernel: &HeavisideKernel,
    g0: ScalarField,
    config: &OptimizerConfig,
    mut callback: F,
) -> std::result::Result<OptimizeOutcome, Box<Aborted>>
where
    F: FnMut(&IterationView<'_>),
{
    let mut history = Vec::new();
    let mut g = g0;
    let abort = |history: Vec<IterationRecord>, g: ScalarField, error: Error| Box::new(Aborted { history, g, error });
    if let Err(e) = config.validate() {
        return Err(abort(history, g, e));
    }
    let mut state = match solve_state(problem, &g, kernel) {
        Ok(s) => s,
        Err(e) => return Err(abort(history, g, e)),
    };
    let grad_tol = config.grad_tol.unwrap_or(1e-8 * state.cost.abs().max(1.0));
    let mesh = problem.space.mesh();
    let gamma_n = mesh.labelled_vertices(BoundaryLabel::GammaN);
    let sigma_d = mesh.labelled_vertices(BoundaryLabel::SigmaD);

    for n in 0..config.max_iters {
        if gamma_n.iter().any(|&v| g.values()[v] <= 0.0) {
            log::warn!("iteration {n}: g <= 0 on part of the loaded boundary");
        }
        if !sigma_d.is_empty() && sigma_d.iter().all(|&v| g.values()[v] < 0.0) {
            log::warn!("iteration {n}: the design no longer touches the clamped boundary");
        }
        let sens = compute_d(problem, &state);
        let step = descent_direction(&config.direction, &problem.space, &g, &sens, kernel)
            .and_then(|w| directional_derivative(&g, &w, &sens, kernel).map(|jw| (w, jw)));
        let (w, jw) = match step {
            Ok(v) => v,
            Err(e) => return Err(abort(history, g, e)),
        };
        let mut record = IterationRecord {
            iter: n,
            cost: state.cost,
            jprime_w: jw,
            lambda: 0.0,
            volume: state.volume_term,
            ls_trials: 0,
            stop_reason: None,
        };
        log::debug!("iteration {n}: J = {:.6e}, J'w = {jw:.3e}", state.cost);

        if jw.abs() <= grad_tol {
            record.stop_reason = Some(StopReason::GradZero);
            callback(&IterationView { record: &record, g: &g, state: &state, sensitivity: &sens });
            history.push(record);
            return Ok(OptimizeOutcome { history, g, state, stop_reason: StopReason::GradZero });
        }

        let ls = line_search(config.rho, config.ls_max, |lambda| {
            let trial = g.add_scaled(lambda, &w);
            solve_state(problem, &trial, kernel).map(|s| (s.cost, (trial, s)))
        });
        record.ls_trials = ls.trials;
        for (i, e) in &ls.failed_trials {
            log::warn!("iteration {n}: line-search trial {i} failed: {e}");
        }
        let improves = ls.improves_on(state.cost);
        let Some((_, lambda, _, (next_g, next_state))) = ls.best.filter(|_| improves) else {
            record.stop_reason = Some(StopReason::LineSearchFailed);
            callback(&IterationView { record: &record, g: &g, state: &state, sensitivity: &sens });
            history.push(record);
            return Ok(OptimizeOutcome { history, g, state, stop_reason: StopReason::LineSearchFailed });
        };
        record.lambda = lambda;
        let previous = state.cost;
        if n + 1 == config.max_iters {
            record.stop_reason = Some(StopReason::MaxIters);
        } else if (previous - next_state.cost).abs() < config.tol {
            record.stop_reason = Some(StopReason::Stagnation);
        }
        callback(&IterationView { record: &record, g: &g, state: &state, sensitivity: &sens });
        let stop = record.stop_reason;
        history.push(record);
        g = next_g;
        state = next_state;
        if let Some(reason) = stop {
            return Ok(OptimizeOutcome { history, g, state, stop_reason: reason });
        }
    }
    unreachable!("the last iteration always sets a stop reason")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{FemSpace, Loads, Material};
    use crate::levelset::SaturationR;
    use crate::mesh::{BoundarySegment, Mesh, Rect, Side};
    use std::sync::Arc;

    #[test]
    fn line_search_hits_exact_power() {
        let ls = line_search(0.6, 10, |l| Ok(((l - 0.36) * (l - 0.36), ())));
        let (i, lambda, cost, _) = ls.best.unwrap();
        assert_eq!(i, 2);
        assert!((lambda - 0.36).abs() < 1e-15);
        assert!(cost < 1e-30);
        assert_eq!(ls.trials, 10);
    }

    #[test]
    fn line_search_increasing_fails() {
        let j0 = 0.0;
        let ls = line_search(0.6, 10, |l| Ok((j0 + l, ())));
        assert!(!ls.improves_on(j0));
    }

    #[test]
    fn line_search_linear_takes_full_step() {
        let ls = line_search(0.6, 10, |l| Ok((3.0 - l, ())));
        assert_eq!(ls.best.unwrap().1, 1.0);
        assert!(ls.improves_on(3.0));
    }

    #[test]
    fn line_search_skips_failed_trials() {
        let ls = line_search(0.5, 4, |l| {
            if l == 1.0 {
                Err(Error::NotConverged { iterations: 1, residual: 1.0 })
            } else {
                Ok((-l, ()))
            }
        });
        assert_eq!(ls.best.unwrap().1, 0.5);
        assert_eq!(ls.failed_trials.len(), 1);
        let none = line_search(0.5, 3, |_| Err::<(f64, ()), _>(Error::InvalidInput("x".into())));
        assert!(none.best.is_none() && !none.improves_on(0.0));
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        assert!(OptimizerConfig { rho: 1.0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { max_iters: 0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { tol: 0.0, ..Default::default() }.validate().is_err());
    }

    fn small_problem(loads: Loads, penalty: f64) -> Problem {
        let rect = Rect::new(0.0, 2.0, -0.5, 0.5).unwrap();
        let segs = [
            BoundarySegment::new(BoundaryLabel::SigmaD, Side::Left, -0.5, 0.5),
            BoundarySegment::new(BoundaryLabel::GammaN, Side::Right, -0.1, 0.1),
        ];
        let mesh = Arc::new(Mesh::build(rect, 20, 10, &segs).unwrap());
        Problem::new(Arc::new(FemSpace::new(mesh).unwrap()), Material::new(1.0, 8.0).unwrap(), loads, penalty)
    }

    fn g0(p: &Problem) -> ScalarField {
        use std::f64::consts::PI;
        ScalarField::from_fn(p.space.mesh(), |x, y| 0.1 - (4.0 * PI * x).sin() * (3.0 * PI * (y - 0.5)).sin())
    }

    #[test]
    fn unloaded_run_shrinks_volume() {
        let p = small_problem(Loads::default(), 0.5);
        let k = HeavisideKernel::smooth(0.01);
        let config = OptimizerConfig { max_iters: 8, ..Default::default() };
        let out = optimize(&p, &k, g0(&p), &config, |_| {}).unwrap();
        let h = &out.history;
        assert!(!h.is_empty());
        for pair in h.windows(2) {
            assert!(pair[1].cost < pair[0].cost);
            assert!(pair[1].volume < pair[0].volume);
        }
        assert!(out.final_cost() < h.last().unwrap().cost);
        assert_eq!(h.iter().filter(|r| r.stop_reason.is_some()).count(), 1);
        assert_eq!(h.last().unwrap().stop_reason, Some(out.stop_reason));
    }

    #[test]
    fn loaded_runs_are_monotone_and_deterministic() {
        let p = small_problem(Loads::new([0.0, 0.0], [0.0, -5.0]), 0.5);
        let k = HeavisideKernel::smooth(0.01);
        for direction in [
            DescentChoice::DirI,
            DescentChoice::DirII(SaturationR::default()),
            DescentChoice::DirIII { gamma: 1e-3 },
        ] {
            let config = OptimizerConfig { max_iters: 5, direction, ..Default::default() };
            let mut seen = 0;
            let a = optimize(&p, &k, g0(&p), &config, |v| {
                assert_eq!(v.record.iter, seen);
                seen += 1;
            })
            .unwrap();
            assert_eq!(seen, a.history.len());
            for r in &a.history {
                assert!(r.jprime_w < 0.0, "{direction:?}");
            }
            for pair in a.history.windows(2) {
                assert!(pair[1].cost <= pair[0].cost);
            }
            if a.stop_reason == StopReason::MaxIters {
                assert_eq!(a.history.len(), 5);
            }
            let b = optimize(&p, &k, g0(&p), &config, |_| {}).unwrap();
            assert_eq!(a.history, b.history);
            assert_eq!(a.g, b.g);
        }
    }

    #[test]
    fn grad_zero_stop_with_huge_tolerance() {
        let p = small_problem(Loads::new([0.0, 0.0], [0.0, -5.0]), 0.5);
        let k = HeavisideKernel::smooth(0.01);
        let config = OptimizerConfig { grad_tol: Some(1e30), ..Default::default() };
        let out = optimize(&p, &k, g0(&p), &config, |_| {}).unwrap();
        assert_eq!(out.stop_reason, StopReason::GradZero);
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.history[0].lambda, 0.0);
    }

    #[test]
    fn invalid_config_aborts() {
        let p = small_problem(Loads::default(), 0.5);
        let config = OptimizerConfig { rho: 2.0, ..Default::default() };
        let err = optimize(&p, &HeavisideKernel::smooth(0.01), g0(&p), &config, |_| {}).unwrap_err();
        assert!(err.history.is_empty());
        assert!(matches!(err.error, Error::InvalidInput(_)));
    }
}
