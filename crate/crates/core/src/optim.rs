//! Local minimizers for the variational cost.
//!
//! Every optimizer sees the cost through a budget-tracking wrapper, so the
//! evaluation limit is exact and the best point seen is always returned, even
//! when the limit cuts a solver off mid-iteration.

use std::cell::{Cell, RefCell};

use argmin::core::{CostFunction, Executor, Gradient, State, TerminationReason};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::neldermead::NelderMead;
use argmin::solver::quasinewton::LBFGS;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OptimizerSpec {
    /// Quasi-Newton. Takes the caller's analytic gradient when there is one and
    /// `gradient` allows it, central differences otherwise.
    Lbfgs {
        #[serde(default = "defaults::max_evals")]
        max_evals: usize,
        #[serde(default = "defaults::tol_cost")]
        tol_cost: f64,
        #[serde(default = "defaults::tol_grad")]
        tol_grad: f64,
        #[serde(default = "defaults::memory")]
        memory: usize,
        #[serde(default = "defaults::fd_step")]
        fd_step: f64,
        #[serde(default)]
        gradient: GradientSource,
    },
    /// Simplex search with dimension-adapted expansion and shrink factors.
    NelderMead {
        #[serde(default = "defaults::max_evals")]
        max_evals: usize,
        #[serde(default = "defaults::tol_cost")]
        tol_cost: f64,
        #[serde(default = "defaults::simplex_step")]
        initial_step: f64,
    },
    /// Simultaneous-perturbation stochastic approximation, for noisy costs.
    Spsa {
        #[serde(default = "defaults::max_evals")]
        max_evals: usize,
        #[serde(default = "defaults::spsa_a")]
        a: f64,
        #[serde(default = "defaults::spsa_c")]
        c: f64,
        #[serde(default = "defaults::spsa_alpha")]
        alpha: f64,
        #[serde(default = "defaults::spsa_gamma")]
        gamma: f64,
    },
}

/// Where L-BFGS takes its gradients from.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientSource {
    /// The caller's analytic gradient when it supplies one, else differences.
    #[default]
    Exact,
    /// Central differences with `fd_step`, `2n` evaluations each.
    FiniteDifference,
}

mod defaults {
    pub fn max_evals() -> usize {
        5000
    }
    pub fn tol_cost() -> f64 {
        1e-8
    }
    pub fn tol_grad() -> f64 {
        1e-6
    }
    pub fn memory() -> usize {
        10
    }
    pub fn fd_step() -> f64 {
        1e-5
    }
    pub fn simplex_step() -> f64 {
        0.1
    }
    pub fn spsa_a() -> f64 {
        0.1
    }
    pub fn spsa_c() -> f64 {
        0.1
    }
    pub fn spsa_alpha() -> f64 {
        0.602
    }
    pub fn spsa_gamma() -> f64 {
        0.101
    }
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self::lbfgs(defaults::max_evals())
    }
}

impl OptimizerSpec {
    pub fn lbfgs(max_evals: usize) -> Self {
        OptimizerSpec::Lbfgs {
            max_evals,
            tol_cost: defaults::tol_cost(),
            tol_grad: defaults::tol_grad(),
            memory: defaults::memory(),
            fd_step: defaults::fd_step(),
            gradient: GradientSource::Exact,
        }
    }

    pub fn nelder_mead(max_evals: usize) -> Self {
        OptimizerSpec::NelderMead {
            max_evals,
            tol_cost: defaults::tol_cost(),
            initial_step: defaults::simplex_step(),
        }
    }

    pub fn spsa(max_evals: usize) -> Self {
        OptimizerSpec::Spsa {
            max_evals,
            a: defaults::spsa_a(),
            c: defaults::spsa_c(),
            alpha: defaults::spsa_alpha(),
            gamma: defaults::spsa_gamma(),
        }
    }

    pub fn max_evals(&self) -> usize {
        match *self {
            OptimizerSpec::Lbfgs { max_evals, .. }
            | OptimizerSpec::NelderMead { max_evals, .. }
            | OptimizerSpec::Spsa { max_evals, .. } => max_evals,
        }
    }

    pub fn with_max_evals(mut self, n: usize) -> Self {
        match &mut self {
            OptimizerSpec::Lbfgs { max_evals, .. }
            | OptimizerSpec::NelderMead { max_evals, .. }
            | OptimizerSpec::Spsa { max_evals, .. } => *max_evals = n,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_evals() == 0 {
            return Err(Error::arg("optimizer needs a positive evaluation budget"));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::arg(format!("optimizer setting `{name}` must be positive, got {v}")))
            }
        };
        match *self {
            OptimizerSpec::Lbfgs {
                tol_grad,
                memory,
                fd_step,
                ..
            } => {
                positive("tol_grad", tol_grad)?;
                positive("fd_step", fd_step)?;
                if memory == 0 {
                    return Err(Error::arg("L-BFGS memory must be at least 1"));
                }
            }
            OptimizerSpec::NelderMead { initial_step, .. } => positive("initial_step", initial_step)?,
            OptimizerSpec::Spsa { a, c, .. } => {
                positive("a", a)?;
                positive("c", c)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub n_evals: usize,
    /// The solver met its own stopping rule before the budget ran out.
    pub converged: bool,
}

type GradFn<'a> = &'a mut dyn FnMut(&[f64]) -> (f64, Vec<f64>);

struct Tracked<'a> {
    f: RefCell<&'a mut dyn FnMut(&[f64]) -> f64>,
    grad: Option<RefCell<GradFn<'a>>>,
    evals: Cell<usize>,
    max_evals: usize,
    best: RefCell<(Vec<f64>, f64)>,
    fd_step: f64,
}

const BUDGET: &str = "evaluation budget exhausted";

impl<'a> Tracked<'a> {
    fn new(f: &'a mut dyn FnMut(&[f64]) -> f64, max_evals: usize, fd_step: f64) -> Self {
        Self {
            f: RefCell::new(f),
            grad: None,
            evals: Cell::new(0),
            max_evals,
            best: RefCell::new((Vec::new(), f64::INFINITY)),
            fd_step,
        }
    }

    fn eval(&self, x: &[f64]) -> std::result::Result<f64, argmin::core::Error> {
        if self.evals.get() >= self.max_evals {
            return Err(argmin::core::Error::msg(BUDGET));
        }
        self.evals.set(self.evals.get() + 1);
        let v = (self.f.borrow_mut())(x);
        let mut best = self.best.borrow_mut();
        if v < best.1 || best.0.is_empty() {
            *best = (x.to_vec(), v);
        }
        Ok(v)
    }

    /// One analytic gradient call, counted as one evaluation.
    fn exact_gradient(&self, g: &RefCell<GradFn<'a>>, x: &[f64]) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        if self.evals.get() >= self.max_evals {
            return Err(argmin::core::Error::msg(BUDGET));
        }
        self.evals.set(self.evals.get() + 1);
        let (v, grad) = (g.borrow_mut())(x);
        let mut best = self.best.borrow_mut();
        if v < best.1 || best.0.is_empty() {
            *best = (x.to_vec(), v);
        }
        Ok(grad)
    }

    fn fd_gradient(&self, p: &[f64]) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let h = self.fd_step;
        let mut x = p.to_vec();
        let mut g = vec![0.0; p.len()];
        for i in 0..p.len() {
            x[i] = p[i] + h;
            let up = self.eval(&x)?;
            x[i] = p[i] - h;
            let down = self.eval(&x)?;
            x[i] = p[i];
            g[i] = (up - down) / (2.0 * h);
        }
        Ok(g)
    }

    fn finish(self, converged: bool) -> OptResult {
        let (x, value) = self.best.into_inner();
        OptResult {
            x,
            value,
            n_evals: self.evals.get(),
            converged,
        }
    }
}

fn solver_converged(reason: Option<&TerminationReason>) -> bool {
    matches!(reason, Some(TerminationReason::SolverConverged))
}

fn run_result(
    outcome: std::result::Result<bool, argmin::core::Error>,
) -> Result<bool> {
    match outcome {
        Ok(c) => Ok(c),
        Err(e) if e.to_string() == BUDGET => Ok(false),
        Err(e) => Err(Error::InvalidArgument(format!("optimizer failed: {e}"))),
    }
}

/// Minimises `f` from `x0`. `rng` drives the stochastic optimizers only.
pub fn minimize<R: Rng + ?Sized>(
    spec: &OptimizerSpec,
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    rng: &mut R,
) -> Result<OptResult> {
    minimize_with_gradient(spec, f, None, x0, rng)
}

/// As [`minimize`], with an optional `x -> (f(x), ∇f(x))` used by L-BFGS
/// when its spec asks for exact gradients. Each call counts as one evaluation.
pub fn minimize_with_gradient<'a, R: Rng + ?Sized>(
    spec: &OptimizerSpec,
    f: &'a mut dyn FnMut(&[f64]) -> f64,
    grad: Option<&'a mut dyn FnMut(&[f64]) -> (f64, Vec<f64>)>,
    x0: &[f64],
    rng: &mut R,
) -> Result<OptResult> {
    spec.validate()?;
    let n = x0.len();
    if n == 0 {
        let tracked = Tracked::new(f, 1, 1.0);
        tracked
            .eval(x0)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        return Ok(tracked.finish(true));
    }
    match *spec {
        OptimizerSpec::Lbfgs {
            max_evals,
            tol_cost,
            tol_grad,
            memory,
            fd_step,
            gradient,
        } => {
            let mut tracked = Tracked::new(f, max_evals, fd_step);
            if gradient == GradientSource::Exact {
                tracked.grad = grad.map(RefCell::new);
            }
            let solver = LBFGS::new(MoreThuenteLineSearch::new(), memory)
                .with_tolerance_grad(tol_grad)
                .and_then(|s| s.with_tolerance_cost(tol_cost))
                .map_err(|e| Error::arg(e.to_string()))?;
            let outcome = Executor::new(&tracked, solver)
                .configure(|s| s.param(x0.to_vec()).max_iters(u64::MAX))
                .timer(false)
                .run()
                .map(|r| solver_converged(r.state().get_termination_reason()));
            let converged = run_result(outcome)?;
            Ok(tracked.finish(converged))
        }
        OptimizerSpec::NelderMead {
            max_evals,
            tol_cost,
            initial_step,
        } => {
            let tracked = Tracked::new(f, max_evals, 1.0);
            let mut simplex = vec![x0.to_vec()];
            for i in 0..n {
                let mut v = x0.to_vec();
                v[i] += initial_step;
                simplex.push(v);
            }
            let dim = n as f64;
            let solver = NelderMead::new(simplex)
                .with_sd_tolerance(tol_cost)
                .and_then(|s| s.with_gamma(1.0 + 2.0 / dim))
                .and_then(|s| s.with_sigma(if n > 1 { 1.0 - 1.0 / dim } else { 0.5 }))
                .map_err(|e| Error::arg(e.to_string()))?;
            let outcome = Executor::new(&tracked, solver)
                .configure(|s| s.max_iters(u64::MAX))
                .timer(false)
                .run()
                .map(|r| solver_converged(r.state().get_termination_reason()));
            let converged = run_result(outcome)?;
            Ok(tracked.finish(converged))
        }
        OptimizerSpec::Spsa {
            max_evals,
            a,
            c,
            alpha,
            gamma,
        } => {
            let tracked = Tracked::new(f, max_evals, 1.0);
            spsa(&tracked, x0, a, c, alpha, gamma, rng);
            Ok(tracked.finish(false))
        }
    }
}

impl CostFunction for &Tracked<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        self.eval(p)
    }
}

impl Gradient for &Tracked<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, p: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        match &self.grad {
            Some(g) => self.exact_gradient(g, p),
            None => self.fd_gradient(p),
        }
    }
}

/// Standard gain sequences `a_k = a / (k + 1 + A)^α`, `c_k = c / (k + 1)^γ`
/// with `A` a tenth of the iteration budget.
fn spsa<R: Rng + ?Sized>(
    t: &Tracked<'_>,
    x0: &[f64],
    a: f64,
    c: f64,
    alpha: f64,
    gamma: f64,
    rng: &mut R,
) {
    let iters = t.max_evals.saturating_sub(1) / 2;
    let stability = iters as f64 / 10.0;
    let mut x = x0.to_vec();
    if t.eval(&x).is_err() {
        return;
    }
    for k in 0..iters {
        let ak = a / (k as f64 + 1.0 + stability).powf(alpha);
        let ck = c / (k as f64 + 1.0).powf(gamma);
        let delta: Vec<f64> = (0..x.len())
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let plus: Vec<f64> = x.iter().zip(&delta).map(|(xi, d)| xi + ck * d).collect();
        let minus: Vec<f64> = x.iter().zip(&delta).map(|(xi, d)| xi - ck * d).collect();
        let (Ok(fp), Ok(fm)) = (t.eval(&plus), t.eval(&minus)) else {
            return;
        };
        let scale = (fp - fm) / (2.0 * ck);
        for (xi, d) in x.iter_mut().zip(&delta) {
            *xi -= ak * scale * d;
        }
    }
    let _ = t.eval(&x);
}
