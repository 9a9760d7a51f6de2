//! Sequential deflation: each state minimises its energy plus overlap
//! penalties against every state already converged.
//!
//! Three methods share one driver. `VQD/SP` and `VQD/SSP` minimise the plain
//! energy with the SP or SSP ansatz. `sfVQD/SSP` screens the SSP state with
//! the ancilla register and minimises the extended Hamiltonian instead, so
//! spin-invalid components are pushed up in energy.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{init_params, reference_state, AnsatzKind, AnsatzParams};
use crate::error::{Error, Result};
use crate::optim::{minimize_with_gradient, OptimizerSpec};
use crate::pauli::{CompiledPauliSum, PauliSum};
use crate::screen::{resolve_blocks, ExtendedHamiltonian, Screen};
use crate::spinops::{s_squared, SpinSector};
use crate::statevector::{inner_amps, sample_index, StateVector};
use crate::Complex64;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "VQD/SP")]
    VqdSp,
    #[serde(rename = "VQD/SSP")]
    VqdSsp,
    #[serde(rename = "sfVQD/SSP")]
    SfVqdSsp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::VqdSp, Method::VqdSsp, Method::SfVqdSsp];

    pub fn ansatz(self) -> AnsatzKind {
        match self {
            Method::VqdSp => AnsatzKind::Sp,
            Method::VqdSsp | Method::SfVqdSsp => AnsatzKind::Ssp,
        }
    }

    pub fn screened(self) -> bool {
        self == Method::SfVqdSsp
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::VqdSp => "VQD/SP",
            Method::VqdSsp => "VQD/SSP",
            Method::SfVqdSsp => "sfVQD/SSP",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::arg(format!("unknown method `{s}` (expected VQD/SP, VQD/SSP or sfVQD/SSP)")))
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Statevector,
    Shot,
}

/// Which state the overlap penalties are taken against.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapMode {
    /// `|⟨ψ_j|ψ(Θ)⟩|²` on the system register before screening.
    #[default]
    PreScreen,
    /// `⟨Ψ(Θ)|(|ψ_j⟩⟨ψ_j| ⊗ I)|Ψ(Θ)⟩` on the screened register.
    PostScreen,
}

#[derive(Clone, Debug)]
pub struct VqdConfig {
    pub method: Method,
    pub layers: usize,
    pub restarts: usize,
    pub n_states: usize,
    pub sector: SpinSector,
    pub mode: Mode,
    pub n_shot: usize,
    pub c_penalty: f64,
    pub optimizer: OptimizerSpec,
    pub overlap_mode: OverlapMode,
    /// Largest pairwise overlap recorded as orthogonal; reported, not enforced.
    pub ortho_tol: f64,
    pub seed: u64,
}

impl VqdConfig {
    pub fn new(method: Method, sector: SpinSector) -> Self {
        Self {
            method,
            layers: 6,
            restarts: 10,
            n_states: 1,
            sector,
            mode: Mode::Statevector,
            n_shot: 1000,
            c_penalty: 0.0,
            optimizer: OptimizerSpec::default(),
            overlap_mode: OverlapMode::PreScreen,
            ortho_tol: 1e-2,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::arg("layers must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::arg("restarts must be at least 1"));
        }
        if self.mode == Mode::Shot && self.n_shot == 0 {
            return Err(Error::arg("shot mode needs n_shot >= 1"));
        }
        if !(self.c_penalty < 1.0) {
            return Err(Error::InvalidPenalty(self.c_penalty));
        }
        self.optimizer.validate()
    }
}

/// Converged states and their penalty weights.
#[derive(Clone, Debug, Default)]
pub struct DeflationStack {
    states: Vec<StateVector>,
    weights: Vec<f64>,
}

impl DeflationStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, state: StateVector, weight: f64) {
        self.states.push(state);
        self.weights.push(weight);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest `|⟨ψ_i|ψ_j⟩|` over distinct pairs.
    pub fn max_overlap(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.states.len() {
            for j in 0..i {
                worst = worst.max(inner_amps(self.states[i].amplitudes(), self.states[j].amplitudes()).norm());
            }
        }
        worst
    }
}

/// Shot-mode cost with its bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotCost {
    pub value: f64,
    pub aborted: bool,
    pub ancilla_measurements: u64,
}

/// Everything fixed for one fixture and method: compiled operators, the
/// screen and the reference state.
#[derive(Clone, Debug)]
pub struct VqdProblem {
    h: PauliSum,
    compiled: CompiledPauliSum,
    terms: Vec<(f64, CompiledPauliSum)>,
    identity_coefficient: f64,
    s2: PauliSum,
    n_spatial: usize,
    method: Method,
    layers: usize,
    reference: StateVector,
    screen: Option<(Screen, ExtendedHamiltonian)>,
    overlap_mode: OverlapMode,
}

impl VqdProblem {
    pub fn new(h: &PauliSum, n_spatial: usize, config: &VqdConfig) -> Result<Self> {
        config.validate()?;
        if h.n_qubits() != 2 * n_spatial {
            return Err(Error::arg(format!(
                "{}-qubit Hamiltonian for {n_spatial} spatial orbitals",
                h.n_qubits()
            )));
        }
        let reference = reference_state(n_spatial, &config.sector)?;
        let screen = if config.method.screened() {
            let screen = Screen::for_sector(n_spatial, &config.sector)?;
            let ext = ExtendedHamiltonian::new(h.clone(), &config.sector, screen.n_anc(), config.c_penalty)?;
            Some((screen, ext))
        } else {
            None
        };
        let terms = h
            .terms()
            .iter()
            .filter(|t| !t.string.is_identity())
            .map(|t| {
                let single = PauliSum::from_terms(h.n_qubits(), [(1.0, t.string)]).expect("valid term");
                (t.coefficient, CompiledPauliSum::new(&single))
            })
            .collect();
        Ok(Self {
            compiled: CompiledPauliSum::new(h),
            terms,
            identity_coefficient: h.identity_coefficient(),
            s2: s_squared(n_spatial)?,
            h: h.clone(),
            n_spatial,
            method: config.method,
            layers: config.layers,
            reference,
            screen,
            overlap_mode: config.overlap_mode,
        })
    }

    pub fn hamiltonian(&self) -> &PauliSum {
        &self.h
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    pub fn n_params(&self) -> usize {
        crate::ansatz::param_count(self.method.ansatz(), self.n_spatial, self.layers)
    }

    /// Ancillas allocated by the method (zero when unscreened).
    pub fn n_ancillas(&self) -> usize {
        self.screen.as_ref().map_or(0, |(s, _)| s.n_anc())
    }

    pub fn screen(&self) -> Option<&Screen> {
        self.screen.as_ref().map(|(s, _)| s)
    }

    pub fn params(&self, flat: &[f64]) -> Result<AnsatzParams> {
        AnsatzParams::from_flat(self.method.ansatz(), self.n_spatial, self.layers, flat)
    }

    /// `|ψ(Θ)⟩` on the system register.
    pub fn prepare(&self, flat: &[f64]) -> Result<StateVector> {
        let mut psi = self.reference.clone();
        self.params(flat)?.apply(&mut psi)?;
        Ok(psi)
    }

    pub fn energy(&self, state: &StateVector) -> f64 {
        self.compiled.expectation_amps(state.amplitudes())
    }

    pub fn s_squared(&self, state: &StateVector) -> Result<f64> {
        self.s2.expectation(state)
    }

    /// Weighted overlap penalty and the number of overlap terms evaluated.
    fn overlap_penalty(&self, psi: &StateVector, screened: Option<&StateVector>, stack: &DeflationStack) -> f64 {
        let mut total = 0.0;
        for (phi, c) in stack.states.iter().zip(&stack.weights) {
            let ov = match (self.overlap_mode, screened, &self.screen) {
                (OverlapMode::PostScreen, Some(big), Some((screen, _))) => {
                    let n_anc = screen.n_anc();
                    (0..1usize << n_anc)
                        .map(|a| {
                            phi.amplitudes()
                                .iter()
                                .enumerate()
                                .map(|(s, p)| p.conj() * big.amplitudes()[(s << n_anc) | a])
                                .sum::<num_complex::Complex64>()
                                .norm_sqr()
                        })
                        .sum()
                }
                _ => inner_amps(phi.amplitudes(), psi.amplitudes()).norm_sqr(),
            };
            total += c * ov;
        }
        total
    }

    /// Statevector cost: `⟨H_ext⟩` (or `⟨H⟩` unscreened) plus overlap penalties.
    pub fn cost_statevector(&self, flat: &[f64], stack: &DeflationStack) -> Result<f64> {
        let psi = self.prepare(flat)?;
        Ok(match &self.screen {
            Some((screen, ext)) => {
                let big = screen.apply(&psi)?;
                ext.expectation(&big)? + self.overlap_penalty(&psi, Some(&big), stack)
            }
            None => self.energy(&psi) + self.overlap_penalty(&psi, None, stack),
        })
    }

    /// `K|ψ⟩` for the quadratic form whose expectation is the statevector cost.
    fn cost_operator(&self, psi: &StateVector, stack: &DeflationStack) -> Result<(f64, StateVector)> {
        let (value, mut k_psi) = match &self.screen {
            Some((screen, ext)) => {
                let big = screen.apply(psi)?;
                let mut lam = ext.apply(&big)?;
                let mut value = inner_amps(big.amplitudes(), lam.amplitudes()).re;
                if self.overlap_mode == OverlapMode::PostScreen {
                    let n_anc = screen.n_anc();
                    let lam_amps = lam.amplitudes_mut();
                    for (phi, c) in stack.states.iter().zip(&stack.weights) {
                        for a in 0..1usize << n_anc {
                            let ov: Complex64 = phi
                                .amplitudes()
                                .iter()
                                .enumerate()
                                .map(|(s, p)| p.conj() * big.amplitudes()[(s << n_anc) | a])
                                .sum();
                            value += c * ov.norm_sqr();
                            for (s, p) in phi.amplitudes().iter().enumerate() {
                                lam_amps[(s << n_anc) | a] += p * ov * *c;
                            }
                        }
                    }
                }
                (value, screen.adjoint(&lam)?)
            }
            None => {
                let amps = self.compiled.apply_amps(psi.amplitudes());
                let value = inner_amps(psi.amplitudes(), &amps).re;
                (value, StateVector::from_amplitudes(psi.n_qubits(), amps)?)
            }
        };
        let mut value = value;
        if self.screen.is_none() || self.overlap_mode == OverlapMode::PreScreen {
            let out = k_psi.amplitudes_mut();
            for (phi, c) in stack.states.iter().zip(&stack.weights) {
                let ov = inner_amps(phi.amplitudes(), psi.amplitudes());
                value += c * ov.norm_sqr();
                for (o, p) in out.iter_mut().zip(phi.amplitudes()) {
                    *o += p * ov * *c;
                }
            }
        }
        Ok((value, k_psi))
    }

    /// Statevector cost and its exact gradient in the flat parameter layout.
    pub fn cost_gradient(&self, flat: &[f64], stack: &DeflationStack) -> Result<(f64, Vec<f64>)> {
        self.params(flat)?
            .gradient(&self.reference, |psi| self.cost_operator(psi, stack))
    }

    /// Shot-based cost. Each Pauli term is estimated from `n_shot` samples; in
    /// screened mode every sample first reads the ancillas, and any reading
    /// outside the target spin ends the evaluation with `‖H‖₁` in place of the
    /// energy. Overlap penalties are exact.
    pub fn cost_shot<R: Rng + ?Sized>(
        &self,
        flat: &[f64],
        stack: &DeflationStack,
        n_shot: usize,
        rng: &mut R,
    ) -> Result<ShotCost> {
        let psi = self.prepare(flat)?;
        self.cost_shot_state(&psi, stack, n_shot, rng)
    }

    /// [`Self::cost_shot`] for an already prepared system state.
    pub fn cost_shot_state<R: Rng + ?Sized>(
        &self,
        psi: &StateVector,
        stack: &DeflationStack,
        n_shot: usize,
        rng: &mut R,
    ) -> Result<ShotCost> {
        if n_shot == 0 {
            return Err(Error::arg("n_shot must be at least 1"));
        }
        if psi.n_qubits() != self.h.n_qubits() {
            return Err(Error::arg(format!(
                "{}-qubit state for a {}-qubit Hamiltonian",
                psi.n_qubits(),
                self.h.n_qubits()
            )));
        }
        let (screened, blocks) = match &self.screen {
            Some((screen, _)) => {
                let big = screen.apply(psi)?;
                (Some(big), Some(screen.n_anc()))
            }
            None => (None, None),
        };
        let penalty = self.overlap_penalty(psi, screened.as_ref(), stack);
        let mut measurements = 0u64;
        let mut energy = self.identity_coefficient;
        match (blocks, &screened, &self.screen) {
            (Some(n_anc), Some(big), Some((_, ext))) => {
                let probs: Vec<f64> = resolve_blocks(big, n_anc, &self.compiled)
                    .into_iter()
                    .map(|(p, _)| p)
                    .collect();
                // conditional ⟨P⟩ per ancilla block, filled on first use
                let mut cache: Vec<Vec<Option<f64>>> = vec![vec![None; 1 << n_anc]; self.terms.len()];
                for (k, (c, term)) in self.terms.iter().enumerate() {
                    let mut sum = 0.0;
                    for _ in 0..n_shot {
                        let a = sample_index(&probs, rng);
                        measurements += 1;
                        if !ext.is_valid(a) {
                            return Ok(ShotCost {
                                value: ext.norm_bound() + penalty,
                                aborted: true,
                                ancilla_measurements: measurements,
                            });
                        }
                        let mean = *cache[k][a].get_or_insert_with(|| {
                            let block = resolve_single(big, n_anc, a, term);
                            block.1 / block.0
                        });
                        sum += sample_sign(mean, rng);
                    }
                    energy += c * sum / n_shot as f64;
                }
            }
            _ => {
                for (c, term) in &self.terms {
                    let mean = term.expectation_amps(psi.amplitudes());
                    let sum: f64 = (0..n_shot).map(|_| sample_sign(mean, rng)).sum();
                    energy += c * sum / n_shot as f64;
                }
            }
        }
        Ok(ShotCost {
            value: energy + penalty,
            aborted: false,
            ancilla_measurements: measurements,
        })
    }
}

fn resolve_single(big: &StateVector, n_anc: usize, a: usize, op: &CompiledPauliSum) -> (f64, f64) {
    let block = big.trailing_block(n_anc, a).expect("ancilla value in range");
    let p = block.norm_sqr();
    (p, op.expectation_amps(block.amplitudes()))
}

/// One ±1 outcome with mean `mean`.
fn sample_sign<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    let p_plus = (0.5 * (1.0 + mean)).clamp(0.0, 1.0);
    if rng.random::<f64>() < p_plus {
        1.0
    } else {
        -1.0
    }
}

/// One converged state.
#[derive(Clone, Debug)]
pub struct StateResult {
    pub index: usize,
    /// `⟨ψ|H|ψ⟩` of the selected restart's system state.
    pub energy: f64,
    /// Final cost (energy or `⟨H_ext⟩`, plus penalties) of the selected restart.
    pub cost: f64,
    pub params: Vec<f64>,
    pub state: StateVector,
    pub s_squared: f64,
    /// Overlap terms evaluated for this state, summed over restarts.
    pub overlap_checks: u64,
    pub restart_costs: Vec<f64>,
    pub selected_restart: usize,
    pub converged: bool,
    pub n_evals: usize,
}

#[derive(Clone, Debug)]
pub struct VqdResult {
    pub method: Method,
    pub states: Vec<StateResult>,
    /// Running total of `overlap_checks` through each state.
    pub cumulative_overlap_checks: Vec<u64>,
    /// Penalty weight used for every state after the ground state.
    pub overlap_weight: f64,
    pub max_overlap: f64,
    /// Indices whose energy fell below the previous state's by more than 1e-6.
    pub ordering_violations: Vec<usize>,
}

impl VqdResult {
    pub fn all_converged(&self) -> bool {
        self.states.iter().all(|s| s.converged)
    }

    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.energy).collect()
    }
}

/// Per-restart generator: the master seed with a stream per (state, restart).
pub fn restart_rng(seed: u64, state: usize, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((state as u64) << 32) | restart as u64);
    rng
}

struct RestartOutcome {
    cost: f64,
    params: Vec<f64>,
    converged: bool,
    n_evals: usize,
    overlap_checks: u64,
}

/// Optimises state `k = stack.len()` with `config.restarts` fresh starts and
/// keeps the restart with the lowest final cost.
pub fn optimize_state(problem: &VqdProblem, config: &VqdConfig, stack: &DeflationStack) -> Result<StateResult> {
    config.validate()?;
    let k = stack.len();
    let outcomes: Vec<Result<RestartOutcome>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(config.seed, k, r);
            let x0 = init_params(problem.method.ansatz(), problem.n_spatial, problem.layers, &mut rng).to_flat();
            let checks = Cell::new(0u64);
            let failure = RefCell::new(None);
            let mut shot_rng = rng.clone();
            shot_rng.set_stream(rng.get_stream() | 1 << 63);
            let record = |e: Error| {
                failure.borrow_mut().get_or_insert(e);
            };
            let mut f = |x: &[f64]| {
                checks.set(checks.get() + stack.len() as u64);
                let v = match config.mode {
                    Mode::Statevector => problem.cost_statevector(x, stack),
                    Mode::Shot => problem.cost_shot(x, stack, config.n_shot, &mut shot_rng).map(|c| c.value),
                };
                v.unwrap_or_else(|e| {
                    record(e);
                    f64::INFINITY
                })
            };
            let mut g = |x: &[f64]| {
                checks.set(checks.get() + stack.len() as u64);
                problem.cost_gradient(x, stack).unwrap_or_else(|e| {
                    record(e);
                    (f64::INFINITY, vec![0.0; x.len()])
                })
            };
            let grad: Option<&mut dyn FnMut(&[f64]) -> (f64, Vec<f64>)> = match config.mode {
                Mode::Statevector => Some(&mut g),
                Mode::Shot => None,
            };
            let res = minimize_with_gradient(&config.optimizer, &mut f, grad, &x0, &mut rng)?;
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            let checks = checks.get();
            // shot-mode costs are noisy; rank restarts on the exact cost
            let cost = match config.mode {
                Mode::Statevector => res.value,
                Mode::Shot => problem.cost_statevector(&res.x, stack)?,
            };
            Ok(RestartOutcome {
                cost,
                params: res.x,
                converged: res.converged,
                n_evals: res.n_evals,
                overlap_checks: checks,
            })
        })
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let selected = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let best = &outcomes[selected];
    let state = problem.prepare(&best.params)?;
    Ok(StateResult {
        index: k,
        energy: problem.energy(&state),
        cost: best.cost,
        params: best.params.clone(),
        s_squared: problem.s_squared(&state)?,
        state,
        overlap_checks: outcomes.iter().map(|o| o.overlap_checks).sum(),
        restart_costs: outcomes.iter().map(|o| o.cost).collect(),
        selected_restart: selected,
        converged: best.converged,
        n_evals: outcomes.iter().map(|o| o.n_evals).sum(),
    })
}

/// Converges `config.n_states` states in order. After the ground state, the
/// overlap weight is fixed at `|E_0|`.
pub fn run_deflation(h: &PauliSum, n_spatial: usize, config: &VqdConfig) -> Result<VqdResult> {
    let problem = VqdProblem::new(h, n_spatial, config)?;
    run_deflation_with(&problem, config, |_| {})
}

/// As [`run_deflation`], calling `on_state` after each state converges.
pub fn run_deflation_with(
    problem: &VqdProblem,
    config: &VqdConfig,
    mut on_state: impl FnMut(&StateResult),
) -> Result<VqdResult> {
    let mut stack = DeflationStack::new();
    let mut states: Vec<StateResult> = Vec::with_capacity(config.n_states);
    let mut weight = 0.0;
    for k in 0..config.n_states {
        let res = optimize_state(problem, config, &stack)?;
        if k == 0 {
            weight = res.energy.abs();
        }
        stack.push(res.state.clone(), weight);
        on_state(&res);
        states.push(res);
    }
    let cumulative_overlap_checks = states
        .iter()
        .scan(0u64, |acc, s| {
            *acc += s.overlap_checks;
            Some(*acc)
        })
        .collect();
    let ordering_violations = states
        .windows(2)
        .filter(|w| w[1].energy < w[0].energy - 1e-6)
        .map(|w| w[1].index)
        .collect();
    Ok(VqdResult {
        method: problem.method,
        states,
        cumulative_overlap_checks,
        overlap_weight: weight,
        max_overlap: stack.max_overlap(),
        ordering_violations,
    })
}

/// `⟨S²⟩` of a system-register state.
pub fn s_squared_diagnostic(state: &StateVector) -> Result<f64> {
    let n = state.n_qubits();
    if !n.is_multiple_of(2) || n == 0 {
        return Err(Error::arg(format!("{n} qubits is not a spin-orbital register")));
    }
    s_squared(n / 2)?.expectation(state)
}
