//! Particle-conserving ansatz circuits.
//!
//! Both ansätze are built from the two-qubit A-gate, which is the identity on
//! `|00⟩` and `|11⟩` and rotates the singly occupied pair.
//!
//! - **SP** acts on all `2n` qubits as a brickwork: each layer applies the A-gate
//!   to pairs `(0,1), (2,3), …` and then `(1,2), (3,4), …`. One layer has
//!   `2n - 1` gates, so `param_count = 2 · layers · (2n - 1)`.
//! - **SSP** runs that brickwork separately on the α lanes `0, 2, 4, …` and the β
//!   lanes `1, 3, 5, …`, then applies one phase gate `P(ξ1, ξ2, ξ3)` per spatial
//!   orbital. One layer has `2(n - 1)` A-gates and `n` phase gates, so
//!   `param_count = layers · (4(n - 1) + 3n)`.
//!
//! The flat parameter vector is all θ in gate order, then all φ, then all ξ.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinops::SpinSector;
use crate::statevector::{gates, Circuit, Gate, StateVector};

/// Standard deviation of the initial parameter distribution.
pub const INIT_STD: f64 = 0.3;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The A-gate in the basis `|00⟩, |01⟩, |10⟩, |11⟩`.
pub fn a_gate_matrix(theta: f64, phi: f64) -> DMatrix<Complex64> {
    let (s, co) = theta.sin_cos();
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    gates::from_rows(&[
        &[one, z, z, z],
        &[z, c(co, 0.0), -Complex64::from_polar(s, phi), z],
        &[z, Complex64::from_polar(s, -phi), c(co, 0.0), z],
        &[z, z, z, one],
    ])
}

fn cnot(control: usize, target: usize) -> Gate {
    Gate::controlled("cx", gates::x(), vec![target], vec![control]).expect("distinct qubits")
}

fn single(name: &'static str, m: DMatrix<Complex64>, q: usize) -> Gate {
    Gate::new(name, m, vec![q]).expect("single-qubit unitary")
}

/// Three-CNOT realisation of [`a_gate_matrix`] on qubits `(0, 1)`, equal up
/// to a global phase.
///
/// The core is `CX(1→0) · R · CX(0→1) · R† · CX(1→0)` with
/// `R = R_z(φ + π) R_y(π/2 - θ)` on qubit 1. On its own that sandwich gives the
/// A-gate variant with `-cos θ` on `|10⟩`; the S, S† and Z corrections on the
/// outer CNOTs map it onto the matrix above.
pub fn a_gate_decomposition(theta: f64, phi: f64) -> Circuit {
    let r = gates::rz(phi + PI) * gates::ry(FRAC_PI_2 - theta);
    let r_dag = r.adjoint();
    let s = gates::phase(FRAC_PI_2);
    let s_dag = gates::phase(-FRAC_PI_2);
    let mut circ = Circuit::new(2);
    for g in [
        single("sdg", s_dag.clone(), 0),
        cnot(1, 0),
        single("s", s, 0),
        single("sdg", s_dag, 1),
        single("r_dag", r_dag, 1),
        cnot(0, 1),
        single("r", r, 1),
        cnot(1, 0),
        single("z", gates::z(), 0),
    ] {
        circ.push(g).expect("two-qubit circuit");
    }
    circ
}

/// `diag(1, e^{iξ1}, e^{iξ2}, e^{i(ξ1+ξ2+ξ3)})`.
pub fn phase_gate_matrix(xi1: f64, xi2: f64, xi3: f64) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        c(1.0, 0.0),
        Complex64::from_polar(1.0, xi1),
        Complex64::from_polar(1.0, xi2),
        Complex64::from_polar(1.0, xi1 + xi2 + xi3),
    ]))
}

/// The phase gate as two single-qubit phases and one controlled phase on
/// `(first, second)`: `ξ1` lands on the second qubit, `ξ2` on the first.
pub fn phase_gate_circuit(xi: [f64; 3], first: usize, second: usize, n_qubits: usize) -> Result<Circuit> {
    let mut circ = Circuit::new(n_qubits);
    circ.push(Gate::new("p", gates::phase(xi[0]), vec![second])?)?;
    circ.push(Gate::new("p", gates::phase(xi[1]), vec![first])?)?;
    circ.push(Gate::controlled("cp", gates::phase(xi[2]), vec![second], vec![first])?)?;
    Ok(circ)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AnsatzKind {
    Sp,
    Ssp,
}

/// One gate of an ansatz layer, on absolute qubit indices.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Slot {
    A(usize, usize),
    P(usize, usize),
}

/// Adjacent-pair brickwork over `lanes`: even pairs then odd pairs.
fn brickwork(lanes: &[usize]) -> Vec<(usize, usize)> {
    let pairs = |start: usize| {
        (start..lanes.len().saturating_sub(1))
            .step_by(2)
            .map(|k| (lanes[k], lanes[k + 1]))
            .collect::<Vec<_>>()
    };
    let mut out = pairs(0);
    out.extend(pairs(1));
    out
}

fn layer_slots(kind: AnsatzKind, n_spatial: usize) -> Vec<Slot> {
    match kind {
        AnsatzKind::Sp => {
            let lanes: Vec<usize> = (0..2 * n_spatial).collect();
            brickwork(&lanes).into_iter().map(|(a, b)| Slot::A(a, b)).collect()
        }
        AnsatzKind::Ssp => {
            let alpha: Vec<usize> = (0..n_spatial).map(|i| 2 * i).collect();
            let beta: Vec<usize> = (0..n_spatial).map(|i| 2 * i + 1).collect();
            let mut slots: Vec<Slot> = brickwork(&alpha)
                .into_iter()
                .chain(brickwork(&beta))
                .map(|(a, b)| Slot::A(a, b))
                .collect();
            slots.extend((0..n_spatial).map(|i| Slot::P(2 * i, 2 * i + 1)));
            slots
        }
    }
}

fn a_gates_per_layer(kind: AnsatzKind, n_spatial: usize) -> usize {
    match kind {
        AnsatzKind::Sp => (2 * n_spatial).saturating_sub(1),
        AnsatzKind::Ssp => 2 * n_spatial.saturating_sub(1),
    }
}

fn p_gates_per_layer(kind: AnsatzKind, n_spatial: usize) -> usize {
    match kind {
        AnsatzKind::Sp => 0,
        AnsatzKind::Ssp => n_spatial,
    }
}

pub fn param_count(kind: AnsatzKind, n_spatial: usize, layers: usize) -> usize {
    layers * (2 * a_gates_per_layer(kind, n_spatial) + 3 * p_gates_per_layer(kind, n_spatial))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub kind: AnsatzKind,
    pub n_spatial: usize,
    pub layers: usize,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub xi: Vec<f64>,
}

impl AnsatzParams {
    pub fn zeros(kind: AnsatzKind, n_spatial: usize, layers: usize) -> Self {
        let n_a = layers * a_gates_per_layer(kind, n_spatial);
        let n_p = layers * p_gates_per_layer(kind, n_spatial);
        Self {
            kind,
            n_spatial,
            layers,
            theta: vec![0.0; n_a],
            phi: vec![0.0; n_a],
            xi: vec![0.0; 3 * n_p],
        }
    }

    pub fn from_flat(kind: AnsatzKind, n_spatial: usize, layers: usize, flat: &[f64]) -> Result<Self> {
        let expected = param_count(kind, n_spatial, layers);
        if flat.len() != expected {
            return Err(Error::arg(format!(
                "{kind:?} with {n_spatial} orbitals and {layers} layers takes {expected} parameters, got {}",
                flat.len()
            )));
        }
        let n_a = layers * a_gates_per_layer(kind, n_spatial);
        Ok(Self {
            kind,
            n_spatial,
            layers,
            theta: flat[..n_a].to_vec(),
            phi: flat[n_a..2 * n_a].to_vec(),
            xi: flat[2 * n_a..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.phi).chain(&self.xi).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.theta.len() + self.phi.len() + self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, kind: AnsatzKind) -> Result<()> {
        let n_a = self.layers * a_gates_per_layer(kind, self.n_spatial);
        let n_p = self.layers * p_gates_per_layer(kind, self.n_spatial);
        if self.kind != kind
            || self.theta.len() != n_a
            || self.phi.len() != n_a
            || self.xi.len() != 3 * n_p
        {
            return Err(Error::arg(format!(
                "parameters ({:?}, {}+{}+{}) do not fit a {kind:?} ansatz with {} orbitals and {} layers",
                self.kind,
                self.theta.len(),
                self.phi.len(),
                self.xi.len(),
                self.n_spatial,
                self.layers
            )));
        }
        Ok(())
    }

    /// Gates in application order, each with its angles.
    fn schedule(&self) -> impl Iterator<Item = (Slot, [f64; 3])> + '_ {
        let slots = layer_slots(self.kind, self.n_spatial);
        let mut ia = 0;
        let mut ip = 0;
        (0..self.layers).flat_map(move |_| slots.clone()).map(move |slot| match slot {
            Slot::A(..) => {
                let angles = [self.theta[ia], self.phi[ia], 0.0];
                ia += 1;
                (slot, angles)
            }
            Slot::P(..) => {
                let angles = [self.xi[3 * ip], self.xi[3 * ip + 1], self.xi[3 * ip + 2]];
                ip += 1;
                (slot, angles)
            }
        })
    }

    /// Applies the ansatz to the leading `2·n_spatial` qubits of `state`
    /// without materialising gate matrices.
    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        self.validate(self.kind)?;
        let n = state.n_qubits();
        if n < 2 * self.n_spatial {
            return Err(Error::arg(format!(
                "{}-qubit state is narrower than the {}-qubit ansatz",
                n,
                2 * self.n_spatial
            )));
        }
        let bit = |q: usize| 1usize << (n - 1 - q);
        let amps = state.amplitudes_mut();
        for (slot, ang) in self.schedule() {
            match slot {
                Slot::A(p, q) => apply_a(amps, bit(p), bit(q), ang[0], ang[1]),
                Slot::P(p, q) => apply_p(amps, bit(p), bit(q), ang),
            }
        }
        Ok(())
    }

    /// Value and flat-layout gradient of `⟨ψ(Θ)|K|ψ(Θ)⟩` for Hermitian `K`,
    /// by one forward and one reverse sweep. `k_apply` receives the prepared
    /// state and returns `(⟨ψ|K|ψ⟩, K|ψ⟩)`.
    pub fn gradient(
        &self,
        initial: &StateVector,
        k_apply: impl FnOnce(&StateVector) -> Result<(f64, StateVector)>,
    ) -> Result<(f64, Vec<f64>)> {
        let mut psi = initial.clone();
        self.apply(&mut psi)?;
        let (value, lambda) = k_apply(&psi)?;
        if lambda.n_qubits() != psi.n_qubits() {
            return Err(Error::arg("K|ψ⟩ has the wrong width"));
        }
        let n = psi.n_qubits();
        let bit = |q: usize| 1usize << (n - 1 - q);
        let n_a = self.theta.len();
        let mut grad = vec![0.0; self.len()];
        let schedule: Vec<(Slot, [f64; 3])> = self.schedule().collect();
        let (mut ia, mut ip) = (n_a, self.xi.len() / 3);
        let mut lam = lambda.into_amplitudes();
        let psi = psi.amplitudes_mut();
        for (slot, ang) in schedule.into_iter().rev() {
            match slot {
                Slot::A(p, q) => {
                    ia -= 1;
                    let (bp, bq) = (bit(p), bit(q));
                    apply_a(psi, bp, bq, -ang[0], ang[1]);
                    let (s, c) = ang[0].sin_cos();
                    let e = Complex64::from_polar(1.0, ang[1]);
                    let (mut g_theta, mut g_phi) = (0.0, 0.0);
                    for i in 0..psi.len() {
                        if i & bp == 0 && i & bq != 0 {
                            let j = i ^ bp ^ bq;
                            let (a01, a10) = (psi[i], psi[j]);
                            // rows of dA/dθ and dA/dφ on (|01⟩, |10⟩)
                            let dt = (-s * a01 - e * c * a10, e.conj() * c * a01 - s * a10);
                            let i_unit = Complex64::new(0.0, 1.0);
                            let dp = (-i_unit * e * s * a10, -i_unit * e.conj() * s * a01);
                            g_theta += (lam[i].conj() * dt.0 + lam[j].conj() * dt.1).re;
                            g_phi += (lam[i].conj() * dp.0 + lam[j].conj() * dp.1).re;
                        }
                    }
                    grad[ia] = 2.0 * g_theta;
                    grad[n_a + ia] = 2.0 * g_phi;
                    apply_a(&mut lam, bp, bq, -ang[0], ang[1]);
                }
                Slot::P(p, q) => {
                    ip -= 1;
                    let (bp, bq) = (bit(p), bit(q));
                    // d/dξ multiplies the affected amplitudes by i
                    let mut sums = [Complex64::new(0.0, 0.0); 3];
                    for (i, (l, a)) in lam.iter().zip(psi.iter()).enumerate() {
                        let w = l.conj() * a;
                        match (i & bp != 0, i & bq != 0) {
                            (false, true) => sums[0] += w,
                            (true, false) => sums[1] += w,
                            (true, true) => sums[2] += w,
                            (false, false) => {}
                        }
                    }
                    let base = 2 * n_a + 3 * ip;
                    grad[base] = -2.0 * (sums[0] + sums[2]).im;
                    grad[base + 1] = -2.0 * (sums[1] + sums[2]).im;
                    grad[base + 2] = -2.0 * sums[2].im;
                    let inv = [-ang[0], -ang[1], -ang[2]];
                    apply_p(psi, bp, bq, inv);
                    apply_p(&mut lam, bp, bq, inv);
                }
            }
        }
        Ok((value, grad))
    }
}

/// `A(θ, φ)` on the qubits with masks `bp`, `bq`.
fn apply_a(amps: &mut [Complex64], bp: usize, bq: usize, theta: f64, phi: f64) {
    let (s, co) = theta.sin_cos();
    let up = Complex64::from_polar(s, phi);
    let down = Complex64::from_polar(s, -phi);
    for i in 0..amps.len() {
        // visit each |..0_p..1_q..⟩, |..1_p..0_q..⟩ pair once
        if i & bp == 0 && i & bq != 0 {
            let j = i ^ bp ^ bq;
            let (a01, a10) = (amps[i], amps[j]);
            amps[i] = a01 * co - up * a10;
            amps[j] = down * a01 + a10 * co;
        }
    }
}

fn apply_p(amps: &mut [Complex64], bp: usize, bq: usize, xi: [f64; 3]) {
    let ph = [
        Complex64::from_polar(1.0, xi[0]),
        Complex64::from_polar(1.0, xi[1]),
        Complex64::from_polar(1.0, xi[0] + xi[1] + xi[2]),
    ];
    for (i, a) in amps.iter_mut().enumerate() {
        match (i & bp != 0, i & bq != 0) {
            (false, false) => {}
            (false, true) => *a *= ph[0],
            (true, false) => *a *= ph[1],
            (true, true) => *a *= ph[2],
        }
    }
}

fn build(kind: AnsatzKind, n_qubits: usize, params: &AnsatzParams) -> Result<Circuit> {
    params.validate(kind)?;
    if n_qubits < 2 * params.n_spatial {
        return Err(Error::arg(format!(
            "{n_qubits} qubits cannot hold {} spatial orbitals",
            params.n_spatial
        )));
    }
    let mut circ = Circuit::new(n_qubits);
    for (slot, ang) in params.schedule() {
        match slot {
            Slot::A(p, q) => circ.push(Gate::new("a", a_gate_matrix(ang[0], ang[1]), vec![p, q])?)?,
            Slot::P(p, q) => circ.push(Gate::new("pg", phase_gate_matrix(ang[0], ang[1], ang[2]), vec![p, q])?)?,
        }
    }
    Ok(circ)
}

/// SP brickwork on a register of `n_qubits` (the first `2·n_spatial` carry the ansatz).
pub fn build_sp(n_qubits: usize, params: &AnsatzParams) -> Result<Circuit> {
    build(AnsatzKind::Sp, n_qubits, params)
}

pub fn build_ssp(n_qubits: usize, params: &AnsatzParams) -> Result<Circuit> {
    build(AnsatzKind::Ssp, n_qubits, params)
}

pub fn build_circuit(n_qubits: usize, params: &AnsatzParams) -> Result<Circuit> {
    build(params.kind, n_qubits, params)
}

/// Draws every angle from `N(0, 0.3²)`.
pub fn init_params<R: Rng + ?Sized>(
    kind: AnsatzKind,
    n_spatial: usize,
    layers: usize,
    rng: &mut R,
) -> AnsatzParams {
    let normal = Normal::new(0.0, INIT_STD).expect("positive std");
    let flat: Vec<f64> = (0..param_count(kind, n_spatial, layers))
        .map(|_| normal.sample(rng))
        .collect();
    AnsatzParams::from_flat(kind, n_spatial, layers, &flat).expect("sized by param_count")
}

/// Occupation string filling the lowest α and β spin-orbitals.
pub fn reference_occupation(n_spatial: usize, sector: &SpinSector) -> Result<String> {
    sector.check_fits(n_spatial)?;
    Ok((0..2 * n_spatial)
        .map(|q| {
            let (orb, is_alpha) = (q / 2, q % 2 == 0);
            let filled = if is_alpha {
                orb < sector.n_alpha()
            } else {
                orb < sector.n_beta()
            };
            if filled {
                '1'
            } else {
                '0'
            }
        })
        .collect())
}

pub fn reference_state(n_spatial: usize, sector: &SpinSector) -> Result<StateVector> {
    let occ = reference_occupation(n_spatial, sector)?;
    StateVector::basis_state(2 * n_spatial, &occ)
}
