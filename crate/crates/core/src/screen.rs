//! The ancilla phase-estimation spin screen.
//!
//! Ancillas follow the system qubits, the first ancilla being the most
//! significant bit of the readout. After Hadamards, the ancilla of weight
//! `2^b` controls `exp(iθ_b S_x)` with `θ_b = 2π·2^b / 2^{n_anc}`, built as one
//! controlled A-gate per spatial orbital. The inverse QFT then leaves
//! `|m_x mod 2^{n_anc}⟩`, read back as a two's-complement integer.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::ansatz::a_gate_matrix;
use crate::error::{Error, Result};
use crate::pauli::{CompiledPauliSum, PauliSum};
use crate::spinops::{Axis, SpinSector};
use crate::statevector::{gates, parse_bits, Circuit, Gate, StateVector};

/// Smallest register that holds every `m_x ∈ [-S_max, S_max]`, where
/// `S_max = min(n_elec, 2n - n_elec) / 2`.
pub fn required_ancillas(n_spatial: usize, n_elec: usize) -> Result<usize> {
    if !n_elec.is_multiple_of(2) {
        return Err(Error::UnsupportedSector(format!(
            "odd electron count {n_elec} (half-integer spin)"
        )));
    }
    if n_elec == 0 || n_elec > 2 * n_spatial {
        return Err(Error::arg(format!(
            "{n_elec} electrons in {n_spatial} spatial orbitals"
        )));
    }
    let s_max = n_elec.min(2 * n_spatial - n_elec) / 2;
    let values = 2 * s_max + 1;
    let mut n_anc = 1;
    while (1usize << n_anc) < values {
        n_anc += 1;
    }
    Ok(n_anc)
}

/// Pair gate acting as `exp(2iθ s_axis)` on one spatial orbital's (α, β) qubits.
///
/// For `x` this is `A(θ, -π/2)`. For `y` it is `A(θ, 0)`, since Jordan–Wigner
/// `s_y` is `-σ_y / 2` in the `(|01⟩, |10⟩)` basis.
pub fn pair_rotation(axis: Axis, theta: f64) -> Result<DMatrix<Complex64>> {
    match axis {
        Axis::X => Ok(a_gate_matrix(theta, -FRAC_PI_2)),
        Axis::Y => Ok(a_gate_matrix(theta, 0.0)),
        Axis::Z => Err(Error::arg("the screen rotates about x or y only")),
    }
}

/// `exp(iθ S_axis)` on `2·n_spatial` qubits as a product of pair rotations.
pub fn spin_rotation(axis: Axis, theta: f64, n_spatial: usize) -> Result<Circuit> {
    let m = pair_rotation(axis, theta / 2.0)?;
    let mut circ = Circuit::new(2 * n_spatial);
    for i in 0..n_spatial {
        circ.push(Gate::new("pair", m.clone(), vec![2 * i, 2 * i + 1])?)?;
    }
    Ok(circ)
}

fn swap() -> DMatrix<Complex64> {
    let o = Complex64::new(1.0, 0.0);
    let z = Complex64::new(0.0, 0.0);
    gates::from_rows(&[&[o, z, z, z], &[z, z, o, z], &[z, o, z, z], &[z, z, z, o]])
}

/// `QFT|m⟩ = 2^{-n/2} Σ_j e^{2πi jm/2^n} |j⟩` on qubits `0..n_anc`, qubit 0 most significant.
pub fn qft(n_anc: usize) -> Result<Circuit> {
    if n_anc == 0 {
        return Err(Error::arg("QFT needs at least one qubit"));
    }
    let mut circ = Circuit::new(n_anc);
    for j in 0..n_anc {
        circ.push(Gate::new("h", gates::h(), vec![j])?)?;
        for k in j + 1..n_anc {
            let angle = 2.0 * PI / (1u64 << (k - j + 1)) as f64;
            circ.push(Gate::controlled("cp", gates::phase(angle), vec![j], vec![k])?)?;
        }
    }
    for j in 0..n_anc / 2 {
        circ.push(Gate::new("swap", swap(), vec![j, n_anc - 1 - j])?)?;
    }
    Ok(circ)
}

pub fn inverse_qft(n_anc: usize) -> Result<Circuit> {
    Ok(qft(n_anc)?.inverse())
}

/// Screen along `axis` on a register of `n_total` qubits whose system part
/// is `0..2·n_spatial` and whose ancillas start at `anc_offset`.
pub fn build_screen_circuit_at(
    n_spatial: usize,
    n_anc: usize,
    axis: Axis,
    anc_offset: usize,
    n_total: usize,
) -> Result<Circuit> {
    let n_sys = 2 * n_spatial;
    if n_anc == 0 || anc_offset < n_sys || anc_offset + n_anc > n_total {
        return Err(Error::arg(format!(
            "ancillas {anc_offset}..{} do not fit after {n_sys} system qubits in {n_total}",
            anc_offset + n_anc
        )));
    }
    let mut circ = Circuit::new(n_total);
    for k in 0..n_anc {
        circ.push(Gate::new("h", gates::h(), vec![anc_offset + k])?)?;
    }
    let base = 2.0 * PI / (1u64 << n_anc) as f64;
    for k in 0..n_anc {
        let weight = (1u64 << (n_anc - 1 - k)) as f64;
        let m = pair_rotation(axis, weight * base / 2.0)?;
        for i in 0..n_spatial {
            circ.push(Gate::controlled(
                "c-pair",
                m.clone(),
                vec![2 * i, 2 * i + 1],
                vec![anc_offset + k],
            )?)?;
        }
    }
    circ.append(&inverse_qft(n_anc)?, anc_offset)?;
    Ok(circ)
}

/// Single-axis screen with ancillas directly after the system register.
pub fn build_screen_circuit(n_spatial: usize, n_anc: usize, axis: Axis) -> Result<Circuit> {
    let n_sys = 2 * n_spatial;
    build_screen_circuit_at(n_spatial, n_anc, axis, n_sys, n_sys + n_anc)
}

/// Two's-complement reading of an ancilla outcome.
pub fn decode_mx(outcome: &str, n_anc: usize) -> Result<i64> {
    if outcome.len() != n_anc || n_anc == 0 {
        return Err(Error::arg(format!(
            "outcome `{outcome}` does not have {n_anc} bits"
        )));
    }
    Ok(decode_value(parse_bits(outcome)?, n_anc))
}

fn decode_value(u: usize, n_anc: usize) -> i64 {
    let u = u as i64;
    if u < 1 << (n_anc - 1) {
        u
    } else {
        u - (1 << n_anc)
    }
}

/// A prepared screen: the circuit plus register bookkeeping.
#[derive(Clone, Debug)]
pub struct Screen {
    n_spatial: usize,
    n_anc: usize,
    circuit: Circuit,
    inverse: Circuit,
}

impl Screen {
    pub fn new(n_spatial: usize, n_anc: usize) -> Result<Self> {
        let circuit = build_screen_circuit(n_spatial, n_anc, Axis::X)?;
        Ok(Self {
            n_spatial,
            n_anc,
            inverse: circuit.inverse(),
            circuit,
        })
    }

    pub fn for_sector(n_spatial: usize, sector: &SpinSector) -> Result<Self> {
        Self::new(n_spatial, required_ancillas(n_spatial, sector.n_elec())?)
    }

    pub fn n_anc(&self) -> usize {
        self.n_anc
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    /// `|Ψ⟩ = screen (|ψ⟩ ⊗ |0…0⟩)`.
    pub fn apply(&self, system: &StateVector) -> Result<StateVector> {
        if system.n_qubits() != 2 * self.n_spatial {
            return Err(Error::arg(format!(
                "{}-qubit state for a {}-orbital screen",
                system.n_qubits(),
                self.n_spatial
            )));
        }
        let mut full = system.tensor(&StateVector::zero(self.n_anc)?)?;
        full.apply_circuit(&self.circuit)?;
        Ok(full)
    }

    /// `(I ⊗ ⟨0…0|) screen† |Φ⟩`: the adjoint of [`Screen::apply`].
    pub fn adjoint(&self, full: &StateVector) -> Result<StateVector> {
        if full.n_qubits() != 2 * self.n_spatial + self.n_anc {
            return Err(Error::arg(format!(
                "{}-qubit state for a screened {}-orbital register",
                full.n_qubits(),
                self.n_spatial
            )));
        }
        let mut back = full.clone();
        back.apply_circuit(&self.inverse)?;
        back.trailing_block(self.n_anc, 0)
    }
}

/// Probability of each decoded `m_x` on the trailing `n_anc` qubits.
pub fn ancilla_distribution(state: &StateVector, n_anc: usize) -> Result<BTreeMap<i64, f64>> {
    let n = state.n_qubits();
    if n_anc == 0 || n_anc > n {
        return Err(Error::arg(format!("{n_anc} ancillas on {n} qubits")));
    }
    let qubits: Vec<usize> = (n - n_anc..n).collect();
    let probs = state.marginal_probabilities(&qubits)?;
    Ok(probs
        .iter()
        .enumerate()
        .map(|(u, p)| (decode_value(u, n_anc), *p))
        .collect())
}

/// Outcome of one screened measurement.
#[derive(Clone, Debug)]
pub struct FilterShot {
    pub passed: bool,
    pub m_x: i64,
    pub collapsed: StateVector,
}

/// Measures the trailing ancillas and accepts when `|m_x| ≤ S_target`.
pub fn shot_filter<R: Rng + ?Sized>(
    state: &StateVector,
    sector: &SpinSector,
    n_anc: usize,
    rng: &mut R,
) -> Result<FilterShot> {
    let n = state.n_qubits();
    if n_anc == 0 || n_anc > n {
        return Err(Error::arg(format!("{n_anc} ancillas on {n} qubits")));
    }
    let qubits: Vec<usize> = (n - n_anc..n).collect();
    let (outcome, collapsed) = state.measure_subset(&qubits, rng)?;
    let m_x = decode_mx(&outcome, n_anc)?;
    Ok(FilterShot {
        passed: m_x.unsigned_abs() as i64 <= threshold(sector),
        m_x,
        collapsed,
    })
}

fn threshold(sector: &SpinSector) -> i64 {
    (sector.s_target().twice() / 2) as i64
}

/// Per-ancilla-outcome probabilities and conditional expectations of a
/// compiled operator, for a screened state.
pub(crate) fn resolve_blocks(
    state: &StateVector,
    n_anc: usize,
    op: &CompiledPauliSum,
) -> Vec<(f64, f64)> {
    let amps = state.amplitudes();
    let n_blocks = 1usize << n_anc;
    let block_len = amps.len() >> n_anc;
    let mut buf = vec![Complex64::new(0.0, 0.0); block_len];
    (0..n_blocks)
        .map(|a| {
            for (s, b) in buf.iter_mut().enumerate() {
                *b = amps[(s << n_anc) | a];
            }
            let p: f64 = buf.iter().map(|z| z.norm_sqr()).sum();
            let e = if p > 0.0 { op.expectation_amps(&buf) } else { 0.0 };
            (p, e)
        })
        .collect()
}

/// `H_ext = (H - c_H) ⊗ D + c_H`, with `D = diag(s(j))` over ancilla outcomes,
/// `s(j) = 1` for `|j| ≤ S_target` and `c_penalty` otherwise.
#[derive(Clone, Debug)]
pub struct ExtendedHamiltonian {
    base: PauliSum,
    compiled: CompiledPauliSum,
    norm_bound: f64,
    c_penalty: f64,
    n_anc: usize,
    threshold: i64,
}

impl ExtendedHamiltonian {
    pub fn new(base: PauliSum, sector: &SpinSector, n_anc: usize, c_penalty: f64) -> Result<Self> {
        if !(c_penalty < 1.0) {
            return Err(Error::InvalidPenalty(c_penalty));
        }
        if n_anc == 0 {
            return Err(Error::arg("extended Hamiltonian needs at least one ancilla"));
        }
        Ok(Self {
            compiled: CompiledPauliSum::new(&base),
            norm_bound: base.one_norm(),
            base,
            c_penalty,
            n_anc,
            threshold: threshold(sector),
        })
    }

    pub fn base(&self) -> &PauliSum {
        &self.base
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn c_penalty(&self) -> f64 {
        self.c_penalty
    }

    pub fn n_anc(&self) -> usize {
        self.n_anc
    }

    pub fn is_valid(&self, ancilla_value: usize) -> bool {
        decode_value(ancilla_value, self.n_anc).abs() <= self.threshold
    }

    fn weight(&self, ancilla_value: usize) -> f64 {
        if self.is_valid(ancilla_value) {
            1.0
        } else {
            self.c_penalty
        }
    }

    /// `⟨Ψ|H_ext|Ψ⟩` evaluated block by block.
    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        let expected = self.base.n_qubits() + self.n_anc;
        if state.n_qubits() != expected {
            return Err(Error::arg(format!(
                "{}-qubit state for a {expected}-qubit extended Hamiltonian",
                state.n_qubits()
            )));
        }
        let c = self.norm_bound;
        Ok(resolve_blocks(state, self.n_anc, &self.compiled)
            .into_iter()
            .enumerate()
            .map(|(a, (p, e))| self.weight(a) * (e - c * p) + c * p)
            .sum())
    }

    /// `H_ext|Ψ⟩`.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        let expected = self.base.n_qubits() + self.n_anc;
        if state.n_qubits() != expected {
            return Err(Error::arg(format!(
                "{}-qubit state for a {expected}-qubit extended Hamiltonian",
                state.n_qubits()
            )));
        }
        let c = self.norm_bound;
        let n_blocks = 1usize << self.n_anc;
        let amps = state.amplitudes();
        let block_len = amps.len() >> self.n_anc;
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); block_len];
        for a in 0..n_blocks {
            for (s, b) in buf.iter_mut().enumerate() {
                *b = amps[(s << self.n_anc) | a];
            }
            if buf.iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            let w = self.weight(a);
            let hb = self.compiled.apply_amps(&buf);
            for (s, (h, b)) in hb.iter().zip(&buf).enumerate() {
                out[(s << self.n_anc) | a] = h * w + b * ((1.0 - w) * c);
            }
        }
        StateVector::from_amplitudes(state.n_qubits(), out)
    }

    /// Dense `H_ext` on the composite register.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        let h = self.base.to_dense()?;
        let dim_a = 1usize << self.n_anc;
        let dim = h.nrows() * dim_a;
        let c = Complex64::new(self.norm_bound, 0.0);
        Ok(DMatrix::from_fn(dim, dim, |r, k| {
            let (sr, ar) = (r >> self.n_anc, r & (dim_a - 1));
            let (sk, ak) = (k >> self.n_anc, k & (dim_a - 1));
            if ar != ak {
                return Complex64::new(0.0, 0.0);
            }
            let shifted = if sr == sk { h[(sr, sk)] - c } else { h[(sr, sk)] };
            let diag = if r == k { c } else { Complex64::new(0.0, 0.0) };
            shifted * self.weight(ar) + diag
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinops::{spin_component, HalfInt};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense_of(circ: &Circuit) -> DMatrix<Complex64> {
        let dim = 1 << circ.n_qubits();
        let mut m = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let mut s = StateVector::basis_index(circ.n_qubits(), k).unwrap();
            s.apply_circuit(circ).unwrap();
            for (r, a) in s.amplitudes().iter().enumerate() {
                m[(r, k)] = *a;
            }
        }
        m
    }

    fn expm_i_hermitian(h: &DMatrix<Complex64>, theta: f64) -> DMatrix<Complex64> {
        let eig = h.clone().symmetric_eigen();
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, theta * l)));
        &eig.eigenvectors * d * eig.eigenvectors.adjoint()
    }

    #[test]
    fn ancilla_counts() {
        assert_eq!(required_ancillas(3, 2).unwrap(), 2);
        assert_eq!(required_ancillas(4, 4).unwrap(), 3);
        assert_eq!(required_ancillas(1, 2).unwrap(), 1);
        assert!(matches!(required_ancillas(3, 3), Err(Error::UnsupportedSector(_))));
        assert!(required_ancillas(3, 0).is_err());
    }

    #[test]
    fn qft_round_trip_and_phase_readout() {
        for n in 1..=4 {
            let f = dense_of(&qft(n).unwrap());
            let dim = 1 << n;
            let expected = DMatrix::from_fn(dim, dim, |j, m| {
                Complex64::from_polar(1.0 / (dim as f64).sqrt(), 2.0 * PI * (j * m) as f64 / dim as f64)
            });
            assert!((&f - &expected).norm() < 1e-10);
            let fi = dense_of(&inverse_qft(n).unwrap());
            assert!((fi * f - DMatrix::<Complex64>::identity(dim, dim)).norm() < 1e-10);
        }
        assert!((dense_of(&inverse_qft(1).unwrap()) - gates::h()).norm() < 1e-12);
        let n = 3;
        for m in [0i64, 1, 2, -1] {
            let dim = 1 << n;
            let amps = (0..dim)
                .map(|j| Complex64::from_polar(1.0 / (dim as f64).sqrt(), 2.0 * PI * (j as i64 * m) as f64 / dim as f64))
                .collect();
            let mut s = StateVector::from_amplitudes(n, amps).unwrap();
            s.apply_circuit(&inverse_qft(n).unwrap()).unwrap();
            let target = m.rem_euclid(dim as i64) as usize;
            assert!((s.amplitudes()[target].norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn half_angle_rule_matches_exponential() {
        for axis in [Axis::X, Axis::Y] {
            assert!((pair_rotation(axis, 0.0).unwrap() - gates::identity(2)).norm() < 1e-15);
            for n in 1..=3 {
                let s = spin_component(axis, n).unwrap().to_dense().unwrap();
                for theta in [0.3, 1.1, PI, -0.8, 2.4] {
                    let circ = dense_of(&spin_rotation(axis, theta, n).unwrap());
                    assert!((circ - expm_i_hermitian(&s, theta)).norm() < 1e-10, "{axis:?} {n} {theta}");
                }
            }
        }
    }

    #[test]
    fn decoding() {
        assert_eq!(decode_mx("000", 3).unwrap(), 0);
        assert_eq!(decode_mx("110", 3).unwrap(), -2);
        assert_eq!(decode_mx("01", 2).unwrap(), 1);
        assert_eq!(decode_mx("11", 2).unwrap(), -1);
        assert!(decode_mx("01", 3).is_err());
    }

    #[test]
    fn closed_shell_reference_passes() {
        let screen = Screen::new(2, 2).unwrap();
        let s = StateVector::basis_state(4, "1100").unwrap();
        let dist = ancilla_distribution(&screen.apply(&s).unwrap(), 2).unwrap();
        assert!((dist[&0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn open_shell_triplet_splits() {
        // |1α 2β⟩ + |1β 2α⟩ combinations: the triplet (m_z = 0) reads m_x = ±1 only
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s2 = crate::spinops::s_squared(2).unwrap();
        let screen = Screen::new(2, 2).unwrap();
        for sign in [1.0, -1.0] {
            let mut amps = vec![Complex64::new(0.0, 0.0); 16];
            amps[0b1001] = Complex64::new(r, 0.0);
            amps[0b0110] = Complex64::new(sign * r, 0.0);
            let s = StateVector::from_amplitudes(4, amps).unwrap();
            let dist = ancilla_distribution(&screen.apply(&s).unwrap(), 2).unwrap();
            if s2.expectation(&s).unwrap() > 1.0 {
                assert!(dist[&0] < 1e-12);
                assert!((dist[&1] - 0.5).abs() < 1e-12 && (dist[&-1] - 0.5).abs() < 1e-12);
            } else {
                assert!((dist[&0] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn triplet_m1_distribution() {
        // |1α 2α⟩ is S = 1, m_z = 1
        let screen = Screen::new(2, 2).unwrap();
        let s = StateVector::basis_state(4, "1010").unwrap();
        let dist = ancilla_distribution(&screen.apply(&s).unwrap(), 2).unwrap();
        assert!((dist[&1] - 0.25).abs() < 1e-12);
        assert!((dist[&0] - 0.5).abs() < 1e-12);
        assert!((dist[&-1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn shot_filter_on_triplet() {
        let sector = SpinSector::new(1, 1).unwrap();
        let screen = Screen::new(2, 2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![Complex64::new(0.0, 0.0); 16];
        amps[0b1001] = Complex64::new(r, 0.0);
        amps[0b0110] = Complex64::new(-r, 0.0);
        let s = StateVector::from_amplitudes(4, amps).unwrap();
        let s2 = crate::spinops::s_squared(2).unwrap().expectation(&s).unwrap();
        let screened = screen.apply(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let shot = shot_filter(&screened, &sector, 2, &mut rng).unwrap();
            assert_eq!(shot.passed, s2 < 1.0);
        }
    }

    #[test]
    fn extended_hamiltonian_reductions() {
        let base = PauliSum::from_words(2, [(0.7, "ZI"), (-0.2, "XX"), (0.1, "II")]).unwrap();
        // all-valid: S_target = 1 covers every readout on one ancilla
        let wide = SpinSector::with_target(1, 1, HalfInt::integer(1)).unwrap();
        let ext = ExtendedHamiltonian::new(base.clone(), &wide, 1, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let amps: Vec<Complex64> = (0..8)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let psi = StateVector::from_amplitudes(3, amps).unwrap().normalized().unwrap();
        let plain = base.widened(3).unwrap().expectation(&psi).unwrap();
        assert!((ext.expectation(&psi).unwrap() - plain).abs() < 1e-12);

        let singlet = SpinSector::new(1, 1).unwrap();
        let ext = ExtendedHamiltonian::new(base.clone(), &singlet, 2, 0.0).unwrap();
        // ancilla fixed at |11⟩ (m_x = -1) is invalid
        let sys = StateVector::basis_state(2, "10").unwrap();
        let bad = sys.tensor(&StateVector::basis_state(2, "11").unwrap()).unwrap();
        assert!((ext.expectation(&bad).unwrap() - base.one_norm()).abs() < 1e-12);

        let dense = ext.to_dense().unwrap();
        let amps: Vec<Complex64> = (0..16)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let psi = StateVector::from_amplitudes(4, amps).unwrap().normalized().unwrap();
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let q = (v.adjoint() * dense * &v)[(0, 0)].re;
        assert!((ext.expectation(&psi).unwrap() - q).abs() < 1e-12);
        assert!(matches!(
            ExtendedHamiltonian::new(base, &singlet, 2, 1.0),
            Err(Error::InvalidPenalty(_))
        ));
    }
}
