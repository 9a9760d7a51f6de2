//! Dense statevectors and the gate-application kernel.
//!
//! Basis index convention: qubit 0 is the most significant bit, so the
//! bitstring `"q0 q1 ... q(n-1)"` read left to right is the binary index.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Deviation from `U†U = I` beyond which a gate is rejected.
pub const UNITARY_TOL: f64 = 1e-8;
/// Allowed relative norm drift across a circuit application.
pub const NORM_DRIFT_TOL: f64 = 1e-9;
/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 24;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateVector")
            .field("n_qubits", &self.n_qubits)
            .field("norm", &self.norm())
            .finish()
    }
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::ResourceLimit {
                what: "statevector",
                n_qubits,
                limit: MAX_QUBITS,
            });
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Computational basis state from an occupation bitstring such as `"110000"`.
    pub fn basis_state(n_qubits: usize, occupation: &str) -> Result<Self> {
        if occupation.chars().count() != n_qubits {
            return Err(Error::arg(format!(
                "bitstring `{occupation}` has length {}, expected {n_qubits}",
                occupation.chars().count()
            )));
        }
        let index = parse_bits(occupation)?;
        let mut state = Self::zero(n_qubits)?;
        state.amps[0] = ZERO;
        state.amps[index] = ONE;
        Ok(state)
    }

    pub fn basis_index(n_qubits: usize, index: usize) -> Result<Self> {
        let mut state = Self::zero(n_qubits)?;
        if index >= state.amps.len() {
            return Err(Error::arg(format!("basis index {index} out of range")));
        }
        state.amps[0] = ZERO;
        state.amps[index] = ONE;
        Ok(state)
    }

    /// Wraps raw amplitudes. No normalisation is imposed.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n_qubits > MAX_QUBITS || amps.len() != 1usize << n_qubits {
            return Err(Error::arg(format!(
                "{} amplitudes cannot describe {n_qubits} qubits",
                amps.len()
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Index bit carrying qubit `q`.
    #[inline]
    pub fn qubit_mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    /// Returns a normalised copy. Only used where collapse or projection
    /// makes renormalisation part of the semantics.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm < 1e-300 {
            return Err(Error::InvalidState("cannot normalise a zero vector".into()));
        }
        let inv = 1.0 / norm;
        Ok(Self {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().map(|a| a * inv).collect(),
        })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::arg(format!(
                "inner product of {}- and {}-qubit states",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(inner_amps(&self.amps, &other.amps))
    }

    /// `self ⊗ other`, with `self` occupying the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_QUBITS {
            return Err(Error::ResourceLimit {
                what: "tensor product",
                n_qubits: n,
                limit: MAX_QUBITS,
            });
        }
        let mut amps = Vec::with_capacity(1 << n);
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        Ok(StateVector { n_qubits: n, amps })
    }

    /// Amplitudes of the leading `n - n_trailing` qubits with the trailing
    /// register fixed to `value`. The block is not renormalised.
    pub fn trailing_block(&self, n_trailing: usize, value: usize) -> Result<StateVector> {
        if n_trailing > self.n_qubits || value >= 1 << n_trailing {
            return Err(Error::arg(format!(
                "trailing block {value} of {n_trailing} qubits on a {}-qubit state",
                self.n_qubits
            )));
        }
        let n_lead = self.n_qubits - n_trailing;
        let amps = (0..1usize << n_lead)
            .map(|s| self.amps[(s << n_trailing) | value])
            .collect();
        Ok(StateVector {
            n_qubits: n_lead,
            amps,
        })
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.check_width(self.n_qubits)?;
        apply_kernel(&mut self.amps, self.n_qubits, gate);
        Ok(())
    }

    /// Validates and applies an arbitrary (controlled) unitary.
    pub fn apply_gate(
        &mut self,
        matrix: DMatrix<Complex64>,
        targets: &[usize],
        controls: &[usize],
    ) -> Result<()> {
        let gate = Gate::controlled("u", matrix, targets.to_vec(), controls.to_vec())?;
        self.apply(&gate)
    }

    /// Applies every gate of `circuit` in order and fails if the norm drifted.
    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::arg(format!(
                "{}-qubit circuit on a {}-qubit state",
                circuit.n_qubits, self.n_qubits
            )));
        }
        let before = self.norm_sqr();
        for gate in &circuit.gates {
            apply_kernel(&mut self.amps, self.n_qubits, gate);
        }
        let after = self.norm_sqr();
        if (after - before).abs() > NORM_DRIFT_TOL * before.max(1.0) {
            return Err(Error::InvalidState(format!(
                "norm drifted from {before} to {after} during circuit application"
            )));
        }
        Ok(())
    }

    /// Born probabilities of the sub-register `qubits`, indexed by the
    /// integer whose most significant bit is `qubits[0]`.
    pub fn marginal_probabilities(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        self.check_qubits(qubits)?;
        let masks: Vec<usize> = qubits.iter().map(|&q| self.qubit_mask(q)).collect();
        let mut probs = vec![0.0; 1 << qubits.len()];
        for (i, a) in self.amps.iter().enumerate() {
            probs[gather_bits(i, &masks)] += a.norm_sqr();
        }
        let total: f64 = probs.iter().sum();
        if total < 1e-300 {
            return Err(Error::InvalidState("zero-norm state".into()));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(probs)
    }

    /// Marginal distribution keyed by outcome bitstring (only nonzero entries).
    pub fn marginal_distribution(&self, qubits: &[usize]) -> Result<BTreeMap<String, f64>> {
        let probs = self.marginal_probabilities(qubits)?;
        Ok(probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(k, p)| (format_bits(k, qubits.len()), *p))
            .collect())
    }

    /// Projective measurement of `qubits`, returning the outcome bitstring and
    /// the renormalised post-measurement state.
    pub fn measure_subset<R: Rng + ?Sized>(
        &self,
        qubits: &[usize],
        rng: &mut R,
    ) -> Result<(String, StateVector)> {
        if qubits.is_empty() {
            return Err(Error::arg("measurement needs at least one qubit"));
        }
        let probs = self.marginal_probabilities(qubits)?;
        let outcome = sample_index(&probs, rng);
        let masks: Vec<usize> = qubits.iter().map(|&q| self.qubit_mask(q)).collect();
        let norm = probs[outcome].sqrt() * self.norm();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if gather_bits(i, &masks) == outcome {
                    a / norm
                } else {
                    ZERO
                }
            })
            .collect();
        Ok((
            format_bits(outcome, qubits.len()),
            StateVector {
                n_qubits: self.n_qubits,
                amps,
            },
        ))
    }

    fn check_qubits(&self, qubits: &[usize]) -> Result<()> {
        for (k, &q) in qubits.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::arg(format!(
                    "qubit {q} out of range for {} qubits",
                    self.n_qubits
                )));
            }
            if qubits[..k].contains(&q) {
                return Err(Error::arg(format!("qubit {q} listed twice")));
            }
        }
        Ok(())
    }
}

pub(crate) fn inner_amps(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Draws an index from a normalised probability vector.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

fn gather_bits(index: usize, masks: &[usize]) -> usize {
    masks
        .iter()
        .fold(0, |acc, &m| (acc << 1) | usize::from(index & m != 0))
}

pub fn format_bits(value: usize, width: usize) -> String {
    (0..width)
        .map(|k| if value >> (width - 1 - k) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_bits(bits: &str) -> Result<usize> {
    bits.chars().try_fold(0usize, |acc, c| match c {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        other => Err(Error::arg(format!("`{other}` is not a bit"))),
    })
}

/// A unitary on `targets`, optionally conditioned on every `controls` qubit
/// being `|1⟩`. `targets[0]` is the most significant index of the matrix.
#[derive(Clone, Debug)]
pub struct Gate {
    pub name: &'static str,
    matrix: DMatrix<Complex64>,
    targets: Vec<usize>,
    controls: Vec<usize>,
}

impl Gate {
    pub fn new(name: &'static str, matrix: DMatrix<Complex64>, targets: Vec<usize>) -> Result<Self> {
        Self::controlled(name, matrix, targets, Vec::new())
    }

    pub fn controlled(
        name: &'static str,
        matrix: DMatrix<Complex64>,
        targets: Vec<usize>,
        controls: Vec<usize>,
    ) -> Result<Self> {
        let k = targets.len();
        if k == 0 {
            return Err(Error::arg("gate needs at least one target"));
        }
        if matrix.nrows() != 1 << k || matrix.ncols() != 1 << k {
            return Err(Error::InvalidGate(format!(
                "{}x{} matrix for {k} targets",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let all: Vec<usize> = targets.iter().chain(&controls).copied().collect();
        for (i, q) in all.iter().enumerate() {
            if all[..i].contains(q) {
                return Err(Error::arg(format!("qubit {q} used twice by one gate")));
            }
        }
        let deviation = unitarity_deviation(&matrix);
        if deviation > UNITARY_TOL {
            return Err(Error::InvalidGate(format!(
                "`{name}` deviates from unitarity by {deviation:e}"
            )));
        }
        Ok(Self {
            name,
            matrix,
            targets,
            controls,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn controls(&self) -> &[usize] {
        &self.controls
    }

    /// Same gate with every qubit index moved by `offset`.
    pub fn shifted(&self, offset: usize) -> Gate {
        Gate {
            name: self.name,
            matrix: self.matrix.clone(),
            targets: self.targets.iter().map(|q| q + offset).collect(),
            controls: self.controls.iter().map(|q| q + offset).collect(),
        }
    }

    pub fn adjoint(&self) -> Gate {
        Gate {
            name: self.name,
            matrix: self.matrix.adjoint(),
            targets: self.targets.clone(),
            controls: self.controls.clone(),
        }
    }

    /// Adds control qubits on top of the existing ones.
    pub fn with_controls(mut self, extra: &[usize]) -> Result<Gate> {
        for q in extra {
            if self.targets.contains(q) || self.controls.contains(q) {
                return Err(Error::arg(format!("control {q} collides with the gate")));
            }
        }
        self.controls.extend_from_slice(extra);
        Ok(self)
    }

    pub fn max_qubit(&self) -> usize {
        self.targets
            .iter()
            .chain(&self.controls)
            .copied()
            .max()
            .unwrap_or(0)
    }

    fn check_width(&self, n_qubits: usize) -> Result<()> {
        if self.max_qubit() >= n_qubits {
            return Err(Error::arg(format!(
                "gate `{}` touches qubit {} of a {n_qubits}-qubit register",
                self.name,
                self.max_qubit()
            )));
        }
        Ok(())
    }
}

pub fn unitarity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let product = m.adjoint() * m;
    let n = product.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { ONE } else { ZERO };
            worst = worst.max((product[(r, c)] - target).norm());
        }
    }
    worst
}

fn apply_kernel(amps: &mut [Complex64], n_qubits: usize, gate: &Gate) {
    let k = gate.targets.len();
    let sub = 1usize << k;
    let mask = |q: usize| 1usize << (n_qubits - 1 - q);
    let offsets: Vec<usize> = (0..sub)
        .map(|s| {
            (0..k)
                .filter(|&t| s >> (k - 1 - t) & 1 == 1)
                .map(|t| mask(gate.targets[t]))
                .sum()
        })
        .collect();
    let target_mask = offsets[sub - 1];
    let control_mask: usize = gate.controls.iter().map(|&q| mask(q)).sum();
    let m = &gate.matrix;
    let mut buf = vec![ZERO; sub];
    for base in 0..amps.len() {
        if base & target_mask != 0 || base & control_mask != control_mask {
            continue;
        }
        for (s, off) in offsets.iter().enumerate() {
            buf[s] = amps[base | off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let mut acc = ZERO;
            for (c, b) in buf.iter().enumerate() {
                acc += m[(r, c)] * b;
            }
            amps[base | off] = acc;
        }
    }
}

/// An ordered gate list on a fixed register.
#[derive(Clone, Debug)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.check_width(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Appends `other`, whose qubit 0 lands on `offset` of this register.
    pub fn append(&mut self, other: &Circuit, offset: usize) -> Result<()> {
        if other.n_qubits + offset > self.n_qubits {
            return Err(Error::arg(format!(
                "cannot place a {}-qubit circuit at offset {offset} of {} qubits",
                other.n_qubits, self.n_qubits
            )));
        }
        self.gates
            .extend(other.gates.iter().map(|g| g.shifted(offset)));
        Ok(())
    }

    /// The inverse circuit (reversed order, adjoint gates).
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::adjoint).collect(),
        }
    }

    pub fn count(&self, name: &str) -> usize {
        self.gates.iter().filter(|g| g.name == name).count()
    }
}

/// Standard single- and two-qubit matrices.
pub mod gates {
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> DMatrix<Complex64> {
        let n = rows.len();
        DMatrix::from_fn(n, n, |r, k| rows[r][k])
    }

    pub fn identity(k: usize) -> DMatrix<Complex64> {
        DMatrix::identity(1 << k, 1 << k)
    }

    pub fn x() -> DMatrix<Complex64> {
        from_rows(&[&[c(0., 0.), c(1., 0.)], &[c(1., 0.), c(0., 0.)]])
    }

    pub fn y() -> DMatrix<Complex64> {
        from_rows(&[&[c(0., 0.), c(0., -1.)], &[c(0., 1.), c(0., 0.)]])
    }

    pub fn z() -> DMatrix<Complex64> {
        from_rows(&[&[c(1., 0.), c(0., 0.)], &[c(0., 0.), c(-1., 0.)]])
    }

    pub fn h() -> DMatrix<Complex64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        from_rows(&[&[c(s, 0.), c(s, 0.)], &[c(s, 0.), c(-s, 0.)]])
    }

    /// `diag(1, e^{iλ})`.
    pub fn phase(lambda: f64) -> DMatrix<Complex64> {
        from_rows(&[
            &[c(1., 0.), c(0., 0.)],
            &[c(0., 0.), Complex64::from_polar(1.0, lambda)],
        ])
    }

    /// `R_z(λ) = diag(e^{-iλ/2}, e^{iλ/2})`.
    pub fn rz(lambda: f64) -> DMatrix<Complex64> {
        from_rows(&[
            &[Complex64::from_polar(1.0, -lambda / 2.0), c(0., 0.)],
            &[c(0., 0.), Complex64::from_polar(1.0, lambda / 2.0)],
        ])
    }

    /// `R_y(λ) = [[cos λ/2, -sin λ/2], [sin λ/2, cos λ/2]]`.
    pub fn ry(lambda: f64) -> DMatrix<Complex64> {
        let (s, co) = (lambda / 2.0).sin_cos();
        from_rows(&[&[c(co, 0.), c(-s, 0.)], &[c(s, 0.), c(co, 0.)]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bell() -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_amplitudes(
            2,
            vec![
                Complex64::new(s, 0.0),
                ZERO,
                ZERO,
                Complex64::new(s, 0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn basis_states_follow_msb_convention() {
        let s = StateVector::basis_state(2, "00").unwrap();
        assert_eq!(s.amplitudes()[0], ONE);
        let s = StateVector::basis_state(2, "10").unwrap();
        assert_eq!(s.amplitudes()[2], ONE);
        let s = StateVector::basis_state(2, "11").unwrap();
        assert_eq!(s.amplitudes()[3], ONE);

        let lih = StateVector::basis_state(6, "110000").unwrap();
        let nonzero: Vec<usize> = lih
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(nonzero, vec![0b110000]);
        assert!((lih.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basis_state_rejects_bad_input() {
        assert!(matches!(
            StateVector::basis_state(3, "11"),
            Err(Error::InvalidArgument(_))
        ));
        assert!(StateVector::basis_state(2, "1a").is_err());
    }

    #[test]
    fn simple_gates() {
        let mut s = StateVector::basis_state(1, "0").unwrap();
        s.apply_gate(gates::identity(1), &[0], &[]).unwrap();
        assert_eq!(s.amplitudes()[0], ONE);
        s.apply_gate(gates::x(), &[0], &[]).unwrap();
        assert_eq!(s.amplitudes()[1], ONE);

        // control in |0> leaves the target alone
        let mut s = StateVector::basis_state(2, "00").unwrap();
        s.apply_gate(gates::x(), &[1], &[0]).unwrap();
        assert_eq!(s.amplitudes()[0], ONE);
        let mut s = StateVector::basis_state(2, "10").unwrap();
        s.apply_gate(gates::x(), &[1], &[0]).unwrap();
        assert_eq!(s.amplitudes()[3], ONE);
    }

    #[test]
    fn gate_validation() {
        let mut s = StateVector::zero(2).unwrap();
        let not_unitary = gates::x() * Complex64::new(1.1, 0.0);
        assert!(matches!(
            s.apply_gate(not_unitary, &[0], &[]),
            Err(Error::InvalidGate(_))
        ));
        assert!(matches!(
            s.apply_gate(gates::x(), &[0], &[0]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(s.apply_gate(gates::x(), &[2], &[]).is_err());
    }

    #[test]
    fn inner_products() {
        let zero = StateVector::basis_state(1, "0").unwrap();
        let one = StateVector::basis_state(1, "1").unwrap();
        assert_eq!(zero.inner(&zero).unwrap(), ONE);
        assert_eq!(zero.inner(&one).unwrap(), ZERO);
        assert!(zero.inner(&bell()).is_err());
    }

    #[test]
    fn marginal_of_plus_state() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply_gate(gates::h(), &[0], &[]).unwrap();
        let dist = s.marginal_distribution(&[0]).unwrap();
        assert!((dist["0"] - 0.5).abs() < 1e-12);
        assert!((dist["1"] - 0.5).abs() < 1e-12);
        let dist = s.marginal_distribution(&[1]).unwrap();
        assert!((dist["0"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measuring_bell_state_collapses() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = [false; 2];
        for _ in 0..64 {
            let (outcome, post) = bell().measure_subset(&[0], &mut rng).unwrap();
            let expected = if outcome == "0" { 0 } else { 3 };
            seen[usize::from(outcome == "1")] = true;
            assert!((post.amplitudes()[expected].norm() - 1.0).abs() < 1e-12);
            // repeated measurement agrees
            let (again, _) = post.measure_subset(&[0], &mut rng).unwrap();
            assert_eq!(again, outcome);
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn measurement_of_zero_state_is_certain() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = StateVector::zero(1).unwrap();
        let (outcome, post) = s.measure_subset(&[0], &mut rng).unwrap();
        assert_eq!(outcome, "0");
        assert_eq!(post, s);
    }

    #[test]
    fn zero_norm_measurement_fails() {
        let s = StateVector::from_amplitudes(1, vec![ZERO, ZERO]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            s.measure_subset(&[0], &mut rng),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn seeded_measurements_replay() {
        let mut plus = StateVector::zero(3).unwrap();
        for q in 0..3 {
            plus.apply_gate(gates::h(), &[q], &[]).unwrap();
        }
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| plus.measure_subset(&[0, 2], &mut rng).unwrap().0)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn trailing_block_extracts_system_amplitudes() {
        let sys = StateVector::basis_state(2, "10").unwrap();
        let anc = StateVector::basis_state(1, "1").unwrap();
        let joint = sys.tensor(&anc).unwrap();
        assert_eq!(joint.trailing_block(1, 1).unwrap(), sys);
        assert!(joint.trailing_block(1, 0).unwrap().norm() < 1e-15);
    }

    #[test]
    fn circuit_inverse_undoes_circuit() {
        let mut c = Circuit::new(2);
        c.push(Gate::new("h", gates::h(), vec![0]).unwrap()).unwrap();
        c.push(Gate::controlled("cx", gates::x(), vec![1], vec![0]).unwrap())
            .unwrap();
        c.push(Gate::new("rz", gates::rz(0.4), vec![1]).unwrap()).unwrap();
        let mut s = StateVector::basis_state(2, "01").unwrap();
        s.apply_circuit(&c).unwrap();
        s.apply_circuit(&c.inverse()).unwrap();
        assert!((s.amplitudes()[1] - ONE).norm() < 1e-12);
    }
}
