//! Real-weighted sums of Pauli strings.
//!
//! A [`PauliString`] stores X and Z bit masks indexed by qubit (bit `q` is
//! qubit `q`, independent of the statevector's index convention); `Y` sets
//! both bits. A [`PauliSum`] is always kept canonical: one term per string,
//! strings sorted by their word (qubit 0 first, `I < X < Y < Z`), and
//! coefficients below [`COEFF_CUTOFF`] dropped.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::statevector::StateVector;

pub const COEFF_CUTOFF: f64 = 1e-12;
/// Widest operator that may be materialised densely.
pub const DENSE_LIMIT: usize = 14;

const I_UNIT: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn symbol(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PauliString {
    x: u64,
    z: u64,
}

impl PauliString {
    pub const MAX_QUBITS: usize = 64;

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(qubit: usize, op: Pauli) -> Self {
        let mut s = Self::identity();
        s.set(qubit, Some(op));
        s
    }

    /// Parses a word such as `"IZXY"`, character `q` acting on qubit `q`.
    pub fn from_word(word: &str) -> Result<Self> {
        if word.len() > Self::MAX_QUBITS {
            return Err(Error::arg(format!("Pauli word longer than {} qubits", Self::MAX_QUBITS)));
        }
        let mut s = Self::identity();
        for (q, c) in word.chars().enumerate() {
            let op = match c {
                'I' => None,
                'X' => Some(Pauli::X),
                'Y' => Some(Pauli::Y),
                'Z' => Some(Pauli::Z),
                other => return Err(Error::arg(format!("`{other}` is not a Pauli symbol"))),
            };
            s.set(q, op);
        }
        Ok(s)
    }

    pub fn to_word(&self, n_qubits: usize) -> String {
        (0..n_qubits)
            .map(|q| self.get(q).map_or('I', Pauli::symbol))
            .collect()
    }

    pub fn get(&self, qubit: usize) -> Option<Pauli> {
        let x = self.x >> qubit & 1 == 1;
        let z = self.z >> qubit & 1 == 1;
        match (x, z) {
            (false, false) => None,
            (true, false) => Some(Pauli::X),
            (true, true) => Some(Pauli::Y),
            (false, true) => Some(Pauli::Z),
        }
    }

    pub fn set(&mut self, qubit: usize, op: Option<Pauli>) {
        let bit = 1u64 << qubit;
        self.x &= !bit;
        self.z &= !bit;
        match op {
            None => {}
            Some(Pauli::X) => self.x |= bit,
            Some(Pauli::Y) => {
                self.x |= bit;
                self.z |= bit;
            }
            Some(Pauli::Z) => self.z |= bit,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Number of qubits needed to hold the string.
    pub fn width(&self) -> usize {
        64 - (self.x | self.z).leading_zeros() as usize
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    fn n_y(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// `self · other = phase · result`.
    pub fn multiply(&self, other: &PauliString) -> (Complex64, PauliString) {
        // Write each string as i^{n_y} X^x Z^z and commute Z^{z1} past X^{x2}.
        let result = PauliString {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        };
        let swaps = (self.z & other.x).count_ones();
        let exponent = self.n_y() as i64 + other.n_y() as i64 - result.n_y() as i64
            + 2 * swaps as i64;
        (i_pow(exponent), result)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Index-space masks for a register of `n_qubits` (qubit 0 = MSB).
    fn index_masks(&self, n_qubits: usize) -> (usize, usize) {
        let mut xm = 0usize;
        let mut zm = 0usize;
        for q in 0..n_qubits {
            let bit = 1usize << (n_qubits - 1 - q);
            if self.x >> q & 1 == 1 {
                xm |= bit;
            }
            if self.z >> q & 1 == 1 {
                zm |= bit;
            }
        }
        (xm, zm)
    }
}

fn i_pow(exponent: i64) -> Complex64 {
    match exponent.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => I_UNIT,
        2 => Complex64::new(-1.0, 0.0),
        _ => -I_UNIT,
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        let rank = |p: Option<Pauli>| match p {
            None => 0,
            Some(Pauli::X) => 1,
            Some(Pauli::Y) => 2,
            Some(Pauli::Z) => 3,
        };
        let width = self.width().max(other.width());
        (0..width)
            .map(|q| rank(self.get(q)).cmp(&rank(other.get(q))))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub string: PauliString,
}

/// A Hermitian operator `Σ c_P P` with real `c_P`.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn identity(n_qubits: usize, coefficient: f64) -> Self {
        Self::from_terms(n_qubits, [(coefficient, PauliString::identity())])
            .expect("identity fits any register")
    }

    pub fn from_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (f64, PauliString)>,
    ) -> Result<Self> {
        if n_qubits > PauliString::MAX_QUBITS {
            return Err(Error::arg(format!("{n_qubits} qubits exceed the Pauli string width")));
        }
        let mut acc: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (c, s) in terms {
            if !c.is_finite() {
                return Err(Error::arg(format!("non-finite coefficient {c}")));
            }
            if s.width() > n_qubits {
                return Err(Error::arg(format!(
                    "Pauli string {} does not fit {n_qubits} qubits",
                    s.to_word(s.width())
                )));
            }
            *acc.entry(s).or_insert(0.0) += c;
        }
        Ok(Self::from_map(n_qubits, acc))
    }

    pub fn from_words<'a>(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (f64, &'a str)>,
    ) -> Result<Self> {
        let parsed = terms
            .into_iter()
            .map(|(c, w)| {
                if w.len() != n_qubits {
                    return Err(Error::arg(format!(
                        "word `{w}` has length {}, expected {n_qubits}",
                        w.len()
                    )));
                }
                Ok((c, PauliString::from_word(w)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(n_qubits, parsed)
    }

    fn from_map(n_qubits: usize, acc: BTreeMap<PauliString, f64>) -> Self {
        let terms = acc
            .into_iter()
            .filter(|(_, c)| c.abs() >= COEFF_CUTOFF)
            .map(|(string, coefficient)| PauliTerm {
                coefficient,
                string,
            })
            .collect();
        Self { n_qubits, terms }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn identity_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .find(|t| t.string.is_identity())
            .map_or(0.0, |t| t.coefficient)
    }

    /// Re-canonicalises; a no-op on any value built through this API.
    pub fn canonicalized(&self) -> Self {
        Self::from_terms(self.n_qubits, self.terms.iter().map(|t| (t.coefficient, t.string)))
            .expect("terms already validated")
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_terms(
            self.n_qubits,
            self.terms.iter().map(|t| (t.coefficient * factor, t.string)),
        )
        .expect("terms already validated")
    }

    pub fn add(&self, other: &PauliSum) -> Result<Self> {
        self.check_width(other.n_qubits)?;
        Self::from_terms(
            self.n_qubits,
            self.terms
                .iter()
                .chain(&other.terms)
                .map(|t| (t.coefficient, t.string)),
        )
    }

    /// Operator product, which must come out Hermitian (e.g. a square).
    pub fn product(&self, other: &PauliSum) -> Result<Self> {
        self.check_width(other.n_qubits)?;
        ComplexPauliSum::from(self)
            .mul(&ComplexPauliSum::from(other))
            .into_hermitian(self.n_qubits)
    }

    /// The same operator on a wider register (extra qubits act as identity).
    pub fn widened(&self, n_qubits: usize) -> Result<Self> {
        if n_qubits < self.n_qubits {
            return Err(Error::arg("cannot narrow a Pauli sum"));
        }
        Ok(Self {
            n_qubits,
            terms: self.terms.clone(),
        })
    }

    /// `Σ |c_P|`, an upper bound on the spectral norm.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        self.check_width(state.n_qubits())?;
        Ok(CompiledPauliSum::new(self).expectation_amps(state.amplitudes()))
    }

    /// `op|state⟩`, unnormalised.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.check_width(state.n_qubits())?;
        let out = CompiledPauliSum::new(self).apply_amps(state.amplitudes());
        StateVector::from_amplitudes(self.n_qubits, out)
    }

    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > DENSE_LIMIT {
            return Err(Error::ResourceLimit {
                what: "dense Pauli sum",
                n_qubits: self.n_qubits,
                limit: DENSE_LIMIT,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for t in &self.terms {
            let (xm, zm) = t.string.index_masks(self.n_qubits);
            let base = i_pow(t.string.n_y() as i64) * t.coefficient;
            for i in 0..dim {
                let sign = if (i & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                m[(i ^ xm, i)] += base * sign;
            }
        }
        Ok(m)
    }

    fn check_width(&self, n: usize) -> Result<()> {
        if n != self.n_qubits {
            return Err(Error::arg(format!(
                "{}-qubit operator used with a {n}-qubit register",
                self.n_qubits
            )));
        }
        Ok(())
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{:+.12} {}", t.coefficient, t.string.to_word(self.n_qubits))?;
        }
        Ok(())
    }
}

/// Complex-weighted intermediate used while building operators from
/// fermionic products. Only Hermitian results leave the module.
#[derive(Clone, Debug, Default)]
pub(crate) struct ComplexPauliSum {
    terms: BTreeMap<PauliString, Complex64>,
}

impl ComplexPauliSum {
    pub(crate) fn single(coefficient: Complex64, string: PauliString) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(string, coefficient);
        Self { terms }
    }

    pub(crate) fn add_scaled(&mut self, other: &ComplexPauliSum, factor: Complex64) {
        for (s, c) in &other.terms {
            *self.terms.entry(*s).or_default() += c * factor;
        }
    }

    pub(crate) fn mul(&self, other: &ComplexPauliSum) -> ComplexPauliSum {
        let mut out = ComplexPauliSum::default();
        for (sa, ca) in &self.terms {
            for (sb, cb) in &other.terms {
                let (phase, s) = sa.multiply(sb);
                *out.terms.entry(s).or_default() += ca * cb * phase;
            }
        }
        out
    }

    pub(crate) fn into_hermitian(self, n_qubits: usize) -> Result<PauliSum> {
        let mut real = Vec::with_capacity(self.terms.len());
        for (s, c) in self.terms {
            if c.im.abs() > COEFF_CUTOFF {
                return Err(Error::arg(format!(
                    "operator is not Hermitian: {} has coefficient {c}",
                    s.to_word(n_qubits)
                )));
            }
            real.push((c.re, s));
        }
        PauliSum::from_terms(n_qubits, real)
    }
}

impl From<&PauliSum> for ComplexPauliSum {
    fn from(sum: &PauliSum) -> Self {
        Self {
            terms: sum
                .terms
                .iter()
                .map(|t| (t.string, Complex64::new(t.coefficient, 0.0)))
                .collect(),
        }
    }
}

/// Matrix-free form of a [`PauliSum`] on a fixed register: terms sharing an
/// X mask are folded into one diagonal, so `(H v)[i ^ x] += d_x[i] v[i]`.
#[derive(Clone, Debug)]
pub struct CompiledPauliSum {
    n_qubits: usize,
    groups: Vec<(usize, Vec<Complex64>)>,
}

impl CompiledPauliSum {
    pub fn new(sum: &PauliSum) -> Self {
        let n = sum.n_qubits;
        let dim = 1usize << n;
        let mut by_mask: BTreeMap<usize, Vec<Complex64>> = BTreeMap::new();
        for t in &sum.terms {
            let (xm, zm) = t.string.index_masks(n);
            let base = i_pow(t.string.n_y() as i64) * t.coefficient;
            let diag = by_mask
                .entry(xm)
                .or_insert_with(|| vec![Complex64::new(0.0, 0.0); dim]);
            for (i, d) in diag.iter_mut().enumerate() {
                if (i & zm).count_ones() % 2 == 0 {
                    *d += base;
                } else {
                    *d -= base;
                }
            }
        }
        Self {
            n_qubits: n,
            groups: by_mask.into_iter().collect(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// `⟨v|H|v⟩` for an amplitude slice of the compiled width.
    pub fn expectation_amps(&self, v: &[Complex64]) -> f64 {
        let value = self.quadratic_form(v);
        let scale = 1.0 + v.iter().map(|a| a.norm_sqr()).sum::<f64>();
        assert!(
            value.im.abs() <= 1e-9 * scale * (1.0 + self.max_abs()),
            "Hermitian expectation has imaginary part {}",
            value.im
        );
        value.re
    }

    fn quadratic_form(&self, v: &[Complex64]) -> Complex64 {
        debug_assert_eq!(v.len(), 1 << self.n_qubits);
        let mut total = Complex64::new(0.0, 0.0);
        for (xm, diag) in &self.groups {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, (d, a)) in diag.iter().zip(v).enumerate() {
                acc += v[i ^ xm].conj() * d * a;
            }
            total += acc;
        }
        total
    }

    pub fn apply_amps(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        for (xm, diag) in &self.groups {
            for (i, (d, a)) in diag.iter().zip(v).enumerate() {
                out[i ^ xm] += d * a;
            }
        }
        out
    }

    fn max_abs(&self) -> f64 {
        self.groups
            .iter()
            .flat_map(|(_, d)| d.iter())
            .map(|d| d.norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::gates;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_state(n: usize, seed: u64) -> StateVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<Complex64> = (0..1 << n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        StateVector::from_amplitudes(n, amps).unwrap().normalized().unwrap()
    }

    fn random_sum(n: usize, n_terms: usize, seed: u64) -> PauliSum {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let terms = (0..n_terms).map(|_| {
            let word: String = (0..n).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect();
            (rng.random::<f64>() * 2.0 - 1.0, PauliString::from_word(&word).unwrap())
        });
        PauliSum::from_terms(n, terms.collect::<Vec<_>>()).unwrap()
    }

    fn dense_expectation(m: &DMatrix<Complex64>, s: &StateVector) -> Complex64 {
        let v = nalgebra::DVector::from_column_slice(s.amplitudes());
        (v.adjoint() * m * &v)[(0, 0)]
    }

    #[test]
    fn single_qubit_expectations() {
        let z = PauliSum::from_words(1, [(1.0, "Z")]).unwrap();
        let x = PauliSum::from_words(1, [(1.0, "X")]).unwrap();
        let zero = StateVector::basis_state(1, "0").unwrap();
        assert!((z.expectation(&zero).unwrap() - 1.0).abs() < 1e-15);
        let mut plus = zero.clone();
        plus.apply_gate(gates::h(), &[0], &[]).unwrap();
        assert!((x.expectation(&plus).unwrap() - 1.0).abs() < 1e-15);
        assert!(z.expectation(&StateVector::zero(2).unwrap()).is_err());
    }

    #[test]
    fn one_norm_values() {
        let s = PauliSum::from_words(2, [(0.5, "ZI"), (-0.3, "XX")]).unwrap();
        assert!((s.one_norm() - 0.8).abs() < 1e-15);
        assert!((PauliSum::identity(3, 1.0).one_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_single_qubit_matrices() {
        let z = PauliSum::from_words(1, [(1.0, "Z")]).unwrap().to_dense().unwrap();
        assert_eq!(z, gates::z());
        let x = PauliSum::from_words(1, [(1.0, "X")]).unwrap().to_dense().unwrap();
        assert_eq!(x, gates::x());
        let y = PauliSum::from_words(1, [(1.0, "Y")]).unwrap().to_dense().unwrap();
        assert_eq!(y, gates::y());
        assert!(matches!(
            PauliSum::zero(15).to_dense(),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn words_respect_qubit_order() {
        // "XI": X on qubit 0, which is the most significant index bit.
        let m = PauliSum::from_words(2, [(1.0, "XI")]).unwrap().to_dense().unwrap();
        assert_eq!(m[(2, 0)], c(1.0));
        assert_eq!(m[(1, 0)], c(0.0));
    }

    #[test]
    fn apply_on_basis_states() {
        let z = PauliSum::from_words(1, [(1.0, "Z")]).unwrap();
        let x = PauliSum::from_words(1, [(1.0, "X")]).unwrap();
        let zero = StateVector::basis_state(1, "0").unwrap();
        assert_eq!(z.apply(&zero).unwrap(), zero);
        assert_eq!(x.apply(&zero).unwrap(), StateVector::basis_state(1, "1").unwrap());
    }

    #[test]
    fn pauli_products_match_matrices() {
        for a in ["X", "Y", "Z", "I"] {
            for b in ["X", "Y", "Z", "I"] {
                let pa = PauliString::from_word(a).unwrap();
                let pb = PauliString::from_word(b).unwrap();
                let (phase, p) = pa.multiply(&pb);
                let lhs = PauliSum::from_words(1, [(1.0, a)]).unwrap().to_dense().unwrap()
                    * PauliSum::from_words(1, [(1.0, b)]).unwrap().to_dense().unwrap();
                let rhs = PauliSum::from_terms(1, [(1.0, p)]).unwrap().to_dense().unwrap() * phase;
                assert!((lhs - rhs).norm() < 1e-15, "{a}{b}");
            }
        }
    }

    #[test]
    fn canonical_order_and_merging() {
        let s = PauliSum::from_words(2, [(1.0, "ZI"), (0.5, "IX"), (0.25, "ZI"), (1e-14, "YY")]).unwrap();
        let words: Vec<String> = s.terms().iter().map(|t| t.string.to_word(2)).collect();
        assert_eq!(words, vec!["IX", "ZI"]);
        assert!((s.terms()[1].coefficient - 1.25).abs() < 1e-15);
        assert_eq!(s.canonicalized(), s);
    }

    #[test]
    fn random_sums_against_dense_oracle() {
        for seed in 0..5 {
            let op = random_sum(4, 12, seed);
            let m = op.to_dense().unwrap();
            assert!((&m - m.adjoint()).norm() < 1e-12);
            let s = random_state(4, 100 + seed);
            let dense = dense_expectation(&m, &s);
            assert!((op.expectation(&s).unwrap() - dense.re).abs() < 1e-10);
            let applied = op.apply(&s).unwrap();
            let v = nalgebra::DVector::from_column_slice(s.amplitudes());
            let mv = &m * v;
            for (a, b) in applied.amplitudes().iter().zip(mv.iter()) {
                assert!((a - b).norm() < 1e-10);
            }
            let via_apply = s.inner(&applied).unwrap();
            assert!((via_apply.re - op.expectation(&s).unwrap()).abs() < 1e-10);
            // one-norm bounds the spectral norm
            let eig = m.symmetric_eigenvalues();
            let spectral = eig.iter().fold(0.0f64, |a, e| a.max(e.abs()));
            assert!(op.one_norm() >= spectral - 1e-12);
        }
    }

    #[test]
    fn non_hermitian_products_are_rejected() {
        let x = PauliSum::from_words(1, [(1.0, "X")]).unwrap();
        let z = PauliSum::from_words(1, [(1.0, "Z")]).unwrap();
        assert!(x.product(&z).is_err());
        let sq = x.product(&x).unwrap();
        assert_eq!(sq, PauliSum::identity(1, 1.0));
    }

    proptest! {
        #[test]
        fn expectation_is_additive(seed_a in 0u64..1000, seed_b in 0u64..1000, seed_s in 0u64..1000) {
            let a = random_sum(3, 6, seed_a);
            let b = random_sum(3, 6, seed_b);
            let s = random_state(3, seed_s);
            let lhs = a.add(&b).unwrap().expectation(&s).unwrap();
            let rhs = a.expectation(&s).unwrap() + b.expectation(&s).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn canonicalization_is_idempotent_and_preserves_expectation(seed in 0u64..1000) {
            let a = random_sum(3, 20, seed);
            let doubled = PauliSum::from_terms(
                3,
                a.terms().iter().flat_map(|t| [(t.coefficient / 2.0, t.string), (t.coefficient / 2.0, t.string)]).collect::<Vec<_>>(),
            ).unwrap();
            prop_assert_eq!(doubled.canonicalized(), doubled.clone());
            let s = random_state(3, seed + 7);
            prop_assert!((doubled.expectation(&s).unwrap() - a.expectation(&s).unwrap()).abs() < 1e-10);
        }
    }
}
