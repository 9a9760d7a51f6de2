//! Spin observables under Jordan–Wigner on interleaved qubits, and the
//! Wigner-d pass probabilities of the `S_x` screen.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{ComplexPauliSum, Pauli, PauliString, PauliSum};

/// A non-negative or negative multiple of 1/2, stored as twice its value.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);

    pub fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub fn integer(v: i32) -> Self {
        HalfInt(2 * v)
    }

    pub fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }
}

impl TryFrom<f64> for HalfInt {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        let twice = 2.0 * v;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-9 || twice.abs() > 1e6 {
            return Err(Error::arg(format!("{v} is not a multiple of 1/2")));
        }
        Ok(HalfInt(twice.round() as i32))
    }
}

impl From<HalfInt> for f64 {
    fn from(h: HalfInt) -> f64 {
        h.value()
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Electron counts per spin plus the total spin being targeted.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SpinSector {
    n_alpha: usize,
    n_beta: usize,
    s_target: HalfInt,
}

impl SpinSector {
    /// Sector with `S_target = |m_z|`, the lowest spin compatible with the counts.
    pub fn new(n_alpha: usize, n_beta: usize) -> Result<Self> {
        let m_z = HalfInt(n_alpha as i32 - n_beta as i32).abs();
        Self::with_target(n_alpha, n_beta, HalfInt(m_z.0))
    }

    pub fn with_target(n_alpha: usize, n_beta: usize, s_target: HalfInt) -> Result<Self> {
        if !(n_alpha + n_beta).is_multiple_of(2) {
            return Err(Error::UnsupportedSector(format!(
                "odd electron count {} (half-integer spin)",
                n_alpha + n_beta
            )));
        }
        let s = Self {
            n_alpha,
            n_beta,
            s_target,
        };
        if s_target < s.m_z().abs() {
            return Err(Error::arg(format!(
                "target spin {s_target} is below |m_z| = {}",
                s.m_z().abs()
            )));
        }
        if !s_target.is_integer() {
            return Err(Error::UnsupportedSector(format!("half-integer target spin {s_target}")));
        }
        Ok(s)
    }

    /// The `m_z = S` sector of a spin-`S` target for `n_elec` electrons.
    pub fn for_target_spin(n_elec: usize, s_target: HalfInt) -> Result<Self> {
        if s_target.twice() < 0 || s_target.twice() as usize > n_elec {
            return Err(Error::UnsupportedSector(format!(
                "spin {s_target} is impossible with {n_elec} electrons"
            )));
        }
        let two_s = s_target.twice() as usize;
        if !(n_elec + two_s).is_multiple_of(2) {
            return Err(Error::UnsupportedSector(format!(
                "spin {s_target} is incompatible with {n_elec} electrons"
            )));
        }
        Self::with_target((n_elec + two_s) / 2, (n_elec - two_s) / 2, s_target)
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn n_elec(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    pub fn m_z(&self) -> HalfInt {
        HalfInt(self.n_alpha as i32 - self.n_beta as i32)
    }

    pub fn s_target(&self) -> HalfInt {
        self.s_target
    }

    pub fn check_fits(&self, n_spatial: usize) -> Result<()> {
        if self.n_alpha > n_spatial || self.n_beta > n_spatial {
            return Err(Error::arg(format!(
                "sector (n_alpha={}, n_beta={}) does not fit {n_spatial} spatial orbitals",
                self.n_alpha, self.n_beta
            )));
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

fn alpha(i: usize) -> usize {
    2 * i
}

fn beta(i: usize) -> usize {
    2 * i + 1
}

/// Jordan–Wigner `a†_p` (`dagger`) or `a_p`.
fn ladder(p: usize, dagger: bool) -> ComplexPauliSum {
    let mut x = PauliString::identity();
    for q in 0..p {
        x.set(q, Some(Pauli::Z));
    }
    let mut y = x;
    x.set(p, Some(Pauli::X));
    y.set(p, Some(Pauli::Y));
    let sign = if dagger { -1.0 } else { 1.0 };
    let mut op = ComplexPauliSum::single(Complex64::new(0.5, 0.0), x);
    op.add_scaled(
        &ComplexPauliSum::single(Complex64::new(0.0, 0.5 * sign), y),
        Complex64::new(1.0, 0.0),
    );
    op
}

/// `a†_p a_q`.
fn hop(p: usize, q: usize) -> ComplexPauliSum {
    ladder(p, true).mul(&ladder(q, false))
}

fn check_spatial(n_spatial: usize) -> Result<()> {
    if n_spatial == 0 || 2 * n_spatial > PauliString::MAX_QUBITS {
        return Err(Error::arg(format!("unsupported orbital count {n_spatial}")));
    }
    Ok(())
}

/// Total `S_axis` on `2·n_spatial` qubits.
pub fn spin_component(axis: Axis, n_spatial: usize) -> Result<PauliSum> {
    check_spatial(n_spatial)?;
    let mut acc = ComplexPauliSum::default();
    let half = Complex64::new(0.5, 0.0);
    for i in 0..n_spatial {
        let up = hop(alpha(i), beta(i));
        let down = hop(beta(i), alpha(i));
        match axis {
            Axis::X => {
                acc.add_scaled(&up, half);
                acc.add_scaled(&down, half);
            }
            Axis::Y => {
                // (S+ - S-) / 2i
                acc.add_scaled(&up, Complex64::new(0.0, -0.5));
                acc.add_scaled(&down, Complex64::new(0.0, 0.5));
            }
            Axis::Z => {
                acc.add_scaled(&hop(alpha(i), alpha(i)), half);
                acc.add_scaled(&hop(beta(i), beta(i)), -half);
            }
        }
    }
    acc.into_hermitian(2 * n_spatial)
}

/// `S² = S_x² + S_y² + S_z²`.
pub fn s_squared(n_spatial: usize) -> Result<PauliSum> {
    let mut total = PauliSum::zero(2 * n_spatial);
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        let s = spin_component(axis, n_spatial)?;
        total = total.add(&s.product(&s)?)?;
    }
    Ok(total)
}

/// `(N_α, N_β)`.
pub fn number_operators(n_spatial: usize) -> Result<(PauliSum, PauliSum)> {
    check_spatial(n_spatial)?;
    let n = 2 * n_spatial;
    let count = |qubit: fn(usize) -> usize| {
        let mut acc = ComplexPauliSum::default();
        for i in 0..n_spatial {
            acc.add_scaled(&hop(qubit(i), qubit(i)), Complex64::new(1.0, 0.0));
        }
        acc.into_hermitian(n)
    };
    Ok((count(alpha)?, count(beta)?))
}

pub fn total_number(n_spatial: usize) -> Result<PauliSum> {
    let (a, b) = number_operators(n_spatial)?;
    a.add(&b)
}

/// `S(S+1)` inverted: the spin whose Casimir is closest to `s2`.
pub fn spin_from_s_squared(s2: f64) -> HalfInt {
    let s = (-1.0 + (1.0 + 4.0 * s2.max(0.0)).sqrt()) / 2.0;
    HalfInt((2.0 * s).round() as i32)
}

fn check_projection(s: HalfInt, m: HalfInt) -> Result<()> {
    if s.0 < 0 || m.0.abs() > s.0 || (s.0 - m.0) % 2 != 0 {
        return Err(Error::arg(format!("projection {m} is not valid for spin {s}")));
    }
    Ok(())
}

/// `J_y` in the basis `|S, m⟩`, `m = S, S-1, …, -S`.
fn j_y(s: HalfInt) -> DMatrix<Complex64> {
    let dim = s.0 as usize + 1;
    let j = s.value();
    let mut out = DMatrix::zeros(dim, dim);
    for k in 1..dim {
        // row k-1 holds m+1 where column k holds m
        let m = j - k as f64;
        let up = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        // J_y = (J+ - J-) / 2i
        out[(k - 1, k)] = Complex64::new(0.0, -up / 2.0);
        out[(k, k - 1)] = Complex64::new(0.0, up / 2.0);
    }
    out
}

/// The full `d^S(β)` matrix, rows and columns ordered `m = S … -S`.
pub fn wigner_d_matrix(s: HalfInt, beta: f64) -> Result<DMatrix<f64>> {
    check_projection(s, s)?;
    let eig = j_y(s).symmetric_eigen();
    let phases = DMatrix::from_diagonal(
        &eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -beta * l)),
    );
    let v = &eig.eigenvectors;
    let d = v * phases * v.adjoint();
    Ok(d.map(|z| z.re))
}

fn m_index(s: HalfInt, m: HalfInt) -> usize {
    ((s.0 - m.0) / 2) as usize
}

/// `d^S_{m_x, m_z}(π/2) = ⟨S m_x| e^{-iπ/2 J_y} |S m_z⟩`.
pub fn wigner_d_half_pi(s: HalfInt, m_x: HalfInt, m_z: HalfInt) -> Result<f64> {
    check_projection(s, m_x)?;
    check_projection(s, m_z)?;
    let d = wigner_d_matrix(s, std::f64::consts::FRAC_PI_2)?;
    Ok(d[(m_index(s, m_x), m_index(s, m_z))])
}

fn factorial(n: i32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Closed-form factorial sum for `d^S_{m', m}(β)`.
pub fn wigner_d_factorial(s: HalfInt, m_prime: HalfInt, m: HalfInt, beta: f64) -> Result<f64> {
    check_projection(s, m_prime)?;
    check_projection(s, m)?;
    // All of j±m, j±m' are integers; work in those.
    let jpm = (s.0 + m.0) / 2;
    let jmm = (s.0 - m.0) / 2;
    let jpmp = (s.0 + m_prime.0) / 2;
    let jmmp = (s.0 - m_prime.0) / 2;
    let mp_minus_m = (m_prime.0 - m.0) / 2;
    let pref = (factorial(jpmp) * factorial(jmmp) * factorial(jpm) * factorial(jmm)).sqrt();
    let (sin, cos) = (beta / 2.0).sin_cos();
    let two_j = s.0;
    let mut total = 0.0;
    for k in 0..=two_j {
        let a = jpm - k;
        let b = jmmp - k;
        let c = k + mp_minus_m;
        if a < 0 || b < 0 || c < 0 {
            continue;
        }
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        let cos_pow = two_j - 2 * k - mp_minus_m;
        let sin_pow = 2 * k + mp_minus_m;
        total += sign * pref / (factorial(a) * factorial(k) * factorial(b) * factorial(c))
            * cos.powi(cos_pow)
            * sin.powi(sin_pow);
    }
    Ok(total)
}

/// Probability that a screened `|S, m_z⟩` reads `|m_x| ≤ |m_z|`.
pub fn pass_probability(s: HalfInt, m_z: HalfInt) -> Result<f64> {
    check_projection(s, m_z)?;
    let d = wigner_d_matrix(s, std::f64::consts::FRAC_PI_2)?;
    let col = m_index(s, m_z);
    let limit = m_z.abs();
    Ok((0..=s.0 as usize)
        .filter(|&row| HalfInt(s.0 - 2 * row as i32).abs() <= limit)
        .map(|row| d[(row, col)].powi(2))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::StateVector;

    fn h(v: f64) -> HalfInt {
        HalfInt::try_from(v).unwrap()
    }

    fn commutator(a: &PauliSum, b: &PauliSum) -> DMatrix<Complex64> {
        let (a, b) = (a.to_dense().unwrap(), b.to_dense().unwrap());
        &a * &b - &b * &a
    }

    #[test]
    fn halfint_parsing_and_display() {
        assert_eq!(h(1.5).twice(), 3);
        assert_eq!(h(-2.0).to_string(), "-2");
        assert_eq!(h(0.5).to_string(), "1/2");
        assert!(HalfInt::try_from(0.3).is_err());
    }

    #[test]
    fn sector_construction() {
        let s = SpinSector::new(1, 1).unwrap();
        assert_eq!(s.m_z(), HalfInt::ZERO);
        assert!(SpinSector::new(2, 1).is_err());
        let t = SpinSector::for_target_spin(4, h(1.0)).unwrap();
        assert_eq!((t.n_alpha(), t.n_beta()), (3, 1));
        assert!(SpinSector::for_target_spin(2, h(2.0)).is_err());
        assert!(SpinSector::with_target(2, 0, HalfInt::ZERO).is_err());
        assert!(SpinSector::new(4, 0).unwrap().check_fits(3).is_err());
    }

    #[test]
    fn s_z_single_orbital() {
        let sz = spin_component(Axis::Z, 1).unwrap().to_dense().unwrap();
        let diag: Vec<f64> = (0..4).map(|i| sz[(i, i)].re).collect();
        assert_eq!(diag, vec![0.0, -0.5, 0.5, 0.0]);
        assert!((sz.clone() - DMatrix::from_diagonal(&sz.diagonal())).norm() < 1e-15);
    }

    #[test]
    fn spin_algebra() {
        for n in 1..=3 {
            let sx = spin_component(Axis::X, n).unwrap();
            let sy = spin_component(Axis::Y, n).unwrap();
            let sz = spin_component(Axis::Z, n).unwrap();
            let i = Complex64::new(0.0, 1.0);
            assert!((commutator(&sx, &sy) - sz.to_dense().unwrap() * i).norm() < 1e-11);
            assert!((commutator(&sy, &sz) - sx.to_dense().unwrap() * i).norm() < 1e-11);
            assert!((commutator(&sz, &sx) - sy.to_dense().unwrap() * i).norm() < 1e-11);
        }
    }

    #[test]
    fn s_squared_spectrum() {
        let one = s_squared(1).unwrap().to_dense().unwrap();
        let mut ev: Vec<f64> = one.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        // empty and doubly occupied are singlets, the two singly occupied states a doublet
        for (a, b) in ev.iter().zip([0.0, 0.0, 0.75, 0.75]) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
        for n in 2..=3 {
            let m = s_squared(n).unwrap().to_dense().unwrap();
            for e in m.symmetric_eigenvalues().iter() {
                let s = spin_from_s_squared(*e).value();
                assert!((e - s * (s + 1.0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn s_squared_on_open_shell_pairs() {
        // qubits: 0=1α 1=1β 2=2α 3=2β; |1α 2β⟩ = "1001", |1β 2α⟩ = "0110"
        let s2 = s_squared(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mk = |sign: f64| {
            let mut amps = vec![Complex64::new(0.0, 0.0); 16];
            amps[0b1001] = Complex64::new(r, 0.0);
            amps[0b0110] = Complex64::new(sign * r, 0.0);
            StateVector::from_amplitudes(4, amps).unwrap()
        };
        // JW sign: a†_{1α} a†_{2β} and a†_{1β} a†_{2α} differ by one swap.
        let vals = [s2.expectation(&mk(1.0)).unwrap(), s2.expectation(&mk(-1.0)).unwrap()];
        let mut sorted = vals;
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] - 0.0).abs() < 1e-12 && (sorted[1] - 2.0).abs() < 1e-12, "{vals:?}");
    }

    #[test]
    fn number_operators_on_basis_states() {
        let (na, nb) = number_operators(3).unwrap();
        let r = StateVector::basis_state(6, "110000").unwrap();
        assert_eq!(na.expectation(&r).unwrap(), 1.0);
        assert_eq!(nb.expectation(&r).unwrap(), 1.0);
        let (na1, nb1) = number_operators(1).unwrap();
        let s = StateVector::basis_state(2, "10").unwrap();
        assert_eq!((na1.expectation(&s).unwrap(), nb1.expectation(&s).unwrap()), (1.0, 0.0));
        let sz = spin_component(Axis::Z, 2).unwrap();
        assert_eq!(sz.expectation(&StateVector::basis_state(4, "1100").unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn wigner_d_closed_forms() {
        let d100 = wigner_d_half_pi(h(1.0), h(0.0), h(0.0)).unwrap();
        assert!(d100.abs() < 1e-12);
        let d200 = wigner_d_half_pi(h(2.0), h(0.0), h(0.0)).unwrap();
        assert!((d200 + 0.5).abs() < 1e-12);
        for beta in [0.3, 1.1, 2.5] {
            let d = wigner_d_matrix(h(1.0), beta).unwrap();
            assert!((d[(1, 1)] - beta.cos()).abs() < 1e-12);
            assert!((d[(0, 0)] - (1.0 + beta.cos()) / 2.0).abs() < 1e-12);
            assert!((d[(0, 1)] + beta.sin() / 2f64.sqrt()).abs() < 1e-12);
        }
        assert!(wigner_d_half_pi(h(1.0), h(2.0), h(0.0)).is_err());
    }

    #[test]
    fn wigner_d_two_routes_agree_and_are_orthogonal() {
        for two_s in 0..=10 {
            let s = HalfInt::from_twice(two_s);
            for beta in [std::f64::consts::FRAC_PI_2, 0.7] {
                let d = wigner_d_matrix(s, beta).unwrap();
                assert!((d.transpose() * &d - DMatrix::identity(d.nrows(), d.nrows())).norm() < 1e-12);
                for r in 0..=two_s {
                    for c in 0..=two_s {
                        let mp = HalfInt::from_twice(two_s - 2 * r);
                        let m = HalfInt::from_twice(two_s - 2 * c);
                        let f = wigner_d_factorial(s, mp, m, beta).unwrap();
                        assert!((f - d[(r as usize, c as usize)]).abs() < 1e-10, "S={s} {mp} {m}");
                    }
                }
            }
        }
    }

    #[test]
    fn pass_probability_properties() {
        for two_s in (0..=10).step_by(2) {
            let s = HalfInt::from_twice(two_s);
            assert!((pass_probability(s, s).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((pass_probability(h(2.0), h(0.0)).unwrap() - 0.25).abs() < 1e-12);
        assert!(pass_probability(h(1.0), h(2.0)).is_err());
    }
}
