//! Exact dense references: full diagonalization, sector labels and the
//! sector-restricted (CASCI-equivalent) energies.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{PauliSum, DENSE_LIMIT};
use crate::spinops::{number_operators, s_squared, spin_from_s_squared, HalfInt, SpinSector};
use crate::statevector::{Circuit, Gate, StateVector};

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// Largest allowed `‖Av - ⟨A⟩v‖` for an accepted label.
pub const LABEL_RESIDUAL: f64 = 1e-6;

/// Full matrix of a gate embedded in an `n_qubits` register, built from
/// index arithmetic rather than the simulator kernel.
pub fn embed_gate(gate: &Gate, n_qubits: usize) -> Result<DMatrix<Complex64>> {
    if n_qubits > DENSE_LIMIT || gate.max_qubit() >= n_qubits {
        return Err(Error::arg(format!(
            "cannot embed a gate on qubit {} in {n_qubits} dense qubits",
            gate.max_qubit()
        )));
    }
    let dim = 1usize << n_qubits;
    let mask = |q: usize| 1usize << (n_qubits - 1 - q);
    let t_masks: Vec<usize> = gate.targets().iter().map(|&q| mask(q)).collect();
    let c_all: usize = gate.controls().iter().map(|&q| mask(q)).sum();
    let t_all: usize = t_masks.iter().sum();
    let k = t_masks.len();
    let m = gate.matrix();
    let mut out = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        if col & c_all != c_all {
            out[(col, col)] = Complex64::new(1.0, 0.0);
            continue;
        }
        let t_in = t_masks
            .iter()
            .fold(0, |acc, &tm| (acc << 1) | usize::from(col & tm != 0));
        for t_out in 0..1usize << k {
            let mut row = col & !t_all;
            for (j, &tm) in t_masks.iter().enumerate() {
                if t_out >> (k - 1 - j) & 1 == 1 {
                    row |= tm;
                }
            }
            out[(row, col)] = m[(t_out, t_in)];
        }
    }
    Ok(out)
}

/// Dense unitary of a whole circuit (later gates multiply on the left).
pub fn dense_circuit(circuit: &Circuit) -> Result<DMatrix<Complex64>> {
    let n = circuit.n_qubits();
    if n > DENSE_LIMIT {
        return Err(Error::ResourceLimit {
            what: "dense circuit",
            n_qubits: n,
            limit: DENSE_LIMIT,
        });
    }
    let dim = 1usize << n;
    let mut u = DMatrix::identity(dim, dim);
    for g in circuit.gates() {
        u = embed_gate(g, n)? * u;
    }
    Ok(u)
}

/// `exp(iθA)` for Hermitian `A`.
pub fn expm_i_hermitian(a: &DMatrix<Complex64>, theta: f64) -> DMatrix<Complex64> {
    let eig = a.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, theta * l)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

pub fn commutator_norm(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a * b - b * a).norm()
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub n_qubits: usize,
    /// Ascending.
    pub energies: Vec<f64>,
    /// Column `k` belongs to `energies[k]`.
    pub vectors: DMatrix<Complex64>,
}

pub fn exact_spectrum(h: &PauliSum) -> Result<Spectrum> {
    let m = h.to_dense()?;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).into_owned())
            .collect::<Vec<_>>(),
    );
    Ok(Spectrum {
        n_qubits: h.n_qubits(),
        energies,
        vectors,
    })
}

#[derive(Clone, Debug)]
pub struct LabeledEigenstate {
    pub energy: f64,
    pub vector: StateVector,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub spin: HalfInt,
    /// Size of the degenerate energy cluster the state belongs to.
    pub degeneracy: usize,
}

impl LabeledEigenstate {
    pub fn m_z(&self) -> HalfInt {
        HalfInt::from_twice(self.n_alpha as i32 - self.n_beta as i32)
    }
}

/// Rotates the columns of `v` (spanning an invariant subspace) to diagonalise
/// each operator in turn, splitting into sub-blocks between operators.
fn refine(v: DMatrix<Complex64>, ops: &[&DMatrix<Complex64>]) -> Vec<DVector<Complex64>> {
    let Some((op, rest)) = ops.split_first() else {
        return v.column_iter().map(|c| c.into_owned()).collect();
    };
    if v.ncols() == 1 {
        return refine(v, rest);
    }
    let proj = v.adjoint() * *op * &v;
    let proj = (&proj + proj.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = proj.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let rotated = &v * &eig.eigenvectors;
    let mut out = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len()
            && (eig.eigenvalues[order[end]] - eig.eigenvalues[order[start]]).abs() < 1e-6
        {
            end += 1;
        }
        let block = DMatrix::from_columns(
            &order[start..end]
                .iter()
                .map(|&k| rotated.column(k).into_owned())
                .collect::<Vec<_>>(),
        );
        out.extend(refine(block, rest));
        start = end;
    }
    out
}

fn label_value(op: &DMatrix<Complex64>, v: &DVector<Complex64>) -> Result<f64> {
    let av = op * v;
    let value = v.dotc(&av).re;
    let residual = (av - v * Complex64::new(value, 0.0)).norm();
    if residual > LABEL_RESIDUAL {
        return Err(Error::LabelingFailure(format!(
            "eigenvector is not an eigenstate of a label operator (residual {residual:.2e})"
        )));
    }
    Ok(value)
}

fn nearest_count(x: f64) -> Result<usize> {
    if (x - x.round()).abs() > LABEL_RESIDUAL || x < -LABEL_RESIDUAL {
        return Err(Error::LabelingFailure(format!("non-integer occupation {x}")));
    }
    Ok(x.round() as usize)
}

/// Labels every eigenvector of a spin-free, number-conserving spectrum.
pub fn sector_labels(spectrum: &Spectrum, n_spatial: usize) -> Result<Vec<LabeledEigenstate>> {
    let n = spectrum.n_qubits;
    if n != 2 * n_spatial {
        return Err(Error::arg(format!(
            "{n}-qubit spectrum labelled with {n_spatial} spatial orbitals"
        )));
    }
    let (na, nb) = number_operators(n_spatial)?;
    let na = na.to_dense()?;
    let nb = nb.to_dense()?;
    let s2 = s_squared(n_spatial)?.to_dense()?;
    let ops = [&na, &nb, &s2];

    let mut out = Vec::with_capacity(spectrum.energies.len());
    let mut start = 0;
    let e = &spectrum.energies;
    while start < e.len() {
        let mut end = start + 1;
        while end < e.len() && e[end] - e[end - 1] < DEGENERACY_GAP {
            end += 1;
        }
        let block = spectrum.vectors.columns(start, end - start).into_owned();
        for v in refine(block, &ops) {
            let n_alpha = nearest_count(label_value(&na, &v)?)?;
            let n_beta = nearest_count(label_value(&nb, &v)?)?;
            let s2v = label_value(&s2, &v)?;
            let spin = spin_from_s_squared(s2v);
            let sv = spin.value();
            if (s2v - sv * (sv + 1.0)).abs() > LABEL_RESIDUAL {
                return Err(Error::LabelingFailure(format!("<S^2> = {s2v} is not S(S+1)")));
            }
            let energy = v.dotc(&(spectrum_matrix_free(spectrum, &v))).re;
            out.push(LabeledEigenstate {
                energy,
                vector: StateVector::from_amplitudes(n, v.iter().copied().collect())?,
                n_alpha,
                n_beta,
                spin,
                degeneracy: end - start,
            });
        }
        start = end;
    }
    Ok(out)
}

/// `H v` reconstructed from the spectral decomposition.
fn spectrum_matrix_free(spectrum: &Spectrum, v: &DVector<Complex64>) -> DVector<Complex64> {
    let coeffs = spectrum.vectors.adjoint() * v;
    let scaled = DVector::from_iterator(
        coeffs.len(),
        coeffs
            .iter()
            .zip(&spectrum.energies)
            .map(|(c, e)| c * *e),
    );
    &spectrum.vectors * scaled
}

/// Lowest sector-matching energies.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub energies: Vec<f64>,
    /// `false` when fewer states matched than were requested.
    pub complete: bool,
}

pub fn matches_sector(state: &LabeledEigenstate, sector: &SpinSector) -> bool {
    state.n_alpha == sector.n_alpha()
        && state.n_beta == sector.n_beta()
        && state.spin == sector.s_target()
}

pub fn casci_reference(labels: &[LabeledEigenstate], sector: &SpinSector, n_states: usize) -> Reference {
    let mut energies: Vec<f64> = labels
        .iter()
        .filter(|s| matches_sector(s, sector))
        .map(|s| s.energy)
        .collect();
    energies.sort_by(f64::total_cmp);
    energies.truncate(n_states);
    Reference {
        complete: energies.len() == n_states,
        energies,
    }
}

/// The `index`-th lowest eigenstate with the given labels.
pub fn find_eigenstate(
    labels: &[LabeledEigenstate],
    n_alpha: usize,
    n_beta: usize,
    spin: HalfInt,
    index: usize,
) -> Option<&LabeledEigenstate> {
    labels
        .iter()
        .filter(|s| s.n_alpha == n_alpha && s.n_beta == n_beta && s.spin == spin)
        .nth(index)
}

/// Convenience: spectrum plus labels in one call.
pub fn labelled_spectrum(h: &PauliSum, n_spatial: usize) -> Result<Vec<LabeledEigenstate>> {
    sector_labels(&exact_spectrum(h)?, n_spatial)
}
