use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, SymmetricEigen};

use super::{read_register, StateVector};
use crate::error::{Error, Result};
use crate::scalar::{cone, czero, creal, Complex, Real};

/// Widest density matrix that may be materialised densely.
const DENSE_MAX_QUBITS: usize = 12;

/// A possibly sub-normalised density operator, stored as its nonzero entries.
///
/// Sub-normalised operators (trace below one) represent a state weighted by the
/// probability of the branch it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real> {
    num_qubits: usize,
    entries: BTreeMap<(u64, u64), Complex<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// The zero operator (trace 0).
    pub fn null(num_qubits: usize) -> Self {
        DensityMatrix { num_qubits, entries: BTreeMap::new() }
    }

    /// `|0><0|`.
    pub fn zero_state(num_qubits: usize) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert((0, 0), cone());
        DensityMatrix { num_qubits, entries }
    }

    /// `|v><v|` for a computational basis state.
    pub fn basis(num_qubits: usize, value: u64) -> Result<Self> {
        if num_qubits < 64 && value >> num_qubits != 0 {
            return Err(Error::domain("basis index", format!("{value} needs more than {num_qubits} qubits")));
        }
        let mut entries = BTreeMap::new();
        entries.insert((value, value), cone());
        Ok(DensityMatrix { num_qubits, entries })
    }

    pub fn pure(state: &StateVector<T>) -> Self {
        let support = state.support();
        let mut entries = BTreeMap::new();
        for &(i, a) in support {
            for &(j, b) in support {
                entries.insert((i, j), a * b.conj());
            }
        }
        DensityMatrix { num_qubits: state.num_qubits(), entries }
    }

    /// Partial trace of `|state><state|` onto `keep` (in register order).
    pub fn reduced(state: &StateVector<T>, keep: &[usize]) -> Result<Self> {
        if let Some(&w) = keep.iter().find(|&&w| w >= state.num_qubits()) {
            return Err(Error::config(format!("wire {w} outside a {}-qubit state", state.num_qubits())));
        }
        Ok(Self::reduce_amplitudes(state.support().iter().copied(), keep))
    }

    /// Partial trace onto `keep` of the (possibly unnormalised) vector with
    /// these amplitudes.
    pub(crate) fn reduce_amplitudes(amps: impl Iterator<Item = (u64, Complex<T>)>, keep: &[usize]) -> Self {
        let mask = keep.iter().fold(0u64, |m, &w| m | (1u64 << w));
        let mut groups: BTreeMap<u64, Vec<(u64, Complex<T>)>> = BTreeMap::new();
        for (i, a) in amps {
            groups.entry(i & !mask).or_default().push((read_register(i, keep), a));
        }
        let mut entries: BTreeMap<(u64, u64), Complex<T>> = BTreeMap::new();
        for group in groups.values() {
            for &(i, a) in group {
                for &(j, b) in group {
                    *entries.entry((i, j)).or_insert_with(czero) += a * b.conj();
                }
            }
        }
        DensityMatrix { num_qubits: keep.len(), entries }
    }

    pub fn from_dense(matrix: &DMatrix<Complex<T>>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() || !dim.is_power_of_two() {
            return Err(Error::config(format!("{}x{} is not a qubit operator", dim, matrix.ncols())));
        }
        let mut entries = BTreeMap::new();
        for r in 0..dim {
            for c in 0..dim {
                let v = matrix[(r, c)];
                if v != czero() {
                    entries.insert((r as u64, c as u64), v);
                }
            }
        }
        Ok(DensityMatrix { num_qubits: dim.trailing_zeros() as usize, entries })
    }

    pub fn to_dense(&self) -> Result<DMatrix<Complex<T>>> {
        if self.num_qubits > DENSE_MAX_QUBITS {
            return Err(Error::config(format!(
                "dense view of a {}-qubit operator exceeds cap {DENSE_MAX_QUBITS}",
                self.num_qubits
            )));
        }
        let dim = 1usize << self.num_qubits;
        let mut m = DMatrix::from_element(dim, dim, czero());
        for (&(r, c), &v) in &self.entries {
            m[(r as usize, c as usize)] = v;
        }
        Ok(m)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn entry(&self, row: u64, col: u64) -> Complex<T> {
        self.entries.get(&(row, col)).copied().unwrap_or_else(czero)
    }

    /// Nonzero entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = ((u64, u64), Complex<T>)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn trace(&self) -> T {
        self.entries.iter().filter(|((r, c), _)| r == c).fold(T::zero(), |acc, (_, v)| acc + v.re)
    }

    /// Diagonal of the operator, i.e. the computational-basis distribution
    /// (scaled by the trace).
    pub fn diagonal(&self) -> BTreeMap<u64, T> {
        self.entries.iter().filter(|((r, c), _)| r == c).map(|(&(r, _), v)| (r, v.re)).collect()
    }

    pub fn scaled(&self, w: T) -> Self {
        let w = creal(w);
        DensityMatrix { num_qubits: self.num_qubits, entries: self.entries.iter().map(|(&k, &v)| (k, v * w)).collect() }
    }

    /// `self += w * other`.
    pub fn add_scaled(&mut self, other: &Self, w: T) -> Result<()> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::config(format!(
                "cannot add a {}-qubit operator to a {}-qubit one",
                other.num_qubits, self.num_qubits
            )));
        }
        let w = creal(w);
        for (&k, &v) in &other.entries {
            *self.entries.entry(k).or_insert_with(czero) += v * w;
        }
        Ok(())
    }

    /// Rescales to unit trace; `None` for the zero operator.
    pub fn normalized(&self) -> Option<Self> {
        let tr = self.trace();
        (tr > T::zero()).then(|| self.scaled(T::one() / tr))
    }

    /// Tensor product with `other` placed on the higher qubits.
    pub fn kron(&self, other: &Self) -> Self {
        let shift = self.num_qubits;
        let mut entries = BTreeMap::new();
        for (&(r1, c1), &a) in &self.entries {
            for (&(r2, c2), &b) in &other.entries {
                entries.insert((r1 | (r2 << shift), c1 | (c2 << shift)), a * b);
            }
        }
        DensityMatrix { num_qubits: self.num_qubits + other.num_qubits, entries }
    }

    /// Indices of rows or columns holding a nonzero entry, and the principal
    /// submatrix on them. Every eigenvalue outside the submatrix is zero.
    pub fn support_matrix(&self) -> (Vec<u64>, DMatrix<Complex<T>>) {
        let idx: Vec<u64> =
            self.entries.keys().flat_map(|&(r, c)| [r, c]).collect::<BTreeSet<_>>().into_iter().collect();
        let pos: BTreeMap<u64, usize> = idx.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let mut m = DMatrix::from_element(idx.len(), idx.len(), czero());
        for (&(r, c), &v) in &self.entries {
            m[(pos[&r], pos[&c])] = v;
        }
        (idx, m)
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.entries.iter().all(|(&(r, c), &v)| (v - self.entry(c, r).conj()).norm_sqr() <= tol * tol)
    }

    /// Eigenvalues of the Hermitian part on the support, ascending. Zero
    /// eigenvalues off the support are not listed.
    pub fn support_eigenvalues(&self) -> Vec<T> {
        let (_, m) = self.support_matrix();
        if m.nrows() == 0 {
            return Vec::new();
        }
        let herm = (&m + m.adjoint()) * creal(T::lit(0.5));
        let mut ev: Vec<T> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalue"));
        ev
    }

    pub fn min_eigenvalue(&self) -> T {
        let ev = self.support_eigenvalues();
        let has_implicit_zero = (ev.len() as u128) < (1u128 << self.num_qubits);
        let min = ev.first().copied().unwrap_or_else(T::zero);
        if has_implicit_zero {
            min.min(T::zero())
        } else {
            min
        }
    }

    /// Sum of absolute eigenvalues.
    pub fn trace_norm(&self) -> T {
        self.support_eigenvalues().into_iter().fold(T::zero(), |acc, e| acc + e.abs())
    }

    /// Trace-norm distance `||self - other||_1`.
    pub fn distance(&self, other: &Self) -> T {
        let mut diff = self.clone();
        if diff.add_scaled(other, -T::one()).is_err() {
            return T::max_value().unwrap_or_else(T::one);
        }
        diff.trace_norm()
    }

    /// Hermitian within `EXACT_TOL`, positive semidefinite within `EIGEN_TOL`,
    /// and trace within `EXACT_TOL` of `expected_trace`.
    pub fn validate(&self, expected_trace: T) -> Result<()> {
        if !self.is_hermitian(T::exact_tol()) {
            return Err(Error::domain("density matrix", "not Hermitian"));
        }
        let tr = self.trace();
        if (tr - expected_trace).abs() > T::exact_tol() {
            return Err(Error::domain("density matrix", format!("trace {tr} differs from {expected_trace}")));
        }
        let min = self.min_eigenvalue();
        if min < -T::eigen_tol() {
            return Err(Error::domain("density matrix", format!("negative eigenvalue {min}")));
        }
        Ok(())
    }
}

/// Convex combination `sum_i w_i rho_i`, optionally rescaled to unit trace.
pub fn mix<T: Real>(branches: &[(T, DensityMatrix<T>)], renormalize: bool) -> Result<DensityMatrix<T>> {
    let Some((_, first)) = branches.first() else {
        return Err(Error::domain("mixture", "no branches"));
    };
    let mut total = T::zero();
    let mut out = DensityMatrix::null(first.num_qubits());
    for (w, rho) in branches {
        if *w < T::zero() {
            return Err(Error::domain("mixture weight", format!("{w} is negative")));
        }
        total += *w;
        out.add_scaled(rho, *w)?;
    }
    if total > T::one() + T::exact_tol() {
        return Err(Error::domain("mixture weights", format!("sum {total} exceeds 1")));
    }
    if renormalize {
        out.normalized().ok_or_else(|| Error::domain("mixture", "zero total weight"))
    } else {
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plus() -> StateVector<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_amplitudes(1, vec![(0, Complex::new(s, 0.0)), (1, Complex::new(s, 0.0))]).unwrap()
    }

    fn minus() -> StateVector<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_amplitudes(1, vec![(0, Complex::new(s, 0.0)), (1, Complex::new(-s, 0.0))]).unwrap()
    }

    #[test]
    fn single_branch_mix_is_identity() {
        let rho = DensityMatrix::pure(&plus());
        assert_eq!(mix(&[(1.0, rho.clone())], false).unwrap(), rho);
    }

    #[test]
    fn equal_mix_of_basis_states_is_maximally_mixed() {
        let m = mix(&[(0.5, DensityMatrix::basis(1, 0).unwrap()), (0.5, DensityMatrix::basis(1, 1).unwrap())], false)
            .unwrap();
        assert_eq!(m.entry(0, 0).re, 0.5);
        assert_eq!(m.entry(1, 1).re, 0.5);
        assert_eq!(m.entry(0, 1), czero());
    }

    #[test]
    fn plus_minus_mix_off_diagonal() {
        let m = mix(&[(0.25, DensityMatrix::pure(&plus())), (0.75, DensityMatrix::pure(&minus()))], false).unwrap();
        // 1/4 * 1/2 - 3/4 * 1/2
        assert!((m.entry(0, 1).re + 0.25).abs() < 1e-12);
        assert!((m.entry(1, 0).re + 0.25).abs() < 1e-12);
        assert!((m.trace() - 1.0).abs() < 1e-12);
        m.validate(1.0).unwrap();
    }

    #[test]
    fn mix_rejects_negative_and_excess_weights() {
        let r = DensityMatrix::<f64>::zero_state(1);
        assert!(matches!(mix(&[(-0.1, r.clone())], false), Err(Error::Domain { .. })));
        assert!(mix(&[(0.7, r.clone()), (0.7, r)], false).is_err());
    }

    #[test]
    fn reduced_state_of_bell_pair_is_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell =
            StateVector::from_amplitudes(2, vec![(0, Complex::new(s, 0.0)), (3, Complex::new(s, 0.0))]).unwrap();
        let r = DensityMatrix::reduced(&bell, &[1]).unwrap();
        assert_eq!(r.num_qubits(), 1);
        assert!((r.entry(0, 0).re - 0.5).abs() < 1e-12);
        assert!(r.entry(0, 1).norm_sqr() < 1e-24);
        r.validate(1.0).unwrap();
    }

    #[test]
    fn trace_norm_and_eigenvalues() {
        let d = DensityMatrix::pure(&plus()).distance(&DensityMatrix::pure(&minus()));
        assert!((d - 2.0).abs() < 1e-12);
        assert_eq!(DensityMatrix::<f64>::basis(2, 1).unwrap().min_eigenvalue(), 0.0);
        let mut bad = DensityMatrix::<f64>::basis(1, 0).unwrap();
        bad.add_scaled(&DensityMatrix::basis(1, 1).unwrap(), -0.5).unwrap();
        assert!(bad.validate(0.5).is_err());
    }

    #[test]
    fn kron_places_second_factor_high() {
        let a = DensityMatrix::<f64>::basis(1, 1).unwrap();
        let b = DensityMatrix::<f64>::basis(2, 2).unwrap();
        let k = a.kron(&b);
        assert_eq!(k.num_qubits(), 3);
        assert_eq!(k.entry(0b101, 0b101).re, 1.0);
    }
}
