use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::DensityMatrix;
use crate::error::{Error, Result};
use crate::scalar::{creal, czero, Complex, Real};

/// Widest predicate that may be given as a dense matrix.
pub const PREDICATE_DENSE_MAX_QUBITS: usize = 10;

/// Widest diagonal predicate with a nonzero default weight that `kron` will
/// expand.
const DIAGONAL_EXPAND_MAX_QUBITS: usize = 20;

/// A two-outcome measurement operator `E` with `0 <= E <= I`.
///
/// Classical checks are diagonal: weight `default` everywhere except at the
/// listed basis states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PredicateRecord<T>", into = "PredicateRecord<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum QuantumPredicate<T: Real> {
    Diagonal { num_qubits: usize, default: T, weights: BTreeMap<u64, T> },
    Dense { num_qubits: usize, matrix: DMatrix<Complex<T>> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
enum PredicateRecord<T: Real> {
    Diagonal { num_qubits: usize, default: T, weights: Vec<(u64, T)> },
    Dense { rows: Vec<Vec<Complex<T>>> },
}

impl<T: Real> TryFrom<PredicateRecord<T>> for QuantumPredicate<T> {
    type Error = Error;

    fn try_from(r: PredicateRecord<T>) -> Result<Self> {
        match r {
            PredicateRecord::Diagonal { num_qubits, default, weights } => {
                QuantumPredicate::diagonal(num_qubits, default, weights.into_iter().collect())
            }
            PredicateRecord::Dense { rows } => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::config("dense predicate rows must form a square matrix"));
                }
                QuantumPredicate::dense(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
            }
        }
    }
}

impl<T: Real> From<QuantumPredicate<T>> for PredicateRecord<T> {
    fn from(p: QuantumPredicate<T>) -> Self {
        match p {
            QuantumPredicate::Diagonal { num_qubits, default, weights } => {
                PredicateRecord::Diagonal { num_qubits, default, weights: weights.into_iter().collect() }
            }
            QuantumPredicate::Dense { matrix, .. } => PredicateRecord::Dense {
                rows: (0..matrix.nrows()).map(|r| (0..matrix.ncols()).map(|c| matrix[(r, c)]).collect()).collect(),
            },
        }
    }
}

fn in_unit_interval<T: Real>(w: T) -> bool {
    w >= -T::eigen_tol() && w <= T::one() + T::eigen_tol()
}

impl<T: Real> QuantumPredicate<T> {
    pub fn diagonal(num_qubits: usize, default: T, weights: BTreeMap<u64, T>) -> Result<Self> {
        if let Some(w) = std::iter::once(&default).chain(weights.values()).find(|w| !in_unit_interval(**w)) {
            return Err(Error::domain("predicate weight", format!("{w} outside [0, 1]")));
        }
        if let Some(i) = weights.keys().find(|&&i| num_qubits < 64 && i >> num_qubits != 0) {
            return Err(Error::domain("predicate index", format!("{i} needs more than {num_qubits} qubits")));
        }
        Ok(QuantumPredicate::Diagonal { num_qubits, default, weights })
    }

    /// A dense Hermitian operator; eigenvalues must lie in `[0, 1]` up to
    /// `EIGEN_TOL`.
    pub fn dense(matrix: DMatrix<Complex<T>>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() || !dim.is_power_of_two() {
            return Err(Error::config(format!("{}x{} is not a qubit operator", dim, matrix.ncols())));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        if num_qubits > PREDICATE_DENSE_MAX_QUBITS {
            return Err(Error::config(format!(
                "dense predicate on {num_qubits} qubits exceeds cap {PREDICATE_DENSE_MAX_QUBITS}"
            )));
        }
        let tol = T::exact_tol();
        for r in 0..dim {
            for c in 0..dim {
                if (matrix[(r, c)] - matrix[(c, r)].conj()).norm_sqr() > tol * tol {
                    return Err(Error::domain("predicate", "not Hermitian"));
                }
            }
        }
        let ev = SymmetricEigen::new(matrix.clone()).eigenvalues;
        if let Some(e) = ev.iter().find(|e| !in_unit_interval(**e)) {
            return Err(Error::domain("predicate eigenvalue", format!("{e} outside [0, 1]")));
        }
        Ok(QuantumPredicate::Dense { num_qubits, matrix })
    }

    pub fn identity(num_qubits: usize) -> Self {
        QuantumPredicate::Diagonal { num_qubits, default: T::one(), weights: BTreeMap::new() }
    }

    pub fn zero(num_qubits: usize) -> Self {
        QuantumPredicate::Diagonal { num_qubits, default: T::zero(), weights: BTreeMap::new() }
    }

    /// `|v><v|`.
    pub fn projector(num_qubits: usize, value: u64) -> Result<Self> {
        Self::diagonal(num_qubits, T::zero(), BTreeMap::from([(value, T::one())]))
    }

    /// Projector onto a set of accepted basis states.
    pub fn accepting_set(num_qubits: usize, accepted: impl IntoIterator<Item = u64>) -> Result<Self> {
        Self::diagonal(num_qubits, T::zero(), accepted.into_iter().map(|v| (v, T::one())).collect())
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            QuantumPredicate::Diagonal { num_qubits, .. } | QuantumPredicate::Dense { num_qubits, .. } => *num_qubits,
        }
    }

    /// Diagonal weight `<v|E|v>`.
    pub fn weight(&self, v: u64) -> T {
        match self {
            QuantumPredicate::Diagonal { default, weights, .. } => weights.get(&v).copied().unwrap_or(*default),
            QuantumPredicate::Dense { matrix, .. } => matrix[(v as usize, v as usize)].re,
        }
    }

    /// `E_self (x) E_other` with `other` on the higher qubits. Acceptance of
    /// a product state is the product of acceptances, i.e. an AND of
    /// independent checks.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        let shift = self.num_qubits();
        let num_qubits = shift + other.num_qubits();
        match (self, other) {
            (
                QuantumPredicate::Diagonal { default: da, weights: wa, .. },
                QuantumPredicate::Diagonal { default: db, weights: wb, .. },
            ) => {
                if *da == T::zero() && *db == T::zero() {
                    let weights =
                        wa.iter().flat_map(|(&i, &x)| wb.iter().map(move |(&j, &y)| (i | (j << shift), x * y))).collect();
                    return Ok(QuantumPredicate::Diagonal { num_qubits, default: T::zero(), weights });
                }
                if wa.is_empty() && wb.is_empty() {
                    return Ok(QuantumPredicate::Diagonal { num_qubits, default: *da * *db, weights: BTreeMap::new() });
                }
                if num_qubits > DIAGONAL_EXPAND_MAX_QUBITS {
                    return Err(Error::config(format!("diagonal predicate product on {num_qubits} qubits is too wide")));
                }
                let mut weights = BTreeMap::new();
                for v in 0..(1u64 << num_qubits) {
                    let w = self.weight(v & ((1u64 << shift) - 1)) * other.weight(v >> shift);
                    if w != T::zero() {
                        weights.insert(v, w);
                    }
                }
                Ok(QuantumPredicate::Diagonal { num_qubits, default: T::zero(), weights })
            }
            _ => {
                let a = self.to_dense()?;
                let b = other.to_dense()?;
                // nalgebra's kron puts the left factor on the high index bits
                Self::dense(b.kronecker(&a))
            }
        }
    }

    /// `sum_i w_i E_i` for nonnegative weights; the caller keeps the result
    /// below the identity.
    pub fn weighted_sum(terms: &[(T, &QuantumPredicate<T>)]) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::domain("predicate sum", "no terms"));
        };
        let num_qubits = first.num_qubits();
        if terms.iter().any(|(_, e)| e.num_qubits() != num_qubits) {
            return Err(Error::config("predicate sum over different widths"));
        }
        if terms.iter().all(|(_, e)| matches!(e, QuantumPredicate::Diagonal { .. })) {
            let default = terms.iter().fold(T::zero(), |acc, (w, e)| match e {
                QuantumPredicate::Diagonal { default, .. } => acc + *w * *default,
                QuantumPredicate::Dense { .. } => acc,
            });
            let mut keys: Vec<u64> = terms
                .iter()
                .flat_map(|(_, e)| match e {
                    QuantumPredicate::Diagonal { weights, .. } => weights.keys().copied().collect::<Vec<_>>(),
                    QuantumPredicate::Dense { .. } => Vec::new(),
                })
                .collect();
            keys.sort_unstable();
            keys.dedup();
            let weights =
                keys.into_iter().map(|v| (v, terms.iter().fold(T::zero(), |acc, (w, e)| acc + *w * e.weight(v)))).collect();
            return Self::diagonal(num_qubits, default, weights);
        }
        let mut sum = first.to_dense()? * creal(terms[0].0);
        for (w, e) in &terms[1..] {
            sum += e.to_dense()? * creal(*w);
        }
        Self::dense(sum)
    }

    /// Largest eigenvalue and an eigenstate attaining it. Diagonal operators
    /// return the smallest basis state of maximal weight.
    pub fn top_eigenpair(&self) -> Result<(T, DensityMatrix<T>)> {
        match self {
            QuantumPredicate::Diagonal { num_qubits, default, weights } => {
                let best_listed = weights.iter().fold(None::<(u64, T)>, |best, (&v, &w)| match best {
                    Some((_, bw)) if bw >= w => best,
                    _ => Some((v, w)),
                });
                let covers_all = (weights.len() as u128) >= (1u128 << *num_qubits);
                let first_unlisted = (!covers_all).then(|| (0u64..).find(|v| !weights.contains_key(v)).unwrap_or(0));
                let (v, w) = match (best_listed, first_unlisted) {
                    (None, None) => (0, T::zero()),
                    (None, Some(u)) => (u, *default),
                    (Some(b), None) => b,
                    (Some((bv, bw)), Some(u)) => {
                        if *default > bw || (*default == bw && u < bv) {
                            (u, *default)
                        } else {
                            (bv, bw)
                        }
                    }
                };
                Ok((w, DensityMatrix::basis(*num_qubits, v)?))
            }
            QuantumPredicate::Dense { num_qubits, matrix } => {
                let eig = SymmetricEigen::new(matrix.clone());
                let (idx, &top) = eig
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .fold(None::<(usize, &T)>, |best, (i, e)| match best {
                        Some((_, b)) if *b >= *e => best,
                        _ => Some((i, e)),
                    })
                    .ok_or_else(|| Error::domain("predicate", "empty operator"))?;
                let v = eig.eigenvectors.column(idx);
                let amps = v.iter().enumerate().map(|(i, a)| (i as u64, *a)).collect();
                let state = super::StateVector::from_amplitudes(*num_qubits, amps)?;
                Ok((top, DensityMatrix::pure(&state)))
            }
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<Complex<T>>> {
        match self {
            QuantumPredicate::Dense { matrix, .. } => Ok(matrix.clone()),
            QuantumPredicate::Diagonal { num_qubits, .. } => {
                if *num_qubits > PREDICATE_DENSE_MAX_QUBITS {
                    return Err(Error::config(format!(
                        "dense view of a {num_qubits}-qubit predicate exceeds cap {PREDICATE_DENSE_MAX_QUBITS}"
                    )));
                }
                let dim = 1usize << num_qubits;
                Ok(DMatrix::from_fn(dim, dim, |r, c| if r == c { creal(self.weight(r as u64)) } else { czero() }))
            }
        }
    }
}

/// `Tr(E rho)`, checked against `[0, tr(rho)]` up to `EIGEN_TOL` and clamped
/// to `[0, 1]`.
pub fn predicate_accept<T: Real>(e: &QuantumPredicate<T>, rho: &DensityMatrix<T>) -> Result<T> {
    if e.num_qubits() != rho.num_qubits() {
        return Err(Error::config(format!(
            "predicate acts on {} qubits but the state has {}",
            e.num_qubits(),
            rho.num_qubits()
        )));
    }
    let value = match e {
        QuantumPredicate::Diagonal { .. } => {
            rho.diagonal().into_iter().fold(T::zero(), |acc, (v, p)| acc + e.weight(v) * p)
        }
        QuantumPredicate::Dense { matrix, .. } => rho
            .entries()
            .fold(czero::<T>(), |acc, ((r, c), v)| acc + matrix[(c as usize, r as usize)] * v)
            .re,
    };
    let upper = rho.trace().max(T::zero());
    if value < -T::eigen_tol() || value > upper + T::eigen_tol() {
        return Err(Error::domain("acceptance probability", format!("{value} outside [0, {upper}]")));
    }
    Ok(value.max(T::zero()).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::StateVector;

    fn plus() -> DensityMatrix<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::pure(
            &StateVector::from_amplitudes(1, vec![(0, Complex::new(s, 0.0)), (1, Complex::new(s, 0.0))]).unwrap(),
        )
    }

    #[test]
    fn identity_zero_projector() {
        let rho = plus();
        assert_eq!(predicate_accept(&QuantumPredicate::identity(1), &rho).unwrap(), 1.0);
        assert_eq!(predicate_accept(&QuantumPredicate::zero(1), &rho).unwrap(), 0.0);
        let p = predicate_accept(&QuantumPredicate::projector(1, 0).unwrap(), &rho).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dense_projector_onto_plus() {
        let h = Complex::new(0.5, 0.0);
        let e = QuantumPredicate::dense(DMatrix::from_element(2, 2, h)).unwrap();
        assert!((predicate_accept(&e, &plus()).unwrap() - 1.0).abs() < 1e-12);
        let zero = DensityMatrix::basis(1, 0).unwrap();
        assert!((predicate_accept(&e, &zero).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_operators() {
        let two = DMatrix::from_element(1, 1, Complex::new(2.0, 0.0));
        assert!(QuantumPredicate::dense(two).is_err());
        let skew = DMatrix::from_row_slice(
            2,
            2,
            &[Complex::new(0.5, 0.0), Complex::new(0.0, 0.1), Complex::new(0.0, 0.1), Complex::new(0.5, 0.0)],
        );
        assert!(QuantumPredicate::dense(skew).is_err());
        assert!(QuantumPredicate::<f64>::diagonal(1, 1.5, BTreeMap::new()).is_err());
        assert!(predicate_accept(&QuantumPredicate::identity(2), &plus()).is_err());
    }

    #[test]
    fn kron_is_and_of_checks() {
        let a = QuantumPredicate::<f64>::projector(1, 1).unwrap();
        let b = QuantumPredicate::projector(2, 2).unwrap();
        let k = a.kron(&b).unwrap();
        assert_eq!(k.weight(0b101), 1.0);
        assert_eq!(k.weight(0b100), 0.0);
        let mixed = QuantumPredicate::<f64>::identity(1).kron(&QuantumPredicate::projector(1, 0).unwrap()).unwrap();
        assert_eq!(mixed.weight(0b01), 1.0);
        assert_eq!(mixed.weight(0b10), 0.0);
        let dense = QuantumPredicate::<f64>::dense(DMatrix::from_element(2, 2, Complex::new(0.5, 0.0))).unwrap();
        let dk = a.kron(&dense).unwrap();
        let rho = DensityMatrix::basis(1, 1).unwrap().kron(&plus());
        assert!((predicate_accept(&dk, &rho).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sums_and_top_eigenpairs() {
        let a = QuantumPredicate::<f64>::projector(1, 1).unwrap();
        let b = QuantumPredicate::identity(1);
        let s = QuantumPredicate::weighted_sum(&[(0.5, &a), (0.25, &b)]).unwrap();
        assert_eq!(s.weight(0), 0.25);
        assert_eq!(s.weight(1), 0.75);
        let (top, state) = s.top_eigenpair().unwrap();
        assert_eq!(top, 0.75);
        assert_eq!(state.entry(1, 1).re, 1.0);
        let (z, zs) = QuantumPredicate::<f64>::zero(2).top_eigenpair().unwrap();
        assert_eq!(z, 0.0);
        assert_eq!(zs.entry(0, 0).re, 1.0);
        let dense = QuantumPredicate::<f64>::dense(DMatrix::from_element(2, 2, Complex::new(0.5, 0.0))).unwrap();
        let (t, st) = dense.top_eigenpair().unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!((predicate_accept(&dense, &st).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serde_roundtrip() {
        let p = QuantumPredicate::<f64>::projector(3, 5).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<QuantumPredicate<f64>>(&s).unwrap(), p);
        let d = QuantumPredicate::dense(DMatrix::from_element(2, 2, Complex::new(0.5, 0.0))).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<QuantumPredicate<f64>>(&s).unwrap(), d);
    }
}
