use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::read_register;
use crate::error::{Error, Result};
use crate::scalar::{cone, czero, Complex, Real};

/// Widest register a sparse state may address.
pub const MAX_QUBITS: usize = 48;

/// Widest state that may be materialised as a dense amplitude vector.
pub const DENSE_QUBIT_CAP: usize = 20;

/// A pure state on `num_qubits` qubits. Only nonzero amplitudes are stored,
/// sorted by basis index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real> {
    num_qubits: usize,
    amps: Vec<(u64, Complex<T>)>,
}

fn check_width(num_qubits: usize) -> Result<()> {
    if num_qubits > MAX_QUBITS {
        return Err(Error::config(format!("{num_qubits} qubits exceeds the cap of {MAX_QUBITS}")));
    }
    Ok(())
}

impl<T: Real> StateVector<T> {
    /// `|0...0>`.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: u64) -> Result<Self> {
        check_width(num_qubits)?;
        if num_qubits < 64 && index >> num_qubits != 0 {
            return Err(Error::domain("basis index", format!("{index} needs more than {num_qubits} qubits")));
        }
        Ok(StateVector { num_qubits, amps: vec![(index, cone())] })
    }

    /// Builds a state from sparse amplitudes; duplicates are summed and the
    /// result must be normalised.
    pub fn from_amplitudes(num_qubits: usize, amps: Vec<(u64, Complex<T>)>) -> Result<Self> {
        check_width(num_qubits)?;
        if let Some((i, _)) = amps.iter().find(|(i, _)| num_qubits < 64 && i >> num_qubits != 0) {
            return Err(Error::domain("basis index", format!("{i} needs more than {num_qubits} qubits")));
        }
        let state = Self::canonical(num_qubits, amps);
        state.check_normalized()?;
        Ok(state)
    }

    pub fn from_dense(amps: &[Complex<T>]) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::config(format!("dense state length {} is not a power of two", amps.len())));
        }
        let num_qubits = amps.len().trailing_zeros() as usize;
        if num_qubits > DENSE_QUBIT_CAP {
            return Err(Error::config(format!("dense state of {num_qubits} qubits exceeds cap {DENSE_QUBIT_CAP}")));
        }
        Self::from_amplitudes(num_qubits, amps.iter().enumerate().map(|(i, &a)| (i as u64, a)).collect())
    }

    pub fn to_dense(&self) -> Result<Vec<Complex<T>>> {
        if self.num_qubits > DENSE_QUBIT_CAP {
            return Err(Error::config(format!(
                "dense view of {} qubits exceeds cap {DENSE_QUBIT_CAP}",
                self.num_qubits
            )));
        }
        let mut out = vec![czero(); 1 << self.num_qubits];
        for &(i, a) in &self.amps {
            out[i as usize] = a;
        }
        Ok(out)
    }

    pub(crate) fn canonical(num_qubits: usize, mut amps: Vec<(u64, Complex<T>)>) -> Self {
        amps.sort_unstable_by_key(|&(i, _)| i);
        let prune = T::lit(T::PRUNE);
        let mut out: Vec<(u64, Complex<T>)> = Vec::with_capacity(amps.len());
        for (i, a) in amps {
            match out.last_mut() {
                Some((j, b)) if *j == i => *b += a,
                _ => out.push((i, a)),
            }
        }
        out.retain(|(_, a)| a.norm_sqr() > prune);
        StateVector { num_qubits, amps: out }
    }

    pub(crate) fn check_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - T::one()).abs() > T::exact_tol() {
            return Err(Error::domain("state norm", format!("squared norm {n} is not 1")));
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitude(&self, index: u64) -> Complex<T> {
        match self.amps.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.amps[pos].1,
            Err(_) => czero(),
        }
    }

    /// Nonzero amplitudes in increasing basis order.
    pub fn support(&self) -> &[(u64, Complex<T>)] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().fold(T::zero(), |acc, (_, a)| acc + a.norm_sqr())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        let (mut i, mut j, mut acc) = (0, 0, czero::<T>());
        while i < self.amps.len() && j < other.amps.len() {
            match self.amps[i].0.cmp(&other.amps[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.amps[i].1.conj() * other.amps[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Relabels basis states through a bijection.
    pub(crate) fn map_basis(&self, f: impl Fn(u64) -> u64) -> Self {
        let mut amps: Vec<_> = self.amps.iter().map(|&(i, a)| (f(i), a)).collect();
        amps.sort_unstable_by_key(|&(i, _)| i);
        StateVector { num_qubits: self.num_qubits, amps }
    }

    /// Multiplies each amplitude by a basis-dependent factor.
    pub(crate) fn map_phase(&self, f: impl Fn(u64) -> Option<Complex<T>>) -> Self {
        let amps = self.amps.iter().map(|&(i, a)| (i, f(i).map_or(a, |p| p * a))).collect();
        StateVector { num_qubits: self.num_qubits, amps }
    }

    /// Applies a 2x2 unitary `[[u00, u01], [u10, u11]]` to one wire.
    pub(crate) fn apply_single(&self, wire: usize, u: [[Complex<T>; 2]; 2]) -> Self {
        let bit = 1u64 << wire;
        let mut out = Vec::with_capacity(self.amps.len() * 2);
        for &(i, a) in &self.amps {
            let b = ((i & bit) != 0) as usize;
            let i0 = i & !bit;
            out.push((i0, u[0][b] * a));
            out.push((i0 | bit, u[1][b] * a));
        }
        Self::canonical(self.num_qubits, out)
    }

    /// Applies a dense unitary on `wires`; `matrix[(r, c)]` maps register value
    /// `c` to `r`.
    pub(crate) fn apply_dense(&self, wires: &[usize], matrix: &DMatrix<Complex<T>>) -> Self {
        let mask = wires.iter().fold(0u64, |m, &w| m | (1u64 << w));
        let dim = matrix.nrows();
        let mut groups: BTreeMap<u64, Vec<(u64, Complex<T>)>> = BTreeMap::new();
        for &(i, a) in &self.amps {
            groups.entry(i & !mask).or_default().push((read_register(i, wires), a));
        }
        let mut out = Vec::with_capacity(self.amps.len() * 2);
        for (rest, entries) in groups {
            for r in 0..dim {
                let mut acc = czero::<T>();
                for &(c, a) in &entries {
                    acc += matrix[(r, c as usize)] * a;
                }
                if acc != czero() {
                    out.push((super::write_register(rest, wires, r as u64), acc));
                }
            }
        }
        Self::canonical(self.num_qubits, out)
    }

    /// Restricts to basis states satisfying `keep` and renormalises.
    fn project(&self, keep: impl Fn(u64) -> bool) -> Option<(T, Self)> {
        let amps: Vec<_> = self.amps.iter().copied().filter(|&(i, _)| keep(i)).collect();
        let p = amps.iter().fold(T::zero(), |acc, (_, a)| acc + a.norm_sqr());
        if p <= T::zero() {
            return None;
        }
        let scale = Complex::new(T::one() / p.sqrt(), T::zero());
        let amps = amps.into_iter().map(|(i, a)| (i, a * scale)).collect();
        Some((p, StateVector { num_qubits: self.num_qubits, amps }))
    }
}

/// One measurement outcome with its Born probability and the normalised
/// post-measurement state.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch<T: Real> {
    pub probability: T,
    pub residual: StateVector<T>,
}

/// Exact outcome distribution of a computational-basis measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution<T: Real> {
    pub wires: Vec<usize>,
    pub outcomes: BTreeMap<u64, Branch<T>>,
}

impl<T: Real> OutcomeDistribution<T> {
    pub fn probability(&self, outcome: u64) -> T {
        self.outcomes.get(&outcome).map_or(T::zero(), |b| b.probability)
    }

    pub fn total(&self) -> T {
        self.outcomes.values().fold(T::zero(), |acc, b| acc + b.probability)
    }
}

/// Measures `wires` in the computational basis without sampling.
pub fn measure<T: Real>(state: &StateVector<T>, wires: &[usize]) -> Result<OutcomeDistribution<T>> {
    if let Some(&w) = wires.iter().find(|&&w| w >= state.num_qubits) {
        return Err(Error::config(format!("wire {w} outside a {}-qubit state", state.num_qubits)));
    }
    let mut values: Vec<u64> = state.amps.iter().map(|&(i, _)| read_register(i, wires)).collect();
    values.sort_unstable();
    values.dedup();
    let mut outcomes = BTreeMap::new();
    for v in values {
        if let Some((probability, residual)) = state.project(|i| read_register(i, wires) == v) {
            outcomes.insert(v, Branch { probability, residual });
        }
    }
    Ok(OutcomeDistribution { wires: wires.to_vec(), outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::DensityMatrix;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    fn bell() -> StateVector<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_amplitudes(2, vec![(0, c(s)), (3, c(s))]).unwrap()
    }

    #[test]
    fn zero_state_measures_to_point_mass() {
        let z = StateVector::<f64>::zero(3).unwrap();
        let d = measure(&z, &[0, 1, 2]).unwrap();
        assert_eq!(d.outcomes.len(), 1);
        assert_eq!(d.probability(0), 1.0);
    }

    #[test]
    fn bell_first_wire() {
        let d = measure(&bell(), &[0]).unwrap();
        assert!((d.probability(0) - 0.5).abs() < 1e-12);
        assert!((d.probability(1) - 0.5).abs() < 1e-12);
        assert_eq!(d.outcomes[&0].residual.support(), &[(0, c(1.0))]);
        assert!((d.outcomes[&1].residual.amplitude(3).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residuals_reconstruct_dephased_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus_zero = StateVector::from_amplitudes(2, vec![(0, c(s)), (1, c(s))]).unwrap();
        let d = measure(&plus_zero, &[1]).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-12);
        let remixed = crate::qcore::mix(
            &d.outcomes.values().map(|b| (b.probability, DensityMatrix::pure(&b.residual))).collect::<Vec<_>>(),
            false,
        )
        .unwrap();
        // measuring wire 1 (always 0) leaves the state untouched
        assert!(remixed.distance(&DensityMatrix::pure(&plus_zero)) < 1e-12);
    }

    #[test]
    fn rejects_unnormalised_and_out_of_range() {
        assert!(StateVector::from_amplitudes(1, vec![(0, c(0.5))]).is_err());
        assert!(StateVector::<f64>::basis(2, 4).is_err());
        assert!(StateVector::<f64>::zero(MAX_QUBITS + 1).is_err());
        assert!(measure(&bell(), &[2]).is_err());
    }

    #[test]
    fn dense_roundtrip() {
        let v = bell().to_dense().unwrap();
        assert_eq!(StateVector::from_dense(&v).unwrap(), bell());
        assert!(StateVector::<f64>::from_dense(&[c(1.0), c(0.0), c(0.0)]).is_err());
    }
}
