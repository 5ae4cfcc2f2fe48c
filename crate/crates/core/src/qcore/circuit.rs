use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{read_register, write_register, xor_register, StateVector, MAX_QUBITS};
use crate::error::{Error, Result};
use crate::scalar::{cone, czero, Complex, Real};

/// Widest register a dense `Unitary` step may act on.
pub const DENSE_GATE_MAX_QUBITS: usize = 12;

/// A classical function `{0,1}^n1 -> {0,1}^n2` given by its truth table.
///
/// Serialises as the bare table; the output width read back is the smallest
/// one that holds every entry.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct FunctionOracle {
    n1: usize,
    n2: usize,
    table: Vec<u64>,
}

impl TryFrom<Vec<u64>> for FunctionOracle {
    type Error = Error;

    fn try_from(table: Vec<u64>) -> Result<Self> {
        if !table.len().is_power_of_two() {
            return Err(Error::config(format!("oracle table length {} is not a power of two", table.len())));
        }
        let max = table.iter().copied().max().unwrap_or(0);
        let n2 = (64 - max.leading_zeros() as usize).max(1);
        FunctionOracle::new(table.len().trailing_zeros() as usize, n2, table)
    }
}

impl From<FunctionOracle> for Vec<u64> {
    fn from(f: FunctionOracle) -> Self {
        f.table
    }
}

impl FunctionOracle {
    pub fn new(n1: usize, n2: usize, table: Vec<u64>) -> Result<Self> {
        if n1 > 30 || n2 > 63 {
            return Err(Error::config(format!("oracle widths {n1} -> {n2} are too large")));
        }
        if table.len() != 1usize << n1 {
            return Err(Error::config(format!("oracle on {n1} input bits needs {} entries, got {}", 1u64 << n1, table.len())));
        }
        if let Some(v) = table.iter().find(|&&v| v >> n2 != 0) {
            return Err(Error::config(format!("oracle value {v} does not fit in {n2} bits")));
        }
        Ok(FunctionOracle { n1, n2, table })
    }

    pub fn from_fn(n1: usize, n2: usize, f: impl Fn(u64) -> u64) -> Result<Self> {
        Self::new(n1, n2, (0..1u64 << n1).map(f).collect())
    }

    pub fn constant(n1: usize, n2: usize, value: u64) -> Result<Self> {
        Self::from_fn(n1, n2, |_| value)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn table(&self) -> &[u64] {
        &self.table
    }

    pub fn eval(&self, x: u64) -> u64 {
        self.table[x as usize]
    }
}

/// `|x>|a> -> |x>|a xor f(x)>` on the given registers.
pub fn apply_oracle<T: Real>(
    state: &StateVector<T>,
    f: &FunctionOracle,
    input: &[usize],
    output: &[usize],
) -> Result<StateVector<T>> {
    check_oracle_wires(f, input, output, state.num_qubits())?;
    Ok(state.map_basis(|i| xor_register(i, output, f.eval(read_register(i, input)))))
}

fn check_oracle_wires(f: &FunctionOracle, input: &[usize], output: &[usize], num_qubits: usize) -> Result<()> {
    if input.len() != f.n1() || output.len() != f.n2() {
        return Err(Error::config(format!(
            "oracle {} -> {} bits applied to registers of width {} -> {}",
            f.n1(),
            f.n2(),
            input.len(),
            output.len()
        )));
    }
    check_distinct(input.iter().chain(output), num_qubits)
}

fn check_distinct<'a>(wires: impl IntoIterator<Item = &'a usize>, num_qubits: usize) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &w in wires {
        if w >= num_qubits {
            return Err(Error::config(format!("wire {w} outside a {num_qubits}-qubit register")));
        }
        if !seen.insert(w) {
            return Err(Error::config(format!("wire {w} used twice in one step")));
        }
    }
    Ok(())
}

/// Condition on one wire for a controlled step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub wire: usize,
    #[serde(default = "default_on")]
    pub on: bool,
}

fn default_on() -> bool {
    true
}

impl Control {
    pub fn on(wire: usize) -> Self {
        Control { wire, on: true }
    }

    pub fn off(wire: usize) -> Self {
        Control { wire, on: false }
    }
}

fn controls_hold(index: u64, controls: &[Control]) -> bool {
    controls.iter().all(|c| ((index >> c.wire) & 1 == 1) == c.on)
}

/// One step of a query circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum Step<T: Real> {
    H { wire: usize },
    X { wire: usize },
    Z { wire: usize },
    Ry { wire: usize, angle: T },
    Rz { wire: usize, angle: T },
    Cx { control: usize, target: usize },
    /// Multiplies basis states whose register equals `value` by `exp(i angle)`.
    Phase { wires: Vec<usize>, value: u64, angle: T },
    /// Dense unitary; `matrix[r][c]` maps register value `c` to `r`.
    Unitary { wires: Vec<usize>, matrix: Vec<Vec<Complex<T>>> },
    /// Reversible relabelling `v -> table[v]` of a register.
    Permutation {
        wires: Vec<usize>,
        table: Vec<u64>,
        #[serde(default)]
        controls: Vec<Control>,
    },
    /// `output ^= table[input]`.
    Xor {
        input: Vec<usize>,
        output: Vec<usize>,
        table: Vec<u64>,
        #[serde(default)]
        controls: Vec<Control>,
    },
    /// One call to oracle number `round`.
    Oracle {
        #[serde(default)]
        round: usize,
        input: Vec<usize>,
        output: Vec<usize>,
    },
}

impl<T: Real> Step<T> {
    fn wires(&self) -> Vec<usize> {
        let ctl = |c: &[Control]| c.iter().map(|c| c.wire).collect::<Vec<_>>();
        match self {
            Step::H { wire } | Step::X { wire } | Step::Z { wire } | Step::Ry { wire, .. } | Step::Rz { wire, .. } => {
                vec![*wire]
            }
            Step::Cx { control, target } => vec![*control, *target],
            Step::Phase { wires, .. } | Step::Unitary { wires, .. } => wires.clone(),
            Step::Permutation { wires, controls, .. } => [wires.clone(), ctl(controls)].concat(),
            Step::Xor { input, output, controls, .. } => [input.clone(), output.clone(), ctl(controls)].concat(),
            Step::Oracle { input, output, .. } => [input.clone(), output.clone()].concat(),
        }
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        check_distinct(&self.wires(), num_qubits)?;
        match self {
            Step::Unitary { wires, matrix } => {
                if wires.len() > DENSE_GATE_MAX_QUBITS {
                    return Err(Error::config(format!(
                        "dense gate on {} qubits exceeds cap {DENSE_GATE_MAX_QUBITS}",
                        wires.len()
                    )));
                }
                let m = dense_matrix(wires.len(), matrix)?;
                let gram = m.adjoint() * &m;
                let tol = T::eigen_tol();
                for r in 0..gram.nrows() {
                    for c in 0..gram.ncols() {
                        let want = if r == c { cone() } else { czero() };
                        if (gram[(r, c)] - want).norm_sqr() > tol * tol {
                            return Err(Error::domain("unitary gate", format!("not unitary at ({r}, {c})")));
                        }
                    }
                }
            }
            Step::Permutation { wires, table, .. } => {
                check_table_len(wires.len(), table)?;
                let distinct: BTreeSet<_> = table.iter().copied().collect();
                if distinct.len() != table.len() || table.iter().any(|&v| v as usize >= table.len()) {
                    return Err(Error::domain("permutation gate", "table is not a bijection"));
                }
            }
            Step::Xor { input, output, table, .. } => {
                check_table_len(input.len(), table)?;
                if let Some(v) = table.iter().find(|&&v| output.len() < 64 && v >> output.len() != 0) {
                    return Err(Error::config(format!("xor value {v} does not fit in {} output wires", output.len())));
                }
            }
            Step::Phase { wires, value, .. }
                if wires.len() < 64 && value >> wires.len() != 0 => {
                    return Err(Error::config(format!("phase value {value} wider than its register")));
                }
            _ => {}
        }
        Ok(())
    }
}

fn check_table_len(width: usize, table: &[u64]) -> Result<()> {
    if width > 30 || table.len() != 1usize << width {
        return Err(Error::config(format!("table for a {width}-bit register has {} entries", table.len())));
    }
    Ok(())
}

fn dense_matrix<T: Real>(width: usize, rows: &[Vec<Complex<T>>]) -> Result<DMatrix<Complex<T>>> {
    let dim = 1usize << width;
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::config(format!("dense gate on {width} wires must be {dim}x{dim}")));
    }
    Ok(DMatrix::from_fn(dim, dim, |r, c| rows[r][c]))
}

/// Which wires carry each message of the simulated transcript.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputLayout {
    /// Odd-numbered (prover) classical messages, in order.
    pub prover_messages: Vec<Vec<usize>>,
    /// Even-numbered (verifier) messages as the simulator wrote them.
    #[serde(default)]
    pub verifier_messages: Vec<Vec<usize>>,
    /// Register holding the final prover message.
    #[serde(default)]
    pub final_message: Vec<usize>,
    /// Wire that is 1 when the simulator declares failure.
    #[serde(default)]
    pub failure_flag: Option<usize>,
}

impl OutputLayout {
    fn wires(&self) -> impl Iterator<Item = &usize> {
        self.prover_messages
            .iter()
            .chain(&self.verifier_messages)
            .flatten()
            .chain(&self.final_message)
            .chain(&self.failure_flag)
    }
}

/// A circuit with counted oracle slots, starting from `|0...0>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct QueryAlgorithm<T: Real> {
    pub num_qubits: usize,
    pub steps: Vec<Step<T>>,
    #[serde(default)]
    pub layout: OutputLayout,
    pub query_budget: usize,
}

/// Final state and the number of oracle calls actually made.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryRun<T: Real> {
    pub state: StateVector<T>,
    pub oracle_calls: usize,
}

impl<T: Real> QueryAlgorithm<T> {
    pub fn new(num_qubits: usize, steps: Vec<Step<T>>, layout: OutputLayout, query_budget: usize) -> Result<Self> {
        let alg = QueryAlgorithm { num_qubits, steps, layout, query_budget };
        alg.validate()?;
        Ok(alg)
    }

    pub fn oracle_slots(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, Step::Oracle { .. })).count()
    }

    /// Highest oracle round referenced plus one.
    pub fn rounds(&self) -> usize {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::Oracle { round, .. } => Some(round + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_qubits > MAX_QUBITS {
            return Err(Error::config(format!("{} qubits exceeds the cap of {MAX_QUBITS}", self.num_qubits)));
        }
        for step in &self.steps {
            step.validate(self.num_qubits)?;
        }
        if let Some(w) = self.layout.wires().find(|&&w| w >= self.num_qubits) {
            return Err(Error::config(format!("output wire {w} outside a {}-qubit register", self.num_qubits)));
        }
        let used = self.oracle_slots();
        if used > self.query_budget {
            return Err(Error::BudgetViolation { used, budget: self.query_budget });
        }
        Ok(())
    }

    /// Validates and runs everything before the first oracle slot, so that
    /// repeated runs against different oracles share that work.
    pub fn prepare(&self) -> Result<PreparedAlgorithm<'_, T>> {
        self.validate()?;
        let start = self.steps.iter().position(|s| matches!(s, Step::Oracle { .. })).unwrap_or(self.steps.len());
        let mut prefix = StateVector::zero(self.num_qubits)?;
        let mut calls = 0;
        for step in &self.steps[..start] {
            prefix = apply_step(&prefix, step, &[], &mut calls)?;
        }
        Ok(PreparedAlgorithm { alg: self, prefix, start })
    }
}

/// A validated algorithm with its oracle-independent prefix already applied.
#[derive(Clone, Debug)]
pub struct PreparedAlgorithm<'a, T: Real> {
    alg: &'a QueryAlgorithm<T>,
    prefix: StateVector<T>,
    start: usize,
}

impl<T: Real> PreparedAlgorithm<'_, T> {
    pub fn algorithm(&self) -> &QueryAlgorithm<T> {
        self.alg
    }

    pub fn run(&self, oracles: &[FunctionOracle]) -> Result<QueryRun<T>> {
        let mut state = self.prefix.clone();
        let mut oracle_calls = 0;
        for step in &self.alg.steps[self.start..] {
            state = apply_step(&state, step, oracles, &mut oracle_calls)?;
            if oracle_calls > self.alg.query_budget {
                return Err(Error::BudgetViolation { used: oracle_calls, budget: self.alg.query_budget });
            }
        }
        Ok(QueryRun { state, oracle_calls })
    }
}

fn apply_step<T: Real>(
    state: &StateVector<T>,
    step: &Step<T>,
    oracles: &[FunctionOracle],
    calls: &mut usize,
) -> Result<StateVector<T>> {
    let c = |re: f64, im: f64| Complex::new(T::lit(re), T::lit(im));
    Ok(match step {
        Step::H { wire } => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            state.apply_single(*wire, [[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]])
        }
        Step::X { wire } => state.map_basis(|i| i ^ (1u64 << wire)),
        Step::Z { wire } => state.map_phase(|i| ((i >> wire) & 1 == 1).then(|| -cone::<T>())),
        Step::Ry { wire, angle } => {
            let half = *angle * T::lit(0.5);
            let (s, co) = (Complex::new(half.sin(), T::zero()), Complex::new(half.cos(), T::zero()));
            state.apply_single(*wire, [[co, -s], [s, co]])
        }
        Step::Rz { wire, angle } => {
            let half = *angle * T::lit(0.5);
            let lo = Complex::new(half.cos(), -half.sin());
            state.apply_single(*wire, [[lo, czero()], [czero(), lo.conj()]])
        }
        Step::Cx { control, target } => {
            state.map_basis(|i| if (i >> control) & 1 == 1 { i ^ (1u64 << target) } else { i })
        }
        Step::Phase { wires, value, angle } => {
            let p = Complex::new(angle.cos(), angle.sin());
            state.map_phase(|i| (read_register(i, wires) == *value).then_some(p))
        }
        Step::Unitary { wires, matrix } => state.apply_dense(wires, &dense_matrix(wires.len(), matrix)?),
        Step::Permutation { wires, table, controls } => state.map_basis(|i| {
            if controls_hold(i, controls) {
                write_register(i, wires, table[read_register(i, wires) as usize])
            } else {
                i
            }
        }),
        Step::Xor { input, output, table, controls } => state.map_basis(|i| {
            if controls_hold(i, controls) {
                xor_register(i, output, table[read_register(i, input) as usize])
            } else {
                i
            }
        }),
        Step::Oracle { round, input, output } => {
            let f = oracles
                .get(*round)
                .ok_or_else(|| Error::config(format!("oracle round {round} has no oracle supplied")))?;
            *calls += 1;
            apply_oracle(state, f, input, output)?
        }
    })
}

/// Runs `alg` with every oracle slot answered by `f`.
pub fn run_query_algorithm<T: Real>(alg: &QueryAlgorithm<T>, f: &FunctionOracle) -> Result<QueryRun<T>> {
    run_with_oracles(alg, std::slice::from_ref(f))
}

/// Runs `alg`; a slot of round `i` queries `oracles[i]`.
pub fn run_with_oracles<T: Real>(alg: &QueryAlgorithm<T>, oracles: &[FunctionOracle]) -> Result<QueryRun<T>> {
    alg.prepare()?.run(oracles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::measure;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    #[test]
    fn zero_oracle_is_identity_and_oracle_is_involution() {
        let s = 0.5;
        let state = StateVector::from_amplitudes(2, vec![(0, c(s)), (1, c(s)), (2, c(-s)), (3, c(s))]).unwrap();
        let zero = FunctionOracle::constant(1, 1, 0).unwrap();
        assert_eq!(apply_oracle(&state, &zero, &[0], &[1]).unwrap(), state);
        let not = FunctionOracle::new(1, 1, vec![1, 0]).unwrap();
        let once = apply_oracle(&state, &not, &[0], &[1]).unwrap();
        assert_ne!(once, state);
        assert_eq!(apply_oracle(&once, &not, &[0], &[1]).unwrap(), state);
    }

    #[test]
    fn oracle_table_lookup() {
        let f = FunctionOracle::new(1, 1, vec![1, 0]).unwrap();
        let out = apply_oracle(&StateVector::<f64>::zero(2).unwrap(), &f, &[0], &[1]).unwrap();
        assert_eq!(out.support(), &[(0b10, c(1.0))]);
        assert!(apply_oracle(&out, &f, &[0], &[0]).is_err());
        assert!(apply_oracle(&out, &f, &[0, 1], &[]).is_err());
    }

    #[test]
    fn empty_algorithm_leaves_zero_state() {
        let alg = QueryAlgorithm::<f64>::new(3, vec![], OutputLayout::default(), 0).unwrap();
        let run = run_query_algorithm(&alg, &FunctionOracle::constant(1, 1, 0).unwrap()).unwrap();
        assert_eq!(run.state, StateVector::zero(3).unwrap());
        assert_eq!(run.oracle_calls, 0);
    }

    #[test]
    fn superposition_query_tabulates_f() {
        let f = FunctionOracle::new(2, 2, vec![3, 0, 2, 1]).unwrap();
        let steps = vec![Step::<f64>::H { wire: 0 }, Step::H { wire: 1 }, Step::Oracle { round: 0, input: vec![0, 1], output: vec![2, 3] }];
        let alg = QueryAlgorithm::new(4, steps, OutputLayout::default(), 1).unwrap();
        let run = run_query_algorithm(&alg, &f).unwrap();
        assert_eq!(run.oracle_calls, 1);
        for x in 0..4u64 {
            assert!((run.state.amplitude(x | (f.eval(x) << 2)).re - 0.5).abs() < 1e-12);
        }
        assert_eq!(run.state.support().len(), 4);
    }

    #[test]
    fn grover_on_four_items_finds_mark_in_one_query() {
        for w in 0..4u64 {
            let f = FunctionOracle::from_fn(2, 1, |x| (x == w) as u64).unwrap();
            let pi = std::f64::consts::PI;
            let mut steps = vec![Step::X { wire: 2 }, Step::H { wire: 2 }, Step::H { wire: 0 }, Step::H { wire: 1 }];
            steps.push(Step::Oracle { round: 0, input: vec![0, 1], output: vec![2] });
            steps.extend([Step::H { wire: 0 }, Step::H { wire: 1 }]);
            steps.push(Step::Phase { wires: vec![0, 1], value: 0, angle: pi });
            steps.extend([Step::H { wire: 0 }, Step::H { wire: 1 }]);
            let alg = QueryAlgorithm::new(3, steps, OutputLayout::default(), 1).unwrap();
            let run = run_query_algorithm(&alg, &f).unwrap();
            let d = measure(&run.state, &[0, 1]).unwrap();
            assert!((d.probability(w) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let steps = vec![
            Step::<f64>::Oracle { round: 0, input: vec![0], output: vec![1] },
            Step::Oracle { round: 0, input: vec![0], output: vec![1] },
        ];
        let err = QueryAlgorithm::new(2, steps, OutputLayout::default(), 1).unwrap_err();
        assert_eq!(err, Error::BudgetViolation { used: 2, budget: 1 });
    }

    #[test]
    fn rejects_bad_steps() {
        let bad_perm = Step::<f64>::Permutation { wires: vec![0], table: vec![0, 0], controls: vec![] };
        assert!(QueryAlgorithm::new(1, vec![bad_perm], OutputLayout::default(), 0).is_err());
        let non_unitary = Step::Unitary { wires: vec![0], matrix: vec![vec![c(1.0), c(1.0)], vec![c(0.0), c(1.0)]] };
        assert!(QueryAlgorithm::new(1, vec![non_unitary], OutputLayout::default(), 0).is_err());
        let shared = Step::<f64>::Cx { control: 0, target: 0 };
        assert!(QueryAlgorithm::new(1, vec![shared], OutputLayout::default(), 0).is_err());
        let layout = OutputLayout { prover_messages: vec![vec![5]], ..Default::default() };
        assert!(QueryAlgorithm::<f64>::new(1, vec![], layout, 0).is_err());
    }

    #[test]
    fn rotations_and_controlled_steps() {
        let pi = std::f64::consts::PI;
        let steps = vec![
            Step::Ry { wire: 0, angle: pi },
            Step::Xor { input: vec![0], output: vec![1, 2], table: vec![0, 3], controls: vec![] },
            Step::Permutation { wires: vec![1, 2], table: vec![1, 2, 3, 0], controls: vec![Control::on(0)] },
            Step::Rz { wire: 0, angle: pi },
        ];
        let alg = QueryAlgorithm::new(3, steps, OutputLayout::default(), 0).unwrap();
        let run = run_with_oracles(&alg, &[]).unwrap();
        // Ry(pi)|0> = |1>, xor writes 3, the permutation maps 3 -> 0
        assert_eq!(run.state.support().len(), 1);
        assert_eq!(run.state.support()[0].0, 0b001);
        assert!((run.state.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serde_roundtrip() {
        let alg = QueryAlgorithm::<f64>::new(
            2,
            vec![Step::H { wire: 0 }, Step::Oracle { round: 0, input: vec![0], output: vec![1] }],
            OutputLayout { prover_messages: vec![vec![0]], verifier_messages: vec![vec![1]], ..Default::default() },
            1,
        )
        .unwrap();
        let json = serde_json::to_string(&alg).unwrap();
        assert!(json.contains("\"gate\":\"oracle\""));
        assert_eq!(serde_json::from_str::<QueryAlgorithm<f64>>(&json).unwrap(), alg);
        let f = FunctionOracle::new(2, 3, vec![1, 7, 0, 2]).unwrap();
        assert_eq!(serde_json::to_string(&f).unwrap(), "[1,7,0,2]");
        assert_eq!(serde_json::from_str::<FunctionOracle>("[1,7,0,2]").unwrap(), f);
    }
}
