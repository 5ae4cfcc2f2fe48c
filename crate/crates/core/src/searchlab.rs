//! Search experiments: optimal classical search, Grover, equivalence of
//! `(2t+1)`-wise independent hashing with truly random functions, and the
//! reduction from predicting `F(A)` to finding a planted one.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_enumerable, Error, Result};
use crate::fieldhash::{HashFamily, DEFAULT_ENUM_LIMIT};
use crate::qcore::{read_register, FunctionOracle, OutputLayout, QueryAlgorithm, StateVector, Step};
use crate::scalar::{inv_pow2, Real};

/// Measured success next to the bound it is compared with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SearchOutcome<T: Real> {
    pub t: usize,
    pub n2: usize,
    pub measured: T,
    pub bound: T,
    pub slack: T,
}

impl<T: Real> SearchOutcome<T> {
    fn new(t: usize, n2: usize, measured: T, bound: T) -> Self {
        SearchOutcome { t, n2, measured, bound, slack: bound - measured }
    }

    pub fn within_bound(&self) -> bool {
        self.slack >= -T::exact_tol()
    }
}

/// Next action of a classical query strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Query(u64),
    Output(u64),
}

/// Exact `Pr[F(A) = beta_A]` of a classical decision tree over a uniformly
/// random `F`. The strategy sees the `(point, answer)` history.
pub fn classical_strategy_success<T: Real>(
    n1: usize,
    n2: usize,
    t: usize,
    beta: &[u64],
    strategy: &dyn Fn(&[(u64, u64)]) -> Move,
) -> Result<T> {
    if beta.len() != 1 << n1 {
        return Err(Error::config(format!("target table has {} entries, need {}", beta.len(), 1u64 << n1)));
    }
    fn walk<T: Real>(
        n1: usize,
        n2: usize,
        t: usize,
        beta: &[u64],
        strategy: &dyn Fn(&[(u64, u64)]) -> Move,
        history: &mut Vec<(u64, u64)>,
        queries: usize,
    ) -> Result<T> {
        let known = |x: u64, h: &[(u64, u64)]| h.iter().find(|(p, _)| *p == x).map(|&(_, v)| v);
        match strategy(history) {
            Move::Output(a) => {
                let a_idx = usize::try_from(a).ok().filter(|&i| i < beta.len());
                let target = beta[a_idx.ok_or_else(|| Error::domain("output", format!("{a} outside {n1} bits")))?];
                Ok(match known(a, history) {
                    Some(v) if v == target => T::one(),
                    Some(_) => T::zero(),
                    None => inv_pow2(n2),
                })
            }
            Move::Query(_) if queries == t => Err(Error::BudgetViolation { used: t + 1, budget: t }),
            Move::Query(x) if x >> n1 != 0 => Err(Error::domain("query", format!("{x} outside {n1} bits"))),
            Move::Query(x) => {
                if let Some(v) = known(x, history) {
                    history.push((x, v));
                    let r = walk(n1, n2, t, beta, strategy, history, queries + 1);
                    history.pop();
                    return r;
                }
                let mut total = T::zero();
                for v in 0..1u64 << n2 {
                    history.push((x, v));
                    total += walk::<T>(n1, n2, t, beta, strategy, history, queries + 1)?;
                    history.pop();
                }
                Ok(total * inv_pow2(n2))
            }
        }
    }
    walk(n1, n2, t, beta, strategy, &mut Vec::new(), 0)
}

/// Query `t` distinct points in order, stop at the first hit, otherwise
/// guess the next unqueried point.
pub fn optimal_classical_strategy(beta: &[u64]) -> impl Fn(&[(u64, u64)]) -> Move + '_ {
    move |history: &[(u64, u64)]| {
        if let Some(&(x, _)) = history.iter().find(|&&(x, v)| beta[x as usize] == v) {
            return Move::Output(x);
        }
        Move::Query(history.len() as u64)
    }
}

/// Optimal classical search for one target: exact success and the
/// `(t+1)/2^n2` bound.
pub fn classical_optimal_search<T: Real>(t: usize, n1: usize, n2: usize) -> Result<SearchOutcome<T>> {
    if n1 >= 31 || t as u64 >= 1u64 << n1 {
        return Err(Error::domain("t", format!("{t} queries need more than 2^{n1} distinct points")));
    }
    check_enumerable("classical query tree", (n2 * t) as u32, DEFAULT_ENUM_LIMIT << 4)?;
    let beta = vec![0u64; 1 << n1];
    let inner = optimal_classical_strategy(&beta);
    // budget t: the final guess is an output, not a query
    let strategy = |h: &[(u64, u64)]| match inner(h) {
        Move::Query(x) if h.len() == t => Move::Output(x),
        m => m,
    };
    let measured = classical_strategy_success(n1, n2, t, &beta, &strategy)?;
    Ok(SearchOutcome::new(t, n2, measured, T::from_count(t as u64 + 1) * inv_pow2::<T>(n2)))
}

/// `1 - (1 - 2^-n2)^(t+1)`.
pub fn classical_closed_form<T: Real>(t: usize, n2: usize) -> T {
    T::one() - (T::one() - inv_pow2::<T>(n2)).powi(t as i32 + 1)
}

/// `sin^2((2t+1) arcsin(2^{-n2/2}))`.
pub fn grover_closed_form<T: Real>(t: usize, n2: usize) -> T {
    let theta = inv_pow2::<T>(n2).sqrt().asin();
    (T::from_count(2 * t as u64 + 1) * theta).sin().powi(2)
}

/// The amplitude-amplification circuit with `t` calls to the bit oracle of
/// a planted one: register on wires `0..n2`, phase ancilla on wire `n2`.
pub fn grover_circuit<T: Real>(t: usize, n2: usize) -> Result<QueryAlgorithm<T>> {
    let reg: Vec<usize> = (0..n2).collect();
    let anc = n2;
    let mut steps = vec![Step::X { wire: anc }, Step::H { wire: anc }];
    steps.extend(reg.iter().map(|&wire| Step::H { wire }));
    for _ in 0..t {
        steps.push(Step::Oracle { round: 0, input: reg.clone(), output: vec![anc] });
        steps.extend(reg.iter().map(|&wire| Step::H { wire }));
        steps.push(Step::Phase { wires: reg.clone(), value: 0, angle: T::pi() });
        steps.extend(reg.iter().map(|&wire| Step::H { wire }));
    }
    let layout = OutputLayout { prover_messages: vec![reg], ..OutputLayout::default() };
    QueryAlgorithm::new(n2 + 1, steps, layout, t)
}

/// Indicator table of a single planted one.
pub fn planted(n2: usize, position: u64) -> Result<FunctionOracle> {
    FunctionOracle::from_fn(n2, 1, |x| u64::from(x == position))
}

/// Distribution of the first layout register after running `alg`.
pub fn output_distribution<T: Real>(alg: &QueryAlgorithm<T>, oracles: &[FunctionOracle]) -> Result<BTreeMap<u64, T>> {
    let wires = alg
        .layout
        .prover_messages
        .first()
        .ok_or_else(|| Error::config("algorithm declares no output register"))?;
    let run = alg.prepare()?.run(oracles)?;
    Ok(register_distribution(&run.state, wires))
}

fn register_distribution<T: Real>(state: &StateVector<T>, wires: &[usize]) -> BTreeMap<u64, T> {
    let mut out = BTreeMap::new();
    for &(i, a) in state.support() {
        *out.entry(read_register(i, wires)).or_insert_with(T::zero) += a.norm_sqr();
    }
    out
}

/// Exact Grover success averaged over the planted position.
pub fn grover_search<T: Real>(t: usize, n2: usize) -> Result<SearchOutcome<T>> {
    if n2 == 0 || n2 > 10 {
        return Err(Error::domain("n2", format!("{n2} outside 1..=10")));
    }
    let alg = grover_circuit::<T>(t, n2)?;
    let mut total = T::zero();
    for pos in 0..1u64 << n2 {
        let dist = output_distribution(&alg, &[planted(n2, pos)?])?;
        total += dist.get(&pos).copied().unwrap_or_else(T::zero);
    }
    let measured = total * inv_pow2::<T>(n2);
    let c = T::lit(10.0);
    let bound = if t == 0 { inv_pow2::<T>(n2) } else { c * T::from_count((t * t) as u64) * inv_pow2::<T>(n2) };
    Ok(SearchOutcome::new(t, n2, measured, bound))
}

/// Joint law of `(A, f(A))` averaged over `functions`.
fn output_value_law<T: Real>(
    alg: &QueryAlgorithm<T>,
    functions: impl Iterator<Item = Result<FunctionOracle>>,
) -> Result<BTreeMap<(u64, u64), T>> {
    let prepared = alg.prepare()?;
    let wires = alg.layout.prover_messages.first().ok_or_else(|| Error::config("algorithm declares no output register"))?;
    let mut law = BTreeMap::new();
    let mut count = 0u64;
    for f in functions {
        let f = f?;
        let run = prepared.run(std::slice::from_ref(&f))?;
        for (a, p) in register_distribution(&run.state, wires) {
            *law.entry((a, f.eval(a))).or_insert_with(T::zero) += p;
        }
        count += 1;
    }
    let w = T::one() / T::from_count(count.max(1));
    law.values_mut().for_each(|p| *p *= w);
    Ok(law)
}

fn total_variation<T: Real>(p: &BTreeMap<(u64, u64), T>, q: &BTreeMap<(u64, u64), T>) -> T {
    let keys: std::collections::BTreeSet<_> = p.keys().chain(q.keys()).collect();
    let zero = T::zero();
    keys.into_iter()
        .map(|k| (*p.get(k).unwrap_or(&zero) - *q.get(k).unwrap_or(&zero)).abs())
        .fold(T::zero(), |a, x| a + x)
        / T::lit(2.0)
}

/// Every function `{0,1}^n1 -> {0,1}^n2`, as oracles.
pub fn all_functions(n1: usize, n2: usize, limit: u64) -> Result<impl Iterator<Item = Result<FunctionOracle>>> {
    let bits = n2 << n1;
    let count = check_enumerable("all functions", bits as u32, limit)?;
    Ok((0..count).map(move |idx| {
        FunctionOracle::new(n1, n2, (0..1u64 << n1).map(|a| (idx >> (a as usize * n2)) & ((1 << n2) - 1)).collect())
    }))
}

fn family_oracles(family: HashFamily, n1: usize, n2: usize, limit: u64) -> Result<impl Iterator<Item = Result<FunctionOracle>>> {
    let count = check_enumerable("hash family", family.size_log2(), limit)?;
    Ok((0..count).map(move |idx| FunctionOracle::new(n1, n2, family.function_at(idx)?.table())))
}

/// Total-variation distance between `(A, H(A))` for `H` uniform in a hash
/// family of the given independence and `(A', F(A'))` for uniform `F`.
/// Pass `independence = None` for `2t+1` with `t` the query count.
pub fn twise_equivalence_check<T: Real>(
    alg: &QueryAlgorithm<T>,
    n1: usize,
    n2: usize,
    independence: Option<usize>,
) -> Result<T> {
    if alg.rounds() > 1 {
        return Err(Error::config("equivalence check takes a single-oracle algorithm"));
    }
    let k = independence.unwrap_or(2 * alg.oracle_slots() + 1);
    let family = HashFamily::new(n1 as u8, n2 as u8, k)?;
    let hashed = output_value_law(alg, family_oracles(family, n1, n2, DEFAULT_ENUM_LIMIT)?)?;
    let random = output_value_law(alg, all_functions(n1, n2, 1 << 24)?)?;
    Ok(total_variation(&hashed, &random))
}

/// Random choices of the reduction: `G`, the decoys `Z_a` and the planted string `X`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionChoices {
    pub g: Vec<u64>,
    pub z: Vec<u64>,
    /// Bit table of length `2^n2` with exactly one 1.
    pub x: Vec<u8>,
}

impl ReductionChoices {
    pub fn sample<R: Rng + ?Sized>(n1: usize, n2: usize, beta: &[u64], rng: &mut R) -> Self {
        let size = 1u64 << n2;
        let g = (0..1u64 << n1).map(|_| rng.random_range(0..size)).collect();
        let z = beta
            .iter()
            .map(|&b| {
                let v = rng.random_range(0..size - 1);
                if v >= b { v + 1 } else { v }
            })
            .collect();
        let pos = rng.random_range(0..size);
        let x = (0..size).map(|i| u8::from(i == pos)).collect();
        ReductionChoices { g, z, x }
    }

    fn position(&self) -> Result<u64> {
        let ones: Vec<usize> = self.x.iter().enumerate().filter(|(_, &b)| b != 0).map(|(i, _)| i).collect();
        match ones[..] {
            [p] if self.x.iter().all(|&b| b <= 1) => Ok(p as u64),
            _ => Err(Error::domain("x", format!("planted string has {} ones, need exactly one", ones.len()))),
        }
    }

    /// The function the reduction presents to `A`.
    pub fn simulated_function(&self, beta: &[u64]) -> Result<Vec<u64>> {
        let pos = self.position()?;
        Ok(self.g.iter().zip(beta).zip(&self.z).map(|((&g, &b), &z)| if g == pos { b } else { z }).collect())
    }
}

/// One run of the reduction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ReductionRun<T: Real> {
    /// `Pr[X_{G(A')} = 1]`.
    pub success: T,
    /// Queries made to `X`.
    pub x_queries: usize,
    /// Distribution of the reported location `G(A')`.
    pub located: BTreeMap<u64, T>,
}

/// Rewrites `alg` so that each of its oracle calls becomes two calls to the
/// bit oracle of `X`: compute `X_{G(a)}`, xor in `beta_a` or `Z_a`, then
/// uncompute.
pub fn reduction_circuit<T: Real>(
    alg: &QueryAlgorithm<T>,
    n1: usize,
    n2: usize,
    beta: &[u64],
    choices: &ReductionChoices,
) -> Result<QueryAlgorithm<T>> {
    if alg.rounds() > 1 {
        return Err(Error::config("reduction takes a single-oracle algorithm"));
    }
    if beta.len() != 1 << n1 || choices.g.len() != beta.len() || choices.z.len() != beta.len() {
        return Err(Error::config("target, G and Z tables must cover every input"));
    }
    if beta.iter().zip(&choices.z).any(|(b, z)| b == z) {
        return Err(Error::domain("z", "every decoy must differ from its target"));
    }
    choices.position()?;
    let base = alg.num_qubits;
    let gw: Vec<usize> = (base..base + n2).collect();
    let xw = base + n2;
    let select: Vec<u64> = (0..2u64 << n1)
        .map(|i| {
            let a = (i & ((1 << n1) - 1)) as usize;
            if i >> n1 == 1 { beta[a] } else { choices.z[a] }
        })
        .collect();
    let mut steps = Vec::with_capacity(alg.steps.len() + 4 * alg.oracle_slots());
    for step in &alg.steps {
        let Step::Oracle { input, output, .. } = step else {
            steps.push(step.clone());
            continue;
        };
        if input.len() != n1 || output.len() != n2 {
            return Err(Error::config(format!("oracle slot is {} -> {} bits, expected {n1} -> {n2}", input.len(), output.len())));
        }
        let g = Step::Xor { input: input.clone(), output: gw.clone(), table: choices.g.clone(), controls: vec![] };
        let query = Step::Oracle { round: 0, input: gw.clone(), output: vec![xw] };
        let sel = Step::Xor { input: [input.clone(), vec![xw]].concat(), output: output.clone(), table: select.clone(), controls: vec![] };
        steps.extend([g.clone(), query.clone(), sel, query, g]);
    }
    QueryAlgorithm::new(base + n2 + 1, steps, alg.layout.clone(), 2 * alg.query_budget)
}

/// Runs the reduction once for fixed choices.
pub fn algorithm_b<T: Real>(
    alg: &QueryAlgorithm<T>,
    n1: usize,
    n2: usize,
    beta: &[u64],
    choices: &ReductionChoices,
) -> Result<ReductionRun<T>> {
    let b = reduction_circuit(alg, n1, n2, beta, choices)?;
    let xs: Vec<u64> = choices.x.iter().map(|&v| u64::from(v)).collect();
    let x_oracle = FunctionOracle::new(n2, 1, xs)?;
    let prepared = b.prepare()?;
    let run = prepared.run(&[x_oracle])?;
    let wires = b.layout.prover_messages.first().ok_or_else(|| Error::config("algorithm declares no output register"))?;
    let pos = choices.position()?;
    let mut located = BTreeMap::new();
    let mut success = T::zero();
    for (a, p) in register_distribution(&run.state, wires) {
        let g = choices.g[a as usize];
        *located.entry(g).or_insert_with(T::zero) += p;
        if g == pos {
            success += p;
        }
    }
    Ok(ReductionRun { success, x_queries: run.oracle_calls, located })
}

/// Reduction success averaged exactly over every `G`, decoy table and planted position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ReductionAverage<T: Real> {
    pub success: T,
    pub max_x_queries: usize,
    /// `Pr[F(A') = beta_{A'}]` for uniform `F`, run directly.
    pub direct: T,
    pub choices: u64,
}

pub fn algorithm_b_exhaustive<T: Real>(alg: &QueryAlgorithm<T>, n1: usize, n2: usize, beta: &[u64]) -> Result<ReductionAverage<T>> {
    let inputs = 1usize << n1;
    let size = 1u64 << n2;
    // G: size^inputs, Z: (size-1)^inputs, X: size
    let log2 = |v: u64| (64 - v.saturating_sub(1).leading_zeros()) as usize;
    check_enumerable("reduction choices", (inputs * (n2 + log2(size - 1)) + n2) as u32, DEFAULT_ENUM_LIMIT)?;
    let digits = |mut i: u64, radix: u64| -> Vec<u64> {
        (0..inputs)
            .map(|_| {
                let d = i % radix;
                i /= radix;
                d
            })
            .collect()
    };
    let (gs, zs) = (size.pow(inputs as u32), (size - 1).pow(inputs as u32));
    let mut total = T::zero();
    let mut max_q = 0;
    let mut count = 0u64;
    for gi in 0..gs {
        for zi in 0..zs {
            let z: Vec<u64> = digits(zi, size - 1).iter().zip(beta).map(|(&d, &b)| if d >= b { d + 1 } else { d }).collect();
            for pos in 0..size {
                let choices = ReductionChoices { g: digits(gi, size), z: z.clone(), x: (0..size).map(|i| u8::from(i == pos)).collect() };
                let run = algorithm_b::<T>(alg, n1, n2, beta, &choices)?;
                total += run.success;
                max_q = max_q.max(run.x_queries);
                count += 1;
            }
        }
    }
    let direct = direct_search_success(alg, n1, n2, beta)?;
    Ok(ReductionAverage { success: total / T::from_count(count), max_x_queries: max_q, direct, choices: count })
}

/// `Pr[F(A) = beta_A]` over uniform `F`.
pub fn direct_search_success<T: Real>(alg: &QueryAlgorithm<T>, n1: usize, n2: usize, beta: &[u64]) -> Result<T> {
    let law = output_value_law(alg, all_functions(n1, n2, 1 << 24)?)?;
    Ok(law.iter().filter(|((a, v), _)| beta.get(*a as usize) == Some(v)).fold(T::zero(), |acc, (_, &p)| acc + p))
}

/// Fixed algorithms for the equivalence test: one, two and one query on a
/// 2-bit input with a 1-bit answer. Output register on wires 0 and 1, answer on 2.
pub fn equivalence_test_algorithms<T: Real>() -> Result<Vec<(&'static str, QueryAlgorithm<T>)>> {
    let layout = OutputLayout { prover_messages: vec![vec![0, 1]], ..OutputLayout::default() };
    let q = || Step::Oracle { round: 0, input: vec![0, 1], output: vec![2] };
    let copy_back = Step::Cx { control: 2, target: 0 };
    let xor_answer = vec![Step::H { wire: 0 }, Step::H { wire: 1 }, q(), copy_back.clone()];
    let phase_twice = vec![
        Step::X { wire: 2 },
        Step::H { wire: 2 },
        Step::H { wire: 0 },
        Step::H { wire: 1 },
        q(),
        Step::H { wire: 0 },
        Step::Ry { wire: 1, angle: T::lit(0.9) },
        q(),
        Step::H { wire: 1 },
    ];
    let biased = vec![Step::Ry { wire: 0, angle: T::lit(1.1) }, Step::H { wire: 1 }, q(), Step::Cx { control: 2, target: 1 }, Step::Ry { wire: 0, angle: T::lit(0.4) }];
    Ok(vec![
        ("xor-answer", QueryAlgorithm::new(3, xor_answer, layout.clone(), 1)?),
        ("phase-twice", QueryAlgorithm::new(3, phase_twice, layout.clone(), 2)?),
        ("biased-copy", QueryAlgorithm::new(3, biased, layout, 1)?),
    ])
}
