//! Arithmetic in GF(2^m) and the polynomial hash families built on it.
//!
//! A member of the family `H(n1, n2, t)` is a polynomial of degree at most
//! `t - 1` over GF(2^m), `m = max(n1, n2)`. An input `alpha` is embedded by
//! zero-padding its high bits, the polynomial is evaluated by Horner's rule,
//! and the low `n2` bits of the field element are the output. The outputs at
//! any `t` distinct inputs are jointly uniform over a uniform draw of the
//! coefficients, and truncating a uniform field element keeps it uniform.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_enumerable, Error, Result};

/// Largest supported field degree.
pub const MAX_DEGREE: u8 = 16;

/// Default cap on the number of items any exhaustive enumeration may visit.
pub const DEFAULT_ENUM_LIMIT: u64 = 1 << 20;

/// Irreducible modulus for each degree `m` (index `m`), including the leading
/// term. Per degree: minimal Hamming weight, then smallest integer value.
pub const IRREDUCIBLE: [u32; 17] = [
    0, 0x2, 0x7, 0xb, 0x13, 0x25, 0x43, 0x83, 0x11b, 0x203, 0x409, 0x805, 0x1009, 0x201b, 0x4021, 0x8003,
    0x1002b,
];

/// Carry-less product of two polynomials over GF(2).
#[inline]
pub fn clmul(a: u32, b: u32) -> u64 {
    let (a, mut b) = (a as u64, b);
    let mut acc = 0u64;
    let mut shift = 0;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a << shift;
        }
        b >>= 1;
        shift += 1;
    }
    acc
}

/// Reduces a polynomial of degree `< 2m` modulo the fixed modulus of degree `m`.
#[inline]
fn reduce(mut p: u64, m: u8) -> u32 {
    let modulus = IRREDUCIBLE[m as usize] as u64;
    let m = m as u32;
    while p >> m != 0 {
        let top = 63 - p.leading_zeros();
        p ^= modulus << (top - m);
    }
    p as u32
}

#[inline]
fn mul_raw(a: u32, b: u32, m: u8) -> u32 {
    reduce(clmul(a, b), m)
}

/// An element of GF(2^m) stored as its bit pattern.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    value: u32,
    m: u8,
}

impl FieldElement {
    pub fn new(value: u32, m: u8) -> Result<Self> {
        if m == 0 || m > MAX_DEGREE {
            return Err(Error::domain("field degree", format!("m = {m}, expected 1..={MAX_DEGREE}")));
        }
        if value >> m != 0 {
            return Err(Error::domain("field element", format!("{value:#x} does not fit in {m} bits")));
        }
        Ok(FieldElement { value, m })
    }

    pub fn zero(m: u8) -> Result<Self> {
        Self::new(0, m)
    }

    pub fn one(m: u8) -> Result<Self> {
        Self::new(1, m)
    }

    pub fn value(self) -> u32 {
        self.value
    }

    pub fn degree(self) -> u8 {
        self.m
    }

    /// Field addition (bitwise xor).
    pub fn add(self, other: Self) -> Result<Self> {
        same_degree(self, other)?;
        Ok(FieldElement { value: self.value ^ other.value, m: self.m })
    }
}

fn same_degree(a: FieldElement, b: FieldElement) -> Result<()> {
    if a.m != b.m {
        return Err(Error::DegreeMismatch { left: a.m, right: b.m });
    }
    Ok(())
}

/// Product in GF(2^m) modulo [`IRREDUCIBLE`]`[m]`.
pub fn field_mul(a: FieldElement, b: FieldElement) -> Result<FieldElement> {
    same_degree(a, b)?;
    Ok(FieldElement { value: mul_raw(a.value, b.value, a.m), m: a.m })
}

/// One member of a polynomial hash family, mapping `n1`-bit strings to
/// `n2`-bit strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "HashFunctionRecord", into = "HashFunctionRecord")]
pub struct HashFunction {
    m: u8,
    n1: u8,
    n2: u8,
    coefficients: Vec<FieldElement>,
}

#[derive(Serialize, Deserialize)]
struct HashFunctionRecord {
    m: u8,
    n1: u8,
    n2: u8,
    coefficients: Vec<u32>,
}

impl TryFrom<HashFunctionRecord> for HashFunction {
    type Error = Error;

    fn try_from(r: HashFunctionRecord) -> Result<Self> {
        let coefficients = r.coefficients.iter().map(|&c| FieldElement::new(c, r.m)).collect::<Result<Vec<_>>>()?;
        HashFunction::new(r.n1, r.n2, coefficients)
    }
}

impl From<HashFunction> for HashFunctionRecord {
    fn from(h: HashFunction) -> Self {
        HashFunctionRecord { m: h.m, n1: h.n1, n2: h.n2, coefficients: h.coefficients.iter().map(|c| c.value).collect() }
    }
}

impl HashFunction {
    /// Builds a hash function from its coefficients, lowest degree first.
    pub fn new(n1: u8, n2: u8, coefficients: Vec<FieldElement>) -> Result<Self> {
        let m = check_widths(n1, n2)?;
        if coefficients.is_empty() {
            return Err(Error::domain("hash coefficients", "at least one coefficient is required"));
        }
        if let Some(c) = coefficients.iter().find(|c| c.m != m) {
            return Err(Error::DegreeMismatch { left: c.m, right: m });
        }
        Ok(HashFunction { m, n1, n2, coefficients })
    }

    pub fn n1(&self) -> u8 {
        self.n1
    }

    pub fn n2(&self) -> u8 {
        self.n2
    }

    pub fn degree(&self) -> u8 {
        self.m
    }

    pub fn coefficients(&self) -> &[FieldElement] {
        &self.coefficients
    }

    /// Independence parameter `t` (number of coefficients).
    pub fn independence(&self) -> usize {
        self.coefficients.len()
    }

    #[inline]
    fn eval_raw(&self, alpha: u32) -> u32 {
        let mut acc = 0u32;
        for c in self.coefficients.iter().rev() {
            acc = mul_raw(acc, alpha, self.m) ^ c.value;
        }
        acc & ((1u32 << self.n2) - 1)
    }

    /// Evaluates every input in order; entry `alpha` is `h(alpha)`.
    pub fn table(&self) -> Vec<u64> {
        (0..1u32 << self.n1).map(|a| self.eval_raw(a) as u64).collect()
    }
}

/// Evaluates `h(alpha)`.
pub fn eval_hash(h: &HashFunction, alpha: u64) -> Result<u64> {
    if alpha >> h.n1 != 0 {
        return Err(Error::domain("hash input", format!("{alpha:#x} does not fit in {} bits", h.n1)));
    }
    Ok(h.eval_raw(alpha as u32) as u64)
}

fn check_widths(n1: u8, n2: u8) -> Result<u8> {
    for (name, w) in [("n1", n1), ("n2", n2)] {
        if w == 0 || w > MAX_DEGREE {
            return Err(Error::domain("hash width", format!("{name} = {w}, expected 1..={MAX_DEGREE}")));
        }
    }
    Ok(n1.max(n2))
}

/// The strongly `t`-universal family `H(n1, n2, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashFamily {
    n1: u8,
    n2: u8,
    t: usize,
    m: u8,
}

impl HashFamily {
    pub fn new(n1: u8, n2: u8, t: usize) -> Result<Self> {
        let m = check_widths(n1, n2)?;
        if t == 0 {
            return Err(Error::domain("independence parameter", "t must be at least 1"));
        }
        Ok(HashFamily { n1, n2, t, m })
    }

    pub fn n1(&self) -> u8 {
        self.n1
    }

    pub fn n2(&self) -> u8 {
        self.n2
    }

    pub fn independence(&self) -> usize {
        self.t
    }

    pub fn degree(&self) -> u8 {
        self.m
    }

    /// `log2 |H| = m * t`.
    pub fn size_log2(&self) -> u32 {
        self.m as u32 * self.t as u32
    }

    /// Family size, if it fits in a `u64`.
    pub fn size(&self) -> Option<u64> {
        let bits = self.size_log2();
        (bits < 64).then(|| 1u64 << bits)
    }

    /// The member with the given lexicographic index: coefficient `c_0` is the
    /// most significant digit in base `2^m`.
    pub fn function_at(&self, index: u64) -> Result<HashFunction> {
        match self.size() {
            Some(size) if index < size => {}
            _ => return Err(Error::domain("family index", format!("{index} is outside the family"))),
        }
        let mask = (1u64 << self.m) - 1;
        let coefficients = (0..self.t)
            .map(|j| {
                let shift = self.m as usize * (self.t - 1 - j);
                FieldElement { value: ((index >> shift) & mask) as u32, m: self.m }
            })
            .collect();
        Ok(HashFunction { m: self.m, n1: self.n1, n2: self.n2, coefficients })
    }

    /// Draws a member uniformly: every coefficient independent and uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HashFunction {
        let coefficients =
            (0..self.t).map(|_| FieldElement { value: rng.random_range(0..1u32 << self.m), m: self.m }).collect();
        HashFunction { m: self.m, n1: self.n1, n2: self.n2, coefficients }
    }
}

/// Draws `h` uniformly from `family` using `rng`.
pub fn sample_hash<R: Rng + ?Sized>(family: &HashFamily, rng: &mut R) -> HashFunction {
    family.sample(rng)
}

/// Every member of `family` in lexicographic coefficient order.
pub fn enumerate_family(family: &HashFamily, limit: u64) -> Result<impl Iterator<Item = HashFunction> + '_> {
    let size = check_enumerable(format!("hash family H({}, {}, {})", family.n1, family.n2, family.t), family.size_log2(), limit)?;
    Ok((0..size).map(move |i| family.function_at(i).expect("index within family")))
}

/// Result of an exhaustive uniformity audit of a hash family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityAudit {
    pub n1: u8,
    pub n2: u8,
    pub t: usize,
    pub m: u8,
    pub family_size: u64,
    /// Size of the input tuples checked, `min(t, 2^n1)`.
    pub tuple_size: usize,
    pub tuples_checked: u64,
    /// Hits every output tuple should receive.
    pub expected_count: u64,
    /// Largest `|count - expected|` over all tuples and output tuples.
    pub max_deviation: u64,
    /// `point_counts[alpha][beta]` = number of members with `h(alpha) = beta`.
    pub point_counts: Vec<Vec<u64>>,
}

impl UniformityAudit {
    pub fn passed(&self) -> bool {
        self.max_deviation == 0
    }
}

/// Counts outputs over the whole family for every tuple of distinct inputs.
///
/// Work is `|H| * binom(2^n1, t)`, which must stay under `limit` as well.
pub fn audit_family(family: &HashFamily, limit: u64) -> Result<UniformityAudit> {
    let members: Vec<Vec<u64>> = enumerate_family(family, limit)?.map(|h| h.table()).collect();
    let domain = 1usize << family.n1;
    let tuple_size = family.t.min(domain);
    let family_size = members.len() as u64;
    let outputs = 1u64 << family.n2;

    let mut point_counts = vec![vec![0u64; outputs as usize]; domain];
    for table in &members {
        for (alpha, &beta) in table.iter().enumerate() {
            point_counts[alpha][beta as usize] += 1;
        }
    }

    let joint_bits = family.n2 as u32 * tuple_size as u32;
    if joint_bits >= 32 {
        return Err(Error::domain("audit tuple", "joint output space too large to tabulate"));
    }
    let joint_outputs = 1u64 << joint_bits;
    let expected_count = family_size / joint_outputs;
    let tuples = combinations(domain, tuple_size);
    let work = (tuples.len() as u64).saturating_mul(family_size);
    if work > limit.saturating_mul(16) {
        return Err(Error::EnumerationLimit {
            what: "uniformity audit".into(),
            size_log2: 64 - work.leading_zeros(),
            limit,
        });
    }

    let mut max_deviation = 0u64;
    let mut counts = vec![0u64; joint_outputs as usize];
    for tuple in &tuples {
        counts.iter_mut().for_each(|c| *c = 0);
        for table in &members {
            let key = tuple.iter().fold(0u64, |acc, &a| (acc << family.n2) | table[a]);
            counts[key as usize] += 1;
        }
        for &c in &counts {
            max_deviation = max_deviation.max(c.abs_diff(expected_count));
        }
    }

    Ok(UniformityAudit {
        n1: family.n1,
        n2: family.n2,
        t: family.t,
        m: family.m,
        family_size,
        tuple_size,
        tuples_checked: tuples.len() as u64,
        expected_count,
        max_deviation,
        point_counts,
    })
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            if n - i < k - current.len() {
                break;
            }
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}
