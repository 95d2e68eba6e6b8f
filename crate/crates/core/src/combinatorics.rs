//! Exact integer combinatorics: multi-indices, integer and multi-index
//! compositions, set partitions and the Schröder–Hipparchus numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// `3 + √8`, the optimal geometric growth rate of the Schröder–Hipparchus numbers.
pub const C_KAPPA: f64 = 5.828_427_124_746_19;

/// Finitely supported sequence of naturals indexed by coordinates `1, 2, …`.
///
/// Only nonzero exponents are stored and coordinates are kept sorted, so the
/// derived `Eq`/`Hash`/`Ord` are canonical and usable as memoization keys.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    entries: BTreeMap<usize, u32>,
}

impl MultiIndex {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The unit multi-index `e_k`; `k` is 1-based.
    pub fn unit(k: usize) -> Self {
        assert!(k >= 1, "multi-index coordinates are 1-based");
        let mut m = Self::zero();
        m.entries.insert(k, 1);
        m
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, u32)>>(pairs: I) -> Result<Self> {
        let mut m = Self::zero();
        for (k, e) in pairs {
            if k == 0 {
                return Err(Error::domain("multi-index coordinates are 1-based"));
            }
            if e > 0 {
                *m.entries.entry(k).or_insert(0) += e;
            }
        }
        Ok(m)
    }

    /// Builds `α` from a dense exponent list `[α_1, α_2, …]`.
    pub fn from_dense(exponents: &[u32]) -> Self {
        let mut m = Self::zero();
        for (i, &e) in exponents.iter().enumerate() {
            if e > 0 {
                m.entries.insert(i + 1, e);
            }
        }
        m
    }

    /// Multi-index counting how often each coordinate occurs in `coords`.
    pub fn from_coordinates(coords: &[usize]) -> Result<Self> {
        Self::from_pairs(coords.iter().map(|&k| (k, 1)))
    }

    pub fn get(&self, k: usize) -> u32 {
        self.entries.get(&k).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// `|α| = Σ α_k`
    pub fn order(&self) -> u64 {
        self.entries.values().map(|&e| e as u64).sum()
    }

    /// `α! = Π α_k!`
    pub fn factorial(&self) -> BigUint {
        self.entries
            .values()
            .fold(BigUint::one(), |acc, &e| acc * factorial(e as u64))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.entries.iter().map(|(&k, &e)| (k, e))
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn max_coordinate(&self) -> usize {
        self.entries.keys().next_back().copied().unwrap_or(0)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        let mut m = self.clone();
        for (k, e) in other.iter() {
            *m.entries.entry(k).or_insert(0) += e;
        }
        m
    }

    /// `α − β`, or `None` unless `β ≤ α` componentwise.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut m = self.clone();
        for (k, e) in other.iter() {
            let cur = m.entries.get_mut(&k)?;
            if *cur < e {
                return None;
            }
            *cur -= e;
            if *cur == 0 {
                m.entries.remove(&k);
            }
        }
        Some(m)
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.iter().all(|(k, e)| other.get(k) >= e)
    }

    /// `binom(α, β) = Π binom(α_k, β_k)`; zero unless `β ≤ α`.
    pub fn binomial(&self, beta: &MultiIndex) -> BigUint {
        if !beta.le(self) {
            return BigUint::zero();
        }
        self.iter().fold(BigUint::one(), |acc, (k, e)| {
            acc * binomial(e as u64, beta.get(k) as u64)
        })
    }

    /// `γ^α = Π γ_k^{α_k}` for a weight sequence given as a function of the
    /// (1-based) coordinate.
    pub fn weight_pow(&self, weight: impl Fn(usize) -> f64) -> f64 {
        self.iter().map(|(k, e)| weight(k).powi(e as i32)).product()
    }

    /// Natural log of `γ^α`; `−∞` when some active weight vanishes.
    pub fn ln_weight_pow(&self, weight: impl Fn(usize) -> f64) -> f64 {
        self.iter()
            .map(|(k, e)| e as f64 * weight(k).ln())
            .sum()
    }

    /// Coordinates repeated by multiplicity, ascending: `2e1+e3 → [1, 1, 3]`.
    pub fn to_coordinates(&self) -> Vec<usize> {
        self.iter()
            .flat_map(|(k, e)| std::iter::repeat_n(k, e as usize))
            .collect()
    }

    /// Every `β ≤ α` (including `0` and `α`), in mixed-radix order.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let pairs: Vec<(usize, u32)> = self.iter().collect();
        let mut out = Vec::new();
        let mut digits = vec![0u32; pairs.len()];
        loop {
            out.push(MultiIndex {
                entries: pairs
                    .iter()
                    .zip(&digits)
                    .filter(|(_, &d)| d > 0)
                    .map(|(&(k, _), &d)| (k, d))
                    .collect(),
            });
            let mut i = 0;
            loop {
                if i == pairs.len() {
                    return out;
                }
                if digits[i] < pairs[i].1 {
                    digits[i] += 1;
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
        }
    }

    /// All multi-indices supported on coordinates `1..=dim` with
    /// `|α| ≤ max_order`, sorted by order and then canonically.
    pub fn all_up_to_order(dim: usize, max_order: u32) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zero()];
        let mut frontier = vec![MultiIndex::zero()];
        for _ in 0..max_order {
            let mut next = std::collections::BTreeSet::new();
            for m in &frontier {
                for k in 1..=dim {
                    next.insert(m.add(&MultiIndex::unit(k)));
                }
            }
            frontier = next.into_iter().collect();
            out.extend(frontier.iter().cloned());
        }
        out
    }
}

impl fmt::Display for MultiIndex {
    /// `0`, `e1`, `2e1+e3`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, e) in self.iter() {
            if !first {
                write!(f, "+")?;
            }
            first = false;
            if e == 1 {
                write!(f, "e{k}")?;
            } else {
                write!(f, "{e}e{k}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "0" || s.is_empty() {
            return Ok(MultiIndex::zero());
        }
        let mut pairs = Vec::new();
        for term in s.split('+') {
            let term = term.trim();
            let pos = term
                .find('e')
                .ok_or_else(|| Error::domain(format!("bad multi-index term {term:?}")))?;
            let (coef, coord) = term.split_at(pos);
            let e: u32 = if coef.is_empty() {
                1
            } else {
                coef.parse()
                    .map_err(|_| Error::domain(format!("bad exponent in {term:?}")))?
            };
            let k: usize = coord[1..]
                .parse()
                .map_err(|_| Error::domain(format!("bad coordinate in {term:?}")))?;
            pairs.push((k, e));
        }
        Self::from_pairs(pairs)
    }
}

/// Ordered tuple of positive integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Composition {
    pub parts: Vec<usize>,
}

impl Composition {
    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

/// All compositions of `n` into exactly `r` positive parts, lexicographically.
///
/// Out-of-range `r` (zero or larger than `n`) yields an empty list.
pub fn compositions(n: usize, r: usize) -> Vec<Composition> {
    fn rec(rest: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Composition>) {
        if slots == 1 {
            prefix.push(rest);
            out.push(Composition {
                parts: prefix.clone(),
            });
            prefix.pop();
            return;
        }
        for first in 1..=rest - (slots - 1) {
            prefix.push(first);
            rec(rest - first, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if r == 0 || r > n {
        return out;
    }
    rec(n, r, &mut Vec::with_capacity(r), &mut out);
    out
}

/// Ordered tuple of nonzero multi-indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndexComposition {
    pub parts: Vec<MultiIndex>,
}

/// All ordered `r`-tuples `(β_1, …, β_r)` of nonzero multi-indices with
/// `Σ β_j = α`. Empty when `r = 0` or `r > |α|`.
pub fn multi_index_compositions(alpha: &MultiIndex, r: usize) -> Vec<MultiIndexComposition> {
    fn rec(
        rest: &MultiIndex,
        slots: usize,
        prefix: &mut Vec<MultiIndex>,
        out: &mut Vec<MultiIndexComposition>,
    ) {
        if slots == 1 {
            if !rest.is_zero() {
                prefix.push(rest.clone());
                out.push(MultiIndexComposition {
                    parts: prefix.clone(),
                });
                prefix.pop();
            }
            return;
        }
        for beta in rest.sub_indices() {
            if beta.is_zero() {
                continue;
            }
            let remainder = rest.checked_sub(&beta).expect("β ≤ rest by construction");
            if (remainder.order() as usize) < slots - 1 {
                continue;
            }
            prefix.push(beta);
            rec(&remainder, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if r == 0 || r as u64 > alpha.order() {
        return out;
    }
    rec(alpha, r, &mut Vec::with_capacity(r), &mut out);
    out
}

/// A partition of `{0, …, n−1}` into nonempty blocks, each block sorted and
/// blocks ordered by their smallest element. Displayed 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SetPartition {
    pub blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Block sizes in block order.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{")?;
            for (j, x) in b.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", x + 1)?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

/// Iterator over set partitions, driven by restricted growth strings.
#[derive(Clone, Debug)]
pub struct SetPartitions {
    rgs: Vec<usize>,
    /// `prefix_max[i] = max(rgs[0..=i])`
    prefix_max: Vec<usize>,
    min_blocks: usize,
    done: bool,
}

/// Each partition of an `n`-element set with at least `min_blocks` blocks,
/// exactly once.
pub fn set_partitions(n: usize, min_blocks: usize) -> SetPartitions {
    SetPartitions {
        rgs: vec![0; n],
        prefix_max: vec![0; n],
        min_blocks,
        done: n == 0,
    }
}

impl SetPartitions {
    fn current(&self) -> SetPartition {
        let k = self.prefix_max.last().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); k];
        for (i, &b) in self.rgs.iter().enumerate() {
            blocks[b].push(i);
        }
        SetPartition { blocks }
    }

    fn advance(&mut self) {
        let n = self.rgs.len();
        for i in (1..n).rev() {
            if self.rgs[i] <= self.prefix_max[i - 1] {
                self.rgs[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.rgs[i]);
                for j in i + 1..n {
                    self.rgs[j] = 0;
                    self.prefix_max[j] = self.prefix_max[i];
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for SetPartitions {
    type Item = SetPartition;

    fn next(&mut self) -> Option<SetPartition> {
        while !self.done {
            let blocks = self.prefix_max.last().map_or(0, |m| m + 1);
            let keep = blocks >= self.min_blocks;
            let out = keep.then(|| self.current());
            self.advance();
            if out.is_some() {
                return out;
            }
        }
        None
    }
}

pub fn factorial(n: u64) -> BigUint {
    (2..=n).fold(BigUint::one(), |acc, k| acc * k)
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Bell numbers via the Bell triangle.
pub fn bell(n: usize) -> BigUint {
    let mut row = vec![BigUint::one()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(row.last().unwrap().clone());
        for x in &row {
            let v = next.last().unwrap() + x;
            next.push(v);
        }
        row = next;
    }
    row[0].clone()
}

/// Natural log of a positive big integer, accurate to double precision.
pub fn ln_big(x: &BigUint) -> f64 {
    assert!(!x.is_zero(), "log of zero");
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit value");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln n!` by direct summation.
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `κ_1, …, κ_max_n` from the three-term recursion
/// `(n+1) κ_{n+1} = (6n−3) κ_n − (n−2) κ_{n−1}`, `κ_1 = κ_2 = 1`.
pub fn schroeder_hipparchus_sequence(max_n: usize) -> Vec<BigUint> {
    let mut seq: Vec<BigUint> = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let v = if n <= 2 {
            BigUint::one()
        } else {
            // n = m + 1
            let m = (n - 1) as u64;
            let a = &seq[n - 2] * (6 * m - 3);
            let b = &seq[n - 3] * (m - 2);
            let num = a - b;
            debug_assert!((&num % (m + 1)).is_zero());
            num / (m + 1)
        };
        seq.push(v);
    }
    seq
}

/// `κ_n` via the three-term recursion.
pub fn schroeder_hipparchus(n: usize) -> Result<BigUint> {
    if n == 0 {
        return Err(Error::domain("κ_n is defined for n ≥ 1"));
    }
    Ok(schroeder_hipparchus_sequence(n).pop().expect("n ≥ 1"))
}

/// `κ_n` via its defining recursion `κ_n = Σ_{r=2}^n Σ_{i∈C(n,r)} Π_j κ_{i_j}`,
/// enumerating compositions explicitly. Exponential in `n`.
pub fn schroeder_hipparchus_by_compositions(n: usize) -> Result<BigUint> {
    if n == 0 {
        return Err(Error::domain("κ_n is defined for n ≥ 1"));
    }
    let mut kappa: Vec<BigUint> = vec![BigUint::zero(), BigUint::one()];
    for m in 2..=n {
        let mut total = BigUint::zero();
        for r in 2..=m {
            for c in compositions(m, r) {
                total += c
                    .parts
                    .iter()
                    .fold(BigUint::one(), |acc, &i| acc * &kappa[i]);
            }
        }
        kappa.push(total);
    }
    Ok(kappa.swap_remove(n))
}

/// `ln κ_n − (n−1) ln c_κ`; nonpositive whenever `κ_n ≤ c_κ^{n−1}`.
pub fn ln_kappa_ratio_to_bound(n: usize, kappa_n: &BigUint) -> f64 {
    ln_big(kappa_n) - (n as f64 - 1.0) * C_KAPPA.ln()
}

/// Log of the large-`n` approximation `¼ √((√18−4)/π) n^{−3/2} c_κ^n`.
pub fn ln_kappa_asymptotic(n: usize) -> f64 {
    let n = n as f64;
    let pre = 0.25 * ((18f64.sqrt() - 4.0) / std::f64::consts::PI).sqrt();
    pre.ln() - 1.5 * n.ln() + n * C_KAPPA.ln()
}

/// Checks `r! · Π i_j! ≤ n!` for a composition of `n` into `r` parts.
pub fn factorial_inequality_check(c: &Composition) -> bool {
    let lhs = c
        .parts
        .iter()
        .fold(factorial(c.len() as u64), |acc, &i| acc * factorial(i as u64));
    lhs <= factorial(c.total() as u64)
}

/// Checks `α! Σ_{β∈C(α,r)} Π_j |β_j|!/β_j! = |α|! binom(|α|−1, r−1)` exactly.
pub fn composition_identity_check(alpha: &MultiIndex, r: usize) -> bool {
    let (lhs, rhs) = composition_identity_sides(alpha, r);
    lhs == rhs
}

/// Both sides of the multi-index composition identity as exact integers.
///
/// The left side is an integer because `α!/Π β_j!` is a multinomial
/// coefficient whenever `Σ β_j = α`.
pub fn composition_identity_sides(alpha: &MultiIndex, r: usize) -> (BigUint, BigUint) {
    let n = alpha.order();
    let afact = alpha.factorial();
    let mut lhs = BigUint::zero();
    for comp in multi_index_compositions(alpha, r) {
        let denom = comp
            .parts
            .iter()
            .fold(BigUint::one(), |acc, b| acc * b.factorial());
        let num = comp
            .parts
            .iter()
            .fold(BigUint::one(), |acc, b| acc * factorial(b.order()));
        lhs += &afact / denom * num;
    }
    let rhs = if r == 0 || n == 0 {
        BigUint::zero()
    } else {
        factorial(n) * binomial(n - 1, r as u64 - 1)
    };
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    /// Compositions of `n` are in bijection with subsets of the `n−1` gaps
    /// between unit cells; this enumerates them by bitmask.
    fn compositions_by_bitmask(n: usize, r: usize) -> HashSet<Vec<usize>> {
        let mut out = HashSet::new();
        for mask in 0u32..(1 << (n - 1)) {
            if mask.count_ones() as usize + 1 != r {
                continue;
            }
            let mut parts = Vec::new();
            let mut len = 1;
            for gap in 0..n - 1 {
                if mask & (1 << gap) != 0 {
                    parts.push(len);
                    len = 1;
                } else {
                    len += 1;
                }
            }
            parts.push(len);
            out.insert(parts);
        }
        out
    }

    #[test]
    fn compositions_examples() {
        let c: Vec<Vec<usize>> = compositions(4, 2).into_iter().map(|c| c.parts).collect();
        assert_eq!(c, vec![vec![1, 3], vec![2, 2], vec![3, 1]]);
        assert_eq!(compositions(5, 5), vec![Composition { parts: vec![1; 5] }]);
        assert_eq!(compositions(5, 3).len(), 6);
        assert!(compositions(3, 0).is_empty());
        assert!(compositions(3, 4).is_empty());
    }

    #[test]
    fn compositions_match_bitmask_oracle() {
        for n in 1..=10 {
            for r in 1..=n {
                let got: HashSet<Vec<usize>> =
                    compositions(n, r).into_iter().map(|c| c.parts).collect();
                assert_eq!(got, compositions_by_bitmask(n, r), "n={n} r={r}");
                assert_eq!(
                    BigUint::from(got.len()),
                    binomial(n as u64 - 1, r as u64 - 1)
                );
            }
        }
    }

    #[test]
    fn compositions_are_lexicographic() {
        let c = compositions(7, 3);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn multi_index_compositions_examples() {
        let a = MultiIndex::from_dense(&[2]);
        let c = multi_index_compositions(&a, 2);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].parts, vec![MultiIndex::unit(1), MultiIndex::unit(1)]);

        let a = MultiIndex::from_dense(&[1, 1]);
        let c = multi_index_compositions(&a, 2);
        let parts: HashSet<Vec<MultiIndex>> = c.into_iter().map(|c| c.parts).collect();
        let expected: HashSet<Vec<MultiIndex>> = [
            vec![MultiIndex::unit(1), MultiIndex::unit(2)],
            vec![MultiIndex::unit(2), MultiIndex::unit(1)],
        ]
        .into_iter()
        .collect();
        assert_eq!(parts, expected);

        let a = MultiIndex::from_dense(&[3, 0, 2]);
        let c = multi_index_compositions(&a, 1);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].parts, vec![a.clone()]);
        assert!(multi_index_compositions(&a, 6).is_empty());
    }

    /// Brute force: every r-tuple of sub-indices of α, filtered.
    fn mic_brute(alpha: &MultiIndex, r: usize) -> HashSet<Vec<MultiIndex>> {
        let subs: Vec<MultiIndex> = alpha.sub_indices().into_iter().filter(|b| !b.is_zero()).collect();
        let mut out = HashSet::new();
        let mut idx = vec![0usize; r];
        loop {
            let tuple: Vec<MultiIndex> = idx.iter().map(|&i| subs[i].clone()).collect();
            let sum = tuple.iter().fold(MultiIndex::zero(), |a, b| a.add(b));
            if &sum == alpha {
                out.insert(tuple);
            }
            let mut i = 0;
            loop {
                if i == r {
                    return out;
                }
                idx[i] += 1;
                if idx[i] < subs.len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn multi_index_compositions_match_brute_force() {
        for dense in [[1u32, 1, 0], [2, 1, 0], [1, 1, 1], [2, 0, 2], [3, 1, 0]] {
            let a = MultiIndex::from_dense(&dense);
            for r in 1..=a.order() as usize {
                let got: Vec<Vec<MultiIndex>> =
                    multi_index_compositions(&a, r).into_iter().map(|c| c.parts).collect();
                let set: HashSet<_> = got.iter().cloned().collect();
                assert_eq!(set.len(), got.len(), "duplicates for {a} r={r}");
                assert_eq!(set, mic_brute(&a, r), "{a} r={r}");
            }
        }
    }

    #[test]
    fn set_partition_counts() {
        assert_eq!(set_partitions(3, 1).count(), 5);
        let two: Vec<_> = set_partitions(2, 2).collect();
        assert_eq!(two.len(), 1);
        assert_eq!(two[0].blocks, vec![vec![0], vec![1]]);
        assert_eq!(two[0].to_string(), "{{1},{2}}");
        assert_eq!(set_partitions(4, 2).count(), 14);
        for n in 1..=9 {
            assert_eq!(BigUint::from(set_partitions(n, 1).count()), bell(n), "n={n}");
        }
        assert_eq!(bell(4), BigUint::from(15u32));
    }

    #[test]
    fn set_partitions_are_valid_and_distinct() {
        let n = 6;
        let mut seen = HashSet::new();
        for p in set_partitions(n, 1) {
            let mut all: Vec<usize> = p.blocks.iter().flatten().copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            assert!(p.blocks.iter().all(|b| !b.is_empty()));
            assert!(seen.insert(p.blocks));
        }
    }

    #[test]
    fn partition_block_sizes_satisfy_factorial_inequality() {
        for n in 1..=7 {
            for p in set_partitions(n, 1) {
                let mut sizes = p.block_sizes();
                sizes.sort_unstable();
                assert!(factorial_inequality_check(&Composition { parts: sizes }));
            }
        }
    }

    #[test]
    fn kappa_small_values() {
        let expected = [1u64, 1, 3, 11, 45, 197, 903, 4279, 20793, 103049];
        let seq = schroeder_hipparchus_sequence(10);
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(seq[i], BigUint::from(*e));
            assert_eq!(
                schroeder_hipparchus_by_compositions(i + 1).unwrap(),
                BigUint::from(*e)
            );
        }
        assert!(matches!(schroeder_hipparchus(0), Err(Error::Domain(_))));
        assert!(schroeder_hipparchus_by_compositions(0).is_err());
    }

    #[test]
    fn c_kappa_constant() {
        assert!((C_KAPPA - (3.0 + 8f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn factorial_inequality_examples() {
        assert!(factorial_inequality_check(&Composition { parts: vec![2, 2] }));
        let ones = Composition { parts: vec![1; 6] };
        let lhs = factorial(6);
        assert_eq!(lhs, factorial(6)); // equality case r! = n!
        assert!(factorial_inequality_check(&ones));
    }

    #[test]
    fn composition_identity_examples() {
        let a = MultiIndex::from_dense(&[2]);
        let (l, r) = composition_identity_sides(&a, 2);
        assert_eq!(l, BigUint::from(2u32));
        assert_eq!(r, BigUint::from(2u32));
        let a = MultiIndex::from_dense(&[1, 1, 1]);
        let (l, r) = composition_identity_sides(&a, 3);
        assert_eq!(l, factorial(3));
        assert_eq!(r, factorial(3));
    }

    #[test]
    fn multi_index_display_roundtrip() {
        let a = MultiIndex::from_dense(&[1, 0, 2]);
        assert_eq!(a.to_string(), "e1+2e3");
        assert_eq!("e1+2e3".parse::<MultiIndex>().unwrap(), a);
        assert_eq!("0".parse::<MultiIndex>().unwrap(), MultiIndex::zero());
        assert!("x3".parse::<MultiIndex>().is_err());
        assert!("e0".parse::<MultiIndex>().is_err());
    }

    #[test]
    fn multi_index_arithmetic() {
        let a = MultiIndex::from_dense(&[2, 1]);
        let b = MultiIndex::unit(1);
        assert_eq!(a.checked_sub(&b), Some(MultiIndex::from_dense(&[1, 1])));
        assert_eq!(b.checked_sub(&a), None);
        assert_eq!(a.factorial(), BigUint::from(2u32));
        assert_eq!(a.order(), 3);
        assert_eq!(a.binomial(&b), BigUint::from(2u32));
        assert_eq!(a.sub_indices().len(), 6);
        assert_eq!(a.to_coordinates(), vec![1, 1, 2]);
        assert!((a.weight_pow(|k| k as f64 * 0.5) - 0.25).abs() < 1e-15);
        // 1 + 3 + 6 + 10 multi-indices in 3 variables up to order 3
        assert_eq!(MultiIndex::all_up_to_order(3, 3).len(), 20);
    }

    #[test]
    fn ln_big_matches_f64_and_large() {
        let x = factorial(20);
        assert!((ln_big(&x) - ln_factorial(20)).abs() < 1e-12);
        let big = factorial(400);
        assert!((ln_big(&big) - ln_factorial(400)).abs() / ln_factorial(400) < 1e-13);
    }
}
