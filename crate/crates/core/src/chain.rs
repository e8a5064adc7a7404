//! The stochastic adding machines as Markov kernels.
//!
//! Rows are derived in closed form from the digit pattern of the source state.
//! The samplers realize the machines the other way round, drawing one carry
//! coin per digit (base 2) or per transducer edge (Fibonacci), so the two act
//! as independent cross-checks of each other.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeration::{
    self, apply_outputs, binary_encode, zeckendorf_decode, zeckendorf_encode, FibTable,
    ZeckendorfWord,
};

/// Numeration base of the adding machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Binary,
    Fibonacci,
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Base::Binary => "binary",
            Base::Fibonacci => "fibonacci",
        })
    }
}

impl std::str::FromStr for Base {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "2" => Ok(Base::Binary),
            "fib" | "fibonacci" => Ok(Base::Fibonacci),
            _ => Err(Error::InvalidParameter("base must be `binary` or `fib`")),
        }
    }
}

/// Carry probability `p`, strictly between 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ProbParam(f64);

impl ProbParam {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(ProbParam(p))
        } else {
            Err(Error::InvalidProbability(p))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `1 - p`, the probability that a carry is dropped.
    pub fn fail(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for ProbParam {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        ProbParam::new(p)
    }
}

impl From<ProbParam> for f64 {
    fn from(p: ProbParam) -> f64 {
        p.0
    }
}

/// One row of the transition operator: target states with their probabilities,
/// sorted by target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionRow {
    pub source: u64,
    pub entries: Vec<(u64, f64)>,
}

impl TransitionRow {
    fn from_unsorted(source: u64, mut entries: Vec<(u64, f64)>) -> Self {
        entries.sort_by_key(|&(t, _)| t);
        TransitionRow { source, entries }
    }

    pub fn get(&self, target: u64) -> f64 {
        self.entries
            .binary_search_by_key(&target, |&(t, _)| t)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v).sum()
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|&(t, _)| t)
    }
}

/// Base-2 row. With `s` trailing ones in `n`: stay with `1-p`, move to `n+1`
/// with `p^(s+1)`, and to `n - 2^m + 1` with `p^m (1-p)` for `1 <= m <= s`.
pub fn binary_row(n: u64, p: ProbParam) -> TransitionRow {
    let (p, q) = (p.get(), p.fail());
    let s = n.trailing_ones();
    let mut entries = Vec::with_capacity(s as usize + 2);
    entries.push((n, q));
    entries.push((n + 1, p.powi(s as i32 + 1)));
    for m in 1..=s {
        entries.push((n + 1 - (1u64 << m), p.powi(m as i32) * q));
    }
    TransitionRow::from_unsorted(n, entries)
}

/// Values of the successive carry blocks in the Zeckendorf suffix of `n`.
///
/// The suffix is either `(10)^j 00`, `101 (10)^(j-1) 00` or `001`. Each `10`
/// or `101` block is cleared when the carry passes through it; the final
/// `00`/`001` block absorbs the carry.
fn fib_carry_blocks(word: &ZeckendorfWord, fibs: &FibTable) -> Vec<u64> {
    let f = |k: usize| fibs.get(k).expect("index within table");
    let mut blocks = Vec::new();
    let mut pos = 0;
    if word.digit(0) == 1 {
        if word.digit(2) == 0 {
            return blocks;
        }
        blocks.push(f(0) + f(2));
        pos = 3;
    }
    while word.digit(pos + 1) == 1 {
        blocks.push(f(pos + 1));
        pos += 2;
    }
    blocks
}

/// Fibonacci-base row. If the carry crosses `j` clearable blocks before being
/// absorbed, `n` moves to `n+1` with `p^(j+1)`, stays with `1-p`, and drops to
/// `n` minus the first `m` blocks with `p^m (1-p)` for `1 <= m <= j`.
pub fn fib_row(n: u64, p: ProbParam) -> TransitionRow {
    let (p, q) = (p.get(), p.fail());
    let fibs = FibTable::full();
    let blocks = fib_carry_blocks(&zeckendorf_encode(n), &fibs);
    let mut entries = Vec::with_capacity(blocks.len() + 2);
    entries.push((n, q));
    entries.push((n + 1, p.powi(blocks.len() as i32 + 1)));
    let mut cleared = 0;
    for (m, block) in blocks.iter().enumerate() {
        cleared += block;
        entries.push((n - cleared, p.powi(m as i32 + 1) * q));
    }
    TransitionRow::from_unsorted(n, entries)
}

pub fn row(base: Base, n: u64, p: ProbParam) -> TransitionRow {
    match base {
        Base::Binary => binary_row(n, p),
        Base::Fibonacci => fib_row(n, p),
    }
}

/// Source of the i.i.d. carry variables `e_i`.
pub trait CarryCoin {
    /// Returns `true` (carry propagates) with probability `p`.
    fn flip(&mut self, p: ProbParam) -> bool;
}

/// Always propagates: the deterministic adding machine.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysCarry;

impl CarryCoin for AlwaysCarry {
    fn flip(&mut self, _: ProbParam) -> bool {
        true
    }
}

/// Never propagates: every step is a self-loop.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeverCarry;

impl CarryCoin for NeverCarry {
    fn flip(&mut self, _: ProbParam) -> bool {
        false
    }
}

/// Seeded, counter-based random stream. Independent streams for parallel work
/// come from [`RngStream::fork`].
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream number `id` under the same seed, disjoint from every other id.
    pub fn fork(&self, id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id.wrapping_add(1));
        RngStream {
            seed: self.seed,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: u64) -> u64 {
        self.rng.random_range(0..bound)
    }
}

impl CarryCoin for RngStream {
    fn flip(&mut self, p: ProbParam) -> bool {
        self.rng.random_bool(p.get())
    }
}

/// One step of the base-2 machine: `r_i' = r_i + e_i c'_{i-1} mod 2`. Coins are
/// drawn only while a carry is pending.
pub fn binary_sample<C: CarryCoin + ?Sized>(n: u64, p: ProbParam, coin: &mut C) -> u64 {
    let mut digits = binary_encode(n).digits().to_vec();
    let mut i = 0;
    loop {
        if !coin.flip(p) {
            break;
        }
        if i == digits.len() {
            digits.push(0);
        }
        if digits[i] == 0 {
            digits[i] = 1;
            break;
        }
        digits[i] = 0;
        i += 1;
    }
    digits
        .iter()
        .enumerate()
        .map(|(i, &d)| (d as u64) << i)
        .sum()
}

/// One step of the Fibonacci machine: walks the transducer path of `n` and
/// flips a coin on every carrying edge. A failed coin keeps that block and
/// everything above it.
pub fn fib_sample<C: CarryCoin + ?Sized>(n: u64, p: ProbParam, coin: &mut C) -> u64 {
    let word = zeckendorf_encode(n);
    let path = numeration::transductor_trace(&word).expect("valid word");
    let carrying = path.carry_len();
    let taken = (0..carrying).take_while(|_| coin.flip(p)).count();
    let digits = apply_outputs(word.digits(), &path.reading_order()[..taken]);
    let next = ZeckendorfWord::from_digits(digits).expect("transducer output is Zeckendorf");
    zeckendorf_decode(&next).expect("within range")
}

pub fn sample<C: CarryCoin + ?Sized>(base: Base, n: u64, p: ProbParam, coin: &mut C) -> u64 {
    match base {
        Base::Binary => binary_sample(n, p, coin),
        Base::Fibonacci => fib_sample(n, p, coin),
    }
}

/// `steps` iterations of the sampler from `n0`; the result includes `n0`.
pub fn trajectory<C: CarryCoin + ?Sized>(
    base: Base,
    n0: u64,
    steps: usize,
    p: ProbParam,
    coin: &mut C,
) -> Vec<u64> {
    let mut states = Vec::with_capacity(steps + 1);
    let mut n = n0;
    states.push(n);
    for _ in 0..steps {
        n = sample(base, n, p, coin);
        states.push(n);
    }
    states
}

/// Empirical one-step distribution compared against the exact row.
#[derive(Debug, Clone, Serialize)]
pub struct HistogramCheck {
    pub source: u64,
    pub samples: usize,
    /// `(state, exact, empirical)` over the union of the row support and the
    /// observed states.
    pub bins: Vec<(u64, f64, f64)>,
    pub max_gap: f64,
}

impl HistogramCheck {
    /// Largest gap measured in binomial standard deviations of the exact value.
    pub fn max_sigmas(&self) -> f64 {
        let n = self.samples as f64;
        self.bins
            .iter()
            .map(|&(_, exact, emp)| {
                let sd = (exact * (1.0 - exact) / n).sqrt();
                if sd > 0.0 {
                    (emp - exact).abs() / sd
                } else if emp == exact {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn histogram_check<C: CarryCoin + ?Sized>(
    base: Base,
    n: u64,
    p: ProbParam,
    samples: usize,
    coin: &mut C,
) -> Result<HistogramCheck> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1"));
    }
    let exact = row(base, n, p);
    let mut counts = std::collections::BTreeMap::<u64, usize>::new();
    for t in exact.support() {
        counts.insert(t, 0);
    }
    for _ in 0..samples {
        *counts.entry(sample(base, n, p, coin)).or_insert(0) += 1;
    }
    let bins: Vec<_> = counts
        .into_iter()
        .map(|(t, c)| (t, exact.get(t), c as f64 / samples as f64))
        .collect();
    let max_gap = bins
        .iter()
        .map(|&(_, e, o)| (e - o).abs())
        .fold(0.0, f64::max);
    Ok(HistogramCheck {
        source: n,
        samples,
        bins,
        max_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> ProbParam {
        ProbParam::new(v).unwrap()
    }

    fn assert_row(row: &TransitionRow, expected: &[(u64, f64)]) {
        let mut expected = expected.to_vec();
        expected.sort_by_key(|e| e.0);
        assert_eq!(row.entries.len(), expected.len(), "{row:?}");
        for (&(t, v), &(et, ev)) in row.entries.iter().zip(&expected) {
            assert_eq!(t, et);
            assert!((v - ev).abs() < 1e-15, "{t}: {v} vs {ev}");
        }
    }

    #[test]
    fn prob_param_bounds() {
        assert!(ProbParam::new(0.0).is_err());
        assert!(ProbParam::new(1.0).is_err());
        assert!(ProbParam::new(f64::NAN).is_err());
        assert_eq!(ProbParam::new(0.25).unwrap().fail(), 0.75);
    }

    #[test]
    fn binary_row_examples() {
        let q = p(0.7);
        assert_row(&binary_row(2, q), &[(2, 0.3), (3, 0.7)]);
        assert_row(
            &binary_row(3, p(0.5)),
            &[(3, 0.5), (4, 0.125), (2, 0.25), (0, 0.125)],
        );
        assert_row(&binary_row(1, q), &[(1, 0.3), (2, 0.49), (0, 0.7 * 0.3)]);
    }

    #[test]
    fn fib_row_examples() {
        let q = p(0.7);
        assert_row(&fib_row(10, q), &[(10, 0.3), (11, 0.49), (8, 0.7 * 0.3)]);
        assert_row(&fib_row(2, q), &[(2, 0.3), (3, 0.49), (0, 0.7 * 0.3)]);
        assert_row(&fib_row(1, q), &[(1, 0.3), (2, 0.7)]);
        assert_row(&fib_row(0, q), &[(0, 0.3), (1, 0.7)]);
        // 7 = 1010: two clearable blocks.
        assert_row(
            &fib_row(7, q),
            &[
                (7, 0.3),
                (8, 0.7f64.powi(3)),
                (5, 0.7 * 0.3),
                (0, 0.49 * 0.3),
            ],
        );
    }

    #[test]
    fn fib_rows_never_jump_two() {
        for n in 0..2000 {
            let r = fib_row(n, p(0.3));
            assert!(r.support().all(|t| t <= n + 1));
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_limits() {
        for n in 0..200 {
            assert_eq!(binary_sample(n, p(0.5), &mut AlwaysCarry), n + 1);
            assert_eq!(fib_sample(n, p(0.5), &mut AlwaysCarry), n + 1);
            assert_eq!(binary_sample(n, p(0.5), &mut NeverCarry), n);
            assert_eq!(fib_sample(n, p(0.5), &mut NeverCarry), n);
        }
        assert_eq!(
            trajectory(Base::Binary, 0, 5, p(0.9), &mut AlwaysCarry),
            vec![0, 1, 2, 3, 4, 5]
        );
    }

    #[test]
    fn seeded_trajectories_reproduce() {
        let a = trajectory(Base::Fibonacci, 0, 500, p(0.6), &mut RngStream::new(42));
        let b = trajectory(Base::Fibonacci, 0, 500, p(0.6), &mut RngStream::new(42));
        let c = trajectory(Base::Fibonacci, 0, 500, p(0.6), &mut RngStream::new(43));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn forked_streams_differ() {
        let root = RngStream::new(7);
        let mut a = root.fork(0);
        let mut b = root.fork(1);
        let xs: Vec<f64> = (0..4).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..4).map(|_| b.uniform()).collect();
        assert_ne!(xs, ys);
        let mut a2 = root.fork(0);
        assert_eq!(xs[0], a2.uniform());
    }

    #[test]
    fn histogram_check_state_three() {
        let check =
            histogram_check(Base::Binary, 3, p(0.7), 100_000, &mut RngStream::new(1)).unwrap();
        assert!(check.max_gap < 0.01, "{check:?}");
        assert!(check.max_sigmas() < 4.0, "{check:?}");
        assert!(histogram_check(Base::Binary, 3, p(0.7), 0, &mut NeverCarry).is_err());
    }

    #[test]
    fn base_parses() {
        assert_eq!("fib".parse::<Base>().unwrap(), Base::Fibonacci);
        assert_eq!("binary".parse::<Base>().unwrap(), Base::Binary);
        assert!("ternary".parse::<Base>().is_err());
    }
}
