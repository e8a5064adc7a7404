//! Digit words in base 2 and in the Fibonacci base, with the deterministic
//! adding machines on top of them.
//!
//! Words are little-endian (index `i` carries weight `2^i` or `F_i`) and
//! normalized, so two words are equal iff they encode the same integer.

use std::fmt;

use crate::error::{Error, Result};

/// Largest index with `F_k` representable in a `u64`.
pub const MAX_FIB_INDEX: usize = 90;

/// Returns `F_k` with `F_0 = 1`, `F_1 = 2`, `F_k = F_{k-1} + F_{k-2}`.
pub fn fib(k: usize) -> Result<u64> {
    let (mut a, mut b) = (1u64, 2u64);
    for _ in 0..k {
        let next = a.checked_add(b).ok_or(Error::Overflow { what: "F_k" })?;
        a = b;
        b = next;
    }
    Ok(a)
}

/// The Fibonacci numbers `F_0..=F_k` as a lookup table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FibTable {
    values: Vec<u64>,
}

impl FibTable {
    pub fn up_to(k: usize) -> Result<Self> {
        if k > MAX_FIB_INDEX {
            return Err(Error::Overflow { what: "F_k" });
        }
        let mut values = Vec::with_capacity(k + 1);
        values.push(1);
        if k >= 1 {
            values.push(2);
        }
        for i in 2..=k {
            values.push(values[i - 1] + values[i - 2]);
        }
        Ok(FibTable { values })
    }

    /// Every `F_k` that fits in a `u64`.
    pub fn full() -> Self {
        Self::up_to(MAX_FIB_INDEX).expect("F_90 fits in u64")
    }

    pub fn get(&self, k: usize) -> Option<u64> {
        self.values.get(k).copied()
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }
}

fn validate_bits(digits: &[u8]) -> Result<()> {
    match digits.iter().position(|&d| d > 1) {
        Some(index) => Err(Error::InvalidDigit {
            index,
            digit: digits[index],
        }),
        None => Ok(()),
    }
}

fn normalize(mut digits: Vec<u8>) -> Vec<u8> {
    while digits.last() == Some(&0) {
        digits.pop();
    }
    digits
}

fn fmt_msb_first(digits: &[u8], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if digits.is_empty() {
        return f.write_str("0");
    }
    for d in digits.iter().rev() {
        write!(f, "{d}")?;
    }
    Ok(())
}

fn parse_msb_first(s: &str) -> Result<Vec<u8>> {
    s.bytes()
        .rev()
        .enumerate()
        .map(|(index, b)| match b {
            b'0' => Ok(0),
            b'1' => Ok(1),
            other => Err(Error::InvalidDigit {
                index,
                digit: other,
            }),
        })
        .collect()
}

/// A base-2 word. Displays most significant digit first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitWord {
    digits: Vec<u8>,
}

impl BitWord {
    /// Builds a word from little-endian digits.
    pub fn from_digits(digits: Vec<u8>) -> Result<Self> {
        validate_bits(&digits)?;
        Ok(BitWord {
            digits: normalize(digits),
        })
    }

    /// Parses a word written most significant digit first, e.g. `"1010"`.
    pub fn parse(s: &str) -> Result<Self> {
        Self::from_digits(parse_msb_first(s)?)
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn digit(&self, i: usize) -> u8 {
        self.digits.get(i).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.digits.is_empty()
    }
}

impl fmt::Display for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_msb_first(&self.digits, f)
    }
}

pub fn binary_encode(mut n: u64) -> BitWord {
    let mut digits = Vec::with_capacity(64);
    while n > 0 {
        digits.push((n & 1) as u8);
        n >>= 1;
    }
    BitWord { digits }
}

pub fn binary_decode(w: &BitWord) -> Result<u64> {
    if w.digits.len() > 64 {
        return Err(Error::Overflow {
            what: "binary word",
        });
    }
    Ok(w.digits
        .iter()
        .enumerate()
        .map(|(i, &d)| (d as u64) << i)
        .sum())
}

/// Adds one through the carry recursion
/// `eps_i' = (eps_i + c_{i-1}) mod 2`, `c_i = floor((eps_i + c_{i-1}) / 2)`
/// with `c_{-1} = 1`.
pub fn binary_increment(w: &BitWord) -> BitWord {
    let mut digits = w.digits.clone();
    let mut carry = 1u8;
    let mut i = 0;
    while carry == 1 {
        if i == digits.len() {
            digits.push(0);
        }
        let total = digits[i] + carry;
        digits[i] = total % 2;
        carry = total / 2;
        i += 1;
    }
    BitWord { digits }
}

/// A Zeckendorf word: Fibonacci-base digits with no two adjacent ones.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ZeckendorfWord {
    digits: Vec<u8>,
}

/// Checks the no-adjacent-ones condition on little-endian digits.
pub fn validate_zeckendorf(digits: &[u8]) -> Result<()> {
    validate_bits(digits)?;
    match digits.windows(2).position(|w| w[0] == 1 && w[1] == 1) {
        Some(index) => Err(Error::AdjacentOnes { index }),
        None => Ok(()),
    }
}

impl ZeckendorfWord {
    pub fn from_digits(digits: Vec<u8>) -> Result<Self> {
        validate_zeckendorf(&digits)?;
        Ok(ZeckendorfWord {
            digits: normalize(digits),
        })
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::from_digits(parse_msb_first(s)?)
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn digit(&self, i: usize) -> u8 {
        self.digits.get(i).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.digits.is_empty()
    }
}

impl fmt::Display for ZeckendorfWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_msb_first(&self.digits, f)
    }
}

/// Greedy Fibonacci-base expansion.
pub fn zeckendorf_encode(mut n: u64) -> ZeckendorfWord {
    if n == 0 {
        return ZeckendorfWord::default();
    }
    let table = FibTable::full();
    let fibs = table.values();
    let top = fibs.iter().rposition(|&f| f <= n).expect("F_0 = 1 <= n");
    let mut digits = vec![0u8; top + 1];
    for k in (0..=top).rev() {
        if fibs[k] <= n {
            digits[k] = 1;
            n -= fibs[k];
        }
    }
    ZeckendorfWord { digits }
}

pub fn zeckendorf_decode(w: &ZeckendorfWord) -> Result<u64> {
    if w.digits.len() > MAX_FIB_INDEX + 1 {
        return Err(Error::Overflow {
            what: "Zeckendorf word",
        });
    }
    let table = FibTable::full();
    w.digits
        .iter()
        .zip(table.values())
        .filter(|(&d, _)| d == 1)
        .try_fold(0u64, |acc, (_, &f)| acc.checked_add(f))
        .ok_or(Error::Overflow {
            what: "Zeckendorf word",
        })
}

/// States of the Fibonacci adding-machine transducer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransducerState {
    /// `I`: the carry is still pending.
    Initial,
    /// `T`: the carry has been absorbed; remaining digits are copied.
    Terminal,
}

impl fmt::Display for TransducerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransducerState::Initial => "I",
            TransducerState::Terminal => "T",
        })
    }
}

/// One labeled edge of a transducer path, written as `(left, input/output, right)`
/// where `left` sits on the more significant side. Labels are written most
/// significant digit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransducerEdge {
    pub left: TransducerState,
    pub input: &'static str,
    pub output: &'static str,
    pub right: TransducerState,
}

impl TransducerEdge {
    /// Edges ending in `I` carry the increment and are the ones that may fail
    /// in the stochastic machine.
    pub fn carries(&self) -> bool {
        self.right == TransducerState::Initial
    }

    pub fn width(&self) -> usize {
        self.input.len()
    }
}

impl fmt::Display for TransducerEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}/{}, {})",
            self.left, self.input, self.output, self.right
        )
    }
}

use TransducerState::{Initial, Terminal};

/// Edges reachable while the carry is pending, tried against the unread suffix.
const CARRY_EDGES: [TransducerEdge; 4] = [
    TransducerEdge {
        left: Initial,
        input: "10",
        output: "00",
        right: Initial,
    },
    TransducerEdge {
        left: Initial,
        input: "101",
        output: "000",
        right: Initial,
    },
    TransducerEdge {
        left: Terminal,
        input: "00",
        output: "01",
        right: Initial,
    },
    TransducerEdge {
        left: Terminal,
        input: "001",
        output: "010",
        right: Initial,
    },
];

const COPY_ZERO: TransducerEdge = TransducerEdge {
    left: Terminal,
    input: "0",
    output: "0",
    right: Terminal,
};
const COPY_ONE: TransducerEdge = TransducerEdge {
    left: Terminal,
    input: "1",
    output: "1",
    right: Terminal,
};

/// A path through the adding-machine transducer, stored in reading order
/// (least significant block first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransducerPath {
    edges: Vec<TransducerEdge>,
}

impl TransducerPath {
    /// Edges from the least significant block upward.
    pub fn reading_order(&self) -> &[TransducerEdge] {
        &self.edges
    }

    /// Edges in printed order, most significant first.
    pub fn printed_order(&self) -> Vec<TransducerEdge> {
        self.edges.iter().rev().copied().collect()
    }

    /// Number of leading edges that carry (end in state `I`).
    pub fn carry_len(&self) -> usize {
        self.edges.iter().take_while(|e| e.carries()).count()
    }
}

impl fmt::Display for TransducerPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for edge in self.edges.iter().rev() {
            write!(f, "{edge}")?;
        }
        Ok(())
    }
}

fn label_matches(digits: &[u8], pos: usize, label: &str) -> bool {
    label
        .bytes()
        .rev()
        .enumerate()
        .all(|(k, b)| digits.get(pos + k).copied().unwrap_or(0) == b - b'0')
}

/// Traces little-endian digits through the transducer, starting in `I` at the
/// least significant digit. Only Zeckendorf words are accepted.
pub fn trace_digits(digits: &[u8]) -> Result<TransducerPath> {
    validate_zeckendorf(digits)?;
    let mut edges = Vec::new();
    let mut pos = 0;
    loop {
        let edge = CARRY_EDGES
            .iter()
            .find(|e| label_matches(digits, pos, e.input))
            .ok_or(Error::NoTransducerPath { position: pos })?;
        edges.push(*edge);
        pos += edge.width();
        if edge.left == Terminal {
            break;
        }
    }
    let used = pos.min(digits.len());
    let top = digits.iter().rposition(|&d| d == 1).map_or(0, |i| i + 1);
    for &d in &digits[used..top.max(used)] {
        edges.push(if d == 1 { COPY_ONE } else { COPY_ZERO });
    }
    Ok(TransducerPath { edges })
}

pub fn transductor_trace(w: &ZeckendorfWord) -> Result<TransducerPath> {
    trace_digits(&w.digits)
}

/// Writes the output labels of `edges` over `digits`, starting at the least
/// significant position.
pub(crate) fn apply_outputs(digits: &[u8], edges: &[TransducerEdge]) -> Vec<u8> {
    let mut out = digits.to_vec();
    let mut pos = 0;
    for edge in edges {
        let width = edge.width();
        if out.len() < pos + width {
            out.resize(pos + width, 0);
        }
        for (k, b) in edge.output.bytes().rev().enumerate() {
            out[pos + k] = b - b'0';
        }
        pos += width;
    }
    normalize(out)
}

/// Adds one by following the transducer path and emitting its output labels.
pub fn zeckendorf_increment(w: &ZeckendorfWord) -> ZeckendorfWord {
    let path = transductor_trace(w).expect("valid Zeckendorf words always have a path");
    let digits = apply_outputs(&w.digits, path.reading_order());
    debug_assert!(validate_zeckendorf(&digits).is_ok());
    ZeckendorfWord { digits }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fib_values() {
        assert_eq!(fib(0).unwrap(), 1);
        assert_eq!(fib(1).unwrap(), 2);
        assert_eq!(fib(5).unwrap(), 13);
        assert_eq!(
            fib(MAX_FIB_INDEX).unwrap(),
            FibTable::full().get(MAX_FIB_INDEX).unwrap()
        );
        assert!(matches!(
            fib(MAX_FIB_INDEX + 1),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn fib_table_recurrence() {
        let t = FibTable::full();
        for k in 2..=MAX_FIB_INDEX {
            assert_eq!(
                t.get(k).unwrap(),
                t.get(k - 1).unwrap() + t.get(k - 2).unwrap()
            );
        }
        assert!(FibTable::up_to(MAX_FIB_INDEX + 1).is_err());
    }

    #[test]
    fn binary_codec_examples() {
        assert!(binary_encode(0).is_zero());
        assert_eq!(binary_decode(&binary_encode(0)).unwrap(), 0);
        assert_eq!(binary_encode(10).digits(), &[0, 1, 0, 1]);
        let w = binary_encode(1 << 20);
        assert_eq!(w.digits().len(), 21);
        assert_eq!(w.digits().iter().filter(|&&d| d == 1).count(), 1);
        assert_eq!(w.digit(20), 1);
    }

    #[test]
    fn binary_increment_examples() {
        assert_eq!(
            binary_increment(&BitWord::parse("11").unwrap()).to_string(),
            "100"
        );
        assert_eq!(binary_increment(&BitWord::default()), binary_encode(1));
        assert_eq!(
            binary_increment(&binary_encode(u64::MAX >> 1)),
            binary_encode(1 << 63)
        );
    }

    #[test]
    fn bitword_rejects_bad_digits_and_normalizes() {
        assert_eq!(
            BitWord::from_digits(vec![0, 2]),
            Err(Error::InvalidDigit { index: 1, digit: 2 })
        );
        assert_eq!(
            BitWord::from_digits(vec![1, 0, 0]).unwrap(),
            binary_encode(1)
        );
        assert!(binary_decode(&BitWord::from_digits(vec![1; 65]).unwrap()).is_err());
    }

    #[test]
    fn zeckendorf_examples() {
        assert_eq!(zeckendorf_encode(10).to_string(), "10010");
        assert!(zeckendorf_encode(0).is_zero());
        // 100 = F_9 + F_4 + F_2 = 89 + 8 + 3
        assert_eq!(zeckendorf_encode(100).to_string(), "1000010100");
        assert_eq!(
            zeckendorf_decode(&ZeckendorfWord::parse("1000010100").unwrap()).unwrap(),
            100
        );
    }

    #[test]
    fn zeckendorf_rejects_adjacent_ones() {
        assert_eq!(
            ZeckendorfWord::parse("110"),
            Err(Error::AdjacentOnes { index: 1 })
        );
        assert!(validate_zeckendorf(&[1, 0, 1, 0, 1]).is_ok());
    }

    #[test]
    fn zeckendorf_increment_examples() {
        let ten = ZeckendorfWord::parse("10010").unwrap();
        assert_eq!(zeckendorf_increment(&ten).to_string(), "10100");
        assert_eq!(
            zeckendorf_increment(&ZeckendorfWord::default()).to_string(),
            "1"
        );
    }

    #[test]
    fn trace_of_ten_matches_printed_path() {
        let path = transductor_trace(&zeckendorf_encode(10)).unwrap();
        assert_eq!(path.to_string(), "(T, 1/1, T)(T, 00/01, I)(I, 10/00, I)");
        assert_eq!(path.carry_len(), 2);
    }

    #[test]
    fn trace_of_zero_and_two() {
        let zero = transductor_trace(&ZeckendorfWord::default()).unwrap();
        assert_eq!(zero.to_string(), "(T, 00/01, I)");
        let two = transductor_trace(&zeckendorf_encode(2)).unwrap();
        assert_eq!(two.to_string(), "(T, 00/01, I)(I, 10/00, I)");
        assert_eq!(
            zeckendorf_decode(&zeckendorf_increment(&zeckendorf_encode(2))).unwrap(),
            3
        );
    }

    #[test]
    fn trace_rejects_malformed_words() {
        assert_eq!(trace_digits(&[1, 1]), Err(Error::AdjacentOnes { index: 0 }));
        assert_eq!(
            trace_digits(&[0, 1, 1]),
            Err(Error::AdjacentOnes { index: 1 })
        );
        assert!(matches!(
            trace_digits(&[2]),
            Err(Error::InvalidDigit { .. })
        ));
    }

    #[test]
    fn printed_and_reading_orders_are_reverses() {
        let path = transductor_trace(&zeckendorf_encode(12)).unwrap();
        let mut printed = path.printed_order();
        printed.reverse();
        assert_eq!(printed, path.reading_order());
    }
}
