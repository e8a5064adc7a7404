//! The `q_n` families: `v_n = q_n v_0` for any eigenvector `v` of `S_p`.
//!
//! Powers obey `q_{2^n} = q_{2^(n-1)}^2 / p - (1-p)/p` (base 2) and
//! `q_{F_k} = q_{F_(k-1)} q_{F_(k-2)} / p - (1-p)/p` (Fibonacci), both seeded
//! with `q_1 = h(lambda)`. General `q_n` is the product over the digits of `n`.

use num_complex::Complex64;

use crate::chain::{Base, ProbParam};
use crate::error::{Error, Result};
use crate::numeration::{zeckendorf_encode, MAX_FIB_INDEX};
use crate::operator::build_truncated;

/// Moduli above this are reported as escape instead of being carried further.
pub const ESCAPE_MODULUS: f64 = 1e150;

fn escaped(z: Complex64) -> bool {
    !z.is_finite() || z.norm() > ESCAPE_MODULUS
}

/// `f(z) = ((z - (1-p)) / p)^2`, evaluated as `1 + (w/p)(w/p + 2)` with
/// `w = z - 1` so that the repelling fixed point 1 stays exact.
pub fn f_map(z: Complex64, p: ProbParam) -> Complex64 {
    let w = (z - 1.0) / p.get();
    w * (w + 2.0) + 1.0
}

/// `q_{2^(k+1)}` from `q_{2^k}`, written in the offset from 1.
pub(crate) fn square_step(q: Complex64, p: f64) -> Complex64 {
    let e = q - 1.0;
    e * (e + 2.0) / p + 1.0
}

/// `q_{F_(k+1)}` from `q_{F_k}` and `q_{F_(k-1)}`, written in the offset from 1.
pub(crate) fn fib_step(a: Complex64, b: Complex64, p: f64) -> Complex64 {
    let (ea, eb) = (a - 1.0, b - 1.0);
    (ea + eb + ea * eb) / p + 1.0
}

/// `h(x) = x/p - (1-p)/p`, written as `(x - 1)/p + 1` so that `h(1) = 1` exactly.
pub fn h_map(x: Complex64, p: ProbParam) -> Complex64 {
    (x - 1.0) / p.get() + 1.0
}

/// `h^{-1}(y) = p y + 1 - p`.
pub fn h_inv(y: Complex64, p: ProbParam) -> Complex64 {
    y * p.get() + p.fail()
}

/// `g(x, y) = ((x - 1 + p)(y - 1 + p) / p^2, x)`.
pub fn g_map((x, y): (Complex64, Complex64), p: ProbParam) -> (Complex64, Complex64) {
    let q = p.fail();
    ((x - q) * (y - q) / (p.get() * p.get()), x)
}

/// `lambda_1 = 1 - p + (1 - lambda - p)^2 / p`, the partner coordinate of
/// `lambda` in the two-dimensional description of the Fibonacci set.
pub fn lambda_one(lambda: Complex64, p: ProbParam) -> Complex64 {
    let d = Complex64::new(p.fail(), 0.0) - lambda;
    d * d / p.get() + p.fail()
}

/// Lazily extended table of `q_{2^k}` or `q_{F_k}` at one `lambda`.
#[derive(Debug, Clone)]
pub struct QOrbit {
    base: Base,
    lambda: Complex64,
    p: ProbParam,
    powers: Vec<Complex64>,
    escaped_at: Option<usize>,
}

impl QOrbit {
    pub fn new(base: Base, lambda: Complex64, p: ProbParam) -> Self {
        let q1 = h_map(lambda, p);
        let powers = match base {
            Base::Binary => vec![q1],
            Base::Fibonacci => vec![q1, q1 * q1],
        };
        let escaped_at = powers.iter().position(|&z| escaped(z));
        QOrbit {
            base,
            lambda,
            p,
            powers,
            escaped_at,
        }
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    /// First power index whose value escaped, if any has so far.
    pub fn escaped_at(&self) -> Option<usize> {
        self.escaped_at
    }

    /// `q_{2^k}` (binary) or `q_{F_k}` (Fibonacci).
    pub fn power(&mut self, k: usize) -> Result<Complex64> {
        if let Some(index) = self.escaped_at.filter(|&e| e <= k) {
            return Err(Error::Escaped { index });
        }
        let p = self.p.get();
        while self.powers.len() <= k {
            let m = self.powers.len();
            let next = match self.base {
                Base::Binary => square_step(self.powers[m - 1], p),
                Base::Fibonacci => fib_step(self.powers[m - 1], self.powers[m - 2], p),
            };
            self.powers.push(next);
            if escaped(next) {
                self.escaped_at = Some(m);
                return Err(Error::Escaped { index: m });
            }
        }
        Ok(self.powers[k])
    }

    /// `q_n` as the product of powers over the digits of `n`; `q_0 = 1`.
    pub fn q(&mut self, n: u64) -> Result<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        match self.base {
            Base::Binary => {
                let mut bits = n;
                while bits != 0 {
                    let k = bits.trailing_zeros() as usize;
                    acc *= self.power(k)?;
                    bits &= bits - 1;
                }
            }
            Base::Fibonacci => {
                for (k, &d) in zeckendorf_encode(n).digits().iter().enumerate() {
                    if d == 1 {
                        acc *= self.power(k)?;
                    }
                }
            }
        }
        if escaped(acc) {
            return Err(Error::Escaped { index: n as usize });
        }
        Ok(acc)
    }

    /// `q_0, q_1, ..., q_n`, stopping at the first escape.
    pub fn sequence(&mut self, n: u64) -> Result<Vec<Complex64>> {
        (0..=n).map(|j| self.q(j)).collect()
    }
}

pub fn q_pow2(n: usize, lambda: Complex64, p: ProbParam) -> Result<Complex64> {
    QOrbit::new(Base::Binary, lambda, p).power(n)
}

pub fn q_binary(n: u64, lambda: Complex64, p: ProbParam) -> Result<Complex64> {
    QOrbit::new(Base::Binary, lambda, p).q(n)
}

pub fn q_fib_pow(k: usize, lambda: Complex64, p: ProbParam) -> Result<Complex64> {
    if k > MAX_FIB_INDEX {
        return Err(Error::Overflow { what: "F_k" });
    }
    QOrbit::new(Base::Fibonacci, lambda, p).power(k)
}

pub fn q_fib(n: u64, lambda: Complex64, p: ProbParam) -> Result<Complex64> {
    QOrbit::new(Base::Fibonacci, lambda, p).q(n)
}

/// Solves `(S_p v)_{k-1} = lambda v_{k-1}` forward from `v_0 = 1` on the
/// truncated operator, returning `v_0..=v_n`. Uses that `S_p` has no entries
/// above the first superdiagonal and that the superdiagonal never vanishes.
pub fn q_matrix_sequence(
    n: usize,
    lambda: Complex64,
    p: ProbParam,
    base: Base,
) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("oracle index must be at least 1"));
    }
    let s = build_truncated(base, p, n + 1)?;
    let mut v = Vec::with_capacity(n + 1);
    v.push(Complex64::new(1.0, 0.0));
    for k in 1..=n {
        let row = s.row(k - 1);
        let mut acc = lambda * v[k - 1];
        let mut super_diag = 0.0;
        for &(j, sv) in row {
            match j.cmp(&(k - 1)) {
                std::cmp::Ordering::Greater => {
                    assert_eq!(j, k, "entry above the superdiagonal");
                    super_diag = sv;
                }
                _ => acc -= v[j] * sv,
            }
        }
        assert!(super_diag > 0.0, "vanishing superdiagonal in row {}", k - 1);
        let next = acc / super_diag;
        if escaped(next) {
            return Err(Error::Escaped { index: k });
        }
        v.push(next);
    }
    Ok(v)
}

pub fn q_matrix_oracle(n: usize, lambda: Complex64, p: ProbParam, base: Base) -> Result<Complex64> {
    Ok(*q_matrix_sequence(n, lambda, p, base)?
        .last()
        .expect("n >= 1"))
}
