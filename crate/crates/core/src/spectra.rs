//! Approximate eigenvectors, the residual-spectrum series for `q_1`, screening
//! of residual-spectrum candidates, and an exploratory look at eigenvalues of
//! finite truncations.
//!
//! The approximate eigenvector at depth `k` is `w = (q_0, ..., q_k, 0, ...)`.
//! Rows below `k` vanish exactly, so `(S_p - lambda) w` has finitely many
//! nonzero rows plus a geometric tail from the column of state 0; residuals are
//! summed in closed form instead of from a truncated matrix.

use num_complex::Complex64;
use serde::Serialize;

use crate::chain::{binary_row, Base, ProbParam};
use crate::error::{Error, Result};
use crate::julia::{membership, membership_grid, preimages_of_one, GridSpec};
use crate::numeration::fib;
use crate::operator::{build_truncated, dense_eigenvalues, MAX_DENSE_SIZE};
use crate::qseq::QOrbit;

/// Horizon for the boundedness flags: `q_n` is inspected for `n <= 2^12`.
pub const FLAG_HORIZON: u64 = 1 << 12;
/// `q_bounded` holds when every inspected `|q_n|` is below this.
pub const Q_BOUND: f64 = 1e3;
/// `inv_q_bounded` holds when every inspected `|q_n|` is above this.
pub const INV_Q_BOUND: f64 = 1e-3;
/// `identity_holds` holds when the series gap is below this.
pub const IDENTITY_TOL: f64 = 1e-6;
/// Denominators smaller than this make the series inapplicable.
pub const IDENTITY_FLOOR: f64 = 1e-300;
/// Largest depth accepted by [`residual_candidates`].
pub const MAX_CANDIDATE_DEPTH: u32 = 15;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "norm order must be a finite number >= 1",
        ))
    }
}

/// `q_0, ..., q_k` built incrementally from the powers of the orbit.
fn q_prefix(orbit: &mut QOrbit, k: u64) -> Result<Vec<Complex64>> {
    match orbit.base() {
        Base::Binary => {
            let mut q = Vec::with_capacity(k as usize + 1);
            q.push(Complex64::new(1.0, 0.0));
            for j in 1..=k {
                let low = j.trailing_zeros() as usize;
                let v = q[(j & (j - 1)) as usize] * orbit.power(low)?;
                if !v.is_finite() {
                    return Err(Error::Escaped { index: j as usize });
                }
                q.push(v);
            }
            Ok(q)
        }
        Base::Fibonacci => orbit.sequence(k),
    }
}

fn lp_norm(values: &[Complex64], alpha: f64) -> f64 {
    values
        .iter()
        .map(|z| z.norm().powf(alpha))
        .sum::<f64>()
        .powf(1.0 / alpha)
}

/// Residual from the finite rows plus a precomputed `alpha`-th power tail.
fn finish(rows: &[Complex64], tail: f64, w: &[Complex64], alpha: f64) -> f64 {
    let num = rows.iter().map(|z| z.norm().powf(alpha)).sum::<f64>() + tail;
    num.powf(1.0 / alpha) / lp_norm(w, alpha)
}

/// `||(S_p - lambda) w|| / ||w||` in `l^alpha` with `w = (q_0, ..., q_{2^n})`.
pub fn residual_binary(lambda: Complex64, p: ProbParam, n: u32, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 || n > 30 {
        return Err(Error::InvalidParameter(
            "binary residual depth must be in 1..=30",
        ));
    }
    let k = 1u64 << n;
    let w = q_prefix(&mut QOrbit::new(Base::Binary, lambda, p), k)?;
    let (pp, q) = (p.get(), p.fail());
    let (wk, w0) = (w[k as usize], w[0]);
    let mut rows = vec![(Complex64::new(q, 0.0) - lambda) * wk];
    // row k + 2^m - 1 drops back to k
    for m in 1..n {
        rows.push(wk * pp.powi(m as i32) * q);
    }
    // row 2^(n+1) - 1 drops to k (m = n) and to 0 (m = n + 1)
    rows.push((wk * pp.powi(n as i32) + w0 * pp.powi(n as i32 + 1)) * q);
    // rows 2^m - 1, m >= n + 2, drop to 0
    let a = pp.powf(alpha);
    let tail = w0.norm().powf(alpha) * q.powf(alpha) * a.powi(n as i32 + 2) / (1.0 - a);
    Ok(finish(&rows, tail, &w, alpha))
}

/// `sum_{i >= start} a^floor(i/2)`.
fn paired_tail(a: f64, start: u32) -> f64 {
    let t = (start / 2) as i32;
    if start.is_multiple_of(2) {
        2.0 * a.powi(t) / (1.0 - a)
    } else {
        a.powi(t) + 2.0 * a.powi(t + 1) / (1.0 - a)
    }
}

/// Fibonacci analog with `w = (q_0, ..., q_{F_n})`. Row `F_i - 1` drops to 0
/// with `p^floor(i/2) (1-p)`; row `F_n + F_m - 1` drops to `F_n` likewise.
pub fn residual_fib(lambda: Complex64, p: ProbParam, n: u32, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(2..=40).contains(&n) {
        return Err(Error::InvalidParameter(
            "Fibonacci residual depth must be in 2..=40",
        ));
    }
    let k = fib(n as usize)?;
    let w = q_prefix(&mut QOrbit::new(Base::Fibonacci, lambda, p), k)?;
    let (pp, q) = (p.get(), p.fail());
    let (wk, w0) = (w[k as usize], w[0]);
    let drop = |i: u32| pp.powi((i / 2) as i32) * q;
    let mut rows = vec![(Complex64::new(q, 0.0) - lambda) * wk];
    for m in 2..n.saturating_sub(1) {
        rows.push(wk * drop(m));
    }
    // F_(n+1) - 1 = F_n + F_(n-1) - 1
    let shared = w0 * drop(n + 1);
    rows.push(if n >= 3 {
        wk * drop(n - 1) + shared
    } else {
        shared
    });
    let tail = w0.norm().powf(alpha) * q.powf(alpha) * paired_tail(pp.powf(alpha), n + 2);
    Ok(finish(&rows, tail, &w, alpha))
}

pub fn residual(base: Base, lambda: Complex64, p: ProbParam, n: u32, alpha: f64) -> Result<f64> {
    match base {
        Base::Binary => residual_binary(lambda, p, n, alpha),
        Base::Fibonacci => residual_fib(lambda, p, n, alpha),
    }
}

/// `|q_1 - sum_{i=1}^{terms} p^(i-1)(1-p) / q_{2^i - 1}|`. Escaped
/// denominators contribute nothing; vanishing ones make the series
/// inapplicable.
pub fn residual_identity(lambda: Complex64, p: ProbParam, terms: u32) -> Result<f64> {
    if terms == 0 {
        return Err(Error::InvalidParameter("identity needs at least one term"));
    }
    let mut orbit = QOrbit::new(Base::Binary, lambda, p);
    let q1 = orbit.power(0)?;
    let mut denom = Complex64::new(1.0, 0.0);
    let mut escaped = false;
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 1..=terms {
        if !escaped {
            match orbit.power(i as usize - 1) {
                Ok(v) => denom *= v,
                Err(Error::Escaped { .. }) => escaped = true,
                Err(e) => return Err(e),
            }
            escaped |= !denom.is_finite();
        }
        if escaped {
            continue;
        }
        if denom.norm() < IDENTITY_FLOOR {
            return Err(Error::IdentityInapplicable {
                index: i as usize,
                threshold: IDENTITY_FLOOR,
            });
        }
        sum += p.get().powi(i as i32 - 1) * p.fail() / denom;
    }
    Ok((q1 - sum).norm())
}

/// Evidence that a point lies in the residual spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evidence {
    pub q_bounded: bool,
    pub inv_q_bounded: bool,
    pub identity_holds: Option<bool>,
    /// Largest and smallest `|q_n|` seen, `n <= FLAG_HORIZON`; infinite on escape.
    pub max_abs_q: f64,
    pub min_abs_q: f64,
}

/// Flags at one point; `terms` is the identity series length (binary only).
pub fn evidence(base: Base, lambda: Complex64, p: ProbParam, terms: Option<u32>) -> Evidence {
    let mut orbit = QOrbit::new(base, lambda, p);
    let (max_abs_q, min_abs_q) = match q_prefix(&mut orbit, FLAG_HORIZON) {
        Ok(q) => q.iter().fold((0.0f64, f64::INFINITY), |(hi, lo), z| {
            (hi.max(z.norm()), lo.min(z.norm()))
        }),
        Err(_) => (f64::INFINITY, 0.0),
    };
    let identity_holds = match (base, terms) {
        (Base::Binary, Some(t)) => {
            Some(residual_identity(lambda, p, t).is_ok_and(|gap| gap < IDENTITY_TOL))
        }
        _ => None,
    };
    Evidence {
        q_bounded: max_abs_q < Q_BOUND,
        inv_q_bounded: min_abs_q > INV_Q_BOUND,
        identity_holds,
        max_abs_q,
        min_abs_q,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub point: Complex64,
    pub evidence: Evidence,
}

/// Screens every point of `f^{-depth}{1}`. Points passing every flag are
/// consistent with membership in the residual spectrum; nothing is decided.
pub fn residual_candidates(p: ProbParam, depth: u32, terms: u32) -> Result<Vec<Candidate>> {
    if depth > MAX_CANDIDATE_DEPTH {
        return Err(Error::InvalidParameter(
            "candidate depth must be at most 15",
        ));
    }
    let points = preimages_of_one(p, depth)?;
    let screen = |z: &Complex64| Candidate {
        point: *z,
        evidence: evidence(Base::Binary, *z, p, Some(terms)),
    };
    #[cfg(feature = "parallel")]
    let out = {
        use rayon::prelude::*;
        points.par_iter().map(screen).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out = points.iter().map(screen).collect();
    Ok(out)
}

/// Thresholds stamped into every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub horizon: u64,
    pub q_bound: f64,
    pub inv_q_bound: f64,
    pub identity_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            horizon: FLAG_HORIZON,
            q_bound: Q_BOUND,
            inv_q_bound: INV_Q_BOUND,
            identity_tol: IDENTITY_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub lambda: Complex64,
    pub base: Base,
    pub p: ProbParam,
    pub alpha: f64,
    /// `(k, residual)` with `k = 2^n` or `F_n`, increasing in `k`. Depths
    /// whose `q` values escaped are omitted.
    pub residuals: Vec<(u64, f64)>,
    pub identity_gap: Option<f64>,
    pub identity_terms: Option<u32>,
    pub classification_evidence: Evidence,
    pub thresholds: Thresholds,
}

/// Residuals for depths `first..=last` plus the classification evidence.
pub fn residual_report(
    base: Base,
    lambda: Complex64,
    p: ProbParam,
    alpha: f64,
    depths: std::ops::RangeInclusive<u32>,
    terms: u32,
) -> Result<ResidualReport> {
    check_alpha(alpha)?;
    let mut residuals = Vec::new();
    for n in depths {
        let k = match base {
            Base::Binary => 1u64 << n.min(63),
            Base::Fibonacci => fib(n as usize)?,
        };
        match residual(base, lambda, p, n, alpha) {
            Ok(r) => residuals.push((k, r)),
            Err(Error::Escaped { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let (identity_gap, identity_terms) = match base {
        Base::Binary => (residual_identity(lambda, p, terms).ok(), Some(terms)),
        Base::Fibonacci => (None, None),
    };
    Ok(ResidualReport {
        lambda,
        base,
        p,
        alpha,
        residuals,
        identity_gap,
        identity_terms,
        classification_evidence: evidence(base, lambda, p, identity_terms),
        thresholds: Thresholds::default(),
    })
}

/// Max modulus of `(u (S_p - lambda))_j` over `j < m - sqrt(m)` with the
/// untruncated left vector `u_i = 1/q_i`. Column `j` is fed by rows `j - 1`,
/// `j`, and `j + 2^m - 1` for `2^m` dividing `j` (every `m` when `j = 0`);
/// the unbounded column 0 is summed until its terms fall below `1e-20`.
pub fn dual_residual(lambda: Complex64, p: ProbParam, m: usize) -> Result<f64> {
    if m < 4 {
        return Err(Error::InvalidSize {
            size: m,
            reason: "dual check needs at least 4 states",
        });
    }
    let cols = m - (m as f64).sqrt().ceil() as usize;
    let mut orbit = QOrbit::new(Base::Binary, lambda, p);
    let mut u = |i: u64| match orbit.q(i) {
        Ok(q) => Ok(1.0 / q),
        Err(Error::Escaped { .. }) => Ok(Complex64::new(0.0, 0.0)),
        Err(e) => Err(e),
    };
    let mut worst = 0.0f64;
    for j in 0..cols as u64 {
        let mut acc = -lambda * u(j)?;
        let mut feeders = vec![j];
        if j > 0 {
            feeders.push(j - 1);
        }
        for e in 1..64u32 {
            if j != 0 && j % (1u64 << e) != 0 {
                break;
            }
            if j == 0 && p.get().powi(e as i32) < 1e-20 {
                break;
            }
            match j.checked_add((1u64 << e) - 1) {
                Some(i) => feeders.push(i),
                None => break,
            }
        }
        for i in feeders {
            acc += u(i)? * binary_row(i, p).get(j);
        }
        worst = worst.max(acc.norm());
    }
    Ok(worst)
}

/// One eigenvalue of a truncation and its membership test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub lambda: Complex64,
    pub escape_iter: Option<u32>,
    /// Distance to the nearest bounded pixel center; infinite if none.
    pub dist: f64,
    pub member: bool,
}

/// Exploratory comparison of truncation eigenvalues with the escape-time set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationSpectrum {
    pub base: Base,
    pub p: ProbParam,
    pub size: usize,
    pub epsilon: f64,
    pub max_iter: u32,
    pub grid: GridSpec,
    pub points: Vec<SpectrumPoint>,
    pub fraction_member: f64,
    pub max_dist_proxy: f64,
}

impl TruncationSpectrum {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,escape_iter,member,dist\n");
        for pt in &self.points {
            let iter = pt
                .escape_iter
                .map_or(String::from("bounded"), |n| n.to_string());
            out.push_str(&format!(
                "{:.12e},{:.12e},{},{},{:.6e}\n",
                pt.lambda.re, pt.lambda.im, iter, pt.member as u8, pt.dist
            ));
        }
        out
    }
}

/// Dilation used for truncation-spectrum membership.
pub const MEMBERSHIP_EPSILON: f64 = 0.1;

/// Eigenvalues of the self-loop-patched truncation of size `size`, each
/// tested against the escape-time raster (`J(f)` or `E_p`) dilated by `epsilon`.
pub fn truncation_spectrum_report(
    base: Base,
    p: ProbParam,
    size: usize,
    grid: GridSpec,
    max_iter: u32,
    epsilon: f64,
) -> Result<TruncationSpectrum> {
    if size > MAX_DENSE_SIZE {
        return Err(Error::InvalidSize {
            size,
            reason: "dense solve limited to 2048",
        });
    }
    let s = build_truncated(base, p, size)?.with_self_loop_patch();
    let eigen = dense_eigenvalues(&s)?;
    let raster = membership_grid(base, p, grid, max_iter);
    let bounded: Vec<Complex64> = raster.bounded_points().collect();
    let points: Vec<SpectrumPoint> = eigen
        .into_iter()
        .map(|lambda| {
            let escape_iter = membership(base, lambda, p, max_iter).escape_iter();
            let dist = bounded
                .iter()
                .map(|z| (z - lambda).norm())
                .fold(f64::INFINITY, f64::min);
            let member = escape_iter.is_none() || dist <= epsilon;
            SpectrumPoint {
                lambda,
                escape_iter,
                dist,
                member,
            }
        })
        .collect();
    let members = points.iter().filter(|pt| pt.member).count();
    let fraction_member = members as f64 / points.len().max(1) as f64;
    let max_dist_proxy = points
        .iter()
        .map(|pt| {
            if pt.escape_iter.is_none() {
                0.0
            } else {
                pt.dist
            }
        })
        .fold(0.0, f64::max);
    Ok(TruncationSpectrum {
        base,
        p,
        size,
        epsilon,
        max_iter,
        grid,
        points,
        fraction_member,
        max_dist_proxy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> ProbParam {
        ProbParam::new(v).unwrap()
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn paired_tail_matches_direct_sum() {
        for a in [0.09f64, 0.49, 0.8] {
            for start in 0..9 {
                let direct: f64 = (start..400u32).map(|i| a.powi((i / 2) as i32)).sum();
                assert!(
                    (paired_tail(a, start) - direct).abs() < 1e-12,
                    "a={a} start={start}"
                );
            }
        }
    }

    #[test]
    fn binary_residual_at_one_by_hand() {
        // n = 1: w = (1, 1, 1); rows 2 (value -p), 3 ((p + p^2)(1-p)), tail p^3..
        let q = p(0.5);
        let r = residual_binary(one(), q, 1, 2.0).unwrap();
        let tail: f64 = (3..200).map(|m| (0.5f64.powi(m) * 0.5).powi(2)).sum();
        let num = 0.25 + (0.75f64 * 0.5).powi(2) + tail;
        assert!((r - (num / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn residual_rejects_bad_arguments() {
        assert!(residual_binary(one(), p(0.5), 0, 2.0).is_err());
        assert!(residual_binary(one(), p(0.5), 3, 0.5).is_err());
        assert!(residual_fib(one(), p(0.5), 1, 2.0).is_err());
        assert!(residual_identity(one(), p(0.5), 0).is_err());
    }

    #[test]
    fn identity_at_one_is_geometric() {
        for v in [0.3, 0.5, 0.7] {
            for t in 1..=40 {
                let gap = residual_identity(one(), p(v), t).unwrap();
                assert!((gap - v.powi(t as i32)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn identity_inapplicable_at_attracting_point() {
        let q = p(0.7);
        let z = Complex64::new(0.09, 0.0);
        assert!(matches!(
            residual_identity(z, q, 800),
            Err(Error::IdentityInapplicable { .. })
        ));
    }

    #[test]
    fn evidence_at_one_and_at_attracting_point() {
        let q = p(0.7);
        let e = evidence(Base::Binary, one(), q, Some(40));
        assert!(e.q_bounded && e.inv_q_bounded && e.identity_holds == Some(true));
        let e = evidence(Base::Binary, Complex64::new(0.09, 0.0), q, Some(40));
        assert!(e.q_bounded && !e.inv_q_bounded);
        let e = evidence(Base::Binary, Complex64::new(2.0, 0.0), q, Some(40));
        assert!(!e.q_bounded);
    }

    #[test]
    fn dual_vector_at_one() {
        assert!(dual_residual(one(), p(0.7), 1024).unwrap() < 1e-8);
        assert!(dual_residual(one(), p(0.3), 256).unwrap() < 1e-8);
    }

    #[test]
    fn report_skips_escaped_depths() {
        let r = residual_report(
            Base::Binary,
            Complex64::new(2.0, 0.0),
            p(0.7),
            2.0,
            1..=10,
            20,
        )
        .unwrap();
        assert!(r.residuals.len() < 10);
        let r = residual_report(Base::Fibonacci, one(), p(0.7), 2.0, 2..=10, 20).unwrap();
        assert_eq!(r.residuals.len(), 9);
        assert!(r.residuals.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(r.identity_gap, None);
    }
}
