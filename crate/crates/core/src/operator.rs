//! Principal `M x M` sections of the transition operator `S_p`.
//!
//! Entries whose column falls outside the window are dropped and the row is
//! flagged incomplete; nothing is renormalized. Experiments that need a
//! stochastic matrix opt into [`SparseTransitionMatrix::with_self_loop_patch`].

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::chain::{self, Base, ProbParam, RngStream};
use crate::error::{Error, Result};

/// Dense complex vector acted on by the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Vec<Complex64>);

impl StateVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(StateVector(entries))
    }

    pub fn zeros(len: usize) -> Self {
        StateVector(vec![Complex64::new(0.0, 0.0); len])
    }

    /// Unit vector `e_i`.
    pub fn basis(len: usize, i: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[i] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }
}

impl std::ops::Index<usize> for StateVector {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// Row-sparse truncation of `S_p` on the states `0..size`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTransitionMatrix {
    base: Base,
    p: ProbParam,
    rows: Vec<Vec<(usize, f64)>>,
    complete: Vec<bool>,
    patched: bool,
}

/// Builds rows `0..size` from the exact transition rows, dropping columns `>= size`.
pub fn build_truncated(base: Base, p: ProbParam, size: usize) -> Result<SparseTransitionMatrix> {
    if size < 2 {
        return Err(Error::InvalidSize {
            size,
            reason: "truncation needs at least two states",
        });
    }
    let mut rows = Vec::with_capacity(size);
    let mut complete = Vec::with_capacity(size);
    for n in 0..size as u64 {
        let row = chain::row(base, n, p);
        let kept: Vec<(usize, f64)> = row
            .entries
            .iter()
            .filter(|&&(t, _)| t < size as u64)
            .map(|&(t, v)| (t as usize, v))
            .collect();
        complete.push(kept.len() == row.entries.len());
        rows.push(kept);
    }
    Ok(SparseTransitionMatrix {
        base,
        p,
        rows,
        complete,
        patched: false,
    })
}

impl SparseTransitionMatrix {
    pub fn base(&self) -> Base {
        self.base
    }

    pub fn p(&self) -> ProbParam {
        self.p
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    /// Number of leading rows whose full support lies inside the window.
    pub fn complete_rows(&self) -> usize {
        self.complete.iter().take_while(|&&c| c).count()
    }

    pub fn is_row_complete(&self, i: usize) -> bool {
        self.complete[i]
    }

    pub fn is_patched(&self) -> bool {
        self.patched
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |k| row[k].1)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Moves the mass lost by truncation onto the diagonal of each incomplete row.
    pub fn with_self_loop_patch(&self) -> Self {
        let mut out = self.clone();
        for (i, row) in out.rows.iter_mut().enumerate() {
            if self.complete[i] {
                continue;
            }
            let missing = 1.0 - row.iter().map(|&(_, v)| v).sum::<f64>();
            match row.binary_search_by_key(&i, |&(c, _)| c) {
                Ok(k) => row[k].1 += missing,
                Err(k) => row.insert(k, (i, missing)),
            }
        }
        out.patched = true;
        out
    }

    /// Copy with one entry overwritten; used to exercise the structural checks.
    pub fn with_entry(&self, i: usize, j: usize, value: f64) -> Self {
        let mut out = self.clone();
        let row = &mut out.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => row[k].1 = value,
            Err(k) => row.insert(k, (j, value)),
        }
        out
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.size() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.size(),
                got: len,
            })
        }
    }

    /// `S v` (column vector on the right).
    pub fn apply_right(&self, v: &StateVector) -> Result<StateVector> {
        self.check_len(v.len())?;
        let x = v.as_slice();
        let out = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, s)| x[j] * s).sum())
            .collect();
        Ok(StateVector(out))
    }

    /// `u S` (row vector on the left).
    pub fn apply_left(&self, u: &StateVector) -> Result<StateVector> {
        self.check_len(u.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.size()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, s) in row {
                out[j] += u[i] * s;
            }
        }
        Ok(StateVector(out))
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.size()];
        for row in &self.rows {
            for &(j, s) in row {
                sums[j] += s;
            }
        }
        sums
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, s) in row {
                m[(i, j)] = s;
            }
        }
        m
    }

    /// Writes `# base p M` followed by one `row<TAB>col<TAB>value` line per entry.
    pub fn write_export<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# {} {} {}", self.base, self.p.get(), self.size())?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, s) in row {
                writeln!(out, "{i}\t{j}\t{s:.16e}")?;
            }
        }
        Ok(())
    }
}

/// Parsed form of a matrix export.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixExport {
    pub base: Base,
    pub p: f64,
    pub size: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

pub fn read_export<R: BufRead>(input: R) -> Result<MatrixExport> {
    let bad = |msg: &str| Error::MalformedExport(msg.to_string());
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("empty input"))?
        .map_err(|e| bad(&e.to_string()))?;
    let fields: Vec<&str> = header
        .strip_prefix("# ")
        .ok_or_else(|| bad("missing header"))?
        .split_whitespace()
        .collect();
    let [base, p, size] = fields[..] else {
        return Err(bad("header must be `# base p M`"));
    };
    let base: Base = base.parse().map_err(|_| bad("unknown base"))?;
    let p: f64 = p.parse().map_err(|_| bad("bad p"))?;
    let size: usize = size.parse().map_err(|_| bad("bad size"))?;
    let mut entries = Vec::new();
    for line in lines {
        let line = line.map_err(|e| bad(&e.to_string()))?;
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [i, j, v] = cols[..] else {
            return Err(bad("entry must have three tab-separated fields"));
        };
        entries.push((
            i.parse().map_err(|_| bad("bad row"))?,
            j.parse().map_err(|_| bad("bad column"))?,
            v.parse().map_err(|_| bad("bad value"))?,
        ));
    }
    Ok(MatrixExport {
        base,
        p,
        size,
        entries,
    })
}

/// Max discrepancy between `S~^2 v` and `E S v_even + O S v_odd` with
/// `S~ = (S_p - (1-p) I) / p`, over the indices `0..M-2` that the truncation
/// leaves untouched. Base 2 only.
pub fn tilde_square_discrepancy(p: ProbParam, m: usize, v: &[Complex64]) -> Result<f64> {
    if m < 4 || !m.is_multiple_of(2) {
        return Err(Error::InvalidSize {
            size: m,
            reason: "need an even size of at least 4",
        });
    }
    if v.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: v.len(),
        });
    }
    let full = build_truncated(Base::Binary, p, m)?;
    let half = build_truncated(Base::Binary, p, m / 2)?;
    let (pp, q) = (p.get(), p.fail());
    let tilde = |x: &[Complex64]| -> Vec<Complex64> {
        let sx = full
            .apply_right(&StateVector(x.to_vec()))
            .expect("sized")
            .into_inner();
        sx.iter().zip(x).map(|(s, xi)| (s - xi * q) / pp).collect()
    };
    let lhs = tilde(&tilde(v));
    let evens: Vec<Complex64> = v.iter().step_by(2).copied().collect();
    let odds: Vec<Complex64> = v.iter().skip(1).step_by(2).copied().collect();
    let s_even = half.apply_right(&StateVector(evens))?;
    let s_odd = half.apply_right(&StateVector(odds))?;
    let rhs = |i: usize| {
        if i.is_multiple_of(2) {
            s_even[i / 2]
        } else {
            s_odd[i / 2]
        }
    };
    Ok((0..m - 2)
        .map(|i| (lhs[i] - rhs(i)).norm())
        .fold(0.0, f64::max))
}

/// [`tilde_square_discrepancy`] maximized over 20 seeded random complex vectors.
pub fn tilde_square_check(p: ProbParam, m: usize) -> Result<f64> {
    let mut rng = RngStream::new(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let v: Vec<Complex64> = (0..m)
            .map(|_| Complex64::new(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0))
            .collect();
        worst = worst.max(tilde_square_discrepancy(p, m, &v)?);
    }
    Ok(worst)
}

/// Checks that the block of states `[2^(n-1), 2^n)` copies the block
/// `[0, 2^(n-1))` for every `n <= k`, entry by entry.
pub fn is_self_similar(s: &SparseTransitionMatrix, k: u32) -> bool {
    for n in 1..=k {
        let half = 1usize << (n - 1);
        let end = 1usize << n;
        if end > s.size() {
            return false;
        }
        for i in half..end {
            for j in half..end {
                if s.entry(i, j) != s.entry(i - half, j - half) {
                    return false;
                }
            }
        }
    }
    true
}

pub fn self_similarity_check(p: ProbParam, k: u32) -> Result<bool> {
    if k < 2 {
        return Err(Error::InvalidParameter(
            "self-similarity depth must be at least 2",
        ));
    }
    let s = build_truncated(Base::Binary, p, 1usize << k)?;
    Ok(is_self_similar(&s, k))
}

/// Largest truncation accepted by the dense eigensolver.
pub const MAX_DENSE_SIZE: usize = 2048;

/// Eigenvalues of a dense real matrix via the real Schur form, sorted by
/// modulus, largest first.
pub fn eigenvalues_of(m: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let schur = nalgebra::linalg::Schur::try_new(m, 1e-14, 10_000).ok_or(Error::EigenFailure)?;
    let mut values: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
    Ok(values)
}

pub fn dense_eigenvalues(s: &SparseTransitionMatrix) -> Result<Vec<Complex64>> {
    if s.size() > MAX_DENSE_SIZE {
        return Err(Error::InvalidSize {
            size: s.size(),
            reason: "dense solve limited to 2048",
        });
    }
    eigenvalues_of(s.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> ProbParam {
        ProbParam::new(v).unwrap()
    }

    #[test]
    fn binary_truncation_drops_only_last_superdiagonal() {
        let s = build_truncated(Base::Binary, p(0.5), 4).unwrap();
        assert_eq!(s.complete_rows(), 3);
        assert!(!s.is_row_complete(3));
        assert_eq!(s.row(3), &[(0, 0.125), (2, 0.25), (3, 0.5)]);
        assert!(build_truncated(Base::Binary, p(0.5), 1).is_err());
    }

    #[test]
    fn diagonal_is_one_minus_p() {
        for base in [Base::Binary, Base::Fibonacci] {
            for m in [2, 5, 64] {
                let s = build_truncated(base, p(0.3), m).unwrap();
                assert_eq!(s.entry(0, 0), 0.7);
            }
        }
    }

    #[test]
    fn right_action_on_ones_and_basis() {
        let s = build_truncated(Base::Fibonacci, p(0.6), 40).unwrap();
        let ones = StateVector::from_real(&[1.0; 40]).unwrap();
        let out = s.apply_right(&ones).unwrap();
        for i in 0..s.complete_rows() {
            assert!((out[i].re - 1.0).abs() < 1e-12);
        }
        let col = s.apply_right(&StateVector::basis(40, 0)).unwrap();
        for i in 0..40 {
            assert_eq!(col[i].re, s.entry(i, 0));
        }
        assert!(matches!(
            s.apply_left(&StateVector::zeros(3)),
            Err(Error::DimensionMismatch {
                expected: 40,
                got: 3
            })
        ));
    }

    #[test]
    fn left_action_matches_column_sums() {
        let s = build_truncated(Base::Binary, p(0.4), 32).unwrap();
        let out = s
            .apply_left(&StateVector::from_real(&[1.0; 32]).unwrap())
            .unwrap();
        for (o, c) in out.as_slice().iter().zip(s.column_sums()) {
            assert!((o.re - c).abs() < 1e-15);
        }
    }

    #[test]
    fn binary_column_zero_sum() {
        let q = p(0.7);
        for k in 2..10 {
            let s = build_truncated(Base::Binary, q, 1 << k).unwrap();
            let expected = 1.0 - 0.7f64.powi(k + 1);
            // rows 2^m - 1 < 2^k feed column 0 for m = 1..k, plus the diagonal
            assert!((s.column_sums()[0] - expected).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn self_loop_patch_makes_rows_stochastic() {
        let s = build_truncated(Base::Fibonacci, p(0.7), 21)
            .unwrap()
            .with_self_loop_patch();
        assert!(s.is_patched());
        for i in 0..s.size() {
            let sum: f64 = s.row(i).iter().map(|e| e.1).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tilde_square_on_first_basis_vector() {
        // S~ e_0: row 1 picks (1-p)/p * ... expand by hand at p = 1/2:
        // S~ = 2 S - I. (S~ e_0)_i = 2 S[i,0] - [i == 0].
        let q = p(0.5);
        let v = StateVector::basis(8, 0).into_inner();
        assert!(tilde_square_discrepancy(q, 8, &v).unwrap() < 1e-15);
        let s = build_truncated(Base::Binary, q, 8).unwrap();
        let t1: Vec<f64> = (0..8)
            .map(|i| 2.0 * s.entry(i, 0) - if i == 0 { 1.0 } else { 0.0 })
            .collect();
        assert_eq!(&t1[..4], &[0.0, 0.5, 0.0, 0.25]);
    }

    #[test]
    fn tilde_square_rejects_odd_size() {
        assert!(tilde_square_check(p(0.5), 7).is_err());
        assert!(tilde_square_check(p(0.5), 2).is_err());
    }

    #[test]
    fn self_similarity_detects_perturbation() {
        assert!(self_similarity_check(p(0.5), 8).unwrap());
        let s = build_truncated(Base::Binary, p(0.5), 256).unwrap();
        assert_eq!(s.entry(2, 2), s.entry(0, 0));
        assert_eq!(s.entry(2, 3), s.entry(0, 1));
        let broken = s.with_entry(37, 38, 0.123);
        assert!(!is_self_similar(&broken, 8));
        assert!(self_similarity_check(p(0.5), 1).is_err());
    }

    #[test]
    fn eigenvalue_of_one_by_one() {
        let e = eigenvalues_of(DMatrix::from_element(1, 1, 0.3)).unwrap();
        assert_eq!(e, vec![Complex64::new(0.3, 0.0)]);
    }

    #[test]
    fn patched_truncation_has_unit_eigenvalue() {
        let s = build_truncated(Base::Binary, p(0.7), 64)
            .unwrap()
            .with_self_loop_patch();
        let e = dense_eigenvalues(&s).unwrap();
        assert!(
            (e[0] - Complex64::new(1.0, 0.0)).norm() < 1e-10,
            "{:?}",
            e[0]
        );
    }

    #[test]
    fn export_round_trip() {
        let s = build_truncated(Base::Fibonacci, p(0.7), 13).unwrap();
        let mut buf = Vec::new();
        s.write_export(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# fibonacci 0.7 13\n"));
        assert!(text.contains("0\t0\t3.0000000000000004e-1\n"));
        let parsed = read_export(&buf[..]).unwrap();
        assert_eq!(parsed.size, 13);
        assert_eq!(parsed.entries.len(), s.nnz());
        for &(i, j, v) in &parsed.entries {
            assert_eq!(v, s.entry(i, j));
        }
        assert!(read_export(&b"nope"[..]).is_err());
    }
}
