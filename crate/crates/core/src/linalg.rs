//! Dense complex linear algebra sized for multi-qubit operators: Kronecker
//! products, partial traces, subsystem permutation, and a cyclic-Jacobi
//! Hermitian eigensolver. Row-major storage, dimensions capped at 4096
//! (12 qubits).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hard cap on matrix dimension (12 qubits).
pub const MAX_DIM: usize = 4096;

/// Entrywise tolerance for treating a matrix as Hermitian.
pub const HERM_TOL: f64 = 1e-10;

/// Eigenvalue floor for treating a Hermitian matrix as positive semidefinite.
pub const PSD_TOL: f64 = -1e-9;

// ---------------------------------------------------------------------------
// ComplexMatrix
// ---------------------------------------------------------------------------

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        check_dim_cap(rows, cols)?;
        Ok(Self {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n).expect("identity dimension exceeds cap");
        for i in 0..n {
            m.entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Build from a flat row-major entry vector. Rejects length mismatches
    /// and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        check_dim_cap(rows, cols)?;
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                entries.len()
            )));
        }
        if !entries.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::Parameter("matrix entry is not finite".into()));
        }
        Ok(Self { rows, cols, entries })
    }

    /// Build from nested rows of `(re, im)` pairs.
    pub fn from_rows(rows: &[Vec<(f64, f64)>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if r == 0 || c == 0 {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        let entries = rows
            .iter()
            .flat_map(|row| row.iter().map(|&(re, im)| Complex64::new(re, im)))
            .collect();
        Self::from_vec(r, c, entries)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.entries[i * self.cols + j] = v;
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self { rows: self.rows, cols: self.cols, entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self { rows: self.rows, cols: self.cols, entries })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn scale_re(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![Complex64::new(0.0, 0.0); n * m];
        for i in 0..n {
            for p in 0..k {
                let a = self.entries[i * k + p];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let row = &other.entries[p * m..(p + 1) * m];
                let dst = &mut out[i * m..(i + 1) * m];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(Self { rows: n, cols: m, entries: out })
    }

    pub fn trace(&self) -> Complex64 {
        debug_assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    /// Max entrywise deviation from Hermiticity, `max |m_ij - conj(m_ji)|`.
    pub fn herm_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.herm_deviation() <= tol
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.rows, other.rows);
        debug_assert_eq!(self.cols, other.cols);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}: {}x{} vs {}x{}",
                op, self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

fn check_dim_cap(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::DimensionMismatch("zero-dimension matrix".into()));
    }
    if rows > MAX_DIM || cols > MAX_DIM {
        return Err(Error::Resource(format!(
            "matrix dimension {}x{} exceeds the cap of {}",
            rows, cols, MAX_DIM
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// SubsystemLayout
// ---------------------------------------------------------------------------

/// Tensor-factor bookkeeping for a multipartite operator. Subsystem index 0
/// is the leftmost (most significant) factor; all modules inherit this
/// convention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemLayout {
    dims: Vec<usize>,
}

impl SubsystemLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Layout("layout needs at least one subsystem".into()));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::Layout("every subsystem dimension must be >= 2".into()));
        }
        let total: usize = dims.iter().product();
        if total > MAX_DIM {
            return Err(Error::Resource(format!(
                "layout total dimension {} exceeds the cap of {}",
                total, MAX_DIM
            )));
        }
        Ok(Self { dims })
    }

    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Split a basis index into per-subsystem digits (index 0 most significant).
    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.dims.len()];
        for (pos, &d) in self.dims.iter().enumerate().rev() {
            digits[pos] = index % d;
            index /= d;
        }
        digits
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.dims.len());
        let mut index = 0;
        for (pos, &d) in self.dims.iter().enumerate() {
            debug_assert!(digits[pos] < d);
            index = index * d + digits[pos];
        }
        index
    }

    fn check_matches(&self, m: &ComplexMatrix) -> Result<()> {
        if !m.is_square() {
            return Err(Error::Layout("layout applies to square matrices only".into()));
        }
        if m.rows() != self.total() {
            return Err(Error::Layout(format!(
                "matrix dimension {} does not match layout total {}",
                m.rows(),
                self.total()
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Tensor products, traces, permutations
// ---------------------------------------------------------------------------

/// Kronecker product `a (x) b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_dim_cap(a.rows() * b.rows(), a.cols() * b.cols())?;
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc)?;
    for i1 in 0..ar {
        for j1 in 0..ac {
            let f = a.get(i1, j1);
            if f.norm_sqr() == 0.0 {
                continue;
            }
            for i2 in 0..br {
                for j2 in 0..bc {
                    out.set(i1 * br + i2, j1 * bc + j2, f * b.get(i2, j2));
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of a sequence of factors, left to right.
pub fn kron_all(mats: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let mut iter = mats.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::Parameter("kron_all needs at least one factor".into()))?;
    let mut acc = first.clone();
    for m in iter {
        acc = kron(&acc, m)?;
    }
    Ok(acc)
}

/// Trace out the subsystems listed in `traced`; the result lives on the kept
/// factors in their original order. Tracing everything yields a 1x1 matrix
/// holding the scalar trace.
pub fn partial_trace(
    m: &ComplexMatrix,
    layout: &SubsystemLayout,
    traced: &[usize],
) -> Result<ComplexMatrix> {
    layout.check_matches(m)?;
    let k = layout.len();
    let mut is_traced = vec![false; k];
    for &t in traced {
        if t >= k {
            return Err(Error::Layout(format!(
                "traced subsystem {} out of range (layout has {})",
                t, k
            )));
        }
        if is_traced[t] {
            return Err(Error::Layout(format!("subsystem {} traced twice", t)));
        }
        is_traced[t] = true;
    }

    let kept: Vec<usize> = (0..k).filter(|&i| !is_traced[i]).collect();
    let kept_total: usize = kept.iter().map(|&i| layout.dims()[i]).product::<usize>().max(1);
    let traced_total: usize = (0..k)
        .filter(|&i| is_traced[i])
        .map(|i| layout.dims()[i])
        .product::<usize>()
        .max(1);
    let traced_list: Vec<usize> = (0..k).filter(|&i| is_traced[i]).collect();

    let kept_dims: Vec<usize> = kept.iter().map(|&i| layout.dims()[i]).collect();
    let traced_dims: Vec<usize> = traced_list.iter().map(|&i| layout.dims()[i]).collect();

    let mut out = ComplexMatrix::zeros(kept_total.max(1), kept_total.max(1))?;
    let mut full_row = vec![0usize; k];
    let mut full_col = vec![0usize; k];

    for i_out in 0..kept_total {
        let row_digits = decode_mixed(i_out, &kept_dims);
        for j_out in 0..kept_total {
            let col_digits = decode_mixed(j_out, &kept_dims);
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..traced_total {
                let t_digits = decode_mixed(t, &traced_dims);
                for (slot, &pos) in kept.iter().enumerate() {
                    full_row[pos] = row_digits[slot];
                    full_col[pos] = col_digits[slot];
                }
                for (slot, &pos) in traced_list.iter().enumerate() {
                    full_row[pos] = t_digits[slot];
                    full_col[pos] = t_digits[slot];
                }
                acc += m.get(layout.encode(&full_row), layout.encode(&full_col));
            }
            out.set(i_out, j_out, acc);
        }
    }
    Ok(out)
}

fn decode_mixed(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; dims.len()];
    for (pos, &d) in dims.iter().enumerate().rev() {
        digits[pos] = index % d;
        index /= d;
    }
    digits
}

/// Conjugate `m` by the permutation unitary that places input subsystem
/// `perm[i]` at output position `i`. Spectrum-preserving; traces of
/// simultaneously permuted operator/state pairs are unchanged.
pub fn permute_subsystems(
    m: &ComplexMatrix,
    layout: &SubsystemLayout,
    perm: &[usize],
) -> Result<ComplexMatrix> {
    layout.check_matches(m)?;
    let k = layout.len();
    if perm.len() != k {
        return Err(Error::Permutation(format!(
            "permutation length {} does not match {} subsystems",
            perm.len(),
            k
        )));
    }
    let mut seen = vec![false; k];
    for &p in perm {
        if p >= k || seen[p] {
            return Err(Error::Permutation("not a bijection on subsystem indices".into()));
        }
        seen[p] = true;
    }

    let new_dims: Vec<usize> = perm.iter().map(|&p| layout.dims()[p]).collect();
    let total = layout.total();

    // index_map[o] = input basis index corresponding to output basis index o
    let mut index_map = vec![0usize; total];
    let mut in_digits = vec![0usize; k];
    for (o, slot) in index_map.iter_mut().enumerate() {
        let out_digits = decode_mixed(o, &new_dims);
        for i in 0..k {
            in_digits[perm[i]] = out_digits[i];
        }
        *slot = layout.encode(&in_digits);
    }

    let mut out = ComplexMatrix::zeros(total, total)?;
    for i in 0..total {
        for j in 0..total {
            out.set(i, j, m.get(index_map[i], index_map[j]));
        }
    }
    Ok(out)
}

/// Real expectation value `Re Tr(op * state)` for Hermitian `op` and `state`.
/// Rejects inputs whose trace picks up an imaginary part above 1e-9.
pub fn expectation(op: &ComplexMatrix, state: &ComplexMatrix) -> Result<f64> {
    if !op.is_square() || !state.is_square() || op.rows() != state.rows() {
        return Err(Error::DimensionMismatch(format!(
            "expectation needs equal square operators, got {}x{} and {}x{}",
            op.rows(),
            op.cols(),
            state.rows(),
            state.cols()
        )));
    }
    for (name, m) in [("operator", op), ("state", state)] {
        let dev = m.herm_deviation();
        if dev > HERM_TOL {
            let _ = name;
            return Err(Error::NotHermitian { max_dev: dev });
        }
    }
    let n = op.rows();
    let mut t = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            t += op.get(i, j) * state.get(j, i);
        }
    }
    if t.im.abs() > 1e-9 {
        return Err(Error::Constraint(format!(
            "expectation has imaginary part {:.3e}",
            t.im
        )));
    }
    Ok(t.re)
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order and the matching unitary of
/// column eigenvectors, so that `m = V diag(lambda) V^dag`.
pub fn herm_eig(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("eigendecomposition needs a square matrix".into()));
    }
    let dev = m.herm_deviation();
    if dev > HERM_TOL {
        return Err(Error::NotHermitian { max_dev: dev });
    }

    let n = m.rows();
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();
    if scale > 0.0 {
        let tol = 1e-14 * scale;
        for _sweep in 0..60 {
            let mut off: f64 = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a.get(p, q).norm());
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    jacobi_rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (a.get(i, i).re, i)).collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let eigenvalues: Vec<f64> = pairs.iter().map(|&(val, _)| val).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v.get(i, pairs[j].1));
    Ok((eigenvalues, vectors))
}

/// Eigenvalues only, ascending.
pub fn herm_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    herm_eig(m).map(|(vals, _)| vals)
}

/// One complex Jacobi rotation annihilating the (p, q) entry of `a`,
/// accumulated into `v`.
fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    let b = apq.norm();
    if b < 1e-300 {
        return;
    }
    let app = a.get(p, p).re;
    let aqq = a.get(q, q).re;
    let phase = apq / b; // e^{i beta}

    // Real rotation angle for [[app, b], [b, aqq]]: the zeroing condition is
    // (aqq - app) s c + b (c^2 - s^2) = 0.
    let tau = (aqq - app) / (2.0 * b);
    let t = if tau == 0.0 {
        1.0
    } else {
        -tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // U differs from the identity only at (p, q):
    //   U[p][p] = c, U[p][q] = -s e^{i beta}, U[q][p] = s e^{-i beta}, U[q][q] = c
    let se_pos = phase * s; // s e^{i beta}
    let se_neg = phase.conj() * s; // s e^{-i beta}

    let n = a.rows();
    // A <- A U (columns p, q)
    for i in 0..n {
        let aip = a.get(i, p);
        let aiq = a.get(i, q);
        a.set(i, p, aip * c + aiq * se_neg);
        a.set(i, q, -aip * se_pos + aiq * c);
    }
    // A <- U^dag A (rows p, q)
    for j in 0..n {
        let apj = a.get(p, j);
        let aqj = a.get(q, j);
        a.set(p, j, apj * c + aqj * se_pos);
        a.set(q, j, -apj * se_neg + aqj * c);
    }
    // V <- V U
    for i in 0..n {
        let vip = v.get(i, p);
        let viq = v.get(i, q);
        v.set(i, p, vip * c + viq * se_neg);
        v.set(i, q, -vip * se_pos + viq * c);
    }
}
