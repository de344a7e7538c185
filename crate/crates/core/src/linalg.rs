//! Dense symmetric matrices and their eigendecomposition.
//!
//! The eigensolver reduces to tridiagonal form with Householder reflections
//! and then runs implicit-shift QL iterations (the EISPACK `tred2`/`tql2`
//! pair). Storage is column-major so that the inner loops of both phases run
//! over contiguous memory.

use crate::error::{Error, Result};

/// Symmetric `n × n` matrix stored as its packed upper triangle, so
/// `get(i, j) == get(j, i)` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    packed: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, packed: vec![0.0; n * (n + 1) / 2] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from a closure evaluated on the upper triangle `i ≤ j`.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Self {
        let mut packed = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                packed.push(f(i, j));
            }
        }
        Self { n, packed }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[self.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.packed[k] = v;
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    pub fn from_packed(n: usize, packed: Vec<f64>) -> Result<Self> {
        if packed.len() != n * (n + 1) / 2 {
            return Err(Error::InvalidParameter(format!(
                "packed length {} does not match dimension {n}",
                packed.len()
            )));
        }
        Ok(Self { n, packed })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                data[j * n + i] = self.packed[k];
                data[i * n + j] = self.packed[k];
                k += 1;
            }
        }
        DenseMatrix { rows: n, cols: n, data }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let n = self.n;
        let mut y = vec![0.0; n];
        let mut k = 0;
        for i in 0..n {
            let xi = x[i];
            let mut acc = self.packed[k] * xi;
            k += 1;
            for j in i + 1..n {
                let a = self.packed[k];
                acc += a * x[j];
                y[j] += a * xi;
                k += 1;
            }
            y[i] += acc;
        }
        y
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j);
                s += v * v;
            }
        }
        s.sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }
}

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// `Aᵀ x`.
    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        (0..self.cols).map(|j| self.column(j).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            for (yi, a) in y.iter_mut().zip(self.column(j)) {
                *yi += a * xj;
            }
        }
        y
    }

    /// `A diag(w) Aᵀ`, symmetric by construction.
    pub fn congruence_diag(&self, w: &[f64]) -> SymMatrix {
        assert_eq!(w.len(), self.cols);
        let n = self.rows;
        let mut out = SymMatrix::zeros(n);
        for (k, &wk) in w.iter().enumerate() {
            let col = self.column(k);
            let mut idx = 0;
            for i in 0..n {
                let s = wk * col[i];
                for c in &col[i..n] {
                    out.packed[idx] += s * c;
                    idx += 1;
                }
            }
        }
        out
    }

    /// `max |AᵀA - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.cols {
            for b in a..self.cols {
                let dot: f64 = self.column(a).iter().zip(self.column(b)).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Eigenvalues in descending order with matching eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl EigenDecomposition {
    /// `‖Q diag(values) Qᵀ - m‖_F / ‖m‖_F`.
    pub fn reconstruction_error(&self, m: &SymMatrix) -> f64 {
        let r = self.vectors.congruence_diag(&self.values);
        let mut num = 0.0;
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                let d = r.get(i, j) - m.get(i, j);
                num += d * d;
            }
        }
        let den = m.frobenius_norm();
        if den == 0.0 {
            num.sqrt()
        } else {
            num.sqrt() / den
        }
    }
}

const MAX_SWEEPS_PER_EIGENVALUE: usize = 30;

fn check_finite(m: &SymMatrix) -> Result<()> {
    if m.packed.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter("matrix has non-finite entries".into()))
    }
}

/// Full eigendecomposition of a symmetric matrix.
pub fn symmetric_eig(m: &SymMatrix) -> Result<EigenDecomposition> {
    check_finite(m)?;
    let n = m.dim();
    if n == 0 {
        return Ok(EigenDecomposition { values: vec![], vectors: DenseMatrix::zeros(0, 0) });
    }
    let mut v = m.to_dense().data;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e, true);
    ql_implicit(n, &mut d, &mut e, Some(&mut v))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.data[dst * n..(dst + 1) * n].copy_from_slice(&v[src * n..(src + 1) * n]);
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Eigenvalues only, in descending order. Skips the accumulation of the
/// orthogonal factor, roughly a third of the work of [`symmetric_eig`].
pub fn symmetric_eigvals(m: &SymMatrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    let n = m.dim();
    if n == 0 {
        return Ok(vec![]);
    }
    let mut v = m.to_dense().data;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e, false);
    ql_implicit(n, &mut d, &mut e, None)?;
    d.sort_by(|a, b| b.total_cmp(a));
    Ok(d)
}

// `v` holds V column-major: V[k][j] lives at v[j * n + k]. On exit `d` is the
// diagonal and `e[1..]` the subdiagonal of the tridiagonal form; if
// `accumulate`, `v` holds the orthogonal transformation.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let at = |k: usize, j: usize| j * n + k;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in &mut e[..i] {
                *ej = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                v[at(j, i)] = f;
                let col = &v[j * n..j * n + i];
                let mut g = e[j] + col[j] * f;
                for k in j + 1..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let col = &mut v[j * n..j * n + i];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = col[i - 1];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for i in 0..n {
            d[i] = v[at(i, i)];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let (left, right) = v.split_at_mut((i + 1) * n);
                let cj = &mut left[j * n..j * n + i + 1];
                let ci = &right[..i + 1];
                let g: f64 = ci.iter().zip(cj.iter()).map(|(a, b)| a * b).sum();
                for k in 0..=i {
                    cj[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn ql_implicit(n: usize, d: &mut [f64], e: &mut [f64], mut v: Option<&mut [f64]>) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    let cap = MAX_SWEEPS_PER_EIGENVALUE * n;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] == 0, so m < n always.
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > cap {
                    return Err(Error::EigensolverFailure(cap));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[l + 2..n] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = v.as_deref_mut() {
                        let (left, right) = v.split_at_mut((i + 1) * n);
                        let ci = &mut left[i * n..];
                        let ci1 = &mut right[..n];
                        for (a, b) in ci.iter_mut().zip(ci1.iter_mut()) {
                            let hk = *b;
                            *b = s * *a + c * hk;
                            *a = c * *a - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity() {
        let eig = symmetric_eig(&SymMatrix::identity(5)).unwrap();
        assert!(eig.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(eig.vectors.orthogonality_defect() < 1e-14);
    }

    #[test]
    fn diagonal_is_sorted_with_permutation_vectors() {
        let m = SymMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let eig = symmetric_eig(&m).unwrap();
        assert_eq!(eig.values, vec![3.0, 2.0, 1.0]);
        for (col, row) in [(0, 0), (1, 2), (2, 1)] {
            assert_abs_diff_eq!(eig.vectors.get(row, col).abs(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn rank_one() {
        let v = [1.0, -2.0, 0.5, 3.0];
        let m = SymMatrix::from_fn(4, |i, j| v[i] * v[j]);
        let eig = symmetric_eig(&m).unwrap();
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        assert_abs_diff_eq!(eig.values[0], norm2, epsilon = 1e-12);
        for &x in &eig.values[1..] {
            assert_abs_diff_eq!(x, 0.0, epsilon = 1e-12);
        }
        // m v = ‖v‖² v
        let mv = m.matvec(&v);
        for (a, b) in mv.iter().zip(&v) {
            assert_abs_diff_eq!(*a, norm2 * b, epsilon = 1e-12);
        }
        let top = eig.vectors.column(0);
        let overlap: f64 = top.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().abs();
        assert_abs_diff_eq!(overlap, norm2.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn random_matrix_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [1, 2, 3, 10, 57] {
            let m = SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let eig = symmetric_eig(&m).unwrap();
            assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
            assert!(eig.vectors.orthogonality_defect() <= 1e-10, "n={n}");
            assert!(eig.reconstruction_error(&m) <= 1e-8, "n={n}");
            let vals = symmetric_eigvals(&m).unwrap();
            for (a, b) in vals.iter().zip(&eig.values) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
            assert_abs_diff_eq!(vals.iter().sum::<f64>(), m.trace(), epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_blocks_and_degenerate_input() {
        let mut m = SymMatrix::zeros(4);
        m.set(0, 3, 2.0);
        let vals = symmetric_eigvals(&m).unwrap();
        assert_abs_diff_eq!(vals[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[3], -2.0, epsilon = 1e-14);
        m.set(1, 1, f64::NAN);
        assert!(symmetric_eig(&m).is_err());
    }

    #[test]
    fn congruence_and_products() {
        let m = SymMatrix::from_fn(3, |i, j| (i + 2 * j) as f64);
        let dense = m.to_dense();
        let x = [1.0, -1.0, 2.0];
        assert_eq!(m.matvec(&x), dense.matvec(&x));
        assert_eq!(dense.transpose_matvec(&x), dense.matvec(&x));
    }
}
