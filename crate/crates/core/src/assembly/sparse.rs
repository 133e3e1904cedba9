use nalgebra::DMatrix;

/// Symmetric sparse matrix in compressed row form.
///
/// Both triangles are stored. Every off-diagonal contribution is written to
/// `(i, j)` and `(j, i)` and summed in the same order, so the stored matrix is
/// exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetric {
    /// Sums duplicate entries in input order. Each unordered pair `{i, j}`
    /// should appear once per contribution; the mirror entry is implied.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut full: Vec<(usize, usize, usize, f64)> = Vec::with_capacity(2 * triplets.len());
        for (n, &(i, j, v)) in triplets.iter().enumerate() {
            assert!(
                i < dim && j < dim,
                "triplet ({i}, {j}) outside dimension {dim}"
            );
            full.push((i, j, n, v));
            if i != j {
                full.push((j, i, n, v));
            }
        }
        full.sort_unstable_by_key(|&(i, j, n, _)| (i, j, n));
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (i, j, _, v) in full {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSymmetric {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let t: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(diag.len(), &t)
    }

    /// Upper triangle of a symmetric dense matrix, zeros dropped.
    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in i..a.ncols() {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), &t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|k| v[k]).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.dim) {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `a A + b B` with the union sparsity pattern.
    pub fn combine(a: f64, lhs: &Self, b: f64, rhs: &Self) -> Self {
        assert_eq!(lhs.dim, rhs.dim);
        let mut row_ptr = vec![0; lhs.dim + 1];
        let mut cols = Vec::with_capacity(lhs.nnz().max(rhs.nnz()));
        let mut vals = Vec::with_capacity(cols.capacity());
        for i in 0..lhs.dim {
            let (c1, v1) = lhs.row(i);
            let (c2, v2) = rhs.row(i);
            let (mut p, mut q) = (0, 0);
            while p < c1.len() || q < c2.len() {
                let j1 = c1.get(p).copied().unwrap_or(usize::MAX);
                let j2 = c2.get(q).copied().unwrap_or(usize::MAX);
                let (j, v) = if j1 == j2 {
                    p += 1;
                    q += 1;
                    (j1, a * v1[p - 1] + b * v2[q - 1])
                } else if j1 < j2 {
                    p += 1;
                    (j1, a * v1[p - 1])
                } else {
                    q += 1;
                    (j2, b * v2[q - 1])
                };
                cols.push(j);
                vals.push(v);
            }
            row_ptr[i + 1] = cols.len();
        }
        SparseSymmetric {
            dim: lhs.dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                a[(i, j)] = x;
            }
        }
        a
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Coordinate text, one `row col value` per stored entry in row-major
    /// order, values with 17 significant digits.
    pub fn to_coordinate_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.dim {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                s.push_str(&format!("{i} {j} {x:.16e}\n"));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_accumulate_and_mirror() {
        let a = SparseSymmetric::from_triplets(
            3,
            &[
                (0, 0, 1.0),
                (0, 1, 2.0),
                (1, 0, 0.5),
                (2, 2, 3.0),
                (0, 0, 1.0),
            ],
        );
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(0, 1), 2.5);
        assert_eq!(a.get(1, 0), 2.5);
        assert_eq!(a.get(1, 2), 0.0);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![4.5, 2.5, 3.0]);
        assert_eq!(a.to_dense(), a.to_dense().transpose());
    }

    #[test]
    fn combine_merges_patterns() {
        let a = SparseSymmetric::from_triplets(3, &[(0, 1, 1.0), (2, 2, 1.0)]);
        let b = SparseSymmetric::from_diagonal(&[1.0, 2.0, 3.0]);
        let c = SparseSymmetric::combine(2.0, &a, 1.0, &b);
        assert_eq!(c.to_dense(), a.to_dense() * 2.0 + b.to_dense());
    }

    #[test]
    fn coordinate_text() {
        let a = SparseSymmetric::from_triplets(2, &[(0, 1, 0.1)]);
        assert_eq!(
            a.to_coordinate_text(),
            "0 1 1.0000000000000001e-1\n1 0 1.0000000000000001e-1\n"
        );
    }
}
