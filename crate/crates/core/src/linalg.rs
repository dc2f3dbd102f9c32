//! Sparse column access for the block-structured designs.

use nalgebra::DMatrix;

/// Column-wise nonzero cache of a dense matrix.
#[derive(Clone, Debug)]
pub struct SparseColumns {
    nrows: usize,
    cols: Vec<Vec<(usize, f64)>>,
    sq_norms: Vec<f64>,
}

impl SparseColumns {
    pub fn from_dense(x: &DMatrix<f64>) -> Self {
        let mut cols = Vec::with_capacity(x.ncols());
        let mut sq_norms = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let col: Vec<(usize, f64)> = x
                .column(j)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect();
            sq_norms.push(col.iter().map(|(_, v)| v * v).sum());
            cols.push(col);
        }
        SparseColumns { nrows: x.nrows(), cols, sq_norms }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn col(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }

    pub fn sq_norm(&self, j: usize) -> f64 {
        self.sq_norms[j]
    }

    pub fn dot_col(&self, j: usize, v: &[f64]) -> f64 {
        self.cols[j].iter().map(|&(i, x)| x * v[i]).sum()
    }

    pub fn axpy_col(&self, j: usize, alpha: f64, v: &mut [f64]) {
        for &(i, x) in &self.cols[j] {
            v[i] += alpha * x;
        }
    }

    /// `X theta`.
    pub fn mul(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        for (j, &t) in theta.iter().enumerate() {
            if t != 0.0 {
                self.axpy_col(j, t, &mut out);
            }
        }
        out
    }

    /// `X^T r`.
    pub fn tmul(&self, r: &[f64]) -> Vec<f64> {
        (0..self.cols.len()).map(|j| self.dot_col(j, r)).collect()
    }

    /// Groups of columns whose row supports are connected. Columns in
    /// different groups touch disjoint rows, so a least-squares objective
    /// splits into independent pieces along these groups.
    pub fn column_groups(&self) -> Vec<Vec<usize>> {
        let d = self.cols.len();
        let mut parent: Vec<usize> = (0..d).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut owner: Vec<Option<usize>> = vec![None; self.nrows];
        for j in 0..d {
            for &(i, _) in &self.cols[j] {
                match owner[i] {
                    None => owner[i] = Some(j),
                    Some(k) => {
                        let (a, b) = (find(&mut parent, j), find(&mut parent, k));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut index = vec![usize::MAX; d];
        for j in 0..d {
            let r = find(&mut parent, j);
            if index[r] == usize::MAX {
                index[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[index[r]].push(j);
        }
        groups
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_match_dense() {
        let x = DMatrix::from_row_slice(3, 4, &[1.0, 0.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0]);
        let s = SparseColumns::from_dense(&x);
        let theta = [1.0, -1.0, 0.5, 7.0];
        let dense = &x * nalgebra::DVector::from_row_slice(&theta);
        assert_eq!(s.mul(&theta), dense.as_slice());
        let r = [1.0, 2.0, 3.0];
        let dense_t = x.transpose() * nalgebra::DVector::from_row_slice(&r);
        assert_eq!(s.tmul(&r), dense_t.as_slice());
        assert_eq!(s.sq_norm(0), 17.0);
    }

    #[test]
    fn groups_follow_shared_rows() {
        let x = DMatrix::from_row_slice(3, 4, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let g = SparseColumns::from_dense(&x).column_groups();
        assert_eq!(g, vec![vec![0, 1], vec![2], vec![3]]);
    }
}
