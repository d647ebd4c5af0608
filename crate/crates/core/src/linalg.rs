//! Exact dense linear algebra over the coefficient rings. Matrices here are
//! small (tens of rows), so dense row-major storage is fine.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::ring::{CoefficientRing, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<Scalar>>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![vec![Scalar::zero(); cols]; rows] }
    }

    pub fn from_columns(rows: usize, cols: &[Vec<Scalar>]) -> Self {
        let mut m = Matrix::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows);
            for (i, v) in c.iter().enumerate() {
                m.data[i][j] = v.clone();
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> Vec<Scalar> {
        self.data.iter().map(|r| r[j].clone()).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        Matrix { rows: rows.len(), cols: self.cols, data: rows.iter().map(|&i| self.data[i].clone()).collect() }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: cols.len(),
            data: self.data.iter().map(|r| cols.iter().map(|&j| r[j].clone()).collect()).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[Scalar], ring: CoefficientRing) -> Vec<Scalar> {
        assert_eq!(v.len(), self.cols);
        self.data
            .iter()
            .map(|r| {
                let s = r.iter().zip(v).fold(Scalar::zero(), |acc, (a, b)| acc + a * b);
                ring.normalize(s)
            })
            .collect()
    }

    pub fn mul(&self, other: &Matrix, ring: CoefficientRing) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                if self.data[i][k].is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    if !other.data[k][j].is_zero() {
                        out.data[i][j] = &out.data[i][j] + &self.data[i][k] * &other.data[k][j];
                    }
                }
            }
        }
        for row in out.data.iter_mut() {
            for v in row.iter_mut() {
                *v = ring.normalize(std::mem::take(v));
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|r| r.iter().all(|v| v.is_zero()))
    }
}

/// Reduced row echelon form over a field; returns the pivot columns.
pub fn rref(m: &Matrix, ring: CoefficientRing) -> (Matrix, Vec<usize>) {
    assert!(ring.is_field());
    let mut a = m.clone();
    for row in a.data.iter_mut() {
        for v in row.iter_mut() {
            *v = ring.normalize(std::mem::take(v));
        }
    }
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..a.cols {
        if r == a.rows {
            break;
        }
        let Some(p) = (r..a.rows).find(|&i| !a.data[i][c].is_zero()) else { continue };
        a.data.swap(r, p);
        let inv = ring.inv(&a.data[r][c]);
        for v in a.data[r].iter_mut() {
            *v = ring.mul(v, &inv);
        }
        let pivot_row = a.data[r].clone();
        for i in 0..a.rows {
            if i != r && !a.data[i][c].is_zero() {
                let f = a.data[i][c].clone();
                for (v, pv) in a.data[i].iter_mut().zip(&pivot_row) {
                    if !pv.is_zero() {
                        *v = ring.sub(v, &ring.mul(&f, pv));
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (a, pivots)
}

pub fn rank(m: &Matrix, ring: CoefficientRing) -> usize {
    rref(m, ring.field_of_fractions()).1.len()
}

/// Basis of the null space {v : m v = 0} over a field.
pub fn kernel(m: &Matrix, ring: CoefficientRing) -> Vec<Vec<Scalar>> {
    let (r, pivots) = rref(m, ring);
    let free: Vec<usize> = (0..m.cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = vec![Scalar::zero(); m.cols];
            v[fc] = ring.one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = ring.neg(&r.data[row][fc]);
            }
            v
        })
        .collect()
}

/// Some solution of m x = b over a field, or None.
pub fn solve(m: &Matrix, b: &[Scalar], ring: CoefficientRing) -> Option<Vec<Scalar>> {
    assert!(ring.is_field());
    let mut aug = m.clone();
    for (row, v) in aug.data.iter_mut().zip(b) {
        row.push(v.clone());
    }
    aug.cols += 1;
    let (r, pivots) = rref(&aug, ring);
    if pivots.last() == Some(&m.cols) {
        return None;
    }
    let mut x = vec![Scalar::zero(); m.cols];
    for (row, &pc) in pivots.iter().enumerate() {
        x[pc] = r.data[row][m.cols].clone();
    }
    Some(x)
}

/// Whether v lies in the span of the given vectors.
pub fn in_span(vectors: &[Vec<Scalar>], v: &[Scalar], ring: CoefficientRing) -> bool {
    if v.iter().all(|x| x.is_zero()) {
        return true;
    }
    if vectors.is_empty() {
        return false;
    }
    solve(&Matrix::from_columns(v.len(), vectors), v, ring).is_some()
}

fn to_int(x: &Scalar) -> BigInt {
    assert!(x.is_integer(), "expected an integer matrix entry, got {x}");
    x.to_integer()
}

/// Some integer solution of m x = b by column-style Hermite elimination
/// with a unimodular transform, or None when only rational solutions exist
/// (or none at all).
pub fn solve_integer(m: &Matrix, b: &[Scalar]) -> Option<Vec<Scalar>> {
    let (rows, cols) = (m.rows, m.cols);
    let mut h: Vec<Vec<BigInt>> = m.data.iter().map(|r| r.iter().map(to_int).collect()).collect();
    let mut u: Vec<Vec<BigInt>> =
        (0..cols).map(|i| (0..cols).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect();
    let b: Vec<BigInt> = b.iter().map(to_int).collect();

    let col_op = |mat: &mut Vec<Vec<BigInt>>, c: usize, j: usize, s: &BigInt, t: &BigInt, x: &BigInt, y: &BigInt| {
        // (col_c, col_j) <- (s col_c + t col_j, x col_c + y col_j)
        for row in mat.iter_mut() {
            let (a, bb) = (row[c].clone(), row[j].clone());
            row[c] = s * &a + t * &bb;
            row[j] = x * &a + y * &bb;
        }
    };

    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut c = 0;
    for r in 0..rows {
        if c == cols {
            break;
        }
        for j in c + 1..cols {
            if h[r][j].is_zero() {
                continue;
            }
            let (a, bb) = (h[r][c].clone(), h[r][j].clone());
            let eg = a.extended_gcd(&bb);
            let g = eg.gcd;
            let (x, y) = (-(&bb / &g), &a / &g);
            col_op(&mut h, c, j, &eg.x, &eg.y, &x, &y);
            col_op(&mut u, c, j, &eg.x, &eg.y, &x, &y);
        }
        if !h[r][c].is_zero() {
            if h[r][c].is_negative() {
                for row in h.iter_mut() {
                    row[c] = -row[c].clone();
                }
                for row in u.iter_mut() {
                    row[c] = -row[c].clone();
                }
            }
            pivots.push((r, c));
            c += 1;
        }
    }

    let mut y = vec![BigInt::zero(); cols];
    let mut next_pivot = 0;
    for r in 0..rows {
        let partial: BigInt = (0..cols).map(|j| &h[r][j] * &y[j]).sum();
        if next_pivot < pivots.len() && pivots[next_pivot].0 == r {
            let pc = pivots[next_pivot].1;
            let rem = &b[r] - &partial;
            if !rem.is_multiple_of(&h[r][pc]) {
                return None;
            }
            y[pc] = rem / &h[r][pc];
            next_pivot += 1;
        } else if partial != b[r] {
            return None;
        }
    }
    Some(
        (0..cols)
            .map(|i| BigRational::from_integer((0..cols).map(|j| &u[i][j] * &y[j]).sum()))
            .collect(),
    )
}

/// Solves m x = b over the given ring (Hermite elimination over Z).
pub fn solve_in_ring(m: &Matrix, b: &[Scalar], ring: CoefficientRing) -> Option<Vec<Scalar>> {
    match ring {
        CoefficientRing::Integers => solve_integer(m, b),
        _ => solve(m, b, ring),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: i64) -> Scalar {
        BigRational::from_integer(BigInt::from(v))
    }

    fn mat(rows: &[&[i64]]) -> Matrix {
        let data: Vec<Vec<Scalar>> = rows.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect();
        Matrix { rows: data.len(), cols: data.first().map_or(0, |r| r.len()), data }
    }

    #[test]
    fn integer_solve_respects_divisibility() {
        let m = mat(&[&[2, 0], &[0, 3]]);
        assert!(solve_integer(&m, &[q(2), q(3)]).is_some());
        assert!(solve_integer(&m, &[q(1), q(3)]).is_none());
        assert!(solve(&m, &[q(1), q(3)], CoefficientRing::Rationals).is_some());
    }

    #[test]
    fn integer_solve_finds_combination_solutions() {
        let m = mat(&[&[4, 6], &[1, 1]]);
        let b = [q(2), q(0)];
        let x = solve_integer(&m, &b).unwrap();
        assert_eq!(m.mul_vec(&x, CoefficientRing::Integers), b.to_vec());
    }

    #[test]
    fn kernel_is_annihilated() {
        let m = mat(&[&[1, 1, 0], &[0, 1, 1]]);
        let k = kernel(&m, CoefficientRing::Rationals);
        assert_eq!(k.len(), 1);
        assert!(m.mul_vec(&k[0], CoefficientRing::Rationals).iter().all(|v| v.is_zero()));
    }

    #[test]
    fn rank_depends_on_characteristic() {
        let m = mat(&[&[1, 1], &[1, -1]]);
        assert_eq!(rank(&m, CoefficientRing::Rationals), 2);
        assert_eq!(rank(&m, CoefficientRing::ModP(2)), 1);
    }
}
