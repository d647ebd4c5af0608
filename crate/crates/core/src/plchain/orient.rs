//! Orientations of fiber products of linear maps.
//!
//! For f: V → M and g: W → M the fiber product's tangent space is the kernel
//! of h(v, m, w) = (f v − m, m − g w). With the kernel placed after lifts of
//! the target in the short exact sequence, an ordered kernel basis K is
//! positive exactly when det[h; Kᵀ] > 0 (multiply by [h⁺ | K]).

use nalgebra::{DMatrix, SymmetricEigen};

/// Relative threshold below which a singular value counts as zero.
const RANK_TOL: f64 = 1e-6;

/// An oriented vector space given by an ordered basis (columns). A zero
/// dimensional space carries its orientation as a sign.
#[derive(Debug, Clone, PartialEq)]
pub struct Oriented {
    pub basis: DMatrix<f64>,
    pub sign: i8,
}

impl Oriented {
    pub fn new(basis: DMatrix<f64>) -> Self {
        Oriented { basis, sign: 1 }
    }

    pub fn point(ambient: usize, sign: i8) -> Self {
        Oriented { basis: DMatrix::zeros(ambient, 0), sign }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    /// Orientation-reversed copy.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        if out.dim() == 0 {
            out.sign = -out.sign;
        } else {
            out.basis.column_mut(0).neg_mut();
        }
        out
    }

    pub fn identity(n: usize) -> Self {
        Oriented::new(DMatrix::identity(n, n))
    }
}

/// The transversality defect: the map h is not onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotTransverse;

/// h for the fiber product of f (n×a) and g (n×b).
pub fn fiber_map(f: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = f.nrows();
    assert_eq!(g.nrows(), n);
    let (a, b) = (f.ncols(), g.ncols());
    let mut h = DMatrix::zeros(2 * n, a + n + b);
    h.view_mut((0, 0), (n, a)).copy_from(f);
    h.view_mut((n, a + n), (n, b)).copy_from(&(-g));
    for i in 0..n {
        h[(i, a + i)] = -1.0;
        h[(n + i, a + i)] = 1.0;
    }
    h
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else {
        -1
    }
}

/// Oriented kernel of a surjective h; `extra` multiplies the orientation
/// (signs of zero-dimensional factors).
pub fn oriented_kernel(h: &DMatrix<f64>, extra: i8) -> Result<Oriented, NotTransverse> {
    let (rows, cols) = (h.nrows(), h.ncols());
    if cols < rows {
        return Err(NotTransverse);
    }
    if cols == 0 {
        return Ok(Oriented::point(0, extra));
    }
    let k = cols - rows;
    let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let hs = h / scale;
    let eig = SymmetricEigen::new(hs.transpose() * &hs);
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    if rows > 0 && eig.eigenvalues[order[k]] < RANK_TOL * RANK_TOL {
        return Err(NotTransverse);
    }
    let mut basis = DMatrix::zeros(cols, k);
    for (c, &i) in order[..k].iter().enumerate() {
        basis.set_column(c, &eig.eigenvectors.column(i));
    }
    let mut stacked = DMatrix::zeros(cols, cols);
    stacked.view_mut((0, 0), (rows, cols)).copy_from(&hs);
    stacked.view_mut((rows, 0), (k, cols)).copy_from(&basis.transpose());
    let s = sign_of(stacked.determinant()) * extra;
    if k == 0 {
        return Ok(Oriented::point(cols, s));
    }
    if s < 0 {
        basis.column_mut(0).neg_mut();
    }
    Ok(Oriented::new(basis))
}

/// Fiber product of two oriented linear maps into Rⁿ, returned as an
/// oriented basis in (v, m, w) coordinates.
pub fn fiber_product(f: &DMatrix<f64>, sf: i8, g: &DMatrix<f64>, sg: i8) -> Result<Oriented, NotTransverse> {
    oriented_kernel(&fiber_map(f, g), sf * sg)
}

/// Same, but returned through its image in the target Rⁿ (the m block).
pub fn fiber_product_in_target(f: &DMatrix<f64>, sf: i8, g: &DMatrix<f64>, sg: i8) -> Result<Oriented, NotTransverse> {
    let k = fiber_product(f, sf, g, sg)?;
    let (a, n) = (f.ncols(), f.nrows());
    if k.dim() == 0 {
        return Ok(Oriented::point(n, k.sign));
    }
    Ok(Oriented::new(k.basis.rows(a, n).into_owned()))
}

/// Sign of a transverse zero-dimensional fiber product of oriented bases.
pub fn point_sign(v: &Oriented, w: &Oriented) -> Result<i8, NotTransverse> {
    let k = fiber_product(&v.basis, v.sign, &w.basis, w.sign)?;
    if k.dim() != 0 {
        return Err(NotTransverse);
    }
    Ok(k.sign)
}

/// +1 when two ordered bases of the same subspace define the same
/// orientation. Zero-dimensional spaces compare their signs.
pub fn relative_sign(a: &Oriented, b: &Oriented) -> i8 {
    assert_eq!(a.dim(), b.dim());
    if a.dim() == 0 {
        return a.sign * b.sign;
    }
    let ata = a.basis.transpose() * &a.basis;
    let c = ata.try_inverse().expect("independent basis") * a.basis.transpose() * &b.basis;
    sign_of(c.determinant()) * a.sign * b.sign
}

/// Orientation sign of an ordered basis of Rⁿ.
pub fn det_sign(basis: &DMatrix<f64>) -> i8 {
    sign_of(basis.determinant())
}

/// Concatenates ordered bases column-wise (direct-sum orientation).
pub fn concat(parts: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = parts.first().map_or(0, |p| p.nrows());
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        out.view_mut((0, c), (rows, p.ncols())).copy_from(p);
        c += p.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_axes_follow_the_usual_sign_in_reverse_order() {
        // V = x-axis, W = y-axis in the plane. The usual intersection sign
        // det[TV, TW] = +1 is the count of W ×_M V; V ×_M W is negative.
        let v = Oriented::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0]));
        let w = Oriented::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0]));
        assert_eq!(point_sign(&w, &v), Ok(1));
        assert_eq!(point_sign(&v, &w), Ok(-1));
        assert_eq!(point_sign(&w, &v.reversed()), Ok(-1));
    }

    #[test]
    fn product_over_a_point_is_standard() {
        let v = DMatrix::<f64>::zeros(0, 1);
        let w = DMatrix::<f64>::zeros(0, 1);
        let k = fiber_product(&v, 1, &w, 1).unwrap();
        assert_eq!(relative_sign(&k, &Oriented::identity(2)), 1);
    }

    #[test]
    fn parallel_lines_are_not_transverse() {
        let v = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert!(fiber_product(&v, 1, &v, 1).is_err());
    }

    #[test]
    fn identity_factor_reproduces_source_orientation() {
        // V ×_{1_M} M is identified with V.
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let k = fiber_product(&f, 1, &DMatrix::identity(2, 2), 1).unwrap();
        let v_part = Oriented::new(k.basis.rows(0, 2).into_owned());
        assert_eq!(relative_sign(&v_part, &Oriented::identity(2)), 1);
    }
}
