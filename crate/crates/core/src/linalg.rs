//! Dense complex matrices over tensor products of qubit sites.
//!
//! Traces are normalized (`Tr(1) = 1`) and partial traces map identity to
//! identity. Storage, products and the Hermitian eigensolver come from
//! `nalgebra`; the tensor bookkeeping lives here.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::tree::{canonical_cmp, TreeCoord};
use crate::{Error, Result};

/// Maximum entrywise anti-Hermitian part accepted by the spectral functions.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues above `-PSD_TOL` are clamped to zero by [`ComplexMatrix::psd_sqrt`].
pub const PSD_TOL: f64 = 1e-12;

pub type C64 = Complex64;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// A square complex matrix whose dimension is a power of two.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn identity(dim: usize) -> Self {
        ComplexMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexMatrix(DMatrix::from_fn(dim, dim, f))
    }

    /// Row-major construction; panics on ragged or non-square input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        ComplexMatrix::from_fn(n, |i, j| rows[i][j])
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        ComplexMatrix::from_fn(n, |i, j| re(rows[i][j]))
    }

    pub fn diag(d: &[C64]) -> Self {
        ComplexMatrix::from_fn(d.len(), |i, j| if i == j { d[i] } else { C64::default() })
    }

    pub fn real_diag(d: &[f64]) -> Self {
        ComplexMatrix::from_fn(d.len(), |i, j| if i == j { re(d[i]) } else { C64::default() })
    }

    pub fn from_inner(m: DMatrix<C64>) -> Self {
        assert!(m.is_square(), "matrix must be square");
        ComplexMatrix(m)
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Number of qubit factors, `log2(dim)`, or `None` if `dim` is not a power of two.
    pub fn qubits(&self) -> Option<usize> {
        let d = self.dim();
        d.is_power_of_two().then(|| d.trailing_zeros() as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.0[(i, j)] = v;
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix(&self.0 * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(re(s))
    }

    pub fn kron(&self, other: &ComplexMatrix) -> Self {
        ComplexMatrix(self.0.kronecker(&other.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `trace / dim`, so the identity has trace one.
    pub fn normalized_trace(&self) -> C64 {
        self.trace() / self.dim() as f64
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|A - A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Eigen-decomposition of a Hermitian matrix: `(eigenvalues, unitary eigenvectors)`.
    pub fn herm_eigen(&self) -> Result<(Vec<f64>, ComplexMatrix)> {
        let defect = self.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::domain(format!(
                "matrix is not Hermitian (defect {defect:.3e})"
            )));
        }
        let sym = (&self.0 + self.0.adjoint()) * re(0.5);
        let eig = sym.symmetric_eigen();
        Ok((eig.eigenvalues.iter().copied().collect(), ComplexMatrix(eig.eigenvectors)))
    }

    /// Applies a real function to the spectrum: `V f(Λ) V†`.
    fn spectral_map(vals: &[f64], vecs: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let fd: Vec<C64> = vals.iter().map(|&v| re(f(v))).collect();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(fd));
        ComplexMatrix(&vecs.0 * d * vecs.0.adjoint())
    }

    /// Matrix exponential of a Hermitian matrix via its eigendecomposition.
    pub fn herm_exp(&self) -> Result<ComplexMatrix> {
        let (vals, vecs) = self.herm_eigen()?;
        Ok(Self::spectral_map(&vals, &vecs, f64::exp))
    }

    /// The positive square root of a positive semidefinite matrix.
    pub fn psd_sqrt(&self) -> Result<ComplexMatrix> {
        let (vals, vecs) = self.herm_eigen()?;
        if let Some(&v) = vals.iter().find(|&&v| v < -PSD_TOL) {
            return Err(Error::domain(format!(
                "matrix has negative eigenvalue {v:.3e}"
            )));
        }
        Ok(Self::spectral_map(&vals, &vecs, |v| v.max(0.0).sqrt()))
    }

    /// Smallest eigenvalue of a Hermitian matrix.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (vals, _) = self.herm_eigen()?;
        Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// Kronecker product of a sequence, first factor most significant.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    factors
        .into_iter()
        .fold(ComplexMatrix::identity(1), |acc, f| acc.kron(f))
}

/// Reads bit `pos` (0 = most significant of `m` bits).
#[inline]
fn bit(idx: usize, pos: usize, m: usize) -> usize {
    (idx >> (m - 1 - pos)) & 1
}

/// An operator on an explicit, canonically ordered set of tree sites.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteOperator {
    sites: Vec<TreeCoord>,
    matrix: ComplexMatrix,
}

impl SiteOperator {
    /// Wraps `matrix`, whose tensor factors follow `sites`, and reorders the
    /// factors into canonical site order (level first, then lexicographic).
    pub fn new(sites: Vec<TreeCoord>, matrix: ComplexMatrix) -> Result<Self> {
        let m = sites.len();
        if matrix.dim() != 1usize << m {
            return Err(Error::domain(format!(
                "matrix dimension {} does not match {} sites",
                matrix.dim(),
                m
            )));
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| canonical_cmp(&sites[a], &sites[b]));
        if order.windows(2).any(|w| sites[w[0]] == sites[w[1]]) {
            return Err(Error::domain("duplicate site in operator support"));
        }
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return Ok(SiteOperator { sites, matrix });
        }
        // new position p holds old factor order[p]
        let map = |idx: usize| -> usize {
            (0..m).fold(0, |acc, p| acc | (bit(idx, p, m) << (m - 1 - order[p])))
        };
        let dim = matrix.dim();
        let idx: Vec<usize> = (0..dim).map(map).collect();
        let permuted = ComplexMatrix::from_fn(dim, |i, j| matrix.get(idx[i], idx[j]));
        let sites = order.iter().map(|&o| sites[o].clone()).collect();
        Ok(SiteOperator { sites, matrix: permuted })
    }

    /// Tensor product of single-site factors.
    pub fn product(factors: &[(TreeCoord, ComplexMatrix)]) -> Result<Self> {
        let sites = factors.iter().map(|(s, _)| s.clone()).collect();
        let m = kron_all(factors.iter().map(|(_, f)| f));
        SiteOperator::new(sites, m)
    }

    pub fn identity(sites: Vec<TreeCoord>) -> Result<Self> {
        let d = 1usize << sites.len();
        SiteOperator::new(sites, ComplexMatrix::identity(d))
    }

    pub fn sites(&self) -> &[TreeCoord] {
        &self.sites
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Normalized partial trace over every site not in `keep`.
    pub fn normalized_partial_trace(&self, keep: &[TreeCoord]) -> Result<SiteOperator> {
        for k in keep {
            if !self.sites.contains(k) {
                return Err(Error::domain(format!("site {k} is not in the operator support")));
            }
        }
        let m = self.sites.len();
        let kept: Vec<usize> = (0..m).filter(|&p| keep.contains(&self.sites[p])).collect();
        let traced: Vec<usize> = (0..m).filter(|&p| !keep.contains(&self.sites[p])).collect();
        let compose = |positions: &[usize], sub: usize| -> usize {
            let l = positions.len();
            positions
                .iter()
                .enumerate()
                .fold(0, |acc, (q, &p)| acc | (bit(sub, q, l) << (m - 1 - p)))
        };
        let kdim = 1usize << kept.len();
        let tdim = 1usize << traced.len();
        let koff: Vec<usize> = (0..kdim).map(|r| compose(&kept, r)).collect();
        let toff: Vec<usize> = (0..tdim).map(|t| compose(&traced, t)).collect();
        let norm = 1.0 / tdim as f64;
        let out = ComplexMatrix::from_fn(kdim, |i, j| {
            toff.iter()
                .map(|&t| self.matrix.get(koff[i] | t, koff[j] | t))
                .sum::<C64>()
                * norm
        });
        Ok(SiteOperator {
            sites: kept.iter().map(|&p| self.sites[p].clone()).collect(),
            matrix: out,
        })
    }

    /// Applies a linear map on the 2×2 matrices of one site, leaving the other
    /// factors untouched: `Σ M_ij ⊗ e_ij ↦ Σ M_ij ⊗ f(e_ij)`.
    pub fn map_site(&self, site: &TreeCoord, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Result<SiteOperator> {
        let p = self
            .sites
            .iter()
            .position(|s| s == site)
            .ok_or_else(|| Error::domain(format!("site {site} is not in the operator support")))?;
        let m = self.sites.len();
        let shift = m - 1 - p;
        let images: Vec<Vec<ComplexMatrix>> = (0..2)
            .map(|i| {
                (0..2)
                    .map(|j| f(&ComplexMatrix::from_fn(2, |r, s| {
                        if r == i && s == j { re(1.0) } else { C64::default() }
                    })))
                    .collect()
            })
            .collect();
        let dim = self.matrix.dim();
        let mut out = ComplexMatrix::zeros(dim);
        for r in 0..dim {
            let (ri, rbase) = ((r >> shift) & 1, r & !(1 << shift));
            for s in 0..dim {
                let v = self.matrix.get(r, s);
                if v == C64::default() {
                    continue;
                }
                let (sj, sbase) = ((s >> shift) & 1, s & !(1 << shift));
                let img = &images[ri][sj];
                for k in 0..2 {
                    for l in 0..2 {
                        let (rr, ss) = (rbase | (k << shift), sbase | (l << shift));
                        out.set(rr, ss, out.get(rr, ss) + v * img.get(k, l));
                    }
                }
            }
        }
        Ok(SiteOperator { sites: self.sites.clone(), matrix: out })
    }

    /// The matrix of `self ⊗ 1` on `target`, a superset of the support whose
    /// order is taken as given.
    pub fn embed(&self, target: &[TreeCoord]) -> Result<ComplexMatrix> {
        let n = target.len();
        let pos: Vec<usize> = self
            .sites
            .iter()
            .map(|s| {
                target
                    .iter()
                    .position(|t| t == s)
                    .ok_or_else(|| Error::domain(format!("site {s} missing from target volume")))
            })
            .collect::<Result<_>>()?;
        let m = self.sites.len();
        let sub_mask: usize = pos.iter().fold(0, |acc, &p| acc | (1 << (n - 1 - p)));
        let project = |idx: usize| -> usize {
            pos.iter()
                .enumerate()
                .fold(0, |acc, (q, &p)| acc | (bit(idx, p, n) << (m - 1 - q)))
        };
        let dim = 1usize << n;
        let proj: Vec<usize> = (0..dim).map(project).collect();
        Ok(ComplexMatrix::from_fn(dim, |i, j| {
            if (i & !sub_mask) == (j & !sub_mask) {
                self.matrix.get(proj[i], proj[j])
            } else {
                C64::default()
            }
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{pauli, Pauli};

    fn s(d: &[u8]) -> TreeCoord {
        TreeCoord::from_digits(d)
    }

    #[test]
    fn kron_examples() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(i2.kron(&i2), ComplexMatrix::identity(4));
        let zz = pauli(Pauli::Z).kron(&pauli(Pauli::Z));
        assert_eq!(zz, ComplexMatrix::real_diag(&[1.0, -1.0, -1.0, 1.0]));
        let xy = pauli(Pauli::X).kron(&pauli(Pauli::Y));
        // hand expansion: X⊗Y = [[0, Y], [Y, 0]]; entry (1,4) is Y[0][1] = -i
        assert_eq!(xy.get(0, 3), c(0.0, -1.0));
        assert_eq!(xy.get(3, 0), c(0.0, 1.0));
        assert_eq!(xy.get(1, 2), c(0.0, 1.0));
    }

    #[test]
    fn normalized_trace_examples() {
        assert_eq!(ComplexMatrix::identity(4).normalized_trace(), re(1.0));
        assert_eq!(pauli(Pauli::Z).normalized_trace(), re(0.0));
        assert_eq!(ComplexMatrix::real_diag(&[3.0, 5.0]).normalized_trace(), re(4.0));
    }

    #[test]
    fn partial_trace_examples() {
        let sites = vec![s(&[]), s(&[1]), s(&[2])];
        let id = SiteOperator::identity(sites.clone()).unwrap();
        let r = id.normalized_partial_trace(&[s(&[])]).unwrap();
        assert_eq!(r.matrix(), &ComplexMatrix::identity(2));

        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let h = ComplexMatrix::real_diag(&[2.0, 5.0]);
        let op = SiteOperator::product(&[(s(&[]), a.clone()), (s(&[1]), h.clone())]).unwrap();
        let r = op.normalized_partial_trace(&[s(&[])]).unwrap();
        assert!(r.matrix().max_abs_diff(&a.scale(h.normalized_trace())) < 1e-15);

        let zx = SiteOperator::product(&[(s(&[]), pauli(Pauli::Z)), (s(&[1]), pauli(Pauli::X))])
            .unwrap();
        let r = zx.normalized_partial_trace(&[s(&[])]).unwrap();
        assert!(r.matrix().max_abs() < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_unknown_site() {
        let op = SiteOperator::identity(vec![s(&[])]).unwrap();
        assert!(matches!(
            op.normalized_partial_trace(&[s(&[1])]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn site_reordering_matches_swap() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = ComplexMatrix::from_real_rows(&[&[5.0, 6.0], &[7.0, 8.0]]);
        // given in order ((1), root), stored as (root, (1))
        let op = SiteOperator::new(vec![s(&[1]), s(&[])], a.kron(&b)).unwrap();
        assert_eq!(op.sites(), &[s(&[]), s(&[1])]);
        assert_eq!(op.matrix(), &b.kron(&a));
    }

    #[test]
    fn duplicate_sites_rejected() {
        assert!(SiteOperator::new(vec![s(&[1]), s(&[1])], ComplexMatrix::identity(4)).is_err());
    }

    #[test]
    fn embed_places_factors() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let op = SiteOperator::product(&[(s(&[2]), a.clone())]).unwrap();
        let target = vec![s(&[]), s(&[1]), s(&[2])];
        let full = op.embed(&target).unwrap();
        let expect = kron_all([&ComplexMatrix::identity(2), &ComplexMatrix::identity(2), &a]);
        assert_eq!(full, expect);
    }

    #[test]
    fn map_site_on_product_acts_locally() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = ComplexMatrix::from_real_rows(&[&[0.5, -1.0], &[2.0, 0.0]]);
        let op = SiteOperator::product(&[(s(&[]), a.clone()), (s(&[1]), b.clone())]).unwrap();
        let f = |m: &ComplexMatrix| &(&pauli(Pauli::X) * m) * &pauli(Pauli::Z);
        let mapped = op.map_site(&s(&[1]), f).unwrap();
        assert!(mapped.matrix().max_abs_diff(&a.kron(&f(&b))) < 1e-15);
        assert!(op.map_site(&s(&[2]), f).is_err());
    }

    #[test]
    fn herm_exp_examples() {
        assert!(ComplexMatrix::zeros(4).herm_exp().unwrap().max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
        // ln2 * P for the projection onto (1,1)/sqrt2: exp = I + P
        let p = ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let e = p.scale_re(std::f64::consts::LN_2).herm_exp().unwrap();
        assert!(e.max_abs_diff(&(&ComplexMatrix::identity(2) + &p)) < 1e-14);
    }

    #[test]
    fn herm_exp_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(m.herm_exp(), Err(Error::Domain(_))));
    }

    #[test]
    fn psd_sqrt_examples() {
        let i = ComplexMatrix::identity(2);
        assert!(i.psd_sqrt().unwrap().max_abs_diff(&i) < 1e-15);
        let d = ComplexMatrix::real_diag(&[4.0, 9.0]).psd_sqrt().unwrap();
        assert!(d.max_abs_diff(&ComplexMatrix::real_diag(&[2.0, 3.0])) < 1e-14);
        let (x0, x3) = (0.7, 0.3);
        let h = &ComplexMatrix::identity(2).scale_re(x0) + &pauli(Pauli::Z).scale_re(x3);
        let r = h.psd_sqrt().unwrap();
        let expect = ComplexMatrix::real_diag(&[(x0 + x3).sqrt(), (x0 - x3).sqrt()]);
        assert!(r.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn psd_sqrt_rejects_negative() {
        let m = ComplexMatrix::real_diag(&[1.0, -1e-6]);
        assert!(matches!(m.psd_sqrt(), Err(Error::Domain(_))));
        // within tolerance gets clamped
        let m = ComplexMatrix::real_diag(&[1.0, -1e-13]);
        assert!(m.psd_sqrt().is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cmat(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |v| {
                ComplexMatrix::from_fn(dim, |i, j| c(v[i * dim + j].0, v[i * dim + j].1))
            })
        }

        fn herm(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
            cmat(dim).prop_map(|m| (&m + &m.adjoint()).scale_re(0.5))
        }

        proptest! {
            #[test]
            fn partial_traces_compose(m in cmat(8)) {
                let sites = vec![s(&[]), s(&[1]), s(&[2])];
                let op = SiteOperator::new(sites.clone(), m).unwrap();
                let two_step = op
                    .normalized_partial_trace(&[s(&[]), s(&[1])]).unwrap()
                    .normalized_partial_trace(&[s(&[])]).unwrap();
                let one_step = op.normalized_partial_trace(&[s(&[])]).unwrap();
                prop_assert!(two_step.matrix().max_abs_diff(one_step.matrix()) < 1e-12);
            }

            #[test]
            fn trace_of_kron_factorizes(a in cmat(2), b in cmat(4)) {
                let lhs = a.kron(&b).normalized_trace();
                let rhs = a.normalized_trace() * b.normalized_trace();
                prop_assert!((lhs - rhs).norm() < 1e-12);
            }

            #[test]
            fn exp_inverse(a in herm(4)) {
                let p = a.herm_exp().unwrap();
                let q = a.scale_re(-1.0).herm_exp().unwrap();
                prop_assert!((&p * &q).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-10);
                prop_assert!(p.is_hermitian(1e-10));
                prop_assert!(p.min_eigenvalue().unwrap() > 0.0);
            }

            #[test]
            fn sqrt_squares_back(a in cmat(4)) {
                let psd = &a * &a.adjoint();
                let r = psd.psd_sqrt().unwrap();
                prop_assert!((&(&r * &r) - &psd).frobenius_norm() < 1e-10);
            }

            #[test]
            fn partial_trace_of_product(a in cmat(2), b in herm(4)) {
                // a on the root, positive b on two other sites
                let bpos = &(&b * &b) + &ComplexMatrix::identity(4);
                let op = SiteOperator::new(vec![s(&[]), s(&[1]), s(&[2])], a.kron(&bpos)).unwrap();
                let r = op.normalized_partial_trace(&[s(&[])]).unwrap();
                prop_assert!(r.matrix().max_abs_diff(&a.scale(bpos.normalized_trace())) < 1e-12);
            }
        }
    }
}
