//! Small dense complex linear algebra.
//!
//! Everything here works on fixed-size matrices of dimension at most four:
//! polynomial roots (Aberth–Ehrlich), characteristic polynomials
//! (Faddeev–LeVerrier), determinants and inverses by LU with partial
//! pivoting, and eigen-decompositions with biorthonormal left and right
//! eigenvectors.
//!
//! Polynomials are stored as coefficient slices in *descending* order,
//! `[a_n, a_{n-1}, ..., a_0]` for `a_n z^n + ... + a_0`.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

use crate::constants::ILL_CONDITIONED_SEPARATION;

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("polynomial has degree 0")]
    ConstantPolynomial,
    #[error("leading polynomial coefficient is zero")]
    ZeroLeadingCoefficient,
    #[error("polynomial degree {0} exceeds the supported maximum of 8")]
    DegreeTooLarge(usize),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("non-finite input")]
    NonFinite,
}

/// Dense `N x N` complex matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat<const N: usize>(pub [[C64; N]; N]);

pub type Mat2 = CMat<2>;
pub type Mat4 = CMat<4>;

impl<const N: usize> CMat<N> {
    pub fn zeros() -> Self {
        CMat([[ZERO; N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn from_real(rows: [[f64; N]; N]) -> Self {
        let mut m = Self::zeros();
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                m.0[i][j] = C64::new(x, 0.0);
            }
        }
        m
    }

    pub fn diag(values: [C64; N]) -> Self {
        let mut m = Self::zeros();
        for (i, &v) in values.iter().enumerate() {
            m.0[i][i] = v;
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|x| *x *= s);
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                t.0[j][i] = self.0[i][j];
            }
        }
        t
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.0[i][i]).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.0
            .iter()
            .map(|row| row.iter().map(|x| x.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn mul_vec(&self, x: &[C64; N]) -> [C64; N] {
        let mut y = [ZERO; N];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..N).map(|j| self.0[i][j] * x[j]).sum();
        }
        y
    }

    pub fn column(&self, j: usize) -> [C64; N] {
        let mut c = [ZERO; N];
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = self.0[i][j];
        }
        c
    }

    pub fn row(&self, i: usize) -> [C64; N] {
        self.0[i]
    }

    fn lu(&self) -> Lu<N> {
        let mut a = *self;
        let mut perm = [0usize; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        let mut sign = ONE;
        let mut singular = false;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..N {
            let (piv, pmax) = (k..N)
                .map(|i| (i, a.0[i][k].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= f64::EPSILON * 1e-3 * scale {
                singular = true;
                continue;
            }
            if piv != k {
                a.0.swap(piv, k);
                perm.swap(piv, k);
                sign = -sign;
            }
            let pivot = a.0[k][k];
            for i in (k + 1)..N {
                let factor = a.0[i][k] / pivot;
                a.0[i][k] = factor;
                for j in (k + 1)..N {
                    let akj = a.0[k][j];
                    a.0[i][j] -= factor * akj;
                }
            }
        }
        Lu {
            a,
            perm,
            sign,
            singular,
        }
    }

    /// Determinant by LU factorisation.
    pub fn det(&self) -> C64 {
        let lu = self.lu();
        (0..N).map(|i| lu.a.0[i][i]).fold(lu.sign, |acc, d| acc * d)
    }

    pub fn solve(&self, b: &[C64; N]) -> Result<[C64; N], LinalgError> {
        if !self.is_finite() || b.iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let lu = self.lu();
        if lu.singular {
            return Err(LinalgError::Singular);
        }
        Ok(lu.solve(b))
    }

    /// Matrix inverse. Fails when the reciprocal condition estimate drops
    /// below `1e-12`.
    pub fn invert(&self) -> Result<Self, LinalgError> {
        if !self.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let lu = self.lu();
        if lu.singular {
            return Err(LinalgError::Singular);
        }
        let mut inv = Self::zeros();
        for j in 0..N {
            let mut e = [ZERO; N];
            e[j] = ONE;
            let col = lu.solve(&e);
            for i in 0..N {
                inv.0[i][j] = col[i];
            }
        }
        if self.norm_inf() * inv.norm_inf() > 1e12 || !inv.is_finite() {
            return Err(LinalgError::Singular);
        }
        Ok(inv)
    }
}

struct Lu<const N: usize> {
    a: CMat<N>,
    perm: [usize; N],
    sign: C64,
    singular: bool,
}

impl<const N: usize> Lu<N> {
    fn solve(&self, b: &[C64; N]) -> [C64; N] {
        let mut y = [ZERO; N];
        for i in 0..N {
            y[i] = b[self.perm[i]];
            for j in 0..i {
                y[i] -= self.a.0[i][j] * y[j];
            }
        }
        for i in (0..N).rev() {
            for j in (i + 1)..N {
                y[i] -= self.a.0[i][j] * y[j];
            }
            y[i] /= self.a.0[i][i];
        }
        y
    }
}

impl<const N: usize> Index<(usize, usize)> for CMat<N> {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for CMat<N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl<const N: usize> Add for CMat<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..N {
            for j in 0..N {
                self.0[i][j] += rhs.0[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Sub for CMat<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..N {
            for j in 0..N {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Neg for CMat<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-ONE)
    }
}

impl<const N: usize> Mul for CMat<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..N {
                    out.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        out
    }
}

impl<const N: usize> Mul<C64> for CMat<N> {
    type Output = Self;
    fn mul(self, rhs: C64) -> Self {
        self.scale(rhs)
    }
}

impl<const N: usize> Mul<f64> for CMat<N> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(C64::new(rhs, 0.0))
    }
}

pub fn dot<const N: usize>(a: &[C64; N], b: &[C64; N]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Polynomials
// ---------------------------------------------------------------------------

/// Horner evaluation, descending coefficients.
pub fn poly_eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().fold(ZERO, |acc, &c| acc * z + c)
}

/// Coefficients of the derivative, descending.
pub fn poly_derivative(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len().saturating_sub(1);
    coeffs[..n]
        .iter()
        .enumerate()
        .map(|(i, &c)| c * (n - i) as f64)
        .collect()
}

/// Monic polynomial with the given roots, descending coefficients.
pub fn poly_from_roots(roots: &[C64]) -> Vec<C64> {
    let mut p = vec![ONE];
    for &r in roots {
        let mut next = vec![ZERO; p.len() + 1];
        for (i, &c) in p.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        p = next;
    }
    p
}

const MAX_POLY_DEGREE: usize = 8;
const ABERTH_MAX_ITER: usize = 500;

/// All roots of a polynomial (descending coefficients, degree 1..=8),
/// returned with multiplicity.
///
/// Simultaneous Aberth–Ehrlich iteration started on a circle of the Cauchy
/// bound radius, followed by a Newton polish of each root.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>, LinalgError> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let degree = coeffs.len().saturating_sub(1);
    if degree == 0 {
        return Err(LinalgError::ConstantPolynomial);
    }
    if degree > MAX_POLY_DEGREE {
        return Err(LinalgError::DegreeTooLarge(degree));
    }
    let lead = coeffs[0];
    if lead == ZERO {
        return Err(LinalgError::ZeroLeadingCoefficient);
    }
    let monic: Vec<C64> = coeffs.iter().map(|&c| c / lead).collect();
    if degree == 1 {
        return Ok(vec![-monic[1]]);
    }
    let deriv = poly_derivative(&monic);

    let cauchy = 1.0 + monic[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    // Offset the starting angles so no start lies on a symmetry axis of a
    // real polynomial.
    let mut z: Vec<C64> = (0..degree)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / degree as f64 + 0.4;
            C64::from_polar(cauchy, theta)
        })
        .collect();

    for _ in 0..ABERTH_MAX_ITER {
        let mut max_step = 0.0f64;
        for k in 0..degree {
            let p = poly_eval(&monic, z[k]);
            if p == ZERO {
                continue;
            }
            let dp = poly_eval(&deriv, z[k]);
            let ratio = p / dp;
            let repulsion: C64 = (0..degree)
                .filter(|&j| j != k)
                .map(|j| {
                    let d = z[k] - z[j];
                    if d == ZERO {
                        ZERO
                    } else {
                        ONE / d
                    }
                })
                .sum();
            let step = ratio / (ONE - ratio * repulsion);
            if step.is_finite() {
                z[k] -= step;
                max_step = max_step.max(step.norm() / z[k].norm().max(1.0));
            }
        }
        if max_step < 4.0 * f64::EPSILON {
            break;
        }
    }

    // Newton polish; accept a step only if it lowers |p|.
    for root in z.iter_mut() {
        for _ in 0..3 {
            let p = poly_eval(&monic, *root);
            let dp = poly_eval(&deriv, *root);
            if dp == ZERO || p == ZERO {
                break;
            }
            let cand = *root - p / dp;
            if poly_eval(&monic, cand).norm() < p.norm() {
                *root = cand;
            } else {
                break;
            }
        }
    }
    Ok(z)
}

/// Characteristic polynomial `det(z I - A)` by Faddeev–LeVerrier, descending
/// coefficients (monic, length `N + 1`).
pub fn char_poly<const N: usize>(a: &CMat<N>) -> Vec<C64> {
    let mut coeffs = vec![ZERO; N + 1];
    coeffs[0] = ONE;
    let mut m = CMat::<N>::zeros();
    for k in 1..=N {
        m = *a * m + CMat::<N>::identity() * coeffs[k - 1];
        let am = *a * m;
        coeffs[k] = -am.trace() / k as f64;
    }
    coeffs
}

// ---------------------------------------------------------------------------
// Eigen-decompositions
// ---------------------------------------------------------------------------

/// Closed-form eigenvalues of a 2x2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigen2 {
    pub lambda1: C64,
    pub lambda2: C64,
    /// `(h11 - h22)^2 + 4 h12 h21`; zero exactly at a coalescence.
    pub discriminant: C64,
}

pub fn eigen_2x2(h: &Mat2) -> Eigen2 {
    let half_trace = (h[(0, 0)] + h[(1, 1)]) * 0.5;
    let diff = h[(0, 0)] - h[(1, 1)];
    let discriminant = diff * diff + h[(0, 1)] * h[(1, 0)] * 4.0;
    let mut root = discriminant.sqrt() * 0.5;
    // Larger-magnitude eigenvalue first; the other from the determinant.
    if (half_trace.conj() * root).re < 0.0 {
        root = -root;
    }
    let lambda1 = half_trace + root;
    let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
    let lambda2 = if lambda1 == ZERO {
        half_trace - root
    } else {
        det / lambda1
    };
    Eigen2 {
        lambda1,
        lambda2,
        discriminant,
    }
}

/// Eigenvalues with biorthonormal right (columns) and left (rows) vectors:
/// `left.row(i) . right.column(j) = δ_ij` for simple spectra.
#[derive(Clone, Debug)]
pub struct EigenSystem<const N: usize> {
    pub values: [C64; N],
    pub right: CMat<N>,
    pub left: CMat<N>,
    /// Smallest pairwise eigenvalue distance.
    pub min_separation: f64,
    /// Set when `min_separation < 1e-6 * ||m||`; the vectors of the
    /// near-coalescing pair are then unreliable.
    pub ill_conditioned: bool,
}

impl<const N: usize> EigenSystem<N> {
    pub fn right_vector(&self, i: usize) -> [C64; N] {
        self.right.column(i)
    }

    pub fn left_vector(&self, i: usize) -> [C64; N] {
        self.left.row(i)
    }

    /// `Σ λ_i r_i ⊗ l_i`.
    pub fn reconstruct(&self) -> CMat<N> {
        let mut m = CMat::<N>::zeros();
        for k in 0..N {
            for i in 0..N {
                for j in 0..N {
                    m.0[i][j] += self.values[k] * self.right.0[i][k] * self.left.0[k][j];
                }
            }
        }
        m
    }
}

/// Null vector of `a - λ I` by two steps of inverse iteration.
fn null_vector<const N: usize>(a: &CMat<N>, lambda: C64) -> [C64; N] {
    let scale = a.max_abs().max(1.0);
    let mut shifted = *a - CMat::<N>::identity() * lambda;
    let lu = shifted.lu();
    if lu.singular {
        // Exact eigenvalue; nudge the shift off the spectrum.
        let nudge = C64::new(scale * 1e-14, scale * 1e-14);
        shifted = *a - CMat::<N>::identity() * (lambda + nudge);
    }
    let lu = shifted.lu();
    let mut x = [C64::new(1.0, 0.3); N];
    for (i, xi) in x.iter_mut().enumerate() {
        *xi += C64::new(0.1 * i as f64, -0.05 * i as f64);
    }
    for _ in 0..3 {
        let y = lu.solve(&x);
        let n = vec_norm(&y);
        if !n.is_finite() || n == 0.0 {
            break;
        }
        x = y.map(|v| v / n);
    }
    x
}

pub fn eig<const N: usize>(m: &CMat<N>) -> Result<EigenSystem<N>, LinalgError> {
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let roots = poly_roots(&char_poly(m))?;
    let mut values = [ZERO; N];
    values.copy_from_slice(&roots);
    let mut right = CMat::<N>::zeros();
    let mut left = CMat::<N>::zeros();
    let mt = m.transpose();
    for (k, &lambda) in values.iter().enumerate() {
        let r = null_vector(m, lambda);
        let l = null_vector(&mt, lambda);
        let overlap = dot(&l, &r);
        for i in 0..N {
            right.0[i][k] = r[i];
            left.0[k][i] = if overlap == ZERO { l[i] } else { l[i] / overlap };
        }
    }
    let mut min_separation = f64::INFINITY;
    for i in 0..N {
        for j in (i + 1)..N {
            min_separation = min_separation.min((values[i] - values[j]).norm());
        }
    }
    let ill_conditioned = min_separation < ILL_CONDITIONED_SEPARATION * m.norm();
    Ok(EigenSystem {
        values,
        right,
        left,
        min_separation,
        ill_conditioned,
    })
}

/// 4x4 eigen-decomposition.
pub fn eig_4x4(m: &Mat4) -> Result<EigenSystem<4>, LinalgError> {
    eig(m)
}
