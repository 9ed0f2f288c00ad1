//! Small dense symmetric-matrix spectral computations, elementary symmetric
//! functions, and Garding-cone membership.
//!
//! Everything here is sized for the conformal-Hessian use case: matrices are
//! `n x n` with `n` in the single digits, and the eigensolver is a cyclic
//! Jacobi iteration (unconditionally stable at this scale, dependency-free).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A real symmetric matrix stored densely. Symmetry holds exactly by
/// construction: every mutation writes both `(i, j)` and `(j, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be >= 1");
        SymMatrix { n, entries: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.entries[i * d.len() + i] = v;
        }
        m
    }

    /// Build from the upper triangle: `f(i, j)` is consulted for `i <= j`
    /// and mirrored below the diagonal.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.entries[i * n + j] = v;
                m.entries[j * n + i] = v;
            }
        }
        m
    }

    /// Symmetric outer product `v v^T`.
    pub fn outer(v: &[f64]) -> Self {
        Self::from_upper(v.len(), |i, j| v[i] * v[j])
    }

    /// Symmetrized outer product `a b^T + b a^T`.
    pub fn sym_outer(a: &[f64], b: &[f64]) -> Self {
        Self::from_upper(a.len(), |i, j| a[i] * b[j] + b[i] * a[j])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n + j] = v;
        self.entries[j * self.n + i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix { n: self.n, entries: self.entries.iter().map(|v| c * v).collect() }
    }

    pub fn plus(&self, other: &SymMatrix) -> Self {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &SymMatrix, c: f64) -> Self {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + c * b).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Sorted eigenvalues of a symmetric matrix together with the worst
/// residual `max_i |M v_i - lambda_i v_i|` over the computed pairs.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub residual: f64,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }
}

const MAX_SWEEPS: usize = 64;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
///
/// Stops when the off-diagonal Frobenius norm drops below `tol * ||M||_F`;
/// the returned eigenvalues are sorted ascending. Deterministic: the sweep
/// order is fixed and no pivot searching is involved.
pub fn eigen_sym(m: &SymMatrix, tol: f64) -> Result<Spectrum> {
    assert!(tol > 0.0, "tolerance must be positive");
    let n = m.n;
    if n == 1 {
        return Ok(Spectrum { eigenvalues: vec![m.get(0, 0)], residual: 0.0 });
    }
    let norm = m.frobenius();
    if norm == 0.0 {
        return Ok(Spectrum { eigenvalues: vec![0.0; n], residual: 0.0 });
    }
    let mut a = m.clone();
    // accumulated rotations, used for the residual check
    let mut v = SymMatrixAccum::identity(n);
    let off = |a: &SymMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a.get(i, j) * a.get(i, j);
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) > tol * norm {
        if sweeps >= MAX_SWEEPS {
            return Err(Error::NonConvergence { tol, sweeps, off: off(&a) });
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- J^T A J on rows/cols p, q
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                }
                let new_pp = app - t * apq;
                let new_qq = aqq + t * apq;
                a.set(p, p, new_pp);
                a.set(q, q, new_qq);
                a.set(p, q, 0.0);
                v.rotate(p, q, c, s);
            }
        }
        sweeps += 1;
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (a.get(i, i), i)).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut residual = 0.0f64;
    for (lam, col) in &pairs {
        let vec: Vec<f64> = (0..n).map(|r| v.get(r, *col)).collect();
        let mv = m.matvec(&vec);
        for i in 0..n {
            residual = residual.max((mv[i] - lam * vec[i]).abs());
        }
    }
    Ok(Spectrum { eigenvalues, residual })
}

/// Dense column-accumulator for Jacobi rotations (not symmetric; kept
/// private to the eigensolver).
struct SymMatrixAccum {
    n: usize,
    e: Vec<f64>,
}

impl SymMatrixAccum {
    fn identity(n: usize) -> Self {
        let mut e = vec![0.0; n * n];
        for i in 0..n {
            e[i * n + i] = 1.0;
        }
        SymMatrixAccum { n, e }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.e[i * self.n + j]
    }

    fn rotate(&mut self, p: usize, q: usize, c: f64, s: f64) {
        for k in 0..self.n {
            let vkp = self.e[k * self.n + p];
            let vkq = self.e[k * self.n + q];
            self.e[k * self.n + p] = c * vkp - s * vkq;
            self.e[k * self.n + q] = s * vkp + c * vkq;
        }
    }
}

/// All elementary symmetric functions `e_0..e_n` of `lambda`, computed by
/// the prefix-product recursion `e_k += lambda_m e_{k-1}`.
///
/// The input is sorted (total order) before the recursion so that the
/// result is bit-identical under permutations of `lambda`.
pub fn elementary_all(lambda: &[f64]) -> Vec<f64> {
    let mut sorted = lambda.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for (m, &x) in sorted.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            e[k] += x * e[k - 1];
        }
    }
    e
}

/// The k-th elementary symmetric function `sigma_k(lambda)`.
pub fn sigma_k(lambda: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > lambda.len() {
        return Err(Error::BadK { k, n: lambda.len() });
    }
    Ok(elementary_all(lambda)[k])
}

/// Binomial coefficient as f64 (exact for the small arguments used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// A cone of admissible eigenvalue vectors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum ConeKind {
    /// The Garding cone `Gamma_k`, i.e. the connected component of
    /// `{sigma_k > 0}` containing the positive orthant; implemented through
    /// the equivalent finite test `sigma_j > 0` for all `j <= k`.
    GammaK(usize),
    /// The half space `{sum lambda_i > 0}` (identical to `GammaK(1)`).
    HalfSpaceGamma1,
    /// A named predicate. Custom cones can place `0` in the interior,
    /// which no `Gamma_k` does; `"all"` is the full space.
    Custom(CustomCone),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CustomCone {
    /// All of `R^n`.
    All,
    /// `{sum lambda_i > -1/2}`: an open elliptic cone containing 0.
    ShiftedHalfSpace,
}

impl CustomCone {
    pub fn contains(&self, lambda: &[f64]) -> bool {
        match self {
            CustomCone::All => true,
            CustomCone::ShiftedHalfSpace => lambda.iter().sum::<f64>() > -0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub n: usize,
}

impl ConeSpec {
    pub fn gamma_k(k: usize, n: usize) -> Self {
        assert!(k >= 1 && k <= n, "GammaK requires 1 <= k <= n");
        ConeSpec { kind: ConeKind::GammaK(k), n }
    }

    /// Open-cone membership.
    pub fn contains(&self, lambda: &[f64]) -> bool {
        debug_assert_eq!(lambda.len(), self.n);
        match &self.kind {
            ConeKind::GammaK(k) => {
                let e = elementary_all(lambda);
                (1..=*k).all(|j| e[j] > 0.0)
            }
            ConeKind::HalfSpaceGamma1 => lambda.iter().sum::<f64>() > 0.0,
            ConeKind::Custom(c) => c.contains(lambda),
        }
    }

    /// Closed-cone membership up to `boundary_tol`: for `Gamma_k`, every
    /// `sigma_j` with `j <= k` must be `>= -boundary_tol`.
    pub fn contains_closure(&self, lambda: &[f64], boundary_tol: f64) -> bool {
        match &self.kind {
            ConeKind::GammaK(k) => {
                let e = elementary_all(lambda);
                (1..=*k).all(|j| e[j] >= -boundary_tol)
            }
            ConeKind::HalfSpaceGamma1 => lambda.iter().sum::<f64>() >= -boundary_tol,
            ConeKind::Custom(c) => c.contains(lambda),
        }
    }
}

/// Open-cone membership test, standalone form.
pub fn in_cone(lambda: &[f64], cone: &ConeSpec) -> bool {
    cone.contains(lambda)
}

/// The symmetric function `f` of the operator pair `(f, Gamma)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum FFamily {
    /// `sigma_k^{1/k}``, the canonical normalization (homogeneous of degree 1).
    SigmaKRoot(usize),
    /// Raw `sigma_k`, exposed for oracle tests.
    SigmaKRaw(usize),
    /// A named custom function.
    Custom(CustomF),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CustomF {
    /// `f(lambda) = 1 + mean(lambda)`. Satisfies `f(0) = 1`, so constants
    /// solve `f = 1`; used as the positive control for the constant branch
    /// of the Liouville dichotomy.
    OnePlusMean,
}

impl CustomF {
    pub fn eval(&self, lambda: &[f64]) -> f64 {
        match self {
            CustomF::OnePlusMean => {
                1.0 + lambda.iter().sum::<f64>() / lambda.len() as f64
            }
        }
    }
}

/// The full operator data `(f, Gamma)` plus evaluation knobs: ambient
/// dimension, the closed-cone tolerance band, and the level (right-hand
/// side) of the equation `f(lambda(A^u)) = level`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OperatorSpec {
    pub f_family: FFamily,
    pub cone: ConeSpec,
    pub n: usize,
    pub boundary_tol: f64,
    pub level: f64,
}

impl OperatorSpec {
    /// The `(sigma_k^{1/k}, Gamma_k)` pair at level 1.
    pub fn sigma_k_root(k: usize, n: usize) -> Self {
        OperatorSpec {
            f_family: FFamily::SigmaKRoot(k),
            cone: ConeSpec::gamma_k(k, n),
            n,
            boundary_tol: 1e-10,
            level: 1.0,
        }
    }

    pub fn sigma_k_raw(k: usize, n: usize) -> Self {
        OperatorSpec {
            f_family: FFamily::SigmaKRaw(k),
            cone: ConeSpec::gamma_k(k, n),
            n,
            boundary_tol: 1e-10,
            level: 1.0,
        }
    }

    /// The constant-branch positive control: `f = 1 + mean(lambda)` on the
    /// full space, level 1.
    pub fn one_plus_mean(n: usize) -> Self {
        OperatorSpec {
            f_family: FFamily::Custom(CustomF::OnePlusMean),
            cone: ConeSpec { kind: ConeKind::Custom(CustomCone::All), n },
            n,
            boundary_tol: 1e-10,
            level: 1.0,
        }
    }

    /// `f` applied to the uniform vector `(t, ..., t)`; closed form for the
    /// sigma-k families.
    pub fn eval_uniform(&self, t: f64) -> f64 {
        match &self.f_family {
            FFamily::SigmaKRoot(k) => binomial(self.n, *k).powf(1.0 / *k as f64) * t,
            FFamily::SigmaKRaw(k) => binomial(self.n, *k) * t.powi(*k as i32),
            FFamily::Custom(c) => c.eval(&vec![t; self.n]),
        }
    }
}

/// Result of evaluating `f` on an eigenvalue vector: either the value, or
/// the named out-of-domain state. The latter is super-solution evidence in
/// the viscosity dichotomy, not an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FValue {
    Value(f64),
    OutsideClosedCone,
}

impl FValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            FValue::Value(v) => Some(*v),
            FValue::OutsideClosedCone => None,
        }
    }
}

/// Evaluate `f(lambda)` guarded by the closed-cone test.
///
/// For the sigma-k families the closure test is `sigma_j >= -boundary_tol`
/// for every `j <= k`; on the boundary band, `sigma_k` is clamped at 0
/// before the k-th root. Custom pairs delegate the domain test to their
/// cone predicate.
pub fn f_eval(lambda: &[f64], spec: &OperatorSpec) -> FValue {
    match &spec.f_family {
        FFamily::SigmaKRoot(k) => {
            if !spec.cone.contains_closure(lambda, spec.boundary_tol) {
                return FValue::OutsideClosedCone;
            }
            let s = elementary_all(lambda)[*k].max(0.0);
            FValue::Value(s.powf(1.0 / *k as f64))
        }
        FFamily::SigmaKRaw(k) => {
            if !spec.cone.contains_closure(lambda, spec.boundary_tol) {
                return FValue::OutsideClosedCone;
            }
            FValue::Value(elementary_all(lambda)[*k])
        }
        FFamily::Custom(c) => {
            if !spec.cone.contains_closure(lambda, spec.boundary_tol) {
                return FValue::OutsideClosedCone;
            }
            FValue::Value(c.eval(lambda))
        }
    }
}
