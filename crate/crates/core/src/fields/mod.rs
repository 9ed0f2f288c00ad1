//! Positive scalar fields `u` and their log-form `psi = -ln u`: exact
//! second-order jets for the analytic families, finite-difference jets for
//! grid samples.

mod grid;

pub use grid::{BoundaryPolicy, GridField, GridSpec};

use crate::error::{Error, Result};
use crate::mobius::{self, MapJet2, MobiusMap};
use crate::symfun::{FFamily, OperatorSpec, SymMatrix};
use crate::util::{dist2, norm2, sub};
use serde::{Deserialize, Serialize};

/// A second-order jet `(value, gradient, Hessian)` of a scalar field at a
/// point.
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymMatrix,
}

impl Jet2 {
    pub fn constant(v: f64, n: usize) -> Self {
        Jet2 { value: v, gradient: vec![0.0; n], hessian: SymMatrix::zeros(n) }
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    /// Multiply the whole jet by a constant.
    pub fn scaled(&self, c: f64) -> Self {
        Jet2 {
            value: c * self.value,
            gradient: self.gradient.iter().map(|g| c * g).collect(),
            hessian: self.hessian.scaled(c),
        }
    }

    pub fn plus(&self, other: &Jet2) -> Self {
        Jet2 {
            value: self.value + other.value,
            gradient: self
                .gradient
                .iter()
                .zip(&other.gradient)
                .map(|(a, b)| a + b)
                .collect(),
            hessian: self.hessian.plus(&other.hessian),
        }
    }

    /// Product rule.
    pub fn mul(&self, other: &Jet2) -> Self {
        let n = self.dim();
        let grad: Vec<f64> = (0..n)
            .map(|i| self.gradient[i] * other.value + self.value * other.gradient[i])
            .collect();
        let hess = SymMatrix::from_upper(n, |i, j| {
            self.hessian.get(i, j) * other.value
                + self.value * other.hessian.get(i, j)
                + self.gradient[i] * other.gradient[j]
                + self.gradient[j] * other.gradient[i]
        });
        Jet2 { value: self.value * other.value, gradient: grad, hessian: hess }
    }

    /// Chain rule through a scalar function with known first and second
    /// derivatives at `self.value`.
    pub fn chain_scalar(&self, f: f64, fp: f64, fpp: f64) -> Self {
        let n = self.dim();
        let grad: Vec<f64> = self.gradient.iter().map(|g| fp * g).collect();
        let hess = SymMatrix::from_upper(n, |i, j| {
            fp * self.hessian.get(i, j) + fpp * self.gradient[i] * self.gradient[j]
        });
        Jet2 { value: f, gradient: grad, hessian: hess }
    }

    /// `self^p` for positive `self.value`.
    pub fn powf(&self, p: f64) -> Self {
        let v = self.value;
        self.chain_scalar(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }

    /// Chain this jet (taken at `phi(x)`) through a map jet at `x`,
    /// producing the jet of `w o phi` at `x`.
    pub fn compose_map(&self, mj: &MapJet2) -> Self {
        let n = self.dim();
        let grad: Vec<f64> = (0..n)
            .map(|a| (0..n).map(|k| self.gradient[k] * mj.jac[k * n + a]).sum())
            .collect();
        let hess = SymMatrix::from_upper(n, |a, b| {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += self.hessian.get(k, l) * mj.jac[k * n + a] * mj.jac[l * n + b];
                }
                s += self.gradient[k] * mj.hess[k].get(a, b);
            }
            s
        });
        Jet2 { value: self.value, gradient: grad, hessian: hess }
    }

    /// Jet of `psi = -ln u` from the jet of a positive `u`.
    pub fn log_form(&self) -> Result<Jet2> {
        let u = self.value;
        if u <= 0.0 {
            return Err(Error::NonPositiveU(u));
        }
        let n = self.dim();
        let grad: Vec<f64> = self.gradient.iter().map(|g| -g / u).collect();
        let hess = SymMatrix::from_upper(n, |i, j| {
            -self.hessian.get(i, j) / u + self.gradient[i] * self.gradient[j] / (u * u)
        });
        Ok(Jet2 { value: -u.ln(), gradient: grad, hessian: hess })
    }
}

/// Parameters of the standard bubble
/// `v(x) = (a / (1 + b^2 |x - x0|^2))^{(n-2)/2}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BubbleParams {
    pub a: f64,
    pub b: f64,
    pub center: Vec<f64>,
}

impl BubbleParams {
    pub fn new(a: f64, b: f64, center: Vec<f64>) -> Self {
        assert!(a > 0.0 && b > 0.0, "bubble parameters must be positive");
        BubbleParams { a, b, center }
    }

    /// The eigenvalue of the bubble's conformal Hessian: all eigenvalues of
    /// `A^v` equal `2 b^2 / a^2` at every point.
    pub fn hessian_eigenvalue(&self) -> f64 {
        2.0 * self.b * self.b / (self.a * self.a)
    }

    /// Choose `a` for a given `b` so that the bubble solves
    /// `f(lambda(A^v)) = level` for the sigma-k families:
    /// `f(t, ..., t) = level` at `t = 2 b^2 / a^2`.
    pub fn tuned(spec: &OperatorSpec, b: f64, center: Vec<f64>) -> Self {
        let t = match &spec.f_family {
            FFamily::SigmaKRoot(k) => {
                spec.level / crate::symfun::binomial(spec.n, *k).powf(1.0 / *k as f64)
            }
            FFamily::SigmaKRaw(k) => {
                (spec.level / crate::symfun::binomial(spec.n, *k)).powf(1.0 / *k as f64)
            }
            FFamily::Custom(_) => panic!("tuned bubbles are defined for the sigma-k families"),
        };
        let a = b * (2.0 / t).sqrt();
        BubbleParams::new(a, b, center)
    }

    /// Decay constant `alpha = lim |y|^{n-2} v(y) = a^{(n-2)/2} / b^{n-2}`.
    pub fn decay_constant(&self) -> f64 {
        let n = self.center.len();
        let m = 0.5 * (n as f64 - 2.0);
        self.a.powf(m) / self.b.powf(n as f64 - 2.0)
    }
}

/// Tabulated radial profile `(r_i, g, g', g'')` for fields of the form
/// `v(x) = g(|x - center|)`. Values are cubic-Hermite interpolated from
/// `(g, g')`; the second derivative is linearly interpolated from the
/// tabulated `g''`, so jets are approximate between knots.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RadialTable {
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub dg: Vec<f64>,
    pub d2g: Vec<f64>,
}

impl RadialTable {
    pub fn from_functions(
        r_max: f64,
        knots: usize,
        g: impl Fn(f64) -> f64,
        dg: impl Fn(f64) -> f64,
        d2g: impl Fn(f64) -> f64,
    ) -> Self {
        assert!(knots >= 2);
        let r: Vec<f64> = (0..knots)
            .map(|i| r_max * i as f64 / (knots - 1) as f64)
            .collect();
        RadialTable {
            g: r.iter().map(|&x| g(x)).collect(),
            dg: r.iter().map(|&x| dg(x)).collect(),
            d2g: r.iter().map(|&x| d2g(x)).collect(),
            r,
        }
    }

    fn locate(&self, r: f64) -> Result<usize> {
        if r < self.r[0] - 1e-12 || r > *self.r.last().unwrap() + 1e-12 {
            return Err(Error::OutOfDomain(format!(
                "radius {r} outside table range [{}, {}]",
                self.r[0],
                self.r.last().unwrap()
            )));
        }
        let mut i = match self.r.binary_search_by(|v| v.total_cmp(&r)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i >= self.r.len() - 1 {
            i = self.r.len() - 2;
        }
        Ok(i)
    }

    /// `(g, g', g'')` at `r`.
    pub fn eval(&self, r: f64) -> Result<(f64, f64, f64)> {
        let i = self.locate(r)?;
        let d = self.r[i + 1] - self.r[i];
        let t = ((r - self.r[i]) / d).clamp(0.0, 1.0);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let g = h00 * self.g[i] + h10 * d * self.dg[i] + h01 * self.g[i + 1]
            + h11 * d * self.dg[i + 1];
        let dh00 = 6.0 * t2 - 6.0 * t;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = -6.0 * t2 + 6.0 * t;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let gp = dh00 * self.g[i] / d + dh10 * self.dg[i] + dh01 * self.g[i + 1] / d
            + dh11 * self.dg[i + 1];
        let gpp = (1.0 - t) * self.d2g[i] + t * self.d2g[i + 1];
        Ok((g, gp, gpp))
    }
}

/// An analytic positive field with exact (closed-form) second-order jets.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum AnalyticField {
    Constant {
        c: f64,
        n: usize,
    },
    Bubble {
        params: BubbleParams,
    },
    RadialProfile {
        table: RadialTable,
        center: Vec<f64>,
    },
    /// The Kelvin transform
    /// `w_{center, lambda}(y) = (lambda / |y - center|)^{n-2} w(iota(y))`,
    /// evaluated through the explicit formula. The inversion center is
    /// excluded from the domain.
    KelvinOf {
        inner: Box<AnalyticField>,
        center: Vec<f64>,
        lambda: f64,
    },
    /// The weighted pullback `|J_phi|^{(n-2)/(2n)} w o phi`, evaluated
    /// through the generic map-jet composition machinery.
    MobiusPullback {
        inner: Box<AnalyticField>,
        map: MobiusMap,
    },
    ScalarMultiple {
        c: f64,
        inner: Box<AnalyticField>,
    },
}

impl AnalyticField {
    pub fn constant(c: f64, n: usize) -> Self {
        assert!(c > 0.0, "constant fields must be positive");
        AnalyticField::Constant { c, n }
    }

    pub fn bubble(params: BubbleParams) -> Self {
        AnalyticField::Bubble { params }
    }

    pub fn scaled(c: f64, inner: AnalyticField) -> Self {
        assert!(c > 0.0, "scalar multiples must be positive");
        AnalyticField::ScalarMultiple { c, inner: Box::new(inner) }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnalyticField::Constant { n, .. } => *n,
            AnalyticField::Bubble { params } => params.center.len(),
            AnalyticField::RadialProfile { center, .. } => center.len(),
            AnalyticField::KelvinOf { center, .. } => center.len(),
            AnalyticField::MobiusPullback { map, .. } => map.n,
            AnalyticField::ScalarMultiple { inner, .. } => inner.dim(),
        }
    }

    /// Field value, without derivative work.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            AnalyticField::Constant { c, .. } => Ok(*c),
            AnalyticField::Bubble { params } => {
                let n = params.center.len() as f64;
                let q = 1.0 + params.b * params.b * dist2(x, &params.center);
                Ok((params.a / q).powf(0.5 * (n - 2.0)))
            }
            AnalyticField::RadialProfile { table, center } => {
                let r = dist2(x, center).sqrt();
                let (g, _, _) = table.eval(r)?;
                Ok(g)
            }
            AnalyticField::KelvinOf { inner, center, lambda } => {
                let rho = dist2(x, center);
                if rho.sqrt() <= 1e-9 * lambda {
                    return Err(Error::OutOfDomain(
                        "Kelvin transform evaluated at its center".into(),
                    ));
                }
                let n = center.len() as f64;
                let pref = (lambda * lambda / rho).powf(0.5 * (n - 2.0));
                let y: Vec<f64> = (0..center.len())
                    .map(|i| center[i] + lambda * lambda * (x[i] - center[i]) / rho)
                    .collect();
                Ok(pref * inner.value(&y)?)
            }
            AnalyticField::MobiusPullback { inner, map } => {
                let n = map.n as f64;
                let w = map.jacobian_det(x)?.abs().powf((n - 2.0) / (2.0 * n));
                let y = map.apply(x)?;
                Ok(w * inner.value(&y)?)
            }
            AnalyticField::ScalarMultiple { c, inner } => Ok(c * inner.value(x)?),
        }
    }

    /// Exact second-order jet of `u` at `x`.
    pub fn jet_u(&self, x: &[f64]) -> Result<Jet2> {
        let n = self.dim();
        match self {
            AnalyticField::Constant { c, .. } => Ok(Jet2::constant(*c, n)),
            AnalyticField::Bubble { params } => Ok(bubble_jet(params, x)),
            AnalyticField::RadialProfile { table, center } => {
                let z = sub(x, center);
                let r = norm2(&z).sqrt();
                let (g, gp, gpp) = table.eval(r)?;
                if r < 1e-12 {
                    return Ok(Jet2 {
                        value: g,
                        gradient: vec![0.0; n],
                        hessian: SymMatrix::identity(n).scaled(gpp),
                    });
                }
                let zh: Vec<f64> = z.iter().map(|v| v / r).collect();
                let grad: Vec<f64> = zh.iter().map(|v| gp * v).collect();
                let hess = SymMatrix::from_upper(n, |i, j| {
                    let mut v = (gpp - gp / r) * zh[i] * zh[j];
                    if i == j {
                        v += gp / r;
                    }
                    v
                });
                Ok(Jet2 { value: g, gradient: grad, hessian: hess })
            }
            AnalyticField::KelvinOf { inner, center, lambda } => {
                kelvin_jet(inner, center, *lambda, x)
            }
            AnalyticField::MobiusPullback { inner, map } => {
                mobius::pullback_jet(map, x, |y| inner.jet_u(y))
            }
            AnalyticField::ScalarMultiple { c, inner } => Ok(inner.jet_u(x)?.scaled(*c)),
        }
    }

    /// Exact jet of `psi = -ln u` at `x`.
    pub fn jet_psi(&self, x: &[f64]) -> Result<Jet2> {
        self.jet_u(x)?.log_form()
    }
}

/// Closed-form bubble jet. With `m = (n-2)/2`, `q = 1 + b^2 |x - x0|^2`:
/// `v = a^m q^{-m}`, `grad v = -2 m b^2 a^m q^{-m-1} (x - x0)`,
/// `hess v = -2 m b^2 a^m q^{-m-1} I + 4 m (m+1) b^4 a^m q^{-m-2} z z^T`.
fn bubble_jet(params: &BubbleParams, x: &[f64]) -> Jet2 {
    let n = params.center.len();
    let m = 0.5 * (n as f64 - 2.0);
    let (a, b) = (params.a, params.b);
    let z = sub(x, &params.center);
    let q = 1.0 + b * b * norm2(&z);
    let am = a.powf(m);
    let v = am * q.powf(-m);
    let c1 = -2.0 * m * b * b * am * q.powf(-m - 1.0);
    let c2 = 4.0 * m * (m + 1.0) * b.powi(4) * am * q.powf(-m - 2.0);
    let grad: Vec<f64> = z.iter().map(|zi| c1 * zi).collect();
    let hess = SymMatrix::from_upper(n, |i, j| {
        let mut h = c2 * z[i] * z[j];
        if i == j {
            h += c1;
        }
        h
    });
    Jet2 { value: v, gradient: grad, hessian: hess }
}

/// Direct-formula Kelvin jet: prefactor `P = lambda^{2m} rho^{-m}` times
/// the inner jet chained through the inversion `iota(y) = c + lambda^2 z / rho`.
/// Independent of the op-composition path in [`crate::mobius`].
fn kelvin_jet(
    inner: &AnalyticField,
    center: &[f64],
    lambda: f64,
    x: &[f64],
) -> Result<Jet2> {
    let n = center.len();
    let m = 0.5 * (n as f64 - 2.0);
    let z = sub(x, center);
    let rho = norm2(&z);
    if rho.sqrt() <= 1e-9 * lambda {
        return Err(Error::OutOfDomain(
            "Kelvin transform evaluated at its center".into(),
        ));
    }
    let l2 = lambda * lambda;

    // prefactor jet
    let pv = l2.powf(m) * rho.powf(-m);
    let pc = -2.0 * m * l2.powf(m);
    let pgrad: Vec<f64> = z.iter().map(|zi| pc * rho.powf(-m - 1.0) * zi).collect();
    // hess P = -2 m l^{2m} [rho^{-m-1} delta_ij - 2 (m+1) rho^{-m-2} z_i z_j]
    let phess = SymMatrix::from_upper(n, |i, j| {
        pc * (if i == j { rho.powf(-m - 1.0) } else { 0.0 })
            - pc * 2.0 * (m + 1.0) * rho.powf(-m - 2.0) * z[i] * z[j]
    });
    let pjet = Jet2 { value: pv, gradient: pgrad, hessian: phess };

    // inversion map jet, written out directly
    let y: Vec<f64> = (0..n).map(|i| center[i] + l2 * z[i] / rho).collect();
    let mut jac = vec![0.0; n * n];
    for i in 0..n {
        for a in 0..n {
            let mut v = -2.0 * z[i] * z[a] / (rho * rho);
            if i == a {
                v += 1.0 / rho;
            }
            jac[i * n + a] = l2 * v;
        }
    }
    let hess: Vec<SymMatrix> = (0..n)
        .map(|i| {
            SymMatrix::from_upper(n, |a, b| {
                let mut lin = 0.0;
                if i == a {
                    lin += z[b];
                }
                if i == b {
                    lin += z[a];
                }
                if a == b {
                    lin += z[i];
                }
                l2 * (8.0 * z[i] * z[a] * z[b] / (rho * rho * rho) - 2.0 * lin / (rho * rho))
            })
        })
        .collect();
    let iota = MapJet2 { y, jac, hess };
    let inner_jet = inner.jet_u(&iota.y)?;
    Ok(pjet.mul(&inner_jet.compose_map(&iota)))
}

/// A scalar field given either analytically (exact jets) or on a grid
/// (sampled values; finite-difference jets at nodes, multilinear values in
/// between).
#[derive(Debug, Clone)]
pub enum ScalarField {
    Analytic(AnalyticField),
    Grid(GridField),
}

impl ScalarField {
    pub fn dim(&self) -> usize {
        match self {
            ScalarField::Analytic(f) => f.dim(),
            ScalarField::Grid(g) => g.grid.dim(),
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            ScalarField::Analytic(f) => f.value(x),
            ScalarField::Grid(g) => g.interp(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobius::{KelvinTransform, MobiusOp};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn fd_jet_of(field: &AnalyticField, x: &[f64], h: f64) -> Jet2 {
        let n = x.len();
        let f = |p: &[f64]| field.value(p).unwrap();
        let mut grad = vec![0.0; n];
        for i in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            grad[i] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        let hess = SymMatrix::from_upper(n, |i, j| {
            if i == j {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (f(&xp) - 2.0 * f(x) + f(&xm)) / (h * h)
            } else {
                let mut xpp = x.to_vec();
                let mut xpm = x.to_vec();
                let mut xmp = x.to_vec();
                let mut xmm = x.to_vec();
                xpp[i] += h;
                xpp[j] += h;
                xpm[i] += h;
                xpm[j] -= h;
                xmp[i] -= h;
                xmp[j] += h;
                xmm[i] -= h;
                xmm[j] -= h;
                (f(&xpp) - f(&xpm) - f(&xmp) + f(&xmm)) / (4.0 * h * h)
            }
        });
        Jet2 { value: f(x), gradient: grad, hessian: hess }
    }

    fn assert_jets_close(a: &Jet2, b: &Jet2, tol: f64, what: &str) {
        let scale = 1.0 + a.value.abs();
        assert!((a.value - b.value).abs() <= tol * scale, "{what}: value");
        for i in 0..a.dim() {
            assert!(
                (a.gradient[i] - b.gradient[i]).abs()
                    <= tol * (1.0 + a.gradient[i].abs()),
                "{what}: gradient[{i}] {} vs {}",
                a.gradient[i],
                b.gradient[i]
            );
        }
        let d = a.hessian.max_abs_diff(&b.hessian);
        assert!(d <= tol * (1.0 + a.hessian.frobenius()), "{what}: hessian diff {d}");
    }

    #[test]
    fn constant_jet() {
        let f = AnalyticField::constant(2.5, 3);
        let j = f.jet_u(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(j.value, 2.5);
        assert!(j.gradient.iter().all(|&g| g == 0.0));
        assert_eq!(j.hessian.frobenius(), 0.0);
    }

    #[test]
    fn bubble_jet_at_center() {
        // value a^{(n-2)/2}, zero gradient, hessian -(n-2) b^2 a^{(n-2)/2} I
        let f = AnalyticField::bubble(BubbleParams::new(1.0, 1.0, vec![0.0; 3]));
        let j = f.jet_u(&[0.0; 3]).unwrap();
        assert!((j.value - 1.0).abs() < 1e-15);
        assert!(j.gradient.iter().all(|&g| g.abs() < 1e-15));
        for i in 0..3 {
            for k in 0..3 {
                let want = if i == k { -1.0 } else { 0.0 };
                assert!((j.hessian.get(i, k) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bubble_jet_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [3usize, 4, 5] {
            let params = BubbleParams::new(1.3, 0.8, (0..n).map(|_| 0.1).collect());
            let f = AnalyticField::bubble(params);
            for _ in 0..5 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let exact = f.jet_u(&x).unwrap();
                let fd = fd_jet_of(&f, &x, 1e-4);
                assert_jets_close(&exact, &fd, 1e-6, "bubble");
            }
        }
    }

    #[test]
    fn psi_jet_round_trip_and_fd() {
        let f = AnalyticField::bubble(BubbleParams::new(1.0, 1.0, vec![0.0; 3]));
        let x = [0.3, -0.2, 0.5];
        let ju = f.jet_u(&x).unwrap();
        let jp = f.jet_psi(&x).unwrap();
        // exp(-psi) reconstructs the value exactly
        assert_eq!((-jp.value).exp(), ju.value);
        // psi of a constant field
        let c = AnalyticField::constant(2.0, 3);
        let jc = c.jet_psi(&x).unwrap();
        assert_eq!(jc.value, -(2.0f64.ln()));
        assert!(jc.gradient.iter().all(|&g| g == 0.0));
        // chain-rule output vs finite differences of -ln u
        let h = 1e-4;
        for i in 0..3 {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (-(f.value(&xp).unwrap().ln()) + f.value(&xm).unwrap().ln())
                / (2.0 * h);
            assert!((jp.gradient[i] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn kelvin_of_constant_is_power_law() {
        // w_{0,1} of 1 is |y|^{2-n}
        for n in [3usize, 5] {
            let f = AnalyticField::constant(1.0, n);
            let kt = KelvinTransform { center: vec![0.0; n], lambda: 1.0 };
            let k = mobius::kelvin(&f, &kt).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            for _ in 0..20 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
                let want = norm2(&x).sqrt().powi(2 - n as i32);
                assert!((k.value(&x).unwrap() - want).abs() < 1e-12 * (1.0 + want));
            }
        }
    }

    #[test]
    fn kelvin_fixes_its_sphere() {
        let f = AnalyticField::bubble(BubbleParams::new(2.0, 0.7, vec![0.3, 0.0, -0.1]));
        let center = vec![0.5, -0.2, 0.1];
        let lam = 0.8;
        let k = mobius::kelvin(&f, &KelvinTransform { center: center.clone(), lambda: lam })
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let mut d: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nm = crate::util::norm(&d);
            for v in d.iter_mut() {
                *v *= lam / nm;
            }
            let y: Vec<f64> = center.iter().zip(&d).map(|(c, v)| c + v).collect();
            let kv = k.value(&y).unwrap();
            let fv = f.value(&y).unwrap();
            assert!((kv - fv).abs() < 1e-12 * (1.0 + fv));
        }
    }

    #[test]
    fn kelvin_involution() {
        let f = AnalyticField::bubble(BubbleParams::new(1.4, 1.1, vec![0.2, -0.3, 0.4]));
        let kt = KelvinTransform { center: vec![0.1, 0.1, -0.2], lambda: 0.9 };
        let once = mobius::kelvin(&f, &kt).unwrap();
        let twice = mobius::kelvin(&once, &kt).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if dist2(&x, &kt.center).sqrt() < 0.05 {
                continue;
            }
            let a = twice.value(&x).unwrap();
            let b = f.value(&x).unwrap();
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn kelvin_jet_agrees_with_pullback_route() {
        // the direct transform formula and the weighted op-composition
        // pullback must agree jet-for-jet
        let f = AnalyticField::bubble(BubbleParams::new(1.2, 0.9, vec![0.4, 0.0, -0.3]));
        let center = vec![-0.2, 0.5, 0.1];
        let lam = 1.3;
        let direct =
            mobius::kelvin(&f, &KelvinTransform { center: center.clone(), lambda: lam })
                .unwrap();
        let map = MobiusMap::kelvin_ops(&center, lam);
        let pulled = mobius::pullback_field(&f, &map).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if dist2(&x, &center).sqrt() < 0.1 {
                continue;
            }
            let a = direct.jet_u(&x).unwrap();
            let b = pulled.jet_u(&x).unwrap();
            assert_jets_close(&a, &b, 1e-9, "kelvin vs pullback");
        }
    }

    #[test]
    fn pullback_of_bubble_is_bubble() {
        // fit (a, b, x0) from the pulled-back values through the affine
        // form of w^{-2/(n-2)} and check global agreement
        let n = 3usize;
        let f = AnalyticField::bubble(BubbleParams::new(1.5, 0.6, vec![0.1, 0.2, 0.3]));
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let map = crate::mobius::random_map(n, 4, &mut rng);
        let pulled = mobius::pullback_field(&f, &map).unwrap();

        // w^{-2/(n-2)}(y) = alpha |y|^2 + beta . y + gamma  (affine data)
        let mut pts = Vec::new();
        while pts.len() < n + 2 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.9..0.9)).collect();
            if pulled.value(&x).is_ok() {
                pts.push(x);
            }
        }
        let dim = n + 2;
        let mut a_mat = vec![0.0; dim * dim];
        let mut rhs = vec![0.0; dim];
        for (r, x) in pts.iter().enumerate() {
            a_mat[r * dim] = norm2(x);
            for i in 0..n {
                a_mat[r * dim + 1 + i] = x[i];
            }
            a_mat[r * dim + n + 1] = 1.0;
            rhs[r] = pulled.value(x).unwrap().powf(-2.0 / (n as f64 - 2.0));
        }
        let sol = crate::util::solve_dense(&a_mat, &rhs, dim).unwrap();
        let alpha = sol[0];
        assert!(alpha > 0.0);
        let x0: Vec<f64> = (0..n).map(|i| -sol[1 + i] / (2.0 * alpha)).collect();
        let gamma = sol[n + 1];
        let inv_a = gamma - alpha * norm2(&x0);
        assert!(inv_a > 0.0, "recovered 1/a must be positive");
        let a_fit = 1.0 / inv_a;
        let b_fit = (alpha * a_fit).sqrt();
        let fitted = AnalyticField::bubble(BubbleParams::new(a_fit, b_fit, x0));
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
            if let Ok(v) = pulled.value(&x) {
                let w = fitted.value(&x).unwrap();
                assert!((v - w).abs() <= 1e-8 * (1.0 + w), "{v} vs {w}");
            }
        }
    }

    #[test]
    fn pullback_identity_is_identity() {
        let f = AnalyticField::bubble(BubbleParams::new(1.0, 1.0, vec![0.0; 3]));
        let id = MobiusMap::identity(3);
        let p = mobius::pullback_field(&f, &id).unwrap();
        let x = [0.4, 0.5, -0.6];
        assert_eq!(p.value(&x).unwrap(), f.value(&x).unwrap());
    }

    #[test]
    fn bubble_decay_constant() {
        let params = BubbleParams::new(1.7, 0.4, vec![0.5, -0.5, 0.25]);
        let alpha = params.decay_constant();
        let f = AnalyticField::bubble(params);
        for r in [1e2, 1e3] {
            let y = [r, 0.0, 0.0];
            let v = f.value(&y).unwrap() * crate::util::norm(&y).powi(1);
            assert!(
                (v - alpha).abs() < 0.01 * alpha,
                "decay at {r}: {v} vs {alpha}"
            );
        }
    }

    #[test]
    fn dilation_pullback_matches_closed_form() {
        // v_r(y) = r^{(n-2)/2} v(r y) is exactly the pullback under Dilate(r)
        let f = AnalyticField::bubble(BubbleParams::new(1.0, 0.9, vec![0.2, 0.0, 0.0]));
        let r = 1.7;
        let map = MobiusMap::identity(3).then(MobiusOp::Dilate(r));
        let vr = mobius::pullback_field(&f, &map).unwrap();
        let x = [0.3, -0.4, 0.2];
        let want = r.powf(0.5) * f.value(&[r * x[0], r * x[1], r * x[2]]).unwrap();
        assert!((vr.value(&x).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn radial_profile_reproduces_bubble() {
        // tabulated bubble profile vs the closed form
        let (a, b) = (1.2f64, 0.8f64);
        let m = 0.5; // n = 3
        let g = move |r: f64| (a / (1.0 + b * b * r * r)).powf(m);
        let dg = move |r: f64| {
            -2.0 * m * b * b * r * a.powf(m) * (1.0 + b * b * r * r).powf(-m - 1.0)
        };
        let d2g = move |r: f64| {
            let q = 1.0 + b * b * r * r;
            -2.0 * m * b * b * a.powf(m)
                * (q.powf(-m - 1.0) - 2.0 * (m + 1.0) * b * b * r * r * q.powf(-m - 2.0))
        };
        let table = RadialTable::from_functions(3.0, 4000, g, dg, d2g);
        let f = AnalyticField::RadialProfile { table, center: vec![0.0; 3] };
        let exact = AnalyticField::bubble(BubbleParams::new(a, b, vec![0.0; 3]));
        for x in [[0.5, 0.0, 0.0], [0.3, -0.7, 0.2], [1.0, 1.0, 1.0]] {
            let jf = f.jet_u(&x).unwrap();
            let je = exact.jet_u(&x).unwrap();
            assert_jets_close(&je, &jf, 1e-6, "radial profile");
        }
    }
}
