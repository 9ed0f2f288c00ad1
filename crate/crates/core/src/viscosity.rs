//! Sup-/inf-convolution regularization, semiconvexity certificates, concave
//! envelopes with contact sets, and the C^{1,1} a.e.-equivalence check.

mod envelope;

pub use envelope::{concave_envelope, EnvelopeResult};

use crate::conformal::{self, PointVerdict};
use crate::error::{Error, Result};
use crate::fields::{GridField, Jet2};
use crate::symfun::{self, OperatorSpec, SymMatrix};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConvKind {
    Sup,
    Inf,
}

/// Result of a discrete sup- or inf-convolution: the regularized grid, the
/// recorded arg-extremum map (flat node index of `x*` per node), and the
/// penalty scale.
#[derive(Debug, Clone)]
pub struct ConvolutionResult {
    pub regularized: GridField,
    pub eps: f64,
    pub argmax_map: Vec<usize>,
    pub kind: ConvKind,
}

/// Discrete sup-convolution `sup_y (psi(y) - |x - y|^2 / eps)` over all
/// grid nodes, computed exactly by per-axis upper-envelope passes in
/// O(N) per axis, with the maximizer recorded per node.
pub fn sup_convolve(psi: &GridField, eps: f64) -> ConvolutionResult {
    assert!(eps > 0.0, "sup-convolution needs eps > 0");
    let (values, argmax) = separable_transform(psi, eps, true);
    ConvolutionResult {
        regularized: GridField::scalar(psi.grid.clone(), values, psi.boundary_policy)
            .expect("transform preserves finiteness"),
        eps,
        argmax_map: argmax,
        kind: ConvKind::Sup,
    }
}

/// Discrete inf-convolution `inf_y (psi(y) + |x - y|^2 / eps)`; the mirror
/// of [`sup_convolve`] with its own lower-envelope pass, so the duality
/// `inf_convolve(-psi) == -sup_convolve(psi)` is a real cross-check of two
/// code paths.
pub fn inf_convolve(psi: &GridField, eps: f64) -> ConvolutionResult {
    assert!(eps > 0.0, "inf-convolution needs eps > 0");
    let (values, argmin) = separable_transform(psi, eps, false);
    ConvolutionResult {
        regularized: GridField::scalar(psi.grid.clone(), values, psi.boundary_policy)
            .expect("transform preserves finiteness"),
        eps,
        argmax_map: argmin,
        kind: ConvKind::Inf,
    }
}

/// Run the per-axis envelope passes. `upper = true` computes the sup
/// (upper envelope of downward parabolas), `upper = false` the inf.
/// Returns the transformed values and, per node, the flat index of the
/// extremizing source node, recovered by backtracking the per-axis argmaps.
fn separable_transform(psi: &GridField, eps: f64, upper: bool) -> (Vec<f64>, Vec<usize>) {
    let grid = &psi.grid;
    let dim = grid.dim();
    let total = grid.len();
    let mut values = psi.values().to_vec();
    // per-axis argmaps: arg_axis[d][flat] = index along axis d of the
    // extremizer feeding node `flat` during pass d
    let mut arg_axis: Vec<Vec<usize>> = Vec::with_capacity(dim);

    for d in 0..dim {
        let m = grid.shape[d];
        let s = grid.spacing[d] * grid.spacing[d] / eps;
        let stride: usize = grid.shape[d + 1..].iter().product();
        let outer: usize = total / (m * stride);
        let mut args = vec![0usize; total];
        let mut line = vec![0.0; m];
        let mut line_out = vec![0.0; m];
        let mut line_arg = vec![0usize; m];
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * m * stride + inner;
                for i in 0..m {
                    line[i] = values[base + i * stride];
                }
                envelope_1d(&line, s, upper, &mut line_out, &mut line_arg);
                for i in 0..m {
                    values[base + i * stride] = line_out[i];
                    args[base + i * stride] = line_arg[i];
                }
            }
        }
        arg_axis.push(args);
    }

    // Backtrack: the pass over the last axis picked a coordinate there;
    // substitute it and look up the previous pass at the updated node.
    let mut argmax = vec![0usize; total];
    for flat in 0..total {
        let mut idx = grid.unflat(flat);
        for d in (0..dim).rev() {
            let here = grid.flat(&idx);
            idx[d] = arg_axis[d][here];
        }
        argmax[flat] = grid.flat(&idx);
    }
    (values, argmax)
}

/// 1-D envelope of parabolas `f[k] -/+ s (i - k)^2` (upper envelope of
/// downward parabolas for the sup; lower envelope of upward parabolas for
/// the inf), linear time in the line length.
fn envelope_1d(f: &[f64], s: f64, upper: bool, out: &mut [f64], arg: &mut [usize]) {
    let m = f.len();
    let mut v = vec![0usize; m];
    let mut z = vec![0.0f64; m + 1];
    let sign = if upper { 1.0 } else { -1.0 };
    // work with g[k] = -sign * f[k]: compute the lower envelope of
    // g[k] + s (i - k)^2 and flip back
    let g = |k: usize| -> f64 { -sign * f[k] };
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..m {
        loop {
            let p = v[k];
            // intersection abscissa of parabolas rooted at q and p
            let sx = ((g(q) + s * (q * q) as f64) - (g(p) + s * (p * p) as f64))
                / (2.0 * s * (q as f64 - p as f64));
            if sx <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = sx;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut k = 0usize;
    for i in 0..m {
        while z[k + 1] < i as f64 {
            k += 1;
        }
        let p = v[k];
        let d = i as f64 - p as f64;
        out[i] = -sign * (g(p) + s * d * d);
        arg[i] = p;
    }
}

/// Brute-force O(N^2) reference for the discrete convolutions; exported so
/// the acceptance suite can hold it against the separable transform.
pub fn convolve_brute_force(psi: &GridField, eps: f64, upper: bool) -> Vec<f64> {
    let grid = &psi.grid;
    let total = grid.len();
    let mut out = vec![0.0; total];
    for i in 0..total {
        let xi = grid.coord(&grid.unflat(i));
        let mut best = f64::NEG_INFINITY;
        for j in 0..total {
            let yj = grid.coord(&grid.unflat(j));
            let pen = crate::util::dist2(&xi, &yj) / eps;
            let cand = if upper {
                psi.value_at(j) - pen
            } else {
                -(psi.value_at(j) + pen)
            };
            best = best.max(cand);
        }
        out[i] = if upper { best } else { -best };
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SemiconvexReport {
    /// Smallest finite-difference Hessian eigenvalue over interior nodes.
    pub min_eigenvalue: f64,
    /// Nodes violating `min_eig >= -(bound + stencil_tol)`.
    pub violations: Vec<usize>,
    pub bound: f64,
    pub stencil_tol: f64,
    pub pass: bool,
}

/// Certify `hess psi_hat >= -bound I` in the grid sense: at every interior
/// node the FD Hessian's smallest eigenvalue must be `>= -bound - stencil_tol`.
pub fn certify_semiconvex(
    psi_hat: &GridField,
    bound: f64,
    stencil_tol: f64,
) -> Result<SemiconvexReport> {
    let nodes = psi_hat.grid.interior_nodes(2);
    if nodes.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut min_eig = f64::INFINITY;
    let mut violations = Vec::new();
    for flat in nodes {
        let jet = psi_hat.fd_jet(&psi_hat.grid.unflat(flat))?;
        let spec = symfun::eigen_sym(&jet.hessian, conformal::EIG_TOL)?;
        let e = spec.min();
        min_eig = min_eig.min(e);
        if e < -(bound + stencil_tol) {
            violations.push(flat);
        }
    }
    Ok(SemiconvexReport {
        min_eigenvalue: min_eig,
        pass: violations.is_empty(),
        violations,
        bound,
        stencil_tol,
    })
}

/// Per-node outcome of the C^{1,1} equivalence check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum C11NodeOutcome {
    /// Pointwise and touching-test classifications agree.
    Agree,
    /// Node flagged as a kink suspect (FD Hessian above the C^{1,1} proxy
    /// bound); excluded from the agreement requirement.
    Flagged,
    /// Genuine disagreement between the two tests.
    Disagree,
}

#[derive(Debug, Clone, Serialize)]
pub struct C11Report {
    pub outcomes: Vec<(usize, C11NodeOutcome)>,
    pub agree: usize,
    pub flagged: usize,
    pub disagree: usize,
    pub pass: bool,
}

/// Check that the pointwise a.e. classification and the viscosity-style
/// paraboloid touching test agree on a grid field of psi-values.
///
/// At each node the touching test perturbs the psi-jet Hessian by
/// `-2 delta I` (super side) and `+2 delta I` (sub side) for a decreasing
/// sequence of `delta`, requiring the perturbed verdicts to match the
/// pointwise one in the limit. Nodes whose FD Hessian norm exceeds
/// `hess_bound` are flagged (kink suspects) rather than classified; if more
/// than a quarter of the nodes flag, the field fails its C^{1,1} proxy and
/// `UnboundedHessian` is returned.
pub fn verify_c11_equivalence(
    psi: &GridField,
    spec: &OperatorSpec,
    tol: f64,
    hess_bound: f64,
    deltas: &[f64],
) -> Result<C11Report> {
    let nodes = psi.grid.interior_nodes(2);
    if nodes.is_empty() {
        return Err(Error::EmptyRegion);
    }
    assert!(!deltas.is_empty() && deltas.windows(2).all(|w| w[1] < w[0]));
    let mut outcomes = Vec::with_capacity(nodes.len());
    let (mut agree, mut flagged, mut disagree) = (0usize, 0usize, 0usize);
    for flat in nodes.iter().copied() {
        let jet = psi.fd_jet(&psi.grid.unflat(flat))?;
        if jet.hessian.frobenius() > hess_bound {
            flagged += 1;
            outcomes.push((flat, C11NodeOutcome::Flagged));
            continue;
        }
        let pointwise = verdict_of_psi_jet(&jet, spec, tol)?;
        let touching = touching_verdict(&jet, spec, tol, deltas)?;
        if pointwise == touching {
            agree += 1;
            outcomes.push((flat, C11NodeOutcome::Agree));
        } else {
            disagree += 1;
            outcomes.push((flat, C11NodeOutcome::Disagree));
        }
    }
    let total = outcomes.len();
    if flagged * 4 > total {
        return Err(Error::UnboundedHessian { bound: hess_bound, count: flagged, total });
    }
    Ok(C11Report { outcomes, agree, flagged, disagree, pass: disagree == 0 })
}

/// Coarse verdict used by the equivalence check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SideVerdict {
    Solution,
    Sub,
    Super,
    Neither,
}

fn verdict_of_psi_jet(jet: &Jet2, spec: &OperatorSpec, tol: f64) -> Result<SideVerdict> {
    let (fv, cj) = conformal::evaluate_psi_jet(jet, spec)?;
    Ok(coarse(point_verdict_psi(fv, &cj, spec, tol)))
}

fn point_verdict_psi(
    fv: symfun::FValue,
    cj: &conformal::ConformalJet,
    spec: &OperatorSpec,
    tol: f64,
) -> PointVerdict {
    match fv {
        symfun::FValue::Value(v) => {
            let open = spec.cone.contains(&cj.lambda.eigenvalues);
            if (v - spec.level).abs() <= tol {
                if open {
                    PointVerdict::OnLevel
                } else {
                    PointVerdict::OnConeBoundary
                }
            } else if v >= spec.level + tol {
                if open {
                    PointVerdict::StrictSub { margin: v - spec.level }
                } else {
                    PointVerdict::ConeViolation
                }
            } else if open {
                PointVerdict::StrictSuper { margin: spec.level - v }
            } else {
                PointVerdict::OnConeBoundary
            }
        }
        symfun::FValue::OutsideClosedCone => PointVerdict::OutsideClosedCone,
    }
}

fn coarse(v: PointVerdict) -> SideVerdict {
    match v {
        PointVerdict::OnLevel => SideVerdict::Solution,
        PointVerdict::StrictSub { .. } => SideVerdict::Sub,
        PointVerdict::StrictSuper { .. }
        | PointVerdict::OutsideClosedCone
        | PointVerdict::OnConeBoundary => SideVerdict::Super,
        PointVerdict::ConeViolation => SideVerdict::Neither,
    }
}

/// Touching-test verdict: perturb the Hessian by `+2 delta I` for the sub
/// test and `-2 delta I` for the super test; each side must hold for every
/// delta in the (decreasing) sequence.
fn touching_verdict(
    jet: &Jet2,
    spec: &OperatorSpec,
    tol: f64,
    deltas: &[f64],
) -> Result<SideVerdict> {
    let n = jet.dim();
    let mut sub_ok = true;
    let mut super_ok = true;
    for &delta in deltas {
        let bump = SymMatrix::identity(n).scaled(2.0 * delta);
        let up = Jet2 {
            value: jet.value,
            gradient: jet.gradient.clone(),
            hessian: jet.hessian.plus(&bump),
        };
        let down = Jet2 {
            value: jet.value,
            gradient: jet.gradient.clone(),
            hessian: jet.hessian.add_scaled(&bump, -1.0),
        };
        // sub-solution evidence: jet in the closed cone with f >= level;
        // the +2 delta I bump raises f by O(delta), hence the widened band
        let (fv_up, cj_up) = conformal::evaluate_psi_jet(&up, spec)?;
        let inside = spec
            .cone
            .contains_closure(&cj_up.lambda.eigenvalues, spec.boundary_tol);
        let sub_here = inside
            && matches!(fv_up, symfun::FValue::Value(v) if v >= spec.level - tol - 8.0 * delta);
        // super-solution evidence: jet outside the closed cone or f <= level
        let (fv_down, _) = conformal::evaluate_psi_jet(&down, spec)?;
        let super_here = match fv_down {
            symfun::FValue::OutsideClosedCone => true,
            symfun::FValue::Value(v) => v <= spec.level + tol + 8.0 * delta,
        };
        sub_ok &= sub_here;
        super_ok &= super_here;
    }
    Ok(match (sub_ok, super_ok) {
        (true, true) => SideVerdict::Solution,
        (true, false) => SideVerdict::Sub,
        (false, true) => SideVerdict::Super,
        (false, false) => SideVerdict::Neither,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{AnalyticField, BoundaryPolicy, BubbleParams, GridSpec};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn psi_grid_from(f: impl Fn(&[f64]) -> f64, grid: GridSpec) -> GridField {
        let values: Vec<f64> = (0..grid.len())
            .map(|flat| f(&grid.coord(&grid.unflat(flat))))
            .collect();
        GridField::scalar(grid, values, BoundaryPolicy::Reject).unwrap()
    }

    #[test]
    fn constant_is_fixed_point() {
        let grid = GridSpec::centered_cube(&[0.0, 0.0], 1.0, 9).unwrap();
        let psi = psi_grid_from(|_| 0.7, grid);
        let r = sup_convolve(&psi, 0.3);
        for (i, v) in r.regularized.values().iter().enumerate() {
            assert_eq!(*v, 0.7);
            assert_eq!(r.argmax_map[i], i, "maximizer is the node itself");
        }
        let ri = inf_convolve(&psi, 0.3);
        assert!(ri.regularized.values().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn quadratic_closed_form() {
        // psi = -|y|^2: sup-convolution is -|x|^2/(1+eps) away from the rim
        let eps = 0.05;
        let grid = GridSpec::centered_cube(&[0.0, 0.0], 2.0, 81).unwrap();
        let psi = psi_grid_from(|x| -crate::util::norm2(x), grid.clone());
        let r = sup_convolve(&psi, eps);
        for flat in 0..grid.len() {
            let x = grid.coord(&grid.unflat(flat));
            if crate::util::norm(&x) > 1.0 {
                continue; // the discrete sup cannot reach past the rim
            }
            let want = -crate::util::norm2(&x) / (1.0 + eps);
            let got = r.regularized.value_at(flat);
            assert!(
                (got - want).abs() < 1e-8 + 2e-4 * want.abs(),
                "at {x:?}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn separable_equals_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for dims in [1usize, 2] {
            let grid = match dims {
                1 => GridSpec::new(vec![-1.0], vec![0.11], vec![21]).unwrap(),
                _ => GridSpec::centered_cube(&[0.0, 0.0], 1.0, 21).unwrap(),
            };
            let values: Vec<f64> =
                (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let psi = GridField::scalar(grid, values, BoundaryPolicy::Reject).unwrap();
            for eps in [0.01, 0.3, 10.0] {
                let fast = sup_convolve(&psi, eps);
                let brute = convolve_brute_force(&psi, eps, true);
                for (a, b) in fast.regularized.values().iter().zip(&brute) {
                    assert!((a - b).abs() <= 1e-12, "sup: {a} vs {b} (eps {eps})");
                }
                let fast_inf = inf_convolve(&psi, eps);
                let brute_inf = convolve_brute_force(&psi, eps, false);
                for (a, b) in fast_inf.regularized.values().iter().zip(&brute_inf) {
                    assert!((a - b).abs() <= 1e-12, "inf: {a} vs {b} (eps {eps})");
                }
            }
        }
    }

    #[test]
    fn duality_identity_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let grid = GridSpec::centered_cube(&[0.0, 0.0], 1.0, 15).unwrap();
        let values: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let psi = GridField::scalar(grid.clone(), values.clone(), BoundaryPolicy::Reject)
            .unwrap();
        let neg = GridField::scalar(
            grid,
            values.iter().map(|v| -v).collect(),
            BoundaryPolicy::Reject,
        )
        .unwrap();
        let sup = sup_convolve(&psi, 0.2);
        let inf = inf_convolve(&neg, 0.2);
        for (a, b) in sup.regularized.values().iter().zip(inf.regularized.values()) {
            assert_eq!(*a, -*b, "inf_convolve(-psi) must equal -sup_convolve(psi)");
        }
    }

    #[test]
    fn sandwich_monotonicity_and_certificate() {
        // Lipschitz psi = -|x| (kinked at 0)
        let grid = GridSpec::centered_cube(&[0.0, 0.0], 1.0, 41).unwrap();
        let psi = psi_grid_from(|x| -crate::util::norm(x), grid.clone());
        let (e1, e2) = (0.05, 0.2);
        let r1 = sup_convolve(&psi, e1);
        let r2 = sup_convolve(&psi, e2);
        let sup_psi = psi.max_value();
        for flat in 0..grid.len() {
            let p = psi.value_at(flat);
            let v1 = r1.regularized.value_at(flat);
            let v2 = r2.regularized.value_at(flat);
            // sandwich and monotonicity in eps
            assert!(v1 >= p - 1e-14 && v2 >= v1 - 1e-14 && v2 <= sup_psi + 1e-14);
            // quadratic offset certificate at the recorded maximizer
            let x = grid.coord(&grid.unflat(flat));
            let xs = grid.coord(&grid.unflat(r1.argmax_map[flat]));
            let cert =
                psi.value_at(r1.argmax_map[flat]) - crate::util::dist2(&x, &xs) / e1;
            assert!((v1 - cert).abs() < 1e-12);
            // x* proximity: |x* - x|^2 <= eps (sup psi - inf psi)
            assert!(
                crate::util::dist2(&x, &xs) <= e1 * (sup_psi - psi.min_value()) + 1e-12
            );
        }
        // Lipschitz error bound: ||psi_hat - psi||_inf <= L^2 eps / 4, L = 1
        let worst = r1
            .regularized
            .values()
            .iter()
            .zip(psi.values())
            .map(|(a, b)| a - b)
            .fold(0.0f64, f64::max);
        assert!(worst <= e1 / 4.0 + 1e-12, "sup-convolution gap {worst}");

        // semiconvexity certificate with the bound 2/eps
        let rep = certify_semiconvex(&r1.regularized, 2.0 / e1, 1e-6).unwrap();
        assert!(rep.pass, "min eigenvalue {}", rep.min_eigenvalue);
    }

    #[test]
    fn designed_failure_cone() {
        // psi = -|x| on a grid: the FD min eigenvalue at the kink is about
        // -2/h, far below any h-independent bound
        let grid = GridSpec::centered_cube(&[0.0, 0.0], 1.0, 41).unwrap();
        let h = grid.spacing[0];
        let psi = psi_grid_from(|x| -crate::util::norm(x), grid);
        let rep = certify_semiconvex(&psi, 0.5 / h, 1e-6).unwrap();
        assert!(!rep.pass, "the cone should violate a sub-1/h bound");
        assert!(rep.min_eigenvalue < -1.5 / h);
    }

    #[test]
    fn smooth_field_passes_exact_bound() {
        // psi with hess >= -K I passes with bound K
        let grid = GridSpec::centered_cube(&[0.0, 0.0], 1.0, 21).unwrap();
        let psi = psi_grid_from(|x| -0.5 * (x[0] * x[0] + 2.0 * x[1] * x[1]), grid);
        let rep = certify_semiconvex(&psi, 2.0, 1e-6).unwrap();
        assert!(rep.pass);
        assert!((rep.min_eigenvalue + 2.0).abs() < 1e-9);
    }

    #[test]
    fn c11_agreement_on_bubbles() {
        let n = 3;
        let spec = OperatorSpec::sigma_k_root(1, n);
        let params = BubbleParams::tuned(&spec, 1.0, vec![0.0; n]);
        let grid = GridSpec::centered_cube(&[0.0; 3], 0.5, 17).unwrap();
        let h = grid.spacing[0];
        let tol = 10.0 * h * h;
        for (c, want) in [
            (1.0, SideVerdict::Solution),
            (0.9, SideVerdict::Sub),
            (1.1, SideVerdict::Super),
        ] {
            let f = AnalyticField::scaled(c, AnalyticField::bubble(params.clone()));
            let u = GridField::sample(&f, grid.clone(), BoundaryPolicy::Reject).unwrap();
            let psi = u.log_form().unwrap();
            let rep =
                verify_c11_equivalence(&psi, &spec, tol, 1e4, &[1e-2, 1e-3, 1e-4]).unwrap();
            assert!(rep.pass, "c={c}: {} disagreements", rep.disagree);
            assert_eq!(rep.flagged, 0, "smooth field should not flag nodes");
            let jet = psi.fd_jet(&[8, 8, 8]).unwrap();
            let tv = touching_verdict(&jet, &spec, tol, &[1e-2, 1e-3, 1e-4]).unwrap();
            assert_eq!(tv, want, "c={c}");
        }
    }

    #[test]
    fn c11_kink_field_flags_but_agrees_off_kink() {
        // max of two tuned-bubble psi-forms: Lipschitz with a kink set
        let n = 3;
        let spec = OperatorSpec::sigma_k_root(1, n);
        let p1 = BubbleParams::tuned(&spec, 1.0, vec![0.21, 0.0, 0.0]);
        let p2 = BubbleParams::tuned(&spec, 1.0, vec![-0.21, 0.0, 0.0]);
        let f1 = AnalyticField::bubble(p1);
        let f2 = AnalyticField::bubble(p2);
        let grid = GridSpec::centered_cube(&[0.0; 3], 0.45, 19).unwrap();
        let h = grid.spacing[0];
        let psi_vals: Vec<f64> = (0..grid.len())
            .map(|flat| {
                let x = grid.coord(&grid.unflat(flat));
                (-f1.value(&x).unwrap().ln()).max(-f2.value(&x).unwrap().ln())
            })
            .collect();
        let psi = GridField::scalar(grid.clone(), psi_vals, BoundaryPolicy::Reject).unwrap();
        // kink nodes carry second differences of order osc/h; a bound well
        // below 1/h but above the smooth-field Hessians separates them
        let rep =
            verify_c11_equivalence(&psi, &spec, 10.0 * h * h, 0.2 / h, &[1e-2, 1e-3]).unwrap();
        assert!(rep.flagged > 0, "the crossing plane must flag nodes");
        assert!(
            rep.disagree == 0,
            "off-kink nodes must classify consistently ({} disagree)",
            rep.disagree
        );
        for (flat, oc) in &rep.outcomes {
            if *oc == C11NodeOutcome::Flagged {
                let x = grid.coord(&grid.unflat(*flat));
                assert!(
                    x[0].abs() <= 2.5 * h,
                    "flagged node {x:?} far from the kink plane"
                );
            }
        }
    }
}
