//! Concave envelope of a grid function with contact-set extraction.
//!
//! The envelope value at a node is the pointwise infimum of affine
//! functions dominating the data on the whole grid box, i.e. the height of
//! the upper convex hull of the graph cloud above that node. Each node is
//! resolved by a small linear program over (slope, intercept), solved with
//! Seidel's randomized incremental algorithm in dimension `n + 1 <= 4`.

use crate::error::{Error, Result};
use crate::fields::GridField;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub envelope: GridField,
    /// Flat indices where the data touches its envelope
    /// (`xi >= envelope - contact_tol`).
    pub contact_nodes: Vec<usize>,
    pub contact_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeSummary {
    pub contact_count: usize,
    pub total_nodes: usize,
    pub contact_tol: f64,
    pub max_gap: f64,
}

/// Concave envelope of `xi` over its grid box (`n <= 3`).
///
/// `contact_tol` defaults to `1e-9 * (sup xi - inf xi)` when `None`.
pub fn concave_envelope(xi: &GridField, contact_tol: Option<f64>) -> Result<EnvelopeResult> {
    let n = xi.grid.dim();
    if n > 3 {
        return Err(Error::DimensionTooHigh(n));
    }
    let total = xi.grid.len();
    let osc = xi.max_value() - xi.min_value();
    let tol = contact_tol.unwrap_or_else(|| (1e-9 * osc).max(1e-14));

    // shared constraint matrix: (x_j, 1) . p >= xi_j
    let d = n + 1;
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::with_capacity(total);
    let mut max_abs_coord = 0.0f64;
    for flat in 0..total {
        let mut a = xi.grid.coord(&xi.grid.unflat(flat));
        for c in &a {
            max_abs_coord = max_abs_coord.max(c.abs());
        }
        a.push(1.0);
        cons.push((a, xi.value_at(flat)));
    }
    let h_min = xi
        .grid
        .spacing
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let slope_box = 64.0 * osc / h_min + 1.0;
    let max_abs_val = xi.max_value().abs().max(xi.min_value().abs());
    let int_box = max_abs_val + slope_box * max_abs_coord + 1.0;
    let mut lo = vec![-slope_box; d];
    let mut hi = vec![slope_box; d];
    lo[n] = -int_box;
    hi[n] = int_box;

    let values = crate::util::chunked(total, crate::threads(), |range| {
        let mut out = Vec::with_capacity(range.len());
        for flat in range {
            let mut c = xi.grid.coord(&xi.grid.unflat(flat));
            c.push(1.0);
            let mut order: Vec<usize> = (0..total).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(0x5EED ^ flat as u64);
            order.shuffle(&mut rng);
            let p = seidel(&cons, &order, &c, &lo, &hi)
                .expect("envelope LP is always feasible (flat majorant)");
            out.push(crate::util::dot(&c, &p));
        }
        out
    });
    let envelope_values: Vec<f64> = values.into_iter().flatten().collect();

    let mut contact = Vec::new();
    for flat in 0..total {
        if xi.value_at(flat) >= envelope_values[flat] - tol {
            contact.push(flat);
        }
    }
    Ok(EnvelopeResult {
        envelope: GridField::scalar(xi.grid.clone(), envelope_values, xi.boundary_policy)?,
        contact_nodes: contact,
        contact_tol: tol,
    })
}

impl EnvelopeResult {
    pub fn summary(&self, xi: &GridField) -> EnvelopeSummary {
        let max_gap = self
            .envelope
            .values()
            .iter()
            .zip(xi.values())
            .map(|(e, x)| e - x)
            .fold(0.0f64, f64::max);
        EnvelopeSummary {
            contact_count: self.contact_nodes.len(),
            total_nodes: xi.grid.len(),
            contact_tol: self.contact_tol,
            max_gap,
        }
    }
}

const FEAS_EPS: f64 = 1e-9;

/// Seidel's incremental LP: minimize `c . p` subject to `a_j . p >= b_j`
/// and box bounds. Constraints are visited in the caller's order
/// (pre-shuffled); on violation the problem recurses on the constraint
/// hyperplane with one variable eliminated.
fn seidel(
    cons: &[(Vec<f64>, f64)],
    order: &[usize],
    c: &[f64],
    lo: &[f64],
    hi: &[f64],
) -> Option<Vec<f64>> {
    let d = c.len();
    if d == 1 {
        return seidel_1d(
            &order
                .iter()
                .map(|&j| (cons[j].0[0], cons[j].1))
                .collect::<Vec<_>>(),
            c[0],
            lo[0],
            hi[0],
        );
    }
    // start at the box vertex minimizing c
    let mut p: Vec<f64> = (0..d)
        .map(|i| if c[i] > 0.0 { lo[i] } else { hi[i] })
        .collect();
    for (pos, &j) in order.iter().enumerate() {
        let (a, b) = &cons[j];
        let scale = 1.0 + b.abs() + a.iter().zip(&p).map(|(x, y)| (x * y).abs()).sum::<f64>();
        if crate::util::dot(a, &p) >= b - FEAS_EPS * scale {
            continue;
        }
        // violated: solve on the hyperplane a . p = b
        let k = (0..d)
            .max_by(|&i, &j2| a[i].abs().total_cmp(&a[j2].abs()))
            .unwrap();
        if a[k].abs() < 1e-13 * scale {
            return None; // degenerate all-zero row that cannot be met
        }
        // reduced problem over the remaining coordinates
        let keep: Vec<usize> = (0..d).filter(|&i| i != k).collect();
        let reduce = |av: &[f64], bv: f64| -> (Vec<f64>, f64) {
            let f = av[k] / a[k];
            (
                keep.iter().map(|&l| av[l] - f * a[l]).collect(),
                bv - f * b,
            )
        };
        let mut rcons: Vec<(Vec<f64>, f64)> = Vec::with_capacity(pos + 2);
        // the box bounds of the eliminated variable become two constraints:
        // lo_k <= (b - sum_{l != k} a_l p_l) / a_k <= hi_k, signs per a_k
        if a[k] > 0.0 {
            rcons.push((keep.iter().map(|&l| -a[l]).collect(), a[k] * lo[k] - b));
            rcons.push((keep.iter().map(|&l| a[l]).collect(), b - a[k] * hi[k]));
        } else {
            rcons.push((keep.iter().map(|&l| a[l]).collect(), b - a[k] * lo[k]));
            rcons.push((keep.iter().map(|&l| -a[l]).collect(), a[k] * hi[k] - b));
        }
        for &jj in &order[..pos] {
            rcons.push(reduce(&cons[jj].0, cons[jj].1));
        }
        let rc: Vec<f64> = {
            let f = c[k] / a[k];
            keep.iter().map(|&l| c[l] - f * a[l]).collect()
        };
        let rlo: Vec<f64> = keep.iter().map(|&l| lo[l]).collect();
        let rhi: Vec<f64> = keep.iter().map(|&l| hi[l]).collect();
        let rorder: Vec<usize> = (0..rcons.len()).collect();
        let sub = seidel(&rcons, &rorder, &rc, &rlo, &rhi)?;
        let mut full = vec![0.0; d];
        for (idx, &l) in keep.iter().enumerate() {
            full[l] = sub[idx];
        }
        full[k] = (b - keep
            .iter()
            .enumerate()
            .map(|(idx, &l)| a[l] * sub[idx])
            .sum::<f64>())
            / a[k];
        p = full;
    }
    Some(p)
}

fn seidel_1d(cons: &[(f64, f64)], c: f64, lo: f64, hi: f64) -> Option<Vec<f64>> {
    let mut l = lo;
    let mut h = hi;
    for &(a, b) in cons {
        if a.abs() < 1e-13 * (1.0 + b.abs()) {
            if b > FEAS_EPS * (1.0 + b.abs()) {
                return None;
            }
            continue;
        }
        let bound = b / a;
        if a > 0.0 {
            l = l.max(bound);
        } else {
            h = h.min(bound);
        }
    }
    if l > h + FEAS_EPS * (1.0 + l.abs() + h.abs()) {
        return None;
    }
    Some(vec![if c > 0.0 { l } else { h }])
}
