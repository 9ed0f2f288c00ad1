//! Uniform grids, sampled fields, and second-order centered-difference jets.

use super::{AnalyticField, Jet2};
use crate::error::{Error, Result};
use crate::symfun::SymMatrix;
use crate::util::fmt_g17;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// Behaviour of the finite-difference stencil near the grid boundary.
///
/// `Reject` (the default) refuses nodes closer than two rings to the
/// boundary: silent one-sided stencils would corrupt the order-2
/// convergence checks. `Clip` clamps neighbour indices, `Reflect` mirrors
/// them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    Clip,
    Reflect,
    #[default]
    Reject,
}

/// A uniform axis-aligned grid: `origin + index * spacing` per axis,
/// row-major flattening with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if origin.len() != spacing.len() || origin.len() != shape.len() {
            return Err(Error::BadGrid("origin/spacing/shape lengths differ".into()));
        }
        if origin.is_empty() {
            return Err(Error::BadGrid("zero-dimensional grid".into()));
        }
        if spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::BadGrid("spacing must be positive".into()));
        }
        if shape.iter().any(|&s| s < 5) {
            return Err(Error::BadGrid(
                "need at least 5 nodes per axis for centered stencils".into(),
            ));
        }
        Ok(GridSpec { origin, spacing, shape })
    }

    /// A cube `[center - half, center + half]^n` with `nodes` nodes per axis.
    pub fn centered_cube(center: &[f64], half: f64, nodes: usize) -> Result<Self> {
        let n = center.len();
        let h = 2.0 * half / (nodes - 1) as f64;
        GridSpec::new(
            center.iter().map(|c| c - half).collect(),
            vec![h; n],
            vec![nodes; n],
        )
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (i, &s) in idx.iter().zip(&self.shape) {
            debug_assert!(*i < s);
            f = f * s + i;
        }
        f
    }

    pub fn unflat(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = flat % self.shape[d];
            flat /= self.shape[d];
        }
        idx
    }

    pub fn coord(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(d, &i)| self.origin[d] + i as f64 * self.spacing[d])
            .collect()
    }

    /// Flat indices of nodes at least `ring` nodes away from every face.
    pub fn interior_nodes(&self, ring: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut idx = vec![ring; self.dim()];
        if self.shape.iter().any(|&s| s < 2 * ring + 1) {
            return out;
        }
        loop {
            out.push(self.flat(&idx));
            // odometer increment over the interior box
            let mut d = self.dim();
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                if idx[d] + 1 + ring < self.shape[d] {
                    idx[d] += 1;
                    for later in d + 1..self.dim() {
                        idx[later] = ring;
                    }
                    break;
                }
            }
        }
    }
}

/// A field sampled on a [`GridSpec`]. `positive` records whether the values
/// carry the positivity invariant of a `u`-field; log-form (psi) grids drop
/// it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: GridSpec,
    values: Vec<f64>,
    pub boundary_policy: BoundaryPolicy,
    positive: bool,
}

impl GridField {
    /// A positive `u`-field; every stored value must be `> 0`.
    pub fn positive(grid: GridSpec, values: Vec<f64>, policy: BoundaryPolicy) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::BadGrid(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().copied().find(|v| !(*v > 0.0)) {
            return Err(Error::NonPositiveU(v));
        }
        Ok(GridField { grid, values, boundary_policy: policy, positive: true })
    }

    /// Arbitrary-sign scalar data (e.g. psi values).
    pub fn scalar(grid: GridSpec, values: Vec<f64>, policy: BoundaryPolicy) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::BadGrid(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadGrid("non-finite grid value".into()));
        }
        Ok(GridField { grid, values, boundary_policy: policy, positive: false })
    }

    /// Pointwise evaluation of an analytic field on a grid.
    pub fn sample(field: &AnalyticField, grid: GridSpec, policy: BoundaryPolicy) -> Result<Self> {
        if field.dim() != grid.dim() {
            return Err(Error::DomainMismatch(format!(
                "field dimension {} vs grid dimension {}",
                field.dim(),
                grid.dim()
            )));
        }
        let mut values = Vec::with_capacity(grid.len());
        for flat in 0..grid.len() {
            let x = grid.coord(&grid.unflat(flat));
            values.push(field.value(&x)?);
        }
        GridField::positive(grid, values, policy)
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The log-form grid `psi = -ln u` of a positive field.
    pub fn log_form(&self) -> Result<GridField> {
        if !self.positive {
            return Err(Error::NonPositiveU(self.min_value()));
        }
        GridField::scalar(
            self.grid.clone(),
            self.values.iter().map(|v| -v.ln()).collect(),
            self.boundary_policy,
        )
    }

    /// Map a neighbour index along one axis through the boundary policy.
    fn neighbor(&self, idx: &[usize], axis: usize, step: isize) -> Result<usize> {
        let s = self.grid.shape[axis] as isize;
        let raw = idx[axis] as isize + step;
        let mapped = match self.boundary_policy {
            BoundaryPolicy::Clip => raw.clamp(0, s - 1),
            BoundaryPolicy::Reflect => {
                if raw < 0 {
                    -raw
                } else if raw >= s {
                    2 * (s - 1) - raw
                } else {
                    raw
                }
            }
            BoundaryPolicy::Reject => {
                if raw < 0 || raw >= s {
                    return Err(Error::TooCloseToBoundary(idx.to_vec()));
                }
                raw
            }
        };
        let mut nb = idx.to_vec();
        nb[axis] = mapped as usize;
        Ok(self.grid.flat(&nb))
    }

    fn value_offset(&self, idx: &[usize], steps: &[(usize, isize)]) -> Result<f64> {
        let mut cur = idx.to_vec();
        for &(axis, step) in steps {
            let flat = self.neighbor(&cur, axis, step)?;
            cur = self.grid.unflat(flat);
        }
        Ok(self.values[self.grid.flat(&cur)])
    }

    /// Second-order centered-difference jet at a node: 2-point gradient,
    /// 3-point pure and 4-point cross second differences, symmetric by
    /// construction.
    ///
    /// Under the `Reject` policy the node must be at least 2 nodes from
    /// every face.
    pub fn fd_jet(&self, idx: &[usize]) -> Result<Jet2> {
        let n = self.grid.dim();
        if self.boundary_policy == BoundaryPolicy::Reject {
            for d in 0..n {
                if idx[d] < 2 || idx[d] + 2 >= self.grid.shape[d] {
                    return Err(Error::TooCloseToBoundary(idx.to_vec()));
                }
            }
        }
        let v0 = self.values[self.grid.flat(idx)];
        let mut grad = vec![0.0; n];
        for d in 0..n {
            let vp = self.value_offset(idx, &[(d, 1)])?;
            let vm = self.value_offset(idx, &[(d, -1)])?;
            grad[d] = (vp - vm) / (2.0 * self.grid.spacing[d]);
        }
        let mut hess = SymMatrix::zeros(n);
        for i in 0..n {
            let hi = self.grid.spacing[i];
            let vp = self.value_offset(idx, &[(i, 1)])?;
            let vm = self.value_offset(idx, &[(i, -1)])?;
            hess.set(i, i, (vp - 2.0 * v0 + vm) / (hi * hi));
            for j in i + 1..n {
                let hj = self.grid.spacing[j];
                let vpp = self.value_offset(idx, &[(i, 1), (j, 1)])?;
                let vpm = self.value_offset(idx, &[(i, 1), (j, -1)])?;
                let vmp = self.value_offset(idx, &[(i, -1), (j, 1)])?;
                let vmm = self.value_offset(idx, &[(i, -1), (j, -1)])?;
                hess.set(i, j, (vpp - vpm - vmp + vmm) / (4.0 * hi * hj));
            }
        }
        Ok(Jet2 { value: v0, gradient: grad, hessian: hess })
    }

    /// Multilinear interpolation (used for moving-sphere resampling).
    pub fn interp(&self, x: &[f64]) -> Result<f64> {
        let n = self.grid.dim();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for d in 0..n {
            let t = (x[d] - self.grid.origin[d]) / self.grid.spacing[d];
            if t < -1e-9 || t > (self.grid.shape[d] - 1) as f64 + 1e-9 {
                return Err(Error::OutOfDomain(format!(
                    "point {x:?} outside grid box on axis {d}"
                )));
            }
            let i = (t.floor() as usize).min(self.grid.shape[d] - 2);
            base[d] = i;
            frac[d] = (t - i as f64).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base.clone();
            for d in 0..n {
                if corner >> d & 1 == 1 {
                    idx[d] += 1;
                    w *= frac[d];
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            acc += w * self.values[self.grid.flat(&idx)];
        }
        Ok(acc)
    }

    /// Write the field as a JSON header plus a CSV table
    /// (`flat_index, x_0.., value`) with 17-significant-digit floats.
    pub fn save(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        let header = GridHeader {
            dimension: self.grid.dim(),
            origin: self.grid.origin.clone(),
            spacing: self.grid.spacing.clone(),
            extents: self.grid.shape.clone(),
            positivity_floor: if self.positive { Some(self.min_value()) } else { None },
            boundary_policy: self.boundary_policy,
        };
        let mut jf = std::fs::File::create(json_path)?;
        serde_json::to_writer_pretty(&mut jf, &header)?;
        jf.write_all(b"\n")?;
        let mut cf = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
        write!(cf, "index")?;
        for d in 0..self.grid.dim() {
            write!(cf, ",x{d}")?;
        }
        writeln!(cf, ",value")?;
        for flat in 0..self.grid.len() {
            let coord = self.grid.coord(&self.grid.unflat(flat));
            write!(cf, "{flat}")?;
            for c in coord {
                write!(cf, ",{}", fmt_g17(c))?;
            }
            writeln!(cf, ",{}", fmt_g17(self.values[flat]))?;
        }
        Ok(())
    }

    pub fn load(json_path: &Path, csv_path: &Path) -> Result<GridField> {
        let header: GridHeader =
            serde_json::from_reader(std::fs::File::open(json_path)?)?;
        let grid = GridSpec::new(header.origin, header.spacing, header.extents)?;
        let file = std::io::BufReader::new(std::fs::File::open(csv_path)?);
        let mut values = vec![f64::NAN; grid.len()];
        let mut seen = 0usize;
        for (lineno, line) in file.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                continue; // header row
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let idx: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::BadGridFile(format!("line {}: bad index", lineno + 1)))?;
            let val_str = parts
                .nth(grid.dim())
                .ok_or_else(|| Error::BadGridFile(format!("line {}: too few columns", lineno + 1)))?;
            let value: f64 = val_str
                .parse()
                .map_err(|_| Error::BadGridFile(format!("line {}: bad value", lineno + 1)))?;
            if idx >= values.len() {
                return Err(Error::BadGridFile(format!(
                    "line {}: index {idx} out of range",
                    lineno + 1
                )));
            }
            values[idx] = value;
            seen += 1;
        }
        if seen != grid.len() {
            return Err(Error::BadGridFile(format!(
                "expected {} rows, found {seen}",
                grid.len()
            )));
        }
        if header.positivity_floor.is_some() {
            GridField::positive(grid, values, header.boundary_policy)
        } else {
            GridField::scalar(grid, values, header.boundary_policy)
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridHeader {
    dimension: usize,
    origin: Vec<f64>,
    spacing: Vec<f64>,
    extents: Vec<usize>,
    positivity_floor: Option<f64>,
    boundary_policy: BoundaryPolicy,
}
