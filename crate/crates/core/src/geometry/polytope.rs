use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lp::{self, GeRow, LpOutcome, Sense};
use super::{GeometryError, ADJACENCY_SV_TOL, DEDUP_TOL, FEAS_TOL, MAX_VERTEX_DIM};

/// Upper cap on the Chebyshev radius LP so unbounded sets still yield a finite answer.
const RADIUS_CAP: f64 = 1e9;

/// Convex set `{x : p_j · x + g_j >= 0 for all j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HPolytope {
    dim: usize,
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

/// Outcome of [`HPolytope::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub bounded: bool,
    pub full_dimensional: bool,
    pub chebyshev_radius: f64,
    pub chebyshev_center: Option<Vec<f64>>,
}

/// A supporting hyperplane `p · x + g = 0`, oriented so that `p · x + g >= 0` on the owner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
    /// Index of the defining half-space in the owner's constraint list.
    pub index: usize,
    /// Vertices of the common face.
    pub points: Vec<Vec<f64>>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl HPolytope {
    pub fn new(normals: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self, GeometryError> {
        if normals.len() != offsets.len() {
            return Err(GeometryError::DimensionMismatch(format!(
                "{} normals but {} offsets",
                normals.len(),
                offsets.len()
            )));
        }
        let dim = normals.first().map(Vec::len).ok_or_else(|| {
            GeometryError::DimensionMismatch("polytope needs at least one half-space".into())
        })?;
        if dim == 0 {
            return Err(GeometryError::DimensionMismatch("zero-dimensional normal".into()));
        }
        if let Some((j, p)) = normals.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(GeometryError::DimensionMismatch(format!(
                "normal {j} has length {} (expected {dim})",
                p.len()
            )));
        }
        let finite = normals.iter().flatten().chain(&offsets).all(|v| v.is_finite());
        if !finite {
            return Err(GeometryError::DimensionMismatch("non-finite coefficient".into()));
        }
        Ok(Self { dim, normals, offsets })
    }

    /// Axis-aligned box `lower <= x <= upper`.
    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Self, GeometryError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(GeometryError::DimensionMismatch("box bounds differ in length".into()));
        }
        let n = lower.len();
        let mut normals = Vec::with_capacity(2 * n);
        let mut offsets = Vec::with_capacity(2 * n);
        for a in 0..n {
            let mut e = vec![0.0; n];
            e[a] = 1.0;
            normals.push(e.clone());
            offsets.push(-lower[a]);
            e[a] = -1.0;
            normals.push(e);
            offsets.push(upper[a]);
        }
        Self::new(normals, offsets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Value of the j-th facet function `h_j(x) = p_j · x + g_j`.
    pub fn h(&self, j: usize, x: &[f64]) -> f64 {
        dot(&self.normals[j], x) + self.offsets[j]
    }

    /// Smallest facet value normalised by `|p_j|`, i.e. signed distance to the nearest facet plane.
    pub fn margin(&self, x: &[f64]) -> f64 {
        (0..self.len())
            .map(|j| self.h(j, x) / norm(&self.normals[j]).max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.margin(x) >= -tol
    }

    pub fn intersect(&self, other: &HPolytope) -> Result<HPolytope, GeometryError> {
        if self.dim != other.dim {
            return Err(GeometryError::DimensionMismatch(format!(
                "intersecting polytopes of dimension {} and {}",
                self.dim, other.dim
            )));
        }
        let mut normals = self.normals.clone();
        normals.extend(other.normals.iter().cloned());
        let mut offsets = self.offsets.clone();
        offsets.extend(other.offsets.iter().copied());
        Ok(HPolytope { dim: self.dim, normals, offsets })
    }

    fn ge_rows(&self) -> Vec<GeRow> {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(p, g)| GeRow { coeffs: p.clone(), rhs: -g })
            .collect()
    }

    /// Range of `x[axis]` over the set; `None` when empty.
    pub fn axis_range(&self, axis: usize) -> Result<Option<(f64, f64)>, GeometryError> {
        let mut c = vec![0.0; self.dim];
        c[axis] = 1.0;
        let free = vec![(f64::NEG_INFINITY, f64::INFINITY); self.dim];
        let rows = self.ge_rows();
        let lo = lp::solve(Sense::Minimize, &c, &free, &rows)?;
        let hi = lp::solve(Sense::Maximize, &c, &free, &rows)?;
        let value = |o: LpOutcome, unbounded: f64| match o {
            LpOutcome::Optimal { value, .. } => Some(value),
            LpOutcome::Unbounded => Some(unbounded),
            LpOutcome::Infeasible => None,
        };
        Ok(match (value(lo, f64::NEG_INFINITY), value(hi, f64::INFINITY)) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        })
    }

    /// Largest ball inside the set (radius capped for unbounded sets). Radius is
    /// negative infinity for an empty set.
    pub fn chebyshev_ball(&self) -> Result<(f64, Option<Vec<f64>>), GeometryError> {
        let n = self.dim;
        let mut objective = vec![0.0; n + 1];
        objective[n] = 1.0;
        let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
        bounds.push((0.0, RADIUS_CAP));
        let rows: Vec<GeRow> = self
            .normals
            .iter()
            .zip(&self.offsets)
            .map(|(p, g)| {
                let mut coeffs = p.clone();
                coeffs.push(-norm(p));
                GeRow { coeffs, rhs: -g }
            })
            .collect();
        match lp::solve(Sense::Maximize, &objective, &bounds, &rows)? {
            LpOutcome::Optimal { value, mut point } => {
                point.truncate(n);
                Ok((value, Some(point)))
            }
            LpOutcome::Infeasible => Ok((f64::NEG_INFINITY, None)),
            LpOutcome::Unbounded => Ok((RADIUS_CAP, None)),
        }
    }

    pub fn is_bounded(&self) -> Result<bool, GeometryError> {
        for axis in 0..self.dim {
            match self.axis_range(axis)? {
                None => return Ok(true),
                Some((lo, hi)) if !lo.is_finite() || !hi.is_finite() => return Ok(false),
                Some(_) => {}
            }
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<ValidationReport, GeometryError> {
        let bounded = self.is_bounded()?;
        let (radius, center) = self.chebyshev_ball()?;
        let radius = radius.max(0.0);
        Ok(ValidationReport {
            bounded,
            full_dimensional: radius > FEAS_TOL,
            chebyshev_radius: radius,
            chebyshev_center: center,
        })
    }

    /// Drops half-spaces implied by the others, keeping the given order.
    pub fn remove_redundant(&self) -> Result<HPolytope, GeometryError> {
        let free = vec![(f64::NEG_INFINITY, f64::INFINITY); self.dim];
        let mut keep: Vec<bool> = vec![true; self.len()];
        for j in 0..self.len() {
            let pj = &self.normals[j];
            let scale = norm(pj);
            if scale == 0.0 {
                // 0·x + g >= 0 is either vacuous or makes the set empty
                if self.offsets[j] >= 0.0 {
                    keep[j] = false;
                }
                continue;
            }
            let mut rows: Vec<GeRow> = (0..self.len())
                .filter(|&k| k != j && keep[k])
                .map(|k| GeRow { coeffs: self.normals[k].clone(), rhs: -self.offsets[k] })
                .collect();
            // relaxed copy of row j keeps the LP bounded in its own direction
            rows.push(GeRow { coeffs: pj.clone(), rhs: -self.offsets[j] - scale });
            if let LpOutcome::Optimal { value, .. } = lp::solve(Sense::Minimize, pj, &free, &rows)? {
                if value + self.offsets[j] >= -FEAS_TOL * scale.max(1.0) {
                    keep[j] = false;
                }
            }
        }
        let normals = self.normals.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| p.clone()).collect();
        let offsets = self.offsets.iter().zip(&keep).filter(|(_, k)| **k).map(|(g, _)| *g).collect();
        Ok(HPolytope { dim: self.dim, normals, offsets })
    }

    /// All vertices, found by intersecting every n-subset of facet planes.
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>, GeometryError> {
        let n = self.dim;
        if n > MAX_VERTEX_DIM {
            return Err(GeometryError::UnsupportedDimension(n));
        }
        let mut out: Vec<Vec<f64>> = Vec::new();
        for subset in (0..self.len()).combinations(n) {
            let m = DMatrix::from_fn(n, n, |r, c| self.normals[subset[r]][c]);
            let svd = m.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if smax == 0.0 || smin <= 1e-12 * smax {
                continue;
            }
            let rhs = DVector::from_iterator(n, subset.iter().map(|&j| -self.offsets[j]));
            let Some(x) = m.lu().solve(&rhs) else { continue };
            let x: Vec<f64> = x.iter().copied().collect();
            let feasible = (0..self.len())
                .all(|j| self.h(j, &x) >= -FEAS_TOL * norm(&self.normals[j]).max(1.0));
            if !feasible {
                continue;
            }
            let dup = out
                .iter()
                .any(|v| v.iter().zip(&x).all(|(a, b)| (a - b).abs() <= DEDUP_TOL));
            if !dup {
                out.push(x);
            }
        }
        Ok(out)
    }

    /// Vertex average: an interior point for a full-dimensional polytope.
    pub fn representative_point(&self) -> Result<Vec<f64>, GeometryError> {
        let vertices = self.vertices()?;
        if vertices.is_empty() {
            return Err(GeometryError::NoVertices);
        }
        Ok(vertex_average(&vertices))
    }

    /// Lebesgue measure, for n <= 3.
    pub fn volume(&self) -> Result<f64, GeometryError> {
        let vertices = self.vertices()?;
        if vertices.len() <= self.dim {
            return Ok(0.0);
        }
        Ok(match self.dim {
            1 => {
                let (lo, hi) = vertices
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v[0]), b.max(v[0])));
                hi - lo
            }
            2 => polygon_area(&vertices),
            3 => {
                let reduced = self.remove_redundant()?;
                let center = vertex_average(&vertices);
                let mut total = 0.0;
                for j in 0..reduced.len() {
                    let p = &reduced.normals[j];
                    let tol = DEDUP_TOL * norm(p).max(1.0);
                    let face: Vec<Vec<f64>> =
                        vertices.iter().filter(|v| reduced.h(j, v).abs() <= tol).cloned().collect();
                    if face.len() < 3 {
                        continue;
                    }
                    let ordered = order_planar_3d(&face, p);
                    let a = &ordered[0];
                    for w in ordered[1..].windows(2) {
                        total += tetra_volume(&center, a, &w[0], &w[1]);
                    }
                }
                total
            }
            n => return Err(GeometryError::UnsupportedDimension(n)),
        })
    }

    /// Common (n-1)-face with `other`, expressed through one of `self`'s half-spaces.
    pub fn shared_facet(&self, other: &HPolytope) -> Result<Option<Hyperplane>, GeometryError> {
        let n = self.dim;
        let inter = self.intersect(other)?;
        let points = inter.vertices()?;
        if points.len() < n {
            return Ok(None);
        }
        if affine_dimension(&points) != n - 1 {
            return Ok(None);
        }
        for j in 0..self.len() {
            let tol = DEDUP_TOL * norm(&self.normals[j]).max(1.0);
            if points.iter().all(|x| self.h(j, x).abs() <= tol) {
                return Ok(Some(Hyperplane {
                    normal: self.normals[j].clone(),
                    offset: self.offsets[j],
                    index: j,
                    points,
                }));
            }
        }
        Ok(None)
    }
}

pub(crate) fn vertex_average(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points[0].len();
    let mut c = vec![0.0; n];
    for p in points {
        for (ci, pi) in c.iter_mut().zip(p) {
            *ci += pi;
        }
    }
    c.iter_mut().for_each(|ci| *ci /= points.len() as f64);
    c
}

/// Affine dimension of a point cloud with singular-value threshold [`ADJACENCY_SV_TOL`].
pub fn affine_dimension(points: &[Vec<f64>]) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let n = points[0].len();
    let c = vertex_average(points);
    let m = DMatrix::from_fn(points.len(), n, |r, k| points[r][k] - c[k]);
    m.svd(false, false)
        .singular_values
        .iter()
        .filter(|s| **s > ADJACENCY_SV_TOL)
        .count()
}

fn polygon_area(vertices: &[Vec<f64>]) -> f64 {
    let c = vertex_average(vertices);
    let mut pts: Vec<&Vec<f64>> = vertices.iter().collect();
    pts.sort_by(|a, b| {
        let ta = (a[1] - c[1]).atan2(a[0] - c[0]);
        let tb = (b[1] - c[1]).atan2(b[0] - c[0]);
        ta.total_cmp(&tb)
    });
    let mut area = 0.0;
    for i in 0..pts.len() {
        let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
        area += a[0] * b[1] - b[0] * a[1];
    }
    area.abs() / 2.0
}

fn order_planar_3d(face: &[Vec<f64>], normal: &[f64]) -> Vec<Vec<f64>> {
    let c = vertex_average(face);
    let nrm = DVector::from_column_slice(normal).normalize();
    let seed = if nrm[0].abs() < 0.9 { DVector::from_vec(vec![1.0, 0.0, 0.0]) } else { DVector::from_vec(vec![0.0, 1.0, 0.0]) };
    let u = nrm.cross(&seed).normalize();
    let v = nrm.cross(&u);
    let mut out = face.to_vec();
    out.sort_by(|a, b| {
        let angle = |p: &Vec<f64>| {
            let d = DVector::from_iterator(3, p.iter().zip(&c).map(|(x, y)| x - y));
            d.dot(&v).atan2(d.dot(&u))
        };
        angle(a).total_cmp(&angle(b))
    });
    out
}

fn tetra_volume(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    let m = DMatrix::from_fn(3, 3, |r, k| [b, c, d][r][k] - a[k]);
    m.determinant().abs() / 6.0
}
