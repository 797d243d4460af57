use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::polytope::{norm, HPolytope};
use super::{GeometryError, DEDUP_TOL, FEAS_TOL, MAX_VERTEX_DIM};

/// Relative tolerance of the volume-coverage check.
pub const VOLUME_REL_TOL: f64 = 1e-6;
/// Two regions overlap when their intersection holds a ball larger than this.
const OVERLAP_RADIUS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub name: String,
    pub poly: HPolytope,
}

/// Common facet of two adjacent regions. `normal`/`offset` are the owner's half-space,
/// so `normal · x + offset` is zero on the facet and positive inside the owner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub owner: usize,
    pub neighbor: Option<usize>,
    /// Index of the half-space in the owner's (reduced) constraint list.
    pub owner_index: usize,
    pub points: Vec<Vec<f64>>,
}

impl Facet {
    pub fn midpoint(&self) -> Vec<f64> {
        super::polytope::vertex_average(&self.points)
    }

    pub fn h(&self, x: &[f64]) -> f64 {
        super::polytope::dot(&self.normal, x) + self.offset
    }
}

/// An axis-aligned cut `x[axis] = value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisCut {
    pub axis: usize,
    pub value: f64,
}

/// Validated partition of a bounded workspace into convex regions.
#[derive(Debug, Clone, Serialize)]
pub struct Partition {
    workspace: HPolytope,
    regions: Vec<Region>,
    centers: Vec<Vec<f64>>,
    #[serde(skip)]
    facets: BTreeMap<(usize, usize), Facet>,
}

impl Partition {
    pub fn new(workspace: HPolytope, regions: Vec<(String, HPolytope)>) -> Result<Self, GeometryError> {
        let n = workspace.dim();
        if n > MAX_VERTEX_DIM {
            return Err(GeometryError::UnsupportedDimension(n));
        }
        let report = workspace.validate()?;
        if !report.bounded {
            return Err(GeometryError::Unbounded);
        }
        if !report.full_dimensional {
            return Err(GeometryError::Degenerate(report.chebyshev_radius));
        }
        let workspace = workspace.remove_redundant()?;
        if regions.is_empty() {
            return Err(GeometryError::InvalidPartition("no regions".into()));
        }

        let mut seen = BTreeSet::new();
        let mut reduced = Vec::with_capacity(regions.len());
        for (name, poly) in regions {
            if !seen.insert(name.clone()) {
                return Err(GeometryError::InvalidPartition(format!("duplicate region name {name}")));
            }
            if poly.dim() != n {
                return Err(GeometryError::DimensionMismatch(format!(
                    "region {name} has dimension {} but workspace has {n}",
                    poly.dim()
                )));
            }
            let r = poly.validate()?;
            if !r.bounded {
                return Err(GeometryError::InvalidPartition(format!("region {name} is unbounded")));
            }
            if !r.full_dimensional {
                return Err(GeometryError::InvalidPartition(format!(
                    "region {name} is not full-dimensional (radius {:e})",
                    r.chebyshev_radius
                )));
            }
            reduced.push(Region { name, poly: poly.remove_redundant()? });
        }

        for region in &reduced {
            for v in region.poly.vertices()? {
                if !workspace.contains(&v, DEDUP_TOL) {
                    return Err(GeometryError::InvalidPartition(format!(
                        "region {} leaves the workspace at {v:?}",
                        region.name
                    )));
                }
            }
        }

        for i in 0..reduced.len() {
            for j in i + 1..reduced.len() {
                let inter = reduced[i].poly.intersect(&reduced[j].poly)?;
                let (radius, _) = inter.chebyshev_ball()?;
                if radius > OVERLAP_RADIUS_TOL {
                    return Err(GeometryError::InvalidPartition(format!(
                        "regions {} and {} overlap (inscribed radius {radius:e})",
                        reduced[i].name, reduced[j].name
                    )));
                }
            }
        }

        let total = workspace.volume()?;
        let covered: f64 = reduced.iter().map(|r| r.poly.volume()).sum::<Result<f64, _>>()?;
        if (covered - total).abs() > VOLUME_REL_TOL * total {
            return Err(GeometryError::InvalidPartition(format!(
                "regions cover volume {covered} of workspace volume {total}"
            )));
        }

        let centers = reduced.iter().map(|r| r.poly.representative_point()).collect::<Result<Vec<_>, _>>()?;

        let mut facets = BTreeMap::new();
        for i in 0..reduced.len() {
            for j in 0..reduced.len() {
                if i == j {
                    continue;
                }
                if let Some(hp) = reduced[i].poly.shared_facet(&reduced[j].poly)? {
                    facets.insert(
                        (i, j),
                        Facet {
                            normal: hp.normal,
                            offset: hp.offset,
                            owner: i,
                            neighbor: Some(j),
                            owner_index: hp.index,
                            points: hp.points,
                        },
                    );
                }
            }
        }

        Ok(Self { workspace, regions: reduced, centers, facets })
    }

    /// Cells of the arrangement of axis-aligned `cuts` inside `workspace`, named `q1..qk`
    /// in lexicographic cell order (axis 0 outermost).
    pub fn axis_split(workspace: &HPolytope, cuts: &[AxisCut]) -> Result<Self, GeometryError> {
        let n = workspace.dim();
        let mut per_axis: Vec<Vec<f64>> = vec![Vec::new(); n];
        for cut in cuts {
            if cut.axis >= n {
                return Err(GeometryError::DimensionMismatch(format!(
                    "cut axis {} in dimension {n}",
                    cut.axis
                )));
            }
            let inside = match workspace.axis_range(cut.axis)? {
                Some((lo, hi)) => cut.value > lo + FEAS_TOL && cut.value < hi - FEAS_TOL,
                None => false,
            };
            if !inside {
                return Err(GeometryError::CutOutside { axis: cut.axis, value: cut.value });
            }
            per_axis[cut.axis].push(cut.value);
        }
        let intervals: Vec<Vec<(Option<f64>, Option<f64>)>> = per_axis
            .into_iter()
            .map(|mut vals| {
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                let mut bounds = vec![None];
                bounds.extend(vals.into_iter().map(Some));
                bounds.push(None);
                bounds.windows(2).map(|w| (w[0], w[1])).collect()
            })
            .collect();

        let mut cells = Vec::new();
        let mut index = vec![0usize; n];
        'outer: loop {
            let mut normals = workspace.normals().to_vec();
            let mut offsets = workspace.offsets().to_vec();
            for (axis, &k) in index.iter().enumerate() {
                let (lo, hi) = intervals[axis][k];
                let mut e = vec![0.0; n];
                if let Some(lo) = lo {
                    e[axis] = 1.0;
                    normals.push(e.clone());
                    offsets.push(-lo);
                }
                if let Some(hi) = hi {
                    e[axis] = -1.0;
                    normals.push(e);
                    offsets.push(hi);
                }
            }
            let cell = HPolytope::new(normals, offsets)?;
            let (radius, _) = cell.chebyshev_ball()?;
            if radius > FEAS_TOL {
                cells.push(cell.remove_redundant()?);
            }
            for axis in (0..n).rev() {
                index[axis] += 1;
                if index[axis] < intervals[axis].len() {
                    continue 'outer;
                }
                index[axis] = 0;
            }
            break;
        }
        let named = cells.into_iter().enumerate().map(|(k, c)| (format!("q{}", k + 1), c)).collect();
        Self::new(workspace.clone(), named)
    }

    pub fn dim(&self) -> usize {
        self.workspace.dim()
    }

    pub fn workspace(&self) -> &HPolytope {
        &self.workspace
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn region(&self, i: usize) -> &HPolytope {
        &self.regions[i].poly
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.name == name)
    }

    pub fn name(&self, i: usize) -> &str {
        &self.regions[i].name
    }

    /// Representative point of region `i` (vertex average).
    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i]
    }

    pub fn shared_facet(&self, from: usize, to: usize) -> Option<&Facet> {
        self.facets.get(&(from, to))
    }

    /// Ordered adjacent pairs `(i, j)`, both orientations included.
    pub fn adjacent_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.facets.keys().copied()
    }

    /// Region containing `x` with the largest normalised margin, if any is within `tol`.
    pub fn locate(&self, x: &[f64], tol: f64) -> Option<usize> {
        let (best, margin) = self
            .regions
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.poly.margin(x)))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        (margin >= -tol).then_some(best)
    }

    /// Regions whose closure contains `x` within `tol`.
    pub fn containing(&self, x: &[f64], tol: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.regions[i].poly.margin(x) >= -tol).collect()
    }

    /// Removes the adjacency between two regions in both directions. Used to model a
    /// blocked facet.
    pub fn block_facet(&mut self, a: usize, b: usize) {
        self.facets.remove(&(a, b));
        self.facets.remove(&(b, a));
    }
}

/// Normalised distance from `x` to facet plane `j` of `poly`.
pub fn facet_distance(poly: &HPolytope, j: usize, x: &[f64]) -> f64 {
    poly.h(j, x) / norm(&poly.normals()[j])
}
