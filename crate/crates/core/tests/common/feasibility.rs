use secureplan_core::abstraction::AffineDynamics;
use secureplan_core::feasibility::{AgentSegment, FeasibilityParams};
use secureplan_core::geometry::{HPolytope, Partition};

pub const MARGIN_TOL: f64 = 1e-6;
pub const CROSSING_TOL: f64 = 1e-5;
pub const ENDPOINT_TOL: f64 = 1e-5;
pub const INPUT_TOL: f64 = 1e-6;

/// Forward Euler written out entry by entry.
pub fn euler(d: &AffineDynamics, x0: &[f64], inputs: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    let n = x0.len();
    let mut out = vec![x0.to_vec()];
    for u in inputs {
        let x = out.last().unwrap();
        let next = (0..n)
            .map(|r| {
                let ax: f64 = (0..n).map(|c| d.a[(r, c)] * x[c]).sum();
                let bu: f64 = (0..u.len()).map(|c| d.b[(r, c)] * u[c]).sum();
                x[r] + dt * (ax + bu + d.offset[r])
            })
            .collect();
        out.push(next);
    }
    out
}

fn h(poly: &HPolytope, j: usize, x: &[f64]) -> f64 {
    poly.normals()[j].iter().zip(x).map(|(p, v)| p * v).sum::<f64>() + poly.offsets()[j]
}

fn min_margin(poly: &HPolytope, x: &[f64]) -> f64 {
    (0..poly.len()).map(|j| h(poly, j, x)).fold(f64::INFINITY, f64::min)
}

/// Worst-case deviations of a replayed segment.
#[derive(Debug, Default, Clone, Copy)]
pub struct SegmentReport {
    /// Smallest facet value over the active half of the horizon.
    pub margin: f64,
    pub crossing: f64,
    pub endpoint: f64,
    pub input: f64,
}

impl SegmentReport {
    pub fn passes(&self) -> bool {
        self.margin >= -MARGIN_TOL && self.crossing <= CROSSING_TOL && self.endpoint <= ENDPOINT_TOL && self.input <= INPUT_TOL
    }
}

/// Replays the inputs of `seg` from the start center and measures it against the
/// regions, the crossing facet, the end center and the input set.
pub fn replay_report(
    d: &AffineDynamics,
    partition: &Partition,
    from: usize,
    to: usize,
    params: &FeasibilityParams,
    seg: &AgentSegment,
) -> SegmentReport {
    let x = euler(d, partition.center(from), &seg.inputs, params.dt());
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let kc = params.crossing;
    let (q, r) = (partition.region(from), partition.region(to));
    let margin = if from == to {
        x.iter().map(|p| min_margin(q, p)).fold(f64::INFINITY, f64::min)
    } else {
        let before = x[..=kc].iter().map(|p| min_margin(q, p));
        let after = x[kc..].iter().map(|p| min_margin(r, p));
        before.chain(after).fold(f64::INFINITY, f64::min)
    };
    let crossing = if from == to {
        0.0
    } else {
        let f = partition.shared_facet(from, to).expect("adjacent regions");
        let c: f64 = f.normal.iter().zip(&x[kc]).map(|(p, v)| p * v).sum::<f64>() + f.offset;
        c.abs()
    };
    let endpoint = dist(&x[0], partition.center(from)).max(dist(&x[params.steps], partition.center(to)));
    let input = seg.inputs.iter().map(|u| (-min_margin(&d.input, u)).max(0.0)).fold(0.0, f64::max);
    SegmentReport { margin, crossing, endpoint, input }
}
