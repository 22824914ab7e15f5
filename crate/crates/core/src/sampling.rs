//! Deterministic point sets: Halton sequences and the dense samplers used
//! to check displacement.

use crate::region::{AxisBox, Region};

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`, in [0, 1).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Multi-dimensional Halton sequence with the first `dim` primes as bases.
///
/// `skip` offsets the start index; the harness derives it from the scenario
/// seed so different seeds see different (but reproducible) point sets.
#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, skip: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton supports up to {} dimensions", PRIMES.len());
        Halton { dim, index: skip + 1 }
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let i = self.index;
        self.index += 1;
        Some((0..self.dim).map(|d| radical_inverse(i, PRIMES[d])).collect())
    }
}

/// Settings of the dense displacement sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    /// Points on the region boundary.
    pub boundary: usize,
    /// Lattice nodes per axis over the bounding box (interior nodes kept).
    pub lattice_per_axis: usize,
    /// Low-discrepancy interior points.
    pub halton: usize,
    pub halton_skip: u64,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            boundary: 256,
            lattice_per_axis: 21,
            halton: 1000,
            halton_skip: 0,
        }
    }
}

impl SamplerSpec {
    /// A lighter sampler for higher-dimensional regions.
    pub fn coarse() -> Self {
        SamplerSpec {
            boundary: 256,
            lattice_per_axis: 7,
            halton: 400,
            halton_skip: 0,
        }
    }
}

/// Deterministic sample of a region together with its resolution (the
/// lattice spacing, which is the largest gap a displacement verdict may miss).
#[derive(Debug, Clone)]
pub struct RegionSample {
    pub points: Vec<Vec<f64>>,
    pub resolution: f64,
}

pub fn sample_region(region: &Region, spec: &SamplerSpec) -> RegionSample {
    if region.is_empty() {
        return RegionSample {
            points: Vec::new(),
            resolution: 0.0,
        };
    }
    let bbox = region.bounding_box();
    let n = bbox.dim();
    let mut points = boundary_points(region, spec.boundary);

    let m = spec.lattice_per_axis.max(2);
    let widths = bbox.widths();
    let resolution = widths.iter().cloned().fold(0.0, f64::max) / (m - 1) as f64;
    let total = m.pow(n as u32);
    for k in 0..total {
        let mut rem = k;
        let p: Vec<f64> = (0..n)
            .map(|d| {
                let i = rem % m;
                rem /= m;
                bbox.lo[d] + widths[d] * i as f64 / (m - 1) as f64
            })
            .collect();
        if region.contains(&p) {
            points.push(p);
        }
    }

    let mut kept = 0;
    for u in Halton::new(n, spec.halton_skip) {
        if kept >= spec.halton {
            break;
        }
        let p: Vec<f64> = (0..n).map(|d| bbox.lo[d] + widths[d] * u[d]).collect();
        if region.contains(&p) {
            points.push(p);
            kept += 1;
        }
    }
    RegionSample { points, resolution }
}

fn boundary_points(region: &Region, count: usize) -> Vec<Vec<f64>> {
    match region {
        Region::Ball(b) => {
            let n = b.center.len();
            if n == 2 {
                return (0..count)
                    .map(|k| {
                        let a = std::f64::consts::TAU * k as f64 / count as f64;
                        vec![b.center[0] + b.radius * a.cos(), b.center[1] + b.radius * a.sin()]
                    })
                    .collect();
            }
            // axis poles first, then Halton directions projected to the sphere
            let mut out = Vec::with_capacity(count + 2 * n);
            for d in 0..n {
                for s in [-1.0, 1.0] {
                    let mut p = b.center.clone();
                    p[d] += s * b.radius;
                    out.push(p);
                }
            }
            for u in Halton::new(n, 0) {
                if out.len() >= count + 2 * n {
                    break;
                }
                let v: Vec<f64> = u.iter().map(|x| 2.0 * x - 1.0).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 1e-3 || norm > 1.0 {
                    continue;
                }
                out.push(b.center.iter().zip(&v).map(|(c, x)| c + b.radius * x / norm).collect());
            }
            out
        }
        Region::Box(bx) => box_boundary(bx, count),
    }
}

fn box_boundary(bx: &AxisBox, count: usize) -> Vec<Vec<f64>> {
    let n = bx.dim();
    let mut out = bx.corners();
    let per_face = (count / (2 * n).max(1)).max(1);
    for d in 0..n {
        for side in [bx.lo[d], bx.hi[d]] {
            for u in Halton::new(n, 0).take(per_face) {
                let mut p: Vec<f64> = (0..n).map(|k| bx.lo[k] + (bx.hi[k] - bx.lo[k]) * u[k]).collect();
                p[d] = side;
                out.push(p);
            }
        }
    }
    out
}
