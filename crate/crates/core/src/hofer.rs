//! Oscillation norms, isotopy lengths, displacement-energy bounds and the
//! capacity side of the energy–capacity inequality.
//!
//! Every "energy" produced here is an upper bound realized by an explicit
//! witness from a parametric family; it is never the infimum itself.

use std::sync::Arc;

use crate::cutoff::Plateau;
use crate::error::{check_dim, Error, Result};
use crate::expr::Expr;
use crate::flows::Isotopy;
use crate::hamiltonian::{restrict_to_leaf, FamilyHamiltonian, Hamiltonian, SharedHamiltonian};
use crate::ode::IntegratorSpec;
use crate::optimize::NelderMead;
use crate::parallel;
use crate::poisson::{LeafChart, PoissonStructure};
use crate::region::{AxisBox, Region};
use crate::sampling::{sample_region, RegionSample, SamplerSpec};

/// Nodes of the composite Simpson rule used for one-dimensional time profiles.
pub const PROFILE_NODES: usize = 4097;

/// Largest number of spatial grid nodes before the per-axis resolution is reduced.
const GRID_POINT_CAP: usize = 100_000;

/// Spatial grid and time quadrature for oscillations and lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationGrid {
    /// Intervals per axis (nodes per axis = resolution + 1).
    pub resolution: usize,
    /// Composite Simpson nodes on `[0, 1]`; odd.
    pub time_nodes: usize,
    /// Polish the grid argmax/argmin with a local Nelder–Mead search.
    pub refine: bool,
}

impl Default for OscillationGrid {
    fn default() -> Self {
        OscillationGrid {
            resolution: 32,
            time_nodes: 65,
            refine: true,
        }
    }
}

impl OscillationGrid {
    pub fn new(resolution: usize, time_nodes: usize) -> Result<Self> {
        let g = OscillationGrid {
            resolution,
            time_nodes,
            refine: true,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 16 {
            return Err(Error::Contract(format!(
                "grid resolution must be at least 16 per axis, got {}",
                self.resolution
            )));
        }
        if self.time_nodes < 33 || self.time_nodes % 2 == 0 {
            return Err(Error::Contract(format!(
                "time quadrature needs an odd node count of at least 33, got {}",
                self.time_nodes
            )));
        }
        Ok(())
    }

    /// Resolution actually used in dimension `dim`: the requested one, reduced
    /// (never below 16) until the grid has at most 100 000 nodes.
    pub fn resolution_for(&self, dim: usize) -> usize {
        let mut r = self.resolution;
        while r > 16 && (r + 1).checked_pow(dim as u32).is_none_or(|c| c > GRID_POINT_CAP) {
            r -= 1;
        }
        r
    }

    pub fn time_points(&self) -> Vec<f64> {
        let m = self.time_nodes - 1;
        (0..=m).map(|k| k as f64 / m as f64).collect()
    }

    /// Tensor grid over `support`, first axis fastest.
    pub fn points(&self, support: &AxisBox) -> Vec<Vec<f64>> {
        let n = support.dim();
        let r = self.resolution_for(n);
        let m = r + 1;
        let widths = support.widths();
        let total = m.pow(n as u32);
        (0..total)
            .map(|k| {
                let mut rem = k;
                (0..n)
                    .map(|d| {
                        let i = rem % m;
                        rem /= m;
                        support.lo[d] + widths[d] * i as f64 / r as f64
                    })
                    .collect()
            })
            .collect()
    }
}

/// Composite Simpson rule over equally spaced samples of `[a, b]`.
pub fn simpson(values: &[f64], a: f64, b: f64) -> f64 {
    let m = values.len();
    assert!(m >= 3 && m % 2 == 1, "Simpson needs an odd number of nodes");
    let h = (b - a) / (m - 1) as f64;
    let mut s = values[0] + values[m - 1];
    for (k, v) in values.iter().enumerate().take(m - 1).skip(1) {
        s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// `max F − min F` over a grid, where both extremes include the value 0 that a
/// compactly supported function takes far away.
#[derive(Debug, Clone, PartialEq)]
pub struct Oscillation {
    pub max: f64,
    pub min: f64,
    pub argmax: Option<Vec<f64>>,
    pub argmin: Option<Vec<f64>>,
}

impl Oscillation {
    pub fn value(&self) -> f64 {
        self.max - self.min
    }
}

fn reduce_extremes(points: &[Vec<f64>], values: &[f64]) -> Result<Oscillation> {
    let mut out = Oscillation {
        max: 0.0,
        min: 0.0,
        argmax: None,
        argmin: None,
    };
    let (mut imax, mut imin) = (None, None);
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NumericDomain(format!(
                "non-finite Hamiltonian value {v} at {:?}",
                points[i]
            )));
        }
        if *v > out.max {
            out.max = *v;
            imax = Some(i);
        }
        if *v < out.min {
            out.min = *v;
            imin = Some(i);
        }
    }
    out.argmax = imax.map(|i| points[i].clone());
    out.argmin = imin.map(|i| points[i].clone());
    Ok(out)
}

fn polish(f: &(dyn Fn(&[f64]) -> f64 + Sync), support: &AxisBox, osc: &mut Oscillation, res: usize) {
    if support.widths().iter().any(|w| *w == 0.0) {
        return;
    }
    let nm = NelderMead {
        max_evals: 2000,
        initial_step: 1.0 / res as f64,
        ftol: 1e-15,
        xtol: 1e-12,
    };
    if let Some(x0) = osc.argmax.clone() {
        let m = nm.minimize(&|x| -f(x), &x0, support);
        if -m.value > osc.max {
            osc.max = -m.value;
            osc.argmax = Some(m.x);
        }
    }
    if let Some(x0) = osc.argmin.clone() {
        let m = nm.minimize(f, &x0, support);
        if m.value < osc.min {
            osc.min = m.value;
            osc.argmin = Some(m.x);
        }
    }
}

/// Oscillation of a spatial function whose support lies in `support`.
pub fn oscillation(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    support: &AxisBox,
    grid: &OscillationGrid,
) -> Result<Oscillation> {
    let points = grid.points(support);
    let values = parallel::map_slice(&points, |x| f(x));
    let mut osc = reduce_extremes(&points, &values)?;
    if grid.refine {
        polish(f, support, &mut osc, grid.resolution_for(support.dim()));
    }
    Ok(osc)
}

/// Length `∫₀¹ ‖F_t‖ dt` with the oscillation curve it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthReport {
    pub value: f64,
    pub times: Vec<f64>,
    pub oscillations: Vec<f64>,
}

fn compact_support(f: &dyn Hamiltonian) -> Result<&AxisBox> {
    f.support().ok_or_else(|| {
        Error::Contract(format!(
            "oscillation grids need a compactly supported Hamiltonian; {} is not",
            f.describe()
        ))
    })
}

/// Hofer length of the isotopy generated by `f`.
///
/// A separable `g(t)·S(x)` has `‖F_t‖ = |g(t)|·‖S‖` exactly, so `S` is
/// gridded once and `∫|g|` is integrated on a fine Simpson rule. Otherwise
/// every grid point is evaluated at all time nodes.
pub fn length(f: &dyn Hamiltonian, grid: &OscillationGrid) -> Result<LengthReport> {
    grid.validate()?;
    let support = compact_support(f)?;
    let times = grid.time_points();
    if let Some(sep) = f.separation() {
        let spatial = &sep.spatial;
        let osc = oscillation(&|x| spatial(x), support, grid)?.value();
        let fine: Vec<f64> = (0..PROFILE_NODES)
            .map(|k| (sep.profile)(k as f64 / (PROFILE_NODES - 1) as f64).abs())
            .collect();
        if fine.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("non-finite time profile".into()));
        }
        let oscillations = times.iter().map(|t| (sep.profile)(*t).abs() * osc).collect();
        return Ok(LengthReport {
            value: osc * simpson(&fine, 0.0, 1.0),
            times,
            oscillations,
        });
    }
    if f.is_autonomous() {
        let osc = oscillation(&|x| f.value(0.0, x), support, grid)?.value();
        return Ok(LengthReport {
            value: osc,
            oscillations: vec![osc; times.len()],
            times,
        });
    }
    let oscillations = oscillation_curve(f, support, &times, grid)?;
    Ok(LengthReport {
        value: simpson(&oscillations, 0.0, 1.0),
        times,
        oscillations,
    })
}

fn oscillation_curve(
    f: &dyn Hamiltonian,
    support: &AxisBox,
    times: &[f64],
    grid: &OscillationGrid,
) -> Result<Vec<f64>> {
    let points = grid.points(support);
    let series: Vec<Vec<f64>> = parallel::map_slice(&points, |x| {
        let mut out = vec![0.0; times.len()];
        f.values_at_times(x, times, &mut out);
        out
    });
    let res = grid.resolution_for(support.dim());
    let per_time: Vec<Result<f64>> = parallel::map_indices(times.len(), |k| {
        let column: Vec<f64> = series.iter().map(|s| s[k]).collect();
        let mut osc = reduce_extremes(&points, &column)?;
        if grid.refine {
            let t = times[k];
            polish(&|x| f.value(t, x), support, &mut osc, res);
        }
        Ok(osc.value())
    });
    per_time.into_iter().collect()
}

/// Outcome of a sampled displacement test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    NotDisplaced,
    /// Every sampled image is at least one sampling resolution away from U.
    Displaced,
    /// All images lie outside U, but some by less than the sampling resolution.
    DisplacedUnverified,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::NotDisplaced => "not displaced",
            Verdict::Displaced => "displaced",
            Verdict::DisplacedUnverified => "displaced (unverified margin)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Displacement {
    pub verdict: Verdict,
    /// Minimal signed distance from the sampled images to U.
    pub margin: f64,
    pub resolution: f64,
    pub samples: usize,
}

impl Displacement {
    pub fn displaced(&self) -> bool {
        self.verdict != Verdict::NotDisplaced
    }

    pub fn verified(&self) -> bool {
        self.verdict == Verdict::Displaced
    }
}

pub type PointMap<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync + 'a;

/// Whether `map(U) ∩ U = ∅` on a dense deterministic sample of `U`.
pub fn check_displaced(map: &PointMap<'_>, region: &Region, sampler: &SamplerSpec) -> Result<Displacement> {
    let sample = sample_region(region, sampler);
    displacement_on_sample(map, region, &sample)
}

pub fn displacement_on_sample(map: &PointMap<'_>, region: &Region, sample: &RegionSample) -> Result<Displacement> {
    if region.is_empty() {
        return Ok(Displacement {
            verdict: Verdict::Displaced,
            margin: f64::INFINITY,
            resolution: 0.0,
            samples: 0,
        });
    }
    let distances = parallel::try_map_slice(&sample.points, |p| map(p).map(|y| region.signed_distance(&y)))?;
    let margin = distances.iter().cloned().fold(f64::INFINITY, f64::min);
    let verdict = if !(margin > 0.0) {
        Verdict::NotDisplaced
    } else if margin >= sample.resolution {
        Verdict::Displaced
    } else {
        Verdict::DisplacedUnverified
    };
    Ok(Displacement {
        verdict,
        margin,
        resolution: sample.resolution,
        samples: sample.points.len(),
    })
}

// Sequential scan that stops at the first image closer than the resolution.
fn verified_quick(map: &PointMap<'_>, region: &Region, sample: &RegionSample) -> bool {
    sample.points.iter().all(|p| match map(p) {
        Ok(y) => region.signed_distance(&y) >= sample.resolution,
        Err(_) => false,
    })
}

/// Parametric Hamiltonian families searched for displacing witnesses.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateFamily {
    /// `v · (x_axis − c_axis) · χ`, params `(v, δ)`: a cutoff of a linear
    /// function whose flow moves U along `♯dx_axis`. The plateau covers U on
    /// `axis` and U's path on every other axis; `δ` is the cutoff margin.
    CutoffShift { axis: usize },
    /// `½ ω |x − c|² · χ` about U's center, params `(ω, δ)`. Never displaces U.
    Rotation,
    /// User expression in `x1..xn` and parameters `p1..pk`, zero outside `support`.
    Custom {
        expr: Expr,
        bounds: AxisBox,
        support: AxisBox,
    },
}

impl CandidateFamily {
    /// Cutoff shifts along the first momentum axis of a symplectic chart, and
    /// along `♯dx₁` otherwise.
    pub fn default_for(structure: &PoissonStructure) -> Self {
        match structure.standard_symplectic() {
            Some(n) => CandidateFamily::CutoffShift { axis: n },
            None => CandidateFamily::CutoffShift { axis: 0 },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CandidateFamily::CutoffShift { .. } => "cutoff-shift",
            CandidateFamily::Rotation => "rotation",
            CandidateFamily::Custom { .. } => "custom",
        }
    }

    pub fn parameter_names(&self) -> Vec<String> {
        match self {
            CandidateFamily::CutoffShift { .. } => vec!["v".into(), "delta".into()],
            CandidateFamily::Rotation => vec!["omega".into(), "delta".into()],
            CandidateFamily::Custom { bounds, .. } => (1..=bounds.dim()).map(|k| format!("p{k}")).collect(),
        }
    }

    pub fn parameter_bounds(&self) -> AxisBox {
        match self {
            CandidateFamily::CutoffShift { .. } => AxisBox {
                lo: vec![0.5, 0.02],
                hi: vec![3.0, 0.5],
            },
            CandidateFamily::Rotation => AxisBox {
                lo: vec![0.5, 0.02],
                hi: vec![std::f64::consts::TAU, 0.5],
            },
            CandidateFamily::Custom { bounds, .. } => bounds.clone(),
        }
    }

    pub fn instantiate(
        &self,
        structure: &PoissonStructure,
        region: &Region,
        params: &[f64],
    ) -> Result<SharedHamiltonian> {
        let n = structure.dim();
        check_dim(n, region.dim())?;
        let bbox = region.bounding_box();
        let h = match self {
            CandidateFamily::CutoffShift { axis } => {
                let (v, delta) = (params[0], params[1]);
                if *axis >= n {
                    return Err(Error::Contract(format!("shift axis {axis} out of range")));
                }
                // the flow moves at most v·L, L = sup |♯dx_axis| over U's box
                let mut row = vec![0.0; n * n];
                let mut reach: f64 = 0.0;
                for c in bbox.corners() {
                    structure.bivector_into(&c, &mut row);
                    let speed = (0..n).map(|j| row[axis * n + j].powi(2)).sum::<f64>().sqrt();
                    reach = reach.max(speed);
                }
                let mut inner = bbox.clone();
                for j in (0..n).filter(|j| j != axis) {
                    inner.lo[j] -= v * reach;
                    inner.hi[j] += v * reach;
                }
                let center = bbox.center()[*axis];
                FamilyHamiltonian::coordinate(n, *axis, v, center, Plateau::new(inner, delta))?
            }
            CandidateFamily::Rotation => {
                let (omega, delta) = (params[0], params[1]);
                FamilyHamiltonian::rotation(region.center(), omega, Plateau::new(bbox, delta))?
            }
            CandidateFamily::Custom { expr, support, .. } => {
                FamilyHamiltonian::custom(n, expr.clone(), params.to_vec(), Some(support.clone()))?
            }
        };
        Ok(h.for_structure(structure.label()).into_shared())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBudget {
    pub coarse_per_axis: usize,
    pub starts: usize,
    pub evals_per_start: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            coarse_per_axis: 5,
            starts: 8,
            evals_per_start: 500,
        }
    }
}

/// A region, a candidate family and the numerical settings of the search.
#[derive(Debug, Clone)]
pub struct DisplacementExperiment {
    pub structure: Arc<PoissonStructure>,
    pub region: Region,
    pub family: CandidateFamily,
    pub budget: SearchBudget,
    pub sampler: SamplerSpec,
    pub grid: OscillationGrid,
    pub integrator: IntegratorSpec,
}

impl DisplacementExperiment {
    pub fn new(structure: Arc<PoissonStructure>, region: Region) -> Result<Self> {
        check_dim(structure.dim(), region.dim())?;
        let sampler = if region.dim() > 3 {
            SamplerSpec::coarse()
        } else {
            SamplerSpec::default()
        };
        Ok(DisplacementExperiment {
            family: CandidateFamily::default_for(&structure),
            structure,
            region,
            budget: SearchBudget::default(),
            sampler,
            grid: OscillationGrid::default(),
            integrator: IntegratorSpec::default(),
        })
    }

    pub fn with_family(mut self, family: CandidateFamily) -> Self {
        self.family = family;
        self
    }
}

/// A member of a candidate family together with its length.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub params: Vec<f64>,
    pub hamiltonian: SharedHamiltonian,
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct HoferEstimate {
    /// Best verified length, `+∞` when nothing in budget displaced U.
    pub upper: f64,
    /// `½ c(U)` where a capacity is available, else 0.
    pub lower: f64,
    pub witness: Option<Candidate>,
    pub displacement: Option<Displacement>,
    pub evaluations: usize,
    /// Coarse-grid landscape: parameters and objective (`+∞` = infeasible).
    pub landscape: Vec<(Vec<f64>, f64)>,
    pub notes: Vec<String>,
}

fn lexicographic(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1).then_with(|| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

fn time_one_map<'a>(iso: &'a Isotopy) -> impl Fn(&[f64]) -> Result<Vec<f64>> + Sync + 'a {
    move |x| iso.evaluate(1.0, x)
}

/// Length if `h`'s time-one map verifiably displaces the sample, else `+∞`.
fn candidate_objective(x: &DisplacementExperiment, sample: &RegionSample, h: SharedHamiltonian) -> Result<f64> {
    let iso = Isotopy::new(x.structure.clone(), h.clone(), x.integrator)?;
    if !verified_quick(&time_one_map(&iso), &x.region, sample) {
        return Ok(f64::INFINITY);
    }
    Ok(length(h.as_ref(), &x.grid)?.value)
}

/// Upper bound on the displacement energy of U from the best verified witness.
pub fn displacement_upper_bound(x: &DisplacementExperiment) -> Result<HoferEstimate> {
    displacement_upper_bound_seeded(x, &[])
}

/// As [`displacement_upper_bound`], with extra candidates (for instance the
/// witnesses of a superset V ⊃ U) scanned first. Since a map displacing V
/// displaces U, seeding with V's witness forces `upper(U) ≤ upper(V)`.
pub fn displacement_upper_bound_seeded(x: &DisplacementExperiment, seeds: &[Candidate]) -> Result<HoferEstimate> {
    x.grid.validate()?;
    x.integrator.validate()?;
    let lower = match capacity_lower(&x.structure, &x.region) {
        Ok(c) => 0.5 * c,
        Err(_) => 0.0,
    };
    let mut notes = Vec::new();
    if x.region.is_empty() {
        notes.push("empty region is displaced by the identity".to_string());
        return Ok(HoferEstimate {
            upper: 0.0,
            lower: 0.0,
            witness: None,
            displacement: Some(displacement_on_sample(
                &|p| Ok(p.to_vec()),
                &x.region,
                &RegionSample {
                    points: vec![],
                    resolution: 0.0,
                },
            )?),
            evaluations: 0,
            landscape: vec![],
            notes,
        });
    }
    let sample = sample_region(&x.region, &x.sampler);
    let bounds = x.family.parameter_bounds();
    let k = bounds.dim();
    let objective = |p: &[f64]| -> f64 {
        x.family
            .instantiate(&x.structure, &x.region, p)
            .and_then(|h| candidate_objective(x, &sample, h))
            .unwrap_or(f64::INFINITY)
    };

    // coarse grid
    let m = x.budget.coarse_per_axis.max(2);
    let coarse: Vec<Vec<f64>> = (0..m.pow(k as u32))
        .map(|idx| {
            let mut rem = idx;
            (0..k)
                .map(|d| {
                    let i = rem % m;
                    rem /= m;
                    bounds.lo[d] + (bounds.hi[d] - bounds.lo[d]) * i as f64 / (m - 1) as f64
                })
                .collect()
        })
        .collect();
    let values = parallel::map_slice(&coarse, |p| objective(p));
    let mut landscape: Vec<(Vec<f64>, f64)> = coarse.into_iter().zip(values).collect();
    let mut evaluations = landscape.len();
    let mut ranked = landscape.clone();
    ranked.sort_by(lexicographic);

    // multistart refinement from the best coarse points
    let starts: Vec<Vec<f64>> = ranked.iter().take(x.budget.starts).map(|c| c.0.clone()).collect();
    let nm = NelderMead {
        max_evals: x.budget.evals_per_start,
        initial_step: 0.5 / (m - 1) as f64,
        ftol: 1e-10,
        xtol: 1e-8,
    };
    let refined = parallel::map_slice(&starts, |s| nm.minimize(&objective, s, &bounds));
    evaluations += refined.iter().map(|r| r.evals).sum::<usize>();

    let mut pool: Vec<(Vec<f64>, f64)> = ranked.into_iter().filter(|c| c.1.is_finite()).collect();
    pool.extend(
        refined
            .into_iter()
            .filter(|r| r.value.is_finite())
            .map(|r| (r.x, r.value)),
    );
    pool.sort_by(lexicographic);
    landscape.sort_by(|a, b| lexicographic(&(a.0.clone(), 0.0), &(b.0.clone(), 0.0)));

    let mut best: Option<(Candidate, Displacement)> = None;
    // seeds first: a seed keeps the win on ties
    for s in seeds {
        evaluations += 1;
        let iso = Isotopy::new(x.structure.clone(), s.hamiltonian.clone(), x.integrator)?;
        let d = displacement_on_sample(&time_one_map(&iso), &x.region, &sample)?;
        if d.verified() && best.as_ref().is_none_or(|(b, _)| s.length < b.length) {
            best = Some((s.clone(), d));
        }
    }
    for (params, value) in pool {
        if best.as_ref().is_some_and(|(b, _)| value >= b.length) {
            break;
        }
        let h = x.family.instantiate(&x.structure, &x.region, &params)?;
        let iso = Isotopy::new(x.structure.clone(), h.clone(), x.integrator)?;
        let d = displacement_on_sample(&time_one_map(&iso), &x.region, &sample)?;
        if d.verified() {
            best = Some((
                Candidate {
                    params,
                    hamiltonian: h,
                    length: value,
                },
                d,
            ));
            break;
        }
    }
    match best {
        Some((witness, d)) => {
            notes.push(format!(
                "best {} witness over {} evaluations; an upper bound, not the infimum",
                x.family.name(),
                evaluations
            ));
            Ok(HoferEstimate {
                upper: witness.length,
                lower,
                witness: Some(witness),
                displacement: Some(d),
                evaluations,
                landscape,
                notes,
            })
        }
        None => {
            notes.push(format!(
                "no {} candidate verifiably displaced the region within {} evaluations",
                x.family.name(),
                evaluations
            ));
            Ok(HoferEstimate {
                upper: f64::INFINITY,
                lower,
                witness: None,
                displacement: None,
                evaluations,
                landscape,
                notes,
            })
        }
    }
}

/// Gromov width of `U ∩ L` where it is computable: the σ_L-area of a disk
/// in a 2-dimensional leaf, or πr² for a round ball in standard ℝ²ⁿ.
pub fn gromov_width_lower(region: &Region, structure: &PoissonStructure, leaf: Option<&LeafChart>) -> Result<f64> {
    let ball = match region {
        Region::Ball(b) => b,
        Region::Box(_) => {
            return Err(Error::NotImplemented(
                "Gromov width is only available for round balls".into(),
            ))
        }
    };
    check_dim(structure.dim(), ball.center.len())?;
    if ball.radius == 0.0 {
        return Ok(0.0);
    }
    let pi = std::f64::consts::PI;
    match leaf {
        None => match structure.has_standard_ball_width() {
            true => Ok(pi * ball.radius * ball.radius),
            false => Err(Error::NotImplemented(format!(
                "Gromov width on `{}` needs a leaf",
                structure.label()
            ))),
        },
        Some(l) => {
            if !l.affine {
                return Err(Error::NotImplemented("Gromov width needs an affine leaf chart".into()));
            }
            if l.dim == 0 {
                return Ok(0.0);
            }
            if l.dim == l.base.len() && structure.has_standard_ball_width() {
                return Ok(pi * ball.radius * ball.radius);
            }
            let kappa = l
                .area_density()
                .ok_or_else(|| Error::NotImplemented(format!("Gromov width on a {}-dimensional leaf", l.dim)))?;
            let d = l.distance(&ball.center);
            let rho2 = ball.radius * ball.radius - d * d;
            if rho2 <= 0.0 {
                return Ok(0.0);
            }
            Ok(kappa.abs() * pi * rho2)
        }
    }
}

/// `c_Λ(U) = sup_L c_L(U ∩ L)`, sampled over 63 leaves across U for
/// structures with a transversal Casimir axis.
pub fn capacity_lower(structure: &PoissonStructure, region: &Region) -> Result<f64> {
    if region.is_empty() {
        return Ok(0.0);
    }
    if structure.has_standard_ball_width() {
        return gromov_width_lower(region, structure, None);
    }
    let axis = structure
        .transversal_axis()
        .ok_or_else(|| Error::NotImplemented(format!("no leafwise capacity for `{}`", structure.label())))?;
    let Region::Ball(ball) = region else {
        return Err(Error::NotImplemented("leafwise capacity needs a round ball".into()));
    };
    let mut best: f64 = 0.0;
    for k in 1..64 {
        let mut p = ball.center.clone();
        p[axis] += ball.radius * (2.0 * k as f64 / 64.0 - 1.0);
        let leaf = structure.leaf_at(&p)?;
        best = best.max(gromov_width_lower(region, structure, Some(&leaf))?);
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct EnergyCapacityReport {
    /// `½ c_Λ(U)`.
    pub half_capacity: f64,
    pub estimate: HoferEstimate,
    /// `½ c_Λ(U) ≤ upper`; a failure would contradict the inequality and so
    /// points at a bug in the estimators.
    pub holds: bool,
}

pub fn energy_capacity_check(x: &DisplacementExperiment) -> Result<EnergyCapacityReport> {
    let half_capacity = 0.5 * capacity_lower(&x.structure, &x.region)?;
    let estimate = displacement_upper_bound(x)?;
    Ok(EnergyCapacityReport {
        half_capacity,
        holds: half_capacity <= estimate.upper,
        estimate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafRestrictionReport {
    pub leaf_length: f64,
    pub ambient_length: f64,
    pub holds: bool,
}

/// Compares the length of `F_L` with the length of `F`. The ambient value
/// set at each time includes the leaf grid (the trace of the ambient grid on
/// L), so the inequality holds exactly on grids.
pub fn leaf_restriction_check(
    f: SharedHamiltonian,
    leaf: &LeafChart,
    grid: &OscillationGrid,
) -> Result<LeafRestrictionReport> {
    grid.validate()?;
    let ambient_support = compact_support(f.as_ref())?.clone();
    let restricted = restrict_to_leaf(f.clone(), leaf)?;
    let leaf_support = restricted.support().expect("restrictions carry a box").clone();
    let times = grid.time_points();

    let leaf_points: Vec<Vec<f64>> = grid.points(&leaf_support).iter().map(|u| leaf.embed(u)).collect();
    let ambient_points = grid.points(&ambient_support);
    let series = |pts: &[Vec<f64>]| -> Vec<Vec<f64>> {
        parallel::map_slice(pts, |x| {
            let mut out = vec![0.0; times.len()];
            f.values_at_times(x, &times, &mut out);
            out
        })
    };
    let on_leaf = series(&leaf_points);
    let ambient = series(&ambient_points);

    let mut leaf_osc = Vec::with_capacity(times.len());
    let mut ambient_osc = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let l: Vec<f64> = on_leaf.iter().map(|s| s[k]).collect();
        let lo = reduce_extremes(&leaf_points, &l)?;
        let a: Vec<f64> = ambient.iter().map(|s| s[k]).collect();
        let ao = reduce_extremes(&ambient_points, &a)?;
        leaf_osc.push(lo.value());
        ambient_osc.push(ao.max.max(lo.max) - ao.min.min(lo.min));
    }
    let leaf_length = simpson(&leaf_osc, 0.0, 1.0);
    let ambient_length = simpson(&ambient_osc, 0.0, 1.0);
    Ok(LeafRestrictionReport {
        leaf_length,
        ambient_length,
        holds: leaf_length <= ambient_length + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{Spatial, TimeProfile};

    #[test]
    fn simpson_is_exact_on_cubics() {
        let xs: Vec<f64> = (0..33).map(|k| k as f64 / 32.0).collect();
        let v: Vec<f64> = xs.iter().map(|x| x * x * x - x).collect();
        assert!((simpson(&v, 0.0, 1.0) - (0.25 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        assert!(OscillationGrid::new(15, 33).is_err());
        assert!(OscillationGrid::new(16, 34).is_err());
        assert!(OscillationGrid::new(16, 31).is_err());
        assert!(OscillationGrid::new(16, 33).is_ok());
        assert_eq!(OscillationGrid::default().resolution_for(4), 16);
        assert_eq!(OscillationGrid::default().resolution_for(2), 32);
    }

    #[test]
    fn bump_oscillations() {
        let g = OscillationGrid::default();
        let one = FamilyHamiltonian::bump(vec![0.1, 0.2], 0.8, 1.0).unwrap();
        let o = oscillation(&|x| one.spatial_value(x), one.support().unwrap(), &g).unwrap();
        assert!((o.value() - 1.0).abs() < 1e-9);
        let pair = FamilyHamiltonian::from_spatial(
            2,
            "pair",
            Spatial::Sum(vec![
                Spatial::Bump {
                    center: vec![-1.0, 0.0],
                    radius: 0.5,
                    height: 1.0,
                    axes: vec![],
                },
                Spatial::Bump {
                    center: vec![1.0, 0.0],
                    radius: 0.5,
                    height: -0.5,
                    axes: vec![],
                },
            ]),
        );
        let o = oscillation(&|x| pair.spatial_value(x), pair.support().unwrap(), &g).unwrap();
        assert!((o.value() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn sine_profile_length() {
        let f = FamilyHamiltonian::bump(vec![0.0, 0.0], 1.0, 1.0)
            .unwrap()
            .with_profile(TimeProfile::parse("sin(pi * t)").unwrap());
        let l = length(&f, &OscillationGrid::default()).unwrap();
        assert!((l.value - 2.0 / std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn identity_does_not_displace_and_empty_set_is_displaced() {
        let u = Region::ball(vec![0.0, 0.0], 0.5).unwrap();
        let d = check_displaced(&|p| Ok(p.to_vec()), &u, &SamplerSpec::default()).unwrap();
        assert_eq!(d.verdict, Verdict::NotDisplaced);
        let e = Region::ball(vec![0.0, 0.0], 0.0).unwrap();
        let d = check_displaced(&|p| Ok(p.to_vec()), &e, &SamplerSpec::default()).unwrap();
        assert!(d.verified());
    }

    #[test]
    fn rigid_shift_margin() {
        let u = Region::ball(vec![0.0, 0.0], 0.5).unwrap();
        let d = check_displaced(&|p| Ok(vec![p[0] + 1.2, p[1]]), &u, &SamplerSpec::default()).unwrap();
        assert!(d.verified());
        assert!((d.margin - 0.2).abs() < 1e-12);
    }

    #[test]
    fn widths() {
        let plane = PoissonStructure::symplectic(1).unwrap();
        let u = Region::ball(vec![0.0, 0.0], 0.5).unwrap();
        let w = gromov_width_lower(&u, &plane, None).unwrap();
        assert!((w - std::f64::consts::PI * 0.25).abs() < 1e-15);
        let h = PoissonStructure::heisenberg();
        let leaf = h.leaf_at(&[0.0, 0.0, 2.0]).unwrap();
        let b = Region::ball(vec![0.3, -0.2, 2.0], 0.4).unwrap();
        let w = gromov_width_lower(&b, &h, Some(&leaf)).unwrap();
        assert!((w - std::f64::consts::PI * 0.16 / 2.0).abs() < 1e-14);
        let point_leaf = h.leaf_at(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(gromov_width_lower(&b, &h, Some(&point_leaf)).unwrap(), 0.0);
    }
}
