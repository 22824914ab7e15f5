//! Symplectic groupoid realizations and lifted Hamiltonians.
//!
//! Only the structure the lifting argument consumes is modeled: source,
//! target, unit and the symplectic bivector on the total chart. Groupoid
//! multiplication is not implemented.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cutoff::Plateau;
use crate::error::{check_dim, Error, Result};
use crate::flows::Isotopy;
use crate::hamiltonian::{Hamiltonian, Separation, SharedHamiltonian};
use crate::hofer::{length, OscillationGrid};
use crate::ode::IntegratorSpec;
use crate::parallel;
use crate::poisson::{FnField, PoissonStructure, ScalarField};
use crate::region::{AxisBox, Region};
use crate::sampling::{sample_region, SamplerSpec};
use crate::MAX_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// M × M over symplectic ℝ²ⁿ, points (p, q).
    Pair { n: usize },
    /// T*H ≅ H × 𝔥* over the Heisenberg Lie–Poisson structure, points (a, b, c, μ).
    CotangentHeisenberg,
}

/// A symplectic groupoid `G ⇉ M` on global charts.
#[derive(Clone)]
pub struct GroupoidRealization {
    label: String,
    kind: Kind,
    total: Arc<PoissonStructure>,
    base: Arc<PoissonStructure>,
}

impl std::fmt::Debug for GroupoidRealization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GroupoidRealization")
            .field("label", &self.label)
            .finish()
    }
}

pub const BUILTIN_REALIZATIONS: &[(&str, &str)] = &[
    (
        "pair:symplectic2n:<n>",
        "pair groupoid M × M of symplectic R^2n, s(p, q) = q, t(p, q) = p",
    ),
    (
        "cotangent:heisenberg3",
        "T*H of the Heisenberg group over the Lie–Poisson dual, s = μ, t = Ad* μ",
    ),
];

/// Pair groupoid `M × M` with bivector block-diag(−Λ, Λ): `s(p, q) = q` is
/// Poisson and `t(p, q) = p` anti-Poisson.
pub fn pair_groupoid(base: &PoissonStructure) -> Result<GroupoidRealization> {
    let n = base.standard_symplectic().ok_or_else(|| {
        Error::Contract(format!(
            "the pair groupoid is built over standard symplectic R^2n, not `{}`",
            base.label()
        ))
    })?;
    let total = PoissonStructure::pair_block(n);
    Ok(GroupoidRealization {
        label: total.label().to_string(),
        kind: Kind::Pair { n },
        total: Arc::new(total),
        base: Arc::new(base.clone()),
    })
}

/// Left-trivialized cotangent bundle of the Heisenberg group
/// `(a, b, c)(a', b', c') = (a + a', b + b', c + c' + ab')` over `𝔥*` with
/// `{x₁, x₂} = x₃`.
pub fn cotangent_heisenberg() -> GroupoidRealization {
    let total = PoissonStructure::cotangent_heisenberg();
    GroupoidRealization {
        label: total.label().to_string(),
        kind: Kind::CotangentHeisenberg,
        total: Arc::new(total),
        base: Arc::new(PoissonStructure::heisenberg()),
    }
}

impl GroupoidRealization {
    pub fn from_label(label: &str) -> Result<Self> {
        if label == "cotangent:heisenberg3" {
            return Ok(cotangent_heisenberg());
        }
        if let Some(rest) = label.strip_prefix("pair:") {
            return pair_groupoid(&PoissonStructure::from_label(rest)?);
        }
        Err(Error::UnknownLabel(format!("realization `{label}`")))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn total(&self) -> &Arc<PoissonStructure> {
        &self.total
    }

    pub fn base(&self) -> &Arc<PoissonStructure> {
        &self.base
    }

    pub fn total_dim(&self) -> usize {
        self.total.dim()
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    /// Total-chart axes read by the source map; `s` is a coordinate projection
    /// on both built-ins.
    pub fn source_axes(&self) -> std::ops::Range<usize> {
        match self.kind {
            Kind::Pair { n } => 2 * n..4 * n,
            Kind::CotangentHeisenberg => 3..6,
        }
    }

    pub fn source(&self, g: &[f64]) -> Vec<f64> {
        g[self.source_axes()].to_vec()
    }

    pub fn target(&self, g: &[f64]) -> Vec<f64> {
        match self.kind {
            Kind::Pair { n } => g[..2 * n].to_vec(),
            Kind::CotangentHeisenberg => {
                let (a, b) = (g[0], g[1]);
                let (m1, m2, m3) = (g[3], g[4], g[5]);
                vec![m1 + b * m3, m2 - a * m3, m3]
            }
        }
    }

    pub fn unit(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            Kind::Pair { .. } => [x, x].concat(),
            Kind::CotangentHeisenberg => vec![0.0, 0.0, 0.0, x[0], x[1], x[2]],
        }
    }

    /// `|{F∘s, H∘s}_G(g) − {F, H}_M(s(g))|`.
    pub fn source_morphism_residual(&self, f: &dyn ScalarField, h: &dyn ScalarField, g: &[f64]) -> Result<f64> {
        self.morphism_residual(f, h, g, false)
    }

    /// `|{F∘t, H∘t}_G(g) + {F, H}_M(t(g))|`.
    pub fn target_antimorphism_residual(&self, f: &dyn ScalarField, h: &dyn ScalarField, g: &[f64]) -> Result<f64> {
        self.morphism_residual(f, h, g, true)
    }

    fn morphism_residual(&self, f: &dyn ScalarField, h: &dyn ScalarField, g: &[f64], target: bool) -> Result<f64> {
        check_dim(self.total_dim(), g.len())?;
        let map = |y: &[f64]| if target { self.target(y) } else { self.source(y) };
        let fl = FnField(|y: &[f64]| f.value(&map(y)));
        let hl = FnField(|y: &[f64]| h.value(&map(y)));
        let up = self.total.bracket(&fl, &hl, g)?;
        let down = self.base.bracket(f, h, &map(g))?;
        Ok(if target { (up + down).abs() } else { (up - down).abs() })
    }

    /// Deterministic points of the total chart: base coordinates in
    /// `[-half, half]` and the remaining coordinates in the same range.
    pub fn sample_points(&self, count: usize, half: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| (0..self.total_dim()).map(|_| rng.random_range(-half..half)).collect())
            .collect()
    }
}

/// `s*F = F ∘ s` on the total chart; not compactly supported.
pub struct Lifted {
    base: SharedHamiltonian,
    realization: GroupoidRealization,
}

pub fn lift_hamiltonian(r: &GroupoidRealization, f: SharedHamiltonian) -> Result<Lifted> {
    check_dim(r.base_dim(), f.dim())?;
    if let Some(l) = f.structure_label() {
        if l != r.base.label() {
            return Err(Error::Contract(format!(
                "`{l}` Hamiltonian cannot be lifted through `{}`",
                r.label
            )));
        }
    }
    Ok(Lifted {
        base: f,
        realization: r.clone(),
    })
}

impl Lifted {
    pub fn base_hamiltonian(&self) -> &SharedHamiltonian {
        &self.base
    }

    /// Length of the lifted isotopy, equal to the base length by definition.
    pub fn length(&self, grid: &OscillationGrid) -> Result<f64> {
        Ok(length(self.base.as_ref(), grid)?.value)
    }
}

impl Hamiltonian for Lifted {
    fn dim(&self) -> usize {
        self.realization.total_dim()
    }

    fn value(&self, t: f64, g: &[f64]) -> f64 {
        self.base.value(t, &g[self.realization.source_axes()])
    }

    fn gradient(&self, t: f64, g: &[f64], out: &mut [f64]) {
        let axes = self.realization.source_axes();
        out[..g.len()].fill(0.0);
        let start = axes.start;
        self.base
            .gradient(t, &g[axes], &mut out[start..start + self.base.dim()]);
    }

    fn support(&self) -> Option<&AxisBox> {
        None
    }

    fn structure_label(&self) -> Option<&str> {
        Some(self.realization.total.label())
    }

    fn is_autonomous(&self) -> bool {
        self.base.is_autonomous()
    }

    fn values_at_times(&self, g: &[f64], ts: &[f64], out: &mut [f64]) {
        self.base.values_at_times(&g[self.realization.source_axes()], ts, out)
    }

    fn separation(&self) -> Option<Separation<'_>> {
        let inner = self.base.separation()?;
        let spatial = inner.spatial;
        let axes = self.realization.source_axes();
        Some(Separation {
            profile: inner.profile,
            spatial: Box::new(move |g| spatial(&g[axes.clone()])),
        })
    }

    fn describe(&self) -> String {
        format!("lift of {} through {}", self.base.describe(), self.realization.label)
    }
}

/// Maximum residuals over sampled `(t, g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub samples: usize,
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `‖s(φ̃^t(g)) − φ^t(s(g))‖` over the samples and the ascending `times`.
pub fn check_projection(
    r: &GroupoidRealization,
    f: SharedHamiltonian,
    samples: &[Vec<f64>],
    times: &[f64],
    spec: IntegratorSpec,
) -> Result<ResidualReport> {
    let lifted: SharedHamiltonian = Arc::new(lift_hamiltonian(r, f.clone())?);
    let up = Isotopy::new(r.total.clone(), lifted, spec)?;
    let down = Isotopy::new(r.base.clone(), f, spec)?;
    let per = parallel::try_map_slice(samples, |g| -> Result<f64> {
        let ups = up.trajectory(g, times)?;
        let downs = down.trajectory(&r.source(g), times)?;
        Ok(ups
            .iter()
            .zip(&downs)
            .map(|(a, b)| norm_diff(&r.source(a), b))
            .fold(0.0, f64::max))
    })?;
    Ok(ResidualReport {
        max_residual: per.into_iter().fold(0.0, f64::max),
        samples: samples.len(),
    })
}

/// `‖t(φ̃^τ(g)) − t(g)‖` along lifted flows.
pub fn check_target_fibers(
    r: &GroupoidRealization,
    f: SharedHamiltonian,
    samples: &[Vec<f64>],
    times: &[f64],
    spec: IntegratorSpec,
) -> Result<ResidualReport> {
    let lifted: SharedHamiltonian = Arc::new(lift_hamiltonian(r, f)?);
    let up = Isotopy::new(r.total.clone(), lifted, spec)?;
    let per = parallel::try_map_slice(samples, |g| -> Result<f64> {
        let t0 = r.target(g);
        Ok(up
            .trajectory(g, times)?
            .iter()
            .map(|y| norm_diff(&r.target(y), &t0))
            .fold(0.0, f64::max))
    })?;
    Ok(ResidualReport {
        max_residual: per.into_iter().fold(0.0, f64::max),
        samples: samples.len(),
    })
}

/// A plateau `λ` on the total chart: 1 on `inner`, 0 outside `outer`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffSpec {
    pub plateau: Plateau,
}

impl CutoffSpec {
    pub fn new(inner: AxisBox, margin: f64) -> Result<Self> {
        if !(margin > 0.0) {
            return Err(Error::Contract(format!("cutoff margin must be positive, got {margin}")));
        }
        Ok(CutoffSpec {
            plateau: Plateau::new(inner, margin),
        })
    }

    /// A cutoff whose plateau holds the whole path `{φ^t(U) : t ∈ [0, 1]}`,
    /// measured on a sample of U at 33 times and padded by `pad`.
    pub fn covering_path(iso: &Isotopy, region: &Region, pad: f64, margin: f64) -> Result<Self> {
        let sample = sample_region(region, &SamplerSpec::coarse());
        let times: Vec<f64> = (1..=32).map(|k| k as f64 / 32.0).collect();
        let mut hull = region.bounding_box();
        let paths = parallel::try_map_slice(&sample.points, |p| iso.trajectory(p, &times))?;
        for y in paths.iter().flatten() {
            for (i, v) in y.iter().enumerate() {
                hull.lo[i] = hull.lo[i].min(*v);
                hull.hi[i] = hull.hi[i].max(*v);
            }
        }
        Self::new(hull.inflate(pad), margin)
    }

    pub fn inner(&self) -> &AxisBox {
        &self.plateau.inner
    }

    pub fn outer(&self) -> AxisBox {
        self.plateau.outer()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.plateau.value(x)
    }
}

/// `F^λ(t, x) = λ((φ̃^t)⁻¹(x)) · F(t, s(x))`, compactly supported.
///
/// `(φ̃^t)⁻¹` is evaluated by backward integration at every call.
pub struct CutoffHamiltonian {
    lifted_flow: Isotopy,
    base: SharedHamiltonian,
    cutoff: CutoffSpec,
    realization: GroupoidRealization,
    support: AxisBox,
}

pub fn cutoff_hamiltonian(
    r: &GroupoidRealization,
    f: SharedHamiltonian,
    cutoff: CutoffSpec,
    spec: IntegratorSpec,
) -> Result<CutoffHamiltonian> {
    check_dim(r.total_dim(), cutoff.inner().dim())?;
    let lifted: SharedHamiltonian = Arc::new(lift_hamiltonian(r, f.clone())?);
    let lifted_flow = Isotopy::new(r.total.clone(), lifted, spec)?;
    // supp F^λ_t ⊂ φ̃^t(outer): bound the swept region by sampling the outer
    // box forward, padded by a tenth of its size
    let outer = cutoff.outer();
    let swept = CutoffSpec::covering_path(&lifted_flow, &Region::Box(outer.clone()), 0.0, 1.0)?;
    let mut support = swept.inner().inflate_relative(0.1);
    if let Some(fb) = f.support() {
        for (k, axis) in r.source_axes().enumerate() {
            support.lo[axis] = support.lo[axis].max(fb.lo[k]);
            support.hi[axis] = support.hi[axis].min(fb.hi[k]);
            if support.lo[axis] > support.hi[axis] {
                support.hi[axis] = support.lo[axis];
            }
        }
    }
    Ok(CutoffHamiltonian {
        lifted_flow,
        base: f,
        cutoff,
        realization: r.clone(),
        support,
    })
}

impl CutoffHamiltonian {
    pub fn cutoff(&self) -> &CutoffSpec {
        &self.cutoff
    }

    pub fn lifted_flow(&self) -> &Isotopy {
        &self.lifted_flow
    }
}

impl Hamiltonian for CutoffHamiltonian {
    fn dim(&self) -> usize {
        self.realization.total_dim()
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        let fv = self.base.value(t, &x[self.realization.source_axes()]);
        if fv == 0.0 {
            return 0.0;
        }
        match self.lifted_flow.evaluate_inverse(t, x) {
            Ok(y) => self.cutoff.value(&y) * fv,
            Err(_) => f64::NAN,
        }
    }

    fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let axes = self.realization.source_axes();
        let start = axes.start;
        let fv = self.base.value(t, &x[axes.clone()]);
        let mut df = [0.0; MAX_DIM];
        self.base.gradient(t, &x[axes], &mut df[start..start + self.base.dim()]);
        let y = match self.lifted_flow.evaluate_inverse(t, x) {
            Ok(y) => y,
            Err(_) => return out[..n].fill(f64::NAN),
        };
        let mut dl = [0.0; MAX_DIM];
        let lam = self.cutoff.plateau.value_gradient(&y, &mut dl[..n]);
        for i in 0..n {
            out[i] = lam * df[i];
        }
        if fv == 0.0 || dl[..n].iter().all(|v| *v == 0.0) {
            return;
        }
        let jac = match self.lifted_flow.flow_with_jacobian(t, 0.0, x) {
            Ok((_, j)) => j,
            Err(_) => return out[..n].fill(f64::NAN),
        };
        for k in 0..n {
            let d: f64 = (0..n).map(|i| dl[i] * jac[i * n + k]).sum();
            out[k] += fv * d;
        }
    }

    fn values_at_times(&self, x: &[f64], ts: &[f64], out: &mut [f64]) {
        self.base.values_at_times(&x[self.realization.source_axes()], ts, out);
        if out.iter().all(|v| *v == 0.0) {
            return;
        }
        match self.lifted_flow.inverse_at_times(x, ts) {
            Ok(ys) => {
                for (o, y) in out.iter_mut().zip(&ys) {
                    if *o != 0.0 {
                        *o *= self.cutoff.value(y);
                    }
                }
            }
            Err(_) => out.fill(f64::NAN),
        }
    }

    fn support(&self) -> Option<&AxisBox> {
        Some(&self.support)
    }

    fn structure_label(&self) -> Option<&str> {
        Some(self.realization.total.label())
    }

    fn describe(&self) -> String {
        format!("cutoff of the lift of {}", self.base.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson::Coordinate;

    #[test]
    fn units_are_sections() {
        let pair = pair_groupoid(&PoissonStructure::symplectic(1).unwrap()).unwrap();
        let x = [0.3, -0.7];
        assert_eq!(pair.source(&pair.unit(&x)), x.to_vec());
        assert_eq!(pair.target(&pair.unit(&x)), x.to_vec());
        let th = cotangent_heisenberg();
        let m = [0.2, 1.1, -0.4];
        assert_eq!(th.source(&th.unit(&m)), m.to_vec());
        assert_eq!(th.target(&th.unit(&m)), m.to_vec());
    }

    #[test]
    fn pair_groupoid_needs_a_symplectic_base() {
        assert!(pair_groupoid(&PoissonStructure::heisenberg()).is_err());
    }

    #[test]
    fn heisenberg_bracket_through_the_source() {
        let th = cotangent_heisenberg();
        for g in th.sample_points(20, 1.5, 7) {
            let r = th.source_morphism_residual(&Coordinate(0), &Coordinate(1), &g).unwrap();
            assert!(r < 1e-6, "{r}");
            let up = th
                .total()
                .bracket(&FnField(|y: &[f64]| y[3]), &FnField(|y: &[f64]| y[4]), &g)
                .unwrap();
            assert!((up - g[5]).abs() < 1e-6);
        }
    }

    #[test]
    fn center_is_coadjoint_invariant() {
        let th = cotangent_heisenberg();
        for g in th.sample_points(20, 2.0, 3) {
            assert_eq!(th.target(&g)[2], g[5]);
        }
    }

    #[test]
    fn realization_labels() {
        assert_eq!(
            GroupoidRealization::from_label("pair:symplectic2n:1")
                .unwrap()
                .total_dim(),
            4
        );
        assert_eq!(
            GroupoidRealization::from_label("cotangent:heisenberg3")
                .unwrap()
                .total_dim(),
            6
        );
        assert!(GroupoidRealization::from_label("pair:heisenberg3").is_err());
        assert!(GroupoidRealization::from_label("nope").is_err());
    }
}
