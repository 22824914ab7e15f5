//! Time-dependent Hamiltonians `F : [0, 1] × ℝⁿ → ℝ` and the built-in families.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::cutoff::{bump_profile, bump_profile_second, Plateau};
use crate::error::{Error, Result};
use crate::expr::{Env, Expr};
use crate::poisson::{central_gradient, LeafChart, PoissonStructure};
use crate::region::AxisBox;
use crate::MAX_DIM;

/// `F(t, x) = profile(t) · spatial(x)`.
pub struct Separation<'a> {
    pub profile: Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>,
    pub spatial: Box<dyn Fn(&[f64]) -> f64 + Send + Sync + 'a>,
}

/// A time-dependent Hamiltonian on a chart of ℝⁿ.
pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, t: f64, x: &[f64]) -> f64;

    /// Spatial gradient `d F_t (x)`; central differences unless overridden.
    fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]) {
        central_gradient(&|y: &[f64]| self.value(t, y), x, out);
    }

    /// Row-major spatial Hessian when a closed form is available; returns
    /// `false` otherwise and callers fall back to differencing the gradient.
    fn hessian(&self, _t: f64, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Axis box outside which `F(t, ·) ≡ 0` for every `t`, or `None` when the
    /// Hamiltonian is not compactly supported.
    fn support(&self) -> Option<&AxisBox>;

    /// Label of the Poisson structure this Hamiltonian was declared for.
    fn structure_label(&self) -> Option<&str> {
        None
    }

    /// Whether `F(t, ·)` does not depend on `t`.
    fn is_autonomous(&self) -> bool {
        false
    }

    /// `out[k] = F(ts[k], x)`. Implementations that integrate flows override
    /// this to share one trajectory across all times.
    fn values_at_times(&self, x: &[f64], ts: &[f64], out: &mut [f64]) {
        for (o, &t) in out.iter_mut().zip(ts) {
            *o = self.value(t, x);
        }
    }

    /// Product factorization, when one is known.
    fn separation(&self) -> Option<Separation<'_>> {
        None
    }

    fn describe(&self) -> String {
        format!("hamiltonian on R^{}", self.dim())
    }
}

pub type SharedHamiltonian = Arc<dyn Hamiltonian>;

impl fmt::Debug for dyn Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Spatial building blocks of the built-in families.
#[derive(Debug, Clone, PartialEq)]
pub enum Spatial {
    Zero,
    /// `Σ c_i (x_i − center_i)`.
    Linear {
        coeffs: Vec<f64>,
        center: Vec<f64>,
    },
    /// `½ · scale · |x − center|²`.
    Quadratic {
        center: Vec<f64>,
        scale: f64,
    },
    /// `height · exp(1 − 1/(1 − s²))`, `s = |x_A − c_A| / radius` over the listed axes A
    /// (all axes when `axes` is empty).
    Bump {
        center: Vec<f64>,
        radius: f64,
        height: f64,
        axes: Vec<usize>,
    },
    Plateau(Plateau),
    /// Expression in `x1..xn` and `p1..pk`; gradient by central differences.
    Custom {
        expr: Expr,
        params: Vec<f64>,
        support: Option<AxisBox>,
    },
    Sum(Vec<Spatial>),
    Product(Vec<Spatial>),
}

type Intervals = Vec<(f64, f64)>;

impl Spatial {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Spatial::Zero => 0.0,
            Spatial::Linear { coeffs, center } => coeffs
                .iter()
                .zip(x.iter().zip(center))
                .map(|(c, (xi, ci))| c * (xi - ci))
                .sum(),
            Spatial::Quadratic { center, scale } => {
                0.5 * scale * x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
            Spatial::Bump {
                center,
                radius,
                height,
                axes,
            } => {
                let s2 = bump_s2(x, center, *radius, axes);
                height * bump_profile(s2).0
            }
            Spatial::Plateau(p) => p.value(x),
            Spatial::Custom { expr, params, .. } => {
                if let Some(b) = self.custom_support() {
                    if b.excludes(x) {
                        return 0.0;
                    }
                }
                expr.eval(&Env { x, t: 0.0, p: params })
            }
            Spatial::Sum(parts) => parts.iter().map(|p| p.value(x)).sum(),
            Spatial::Product(parts) => {
                let mut v = 1.0;
                for p in parts {
                    v *= p.value(x);
                    if v == 0.0 {
                        return 0.0;
                    }
                }
                v
            }
        }
    }

    fn custom_support(&self) -> Option<&AxisBox> {
        match self {
            Spatial::Custom { support, .. } => support.as_ref(),
            _ => None,
        }
    }

    /// Value and gradient; `grad[..n]` is overwritten.
    pub fn value_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = x.len();
        match self {
            Spatial::Zero => {
                grad[..n].fill(0.0);
                0.0
            }
            Spatial::Linear { coeffs, .. } => {
                grad[..n].copy_from_slice(coeffs);
                self.value(x)
            }
            Spatial::Quadratic { center, scale } => {
                for i in 0..n {
                    grad[i] = scale * (x[i] - center[i]);
                }
                self.value(x)
            }
            Spatial::Bump {
                center,
                radius,
                height,
                axes,
            } => {
                grad[..n].fill(0.0);
                let s2 = bump_s2(x, center, *radius, axes);
                let (v, dv) = bump_profile(s2);
                if v == 0.0 {
                    return 0.0;
                }
                let k = height * dv * 2.0 / (radius * radius);
                let mut apply = |i: usize| grad[i] = k * (x[i] - center[i]);
                if axes.is_empty() {
                    (0..n).for_each(&mut apply);
                } else {
                    axes.iter().copied().for_each(&mut apply);
                }
                height * v
            }
            Spatial::Plateau(p) => p.value_gradient(x, grad),
            Spatial::Custom { .. } => {
                central_gradient(&|y: &[f64]| self.value(y), x, &mut grad[..n]);
                self.value(x)
            }
            Spatial::Sum(parts) => {
                grad[..n].fill(0.0);
                let mut g = [0.0; MAX_DIM];
                let mut v = 0.0;
                for p in parts {
                    v += p.value_gradient(x, &mut g);
                    for i in 0..n {
                        grad[i] += g[i];
                    }
                }
                v
            }
            Spatial::Product(parts) => {
                // running product rule
                let mut v = 1.0;
                grad[..n].fill(0.0);
                let mut g = [0.0; MAX_DIM];
                for p in parts {
                    let pv = p.value_gradient(x, &mut g);
                    for i in 0..n {
                        grad[i] = grad[i] * pv + v * g[i];
                    }
                    v *= pv;
                }
                v
            }
        }
    }

    /// Value, gradient and row-major Hessian; `None` when an expression part
    /// has no closed-form derivatives.
    pub fn value_gradient_hessian(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> Option<f64> {
        let n = x.len();
        match self {
            Spatial::Zero | Spatial::Linear { .. } => {
                hess[..n * n].fill(0.0);
                Some(self.value_gradient(x, grad))
            }
            Spatial::Quadratic { scale, .. } => {
                hess[..n * n].fill(0.0);
                for i in 0..n {
                    hess[i * n + i] = *scale;
                }
                Some(self.value_gradient(x, grad))
            }
            Spatial::Bump {
                center,
                radius,
                height,
                axes,
            } => {
                grad[..n].fill(0.0);
                hess[..n * n].fill(0.0);
                let (v, dv, ddv) = bump_profile_second(bump_s2(x, center, *radius, axes));
                if v == 0.0 {
                    return Some(0.0);
                }
                let r2 = radius * radius;
                let all: Vec<usize> = if axes.is_empty() {
                    (0..n).collect()
                } else {
                    axes.clone()
                };
                for &i in &all {
                    let ui = x[i] - center[i];
                    grad[i] = height * dv * 2.0 * ui / r2;
                    for &j in &all {
                        let uj = x[j] - center[j];
                        let mut h = ddv * 4.0 * ui * uj / (r2 * r2);
                        if i == j {
                            h += dv * 2.0 / r2;
                        }
                        hess[i * n + j] = height * h;
                    }
                }
                Some(height * v)
            }
            Spatial::Plateau(p) => Some(p.value_gradient_hessian(x, grad, hess)),
            Spatial::Custom { .. } => None,
            Spatial::Sum(parts) => {
                grad[..n].fill(0.0);
                hess[..n * n].fill(0.0);
                let mut g = [0.0; MAX_DIM];
                let mut h = [0.0; MAX_DIM * MAX_DIM];
                let mut v = 0.0;
                for p in parts {
                    v += p.value_gradient_hessian(x, &mut g, &mut h)?;
                    for i in 0..n {
                        grad[i] += g[i];
                    }
                    for k in 0..n * n {
                        hess[k] += h[k];
                    }
                }
                Some(v)
            }
            Spatial::Product(parts) => {
                let mut v = 1.0;
                grad[..n].fill(0.0);
                hess[..n * n].fill(0.0);
                let mut g = [0.0; MAX_DIM];
                let mut h = [0.0; MAX_DIM * MAX_DIM];
                for p in parts {
                    let pv = p.value_gradient_hessian(x, &mut g, &mut h)?;
                    for i in 0..n {
                        for j in 0..n {
                            let k = i * n + j;
                            hess[k] = hess[k] * pv + grad[i] * g[j] + g[i] * grad[j] + v * h[k];
                        }
                    }
                    for i in 0..n {
                        grad[i] = grad[i] * pv + v * g[i];
                    }
                    v *= pv;
                }
                Some(v)
            }
        }
    }

    /// Per-axis support hull; `None` means identically zero.
    fn support_intervals(&self, dim: usize) -> Option<Intervals> {
        let full = || vec![(f64::NEG_INFINITY, f64::INFINITY); dim];
        match self {
            Spatial::Zero => None,
            Spatial::Linear { coeffs, .. } => {
                if coeffs.iter().all(|c| *c == 0.0) {
                    None
                } else {
                    Some(full())
                }
            }
            Spatial::Quadratic { scale, .. } => (*scale != 0.0).then(full),
            Spatial::Bump {
                center,
                radius,
                height,
                axes,
            } => {
                if *height == 0.0 || *radius == 0.0 {
                    return None;
                }
                let mut iv = full();
                let mut set = |i: usize| iv[i] = (center[i] - radius, center[i] + radius);
                if axes.is_empty() {
                    (0..dim).for_each(&mut set);
                } else {
                    axes.iter().copied().for_each(&mut set);
                }
                Some(iv)
            }
            Spatial::Plateau(p) => {
                let o = p.outer();
                Some(o.lo.into_iter().zip(o.hi).collect())
            }
            Spatial::Custom { support, .. } => Some(match support {
                Some(b) => b.lo.iter().copied().zip(b.hi.iter().copied()).collect(),
                None => full(),
            }),
            Spatial::Sum(parts) => {
                let mut acc: Option<Intervals> = None;
                for p in parts {
                    if let Some(iv) = p.support_intervals(dim) {
                        acc = Some(match acc {
                            None => iv,
                            Some(a) => a.iter().zip(&iv).map(|(x, y)| (x.0.min(y.0), x.1.max(y.1))).collect(),
                        });
                    }
                }
                acc
            }
            Spatial::Product(parts) => {
                let mut acc = full();
                for p in parts {
                    let iv = p.support_intervals(dim)?;
                    for (a, b) in acc.iter_mut().zip(&iv) {
                        a.0 = a.0.max(b.0);
                        a.1 = a.1.min(b.1);
                        if a.0 > a.1 {
                            return None;
                        }
                    }
                }
                Some(acc)
            }
        }
    }
}

fn bump_s2(x: &[f64], center: &[f64], radius: f64, axes: &[usize]) -> f64 {
    let r2 = radius * radius;
    if axes.is_empty() {
        x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r2
    } else {
        axes.iter()
            .map(|&i| (x[i] - center[i]) * (x[i] - center[i]))
            .sum::<f64>()
            / r2
    }
}

/// Time profile `g(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeProfile {
    Constant(f64),
    Expr(Expr),
}

impl TimeProfile {
    pub fn parse(src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        if e.coordinate_arity() > 0 || e.parameter_arity() > 0 {
            return Err(Error::Contract(format!("time profile `{src}` may only reference t")));
        }
        if !e.uses_time() {
            return Ok(TimeProfile::Constant(e.eval(&Env::default())));
        }
        Ok(TimeProfile::Expr(e))
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant(c) => *c,
            TimeProfile::Expr(e) => e.eval(&Env { x: &[], t, p: &[] }),
        }
    }
}

/// A built-in family instance `g(t) · S(x)`.
#[derive(Debug, Clone)]
pub struct FamilyHamiltonian {
    dim: usize,
    name: String,
    spatial: Spatial,
    profile: TimeProfile,
    support: Option<AxisBox>,
    structure: Option<String>,
}

impl FamilyHamiltonian {
    pub fn from_spatial(dim: usize, name: &str, spatial: Spatial) -> Self {
        let support = match spatial.support_intervals(dim) {
            None => Some(AxisBox::cube(dim, 0.0)),
            Some(iv) if iv.iter().all(|(a, b)| a.is_finite() && b.is_finite()) => Some(AxisBox {
                lo: iv.iter().map(|p| p.0).collect(),
                hi: iv.iter().map(|p| p.1).collect(),
            }),
            Some(_) => None,
        };
        FamilyHamiltonian {
            dim,
            name: name.to_string(),
            spatial,
            profile: TimeProfile::Constant(1.0),
            support,
            structure: None,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_spatial(dim, "zero", Spatial::Zero)
    }

    /// Cutoff translation: a linear function with constant Hamiltonian field
    /// `velocity` on the plateau, centered on the plateau's inner box.
    /// Requires a constant nondegenerate bivector.
    pub fn translation(structure: &PoissonStructure, velocity: &[f64], plateau: Plateau) -> Result<Self> {
        let n = structure.dim();
        crate::error::check_dim(n, velocity.len())?;
        crate::error::check_dim(n, plateau.inner.dim())?;
        let outer = plateau.outer();
        let lam = structure.bivector(&outer.center());
        for corner in outer.corners().iter().take(64) {
            if (structure.bivector(corner) - &lam).amax() > 1e-14 {
                return Err(Error::NotImplemented(format!(
                    "translation family needs a constant bivector; `{}` varies",
                    structure.label()
                )));
            }
        }
        // v_j = Σ_i c_i Λ_ij  ⇔  v = Λᵀ c
        let lt = lam.transpose();
        let c = lt
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(velocity))
            .ok_or_else(|| {
                Error::NotImplemented(format!(
                    "translation family needs a nondegenerate bivector on `{}`",
                    structure.label()
                ))
            })?;
        let spatial = Spatial::Product(vec![
            Spatial::Linear {
                coeffs: c.iter().copied().collect(),
                center: plateau.inner.center(),
            },
            Spatial::Plateau(plateau),
        ]);
        Ok(Self::from_spatial(n, "translation", spatial).for_structure(structure.label()))
    }

    /// `scale · (x_axis − offset) · χ_plateau(x)`.
    pub fn coordinate(dim: usize, axis: usize, scale: f64, offset: f64, plateau: Plateau) -> Result<Self> {
        if axis >= dim {
            return Err(Error::Contract(format!("axis {axis} out of range for dimension {dim}")));
        }
        crate::error::check_dim(dim, plateau.inner.dim())?;
        let mut coeffs = vec![0.0; dim];
        coeffs[axis] = scale;
        let mut center = vec![0.0; dim];
        center[axis] = offset;
        Ok(Self::from_spatial(
            dim,
            "coordinate",
            Spatial::Product(vec![Spatial::Linear { coeffs, center }, Spatial::Plateau(plateau)]),
        ))
    }

    pub fn bump(center: Vec<f64>, radius: f64, height: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Contract(format!("bump radius must be positive, got {radius}")));
        }
        let dim = center.len();
        Ok(Self::from_spatial(
            dim,
            "bump",
            Spatial::Bump {
                center,
                radius,
                height,
                axes: Vec::new(),
            },
        ))
    }

    /// `½ · omega · |x − center|² · χ_plateau(x)`; on the standard plane its flow rotates
    /// about `center` with angular speed `omega` inside the plateau.
    pub fn rotation(center: Vec<f64>, omega: f64, plateau: Plateau) -> Result<Self> {
        let dim = center.len();
        crate::error::check_dim(dim, plateau.inner.dim())?;
        Ok(Self::from_spatial(
            dim,
            "rotation",
            Spatial::Product(vec![
                Spatial::Quadratic { center, scale: omega },
                Spatial::Plateau(plateau),
            ]),
        ))
    }

    /// An expression in `x1..xn` (and `p1..pk`), zero outside `support`.
    pub fn custom(dim: usize, expr: Expr, params: Vec<f64>, support: Option<AxisBox>) -> Result<Self> {
        if expr.coordinate_arity() > dim {
            return Err(Error::Contract(format!(
                "expression `{expr}` references coordinates beyond x{dim}"
            )));
        }
        if expr.parameter_arity() > params.len() {
            return Err(Error::Contract(format!(
                "expression `{expr}` needs {} parameters, got {}",
                expr.parameter_arity(),
                params.len()
            )));
        }
        if expr.uses_time() {
            return Err(Error::Contract(
                "spatial expressions may not use t; put time dependence in the profile".into(),
            ));
        }
        if let Some(b) = &support {
            crate::error::check_dim(dim, b.dim())?;
        }
        Ok(Self::from_spatial(
            dim,
            "custom",
            Spatial::Custom { expr, params, support },
        ))
    }

    pub fn with_profile(mut self, profile: TimeProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn for_structure(mut self, label: &str) -> Self {
        self.structure = Some(label.to_string());
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.spatial = Spatial::Product(vec![
            Spatial::Custom {
                expr: Expr::constant(factor),
                params: vec![],
                support: None,
            },
            self.spatial,
        ]);
        self
    }

    pub fn spatial(&self) -> &Spatial {
        &self.spatial
    }

    pub fn profile(&self) -> &TimeProfile {
        &self.profile
    }

    pub fn spatial_value(&self, x: &[f64]) -> f64 {
        self.spatial.value(x)
    }

    pub fn into_shared(self) -> SharedHamiltonian {
        Arc::new(self)
    }
}

impl Hamiltonian for FamilyHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        let g = self.profile.eval(t);
        if g == 0.0 {
            return 0.0;
        }
        g * self.spatial.value(x)
    }

    fn values_at_times(&self, x: &[f64], ts: &[f64], out: &mut [f64]) {
        let s = self.spatial.value(x);
        for (o, &t) in out.iter_mut().zip(ts) {
            let g = self.profile.eval(t);
            *o = if g == 0.0 { 0.0 } else { g * s };
        }
    }

    fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let g = self.profile.eval(t);
        self.spatial.value_gradient(x, out);
        for v in out.iter_mut().take(self.dim) {
            *v *= g;
        }
    }

    fn hessian(&self, t: f64, x: &[f64], out: &mut [f64]) -> bool {
        let n = self.dim;
        let mut grad = [0.0; MAX_DIM];
        if self.spatial.value_gradient_hessian(x, &mut grad[..n], out).is_none() {
            return false;
        }
        let g = self.profile.eval(t);
        for v in out[..n * n].iter_mut() {
            *v *= g;
        }
        true
    }

    fn support(&self) -> Option<&AxisBox> {
        self.support.as_ref()
    }

    fn structure_label(&self) -> Option<&str> {
        self.structure.as_deref()
    }

    fn is_autonomous(&self) -> bool {
        matches!(self.profile, TimeProfile::Constant(_))
    }

    fn separation(&self) -> Option<Separation<'_>> {
        Some(Separation {
            profile: Box::new(move |t| self.profile.eval(t)),
            spatial: Box::new(move |x| self.spatial.value(x)),
        })
    }

    fn describe(&self) -> String {
        format!("{}[{:?}]", self.name, self.profile)
    }
}

/// `F_L(t, u) = F(t, embed_L(u))` on the coordinates of an affine leaf.
pub struct LeafHamiltonian {
    inner: SharedHamiltonian,
    leaf: LeafChart,
    support: AxisBox,
}

impl LeafHamiltonian {
    pub fn leaf(&self) -> &LeafChart {
        &self.leaf
    }

    pub fn ambient(&self) -> &SharedHamiltonian {
        &self.inner
    }
}

/// Restricts `f` to the leaf `leaf`. Only the affine leaves of built-in
/// structures have a global chart; anything else is not implemented.
pub fn restrict_to_leaf(f: SharedHamiltonian, leaf: &LeafChart) -> Result<LeafHamiltonian> {
    crate::error::check_dim(f.dim(), leaf.base.len())?;
    if leaf.dim == 0 {
        return Err(Error::Contract("cannot restrict to a zero-dimensional leaf".into()));
    }
    if !leaf.affine {
        return Err(Error::NotImplemented(
            "leaf charts exist only for the built-in structures".into(),
        ));
    }
    let bx = f
        .support()
        .ok_or_else(|| Error::Contract("restriction needs a compactly supported Hamiltonian".into()))?;
    // hull of the projected box corners; degenerate when the leaf misses the box
    let mut lo = vec![f64::INFINITY; leaf.dim];
    let mut hi = vec![f64::NEG_INFINITY; leaf.dim];
    for c in bx.corners() {
        for (k, u) in leaf.coordinates(&c).into_iter().enumerate() {
            lo[k] = lo[k].min(u);
            hi[k] = hi[k].max(u);
        }
    }
    let transverse_hit = {
        let mut probe = leaf.embed(&vec![0.0; leaf.dim]);
        // the leaf meets the box iff the projection of the base onto the box
        // differs from it only along leaf directions
        bx.clamp(&mut probe);
        let back = leaf.embed(&leaf.coordinates(&probe));
        probe.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12) || leaf.dim == leaf.base.len()
    };
    let support = if transverse_hit {
        AxisBox { lo, hi }
    } else {
        AxisBox::cube(leaf.dim, 0.0)
    };
    Ok(LeafHamiltonian {
        inner: f,
        leaf: leaf.clone(),
        support,
    })
}

impl Hamiltonian for LeafHamiltonian {
    fn dim(&self) -> usize {
        self.leaf.dim
    }

    fn value(&self, t: f64, u: &[f64]) -> f64 {
        self.inner.value(t, &self.leaf.embed(u))
    }

    fn gradient(&self, t: f64, u: &[f64], out: &mut [f64]) {
        let x = self.leaf.embed(u);
        let mut g = [0.0; MAX_DIM];
        self.inner.gradient(t, &x, &mut g[..x.len()]);
        for (k, b) in self.leaf.basis.iter().enumerate() {
            out[k] = b.iter().zip(&g).map(|(bi, gi)| bi * gi).sum();
        }
    }

    fn support(&self) -> Option<&AxisBox> {
        Some(&self.support)
    }

    fn describe(&self) -> String {
        format!(
            "{} restricted to a {}-dimensional leaf",
            self.inner.describe(),
            self.leaf.dim
        )
    }
}

/// Random instances of the built-in families, for property sweeps.
pub mod random {
    use super::*;

    /// Positive time profiles: constants, `a + b sin(πt)`, `a + b t`.
    pub fn profile<R: Rng>(rng: &mut R) -> TimeProfile {
        match rng.random_range(0..3) {
            0 => TimeProfile::Constant(rng.random_range(0.5..1.5)),
            1 => {
                let a = rng.random_range(0.5..1.0);
                let b = rng.random_range(0.0..0.5);
                TimeProfile::parse(&format!("{a} + {b} * sin(pi * t)")).unwrap()
            }
            _ => {
                let a = rng.random_range(0.5..1.0);
                let b = rng.random_range(-0.4..0.4);
                TimeProfile::parse(&format!("{a} + {b} * t")).unwrap()
            }
        }
    }

    fn point<R: Rng>(rng: &mut R, dim: usize, half: f64) -> Vec<f64> {
        (0..dim).map(|_| rng.random_range(-half..half)).collect()
    }

    /// A bump, a coordinate·plateau or a sum of two bumps on ℝ^dim with a
    /// random positive time profile. Supports lie in `[-2.5, 2.5]^dim`.
    pub fn family<R: Rng>(rng: &mut R, dim: usize) -> FamilyHamiltonian {
        let base = match rng.random_range(0..3) {
            0 => FamilyHamiltonian::bump(
                point(rng, dim, 0.5),
                rng.random_range(0.8..1.5),
                rng.random_range(-1.0..1.0),
            )
            .unwrap(),
            1 => {
                let axis = rng.random_range(0..dim);
                let inner = AxisBox::centered(&point(rng, dim, 0.3), &vec![rng.random_range(0.4..0.9); dim]);
                FamilyHamiltonian::coordinate(
                    dim,
                    axis,
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.3..0.3),
                    Plateau::new(inner, rng.random_range(0.4..0.8)),
                )
                .unwrap()
            }
            _ => {
                let a = Spatial::Bump {
                    center: point(rng, dim, 0.6),
                    radius: rng.random_range(0.7..1.2),
                    height: rng.random_range(0.2..1.0),
                    axes: vec![],
                };
                let b = Spatial::Bump {
                    center: point(rng, dim, 0.6),
                    radius: rng.random_range(0.7..1.2),
                    height: -rng.random_range(0.2..1.0),
                    axes: vec![],
                };
                FamilyHamiltonian::from_spatial(dim, "bump-pair", Spatial::Sum(vec![a, b]))
            }
        };
        base.with_profile(profile(rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson::fd_step;

    fn fd_check(h: &dyn Hamiltonian, t: f64, x: &[f64]) {
        let n = x.len();
        let mut g = vec![0.0; n];
        h.gradient(t, x, &mut g);
        let step = fd_step(x);
        for i in 0..n {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += step;
            b[i] -= step;
            let fd = (h.value(t, &a) - h.value(t, &b)) / (2.0 * step);
            assert!(
                (fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()),
                "axis {i}: {fd} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn analytic_gradients_match_differences() {
        let plane = PoissonStructure::symplectic(1).unwrap();
        let p = Plateau::new(AxisBox::cube(2, 1.0), 0.5);
        let tr = FamilyHamiltonian::translation(&plane, &[1.0, -0.5], p.clone()).unwrap();
        let co = FamilyHamiltonian::coordinate(2, 1, 0.7, 0.1, p.clone()).unwrap();
        let bu = FamilyHamiltonian::bump(vec![0.2, -0.1], 0.9, 1.3).unwrap();
        let ro = FamilyHamiltonian::rotation(vec![0.0, 0.0], 2.0, p).unwrap();
        for h in [&tr, &co, &bu, &ro] {
            for x in [[0.3, 0.1], [1.2, -0.4], [-1.3, 1.1], [0.05, 0.6]] {
                fd_check(h, 0.5, &x);
            }
        }
    }

    #[test]
    fn translation_has_constant_field_on_plateau() {
        let plane = PoissonStructure::symplectic(1).unwrap();
        let p = Plateau::new(AxisBox::cube(2, 2.0), 0.5);
        let h = FamilyHamiltonian::translation(&plane, &[0.7, -0.2], p).unwrap();
        let mut g = [0.0; 2];
        h.gradient(0.0, &[0.4, -1.1], &mut g);
        let mut v = [0.0; 2];
        plane.sharp_into(&[0.4, -1.1], &g, &mut v);
        assert!((v[0] - 0.7).abs() < 1e-15 && (v[1] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn translation_rejects_varying_bivector() {
        let h3 = PoissonStructure::heisenberg();
        let p = Plateau::new(AxisBox::cube(3, 1.0), 0.5);
        assert!(matches!(
            FamilyHamiltonian::translation(&h3, &[1.0, 0.0, 0.0], p),
            Err(Error::NotImplemented(_))
        ));
    }

    #[test]
    fn supports() {
        let bu = FamilyHamiltonian::bump(vec![1.0, 2.0], 0.5, 1.0).unwrap();
        assert_eq!(bu.support().unwrap().lo, vec![0.5, 1.5]);
        let zero = FamilyHamiltonian::zero(3);
        assert_eq!(zero.support().unwrap().widths(), vec![0.0; 3]);
        let lin = FamilyHamiltonian::from_spatial(
            2,
            "lin",
            Spatial::Linear {
                coeffs: vec![1.0, 0.0],
                center: vec![0.0, 0.0],
            },
        );
        assert!(lin.support().is_none());
        // b(x, y) · z · plateau: bump over two axes times a coordinate times a plateau
        let prod = FamilyHamiltonian::from_spatial(
            3,
            "prod",
            Spatial::Product(vec![
                Spatial::Bump {
                    center: vec![0.0; 3],
                    radius: 1.0,
                    height: 1.0,
                    axes: vec![0, 1],
                },
                Spatial::Linear {
                    coeffs: vec![0.0, 0.0, 1.0],
                    center: vec![0.0; 3],
                },
                Spatial::Plateau(Plateau::new(AxisBox::cube(3, 2.0), 0.5)),
            ]),
        );
        let s = prod.support().unwrap();
        assert_eq!(s.lo, vec![-1.0, -1.0, -2.5]);
        fd_check(&prod, 0.0, &[0.2, -0.3, 1.1]);
    }

    #[test]
    fn values_vanish_outside_support() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let h = random::family(&mut rng, 3);
            let b = h.support().unwrap().clone().inflate_relative(0.05);
            for c in b.corners() {
                assert_eq!(h.value(0.3, &c), 0.0);
            }
        }
    }

    #[test]
    fn time_profiles() {
        assert_eq!(TimeProfile::parse("2 * 3").unwrap(), TimeProfile::Constant(6.0));
        let p = TimeProfile::parse("sin(pi * t)").unwrap();
        assert!((p.eval(0.5) - 1.0).abs() < 1e-15);
        assert!(TimeProfile::parse("x1 + t").is_err());
    }

    #[test]
    fn custom_validation() {
        let e = Expr::parse("x3 * p1").unwrap();
        assert!(FamilyHamiltonian::custom(2, e.clone(), vec![1.0], None).is_err());
        assert!(FamilyHamiltonian::custom(3, e.clone(), vec![], None).is_err());
        let ok = FamilyHamiltonian::custom(3, e, vec![2.0], Some(AxisBox::cube(3, 1.0))).unwrap();
        assert_eq!(ok.value(0.0, &[0.0, 0.0, 0.5]), 1.0);
        assert_eq!(ok.value(0.0, &[0.0, 0.0, 1.5]), 0.0);
    }

    use rand::SeedableRng;
}
