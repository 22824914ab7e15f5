//! Hamiltonian isotopies and the algebra of Hamiltonian paths.
//!
//! An [`Isotopy`] integrates `ẋ = ♯(dF_t)(x)` on demand; nothing is cached.
//! Composite Hamiltonians (`F # H`, `F̄`, `f*F`) evaluate the flows they
//! depend on lazily, and their gradients carry the flow Jacobian obtained
//! from the variational equation `J̇ = DX · J`.

use std::sync::Arc;

use crate::cutoff::{smooth_step, smooth_step_derivative};
use crate::error::{check_dim, Error, Result};
use crate::expr::{Env, Expr};
use crate::hamiltonian::{Hamiltonian, Separation, SharedHamiltonian};
use crate::ode::{self, IntegratorSpec};
use crate::poisson::{fd_step, PoissonStructure};
use crate::region::AxisBox;
use crate::MAX_DIM;

/// The flow `{φ_F^t}` of a time-dependent Hamiltonian.
#[derive(Clone)]
pub struct Isotopy {
    structure: Arc<PoissonStructure>,
    generator: SharedHamiltonian,
    spec: IntegratorSpec,
}

impl std::fmt::Debug for Isotopy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Isotopy")
            .field("structure", &self.structure.label())
            .field("generator", &self.generator.describe())
            .field("spec", &self.spec)
            .finish()
    }
}

/// Builds the isotopy generated by `f` on `structure`.
pub fn integrate(structure: Arc<PoissonStructure>, f: SharedHamiltonian, spec: IntegratorSpec) -> Result<Isotopy> {
    Isotopy::new(structure, f, spec)
}

impl Isotopy {
    pub fn new(structure: Arc<PoissonStructure>, generator: SharedHamiltonian, spec: IntegratorSpec) -> Result<Self> {
        check_dim(structure.dim(), generator.dim())?;
        if let Some(label) = generator.structure_label() {
            if label != structure.label() {
                return Err(Error::Contract(format!(
                    "Hamiltonian declared for `{label}` used on `{}`",
                    structure.label()
                )));
            }
        }
        spec.validate()?;
        Ok(Isotopy {
            structure,
            generator,
            spec,
        })
    }

    pub fn structure(&self) -> &Arc<PoissonStructure> {
        &self.structure
    }

    pub fn generator(&self) -> &SharedHamiltonian {
        &self.generator
    }

    pub fn spec(&self) -> &IntegratorSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    /// `X_{F_t}(x) = ♯ dF_t(x)`.
    pub fn field(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let mut g = [0.0; MAX_DIM];
        self.generator.gradient(t, x, &mut g[..n]);
        self.structure.sharp_into(x, &g[..n], out);
    }

    /// Points off the generator's support box never move.
    pub fn is_stationary_at(&self, x: &[f64]) -> bool {
        self.generator.support().is_some_and(|b| b.excludes(x))
    }

    /// The flow from time `t0` to `t1`, i.e. `φ^{t1} ∘ (φ^{t0})⁻¹ (x)`.
    pub fn flow_between(&self, t0: f64, t1: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        if t0 == t1 || self.is_stationary_at(x) {
            return Ok(x.to_vec());
        }
        ode::solve(&|t, y, out| self.field(t, y, out), t0, t1, x, &self.spec)
    }

    /// `φ_F^t(x)`.
    pub fn evaluate(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.flow_between(0.0, t, x)
    }

    /// `(φ_F^t)⁻¹(x)` by backward integration.
    pub fn evaluate_inverse(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.flow_between(t, 0.0, x)
    }

    /// `φ_F^t(x)` at each of the ascending times `ts ⊂ [0, ∞)`, along one trajectory.
    pub fn trajectory(&self, x: &[f64], ts: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_dim(self.dim(), x.len())?;
        if self.is_stationary_at(x) {
            return Ok(vec![x.to_vec(); ts.len()]);
        }
        ode::solve_stops(&|t, y, out| self.field(t, y, out), 0.0, x, ts, &self.spec)
    }

    /// `(φ_F^t)⁻¹(x)` for each `t` in `ts`. An autonomous generator shares one
    /// backward trajectory; otherwise each time is a separate solve.
    pub fn inverse_at_times(&self, x: &[f64], ts: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_dim(self.dim(), x.len())?;
        if self.is_stationary_at(x) {
            return Ok(vec![x.to_vec(); ts.len()]);
        }
        let ascending = ts.windows(2).all(|w| w[0] <= w[1]) && ts.first().is_none_or(|t| *t >= 0.0);
        if self.generator.is_autonomous() && ascending {
            let back: Vec<f64> = ts.iter().map(|t| -t).collect();
            return ode::solve_stops(&|t, y, out| self.field(t, y, out), 0.0, x, &back, &self.spec);
        }
        ts.iter().map(|&t| self.evaluate_inverse(t, x)).collect()
    }

    /// `DX_t(x)`, row-major. Uses the generator's Hessian when it has one,
    /// otherwise central differences of the field.
    pub fn field_jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let mut hess = [0.0; MAX_DIM * MAX_DIM];
        if self.generator.hessian(t, x, &mut hess[..n * n]) {
            // X_j = Σ_i ∂_i F Λ_ij, so ∂_k X_j = Σ_i ∂_ik F Λ_ij + Σ_i ∂_i F ∂_k Λ_ij
            let mut lam = [0.0; MAX_DIM * MAX_DIM];
            self.structure.bivector_into(x, &mut lam);
            for j in 0..n {
                for k in 0..n {
                    out[j * n + k] = (0..n).map(|i| hess[i * n + k] * lam[i * n + j]).sum();
                }
            }
            if !self.structure.is_constant() {
                let mut g = [0.0; MAX_DIM];
                self.generator.gradient(t, x, &mut g[..n]);
                let h = fd_step(x);
                let mut y = [0.0; MAX_DIM];
                let (mut a, mut b) = ([0.0; MAX_DIM * MAX_DIM], [0.0; MAX_DIM * MAX_DIM]);
                y[..n].copy_from_slice(x);
                for k in 0..n {
                    y[k] = x[k] + h;
                    self.structure.bivector_into(&y[..n], &mut a);
                    y[k] = x[k] - h;
                    self.structure.bivector_into(&y[..n], &mut b);
                    y[k] = x[k];
                    for j in 0..n {
                        let d: f64 = (0..n).map(|i| g[i] * (a[i * n + j] - b[i * n + j])).sum();
                        out[j * n + k] += d / (2.0 * h);
                    }
                }
            }
            return;
        }
        let h = fd_step(x);
        let mut y = [0.0; MAX_DIM];
        let mut a = [0.0; MAX_DIM];
        let mut b = [0.0; MAX_DIM];
        y[..n].copy_from_slice(x);
        for k in 0..n {
            y[k] = x[k] + h;
            self.field(t, &y[..n], &mut a[..n]);
            y[k] = x[k] - h;
            self.field(t, &y[..n], &mut b[..n]);
            y[k] = x[k];
            for i in 0..n {
                out[i * n + k] = (a[i] - b[i]) / (2.0 * h);
            }
        }
    }

    /// Flow from `t0` to `t1` together with its Jacobian (row-major `n × n`).
    pub fn flow_with_jacobian(&self, t0: f64, t1: f64, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        check_dim(n, x.len())?;
        let mut eye = vec![0.0; n * n];
        for i in 0..n {
            eye[i * n + i] = 1.0;
        }
        if t0 == t1 || self.is_stationary_at(x) {
            return Ok((x.to_vec(), eye));
        }
        let mut z0 = x.to_vec();
        z0.extend_from_slice(&eye);
        let rhs = |t: f64, z: &[f64], dz: &mut [f64]| {
            let (xs, js) = z.split_at(n);
            let (dx, dj) = dz.split_at_mut(n);
            self.field(t, xs, dx);
            let mut a = [0.0; MAX_DIM * MAX_DIM];
            self.field_jacobian(t, xs, &mut a[..n * n]);
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += a[i * n + k] * js[k * n + j];
                    }
                    dj[i * n + j] = s;
                }
            }
        };
        let z = ode::solve(&rhs, t0, t1, &z0, &self.spec)?;
        let (xs, js) = z.split_at(n);
        Ok((xs.to_vec(), js.to_vec()))
    }

    /// The time-`t` map as a standalone diffeomorphism.
    pub fn endpoint(&self, t: f64) -> Endpoint {
        Endpoint {
            isotopy: self.clone(),
            time: t,
        }
    }
}

/// A Poisson diffeomorphism stored as the time-`time` map of an isotopy.
#[derive(Debug, Clone)]
pub struct Endpoint {
    pub isotopy: Isotopy,
    pub time: f64,
}

impl Endpoint {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.isotopy.evaluate(self.time, x)
    }

    pub fn apply_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.isotopy.evaluate_inverse(self.time, x)
    }

    pub fn apply_with_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.isotopy.flow_with_jacobian(0.0, self.time, x)
    }

    /// The box outside which the map is the identity (`None`: unbounded).
    pub fn moved_region(&self) -> Option<&AxisBox> {
        self.isotopy.generator.support()
    }
}

fn union_support(a: Option<&AxisBox>, b: Option<&AxisBox>) -> Option<AxisBox> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.union(b)),
        _ => None,
    }
}

// rows of Jᵀ g, i.e. out_k = Σ_i g_i J_ik
fn covector_pullback(jac: &[f64], g: &[f64], out: &mut [f64]) {
    let n = g.len();
    for k in 0..n {
        out[k] = (0..n).map(|i| g[i] * jac[i * n + k]).sum();
    }
}

fn nan_if_err(r: Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

/// `(F # H)_t = F_t + H_t ∘ (φ_F^t)⁻¹`, generating `φ_F^t ∘ φ_H^t`.
///
/// Integration failures inside evaluation surface as NaN values, which the
/// integrators and oscillation grids report as errors.
pub struct Composed {
    flow: Isotopy,
    second: SharedHamiltonian,
    support: Option<AxisBox>,
    label: String,
}

/// `F # H` on `structure`.
pub fn compose(
    structure: Arc<PoissonStructure>,
    f: SharedHamiltonian,
    h: SharedHamiltonian,
    spec: IntegratorSpec,
) -> Result<Composed> {
    check_dim(f.dim(), h.dim())?;
    let label = structure.label().to_string();
    let flow = Isotopy::new(structure, f, spec)?;
    if let Some(l) = h.structure_label() {
        if l != label {
            return Err(Error::Contract(format!(
                "cannot compose across structures `{l}` and `{label}`"
            )));
        }
    }
    // φ_F preserves F's support box and fixes everything outside it, so
    // φ_F(supp H) stays inside the union of the two boxes.
    let support = union_support(flow.generator.support(), h.support());
    Ok(Composed {
        flow,
        second: h,
        support,
        label,
    })
}

impl Composed {
    pub fn first_flow(&self) -> &Isotopy {
        &self.flow
    }
}

impl Hamiltonian for Composed {
    fn dim(&self) -> usize {
        self.flow.dim()
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        let f = self.flow.generator.value(t, x);
        nan_if_err(self.flow.evaluate_inverse(t, x).map(|y| f + self.second.value(t, &y)))
    }

    fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        self.flow.generator.gradient(t, x, out);
        if self.flow.is_stationary_at(x) {
            let mut g = [0.0; MAX_DIM];
            self.second.gradient(t, x, &mut g[..n]);
            for i in 0..n {
                out[i] += g[i];
            }
            return;
        }
        let y = match self.flow.evaluate_inverse(t, x) {
            Ok(y) => y,
            Err(_) => return out[..n].fill(f64::NAN),
        };
        let mut g = [0.0; MAX_DIM];
        self.second.gradient(t, &y, &mut g[..n]);
        if g[..n].iter().all(|v| *v == 0.0) {
            return;
        }
        let jac = match self.flow.flow_with_jacobian(t, 0.0, x) {
            Ok((_, j)) => j,
            Err(_) => return out[..n].fill(f64::NAN),
        };
        let mut p = [0.0; MAX_DIM];
        covector_pullback(&jac, &g[..n], &mut p[..n]);
        for i in 0..n {
            out[i] += p[i];
        }
    }

    fn values_at_times(&self, x: &[f64], ts: &[f64], out: &mut [f64]) {
        match self.flow.inverse_at_times(x, ts) {
            Ok(ys) => {
                for (k, (&t, y)) in ts.iter().zip(&ys).enumerate() {
                    out[k] = self.flow.generator.value(t, x) + self.second.value(t, y);
                }
            }
            Err(_) => out.fill(f64::NAN),
        }
    }

    fn support(&self) -> Option<&AxisBox> {
        self.support.as_ref()
    }

    fn structure_label(&self) -> Option<&str> {
        Some(&self.label)
    }

    fn describe(&self) -> String {
        format!("({}) # ({})", self.flow.generator.describe(), self.second.describe())
    }
}

/// `F̄_t = −F_t ∘ φ_F^t`, generating `(φ_F^t)⁻¹`.
pub struct Inverted {
    flow: Isotopy,
    support: Option<AxisBox>,
    label: String,
}

pub fn inverse(structure: Arc<PoissonStructure>, f: SharedHamiltonian, spec: IntegratorSpec) -> Result<Inverted> {
    let label = structure.label().to_string();
    let flow = Isotopy::new(structure, f, spec)?;
    let support = flow.generator.support().cloned();
    Ok(Inverted { flow, support, label })
}

impl Hamiltonian for Inverted {
    fn dim(&self) -> usize {
        self.flow.dim()
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        nan_if_err(self.flow.evaluate(t, x).map(|y| -self.flow.generator.value(t, &y)))
    }

    fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        if self.flow.is_stationary_at(x) {
            return out[..n].fill(0.0);
        }
        let (y, jac) = match self.flow.flow_with_jacobian(0.0, t, x) {
            Ok(r) => r,
            Err(_) => return out[..n].fill(f64::NAN),
        };
        let mut g = [0.0; MAX_DIM];
        self.flow.generator.gradient(t, &y, &mut g[..n]);
        covector_pullback(&jac, &g[..n], out);
        for v in out[..n].iter_mut() {
            *v = -*v;
        }
    }

    fn values_at_times(&self, x: &[f64], ts: &[f64], out: &mut [f64]) {
        let ascending = ts.windows(2).all(|w| w[0] <= w[1]);
        if !ascending {
            for (o, &t) in out.iter_mut().zip(ts) {
                *o = self.value(t, x);
            }
            return;
        }
        match self.flow.trajectory(x, ts) {
            Ok(ys) => {
                for (k, (&t, y)) in ts.iter().zip(&ys).enumerate() {
                    out[k] = -self.flow.generator.value(t, y);
                }
            }
            Err(_) => out.fill(f64::NAN),
        }
    }

    fn support(&self) -> Option<&AxisBox> {
        self.support.as_ref()
    }

    fn structure_label(&self) -> Option<&str> {
        Some(&self.label)
    }

    fn describe(&self) -> String {
        format!("inverse({})", self.flow.generator.describe())
    }
}

/// `(f*F)_t = F_t ∘ f` for a stored Poisson diffeomorphism `f`.
pub struct Pullback {
    map: Endpoint,
    inner: SharedHamiltonian,
    support: Option<AxisBox>,
    label: String,
}

pub fn pullback(f: Endpoint, h: SharedHamiltonian) -> Result<Pullback> {
    check_dim(f.isotopy.dim(), h.dim())?;
    let label = f.isotopy.structure.label().to_string();
    if let Some(l) = h.structure_label() {
        if l != label {
            return Err(Error::Contract(format!(
                "cannot pull back `{l}` Hamiltonian by a `{label}` map"
            )));
        }
    }
    // f⁻¹(supp F) ⊂ supp F ∪ (region moved by f)
    let support = union_support(h.support(), f.moved_region());
    Ok(Pullback {
        map: f,
        inner: h,
        support,
        label,
    })
}

impl Hamiltonian for Pullback {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        nan_if_err(self.map.apply(x).map(|y| self.inner.value(t, &y)))
    }

    fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        if self.map.isotopy.is_stationary_at(x) {
            return self.inner.gradient(t, x, out);
        }
        let y = match self.map.apply(x) {
            Ok(y) => y,
            Err(_) => return out[..n].fill(f64::NAN),
        };
        let mut g = [0.0; MAX_DIM];
        self.inner.gradient(t, &y, &mut g[..n]);
        if g[..n].iter().all(|v| *v == 0.0) {
            return out[..n].fill(0.0);
        }
        match self.map.apply_with_jacobian(x) {
            Ok((_, jac)) => covector_pullback(&jac, &g[..n], out),
            Err(_) => out[..n].fill(f64::NAN),
        }
    }

    fn is_autonomous(&self) -> bool {
        self.inner.is_autonomous()
    }

    fn values_at_times(&self, x: &[f64], ts: &[f64], out: &mut [f64]) {
        match self.map.apply(x) {
            Ok(y) => self.inner.values_at_times(&y, ts, out),
            Err(_) => out.fill(f64::NAN),
        }
    }

    fn support(&self) -> Option<&AxisBox> {
        self.support.as_ref()
    }

    fn structure_label(&self) -> Option<&str> {
        Some(&self.label)
    }

    fn separation(&self) -> Option<Separation<'_>> {
        let inner = self.inner.separation()?;
        let spatial = inner.spatial;
        Some(Separation {
            profile: inner.profile,
            spatial: Box::new(move |x| match self.map.apply(x) {
                Ok(y) => spatial(&y),
                Err(_) => f64::NAN,
            }),
        })
    }

    fn describe(&self) -> String {
        format!("pullback({})", self.inner.describe())
    }
}

/// A smooth non-decreasing surjection `σ : [0, 1] → [0, 1]` with its derivative.
#[derive(Debug, Clone, PartialEq)]
pub enum Reparam {
    Identity,
    /// `t²`
    Square,
    /// `(1 − cos πt) / 2`
    Cosine,
    /// Constant on `[0, δ]` and `[1 − δ, 1]`, a C^∞ step in between.
    Flatten {
        delta: f64,
    },
    Custom {
        sigma: Expr,
        derivative: Expr,
    },
}

impl Reparam {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "identity" | "t" => Ok(Reparam::Identity),
            "square" | "t^2" => Ok(Reparam::Square),
            "cosine" => Ok(Reparam::Cosine),
            other => Err(Error::UnknownLabel(format!("reparametrization `{other}`"))),
        }
    }

    /// `(σ(t), σ′(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        use std::f64::consts::PI;
        match self {
            Reparam::Identity => (t, 1.0),
            Reparam::Square => (t * t, 2.0 * t),
            Reparam::Cosine => ((1.0 - (PI * t).cos()) / 2.0, PI * (PI * t).sin() / 2.0),
            Reparam::Flatten { delta } => {
                let w = 1.0 - 2.0 * delta;
                let u = (t - delta) / w;
                (smooth_step(u), smooth_step_derivative(u) / w)
            }
            Reparam::Custom { sigma, derivative } => {
                let env = Env { x: &[], t, p: &[] };
                (sigma.eval(&env), derivative.eval(&env))
            }
        }
    }

    /// Checks surjectivity onto `[0, 1]` (1e−12) and monotonicity on a fine grid.
    pub fn validate(&self) -> Result<()> {
        if let Reparam::Flatten { delta } = self {
            if !(*delta > 0.0 && *delta < 0.5) {
                return Err(Error::Contract(format!(
                    "flattening width must lie in (0, 1/2), got {delta}"
                )));
            }
        }
        let (s0, _) = self.eval(0.0);
        let (s1, _) = self.eval(1.0);
        if s0.abs() > 1e-12 || (s1 - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!(
                "reparametrization must map [0, 1] onto [0, 1]; σ(0) = {s0}, σ(1) = {s1}"
            )));
        }
        for k in 0..=1024 {
            let (_, d) = self.eval(k as f64 / 1024.0);
            if !(d >= -1e-12) {
                return Err(Error::Contract(format!(
                    "reparametrization must be non-decreasing; σ′ = {d} at t = {}",
                    k as f64 / 1024.0
                )));
            }
        }
        Ok(())
    }
}

/// `F^σ(t, x) = σ′(t) F(σ(t), x)`, generating `{φ_F^{σ(t)}}`.
pub struct Reparametrized {
    inner: SharedHamiltonian,
    sigma: Reparam,
}

pub fn reparametrize(f: SharedHamiltonian, sigma: Reparam) -> Result<Reparametrized> {
    sigma.validate()?;
    Ok(Reparametrized { inner: f, sigma })
}

/// `F^{σ_δ}` for the built-in flattening step: stationary on `[0, δ]` and `[1 − δ, 1]`.
pub fn flatten_boundary(f: SharedHamiltonian, delta: f64) -> Result<Reparametrized> {
    reparametrize(f, Reparam::Flatten { delta })
}

impl Reparametrized {
    pub fn sigma(&self) -> &Reparam {
        &self.sigma
    }
}

impl Hamiltonian for Reparametrized {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        let (s, d) = self.sigma.eval(t);
        if d == 0.0 {
            return 0.0;
        }
        d * self.inner.value(s, x)
    }

    fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let (s, d) = self.sigma.eval(t);
        if d == 0.0 {
            return out[..x.len()].fill(0.0);
        }
        self.inner.gradient(s, x, out);
        for v in out[..x.len()].iter_mut() {
            *v *= d;
        }
    }

    fn hessian(&self, t: f64, x: &[f64], out: &mut [f64]) -> bool {
        let n = x.len();
        let (s, d) = self.sigma.eval(t);
        if d == 0.0 {
            out[..n * n].fill(0.0);
            return true;
        }
        if !self.inner.hessian(s, x, out) {
            return false;
        }
        for v in out[..n * n].iter_mut() {
            *v *= d;
        }
        true
    }

    fn is_autonomous(&self) -> bool {
        self.sigma == Reparam::Identity && self.inner.is_autonomous()
    }

    fn values_at_times(&self, x: &[f64], ts: &[f64], out: &mut [f64]) {
        let sd: Vec<(f64, f64)> = ts.iter().map(|&t| self.sigma.eval(t)).collect();
        let ss: Vec<f64> = sd.iter().map(|p| p.0).collect();
        self.inner.values_at_times(x, &ss, out);
        for (o, (_, d)) in out.iter_mut().zip(&sd) {
            *o = if *d == 0.0 { 0.0 } else { *o * d };
        }
    }

    fn support(&self) -> Option<&AxisBox> {
        self.inner.support()
    }

    fn structure_label(&self) -> Option<&str> {
        self.inner.structure_label()
    }

    fn separation(&self) -> Option<Separation<'_>> {
        let inner = self.inner.separation()?;
        let g = inner.profile;
        Some(Separation {
            profile: Box::new(move |t| {
                let (s, d) = self.sigma.eval(t);
                if d == 0.0 {
                    0.0
                } else {
                    d * g(s)
                }
            }),
            spatial: inner.spatial,
        })
    }

    fn describe(&self) -> String {
        format!("{}^{:?}", self.inner.describe(), self.sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoff::Plateau;
    use crate::hamiltonian::FamilyHamiltonian;

    fn plane() -> Arc<PoissonStructure> {
        Arc::new(PoissonStructure::symplectic(1).unwrap())
    }

    fn y_translation(a: f64) -> SharedHamiltonian {
        FamilyHamiltonian::coordinate(2, 1, a, 0.0, Plateau::new(AxisBox::cube(2, 3.0), 0.5))
            .unwrap()
            .into_shared()
    }

    #[test]
    fn closed_form_field_jacobian_matches_differences() {
        use crate::hamiltonian::Spatial;
        let spatial = Spatial::Sum(vec![
            Spatial::Bump {
                center: vec![0.1, -0.2, 0.3],
                radius: 1.1,
                height: 0.7,
                axes: vec![],
            },
            Spatial::Product(vec![
                Spatial::Linear {
                    coeffs: vec![0.0, 0.5, 0.0],
                    center: vec![0.0; 3],
                },
                Spatial::Plateau(Plateau::new(AxisBox::cube(3, 0.4), 0.5)),
            ]),
        ]);
        let f = FamilyHamiltonian::from_spatial(3, "mixed", spatial).into_shared();
        let iso = integrate(Arc::new(PoissonStructure::heisenberg()), f, IntegratorSpec::default()).unwrap();
        for x in [[0.5, 0.2, 0.6], [-0.6, 0.1, 0.7], [0.2, -0.65, -0.3]] {
            let mut jac = [0.0; 9];
            iso.field_jacobian(0.5, &x, &mut jac);
            for k in 0..3 {
                let (mut a, mut b) = (x, x);
                a[k] += 1e-6;
                b[k] -= 1e-6;
                let (mut fa, mut fb) = ([0.0; 3], [0.0; 3]);
                iso.field(0.5, &a, &mut fa);
                iso.field(0.5, &b, &mut fb);
                for j in 0..3 {
                    let fd = (fa[j] - fb[j]) / 2e-6;
                    assert!(
                        (fd - jac[j * 3 + k]).abs() < 1e-6,
                        "{x:?} d{k} X{j}: {fd} vs {}",
                        jac[j * 3 + k]
                    );
                }
            }
        }
    }

    #[test]
    fn identity_at_time_zero_and_off_support() {
        let iso = integrate(plane(), y_translation(1.0), IntegratorSpec::default()).unwrap();
        assert_eq!(iso.evaluate(0.0, &[0.3, 0.2]).unwrap(), vec![0.3, 0.2]);
        assert_eq!(iso.evaluate(1.0, &[5.0, 0.0]).unwrap(), vec![5.0, 0.0]);
    }

    #[test]
    fn translation_flow_closed_form() {
        let iso = integrate(plane(), y_translation(1.0), IntegratorSpec::default()).unwrap();
        for t in [0.25, 0.5, 1.0] {
            let x = iso.evaluate(t, &[0.0, 0.0]).unwrap();
            assert!((x[0] + t).abs() < 1e-8 && x[1].abs() < 1e-8);
        }
    }

    #[test]
    fn jacobian_of_translation_is_identity() {
        let iso = integrate(plane(), y_translation(0.7), IntegratorSpec::default()).unwrap();
        let (y, j) = iso.flow_with_jacobian(0.0, 1.0, &[0.1, 0.2]).unwrap();
        assert!((y[0] - (0.1 - 0.7)).abs() < 1e-9);
        for (a, b) in j.iter().zip([1.0, 0.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn jacobian_matches_differences_of_the_flow() {
        let f = FamilyHamiltonian::bump(vec![0.2, -0.1], 1.5, 1.0)
            .unwrap()
            .into_shared();
        let iso = integrate(plane(), f, IntegratorSpec::default()).unwrap();
        let x = [0.4, 0.3];
        let (_, j) = iso.flow_with_jacobian(0.0, 1.0, &x).unwrap();
        let h = 1e-5;
        for k in 0..2 {
            let mut a = x;
            let mut b = x;
            a[k] += h;
            b[k] -= h;
            let ya = iso.evaluate(1.0, &a).unwrap();
            let yb = iso.evaluate(1.0, &b).unwrap();
            for i in 0..2 {
                let fd = (ya[i] - yb[i]) / (2.0 * h);
                assert!((fd - j[i * 2 + k]).abs() < 1e-5, "{fd} vs {}", j[i * 2 + k]);
            }
        }
    }

    #[test]
    fn compose_and_inverse_of_translations_on_the_plateau() {
        let spec = IntegratorSpec::default();
        let c = compose(plane(), y_translation(0.4), y_translation(0.3), spec).unwrap();
        let v = c.value(0.5, &[0.2, 0.9]);
        assert!((v - 0.7 * 0.9).abs() < 1e-9);
        let inv = inverse(plane(), y_translation(0.4), spec).unwrap();
        assert!((inv.value(0.5, &[0.2, 0.9]) + 0.4 * 0.9).abs() < 1e-9);
    }

    #[test]
    fn reparametrizations_validate() {
        for s in [
            Reparam::Identity,
            Reparam::Square,
            Reparam::Cosine,
            Reparam::Flatten { delta: 0.1 },
        ] {
            s.validate().unwrap();
        }
        assert!(Reparam::Flatten { delta: 0.5 }.validate().is_err());
        let bad = Reparam::Custom {
            sigma: Expr::parse("t / 2").unwrap(),
            derivative: Expr::parse("1 / 2").unwrap(),
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn flattened_flow_is_stationary_near_the_ends() {
        let f = y_translation(1.0);
        let flat: SharedHamiltonian = Arc::new(flatten_boundary(f, 0.1).unwrap());
        let iso = integrate(plane(), flat, IntegratorSpec::default()).unwrap();
        assert_eq!(iso.evaluate(0.05, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let end = iso.evaluate(1.0, &[0.0, 0.0]).unwrap();
        assert!((end[0] + 1.0).abs() < 1e-6);
    }
}
