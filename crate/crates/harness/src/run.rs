//! Executes a parsed scenario: resolves the structure and Hamiltonians, then
//! runs the experiments in file order, one record each.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use hoferlab_core::cutoff::Plateau;
use hoferlab_core::expr::Expr;
use hoferlab_core::flows::{compose, flatten_boundary, integrate, inverse, pullback, reparametrize, Isotopy, Reparam};
use hoferlab_core::groupoid::{
    check_projection, check_target_fibers, cutoff_hamiltonian, lift_hamiltonian, CutoffSpec, GroupoidRealization,
};
use hoferlab_core::hamiltonian::{random, restrict_to_leaf};
use hoferlab_core::hofer::{
    self, check_displaced, displacement_upper_bound_seeded, gromov_width_lower, leaf_restriction_check, length,
    oscillation, CandidateFamily, DisplacementExperiment, OscillationGrid, SearchBudget, Verdict,
};
use hoferlab_core::ode::IntegratorSpec;
use hoferlab_core::poisson::{Coordinate, ExprField, ScalarField};
use hoferlab_core::sampling::SamplerSpec;
use hoferlab_core::{
    AxisBox, Error, FamilyHamiltonian, Hamiltonian, PoissonStructure, Region, SharedHamiltonian, TimeProfile,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checks::{dist, max_jacobi, random_points};
use crate::error::{invalid, Result};
use crate::output::{PlotData, Record, Status};
use crate::scenario::*;

/// Command-line overrides applied on top of a scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    /// Grid resolution per axis.
    pub grid: Option<usize>,
    /// RK45 tolerance.
    pub tol: Option<f64>,
    /// Fill `runtime_ms`; off by default so reports are byte-stable.
    pub timing: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub records: Vec<Record>,
    pub plots: Vec<PlotData>,
}

impl Report {
    pub fn failed(&self) -> bool {
        self.records.iter().any(|r| r.status == Status::Fail)
    }
}

type CoreResult<T> = hoferlab_core::Result<T>;

struct Context {
    id: String,
    structure: Arc<PoissonStructure>,
    seed: u64,
    grid: OscillationGrid,
    integrator: IntegratorSpec,
    sampler: Option<SamplerDecl>,
    hamiltonians: BTreeMap<String, SharedHamiltonian>,
}

pub fn build_structure(decl: &StructureDecl) -> Result<PoissonStructure> {
    match decl {
        StructureDecl::Label(label) => {
            PoissonStructure::from_label(label).map_err(|e| invalid(format!("structure `{label}`: {e}")))
        }
        StructureDecl::Custom(c) => {
            let entries: Vec<(usize, usize, &str)> = c.entries.iter().map(|e| (e.i, e.j, e.value.as_str())).collect();
            let casimirs = c
                .casimirs
                .iter()
                .map(|s| Expr::parse(s))
                .collect::<CoreResult<Vec<_>>>()
                .map_err(|e| invalid(format!("structure `{}` casimir: {e}", c.label)))?;
            PoissonStructure::custom(&c.label, c.dim, &entries)
                .map(|p| p.with_casimirs(casimirs))
                .map_err(|e| invalid(format!("structure `{}`: {e}", c.label)))
        }
    }
}

fn grid_from(decl: Option<GridDecl>, o: &Overrides) -> Result<OscillationGrid> {
    let mut g = OscillationGrid::default();
    if let Some(d) = decl {
        g.resolution = d.resolution.unwrap_or(g.resolution);
        g.time_nodes = d.time_nodes.unwrap_or(g.time_nodes);
        g.refine = d.refine.unwrap_or(g.refine);
    }
    if let Some(r) = o.grid {
        g.resolution = r;
    }
    g.validate().map_err(|e| invalid(format!("grid: {e}")))?;
    Ok(g)
}

fn integrator_from(decl: Option<&IntegratorDecl>, o: &Overrides) -> Result<IntegratorSpec> {
    let method = decl.and_then(|d| d.method.as_deref()).unwrap_or("rk45");
    let tol = o.tol.or(decl.and_then(|d| d.tol)).unwrap_or(1e-10);
    let spec = match method {
        "rk45" => IntegratorSpec::rk45(tol),
        "rk4" => IntegratorSpec::rk4(decl.and_then(|d| d.steps_per_unit).unwrap_or(1000)),
        other => return Err(invalid(format!("integrator method `{other}` (expected rk45 or rk4)"))),
    };
    spec.validate().map_err(|e| invalid(format!("integrator: {e}")))?;
    Ok(spec)
}

fn plateau(d: &PlateauDecl) -> CoreResult<Plateau> {
    Ok(Plateau::new(AxisBox::new(d.lo.clone(), d.hi.clone())?, d.margin))
}

fn profile(p: &Option<String>) -> CoreResult<TimeProfile> {
    p.as_deref().map_or(Ok(TimeProfile::Constant(1.0)), TimeProfile::parse)
}

fn one_based(axis: usize, dim: usize) -> CoreResult<usize> {
    if axis == 0 || axis > dim {
        return Err(Error::Contract(format!("axis {axis} must lie in 1..={dim}")));
    }
    Ok(axis - 1)
}

/// Per-declaration RNG for `random` Hamiltonians.
fn random_stream(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64))
}

fn build_hamiltonian(decl: &HamiltonianDecl, index: usize, ctx: &Context) -> CoreResult<SharedHamiltonian> {
    let p = &ctx.structure;
    let n = p.dim();
    let label = p.label();
    let get = |k: &str| ctx.hamiltonians[k].clone();
    let family = |h: FamilyHamiltonian, prof: &Option<String>| -> CoreResult<SharedHamiltonian> {
        Ok(h.with_profile(profile(prof)?).for_structure(label).into_shared())
    };
    match decl {
        HamiltonianDecl::Zero => family(FamilyHamiltonian::zero(n), &None),
        HamiltonianDecl::Bump {
            center,
            radius,
            height,
            profile,
        } => {
            check_point(n, center)?;
            family(FamilyHamiltonian::bump(center.clone(), *radius, *height)?, profile)
        }
        HamiltonianDecl::Coordinate {
            axis,
            scale,
            offset,
            plateau: pl,
            profile,
        } => family(
            FamilyHamiltonian::coordinate(n, one_based(*axis, n)?, *scale, *offset, plateau(pl)?)?,
            profile,
        ),
        HamiltonianDecl::Translation {
            velocity,
            plateau: pl,
            profile,
        } => family(FamilyHamiltonian::translation(p, velocity, plateau(pl)?)?, profile),
        HamiltonianDecl::Rotation {
            center,
            omega,
            plateau: pl,
            profile,
        } => {
            check_point(n, center)?;
            family(
                FamilyHamiltonian::rotation(center.clone(), *omega, plateau(pl)?)?,
                profile,
            )
        }
        HamiltonianDecl::Custom {
            expr,
            params,
            support,
            profile,
        } => {
            let support = support
                .as_ref()
                .map(|b| AxisBox::new(b.lo.clone(), b.hi.clone()))
                .transpose()?;
            family(
                FamilyHamiltonian::custom(n, Expr::parse(expr)?, params.clone(), support)?,
                profile,
            )
        }
        HamiltonianDecl::Random => {
            let mut rng = random_stream(ctx.seed, index);
            Ok(random::family(&mut rng, n).for_structure(label).into_shared())
        }
        HamiltonianDecl::Compose { first, second } => {
            Ok(Arc::new(compose(p.clone(), get(first), get(second), ctx.integrator)?))
        }
        HamiltonianDecl::Inverse { of } => Ok(Arc::new(inverse(p.clone(), get(of), ctx.integrator)?)),
        HamiltonianDecl::Pullback { by, of } => {
            let phi = integrate(p.clone(), get(by), ctx.integrator)?;
            Ok(Arc::new(pullback(phi.endpoint(1.0), get(of))?))
        }
        HamiltonianDecl::Reparametrize { of, sigma } => Ok(Arc::new(reparametrize(get(of), Reparam::parse(sigma)?)?)),
        HamiltonianDecl::Flatten { of, delta } => Ok(Arc::new(flatten_boundary(get(of), *delta)?)),
    }
}

/// Declaration names in an order where references come first.
fn build_order(decls: &BTreeMap<String, HamiltonianDecl>) -> Result<Vec<String>> {
    let mut order = Vec::new();
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    fn visit<'a>(
        name: &'a str,
        decls: &'a BTreeMap<String, HamiltonianDecl>,
        state: &mut BTreeMap<&'a str, u8>,
        order: &mut Vec<String>,
    ) -> Result<()> {
        match state.get(name) {
            Some(2) => return Ok(()),
            Some(1) => return Err(invalid(format!("hamiltonian `{name}` refers to itself"))),
            _ => {}
        }
        state.insert(name, 1);
        for r in decls[name].references() {
            if !decls.contains_key(r) {
                return Err(invalid(format!("hamiltonian `{name}` refers to undeclared `{r}`")));
            }
            visit(r, decls, state, order)?;
        }
        state.insert(name, 2);
        order.push(name.to_string());
        Ok(())
    }
    for name in decls.keys() {
        visit(name, decls, &mut state, &mut order)?;
    }
    Ok(order)
}

fn realization(label: &str) -> Result<GroupoidRealization> {
    GroupoidRealization::from_label(label).map_err(|e| invalid(format!("realization `{label}`: {e}")))
}

/// Checks everything that does not need numerics: names, labels, expressions.
fn validate(s: &Scenario) -> Result<()> {
    for (i, x) in s.experiments.iter().enumerate() {
        for h in x.hamiltonians() {
            if !s.hamiltonians.contains_key(h) {
                return Err(invalid(format!(
                    "experiment {i} ({}) refers to undeclared hamiltonian `{h}`",
                    x.op()
                )));
            }
        }
        match x {
            Experiment::GroupoidInvariants { realization: r, .. }
            | Experiment::LiftProjection { realization: r, .. }
            | Experiment::TargetFiber { realization: r, .. }
            | Experiment::CutoffDisplacement { realization: r, .. } => {
                realization(r)?;
            }
            Experiment::Bracket { f, h, .. } => {
                for e in [f, h] {
                    Expr::parse(e).map_err(|err| invalid(format!("experiment {i}: `{e}`: {err}")))?;
                }
            }
            Experiment::HamiltonianField { f, .. } => {
                Expr::parse(f).map_err(|err| invalid(format!("experiment {i}: `{f}`: {err}")))?;
            }
            Experiment::Reparametrization { sigmas: Some(ss), .. } => {
                for sg in ss {
                    Reparam::parse(sg).map_err(|err| invalid(format!("experiment {i}: {err}")))?;
                }
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn run_scenario(s: &Scenario, o: &Overrides) -> Result<Report> {
    let structure = Arc::new(build_structure(&s.structure)?);
    validate(s)?;
    let mut ctx = Context {
        id: s.id.clone(),
        structure,
        seed: o.seed.unwrap_or(s.seed),
        grid: grid_from(s.grid, o)?,
        integrator: integrator_from(s.integrator.as_ref(), o)?,
        sampler: s.sampler,
        hamiltonians: BTreeMap::new(),
    };
    let names: Vec<&String> = s.hamiltonians.keys().collect();
    for name in build_order(&s.hamiltonians)? {
        let index = names.iter().position(|n| **n == name).expect("declared");
        let h = build_hamiltonian(&s.hamiltonians[&name], index, &ctx)
            .map_err(|e| invalid(format!("hamiltonian `{name}`: {e}")))?;
        ctx.hamiltonians.insert(name, h);
    }

    let mut report = Report::default();
    for (index, x) in s.experiments.iter().enumerate() {
        let start = Instant::now();
        let base = Record::new(&ctx.id, index, x.op());
        let mut rec = match execute(&ctx, index, x, base.clone()) {
            Ok((rec, plot)) => {
                report.plots.extend(plot);
                rec
            }
            Err(Error::NotImplemented(msg)) => base.status(Status::NotImplemented).note(msg),
            Err(e) => base.status(Status::Fail).note(e.to_string()),
        };
        if o.timing {
            rec.runtime_ms = Some(start.elapsed().as_millis() as u64);
        }
        report.records.push(rec);
    }
    Ok(report)
}

fn region(d: &RegionDecl) -> CoreResult<Region> {
    match d {
        RegionDecl::Ball { center, radius } => Region::ball(center.clone(), *radius),
        RegionDecl::Box { lo, hi } => Ok(Region::Box(AxisBox::new(lo.clone(), hi.clone())?)),
    }
}

impl Context {
    fn h(&self, name: &str) -> SharedHamiltonian {
        self.hamiltonians[name].clone()
    }

    fn flow(&self, name: &str) -> CoreResult<Isotopy> {
        integrate(self.structure.clone(), self.h(name), self.integrator)
    }

    /// Seed for the experiment at `index`.
    fn stream(&self, index: usize) -> u64 {
        self.seed
            .wrapping_mul(0x2545_F491_4F6C_DD1D)
            .wrapping_add(index as u64 + 1)
    }

    fn sampler(&self, dim: usize) -> SamplerSpec {
        let mut s = if dim > 3 {
            SamplerSpec::coarse()
        } else {
            SamplerSpec::default()
        };
        if let Some(d) = self.sampler {
            s.boundary = d.boundary.unwrap_or(s.boundary);
            s.lattice_per_axis = d.lattice_per_axis.unwrap_or(s.lattice_per_axis);
            s.halton = d.halton.unwrap_or(s.halton);
        }
        s.halton_skip = self.seed % 4096;
        s
    }

    fn candidates(&self, d: &Option<CandidateDecl>) -> CoreResult<CandidateFamily> {
        Ok(match d {
            None | Some(CandidateDecl::CutoffShift { axis: None }) => CandidateFamily::default_for(&self.structure),
            Some(CandidateDecl::CutoffShift { axis: Some(a) }) => CandidateFamily::CutoffShift {
                axis: one_based(*a, self.structure.dim())?,
            },
            Some(CandidateDecl::Rotation) => CandidateFamily::Rotation,
            Some(CandidateDecl::Custom { expr, bounds, support }) => CandidateFamily::Custom {
                expr: Expr::parse(expr)?,
                bounds: AxisBox::new(bounds.lo.clone(), bounds.hi.clone())?,
                support: AxisBox::new(support.lo.clone(), support.hi.clone())?,
            },
        })
    }

    fn experiment(
        &self,
        region: Region,
        candidates: &Option<CandidateDecl>,
        budget: &Option<BudgetDecl>,
    ) -> CoreResult<DisplacementExperiment> {
        let mut x =
            DisplacementExperiment::new(self.structure.clone(), region)?.with_family(self.candidates(candidates)?);
        x.sampler = self.sampler(x.region.dim());
        x.grid = self.grid;
        x.integrator = self.integrator;
        if let Some(b) = budget {
            let d = SearchBudget::default();
            x.budget = SearchBudget {
                coarse_per_axis: b.coarse_per_axis.unwrap_or(d.coarse_per_axis),
                starts: b.starts.unwrap_or(d.starts),
                evals_per_start: b.evals_per_start.unwrap_or(d.evals_per_start),
            };
        }
        Ok(x)
    }
}

fn within(value: f64, expect: Option<f64>, tol: f64) -> bool {
    expect.is_none_or(|e| (value - e).abs() <= tol)
}

fn compare(rec: Record, got: &[f64], expect: &Option<Vec<f64>>, tol: f64) -> Record {
    match expect {
        None => rec.values(got),
        Some(e) if e.len() != got.len() => {
            rec.values(got)
                .status(Status::Fail)
                .note(format!("expected {} components, got {}", e.len(), got.len()))
        }
        Some(e) => {
            let err = dist(got, e);
            rec.values(got).value(err).tolerance(tol).check(err <= tol)
        }
    }
}

fn check_point(dim: usize, x: &[f64]) -> CoreResult<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    Ok(())
}

fn execute(ctx: &Context, index: usize, x: &Experiment, rec: Record) -> CoreResult<(Record, Option<PlotData>)> {
    let p = &ctx.structure;
    let n = p.dim();
    let plot = |name: &str, header: &[&str], rows: Vec<Vec<f64>>| PlotData {
        name: format!("{}.{index}.{name}", ctx.id),
        header: header.iter().map(|s| s.to_string()).collect(),
        rows,
    };
    let rec = match x {
        Experiment::Sharp {
            point,
            covector,
            expect,
            tol,
        } => {
            check_point(n, point)?;
            check_point(n, covector)?;
            let mut out = vec![0.0; n];
            p.sharp_into(point, covector, &mut out);
            compare(rec, &out, expect, tol.unwrap_or(1e-12))
        }
        Experiment::Bracket {
            f,
            h,
            point,
            expect,
            tol,
        } => {
            check_point(n, point)?;
            let (f, h) = (ExprField(Expr::parse(f)?), ExprField(Expr::parse(h)?));
            let v = p.bracket(&f, &h, point)?;
            let tol = tol.unwrap_or(1e-8);
            let rec = rec.value(v);
            match expect {
                Some(e) => rec.tolerance(tol).check((v - e).abs() <= tol),
                None => rec,
            }
        }
        Experiment::HamiltonianField { f, point, expect, tol } => {
            check_point(n, point)?;
            let v = p.hamiltonian_field(&ExprField(Expr::parse(f)?), point)?;
            compare(rec, &v.components, expect, tol.unwrap_or(1e-8))
        }
        Experiment::Jacobi {
            points,
            half,
            functions,
            expect,
            tol,
        } => {
            let pts = random_points(n, points.unwrap_or(1000), half.unwrap_or(2.0), ctx.stream(index));
            let worst = match functions {
                None => max_jacobi(p, &pts)?,
                Some(fs) if fs.len() == 3 => {
                    let fields: Vec<ExprField> = fs
                        .iter()
                        .map(|s| Expr::parse(s).map(ExprField))
                        .collect::<CoreResult<_>>()?;
                    let mut w: f64 = 0.0;
                    for x in &pts {
                        w = w.max(p.jacobi_residual(&fields[0], &fields[1], &fields[2], x)?);
                    }
                    w
                }
                Some(fs) => {
                    return Err(Error::Contract(format!(
                        "jacobi takes three functions, got {}",
                        fs.len()
                    )))
                }
            };
            let rec = rec.value(worst);
            match expect.unwrap_or(Validity::Valid) {
                Validity::Valid => {
                    let tol = tol.unwrap_or(1e-9);
                    rec.tolerance(tol).check(worst < tol)
                }
                Validity::Invalid => {
                    let tol = tol.unwrap_or(1e-3);
                    rec.tolerance(tol)
                        .check(worst > tol)
                        .note("negative control: residual must exceed tolerance")
                }
            }
        }
        Experiment::Leaf { point, expect_dim } => {
            let leaf = p.leaf_at(point)?;
            let rec = rec
                .value(leaf.dim as f64)
                .values(&leaf.basis.concat())
                .note(format!("proper = {}, affine = {}", leaf.proper, leaf.affine));
            match expect_dim {
                Some(d) => rec.check(leaf.dim == *d),
                None => rec,
            }
        }
        Experiment::RestrictToLeaf {
            hamiltonian,
            leaf_point,
            u,
            t,
            expect,
            tol,
        } => {
            let leaf = p.leaf_at(leaf_point)?;
            let fl = restrict_to_leaf(ctx.h(hamiltonian), &leaf)?;
            check_point(fl.dim(), u)?;
            let v = fl.value(*t, u);
            let tol = tol.unwrap_or(1e-9);
            rec.value(v)
                .values(&leaf.embed(u))
                .tolerance(tol)
                .check(within(v, *expect, tol))
        }
        Experiment::Flow {
            hamiltonian,
            point,
            t,
            expect,
            tol,
        } => {
            check_point(n, point)?;
            let y = ctx.flow(hamiltonian)?.evaluate(*t, point)?;
            compare(rec, &y, expect, tol.unwrap_or(1e-8))
        }
        Experiment::RoundTrip {
            hamiltonian,
            points,
            half,
        } => {
            let iso = ctx.flow(hamiltonian)?;
            let tol = 10.0 * ctx.integrator.tolerance();
            let (mut worst, mut ok) = (0.0f64, true);
            for x in random_points(n, points.unwrap_or(20), half.unwrap_or(1.5), ctx.stream(index)) {
                let back = iso.evaluate_inverse(1.0, &iso.evaluate(1.0, &x)?)?;
                let e = dist(&back, &x);
                worst = worst.max(e);
                ok &= e <= tol * (1.0 + x.iter().map(|v| v.abs()).sum::<f64>());
            }
            rec.value(worst)
                .tolerance(tol)
                .check(ok)
                .note("error bound scales with 1 + |x|_1")
        }
        Experiment::Conservation {
            hamiltonian,
            points,
            half,
            tol,
            energy_tol,
        } => {
            let f = ctx.h(hamiltonian);
            let iso = ctx.flow(hamiltonian)?;
            let ts = [0.25, 0.5, 0.75, 1.0];
            let (mut casimir, mut energy) = (0.0f64, 0.0f64);
            let auto = f.is_autonomous();
            for x in random_points(n, points.unwrap_or(20), half.unwrap_or(1.5), ctx.stream(index)) {
                let c0: Vec<f64> = p.casimirs().iter().map(|c| ExprField(c.clone()).value(&x)).collect();
                let e0 = f.value(0.0, &x);
                for (y, t) in iso.trajectory(&x, &ts)?.iter().zip(ts) {
                    for (c, v0) in p.casimirs().iter().zip(&c0) {
                        casimir = casimir.max((ExprField(c.clone()).value(y) - v0).abs());
                    }
                    if auto {
                        energy = energy.max((f.value(t, y) - e0).abs());
                    }
                }
            }
            let (tol, etol) = (tol.unwrap_or(1e-8), energy_tol.unwrap_or(1e-7));
            let mut rec = rec
                .value(casimir.max(energy))
                .values(&[casimir, energy])
                .tolerance(tol)
                .check(casimir < tol && energy < etol);
            if p.casimirs().is_empty() {
                rec = rec.note("structure declares no Casimirs");
            }
            if !auto {
                rec = rec.note("time-dependent Hamiltonian: energy not checked");
            }
            rec
        }
        Experiment::GroupLaws {
            f,
            h,
            points,
            half,
            tol,
        } => {
            let s = ctx.integrator;
            let phi_f = ctx.flow(f)?;
            let phi_h = ctx.flow(h)?;
            let phi_fh = integrate(p.clone(), Arc::new(compose(p.clone(), ctx.h(f), ctx.h(h), s)?), s)?;
            let phi_fbar = integrate(p.clone(), Arc::new(inverse(p.clone(), ctx.h(f), s)?), s)?;
            let phi_pulled = integrate(p.clone(), Arc::new(pullback(phi_f.endpoint(1.0), ctx.h(h))?), s)?;
            let mut worst = [0.0f64; 3];
            for x in random_points(n, points.unwrap_or(50), half.unwrap_or(1.5), ctx.stream(index)) {
                let fx = phi_f.evaluate(1.0, &x)?;
                worst[0] = worst[0].max(dist(
                    &phi_fh.evaluate(1.0, &x)?,
                    &phi_f.evaluate(1.0, &phi_h.evaluate(1.0, &x)?)?,
                ));
                worst[1] = worst[1].max(dist(&phi_fbar.evaluate(1.0, &fx)?, &x));
                let conj = phi_f.evaluate_inverse(1.0, &phi_h.evaluate(1.0, &fx)?)?;
                worst[2] = worst[2].max(dist(&phi_pulled.evaluate(1.0, &x)?, &conj));
            }
            let tol = tol.unwrap_or(1e-6);
            let m = worst.iter().cloned().fold(0.0, f64::max);
            rec.value(m)
                .values(&worst)
                .tolerance(tol)
                .check(m < tol)
                .note("values: compose, inverse, pullback endpoint errors")
        }
        Experiment::Reparametrization {
            hamiltonian,
            sigmas,
            points,
            tol,
        } => {
            let f = ctx.h(hamiltonian);
            let base = length(f.as_ref(), &ctx.grid)?.value;
            let orig = ctx.flow(hamiltonian)?;
            let names = sigmas
                .clone()
                .unwrap_or_else(|| vec!["identity".into(), "square".into(), "cosine".into()]);
            let pts = random_points(n, points.unwrap_or(10), 1.5, ctx.stream(index));
            let (mut dl, mut dx) = (Vec::new(), 0.0f64);
            for sg in &names {
                let fs: SharedHamiltonian = Arc::new(reparametrize(f.clone(), Reparam::parse(sg)?)?);
                dl.push((length(fs.as_ref(), &ctx.grid)?.value - base).abs());
                let iso = integrate(p.clone(), fs, ctx.integrator)?;
                for x in &pts {
                    dx = dx.max(dist(&iso.evaluate(1.0, x)?, &orig.evaluate(1.0, x)?));
                }
            }
            let tol = tol.unwrap_or(1e-6);
            let m = dl.iter().cloned().fold(dx, f64::max);
            rec.value(m)
                .values(&dl)
                .tolerance(tol)
                .grid(ctx.grid.resolution_for(n), ctx.grid.time_nodes)
                .check(m < tol)
                .note(format!(
                    "values: length changes for {}; endpoint error {dx:.3e}",
                    names.join(", ")
                ))
        }
        Experiment::FlattenBoundary {
            hamiltonian,
            delta,
            points,
            tol,
        } => {
            let f = ctx.h(hamiltonian);
            let flat: SharedHamiltonian = Arc::new(flatten_boundary(f.clone(), *delta)?);
            let orig = ctx.flow(hamiltonian)?;
            let iso = integrate(p.clone(), flat.clone(), ctx.integrator)?;
            let (mut end, mut still) = (0.0f64, 0.0f64);
            for x in random_points(n, points.unwrap_or(10), 1.5, ctx.stream(index)) {
                end = end.max(dist(&iso.evaluate(1.0, &x)?, &orig.evaluate(1.0, &x)?));
                for t in [0.25 * delta, 0.5 * delta, *delta] {
                    still = still.max(dist(&iso.evaluate(t, &x)?, &x));
                }
            }
            let dl = (length(flat.as_ref(), &ctx.grid)?.value - length(f.as_ref(), &ctx.grid)?.value).abs();
            let tol = tol.unwrap_or(1e-6);
            rec.values(&[end, still, dl])
                .value(end.max(still).max(dl))
                .tolerance(tol)
                .check(end < tol && still < tol && dl < tol)
                .note("values: endpoint error, motion on [0, delta], length change")
        }
        Experiment::Oscillation {
            hamiltonian,
            t,
            expect,
            tol,
        } => {
            let f = ctx.h(hamiltonian);
            let support = f
                .support()
                .ok_or_else(|| Error::Contract(format!("`{hamiltonian}` is not compactly supported")))?
                .clone();
            let o = oscillation(&|y| f.value(*t, y), &support, &ctx.grid)?;
            let tol = tol.unwrap_or(1e-6);
            rec.value(o.value())
                .bounds(o.min, o.max)
                .tolerance(tol)
                .grid(ctx.grid.resolution_for(n), ctx.grid.time_nodes)
                .check(within(o.value(), *expect, tol))
        }
        Experiment::Length {
            hamiltonian,
            expect,
            tol,
        } => {
            let r = length(ctx.h(hamiltonian).as_ref(), &ctx.grid)?;
            let tol = tol.unwrap_or(1e-6);
            let rows = r.times.iter().zip(&r.oscillations).map(|(t, o)| vec![*t, *o]).collect();
            let rec = rec
                .value(r.value)
                .tolerance(tol)
                .grid(ctx.grid.resolution_for(n), ctx.grid.time_nodes)
                .check(within(r.value, *expect, tol));
            return Ok((rec, Some(plot("oscillation", &["t", "oscillation"], rows))));
        }
        Experiment::PseudoNorm { f, h, tol } => {
            let g = &ctx.grid;
            let s = ctx.integrator;
            let lf = length(ctx.h(f).as_ref(), g)?.value;
            let lh = length(ctx.h(h).as_ref(), g)?.value;
            let lfh = length(&compose(p.clone(), ctx.h(f), ctx.h(h), s)?, g)?.value;
            let lbar = length(&inverse(p.clone(), ctx.h(f), s)?, g)?.value;
            let lpull = length(&pullback(ctx.flow(f)?.endpoint(1.0), ctx.h(h))?, g)?.value;
            let tri = lfh - lf - lh;
            let (inv, pb) = ((lbar - lf).abs(), (lpull - lh).abs());
            let tol = tol.unwrap_or(1e-6);
            rec.values(&[tri, inv, pb])
                .value(tri.max(inv).max(pb))
                .tolerance(tol)
                .grid(g.resolution_for(n), g.time_nodes)
                .check(tri <= tol && inv <= tol && pb <= tol)
                .note(format!(
                    "values: l(F#H) - l(F) - l(H), |l(F-bar) - l(F)|, |l(f*H) - l(H)|; l(F) = {lf:.6}, l(H) = {lh:.6}"
                ))
        }
        Experiment::CheckDisplaced {
            hamiltonian,
            region: rd,
            t,
            expect,
        } => {
            let u = region(rd)?;
            let iso = ctx.flow(hamiltonian)?;
            let d = check_displaced(&|y| iso.evaluate(*t, y), &u, &ctx.sampler(u.dim()))?;
            let rec = rec
                .value(d.margin)
                .margin(d.margin)
                .tolerance(d.resolution)
                .note(format!("{} on {} samples", d.verdict.as_str(), d.samples));
            match (d.verdict, expect) {
                (Verdict::DisplacedUnverified, _) => rec.status(Status::Inconclusive),
                (v, Some(ExpectDisplaced::Displaced)) => rec.check(v == Verdict::Displaced),
                (v, Some(ExpectDisplaced::NotDisplaced)) => rec.check(v == Verdict::NotDisplaced),
                (_, None) => rec,
            }
        }
        Experiment::DisplacementUpperBound {
            region: rd,
            candidates,
            budget,
            superset,
            expect_range,
            expect_infinite,
            min_margin,
        } => {
            let mut seeds = Vec::new();
            let mut notes = Vec::new();
            if let Some(v) = superset {
                let v = region(v)?;
                let u = region(rd)?;
                if !u.is_subset_of(&v) {
                    return Err(Error::Contract("superset must contain the region".into()));
                }
                let sup = displacement_upper_bound_seeded(&ctx.experiment(v, candidates, budget)?, &[])?;
                notes.push(format!("superset upper bound {}", crate::output::Num(sup.upper)));
                seeds.extend(sup.witness);
            }
            let xp = ctx.experiment(region(rd)?, candidates, budget)?;
            let est = displacement_upper_bound_seeded(&xp, &seeds)?;
            let mut rec = rec
                .value(est.upper)
                .bounds(est.lower, est.upper)
                .grid(ctx.grid.resolution_for(n), ctx.grid.time_nodes);
            if let Some(w) = &est.witness {
                rec = rec.witness(&w.params);
            }
            if let Some(d) = &est.displacement {
                rec = rec.margin(d.margin);
            }
            for note in notes.into_iter().chain(est.notes.iter().cloned()) {
                rec = rec.note(note);
            }
            let margin_ok = min_margin.is_none_or(|m| est.displacement.as_ref().is_some_and(|d| d.margin > m));
            let status = if *expect_infinite {
                if est.upper.is_infinite() {
                    Status::Pass
                } else {
                    Status::Fail
                }
            } else if est.upper.is_infinite() {
                Status::Inconclusive
            } else if expect_range.is_none_or(|[lo, hi]| lo <= est.upper && est.upper <= hi) && margin_ok {
                Status::Pass
            } else {
                Status::Fail
            };
            let mut header: Vec<String> = xp.family.parameter_names();
            header.push("objective".into());
            let rows = est
                .landscape
                .iter()
                .map(|(params, v)| params.iter().cloned().chain([*v]).collect())
                .collect();
            let plot = PlotData {
                name: format!("{}.{index}.landscape", ctx.id),
                header,
                rows,
            };
            return Ok((rec.status(status), Some(plot)));
        }
        Experiment::GromovWidth {
            region: rd,
            leaf_point,
            expect,
            tol,
        } => {
            let u = region(rd)?;
            let leaf = leaf_point.as_ref().map(|x| p.leaf_at(x)).transpose()?;
            let c = gromov_width_lower(&u, p, leaf.as_ref())?;
            let tol = tol.unwrap_or(1e-9);
            rec.value(c).tolerance(tol).check(within(c, *expect, tol))
        }
        Experiment::EnergyCapacityCheck {
            region: rd,
            candidates,
            budget,
        } => {
            let xp = ctx.experiment(region(rd)?, candidates, budget)?;
            let r = hofer::energy_capacity_check(&xp)?;
            let mut rec = rec
                .value(r.half_capacity)
                .bounds(r.half_capacity, r.estimate.upper)
                .grid(ctx.grid.resolution_for(n), ctx.grid.time_nodes)
                .check(r.holds)
                .note("half capacity <= displacement energy upper bound");
            if let Some(w) = &r.estimate.witness {
                rec = rec.witness(&w.params);
            }
            if let Some(d) = &r.estimate.displacement {
                rec = rec.margin(d.margin);
            }
            for note in &r.estimate.notes {
                rec = rec.note(note.clone());
            }
            rec
        }
        Experiment::LeafRestriction {
            hamiltonian,
            leaf_point,
            expect_leaf_length,
            tol,
        } => {
            let leaf = p.leaf_at(leaf_point)?;
            let r = leaf_restriction_check(ctx.h(hamiltonian), &leaf, &ctx.grid)?;
            let tol = tol.unwrap_or(1e-9);
            rec.value(r.leaf_length)
                .values(&[r.leaf_length, r.ambient_length])
                .bounds(r.leaf_length, r.ambient_length)
                .grid(ctx.grid.resolution_for(n), ctx.grid.time_nodes)
                .check(r.holds && within(r.leaf_length, *expect_leaf_length, tol))
                .note("values: leaf length, ambient length")
        }
        Experiment::GroupoidInvariants {
            realization: label,
            samples,
            half,
            tol,
        } => {
            let r = GroupoidRealization::from_label(label)?;
            let m = r.base_dim();
            let pts = r.sample_points(samples.unwrap_or(200), half.unwrap_or(1.5), ctx.stream(index));
            let (mut s, mut t, mut unit) = (0.0f64, 0.0f64, 0.0f64);
            for g in &pts {
                for i in 0..m {
                    for j in (i + 1)..m {
                        s = s.max(r.source_morphism_residual(&Coordinate(i), &Coordinate(j), g)?);
                        t = t.max(r.target_antimorphism_residual(&Coordinate(i), &Coordinate(j), g)?);
                    }
                }
                let x = r.source(g);
                let u = r.unit(&x);
                unit = unit.max(dist(&r.source(&u), &x)).max(dist(&r.target(&u), &x));
            }
            let jac = max_jacobi(r.total(), &pts[..pts.len().min(20)])?;
            let tol = tol.unwrap_or(1e-6);
            rec.values(&[s, t, jac, unit])
                .value(s.max(t))
                .tolerance(tol)
                .check(s < tol && t < tol && jac < 1e-9 && unit < 1e-12)
                .note("values: s Poisson, t anti-Poisson, total-chart Jacobi (20 samples), unit sections")
        }
        Experiment::LiftProjection {
            realization: label,
            hamiltonian,
            samples,
            half,
            times,
            tol,
        }
        | Experiment::TargetFiber {
            realization: label,
            hamiltonian,
            samples,
            half,
            times,
            tol,
        } => {
            let r = GroupoidRealization::from_label(label)?;
            let pts = r.sample_points(samples.unwrap_or(100), half.unwrap_or(1.5), ctx.stream(index));
            let f = ctx.h(hamiltonian);
            let rep = if matches!(x, Experiment::LiftProjection { .. }) {
                check_projection(&r, f, &pts, times, ctx.integrator)?
            } else {
                check_target_fibers(&r, f, &pts, times, ctx.integrator)?
            };
            let tol = tol.unwrap_or(1e-6);
            rec.value(rep.max_residual)
                .tolerance(tol)
                .check(rep.max_residual < tol)
                .note(format!("{} samples", rep.samples))
        }
        Experiment::CutoffDisplacement {
            realization: label,
            hamiltonian,
            ball,
            pad,
            margin,
            tol,
        } => {
            let r = GroupoidRealization::from_label(label)?;
            let f = ctx.h(hamiltonian);
            let b = region(ball)?;
            let s = ctx.integrator;
            let lifted_flow = integrate(r.total().clone(), Arc::new(lift_hamiltonian(&r, f.clone())?), s)?;
            let cutoff = CutoffSpec::covering_path(&lifted_flow, &b, pad.unwrap_or(0.1), margin.unwrap_or(0.3))?;
            let fl = Arc::new(cutoff_hamiltonian(&r, f.clone(), cutoff, s)?);
            let flow = integrate(r.total().clone(), fl.clone(), s)?;
            let d = check_displaced(&|y| flow.evaluate(1.0, y), &b, &ctx.sampler(b.dim()))?;
            let lf = length(f.as_ref(), &ctx.grid)?.value;
            let ll = length(fl.as_ref(), &ctx.grid)?.value;
            let tol = tol.unwrap_or(1e-6);
            let rec = rec
                .value(ll)
                .values(&[lf, ll])
                .margin(d.margin)
                .tolerance(tol)
                .grid(ctx.grid.resolution_for(r.total_dim()), ctx.grid.time_nodes)
                .note(format!("{}; values: length(F), length(F^lambda)", d.verdict.as_str()));
            match d.verdict {
                Verdict::DisplacedUnverified => rec.status(Status::Inconclusive),
                v => rec.check(v == Verdict::Displaced && ll <= lf + tol),
            }
        }
    };
    Ok((rec, None))
}
