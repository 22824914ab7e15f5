//! Property checks shared by the suites and the acceptance tests. Each
//! function runs one family of invariants at full size and reports the worst
//! observed value against its threshold.

use std::f64::consts::PI;
use std::sync::Arc;

use hoferlab_core::cutoff::Plateau;
use hoferlab_core::flows::{compose, flatten_boundary, integrate, inverse, pullback, reparametrize, Reparam};
use hoferlab_core::groupoid::{
    check_projection, check_target_fibers, cotangent_heisenberg, cutoff_hamiltonian, lift_hamiltonian, pair_groupoid,
    CutoffSpec, GroupoidRealization,
};
use hoferlab_core::hamiltonian::random;
use hoferlab_core::hofer::{
    check_displaced, displacement_upper_bound, gromov_width_lower, leaf_restriction_check, length,
    DisplacementExperiment, OscillationGrid,
};
use hoferlab_core::ode::IntegratorSpec;
use hoferlab_core::poisson::{Coordinate, FnField};
use hoferlab_core::sampling::SamplerSpec;
use hoferlab_core::{AxisBox, FamilyHamiltonian, PoissonStructure, Region, SharedHamiltonian, TimeProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed value.
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value < threshold`.
    fn below(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed: value < threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    fn above(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed: value > threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    fn failed(name: &str, err: impl std::fmt::Display) -> Self {
        Check {
            name: name.to_string(),
            passed: false,
            value: f64::NAN,
            threshold: f64::NAN,
            detail: err.to_string(),
        }
    }
}

type Outcome = hoferlab_core::Result<Check>;

fn settle(name: &str, r: Outcome) -> Check {
    r.unwrap_or_else(|e| Check::failed(name, e))
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Uniform points in `[-half, half]^n`.
pub fn random_points(n: usize, count: usize, half: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.random_range(-half..half)).collect())
        .collect()
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn plane() -> Arc<PoissonStructure> {
    Arc::new(PoissonStructure::symplectic(1).unwrap())
}

/// Max Jacobi residual over coordinate triples at the given points.
pub fn max_jacobi(p: &PoissonStructure, points: &[Vec<f64>]) -> hoferlab_core::Result<f64> {
    let n = p.dim();
    let mut worst: f64 = 0.0;
    for x in points {
        for a in 0..n {
            for b in (a + 1)..n {
                for c in (b + 1)..n {
                    let r = p.jacobi_residual(&Coordinate(a), &Coordinate(b), &Coordinate(c), x)?;
                    worst = worst.max(r);
                }
            }
        }
    }
    Ok(worst)
}

pub fn poisson_validity(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let builtins = [
        PoissonStructure::symplectic(1).unwrap(),
        PoissonStructure::symplectic(2).unwrap(),
        PoissonStructure::heisenberg(),
        PoissonStructure::product_2x1(),
    ];
    for (k, p) in builtins.iter().enumerate() {
        let name = format!("jacobi {}", p.label());
        let pts = random_points(p.dim(), 1000, 2.0, seed ^ (k as u64 + 1));
        out.push(settle(
            &name,
            max_jacobi(p, &pts).map(|v| Check::below(&name, v, 1e-9, "coordinate triples, 1000 points in [-2, 2]^n")),
        ));
    }
    let name = "jacobi negative control";
    let bad = PoissonStructure::custom("corrupted", 3, &[(1, 2, "x2"), (2, 3, "1")]);
    out.push(settle(
        name,
        bad.and_then(|bad| {
            let pts = random_points(3, 1000, 2.0, seed ^ 99);
            max_jacobi(&bad, &pts)
        })
        .map(|v| Check::above(name, v, 1e-3, "x2 d1^d2 + d2^d3 must violate Jacobi")),
    ));
    out
}

pub fn flow_oracle(_seed: u64) -> Vec<Check> {
    let spec = IntegratorSpec::default();
    let times = [0.25, 0.5, 1.0];
    let starts = [[0.0, 0.0], [0.3, -0.4], [-0.7, 0.2]];

    let name = "translation flow on R^2";
    let translation = || -> Outcome {
        let p = plane();
        let v = [0.8, -0.5];
        let f = FamilyHamiltonian::translation(&p, &v, Plateau::new(AxisBox::cube(2, 3.0), 0.5))?;
        let iso = integrate(p, f.into_shared(), spec)?;
        let mut worst: f64 = 0.0;
        for x in starts {
            for t in times {
                let y = iso.evaluate(t, &x)?;
                worst = worst.max(dist(&y, &[x[0] + t * v[0], x[1] + t * v[1]]));
            }
        }
        Ok(Check::below(name, worst, 1e-8, "x + t v at t in {0.25, 0.5, 1}"))
    };
    let name_h = "heisenberg linear flow";
    let heisenberg = || -> Outcome {
        let p = Arc::new(PoissonStructure::heisenberg());
        let f = FamilyHamiltonian::coordinate(3, 0, 1.0, 0.0, Plateau::new(AxisBox::cube(3, 3.0), 0.5))?
            .for_structure(p.label());
        let iso = integrate(p, f.into_shared(), spec)?;
        let mut worst: f64 = 0.0;
        for x in [[0.0, 0.0, 0.8], [0.2, -0.3, 1.0], [-0.5, 0.4, -0.6]] {
            for t in times {
                let y = iso.evaluate(t, &x)?;
                worst = worst.max(dist(&y, &[x[0], x[1] + t * x[2], x[2]]));
            }
        }
        Ok(Check::below(name_h, worst, 1e-8, "F = x1: (x1, x2 + t x3, x3)"))
    };
    vec![settle(name, translation()), settle(name_h, heisenberg())]
}

pub fn conservation(seed: u64) -> Vec<Check> {
    let spec = IntegratorSpec::default();
    let ts = [0.25, 0.5, 0.75, 1.0];
    let mut out = Vec::new();
    for (k, p) in [PoissonStructure::heisenberg(), PoissonStructure::product_2x1()]
        .into_iter()
        .enumerate()
    {
        let name = format!("casimir drift {}", p.label());
        let p = Arc::new(p);
        let mut r = rng(seed, 30 + k as u64);
        let mut run = || -> Outcome {
            let mut worst: f64 = 0.0;
            for _ in 0..50 {
                let f = random::family(&mut r, 3).for_structure(p.label()).into_shared();
                let iso = integrate(p.clone(), f, spec)?;
                for x in random_points(3, 5, 1.5, r.random()) {
                    for y in iso.trajectory(&x, &ts)? {
                        worst = worst.max((y[2] - x[2]).abs());
                    }
                }
            }
            Ok(Check::below(
                &name,
                worst,
                1e-8,
                "x3 along 50 random family flows, 5 points each",
            ))
        };
        out.push(settle(&name, run()));
    }
    let name = "energy drift";
    let mut r = rng(seed, 32);
    let mut run = || -> Outcome {
        let mut worst: f64 = 0.0;
        for k in 0..50 {
            let (p, n) = if k % 2 == 0 {
                (plane(), 2)
            } else {
                (Arc::new(PoissonStructure::heisenberg()), 3)
            };
            let f: SharedHamiltonian = random::family(&mut r, n)
                .with_profile(TimeProfile::Constant(1.0))
                .for_structure(p.label())
                .into_shared();
            let iso = integrate(p, f.clone(), spec)?;
            for x in random_points(n, 5, 1.5, r.random()) {
                let y = iso.evaluate(1.0, &x)?;
                worst = worst.max((f.value(1.0, &y) - f.value(0.0, &x)).abs());
            }
        }
        Ok(Check::below(
            name,
            worst,
            1e-7,
            "time-independent F along its own flow, 50 instances",
        ))
    };
    out.push(settle(name, run()));
    out
}

pub fn group_laws(seed: u64) -> Vec<Check> {
    let spec = IntegratorSpec::default();
    let mut r = rng(seed, 40);
    let p = plane();
    let mut worst = [0.0f64; 3];
    let mut run = || -> hoferlab_core::Result<()> {
        for _ in 0..10 {
            let f = random::family(&mut r, 2).into_shared();
            let h = random::family(&mut r, 2).into_shared();
            let phi_f = integrate(p.clone(), f.clone(), spec)?;
            let phi_h = integrate(p.clone(), h.clone(), spec)?;
            let phi_fh = integrate(
                p.clone(),
                Arc::new(compose(p.clone(), f.clone(), h.clone(), spec)?),
                spec,
            )?;
            let phi_fbar = integrate(p.clone(), Arc::new(inverse(p.clone(), f.clone(), spec)?), spec)?;
            let phi_pulled = integrate(p.clone(), Arc::new(pullback(phi_f.endpoint(1.0), h.clone())?), spec)?;
            for x in random_points(2, 50, 1.5, r.random()) {
                let fx = phi_f.evaluate(1.0, &x)?;
                let lhs = phi_fh.evaluate(1.0, &x)?;
                let rhs = phi_f.evaluate(1.0, &phi_h.evaluate(1.0, &x)?)?;
                worst[0] = worst[0].max(dist(&lhs, &rhs));
                worst[1] = worst[1].max(dist(&phi_fbar.evaluate(1.0, &fx)?, &x));
                let conj = phi_f.evaluate_inverse(1.0, &phi_h.evaluate(1.0, &fx)?)?;
                worst[2] = worst[2].max(dist(&phi_pulled.evaluate(1.0, &x)?, &conj));
            }
        }
        Ok(())
    };
    match run() {
        Ok(()) => vec![
            Check::below(
                "compose endpoint",
                worst[0],
                1e-6,
                "phi_{F#H} = phi_F o phi_H, 10 pairs x 50 points",
            ),
            Check::below("inverse endpoint", worst[1], 1e-6, "phi_{F-bar} o phi_F = id"),
            Check::below("pullback endpoint", worst[2], 1e-6, "phi_{f*H} = f^-1 o phi_H o f"),
        ],
        Err(e) => vec![Check::failed("group laws", e)],
    }
}

pub fn reparametrization(seed: u64) -> Vec<Check> {
    let spec = IntegratorSpec::default();
    let grid = OscillationGrid::default();
    let mut r = rng(seed, 50);
    let p = plane();
    let name = "length under reparametrization";
    let mut lengths = || -> Outcome {
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let f = random::family(&mut r, 2).into_shared();
            let base = length(f.as_ref(), &grid)?.value;
            for sigma in [Reparam::Identity, Reparam::Square, Reparam::Cosine] {
                let fs = reparametrize(f.clone(), sigma)?;
                worst = worst.max((length(&fs, &grid)?.value - base).abs());
            }
        }
        Ok(Check::below(
            name,
            worst,
            1e-6,
            "sigma in {t, t^2, (1 - cos pi t)/2}, 10 Hamiltonians",
        ))
    };
    let mut out = vec![settle(name, lengths())];

    let mut r = rng(seed, 51);
    let delta = 0.1;
    let mut worst = [0.0f64; 2];
    let mut flat = || -> hoferlab_core::Result<()> {
        for _ in 0..10 {
            let f = random::family(&mut r, 2).into_shared();
            let orig = integrate(p.clone(), f.clone(), spec)?;
            let iso = integrate(p.clone(), Arc::new(flatten_boundary(f, delta)?), spec)?;
            for x in random_points(2, 10, 1.5, r.random()) {
                worst[0] = worst[0].max(dist(&iso.evaluate(1.0, &x)?, &orig.evaluate(1.0, &x)?));
                for t in [0.25 * delta, 0.5 * delta, delta] {
                    worst[1] = worst[1].max(dist(&iso.evaluate(t, &x)?, &x));
                }
            }
        }
        Ok(())
    };
    match flat() {
        Ok(()) => {
            out.push(Check::below(
                "flatten endpoint",
                worst[0],
                1e-6,
                "delta = 0.1, 10 Hamiltonians",
            ));
            out.push(Check::below(
                "flatten stationary on [0, delta]",
                worst[1],
                1e-12,
                "phi^t = id",
            ));
        }
        Err(e) => out.push(Check::failed("flatten boundary", e)),
    }
    out
}

pub fn pseudo_norm(seed: u64) -> Vec<Check> {
    let spec = IntegratorSpec::default();
    let grid = OscillationGrid::default();
    let mut r = rng(seed, 60);
    let p = plane();
    let mut worst = [f64::NEG_INFINITY, 0.0, 0.0];
    let mut run = || -> hoferlab_core::Result<()> {
        for _ in 0..20 {
            let f = random::family(&mut r, 2).into_shared();
            let h = random::family(&mut r, 2).into_shared();
            let lf = length(f.as_ref(), &grid)?.value;
            let lh = length(h.as_ref(), &grid)?.value;
            let l = length(&compose(p.clone(), f.clone(), h.clone(), spec)?, &grid)?.value;
            worst[0] = worst[0].max(l - lf - lh);
            let l = length(&inverse(p.clone(), f.clone(), spec)?, &grid)?.value;
            worst[1] = worst[1].max((l - lf).abs());
            let phi = integrate(p.clone(), f.clone(), spec)?;
            let l = length(&pullback(phi.endpoint(1.0), h.clone())?, &grid)?.value;
            worst[2] = worst[2].max((l - lh).abs());
        }
        Ok(())
    };
    match run() {
        Ok(()) => vec![
            Check::below("triangle", worst[0], 1e-6, "l(F#H) - l(F) - l(H), 20 pairs"),
            Check::below("inverse symmetry", worst[1], 1e-6, "|l(F-bar) - l(F)|"),
            Check::below("pullback invariance", worst[2], 1e-6, "|l(f*H) - l(H)|"),
        ],
        Err(e) => vec![Check::failed("pseudo-norm", e)],
    }
}

pub fn leaf_restriction(seed: u64) -> Vec<Check> {
    let grid = OscillationGrid::default();
    let mut out = Vec::new();
    for (k, p) in [PoissonStructure::heisenberg(), PoissonStructure::product_2x1()]
        .into_iter()
        .enumerate()
    {
        let name = format!("leaf restriction {}", p.label());
        let mut r = rng(seed, 70 + k as u64);
        let mut run = || -> Outcome {
            // worst excess of leaf length over ambient length
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..50 {
                let f = random::family(&mut r, 3).for_structure(p.label()).into_shared();
                let base = [
                    r.random_range(-1.0..1.0),
                    r.random_range(-1.0..1.0),
                    r.random_range(-1.0..1.0),
                ];
                let leaf = p.leaf_at(&base)?;
                let rep = leaf_restriction_check(f, &leaf, &grid)?;
                worst = worst.max(rep.leaf_length - rep.ambient_length);
            }
            Ok(Check::below(
                &name,
                worst,
                1e-12,
                "l(F_L) - l(F) over 50 random Hamiltonians",
            ))
        };
        out.push(settle(&name, run()));
    }
    out
}

/// Outcome of the disk search, kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskSearch {
    pub upper: f64,
    pub lower: f64,
    pub margin: f64,
    pub witness: Vec<f64>,
}

pub fn disk_search() -> hoferlab_core::Result<DiskSearch> {
    let u = Region::ball(vec![0.0, 0.0], 0.5)?;
    let x = DisplacementExperiment::new(plane(), u)?;
    let est = displacement_upper_bound(&x)?;
    Ok(DiskSearch {
        upper: est.upper,
        lower: est.lower,
        margin: est.displacement.as_ref().map_or(f64::NAN, |d| d.margin),
        witness: est.witness.map(|w| w.params).unwrap_or_default(),
    })
}

pub fn energy_capacity(_seed: u64) -> Vec<Check> {
    let lo = 0.5 * PI * 0.25;
    match disk_search() {
        Ok(d) => {
            let in_range = d.upper.is_finite() && d.upper >= lo && d.upper <= 1.1;
            vec![
                Check {
                    name: "disk r = 0.5 upper bound".into(),
                    passed: in_range,
                    value: d.upper,
                    threshold: 1.1,
                    detail: format!("within [{lo:.4}, 1.1]; lower = {:.4}; witness {:?}", d.lower, d.witness),
                },
                Check::above("disk witness margin", d.margin, 0.01, "verified displacement"),
            ]
        }
        Err(e) => vec![Check::failed("disk search", e)],
    }
}

fn realizations() -> Vec<GroupoidRealization> {
    vec![
        pair_groupoid(&PoissonStructure::symplectic(1).unwrap()).unwrap(),
        cotangent_heisenberg(),
    ]
}

pub fn groupoid_lift(seed: u64) -> Vec<Check> {
    let spec = IntegratorSpec::default();
    let times = [0.25, 0.5, 0.75, 1.0];
    let mut out = Vec::new();
    for (k, r) in realizations().into_iter().enumerate() {
        let m = r.base_dim();
        let mut g = rng(seed, 90 + k as u64);
        let label = r.label().to_string();
        let mut run = || -> hoferlab_core::Result<(f64, f64)> {
            let samples = r.sample_points(100, 1.5, g.random());
            let mut fams: Vec<SharedHamiltonian> = (0..4)
                .map(|_| random::family(&mut g, m).for_structure(r.base().label()).into_shared())
                .collect();
            fams.push(
                FamilyHamiltonian::coordinate(m, 0, 1.0, 0.0, Plateau::new(AxisBox::cube(m, 2.0), 0.5))?
                    .for_structure(r.base().label())
                    .into_shared(),
            );
            let (mut proj, mut fib) = (0.0f64, 0.0f64);
            for f in fams {
                proj = proj.max(check_projection(&r, f.clone(), &samples, &times, spec)?.max_residual);
                fib = fib.max(check_target_fibers(&r, f, &samples, &times, spec)?.max_residual);
            }
            Ok((proj, fib))
        };
        match run() {
            Ok((p, t)) => {
                out.push(Check::below(
                    &format!("projection {label}"),
                    p,
                    1e-6,
                    "100 samples, 5 families",
                ));
                out.push(Check::below(
                    &format!("target fibers {label}"),
                    t,
                    1e-6,
                    "100 samples, 5 families",
                ));
            }
            Err(e) => out.push(Check::failed(&format!("lifts {label}"), e)),
        }

        let mut morph = || -> hoferlab_core::Result<(f64, f64)> {
            let (mut s, mut t) = (0.0f64, 0.0f64);
            for x in r.sample_points(200, 1.5, g.random()) {
                for i in 0..m {
                    for j in (i + 1)..m {
                        s = s.max(r.source_morphism_residual(&Coordinate(i), &Coordinate(j), &x)?);
                        t = t.max(r.target_antimorphism_residual(&Coordinate(i), &Coordinate(j), &x)?);
                    }
                }
            }
            Ok((s, t))
        };
        match morph() {
            Ok((s, t)) => {
                out.push(Check::below(
                    &format!("s Poisson {label}"),
                    s,
                    1e-6,
                    "coordinate pairs, 200 samples",
                ));
                out.push(Check::below(
                    &format!("t anti-Poisson {label}"),
                    t,
                    1e-6,
                    "coordinate pairs, 200 samples",
                ));
            }
            Err(e) => out.push(Check::failed(&format!("morphisms {label}"), e)),
        }
    }

    let name = "heisenberg bracket through s";
    let r = cotangent_heisenberg();
    let run = || -> Outcome {
        let mut worst: f64 = 0.0;
        let rr = &r;
        let mu1 = FnField(move |g: &[f64]| rr.source(g)[0]);
        let mu2 = FnField(move |g: &[f64]| rr.source(g)[1]);
        for x in r.sample_points(200, 1.5, seed ^ 0xB1) {
            let b = r.total().bracket(&mu1, &mu2, &x)?;
            worst = worst.max((b - r.source(&x)[2]).abs());
        }
        Ok(Check::below(
            name,
            worst,
            1e-6,
            "{mu1 o s, mu2 o s} = mu3 o s on 200 samples",
        ))
    };
    out.push(settle(name, run()));
    out
}

pub fn cutoff_chain(_seed: u64) -> Vec<Check> {
    let spec = IntegratorSpec::default();
    let grid = OscillationGrid::default();
    let run = || -> hoferlab_core::Result<Vec<Check>> {
        let p = plane();
        let r = pair_groupoid(&p)?;
        let u = Region::ball(vec![0.0, 0.0], 0.5)?;
        let f = hoferlab_core::hofer::CandidateFamily::CutoffShift { axis: 1 }.instantiate(&p, &u, &[1.2, 0.1])?;
        let base_flow = integrate(p.clone(), f.clone(), spec)?;
        let base = check_displaced(&|x| base_flow.evaluate(1.0, x), &u, &SamplerSpec::default())?;

        let b = Region::ball(vec![0.0; 4], 0.5)?;
        let lifted_flow = integrate(r.total().clone(), Arc::new(lift_hamiltonian(&r, f.clone())?), spec)?;
        let cutoff = CutoffSpec::covering_path(&lifted_flow, &b, 0.1, 0.3)?;
        let fl = Arc::new(cutoff_hamiltonian(&r, f.clone(), cutoff, spec)?);
        let flow = integrate(r.total().clone(), fl.clone(), spec)?;
        let d = check_displaced(&|x| flow.evaluate(1.0, x), &b, &SamplerSpec::coarse())?;
        let lf = length(f.as_ref(), &grid)?.value;
        let ll = length(fl.as_ref(), &grid)?.value;
        let half_c = 0.5 * gromov_width_lower(&b, r.total(), None)?;
        Ok(vec![
            Check {
                name: "F displaces U".into(),
                passed: base.verified(),
                value: base.margin,
                threshold: base.resolution,
                detail: format!("{}; disk r = 0.5 in R^2", base.verdict.as_str()),
            },
            Check {
                name: "F^lambda displaces B".into(),
                passed: d.verified(),
                value: d.margin,
                threshold: d.resolution,
                detail: format!("{}; 4-ball r = 0.5 in s^-1(U)", d.verdict.as_str()),
            },
            Check::below(
                "length(F^lambda) - length(F)",
                ll - lf,
                1e-6,
                format!("length(F) = {lf:.6}, length(F^lambda) = {ll:.6}, half capacity of B = {half_c:.6}"),
            ),
        ])
    };
    run().unwrap_or_else(|e| vec![Check::failed("cutoff chain", e)])
}

/// Numbered acceptance criteria run by checks in this module; determinism
/// (11) compares whole suite outputs and lives with the suites.
pub const CRITERIA: &[(u8, &str, fn(u64) -> Vec<Check>)] = &[
    (1, "poisson validity", poisson_validity),
    (2, "flow oracle", flow_oracle),
    (3, "conservation", conservation),
    (4, "group laws", group_laws),
    (5, "reparametrization", reparametrization),
    (6, "length pseudo-norm", pseudo_norm),
    (7, "leaf restriction", leaf_restriction),
    (8, "energy-capacity disk", energy_capacity),
    (9, "groupoid lift", groupoid_lift),
    (10, "cutoff displacement", cutoff_chain),
];
