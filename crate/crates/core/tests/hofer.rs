use std::f64::consts::PI;
use std::sync::Arc;

use hoferlab_core::cutoff::Plateau;
use hoferlab_core::flows::{compose, integrate, inverse, pullback};
use hoferlab_core::hamiltonian::{random, Spatial};
use hoferlab_core::hofer::*;
use hoferlab_core::ode::IntegratorSpec;
use hoferlab_core::{AxisBox, FamilyHamiltonian, Hamiltonian, PoissonStructure, Region, SharedHamiltonian};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn plane() -> Arc<PoissonStructure> {
    Arc::new(PoissonStructure::symplectic(1).unwrap())
}

#[test]
fn zero_has_zero_oscillation_and_length() {
    let g = OscillationGrid::default();
    let z = FamilyHamiltonian::zero(2);
    let o = oscillation(&|x| z.spatial_value(x), &AxisBox::cube(2, 1.0), &g).unwrap();
    assert_eq!(o.value(), 0.0);
    assert_eq!(length(&z, &g).unwrap().value, 0.0);
}

#[test]
fn non_compact_hamiltonians_have_no_grid_length() {
    let f = FamilyHamiltonian::from_spatial(
        2,
        "linear",
        Spatial::Linear {
            coeffs: vec![1.0, 0.0],
            center: vec![0.0, 0.0],
        },
    );
    assert!(length(&f, &OscillationGrid::default()).is_err());
}

#[test]
fn length_of_time_dependent_composite_uses_the_time_grid() {
    // F#0 is F itself but goes through the generic per-time-node path
    let f = FamilyHamiltonian::bump(vec![0.0, 0.0], 1.0, 1.0)
        .unwrap()
        .with_profile(hoferlab_core::TimeProfile::parse("sin(pi * t)").unwrap())
        .into_shared();
    let c = compose(
        plane(),
        f.clone(),
        FamilyHamiltonian::zero(2).into_shared(),
        IntegratorSpec::default(),
    )
    .unwrap();
    let l = length(&c, &OscillationGrid::default()).unwrap();
    assert!((l.value - 2.0 / PI).abs() < 1e-6, "{}", l.value);
    assert_eq!(l.times.len(), 65);
}

#[test]
fn grid_refinement_changes_oscillation_by_under_one_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let coarse = OscillationGrid {
        refine: false,
        ..OscillationGrid::default()
    };
    let fine = OscillationGrid {
        resolution: 64,
        ..coarse
    };
    for _ in 0..20 {
        let f = random::family(&mut rng, 2);
        let s = f.support().unwrap().clone();
        let a = oscillation(&|x| f.spatial_value(x), &s, &coarse).unwrap().value();
        let b = oscillation(&|x| f.spatial_value(x), &s, &fine).unwrap().value();
        assert!((a - b).abs() < 0.01 * b, "{a} vs {b}");
    }
}

#[test]
fn displacement_examples() {
    let u = Region::ball(vec![0.0, 0.0], 0.5).unwrap();
    let x = DisplacementExperiment::new(plane(), u.clone()).unwrap();
    let est = displacement_upper_bound(&x).unwrap();
    assert!(est.upper >= 0.25 * PI * 0.5 && est.upper <= 1.1, "{}", est.upper);
    assert!((est.lower - 0.125 * PI).abs() < 1e-12);
    let d = est.displacement.as_ref().unwrap();
    assert!(d.verified() && d.margin > 0.01, "{d:?}");
    let w = est.witness.as_ref().unwrap();
    assert_eq!(w.length, est.upper);
    assert_eq!(est.landscape.len(), 25);

    // the stored witness really displaces U
    let iso = integrate(plane(), w.hamiltonian.clone(), x.integrator).unwrap();
    let again = check_displaced(&|p| iso.evaluate(1.0, p), &u, &x.sampler).unwrap();
    assert!(again.verified());

    // a witness for the disk also works for a smaller concentric disk
    let small = Region::ball(vec![0.0, 0.0], 0.4).unwrap();
    let xs = DisplacementExperiment::new(plane(), small).unwrap();
    let seeded = displacement_upper_bound_seeded(&xs, std::slice::from_ref(w)).unwrap();
    assert!(seeded.upper <= est.upper);
}

#[test]
fn rotations_never_displace_and_the_empty_set_costs_nothing() {
    let u = Region::ball(vec![0.0, 0.0], 0.5).unwrap();
    let x = DisplacementExperiment::new(plane(), u)
        .unwrap()
        .with_family(CandidateFamily::Rotation);
    let est = displacement_upper_bound(&x).unwrap();
    assert_eq!(est.upper, f64::INFINITY);
    assert!(est.witness.is_none());
    assert!(!est.notes.is_empty());

    let e = Region::ball(vec![0.0, 0.0], 0.0).unwrap();
    let est = displacement_upper_bound(&DisplacementExperiment::new(plane(), e.clone()).unwrap()).unwrap();
    assert_eq!(est.upper, 0.0);
    let r = energy_capacity_check(&DisplacementExperiment::new(plane(), e).unwrap()).unwrap();
    assert_eq!((r.half_capacity, r.estimate.upper), (0.0, 0.0));
    assert!(r.holds);
}

#[test]
fn energy_capacity_on_heisenberg_ball() {
    let h = Arc::new(PoissonStructure::heisenberg());
    let u = Region::ball(vec![0.0, 0.0, 1.0], 0.5).unwrap();
    let r = energy_capacity_check(&DisplacementExperiment::new(h, u).unwrap()).unwrap();
    // sup_c π(¼ − (c−1)²)/c over c ∈ [0.5, 1.5]
    let oracle = (0..=10_000)
        .map(|k| 0.5 + k as f64 / 10_000.0)
        .map(|c| PI * (0.25 - (c - 1.0) * (c - 1.0)) / c)
        .fold(0.0, f64::max);
    assert!(r.half_capacity <= 0.5 * oracle + 1e-12);
    assert!(r.half_capacity > 0.5 * oracle - 1e-3);
    assert!(r.estimate.upper.is_finite());
    assert!(r.holds, "{} > {}", r.half_capacity, r.estimate.upper);
}

#[test]
fn widths_need_supported_geometry() {
    let h = PoissonStructure::heisenberg();
    let b = Region::ball(vec![0.0, 0.0, 1.0], 0.3).unwrap();
    assert!(gromov_width_lower(&b, &h, None).is_err());
    let bx = Region::Box(AxisBox::cube(2, 1.0));
    assert!(gromov_width_lower(&bx, &PoissonStructure::symplectic(1).unwrap(), None).is_err());
    let leaf = h.leaf_at(&[0.0, 0.0, 0.5]).unwrap();
    let c = gromov_width_lower(&b, &h, Some(&leaf)).unwrap();
    assert_eq!(c, 0.0);
    let leaf = h.leaf_at(&[0.0, 0.0, 1.0]).unwrap();
    assert!((gromov_width_lower(&b, &h, Some(&leaf)).unwrap() - PI * 0.09).abs() < 1e-12);
    let p4 = PoissonStructure::symplectic(2).unwrap();
    let b4 = Region::ball(vec![0.0; 4], 0.5).unwrap();
    assert!((gromov_width_lower(&b4, &p4, None).unwrap() - PI * 0.25).abs() < 1e-15);
}

#[test]
fn leaf_restriction_on_the_product() {
    let p = PoissonStructure::product_2x1();
    let g = OscillationGrid::default();
    let f = FamilyHamiltonian::from_spatial(
        3,
        "bump-times-z",
        Spatial::Product(vec![
            Spatial::Bump {
                center: vec![0.0, 0.0, 0.0],
                radius: 1.0,
                height: 1.0,
                axes: vec![0, 1],
            },
            Spatial::Linear {
                coeffs: vec![0.0, 0.0, 1.0],
                center: vec![0.0; 3],
            },
            Spatial::Plateau(Plateau::new(
                AxisBox::new(vec![-1.0, -1.0, -1.0], vec![1.0, 1.0, 1.0]).unwrap(),
                0.5,
            )),
        ]),
    )
    .for_structure(p.label())
    .into_shared();
    let leaf = p.leaf_at(&[0.0, 0.0, 0.5]).unwrap();
    let r = leaf_restriction_check(f, &leaf, &g).unwrap();
    assert!((r.leaf_length - 0.5).abs() < 1e-9, "{}", r.leaf_length);
    assert!(r.ambient_length >= 2.0 - 1e-9);
    assert!(r.holds && r.leaf_length < r.ambient_length);

    let zero = FamilyHamiltonian::zero(3).into_shared();
    let r = leaf_restriction_check(zero, &leaf, &g).unwrap();
    assert_eq!((r.leaf_length, r.ambient_length), (0.0, 0.0));
}

#[test]
fn leaf_restriction_holds_for_random_families() {
    let g = OscillationGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in [PoissonStructure::heisenberg(), PoissonStructure::product_2x1()] {
        for k in 0..20 {
            let f: SharedHamiltonian = random::family(&mut rng, 3).for_structure(p.label()).into_shared();
            let leaf = p.leaf_at(&[0.1, -0.2, 0.3 + 0.05 * k as f64]).unwrap();
            let r = leaf_restriction_check(f, &leaf, &g).unwrap();
            assert!(r.holds, "{} > {}", r.leaf_length, r.ambient_length);
        }
    }
}

#[test]
fn length_level_pseudo_norm_inequalities() {
    let spec = IntegratorSpec::default();
    let g = OscillationGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..3 {
        let f: SharedHamiltonian = random::family(&mut rng, 2).into_shared();
        let h: SharedHamiltonian = random::family(&mut rng, 2).into_shared();
        let lf = length(f.as_ref(), &g).unwrap().value;
        let lh = length(h.as_ref(), &g).unwrap().value;

        let fh = compose(plane(), f.clone(), h.clone(), spec).unwrap();
        let l = length(&fh, &g).unwrap().value;
        assert!(l <= lf + lh + 1e-6, "triangle: {l} > {lf} + {lh}");

        let fbar = inverse(plane(), f.clone(), spec).unwrap();
        let l = length(&fbar, &g).unwrap().value;
        assert!((l - lf).abs() < 1e-6, "inverse: {l} vs {lf}");

        let phi = integrate(plane(), f.clone(), spec).unwrap();
        let pulled = pullback(phi.endpoint(1.0), h.clone()).unwrap();
        let l = length(&pulled, &g).unwrap().value;
        assert!((l - lh).abs() < 1e-6, "pullback: {l} vs {lh}");
    }
}
