use std::f64::consts::PI;
use std::sync::Arc;

use hoferlab_core::cutoff::Plateau;
use hoferlab_core::flows::integrate;
use hoferlab_core::groupoid::*;
use hoferlab_core::hamiltonian::random;
use hoferlab_core::hofer::{check_displaced, gromov_width_lower, length, CandidateFamily, OscillationGrid};
use hoferlab_core::ode::IntegratorSpec;
use hoferlab_core::poisson::{Coordinate, FnField};
use hoferlab_core::sampling::SamplerSpec;
use hoferlab_core::{AxisBox, FamilyHamiltonian, Hamiltonian, PoissonStructure, Region, SharedHamiltonian};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TIMES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

fn realizations() -> Vec<GroupoidRealization> {
    vec![
        pair_groupoid(&PoissonStructure::symplectic(1).unwrap()).unwrap(),
        cotangent_heisenberg(),
    ]
}

#[test]
fn units_are_sections_of_source_and_target() {
    for r in realizations() {
        for g in r.sample_points(50, 2.0, 1) {
            let x = r.source(&g);
            let u = r.unit(&x);
            assert!(r.source(&u).iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12));
            assert!(r.target(&u).iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }
}

#[test]
fn source_is_poisson_and_target_anti_poisson() {
    for r in realizations() {
        let m = r.base_dim();
        let samples = r.sample_points(200, 1.5, 2);
        for g in &samples {
            for i in 0..m {
                for j in (i + 1)..m {
                    let (a, b) = (Coordinate(i), Coordinate(j));
                    assert!(r.source_morphism_residual(&a, &b, g).unwrap() < 1e-6);
                    assert!(r.target_antimorphism_residual(&a, &b, g).unwrap() < 1e-6);
                }
            }
        }
        // nonlinear functions too
        let f = FnField(|x: &[f64]| (x[0] * x[1]).sin() + x[m - 1] * x[m - 1]);
        let h = FnField(|x: &[f64]| (0.5 * x[1]).exp() - x[0] * x[m - 1]);
        for g in samples.iter().take(50) {
            assert!(r.source_morphism_residual(&f, &h, g).unwrap() < 1e-6);
            assert!(r.target_antimorphism_residual(&f, &h, g).unwrap() < 1e-6);
        }
    }
}

#[test]
fn total_charts_are_poisson() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for r in realizations() {
        let n = r.total_dim();
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
            for a in 0..n {
                for b in (a + 1)..n {
                    for c in (b + 1)..n {
                        let res = r
                            .total()
                            .jacobi_residual(&Coordinate(a), &Coordinate(b), &Coordinate(c), &x)
                            .unwrap();
                        assert!(res < 1e-9, "{}: {res}", r.label());
                    }
                }
            }
        }
    }
}

#[test]
fn lifted_flows_project_and_keep_target_fibers() {
    let spec = IntegratorSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for r in realizations() {
        let m = r.base_dim();
        let samples = r.sample_points(100, 1.5, 5);
        let mut families: Vec<SharedHamiltonian> = (0..4).map(|_| random::family(&mut rng, m).into_shared()).collect();
        families.push(
            FamilyHamiltonian::coordinate(m, 0, 1.0, 0.0, Plateau::new(AxisBox::cube(m, 2.0), 0.5))
                .unwrap()
                .into_shared(),
        );
        for f in families {
            let p = check_projection(&r, f.clone(), &samples, &TIMES, spec).unwrap();
            assert!(p.max_residual < 1e-6, "{} projection {}", r.label(), p.max_residual);
            assert_eq!(p.samples, 100);
            let t = check_target_fibers(&r, f, &samples, &TIMES, spec).unwrap();
            assert!(t.max_residual < 1e-6, "{} target {}", r.label(), t.max_residual);
        }
        let zero = FamilyHamiltonian::zero(m).into_shared();
        assert_eq!(
            check_projection(&r, zero.clone(), &samples, &TIMES, spec)
                .unwrap()
                .max_residual,
            0.0
        );
        assert_eq!(
            check_target_fibers(&r, zero, &samples, &TIMES, spec)
                .unwrap()
                .max_residual,
            0.0
        );
    }
}

#[test]
fn pair_lift_moves_only_the_source_factor() {
    let r = pair_groupoid(&PoissonStructure::symplectic(1).unwrap()).unwrap();
    let f = FamilyHamiltonian::coordinate(2, 1, 1.0, 0.0, Plateau::new(AxisBox::cube(2, 3.0), 0.5))
        .unwrap()
        .into_shared();
    let lifted = Arc::new(lift_hamiltonian(&r, f.clone()).unwrap());
    assert!(lifted.support().is_none());
    let iso = integrate(r.total().clone(), lifted.clone(), IntegratorSpec::default()).unwrap();
    let y = iso.evaluate(1.0, &[0.3, 0.4, 0.1, 0.2]).unwrap();
    assert_eq!(&y[..2], &[0.3, 0.4]);
    assert!((y[2] - 0.1).abs() > 0.5);
    let g = OscillationGrid::default();
    assert_eq!(lifted.length(&g).unwrap(), length(f.as_ref(), &g).unwrap().value);
}

#[test]
fn lifts_must_match_the_base() {
    let r = cotangent_heisenberg();
    let f = FamilyHamiltonian::bump(vec![0.0; 3], 1.0, 1.0)
        .unwrap()
        .for_structure("product:2x1");
    assert!(lift_hamiltonian(&r, f.into_shared()).is_err());
    let f = FamilyHamiltonian::bump(vec![0.0; 2], 1.0, 1.0).unwrap();
    assert!(lift_hamiltonian(&r, f.into_shared()).is_err());
}

#[test]
fn cutoff_lift_displaces_a_ball_over_a_displaced_disk() {
    let spec = IntegratorSpec::default();
    let plane = Arc::new(PoissonStructure::symplectic(1).unwrap());
    let r = pair_groupoid(&plane).unwrap();
    let u = Region::ball(vec![0.0, 0.0], 0.5).unwrap();
    // moves the base disk by 1.2 along x
    let f = CandidateFamily::CutoffShift { axis: 1 }
        .instantiate(&plane, &u, &[1.2, 0.1])
        .unwrap();
    let base_flow = integrate(plane.clone(), f.clone(), spec).unwrap();
    assert!(
        check_displaced(&|p| base_flow.evaluate(1.0, p), &u, &SamplerSpec::default())
            .unwrap()
            .verified()
    );

    // a 4-ball around the unit over U lies in s⁻¹(U)
    let b = Region::ball(vec![0.0; 4], 0.5).unwrap();
    let lifted: SharedHamiltonian = Arc::new(lift_hamiltonian(&r, f.clone()).unwrap());
    let lifted_flow = integrate(r.total().clone(), lifted, spec).unwrap();
    let cutoff = CutoffSpec::covering_path(&lifted_flow, &b, 0.1, 0.3).unwrap();
    let fl = Arc::new(cutoff_hamiltonian(&r, f.clone(), cutoff, spec).unwrap());

    let flow = integrate(r.total().clone(), fl.clone(), spec).unwrap();
    let d = check_displaced(&|p| flow.evaluate(1.0, p), &b, &SamplerSpec::coarse()).unwrap();
    assert!(d.verified(), "{d:?}");

    let grid = OscillationGrid::default();
    let lf = length(f.as_ref(), &grid).unwrap().value;
    let ll = length(fl.as_ref(), &grid).unwrap().value;
    assert!(ll <= lf + 1e-6, "{ll} > {lf}");
    let half_c = 0.5 * gromov_width_lower(&b, r.total(), None).unwrap();
    assert!((half_c - 0.125 * PI).abs() < 1e-12);
    assert!(half_c <= ll);
}
