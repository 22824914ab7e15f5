use hoferlab_core::poisson::{Coordinate, ScalarField};
use hoferlab_core::{Hamiltonian, PoissonStructure};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `a·sin(b·x_i + c) + d·x_j·x_k` with its exact gradient.
#[derive(Debug, Clone)]
struct Smooth {
    i: usize,
    j: usize,
    k: usize,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl ScalarField for Smooth {
    fn value(&self, x: &[f64]) -> f64 {
        self.a * (self.b * x[self.i] + self.c).sin() + self.d * x[self.j] * x[self.k]
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[self.i] += self.a * self.b * (self.b * x[self.i] + self.c).cos();
        out[self.j] += self.d * x[self.k];
        out[self.k] += self.d * x[self.j];
    }
}

fn smooth(n: usize) -> impl Strategy<Value = Smooth> {
    (0..n, 0..n, 0..n, -2.0..2.0f64, -1.5..1.5f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_map(|(i, j, k, a, b, c, d)| Smooth { i, j, k, a, b, c, d })
}

struct Product<'a>(&'a dyn ScalarField, &'a dyn ScalarField);

impl ScalarField for Product<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x) * self.1.value(x)
    }
}

fn structures() -> Vec<PoissonStructure> {
    vec![
        PoissonStructure::symplectic(1).unwrap(),
        PoissonStructure::symplectic(2).unwrap(),
        PoissonStructure::heisenberg(),
        PoissonStructure::product_2x1(),
    ]
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

#[test]
fn jacobi_vanishes_on_builtins_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in structures() {
        let n = p.dim();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            for a in 0..n {
                for b in (a + 1)..n {
                    for c in (b + 1)..n {
                        let r = p
                            .jacobi_residual(&Coordinate(a), &Coordinate(b), &Coordinate(c), &x)
                            .unwrap();
                        assert!(r < 1e-9, "{} at {:?}: {r}", p.label(), x);
                    }
                }
            }
        }
    }
}

#[test]
fn corrupted_bivector_fails_jacobi() {
    let bad = PoissonStructure::custom("corrupted", 3, &[(1, 2, "x2"), (2, 3, "1")]).unwrap();
    let r = bad
        .jacobi_residual(&Coordinate(0), &Coordinate(1), &Coordinate(2), &[0.4, -0.3, 1.2])
        .unwrap();
    assert!(r > 1e-3, "{r}");
}

#[test]
fn jacobi_with_equal_arguments_is_exactly_zero() {
    let f = Smooth {
        i: 0,
        j: 1,
        k: 2,
        a: 1.0,
        b: 0.7,
        c: 0.2,
        d: 0.5,
    };
    let h = Smooth {
        i: 2,
        j: 0,
        k: 0,
        a: -0.3,
        b: 1.1,
        c: 0.0,
        d: 1.0,
    };
    for p in [PoissonStructure::heisenberg(), PoissonStructure::product_2x1()] {
        assert_eq!(p.jacobi_residual(&f, &f, &h, &[0.3, 0.1, -0.8]).unwrap(), 0.0);
    }
}

#[test]
fn heisenberg_examples() {
    let h = PoissonStructure::heisenberg();
    let x = [0.4, -1.0, 1.7];
    assert_eq!(h.bracket(&Coordinate(0), &Coordinate(1), &x).unwrap(), 1.7);
    let v = h.hamiltonian_field(&Coordinate(0), &x).unwrap();
    assert_eq!(v.components, vec![0.0, 1.7, 0.0]);
    let leaf = h.leaf_at(&[0.2, 0.3, 0.0]).unwrap();
    assert_eq!(leaf.dim, 0);
    assert!(leaf.basis.is_empty());
}

#[test]
fn symplectic_leaves_are_everything() {
    for n in 1..=3 {
        let p = PoissonStructure::symplectic(n).unwrap();
        let leaf = p.leaf_at(&vec![0.3; 2 * n]).unwrap();
        assert_eq!(leaf.dim, 2 * n);
        assert!(leaf.inverse_residual() < 1e-10);
        assert!(leaf.proper);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bracket_is_exactly_antisymmetric(f in smooth(3), h in smooth(3), x in point(3)) {
        for p in [PoissonStructure::heisenberg(), PoissonStructure::product_2x1()] {
            let a = p.bracket(&f, &h, &x).unwrap();
            let b = p.bracket(&h, &f, &x).unwrap();
            prop_assert_eq!(a, -b);
        }
    }

    #[test]
    fn leibniz_rule(f in smooth(4), g in smooth(4), h in smooth(4), x in point(4)) {
        let p = PoissonStructure::symplectic(2).unwrap();
        let gh = Product(&g, &h);
        let lhs = p.bracket(&f, &gh, &x).unwrap();
        let rhs = p.bracket(&f, &g, &x).unwrap() * h.value(&x) + g.value(&x) * p.bracket(&f, &h, &x).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-6, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn bracket_is_derivative_along_the_field(f in smooth(3), h in smooth(3), x in point(3)) {
        for p in [PoissonStructure::heisenberg(), PoissonStructure::product_2x1()] {
            let b = p.bracket(&f, &h, &x).unwrap();
            let xf = p.hamiltonian_field(&f, &x).unwrap();
            let mut dh = [0.0; 3];
            h.gradient(&x, &mut dh);
            let d: f64 = dh.iter().zip(&xf.components).map(|(a, b)| a * b).sum();
            prop_assert!((b - d).abs() < 1e-6);
            // and {F, H} = −X_H F
            let xh = p.hamiltonian_field(&h, &x).unwrap();
            let mut df = [0.0; 3];
            f.gradient(&x, &mut df);
            let e: f64 = df.iter().zip(&xh.components).map(|(a, b)| a * b).sum();
            prop_assert!((b + e).abs() < 1e-6);
        }
    }

    #[test]
    fn field_of_bracket_is_the_commutator(f in smooth(3), h in smooth(3), x in point(3)) {
        let p = PoissonStructure::heisenberg();
        let field = |s: &dyn ScalarField, y: &[f64]| p.hamiltonian_field(s, y).unwrap().components;
        let bracket = hoferlab_core::poisson::BracketField { p: &p, f: &f, h: &h };
        let lhs = field(&bracket, &x);
        // [X, Y]^j = X^i ∂_i Y^j − Y^i ∂_i X^j
        let xf = field(&f, &x);
        let xh = field(&h, &x);
        let step = 1e-4;
        let mut comm = [0.0; 3];
        for i in 0..3 {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += step;
            b[i] -= step;
            let dxh: Vec<f64> = field(&h, &a).iter().zip(field(&h, &b)).map(|(u, v)| (u - v) / (2.0 * step)).collect();
            let dxf: Vec<f64> = field(&f, &a).iter().zip(field(&f, &b)).map(|(u, v)| (u - v) / (2.0 * step)).collect();
            for j in 0..3 {
                comm[j] += xf[i] * dxh[j] - xh[i] * dxf[j];
            }
        }
        for j in 0..3 {
            prop_assert!((lhs[j] - comm[j]).abs() < 1e-4, "{:?} vs {:?}", lhs, comm);
        }
    }

    #[test]
    fn leaf_symplectic_matrix_inverts_the_restriction(x in point(3)) {
        for p in [PoissonStructure::heisenberg(), PoissonStructure::product_2x1()] {
            let leaf = p.leaf_at(&x).unwrap();
            if leaf.dim > 0 {
                prop_assert_eq!(leaf.dim, 2);
                prop_assert!(leaf.inverse_residual() < 1e-10);
                let s = &leaf.sigma;
                prop_assert!((s[(0, 1)] + s[(1, 0)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hamiltonian_families_have_consistent_gradients(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = hoferlab_core::hamiltonian::random::family(&mut rng, 3);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut g = [0.0; 3];
        f.gradient(0.4, &x, &mut g);
        let mut fd = [0.0; 3];
        hoferlab_core::poisson::central_gradient(&|y: &[f64]| f.value(0.4, y), &x, &mut fd);
        for i in 0..3 {
            prop_assert!((g[i] - fd[i]).abs() < 1e-6 * (1.0 + g[i].abs()));
        }
    }
}
