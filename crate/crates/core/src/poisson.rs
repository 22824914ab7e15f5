//! Poisson structures on global charts of ℝⁿ.
//!
//! A structure is a bivector field Λ, stored as an antisymmetric matrix
//! valued function of the point. The musical map is fixed by
//!
//! ```text
//! (♯α)_j = Σ_i α_i Λ_ij(x),   so that   β(♯α) = Λ(α, β) = Σ_ij α_i Λ_ij β_j.
//! ```
//!
//! With this convention the Hamiltonian field is `X_F = ♯(dF)` and
//! `{F, H} = Λ(dF, dH) = X_F H`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::expr::{Env, Expr};
use crate::MAX_DIM;

/// A scalar function on a chart, with an optional analytic gradient.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Central differences with step `1e-5 · (1 + ‖x‖)` unless overridden.
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        central_gradient(&|y: &[f64]| self.value(y), x, out);
    }
}

/// Finite-difference step used for every numerical gradient.
#[inline]
pub fn fd_step(x: &[f64]) -> f64 {
    1e-5 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

pub fn central_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    let h = fd_step(x);
    let mut buf = [0.0; MAX_DIM];
    buf[..n].copy_from_slice(x);
    for i in 0..n {
        buf[i] = x[i] + h;
        let plus = f(&buf[..n]);
        buf[i] = x[i] - h;
        let minus = f(&buf[..n]);
        buf[i] = x[i];
        out[i] = (plus - minus) / (2.0 * h);
    }
}

/// The coordinate function `x ↦ x_i` (zero-based).
#[derive(Debug, Clone, Copy)]
pub struct Coordinate(pub usize);

impl ScalarField for Coordinate {
    fn value(&self, x: &[f64]) -> f64 {
        x[self.0]
    }

    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[self.0] = 1.0;
    }
}

/// A scalar field given by an expression in `x1..xn`.
#[derive(Debug, Clone)]
pub struct ExprField(pub Expr);

impl ScalarField for ExprField {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.eval(&Env::point(x))
    }
}

/// A scalar field given by a closure; gradients by central differences.
pub struct FnField<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ScalarField for FnField<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

/// Covector `α_x` at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector {
    pub base: Vec<f64>,
    pub components: Vec<f64>,
}

/// Tangent vector at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    pub base: Vec<f64>,
    pub components: Vec<f64>,
}

impl Covector {
    pub fn new(base: Vec<f64>, components: Vec<f64>) -> Result<Self> {
        check_dim(base.len(), components.len())?;
        if components.iter().chain(&base).any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("non-finite covector".into()));
        }
        Ok(Covector { base, components })
    }

    /// `β(v)`.
    pub fn pair(&self, v: &Vector) -> f64 {
        self.components.iter().zip(&v.components).map(|(a, b)| a * b).sum()
    }
}

#[derive(Clone)]
enum Kind {
    Symplectic {
        n: usize,
    },
    Heisenberg,
    Product2x1,
    /// Block-diag(−J, J) on ℝ²ⁿ × ℝ²ⁿ.
    PairBlock {
        n: usize,
    },
    /// Left-trivialized T*H for the Heisenberg group, coordinates (a, b, c, μ₁, μ₂, μ₃).
    CotangentHeisenberg,
    /// Upper-triangular entries Λ_ij, i < j, zero-based.
    Custom {
        entries: Vec<(usize, usize, Expr)>,
    },
}

/// A Poisson bivector on a global chart.
#[derive(Clone)]
pub struct PoissonStructure {
    label: String,
    dim: usize,
    kind: Kind,
    casimirs: Vec<Expr>,
    domain: crate::region::AxisBox,
}

impl fmt::Debug for PoissonStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoissonStructure")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .finish()
    }
}

/// Labels accepted by [`PoissonStructure::from_label`], with a description.
pub const BUILTIN_STRUCTURES: &[(&str, &str)] = &[
    ("symplectic2n:<n>", "standard symplectic ℝ²ⁿ, {q_i, p_i} = 1"),
    ("heisenberg3", "Heisenberg Lie–Poisson on ℝ³, {x1, x2} = x3, Casimir x3"),
    ("product2x1", "product ℝ² × ℝ, {x1, x2} = 1, Casimir x3"),
    ("custom", "bivector entries given as expressions in x1..xn"),
];

impl PoissonStructure {
    /// Looks up a built-in structure by label.
    pub fn from_label(label: &str) -> Result<Self> {
        if let Some(n) = label.strip_prefix("symplectic2n:") {
            let n: usize = n.parse().map_err(|_| Error::UnknownLabel(label.to_string()))?;
            return Self::symplectic(n);
        }
        match label {
            "heisenberg3" => Ok(Self::heisenberg()),
            "product2x1" => Ok(Self::product_2x1()),
            "custom" => Err(Error::Contract(
                "`custom` structures need bivector entries; use PoissonStructure::custom".into(),
            )),
            _ => Err(Error::UnknownLabel(label.to_string())),
        }
    }

    pub fn symplectic(n: usize) -> Result<Self> {
        if n == 0 || 2 * n > MAX_DIM {
            return Err(Error::Contract(format!("symplectic2n needs 1 <= n <= {}", MAX_DIM / 2)));
        }
        Ok(PoissonStructure {
            label: format!("symplectic2n:{n}"),
            dim: 2 * n,
            kind: Kind::Symplectic { n },
            casimirs: Vec::new(),
            domain: crate::region::AxisBox::cube(2 * n, 10.0),
        })
    }

    pub fn heisenberg() -> Self {
        PoissonStructure {
            label: "heisenberg3".into(),
            dim: 3,
            kind: Kind::Heisenberg,
            casimirs: vec![Expr::parse("x3").unwrap()],
            domain: crate::region::AxisBox::cube(3, 10.0),
        }
    }

    pub fn product_2x1() -> Self {
        PoissonStructure {
            label: "product2x1".into(),
            dim: 3,
            kind: Kind::Product2x1,
            casimirs: vec![Expr::parse("x3").unwrap()],
            domain: crate::region::AxisBox::cube(3, 10.0),
        }
    }

    pub(crate) fn pair_block(n: usize) -> Self {
        PoissonStructure {
            label: format!("pair:symplectic2n:{n}"),
            dim: 4 * n,
            kind: Kind::PairBlock { n },
            casimirs: Vec::new(),
            domain: crate::region::AxisBox::cube(4 * n, 10.0),
        }
    }

    pub(crate) fn cotangent_heisenberg() -> Self {
        PoissonStructure {
            label: "cotangent:heisenberg3".into(),
            dim: 6,
            kind: Kind::CotangentHeisenberg,
            casimirs: Vec::new(),
            domain: crate::region::AxisBox::cube(6, 10.0),
        }
    }

    /// A structure from upper-triangular entries `(i, j, Λ_ij)`, 1-based `i < j`.
    /// Validity is not assumed: check it with [`jacobi_residual`](Self::jacobi_residual).
    pub fn custom(label: &str, dim: usize, entries: &[(usize, usize, &str)]) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Contract(format!("dimension must be in 1..={MAX_DIM}")));
        }
        let mut parsed = Vec::with_capacity(entries.len());
        for &(i, j, src) in entries {
            if !(1 <= i && i < j && j <= dim) {
                return Err(Error::Contract(format!(
                    "bivector entry ({i}, {j}) must satisfy 1 <= i < j <= {dim}"
                )));
            }
            let e = Expr::parse(src)?;
            if e.coordinate_arity() > dim {
                return Err(Error::Contract(format!("entry `{src}` references x beyond x{dim}")));
            }
            parsed.push((i - 1, j - 1, e));
        }
        Ok(PoissonStructure {
            label: label.to_string(),
            dim,
            kind: Kind::Custom { entries: parsed },
            casimirs: Vec::new(),
            domain: crate::region::AxisBox::cube(dim, 10.0),
        })
    }

    pub fn with_casimirs(mut self, casimirs: Vec<Expr>) -> Self {
        self.casimirs = casimirs;
        self
    }

    pub fn with_domain(mut self, domain: crate::region::AxisBox) -> Result<Self> {
        check_dim(self.dim, domain.dim())?;
        self.domain = domain;
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &crate::region::AxisBox {
        &self.domain
    }

    pub fn casimirs(&self) -> &[Expr] {
        &self.casimirs
    }

    /// `Some(n)` for the standard symplectic ℝ²ⁿ.
    pub fn standard_symplectic(&self) -> Option<usize> {
        match self.kind {
            Kind::Symplectic { n } => Some(n),
            _ => None,
        }
    }

    /// Constant symplectic bivectors that an orthogonal linear change of
    /// coordinates takes to the standard one, so round balls keep width πr².
    pub fn has_standard_ball_width(&self) -> bool {
        matches!(self.kind, Kind::Symplectic { .. } | Kind::PairBlock { .. })
    }

    /// Whether this is one of the built-in structures (known leaves, properness metadata).
    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, Kind::Custom { .. })
    }

    /// Coordinate axis transverse to the symplectic leaves, for structures whose
    /// leaves are the level sets of a Casimir coordinate.
    pub fn transversal_axis(&self) -> Option<usize> {
        match self.kind {
            Kind::Heisenberg | Kind::Product2x1 => Some(2),
            _ => None,
        }
    }

    /// Whether Λ does not depend on the point.
    pub fn is_constant(&self) -> bool {
        matches!(
            self.kind,
            Kind::Symplectic { .. } | Kind::Product2x1 | Kind::PairBlock { .. }
        )
    }

    /// Writes Λ(x) row-major into `out[..n*n]`.
    pub fn bivector_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        out[..n * n].fill(0.0);
        let mut set = |i: usize, j: usize, v: f64| {
            out[i * n + j] = v;
            out[j * n + i] = -v;
        };
        match &self.kind {
            Kind::Symplectic { n: m } => {
                for i in 0..*m {
                    set(i, m + i, 1.0);
                }
            }
            Kind::Heisenberg => set(0, 1, x[2]),
            Kind::Product2x1 => set(0, 1, 1.0),
            Kind::PairBlock { n: m } => {
                let half = 2 * m;
                for i in 0..*m {
                    set(i, m + i, -1.0);
                    set(half + i, half + m + i, 1.0);
                }
            }
            Kind::CotangentHeisenberg => {
                // {a, μ1} = −1, {b, μ2} = −1, {c, μ2} = −a, {c, μ3} = −1, {μ1, μ2} = μ3
                set(0, 3, -1.0);
                set(1, 4, -1.0);
                set(2, 4, -x[0]);
                set(2, 5, -1.0);
                set(3, 4, x[5]);
            }
            Kind::Custom { entries } => {
                let env = Env::point(x);
                for (i, j, e) in entries {
                    set(*i, *j, e.eval(&env));
                }
            }
        }
    }

    pub fn bivector(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let mut buf = [0.0; MAX_DIM * MAX_DIM];
        self.bivector_into(x, &mut buf);
        DMatrix::from_row_slice(n, n, &buf[..n * n])
    }

    /// `out_j = Σ_i α_i Λ_ij(x)`; no allocation.
    #[inline]
    pub fn sharp_into(&self, x: &[f64], alpha: &[f64], out: &mut [f64]) {
        let n = self.dim;
        let mut lam = [0.0; MAX_DIM * MAX_DIM];
        self.bivector_into(x, &mut lam);
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += alpha[i] * lam[i * n + j];
            }
            out[j] = s;
        }
    }

    /// The musical map ♯.
    pub fn sharp(&self, alpha: &Covector) -> Result<Vector> {
        check_dim(self.dim, alpha.base.len())?;
        check_dim(self.dim, alpha.components.len())?;
        let mut v = vec![0.0; self.dim];
        self.sharp_into(&alpha.base, &alpha.components, &mut v);
        Ok(Vector {
            base: alpha.base.clone(),
            components: v,
        })
    }

    /// `Λ(a, b)` for covector components `a`, `b` at `x`, summed over `i < j` as
    /// `Λ_ij (a_i b_j − a_j b_i)` so that swapping `a` and `b` negates the result exactly.
    pub fn pairing(&self, x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let n = self.dim;
        let mut lam = [0.0; MAX_DIM * MAX_DIM];
        self.bivector_into(x, &mut lam);
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let l = lam[i * n + j];
                if l != 0.0 {
                    s += l * (a[i] * b[j] - a[j] * b[i]);
                }
            }
        }
        s
    }

    /// The Poisson bracket `{F, H}(x) = Λ(dF, dH)`.
    pub fn bracket(&self, f: &dyn ScalarField, h: &dyn ScalarField, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let n = self.dim;
        let mut df = [0.0; MAX_DIM];
        let mut dh = [0.0; MAX_DIM];
        f.gradient(x, &mut df[..n]);
        h.gradient(x, &mut dh[..n]);
        finite_or_err(&df[..n], "dF")?;
        finite_or_err(&dh[..n], "dH")?;
        Ok(self.pairing(x, &df[..n], &dh[..n]))
    }

    /// `X_F(x) = ♯(dF(x))`.
    pub fn hamiltonian_field(&self, f: &dyn ScalarField, x: &[f64]) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        let n = self.dim;
        let mut df = [0.0; MAX_DIM];
        f.gradient(x, &mut df[..n]);
        finite_or_err(&df[..n], "dF")?;
        let mut v = vec![0.0; n];
        self.sharp_into(x, &df[..n], &mut v);
        Ok(Vector {
            base: x.to_vec(),
            components: v,
        })
    }

    /// `|{F,{G,H}} + {H,{F,G}} + {G,{H,F}}|(x)`, inner brackets differentiated numerically.
    pub fn jacobi_residual(
        &self,
        f: &dyn ScalarField,
        g: &dyn ScalarField,
        h: &dyn ScalarField,
        x: &[f64],
    ) -> Result<f64> {
        let gh = BracketField { p: self, f: g, h };
        let fg = BracketField { p: self, f, h: g };
        let hf = BracketField { p: self, f: h, h: f };
        let a = self.bracket(f, &gh, x)?;
        let b = self.bracket(h, &fg, x)?;
        let c = self.bracket(g, &hf, x)?;
        let r = a + b + c;
        if !r.is_finite() {
            return Err(Error::NumericDomain("non-finite Jacobi residual".into()));
        }
        Ok(r.abs())
    }

    /// Rank, tangent space and leaf symplectic matrix at `x`.
    pub fn leaf_at(&self, x: &[f64]) -> Result<LeafChart> {
        check_dim(self.dim, x.len())?;
        let n = self.dim;
        let lam = self.bivector(x);
        let scale = lam.amax().max(1.0);
        let svd = lam.clone().svd(true, false);
        let u = svd.u.as_ref().expect("svd computed with u");
        let tol = 1e-10 * scale;
        let image: Vec<DVector<f64>> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, s)| **s > tol)
            .map(|(k, _)| u.column(k).into_owned())
            .collect();
        let rank = image.len();

        // Gram–Schmidt on the projections of e_1..e_n keeps the basis
        // coordinate-aligned whenever the image is a coordinate subspace.
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(rank);
        for i in 0..n {
            if basis.len() == rank {
                break;
            }
            let mut v = DVector::zeros(n);
            for col in &image {
                v += col * col[i];
            }
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
            let norm = v.norm();
            if norm > 1e-8 {
                v /= norm;
                v.iter_mut().for_each(|e| {
                    if e.abs() < 1e-14 {
                        *e = 0.0
                    }
                });
                basis.push(v);
            }
        }
        let bmat = if rank > 0 {
            DMatrix::from_columns(&basis)
        } else {
            DMatrix::zeros(n, 0)
        };
        let restricted = bmat.transpose() * &lam * &bmat;
        let sigma = if rank > 0 {
            restricted
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::NumericDomain("restricted bivector is singular on its image".into()))?
        } else {
            DMatrix::zeros(0, 0)
        };
        Ok(LeafChart {
            base: x.to_vec(),
            dim: rank,
            basis: basis.iter().map(|b| b.iter().copied().collect()).collect(),
            restricted,
            sigma,
            proper: self.is_builtin() && rank > 0,
            affine: self.is_builtin(),
        })
    }
}

fn finite_or_err(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericDomain(format!("non-finite gradient {what}")))
    }
}

/// `{F, H}` as a scalar field; its gradient is taken numerically.
pub struct BracketField<'a> {
    pub p: &'a PoissonStructure,
    pub f: &'a dyn ScalarField,
    pub h: &'a dyn ScalarField,
}

impl ScalarField for BracketField<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.p.bracket(self.f, self.h, x).unwrap_or(f64::NAN)
    }
}

/// Pointwise description of the symplectic leaf through a point.
#[derive(Debug, Clone)]
pub struct LeafChart {
    pub base: Vec<f64>,
    /// Rank of Λ at the base point.
    pub dim: usize,
    /// Orthonormal basis of `♯(T*_x)`.
    pub basis: Vec<Vec<f64>>,
    /// Λ expressed in the basis, `Bᵀ Λ B`.
    pub restricted: DMatrix<f64>,
    /// Leaf symplectic matrix, the inverse of `restricted`.
    pub sigma: DMatrix<f64>,
    /// Structure metadata: positive-dimensional leaf of a built-in structure.
    pub proper: bool,
    /// The leaf is the affine subspace `base + span(basis)` (built-ins only).
    pub affine: bool,
}

impl LeafChart {
    /// Point of the chart with leaf coordinates `u`.
    pub fn embed(&self, u: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (b, c) in self.basis.iter().zip(u) {
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi += c * bi;
            }
        }
        x
    }

    /// Leaf coordinates of the orthogonal projection of `x` onto the leaf.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|b| {
                b.iter()
                    .zip(x)
                    .zip(&self.base)
                    .map(|((bi, xi), oi)| bi * (xi - oi))
                    .sum()
            })
            .collect()
    }

    /// Euclidean distance from `x` to the affine leaf.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let p = self.embed(&self.coordinates(x));
        p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// `‖σ_L · (Λ restricted) − I‖_max`.
    pub fn inverse_residual(&self) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        let prod = &self.sigma * &self.restricted;
        (prod - DMatrix::identity(self.dim, self.dim)).amax()
    }

    /// For a 2-dimensional leaf, κ with σ_L = κ · [[0, −1], [1, 0]].
    pub fn area_density(&self) -> Option<f64> {
        (self.dim == 2).then(|| self.sigma[(1, 0)])
    }

    /// Whether every basis vector is a signed coordinate unit vector.
    pub fn coordinate_aligned(&self) -> bool {
        self.basis
            .iter()
            .all(|b| b.iter().filter(|v| **v != 0.0).count() == 1 && b.iter().any(|v| (v.abs() - 1.0).abs() < 1e-12))
    }
}
