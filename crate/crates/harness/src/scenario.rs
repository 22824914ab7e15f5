//! Scenario files: TOML documents declaring a structure, named Hamiltonians
//! and a list of experiments. The layout is documented in `SCENARIOS.md`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub structure: StructureDecl,
    #[serde(default)]
    pub seed: u64,
    pub grid: Option<GridDecl>,
    pub integrator: Option<IntegratorDecl>,
    pub sampler: Option<SamplerDecl>,
    #[serde(default)]
    pub hamiltonians: BTreeMap<String, HamiltonianDecl>,
    #[serde(default)]
    pub experiments: Vec<Experiment>,
}

/// A built-in label such as `"heisenberg3"`, or a custom bivector.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum StructureDecl {
    Label(String),
    Custom(CustomStructure),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomStructure {
    pub label: String,
    pub dim: usize,
    /// Upper-triangular entries `Λ_ij`, 1-based `i < j`.
    pub entries: Vec<BivectorEntry>,
    #[serde(default)]
    pub casimirs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BivectorEntry {
    pub i: usize,
    pub j: usize,
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDecl {
    pub resolution: Option<usize>,
    pub time_nodes: Option<usize>,
    pub refine: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorDecl {
    /// `"rk45"` (default) or `"rk4"`.
    pub method: Option<String>,
    pub tol: Option<f64>,
    pub steps_per_unit: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerDecl {
    pub boundary: Option<usize>,
    pub lattice_per_axis: Option<usize>,
    pub halton: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDecl {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Smooth cutoff: 1 on `[lo, hi]`, 0 beyond `margin`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateauDecl {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionDecl {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

/// Hamiltonian declarations, keyed by name in `[hamiltonians.<name>]`.
///
/// Primitive families take an optional time profile `g(t)` (an expression in
/// `t`, default `1`); derived ones refer to other declarations by name.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianDecl {
    Zero,
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        height: f64,
        profile: Option<String>,
    },
    /// `scale · (x_axis − offset) · plateau`, `axis` 1-based.
    Coordinate {
        axis: usize,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        offset: f64,
        plateau: PlateauDecl,
        profile: Option<String>,
    },
    /// Linear function whose field is the constant `velocity` on the plateau.
    Translation {
        velocity: Vec<f64>,
        plateau: PlateauDecl,
        profile: Option<String>,
    },
    /// `½ ω |x − center|² · plateau`.
    Rotation {
        center: Vec<f64>,
        omega: f64,
        plateau: PlateauDecl,
        profile: Option<String>,
    },
    /// Expression in `x1..xn`, `t` and `p1..pk`.
    Custom {
        expr: String,
        #[serde(default)]
        params: Vec<f64>,
        support: Option<BoxDecl>,
        profile: Option<String>,
    },
    /// A random built-in family member drawn from the scenario seed.
    Random,
    Compose {
        first: String,
        second: String,
    },
    Inverse {
        of: String,
    },
    /// `H ∘ φ`, with `φ` the time-one map of `by`.
    Pullback {
        by: String,
        of: String,
    },
    Reparametrize {
        of: String,
        sigma: String,
    },
    Flatten {
        of: String,
        delta: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl HamiltonianDecl {
    pub fn family(&self) -> &'static str {
        match self {
            HamiltonianDecl::Zero => "zero",
            HamiltonianDecl::Bump { .. } => "bump",
            HamiltonianDecl::Coordinate { .. } => "coordinate",
            HamiltonianDecl::Translation { .. } => "translation",
            HamiltonianDecl::Rotation { .. } => "rotation",
            HamiltonianDecl::Custom { .. } => "custom",
            HamiltonianDecl::Random => "random",
            HamiltonianDecl::Compose { .. } => "compose",
            HamiltonianDecl::Inverse { .. } => "inverse",
            HamiltonianDecl::Pullback { .. } => "pullback",
            HamiltonianDecl::Reparametrize { .. } => "reparametrize",
            HamiltonianDecl::Flatten { .. } => "flatten",
        }
    }

    /// Names of the declarations this one is built from.
    pub fn references(&self) -> Vec<&str> {
        match self {
            HamiltonianDecl::Compose { first, second } => vec![first, second],
            HamiltonianDecl::Inverse { of }
            | HamiltonianDecl::Reparametrize { of, .. }
            | HamiltonianDecl::Flatten { of, .. } => vec![of],
            HamiltonianDecl::Pullback { by, of } => vec![by, of],
            _ => vec![],
        }
    }
}

pub const HAMILTONIAN_FAMILIES: &[(&str, &str)] = &[
    ("zero", "F = 0"),
    ("bump", "smooth bump {center, radius, height}"),
    (
        "coordinate",
        "scale·(x_axis − offset)·plateau {axis (1-based), scale, offset, plateau}",
    ),
    (
        "translation",
        "linear function with constant field `velocity` on a plateau {velocity, plateau}",
    ),
    ("rotation", "½ω|x − center|²·plateau {center, omega, plateau}"),
    ("custom", "expression in x1..xn, t, p1..pk {expr, params, support}"),
    (
        "random",
        "a random bump / coordinate·plateau / bump pair drawn from the seed",
    ),
    ("compose", "F#H, generating φ_F^t ∘ φ_H^t {first, second}"),
    ("inverse", "F̄, generating (φ_F^t)⁻¹ {of}"),
    ("pullback", "H ∘ φ with φ the time-one map of `by` {by, of}"),
    (
        "reparametrize",
        "σ′(t)·F(σ(t), x), σ ∈ identity/square/cosine {of, sigma}",
    ),
    (
        "flatten",
        "reparametrization stationary on [0, δ] and [1 − δ, 1] {of, delta}",
    ),
];

/// Candidate families for the displacement search.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CandidateDecl {
    /// `v·(x_axis − c)·χ`; `axis` 1-based, defaulting to the structure's choice.
    CutoffShift {
        axis: Option<usize>,
    },
    Rotation,
    Custom {
        expr: String,
        bounds: BoxDecl,
        support: BoxDecl,
    },
}

pub const CANDIDATE_FAMILIES: &[(&str, &str)] = &[
    (
        "cutoff-shift",
        "v·(x_axis − c)·χ with params (v, δ); moves U along ♯dx_axis",
    ),
    (
        "rotation",
        "½ω|x − c|²·χ about U's center, params (ω, δ); never displaces U",
    ),
    ("custom", "user expression in x1..xn and p1..pk over a parameter box"),
];

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetDecl {
    pub coarse_per_axis: Option<usize>,
    pub starts: Option<usize>,
    pub evals_per_start: Option<usize>,
}

/// `"valid"` or `"invalid"` for Jacobi checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectDisplaced {
    Displaced,
    NotDisplaced,
}

fn default_times() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

fn t_one() -> f64 {
    1.0
}

/// One experiment; `op` selects the variant.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Sharp {
        point: Vec<f64>,
        covector: Vec<f64>,
        expect: Option<Vec<f64>>,
        tol: Option<f64>,
    },
    Bracket {
        f: String,
        h: String,
        point: Vec<f64>,
        expect: Option<f64>,
        tol: Option<f64>,
    },
    HamiltonianField {
        f: String,
        point: Vec<f64>,
        expect: Option<Vec<f64>>,
        tol: Option<f64>,
    },
    /// Max Jacobi residual over random points; coordinate triples unless
    /// `functions` lists three expressions.
    Jacobi {
        points: Option<usize>,
        half: Option<f64>,
        functions: Option<Vec<String>>,
        expect: Option<Validity>,
        tol: Option<f64>,
    },
    Leaf {
        point: Vec<f64>,
        expect_dim: Option<usize>,
    },
    RestrictToLeaf {
        hamiltonian: String,
        leaf_point: Vec<f64>,
        u: Vec<f64>,
        #[serde(default)]
        t: f64,
        expect: Option<f64>,
        tol: Option<f64>,
    },
    Flow {
        hamiltonian: String,
        point: Vec<f64>,
        #[serde(default = "t_one")]
        t: f64,
        expect: Option<Vec<f64>>,
        tol: Option<f64>,
    },
    RoundTrip {
        hamiltonian: String,
        points: Option<usize>,
        half: Option<f64>,
    },
    /// Casimir drift against `tol`; energy drift (autonomous `F` only)
    /// against `energy_tol`.
    Conservation {
        hamiltonian: String,
        points: Option<usize>,
        half: Option<f64>,
        tol: Option<f64>,
        energy_tol: Option<f64>,
    },
    GroupLaws {
        f: String,
        h: String,
        points: Option<usize>,
        half: Option<f64>,
        tol: Option<f64>,
    },
    Reparametrization {
        hamiltonian: String,
        sigmas: Option<Vec<String>>,
        points: Option<usize>,
        tol: Option<f64>,
    },
    FlattenBoundary {
        hamiltonian: String,
        delta: f64,
        points: Option<usize>,
        tol: Option<f64>,
    },
    Oscillation {
        hamiltonian: String,
        #[serde(default)]
        t: f64,
        expect: Option<f64>,
        tol: Option<f64>,
    },
    Length {
        hamiltonian: String,
        expect: Option<f64>,
        tol: Option<f64>,
    },
    PseudoNorm {
        f: String,
        h: String,
        tol: Option<f64>,
    },
    CheckDisplaced {
        hamiltonian: String,
        region: RegionDecl,
        #[serde(default = "t_one")]
        t: f64,
        expect: Option<ExpectDisplaced>,
    },
    DisplacementUpperBound {
        region: RegionDecl,
        candidates: Option<CandidateDecl>,
        budget: Option<BudgetDecl>,
        /// Search this superset first and seed the search with its witness.
        superset: Option<RegionDecl>,
        expect_range: Option<[f64; 2]>,
        #[serde(default)]
        expect_infinite: bool,
        min_margin: Option<f64>,
    },
    GromovWidth {
        region: RegionDecl,
        leaf_point: Option<Vec<f64>>,
        expect: Option<f64>,
        tol: Option<f64>,
    },
    EnergyCapacityCheck {
        region: RegionDecl,
        candidates: Option<CandidateDecl>,
        budget: Option<BudgetDecl>,
    },
    LeafRestriction {
        hamiltonian: String,
        leaf_point: Vec<f64>,
        expect_leaf_length: Option<f64>,
        tol: Option<f64>,
    },
    GroupoidInvariants {
        realization: String,
        samples: Option<usize>,
        half: Option<f64>,
        tol: Option<f64>,
    },
    LiftProjection {
        realization: String,
        hamiltonian: String,
        samples: Option<usize>,
        half: Option<f64>,
        #[serde(default = "default_times")]
        times: Vec<f64>,
        tol: Option<f64>,
    },
    TargetFiber {
        realization: String,
        hamiltonian: String,
        samples: Option<usize>,
        half: Option<f64>,
        #[serde(default = "default_times")]
        times: Vec<f64>,
        tol: Option<f64>,
    },
    CutoffDisplacement {
        realization: String,
        hamiltonian: String,
        ball: RegionDecl,
        pad: Option<f64>,
        margin: Option<f64>,
        tol: Option<f64>,
    },
}

pub const OPS: &[(&str, &str)] = &[
    ("sharp", "♯α at a point"),
    ("bracket", "{F, H}(x) for expressions F, H"),
    ("hamiltonian_field", "X_F(x) = ♯dF"),
    ("jacobi", "max Jacobi residual over random points"),
    ("leaf", "symplectic leaf chart through a point"),
    ("restrict_to_leaf", "F_L(t, u) on leaf coordinates"),
    ("flow", "φ_F^t(x), optionally against a closed form"),
    ("round_trip", "φ⁻ᵗ ∘ φᵗ = id on random points"),
    ("conservation", "Casimir and energy drift along flows"),
    ("group_laws", "endpoint identities of compose / inverse / pullback"),
    ("reparametrization", "length and endpoint invariance under σ"),
    (
        "flatten_boundary",
        "flattened isotopy: same endpoint, stationary near 0",
    ),
    ("oscillation", "max − min of F_t"),
    ("length", "∫ ‖F_t‖ dt, with the oscillation curve as plot data"),
    ("pseudo_norm", "triangle, inverse and pullback identities for lengths"),
    ("check_displaced", "does φ_F^t(U) miss U, with margin"),
    (
        "displacement_upper_bound",
        "best verified displacing witness over a family",
    ),
    ("gromov_width", "πr² or leafwise area of a ball"),
    ("energy_capacity_check", "½ c(U) ≤ upper bound of E(U)"),
    ("leaf_restriction", "length of F_L ≤ length of F"),
    (
        "groupoid_invariants",
        "units, s Poisson, t anti-Poisson, Jacobi on the total chart",
    ),
    ("lift_projection", "s ∘ φ̃^t = φ^t ∘ s"),
    ("target_fiber", "t ∘ φ̃^t = t"),
    (
        "cutoff_displacement",
        "F^λ displaces a ball over U and is no longer than F",
    ),
];

impl Experiment {
    pub fn op(&self) -> &'static str {
        match self {
            Experiment::Sharp { .. } => "sharp",
            Experiment::Bracket { .. } => "bracket",
            Experiment::HamiltonianField { .. } => "hamiltonian_field",
            Experiment::Jacobi { .. } => "jacobi",
            Experiment::Leaf { .. } => "leaf",
            Experiment::RestrictToLeaf { .. } => "restrict_to_leaf",
            Experiment::Flow { .. } => "flow",
            Experiment::RoundTrip { .. } => "round_trip",
            Experiment::Conservation { .. } => "conservation",
            Experiment::GroupLaws { .. } => "group_laws",
            Experiment::Reparametrization { .. } => "reparametrization",
            Experiment::FlattenBoundary { .. } => "flatten_boundary",
            Experiment::Oscillation { .. } => "oscillation",
            Experiment::Length { .. } => "length",
            Experiment::PseudoNorm { .. } => "pseudo_norm",
            Experiment::CheckDisplaced { .. } => "check_displaced",
            Experiment::DisplacementUpperBound { .. } => "displacement_upper_bound",
            Experiment::GromovWidth { .. } => "gromov_width",
            Experiment::EnergyCapacityCheck { .. } => "energy_capacity_check",
            Experiment::LeafRestriction { .. } => "leaf_restriction",
            Experiment::GroupoidInvariants { .. } => "groupoid_invariants",
            Experiment::LiftProjection { .. } => "lift_projection",
            Experiment::TargetFiber { .. } => "target_fiber",
            Experiment::CutoffDisplacement { .. } => "cutoff_displacement",
        }
    }

    /// Hamiltonian names this experiment refers to.
    pub fn hamiltonians(&self) -> Vec<&str> {
        match self {
            Experiment::RestrictToLeaf { hamiltonian, .. }
            | Experiment::Flow { hamiltonian, .. }
            | Experiment::RoundTrip { hamiltonian, .. }
            | Experiment::Conservation { hamiltonian, .. }
            | Experiment::Reparametrization { hamiltonian, .. }
            | Experiment::FlattenBoundary { hamiltonian, .. }
            | Experiment::Oscillation { hamiltonian, .. }
            | Experiment::Length { hamiltonian, .. }
            | Experiment::CheckDisplaced { hamiltonian, .. }
            | Experiment::LeafRestriction { hamiltonian, .. }
            | Experiment::LiftProjection { hamiltonian, .. }
            | Experiment::TargetFiber { hamiltonian, .. }
            | Experiment::CutoffDisplacement { hamiltonian, .. } => vec![hamiltonian],
            Experiment::GroupLaws { f, h, .. } | Experiment::PseudoNorm { f, h, .. } => vec![f, h],
            _ => vec![],
        }
    }
}

fn line_column(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

impl Scenario {
    pub fn parse(src: &str, path: &Path) -> Result<Self> {
        toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_column(src, s.start));
            HarnessError::Parse {
                path: path.to_path_buf(),
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)?;
        Self::parse(&src, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario() {
        let s = Scenario::parse("id = \"x\"\nstructure = \"heisenberg3\"\n", Path::new("x.toml")).unwrap();
        assert_eq!(s.structure, StructureDecl::Label("heisenberg3".into()));
        assert!(s.experiments.is_empty());
        assert_eq!(s.seed, 0);
    }

    #[test]
    fn parse_errors_carry_positions() {
        let src = "id = \"x\"\nstructure = \"heisenberg3\"\n\n[[experiments]]\nop = \"flow\"\nhamiltonian = 3\n";
        match Scenario::parse(src, Path::new("bad.toml")) {
            Err(HarnessError::Parse { line, .. }) => assert!((4..=6).contains(&line), "{line}"),
            other => panic!("{other:?}"),
        }
        let src = "id = \"x\"\nstructure = \"heisenberg3\"\nbogus = 1\n";
        match Scenario::parse(src, Path::new("bad.toml")) {
            Err(HarnessError::Parse { line, column, .. }) => assert_eq!((line, column), (3, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tagged_declarations() {
        let src = r#"
id = "t"
structure = { label = "k", dim = 3, entries = [{ i = 1, j = 2, value = "x3" }] }

[hamiltonians.F]
family = "bump"
center = [0.0, 0.0, 1.0]
radius = 0.5

[hamiltonians.G]
family = "compose"
first = "F"
second = "F"

[[experiments]]
op = "displacement_upper_bound"
region = { ball = { center = [0.0, 0.0, 1.0], radius = 0.3 } }
candidates = { kind = "cutoff-shift", axis = 1 }
"#;
        let s = Scenario::parse(src, Path::new("t.toml")).unwrap();
        assert_eq!(s.hamiltonians["F"].family(), "bump");
        assert_eq!(s.hamiltonians["G"].references(), vec!["F", "F"]);
        assert_eq!(s.experiments[0].op(), "displacement_upper_bound");
        assert!(matches!(s.structure, StructureDecl::Custom(_)));
    }
}
