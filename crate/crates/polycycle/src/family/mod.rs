//! Parametric planar polynomial vector fields and coordinate charts.
//!
//! A `ParametricFamily` stores the monomial coefficient tables of
//! dx/dt = P(x,y;μ), dy/dt = Q(x,y;μ) as expressions over the parameter
//! names.  Instantiating the family at a concrete μ produces dense
//! coefficient grids for the affine chart and for the two projective charts
//! used near the line at infinity:
//!
//! * `ProjectiveX`: u = y/x, v = 1/x  (covers the x > 0 end of the plane)
//! * `ProjectiveY`: u = x/y, v = 1/y  (covers the y > 0 end)
//!
//! In a projective chart the pushed-forward field has a factor 1/v^{d-1}
//! (d = degree); keeping it preserves true time, which is what all return
//! time measurements are made in.  The grids store the polynomial part, and
//! the true-time velocity divides by v^{d-1} on evaluation.

mod expr;
mod instance;
mod parse;

pub use expr::Expr;
pub use instance::{FieldInstance, PolyGrid};
pub use parse::{parse_family, serialize_family};

use std::collections::BTreeMap;

use thiserror::Error;

/// Maximum total degree accepted by the parser; guards the dense monomial
/// grids and keeps instantiation O(d^2).
pub const DEGREE_CAP: usize = 12;

/// Errors for family construction and evaluation.
#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("parameter `{name}` is not declared by this family/parameter point")]
    UnknownParameter { name: String },
    #[error("evaluation at the line at infinity (v = 0) in a projective chart")]
    ProjectiveAtInfinity,
    #[error("chart transformation undefined at this point ({reason})")]
    ChartSingularity { reason: String },
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown symbol `{name}` (not x, y, or a declared parameter)")]
    UnknownSymbol { name: String },
    #[error("total degree {found} exceeds the cap {cap}")]
    DegreeOverflow { found: usize, cap: usize },
    #[error("invalid parameter point: {0}")]
    BadParamPoint(String),
}

/// A named parameter vector μ ∈ Λ ⊂ ℝᴺ.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    names: Vec<String>,
    components: Vec<f64>,
}

impl ParamPoint {
    pub fn new<S: AsRef<str>>(names: &[S], components: &[f64]) -> Result<Self, FamilyError> {
        if names.is_empty() {
            return Err(FamilyError::BadParamPoint("no parameters".into()));
        }
        if names.len() != components.len() {
            return Err(FamilyError::BadParamPoint(format!(
                "{} names but {} components",
                names.len(),
                components.len()
            )));
        }
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_owned()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(FamilyError::BadParamPoint(format!("duplicate name `{n}`")));
            }
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(FamilyError::BadParamPoint("non-finite component".into()));
        }
        Ok(Self {
            names,
            components: components.to_vec(),
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn get(&self, name: &str) -> Result<f64, FamilyError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.components[i])
            .ok_or_else(|| FamilyError::UnknownParameter { name: name.into() })
    }

    /// Copy with one component replaced (used by finite differencing and the
    /// arc Newton solver).
    pub fn with_component(&self, index: usize, value: f64) -> Self {
        let mut out = self.clone();
        out.components[index] = value;
        out
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Coordinate chart tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Affine,
    /// u = y/x, v = 1/x.
    ProjectiveX,
    /// u = x/y, v = 1/y.
    ProjectiveY,
}

impl ChartKind {
    pub fn is_projective(self) -> bool {
        self != ChartKind::Affine
    }
}

impl std::fmt::Display for ChartKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChartKind::Affine => write!(f, "affine"),
            ChartKind::ProjectiveX => write!(f, "projective_x"),
            ChartKind::ProjectiveY => write!(f, "projective_y"),
        }
    }
}

/// A chart together with the power of v dividing the transformed field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chart {
    pub kind: ChartKind,
    /// κ: the transformed field is (polynomial)/v^κ; κ = 0 in the affine
    /// chart and κ = d − 1 in the projective charts.
    pub time_factor_exponent: u32,
}

impl Chart {
    pub fn for_family(kind: ChartKind, degree: usize) -> Self {
        let kappa = if kind.is_projective() {
            degree.saturating_sub(1) as u32
        } else {
            0
        };
        Chart {
            kind,
            time_factor_exponent: kappa,
        }
    }
}

/// A point in one of the three charts.  In projective charts v ≥ 0, with
/// v = 0 on the line at infinity.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlanePoint {
    pub coords: [f64; 2],
    pub chart: ChartKind,
}

impl PlanePoint {
    pub fn affine(x: f64, y: f64) -> Self {
        PlanePoint {
            coords: [x, y],
            chart: ChartKind::Affine,
        }
    }

    pub fn new(chart: ChartKind, c0: f64, c1: f64) -> Self {
        PlanePoint {
            coords: [c0, c1],
            chart,
        }
    }
}

/// Transform a point between charts.  Round trips are the identity wherever
/// both directions are defined.
pub fn to_chart(p: PlanePoint, target: ChartKind) -> Result<PlanePoint, FamilyError> {
    use ChartKind::*;
    let [c0, c1] = p.coords;
    let sing = |reason: &str| FamilyError::ChartSingularity {
        reason: reason.into(),
    };
    let coords = match (p.chart, target) {
        (a, b) if a == b => [c0, c1],
        (Affine, ProjectiveX) => {
            // u = y/x, v = 1/x
            if c0 == 0.0 {
                return Err(sing("x = 0 maps to infinity of the ProjectiveX chart"));
            }
            [c1 / c0, 1.0 / c0]
        }
        (Affine, ProjectiveY) => {
            if c1 == 0.0 {
                return Err(sing("y = 0 maps to infinity of the ProjectiveY chart"));
            }
            [c0 / c1, 1.0 / c1]
        }
        (ProjectiveX, Affine) => {
            // x = 1/v, y = u/v
            if c1 == 0.0 {
                return Err(sing("v = 0 is the line at infinity"));
            }
            [1.0 / c1, c0 / c1]
        }
        (ProjectiveY, Affine) => {
            if c1 == 0.0 {
                return Err(sing("v = 0 is the line at infinity"));
            }
            [c0 / c1, 1.0 / c1]
        }
        // Between the two projective charts: (u, v) -> (1/u, v/u).  This is
        // the transition on the overlap (both x and y nonzero), valid also
        // on the line at infinity v = 0 away from the axis endpoints.
        (ProjectiveX, ProjectiveY) | (ProjectiveY, ProjectiveX) => {
            if c0 == 0.0 {
                return Err(sing("u = 0 is the other chart's infinity"));
            }
            [1.0 / c0, c1 / c0]
        }
        _ => unreachable!(),
    };
    if !coords.iter().all(|c| c.is_finite()) {
        return Err(sing("non-finite result"));
    }
    Ok(PlanePoint {
        coords,
        chart: target,
    })
}

/// Monomial coefficient table: (i, j) ↦ coefficient expression for x^i y^j.
pub type CoeffTable = BTreeMap<(usize, usize), Expr>;

/// A parametric polynomial planar vector field.
#[derive(Debug, Clone)]
pub struct ParametricFamily {
    pub name: String,
    degree: usize,
    params: Vec<String>,
    px_coeffs: CoeffTable,
    py_coeffs: CoeffTable,
}

impl ParametricFamily {
    /// Build from coefficient tables; degree is the maximum total degree of
    /// the monomials actually present.
    pub fn from_tables(
        name: &str,
        params: Vec<String>,
        px_coeffs: CoeffTable,
        py_coeffs: CoeffTable,
    ) -> Result<Self, FamilyError> {
        let degree = px_coeffs
            .keys()
            .chain(py_coeffs.keys())
            .map(|&(i, j)| i + j)
            .max()
            .unwrap_or(0);
        if degree > DEGREE_CAP {
            return Err(FamilyError::DegreeOverflow {
                found: degree,
                cap: DEGREE_CAP,
            });
        }
        Ok(Self {
            name: name.to_owned(),
            degree,
            params,
            px_coeffs,
            py_coeffs,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn px_coeffs(&self) -> &CoeffTable {
        &self.px_coeffs
    }

    pub fn py_coeffs(&self) -> &CoeffTable {
        &self.py_coeffs
    }

    pub fn chart(&self, kind: ChartKind) -> Chart {
        Chart::for_family(kind, self.degree)
    }

    /// Substitute μ into the coefficient tables, producing dense numeric
    /// grids for all three charts.  This is the object the integrator works
    /// with; construction is O(d^2), evaluation is branch-free Horner.
    pub fn instantiate(&self, mu: &ParamPoint) -> Result<FieldInstance, FamilyError> {
        FieldInstance::build(self, mu)
    }
}

/// True-time velocity of the family at `p`, expressed in `chart`.
///
/// In projective charts the 1/v^{d-1} factor is included so that time is the
/// time of the affine flow; v = 0 is rejected (`ProjectiveAtInfinity`).
pub fn eval_field(
    family: &ParametricFamily,
    chart: ChartKind,
    mu: &ParamPoint,
    p: PlanePoint,
) -> Result<[f64; 2], FamilyError> {
    debug_assert_eq!(p.chart, chart);
    family.instantiate(mu)?.velocity(chart, p.coords)
}

/// Analytic Jacobian of the chart-local true-time field at `p`.
pub fn jacobian(
    family: &ParametricFamily,
    chart: ChartKind,
    mu: &ParamPoint,
    p: PlanePoint,
) -> Result<[[f64; 2]; 2], FamilyError> {
    debug_assert_eq!(p.chart, chart);
    family.instantiate(mu)?.jacobian(chart, p.coords)
}

/// The Kolmogorov benchmark family
///
///   x' = x (1 + x + x² + a·x·y + p·y²)
///   y' = y (−1 − y + q·x² + a·x·y − y²)
///
/// with parameters (a, p, q).  For p < −1, q > 1 the boundary of the first
/// quadrant (both axes plus the arc of the line at infinity between their
/// endpoints) is a persistent hyperbolic polycycle with three vertices: the
/// origin and the two infinite saddles at the axis directions.  Its graphic
/// number is r(μ) = (−1−p)/(q−1), independent of a, and μ₀ = (0, p₀, −p₀)
/// is a center-type configuration (return map ≡ identity).
pub fn builtin_kolmogorov() -> ParametricFamily {
    let text = "x' = x*(1 + x + x^2 + a*x*y + p*y^2); \
                y' = y*(-1 - y + q*x^2 + a*x*y - y^2); \
                params a, p, q";
    let mut fam = parse_family(text).expect("builtin family text is well-formed");
    fam.name = "kolmogorov".into();
    fam
}
