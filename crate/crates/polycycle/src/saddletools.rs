//! Saddle refinement, eigen-structure, hyperbolicity ratios, the graphic
//! number r(μ), and structural persistence checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{ChartKind, FamilyError, FieldInstance, ParamPoint, ParametricFamily, PlanePoint};
use crate::flow::{FlowError, Section};

/// |r(μ₀) − 1| above this (exclusive) triggers the no-bifurcation advisory.
pub const NO_BIFURCATION_THRESHOLD: f64 = 1e-3;
/// Imaginary parts below this fraction of the spectral radius are treated as
/// zero when classifying eigenvalues; analytic Jacobians of polynomial
/// fields give clean real pairs away from degeneracies.
const IMAG_TOL: f64 = 1e-9;
/// Eigen-pair residual bound ‖Jv − λv‖ enforced on every accepted saddle.
const EIGEN_RESIDUAL_TOL: f64 = 1e-8;
/// Equilibrium residual bound ‖F(p)‖ ≤ tol · scale for saddle_data inputs.
const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-10;

/// Errors from saddle refinement and classification.
#[derive(Debug, Error)]
pub enum SaddleError {
    #[error("Newton did not converge for '{label}': residual {residual:.3e} after {iterations} iterations")]
    NoConvergence {
        label: String,
        iterations: usize,
        residual: f64,
    },
    #[error("singular Jacobian (|det| = {det:.3e}) while refining '{label}'")]
    SingularJacobian { label: String, det: f64 },
    #[error("not a hyperbolic saddle: {reason}")]
    NotASaddle { reason: String },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// An approximate saddle location with a human-readable label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaddleSeed {
    pub location: PlanePoint,
    pub label: String,
}

impl SaddleSeed {
    pub fn new(location: PlanePoint, label: &str) -> Self {
        SaddleSeed {
            location,
            label: label.to_string(),
        }
    }
}

/// Refined saddle with its eigen-structure and hyperbolicity ratio.
#[derive(Debug, Clone)]
pub struct SaddleData {
    pub location: PlanePoint,
    /// λᵘ > 0.
    pub unstable_eig: f64,
    /// λˢ < 0.
    pub stable_eig: f64,
    pub unstable_dir: [f64; 2],
    pub stable_dir: [f64; 2],
    /// Hyperbolicity ratio −λˢ/λᵘ > 0.
    pub ratio: f64,
    pub chart: ChartKind,
}

/// The graphic number r(μ) with its per-saddle factors.
#[derive(Debug, Clone)]
pub struct GraphicNumber {
    pub value: f64,
    pub factors: Vec<f64>,
}

/// An invariant line whose persistence underpins the unbroken connections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvariantLine {
    XAxis,
    YAxis,
    LineAtInfinity,
}

/// A separatrix connection between consecutive saddles, carried by one of
/// the invariant lines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Connection {
    pub from: String,
    pub to: String,
    pub carrier: InvariantLine,
}

/// User-supplied description of the polycycle: ordered saddles, the
/// connections between them, and one transversal section per connection.
#[derive(Debug, Clone)]
pub struct PolycycleSkeleton {
    pub saddles: Vec<SaddleSeed>,
    pub connections: Vec<Connection>,
    pub sections: Vec<Section>,
}

impl PolycycleSkeleton {
    /// Structural validation: one section per connection, all sections
    /// transversal at their base for the given instance.  A skeleton with
    /// no saddles is allowed as the degenerate case of a plain Poincaré
    /// map (a single free section, no connections).
    pub fn validate(&self, inst: &FieldInstance) -> Result<(), SaddleError> {
        if self.sections.is_empty() {
            return Err(SaddleError::Flow(FlowError::BadConfig(
                "skeleton has no sections".into(),
            )));
        }
        if self.saddles.is_empty() {
            for sec in &self.sections {
                sec.validate_transversal(inst)?;
            }
            return Ok(());
        }
        if self.sections.len() != self.connections.len() {
            return Err(SaddleError::Flow(FlowError::BadConfig(format!(
                "{} sections for {} connections",
                self.sections.len(),
                self.connections.len()
            ))));
        }
        for sec in &self.sections {
            sec.validate_transversal(inst)?;
        }
        Ok(())
    }

    /// Whether at least one vertex lies in the affine plane; the period
    /// asymptotics need a finite saddle to produce the logarithmic term.
    pub fn has_finite_saddle(&self) -> bool {
        self.saddles
            .iter()
            .any(|s| s.location.chart == ChartKind::Affine)
    }
}

/// The benchmark skeleton: the origin plus the two saddles on the line at
/// infinity in the coordinate directions, joined along the axes and the
/// equator, with one section per connection.
pub fn builtin_kolmogorov_skeleton() -> PolycycleSkeleton {
    let o = SaddleSeed::new(PlanePoint::affine(0.02, 0.03), "O");
    let nx = SaddleSeed::new(PlanePoint::new(ChartKind::ProjectiveX, 0.05, 0.05), "Nx");
    let ny = SaddleSeed::new(PlanePoint::new(ChartKind::ProjectiveY, 0.05, 0.05), "Ny");
    let conn = |from: &str, to: &str, carrier| Connection {
        from: from.into(),
        to: to.into(),
        carrier,
    };
    PolycycleSkeleton {
        saddles: vec![o, nx, ny],
        connections: vec![
            conn("O", "Nx", InvariantLine::XAxis),
            conn("Nx", "Ny", InvariantLine::LineAtInfinity),
            conn("Ny", "O", InvariantLine::YAxis),
        ],
        sections: vec![
            Section::new(PlanePoint::affine(1.0, 0.0), [0.0, 1.0], -1),
            Section::new(PlanePoint::new(ChartKind::ProjectiveX, 1.0, 0.0), [0.0, 1.0], 0),
            Section::new(PlanePoint::affine(0.0, 1.0), [1.0, 0.0], 0),
        ],
    }
}

/// Chart-local field used for equilibrium work: the rescaled (polynomial)
/// field in projective charts — its zeros with v > 0 coincide with the true
/// ones, and it extends analytically to the line at infinity {v = 0} where
/// the infinite saddles live.
fn local_field(inst: &FieldInstance, chart: ChartKind, coords: [f64; 2]) -> [f64; 2] {
    inst.rescaled_velocity(chart, coords)
}

fn local_jacobian(inst: &FieldInstance, chart: ChartKind, coords: [f64; 2]) -> [[f64; 2]; 2] {
    match chart {
        ChartKind::Affine => inst.jacobian(chart, coords).expect("affine chart is total"),
        _ => inst.rescaled_jacobian(chart, coords),
    }
}

/// Refine an approximate equilibrium by damped Newton iteration on the
/// chart-local field.
pub fn find_equilibrium(
    family: &ParametricFamily,
    mu: &ParamPoint,
    seed: &SaddleSeed,
    tol: f64,
) -> Result<PlanePoint, SaddleError> {
    let inst = family.instantiate(mu)?;
    let chart = seed.location.chart;
    let mut x = seed.location.coords;
    let mut f = local_field(&inst, chart, x);
    let mut res = f[0].hypot(f[1]);
    const MAX_ITER: usize = 50;
    for it in 0..MAX_ITER {
        if res <= tol {
            return Ok(PlanePoint {
                coords: x,
                chart,
            });
        }
        let j = local_jacobian(&inst, chart, x);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let jnorm = j.iter().flatten().fold(0.0f64, |m, e| m.max(e.abs()));
        if det.abs() <= 1e-14 * jnorm * jnorm || !det.is_finite() {
            return Err(SaddleError::SingularJacobian {
                label: seed.label.clone(),
                det,
            });
        }
        let dx = [
            -(f[0] * j[1][1] - f[1] * j[0][1]) / det,
            -(f[1] * j[0][0] - f[0] * j[1][0]) / det,
        ];
        // Backtracking line search: accept the first step that reduces the
        // residual; a far-off seed that cannot make progress fails cleanly.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            let xt = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            let ft = local_field(&inst, chart, xt);
            let rt = ft[0].hypot(ft[1]);
            if rt.is_finite() && rt < res {
                x = xt;
                f = ft;
                res = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(SaddleError::NoConvergence {
                label: seed.label.clone(),
                iterations: it + 1,
                residual: res,
            });
        }
    }
    if res <= tol {
        Ok(PlanePoint { coords: x, chart })
    } else {
        Err(SaddleError::NoConvergence {
            label: seed.label.clone(),
            iterations: MAX_ITER,
            residual: res,
        })
    }
}

/// Eigen-structure of the chart-local Jacobian at a refined equilibrium,
/// classified as a hyperbolic saddle.
pub fn saddle_data(
    family: &ParametricFamily,
    mu: &ParamPoint,
    location: PlanePoint,
) -> Result<SaddleData, SaddleError> {
    let inst = family.instantiate(mu)?;
    let chart = location.chart;
    let f = local_field(&inst, chart, location.coords);
    let j = local_jacobian(&inst, chart, location.coords);
    let jnorm = j.iter().flatten().fold(0.0f64, |m, e| m.max(e.abs()));
    let scale = jnorm * (1.0 + location.coords[0].hypot(location.coords[1]));
    if f[0].hypot(f[1]) > EQUILIBRIUM_RESIDUAL_TOL * scale.max(1.0) {
        return Err(SaddleError::NotASaddle {
            reason: format!(
                "location is not an equilibrium: |F| = {:.3e}",
                f[0].hypot(f[1])
            ),
        });
    }
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    let rho = 0.5 * (tr.abs() + disc.abs().sqrt());
    if disc < 0.0 && disc.abs().sqrt() * 0.5 > IMAG_TOL * rho.max(1e-300) {
        return Err(SaddleError::NotASaddle {
            reason: format!("complex eigenvalues, imaginary part {:.3e}", disc.abs().sqrt() * 0.5),
        });
    }
    let sq = disc.max(0.0).sqrt();
    let (l_plus, l_minus) = (0.5 * (tr + sq), 0.5 * (tr - sq));
    if !(l_plus > 0.0 && l_minus < 0.0) {
        return Err(SaddleError::NotASaddle {
            reason: format!("eigenvalues ({l_plus:.6e}, {l_minus:.6e}) are not of opposite signs"),
        });
    }
    let eigvec = |lambda: f64| -> [f64; 2] {
        // Rows of J − λI are parallel; a nonzero vector orthogonal to the
        // larger row is the eigenvector.
        let r0 = [j[0][0] - lambda, j[0][1]];
        let r1 = [j[1][0], j[1][1] - lambda];
        let n0 = r0[0].hypot(r0[1]);
        let n1 = r1[0].hypot(r1[1]);
        let r = if n0 >= n1 { r0 } else { r1 };
        let v = if r[0].hypot(r[1]) == 0.0 {
            // J is already λI on this row: any direction works; pick the
            // coordinate axis matching the diagonal entry.
            if (j[0][0] - lambda).abs() <= (j[1][1] - lambda).abs() {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            }
        } else {
            [-r[1], r[0]]
        };
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    };
    let unstable_dir = eigvec(l_plus);
    let stable_dir = eigvec(l_minus);
    for (lambda, v) in [(l_plus, unstable_dir), (l_minus, stable_dir)] {
        let jv = [
            j[0][0] * v[0] + j[0][1] * v[1],
            j[1][0] * v[0] + j[1][1] * v[1],
        ];
        let r = (jv[0] - lambda * v[0]).hypot(jv[1] - lambda * v[1]);
        if r > EIGEN_RESIDUAL_TOL * rho.max(1.0) {
            return Err(SaddleError::NotASaddle {
                reason: format!("eigen-pair residual {r:.3e} exceeds tolerance"),
            });
        }
    }
    Ok(SaddleData {
        location,
        unstable_eig: l_plus,
        stable_eig: l_minus,
        unstable_dir,
        stable_dir,
        ratio: -l_minus / l_plus,
        chart,
    })
}

/// Refine every skeleton saddle and multiply the hyperbolicity ratios into
/// the graphic number r(μ), with factors reported in skeleton order.
pub fn graphic_number(
    family: &ParametricFamily,
    mu: &ParamPoint,
    skeleton: &PolycycleSkeleton,
) -> Result<GraphicNumber, SaddleError> {
    let mut factors = Vec::with_capacity(skeleton.saddles.len());
    for seed in &skeleton.saddles {
        let loc = find_equilibrium(family, mu, seed, 1e-12)?;
        let data = saddle_data(family, mu, loc)?;
        factors.push(data.ratio);
    }
    let value = factors.iter().product();
    Ok(GraphicNumber { value, factors })
}

/// Structural invariance of one of the candidate connection carriers,
/// decided by exact divisibility of the instantiated coefficient tables —
/// persistence is a structural hypothesis, not a numerical tolerance.
pub fn check_invariance(
    family: &ParametricFamily,
    mu: &ParamPoint,
    line: InvariantLine,
) -> Result<bool, SaddleError> {
    let inst = family.instantiate(mu)?;
    Ok(match line {
        // {y = 0} is invariant iff y divides the y-component.
        InvariantLine::XAxis => inst.grids(ChartKind::Affine)[1].divisible_by_y(),
        // {x = 0} is invariant iff x divides the x-component.
        InvariantLine::YAxis => inst.grids(ChartKind::Affine)[0].divisible_by_x(),
        // {v = 0} in both projective charts must be carried by the
        // v-component of the transformed field.
        InvariantLine::LineAtInfinity => {
            inst.grids(ChartKind::ProjectiveX)[1].divisible_by_y()
                && inst.grids(ChartKind::ProjectiveY)[1].divisible_by_y()
        }
    })
}

/// Advisory raised when r(μ₀) is too far from 1 for any limit cycle to
/// bifurcate from the polycycle: downstream cycle searches near s = 0 are
/// then expected to fail.
#[derive(Debug, Clone, PartialEq)]
pub struct Advisory {
    pub message: String,
}

/// Strict-threshold check |r − 1| > NO_BIFURCATION_THRESHOLD (exclusive at
/// the boundary).
pub fn no_bifurcation_guard(graphic: &GraphicNumber) -> Option<Advisory> {
    let dev = (graphic.value - 1.0).abs();
    // Ulp-level slack keeps the exclusive boundary honest for values like
    // 0.999 whose binary representation overshoots the decimal by rounding.
    if dev > NO_BIFURCATION_THRESHOLD * (1.0 + 1e-9) {
        Some(Advisory {
            message: format!(
                "graphic number r = {:.6} is bounded away from 1 (|r - 1| = {:.3e}); \
                 cyclicity is 0 and no limit cycle bifurcates near s = 0",
                graphic.value, dev
            ),
        })
    } else {
        None
    }
}
