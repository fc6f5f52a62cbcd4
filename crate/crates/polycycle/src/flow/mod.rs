//! Orbit integration with dense output, transversal-section events, true
//! transit-time accumulation, and chart switching near infinity.
//!
//! Projective-chart segments are stepped in a rescaled time: the integrator
//! advances the polynomial part (C_u, C_v) of the transformed field and
//! carries true time as a third state component with dt/dτ = v^{d−1}.  This
//! is exactly the true-time flow (the time component is the factor the
//! chart transform divides out), but it stays finite arbitrarily close to
//! the line at infinity, which deep polycycle passages require — near a
//! cycle at s ~ 1e−130 the orbit approaches {v = 0} closely enough that the
//! 1/v^{d−1} factor of the literal pushed-forward field overflows.

mod rk;

pub use rk::DenseStep;

use thiserror::Error;

use crate::family::{
    to_chart, ChartKind, FamilyError, FieldInstance, ParamPoint, ParametricFamily, PlanePoint,
};
use crate::num::brent;
use rk::{initial_step, try_step, State, StepOutcome};

/// Relative band used to decide that a crossing is tangential.
const TANGENT_TOL: f64 = 1e-8;
/// Event residual target, scaled by the local section coordinate magnitude.
const EVENT_TOL: f64 = 1e-12;
/// Velocity norm below which we declare the orbit stuck at an equilibrium.
const VELOCITY_FLOOR: f64 = 1e-290;

/// Errors produced by the integration driver.
#[derive(Debug, Error)]
pub enum FlowError {
    #[error("step limit exceeded ({0} steps)")]
    StepLimitExceeded(usize),
    #[error("state left the chart atlas (blow-up or negative-direction escape) at ({0}, {1})")]
    BlowUp(f64, f64),
    #[error("velocity below machine floor near an equilibrium")]
    SingularityReached,
    #[error("no section crossing within max_time={max_time} / max_steps={max_steps}")]
    NoCrossing { max_time: f64, max_steps: usize },
    #[error("crossing is tangential: |field x direction| = {0:.3e} relative to the speed")]
    TangentialCrossing(f64),
    #[error("section direction is not transversal to the field at its base")]
    SectionNotTransversal,
    #[error("invalid integrator config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// A transversal section σ(s) = base + s·direction in a fixed chart.
#[derive(Debug, Clone)]
pub struct Section {
    pub base: PlanePoint,
    /// Unit vector; normalized on construction.
    pub direction: [f64; 2],
    /// Sign of the accepted crossing of the signed coordinate
    /// g(p) = direction × (p − base): +1, −1, or 0 for either.
    pub orientation: i8,
}

impl Section {
    pub fn new(base: PlanePoint, direction: [f64; 2], orientation: i8) -> Self {
        let n = direction[0].hypot(direction[1]);
        assert!(n > 0.0, "section direction must be nonzero");
        Section {
            base,
            direction: [direction[0] / n, direction[1] / n],
            orientation: orientation.signum(),
        }
    }

    pub fn chart(&self) -> ChartKind {
        self.base.chart
    }

    /// The point σ(s) = base + s·direction.
    pub fn point_at(&self, s: f64) -> PlanePoint {
        PlanePoint {
            coords: [
                self.base.coords[0] + s * self.direction[0],
                self.base.coords[1] + s * self.direction[1],
            ],
            chart: self.base.chart,
        }
    }

    /// Signed transversal coordinate of `coords` (same chart assumed).
    pub fn signed_coord(&self, coords: [f64; 2]) -> f64 {
        let w = [
            coords[0] - self.base.coords[0],
            coords[1] - self.base.coords[1],
        ];
        self.direction[0] * w[1] - self.direction[1] * w[0]
    }

    /// Section coordinate s of `coords` (projection on the direction).
    pub fn s_of(&self, coords: [f64; 2]) -> f64 {
        let w = [
            coords[0] - self.base.coords[0],
            coords[1] - self.base.coords[1],
        ];
        self.direction[0] * w[0] + self.direction[1] * w[1]
    }

    /// Runtime transversality check at the base point.  Uses the rescaled
    /// field so that sections based on the line at infinity are admissible.
    pub fn validate_transversal(&self, inst: &FieldInstance) -> Result<(), FlowError> {
        let f = inst.rescaled_velocity(self.chart(), self.base.coords);
        let speed = f[0].hypot(f[1]);
        let crossing = self.direction[0] * f[1] - self.direction[1] * f[0];
        if speed == 0.0 || crossing.abs() <= TANGENT_TOL * speed {
            return Err(FlowError::SectionNotTransversal);
        }
        Ok(())
    }
}

/// Integrator tuning knobs.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub max_time: f64,
    /// Distance-from-infinity threshold: integration hands over to a
    /// projective chart when ‖(x, y)‖ > 1/chart_switch_radius.
    pub chart_switch_radius: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_steps: 100_000,
            max_time: 1e4,
            chart_switch_radius: 0.2,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(1e-14..=1e-2).contains(&v) {
                return Err(FlowError::BadConfig(format!(
                    "{name} = {v:e} outside [1e-14, 1e-2]"
                )));
            }
        }
        if self.max_steps == 0 {
            return Err(FlowError::BadConfig("max_steps must be >= 1".into()));
        }
        if !(self.max_time > 0.0) || !(self.chart_switch_radius > 0.0) {
            return Err(FlowError::BadConfig(
                "max_time and chart_switch_radius must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A located section crossing.
#[derive(Debug, Clone)]
pub struct CrossingEvent {
    /// Section coordinate of the hit point.
    pub s_out: f64,
    /// Accumulated true time from start to the hit.
    pub transit_time: f64,
    pub step_count: usize,
    pub charts_visited: Vec<ChartKind>,
    /// The hit point, in the section's chart.
    pub hit_point: PlanePoint,
}

/// Deterministic chart selection with a 10% hysteresis band.
///
/// From the affine chart: stay while ‖(x, y)‖ ≤ 1.1/chart_switch_radius,
/// otherwise pick the projective chart of the dominant coordinate.  From a
/// projective chart: return to affine when v exceeds 1.1·radius; hand over
/// to the sibling projective chart when |u| > 1.1 (the other chart is then
/// better conditioned).  The asymmetric in/out thresholds prevent flip
/// oscillation across the band.
pub fn switch_chart_policy(state: &PlanePoint, cfg: &IntegratorConfig) -> ChartKind {
    const HYST: f64 = 1.1;
    let [c0, c1] = state.coords;
    match state.chart {
        ChartKind::Affine => {
            let r = c0.hypot(c1);
            if r <= HYST / cfg.chart_switch_radius {
                ChartKind::Affine
            } else if c0.abs() >= c1.abs() {
                ChartKind::ProjectiveX
            } else {
                ChartKind::ProjectiveY
            }
        }
        proj => {
            let (u, v) = (c0, c1);
            if v >= HYST * cfg.chart_switch_radius {
                ChartKind::Affine
            } else if u.abs() > HYST {
                match proj {
                    ChartKind::ProjectiveX => ChartKind::ProjectiveY,
                    _ => ChartKind::ProjectiveX,
                }
            } else {
                proj
            }
        }
    }
}

/// One chart-homogeneous accepted step, with its true-time range.
#[derive(Debug, Clone)]
pub struct TrajectorySegment {
    pub chart: ChartKind,
    pub dense: DenseStep,
    /// True time at the start/end of the step (relative to the start of the
    /// whole trajectory; always nonnegative, also for backward flow).
    pub t_true: (f64, f64),
}

/// A computed orbit piece with dense output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub segments: Vec<TrajectorySegment>,
    pub end: PlanePoint,
    /// Elapsed true time (nonnegative; the flow direction is `backward`).
    pub duration: f64,
    pub backward: bool,
    pub steps: usize,
    pub charts_visited: Vec<ChartKind>,
}

impl Trajectory {
    /// Sample the dense interpolant at elapsed true time `t` ∈ [0, duration].
    /// The result is in whatever chart the orbit occupied at that moment.
    pub fn sample(&self, t: f64) -> Option<PlanePoint> {
        let seg = self
            .segments
            .iter()
            .find(|s| t >= s.t_true.0 && t <= s.t_true.1)?;
        // The dense step is parametrized by the integration variable; invert
        // the (monotone) time component for theta.
        let theta = if seg.t_true.1 > seg.t_true.0 {
            brent(
                |th| seg.dense.eval(th)[2] - t,
                0.0,
                1.0,
                1e-14,
                0.0,
                200,
            )?
        } else {
            0.0
        };
        let s = seg.dense.eval(theta);
        Some(PlanePoint {
            coords: [s[0], s[1]],
            chart: seg.chart,
        })
    }

    /// Sample and convert to the affine chart (None if on the line at
    /// infinity at that time).
    pub fn sample_affine(&self, t: f64) -> Option<PlanePoint> {
        to_chart(self.sample(t)?, ChartKind::Affine).ok()
    }
}

enum StopCondition<'a> {
    Section(&'a Section),
    ElapsedTime(f64),
}

struct DriveResult {
    trajectory: Trajectory,
    hit: Option<CrossingEvent>,
}

fn rhs(inst: &FieldInstance, chart: ChartKind, backward: bool, y: &State) -> State {
    let c = [y[0], y[1]];
    let w = inst.rescaled_velocity(chart, c);
    let tf = inst.time_factor(chart, c);
    let s = if backward { -1.0 } else { 1.0 };
    [s * w[0], s * w[1], tf]
}

fn convert_for_switch(p: PlanePoint, target: ChartKind) -> Result<PlanePoint, FlowError> {
    let q = to_chart(p, target).map_err(|_| FlowError::BlowUp(p.coords[0], p.coords[1]))?;
    if target.is_projective() && q.coords[1] <= 0.0 {
        // The needed chart only covers the positive end of its axis; an
        // escape in a negative direction has no chart here.
        return Err(FlowError::BlowUp(p.coords[0], p.coords[1]));
    }
    Ok(q)
}

/// Core driver: steps in the current chart, locates the stop condition on
/// the dense output, switches charts per policy between steps.
fn drive(
    inst: &FieldInstance,
    start: PlanePoint,
    backward: bool,
    cfg: &IntegratorConfig,
    stop: StopCondition,
) -> Result<DriveResult, FlowError> {
    cfg.validate()?;
    if !start.coords.iter().all(|c| c.is_finite()) {
        return Err(FlowError::BlowUp(start.coords[0], start.coords[1]));
    }

    let mut point = start;
    // Apply the policy at the start (a caller may hand us a far-out affine
    // point).
    let target = switch_chart_policy(&point, cfg);
    if target != point.chart {
        point = convert_for_switch(point, target)?;
    }

    let mut chart = point.chart;
    let mut y: State = [point.coords[0], point.coords[1], 0.0];
    let mut segments: Vec<TrajectorySegment> = Vec::new();
    let mut charts_visited = vec![chart];
    let mut steps = 0usize;

    // Crossing detection is disarmed while the start still sits inside the
    // event band of the section (we must not report the departure itself).
    let mut armed = match &stop {
        StopCondition::Section(sec) if sec.chart() == chart => {
            sec.signed_coord([y[0], y[1]]).abs() > EVENT_TOL * (1.0 + y[0].abs() + y[1].abs())
        }
        _ => true,
    };

    'charts: loop {
        let mut f = |s: &State| rhs(inst, chart, backward, s);
        let mut k1 = f(&y);
        if k1[0].hypot(k1[1]) < VELOCITY_FLOOR {
            return Err(FlowError::SingularityReached);
        }
        let mut h = initial_step(&mut f, &y, &k1, cfg.rel_tol, cfg.abs_tol);
        let mut tau = 0.0;

        loop {
            if steps >= cfg.max_steps {
                return Err(match stop {
                    StopCondition::Section(_) => FlowError::NoCrossing {
                        max_time: cfg.max_time,
                        max_steps: cfg.max_steps,
                    },
                    StopCondition::ElapsedTime(_) => FlowError::StepLimitExceeded(cfg.max_steps),
                });
            }
            steps += 1;
            let dense = match try_step(&mut f, tau, &y, &k1, h, cfg.rel_tol, cfg.abs_tol) {
                StepOutcome::Rejected { h_retry } => {
                    if h_retry < 1e-14 * tau.abs().max(1.0) {
                        return Err(FlowError::SingularityReached);
                    }
                    h = h_retry;
                    continue;
                }
                StepOutcome::Accepted { dense, h_next } => {
                    h = h_next;
                    dense
                }
            };
            let y1 = dense.end_state();
            if !y1.iter().all(|c| c.is_finite()) {
                return Err(FlowError::BlowUp(y1[0], y1[1]));
            }

            // Event location on the interpolant.
            let g_of = |th: f64| -> f64 {
                let s = dense.eval(th);
                match &stop {
                    StopCondition::Section(sec) => sec.signed_coord([s[0], s[1]]),
                    StopCondition::ElapsedTime(t_end) => s[2] - t_end,
                }
            };
            let event_applies = match &stop {
                StopCondition::Section(sec) => sec.chart() == chart,
                StopCondition::ElapsedTime(_) => true,
            };
            if event_applies && !armed {
                // Re-arm once the orbit has cleanly left the event band.
                let s = dense.end_state();
                let band = EVENT_TOL * (1.0 + s[0].abs() + s[1].abs());
                if g_of(1.0).abs() > band {
                    armed = true;
                }
            } else if event_applies {
                // Scan a few subintervals so that two crossings inside one
                // step are resolved in order.
                let thetas = [0.0, 0.25, 0.5, 0.75, 1.0];
                let gs: Vec<f64> = thetas.iter().map(|&t| g_of(t)).collect();
                for w in 0..4 {
                    let (ga, gb) = (gs[w], gs[w + 1]);
                    if ga == 0.0 && w > 0 {
                        continue; // already handled as the end of previous subinterval
                    }
                    if ga.signum() != gb.signum() || gb == 0.0 {
                        let theta = brent(g_of, thetas[w], thetas[w + 1], 1e-15, 0.0, 200)
                            .unwrap_or(thetas[w + 1]);
                        let s_hit = dense.eval(theta);
                        let hit_ok = match &stop {
                            StopCondition::Section(sec) => {
                                // Orientation of the crossing: sign of dg/dτ
                                // along the integrated (possibly backward)
                                // field.
                                let vel = rhs(inst, chart, backward, &s_hit);
                                let gdot = sec.direction[0] * vel[1] - sec.direction[1] * vel[0];
                                let speed = vel[0].hypot(vel[1]);
                                if gdot.abs() <= TANGENT_TOL * speed {
                                    return Err(FlowError::TangentialCrossing(
                                        gdot.abs() / speed.max(f64::MIN_POSITIVE),
                                    ));
                                }
                                sec.orientation == 0
                                    || (gdot > 0.0) == (sec.orientation > 0)
                            }
                            StopCondition::ElapsedTime(_) => true,
                        };
                        if hit_ok {
                            let t_hit = s_hit[2];
                            segments.push(TrajectorySegment {
                                chart,
                                dense: dense.clone(),
                                t_true: (y[2], y1[2]),
                            });
                            let hit_point = PlanePoint {
                                coords: [s_hit[0], s_hit[1]],
                                chart,
                            };
                            let hit = match &stop {
                                StopCondition::Section(sec) => Some(CrossingEvent {
                                    s_out: sec.s_of([s_hit[0], s_hit[1]]),
                                    transit_time: t_hit,
                                    step_count: steps,
                                    charts_visited: charts_visited.clone(),
                                    hit_point,
                                }),
                                StopCondition::ElapsedTime(_) => None,
                            };
                            return Ok(DriveResult {
                                trajectory: Trajectory {
                                    segments,
                                    end: hit_point,
                                    duration: t_hit,
                                    backward,
                                    steps,
                                    charts_visited,
                                },
                                hit,
                            });
                        }
                    }
                }
            }

            if matches!(stop, StopCondition::Section(_)) && y1[2] > cfg.max_time {
                return Err(FlowError::NoCrossing {
                    max_time: cfg.max_time,
                    max_steps: cfg.max_steps,
                });
            }

            segments.push(TrajectorySegment {
                chart,
                dense,
                t_true: (y[2], y1[2]),
            });
            let last = segments.last().unwrap();
            tau = last.dense.t0 + last.dense.h;
            y = y1;
            k1 = f(&y);

            // Chart handover between steps.
            let here = PlanePoint {
                coords: [y[0], y[1]],
                chart,
            };
            let target = switch_chart_policy(&here, cfg);
            if target != chart {
                let moved = convert_for_switch(here, target)?;
                chart = target;
                y = [moved.coords[0], moved.coords[1], y[2]];
                charts_visited.push(chart);
                continue 'charts;
            }
        }
    }
}

/// Integrate the orbit of the family through `start` for a true-time span
/// `t_end` (negative for backward flow), with dense output.
pub fn integrate(
    family: &ParametricFamily,
    mu: &ParamPoint,
    start: PlanePoint,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, FlowError> {
    if !t_end.is_finite() {
        return Err(FlowError::BadConfig("t_end must be finite".into()));
    }
    let inst = family.instantiate(mu)?;
    let res = drive(
        &inst,
        start,
        t_end < 0.0,
        cfg,
        StopCondition::ElapsedTime(t_end.abs()),
    )?;
    Ok(res.trajectory)
}

/// Flow from `start` to the first matching crossing of `section`,
/// accumulating true transit time across all charts visited.
pub fn flow_to_section(
    family: &ParametricFamily,
    mu: &ParamPoint,
    start: PlanePoint,
    section: &Section,
    cfg: &IntegratorConfig,
) -> Result<CrossingEvent, FlowError> {
    let inst = family.instantiate(mu)?;
    flow_to_section_inst(&inst, start, section, false, cfg)
}

/// As `flow_to_section` but on a prebuilt instance (hot path for return-map
/// sampling) and with an explicit flow direction.
pub fn flow_to_section_inst(
    inst: &FieldInstance,
    start: PlanePoint,
    section: &Section,
    backward: bool,
    cfg: &IntegratorConfig,
) -> Result<CrossingEvent, FlowError> {
    section.validate_transversal(inst)?;
    let res = drive(inst, start, backward, cfg, StopCondition::Section(section))?;
    res.hit.ok_or(FlowError::NoCrossing {
        max_time: cfg.max_time,
        max_steps: cfg.max_steps,
    })
}
