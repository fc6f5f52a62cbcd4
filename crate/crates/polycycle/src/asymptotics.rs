//! Limit-cycle location, period asymptotics along parameter paths, τ
//! admissibility checks, and construction/verification of slow arcs through
//! a center-type seed.

use serde::Serialize;
use thiserror::Error;

use crate::family::{FamilyError, ParamPoint, ParametricFamily};
use crate::flow::{FlowError, IntegratorConfig};
use crate::num::{brent, geomspace};
use crate::returnmap::{
    fit_power_law, fit_return_time, sample_return_map, ReturnMapError, ReturnMapper, ReturnSample,
    ReturnSource, SampleStatus, FIT_SAMPLES, FIT_WINDOW,
};
use crate::saddletools::{graphic_number, PolycycleSkeleton, SaddleError};

/// Relative tolerance on the fixed-point defect of an accepted cycle.
pub const CYCLE_REL_TOL: f64 = 1e-10;
/// Smallness threshold for the τ-condition sequences at the smallest α.
pub const TAU_SMALLNESS: f64 = 1e-2;
/// Condition-number cap on the 2×2 arc Jacobian; beyond it the rank-2
/// hypothesis is numerically violated.
pub const ARC_COND_CAP: f64 = 1e6;
/// Arc Newton acceptance threshold on the residual norm.
pub const ARC_RESIDUAL_TOL: f64 = 1e-6;

/// Errors for cycle location and the asymptotic verifiers.
#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error("displacement has no sign change on the bracket ({lo:.3e}, {hi:.3e})")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("iteration failed to converge: {0}")]
    NoConvergence(String),
    #[error("degenerate exponent: |r - 1| = {0:.3e} < 1e-12")]
    DegenerateExponent(f64),
    #[error("path point {index} is outside the existence region: (r-1)(A-1) = {product:.3e}")]
    PathOutsideW { index: usize, product: f64 },
    #[error("rank-2 hypothesis violated: arc Jacobian condition number {0:.3e}")]
    RankDeficient(f64),
    #[error("arc Newton diverged at alpha = {alpha:.3e} (residual {residual:.3e})")]
    NewtonDiverged { alpha: f64, residual: f64 },
    #[error("insufficient samples: {got} valid, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error(transparent)]
    ReturnMap(#[from] ReturnMapError),
    #[error(transparent)]
    Saddle(#[from] SaddleError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// A located limit cycle on the reference section.
#[derive(Debug, Clone, Serialize)]
pub struct CycleRecord {
    pub s_star: f64,
    pub period: f64,
    /// log ℛ′(s_star), estimated by central differences in log-log
    /// coordinates.
    pub multiplier_log: f64,
    pub mu: Vec<f64>,
}

/// Closed-form return model ℛ(s) = A s^r, 𝒯(s) = T̄₀ log s + c; the offline
/// oracle that separates the asymptotic verifiers from integration error.
#[derive(Debug, Clone, serde::Deserialize)]
pub struct OfflineModel {
    pub a: f64,
    pub r: f64,
    pub t0_bar: f64,
    #[serde(default)]
    pub c: f64,
}

impl ReturnSource for OfflineModel {
    fn return_pair(&self, s: f64) -> Result<(f64, f64), ReturnMapError> {
        if !(s > 0.0) {
            return Err(ReturnMapError::DomainError(format!(
                "offline model requires s > 0, got {s}"
            )));
        }
        Ok((self.a * s.powf(self.r), self.t0_bar * s.ln() + self.c))
    }
}

impl OfflineModel {
    /// Sample the model over a grid into `ReturnSample`s (for the fits).
    pub fn sample(&self, s_grid: &[f64]) -> Vec<ReturnSample> {
        s_grid
            .iter()
            .map(|&s| {
                let (s_out, time) = self.return_pair(s).expect("positive grid");
                ReturnSample {
                    s_in: s,
                    s_out,
                    time,
                    status: SampleStatus::Ok,
                }
            })
            .collect()
    }
}

/// Core bracketed cycle search on any return source, in log coordinates:
/// the root of G(ℓ) = log ℛ(e^ℓ) − ℓ is the fixed point of ℛ.
pub fn find_limit_cycle_core(
    source: &dyn ReturnSource,
    bracket: (f64, f64),
    mu: &[f64],
) -> Result<CycleRecord, AsymptoticsError> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(AsymptoticsError::DomainError(format!(
            "bracket must satisfy 0 < lo < hi, got ({lo:.3e}, {hi:.3e})"
        )));
    }
    // Cache evaluations: Brent re-probes endpoints and every map
    // evaluation may be a full integration.
    let g = |ls: f64| -> Result<f64, ReturnMapError> {
        let (s_out, _) = source.return_pair(ls.exp())?;
        Ok(s_out.ln() - ls)
    };
    let (g_lo, g_hi) = (g(lo.ln())?, g(hi.ln())?);
    if !(g_lo * g_hi < 0.0) {
        return Err(AsymptoticsError::NoSignChange { lo, hi });
    }
    let mut failure: Option<ReturnMapError> = None;
    let root = brent(
        |ls| match g(ls) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        },
        lo.ln(),
        hi.ln(),
        1e-12,
        0.0,
        200,
    );
    if let Some(e) = failure {
        return Err(e.into());
    }
    let ls_star = root.ok_or_else(|| {
        AsymptoticsError::NoConvergence("bracketed cycle search stalled".into())
    })?;
    let s_star = ls_star.exp();
    let (s_back, period) = source.return_pair(s_star)?;
    let defect = (s_back - s_star).abs();
    if defect > CYCLE_REL_TOL * s_star {
        return Err(AsymptoticsError::NoConvergence(format!(
            "fixed-point defect {defect:.3e} exceeds {CYCLE_REL_TOL:e} * s_star"
        )));
    }
    // Multiplier from the log-log slope: ℛ′(s*) = slope · ℛ(s*)/s* and
    // ℛ(s*) = s*, so log ℛ′ = log slope.
    let h = 1e-3;
    let (up, _) = source.return_pair((ls_star + h).exp())?;
    let (dn, _) = source.return_pair((ls_star - h).exp())?;
    let slope = (up.ln() - dn.ln()) / (2.0 * h);
    Ok(CycleRecord {
        s_star,
        period,
        multiplier_log: slope.ln(),
        mu: mu.to_vec(),
    })
}

/// Locate the unique limit cycle of the composed return map on a bracket.
pub fn find_limit_cycle(
    family: &ParametricFamily,
    mu: &ParamPoint,
    skeleton: &PolycycleSkeleton,
    bracket: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<CycleRecord, AsymptoticsError> {
    let mapper = ReturnMapper::new(family, mu, skeleton, cfg)?;
    find_limit_cycle_core(&mapper, bracket, mu.components())
}

/// Leading-order cycle location A^{−1/(r−1)} (the root ansatz with z = 0).
pub fn predicted_location(a_hat: f64, r_hat: f64) -> Result<f64, AsymptoticsError> {
    if (r_hat - 1.0).abs() < 1e-12 {
        return Err(AsymptoticsError::DegenerateExponent((r_hat - 1.0).abs()));
    }
    Ok(a_hat.powf(-1.0 / (r_hat - 1.0)))
}

/// Sign changes of the displacement s^{−r}(s − ℛ(s)) over a log-uniform
/// scan of the window; exactly one change is the empirical uniqueness
/// statement.
pub fn displacement_sign_changes(
    source: &dyn ReturnSource,
    r: f64,
    window: (f64, f64),
    n: usize,
) -> Result<usize, AsymptoticsError> {
    let grid = geomspace(window.0, window.1, n);
    let mut count = 0;
    let mut prev: Option<f64> = None;
    for s in grid {
        let (s_out, _) = source.return_pair(s)?;
        let d = s.powf(-r) * (s - s_out);
        if let Some(p) = prev {
            if p * d < 0.0 {
                count += 1;
            }
        }
        prev = Some(d);
    }
    Ok(count)
}

/// Per-point record of a verified path.
#[derive(Debug, Clone, Serialize)]
pub struct PathPointRecord {
    pub mu: Vec<f64>,
    pub r: f64,
    pub a_hat: f64,
    pub s_star: f64,
    pub period: f64,
    /// u = |1 − r| · period.
    pub u: f64,
    /// v = |1 − r| · |log s_star|.
    pub v: f64,
}

/// Report of the period-law and exponential-approach verification.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremAReport {
    pub points: Vec<PathPointRecord>,
    /// Limit estimate of u (its last value).
    pub u_limit: f64,
    pub v_limit: f64,
    /// Relative variation of u over the last three points.
    pub u_variation_last3: f64,
    pub v_variation_last3: f64,
    /// −T̄₀ · |log Â| at the final point (expected limit of u).
    pub u_expected: f64,
    /// |log Â| at the final point (expected limit of v).
    pub v_expected: f64,
    pub t0_bar_hat: f64,
}

fn last3_variation(vals: &[f64]) -> f64 {
    let n = vals.len();
    let tail = &vals[n.saturating_sub(3)..];
    let lo = tail.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = tail.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mid = 0.5 * (lo + hi);
    if mid == 0.0 {
        0.0
    } else {
        (hi - lo) / mid.abs()
    }
}

/// One path point prepared for the core verifier: the graphic number, the
/// fitted leading coefficient, the time fit, and a map evaluator.
pub struct PathPointEval<'a> {
    pub mu: Vec<f64>,
    pub r: f64,
    pub a_hat: f64,
    pub t0_bar_hat: f64,
    pub source: &'a dyn ReturnSource,
}

/// Core of the path verification, shared by the dynamical and offline
/// entry points.  Requires |r − 1| strictly decreasing along the path and
/// every point inside W = {(r − 1)(A − 1) > 0}.
pub fn verify_theorem_a_core(
    points: &[PathPointEval<'_>],
) -> Result<TheoremAReport, AsymptoticsError> {
    if points.len() < 3 {
        return Err(AsymptoticsError::InsufficientSamples {
            got: points.len(),
            need: 3,
        });
    }
    let mut records = Vec::with_capacity(points.len());
    let mut prev_gap = f64::INFINITY;
    for (index, pt) in points.iter().enumerate() {
        let gap = (pt.r - 1.0).abs();
        if gap >= prev_gap {
            return Err(AsymptoticsError::DomainError(format!(
                "|r - 1| must decrease along the path; point {index} has {gap:.3e}"
            )));
        }
        prev_gap = gap;
        let product = (pt.r - 1.0) * (pt.a_hat - 1.0);
        if !(product > 0.0) {
            return Err(AsymptoticsError::PathOutsideW { index, product });
        }
        let s_pred = predicted_location(pt.a_hat, pt.r)?;
        // Log-centered bracket around the predicted location; the scan of
        // G is monotone there, so a two-decade pad is ample.
        let pad = 2.5;
        let bracket = ((s_pred.ln() - pad).exp(), (s_pred.ln() + pad).exp());
        let cycle = find_limit_cycle_core(pt.source, bracket, &pt.mu)?;
        let u = gap * cycle.period;
        let v = gap * cycle.s_star.ln().abs();
        records.push(PathPointRecord {
            mu: pt.mu.clone(),
            r: pt.r,
            a_hat: pt.a_hat,
            s_star: cycle.s_star,
            period: cycle.period,
            u,
            v,
        });
    }
    let us: Vec<f64> = records.iter().map(|p| p.u).collect();
    let vs: Vec<f64> = records.iter().map(|p| p.v).collect();
    let last = points.last().unwrap();
    Ok(TheoremAReport {
        u_limit: *us.last().unwrap(),
        v_limit: *vs.last().unwrap(),
        u_variation_last3: last3_variation(&us),
        v_variation_last3: last3_variation(&vs),
        u_expected: -last.t0_bar_hat * last.a_hat.ln().abs(),
        v_expected: last.a_hat.ln().abs(),
        t0_bar_hat: last.t0_bar_hat,
        points: records,
    })
}

/// Dynamical path verification on a family: each path point gets its
/// graphic number from the eigenvalue product and its Â, T̄₀ from return
/// map fits, then the cycle is located and the laws are tabulated.
pub fn verify_theorem_a(
    family: &ParametricFamily,
    skeleton: &PolycycleSkeleton,
    path: &[ParamPoint],
    cfg: &IntegratorConfig,
) -> Result<TheoremAReport, AsymptoticsError> {
    let mut grid = geomspace(FIT_WINDOW.0, FIT_WINDOW.1, FIT_SAMPLES);
    grid.reverse();
    let mut mappers = Vec::new();
    let mut meta = Vec::new();
    for mu in path {
        let r = graphic_number(family, mu, skeleton)?.value;
        let samples = sample_return_map(family, mu, skeleton, &grid, cfg)?;
        let fit = fit_power_law(&samples)?;
        let tfit = fit_return_time(&samples)?;
        meta.push((mu.components().to_vec(), r, fit.a_hat, tfit.t0_bar));
        mappers.push(ReturnMapper::new(family, mu, skeleton, cfg)?);
    }
    let points: Vec<PathPointEval<'_>> = meta
        .iter()
        .zip(&mappers)
        .map(|((mu, r, a_hat, t0), mapper)| PathPointEval {
            mu: mu.clone(),
            r: *r,
            a_hat: *a_hat,
            t0_bar_hat: *t0,
            source: mapper,
        })
        .collect();
    verify_theorem_a_core(&points)
}

/// A candidate slowness function τ with its derivative.
pub struct TauSpec {
    pub description: String,
    tau: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    tau_prime: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl TauSpec {
    pub fn new(
        description: &str,
        tau: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tau_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TauSpec {
            description: description.to_string(),
            tau: Box::new(tau),
            tau_prime: Box::new(tau_prime),
        }
    }

    /// τ(α) = α^l.
    pub fn power(l: f64) -> Self {
        TauSpec::new(
            &format!("alpha^{l}"),
            move |a: f64| a.powf(l),
            move |a: f64| l * a.powf(l - 1.0),
        )
    }

    /// τ(α) = −log α.
    pub fn neg_log() -> Self {
        TauSpec::new("-log(alpha)", |a: f64| -a.ln(), |a: f64| -1.0 / a)
    }

    pub fn tau(&self, alpha: f64) -> f64 {
        (self.tau)(alpha)
    }

    pub fn tau_prime(&self, alpha: f64) -> f64 {
        (self.tau_prime)(alpha)
    }
}

/// Verdicts for the three admissibility limits of τ.
#[derive(Debug, Clone, Serialize)]
pub struct TauVerdict {
    /// α τ(α) → 0.
    pub cond_alpha_tau: bool,
    /// α² τ′(α) → 0.
    pub cond_alpha2_tau_prime: bool,
    /// (log α)/τ(α) → 0.
    pub cond_log_over_tau: bool,
    pub overall: bool,
}

/// Default probe grid for τ: τ = α^l with l close to 0 needs extremely
/// small α before (log α)/τ = α^{|l|} log α dips under the smallness
/// threshold (for l = −0.1 that happens around α ≈ 1e-40).
pub fn default_alpha_probe_grid() -> Vec<f64> {
    let mut g = geomspace(1e-40, 1e-2, 77);
    g.reverse();
    g
}

/// Evaluate the three τ conditions on a decreasing α grid: each sequence
/// must decrease in magnitude over the last two decades and end below the
/// smallness threshold.  Verdicts, not exceptions.
pub fn tau_conditions(tau: &TauSpec, alpha_grid: &[f64]) -> TauVerdict {
    let seqs: [Vec<f64>; 3] = [
        alpha_grid.iter().map(|&a| a * tau.tau(a)).collect(),
        alpha_grid.iter().map(|&a| a * a * tau.tau_prime(a)).collect(),
        alpha_grid.iter().map(|&a| a.ln() / tau.tau(a)).collect(),
    ];
    let a_min = alpha_grid.iter().fold(f64::INFINITY, |m, &a| m.min(a));
    let verdict_of = |seq: &[f64]| -> bool {
        let last = match seq.last() {
            Some(&v) => v.abs(),
            None => return false,
        };
        if !(last < TAU_SMALLNESS) {
            return false;
        }
        // Monotone decrease in magnitude over the last two decades of α.
        let mut prev = f64::INFINITY;
        for (i, &a) in alpha_grid.iter().enumerate() {
            if a <= 100.0 * a_min {
                let m = seq[i].abs();
                if m > prev {
                    return false;
                }
                prev = m;
            }
        }
        true
    };
    let c1 = verdict_of(&seqs[0]);
    let c2 = verdict_of(&seqs[1]);
    let c3 = verdict_of(&seqs[2]);
    TauVerdict {
        cond_alpha_tau: c1,
        cond_alpha2_tau_prime: c2,
        cond_log_over_tau: c3,
        overall: c1 && c2 && c3,
    }
}

/// Outcome flag for one arc grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcStatus {
    Ok,
    NewtonDiverged,
    CycleFailed(String),
}

/// One point of the designed arc.
#[derive(Debug, Clone, Serialize)]
pub struct ArcSample {
    pub alpha: f64,
    pub mu: Vec<f64>,
    /// h(α) = α τ(α).
    pub h: f64,
    pub s_star: f64,
    pub period: f64,
    /// period / τ(α).
    pub ratio: f64,
    /// Final residuals of the two arc equations (r − (1+α), A − (1+h)).
    pub newton_residuals: [f64; 2],
    pub status: ArcStatus,
}

/// Default arc grid: α log-uniform in [1e-4, 1e-2], 9 points, descending
/// (the Newton continuation warm-starts from the previous, larger α).
pub fn default_arc_alpha_grid() -> Vec<f64> {
    let mut g = geomspace(1e-4, 1e-2, 9);
    g.reverse();
    g
}

fn cond_2x2(j: [[f64; 2]; 2]) -> f64 {
    // Singular values from the eigenvalues of JᵀJ.
    let a = j[0][0] * j[0][0] + j[1][0] * j[1][0];
    let b = j[0][0] * j[0][1] + j[1][0] * j[1][1];
    let d = j[0][1] * j[0][1] + j[1][1] * j[1][1];
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
    let s1 = (0.5 * (tr + disc)).max(0.0).sqrt();
    let s2 = (0.5 * (tr - disc)).max(0.0).sqrt();
    if s2 == 0.0 {
        f64::INFINITY
    } else {
        s1 / s2
    }
}

/// Generic arc construction over an (r, A) evaluator and a cycle
/// measurement; the dynamical and offline entry points provide the
/// closures.
pub fn design_arc_core<E, M>(
    mu0: &ParamPoint,
    tau: &TauSpec,
    alpha_grid: &[f64],
    free: (usize, usize),
    mut eval_ra: E,
    mut measure: M,
) -> Result<Vec<ArcSample>, AsymptoticsError>
where
    E: FnMut(&ParamPoint) -> Result<(f64, f64), AsymptoticsError>,
    M: FnMut(&ParamPoint, f64) -> Result<(f64, f64), AsymptoticsError>,
{
    let (i0, i1) = free;
    let n_par = mu0.components().len();
    if i0 >= n_par || i1 >= n_par || i0 == i1 {
        return Err(AsymptoticsError::DomainError(format!(
            "free parameter indices ({i0}, {i1}) invalid for {n_par} parameters"
        )));
    }
    let (r0, a0) = eval_ra(mu0)?;
    if (r0 - 1.0).abs() > 1e-6 || (a0 - 1.0).abs() > 1e-3 {
        return Err(AsymptoticsError::DomainError(format!(
            "seed is not center-type: r = {r0:.8}, A = {a0:.6}"
        )));
    }
    // Central finite differences of (r, A) in the two free parameters.
    let jac = |mu: &ParamPoint, eval: &mut E| -> Result<[[f64; 2]; 2], AsymptoticsError> {
        let mut j = [[0.0; 2]; 2];
        for (col, &idx) in [i0, i1].iter().enumerate() {
            let x = mu.components()[idx];
            let step = 1e-5 * (1.0 + x.abs());
            let (rp, ap) = eval(&mu.with_component(idx, x + step))?;
            let (rm, am) = eval(&mu.with_component(idx, x - step))?;
            j[0][col] = (rp - rm) / (2.0 * step);
            j[1][col] = (ap - am) / (2.0 * step);
        }
        Ok(j)
    };
    let j0 = jac(mu0, &mut eval_ra)?;
    let cond = cond_2x2(j0);
    if !(cond < ARC_COND_CAP) {
        return Err(AsymptoticsError::RankDeficient(cond));
    }

    let mut samples = Vec::with_capacity(alpha_grid.len());
    let mut warm = mu0.clone();
    for &alpha in alpha_grid {
        let t = tau.tau(alpha);
        let h = alpha * t;
        let target = (1.0 + alpha, 1.0 + h);
        let mut mu = warm.clone();
        let (mut r, mut a) = eval_ra(&mu)?;
        let mut res = [r - target.0, a - target.1];
        let mut res_norm = res[0].hypot(res[1]);
        // The Jacobian barely changes along the arc; one evaluation per α
        // amortizes the finite differencing.
        let j = jac(&mu, &mut eval_ra)?;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let mut converged = res_norm <= 1e-9;
        if det.abs() > 0.0 {
            for _ in 0..25 {
                if converged {
                    break;
                }
                let dx = [
                    -(res[0] * j[1][1] - res[1] * j[0][1]) / det,
                    -(res[1] * j[0][0] - res[0] * j[1][0]) / det,
                ];
                let mut lambda = 1.0;
                let mut advanced = false;
                for _ in 0..8 {
                    let x0 = mu.components()[i0] + lambda * dx[0];
                    let x1 = mu.components()[i1] + lambda * dx[1];
                    let trial = mu.with_component(i0, x0).with_component(i1, x1);
                    match eval_ra(&trial) {
                        Ok((rt, at)) => {
                            let rt_res = [rt - target.0, at - target.1];
                            let rt_norm = rt_res[0].hypot(rt_res[1]);
                            if rt_norm < res_norm {
                                mu = trial;
                                r = rt;
                                a = at;
                                res = rt_res;
                                res_norm = rt_norm;
                                advanced = true;
                                break;
                            }
                        }
                        Err(_) => {}
                    }
                    lambda *= 0.5;
                }
                if !advanced {
                    break;
                }
                converged = res_norm <= 1e-9;
            }
        }
        let _ = (r, a);
        if !(res_norm <= ARC_RESIDUAL_TOL) {
            samples.push(ArcSample {
                alpha,
                mu: mu.components().to_vec(),
                h,
                s_star: f64::NAN,
                period: f64::NAN,
                ratio: f64::NAN,
                newton_residuals: [res[0], res[1]],
                status: ArcStatus::NewtonDiverged,
            });
            continue;
        }
        warm = mu.clone();
        let s_pred = (1.0 + h).powf(-1.0 / alpha);
        let (s_star, period, status) = match measure(&mu, s_pred) {
            Ok((s, p)) => (s, p, ArcStatus::Ok),
            Err(e) => (f64::NAN, f64::NAN, ArcStatus::CycleFailed(format!("{e}"))),
        };
        samples.push(ArcSample {
            alpha,
            mu: mu.components().to_vec(),
            h,
            s_star,
            period,
            ratio: period / t,
            newton_residuals: [res[0], res[1]],
            status,
        });
    }
    Ok(samples)
}

/// Build the Theorem-B arc dynamically: solve r(μ) = 1 + α and
/// Â(μ) = 1 + α τ(α) over the two free parameters by warm-started damped
/// Newton, then locate the bifurcating cycle at each grid point.
pub fn design_arc(
    family: &ParametricFamily,
    skeleton: &PolycycleSkeleton,
    mu0: &ParamPoint,
    tau: &TauSpec,
    alpha_grid: &[f64],
    free: (usize, usize),
    cfg: &IntegratorConfig,
) -> Result<Vec<ArcSample>, AsymptoticsError> {
    let mut grid = geomspace(FIT_WINDOW.0, FIT_WINDOW.1, FIT_SAMPLES);
    grid.reverse();
    let eval_ra = |mu: &ParamPoint| -> Result<(f64, f64), AsymptoticsError> {
        let r = graphic_number(family, mu, skeleton)?.value;
        let samples = sample_return_map(family, mu, skeleton, &grid, cfg)?;
        let fit = fit_power_law(&samples)?;
        Ok((r, fit.a_hat))
    };
    let measure = |mu: &ParamPoint, s_pred: f64| -> Result<(f64, f64), AsymptoticsError> {
        let mapper = ReturnMapper::new(family, mu, skeleton, cfg)?;
        let pad = 2.5;
        let bracket = ((s_pred.ln() - pad).exp(), (s_pred.ln() + pad).exp());
        let cycle = find_limit_cycle_core(&mapper, bracket, mu.components())?;
        Ok((cycle.s_star, cycle.period))
    };
    design_arc_core(mu0, tau, alpha_grid, free, eval_ra, measure)
}

/// Report of the slow-period verification along an arc.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremBReport {
    /// (α, period/τ) for the valid samples, in grid order.
    pub ratios: Vec<(f64, f64)>,
    pub ratio_limit: f64,
    /// Relative variation of the ratio over the last decade of α.
    pub ratio_variation_last_decade: f64,
    /// Reference value −T̄₀(μ₀) from an independent return-time fit.
    pub reference: f64,
}

/// Fold the arc samples into the ratio sequence 𝒯(α)/τ(α) and compare its
/// limit against the reference −T̄₀(μ₀) obtained from an independent
/// return-time fit at the seed.
pub fn verify_theorem_b(
    arc: &[ArcSample],
    t0_bar_mu0: f64,
) -> Result<TheoremBReport, AsymptoticsError> {
    let valid: Vec<&ArcSample> = arc
        .iter()
        .filter(|s| s.status == ArcStatus::Ok && s.ratio.is_finite())
        .collect();
    if valid.len() < 5 {
        return Err(AsymptoticsError::InsufficientSamples {
            got: valid.len(),
            need: 5,
        });
    }
    let a_min = valid.iter().map(|s| s.alpha).fold(f64::INFINITY, f64::min);
    let a_max = valid.iter().map(|s| s.alpha).fold(0.0f64, f64::max);
    // Two decades of α, with ulp slack so an exactly-two-decade grid passes.
    if a_max / a_min < 100.0 * (1.0 - 1e-9) {
        return Err(AsymptoticsError::InsufficientSamples {
            got: valid.len(),
            need: 5,
        });
    }
    let ratios: Vec<(f64, f64)> = valid.iter().map(|s| (s.alpha, s.ratio)).collect();
    let last_decade: Vec<f64> = valid
        .iter()
        .filter(|s| s.alpha <= 10.0 * a_min)
        .map(|s| s.ratio)
        .collect();
    let lo = last_decade.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = last_decade.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mid = 0.5 * (lo + hi);
    Ok(TheoremBReport {
        ratio_limit: ratios.last().unwrap().1,
        ratio_variation_last_decade: if mid == 0.0 { 0.0 } else { (hi - lo) / mid.abs() },
        reference: -t0_bar_mu0,
        ratios,
    })
}
