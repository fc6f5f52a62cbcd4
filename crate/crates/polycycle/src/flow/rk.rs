//! Embedded adaptive Runge–Kutta 5(4) (Dormand–Prince) with a 4th-order
//! continuous interpolant.
//!
//! The stepper works on 3-component states (two chart coordinates plus the
//! accumulated true time) and is agnostic of charts; the driver in
//! `flow::drive` owns chart switching and event location on the dense
//! output.

pub type State = [f64; 3];

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Error coefficients (5th-order solution minus embedded 4th-order).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output coefficients (Hairer & Wanner DOPRI5 interpolant).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its interpolant coefficients.
#[derive(Debug, Clone)]
pub struct DenseStep {
    /// Integration-variable start of the step.
    pub t0: f64,
    /// Step size in the integration variable.
    pub h: f64,
    rcont: [State; 5],
}

impl DenseStep {
    /// Evaluate the interpolant at fraction theta ∈ [0, 1] of the step.
    pub fn eval(&self, theta: f64) -> State {
        let th1 = 1.0 - theta;
        let mut out = [0.0; 3];
        for i in 0..3 {
            let [r1, r2, r3, r4, r5] =
                [self.rcont[0][i], self.rcont[1][i], self.rcont[2][i], self.rcont[3][i], self.rcont[4][i]];
            out[i] = r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
        }
        out
    }

    /// State at the end of the step.
    pub fn end_state(&self) -> State {
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = self.rcont[0][i] + self.rcont[1][i];
        }
        out
    }
}

/// Outcome of a single `try_step` call.
pub enum StepOutcome {
    /// Step accepted; contains the dense record and a suggested next h.
    Accepted { dense: DenseStep, h_next: f64 },
    /// Step rejected; retry with the returned smaller h.
    Rejected { h_retry: f64 },
}

/// Per-component error scales: `abs_tol + rel_tol * magnitude`.  The third
/// (time) component gets a unit floor so that early steps with t ≈ 0 are not
/// over-controlled.
fn scales(y0: &State, y1: &State, rel_tol: f64, abs_tol: f64) -> State {
    let mut s = [0.0; 3];
    for i in 0..2 {
        let mag = y0[i].abs().max(y1[i].abs());
        // The absolute floor shrinks along with the coordinate: an orbit
        // approaching a separatrix decays through hundreds of decades, and a
        // fixed floor would stop controlling the component once it dips
        // below abs_tol, letting it drift to the floor's level.  For O(1)
        // coordinates this reduces to the usual abs_tol + rel_tol * |y|.
        s[i] = (abs_tol * mag.min(1.0) + rel_tol * mag).max(1e-290);
    }
    s[2] = abs_tol + rel_tol * y0[2].abs().max(y1[2].abs()).max(1.0);
    s
}

/// Attempt one DOPRI5 step of size `h` from `y0`, with `k1 = f(y0)` already
/// evaluated (FSAL: reuse the last stage of an accepted step).
pub fn try_step<F: FnMut(&State) -> State>(
    f: &mut F,
    t0: f64,
    y0: &State,
    k1: &State,
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> StepOutcome {
    let lin = |y0: &State, terms: &[(f64, &State)]| -> State {
        let mut out = *y0;
        for (c, k) in terms {
            for i in 0..3 {
                out[i] += h * c * k[i];
            }
        }
        out
    };
    let k2 = f(&lin(y0, &[(A21, k1)]));
    let k3 = f(&lin(y0, &[(A31, k1), (A32, &k2)]));
    let k4 = f(&lin(y0, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(&lin(y0, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(&lin(
        y0,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ));
    let y1 = lin(
        y0,
        &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
    );
    let k7 = f(&y1);

    let sc = scales(y0, &y1, rel_tol, abs_tol);
    let mut err_sq = 0.0;
    for i in 0..3 {
        let e = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let r = e / sc[i];
        err_sq += r * r;
    }
    let err = (err_sq / 3.0).sqrt();

    if !err.is_finite() {
        return StepOutcome::Rejected { h_retry: h * 0.2 };
    }
    // PI-free controller with the usual safety factor and growth clamps.
    let factor = if err > 0.0 {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    } else {
        5.0
    };
    if err > 1.0 {
        return StepOutcome::Rejected {
            h_retry: h * factor.min(0.9),
        };
    }

    // Dense-output coefficients.
    let mut rcont = [[0.0; 3]; 5];
    for i in 0..3 {
        let dy = y1[i] - y0[i];
        let bspl = h * k1[i] - dy;
        rcont[0][i] = y0[i];
        rcont[1][i] = dy;
        rcont[2][i] = bspl;
        rcont[3][i] = dy - h * k7[i] - bspl;
        rcont[4][i] = h
            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    StepOutcome::Accepted {
        dense: DenseStep { t0, h, rcont },
        h_next: h * factor,
    }
}

/// Initial step-size heuristic (a light version of Hairer's `hinit`).
pub fn initial_step<F: FnMut(&State) -> State>(
    f: &mut F,
    y0: &State,
    k1: &State,
    rel_tol: f64,
    abs_tol: f64,
) -> f64 {
    let mut sc = scales(y0, y0, rel_tol, abs_tol);
    // A coordinate sitting at exactly zero must not demand near-denormal
    // accuracy here (it would drive the trial step to zero); floor its scale
    // relative to the overall state size.
    let ymax = y0[0].abs().max(y0[1].abs()).max(1.0);
    for s in sc.iter_mut() {
        *s = s.max(1e-16 * ymax);
    }
    let d0: f64 = (0..3).map(|i| (y0[i] / sc[i]).powi(2)).sum::<f64>().sqrt();
    let d1: f64 = (0..3).map(|i| (k1[i] / sc[i]).powi(2)).sum::<f64>().sqrt();
    let h0 = if d0 > 1e-10 && d1 > 1e-10 {
        0.01 * d0 / d1
    } else {
        1e-6
    };
    // One explicit Euler probe to estimate the second derivative scale.
    let mut y1 = *y0;
    for i in 0..3 {
        y1[i] += h0 * k1[i];
    }
    let k2 = f(&y1);
    let d2: f64 = (0..3)
        .map(|i| ((k2[i] - k1[i]) / sc[i]).powi(2))
        .sum::<f64>()
        .sqrt()
        / h0;
    let d_max = d1.max(d2);
    let h1 = if d_max > 1e-15 {
        (0.01 / d_max).powf(0.2)
    } else {
        (h0 * 1e3).max(1e-6)
    };
    let h = (100.0 * h0).min(h1);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        1e-8
    }
}
