//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line.  Oracle values are closed forms evaluated in the test
//! itself; the dynamical criteria pin the benchmark family configurations.

use polycycle::asymptotics::{
    default_alpha_probe_grid, default_arc_alpha_grid, design_arc, displacement_sign_changes,
    tau_conditions, verify_theorem_a, verify_theorem_a_core, verify_theorem_b, ArcSample,
    ArcStatus, OfflineModel, PathPointEval, TauSpec,
};
use polycycle::family::{builtin_kolmogorov, parse_family, ParamPoint, PlanePoint};
use polycycle::flow::{flow_to_section, IntegratorConfig, Section};
use polycycle::num::geomspace;
use polycycle::returnmap::{
    fit_power_law, fit_return_time, sample_return_map, ReturnMapper, ReturnSample, SampleStatus,
    FIT_SAMPLES, FIT_WINDOW,
};
use polycycle::saddletools::{builtin_kolmogorov_skeleton, graphic_number};

fn verdict(criterion: u32, description: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion:02}: {} - {description}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion:02} failed: {detail}");
}

fn mu_k(a: f64, p: f64, q: f64) -> ParamPoint {
    ParamPoint::new(&["a", "p", "q"], &[a, p, q]).unwrap()
}

fn fit_grid() -> Vec<f64> {
    let mut g = geomspace(FIT_WINDOW.0, FIT_WINDOW.1, FIT_SAMPLES);
    g.reverse();
    g
}

/// The pinned path toward the graphic-number crossing at (a, p) = (0.5, −2):
/// q_k = 2 + 0.04·2^{−k} keeps A < 1 and r < 1 with |1 − r| halving.
fn benchmark_path() -> Vec<ParamPoint> {
    (0..5)
        .map(|k| mu_k(0.5, -2.0, 2.0 + 0.04 * 0.5f64.powi(k)))
        .collect()
}

#[test]
fn criterion_01_linear_saddle_oracle() {
    // ẋ = x, ẏ = −λy from (s, 1) to {x = 1}: D(s) = s^λ, T(s) = −log s.
    let cfg = IntegratorConfig::default();
    let exit = Section::new(PlanePoint::affine(1.0, 0.0), [0.0, 1.0], -1);
    let mut worst: f64 = 0.0;
    for lambda in [0.5, 1.5, 2.0] {
        let fam = parse_family(&format!("x' = x; y' = -{lambda}*y; params")).unwrap();
        let mu = ParamPoint::new(&["unused"], &[0.0]).unwrap();
        for s in geomspace(1e-6, 1e-2, 16) {
            let ev = flow_to_section(&fam, &mu, PlanePoint::affine(s, 1.0), &exit, &cfg).unwrap();
            let d_err = (ev.s_out - s.powf(lambda)).abs() / s.powf(lambda);
            let t_err = (ev.transit_time + s.ln()).abs() / s.ln().abs();
            worst = worst.max(d_err).max(t_err);
        }
    }
    verdict(
        1,
        "linear-saddle Dulac map/time oracle to 1e-8",
        worst <= 1e-8,
        &format!("worst relative error {worst:.3e}"),
    );
}

#[test]
fn criterion_02_composition_law() {
    // Two synthetic Dulac maps D_i = Δ_i s^{λ_i}: the chain composes to
    // Δ₂ Δ₁^{λ₂} s^{λ₁λ₂}; the power-law fit must recover both to 1e-6.
    let (l1, l2, d1, d2) = (1.3, 0.7, 0.8, 1.7);
    let samples: Vec<ReturnSample> = fit_grid()
        .iter()
        .map(|&s| {
            let mid = d1 * s.powf(l1);
            let out = d2 * mid.powf(l2);
            ReturnSample {
                s_in: s,
                s_out: out,
                time: -s.ln(),
                status: SampleStatus::Ok,
            }
        })
        .collect();
    let fit = fit_power_law(&samples).unwrap();
    let r_true = l1 * l2;
    let a_true = d2 * d1.powf(l2);
    let r_err = (fit.r_hat - r_true).abs();
    let a_err = (fit.a_hat - a_true).abs();
    verdict(
        2,
        "two-saddle composition law recovered to 1e-6",
        r_err <= 1e-6 && a_err <= 1e-6,
        &format!("r error {r_err:.3e}, A error {a_err:.3e}"),
    );
}

#[test]
fn criterion_03_cross_method_r() {
    let fam = builtin_kolmogorov();
    let skel = builtin_kolmogorov_skeleton();
    let cfg = IntegratorConfig::default();
    let grid = fit_grid();
    let points = [
        (0.5, -2.0, 2.0),
        (0.3, -1.5, 1.8),
        (0.7, -2.5, 2.5),
        (0.0, -1.8, 2.2),
        (-0.4, -2.2, 1.5),
    ];
    let mut worst: f64 = 0.0;
    for (a, p, q) in points {
        let mu = mu_k(a, p, q);
        let r_eig = graphic_number(&fam, &mu, &skel).unwrap().value;
        let samples = sample_return_map(&fam, &mu, &skel, &grid, &cfg).unwrap();
        let fit = fit_power_law(&samples).unwrap();
        worst = worst.max((fit.r_hat - r_eig).abs());
    }
    verdict(
        3,
        "fit vs eigenvalue-product graphic number within 1e-3 at 5 points",
        worst <= 1e-3,
        &format!("worst |r_hat - r| = {worst:.3e}"),
    );
}

#[test]
fn criterion_04_center_seed() {
    let fam = builtin_kolmogorov();
    let skel = builtin_kolmogorov_skeleton();
    let cfg = IntegratorConfig::default();
    let mu0 = mu_k(0.0, -2.0, 2.0);
    let r = graphic_number(&fam, &mu0, &skel).unwrap().value;
    let samples = sample_return_map(&fam, &mu0, &skel, &fit_grid(), &cfg).unwrap();
    let max_defect = samples
        .iter()
        .map(|s| (s.s_out - s.s_in).abs() / s.s_in)
        .fold(0.0f64, f64::max);
    verdict(
        4,
        "center seed: |r - 1| <= 1e-8 and return map identity to 1e-4",
        (r - 1.0).abs() <= 1e-8 && max_defect <= 1e-4,
        &format!("|r - 1| = {:.3e}, max defect {max_defect:.3e}", (r - 1.0).abs()),
    );
}

#[test]
fn criterion_05_offline_period_law() {
    let mut worst: f64 = 0.0;
    for (a, t0) in [(2.0, -1.0), (0.5, -2.0)] {
        // Stay inside W: r approaches 1 from the side of A.  Six halvings
        // keep the cycle location s* = A^{-1/(r-1)} above the f64
        // underflow floor; with c = 0 the limit estimates are exact at any
        // depth.
        let side = if a > 1.0 { 1.0 } else { -1.0 };
        let models: Vec<OfflineModel> = (0..6)
            .map(|k| OfflineModel {
                a,
                r: 1.0 + side * 0.1 * 0.5f64.powi(k),
                t0_bar: t0,
                c: 0.0,
            })
            .collect();
        let points: Vec<PathPointEval<'_>> = models
            .iter()
            .map(|m| PathPointEval {
                mu: vec![m.r],
                r: m.r,
                a_hat: m.a,
                t0_bar_hat: m.t0_bar,
                source: m,
            })
            .collect();
        let report = verify_theorem_a_core(&points).unwrap();
        let v_true = (a as f64).ln().abs();
        let u_true = t0.abs() * v_true;
        worst = worst
            .max((report.u_limit - u_true).abs())
            .max((report.v_limit - v_true).abs());
    }
    verdict(
        5,
        "offline period-law limits (-T0|log A|, |log A|) to 1e-6",
        worst <= 1e-6,
        &format!("worst limit error {worst:.3e}"),
    );
}

#[test]
fn criterion_06_dynamical_period_law() {
    let fam = builtin_kolmogorov();
    let skel = builtin_kolmogorov_skeleton();
    let report =
        verify_theorem_a(&fam, &skel, &benchmark_path(), &IntegratorConfig::default()).unwrap();
    let rel = (report.u_limit - report.u_expected).abs() / report.u_expected.abs();
    verdict(
        6,
        "dynamical period law: last-3 variation <= 5%, limit within 10%",
        report.u_variation_last3 <= 0.05 && rel <= 0.10,
        &format!(
            "variation {:.3e}, limit mismatch {rel:.3e}",
            report.u_variation_last3
        ),
    );
}

#[test]
fn criterion_07_exponential_approach() {
    let fam = builtin_kolmogorov();
    let skel = builtin_kolmogorov_skeleton();
    let report =
        verify_theorem_a(&fam, &skel, &benchmark_path(), &IntegratorConfig::default()).unwrap();
    let rel = (report.v_limit - report.v_expected).abs() / report.v_expected.abs();
    verdict(
        7,
        "exponential approach: |1-r||log s*| matches |log A| within 10%",
        rel <= 0.10,
        &format!("mismatch {rel:.3e}"),
    );
}

#[test]
fn criterion_08_uniqueness_along_path() {
    let fam = builtin_kolmogorov();
    let skel = builtin_kolmogorov_skeleton();
    let cfg = IntegratorConfig::default();
    let report = verify_theorem_a(&fam, &skel, &benchmark_path(), &cfg).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for (mu, point) in benchmark_path().iter().zip(&report.points) {
        let mapper = ReturnMapper::new(&fam, mu, &skel, &cfg).unwrap();
        // Scan window log-centered on the located cycle, three decades
        // wide (the deep cycle location leaves the fixed fit window long
        // before r reaches 1).
        let window = (point.s_star / 30.0, point.s_star * 30.0);
        let n = displacement_sign_changes(&mapper, point.r, window, 48).unwrap();
        if n != 1 {
            ok = false;
            detail = format!("{n} sign changes at q = {}", mu.components()[2]);
        }
    }
    verdict(
        8,
        "exactly one displacement sign change at every path point",
        ok,
        &detail,
    );
}

#[test]
fn criterion_09_tau_verdicts() {
    let grid = default_alpha_probe_grid();
    let mut ok = true;
    let mut detail = String::new();
    for (l, expect) in [
        (-0.9, true),
        (-0.5, true),
        (-0.1, true),
        (-1.0, false),
        (0.0, false),
        (0.5, false),
    ] {
        let v = tau_conditions(&TauSpec::power(l), &grid);
        if v.overall != expect {
            ok = false;
            detail = format!("alpha^{l} gave {}", v.overall);
        }
    }
    if tau_conditions(&TauSpec::neg_log(), &grid).overall {
        ok = false;
        detail = "-log(alpha) passed".into();
    }
    verdict(
        9,
        "tau verdicts: alpha^l PASS iff l in (-1, 0); -log alpha FAIL",
        ok,
        &detail,
    );
}

/// Closed-form arc for the offline Theorem-B oracle: the design equations
/// r = 1 + α, A = 1 + ατ(α) hold exactly, the cycle sits at
/// s* = (1+h)^{−1/α} and 𝒯 = T̄₀ log s*.
fn offline_arc(tau: &TauSpec, t0_bar: f64) -> Vec<ArcSample> {
    default_arc_alpha_grid()
        .iter()
        .map(|&alpha| {
            let t = tau.tau(alpha);
            let h = alpha * t;
            let s_star = (1.0 + h).powf(-1.0 / alpha);
            let period = t0_bar * s_star.ln();
            ArcSample {
                alpha,
                mu: vec![1.0 + alpha, 1.0 + h],
                h,
                s_star,
                period,
                ratio: period / t,
                newton_residuals: [0.0, 0.0],
                status: ArcStatus::Ok,
            }
        })
        .collect()
}

#[test]
fn criterion_10_offline_slow_period() {
    // τ = α^{−1/4}: h = α^{3/4} = 1e-3 at α = 1e-4, so the ratio error
    // −log(1+h)/h − 1 ≈ h/2 sits inside the 1e-3 budget.
    let tau = TauSpec::power(-0.25);
    let t0_bar = -1.0;
    let report = verify_theorem_b(&offline_arc(&tau, t0_bar), t0_bar).unwrap();
    let err = (report.ratio_limit - report.reference).abs() / report.reference.abs();
    verdict(
        10,
        "offline ratio T/tau converges to -T0_bar with error <= 1e-3",
        err <= 1e-3,
        &format!("relative error {err:.3e}"),
    );
}

#[test]
fn criterion_11_dynamical_arc() {
    let fam = builtin_kolmogorov();
    let skel = builtin_kolmogorov_skeleton();
    let cfg = IntegratorConfig::default();
    let mu0 = mu_k(0.0, -2.0, 2.0);
    let tau = TauSpec::power(-0.5);
    let arc = design_arc(
        &fam,
        &skel,
        &mu0,
        &tau,
        &default_arc_alpha_grid(),
        (0, 2),
        &cfg,
    )
    .unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for s in &arc {
        if s.status != ArcStatus::Ok {
            ok = false;
            detail = format!("sample failed at alpha = {:.3e}", s.alpha);
            continue;
        }
        let res = s.newton_residuals[0].hypot(s.newton_residuals[1]);
        let s_pred = (1.0 + s.h).powf(-1.0 / s.alpha);
        let dev = (s.s_star - s_pred).abs() / s_pred;
        if res > 1e-6 || dev > 0.10 {
            ok = false;
            detail = format!("residual {res:.3e}, ansatz deviation {dev:.3e}");
        }
    }
    let samples = sample_return_map(&fam, &mu0, &skel, &fit_grid(), &cfg).unwrap();
    let t0_bar = fit_return_time(&samples).unwrap().t0_bar;
    let report = verify_theorem_b(&arc, t0_bar).unwrap();
    if report.ratio_variation_last_decade > 0.10 || !(report.ratio_limit > 0.0) {
        ok = false;
        detail = format!(
            "ratio variation {:.3e}, limit {:.3e}",
            report.ratio_variation_last_decade, report.ratio_limit
        );
    }
    verdict(
        11,
        "dynamical arc: residuals <= 1e-6, ansatz <= 10%, stable positive ratio",
        ok,
        &detail,
    );
}

#[test]
fn criterion_12_no_bifurcation_guard() {
    let fam = builtin_kolmogorov();
    let skel = builtin_kolmogorov_skeleton();
    let cfg = IntegratorConfig::default();
    let mu = mu_k(0.5, -2.0, 2.2);
    let r = graphic_number(&fam, &mu, &skel).unwrap().value;
    assert!((r - 1.0).abs() >= 0.1, "test point must be far from r = 1");
    let mapper = ReturnMapper::new(&fam, &mu, &skel, &cfg).unwrap();
    let n = displacement_sign_changes(&mapper, r, FIT_WINDOW, 48).unwrap();
    verdict(
        12,
        "no displacement sign change in the window at |r - 1| >= 0.1",
        n == 0,
        &format!("{n} sign changes"),
    );
}

#[test]
fn criterion_13_determinism() {
    // Two binary runs of the same configs must produce byte-identical
    // CSVs.
    let bin = env!("CARGO_BIN_EXE_polycycle");
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        (
            "returnmap",
            "rm.toml",
            "returnmap.csv",
            r#"
[family]
kind = "builtin"
name = "kolmogorov"

[params]
names = ["a", "p", "q"]
values = [0.5, -2.0, 2.0]

[skeleton]
builtin = "kolmogorov"
"#,
        ),
        (
            "theorem-a",
            "ta.toml",
            "theorem_a.csv",
            r#"
[family]
kind = "offline"
a = 2.0
r = 1.0
t0_bar = -1.0

[path]
r_values = [1.1, 1.05, 1.02, 1.01, 1.005]
"#,
        ),
        (
            "tau-check",
            "tau.toml",
            "tau_check.csv",
            r#"
[family]
kind = "offline"
a = 1.0
r = 1.0
t0_bar = -1.0

[tau]
kind = "power"
exponent = -0.5
"#,
        ),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (cmd, cfg_name, csv_name, cfg_text) in configs {
        let cfg_path = dir.path().join(cfg_name);
        std::fs::write(&cfg_path, cfg_text).unwrap();
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{cmd}-{run}"));
            let status = std::process::Command::new(bin)
                .arg(cmd)
                .arg("--config")
                .arg(&cfg_path)
                .arg("--out")
                .arg(&out)
                .arg("--jobs")
                .arg("2")
                .output()
                .unwrap();
            assert!(
                status.status.success(),
                "{cmd} failed: {}",
                String::from_utf8_lossy(&status.stderr)
            );
            outputs.push(std::fs::read(out.join(csv_name)).unwrap());
        }
        if outputs[0] != outputs[1] {
            ok = false;
            detail = format!("{cmd} CSVs differ between runs");
        }
    }
    verdict(13, "byte-identical CSVs on repeated runs", ok, &detail);
}
