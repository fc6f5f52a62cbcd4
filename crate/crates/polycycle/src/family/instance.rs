//! Numeric field instances: dense coefficient grids after μ-substitution.
//!
//! The affine field (P, Q) of degree d pushes forward to the projective
//! charts as follows (writing κ = d − 1):
//!
//! ProjectiveX, u = y/x, v = 1/x:
//!   u̇ = (1/v^κ)·C_u(u,v),  v̇ = (1/v^κ)·C_v(u,v)  with
//!   C_u = v^d (Q − u P)(1/v, u/v) = Σ q_ij u^j v^{d−i−j} − Σ p_ij u^{j+1} v^{d−i−j}
//!   C_v = −v^{d+1} P(1/v, u/v)   = −Σ p_ij u^j v^{d+1−i−j}
//!
//! ProjectiveY, u = x/y, v = 1/y: symmetric with P and Q exchanged and
//! (i, j) swapped.  All exponents are nonnegative because i + j ≤ d, so the
//! polynomial parts live on dense (d+2)×(d+2) grids.  C_v always carries a
//! factor v, which is the structural form of the invariance of {v = 0}.

use super::{ChartKind, FamilyError, ParamPoint, ParametricFamily};

/// Dense bivariate polynomial on an n×n coefficient grid; entry (i, j) is
/// the coefficient of x^i y^j.  Evaluated by nested Horner.
#[derive(Debug, Clone)]
pub struct PolyGrid {
    n: usize,
    c: Vec<f64>,
}

impl PolyGrid {
    pub fn zeros(n: usize) -> Self {
        PolyGrid {
            n,
            c: vec![0.0; n * n],
        }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n {
            self.c[i * self.n + j]
        } else {
            0.0
        }
    }

    pub fn add_coeff(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.c[i * self.n + j] += value;
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in (0..n).rev() {
            let row = &self.c[i * n..(i + 1) * n];
            let mut r = 0.0;
            for j in (0..n).rev() {
                r = r * y + row[j];
            }
            acc = acc * x + r;
        }
        acc
    }

    /// ∂/∂x as a new grid.
    pub fn deriv_x(&self) -> PolyGrid {
        let n = self.n;
        let mut out = PolyGrid::zeros(n);
        for i in 1..n {
            for j in 0..n {
                out.c[(i - 1) * n + j] = i as f64 * self.c[i * n + j];
            }
        }
        out
    }

    /// ∂/∂y as a new grid.
    pub fn deriv_y(&self) -> PolyGrid {
        let n = self.n;
        let mut out = PolyGrid::zeros(n);
        for i in 0..n {
            for j in 1..n {
                out.c[i * n + j - 1] = j as f64 * self.c[i * n + j];
            }
        }
        out
    }

    /// True when every nonzero coefficient has j ≥ 1, i.e. the polynomial is
    /// divisible by y (second variable).  Used by the symbolic invariance
    /// checks.
    pub fn divisible_by_y(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| self.c[i * n] == 0.0)
    }

    /// Divisibility by x (first variable).
    pub fn divisible_by_x(&self) -> bool {
        let n = self.n;
        (0..n).all(|j| self.c[j] == 0.0)
    }
}

/// A family instantiated at a concrete μ: numeric grids for every chart.
#[derive(Debug, Clone)]
pub struct FieldInstance {
    degree: usize,
    /// κ = d − 1: the projective true-time factor is 1/v^κ.
    kappa: u32,
    /// Affine (P, Q).
    aff: [PolyGrid; 2],
    /// ProjectiveX polynomial parts (C_u, C_v).
    chx: [PolyGrid; 2],
    /// ProjectiveY polynomial parts (C_u, C_v).
    chy: [PolyGrid; 2],
}

impl FieldInstance {
    pub fn build(family: &ParametricFamily, mu: &ParamPoint) -> Result<Self, FamilyError> {
        let d = family.degree();
        let n_aff = d + 1;
        let mut p = PolyGrid::zeros(n_aff.max(1));
        let mut q = PolyGrid::zeros(n_aff.max(1));
        for (&(i, j), e) in family.px_coeffs() {
            p.add_coeff(i, j, e.eval(mu)?);
        }
        for (&(i, j), e) in family.py_coeffs() {
            q.add_coeff(i, j, e.eval(mu)?);
        }

        let n_proj = d + 2;
        let mut chx = [PolyGrid::zeros(n_proj), PolyGrid::zeros(n_proj)];
        let mut chy = [PolyGrid::zeros(n_proj), PolyGrid::zeros(n_proj)];
        for i in 0..=d {
            for j in 0..=d - i {
                let pij = p.coeff(i, j);
                let qij = q.coeff(i, j);
                // ProjectiveX: grid variables are (u, v).
                if qij != 0.0 {
                    chx[0].add_coeff(j, d - i - j, qij);
                }
                if pij != 0.0 {
                    chx[0].add_coeff(j + 1, d - i - j, -pij);
                    chx[1].add_coeff(j, d + 1 - i - j, -pij);
                }
                // ProjectiveY: roles of P/Q and (i, j) exchange.
                if pij != 0.0 {
                    chy[0].add_coeff(i, d - i - j, pij);
                }
                if qij != 0.0 {
                    chy[0].add_coeff(i + 1, d - i - j, -qij);
                    chy[1].add_coeff(i, d + 1 - i - j, -qij);
                }
            }
        }

        Ok(FieldInstance {
            degree: d,
            kappa: d.saturating_sub(1) as u32,
            aff: [p, q],
            chx,
            chy,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn grids(&self, chart: ChartKind) -> &[PolyGrid; 2] {
        match chart {
            ChartKind::Affine => &self.aff,
            ChartKind::ProjectiveX => &self.chx,
            ChartKind::ProjectiveY => &self.chy,
        }
    }

    /// Polynomial-part velocity: equals the true-time velocity multiplied by
    /// v^κ in projective charts (and the plain field in the affine chart).
    /// Well defined on the line at infinity, where the true-time field is
    /// not; this is what the integrator steps.
    pub fn rescaled_velocity(&self, chart: ChartKind, coords: [f64; 2]) -> [f64; 2] {
        let g = self.grids(chart);
        [
            g[0].eval(coords[0], coords[1]),
            g[1].eval(coords[0], coords[1]),
        ]
    }

    /// dt/dτ between true time t and the rescaled integration time τ of
    /// `rescaled_velocity`: v^κ in projective charts, 1 in the affine chart.
    pub fn time_factor(&self, chart: ChartKind, coords: [f64; 2]) -> f64 {
        if chart.is_projective() {
            coords[1].powi(self.kappa as i32)
        } else {
            1.0
        }
    }

    /// True-time velocity; rejects v = 0 in projective charts.
    pub fn velocity(&self, chart: ChartKind, coords: [f64; 2]) -> Result<[f64; 2], FamilyError> {
        if chart.is_projective() && coords[1] == 0.0 {
            return Err(FamilyError::ProjectiveAtInfinity);
        }
        let w = self.rescaled_velocity(chart, coords);
        let f = self.time_factor(chart, coords);
        Ok([w[0] / f, w[1] / f])
    }

    /// Analytic Jacobian of the true-time chart-local field.
    ///
    /// In a projective chart, with F_i = C_i / v^κ:
    ///   ∂F_i/∂u = (∂C_i/∂u)/v^κ
    ///   ∂F_i/∂v = (∂C_i/∂v)/v^κ − κ C_i / v^{κ+1}
    pub fn jacobian(&self, chart: ChartKind, coords: [f64; 2]) -> Result<[[f64; 2]; 2], FamilyError> {
        if chart.is_projective() && coords[1] == 0.0 {
            return Err(FamilyError::ProjectiveAtInfinity);
        }
        let [u, v] = coords;
        let g = self.grids(chart);
        let mut jac = [[0.0; 2]; 2];
        let tf = self.time_factor(chart, coords);
        for (row, grid) in g.iter().enumerate() {
            jac[row][0] = grid.deriv_x().eval(u, v) / tf;
            jac[row][1] = grid.deriv_y().eval(u, v) / tf;
            if chart.is_projective() && self.kappa > 0 {
                jac[row][1] -= self.kappa as f64 * grid.eval(u, v) / (tf * v);
            }
        }
        Ok(jac)
    }

    /// Jacobian of the rescaled (polynomial-part) field; defined on v = 0,
    /// which is where the infinite saddles live.  Hyperbolicity ratios are
    /// computed from this Jacobian: at a point the rescaling multiplies both
    /// eigenvalues of a singularity on {v=0} by the same positive factor
    /// structure, leaving the ratio −λˢ/λᵘ unchanged.
    pub fn rescaled_jacobian(&self, chart: ChartKind, coords: [f64; 2]) -> [[f64; 2]; 2] {
        let [u, v] = coords;
        let g = self.grids(chart);
        let mut jac = [[0.0; 2]; 2];
        for (row, grid) in g.iter().enumerate() {
            jac[row][0] = grid.deriv_x().eval(u, v);
            jac[row][1] = grid.deriv_y().eval(u, v);
        }
        jac
    }
}
