//! Closed-form bound quantities (f, β_c, tail bounds, the interaction scale
//! 𝕍), the change of variables behind the transport argument, and numerical
//! verification of the Gronwall inequality and the final condensation bound
//! g_N(t, β) ≤ C_β f(t, β).

use nalgebra::DVector;

use crate::dynamics::{assemble_hamiltonian, hartree_phi_at, plan_propagation, MeanFieldModel};
use crate::excitation::frame::CondensateFrame;
use crate::excitation::stats::excitation_distribution;
use crate::fock::{enumerate_sector, ManyBodyState};
use crate::{C64, Error, Result};

/// β_c(t, K) = −ln tanh(3Kt); +∞ at t = 0 (and for K = 0).
pub fn beta_c(t: f64, k: f64) -> f64 {
    assert!(t >= 0.0 && k >= 0.0, "beta_c needs t >= 0, K >= 0");
    let th = (3.0 * k * t).tanh();
    if th == 0.0 {
        f64::INFINITY
    } else {
        -th.ln()
    }
}

fn check_domain(t: f64, beta: f64, k: f64) -> Result<()> {
    if t < 0.0 || beta < 0.0 || k < 0.0 {
        return Err(Error::Contract(format!(
            "bound domain needs t >= 0, beta >= 0, K >= 0; got t={t}, beta={beta}, K={k}"
        )));
    }
    let bc = beta_c(t, k);
    if beta >= bc {
        return Err(Error::BetaDomain { beta, beta_c: bc });
    }
    Ok(())
}

/// f(t, β) = ((1 − tanh(3Kt) e^{−β}) / (1 − tanh(3Kt) e^{β}))^{1/3}.
pub fn bound_f(t: f64, beta: f64, k: f64) -> Result<f64> {
    check_domain(t, beta, k)?;
    let th = (3.0 * k * t).tanh();
    Ok(((1.0 - th * (-beta).exp()) / (1.0 - th * beta.exp())).cbrt())
}

/// Markov tail bound P[N₊ > n] ≤ C_β f(t, β) e^{−βn}.
pub fn tail_bound(n: usize, beta: f64, c_beta: f64, t: f64, k: f64) -> Result<f64> {
    if c_beta < 1.0 - 1e-9 {
        return Err(Error::Contract(format!(
            "C_beta must be >= 1 for a normalized initial state, got {c_beta}"
        )));
    }
    Ok(c_beta * bound_f(t, beta, k)? * (-beta * n as f64).exp())
}

/// Characteristic coordinates of the transport argument.
#[derive(Debug, Clone, Copy)]
pub struct ChangeOfVariables {
    pub x: f64,
    pub y: f64,
    /// The characteristic label with T(x, y₀) = 0; the bound along the
    /// characteristic is e^{y − y₀}.
    pub y0: f64,
}

/// X = 6Kt − 2 artanh(e^{−β}), Y = X − β/3, and
/// y₀ = X + (1/3) ln tanh(artanh(e^{−β}) − 3Kt).
///
/// Degenerate at β = 0 (all three coordinates are −∞), so strictly positive
/// β is required.
pub fn change_of_variables(t: f64, beta: f64, k: f64) -> Result<ChangeOfVariables> {
    check_domain(t, beta, k)?;
    if beta == 0.0 {
        return Err(Error::Contract(
            "change of variables is degenerate at beta = 0 (X = -inf)".into(),
        ));
    }
    let a = (-beta).exp().atanh();
    let x = 6.0 * k * t - 2.0 * a;
    let y = x - beta / 3.0;
    let log_arg = (a - 3.0 * k * t).tanh();
    if log_arg <= 0.0 {
        return Err(Error::BetaDomain { beta, beta_c: beta_c(t, k) });
    }
    let y0 = x + log_arg.ln() / 3.0;
    Ok(ChangeOfVariables { x, y, y0 })
}

/// Inverse map: T(x, y) = (x + 2 artanh(e^{−3(x−y)})) / (6K), B(x, y) = 3(x−y).
pub fn inverse_change(x: f64, y: f64, k: f64) -> Result<(f64, f64)> {
    if k <= 0.0 {
        return Err(Error::Contract("inverse change of variables needs K > 0".into()));
    }
    if x <= y {
        return Err(Error::Contract(format!(
            "inverse change of variables needs x > y, got x={x}, y={y}"
        )));
    }
    let t = (x + 2.0 * (-3.0 * (x - y)).exp().atanh()) / (6.0 * k);
    let beta = 3.0 * (x - y);
    Ok((t, beta))
}

#[derive(Debug, Clone, Copy)]
pub struct GronwallPoint {
    pub t: f64,
    pub beta: f64,
    pub dt_g: f64,
    pub dbeta_g: f64,
    /// r = ∂_t g − 6K sinh(β) ∂_β g − 2K sinh(β) g.
    pub residual: f64,
    /// Same with the sharper coefficient 8K sinh(β/2) + 2K sinh(β); reported
    /// informationally.
    pub sharp_residual: f64,
    /// slack + finite-difference error estimate at this point.
    pub budget: f64,
    /// residual exceeds the budget: a genuine violation candidate.
    pub flagged: bool,
    /// residual exceeds the slack but stays within the FD budget.
    pub warning: bool,
}

#[derive(Debug, Clone)]
pub struct GronwallReport {
    pub points: Vec<GronwallPoint>,
    pub slack: f64,
}

impl GronwallReport {
    pub fn flagged(&self) -> usize {
        self.points.iter().filter(|p| p.flagged).count()
    }
    pub fn warnings(&self) -> usize {
        self.points.iter().filter(|p| p.warning).count()
    }
    pub fn max_residual(&self) -> f64 {
        self.points.iter().map(|p| p.residual).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn uniform_spacing(grid: &[f64]) -> Result<f64> {
    if grid.len() < 4 {
        return Err(Error::GridResolution(format!(
            "need at least 4 points per axis to budget the finite differences, got {}",
            grid.len()
        )));
    }
    let h = grid[1] - grid[0];
    if h <= 0.0 {
        return Err(Error::GridResolution("grid must be strictly increasing".into()));
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(Error::GridResolution("grid spacing must be uniform".into()));
        }
    }
    Ok(h)
}

/// Largest |third difference| / h³ along rows or columns: a grid estimate of
/// the third derivative, used to budget the central-difference error h²M₃/6.
fn third_derivative_estimate(g: &[Vec<f64>], h: f64, along_rows: bool) -> f64 {
    let (nt, nb) = (g.len(), g[0].len());
    let mut m3 = 0.0f64;
    if along_rows {
        for j in 0..nb {
            for i in 0..nt.saturating_sub(3) {
                let d3 = g[i + 3][j] - 3.0 * g[i + 2][j] + 3.0 * g[i + 1][j] - g[i][j];
                m3 = m3.max(d3.abs());
            }
        }
    } else {
        for row in g {
            for j in 0..nb.saturating_sub(3) {
                let d3 = row[j + 3] - 3.0 * row[j + 2] + 3.0 * row[j + 1] - row[j];
                m3 = m3.max(d3.abs());
            }
        }
    }
    m3 / (h * h * h)
}

/// Central-difference verification of ∂_t g ≤ 6K sinh(β) ∂_β g + 2K sinh(β) g
/// on the interior of a rectangular (t, β) grid. `g[i][j]` = g(t_grid[i],
/// beta_grid[j]).
pub fn gronwall_check(
    t_grid: &[f64],
    beta_grid: &[f64],
    g: &[Vec<f64>],
    k: f64,
    slack: f64,
) -> Result<GronwallReport> {
    let ht = uniform_spacing(t_grid)?;
    let hb = uniform_spacing(beta_grid)?;
    if g.len() != t_grid.len() || g.iter().any(|row| row.len() != beta_grid.len()) {
        return Err(Error::DimensionMismatch("surface shape vs grids".into()));
    }
    let beta_max = *beta_grid.last().unwrap();
    let t_max = *t_grid.last().unwrap();
    if k > 0.0 && beta_max >= beta_c(t_max, k) {
        return Err(Error::BetaDomain { beta: beta_max, beta_c: beta_c(t_max, k) });
    }
    let m3_t = third_derivative_estimate(g, ht, true);
    let m3_b = third_derivative_estimate(g, hb, false);
    let mut points = Vec::new();
    for i in 1..t_grid.len() - 1 {
        for j in 1..beta_grid.len() - 1 {
            let beta = beta_grid[j];
            let dt_g = (g[i + 1][j] - g[i - 1][j]) / (2.0 * ht);
            let dbeta_g = (g[i][j + 1] - g[i][j - 1]) / (2.0 * hb);
            let sinh_b = beta.sinh();
            let value = g[i][j];
            let residual = dt_g - 6.0 * k * sinh_b * dbeta_g - 2.0 * k * sinh_b * value;
            let sharp_residual = dt_g
                - (8.0 * k * (beta / 2.0).sinh() + 2.0 * k * sinh_b) * dbeta_g
                - 2.0 * k * sinh_b * value;
            let fd_error = ht * ht / 6.0 * m3_t + 6.0 * k * sinh_b * hb * hb / 6.0 * m3_b;
            let budget = slack + fd_error;
            points.push(GronwallPoint {
                t: t_grid[i],
                beta,
                dt_g,
                dbeta_g,
                residual,
                sharp_residual,
                budget,
                flagged: residual > budget,
                warning: residual > slack && residual <= budget,
            });
        }
    }
    Ok(GronwallReport { points, slack })
}

#[derive(Debug, Clone, Copy)]
pub struct MarginRow {
    pub t: f64,
    pub beta: f64,
    pub beta_c: f64,
    pub g: f64,
    pub c_beta: f64,
    pub f: f64,
    /// C_β f(t, β) − g_N(t, β); non-negative when the bound holds.
    pub margin: f64,
}

/// Runs the full pipeline — many-body propagation, Hartree flow, excitation
/// statistics — and tabulates the bound margin at every (t, β) grid point.
pub fn bound_check(
    model: &MeanFieldModel,
    psi0: &ManyBodyState,
    phi0: &DVector<C64>,
    t_grid: &[f64],
    beta_grid: &[f64],
) -> Result<Vec<MarginRow>> {
    let k = model.coupling;
    let basis = enumerate_sector(model.t_op.dim, model.n_particles)?;
    if psi0.amplitudes.len() != basis.dim() {
        return Err(Error::DimensionMismatch("psi0 length vs N-sector".into()));
    }
    for &t in t_grid {
        for &beta in beta_grid {
            check_domain(t, beta, k)?;
        }
    }
    let frame0 = CondensateFrame::new(phi0.clone())?;
    let dist0 = excitation_distribution(psi0, &frame0, &basis)?;
    let h = assemble_hamiltonian(model, &basis)?;
    let plan = plan_propagation(&h)?;
    let mut rows = Vec::with_capacity(t_grid.len() * beta_grid.len());
    for &t in t_grid {
        let psi_t = ManyBodyState::unit(plan.apply(&h, &psi0.amplitudes, t))?;
        let phi_t = hartree_phi_at(model, phi0, t)?;
        let frame = CondensateFrame::new(phi_t)?;
        let dist = excitation_distribution(&psi_t, &frame, &basis)?;
        for &beta in beta_grid {
            let g = dist.mgf_value(beta);
            let c_beta = dist0.mgf_value(beta);
            let f = bound_f(t, beta, k)?;
            rows.push(MarginRow {
                t,
                beta,
                beta_c: beta_c(t, k),
                g,
                c_beta,
                f,
                margin: c_beta * f - g,
            });
        }
    }
    Ok(rows)
}

/// Uniform one-dimensional grid x_i = start + i·step that must contain 0.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl GridSpec {
    pub fn point(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    /// Index of the origin; the difference-indexing of the interaction
    /// samples relies on 0 being exactly on the grid.
    pub fn index_of_zero(&self) -> Result<usize> {
        if self.step <= 0.0 || self.len < 2 {
            return Err(Error::GridResolution("grid needs step > 0 and len >= 2".into()));
        }
        let i0 = (-self.start / self.step).round();
        if i0 < 0.0 || i0 as usize >= self.len || (self.start + i0 * self.step).abs() > 1e-9 {
            return Err(Error::GridResolution(
                "interaction grid must contain the origin".into(),
            ));
        }
        Ok(i0 as usize)
    }
}

const QUADRATURE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct VvEstimate {
    /// 𝕍 in the norm convention: sup_x ‖V(x−·)φ‖.
    pub value: f64,
    /// The squared convention sup_x ∫|V(x−y)φ(y)|² dy, exposed alongside.
    pub squared: f64,
    pub grid: GridSpec,
    /// |value − refined value| when a half-spacing refinement was run.
    pub refinement_delta: Option<f64>,
}

/// Grid estimate of 𝕍 = sup_x ‖V(x−·)φ‖ by Riemann quadrature. `v_samples`
/// and `phi_samples` live on the same grid; V(x_i − y_j) is looked up by
/// index difference and extended by zero off the grid.
pub fn vv_estimate(
    v_samples: &[f64],
    phi_samples: &[C64],
    grid: GridSpec,
) -> Result<VvEstimate> {
    if v_samples.len() != grid.len || phi_samples.len() != grid.len {
        return Err(Error::DimensionMismatch("sample lengths vs grid".into()));
    }
    let i0 = grid.index_of_zero()?;
    let h = grid.step;
    let norm: f64 = phi_samples.iter().map(|p| p.norm_sqr()).sum::<f64>() * h;
    if (norm - 1.0).abs() > QUADRATURE_TOL {
        return Err(Error::Quadrature(format!(
            "phi must be grid-normalized: quadrature of |phi|^2 is {norm}"
        )));
    }
    let n = grid.len;
    let mut squared = 0.0f64;
    for i in 0..n {
        let mut acc = 0.0;
        for (j, phi) in phi_samples.iter().enumerate() {
            let shift = i0 as isize + i as isize - j as isize;
            if shift < 0 || shift as usize >= n {
                continue;
            }
            let v = v_samples[shift as usize];
            acc += v * v * phi.norm_sqr();
        }
        squared = squared.max(acc * h);
    }
    Ok(VvEstimate { value: squared.sqrt(), squared, grid, refinement_delta: None })
}

/// Samples the closures on the grid and on its half-spacing refinement and
/// fails if the two 𝕍 estimates differ by more than `tolerance`.
pub fn vv_estimate_refined(
    v: impl Fn(f64) -> f64,
    phi: impl Fn(f64) -> C64,
    grid: GridSpec,
    tolerance: f64,
) -> Result<VvEstimate> {
    let sample = |g: GridSpec| -> Result<VvEstimate> {
        let vs: Vec<f64> = (0..g.len).map(|i| v(g.point(i))).collect();
        let ps: Vec<C64> = (0..g.len).map(|i| phi(g.point(i))).collect();
        vv_estimate(&vs, &ps, g)
    };
    let coarse = sample(grid)?;
    let fine_grid = GridSpec { start: grid.start, step: grid.step / 2.0, len: 2 * grid.len - 1 };
    let fine = sample(fine_grid)?;
    let delta = (coarse.value - fine.value).abs();
    if delta > tolerance {
        return Err(Error::Quadrature(format!(
            "interaction-scale estimate moved by {delta:.3e} under refinement (tolerance {tolerance:.3e})"
        )));
    }
    Ok(VvEstimate { refinement_delta: Some(delta), ..fine })
}
