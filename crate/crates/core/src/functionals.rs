//! State functionals and boundary-rate functions for the control layer.
//!
//! `V` measures L2 distance to the target profile, `B` is the barrier
//! functional whose zero superlevel set is the safe set. The boundary-rate
//! functions `g` and `k` are differences of two cubic potentials and bound
//! the boundary contribution to `dV/dt` and `-dB/dt` through the traces;
//! the budgets `C = alpha(V)` and `D = beta(B)` are the class-K right-hand
//! sides of the synthesis constraints.

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::solver::GridState;

/// Target density, barrier threshold, and class-K gain specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalParams {
    pub u_star: f64,
    pub u_bar: f64,
    pub alpha_gain: f64,
    pub beta_gain: f64,
    pub c_cap: f64,
    pub d_cap: f64,
}

impl FunctionalParams {
    pub fn new(
        model: &FluxModel,
        u_star: f64,
        u_bar: f64,
        alpha_gain: f64,
        beta_gain: f64,
        c_cap: f64,
        d_cap: f64,
    ) -> Result<Self> {
        let check = |name: &'static str, v: f64| -> Result<()> {
            if v < 0.0 || v > model.u_max() || !v.is_finite() {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must lie in [0, {}], got {v}", model.u_max()),
                })
            } else {
                Ok(())
            }
        };
        check("u_star", u_star)?;
        check("u_bar", u_bar)?;
        for (name, v) in [("alpha_gain", alpha_gain), ("beta_gain", beta_gain)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("class-K gain must be positive, got {v}"),
                });
            }
        }
        for (name, v) in [("c_cap", c_cap), ("d_cap", d_cap)] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("saturation cap must be positive (may be inf), got {v}"),
                });
            }
        }
        Ok(FunctionalParams {
            u_star,
            u_bar,
            alpha_gain,
            beta_gain,
            c_cap,
            d_cap,
        })
    }

    /// `delta = min(u_star, u_hat)`, the lower critical point of the
    /// stability potential.
    pub fn delta(&self, model: &FluxModel) -> f64 {
        self.u_star.min(model.critical_density())
    }

    /// `gamma = max(u_star, u_hat)`, the upper critical point.
    pub fn gamma(&self, model: &FluxModel) -> f64 {
        self.u_star.max(model.critical_density())
    }
}

/// `V(u) = (1/2) integral (u - u_star)^2`, by midpoint quadrature on the
/// cell averages.
pub fn lyapunov_v(state: &GridState, params: &FunctionalParams) -> f64 {
    let dx = state.dx();
    0.5 * dx
        * state
            .cells()
            .iter()
            .map(|&c| (c - params.u_star) * (c - params.u_star))
            .sum::<f64>()
}

/// `B(u) = u_bar^2 - integral u^2`; nonnegative on the safe set.
pub fn barrier_b(state: &GridState, params: &FunctionalParams) -> f64 {
    let dx = state.dx();
    params.u_bar * params.u_bar - dx * state.cells().iter().map(|&c| c * c).sum::<f64>()
}

/// Stability potential `h(s) = (s - u_star) f(s) - F(s)`; `g` is its
/// difference.
pub fn stab_potential(s: f64, params: &FunctionalParams, model: &FluxModel) -> f64 {
    (s - params.u_star) * model.flux_raw(s) - model.primitive_raw(s)
}

/// Invariance potential `m(s) = s f(s) - F(s)` (the entropy flux of `u^2`
/// up to a factor); `k` is its difference.
pub fn inv_potential(s: f64, model: &FluxModel) -> f64 {
    s * model.flux_raw(s) - model.primitive_raw(s)
}

/// Boundary rate of `V`:
/// `g(s,z) = (s - u_star) f(s) - (z - u_star) f(z) - F(s) + F(z)`.
pub fn g_eval(s: f64, z: f64, params: &FunctionalParams, model: &FluxModel) -> f64 {
    stab_potential(s, params, model) - stab_potential(z, params, model)
}

/// Boundary rate of `-B` (up to a factor absorbed into `beta`):
/// `k(s,z) = s f(s) - z f(z) - F(s) + F(z)`.
pub fn k_eval(s: f64, z: f64, model: &FluxModel) -> f64 {
    inv_potential(s, model) - inv_potential(z, model)
}

/// Stability budget `C = min(alpha_gain * V, c_cap)`; zero iff `V = 0`.
pub fn budget_c(v: f64, params: &FunctionalParams) -> Result<f64> {
    if v.is_nan() || v < 0.0 {
        return Err(Error::InvalidParameter {
            name: "lyapunov_v",
            reason: format!("must be nonnegative, got {v}"),
        });
    }
    Ok((params.alpha_gain * v).min(params.c_cap))
}

/// Invariance budget. For `b >= 0` this is `min(beta_gain * b, d_cap)`; for
/// `b < 0` the linear branch extends oddly so the constraint keeps pushing
/// the state back toward the safe set.
pub fn budget_d(b: f64, params: &FunctionalParams) -> f64 {
    if b >= 0.0 {
        (params.beta_gain * b).min(params.d_cap)
    } else {
        params.beta_gain * b
    }
}
