//! Greenshields flux for the LWR model and the pointwise kernels built on it:
//! exact flux/derivative/primitive evaluation, the demand/supply Godunov
//! numerical flux, and an exact Riemann-solution sampler used as a validation
//! oracle.

use crate::error::{Error, Result};

/// Densities may drift outside `[0, u_max]` by at most this much before an
/// evaluation is rejected; smaller excursions are clamped.
pub const DENSITY_CLAMP_TOL: f64 = 1e-12;

/// Concave traffic flux `f(u) = u (1 - u/u_max)` with critical density
/// `û = u_max / 2`, the unique maximizer of `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxModel {
    u_max: f64,
}

impl FluxModel {
    pub fn new(u_max: f64) -> Result<Self> {
        if !u_max.is_finite() || u_max <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "u_max",
                reason: format!("must be strictly positive and finite, got {u_max}"),
            });
        }
        Ok(FluxModel { u_max })
    }

    /// Unit model (`u_max = 1`); the parameterization used throughout the
    /// bundled scenarios.
    pub fn unit() -> Self {
        FluxModel { u_max: 1.0 }
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    /// Critical density `û = u_max / 2` where `f'(û) = 0`.
    pub fn critical_density(&self) -> f64 {
        0.5 * self.u_max
    }

    /// Validates a density, clamping floating-point drift of at most
    /// [`DENSITY_CLAMP_TOL`] back into `[0, u_max]`.
    pub fn check_density(&self, u: f64) -> Result<f64> {
        if u >= 0.0 && u <= self.u_max {
            Ok(u)
        } else if u > -DENSITY_CLAMP_TOL && u < 0.0 {
            Ok(0.0)
        } else if u > self.u_max && u < self.u_max + DENSITY_CLAMP_TOL {
            Ok(self.u_max)
        } else {
            Err(Error::OutOfRange {
                quantity: "density",
                value: u,
                u_max: self.u_max,
            })
        }
    }

    /// `f(u) = u (1 - u/u_max)`.
    pub fn flux(&self, u: f64) -> Result<f64> {
        Ok(self.flux_raw(self.check_density(u)?))
    }

    /// `f'(u) = 1 - 2u/u_max`, the characteristic speed.
    pub fn deriv(&self, u: f64) -> Result<f64> {
        Ok(self.deriv_raw(self.check_density(u)?))
    }

    /// Primitive `F(u) = u²/2 - u³/(3 u_max)`, normalized so `F(0) = 0`.
    /// Any other normalization would cancel in the boundary-rate functions,
    /// which are differences of `F`.
    pub fn primitive(&self, u: f64) -> Result<f64> {
        Ok(self.primitive_raw(self.check_density(u)?))
    }

    /// Godunov numerical flux in demand/supply form:
    /// `min(demand(uL), supply(uR))` with `demand(u) = f(min(u, û))` and
    /// `supply(u) = f(max(u, û))`. For a concave flux this equals the
    /// classical min/max-over-interval Godunov flux.
    pub fn godunov(&self, u_left: f64, u_right: f64) -> Result<f64> {
        let l = self.check_density(u_left)?;
        let r = self.check_density(u_right)?;
        Ok(self.godunov_raw(l, r))
    }

    /// Self-similar solution `u(x/t)` of the Riemann problem with states
    /// `(uL, uR)`: a shock of Rankine-Hugoniot speed when `uL < uR`, a
    /// rarefaction fan when `uL > uR`. Serves as the exact oracle for the
    /// finite-volume scheme.
    pub fn riemann_sample(&self, u_left: f64, u_right: f64, xi: f64) -> Result<f64> {
        let l = self.check_density(u_left)?;
        let r = self.check_density(u_right)?;
        if l == r {
            return Ok(l);
        }
        if l < r {
            // Characteristics converge: shock with speed from the jump condition.
            let s = (self.flux_raw(r) - self.flux_raw(l)) / (r - l);
            Ok(if xi <= s { l } else { r })
        } else {
            // Rarefaction fan: invert f' and clip to the connected states.
            let fan = 0.5 * self.u_max * (1.0 - xi);
            Ok(fan.clamp(r, l))
        }
    }

    pub(crate) fn flux_raw(&self, u: f64) -> f64 {
        u * (1.0 - u / self.u_max)
    }

    pub(crate) fn deriv_raw(&self, u: f64) -> f64 {
        1.0 - 2.0 * u / self.u_max
    }

    pub(crate) fn primitive_raw(&self, u: f64) -> f64 {
        0.5 * u * u - u * u * u / (3.0 * self.u_max)
    }

    pub(crate) fn godunov_raw(&self, u_left: f64, u_right: f64) -> f64 {
        let u_hat = self.critical_density();
        let demand = self.flux_raw(u_left.min(u_hat));
        let supply = self.flux_raw(u_right.max(u_hat));
        demand.min(supply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-15;

    /// Brute-force Godunov flux: min of f over [uL, uR] when uL <= uR, max
    /// over [uR, uL] otherwise, scanning a dense grid that includes the
    /// endpoints and the critical density.
    fn godunov_brute_force(m: &FluxModel, u_left: f64, u_right: f64) -> f64 {
        let (lo, hi) = if u_left <= u_right {
            (u_left, u_right)
        } else {
            (u_right, u_left)
        };
        let n = 20_000;
        let mut candidates: Vec<f64> = (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .collect();
        candidates.push(lo);
        candidates.push(hi);
        let u_hat = m.critical_density();
        if u_hat >= lo && u_hat <= hi {
            candidates.push(u_hat);
        }
        let vals = candidates.iter().map(|&u| m.flux_raw(u));
        if u_left <= u_right {
            vals.fold(f64::INFINITY, f64::min)
        } else {
            vals.fold(f64::NEG_INFINITY, f64::max)
        }
    }

    #[test]
    fn flux_boundary_zeros_and_maximum() {
        let m = FluxModel::unit();
        assert_eq!(m.flux(0.0).unwrap(), 0.0);
        assert_eq!(m.flux(1.0).unwrap(), 0.0);
        assert!((m.flux(0.5).unwrap() - 0.25).abs() <= TOL);
    }

    #[test]
    fn deriv_values() {
        let m = FluxModel::unit();
        assert!((m.deriv(0.5).unwrap()).abs() <= TOL);
        assert!((m.deriv(0.0).unwrap() - 1.0).abs() <= TOL);
        assert!((m.deriv(1.0).unwrap() + 1.0).abs() <= TOL);
    }

    #[test]
    fn critical_density_is_stationary_point() {
        for u_max in [1.0, 0.7, 2.5] {
            let m = FluxModel::new(u_max).unwrap();
            let u_hat = m.critical_density();
            assert_eq!(m.deriv(u_hat).unwrap(), 0.0);
            assert_eq!(m.flux(0.0).unwrap(), 0.0);
            assert_eq!(m.flux(u_max).unwrap(), 0.0);
        }
    }

    #[test]
    fn primitive_values() {
        let m = FluxModel::unit();
        assert_eq!(m.primitive(0.0).unwrap(), 0.0);
        assert!((m.primitive(1.0).unwrap() - 1.0 / 6.0).abs() <= TOL);
        assert!((m.primitive(0.5).unwrap() - 1.0 / 12.0).abs() <= TOL);
    }

    #[test]
    fn primitive_differentiates_to_flux() {
        // Centered differences of F should match f to O(h^2).
        let m = FluxModel::unit();
        let h = 1e-5;
        for i in 1..100 {
            let u = i as f64 / 100.0;
            let fd = (m.primitive_raw(u + h) - m.primitive_raw(u - h)) / (2.0 * h);
            assert!(
                (fd - m.flux_raw(u)).abs() <= 10.0 * h * h,
                "u={u}: fd={fd} vs f={}",
                m.flux_raw(u)
            );
        }
    }

    #[test]
    fn godunov_consistency() {
        let m = FluxModel::unit();
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            assert_eq!(m.godunov(u, u).unwrap(), m.flux(u).unwrap());
        }
    }

    #[test]
    fn godunov_extreme_states() {
        let m = FluxModel::unit();
        // Vacuum meets jam: zero flux through the interface.
        assert!((m.godunov(0.0, 1.0).unwrap() - godunov_brute_force(&m, 0.0, 1.0)).abs() <= TOL);
        assert_eq!(m.godunov(0.0, 1.0).unwrap(), 0.0);
        // Jam meets vacuum: transonic rarefaction carries the peak flux.
        assert!((m.godunov(1.0, 0.0).unwrap() - godunov_brute_force(&m, 1.0, 0.0)).abs() <= TOL);
        assert!((m.godunov(1.0, 0.0).unwrap() - 0.25).abs() <= TOL);
    }

    #[test]
    fn godunov_matches_min_max_oracle_on_grid() {
        let m = FluxModel::unit();
        for i in 0..=25 {
            for j in 0..=25 {
                let ul = i as f64 / 25.0;
                let ur = j as f64 / 25.0;
                let got = m.godunov(ul, ur).unwrap();
                let want = godunov_brute_force(&m, ul, ur);
                assert!((got - want).abs() <= 1e-14, "({ul},{ur}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn godunov_monotone_in_both_arguments() {
        // Nondecreasing in uL, nonincreasing in uR.
        let m = FluxModel::unit();
        let n = 60;
        let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        for &ur in &grid {
            let mut prev = m.godunov(grid[0], ur).unwrap();
            for &ul in &grid[1..] {
                let cur = m.godunov(ul, ur).unwrap();
                assert!(
                    cur >= prev - 1e-15,
                    "not nondecreasing in uL at ({ul},{ur})"
                );
                prev = cur;
            }
        }
        for &ul in &grid {
            let mut prev = m.godunov(ul, grid[0]).unwrap();
            for &ur in &grid[1..] {
                let cur = m.godunov(ul, ur).unwrap();
                assert!(
                    cur <= prev + 1e-15,
                    "not nonincreasing in uR at ({ul},{ur})"
                );
                prev = cur;
            }
        }
    }

    #[test]
    fn riemann_shock_cases() {
        let m = FluxModel::unit();
        // s = (f(0.8) - f(0.1)) / 0.7 = 0.1 > 0, so xi = 0 sits left of the shock.
        assert_eq!(m.riemann_sample(0.1, 0.8, 0.0).unwrap(), 0.1);
        assert_eq!(m.riemann_sample(0.1, 0.8, 0.2).unwrap(), 0.8);
        // f(0.2) = f(0.8): stationary shock. The speed is zero up to the
        // rounding of the two flux evaluations, so probe both sides of it.
        let s = (m.flux(0.8).unwrap() - m.flux(0.2).unwrap()) / 0.6;
        assert!(s.abs() <= 1e-15, "stationary shock speed {s}");
        assert_eq!(m.riemann_sample(0.2, 0.8, -1e-9).unwrap(), 0.2);
        assert_eq!(m.riemann_sample(0.2, 0.8, 1e-9).unwrap(), 0.8);
        // Dyadic states make the speed exactly zero; the jump point carries
        // the left state.
        assert_eq!(m.riemann_sample(0.25, 0.75, 0.0).unwrap(), 0.25);
    }

    #[test]
    fn riemann_rarefaction_cases() {
        let m = FluxModel::unit();
        // Fan center carries the critical density.
        assert_eq!(m.riemann_sample(0.9, 0.1, 0.0).unwrap(), 0.5);
        // Outside the fan the constant states persist.
        assert_eq!(m.riemann_sample(0.9, 0.1, -0.9).unwrap(), 0.9);
        assert_eq!(m.riemann_sample(0.9, 0.1, 0.9).unwrap(), 0.1);
        // Inside the fan: u = (1 - xi)/2.
        let xi = 0.3;
        assert!((m.riemann_sample(0.9, 0.1, xi).unwrap() - 0.35).abs() <= TOL);
        // Equal states are returned unchanged.
        assert_eq!(m.riemann_sample(0.4, 0.4, -2.0).unwrap(), 0.4);
    }

    #[test]
    fn out_of_range_density_is_rejected_but_drift_is_clamped() {
        let m = FluxModel::unit();
        assert!(m.flux(1.5).is_err());
        assert!(m.flux(-0.1).is_err());
        assert!(m.godunov(0.5, 2.0).is_err());
        assert_eq!(m.flux(-1e-13).unwrap(), 0.0);
        assert_eq!(m.flux(1.0 + 1e-13).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_u_max() {
        assert!(FluxModel::new(0.0).is_err());
        assert!(FluxModel::new(-1.0).is_err());
        assert!(FluxModel::new(f64::NAN).is_err());
    }
}
