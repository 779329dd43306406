//! First-order Godunov finite-volume integrator for the LWR initial-boundary
//! value problem on `[a, b]`.
//!
//! Boundary data enters in the weak sense: ghost cells carry the commanded
//! values and the boundary flux is the Godunov flux of the corresponding
//! boundary Riemann problem. This is the discrete analogue of the
//! Bardos-LeRoux condition, so the attained boundary trace may legitimately
//! differ from the commanded value (e.g. unrestricted outflow); callers log
//! both.

use crate::error::{Error, Result};
use crate::flux::FluxModel;

/// Wave speeds below this floor are treated as zero when sizing time steps;
/// the step is then limited by `dt_max` instead.
pub const WAVE_SPEED_FLOOR: f64 = 1e-12;

/// Cell-averaged density profile at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    a: f64,
    b: f64,
    cells: Vec<f64>,
    time: f64,
}

impl GridState {
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / self.cells.len() as f64
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Midpoint of cell `i`.
    pub fn cell_center(&self, i: usize) -> f64 {
        self.a + (i as f64 + 0.5) * self.dx()
    }
}

/// Commanded boundary densities `(omega_a, omega_b)` held over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryData {
    pub omega_a: f64,
    pub omega_b: f64,
}

impl BoundaryData {
    pub fn new(omega_a: f64, omega_b: f64) -> Self {
        BoundaryData { omega_a, omega_b }
    }
}

/// Result of advancing a state over an interval: the new state plus the
/// time-integrated boundary fluxes needed for exact mass audits.
#[derive(Debug, Clone)]
pub struct Advance {
    pub state: GridState,
    /// Time integral of the left-boundary Godunov flux over the interval.
    pub inflow_integral: f64,
    /// Time integral of the right-boundary Godunov flux over the interval.
    pub outflow_integral: f64,
    pub substeps: usize,
}

/// Builds a state by sampling `profile` at cell midpoints (midpoint rule for
/// cell averages, adequate at first order).
pub fn init_from_profile<P>(
    model: &FluxModel,
    a: f64,
    b: f64,
    n_cells: usize,
    profile: P,
) -> Result<GridState>
where
    P: Fn(f64) -> f64,
{
    if a.is_nan() || b.is_nan() || a >= b {
        return Err(Error::InvalidParameter {
            name: "domain",
            reason: format!("require a < b, got a={a}, b={b}"),
        });
    }
    if n_cells < 2 {
        return Err(Error::InvalidParameter {
            name: "n_cells",
            reason: format!("require at least 2 cells, got {n_cells}"),
        });
    }
    let dx = (b - a) / n_cells as f64;
    let mut cells = Vec::with_capacity(n_cells);
    for i in 0..n_cells {
        let x = a + (i as f64 + 0.5) * dx;
        cells.push(model.check_density(profile(x))?);
    }
    Ok(GridState {
        a,
        b,
        cells,
        time: 0.0,
    })
}

fn max_wave_speed(model: &FluxModel, state: &GridState, bd: BoundaryData) -> f64 {
    let mut speed: f64 = 0.0;
    for &u in &state.cells {
        speed = speed.max(model.deriv_raw(u).abs());
    }
    speed = speed.max(model.deriv_raw(bd.omega_a).abs());
    speed = speed.max(model.deriv_raw(bd.omega_b).abs());
    speed
}

/// CFL-limited time step: `cfl * dx / max |f'(u)|` over all cells and both
/// boundary values, floored at [`WAVE_SPEED_FLOOR`] and capped by `dt_max`.
pub fn cfl_dt(
    model: &FluxModel,
    state: &GridState,
    bd: BoundaryData,
    cfl: f64,
    dt_max: f64,
) -> f64 {
    assert!(cfl > 0.0 && cfl <= 1.0, "cfl fraction must lie in (0, 1]");
    let speed = max_wave_speed(model, state, bd).max(WAVE_SPEED_FLOOR);
    (cfl * state.dx() / speed).min(dt_max)
}

struct StepDetail {
    state: GridState,
    flux_in: f64,
    flux_out: f64,
}

fn step_detailed(
    model: &FluxModel,
    state: &GridState,
    bd: BoundaryData,
    dt: f64,
) -> Result<StepDetail> {
    let omega_a = model.check_density(bd.omega_a)?;
    let omega_b = model.check_density(bd.omega_b)?;
    let dx = state.dx();
    let bound = dx / max_wave_speed(model, state, bd).max(WAVE_SPEED_FLOOR);
    if dt.is_nan() || dt <= 0.0 || dt > bound * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, bound });
    }

    let n = state.cells.len();
    // Interface fluxes, ghost cells carrying the commanded boundary values.
    let mut fluxes = Vec::with_capacity(n + 1);
    fluxes.push(model.godunov_raw(omega_a, state.cells[0]));
    for i in 1..n {
        fluxes.push(model.godunov_raw(state.cells[i - 1], state.cells[i]));
    }
    fluxes.push(model.godunov_raw(state.cells[n - 1], omega_b));

    let lambda = dt / dx;
    let mut cells = Vec::with_capacity(n);
    for i in 0..n {
        let updated = state.cells[i] - lambda * (fluxes[i + 1] - fluxes[i]);
        // Under the CFL bound the update is a monotone combination, so any
        // excursion beyond [0, u_max] is floating-point drift (clamped) or a
        // genuine scheme violation (error).
        cells.push(model.check_density(updated)?);
    }
    Ok(StepDetail {
        state: GridState {
            a: state.a,
            b: state.b,
            cells,
            time: state.time + dt,
        },
        flux_in: fluxes[0],
        flux_out: fluxes[n],
    })
}

/// One conservative Godunov update. `dt` must satisfy the CFL bound for the
/// current data.
pub fn step(model: &FluxModel, state: &GridState, bd: BoundaryData, dt: f64) -> Result<GridState> {
    Ok(step_detailed(model, state, bd, dt)?.state)
}

/// Advances the state by exactly `horizon` with boundary data held constant,
/// taking CFL-limited substeps and truncating the last one.
pub fn advance_interval(
    model: &FluxModel,
    state: &GridState,
    bd: BoundaryData,
    horizon: f64,
    cfl: f64,
    dt_max: f64,
) -> Result<Advance> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: format!("must be positive, got {horizon}"),
        });
    }
    let start = state.time;
    let mut current = state.clone();
    let mut remaining = horizon;
    let mut inflow_integral = 0.0;
    let mut outflow_integral = 0.0;
    let mut substeps = 0;
    while remaining > horizon * 1e-14 {
        let dt = cfl_dt(model, &current, bd, cfl, dt_max).min(remaining);
        let detail = step_detailed(model, &current, bd, dt)?;
        current = detail.state;
        inflow_integral += dt * detail.flux_in;
        outflow_integral += dt * detail.flux_out;
        remaining -= dt;
        substeps += 1;
    }
    current.time = start + horizon;
    Ok(Advance {
        state: current,
        inflow_integral,
        outflow_integral,
        substeps,
    })
}

/// Boundary traces read as the first and last cell averages.
pub fn boundary_traces(state: &GridState) -> (f64, f64) {
    (state.cells[0], state.cells[state.cells.len() - 1])
}

/// Total number of vehicles, `dx * sum(cells)`.
pub fn total_mass(state: &GridState) -> f64 {
    state.dx() * state.cells.iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit() -> FluxModel {
        FluxModel::unit()
    }

    /// L1 distance between a state and the exact Riemann solution centered at
    /// `x_split`, sampled at cell midpoints.
    fn l1_error_vs_riemann(
        m: &FluxModel,
        state: &GridState,
        ul: f64,
        ur: f64,
        x_split: f64,
        t: f64,
    ) -> f64 {
        let dx = state.dx();
        state
            .cells()
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let xi = (state.cell_center(i) - x_split) / t;
                (c - m.riemann_sample(ul, ur, xi).unwrap()).abs() * dx
            })
            .sum()
    }

    fn riemann_state(m: &FluxModel, n: usize, ul: f64, ur: f64) -> GridState {
        init_from_profile(m, 0.0, 1.0, n, |x| if x < 0.5 { ul } else { ur }).unwrap()
    }

    fn evolve_to(m: &FluxModel, mut state: GridState, bd: BoundaryData, t_end: f64) -> GridState {
        while state.time() < t_end {
            let dt = cfl_dt(m, &state, bd, 0.9, f64::INFINITY).min(t_end - state.time());
            state = step(m, &state, bd, dt).unwrap();
        }
        state
    }

    #[test]
    fn init_constant_profile() {
        let m = unit();
        let s = init_from_profile(&m, 0.0, 1.0, 8, |_| 0.3).unwrap();
        assert!(s.cells().iter().all(|&c| c == 0.3));
        assert_eq!(s.time(), 0.0);
    }

    #[test]
    fn init_midpoint_rule() {
        let m = unit();
        let s = init_from_profile(&m, 0.0, 1.0, 4, |x| x).unwrap();
        assert_eq!(s.cells(), &[0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn init_sinusoid_range() {
        let m = unit();
        let s = init_from_profile(&m, 0.0, 1.0, 200, |x| {
            1.0 / 3.0 + 0.2 * (2.0 * PI * x).sin()
        })
        .unwrap();
        let min = s.cells().iter().cloned().fold(f64::INFINITY, f64::min);
        let max = s.cells().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(min >= 0.13, "min cell {min}");
        assert!(max <= 0.54, "max cell {max}");
    }

    #[test]
    fn init_rejects_out_of_range_profile() {
        let m = unit();
        assert!(init_from_profile(&m, 0.0, 1.0, 4, |_| 1.2).is_err());
        assert!(init_from_profile(&m, 0.0, 1.0, 1, |_| 0.5).is_err());
        assert!(init_from_profile(&m, 1.0, 0.0, 4, |_| 0.5).is_err());
    }

    #[test]
    fn cfl_dt_includes_boundary_values() {
        let m = unit();
        // Interior at the critical density has zero wave speed; the vacuum
        // boundary values dominate with |f'(0)| = 1.
        let s = init_from_profile(&m, 0.0, 1.0, 100, |_| 0.5).unwrap();
        let dt = cfl_dt(&m, &s, BoundaryData::new(0.0, 0.0), 0.9, f64::INFINITY);
        assert!((dt - 0.009).abs() <= 1e-15);
    }

    #[test]
    fn cfl_dt_stationary_case_capped_by_dt_max() {
        let m = unit();
        let s = init_from_profile(&m, 0.0, 1.0, 200, |_| 0.5).unwrap();
        let dt = cfl_dt(&m, &s, BoundaryData::new(0.5, 0.5), 0.5, 2.0);
        assert_eq!(dt, 2.0);
    }

    #[test]
    fn cfl_dt_full_span() {
        let m = unit();
        let s = init_from_profile(&m, 0.0, 1.0, 100, |x| x).unwrap();
        let dt = cfl_dt(&m, &s, BoundaryData::new(0.0, 1.0), 1.0, f64::INFINITY);
        assert!((dt - 0.01).abs() <= 1e-15);
    }

    #[test]
    fn step_preserves_steady_state_bitwise() {
        let m = unit();
        let s = init_from_profile(&m, 0.0, 1.0, 50, |_| 0.3).unwrap();
        let next = step(&m, &s, BoundaryData::new(0.3, 0.3), 0.005).unwrap();
        assert_eq!(next.cells(), s.cells());
    }

    #[test]
    fn step_mass_balance_is_exact() {
        let m = unit();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let offset: f64 = rng.gen_range(0.2..0.6);
            let amp: f64 = rng.gen_range(0.0..0.2);
            let s = init_from_profile(&m, 0.0, 1.0, 64, |x| offset + amp * (2.0 * PI * x).sin())
                .unwrap();
            let bd = BoundaryData::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let dt = cfl_dt(&m, &s, bd, 0.9, f64::INFINITY);
            let detail = step_detailed(&m, &s, bd, dt).unwrap();
            let lhs = total_mass(&detail.state) - total_mass(&s);
            let rhs = dt * (detail.flux_in - detail.flux_out);
            assert!(
                (lhs - rhs).abs() <= 1e-14,
                "mass balance residual {}",
                lhs - rhs
            );
        }
    }

    #[test]
    fn step_rejects_cfl_violation() {
        let m = unit();
        let s = init_from_profile(&m, 0.0, 1.0, 100, |x| x).unwrap();
        let err = step(&m, &s, BoundaryData::new(0.0, 1.0), 0.05);
        assert!(matches!(err, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn maximum_principle_holds_on_random_data() {
        let m = unit();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let mut s = init_from_profile(&m, 0.0, 1.0, 80, |x| {
                0.5 + 0.5 * (2.0 * PI * 3.0 * x).sin().powi(3)
            })
            .unwrap();
            let bd = BoundaryData::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            for _ in 0..50 {
                let dt = cfl_dt(&m, &s, bd, 0.9, f64::INFINITY);
                s = step(&m, &s, bd, dt).unwrap();
                for &c in s.cells() {
                    assert!((0.0..=1.0).contains(&c), "cell {c} escaped [0,1]");
                }
            }
        }
    }

    #[test]
    fn shock_position_and_l1_error() {
        let m = unit();
        // uL=0.1, uR=0.8: shock speed (f(0.8)-f(0.1))/0.7 = 0.1, so at t=0.5
        // the shock sits at x = 0.55.
        let n = 400;
        let s0 = riemann_state(&m, n, 0.1, 0.8);
        let s = evolve_to(&m, s0, BoundaryData::new(0.1, 0.8), 0.5);
        let err = l1_error_vs_riemann(&m, &s, 0.1, 0.8, 0.5, 0.5);
        assert!(
            err <= 2.0 * s.dx(),
            "L1 error {err} vs 2dx {}",
            2.0 * s.dx()
        );
        // Locate the discrete shock: first cell where the state crosses the
        // midpoint of the two states.
        let mid = 0.45;
        let crossing = s.cells().iter().position(|&c| c > mid).unwrap();
        let x_shock = s.cell_center(crossing);
        assert!((x_shock - 0.55).abs() <= 3.0 * s.dx(), "shock at {x_shock}");
    }

    #[test]
    fn riemann_oracle_matches_fine_godunov_on_random_data() {
        let m = unit();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..6 {
            let ul: f64 = rng.gen_range(0.0..1.0);
            let ur: f64 = rng.gen_range(0.0..1.0);
            let n = 400;
            let s0 = riemann_state(&m, n, ul, ur);
            let s = evolve_to(&m, s0, BoundaryData::new(ul, ur), 0.5);
            let err = l1_error_vs_riemann(&m, &s, ul, ur, 0.5, 0.5);
            assert!(
                err <= 2.0 * s.dx(),
                "({ul:.3},{ur:.3}): L1 error {err} vs 2dx {}",
                2.0 * s.dx()
            );
        }
    }

    #[test]
    fn first_order_convergence_on_shock_and_rarefaction() {
        // Transonic rarefactions carry the classic logarithmic factor at the
        // sonic point, so the per-doubling factor is asserted as the
        // geometric mean across the refinement range.
        let m = unit();
        for (ul, ur) in [(0.1, 0.8), (0.9, 0.1)] {
            let mut errors = Vec::new();
            for n in [100usize, 200, 400, 800] {
                let s0 = riemann_state(&m, n, ul, ur);
                let s = evolve_to(&m, s0, BoundaryData::new(ul, ur), 0.5);
                errors.push(l1_error_vs_riemann(&m, &s, ul, ur, 0.5, 0.5));
            }
            for pair in errors.windows(2) {
                assert!(pair[1] < pair[0], "({ul},{ur}): error grew: {errors:?}");
            }
            let doublings = (errors.len() - 1) as f64;
            let mean_factor = (errors[0] / errors[errors.len() - 1]).powf(1.0 / doublings);
            assert!(
                mean_factor >= 1.7,
                "({ul},{ur}): mean per-doubling factor {mean_factor} below 1.7 ({errors:?})"
            );
        }
    }

    #[test]
    fn advance_single_cfl_step_equals_step() {
        let m = unit();
        let s = init_from_profile(&m, 0.0, 1.0, 50, |x| 0.3 + 0.1 * x).unwrap();
        let bd = BoundaryData::new(0.3, 0.4);
        let dt = cfl_dt(&m, &s, bd, 0.9, f64::INFINITY);
        let direct = step(&m, &s, bd, dt).unwrap();
        let adv = advance_interval(&m, &s, bd, dt, 0.9, f64::INFINITY).unwrap();
        assert_eq!(adv.substeps, 1);
        assert_eq!(adv.state.cells(), direct.cells());
    }

    #[test]
    fn advance_steady_state_unchanged() {
        let m = unit();
        let s = init_from_profile(&m, 0.0, 1.0, 50, |_| 0.25).unwrap();
        let adv = advance_interval(&m, &s, BoundaryData::new(0.25, 0.25), 3.0, 0.9, 1.0).unwrap();
        assert_eq!(adv.state.cells(), s.cells());
        assert_eq!(adv.state.time(), 3.0);
    }

    #[test]
    fn advance_substep_accounting() {
        let m = unit();
        // dx = 0.005, uniform 0.25 with matching boundaries: |f'| = 0.5, so
        // dt = 0.9 * 0.005 / 0.5 = 0.009 and 0.015 needs ceil(0.015/0.009) = 2.
        let s = init_from_profile(&m, 0.0, 1.0, 200, |_| 0.25).unwrap();
        let adv = advance_interval(
            &m,
            &s,
            BoundaryData::new(0.25, 0.25),
            0.015,
            0.9,
            f64::INFINITY,
        )
        .unwrap();
        assert_eq!(adv.substeps, 2);
        assert_eq!(adv.state.time(), 0.015);
    }

    #[test]
    fn advance_accumulates_boundary_flux_integrals() {
        let m = unit();
        let s = init_from_profile(&m, 0.0, 1.0, 100, |x| 0.3 + 0.1 * (2.0 * PI * x).sin()).unwrap();
        let bd = BoundaryData::new(0.2, 0.35);
        let adv = advance_interval(&m, &s, bd, 0.5, 0.9, f64::INFINITY).unwrap();
        let drift =
            total_mass(&adv.state) - total_mass(&s) - (adv.inflow_integral - adv.outflow_integral);
        assert!(drift.abs() <= 1e-13, "mass audit drift {drift}");
    }

    #[test]
    fn long_run_traces_converge_to_target() {
        let m = unit();
        let u_star = 1.0 / 3.0;
        let s0 =
            init_from_profile(&m, 0.0, 1.0, 100, |x| u_star + 0.2 * (2.0 * PI * x).sin()).unwrap();
        let s = evolve_to(&m, s0, BoundaryData::new(u_star, u_star), 60.0);
        let (ta, tb) = boundary_traces(&s);
        assert!((ta - u_star).abs() <= 1e-3, "left trace {ta}");
        assert!((tb - u_star).abs() <= 1e-3, "right trace {tb}");
    }

    #[test]
    fn traces_are_first_and_last_cells() {
        let m = unit();
        let s = init_from_profile(&m, 0.0, 1.0, 4, |x| x).unwrap();
        assert_eq!(boundary_traces(&s), (0.125, 0.875));
        let c = init_from_profile(&m, 0.0, 1.0, 4, |_| 0.7).unwrap();
        assert_eq!(boundary_traces(&c), (0.7, 0.7));
    }

    #[test]
    fn total_mass_examples() {
        let m = unit();
        let s = init_from_profile(&m, 0.0, 1.0, 4, |_| 0.3).unwrap();
        assert!((total_mass(&s) - 0.3).abs() <= 1e-15);
        let two = init_from_profile(&m, 0.0, 1.0, 2, |x| if x < 0.5 { 0.2 } else { 0.4 }).unwrap();
        assert!((total_mass(&two) - 0.3).abs() <= 1e-15);
    }
}
