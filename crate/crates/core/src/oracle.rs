//! Grid brute-force oracles for the synthesis problems.
//!
//! These deliberately avoid the case analysis used by the solvers: they scan
//! dense grids (augmented with the interval endpoints and the potentials'
//! critical points so feasibility verdicts are exact) and return the
//! minimal-norm feasible point. Because `g` and `k` are differences of the
//! potentials, per-point constraint values are memoized as potential arrays;
//! the scan itself stays exhaustive. They validate the solvers and power the
//! CLI `oracle` subcommand.

use crate::flux::FluxModel;
use crate::functionals::{inv_potential, stab_potential, FunctionalParams};
use crate::synthesis::Interval;

/// Grid over `interval` with `n` panels plus the given extra candidates,
/// ascending.
fn grid_with(interval: Interval, n: usize, extra: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..=n)
        .map(|i| interval.lo + interval.width() * i as f64 / n as f64)
        .collect();
    pts.extend(extra.iter().copied().filter(|&x| interval.contains(x)));
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts
}

fn min_feasible<F>(points: &[f64], constraint: F, bound: f64) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    points.iter().copied().find(|&x| constraint(x) <= bound)
}

fn h_crits(params: &FunctionalParams, model: &FluxModel) -> [f64; 2] {
    [params.delta(model), params.gamma(model)]
}

pub fn stab_left(
    u_b: f64,
    c: f64,
    params: &FunctionalParams,
    model: &FluxModel,
    n: usize,
) -> Option<f64> {
    let ca = Interval::stability_left(params, model);
    let pts = grid_with(ca, n, &h_crits(params, model));
    min_feasible(
        &pts,
        |s| crate::functionals::g_eval(s, u_b, params, model),
        -c,
    )
}

pub fn stab_right(
    u_a: f64,
    c: f64,
    params: &FunctionalParams,
    model: &FluxModel,
    n: usize,
) -> Option<f64> {
    let cb = Interval::stability_right(params, model);
    let pts = grid_with(cb, n, &h_crits(params, model));
    min_feasible(
        &pts,
        |z| crate::functionals::g_eval(u_a, z, params, model),
        -c,
    )
}

pub fn inv_left(u_b: f64, d: f64, model: &FluxModel, n: usize) -> Option<f64> {
    let ia = Interval::invariance_left(model);
    let pts = grid_with(ia, n, &[model.critical_density()]);
    min_feasible(&pts, |s| crate::functionals::k_eval(s, u_b, model), d)
}

pub fn inv_right(u_a: f64, d: f64, model: &FluxModel, n: usize) -> Option<f64> {
    let ib = Interval::invariance_right(model);
    let pts = grid_with(ib, n, &[model.critical_density()]);
    min_feasible(&pts, |z| crate::functionals::k_eval(u_a, z, model), d)
}

/// Minimal-norm `(s, z)` with `left_vals[i] - right_vals[j] <= bound` over
/// the grids; for each `s` ascending `z` stops at the first feasible value.
fn both_min_norm(
    s_pts: &[f64],
    z_pts: &[f64],
    left_vals: &[f64],
    right_vals: &[f64],
    bound: f64,
) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64, f64)> = None;
    for (i, &s) in s_pts.iter().enumerate() {
        for (j, &z) in z_pts.iter().enumerate() {
            let norm = s * s + z * z;
            if let Some((_, _, best_norm)) = best {
                if norm >= best_norm {
                    break;
                }
            }
            if left_vals[i] - right_vals[j] <= bound {
                best = Some((s, z, norm));
                break;
            }
        }
    }
    best.map(|(s, z, _)| (s, z))
}

pub fn stab_both(
    c: f64,
    params: &FunctionalParams,
    model: &FluxModel,
    n: usize,
) -> Option<(f64, f64)> {
    let crits = h_crits(params, model);
    let s_pts = grid_with(Interval::stability_left(params, model), n, &crits);
    let z_pts = grid_with(Interval::stability_right(params, model), n, &crits);
    let h_s: Vec<f64> = s_pts
        .iter()
        .map(|&s| stab_potential(s, params, model))
        .collect();
    let h_z: Vec<f64> = z_pts
        .iter()
        .map(|&z| stab_potential(z, params, model))
        .collect();
    both_min_norm(&s_pts, &z_pts, &h_s, &h_z, -c)
}

pub fn inv_both(d: f64, model: &FluxModel, n: usize) -> Option<(f64, f64)> {
    let crit = [model.critical_density()];
    let s_pts = grid_with(Interval::invariance_left(model), n, &crit);
    let z_pts = grid_with(Interval::invariance_right(model), n, &crit);
    let m_s: Vec<f64> = s_pts.iter().map(|&s| inv_potential(s, model)).collect();
    let m_z: Vec<f64> = z_pts.iter().map(|&z| inv_potential(z, model)).collect();
    both_min_norm(&s_pts, &z_pts, &m_s, &m_z, d)
}

/// Compound left: the existential partner constraints over `I_b` are
/// resolved by exhaustive search over the partner grid, hoisted to the
/// grid's potential extrema thanks to the difference form of `g` and `k`.
pub fn compound_left(
    c: f64,
    d: f64,
    params: &FunctionalParams,
    model: &FluxModel,
    n: usize,
) -> Option<f64> {
    let ca = Interval::stability_left(params, model);
    let ib = Interval::invariance_right(model);
    let crits = [
        params.delta(model),
        params.gamma(model),
        model.critical_density(),
    ];
    let s_pts = grid_with(ca, n, &crits);
    let partner = grid_with(ib, n, &crits);
    let max_h = partner
        .iter()
        .map(|&z| stab_potential(z, params, model))
        .fold(f64::NEG_INFINITY, f64::max);
    let max_m = partner
        .iter()
        .map(|&z| inv_potential(z, model))
        .fold(f64::NEG_INFINITY, f64::max);
    s_pts.into_iter().find(|&s| {
        stab_potential(s, params, model) - max_h <= -c && inv_potential(s, model) - max_m <= d
    })
}

pub fn compound_right(
    c: f64,
    d: f64,
    params: &FunctionalParams,
    model: &FluxModel,
    n: usize,
) -> Option<f64> {
    let ca = Interval::stability_left(params, model);
    let ib = Interval::invariance_right(model);
    let crits = [
        params.delta(model),
        params.gamma(model),
        model.critical_density(),
    ];
    let z_pts = grid_with(ib, n, &crits);
    let partner = grid_with(ca, n, &crits);
    let min_h = partner
        .iter()
        .map(|&s| stab_potential(s, params, model))
        .fold(f64::INFINITY, f64::min);
    let min_m = partner
        .iter()
        .map(|&s| inv_potential(s, model))
        .fold(f64::INFINITY, f64::min);
    z_pts.into_iter().find(|&z| {
        min_h - stab_potential(z, params, model) <= -c && min_m - inv_potential(z, model) <= d
    })
}
