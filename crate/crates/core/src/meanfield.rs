//! Non-equilibrium Gross-Pitaevskii (mean-field) steady states.
//!
//! Replacing every `s` by a c-number `alpha_s` in the Heisenberg equations
//! gives
//!
//! ```text
//! d alpha_s/dt = i (Delta - U |alpha_s|^2) alpha_s + i J sum_nb alpha_nb
//!                - i F_s - (gamma/2) alpha_s
//! ```
//!
//! The fixed point is reached by integrating from the vacuum and then
//! polished with Newton steps. In bistable regions this selects the branch
//! connected to the vacuum.

use serde::{Deserialize, Serialize};

use crate::lattice::{DriveMask, LatticeGraph, ModelParams};
use crate::observables::PhotonState;
use crate::ode::{integrate, OdeOptions};
use crate::{CMatrix, Error, Result, C64};

/// Classical field amplitudes, one per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalField {
    pub amplitude: Vec<C64>,
}

impl ClassicalField {
    pub fn densities(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a.norm_sqr()).collect()
    }
}

impl PhotonState for ClassicalField {
    fn n_sites(&self) -> usize {
        self.amplitude.len()
    }

    fn moment(&self, factors: &[(usize, u32)]) -> f64 {
        factors
            .iter()
            .map(|&(s, k)| self.amplitude[s].norm_sqr().powi(k as i32))
            .product()
    }
}

/// Right-hand side of the Gross-Pitaevskii equation.
pub fn gp_rhs(
    adjacency: &[Vec<usize>],
    params: &ModelParams,
    mask: &DriveMask,
    alpha: &[C64],
) -> Vec<C64> {
    let i_unit = C64::new(0.0, 1.0);
    (0..alpha.len())
        .map(|s| {
            let a = alpha[s];
            let nb: C64 = adjacency[s].iter().map(|&t| alpha[t]).sum();
            i_unit * (params.detuning - params.interaction * a.norm_sqr()) * a
                + i_unit * params.hopping * nb
                - i_unit * mask.amplitude[s]
                - 0.5 * params.gamma * a
        })
        .collect()
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct GpOptions {
    pub tol: f64,
    pub t_max: f64,
}

impl Default for GpOptions {
    fn default() -> Self {
        GpOptions { tol: 1e-10, t_max: 1e4 }
    }
}

/// Newton step on the real 2n-dimensional system `f(alpha, alpha^*) = 0`.
fn newton_step(
    adjacency: &[Vec<usize>],
    params: &ModelParams,
    mask: &DriveMask,
    alpha: &[C64],
) -> Option<Vec<C64>> {
    let n = alpha.len();
    let i_unit = C64::new(0.0, 1.0);
    let f = gp_rhs(adjacency, params, mask, alpha);
    let mut jac = CMatrix::zeros(2 * n, 2 * n);
    for s in 0..n {
        let a = alpha[s];
        let d = i_unit * (params.detuning - 2.0 * params.interaction * a.norm_sqr()) - 0.5 * params.gamma;
        let off = -i_unit * params.interaction * a * a;
        jac[(s, s)] = d;
        jac[(s, n + s)] = off;
        jac[(n + s, n + s)] = d.conj();
        jac[(n + s, s)] = off.conj();
        for &t in &adjacency[s] {
            jac[(s, t)] += i_unit * params.hopping;
            jac[(n + s, n + t)] += -i_unit * params.hopping;
        }
    }
    let rhs = crate::CVector::from_iterator(
        2 * n,
        f.iter().map(|x| -x).chain(f.iter().map(|x| -x.conj())),
    );
    let delta = jac.lu().solve(&rhs)?;
    Some((0..n).map(|s| alpha[s] + delta[s]).collect())
}

/// Mean-field steady state reached from the vacuum.
pub fn gp_steady_state(
    graph: &LatticeGraph,
    params: &ModelParams,
    mask: &DriveMask,
) -> Result<ClassicalField> {
    gp_steady_state_with(graph, params, mask, GpOptions::default())
}

pub fn gp_steady_state_with(
    graph: &LatticeGraph,
    params: &ModelParams,
    mask: &DriveMask,
    opts: GpOptions,
) -> Result<ClassicalField> {
    params.validate()?;
    let n = graph.n_sites();
    if mask.amplitude.len() != n {
        return Err(Error::InvalidParams("drive mask length mismatch".into()));
    }
    let adj = graph.adjacency();
    if mask.max_abs() == 0.0 {
        return Ok(ClassicalField { amplitude: vec![C64::new(0.0, 0.0); n] });
    }
    let coarse = 1e-6f64.max(opts.tol);
    let y0 = CMatrix::zeros(n, 1);
    let ode_opts = OdeOptions { rtol: 1e-10, atol: 1e-12, initial_step: 1e-2, max_step: 5.0, max_steps: 10_000_000 };
    let rhs = |_: f64, y: &CMatrix| CMatrix::from_column_slice(n, 1, &gp_rhs(&adj, params, mask, y.as_slice()));
    let (y, _) = integrate(rhs, y0, 0.0, opts.t_max, ode_opts, |_, y| {
        norm(&gp_rhs(&adj, params, mask, y.as_slice())) < coarse
    })?;
    let mut alpha: Vec<C64> = y.as_slice().to_vec();
    let mut res = norm(&gp_rhs(&adj, params, mask, &alpha));
    if res >= coarse {
        return Err(Error::NonConvergence { what: "mean-field fixed point".into(), residual: res });
    }
    for _ in 0..20 {
        if res < opts.tol {
            break;
        }
        let Some(next) = newton_step(&adj, params, mask, &alpha) else { break };
        let next_res = norm(&gp_rhs(&adj, params, mask, &next));
        if next_res >= res {
            break;
        }
        alpha = next;
        res = next_res;
    }
    if res >= opts.tol {
        return Err(Error::NonConvergence { what: "mean-field fixed point".into(), residual: res });
    }
    Ok(ClassicalField { amplitude: alpha })
}

/// Linear-response field at `U = 0`: `(Delta + i gamma/2) alpha + J A alpha = F`.
pub fn linear_field(graph: &LatticeGraph, params: &ModelParams, mask: &DriveMask) -> Result<ClassicalField> {
    let n = graph.n_sites();
    let mut m = CMatrix::zeros(n, n);
    for s in 0..n {
        m[(s, s)] = C64::new(params.detuning, 0.5 * params.gamma);
    }
    for e in &graph.edges {
        m[(e.i, e.j)] += C64::new(params.hopping, 0.0);
        m[(e.j, e.i)] += C64::new(params.hopping, 0.0);
    }
    let b = crate::CVector::from_column_slice(&mask.amplitude);
    let x = m.lu().solve(&b).ok_or_else(|| Error::Singular("linear mean-field system".into()))?;
    Ok(ClassicalField { amplitude: x.iter().copied().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, drive_mask, Boundary, DriveScheme, Geometry};

    #[test]
    fn vacuum_is_fixed_without_drive() {
        let g = build_lattice(Geometry::Cell3, 1, Boundary::Open).unwrap();
        let p = ModelParams::new(0.3, 5.0, 0.1, 0.0);
        let mask = DriveMask::zeros(3);
        assert!(norm(&gp_rhs(&g.adjacency(), &p, &mask, &[C64::new(0.0, 0.0); 3])) == 0.0);
        let f = gp_steady_state(&g, &p, &mask).unwrap();
        assert!(f.densities().iter().all(|&n| n == 0.0));
    }

    #[test]
    fn single_site_linear_fixed_point() {
        let g = build_lattice(Geometry::Cell3, 1, Boundary::Open).unwrap().induced(&[0]).0;
        for delta in [-1.0, 0.0, 0.7] {
            let p = ModelParams::new(delta, 0.0, 0.0, 0.4);
            let mask = drive_mask(&g, DriveScheme::Uniform, 0.4);
            let f = gp_steady_state(&g, &p, &mask).unwrap();
            let expected = 0.16 / (delta * delta + 0.25);
            assert!((f.densities()[0] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn u0_matches_linear_oracle() {
        for (geom, cells) in [(Geometry::Cell3, 1), (Geometry::Lieb1d, 3)] {
            let g = build_lattice(geom, cells, Boundary::Open).unwrap();
            let p = ModelParams::new(0.4, 2.0, 0.0, 0.3);
            let mask = drive_mask(&g, DriveScheme::Partial, 0.3);
            let f = gp_steady_state(&g, &p, &mask).unwrap();
            let lin = linear_field(&g, &p, &mask).unwrap();
            for (a, b) in f.amplitude.iter().zip(&lin.amplitude) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn cell3_dark_site_minimum_at_resonance() {
        let g = build_lattice(Geometry::Cell3, 1, Boundary::Open).unwrap();
        let mask = drive_mask(&g, DriveScheme::Partial, 1.0);
        let nb = |delta: f64| {
            let p = ModelParams::new(delta, 5.0, 0.0, 1.0);
            linear_field(&g, &p, &mask).unwrap().densities()[1]
        };
        let peak = 2f64.sqrt() * 5.0;
        assert!(nb(0.0) < nb(0.5) && nb(0.0) < nb(-0.5));
        assert!(nb(peak) > nb(peak - 0.3) && nb(peak) > nb(peak + 0.3));
    }
}
