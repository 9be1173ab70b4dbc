//! Exact steady states of the Lindblad equation in a truncated Fock space.
//!
//! The direct route solves the bordered system
//! `L(X) + |v><v| tr_w(X) = |v><v|` (`v` the vacuum, `tr_w` the trace) with
//! right-preconditioned GMRES; the preconditioner inverts the coherent part
//! `X -> -i (K X - X K^dag)` through a Schur-form Sylvester solve. The
//! evolve route integrates the master equation until `dρ/dt` vanishes and
//! serves as an independent cross-check.

use serde::{Deserialize, Serialize};

use crate::fock::{annihilators, FockBasis, Truncation};
use crate::lattice::{DriveMask, LatticeGraph, ModelParams};
use crate::linalg::{gmres, hermitian_eigen_desc, GmresOptions, SchurSylvester};
use crate::liouvillian::{build_displaced_hamiltonian, build_liouvillian, Lindbladian};
use crate::meanfield::gp_steady_state;
use crate::observables::{Normalization, ObservableSet, PhotonState};
use crate::ode::{integrate, OdeOptions};
use crate::sparse::SparseOperator;
use crate::{CMatrix, Error, Result, C64};

/// Largest eigen-decomposition performed for the positivity check.
const POSITIVITY_CHECK_MAX_DIM: usize = 2500;

/// Hermitian, unit-trace density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: CMatrix,
}

impl DensityMatrix {
    /// Wraps `rho`, checking hermiticity and trace to `1e-10`.
    pub fn new(rho: CMatrix) -> Result<Self> {
        let dm = DensityMatrix { rho };
        let herm = dm.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::NonHermitian(herm));
        }
        let tr = dm.rho.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::InvalidParams(format!("density matrix trace {tr}")));
        }
        Ok(dm)
    }

    /// Pure state `|psi><psi| / <psi|psi>`.
    pub fn pure(psi: &crate::CVector) -> Self {
        let n = psi.norm_squared();
        DensityMatrix { rho: psi * psi.adjoint() / C64::new(n, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).camax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen_desc(&self.rho).0.last().copied().unwrap_or(0.0)
    }
}

/// How a solve went.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `|L(rho)|_F / |rho|_F` in the solver's internal representation.
    pub residual: f64,
    /// Smallest eigenvalue of the internal representation relative to the
    /// largest (same sign pattern as the physical state); `None` if skipped.
    pub min_eigenvalue: Option<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub gmres: GmresOptions,
    /// Repeat the solve with a second anchor and compare.
    pub verify_unique: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { gmres: GmresOptions::default(), verify_unique: true }
    }
}

/// Steady state of a [`Lindbladian`].
#[derive(Debug, Clone)]
pub struct LindbladSolution {
    /// Internal (possibly number-scaled) representation, unit weighted trace.
    pub scaled: CMatrix,
    pub physical: DensityMatrix,
    pub report: SolveReport,
}

fn normalize(l: &Lindbladian, x: CMatrix) -> Result<CMatrix> {
    let x = (&x + x.adjoint()) * C64::new(0.5, 0.0);
    let tr = l.weighted_trace(&x);
    if tr.norm() < 1e-300 {
        return Err(Error::Singular("steady state has zero trace".into()));
    }
    Ok(x / tr)
}

fn bordered_solve(
    l: &Lindbladian,
    pre: &SchurSylvester,
    b: &CMatrix,
    opts: GmresOptions,
) -> Result<(CMatrix, usize)> {
    let d = l.dim();
    let w = l.trace_weights();
    let apply = |x: &CMatrix| {
        let mut out = l.apply(x);
        let tr = (0..d).map(|k| x[(k, k)] * w[k]).sum::<C64>();
        for (o, v) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
            *o += v * tr;
        }
        out
    };
    let (x, rep) = gmres(apply, |r| pre.solve(r), b, None, opts)?;
    Ok((x, rep.iterations))
}

fn finish(l: &Lindbladian, scaled: CMatrix, iterations: usize) -> Result<LindbladSolution> {
    let residual = l.apply(&scaled).norm() / scaled.norm();
    let min_eigenvalue = if l.dim() <= POSITIVITY_CHECK_MAX_DIM {
        let (vals, _) = hermitian_eigen_desc(&scaled);
        let top = vals[0].abs().max(f64::MIN_POSITIVE);
        Some(vals.last().copied().unwrap_or(0.0) / top)
    } else {
        None
    };
    if let Some(m) = min_eigenvalue {
        if m < -1e-8 {
            return Err(Error::NonConvergence { what: "steady state positivity".into(), residual: m });
        }
        if m < -1e-12 {
            log::warn!("steady state has a small negative eigenvalue {m:.3e}");
        }
    }
    let phys = l.to_physical(&scaled);
    let tr = phys.trace();
    let phys = (&phys + phys.adjoint()) * C64::new(0.5, 0.0) / tr;
    let sigma = l.scale().iter().copied().fold(1.0, f64::min);
    Ok(LindbladSolution {
        physical: DensityMatrix { rho: phys },
        scaled,
        report: SolveReport { iterations, residual, min_eigenvalue, sigma },
    })
}

/// Null vector of `L` via the bordered GMRES solve.
pub fn steady_state_direct(l: &Lindbladian, opts: &SolverOptions) -> Result<LindbladSolution> {
    let pre = SchurSylvester::new(&l.k().to_dense());
    let d = l.dim();
    let mut anchor = CMatrix::zeros(d, d);
    anchor[(l.reference(), l.reference())] = C64::new(1.0, 0.0);
    let (x, iters) = bordered_solve(l, &pre, &anchor, opts.gmres)?;
    let x = normalize(l, x)?;
    if opts.verify_unique && d > 1 {
        let spread = CMatrix::identity(d, d) / C64::new(d as f64, 0.0);
        let (y, _) = bordered_solve(l, &pre, &spread, opts.gmres)?;
        let y = normalize(l, y)?;
        let diff = (&x - &y).norm() / x.norm();
        if diff > 1e-6 {
            return Err(Error::DegenerateSteadyState(diff));
        }
    }
    finish(l, x, iters)
}

/// Integrates `d rho/dt = L(rho)` from the physical state `rho0` until
/// `|L(rho)|_F < tol` (internal representation, unit weighted trace).
pub fn steady_state_evolve(
    l: &Lindbladian,
    rho0: &CMatrix,
    t_max: f64,
    tol: f64,
) -> Result<LindbladSolution> {
    let start = l.from_physical(rho0);
    let mut stop = |_: f64, y: &CMatrix| l.apply(y).norm() < tol;
    let initial = l.apply(&start).norm();
    let opts = OdeOptions { rtol: 1e-10, atol: 1e-13, initial_step: 1e-3, max_step: 2.0, max_steps: 5_000_000 };
    let (y, stats) = if initial < tol {
        (start, crate::ode::OdeStats { accepted: 0, rejected: 0, t: 0.0 })
    } else {
        integrate(|_, x| l.apply(x), start, 0.0, t_max, opts, &mut stop)?
    };
    let final_res = l.apply(&y).norm();
    if final_res >= tol {
        return Err(Error::NonConvergence { what: "time evolution".into(), residual: final_res });
    }
    let y = normalize(l, y)?;
    finish(l, y, stats.accepted)
}

/// Coherent shift applied to every mode before truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DisplacementMode {
    #[default]
    None,
    /// Shift by the mean-field fixed point.
    MeanField,
    Explicit(Vec<C64>),
}

/// Photon-number scaling of the internal representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NumberScaling {
    Off,
    /// `sigma = min(1, 2 max|F|)` when undisplaced, else off.
    #[default]
    Auto,
    Fixed(f64),
}

/// Exact steady-state problem on a lattice.
#[derive(Debug, Clone)]
pub struct ExactProblem {
    pub graph: LatticeGraph,
    pub params: ModelParams,
    pub mask: DriveMask,
    pub truncation: Truncation,
    pub displacement: DisplacementMode,
    pub scaling: NumberScaling,
}

impl ExactProblem {
    pub fn new(graph: LatticeGraph, params: ModelParams, mask: DriveMask, truncation: Truncation) -> Self {
        ExactProblem {
            graph,
            params,
            mask,
            truncation,
            displacement: DisplacementMode::None,
            scaling: NumberScaling::Auto,
        }
    }

    pub fn with_displacement(mut self, d: DisplacementMode) -> Self {
        self.displacement = d;
        self
    }

    pub fn with_scaling(mut self, s: NumberScaling) -> Self {
        self.scaling = s;
        self
    }

    fn displacement_vector(&self) -> Result<Vec<C64>> {
        let n = self.graph.n_sites();
        Ok(match &self.displacement {
            DisplacementMode::None => vec![C64::new(0.0, 0.0); n],
            DisplacementMode::MeanField => gp_steady_state(&self.graph, &self.params, &self.mask)?.amplitude,
            DisplacementMode::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::InvalidParams("displacement length mismatch".into()));
                }
                v.clone()
            }
        })
    }

    fn sigma(&self, alpha: &[C64]) -> f64 {
        let displaced = alpha.iter().any(|a| a.norm() > 0.0);
        match self.scaling {
            NumberScaling::Off => 1.0,
            NumberScaling::Fixed(s) => s,
            NumberScaling::Auto if displaced => 1.0,
            NumberScaling::Auto => {
                let f = self.mask.max_abs();
                if f == 0.0 {
                    1.0
                } else {
                    (2.0 * f).min(1.0)
                }
            }
        }
    }

    /// Basis, displacement and generator of the problem.
    pub fn build(&self) -> Result<(FockBasis, Vec<C64>, Lindbladian)> {
        self.params.validate()?;
        let basis = FockBasis::new(self.graph.n_sites(), self.truncation)?;
        let alpha = self.displacement_vector()?;
        let h = build_displaced_hamiltonian(&self.graph, &self.params, &basis, &self.mask, &alpha)?;
        let mut l = build_liouvillian(&h, &basis, self.params.gamma)?;
        let sigma = self.sigma(&alpha);
        if sigma != 1.0 {
            let numbers: Vec<usize> = (0..basis.dim()).map(|k| basis.total_number(k)).collect();
            l = l.with_number_scaling(sigma, &numbers);
        }
        Ok((basis, alpha, l))
    }

    pub fn solve(&self) -> Result<SteadyState> {
        self.solve_with(&SolverOptions::default())
    }

    pub fn solve_with(&self, opts: &SolverOptions) -> Result<SteadyState> {
        let (basis, alpha, l) = self.build()?;
        let sol = steady_state_direct(&l, opts)?;
        Ok(SteadyState::new(basis, sol.physical, alpha, sol.report))
    }

    /// Time-integration route starting from the vacuum of the shifted modes.
    pub fn solve_evolve(&self, t_max: f64, tol: f64) -> Result<SteadyState> {
        let (basis, alpha, l) = self.build()?;
        let mut rho0 = CMatrix::zeros(basis.dim(), basis.dim());
        rho0[(basis.vacuum(), basis.vacuum())] = C64::new(1.0, 0.0);
        let sol = steady_state_evolve(&l, &rho0, t_max, tol)?;
        Ok(SteadyState::new(basis, sol.physical, alpha, sol.report))
    }
}

/// Steady state together with the operators needed to evaluate moments.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub basis: FockBasis,
    pub rho: DensityMatrix,
    pub displacement: Vec<C64>,
    pub report: SolveReport,
    modes: Vec<SparseOperator>,
}

impl SteadyState {
    pub fn new(basis: FockBasis, rho: DensityMatrix, displacement: Vec<C64>, report: SolveReport) -> Self {
        let modes = annihilators(&basis)
            .into_iter()
            .zip(&displacement)
            .map(|(a, &al)| if al == C64::new(0.0, 0.0) { a } else { a.add_identity(al) })
            .collect();
        SteadyState { basis, rho, displacement, report, modes }
    }

    /// `tr(O rho O^dag)` for a sparse `O`.
    pub fn sandwich(&self, o: &SparseOperator) -> f64 {
        let y = o.mul_dense(self.rho.matrix());
        o.triplets().map(|(i, j, v)| y[(i, j)] * v.conj()).sum::<C64>().re
    }

    /// Expectation value of an arbitrary operator.
    pub fn expect(&self, o: &SparseOperator) -> C64 {
        let y = o.mul_dense(self.rho.matrix());
        y.trace()
    }

    pub fn observables(&self, pairs: &[(usize, usize)], norm: Normalization) -> ObservableSet {
        ObservableSet::compute(self, pairs, norm)
    }
}

impl PhotonState for SteadyState {
    fn n_sites(&self) -> usize {
        self.basis.n_sites()
    }

    fn moment(&self, factors: &[(usize, u32)]) -> f64 {
        let mut o = SparseOperator::identity(self.basis.dim());
        for &(s, k) in factors {
            for _ in 0..k {
                o = &self.modes[s] * &o;
            }
        }
        self.sandwich(&o)
    }
}

/// Observables at one truncation of a cutoff scan.
#[derive(Debug, Clone, Serialize)]
pub struct CutoffRow {
    pub n_max: u32,
    pub dim: usize,
    pub observables: ObservableSet,
    pub report: SolveReport,
    /// Largest relative change of any density or local `g2` vs the previous row.
    pub max_rel_delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<CutoffRow>,
    /// Relative change at the top cutoff exceeds `0.1%`.
    pub drift_flag: bool,
    /// Successive changes did not shrink monotonically.
    pub non_monotone: bool,
    /// Smallest cutoff from which every later change stays below `0.1%`.
    pub converged_from: Option<u32>,
}

fn rel_delta(a: &ObservableSet, b: &ObservableSet) -> f64 {
    let mut worst: f64 = 0.0;
    let rel = |x: f64, y: f64| {
        let scale = x.abs().max(y.abs());
        if scale < 1e-14 {
            0.0
        } else {
            (x - y).abs() / scale
        }
    };
    for (x, y) in a.n.iter().zip(&b.n) {
        worst = worst.max(rel(*x, *y));
    }
    for (x, y) in a.g2_local.iter().zip(&b.g2_local) {
        if let (Some(x), Some(y)) = (x, y) {
            worst = worst.max(rel(*x, *y));
        }
    }
    worst
}

/// Solves `problem` at every cutoff in `n_max_list` and reports the drift.
/// Nonlocal correlations are evaluated for `pairs` on every row.
pub fn cutoff_convergence(
    problem: &ExactProblem,
    n_max_list: &[u32],
    pairs: &[(usize, usize)],
    norm: Normalization,
) -> Result<ConvergenceReport> {
    if n_max_list.len() < 2 {
        return Err(Error::InvalidParams("cutoff scan needs at least two cutoffs".into()));
    }
    let mut rows: Vec<CutoffRow> = Vec::new();
    for &n in n_max_list {
        let mut p = problem.clone();
        p.truncation = problem.truncation.with_n_max(n);
        let st = p.solve()?;
        let obs = st.observables(pairs, norm);
        let delta = rows.last().map(|r| rel_delta(&r.observables, &obs));
        rows.push(CutoffRow { n_max: n, dim: st.basis.dim(), observables: obs, report: st.report, max_rel_delta: delta });
    }
    let deltas: Vec<f64> = rows.iter().filter_map(|r| r.max_rel_delta).collect();
    let drift_flag = deltas.last().is_some_and(|&d| d > 1e-3);
    let non_monotone = deltas.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-9) && w[1] > 1e-12);
    let mut converged_from = None;
    for (k, row) in rows.iter().enumerate().rev() {
        if k == 0 {
            break;
        }
        if row.max_rel_delta.is_some_and(|d| d <= 1e-3) {
            converged_from = Some(rows[k - 1].n_max);
        } else {
            break;
        }
    }
    Ok(ConvergenceReport { rows, drift_flag, non_monotone, converged_from })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, drive_mask, Boundary, DriveScheme, Geometry};
    use crate::observables::{density, g2_local};

    fn single_site(delta: f64, u: f64, f: f64, n_max: u32) -> ExactProblem {
        let g = build_lattice(Geometry::Cell3, 1, Boundary::Open).unwrap().induced(&[0]).0;
        let mask = drive_mask(&g, DriveScheme::Uniform, f);
        ExactProblem::new(g, ModelParams::new(delta, 0.0, u, f), mask, Truncation::PerSite(n_max))
    }

    #[test]
    fn undriven_state_is_vacuum() {
        let st = single_site(0.3, 0.5, 0.0, 4).solve().unwrap();
        assert!((st.rho.matrix()[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(density(&st, 0), 0.0);
    }

    #[test]
    fn linear_cavity_is_coherent() {
        let st = single_site(0.5, 0.0, 0.2, 10).solve().unwrap();
        let expected = 0.04 / (0.25 + 0.25);
        assert!((density(&st, 0) - expected).abs() < 1e-10);
        assert!((g2_local(&st, 0).unwrap() - 1.0).abs() < 1e-6);
        assert!(st.report.residual < 1e-10);
    }

    #[test]
    fn evolve_matches_direct_single_site() {
        let p = single_site(0.2, 1.0, 0.3, 6);
        let a = p.solve().unwrap();
        let b = p.solve_evolve(500.0, 1e-9).unwrap();
        assert!((density(&a, 0) - density(&b, 0)).abs() < 1e-8);
    }

    #[test]
    fn one_photon_decays_to_vacuum() {
        let p = single_site(0.0, 0.0, 0.0, 3);
        let (_, _, l) = p.build().unwrap();
        let mut rho0 = CMatrix::zeros(4, 4);
        rho0[(1, 1)] = C64::new(1.0, 0.0);
        let mut worst: f64 = 0.0;
        let opts = OdeOptions::default();
        let (y, _) = integrate(|_, x| l.apply(x), rho0, 0.0, 40.0, opts, |_, y| {
            worst = worst.max((y.trace() - C64::new(1.0, 0.0)).norm());
            false
        })
        .unwrap();
        assert!(worst < 1e-10);
        assert!((y[(0, 0)].re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_null_space_is_reported() {
        // Two decoupled modes, only one of them lossy: any photon number in
        // the lossless mode is stationary.
        let basis = FockBasis::new(2, Truncation::PerSite(1)).unwrap();
        let a = annihilators(&basis);
        let h = SparseOperator::zeros(basis.dim());
        let l = Lindbladian::from_parts(&h, vec![a[0].clone()]).unwrap();
        let err = steady_state_direct(&l, &SolverOptions::default());
        assert!(matches!(err, Err(Error::DegenerateSteadyState(_)) | Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn number_scaling_is_transparent() {
        let g = build_lattice(Geometry::Cell3, 1, Boundary::Open).unwrap();
        let mask = drive_mask(&g, DriveScheme::Partial, 0.05);
        let base = ExactProblem::new(g, ModelParams::new(0.0, 1.0, 0.5, 0.05), mask, Truncation::TotalNumber(4));
        let a = base.clone().with_scaling(NumberScaling::Off).solve().unwrap();
        let b = base.with_scaling(NumberScaling::Fixed(0.1)).solve().unwrap();
        for s in 0..3 {
            let (x, y) = (density(&a, s), density(&b, s));
            assert!((x - y).abs() < 1e-9 * x.max(1e-6));
            let (x, y) = (g2_local(&a, s).unwrap(), g2_local(&b, s).unwrap());
            assert!((x - y).abs() < 1e-6 * x);
        }
    }

    #[test]
    fn displacement_is_transparent_at_convergence() {
        let g = build_lattice(Geometry::Cell3, 1, Boundary::Open).unwrap();
        let mask = drive_mask(&g, DriveScheme::Partial, 0.6);
        let base = ExactProblem::new(g, ModelParams::new(0.3, 1.0, 0.4, 0.6), mask, Truncation::TotalNumber(9));
        let a = base.clone().solve().unwrap();
        let b = base.with_displacement(DisplacementMode::MeanField).solve().unwrap();
        for s in 0..3 {
            let (x, y) = (density(&a, s), density(&b, s));
            assert!((x - y).abs() < 1e-4 * x, "{x} vs {y}");
        }
    }

    #[test]
    fn cutoff_scan_of_vacuum_is_flat() {
        let rep = cutoff_convergence(&single_site(0.0, 1.0, 0.0, 2), &[2, 3, 4], &[], Normalization::FirstSite).unwrap();
        assert!(!rep.drift_flag);
        assert_eq!(rep.converged_from, Some(2));
        assert!(rep.rows.iter().all(|r| r.observables.n[0] == 0.0));
    }
}
