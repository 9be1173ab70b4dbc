//! Acceptance checks. Every check solves what it needs, compares against its
//! stated tolerance and reports one line. Failures are reported, not hidden.

use rayon::prelude::*;

use crate::corner::{corner_m_sweep, corner_steady_state, CornerOptions};
use crate::fock::{FockBasis, Truncation};
use crate::lattice::{build_lattice, drive_mask, Boundary, DriveScheme, Geometry, LatticeGraph, ModelParams, SiteRole};
use crate::liouvillian::{build_hamiltonian, build_liouvillian};
use crate::meanfield::{gp_steady_state, linear_field, ClassicalField};
use crate::observables::{density, g2_local, g2_nonlocal, Normalization, ObservableSet, PhotonState};
use crate::spectra::{
    eigenspace, manifold_probabilities, max_role_weight, reference_basis_cell3, reference_states_cell3,
    single_particle_hamiltonian, two_photon_hamiltonian_cell3, two_photon_spectrum_cell3, EigenSolution,
};
use crate::steady::{
    cutoff_convergence, steady_state_direct, DisplacementMode, ExactProblem, SolverOptions, SteadyState,
};
use crate::weakpump::{weak_pump_observables, weak_pump_state};
use crate::{CMatrix, Result, C64};

/// Verdict of one check.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

pub struct Criterion {
    pub name: &'static str,
    pub check: fn() -> Result<(bool, String)>,
}

pub const CRITERIA: &[Criterion] = &[
    Criterion { name: "single-particle anchors", check: single_particle_anchors },
    Criterion { name: "two-photon anchors", check: two_photon_anchors },
    Criterion { name: "solver oracle triangle at U=0", check: oracle_triangle },
    Criterion { name: "cell3 dark-site density vs detuning", check: dark_density_anomaly },
    Criterion { name: "cell3 bunching anchors", check: bunching_anchors },
    Criterion { name: "weak-pump vs exact", check: weak_pump_consistency },
    Criterion { name: "two-photon manifold populations", check: manifold_populations },
    Criterion { name: "corner vs exact", check: corner_exactness },
    Criterion { name: "open 14-site chain dark sites", check: open_chain_table },
    Criterion { name: "4-cell ordering in J", check: hopping_ordering },
    Criterion { name: "nonlocal correlations vs distance", check: nonlocal_vs_distance },
    Criterion { name: "hard-core trend", check: hard_core_trend },
];

pub fn evaluate(c: &Criterion) -> Outcome {
    match (c.check)() {
        Ok((passed, detail)) => Outcome { name: c.name, passed, detail },
        Err(e) => Outcome { name: c.name, passed: false, detail: format!("error: {e}") },
    }
}

pub fn run_all() -> Vec<Outcome> {
    CRITERIA.iter().map(evaluate).collect()
}

fn rel(x: f64, target: f64) -> f64 {
    (x - target).abs() / target.abs()
}

fn cell3() -> Result<LatticeGraph> {
    build_lattice(Geometry::Cell3, 1, Boundary::Open)
}

/// Flat-band diagnostics of a single-particle Hamiltonian.
#[derive(Debug, Clone, Copy)]
pub struct FlatBandReport {
    pub zero_modes: usize,
    /// Largest projector weight of the zero-energy space on a `B` site.
    pub b_weight: f64,
    /// `max |H - H^dag|`.
    pub hermiticity: f64,
    /// Largest eigen-residual `|H v - E v|`.
    pub residual: f64,
}

impl FlatBandReport {
    pub fn holds(&self, expected_zeros: usize) -> bool {
        self.zero_modes == expected_zeros && self.b_weight < 1e-10 && self.hermiticity < 1e-12 && self.residual < 1e-10
    }
}

pub fn flat_band_report(graph: &LatticeGraph, h: &CMatrix) -> FlatBandReport {
    let sol = EigenSolution::from_hermitian(1, h, Vec::new());
    let zero_modes = sol.energies.iter().filter(|e| e.abs() < 1e-10).count();
    let b_weight = max_role_weight(graph, &eigenspace(&sol, 0.0, 1e-8), SiteRole::B);
    let (residual, _) = sol.residuals(h);
    FlatBandReport { zero_modes, b_weight, hermiticity: (h - h.adjoint()).camax(), residual }
}

fn single_particle_anchors() -> Result<(bool, String)> {
    let g = cell3()?;
    let mut worst: f64 = 0.0;
    for j in [0.5, 1.0, 5.0] {
        let h = single_particle_hamiltonian(&g, j, 0.0);
        let sol = EigenSolution::from_hermitian(1, &h, Vec::new());
        let r2 = 2f64.sqrt() * j;
        for (e, x) in sol.energies.iter().zip([-r2, 0.0, r2]) {
            worst = worst.max((e - x).abs());
        }
        worst = worst.max(sol.residuals(&h).0);
    }
    let chain = build_lattice(Geometry::Lieb1d, 12, Boundary::Periodic)?;
    let rep = flat_band_report(&chain, &single_particle_hamiltonian(&chain, 1.0, 0.0));
    let ok = worst < 1e-10 && rep.holds(12);
    Ok((
        ok,
        format!(
            "cell3 max level error {worst:.1e} (tol 1e-10); periodic N=12 chain: {} zero modes (want 12), B weight {:.1e} (tol 1e-10)",
            rep.zero_modes, rep.b_weight
        ),
    ))
}

fn two_photon_anchors() -> Result<(bool, String)> {
    let (psi1, _) = reference_states_cell3()?;
    let mut worst: f64 = 0.0;
    for u in [0.01, 0.1, 1.0, 10.0, 100.0] {
        for j in [0.5, 1.0, 5.0] {
            let (h, _) = two_photon_hamiltonian_cell3(j, u)?;
            worst = worst.max((&h * &psi1 - &psi1 * C64::new(u, 0.0)).norm());
        }
    }
    let mut errs = Vec::new();
    for ratio in [0.2, 0.1, 0.05, 0.02] {
        let sol = two_photon_spectrum_cell3(1.0, ratio)?;
        // The pair level next to zero that is not the exact level at U.
        let e2 = sol
            .energies
            .iter()
            .copied()
            .filter(|e| (e - ratio).abs() > 1e-9 && e.abs() < 0.5)
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(f64::NAN);
        errs.push((ratio, (e2 - ratio / 4.0).abs() / ratio));
    }
    let last = errs.last().map_or(f64::NAN, |e| e.1);
    let decreasing = errs.windows(2).all(|w| w[1].1 < w[0].1);
    let ok = worst < 1e-12 && last < 0.05 && decreasing;
    let trail: Vec<String> = errs.iter().map(|(r, e)| format!("{r}:{e:.2e}")).collect();
    Ok((
        ok,
        format!(
            "max |H Psi1 - U Psi1| {worst:.1e} (tol 1e-12); |E2 - U/4|/U by U/J [{}] (want < 5% at 0.02, decreasing)",
            trail.join(", ")
        ),
    ))
}

struct OracleCase {
    graph: LatticeGraph,
    params: ModelParams,
    scheme: DriveScheme,
    n_max: u32,
}

fn oracle_triangle() -> Result<(bool, String)> {
    let cases = [
        OracleCase { graph: cell3()?, params: ModelParams::new(0.3, 1.0, 0.0, 0.5), scheme: DriveScheme::Partial, n_max: 10 },
        OracleCase {
            graph: build_lattice(Geometry::Lieb1d, 2, Boundary::Open)?,
            params: ModelParams::new(-0.2, 1.0, 0.0, 0.05),
            scheme: DriveScheme::Uniform,
            n_max: 6,
        },
    ];
    let (mut dn, mut dg) = (0f64, 0f64);
    for c in &cases {
        let mask = drive_mask(&c.graph, c.scheme, c.params.drive);
        let exact = ExactProblem::new(c.graph.clone(), c.params, mask.clone(), Truncation::TotalNumber(c.n_max)).solve()?;
        let coherent = linear_field(&c.graph, &c.params, &mask)?;
        let gp = gp_steady_state(&c.graph, &c.params, &mask)?;
        for s in 0..c.graph.n_sites() {
            let n0 = density(&coherent, s);
            dn = dn.max((density(&exact, s) - n0).abs()).max((density(&gp, s) - n0).abs());
            for g in [g2_local(&exact, s), g2_local(&coherent, s), g2_local(&gp, s)].into_iter().flatten() {
                dg = dg.max((g - 1.0).abs());
            }
        }
    }
    Ok((
        dn < 1e-8 && dg < 1e-6,
        format!("cell3 and 5-site chain: max density gap {dn:.1e} (tol 1e-8), max |g2 - 1| {dg:.1e} (tol 1e-6)"),
    ))
}

/// Exact cell3 state displaced by the mean field, total-number cutoff `n_max`.
fn cell3_exact(p: ModelParams, n_max: u32) -> Result<SteadyState> {
    let g = cell3()?;
    let mask = drive_mask(&g, DriveScheme::Partial, p.drive);
    ExactProblem::new(g, p, mask, Truncation::TotalNumber(n_max))
        .with_displacement(DisplacementMode::MeanField)
        .solve()
}

fn cell3_meanfield(p: ModelParams) -> Result<ClassicalField> {
    let g = cell3()?;
    gp_steady_state(&g, &p, &drive_mask(&g, DriveScheme::Partial, p.drive))
}

/// Vertex of the parabola through the three grid points around the maximum.
fn refined_peak(xs: &[f64], ys: &[f64]) -> f64 {
    let k = (0..ys.len()).max_by(|&a, &b| ys[a].total_cmp(&ys[b])).unwrap_or(0);
    if k == 0 || k + 1 == ys.len() {
        return xs[k];
    }
    let (x0, x1, x2) = (xs[k - 1], xs[k], xs[k + 1]);
    let (y0, y1, y2) = (ys[k - 1], ys[k], ys[k + 1]);
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den.abs() < 1e-300 {
        x1
    } else {
        x1 - 0.5 * num / den
    }
}

/// Position of an interior extremum of `ys` (maximum when `sign > 0`),
/// refined by a parabola, or `None` if it sits on the grid edge.
fn interior_extremum(xs: &[f64], ys: &[f64], sign: f64) -> Option<f64> {
    let s: Vec<f64> = ys.iter().map(|y| sign * y).collect();
    let k = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b]))?;
    (k > 0 && k + 1 < s.len()).then(|| refined_peak(xs, &s))
}

fn dark_density_anomaly() -> Result<(bool, String)> {
    let (j, u, f) = (5.0, 0.1, 1.0);
    let at = |d: f64| ModelParams::new(d, j, u, f);
    let centre = [-0.6, -0.4, -0.2, -0.1, 0.0, 0.1, 0.2, 0.4, 0.6];
    let exact_c: Vec<f64> = centre
        .par_iter()
        .map(|&d| cell3_exact(at(d), 8).map(|s| density(&s, 1)))
        .collect::<Result<_>>()?;
    let mf_c: Vec<f64> = centre
        .iter()
        .map(|&d| cell3_meanfield(at(d)).map(|s| density(&s, 1)))
        .collect::<Result<_>>()?;
    // "Around zero" means within half a linewidth.
    let exact_max = interior_extremum(&centre, &exact_c, 1.0);
    let mf_min = interior_extremum(&centre, &mf_c, -1.0);
    let near = |x: Option<f64>| x.is_some_and(|x| x.abs() < 0.5);
    let centre_ok = near(exact_max) && near(mf_min);
    let mid = centre.len() / 2;

    let r2 = 2f64.sqrt() * j;
    let offsets: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.1).collect();
    let mut peaks = Vec::new();
    for sign in [-1.0, 1.0] {
        let xs: Vec<f64> = offsets.iter().map(|o| sign * r2 + o).collect();
        let ex: Vec<f64> = xs
            .par_iter()
            .map(|&d| cell3_exact(at(d), 8).map(|s| density(&s, 1)))
            .collect::<Result<_>>()?;
        let mf: Vec<f64> = xs
            .iter()
            .map(|&d| cell3_meanfield(at(d)).map(|s| density(&s, 1)))
            .collect::<Result<_>>()?;
        peaks.push(("exact", sign, refined_peak(&xs, &ex) - sign * r2));
        peaks.push(("meanfield", sign, refined_peak(&xs, &mf) - sign * r2));
    }
    let resonant = peaks.iter().all(|p| p.2.abs() <= 0.1);
    let shown: Vec<String> = peaks
        .iter()
        .map(|(who, s, d)| format!("{who} {}sqrt2J{d:+.3}", if *s < 0.0 { "-" } else { "+" }))
        .collect();
    let show = |x: Option<f64>| x.map_or("none".to_string(), |x| format!("{x:+.3}"));
    Ok((
        centre_ok && resonant,
        format!(
            "n_b(0) exact {:.5} with local max at Delta {}, meanfield {:.5} with local min at {} (tol |Delta| < 0.5); resonance offsets [{}] (tol 0.1)",
            exact_c[mid],
            show(exact_max),
            mf_c[mid],
            show(mf_min),
            shown.join(", ")
        ),
    ))
}

fn bunching_anchors() -> Result<(bool, String)> {
    let weak = cell3_exact(ModelParams::new(0.0, 5.0, 0.1, 1.0), 8)?;
    let g_weak = g2_local(&weak, 1).unwrap_or(f64::NAN);
    let g = cell3()?;
    let p = ModelParams::new(0.0, 5.0, 0.1, 3.0);
    let problem = ExactProblem::new(g.clone(), p, drive_mask(&g, DriveScheme::Partial, 3.0), Truncation::TotalNumber(10))
        .with_displacement(DisplacementMode::MeanField);
    let scan = cutoff_convergence(&problem, &[8, 9, 10], &[], Normalization::FirstSite)?;
    let top = &scan.rows.last().expect("scan has rows").observables;
    let (n_b, g_b) = (top.n[1], top.g2_local[1].unwrap_or(f64::NAN));
    let ok_weak = (5.0..=20.0).contains(&g_weak);
    let ok_g = rel(g_b, 2.0) <= 0.3;
    let ok_n = rel(n_b, 0.1) <= 0.3;
    Ok((
        ok_weak && ok_g && ok_n && !scan.drift_flag,
        format!(
            "F=1: g2_b {g_weak:.3} (want [5, 20]); F=3: g2_b {g_b:.4} (want 2 +-30%), n_b {n_b:.4} (want 0.1 +-30%), cutoff drift {:.1e} (flag {})",
            scan.rows.last().and_then(|r| r.max_rel_delta).unwrap_or(f64::NAN),
            scan.drift_flag
        ),
    ))
}

fn weak_pump_consistency() -> Result<(bool, String)> {
    let g = cell3()?;
    let f = 1e-3;
    let deltas: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.25).collect();
    let rows: Vec<(f64, f64)> = deltas
        .par_iter()
        .map(|&d| {
            let p = ModelParams::new(d, 5.0, 0.1, f);
            let mask = drive_mask(&g, DriveScheme::Partial, f);
            let exact = ExactProblem::new(g.clone(), p, mask.clone(), Truncation::TotalNumber(4)).solve()?;
            let exp = weak_pump_state(&g, &p, &mask, 3)?;
            let wp = weak_pump_observables(&exp, 2, &[], Normalization::FirstSite)?;
            Ok((g2_local(&exact, 1).unwrap_or(f64::NAN), wp.set.g2_local[1].unwrap_or(f64::NAN)))
        })
        .collect::<Result<_>>()?;
    let worst = rows.iter().map(|(e, w)| rel(*w, *e)).fold(0.0, f64::max);
    Ok((
        worst < 0.01,
        format!(
            "F=1e-3, Delta in [-1, 1] ({} points): max relative g2_b gap {worst:.1e} (tol 1e-2), g2_b(0) = {:.3}",
            rows.len(),
            rows[rows.len() / 2].0
        ),
    ))
}

fn manifold_populations() -> Result<(bool, String)> {
    let g = cell3()?;
    let p = ModelParams::new(0.0, 5.0, 0.1, 1e-3);
    let exp = weak_pump_state(&g, &p, &drive_mask(&g, DriveScheme::Partial, p.drive), 2)?;
    let basis = reference_basis_cell3(p.hopping)?;
    let probs = manifold_probabilities(&exp.amplitudes_on(2, &basis.basis)?, &basis)?;
    let reference = probs[0] + probs[1];
    let others: f64 = probs[2..].iter().sum();
    Ok((
        reference > others,
        format!("P1 + P2 = {reference:.4} vs other four {others:.4} (P = {probs:.3?})"),
    ))
}

/// Exact solve in the product of per-cell total-number truncated spaces,
/// the space a corner run spans once `M` reaches the full dimension.
fn product_basis_state(graph: &LatticeGraph, p: &ModelParams, leaf: u32) -> Result<SteadyState> {
    let groups = crate::corner::cell_groups(graph);
    let cell = FockBasis::new(groups[0].len(), Truncation::TotalNumber(leaf))?;
    let mut states: Vec<Vec<u8>> = vec![vec![0; graph.n_sites()]];
    for group in &groups {
        let mut next = Vec::with_capacity(states.len() * cell.dim());
        for s in &states {
            for k in 0..cell.dim() {
                let mut o = s.clone();
                for (local, &site) in group.iter().enumerate() {
                    o[site] = cell.occupation(k)[local];
                }
                next.push(o);
            }
        }
        states = next;
    }
    let basis = FockBasis::from_states(graph.n_sites(), states)?;
    let mask = drive_mask(graph, DriveScheme::Partial, p.drive);
    let h = build_hamiltonian(graph, p, &basis, &mask)?;
    let l = build_liouvillian(&h, &basis, p.gamma)?;
    let sol = steady_state_direct(&l, &SolverOptions::default())?;
    Ok(SteadyState::new(basis, sol.physical, vec![C64::new(0.0, 0.0); graph.n_sites()], sol.report))
}

fn corner_exactness() -> Result<(bool, String)> {
    let g = build_lattice(Geometry::Lieb1d, 2, Boundary::Periodic)?;
    let (a, b) = (g.sites_with_role(SiteRole::A)[0], g.sites_with_role(SiteRole::B)[0]);
    let m_list = [50, 100, 200, 400];
    let mut ok = true;
    let mut parts = Vec::new();
    for j in [1.0, 2.0] {
        let p = ModelParams::new(0.0, j, 0.3, 0.1);
        let mask = drive_mask(&g, DriveScheme::Partial, p.drive);
        let exact = ExactProblem::new(g.clone(), p, mask.clone(), Truncation::TotalNumber(4)).solve()?;
        let (ratio_x, g_x) = (density(&exact, b) / density(&exact, a), g2_local(&exact, b).unwrap_or(f64::NAN));
        let product = product_basis_state(&g, &p, 3)?;
        let (ratio_p, g_p) = (density(&product, b) / density(&product, a), g2_local(&product, b).unwrap_or(f64::NAN));
        let opts = CornerOptions { leaf_truncation: 3, ..Default::default() };
        let scan = corner_m_sweep(&g, &p, &mask, &opts, &m_list, Normalization::FirstSite)?;
        let errs: Vec<f64> = scan
            .rows
            .iter()
            .map(|r| {
                let ratio = r.observables.n[b] / r.observables.n[a];
                rel(ratio, ratio_x).max(rel(r.observables.g2_local[b].unwrap_or(f64::NAN), g_x))
            })
            .collect();
        let full = scan.rows.last().expect("scan has rows");
        let full_gap = rel(full.observables.n[b] / full.observables.n[a], ratio_p)
            .max(rel(full.observables.g2_local[b].unwrap_or(f64::NAN), g_p));
        let converges = errs.last().is_some_and(|&e| e < 0.01);
        ok &= converges && full_gap < 1e-8 && full.m_used == 400;
        let shown: Vec<String> = m_list.iter().zip(&errs).map(|(m, e)| format!("{m}:{e:.1e}")).collect();
        parts.push(format!(
            "J={j}: gap to exact by M [{}], M=full ({}) vs product-basis exact {full_gap:.1e}",
            shown.join(", "),
            full.m_used
        ));
    }
    Ok((ok, format!("{} (tol 1e-2 and 1e-8)", parts.join("; "))))
}

fn open_chain_table() -> Result<(bool, String)> {
    let g = build_lattice(Geometry::Lieb1d, 5, Boundary::Open)?;
    let p = ModelParams::new(0.0, 2.0, 0.3, 0.1);
    let mask = drive_mask(&g, DriveScheme::Partial, p.drive);
    let dark = g.sites_with_role(SiteRole::B);
    let targets = [("n1/nbar", 0.01514), ("g2_1", 15.42), ("g2_2", 3940.0), ("g2_3", 111.4)];

    let opts = CornerOptions { leaf_truncation: 3, m: 200, ..Default::default() };
    let corner = corner_steady_state(&g, &p, &mask, &opts)?;
    let obs = ObservableSet::compute(&corner.state, &[], Normalization::FirstSite);
    let (_, n_bar) = obs.brightest();
    let g2 = |s: usize| obs.g2_local[s].unwrap_or(f64::NAN);
    let got = [obs.n[dark[0]] / n_bar, g2(dark[0]), g2(dark[1]), g2(dark[2])];
    let errs: Vec<f64> = got.iter().zip(&targets).map(|(x, t)| rel(*x, t.1)).collect();
    let values_ok = errs.iter().all(|&e| e <= 0.2);

    // Mirror symmetry is exact for a symmetric solver; the expansion is one.
    let exp = weak_pump_state(&g, &p, &mask, 3)?;
    let wp = weak_pump_observables(&exp, 3, &[], Normalization::FirstSite)?.set;
    let sym = rel(wp.n[dark[0]], wp.n[dark[4]]).max(rel(
        wp.g2_local[dark[1]].unwrap_or(f64::NAN),
        wp.g2_local[dark[3]].unwrap_or(f64::NAN),
    ));
    let corner_sym = rel(obs.n[dark[0]], obs.n[dark[4]]).max(rel(g2(dark[1]), g2(dark[3])));
    let wp_g2 = wp.g2_local[dark[1]].unwrap_or(f64::NAN);
    let shown: Vec<String> = targets
        .iter()
        .zip(got.iter().zip(&errs))
        .map(|(t, (x, e))| format!("{} {x:.5} ({:+.1}%)", t.0, 100.0 * e * (x - t.1).signum()))
        .collect();
    Ok((
        values_ok && sym < 1e-9,
        format!(
            "corner M=200: {} (tol 20%); weak-pump mirror gap {sym:.1e} (tol 1e-9), corner mirror gap {corner_sym:.1e}; weak-pump g2_2 {wp_g2:.0}",
            shown.join(", ")
        ),
    ))
}

/// Exact state of the 4-cell periodic chain in a total-number cutoff of 3.
fn four_cell(j: f64, scheme: DriveScheme) -> Result<(LatticeGraph, SteadyState)> {
    let g = build_lattice(Geometry::Lieb1d, 4, Boundary::Periodic)?;
    let p = ModelParams::new(0.0, j, 0.3, 0.1);
    let mask = drive_mask(&g, scheme, p.drive);
    let st = ExactProblem::new(g.clone(), p, mask, Truncation::TotalNumber(3)).solve()?;
    Ok((g, st))
}

fn hopping_ordering() -> Result<(bool, String)> {
    let mut rows = Vec::new();
    for j in [1.0, 2.0] {
        let (g, st) = four_cell(j, DriveScheme::Partial)?;
        let (a, b) = (g.sites_with_role(SiteRole::A)[0], g.sites_with_role(SiteRole::B)[0]);
        rows.push((density(&st, b) / density(&st, a), g2_local(&st, b).unwrap_or(f64::NAN)));
    }
    let ok = rows[1].1 > rows[0].1 && rows[1].0 < rows[0].0;
    Ok((
        ok,
        format!(
            "J=1: n_b/n_a {:.4}, g2_b {:.2}; J=2: n_b/n_a {:.4}, g2_b {:.1}",
            rows[0].0, rows[0].1, rows[1].0, rows[1].1
        ),
    ))
}

/// `g2_{i,j}` between the first dark site and the dark site `d` cells away.
fn dark_profile(g: &LatticeGraph, st: &dyn PhotonState) -> Vec<f64> {
    let dark = g.sites_with_role(SiteRole::B);
    (0..=dark.len() / 2)
        .map(|d| g2_nonlocal(st, dark[0], dark[d], Normalization::FirstSite).unwrap_or(f64::NAN))
        .collect()
}

fn nonlocal_vs_distance() -> Result<(bool, String)> {
    let (g, partial) = four_cell(2.0, DriveScheme::Partial)?;
    let (_, uniform) = four_cell(2.0, DriveScheme::Uniform)?;
    let p = dark_profile(&g, &partial);
    let u = dark_profile(&g, &uniform);
    let decreasing = p.windows(2).all(|w| w[1] < w[0]) && p.iter().all(|&x| x >= 1.0 - 0.1);
    let flat = u.iter().all(|&x| (x - 1.0).abs() < 0.1);
    Ok((
        decreasing && flat,
        format!(
            "4-cell periodic, J=2: partial g2_ij by |i-j| {p:.3?} (want decreasing toward 1); uniform {u:.3?} (want |g - 1| < 0.1)"
        ),
    ))
}

fn hard_core_trend() -> Result<(bool, String)> {
    let g = cell3()?;
    let gs: Vec<f64> = [10.0, 100.0]
        .iter()
        .map(|&u| {
            let p = ModelParams::new(0.0, 5.0, u, 0.1);
            let st = ExactProblem::new(g.clone(), p, drive_mask(&g, DriveScheme::Partial, p.drive), Truncation::TotalNumber(6)).solve()?;
            Ok(g2_local(&st, 1).unwrap_or(f64::NAN))
        })
        .collect::<Result<_>>()?;
    Ok((
        gs[1] < 0.5 && gs[1] < gs[0],
        format!("F=0.1: g2_b(U=10) {:.3}, g2_b(U=100) {:.3} (want < 0.5 and decreasing)", gs[0], gs[1]),
    ))
}
