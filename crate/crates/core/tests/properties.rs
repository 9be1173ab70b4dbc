use proptest::prelude::*;

use darksite::acceptance::flat_band_report;
use darksite::corner::select_pairs;
use darksite::fock::Truncation;
use darksite::lattice::{build_lattice, drive_mask, Boundary, DriveScheme, Geometry, ModelParams};
use darksite::meanfield::{gp_steady_state, linear_field};
use darksite::observables::{density, g2_local, Normalization};
use darksite::spectra::single_particle_hamiltonian;
use darksite::steady::{cutoff_convergence, DisplacementMode, ExactProblem};
use darksite::weakpump::weak_pump_state;
use darksite::C64;

fn cell3() -> darksite::lattice::LatticeGraph {
    build_lattice(Geometry::Cell3, 1, Boundary::Open).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The flat band survives any hopping signs and magnitudes: it is fixed
    /// by the sublattice imbalance, not by fine tuning.
    #[test]
    fn flat_band_is_protected(cells in 2usize..7, hops in prop::collection::vec(0.2f64..3.0, 40), signs in prop::collection::vec(any::<bool>(), 40)) {
        let g = build_lattice(Geometry::Lieb1d, cells, Boundary::Periodic).unwrap();
        let mut h = single_particle_hamiltonian(&g, 0.0, 0.0);
        for (k, e) in g.edges.iter().enumerate() {
            let t = if signs[k % 40] { hops[k % 40] } else { -hops[k % 40] };
            h[(e.i, e.j)] = C64::new(t, 0.0);
            h[(e.j, e.i)] = C64::new(t, 0.0);
        }
        let rep = flat_band_report(&g, &h);
        prop_assert!(rep.zero_modes >= cells);
        prop_assert!(rep.b_weight < 1e-9);
    }

    /// Exact steady states are Hermitian, unit trace and positive.
    #[test]
    fn exact_state_is_physical(delta in -3.0f64..3.0, j in 0.0f64..3.0, u in 0.0f64..2.0, f in 0.01f64..0.6) {
        let g = cell3();
        let p = ModelParams::new(delta, j, u, f);
        let st = ExactProblem::new(g.clone(), p, drive_mask(&g, DriveScheme::Partial, f), Truncation::TotalNumber(5)).solve().unwrap();
        let rho = st.rho.matrix();
        prop_assert!(st.rho.hermiticity_error() < 1e-10);
        prop_assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-10);
        prop_assert!(st.rho.min_eigenvalue() > -1e-8);
        prop_assert!(st.report.residual < 1e-9);
    }

    /// At U = 0 the steady state is a product of coherent states.
    #[test]
    fn linear_lattice_matches_coherent_state(delta in -2.0f64..2.0, j in 0.1f64..2.0, f in 0.02f64..0.2) {
        let g = cell3();
        let p = ModelParams::new(delta, j, 0.0, f);
        let mask = drive_mask(&g, DriveScheme::Uniform, f);
        let lin = linear_field(&g, &p, &mask).unwrap();
        let gp = gp_steady_state(&g, &p, &mask).unwrap();
        let st = ExactProblem::new(g.clone(), p, mask, Truncation::TotalNumber(9)).solve().unwrap();
        for s in 0..3 {
            let n = density(&lin, s);
            prop_assert!((density(&gp, s) - n).abs() < 1e-9 * n.max(1.0));
            prop_assert!((density(&st, s) - n).abs() < 1e-7 * n.max(1e-3));
            if let Some(g2) = g2_local(&st, s) {
                prop_assert!((g2 - 1.0).abs() < 1e-5);
            }
        }
    }

    /// Displacement changes the representation, not the physics.
    #[test]
    fn displacement_is_a_change_of_frame(delta in -1.0f64..1.0, u in 0.05f64..0.5, f in 0.1f64..0.5) {
        let g = cell3();
        let p = ModelParams::new(delta, 1.0, u, f);
        let mask = drive_mask(&g, DriveScheme::Partial, f);
        let plain = ExactProblem::new(g.clone(), p, mask.clone(), Truncation::TotalNumber(7)).solve().unwrap();
        let shifted = ExactProblem::new(g.clone(), p, mask, Truncation::TotalNumber(7))
            .with_displacement(DisplacementMode::MeanField)
            .solve()
            .unwrap();
        for s in 0..3 {
            let (a, b) = (density(&plain, s), density(&shifted, s));
            prop_assert!((a - b).abs() < 1e-4 * a.max(1e-6));
        }
    }

    /// Weak-pump amplitudes scale as F^n, so correlations do not depend on F.
    #[test]
    fn weak_pump_scaling(delta in -2.0f64..2.0, u in 0.01f64..2.0, f in 1e-4f64..1e-2, k in 1.5f64..4.0) {
        let g = cell3();
        let p = ModelParams::new(delta, 2.0, u, f);
        let a = weak_pump_state(&g, &p, &drive_mask(&g, DriveScheme::Partial, f), 3).unwrap();
        let b = weak_pump_state(&g, &p, &drive_mask(&g, DriveScheme::Partial, k * f), 3).unwrap();
        for n in 1..=3 {
            let scaled = &a.amplitudes[n] * C64::new(k.powi(n as i32), 0.0);
            prop_assert!((scaled - &b.amplitudes[n]).norm() <= 1e-10 * b.amplitudes[n].norm());
        }
        prop_assert!(a.residual < 1e-10);
    }

    /// Corner selection keeps the `M` heaviest pairs, in descending weight.
    #[test]
    fn corner_selection_is_top_m(p in prop::collection::vec(0.0f64..1.0, 1..8), q in prop::collection::vec(0.0f64..1.0, 1..8), m in 1usize..80) {
        let sel = select_pairs(&p, &q, m);
        prop_assert_eq!(sel.len(), m.min(p.len() * q.len()));
        let w: Vec<f64> = sel.pairs.iter().map(|&(a, b)| p[a] * q[b]).collect();
        prop_assert!(w.windows(2).all(|x| x[0] >= x[1]));
        let floor = w.last().copied().unwrap_or(0.0);
        let heavier = p.iter().flat_map(|a| q.iter().map(move |b| a * b)).filter(|&x| x > floor).count();
        prop_assert!(heavier <= sel.len());
    }
}

/// A hopping sign error that breaks Hermiticity fails the flat-band check.
#[test]
fn broken_hopping_sign_is_detected() {
    let g = build_lattice(Geometry::Lieb1d, 12, Boundary::Periodic).unwrap();
    let mut h = single_particle_hamiltonian(&g, 1.0, 0.0);
    assert!(flat_band_report(&g, &h).holds(12));
    let e = g.edges[3];
    h[(e.i, e.j)] = -h[(e.i, e.j)];
    assert!(!flat_band_report(&g, &h).holds(12));
}

/// Too small a cutoff at strong drive is flagged by the convergence scan.
#[test]
fn reduced_cutoff_is_flagged() {
    let g = cell3();
    let p = ModelParams::new(0.0, 5.0, 0.1, 3.0);
    let problem = ExactProblem::new(g.clone(), p, drive_mask(&g, DriveScheme::Partial, 3.0), Truncation::TotalNumber(3))
        .with_displacement(DisplacementMode::MeanField);
    let rep = cutoff_convergence(&problem, &[2, 3, 4], &[], Normalization::FirstSite).unwrap();
    assert!(rep.drift_flag);
    assert!(rep.converged_from.is_none());
}
