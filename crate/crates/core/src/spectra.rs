//! Closed-system spectra (`F = 0`, `gamma = 0`): single-particle bands, the
//! two-photon eigenstates of the three-cavity cell and manifold
//! probabilities of a driven state.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::fock::{FockBasis, Truncation};
use crate::lattice::{build_lattice, Boundary, DriveMask, Geometry, LatticeGraph, ModelParams, SiteRole};
use crate::linalg::hermitian_eigen_desc;
use crate::liouvillian::build_hamiltonian;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Eigenpairs of a Hamiltonian restricted to the `manifold`-photon sector.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub manifold: usize,
    /// Ascending.
    pub energies: Vec<f64>,
    /// Column `k` is the eigenvector of `energies[k]`.
    pub states: CMatrix,
    /// Occupation tuples labelling the rows of `states`.
    pub basis: Vec<Vec<u8>>,
}

impl EigenSolution {
    /// Eigenpairs of the Hermitian part of `h`.
    pub fn from_hermitian(manifold: usize, h: &CMatrix, basis: Vec<Vec<u8>>) -> Self {
        let (vals, vecs) = hermitian_eigen_desc(h);
        let n = vals.len();
        let energies: Vec<f64> = vals.iter().rev().copied().collect();
        let states = CMatrix::from_fn(vecs.nrows(), n, |i, k| vecs[(i, n - 1 - k)]);
        EigenSolution { manifold, energies, states, basis }
    }

    pub fn state(&self, k: usize) -> CVector {
        self.states.column(k).into_owned()
    }

    /// `max_k |H v_k - E_k v_k|` and the orthonormality defect `|V^dag V - I|`.
    pub fn residuals(&self, h: &CMatrix) -> (f64, f64) {
        let mut worst: f64 = 0.0;
        for (k, &e) in self.energies.iter().enumerate() {
            let v = self.state(k);
            worst = worst.max((h * &v - &v * C64::new(e, 0.0)).norm());
        }
        let n = self.energies.len();
        let ortho = (self.states.adjoint() * &self.states - CMatrix::identity(n, n)).norm();
        (worst, ortho)
    }
}

/// One-photon Hamiltonian `-Delta I - J A` on the lattice sites.
pub fn single_particle_hamiltonian(graph: &LatticeGraph, hopping: f64, detuning: f64) -> CMatrix {
    let n = graph.n_sites();
    let mut h = CMatrix::from_diagonal_element(n, n, C64::new(-detuning, 0.0));
    for e in &graph.edges {
        h[(e.i, e.j)] -= C64::new(hopping, 0.0);
        h[(e.j, e.i)] -= C64::new(hopping, 0.0);
    }
    h
}

/// All one-photon eigenpairs; rows are lattice sites.
pub fn single_particle_spectrum(graph: &LatticeGraph, hopping: f64, detuning: f64) -> EigenSolution {
    let h = single_particle_hamiltonian(graph, hopping, detuning);
    let basis = (0..graph.n_sites())
        .map(|s| {
            let mut occ = vec![0u8; graph.n_sites()];
            occ[s] = 1;
            occ
        })
        .collect();
    EigenSolution::from_hermitian(1, &h, basis)
}

/// Eigenvectors whose energy lies within `tol` of `energy`, as columns.
pub fn eigenspace(sol: &EigenSolution, energy: f64, tol: f64) -> CMatrix {
    let cols: Vec<usize> = (0..sol.energies.len())
        .filter(|&k| (sol.energies[k] - energy).abs() < tol)
        .collect();
    CMatrix::from_fn(sol.states.nrows(), cols.len(), |i, c| sol.states[(i, cols[c])])
}

/// Largest amplitude `|P e_s|` of the projector onto `space` on any site of
/// the given role (independent of the choice of basis inside the space).
pub fn max_role_weight(graph: &LatticeGraph, space: &CMatrix, role: SiteRole) -> f64 {
    let p = space * space.adjoint();
    graph
        .sites_with_role(role)
        .into_iter()
        .map(|s| p.column(s).norm())
        .fold(0.0, f64::max)
}

/// Closed cell3 Hamiltonian in the two-photon sector (`Delta = 0`).
pub fn two_photon_hamiltonian_cell3(hopping: f64, interaction: f64) -> Result<(CMatrix, Vec<Vec<u8>>)> {
    let g = build_lattice(Geometry::Cell3, 1, Boundary::Open)?;
    let basis = FockBasis::new(3, Truncation::TotalNumber(2))?;
    let params = ModelParams::new(0.0, hopping, interaction, 0.0);
    let h = build_hamiltonian(&g, &params, &basis, &DriveMask::zeros(3))?;
    let m = basis.manifold(2);
    let labels = m.iter().map(|&k| basis.occupation(k).to_vec()).collect();
    Ok((h.block(m, m), labels))
}

/// The six two-photon eigenpairs of the closed three-cavity cell.
pub fn two_photon_spectrum_cell3(hopping: f64, interaction: f64) -> Result<EigenSolution> {
    let (h, labels) = two_photon_hamiltonian_cell3(hopping, interaction)?;
    Ok(EigenSolution::from_hermitian(2, &h, labels))
}

/// Vector over `labels` with the given occupation amplitudes.
pub fn vector_in(labels: &[Vec<u8>], entries: &[([u8; 3], f64)]) -> CVector {
    let mut v = CVector::zeros(labels.len());
    for (occ, c) in entries {
        let k = labels
            .iter()
            .position(|l| l.as_slice() == occ.as_slice())
            .expect("occupation present in basis");
        v[k] += C64::new(*c, 0.0);
    }
    v
}

/// The two near-resonant two-photon states of the cell, in the ordering of
/// [`two_photon_hamiltonian_cell3`]:
/// `(|2,0,0> - |0,2,0> + |0,0,2>)/sqrt(3)` (exact, energy `U`) and
/// `(|2,0,0> + |0,0,2> + 2|0,2,0> - 3 sqrt(2)|1,0,1>)/(2 sqrt(6))`
/// (energy `U/4` for `U/J -> 0`).
pub fn reference_states_cell3() -> Result<(CVector, CVector)> {
    let (_, labels) = two_photon_hamiltonian_cell3(1.0, 0.0)?;
    let r3 = 1.0 / 3f64.sqrt();
    let psi1 = vector_in(&labels, &[([2, 0, 0], r3), ([0, 2, 0], -r3), ([0, 0, 2], r3)]);
    let c = 1.0 / (2.0 * 6f64.sqrt());
    let psi2 = vector_in(
        &labels,
        &[([2, 0, 0], c), ([0, 0, 2], c), ([0, 2, 0], 2.0 * c), ([1, 0, 1], -3.0 * 2f64.sqrt() * c)],
    );
    Ok((psi1, psi2))
}

/// Orthonormal two-photon basis of the cell for `U/J -> 0`: the two
/// reference states first, then the four non-degenerate levels ascending.
pub fn reference_basis_cell3(hopping: f64) -> Result<EigenSolution> {
    let (psi1, psi2) = reference_states_cell3()?;
    let free = two_photon_spectrum_cell3(hopping, 0.0)?;
    let others: Vec<usize> = (0..6).filter(|&k| free.energies[k].abs() > 1e-9 * hopping.abs().max(1.0)).collect();
    if others.len() != 4 {
        return Err(Error::Singular("zero-interaction pair level is not two-fold".into()));
    }
    let mut states = CMatrix::zeros(6, 6);
    states.set_column(0, &psi1);
    states.set_column(1, &psi2);
    let mut energies = vec![0.0, 0.0];
    for (c, &k) in others.iter().enumerate() {
        states.set_column(c + 2, &free.states.column(k));
        energies.push(free.energies[k]);
    }
    Ok(EigenSolution { manifold: 2, energies, states, basis: free.basis })
}

/// `P_i = |<Psi_i|psi>|^2 / sum_j |<Psi_j|psi>|^2` over the columns of
/// `eig.states`; `amplitudes` must use the same manifold basis.
pub fn manifold_probabilities(amplitudes: &CVector, eig: &EigenSolution) -> Result<Vec<f64>> {
    if amplitudes.len() != eig.states.nrows() {
        return Err(Error::InvalidBasis("manifold dimension mismatch".into()));
    }
    let overlaps: Vec<f64> = (0..eig.energies.len())
        .map(|k| eig.states.column(k).dotc(amplitudes).norm_sqr())
        .collect();
    let total: f64 = overlaps.iter().sum();
    if total <= 0.0 {
        return Err(Error::Singular("manifold has no population".into()));
    }
    Ok(overlaps.into_iter().map(|p| p / total).collect())
}

/// Row of a band-structure CSV.
#[derive(Debug, Clone, Serialize)]
pub struct BandRow {
    pub index: usize,
    pub energy: f64,
    pub b_weight: f64,
}

/// Single-particle levels with the weight of each eigenvector on B sites.
pub fn band_rows(graph: &LatticeGraph, sol: &EigenSolution) -> Vec<BandRow> {
    let b_sites = graph.sites_with_role(SiteRole::B);
    (0..sol.energies.len())
        .map(|k| BandRow {
            index: k,
            energy: sol.energies[k],
            b_weight: b_sites.iter().map(|&s| sol.states[(s, k)].norm_sqr()).sum(),
        })
        .collect()
}

pub fn write_band_csv(path: &Path, rows: &[BandRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Two-photon energies (units of `J`) on a grid of `U/J`.
pub fn write_two_photon_csv(path: &Path, u_over_j: &[f64]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "U_over_J,E1,E2,E3,E4,E5,E6,E_ref1,E_ref2")?;
    let (psi1, psi2) = reference_states_cell3()?;
    for &r in u_over_j {
        let (h, _) = two_photon_hamiltonian_cell3(1.0, r)?;
        let sol = EigenSolution::from_hermitian(2, &h, Vec::new());
        let e1 = (psi1.adjoint() * &h * &psi1)[(0, 0)].re;
        let e2 = (psi2.adjoint() * &h * &psi2)[(0, 0)].re;
        let cols: Vec<String> = sol.energies.iter().map(|e| format!("{e:.12e}")).collect();
        writeln!(f, "{r:.6e},{},{e1:.12e},{e2:.12e}", cols.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    #[test]
    fn cell3_levels_and_dark_state() {
        let g = build_lattice(Geometry::Cell3, 1, Boundary::Open).unwrap();
        let sol = single_particle_spectrum(&g, 5.0, 0.3);
        let r2 = 2f64.sqrt() * 5.0;
        for (e, x) in sol.energies.iter().zip([-r2, 0.0, r2]) {
            assert!((e - (x - 0.3)).abs() < 1e-12);
        }
        let mid = sol.state(1);
        assert!(mid[1].norm() < 1e-12);
        assert!((mid[0] + mid[2]).norm() < 1e-12);
        let (res, ortho) = sol.residuals(&single_particle_hamiltonian(&g, 5.0, 0.3));
        assert!(res < 1e-10 && ortho < 1e-10);
    }

    #[test]
    fn periodic_chain_flat_band() {
        let g = build_lattice(Geometry::Lieb1d, 12, Boundary::Periodic).unwrap();
        let sol = single_particle_spectrum(&g, 1.0, 0.0);
        let zeros = sol.energies.iter().filter(|e| e.abs() < 1e-10).count();
        assert_eq!(zeros, 12);
        let flat = eigenspace(&sol, 0.0, 1e-8);
        assert!(max_role_weight(&g, &flat, SiteRole::B) < 1e-10);
    }

    #[test]
    fn zero_hopping_is_degenerate() {
        let g = build_lattice(Geometry::Lieb1d, 4, Boundary::Periodic).unwrap();
        let sol = single_particle_spectrum(&g, 0.0, 0.7);
        assert!(sol.energies.iter().all(|e| (e + 0.7).abs() < 1e-14));
    }

    #[test]
    fn hopping_sign_mirrors_spectrum() {
        let g = build_lattice(Geometry::Cell3, 1, Boundary::Open).unwrap();
        let a = single_particle_spectrum(&g, 2.0, 0.0).energies;
        let b = single_particle_spectrum(&g, -2.0, 0.0).energies;
        for (x, y) in a.iter().zip(b.iter().rev()) {
            assert!((x + y).abs() < 1e-12);
        }
    }

    #[test]
    fn two_photon_sums_at_zero_interaction() {
        let sol = two_photon_spectrum_cell3(1.0, 0.0).unwrap();
        let r2 = 2f64.sqrt();
        for (e, x) in sol.energies.iter().zip([-2.0 * r2, -r2, 0.0, 0.0, r2, 2.0 * r2]) {
            assert!((e - x).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_states() {
        let (p1, p2) = reference_states_cell3().unwrap();
        assert!((p1.norm() - 1.0).abs() < 1e-15);
        assert!((p2.norm() - 1.0).abs() < 1e-15);
        assert!(p1.dotc(&p2).norm() < 1e-15);
        for (j, u) in [(1.0, 0.3), (5.0, 0.1), (2.0, 7.0)] {
            let (h, _) = two_photon_hamiltonian_cell3(j, u).unwrap();
            assert!((&h * &p1 - &p1 * C64::new(u, 0.0)).norm() < 1e-12);
        }
        let mut prev = f64::INFINITY;
        for ratio in [1e-1, 1e-2, 1e-3] {
            let (h, _) = two_photon_hamiltonian_cell3(1.0, ratio).unwrap();
            let res = (&h * &p2).norm();
            assert!(res < prev);
            prev = res;
        }
        assert!(prev < 2e-3);
    }

    #[test]
    fn second_near_zero_level_is_quarter_u() {
        let mut prev = f64::INFINITY;
        for ratio in [0.1, 0.02, 0.005] {
            let sol = two_photon_spectrum_cell3(1.0, ratio).unwrap();
            let e = sol
                .energies
                .iter()
                .copied()
                .filter(|e| (e - ratio).abs() > 1e-9 && e.abs() < 0.5)
                .next()
                .unwrap();
            let rel = (e - ratio / 4.0).abs() / (ratio / 4.0);
            assert!(rel < prev);
            prev = rel;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn reference_basis_is_orthonormal() {
        let b = reference_basis_cell3(5.0).unwrap();
        let (h, _) = two_photon_hamiltonian_cell3(5.0, 0.0).unwrap();
        let (res, ortho) = b.residuals(&h);
        assert!(res < 1e-10 && ortho < 1e-12);
    }

    #[test]
    fn probabilities_are_normalized() {
        let sol = two_photon_spectrum_cell3(1.0, 0.02).unwrap();
        let v = CVector::from_fn(6, |i, _| C64::new(1.0 + i as f64, 0.5 - i as f64));
        let p = manifold_probabilities(&v, &sol).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(manifold_probabilities(&CVector::zeros(6), &sol).is_err());
    }
}
