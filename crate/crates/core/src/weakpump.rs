//! Weak-drive expansion of the steady state,
//! `|psi> = |0> + sum_n f^(n)` with `f^(n) = O(F^n)` in the `n`-photon manifold.
//!
//! Manifold by manifold, `H_eff f^(n) = -D f^(n-1)` with
//! `H_eff = H(F=0) - (i gamma/2) N` and `D = sum_s F_s s^dag` restricted to
//! `n-1 -> n`. Correlation functions follow at leading order in `F`, where
//! they are independent of the drive strength.

use crate::fock::{annihilators, FockBasis, Truncation};
use crate::lattice::{DriveMask, LatticeGraph, ModelParams};
use crate::linalg::{gmres, GmresOptions};
use crate::liouvillian::effective_hamiltonian;
use crate::observables::{Normalization, ObservableSet, PhotonState};
use crate::sparse::SparseOperator;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Manifolds up to this dimension are solved by dense LU.
const DENSE_LIMIT: usize = 3000;

/// Perturbative amplitudes `f^(n)` in a total-number truncated basis.
#[derive(Debug, Clone)]
pub struct PureStateExpansion {
    pub basis: FockBasis,
    /// `amplitudes[n]` is indexed like `basis.manifold(n)`; `amplitudes[0] = [1]`.
    pub amplitudes: Vec<CVector>,
    /// Largest `|H_eff f^(n) + D f^(n-1)| / |D f^(n-1)|` over the manifolds.
    pub residual: f64,
    modes: Vec<SparseOperator>,
}

impl PureStateExpansion {
    pub fn n_max(&self) -> usize {
        self.amplitudes.len() - 1
    }

    /// `f^(n)` embedded in the full basis.
    pub fn full_vector(&self, n: usize) -> CVector {
        let mut v = CVector::zeros(self.basis.dim());
        for (k, &idx) in self.basis.manifold(n).iter().enumerate() {
            v[idx] = self.amplitudes[n][k];
        }
        v
    }

    /// `f^(n)` reordered to the occupation tuples in `labels`.
    pub fn amplitudes_on(&self, n: usize, labels: &[Vec<u8>]) -> Result<CVector> {
        let m = self.basis.manifold(n);
        let mut v = CVector::zeros(labels.len());
        for (k, l) in labels.iter().enumerate() {
            let idx = self
                .basis
                .index_of(l)
                .ok_or_else(|| Error::InvalidBasis(format!("state {l:?} not in basis")))?;
            let pos = m.iter().position(|&x| x == idx).ok_or_else(|| {
                Error::InvalidBasis(format!("state {l:?} not in manifold {n}"))
            })?;
            v[k] = self.amplitudes[n][pos];
        }
        Ok(v)
    }

    /// `|prod_i s_i^k_i f^(K)|^2` with `K = sum k_i`, the leading-order
    /// normal-ordered moment.
    fn leading_moment(&self, factors: &[(usize, u32)]) -> Option<f64> {
        let order: usize = factors.iter().map(|&(_, k)| k as usize).sum();
        if order > self.n_max() {
            return None;
        }
        let mut v = self.full_vector(order);
        for &(s, k) in factors {
            for _ in 0..k {
                v = self.modes[s].matvec(&v);
            }
        }
        Some(v.norm_squared())
    }
}

impl PhotonState for PureStateExpansion {
    fn n_sites(&self) -> usize {
        self.basis.n_sites()
    }

    /// Leading-order moment; `NaN` when the order exceeds the expansion.
    fn moment(&self, factors: &[(usize, u32)]) -> f64 {
        self.leading_moment(factors).unwrap_or(f64::NAN)
    }
}

fn solve_manifold(block: &SparseOperator, m: &[usize], rhs: CVector, dense_limit: usize) -> Result<CVector> {
    if m.len() <= dense_limit {
        let a = block.block(m, m);
        return a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("effective Hamiltonian block".into()));
    }
    // Large manifolds: GMRES on the sparse block with a Jacobi preconditioner.
    let local = {
        let mut pos = vec![usize::MAX; block.dim()];
        for (k, &i) in m.iter().enumerate() {
            pos[i] = k;
        }
        SparseOperator::from_triplets(
            m.len(),
            block
                .triplets()
                .filter(|&(i, j, _)| pos[i] != usize::MAX && pos[j] != usize::MAX)
                .map(|(i, j, v)| (pos[i], pos[j], v)),
        )
    };
    let diag: Vec<C64> = (0..m.len()).map(|k| local.get(k, k)).collect();
    let b = CMatrix::from_column_slice(m.len(), 1, rhs.as_slice());
    let (x, _) = gmres(
        |v| {
            let y = local.matvec(&CVector::from_column_slice(v.as_slice()));
            CMatrix::from_column_slice(m.len(), 1, y.as_slice())
        },
        |v| CMatrix::from_fn(m.len(), 1, |i, _| v[(i, 0)] / diag[i]),
        &b,
        None,
        GmresOptions { restart: 80, max_iter: 5000, tol: 1e-13 },
    )?;
    Ok(CVector::from_column_slice(x.as_slice()))
}

/// Amplitudes up to `n_max` photons.
pub fn weak_pump_state(
    graph: &LatticeGraph,
    params: &ModelParams,
    mask: &DriveMask,
    n_max: u32,
) -> Result<PureStateExpansion> {
    params.validate()?;
    if n_max < 1 {
        return Err(Error::InvalidParams("expansion needs n_max >= 1".into()));
    }
    if mask.amplitude.len() != graph.n_sites() {
        return Err(Error::InvalidParams("drive mask length mismatch".into()));
    }
    let basis = FockBasis::new(graph.n_sites(), Truncation::TotalNumber(n_max))?;
    let heff = effective_hamiltonian(graph, params, &basis)?;
    let modes = annihilators(&basis);
    let mut drive = SparseOperator::zeros(basis.dim());
    for (s, a) in modes.iter().enumerate() {
        if mask.amplitude[s] != C64::new(0.0, 0.0) {
            drive = &drive + &a.adjoint().scale(mask.amplitude[s]);
        }
    }
    let mut amplitudes = vec![CVector::from_element(1, C64::new(1.0, 0.0))];
    let mut prev_full = CVector::zeros(basis.dim());
    prev_full[basis.vacuum()] = C64::new(1.0, 0.0);
    let mut residual: f64 = 0.0;
    for n in 1..=n_max as usize {
        let m = basis.manifold(n);
        let raised = drive.matvec(&prev_full);
        let rhs = CVector::from_iterator(m.len(), m.iter().map(|&i| -raised[i]));
        let f = solve_manifold(&heff, m, rhs.clone(), DENSE_LIMIT)?;
        prev_full = CVector::zeros(basis.dim());
        for (k, &i) in m.iter().enumerate() {
            prev_full[i] = f[k];
        }
        let applied = heff.matvec(&prev_full);
        let scale = rhs.norm();
        if scale > 0.0 {
            let r: f64 = m
                .iter()
                .enumerate()
                .map(|(k, &i)| (applied[i] - rhs[k]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            residual = residual.max(r / scale);
        }
        amplitudes.push(f);
    }
    Ok(PureStateExpansion { basis, amplitudes, residual, modes })
}

/// Leading-order observables of an expansion.
#[derive(Debug, Clone)]
pub struct WeakPumpObservables {
    pub set: ObservableSet,
    /// `|s f^(2)|^2 / |s f^(1)|^2` per site: relative size of the two-photon
    /// contribution to the density neglected at leading order.
    pub density_correction: Vec<Option<f64>>,
}

/// Densities and correlations up to `order` (2 or 3) at leading order.
pub fn weak_pump_observables(
    exp: &PureStateExpansion,
    order: u32,
    pairs: &[(usize, usize)],
    norm: Normalization,
) -> Result<WeakPumpObservables> {
    if order as usize > exp.n_max() {
        return Err(Error::InvalidParams(format!(
            "order {order} needs an expansion with n_max >= {order}, have {}",
            exp.n_max()
        )));
    }
    let mut set = ObservableSet::compute(exp, pairs, norm);
    if order < 3 {
        set.g3_local.iter_mut().for_each(|g| *g = None);
    }
    let density_correction = (0..exp.n_sites())
        .map(|s| {
            if exp.n_max() < 2 || set.n[s] <= 0.0 {
                return None;
            }
            let v = exp.modes[s].matvec(&exp.full_vector(2));
            Some(v.norm_squared() / set.n[s])
        })
        .collect();
    Ok(WeakPumpObservables { set, density_correction })
}
