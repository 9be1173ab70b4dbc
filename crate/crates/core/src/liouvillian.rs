//! Rotating-frame Hamiltonian and the Lindblad generator.
//!
//! In the frame rotating at the pump frequency
//!
//! ```text
//! H = sum_s [ -Delta n_s + (U/2) s^dag s^dag s s ]
//!     - J sum_<ij> ( s_i^dag s_j + h.c. )
//!     + sum_s ( F_s s^dag + F_s^* s )
//! ```
//!
//! and `d rho/dt = i[rho, H] + gamma sum_s ( s rho s^dag - {n_s, rho}/2 )`.
//!
//! Internally the generator is kept in the factored form
//! `L(rho) = -i (K rho - rho K^dag) + sum_k A_k rho A_k^dag` with
//! `K = H - (i/2) sum_k A_k^dag A_k`. Two exact transformations of that form
//! are supported:
//!
//! - a coherent displacement `s -> s + alpha_s` (see [`build_displaced_hamiltonian`]),
//!   which keeps the strongly driven problems in a small basis;
//! - a photon-number scaling `rho = S rho' S`, `S = diag(sigma^N)`, which keeps
//!   weak-drive density matrices at order one (see [`Lindbladian::with_number_scaling`]).
//!
//! Superoperators are vectorized column-major: `vec(A X B) = (B^T kron A) vec(X)`.

use crate::fock::{annihilators, total_number_operator, FockBasis};
use crate::lattice::{DriveMask, LatticeGraph, ModelParams};
use crate::sparse::SparseOperator;
use crate::{CMatrix, CVector, Error, Result, C64};

const HERMITICITY_TOL: f64 = 1e-12;

fn check_shapes(graph: &LatticeGraph, basis: &FockBasis, mask: Option<&DriveMask>) -> Result<()> {
    if basis.n_sites() != graph.n_sites() {
        return Err(Error::InvalidBasis(format!(
            "basis has {} sites, lattice has {}",
            basis.n_sites(),
            graph.n_sites()
        )));
    }
    if let Some(m) = mask {
        if m.amplitude.len() != graph.n_sites() {
            return Err(Error::InvalidParams("drive mask length mismatch".into()));
        }
    }
    Ok(())
}

/// Rotating-frame Hamiltonian on the given basis.
pub fn build_hamiltonian(
    graph: &LatticeGraph,
    params: &ModelParams,
    basis: &FockBasis,
    mask: &DriveMask,
) -> Result<SparseOperator> {
    let zeros = vec![C64::new(0.0, 0.0); graph.n_sites()];
    build_displaced_hamiltonian(graph, params, basis, mask, &zeros)
}

/// Hamiltonian for the fluctuation operators `d_s = s - alpha_s`.
///
/// Substitutes `s -> d_s + alpha_s` in `H`, drops constants, and adds the
/// coherent term `(i gamma / 2)(alpha^* d - alpha d^dag)` that the shifted
/// jump operators generate. Loss stays `sqrt(gamma) d_s`, so the pair
/// describes exactly the same dynamics as the undisplaced problem. With
/// `alpha` at the mean-field fixed point all linear terms cancel.
pub fn build_displaced_hamiltonian(
    graph: &LatticeGraph,
    params: &ModelParams,
    basis: &FockBasis,
    mask: &DriveMask,
    alpha: &[C64],
) -> Result<SparseOperator> {
    params.validate()?;
    check_shapes(graph, basis, Some(mask))?;
    if alpha.len() != graph.n_sites() {
        return Err(Error::InvalidParams("displacement length mismatch".into()));
    }
    let dim = basis.dim();
    let a = annihilators(basis);
    let ad: Vec<SparseOperator> = a.iter().map(SparseOperator::adjoint).collect();
    let delta = params.detuning;
    let u = params.interaction;
    let j = params.hopping;
    let gamma = params.gamma;
    let i_unit = C64::new(0.0, 1.0);
    let re = |x: f64| C64::new(x, 0.0);

    let mut h = SparseOperator::zeros(dim);
    // Linear coefficients of d^dag per site; the d term is the conjugate.
    let mut linear = vec![C64::new(0.0, 0.0); graph.n_sites()];
    let adj = graph.adjacency();
    for s in 0..graph.n_sites() {
        let al = alpha[s];
        let n_s = &ad[s] * &a[s];
        let mut term = n_s.scale(re(-delta + 2.0 * u * al.norm_sqr()));
        if u != 0.0 {
            let ad2 = &ad[s] * &ad[s];
            let a2 = &a[s] * &a[s];
            term = &term + &(&ad2 * &a2).scale(re(0.5 * u));
            if al != C64::new(0.0, 0.0) {
                term = &term + &(&ad2 * &a[s]).scale(al * u);
                term = &term + &(&ad[s] * &a2).scale(al.conj() * u);
                term = &term + &ad2.scale(0.5 * u * al * al);
                term = &term + &a2.scale(0.5 * u * al.conj() * al.conj());
            }
        }
        h = &h + &term;
        let mut lin = -delta * al + u * al.norm_sqr() * al + mask.amplitude[s]
            - 0.5 * i_unit * gamma * al;
        for &nb in &adj[s] {
            lin -= j * alpha[nb];
        }
        linear[s] = lin;
    }
    for e in &graph.edges {
        let hop = &(&ad[e.i] * &a[e.j]) + &(&ad[e.j] * &a[e.i]);
        h = &h + &hop.scale(re(-j));
    }
    for s in 0..graph.n_sites() {
        if linear[s] != C64::new(0.0, 0.0) {
            h = &h + &ad[s].scale(linear[s]);
            h = &h + &a[s].scale(linear[s].conj());
        }
    }
    Ok(h)
}

/// `H(F = 0) - (i gamma / 2) N`: generator of the no-jump evolution.
pub fn effective_hamiltonian(
    graph: &LatticeGraph,
    params: &ModelParams,
    basis: &FockBasis,
) -> Result<SparseOperator> {
    let undriven = DriveMask::zeros(graph.n_sites());
    let h = build_hamiltonian(graph, params, basis, &undriven)?;
    let n = total_number_operator(basis);
    Ok(&h + &n.scale(C64::new(0.0, -0.5 * params.gamma)))
}

/// Operator stored either sparse (Fock-space models) or dense (projected
/// corner spaces).
#[derive(Debug, Clone)]
pub enum Operator {
    Sparse(SparseOperator),
    Dense(CMatrix),
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Sparse(s) => s.dim(),
            Operator::Dense(d) => d.nrows(),
        }
    }

    pub fn adjoint(&self) -> Operator {
        match self {
            Operator::Sparse(s) => Operator::Sparse(s.adjoint()),
            Operator::Dense(d) => Operator::Dense(d.adjoint()),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Operator::Sparse(s) => s.to_dense(),
            Operator::Dense(d) => d.clone(),
        }
    }

    /// Stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        match self {
            Operator::Sparse(s) => s.triplets().collect(),
            Operator::Dense(d) => {
                let mut out = Vec::new();
                for j in 0..d.ncols() {
                    for i in 0..d.nrows() {
                        if d[(i, j)] != C64::new(0.0, 0.0) {
                            out.push((i, j, d[(i, j)]));
                        }
                    }
                }
                out
            }
        }
    }

    fn map_entries(&self, f: impl Fn(usize, usize, C64) -> C64) -> Operator {
        match self {
            Operator::Sparse(s) => Operator::Sparse(SparseOperator::from_triplets(
                s.dim(),
                s.triplets().map(|(i, j, v)| (i, j, f(i, j, v))),
            )),
            Operator::Dense(d) => Operator::Dense(CMatrix::from_fn(d.nrows(), d.ncols(), |i, j| f(i, j, d[(i, j)]))),
        }
    }

    /// `out += alpha * self * x`.
    pub fn mul_dense_acc(&self, x: &CMatrix, alpha: C64, out: &mut CMatrix) {
        match self {
            Operator::Sparse(s) => s.mul_dense_acc(x, alpha, out),
            Operator::Dense(d) => out.gemm(alpha, d, x, C64::new(1.0, 0.0)),
        }
    }

    /// `out += alpha * x * self`.
    pub fn dense_mul_acc(&self, x: &CMatrix, alpha: C64, out: &mut CMatrix) {
        match self {
            Operator::Sparse(s) => s.dense_mul_acc(x, alpha, out),
            Operator::Dense(d) => out.gemm(alpha, x, d, C64::new(1.0, 0.0)),
        }
    }

    pub fn mul_dense(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim(), x.ncols());
        self.mul_dense_acc(x, C64::new(1.0, 0.0), &mut out);
        out
    }
}

/// Lindblad generator in factored form.
#[derive(Debug, Clone)]
pub struct Lindbladian {
    k: Operator,
    k_adj: Operator,
    jumps: Vec<Operator>,
    jumps_adj: Vec<Operator>,
    trace_weights: Vec<f64>,
    scale: Vec<f64>,
    reference: usize,
}

/// Lindbladian with loss `sqrt(gamma) s` on every site of `basis`.
pub fn build_liouvillian(h: &SparseOperator, basis: &FockBasis, gamma: f64) -> Result<Lindbladian> {
    if gamma <= 0.0 {
        return Err(Error::InvalidParams("gamma must be > 0".into()));
    }
    let jumps = annihilators(basis)
        .into_iter()
        .map(|a| a.scale(C64::new(gamma.sqrt(), 0.0)))
        .collect();
    Lindbladian::from_parts(h, jumps)
}

impl Lindbladian {
    /// Generator with Hermitian `h` and jump operators `jumps`.
    pub fn from_parts(h: &SparseOperator, jumps: Vec<SparseOperator>) -> Result<Self> {
        let herm = h.hermiticity_error();
        if herm > HERMITICITY_TOL * h.max_abs().max(1.0) {
            return Err(Error::NonHermitian(herm));
        }
        let mut k = h.clone();
        for a in &jumps {
            let ad = a.adjoint();
            k = &k + &(&ad * a).scale(C64::new(0.0, -0.5));
        }
        Ok(Self::assemble(
            Operator::Sparse(k),
            jumps.into_iter().map(Operator::Sparse).collect(),
        ))
    }

    /// Same as [`Lindbladian::from_parts`] for dense operators.
    pub fn from_dense_parts(h: &CMatrix, jumps: Vec<CMatrix>) -> Result<Self> {
        let herm = (h - h.adjoint()).camax();
        if herm > HERMITICITY_TOL * h.camax().max(1.0) {
            return Err(Error::NonHermitian(herm));
        }
        let mut k = h.clone();
        for a in &jumps {
            k.gemm(C64::new(0.0, -0.5), &a.adjoint(), a, C64::new(1.0, 0.0));
        }
        Ok(Self::assemble(
            Operator::Dense(k),
            jumps.into_iter().map(Operator::Dense).collect(),
        ))
    }

    fn assemble(k: Operator, jumps: Vec<Operator>) -> Self {
        let dim = k.dim();
        Lindbladian {
            k_adj: k.adjoint(),
            k,
            jumps_adj: jumps.iter().map(Operator::adjoint).collect(),
            jumps,
            trace_weights: vec![1.0; dim],
            scale: vec![1.0; dim],
            reference: 0,
        }
    }

    /// Rewrites the generator for `rho' = S^-1 rho S^-1` with
    /// `S = diag(sigma^N_k)`; `numbers[k]` is the photon number of state `k`.
    /// Jump operators must lower the photon number by one.
    pub fn with_number_scaling(&self, sigma: f64, numbers: &[usize]) -> Lindbladian {
        assert_eq!(numbers.len(), self.dim());
        assert!(sigma > 0.0);
        let ln = sigma.ln();
        let factor = |i: usize, j: usize| ((numbers[j] as f64 - numbers[i] as f64) * ln).exp();
        let conj = |op: &Operator| op.map_entries(|i, j, v| v * factor(i, j));
        let s: Vec<f64> = numbers.iter().map(|&n| (n as f64 * ln).exp()).collect();
        let mut out = Self::assemble(conj(&self.k), self.jumps.iter().map(conj).collect());
        out.trace_weights = self.trace_weights.iter().zip(&s).map(|(w, x)| w * x * x).collect();
        out.scale = self.scale.iter().zip(&s).map(|(a, b)| a * b).collect();
        out.reference = self.reference;
        out
    }

    pub fn dim(&self) -> usize {
        self.k.dim()
    }

    /// `K = H - (i/2) sum_k A_k^dag A_k`.
    pub fn k(&self) -> &Operator {
        &self.k
    }

    pub fn jumps(&self) -> &[Operator] {
        &self.jumps
    }

    /// Weights `w` with `tr(rho_phys) = sum_k w_k rho_kk`.
    pub fn trace_weights(&self) -> &[f64] {
        &self.trace_weights
    }

    /// Diagonal `S` with `rho_phys = S rho S`.
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Basis index used to anchor the null-space solve (the vacuum).
    pub fn reference(&self) -> usize {
        self.reference
    }

    /// Sets the anchor index (defaults to 0, the vacuum of a Fock basis).
    pub fn with_reference(mut self, k: usize) -> Self {
        assert!(k < self.dim());
        self.reference = k;
        self
    }

    pub fn weighted_trace(&self, rho: &CMatrix) -> C64 {
        self.trace_weights
            .iter()
            .enumerate()
            .map(|(k, w)| rho[(k, k)] * *w)
            .sum()
    }

    /// `L(rho)`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        self.apply_acc(rho, &mut out);
        out
    }

    /// `out += L(rho)`.
    pub fn apply_acc(&self, rho: &CMatrix, out: &mut CMatrix) {
        let i_unit = C64::new(0.0, 1.0);
        self.k.mul_dense_acc(rho, -i_unit, out);
        self.k_adj.dense_mul_acc(rho, i_unit, out);
        for (a, ad) in self.jumps.iter().zip(&self.jumps_adj) {
            let y = a.mul_dense(rho);
            ad.dense_mul_acc(&y, C64::new(1.0, 0.0), out);
        }
    }

    /// Physical density matrix `S rho S` from the internal representation.
    pub fn to_physical(&self, rho: &CMatrix) -> CMatrix {
        CMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            rho[(i, j)] * (self.scale[i] * self.scale[j])
        })
    }

    /// Internal representation `S^-1 rho S^-1` of a physical state.
    pub fn from_physical(&self, rho: &CMatrix) -> CMatrix {
        CMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            rho[(i, j)] / (self.scale[i] * self.scale[j])
        })
    }

    /// Explicit vectorized superoperator (only sensible for small bases).
    pub fn to_superoperator(&self) -> SparseSuperoperator {
        let d = self.dim();
        let mut trip: Vec<(usize, usize, C64)> = Vec::new();
        let i_unit = C64::new(0.0, 1.0);
        let k_entries = self.k.triplets();
        // -i (I kron K)
        for &(r, c, v) in &k_entries {
            for b in 0..d {
                trip.push((r + b * d, c + b * d, -i_unit * v));
            }
        }
        // +i (conj(K) kron I): vec(rho K^dag) = ((K^dag)^T kron I) vec(rho)
        for &(r, c, v) in &k_entries {
            for a in 0..d {
                trip.push((a + r * d, a + c * d, i_unit * v.conj()));
            }
        }
        // conj(A) kron A
        for a in &self.jumps {
            let entries = a.triplets();
            for &(r1, c1, v1) in &entries {
                for &(r2, c2, v2) in &entries {
                    trip.push((r2 + r1 * d, c2 + c1 * d, v1.conj() * v2));
                }
            }
        }
        SparseSuperoperator {
            dim: d,
            matrix: SparseOperator::from_triplets(d * d, trip),
        }
    }
}

/// Liouvillian as an explicit `D^2 x D^2` matrix acting on column-major
/// vectorized density matrices.
#[derive(Debug, Clone)]
pub struct SparseSuperoperator {
    dim: usize,
    matrix: SparseOperator,
}

impl SparseSuperoperator {
    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &SparseOperator {
        &self.matrix
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = CVector::from_column_slice(rho.as_slice());
        let out = self.matrix.matvec(&v);
        CMatrix::from_column_slice(self.dim, self.dim, out.as_slice())
    }
}
