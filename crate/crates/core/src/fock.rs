//! Truncated multi-site Fock bases and ladder operators.
//!
//! States are ordered by total photon number, then by descending
//! occupation tuple, so the vacuum is always index 0 and the one-photon
//! state on site `k` is index `k + 1`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::sparse::SparseOperator;
use crate::{Error, Result, C64};

/// Default cap on the basis dimension.
pub const DEFAULT_MAX_DIM: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n_max")]
pub enum Truncation {
    /// Every site holds at most `n_max` photons.
    PerSite(u32),
    /// The lattice holds at most `n_max` photons in total.
    TotalNumber(u32),
}

impl Truncation {
    pub fn n_max(&self) -> u32 {
        match *self {
            Truncation::PerSite(n) | Truncation::TotalNumber(n) => n,
        }
    }

    pub fn with_n_max(&self, n: u32) -> Truncation {
        match self {
            Truncation::PerSite(_) => Truncation::PerSite(n),
            Truncation::TotalNumber(_) => Truncation::TotalNumber(n),
        }
    }

    /// Number of states, or `None` on overflow.
    pub fn dimension(&self, n_sites: usize) -> Option<usize> {
        match *self {
            Truncation::PerSite(n) => {
                let mut d: usize = 1;
                for _ in 0..n_sites {
                    d = d.checked_mul(n as usize + 1)?;
                }
                Some(d)
            }
            Truncation::TotalNumber(n) => binomial(n_sites + n as usize, n as usize),
        }
    }
}

/// `C(n, k)` with overflow detection.
pub fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

/// Basis indices grouped by total photon number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifoldIndex {
    by_number: Vec<Vec<usize>>,
}

impl ManifoldIndex {
    /// Sorted basis indices with total photon number `n` (empty if absent).
    pub fn get(&self, n: usize) -> &[usize] {
        self.by_number.get(n).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn max_number(&self) -> usize {
        self.by_number.len().saturating_sub(1)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.by_number.iter().map(Vec::len).collect()
    }
}

#[derive(Debug, Clone)]
pub struct FockBasis {
    n_sites: usize,
    truncation: Option<Truncation>,
    occupations: Vec<u8>,
    index: HashMap<Vec<u8>, usize>,
    manifolds: ManifoldIndex,
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n_sites == other.n_sites && self.occupations == other.occupations
    }
}

/// Per-site uniform cutoff basis, `(n_max + 1)^n_sites` states.
pub fn build_basis(n_sites: usize, n_max: u32) -> Result<FockBasis> {
    FockBasis::new(n_sites, Truncation::PerSite(n_max))
}

impl FockBasis {
    pub fn new(n_sites: usize, truncation: Truncation) -> Result<Self> {
        Self::with_limit(n_sites, truncation, DEFAULT_MAX_DIM)
    }

    pub fn with_limit(n_sites: usize, truncation: Truncation, limit: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidBasis("need at least one site".into()));
        }
        let n_max = truncation.n_max();
        if n_max == 0 {
            return Err(Error::InvalidBasis("cutoff must be at least 1".into()));
        }
        if n_max > u8::MAX as u32 {
            return Err(Error::InvalidBasis(format!("cutoff {n_max} too large")));
        }
        let dim = truncation.dimension(n_sites).unwrap_or(usize::MAX);
        if dim > limit {
            return Err(Error::DimensionOverflow { dim, limit });
        }
        let mut states = Vec::with_capacity(dim);
        let mut current = vec![0u8; n_sites];
        match truncation {
            Truncation::PerSite(n) => enumerate_per_site(&mut current, 0, n as u8, &mut states),
            Truncation::TotalNumber(n) => enumerate_total(&mut current, 0, n as u8, &mut states),
        }
        let mut basis = Self::assemble(n_sites, states);
        basis.truncation = Some(truncation);
        Ok(basis)
    }

    /// Basis from an explicit set of occupation tuples. The set must be
    /// closed under removing one photon from any site so that annihilation
    /// operators act within it.
    pub fn from_states(n_sites: usize, states: Vec<Vec<u8>>) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidBasis("need at least one site".into()));
        }
        if states.iter().any(|s| s.len() != n_sites) {
            return Err(Error::InvalidBasis("occupation tuple of wrong length".into()));
        }
        let basis = Self::assemble(n_sites, states);
        if basis.index.len() != basis.dim() {
            return Err(Error::InvalidBasis("duplicate occupation tuples".into()));
        }
        let mut probe = vec![0u8; n_sites];
        for k in 0..basis.dim() {
            probe.copy_from_slice(basis.occupation(k));
            for s in 0..n_sites {
                if probe[s] > 0 {
                    probe[s] -= 1;
                    if basis.index_of(&probe).is_none() {
                        return Err(Error::InvalidBasis(format!(
                            "state {:?} lowers out of the basis",
                            basis.occupation(k)
                        )));
                    }
                    probe[s] += 1;
                }
            }
        }
        Ok(basis)
    }

    fn assemble(n_sites: usize, mut states: Vec<Vec<u8>>) -> Self {
        states.sort_by(|x, y| {
            let nx: u32 = x.iter().map(|&v| v as u32).sum();
            let ny: u32 = y.iter().map(|&v| v as u32).sum();
            nx.cmp(&ny).then_with(|| y.cmp(x))
        });
        let mut occupations = Vec::with_capacity(states.len() * n_sites);
        let mut index = HashMap::with_capacity(states.len());
        let mut by_number: Vec<Vec<usize>> = Vec::new();
        for (k, s) in states.into_iter().enumerate() {
            let n: usize = s.iter().map(|&v| v as usize).sum();
            if by_number.len() <= n {
                by_number.resize(n + 1, Vec::new());
            }
            by_number[n].push(k);
            occupations.extend_from_slice(&s);
            index.insert(s, k);
        }
        FockBasis {
            n_sites,
            truncation: None,
            occupations,
            index,
            manifolds: ManifoldIndex { by_number },
        }
    }

    pub fn dim(&self) -> usize {
        self.occupations.len() / self.n_sites
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn truncation(&self) -> Option<Truncation> {
        self.truncation
    }

    pub fn occupation(&self, k: usize) -> &[u8] {
        &self.occupations[k * self.n_sites..(k + 1) * self.n_sites]
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    pub fn total_number(&self, k: usize) -> usize {
        self.occupation(k).iter().map(|&v| v as usize).sum()
    }

    pub fn manifolds(&self) -> &ManifoldIndex {
        &self.manifolds
    }

    pub fn manifold(&self, n: usize) -> &[usize] {
        self.manifolds.get(n)
    }

    pub fn vacuum(&self) -> usize {
        0
    }
}

fn enumerate_per_site(current: &mut Vec<u8>, site: usize, n_max: u8, out: &mut Vec<Vec<u8>>) {
    if site == current.len() {
        out.push(current.clone());
        return;
    }
    for n in 0..=n_max {
        current[site] = n;
        enumerate_per_site(current, site + 1, n_max, out);
    }
    current[site] = 0;
}

fn enumerate_total(current: &mut Vec<u8>, site: usize, remaining: u8, out: &mut Vec<Vec<u8>>) {
    if site == current.len() {
        out.push(current.clone());
        return;
    }
    for n in 0..=remaining {
        current[site] = n;
        enumerate_total(current, site + 1, remaining - n, out);
    }
    current[site] = 0;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Annihilate,
    Create,
    Number,
}

/// Ladder or number operator on one site. Creation drops transitions that
/// would leave the truncated basis.
pub fn site_operator(basis: &FockBasis, site: usize, kind: OperatorKind) -> SparseOperator {
    assert!(site < basis.n_sites(), "site {site} out of range");
    let dim = basis.dim();
    match kind {
        OperatorKind::Number => SparseOperator::from_triplets(
            dim,
            (0..dim)
                .map(|k| (k, k, C64::new(basis.occupation(k)[site] as f64, 0.0)))
                .filter(|t| t.2.re != 0.0),
        ),
        OperatorKind::Annihilate => {
            let mut trip = Vec::new();
            let mut probe = vec![0u8; basis.n_sites()];
            for k in 0..dim {
                let n = basis.occupation(k)[site];
                if n == 0 {
                    continue;
                }
                probe.copy_from_slice(basis.occupation(k));
                probe[site] -= 1;
                if let Some(i) = basis.index_of(&probe) {
                    trip.push((i, k, C64::new((n as f64).sqrt(), 0.0)));
                }
            }
            SparseOperator::from_triplets(dim, trip)
        }
        OperatorKind::Create => site_operator(basis, site, OperatorKind::Annihilate).adjoint(),
    }
}

/// Annihilation operators for every site.
pub fn annihilators(basis: &FockBasis) -> Vec<SparseOperator> {
    (0..basis.n_sites())
        .map(|s| site_operator(basis, s, OperatorKind::Annihilate))
        .collect()
}

/// Total photon number operator.
pub fn total_number_operator(basis: &FockBasis) -> SparseOperator {
    SparseOperator::from_triplets(
        basis.dim(),
        (0..basis.dim()).map(|k| (k, k, C64::new(basis.total_number(k) as f64, 0.0))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn per_site_dimensions() {
        assert_eq!(build_basis(3, 1).unwrap().dim(), 8);
        assert_eq!(build_basis(3, 5).unwrap().dim(), 216);
    }

    #[test]
    fn total_number_manifold_dimensions() {
        let b = FockBasis::new(14, Truncation::TotalNumber(3)).unwrap();
        // Oracle: C(S + n - 1, n) for S = 14.
        assert_eq!(b.manifolds().dims(), vec![1, 14, 105, 560]);
        assert_eq!(b.dim(), 680);
    }

    #[test]
    fn overflow_guard() {
        let err = FockBasis::with_limit(20, Truncation::PerSite(5), 1000).unwrap_err();
        assert!(matches!(err, Error::DimensionOverflow { .. }));
        assert!(FockBasis::new(3, Truncation::PerSite(0)).is_err());
    }

    #[test]
    fn ordering_puts_vacuum_first_and_single_photons_by_site() {
        let b = FockBasis::new(3, Truncation::TotalNumber(2)).unwrap();
        assert_eq!(b.occupation(0), &[0, 0, 0]);
        assert_eq!(b.occupation(1), &[1, 0, 0]);
        assert_eq!(b.occupation(2), &[0, 1, 0]);
        assert_eq!(b.occupation(3), &[0, 0, 1]);
    }

    #[test]
    fn ladder_elements() {
        let b = build_basis(3, 3).unwrap();
        let k = b.index_of(&[0, 2, 0]).unwrap();
        let n = site_operator(&b, 1, OperatorKind::Number);
        assert_eq!(n.get(k, k), C64::new(2.0, 0.0));
        let a = site_operator(&b, 1, OperatorKind::Annihilate);
        let down = b.index_of(&[0, 1, 0]).unwrap();
        assert!((a.get(down, k) - C64::new(2f64.sqrt(), 0.0)).norm() < 1e-15);
        assert_eq!(a.nnz(), 16 * 3);
    }

    #[test]
    fn commutator_is_identity_below_cutoff() {
        let n_max = 4;
        let b = build_basis(2, n_max).unwrap();
        let a = site_operator(&b, 0, OperatorKind::Annihilate).to_dense();
        let ad = a.adjoint();
        let comm = &a * &ad - &ad * &a;
        for k in 0..b.dim() {
            for l in 0..b.dim() {
                let expected = if k == l {
                    if b.occupation(k)[0] < n_max as u8 {
                        1.0
                    } else {
                        -(n_max as f64)
                    }
                } else {
                    0.0
                };
                assert!((comm[(k, l)] - C64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn from_states_requires_downward_closure() {
        let ok = FockBasis::from_states(2, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]);
        assert!(ok.is_ok());
        let bad = FockBasis::from_states(2, vec![vec![0, 0], vec![1, 1]]);
        assert!(bad.is_err());
    }

    proptest! {
        #[test]
        fn index_round_trips(sites in 1usize..5, n in 1u32..4, total in proptest::bool::ANY) {
            let t = if total { Truncation::TotalNumber(n) } else { Truncation::PerSite(n) };
            let b = FockBasis::new(sites, t).unwrap();
            prop_assert_eq!(b.dim(), t.dimension(sites).unwrap());
            for k in 0..b.dim() {
                prop_assert_eq!(b.index_of(b.occupation(k)), Some(k));
            }
            let covered: usize = b.manifolds().dims().iter().sum();
            prop_assert_eq!(covered, b.dim());
        }

        #[test]
        fn number_equals_create_annihilate(sites in 1usize..4, n in 1u32..4, site_pick in 0usize..4) {
            let b = FockBasis::new(sites, Truncation::PerSite(n)).unwrap();
            let s = site_pick % sites;
            let a = site_operator(&b, s, OperatorKind::Annihilate);
            let c = site_operator(&b, s, OperatorKind::Create);
            let num = site_operator(&b, s, OperatorKind::Number);
            prop_assert!((&c * &a).max_abs_diff(&num) < 1e-12);
            prop_assert!(c.max_abs_diff(&a.adjoint()) < 1e-15);
            // Different sites commute exactly.
            let other = site_operator(&b, (s + 1) % sites, OperatorKind::Annihilate);
            if sites > 1 {
                let oc = other.adjoint();
                prop_assert!((&a * &oc).max_abs_diff(&(&oc * &a)) < 1e-12);
                prop_assert!((&a * &other).max_abs_diff(&(&other * &a)) < 1e-12);
            }
        }
    }
}
