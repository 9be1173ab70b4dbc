//! Densities and normalized photon correlation functions.
//!
//! Every solver exposes its result through [`PhotonState`], which only has to
//! provide normal-ordered moments `<prod_i s_i^dag^k_i s_i^k_i>`.

use serde::{Deserialize, Serialize};

/// Densities below this floor make correlation functions undefined.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Anything that can produce normal-ordered photon moments.
pub trait PhotonState {
    fn n_sites(&self) -> usize;

    /// `<prod_i (s_i^dag)^k_i prod_i s_i^k_i>` for `factors = [(i, k_i), ...]`
    /// with distinct sites.
    fn moment(&self, factors: &[(usize, u32)]) -> f64;
}

/// Denominator used by [`g2_nonlocal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `<n_i>^2`.
    #[default]
    FirstSite,
    /// `<n_i> <n_j>`.
    Symmetric,
}

/// `<s^dag s>`.
pub fn density<S: PhotonState + ?Sized>(state: &S, site: usize) -> f64 {
    state.moment(&[(site, 1)]).max(0.0)
}

fn local_g<S: PhotonState + ?Sized>(state: &S, site: usize, order: u32) -> Option<f64> {
    let n = density(state, site);
    if n < DENSITY_FLOOR {
        return None;
    }
    Some(state.moment(&[(site, order)]).max(0.0) / n.powi(order as i32))
}

/// `<s^dag^2 s^2> / <s^dag s>^2`, or `None` below the density floor.
pub fn g2_local<S: PhotonState + ?Sized>(state: &S, site: usize) -> Option<f64> {
    local_g(state, site, 2)
}

/// `<s^dag^3 s^3> / <s^dag s>^3`, or `None` below the density floor.
pub fn g3_local<S: PhotonState + ?Sized>(state: &S, site: usize) -> Option<f64> {
    local_g(state, site, 3)
}

/// `<s_i^dag s_j^dag s_j s_i>` over `<n_i>^2` (default) or `<n_i><n_j>`.
pub fn g2_nonlocal<S: PhotonState + ?Sized>(
    state: &S,
    i: usize,
    j: usize,
    norm: Normalization,
) -> Option<f64> {
    if i == j {
        return g2_local(state, i);
    }
    let ni = density(state, i);
    if ni < DENSITY_FLOOR {
        return None;
    }
    let denom = match norm {
        Normalization::FirstSite => ni * ni,
        Normalization::Symmetric => {
            let nj = density(state, j);
            if nj < DENSITY_FLOOR {
                return None;
            }
            ni * nj
        }
    };
    Some(state.moment(&[(i, 1), (j, 1)]).max(0.0) / denom)
}

/// Observables of one state on a chosen set of sites and pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSet {
    pub n: Vec<f64>,
    pub g2_local: Vec<Option<f64>>,
    pub g3_local: Vec<Option<f64>>,
    pub g2_nonlocal: Vec<((usize, usize), Option<f64>)>,
}

impl ObservableSet {
    pub fn compute<S: PhotonState + ?Sized>(
        state: &S,
        pairs: &[(usize, usize)],
        norm: Normalization,
    ) -> Self {
        let sites = 0..state.n_sites();
        ObservableSet {
            n: sites.clone().map(|s| density(state, s)).collect(),
            g2_local: sites.clone().map(|s| g2_local(state, s)).collect(),
            g3_local: sites.map(|s| g3_local(state, s)).collect(),
            g2_nonlocal: pairs
                .iter()
                .map(|&(i, j)| ((i, j), g2_nonlocal(state, i, j, norm)))
                .collect(),
        }
    }

    /// Index and value of the largest density.
    pub fn brightest(&self) -> (usize, f64) {
        self.n
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
    }

    /// `n_num / n_den`, `None` if the denominator is below the floor.
    pub fn ratio(&self, num: usize, den: usize) -> Option<f64> {
        (self.n[den] >= DENSITY_FLOOR).then(|| self.n[num] / self.n[den])
    }
}

/// Formats an optional value for CSV output (`NaN` when undefined).
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.10e}"),
        None => "NaN".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::ClassicalField;
    use crate::C64;

    /// Single-mode state diagonal in the Fock basis.
    struct Diagonal(Vec<f64>);

    impl PhotonState for Diagonal {
        fn n_sites(&self) -> usize {
            1
        }
        fn moment(&self, factors: &[(usize, u32)]) -> f64 {
            let k = factors[0].1 as usize;
            self.0
                .iter()
                .enumerate()
                .filter(|(n, _)| *n >= k)
                .map(|(n, p)| p * ((n - k + 1)..=n).map(|x| x as f64).product::<f64>())
                .sum()
        }
    }

    fn fock(n: usize) -> Diagonal {
        let mut p = vec![0.0; n + 1];
        p[n] = 1.0;
        Diagonal(p)
    }

    #[test]
    fn fock_state_values() {
        assert_eq!(density(&fock(2), 0), 2.0);
        assert!((g2_local(&fock(2), 0).unwrap() - 0.5).abs() < 1e-15);
        assert!((g3_local(&fock(3), 0).unwrap() - 6.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn vacuum_is_undefined() {
        assert_eq!(density(&fock(0), 0), 0.0);
        assert_eq!(g2_local(&fock(0), 0), None);
        assert_eq!(g3_local(&fock(0), 0), None);
    }

    #[test]
    fn thermal_state_factorials() {
        let nbar: f64 = 0.3;
        let p: Vec<f64> = (0..200).map(|n| nbar.powi(n) / (1.0 + nbar).powi(n as i32 + 1)).collect();
        let st = Diagonal(p);
        assert!((g2_local(&st, 0).unwrap() - 2.0).abs() < 1e-10);
        assert!((g3_local(&st, 0).unwrap() - 6.0).abs() < 1e-10);
    }

    #[test]
    fn coherent_values() {
        let st = ClassicalField { amplitude: vec![C64::new(0.3, -0.2), C64::new(1.1, 0.4)] };
        assert!((g2_local(&st, 0).unwrap() - 1.0).abs() < 1e-12);
        assert!((g3_local(&st, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((g2_nonlocal(&st, 0, 1, Normalization::Symmetric).unwrap() - 1.0).abs() < 1e-12);
        let asym = g2_nonlocal(&st, 0, 1, Normalization::FirstSite).unwrap();
        assert!((asym - st.amplitude[1].norm_sqr() / st.amplitude[0].norm_sqr()).abs() < 1e-12);
        assert_eq!(g2_nonlocal(&st, 1, 1, Normalization::FirstSite), g2_local(&st, 1));
    }

    #[test]
    fn observable_set_layout() {
        let st = ClassicalField { amplitude: vec![C64::new(0.1, 0.0), C64::new(1.0, 0.0)] };
        let set = ObservableSet::compute(&st, &[(0, 1)], Normalization::FirstSite);
        assert_eq!(set.brightest().0, 1);
        assert!((set.ratio(0, 1).unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(fmt_opt(None), "NaN");
    }
}
