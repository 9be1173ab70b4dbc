//! Lattice geometries, site roles, model parameters and drive masks.
//!
//! Three geometries are supported:
//!
//! - `Cell3`: three cavities `a - b - c` in an open chain, drive on `c`.
//! - `Lieb1d`: unit cells `(a_i, b_i, c_i)` with hoppings `a_i-b_i`,
//!   `b_i-c_i` and `a_i-b_{i+1}`. With open boundaries the last `a` site has
//!   no right partner and is dropped, so `n` cells hold `3n - 1` sites and
//!   the backbone reads `b-a-b-...-a-b`.
//! - `Lieb2d`: line-centred square lattice. The corner site of each cell is
//!   the dark `B` site, the horizontal edge centre is `A`, the vertical edge
//!   centre is `C`.
//!
//! `B` sites carry no amplitude in any flat-band single-particle state.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Above this many sites an open 2D lattice is built but flagged.
const OPEN_2D_DESK_SITES: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SiteRole {
    A,
    B,
    C,
}

impl SiteRole {
    pub fn letter(self) -> char {
        match self {
            SiteRole::A => 'a',
            SiteRole::B => 'b',
            SiteRole::C => 'c',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Cell3,
    Lieb1d,
    Lieb2d,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub id: usize,
    pub role: SiteRole,
    /// Unit cell the site belongs to (row-major `x + nx * y` in 2D).
    pub cell: usize,
}

/// Unordered hopping bond; stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
}

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        Edge {
            i: a.min(b),
            j: a.max(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeGraph {
    pub geometry: Geometry,
    pub boundary: Boundary,
    /// Cells along x (and y for 2D).
    pub cells: (usize, usize),
    pub sites: Vec<Site>,
    pub edges: Vec<Edge>,
}

impl LatticeGraph {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.0 * self.cells.1
    }

    pub fn role(&self, site: usize) -> SiteRole {
        self.sites[site].role
    }

    /// Site ids with the given role, in id order.
    pub fn sites_with_role(&self, role: SiteRole) -> Vec<usize> {
        self.sites
            .iter()
            .filter(|s| s.role == role)
            .map(|s| s.id)
            .collect()
    }

    /// Neighbours of every site (with multiplicity one per edge).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_sites()];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        adj
    }

    /// Short human-readable label, e.g. `b` for the cell3 centre or `b3`.
    pub fn label(&self, site: usize) -> String {
        let s = &self.sites[site];
        if self.geometry == Geometry::Cell3 {
            s.role.letter().to_string()
        } else {
            let rank = self
                .sites
                .iter()
                .filter(|o| o.role == s.role && o.id < site)
                .count();
            format!("{}{}", s.role.letter(), rank)
        }
    }

    /// The sub-graph induced by `sites` (edges with both ends inside), with
    /// sites renumbered in the given order. Returns the graph and the map
    /// local id -> global id.
    pub fn induced(&self, sites: &[usize]) -> (LatticeGraph, Vec<usize>) {
        let mut local = vec![usize::MAX; self.n_sites()];
        for (k, &s) in sites.iter().enumerate() {
            local[s] = k;
        }
        let new_sites = sites
            .iter()
            .enumerate()
            .map(|(k, &s)| Site {
                id: k,
                role: self.sites[s].role,
                cell: self.sites[s].cell,
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| local[e.i] != usize::MAX && local[e.j] != usize::MAX)
            .map(|e| Edge::new(local[e.i], local[e.j]))
            .collect();
        (
            LatticeGraph {
                geometry: self.geometry,
                boundary: Boundary::Open,
                cells: self.cells,
                sites: new_sites,
                edges,
            },
            sites.to_vec(),
        )
    }

    pub fn check_invariants(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            if e.i == e.j {
                return Err(Error::InvalidLattice(format!("self loop on site {}", e.i)));
            }
            if e.j >= self.n_sites() {
                return Err(Error::InvalidLattice(format!("edge to missing site {}", e.j)));
            }
            if !seen.insert(*e) {
                return Err(Error::InvalidLattice(format!(
                    "duplicate edge {}-{}",
                    e.i, e.j
                )));
            }
        }
        Ok(())
    }
}

/// Builds one of the supported geometries. `n_cells` is the number of cells
/// along each direction (2D lattices are square, see [`build_lieb2d`] for
/// rectangles); `Cell3` ignores it.
pub fn build_lattice(geometry: Geometry, n_cells: usize, boundary: Boundary) -> Result<LatticeGraph> {
    match geometry {
        Geometry::Cell3 => build_cell3(),
        Geometry::Lieb1d => build_lieb1d(n_cells, boundary),
        Geometry::Lieb2d => build_lieb2d(n_cells, n_cells, boundary),
    }
}

fn build_cell3() -> Result<LatticeGraph> {
    let g = LatticeGraph {
        geometry: Geometry::Cell3,
        boundary: Boundary::Open,
        cells: (1, 1),
        sites: vec![
            Site { id: 0, role: SiteRole::A, cell: 0 },
            Site { id: 1, role: SiteRole::B, cell: 0 },
            Site { id: 2, role: SiteRole::C, cell: 0 },
        ],
        edges: vec![Edge::new(0, 1), Edge::new(1, 2)],
    };
    g.check_invariants()?;
    Ok(g)
}

fn build_lieb1d(n: usize, boundary: Boundary) -> Result<LatticeGraph> {
    if n == 0 {
        return Err(Error::InvalidLattice("lieb1d needs at least one cell".into()));
    }
    if boundary == Boundary::Periodic && n < 2 {
        return Err(Error::InvalidLattice(
            "periodic lieb1d needs at least 2 cells (1 cell folds a-b onto itself)".into(),
        ));
    }
    // Site layout per cell: a, b, c. Open chains drop the last a.
    let mut sites = Vec::new();
    let mut a_id = vec![None; n];
    let mut b_id = vec![0; n];
    let mut c_id = vec![0; n];
    for cell in 0..n {
        if boundary == Boundary::Periodic || cell + 1 < n {
            a_id[cell] = Some(sites.len());
            sites.push(Site { id: sites.len(), role: SiteRole::A, cell });
        }
        b_id[cell] = sites.len();
        sites.push(Site { id: sites.len(), role: SiteRole::B, cell });
        c_id[cell] = sites.len();
        sites.push(Site { id: sites.len(), role: SiteRole::C, cell });
    }
    let mut edges = Vec::new();
    for cell in 0..n {
        if let Some(a) = a_id[cell] {
            edges.push(Edge::new(a, b_id[cell]));
        }
        edges.push(Edge::new(b_id[cell], c_id[cell]));
        if let Some(a) = a_id[cell] {
            edges.push(Edge::new(a, b_id[(cell + 1) % n]));
        }
    }
    let g = LatticeGraph {
        geometry: Geometry::Lieb1d,
        boundary,
        cells: (n, 1),
        sites,
        edges,
    };
    g.check_invariants()?;
    Ok(g)
}

/// Rectangular 2D Lieb lattice with `nx x ny` cells.
pub fn build_lieb2d(nx: usize, ny: usize, boundary: Boundary) -> Result<LatticeGraph> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidLattice("lieb2d needs at least one cell".into()));
    }
    if boundary == Boundary::Periodic && (nx < 2 || ny < 2) {
        return Err(Error::InvalidLattice(
            "periodic lieb2d needs at least 2 cells per direction".into(),
        ));
    }
    if boundary == Boundary::Open && 3 * nx * ny > OPEN_2D_DESK_SITES {
        log::warn!(
            "open lieb2d with {} sites is beyond desk scale for the exact solvers",
            3 * nx * ny
        );
    }
    let cell_of = |x: usize, y: usize| x + nx * y;
    // Per cell: b (corner), a (horizontal edge centre), c (vertical edge centre).
    let b = |x: usize, y: usize| 3 * cell_of(x, y);
    let a = |x: usize, y: usize| 3 * cell_of(x, y) + 1;
    let c = |x: usize, y: usize| 3 * cell_of(x, y) + 2;
    let mut sites = Vec::with_capacity(3 * nx * ny);
    for y in 0..ny {
        for x in 0..nx {
            let cell = cell_of(x, y);
            for role in [SiteRole::B, SiteRole::A, SiteRole::C] {
                sites.push(Site { id: sites.len(), role, cell });
            }
        }
    }
    let mut edges = Vec::new();
    for y in 0..ny {
        for x in 0..nx {
            edges.push(Edge::new(a(x, y), b(x, y)));
            edges.push(Edge::new(c(x, y), b(x, y)));
            let right = x + 1 < nx || boundary == Boundary::Periodic;
            let up = y + 1 < ny || boundary == Boundary::Periodic;
            if right {
                edges.push(Edge::new(a(x, y), b((x + 1) % nx, y)));
            }
            if up {
                edges.push(Edge::new(c(x, y), b(x, (y + 1) % ny)));
            }
        }
    }
    let g = LatticeGraph {
        geometry: Geometry::Lieb2d,
        boundary,
        cells: (nx, ny),
        sites,
        edges,
    };
    g.check_invariants()?;
    Ok(g)
}

/// Model parameters, all in units of the loss rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Pump-cavity detuning `omega_p - omega_c`.
    #[serde(rename = "Delta")]
    pub detuning: f64,
    #[serde(rename = "J")]
    pub hopping: f64,
    #[serde(rename = "U")]
    pub interaction: f64,
    /// Drive amplitude (real, non-negative).
    #[serde(rename = "F")]
    pub drive: f64,
    #[serde(default = "unit_gamma")]
    pub gamma: f64,
}

fn unit_gamma() -> f64 {
    1.0
}

impl ModelParams {
    pub fn new(detuning: f64, hopping: f64, interaction: f64, drive: f64) -> Self {
        ModelParams {
            detuning,
            hopping,
            interaction,
            drive,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.detuning, self.hopping, self.interaction, self.drive, self.gamma]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidParams(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.hopping < 0.0 || self.interaction < 0.0 || self.drive < 0.0 {
            return Err(Error::InvalidParams(
                "J, U and F must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveScheme {
    /// Only `C` sites are driven.
    Partial,
    /// Every site is driven.
    Uniform,
}

/// Coherent drive amplitude per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveMask {
    pub amplitude: Vec<C64>,
}

impl DriveMask {
    pub fn zeros(n_sites: usize) -> Self {
        DriveMask {
            amplitude: vec![C64::new(0.0, 0.0); n_sites],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.amplitude.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn nonzero_count(&self) -> usize {
        self.amplitude.iter().filter(|a| a.norm() > 0.0).count()
    }

    /// Restriction to a subset of sites (in the given order).
    pub fn restrict(&self, sites: &[usize]) -> DriveMask {
        DriveMask {
            amplitude: sites.iter().map(|&s| self.amplitude[s]).collect(),
        }
    }
}

pub fn drive_mask(graph: &LatticeGraph, scheme: DriveScheme, f: f64) -> DriveMask {
    let amplitude = graph
        .sites
        .iter()
        .map(|s| match scheme {
            DriveScheme::Uniform => C64::new(f, 0.0),
            DriveScheme::Partial if s.role == SiteRole::C => C64::new(f, 0.0),
            DriveScheme::Partial => C64::new(0.0, 0.0),
        })
        .collect();
    DriveMask { amplitude }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    #[test]
    fn lieb1d_periodic_twelve_cells() {
        let g = build_lattice(Geometry::Lieb1d, 12, Boundary::Periodic).unwrap();
        assert_eq!(g.n_sites(), 36);
        assert_eq!(g.edges.len(), 36);
        // Every cell has the same local pattern: a-b, b-c, a-b(next).
        let adj = g.adjacency();
        for s in &g.sites {
            let deg = adj[s.id].len();
            match s.role {
                SiteRole::A => assert_eq!(deg, 2),
                SiteRole::B => assert_eq!(deg, 3),
                SiteRole::C => assert_eq!(deg, 1),
            }
        }
        let a0 = g.sites_with_role(SiteRole::A)[11];
        let b0 = g.sites_with_role(SiteRole::B)[0];
        assert!(g.edges.contains(&Edge::new(a0, b0)), "wrap-around bond missing");
    }

    #[test]
    fn cell3_geometry() {
        let g = build_lattice(Geometry::Cell3, 7, Boundary::Periodic).unwrap();
        assert_eq!(g.n_sites(), 3);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.role(1), SiteRole::B);
        assert_eq!(g.label(1), "b");
    }

    #[test]
    fn single_periodic_cell_is_rejected() {
        assert!(build_lattice(Geometry::Lieb1d, 1, Boundary::Periodic).is_err());
        assert!(build_lattice(Geometry::Lieb1d, 0, Boundary::Open).is_err());
        assert!(build_lieb2d(1, 3, Boundary::Periodic).is_err());
    }

    #[test]
    fn open_chain_of_fourteen_sites() {
        let g = build_lattice(Geometry::Lieb1d, 5, Boundary::Open).unwrap();
        assert_eq!(g.n_sites(), 14);
        assert_eq!(g.sites_with_role(SiteRole::B).len(), 5);
        assert_eq!(g.sites_with_role(SiteRole::A).len(), 4);
        assert_eq!(g.sites_with_role(SiteRole::C).len(), 5);
        // Backbone b-a-b-a-b-a-b-a-b plus one c per b.
        assert_eq!(g.edges.len(), 8 + 5);
        let adj = g.adjacency();
        for c in g.sites_with_role(SiteRole::C) {
            assert_eq!(adj[c].len(), 1);
            assert_eq!(g.role(adj[c][0]), SiteRole::B);
        }
    }

    #[test]
    fn open_chain_mirror_symmetry() {
        let g = build_lattice(Geometry::Lieb1d, 5, Boundary::Open).unwrap();
        let perm = mirror_permutation(&g);
        let edges: BTreeSet<Edge> = g.edges.iter().copied().collect();
        let mapped: BTreeSet<Edge> = g.edges.iter().map(|e| Edge::new(perm[e.i], perm[e.j])).collect();
        assert_eq!(edges, mapped);
        for s in &g.sites {
            assert_eq!(s.role, g.role(perm[s.id]));
        }
    }

    /// Reverses the role-ordered chain: the k-th site of a role maps onto
    /// the k-th from the end.
    pub(crate) fn mirror_permutation(g: &LatticeGraph) -> Vec<usize> {
        let mut perm = vec![0; g.n_sites()];
        for role in [SiteRole::A, SiteRole::B, SiteRole::C] {
            let ids = g.sites_with_role(role);
            for (k, &id) in ids.iter().enumerate() {
                perm[id] = ids[ids.len() - 1 - k];
            }
        }
        perm
    }

    #[test]
    fn lieb2d_counts() {
        let g = build_lattice(Geometry::Lieb2d, 4, Boundary::Periodic).unwrap();
        assert_eq!(g.n_sites(), 48);
        assert_eq!(g.edges.len(), 64);
        let open = build_lieb2d(2, 2, Boundary::Open).unwrap();
        assert_eq!(open.edges.len(), 8 + 2 + 2);
    }

    #[test]
    fn drive_masks() {
        let g = build_lattice(Geometry::Cell3, 1, Boundary::Open).unwrap();
        let m = drive_mask(&g, DriveScheme::Partial, 1.0);
        assert_eq!(m.amplitude[2], C64::new(1.0, 0.0));
        assert_eq!(m.amplitude[0], C64::new(0.0, 0.0));
        assert_eq!(m.amplitude[1], C64::new(0.0, 0.0));

        let l = build_lattice(Geometry::Lieb1d, 12, Boundary::Periodic).unwrap();
        let u = drive_mask(&l, DriveScheme::Uniform, 0.1);
        assert_eq!(u.amplitude.len(), 36);
        assert!(u.amplitude.iter().all(|a| *a == C64::new(0.1, 0.0)));
        let p = drive_mask(&l, DriveScheme::Partial, 0.1);
        assert_eq!(p.nonzero_count(), l.sites_with_role(SiteRole::C).len());

        let zero = drive_mask(&l, DriveScheme::Partial, 0.0);
        assert_eq!(zero.nonzero_count(), 0);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 5.0, 0.1, 1.0).validate().is_ok());
        assert!(ModelParams::new(0.0, -1.0, 0.1, 1.0).validate().is_err());
        let mut p = ModelParams::new(0.0, 1.0, 0.1, 1.0);
        p.gamma = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn graph_json_round_trip() {
        let g = build_lattice(Geometry::Lieb1d, 3, Boundary::Periodic).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: LatticeGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
        assert!(s.contains("\"periodic\""));
    }
}
