//! Corner-space renormalization for extended lattices.
//!
//! Unit cells are solved exactly in a total-number truncated Fock space.
//! Blocks are then merged pairwise along a balanced binary plan; at every
//! merge both block steady states are diagonalized, the `M` most probable
//! product states `|phi_a>|psi_b>` (weight `p_a q_b`) span the corner space,
//! and the steady state of the merged block is solved in that space with all
//! couplings between the two blocks switched on. Hopping terms crossing a
//! block boundary (including periodic wrap-around bonds, which only close at
//! the final merge) enter at the first merge that contains both endpoints.
//!
//! Every operator a later stage needs (mode operators for hopping and loss,
//! normal-ordered products for correlation functions) is tracked explicitly:
//! products of projected operators are not projections of products.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fock::{annihilators, FockBasis, Truncation};
use crate::lattice::{DriveMask, LatticeGraph, ModelParams};
use crate::linalg::hermitian_eigen_desc;
use crate::liouvillian::{build_hamiltonian, Lindbladian};
use crate::observables::{Normalization, ObservableSet, PhotonState};
use crate::sparse::SparseOperator;
use crate::steady::{steady_state_direct, SolverOptions};
use crate::{CMatrix, Error, Result, C64};

/// Normal-ordered operator `prod_i s_i^k_i`, sites ascending.
pub type OpKey = Vec<(usize, u32)>;

fn normalize_key(factors: &[(usize, u32)]) -> OpKey {
    let mut k: OpKey = factors.iter().copied().filter(|&(_, p)| p > 0).collect();
    k.sort();
    k
}

#[derive(Debug, Clone)]
pub struct CornerOptions {
    /// Total-number cutoff of each unit cell.
    pub leaf_truncation: u32,
    /// Corner dimension kept at every merge.
    pub m: usize,
    /// Site pairs whose nonlocal correlations are tracked.
    pub pairs: Vec<(usize, usize)>,
    /// Highest local moment order tracked (`g3` needs 3).
    pub max_order: u32,
    pub solver: SolverOptions,
    /// Directory for resumable block checkpoints.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for CornerOptions {
    fn default() -> Self {
        CornerOptions {
            leaf_truncation: 3,
            m: 200,
            pairs: Vec::new(),
            max_order: 3,
            solver: SolverOptions { verify_unique: false, ..Default::default() },
            checkpoint_dir: None,
        }
    }
}

/// Solved block: steady state and tracked operators in the block basis.
#[derive(Debug, Clone)]
pub struct Block {
    /// Global site ids, ascending.
    pub sites: Vec<usize>,
    /// Hamiltonian of the block with intra-block couplings only.
    pub h: CMatrix,
    pub ops: BTreeMap<OpKey, CMatrix>,
    pub rho: CMatrix,
    pub residual: f64,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn mode(&self, site: usize) -> &CMatrix {
        &self.ops[&vec![(site, 1)]]
    }
}

/// Selected product states of a merge.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerBasis {
    /// `(alpha, beta)` eigenstate indices of the two blocks.
    pub pairs: Vec<(usize, usize)>,
    /// `p_alpha q_beta`, non-increasing.
    pub weights: Vec<f64>,
}

impl CornerBasis {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// The `m` most probable products of two probability lists; ties go to the
/// lexicographically smaller `(alpha, beta)`.
pub fn select_pairs(p: &[f64], q: &[f64], m: usize) -> CornerBasis {
    let total = p.len() * q.len();
    let keep = if m > total {
        log::info!("corner dimension {m} exceeds joint dimension {total}; keeping all states");
        total
    } else {
        m
    };
    let mut all: Vec<(f64, usize, usize)> = Vec::with_capacity(total);
    for (a, &pa) in p.iter().enumerate() {
        for (b, &qb) in q.iter().enumerate() {
            all.push((pa.max(0.0) * qb.max(0.0), a, b));
        }
    }
    all.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((x.1, x.2).cmp(&(y.1, y.2)))
    });
    all.truncate(keep);
    CornerBasis {
        weights: all.iter().map(|t| t.0).collect(),
        pairs: all.iter().map(|t| (t.1, t.2)).collect(),
    }
}

/// Eigen-decomposition of both block states and the corner basis.
pub fn merge_blocks(rho_a: &CMatrix, rho_b: &CMatrix, m: usize) -> (CornerBasis, CMatrix, CMatrix) {
    let (p, phi) = hermitian_eigen_desc(rho_a);
    let (q, psi) = hermitian_eigen_desc(rho_b);
    (select_pairs(&p, &q, m), phi, psi)
}

/// `C[x, y] = A[a_x, a_y] B[b_x, b_y]` on the corner pairs; `None` is the identity.
fn corner_product(basis: &CornerBasis, a: Option<&CMatrix>, b: Option<&CMatrix>) -> CMatrix {
    let n = basis.len();
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    CMatrix::from_fn(n, n, |x, y| {
        let (ax, bx) = basis.pairs[x];
        let (ay, by) = basis.pairs[y];
        let fa = match a {
            Some(m) => m[(ax, ay)],
            None if ax == ay => one,
            None => zero,
        };
        if fa == zero {
            return zero;
        }
        let fb = match b {
            Some(m) => m[(bx, by)],
            None if bx == by => one,
            None => zero,
        };
        fa * fb
    })
}

/// Keys a block over `sites` must carry.
fn required_keys(sites: &[usize], global: &[OpKey]) -> Vec<OpKey> {
    let mut out: Vec<OpKey> = global
        .iter()
        .map(|k| k.iter().copied().filter(|(s, _)| sites.binary_search(s).is_ok()).collect::<OpKey>())
        .filter(|k| !k.is_empty())
        .collect();
    for &s in sites {
        out.push(vec![(s, 1)]);
    }
    out.sort();
    out.dedup();
    out
}

fn global_keys(n_sites: usize, opts: &CornerOptions) -> Vec<OpKey> {
    let mut keys = Vec::new();
    for s in 0..n_sites {
        for k in 1..=opts.max_order.max(1) {
            keys.push(vec![(s, k)]);
        }
    }
    for &(i, j) in &opts.pairs {
        if i != j {
            keys.push(normalize_key(&[(i, 1), (j, 1)]));
        }
    }
    keys
}

fn solve_dense(h: &CMatrix, jumps: Vec<CMatrix>, opts: &SolverOptions) -> Result<(CMatrix, f64)> {
    let l = Lindbladian::from_dense_parts(h, jumps)?;
    let sol = steady_state_direct(&l, opts)?;
    Ok((sol.physical.matrix().clone(), sol.report.residual))
}

/// Exact steady state of one isolated block (intra-block couplings only).
pub fn solve_block(
    graph: &LatticeGraph,
    params: &ModelParams,
    mask: &DriveMask,
    sites: &[usize],
    truncation: u32,
    keys: &[OpKey],
    opts: &SolverOptions,
) -> Result<Block> {
    let mut sites = sites.to_vec();
    sites.sort();
    let (local, _) = graph.induced(&sites);
    let basis = FockBasis::new(sites.len(), Truncation::TotalNumber(truncation))?;
    let h = build_hamiltonian(&local, params, &basis, &mask.restrict(&sites))?;
    let a = annihilators(&basis);
    let mut ops = BTreeMap::new();
    for key in required_keys(&sites, keys) {
        let mut o = SparseOperator::identity(basis.dim());
        for &(s, k) in &key {
            let pos = sites.binary_search(&s).expect("key restricted to block");
            for _ in 0..k {
                o = &a[pos] * &o;
            }
        }
        ops.insert(key, o.to_dense());
    }
    let g = C64::new(params.gamma.sqrt(), 0.0);
    let jumps: Vec<SparseOperator> = a.iter().map(|x| x.scale(g)).collect();
    let l = Lindbladian::from_parts(&h, jumps)?;
    let sol = steady_state_direct(&l, opts)?;
    Ok(Block {
        sites,
        h: h.to_dense(),
        ops,
        rho: sol.physical.matrix().clone(),
        residual: sol.report.residual,
    })
}

/// Diagnostics of one merge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeInfo {
    pub n_sites: usize,
    pub dim_a: usize,
    pub dim_b: usize,
    pub m: usize,
    /// `1 - sum of kept weights p_a q_b`.
    pub discarded_weight: f64,
    pub residual: f64,
}

/// Merges two solved blocks and solves the merged block in the corner space.
#[allow(clippy::too_many_arguments)]
pub fn merge(
    graph: &LatticeGraph,
    params: &ModelParams,
    a: &Block,
    b: &Block,
    m: usize,
    keys: &[OpKey],
    opts: &SolverOptions,
) -> Result<(Block, MergeInfo)> {
    let (basis, phi, psi) = merge_blocks(&a.rho, &b.rho, m);
    let rot_a = |x: &CMatrix| phi.adjoint() * x * &phi;
    let rot_b = |x: &CMatrix| psi.adjoint() * x * &psi;
    let ha = rot_a(&a.h);
    let hb = rot_b(&b.h);
    let mut h = corner_product(&basis, Some(&ha), None) + corner_product(&basis, None, Some(&hb));
    let mut modes_a: BTreeMap<usize, CMatrix> = BTreeMap::new();
    let mut modes_b: BTreeMap<usize, CMatrix> = BTreeMap::new();
    for &s in &a.sites {
        modes_a.insert(s, rot_a(a.mode(s)));
    }
    for &s in &b.sites {
        modes_b.insert(s, rot_b(b.mode(s)));
    }
    let j = C64::new(params.hopping, 0.0);
    for e in &graph.edges {
        let (ia, jb) = if modes_a.contains_key(&e.i) && modes_b.contains_key(&e.j) {
            (e.i, e.j)
        } else if modes_a.contains_key(&e.j) && modes_b.contains_key(&e.i) {
            (e.j, e.i)
        } else {
            continue;
        };
        let sa = &modes_a[&ia];
        let sb = &modes_b[&jb];
        let hop = corner_product(&basis, Some(&sa.adjoint()), Some(sb));
        h -= (&hop + hop.adjoint()) * j;
    }
    let mut sites: Vec<usize> = a.sites.iter().chain(&b.sites).copied().collect();
    sites.sort();
    let mut ops = BTreeMap::new();
    for key in required_keys(&sites, keys) {
        let ka: OpKey = key.iter().copied().filter(|(s, _)| a.sites.binary_search(s).is_ok()).collect();
        let kb: OpKey = key.iter().copied().filter(|(s, _)| b.sites.binary_search(s).is_ok()).collect();
        let oa = (!ka.is_empty()).then(|| rot_a(&a.ops[&ka]));
        let ob = (!kb.is_empty()).then(|| rot_b(&b.ops[&kb]));
        ops.insert(key, corner_product(&basis, oa.as_ref(), ob.as_ref()));
    }
    let g = C64::new(params.gamma.sqrt(), 0.0);
    let jumps: Vec<CMatrix> = sites.iter().map(|&s| &ops[&vec![(s, 1)]] * g).collect();
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let (rho, residual) = solve_dense(&h, jumps, opts)?;
    let info = MergeInfo {
        n_sites: sites.len(),
        dim_a: a.dim(),
        dim_b: b.dim(),
        m: basis.len(),
        discarded_weight: (1.0 - basis.weights.iter().sum::<f64>()).max(0.0),
        residual,
    };
    Ok((Block { sites, h, ops, rho, residual }, info))
}

/// Steady state in the final corner space.
#[derive(Debug, Clone)]
pub struct CornerState {
    pub block: Block,
    n_sites: usize,
}

impl PhotonState for CornerState {
    fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// `tr(O rho O^dag)`; `NaN` for untracked products.
    fn moment(&self, factors: &[(usize, u32)]) -> f64 {
        let key = normalize_key(factors);
        if key.is_empty() {
            return self.block.rho.trace().re;
        }
        match self.block.ops.get(&key) {
            Some(o) => {
                let y = o * &self.block.rho;
                y.component_mul(&o.conjugate()).sum().re
            }
            None => f64::NAN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CornerResult {
    pub state: CornerState,
    pub merges: Vec<MergeInfo>,
}

impl CornerResult {
    /// Largest corner dimension used.
    pub fn m_used(&self) -> usize {
        self.merges.iter().map(|m| m.m).max().unwrap_or(self.state.block.dim())
    }

    pub fn residual(&self) -> f64 {
        self.merges.last().map(|m| m.residual).unwrap_or(self.state.block.residual)
    }
}

/// Unit-cell site groups in cell order.
pub fn cell_groups(graph: &LatticeGraph) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in &graph.sites {
        groups.entry(s.cell).or_default().push(s.id);
    }
    groups.into_values().collect()
}

enum Plan {
    Leaf(Vec<usize>),
    Merge(Box<Plan>, Box<Plan>),
}

/// Balanced binary merge plan over `groups` in order (row-major cells in 2D).
fn balanced_plan(groups: &[Vec<usize>]) -> Plan {
    if groups.len() == 1 {
        return Plan::Leaf(groups[0].clone());
    }
    let mid = groups.len() / 2;
    Plan::Merge(Box::new(balanced_plan(&groups[..mid])), Box::new(balanced_plan(&groups[mid..])))
}

struct Ctx<'a> {
    graph: &'a LatticeGraph,
    params: &'a ModelParams,
    mask: &'a DriveMask,
    keys: Vec<OpKey>,
    opts: &'a CornerOptions,
}

fn run_plan(plan: &Plan, ctx: &Ctx) -> Result<(Block, Vec<MergeInfo>)> {
    match plan {
        Plan::Leaf(sites) => {
            let path = checkpoint_path(ctx, sites);
            if let Some(b) = path.as_deref().and_then(|p| load_checkpoint(p, ctx)) {
                return Ok((b, Vec::new()));
            }
            let b = solve_block(
                ctx.graph,
                ctx.params,
                ctx.mask,
                sites,
                ctx.opts.leaf_truncation,
                &ctx.keys,
                &ctx.opts.solver,
            )?;
            if let Some(p) = path {
                save_checkpoint(&p, &b, ctx)?;
            }
            Ok((b, Vec::new()))
        }
        Plan::Merge(l, r) => {
            let (left, right) = rayon::join(|| run_plan(l, ctx), || run_plan(r, ctx));
            let (a, mut info_a) = left?;
            let (b, info_b) = right?;
            info_a.extend(info_b);
            let mut sites: Vec<usize> = a.sites.iter().chain(&b.sites).copied().collect();
            sites.sort();
            let path = checkpoint_path(ctx, &sites);
            if let Some(blk) = path.as_deref().and_then(|p| load_checkpoint(p, ctx)) {
                return Ok((blk, info_a));
            }
            let (merged, info) = merge(ctx.graph, ctx.params, &a, &b, ctx.opts.m, &ctx.keys, &ctx.opts.solver)?;
            log::debug!(
                "merged {} sites: {}x{} -> {} (discarded {:.2e}, residual {:.2e})",
                info.n_sites,
                info.dim_a,
                info.dim_b,
                info.m,
                info.discarded_weight,
                info.residual
            );
            if let Some(p) = path {
                save_checkpoint(&p, &merged, ctx)?;
            }
            info_a.push(info);
            Ok((merged, info_a))
        }
    }
}

/// Corner-space steady state of the whole lattice.
pub fn corner_steady_state(
    graph: &LatticeGraph,
    params: &ModelParams,
    mask: &DriveMask,
    opts: &CornerOptions,
) -> Result<CornerResult> {
    params.validate()?;
    graph.check_invariants()?;
    if mask.amplitude.len() != graph.n_sites() {
        return Err(Error::InvalidParams("drive mask length mismatch".into()));
    }
    if opts.m == 0 {
        return Err(Error::InvalidParams("corner dimension must be positive".into()));
    }
    if let Some(dir) = &opts.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let groups = cell_groups(graph);
    let plan = balanced_plan(&groups);
    let ctx = Ctx { graph, params, mask, keys: global_keys(graph.n_sites(), opts), opts };
    let (block, merges) = run_plan(&plan, &ctx)?;
    Ok(CornerResult { state: CornerState { block, n_sites: graph.n_sites() }, merges })
}

/// One row of an `M` scan.
#[derive(Debug, Clone, Serialize)]
pub struct MScanRow {
    pub m: usize,
    pub m_used: usize,
    pub observables: ObservableSet,
    pub residual: f64,
    /// Largest relative change of densities and local `g2` vs the previous row.
    pub drift: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MConvergence {
    pub rows: Vec<MScanRow>,
    /// Final drift below 1%.
    pub converged: bool,
    /// Drift shrinks from row to row.
    pub monotone: bool,
}

fn max_rel_change(a: &ObservableSet, b: &ObservableSet) -> f64 {
    let rel = |x: f64, y: f64| {
        let s = x.abs().max(y.abs());
        if s < 1e-14 {
            0.0
        } else {
            (x - y).abs() / s
        }
    };
    let mut worst: f64 = 0.0;
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

/// Runs the corner solver for every `M` in `m_list` (ascending).
pub fn corner_m_sweep(
    graph: &LatticeGraph,
    params: &ModelParams,
    mask: &DriveMask,
    opts: &CornerOptions,
    m_list: &[usize],
    norm: Normalization,
) -> Result<MConvergence> {
    let mut rows: Vec<MScanRow> = Vec::new();
    for &m in m_list {
        let mut o = opts.clone();
        o.m = m;
        let res = corner_steady_state(graph, params, mask, &o)?;
        let obs = ObservableSet::compute(&res.state, &opts.pairs, norm);
        let drift = rows.last().map(|r| max_rel_change(&r.observables, &obs));
        rows.push(MScanRow { m, m_used: res.m_used(), residual: res.residual(), observables: obs, drift });
    }
    let drifts: Vec<f64> = rows.iter().filter_map(|r| r.drift).collect();
    let converged = drifts.last().is_some_and(|&d| d < 1e-2);
    let monotone = drifts.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) || w[1] < 1e-12);
    if !converged {
        log::warn!("corner M scan not converged: drifts {drifts:?}");
    }
    Ok(MConvergence { rows, converged, monotone })
}

#[derive(Serialize, Deserialize)]
struct StoredMatrix {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl StoredMatrix {
    fn from(m: &CMatrix) -> Self {
        StoredMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
    }

    fn to_matrix(&self) -> Option<CMatrix> {
        if self.re.len() != self.rows * self.cols || self.im.len() != self.re.len() {
            return None;
        }
        Some(CMatrix::from_iterator(
            self.rows,
            self.cols,
            self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)),
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct BlockCheckpoint {
    params: ModelParams,
    drive: Vec<C64>,
    leaf_truncation: u32,
    m: usize,
    sites: Vec<usize>,
    h: StoredMatrix,
    ops: Vec<(OpKey, StoredMatrix)>,
    rho: StoredMatrix,
    residual: f64,
}

fn checkpoint_path(ctx: &Ctx, sites: &[usize]) -> Option<PathBuf> {
    let dir = ctx.opts.checkpoint_dir.as_ref()?;
    let first = sites.first().copied().unwrap_or(0);
    let last = sites.last().copied().unwrap_or(0);
    Some(dir.join(format!("block_{first}-{last}_n{}.json", sites.len())))
}

fn save_checkpoint(path: &Path, b: &Block, ctx: &Ctx) -> Result<()> {
    let cp = BlockCheckpoint {
        params: *ctx.params,
        drive: ctx.mask.restrict(&b.sites).amplitude,
        leaf_truncation: ctx.opts.leaf_truncation,
        m: ctx.opts.m,
        sites: b.sites.clone(),
        h: StoredMatrix::from(&b.h),
        ops: b.ops.iter().map(|(k, v)| (k.clone(), StoredMatrix::from(v))).collect(),
        rho: StoredMatrix::from(&b.rho),
        residual: b.residual,
    };
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(f, &cp)?;
    Ok(())
}

fn is_leaf(graph: &LatticeGraph, sites: &[usize]) -> bool {
    sites.iter().all(|&s| graph.sites[s].cell == graph.sites[sites[0]].cell)
}

/// Loads a checkpoint if it exists and was produced with identical inputs.
fn load_checkpoint(path: &Path, ctx: &Ctx) -> Option<Block> {
    let f = std::fs::File::open(path).ok()?;
    let cp: BlockCheckpoint = serde_json::from_reader(std::io::BufReader::new(f)).ok()?;
    let matches = cp.params == *ctx.params
        && cp.drive == ctx.mask.restrict(&cp.sites).amplitude
        && cp.leaf_truncation == ctx.opts.leaf_truncation
        && (is_leaf(ctx.graph, &cp.sites) || cp.m == ctx.opts.m);
    if !matches {
        log::info!("ignoring stale checkpoint {}", path.display());
        return None;
    }
    let mut ops = BTreeMap::new();
    for (k, v) in cp.ops {
        ops.insert(k, v.to_matrix()?);
    }
    for key in required_keys(&cp.sites, &ctx.keys) {
        if !ops.contains_key(&key) {
            return None;
        }
    }
    log::info!("resumed block from {}", path.display());
    Some(Block { sites: cp.sites, h: cp.h.to_matrix()?, ops, rho: cp.rho.to_matrix()?, residual: cp.residual })
}
