//! Experiment configuration and the sweep driver behind the command line.
//!
//! A config names one lattice, one parameter point, one solver and at most
//! one swept parameter. Every sweep point becomes one CSV row; failures are
//! recorded in the row's `status` column and the sweep carries on.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corner::{corner_m_sweep, corner_steady_state, CornerOptions};
use crate::fock::Truncation;
use crate::lattice::{
    build_lattice, build_lieb2d, drive_mask, Boundary, DriveScheme, Geometry, LatticeGraph,
    ModelParams, SiteRole,
};
use crate::meanfield::{gp_rhs, gp_steady_state};
use crate::observables::{fmt_opt, Normalization, ObservableSet, DENSITY_FLOOR};
use crate::spectra::{
    band_rows, manifold_probabilities, reference_basis_cell3, single_particle_spectrum,
    write_band_csv, write_two_photon_csv,
};
use crate::steady::{cutoff_convergence, DisplacementMode, ExactProblem, NumberScaling, SolverOptions};
use crate::weakpump::{weak_pump_observables, weak_pump_state};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Evolve,
    Meanfield,
    Weakpump,
    Corner,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_lowercase()))
            .map_err(|_| Error::Config(format!("unknown solver '{s}'")))
    }
}

/// Cell count: one number for chains (and square 2D lattices) or `[nx, ny]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cells {
    Line(usize),
    Rect([usize; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub geometry: Geometry,
    #[serde(default = "one_cell")]
    pub cells: Cells,
    #[serde(default = "open_boundary")]
    pub boundary: Boundary,
}

fn one_cell() -> Cells {
    Cells::Line(1)
}

fn open_boundary() -> Boundary {
    Boundary::Open
}

impl LatticeSpec {
    pub fn build(&self) -> Result<LatticeGraph> {
        match (self.geometry, self.cells) {
            (Geometry::Lieb2d, Cells::Rect([nx, ny])) => build_lieb2d(nx, ny, self.boundary),
            (_, Cells::Rect(_)) => Err(Error::Config("[nx, ny] cells only apply to lieb2d".into())),
            (g, Cells::Line(n)) => build_lattice(g, n, self.boundary),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Delta,
    F,
    J,
    U,
    #[serde(rename = "none")]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: GridScale,
}

/// Swept parameter with either explicit values or a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: Axis,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: Option<Grid>,
}

impl Sweep {
    pub fn points(&self) -> Result<Vec<f64>> {
        match (&self.values, &self.grid) {
            (Some(_), Some(_)) => Err(Error::Config("sweep takes values or grid, not both".into())),
            (Some(v), None) => Ok(v.clone()),
            (None, Some(g)) => g.points(),
            (None, None) => Err(Error::Config("sweep needs values or a grid".into())),
        }
    }
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if self.points == 0 {
            return Err(Error::Config("grid needs at least one point".into()));
        }
        if self.scale == GridScale::Log && (self.start <= 0.0 || self.stop <= 0.0) {
            return Err(Error::Config("log grid needs positive bounds".into()));
        }
        let n = self.points;
        let t = |k: usize| if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
        Ok((0..n)
            .map(|k| match self.scale {
                GridScale::Linear => self.start + (self.stop - self.start) * t(k),
                GridScale::Log => {
                    let (a, b) = (self.start.log10(), self.stop.log10());
                    10f64.powf(a + (b - a) * t(k))
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactSettings {
    #[serde(default = "default_truncation")]
    pub truncation: Truncation,
    #[serde(default)]
    pub displacement: DisplacementMode,
    #[serde(default)]
    pub scaling: NumberScaling,
    /// Ascending cutoffs for a convergence scan; the last one is reported.
    #[serde(default)]
    pub cutoffs: Option<Vec<u32>>,
    #[serde(default = "yes")]
    pub verify_unique: bool,
}

fn default_truncation() -> Truncation {
    Truncation::PerSite(5)
}

fn yes() -> bool {
    true
}

impl Default for ExactSettings {
    fn default() -> Self {
        ExactSettings {
            truncation: default_truncation(),
            displacement: DisplacementMode::None,
            scaling: NumberScaling::Auto,
            cutoffs: None,
            verify_unique: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSettings {
    pub t_max: f64,
    pub tol: f64,
}

impl Default for EvolveSettings {
    fn default() -> Self {
        EvolveSettings { t_max: 500.0, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakPumpSettings {
    pub n_max: u32,
}

impl Default for WeakPumpSettings {
    fn default() -> Self {
        WeakPumpSettings { n_max: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerSettings {
    #[serde(default = "three")]
    pub leaf_truncation: u32,
    #[serde(default = "two_hundred")]
    pub m: usize,
    /// Ascending corner dimensions for a convergence scan; overrides `m`.
    #[serde(default)]
    pub m_list: Option<Vec<usize>>,
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
}

fn three() -> u32 {
    3
}

fn two_hundred() -> usize {
    200
}

impl Default for CornerSettings {
    fn default() -> Self {
        CornerSettings { leaf_truncation: 3, m: 200, m_list: None, checkpoint_dir: None }
    }
}

/// Site pairs for nonlocal correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairSpec {
    Explicit(Vec<(usize, usize)>),
    /// Every site of `role` paired with the `reference`-th site of that role.
    Role {
        role: SiteRole,
        #[serde(default)]
        reference: usize,
    },
}

impl Default for PairSpec {
    fn default() -> Self {
        PairSpec::Explicit(Vec::new())
    }
}

impl PairSpec {
    pub fn resolve(&self, graph: &LatticeGraph) -> Result<Vec<(usize, usize)>> {
        let pairs = match self {
            PairSpec::Explicit(p) => p.clone(),
            PairSpec::Role { role, reference } => {
                let sites = graph.sites_with_role(*role);
                let r = *sites
                    .get(*reference)
                    .ok_or_else(|| Error::Config(format!("no {reference}-th site of role {role:?}")))?;
                sites.iter().map(|&s| (r, s)).collect()
            }
        };
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= graph.n_sites() || j >= graph.n_sites()) {
            return Err(Error::Config(format!("pair ({i}, {j}) outside the lattice")));
        }
        Ok(pairs)
    }
}

/// Per-site table: one row per site of `role` and sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub role: SiteRole,
    /// Index within the role of the site used for `g2_i_ref`.
    #[serde(default)]
    pub reference: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub lattice: LatticeSpec,
    pub params: ModelParams,
    #[serde(default = "partial_drive")]
    pub drive: DriveScheme,
    pub solver: SolverKind,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub exact: ExactSettings,
    #[serde(default)]
    pub evolve: EvolveSettings,
    #[serde(default)]
    pub weakpump: WeakPumpSettings,
    #[serde(default)]
    pub corner: CornerSettings,
    #[serde(default)]
    pub pairs: PairSpec,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub table: Option<TableSpec>,
    /// CSV file name inside the output directory; defaults to `<name>.csv`.
    #[serde(default)]
    pub output: Option<String>,
}

fn partial_drive() -> DriveScheme {
    DriveScheme::Partial
}

fn ascending<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        if self.name.is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        let graph = self.lattice.build().map_err(cfg_err)?;
        for p in self.points()? {
            p.validate().map_err(cfg_err)?;
        }
        self.pairs.resolve(&graph)?;
        if let Some(t) = &self.table {
            let sites = graph.sites_with_role(t.role);
            if t.reference >= sites.len() {
                return Err(Error::Config(format!("table reference {} out of range", t.reference)));
            }
        }
        if let Some(c) = &self.exact.cutoffs {
            if c.len() < 2 || !ascending(c) || c[0] == 0 {
                return Err(Error::Config("cutoffs must be at least two ascending positive values".into()));
            }
        }
        if self.exact.truncation.n_max() == 0 {
            return Err(Error::Config("truncation n_max must be positive".into()));
        }
        if let NumberScaling::Fixed(s) = self.exact.scaling {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::Config("scaling factor must lie in (0, 1]".into()));
            }
        }
        if let Some(m) = &self.corner.m_list {
            if m.is_empty() || !ascending(m) || m[0] == 0 {
                return Err(Error::Config("m_list must be ascending positive values".into()));
            }
        }
        if self.corner.m == 0 || self.corner.leaf_truncation == 0 {
            return Err(Error::Config("corner m and leaf_truncation must be positive".into()));
        }
        if self.weakpump.n_max < 2 {
            return Err(Error::Config("weak-pump n_max must be at least 2".into()));
        }
        if !(self.evolve.t_max > 0.0 && self.evolve.tol > 0.0) {
            return Err(Error::Config("evolve t_max and tol must be positive".into()));
        }
        Ok(())
    }

    /// Parameter points in sweep order.
    pub fn points(&self) -> Result<Vec<ModelParams>> {
        let sweep = match &self.sweep {
            None => return Ok(vec![self.params]),
            Some(s) if s.axis == Axis::None => {
                if s.values.is_some() || s.grid.is_some() {
                    return Err(Error::Config("sweep axis 'none' takes no values".into()));
                }
                return Ok(vec![self.params]);
            }
            Some(s) => s,
        };
        let values = sweep.points()?;
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep values must be finite and non-empty".into()));
        }
        Ok(values
            .into_iter()
            .map(|v| {
                let mut p = self.params;
                match sweep.axis {
                    Axis::Delta => p.detuning = v,
                    Axis::F => p.drive = v,
                    Axis::J => p.hopping = v,
                    Axis::U => p.interaction = v,
                    Axis::None => {}
                }
                p
            })
            .collect())
    }

    pub fn csv_name(&self) -> String {
        self.output.clone().unwrap_or_else(|| format!("{}.csv", self.name))
    }
}

/// Result of one sweep point.
#[derive(Debug, Clone)]
pub struct PointData {
    pub observables: ObservableSet,
    pub residual: f64,
    pub cutoff: Option<u32>,
    pub m: Option<usize>,
    /// Solver-specific columns, in the order of [`extra_columns`].
    pub extra: Vec<Option<f64>>,
}

/// Solver-specific columns appended after the observables.
pub fn extra_columns(cfg: &ExperimentConfig, graph: &LatticeGraph) -> Vec<String> {
    match cfg.solver {
        SolverKind::Exact if cfg.exact.cutoffs.is_some() => {
            vec!["cutoff_drift".into(), "converged_from".into()]
        }
        SolverKind::Weakpump if graph.geometry == Geometry::Cell3 => {
            (1..=6).map(|k| format!("P{k}")).collect()
        }
        SolverKind::Corner if cfg.corner.m_list.is_some() => vec!["M_drift".into()],
        _ => Vec::new(),
    }
}

fn exact_problem(cfg: &ExperimentConfig, graph: &LatticeGraph, p: &ModelParams) -> ExactProblem {
    let mask = drive_mask(graph, cfg.drive, p.drive);
    ExactProblem::new(graph.clone(), *p, mask, cfg.exact.truncation)
        .with_displacement(cfg.exact.displacement.clone())
        .with_scaling(cfg.exact.scaling)
}

/// Solves one parameter point with the configured solver.
pub fn run_point(
    cfg: &ExperimentConfig,
    graph: &LatticeGraph,
    pairs: &[(usize, usize)],
    p: &ModelParams,
) -> Result<PointData> {
    let norm = cfg.normalization;
    let mask = drive_mask(graph, cfg.drive, p.drive);
    match cfg.solver {
        SolverKind::Exact => {
            let problem = exact_problem(cfg, graph, p);
            if let Some(cutoffs) = &cfg.exact.cutoffs {
                let rep = cutoff_convergence(&problem, cutoffs, pairs, norm)?;
                let last = rep.rows.last().expect("scan has rows");
                return Ok(PointData {
                    observables: last.observables.clone(),
                    residual: last.report.residual,
                    cutoff: Some(last.n_max),
                    m: None,
                    extra: vec![last.max_rel_delta, rep.converged_from.map(f64::from)],
                });
            }
            let opts = SolverOptions { verify_unique: cfg.exact.verify_unique, ..Default::default() };
            let st = problem.solve_with(&opts)?;
            Ok(PointData {
                observables: st.observables(pairs, norm),
                residual: st.report.residual,
                cutoff: Some(cfg.exact.truncation.n_max()),
                m: None,
                extra: Vec::new(),
            })
        }
        SolverKind::Evolve => {
            let st = exact_problem(cfg, graph, p).solve_evolve(cfg.evolve.t_max, cfg.evolve.tol)?;
            Ok(PointData {
                observables: st.observables(pairs, norm),
                residual: st.report.residual,
                cutoff: Some(cfg.exact.truncation.n_max()),
                m: None,
                extra: Vec::new(),
            })
        }
        SolverKind::Meanfield => {
            let field = gp_steady_state(graph, p, &mask)?;
            let r = gp_rhs(&graph.adjacency(), p, &mask, &field.amplitude)
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                .sqrt();
            Ok(PointData {
                observables: ObservableSet::compute(&field, pairs, norm),
                residual: r,
                cutoff: None,
                m: None,
                extra: Vec::new(),
            })
        }
        SolverKind::Weakpump => {
            let exp = weak_pump_state(graph, p, &mask, cfg.weakpump.n_max)?;
            let order = cfg.weakpump.n_max.min(3);
            let obs = weak_pump_observables(&exp, order, pairs, norm)?;
            let extra = if graph.geometry == Geometry::Cell3 {
                let basis = reference_basis_cell3(p.hopping)?;
                let amps = exp.amplitudes_on(2, &basis.basis)?;
                if amps.norm_squared() < DENSITY_FLOOR * DENSITY_FLOOR {
                    vec![None; 6]
                } else {
                    manifold_probabilities(&amps, &basis)?.into_iter().map(Some).collect()
                }
            } else {
                Vec::new()
            };
            Ok(PointData {
                observables: obs.set,
                residual: exp.residual,
                cutoff: Some(cfg.weakpump.n_max),
                m: None,
                extra,
            })
        }
        SolverKind::Corner => {
            let opts = CornerOptions {
                leaf_truncation: cfg.corner.leaf_truncation,
                m: cfg.corner.m,
                pairs: pairs.to_vec(),
                checkpoint_dir: cfg.corner.checkpoint_dir.clone(),
                ..Default::default()
            };
            if let Some(m_list) = &cfg.corner.m_list {
                let scan = corner_m_sweep(graph, p, &mask, &opts, m_list, norm)?;
                let last = scan.rows.last().expect("scan has rows");
                return Ok(PointData {
                    observables: last.observables.clone(),
                    residual: last.residual,
                    cutoff: Some(cfg.corner.leaf_truncation),
                    m: Some(last.m_used),
                    extra: vec![last.drift],
                });
            }
            let res = corner_steady_state(graph, p, &mask, &opts)?;
            Ok(PointData {
                observables: ObservableSet::compute(&res.state, pairs, norm),
                residual: res.residual(),
                cutoff: Some(cfg.corner.leaf_truncation),
                m: Some(res.m_used()),
                extra: Vec::new(),
            })
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
    pub table: Option<PathBuf>,
    pub points: usize,
    pub failures: Vec<PointFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointFailure {
    pub index: usize,
    pub error: String,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a ExperimentConfig,
    version: &'static str,
    columns: &'a [String],
    points: usize,
    failures: &'a [PointFailure],
}

/// Configured pairs followed by any pair the site table needs.
pub fn resolve_pairs(cfg: &ExperimentConfig, graph: &LatticeGraph) -> Result<Vec<(usize, usize)>> {
    let mut pairs = cfg.pairs.resolve(graph)?;
    if let Some(t) = &cfg.table {
        let extra = PairSpec::Role { role: t.role, reference: t.reference }.resolve(graph)?;
        for p in extra {
            if !pairs.contains(&p) {
                pairs.push(p);
            }
        }
    }
    Ok(pairs)
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Runs every sweep point on `workers` threads and writes the CSV, the
/// optional per-site table and the JSON sidecar into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, workers: usize) -> Result<RunSummary> {
    cfg.validate()?;
    let graph = cfg.lattice.build()?;
    let pairs = resolve_pairs(cfg, &graph)?;
    let points = cfg.points()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<PointData>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| run_point(cfg, &graph, &pairs, p))
            .collect()
    });
    fs::create_dir_all(out_dir)?;

    let labels: Vec<String> = (0..graph.n_sites()).map(|s| graph.label(s)).collect();
    let extras = extra_columns(cfg, &graph);
    let mut header: Vec<String> = ["Delta", "F", "J", "U"].iter().map(|s| s.to_string()).collect();
    for l in &labels {
        header.extend([format!("n_{l}"), format!("g2_{l}"), format!("g3_{l}")]);
    }
    for &(i, j) in &pairs {
        header.push(format!("g2_{}_{}", labels[i], labels[j]));
    }
    header.extend(extras.iter().cloned());
    header.extend(["residual", "cutoff", "M", "status"].iter().map(|s| s.to_string()));

    let csv_path = out_dir.join(cfg.csv_name());
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(&header)?;
    let mut failures = Vec::new();
    for (k, (p, r)) in points.iter().zip(&results).enumerate() {
        let mut row = vec![num(p.detuning), num(p.drive), num(p.hopping), num(p.interaction)];
        match r {
            Ok(d) => {
                for s in 0..graph.n_sites() {
                    row.push(fmt_opt(Some(d.observables.n[s])));
                    row.push(fmt_opt(d.observables.g2_local[s]));
                    row.push(fmt_opt(d.observables.g3_local[s]));
                }
                row.extend(d.observables.g2_nonlocal.iter().map(|(_, g)| fmt_opt(*g)));
                row.extend(d.extra.iter().map(|&x| fmt_opt(x)));
                row.push(fmt_opt(Some(d.residual)));
                row.push(d.cutoff.map_or("NaN".into(), |c| c.to_string()));
                row.push(d.m.map_or("NaN".into(), |m| m.to_string()));
                row.push("ok".into());
            }
            Err(e) => {
                let width = 3 * graph.n_sites() + pairs.len() + extras.len() + 3;
                row.extend(std::iter::repeat_n("NaN".to_string(), width));
                row.push(format!("error: {e}"));
                failures.push(PointFailure { index: k, error: e.to_string() });
                log::warn!("point {k} failed: {e}");
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let table = match &cfg.table {
        Some(t) => Some(write_site_table(cfg, &graph, t, &points, &results, out_dir)?),
        None => None,
    };

    let sidecar_path = csv_path.with_extension("json");
    let sidecar = Sidecar {
        config: cfg,
        version: env!("CARGO_PKG_VERSION"),
        columns: &header,
        points: points.len(),
        failures: &failures,
    };
    fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(RunSummary { csv: csv_path, sidecar: sidecar_path, table, points: points.len(), failures })
}

/// One row per site of the table role: `n / n_brightest`, `g2`, `g3` and
/// `g2` relative to the reference site.
fn write_site_table(
    cfg: &ExperimentConfig,
    graph: &LatticeGraph,
    t: &TableSpec,
    points: &[ModelParams],
    results: &[Result<PointData>],
    out_dir: &Path,
) -> Result<PathBuf> {
    let sites = graph.sites_with_role(t.role);
    let reference = sites[t.reference];
    let stem = cfg.csv_name().trim_end_matches(".csv").to_string();
    let path = out_dir.join(format!("{stem}_sites.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["point", "Delta", "F", "J", "U", "site", "label", "n", "n_rel", "g2", "g3", "g2_i_ref"])?;
    for (k, (p, r)) in points.iter().zip(results).enumerate() {
        let Ok(d) = r else { continue };
        let obs = &d.observables;
        let (_, n_bar) = obs.brightest();
        for &s in &sites {
            let g_ref = obs
                .g2_nonlocal
                .iter()
                .find(|((i, j), _)| *i == reference && *j == s)
                .and_then(|(_, g)| *g);
            w.write_record([
                k.to_string(),
                num(p.detuning),
                num(p.drive),
                num(p.hopping),
                num(p.interaction),
                s.to_string(),
                graph.label(s),
                fmt_opt(Some(obs.n[s])),
                fmt_opt((n_bar >= DENSITY_FLOOR).then(|| obs.n[s] / n_bar)),
                fmt_opt(obs.g2_local[s]),
                fmt_opt(obs.g3_local[s]),
                fmt_opt(g_ref),
            ])?;
        }
    }
    w.flush()?;
    Ok(path)
}

/// Closed-system spectra used by the figure scripts: cell3 levels, the
/// periodic chain and 2D lattice bands, and the cell3 pair levels vs `U/J`.
pub fn write_spectra(out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let cases = [
        ("bands_cell3.csv", build_lattice(Geometry::Cell3, 1, Boundary::Open)?),
        ("bands_lieb1d.csv", build_lattice(Geometry::Lieb1d, 12, Boundary::Periodic)?),
        ("bands_lieb2d.csv", build_lieb2d(4, 4, Boundary::Periodic)?),
    ];
    for (name, g) in cases {
        let sol = single_particle_spectrum(&g, 1.0, 0.0);
        let path = out_dir.join(name);
        write_band_csv(&path, &band_rows(&g, &sol))?;
        written.push(path);
    }
    let grid = Grid { start: 1e-3, stop: 1e1, points: 81, scale: GridScale::Log }.points()?;
    let path = out_dir.join("two_photon_cell3.csv");
    write_two_photon_csv(&path, &grid)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"name": "t", "lattice": {"geometry": "lieb1d", "cells": 3}, "params": {"Delta": 0.5, "F": 0.1, "J": 2, "U": 0.3}, "solver": "weakpump"}"#,
        )
        .unwrap()
    }

    #[test]
    fn grids() {
        let lin = Grid { start: -1.0, stop: 1.0, points: 5, scale: GridScale::Linear }.points().unwrap();
        assert_eq!(lin, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let log = Grid { start: 0.01, stop: 100.0, points: 5, scale: GridScale::Log }.points().unwrap();
        for (x, y) in log.iter().zip([0.01, 0.1, 1.0, 10.0, 100.0]) {
            assert!((x / y - 1.0).abs() < 1e-12);
        }
        assert!(Grid { start: 0.0, stop: 1.0, points: 3, scale: GridScale::Log }.points().is_err());
    }

    #[test]
    fn sweep_sets_one_axis() {
        let mut c = base();
        c.sweep = Some(Sweep { axis: Axis::U, values: Some(vec![1.0, 2.0]), grid: None });
        let pts = c.points().unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].interaction, 2.0);
        assert_eq!(pts[1].detuning, 0.5);
        c.sweep = Some(Sweep { axis: Axis::None, values: Some(vec![1.0]), grid: None });
        assert!(c.validate().is_err());
    }

    #[test]
    fn role_pairs_and_defaults() {
        let mut c = base();
        assert_eq!(c.exact.truncation, Truncation::PerSite(5));
        assert_eq!(c.drive, DriveScheme::Partial);
        c.pairs = PairSpec::Role { role: SiteRole::B, reference: 1 };
        let g = c.lattice.build().unwrap();
        let b = g.sites_with_role(SiteRole::B);
        let pairs = c.pairs.resolve(&g).unwrap();
        assert_eq!(pairs.len(), b.len());
        assert!(pairs.iter().all(|&(i, _)| i == b[1]));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"name": "t", "lattice": {"geometry": "cell3"}, "params": {"Delta": 0, "F": 1, "J": 1, "U": 1}, "solver": "exact", "solvers": []}"#;
        assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))));
        assert_eq!("Corner".parse::<SolverKind>().unwrap(), SolverKind::Corner);
        assert!("dmrg".parse::<SolverKind>().is_err());
    }
}
