use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::balance::{BalanceConfig, MotionConstraint};
use crate::cluster::{CostModel, Link, LoadWindow, WorkerProfile};
use crate::geometry::{Point2, Rect};
use crate::md::ForceField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionMode {
    /// Centers follow the balance law.
    Mpd3,
    /// Fixed rectangular cells, no settling.
    StaticRect,
    /// Settled Voronoi tessellation with centers frozen afterwards.
    VoronoiFrozen,
}

impl DecompositionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecompositionMode::Mpd3 => "mpd3",
            DecompositionMode::StaticRect => "static_rect",
            DecompositionMode::VoronoiFrozen => "voronoi_frozen",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cylinder {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default)]
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadEntry {
    pub worker: usize,
    pub start: u64,
    pub end: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    /// Workers at either end; links are symmetric.
    pub between: [usize; 2],
    pub latency: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteLink {
    latency: f64,
    bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    CrystalBar,
    TwoCylinders,
    Custom,
}

/// On-disk scenario: flat TOML keys plus a few arrays of inline tables.
/// See `scenarios/README.md` for the key reference.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default)]
    seed: u64,
    n_steps: u64,
    #[serde(default = "default_mode")]
    mode: DecompositionMode,
    #[serde(default)]
    constraint: MotionConstraint,
    /// `[xmin, ymin, xmax, ymax]`
    domain: [f64; 4],
    init: InitKind,
    lattice_spacing: Option<f64>,
    #[serde(default)]
    temperature: f64,
    bar_cols: Option<usize>,
    bar_rows: Option<usize>,
    bar_origin: Option<[f64; 2]>,
    #[serde(default)]
    cylinders: Vec<Cylinder>,
    positions_file: Option<PathBuf>,

    n_workers: usize,
    rect_grid: Option<[usize; 2]>,
    speeds: Option<Vec<f64>>,
    #[serde(default)]
    loads: Vec<LoadEntry>,
    #[serde(default)]
    links: Vec<LinkEntry>,
    /// Machine index per worker; workers on different machines use
    /// `site_link` unless `links` says otherwise.
    sites: Option<Vec<usize>>,
    site_link: Option<SiteLink>,
    default_latency: Option<f64>,
    default_bandwidth: Option<f64>,

    #[serde(default = "one")]
    epsilon: f64,
    #[serde(default = "one")]
    sigma: f64,
    #[serde(default = "default_cutoff")]
    cutoff: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_skin")]
    skin: f64,

    #[serde(default)]
    balance: BalanceConfig,
    #[serde(default)]
    cost: CostModel,

    #[serde(default = "default_settle")]
    settle_max_iters: usize,
    #[serde(default = "default_renumber")]
    renumber_every: u64,
    #[serde(default)]
    snapshot_every: u64,
    #[serde(default = "default_bins")]
    density_bins: [usize; 2],
}

fn default_mode() -> DecompositionMode {
    DecompositionMode::Mpd3
}
fn one() -> f64 {
    1.0
}
fn default_cutoff() -> f64 {
    2.5
}
fn default_dt() -> f64 {
    0.005
}
fn default_skin() -> f64 {
    0.3
}
fn default_settle() -> usize {
    200
}
fn default_renumber() -> u64 {
    20
}
fn default_bins() -> [usize; 2] {
    [128, 64]
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParticleInit {
    CrystalBar {
        cols: usize,
        rows: usize,
        spacing: f64,
        origin: Point2,
    },
    TwoCylinders {
        spacing: f64,
        cylinders: Vec<Cylinder>,
    },
    /// Rows of `x,y[,vx,vy]`.
    Custom {
        positions: Vec<(Point2, Point2)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub n_steps: u64,
    pub mode: DecompositionMode,
    pub constraint: MotionConstraint,
    pub bounds: Rect,
    pub init: ParticleInit,
    pub temperature: f64,
    /// Initial rectangular split, `[nx, ny]` with `nx * ny = n_workers`.
    pub rect_grid: [usize; 2],
    pub workers: Vec<WorkerProfile>,
    pub force_field: ForceField,
    pub skin: f64,
    pub balance: BalanceConfig,
    pub cost: CostModel,
    pub settle_max_iters: usize,
    /// 0 disables renumbering.
    pub renumber_every: u64,
    /// 0 disables snapshots.
    pub snapshot_every: u64,
    pub density_bins: [usize; 2],
}

impl Scenario {
    pub fn n_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            HarnessError::Scenario(msg) => HarnessError::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses scenario text; relative `positions_file` paths resolve against
    /// `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, HarnessError> {
        let f: ScenarioFile = toml::from_str(text).map_err(|e| HarnessError::Scenario(e.to_string()))?;
        let bad = |m: String| HarnessError::Scenario(m);
        let ff = ForceField { epsilon: f.epsilon, sigma: f.sigma, cutoff: f.cutoff, dt: f.dt };
        let spacing = f.lattice_spacing.unwrap_or_else(|| ff.equilibrium_distance());
        let [x0, y0, x1, y1] = f.domain;
        let bounds = Rect::new(Point2::new(x0, y0), Point2::new(x1, y1));

        let init = match f.init {
            InitKind::CrystalBar => ParticleInit::CrystalBar {
                cols: f.bar_cols.ok_or_else(|| bad("crystal_bar needs bar_cols".into()))?,
                rows: f.bar_rows.ok_or_else(|| bad("crystal_bar needs bar_rows".into()))?,
                spacing,
                origin: f.bar_origin.map_or(bounds.min, |[x, y]| Point2::new(x, y)),
            },
            InitKind::TwoCylinders => {
                if f.cylinders.len() != 2 {
                    return Err(bad("two_cylinders needs exactly two cylinders".into()));
                }
                ParticleInit::TwoCylinders { spacing, cylinders: f.cylinders.clone() }
            }
            InitKind::Custom => {
                let rel = f.positions_file.as_ref().ok_or_else(|| bad("custom needs positions_file".into()))?;
                ParticleInit::Custom { positions: read_positions(&base.join(rel))? }
            }
        };

        let n = f.n_workers;
        let speeds = f.speeds.clone().unwrap_or_else(|| vec![1.0; n]);
        if speeds.len() != n {
            return Err(bad(format!("speeds has {} entries for {n} workers", speeds.len())));
        }
        let default_link = Link {
            latency: f.default_latency.unwrap_or(Link::SHARED_MEMORY.latency),
            bandwidth: f.default_bandwidth.unwrap_or(Link::SHARED_MEMORY.bandwidth),
        };
        let mut workers: Vec<WorkerProfile> = speeds
            .iter()
            .enumerate()
            .map(|(id, &speed)| WorkerProfile {
                id,
                speed,
                load_schedule: Vec::new(),
                default_link,
                links: BTreeMap::new(),
            })
            .collect();
        for l in &f.loads {
            let w = workers.get_mut(l.worker).ok_or_else(|| bad(format!("load names unknown worker {}", l.worker)))?;
            w.load_schedule.push(LoadWindow { start: l.start, end: l.end, fraction: l.fraction });
        }
        match (&f.sites, f.site_link) {
            (Some(sites), Some(sl)) => {
                if sites.len() != n {
                    return Err(bad(format!("sites has {} entries for {n} workers", sites.len())));
                }
                let link = Link { latency: sl.latency, bandwidth: sl.bandwidth };
                for a in 0..n {
                    for b in 0..n {
                        if sites[a] != sites[b] {
                            workers[a].links.insert(b, link);
                        }
                    }
                }
            }
            (None, None) => {}
            _ => return Err(bad("sites and site_link must be given together".into())),
        }
        for l in &f.links {
            let [a, b] = l.between;
            if a >= n || b >= n || a == b {
                return Err(bad(format!("link between {a} and {b} is invalid")));
            }
            let link = Link { latency: l.latency, bandwidth: l.bandwidth };
            workers[a].links.insert(b, link);
            workers[b].links.insert(a, link);
        }

        let s = Scenario {
            name: f.name,
            seed: f.seed,
            n_steps: f.n_steps,
            mode: f.mode,
            constraint: f.constraint,
            bounds,
            init,
            temperature: f.temperature,
            rect_grid: f.rect_grid.unwrap_or([n, 1]),
            workers,
            force_field: ff,
            skin: f.skin,
            balance: f.balance,
            cost: f.cost,
            settle_max_iters: f.settle_max_iters,
            renumber_every: f.renumber_every,
            snapshot_every: f.snapshot_every,
            density_bins: f.density_bins,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Scenario(m));
        if self.workers.is_empty() {
            return bad("n_workers must be at least 1".into());
        }
        if self.n_steps == 0 {
            return bad("n_steps must be at least 1".into());
        }
        if !(self.bounds.is_valid() && self.bounds.area() > 0.0) {
            return bad("domain must be a non-empty rectangle".into());
        }
        let [gx, gy] = self.rect_grid;
        if gx * gy != self.workers.len() {
            return bad(format!("rect_grid {gx}x{gy} does not match {} workers", self.workers.len()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be non-negative".into());
        }
        if !(self.skin >= 0.0 && self.skin.is_finite()) {
            return bad("skin must be non-negative".into());
        }
        if self.settle_max_iters == 0 {
            return bad("settle_max_iters must be at least 1".into());
        }
        if self.density_bins[0] == 0 || self.density_bins[1] == 0 {
            return bad("density_bins must be positive".into());
        }
        self.force_field.validate().map_err(|e| HarnessError::Scenario(e.to_string()))?;
        self.balance.validate().map_err(|e| HarnessError::Scenario(e.to_string()))?;
        self.cost.validate().map_err(HarnessError::Scenario)?;
        for w in &self.workers {
            w.validate().map_err(HarnessError::Scenario)?;
        }
        match &self.init {
            ParticleInit::CrystalBar { cols, rows, spacing, .. } => {
                if *cols == 0 || *rows == 0 || !(*spacing > 0.0) {
                    return bad("crystal bar needs positive size and spacing".into());
                }
            }
            ParticleInit::TwoCylinders { spacing, cylinders } => {
                if !(*spacing > 0.0) || cylinders.iter().any(|c| !(c.radius > 0.0)) {
                    return bad("cylinders need positive radius and spacing".into());
                }
            }
            ParticleInit::Custom { positions } => {
                if positions.iter().any(|(p, v)| !p.is_finite() || !v.is_finite()) {
                    return bad("positions file holds non-finite values".into());
                }
            }
        }
        Ok(())
    }
}

fn read_positions(path: &Path) -> Result<Vec<(Point2, Point2)>, HarnessError> {
    let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).flexible(true).from_path(path).map_err(
            |e| match e.into_kind() {
                csv::ErrorKind::Io(source) => io(source),
                other => HarnessError::Scenario(format!("{}: {other:?}", path.display())),
            },
        )?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::Scenario(format!("{}: {e}", path.display())))?;
        let vals: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let vals =
            vals.map_err(|_| HarnessError::Scenario(format!("{}: row {} is not numeric", path.display(), k + 2)))?;
        match vals.as_slice() {
            [x, y] => out.push((Point2::new(*x, *y), Point2::ZERO)),
            [x, y, vx, vy] => out.push((Point2::new(*x, *y), Point2::new(*vx, *vy))),
            _ => {
                return Err(HarnessError::Scenario(format!("{}: row {} needs x,y or x,y,vx,vy", path.display(), k + 2)))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BAR: &str = r#"
name = "bar"
n_steps = 10
domain = [0.0, 0.0, 40.0, 10.0]
init = "crystal_bar"
bar_cols = 30
bar_rows = 6
bar_origin = [1.0, 1.0]
n_workers = 2
speeds = [1.0, 2.0]
loads = [{ worker = 1, start = 2, end = 5, fraction = 0.5 }]
links = [{ between = [0, 1], latency = 1e-4, bandwidth = 1e7 }]
constraint = "centers_move_x_only"
"#;

    #[test]
    fn parses_a_flat_scenario() {
        let s = Scenario::parse(BAR, Path::new(".")).unwrap();
        assert_eq!(s.n_workers(), 2);
        assert_eq!(s.rect_grid, [2, 1]);
        assert_eq!(s.mode, DecompositionMode::Mpd3);
        assert_eq!(s.constraint, MotionConstraint::CentersMoveXOnly);
        assert_eq!(s.workers[1].stolen_fraction(3), 0.5);
        assert_eq!(s.workers[0].link_to(1).latency, 1e-4);
        assert_eq!(s.workers[1].link_to(0).bandwidth, 1e7);
        assert_eq!(s.balance, BalanceConfig::default());
        assert_eq!(s.force_field, ForceField::default());
    }

    #[test]
    fn sites_link_workers_across_machines() {
        let text = BAR.replace("links = [{ between = [0, 1], latency = 1e-4, bandwidth = 1e7 }]", "")
            + "sites = [0, 1]\nsite_link = { latency = 2e-4, bandwidth = 1.25e7 }\n";
        let s = Scenario::parse(&text, Path::new(".")).unwrap();
        assert_eq!(s.workers[0].link_to(1).latency, 2e-4);
        assert_eq!(s.workers[1].link_to(0).bandwidth, 1.25e7);
        let half = BAR.to_string() + "sites = [0, 1]\n";
        assert!(Scenario::parse(&half, Path::new(".")).is_err());
    }

    #[test]
    fn nested_balance_and_cost_tables() {
        let text = format!("{BAR}\n[balance]\ngain = 0.2\n[cost]\nc_pair = 0.5\n");
        let s = Scenario::parse(&text, Path::new(".")).unwrap();
        assert_eq!(s.balance.gain, 0.2);
        assert_eq!(s.balance.smoothing_alpha, 0.3);
        assert_eq!(s.cost.c_pair, 0.5);
    }

    #[test]
    fn rejects_bad_scenarios() {
        for (from, to) in [
            ("n_steps = 10", "n_steps = 0"),
            ("n_workers = 2", "n_workers = 3"),
            ("speeds = [1.0, 2.0]", "speeds = [1.0, -2.0]"),
            ("fraction = 0.5", "fraction = 1.5"),
            ("bar_cols = 30\n", ""),
            ("name = \"bar\"", "name = \"bar\"\nunknown_key = 1"),
        ] {
            let text = BAR.replace(from, to);
            assert!(
                matches!(Scenario::parse(&text, Path::new(".")), Err(HarnessError::Scenario(_))),
                "accepted {to:?}"
            );
        }
    }

    #[test]
    fn custom_positions_resolve_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("pts.csv"), "x,y,vx,vy\n1,1,0,0\n2,1,0.5,0\n").unwrap();
        let text = BAR.replace("init = \"crystal_bar\"", "init = \"custom\"\npositions_file = \"pts.csv\"");
        let s = Scenario::parse(&text, dir.path()).unwrap();
        match s.init {
            ParticleInit::Custom { positions } => {
                assert_eq!(positions.len(), 2);
                assert_eq!(positions[1].1, Point2::new(0.5, 0.0));
            }
            other => panic!("{other:?}"),
        }
        let missing = BAR.replace("init = \"crystal_bar\"", "init = \"custom\"\npositions_file = \"nope.csv\"");
        assert!(matches!(Scenario::parse(&missing, dir.path()), Err(HarnessError::Io { .. })));
    }
}
