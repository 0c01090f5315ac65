//! Experiment configuration: a flat `key = value` format with dotted key
//! prefixes, one assignment per line.
//!
//! ```text
//! # 50 nodes scattered uniformly over a 2 m x 2 m area
//! scenario.kind = uniform
//! scenario.n = 50
//! channel.eta = 2.44
//! algorithm = domds
//! run.replicas = 50
//! ```
//!
//! Every key has a default (see [`ExperimentConfig::default`]); a config file
//! only lists what it overrides. Unknown keys and malformed values are hard
//! errors — silently ignoring a typo like `chanel.eta` would corrupt a study.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{ChannelParams, ObservationModel};
use crate::domds::DomdsVariant;
use crate::error::{Error, Result};
use crate::oja::{ProjectionBox, StepSchedule};
use crate::DMat;

/// How node positions are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    /// `rows x cols` lattice spanning the area exactly (a 2x2 grid on a
    /// 1 m x 1 m area puts nodes on the four corners).
    Grid { rows: usize, cols: usize },
    /// `n` positions drawn i.i.d. uniformly over the area.
    Uniform { n: usize },
    /// Positions read from a `node,x_m,y_m[,z_m],is_anchor` CSV file.
    Explicit { path: PathBuf },
}

/// Geometry request: placement rule, deployment area and anchor set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Area extent along x, meters.
    pub width_m: f64,
    /// Area extent along y, meters.
    pub height_m: f64,
    /// Area extent along z, meters (used only when `p == 3`).
    pub depth_m: f64,
    /// Embedding dimension (2 or 3).
    pub p: usize,
    /// Anchor node ids. Must be empty for explicit scenarios, which carry
    /// their own `is_anchor` column.
    pub anchors: Vec<usize>,
}

impl ScenarioSpec {
    /// Node count when it is known without reading a file.
    pub fn node_count(&self) -> Option<usize> {
        match &self.kind {
            ScenarioKind::Grid { rows, cols } => Some(rows * cols),
            ScenarioKind::Uniform { n } => Some(*n),
            ScenarioKind::Explicit { .. } => None,
        }
    }
}

/// Which estimator the run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    /// Centralized eigendecomposition of the time-averaged similarities,
    /// re-solved from scratch at every checkpoint.
    BatchMds,
    /// Centralized stochastic PCA consuming one sparse observation per tick.
    Oja,
    /// Distributed online MDS (two broadcasts per tick).
    Domds,
    /// Gossip-based maximum-likelihood refinement alone.
    Domle,
    /// doMDS followed by maximum-likelihood refinement of its output.
    DomdsDomle,
}

impl AlgorithmKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmKind::BatchMds => "batch-mds",
            AlgorithmKind::Oja => "oja",
            AlgorithmKind::Domds => "domds",
            AlgorithmKind::Domle => "domle",
            AlgorithmKind::DomdsDomle => "domds+domle",
        }
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch-mds" => Ok(AlgorithmKind::BatchMds),
            "oja" => Ok(AlgorithmKind::Oja),
            "domds" => Ok(AlgorithmKind::Domds),
            "domle" => Ok(AlgorithmKind::Domle),
            "domds+domle" => Ok(AlgorithmKind::DomdsDomle),
            other => Err(Error::config(
                "algorithm",
                format!("unknown algorithm `{other}` (expected batch-mds, oja, domds, domle or domds+domle)"),
            )),
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-pair observation probabilities: one scalar for all pairs, or a full
/// N x N matrix loaded from a headerless CSV.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationSpec {
    Scalar(f64),
    MatrixPath(PathBuf),
}

/// Settings consumed only by the maximum-likelihood refinement stage.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    /// Step schedule for the descent part of each refinement round.
    pub schedule: StepSchedule,
    /// Radio radius for the measurement graph, meters. `None` connects every
    /// pair of nodes.
    pub radius_m: Option<f64>,
    /// Refinement rounds (the second stage of `domds+domle`, or the whole run
    /// for `domle`).
    pub iterations: u64,
}

/// Fully resolved experiment description. One instance drives one seeded,
/// replicated run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub channel: ChannelParams,
    pub observation: ObservationSpec,
    /// Broadcast success probability q for the asynchronous time slots.
    pub ats_q: f64,
    pub algorithm: AlgorithmKind,
    /// Step schedule gamma_n = a / n^beta for the streaming algorithms.
    pub schedule: StepSchedule,
    /// Half-width of the clamping box K = [-alpha, alpha].
    pub box_alpha: f64,
    /// Ticks (measurement rounds) per replica.
    pub iterations: u64,
    /// Monte Carlo replicas. Zero is allowed and yields header-only reports.
    pub replicas: u32,
    /// Master seed; every replica stream derives from it.
    pub seed: u64,
    pub variant: DomdsVariant,
    pub refine: RefineConfig,
}

impl Default for ExperimentConfig {
    /// The reference operating point: 20 nodes uniform on a 1.4 m x 1.4 m area,
    /// eta = 2.44 with sigma = 1.7 eta, q_obs = 0.8, q_ats = 0.85,
    /// gamma_n = 0.015 / n^0.7, clamp box [-1.5, 1.5], 2e5 doMDS ticks,
    /// 50 replicas.
    ///
    /// The area and box were tuned together: the mean Gram eigenvalue must be
    /// large enough for the two-component transient to complete within the
    /// step-size budget, while the clamp box limits how far a rare oversized
    /// innovation can throw a row (see the module notes on rank collapse).
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioSpec {
                kind: ScenarioKind::Uniform { n: 20 },
                width_m: 1.4,
                height_m: 1.4,
                depth_m: 1.4,
                p: 2,
                anchors: Vec::new(),
            },
            channel: ChannelParams::new(-61.71, 2.44, 17.205904, 1)
                .expect("default channel parameters are valid"),
            observation: ObservationSpec::Scalar(0.8),
            ats_q: 0.85,
            algorithm: AlgorithmKind::Domds,
            schedule: StepSchedule::new(0.015, 0.7).expect("default schedule is valid"),
            box_alpha: 1.5,
            iterations: 200_000,
            replicas: 50,
            seed: 1,
            variant: DomdsVariant::Literal,
            refine: RefineConfig {
                schedule: StepSchedule::new(0.05, 0.7).expect("default refine schedule is valid"),
                radius_m: None,
                iterations: 50_000,
            },
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str, what: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::config(key, format!("`{raw}` is not a valid {what}")))
}

fn parse_anchor_list(key: &str, raw: &str) -> Result<Vec<usize>> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|tok| parse_value(key, tok.trim(), "node id"))
        .collect()
}

impl ExperimentConfig {
    /// Parse a config from flat `key = value` text. `#` starts a comment;
    /// blank lines are skipped. Later assignments override earlier ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        // Channel and schedule types validate on construction, so raw fields
        // are staged and rebuilt once after the last assignment.
        let (mut pl0, mut eta, mut sigma2, mut t_samples) = (
            cfg.channel.pl0,
            cfg.channel.eta,
            cfg.channel.sigma2,
            cfg.channel.t_samples,
        );
        let (mut sched_a, mut sched_beta) = (cfg.schedule.a, cfg.schedule.beta);
        let (mut ref_a, mut ref_beta) = (cfg.refine.schedule.a, cfg.refine.schedule.beta);
        // Staged scenario fields; the kind decides which are meaningful.
        let mut kind = String::from("uniform");
        let mut n: Option<usize> = None;
        let (mut rows, mut cols): (Option<usize>, Option<usize>) = (None, None);
        let mut path: Option<PathBuf> = None;

        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "scenario.kind" => kind = value.to_string(),
                "scenario.n" => n = Some(parse_value(key, value, "node count")?),
                "scenario.rows" => rows = Some(parse_value(key, value, "row count")?),
                "scenario.cols" => cols = Some(parse_value(key, value, "column count")?),
                "scenario.path" => path = Some(PathBuf::from(value)),
                "scenario.width_m" => cfg.scenario.width_m = parse_value(key, value, "length in meters")?,
                "scenario.height_m" => cfg.scenario.height_m = parse_value(key, value, "length in meters")?,
                "scenario.depth_m" => cfg.scenario.depth_m = parse_value(key, value, "length in meters")?,
                "scenario.p" => cfg.scenario.p = parse_value(key, value, "dimension")?,
                "scenario.anchors" => cfg.scenario.anchors = parse_anchor_list(key, value)?,
                "channel.pl0" => pl0 = parse_value(key, value, "number")?,
                "channel.eta" => eta = parse_value(key, value, "number")?,
                "channel.sigma2" => sigma2 = parse_value(key, value, "number")?,
                "channel.t_samples" => t_samples = parse_value(key, value, "sample count")?,
                "observation.q" => {
                    cfg.observation = ObservationSpec::Scalar(parse_value(key, value, "probability")?)
                }
                "observation.path" => cfg.observation = ObservationSpec::MatrixPath(PathBuf::from(value)),
                "ats.q" => cfg.ats_q = parse_value(key, value, "probability")?,
                "algorithm" => cfg.algorithm = value.parse()?,
                "schedule.a" => sched_a = parse_value(key, value, "number")?,
                "schedule.beta" => sched_beta = parse_value(key, value, "number")?,
                "box.alpha" => cfg.box_alpha = parse_value(key, value, "number")?,
                "run.iterations" => cfg.iterations = parse_value(key, value, "tick count")?,
                "run.replicas" => cfg.replicas = parse_value(key, value, "replica count")?,
                "run.seed" => cfg.seed = parse_value(key, value, "seed")?,
                "domds.variant" => {
                    cfg.variant = match value {
                        "literal" => DomdsVariant::Literal,
                        "decoupled" => DomdsVariant::Decoupled,
                        other => {
                            return Err(Error::config(
                                key,
                                format!("unknown variant `{other}` (expected literal or decoupled)"),
                            ))
                        }
                    }
                }
                "refine.a" => ref_a = parse_value(key, value, "number")?,
                "refine.beta" => ref_beta = parse_value(key, value, "number")?,
                "refine.radius_m" => cfg.refine.radius_m = Some(parse_value(key, value, "length in meters")?),
                "refine.iterations" => cfg.refine.iterations = parse_value(key, value, "round count")?,
                other => return Err(Error::config(other, "unknown key")),
            }
        }

        cfg.scenario.kind = match kind.as_str() {
            "uniform" => {
                if rows.is_some() || cols.is_some() {
                    return Err(Error::config(
                        "scenario.rows",
                        "grid shape given but scenario.kind is uniform",
                    ));
                }
                ScenarioKind::Uniform { n: n.unwrap_or(20) }
            }
            "grid" => {
                let (rows, cols) = match (rows, cols) {
                    (Some(r), Some(c)) => (r, c),
                    _ => {
                        return Err(Error::config(
                            "scenario.rows",
                            "grid scenarios need both scenario.rows and scenario.cols",
                        ))
                    }
                };
                if rows == 0 || cols == 0 {
                    return Err(Error::config("scenario.rows", "grid shape must be positive"));
                }
                if let Some(n) = n {
                    if n > rows * cols {
                        return Err(Error::config(
                            "scenario.n",
                            format!("{n} nodes exceed the {rows}x{cols} grid capacity of {}", rows * cols),
                        ));
                    }
                    if n != rows * cols {
                        return Err(Error::config(
                            "scenario.n",
                            format!("{n} does not match the {rows}x{cols} grid ({} nodes)", rows * cols),
                        ));
                    }
                }
                ScenarioKind::Grid { rows, cols }
            }
            "explicit" => {
                let Some(path) = path else {
                    return Err(Error::config("scenario.path", "explicit scenarios need a positions file"));
                };
                ScenarioKind::Explicit { path }
            }
            other => {
                return Err(Error::config(
                    "scenario.kind",
                    format!("unknown kind `{other}` (expected grid, uniform or explicit)"),
                ))
            }
        };

        cfg.channel = ChannelParams::new(pl0, eta, sigma2, t_samples)
            .map_err(|e| Error::config("channel", e.to_string()))?;
        cfg.schedule =
            StepSchedule::new(sched_a, sched_beta).map_err(|e| Error::config("schedule", e.to_string()))?;
        cfg.refine.schedule =
            StepSchedule::new(ref_a, ref_beta).map_err(|e| Error::config("refine", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and parse a config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Cross-field checks shared by `parse` and programmatic construction.
    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if !(s.p == 2 || s.p == 3) {
            return Err(Error::config("scenario.p", format!("must be 2 or 3, got {}", s.p)));
        }
        for (key, v) in [
            ("scenario.width_m", s.width_m),
            ("scenario.height_m", s.height_m),
            ("scenario.depth_m", s.depth_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be a positive length, got {v}")));
            }
        }
        if let Some(n) = s.node_count() {
            if n < s.p + 1 {
                return Err(Error::config(
                    "scenario.n",
                    format!("need at least p+1 = {} nodes, got {n}", s.p + 1),
                ));
            }
            if let Some(&a) = s.anchors.iter().find(|&&a| a >= n) {
                return Err(Error::config(
                    "scenario.anchors",
                    format!("anchor id {a} out of range (N = {n})"),
                ));
            }
        }
        if matches!(s.kind, ScenarioKind::Explicit { .. }) && !s.anchors.is_empty() {
            return Err(Error::config(
                "scenario.anchors",
                "explicit scenarios take anchors from the file's is_anchor column",
            ));
        }
        if let ObservationSpec::Scalar(q) = self.observation {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::config("observation.q", format!("must be in (0, 1], got {q}")));
            }
        }
        if !(self.ats_q > 0.0 && self.ats_q <= 1.0) {
            return Err(Error::config("ats.q", format!("must be in (0, 1], got {}", self.ats_q)));
        }
        ProjectionBox::new(self.box_alpha).map_err(|e| Error::config("box.alpha", e.to_string()))?;
        if self.iterations == 0 {
            return Err(Error::config("run.iterations", "must be at least 1"));
        }
        if self.refine.iterations == 0
            && matches!(self.algorithm, AlgorithmKind::Domle | AlgorithmKind::DomdsDomle)
        {
            return Err(Error::config("refine.iterations", "must be at least 1"));
        }
        if let Some(r) = self.refine.radius_m {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::config(
                    "refine.radius_m",
                    format!("must be a positive length, got {r}"),
                ));
            }
        }
        Ok(())
    }

    /// Observation model for an `n`-node network, loading the probability
    /// matrix from disk when the config references one.
    pub fn observation_model(&self, n: usize) -> Result<ObservationModel> {
        match &self.observation {
            ObservationSpec::Scalar(q) => ObservationModel::uniform(n, *q),
            ObservationSpec::MatrixPath(path) => {
                let m = read_matrix_csv(path, n)?;
                ObservationModel::from_matrix(m)
            }
        }
    }
}

/// Read a headerless n x n CSV of floats (the observation-probability
/// matrix format).
fn read_matrix_csv(path: &Path, n: usize) -> Result<DMat> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        let row: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse).collect();
        rows.push(row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "{} is {}x{} but the scenario has {n} nodes",
            path.display(),
            rows.len(),
            rows.first().map_or(0, Vec::len),
        )));
    }
    Ok(DMat::from_fn(n, n, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_operating_point() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.scenario.kind, ScenarioKind::Uniform { n: 20 });
        assert_eq!(cfg.channel.eta, 2.44);
        // sigma = 1.7 eta
        assert!((cfg.channel.sigma2 - (1.7 * 2.44_f64).powi(2)).abs() < 1e-12);
        assert_eq!(cfg.observation, ObservationSpec::Scalar(0.8));
        assert_eq!(cfg.ats_q, 0.85);
        assert_eq!(cfg.schedule.a, 0.015);
        assert_eq!(cfg.schedule.beta, 0.7);
        assert_eq!(cfg.scenario.width_m, 1.4);
        assert_eq!(cfg.box_alpha, 1.5);
        assert_eq!(cfg.iterations, 200_000);
        assert_eq!(cfg.replicas, 50);
        cfg.validate().unwrap();
    }

    #[test]
    fn parses_overrides_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# comment line\n\
             scenario.kind = grid\n\
             scenario.rows = 4   # trailing comment\n\
             scenario.cols = 5\n\
             scenario.width_m = 1.5\n\
             scenario.anchors = 0, 3, 19\n\
             channel.eta = 3.0\n\
             algorithm = oja\n\
             run.seed = 99\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.kind, ScenarioKind::Grid { rows: 4, cols: 5 });
        assert_eq!(cfg.scenario.width_m, 1.5);
        assert_eq!(cfg.scenario.anchors, vec![0, 3, 19]);
        assert_eq!(cfg.channel.eta, 3.0);
        assert_eq!(cfg.algorithm, AlgorithmKind::Oja);
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = ExperimentConfig::parse("chanel.eta = 2.0\n").unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
        assert!(err.to_string().contains("chanel.eta"));
    }

    #[test]
    fn rejects_malformed_lines_and_values() {
        assert!(ExperimentConfig::parse("just some words\n").is_err());
        assert!(ExperimentConfig::parse("channel.eta = fast\n").is_err());
        assert!(ExperimentConfig::parse("algorithm = gradient\n").is_err());
        assert!(ExperimentConfig::parse("domds.variant = fancy\n").is_err());
    }

    #[test]
    fn grid_capacity_is_enforced() {
        let err = ExperimentConfig::parse(
            "scenario.kind = grid\nscenario.rows = 2\nscenario.cols = 2\nscenario.n = 9\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("capacity"), "{err}");
        // A matching n is accepted.
        ExperimentConfig::parse(
            "scenario.kind = grid\nscenario.rows = 2\nscenario.cols = 2\nscenario.n = 4\n",
        )
        .unwrap();
    }

    #[test]
    fn validation_catches_out_of_range_fields() {
        assert!(ExperimentConfig::parse("observation.q = 0.0\n").is_err());
        assert!(ExperimentConfig::parse("ats.q = 1.2\n").is_err());
        assert!(ExperimentConfig::parse("scenario.p = 4\n").is_err());
        assert!(ExperimentConfig::parse("run.iterations = 0\n").is_err());
        assert!(ExperimentConfig::parse("box.alpha = 0.5\n").is_err());
        assert!(ExperimentConfig::parse("schedule.beta = 0.3\n").is_err());
        assert!(ExperimentConfig::parse("scenario.anchors = 0,25\n").is_err());
    }

    #[test]
    fn explicit_scenarios_reject_inline_anchors() {
        let err = ExperimentConfig::parse(
            "scenario.kind = explicit\nscenario.path = nodes.csv\nscenario.anchors = 0\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("is_anchor"), "{err}");
    }

    #[test]
    fn last_assignment_wins() {
        let cfg = ExperimentConfig::parse("run.seed = 1\nrun.seed = 7\n").unwrap();
        assert_eq!(cfg.seed, 7);
    }
}
