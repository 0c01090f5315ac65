//! Scenario realization: turn a [`ScenarioSpec`] into concrete node
//! positions, and read/write the `node,x_m,y_m[,z_m],is_anchor` CSV format.

use std::io::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::harness::config::{ScenarioKind, ScenarioSpec};
use crate::harness::report::fmt_sig9;
use crate::mds::Scenario;
use crate::stream::scenario_rng;
use crate::DMat;

/// Realize a scenario. Grid and uniform kinds place nodes inside the
/// `[0, width] x [0, height] (x [0, depth])` box; the uniform kind consumes
/// the scenario stream derived from `master_seed`, so every replica of a run
/// (and every rerun with the same seed) sees the same geometry. Explicit
/// kinds read the referenced positions file and ignore the seed.
pub fn generate_scenario(spec: &ScenarioSpec, master_seed: u64) -> Result<Scenario> {
    let extents = area_extents(spec);
    match &spec.kind {
        ScenarioKind::Grid { rows, cols } => {
            let n = rows * cols;
            let mut positions = DMat::zeros(n, spec.p);
            for r in 0..*rows {
                for c in 0..*cols {
                    let i = r * cols + c;
                    positions[(i, 0)] = lattice_coord(c, *cols, extents[0]);
                    positions[(i, 1)] = lattice_coord(r, *rows, extents[1]);
                    // A 2-D lattice embedded in 3-D sits on the floor plane.
                }
            }
            Scenario::new(positions, spec.anchors.clone(), area(spec))
        }
        ScenarioKind::Uniform { n } => {
            let mut rng = scenario_rng(master_seed);
            let mut positions = DMat::zeros(*n, spec.p);
            for i in 0..*n {
                for k in 0..spec.p {
                    positions[(i, k)] = rng.random::<f64>() * extents[k];
                }
            }
            Scenario::new(positions, spec.anchors.clone(), area(spec))
        }
        ScenarioKind::Explicit { path } => read_scenario_csv(path, spec.p),
    }
}

fn area_extents(spec: &ScenarioSpec) -> Vec<f64> {
    let mut e = vec![spec.width_m, spec.height_m];
    if spec.p == 3 {
        e.push(spec.depth_m);
    }
    e
}

fn area(spec: &ScenarioSpec) -> Vec<(f64, f64)> {
    area_extents(spec).into_iter().map(|hi| (0.0, hi)).collect()
}

/// Index `k` of `count` lattice points spanning `[0, extent]` inclusive;
/// a single point sits at the center.
fn lattice_coord(k: usize, count: usize, extent: f64) -> f64 {
    if count == 1 {
        extent / 2.0
    } else {
        extent * k as f64 / (count - 1) as f64
    }
}

/// Read a `node,x_m,y_m[,z_m],is_anchor` CSV. Node ids must be exactly
/// `0..n-1` in order; `is_anchor` is 0 or 1. The deployment area is taken as
/// the tight bounding box of the positions.
pub fn read_scenario_csv(path: &Path, expected_p: usize) -> Result<Scenario> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { path: path.to_path_buf(), line: 1, reason: e.to_string() })?
        .clone();
    let p = match headers.len() {
        4 => 2,
        5 => 3,
        k => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                reason: format!("expected node,x_m,y_m[,z_m],is_anchor, got {k} columns"),
            })
        }
    };
    if p != expected_p {
        return Err(Error::config(
            "scenario.p",
            format!("config asks for p = {expected_p} but {} holds {p}-D positions", path.display()),
        ));
    }
    let mut positions: Vec<[f64; 3]> = Vec::new();
    let mut anchors = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let parse_err = |reason: String| Error::Parse { path: path.to_path_buf(), line, reason };
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(parse_err(format!(
                "expected {} fields, got {}",
                headers.len(),
                record.len()
            )));
        }
        let field = |k: usize| -> Result<f64> {
            record[k]
                .parse::<f64>()
                .map_err(|e| parse_err(format!("field `{}`: {e}", &record[k])))
        };
        let node = field(0)? as usize;
        if node != idx {
            return Err(parse_err(format!("node ids must be 0..N-1 in order; expected {idx}, got {node}")));
        }
        let mut pos = [0.0; 3];
        for (k, slot) in pos.iter_mut().enumerate().take(p) {
            *slot = field(1 + k)?;
        }
        positions.push(pos);
        match record[1 + p].trim() {
            "0" => {}
            "1" => anchors.push(idx),
            other => return Err(parse_err(format!("is_anchor must be 0 or 1, got `{other}`"))),
        }
    }
    let n = positions.len();
    let mat = DMat::from_fn(n, p, |i, k| positions[i][k]);
    Scenario::from_positions(mat, anchors)
}

/// Write a scenario in the same CSV format (9 significant digits).
pub fn write_scenario_csv(path: &Path, scenario: &Scenario) -> Result<()> {
    let mut out = Vec::new();
    let p = scenario.dim();
    let header = if p == 2 { "node,x_m,y_m,is_anchor" } else { "node,x_m,y_m,z_m,is_anchor" };
    writeln!(out, "{header}").expect("in-memory write");
    for i in 0..scenario.n() {
        write!(out, "{i}").expect("in-memory write");
        for k in 0..p {
            write!(out, ",{}", fmt_sig9(scenario.positions()[(i, k)])).expect("in-memory write");
        }
        writeln!(out, ",{}", u8::from(scenario.is_anchor(i))).expect("in-memory write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
