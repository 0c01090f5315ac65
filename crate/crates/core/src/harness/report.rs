//! CSV reporting. All floating-point fields are rendered with nine
//! significant digits (`d.dddddddde±e`), so a written file parses back to
//! values that re-render byte-identically — the reproducibility contract is
//! "equal at nine significant digits", which identical seeds must meet
//! exactly (byte-identical files).

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::run::RunOutput;

/// Nine-significant-digit scientific rendering used by every report file.
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Header of the per-checkpoint trajectory file. `wall_ms` is reserved for
/// wall-clock profiling and is always 0 in reproducible runs; timing noise
/// must never leak into otherwise deterministic output.
pub const RMSE_HEADER: &str = "replica,tick,broadcasts,rmse_m,wall_ms";

/// Write `rmse.csv`: one row per (replica, checkpoint), replicas in order,
/// ticks strictly increasing within each replica.
pub fn write_rmse_csv(path: &Path, out: &RunOutput) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "{RMSE_HEADER}").expect("in-memory write");
    for rec in &out.records {
        for row in &rec.rows {
            writeln!(
                buf,
                "{},{},{},{},0",
                rec.replica,
                row.tick,
                row.broadcasts,
                fmt_sig9(row.rmse_m)
            )
            .expect("in-memory write");
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Write `rmse_mean.csv`: the across-replica mean RMSE per checkpoint tick,
/// with the number of replicas contributing to each mean.
pub fn write_mean_csv(path: &Path, out: &RunOutput) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "tick,rmse_m,replicas").expect("in-memory write");
    for (tick, mean, count) in out.mean_curve() {
        writeln!(buf, "{tick},{},{count}", fmt_sig9(mean)).expect("in-memory write");
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Write `positions_final.csv`: replica 0's final position estimates, in the
/// frame the final RMSE was evaluated in.
pub fn write_positions_csv(path: &Path, out: &RunOutput) -> Result<()> {
    let mut buf = Vec::new();
    let p = out.scenario.dim();
    let header = if p == 2 { "node,x_m,y_m" } else { "node,x_m,y_m,z_m" };
    writeln!(buf, "{header}").expect("in-memory write");
    if let Some(rec) = out.records.first() {
        for i in 0..rec.final_positions.nrows() {
            write!(buf, "{i}").expect("in-memory write");
            for k in 0..p {
                write!(buf, ",{}", fmt_sig9(rec.final_positions[(i, k)])).expect("in-memory write");
            }
            writeln!(buf).expect("in-memory write");
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Emit the full report set (`rmse.csv`, `rmse_mean.csv`,
/// `positions_final.csv`) into `dir`, creating it if needed.
pub fn emit_csv(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_rmse_csv(&dir.join("rmse.csv"), out)?;
    write_mean_csv(&dir.join("rmse_mean.csv"), out)?;
    write_positions_csv(&dir.join("positions_final.csv"), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::{CheckpointRow, ReplicaRecord};
    use crate::mds::Scenario;
    use crate::DMat;

    fn toy_output(rows_per_replica: usize) -> RunOutput {
        let positions = DMat::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let scenario = Scenario::from_positions(positions.clone(), vec![]).unwrap();
        let records = (0..2u32)
            .map(|r| ReplicaRecord {
                replica: r,
                rows: (0..rows_per_replica)
                    .map(|t| CheckpointRow {
                        replica: r,
                        tick: 10 * t as u64,
                        broadcasts: 2 * 10 * t as u64,
                        rmse_m: 0.5 / (t + 1) as f64 + r as f64 * 0.01,
                    })
                    .collect(),
                final_positions: positions.clone(),
            })
            .collect();
        RunOutput { scenario, records }
    }

    #[test]
    fn sig9_rendering_round_trips() {
        for &x in &[0.0, 1.0, -0.123456789, 3.14159265358979e-7, 6.02e23, 17.205904] {
            let s = fmt_sig9(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(fmt_sig9(back), s, "re-render of {x} changed");
        }
        assert_eq!(fmt_sig9(1.0), "1.00000000e0");
        assert_eq!(fmt_sig9(-0.05), "-5.00000000e-2");
    }

    #[test]
    fn rmse_file_has_pinned_header_and_row_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rmse.csv");
        write_rmse_csv(&path, &toy_output(3)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "replica,tick,broadcasts,rmse_m,wall_ms");
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert_eq!(lines[1], "0,0,0,5.00000000e-1,0");
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 5);
            assert_eq!(line.split(',').next_back(), Some("0"), "wall_ms must be 0");
        }
    }

    #[test]
    fn empty_run_yields_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = toy_output(2);
        out.records.clear();
        emit_csv(dir.path(), &out).unwrap();
        for name in ["rmse.csv", "rmse_mean.csv", "positions_final.csv"] {
            let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
            assert_eq!(text.lines().count(), 1, "{name} should be header-only");
        }
    }

    #[test]
    fn positions_file_lists_every_node_from_replica_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("positions_final.csv");
        write_positions_csv(&path, &toy_output(1)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "node,x_m,y_m");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "1,1.00000000e0,0.00000000e0");
    }

    #[test]
    fn mean_curve_file_averages_across_replicas() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rmse_mean.csv");
        write_mean_csv(&path, &toy_output(2)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "tick,rmse_m,replicas");
        // tick 0: mean of 0.5 and 0.51
        assert_eq!(lines[1], "0,5.05000000e-1,2");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn parsed_values_rerender_to_the_same_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rmse.csv");
        write_rmse_csv(&path, &toy_output(4)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for line in text.lines().skip(1) {
            let rmse_field = line.split(',').nth(3).unwrap();
            let v: f64 = rmse_field.parse().unwrap();
            assert_eq!(fmt_sig9(v), rmse_field);
        }
    }
}
