//! Experiment execution: replicated, checkpointed runs of every algorithm in
//! the crate over one shared scenario.
//!
//! Determinism contract: the scenario is drawn from the scenario stream of
//! the master seed, and replica `r` consumes only streams derived from
//! `(seed, r, tick, purpose)`. Replicas are therefore independent of thread
//! scheduling and a run with the same config and seed reproduces its reports
//! byte for byte.
//!
//! Checkpoints are geometric — ticks 10, 20, 40, 80, … — plus tick 0 (the
//! initial iterate) and the final tick, so log-scale RMSE trajectories have
//! evenly spaced support without recording 2e5 rows per replica.
//!
//! Alignment before RMSE follows the estimator's output frame: the
//! MDS-family estimators (batch, Oja, doMDS) recover geometry up to a rigid
//! motion and are scored after a full Procrustes fit; the refinement stage
//! works in absolute coordinates once anchors pin the frame, so it is scored
//! unaligned (with a Procrustes fallback when the scenario has no anchors).

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{ObservationModel, ObservationSampler, SparseObservation};
use crate::domds::{domds_round, init_network, network_positions, CommStats, TickRngs};
use crate::domle::{domle_round, owner_positions, LocalMap, LocalizationGraph};
use crate::error::Result;
use crate::harness::config::{AlgorithmKind, ExperimentConfig};
use crate::harness::scenario::generate_scenario;
use crate::mds::{
    batch_mds, center_matrix, procrustes_align, rmse, Alignment, Scenario, SimilarityMatrix,
};
use crate::oja::{assemble_positions, oja_tick, OjaState, ProjectionBox};
use crate::stream::{Purpose, ReplicaStreams};
use crate::DMat;

/// One RMSE evaluation of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRow {
    pub replica: u32,
    pub tick: u64,
    /// Cumulative broadcasts sent network-wide up to this tick. Centralized
    /// estimators (batch, Oja) report 0: they model a fusion center, not a
    /// protocol.
    pub broadcasts: u64,
    pub rmse_m: f64,
}

/// Everything one replica produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRecord {
    pub replica: u32,
    /// Checkpoint rows, ticks strictly increasing.
    pub rows: Vec<CheckpointRow>,
    /// Final estimates in the frame the final RMSE was evaluated in.
    pub final_positions: DMat,
}

/// A finished run: the shared scenario plus one record per replica.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub records: Vec<ReplicaRecord>,
}

impl RunOutput {
    /// Across-replica mean RMSE per checkpoint tick:
    /// `(tick, mean, contributing replicas)`, ticks ascending.
    pub fn mean_curve(&self) -> Vec<(u64, f64, usize)> {
        let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
        for rec in &self.records {
            for row in &rec.rows {
                let e = acc.entry(row.tick).or_insert((0.0, 0));
                e.0 += row.rmse_m;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(t, (s, c))| (t, s / c as f64, c)).collect()
    }

    /// Mean RMSE at the last checkpoint (None for an empty run).
    pub fn final_mean_rmse(&self) -> Option<f64> {
        self.mean_curve().last().map(|&(_, m, _)| m)
    }

    /// Mean RMSE at the first checkpoint (None for an empty run).
    pub fn first_mean_rmse(&self) -> Option<f64> {
        self.mean_curve().first().map(|&(_, m, _)| m)
    }
}

/// Checkpoint ticks for a run of `iterations` ticks: 0, then 10·2^k while
/// below the end, then the end itself.
pub fn checkpoints(iterations: u64) -> Vec<u64> {
    let mut cps = vec![0];
    let mut t = 10;
    while t < iterations {
        cps.push(t);
        t *= 2;
    }
    cps.push(iterations);
    cps
}

/// Realize the scenario from the config and run every replica.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let scenario = generate_scenario(&config.scenario, config.seed)?;
    run_on_scenario(config, scenario)
}

/// Run every replica on an already-realized scenario (the CLI uses this to
/// drive a run from a previously generated scenario file).
pub fn run_on_scenario(config: &ExperimentConfig, scenario: Scenario) -> Result<RunOutput> {
    config.validate()?;
    let obs = config.observation_model(scenario.n())?;
    let records = (0..config.replicas)
        .into_par_iter()
        .map(|replica| run_replica(config, &scenario, &obs, replica))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput { scenario, records })
}

fn run_replica(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    obs: &ObservationModel,
    replica: u32,
) -> Result<ReplicaRecord> {
    let streams = ReplicaStreams::new(cfg.seed, replica);
    let rows_and_finals = match cfg.algorithm {
        AlgorithmKind::BatchMds => run_batch(cfg, scenario, obs, replica, &streams)?,
        AlgorithmKind::Oja => run_oja(cfg, scenario, obs, replica, &streams)?,
        AlgorithmKind::Domds => {
            let (rows, raw, _) = domds_stage(cfg, scenario, obs, replica, &streams)?;
            let aligned = procrustes_align(&raw, scenario.positions(), None)?.aligned;
            (rows, aligned)
        }
        AlgorithmKind::Domle => {
            let graph = refinement_graph(cfg, scenario)?;
            let init = random_config(scenario, &mut streams.rng(0, Purpose::Init));
            let (rows, raw) = domle_stage(cfg, scenario, &graph, &init, replica, &streams, 0, 0, true)?;
            let finals = into_refined_frame(scenario, raw)?;
            (rows, finals)
        }
        AlgorithmKind::DomdsDomle => {
            let (mut rows, raw, stats) = domds_stage(cfg, scenario, obs, replica, &streams)?;
            // Bridge: pin the relative doMDS solution to the absolute frame
            // using the anchors (all nodes when there are none), then refine.
            let anchor_sel =
                (!scenario.anchors().is_empty()).then(|| scenario.anchors());
            let init = procrustes_align(&raw, scenario.positions(), anchor_sel)?.aligned;
            let graph = refinement_graph(cfg, scenario)?;
            let (rows2, refined) = domle_stage(
                cfg,
                scenario,
                &graph,
                &init,
                replica,
                &streams,
                cfg.iterations,
                stats.broadcasts_sent,
                false,
            )?;
            rows.extend(rows2);
            let finals = into_refined_frame(scenario, refined)?;
            (rows, finals)
        }
    };
    let (rows, final_positions) = rows_and_finals;
    Ok(ReplicaRecord { replica, rows, final_positions })
}

/// RMSE alignment for the refinement stage: absolute coordinates when
/// anchors fix the frame, best rigid fit otherwise.
fn refined_alignment(scenario: &Scenario) -> Alignment<'_> {
    if scenario.anchors().is_empty() {
        Alignment::Procrustes
    } else {
        Alignment::None
    }
}

fn into_refined_frame(scenario: &Scenario, raw: DMat) -> Result<DMat> {
    match refined_alignment(scenario) {
        Alignment::None => Ok(raw),
        _ => Ok(procrustes_align(&raw, scenario.positions(), None)?.aligned),
    }
}

fn refinement_graph(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<LocalizationGraph> {
    LocalizationGraph::from_radius(scenario, cfg.refine.radius_m.unwrap_or(f64::INFINITY))
}

/// Initial guess for stand-alone refinement: positions drawn uniformly over
/// the deployment area.
fn random_config<R: Rng>(scenario: &Scenario, rng: &mut R) -> DMat {
    let mut config = DMat::zeros(scenario.n(), scenario.dim());
    for i in 0..scenario.n() {
        for (k, &(lo, hi)) in scenario.area().iter().enumerate() {
            config[(i, k)] = lo + rng.random::<f64>() * (hi - lo);
        }
    }
    config
}

/// Centralized batch baseline: keep the running mean of the reweighted
/// sparse estimates (an unbiased squared-distance estimate from tick 1 on)
/// and re-solve the eigenproblem at every checkpoint. A degenerate solve at
/// an intermediate checkpoint is transient noise and skips the row; at the
/// final tick it is a real property of the data and propagates.
fn run_batch(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    obs: &ObservationModel,
    replica: u32,
    streams: &ReplicaStreams,
) -> Result<(Vec<CheckpointRow>, DMat)> {
    let n = scenario.n();
    let sampler = ObservationSampler::new(scenario, obs, &cfg.channel)?;
    let mut buf = SparseObservation::empty(n);
    let mut sum = DMat::zeros(n, n);
    let cps = checkpoints(cfg.iterations);
    let mut rows = Vec::new();
    let mut finals = None;
    for tick in 1..=cfg.iterations {
        sampler.sample_into(&mut buf, &mut streams.rng(tick, Purpose::Observation));
        sum += &buf.s;
        if cps.binary_search(&tick).is_err() {
            continue;
        }
        let mean = &sum / tick as f64;
        let solved = SimilarityMatrix::from_estimates(&mean).and_then(|s| batch_mds(&s, scenario.dim()));
        match solved {
            Ok(coords) => {
                let fit = procrustes_align(&coords, scenario.positions(), None)?;
                rows.push(CheckpointRow {
                    replica,
                    tick,
                    broadcasts: 0,
                    rmse_m: rmse(&coords, scenario.positions(), Alignment::Procrustes)?,
                });
                finals = Some(fit.aligned);
            }
            Err(e) if tick == cfg.iterations => return Err(e),
            Err(_) => {}
        }
    }
    Ok((rows, finals.expect("final checkpoint either solved or returned")))
}

fn run_oja(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    obs: &ObservationModel,
    replica: u32,
    streams: &ReplicaStreams,
) -> Result<(Vec<CheckpointRow>, DMat)> {
    let n = scenario.n();
    let sampler = ObservationSampler::new(scenario, obs, &cfg.channel)?;
    let mut buf = SparseObservation::empty(n);
    let bx = ProjectionBox::new(cfg.box_alpha)?;
    let mut state = OjaState::init_random(n, scenario.dim(), &mut streams.rng(0, Purpose::Init));
    let cps = checkpoints(cfg.iterations);
    let mut rows = Vec::new();
    let eval = |state: &OjaState, tick: u64, rows: &mut Vec<CheckpointRow>| -> Result<()> {
        let est = assemble_positions(state);
        rows.push(CheckpointRow {
            replica,
            tick,
            broadcasts: 0,
            rmse_m: rmse(&est, scenario.positions(), Alignment::Procrustes)?,
        });
        Ok(())
    };
    eval(&state, 0, &mut rows)?;
    for tick in 1..=cfg.iterations {
        sampler.sample_into(&mut buf, &mut streams.rng(tick, Purpose::Observation));
        let m_n = center_matrix(&buf.s);
        oja_tick(&mut state, &m_n, cfg.schedule.gamma(tick), &bx);
        if cps.binary_search(&tick).is_ok() {
            eval(&state, tick, &mut rows)?;
        }
    }
    let finals = procrustes_align(&assemble_positions(&state), scenario.positions(), None)?.aligned;
    Ok((rows, finals))
}

/// Run the doMDS stage; returns checkpoint rows, the raw (unaligned) final
/// positions and the communication tally.
fn domds_stage(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    obs: &ObservationModel,
    replica: u32,
    streams: &ReplicaStreams,
) -> Result<(Vec<CheckpointRow>, DMat, CommStats)> {
    let n = scenario.n();
    let sampler = ObservationSampler::new(scenario, obs, &cfg.channel)?;
    let mut buf = SparseObservation::empty(n);
    let bx = ProjectionBox::new(cfg.box_alpha)?;
    let mut nodes = init_network(n, scenario.dim(), &mut streams.rng(0, Purpose::Init));
    let mut stats = CommStats::default();
    let cps = checkpoints(cfg.iterations);
    let mut rows = Vec::new();
    let eval = |nodes: &[crate::domds::NodeState],
                tick: u64,
                broadcasts: u64,
                rows: &mut Vec<CheckpointRow>|
     -> Result<()> {
        let est = network_positions(nodes);
        rows.push(CheckpointRow {
            replica,
            tick,
            broadcasts,
            rmse_m: rmse(&est, scenario.positions(), Alignment::Procrustes)?,
        });
        Ok(())
    };
    eval(&nodes, 0, 0, &mut rows)?;
    for tick in 1..=cfg.iterations {
        let mut rngs = TickRngs {
            observation: streams.rng(tick, Purpose::Observation),
            ats_primary: streams.rng(tick, Purpose::AtsPrimary),
            ats_secondary: streams.rng(tick, Purpose::AtsSecondary),
            ats_delta: streams.rng(tick, Purpose::AtsDelta),
        };
        domds_round(
            &mut nodes,
            &sampler,
            &mut buf,
            cfg.ats_q,
            cfg.schedule.gamma(tick),
            &bx,
            cfg.variant,
            &mut rngs,
            &mut stats,
        )?;
        if cps.binary_search(&tick).is_ok() {
            eval(&nodes, tick, stats.broadcasts_sent, &mut rows)?;
        }
    }
    Ok((rows, network_positions(&nodes), stats))
}

/// Run the refinement stage from `init` for `cfg.refine.iterations` rounds.
/// `tick_offset`/`broadcast_offset` continue the counters of a preceding
/// stage; each round counts the 2 unicast messages of its gossip exchange.
#[allow(clippy::too_many_arguments)]
fn domle_stage(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    graph: &LocalizationGraph,
    init: &DMat,
    replica: u32,
    streams: &ReplicaStreams,
    tick_offset: u64,
    broadcast_offset: u64,
    include_initial_row: bool,
) -> Result<(Vec<CheckpointRow>, DMat)> {
    let mut maps: Vec<LocalMap> =
        (0..scenario.n()).map(|i| LocalMap::from_configuration(i, graph, init)).collect();
    let align = refined_alignment(scenario);
    let cps = checkpoints(cfg.refine.iterations);
    let mut rows = Vec::new();
    let eval = |maps: &[LocalMap], round: u64, rows: &mut Vec<CheckpointRow>| -> Result<()> {
        let est = owner_positions(maps, graph, scenario);
        rows.push(CheckpointRow {
            replica,
            tick: tick_offset + round,
            broadcasts: broadcast_offset + 2 * round,
            rmse_m: rmse(&est, scenario.positions(), align)?,
        });
        Ok(())
    };
    if include_initial_row {
        eval(&maps, 0, &mut rows)?;
    }
    for round in 1..=cfg.refine.iterations {
        let tick = tick_offset + round;
        domle_round(
            &mut maps,
            graph,
            scenario,
            &cfg.channel,
            cfg.refine.schedule.gamma(round),
            tick,
            &mut streams.rng(tick, Purpose::Residuals),
            &mut streams.rng(tick, Purpose::Gossip),
        )?;
        if cps.binary_search(&round).is_ok() {
            eval(&maps, round, &mut rows)?;
        }
    }
    Ok((rows, owner_positions(&maps, graph, scenario)))
}
