//! Subcommands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use cryoporo_core::galerkin::{compare, Discrepancy, OracleTolerances};
use cryoporo_core::solver::{FieldState, Simulation, Trajectory};
use cryoporo_core::validate_hypotheses;

use crate::config::{self, FileConfig};
use crate::error::CliError;
use crate::output::{self, Checkpoint};

/// Options shared by the run-type subcommands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub n_modes: Option<usize>,
    pub resume: Option<PathBuf>,
    pub max_steps: Option<usize>,
}

impl RunOptions {
    fn apply(&self, cfg: &mut FileConfig) {
        if let Some(out) = &self.out {
            cfg.run.output.out_dir = out.clone();
        }
        if let Some(n) = self.n_modes {
            cfg.run.n_modes = n;
        }
    }
}

pub fn config_hash(cfg: &FileConfig) -> [u8; 32] {
    Sha256::digest(config::canonical(cfg).as_bytes()).into()
}

/// Result of `simulate`.
#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub out_dir: PathBuf,
    pub steps: usize,
    pub finished: bool,
    pub trajectory: Trajectory,
}

fn write_sim(dir: &Path, sim: &Simulation, hash: [u8; 32]) -> Result<(), CliError> {
    output::write_run(
        dir,
        sim.domain.nodes(),
        Some(&sim.records),
        &sim.snapshots,
        "snapshot",
    )?;
    let ck = Checkpoint {
        config_hash: hash,
        state: sim.state.clone(),
        records: sim.records.clone(),
        snapshots: sim.snapshots.clone(),
        next_snapshot: sim.next_snapshot,
    };
    output::write_file(&dir.join("checkpoint.bin"), &ck.encode())
}

pub fn simulate(cfg: &FileConfig, opts: &RunOptions) -> Result<SimulateOutcome, CliError> {
    let mut cfg = cfg.clone();
    opts.apply(&mut cfg);
    let hash = config_hash(&cfg);
    let mut sim = cfg.run.simulation()?;
    if let Some(path) = &opts.resume {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let ck = Checkpoint::decode(&bytes)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if ck.config_hash != hash {
            return Err(CliError::Config(format!(
                "{}: checkpoint was written for a different configuration",
                path.display()
            )));
        }
        ck.state.check_len(&sim.domain)?;
        sim.state = ck.state;
        sim.records = ck.records;
        sim.snapshots = ck.snapshots;
        sim.next_snapshot = ck.next_snapshot;
    }
    let dir = cfg.run.output.out_dir.clone();
    let mut steps = 0;
    loop {
        if opts.max_steps.is_some_and(|m| steps >= m) {
            break;
        }
        match sim.step() {
            Ok(true) => steps += 1,
            Ok(false) => break,
            Err(e) => {
                write_sim(&dir, &sim, hash)?;
                let dump = output::snapshot_csv(sim.domain.nodes(), &sim.state);
                output::write_file(&dir.join("fault_state.csv"), dump.as_bytes())?;
                output::write_file(&dir.join("fault.txt"), format!("{e}\n").as_bytes())?;
                return Err(e.into());
            }
        }
    }
    write_sim(&dir, &sim, hash)?;
    let finished = sim.is_finished();
    Ok(SimulateOutcome {
        out_dir: dir,
        steps,
        finished,
        trajectory: sim.into_trajectory(),
    })
}

fn tolerances(cfg: &FileConfig) -> OracleTolerances {
    OracleTolerances {
        atol: cfg.oracle_atol,
        rtol: cfg.oracle_rtol,
        ..OracleTolerances::default()
    }
}

/// Runs the spectral reference solver at the snapshot times of `simulate`.
pub fn oracle(cfg: &FileConfig, opts: &RunOptions) -> Result<Vec<FieldState>, CliError> {
    let mut cfg = cfg.clone();
    opts.apply(&mut cfg);
    let (orc, init) = cfg.run.oracle()?;
    let times = cfg.run.run_settings().snapshot_times();
    let (snaps, _) = orc.integrate(&init, &times, tolerances(&cfg))?;
    let dir = &cfg.run.output.out_dir;
    let domain = cfg.run.build_domain()?;
    output::write_run(dir, domain.nodes(), None, &snaps, "oracle_snapshot")?;
    Ok(snaps)
}

pub fn compare_run(cfg: &FileConfig, opts: &RunOptions) -> Result<Discrepancy, CliError> {
    let mut cfg = cfg.clone();
    opts.apply(&mut cfg);
    let plain = RunOptions {
        resume: None,
        max_steps: None,
        ..RunOptions::default()
    };
    let sim = simulate(&cfg, &plain)?;
    let orc = oracle(&cfg, &plain)?;
    let domain = cfg.run.build_domain()?;
    let d = compare(&orc, &sim.trajectory.snapshots, &domain)?;
    let mut table = String::from("field,rel_l2,sup\n");
    for (i, name) in Discrepancy::FIELDS.iter().enumerate() {
        table.push_str(&format!("{name},{:.16e},{:.16e}\n", d.rel_l2[i], d.sup[i]));
    }
    output::write_file(&cfg.run.output.out_dir.join("compare.csv"), table.as_bytes())?;
    Ok(d)
}

/// Expands the `[sweep]` section into one configuration per grid point.
pub fn sweep_points(cfg: &FileConfig) -> Result<Vec<FileConfig>, CliError> {
    let mut points = vec![cfg.clone()];
    for (name, values) in &cfg.sweep {
        let (section, key) = name.split_once('.').expect("validated sweep key");
        let mut next = Vec::with_capacity(points.len() * values.len());
        for p in &points {
            for v in values {
                let mut q = p.clone();
                config::apply(&mut q, section, key, v)
                    .map_err(|e| CliError::Config(format!("sweep {name} = {v}: {e}")))?;
                next.push(q);
            }
        }
        points = next;
    }
    let base = cfg.run.output.out_dir.clone();
    for (i, p) in points.iter_mut().enumerate() {
        p.sweep.clear();
        p.run.output.out_dir = base.join(format!("point_{i:04}"));
    }
    Ok(points)
}

/// Per-point results of a sweep, in grid order.
pub fn sweep(cfg: &FileConfig, opts: &RunOptions) -> Result<Vec<Result<usize, CliError>>, CliError> {
    let mut cfg = cfg.clone();
    opts.apply(&mut cfg);
    let points = sweep_points(&cfg)?;
    let threads = std::env::var("CRYOPORO_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let plain = RunOptions::default();
    let results = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let dir = &p.run.output.out_dir;
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                output::write_file(&dir.join("config.ini"), config::dump(p, false).as_bytes())?;
                simulate(p, &plain).map(|o| o.steps)
            })
            .collect()
    });
    Ok(results)
}

/// Prints the admissibility report; `Ok(true)` when every clause holds.
pub fn check(cfg: &FileConfig) -> bool {
    let report = validate_hypotheses(&cfg.run.material);
    print!("{report}");
    report.is_valid()
}
