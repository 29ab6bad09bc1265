//! Run orchestration behind the command-line interface: validate a config,
//! simulate, certify, sweep a numeric axis, or run one of the verification
//! studies. Every entry point returns a process exit status: 0 when all
//! requested certificates or studies pass, 1 on a certification/study
//! failure, 2 on config or runtime errors.

use std::path::{Path, PathBuf};

use crate::config::{load_config, set_axis};
use crate::dynamics::{simulate, SystemConfig, Trajectory};
use crate::report::{
    certificate_text, study_csv, sweep_csv, trajectory_csv, write_atomic, SweepRow,
};
use crate::sliding::certify;
use crate::verify::{self, StudyKind};

pub const WORKERS_ENV: &str = "CAGINALP_SMC_WORKERS";

#[derive(Debug, Clone, PartialEq)]
pub enum CliCommand {
    Validate,
    Simulate,
    Certify,
    Sweep { axis: String, ladder: Vec<f64> },
    Verify { study: StudyKind },
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub command: CliCommand,
    pub emit_coeffs: bool,
    pub workers: usize,
}

impl RunManifest {
    pub fn new(config_path: PathBuf, out_dir: PathBuf, command: CliCommand) -> Self {
        RunManifest { config_path, out_dir, command, emit_coeffs: false, workers: workers_from_env() }
    }
}

pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w >= 1)
        .unwrap_or(1)
}

/// Execute a manifest; the returned code is the intended process status.
pub fn execute(man: &RunManifest) -> i32 {
    let config = match load_config(&man.config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match &man.command {
        CliCommand::Validate => {
            println!("config ok: problem {}, {} modes, dt = {}, t_final = {}",
                config.problem.name(), config.n_modes(), config.dt, config.t_final);
            0
        }
        CliCommand::Simulate => match run_simulation(&config, &man.out_dir, man.emit_coeffs) {
            Ok(_) => 0,
            Err(msg) => {
                eprintln!("error: {msg}");
                2
            }
        },
        CliCommand::Certify => {
            let traj = match run_simulation(&config, &man.out_dir, man.emit_coeffs) {
                Ok(t) => t,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return 2;
                }
            };
            match certify(&traj, &config) {
                Ok(cert) => {
                    let text = certificate_text(&cert);
                    if let Err(e) = write_atomic(&man.out_dir.join("certificate.txt"), &text) {
                        eprintln!("error: cannot write certificate: {e}");
                        return 2;
                    }
                    print!("{text}");
                    if cert.certified {
                        0
                    } else {
                        eprintln!("certificate failed: {}", cert.reason);
                        1
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            }
        }
        CliCommand::Sweep { axis, ladder } => sweep(&config, axis, ladder, man),
        CliCommand::Verify { study } => run_study(&config, *study, &man.out_dir),
    }
}

fn run_simulation(
    config: &SystemConfig,
    out_dir: &Path,
    emit_coeffs: bool,
) -> Result<Trajectory, String> {
    let traj = simulate(config).map_err(|e| e.to_string())?;
    let csv = trajectory_csv(&traj, emit_coeffs);
    write_atomic(&out_dir.join("trajectory.csv"), &csv)
        .map_err(|e| format!("cannot write trajectory: {e}"))?;
    Ok(traj)
}

/// One run per ladder value, each written to its own subdirectory, plus a
/// consolidated table. Levels run on up to `workers` threads; results are
/// assembled in ladder order so output is identical regardless of the
/// worker count.
fn sweep(config: &SystemConfig, axis: &str, ladder: &[f64], man: &RunManifest) -> i32 {
    if ladder.is_empty() {
        eprintln!("error: empty sweep ladder");
        return 2;
    }
    // reject bad axes before any level runs
    {
        let mut probe = config.clone();
        if let Err(msg) = set_axis(&mut probe, axis, ladder[0]) {
            eprintln!("error: {msg}");
            return 2;
        }
    }
    let workers = man.workers.max(1).min(ladder.len());
    let mut results: Vec<Option<Result<SweepRow, String>>> = vec![None; ladder.len()];
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for worker in 0..workers {
            let out_dir = man.out_dir.clone();
            let emit_coeffs = man.emit_coeffs;
            handles.push(scope.spawn(move || {
                let mut mine = Vec::new();
                for (i, &value) in ladder.iter().enumerate() {
                    if i % workers != worker {
                        continue;
                    }
                    mine.push((i, sweep_level(config, axis, value, i, &out_dir, emit_coeffs)));
                }
                mine
            }));
        }
        for handle in handles {
            for (i, res) in handle.join().expect("sweep worker panicked") {
                results[i] = Some(res);
            }
        }
    });

    let mut rows = Vec::new();
    let mut first_error = None;
    for (i, slot) in results.into_iter().enumerate() {
        match slot.expect("every level was scheduled") {
            Ok(row) => rows.push(row),
            Err(msg) => {
                first_error = Some((i, msg));
                break;
            }
        }
    }
    let table = sweep_csv(axis, &rows);
    if let Err(e) = write_atomic(&man.out_dir.join("sweep.csv"), &table) {
        eprintln!("error: cannot write sweep table: {e}");
        return 2;
    }
    print!("{table}");
    if let Some((i, msg)) = first_error {
        eprintln!("error: level {i} ({axis} = {}): {msg}", ladder[i]);
        return 2;
    }
    if rows.iter().all(|r| r.certified) {
        0
    } else {
        eprintln!("certificate failed on at least one level");
        1
    }
}

fn sweep_level(
    config: &SystemConfig,
    axis: &str,
    value: f64,
    index: usize,
    out_dir: &Path,
    emit_coeffs: bool,
) -> Result<SweepRow, String> {
    let mut level = config.clone();
    set_axis(&mut level, axis, value)?;
    let traj = simulate(&level).map_err(|e| e.to_string())?;
    let cert = certify(&traj, &level).map_err(|e| e.to_string())?;
    let dir = out_dir.join(format!("level_{index:02}"));
    write_atomic(&dir.join("trajectory.csv"), &trajectory_csv(&traj, emit_coeffs))
        .map_err(|e| e.to_string())?;
    write_atomic(&dir.join("certificate.txt"), &certificate_text(&cert))
        .map_err(|e| e.to_string())?;
    Ok(SweepRow::from_certificate(value, &cert))
}

fn run_study(config: &SystemConfig, study: StudyKind, out_dir: &Path) -> i32 {
    let report = match study {
        StudyKind::Modes => {
            let n = config.n_modes();
            let ladder = [n / 4, n / 2, n];
            verify::mode_convergence(config, &ladder).map_err(|e| e.to_string())
        }
        StudyKind::Eps => {
            let e = config.epsilon;
            verify::eps_convergence(config, &[10.0 * e, 3.0 * e, e]).map_err(|e| e.to_string())
        }
        StudyKind::Dt => {
            let dt = config.dt;
            verify::dt_convergence(config, &[4.0 * dt, 2.0 * dt, dt]).map_err(|e| e.to_string())
        }
        StudyKind::ContDep => {
            verify::continuous_dependence(config, &[1e-2, 1e-3]).map_err(|e| e.to_string())
        }
        StudyKind::Energy => simulate(config)
            .map(|traj| verify::energy_monitor(&traj, config))
            .map_err(|e| e.to_string()),
        StudyKind::SignDeriv => simulate(config)
            .map(|traj| verify::sign_derivative_check(&traj, config))
            .map_err(|e| e.to_string()),
    };
    match report {
        Ok(report) => {
            let csv = study_csv(&report);
            let name = format!("study_{}.csv", report.study.name());
            if let Err(e) = write_atomic(&out_dir.join(name), &csv) {
                eprintln!("error: cannot write study table: {e}");
                return 2;
            }
            print!("{csv}");
            for note in &report.notes {
                println!("# {note}");
            }
            if report.passed {
                println!("study {}: pass", report.study.name());
                0
            } else {
                println!("study {}: FAIL", report.study.name());
                1
            }
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            2
        }
    }
}
