use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use sfvqd_core::hamio::{load, validate_physics, HamiltonianRecord, LoadMode};
use sfvqd_core::oracle::{casci_reference, labelled_spectrum, LabeledEigenstate, Reference};
use sfvqd_core::screen::{ancilla_distribution, Screen};
use sfvqd_core::spinops::{pass_probability, HalfInt, SpinSector};
use sfvqd_core::vqd::{run_deflation_with, Method, VqdProblem, VqdResult};

use crate::manifest::Manifest;
use crate::output::{write_csv, PlotRow, ReferenceRow, ResultRow};

/// Failure that maps to exit code 2.
#[derive(Debug)]
pub struct ValidationFailed(pub String);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationFailed {}

/// What a finished command reports back to `main`.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
    Mismatch,
}

/// Loads and physics-checks every fixture; any failure is a validation error.
pub fn load_fixtures(paths: &[PathBuf], mode: LoadMode) -> Result<Vec<HamiltonianRecord>> {
    let mut out = Vec::with_capacity(paths.len());
    let mut problems = Vec::new();
    for p in paths {
        match load(p, mode) {
            Ok(rec) => match validate_physics(&rec) {
                Ok(rep) if rep.is_clean() => out.push(rec),
                Ok(rep) => {
                    for (check, norm) in &rep.violations {
                        problems.push(format!("{}: {check} = {norm:.2e}", p.display()));
                    }
                }
                Err(e) => problems.push(format!("{}: {e}", p.display())),
            },
            Err(e) => problems.push(e.to_string()),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(ValidationFailed(problems.join("\n")).into())
    }
}

pub fn validate(paths: &[PathBuf], lenient: bool) -> Result<Status> {
    let mode = if lenient { LoadMode::Lenient } else { LoadMode::Strict };
    let mut failed = 0;
    for p in paths {
        let line = match load(p, mode).and_then(|rec| validate_physics(&rec)) {
            Ok(rep) if rep.is_clean() => {
                let worst = rep.checks.iter().map(|c| c.1).fold(0.0, f64::max);
                let warn = if rep.warnings.is_empty() {
                    String::new()
                } else {
                    format!(" (warnings: {})", rep.warnings.join("; "))
                };
                format!("ok    {} largest residual {worst:.1e}{warn}", p.display())
            }
            Ok(rep) => {
                failed += 1;
                let v: Vec<String> = rep.violations.iter().map(|(c, n)| format!("{c} = {n:.2e}")).collect();
                format!("FAIL  {} {}", p.display(), v.join(", "))
            }
            Err(e) => {
                failed += 1;
                format!("FAIL  {e}")
            }
        };
        println!("{line}");
    }
    if failed > 0 {
        return Err(ValidationFailed(format!("{failed} of {} fixtures failed validation", paths.len())).into());
    }
    Ok(Status::Ok)
}

struct Task {
    fixture: usize,
    method: Method,
    layers: usize,
}

pub fn run(manifest: &Manifest) -> Result<Status> {
    if manifest.fixtures.is_empty() {
        return Err(ValidationFailed("the manifest names no fixtures".into()).into());
    }
    let records = load_fixtures(&manifest.fixtures, LoadMode::Strict)?;
    let cfg = &manifest.config;
    let mut sectors = Vec::with_capacity(records.len());
    for rec in &records {
        let sector = cfg
            .sector(rec.n_alpha, rec.n_beta)
            .map_err(|e| ValidationFailed(format!("{}: {e}", rec.file_name())))?;
        sectors.push(sector);
    }
    let mut tasks = Vec::new();
    for (i, _) in records.iter().enumerate() {
        for method in cfg.method.to_vec() {
            for layers in cfg.layers.to_vec() {
                let vc = cfg.vqd_config(method, layers, sectors[i]);
                vc.validate().map_err(|e| ValidationFailed(e.to_string()))?;
                tasks.push(Task {
                    fixture: i,
                    method,
                    layers,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.jobs.unwrap_or(0))
        .build()?;
    let outcomes: Vec<Result<(VqdResult, Vec<f64>)>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let rec = &records[t.fixture];
                let h = rec.hamiltonian()?;
                let vc = cfg.vqd_config(t.method, t.layers, sectors[t.fixture]);
                let mut times = Vec::new();
                let start = Instant::now();
                let problem = VqdProblem::new(&h, rec.n_spatial, &vc)?;
                let res = run_deflation_with(&problem, &vc, |_| {
                    times.push(start.elapsed().as_secs_f64())
                })?;
                Ok((res, times))
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut all_converged = true;
    for (t, outcome) in tasks.iter().zip(outcomes) {
        let (res, times) = outcome?;
        all_converged &= res.all_converged();
        let rec = &records[t.fixture];
        let key = rec.key();
        let mut prev = 0.0;
        for (s, (cum, time)) in res.states.iter().zip(res.cumulative_overlap_checks.iter().zip(&times)) {
            rows.push(ResultRow {
                molecule: key.molecule.clone(),
                mode: key.mode.to_string(),
                lambda: key.lambda(),
                method: t.method.to_string(),
                layers: t.layers,
                state: s.index,
                energy: s.energy,
                s_squared: s.s_squared,
                overlap_checks: s.overlap_checks,
                cumulative_overlap_checks: *cum,
                restart: s.selected_restart,
                converged: s.converged,
                n_evals: s.n_evals,
                wall_time_s: time - prev,
            });
            prev = *time;
        }
    }
    rows.sort_by(|a, b| {
        (&a.molecule, &a.mode)
            .cmp(&(&b.molecule, &b.mode))
            .then(a.lambda.total_cmp(&b.lambda))
            .then((&a.method, a.layers, a.state).cmp(&(&b.method, b.layers, b.state)))
    });

    fs::create_dir_all(&manifest.out).with_context(|| format!("creating {}", manifest.out.display()))?;
    if manifest.emit.csv {
        write_csv(&manifest.out.join("results.csv"), &rows)?;
    }
    if manifest.emit.plot_data {
        let mut refs = BTreeMap::new();
        for (i, rec) in records.iter().enumerate() {
            let labels = labelled_spectrum(&rec.hamiltonian()?, rec.n_spatial)?;
            let key = rec.key();
            let r = casci_reference(&labels, &sectors[i], cfg.n_states);
            refs.insert((key.molecule, key.mode.to_string(), key.lambda_centi), r.energies);
        }
        let plot: Vec<PlotRow> = rows
            .iter()
            .map(|r| {
                let reference = refs
                    .get(&(r.molecule.clone(), r.mode.clone(), (r.lambda * 100.0).round() as i64))
                    .and_then(|e| e.get(r.state).copied());
                PlotRow {
                    molecule: r.molecule.clone(),
                    mode: r.mode.clone(),
                    lambda: r.lambda,
                    method: r.method.clone(),
                    layers: r.layers,
                    state: r.state,
                    energy: r.energy,
                    reference,
                    error: reference.map(|e| r.energy - e),
                    s_squared: r.s_squared,
                }
            })
            .collect();
        write_csv(&manifest.out.join("plot_data.csv"), &plot)?;
    }
    if let Some(hook) = &manifest.emit.plot_hook {
        run_hook(hook, &manifest.out)?;
    }
    for r in &rows {
        println!(
            "{} {} {:+.2} {} L{} state {}: E = {:.8} <S2> = {:.4}{}",
            r.molecule,
            r.mode,
            r.lambda,
            r.method,
            r.layers,
            r.state,
            r.energy,
            r.s_squared,
            if r.converged { "" } else { " (not converged)" }
        );
    }
    Ok(if all_converged { Status::Ok } else { Status::NotConverged })
}

fn run_hook(hook: &str, dir: &Path) -> Result<()> {
    let status = Command::new("sh")
        .arg("-c")
        .arg(hook)
        .current_dir(dir)
        .env("SFVQD_OUT", dir)
        .status()
        .with_context(|| format!("starting plot hook `{hook}`"))?;
    if !status.success() {
        bail!("plot hook `{hook}` exited with {status}");
    }
    Ok(())
}

/// Exact energies per fixture and sector. Without explicit spins every spin
/// compatible with the fixture's electron count is tabulated.
pub fn reference(paths: &[PathBuf], spins: &[f64], n_states: usize, out: Option<&Path>) -> Result<Status> {
    let records = load_fixtures(paths, LoadMode::Strict)?;
    let mut rows = Vec::new();
    for rec in &records {
        let labels = labelled_spectrum(&rec.hamiltonian()?, rec.n_spatial)?;
        let n_elec = rec.n_elec();
        let min_twice = (rec.n_alpha as i32 - rec.n_beta as i32).unsigned_abs() as usize;
        let wanted: Vec<f64> = if spins.is_empty() {
            (min_twice..=n_elec).step_by(2).map(|t| t as f64 / 2.0).collect()
        } else {
            spins.to_vec()
        };
        let key = rec.key();
        for &s in &wanted {
            let spin = HalfInt::try_from(s)?;
            let sector = SpinSector::for_target_spin(n_elec, spin).and_then(|sec| {
                sec.check_fits(rec.n_spatial)?;
                Ok(sec)
            });
            let r = match &sector {
                Ok(sec) => casci_reference(&labels, sec, n_states),
                Err(_) => Reference {
                    energies: Vec::new(),
                    complete: false,
                },
            };
            let (na, nb) = sector.as_ref().map_or((0, 0), |sec| (sec.n_alpha(), sec.n_beta()));
            if r.energies.is_empty() {
                rows.push(ReferenceRow {
                    molecule: key.molecule.clone(),
                    mode: key.mode.to_string(),
                    lambda: key.lambda(),
                    n_alpha: na,
                    n_beta: nb,
                    spin: s,
                    state: 0,
                    energy: None,
                    complete: false,
                });
            }
            for (k, e) in r.energies.iter().enumerate() {
                rows.push(ReferenceRow {
                    molecule: key.molecule.clone(),
                    mode: key.mode.to_string(),
                    lambda: key.lambda(),
                    n_alpha: na,
                    n_beta: nb,
                    spin: s,
                    state: k,
                    energy: Some(*e),
                    complete: r.complete,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (&a.molecule, &a.mode)
            .cmp(&(&b.molecule, &b.mode))
            .then(a.spin.total_cmp(&b.spin))
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.state.cmp(&b.state))
    });
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            write_csv(path, &rows)?;
        }
        None => {
            let mut w = csv_stdout();
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(Status::Ok)
}

fn csv_stdout() -> csv::Writer<std::io::Stdout> {
    csv::Writer::from_writer(std::io::stdout())
}

/// Screens an exact `|S, m_z⟩` eigenstate and compares the pass mass with the
/// closed form.
pub fn probe(path: &Path, spin: f64, m_z: f64, index: usize) -> Result<Status> {
    let rec = load_fixtures(&[path.to_path_buf()], LoadMode::Strict)?.remove(0);
    let spin = HalfInt::try_from(spin)?;
    let m_z = HalfInt::try_from(m_z)?;
    let n_elec = rec.n_elec() as i32;
    let twice_diff = m_z.twice();
    if (n_elec + twice_diff) % 2 != 0 || twice_diff.abs() > n_elec {
        return Err(ValidationFailed(format!("m_z = {m_z} is impossible with {n_elec} electrons")).into());
    }
    let n_alpha = ((n_elec + twice_diff) / 2) as usize;
    let n_beta = ((n_elec - twice_diff) / 2) as usize;
    let labels = labelled_spectrum(&rec.hamiltonian()?, rec.n_spatial)?;
    let state: &LabeledEigenstate = labels
        .iter()
        .filter(|l| l.n_alpha == n_alpha && l.n_beta == n_beta && l.spin == spin)
        .nth(index)
        .ok_or_else(|| {
            anyhow!(ValidationFailed(format!(
                "no eigenstate #{index} with S = {spin}, m_z = {m_z} in {}",
                path.display()
            )))
        })?;
    let sector = SpinSector::new(n_alpha, n_beta)?;
    let screen = Screen::for_sector(rec.n_spatial, &sector)?;
    let dist = ancilla_distribution(&screen.apply(&state.vector)?, screen.n_anc())?;
    let limit = (m_z.abs().twice() / 2) as i64;
    let pass: f64 = dist.iter().filter(|(m, _)| m.abs() <= limit).map(|(_, p)| p).sum();
    let want = pass_probability(spin, m_z)?;
    println!("{} S = {spin} m_z = {m_z} E = {:.10} ({} ancillas)", rec.file_name(), state.energy, screen.n_anc());
    for (m, p) in &dist {
        println!("  m_x {m:+} : {p:.10}");
    }
    println!("pass mass {pass:.10}, expected {want:.10}");
    Ok(if (pass - want).abs() > 1e-6 { Status::Mismatch } else { Status::Ok })
}
