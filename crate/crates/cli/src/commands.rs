//! Subcommand implementations. Every run directory receives a manifest
//! (config copy, versions, seed, wall time, verdicts) and the CSV schema,
//! so artifacts are self-describing and reruns need nothing else.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use parasym_core::domain::Domain;
use parasym_core::dynamics::{
    classify_entire_solution_case, heteroclinic_from, track_lambda, verify_asymptotic_symmetry,
    CandidateRun, LambdaSeries, OmegaParams, Verdict,
};
use parasym_core::equilibria::{equilibrium_sweep, NewtonOptions, SweepOptions};
use parasym_core::field::Field;
use parasym_core::io::{diagnostics_csv, equilibrium_index_csv, read_snapshot, write_snapshot};
use parasym_core::nonlinearity::Nonlinearity;
use parasym_core::reflection::capital_lambda;
use parasym_core::solver::{evolve, SolverParams, Trajectory};

use crate::config::Config;
use crate::plot;

/// Aggregated outcome of a subcommand, mapped onto the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    Inconclusive,
    Fail,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Complete => 0,
            Outcome::Inconclusive => 2,
            Outcome::Fail => 1,
        }
    }

    fn merge(self, other: Outcome) -> Outcome {
        use Outcome::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Complete,
        }
    }
}

fn verdict_outcome(v: Verdict) -> Outcome {
    match v {
        Verdict::Pass => Outcome::Complete,
        Verdict::Inconclusive => Outcome::Inconclusive,
        Verdict::Fail => Outcome::Fail,
    }
}

pub struct RunContext {
    pub config: Config,
    pub config_text: String,
    pub config_dir: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub started: Instant,
}

impl RunContext {
    pub fn new(
        config_path: &Path,
        out: PathBuf,
        seed_override: Option<u64>,
        jobs: usize,
    ) -> Result<RunContext> {
        let (config, config_text) = Config::load(config_path)?;
        let seed = seed_override.or(config.seed).unwrap_or(0);
        let config_dir = config_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out)
            .with_context(|| format!("cannot create output directory {}", out.display()))?;
        Ok(RunContext {
            config,
            config_text,
            config_dir,
            out,
            seed,
            jobs: jobs.max(1),
            started: Instant::now(),
        })
    }

    fn write_manifest(
        &self,
        subcommand: &str,
        verdicts: &[(String, String)],
        outcome: Outcome,
    ) -> Result<()> {
        let mut text = String::new();
        text.push_str("parasym manifest v1\n");
        text.push_str(&format!("subcommand: {subcommand}\n"));
        text.push_str(&format!("version: {}\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!("seed: {}\n", self.seed));
        text.push_str(&format!("jobs: {}\n", self.jobs));
        text.push_str(&format!(
            "wall_time_s: {:.3}\n",
            self.started.elapsed().as_secs_f64()
        ));
        text.push_str(&format!("exit_code: {}\n", outcome.exit_code()));
        text.push_str("verdicts:\n");
        for (name, verdict) in verdicts {
            text.push_str(&format!("  {name}: {verdict}\n"));
        }
        text.push_str("config:\n");
        for line in self.config_text.lines() {
            text.push_str(&format!("  {line}\n"));
        }
        std::fs::write(self.out.join("manifest.txt"), text)?;
        std::fs::write(self.out.join("csv_schema.txt"), CSV_SCHEMA)?;
        Ok(())
    }
}

pub const CSV_SCHEMA: &str = "\
parasym CSV schemas
===================

lambda.csv
  time           snapshot time
  lambda         reflection-functional value (half-grid quantized)
  witness_mu     violating plane one half-step below lambda (empty when lambda = 0)
  witness_node   flat grid node index of the worst violation (empty when lambda = 0)
  tol            absolute tolerance used (tol_rel * sup|u|)

diagnostics.csv
  t                  snapshot time
  min_u, max_u       extreme values over interior nodes
  lambda             reflection-functional value at the snapshot
  symmetry_defect    max |u(x) - u(mirror x)|

equilibria.csv
  name                   record identifier (eq_NNN)
  class                  zero | E0 | Eplus
  lambda                 reflection-functional value
  residual               sup norm of the steady residual
  n_nodal_components     connected components of {u > tol_nodal}

profile.csv
  x1, x2         node coordinates (x2 = 0 in 1-D)
  u              field value

convergence.csv
  study          spatial | temporal
  n_cells        grid cells
  dt             time step
  error          sup-norm error against the exact decay profile
";

fn write_trajectory_artifacts(
    dir: &Path,
    traj: &Trajectory,
    series: &LambdaSeries,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("lambda.csv"), series.csv())?;
    std::fs::write(dir.join("diagnostics.csv"), diagnostics_csv(traj, series))?;
    let (t, u) = traj.snapshots.last().expect("nonempty trajectory");
    write_snapshot(&dir.join("final.psnap"), *t, u)?;
    let mut profile = String::from("x1,x2,u\n");
    let domain = &traj.domain;
    for i in 0..domain.interior_count() {
        let [x1, x2] = domain.node_coords(domain.node_of_interior(i));
        profile.push_str(&format!("{:?},{:?},{:?}\n", x1, x2, u.values()[i]));
    }
    std::fs::write(dir.join("profile.csv"), profile)?;
    Ok(())
}

/// Asymmetric two-bump nonnegative initial data, seeded per run index.
fn seeded_asymmetric_initial(domain: &Arc<Domain>, seed: u64, index: usize) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x517c_c1b7));
    let ell = domain.half_extent();
    let c1 = rng.gen_range(0.1 * ell..0.6 * ell);
    let c2 = rng.gen_range(-0.6 * ell..-0.05 * ell);
    let w1 = rng.gen_range(0.1 * ell..0.3 * ell);
    let w2 = rng.gen_range(0.1 * ell..0.3 * ell);
    let h1 = rng.gen_range(0.3..0.8);
    let h2 = rng.gen_range(0.15..0.5);
    Field::from_fn(domain, |x, _| {
        h1 * (-((x - c1) / w1).powi(2)).exp() + h2 * (-((x - c2) / w2).powi(2)).exp()
    })
}

pub fn simulate(ctx: &RunContext) -> Result<Outcome> {
    let domain = ctx.config.build_domain()?;
    let f = ctx.config.build_nonlinearity()?;
    let forcing = ctx.config.build_forcing()?;
    let params = ctx.config.build_solver_params()?;
    let u0 = ctx.config.build_initial(&domain, &f, &ctx.config_dir)?;
    let tols = ctx.config.dynamics_tols();

    let traj = evolve(&u0, &f, &forcing, &params, None)?;
    let series = track_lambda(&traj, &tols);
    write_trajectory_artifacts(&ctx.out, &traj, &series)?;

    let (verdict, outcome) = match &traj.aborted {
        None => ("complete".to_string(), Outcome::Complete),
        Some(info) => (
            format!("aborted: sup norm {:.3e} at t = {}", info.sup_norm, info.t),
            Outcome::Inconclusive,
        ),
    };
    let verdicts = vec![
        ("run".to_string(), verdict),
        (
            "lambda_final".to_string(),
            format!("{:?}", series.last().result.lambda.value),
        ),
        (
            "upward_violations".to_string(),
            series.monotonicity.upward_violations.to_string(),
        ),
    ];
    ctx.write_manifest("simulate", &verdicts, outcome)?;
    Ok(outcome)
}

pub fn lambda(snapshot: &Path, tol_rel: f64, out: Option<&Path>) -> Result<Outcome> {
    let (t, field) = read_snapshot(snapshot)?;
    let result = capital_lambda(&field, tol_rel);
    println!(
        "t = {t}, lambda = {:?} (plane index {} of {}, h/2 = {:?})",
        result.lambda.value,
        result.lambda.k,
        field.domain().half_steps(),
        field.domain().spacing() * 0.5,
    );
    if let Some(w) = &result.witness {
        println!(
            "witness: plane {:?}, node {}, violation {:.6e}",
            w.mu, w.node, w.violation
        );
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut csv = String::from(parasym_core::reflection::LambdaResult::CSV_HEADER);
        csv.push('\n');
        csv.push_str(&result.csv_row(t));
        csv.push('\n');
        std::fs::write(dir.join("lambda.csv"), csv)?;
    }
    Ok(Outcome::Complete)
}

pub fn equilibria(ctx: &RunContext) -> Result<Outcome> {
    let domain = ctx.config.build_domain()?;
    let f = ctx.config.build_nonlinearity()?;
    let n_guesses = ctx
        .config
        .equilibria
        .as_ref()
        .map(|s| s.n_guesses)
        .unwrap_or(50);
    let report = equilibrium_sweep(
        &f,
        &domain,
        &SweepOptions {
            n_guesses,
            seed: ctx.seed,
            jobs: ctx.jobs,
            ..SweepOptions::default()
        },
        &NewtonOptions::default(),
        &parasym_core::equilibria::ClassifyOptions::default(),
    );

    let named: Vec<(String, &parasym_core::equilibria::EquilibriumRecord)> = report
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (format!("eq_{i:03}"), r))
        .collect();
    std::fs::write(ctx.out.join("equilibria.csv"), equilibrium_index_csv(&named))?;
    for (name, record) in &named {
        write_snapshot(&ctx.out.join(format!("{name}.psnap")), 0.0, &record.field)?;
    }

    let verdicts = vec![
        ("records".to_string(), report.records.len().to_string()),
        ("eplus_count".to_string(), report.eplus_count.to_string()),
        ("converged".to_string(), report.n_converged.to_string()),
        ("failed".to_string(), report.n_failed.to_string()),
        (
            "negative_discarded".to_string(),
            report.n_negative_discarded.to_string(),
        ),
        (
            "min_eplus_e0_distance".to_string(),
            report
                .min_eplus_e0_distance
                .map(|d| format!("{d:?}"))
                .unwrap_or_else(|| "n/a".to_string()),
        ),
    ];
    ctx.write_manifest("equilibria", &verdicts, Outcome::Complete)?;
    Ok(Outcome::Complete)
}

/// The verification harness relies on the reaction term being
/// independent of x1 and even in p1; audit the declared flags before
/// trusting any verdict built on them.
fn audit_structure(f: &Nonlinearity, seed: u64) -> Result<()> {
    let report = parasym_core::nonlinearity::check_symmetry_hypotheses(f, 500, seed)?;
    if !report.pass() {
        anyhow::bail!(
            "reaction term `{}` violates its declared structure: \
             x1 dependence {:.3e}, p1 oddness {:.3e}",
            f.name(),
            report.max_x1_violation,
            report.max_p1_violation
        );
    }
    Ok(())
}

pub fn theorem1(ctx: &RunContext) -> Result<Outcome> {
    let domain = ctx.config.build_domain()?;
    let f = ctx.config.build_nonlinearity()?;
    audit_structure(&f, ctx.seed)?;
    let forcing = ctx.config.build_forcing()?;
    let params = ctx.config.build_solver_params()?;
    let tols = ctx.config.dynamics_tols();
    let n_initial = ctx
        .config
        .theorem1
        .as_ref()
        .map(|s| s.n_initial)
        .unwrap_or(5);
    let omega_params = OmegaParams {
        tail_fraction: ctx
            .config
            .theorem1
            .as_ref()
            .and_then(|s| s.tail_fraction)
            .unwrap_or(OmegaParams::default().tail_fraction),
        ..OmegaParams::default()
    };

    // fan the runs out across workers; results land in index order
    type RunSlot = Option<Result<(Trajectory, LambdaSeries, Verdict, String)>>;
    let mut slots: Vec<RunSlot> = Vec::new();
    slots.resize_with(n_initial, || None);
    std::thread::scope(|scope| {
        let chunk = n_initial.div_ceil(ctx.jobs);
        for (worker, slice) in slots.chunks_mut(chunk).enumerate() {
            let start = worker * chunk;
            let domain = &domain;
            let f = &f;
            let forcing = &forcing;
            let params = &params;
            let tols = &tols;
            let omega_params = &omega_params;
            let seed = ctx.seed;
            scope.spawn(move || {
                for (offset, slot) in slice.iter_mut().enumerate() {
                    let u0 = seeded_asymmetric_initial(domain, seed, start + offset);
                    let run = (|| {
                        let traj = evolve(&u0, f, forcing, params, None)?;
                        let series = track_lambda(&traj, tols);
                        let report = verify_asymptotic_symmetry(&traj, f, omega_params, tols)?;
                        let detail = format!(
                            "{} ({})",
                            report
                                .branch
                                .map(|b| format!("{b:?}"))
                                .unwrap_or_else(|| "-".to_string()),
                            report.details.join("; ")
                        );
                        Ok((traj, series, report.verdict, detail))
                    })();
                    *slot = Some(run);
                }
            });
        }
    });

    let mut outcome = Outcome::Complete;
    let mut verdicts = Vec::new();
    for (index, slot) in slots.into_iter().enumerate() {
        let name = format!("run_{index:02}");
        match slot.expect("worker filled every slot") {
            Ok((traj, series, verdict, detail)) => {
                write_trajectory_artifacts(&ctx.out.join(&name), &traj, &series)?;
                outcome = outcome.merge(verdict_outcome(verdict));
                verdicts.push((name, format!("{verdict}: {detail}")));
            }
            Err(err) => return Err(err),
        }
    }
    ctx.write_manifest("theorem1", &verdicts, outcome)?;
    Ok(outcome)
}

pub fn theorem2(ctx: &RunContext) -> Result<Outcome> {
    let domain = ctx.config.build_domain()?;
    let f = ctx.config.build_nonlinearity()?;
    audit_structure(&f, ctx.seed)?;
    let params = ctx.config.build_solver_params()?;
    let tols = ctx.config.dynamics_tols();
    let omega_params = OmegaParams::default();
    let amplitude = ctx.config.theorem2.as_ref().and_then(|s| s.amplitude);
    let both_signs = ctx
        .config
        .theorem2
        .as_ref()
        .and_then(|s| s.both_signs)
        .unwrap_or(false);
    let baseline_height = ctx
        .config
        .theorem2
        .as_ref()
        .and_then(|s| s.baseline_height)
        .unwrap_or(0.8);
    let baseline_kind = ctx
        .config
        .theorem2
        .as_ref()
        .and_then(|s| s.baseline.clone())
        .unwrap_or_else(|| "cosine".to_string());

    let record = ctx.config.solve_guess_equilibrium(&domain, &f)?;

    let mut runs: Vec<(String, CandidateRun)> = Vec::new();

    // baseline run with the functional pinned at zero throughout
    let baseline = match baseline_kind.as_str() {
        "cosine" => {
            parasym_core::dynamics::baseline_symmetric_run(&domain, &f, baseline_height, &params)?
        }
        "equilibrium_bump" => {
            let ell = domain.half_extent();
            let dome = Field::from_fn(&domain, |x, _| 2.9 * (1.0 - (x / ell).powi(6)));
            let e0 = parasym_core::equilibria::find_equilibrium(
                &f,
                &dome,
                &NewtonOptions::default(),
                &parasym_core::equilibria::ClassifyOptions::default(),
            )?;
            let width = ell / 3.0;
            let u0 = Field::from_values(
                &domain,
                e0.field
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, z)| {
                        let x = domain.node_coords(domain.node_of_interior(i))[0];
                        z * (1.0 + baseline_height * (-(x / width).powi(2)).exp())
                    })
                    .collect(),
            )?;
            evolve(
                &u0,
                &f,
                &parasym_core::nonlinearity::Forcing::none(),
                &params,
                None,
            )?
        }
        other => anyhow::bail!(
            "unknown theorem2.baseline `{other}` (expected cosine | equilibrium_bump)"
        ),
    };
    runs.push((
        "baseline".to_string(),
        CandidateRun {
            trajectory: baseline,
            alpha_record: None,
        },
    ));

    // stationary run at the solved state
    let stationary_params =
        SolverParams::new(1e-3, 1.0_f64.min(params.t_end)).with_stride(100);
    let stationary = evolve(
        &record.field,
        &f,
        &parasym_core::nonlinearity::Forcing::none(),
        &stationary_params,
        None,
    )?;
    runs.push((
        "stationary".to_string(),
        CandidateRun {
            trajectory: stationary,
            alpha_record: Some(record.clone()),
        },
    ));

    // connecting orbit along the principal unstable direction
    let orbit = heteroclinic_from(&record, &f, amplitude, 1.0, &params)?;
    runs.push((
        "connecting_plus".to_string(),
        CandidateRun {
            trajectory: orbit.trajectory,
            alpha_record: Some(orbit.source),
        },
    ));
    if both_signs {
        let orbit = heteroclinic_from(&record, &f, amplitude, -1.0, &params)?;
        runs.push((
            "connecting_minus".to_string(),
            CandidateRun {
                trajectory: orbit.trajectory,
                alpha_record: Some(orbit.source),
            },
        ));
    }

    let mut outcome = Outcome::Complete;
    let mut verdicts = Vec::new();
    let mut report_text = String::from("entire-solution case assignments\n");
    for (name, run) in &runs {
        let report = classify_entire_solution_case(run, &f, &omega_params, &tols)?;
        let series = track_lambda(&run.trajectory, &tols);
        write_trajectory_artifacts(&ctx.out.join(name), &run.trajectory, &series)?;
        let case_label = report
            .case
            .map(|c| format!("case {c}"))
            .unwrap_or_else(|| "unassigned".to_string());
        report_text.push_str(&format!(
            "{name}: {} [{case_label}] lambda {:?} -> {:?}{}\n",
            report.verdict,
            report.lambda_start,
            report.lambda_end,
            if report.strict_drop { ", strict drop" } else { "" },
        ));
        for d in &report.details {
            report_text.push_str(&format!("  {d}\n"));
        }
        report_text.push_str(&format!("  artifacts: {name}/final.psnap, {name}/lambda.csv\n"));
        outcome = outcome.merge(verdict_outcome(report.verdict));
        verdicts.push((name.clone(), format!("{} [{case_label}]", report.verdict)));
    }
    std::fs::write(ctx.out.join("cases.txt"), report_text)?;
    ctx.write_manifest("theorem2", &verdicts, outcome)?;
    Ok(outcome)
}

pub fn convergence(ctx: &RunContext) -> Result<Outcome> {
    let section = ctx
        .config
        .convergence
        .as_ref()
        .context("[convergence] section required")?;
    let half = std::f64::consts::FRAC_PI_2;
    let t_end = 0.25;
    let mut csv = String::from("study,n_cells,dt,error\n");

    let mut spatial_errors = Vec::new();
    let base_n = *section.spatial_cells.first().context("spatial_cells empty")? as f64;
    for &n in &section.spatial_cells {
        let domain = Domain::build_interval(half, n)?;
        let u0 = Field::from_fn(&domain, |x, _| x.cos());
        let dt = 0.002 * (base_n / n as f64).powi(2);
        let params = SolverParams::new(dt, t_end).with_stride(1_000_000);
        let traj = evolve(
            &u0,
            &Nonlinearity::zero(),
            &parasym_core::nonlinearity::Forcing::none(),
            &params,
            None,
        )?;
        let exact = Field::from_fn(&domain, |x, _| (-t_end).exp() * x.cos());
        let err = traj.final_state().linf_distance(&exact);
        csv.push_str(&format!("spatial,{n},{dt:?},{err:?}\n"));
        spatial_errors.push(err);
    }

    let fine_n = *section.spatial_cells.last().unwrap() * 2;
    let domain = Domain::build_interval(half, fine_n)?;
    let u0 = Field::from_fn(&domain, |x, _| x.cos());
    let exact = Field::from_fn(&domain, |x, _| (-t_end).exp() * x.cos());
    let mut temporal_errors = Vec::new();
    for &dt in &section.dts {
        let params = SolverParams::new(dt, t_end).with_stride(1_000_000);
        let traj = evolve(
            &u0,
            &Nonlinearity::zero(),
            &parasym_core::nonlinearity::Forcing::none(),
            &params,
            None,
        )?;
        let err = traj.final_state().linf_distance(&exact);
        csv.push_str(&format!("temporal,{fine_n},{dt:?},{err:?}\n"));
        temporal_errors.push(err);
    }
    std::fs::write(ctx.out.join("convergence.csv"), csv)?;

    let orders = |errors: &[f64]| -> Vec<f64> {
        errors
            .windows(2)
            .map(|pair| (pair[0] / pair[1]).log2())
            .collect()
    };
    let spatial_orders = orders(&spatial_errors);
    let temporal_orders = orders(&temporal_errors);
    println!("spatial orders: {spatial_orders:?}");
    println!("temporal orders: {temporal_orders:?}");

    let verdicts = vec![
        ("spatial_orders".to_string(), format!("{spatial_orders:?}")),
        ("temporal_orders".to_string(), format!("{temporal_orders:?}")),
    ];
    ctx.write_manifest("convergence", &verdicts, Outcome::Complete)?;
    Ok(Outcome::Complete)
}

pub fn plot_csv(csv: &Path, y: Option<&str>, out: Option<&Path>) -> Result<Outcome> {
    let data = plot::read_csv_column(csv, y)?;
    let svg = plot::render_svg(&data);
    let target = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            dir.join(format!(
                "{}.svg",
                csv.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default()
            ))
        }
        None => csv.with_extension("svg"),
    };
    std::fs::write(&target, svg)?;
    println!("wrote {}", target.display());
    Ok(Outcome::Complete)
}
