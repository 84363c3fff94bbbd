//! Experiment configuration: a strict TOML schema (unknown keys are
//! errors) plus builders that turn the parsed sections into domain,
//! nonlinearity, forcing, initial-state, and solver objects.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use parasym_core::domain::Domain;
use parasym_core::dynamics::DynamicsTols;
use parasym_core::equilibria::{find_equilibrium, ClassifyOptions, NewtonOptions};
use parasym_core::field::Field;
use parasym_core::nonlinearity::{catalog_get, forcing_get, Forcing, Nonlinearity};
use parasym_core::solver::SolverParams;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub domain: DomainSection,
    pub nonlinearity: Option<NonlinearitySection>,
    pub forcing: Option<ForcingSection>,
    pub initial: Option<InitialSection>,
    pub solver: Option<SolverSection>,
    pub tolerances: Option<ToleranceSection>,
    pub equilibria: Option<EquilibriaSection>,
    pub theorem1: Option<Theorem1Section>,
    pub theorem2: Option<Theorem2Section>,
    pub convergence: Option<ConvergenceSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: String,
    pub half_length: Option<f64>,
    pub n_cells: Option<usize>,
    pub h: Option<f64>,
    pub half_cells: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    pub name: String,
    pub theta: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    pub name: String,
    pub amplitude: f64,
    pub decay_rate: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: String,
    pub center: Option<f64>,
    pub width: Option<f64>,
    pub height: Option<f64>,
    pub frequency: Option<u32>,
    pub offset: Option<f64>,
    pub file: Option<String>,
    /// equilibrium_plus_perturbation: perturbation size (may be negative).
    pub amplitude: Option<f64>,
    /// equilibrium_plus_perturbation: "stable" or "unstable".
    pub direction: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: Option<usize>,
    pub linear_tol: Option<f64>,
    pub max_linear_iters: Option<usize>,
    pub blowup_ceiling: Option<f64>,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub lambda_tol_rel: Option<f64>,
    pub sym_tol: Option<f64>,
    pub mon_tol: Option<f64>,
    pub forcing_tail_tol: Option<f64>,
    pub match_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriaSection {
    pub n_guesses: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Section {
    pub n_initial: usize,
    pub tail_fraction: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem2Section {
    pub amplitude: Option<f64>,
    pub both_signs: Option<bool>,
    /// Baseline construction: "cosine" (a half-cosine dome, right when
    /// f(0) >= 0) or "equilibrium_bump" (an even positive bump on the
    /// symmetric-decreasing steady state, for reaction terms whose flow
    /// leaves the nonnegative cone from small data).
    pub baseline: Option<String>,
    /// Height of the baseline dome / relative size of the baseline bump.
    pub baseline_height: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub spatial_cells: Vec<usize>,
    pub dts: Vec<f64>,
}

impl Config {
    pub fn load(path: &Path) -> Result<(Config, String)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: Config = toml::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok((config, text))
    }

    pub fn build_domain(&self) -> Result<Arc<Domain>> {
        let d = &self.domain;
        match d.kind.as_str() {
            "interval" => {
                let half_length = d
                    .half_length
                    .context("domain.half_length required for kind = \"interval\"")?;
                let n_cells = d
                    .n_cells
                    .context("domain.n_cells required for kind = \"interval\"")?;
                Ok(Domain::build_interval(half_length, n_cells)?)
            }
            "rows" => {
                let h = d.h.context("domain.h required for kind = \"rows\"")?;
                let half_cells = d
                    .half_cells
                    .as_ref()
                    .context("domain.half_cells required for kind = \"rows\"")?;
                let rows = Domain::rows_from_half_cells(half_cells);
                Ok(Domain::build_symmetric_2d(h, &rows)?)
            }
            other => bail!("unknown domain.kind `{other}` (expected interval | rows)"),
        }
    }

    pub fn build_nonlinearity(&self) -> Result<Nonlinearity> {
        let section = self
            .nonlinearity
            .as_ref()
            .context("[nonlinearity] section required")?;
        match section.name.as_str() {
            "zero" => Ok(Nonlinearity::zero()),
            "allen_cahn" => Ok(match section.theta {
                Some(theta) => Nonlinearity::allen_cahn(theta),
                None => catalog_get("allen_cahn")?,
            }),
            "gradient_even" => Ok(match section.epsilon {
                Some(eps) => Nonlinearity::gradient_even(eps),
                None => catalog_get("gradient_even")?,
            }),
            name => Ok(catalog_get(name)?),
        }
    }

    pub fn build_forcing(&self) -> Result<Forcing> {
        match &self.forcing {
            None => Ok(Forcing::none()),
            Some(s) => Ok(forcing_get(&s.name, s.amplitude, s.decay_rate)?),
        }
    }

    pub fn build_solver_params(&self) -> Result<SolverParams> {
        let s = self.solver.as_ref().context("[solver] section required")?;
        let mut params = SolverParams::new(s.dt, s.t_end);
        if let Some(stride) = s.snapshot_stride {
            params.snapshot_stride = stride;
        }
        if let Some(tol) = s.linear_tol {
            params.linear_tol = tol;
        }
        if let Some(iters) = s.max_linear_iters {
            params.max_linear_iters = iters;
        }
        if let Some(ceiling) = s.blowup_ceiling {
            params.blowup_ceiling = Some(ceiling);
        }
        params.validate()?;
        Ok(params)
    }

    pub fn dynamics_tols(&self) -> DynamicsTols {
        let mut tols = DynamicsTols::default();
        if let Some(t) = &self.tolerances {
            if let Some(v) = t.lambda_tol_rel {
                tols.lambda_tol_rel = v;
            }
            if let Some(v) = t.sym_tol {
                tols.sym_tol = v;
            }
            if let Some(v) = t.mon_tol {
                tols.mon_tol = v;
            }
            if let Some(v) = t.forcing_tail_tol {
                tols.forcing_tail_tol = v;
            }
            if let Some(v) = t.match_tol {
                tols.match_tol = v;
            }
        }
        tols
    }

    /// Build the initial state on a domain. `base_dir` resolves relative
    /// snapshot paths in the `file` kind.
    pub fn build_initial(
        &self,
        domain: &Arc<Domain>,
        f: &Nonlinearity,
        base_dir: &Path,
    ) -> Result<Field> {
        let section = self.initial.as_ref().context("[initial] section required")?;
        let ell = domain.half_extent();
        match section.kind.as_str() {
            "bump" => {
                let center = section.center.unwrap_or(0.0);
                let width = section.width.context("initial.width required for bump")?;
                let height = section.height.context("initial.height required for bump")?;
                Ok(Field::from_fn(domain, |x, _| {
                    height * (-((x - center) / width).powi(2)).exp()
                }))
            }
            "cosine" => {
                let height = section.height.context("initial.height required for cosine")?;
                let offset = section.offset.unwrap_or(0.0);
                match section.frequency.unwrap_or(0) {
                    0 => Ok(Field::from_fn(domain, |x, _| {
                        offset + height * (std::f64::consts::PI * x / (2.0 * ell)).cos()
                    })),
                    m => Ok(Field::from_fn(domain, |x, _| {
                        offset + height * (m as f64 * std::f64::consts::PI * x / ell).cos()
                    })),
                }
            }
            "equilibrium_plus_perturbation" => {
                let record = self.solve_guess_equilibrium(domain, f)?;
                let amplitude = section.amplitude.unwrap_or(0.0);
                let direction = section.direction.as_deref().unwrap_or("stable");
                let perturbation = match direction {
                    "stable" => Field::from_fn(domain, |x, _| {
                        (7.0 * std::f64::consts::PI * x / (2.0 * ell)).cos()
                    }),
                    "unstable" => {
                        let coeffs =
                            parasym_core::equilibria::linearize_at(&record.field, f);
                        let (eig, mode) = parasym_core::equilibria::leading_eigenpair(
                            domain,
                            &coeffs,
                            &parasym_core::equilibria::PowerIterationOptions::default(),
                        )?;
                        if eig <= 0.0 {
                            bail!("no unstable direction: leading eigenvalue {eig}");
                        }
                        mode
                    }
                    other => bail!("unknown initial.direction `{other}`"),
                };
                Ok(record.field.add_scaled(amplitude, &perturbation))
            }
            "file" => {
                let file = section.file.as_ref().context("initial.file required")?;
                let path = base_dir.join(file);
                let (_, field) = parasym_core::io::read_snapshot(&path)?;
                if field.domain().as_ref() != domain.as_ref() {
                    bail!(
                        "snapshot {} was written on a different domain",
                        path.display()
                    );
                }
                Ok(field)
            }
            other => bail!(
                "unknown initial.kind `{other}` (expected bump | cosine | equilibrium_plus_perturbation | file)"
            ),
        }
    }

    /// Newton-solve the steady state from the configured shape (used by the
    /// equilibrium-anchored initial kinds and the connecting-orbit command).
    pub fn solve_guess_equilibrium(
        &self,
        domain: &Arc<Domain>,
        f: &Nonlinearity,
    ) -> Result<parasym_core::equilibria::EquilibriumRecord> {
        let section = self.initial.as_ref().context("[initial] section required")?;
        let ell = domain.half_extent();
        let guess = match (section.kind.as_str(), section.frequency) {
            ("equilibrium_plus_perturbation", freq) => {
                let height = section.height.unwrap_or(1.1);
                let offset = section.offset.unwrap_or(height);
                match freq.unwrap_or(3) {
                    0 => Field::from_fn(domain, |x, _| {
                        offset + height * (std::f64::consts::PI * x / (2.0 * ell)).cos()
                    }),
                    m => Field::from_fn(domain, |x, _| {
                        offset + height * (m as f64 * std::f64::consts::PI * x / ell).cos()
                    }),
                }
            }
            _ => self.build_initial(domain, f, Path::new("."))?,
        };
        Ok(find_equilibrium(
            f,
            &guess,
            &NewtonOptions::default(),
            &ClassifyOptions::default(),
        )?)
    }
}
