//! Long-time behavior: the moving-plane functional along trajectories,
//! omega-limit estimation with equilibrium matching, constructed connecting
//! orbits out of unstable nodal equilibria, and the verification harness
//! for the asymptotic-symmetry and entire-solution-classification
//! statements.

use crate::domain::Domain;
use crate::equilibria::{
    find_equilibrium, leading_eigenpair, linearize_at, ClassifyOptions, EquilibriumClass,
    EquilibriumRecord, NewtonOptions, PowerIterationOptions,
};
use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::nonlinearity::Nonlinearity;
use crate::reflection::{capital_lambda, monotone_defect, symmetry_defect, LambdaResult};
use crate::solver::{evolve, SolverParams, Trajectory};

/// Tolerances shared by the verification harness.
#[derive(Debug, Clone, Copy)]
pub struct DynamicsTols {
    /// Relative tolerance of the moving-plane functional.
    pub lambda_tol_rel: f64,
    /// Acceptable asymmetry of omega-limit representatives.
    pub sym_tol: f64,
    /// Acceptable monotone defect beyond the symmetry plane.
    pub mon_tol: f64,
    /// Forcing envelope must sit below this before the tail window.
    pub forcing_tail_tol: f64,
    /// A run is stationary when no snapshot strays farther than this.
    pub stationary_tol: f64,
    /// Representatives below this sup norm count as the zero profile.
    pub zero_sup_tol: f64,
    /// Newton polish must land within this distance to declare a match.
    pub match_tol: f64,
}

impl Default for DynamicsTols {
    fn default() -> Self {
        DynamicsTols {
            lambda_tol_rel: 1e-9,
            sym_tol: 1e-6,
            mon_tol: 1e-6,
            forcing_tail_tol: 1e-8,
            stationary_tol: 1e-6,
            zero_sup_tol: 1e-9,
            match_tol: 1e-3,
        }
    }
}

/// One tracked functional value.
#[derive(Debug, Clone)]
pub struct LambdaSample {
    pub t: f64,
    pub result: LambdaResult,
}

/// Monotonicity accounting for a tracked series. Single half-grid upticks
/// are quantization jitter and only counted; anything larger is a
/// violation.
#[derive(Debug, Clone, Copy)]
pub struct MonotonicityReport {
    /// Time from which the check engages (once forcing has decayed).
    pub checked_from: f64,
    pub upward_violations: usize,
    pub max_upward_jump: f64,
    pub single_step_upticks: usize,
}

/// The functional along a trajectory, quantized to half-grid planes.
#[derive(Debug, Clone)]
pub struct LambdaSeries {
    pub entries: Vec<LambdaSample>,
    /// Half-grid quantum h/2.
    pub quantum: f64,
    pub tol_rel: f64,
    pub monotonicity: MonotonicityReport,
}

impl LambdaSeries {
    pub fn csv(&self) -> String {
        let mut out = String::from(LambdaResult::CSV_HEADER);
        out.push('\n');
        for sample in &self.entries {
            out.push_str(&sample.result.csv_row(sample.t));
            out.push('\n');
        }
        out
    }

    pub fn first(&self) -> &LambdaSample {
        self.entries.first().expect("series is nonempty")
    }

    pub fn last(&self) -> &LambdaSample {
        self.entries.last().expect("series is nonempty")
    }
}

/// Evaluate the functional on every snapshot and account for upward jumps.
/// For forced runs the monotonicity accounting starts once the forcing
/// envelope has decayed below the tail tolerance.
pub fn track_lambda(traj: &Trajectory, tols: &DynamicsTols) -> LambdaSeries {
    let quantum = traj.domain.spacing() * 0.5;
    let entries: Vec<LambdaSample> = traj
        .snapshots
        .iter()
        .map(|(t, u)| LambdaSample {
            t: *t,
            result: capital_lambda(u, tols.lambda_tol_rel),
        })
        .collect();

    let checked_from = if traj.forcing.is_zero() {
        0.0
    } else {
        entries
            .iter()
            .map(|s| s.t)
            .find(|&t| traj.forcing.envelope(t) <= tols.forcing_tail_tol)
            .unwrap_or(f64::INFINITY)
    };

    let mut upward_violations = 0;
    let mut single_step_upticks = 0;
    let mut max_upward_jump: f64 = 0.0;
    for pair in entries.windows(2) {
        if pair[0].t < checked_from {
            continue;
        }
        let from = pair[0].result.lambda.k;
        let to = pair[1].result.lambda.k;
        if to > from {
            let jump = (to - from) as f64 * quantum;
            max_upward_jump = max_upward_jump.max(jump);
            if to - from > 1 {
                upward_violations += 1;
            } else {
                single_step_upticks += 1;
            }
        }
    }
    LambdaSeries {
        entries,
        quantum,
        tol_rel: tols.lambda_tol_rel,
        monotonicity: MonotonicityReport {
            checked_from,
            upward_violations,
            max_upward_jump,
            single_step_upticks,
        },
    }
}

/// Net parameters for the omega-limit estimate.
#[derive(Debug, Clone, Copy)]
pub struct OmegaParams {
    /// Fraction of the run (by time, from the end) regarded as the tail.
    pub tail_fraction: f64,
    /// Net radius relative to the final sup norm.
    pub net_radius_rel: f64,
    /// Tail diameter below which the estimate is flagged converged,
    /// relative to the final sup norm (with an absolute floor).
    pub conv_tol_rel: f64,
}

impl Default for OmegaParams {
    fn default() -> Self {
        OmegaParams {
            tail_fraction: 0.25,
            net_radius_rel: 1e-4,
            conv_tol_rel: 1e-3,
        }
    }
}

/// A net point of the tail, with its diagnostics and equilibrium match.
#[derive(Debug, Clone)]
pub struct OmegaRepresentative {
    pub t: f64,
    pub field: Field,
    pub lambda: LambdaResult,
    pub symmetry_defect: f64,
    /// Monotone defect beyond the symmetry plane (lambda0 = 0).
    pub monotone_defect0: f64,
    /// Newton polish outcome when it lands close to the representative.
    pub matched: Option<EquilibriumRecord>,
}

/// Estimated limit set of a completed run.
#[derive(Debug, Clone)]
pub struct OmegaEstimate {
    pub representatives: Vec<OmegaRepresentative>,
    pub tail_start: f64,
    pub tail_diameter: f64,
    pub converged: bool,
    pub net_radius: f64,
}

/// Build an sup-norm net over the tail snapshots, measure each net point,
/// and attempt a Newton match to a steady state. Polishing runs without
/// pseudo-time fallback so slow transients cannot be dragged onto their
/// eventual limits and misreported as already-converged.
pub fn omega_estimate(
    traj: &Trajectory,
    f: &Nonlinearity,
    params: &OmegaParams,
    tols: &DynamicsTols,
) -> Result<OmegaEstimate> {
    if traj.aborted.is_some() {
        return Err(CoreError::InvalidParameter(
            "omega estimate needs a run that completed without blow-up".into(),
        ));
    }
    if !(params.tail_fraction > 0.0 && params.tail_fraction <= 0.5) {
        return Err(CoreError::InvalidParameter(format!(
            "tail_fraction must lie in (0, 1/2], got {}",
            params.tail_fraction
        )));
    }
    let t_end = traj.final_time();
    let tail_start = t_end * (1.0 - params.tail_fraction);
    let tail: Vec<&(f64, Field)> = traj
        .snapshots
        .iter()
        .filter(|(t, _)| *t >= tail_start)
        .collect();
    if tail.is_empty() {
        return Err(CoreError::InvalidParameter("tail window holds no snapshots".into()));
    }
    let scale = traj.final_state().sup_norm();
    let net_radius = (params.net_radius_rel * scale).max(1e-12);
    let conv_tol = (params.conv_tol_rel * scale).max(1e-12);

    let mut tail_diameter: f64 = 0.0;
    for (a, (_, ua)) in tail.iter().enumerate() {
        for (_, ub) in tail.iter().skip(a + 1) {
            tail_diameter = tail_diameter.max(ua.linf_distance(ub));
        }
    }

    let polish_newton = NewtonOptions {
        max_iterations: 40,
        target_rel: 1e-12,
        max_fallback_rounds: 0,
        fallback_time: 0.0,
    };
    let classify_opts = ClassifyOptions {
        lambda_tol_rel: tols.lambda_tol_rel,
        ..ClassifyOptions::default()
    };

    let tail_len = tail.len();
    let mut representatives: Vec<OmegaRepresentative> = Vec::new();
    for (t, u) in tail {
        if representatives
            .iter()
            .any(|r| r.field.linf_distance(u) <= net_radius)
        {
            continue;
        }
        let matched = match find_equilibrium(f, u, &polish_newton, &classify_opts) {
            Ok(record)
                if record.field.linf_distance(u)
                    <= tols.match_tol * u.sup_norm().max(1.0) =>
            {
                Some(record)
            }
            _ => None,
        };
        representatives.push(OmegaRepresentative {
            t: *t,
            field: u.clone(),
            lambda: capital_lambda(u, tols.lambda_tol_rel),
            symmetry_defect: symmetry_defect(u),
            monotone_defect0: monotone_defect(u, 0.0),
            matched,
        });
    }

    // a single tail snapshot cannot certify convergence
    let converged = tail_len >= 2 && tail_diameter < conv_tol;
    Ok(OmegaEstimate {
        representatives,
        tail_start,
        tail_diameter,
        converged,
        net_radius,
    })
}

/// A forward run constructed from an unstable steady state, carrying the
/// starting record as its approximate backward limit.
#[derive(Debug, Clone)]
pub struct ConstructedOrbit {
    pub trajectory: Trajectory,
    /// The state the orbit emanates from (its backward limit by
    /// construction; backward integration is ill-posed and never attempted).
    pub source: EquilibriumRecord,
    pub eigenvalue: f64,
    pub amplitude: f64,
    pub sign: f64,
}

/// Launch a forward run along the principal unstable direction of a nodal
/// steady state: `u0 = z + sign * amplitude * eigenfield`, clipped at zero.
pub fn heteroclinic_from(
    record: &EquilibriumRecord,
    f: &Nonlinearity,
    amplitude: Option<f64>,
    sign: f64,
    params: &SolverParams,
) -> Result<ConstructedOrbit> {
    let domain = record.field.domain().clone();
    let coeffs = linearize_at(&record.field, f);
    let (eigenvalue, eigenfield) =
        leading_eigenpair(&domain, &coeffs, &PowerIterationOptions::default())?;
    if eigenvalue <= 0.0 {
        return Err(CoreError::NoUnstableDirection(eigenvalue));
    }
    let amplitude = amplitude.unwrap_or(1e-3 * record.field.sup_norm());
    // evolve clips negative entries (the state's own O(h^2) nodal dips and
    // any dip the perturbation adds) and records the clip magnitude
    let u0 = record.field.add_scaled(sign * amplitude, &eigenfield);
    let trajectory = evolve(&u0, f, &crate::nonlinearity::Forcing::none(), params, None)?;
    Ok(ConstructedOrbit {
        trajectory,
        source: record.clone(),
        eigenvalue,
        amplitude,
        sign,
    })
}

/// Three-valued outcome of a verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
            Verdict::Fail => write!(f, "fail"),
        }
    }
}

/// Which side of the limit-set dichotomy a passing run realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryBranch {
    /// The limit set is a single equilibrium with a nontrivial nodal set.
    SingleNodalEquilibrium,
    /// Every limit profile is even and nonincreasing beyond the plane.
    SymmetricDecreasing,
}

/// Outcome of the asymptotic-symmetry check on one run.
#[derive(Debug)]
pub struct AsymptoticSymmetryReport {
    pub verdict: Verdict,
    pub branch: Option<SymmetryBranch>,
    pub omega: Option<OmegaEstimate>,
    pub details: Vec<String>,
}

impl AsymptoticSymmetryReport {
    fn inconclusive(reason: String) -> AsymptoticSymmetryReport {
        AsymptoticSymmetryReport {
            verdict: Verdict::Inconclusive,
            branch: None,
            omega: None,
            details: vec![reason],
        }
    }
}

/// Check the limit-set dichotomy on a (possibly forced) run: every limit
/// profile must be even, and the estimate must either be a single profile
/// matching a nodal steady state or consist of symmetric-decreasing
/// profiles only.
pub fn verify_asymptotic_symmetry(
    traj: &Trajectory,
    f: &Nonlinearity,
    omega_params: &OmegaParams,
    tols: &DynamicsTols,
) -> Result<AsymptoticSymmetryReport> {
    if traj.aborted.is_some() {
        return Ok(AsymptoticSymmetryReport::inconclusive(
            "run aborted at the blow-up ceiling".into(),
        ));
    }
    let tail_start = traj.final_time() * (1.0 - omega_params.tail_fraction);
    let envelope = traj.forcing.envelope(tail_start);
    if envelope > tols.forcing_tail_tol {
        return Err(CoreError::InvalidParameter(format!(
            "forcing envelope {envelope:.3e} still above {:.1e} at the tail window",
            tols.forcing_tail_tol
        )));
    }
    let omega = omega_estimate(traj, f, omega_params, tols)?;
    if !omega.converged {
        return Ok(AsymptoticSymmetryReport {
            verdict: Verdict::Inconclusive,
            branch: None,
            details: vec![format!(
                "tail diameter {:.3e} has not settled",
                omega.tail_diameter
            )],
            omega: Some(omega),
        });
    }

    let mut details = Vec::new();
    for rep in &omega.representatives {
        if rep.symmetry_defect > tols.sym_tol {
            details.push(format!(
                "representative at t = {} has symmetry defect {:.3e}",
                rep.t, rep.symmetry_defect
            ));
        }
    }
    if !details.is_empty() {
        return Ok(AsymptoticSymmetryReport {
            verdict: Verdict::Fail,
            branch: None,
            omega: Some(omega),
            details,
        });
    }

    let single_nodal = omega.representatives.len() == 1
        && omega.representatives[0]
            .matched
            .as_ref()
            .is_some_and(|m| m.class == EquilibriumClass::Eplus);
    if single_nodal {
        return Ok(AsymptoticSymmetryReport {
            verdict: Verdict::Pass,
            branch: Some(SymmetryBranch::SingleNodalEquilibrium),
            omega: Some(omega),
            details: vec!["single representative matching a nodal steady state".into()],
        });
    }

    let mut monotone_ok = true;
    for rep in &omega.representatives {
        if rep.field.sup_norm() <= tols.zero_sup_tol {
            continue;
        }
        if rep.monotone_defect0 > tols.mon_tol {
            monotone_ok = false;
            details.push(format!(
                "representative at t = {} has monotone defect {:.3e}",
                rep.t, rep.monotone_defect0
            ));
        }
    }
    if monotone_ok {
        Ok(AsymptoticSymmetryReport {
            verdict: Verdict::Pass,
            branch: Some(SymmetryBranch::SymmetricDecreasing),
            omega: Some(omega),
            details: vec!["all representatives even and nonincreasing beyond the plane".into()],
        })
    } else {
        Ok(AsymptoticSymmetryReport {
            verdict: Verdict::Fail,
            branch: None,
            omega: Some(omega),
            details,
        })
    }
}

/// The four mutually exclusive behaviors of a (constructed) eternal run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntireSolutionCase {
    /// Functional identically zero: even, nonincreasing profiles all along.
    SymmetricForAllTime,
    /// Stationary at a nodal steady state.
    StationaryNodal,
    /// Emanates from a nodal steady state, limits onto the zero-functional
    /// set.
    NodalToSymmetric,
    /// Connects two nodal steady states with strictly dropping functional.
    NodalToNodal,
}

impl std::fmt::Display for EntireSolutionCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EntireSolutionCase::SymmetricForAllTime => write!(f, "i"),
            EntireSolutionCase::StationaryNodal => write!(f, "ii"),
            EntireSolutionCase::NodalToSymmetric => write!(f, "iii"),
            EntireSolutionCase::NodalToNodal => write!(f, "iv"),
        }
    }
}

/// A run submitted to the case classifier, optionally carrying the record
/// it was constructed from (its approximate backward limit).
#[derive(Debug)]
pub struct CandidateRun {
    pub trajectory: Trajectory,
    pub alpha_record: Option<EquilibriumRecord>,
}

/// Case assignment for one run.
#[derive(Debug)]
pub struct CaseReport {
    pub verdict: Verdict,
    pub case: Option<EntireSolutionCase>,
    pub lambda_start: f64,
    pub lambda_end: f64,
    /// Strict functional drop certified for the connecting cases.
    pub strict_drop: bool,
    pub details: Vec<String>,
}

/// Assign exactly one of the four behaviors to a run. Ambiguous or
/// unsettled runs come back inconclusive with diagnostics.
pub fn classify_entire_solution_case(
    run: &CandidateRun,
    f: &Nonlinearity,
    omega_params: &OmegaParams,
    tols: &DynamicsTols,
) -> Result<CaseReport> {
    let traj = &run.trajectory;
    if traj.aborted.is_some() {
        return Ok(CaseReport {
            verdict: Verdict::Inconclusive,
            case: None,
            lambda_start: f64::NAN,
            lambda_end: f64::NAN,
            strict_drop: false,
            details: vec!["run aborted at the blow-up ceiling".into()],
        });
    }
    let series = track_lambda(traj, tols);
    let lambda_start = series.first().result.lambda.value;
    let lambda_end = series.last().result.lambda.value;
    let always_zero = series.entries.iter().all(|s| s.result.lambda.k == 0);

    let u0 = &traj.snapshots[0].1;
    // Entry clipping of a nodal steady state's O(h^2) negative dips injects
    // a perturbation of recorded magnitude; stationarity is judged against
    // the larger of the configured tolerance and that injected defect.
    let stationary_tol = tols.stationary_tol.max(3.0 * traj.initial_clip);
    let stationary = traj
        .snapshots
        .iter()
        .all(|(_, u)| u.linf_distance(u0) <= stationary_tol);

    // stationary at a nodal steady state?
    let stationary_nodal = if stationary {
        let source_class = match &run.alpha_record {
            Some(r) => Some(r.class),
            None => {
                let polish = NewtonOptions {
                    max_fallback_rounds: 0,
                    ..NewtonOptions::default()
                };
                find_equilibrium(f, u0, &polish, &ClassifyOptions::default())
                    .ok()
                    .filter(|r| {
                        r.field.linf_distance(u0) <= tols.match_tol * u0.sup_norm().max(1.0)
                    })
                    .map(|r| r.class)
            }
        };
        source_class == Some(EquilibriumClass::Eplus)
    } else {
        false
    };

    let alpha_nodal = run
        .alpha_record
        .as_ref()
        .is_some_and(|r| r.class == EquilibriumClass::Eplus);

    let mut nodal_to_symmetric = false;
    let mut nodal_to_nodal = false;
    let mut omega_details = Vec::new();
    if !stationary && alpha_nodal {
        let omega = omega_estimate(traj, f, omega_params, tols)?;
        if !omega.converged {
            return Ok(CaseReport {
                verdict: Verdict::Inconclusive,
                case: None,
                lambda_start,
                lambda_end,
                strict_drop: false,
                details: vec![format!(
                    "tail diameter {:.3e} has not settled",
                    omega.tail_diameter
                )],
            });
        }
        let omega_all_zero = omega
            .representatives
            .iter()
            .all(|r| r.lambda.lambda.k == 0);
        let omega_single_nodal = omega.representatives.len() == 1
            && omega.representatives[0]
                .matched
                .as_ref()
                .is_some_and(|m| m.class == EquilibriumClass::Eplus);
        let alpha_k = run.alpha_record.as_ref().unwrap().lambda.lambda.k;
        if omega_all_zero {
            nodal_to_symmetric = true;
        } else if omega_single_nodal {
            let omega_k = omega.representatives[0]
                .matched
                .as_ref()
                .unwrap()
                .lambda
                .lambda
                .k;
            if omega_k < alpha_k {
                nodal_to_nodal = true;
            } else {
                omega_details.push(format!(
                    "limit functional index {omega_k} does not drop below start {alpha_k}"
                ));
            }
        } else {
            omega_details.push("limit set neither zero-functional nor a single nodal state".into());
        }
    }

    let candidates = [
        (always_zero, EntireSolutionCase::SymmetricForAllTime),
        (stationary_nodal, EntireSolutionCase::StationaryNodal),
        (nodal_to_symmetric, EntireSolutionCase::NodalToSymmetric),
        (nodal_to_nodal, EntireSolutionCase::NodalToNodal),
    ];
    let matched: Vec<EntireSolutionCase> = candidates
        .iter()
        .filter(|(hit, _)| *hit)
        .map(|(_, case)| *case)
        .collect();

    if matched.len() != 1 {
        return Ok(CaseReport {
            verdict: Verdict::Inconclusive,
            case: None,
            lambda_start,
            lambda_end,
            strict_drop: false,
            details: {
                let mut d = vec![format!("{} cases matched", matched.len())];
                d.extend(omega_details);
                d
            },
        });
    }
    let case = matched[0];
    let strict_drop = matches!(
        case,
        EntireSolutionCase::NodalToSymmetric | EntireSolutionCase::NodalToNodal
    ) && series.last().result.lambda.k < run.alpha_record.as_ref().unwrap().lambda.lambda.k;
    let violations = series.monotonicity.upward_violations;
    Ok(CaseReport {
        verdict: if violations == 0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        case: Some(case),
        lambda_start,
        lambda_end,
        strict_drop,
        details: if violations == 0 {
            vec![format!("case {case}")]
        } else {
            vec![format!(
                "functional rose by more than one half-step {violations} times"
            )]
        },
    })
}

/// Classify a batch of constructed runs.
pub fn verify_entire_solution_cases(
    runs: &[CandidateRun],
    f: &Nonlinearity,
    omega_params: &OmegaParams,
    tols: &DynamicsTols,
) -> Result<Vec<CaseReport>> {
    runs.iter()
        .map(|run| classify_entire_solution_case(run, f, omega_params, tols))
        .collect()
}

/// Outcome of the decay-normalization diagnostic.
#[derive(Debug)]
pub struct GammaReport {
    /// Rescaled snapshots (each divided by the interpolated norm curve).
    pub normalized: Vec<(f64, Field)>,
    /// Interpolated scale at each snapshot time.
    pub gamma: Vec<(f64, f64)>,
    /// Snapshot count dropped by the tiny-norm guard, if any.
    pub truncated: usize,
    /// Whether the functional agreed (by plane index) on every snapshot.
    pub lambda_preserved: bool,
    pub lambda_pairs: Vec<(usize, usize)>,
}

/// Divide a decaying run by a smooth interpolation of its sup norms and
/// verify that the moving-plane functional does not see the rescaling.
///
/// The scale curve is exp of a monotone-cubic interpolant through the log
/// norms at roughly unit-spaced snapshot times.
pub fn gamma_normalize(traj: &Trajectory, tols: &DynamicsTols) -> Result<GammaReport> {
    const NORM_GUARD: f64 = 1e-300;
    let mut usable: Vec<&(f64, Field)> = Vec::new();
    let mut truncated = 0;
    for snap in &traj.snapshots {
        if snap.1.sup_norm() <= NORM_GUARD {
            truncated = traj.snapshots.len() - usable.len();
            break;
        }
        usable.push(snap);
    }
    if usable.len() < 2 {
        return Err(CoreError::NotDecaying(
            "fewer than two snapshots with usable norms".into(),
        ));
    }
    let first_norm = usable.first().unwrap().1.sup_norm();
    let last_norm = usable.last().unwrap().1.sup_norm();
    if !(last_norm < first_norm) {
        return Err(CoreError::NotDecaying(format!(
            "sup norms do not decay: {first_norm:.3e} -> {last_norm:.3e}"
        )));
    }

    // knots at roughly unit time spacing, always including the endpoints
    let t0 = usable.first().unwrap().0;
    let t1 = usable.last().unwrap().0;
    let mut knots: Vec<(f64, f64)> = Vec::new();
    let mut target = t0;
    for (t, u) in &usable {
        if *t >= target || (*t - t1).abs() < 1e-12 {
            knots.push((*t, u.sup_norm().ln()));
            target = *t + 1.0;
        }
    }
    if knots.last().map(|k| k.0) != Some(t1) {
        knots.push((t1, usable.last().unwrap().1.sup_norm().ln()));
    }
    let ts: Vec<f64> = knots.iter().map(|k| k.0).collect();
    let ys: Vec<f64> = knots.iter().map(|k| k.1).collect();
    let slopes = pchip_slopes(&ts, &ys);

    let mut normalized = Vec::with_capacity(usable.len());
    let mut gamma = Vec::with_capacity(usable.len());
    let mut lambda_pairs = Vec::with_capacity(usable.len());
    let mut preserved = true;
    for (t, u) in &usable {
        let g = pchip_eval(&ts, &ys, &slopes, *t).exp();
        let z = u.scaled(1.0 / g);
        let ku = capital_lambda(u, tols.lambda_tol_rel).lambda.k;
        let kz = capital_lambda(&z, tols.lambda_tol_rel).lambda.k;
        preserved &= ku == kz;
        lambda_pairs.push((ku, kz));
        gamma.push((*t, g));
        normalized.push((*t, z));
    }
    Ok(GammaReport {
        normalized,
        gamma,
        truncated,
        lambda_preserved: preserved,
        lambda_pairs,
    })
}

/// Monotonicity-limited cubic Hermite slopes (Fritsch-Carlson).
fn pchip_slopes(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = ts.len();
    if n == 1 {
        return vec![0.0];
    }
    let mut secants = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        secants.push((ys[i + 1] - ys[i]) / (ts[i + 1] - ts[i]));
    }
    let mut slopes = vec![0.0; n];
    slopes[0] = secants[0];
    slopes[n - 1] = secants[n - 2];
    for i in 1..n - 1 {
        let (d0, d1) = (secants[i - 1], secants[i]);
        if d0 * d1 <= 0.0 {
            slopes[i] = 0.0;
        } else {
            let h0 = ts[i] - ts[i - 1];
            let h1 = ts[i + 1] - ts[i];
            let w0 = 2.0 * h1 + h0;
            let w1 = h1 + 2.0 * h0;
            slopes[i] = (w0 + w1) / (w0 / d0 + w1 / d1);
        }
    }
    slopes
}

fn pchip_eval(ts: &[f64], ys: &[f64], slopes: &[f64], t: f64) -> f64 {
    let n = ts.len();
    if n == 1 || t <= ts[0] {
        return ys[0] + slopes[0] * (t - ts[0]);
    }
    if t >= ts[n - 1] {
        return ys[n - 1] + slopes[n - 1] * (t - ts[n - 1]);
    }
    let mut i = 0;
    while ts[i + 1] < t {
        i += 1;
    }
    let h = ts[i + 1] - ts[i];
    let s = (t - ts[i]) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    h00 * ys[i] + h10 * h * slopes[i] + h01 * ys[i + 1] + h11 * h * slopes[i + 1]
}

/// Which invariant family the limit estimate landed in.
#[derive(Debug)]
pub struct MorseReport {
    /// Nodal singleton families ordered by decreasing functional, then the
    /// zero-functional family at the end.
    pub family_count: usize,
    /// (index into the nodal ordering, functional value) per nodal family.
    pub ordering: Vec<(usize, f64)>,
    /// The single family containing every representative, when one exists.
    pub membership: Option<usize>,
    pub straddle: bool,
    pub details: Vec<String>,
}

/// Check that the limit estimate sits inside exactly one invariant family:
/// a single nodal steady state, or the zero-functional family. Estimates
/// touching several families are flagged.
pub fn morse_membership(
    omega: &OmegaEstimate,
    equilibria: &[EquilibriumRecord],
    tols: &DynamicsTols,
) -> MorseReport {
    let mut nodal: Vec<&EquilibriumRecord> = equilibria
        .iter()
        .filter(|r| r.class == EquilibriumClass::Eplus)
        .collect();
    nodal.sort_by(|a, b| {
        b.lambda
            .lambda
            .value
            .partial_cmp(&a.lambda.lambda.value)
            .unwrap()
    });
    let ordering: Vec<(usize, f64)> = nodal
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.lambda.lambda.value))
        .collect();
    let bottom = nodal.len(); // index of the zero-functional family

    let mut details = Vec::new();
    let mut memberships: Vec<Option<usize>> = Vec::new();
    for rep in &omega.representatives {
        let family = if let Some(matched) = rep
            .matched
            .as_ref()
            .filter(|m| m.class == EquilibriumClass::Eplus)
        {
            nodal
                .iter()
                .position(|r| r.field.linf_distance(&matched.field) <= tols.match_tol)
        } else if rep.lambda.lambda.k == 0 {
            Some(bottom)
        } else {
            None
        };
        if family.is_none() {
            details.push(format!(
                "representative at t = {} fits no family (functional index {})",
                rep.t, rep.lambda.lambda.k
            ));
        }
        memberships.push(family);
    }
    let first = memberships.first().copied().flatten();
    let single = !memberships.is_empty()
        && memberships.iter().all(|m| m.is_some() && *m == first);
    MorseReport {
        family_count: nodal.len() + 1,
        ordering,
        membership: if single { first } else { None },
        straddle: !single,
        details,
    }
}

/// Convenience: evolve from even, decreasing initial data (a baseline run
/// for the case classifier).
pub fn baseline_symmetric_run(
    domain: &std::sync::Arc<Domain>,
    f: &Nonlinearity,
    height: f64,
    params: &SolverParams,
) -> Result<Trajectory> {
    let ell = domain.half_extent();
    let u0 = Field::from_fn(domain, |x, _| {
        height * (std::f64::consts::PI * x.abs() / (2.0 * ell)).cos()
    });
    evolve(&u0, f, &crate::nonlinearity::Forcing::none(), params, None)
}
