//! Steady states of the autonomous problem: damped-Newton solves, the
//! zero / symmetric-decreasing / nontrivial-nodal-set classification, and
//! linearized stability through the leading eigenpair.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::Domain;
use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::linalg::BandMatrix;
use crate::nonlinearity::{Forcing, Nonlinearity};
use crate::reflection::{capital_lambda, symmetry_defect, LambdaResult};
use crate::solver::{
    self, apply_linear_operator, evolve, linear_step, LinearCoeffs, SolverParams,
};

/// Classification of a converged steady state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumClass {
    /// Identically zero (up to the zero tolerance).
    Zero,
    /// Positive, even, nonincreasing away from the symmetry plane.
    E0,
    /// Nontrivial nodal set: the moving-plane functional is positive.
    Eplus,
}

impl std::fmt::Display for EquilibriumClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EquilibriumClass::Zero => write!(f, "zero"),
            EquilibriumClass::E0 => write!(f, "E0"),
            EquilibriumClass::Eplus => write!(f, "Eplus"),
        }
    }
}

/// A converged steady state together with its classification data.
#[derive(Debug, Clone)]
pub struct EquilibriumRecord {
    pub field: Field,
    pub residual: f64,
    pub class: EquilibriumClass,
    pub lambda: LambdaResult,
    /// Connected components of {z > tol_nodal}, as interior index lists.
    pub nodal_components: Vec<Vec<usize>>,
    pub symmetry_defect: f64,
    /// The nodal threshold actually applied (absolute).
    pub tol_nodal: f64,
}

/// Thresholds for classification.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    /// Residual acceptance threshold, relative to max(1, sup|z|).
    pub residual_tol_rel: f64,
    /// Relative tolerance handed to the moving-plane functional.
    pub lambda_tol_rel: f64,
    /// Absolute sup-norm below which a state is the zero equilibrium.
    pub zero_tol: f64,
    /// Relative floor of the nodal threshold; the effective threshold is
    /// max(nodal_floor, h^2) * sup|z| because the discrete steady state
    /// carries O(h^2) error at its nodal points.
    pub nodal_floor: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            residual_tol_rel: 1e-10,
            lambda_tol_rel: 1e-9,
            zero_tol: 1e-9,
            nodal_floor: 1e-6,
        }
    }
}

/// Classify a steady state by the moving-plane functional, cross-checked
/// against the nodal criterion: a nonzero equilibrium has positive
/// functional exactly when it vanishes somewhere inside the domain.
pub fn classify(z: &Field, residual: f64, opts: &ClassifyOptions) -> Result<EquilibriumRecord> {
    let sup = z.sup_norm();
    let threshold = opts.residual_tol_rel * sup.max(1.0);
    if residual > threshold {
        return Err(CoreError::ResidualTooLarge {
            residual,
            threshold,
        });
    }
    let lambda = capital_lambda(z, opts.lambda_tol_rel);
    if sup <= opts.zero_tol {
        return Ok(EquilibriumRecord {
            field: z.clone(),
            residual,
            class: EquilibriumClass::Zero,
            lambda,
            nodal_components: Vec::new(),
            symmetry_defect: symmetry_defect(z),
            tol_nodal: opts.zero_tol,
        });
    }
    let h = z.domain().spacing();
    let tol_nodal = opts.nodal_floor.max(h * h) * sup;
    let nodal_components = positive_components(z, tol_nodal);
    let class = if lambda.lambda.k > 0 {
        EquilibriumClass::Eplus
    } else {
        EquilibriumClass::E0
    };
    // nodal criterion: vanishes somewhere inside the domain
    let vanishes_inside = z.values().iter().any(|&v| v <= tol_nodal);
    let lambda_positive = class == EquilibriumClass::Eplus;
    if vanishes_inside != lambda_positive {
        return Err(CoreError::ClassificationConflict {
            lambda_class: if lambda_positive { "Eplus" } else { "E0" },
            interior_min: z.min(),
            tol_nodal,
        });
    }
    Ok(EquilibriumRecord {
        field: z.clone(),
        residual,
        class,
        lambda,
        nodal_components,
        symmetry_defect: symmetry_defect(z),
        tol_nodal,
    })
}

/// Connected components of {z > threshold} under grid adjacency.
fn positive_components(z: &Field, threshold: f64) -> Vec<Vec<usize>> {
    let domain = z.domain();
    let n = domain.interior_count();
    let include: Vec<bool> = z.values().iter().map(|&v| v > threshold).collect();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if seen[start] || !include[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            comp.push(i);
            for j in domain.neighbor_interiors(domain.node_of_interior(i)).into_iter().flatten() {
                if !seen[j] && include[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Newton solve controls.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Target residual, relative to max(1, sup|z|).
    pub target_rel: f64,
    /// Rounds of pseudo-time continuation tried when Newton stalls.
    pub max_fallback_rounds: usize,
    /// Pseudo-time horizon per fallback round.
    pub fallback_time: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iterations: 60,
            target_rel: 1e-12,
            max_fallback_rounds: 3,
            fallback_time: 2.0,
        }
    }
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Assemble the Jacobian of `z -> Lap z + f(x, z, grad z)` as a band matrix.
fn assemble_jacobian(z: &Field, f: &Nonlinearity) -> BandMatrix {
    let domain = z.domain();
    let n = domain.interior_count();
    let neighbors = solver::neighbor_table(domain);
    let coords = solver::coord_table(domain);
    let grads = solver::gradients(z);
    let h = domain.spacing();
    let inv_h2 = 1.0 / (h * h);
    let inv_2h = 1.0 / (2.0 * h);
    let inv_h = 1.0 / h;

    let mut bandwidth = 1usize;
    for (i, nb) in neighbors.iter().enumerate() {
        for j in nb.iter().flatten() {
            bandwidth = bandwidth.max(i.abs_diff(*j));
        }
    }
    let mut jac = BandMatrix::new(n, bandwidth, bandwidth);
    let two_dim = 2.0 * domain.dim() as f64;
    for i in 0..n {
        let x = coords[i];
        let u = z.values()[i];
        let fu = f.df_du(&x, u, &grads[i]);
        let fp = f.df_dp(&x, u, &grads[i]);
        jac.add(i, i, -two_dim * inv_h2 + fu);
        for j in neighbors[i].iter().flatten() {
            jac.add(i, *j, inv_h2);
        }
        // gradient coupling per axis: centered inside, one-sided at the edge
        for axis in 0..2 {
            if fp[axis] == 0.0 {
                continue;
            }
            let (lo, hi) = (neighbors[i][2 * axis], neighbors[i][2 * axis + 1]);
            match (lo, hi) {
                (Some(l), Some(r)) => {
                    jac.add(i, r, fp[axis] * inv_2h);
                    jac.add(i, l, -fp[axis] * inv_2h);
                }
                (None, Some(r)) => {
                    jac.add(i, r, fp[axis] * inv_h);
                    jac.add(i, i, -fp[axis] * inv_h);
                }
                (Some(l), None) => {
                    jac.add(i, i, fp[axis] * inv_h);
                    jac.add(i, l, -fp[axis] * inv_h);
                }
                (None, None) => {}
            }
        }
    }
    jac
}

/// Damped Newton iteration on the steady problem, with pseudo-time
/// continuation as a fallback when the damped step stalls. Returns a
/// classified record.
pub fn find_equilibrium(
    f: &Nonlinearity,
    guess: &Field,
    newton: &NewtonOptions,
    classify_opts: &ClassifyOptions,
) -> Result<EquilibriumRecord> {
    if !guess.is_finite() {
        return Err(CoreError::InvalidParameter("guess contains non-finite values".into()));
    }
    let mut z = guess.clone();
    let mut fallback_rounds = 0;
    let mut best: Option<(Field, f64)> = None;

    // Returns the best iterate when it already sits below the acceptance
    // threshold; Newton stalls at a rounding floor near kappa(J) * eps.
    let finish = |best: &Option<(Field, f64)>, iterations: usize| match best {
        Some((z, residual))
            if *residual <= classify_opts.residual_tol_rel * z.sup_norm().max(1.0) =>
        {
            classify(z, *residual, classify_opts)
        }
        _ => Err(CoreError::NewtonFailed {
            residual: best.as_ref().map_or(f64::INFINITY, |(_, r)| *r),
            iterations,
        }),
    };

    let mut iterations = 0;
    loop {
        let residual_vec = solver::steady_residual_vec(&z, f);
        let residual = sup(&residual_vec);
        if best.as_ref().is_none_or(|(_, r)| residual < *r) {
            best = Some((z.clone(), residual));
        }
        let target = newton.target_rel * z.sup_norm().max(1.0);
        if residual <= target {
            return classify(&z, residual, classify_opts);
        }
        if iterations >= newton.max_iterations {
            return finish(&best, iterations);
        }
        iterations += 1;

        let jac = assemble_jacobian(&z, f);
        let mut delta: Vec<f64> = residual_vec.iter().map(|r| -r).collect();
        let solved = jac.solve_in_place(&mut delta).is_ok();

        // backtracking damping on the residual norm
        let mut accepted = false;
        if solved {
            let mut alpha = 1.0;
            for _ in 0..9 {
                let trial = z.add_scaled(alpha, &Field::from_values(z.domain(), delta.clone())?);
                if trial.is_finite() {
                    let trial_res = solver::steady_residual(&trial, f);
                    if trial_res < (1.0 - 1e-4 * alpha) * residual {
                        z = trial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }
        if !accepted {
            // the iterate may already be as converged as rounding allows
            if finish(&best, iterations).is_ok() {
                return finish(&best, iterations);
            }
            match pseudo_time_rescue(&mut z, f, newton, &mut fallback_rounds)? {
                true => continue,
                false => return finish(&best, iterations),
            }
        }
    }
}

/// Relax toward the attractor for a short pseudo-time window, giving Newton
/// a fresh starting point. Returns false when the fallback budget is spent.
fn pseudo_time_rescue(
    z: &mut Field,
    f: &Nonlinearity,
    newton: &NewtonOptions,
    rounds: &mut usize,
) -> Result<bool> {
    if *rounds >= newton.max_fallback_rounds {
        return Ok(false);
    }
    *rounds += 1;
    let dt = 0.5 / f.lipschitz_bound().max(0.5);
    let params = SolverParams::new(dt, newton.fallback_time).with_stride(1_000_000);
    let traj = evolve(z, f, &Forcing::none(), &params, None)?;
    if traj.aborted.is_some() {
        return Ok(false);
    }
    *z = traj.final_state().clone();
    Ok(true)
}

/// Outcome of a multi-start sweep.
#[derive(Debug)]
pub struct SweepReport {
    pub records: Vec<EquilibriumRecord>,
    pub n_guesses: usize,
    pub n_converged: usize,
    pub n_failed: usize,
    /// Converged states with genuinely negative values (outside the
    /// nonnegative model class) are discarded, not listed.
    pub n_negative_discarded: usize,
    pub n_duplicates_merged: usize,
    pub eplus_count: usize,
    /// Smallest sup distance between a nontrivial-nodal-set record and a
    /// symmetric-decreasing record, when both kinds were found.
    pub min_eplus_e0_distance: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub n_guesses: usize,
    pub seed: u64,
    pub jobs: usize,
    /// Records closer than this in sup norm are considered the same state.
    pub dedup_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            n_guesses: 50,
            seed: 0,
            jobs: 1,
            dedup_tol: 1e-6,
        }
    }
}

/// Deterministic guess generator. The first four guesses are fixed
/// canonical shapes (the trivial zero guess, a dome, a flat-topped
/// plateau, a cosine packet) so the basic branches are always probed;
/// later guesses cycle through seeded random bumps, packets, domes, and
/// smooth fields.
pub fn sweep_guess(domain: &Arc<Domain>, seed: u64, index: usize) -> Field {
    let ell = domain.half_extent();
    match index {
        0 => return Field::zeros(domain),
        1 => return Field::from_fn(domain, |x, _| 1.2 * (1.0 - (x / ell).powi(2))),
        2 => return Field::from_fn(domain, |x, _| 2.9 * (1.0 - (x / ell).powi(6))),
        3 => {
            return Field::from_fn(domain, |x, _| {
                1.0 + (3.0 * std::f64::consts::PI * x / ell).cos()
            })
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9));
    match index % 4 {
        0 => {
            let center = rng.gen_range(-0.5 * ell..0.5 * ell);
            let width = rng.gen_range(0.2 * ell..0.6 * ell);
            let height = rng.gen_range(0.2..2.5);
            Field::from_fn(domain, |x, _| {
                height * (-((x - center) / width).powi(2)).exp()
            })
        }
        1 => {
            let m = rng.gen_range(1..=3) as f64;
            let amplitude = rng.gen_range(0.5..2.0);
            Field::from_fn(domain, |x, _| {
                amplitude * (1.0 + (m * std::f64::consts::PI * x / ell).cos())
            })
        }
        2 => {
            // domes from parabolic to flat-topped plateaus
            let scale = rng.gen_range(0.1..3.2);
            let power = 2 * rng.gen_range(1..=4);
            Field::from_fn(domain, |x, _| scale * (1.0 - (x / ell).powi(power)))
        }
        _ => {
            let coeffs: Vec<(f64, f64)> = (1..=3)
                .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            Field::from_fn(domain, |x, _| {
                let s = x / ell;
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, (a, b))| {
                        let freq = (j + 1) as f64 * std::f64::consts::PI;
                        a * (freq * s * 0.5).cos() + b * (freq * s).sin()
                    })
                    .sum()
            })
        }
    }
}

/// Multi-start Newton sweep with deterministic guesses, parallel solves,
/// and a single-threaded dedup/merge pass.
pub fn equilibrium_sweep(
    f: &Nonlinearity,
    domain: &Arc<Domain>,
    opts: &SweepOptions,
    newton: &NewtonOptions,
    classify_opts: &ClassifyOptions,
) -> SweepReport {
    if opts.n_guesses == 0 {
        return SweepReport {
            records: Vec::new(),
            n_guesses: 0,
            n_converged: 0,
            n_failed: 0,
            n_negative_discarded: 0,
            n_duplicates_merged: 0,
            eplus_count: 0,
            min_eplus_e0_distance: None,
        };
    }
    let jobs = opts.jobs.max(1);
    let mut outcomes: Vec<Option<Result<EquilibriumRecord>>> = Vec::new();
    outcomes.resize_with(opts.n_guesses, || None);

    std::thread::scope(|scope| {
        let chunk = opts.n_guesses.div_ceil(jobs);
        for (worker, slice) in outcomes.chunks_mut(chunk).enumerate() {
            let start = worker * chunk;
            scope.spawn(move || {
                for (offset, slot) in slice.iter_mut().enumerate() {
                    let guess = sweep_guess(domain, opts.seed, start + offset);
                    *slot = Some(find_equilibrium(f, &guess, newton, classify_opts));
                }
            });
        }
    });

    let mut records: Vec<EquilibriumRecord> = Vec::new();
    let mut n_converged = 0;
    let mut n_failed = 0;
    let mut n_negative = 0;
    let mut n_duplicates = 0;
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            Ok(record) => {
                n_converged += 1;
                if record.field.min() < -record.tol_nodal {
                    n_negative += 1;
                    continue;
                }
                if records
                    .iter()
                    .any(|r| r.field.linf_distance(&record.field) <= opts.dedup_tol)
                {
                    n_duplicates += 1;
                    continue;
                }
                records.push(record);
            }
            Err(_) => n_failed += 1,
        }
    }

    let eplus_count = records
        .iter()
        .filter(|r| r.class == EquilibriumClass::Eplus)
        .count();
    let mut min_dist = None;
    for a in records.iter().filter(|r| r.class == EquilibriumClass::Eplus) {
        for b in records.iter().filter(|r| r.class == EquilibriumClass::E0) {
            let dist = a.field.linf_distance(&b.field);
            min_dist = Some(min_dist.map_or(dist, |d: f64| d.min(dist)));
        }
    }
    SweepReport {
        records,
        n_guesses: opts.n_guesses,
        n_converged,
        n_failed,
        n_negative_discarded: n_negative,
        n_duplicates_merged: n_duplicates,
        eplus_count,
        min_eplus_e0_distance: min_dist,
    }
}

/// Per-nodal-component symmetry measurement.
#[derive(Debug, Clone, Copy)]
pub struct ComponentSymmetry {
    /// x1 position of the component's own reflection plane.
    pub center: f64,
    pub defect: f64,
    pub n_nodes: usize,
}

/// Symmetry report for a converged record: global evenness about x1 = 0 and
/// per-nodal-component evenness about each component's own center plane.
#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub global_defect: f64,
    pub global_tol: f64,
    pub components: Vec<ComponentSymmetry>,
}

impl SymmetryReport {
    pub fn global_pass(&self) -> bool {
        self.global_defect <= self.global_tol
    }
}

/// Check that a nonnegative converged state is even about x1 = 0 and that
/// each nodal component is even about its own center plane.
pub fn check_equilibrium_symmetry(record: &EquilibriumRecord) -> SymmetryReport {
    let z = &record.field;
    let domain = z.domain();
    let (nx, _) = domain.grid_shape();
    let global_defect = record.symmetry_defect;
    let global_tol = 1e-6 * z.sup_norm().max(1e-30);

    let mut components = Vec::new();
    for comp in &record.nodal_components {
        let cols: Vec<usize> = comp
            .iter()
            .map(|&i| domain.node_of_interior(i) % nx)
            .collect();
        let col_min = *cols.iter().min().unwrap();
        let col_max = *cols.iter().max().unwrap();
        let c0 = (nx - 1) / 2;
        let center =
            ((col_min + col_max) as f64 * 0.5 - c0 as f64) * domain.spacing();
        let mut defect: f64 = 0.0;
        for &i in comp {
            let node = domain.node_of_interior(i);
            let col = node % nx;
            let line = node / nx;
            let mirrored_col = col_min + col_max - col;
            let mirrored = line * nx + mirrored_col;
            defect = defect.max((z.values()[i] - z.at_node(mirrored)).abs());
        }
        components.push(ComponentSymmetry {
            center,
            defect,
            n_nodes: comp.len(),
        });
    }
    SymmetryReport {
        global_defect,
        global_tol,
        components,
    }
}

/// Coefficients of the linearization `Lap + f_p . grad + f_u` at a state.
pub fn linearize_at(z: &Field, f: &Nonlinearity) -> LinearCoeffs {
    let coords = solver::coord_table(z.domain());
    let grads = solver::gradients(z);
    let n = z.len();
    let mut b = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut bound: f64 = 0.0;
    for i in 0..n {
        let u = z.values()[i];
        let fu = f.df_du(&coords[i], u, &grads[i]);
        let fp = f.df_dp(&coords[i], u, &grads[i]);
        bound = bound.max(fu.abs()).max(fp[0].abs()).max(fp[1].abs());
        b.push(fp);
        c.push(fu);
    }
    LinearCoeffs { b, c, beta0: bound }
}

#[derive(Debug, Clone, Copy)]
pub struct PowerIterationOptions {
    /// Time step of the propagator applied each iteration.
    pub dt: f64,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        PowerIterationOptions {
            dt: 8.0,
            tol: 1e-12,
            max_iterations: 5_000,
        }
    }
}

/// Leading eigenpair of a linear operator by power iteration through the
/// semi-implicit propagator, shifted so the explicit factor stays positive.
/// The eigenvalue is the Rayleigh quotient of the unshifted operator; the
/// eigenfield is sup-normalized with the dominant lobe made positive.
pub fn leading_eigenpair(
    domain: &Arc<Domain>,
    coeffs: &LinearCoeffs,
    opts: &PowerIterationOptions,
) -> Result<(f64, Field)> {
    let sigma = coeffs.beta0 + 1.0;
    let shifted = coeffs.shifted(sigma);
    let mut v = Field::from_fn(domain, |_, _| 1.0);
    let mut converged = false;
    for _ in 0..opts.max_iterations {
        let mut w = linear_step(&v, &shifted, opts.dt, 1e-12, 200_000)?;
        normalize_sup(&mut w);
        let delta = w.linf_distance(&v);
        v = w;
        if delta <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CoreError::PowerIterationFailed(opts.max_iterations));
    }
    let lv = apply_linear_operator(&v, coeffs);
    let num: f64 = v.values().iter().zip(lv.values()).map(|(a, b)| a * b).sum();
    let den: f64 = v.values().iter().map(|a| a * a).sum();
    Ok((num / den, v))
}

fn normalize_sup(v: &mut Field) {
    let mut peak = 0.0_f64;
    for &x in v.values() {
        if x.abs() > peak.abs() {
            peak = x;
        }
    }
    if peak != 0.0 {
        let inv = 1.0 / peak;
        for x in v.values_mut() {
            *x *= inv;
        }
    }
}
