//! Semi-implicit time stepping for the parabolic Dirichlet problem:
//! diffusion is treated implicitly (conjugate gradients on the symmetric
//! positive definite system), reaction and forcing explicitly.

use std::sync::Arc;

use crate::domain::Domain;
use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::linalg::conjugate_gradient;
use crate::nonlinearity::{Forcing, Nonlinearity};

/// Time-stepping parameters.
///
/// For comparison-principle experiments dt must satisfy
/// `dt <= 1/(2 beta0)`; the constructor does not force this because plain
/// simulations have no monotonicity requirement.
#[derive(Debug, Clone, Copy)]
pub struct SolverParams {
    pub dt: f64,
    pub t_end: f64,
    /// Snapshots (and observer calls) happen every this many steps.
    pub snapshot_stride: usize,
    /// Relative tolerance of the inner conjugate-gradient solve.
    pub linear_tol: f64,
    pub max_linear_iters: usize,
    /// Abort threshold for the sup norm; `None` picks
    /// `1e3 * sup|u0| + 10`.
    pub blowup_ceiling: Option<f64>,
}

impl SolverParams {
    pub fn new(dt: f64, t_end: f64) -> SolverParams {
        SolverParams {
            dt,
            t_end,
            snapshot_stride: 16,
            linear_tol: 1e-12,
            max_linear_iters: 50_000,
            blowup_ceiling: None,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> SolverParams {
        self.snapshot_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CoreError::InvalidParameter(format!("dt = {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(CoreError::InvalidParameter(format!("t_end = {}", self.t_end)));
        }
        if self.snapshot_stride == 0 {
            return Err(CoreError::InvalidParameter("snapshot_stride = 0".into()));
        }
        if !(self.linear_tol <= 1e-10 && self.linear_tol > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "linear_tol must be in (0, 1e-10], got {}",
                self.linear_tol
            )));
        }
        Ok(())
    }
}

/// Per-step scalar diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub t: f64,
    pub min: f64,
    pub max: f64,
    pub sup_norm: f64,
}

/// Information about an aborted run.
#[derive(Debug, Clone, Copy)]
pub struct BlowUp {
    pub t: f64,
    pub sup_norm: f64,
    pub ceiling: f64,
}

/// A completed (or aborted) run: snapshots, per-step diagnostics, and the
/// configuration that produced them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub domain: Arc<Domain>,
    pub nonlinearity_name: String,
    pub forcing: Forcing,
    pub params: SolverParams,
    /// (t, field) pairs with strictly increasing times; first entry is the
    /// (possibly clipped) initial state.
    pub snapshots: Vec<(f64, Field)>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Magnitude clipped off negative initial values, zero when none.
    pub initial_clip: f64,
    pub aborted: Option<BlowUp>,
}

impl Trajectory {
    /// Assemble a trajectory from precomputed snapshots (file loads, tests).
    pub fn from_snapshots(
        domain: Arc<Domain>,
        nonlinearity_name: &str,
        forcing: Forcing,
        params: SolverParams,
        snapshots: Vec<(f64, Field)>,
    ) -> Result<Trajectory> {
        for pair in snapshots.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(CoreError::InvalidParameter(
                    "snapshot times must be strictly increasing".into(),
                ));
            }
        }
        let diagnostics = snapshots
            .iter()
            .map(|(t, u)| StepDiagnostics {
                t: *t,
                min: u.min(),
                max: u.max(),
                sup_norm: u.sup_norm(),
            })
            .collect();
        Ok(Trajectory {
            domain,
            nonlinearity_name: nonlinearity_name.into(),
            forcing,
            params,
            snapshots,
            diagnostics,
            initial_clip: 0.0,
            aborted: None,
        })
    }

    pub fn final_state(&self) -> &Field {
        &self.snapshots.last().expect("trajectory has snapshots").1
    }

    pub fn final_time(&self) -> f64 {
        self.snapshots.last().expect("trajectory has snapshots").0
    }

    pub fn completed(&self) -> bool {
        self.aborted.is_none()
    }
}

/// Workspace holding grid geometry lookups reused across steps.
struct StepWorkspace {
    coords: Vec<[f64; 2]>,
    /// neighbor interior indices per node: [left, right, down, up]
    neighbors: Vec<[Option<usize>; 4]>,
    inv_h: f64,
    inv_2h: f64,
    inv_h2: f64,
    two_dim: f64,
}

impl StepWorkspace {
    fn new(domain: &Domain) -> StepWorkspace {
        let n = domain.interior_count();
        let coords = (0..n)
            .map(|i| domain.node_coords(domain.node_of_interior(i)))
            .collect();
        let neighbors = (0..n)
            .map(|i| domain.neighbor_interiors(domain.node_of_interior(i)))
            .collect();
        let h = domain.spacing();
        StepWorkspace {
            coords,
            neighbors,
            inv_h: 1.0 / h,
            inv_2h: 1.0 / (2.0 * h),
            inv_h2: 1.0 / (h * h),
            two_dim: 2.0 * domain.dim() as f64,
        }
    }

    /// Dirichlet Laplacian: neighbor sums are grouped (left+right)+(down+up)
    /// so mirror-symmetric inputs produce bitwise mirror-symmetric outputs.
    fn laplacian(&self, v: &[f64], i: usize) -> f64 {
        let nb = &self.neighbors[i];
        let get = |o: &Option<usize>| o.map_or(0.0, |j| v[j]);
        let horizontal = get(&nb[0]) + get(&nb[1]);
        let vertical = get(&nb[2]) + get(&nb[3]);
        ((horizontal + vertical) - self.two_dim * v[i]) * self.inv_h2
    }

    /// Centered gradient, one-sided next to the boundary, zero on isolated
    /// lines (both neighbors outside).
    fn gradient(&self, v: &[f64], i: usize) -> [f64; 2] {
        let nb = &self.neighbors[i];
        let axis = |lo: Option<usize>, hi: Option<usize>| match (lo, hi) {
            (Some(l), Some(r)) => (v[r] - v[l]) * self.inv_2h,
            (None, Some(r)) => (v[r] - v[i]) * self.inv_h,
            (Some(l), None) => (v[i] - v[l]) * self.inv_h,
            (None, None) => 0.0,
        };
        [axis(nb[0], nb[1]), axis(nb[2], nb[3])]
    }

    fn apply_implicit(&self, dt: f64, v: &[f64], out: &mut [f64]) {
        for i in 0..v.len() {
            out[i] = v[i] - dt * self.laplacian(v, i);
        }
    }
}

/// One semi-implicit step: solve
/// `(I - dt Lap) u_next = u + dt (f(x, u, grad u) + h(x, t))`.
pub fn step(
    u: &Field,
    f: &Nonlinearity,
    forcing: &Forcing,
    t: f64,
    params: &SolverParams,
) -> Result<Field> {
    let ws = StepWorkspace::new(u.domain());
    step_with(u, f, forcing, t, params, &ws)
}

fn step_with(
    u: &Field,
    f: &Nonlinearity,
    forcing: &Forcing,
    t: f64,
    params: &SolverParams,
    ws: &StepWorkspace,
) -> Result<Field> {
    let domain = u.domain();
    let dt = params.dt;
    let v = u.values();
    let n = v.len();
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let grad = ws.gradient(v, i);
        let reaction = f.eval(&ws.coords[i], v[i], &grad);
        let force = forcing.eval(domain, &ws.coords[i], t);
        rhs[i] = v[i] + dt * (reaction + force);
    }
    let mut next = v.to_vec();
    conjugate_gradient(
        |x, out| ws.apply_implicit(dt, x, out),
        &rhs,
        &mut next,
        params.linear_tol,
        params.max_linear_iters,
    )?;
    if next.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::NonFinite { t });
    }
    Ok(Field::from_values(domain, next).expect("finite checked"))
}

/// Per-snapshot callback: receives the time and the current state.
pub type Observer<'a> = &'a mut dyn FnMut(f64, &Field);

/// Repeatedly step to `t_end`, recording diagnostics each step and
/// snapshots (plus observer calls) each stride. Negative initial values are
/// clipped to zero and the clip magnitude recorded. A sup norm above the
/// ceiling aborts the run; the partial trajectory is returned with the
/// abort recorded rather than treated as an error.
pub fn evolve(
    u0: &Field,
    f: &Nonlinearity,
    forcing: &Forcing,
    params: &SolverParams,
    mut observer: Option<Observer<'_>>,
) -> Result<Trajectory> {
    params.validate()?;
    let domain = u0.domain().clone();
    let mut u = u0.clone();
    let initial_clip = u.clip_negative();

    let ceiling = params
        .blowup_ceiling
        .unwrap_or_else(|| 1e3 * u.sup_norm() + 10.0);
    let n_steps = (params.t_end / params.dt).round().max(0.0) as usize;

    let ws = StepWorkspace::new(&domain);
    let mut snapshots = Vec::new();
    let mut diagnostics = Vec::with_capacity(n_steps + 1);
    let record = |t: f64, u: &Field, diags: &mut Vec<StepDiagnostics>| {
        diags.push(StepDiagnostics {
            t,
            min: u.min(),
            max: u.max(),
            sup_norm: u.sup_norm(),
        });
    };
    record(0.0, &u, &mut diagnostics);
    snapshots.push((0.0, u.clone()));
    if let Some(obs) = observer.as_mut() {
        obs(0.0, &u);
    }

    let mut aborted = None;
    for k in 1..=n_steps {
        let t_prev = (k - 1) as f64 * params.dt;
        let t = k as f64 * params.dt;
        u = step_with(&u, f, forcing, t_prev, params, &ws)?;
        record(t, &u, &mut diagnostics);
        let sup = diagnostics.last().unwrap().sup_norm;
        if sup > ceiling {
            aborted = Some(BlowUp {
                t,
                sup_norm: sup,
                ceiling,
            });
            snapshots.push((t, u.clone()));
            break;
        }
        if k % params.snapshot_stride == 0 || k == n_steps {
            snapshots.push((t, u.clone()));
            if let Some(obs) = observer.as_mut() {
                obs(t, &u);
            }
        }
    }

    Ok(Trajectory {
        domain,
        nonlinearity_name: f.name().to_string(),
        forcing: *forcing,
        params: *params,
        snapshots,
        diagnostics,
        initial_clip,
        aborted,
    })
}

/// Coefficients of a linear operator `Lap + b . grad + c` with declared
/// bound `|b|, |c| <= beta0`.
#[derive(Debug, Clone)]
pub struct LinearCoeffs {
    pub b: Vec<[f64; 2]>,
    pub c: Vec<f64>,
    pub beta0: f64,
}

impl LinearCoeffs {
    pub fn constant(domain: &Domain, b: [f64; 2], c: f64) -> LinearCoeffs {
        let n = domain.interior_count();
        LinearCoeffs {
            b: vec![b; n],
            c: vec![c; n],
            beta0: b[0].abs().max(b[1].abs()).max(c.abs()),
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let n = domain.interior_count();
        if self.b.len() != n || self.c.len() != n {
            return Err(CoreError::FieldLengthMismatch {
                got: self.b.len().min(self.c.len()),
                expected: n,
            });
        }
        for i in 0..n {
            if self.b[i][0].abs() > self.beta0
                || self.b[i][1].abs() > self.beta0
                || self.c[i].abs() > self.beta0
            {
                return Err(CoreError::InvalidParameter(format!(
                    "coefficient at interior index {i} exceeds declared bound {}",
                    self.beta0
                )));
            }
        }
        Ok(())
    }

    /// Same operator plus `sigma` on the zero-order term, with the declared
    /// bound enlarged to match.
    pub fn shifted(&self, sigma: f64) -> LinearCoeffs {
        LinearCoeffs {
            b: self.b.clone(),
            c: self.c.iter().map(|c| c + sigma).collect(),
            beta0: self.beta0 + sigma.abs(),
        }
    }
}

/// One semi-implicit step of the linear problem `v_t = Lap v + b.grad v + c v`
/// with zero Dirichlet data.
pub fn linear_step(
    v: &Field,
    coeffs: &LinearCoeffs,
    dt: f64,
    linear_tol: f64,
    max_linear_iters: usize,
) -> Result<Field> {
    let domain = v.domain();
    coeffs.validate(domain)?;
    let ws = StepWorkspace::new(domain);
    let vals = v.values();
    let n = vals.len();
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let grad = ws.gradient(vals, i);
        rhs[i] = vals[i]
            + dt * (coeffs.b[i][0] * grad[0] + coeffs.b[i][1] * grad[1] + coeffs.c[i] * vals[i]);
    }
    let mut next = vals.to_vec();
    conjugate_gradient(
        |x, out| ws.apply_implicit(dt, x, out),
        &rhs,
        &mut next,
        linear_tol,
        max_linear_iters,
    )?;
    if next.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::NonFinite { t: 0.0 });
    }
    Ok(Field::from_values(domain, next).expect("finite checked"))
}

/// Apply the linear operator `Lap v + b.grad v + c v` pointwise.
pub fn apply_linear_operator(v: &Field, coeffs: &LinearCoeffs) -> Field {
    let domain = v.domain();
    let ws = StepWorkspace::new(domain);
    let vals = v.values();
    let out: Vec<f64> = (0..vals.len())
        .map(|i| {
            let grad = ws.gradient(vals, i);
            ws.laplacian(vals, i)
                + coeffs.b[i][0] * grad[0]
                + coeffs.b[i][1] * grad[1]
                + coeffs.c[i] * vals[i]
        })
        .collect();
    Field::from_values(domain, out).expect("operator output finite")
}

/// Residual of the steady problem: `Lap z + f(x, z, grad z)`, sup norm.
pub fn steady_residual(z: &Field, f: &Nonlinearity) -> f64 {
    steady_residual_vec(z, f)
        .iter()
        .fold(0.0, |a, r| a.max(r.abs()))
}

/// Residual vector of the steady problem, one entry per interior node.
pub(crate) fn steady_residual_vec(z: &Field, f: &Nonlinearity) -> Vec<f64> {
    let ws = StepWorkspace::new(z.domain());
    let vals = z.values();
    (0..vals.len())
        .map(|i| {
            let grad = ws.gradient(vals, i);
            ws.laplacian(vals, i) + f.eval(&ws.coords[i], vals[i], &grad)
        })
        .collect()
}

/// Discrete gradient at every interior node.
pub(crate) fn gradients(z: &Field) -> Vec<[f64; 2]> {
    let ws = StepWorkspace::new(z.domain());
    let vals = z.values();
    (0..vals.len()).map(|i| ws.gradient(vals, i)).collect()
}

/// Stencil description used for Jacobian assembly: per interior node, the
/// neighbor interior indices [left, right, down, up].
pub(crate) fn neighbor_table(domain: &Domain) -> Vec<[Option<usize>; 4]> {
    (0..domain.interior_count())
        .map(|i| domain.neighbor_interiors(domain.node_of_interior(i)))
        .collect()
}

/// Node coordinates for every interior node.
pub(crate) fn coord_table(domain: &Domain) -> Vec<[f64; 2]> {
    (0..domain.interior_count())
        .map(|i| domain.node_coords(domain.node_of_interior(i)))
        .collect()
}

/// Empirical quotient `|u(x,t) - u(y,s)| / (|x-y|^alpha + |t-s|^{alpha/2})`
/// maximized over sampled node pairs and snapshot pairs in the window.
/// Degenerate pairs (same node, same time) are skipped.
pub fn holder_quotient(
    traj: &Trajectory,
    window: (f64, f64),
    alpha: f64,
    max_nodes: usize,
) -> Result<f64> {
    let snaps: Vec<&(f64, Field)> = traj
        .snapshots
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    if snaps.len() < 2 {
        return Err(CoreError::InvalidParameter(format!(
            "need at least 2 snapshots in window [{}, {}], found {}",
            window.0,
            window.1,
            snaps.len()
        )));
    }
    let domain = &traj.domain;
    let n = domain.interior_count();
    let stride = (n / max_nodes.max(1)).max(1);
    let sampled: Vec<usize> = (0..n).step_by(stride).collect();
    let coords: Vec<[f64; 2]> = sampled
        .iter()
        .map(|&i| domain.node_coords(domain.node_of_interior(i)))
        .collect();

    let mut quotient: f64 = 0.0;
    for (a, (ta, ua)) in snaps.iter().enumerate() {
        for (tb, ub) in snaps.iter().skip(a) {
            let dt_term = (tb - ta).abs().powf(alpha / 2.0);
            for (pi, &i) in sampled.iter().enumerate() {
                for (pj, &j) in sampled.iter().enumerate() {
                    if pi == pj && dt_term == 0.0 {
                        continue;
                    }
                    let dx = coords[pi][0] - coords[pj][0];
                    let dy = coords[pi][1] - coords[pj][1];
                    let dist = (dx * dx + dy * dy).sqrt();
                    let denom = dist.powf(alpha) + dt_term;
                    if denom == 0.0 {
                        continue;
                    }
                    let dv = (ua.values()[i] - ub.values()[j]).abs();
                    quotient = quotient.max(dv / denom);
                }
            }
        }
    }
    Ok(quotient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::nonlinearity::{catalog_get, forcing_get};
    use crate::reflection::symmetry_defect;
    use std::f64::consts::PI;

    fn heat_params(dt: f64, t_end: f64) -> SolverParams {
        SolverParams::new(dt, t_end).with_stride(1_000_000)
    }

    #[test]
    fn heat_step_tracks_separated_solution() {
        // u0 = cos x on (-pi/2, pi/2) decays like e^{-t}
        let d = Domain::build_interval(PI / 2.0, 128).unwrap();
        let u0 = Field::from_fn(&d, |x, _| x.cos());
        let f = Nonlinearity::zero();
        let forcing = Forcing::none();
        let params = heat_params(1e-3, 0.5);
        let traj = evolve(&u0, &f, &forcing, &params, None).unwrap();
        let expected = Field::from_fn(&d, |x, _| (-0.5_f64).exp() * x.cos());
        let err = traj.final_state().linf_distance(&expected);
        assert!(err < 2e-3, "L-inf error {err}");
    }

    #[test]
    fn sampled_equilibrium_moves_only_by_truncation() {
        let d = Domain::build_interval(3.0 * PI, 512).unwrap();
        let xi = Field::from_fn(&d, |x, _| 1.0 + x.cos());
        let f = catalog_get("remark_b").unwrap();
        let params = SolverParams::new(0.01, 0.01);
        let stepped = step(&xi, &f, &Forcing::none(), 0.0, &params).unwrap();
        let drift = stepped.linf_distance(&xi);
        let h = d.spacing();
        assert!(
            drift <= 10.0 * h * h * params.dt,
            "drift {drift} vs budget {}",
            10.0 * h * h * params.dt
        );
    }

    #[test]
    fn zero_state_is_fixed_when_f_vanishes_at_zero() {
        let d = Domain::build_interval(1.0, 32).unwrap();
        let u0 = Field::zeros(&d);
        let f = catalog_get("logistic").unwrap();
        let params = SolverParams::new(0.05, 0.05);
        let stepped = step(&u0, &f, &Forcing::none(), 0.0, &params).unwrap();
        assert_eq!(stepped.sup_norm(), 0.0);
    }

    #[test]
    fn even_initial_data_stays_bitwise_even() {
        let d = Domain::build_interval(2.0, 64).unwrap();
        let u0 = Field::from_fn(&d, |x, _| (-(x.abs())).exp());
        let f = catalog_get("gradient_even").unwrap();
        let params = SolverParams::new(1.0 / 16.0, 2.0).with_stride(4);
        let traj = evolve(&u0, &f, &Forcing::none(), &params, None).unwrap();
        for (t, snap) in &traj.snapshots {
            assert_eq!(symmetry_defect(snap), 0.0, "asymmetry at t = {t}");
        }
    }

    #[test]
    fn reflected_input_gives_reflected_output() {
        let d = Domain::build_interval(2.0, 64).unwrap();
        let u = Field::from_fn(&d, |x, _| (x - 0.3).max(0.0) * (1.2 - x).max(0.0));
        let f = catalog_get("gradient_even").unwrap();
        let params = SolverParams::new(1.0 / 16.0, 0.0);
        let mirrored = {
            let mut vals = vec![0.0; d.interior_count()];
            for i in 0..d.interior_count() {
                vals[d.mirror_interior(i)] = u.values()[i];
            }
            Field::from_values(&d, vals).unwrap()
        };
        let a = step(&u, &f, &Forcing::none(), 0.0, &params).unwrap();
        let b = step(&mirrored, &f, &Forcing::none(), 0.0, &params).unwrap();
        let mut defect: f64 = 0.0;
        for i in 0..d.interior_count() {
            defect = defect.max((a.values()[i] - b.values()[d.mirror_interior(i)]).abs());
        }
        assert!(defect <= 1e-12, "equivariance defect {defect}");
    }

    #[test]
    fn comparison_order_is_preserved_for_gradient_free_f() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let d = Domain::build_interval(2.0, 48).unwrap();
        let f = catalog_get("logistic").unwrap();
        let params = SolverParams::new(1.0 / (2.0 * f.lipschitz_bound()), 0.0);
        for _ in 0..20 {
            let base: Vec<f64> = (0..d.interior_count()).map(|_| rng.gen::<f64>()).collect();
            let gap: Vec<f64> = (0..d.interior_count())
                .map(|_| 0.05 + rng.gen::<f64>())
                .collect();
            let u = Field::from_values(&d, base.clone()).unwrap();
            let v = Field::from_values(
                &d,
                base.iter().zip(&gap).map(|(b, g)| b + g).collect(),
            )
            .unwrap();
            let su = step(&u, &f, &Forcing::none(), 0.0, &params).unwrap();
            let sv = step(&v, &f, &Forcing::none(), 0.0, &params).unwrap();
            for i in 0..d.interior_count() {
                assert!(sv.values()[i] >= su.values()[i] - 1e-12);
            }
        }
    }

    #[test]
    fn nonnegativity_is_preserved_when_f_at_zero_is_nonnegative() {
        let d = Domain::build_interval(2.0, 64).unwrap();
        let u0 = Field::from_fn(&d, |x, _| (1.0 - x * x).max(0.0));
        for name in ["logistic", "allen_cahn", "gradient_even"] {
            let f = catalog_get(name).unwrap();
            let params = SolverParams::new(1.0 / (2.0 * f.lipschitz_bound()), 3.0).with_stride(8);
            let traj = evolve(&u0, &f, &Forcing::none(), &params, None).unwrap();
            for diag in &traj.diagnostics {
                assert!(diag.min >= -1e-12, "{name}: min {} at t={}", diag.min, diag.t);
            }
        }
    }

    #[test]
    fn blow_up_guard_aborts_the_run() {
        let d = Domain::build_interval(2.0, 32).unwrap();
        let u0 = Field::from_fn(&d, |x, _| (1.0 - x * x).max(0.0));
        let growth = Nonlinearity::custom("doubling", 2.0, true, true, |_, u, _| 2.0 * u);
        let params = SolverParams::new(0.05, 50.0).with_stride(10);
        let traj = evolve(&u0, &growth, &Forcing::none(), &params, None).unwrap();
        let abort = traj.aborted.expect("run must hit the ceiling");
        assert!(abort.sup_norm > abort.ceiling);
        assert!(traj.final_time() < 50.0);
    }

    #[test]
    fn negative_initial_values_are_clipped_and_logged() {
        let d = Domain::build_interval(1.0, 16).unwrap();
        let u0 = Field::from_fn(&d, |x, _| x); // negative on the left half
        let f = catalog_get("logistic").unwrap();
        let params = SolverParams::new(0.05, 0.05);
        let traj = evolve(&u0, &f, &Forcing::none(), &params, None).unwrap();
        assert!(traj.initial_clip > 0.5);
        assert!(traj.snapshots[0].1.min() >= 0.0);
    }

    #[test]
    fn linear_step_with_zero_coefficients_is_a_heat_step() {
        let d = Domain::build_interval(PI / 2.0, 64).unwrap();
        let v = Field::from_fn(&d, |x, _| x.cos());
        let coeffs = LinearCoeffs::constant(&d, [0.0, 0.0], 0.0);
        let stepped = linear_step(&v, &coeffs, 1e-3, 1e-12, 10_000).unwrap();
        let f = Nonlinearity::zero();
        let params = SolverParams::new(1e-3, 0.0);
        let reference = step(&v, &f, &Forcing::none(), 0.0, &params).unwrap();
        assert!(stepped.linf_distance(&reference) <= 1e-14);
    }

    #[test]
    fn linear_step_max_principle_keeps_nonnegativity() {
        let d = Domain::build_interval(1.0, 32).unwrap();
        let v0 = Field::from_fn(&d, |x, _| (1.0 - x * x).max(0.0));
        let coeffs = LinearCoeffs::constant(&d, [0.0, 0.0], -0.5);
        let mut v = v0;
        for _ in 0..100 {
            v = linear_step(&v, &coeffs, 0.05, 1e-12, 10_000).unwrap();
            assert!(v.min() >= -1e-14);
        }
    }

    #[test]
    fn linear_step_rejects_out_of_bound_coefficients() {
        let d = Domain::build_interval(1.0, 16).unwrap();
        let v = Field::zeros(&d);
        let mut coeffs = LinearCoeffs::constant(&d, [0.0, 0.0], 1.0);
        coeffs.c[3] = 5.0; // exceeds declared beta0 = 1
        assert!(linear_step(&v, &coeffs, 0.1, 1e-12, 100).is_err());
    }

    #[test]
    fn negative_part_decays_on_small_subdomains() {
        // v_t = Lap v + c v on (-s/2, s/2): the negative part decays at
        // rate (pi/s)^2 - c; measure the empirical rate for a sweep of s.
        let c = 2.0;
        for s in [1.0_f64, 1.5, 2.0] {
            let d = Domain::build_interval(s / 2.0, 64).unwrap();
            let coeffs = LinearCoeffs::constant(&d, [0.0, 0.0], c);
            let mut v = Field::from_fn(&d, |x, _| -(PI * x / s).cos());
            let dt = 1e-3;
            let t_total = 0.5;
            let before = v.values().iter().fold(0.0_f64, |a, &x| a.max(-x));
            let steps = (t_total / dt) as usize;
            for _ in 0..steps {
                v = linear_step(&v, &coeffs, dt, 1e-12, 10_000).unwrap();
            }
            let after = v.values().iter().fold(0.0_f64, |a, &x| a.max(-x));
            let measured_rate = (before / after).ln() / t_total;
            let predicted = (PI / s).powi(2) - c;
            assert!(
                (measured_rate - predicted).abs() <= 0.15 * predicted.abs().max(1.0),
                "s={s}: measured {measured_rate}, predicted {predicted}"
            );
        }
    }

    #[test]
    fn holder_quotient_is_bounded_on_smooth_decay() {
        let d = Domain::build_interval(PI / 2.0, 64).unwrap();
        let u0 = Field::from_fn(&d, |x, _| x.cos());
        let f = Nonlinearity::zero();
        let params = SolverParams::new(0.01, 1.0).with_stride(10);
        let traj = evolve(&u0, &f, &Forcing::none(), &params, None).unwrap();
        let q = holder_quotient(&traj, (0.0, 1.0), 0.5, 32).unwrap();
        // scale: sup|grad u| * diam^{1/2} is about 1.8 here
        assert!(q.is_finite() && q > 0.0 && q < 10.0, "quotient {q}");
    }

    #[test]
    fn holder_quotient_requires_two_snapshots() {
        let d = Domain::build_interval(1.0, 16).unwrap();
        let u0 = Field::from_fn(&d, |x, _| 1.0 - x * x);
        let f = Nonlinearity::zero();
        let params = SolverParams::new(0.01, 0.5).with_stride(5);
        let traj = evolve(&u0, &f, &Forcing::none(), &params, None).unwrap();
        assert!(holder_quotient(&traj, (0.4, 0.401), 0.5, 16).is_err());
    }

    #[test]
    fn forced_step_feels_the_ramp() {
        let d = Domain::build_interval(2.0, 32).unwrap();
        let u0 = Field::from_fn(&d, |x, _| (1.0 - x * x).max(0.0));
        let f = catalog_get("logistic").unwrap();
        let ramp = forcing_get("exp_ramp", 1.0, 0.25).unwrap();
        let params = SolverParams::new(0.05, 0.0);
        let with = step(&u0, &f, &ramp, 0.0, &params).unwrap();
        let without = step(&u0, &f, &Forcing::none(), 0.0, &params).unwrap();
        assert!(with.linf_distance(&without) > 1e-4);
        // the ramp is odd in x1, so it must break evenness
        assert!(symmetry_defect(&with) > 1e-4);
        assert_eq!(symmetry_defect(&without), 0.0);
    }

    #[test]
    fn spatial_and_temporal_orders_are_observed() {
        // spatial: dt tied to h^2 so the O(h^2) term dominates
        let mut errors = Vec::new();
        for n in [32usize, 64, 128] {
            let d = Domain::build_interval(PI / 2.0, n).unwrap();
            let u0 = Field::from_fn(&d, |x, _| x.cos());
            let dt = 0.4 * (32.0 / n as f64).powi(2) * 0.01;
            let params = heat_params(dt, 0.25);
            let traj = evolve(&u0, &Nonlinearity::zero(), &Forcing::none(), &params, None)
                .unwrap();
            let exact = Field::from_fn(&d, |x, _| (-0.25_f64).exp() * x.cos());
            errors.push(traj.final_state().linf_distance(&exact));
        }
        let rate01 = (errors[0] / errors[1]).log2();
        let rate12 = (errors[1] / errors[2]).log2();
        assert!(rate01 >= 1.9 && rate12 >= 1.9, "spatial rates {rate01}, {rate12}");

        // temporal: fine grid, halve dt
        let d = Domain::build_interval(PI / 2.0, 512).unwrap();
        let u0 = Field::from_fn(&d, |x, _| x.cos());
        let exact = Field::from_fn(&d, |x, _| (-0.25_f64).exp() * x.cos());
        let mut terrors = Vec::new();
        for dt in [0.025, 0.0125, 0.00625] {
            let traj = evolve(
                &u0,
                &Nonlinearity::zero(),
                &Forcing::none(),
                &heat_params(dt, 0.25),
                None,
            )
            .unwrap();
            terrors.push(traj.final_state().linf_distance(&exact));
        }
        let t01 = (terrors[0] / terrors[1]).log2();
        let t12 = (terrors[1] / terrors[2]).log2();
        assert!(t01 >= 0.9 && t12 >= 0.9, "temporal rates {t01}, {t12}");
    }
}
