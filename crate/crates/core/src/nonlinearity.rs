//! Reaction terms f(x, u, grad u), decaying forcings h(x, t), and samplers
//! that check the declared structure hypotheses numerically.
//!
//! Catalog evaluators are held constant in u outside a clamp window, which
//! keeps them globally Lipschitz, and are extended below u = 0 by their
//! value at u = 0 so transient undershoots from discretization stay
//! harmless.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::Domain;
use crate::error::{CoreError, Result};

type CustomEval = Arc<dyn Fn(&[f64; 2], f64, &[f64; 2]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Zero,
    Logistic,
    RemarkB,
    AllenCahn { theta: f64 },
    GradientEven { eps: f64 },
    Custom(CustomEval),
}

/// An evaluatable reaction term with declared symmetry metadata and a
/// declared global Lipschitz bound in (u, p).
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    beta0: f64,
    independent_of_x1: bool,
    even_in_p1: bool,
    /// f is held constant in u outside [u_lo, u_hi].
    u_clamp: (f64, f64),
    /// p1 contributions are held constant outside [-p1_clamp, p1_clamp].
    p1_clamp: f64,
    kind: Kind,
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("beta0", &self.beta0)
            .finish()
    }
}

/// Fetch a catalog entry by name.
///
/// - `logistic`: u(1-u), held at -2 for u >= 2. Vanishes at u = 0.
/// - `remark_b`: u - 1 up to u = 2, a cubic bridge down to -1 at u = 3,
///   a quadratic descent to -3 by u = 3.5, constant after. Negative at 0.
/// - `allen_cahn`: u(1-u)(u - theta) with theta = 0.3, clamped at u = 2.
/// - `gradient_even`: u(1-u) + 0.1 * min(p1^2, 25), exercising an even
///   gradient dependence.
pub fn catalog_get(name: &str) -> Result<Nonlinearity> {
    match name {
        "logistic" => Ok(Nonlinearity {
            name: name.into(),
            beta0: 3.0,
            independent_of_x1: true,
            even_in_p1: true,
            u_clamp: (0.0, 2.0),
            p1_clamp: f64::INFINITY,
            kind: Kind::Logistic,
        }),
        "remark_b" => Ok(Nonlinearity {
            name: name.into(),
            beta0: 8.0,
            independent_of_x1: true,
            even_in_p1: true,
            u_clamp: (0.0, 3.5),
            p1_clamp: f64::INFINITY,
            kind: Kind::RemarkB,
        }),
        "allen_cahn" => Ok(Nonlinearity::allen_cahn(0.3)),
        "gradient_even" => Ok(Nonlinearity::gradient_even(0.1)),
        other => Err(CoreError::UnknownCatalogName(other.into())),
    }
}

impl Nonlinearity {
    pub fn zero() -> Nonlinearity {
        Nonlinearity {
            name: "zero".into(),
            beta0: 0.0,
            independent_of_x1: true,
            even_in_p1: true,
            u_clamp: (0.0, f64::INFINITY),
            p1_clamp: f64::INFINITY,
            kind: Kind::Zero,
        }
    }

    pub fn allen_cahn(theta: f64) -> Nonlinearity {
        Nonlinearity {
            name: format!("allen_cahn(theta={theta})"),
            beta0: 8.0,
            independent_of_x1: true,
            even_in_p1: true,
            u_clamp: (0.0, 2.0),
            p1_clamp: f64::INFINITY,
            kind: Kind::AllenCahn { theta },
        }
    }

    pub fn gradient_even(eps: f64) -> Nonlinearity {
        Nonlinearity {
            name: format!("gradient_even(eps={eps})"),
            beta0: 3.0_f64.max(2.0 * eps * 5.0),
            independent_of_x1: true,
            even_in_p1: true,
            u_clamp: (0.0, 2.0),
            p1_clamp: 5.0,
            kind: Kind::GradientEven { eps },
        }
    }

    /// Wrap an arbitrary evaluator; partial derivatives fall back to central
    /// differences. Used for planted-defect tests and bespoke experiments.
    pub fn custom(
        name: &str,
        beta0: f64,
        independent_of_x1: bool,
        even_in_p1: bool,
        eval: impl Fn(&[f64; 2], f64, &[f64; 2]) -> f64 + Send + Sync + 'static,
    ) -> Nonlinearity {
        Nonlinearity {
            name: name.into(),
            beta0,
            independent_of_x1,
            even_in_p1,
            u_clamp: (f64::NEG_INFINITY, f64::INFINITY),
            p1_clamp: f64::INFINITY,
            kind: Kind::Custom(Arc::new(eval)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.beta0
    }

    pub fn declares_independent_of_x1(&self) -> bool {
        self.independent_of_x1
    }

    pub fn declares_even_in_p1(&self) -> bool {
        self.even_in_p1
    }

    fn clamp_u(&self, u: f64) -> f64 {
        u.clamp(self.u_clamp.0, self.u_clamp.1)
    }

    fn clamp_p1(&self, p1: f64) -> f64 {
        p1.clamp(-self.p1_clamp, self.p1_clamp)
    }

    /// Evaluate f(x, u, p). Values of u below the clamp window (in
    /// particular u < 0) reuse the window edge, so f(x, u, p) = f(x, 0, p)
    /// for u < 0 on catalog entries.
    pub fn eval(&self, x: &[f64; 2], u: f64, p: &[f64; 2]) -> f64 {
        let u = self.clamp_u(u);
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::Logistic => u * (1.0 - u),
            Kind::RemarkB => remark_b_profile(u),
            Kind::AllenCahn { theta } => u * (1.0 - u) * (u - theta),
            Kind::GradientEven { eps } => {
                let q = self.clamp_p1(p[0]);
                u * (1.0 - u) + eps * q * q
            }
            Kind::Custom(f) => f(x, u, p),
        }
    }

    /// Partial derivative with respect to u, analytic for catalog entries.
    pub fn df_du(&self, x: &[f64; 2], u: f64, p: &[f64; 2]) -> f64 {
        let uc = self.clamp_u(u);
        if u < self.u_clamp.0 || u > self.u_clamp.1 {
            return 0.0;
        }
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::Logistic => 1.0 - 2.0 * uc,
            Kind::RemarkB => remark_b_slope(uc),
            Kind::AllenCahn { theta } => {
                -3.0 * uc * uc + 2.0 * (1.0 + theta) * uc - theta
            }
            Kind::GradientEven { .. } => 1.0 - 2.0 * uc,
            Kind::Custom(f) => {
                let s = 1e-6 * (1.0 + u.abs());
                (f(x, u + s, p) - f(x, u - s, p)) / (2.0 * s)
            }
        }
    }

    /// Partial gradient with respect to p, analytic for catalog entries.
    pub fn df_dp(&self, x: &[f64; 2], u: f64, p: &[f64; 2]) -> [f64; 2] {
        match &self.kind {
            Kind::GradientEven { eps } => {
                if p[0].abs() > self.p1_clamp {
                    [0.0, 0.0]
                } else {
                    [2.0 * eps * p[0], 0.0]
                }
            }
            Kind::Custom(f) => {
                let mut out = [0.0; 2];
                for a in 0..2 {
                    let s = 1e-6 * (1.0 + p[a].abs());
                    let mut hi = *p;
                    let mut lo = *p;
                    hi[a] += s;
                    lo[a] -= s;
                    out[a] = (f(x, u, &hi) - f(x, u, &lo)) / (2.0 * s);
                }
                out
            }
            _ => [0.0, 0.0],
        }
    }
}

fn remark_b_profile(u: f64) -> f64 {
    if u <= 2.0 {
        u - 1.0
    } else if u <= 3.0 {
        let s = u - 2.0;
        (u - 1.0) - 3.0 * s * s * s
    } else if u <= 3.5 {
        let s = u - 3.0;
        -1.0 - 8.0 * s + 8.0 * s * s
    } else {
        -3.0
    }
}

fn remark_b_slope(u: f64) -> f64 {
    if u <= 2.0 {
        1.0
    } else if u <= 3.0 {
        let s = u - 2.0;
        1.0 - 9.0 * s * s
    } else if u <= 3.5 {
        16.0 * (u - 3.0) - 8.0
    } else {
        0.0
    }
}

/// Report of the structure-hypothesis sampler.
#[derive(Debug, Clone)]
pub struct SymmetryCheckReport {
    pub samples: usize,
    pub max_x1_violation: f64,
    pub max_p1_violation: f64,
}

impl SymmetryCheckReport {
    pub fn pass(&self) -> bool {
        self.max_x1_violation == 0.0 && self.max_p1_violation == 0.0
    }
}

/// Sample random (x, u, p) and measure how far f strays from being
/// independent of x1 and even in p1.
pub fn check_symmetry_hypotheses(
    f: &Nonlinearity,
    n_samples: usize,
    seed: u64,
) -> Result<SymmetryCheckReport> {
    if n_samples < 100 {
        return Err(CoreError::InvalidParameter(format!(
            "need at least 100 samples, got {n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_x1: f64 = 0.0;
    let mut max_p1: f64 = 0.0;
    for _ in 0..n_samples {
        let x = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
        let u = rng.gen_range(0.0..4.0);
        let p = [rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)];
        let x_shift = [rng.gen_range(-10.0..10.0), x[1]];
        let base = f.eval(&x, u, &p);
        max_x1 = max_x1.max((base - f.eval(&x_shift, u, &p)).abs());
        let p_flip = [-p[0], p[1]];
        max_p1 = max_p1.max((base - f.eval(&x, u, &p_flip)).abs());
    }
    Ok(SymmetryCheckReport {
        samples: n_samples,
        max_x1_violation: max_x1,
        max_p1_violation: max_p1,
    })
}

/// Box over which difference quotients are sampled.
#[derive(Debug, Clone, Copy)]
pub struct SamplingBox {
    pub u_range: (f64, f64),
    pub p_range: (f64, f64),
}

impl Default for SamplingBox {
    fn default() -> Self {
        SamplingBox {
            u_range: (0.0, 4.0),
            p_range: (-5.0, 5.0),
        }
    }
}

/// Maximum sampled difference quotient of f over the box; an estimate of
/// the true Lipschitz constant from below.
pub fn check_lipschitz(
    f: &Nonlinearity,
    sampling: SamplingBox,
    n_samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quotient: f64 = 0.0;
    for _ in 0..n_samples {
        let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let u = rng.gen_range(sampling.u_range.0..sampling.u_range.1);
        let p = [
            rng.gen_range(sampling.p_range.0..sampling.p_range.1),
            rng.gen_range(sampling.p_range.0..sampling.p_range.1),
        ];
        // small perturbations probe the local slope, large ones the secant
        let du = rng.gen_range(-0.5..0.5);
        let dp = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        let u2 = (u + du).clamp(sampling.u_range.0, sampling.u_range.1);
        let p2 = [p[0] + dp[0], p[1] + dp[1]];
        let dist =
            ((u2 - u).powi(2) + (p2[0] - p[0]).powi(2) + (p2[1] - p[1]).powi(2)).sqrt();
        if dist < 1e-12 {
            continue;
        }
        let dv = (f.eval(&x, u2, &p2) - f.eval(&x, u, &p)).abs();
        quotient = quotient.max(dv / dist);
    }
    quotient
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ForcingKind {
    Zero,
    ExpRamp,
    ExpBump,
}

/// A perturbation h(x, t) with a sup-norm envelope decaying to zero.
#[derive(Debug, Clone, Copy)]
pub struct Forcing {
    kind: ForcingKind,
    amplitude: f64,
    decay_rate: f64,
}

impl Forcing {
    pub fn none() -> Forcing {
        Forcing {
            kind: ForcingKind::Zero,
            amplitude: 0.0,
            decay_rate: 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.kind == ForcingKind::Zero || self.amplitude == 0.0
    }

    pub fn describe(&self) -> String {
        match self.kind {
            ForcingKind::Zero => "none".into(),
            ForcingKind::ExpRamp => format!(
                "exp_ramp(amplitude={}, decay_rate={})",
                self.amplitude, self.decay_rate
            ),
            ForcingKind::ExpBump => format!(
                "exp_bump(amplitude={}, decay_rate={})",
                self.amplitude, self.decay_rate
            ),
        }
    }

    /// Evaluate at a point of the given domain.
    ///
    /// `exp_ramp` is amplitude * exp(-rate t) * x1/ell: odd in x1, so it
    /// breaks the reflection symmetry while it lasts. `exp_bump` is a
    /// spatial bump centered off the symmetry plane.
    pub fn eval(&self, domain: &Domain, x: &[f64; 2], t: f64) -> f64 {
        match self.kind {
            ForcingKind::Zero => 0.0,
            ForcingKind::ExpRamp => {
                self.amplitude * (-self.decay_rate * t).exp() * x[0] / domain.half_extent()
            }
            ForcingKind::ExpBump => {
                let ell = domain.half_extent();
                let cx = 0.5 * ell;
                let w = 0.25 * ell;
                let d2 = ((x[0] - cx) / w).powi(2)
                    + if domain.dim() == 2 {
                        ((x[1] - 0.5 * domain.spacing() * 2.0) / w).powi(2)
                    } else {
                        0.0
                    };
                self.amplitude * (-self.decay_rate * t).exp() * (-d2).exp()
            }
        }
    }

    /// Decaying sup-norm envelope: |h(., t)| <= envelope(t) -> 0.
    pub fn envelope(&self, t: f64) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.amplitude * (-self.decay_rate * t).exp()
        }
    }
}

/// Fetch a forcing by name (`exp_ramp` or `exp_bump`). Zero amplitude
/// reduces the forced problem to the autonomous one.
pub fn forcing_get(name: &str, amplitude: f64, decay_rate: f64) -> Result<Forcing> {
    if amplitude < 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "amplitude must be nonnegative, got {amplitude}"
        )));
    }
    if decay_rate <= 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "decay_rate must be positive, got {decay_rate}"
        )));
    }
    let kind = match name {
        "exp_ramp" => ForcingKind::ExpRamp,
        "exp_bump" => ForcingKind::ExpBump,
        "none" => ForcingKind::Zero,
        other => return Err(CoreError::UnknownCatalogName(other.into())),
    };
    Ok(Forcing {
        kind,
        amplitude,
        decay_rate,
    })
}
