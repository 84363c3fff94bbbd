//! The reflection difference `V_lambda` and the moving-plane functional.
//!
//! All planes live on the half-grid `lambda = k*h/2`, so reflections are
//! exact node permutations and the functional is quantized but carries no
//! interpolation error. The reported value is the smallest half-grid plane
//! such that every half-grid plane at or above it is violation-free; the
//! witness records the violating plane one half-step below.

use crate::domain::{Domain, Reflected};
use crate::error::{CoreError, Result};
use crate::field::Field;

/// A reflection plane pinned to the half-grid of a specific domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfGridLambda {
    /// Plane index: lambda = k * h/2.
    pub k: usize,
    /// Plane position in length units.
    pub value: f64,
}

impl HalfGridLambda {
    pub fn new(domain: &Domain, k: usize) -> Result<HalfGridLambda> {
        if k > domain.half_steps() {
            return Err(CoreError::LambdaOutOfRange {
                k: k as i64,
                max: domain.half_steps(),
            });
        }
        Ok(HalfGridLambda {
            k,
            value: domain.lambda_value(k),
        })
    }

    pub fn zero() -> HalfGridLambda {
        HalfGridLambda { k: 0, value: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.k == 0
    }
}

/// The plane and node certifying that the functional cannot be pushed lower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    /// Index of the violating plane (one half-step below the reported value).
    pub k_mu: usize,
    /// Position of the violating plane.
    pub mu: f64,
    /// Flat node id where the most negative reflection difference occurred.
    pub node: usize,
    /// The offending value of the reflection difference.
    pub violation: f64,
}

/// Outcome of the moving-plane scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaResult {
    pub lambda: HalfGridLambda,
    /// Present exactly when lambda > 0.
    pub witness: Option<Witness>,
    /// Relative tolerance the scan used.
    pub tol_rel: f64,
    /// Absolute threshold tol_rel * sup|z| that was applied.
    pub tol_abs: f64,
}

impl LambdaResult {
    pub const CSV_HEADER: &'static str = "time,lambda,witness_mu,witness_node,tol";

    /// CSV row `(time, lambda, witness_mu, witness_node, tol)`; witness
    /// columns stay empty when lambda = 0.
    pub fn csv_row(&self, time: f64) -> String {
        match &self.witness {
            Some(w) => format!(
                "{:?},{:?},{:?},{},{:?}",
                time, self.lambda.value, w.mu, w.node, self.tol_abs
            ),
            None => format!("{:?},{:?},,,{:?}", time, self.lambda.value, self.tol_abs),
        }
    }
}

/// Values of a reflection difference on the cap `Omega_lambda`.
#[derive(Debug, Clone)]
pub struct CapValues {
    pub lambda: HalfGridLambda,
    /// (interior index, value) pairs, ascending in interior index.
    pub entries: Vec<(usize, f64)>,
}

impl CapValues {
    pub fn min(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &(i, v) in &self.entries {
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((i, v));
            }
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |a, &(_, v)| a.max(v.abs()))
    }
}

/// Reflection difference `z(P_lambda x) - z(x)` on the cap, with the zero
/// extension standing in when the image leaves the interior.
pub fn v_lambda(z: &Field, lambda: HalfGridLambda) -> Result<CapValues> {
    let domain = z.domain();
    if lambda.k >= domain.half_steps() {
        return Err(CoreError::LambdaOutOfRange {
            k: lambda.k as i64,
            max: domain.half_steps().saturating_sub(1),
        });
    }
    let mut entries = Vec::new();
    for i in 0..domain.interior_count() {
        if !domain.interior_beyond(i, lambda.k) {
            continue;
        }
        let node = domain.node_of_interior(i);
        let reflected = match domain.reflect_node(lambda.k, node) {
            Reflected::Node { node: m, .. } => z.at_node(m),
            Reflected::OffGrid => 0.0,
        };
        entries.push((i, reflected - z.values()[i]));
    }
    Ok(CapValues { lambda, entries })
}

/// The moving-plane functional on the half-grid.
///
/// Scans planes from `ell - h/2` downward and stops at the first (largest)
/// plane whose reflection difference drops below `-tol_rel * sup|z|`; the
/// reported value is one half-step above that plane. The relative tolerance
/// makes the result invariant under positive scaling of `z`.
pub fn capital_lambda(z: &Field, tol_rel: f64) -> LambdaResult {
    let domain = z.domain();
    let tol_abs = tol_rel * z.sup_norm();
    let big_k = domain.half_steps();
    for k_mu in (0..big_k).rev() {
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..domain.interior_count() {
            if !domain.interior_beyond(i, k_mu) {
                continue;
            }
            let node = domain.node_of_interior(i);
            let reflected = match domain.reflect_node(k_mu, node) {
                Reflected::Node { node: m, .. } => z.at_node(m),
                Reflected::OffGrid => 0.0,
            };
            let v = reflected - z.values()[i];
            if worst.is_none_or(|(_, wv)| v < wv) {
                worst = Some((node, v));
            }
        }
        if let Some((node, v)) = worst {
            if v < -tol_abs {
                return LambdaResult {
                    lambda: HalfGridLambda {
                        k: k_mu + 1,
                        value: domain.lambda_value(k_mu + 1),
                    },
                    witness: Some(Witness {
                        k_mu,
                        mu: domain.lambda_value(k_mu),
                        node,
                        violation: v,
                    }),
                    tol_rel,
                    tol_abs,
                };
            }
        }
    }
    LambdaResult {
        lambda: HalfGridLambda::zero(),
        witness: None,
        tol_rel,
        tol_abs,
    }
}

/// Exhaustive double loop over all planes and nodes with no early exit.
/// Reflections go through floating-point coordinates instead of the index
/// map, so the two implementations can cross-check each other. Usable only
/// on small instances.
pub fn capital_lambda_bruteforce(z: &Field, tol_rel: f64) -> Result<LambdaResult> {
    const LIMIT: usize = 10_000;
    let domain = z.domain();
    let n = domain.interior_count();
    if n > LIMIT {
        return Err(CoreError::InstanceTooLarge { nodes: n, limit: LIMIT });
    }
    let tol_abs = tol_rel * z.sup_norm();
    let h = domain.spacing();
    let (nx, _) = domain.grid_shape();
    let c0 = ((nx - 1) / 2) as i64;

    let mut top_violation: Option<(usize, usize, f64)> = None; // (k_mu, node, value)
    for k_mu in 0..domain.half_steps() {
        let mu = domain.lambda_value(k_mu);
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..n {
            let node = domain.node_of_interior(i);
            let [x1, _] = domain.node_coords(node);
            if x1 <= mu {
                continue;
            }
            // image coordinate 2*mu - x1, resolved back to a column index
            let target = 2.0 * mu - x1;
            let col = (target / h).round() as i64 + c0;
            let line = node / nx;
            let reflected = if col < 0 || col >= nx as i64 {
                0.0
            } else {
                let image = line * nx + col as usize;
                let [ix1, _] = domain.node_coords(image);
                debug_assert!((ix1 - target).abs() <= 0.25 * h);
                z.at_node(image)
            };
            let v = reflected - z.values()[i];
            if worst.is_none_or(|(_, wv)| v < wv) {
                worst = Some((node, v));
            }
        }
        if let Some((node, v)) = worst {
            if v < -tol_abs {
                top_violation = Some((k_mu, node, v));
            }
        }
    }
    Ok(match top_violation {
        Some((k_mu, node, v)) => LambdaResult {
            lambda: HalfGridLambda {
                k: k_mu + 1,
                value: domain.lambda_value(k_mu + 1),
            },
            witness: Some(Witness {
                k_mu,
                mu: domain.lambda_value(k_mu),
                node,
                violation: v,
            }),
            tol_rel,
            tol_abs,
        },
        None => LambdaResult {
            lambda: HalfGridLambda::zero(),
            witness: None,
            tol_rel,
            tol_abs,
        },
    })
}

/// Maximum deviation from evenness about x1 = 0: `max |z(x) - z(P_0 x)|`.
pub fn symmetry_defect(z: &Field) -> f64 {
    let domain = z.domain();
    let mut defect: f64 = 0.0;
    for i in 0..domain.interior_count() {
        let j = domain.mirror_interior(i);
        defect = defect.max((z.values()[i] - z.values()[j]).abs());
    }
    defect
}

/// Positive part of forward differences along x1 beyond the plane
/// `x1 = lambda0`: zero exactly when the field is nonincreasing there.
pub fn monotone_defect(z: &Field, lambda0: f64) -> f64 {
    let domain = z.domain();
    let (nx, _) = domain.grid_shape();
    let mut defect: f64 = 0.0;
    for i in 0..domain.interior_count() {
        let node = domain.node_of_interior(i);
        let [x1, _] = domain.node_coords(node);
        if x1 <= lambda0 {
            continue;
        }
        let col = node % nx;
        if col + 1 >= nx {
            continue;
        }
        if let Some(j) = domain.interior_index(node + 1) {
            let rise = z.values()[j] - z.values()[i];
            if rise > defect {
                defect = rise;
            }
        }
    }
    defect
}

/// Largest half-grid plane in (0, ell) whose reflection difference vanishes
/// (to `vanish_tol`) on some entire connected component of the cap.
pub fn max_vanishing_plane(z: &Field, vanish_tol: f64) -> Option<HalfGridLambda> {
    let domain = z.domain();
    for k in (1..domain.half_steps()).rev() {
        let comps = domain.components_at(k);
        if comps.is_empty() {
            continue;
        }
        let cap = v_lambda(
            z,
            HalfGridLambda {
                k,
                value: domain.lambda_value(k),
            },
        )
        .expect("k < half_steps");
        let value_of: std::collections::HashMap<usize, f64> =
            cap.entries.iter().copied().collect();
        for comp in comps {
            let max_abs = comp
                .iter()
                .map(|i| value_of.get(i).copied().unwrap_or(0.0).abs())
                .fold(0.0_f64, f64::max);
            if max_abs <= vanish_tol {
                return Some(HalfGridLambda {
                    k,
                    value: domain.lambda_value(k),
                });
            }
        }
    }
    None
}
