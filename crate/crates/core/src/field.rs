//! Real-valued grid functions vanishing on the boundary.

use std::sync::Arc;

use crate::domain::Domain;
use crate::error::{CoreError, Result};

/// One real value per interior node of a [`Domain`], with an implicit zero
/// trace on and outside the boundary (the Dirichlet condition).
#[derive(Debug, Clone)]
pub struct Field {
    domain: Arc<Domain>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(domain: &Arc<Domain>) -> Field {
        Field {
            domain: domain.clone(),
            values: vec![0.0; domain.interior_count()],
        }
    }

    /// Build from a function of the node coordinates (x1, x2).
    pub fn from_fn(domain: &Arc<Domain>, f: impl Fn(f64, f64) -> f64) -> Field {
        let values = (0..domain.interior_count())
            .map(|i| {
                let [x1, x2] = domain.node_coords(domain.node_of_interior(i));
                f(x1, x2)
            })
            .collect();
        Field {
            domain: domain.clone(),
            values,
        }
    }

    pub fn from_values(domain: &Arc<Domain>, values: Vec<f64>) -> Result<Field> {
        if values.len() != domain.interior_count() {
            return Err(CoreError::FieldLengthMismatch {
                got: values.len(),
                expected: domain.interior_count(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NonFiniteField { index });
        }
        Ok(Field {
            domain: domain.clone(),
            values,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a flat grid node, zero when the node is not interior.
    pub fn at_node(&self, node: usize) -> f64 {
        match self.domain.interior_index(node) {
            Some(i) => self.values[i],
            None => 0.0,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, &v| a.min(v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v))
    }

    pub fn linf_distance(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |a, (u, v)| a.max((u - v).abs()))
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// self + c * other, elementwise.
    pub fn add_scaled(&self, c: f64, other: &Field) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field {
            domain: self.domain.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| u + c * v)
                .collect(),
        }
    }

    /// Clamp negative values to zero, returning how far below zero the field
    /// dipped before clipping.
    pub fn clip_negative(&mut self) -> f64 {
        let mut undershoot: f64 = 0.0;
        for v in &mut self.values {
            if *v < 0.0 {
                undershoot = undershoot.max(-*v);
                *v = 0.0;
            }
        }
        undershoot
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;

    #[test]
    fn zero_extension_outside_interior() {
        let d = Domain::build_interval(1.0, 8).unwrap();
        let f = Field::from_fn(&d, |x, _| 1.0 + x);
        // node 0 is the boundary node at x = -1
        assert_eq!(f.at_node(0), 0.0);
        let inner = d.node_of_interior(0);
        assert!(f.at_node(inner) != 0.0);
    }

    #[test]
    fn length_and_finiteness_are_checked() {
        let d = Domain::build_interval(1.0, 8).unwrap();
        assert!(Field::from_values(&d, vec![0.0; 3]).is_err());
        let mut vals = vec![0.0; d.interior_count()];
        vals[2] = f64::NAN;
        assert!(matches!(
            Field::from_values(&d, vals),
            Err(CoreError::NonFiniteField { index: 2 })
        ));
    }
}
