//! Closed convex target sets with exact Euclidean projection.

use serde::{Deserialize, Serialize};

use super::{GeometryError, MeasurementVec};

/// Stopping tolerance for Dykstra's alternating projections.
pub const DYKSTRA_TOL: f64 = 1e-9;
/// Sweep budget for Dykstra's alternating projections.
pub const MAX_DYKSTRA_ITERS: usize = 10_000;
/// Default absolute membership shell.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// A closed convex set in measurement space.
///
/// Parses from the externally tagged form, e.g.
/// `{"box": {"lower": [0, 0], "upper": [11, 0.5]}}` or
/// `{"intersection": [{"singleton": [1, 1]}, ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvexTarget {
    Singleton(Vec<f64>),
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// `{ z : normal . z <= offset }`
    Halfspace { normal: Vec<f64>, offset: f64 },
    Intersection(Vec<ConvexTarget>),
}

impl ConvexTarget {
    /// Dimension of the ambient space, or `None` for an empty intersection.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Singleton(p) => Some(p.len()),
            Self::Box { lower, .. } => Some(lower.len()),
            Self::Ball { center, .. } => Some(center.len()),
            Self::Halfspace { normal, .. } => Some(normal.len()),
            Self::Intersection(members) => members.first().and_then(ConvexTarget::dim),
        }
    }

    /// Checks the structural invariants of every variant. `path` names the
    /// config field for error messages.
    pub fn validate(&self, path: &str) -> Result<usize, GeometryError> {
        let invalid = |reason: String| GeometryError::InvalidTarget {
            field: path.to_string(),
            reason,
        };
        let finite = |v: &[f64], name: &str| {
            if v.iter().all(|c| c.is_finite()) {
                Ok(())
            } else {
                Err(invalid(format!("{name} has non-finite entries")))
            }
        };
        match self {
            Self::Singleton(p) => {
                if p.is_empty() {
                    return Err(invalid("singleton point is empty".into()));
                }
                finite(p, "point")?;
                Ok(p.len())
            }
            Self::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(invalid(format!(
                        "lower has {} entries and upper has {}",
                        lower.len(),
                        upper.len()
                    )));
                }
                finite(lower, "lower")?;
                finite(upper, "upper")?;
                if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
                    return Err(invalid(format!(
                        "lower[{i}] = {} exceeds upper[{i}] = {}",
                        lower[i], upper[i]
                    )));
                }
                Ok(lower.len())
            }
            Self::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(invalid("ball center is empty".into()));
                }
                finite(center, "center")?;
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(invalid(format!("radius {radius} must be finite and >= 0")));
                }
                Ok(center.len())
            }
            Self::Halfspace { normal, offset } => {
                if normal.is_empty() {
                    return Err(invalid("halfspace normal is empty".into()));
                }
                finite(normal, "normal")?;
                if !offset.is_finite() {
                    return Err(invalid("offset is not finite".into()));
                }
                if normal.iter().all(|&c| c == 0.0) {
                    return Err(invalid("normal must be nonzero".into()));
                }
                Ok(normal.len())
            }
            Self::Intersection(members) => {
                if members.is_empty() {
                    return Err(invalid("intersection has no members".into()));
                }
                let mut dim = None;
                for (i, member) in members.iter().enumerate() {
                    let d = member.validate(&format!("{path}.intersection[{i}]"))?;
                    match dim {
                        None => dim = Some(d),
                        Some(d0) if d0 != d => {
                            return Err(invalid(format!(
                                "member {i} has dimension {d}, expected {d0}"
                            )))
                        }
                        _ => {}
                    }
                }
                // Probe for emptiness: project the origin and check every member.
                let d = dim.unwrap_or(0);
                let probe = MeasurementVec::zeros(d);
                let p = self.project(&probe).map_err(|e| invalid(e.to_string()))?;
                for (i, member) in members.iter().enumerate() {
                    if !member.contains(&p, 1e-6).map_err(|e| invalid(e.to_string()))? {
                        return Err(invalid(format!(
                            "intersection appears empty (probe violates member {i})"
                        )));
                    }
                }
                Ok(d)
            }
        }
    }

    fn check_dim(&self, x: &MeasurementVec) -> Result<(), GeometryError> {
        match self.dim() {
            Some(d) if d == x.len() => Ok(()),
            Some(d) => Err(GeometryError::DimensionMismatch {
                expected: d,
                found: x.len(),
            }),
            None => Err(GeometryError::InvalidTarget {
                field: "target".into(),
                reason: "intersection has no members".into(),
            }),
        }
    }

    /// Euclidean projection of `x` onto the set.
    pub fn project(&self, x: &MeasurementVec) -> Result<MeasurementVec, GeometryError> {
        self.check_dim(x)?;
        Ok(match self {
            Self::Singleton(p) => MeasurementVec::from_column_slice(p),
            Self::Box { lower, upper } => {
                MeasurementVec::from_fn(x.len(), |i, _| x[i].clamp(lower[i], upper[i]))
            }
            Self::Ball { center, radius } => {
                let c = MeasurementVec::from_column_slice(center);
                let offset = x - &c;
                let norm = offset.norm();
                if norm <= *radius {
                    x.clone()
                } else {
                    c + offset * (*radius / norm)
                }
            }
            Self::Halfspace { normal, offset } => {
                let n = MeasurementVec::from_column_slice(normal);
                let excess = n.dot(x) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x - n.scale(excess / n.norm_squared())
                }
            }
            Self::Intersection(members) => dykstra(members, x)?,
        })
    }

    /// `|x - project(x)|^2`.
    pub fn squared_distance(&self, x: &MeasurementVec) -> Result<f64, GeometryError> {
        let p = self.project(x)?;
        Ok((x - p).norm_squared())
    }

    pub fn distance(&self, x: &MeasurementVec) -> Result<f64, GeometryError> {
        self.squared_distance(x).map(f64::sqrt)
    }

    /// Membership within an absolute distance shell `tol`.
    pub fn contains(&self, x: &MeasurementVec, tol: f64) -> Result<bool, GeometryError> {
        Ok(self.squared_distance(x)? <= tol * tol)
    }
}

/// Dykstra's alternating projections onto a finite intersection.
fn dykstra(members: &[ConvexTarget], x: &MeasurementVec) -> Result<MeasurementVec, GeometryError> {
    if members.len() == 1 {
        return members[0].project(x);
    }
    let mut current = x.clone();
    let mut increments = vec![MeasurementVec::zeros(x.len()); members.len()];
    for _ in 0..MAX_DYKSTRA_ITERS {
        let sweep_start = current.clone();
        let mut increment_change = 0.0;
        for (member, inc) in members.iter().zip(increments.iter_mut()) {
            let shifted = &current + &*inc;
            let next = member.project(&shifted)?;
            let new_inc = shifted - &next;
            increment_change += (&new_inc - &*inc).norm_squared();
            *inc = new_inc;
            current = next;
        }
        let moved = (&current - sweep_start).norm();
        if moved <= DYKSTRA_TOL && increment_change.sqrt() <= DYKSTRA_TOL {
            return Ok(current);
        }
    }
    Err(GeometryError::DykstraNonConvergence {
        iterations: MAX_DYKSTRA_ITERS,
    })
}
