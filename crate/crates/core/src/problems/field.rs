use crate::error::{Error, Result};

pub const DEFAULT_WIRE_POSITIONS: [[f64; 2]; 2] = [[0.25, 0.5], [0.75, 0.5]];
/// Opposite currents: with equal strengths the fields cancel on the midpoint
/// between the wires and the unit direction is undefined there.
pub const DEFAULT_WIRE_STRENGTHS: [f64; 2] = [1.0, -1.0];

const WIRE_EXCLUSION: f64 = 1e-9;

/// In-plane magnetic field direction used by the 2D problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    /// Two straight wires perpendicular to the plane.
    TwoWire {
        positions: [[f64; 2]; 2],
        strengths: [f64; 2],
    },
    /// Constant direction (normalized on evaluation).
    Uniform([f64; 2]),
}

impl Default for Field {
    fn default() -> Self {
        Field::TwoWire {
            positions: DEFAULT_WIRE_POSITIONS,
            strengths: DEFAULT_WIRE_STRENGTHS,
        }
    }
}

impl Field {
    /// Unit field direction at `p`.
    pub fn direction(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        match self {
            Field::TwoWire {
                positions,
                strengths,
            } => two_wire_field(p, positions, strengths),
            Field::Uniform(b) => normalize(*b, p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Field::TwoWire {
                positions,
                strengths,
            } => {
                for w in positions {
                    if !w.iter().all(|c| *c > 0.0 && *c < 1.0) {
                        return Err(Error::invalid(format!(
                            "wire position ({}, {}) must lie strictly inside the unit square",
                            w[0], w[1]
                        )));
                    }
                }
                if !strengths.iter().all(|s| s.is_finite()) || strengths.iter().all(|s| *s == 0.0) {
                    return Err(Error::invalid(
                        "wire strengths must be finite and not all zero",
                    ));
                }
                Ok(())
            }
            Field::Uniform(b) => normalize(*b, [0.0, 0.0]).map(|_| ()),
        }
    }
}

/// Superposed azimuthal field of two out-of-plane wires, normalized to unit length.
pub fn two_wire_field(
    p: [f64; 2],
    positions: &[[f64; 2]; 2],
    strengths: &[f64; 2],
) -> Result<[f64; 2]> {
    let mut b = [0.0; 2];
    for (w, s) in positions.iter().zip(strengths) {
        let dx = p[0] - w[0];
        let dy = p[1] - w[1];
        let r2 = dx * dx + dy * dy;
        if r2.sqrt() <= WIRE_EXCLUSION {
            return Err(Error::SingularPoint { x: p[0], y: p[1] });
        }
        b[0] -= s * dy / r2;
        b[1] += s * dx / r2;
    }
    normalize(b, p)
}

fn normalize(b: [f64; 2], p: [f64; 2]) -> Result<[f64; 2]> {
    let norm = b[0].hypot(b[1]);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::SingularPoint { x: p[0], y: p[1] });
    }
    Ok([b[0] / norm, b[1] / norm])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn midpoint_is_vertical() {
        let b = Field::default().direction([0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(b[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1].abs(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn equal_strengths_cancel_at_midpoint() {
        let r = two_wire_field([0.5, 0.5], &DEFAULT_WIRE_POSITIONS, &[1.0, 1.0]);
        assert!(matches!(r, Err(Error::SingularPoint { .. })));
    }

    #[test]
    fn single_wire_is_azimuthal() {
        let w = DEFAULT_WIRE_POSITIONS;
        for r in [0.01, 0.1, 0.3] {
            let b = two_wire_field([w[0][0] + r, w[0][1]], &w, &[1.0, 0.0]).unwrap();
            assert_abs_diff_eq!(b[0], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(b[1], 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn unit_length_everywhere() {
        let f = Field::default();
        for i in 1..40 {
            for j in 1..40 {
                let p = [i as f64 / 40.0 + 0.003, j as f64 / 40.0 + 0.001];
                let b = f.direction(p).unwrap();
                assert_abs_diff_eq!(b[0].hypot(b[1]), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn wire_center_is_singular() {
        let f = Field::default();
        assert!(matches!(
            f.direction([0.25, 0.5]),
            Err(Error::SingularPoint { .. })
        ));
        assert!(f.direction([0.25 + 1e-6, 0.5]).is_ok());
    }

    #[test]
    fn validation() {
        assert!(Field::default().validate().is_ok());
        let outside = Field::TwoWire {
            positions: [[0.0, 0.5], [0.75, 0.5]],
            strengths: [1.0, 1.0],
        };
        assert!(outside.validate().is_err());
        assert!(Field::Uniform([0.0, 0.0]).validate().is_err());
    }
}
