//! Gaussian laser heat sources, stationary or moving along a polyline.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fem::FemSpace;

/// Peak intensity used by the curing simulations.
pub const DEFAULT_INTENSITY: f64 = 4.0e4;
/// Beam width used by the curing simulations.
pub const DEFAULT_WIDTH: f64 = 0.015;

/// One straight leg of a beam path, traversed at constant speed.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub from: [f64; 2],
    pub to: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    None,
    FixedGaussian {
        intensity: f64,
        width: f64,
        center: [f64; 2],
    },
    PathGaussian {
        intensity: f64,
        width: f64,
        segments: Vec<PathSegment>,
    },
}

impl SourceSpec {
    pub fn fixed(center: [f64; 2]) -> Self {
        SourceSpec::FixedGaussian {
            intensity: DEFAULT_INTENSITY,
            width: DEFAULT_WIDTH,
            center,
        }
    }

    /// Three legs converging on the domain center, drawing a "Y".
    /// Boundaries at `t = 1/3, 2/3` belong to the earlier leg.
    pub fn y_path() -> Self {
        let c = [0.5, 0.5];
        SourceSpec::PathGaussian {
            intensity: DEFAULT_INTENSITY,
            width: DEFAULT_WIDTH,
            segments: vec![
                PathSegment {
                    t_start: 0.0,
                    t_end: 1.0 / 3.0,
                    from: [0.25, 5.0 / 6.0],
                    to: c,
                },
                PathSegment {
                    t_start: 1.0 / 3.0,
                    t_end: 2.0 / 3.0,
                    from: [0.5, 1.0 / 6.0],
                    to: c,
                },
                PathSegment {
                    t_start: 2.0 / 3.0,
                    t_end: 1.0,
                    from: [0.75, 5.0 / 6.0],
                    to: c,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_beam = |intensity: f64, width: f64| {
            if !(intensity >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "source intensity {intensity} must be non-negative"
                )));
            }
            if !(width > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "source width {width} must be positive"
                )));
            }
            Ok(())
        };
        match self {
            SourceSpec::None => Ok(()),
            SourceSpec::FixedGaussian {
                intensity, width, ..
            } => check_beam(*intensity, *width),
            SourceSpec::PathGaussian {
                intensity,
                width,
                segments,
            } => {
                check_beam(*intensity, *width)?;
                if segments.is_empty() {
                    return Err(Error::InvalidInput(
                        "path source needs at least one segment".into(),
                    ));
                }
                for s in segments {
                    if !(s.t_start < s.t_end) {
                        return Err(Error::InvalidInput(format!(
                            "path segment [{}, {}] is empty or reversed",
                            s.t_start, s.t_end
                        )));
                    }
                }
                for w in segments.windows(2) {
                    if w[1].t_start < w[0].t_end {
                        return Err(Error::InvalidInput(format!(
                            "path segments overlap at t = {}",
                            w[1].t_start
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Whether the source is defined on all of `[t0, t1]`.
    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        const SLACK: f64 = 1e-12;
        match self {
            SourceSpec::PathGaussian { segments, .. } => {
                let Some(first) = segments.first() else {
                    return false;
                };
                let last = segments[segments.len() - 1];
                first.t_start <= t0 + SLACK
                    && last.t_end >= t1 - SLACK
                    && segments
                        .windows(2)
                        .all(|w| (w[1].t_start - w[0].t_end).abs() <= SLACK)
            }
            _ => true,
        }
    }

    /// Beam center at time `t`, `None` when there is no source.
    pub fn center(&self, t: f64) -> Result<Option<[f64; 2]>> {
        match self {
            SourceSpec::None => Ok(None),
            SourceSpec::FixedGaussian { center, .. } => Ok(Some(*center)),
            SourceSpec::PathGaussian { segments, .. } => {
                const SLACK: f64 = 1e-12;
                let seg = segments
                    .iter()
                    .find(|s| t >= s.t_start - SLACK && t <= s.t_end + SLACK)
                    .ok_or_else(|| Error::OutsidePath {
                        t,
                        start: segments.first().map_or(f64::NAN, |s| s.t_start),
                        end: segments.last().map_or(f64::NAN, |s| s.t_end),
                    })?;
                let r = ((t - seg.t_start) / (seg.t_end - seg.t_start)).clamp(0.0, 1.0);
                Ok(Some([
                    seg.from[0] + r * (seg.to[0] - seg.from[0]),
                    seg.from[1] + r * (seg.to[1] - seg.from[1]),
                ]))
            }
        }
    }

    fn beam(&self) -> Option<(f64, f64)> {
        match self {
            SourceSpec::None => None,
            SourceSpec::FixedGaussian {
                intensity, width, ..
            }
            | SourceSpec::PathGaussian {
                intensity, width, ..
            } => Some((*intensity, *width)),
        }
    }

    pub fn evaluate(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        let (Some(c), Some((intensity, width))) = (self.center(t)?, self.beam()) else {
            return Ok(0.0);
        };
        Ok(gaussian(intensity, width, c, [x, y]))
    }

    /// Nodal values of the intensity at time `t`.
    pub fn nodal(&self, space: &FemSpace, t: f64) -> Result<Vec<f64>> {
        let (Some(c), Some((intensity, width))) = (self.center(t)?, self.beam()) else {
            return Ok(vec![0.0; space.n_dofs()]);
        };
        Ok(space
            .mesh()
            .nodes
            .iter()
            .map(|&p| gaussian(intensity, width, c, p))
            .collect())
    }

    /// P1-interpolated load vector of the intensity at time `t`.
    pub fn load(&self, space: &FemSpace, t: f64) -> Result<Vec<f64>> {
        Ok(space.load_from_nodal(&self.nodal(space, t)?))
    }
}

fn gaussian(intensity: f64, width: f64, c: [f64; 2], p: [f64; 2]) -> f64 {
    let r2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
    intensity * (-r2 / (width * width)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn fixed_source_peak() {
        let s = SourceSpec::fixed([0.5, 0.5]);
        assert_eq!(s.evaluate(0.5, 0.5, 0.3).unwrap(), 4.0e4);
        assert!(s.evaluate(0.6, 0.5, 0.0).unwrap() < 4.0e4);
        assert_eq!(SourceSpec::None.evaluate(0.1, 0.2, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn y_path_waypoints() {
        let s = SourceSpec::y_path();
        s.validate().unwrap();
        assert!(s.covers(0.0, 1.0));
        let c = |t: f64| s.center(t).unwrap().unwrap();
        assert_eq!(c(0.0), [0.25, 5.0 / 6.0]);
        assert_eq!(c(1.0 / 3.0), [0.5, 0.5]);
        assert_abs_diff_eq!(c(0.5)[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c(0.5)[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(c(2.0 / 3.0), [0.5, 0.5]);
        assert_eq!(c(1.0), [0.5, 0.5]);
        assert!(matches!(s.center(1.5), Err(Error::OutsidePath { .. })));
        assert!(!s.covers(0.0, 2.0));
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = SourceSpec::FixedGaussian {
            intensity: -1.0,
            width: 0.1,
            center: [0.5, 0.5],
        };
        assert!(bad.validate().is_err());
        let bad = SourceSpec::FixedGaussian {
            intensity: 1.0,
            width: 0.0,
            center: [0.5, 0.5],
        };
        assert!(bad.validate().is_err());
        let seg = |a, b| PathSegment {
            t_start: a,
            t_end: b,
            from: [0.0, 0.0],
            to: [1.0, 1.0],
        };
        let overlap = SourceSpec::PathGaussian {
            intensity: 1.0,
            width: 0.1,
            segments: vec![seg(0.0, 0.6), seg(0.5, 1.0)],
        };
        assert!(overlap.validate().is_err());
        let reversed = SourceSpec::PathGaussian {
            intensity: 1.0,
            width: 0.1,
            segments: vec![seg(0.5, 0.2)],
        };
        assert!(reversed.validate().is_err());
        let gap = SourceSpec::PathGaussian {
            intensity: 1.0,
            width: 0.1,
            segments: vec![seg(0.0, 0.4), seg(0.5, 1.0)],
        };
        gap.validate().unwrap();
        assert!(!gap.covers(0.0, 1.0));
    }

    #[test]
    fn radially_symmetric() {
        let s = SourceSpec::y_path();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let t: f64 = rng.gen_range(0.0..1.0);
            let c = s.center(t).unwrap().unwrap();
            let r = [rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)];
            let a = s.evaluate(c[0] + r[0], c[1] + r[1], t).unwrap();
            let b = s.evaluate(c[0] - r[0], c[1] - r[1], t).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-14 * 4.0e4);
        }
    }

    #[test]
    fn nodal_maximum_at_nearest_node() {
        let space = FemSpace::new(Mesh::build_uniform(20).unwrap()).unwrap();
        let s = SourceSpec::y_path();
        for t in [0.1, 0.45, 0.8] {
            let v = s.nodal(&space, t).unwrap();
            let argmax = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
            let c = s.center(t).unwrap().unwrap();
            let near = space.mesh().nearest_node(c);
            assert_eq!(v[argmax], v[near]);
        }
    }
}
