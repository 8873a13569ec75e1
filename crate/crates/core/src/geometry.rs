//! Obstacle geometry: smooth closed curves (circles and ellipses) with
//! `2 pi`-periodic parametrizations, and collections of disjoint obstacles.

use crate::error::{Error, Result};

/// Minimum allowed gap between two obstacle circles.
const MIN_GAP: f64 = 1e-12;

/// A smooth closed curve parametrized over `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub center: (f64, f64),
    /// Semi-axis along x.
    pub a: f64,
    /// Semi-axis along y (equal to `a` for a circle).
    pub b: f64,
    /// Phase offset of the parametrization (rotates the node placement,
    /// not the curve itself for circles).
    pub phase: f64,
}

/// Position and derivatives of a curve at one parameter value.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySample {
    pub position: (f64, f64),
    pub tangent: (f64, f64),
    pub second: (f64, f64),
    /// Outward unit normal.
    pub normal: (f64, f64),
    /// Speed `|gamma'(t)|`.
    pub speed: f64,
}

impl Curve {
    pub fn circle(center: (f64, f64), radius: f64) -> Result<Self> {
        Self::ellipse(center, radius, radius, 0.0)
    }

    pub fn ellipse(center: (f64, f64), a: f64, b: f64, phase: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && phase.is_finite()) || a <= 0.0 || b <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "curve semi-axes must be positive and finite, got a = {a}, b = {b}"
            )));
        }
        Ok(Curve {
            center,
            a,
            b,
            phase,
        })
    }

    pub fn is_circle(&self) -> bool {
        self.a == self.b
    }

    /// Radius of the bounding circle.
    pub fn outer_radius(&self) -> f64 {
        self.a.max(self.b)
    }

    /// `gamma(t) = center + (a cos(t + phase), b sin(t + phase))` and its
    /// first two derivatives.
    pub fn sample(&self, t: f64) -> BoundarySample {
        let s = t + self.phase;
        let (sin, cos) = s.sin_cos();
        let position = (self.center.0 + self.a * cos, self.center.1 + self.b * sin);
        let tangent = (-self.a * sin, self.b * cos);
        let second = (-self.a * cos, -self.b * sin);
        let speed = tangent.0.hypot(tangent.1);
        // The parametrization is counterclockwise, so the outward normal is
        // the tangent rotated by -pi/2.
        let normal = (tangent.1 / speed, -tangent.0 / speed);
        BoundarySample {
            position,
            tangent,
            second,
            normal,
            speed,
        }
    }

    /// Curvature at parameter `t` (positive for convex curves).
    pub fn curvature(&self, t: f64) -> f64 {
        let s = self.sample(t);
        (s.tangent.0 * s.second.1 - s.tangent.1 * s.second.0).abs() / s.speed.powi(3)
    }
}

/// A collection of pairwise disjoint obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    curves: Vec<Curve>,
}

impl Domain {
    pub fn new(curves: Vec<Curve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::InvalidArgument(
                "a domain needs at least one obstacle".into(),
            ));
        }
        for i in 0..curves.len() {
            for j in (i + 1)..curves.len() {
                let (ci, cj) = (&curves[i], &curves[j]);
                let dx = ci.center.0 - cj.center.0;
                let dy = ci.center.1 - cj.center.1;
                let dist = dx.hypot(dy);
                // Bounding-circle test; exact for circles, conservative for
                // ellipses.
                if dist <= ci.outer_radius() + cj.outer_radius() + MIN_GAP {
                    return Err(Error::OverlappingCurves { first: i, second: j });
                }
            }
        }
        Ok(Domain { curves })
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Signed distance lower bound from a point to obstacle `i`
    /// (distance to the bounding circle; exact for circles).
    pub fn distance_to_curve(&self, i: usize, x: f64, y: f64) -> f64 {
        let c = &self.curves[i];
        let d = (x - c.center.0).hypot(y - c.center.1);
        d - c.outer_radius()
    }
}

/// A rectangular grid of identical disks: `cols` columns spaced `pitch_x`
/// apart and one or two rows split symmetrically about the x axis.
///
/// Column `j` (1-based) sits at `x = (j - 1) pitch_x`; with two rows the
/// disks sit at `y = +/- pitch_y / 2`, with one row at `y = 0`. The two-row
/// variant takes per-row radii `(r_top, r_bottom)`.
pub fn grid_domain(
    cols: usize,
    rows: usize,
    pitch_x: f64,
    pitch_y: f64,
    radii: (f64, f64),
) -> Result<Domain> {
    if cols == 0 || !(rows == 1 || rows == 2) {
        return Err(Error::InvalidArgument(format!(
            "grid must have at least one column and 1 or 2 rows, got {cols}x{rows}"
        )));
    }
    let mut curves = Vec::with_capacity(cols * rows);
    for j in 0..cols {
        let x = j as f64 * pitch_x;
        if rows == 1 {
            curves.push(Curve::circle((x, 0.0), radii.0)?);
        } else {
            curves.push(Curve::circle((x, pitch_y / 2.0), radii.0)?);
            curves.push(Curve::circle((x, -pitch_y / 2.0), radii.1)?);
        }
    }
    Domain::new(curves)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_sample_geometry() {
        let c = Curve::circle((1.0, -2.0), 0.5).unwrap();
        let s = c.sample(0.0);
        assert!((s.position.0 - 1.5).abs() < 1e-15);
        assert!((s.position.1 + 2.0).abs() < 1e-15);
        // Outward normal points away from the center.
        assert!((s.normal.0 - 1.0).abs() < 1e-15 && s.normal.1.abs() < 1e-15);
        assert!((s.speed - 0.5).abs() < 1e-15);
        // Curvature of a circle is 1/R everywhere.
        for t in [0.0, 0.7, 2.9, 5.5] {
            assert!((c.curvature(t) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_rotates_parametrization() {
        let plain = Curve::circle((0.0, 0.0), 1.0).unwrap();
        let shifted = Curve::ellipse((0.0, 0.0), 1.0, 1.0, 0.25).unwrap();
        let a = plain.sample(0.6);
        let b = shifted.sample(0.35);
        assert!((a.position.0 - b.position.0).abs() < 1e-15);
        assert!((a.position.1 - b.position.1).abs() < 1e-15);
    }

    #[test]
    fn ellipse_normal_is_outward_unit() {
        let c = Curve::ellipse((0.0, 0.0), 2.0, 1.0, 0.0).unwrap();
        for t in [0.1, 1.0, 2.5, 4.0, 6.0] {
            let s = c.sample(t);
            let n = s.normal;
            assert!((n.0.hypot(n.1) - 1.0).abs() < 1e-14);
            // Orthogonal to the tangent.
            assert!((n.0 * s.tangent.0 + n.1 * s.tangent.1).abs() < 1e-12);
            // Moving along the normal increases distance from the curve
            // interior: (gamma - center) . n > 0 holds for convex curves.
            assert!(s.position.0 * n.0 + s.position.1 * n.1 > 0.0);
        }
    }

    #[test]
    fn derivative_consistency() {
        // Finite-difference check of tangent and second derivative.
        let c = Curve::ellipse((0.3, -0.1), 1.3, 0.8, 0.9).unwrap();
        let h = 1e-6;
        for t in [0.2, 1.7, 3.3, 5.9] {
            let sm = c.sample(t - h);
            let s0 = c.sample(t);
            let sp = c.sample(t + h);
            let fd_tan = ((sp.position.0 - sm.position.0) / (2.0 * h),
                          (sp.position.1 - sm.position.1) / (2.0 * h));
            assert!((fd_tan.0 - s0.tangent.0).abs() < 1e-8);
            assert!((fd_tan.1 - s0.tangent.1).abs() < 1e-8);
            let fd_sec = ((sp.position.0 - 2.0 * s0.position.0 + sm.position.0) / (h * h),
                          (sp.position.1 - 2.0 * s0.position.1 + sm.position.1) / (h * h));
            assert!((fd_sec.0 - s0.second.0).abs() < 1e-3);
            assert!((fd_sec.1 - s0.second.1).abs() < 1e-3);
        }
    }

    #[test]
    fn domain_rejects_touching_circles() {
        let a = Curve::circle((0.0, 0.0), 1.0).unwrap();
        let b = Curve::circle((2.0, 0.0), 1.0).unwrap();
        match Domain::new(vec![a.clone(), b]) {
            Err(Error::OverlappingCurves { first: 0, second: 1 }) => {}
            other => panic!("expected overlap error, got {other:?}"),
        }
        let c = Curve::circle((2.0 + 1e-6, 0.0), 1.0).unwrap();
        assert!(Domain::new(vec![a, c]).is_ok());
    }

    #[test]
    fn grid_domain_layout() {
        let d = grid_domain(3, 2, 2.0, 1.0, (0.35, 0.28)).unwrap();
        assert_eq!(d.len(), 6);
        let curves = d.curves();
        // Column 2 (index j=1) top disk.
        assert!((curves[2].center.0 - 2.0).abs() < 1e-15);
        assert!((curves[2].center.1 - 0.5).abs() < 1e-15);
        assert!((curves[2].a - 0.35).abs() < 1e-15);
        // Bottom row has the second radius.
        assert!((curves[3].center.1 + 0.5).abs() < 1e-15);
        assert!((curves[3].a - 0.28).abs() < 1e-15);

        let single = grid_domain(4, 1, 2.0, 0.0, (0.3, 0.3)).unwrap();
        assert_eq!(single.len(), 4);
        assert!(single.curves().iter().all(|c| c.center.1 == 0.0));

        assert!(grid_domain(2, 3, 2.0, 1.0, (0.3, 0.3)).is_err());
        assert!(grid_domain(0, 1, 2.0, 1.0, (0.3, 0.3)).is_err());
    }

    #[test]
    fn distance_to_circle() {
        let d = Domain::new(vec![Curve::circle((0.0, 0.0), 0.5).unwrap()]).unwrap();
        assert!((d.distance_to_curve(0, 2.0, 0.0) - 1.5).abs() < 1e-15);
        assert!(d.distance_to_curve(0, 0.1, 0.0) < 0.0);
    }
}
