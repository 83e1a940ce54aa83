//! Poincaré-disk SVG drawings of planar realizations.

use std::fmt::Write as _;
use std::path::Path;

use hypervis_core::procsim::{BallGrain, BooleanModelSample, Hyperplane, HyperplaneSample};

use crate::HarnessError;

pub const VIEW_BOX: &str = "-1.05 -1.05 2.1 2.1";
pub const GRAIN_OPACITY: f64 = 0.25;

/// Below this disk radius a hyperplane is drawn as a diameter.
const DIAMETER_EPS: f64 = 1e-9;

/// A hyperbolic disc as a Euclidean circle in the Poincaré disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskCircle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

/// A geodesic line as drawn in the Poincaré disk, between its two ideal
/// endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiskGeodesic {
    Diameter { from: [f64; 2], to: [f64; 2] },
    Arc { from: [f64; 2], to: [f64; 2], radius: f64, center: [f64; 2] },
}

pub enum Model<'a> {
    Boolean(&'a BooleanModelSample),
    Hyperplanes(&'a HyperplaneSample),
}

impl Model<'_> {
    fn dim(&self) -> usize {
        match self {
            Model::Boolean(m) => m.d,
            Model::Hyperplanes(m) => m.d,
        }
    }
}

fn check_planar(d: usize) -> Result<(), HarnessError> {
    if d == 2 {
        Ok(())
    } else {
        Err(HarnessError::Usage(format!("rendering is only available for d = 2, got d = {d}")))
    }
}

/// Image of a disc grain. The radial geodesic through the center meets the
/// disc at signed distances `t - r` and `t + r` from the base point, and
/// those two points are antipodal on the image circle.
pub fn grain_circle(grain: &BallGrain) -> Result<DiskCircle, HarnessError> {
    let spatial = grain.center.spatial();
    check_planar(spatial.len())?;
    let t = grain.center.coords()[0].max(1.0).acosh();
    let norm = spatial[0].hypot(spatial[1]);
    let dir = if norm > 0.0 {
        [spatial[0] / norm, spatial[1] / norm]
    } else {
        [1.0, 0.0]
    };
    let near = (0.5 * (t - grain.radius)).tanh();
    let far = (0.5 * (t + grain.radius)).tanh();
    let mid = 0.5 * (near + far);
    Ok(DiskCircle {
        cx: mid * dir[0],
        cy: mid * dir[1],
        r: 0.5 * (far - near),
    })
}

/// Image of a hyperplane: the circle orthogonal to the boundary through the
/// closest point to the base point.
pub fn plane_geodesic(plane: &Hyperplane) -> Result<DiskGeodesic, HarnessError> {
    check_planar(plane.dim())?;
    let n = plane.normal();
    let x = plane.origin_distance();
    let norm = n[1].hypot(n[2]);
    let theta = n[2].atan2(n[1]);
    let rho = (0.5 * x).tanh();
    let at = |a: f64| [a.cos(), a.sin()];
    if rho < DIAMETER_EPS || norm == 0.0 {
        return Ok(DiskGeodesic::Diameter {
            from: at(theta - std::f64::consts::FRAC_PI_2),
            to: at(theta + std::f64::consts::FRAC_PI_2),
        });
    }
    let c = (1.0 + rho * rho) / (2.0 * rho);
    let half_span = (1.0 / c).acos();
    Ok(DiskGeodesic::Arc {
        from: at(theta - half_span),
        to: at(theta + half_span),
        radius: (1.0 - rho * rho) / (2.0 * rho),
        center: [c * theta.cos(), c * theta.sin()],
    })
}

fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub fn svg_string(model: &Model<'_>, view_radius: f64) -> Result<String, HarnessError> {
    check_planar(model.dim())?;
    if view_radius.is_nan() || view_radius <= 0.0 {
        return Err(HarnessError::Usage(format!("view radius must be positive, got {view_radius}")));
    }
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{VIEW_BOX}" width="600" height="600">"#);
    let _ = writeln!(
        svg,
        r#"<circle cx="0" cy="0" r="1" fill="none" stroke="black" stroke-width="0.005"/>"#
    );
    match model {
        Model::Boolean(m) => {
            for g in &m.grains {
                let t = g.center.coords()[0].max(1.0).acosh();
                if t - g.radius > view_radius {
                    continue;
                }
                let c = grain_circle(g)?;
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{}" cy="{}" r="{}" fill="steelblue" fill-opacity="{GRAIN_OPACITY}" stroke="none"/>"#,
                    num(c.cx),
                    num(c.cy),
                    num(c.r)
                );
            }
        }
        Model::Hyperplanes(m) => {
            for p in &m.planes {
                if p.origin_distance() > view_radius {
                    continue;
                }
                let path = match plane_geodesic(p)? {
                    DiskGeodesic::Diameter { from, to } => {
                        format!("M {} {} L {} {}", num(from[0]), num(from[1]), num(to[0]), num(to[1]))
                    }
                    // The short arc between the ideal endpoints, bending
                    // towards the base point, runs clockwise about the
                    // center in these coordinates.
                    DiskGeodesic::Arc { from, to, radius, .. } => format!(
                        "M {} {} A {r} {r} 0 0 0 {} {}",
                        num(from[0]),
                        num(from[1]),
                        num(to[0]),
                        num(to[1]),
                        r = num(radius)
                    ),
                };
                let _ = writeln!(svg, r#"<path d="{path}" fill="none" stroke="darkred" stroke-width="0.004"/>"#);
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_svg(model: &Model<'_>, out_path: &Path, view_radius: f64) -> Result<(), HarnessError> {
    std::fs::write(out_path, svg_string(model, view_radius)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use hypervis_core::hypgeom::{
        direction_to, exp_map, orthogonal_tangent, polar_point, rotate_in_plane, to_poincare, HPoint, UnitTangent,
    };

    fn grain(angle: f64, t: f64, r: f64) -> BallGrain {
        BallGrain::new(polar_point(&[angle.cos(), angle.sin()], t), r).unwrap()
    }

    fn on_circle(c: &DiskCircle, z: &[f64]) -> f64 {
        ((z[0] - c.cx).hypot(z[1] - c.cy) - c.r).abs()
    }

    #[test]
    fn centered_grain_is_concentric() {
        let c = grain_circle(&BallGrain::new(HPoint::origin(2), 1.3).unwrap()).unwrap();
        assert!(c.cx.abs() < 1e-15 && c.cy.abs() < 1e-15);
        assert!((c.r - (0.65f64).tanh()).abs() < 1e-15);
    }

    #[test]
    fn circle_passes_through_boundary_points() {
        for (angle, t, r) in [(0.3, 2.0, 0.5), (2.0, 0.2, 0.7), (-1.0, 4.0, 1.5)] {
            let g = grain(angle, t, r);
            let c = grain_circle(&g).unwrap();
            // every boundary point, not only the radial ones
            for k in 0..12 {
                let phi = k as f64 * std::f64::consts::PI / 6.0;
                let e = UnitTangent::axis(&g.center, 1).unwrap();
                let u = rotate_in_plane(&e, &orthogonal_tangent(&e), phi);
                let x = exp_map(&g.center, &u, r).unwrap();
                assert!(on_circle(&c, &to_poincare(&x)) < 1e-10, "{angle} {t} {r} {k}");
            }
            for s in [t - r, t + r] {
                let z = to_poincare(&polar_point(&[angle.cos(), angle.sin()], s));
                assert!(on_circle(&c, &z) < 1e-12);
            }
        }
    }

    #[test]
    fn plane_arc_is_orthogonal_and_contains_the_plane() {
        let p = HPoint::origin(2);
        let u = UnitTangent::from_spatial(&p, &[0.6, 0.8]).unwrap();
        let plane = Hyperplane::from_offset(&u, 1.2);
        let DiskGeodesic::Arc { radius, center, from, to } = plane_geodesic(&plane).unwrap() else {
            panic!("expected an arc");
        };
        // orthogonal to the unit circle
        assert!((center[0].hypot(center[1]).powi(2) - 1.0 - radius * radius).abs() < 1e-12);
        for e in [from, to] {
            assert!((e[0].hypot(e[1]) - 1.0).abs() < 1e-12);
            assert!(((e[0] - center[0]).hypot(e[1] - center[1]) - radius).abs() < 1e-12);
        }
        // points of the plane land on the arc
        let foot = polar_point(&[0.6, 0.8], 1.2);
        let along = orthogonal_tangent(
            &direction_to(&foot, &HPoint::origin(2)).unwrap(),
        );
        for s in [-2.0f64, 0.0, 0.5, 3.0] {
            let dir = if s < 0.0 { along.negated() } else { along.clone() };
            let x = exp_map(&foot, &dir, s.abs()).unwrap();
            let z = to_poincare(&x);
            assert!(((z[0] - center[0]).hypot(z[1] - center[1]) - radius).abs() < 1e-9);
        }
    }

    #[test]
    fn plane_through_base_point_is_a_diameter() {
        let u = UnitTangent::axis(&HPoint::origin(2), 2).unwrap();
        let g = plane_geodesic(&Hyperplane::from_offset(&u, 0.0)).unwrap();
        assert!(matches!(g, DiskGeodesic::Diameter { .. }));
    }

    #[test]
    fn empty_model_has_only_the_boundary() {
        let m = BooleanModelSample {
            d: 2,
            grains: vec![],
            window_radius: 3.0,
            observation_radius: 3.0,
            max_grain_radius: 0.5,
            conditioned: false,
        };
        let svg = svg_string(&Model::Boolean(&m), 3.0).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("<path").count(), 0);
        assert!(svg.contains(r#"viewBox="-1.05 -1.05 2.1 2.1""#));
    }

    #[test]
    fn three_dimensional_models_refused() {
        let m = HyperplaneSample {
            d: 3,
            planes: vec![],
            window_radius: 1.0,
        };
        assert!(svg_string(&Model::Hyperplanes(&m), 1.0).is_err());
    }
}
