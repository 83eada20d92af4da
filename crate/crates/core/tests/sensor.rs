use proptest::prelude::*;
use rotip_core::sensor::{
    pixel_to_ray, project_point, ray_surface_intersect, CameraIntrinsics, SensorGeometry, SurfaceRegion,
};

fn pixel() -> impl Strategy<Value = (f64, f64)> {
    (0.0f64..=639.0, 0.0f64..=479.0)
}

fn geometry() -> impl Strategy<Value = SensorGeometry> {
    (6.0f64..10.0, -1.0f64..1.0, -1.0f64..1.0, 8.0f64..14.0)
        .prop_map(|(r, ox, oy, oz)| SensorGeometry::new(r, ox, oy, oz).unwrap())
}

proptest! {
    #[test]
    fn pixel_ray_surface_projection_round_trip((u, v) in pixel(), g in geometry()) {
        let k = CameraIntrinsics::default();
        let ray = pixel_to_ray(u, v, &k).unwrap();
        if let Ok(p) = ray_surface_intersect(&ray, &g) {
            let (pu, pv) = project_point(&p.position, &k).unwrap();
            prop_assert!((pu - u).abs() < 1e-6 && (pv - v).abs() < 1e-6);
        }
    }

    #[test]
    fn hit_lies_on_its_tagged_branch((u, v) in pixel(), g in geometry()) {
        let k = CameraIntrinsics::default();
        let ray = pixel_to_ray(u, v, &k).unwrap();
        if let Ok(p) = ray_surface_intersect(&ray, &g) {
            let q = p.position;
            let radial = ((q.x - g.ox).powi(2) + (q.y - g.oy).powi(2)).sqrt();
            let spherical = (q - g.center()).norm();
            match p.region {
                SurfaceRegion::Hemisphere => {
                    prop_assert!(q.z > g.oz);
                    prop_assert!((spherical - g.r).abs() < 1e-9);
                }
                SurfaceRegion::Cylinder => {
                    prop_assert!(q.z <= g.oz + 1e-12);
                    prop_assert!((radial - g.r).abs() < 1e-9);
                }
            }
            prop_assert!(g.surface_residual(&q).abs() < 1e-9);
        }
    }

    #[test]
    fn hit_depth_falls_with_polar_angle(az in 0.0f64..std::f64::consts::TAU, a in 0.0f64..0.5, b in 0.0f64..0.5) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let k = CameraIntrinsics::default();
        let g = SensorGeometry::default();
        let hit = |t: f64| {
            let (u, v) = (k.cx + k.fx * t.tan() * az.cos(), k.cy + k.fy * t.tan() * az.sin());
            if !k.in_bounds(u, v) {
                return None;
            }
            ray_surface_intersect(&pixel_to_ray(u, v, &k).unwrap(), &g).ok().map(|p| p.position.z)
        };
        if let (Some(z_lo), Some(z_hi)) = (hit(lo), hit(hi)) {
            prop_assert!(z_hi <= z_lo + 1e-9, "z({hi}) = {z_hi} > z({lo}) = {z_lo}");
        }
    }
}
