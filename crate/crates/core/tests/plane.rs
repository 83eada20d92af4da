use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;
use rand::Rng;
use rotip_core::geometry::{angle_error, UnitVector3};
use rotip_core::plane::{fit_plane_lsq, ransac_plane_toward, ContactPointCloud, PointFrame, RansacParams};
use rotip_core::rng::seeded;

fn unit() -> impl Strategy<Value = UnitVector3> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("non-zero", |(x, y, z)| x * x + y * y + z * z > 1e-2)
        .prop_map(|(x, y, z)| UnitVector3::from_xyz(x, y, z).unwrap())
}

/// Points on the plane `n . p = d` spread over a 10 mm patch.
fn plane_points(n: &UnitVector3, d: f64, count: usize, seed: u64) -> Vec<Vector3<f64>> {
    let nv = *n.as_vector();
    let a = if nv.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = nv.cross(&a).normalize();
    let e2 = nv.cross(&e1);
    let mut rng = seeded(seed);
    (0..count).map(|_| nv * d + e1 * rng.random_range(-5.0..5.0) + e2 * rng.random_range(-5.0..5.0)).collect()
}

proptest! {
    #[test]
    fn exact_clouds_fit_exactly(n in unit(), d in -20.0f64..20.0, seed in any::<u64>()) {
        let (fit_n, fit_d) = fit_plane_lsq(&plane_points(&n, d, 50, seed)).unwrap();
        let (fit_n, fit_d) = if fit_n.dot(&n) < 0.0 { (UnitVector3::new(-fit_n.as_vector()).unwrap(), -fit_d) } else { (fit_n, fit_d) };
        prop_assert!(angle_error(&fit_n, &n) < 1e-6);
        prop_assert!((fit_d - d).abs() < 1e-9);
    }

    #[test]
    fn fitted_normal_rotates_with_the_cloud(n in unit(), axis in unit(), angle in -3.0f64..3.0, seed in any::<u64>()) {
        let pts = plane_points(&n, 5.0, 40, seed);
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis.as_vector()), angle);
        let rotated: Vec<_> = pts.iter().map(|p| rot * p).collect();
        let (n0, _) = fit_plane_lsq(&pts).unwrap();
        let (n1, _) = fit_plane_lsq(&rotated).unwrap();
        let expected = UnitVector3::new(rot * n0.as_vector()).unwrap();
        prop_assert!(angle_error(&n1, &expected).min(180.0 - angle_error(&n1, &expected)) < 1e-6);
    }
}

#[test]
fn ransac_beats_least_squares_under_gross_outliers() {
    let params = RansacParams::default();
    let mut wins = 0;
    let trials = 200;
    for seed in 0..trials {
        let mut rng = seeded(1000 + seed);
        let n = UnitVector3::from_xyz(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), -1.0).unwrap();
        let mut pts = plane_points(&n, -12.0, 70, seed);
        for _ in 0..30 {
            let base = plane_points(&n, -12.0, 1, rng.random())[0];
            let off = rng.random_range(10.0 * params.tol..10.0 * params.tol + 5.0);
            pts.push(base + n.as_vector() * off * if rng.random::<bool>() { 1.0 } else { -1.0 });
        }
        let cloud = ContactPointCloud::new(pts.clone(), PointFrame::Sensor);
        let r = ransac_plane_toward(&cloud, &params, seed, &Vector3::zeros()).unwrap();
        let (l, _) = fit_plane_lsq(&pts).unwrap();
        let err = |m: &UnitVector3| {
            let e = angle_error(m, &n);
            e.min(180.0 - e)
        };
        wins += usize::from(err(&r.normal) < err(&l));
    }
    assert!(wins as f64 >= 0.95 * trials as f64, "{wins}/{trials}");
}
