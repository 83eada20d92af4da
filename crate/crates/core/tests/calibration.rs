use rotip_core::calibration::{synthesize_set, z_objective, CalibrationParams, CaptureParams};
use rotip_core::oracle::MaskNoiseParams;
use rotip_core::sensor::{CameraIntrinsics, SensorGeometry};

#[test]
fn z_objective_is_lowest_at_the_true_offset() {
    let k = CameraIntrinsics::default();
    let params = CalibrationParams::default();
    for (i, (ox, oy, oz)) in [(0.0, 0.0, 10.0), (1.0, -0.5, 11.2), (-1.5, 0.8, 8.6)].into_iter().enumerate() {
        let truth = SensorGeometry::new(8.0, ox, oy, oz).unwrap();
        let set = synthesize_set(&k, &truth, &CaptureParams::default(), &MaskNoiseParams::NONE, i as u64);
        let at_truth = z_objective(&set, &k, &truth, &params);
        for step in [-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0] {
            let probe = SensorGeometry { oz: oz + step, ..truth };
            let v = z_objective(&set, &k, &probe, &params);
            assert!(at_truth <= v, "truth {at_truth} vs {v} at oz {}", oz + step);
        }
    }
}
