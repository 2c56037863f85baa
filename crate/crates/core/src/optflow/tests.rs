use super::*;
use crate::synth::smooth_noise;

fn shifted(base: &RasterU8, dx: isize, dy: isize) -> RasterU8 {
    // frame_b(x, y) = frame_a(x - dx, y - dy): content moves by (dx, dy)
    let (w, h) = (base.width() as isize, base.height() as isize);
    RasterU8::from_fn(base.width(), base.height(), 1, |x, y, _| {
        let sx = (x as isize - dx).clamp(0, w - 1);
        let sy = (y as isize - dy).clamp(0, h - 1);
        base.get(sx as usize, sy as usize, 0)
    })
    .unwrap()
}

fn texture(seed: u64) -> RasterU8 {
    smooth_noise(64, 64, seed, 2).to_gray()
}

#[test]
fn identical_frames_give_zero_flow() {
    let a = texture(1);
    let f = dense_flow(&a, &a, &FlowParams::default()).unwrap();
    let m = flow_magnitude(&f);
    assert!(m.data().iter().all(|&v| v < 0.1));
    assert_eq!(f.median(), (0.0, 0.0));
}

#[test]
fn recovers_global_translations() {
    for (k, &(dx, dy)) in [(5, 0), (-3, 2), (-5, -3), (3, -5), (0, 0)].iter().enumerate() {
        let a = texture(10 + k as u64);
        let b = shifted(&a, dx, dy);
        let f = dense_flow(&a, &b, &FlowParams::default()).unwrap();
        let (mu, mv) = f.median();
        assert!((mu - dx as f64).abs() < 0.5 && (mv - dy as f64).abs() < 0.5, "({dx},{dy}) -> ({mu},{mv})");
    }
}

#[test]
fn swap_symmetry() {
    let a = texture(33);
    let b = shifted(&a, 4, -2);
    let p = FlowParams::default();
    let (fu, fv) = dense_flow(&a, &b, &p).unwrap().median();
    let (bu, bv) = dense_flow(&b, &a, &p).unwrap().median();
    assert!((fu + bu).abs() < 1.0 && (fv + bv).abs() < 1.0);
}

#[test]
fn constant_frames_stay_finite() {
    let a = RasterU8::filled(20, 17, 1, 0).unwrap();
    let b = RasterU8::filled(20, 17, 1, 255).unwrap();
    let f = dense_flow(&a, &b, &FlowParams::default()).unwrap();
    assert!(f.u().iter().chain(f.v()).all(|v| v.is_finite()));
    assert!(flow_magnitude(&f).data().iter().all(|&v| v == 0.0));
}

#[test]
fn brightness_change_is_tolerated() {
    let a = texture(5);
    let b = shifted(&a, 2, 1);
    let b = RasterU8::from_fn(64, 64, 1, |x, y, _| (b.get(x, y, 0) as f64 * 0.9 + 12.0) as u8).unwrap();
    let (mu, mv) = dense_flow(&a, &b, &FlowParams::default()).unwrap().median();
    assert!((mu - 2.0).abs() < 0.5 && (mv - 1.0).abs() < 0.5);
}

#[test]
fn mismatched_frames_error() {
    let a = RasterU8::filled(8, 8, 1, 0).unwrap();
    let b = RasterU8::filled(8, 9, 1, 0).unwrap();
    assert!(matches!(dense_flow(&a, &b, &FlowParams::default()), Err(Error::DimensionMismatch(_))));
}

#[test]
fn magnitude_values() {
    let zero = FlowField::constant(4, 3, 0.0, 0.0).unwrap();
    assert!(flow_magnitude(&zero).data().iter().all(|&v| v == 0.0));
    let c = FlowField::constant(4, 3, 3.0, 4.0).unwrap();
    assert!(flow_magnitude(&c).data().iter().all(|&v| v == 5.0));
    let u: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
    let v: Vec<f64> = (0..12).map(|i| (i as f64 * 1.1).cos() * 2.0).collect();
    let f = FlowField::new(4, 3, u.clone(), v.clone()).unwrap();
    let m = flow_magnitude(&f);
    for i in 0..12 {
        assert!((m.data()[i] - u[i].hypot(v[i])).abs() < 1e-12);
    }
}

#[test]
fn dominant_direction_cases() {
    let c = FlowField::constant(5, 5, 1.0, 0.0).unwrap();
    let (a, frac) = dominant_direction(&c, 0.5, 8).unwrap();
    assert_eq!((a, frac), (0.0, 1.0));

    let z = FlowField::constant(5, 5, 0.0, 0.0).unwrap();
    assert_eq!(dominant_direction(&z, 0.5, 8).unwrap().1, 0.0);

    // half (1,0) -> bin 0, half (0,1) -> bin 2; tie resolves to bin 0
    let u: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { 0.0 }).collect();
    let v: Vec<f64> = (0..10).map(|i| if i < 5 { 0.0 } else { 1.0 }).collect();
    let f = FlowField::new(10, 1, u, v).unwrap();
    let (a, frac) = dominant_direction(&f, 0.5, 8).unwrap();
    assert_eq!((a, frac), (0.0, 0.5));

    let left = FlowField::constant(3, 3, -2.0, 0.0).unwrap();
    let (a, _) = dominant_direction(&left, 0.5, 8).unwrap();
    assert!((a - PI).abs() < 1e-12);
    assert!(dominant_direction(&c, 0.5, 3).is_err());
}

#[test]
fn angle_bins_are_centered_on_zero() {
    assert_eq!(angle_bin(0.0, 8), 0);
    assert_eq!(angle_bin(-0.3, 8), 0);
    assert_eq!(angle_bin(0.3, 8), 0);
    assert_eq!(angle_bin(PI / 2.0, 8), 2);
    assert_eq!(angle_bin(-PI / 2.0, 8), 6);
    assert_eq!(angle_bin(PI, 8), 4);
}

#[test]
fn dump_round_trip_within_quantization() {
    let dir = tempfile::tempdir().unwrap();
    let u: Vec<f64> = (0..30).map(|i| i as f64 * 0.25 - 3.0).collect();
    let v: Vec<f64> = (0..30).map(|i| (i % 7) as f64 * -0.5).collect();
    let f = FlowField::new(6, 5, u, v).unwrap();
    let [qu, qv] = save_flow_dump(&f, dir.path(), "pair_00000").unwrap();
    let back = load_flow_dump(dir.path(), "pair_00000").unwrap();
    for i in 0..30 {
        assert!((back.u()[i] - f.u()[i]).abs() <= qu.scale / 2.0 + 1e-9);
        assert!((back.v()[i] - f.v()[i]).abs() <= qv.scale / 2.0 + 1e-9);
    }
}
