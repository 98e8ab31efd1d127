use crate::error::{Error, Result, Side};
use crate::geometry::{normalize, translate_origin, wrap_degrees, EulerAngles, Vec3};

use super::{Frame, Modality, Sample, HALF_WINDOW, WINDOW_FRAMES};

fn check_order(frames: &[Frame]) -> Result<()> {
    for (i, w) in frames.windows(2).enumerate() {
        if !(w[1].timestamp > w[0].timestamp) {
            return Err(Error::UnorderedTimestamps(i + 1));
        }
    }
    Ok(())
}

fn lerp_dir(a: Vec3, b: Vec3, t: f64) -> Vec3 {
    // opposite directions can cancel; fall back to the nearer endpoint
    normalize(a.lerp(b, t)).unwrap_or(if t < 0.5 { a } else { b })
}

/// Per-component interpolation along the shorter arc.
fn lerp_angles(a: EulerAngles, b: EulerAngles, t: f64) -> EulerAngles {
    let arc = |x: f64, y: f64| wrap_degrees(x + wrap_degrees(y - x) * t);
    EulerAngles {
        yaw: arc(a.yaw, b.yaw),
        pitch: arc(a.pitch, b.pitch),
        roll: arc(a.roll, b.roll),
    }
}

fn fill(target: &mut Frame, m: Modality, prev: Option<&Frame>, next: Option<&Frame>) {
    let (a, b, t) = match (prev, next) {
        (Some(p), Some(n)) => (
            p,
            n,
            (target.timestamp - p.timestamp) / (n.timestamp - p.timestamp),
        ),
        (Some(p), None) => (p, p, 0.0),
        (None, Some(n)) => (n, n, 0.0),
        (None, None) => unreachable!("caller checks for a valid frame"),
    };
    match m {
        Modality::Eye => {
            target.eye_pos = a.eye_pos.lerp(b.eye_pos, t);
            target.eye_dir = lerp_dir(a.eye_dir, b.eye_dir, t);
            target.valid_eye = true;
        }
        Modality::Head => {
            target.head_pos = a.head_pos.lerp(b.head_pos, t);
            target.head_rot = lerp_angles(a.head_rot, b.head_rot, t);
            target.valid_head = true;
        }
        Modality::Finger => {
            target.finger_pos = a.finger_pos.lerp(b.finger_pos, t);
            target.finger_dir = lerp_dir(a.finger_dir, b.finger_dir, t);
            target.valid_finger = true;
        }
    }
}

/// Fills every invalid modality reading by linear interpolation in time
/// between the nearest valid frames on either side. Gaps at the start or
/// end hold the nearest valid value. Filled directions are re-normalized.
pub fn interpolate_missing(frames: &[Frame]) -> Result<Vec<Frame>> {
    check_order(frames)?;
    let mut out = frames.to_vec();
    for m in Modality::ALL {
        let valid: Vec<usize> = (0..frames.len())
            .filter(|&i| frames[i].is_valid(m))
            .collect();
        if valid.is_empty() {
            if frames.is_empty() {
                continue;
            }
            return Err(Error::AllMissing(m));
        }
        if valid.len() == frames.len() {
            continue;
        }
        // `k` is the number of valid frames strictly before `i`
        let mut k = 0;
        for i in 0..frames.len() {
            if k < valid.len() && valid[k] == i {
                k += 1;
                continue;
            }
            let prev = k.checked_sub(1).map(|j| &frames[valid[j]]);
            let next = valid.get(k).map(|&j| &frames[j]);
            fill(&mut out[i], m, prev, next);
        }
    }
    Ok(out)
}

/// The four frames at or before `trigger_time` and the four after, in time
/// order. A frame exactly at the trigger counts as before.
pub fn extract_window(recording: &[Frame], trigger_time: f64) -> Result<Vec<Frame>> {
    check_order(recording)?;
    let split = recording.partition_point(|f| f.timestamp <= trigger_time);
    if split < HALF_WINDOW {
        return Err(Error::InsufficientFrames {
            side: Side::Before,
            found: split,
        });
    }
    let after = recording.len() - split;
    if after < HALF_WINDOW {
        return Err(Error::InsufficientFrames {
            side: Side::After,
            found: after,
        });
    }
    Ok(recording[split - HALF_WINDOW..split + HALF_WINDOW].to_vec())
}

fn normalize_and_translate(frame: &mut Frame, seat_origin: Vec3) -> Result<()> {
    frame.eye_dir = normalize(frame.eye_dir)?;
    frame.finger_dir = normalize(frame.finger_dir)?;
    frame.eye_pos = translate_origin(frame.eye_pos, seat_origin);
    frame.head_pos = translate_origin(frame.head_pos, seat_origin);
    frame.finger_pos = translate_origin(frame.finger_pos, seat_origin);
    Ok(())
}

/// Full preprocessing of a raw recording: interpolation of missing
/// readings, unit directions, translation into the seat frame, and the
/// 8-frame window around the trigger.
pub fn preprocess(recording: &[Frame], trigger_time: f64, seat_origin: Vec3) -> Result<Vec<Frame>> {
    let mut frames = interpolate_missing(recording)?;
    for f in &mut frames {
        normalize_and_translate(f, seat_origin)?;
    }
    extract_window(&frames, trigger_time)
}

/// Preprocesses a stored sample, whose frames already form the window.
pub fn preprocess_sample(sample: &Sample, seat_origin: Vec3) -> Result<Sample> {
    debug_assert_eq!(sample.frames.len(), WINDOW_FRAMES);
    let frames = preprocess(&sample.frames, sample.trigger_time, seat_origin)?;
    Ok(Sample {
        frames,
        ..sample.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(t: f64) -> Frame {
        Frame {
            timestamp: t,
            eye_pos: Vec3::new(0.1, 0.0, 0.6),
            eye_dir: Vec3::X,
            head_pos: Vec3::new(0.0, 0.0, 0.65),
            head_rot: EulerAngles::new(0.0, 0.0, 0.0),
            finger_pos: Vec3::new(0.4, -0.2, 0.3),
            finger_dir: Vec3::X,
            valid_eye: true,
            valid_head: true,
            valid_finger: true,
        }
    }

    fn recording(n: usize, fps: f64) -> Vec<Frame> {
        (0..n).map(|i| frame(i as f64 / fps)).collect()
    }

    #[test]
    fn midpoint_interpolation() {
        let mut r = recording(3, 1.0);
        r[0].eye_pos = Vec3::ZERO;
        r[2].eye_pos = Vec3::new(4.0, 0.0, 0.0);
        r[1].invalidate(Modality::Eye);
        let out = interpolate_missing(&r).unwrap();
        assert_eq!(out[1].eye_pos, Vec3::new(2.0, 0.0, 0.0));
        assert!(out[1].valid_eye);
    }

    #[test]
    fn no_gaps_is_identity() {
        let r = recording(10, 45.0);
        assert_eq!(interpolate_missing(&r).unwrap(), r);
    }

    #[test]
    fn direction_interpolation_renormalizes() {
        let mut r = vec![frame(0.0), frame(0.5), frame(1.0)];
        r[0].eye_dir = Vec3::X;
        r[2].eye_dir = Vec3::Y;
        r[1].invalidate(Modality::Eye);
        let out = interpolate_missing(&r).unwrap();
        let h = 0.5f64.sqrt();
        assert!((out[1].eye_dir - Vec3::new(h, h, 0.0)).norm() < 1e-5);
        assert!((out[1].eye_dir.x - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn edge_gaps_hold_nearest_value() {
        let mut r = recording(5, 1.0);
        r[2].finger_pos = Vec3::new(9.0, 9.0, 9.0);
        for i in [0, 1, 3, 4] {
            r[i].invalidate(Modality::Finger);
        }
        let out = interpolate_missing(&r).unwrap();
        assert!(out.iter().all(|f| f.finger_pos == Vec3::new(9.0, 9.0, 9.0)));
    }

    #[test]
    fn all_missing_is_an_error() {
        let mut r = recording(4, 1.0);
        r.iter_mut().for_each(|f| f.invalidate(Modality::Head));
        assert!(matches!(
            interpolate_missing(&r),
            Err(Error::AllMissing(Modality::Head))
        ));
    }

    #[test]
    fn head_rotation_wraps_shortest_arc() {
        let mut r = recording(3, 1.0);
        r[0].head_rot = EulerAngles::new(170.0, 0.0, 0.0);
        r[2].head_rot = EulerAngles::new(-170.0, 0.0, 0.0);
        r[1].invalidate(Modality::Head);
        let out = interpolate_missing(&r).unwrap();
        assert!((out[1].head_rot.yaw.abs() - 180.0).abs() < 1e-9);
    }

    #[test]
    fn window_at_45_fps() {
        let r = recording(45, 45.0);
        let w = extract_window(&r, 0.5).unwrap();
        assert_eq!(w.len(), 8);
        let span = w[7].timestamp - w[0].timestamp;
        assert!((span - 7.0 / 45.0).abs() < 1e-12);
        assert!(span > 0.15 && span <= 0.2);
        assert!(w[3].timestamp <= 0.5 && w[4].timestamp > 0.5);
    }

    #[test]
    fn window_boundaries() {
        let r = recording(20, 10.0);
        assert!(matches!(
            extract_window(&r, 0.25),
            Err(Error::InsufficientFrames {
                side: Side::Before,
                found: 3
            })
        ));
        assert!(matches!(
            extract_window(&r, 1.65),
            Err(Error::InsufficientFrames {
                side: Side::After,
                found: 3
            })
        ));
        // a frame exactly at the trigger is index 3
        let w = extract_window(&r, r[6].timestamp).unwrap();
        assert_eq!(w[3].timestamp, r[6].timestamp);
    }

    #[test]
    fn preprocess_fully_valid() {
        let r = recording(12, 45.0);
        let out = preprocess(&r, r[5].timestamp, Vec3::ZERO).unwrap();
        assert_eq!(out.len(), 8);
        assert_eq!(out[0].eye_pos, r[2].eye_pos);
        assert!(out.iter().all(|f| (f.eye_dir.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn preprocess_fills_gap_in_window() {
        let mut r = recording(12, 45.0);
        for (i, f) in r.iter_mut().enumerate() {
            f.eye_pos = Vec3::new(i as f64 * 0.01, 0.0, 0.6);
        }
        r[6].invalidate(Modality::Eye);
        let out = preprocess(&r, r[5].timestamp, Vec3::ZERO).unwrap();
        // window starts at recording index 2
        assert!(out[4].valid_eye);
        assert!((out[4].eye_pos - Vec3::new(0.06, 0.0, 0.6)).norm() < 1e-12);
    }

    #[test]
    fn preprocess_centers_head_positions() {
        let mut r = recording(8, 45.0);
        for (i, f) in r.iter_mut().enumerate() {
            f.head_pos = Vec3::new(1.0 + i as f64 * 0.1, -0.3, 0.9 - i as f64 * 0.05);
        }
        let mean = r.iter().fold(Vec3::ZERO, |a, f| a + f.head_pos) / 8.0;
        let out = preprocess(&r, r[3].timestamp, mean).unwrap();
        let centred = out.iter().fold(Vec3::ZERO, |a, f| a + f.head_pos) / 8.0;
        assert!(centred.norm() < 1e-12);
    }

    fn masked_affine() -> impl Strategy<Value = (Vec<Frame>, Vec<Frame>)> {
        (
            proptest::array::uniform3(-1.0..1.0f64),
            proptest::array::uniform3(-1.0..1.0f64),
            proptest::collection::vec(any::<bool>(), 10),
            0.01..0.05f64,
        )
            .prop_map(|(p0, v, mask, dt)| {
                let p0 = Vec3::from(p0);
                let v = Vec3::from(v);
                let truth: Vec<Frame> = (0..10)
                    .map(|i| {
                        let t = i as f64 * dt;
                        let mut f = frame(t);
                        f.eye_pos = p0 + v * t;
                        f.head_pos = p0 - v * t;
                        f.finger_pos = v * (2.0 * t) + p0;
                        f.head_rot = EulerAngles::new(10.0 + 40.0 * t, -5.0 + 20.0 * t, 2.0 * t);
                        f
                    })
                    .collect();
                let mut masked = truth.clone();
                // keep the endpoints so every gap is interior
                for i in 1..9 {
                    if mask[i] {
                        for m in Modality::ALL {
                            masked[i].invalidate(m);
                        }
                    }
                }
                (truth, masked)
            })
    }

    proptest! {
        #[test]
        fn interpolation_is_idempotent((_, masked) in masked_affine()) {
            let once = interpolate_missing(&masked).unwrap();
            let twice = interpolate_missing(&once).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn affine_signals_reconstructed((truth, masked) in masked_affine()) {
            let out = interpolate_missing(&masked).unwrap();
            for (a, b) in out.iter().zip(&truth) {
                prop_assert!((a.eye_pos - b.eye_pos).norm() <= 1e-9);
                prop_assert!((a.head_pos - b.head_pos).norm() <= 1e-9);
                prop_assert!((a.finger_pos - b.finger_pos).norm() <= 1e-9);
                prop_assert!((a.head_rot.yaw - b.head_rot.yaw).abs() <= 1e-9);
                prop_assert!((a.head_rot.pitch - b.head_rot.pitch).abs() <= 1e-9);
                prop_assert!((a.eye_dir - b.eye_dir).norm() <= 1e-9);
            }
        }

        #[test]
        fn preprocess_commutes_with_time_shift((_, masked) in masked_affine(), shift in -100.0..100.0f64) {
            let trigger = masked[4].timestamp + 1e-4;
            let base = preprocess(&masked, trigger, Vec3::new(0.1, 0.2, 0.3)).unwrap();
            let shifted_rec: Vec<Frame> = masked
                .iter()
                .map(|f| Frame { timestamp: f.timestamp + shift, ..*f })
                .collect();
            let shifted = preprocess(&shifted_rec, trigger + shift, Vec3::new(0.1, 0.2, 0.3)).unwrap();
            prop_assert_eq!(base.len(), shifted.len());
            for (a, b) in base.iter().zip(&shifted) {
                prop_assert!((a.timestamp + shift - b.timestamp).abs() < 1e-9);
                prop_assert!((a.eye_pos - b.eye_pos).norm() < 1e-9);
                prop_assert!((a.finger_pos - b.finger_pos).norm() < 1e-9);
                prop_assert!((a.head_rot.yaw - b.head_rot.yaw).abs() < 1e-9);
            }
        }

        #[test]
        fn window_in_time_order(n in 8usize..40, k in 4usize..36) {
            prop_assume!(k + 4 <= n);
            let r = recording(n, 45.0);
            let w = extract_window(&r, r[k - 1].timestamp).unwrap();
            prop_assert!(w.windows(2).all(|p| p[0].timestamp < p[1].timestamp));
        }
    }
}
