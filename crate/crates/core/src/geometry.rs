//! 3D vectors, angles and AOI ground-truth construction.
//!
//! Vehicle axes follow the ISO convention: x points forward, y to the left
//! and z up. Angles cross the public API in degrees.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms at or below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        self.into()
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Linear interpolation, `t = 0` gives `self`.
    pub fn lerp(self, other: Vec3, t: f64) -> Vec3 {
        self + (other - self) * t
    }

    pub fn normalized(self) -> Result<Vec3> {
        normalize(self)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Head rotation in degrees.
///
/// `yaw` turns left (positive) about z, `pitch` raises the face (positive)
/// so that a head looking along `(yaw, pitch)` faces the direction with
/// that azimuth and elevation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct EulerAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl From<[f64; 3]> for EulerAngles {
    fn from(v: [f64; 3]) -> Self {
        EulerAngles {
            yaw: v[0],
            pitch: v[1],
            roll: v[2],
        }
    }
}

impl From<EulerAngles> for [f64; 3] {
    fn from(e: EulerAngles) -> Self {
        [e.yaw, e.pitch, e.roll]
    }
}

impl EulerAngles {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        EulerAngles {
            yaw: wrap_degrees(yaw),
            pitch: wrap_degrees(pitch),
            roll: wrap_degrees(roll),
        }
    }

    /// Facing direction; roll does not change it.
    pub fn direction(self) -> Vec3 {
        from_azimuth_elevation(self.yaw, self.pitch.clamp(-90.0, 90.0))
    }
}

/// Azimuth/elevation pair in degrees. Also used for angular errors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AngularError {
    pub azimuth: f64,
    pub elevation: f64,
}

impl AngularError {
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        AngularError { azimuth, elevation }
    }
}

/// Wraps an angle in degrees into `[-180, 180)`.
pub fn wrap_degrees(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can return exactly 360 - ulp rounding to 180
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

pub fn normalize(v: Vec3) -> Result<Vec3> {
    let n = v.norm();
    if !(n > ZERO_NORM) {
        return Err(Error::ZeroVector);
    }
    Ok(v / n)
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: Vec3, b: Vec3) -> Result<f64> {
    let na = a.norm();
    let nb = b.norm();
    if !(na > ZERO_NORM && nb > ZERO_NORM) {
        return Err(Error::ZeroVector);
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Angle between `a` and `b` in degrees, in `[0, 180]`.
pub fn angular_deviation(a: Vec3, b: Vec3) -> Result<f64> {
    let na = a.norm();
    let nb = b.norm();
    if !(na > ZERO_NORM && nb > ZERO_NORM) {
        return Err(Error::ZeroVector);
    }
    // atan2 of |a x b| and a.b keeps full precision near 0 and 180 degrees,
    // where arccos of the clamped cosine loses about half the digits.
    let cross = a.cross(b).norm();
    Ok(cross.atan2(a.dot(b)).to_degrees())
}

/// Azimuth `atan2(y, x)` and elevation `asin(z)` of a unit direction, in
/// degrees. Straight up or down reports azimuth 0.
pub fn to_azimuth_elevation(d: Vec3) -> AngularError {
    let z = d.z.clamp(-1.0, 1.0);
    let elevation = z.asin().to_degrees();
    let horizontal = d.x.hypot(d.y);
    let azimuth = if horizontal <= ZERO_NORM {
        0.0
    } else {
        d.y.atan2(d.x).to_degrees()
    };
    AngularError { azimuth, elevation }
}

pub fn from_azimuth_elevation(azimuth: f64, elevation: f64) -> Vec3 {
    let (saz, caz) = azimuth.to_radians().sin_cos();
    let (sel, cel) = elevation.to_radians().sin_cos();
    Vec3::new(cel * caz, cel * saz, sel)
}

/// Re-expresses a position relative to `seat_origin`. Only positions are
/// translated; directions are left alone by callers.
pub fn translate_origin(p: Vec3, seat_origin: Vec3) -> Vec3 {
    p - seat_origin
}

/// A selectable target with its unit ground-truth direction from the seat
/// origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aoi {
    pub id: u32,
    pub corner_points: Vec<Vec3>,
    pub mean_point: Vec3,
    pub ground_truth: Vec3,
}

pub fn build_aoi(id: u32, corner_points: Vec<Vec3>) -> Result<Aoi> {
    if corner_points.is_empty() {
        return Err(Error::ZeroVector);
    }
    let sum = corner_points.iter().fold(Vec3::ZERO, |acc, &p| acc + p);
    let mean_point = sum / corner_points.len() as f64;
    let ground_truth = normalize(mean_point)?;
    Ok(Aoi {
        id,
        corner_points,
        mean_point,
        ground_truth,
    })
}

/// AOIs keyed by unique id, kept sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AoiSet {
    aois: Vec<Aoi>,
}

impl AoiSet {
    pub fn new(mut aois: Vec<Aoi>) -> Result<Self> {
        aois.sort_by_key(|a| a.id);
        for pair in aois.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::DuplicateAoi(pair[0].id));
            }
        }
        Ok(AoiSet { aois })
    }

    pub fn len(&self) -> usize {
        self.aois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aois.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Aoi> {
        self.aois.iter()
    }

    pub fn get(&self, id: u32) -> Option<&Aoi> {
        self.aois
            .binary_search_by_key(&id, |a| a.id)
            .ok()
            .map(|i| &self.aois[i])
    }

    pub fn contains(&self, id: u32) -> bool {
        self.get(id).is_some()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.aois.iter().map(|a| a.id).collect()
    }

    /// Position of `id` in ascending id order; this is the class index used
    /// by classification heads.
    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.aois.binary_search_by_key(&id, |a| a.id).ok()
    }

    pub fn ground_truth(&self, id: u32) -> Result<Vec3> {
        self.get(id)
            .map(|a| a.ground_truth)
            .ok_or(Error::UnknownAoi(id))
    }

    /// Keeps only the listed ids. Unknown ids are an error.
    pub fn subset(&self, ids: &[u32]) -> Result<AoiSet> {
        let mut kept = Vec::with_capacity(ids.len());
        for &id in ids {
            kept.push(self.get(id).cloned().ok_or(Error::UnknownAoi(id))?);
        }
        AoiSet::new(kept)
    }
}

impl<'a> IntoIterator for &'a AoiSet {
    type Item = &'a Aoi;
    type IntoIter = std::slice::Iter<'a, Aoi>;
    fn into_iter(self) -> Self::IntoIter {
        self.aois.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn normalize_examples() {
        assert!(close(
            normalize(Vec3::new(3.0, 0.0, 4.0)).unwrap(),
            Vec3::new(0.6, 0.0, 0.8),
            1e-15
        ));
        assert_eq!(normalize(Vec3::Y).unwrap(), Vec3::Y);
        let inv_sqrt3 = 1.0 / 3f64.sqrt();
        let n = normalize(Vec3::new(1.0, 1.0, 1.0)).unwrap();
        assert!(close(n, Vec3::new(inv_sqrt3, inv_sqrt3, inv_sqrt3), 1e-5));
        assert!((n.x - 0.57735).abs() < 1e-5);
        assert!(matches!(normalize(Vec3::ZERO), Err(Error::ZeroVector)));
        assert!(matches!(
            normalize(Vec3::new(1e-13, 0.0, 0.0)),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(Vec3::Z, Vec3::Z).unwrap(), 1.0);
        assert_eq!(cosine_similarity(Vec3::X, Vec3::Y).unwrap(), 0.0);
        let c = cosine_similarity(Vec3::X, Vec3::new(1.0, 1.0, 0.0)).unwrap();
        assert!((c - std::f64::consts::FRAC_PI_4.cos()).abs() < 1e-12);
        assert!((c - 0.70711).abs() < 1e-5);
        assert!(cosine_similarity(Vec3::ZERO, Vec3::X).is_err());
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(angular_deviation(Vec3::X, Vec3::X).unwrap(), 0.0);
        assert!((angular_deviation(Vec3::X, Vec3::Y).unwrap() - 90.0).abs() < 1e-12);
        let d = angular_deviation(Vec3::X, Vec3::new(1.0, 0.0, 1.0)).unwrap();
        assert!((d - (1.0 / 2f64.sqrt()).acos().to_degrees()).abs() < 1e-9);
        assert!((angular_deviation(Vec3::X, -Vec3::X).unwrap() - 180.0).abs() < 1e-12);
    }

    #[test]
    fn azimuth_elevation_examples() {
        let f = to_azimuth_elevation(Vec3::X);
        assert_eq!((f.azimuth, f.elevation), (0.0, 0.0));
        let up = to_azimuth_elevation(Vec3::Z);
        assert_eq!(up.azimuth, 0.0);
        assert!((up.elevation - 90.0).abs() < 1e-12);
        let d = to_azimuth_elevation(Vec3::new(0.70711, 0.70711, 0.0));
        assert!((d.azimuth - 45.0).abs() < 1e-6);
        assert!(d.elevation.abs() < 1e-6);

        assert!(close(from_azimuth_elevation(0.0, 0.0), Vec3::X, 1e-15));
        assert!(close(from_azimuth_elevation(90.0, 0.0), Vec3::Y, 1e-15));
        let back = to_azimuth_elevation(from_azimuth_elevation(30.0, 20.0));
        assert!((back.azimuth - 30.0).abs() < 1e-9);
        assert!((back.elevation - 20.0).abs() < 1e-9);
    }

    #[test]
    fn translate_examples() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(translate_origin(p, Vec3::ZERO), p);
        assert_eq!(translate_origin(p, p), Vec3::ZERO);
        let t = translate_origin(Vec3::new(2.0, -0.4, 1.1), Vec3::new(1.2, -0.4, 0.3));
        assert!(close(t, Vec3::new(0.8, 0.0, 0.8), 1e-12));
    }

    #[test]
    fn build_aoi_examples() {
        let a = build_aoi(1, vec![Vec3::X]).unwrap();
        assert_eq!(a.ground_truth, Vec3::X);
        let b = build_aoi(2, vec![Vec3::new(1.0, 1.0, 0.0), Vec3::new(1.0, -1.0, 0.0)]).unwrap();
        assert_eq!(b.mean_point, Vec3::X);
        assert_eq!(b.ground_truth, Vec3::X);
        let c = build_aoi(
            3,
            vec![
                Vec3::new(2.0, 0.0, 0.0),
                Vec3::new(0.0, 2.0, 0.0),
                Vec3::new(0.0, 0.0, 2.0),
            ],
        )
        .unwrap();
        let third = 2.0 / 3.0;
        assert!(close(c.mean_point, Vec3::new(third, third, third), 1e-15));
        assert!((c.ground_truth.x - 0.57735).abs() < 1e-5);
        assert!(matches!(
            build_aoi(4, vec![Vec3::X, -Vec3::X]),
            Err(Error::ZeroVector)
        ));
        assert!(build_aoi(5, vec![]).is_err());
    }

    #[test]
    fn aoi_set_rejects_duplicates() {
        let a = build_aoi(1, vec![Vec3::X]).unwrap();
        assert!(matches!(
            AoiSet::new(vec![a.clone(), a]),
            Err(Error::DuplicateAoi(1))
        ));
    }

    #[test]
    fn wrap_edges() {
        assert_eq!(wrap_degrees(180.0), -180.0);
        assert_eq!(wrap_degrees(-180.0), -180.0);
        assert_eq!(wrap_degrees(359.0), -1.0);
        assert_eq!(wrap_degrees(-190.0), 170.0);
    }

    fn unit() -> impl Strategy<Value = Vec3> {
        (-180.0..180.0f64, -89.0..89.0f64).prop_map(|(a, e)| from_azimuth_elevation(a, e))
    }

    fn nonzero() -> impl Strategy<Value = Vec3> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z))
            .prop_filter("non-zero", |v| v.norm() > 1e-3)
    }

    proptest! {
        #[test]
        fn deviation_symmetric_nonnegative(a in nonzero(), b in nonzero()) {
            let ab = angular_deviation(a, b).unwrap();
            let ba = angular_deviation(b, a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(angular_deviation(a, a * 2.5).unwrap() < 1e-9);
        }

        #[test]
        fn cosine_scale_invariant(a in nonzero(), b in nonzero(), s in 0.01..100.0f64, t in 0.01..100.0f64) {
            let c0 = cosine_similarity(a, b).unwrap();
            let c1 = cosine_similarity(a * s, b * t).unwrap();
            prop_assert!((c0 - c1).abs() < 1e-12);
        }

        #[test]
        fn spherical_triangle_inequality(a in unit(), b in unit(), c in unit()) {
            let ab = angular_deviation(a, b).unwrap();
            let ac = angular_deviation(a, c).unwrap();
            let cb = angular_deviation(c, b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-9);
        }

        #[test]
        fn azimuth_elevation_round_trip(az in -179.9..179.9f64, el in -89.9..89.9f64) {
            let back = to_azimuth_elevation(from_azimuth_elevation(az, el));
            prop_assert!((back.azimuth - az).abs() < 1e-9);
            prop_assert!((back.elevation - el).abs() < 1e-9);
        }

        #[test]
        fn aoi_scale_invariant(pts in proptest::collection::vec(nonzero(), 1..6), s in 0.1..10.0f64) {
            if let Ok(a) = build_aoi(1, pts.clone()) {
                let b = build_aoi(1, pts.iter().map(|&p| p * s).collect()).unwrap();
                prop_assert!((a.ground_truth - b.ground_truth).norm() < 1e-9);
                prop_assert!((a.ground_truth.norm() - 1.0).abs() < 1e-9);
            }
        }
    }
}
