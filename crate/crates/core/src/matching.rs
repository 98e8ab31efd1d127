//! Mapping a predicted direction to the AOI it points at.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cosine_similarity, AoiSet, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub aoi_id: u32,
    /// Cosine similarity to the chosen AOI's ground truth.
    pub score: f64,
    /// `arccos(score)` in degrees.
    pub deviation: f64,
    /// Every AOI with its score, best first; equal scores in ascending id.
    pub ranked: Vec<(u32, f64)>,
}

/// Picks the AOI whose ground-truth direction has the highest cosine
/// similarity with `pred`. Ties go to the lowest id.
pub fn match_aoi(pred: Vec3, aois: &AoiSet) -> Result<MatchResult> {
    if aois.is_empty() {
        return Err(Error::EmptyAoiSet);
    }
    let mut ranked = aois
        .iter()
        .map(|a| Ok((a.id, cosine_similarity(pred, a.ground_truth)?)))
        .collect::<Result<Vec<_>>>()?;
    // The set iterates in ascending id, and the sort is stable.
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (aoi_id, score) = ranked[0];
    Ok(MatchResult {
        aoi_id,
        score,
        deviation: score.acos().to_degrees(),
        ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{angular_deviation, build_aoi, from_azimuth_elevation};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(dirs: &[(u32, Vec3)]) -> AoiSet {
        AoiSet::new(
            dirs.iter()
                .map(|&(id, d)| build_aoi(id, vec![d]).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
        from_azimuth_elevation(
            rng.random_range(-180.0..180.0),
            rng.random::<f64>().mul_add(2.0, -1.0).asin().to_degrees(),
        )
    }

    fn twelve(rng: &mut ChaCha8Rng) -> AoiSet {
        set(&(1..=12)
            .map(|id| (id, random_unit(rng)))
            .collect::<Vec<_>>())
    }

    #[test]
    fn exact_hit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let aois = twelve(&mut rng);
        let gt = aois.ground_truth(7).unwrap();
        let m = match_aoi(gt, &aois).unwrap();
        assert_eq!(m.aoi_id, 7);
        assert!((m.score - 1.0).abs() < 1e-12);
        assert_eq!(m.ranked.len(), 12);
    }

    #[test]
    fn symmetric_tie_goes_to_lower_id() {
        let a = Vec3::new(1.0, 1.0, 0.0);
        let b = Vec3::new(1.0, -1.0, 0.0);
        let aois = set(&[(9, a), (4, b)]);
        let m = match_aoi(Vec3::X, &aois).unwrap();
        assert_eq!(m.aoi_id, 4);
        assert_eq!(m.ranked[0].1, m.ranked[1].1);
        assert_eq!(m.ranked[1].0, 9);
    }

    #[test]
    fn errors() {
        let aois = set(&[(1, Vec3::X)]);
        assert!(matches!(
            match_aoi(Vec3::ZERO, &aois),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            match_aoi(Vec3::X, &AoiSet::default()),
            Err(Error::EmptyAoiSet)
        ));
    }

    #[test]
    fn agrees_with_minimum_angle_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let aois = twelve(&mut rng);
            let pred = random_unit(&mut rng) * rng.random_range(0.1..10.0);
            let mut best = (u32::MAX, f64::INFINITY);
            for a in &aois {
                let d = angular_deviation(pred, a.ground_truth).unwrap();
                if d < best.1 || (d == best.1 && a.id < best.0) {
                    best = (a.id, d);
                }
            }
            assert_eq!(match_aoi(pred, &aois).unwrap().aoi_id, best.0);
        }
    }

    proptest! {
        #[test]
        fn scale_invariant(seed in 0u64..1000, c in 1e-3f64..1e3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let aois = twelve(&mut rng);
            let p = random_unit(&mut rng);
            prop_assert_eq!(match_aoi(p, &aois).unwrap().aoi_id, match_aoi(p * c, &aois).unwrap().aoi_id);
        }

        #[test]
        fn ranking_sorted_and_consistent(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let aois = twelve(&mut rng);
            let m = match_aoi(random_unit(&mut rng), &aois).unwrap();
            prop_assert_eq!(m.ranked[0].0, m.aoi_id);
            prop_assert!(m.ranked.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
            prop_assert!((m.deviation - m.score.acos().to_degrees()).abs() < 1e-12);
        }
    }
}
