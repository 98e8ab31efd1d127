use crate::dataset::{Modality, Sample, WINDOW_FRAMES};
use crate::error::{Error, Result};
use crate::geometry::{AoiSet, Vec3};
use crate::tensor::Tensor;

/// Attributes per frame, in input order.
pub const ATTRIBUTES: usize = 6;
/// Spatial dimensions per attribute.
pub const DIMS: usize = 3;
/// Reals per frame.
pub const FRAME_FEATURES: usize = ATTRIBUTES * DIMS;
/// Reals per sample.
pub const SAMPLE_FEATURES: usize = WINDOW_FRAMES * FRAME_FEATURES;

/// Model input `[b, 8, 6, 3]`.
///
/// Attribute order is eye position, eye direction, head position, head
/// rotation, finger position, finger direction. Head rotation is
/// (yaw, pitch, roll) in degrees divided by 180.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionInput {
    tensor: Tensor,
}

impl FusionInput {
    /// Encodes preprocessed samples. Every frame must have all three
    /// modalities valid.
    pub fn from_samples(samples: &[&Sample]) -> Result<Self> {
        let mut data = Vec::with_capacity(samples.len() * SAMPLE_FEATURES);
        for (i, s) in samples.iter().enumerate() {
            if s.frames.len() != WINDOW_FRAMES {
                return Err(Error::ShapeMismatch(format!(
                    "sample {i} has {} frames, expected {WINDOW_FRAMES}",
                    s.frames.len()
                )));
            }
            for f in &s.frames {
                if !f.all_valid() {
                    return Err(Error::NotPreprocessed(i));
                }
                let rot = f.head_rot;
                let rows = [
                    f.eye_pos,
                    f.eye_dir,
                    f.head_pos,
                    Vec3::new(rot.yaw, rot.pitch, rot.roll) / 180.0,
                    f.finger_pos,
                    f.finger_dir,
                ];
                for r in rows {
                    if !r.is_finite() {
                        return Err(Error::ShapeMismatch(format!(
                            "sample {i} has non-finite values"
                        )));
                    }
                    data.extend_from_slice(&r.to_array());
                }
            }
        }
        Self::from_tensor(Tensor::from_vec(
            &[samples.len(), WINDOW_FRAMES, ATTRIBUTES, DIMS],
            data,
        )?)
    }

    pub fn from_tensor(tensor: Tensor) -> Result<Self> {
        let s = tensor.shape();
        if s.len() != 4 || s[1..] != [WINDOW_FRAMES, ATTRIBUTES, DIMS] {
            return Err(Error::ShapeMismatch(format!(
                "fusion input must be [b, 8, 6, 3], got {s:?}"
            )));
        }
        Ok(FusionInput { tensor })
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn len(&self) -> usize {
        self.tensor.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The 144 reals of sample `i`.
    pub fn features(&self, i: usize) -> &[f64] {
        self.tensor.row(i)
    }

    pub fn select(&self, indices: &[usize]) -> FusionInput {
        let mut data = Vec::with_capacity(indices.len() * SAMPLE_FEATURES);
        for &i in indices {
            data.extend_from_slice(self.features(i));
        }
        FusionInput {
            tensor: Tensor::from_vec(&[indices.len(), WINDOW_FRAMES, ATTRIBUTES, DIMS], data)
                .expect("selected rows match shape"),
        }
    }
}

fn attribute_planes(m: Modality) -> [usize; 2] {
    match m {
        Modality::Eye => [0, 1],
        Modality::Head => [2, 3],
        Modality::Finger => [4, 5],
    }
}

/// Zeroes the attribute planes of every modality not in `keep`.
pub fn modality_mask(input: &FusionInput, keep: &[Modality]) -> Result<FusionInput> {
    if keep.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut out = input.clone();
    let dropped: Vec<usize> = Modality::ALL
        .iter()
        .filter(|m| !keep.contains(m))
        .flat_map(|&m| attribute_planes(m))
        .collect();
    for frame in out.tensor.data_mut().chunks_mut(FRAME_FEATURES) {
        for &a in &dropped {
            frame[a * DIMS..(a + 1) * DIMS].fill(0.0);
        }
    }
    Ok(out)
}

/// Encoded samples with their labels, ready for fitting or scoring.
#[derive(Debug, Clone)]
pub struct Examples {
    pub input: FusionInput,
    pub aoi_ids: Vec<u32>,
    pub drivers: Vec<String>,
    /// Candidate targets; every label is a member.
    pub aois: AoiSet,
}

impl Examples {
    pub fn from_samples(samples: &[&Sample], aois: &AoiSet) -> Result<Self> {
        if let Some(s) = samples.iter().find(|s| !aois.contains(s.aoi_id)) {
            return Err(Error::UnknownAoi(s.aoi_id));
        }
        Ok(Examples {
            input: FusionInput::from_samples(samples)?,
            aoi_ids: samples.iter().map(|s| s.aoi_id).collect(),
            drivers: samples.iter().map(|s| s.driver_id.clone()).collect(),
            aois: aois.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.aoi_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aoi_ids.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Examples {
        Examples {
            input: self.input.select(indices),
            aoi_ids: indices.iter().map(|&i| self.aoi_ids[i]).collect(),
            drivers: indices.iter().map(|&i| self.drivers[i].clone()).collect(),
            aois: self.aois.clone(),
        }
    }

    pub fn masked(&self, keep: &[Modality]) -> Result<Examples> {
        Ok(Examples {
            input: modality_mask(&self.input, keep)?,
            ..self.clone()
        })
    }

    /// Ground-truth directions `[n, 3]`.
    pub fn targets(&self) -> Tensor {
        let data = self
            .aoi_ids
            .iter()
            .flat_map(|&id| {
                self.aois
                    .ground_truth(id)
                    .expect("labels checked on construction")
                    .to_array()
            })
            .collect();
        Tensor::from_vec(&[self.len(), 3], data).expect("three values per label")
    }

    /// Class indices against `class_ids`.
    pub fn labels(&self, class_ids: &[u32]) -> Result<Vec<usize>> {
        self.aoi_ids
            .iter()
            .map(|id| {
                class_ids
                    .iter()
                    .position(|c| c == id)
                    .ok_or(Error::UnknownAoi(*id))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_dataset, GeneratorConfig};

    fn small() -> (crate::dataset::Dataset, FusionInput) {
        let cfg = GeneratorConfig {
            n_drivers: 2,
            samples_per_aoi: 1,
            ..GeneratorConfig::default()
        };
        let ds = generate_dataset(&cfg).unwrap().preprocessed().unwrap();
        let refs: Vec<&Sample> = ds.samples.iter().collect();
        let x = FusionInput::from_samples(&refs).unwrap();
        (ds, x)
    }

    #[test]
    fn layout() {
        let (ds, x) = small();
        assert_eq!(x.tensor().shape(), &[24, 8, 6, 3]);
        let f = &ds.samples[5].frames[2];
        let row = &x.features(5)[2 * FRAME_FEATURES..3 * FRAME_FEATURES];
        assert_eq!(&row[3..6], &f.eye_dir.to_array());
        assert_eq!(row[9], f.head_rot.yaw / 180.0);
        assert_eq!(&row[15..18], &f.finger_dir.to_array());
        for frame in x.tensor().data().chunks(FRAME_FEATURES) {
            for a in [1, 5] {
                let n: f64 = frame[a * 3..a * 3 + 3].iter().map(|v| v * v).sum();
                assert!((n - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn raw_samples_rejected() {
        let cfg = GeneratorConfig {
            n_drivers: 3,
            samples_per_aoi: 3,
            ..GeneratorConfig::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        let refs: Vec<&Sample> = ds.samples.iter().collect();
        assert!(matches!(
            FusionInput::from_samples(&refs),
            Err(Error::NotPreprocessed(_))
        ));
    }

    #[test]
    fn masks() {
        let (_, x) = small();
        assert_eq!(modality_mask(&x, &Modality::ALL).unwrap(), x);
        let f = modality_mask(&x, &[Modality::Finger]).unwrap();
        for frame in f.tensor().data().chunks(FRAME_FEATURES) {
            assert!(frame[..12].iter().all(|&v| v == 0.0));
            assert!(frame[12..].iter().any(|&v| v != 0.0));
        }
        assert!(matches!(modality_mask(&x, &[]), Err(Error::EmptyMask)));
    }

    #[test]
    fn examples_labels_and_targets() {
        let (ds, _) = small();
        let refs: Vec<&Sample> = ds.samples.iter().collect();
        let ex = Examples::from_samples(&refs, &ds.aois).unwrap();
        let t = ex.targets();
        assert_eq!(
            t.row(0),
            &ds.aois.ground_truth(ex.aoi_ids[0]).unwrap().to_array()
        );
        let labels = ex.labels(&ds.aois.ids()).unwrap();
        assert!(labels
            .iter()
            .zip(&ex.aoi_ids)
            .all(|(&l, &id)| l as u32 + 1 == id));
        let sub = ex.select(&[3, 1]);
        assert_eq!(sub.aoi_ids, vec![ex.aoi_ids[3], ex.aoi_ids[1]]);
        assert!(ex.labels(&[1, 2]).is_err());
    }
}
