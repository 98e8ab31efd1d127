//! Synthetic pointing datasets drawn from published per-AOI error
//! statistics.
//!
//! Every modality direction is the AOI ground-truth direction rotated by a
//! Gaussian azimuth/elevation error. Each driver adds a constant bias per
//! modality and may scale the error statistics by a skill multiplier.
//! Within a sample window each frame carries a small extra jitter on top of
//! the event-level error; the event-level spread is shrunk so that a single
//! frame still follows the configured mean and standard deviation.
//!
//! Driver `k` (zero based) draws from ChaCha8 stream `k + 1` of the master
//! seed, so drivers can be generated independently and in any order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{
    Dataset, Frame, Hand, Modality, Provenance, Sample, HALF_WINDOW, WINDOW_FRAMES,
};
use crate::error::{Error, Result};
use crate::geometry::{
    build_aoi, from_azimuth_elevation, normalize, to_azimuth_elevation, wrap_degrees, AngularError,
    AoiSet, EulerAngles, Vec3,
};

/// Mean and standard deviation of the azimuth and elevation error of one
/// modality at one AOI, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorCell {
    pub aoi_id: u32,
    pub modality: Modality,
    pub azimuth_mean: f64,
    pub azimuth_sd: f64,
    pub elevation_mean: f64,
    pub elevation_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissingRate {
    pub aoi_id: u32,
    pub modality: Modality,
    /// Probability that the reading at the trigger frame is lost.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityErrorModel {
    pub cells: Vec<ErrorCell>,
    pub missing: Vec<MissingRate>,
}

/// (az M, az SD, el M, el SD) for eye, head and finger, AOIs 1 to 12.
#[rustfmt::skip]
const MEASURED_ERRORS: [[f64; 12]; 12] = [
    [26.0, 18.0, 13.0, 11.0,   5.0,  7.0, 37.0, 10.0,  17.0, 35.0, 15.0, 17.0],
    [23.0, 17.0, 11.0, 11.0,   4.0,  6.0, 36.0, 10.0,  11.0, 22.0,  7.0, 14.0],
    [25.0, 16.0, 19.0, 13.0,   3.0,  8.0, 46.0, 11.0,  15.0, 30.0, 17.0, 17.0],
    [ 2.0,  5.0,  1.0,  4.0,   2.0,  5.0, 23.0,  8.0,   1.0,  7.0,  4.0,  8.0],
    [ 1.0,  4.0,  1.0,  5.0,   1.0,  4.0, 22.0,  8.0,   1.0,  5.0,  5.0,  8.0],
    [ 5.0,  5.0,  3.0,  2.0,   7.0,  8.0, 21.0,  8.0,   9.0, 16.0,  8.0, 11.0],
    [ 1.0,  3.0,  1.0,  2.0,   3.0,  7.0, 10.0,  7.0,   1.0,  6.0,  1.0,  5.0],
    [ 3.0,  6.0,  3.0,  6.0,   5.0,  5.0, 32.0, 11.0,   3.0, 10.0,  4.0,  8.0],
    [ 2.0,  4.0,  3.0,  6.0,  21.0, 12.0, 33.0, 14.0,   9.0, 19.0,  6.0, 11.0],
    [12.0, 13.0,  4.0,  7.0,  34.0, 14.0, 36.0, 14.0,  29.0, 29.0, 26.0, 23.0],
    [25.0, 14.0,  9.0, 11.0,  45.0, 14.0, 31.0, 13.0,  27.0, 28.0, 25.0, 24.0],
    [17.0, 18.0,  4.0,  5.0,  11.0, 14.0, 15.0,  7.0,  10.0, 26.0,  6.0, 11.0],
];

/// Total samples with gaze lost at the trigger, out of 2640 recorded.
pub const MISSING_GAZE_EVENTS: f64 = 662.0;
pub const RECORDED_EVENTS: f64 = 2640.0;

impl ModalityErrorModel {
    /// The measured in-vehicle error statistics, with gaze loss concentrated
    /// on AOIs 1 to 3 (half of all losses) and 10 to 11 (a quarter).
    pub fn measured() -> Self {
        let mut cells = Vec::with_capacity(36);
        for (row, vals) in MEASURED_ERRORS.iter().enumerate() {
            for (k, m) in Modality::ALL.iter().enumerate() {
                let v = &vals[4 * k..4 * k + 4];
                cells.push(ErrorCell {
                    aoi_id: row as u32 + 1,
                    modality: *m,
                    azimuth_mean: v[0],
                    azimuth_sd: v[1],
                    elevation_mean: v[2],
                    elevation_sd: v[3],
                });
            }
        }
        // 2640 recorded events over 12 AOIs
        let per_aoi = RECORDED_EVENTS / 12.0;
        let missing = (1..=12)
            .map(|id| {
                let p = match id {
                    1..=3 => 0.5 * MISSING_GAZE_EVENTS / (3.0 * per_aoi),
                    10 | 11 => 0.25 * MISSING_GAZE_EVENTS / (2.0 * per_aoi),
                    _ => 0.25 * MISSING_GAZE_EVENTS / (7.0 * per_aoi),
                };
                MissingRate {
                    aoi_id: id,
                    modality: Modality::Eye,
                    probability: p,
                }
            })
            .collect();
        ModalityErrorModel { cells, missing }
    }

    /// No error and no missing data.
    pub fn zero(aoi_ids: &[u32]) -> Self {
        let cells = aoi_ids
            .iter()
            .flat_map(|&aoi_id| {
                Modality::ALL.map(|modality| ErrorCell {
                    aoi_id,
                    modality,
                    azimuth_mean: 0.0,
                    azimuth_sd: 0.0,
                    elevation_mean: 0.0,
                    elevation_sd: 0.0,
                })
            })
            .collect();
        ModalityErrorModel {
            cells,
            missing: Vec::new(),
        }
    }

    pub fn cell(&self, aoi_id: u32, modality: Modality) -> Option<&ErrorCell> {
        self.cells
            .iter()
            .find(|c| c.aoi_id == aoi_id && c.modality == modality)
    }

    pub fn missing_probability(&self, aoi_id: u32, modality: Modality) -> f64 {
        self.missing
            .iter()
            .find(|c| c.aoi_id == aoi_id && c.modality == modality)
            .map_or(0.0, |c| c.probability)
    }

    fn validate(&self, aois: &AoiSet) -> Result<()> {
        for c in &self.cells {
            if !(c.azimuth_sd >= 0.0 && c.elevation_sd >= 0.0) {
                return Err(Error::Config(format!(
                    "negative sd for aoi {} {}",
                    c.aoi_id, c.modality
                )));
            }
        }
        for a in aois {
            for m in Modality::ALL {
                if self.cell(a.id, m).is_none() {
                    return Err(Error::Config(format!("no error cell for aoi {} {m}", a.id)));
                }
            }
        }
        for p in &self.missing {
            if !(0.0..=1.0).contains(&p.probability) {
                return Err(Error::Config(format!(
                    "missing probability {} outside [0, 1]",
                    p.probability
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillOverride {
    /// Zero-based driver index.
    pub driver: usize,
    pub skill: f64,
}

pub const SKILL_RANGE: (f64, f64) = (0.25, 4.0);

/// How drivers differ from each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverVariation {
    /// Standard deviation of the per-driver constant bias, per modality
    /// (eye, head, finger).
    pub bias_sd: [AngularError; 3],
    /// Probability of pointing with the left hand.
    pub left_hand_probability: f64,
    /// Extra finger error when pointing with the left hand.
    pub left_hand_offset: AngularError,
    /// Drivers whose error statistics are scaled; everyone else has skill 1.
    pub skill_overrides: Vec<SkillOverride>,
    /// Standard deviation of per-driver eye position, metres.
    pub body_sd: f64,
}

impl Default for DriverVariation {
    fn default() -> Self {
        DriverVariation {
            bias_sd: [
                AngularError::new(9.0, 9.0),
                AngularError::new(14.0, 14.0),
                AngularError::new(0.0, 0.0),
            ],
            left_hand_probability: 0.15,
            left_hand_offset: AngularError::new(3.0, 0.0),
            skill_overrides: Vec::new(),
            body_sd: 0.03,
        }
    }
}

impl DriverVariation {
    /// Every driver identical: no bias, skill 1, right hand.
    pub fn none() -> Self {
        DriverVariation {
            bias_sd: [AngularError::default(); 3],
            left_hand_probability: 0.0,
            left_hand_offset: AngularError::default(),
            skill_overrides: Vec::new(),
            body_sd: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiFixture {
    pub id: u32,
    pub corners: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_drivers: usize,
    pub samples_per_aoi: usize,
    pub seed: u64,
    /// AOI corner points in the seat frame.
    pub aois: Vec<AoiFixture>,
    pub error_model: ModalityErrorModel,
    pub drivers: DriverVariation,
    /// Per-frame jitter as a fraction of the cell standard deviation.
    pub jitter_fraction: f64,
    /// Standard deviation in degrees, per axis, of how far the eye-fingertip
    /// line misses the target centre.
    pub aim_sd: f64,
    /// Seat centre in vehicle coordinates.
    pub seat_origin: Vec3,
    pub fps: f64,
}

/// Plausible cockpit AOI centres in the seat frame (x forward, y left,
/// z up, metres). The seat origin sits about level with the driver's eyes,
/// so most AOIs lie below it. AOIs 1 to 3 sit low on the right, 10 and 11
/// low on the left.
pub const DEFAULT_AOI_CENTRES: [(u32, [f64; 3]); 12] = [
    (1, [0.55, -0.38, -0.42]),
    (2, [0.62, -0.40, -0.32]),
    (3, [0.50, -0.33, -0.52]),
    (4, [0.85, -0.55, -0.05]),
    (5, [0.80, -0.38, 0.02]),
    (6, [0.78, -0.75, -0.20]),
    (7, [0.85, 0.00, -0.05]),
    (8, [0.95, -0.30, 0.35]),
    (9, [0.70, 0.60, 0.05]),
    (10, [0.60, 0.35, -0.32]),
    (11, [0.62, 0.42, -0.40]),
    (12, [0.80, -0.15, 0.40]),
];

pub fn default_aoi_fixtures() -> Vec<AoiFixture> {
    DEFAULT_AOI_CENTRES
        .iter()
        .map(|&(id, c)| {
            let c = Vec3::from(c);
            let corners = [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)]
                .iter()
                .map(|&(dy, dz)| c + Vec3::new(0.0, 0.03 * dy, 0.02 * dz))
                .collect();
            AoiFixture { id, corners }
        })
        .collect()
}

/// Default eye-fingertip aiming error, degrees.
pub const AIM_SD: f64 = 6.0;

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_drivers: 22,
            samples_per_aoi: 10,
            seed: 2020,
            aois: default_aoi_fixtures(),
            error_model: ModalityErrorModel::measured(),
            drivers: DriverVariation::default(),
            jitter_fraction: 0.1,
            aim_sd: AIM_SD,
            seat_origin: Vec3::new(-1.35, 0.37, 1.05),
            fps: 45.0,
        }
    }
}

impl GeneratorConfig {
    /// Zero error, no missing data, identical drivers.
    pub fn noiseless() -> Self {
        let aois = default_aoi_fixtures();
        let ids: Vec<u32> = aois.iter().map(|a| a.id).collect();
        GeneratorConfig {
            aois,
            error_model: ModalityErrorModel::zero(&ids),
            drivers: DriverVariation::none(),
            aim_sd: 0.0,
            ..GeneratorConfig::default()
        }
    }

    pub fn aoi_set(&self) -> Result<AoiSet> {
        let aois = self
            .aois
            .iter()
            .map(|a| build_aoi(a.id, a.corners.clone()))
            .collect::<Result<Vec<_>>>()?;
        AoiSet::new(aois)
    }

    pub fn validate(&self) -> Result<AoiSet> {
        if self.aois.is_empty() {
            return Err(Error::Config("AOI set is empty".into()));
        }
        if self.n_drivers == 0 || self.samples_per_aoi == 0 {
            return Err(Error::Config(
                "driver and sample counts must be positive".into(),
            ));
        }
        if !(self.fps > 0.0) {
            return Err(Error::Config("fps must be positive".into()));
        }
        if !(self.aim_sd >= 0.0 && self.aim_sd.is_finite()) {
            return Err(Error::Config(
                "aim sd must be finite and non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.jitter_fraction) {
            return Err(Error::Config("jitter fraction must be in [0, 1)".into()));
        }
        let v = &self.drivers;
        if !(0.0..=1.0).contains(&v.left_hand_probability) {
            return Err(Error::Config("left hand probability outside [0, 1]".into()));
        }
        for o in &v.skill_overrides {
            if !(SKILL_RANGE.0..=SKILL_RANGE.1).contains(&o.skill) {
                return Err(Error::Config(format!(
                    "skill {} outside [{}, {}]",
                    o.skill, SKILL_RANGE.0, SKILL_RANGE.1
                )));
            }
            if o.driver >= self.n_drivers {
                return Err(Error::Config(format!(
                    "skill override for unknown driver {}",
                    o.driver
                )));
            }
        }
        let aois = self.aoi_set()?;
        self.error_model.validate(&aois)?;
        Ok(aois)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn driver_id(&self, index: usize) -> String {
        let width = self.n_drivers.to_string().len().max(2);
        format!("d{:0width$}", index + 1)
    }
}

/// One simulated participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverProfile {
    pub driver_id: String,
    /// Constant bias per modality (eye, head, finger).
    pub bias: [AngularError; 3],
    pub left_hand_probability: f64,
    pub skill: f64,
    /// Cyclops eye in the seat frame.
    pub eye_position: Vec3,
}

fn modality_index(m: Modality) -> usize {
    match m {
        Modality::Eye => 0,
        Modality::Head => 1,
        Modality::Finger => 2,
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn driver_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

pub fn driver_profile(cfg: &GeneratorConfig, index: usize, rng: &mut ChaCha8Rng) -> DriverProfile {
    let v = &cfg.drivers;
    let bias = std::array::from_fn(|k| {
        AngularError::new(
            v.bias_sd[k].azimuth * gauss(rng),
            v.bias_sd[k].elevation * gauss(rng),
        )
    });
    let skill = v
        .skill_overrides
        .iter()
        .find(|o| o.driver == index)
        .map_or(1.0, |o| o.skill);
    let body = Vec3::new(gauss(rng), gauss(rng), gauss(rng)) * v.body_sd;
    DriverProfile {
        driver_id: cfg.driver_id(index),
        bias,
        left_hand_probability: v.left_hand_probability,
        skill,
        eye_position: Vec3::new(0.10, 0.0, 0.08) + body,
    }
}

/// Event-level and per-frame error draws for one modality of one sample.
struct ErrorDraw {
    event: AngularError,
    frame_sd: AngularError,
}

fn draw_error(
    cell: &ErrorCell,
    profile: &DriverProfile,
    bias: AngularError,
    jitter: f64,
    rng: &mut ChaCha8Rng,
) -> ErrorDraw {
    let s = profile.skill;
    let shrink = (1.0 - jitter * jitter).sqrt();
    ErrorDraw {
        event: AngularError::new(
            s * (cell.azimuth_mean + cell.azimuth_sd * shrink * gauss(rng)) + bias.azimuth,
            s * (cell.elevation_mean + cell.elevation_sd * shrink * gauss(rng)) + bias.elevation,
        ),
        frame_sd: AngularError::new(s * cell.azimuth_sd * jitter, s * cell.elevation_sd * jitter),
    }
}

fn perturbed(gt: AngularError, err: AngularError) -> AngularError {
    AngularError::new(
        wrap_degrees(gt.azimuth + err.azimuth),
        (gt.elevation + err.elevation).clamp(-89.99, 89.99),
    )
}

fn generate_driver(cfg: &GeneratorConfig, aois: &AoiSet, index: usize) -> Vec<Sample> {
    let mut rng = driver_rng(cfg.seed, index);
    let profile = driver_profile(cfg, index, &mut rng);
    let dt = 1.0 / cfg.fps;
    let jitter = cfg.jitter_fraction;
    let position_noise = Normal::new(0.0, 0.003).expect("finite sd");
    let mut samples = Vec::with_capacity(aois.len() * cfg.samples_per_aoi);
    let mut event = 0usize;
    for aoi in aois {
        let gt = to_azimuth_elevation(aoi.ground_truth);
        for _ in 0..cfg.samples_per_aoi {
            // one event every 4 s; the trigger falls inside frame 3's interval
            let t3 = 5.0 + 4.0 * event as f64;
            event += 1;
            let trigger_time = t3 + rng.random::<f64>() * dt * 0.999;
            let hand = if rng.random::<f64>() < profile.left_hand_probability {
                Hand::Left
            } else {
                Hand::Right
            };

            let posture = Vec3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)) * 0.01;
            let eye_pos = profile.eye_position + posture;
            let head_pos = eye_pos + Vec3::new(-0.09, 0.0, 0.04);
            let reach = rng.random_range(0.35..0.55);

            let draws: [ErrorDraw; 3] = Modality::ALL.map(|m| {
                let cell = cfg.error_model.cell(aoi.id, m).expect("validated");
                let mut bias = profile.bias[modality_index(m)];
                if m == Modality::Finger && hand == Hand::Left {
                    bias.azimuth += cfg.drivers.left_hand_offset.azimuth;
                    bias.elevation += cfg.drivers.left_hand_offset.elevation;
                }
                draw_error(cell, &profile, bias, jitter, &mut rng)
            });
            let roll = 2.0 * gauss(&mut rng);
            // The fingertip is held on the line from the eye to the target,
            // missing it by an aiming error independent of the finger
            // direction error.
            let sight = to_azimuth_elevation(aoi.mean_point - eye_pos);
            let aim = AngularError::new(
                profile.skill * cfg.aim_sd * gauss(&mut rng),
                profile.skill * cfg.aim_sd * gauss(&mut rng),
            );
            let aim = perturbed(sight, aim);
            let fingertip = eye_pos + from_azimuth_elevation(aim.azimuth, aim.elevation) * reach;

            let mut frames: Vec<Frame> = (0..WINDOW_FRAMES)
                .map(|k| {
                    let timestamp = t3 + (k as f64 - (HALF_WINDOW - 1) as f64) * dt;
                    let dirs: [AngularError; 3] = std::array::from_fn(|i| {
                        let d = &draws[i];
                        let e = AngularError::new(
                            d.event.azimuth + d.frame_sd.azimuth * gauss(&mut rng),
                            d.event.elevation + d.frame_sd.elevation * gauss(&mut rng),
                        );
                        perturbed(gt, e)
                    });
                    let mut jiggle = |p: Vec3| {
                        p + Vec3::new(
                            position_noise.sample(&mut rng),
                            position_noise.sample(&mut rng),
                            position_noise.sample(&mut rng),
                        )
                    };
                    let eye = jiggle(eye_pos);
                    let head = jiggle(head_pos);
                    let finger = jiggle(fingertip);
                    Frame {
                        timestamp,
                        eye_pos: eye + cfg.seat_origin,
                        eye_dir: from_azimuth_elevation(dirs[0].azimuth, dirs[0].elevation),
                        head_pos: head + cfg.seat_origin,
                        head_rot: EulerAngles::new(dirs[1].azimuth, dirs[1].elevation, roll),
                        finger_pos: finger + cfg.seat_origin,
                        finger_dir: from_azimuth_elevation(dirs[2].azimuth, dirs[2].elevation),
                        valid_eye: true,
                        valid_head: true,
                        valid_finger: true,
                    }
                })
                .collect();

            for m in Modality::ALL {
                let p = cfg.error_model.missing_probability(aoi.id, m);
                if p > 0.0 && rng.random::<f64>() < p {
                    // an occlusion run through the trigger frame; at least one
                    // frame of the window stays valid
                    let len = rng.random_range(1..WINDOW_FRAMES);
                    let lo = (HALF_WINDOW - 1).saturating_sub(len - 1);
                    let hi = (HALF_WINDOW - 1).min(WINDOW_FRAMES - len);
                    let start = rng.random_range(lo..=hi);
                    for f in &mut frames[start..start + len] {
                        f.invalidate(m);
                    }
                }
            }

            samples.push(Sample {
                driver_id: profile.driver_id.clone(),
                aoi_id: aoi.id,
                trigger_time,
                hand,
                frames,
            });
        }
    }
    samples
}

/// Generates a raw dataset (vehicle coordinates, missing readings as
/// invalid frames). Deterministic in `cfg.seed`.
pub fn generate_dataset(cfg: &GeneratorConfig) -> Result<Dataset> {
    let aois = cfg.validate()?;
    let samples = (0..cfg.n_drivers)
        .flat_map(|d| generate_driver(cfg, &aois, d))
        .collect();
    let mut ds = Dataset::new(cfg.seat_origin, cfg.fps, aois, samples)?;
    ds.provenance = Some(Provenance {
        seed: cfg.seed,
        config_hash: cfg.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    });
    Ok(ds)
}

/// Observed error statistics of one (AOI, modality) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub aoi_id: u32,
    pub modality: Modality,
    pub n: usize,
    pub azimuth_mean: f64,
    pub azimuth_sd: f64,
    pub elevation_mean: f64,
    pub elevation_sd: f64,
    /// Fewer than two readings; the sds are reported as 0.
    pub degenerate: bool,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Azimuth/elevation error of each valid trigger-frame reading against the
/// AOI ground truth, aggregated per (AOI, modality). Cells without any
/// valid reading are left out.
pub fn empirical_error_stats(ds: &Dataset, aois: &AoiSet) -> Result<Vec<ErrorStats>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut errs: BTreeMap<(u32, Modality), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for s in &ds.samples {
        let gt = to_azimuth_elevation(aois.ground_truth(s.aoi_id)?);
        let f = s.trigger_frame();
        for m in Modality::ALL {
            if !f.is_valid(m) {
                continue;
            }
            let Ok(d) = normalize(f.direction(m)) else {
                continue;
            };
            let obs = to_azimuth_elevation(d);
            let entry = errs.entry((s.aoi_id, m)).or_default();
            entry.0.push(wrap_degrees(obs.azimuth - gt.azimuth));
            entry.1.push(obs.elevation - gt.elevation);
        }
    }
    Ok(errs
        .into_iter()
        .map(|((aoi_id, modality), (az, el))| {
            let (azimuth_mean, azimuth_sd) = mean_sd(&az);
            let (elevation_mean, elevation_sd) = mean_sd(&el);
            ErrorStats {
                aoi_id,
                modality,
                n: az.len(),
                azimuth_mean,
                azimuth_sd,
                elevation_mean,
                elevation_sd,
                degenerate: az.len() < 2,
            }
        })
        .collect())
}

/// Fraction of samples whose trigger frame lacks a valid reading.
pub fn missing_fraction(ds: &Dataset, modality: Modality) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let lost = ds
        .samples
        .iter()
        .filter(|s| !s.trigger_frame().is_valid(modality))
        .count();
    lost as f64 / ds.len() as f64
}
