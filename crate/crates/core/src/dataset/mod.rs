//! Sensor frames, pointing samples and datasets.
//!
//! A [`Frame`] is one time-stamped reading from both camera systems. A
//! [`Sample`] is the 8-frame window around one spoken trigger. Positions in
//! a stored dataset are in vehicle coordinates; [`Dataset::seat_origin`]
//! says where the driver's seat centre sits in that frame.

mod io;
mod preprocess;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AoiSet, EulerAngles, Vec3};

pub(crate) use io::write_line;
pub use io::{load_dataset, read_aois, read_dataset, save_dataset, write_dataset, SCHEMA_VERSION};
pub use preprocess::{extract_window, interpolate_missing, preprocess, preprocess_sample};

/// Frames per sample window.
pub const WINDOW_FRAMES: usize = 8;
/// Frames on each side of the trigger.
pub const HALF_WINDOW: usize = WINDOW_FRAMES / 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Eye,
    Head,
    Finger,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Eye, Modality::Head, Modality::Finger];

    /// Name used in result tables ("gaze" rather than "eye").
    pub fn label(self) -> &'static str {
        match self {
            Modality::Eye => "gaze",
            Modality::Head => "head",
            Modality::Finger => "finger",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Eye => "eye",
            Modality::Head => "head",
            Modality::Finger => "finger",
        })
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eye" | "gaze" => Ok(Modality::Eye),
            "head" => Ok(Modality::Head),
            "finger" => Ok(Modality::Finger),
            other => Err(Error::Config(format!("unknown modality `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
    #[default]
    Unknown,
}

/// One sensor reading. Fields of an invalid modality hold zeros and must not
/// be read.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Frame {
    pub timestamp: f64,
    /// Cyclops eye, the midpoint between both eyes.
    pub eye_pos: Vec3,
    pub eye_dir: Vec3,
    pub head_pos: Vec3,
    pub head_rot: EulerAngles,
    /// Fingertip.
    pub finger_pos: Vec3,
    /// Pointing direction, tip outward.
    pub finger_dir: Vec3,
    pub valid_eye: bool,
    pub valid_head: bool,
    pub valid_finger: bool,
}

impl Frame {
    pub fn is_valid(&self, m: Modality) -> bool {
        match m {
            Modality::Eye => self.valid_eye,
            Modality::Head => self.valid_head,
            Modality::Finger => self.valid_finger,
        }
    }

    pub fn all_valid(&self) -> bool {
        self.valid_eye && self.valid_head && self.valid_finger
    }

    /// Marks a modality invalid and zeroes its fields.
    pub fn invalidate(&mut self, m: Modality) {
        match m {
            Modality::Eye => {
                self.valid_eye = false;
                self.eye_pos = Vec3::ZERO;
                self.eye_dir = Vec3::ZERO;
            }
            Modality::Head => {
                self.valid_head = false;
                self.head_pos = Vec3::ZERO;
                self.head_rot = EulerAngles::default();
            }
            Modality::Finger => {
                self.valid_finger = false;
                self.finger_pos = Vec3::ZERO;
                self.finger_dir = Vec3::ZERO;
            }
        }
    }

    /// Pointing direction reported by a modality. Head direction comes from
    /// yaw and pitch.
    pub fn direction(&self, m: Modality) -> Vec3 {
        match m {
            Modality::Eye => self.eye_dir,
            Modality::Head => self.head_rot.direction(),
            Modality::Finger => self.finger_dir,
        }
    }
}

/// One pointing event.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub driver_id: String,
    pub aoi_id: u32,
    /// Trigger button timestamp, seconds.
    pub trigger_time: f64,
    pub hand: Hand,
    /// Exactly [`WINDOW_FRAMES`] frames: four at or before the trigger, four
    /// after.
    pub frames: Vec<Frame>,
}

impl Sample {
    /// Frame at or just before the trigger.
    pub fn trigger_frame(&self) -> &Frame {
        &self.frames[HALF_WINDOW - 1]
    }

    pub fn check_window(&self) -> std::result::Result<(), String> {
        if self.frames.len() != WINDOW_FRAMES {
            return Err(format!(
                "has {} frames, expected {WINDOW_FRAMES}",
                self.frames.len()
            ));
        }
        for (i, w) in self.frames.windows(2).enumerate() {
            if !(w[1].timestamp > w[0].timestamp) {
                return Err(format!("timestamps not increasing at frame {}", i + 1));
            }
        }
        let before = self.frames[HALF_WINDOW - 1].timestamp;
        let after = self.frames[HALF_WINDOW].timestamp;
        if !(before <= self.trigger_time && self.trigger_time < after) {
            return Err(format!(
                "trigger time {} not between frames {} and {}",
                self.trigger_time,
                HALF_WINDOW - 1,
                HALF_WINDOW
            ));
        }
        Ok(())
    }
}

/// Where a generated dataset came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Seat centre in the coordinates the frame positions are stored in.
    pub seat_origin: Vec3,
    pub fps_nominal: f64,
    pub aois: AoiSet,
    pub samples: Vec<Sample>,
    pub provenance: Option<Provenance>,
    by_driver: BTreeMap<String, Vec<usize>>,
}

impl Dataset {
    pub fn new(
        seat_origin: Vec3,
        fps_nominal: f64,
        aois: AoiSet,
        samples: Vec<Sample>,
    ) -> Result<Self> {
        for s in &samples {
            if !aois.contains(s.aoi_id) {
                return Err(Error::UnknownAoi(s.aoi_id));
            }
        }
        let mut ds = Dataset {
            seat_origin,
            fps_nominal,
            aois,
            samples,
            provenance: None,
            by_driver: BTreeMap::new(),
        };
        ds.reindex();
        Ok(ds)
    }

    fn reindex(&mut self) {
        self.by_driver.clear();
        for (i, s) in self.samples.iter().enumerate() {
            self.by_driver
                .entry(s.driver_id.clone())
                .or_default()
                .push(i);
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Driver ids in sorted order.
    pub fn drivers(&self) -> Vec<String> {
        self.by_driver.keys().cloned().collect()
    }

    pub fn driver_indices(&self, driver: &str) -> &[usize] {
        self.by_driver.get(driver).map_or(&[], Vec::as_slice)
    }

    /// Samples belonging to any of `drivers`, in dataset order.
    pub fn samples_for<'a>(&'a self, drivers: &[String]) -> Vec<&'a Sample> {
        let mut idx: Vec<usize> = drivers
            .iter()
            .flat_map(|d| self.driver_indices(d).iter().copied())
            .collect();
        idx.sort_unstable();
        idx.into_iter().map(|i| &self.samples[i]).collect()
    }

    /// Restricts both samples and AOIs to the given class ids.
    pub fn with_classes(&self, ids: &[u32]) -> Result<Dataset> {
        let aois = self.aois.subset(ids)?;
        let samples = self
            .samples
            .iter()
            .filter(|s| aois.contains(s.aoi_id))
            .cloned()
            .collect();
        let mut ds = Dataset::new(self.seat_origin, self.fps_nominal, aois, samples)?;
        ds.provenance = self.provenance.clone();
        Ok(ds)
    }

    /// Keeps only samples whose driver is not listed.
    pub fn without_drivers(&self, drop: &[String]) -> Dataset {
        let samples = self
            .samples
            .iter()
            .filter(|s| !drop.contains(&s.driver_id))
            .cloned()
            .collect();
        let mut ds = self.clone();
        ds.samples = samples;
        ds.reindex();
        ds
    }

    /// Interpolates, normalizes and translates every sample into the seat
    /// frame. The result has `seat_origin` at zero, so preprocessing twice
    /// is harmless.
    pub fn preprocessed(&self) -> Result<Dataset> {
        let samples = self
            .samples
            .iter()
            .map(|s| preprocess_sample(s, self.seat_origin))
            .collect::<Result<Vec<_>>>()?;
        let mut ds = Dataset::new(Vec3::ZERO, self.fps_nominal, self.aois.clone(), samples)?;
        ds.provenance = self.provenance.clone();
        Ok(ds)
    }
}
