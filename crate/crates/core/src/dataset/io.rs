//! Line-record dataset files.
//!
//! One JSON object per line. The first line is the header, then one line
//! per AOI, then one line per sample. Invalid sensor readings are `null`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{build_aoi, AoiSet, EulerAngles, Vec3};

use super::{Dataset, Frame, Hand, Provenance, Sample};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u32,
    seat_origin: Vec3,
    fps_nominal: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AoiRecord {
    id: u32,
    corners: Vec<Vec3>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AoiLine {
    aoi: AoiRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    t: f64,
    eye_pos: Option<Vec3>,
    eye_dir: Option<Vec3>,
    head_pos: Option<Vec3>,
    head_rot: Option<EulerAngles>,
    finger_pos: Option<Vec3>,
    finger_dir: Option<Vec3>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    driver: String,
    aoi_id: u32,
    trigger_time: f64,
    hand: Hand,
    frames: Vec<FrameRecord>,
}

fn pair<T: Default>(
    a: Option<T>,
    b: Option<T>,
    what: &str,
) -> std::result::Result<(T, T, bool), String> {
    match (a, b) {
        (Some(a), Some(b)) => Ok((a, b, true)),
        (None, None) => Ok((T::default(), T::default(), false)),
        _ => Err(format!(
            "{what} position and direction must both be null or both present"
        )),
    }
}

impl FrameRecord {
    fn from_frame(f: &Frame) -> Self {
        let keep = |v: bool, x: Vec3| v.then_some(x);
        FrameRecord {
            t: f.timestamp,
            eye_pos: keep(f.valid_eye, f.eye_pos),
            eye_dir: keep(f.valid_eye, f.eye_dir),
            head_pos: keep(f.valid_head, f.head_pos),
            head_rot: f.valid_head.then_some(f.head_rot),
            finger_pos: keep(f.valid_finger, f.finger_pos),
            finger_dir: keep(f.valid_finger, f.finger_dir),
        }
    }

    fn into_frame(self) -> std::result::Result<Frame, String> {
        let (eye_pos, eye_dir, valid_eye) = pair(self.eye_pos, self.eye_dir, "eye")?;
        let (finger_pos, finger_dir, valid_finger) =
            pair(self.finger_pos, self.finger_dir, "finger")?;
        let (head_pos, head_rot, valid_head) = match (self.head_pos, self.head_rot) {
            (Some(p), Some(r)) => (p, r, true),
            (None, None) => (Vec3::ZERO, EulerAngles::default(), false),
            _ => return Err("head position and rotation must both be null or both present".into()),
        };
        Ok(Frame {
            timestamp: self.t,
            eye_pos,
            eye_dir,
            head_pos,
            head_rot,
            finger_pos,
            finger_dir,
            valid_eye,
            valid_head,
            valid_finger,
        })
    }
}

pub(crate) fn write_line<W: Write, T: Serialize>(w: &mut W, v: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, v).map_err(|e| Error::io("<writer>", e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io("<writer>", e))
}

pub fn write_dataset<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    write_line(
        &mut w,
        &Header {
            schema_version: SCHEMA_VERSION,
            seat_origin: ds.seat_origin,
            fps_nominal: ds.fps_nominal,
            provenance: ds.provenance.clone(),
        },
    )?;
    for a in &ds.aois {
        let aoi = AoiRecord {
            id: a.id,
            corners: a.corner_points.clone(),
        };
        write_line(&mut w, &AoiLine { aoi })?;
    }
    for s in &ds.samples {
        let rec = SampleRecord {
            driver: s.driver_id.clone(),
            aoi_id: s.aoi_id,
            trigger_time: s.trigger_time,
            hand: s.hand,
            frames: s.frames.iter().map(FrameRecord::from_frame).collect(),
        };
        write_line(&mut w, &rec)?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<Dataset> {
    let reader = BufReader::new(r);
    let mut header: Option<Header> = None;
    let mut aois = Vec::new();
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if header.is_none() {
            let version = value
                .get("schema_version")
                .and_then(Value::as_u64)
                .ok_or_else(|| {
                    Error::parse(lineno, "first line must be a header with schema_version")
                })?;
            if version != u64::from(SCHEMA_VERSION) {
                return Err(Error::SchemaVersionMismatch {
                    found: version as u32,
                    expected: SCHEMA_VERSION,
                });
            }
            header = Some(
                serde_json::from_value(value).map_err(|e| Error::parse(lineno, e.to_string()))?,
            );
            continue;
        }
        if value.get("aoi").is_some() {
            let rec: AoiLine =
                serde_json::from_value(value).map_err(|e| Error::parse(lineno, e.to_string()))?;
            let aoi = build_aoi(rec.aoi.id, rec.aoi.corners)
                .map_err(|e| Error::parse(lineno, format!("aoi {}: {e}", rec.aoi.id)))?;
            aois.push(aoi);
            continue;
        }
        let rec: SampleRecord =
            serde_json::from_value(value).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let name = format!(
            "sample (driver {}, aoi {}, trigger {})",
            rec.driver, rec.aoi_id, rec.trigger_time
        );
        let frames = rec
            .frames
            .into_iter()
            .map(FrameRecord::into_frame)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|m| Error::parse(lineno, format!("{name}: {m}")))?;
        let sample = Sample {
            driver_id: rec.driver,
            aoi_id: rec.aoi_id,
            trigger_time: rec.trigger_time,
            hand: rec.hand,
            frames,
        };
        sample
            .check_window()
            .map_err(|m| Error::parse(lineno, format!("{name} {m}")))?;
        samples.push((lineno, sample));
    }
    let header = header.ok_or_else(|| Error::parse(1, "missing header line"))?;
    let aois = AoiSet::new(aois)?;
    for (lineno, s) in &samples {
        if !aois.contains(s.aoi_id) {
            return Err(Error::parse(
                *lineno,
                format!("unknown aoi id {}", s.aoi_id),
            ));
        }
    }
    let mut ds = Dataset::new(
        header.seat_origin,
        header.fps_nominal,
        aois,
        samples.into_iter().map(|(_, s)| s).collect(),
    )?;
    ds.provenance = header.provenance;
    Ok(ds)
}

/// Reads the `{"aoi": ...}` lines of a dataset file or of a file holding
/// only AOI lines. Other lines are ignored.
pub fn read_aois<R: Read>(r: R) -> Result<AoiSet> {
    let mut aois = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if value.get("aoi").is_none() {
            continue;
        }
        let rec: AoiLine =
            serde_json::from_value(value).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let aoi = build_aoi(rec.aoi.id, rec.aoi.corners)
            .map_err(|e| Error::parse(lineno, format!("aoi {}: {e}", rec.aoi.id)))?;
        aois.push(aoi);
    }
    AoiSet::new(aois)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(f)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_dataset(ds, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Modality, WINDOW_FRAMES};

    fn aois() -> AoiSet {
        AoiSet::new(vec![
            build_aoi(
                1,
                vec![Vec3::new(0.6, -0.3, 0.2), Vec3::new(0.62, -0.32, 0.21)],
            )
            .unwrap(),
            build_aoi(2, vec![Vec3::new(0.8, 0.1, 0.6)]).unwrap(),
        ])
        .unwrap()
    }

    fn sample() -> Sample {
        let frames = (0..WINDOW_FRAMES)
            .map(|i| Frame {
                timestamp: 10.0 + i as f64 / 45.0,
                eye_pos: Vec3::new(0.1, 0.02 * i as f64, 0.63),
                eye_dir: Vec3::new(0.8, -0.36, 0.48),
                head_pos: Vec3::new(0.0, 0.0, 0.7),
                head_rot: EulerAngles::new(-20.1, 3.3, 0.7),
                finger_pos: Vec3::new(0.35, -0.2, 0.31),
                finger_dir: Vec3::new(0.6, 0.0, 0.8),
                valid_eye: true,
                valid_head: true,
                valid_finger: true,
            })
            .collect();
        let mut s = Sample {
            driver_id: "d07".into(),
            aoi_id: 1,
            trigger_time: 10.0 + 3.5 / 45.0,
            hand: Hand::Right,
            frames,
        };
        s.frames[3].invalidate(Modality::Eye);
        s
    }

    fn round_trip(ds: &Dataset) -> Dataset {
        let mut buf = Vec::new();
        write_dataset(ds, &mut buf).unwrap();
        read_dataset(buf.as_slice()).unwrap()
    }

    #[test]
    fn empty_dataset_round_trips() {
        let ds = Dataset::new(Vec3::new(-1.3, 0.37, 0.5), 45.0, aois(), vec![]).unwrap();
        let back = round_trip(&ds);
        assert!(back.is_empty());
        assert_eq!(back, ds);
    }

    #[test]
    fn one_sample_round_trips_bitwise() {
        let mut ds =
            Dataset::new(Vec3::new(-1.3, 0.37, 0.5), 45.0, aois(), vec![sample()]).unwrap();
        ds.provenance = Some(Provenance {
            seed: 7,
            config_hash: "abc".into(),
            tool_version: "0.1.0".into(),
        });
        let back = round_trip(&ds);
        assert_eq!(back, ds);
        assert!(!back.samples[0].frames[3].valid_eye);
        assert_eq!(back.drivers(), vec!["d07".to_string()]);
    }

    #[test]
    fn invalid_fields_are_null_on_disk() {
        let ds = Dataset::new(Vec3::ZERO, 45.0, aois(), vec![sample()]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\"eye_pos\":null"));
        assert!(text
            .lines()
            .next()
            .unwrap()
            .contains("\"schema_version\":1"));
    }

    #[test]
    fn seven_frame_sample_is_rejected() {
        let mut s = sample();
        s.frames.pop();
        let ds = Dataset::new(Vec3::ZERO, 45.0, aois(), vec![s]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        match read_dataset(buf.as_slice()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("driver d07"), "{message}");
                assert!(message.contains("7 frames"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn schema_version_checked() {
        let text = "{\"schema_version\":2,\"seat_origin\":[0,0,0],\"fps_nominal\":45}\n";
        assert!(matches!(
            read_dataset(text.as_bytes()),
            Err(Error::SchemaVersionMismatch {
                found: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn half_null_modality_rejected() {
        let ds = Dataset::new(Vec3::ZERO, 45.0, aois(), vec![sample()]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen(
            "\"eye_dir\":null",
            "\"eye_dir\":[1.0,0.0,0.0]",
            1,
        );
        assert!(matches!(
            read_dataset(text.as_bytes()),
            Err(Error::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn garbage_line_reports_line_number() {
        let text = "{\"schema_version\":1,\"seat_origin\":[0,0,0],\"fps_nominal\":45}\n{\"aoi\":{\"id\":1,\"corners\":[[1,0,0]]}}\nnot json\n";
        assert!(matches!(
            read_dataset(text.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
