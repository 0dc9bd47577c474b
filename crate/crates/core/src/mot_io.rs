//! MOT-format text records (`frame,id,left,top,width,height,conf,class,visibility`)
//! and the `key=value` sequence metadata sidecar.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Canvas, Rect};

/// Minimum annotated box area in pixels; smaller boxes are flagged, not dropped.
pub const DEFAULT_MIN_AREA: f64 = 800.0;

/// Track id used by detection-only records.
pub const DETECTION_ID: i64 = -1;

/// One 9-field MOT line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub frame: u32,
    pub track_id: i64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    /// Ground truth: 1 = evaluate, 0 = ignore. Detections: score in `[0, 1]`.
    pub confidence: f64,
    pub class_id: i32,
    pub visibility: f64,
}

impl AnnotationRecord {
    pub fn rect(&self) -> Rect {
        Rect::from_ltwh(self.left, self.top, self.width, self.height)
    }

    pub fn from_rect(frame: u32, track_id: i64, r: &Rect, confidence: f64, class_id: i32) -> Self {
        AnnotationRecord {
            frame,
            track_id,
            left: r.left(),
            top: r.top(),
            width: r.w,
            height: r.h,
            confidence,
            class_id,
            visibility: 1.0,
        }
    }

    /// Ground-truth records with a zero flag take no part in evaluation.
    pub fn is_ignored(&self) -> bool {
        self.confidence == 0.0
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn is_small(&self, min_area: f64) -> bool {
        self.area() < min_area
    }

    fn validate(&self, line: usize) -> Result<()> {
        if self.frame == 0 {
            return Err(Error::validation(format!("line {line}: frame ids start at 1")));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::validation(format!(
                "line {line}: box extent must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::validation(format!(
                "line {line}: visibility {} outside [0, 1]",
                self.visibility
            )));
        }
        let finite = [self.left, self.top, self.width, self.height, self.confidence];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(format!("line {line}: non-finite field")));
        }
        Ok(())
    }
}

const FIELD_NAMES: [&str; 9] = [
    "frame",
    "track_id",
    "left",
    "top",
    "width",
    "height",
    "confidence",
    "class",
    "visibility",
];

fn parse_f64(raw: &str, line: usize, field: usize) -> Result<f64> {
    raw.parse::<f64>().map_err(|_| Error::Parse {
        line,
        field: FIELD_NAMES[field],
        value: raw.to_string(),
    })
}

/// Integers may be written either plainly or with an all-zero fraction (`1.0`).
fn parse_int(raw: &str, line: usize, field: usize) -> Result<i64> {
    if let Ok(v) = raw.parse::<i64>() {
        return Ok(v);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 1e15 => Ok(v as i64),
        _ => Err(Error::Parse {
            line,
            field: FIELD_NAMES[field],
            value: raw.to_string(),
        }),
    }
}

/// Parses one record. `line` is the 1-based line number used in error messages.
pub fn parse_mot_line(text: &str, line: usize) -> Result<AnnotationRecord> {
    let fields: Vec<&str> = text.trim().split(',').map(str::trim).collect();
    if fields.len() != 9 {
        return Err(Error::FieldCount {
            line,
            found: fields.len(),
        });
    }
    let frame = parse_int(fields[0], line, 0)?;
    if !(0..=u32::MAX as i64).contains(&frame) {
        return Err(Error::validation(format!("line {line}: frame id {frame} out of range")));
    }
    let class_id = parse_int(fields[7], line, 7)?;
    let rec = AnnotationRecord {
        frame: frame as u32,
        track_id: parse_int(fields[1], line, 1)?,
        left: parse_f64(fields[2], line, 2)?,
        top: parse_f64(fields[3], line, 3)?,
        width: parse_f64(fields[4], line, 4)?,
        height: parse_f64(fields[5], line, 5)?,
        confidence: parse_f64(fields[6], line, 6)?,
        class_id: i32::try_from(class_id)
            .map_err(|_| Error::validation(format!("line {line}: class id {class_id} out of range")))?,
        visibility: parse_f64(fields[8], line, 8)?,
    };
    rec.validate(line)?;
    Ok(rec)
}

/// Rounds to two decimals, then drops trailing zeros but keeps one decimal.
fn short_2dp(v: f64) -> String {
    let s = format!("{v:.2}");
    match s.strip_suffix('0') {
        Some(t) if !t.ends_with('.') => t.to_string(),
        _ => s,
    }
}

/// Canonical emission at two-decimal precision: the box always with two
/// decimals, an integral confidence (the ground-truth flag) as an integer,
/// other confidences at two decimals, visibility in its shortest form with at
/// least one decimal (`1.0`, `0.5`, `0.25`).
pub fn format_record(r: &AnnotationRecord) -> String {
    let confidence = if r.confidence.fract() == 0.0 && r.confidence.abs() < 1e15 {
        format!("{}", r.confidence as i64)
    } else {
        format!("{:.2}", r.confidence)
    };
    format!(
        "{},{},{:.2},{:.2},{:.2},{:.2},{},{},{}",
        r.frame,
        r.track_id,
        r.left,
        r.top,
        r.width,
        r.height,
        confidence,
        r.class_id,
        short_2dp(r.visibility)
    )
}

/// Parses a whole MOT text body. Blank lines and `#` comments are skipped.
pub fn parse_records(text: &str) -> Result<Vec<AnnotationRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| parse_mot_line(l, i + 1))
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text).map_err(|e| match e {
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Records grouped by frame.
pub type FrameMap = BTreeMap<u32, Vec<AnnotationRecord>>;

/// Groups records by frame, checking frame range and (optionally) identity uniqueness.
fn group(records: Vec<AnnotationRecord>, meta: &SequenceMeta, unique_ids: bool) -> Result<FrameMap> {
    let mut map = FrameMap::new();
    for r in records {
        if r.frame > meta.n_frames {
            return Err(Error::validation(format!(
                "{}: frame {} beyond sequence length {}",
                meta.name, r.frame, meta.n_frames
            )));
        }
        map.entry(r.frame).or_default().push(r);
    }
    if unique_ids {
        for (frame, recs) in map.iter_mut() {
            recs.sort_by_key(|r| r.track_id);
            if let Some(w) = recs.windows(2).find(|w| w[0].track_id == w[1].track_id) {
                return Err(Error::validation(format!(
                    "{}: track id {} appears twice in frame {frame}",
                    meta.name, w[0].track_id
                )));
            }
        }
    }
    Ok(map)
}

/// Ground truth grouped by frame, ordered by track id within a frame.
pub fn ground_truth_from_records(records: Vec<AnnotationRecord>, meta: &SequenceMeta) -> Result<FrameMap> {
    if let Some(r) = records.iter().find(|r| r.confidence != 0.0 && r.confidence != 1.0) {
        return Err(Error::validation(format!(
            "{}: ground-truth flag must be 0 or 1, got {} (frame {}, id {})",
            meta.name, r.confidence, r.frame, r.track_id
        )));
    }
    group(records, meta, true)
}

/// Tracker output grouped by frame; ids must be unique per frame.
pub fn tracks_from_records(records: Vec<AnnotationRecord>, meta: &SequenceMeta) -> Result<FrameMap> {
    group(records, meta, true)
}

/// Detections grouped by frame, ordered by descending confidence.
pub fn detections_from_records(records: Vec<AnnotationRecord>, meta: &SequenceMeta) -> Result<FrameMap> {
    let mut map = group(records, meta, false)?;
    for recs in map.values_mut() {
        recs.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    }
    Ok(map)
}

pub fn load_ground_truth(path: &Path, meta: &SequenceMeta) -> Result<FrameMap> {
    ground_truth_from_records(read_records(path)?, meta)
}

pub fn load_tracks(path: &Path, meta: &SequenceMeta) -> Result<FrameMap> {
    tracks_from_records(read_records(path)?, meta)
}

pub fn load_detections(path: &Path, meta: &SequenceMeta) -> Result<FrameMap> {
    detections_from_records(read_records(path)?, meta)
}

/// A sequence with its optional ground truth and detection streams.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub meta: SequenceMeta,
    pub ground_truth: Option<FrameMap>,
    pub detections: Option<FrameMap>,
}

pub fn load_sequence(gt_path: Option<&Path>, det_path: Option<&Path>, meta: SequenceMeta) -> Result<Sequence> {
    let ground_truth = gt_path.map(|p| load_ground_truth(p, &meta)).transpose()?;
    let detections = det_path.map(|p| load_detections(p, &meta)).transpose()?;
    Ok(Sequence {
        meta,
        ground_truth,
        detections,
    })
}

/// Drops records below `min_area`. Only ever applied on explicit request.
pub fn filter_min_area(map: &FrameMap, min_area: f64) -> FrameMap {
    map.iter()
        .map(|(f, recs)| (*f, recs.iter().filter(|r| !r.is_small(min_area)).copied().collect()))
        .collect()
}

/// Renders records sorted by `(frame, track_id)`.
pub fn render_tracks(records: &[AnnotationRecord]) -> String {
    let mut sorted: Vec<&AnnotationRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.frame, r.track_id));
    let mut out = String::with_capacity(sorted.len() * 48);
    for r in sorted {
        let _ = writeln!(out, "{}", format_record(r));
    }
    out
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::argument(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Writes tracker output as MOT lines, sorted by frame then track id.
pub fn write_tracks(records: &[AnnotationRecord], path: &Path) -> Result<()> {
    if let Some(r) = records.iter().find(|r| !(r.width > 0.0 && r.height > 0.0)) {
        return Err(Error::validation(format!(
            "frame {} track {}: cannot emit a box with non-positive extent",
            r.frame, r.track_id
        )));
    }
    write_atomic(path, render_tracks(records).as_bytes())
}

/// Per-sequence metadata read from a `key=value` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub name: String,
    pub image_width: u32,
    pub image_height: u32,
    pub frame_rate: f64,
    pub n_frames: u32,
    pub panoramic: bool,
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

impl SequenceMeta {
    /// Parses the sidecar. Recognised keys: `name`, `width`, `height`, `fps`,
    /// `frames`, `panoramic`; the MOTChallenge `seqinfo.ini` spellings
    /// (`imWidth`, `imHeight`, `frameRate`, `seqLength`) are accepted too.
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut width = None;
        let mut height = None;
        let mut fps = None;
        let mut frames = None;
        let mut panoramic = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::validation(format!("metadata line {}: expected key=value, got {line:?}", i + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || Error::validation(format!("metadata line {}: bad value for {key}: {value:?}", i + 1));
            match key {
                "name" => name = Some(value.to_string()),
                "width" | "imWidth" => width = Some(value.parse::<u32>().map_err(|_| bad())?),
                "height" | "imHeight" => height = Some(value.parse::<u32>().map_err(|_| bad())?),
                "fps" | "frameRate" => fps = Some(value.parse::<f64>().map_err(|_| bad())?),
                "frames" | "seqLength" => frames = Some(value.parse::<u32>().map_err(|_| bad())?),
                "panoramic" => panoramic = Some(parse_bool(value).ok_or_else(bad)?),
                _ => {}
            }
        }
        let missing = |k: &str| Error::validation(format!("metadata is missing `{k}`"));
        let meta = SequenceMeta {
            name: name.ok_or_else(|| missing("name"))?,
            image_width: width.ok_or_else(|| missing("width"))?,
            image_height: height.ok_or_else(|| missing("height"))?,
            frame_rate: fps.unwrap_or(10.0),
            n_frames: frames.ok_or_else(|| missing("frames"))?,
            panoramic: panoramic.unwrap_or(false),
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SequenceMeta::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::validation(format!("{}: image dimensions must be positive", self.name)));
        }
        if self.n_frames == 0 {
            return Err(Error::validation(format!("{}: sequence has no frames", self.name)));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        format!(
            "name={}\nwidth={}\nheight={}\nfps={}\nframes={}\npanoramic={}\n",
            self.name, self.image_width, self.image_height, self.frame_rate, self.n_frames, self.panoramic
        )
    }

    pub fn canvas(&self) -> Canvas {
        self.canvas_with(self.panoramic)
    }

    pub fn canvas_with(&self, panoramic: bool) -> Canvas {
        Canvas::panorama(self.image_width, self.image_height).with_panoramic(panoramic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta(n: u32) -> SequenceMeta {
        SequenceMeta {
            name: "seq".into(),
            image_width: 2048,
            image_height: 480,
            frame_rate: 10.0,
            n_frames: n,
            panoramic: true,
        }
    }

    #[test]
    fn parses_literal_ground_truth_line() {
        let r = parse_mot_line("1,1,733.67,281.66,34.78,106.81,1,1,1.0", 1).unwrap();
        assert_eq!(r.frame, 1);
        assert_eq!(r.track_id, 1);
        assert_eq!(r.left, 733.67);
        assert_eq!(r.top, 281.66);
        assert_eq!(r.width, 34.78);
        assert_eq!(r.height, 106.81);
        assert_eq!(r.confidence, 1.0);
        assert_eq!(r.class_id, 1);
        assert_eq!(r.visibility, 1.0);
    }

    #[test]
    fn parses_detection_line_with_trailing_whitespace() {
        let r = parse_mot_line("5,-1,0,0,10,10,0.9,2,1.0  \r", 3).unwrap();
        assert_eq!(r.track_id, DETECTION_ID);
        assert_eq!(r.class_id, 2);
        assert_eq!(r.confidence, 0.9);
    }

    #[test]
    fn field_count_error_carries_line() {
        match parse_mot_line("1,1,0,0,10", 1) {
            Err(Error::FieldCount { line: 1, found: 5 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_invalid_extent() {
        assert!(matches!(
            parse_mot_line("1,x,0,0,10,10,1,1,1", 7),
            Err(Error::Parse { line: 7, field: "track_id", .. })
        ));
        assert!(matches!(parse_mot_line("1,1,0,0,0,10,1,1,1", 1), Err(Error::Validation(_))));
        assert!(matches!(parse_mot_line("1,1,0,0,5,-2,1,1,1", 1), Err(Error::Validation(_))));
        assert!(matches!(parse_mot_line("1,1,0,0,5,2,1,1,1.5", 1), Err(Error::Validation(_))));
    }

    #[test]
    fn shortest_visibility() {
        assert_eq!(short_2dp(1.0), "1.0");
        assert_eq!(short_2dp(0.5), "0.5");
        assert_eq!(short_2dp(0.25), "0.25");
        assert_eq!(short_2dp(0.0), "0.0");
        assert_eq!(short_2dp(0.999), "1.0");
    }

    #[test]
    fn emission_format() {
        let r = AnnotationRecord {
            frame: 1,
            track_id: 1,
            left: 10.0,
            top: 20.0,
            width: 30.0,
            height: 40.0,
            confidence: 0.8,
            class_id: 1,
            visibility: 1.0,
        };
        assert_eq!(format_record(&r), "1,1,10.00,20.00,30.00,40.00,0.80,1,1.0");
        assert_eq!(render_tracks(&[]), "");
    }

    #[test]
    fn grouping_and_ignore_flags() {
        let recs = parse_records("# header\n1,1,0,0,10,10,1,1,1\n1,2,5,0,10,10,0,1,1\n\n2,1,1,0,10,10,1,1,1\n").unwrap();
        let gt = ground_truth_from_records(recs, &meta(5)).unwrap();
        assert_eq!(gt.len(), 2);
        assert_eq!(gt[&1].len(), 2);
        assert_eq!(gt[&2].len(), 1);
        assert!(gt[&1][1].is_ignored());
        assert!(!gt[&1][0].is_ignored());
    }

    #[test]
    fn duplicate_identity_and_frame_range_rejected() {
        let dup = parse_records("1,3,0,0,10,10,1,1,1\n1,3,5,5,10,10,1,1,1\n").unwrap();
        assert!(matches!(ground_truth_from_records(dup, &meta(5)), Err(Error::Validation(_))));
        let late = parse_records("9,3,0,0,10,10,1,1,1\n").unwrap();
        assert!(matches!(ground_truth_from_records(late, &meta(5)), Err(Error::Validation(_))));
        let flag = parse_records("1,3,0,0,10,10,0.5,1,1\n").unwrap();
        assert!(ground_truth_from_records(flag, &meta(5)).is_err());
    }

    #[test]
    fn detections_sorted_by_descending_confidence() {
        let recs = parse_records("1,-1,0,0,10,10,0.3,1,1\n1,-1,0,0,10,10,0.9,1,1\n1,-1,0,0,10,10,0.5,1,1\n").unwrap();
        let d = detections_from_records(recs, &meta(2)).unwrap();
        let c: Vec<f64> = d[&1].iter().map(|r| r.confidence).collect();
        assert_eq!(c, vec![0.9, 0.5, 0.3]);
    }

    #[test]
    fn small_boxes_flagged_not_dropped() {
        let recs = parse_records("1,1,0,0,20,30,1,1,1\n1,2,0,0,40,30,1,1,1\n").unwrap();
        let gt = ground_truth_from_records(recs, &meta(1)).unwrap();
        assert_eq!(gt[&1].len(), 2);
        assert!(gt[&1][0].is_small(DEFAULT_MIN_AREA));
        assert!(!gt[&1][1].is_small(DEFAULT_MIN_AREA));
        assert_eq!(filter_min_area(&gt, DEFAULT_MIN_AREA)[&1].len(), 1);
    }

    #[test]
    fn metadata_sidecar() {
        let m = SequenceMeta::parse("name=seq\nwidth=2048\nheight=480\nfps=10\nframes=600\npanoramic=true\n").unwrap();
        assert_eq!(m, SequenceMeta { n_frames: 600, ..meta(600) });
        assert_eq!(SequenceMeta::parse(&m.to_kv()).unwrap(), m);
        let ini = "[Sequence]\nname=MOT17-02\nimWidth=1920\nimHeight=1080\nframeRate=30\nseqLength=600\n";
        let m = SequenceMeta::parse(ini).unwrap();
        assert!(!m.panoramic);
        assert_eq!(m.image_width, 1920);
        assert!(SequenceMeta::parse("name=x\nwidth=0\nheight=1\nframes=1").is_err());
        assert!(SequenceMeta::parse("name=x\nwidth=10\nheight=1").is_err());
    }

    #[test]
    fn write_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        let recs = vec![
            parse_mot_line("2,1,1,1,5,5,0.5,1,1", 1).unwrap(),
            parse_mot_line("1,2,1,1,5,5,0.5,1,1", 1).unwrap(),
            parse_mot_line("1,1,1,1,5,5,0.5,1,1", 1).unwrap(),
        ];
        write_tracks(&recs, &path).unwrap();
        let back = read_records(&path).unwrap();
        let keys: Vec<(u32, i64)> = back.iter().map(|r| (r.frame, r.track_id)).collect();
        assert_eq!(keys, vec![(1, 1), (1, 2), (2, 1)]);
        write_tracks(&[], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "");
        assert!(matches!(
            write_tracks(&recs, &dir.path().join("missing/dir/out.txt")),
            Err(Error::Io { .. })
        ));
    }

    fn two_decimals(lo: i64, hi: i64) -> impl Strategy<Value = f64> {
        (lo..hi).prop_map(|v| v as f64 / 100.0)
    }

    proptest! {
        #[test]
        fn round_trip_at_two_decimals(
            frame in 1u32..10_000,
            id in -1i64..5000,
            left in two_decimals(-5_000, 300_000),
            top in two_decimals(-5_000, 100_000),
            w in two_decimals(1, 100_000),
            h in two_decimals(1, 100_000),
            conf in two_decimals(0, 101),
            class in 1i32..3,
            vis in two_decimals(0, 101),
        ) {
            let r = AnnotationRecord { frame, track_id: id, left, top, width: w, height: h,
                                       confidence: conf, class_id: class, visibility: vis };
            let text = format_record(&r);
            let back = parse_mot_line(&text, 1).unwrap();
            prop_assert_eq!(back, r);
            prop_assert_eq!(format_record(&back), text);
        }
    }
}
