//! Toolkit for paired small-object/container annotation datasets.
//!
//! Label files follow YOLO conventions (one record per line,
//! `class cx cy w h` with coordinates normalized to the image) with the
//! additional pairing rule that records come in consecutive
//! (plate, vehicle) pairs: class 0 first, its class-1 container second.
//! A sidecar CSV manifest (`image_id,width,height,label_path`) carries the
//! pixel dimensions that label files alone cannot provide.
//!
//! Containment violations (a plate not fully inside its vehicle) are
//! counted as warnings, not parse errors: real corpora contain them and
//! must stay loadable.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;
use crate::icr::containment_ratio;

pub const CLASS_PLATE: u8 = 0;
pub const CLASS_VEHICLE: u8 = 1;

/// COCO object-size thresholds in absolute pixel area: small below 32^2,
/// medium below 96^2, large otherwise. Boundary areas go up a class.
pub const SMALL_MAX_AREA_PX2: f64 = 1024.0;
pub const MEDIUM_MAX_AREA_PX2: f64 = 9216.0;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("line {line}: expected 5 whitespace-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: could not parse '{token}' as a number")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: class index must be 0 or 1, got {got}")]
    BadClass { line: usize, got: i64 },
    #[error("line {line}: expected {expected} record (class {class}), got class {got}")]
    OutOfOrder {
        line: usize,
        expected: &'static str,
        class: u8,
        got: u8,
    },
    #[error("unpaired record at line {line}")]
    Unpaired { line: usize },
    #[error("line {line}: {field}={value} outside [0, 1]")]
    CoordRange {
        line: usize,
        field: &'static str,
        value: f64,
    },
    #[error("line {line}: box dimensions must be positive, got w={w}, h={h}")]
    NonPositiveDims { line: usize, w: f64, h: f64 },
    #[error("manifest line {line}: expected 4 comma-separated fields, found {found}")]
    ManifestFields { line: usize, found: usize },
    #[error("manifest line {line}: could not parse '{token}' as a positive integer")]
    ManifestNumber { line: usize, token: String },
    #[error("manifest requires the header 'image_id,width,height,label_path', got '{0}'")]
    ManifestHeader(String),
    #[error("cannot compute statistics over an empty corpus")]
    EmptyCorpus,
    #[error("could not place pair {pair} of image {image} after {attempts} attempts")]
    InfeasiblePlacement {
        image: usize,
        pair: usize,
        attempts: usize,
    },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// One YOLO-style record with normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub class_id: u8,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl AnnotationRecord {
    /// Denormalizes to a pixel-space box.
    pub fn to_pixel_box(&self, width_px: u32, height_px: u32) -> BBox {
        let (w, h) = (width_px as f64, height_px as f64);
        BBox::new(self.cx * w, self.cy * h, self.w * w, self.h * h)
            .expect("validated record denormalizes to a valid box")
    }

    pub fn pixel_area(&self, width_px: u32, height_px: u32) -> f64 {
        self.w * self.h * width_px as f64 * height_px as f64
    }
}

/// A plate and the vehicle it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub plate: AnnotationRecord,
    pub vehicle: AnnotationRecord,
}

/// All pairs of one image plus its pixel dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedImage {
    pub image_id: String,
    pub width_px: u32,
    pub height_px: u32,
    pub pairs: Vec<Pair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

/// Classifies a record by its absolute pixel area against the COCO
/// thresholds.
pub fn classify_size(record: &AnnotationRecord, width_px: u32, height_px: u32) -> SizeClass {
    let area = record.pixel_area(width_px, height_px);
    if area < SMALL_MAX_AREA_PX2 {
        SizeClass::Small
    } else if area < MEDIUM_MAX_AREA_PX2 {
        SizeClass::Medium
    } else {
        SizeClass::Large
    }
}

/// Containment ratio of the pair's plate inside its vehicle, computed on
/// denormalized boxes. A ratio below 1 counts as a violation (a warning,
/// not an error).
pub fn check_containment(pair: &Pair, width_px: u32, height_px: u32) -> f64 {
    containment_ratio(
        pair.plate.to_pixel_box(width_px, height_px),
        pair.vehicle.to_pixel_box(width_px, height_px),
    )
}

fn parse_record(line_no: usize, line: &str) -> Result<AnnotationRecord, DatasetError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(DatasetError::FieldCount {
            line: line_no,
            found: fields.len(),
        });
    }
    let class: i64 = fields[0].parse().map_err(|_| DatasetError::BadNumber {
        line: line_no,
        token: fields[0].into(),
    })?;
    if class != 0 && class != 1 {
        return Err(DatasetError::BadClass {
            line: line_no,
            got: class,
        });
    }
    let mut coords = [0.0f64; 4];
    for (slot, token) in coords.iter_mut().zip(&fields[1..]) {
        *slot = token.parse().map_err(|_| DatasetError::BadNumber {
            line: line_no,
            token: (*token).into(),
        })?;
    }
    let [cx, cy, w, h] = coords;
    for (field, value) in [("cx", cx), ("cy", cy), ("w", w), ("h", h)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(DatasetError::CoordRange {
                line: line_no,
                field,
                value,
            });
        }
    }
    if w <= 0.0 || h <= 0.0 {
        return Err(DatasetError::NonPositiveDims {
            line: line_no,
            w,
            h,
        });
    }
    Ok(AnnotationRecord {
        class_id: class as u8,
        cx,
        cy,
        w,
        h,
    })
}

/// Parses one label file into consecutive (plate, vehicle) pairs.
///
/// Blank lines are skipped but keep their place in the line numbering the
/// diagnostics report. Errors: wrong field counts, unparseable numbers,
/// classes other than 0/1, out-of-order class sequences, coordinates
/// outside [0, 1], and a trailing unpaired record.
pub fn parse_label_file(
    image_id: &str,
    text: &str,
    width_px: u32,
    height_px: u32,
) -> Result<PairedImage, DatasetError> {
    let mut pairs = Vec::new();
    let mut pending_plate: Option<AnnotationRecord> = None;
    let mut pending_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record = parse_record(line_no, raw)?;
        match (&pending_plate, record.class_id) {
            (None, CLASS_PLATE) => {
                pending_plate = Some(record);
                pending_line = line_no;
            }
            (None, got) => {
                return Err(DatasetError::OutOfOrder {
                    line: line_no,
                    expected: "plate",
                    class: CLASS_PLATE,
                    got,
                });
            }
            (Some(plate), CLASS_VEHICLE) => {
                pairs.push(Pair {
                    plate: *plate,
                    vehicle: record,
                });
                pending_plate = None;
            }
            (Some(_), got) => {
                return Err(DatasetError::OutOfOrder {
                    line: line_no,
                    expected: "vehicle",
                    class: CLASS_VEHICLE,
                    got,
                });
            }
        }
    }

    if pending_plate.is_some() {
        return Err(DatasetError::Unpaired { line: pending_line });
    }

    Ok(PairedImage {
        image_id: image_id.to_string(),
        width_px,
        height_px,
        pairs,
    })
}

/// Renders an image's pairs back to label-file text, one record per line in
/// pair order.
pub fn serialize_label_file(image: &PairedImage) -> String {
    let mut out = String::new();
    for pair in &image.pairs {
        for rec in [&pair.plate, &pair.vehicle] {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                rec.class_id, rec.cx, rec.cy, rec.w, rec.h
            ));
        }
    }
    out
}

/// Per-class counts by COCO size class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeCounts {
    pub small: u64,
    pub medium: u64,
    pub large: u64,
}

impl SizeCounts {
    fn bump(&mut self, class: SizeClass) {
        match class {
            SizeClass::Small => self.small += 1,
            SizeClass::Medium => self.medium += 1,
            SizeClass::Large => self.large += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.small + self.medium + self.large
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatesPerImage {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

/// Corpus-level metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_images: usize,
    pub n_plates: usize,
    pub n_vehicles: usize,
    pub plates_per_image: PlatesPerImage,
    /// Smallest plate area in absolute pixels; `None` for a plate-free
    /// corpus.
    pub min_abs_plate_area_px2: Option<f64>,
    /// Smallest plate-area fraction of its image.
    pub min_rel_plate_area: Option<f64>,
    pub plate_sizes: SizeCounts,
    pub vehicle_sizes: SizeCounts,
    pub containment_violations: u64,
}

impl DatasetStats {
    /// Plain-text table for terminal output.
    pub fn render_table(&self) -> String {
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.6e}"),
            None => "n/a".to_string(),
        };
        format!(
            "images                 : {}\n\
             plates / vehicles      : {} / {}\n\
             plates per image       : min {}  max {}  mean {:.4}\n\
             min abs plate area px2 : {}\n\
             min rel plate area     : {}\n\
             plate sizes            : small {}  medium {}  large {}\n\
             vehicle sizes          : small {}  medium {}  large {}\n\
             containment violations : {}\n",
            self.n_images,
            self.n_plates,
            self.n_vehicles,
            self.plates_per_image.min,
            self.plates_per_image.max,
            self.plates_per_image.mean,
            fmt_opt(self.min_abs_plate_area_px2),
            fmt_opt(self.min_rel_plate_area),
            self.plate_sizes.small,
            self.plate_sizes.medium,
            self.plate_sizes.large,
            self.vehicle_sizes.small,
            self.vehicle_sizes.medium,
            self.vehicle_sizes.large,
            self.containment_violations,
        )
    }
}

/// Aggregates corpus statistics. Order-independent over image permutations.
pub fn compute_stats(images: &[PairedImage]) -> Result<DatasetStats, DatasetError> {
    if images.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }

    let mut min_pairs = usize::MAX;
    let mut max_pairs = 0usize;
    let mut total_pairs = 0usize;
    let mut min_abs: Option<f64> = None;
    let mut min_rel: Option<f64> = None;
    let mut plate_sizes = SizeCounts::default();
    let mut vehicle_sizes = SizeCounts::default();
    let mut violations = 0u64;

    for img in images {
        let n = img.pairs.len();
        min_pairs = min_pairs.min(n);
        max_pairs = max_pairs.max(n);
        total_pairs += n;
        let image_area = img.width_px as f64 * img.height_px as f64;
        for pair in &img.pairs {
            let abs = pair.plate.pixel_area(img.width_px, img.height_px);
            let rel = abs / image_area;
            min_abs = Some(min_abs.map_or(abs, |m| m.min(abs)));
            min_rel = Some(min_rel.map_or(rel, |m| m.min(rel)));
            plate_sizes.bump(classify_size(&pair.plate, img.width_px, img.height_px));
            vehicle_sizes.bump(classify_size(&pair.vehicle, img.width_px, img.height_px));
            if check_containment(pair, img.width_px, img.height_px) < 1.0 {
                violations += 1;
            }
        }
    }

    Ok(DatasetStats {
        n_images: images.len(),
        n_plates: total_pairs,
        n_vehicles: total_pairs,
        plates_per_image: PlatesPerImage {
            min: min_pairs,
            max: max_pairs,
            mean: total_pairs as f64 / images.len() as f64,
        },
        min_abs_plate_area_px2: min_abs,
        min_rel_plate_area: min_rel,
        plate_sizes,
        vehicle_sizes,
        containment_violations: violations,
    })
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub label_path: String,
}

pub const MANIFEST_HEADER: &str = "image_id,width,height,label_path";

/// Parses a manifest CSV. The header row is mandatory and checked.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, DatasetError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == MANIFEST_HEADER => {}
        Some((_, header)) => return Err(DatasetError::ManifestHeader(header.to_string())),
        None => return Err(DatasetError::ManifestHeader(String::new())),
    }

    let mut entries = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 4 {
            return Err(DatasetError::ManifestFields {
                line: line_no,
                found: fields.len(),
            });
        }
        let parse_dim = |token: &str| -> Result<u32, DatasetError> {
            match token.trim().parse::<u32>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(DatasetError::ManifestNumber {
                    line: line_no,
                    token: token.into(),
                }),
            }
        };
        entries.push(ManifestEntry {
            image_id: fields[0].trim().to_string(),
            width: parse_dim(fields[1])?,
            height: parse_dim(fields[2])?,
            label_path: fields[3].trim().to_string(),
        });
    }
    Ok(entries)
}

pub fn render_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.image_id, e.width, e.height, e.label_path
        ));
    }
    out
}

fn read_file(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Loads every image listed in a manifest file. Relative label paths
/// resolve against the manifest's directory.
pub fn load_corpus(manifest_path: &Path) -> Result<Vec<PairedImage>, DatasetError> {
    let entries = parse_manifest(&read_file(manifest_path)?)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut images = Vec::with_capacity(entries.len());
    for e in &entries {
        let label_path = base.join(&e.label_path);
        let text = read_file(&label_path)?;
        images.push(parse_label_file(&e.image_id, &text, e.width, e.height)?);
    }
    Ok(images)
}

/// Recipe for a synthetic paired corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_images: usize,
    /// Inclusive range of pairs per image.
    pub pairs_min: usize,
    pub pairs_max: usize,
    pub image_width: u32,
    pub image_height: u32,
    /// Probability that a plate is deliberately placed half outside its
    /// vehicle, for validator tests.
    pub violation_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_images: 10,
            pairs_min: 1,
            pairs_max: 5,
            image_width: 1920,
            image_height: 1080,
            violation_rate: 0.0,
            seed: 0,
        }
    }
}

const PLACEMENT_ATTEMPTS: usize = 100;

/// Generates a deterministic corpus: every non-violating plate is placed
/// strictly inside its vehicle; violating plates straddle the vehicle's
/// left or right edge (containment ratio 0.5).
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<PairedImage>, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut images = Vec::with_capacity(spec.n_images);

    for image_idx in 0..spec.n_images {
        let n_pairs = rng.random_range(spec.pairs_min..=spec.pairs_max);
        let mut pairs = Vec::with_capacity(n_pairs);
        for pair_idx in 0..n_pairs {
            let pair = place_pair(&mut rng, spec).ok_or(DatasetError::InfeasiblePlacement {
                image: image_idx,
                pair: pair_idx,
                attempts: PLACEMENT_ATTEMPTS,
            })?;
            pairs.push(pair);
        }
        images.push(PairedImage {
            image_id: format!("synth-{image_idx:05}"),
            width_px: spec.image_width,
            height_px: spec.image_height,
            pairs,
        });
    }
    Ok(images)
}

fn place_pair(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Option<Pair> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let vw = rng.random_range(0.08..0.35);
        let vh = rng.random_range(0.08..0.35);
        let vcx = rng.random_range(vw / 2.0..1.0 - vw / 2.0);
        let vcy = rng.random_range(vh / 2.0..1.0 - vh / 2.0);

        // plates span small to medium pixel areas
        let pw = vw * rng.random_range(0.05..0.4);
        let ph = pw * rng.random_range(0.25..0.5);
        if ph >= vh * 0.8 || pw <= 0.0 || ph <= 0.0 {
            continue;
        }

        let violate = rng.random_range(0.0..1.0) < spec.violation_rate;
        let (pcx, pcy) = if violate {
            // straddle the left or right vehicle edge, half in half out
            let edge = if rng.random_range(0.0..1.0) < 0.5 {
                vcx - vw / 2.0
            } else {
                vcx + vw / 2.0
            };
            let cy = rng.random_range(vcy - (vh - ph) / 2.0..vcy + (vh - ph) / 2.0);
            (edge, cy)
        } else {
            let room_x = (vw - pw) / 2.0;
            let room_y = (vh - ph) / 2.0;
            (
                rng.random_range(vcx - room_x..vcx + room_x),
                rng.random_range(vcy - room_y..vcy + room_y),
            )
        };

        // keep the plate inside the image
        if pcx - pw / 2.0 < 0.0
            || pcx + pw / 2.0 > 1.0
            || pcy - ph / 2.0 < 0.0
            || pcy + ph / 2.0 > 1.0
        {
            continue;
        }

        return Some(Pair {
            plate: AnnotationRecord {
                class_id: CLASS_PLATE,
                cx: pcx,
                cy: pcy,
                w: pw,
                h: ph,
            },
            vehicle: AnnotationRecord {
                class_id: CLASS_VEHICLE,
                cx: vcx,
                cy: vcy,
                w: vw,
                h: vh,
            },
        });
    }
    None
}
