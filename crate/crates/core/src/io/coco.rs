//! Streaming reader for COCO instance annotation files.
//!
//! The file is parsed in one pass without materializing the annotation array:
//! image sizes are indexed first, then each annotation is converted and handed
//! to a callback. Files that list annotations before images are still read,
//! but the annotations are buffered until the image table is known.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;
use std::rc::Rc;

use serde::de::{self, DeserializeSeed, IgnoredAny, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer};
use serde_json::Value;

use super::{InstanceRecord, Segmentation};
use crate::error::{Error, Result};
use crate::mask::{Polygon, RunLengthEncoding};

#[derive(Debug, Clone, Default)]
pub struct CocoFilter {
    pub categories: Option<BTreeSet<i64>>,
    pub max_count: Option<usize>,
    pub include_crowd: bool,
}

/// An annotation that could not be converted; loading continues past it.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordError {
    pub annotation_id: Option<u64>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadSummary {
    /// Records handed to the callback.
    pub records: u64,
    pub crowd_skipped: u64,
    pub category_skipped: u64,
    pub errors: Vec<RecordError>,
}

#[derive(Deserialize)]
struct RawImage {
    id: u64,
    height: usize,
    width: usize,
}

#[derive(Deserialize)]
struct RawAnnotation {
    #[serde(default)]
    id: Option<u64>,
    image_id: u64,
    category_id: i64,
    #[serde(default)]
    iscrowd: Value,
    segmentation: Value,
    #[serde(default)]
    bbox: Option<Vec<f64>>,
    #[serde(default)]
    area: Option<f64>,
}

/// Records where each line starts so parser positions (line, column) can be
/// turned back into byte offsets.
struct LineTracker<R> {
    inner: R,
    consumed: u64,
    line_starts: Rc<RefCell<Vec<u64>>>,
}

impl<R: Read> Read for LineTracker<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        let mut starts = self.line_starts.borrow_mut();
        for (i, _) in buf[..n].iter().enumerate().filter(|(_, &b)| b == b'\n') {
            starts.push(self.consumed + i as u64 + 1);
        }
        self.consumed += n as u64;
        Ok(n)
    }
}

fn byte_offset(line_starts: &[u64], line: usize, column: usize) -> u64 {
    let start = line.checked_sub(1).and_then(|l| line_starts.get(l)).copied().unwrap_or(0);
    start + column.saturating_sub(1) as u64
}

/// Reads `path`, calling `sink` for every record that passes `filter`.
pub fn for_each_record<F>(path: impl AsRef<Path>, filter: &CocoFilter, sink: F) -> Result<LoadSummary>
where
    F: FnMut(InstanceRecord) -> Result<()>,
{
    let file = File::open(path)?;
    read_records(BufReader::with_capacity(1 << 16, file), filter, sink)
}

/// Reads every record into memory.
pub fn load_coco(path: impl AsRef<Path>, filter: &CocoFilter) -> Result<(Vec<InstanceRecord>, LoadSummary)> {
    let mut out = Vec::new();
    let summary = for_each_record(path, filter, |r| {
        out.push(r);
        Ok(())
    })?;
    Ok((out, summary))
}

pub fn read_records<R, F>(reader: R, filter: &CocoFilter, sink: F) -> Result<LoadSummary>
where
    R: Read,
    F: FnMut(InstanceRecord) -> Result<()>,
{
    let line_starts = Rc::new(RefCell::new(vec![0]));
    let tracked = LineTracker {
        inner: reader,
        consumed: 0,
        line_starts: Rc::clone(&line_starts),
    };
    let state = RefCell::new(LoadState {
        filter,
        images: HashMap::new(),
        images_seen: false,
        pending: Vec::new(),
        summary: LoadSummary::default(),
        sink,
        sink_error: None,
    });
    let mut de = serde_json::Deserializer::from_reader(tracked);
    let parsed = (TopLevel { state: &state }).deserialize(&mut de).and_then(|()| de.end());
    let mut state = state.into_inner();
    if let Some(err) = state.sink_error.take() {
        return Err(err);
    }
    if let Err(e) = parsed {
        if e.is_io() {
            return Err(Error::Io(io::Error::new(io::ErrorKind::Other, e.to_string())));
        }
        return Err(Error::Json {
            offset: byte_offset(&line_starts.borrow(), e.line(), e.column()),
            message: e.to_string(),
        });
    }
    for raw in std::mem::take(&mut state.pending) {
        if !state.handle(raw) {
            break;
        }
    }
    if let Some(err) = state.sink_error.take() {
        return Err(err);
    }
    Ok(state.summary)
}

/// Writes `records` as a COCO instances file: one image per distinct
/// `image_id` in first-seen order, annotations in record order, then the
/// given categories.
pub fn write_coco<W: Write>(records: &[InstanceRecord], categories: &[(i64, String)], mut out: W) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    out.write_all(b"{\"images\":[")?;
    let mut first = true;
    for rec in records {
        if !seen.insert(rec.image_id) {
            continue;
        }
        if !std::mem::take(&mut first) {
            out.write_all(b",")?;
        }
        let image = serde_json::json!({"id": rec.image_id, "height": rec.height, "width": rec.width});
        serde_json::to_writer(&mut out, &image).map_err(json_write_error)?;
    }
    out.write_all(b"],\"annotations\":[")?;
    for (i, rec) in records.iter().enumerate() {
        if i > 0 {
            out.write_all(b",")?;
        }
        serde_json::to_writer(&mut out, &annotation_json(rec)).map_err(json_write_error)?;
    }
    out.write_all(b"],\"categories\":[")?;
    for (i, (id, name)) in categories.iter().enumerate() {
        if i > 0 {
            out.write_all(b",")?;
        }
        serde_json::to_writer(&mut out, &serde_json::json!({"id": id, "name": name})).map_err(json_write_error)?;
    }
    out.write_all(b"]}\n")?;
    out.flush()?;
    Ok(())
}

fn annotation_json(rec: &InstanceRecord) -> Value {
    let segmentation = match &rec.segmentation {
        Segmentation::Polygons(polys) => Value::from(polys.iter().map(|p| Value::from(p.to_flat())).collect::<Vec<_>>()),
        Segmentation::Rle(rle) => serde_json::json!({"size": [rle.height, rle.width], "counts": rle.to_compressed()}),
    };
    let mut ann = serde_json::json!({
        "id": rec.id,
        "image_id": rec.image_id,
        "category_id": rec.category_id,
        "iscrowd": u8::from(rec.iscrowd),
        "segmentation": segmentation,
    });
    if let Some(b) = rec.bbox {
        ann["bbox"] = Value::from(b.to_vec());
    }
    if let Some(a) = rec.area {
        ann["area"] = Value::from(a);
    }
    ann
}

fn json_write_error(e: serde_json::Error) -> Error {
    if e.is_io() {
        Error::Io(e.into())
    } else {
        Error::Format(e.to_string())
    }
}

struct LoadState<'f, F> {
    filter: &'f CocoFilter,
    images: HashMap<u64, (usize, usize)>,
    images_seen: bool,
    pending: Vec<RawAnnotation>,
    summary: LoadSummary,
    sink: F,
    sink_error: Option<Error>,
}

impl<F: FnMut(InstanceRecord) -> Result<()>> LoadState<'_, F> {
    fn full(&self) -> bool {
        self.filter
            .max_count
            .is_some_and(|n| self.summary.records >= n as u64)
    }

    /// Converts and emits one annotation. Returns `false` once no more
    /// records are wanted.
    fn handle(&mut self, raw: RawAnnotation) -> bool {
        if self.full() || self.sink_error.is_some() {
            return false;
        }
        if let Some(cats) = &self.filter.categories {
            if !cats.contains(&raw.category_id) {
                self.summary.category_skipped += 1;
                return true;
            }
        }
        let record = match convert(raw, &self.images) {
            Ok(r) => r,
            Err(e) => {
                self.summary.errors.push(e);
                return true;
            }
        };
        if record.iscrowd && !self.filter.include_crowd {
            self.summary.crowd_skipped += 1;
            return true;
        }
        if let Err(e) = (self.sink)(record) {
            self.sink_error = Some(e);
            return false;
        }
        self.summary.records += 1;
        !self.full()
    }
}

fn convert(raw: RawAnnotation, images: &HashMap<u64, (usize, usize)>) -> Result<InstanceRecord, RecordError> {
    let fail = |message: String| RecordError {
        annotation_id: raw.id,
        message,
    };
    let &(height, width) = images
        .get(&raw.image_id)
        .ok_or_else(|| fail(format!("unknown image id {}", raw.image_id)))?;
    if height == 0 || width == 0 {
        return Err(fail(format!("image {} has zero size", raw.image_id)));
    }
    let iscrowd = match &raw.iscrowd {
        Value::Null => false,
        Value::Bool(b) => *b,
        Value::Number(n) => n.as_f64().is_some_and(|v| v != 0.0),
        other => return Err(fail(format!("unsupported iscrowd value {other}"))),
    };
    let segmentation = parse_segmentation(&raw.segmentation, height, width).map_err(fail)?;
    let bbox = match raw.bbox.as_deref() {
        None => None,
        Some([x, y, w, h]) => Some([*x, *y, *w, *h]),
        Some(other) => return Err(fail(format!("bbox has {} entries", other.len()))),
    };
    Ok(InstanceRecord {
        id: raw.id.unwrap_or(0),
        image_id: raw.image_id,
        height,
        width,
        category_id: raw.category_id,
        iscrowd,
        segmentation,
        bbox,
        area: raw.area,
    })
}

fn parse_segmentation(v: &Value, height: usize, width: usize) -> Result<Segmentation, String> {
    match v {
        Value::Array(polys) => {
            let mut out = Vec::with_capacity(polys.len());
            for p in polys {
                let Value::Array(coords) = p else {
                    return Err("polygon is not an array".into());
                };
                let xy = coords
                    .iter()
                    .map(|c| c.as_f64().ok_or_else(|| format!("non-numeric coordinate {c}")))
                    .collect::<Result<Vec<_>, _>>()?;
                out.push(Polygon::from_flat(&xy).map_err(|e| e.to_string())?);
            }
            if out.is_empty() {
                return Err("empty polygon list".into());
            }
            Ok(Segmentation::Polygons(out))
        }
        Value::Object(obj) => {
            let size = obj
                .get("size")
                .and_then(Value::as_array)
                .ok_or("RLE without size")?;
            let dims: Vec<usize> = size
                .iter()
                .filter_map(|d| d.as_u64().map(|d| d as usize))
                .collect();
            let [h, w] = dims[..] else {
                return Err(format!("RLE size {size:?} is not [h, w]"));
            };
            if (h, w) != (height, width) {
                return Err(format!("RLE size {h}x{w} differs from image {height}x{width}"));
            }
            let rle = match obj.get("counts") {
                Some(Value::String(s)) => RunLengthEncoding::from_compressed(h, w, s),
                Some(Value::Array(counts)) => {
                    let counts = counts
                        .iter()
                        .map(|c| {
                            c.as_u64()
                                .and_then(|c| u32::try_from(c).ok())
                                .ok_or_else(|| format!("invalid run length {c}"))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    RunLengthEncoding::new(h, w, counts)
                }
                _ => return Err("RLE without counts".into()),
            };
            rle.map(Segmentation::Rle).map_err(|e| e.to_string())
        }
        other => Err(format!("unknown segmentation shape: {}", type_name(other))),
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

struct TopLevel<'s, 'f, F> {
    state: &'s RefCell<LoadState<'f, F>>,
}

impl<'de, F: FnMut(InstanceRecord) -> Result<()>> DeserializeSeed<'de> for TopLevel<'_, '_, F> {
    type Value = ();

    fn deserialize<D: Deserializer<'de>>(self, d: D) -> Result<(), D::Error> {
        d.deserialize_map(self)
    }
}

impl<'de, F: FnMut(InstanceRecord) -> Result<()>> Visitor<'de> for TopLevel<'_, '_, F> {
    type Value = ();

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a COCO instances object")
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<(), A::Error> {
        while let Some(key) = map.next_key::<String>()? {
            match key.as_str() {
                "images" => {
                    let images: Vec<RawImage> = map.next_value()?;
                    let mut st = self.state.borrow_mut();
                    st.images.extend(images.into_iter().map(|i| (i.id, (i.height, i.width))));
                    st.images_seen = true;
                }
                "annotations" => map.next_value_seed(Annotations { state: self.state })?,
                _ => {
                    map.next_value::<IgnoredAny>()?;
                }
            }
            if self.state.borrow().sink_error.is_some() {
                return Err(de::Error::custom("record sink failed"));
            }
        }
        Ok(())
    }
}

struct Annotations<'s, 'f, F> {
    state: &'s RefCell<LoadState<'f, F>>,
}

impl<'de, F: FnMut(InstanceRecord) -> Result<()>> DeserializeSeed<'de> for Annotations<'_, '_, F> {
    type Value = ();

    fn deserialize<D: Deserializer<'de>>(self, d: D) -> Result<(), D::Error> {
        d.deserialize_seq(self)
    }
}

impl<'de, F: FnMut(InstanceRecord) -> Result<()>> Visitor<'de> for Annotations<'_, '_, F> {
    type Value = ();

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an array of annotations")
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<(), A::Error> {
        let mut wanted = true;
        loop {
            if !wanted {
                if seq.next_element::<IgnoredAny>()?.is_none() {
                    break;
                }
                continue;
            }
            let Some(raw) = seq.next_element::<RawAnnotation>()? else {
                break;
            };
            let mut st = self.state.borrow_mut();
            if st.images_seen {
                wanted = st.handle(raw);
                if st.sink_error.is_some() {
                    return Err(de::Error::custom("record sink failed"));
                }
            } else {
                st.pending.push(raw);
            }
        }
        Ok(())
    }
}
