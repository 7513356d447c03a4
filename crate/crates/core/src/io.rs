//! JSONL readers and writers for every on-disk format.
//!
//! * annotations: one query per line,
//!   `{"qid", "vid", "query", "duration", "relevant_windows",
//!   "saliency_scores"?, "relevant_clip_ids"?}`
//! * features: a header line `{"kind": "video"|"query", "dim", "stride_s"?}`
//!   followed by frame records `{"index", "text", "embedding"}` or query
//!   records `{"role": "original"|"rewrite", "text", "embedding", "quality"?}`.
//!   Headers may also carry `video_id`, `duration_s` (video) and `qid`,
//!   `video_id` (query).
//! * similarity profiles and anchor sets, one (video, query) pair per line
//! * predictions: `{"qid", "pred_relevant_windows": [[s, e, conf]],
//!   "pred_saliency_scores": [...]}`
//!
//! Readers never panic on malformed input; every failure names the line and,
//! where there is one, the field.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::types::{
    FrameRecord, GroundTruth, MomentPrediction, Qid, QueryBundle, QueryPrediction, Rewrite,
    SimilarityProfile, SpanAnchor, VideoFeatureSet, DEFAULT_CLIP_STRIDE_S,
};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write(&mut out).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_line(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    let line = serde_json::to_string(value).map_err(|e| Error::field("record", e.to_string()))?;
    writeln!(out, "{line}").map_err(|e| Error::io("<output>", e))
}

/// Non-blank lines parsed as JSON objects, with 1-based line numbers.
fn read_objects(reader: impl BufRead) -> Result<Vec<(usize, Map<String, Value>)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: format!("malformed JSON: {e}"),
        })?;
        match value {
            Value::Object(obj) => out.push((line_no, obj)),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected a JSON object".to_owned(),
                })
            }
        }
    }
    Ok(out)
}

/// Typed field access on one JSON object, errors tagged with the line.
struct Fields<'a> {
    line: usize,
    obj: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn err(&self, field: &str, reason: impl Into<String>) -> Error {
        Error::Schema {
            line: self.line,
            field: field.to_owned(),
            reason: reason.into(),
        }
    }

    fn opt(&self, field: &str) -> Option<&'a Value> {
        self.obj.get(field).filter(|v| !v.is_null())
    }

    fn req(&self, field: &str) -> Result<&'a Value> {
        self.opt(field).ok_or_else(|| self.err(field, "missing"))
    }

    fn f64_of(&self, field: &str, v: &Value) -> Result<f64> {
        v.as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| self.err(field, format!("expected a finite number, got {v}")))
    }

    fn num(&self, field: &str) -> Result<f64> {
        self.f64_of(field, self.req(field)?)
    }

    fn opt_num(&self, field: &str) -> Result<Option<f64>> {
        self.opt(field).map(|v| self.f64_of(field, v)).transpose()
    }

    fn uint_of(&self, field: &str, v: &Value) -> Result<u64> {
        v.as_u64()
            .ok_or_else(|| self.err(field, format!("expected a nonnegative integer, got {v}")))
    }

    fn str(&self, field: &str) -> Result<&'a str> {
        let v = self.req(field)?;
        v.as_str()
            .ok_or_else(|| self.err(field, format!("expected a string, got {v}")))
    }

    fn opt_str(&self, field: &str) -> Result<Option<&'a str>> {
        match self.opt(field) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| self.err(field, format!("expected a string, got {v}"))),
        }
    }

    fn array_of(&self, field: &str, v: &'a Value) -> Result<&'a Vec<Value>> {
        v.as_array()
            .ok_or_else(|| self.err(field, format!("expected an array, got {v}")))
    }

    fn array(&self, field: &str) -> Result<&'a Vec<Value>> {
        self.array_of(field, self.req(field)?)
    }

    fn vector(&self, field: &str) -> Result<Vec<f64>> {
        self.array(field)?
            .iter()
            .map(|v| self.f64_of(field, v))
            .collect()
    }

    fn qid_of(&self, field: &str, v: &Value) -> Result<Qid> {
        match v {
            Value::String(s) => Ok(Qid::Str(s.clone())),
            Value::Number(n) => n
                .as_i64()
                .map(Qid::Int)
                .ok_or_else(|| self.err(field, format!("expected an integer or string, got {v}"))),
            _ => Err(self.err(field, format!("expected an integer or string, got {v}"))),
        }
    }

    fn qid(&self, field: &str) -> Result<Qid> {
        self.qid_of(field, self.req(field)?)
    }

    /// Re-tags a construction error with this line.
    fn wrap(&self, err: Error) -> Error {
        match err {
            Error::InvalidField { field, reason } => self.err(&field, reason),
            Error::LengthMismatch { what, left, right } => {
                self.err(what, format!("has {left} entries, expected {right}"))
            }
            Error::NonFinite { what } => self.err(&what, "non-finite value"),
            other => other,
        }
    }
}

// ---------------------------------------------------------------- annotations

pub fn parse_annotations(reader: impl BufRead) -> Result<Vec<GroundTruth>> {
    read_objects(reader)?
        .iter()
        .map(|(line, obj)| parse_annotation(&Fields { line: *line, obj }))
        .collect()
}

fn parse_annotation(f: &Fields) -> Result<GroundTruth> {
    let qid = f.qid("qid")?;
    let vid = f.str("vid")?;
    let query = f.str("query")?;
    let duration = f.num("duration")?;
    let windows = f
        .array("relevant_windows")?
        .iter()
        .map(|w| {
            let pair = f.array_of("relevant_windows", w)?;
            if pair.len() != 2 {
                return Err(f.err(
                    "relevant_windows",
                    format!("expected [start, end], got {w}"),
                ));
            }
            Ok((
                f.f64_of("relevant_windows", &pair[0])?,
                f.f64_of("relevant_windows", &pair[1])?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let saliency = f
        .opt("saliency_scores")
        .map(|v| {
            f.array_of("saliency_scores", v)?
                .iter()
                .map(|row| {
                    f.array_of("saliency_scores", row)?
                        .iter()
                        .map(|x| {
                            let n = f.uint_of("saliency_scores", x)?;
                            u32::try_from(n)
                                .map_err(|_| f.err("saliency_scores", "label too large"))
                        })
                        .collect::<Result<Vec<u32>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let clip_ids = f
        .opt("relevant_clip_ids")
        .map(|v| {
            f.array_of("relevant_clip_ids", v)?
                .iter()
                .map(|x| {
                    let n = f.uint_of("relevant_clip_ids", x)?;
                    usize::try_from(n).map_err(|_| f.err("relevant_clip_ids", "clip id too large"))
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    GroundTruth::new(qid, vid, query, duration, windows)
        .and_then(|gt| gt.with_saliency(saliency, clip_ids))
        .map_err(|e| f.wrap(e))
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<GroundTruth>> {
    let path = path.as_ref();
    parse_annotations(open(path)?).map_err(|e| io_path(e, path))
}

fn io_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

#[derive(Serialize)]
struct AnnotationLine<'a> {
    qid: &'a Qid,
    query: &'a str,
    duration: f64,
    vid: &'a str,
    relevant_windows: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relevant_clip_ids: Option<&'a [usize]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    saliency_scores: Option<&'a [Vec<u32>]>,
}

pub fn write_annotations(out: &mut dyn Write, gts: &[GroundTruth]) -> Result<()> {
    for gt in gts {
        write_line(
            out,
            &AnnotationLine {
                qid: gt.qid(),
                query: gt.query(),
                duration: gt.duration_s(),
                vid: gt.video_id(),
                relevant_windows: gt.relevant_windows().iter().map(|&(s, e)| [s, e]).collect(),
                relevant_clip_ids: gt.relevant_clip_ids(),
                saliency_scores: gt.saliency_scores(),
            },
        )?;
    }
    Ok(())
}

pub fn save_annotations(path: impl AsRef<Path>, gts: &[GroundTruth]) -> Result<()> {
    write_file(path.as_ref(), |out| write_annotations(out, gts))
}

// ------------------------------------------------------------------- features

/// Contents of one feature file.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureFile {
    Video(VideoFeatureSet),
    Query(QueryBundle),
}

/// Parses a feature file. `default_id` names the video or query when the
/// header does not.
pub fn parse_features(reader: impl BufRead, default_id: &str) -> Result<FeatureFile> {
    let objects = read_objects(reader)?;
    let Some(((header_line, header), records)) = objects.split_first() else {
        return Err(Error::Parse {
            line: 1,
            message: "missing header line".to_owned(),
        });
    };
    let h = Fields {
        line: *header_line,
        obj: header,
    };
    let dim = h.uint_of("dim", h.req("dim")?)? as usize;
    if dim == 0 {
        return Err(h.err("dim", "must be >= 1"));
    }
    let check_dim = |record: usize, line: usize, emb: &[f64]| {
        if emb.len() == dim {
            Ok(())
        } else {
            Err(Error::Record {
                record,
                reason: format!(
                    "line {line}: embedding has dimension {}, header declares {dim}",
                    emb.len()
                ),
            })
        }
    };
    match h.str("kind")? {
        "video" => {
            let stride = h.opt_num("stride_s")?.unwrap_or(DEFAULT_CLIP_STRIDE_S);
            let video_id = h.opt_str("video_id")?.unwrap_or(default_id);
            let mut frames = Vec::with_capacity(records.len());
            for (k, (line, obj)) in records.iter().enumerate() {
                let f = Fields { line: *line, obj };
                let index = f.uint_of("index", f.req("index")?)? as usize;
                let text = f.str("text")?;
                let embedding = f.vector("embedding")?;
                check_dim(k, *line, &embedding)?;
                frames.push(FrameRecord::new(index, text, embedding).map_err(|e| {
                    Error::Record {
                        record: k,
                        reason: format!("line {line}: {e}"),
                    }
                })?);
            }
            let duration = h
                .opt_num("duration_s")?
                .unwrap_or(frames.len() as f64 * stride);
            VideoFeatureSet::new(video_id, duration, stride, frames)
                .map(FeatureFile::Video)
                .map_err(|e| h.wrap(e))
        }
        "query" => {
            let qid = match h.opt("qid") {
                Some(v) => h.qid_of("qid", v)?,
                None => Qid::Str(default_id.to_owned()),
            };
            let mut original: Option<(String, Vec<f64>)> = None;
            let mut rewrites = Vec::new();
            for (k, (line, obj)) in records.iter().enumerate() {
                let f = Fields { line: *line, obj };
                let text = f.str("text")?;
                let embedding = f.vector("embedding")?;
                check_dim(k, *line, &embedding)?;
                match f.str("role")? {
                    "original" => {
                        if original.is_some() {
                            return Err(f.err("role", "second original record"));
                        }
                        original = Some((text.to_owned(), embedding));
                    }
                    "rewrite" => {
                        let quality = f.opt_num("quality")?;
                        rewrites
                            .push(Rewrite::new(text, embedding, quality).map_err(|e| f.wrap(e))?);
                    }
                    other => return Err(f.err("role", format!("unknown role {other:?}"))),
                }
            }
            let (text, embedding) = original.ok_or_else(|| h.err("role", "no original record"))?;
            let mut bundle =
                QueryBundle::new(qid, text, embedding, rewrites).map_err(|e| h.wrap(e))?;
            if let Some(v) = h.opt_str("video_id")? {
                bundle = bundle.with_video_id(v);
            }
            Ok(FeatureFile::Query(bundle))
        }
        other => Err(h.err("kind", format!("unknown kind {other:?}"))),
    }
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureFile> {
    let path = path.as_ref();
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("unnamed");
    parse_features(open(path)?, stem).map_err(|e| io_path(e, path))
}

#[derive(Serialize)]
struct VideoHeader<'a> {
    kind: &'static str,
    dim: usize,
    stride_s: f64,
    video_id: &'a str,
    duration_s: f64,
}

#[derive(Serialize)]
struct FrameLine<'a> {
    index: usize,
    text: &'a str,
    embedding: &'a [f64],
}

#[derive(Serialize)]
struct QueryHeader<'a> {
    kind: &'static str,
    dim: usize,
    qid: &'a Qid,
    #[serde(skip_serializing_if = "Option::is_none")]
    video_id: Option<&'a str>,
}

#[derive(Serialize)]
struct QueryLine<'a> {
    role: &'static str,
    text: &'a str,
    embedding: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    quality: Option<f64>,
}

pub fn write_features(out: &mut dyn Write, features: &FeatureFile) -> Result<()> {
    match features {
        FeatureFile::Video(v) => {
            write_line(
                out,
                &VideoHeader {
                    kind: "video",
                    dim: v.dim().unwrap_or(1),
                    stride_s: v.clip_stride_s(),
                    video_id: v.video_id(),
                    duration_s: v.duration_s(),
                },
            )?;
            for frame in v.frames() {
                write_line(
                    out,
                    &FrameLine {
                        index: frame.index(),
                        text: frame.description(),
                        embedding: frame.embedding(),
                    },
                )?;
            }
        }
        FeatureFile::Query(q) => {
            write_line(
                out,
                &QueryHeader {
                    kind: "query",
                    dim: q.original_embedding().len(),
                    qid: q.qid(),
                    video_id: q.video_id(),
                },
            )?;
            write_line(
                out,
                &QueryLine {
                    role: "original",
                    text: q.original_text(),
                    embedding: q.original_embedding(),
                    quality: None,
                },
            )?;
            for r in q.rewrites() {
                write_line(
                    out,
                    &QueryLine {
                        role: "rewrite",
                        text: r.text(),
                        embedding: r.embedding(),
                        quality: r.quality(),
                    },
                )?;
            }
        }
    }
    Ok(())
}

pub fn save_features(path: impl AsRef<Path>, features: &FeatureFile) -> Result<()> {
    write_file(path.as_ref(), |out| write_features(out, features))
}

// ------------------------------------------------------------------- profiles

#[derive(Serialize)]
struct ProfileLine<'a> {
    qid: &'a Qid,
    video_id: &'a str,
    stride_s: f64,
    duration_s: f64,
    threshold: f64,
    scores: &'a [f64],
    marks: &'a [bool],
}

pub fn write_profiles(out: &mut dyn Write, profiles: &[SimilarityProfile]) -> Result<()> {
    for p in profiles {
        write_line(
            out,
            &ProfileLine {
                qid: p.qid(),
                video_id: p.video_id(),
                stride_s: p.clip_stride_s(),
                duration_s: p.duration_s(),
                threshold: p.threshold(),
                scores: p.scores(),
                marks: p.marks(),
            },
        )?;
    }
    Ok(())
}

pub fn save_profiles(path: impl AsRef<Path>, profiles: &[SimilarityProfile]) -> Result<()> {
    write_file(path.as_ref(), |out| write_profiles(out, profiles))
}

pub fn parse_profiles(reader: impl BufRead) -> Result<Vec<SimilarityProfile>> {
    read_objects(reader)?
        .iter()
        .map(|(line, obj)| {
            let f = Fields { line: *line, obj };
            let scores = f.vector("scores")?;
            let profile = SimilarityProfile::new(
                f.str("video_id")?,
                f.qid("qid")?,
                f.num("stride_s")?,
                f.num("duration_s")?,
                scores,
                f.num("threshold")?,
            )
            .map_err(|e| f.wrap(e))?;
            if let Some(marks) = f.opt("marks") {
                let marks = f
                    .array_of("marks", marks)?
                    .iter()
                    .map(|m| {
                        m.as_bool()
                            .ok_or_else(|| f.err("marks", "expected booleans"))
                    })
                    .collect::<Result<Vec<bool>>>()?;
                if marks != profile.marks() {
                    return Err(f.err("marks", "disagree with scores and threshold"));
                }
            }
            Ok(profile)
        })
        .collect()
}

pub fn load_profiles(path: impl AsRef<Path>) -> Result<Vec<SimilarityProfile>> {
    let path = path.as_ref();
    parse_profiles(open(path)?).map_err(|e| io_path(e, path))
}

// -------------------------------------------------------------------- anchors

/// Anchors extracted from one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub qid: Qid,
    pub video_id: String,
    pub clip_stride_s: f64,
    pub duration_s: f64,
    pub threshold: f64,
    pub anchors: Vec<SpanAnchor>,
}

#[derive(Serialize)]
struct AnchorLine<'a> {
    qid: &'a Qid,
    video_id: &'a str,
    stride_s: f64,
    duration_s: f64,
    threshold: f64,
    anchors: Vec<[f64; 3]>,
}

pub fn write_anchor_sets(out: &mut dyn Write, sets: &[AnchorSet]) -> Result<()> {
    for s in sets {
        write_line(
            out,
            &AnchorLine {
                qid: &s.qid,
                video_id: &s.video_id,
                stride_s: s.clip_stride_s,
                duration_s: s.duration_s,
                threshold: s.threshold,
                anchors: s
                    .anchors
                    .iter()
                    .map(|a| [a.start_s(), a.end_s(), a.mean_score()])
                    .collect(),
            },
        )?;
    }
    Ok(())
}

pub fn save_anchor_sets(path: impl AsRef<Path>, sets: &[AnchorSet]) -> Result<()> {
    write_file(path.as_ref(), |out| write_anchor_sets(out, sets))
}

fn triples(f: &Fields, field: &str) -> Result<Vec<[f64; 3]>> {
    f.array(field)?
        .iter()
        .map(|t| {
            let t = f.array_of(field, t)?;
            if t.len() != 3 {
                return Err(f.err(field, "expected [start, end, score] triples"));
            }
            Ok([
                f.f64_of(field, &t[0])?,
                f.f64_of(field, &t[1])?,
                f.f64_of(field, &t[2])?,
            ])
        })
        .collect()
}

pub fn parse_anchor_sets(reader: impl BufRead) -> Result<Vec<AnchorSet>> {
    read_objects(reader)?
        .iter()
        .map(|(line, obj)| {
            let f = Fields { line: *line, obj };
            let stride = f.num("stride_s")?;
            let duration = f.num("duration_s")?;
            let anchors = triples(&f, "anchors")?
                .into_iter()
                .map(|[s, e, m]| {
                    let a = SpanAnchor::new(s, e, m)?;
                    a.check_within(duration, stride)?;
                    Ok(a)
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| f.wrap(e))?;
            if anchors.windows(2).any(|w| w[0].end_s() > w[1].start_s()) {
                return Err(f.err("anchors", "must be sorted and disjoint"));
            }
            Ok(AnchorSet {
                qid: f.qid("qid")?,
                video_id: f.str("video_id")?.to_owned(),
                clip_stride_s: stride,
                duration_s: duration,
                threshold: f.num("threshold")?,
                anchors,
            })
        })
        .collect()
}

pub fn load_anchor_sets(path: impl AsRef<Path>) -> Result<Vec<AnchorSet>> {
    let path = path.as_ref();
    parse_anchor_sets(open(path)?).map_err(|e| io_path(e, path))
}

// ---------------------------------------------------------------- predictions

#[derive(Serialize)]
struct PredictionLine<'a> {
    qid: &'a Qid,
    pred_relevant_windows: Vec<[f64; 3]>,
    pred_saliency_scores: &'a [f64],
}

pub fn write_predictions(out: &mut dyn Write, preds: &[QueryPrediction]) -> Result<()> {
    for p in preds {
        write_line(
            out,
            &PredictionLine {
                qid: &p.qid,
                pred_relevant_windows: p
                    .moments
                    .iter()
                    .map(|m| [m.start_s(), m.end_s(), m.confidence()])
                    .collect(),
                pred_saliency_scores: &p.saliency,
            },
        )?;
    }
    Ok(())
}

pub fn save_predictions(path: impl AsRef<Path>, preds: &[QueryPrediction]) -> Result<()> {
    write_file(path.as_ref(), |out| write_predictions(out, preds))
}

pub fn parse_predictions(reader: impl BufRead) -> Result<Vec<QueryPrediction>> {
    read_objects(reader)?
        .iter()
        .map(|(line, obj)| {
            let f = Fields { line: *line, obj };
            let moments = triples(&f, "pred_relevant_windows")?
                .into_iter()
                .map(|[s, e, c]| MomentPrediction::new(s, e, c))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| f.wrap(e))?;
            let saliency = match f.opt("pred_saliency_scores") {
                Some(_) => f.vector("pred_saliency_scores")?,
                None => Vec::new(),
            };
            Ok(QueryPrediction {
                qid: f.qid("qid")?,
                moments,
                saliency,
            })
        })
        .collect()
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<QueryPrediction>> {
    let path = path.as_ref();
    parse_predictions(open(path)?).map_err(|e| io_path(e, path))
}
