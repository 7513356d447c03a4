#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mrhd::io::{self, FeatureFile};
use mrhd::{FrameRecord, GroundTruth, Qid, QueryBundle, Rewrite, VideoFeatureSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mrhd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrhd"))
        .args(args)
        .output()
        .expect("spawn mrhd")
}

pub fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Runs `mrhd pipeline` and returns the parsed metrics.json.
pub fn pipeline(
    videos: &Path,
    queries: &Path,
    annotations: &Path,
    out_dir: &Path,
    jobs: usize,
) -> serde_json::Value {
    let jobs = jobs.to_string();
    let out = mrhd(&[
        "pipeline",
        "--video-features",
        path_str(videos),
        "--query-features",
        path_str(queries),
        "--annotations",
        path_str(annotations),
        "--out-dir",
        path_str(out_dir),
        "--jobs",
        &jobs,
    ]);
    assert!(
        out.status.success(),
        "pipeline failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(out_dir.join("metrics.json")).expect("metrics.json");
    serde_json::from_str(&text).expect("metrics json")
}

/// Copies every video feature file in `src` to `dst` with the frame
/// embeddings permuted by a seeded shuffle. Frame texts and indices stay put.
pub fn shuffle_videos(src: &Path, dst: &Path, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fs::create_dir_all(dst).unwrap();
    let mut files: Vec<PathBuf> = fs::read_dir(src)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    for file in files {
        let FeatureFile::Video(v) = io::load_features(&file).unwrap() else {
            panic!("{} is not a video file", file.display());
        };
        let mut embeddings: Vec<Vec<f64>> =
            v.frames().iter().map(|f| f.embedding().to_vec()).collect();
        embeddings.shuffle(&mut rng);
        let frames = v
            .frames()
            .iter()
            .zip(embeddings)
            .map(|(f, e)| FrameRecord::new(f.index(), f.description(), e).unwrap())
            .collect();
        let shuffled =
            VideoFeatureSet::new(v.video_id(), v.duration_s(), v.clip_stride_s(), frames).unwrap();
        io::save_features(
            dst.join(file.file_name().unwrap()),
            &FeatureFile::Video(shuffled),
        )
        .unwrap();
    }
}

fn random_unit_ish(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// A random corpus: each query pinned to one video, with rewrites and a
/// ground-truth window plus saliency labels.
pub struct Corpus {
    pub videos: Vec<VideoFeatureSet>,
    pub queries: Vec<QueryBundle>,
    pub annotations: Vec<GroundTruth>,
}

pub fn random_corpus(
    seed: u64,
    n_videos: usize,
    n_frames: usize,
    queries_per_video: usize,
    dim: usize,
) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stride = 2.0;
    let duration = n_frames as f64 * stride;
    let mut corpus = Corpus {
        videos: Vec::new(),
        queries: Vec::new(),
        annotations: Vec::new(),
    };
    for v in 0..n_videos {
        let video_id = format!("vid{v:03}");
        let frames = (0..n_frames)
            .map(|i| {
                FrameRecord::new(i, format!("frame {i}"), random_unit_ish(&mut rng, dim)).unwrap()
            })
            .collect();
        corpus
            .videos
            .push(VideoFeatureSet::new(&video_id, duration, stride, frames).unwrap());
        for k in 0..queries_per_video {
            let qid = Qid::Int((v * queries_per_video + k) as i64);
            let rewrites = (0..3)
                .map(|r| {
                    Rewrite::new(
                        format!("rewrite {r}"),
                        random_unit_ish(&mut rng, dim),
                        Some(rng.gen_range(0.0..1.0)),
                    )
                    .unwrap()
                })
                .collect();
            let query = QueryBundle::new(
                qid.clone(),
                format!("query {qid}"),
                random_unit_ish(&mut rng, dim),
                rewrites,
            )
            .unwrap()
            .with_video_id(&video_id);
            corpus.queries.push(query);
            let first = rng.gen_range(0..n_frames - 1);
            let last = rng.gen_range(first + 1..=n_frames.min(first + 40));
            let clips: Vec<usize> = (first..last).collect();
            let labels = clips
                .iter()
                .map(|_| vec![rng.gen_range(0..=4u32); 3])
                .collect();
            let gt = GroundTruth::new(
                qid,
                &video_id,
                "query",
                duration,
                vec![(first as f64 * stride, last as f64 * stride)],
            )
            .unwrap()
            .with_saliency(Some(labels), Some(clips))
            .unwrap();
            corpus.annotations.push(gt);
        }
    }
    corpus
}

/// Writes the corpus as `videos/`, `queries/` and `annotations.jsonl`
/// under `dir`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) {
    fs::create_dir_all(dir.join("videos")).unwrap();
    fs::create_dir_all(dir.join("queries")).unwrap();
    for v in &corpus.videos {
        io::save_features(
            dir.join(format!("videos/{}.jsonl", v.video_id())),
            &FeatureFile::Video(v.clone()),
        )
        .unwrap();
    }
    for q in &corpus.queries {
        io::save_features(
            dir.join(format!("queries/q{}.jsonl", q.qid())),
            &FeatureFile::Query(q.clone()),
        )
        .unwrap();
    }
    io::save_annotations(dir.join("annotations.jsonl"), &corpus.annotations).unwrap();
}
