use mrhd::io::{
    parse_anchor_sets, parse_annotations, parse_features, parse_predictions, parse_profiles,
    write_anchor_sets, write_annotations, write_features, write_predictions, write_profiles,
    AnchorSet, FeatureFile,
};
use mrhd::{
    FrameRecord, GroundTruth, MomentPrediction, Qid, QueryBundle, QueryPrediction, Rewrite,
    SimilarityProfile, SpanAnchor, VideoFeatureSet,
};
use proptest::prelude::*;

fn qid() -> impl Strategy<Value = Qid> {
    prop_oneof![
        any::<i64>().prop_map(Qid::Int),
        "[a-z0-9_]{1,8}".prop_map(Qid::Str)
    ]
}

fn nonzero_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1e3f64..1e3, dim)
        .prop_filter("nonzero", |v| v.iter().any(|x| *x != 0.0))
}

fn prediction() -> impl Strategy<Value = QueryPrediction> {
    (
        qid(),
        proptest::collection::vec((0.0f64..100.0, 0.0f64..50.0, -1e6f64..1e6), 0..6),
        proptest::collection::vec(-10.0f64..10.0, 0..12),
    )
        .prop_map(|(qid, m, saliency)| QueryPrediction {
            qid,
            moments: m
                .into_iter()
                .map(|(s, l, c)| MomentPrediction::new(s, s + l, c).unwrap())
                .collect(),
            saliency,
        })
}

fn roundtrip<T>(
    items: &[T],
    write: impl Fn(&mut Vec<u8>, &[T]),
    parse: impl Fn(&[u8]) -> Vec<T>,
) -> Vec<T> {
    let mut buf = Vec::new();
    write(&mut buf, items);
    parse(&buf)
}

proptest! {
    #[test]
    fn predictions_roundtrip(preds in proptest::collection::vec(prediction(), 0..5)) {
        let back = roundtrip(&preds, |b, p| write_predictions(b, p).unwrap(), |b| parse_predictions(b).unwrap());
        prop_assert_eq!(back, preds);
    }

    #[test]
    fn anchor_sets_roundtrip(
        q in qid(),
        n in 1usize..40,
        runs in proptest::collection::vec((1usize..4, 1usize..4, -1.0f64..1.0), 0..6),
        threshold in -1.0f64..1.0,
    ) {
        let stride = 2.0;
        let mut anchors = Vec::new();
        let mut at = 0;
        for (skip, len, mean) in runs {
            let start = at + skip;
            if start + len > n {
                break;
            }
            anchors.push(SpanAnchor::new(start as f64 * stride, (start + len) as f64 * stride, mean).unwrap());
            at = start + len;
        }
        let set = AnchorSet {
            qid: q,
            video_id: "vid".into(),
            clip_stride_s: stride,
            duration_s: n as f64 * stride,
            threshold,
            anchors,
        };
        let back = roundtrip(std::slice::from_ref(&set), |b, s| write_anchor_sets(b, s).unwrap(), |b| parse_anchor_sets(b).unwrap());
        prop_assert_eq!(back, vec![set]);
    }

    #[test]
    fn profiles_roundtrip(q in qid(), scores in proptest::collection::vec(-1.0f64..=1.0, 1..40), threshold in -1.0f64..1.0) {
        let n = scores.len() as f64;
        let p = SimilarityProfile::new("vid", q, 2.0, 2.0 * n, scores, threshold).unwrap();
        let back = roundtrip(std::slice::from_ref(&p), |b, s| write_profiles(b, s).unwrap(), |b| parse_profiles(b).unwrap());
        prop_assert_eq!(back, vec![p]);
    }

    #[test]
    fn annotations_roundtrip(
        q in qid(),
        windows in proptest::collection::vec((0.0f64..100.0, 0.1f64..20.0), 0..4),
        labels in proptest::collection::vec(proptest::collection::vec(0u32..5, 3), 0..10),
    ) {
        let ids: Vec<usize> = (0..labels.len()).map(|i| 2 * i).collect();
        let gt = GroundTruth::new(q, "vid", "a query", 150.0, windows.iter().map(|&(s, l)| (s, s + l)).collect())
            .unwrap()
            .with_saliency(Some(labels), Some(ids))
            .unwrap();
        let back = roundtrip(std::slice::from_ref(&gt), |b, s| write_annotations(b, s).unwrap(), |b| parse_annotations(b).unwrap());
        prop_assert_eq!(back, vec![gt]);
    }

    #[test]
    fn video_features_roundtrip(embs in proptest::collection::vec(nonzero_vec(3), 1..20), stride in 0.5f64..4.0) {
        let n = embs.len();
        let frames = embs.into_iter().enumerate().map(|(i, e)| FrameRecord::new(i, format!("frame {i}"), e).unwrap()).collect();
        let video = FeatureFile::Video(VideoFeatureSet::new("clip", n as f64 * stride, stride, frames).unwrap());
        let mut buf = Vec::new();
        write_features(&mut buf, &video).unwrap();
        prop_assert_eq!(parse_features(buf.as_slice(), "other").unwrap(), video);
    }

    #[test]
    fn query_features_roundtrip(
        q in qid(),
        original in nonzero_vec(4),
        rewrites in proptest::collection::vec((nonzero_vec(4), proptest::option::of(0.0f64..=1.0)), 0..4),
        pinned in proptest::option::of("[a-z]{1,6}"),
    ) {
        let rewrites = rewrites.into_iter().enumerate()
            .map(|(i, (e, quality))| Rewrite::new(format!("rewrite {i}"), e, quality).unwrap())
            .collect();
        let mut bundle = QueryBundle::new(q, "original text", original, rewrites).unwrap();
        if let Some(v) = pinned {
            bundle = bundle.with_video_id(v);
        }
        let query = FeatureFile::Query(bundle);
        let mut buf = Vec::new();
        write_features(&mut buf, &query).unwrap();
        prop_assert_eq!(parse_features(buf.as_slice(), "x").unwrap(), query);
    }
}

fn json_ish() -> impl Strategy<Value = String> {
    let token = prop_oneof![
        Just("{".to_string()),
        Just("}".to_string()),
        Just("[".to_string()),
        Just("]".to_string()),
        Just(",".to_string()),
        Just(":".to_string()),
        Just("\n".to_string()),
        Just("null".to_string()),
        Just("\"kind\"".to_string()),
        Just("\"video\"".to_string()),
        Just("\"query\"".to_string()),
        Just("\"qid\"".to_string()),
        Just("\"scores\"".to_string()),
        Just("\"anchors\"".to_string()),
        Just("\"embedding\"".to_string()),
        Just("\"relevant_windows\"".to_string()),
        Just("\"pred_relevant_windows\"".to_string()),
        Just("\"duration\"".to_string()),
        Just("\"dim\"".to_string()),
        (-1e3f64..1e3).prop_map(|x| x.to_string()),
        (-5i64..50).prop_map(|x| x.to_string()),
    ];
    proptest::collection::vec(token, 0..40).prop_map(|t| t.concat())
}

proptest! {
    #[test]
    fn loaders_never_panic(text in prop_oneof![any::<String>(), json_ish()]) {
        let bytes = text.as_bytes();
        let _ = parse_predictions(bytes);
        let _ = parse_annotations(bytes);
        let _ = parse_profiles(bytes);
        let _ = parse_anchor_sets(bytes);
        let _ = parse_features(bytes, "f");
    }
}

const VALID: &[&str] = &[
    "{\"qid\":1,\"query\":\"q\",\"duration\":20,\"vid\":\"v\",\"relevant_windows\":[[2,8]],\"relevant_clip_ids\":[1,2],\"saliency_scores\":[[4,4,3],[1,2,3]]}\n",
    "{\"qid\":\"a\",\"pred_relevant_windows\":[[0.0,4.0,0.9],[6.0,8.0,0.1]],\"pred_saliency_scores\":[0.1,0.5]}\n",
    "{\"kind\":\"video\",\"dim\":2,\"stride_s\":2.0}\n{\"index\":0,\"text\":\"a\",\"embedding\":[1.0,0.0]}\n{\"index\":1,\"text\":\"b\",\"embedding\":[0.0,1.0]}\n",
    "{\"kind\":\"query\",\"dim\":2,\"qid\":3}\n{\"role\":\"original\",\"text\":\"q\",\"embedding\":[1.0,0.0]}\n{\"role\":\"rewrite\",\"text\":\"r\",\"embedding\":[0.5,0.5],\"quality\":0.7}\n",
    "{\"qid\":1,\"video_id\":\"v\",\"stride_s\":2.0,\"duration_s\":8.0,\"threshold\":0.3,\"scores\":[0.1,0.5,0.6,0.2],\"marks\":[false,true,true,false]}\n",
    "{\"qid\":1,\"video_id\":\"v\",\"stride_s\":2.0,\"duration_s\":8.0,\"threshold\":0.3,\"anchors\":[[2.0,6.0,0.55]]}\n",
];

fn parse_all(bytes: &[u8]) {
    let _ = parse_predictions(bytes);
    let _ = parse_annotations(bytes);
    let _ = parse_profiles(bytes);
    let _ = parse_anchor_sets(bytes);
    let _ = parse_features(bytes, "f");
}

#[test]
fn valid_samples_parse() {
    assert!(parse_annotations(VALID[0].as_bytes()).is_ok());
    assert!(parse_predictions(VALID[1].as_bytes()).is_ok());
    assert!(parse_features(VALID[2].as_bytes(), "f").is_ok());
    assert!(parse_features(VALID[3].as_bytes(), "f").is_ok());
    assert!(parse_profiles(VALID[4].as_bytes()).is_ok());
    assert!(parse_anchor_sets(VALID[5].as_bytes()).is_ok());
}

proptest! {
    #[test]
    fn mutated_samples_never_panic(which in 0..VALID.len(), cut in 0usize..400, drop in 0usize..400, digit in 0u8..10) {
        let text = VALID[which];
        let cut = cut.min(text.len());
        parse_all(&text.as_bytes()[..cut]);
        let mut bytes = text.as_bytes().to_vec();
        if drop < bytes.len() {
            let removed = bytes.remove(drop);
            parse_all(&bytes);
            bytes.insert(drop, if removed.is_ascii_digit() { b'-' } else { b'0' + digit });
            parse_all(&bytes);
        }
    }
}
