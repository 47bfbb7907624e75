use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maskcode_core::io::coco::{load_coco, CocoFilter};
use maskcode_core::io::synth::{synth_corpus, CorpusSpec, ShapeFamily};
use maskcode_core::io::{record_to_grid, Segmentation};
use maskcode_core::mask::{iou, rle_decode_compressed};
use tempfile::TempDir;

fn maskcode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskcode")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = maskcode(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &TempDir, name: &str, families: &str, count: usize, seed: u64) -> PathBuf {
    let out = dir.path().join(name);
    ok(&["synth", "--families", families, "--count", &count.to_string(), "--seed", &seed.to_string(), "--out", p(&out)]);
    out
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let a = synth(&dir, "a.json", "blob,donut", 20, 3);
    let b = synth(&dir, "b.json", "blob,donut", 20, 3);
    let c = synth(&dir, "c.json", "blob,donut", 20, 4);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn donut_corpus_is_rle_only() {
    let dir = TempDir::new().unwrap();
    let path = synth(&dir, "d.json", "donut", 15, 0);
    let (records, _) = load_coco(&path, &CocoFilter::default()).unwrap();
    assert_eq!(records.len(), 15);
    assert!(records.iter().all(|r| matches!(r.segmentation, Segmentation::Rle(_))));
}

#[test]
fn emitted_corpus_loads_back_to_the_same_grids() {
    let dir = TempDir::new().unwrap();
    let path = synth(&dir, "all.json", "blob,disk,bar,donut,two-blob,crescent", 10, 11);
    let (records, _) = load_coco(&path, &CocoFilter::default()).unwrap();
    let loaded: Vec<_> = records.iter().map(|r| (record_to_grid(r, 28).unwrap().grid, r.category_id)).collect();
    let spec = CorpusSpec::new(ShapeFamily::ALL.to_vec(), 10, 11);
    let direct: Vec<_> = synth_corpus(&spec).unwrap().collect();
    assert_eq!(loaded, direct);
}

#[test]
fn unknown_family_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = maskcode(&["synth", "--families", "blob,hexagon", "--out", p(&dir.path().join("x.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn too_many_components_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(&dir, "c.json", "blob", 10, 0);
    let cb = dir.path().join("cb.mec");
    let out = maskcode(&["fit", "--annotations", p(&corpus), "--mask-size", "4", "--components", "17", "--out", p(&cb)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!cb.exists());
}

#[test]
fn missing_annotations_is_a_runtime_failure() {
    let dir = TempDir::new().unwrap();
    let out = maskcode(&["fit", "--annotations", p(&dir.path().join("nope.json")), "--out", p(&dir.path().join("cb.mec"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}

#[test]
fn zero_threads_is_rejected() {
    let out = maskcode(&["--threads", "0", "synth", "--out", "unused.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_is_deterministic_and_summarizes() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(&dir, "c.json", "blob,bar", 40, 2);
    let (a, b) = (dir.path().join("a.mec"), dir.path().join("b.mec"));
    let first = ok(&["fit", "--annotations", p(&corpus), "--components", "12", "--out", p(&a)]);
    let second = ok(&["--threads", "3", "fit", "--annotations", p(&corpus), "--components", "12", "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(first.stdout, second.stdout);
    let summary = String::from_utf8(first.stdout).unwrap();
    assert!(summary.contains("records 80"));
    assert!(summary.contains("grids 80"));
    assert!(summary.contains("excluded_crowd 0"));
    let eig = summary.lines().find(|l| l.starts_with("eigenvalues")).unwrap();
    let values: Vec<f64> = eig.split_whitespace().skip(1).map(|v| v.parse().unwrap()).collect();
    assert_eq!(values.len(), 10);
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn class_specific_fit_writes_one_codebook_per_category() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(&dir, "c.json", "blob,disk", 30, 2);
    let out = dir.path().join("books");
    ok(&["fit", "--annotations", p(&corpus), "--components", "8", "--class-specific", "--out", p(&out)]);
    let mut names: Vec<String> =
        std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    let ids = [ShapeFamily::Blob.category_id(), ShapeFamily::Disk.category_id()];
    let mut want = vec!["agnostic.mec".to_string()];
    want.extend(ids.iter().map(|id| format!("category_{id}.mec")));
    want.sort();
    assert_eq!(names, want);
}

#[test]
fn sweep_with_one_component_count_has_one_row() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(&dir, "c.json", "blob", 30, 1);
    let out = ok(&["sweep", "--annotations", p(&corpus), "--components", "10"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn synthetic_sweep_error_is_nonincreasing() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(&dir, "c.json", "blob,disk,bar,donut,two-blob,crescent", 40, 8);
    let plot = dir.path().join("curve.svg");
    let out = ok(&["sweep", "--annotations", p(&corpus), "--plot", p(&plot)]);
    let errs: Vec<f64> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(errs.len(), 10);
    assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{errs:?}");
    let svg = std::fs::read_to_string(&plot).unwrap();
    assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn compare_with_one_codec_has_one_column() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(&dir, "c.json", "disk", 20, 1);
    let out = ok(&["compare", "--annotations", p(&corpus), "--codecs", "polar-36"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.split(',').count() == 2), "{text}");
    assert!(text.starts_with("stat,polar-36\n"));
}

#[test]
fn pca_beats_polar_on_donuts() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(&dir, "d.json", "donut", 100, 4);
    let out = ok(&["compare", "--annotations", p(&corpus), "--codecs", "pca-60,polar-36"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text
        .lines()
        .find(|l| l.starts_with("mean_iou"))
        .unwrap()
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(row[0] > row[1], "{text}");
}

#[test]
fn encode_decode_recovers_the_annotations() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(&dir, "c.json", "blob,disk,bar,donut,two-blob,crescent", 30, 5);
    let (cb, codes, decoded) = (dir.path().join("cb.mec"), dir.path().join("codes.mcc"), dir.path().join("out.json"));
    ok(&["fit", "--annotations", p(&corpus), "--out", p(&cb)]);
    ok(&["encode", "--annotations", p(&corpus), "--codebook", p(&cb), "--out", p(&codes)]);
    ok(&["decode", "--codebook", p(&cb), "--codes", p(&codes), "--out", p(&decoded)]);

    let (records, _) = load_coco(&corpus, &CocoFilter::default()).unwrap();
    let out: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&decoded).unwrap()).unwrap();
    assert_eq!(out.len(), records.len());
    let mut total = 0.0;
    for (rec, dec) in records.iter().zip(&out) {
        assert_eq!(dec["id"], rec.id);
        assert_eq!(dec["image_id"], rec.image_id);
        assert_eq!(dec["category_id"], rec.category_id);
        let size = &dec["segmentation"]["size"];
        assert_eq!(size[0], rec.height);
        assert_eq!(size[1], rec.width);
        let mask = rle_decode_compressed(rec.height, rec.width, dec["segmentation"]["counts"].as_str().unwrap()).unwrap();
        total += iou(&mask, &rec.to_mask().unwrap()).unwrap();
    }
    let mean = total / records.len() as f64;
    assert!(mean >= 0.85, "full-resolution mIoU {mean}");
}

#[test]
fn empty_corpus_encodes_and_decodes_to_nothing() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(&dir, "c.json", "blob", 20, 0);
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, r#"{"images":[],"annotations":[],"categories":[]}"#).unwrap();
    let (cb, codes, decoded) = (dir.path().join("cb.mec"), dir.path().join("codes.mcc"), dir.path().join("out.json"));
    ok(&["fit", "--annotations", p(&corpus), "--components", "5", "--out", p(&cb)]);
    ok(&["encode", "--annotations", p(&empty), "--codebook", p(&cb), "--out", p(&codes)]);
    ok(&["decode", "--codebook", p(&cb), "--codes", p(&codes), "--out", p(&decoded)]);
    let out: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&decoded).unwrap()).unwrap();
    assert!(out.is_empty());
}

#[test]
fn decoding_codes_of_another_size_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(&dir, "c.json", "blob", 20, 0);
    let (small, large) = (dir.path().join("small.mec"), dir.path().join("large.mec"));
    let codes = dir.path().join("codes.mcc");
    ok(&["fit", "--annotations", p(&corpus), "--components", "5", "--out", p(&small)]);
    ok(&["fit", "--annotations", p(&corpus), "--components", "9", "--out", p(&large)]);
    ok(&["encode", "--annotations", p(&corpus), "--codebook", p(&large), "--out", p(&codes)]);
    let out = maskcode(&["decode", "--codebook", p(&small), "--codes", p(&codes), "--out", p(&dir.path().join("o.json"))]);
    assert_eq!(out.status.code(), Some(2));
}
