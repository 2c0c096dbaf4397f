#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use oodeval::tensorio::{write_array, write_image, ArrayBuffer, ArrayData, ImageTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

pub fn oodeval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oodeval"))
        .args(args)
        .env_remove("OODEVAL_THREADS")
        .output()
        .expect("binary runs")
}

/// Runs the binary and panics with its stderr on failure.
pub fn ok(args: &[&str]) -> Output {
    let out = oodeval(args);
    assert!(
        out.status.success(),
        "oodeval {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn npy(path: &Path, shape: &[usize], data: Vec<f64>) {
    write_array(path, &ArrayBuffer::new(shape.to_vec(), ArrayData::F64(data)).unwrap()).unwrap();
}

pub fn npy_u8(path: &Path, shape: &[usize], data: Vec<u8>) {
    write_array(path, &ArrayBuffer::new(shape.to_vec(), ArrayData::U8(data)).unwrap()).unwrap();
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

/// `id,score` rows of a score CSV.
pub fn read_scores(p: &Path) -> Vec<(String, f64)> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (id, v) = l.split_once(',').unwrap();
            (id.to_string(), v.parse().unwrap())
        })
        .collect()
}

pub const CLASSES: usize = 5;
pub const PASSES: usize = 6;

/// A small dataset on disk: in-distribution items have one confident class,
/// anomalies have flat, lower logits.
pub struct Fixture {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub dropout_manifest: PathBuf,
    pub fit: PathBuf,
    pub n: usize,
}

impl Fixture {
    pub fn create(dir: &Path, n: usize, seed: u64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let items = dir.join("items");
        std::fs::create_dir_all(&items).unwrap();
        let logit_row = |rng: &mut ChaCha8Rng, anomalous: bool| -> Vec<f64> {
            let mut row: Vec<f64> = (0..CLASSES).map(|_| noise.sample(rng)).collect();
            if !anomalous {
                let k = rng.random_range(0..CLASSES);
                row[k] += 4.0;
            }
            row
        };
        let mut entries = Vec::new();
        let mut dropout_entries = Vec::new();
        for i in 0..n {
            let anomalous = i % 4 == 0;
            let id = format!("item{i:03}");
            let row = logit_row(&mut rng, anomalous);
            let logits_path = items.join(format!("{id}.npy"));
            npy(&logits_path, &[CLASSES], row.clone());

            let spread = if anomalous { 1.5 } else { 0.3 };
            let passes: Vec<f64> = (0..PASSES)
                .flat_map(|_| row.iter().map(|v| v + spread * noise.sample(&mut rng)).collect::<Vec<_>>())
                .collect();
            let stack_path = items.join(format!("{id}_mc.npy"));
            npy(&stack_path, &[PASSES, CLASSES], passes);

            let (h, w) = (6, 7);
            let img: Vec<f64> = (0..h * w * 3).map(|_| rng.random::<f64>()).collect();
            let err = if anomalous { 0.3 } else { 0.05 };
            let rec: Vec<f64> = img.iter().map(|v| (v + err * noise.sample(&mut rng)).clamp(0.0, 1.0)).collect();
            let image_path = items.join(format!("{id}.png"));
            let recon_path = items.join(format!("{id}_rec.png"));
            write_image(&image_path, &ImageTensor::new(h, w, img).unwrap()).unwrap();
            write_image(&recon_path, &ImageTensor::new(h, w, rec).unwrap()).unwrap();

            let label = u8::from(anomalous);
            entries.push(json!({
                "id": id,
                "logits_path": format!("items/{id}.npy"),
                "label": label,
                "image_path": format!("items/{id}.png"),
                "recon_path": format!("items/{id}_rec.png"),
            }));
            dropout_entries.push(json!({
                "id": id,
                "logits_path": format!("items/{id}_mc.npy"),
                "label": label,
            }));
        }
        let manifest = dir.join("manifest.json");
        let doc = json!({ "version": 1, "metadata": { "source": "synthetic" }, "entries": entries });
        std::fs::write(&manifest, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        let dropout_manifest = dir.join("manifest_mc.json");
        let doc = json!({ "version": 1, "entries": dropout_entries });
        std::fs::write(&dropout_manifest, serde_json::to_string_pretty(&doc).unwrap()).unwrap();

        let n_fit = 200;
        let fit: Vec<f64> = (0..n_fit).flat_map(|_| logit_row(&mut rng, false)).collect();
        let fit_path = dir.join("val_logits.npy");
        npy(&fit_path, &[n_fit, CLASSES], fit);
        Fixture { dir: dir.to_path_buf(), manifest, dropout_manifest, fit: fit_path, n }
    }

    /// Arguments that score this fixture with `detector`.
    pub fn score_args(&self, detector: &str, out: &Path) -> Vec<String> {
        let mut args: Vec<String> = vec!["score".into(), "--detector".into(), detector.into()];
        let manifest = if detector == "dropout" { &self.dropout_manifest } else { &self.manifest };
        args.extend(["--manifest".into(), s(manifest).into()]);
        match detector {
            "kl" | "typicality" | "iforest" | "lof" => args.extend(["--fit".into(), s(&self.fit).into()]),
            "background" => args.extend(["--background-class".into(), "0".into()]),
            _ => {}
        }
        if detector == "lof" {
            args.extend(["--neighbors".into(), "10".into()]);
        }
        args.extend(["--seed".into(), "7".into(), "--out".into(), s(out).into(), "--no-timestamp".into()]);
        args
    }
}

pub const DETECTORS: [&str; 10] =
    ["msp", "maxlogit", "logitavg", "background", "kl", "typicality", "dropout", "ae", "iforest", "lof"];
