// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use axmul::nn::io::{write_idx_images, write_idx_labels, write_pgm, IdxImages};
use axmul::nn::{quantize, BundleMetadata, GrayImage, Layer, Network, QuantizedTensor, Task};
use axmul::ProductLut;

fn axmul(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_axmul"))
        .args(args)
        .env("AXMUL_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn manifest(path: &Path) -> serde_json::Value {
    let mut m = path.as_os_str().to_owned();
    m.push(".manifest.json");
    serde_json::from_slice(&std::fs::read(PathBuf::from(m)).unwrap()).unwrap()
}

#[test]
fn compressor_dump_designs() {
    let o = axmul(&["compressor", "dump", "--design", "proposed"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("x4,x3,x2,x1,carry,sum\n"));
    assert!(out.contains("error_rows=1 "));
    assert!(out.contains("error_row x4x3x2x1=1111 exact=4 approx=3 diff=-1"));
    assert!(out.contains("depth=5"));

    let o = axmul(&["compressor", "dump", "--design", "exact"]);
    assert!(stdout(&o).contains("error_rows=0"));
    assert_eq!(
        stdout(&o)
            .lines()
            .filter(|l| l.matches(',').count() == 6)
            .count(),
        17
    );

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("pat.csv");
    let o = axmul(&[
        "compressor",
        "dump",
        "--design",
        "pattern:0,1,2,15",
        "--out",
        p(&csv),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).matches("error_row ").count(), 4);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 17);
    assert_eq!(manifest(&csv)["command"], "compressor dump");
}

#[test]
fn usage_errors_are_single_line_exit_two() {
    for args in [
        &["compressor", "dump", "--design", "wallace"][..],
        &[
            "mult",
            "sweep",
            "--family",
            "exact",
            "--trunc",
            "3",
            "--out-dir",
            "/tmp/x",
        ],
        &["mult", "lut", "--family", "nope", "--out", "/tmp/x.lut"],
        &[
            "nn", "denoise", "--bundle", "b", "--image", "i", "--sigma", "30", "--lut", "l",
            "--out", "o",
        ],
        &["bogus"],
    ] {
        let o = axmul(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("error: kind=usage msg="), "{err}");
    }
}

#[test]
fn runtime_errors_exit_one() {
    let o = axmul(&["report", "compare", "--inputs", "/nonexistent/report.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: kind=io msg="));

    let o = Command::new(env!("CARGO_BIN_EXE_axmul"))
        .args(["compressor", "dump", "--design", "exact"])
        .env("AXMUL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_lut_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let ex = dir.path().join("exact");
    let o = axmul(&["mult", "sweep", "--family", "exact", "--out-dir", p(&ex)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(ex.join("report.csv")).unwrap();
    assert_eq!(
        report.lines().nth(1).unwrap(),
        "EXACT,0.000,0.000,0.000,0,0.000000"
    );
    assert_eq!(
        std::fs::read_to_string(ex.join("histogram.csv")).unwrap(),
        "ed,count\n0,65536\n"
    );
    for f in ["report.csv", "histogram.csv", "plan.txt"] {
        let m = manifest(&ex.join(f));
        assert_eq!(m["outputs"].as_array().unwrap().len(), 3);
        assert_eq!(m["tool_version"], env!("CARGO_PKG_VERSION"));
    }

    let d2 = dir.path().join("d2");
    let o = axmul(&[
        "mult",
        "sweep",
        "--family",
        "design2",
        "--trunc",
        "4",
        "--out-dir",
        p(&d2),
    ]);
    assert!(stdout(&o).contains("compensation=12 (derived)"));

    let pr = dir.path().join("prop");
    axmul(&["mult", "sweep", "--family", "proposed", "--out-dir", p(&pr)]);
    assert_eq!(
        std::fs::read_to_string(pr.join("plan.txt")).unwrap(),
        include_str!("golden/proposed_plan.txt")
    );

    let long = dir.path().join("long.csv");
    let o = axmul(&[
        "report",
        "compare",
        "--inputs",
        p(&ex.join("report.csv")),
        p(&pr.join("report.csv")),
        p(&d2.join("report.csv")),
        "--out",
        p(&long),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("PROPOSED_FULL_APPROX[proposed]"));
    assert!(table.contains("DESIGN2_TRUNCATED[proposed]@w=4"));
    let long = std::fs::read_to_string(&long).unwrap();
    assert_eq!(long.lines().count(), 1 + 3 * 5);
    assert!(long.contains("EXACT,mred,0\n"));

    // identical invocations give identical bytes
    let a = dir.path().join("a.lut");
    let b = dir.path().join("b.lut");
    axmul(&[
        "mult",
        "lut",
        "--family",
        "design1",
        "--threshold",
        "8",
        "--out",
        p(&a),
    ]);
    axmul(&[
        "mult",
        "lut",
        "--family",
        "design1",
        "--threshold",
        "8",
        "--out",
        p(&b),
    ]);
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes.len(), 131_072);
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_eq!(manifest(&a)["config_hash"], manifest(&b)["config_hash"]);
}

#[test]
fn custom_table_flag() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("wide.csv");
    axmul(&[
        "compressor",
        "dump",
        "--design",
        "pattern:0,15",
        "--out",
        p(&csv),
    ]);
    let out = dir.path().join("sweep");
    let o = axmul(&[
        "mult",
        "sweep",
        "--family",
        "proposed",
        "--table",
        p(&csv),
        "--out-dir",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("PROPOSED_FULL_APPROX[wide]"));

    std::fs::write(&csv, "x4,x3,x2,x1,carry,sum\n0,0,0,0,0\n").unwrap();
    let o = axmul(&[
        "mult",
        "sweep",
        "--family",
        "proposed",
        "--table",
        p(&csv),
        "--out-dir",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: kind=table"));
}

fn tiny_classifier(inputs: &[QuantizedTensor]) -> Network {
    let conv: Vec<f32> = (0..3 * 9)
        .map(|i| ((i * 5 % 7) as f32 - 3.0) / 3.0)
        .collect();
    let fc: Vec<f32> = (0..4 * 3 * 3 * 3)
        .map(|i| ((i * 11 % 13) as f32 - 6.0) / 6.0)
        .collect();
    let mut net = Network {
        input_shape: vec![1, 6, 6],
        input_scale: 1.0 / 255.0,
        layers: vec![
            Layer::Conv2d {
                weights: quantize(&conv, &[3, 1, 3, 3]).unwrap(),
                bias: vec![0.05, -0.05, 0.0],
                padding: 1,
                out_scale: 1.0,
            },
            Layer::Relu,
            Layer::Maxpool2,
            Layer::Flatten,
            Layer::Dense {
                weights: quantize(&fc, &[4, 27]).unwrap(),
                bias: vec![0.0, 0.1, -0.1, 0.2],
                out_scale: 1.0,
            },
        ],
        metadata: BundleMetadata {
            source: "cli-test".into(),
            dataset: "synthetic".into(),
            version: "1".into(),
            task: Task::Classify,
            residual: false,
        },
    };
    net.calibrate(inputs, &ProductLut::exact()).unwrap();
    net
}

#[test]
fn nn_infer_counts_correct_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let images: Vec<Vec<u8>> = (0..20u32)
        .map(|k| {
            (0..36u32)
                .map(|i| ((i * 37 + k * 91) % 256) as u8)
                .collect()
        })
        .collect();
    let inputs: Vec<QuantizedTensor> = images
        .iter()
        .map(|px| QuantizedTensor::from_pixels(vec![1, 6, 6], px, 1.0 / 255.0).unwrap())
        .collect();
    let net = tiny_classifier(&inputs);
    let lut = ProductLut::exact();
    let preds: Vec<u8> = images
        .iter()
        .map(|px| net.classify(px, &lut).unwrap() as u8)
        .collect();
    // flip half of the labels so the expected count is known
    let labels: Vec<u8> = preds
        .iter()
        .enumerate()
        .map(|(i, &p)| if i % 2 == 0 { p } else { (p + 1) % 4 })
        .collect();

    let bundle = dir.path().join("net.json");
    std::fs::write(&bundle, net.to_bundle().to_json().unwrap()).unwrap();
    let img_path = dir.path().join("images.idx");
    let lbl_path = dir.path().join("labels.idx");
    std::fs::write(
        &img_path,
        write_idx_images(&IdxImages {
            rows: 6,
            cols: 6,
            data: images.concat(),
        }),
    )
    .unwrap();
    std::fs::write(&lbl_path, write_idx_labels(&labels)).unwrap();
    let lut_path = dir.path().join("exact.lut");
    axmul(&["mult", "lut", "--family", "exact", "--out", p(&lut_path)]);

    let out = dir.path().join("acc.csv");
    let o = axmul(&[
        "nn",
        "infer",
        "--bundle",
        p(&bundle),
        "--images",
        p(&img_path),
        "--labels",
        p(&lbl_path),
        "--lut",
        p(&lut_path),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "total=20 correct=10 percent=50.00\n");
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        "total,correct,percent\n20,10,50.0000\n"
    );

    std::fs::write(&lbl_path, write_idx_labels(&labels[..5])).unwrap();
    let o = axmul(&[
        "nn",
        "infer",
        "--bundle",
        p(&bundle),
        "--images",
        p(&img_path),
        "--labels",
        p(&lbl_path),
        "--lut",
        p(&lut_path),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: kind=input"));
}

#[test]
fn nn_denoise_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let w = QuantizedTensor::from_pixels(vec![1, 1, 1, 1], &[255], 1.0 / 255.0).unwrap();
    let net = Network {
        input_shape: vec![1, 0, 0],
        input_scale: 1.0 / 255.0,
        layers: vec![Layer::Conv2d {
            weights: w,
            bias: vec![0.0],
            padding: 0,
            out_scale: 1.0,
        }],
        metadata: BundleMetadata {
            source: "cli-test".into(),
            dataset: "synthetic".into(),
            version: "1".into(),
            task: Task::Denoise,
            residual: false,
        },
    };
    let bundle = dir.path().join("id.json");
    std::fs::write(&bundle, net.to_bundle().to_json().unwrap()).unwrap();
    let clean = GrayImage::new(16, 16, (0..256).map(|i| (i % 200) as u8 + 20).collect()).unwrap();
    let img = dir.path().join("clean.pgm");
    std::fs::write(&img, write_pgm(&clean)).unwrap();
    let lut = dir.path().join("exact.lut");
    axmul(&["mult", "lut", "--family", "exact", "--out", p(&lut)]);

    let run = |out: &Path, noisy: &Path| {
        axmul(&[
            "nn",
            "denoise",
            "--bundle",
            p(&bundle),
            "--image",
            p(&img),
            "--sigma",
            "25",
            "--lut",
            p(&lut),
            "--out",
            p(out),
            "--noisy-out",
            p(noisy),
        ])
    };
    let (o1, n1) = (dir.path().join("o1.pgm"), dir.path().join("n1.pgm"));
    let (o2, n2) = (dir.path().join("o2.pgm"), dir.path().join("n2.pgm"));
    let r = run(&o1, &n1);
    assert!(r.status.success(), "{}", stderr(&r));
    run(&o2, &n2);
    let line = stdout(&r);
    assert!(line.starts_with("sigma=25 seed=42 noisy_psnr="), "{line}");
    assert_eq!(std::fs::read(&o1).unwrap(), std::fs::read(&o2).unwrap());
    // identity network: output equals the noisy input
    assert_eq!(std::fs::read(&o1).unwrap(), std::fs::read(&n1).unwrap());
    assert_eq!(manifest(&o1)["seed"], 42);
}
