//! Acceptance suite: one test per criterion, each printing a PASS line and
//! enforcing its runtime budget. Oracles here are independent of the
//! implementation paths they check (pairwise AuROC counting, an f64 mirror
//! of the forward pass for finite differences, brute-force lattice counts).

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use oodbench_core::augment::{self, AppliedAugmentation, AugmentationKind, AugmentationSpec};
use oodbench_core::math::{logsumexp, softmax};
use oodbench_core::methods::{energy_score, msp_score, odin_score, OodScore};
use oodbench_core::metrics::{auroc, binned_auroc, ScoredRecord};
use oodbench_core::model::{MicroNet, Model, PseudoLabels, HIDDEN};
use oodbench_core::rng::{derive_stream_seed, Rng};
use oodbench_core::runner::{run_experiment, ExperimentConfig, MethodConfig};
use oodbench_core::sample::{Sample, TaskType};
use oodbench_core::synthetic::{
    example_config, generate_dataset, generate_separability_fixture, SyntheticOptions,
};
use oodbench_core::tensor::Tensor;

fn budget(started: Instant, limit: Duration, criterion: &str) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= limit,
        "{criterion} exceeded its runtime budget: {elapsed:?} > {limit:?}"
    );
}

#[test]
fn criterion_1_formula_unit_suite() {
    let started = Instant::now();
    const TOL: f64 = 1e-6;
    let ln2 = std::f64::consts::LN_2;

    // softmax
    let p = softmax(&[0.0, 0.0], 1.0).unwrap();
    assert!((p[0] as f64 - 0.5).abs() < TOL && (p[1] as f64 - 0.5).abs() < TOL);
    let p = softmax(&[4.0f32.ln(), 0.0], 1.0).unwrap();
    assert!((p[0] as f64 - 0.8).abs() < TOL && (p[1] as f64 - 0.2).abs() < TOL);
    let p = softmax(&[1000.0, 0.0], 1.0).unwrap();
    assert!(p.iter().all(|v| v.is_finite()));
    assert!((p[0] as f64 - 1.0).abs() < TOL);

    // logsumexp
    assert!((logsumexp(&[0.0, 0.0]).unwrap() - ln2).abs() < TOL);
    assert!((logsumexp(&[5.0]).unwrap() - 5.0).abs() < TOL);
    assert!((logsumexp(&[1000.0, 1000.0]).unwrap() - (1000.0 + ln2)).abs() < 1e-5);

    // MSP
    let scalar = |s: OodScore| match s {
        OodScore::Scalar(v) => v as f64,
        OodScore::Map(_) => panic!("expected scalar"),
    };
    let logits = |v: &[f32]| Tensor::new(vec![v.len()], v.to_vec()).unwrap();
    assert!((scalar(msp_score(&logits(&[0.0; 4]), 1.0).unwrap()) - 0.25).abs() < TOL);
    let e2 = std::f64::consts::E.powi(2);
    assert!((scalar(msp_score(&logits(&[2.0, 0.0]), 1.0).unwrap()) - e2 / (e2 + 1.0)).abs() < TOL);
    assert!((scalar(msp_score(&logits(&[3.0, -1.0]), 1e6).unwrap()) - 0.5).abs() < 1e-4);

    // Energy confidence
    assert!((scalar(energy_score(&logits(&[0.0, 0.0]), 1.0).unwrap()) - ln2).abs() < TOL);
    assert!((scalar(energy_score(&logits(&[3.0, 3.0]), 1.0).unwrap()) - (3.0 + ln2)).abs() < TOL);
    assert!((scalar(energy_score(&logits(&[1.0, 1.0]), 1.0).unwrap()) - (1.0 + ln2)).abs() < TOL);
    assert!((scalar(energy_score(&logits(&[0.0, 0.0]), 2.0).unwrap()) - 2.0 * ln2).abs() < TOL);

    // Shift and temperature identities on a fixed vector.
    let base = [0.25f32, -1.5, 2.0];
    let shifted = [0.25f32 + 8.0, -1.5 + 8.0, 2.0 + 8.0];
    let a = softmax(&base, 1.0).unwrap();
    let b = softmax(&shifted, 1.0).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((*x as f64 - *y as f64).abs() < TOL);
    }
    assert!((logsumexp(&shifted).unwrap() - logsumexp(&base).unwrap() - 8.0).abs() < 1e-5);
    let halved: Vec<f32> = base.iter().map(|v| v / 2.0).collect();
    let c = softmax(&base, 2.0).unwrap();
    let d = softmax(&halved, 1.0).unwrap();
    for (x, y) in c.iter().zip(&d) {
        assert!((*x as f64 - *y as f64).abs() < TOL);
    }

    budget(started, Duration::from_secs(1), "criterion 1");
    println!("PASS criterion 1: formula unit suite (softmax/logsumexp/MSP/energy, 1e-6)");
}

fn seeded_sample(seed: u64, c: usize, h: usize, w: usize) -> Sample {
    let mut rng = Rng::new(seed);
    let data = (0..c * h * w).map(|_| rng.next_f64() as f32).collect();
    Sample::new("s", Tensor::new(vec![c, h, w], data).unwrap()).unwrap()
}

#[test]
fn criterion_2_odin_identity_at_zero_epsilon() {
    let started = Instant::now();
    let mut pairs = 0;
    let mut seed = 0u64;
    while pairs < 50 {
        let (task, c) = if pairs % 2 == 0 {
            (TaskType::Segmentation, 1)
        } else {
            (TaskType::Classification, 3)
        };
        let net = MicroNet::init(seed, c, 3, task).unwrap();
        let s = seeded_sample(seed + 5000, c, 8, 8);
        seed += 1;
        let odin = odin_score(&s, &net, 1000.0, 0.0).unwrap();
        let msp = msp_score(&net.forward(&s).unwrap().logits, 1000.0).unwrap();
        match (odin, msp) {
            (OodScore::Map(a), OodScore::Map(b)) => {
                for (x, y) in a.data().iter().zip(b.data()) {
                    assert_eq!(x.to_bits(), y.to_bits(), "pair {pairs}");
                }
            }
            (OodScore::Scalar(a), OodScore::Scalar(b)) => {
                assert_eq!(a.to_bits(), b.to_bits(), "pair {pairs}");
            }
            other => panic!("mismatched score shapes: {other:?}"),
        }
        pairs += 1;
    }
    budget(started, Duration::from_secs(5), "criterion 2");
    println!("PASS criterion 2: ODIN with epsilon=0 equals temperature-scaled MSP bit-for-bit on 50 pairs");
}

/// f64 mirror of the MicroNet forward pass and pseudo-label NLL, built from
/// the public weight accessors. Independent of the crate's gradient path.
fn mirror_loss(
    net: &MicroNet,
    image: &[f64],
    c: usize,
    h: usize,
    w: usize,
    labels: &PseudoLabels,
    t: f64,
) -> f64 {
    let hw = h * w;
    let conv_w = net.conv_weight().data();
    let conv_b = net.conv_bias().data();
    let head_w = net.head_weight().data();
    let head_b = net.head_bias().data();
    let k_count = net.classes();
    let mut act = vec![0.0f64; HIDDEN * hw];
    for m in 0..HIDDEN {
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = conv_b[m] as f64;
                for ch in 0..c {
                    for ky in -1isize..=1 {
                        for kx in -1isize..=1 {
                            let (iy, ix) = (y + ky, x + kx);
                            if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let tap = conv_w
                                [((m * c + ch) * 3 + (ky + 1) as usize) * 3 + (kx + 1) as usize];
                            acc += tap as f64 * image[ch * hw + iy as usize * w + ix as usize];
                        }
                    }
                }
                act[m * hw + (y as usize) * w + x as usize] = acc.max(0.0);
            }
        }
    }
    let nll = |col: &[f64], target: usize| {
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + col.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        lse - col[target]
    };
    match labels {
        PseudoLabels::Map { indices, .. } => {
            let mut total = 0.0;
            for p in 0..hw {
                let col: Vec<f64> = (0..k_count)
                    .map(|k| {
                        let mut z = head_b[k] as f64;
                        for m in 0..HIDDEN {
                            z += head_w[k * HIDDEN + m] as f64 * act[m * hw + p];
                        }
                        z / t
                    })
                    .collect();
                total += nll(&col, indices[p]);
            }
            total / hw as f64
        }
        PseudoLabels::Class(target) => {
            let col: Vec<f64> = (0..k_count)
                .map(|k| {
                    let mut z = head_b[k] as f64;
                    for m in 0..HIDDEN {
                        let pooled: f64 = (0..hw).map(|p| act[m * hw + p]).sum::<f64>() / hw as f64;
                        z += head_w[k * HIDDEN + m] as f64 * pooled;
                    }
                    z / t
                })
                .collect();
            nll(&col, *target)
        }
    }
}

/// Central differences are only a valid oracle when no ReLU kink lies inside
/// the +-h stencil; a pre-activation within 3 h max|tap| of zero disqualifies
/// the (net, input) pair.
fn fd_stencil_is_smooth(net: &MicroNet, s: &Sample, h_step: f32) -> bool {
    let pre = net.pre_activations(&s.image);
    let c = net.channels();
    let hw = s.height() * s.width();
    let conv_w = net.conv_weight().data();
    for m in 0..HIDDEN {
        let max_tap = (0..c * 9)
            .map(|i| conv_w[m * c * 9 + i].abs())
            .fold(0.0f32, f32::max);
        let zone = 3.0 * h_step * max_tap;
        for p in 0..hw {
            if pre.data()[m * hw + p].abs() <= zone {
                return false;
            }
        }
    }
    true
}

fn argmax_labels(net: &MicroNet, s: &Sample) -> PseudoLabels {
    oodbench_core::methods::argmax_label(&net.forward(s).unwrap().logits).unwrap()
}

#[test]
fn criterion_3_gradient_oracle() {
    let started = Instant::now();
    let step = 1e-3f64;
    let mut checked = 0usize;
    for (c, want) in [(1usize, 12usize), (3usize, 12usize)] {
        let mut valid = 0;
        let mut seed = 0u64;
        while valid < want {
            let task = if seed % 3 == 2 {
                TaskType::Classification
            } else {
                TaskType::Segmentation
            };
            let net = MicroNet::init(seed.wrapping_add(c as u64 * 1000), c, 3, task).unwrap();
            let s = seeded_sample(seed + 777, c, 8, 8);
            seed += 1;
            if !fd_stencil_is_smooth(&net, &s, step as f32) {
                continue;
            }
            let labels = match task {
                TaskType::Segmentation => argmax_labels(&net, &s),
                TaskType::Classification => PseudoLabels::Class((seed % 3) as usize),
            };
            let analytic = net.input_gradient(&s, &labels, 1.0).unwrap();
            let base: Vec<f64> = s.image.data().iter().map(|&v| v as f64).collect();
            let mut worst = 0.0f64;
            for i in 0..base.len() {
                let mut plus = base.clone();
                plus[i] += step;
                let mut minus = base.clone();
                minus[i] -= step;
                let fd = (mirror_loss(&net, &plus, c, 8, 8, &labels, 1.0)
                    - mirror_loss(&net, &minus, c, 8, 8, &labels, 1.0))
                    / (2.0 * step);
                let a = analytic.data()[i] as f64;
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-4);
                worst = worst.max(rel);
            }
            assert!(
                worst <= 1e-3,
                "C={c} seed {}: worst rel err {worst}",
                seed - 1
            );
            valid += 1;
            checked += 1;
        }
    }
    assert!(checked >= 20);
    budget(started, Duration::from_secs(30), "criterion 3");
    println!(
        "PASS criterion 3: analytic input gradients match f64 finite differences (h=1e-3, \
         rel err <= 1e-3) on {checked} nets (1x8x8 and 3x8x8)"
    );
}

fn pairwise_auroc(scores_in: &[f64], scores_ood: &[f64]) -> f64 {
    let mut credit = 0.0f64;
    for &a in scores_in {
        for &b in scores_ood {
            credit += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    credit / (scores_in.len() * scores_ood.len()) as f64
}

#[test]
fn criterion_4_auroc_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = Rng::new(271828);
    for trial in 0..200 {
        let n_in = 1 + rng.next_index(50);
        let n_ood = 1 + rng.next_index(50);
        // Quantized scores force ties.
        let draw = |rng: &mut Rng, n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| (rng.next_f64() * 12.0).floor() / 12.0)
                .collect()
        };
        let scores_in = draw(&mut rng, n_in);
        let scores_ood = draw(&mut rng, n_ood);
        let fast = auroc(&scores_in, &scores_ood).unwrap();
        let slow = pairwise_auroc(&scores_in, &scores_ood);
        assert_eq!(fast, slow, "trial {trial}: rank-sum diverged from pairwise");
        let reverse = auroc(&scores_ood, &scores_in).unwrap();
        assert_eq!(fast + reverse, 1.0, "trial {trial}: complement identity");
    }
    budget(started, Duration::from_secs(5), "criterion 4");
    println!(
        "PASS criterion 4: rank-sum AuROC equals the pairwise oracle exactly on 200 instances"
    );
}

#[test]
fn criterion_5_mask_semantics() {
    let started = Instant::now();

    // Disk lattice-point oracle: r=10 fully inside a 100x100 image marks
    // exactly 317 pixels; brute-force counted from the sampled center.
    let spec = AugmentationSpec::new(
        AugmentationKind::DarkSpots {
            n_spots: [1, 1],
            radius: [10.0, 10.0],
            darkness: [1.0, 1.0],
        },
        1.0,
    )
    .unwrap();
    let base = Sample::new("m", Tensor::filled(&[1, 100, 100], 0.5)).unwrap();
    let mut interior_checked = 0;
    for seed in 0..40u64 {
        let out = augment::apply(&spec, &base, &mut Rng::new(seed));
        let applied = AppliedAugmentation::from_meta(&out).unwrap();
        let cy: i64 = applied.param("spot0.cy").unwrap().parse().unwrap();
        let cx: i64 = applied.param("spot0.cx").unwrap().parse().unwrap();
        let mut count = 0usize;
        for y in 0..100i64 {
            for x in 0..100i64 {
                if (y - cy).pow(2) + (x - cx).pow(2) <= 100 {
                    count += 1;
                }
            }
        }
        assert_eq!(out.ood_mask.sum_f64() as usize, count, "seed {seed}");
        if (10..90).contains(&cy) && (10..90).contains(&cx) {
            assert_eq!(count, 317, "interior disk must cover 317 lattice points");
            interior_checked += 1;
        }
    }
    assert!(interior_checked > 0, "no interior disk sampled");

    // Every changed pixel is masked, all three kinds, 100 seeded trials.
    let specs = [
        AugmentationSpec::new(
            AugmentationKind::DarkSpots {
                n_spots: [1, 3],
                radius: [2.0, 9.0],
                darkness: [0.3, 1.0],
            },
            1.0,
        )
        .unwrap(),
        AugmentationSpec::new(
            AugmentationKind::PatchOverlay {
                size: [0.1, 0.8],
                value: [0.0, 1.0],
            },
            1.0,
        )
        .unwrap(),
        AugmentationSpec::new(
            AugmentationKind::GaussianNoisePatch {
                sigma: [0.1, 0.7],
                coverage: [0.1, 1.0],
            },
            1.0,
        )
        .unwrap(),
    ];
    let (c, h, w) = (3usize, 24usize, 24usize);
    for trial in 0..100u64 {
        let s = {
            let mut rng = Rng::new(derive_stream_seed(55, "img", trial));
            let data: Vec<f32> = (0..c * h * w).map(|_| rng.next_f64() as f32).collect();
            Sample::new("t", Tensor::new(vec![c, h, w], data).unwrap()).unwrap()
        };
        for (si, spec) in specs.iter().enumerate() {
            let out = augment::apply(
                spec,
                &s,
                &mut Rng::new(derive_stream_seed(56, "aug", trial * 8 + si as u64)),
            );
            for y in 0..h {
                for x in 0..w {
                    let changed = (0..c).any(|ch| {
                        out.image.data()[ch * h * w + y * w + x]
                            != s.image.data()[ch * h * w + y * w + x]
                    });
                    if changed {
                        assert_eq!(
                            out.ood_mask.data()[y * w + x],
                            1.0,
                            "trial {trial} spec {si}: change at ({y},{x}) not masked"
                        );
                    }
                }
            }
        }
    }
    budget(started, Duration::from_secs(10), "criterion 5");
    println!("PASS criterion 5: OoD masks equal the changed-pixel sets (317-pixel disk oracle, 100 trials x 3 kinds)");
}

fn strip_runtime(report_json: &str) -> String {
    let mut value: serde_json::Value = serde_json::from_str(report_json).unwrap();
    value["runtime"] = serde_json::Value::Null;
    serde_json::to_string_pretty(&value).unwrap()
}

fn run_cli(bin: &str, args: &[&str]) -> std::process::Output {
    let out = Command::new(bin)
        .args(args)
        .output()
        .expect("binary spawns");
    assert!(
        out.status.success(),
        "{bin} {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn criterion_6_end_to_end_determinism() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");

    // The bundled seeded generator script produces the 16-sample dataset and
    // a run-ready config.
    run_cli(
        env!("CARGO_BIN_EXE_gen-dataset"),
        &[
            "--out",
            data_dir.to_str().unwrap(),
            "--seed",
            "1",
            "--samples",
            "16",
        ],
    );
    let config_path = data_dir.join("config.json");

    let out_a = dir.path().join("out_a");
    let out_b = dir.path().join("out_b");
    for out in [&out_a, &out_b] {
        run_cli(
            env!("CARGO_BIN_EXE_oodbench"),
            &[
                "run",
                "--config",
                config_path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--plot",
            ],
        );
    }
    let report_a = std::fs::read_to_string(out_a.join("report.json")).unwrap();
    let report_b = std::fs::read_to_string(out_b.join("report.json")).unwrap();
    assert_eq!(
        strip_runtime(&report_a),
        strip_runtime(&report_b),
        "report.json differs between identical runs"
    );
    assert_eq!(
        std::fs::read_to_string(out_a.join("results.csv")).unwrap(),
        std::fs::read_to_string(out_b.join("results.csv")).unwrap()
    );
    let mut svgs = 0;
    for entry in std::fs::read_dir(&out_a).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_str().unwrap().to_string();
        if name.ends_with(".svg") {
            svgs += 1;
            assert_eq!(
                std::fs::read(out_a.join(&name)).unwrap(),
                std::fs::read(out_b.join(&name)).unwrap(),
                "{name} differs between identical runs"
            );
        }
    }
    assert_eq!(svgs, 4, "3 method histograms plus the binned chart");

    // batch_size 4 -> 8 leaves every score unchanged.
    let config_text = std::fs::read_to_string(&config_path).unwrap();
    let mut config: serde_json::Value = serde_json::from_str(&config_text).unwrap();
    config["batch_size"] = serde_json::json!(8);
    let config8_path = data_dir.join("config_batch8.json");
    std::fs::write(
        &config8_path,
        serde_json::to_string_pretty(&config).unwrap(),
    )
    .unwrap();
    let out_c = dir.path().join("out_c");
    run_cli(
        env!("CARGO_BIN_EXE_oodbench"),
        &[
            "run",
            "--config",
            config8_path.to_str().unwrap(),
            "--out",
            out_c.to_str().unwrap(),
        ],
    );
    let a: serde_json::Value = serde_json::from_str(&report_a).unwrap();
    let c: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_c.join("report.json")).unwrap()).unwrap();
    assert_eq!(
        a["per_sample"], c["per_sample"],
        "changing batch_size changed per-sample scores"
    );
    budget(started, Duration::from_secs(30), "criterion 6");
    println!("PASS criterion 6: byte-identical reports and SVGs across runs; batch size does not affect scores");
}

#[test]
fn criterion_7_separability_sanity() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config_path = generate_separability_fixture(dir.path(), 8, 8).unwrap();
    let config = ExperimentConfig::load(&config_path).unwrap();
    let report = run_experiment(&config, dir.path(), None).unwrap();
    let energy = &report.methods["energy"].metrics["auroc"]["all"];
    let msp = &report.methods["max_softmax"].metrics["auroc"]["all"];
    assert_eq!(energy.value, Some(1.0), "energy must separate perfectly");
    assert_eq!(msp.value, Some(0.5), "MSP must tie exactly");
    assert_eq!((energy.n_in, energy.n_ood), (8, 8));
    budget(started, Duration::from_secs(5), "criterion 7");
    println!("PASS criterion 7: energy AuROC = 1.0 and MSP AuROC = 0.5 on the confident-symmetric replay fixture");
}

#[test]
fn criterion_8_fanout_guarantee() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(
        dir.path(),
        1,
        &SyntheticOptions {
            samples: 16,
            width: 16,
            height: 16,
            classes: 3,
        },
        "s",
    )
    .unwrap();
    let full = example_config("manifest.json", 4321);
    let full_report = run_experiment(&full, dir.path(), None).unwrap();
    assert!(!full_report.audit.is_empty());
    for batch in &full_report.audit {
        assert_eq!(batch.hashes.len(), 3, "batch {}", batch.batch);
        let hashes: Vec<&String> = batch.hashes.values().collect();
        assert!(
            hashes.windows(2).all(|w| w[0] == w[1]),
            "batch {} hashes diverged: {:?}",
            batch.batch,
            batch.hashes
        );
    }
    // Each method's per-sample scores match a single-method run.
    for name in ["max_softmax", "energy", "odin"] {
        let mut solo = full.clone();
        solo.methods = vec![MethodConfig {
            name: name.into(),
            temperature: if name == "odin" { Some(1000.0) } else { None },
            epsilon: if name == "odin" { Some(0.01) } else { None },
        }];
        let solo_report = run_experiment(&solo, dir.path(), None).unwrap();
        for (a, b) in full_report.per_sample.iter().zip(&solo_report.per_sample) {
            assert_eq!(a.id, b.id);
            assert_eq!(
                a.scores[name].to_bits(),
                b.scores[name].to_bits(),
                "{name} score differs for sample {}",
                a.id
            );
        }
    }
    budget(started, Duration::from_secs(30), "criterion 8");
    println!("PASS criterion 8: batch hashes equal across 3 methods; per-sample scores match single-method runs");
}

#[test]
fn criterion_9_binned_metric_routing() {
    let started = Instant::now();
    let records: Vec<ScoredRecord> = [
        ("in0", 0.0),
        ("in1", 0.0),
        ("a", 0.05),
        ("b", 0.1),
        ("c", 0.55),
        ("d", 1.0),
    ]
    .iter()
    .enumerate()
    .map(|(i, (id, fraction))| ScoredRecord {
        id: id.to_string(),
        ood_fraction: *fraction,
        score: OodScore::Scalar(1.0 - 0.1 * i as f32),
        ood_mask: None,
    })
    .collect();
    let edges: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let bins = binned_auroc(&records, &edges).unwrap();
    assert_eq!(bins.len(), 10);
    let mut populated = BTreeMap::new();
    for bin in &bins {
        assert_eq!(bin.cell.n_in, 2, "in-population is the two clean samples");
        if bin.cell.n_ood > 0 {
            populated.insert(format!("({},{}]", bin.lo, bin.hi), bin.cell.n_ood);
        } else {
            assert_eq!(bin.cell.value, None);
        }
    }
    let expected: BTreeMap<String, usize> = [
        ("(0,0.1]".to_string(), 2), // 0.05 and exactly 0.1 (right-closed)
        ("(0.5,0.6]".to_string(), 1),
        ("(0.9,1]".to_string(), 1),
    ]
    .into_iter()
    .collect();
    assert_eq!(populated, expected);
    budget(started, Duration::from_secs(1), "criterion 9");
    println!("PASS criterion 9: fractions {{0.05, 0.1, 0.55, 1.0}} route to (0,0.1] x2, (0.5,0.6], (0.9,1.0]");
}
