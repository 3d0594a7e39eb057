//! Acceptance suite: one PASS/FAIL line per criterion.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use pam_cli::bench::{inject_memory, median, time_match};
use pam_cli::{cmd_run, cmd_synth, ConfigArgs, RunArgs, SynthArgs};
use pam_core::encoder::{EncoderWeights, FrameEncoder, SeededConvEncoder, Widths};
use pam_core::evalkit::{
    boundary_f, boundary_pixels, generate_clip, jaccard, ClipSpec, MotionSpec,
};
use pam_core::pam::{
    cosine_similarity, memory_init, memory_match, update_count, FrameObservation, TriggerPolicy,
    TriggerThresholds, VariationAwareTrigger,
};
use pam_core::pipeline::{segment_sequence, RunReport, SequenceConfig, SequenceRunner};
use pam_core::tensor::{conv2d, depth_to_space, softmax_rows, space_to_depth};
use pam_core::{Frame, MaskMap, StrategyRegistry, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// Dense non-local read in f64 over explicit key/value rows.
fn dense_read(q: &Tensor, keys: &[Vec<f32>], values: &[Vec<f32>]) -> Vec<f64> {
    let ck = keys[0].len();
    let mut out = Vec::new();
    for qrow in q.data().chunks_exact(ck) {
        let logits: Vec<f64> = keys
            .iter()
            .map(|k| k.iter().zip(qrow).map(|(&a, &b)| a as f64 * b as f64).sum())
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        for c in 0..values[0].len() {
            out.push(
                w.iter()
                    .zip(values)
                    .map(|(a, v)| a * v[c] as f64)
                    .sum::<f64>()
                    / z,
            );
        }
    }
    out
}

fn pixel_rows(t: &Tensor) -> Vec<Vec<f32>> {
    let c = *t.shape().last().unwrap();
    t.data().chunks_exact(c).map(<[f32]>::to_vec).collect()
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let spec = ClipSpec {
        shape: pam_core::evalkit::SpriteShape::Square { side: 24.0 },
        motion: MotionSpec::translation(3.0, 2.0),
        ..ClipSpec::default()
    };
    let clip = generate_clip(11, 6, 64, 64, &spec).map_err(|e| e.to_string())?;
    let cfg = SequenceConfig {
        encoder: "seeded".into(),
        decoder: "refine".into(),
        trigger: "every".into(),
        beta: 1.0,
        seed: 5,
        ..SequenceConfig::default()
    };
    // independent encoder with the same seed
    let oracle = SeededConvEncoder::new(Arc::new(EncoderWeights::seeded(5, Widths::default())))
        .map_err(|e| e.to_string())?;
    let registry = StrategyRegistry::builtin();
    let mut runner = SequenceRunner::start(&registry, cfg, &clip.frames[0], &clip.gt_masks[0])
        .map_err(|e| e.to_string())?;
    let (mut keys, mut values) = (Vec::new(), Vec::new());
    let mut masks = vec![clip.gt_masks[0].clone()];
    let mut worst = 0.0f64;
    for t in 0..clip.len() {
        // memory must hold the LAE encoding of every frame so far
        let q = oracle
            .encode_query(&clip.frames[t])
            .map_err(|e| e.to_string())?;
        if t > 0 {
            let got = memory_match(&q.key, &q.value, runner.memory()).map_err(|e| e.to_string())?;
            let want = dense_read(&q.key, &keys, &values);
            let cv = values[0].len();
            let read: Vec<f64> = got
                .data()
                .chunks_exact(2 * cv)
                .flat_map(|px| px[..cv].iter().map(|&v| v as f64))
                .collect();
            let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-30);
            let err = read
                .iter()
                .zip(&want)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                / scale;
            worst = worst.max(err);
            let qv_ok = got
                .data()
                .chunks_exact(2 * cv)
                .zip(q.value.data().chunks_exact(cv))
                .all(|(px, v)| &px[cv..] == v);
            check(qv_ok, format!("frame {t}: query value half differs"))?;
            let r = runner.step(&clip.frames[t]).map_err(|e| e.to_string())?;
            masks.push(r.mask.clone());
        }
        let (k, v) = oracle
            .encode_reference(&q.pyramid, &masks[t])
            .map_err(|e| e.to_string())?;
        keys.extend(pixel_rows(&k));
        values.extend(pixel_rows(&v));
    }
    let mem = runner.memory();
    check(
        mem.len() == 6 * 16,
        format!("memory size {} != 96", mem.len()),
    )?;
    let same = (0..mem.len())
        .all(|i| mem.key(i) == keys[i].as_slice() && mem.value(i) == values[i].as_slice());
    check(same, "memory differs from the full-frame concatenation")?;
    let secs = started.elapsed().as_secs_f64();
    check(worst <= 1e-5, format!("relative error {worst:.3e} > 1e-5"))?;
    check(secs < 10.0, format!("runtime {secs:.2}s ≥ 10s"))?;
    Ok(format!(
        "max relative error {worst:.2e}, memory 96 entries, {secs:.2}s"
    ))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let q = random(&[8, 8, 32], &mut rng);
    let qv = random(&[8, 8, 128], &mut rng);
    let small = inject_memory(32, 128, 10_000, 1).map_err(|e| e.to_string())?;
    let large = inject_memory(32, 128, 20_000, 1).map_err(|e| e.to_string())?;
    let reps = 25;
    time_match(&q, &qv, &large, 2).map_err(|e| e.to_string())?;
    let mut a = time_match(&q, &qv, &small, reps).map_err(|e| e.to_string())?;
    let mut b = time_match(&q, &qv, &large, reps).map_err(|e| e.to_string())?;
    let (ma, mb) = (median(&mut a), median(&mut b));
    let ratio = mb / ma;
    check(
        (1.5..=3.0).contains(&ratio),
        format!("median ratio {ratio:.3} outside [1.5, 3.0] ({ma:.3} ms vs {mb:.3} ms)"),
    )?;
    Ok(format!(
        "median {ma:.3} ms @1e4 vs {mb:.3} ms @2e4, ratio {ratio:.3} over {reps} reps"
    ))
}

fn criterion_3() -> Outcome {
    let spec = ClipSpec {
        motion: MotionSpec {
            window: Some((5, 8)),
            ..MotionSpec::translation(4.0, 0.0)
        },
        ..ClipSpec::default()
    };
    let clip = generate_clip(3, 20, 256, 256, &spec).map_err(|e| e.to_string())?;
    let run = |trigger: &str, beta: f64| {
        let cfg = SequenceConfig {
            trigger: trigger.into(),
            beta,
            ..SequenceConfig::default()
        };
        segment_sequence(&clip.frames, &clip.gt_masks[0], &cfg).map_err(|e| e.to_string())
    };
    let var = run("var", 0.10)?;
    let periodic = run("periodic=5", 1.0)?;
    let fired: Vec<usize> = var
        .frames
        .iter()
        .filter(|f| f.triggered)
        .map(|f| f.index)
        .collect();
    check(
        fired.iter().all(|t| (5..=9).contains(t)),
        format!("triggers outside frames 5..=9: {fired:?}"),
    )?;
    check(
        var.final_memory < periodic.final_memory,
        format!(
            "memory {} not < periodic {}",
            var.final_memory, periodic.final_memory
        ),
    )?;
    Ok(format!(
        "triggers at {fired:?}; memory {} vs periodic(5) full {}",
        var.final_memory, periodic.final_memory
    ))
}

fn criterion_4() -> Outcome {
    let spec = ClipSpec {
        start: Some([64.0, 192.0]),
        ..ClipSpec::default()
    };
    let clip = generate_clip(4, 30, 384, 384, &spec).map_err(|e| e.to_string())?;
    let betas = [0.025, 0.05, 0.10, 0.20, 1.0];
    let runs = 5;
    let mut sizes = Vec::new();
    let mut times = Vec::new();
    for &beta in &betas {
        let cfg = SequenceConfig {
            beta,
            ..SequenceConfig::default()
        };
        let mut match_ms = Vec::new();
        let mut report: Option<RunReport> = None;
        for _ in 0..runs {
            let r = segment_sequence(&clip.frames, &clip.gt_masks[0], &cfg)
                .map_err(|e| e.to_string())?;
            match_ms.push(r.match_ms());
            report = Some(r);
        }
        let r = report.unwrap();
        let want = update_count(beta, 576);
        let bad = r
            .frames
            .iter()
            .skip(1)
            .find(|f| f.appended != if f.triggered { want } else { 0 });
        if let Some(f) = bad {
            return Err(format!(
                "beta {beta}: frame {} appended {} (want {want})",
                f.index, f.appended
            ));
        }
        check(r.triggers > 0, format!("beta {beta}: no triggers"))?;
        sizes.push(r.final_memory);
        times.push(median(&mut match_ms));
    }
    check(
        sizes.windows(2).all(|w| w[0] < w[1]),
        format!("final memory not strictly increasing in beta: {sizes:?}"),
    )?;
    check(
        times.windows(2).all(|w| w[0] <= w[1]),
        format!("match time not non-increasing as beta decreases: {times:.1?} ms"),
    )?;
    Ok(format!(
        "final memory {sizes:?}; median total match ms {times:.1?}"
    ))
}

fn criterion_5() -> Outcome {
    // vertically centred, far enough left to translate all 30 frames
    let spec = ClipSpec {
        start: Some([48.0, 128.0]),
        ..ClipSpec::default()
    };
    let clip = generate_clip(0, 30, 256, 256, &spec).map_err(|e| e.to_string())?;
    let started = Instant::now();
    let mut r = segment_sequence(&clip.frames, &clip.gt_masks[0], &SequenceConfig::default())
        .map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let m = r
        .attach_metrics(&clip.gt_masks)
        .map_err(|e| e.to_string())?
        .clone();
    let (t, min_j) = m
        .per_frame_j
        .iter()
        .enumerate()
        .fold(
            (0, 1.0f64),
            |acc, (i, &j)| if j < acc.1 { (i + 1, j) } else { acc },
        );
    check(min_j >= 0.8, format!("frame {t} J = {min_j:.3} < 0.8"))?;
    check(m.jf >= 0.85, format!("mean J&F {:.3} < 0.85", m.jf))?;
    check(secs < 30.0, format!("runtime {secs:.2}s ≥ 30s"))?;
    Ok(format!(
        "min J {min_j:.3} (frame {t}), mean J&F {:.3}, {secs:.2}s",
        m.jf
    ))
}

fn criterion_6() -> Outcome {
    let decide = |varied: usize| -> Result<bool, String> {
        let prev = Frame::filled(32, 32, [0, 0, 0]);
        let mut cur = prev.clone();
        for i in 0..varied {
            cur.set_pixel(i / 32, i % 32, [255, 255, 255]);
        }
        let mask = MaskMap::empty(32, 32);
        let mut trig = VariationAwareTrigger::new(TriggerThresholds::default());
        trig.decide(&FrameObservation {
            index: 1,
            frame: &cur,
            mask: &mask,
            prev_frame: &prev,
            prev_mask: &mask,
        })
        .map_err(|e| e.to_string())
    };
    let th = TriggerThresholds::default();
    check(
        (th.count, th.image, th.mask) == (200, 1.0, 0.0),
        format!("defaults {th:?}"),
    )?;
    check(!decide(200)?, "200 varied pixels triggered")?;
    check(decide(201)?, "201 varied pixels did not trigger")?;
    Ok("200 → no trigger, 201 → trigger".into())
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for r in [1, 2, 4] {
        let x = random(&[16, 24, 3], &mut rng);
        let back = depth_to_space(&space_to_depth(&x, r).map_err(|e| e.to_string())?, r)
            .map_err(|e| e.to_string())?;
        check(
            back == x,
            format!("space_to_depth round trip differs for r={r}"),
        )?;
    }
    let logits = Tensor::new(
        vec![64, 50],
        (0..3200).map(|_| rng.gen_range(-40.0..40.0)).collect(),
    )
    .unwrap();
    let sm = softmax_rows(&logits).map_err(|e| e.to_string())?;
    let worst_sum = sm
        .data()
        .chunks_exact(50)
        .map(|row| (row.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs())
        .fold(0.0f64, f64::max);
    check(
        worst_sum <= 1e-6,
        format!("softmax row sum off by {worst_sum:.2e}"),
    )?;

    let q = random(&[32, 32, 8], &mut rng);
    let mem = memory_init(&random(&[1, 16, 8], &mut rng), &Tensor::zeros(&[1, 16, 1]))
        .map_err(|e| e.to_string())?;
    let cos = cosine_similarity(&q, &mem).map_err(|e| e.to_string())?;
    let mut worst_cos = 0.0f64;
    for (i, a) in q.data().chunks_exact(8).enumerate() {
        for j in 0..16 {
            let b = mem.key(j);
            let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
            let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            worst_cos = worst_cos.max((cos.data()[i * 16 + j] as f64 - dot / (na * nb)).abs());
        }
    }
    check(worst_cos <= 1e-6, format!("cosine off by {worst_cos:.2e}"))?;

    let x = random(&[9, 7, 5], &mut rng);
    let mut w = Tensor::zeros(&[3, 3, 5, 5]);
    for c in 0..5 {
        // centre tap of a 3×3 kernel, input c → output c
        w.data_mut()[(4 * 5 + c) * 5 + c] = 1.0;
    }
    let y = conv2d(&x, &w, None, 1, 1).map_err(|e| e.to_string())?;
    check(y == x, "identity conv2d changed its input")?;
    Ok(format!(
        "round trips exact; softmax sum err {worst_sum:.1e}; cosine err {worst_cos:.1e}; identity conv exact"
    ))
}

fn rect(h: usize, w: usize, y0: usize, x0: usize, rh: usize, rw: usize) -> MaskMap {
    MaskMap::from_fn(w, h, |y, x| {
        (y0..y0 + rh).contains(&y) && (x0..x0 + rw).contains(&x)
    })
}

fn brute_boundary_f(a: &MaskMap, b: &MaskMap, tol: usize) -> f64 {
    let w = a.width();
    let pts = |m: &MaskMap| -> Vec<(i64, i64)> {
        boundary_pixels(m)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| ((i / w) as i64, (i % w) as i64))
            .collect()
    };
    let (pa, pb) = (pts(a), pts(b));
    let frac = |from: &[(i64, i64)], to: &[(i64, i64)]| {
        let hit = from
            .iter()
            .filter(|&&(y, x)| {
                to.iter()
                    .any(|&(v, u)| (y - v).abs().max((x - u).abs()) <= tol as i64)
            })
            .count();
        hit as f64 / from.len() as f64
    };
    let (p, r) = (frac(&pa, &pb), frac(&pb, &pa));
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn criterion_8() -> Outcome {
    let j = jaccard(&rect(32, 32, 0, 0, 8, 16), &rect(32, 32, 0, 8, 8, 16))
        .map_err(|e| e.to_string())?;
    check(j == 1.0 / 3.0, format!("rectangle jaccard {j}"))?;
    let mut worst = 0.0f64;
    for tol in 1..=4 {
        let a = rect(96, 96, 20, 20, 40, 40);
        let b = rect(96, 96, 20 + 2 * tol, 20 + 2 * tol, 40, 40);
        let got = boundary_f(&a, &b, tol).map_err(|e| e.to_string())?;
        worst = worst.max((got - brute_boundary_f(&a, &b, tol)).abs());
    }
    check(
        worst <= 1e-9,
        format!("boundary_f off the brute-force oracle by {worst:.2e}"),
    )?;
    let m = rect(64, 64, 5, 9, 30, 17);
    let jj = jaccard(&m, &m).map_err(|e| e.to_string())?;
    let ff = boundary_f(&m, &m, 2).map_err(|e| e.to_string())?;
    check(
        jj == 1.0 && ff == 1.0,
        format!("identical masks scored J={jj}, F={ff}"),
    )?;
    Ok(format!(
        "J = 1/3 exactly; shifted-square F within {worst:.1e}; identical = 1.0"
    ))
}

fn config_args() -> ConfigArgs {
    ConfigArgs {
        seed: 0,
        beta: 0.10,
        trigger: "var".into(),
        thf: 1.0,
        thm: 0.0,
        pth: 200,
        mode: "handcrafted".into(),
        decode: "propagate".into(),
        key_gain: pam_core::encoder::DEFAULT_KEY_GAIN,
        memory_cap: None,
        weights: None,
    }
}

fn read_preds(dir: &Path, n: usize) -> Result<Vec<Vec<u8>>, String> {
    (0..n)
        .map(|t| fs::read(dir.join(format!("pred_{t:04}.pgm"))).map_err(|e| e.to_string()))
        .collect()
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let clip = tmp.path().join("clip");
    cmd_synth(&SynthArgs {
        out: clip.clone(),
        seed: 9,
        frames: 8,
        height: 128,
        width: 128,
        spec: None,
    })
    .map_err(|e| format!("{e:#}"))?;
    let mut outs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let report = cmd_run(&RunArgs {
            clip_dir: clip.clone(),
            out: out.clone(),
            config: config_args(),
            dump_weights: None,
            dump_memory: None,
        })
        .map_err(|e| format!("{e:#}"))?;
        let text = fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?;
        let parsed: RunReport = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        check(
            parsed.frames.len() == report.frames.len(),
            "report.json frame count differs",
        )?;
        let stripped = serde_json::to_string(&parsed.strip_timings()).map_err(|e| e.to_string())?;
        outs.push((read_preds(&out, 8)?, stripped));
    }
    check(
        outs[0].0 == outs[1].0,
        "predicted masks differ between runs",
    )?;
    check(
        outs[0].1 == outs[1].1,
        "reports differ beyond timing fields",
    )?;
    Ok("8 masks byte-identical; reports identical modulo timings".into())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 full-frame oracle equivalence", criterion_1),
        ("2 match time scaling", criterion_2),
        ("3 trigger quiescence and selectivity", criterion_3),
        ("4 beta accounting", criterion_4),
        ("5 end-to-end tracking (handcrafted)", criterion_5),
        ("6 trigger constants", criterion_6),
        ("7 kernel suite", criterion_7),
        ("8 metrics suite", criterion_8),
        ("9 determinism", criterion_9),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL criterion {name}: {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
