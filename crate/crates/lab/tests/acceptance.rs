//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs without the libtest harness so the lines always reach stdout.

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use lab::sweep::{p_label, preset, run_sweep, RunStatus, SweepReport};
use textadain::autograd::checks::TIGHT;
use textadain::autograd::{check_gradient, gradcheck_op, GradOp, Graph, StepSize};
use textadain::config::Config;
use textadain::corruptions::{self, CorruptionKind, CorruptionSpec, Image, Range};
use textadain::statswap::{adain, adain_backward, SwapPair};
use textadain::tensor::max_rel_diff;
use textadain::textadain::{forward_with_plan, merge, sample_plan, split, DonorPlan, TextAdainConfig};
use textadain::toyocr::ctc::ctc_loss;
use textadain::toyocr::glyphs::{self, RenderStyle};
use textadain::toyocr::{train, Layers, TrainConfig};
use textadain::{AxisSet, Rng, Tensor};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("took {:.1}s, budget {limit_s}s", elapsed.as_secs_f64())
    })
}

fn random_dims(rng: &mut Rng, max: [usize; 4]) -> [usize; 4] {
    max.map(|m| 1 + rng.below(m))
}

/// Per-group mean and population std over the axes not in `kept`, computed
/// directly from the definition.
fn group_stats(x: &Tensor<f64>, kept: AxisSet) -> (Tensor<f64>, Tensor<f64>) {
    let mean = x.reduce_mean(kept).unwrap();
    let centered = x.sub(&mean.broadcast_to(x.dims()).unwrap()).unwrap();
    let var = centered.mul(&centered).unwrap().reduce_mean(kept).unwrap();
    (mean, var.map(f64::sqrt))
}

fn max_abs_diff(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut rng = Rng::new(101);
    let mut worst: f64 = 0.0;
    let cfg = TextAdainConfig {
        p: 1.0,
        ..TextAdainConfig::default()
    };
    for _ in 0..100 {
        let dims = random_dims(&mut rng, [4, 8, 16, 32]);
        let (scale, shift) = (1.0 + rng.uniform() * 3.0, rng.uniform() - 0.5);
        let x: Tensor<f32> = Tensor::randn(dims, &mut rng, scale, shift);
        let a = adain(SwapPair::new(&x, &x).unwrap(), AxisSet::CH, cfg.eps).unwrap();
        worst = worst.max(max_rel_diff(&a, &x));
        let ident = DonorPlan::Permutation((0..dims[0] * cfg.k).collect());
        let t = forward_with_plan(&x, &cfg, &ident).unwrap().0;
        worst = worst.max(max_rel_diff(&t, &x));
    }
    ensure(worst < 1e-6, || format!("max relative error {worst:.3e}"))?;
    within(t0.elapsed(), 10.0)?;
    Ok(format!("max relative error {worst:.2e} in {:.2}s", t0.elapsed().as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let mut rng = Rng::new(202);
    let (mut mean_err, mut std_err): (f64, f64) = (0.0, 0.0);
    for kept in AxisSet::VARIANTS {
        for _ in 0..20 {
            let dims = [1 + rng.below(3), 2 + rng.below(5), 2 + rng.below(7), 2 + rng.below(11)];
            let a: Tensor<f64> = Tensor::randn(dims, &mut rng, 1.0, 0.0);
            let b: Tensor<f64> = Tensor::randn(dims, &mut rng, 3.0, 2.0);
            let (donor_mean, donor_std) = group_stats(&b, kept);
            for eps in [1e-4, 0.0] {
                let y = adain(SwapPair::new(&a, &b).unwrap(), kept, eps).map_err(|e| e.to_string())?;
                let (m, s) = group_stats(&y, kept);
                mean_err = mean_err.max(max_abs_diff(&m, &donor_mean));
                if eps == 0.0 {
                    let rel = s
                        .data()
                        .iter()
                        .zip(donor_std.data())
                        .map(|(x, d)| (x - d).abs() / d)
                        .fold(0.0, f64::max);
                    std_err = std_err.max(rel);
                }
            }
        }
    }
    ensure(mean_err < 1e-5 && std_err < 1e-5, || {
        format!("mean abs error {mean_err:.3e}, std rel error {std_err:.3e}")
    })?;
    Ok(format!("mean abs error {mean_err:.2e}, std rel error (eps = 0) {std_err:.2e}"))
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let mut shapes = Rng::new(303);
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let dims = random_dims(&mut shapes, [2, 4, 8, 16]).map(|d| d.max(2));
        // adain_backward, directly, for every kept set.
        let mut rng = Rng::new(seed);
        let a: Tensor<f64> = Tensor::randn(dims, &mut rng, 1.0, 0.2);
        let b: Tensor<f64> = Tensor::randn(dims, &mut rng, 1.5, -0.4);
        let up: Tensor<f64> = Tensor::randn(dims, &mut rng, 1.0, 0.0);
        for kept in AxisSet::VARIANTS {
            let g = adain_backward(SwapPair::new(&a, &b).unwrap(), kept, 1e-4, &up).unwrap();
            ensure(g.d_donor.data().iter().all(|&v| v == 0.0), || "nonzero donor gradient".into())?;
            let f = |t: &Tensor<f64>| {
                let y = adain(SwapPair::new(t, &b).unwrap(), kept, 1e-4).unwrap();
                y.data().iter().zip(up.data()).map(|(p, q)| p * q).sum()
            };
            let r = check_gradient(f, &a, &g.d_recipient, TIGHT).unwrap();
            ensure(r.passes(1e-6), || format!("adain_backward {} seed {seed}: {r}", kept.name()))?;
            worst = worst.max(r.max_rel_error);
        }
        // The full layer VJP, with donors held at their sampled values.
        for op in [GradOp::Adain, GradOp::TextAdain] {
            let r = gradcheck_op(op, dims, seed, TIGHT).map_err(|e| e.to_string())?;
            ensure(r.passes(1e-6), || format!("{op} seed {seed}: {r}"))?;
            worst = worst.max(r.max_rel_error);
        }
        // A donor leaf on the tape receives exactly zero.
        let mut g = Graph::<f64>::new();
        let (xa, xb) = (g.leaf(a.clone()), g.leaf(b.clone()));
        let y = g.adain(xa, xb, AxisSet::CH, 1e-4).unwrap();
        let root = g.dot(y, up.clone()).unwrap();
        let grads = g.backward(root).unwrap();
        ensure(grads.get(xb).is_none_or(|d| d.data().iter().all(|&v| v == 0.0)), || {
            "donor leaf received a gradient".into()
        })?;
    }
    within(t0.elapsed(), 60.0)?;
    Ok(format!(
        "worst relative error {worst:.2e} over 20 seeds; donor gradients exactly zero; {:.1}s",
        t0.elapsed().as_secs_f64()
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = Rng::new(404);
    for _ in 0..200 {
        let dims = random_dims(&mut rng, [3, 4, 5, 40]);
        let x: Tensor<f32> = Tensor::randn(dims, &mut rng, 1.0, 0.0);
        for k in 1..=dims[3] + 2 {
            let y = merge(&split(&x, k).unwrap()).unwrap();
            ensure(y.data().iter().zip(x.data()).all(|(a, b)| a.to_bits() == b.to_bits()), || {
                format!("merge(split) differs at {dims:?}, K={k}")
            })?;
        }
    }
    let cfg = TextAdainConfig {
        p: 1.0,
        k: 5,
        ..TextAdainConfig::default()
    };
    for seed in 0..20 {
        let x: Tensor<f32> = Tensor::randn([4, 3, 6, 13], &mut Rng::new(seed), 2.0, 1.0);
        let plan = sample_plan(x.dims(), &cfg, &mut Rng::new(seed + 100), true).unwrap();
        let y = forward_with_plan(&x, &cfg, &plan).unwrap().0;
        ensure(max_rel_diff(&y.narrow_width(0, 10), &x.narrow_width(0, 10)) > 0.0, || {
            "swap left the windows unchanged".into()
        })?;
        let (ry, rx) = (y.narrow_width(10, 3), x.narrow_width(10, 3));
        ensure(ry.data().iter().zip(rx.data()).all(|(a, b)| a.to_bits() == b.to_bits()), || {
            format!("remainder columns changed (seed {seed})")
        })?;
    }
    Ok("merge(split(x)) bitwise identity; W=13, K=5 remainder bitwise untouched".into())
}

/// `-log` of the summed probability of every length-`t` path collapsing to
/// `label`.
fn ctc_enumerate(lp: &[f64], t: usize, classes: usize, label: &[usize]) -> f64 {
    let mut total = 0.0f64;
    let mut path = vec![0usize; t];
    loop {
        let mut collapsed: Vec<usize> = Vec::new();
        let mut prev = usize::MAX;
        for &s in &path {
            if s != prev && s != 0 {
                collapsed.push(s);
            }
            prev = s;
        }
        if collapsed == label {
            total += path.iter().enumerate().map(|(i, &s)| lp[i * classes + s]).sum::<f64>().exp();
        }
        let mut i = 0;
        while i < t && path[i] == classes - 1 {
            path[i] = 0;
            i += 1;
        }
        if i == t {
            break;
        }
        path[i] += 1;
    }
    -total.ln()
}

fn all_labels(alphabet: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for l in &frontier {
            for a in 1..=alphabet {
                let mut v: Vec<usize> = l.clone();
                v.push(a);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn criterion_5() -> Outcome {
    let mut rng = Rng::new(505);
    let (mut loss_err, mut grad_err, mut count): (f64, f64, usize) = (0.0, 0.0, 0);
    for t in 1..=4 {
        for alphabet in 1..=3 {
            let classes = alphabet + 1;
            for label in all_labels(alphabet, 2) {
                for _ in 0..3 {
                    let logits: Vec<f64> = (0..t * classes).map(|_| rng.normal() * 2.0).collect();
                    let lp: Vec<f64> = logits
                        .chunks(classes)
                        .flat_map(|row| {
                            let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
                            row.iter().map(move |v| v - lse)
                        })
                        .collect();
                    let out = ctc_loss(&lp, t, classes, &label);
                    let want = ctc_enumerate(&lp, t, classes, &label);
                    count += 1;
                    if want.is_infinite() {
                        ensure(out.loss.is_infinite() && !out.reachable, || {
                            format!("T={t} label {label:?}: expected unreachable, got {}", out.loss)
                        })?;
                        continue;
                    }
                    loss_err = loss_err.max((out.loss - want).abs());
                    let x = Tensor::from_vec([1, 1, t, classes], lp.clone()).unwrap();
                    let analytic = Tensor::from_vec([1, 1, t, classes], out.grad.clone()).unwrap();
                    let r = check_gradient(|p| ctc_loss(p.data(), t, classes, &label).loss, &x, &analytic, StepSize::default())
                        .map_err(|e| e.to_string())?;
                    grad_err = grad_err.max(r.max_rel_error);
                }
            }
        }
    }
    ensure(loss_err < 1e-9 && grad_err < 1e-5, || {
        format!("loss error {loss_err:.3e}, gradient relative error {grad_err:.3e}")
    })?;
    Ok(format!(
        "{count} instances: loss error {loss_err:.2e}, gradient relative error {grad_err:.2e}"
    ))
}

fn criterion_6() -> Outcome {
    let mut cfg = TrainConfig {
        iterations: 40,
        batch_size: 8,
        eval_every: 40,
        val_size: 16,
        textadain_enabled: true,
        ..TrainConfig::default()
    };
    cfg.textadain.p = 0.5;
    let model = train(&cfg).map_err(|e| e.to_string())?.model;
    let mut rng = Rng::new(606);
    let images: Vec<Image> = (0..8).map(|_| glyphs::sample(&RenderStyle::default(), &mut rng).image).collect();
    let refs: Vec<&Image> = images.iter().collect();
    let x = glyphs::batch_tensor(&refs).unwrap();
    let mut swap_rng = Rng::new(607);
    let always = TextAdainConfig { p: 1.0, ..cfg.textadain };
    let mut g = Graph::new();
    let layers = Layers::Present {
        cfg: &always,
        rng: &mut swap_rng,
        training: false,
    };
    let f = model.forward(&mut g, x.clone(), layers, false).unwrap();
    let with_layers = g.value(f.logprobs).clone();
    let removed = model.logprobs(x).unwrap();
    ensure(
        with_layers.data().iter().zip(removed.data()).all(|(a, b)| a.to_bits() == b.to_bits()),
        || "inference outputs differ".into(),
    )?;
    Ok("trained encoder, layers in inference mode == layers removed, bitwise".into())
}

const C7_SEEDS: u64 = 5;
const C7_ITERATIONS: usize = 2000;
const LOCAL: [CorruptionKind; 3] = [
    CorruptionKind::CoarseDropout,
    CorruptionKind::Cutout,
    CorruptionKind::AdditiveGaussianNoise,
];

fn sd(report: &SweepReport, run: &str, metric: &str) -> f64 {
    report
        .summary
        .iter()
        .find(|r| r.run == run && r.metric == metric)
        .map_or(f64::NAN, |r| r.sd)
}

fn criterion_7() -> Outcome {
    let t0 = Instant::now();
    let mut base = Config::new();
    base.set("train.iterations", &C7_ITERATIONS.to_string());
    let seeds: Vec<u64> = (0..C7_SEEDS).collect();
    let plan = preset("direction", base, &seeds).map_err(|e| e.to_string())?;
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("direction-sweep");
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = run_sweep(&plan, &out, jobs, |line| println!("    {line}")).map_err(|e| e.to_string())?;
    ensure(report.failures() == 0, || format!("{} runs failed", report.failures()))?;
    ensure(report.records.iter().all(|r| matches!(r.status, RunStatus::Ok { .. })), || "missing runs".into())?;

    let (low, high) = (p_label(0.01), p_label(0.25));
    let m = |run: &str, metric: &str| report.mean(run, metric).unwrap_or(f64::NAN);
    let line = |run: &str, metric: &str| format!("{:.4}±{:.4}", m(run, metric), sd(&report, run, metric));
    println!("    report: {}", out.display());
    println!("    {:<10} {:>15} {:>15} {:>15}", "metric", "baseline", low, high);
    for metric in ["none", "dropout", "cutout", "noise"] {
        println!(
            "    {metric:<10} {:>15} {:>15} {:>15}",
            line("baseline", metric),
            line(&low, metric),
            line(&high, metric)
        );
    }
    let a = m(&high, "none") < m(&low, "none");
    let b: Vec<(&str, bool)> = LOCAL
        .iter()
        .map(|k| (k.name(), m(&low, k.name()) >= m("baseline", k.name())))
        .collect();
    println!(
        "    (a) clean p=0.25 < p=0.01: {}; (b) p=0.01 >= baseline: {}",
        if a { "holds" } else { "violated" },
        b.iter().map(|(k, ok)| format!("{k} {}", if *ok { "holds" } else { "violated" })).collect::<Vec<_>>().join(", ")
    );
    let mut failed = Vec::new();
    if !a {
        failed.push("(a)".to_string());
    }
    for (k, ok) in &b {
        if !ok {
            failed.push(format!("(b) {k}"));
        }
    }
    within(t0.elapsed(), 7200.0)?;
    ensure(failed.is_empty(), || format!("direction not reproduced: {}", failed.join(", ")))?;
    Ok(format!(
        "{C7_SEEDS} paired seeds x {C7_ITERATIONS} iterations, (a) and (b) hold; {:.0}s",
        t0.elapsed().as_secs_f64()
    ))
}

fn criterion_8() -> Outcome {
    let mut rng = Rng::new(808);
    let images: Vec<Image> = (0..10).map(|_| glyphs::sample(&RenderStyle::default(), &mut rng).image).collect();
    let identities = [
        CorruptionSpec::None,
        CorruptionSpec::AdditiveGaussianNoise { scale: Range::fixed(0.0) },
        CorruptionSpec::ElasticTransform {
            alpha: Range::fixed(0.0),
            sigma: 0.5,
        },
    ];
    let mut worst: f64 = 0.0;
    for (i, img) in images.iter().enumerate() {
        for spec in &identities {
            let out = corruptions::apply(img, spec, &mut Rng::new(i as u64)).map_err(|e| e.to_string())?;
            let d = out.data().iter().zip(img.data()).map(|(a, b)| (a - b).abs() as f64).fold(0.0, f64::max);
            worst = worst.max(d);
        }
        for kind in CorruptionKind::ALL {
            let spec = CorruptionSpec::default_for(kind);
            let a = corruptions::apply(img, &spec, &mut Rng::new(1000 + i as u64)).map_err(|e| e.to_string())?;
            let b = corruptions::apply(img, &spec, &mut Rng::new(1000 + i as u64)).map_err(|e| e.to_string())?;
            ensure(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()), || {
                format!("{kind} is not seed-deterministic")
            })?;
        }
    }
    ensure(worst < 1e-6, || format!("identity cases deviate by {worst:.3e}"))?;
    Ok(format!("identity cases within {worst:.1e}; all 8 kinds seed-deterministic"))
}

/// Batch-permuted AdaIN written straight from the definition: every item's
/// per-channel statistics replaced by those of item `perm[i]`.
fn padain_direct(x: &Tensor<f64>, perm: &[usize], eps: f64) -> Tensor<f64> {
    let [_, _, h, w] = x.dims();
    let n = (h * w) as f64;
    let stats = |i: usize, ch: usize| {
        let vals = (0..h).flat_map(|y| (0..w).map(move |xx| (y, xx))).map(|(y, xx)| x.get([i, ch, y, xx]));
        let mean = vals.clone().sum::<f64>() / n;
        let var = vals.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, (var + eps).sqrt())
    };
    Tensor::from_fn(x.dims(), |[i, ch, y, xx]| {
        let (mu, sigma) = stats(i, ch);
        let (mu_d, sigma_d) = stats(perm[i], ch);
        sigma_d * (x.get([i, ch, y, xx]) - mu) / sigma + mu_d
    })
}

fn criterion_9() -> Outcome {
    let cfg = TextAdainConfig {
        p: 1.0,
        k: 1,
        kept: AxisSet::C,
        ..TextAdainConfig::default()
    };
    let mut rng = Rng::new(909);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let dims = [2 + rng.below(7), 1 + rng.below(6), 1 + rng.below(8), 2 + rng.below(12)];
        let (scale, shift) = (1.0 + rng.uniform() * 2.0, rng.normal());
        let x: Tensor<f64> = Tensor::randn(dims, &mut rng, scale, shift);
        let plan = sample_plan(dims, &cfg, &mut rng, true).unwrap();
        let DonorPlan::Permutation(perm) = &plan else {
            return Err("expected a batch permutation".into());
        };
        let got = forward_with_plan(&x, &cfg, &plan).unwrap().0;
        let want = padain_direct(&x, perm, cfg.eps);
        let err = got
            .data()
            .iter()
            .zip(want.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    ensure(worst < 1e-6, || format!("element-wise error {worst:.3e}"))?;
    Ok(format!("50 batches, element-wise error {worst:.2e}"))
}

fn main() {
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 self-donor identity", criterion_1),
        ("2 mean/std transfer exactness", criterion_2),
        ("3 gradient correctness", criterion_3),
        ("4 window mechanics", criterion_4),
        ("5 CTC oracle equivalence", criterion_5),
        ("6 inference invariance", criterion_6),
        ("7 protocol direction", criterion_7),
        ("8 corruption identities and determinism", criterion_8),
        ("9 pAdaIN reduction", criterion_9),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (name, f) in criteria {
        let number = name.split(' ').next().unwrap_or("");
        if !selected.is_empty() && !selected.iter().any(|s| s == number) {
            continue;
        }
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failures += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
