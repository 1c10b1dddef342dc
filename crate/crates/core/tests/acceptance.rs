//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails that is not listed in `KNOWN_SHORTFALLS`.
//!
//! Every oracle here is written from scratch (naive loops, exhaustive
//! enumeration, logistic regression) rather than calling back into the
//! routine under test.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use sve_core::cli::{cmd_eval, cmd_generate, cmd_train, Checkpoint, EvalArgs, GenerateArgs, RunConfig, TrainReport};
use sve_core::entmax::{entmax, entmax_backward, softmax, sparsemax, AlphaParam, AttentionKernel};
use sve_core::interpretability::{random_baseline, run_trials, sharing_report, stable_rank_report, summarize};
use sve_core::numerics::{finite_difference_gradient, stable_rank, Matrix, Rng};
use sve_core::predictor::{predict, predict_backward, PredictorConfig, PredictorParams};
use sve_core::regularizers::{
    orthogonality_penalty, stable_rank_penalty, von_neumann_entropy, von_neumann_penalty, Regularizer, RegularizerKind,
};
use sve_core::shared_embeddings::{attend, attend_backward, EmbeddingStore};
use sve_core::task_data::{
    encode_target, load_bundle, LoadOptions, Split, SyntheticConfig, TaskBundle,
};
use sve_core::trainer::{fit, hinge_loss, FitOutcome, TrainConfig};

/// Criteria that are expected to fail at desk scale; see the README.
const KNOWN_SHORTFALLS: &[u32] = &[8];

const FD_STEP: f64 = 1e-5;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn normal_vec(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.normal()).collect()
}

fn normal_matrix(rng: &mut Rng, r: usize, c: usize, scale: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| scale * rng.normal())
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `‖a − b‖∞ / max(‖a‖∞, ‖b‖∞)`, with a tiny floor for all-zero gradients.
fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(1e-8, f64::max);
    linf(analytic, numeric) / scale
}

// ---------------------------------------------------------------- oracles

/// Euclidean projection onto the simplex by trying every support set and
/// keeping the feasible candidate closest to `z`.
fn sparsemax_by_enumeration(z: &[f64]) -> Vec<f64> {
    let d = z.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u64..(1 << d) {
        let members: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).collect();
        let tau = (members.iter().map(|&i| z[i]).sum::<f64>() - 1.0) / members.len() as f64;
        let mut p = vec![0.0; d];
        for &i in &members {
            p[i] = z[i] - tau;
        }
        if p.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let dist: f64 = z.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(b, _)| dist < *b) {
            best = Some((dist, p));
        }
    }
    best.unwrap().1
}

/// KKT residual of a claimed simplex projection: on the support
/// `p_i = z_i − τ`, off it `z_i ≤ τ`, and `Σp = 1`.
fn simplex_projection_residual(z: &[f64], p: &[f64]) -> f64 {
    let support: Vec<usize> = (0..z.len()).filter(|&i| p[i] > 0.0).collect();
    let tau = support.iter().map(|&i| z[i] - p[i]).sum::<f64>() / support.len() as f64;
    let mut worst = (p.iter().sum::<f64>() - 1.0).abs();
    for i in 0..z.len() {
        if p[i] > 0.0 {
            worst = worst.max((p[i] - (z[i] - tau)).abs());
        } else {
            worst = worst.max((z[i] - tau).max(0.0));
        }
        worst = worst.max((-p[i]).max(0.0));
    }
    worst
}

fn naive_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Per-task multinomial logistic regression by full-batch gradient descent;
/// returns the worst per-task training accuracy.
fn linear_separability(bundle: &TaskBundle) -> f64 {
    let mut worst: f64 = 1.0;
    for task in bundle.tasks() {
        let (n, m) = (task.spec.n_inputs, task.spec.n_classes);
        let mut w = vec![vec![0.0; n + 1]; m];
        let xs = &task.train;
        for _ in 0..400 {
            let mut g = vec![vec![0.0; n + 1]; m];
            for s in xs {
                let logits: Vec<f64> = (0..m)
                    .map(|k| w[k][n] + (0..n).map(|i| w[k][i] * s.values[i]).sum::<f64>())
                    .collect();
                let p = naive_softmax(&logits);
                for k in 0..m {
                    let r = p[k] - if k == s.label { 1.0 } else { 0.0 };
                    for i in 0..n {
                        g[k][i] += r * s.values[i];
                    }
                    g[k][n] += r;
                }
            }
            for k in 0..m {
                for i in 0..=n {
                    w[k][i] -= 1.0 * g[k][i] / xs.len() as f64;
                }
            }
        }
        let correct = xs
            .iter()
            .filter(|s| {
                let logits: Vec<f64> = (0..m)
                    .map(|k| w[k][n] + (0..n).map(|i| w[k][i] * s.values[i]).sum::<f64>())
                    .collect();
                let best = (0..m).max_by(|&a, &b| logits[a].total_cmp(&logits[b])).unwrap();
                best == s.label
            })
            .count();
        worst = worst.min(correct as f64 / xs.len() as f64);
    }
    worst
}

/// `P(X = x)` for `X ~ Hypergeometric(population, successes, draws)`.
fn hypergeometric_pmf(population: usize, successes: usize, draws: usize, x: usize) -> f64 {
    fn ln_choose(n: usize, k: usize) -> f64 {
        (1..=k).map(|i| ((n + 1 - i) as f64 / i as f64).ln()).sum()
    }
    if x > successes || x > draws || draws - x > population - successes {
        return 0.0;
    }
    (ln_choose(successes, x) + ln_choose(population - successes, draws - x) - ln_choose(population, draws)).exp()
}

// ---------------------------------------------------------------- criteria

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = Rng::new(1);
    let (mut soft, mut sparse, mut oracle, mut kkt) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &d in &[2usize, 8, 64] {
        for case in 0..100 {
            let scale = [0.1, 1.0, 4.0][case % 3];
            let z = normal_vec(&mut rng, d, scale);
            soft = soft.max(linf(&entmax(&z, AlphaParam::fixed(1.0)).unwrap(), &softmax(&z)));
            let e2 = entmax(&z, AlphaParam::fixed(2.0)).unwrap();
            let sm = sparsemax(&z);
            sparse = sparse.max(linf(&e2, &sm));
            if d <= 8 {
                oracle = oracle.max(linf(&sm, &sparsemax_by_enumeration(&z)));
            } else {
                kkt = kkt.max(simplex_projection_residual(&z, &sm));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        soft <= 1e-6 && sparse <= 1e-6 && oracle <= 1e-9 && kkt <= 1e-9 && elapsed < Duration::from_secs(5),
        format!(
            "softmax gap {soft:.1e}, sparsemax gap {sparse:.1e}, enumeration gap {oracle:.1e}, KKT residual {kkt:.1e}, {elapsed:.2?}"
        ),
    )
}

fn flatten(p: &PredictorParams) -> Vec<f64> {
    p.tensors().into_iter().flat_map(|(t, _)| t.to_vec()).collect()
}

fn unflatten(p: &mut PredictorParams, flat: &[f64]) {
    let mut it = flat.iter();
    for (t, _) in p.tensors_mut() {
        t.iter_mut().for_each(|v| *v = *it.next().unwrap());
    }
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let (c, d, h, depth) = (5, 5, 8, 2);
    let mut rng = Rng::new(2);
    let mut worst: Vec<(&str, f64, f64)> = Vec::new();
    let mut record = |name: &'static str, err: f64, tol: f64| worst.push((name, err, tol));

    // entmax, z and α paths
    let mut e_z: f64 = 0.0;
    let mut e_a: f64 = 0.0;
    for &a in &[1.25, 1.5, 1.75] {
        for _ in 0..5 {
            let z = normal_vec(&mut rng, d, 1.0);
            let w = normal_vec(&mut rng, d, 1.0);
            let alpha = AlphaParam::learnable(a);
            let p = entmax(&z, alpha).unwrap();
            let (gz, ga) = entmax_backward(&p, alpha, &w).unwrap();
            let f = |zz: &[f64]| Ok(entmax(zz, alpha).unwrap().iter().zip(&w).map(|(x, y)| x * y).sum());
            e_z = e_z.max(rel_err(&gz, &finite_difference_gradient(f, &z, FD_STEP).unwrap()));
            let fa = |aa: &[f64]| {
                Ok(entmax(&z, AlphaParam::learnable(aa[0])).unwrap().iter().zip(&w).map(|(x, y)| x * y).sum())
            };
            e_a = e_a.max(rel_err(&[ga], &finite_difference_gradient(fa, &[a], FD_STEP).unwrap()));
        }
    }
    record("entmax_backward z", e_z, 1e-4);
    record("entmax_backward alpha", e_a, 1e-4);

    // attention, for both kernels
    let mut e_att: f64 = 0.0;
    for kernel in [AttentionKernel::Softmax, AttentionKernel::Entmax { alpha: AlphaParam::learnable(1.5) }] {
        let store = EmbeddingStore {
            z: normal_matrix(&mut rng, 6, c, 1.0),
            s: normal_matrix(&mut rng, d, c, 1.0),
            z_out: normal_matrix(&mut rng, 2, c, 1.0),
        };
        let rows = [0usize, 2, 3, 5];
        let up = normal_matrix(&mut rng, rows.len(), c, 1.0);
        let loss = |st: &EmbeddingStore, k: &AttentionKernel| -> f64 {
            let f = attend(st, &rows, k).unwrap().f;
            f.as_slice().iter().zip(up.as_slice()).map(|(a, b)| a * b).sum()
        };
        let fwd = attend(&store, &rows, &kernel).unwrap();
        let g = attend_backward(&store, &rows, &kernel, &fwd, &up).unwrap();
        let num_s = finite_difference_gradient(
            |s| {
                let mut st = store.clone();
                st.s.as_mut_slice().copy_from_slice(s);
                Ok(loss(&st, &kernel))
            },
            store.s.as_slice(),
            FD_STEP,
        )
        .unwrap();
        e_att = e_att.max(rel_err(g.s.as_slice(), &num_s));
        let num_z = finite_difference_gradient(
            |z| {
                let mut st = store.clone();
                st.z.as_mut_slice().copy_from_slice(z);
                Ok(loss(&st, &kernel))
            },
            store.z.as_slice(),
            FD_STEP,
        )
        .unwrap();
        let mut analytic_z = Matrix::zeros(6, c);
        for (r, &row) in rows.iter().enumerate() {
            analytic_z.row_mut(row).copy_from_slice(g.z_rows.row(r));
        }
        e_att = e_att.max(rel_err(analytic_z.as_slice(), &num_z));
        if let AttentionKernel::Entmax { .. } = kernel {
            let num_a = finite_difference_gradient(
                |a| Ok(loss(&store, &AttentionKernel::Entmax { alpha: AlphaParam::learnable(a[0]) })),
                &[1.5],
                FD_STEP,
            )
            .unwrap();
            e_att = e_att.max(rel_err(&[g.alpha], &num_a));
        }
    }
    record("attend_backward", e_att, 1e-4);

    // predictor
    let params = PredictorParams::init(
        &PredictorConfig {
            latent: h,
            layers: depth,
            dropout: 0.0,
        },
        c,
        &mut rng,
    )
    .unwrap();
    let n_obs = 3;
    let processed = normal_matrix(&mut rng, n_obs, c, 1.0);
    let targets = normal_matrix(&mut rng, 3, c, 1.0);
    let xs: Vec<Vec<f64>> = (0..4).map(|_| normal_vec(&mut rng, n_obs, 1.0)).collect();
    let ups: Vec<Vec<f64>> = (0..4).map(|_| normal_vec(&mut rng, 3, 1.0)).collect();
    let inputs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let objective = |p: &PredictorParams, pr: &Matrix, tg: &Matrix| -> f64 {
        xs.iter()
            .zip(&ups)
            .map(|(x, u)| predict(p, pr, tg, x).unwrap().iter().zip(u).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    let g = predict_backward(&params, &processed, &targets, &inputs, &ups).unwrap();
    let num_params = finite_difference_gradient(
        |flat| {
            let mut p = params.clone();
            unflatten(&mut p, flat);
            Ok(objective(&p, &processed, &targets))
        },
        &flatten(&params),
        FD_STEP,
    )
    .unwrap();
    let num_proc = finite_difference_gradient(
        |v| Ok(objective(&params, &Matrix::from_vec(n_obs, c, v.to_vec()).unwrap(), &targets)),
        processed.as_slice(),
        FD_STEP,
    )
    .unwrap();
    let num_tgt = finite_difference_gradient(
        |v| Ok(objective(&params, &processed, &Matrix::from_vec(3, c, v.to_vec()).unwrap())),
        targets.as_slice(),
        FD_STEP,
    )
    .unwrap();
    let e_pred = rel_err(&flatten(&g.params), &num_params)
        .max(rel_err(g.processed.as_slice(), &num_proc))
        .max(rel_err(g.targets.as_slice(), &num_tgt));
    record("predict_backward", e_pred, 1e-4);

    // hinge loss, away from the kink at margin 1
    let mut e_h: f64 = 0.0;
    for label in 0..4 {
        let enc = encode_target(label, 4).unwrap();
        let scores: Vec<f64> = normal_vec(&mut rng, 4, 1.5)
            .into_iter()
            .map(|v| if (1.0 - v.abs()).abs() < 1e-3 { v + 0.01 } else { v })
            .collect();
        let (_, grad) = hinge_loss(&scores, &enc).unwrap();
        let num = finite_difference_gradient(|s| Ok(hinge_loss(s, &enc).unwrap().0), &scores, FD_STEP).unwrap();
        e_h = e_h.max(rel_err(&grad, &num));
    }
    record("hinge_loss", e_h, 1e-4);

    // regularizers
    type Penalty = fn(&Matrix) -> sve_core::Result<(f64, Matrix)>;
    let penalties: [(&'static str, Penalty, f64); 3] = [
        ("orthogonality", orthogonality_penalty, 1e-4),
        ("stable rank", stable_rank_penalty, 1e-4),
        ("von Neumann", von_neumann_penalty, 1e-3),
    ];
    for (name, penalty, tol) in penalties {
        let mut e: f64 = 0.0;
        for _ in 0..3 {
            let s = normal_matrix(&mut rng, d, c, 1.0).scale(1.0);
            let s = if name == "von Neumann" {
                Matrix::from_fn(d, c, |i, j| s[(i, j)].abs() + 0.1)
            } else {
                s
            };
            let (_, grad) = penalty(&s).unwrap();
            let num = finite_difference_gradient(
                |v| Ok(penalty(&Matrix::from_vec(d, c, v.to_vec()).unwrap()).unwrap().0),
                s.as_slice(),
                FD_STEP,
            )
            .unwrap();
            e = e.max(rel_err(grad.as_slice(), &num));
        }
        record(name, e, tol);
    }

    let elapsed = start.elapsed();
    let pass = worst.iter().all(|(_, e, tol)| e <= tol) && elapsed < Duration::from_secs(60);
    let detail = worst
        .iter()
        .map(|(n, e, _)| format!("{n} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(pass, format!("{detail}; {elapsed:.2?}"))
}

fn criterion_3() -> Verdict {
    let mut rng = Rng::new(3);
    let (c, d) = (6, 5);
    let store = EmbeddingStore {
        z: normal_matrix(&mut rng, 7, c, 1.0),
        s: normal_matrix(&mut rng, d, c, 1.0),
        z_out: normal_matrix(&mut rng, 2, c, 1.0),
    };
    let rows: Vec<usize> = (0..7).collect();
    let out = attend(&store, &rows, &AttentionKernel::Softmax).unwrap();
    let mut attend_gap: f64 = 0.0;
    for (r, &i) in rows.iter().enumerate() {
        let mut logits = vec![0.0; d];
        for k in 0..d {
            for j in 0..c {
                logits[k] += store.z[(i, j)] * store.s[(k, j)];
            }
            logits[k] /= (c as f64).sqrt();
        }
        let p = naive_softmax(&logits);
        for j in 0..c {
            let mut f = 0.0;
            for k in 0..d {
                f += p[k] * store.s[(k, j)];
            }
            attend_gap = attend_gap.max((f - out.f[(r, j)]).abs());
        }
    }

    let s = normal_matrix(&mut rng, 5, 5, 1.0);
    let mut naive = 0.0;
    for a in 0..5 {
        for b in 0..5 {
            let mut g = 0.0;
            for r in 0..5 {
                g += s[(r, a)] * s[(r, b)];
            }
            let delta = g - if a == b { 1.0 } else { 0.0 };
            naive += delta * delta;
        }
    }
    let ortho_gap = (orthogonality_penalty(&s).unwrap().0 - naive).abs();

    let sr_exact = (1..=12).all(|n| stable_rank(&Matrix::identity(n)).unwrap() == n as f64);
    let vn_exact = (1..=12).all(|n| von_neumann_entropy(&Matrix::identity(n)).unwrap() == 0.0);
    verdict(
        attend_gap <= 1e-12 && ortho_gap <= 1e-12 && sr_exact && vn_exact,
        format!("attend gap {attend_gap:.1e}, orthogonality gap {ortho_gap:.1e}, sr(I_n) = n: {sr_exact}, V(I) = 0: {vn_exact}"),
    )
}

fn criterion_4() -> Verdict {
    let mut worst: f64 = 0.0;
    for case in 0..50u64 {
        let mut rng = Rng::new(400 + case);
        let n = 2 + rng.below(5);
        let c = 3 + rng.below(4);
        let params = PredictorParams::init(
            &PredictorConfig {
                latent: 4 + rng.below(5),
                layers: 1 + rng.below(3),
                dropout: 0.0,
            },
            c,
            &mut rng,
        )
        .unwrap();
        let processed = normal_matrix(&mut rng, n, c, 1.0);
        let m = 2 + rng.below(3);
        let targets = normal_matrix(&mut rng, m, c, 1.0);
        let x = normal_vec(&mut rng, n, 1.0);
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let px: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let pp = processed.select_rows(&perm);
        let a = predict(&params, &processed, &targets, &x).unwrap();
        let b = predict(&params, &pp, &targets, &px).unwrap();
        worst = worst.max(linf(&a, &b));
    }
    verdict(worst <= 1e-9, format!("largest score change under permutation {worst:.1e} over 50 cases"))
}

struct Runs {
    dir: tempfile::TempDir,
    bundle: TaskBundle,
    report: TrainReport,
    train_time: Duration,
}

fn desk_run(dir: &Path, out: &str) -> RunConfig {
    RunConfig {
        bundle: Some(dir.join("bundle")),
        out: Some(dir.join(out)),
        train: TrainConfig::desk(),
    }
}

fn criterion_5(runs: &mut Option<Runs>) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    cmd_generate(&GenerateArgs {
        synthetic: SyntheticConfig::new(6, 2),
        seed: 7,
        out: dir.path().join("bundle"),
        force: false,
    })
    .unwrap();
    let start = Instant::now();
    let report = cmd_train(&desk_run(dir.path(), "a")).unwrap();
    let train_time = start.elapsed();
    cmd_train(&desk_run(dir.path(), "b")).unwrap();
    let same = |f: &str| fs::read(dir.path().join("a").join(f)).unwrap() == fs::read(dir.path().join("b").join(f)).unwrap();
    let (log, ckpt, rep) = (same("steps.jsonl"), same("best.ckpt"), same("report.json"));
    let bundle = load_bundle(&dir.path().join("bundle"), &LoadOptions::default()).unwrap();
    *runs = Some(Runs {
        dir,
        bundle,
        report,
        train_time,
    });
    verdict(
        log && ckpt && rep,
        format!("identical step logs: {log}, identical best.ckpt: {ckpt}, identical report.json: {rep}"),
    )
}

fn criterion_6(runs: &Runs) -> Verdict {
    let separable = linear_separability(&runs.bundle);
    let r = &runs.report;
    let acc = r.test.mean_accuracy_unweighted;
    let pass = separable >= 0.95
        && acc >= 0.90
        && r.final_step <= 5_000
        && runs.train_time <= Duration::from_secs(600)
        && r.config.latent_dim == 16
        && r.config.layers == 3
        && r.config.kernel == AttentionKernel::Softmax
        && runs.bundle.tasks().iter().all(|t| t.train.len() >= 400);
    verdict(
        pass,
        format!(
            "linear oracle worst train accuracy {separable:.3}; test accuracy {acc:.3} after {} steps (best at {}), {:.1?}",
            r.final_step, r.best_step, runs.train_time
        ),
    )
}

fn criterion_7(bundle: &TaskBundle) -> (Verdict, FitOutcome) {
    let mut wins = 0;
    let mut rows = Vec::new();
    let mut first = None;
    for seed in 0..5u64 {
        let soft_cfg = TrainConfig {
            seed,
            ..TrainConfig::desk()
        };
        let ent_cfg = TrainConfig {
            kernel: AttentionKernel::Entmax {
                alpha: AlphaParam::learnable(1.05),
            },
            ..soft_cfg.clone()
        };
        let soft = fit(bundle, &soft_cfg).unwrap();
        let ent = fit(bundle, &ent_cfg).unwrap();
        let target = soft.validation.mean_accuracy_unweighted;
        let reached = ent.steps_to_reach(target);
        if reached.is_some_and(|s| s <= soft.best_step) {
            wins += 1;
        }
        rows.push(format!(
            "seed {seed}: softmax {target:.3} at {}, entmax at {}",
            soft.best_step,
            reached.map_or("never".to_string(), |s| s.to_string())
        ));
        if seed == 0 {
            first = Some(soft);
        }
    }
    (
        verdict(wins >= 3, format!("{wins}/5 seeds ({})", rows.join("; "))),
        first.unwrap(),
    )
}

fn criterion_8(runs: &Runs) -> Verdict {
    let start = Instant::now();
    let ckpt = Checkpoint::load(&runs.dir.path().join("a/best.ckpt")).unwrap();
    let bundle = &runs.bundle;
    let model = &ckpt.model;
    let d = model.store.shared_count();
    let k = 5;
    let trials = run_trials(&model.store, &model.kernel, bundle, d, k, &mut Rng::new(8)).unwrap();
    let purity = summarize(&trials).mean_purity;

    // 1000 resamples of "mean purity over D random groups"
    let mut rng = Rng::new(80);
    let mut means: Vec<f64> = (0..1000)
        .map(|_| summarize(&random_baseline(bundle, d, k, &mut rng).unwrap()).mean_purity)
        .collect();
    means.sort_by(f64::total_cmp);
    let p95 = means[949];

    // exact per-trial purity distribution for two families
    let n = bundle.n_inputs();
    let fam0: usize = bundle
        .tasks()
        .iter()
        .filter(|t| t.spec.subject_area == bundle.task(0).spec.subject_area)
        .map(|t| t.spec.n_inputs)
        .sum();
    let (mut mean_exact, mut second) = (0.0, 0.0);
    for x in 0..=k {
        let purity_x = x.max(k - x) as f64 / k as f64;
        let p = hypergeometric_pmf(n, fam0, k, x);
        mean_exact += p * purity_x;
        second += p * purity_x * purity_x;
    }
    let sd_of_mean = ((second - mean_exact * mean_exact) / d as f64).sqrt();
    let p95_normal = mean_exact + 1.645 * sd_of_mean;
    let resample_mean = means.iter().sum::<f64>() / means.len() as f64;
    let consistent = (resample_mean - mean_exact).abs() <= 4.0 * sd_of_mean / (means.len() as f64).sqrt()
        && (p95 - p95_normal).abs() <= 0.5 * sd_of_mean + 1.0 / (k * d) as f64;
    let elapsed = start.elapsed();
    verdict(
        purity > p95 && consistent && elapsed < Duration::from_secs(120),
        format!(
            "mean purity over {d} shared embeddings {purity:.3} vs baseline 95th percentile {p95:.3} \
             (hypergeometric mean {mean_exact:.3}, normal 95th {p95_normal:.3}, consistent: {consistent}), {elapsed:.2?}"
        ),
    )
}

fn criterion_9(bundle: &TaskBundle, plain: &FitOutcome) -> Verdict {
    let cfg = TrainConfig {
        regularizer: Regularizer::new(RegularizerKind::StableRank, 0.05),
        ..TrainConfig::desk()
    };
    let penalized = fit(bundle, &cfg).unwrap();
    let sr_plain = stable_rank_report(&plain.best.store).unwrap();
    let sr_pen = stable_rank_report(&penalized.best.store).unwrap();
    verdict(
        sr_pen > sr_plain,
        format!("sr(S) with penalty {sr_pen:.3}, without {sr_plain:.3}"),
    )
}

fn criterion_10(runs: &Runs, in_memory: &FitOutcome) -> Verdict {
    let bundle = &runs.bundle;
    let path = runs.dir.path().join("a/best.ckpt");
    let loaded = Checkpoint::load(&path).unwrap();
    let mut bitwise = true;
    for t in 0..bundle.len() {
        for s in bundle.task(t).split(Split::Test) {
            let a = in_memory.best.predict(bundle, t, &s.values).unwrap();
            let b = loaded.model.predict(bundle, t, &s.values).unwrap();
            bitwise &= a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
        }
    }
    let resaved = Checkpoint::from_bytes(&loaded.to_bytes().unwrap()).unwrap();
    bitwise &= resaved.model == loaded.model;

    let eval = cmd_eval(&EvalArgs {
        checkpoint: path,
        bundle: runs.dir.path().join("bundle"),
        out: None,
    })
    .unwrap();
    let eval_matches = eval.per_task_accuracy.len() == runs.report.test.per_task_accuracy.len()
        && eval
            .per_task_accuracy
            .iter()
            .zip(&runs.report.test.per_task_accuracy)
            .all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits())
        && eval.mean_accuracy_unweighted.to_bits() == runs.report.test.mean_accuracy_unweighted.to_bits();

    // triple loop: shared embedding × task × variable
    let model = &loaded.model;
    let threshold = 0.1;
    let report = sharing_report(&model.store, &model.kernel, bundle, threshold, 5).unwrap();
    let rows: Vec<usize> = (0..model.store.z.rows()).collect();
    let probs = attend(&model.store, &rows, &model.kernel).unwrap().probs;
    let d = model.store.shared_count();
    let mut counts = vec![0usize; d];
    let mut max_p = vec![vec![0.0f64; bundle.len()]; d];
    for k in 0..d {
        for t in 0..bundle.len() {
            let mut m = f64::NEG_INFINITY;
            for i in bundle.input_rows(t) {
                if probs[(i, k)] > m {
                    m = probs[(i, k)];
                }
            }
            max_p[k][t] = m;
            if m > threshold {
                counts[k] += 1;
            }
        }
    }
    let sharing_matches = report.task_counts == counts
        && report.common.iter().all(|u| {
            u.task_count == counts[u.shared_index]
                && u.top_tasks
                    .iter()
                    .all(|ts| ts.max_probability.to_bits() == max_p[u.shared_index][ts.task_id].to_bits())
        });
    verdict(
        bitwise && eval_matches && sharing_matches,
        format!(
            "bitwise predictions after reload: {bitwise}, eval equals in-run report: {eval_matches}, sharing report equals triple loop: {sharing_matches}"
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, Verdict)> = Vec::new();
    let mut report = |n: u32, v: Verdict| {
        let status = match (v.pass, KNOWN_SHORTFALLS.contains(&n)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known shortfall)",
            (false, false) => "FAIL",
        };
        println!("criterion {n:>2} {status}: {}", v.detail);
        results.push((n, v));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    let mut runs = None;
    report(5, criterion_5(&mut runs));
    let runs = runs.unwrap();
    report(6, criterion_6(&runs));
    let (v7, plain) = criterion_7(&runs.bundle);
    report(7, v7);
    report(8, criterion_8(&runs));
    report(9, criterion_9(&runs.bundle, &plain));
    report(10, criterion_10(&runs, &plain));

    let unexpected: Vec<u32> = results
        .iter()
        .filter(|(n, v)| !v.pass && !KNOWN_SHORTFALLS.contains(n))
        .map(|(n, _)| *n)
        .collect();
    let passed = results.iter().filter(|(_, v)| v.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
