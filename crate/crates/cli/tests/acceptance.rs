//! Acceptance suite. Prints one PASS / FAIL / SKIP line per criterion and
//! exits non-zero on any failure not listed in `KNOWN_RED`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use zosketch::estimator::{zo_gradient, Preconditioner};
use zosketch::numeric::{norm, power_iteration_sym, random_orthogonal, sub};
use zosketch::optimizer::{
    rank_for, run_zo_hessian_aware, run_zo_sketch, theorem1_step, theorem2_step, Method, RunConfig,
    StepPolicy,
};
use zosketch::oracle::{
    load_libsvm, make_quadratic, true_gradient, CountingOracle, DecayKind, LogisticDataset,
    LogisticObjective, Objective, QuadraticSpec, WhiteBox,
};
use zosketch::sketch::{sample_sketch, SketchKind, SketchSpec};
use zosketch::RngStream;
use zosketch_cli::config::TraceCheckConfig;
use zosketch_cli::{cmd_run, trace_check, ExperimentConfig, Overrides, Problem};

/// Criteria that are expected to fail at the stated parameters (see README).
const KNOWN_RED: &[u32] = &[5];

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Verdict::{Fail, Pass, Skip};

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn a9a_path() -> Option<PathBuf> {
    let p = std::env::var_os("ZOSKETCH_A9A")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data/a9a"));
    p.is_file().then_some(p)
}

fn normal_vec(d: usize, stream: RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn sketch(
    kind: SketchKind,
    d: usize,
    ell: usize,
    seed: RngStream,
) -> zosketch::sketch::SketchMatrix {
    let mut spec = SketchSpec::new(kind, d, ell, seed);
    if kind == SketchKind::Sparse {
        spec = spec.with_sparsity(2.min(ell));
    }
    sample_sketch(&spec).expect("valid sketch spec")
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn sketched_gradient_exactness() -> Verdict {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (di, d) in [16usize, 64, 128].into_iter().enumerate() {
        let q = make_quadratic(
            d,
            DecayKind::Exp { rate: 0.95 },
            1e-4,
            &RngStream::new(100 + di as u64, 0),
        )
        .unwrap();
        for kind in SketchKind::ALL {
            for ell in [4usize, 16] {
                for trial in 0..50u64 {
                    let x = normal_vec(d, RngStream::new(trial, 1));
                    let s = sketch(kind, d, ell, RngStream::new(trial, 2));
                    let mut o = CountingOracle::noiseless(&q);
                    let g = zo_gradient(&mut o, &x, &s, 1.0).unwrap();
                    let grad = true_gradient(&q, &x).unwrap();
                    let want = s.project(&grad).unwrap();
                    let err = norm(&sub(&g.direction, &want)) / norm(&grad).max(1.0);
                    worst = worst.max(err);
                    count += 1;
                }
            }
        }
    }
    verdict(
        worst <= 1e-10,
        format!("{count} cases, worst scaled error {worst:.2e}"),
    )
}

fn column_norms() -> Verdict {
    let mut worst = 0.0f64;
    for kind in [SketchKind::Rademacher, SketchKind::Srht] {
        for d in [8usize, 64, 256] {
            for ell in [2usize, 8, 32] {
                for seed in 0..5 {
                    let s = sketch(kind, d, ell, RngStream::new(seed, 3));
                    let want = (d as f64 / ell as f64).sqrt();
                    for i in 0..ell {
                        worst = worst.max((norm(&s.column(i).unwrap()) - want).abs());
                    }
                }
            }
        }
    }
    verdict(worst <= 1e-12, format!("max deviation {worst:.2e}"))
}

fn identity_trace_exactness() -> Verdict {
    let q = QuadraticSpec::identity(64);
    let mut worst = 0.0f64;
    for kind in [SketchKind::Rademacher, SketchKind::Srht] {
        for seed in 0..200 {
            let s = sketch(kind, 64, 8, RngStream::new(seed, 4));
            let x = normal_vec(64, RngStream::new(seed, 5));
            let mut o = CountingOracle::noiseless(&q);
            let tau = zosketch::estimator::trace_estimate(&mut o, &x, &s, 1.0).unwrap();
            worst = worst.max((tau - 64.0).abs());
        }
    }
    verdict(
        worst <= 1e-10,
        format!("400 sketches, max |tau - d| {worst:.2e}"),
    )
}

fn trace_concentration() -> Verdict {
    let problem = Problem::Quadratic(
        make_quadratic(
            256,
            DecayKind::Exp { rate: 0.95 },
            1e-4,
            &RngStream::new(7, 0),
        )
        .unwrap(),
    );
    let mut cfg = ExperimentConfig::load(&shipped("trace_check.toml")).unwrap();
    cfg.trace_check = TraceCheckConfig {
        kinds: vec![SketchKind::Gaussian],
        ells: vec![32],
        samples: 500,
        epsilon: 0.5,
        alpha: 1.0,
        sparsity: None,
    };
    let r = trace_check(&problem, &cfg).unwrap();
    let c = r.cell(SketchKind::Gaussian, 32).unwrap();
    verdict(
        c.success_fraction >= 0.9,
        format!(
            "success fraction {:.3} (mean rel err {:.3})",
            c.success_fraction, c.mean_relative_error
        ),
    )
}

fn sketched_spectral_bound() -> Verdict {
    let (d, ell, k) = (128usize, 16usize, 4usize);
    let q = make_quadratic(
        d,
        DecayKind::Exp { rate: 0.95 },
        0.0,
        &RngStream::new(21, 0),
    )
    .unwrap();
    let a_norm = power_iteration_sym(
        |v, out| out.copy_from_slice(&q.apply_a(v)),
        d,
        100,
        0.0,
        &RngStream::new(0, 6),
    )
    .unwrap();
    let bound = 1.25 * a_norm + q.trace_a() / (4.0 * k as f64);
    let mut hits = 0;
    let mut norms = Vec::new();
    for seed in 0..200 {
        let s = sketch(SketchKind::Gaussian, d, ell, RngStream::new(seed, 7));
        let n = power_iteration_sym(
            |v, out| {
                out.copy_from_slice(&s.apply_transpose(&q.apply_a(&s.apply(v).unwrap())).unwrap())
            },
            ell,
            100,
            0.0,
            &RngStream::new(seed, 8),
        )
        .unwrap();
        if n <= bound {
            hits += 1;
        }
        norms.push(n);
    }
    let rate = hits as f64 / 200.0;
    verdict(
        rate >= 0.95,
        format!(
            "bound {bound:.3} held in {:.1}% of seeds, median norm {:.3}",
            100.0 * rate,
            median(norms)
        ),
    )
}

fn synthetic_logistic(n: usize, d: usize, seed: u64) -> LogisticObjective {
    let mut rng = RngStream::new(seed, 9).rng();
    let w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let mut row = Vec::new();
        for j in 0..d {
            if rng.random::<f64>() < 0.5 {
                row.push((j, StandardNormal.sample(&mut rng)));
            }
        }
        let m: f64 = row.iter().map(|(j, v): &(usize, f64)| w[*j] * v).sum();
        labels.push(if (m >= 0.0) != (rng.random::<f64>() < 0.1) {
            1.0
        } else {
            -1.0
        });
        rows.push(row);
    }
    LogisticObjective::new(
        Arc::new(LogisticDataset::from_rows(rows, labels, d).unwrap()),
        1e-4,
    )
    .unwrap()
}

fn bias_decay() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let toy_path = dir.path().join("toy.svm");
    fs::write(&toy_path, "+1 1:1.0\n-1 2:0.5\n").unwrap();
    let toy =
        LogisticObjective::new(Arc::new(load_libsvm(&toy_path, None).unwrap()), 1e-4).unwrap();
    let synth = synthetic_logistic(100, 20, 1);

    let mut details = Vec::new();
    let mut ok = true;
    for (name, obj, ell) in [("toy", &toy, 2usize), ("synthetic", &synth, 8)] {
        let d = obj.dim();
        let ratios: Vec<f64> = (0..50u64)
            .map(|seed| {
                let x = normal_vec(d, RngStream::new(seed, 10));
                let s = sketch(SketchKind::Gaussian, d, ell, RngStream::new(seed, 11));
                let want = s.project(&obj.gradient(&x)).unwrap();
                let err = |alpha: f64| {
                    let mut o = CountingOracle::noiseless(obj);
                    norm(&sub(
                        &zo_gradient(&mut o, &x, &s, alpha).unwrap().direction,
                        &want,
                    ))
                };
                err(1e-2) / err(5e-3)
            })
            .collect();
        let m = median(ratios);
        ok &= (3.0..=5.0).contains(&m);
        details.push(format!("{name} median ratio {m:.3}"));
    }
    verdict(ok, details.join(", "))
}

fn contraction() -> Verdict {
    let q = make_quadratic(
        300,
        DecayKind::Exp { rate: 0.95 },
        1e-2,
        &RngStream::new(7, 0),
    )
    .unwrap();
    let meta = q.meta();
    let mut cfg = RunConfig::new(
        Method::ZoSketch,
        1e-4,
        StepPolicy::KnownTrace { trace: None },
    );
    cfg.sketch = SketchKind::Gaussian;
    cfg.ell = 10;
    cfg.max_iters = Some(5000);
    let mut o = CountingOracle::noiseless(&q);
    let r = run_zo_sketch(&mut o, &vec![0.0; 300], &cfg, Some(&q)).unwrap();
    let eta = 10.0 / meta.trace.unwrap();
    let mu = meta.strong_convexity.unwrap();
    let ratios: Vec<f64> = r
        .records
        .windows(2)
        .map(|w| w[1].gap.unwrap() / w[0].gap.unwrap())
        .collect();
    let monotone = ratios.iter().filter(|&&x| x <= 1.0).count() as f64 / ratios.len() as f64;
    let med = median(ratios.clone());
    let limit = 1.0 - mu * eta / 8.0;
    verdict(
        ratios.len() == 5000 && med <= limit && monotone >= 0.95,
        format!(
            "median ratio {med:.6} (limit {limit:.6}), non-increasing {:.1}%",
            100.0 * monotone
        ),
    )
}

fn run_shipped(name: &str, out: &Path) -> zosketch_cli::ExperimentSummary {
    let mut cfg = ExperimentConfig::load(&shipped(name)).unwrap();
    cfg.apply(&Overrides {
        out: Some(out.to_path_buf()),
        seeds: Some(vec![0]),
        ..Default::default()
    })
    .unwrap();
    cmd_run(&cfg).unwrap()
}

fn baseline_dominance() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let conv = run_shipped("quadratic_convergence.toml", &dir.path().join("conv"));
    let budget = run_shipped("quadratic_budget.toml", &dir.path().join("budget"));
    let key = "1e-6";
    let q = |s: &zosketch_cli::ExperimentSummary, m: &str| {
        s.method(m).unwrap().median_queries_to_target[key]
    };
    let gd_q = q(&conv, "ZO_GD");
    let gd_gap = budget.method("ZO_GD").unwrap().median_final_gap.unwrap();
    let mut ok = gd_q.is_some();
    let mut parts = vec![format!("ZO_GD {:.0} queries", gd_q.unwrap_or(f64::NAN))];
    for m in ["ZO_Gauss", "ZO_Rad", "ZO_SRHT"] {
        let mq = q(&conv, m);
        let gap = budget.method(m).unwrap().median_final_gap.unwrap();
        ok &= matches!((mq, gd_q), (Some(a), Some(b)) if a <= b / 3.0);
        ok &= gap < gd_gap;
        parts.push(format!("{m} {:.0}", mq.unwrap_or(f64::NAN)));
    }
    parts.push(format!("budget gaps sketched < {gd_gap:.3e}"));
    verdict(ok, parts.join(", "))
}

fn condition_independence() -> Verdict {
    let (d, ell) = (64usize, 16usize);
    let lambdas: Vec<f64> = (0..d)
        .map(|i| 10f64.powf(-4.0 * i as f64 / (d - 1) as f64))
        .collect();
    let u = random_orthogonal(d, &RngStream::new(31, 0)).unwrap();
    let a = normal_vec(d, RngStream::new(31, 1));
    let q = QuadraticSpec::new(Some(u), lambdas, 0.0, a).unwrap();
    let x0 = vec![0.0; d];
    let k = rank_for(ell);

    let p = Preconditioner::exact_quadratic(&q);
    let eta2 = theorem2_step(&q, &x0, &p, k, &RngStream::new(0, 12)).unwrap();
    let mut cfg2 = RunConfig::new(
        Method::ZoHessianAware,
        1e-3,
        StepPolicy::Fixed { eta: eta2 },
    );
    cfg2.ell = ell;
    cfg2.max_iters = Some(2000);
    cfg2.gap_target = Some(1e-8);
    let r2 =
        run_zo_hessian_aware(&mut CountingOracle::noiseless(&q), &x0, &p, &cfg2, Some(&q)).unwrap();
    let g0 = r2.records[0].gap.unwrap();
    let last2 = r2.records.last().unwrap();
    let reached = last2.gap.unwrap() <= 1e-8 * g0;

    let meta = q.meta();
    let eta1 = theorem1_step(meta.smoothness.unwrap(), meta.trace.unwrap(), k);
    let mut cfg1 = RunConfig::new(Method::ZoSketch, 1e-3, StepPolicy::Fixed { eta: eta1 });
    cfg1.ell = ell;
    cfg1.max_queries = Some(2000 * 2 * ell as u64);
    cfg1.record_every = 100;
    let r1 = run_zo_sketch(&mut CountingOracle::noiseless(&q), &x0, &cfg1, Some(&q)).unwrap();
    let rel1 = r1.records.last().unwrap().gap.unwrap() / g0;
    verdict(
        reached && rel1 >= 1e-3,
        format!(
            "preconditioned reached {:.1e} at iter {}, plain at {} queries: {rel1:.3e}",
            last2.gap.unwrap() / g0,
            last2.iter,
            r1.total_queries
        ),
    )
}

fn a9a_config(path: &Path, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&shipped("a9a.toml")).unwrap();
    if let zosketch_cli::ProblemConfig::Logistic { dataset, .. } = &mut cfg.problem {
        *dataset = path.to_path_buf();
    }
    cfg.apply(&Overrides {
        out: Some(out.to_path_buf()),
        ..Default::default()
    })
    .unwrap();
    cfg
}

fn a9a_descent() -> Verdict {
    let Some(path) = a9a_path() else {
        return Skip("a9a not found (set ZOSKETCH_A9A or place it at data/a9a)".into());
    };
    let dir = tempfile::tempdir().unwrap();
    let cfg = a9a_config(&path, dir.path());
    let summary = cmd_run(&cfg).unwrap();
    let sk = summary.method("ZO_Gauss").unwrap();
    let gd = summary.method("ZO_GD").unwrap();
    let csv = fs::read_to_string(dir.path().join(&sk.runs[0].csv)).unwrap();
    let f: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let tail = &f[10.min(f.len())..];
    let dec =
        tail.windows(2).filter(|w| w[1] < w[0]).count() as f64 / (tail.len().max(2) - 1) as f64;
    let (sg, gg) = (sk.median_final_gap.unwrap(), gd.median_final_gap.unwrap());
    verdict(
        dec >= 0.95 && sg < gg,
        format!(
            "f decreasing {:.1}%, gap {sg:.3e} vs ZO_GD {gg:.3e}",
            100.0 * dec
        ),
    )
}

fn a9a_trace() -> Verdict {
    let Some(path) = a9a_path() else {
        return Skip("a9a not found (set ZOSKETCH_A9A or place it at data/a9a)".into());
    };
    let dir = tempfile::tempdir().unwrap();
    let cfg = a9a_config(&path, dir.path());
    let problem = Problem::build(&cfg.problem).unwrap();
    let Problem::Logistic(obj) = &problem else {
        unreachable!()
    };
    let data = obj.dataset();
    let sq: f64 = (0..data.n())
        .map(|i| data.row(i).1.iter().map(|v| v * v).sum::<f64>())
        .sum();
    let want = 0.25 * sq / data.n() as f64 + obj.ridge() * data.d() as f64;
    let report = trace_check(&problem, &cfg).unwrap();
    let c = report.cell(SketchKind::Gaussian, 32).unwrap();
    let rel = (c.mean_tau - want).abs() / want;
    verdict(
        rel <= 0.1,
        format!(
            "mean tau {:.4} vs {want:.4} ({:.2}%)",
            c.mean_tau,
            100.0 * rel
        ),
    )
}

fn collect_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(collect_files(&p));
        } else if p.extension().is_some_and(|x| x == "csv" || x == "json") {
            out.push((
                p.strip_prefix(dir).unwrap().to_path_buf(),
                fs::read(&p).unwrap(),
            ));
        }
    }
    out.sort();
    out
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let mut cfg = ExperimentConfig::load(&shipped("small.toml")).unwrap();
        cfg.apply(&Overrides {
            out: Some(out.clone()),
            ..Default::default()
        })
        .unwrap();
        cmd_run(&cfg).unwrap();
    }
    let (fa, fb) = (
        collect_files(&a.join("runs")),
        collect_files(&b.join("runs")),
    );
    let same = !fa.is_empty()
        && fa == fb
        && fs::read(a.join("summary.json")).unwrap() == fs::read(b.join("summary.json")).unwrap();
    verdict(same, format!("{} CSVs compared", fa.len()))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    check: fn() -> Verdict,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "sketched gradient is exact on quadratics",
            limit: Duration::from_secs(5),
            check: sketched_gradient_exactness,
        },
        Criterion {
            id: 2,
            name: "rademacher/srht column norms",
            limit: Duration::from_secs(1),
            check: column_norms,
        },
        Criterion {
            id: 3,
            name: "trace estimate exact for identity Hessian",
            limit: Duration::from_secs(1),
            check: identity_trace_exactness,
        },
        Criterion {
            id: 4,
            name: "gaussian trace estimate concentrates",
            limit: Duration::from_secs(10),
            check: trace_concentration,
        },
        Criterion {
            id: 5,
            name: "sketched spectral norm bound",
            limit: Duration::from_secs(30),
            check: sketched_spectral_bound,
        },
        Criterion {
            id: 6,
            name: "smoothing bias decays quadratically",
            limit: Duration::from_secs(5),
            check: bias_decay,
        },
        Criterion {
            id: 7,
            name: "per-iteration contraction, d=300 quadratic",
            limit: Duration::from_secs(60),
            check: contraction,
        },
        Criterion {
            id: 8,
            name: "sketched methods beat ZO_GD on quadratics",
            limit: Duration::from_secs(300),
            check: baseline_dominance,
        },
        Criterion {
            id: 9,
            name: "preconditioned run ignores conditioning",
            limit: Duration::from_secs(60),
            check: condition_independence,
        },
        Criterion {
            id: 10,
            name: "adaptive-trace descent on a9a",
            limit: Duration::from_secs(300),
            check: a9a_descent,
        },
        Criterion {
            id: 11,
            name: "logistic trace agreement on a9a",
            limit: Duration::from_secs(30),
            check: a9a_trace,
        },
        Criterion {
            id: 12,
            name: "byte-identical reruns",
            limit: Duration::from_secs(10),
            check: determinism,
        },
    ];

    // Optional comma-separated subset, e.g. ZOSKETCH_CRITERIA=10,11.
    let only: Option<Vec<u32>> = std::env::var("ZOSKETCH_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut unexpected = Vec::new();
    for c in criteria
        .iter()
        .filter(|c| only.as_ref().is_none_or(|o| o.contains(&c.id)))
    {
        let start = Instant::now();
        let v = (c.check)();
        let took = start.elapsed();
        let (status, detail) = match v {
            Pass(d) if took <= c.limit => ("PASS", d),
            Pass(d) => ("FAIL", format!("{d}; took {took:.1?} > {:?}", c.limit)),
            Fail(d) => ("FAIL", d),
            Skip(d) => ("SKIP", d),
        };
        let known = status == "FAIL" && KNOWN_RED.contains(&c.id);
        println!(
            "[{:>2}] {:<44} {status}{}  {detail} ({took:.1?})",
            c.id,
            c.name,
            if known { " (known)" } else { "" }
        );
        if status == "FAIL" && !known {
            unexpected.push(c.id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
