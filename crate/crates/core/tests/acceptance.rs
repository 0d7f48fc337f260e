//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for each,
//! and exits non-zero if any criterion fails.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use kecor::acquisition::{
    select_entropy, select_kecor, AcquisitionConfig, LogitsMatrix, PoolState, Strategy,
};
use kecor::coding_rate::{kernel_coding_rate_matrix, marginal_gain, CodingRateParams};
use kecor::config::RunConfig;
use kecor::io::{read_tensor, write_tensor, Tensor};
use kecor::kernels::{gram, kernel_last, kernel_ntk, KernelKind, KernelSpec};
use kecor::linalg::{cholesky, logdet_eye_plus, CholeskyFactor, DenseMatrix};
use kecor::proxy::{Activation, ProxyNetwork};
use kecor::sim::{report_csv_string, run_loop, LoopConfig, SyntheticTask};
use kecor::Error;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(outcome: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    let pass = outcome.pass && elapsed <= limit;
    let detail = format!(
        "{}; {:.2}s (limit {}s)",
        outcome.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    Outcome { pass, detail }
}

fn random_proxy(r: &mut ChaCha8Rng, input_dim: usize, seed: u64) -> ProxyNetwork {
    let hidden: Vec<usize> = (0..r.random_range(0..=2))
        .map(|_| r.random_range(1..=32))
        .collect();
    let output = r.random_range(1..=3);
    let act = if r.random_bool(0.5) {
        Activation::Relu
    } else {
        Activation::Identity
    };
    ProxyNetwork::init(
        input_dim,
        &hidden,
        output,
        r.random_range(0.0..0.5),
        act,
        seed,
    )
    .unwrap()
}

fn ntk_correctness() -> Outcome {
    let mut r = rng(100);
    let trials = 120;
    let (mut worst_ntk, mut worst_last) = (0.0f64, 0.0f64);
    for t in 0..trials {
        let dim = r.random_range(1..=6);
        let net = random_proxy(&mut r, dim, t);
        let a = normal_vec(&mut r, dim);
        let b = normal_vec(&mut r, dim);
        let (_, ta) = net.forward(&a).unwrap();
        let (_, tb) = net.forward(&b).unwrap();
        worst_ntk = worst_ntk.max(rel_err(
            kernel_ntk(&ta, &tb).unwrap(),
            jacobian_ntk(&net, &a, &b),
        ));
        let last = last_layer_range(&net);
        let fd = gradient_inner(
            &fd_jacobian(&net, &a, last.clone(), 1e-6),
            &fd_jacobian(&net, &b, last, 1e-6),
        );
        worst_last = worst_last.max(rel_err(kernel_last(&ta, &tb).unwrap(), fd));
    }
    outcome(
        worst_ntk <= 1e-6 && worst_last <= 1e-6,
        format!(
            "{trials} proxies; max rel err ntk {worst_ntk:.1e}, last {worst_last:.1e} (tol 1e-6)"
        ),
    )
}

fn coding_rate_correctness() -> Outcome {
    let mut r = rng(200);
    let mut worst = 0.0f64;
    let mut worst_sylvester = 0.0f64;
    for n in [1, 2, 3, 5, 8, 13, 21, 34, 50] {
        for rank in [1, n / 2 + 1, n + 3] {
            let k = random_psd(&mut r, n, rank);
            let c = r.random_range(0.01..10.0);
            let want = eig_logdet_eye_plus(c, &k);
            worst = worst.max(rel_err(logdet_eye_plus(c, &k).unwrap(), want));
            let d = r.random_range(1..=16);
            let eps = r.random_range(0.1..2.0);
            let p = CodingRateParams::new(eps, d, n).unwrap();
            let want_rate = 0.5 * eig_logdet_eye_plus(p.coefficient(), &k);
            worst = worst.max(rel_err(
                kernel_coding_rate_matrix(&k, &p).unwrap(),
                want_rate,
            ));
        }
        let z = random_matrix(&mut r, n.div_ceil(2), n);
        let small = logdet_eye_plus(0.3, &z.gram_columns()).unwrap();
        let large = logdet_eye_plus(0.3, &z.gram_rows()).unwrap();
        worst_sylvester = worst_sylvester.max(rel_err(small, large));
    }
    outcome(
        worst <= 1e-9 && worst_sylvester <= 1e-9,
        format!("sizes 1..50; max rel err {worst:.1e}, Sylvester {worst_sylvester:.1e} (tol 1e-9)"),
    )
}

fn random_logits(r: &mut ChaCha8Rng, classes: usize, samples: usize) -> LogitsMatrix {
    let data: Vec<f64> = (0..classes * samples)
        .map(|_| r.random_range(-3.0..3.0))
        .collect();
    LogitsMatrix::new(DenseMatrix::new(classes, samples, data).unwrap())
}

fn spec_for(kind: KernelKind, proxy: &ProxyNetwork) -> KernelSpec {
    match kind {
        KernelKind::Linear => KernelSpec::linear(),
        KernelKind::Rbf => KernelSpec::rbf(1.0),
        KernelKind::Last => KernelSpec::last(proxy.snapshot()),
        KernelKind::Ntk => KernelSpec::ntk(proxy.snapshot()),
    }
}

fn greedy_bound() -> Outcome {
    let mut r = rng(300);
    let pools = 64;
    let bound = 1.0 - (-1.0f64).exp();
    let (mut worst_ratio, mut worst_telescope) = (f64::INFINITY, 0.0f64);
    for p in 0..pools {
        let kind = KernelKind::ALL[p % 4];
        let sigma = if (p / 4) % 2 == 0 { 0.0 } else { 0.1 };
        let total = r.random_range(5..=12);
        let dim = r.random_range(1..=5);
        let features = random_matrix(&mut r, dim, total);
        let logits = random_logits(&mut r, 3, total);
        let labeled: Vec<usize> = (0..total).filter(|_| r.random_bool(0.15)).collect();
        let pool = PoolState::new(total, &labeled).unwrap();
        let n = r.random_range(1..=4).min(pool.unlabeled().len());
        let proxy = random_proxy(&mut r, dim, p as u64);
        let cfg = AcquisitionConfig::new(n, spec_for(kind, &proxy)).with_sigma_ent(sigma);
        let result = select_kecor(&features, &logits, &pool, &cfg).unwrap();

        let cands = pool.unlabeled();
        let k = gram(&cfg.kernel, &features, cands).unwrap().matrix;
        let c = CodingRateParams::new(cfg.epsilon, dim, n)
            .unwrap()
            .coefficient();
        let entropy: Vec<f64> = cands
            .iter()
            .map(|&i| kecor::acquisition::mean_entropy(&logits, i).unwrap())
            .collect();
        let objective = |s: &[usize]| {
            set_objective(&k, c, s) + sigma * s.iter().map(|&x| entropy[x]).sum::<f64>() / n as f64
        };
        let best = subsets(cands.len(), n)
            .iter()
            .map(|s| objective(s))
            .fold(f64::NEG_INFINITY, f64::max);
        let positions: Vec<usize> = result
            .chosen
            .iter()
            .map(|i| cands.iter().position(|c| c == i).unwrap())
            .collect();
        let direct = objective(&positions);
        let summed: f64 = result.gains.iter().sum();
        worst_telescope = worst_telescope
            .max((summed - direct).abs())
            .max((result.objective - direct).abs());
        if best > 0.0 {
            worst_ratio = worst_ratio.min(direct / best);
        }
    }
    outcome(
        worst_ratio >= bound && worst_telescope <= 1e-8,
        format!(
            "{pools} pools x 4 kernels; min greedy/optimum {worst_ratio:.4} (bound {bound:.4}), telescoping err {worst_telescope:.1e} (tol 1e-8)"
        ),
    )
}

fn gain_given(k: &DenseMatrix, c: f64, members: &[usize], x: usize) -> f64 {
    let factor = if members.is_empty() {
        CholeskyFactor::empty()
    } else {
        let sub = k.principal(members).unwrap();
        cholesky(
            &DenseMatrix::from_fn(sub.rows(), sub.cols(), |i, j| {
                c * sub.get(i, j) + f64::from(u8::from(i == j))
            })
            .unwrap(),
            0.0,
        )
        .unwrap()
    };
    let col: Vec<f64> = members.iter().map(|&s| k.get(x, s)).collect();
    marginal_gain(&factor, &col, k.get(x, x), c).unwrap()
}

fn submodularity() -> Outcome {
    let mut r = rng(400);
    let slack = 1e-12;
    let (mut checked, mut violations) = (0usize, 0usize);
    for p in 0..8 {
        let size = 8;
        let kind = KernelKind::ALL[p % 4];
        let dim = r.random_range(1..=4);
        let features = random_matrix(&mut r, dim, size);
        let proxy = random_proxy(&mut r, dim, 40 + p as u64);
        let k = gram(
            &spec_for(kind, &proxy),
            &features,
            &(0..size).collect::<Vec<_>>(),
        )
        .unwrap()
        .matrix;
        let c = r.random_range(0.1..5.0);
        // gains[mask][x] = gain(x | set(mask)) for x ∉ mask
        let gains: Vec<Vec<f64>> = (0u32..1 << size)
            .map(|mask| {
                let members: Vec<usize> = (0..size).filter(|&i| mask & (1 << i) != 0).collect();
                (0..size)
                    .map(|x| {
                        if mask & (1 << x) != 0 {
                            f64::NAN
                        } else {
                            gain_given(&k, c, &members, x)
                        }
                    })
                    .collect()
            })
            .collect();
        for t in 0u32..1 << size {
            // every subset s of t, via the standard submask walk
            let mut s = t;
            loop {
                for x in (0..size).filter(|&x| t & (1 << x) == 0) {
                    let (gs, gt) = (gains[s as usize][x], gains[t as usize][x]);
                    checked += 1;
                    if gs < gt - slack || gt < -slack {
                        violations += 1;
                    }
                }
                if s == 0 {
                    break;
                }
                s = (s - 1) & t;
            }
        }
    }
    outcome(
        violations == 0,
        format!("8 pools of size 8, {checked} (S, T, x) triples; {violations} violations (slack {slack:.0e})"),
    )
}

fn entropy_limit() -> Outcome {
    let mut r = rng(500);
    let fixtures = 20;
    let mut mismatches = 0;
    for f in 0..fixtures {
        let total = r.random_range(6..=30);
        let dim = r.random_range(1..=6);
        let features = random_matrix(&mut r, dim, total);
        let logits = random_logits(&mut r, 4, total);
        let labeled: Vec<usize> = (0..total).filter(|_| r.random_bool(0.2)).collect();
        let pool = PoolState::new(total, &labeled).unwrap();
        let n = r.random_range(1..=5).min(pool.unlabeled().len());
        let proxy = random_proxy(&mut r, dim, 50 + f as u64);
        let spec = spec_for(KernelKind::ALL[f % 4], &proxy).normalized(true);
        let cfg = AcquisitionConfig::new(n, spec).with_sigma_ent(1e6);
        let a = select_kecor(&features, &logits, &pool, &cfg).unwrap();
        let b = select_entropy(&logits, &pool, n).unwrap();
        if a.chosen != b.chosen {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{fixtures} fixtures, normalized kernels; {mismatches} mismatches"),
    )
}

fn simulation_direction() -> Outcome {
    let seeds = 10u64;
    let mut wins = 0;
    let mut reproducible = true;
    let mut pairs = Vec::new();
    for seed in 0..seeds {
        let mut cfg =
            RunConfig::from_json(r#"{"kernel": {"kind": "ntk"}, "sigma_ent": 0.1}"#).unwrap();
        cfg.seed = seed;
        cfg.simulation.task.seed = seed;
        cfg.proxy.layers = vec![64, 64];
        let task = SyntheticTask::generate(&cfg.simulation.task).unwrap();
        assert_eq!(
            (
                task.pool_size(),
                task.dim(),
                task.classes(),
                cfg.initial_labeled(),
                cfg.batch_size(),
                cfg.rounds()
            ),
            (400, 16, 4, 20, 20, 4)
        );
        let mut final_mse = Vec::new();
        for strategy in [Strategy::Kecor, Strategy::Random] {
            cfg.strategy = strategy;
            let lc = LoopConfig::from_run_config(&cfg);
            let first = report_csv_string(&run_loop(&task, &lc).unwrap().reports).unwrap();
            let outcome = run_loop(&task, &lc).unwrap();
            reproducible &= report_csv_string(&outcome.reports).unwrap() == first;
            final_mse.push(outcome.reports.last().unwrap().mse);
        }
        if final_mse[0] <= final_mse[1] {
            wins += 1;
        }
        pairs.push(format!("{:.3}/{:.3}", final_mse[0], final_mse[1]));
    }
    outcome(
        wins >= 7 && reproducible,
        format!(
            "kecor wins {wins}/{seeds} (need 7); CSVs byte-identical: {reproducible}; final mse kecor/random [{}]",
            pairs.join(" ")
        ),
    )
}

fn defaults_output(profile: Option<&str>) -> serde_json::Value {
    let mut args = vec!["defaults"];
    if let Some(p) = profile {
        args.extend(["--profile", p]);
    }
    let out = Command::new(env!("CARGO_BIN_EXE_kecor"))
        .args(&args)
        .output()
        .unwrap();
    assert!(out.status.success());
    serde_json::from_slice(&out.stdout).unwrap()
}

fn hyperparameter_defaults() -> Outcome {
    let plain = defaults_output(None);
    let kitti = defaults_output(Some("kitti"));
    let waymo = defaults_output(Some("waymo"));
    let mut failures = Vec::new();
    for (name, v) in [("default", &plain), ("kitti", &kitti), ("waymo", &waymo)] {
        if v["proxy"]["beta"] != 0.1 {
            failures.push(format!("{name}: beta"));
        }
        if v["proxy"]["layers"] != serde_json::json!([256, 256]) {
            failures.push(format!("{name}: layers"));
        }
        if v["kernel"]["rbf_sigma"] != 1.0 {
            failures.push(format!("{name}: rbf_sigma"));
        }
        if v["kernel"]["kind"] != "ntk" || v["epsilon"] != 0.5 {
            failures.push(format!("{name}: kernel/epsilon"));
        }
    }
    if plain["sigma_ent"] != 0.1 || kitti["sigma_ent"] != 0.1 || waymo["sigma_ent"] != 0.5 {
        failures.push("sigma_ent profiles".into());
    }
    if kitti["batch_size"] != 100 || waymo["batch_size"] != 400 {
        failures.push("batch profiles".into());
    }
    outcome(
        failures.is_empty(),
        format!(
            "beta 0.1, layers [256,256], rbf_sigma 1.0, sigma_ent kitti {} / waymo {}; failures {:?}",
            kitti["sigma_ent"], waymo["sigma_ent"], failures
        ),
    )
}

fn io_round_trip() -> Outcome {
    let mut r = rng(800);
    let dir = tempfile::tempdir().unwrap();
    let specials = [
        0.0,
        -0.0,
        f64::MIN_POSITIVE / 4.0,
        f64::MAX,
        f64::INFINITY,
        f64::NAN,
        -f64::NAN,
    ];
    let (mut identical, mut rejected) = (0, 0);
    let tensors = 100;
    for t in 0..tensors {
        let rank = r.random_range(0..=4);
        let dims: Vec<usize> = (0..rank).map(|_| r.random_range(0..=5)).collect();
        let len: usize = dims.iter().product();
        let data: Vec<f64> = (0..len)
            .map(|_| {
                if r.random_bool(0.1) {
                    specials[r.random_range(0..specials.len())]
                } else {
                    f64::from_bits(r.random())
                }
            })
            .collect();
        let tensor = Tensor::new(dims, data).unwrap();
        let path = dir.path().join(format!("t{t}.kecf"));
        write_tensor(&path, &tensor).unwrap();
        let back = read_tensor(&path).unwrap();
        let bits = |t: &Tensor| t.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if back.dims == tensor.dims && bits(&back) == bits(&tensor) {
            identical += 1;
        }
        let mut bytes = std::fs::read(&path).unwrap();
        let header = 8 + 8 * rank;
        let target = if len > 0 {
            r.random_range(header..header + 8 * len)
        } else {
            bytes.len() - 1
        };
        bytes[target] ^= 1 << r.random_range(0..8);
        std::fs::write(&path, &bytes).unwrap();
        if matches!(read_tensor(&path), Err(Error::BadCrc)) {
            rejected += 1;
        }
    }
    outcome(
        identical == tensors && rejected == tensors,
        format!("{tensors} tensors; {identical} bitwise identical, {rejected} corruptions rejected with BadCrc"),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome, u64);
    let criteria: [Criterion; 8] = [
        ("ntk-correctness", ntk_correctness, 60),
        ("coding-rate-correctness", coding_rate_correctness, 10),
        ("greedy-optimality-bound", greedy_bound, 120),
        ("submodularity-monotonicity", submodularity, 600),
        ("entropy-limit", entropy_limit, 600),
        ("al-simulation-direction", simulation_direction, 600),
        ("hyperparameter-defaults", hyperparameter_defaults, 600),
        ("tensorfile-round-trip", io_round_trip, 600),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let result = within(run(), start.elapsed(), Duration::from_secs(limit));
        if !result.pass {
            failed += 1;
        }
        println!(
            "[{}] {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
