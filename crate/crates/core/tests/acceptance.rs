//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Set `ACCEPTANCE_ONLY=1,5,7` to run a subset.

mod common;

use std::time::Instant;

use mtl::allocation::{kmeans_fit, partition_by_dimension, KMeansConfig, PartitionRule};
use mtl::clusternet::{
    context_gradients, context_loss, function_gradients, function_loss, ClusterArchitecture,
    ClusterNet, GateMode,
};
use mtl::datasets::{
    generate_burgers, save_table, solve_burgers_numerical, synthetic_cylinder_table, BurgersConfig,
    Split, DEFAULT_CFL,
};
use mtl::evaluation::{activation_trace, Surrogate};
use mtl::experiment::{execute, ExperimentConfig, Outcome};
use mtl::nn::{fd_gradient, mse_loss, HiddenActivation, Mlp, OutputActivation};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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

const SEEDS: [u64; 3] = [0, 1, 2];

fn burgers_config(structure: &str, allocation: &str, seed: u64) -> ExperimentConfig {
    let text = format!(
        r#"
seed = {seed}
[dataset]
kind = "burgers"
{allocation}
[model]
structure = "{structure}"
[training]
seed = {seed}
[evaluation]
regions = ["u > 3.5"]
"#
    );
    ExperimentConfig::from_toml(&text).expect("valid config")
}

const PARTITION_X: &str = "[allocation]\nmethod = \"partition\"\ndimension = \"x\"\nk = 4\n";

/// Trained runs shared by criteria 1 to 4.
struct Runs {
    fcn: Vec<(Outcome, f64)>,
    mtl: Vec<(Outcome, f64)>,
}

impl Runs {
    fn new() -> Self {
        Self {
            fcn: Vec::new(),
            mtl: Vec::new(),
        }
    }

    fn fcn(&mut self, n: usize) -> &[(Outcome, f64)] {
        while self.fcn.len() < n {
            let seed = SEEDS[self.fcn.len()];
            let t = Instant::now();
            let out = execute(&burgers_config("3*32", "", seed)).expect("fcn run");
            self.fcn.push((out, t.elapsed().as_secs_f64()));
        }
        &self.fcn[..n]
    }

    fn mtl(&mut self, n: usize) -> &[(Outcome, f64)] {
        while self.mtl.len() < n {
            let seed = SEEDS[self.mtl.len()];
            let t = Instant::now();
            let out = execute(&burgers_config("4;3*64;1*5", PARTITION_X, seed)).expect("mtl run");
            self.mtl.push((out, t.elapsed().as_secs_f64()));
        }
        &self.mtl[..n]
    }
}

fn mse(out: &Outcome, region: &str) -> f64 {
    out.report.get("mse", "test", region).unwrap_or(f64::NAN)
}

fn criterion_1(runs: &mut Runs) -> Verdict {
    let (out, secs) = &runs.fcn(1)[0];
    let test = mse(out, "all");
    verdict(
        test <= 1e-3 && *secs < 300.0,
        format!("FCN 3*32 test MSE {test:.3e} (<= 1e-3), {secs:.0}s (< 300s)"),
    )
}

fn criterion_2(runs: &mut Runs) -> Verdict {
    let fcn: Vec<f64> = runs
        .fcn(SEEDS.len())
        .iter()
        .map(|(o, _)| mse(o, "u>3.5"))
        .collect();
    let mtl: Vec<f64> = runs
        .mtl(SEEDS.len())
        .iter()
        .map(|(o, _)| mse(o, "u>3.5"))
        .collect();
    let wins = fcn.iter().zip(&mtl).filter(|(f, m)| m < f).count();
    let pairs: Vec<String> = fcn
        .iter()
        .zip(&mtl)
        .map(|(f, m)| format!("mtl {m:.2e} vs fcn {f:.2e}"))
        .collect();
    verdict(
        2 * wins > SEEDS.len(),
        format!(
            "u>3.5 test MSE, MTL_x wins {wins}/{}: {}",
            SEEDS.len(),
            pairs.join("; ")
        ),
    )
}

fn criterion_3(runs: &mut Runs) -> Verdict {
    let (out, _) = &runs.mtl(1)[0];
    let lc = out.report.extra["val_context_loss"];
    let agree = out.report.extra["val_gate_agreement"];
    verdict(
        lc < 0.05 && agree >= 0.95,
        format!(
            "validation L_c {lc:.4} (< 0.05), gate agreement {:.2}% (>= 95%)",
            agree * 100.0
        ),
    )
}

fn criterion_4(runs: &mut Runs) -> Verdict {
    let (out, _) = &runs.mtl(1)[0];
    let Some(Surrogate::ClusterNet(net)) = &out.model else {
        return verdict(false, "MTL run produced no ClusterNet");
    };
    let alloc = out.allocation.as_ref().expect("allocation");
    let labels = out.labels.as_ref().expect("labels");
    let rows = out.data.rows(Split::Test);
    let trace =
        activation_trace(net, &out.data, rows, alloc.dimension(), GateMode::Soft).expect("trace");
    let groups: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
    let dom = trace.dominance(&groups).expect("dominance");
    let worst = dom.iter().map(|d| d.fraction).fold(1.0, f64::min);
    let parts: Vec<String> = dom
        .iter()
        .map(|d| {
            format!(
                "bin {} -> cluster {} {:.1}%",
                d.group,
                d.cluster,
                d.fraction * 100.0
            )
        })
        .collect();
    verdict(dom.len() == 4 && worst >= 0.9, parts.join(", "))
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for draw in 0..100u64 {
        let mut sizes = vec![rng.gen_range(1..=4)];
        for _ in 0..rng.gen_range(0..=3) {
            sizes.push(rng.gen_range(1..=16));
        }
        sizes.push(rng.gen_range(1..=3));
        let net = Mlp::new(
            &sizes,
            HiddenActivation::Tanh,
            OutputActivation::Identity,
            draw,
        )
        .unwrap();
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t: Vec<f64> = (0..*sizes.last().unwrap())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let (_, up) = mse_loss(&net.forward(&x).unwrap(), &t).unwrap();
        let analytic = net.backward(&x, &up).unwrap();
        let numeric = fd_gradient(|n| Ok(mse_loss(&n.forward(&x)?, &t)?.0), &net, 1e-6).unwrap();
        worst = worst.max(analytic.relative_error(&numeric));
    }
    let arch = ClusterArchitecture {
        input_width: 3,
        output_width: 1,
        clusters: 2,
        function_hidden: vec![8],
        context_hidden: vec![8],
    };
    let model = ClusterNet::new(&arch, 55).unwrap();
    let x = Array2::from_shape_fn((10, 3), |_| rng.gen_range(-1.0..1.0));
    let y = Array2::from_shape_fn((10, 1), |_| rng.gen_range(-1.0..1.0));
    let p = Array2::from_shape_fn((10, 2), |(i, j)| if i % 2 == j { 1.0 } else { 0.0 });
    let (_, fg) = function_gradients(&model, x.view(), y.view()).unwrap();
    let (_, cg) = context_gradients(&model, x.view(), p.view()).unwrap();
    let mut cn_worst: f64 = 0.0;
    for j in 0..2 {
        let fd_f = fd_gradient(
            |n| {
                let mut m = model.clone();
                m.clusters_mut()[j].function_net = n.clone();
                function_loss(&m, x.view(), y.view())
            },
            &model.clusters()[j].function_net,
            1e-6,
        )
        .unwrap();
        let fd_c = fd_gradient(
            |n| {
                let mut m = model.clone();
                m.clusters_mut()[j].context_net = n.clone();
                context_loss(&m, x.view(), p.view())
            },
            &model.clusters()[j].context_net,
            1e-6,
        )
        .unwrap();
        cn_worst = cn_worst
            .max(fg[j].relative_error(&fd_f))
            .max(cg[j].relative_error(&fd_c));
    }
    verdict(
        worst < 1e-4 && cn_worst < 1e-4,
        format!("100 MLPs worst {worst:.2e}, ClusterNet q=2 L_f/L_c worst {cn_worst:.2e} (< 1e-4)"),
    )
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut monotone = true;
    for i in 0..50u64 {
        let n = rng.gen_range(20..200);
        let d = rng.gen_range(1..=4);
        let k = rng.gen_range(2..=6);
        let data = Array2::from_shape_fn((n, d), |_| rng.gen_range(-5.0..5.0));
        let (model, _) = kmeans_fit(data.view(), &KMeansConfig::new(k, i)).unwrap();
        for seg in model.monotone_segments() {
            monotone &= seg.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
    let mut optimal = 0;
    let mut worst_gap: f64 = 0.0;
    let instances = 50;
    for i in 0..instances {
        let n = rng.gen_range(3..=8);
        let d = rng.gen_range(1..=2);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let data = Array2::from_shape_fn((n, d), |(r, c)| points[r][c]);
        let (model, _) = kmeans_fit(data.view(), &KMeansConfig::new(2, 100 + i)).unwrap();
        let best = common::brute_force_two_means(&points);
        let gap = model.inertia - best;
        worst_gap = worst_gap.max(gap);
        if gap <= 1e-9 * best.max(1.0) {
            optimal += 1;
        }
    }
    verdict(
        monotone && optimal == instances,
        format!(
            "trace monotone between repairs on 50 instances: {monotone}; \
             exhaustive optimum matched {optimal}/{instances} (worst gap {worst_gap:.1e})"
        ),
    )
}

fn criterion_7() -> Verdict {
    let data = generate_burgers(&BurgersConfig::default()).unwrap();
    let xs: Vec<f64> = data.inputs.column(1).to_vec();
    let mut mismatches = 0;
    let mut cases = 0;
    for k in [2usize, 3, 4, 5, 6, 8] {
        let (_, labels) = partition_by_dimension(data.inputs.view(), 1, k, None).unwrap();
        // independent edges: equal widths over [0.2, 4.8]
        let edges: Vec<f64> = (0..=k)
            .map(|b| 0.2 + (4.8 - 0.2) * b as f64 / k as f64)
            .collect();
        for (&v, &l) in xs.iter().zip(&labels) {
            cases += 1;
            if common::enumerate_bin(v, &edges) != l {
                mismatches += 1;
            }
        }
    }
    let widths = [1.0, 1.0, 1.2, 1.4];
    let (rule, labels) = partition_by_dimension(data.inputs.view(), 1, 4, Some(&widths)).unwrap();
    let mut edges = vec![0.2];
    for w in widths {
        edges.push(edges.last().unwrap() + w);
    }
    for (&v, &l) in xs.iter().zip(&labels) {
        cases += 1;
        if common::enumerate_bin(v, &edges) != l {
            mismatches += 1;
        }
    }
    let _: &PartitionRule = &rule;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let arch = ClusterArchitecture {
            input_width: rng.gen_range(1..=4),
            output_width: rng.gen_range(1..=3),
            clusters: rng.gen_range(1..=5),
            function_hidden: vec![rng.gen_range(1..=16); rng.gen_range(1..=3)],
            context_hidden: vec![rng.gen_range(1..=8)],
        };
        let model = ClusterNet::new(&arch, seed).unwrap();
        let x: Vec<f64> = (0..arch.input_width)
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        let y = model.forward(&x).unwrap().y;
        let oracle = common::loop_clusternet(&model, &x);
        for (a, b) in y.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        mismatches == 0 && worst <= 1e-12,
        format!(
            "partition labels vs enumeration: {mismatches} mismatches in {cases}; \
             gated sum vs loop on 100 models: max diff {worst:.1e} (<= 1e-12)"
        ),
    )
}

fn criterion_8() -> Verdict {
    let cfg = BurgersConfig::default();
    let data = generate_burgers(&cfg).unwrap();
    let wave = cfg.wave;
    let (ts, xs) = (cfg.t.values(), cfg.x.values());
    let interior = |v: f64, axis: &[f64]| v > axis[0] && v < axis[axis.len() - 1];
    let h = 1e-4;
    let mut residual: f64 = 0.0;
    let mut generator_exact = true;
    for (row, u) in data.inputs.outer_iter().zip(data.targets.column(0)) {
        let (t, x, v) = (row[0], row[1], row[2]);
        generator_exact &= *u == wave.u(t, x, v);
        if !interior(t, &ts) || !interior(x, &xs) {
            continue;
        }
        let u0 = wave.u(t, x, v);
        let ut = (wave.u(t + h, x, v) - wave.u(t - h, x, v)) / (2.0 * h);
        let ux = (wave.u(t, x + h, v) - wave.u(t, x - h, v)) / (2.0 * h);
        let uxx = (wave.u(t, x + h, v) - 2.0 * u0 + wave.u(t, x - h, v)) / (h * h);
        residual = residual.max((ut + u0 * ux - v * uxx).abs());
    }

    let dx = 0.005;
    let grid: Vec<f64> = (0..=12000).map(|i| -30.0 + dx * i as f64).collect();
    let mut cn_worst: f64 = 0.0;
    let mut parts = Vec::new();
    for v in [1.0, 2.4, 4.8] {
        let initial: Vec<f64> = grid.iter().map(|&x| wave.u(0.2, x, v)).collect();
        let times = [0.2, 0.6, 1.0];
        let sol = solve_burgers_numerical(&initial, v, &grid, &times, DEFAULT_CFL).unwrap();
        let mut err: f64 = 0.0;
        for (ti, &t) in times.iter().enumerate().skip(1) {
            for (xi, &x) in grid.iter().enumerate() {
                if (0.2..=4.8).contains(&x) {
                    err = err.max((sol[[ti, xi]] - wave.u(t, x, v)).abs());
                }
            }
        }
        parts.push(format!("v={v}: {err:.1e}"));
        cn_worst = cn_worst.max(err);
    }
    verdict(
        generator_exact && residual < 1e-3 && cn_worst < 1e-2,
        format!(
            "PDE residual max {residual:.1e} (< 1e-3); numerical vs analytic {} (< 1e-2)",
            parts.join(", ")
        ),
    )
}

fn criterion_9() -> Verdict {
    let data = generate_burgers(&BurgersConfig::default()).unwrap();
    let u = data.targets.column(0);
    let max = u.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let high = u.iter().filter(|&&v| v > 0.7 * max).count();
    let frac = high as f64 / u.len() as f64;
    verdict(
        frac < 0.15,
        format!(
            "{high}/{} rows ({:.1}%) have u > 0.7 max(u) (< 15%)",
            u.len(),
            frac * 100.0
        ),
    )
}

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cylinder.csv");
    save_table(&path, &synthetic_cylinder_table().unwrap()).unwrap();
    let config = |structure: &str, allocation: &str| {
        let text = format!(
            r#"
seed = 0
[dataset]
kind = "table"
path = "{}"
schema = "cylinder"
{allocation}
[model]
structure = "{structure}"
[evaluation]
regions = ["Cp > 0.6"]
"#,
            path.display()
        );
        ExperimentConfig::from_toml(&text).unwrap()
    };
    let kmeans = "[allocation]\nmethod = \"kmeans\"\nk = 4\n";
    let mtl = execute(&config("4;3*64;1*5", kmeans)).expect("cylinder ClusterNet run");
    let fcn = execute(&config("3*32", "")).expect("cylinder FCN run");
    let rows = mtl.data.len();
    let (m_hi, f_hi) = (mse(&mtl, "Cp>0.6"), mse(&fcn, "Cp>0.6"));
    let lc = mtl.report.extra["val_context_loss"];
    let agree = mtl.report.extra["val_gate_agreement"];
    let Some(Surrogate::ClusterNet(net)) = &mtl.model else {
        return verdict(false, "no ClusterNet trained");
    };
    let labels = mtl.labels.as_ref().unwrap();
    let test = mtl.data.rows(Split::Test);
    let trace = activation_trace(net, &mtl.data, test, None, GateMode::Soft).unwrap();
    let groups: Vec<usize> = test.iter().map(|&r| labels[r]).collect();
    let worst_dom = trace
        .dominance(&groups)
        .unwrap()
        .iter()
        .map(|d| d.fraction)
        .fold(1.0, f64::min);
    let pipeline = rows == 6000 && mtl.report.get("mse", "test", "all").is_some();
    verdict(
        pipeline && m_hi < f_hi && lc < 0.05 && agree >= 0.95 && worst_dom >= 0.9,
        format!(
            "{rows}-row synthetic table; Cp>0.6 MSE mtl {m_hi:.2e} vs fcn {f_hi:.2e}; \
             L_c {lc:.4}; agreement {:.1}%; min dominance {:.1}%",
            agree * 100.0,
            worst_dom * 100.0
        ),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|p| p.trim().parse().ok()).collect());
    let wanted = |n: u32| only.as_ref().map_or(true, |o| o.contains(&n));
    let mut runs = Runs::new();
    let mut failed = Vec::new();
    let checks: Vec<(u32, &str, Box<dyn FnOnce(&mut Runs) -> Verdict>)> = vec![
        (5, "gradient oracle", Box::new(|_| criterion_5())),
        (6, "k-means correctness", Box::new(|_| criterion_6())),
        (
            7,
            "partition and gated-sum exactness",
            Box::new(|_| criterion_7()),
        ),
        (8, "PDE fidelity", Box::new(|_| criterion_8())),
        (9, "imbalance", Box::new(|_| criterion_9())),
        (1, "baseline magnitude", Box::new(criterion_1)),
        (2, "MTL advantage on u > 3.5", Box::new(criterion_2)),
        (3, "context convergence", Box::new(criterion_3)),
        (4, "activation specialization", Box::new(criterion_4)),
        (10, "cylinder-table pipeline", Box::new(|_| criterion_10())),
    ];
    for (n, name, check) in checks {
        if !wanted(n) {
            continue;
        }
        let t = Instant::now();
        let v = check(&mut runs);
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n:>2} [{status}] {name}: {} ({:.1}s)",
            v.detail,
            t.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
