//! End-to-end acceptance checks. Runs as a plain binary so every check prints
//! its own PASS/FAIL line; exits non-zero when any check fails.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use basketflow::arm::{calibration_gap, calibration_sweep, collision_probability, mine_rules, HashEnsemble, MiningOptions};
use basketflow::cli;
use basketflow::config::{QueryWindows, RunConfig};
use basketflow::eval::{metrics, run_protocol, select_query_windows, user_repetition_test, ProtocolConfig, Scorer};
use basketflow::ingest::{window_stream, write_canonical};
use basketflow::model::{ExecutionMode, Hyperparameters, UnitId};
use basketflow::ome::{task_loss_and_grads, OnlineTrainer, TrainTask, WeightedUnit};
use basketflow::seeds;
use basketflow::stats::CooccurrenceIndex;
use basketflow::synthetic::{repeat_buyer_corpus, PairSwap, PlantedStream, PlantedStreamConfig, RarePairs};
use basketflow::{Basket, EmbeddingStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn hp(seed: u64) -> Hyperparameters {
    Hyperparameters {
        dim: 32,
        epochs: 10,
        seed,
        mode: ExecutionMode::Deterministic,
        ..Hyperparameters::default()
    }
}

fn pair_set(rules: &[basketflow::arm::AssociationRule]) -> HashSet<(String, String)> {
    rules.iter().map(|r| (r.product_a.clone(), r.product_b.clone())).collect()
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dim = 8;
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let mut store = EmbeddingStore::new(dim);
        let n_ctx = rng.random_range(0..=4);
        let user_target = n_ctx > 0 && rng.random_bool(0.3);
        // target, user, context products, 3 negatives
        let n_units = 2 + n_ctx + 3;
        for i in 0..n_units {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let unit = if i == 1 || (i == 0 && user_target) {
                UnitId::user(format!("u{i}"))
            } else {
                UnitId::product(format!("p{i}"))
            };
            store.insert(unit, &v);
        }
        let ctx: Vec<WeightedUnit> = (0..n_ctx)
            .map(|k| WeightedUnit { unit: 2 + k, weight: rng.random_range(0.1..50.0) })
            .collect();
        let task = if user_target {
            TrainTask::user(0, ctx).expect("nonempty context")
        } else {
            TrainTask::product(0, 1, ctx)
        };
        let negs: Vec<usize> = (0..3).map(|k| 2 + n_ctx + k).collect();
        let analytic = task_loss_and_grads(&task, &negs, &store);
        for (unit, grad) in &analytic.grads {
            for j in 0..dim {
                let x = store.vector(*unit)[j];
                store.vector_mut(*unit)[j] = x + eps;
                let up = task_loss_and_grads(&task, &negs, &store).loss;
                store.vector_mut(*unit)[j] = x - eps;
                let down = task_loss_and_grads(&task, &negs, &store).loss;
                store.vector_mut(*unit)[j] = x;
                let numeric = (up - down) / (2.0 * eps);
                let rel = (grad[j] - numeric).abs() / grad[j].abs().max(numeric.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-5 && secs < 10.0,
        format!("worst relative error {worst:.2e} over 200 tasks, {secs:.2}s"),
    )
}

fn lsh_collision_law() -> Outcome {
    let start = Instant::now();
    let dim = 32;
    let trials = 20_000u64;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (ci, c) in [-0.5f64, 0.0, 0.5, 0.9].into_iter().enumerate() {
        let mut a = vec![0.0; dim];
        a[0] = 1.0;
        let mut b = vec![0.0; dim];
        b[0] = c;
        b[1] = (1.0 - c * c).sqrt();
        let hits = (0..trials)
            .filter(|&s| {
                let e = HashEnsemble::new(dim, 4, 11, seeds::sub_seed(s + ci as u64 * trials, seeds::ENSEMBLE)).unwrap();
                (0..11).any(|t| e.signature(&a, t) == e.signature(&b, t))
            })
            .count();
        let rate = hits as f64 / trials as f64;
        let expect = collision_probability(c, 4, 11);
        worst = worst.max((rate - expect).abs());
        parts.push(format!("c={c}: {rate:.4} vs {expect:.4}"));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 0.015 && secs < 60.0,
        format!("{}; max deviation {worst:.4}, {secs:.1}s", parts.join(", ")),
    )
}

fn calibration() -> Outcome {
    let fixed = calibration_gap(4, 11, 4.3, 0.001).max_gap;
    let sweep = calibration_sweep(1..=8, 1..=20, 0.001);
    let best = &sweep[0];
    outcome(
        fixed <= 0.08 && best.gap >= fixed - 0.01,
        format!(
            "gap(4,11,4.3) = {fixed:.4}; best refit ({},{},A={:.3}) = {:.4}",
            best.functions, best.tables, best.scale, best.gap
        ),
    )
}

fn lift_oracle() -> Outcome {
    let fixture: Vec<Basket> = [["A", "B"], ["A", "B"], ["A", "C"], ["B", "C"], ["C", "D"]]
        .iter()
        .enumerate()
        .map(|(i, items)| Basket::new(format!("b{i}"), i as f64, "u").with_items(items.map(|p| (p, 1.0))))
        .collect();
    let lift = CooccurrenceIndex::build(&fixture).lift("A", "B").unwrap();
    let lift_ok = (lift - 0.4 / 0.36).abs() < 1e-9 && (lift - 1.1111).abs() < 1e-4;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let baskets: Vec<Basket> = (0..1000)
        .map(|i| {
            let mut b = Basket::new(format!("b{i:04}"), (i / 100) as f64 * 86_400.0 + (i % 100) as f64, format!("u{}", rng.random_range(0..30)));
            for _ in 0..rng.random_range(1..=6) {
                b.push_item(format!("p{}", rng.random_range(0..60)), Some(1.0));
            }
            b
        })
        .collect();
    let windows = window_stream(&baskets, 1).unwrap();
    let mut inc = CooccurrenceIndex::new();
    for w in &windows {
        inc.add_window(w);
    }
    let same = inc == CooccurrenceIndex::build(&baskets);
    outcome(
        lift_ok && same && windows.len() == 10,
        format!("lift(A,B) = {lift:.10}; incremental over {} windows equals batch: {same}", windows.len()),
    )
}

fn metric_oracles() -> Outcome {
    let lists: Vec<Vec<usize>> = vec![
        vec![1],
        vec![2],
        vec![1, 2, 4],
        vec![1, 3],
        vec![11, 11, 11],
        vec![1, 1, 1, 1],
        vec![3, 1, 4, 1, 5, 9, 2, 6],
        vec![10],
        vec![7, 7],
        vec![2, 3, 5, 7, 11],
        vec![1, 11],
        vec![4, 8],
        vec![6, 5, 4, 3, 2, 1],
        vec![9, 1],
        vec![5],
        vec![2, 2, 2, 2, 3],
        vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
        vec![8, 1, 1],
        vec![3, 3, 1],
        vec![11, 1, 6, 2],
    ];
    let ks = [1, 2, 3, 5, 10, 11];
    let mut worst: f64 = 0.0;
    for l in &lists {
        let r = metrics(l, &ks).unwrap();
        let n = l.len() as f64;
        let mut mrr = 0.0;
        let mut dcg = 0.0;
        for &x in l {
            mrr += 1.0 / x as f64;
            dcg += std::f64::consts::LN_2 / ((x + 1) as f64).ln();
        }
        worst = worst.max((r.mrr - mrr / n).abs()).max((r.dcg - dcg / n).abs());
        for k in ks {
            // min(1, ⌊k/rank⌋)
            let rk = l.iter().map(|&x| (k / x).min(1) as f64).sum::<f64>() / n;
            worst = worst.max((r.recall_at[&k] - rk).abs());
        }
    }
    let m = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut props = true;
    for _ in 0..1000 {
        let l: Vec<usize> = (0..rng.random_range(1..30)).map(|_| rng.random_range(1..=m + 1)).collect();
        let ks: Vec<usize> = (1..=m + 1).collect();
        let r = metrics(&l, &ks).unwrap();
        props &= ks.windows(2).all(|w| r.recall_at[&w[0]] <= r.recall_at[&w[1]]);
        props &= r.recall_at[&(m + 1)] == 1.0;
    }
    outcome(
        worst <= 1e-12 && props,
        format!("max deviation {worst:.1e} on 20 lists; monotone recall and R@(M+1)=1 on 1000 lists: {props}"),
    )
}

fn planted_recovery() -> Outcome {
    let start = Instant::now();
    let seed = 1;
    let stream = PlantedStream::generate(&PlantedStreamConfig { seed, ..PlantedStreamConfig::default() });
    let index = CooccurrenceIndex::build(&stream.baskets);
    let min_rate = stream
        .planted
        .iter()
        .map(|(a, b)| index.pair_count(a, b) as f64 / stream.baskets.len() as f64)
        .fold(f64::INFINITY, f64::min);
    let mut trainer = OnlineTrainer::new(hp(seed));
    let mut store = trainer.new_store();
    trainer.train_stream(&stream.windows, &mut store);
    let ensemble = HashEnsemble::with_defaults(32, seeds::sub_seed(seed, seeds::ENSEMBLE));
    let out = mine_rules(&store, &ensemble, &MiningOptions::default(), Some(&index)).unwrap();
    let found = pair_set(&out.rules);
    let recovered = stream.planted.iter().filter(|p| found.contains(*p)).count();
    let mut lifts: Vec<f64> = out.rules.iter().map(|r| r.lift.unwrap_or(0.0)).collect();
    lifts.sort_by(f64::total_cmp);
    let median = (lifts[(lifts.len() - 1) / 2] + lifts[lifts.len() / 2]) / 2.0;
    let share = recovered as f64 / stream.planted.len() as f64;
    let elapsed = start.elapsed();
    outcome(
        share >= 0.8 && median > 5.0 && elapsed < Duration::from_secs(300) && min_rate >= 0.01,
        format!(
            "{recovered}/{} planted pairs in top-{}, median lift {median:.1}, min pair rate {min_rate:.4}, {:.1}s",
            stream.planted.len(),
            out.rules.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn temporal_adaptation() -> Outcome {
    let seed = 1;
    let swap_at = 15;
    let stream = PlantedStream::generate(&PlantedStreamConfig {
        seed,
        swap: Some(PairSwap { window: swap_at, count: 25 }),
        ..PlantedStreamConfig::default()
    });
    let mut trainer = OnlineTrainer::new(hp(seed));
    let mut store = trainer.new_store();
    let ensemble = HashEnsemble::with_defaults(32, seeds::sub_seed(seed, seeds::ENSEMBLE));
    let mut pass = false;
    let mut trace = Vec::new();
    for w in &stream.windows[..swap_at + 5] {
        trainer.train_window(w, &mut store);
        if w.index < swap_at {
            continue;
        }
        let found = pair_set(&mine_rules(&store, &ensemble, &MiningOptions::default(), None).unwrap().rules);
        let entered = stream.introduced.iter().filter(|p| found.contains(*p)).count() as f64 / 25.0;
        let left = stream.retired.iter().filter(|p| !found.contains(*p)).count() as f64 / 25.0;
        trace.push(format!("w{}: {:.0}%/{:.0}%", w.index, entered * 100.0, left * 100.0));
        if entered >= 0.6 && left >= 0.6 {
            pass = true;
        }
    }
    outcome(pass, format!("new entered / retired left after each window: {}", trace.join(", ")))
}

fn value_weighting_ablation() -> Outcome {
    let rare = RarePairs { pairs: 10, rate: 0.0005, min_price: 8.0, max_price: 12.0 };
    let mut rates = [0.0, 0.0];
    let mut max_share: f64 = 0.0;
    for seed in 1..=5u64 {
        let stream = PlantedStream::generate(&PlantedStreamConfig { seed, rare: Some(rare), ..PlantedStreamConfig::default() });
        let index = CooccurrenceIndex::build(&stream.baskets);
        for (a, b) in &stream.rare {
            for p in [a, b] {
                max_share = max_share.max(index.item_count(p) as f64 / stream.baskets.len() as f64);
            }
        }
        for (slot, weighting) in [(0, true), (1, false)] {
            let mut trainer = OnlineTrainer::new(Hyperparameters { value_weighting: weighting, ..hp(seed) });
            let mut store = trainer.new_store();
            trainer.train_stream(&stream.windows, &mut store);
            let ensemble = HashEnsemble::with_defaults(32, seeds::sub_seed(seed, seeds::ENSEMBLE));
            let found = pair_set(&mine_rules(&store, &ensemble, &MiningOptions::default(), None).unwrap().rules);
            rates[slot] += stream.rare.iter().filter(|p| found.contains(*p)).count() as f64 / 10.0 / 5.0;
        }
    }
    outcome(
        rates[0] > rates[1] && max_share < 0.005,
        format!(
            "rare-pair recovery with weighting {:.2}, without {:.2} (max item share {:.4})",
            rates[0], rates[1], max_share
        ),
    )
}

fn baseline_ordering() -> Outcome {
    let mut mrr = [0.0; 3];
    for seed in 1..=3u64 {
        let stream = PlantedStream::generate(&PlantedStreamConfig { seed, ..PlantedStreamConfig::default() });
        let qw = select_query_windows(stream.windows.len(), 5, &mut seeds::rng(seed, seeds::QUERY_WINDOWS));
        let config = ProtocolConfig {
            scorers: vec![Scorer::Embedding, Scorer::Sup, Scorer::Pop],
            ..ProtocolConfig::new(hp(seed))
        };
        let out = run_protocol(&stream.windows, &qw, &config).unwrap();
        for (i, s) in [Scorer::Embedding, Scorer::Sup, Scorer::Pop].iter().enumerate() {
            mrr[i] += out.reports[s].mrr / 3.0;
        }
    }
    outcome(
        mrr[0] - mrr[1] > 0.02 && mrr[1] - mrr[2] > 0.02,
        format!(
            "mean MRR embedding {:.4}, sup {:.4}, pop {:.4} (half of background draws from user pools)",
            mrr[0], mrr[1], mrr[2]
        ),
    )
}

fn user_repetition() -> Outcome {
    let private = repeat_buyer_corpus(100, 20, 10, 500, 4, false, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let p_private = user_repetition_test(&private, 1000, &mut rng).unwrap().p_value;
    let mut rejections = 0;
    for run in 0..100u64 {
        let null = repeat_buyer_corpus(100, 20, 10, 500, 4, true, 1000 + run);
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + run);
        if user_repetition_test(&null, 1000, &mut rng).unwrap().p_value < 0.01 {
            rejections += 1;
        }
    }
    outcome(
        p_private < 1e-6 && rejections <= 5,
        format!("private pools p = {p_private:.2e}; null rejected in {rejections}/100 runs at 0.01"),
    )
}

fn determinism() -> Outcome {
    let stream = PlantedStream::generate(&PlantedStreamConfig {
        products: 300,
        users: 60,
        baskets: 4000,
        windows: 8,
        planted_pairs: 15,
        pair_rate: 0.02,
        seed: 3,
        ..PlantedStreamConfig::default()
    });
    let mut checks = Vec::new();
    for mode in ["deterministic", "parallel"] {
        let mut runs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let data = dir.path().join("stream.csv");
            write_canonical(&stream.baskets, std::fs::File::create(&data).unwrap()).unwrap();
            let mut cfg = RunConfig::parse(&format!(
                "dataset = {}\ndim = 16\nepochs = 3\nseed = 42\nmode = {mode}\noutput_dir = {}\n",
                data.display(),
                dir.path().join("out").display()
            ))
            .unwrap();
            cfg.query_windows = QueryWindows::List(vec![5, 7]);
            let trained = cli::cmd_train(&cfg).unwrap();
            cli::cmd_mine(&trained.snapshot, &cfg).unwrap();
            cli::cmd_eval(&cfg, false).unwrap();
            let read = |f: &str| std::fs::read(cfg.output_dir.join(f)).unwrap();
            runs.push((read(cli::SNAPSHOT_FILE), read(cli::RULES_FILE), read(cli::REPORT_FILE)));
        }
        checks.push((mode, runs[0] == runs[1]));
    }
    outcome(
        checks.iter().all(|c| c.1),
        checks
            .iter()
            .map(|(m, same)| format!("{m}: snapshot, rules and report identical = {same}"))
            .collect::<Vec<_>>()
            .join("; "),
    )
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 gradient check", gradient_check),
        ("2 lsh collision law", lsh_collision_law),
        ("3 calibration", calibration),
        ("4 lift oracle", lift_oracle),
        ("5 metric oracles", metric_oracles),
        ("6 planted recovery", planted_recovery),
        ("7 temporal adaptation", temporal_adaptation),
        ("8 value weighting ablation", value_weighting_ablation),
        ("9 baseline ordering", baseline_ordering),
        ("10 user repetition", user_repetition),
        ("11 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let o = check();
        println!("criterion {name:<28} {}  {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
