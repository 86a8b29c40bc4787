//! Acceptance suite. Runs without the libtest harness so that every check
//! prints its PASS/FAIL line even when the run succeeds, and so the checks run
//! one after another (the timed learning check must not share the CPU).

mod common;

use std::collections::HashSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{knn_by_replicas, random_vec, relative_error, MeanOracle, OracleEntry};
use mfec_sa::agent::{self, AgentConfig};
use mfec_sa::envs::{Environment, GridWorld, GridWorldSpec};
use mfec_sa::harness::{run_experiment, run_seed, EnvKind, ExperimentConfig, SeedRun};
use mfec_sa::store::UNLIMITED_CAPACITY;
use mfec_sa::{ActionBuffer, Error, ProjectionMatrix, QecStore, StateKey, WritebackBranch};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn key(v: &[f64]) -> StateKey {
    StateKey::new(v.to_vec()).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn knn_matches_replica_oracle() -> Outcome {
    let started = Instant::now();

    // Three nearest entries with counts 2, 2, 3 and k = 5: all three are used.
    let mut fig = ActionBuffer::new(1, 16).unwrap();
    fig.insert_aggregate(key(&[1.0]), 1.0, 2).unwrap();
    fig.insert_aggregate(key(&[2.0]), 2.0, 2).unwrap();
    fig.insert_aggregate(key(&[3.0]), 3.0, 3).unwrap();
    fig.insert_aggregate(key(&[10.0]), 50.0, 4).unwrap();
    let est = fig.knn_estimate_traced(&[0.0], 5).unwrap().unwrap();
    ensure!(
        est.used == vec![0, 1, 2],
        "three-entry case used {:?}",
        est.used
    );
    // (2*1 + 2*2 + 3*3) / 7
    ensure!(
        relative_error(est.value, 15.0 / 7.0) <= 1e-9,
        "three-entry case gave {}",
        est.value
    );

    let mut r = rng(1);
    let mut worst = 0.0f64;
    let mut exact_cases = 0;
    for case in 0..1000 {
        let dim = r.random_range(1..=8);
        let n = r.random_range(1..=20);
        let k = r.random_range(1..=12);
        let mut buffer = ActionBuffer::new(dim, 64).unwrap();
        let mut oracle = Vec::new();
        for _ in 0..n {
            let key_v = random_vec(&mut r, dim, 1.0);
            let q = r.random_range(-10.0..10.0);
            let count = r.random_range(1..=5);
            let idx = buffer
                .insert_aggregate(StateKey::new(key_v.clone()).unwrap(), q, count)
                .unwrap();
            oracle.push(OracleEntry {
                key: key_v,
                q,
                count,
                insert_index: idx,
            });
        }
        let query = if case % 10 == 0 {
            exact_cases += 1;
            oracle[r.random_range(0..n)].key.clone()
        } else {
            random_vec(&mut r, dim, 1.2)
        };
        let got = buffer.knn_estimate_traced(&query, k).unwrap().unwrap();
        let (want, want_used) = knn_by_replicas(&oracle, &query, k).unwrap();
        let err = relative_error(got.value, want);
        worst = worst.max(err);
        ensure!(err <= 1e-9, "case {case}: {} vs oracle {want}", got.value);
        ensure!(
            got.used == want_used,
            "case {case}: used {:?}, oracle {:?}",
            got.used,
            want_used
        );
    }
    let elapsed = started.elapsed();
    ensure!(
        elapsed < Duration::from_secs(5),
        "took {:.2}s",
        elapsed.as_secs_f64()
    );
    Ok(format!(
        "1000 cases ({exact_cases} exact-match queries), worst relative error {worst:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn zero_eps_in_never_merges() -> Outcome {
    let mut report = Vec::new();
    for (name, spec) in [
        ("gridworld", GridWorldSpec::default()),
        ("noisy gridworld", GridWorldSpec::noisy()),
    ] {
        let mut env = GridWorld::new(spec).unwrap();
        let proj = ProjectionMatrix::new(7, env.obs_dim(), 128).unwrap();
        let mut store = QecStore::new(env.num_actions(), 128, UNLIMITED_CAPACITY).unwrap();
        let cfg = AgentConfig {
            epsilon: 1.0,
            eps_in: 0.0,
            ..AgentConfig::default()
        };
        let mut r = rng(2);
        let mut merged = 0;
        let mut distinct = HashSet::new();
        for episode in 0..50u64 {
            let result =
                agent::run_episode(&mut env, episode, &mut store, &proj, &cfg, &mut r).unwrap();
            merged += result
                .outcomes
                .iter()
                .filter(|o| o.branch == WritebackBranch::Merged)
                .count();
            for step in result.trace.steps() {
                let bits: Vec<u64> = step.key.as_slice().iter().map(|v| v.to_bits()).collect();
                distinct.insert((step.action, bits));
            }
        }
        ensure!(merged == 0, "{name}: {merged} merges with eps_in = 0");
        ensure!(
            store.total_size() == distinct.len(),
            "{name}: store holds {} entries, {} distinct (key, action) pairs written",
            store.total_size(),
            distinct.len()
        );
        report.push(format!("{name} {} entries", distinct.len()));
    }
    Ok(format!("0 merges; {}", report.join(", ")))
}

fn merge_matches_running_mean() -> Outcome {
    let mut buffer = ActionBuffer::new(2, 8).unwrap();
    buffer
        .writeback(&key(&[0.0, 0.0]), 4.0, 10.0, 100.0)
        .unwrap();
    let out = buffer
        .writeback(&key(&[1.0, 1.0]), 8.0, 10.0, 100.0)
        .unwrap();
    ensure!(
        out.branch == WritebackBranch::Merged,
        "worked example took {:?}",
        out.branch
    );
    let e = &buffer.entries()[0];
    ensure!(
        e.count() == 2 && e.q() == 6.0 && e.key().as_slice() == [0.5, 0.5],
        "worked example gave count {}, q {}, key {:?}",
        e.count(),
        e.q(),
        e.key().as_slice()
    );

    let mut r = rng(3);
    let mut worst = 0.0f64;
    for seq in 0..500 {
        let dim = r.random_range(1..=8);
        let len = r.random_range(2..=40);
        let mut buffer = ActionBuffer::new(dim, 4).unwrap();
        let first = random_vec(&mut r, dim, 1.0);
        let ret = r.random_range(-10.0..10.0);
        buffer.writeback(&key(&first), ret, 1e6, 1e6).unwrap();
        let mut oracle = MeanOracle::new(first, ret);
        for _ in 1..len {
            let k = random_vec(&mut r, dim, 1.0);
            let ret = r.random_range(-10.0..10.0);
            let out = buffer.writeback(&key(&k), ret, 1e6, 1e6).unwrap();
            ensure!(
                out.branch == WritebackBranch::Merged,
                "sequence {seq}: expected a merge, got {:?}",
                out.branch
            );
            oracle.add(k, ret);
        }
        let e = &buffer.entries()[0];
        ensure!(
            buffer.len() == 1,
            "sequence {seq}: {} entries",
            buffer.len()
        );
        ensure!(
            e.count() == oracle.count(),
            "sequence {seq}: count {}",
            e.count()
        );
        let mut err = relative_error(e.q(), oracle.q());
        for (a, b) in e.key().as_slice().iter().zip(oracle.centroid()) {
            err = err.max(relative_error(*a, b));
        }
        worst = worst.max(err);
        ensure!(err <= 1e-12, "sequence {seq}: error {err:.3e}");
    }
    Ok(format!(
        "worked example exact; 500 sequences, worst error {worst:.1e}"
    ))
}

fn writeback_gate_holds() -> Outcome {
    let mut r = rng(4);
    let mut buffer = ActionBuffer::new(2, 64).unwrap();
    let mut counts = [0usize; 4];
    for i in 0..10_000 {
        if i % 250 == 0 {
            buffer = ActionBuffer::new(2, 64).unwrap();
        }
        let mut k = random_vec(&mut r, 2, 1.0);
        if r.random_bool(0.2) {
            // Coarse grid so exact repeats happen too.
            k.iter_mut().for_each(|v| *v = (*v * 2.0).round() / 2.0);
        }
        let ret = r.random_range(0.0..10.0);
        let eps_in = r.random_range(0.0..0.6);
        let eps_out = r.random_range(0.0..6.0);

        let nearest = buffer
            .entries()
            .iter()
            .map(|e| {
                (
                    common::euclidean(e.key().as_slice(), &k),
                    e.insert_index(),
                    e.q(),
                )
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let out = buffer.writeback(&key(&k), ret, eps_in, eps_out).unwrap();
        match (out.branch, nearest) {
            (WritebackBranch::Merged, Some((d, _, q))) => {
                ensure!(
                    d < eps_in && (ret - q).abs() < eps_out,
                    "writeback {i}: merged with d={d}, |ret-q|={}",
                    (ret - q).abs()
                );
                counts[1] += 1;
            }
            (WritebackBranch::Merged, None) => {
                return Err(format!("writeback {i}: merged into nothing"))
            }
            (b, Some((d, _, q))) if b.is_insert() => {
                ensure!(
                    d >= eps_in || (ret - q).abs() >= eps_out,
                    "writeback {i}: inserted with d={d}, |ret-q|={}",
                    (ret - q).abs()
                );
                counts[2] += 1;
            }
            (WritebackBranch::ExactMatch, _) => counts[0] += 1,
            _ => counts[3] += 1,
        }
        if let (Some(reported), Some((d, _, _))) = (out.distance_to_nearest, nearest) {
            ensure!(
                (reported - d).abs() <= 1e-12 * d.max(1.0),
                "writeback {i}: reported distance {reported}, scan found {d}"
            );
        }
    }
    ensure!(
        counts[1] > 0 && counts[2] > 0,
        "gate never exercised: {counts:?}"
    );
    Ok(format!(
        "0 violations; {} exact, {} merged, {} inserted into non-empty, {} into empty",
        counts[0], counts[1], counts[2], counts[3]
    ))
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn run_all(cfg: &ExperimentConfig) -> Vec<SeedRun> {
    SEEDS.iter().map(|&s| run_seed(cfg, s).unwrap()).collect()
}

fn learning_check() -> Outcome {
    let started = Instant::now();
    let vanilla_cfg = ExperimentConfig {
        env: EnvKind::GridWorld,
        ..ExperimentConfig::default()
    };
    let mut sa_cfg = ExperimentConfig {
        env: EnvKind::NoisyGridWorld,
        ..ExperimentConfig::default()
    };
    sa_cfg.agent.eps_in = 0.05;
    ensure!(
        vanilla_cfg.agent.eps_in == 0.0,
        "vanilla default eps_in is not 0"
    );
    ensure!(
        vanilla_cfg.total_frames == 200_000,
        "default budget changed"
    );
    let optimal = GridWorldSpec::default().optimal_score();

    let vanilla = run_all(&vanilla_cfg);
    let sa = run_all(&sa_cfg);
    let elapsed = started.elapsed();

    let mut lines = Vec::new();
    for ((seed, v), s) in SEEDS.iter().zip(&vanilla).zip(&sa) {
        let (v, s) = (v.records.last().unwrap(), s.records.last().unwrap());
        lines.push(format!(
            "seed {seed}: vanilla peak {} avg {:.3} size {} | SA avg {:.3} size {}",
            v.peak_score, v.avg_score, v.total_size, s.avg_score, s.total_size
        ));
        ensure!(
            v.peak_score == optimal,
            "seed {seed}: vanilla final-epoch peak {} below optimal {optimal}",
            v.peak_score
        );
        ensure!(
            s.avg_score >= 0.95 * v.avg_score,
            "seed {seed}: SA average {} more than 5% below vanilla {}",
            s.avg_score,
            v.avg_score
        );
        ensure!(
            s.total_size < v.total_size,
            "seed {seed}: SA size {} not below vanilla {}",
            s.total_size,
            v.total_size
        );
    }
    for line in &lines {
        println!("    {line}");
    }
    ensure!(
        elapsed < Duration::from_secs(120),
        "took {:.1}s",
        elapsed.as_secs_f64()
    );
    Ok(format!("all 5 seeds, {:.1}s", elapsed.as_secs_f64()))
}

fn scroller_resists_aggregation() -> Outcome {
    let budget = |env, eps_in| {
        let mut cfg = ExperimentConfig {
            env,
            total_frames: 20_000,
            epoch_frames: 10_000,
            ..ExperimentConfig::default()
        };
        cfg.agent.eps_in = eps_in;
        cfg.agent.eps_out = 100.0;
        cfg
    };
    let final_size = |runs: Vec<SeedRun>| -> Vec<f64> {
        runs.iter()
            .map(|r| r.records.last().unwrap().total_size as f64)
            .collect()
    };
    let grid_vanilla = final_size(run_all(&budget(EnvKind::NoisyGridWorld, 0.0)));
    let grid_sa = final_size(run_all(&budget(EnvKind::NoisyGridWorld, 0.05)));
    let scroll_vanilla = final_size(run_all(&budget(EnvKind::Scroller, 0.0)));
    let scroll_sa = final_size(run_all(&budget(EnvKind::Scroller, 0.05)));

    let mut failures = Vec::new();
    println!("    seed  noisy-grid reduction  scroller reduction");
    for i in 0..SEEDS.len() {
        let grid = 1.0 - grid_sa[i] / grid_vanilla[i];
        let scroll = 1.0 - scroll_sa[i] / scroll_vanilla[i];
        println!(
            "    {:>4}  {grid:>20.4}  {scroll:>18.4}   ({} -> {}, {} -> {})",
            SEEDS[i], grid_vanilla[i], grid_sa[i], scroll_vanilla[i], scroll_sa[i]
        );
        if scroll >= grid {
            failures.push(SEEDS[i]);
        }
    }
    ensure!(failures.is_empty(), "ordering fails for seeds {failures:?}");
    Ok("scroller reduction below noisy-grid reduction on all 5 seeds".into())
}

fn reruns_are_byte_identical() -> Outcome {
    let configs = [
        (EnvKind::GridWorld, 0.0),
        (EnvKind::NoisyGridWorld, 0.05),
        (EnvKind::Scroller, 0.05),
    ];
    let mut files = 0;
    for (env, eps_in) in configs {
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let reports: Vec<_> = dirs
            .iter()
            .map(|d| {
                let mut cfg = ExperimentConfig {
                    env,
                    seeds: vec![0, 1],
                    total_frames: 5_000,
                    epoch_frames: 1_000,
                    out_dir: d.path().to_path_buf(),
                    ..ExperimentConfig::default()
                };
                cfg.agent.eps_in = eps_in;
                run_experiment(&cfg).unwrap()
            })
            .collect();
        let pairs = reports[0]
            .seed_csvs
            .iter()
            .zip(&reports[1].seed_csvs)
            .chain(reports[0].snapshots.iter().zip(&reports[1].snapshots));
        for (a, b) in pairs {
            let (x, y) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
            ensure!(!x.is_empty(), "{} is empty", a.display());
            ensure!(x == y, "{} and {} differ", a.display(), b.display());
            files += 1;
        }
    }
    Ok(format!("{files} file pairs identical across 3 configs"))
}

fn lru_eviction_is_minimal() -> Outcome {
    let mut r = rng(8);
    let mut buffer = ActionBuffer::new(4, 16).unwrap();
    let mut evictions = 0;
    let mut seen = HashSet::new();
    for i in 0..200 {
        if i > 0 && r.random_bool(0.5) {
            let q = random_vec(&mut r, 4, 1.0);
            buffer.knn_estimate(&q, r.random_range(1..=5)).unwrap();
        }
        let k = random_vec(&mut r, 4, 1.0);
        ensure!(
            seen.insert(k.iter().map(|v| v.to_bits()).collect::<Vec<_>>()),
            "state {i} repeated"
        );
        let out = buffer.writeback(&key(&k), 1.0, 0.0, 100.0).unwrap();
        if let Some(evicted) = &out.evicted {
            evictions += 1;
            // Looking up the nearest entry refreshes it before the eviction,
            // so compare against the survivors rather than the old state.
            let rank = |e: &mfec_sa::Entry| (e.last_access(), e.insert_index());
            let survivors_min = buffer
                .entries()
                .iter()
                .filter(|e| e.insert_index() != out.entry_index)
                .map(rank)
                .min();
            ensure!(
                survivors_min.is_none_or(|m| rank(evicted) < m),
                "state {i}: evicted {:?} but a survivor ranks {survivors_min:?}",
                rank(evicted)
            );
        }
        ensure!(buffer.len() <= 16, "state {i}: {} entries", buffer.len());
    }
    ensure!(evictions == 184, "{evictions} evictions, expected 184");
    Ok("184 evictions, all least recently used; size never above 16".into())
}

fn snapshots_round_trip() -> Outcome {
    let mut r = rng(9);
    let mut last = None;
    for case in 0..100 {
        let actions = r.random_range(1..=5);
        let dim = r.random_range(1..=8);
        let capacity = r.random_range(1..=32);
        let mut store = QecStore::new(actions, dim, capacity).unwrap();
        for _ in 0..r.random_range(0..120) {
            let a = r.random_range(0..actions);
            let k = random_vec(&mut r, dim, 1.0);
            let buffer = store.buffer_mut(a).unwrap();
            if r.random_bool(0.3) {
                buffer.knn_estimate(&k, r.random_range(1..=12)).unwrap();
            } else {
                let ret = r.random_range(-5.0..5.0);
                buffer
                    .writeback(&key(&k), ret, r.random_range(0.0..1.0), 2.0)
                    .unwrap();
            }
        }
        let bytes = store.snapshot();
        let restored = QecStore::restore(&bytes).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(restored == store, "case {case}: restored store differs");
        ensure!(
            restored.snapshot() == bytes,
            "case {case}: re-snapshot differs"
        );
        last = Some(bytes);
    }

    let good = last.unwrap();
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    let truncated = good[..good.len() - 3].to_vec();
    let mut bad_version = good.clone();
    bad_version[4..8].copy_from_slice(&2u32.to_le_bytes());
    for (name, bytes) in [
        ("bad magic", bad_magic),
        ("truncated", truncated),
        ("bad version", bad_version),
    ] {
        match QecStore::restore(&bytes) {
            Err(Error::Format { .. }) => {}
            Err(e) => return Err(format!("{name}: wrong error kind: {e}")),
            Ok(_) => return Err(format!("{name}: restored without error")),
        }
    }
    Ok("100 stores restored exactly; 3 corruptions rejected".into())
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        (
            "knn estimate matches replica oracle",
            knn_matches_replica_oracle,
        ),
        ("eps_in = 0 never merges", zero_eps_in_never_merges),
        ("merge equals running mean", merge_matches_running_mean),
        ("writeback gate", writeback_gate_holds),
        ("gridworld learning", learning_check),
        ("scroller resists aggregation", scroller_resists_aggregation),
        ("determinism", reruns_are_byte_identical),
        ("lru capacity", lru_eviction_is_minimal),
        ("snapshot round trip", snapshots_round_trip),
    ];
    // Keep panics inside a check from printing a second report.
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|payload| {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
