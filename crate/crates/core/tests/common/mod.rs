//! Reference implementations the library is checked against. They favour
//! obviousness over speed and share no code with the crate.

#![allow(dead_code)]

use rand::Rng;

/// Plain description of a stored entry, detached from the library types.
#[derive(Clone, Debug)]
pub struct OracleEntry {
    pub key: Vec<f64>,
    pub q: f64,
    pub count: u64,
    pub insert_index: u64,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Aggregated kNN by replicate expansion: every entry becomes `count`
/// identical replicas, replicas are sorted by distance, and whole entries are
/// taken until at least `k` replicas are covered. Returns the estimate and
/// the insert indices of the entries used.
pub fn knn_by_replicas(
    entries: &[OracleEntry],
    query: &[f64],
    k: usize,
) -> Option<(f64, Vec<u64>)> {
    if entries.is_empty() {
        return None;
    }
    if let Some(e) = entries
        .iter()
        .filter(|e| {
            e.key
                .iter()
                .zip(query)
                .all(|(a, b)| a.to_bits() == b.to_bits())
        })
        .min_by_key(|e| e.insert_index)
    {
        return Some((e.q, vec![e.insert_index]));
    }

    let mut replicas: Vec<(f64, u64, f64)> = Vec::new();
    for e in entries {
        let d = euclidean(&e.key, query);
        for _ in 0..e.count {
            replicas.push((d, e.insert_index, e.q));
        }
    }
    replicas.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut used: Vec<u64> = Vec::new();
    for r in replicas.iter().take(k) {
        if used.last() != Some(&r.1) {
            used.push(r.1);
        }
    }
    // Whole entries: every replica of every touched entry counts.
    let chosen: Vec<&(f64, u64, f64)> = replicas.iter().filter(|r| used.contains(&r.1)).collect();
    let value = chosen.iter().map(|r| r.2).sum::<f64>() / chosen.len() as f64;
    Some((value, used))
}

/// Batch mean of everything merged into one entry; the running update must
/// agree with it.
pub struct MeanOracle {
    keys: Vec<Vec<f64>>,
    returns: Vec<f64>,
}

impl MeanOracle {
    pub fn new(key: Vec<f64>, ret: f64) -> Self {
        MeanOracle {
            keys: vec![key],
            returns: vec![ret],
        }
    }

    pub fn add(&mut self, key: Vec<f64>, ret: f64) {
        self.keys.push(key);
        self.returns.push(ret);
    }

    pub fn count(&self) -> u64 {
        self.returns.len() as u64
    }

    pub fn q(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.returns.len() as f64
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.keys.len() as f64;
        (0..self.keys[0].len())
            .map(|i| self.keys.iter().map(|k| k[i]).sum::<f64>() / n)
            .collect()
    }
}

pub fn random_vec<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn relative_error(actual: f64, expected: f64) -> f64 {
    (actual - expected).abs() / expected.abs().max(1.0)
}
