//! Count-weighted kNN over aggregated entries.
//!
//! Three entries near the query hold 2, 2 and 3 experiences. With k = 5 the
//! first two cover only 4, so the third is taken whole and the estimate
//! averages all 7 experiences.

use mfec_sa::{ActionBuffer, Result, StateKey};

pub fn run() -> Result<()> {
    let mut buffer = ActionBuffer::new(2, 16)?;
    for (key, q, count) in [
        ([1.0, 0.0], 1.0, 2),
        ([0.0, 2.0], 2.0, 2),
        ([3.0, 0.0], 3.0, 3),
        ([9.0, 9.0], 50.0, 4),
    ] {
        buffer.insert_aggregate(StateKey::new(key.to_vec())?, q, count)?;
    }

    let query = [0.0, 0.0];
    for k in [1, 3, 5, 8, 20] {
        let est = buffer
            .knn_estimate_traced(&query, k)?
            .expect("buffer is not empty");
        println!(
            "k = {k:>2}: estimate {:.4} from entries {:?}",
            est.value, est.used
        );
    }

    // A stored key answers with its own value alone.
    let exact = buffer.knn_estimate(&[9.0, 9.0], 5)?;
    println!("exact match: {exact:?}");
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
