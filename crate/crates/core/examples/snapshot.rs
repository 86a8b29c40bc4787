//! Saves a store to bytes, restores it and keeps training where it left off.

use mfec_sa::harness::describe_snapshot;
use mfec_sa::{QecStore, Result, StateKey};

pub fn run() -> Result<()> {
    let mut store = QecStore::new(2, 3, 8)?;
    for i in 0..6 {
        let key = StateKey::new(vec![i as f64, 0.5, -1.0])?;
        store
            .buffer_mut(i % 2)?
            .writeback(&key, i as f64, 0.0, 100.0)?;
    }

    let bytes = store.snapshot();
    println!("snapshot is {} bytes", bytes.len());
    print!("{}", describe_snapshot(&bytes, 3)?);

    let mut restored = QecStore::restore(&bytes)?;
    assert_eq!(restored, store);

    // Both copies evolve identically afterwards.
    let key = StateKey::new(vec![9.0, 9.0, 9.0])?;
    let a = store.buffer_mut(0)?.writeback(&key, 1.0, 0.0, 100.0)?;
    let b = restored.buffer_mut(0)?.writeback(&key, 1.0, 0.0, 100.0)?;
    assert_eq!(a, b);
    println!("continued training matches: new entry #{}", a.entry_index);

    let mut damaged = bytes.clone();
    damaged.truncate(bytes.len() - 5);
    match QecStore::restore(&damaged) {
        Err(e) => println!("truncated snapshot rejected: {e}"),
        Ok(_) => unreachable!("truncation must be detected"),
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
