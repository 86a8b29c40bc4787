//! The three writeback branches, and LRU eviction once a buffer is full.

use mfec_sa::{ActionBuffer, Result, StateKey};

fn key(v: &[f64]) -> Result<StateKey> {
    StateKey::new(v.to_vec())
}

pub fn run() -> Result<()> {
    let (eps_in, eps_out) = (0.5, 100.0);
    let mut buffer = ActionBuffer::new(2, 3)?;

    let steps: [(&[f64], f64); 6] = [
        (&[0.0, 0.0], 4.0),  // empty buffer: insert
        (&[0.0, 0.0], 2.0),  // same key: keep the larger value
        (&[0.2, 0.2], 8.0),  // close: merge into a running mean
        (&[5.0, 5.0], 1.0),  // far: new entry
        (&[-5.0, 5.0], 1.0), // fills the buffer
        (&[5.0, -5.0], 1.0), // evicts the least recently used entry
    ];
    for (k, ret) in steps {
        let out = buffer.writeback(&key(k)?, ret, eps_in, eps_out)?;
        print!(
            "write {k:?} ret {ret}: {:?}, nearest at {:?}",
            out.branch, out.distance_to_nearest
        );
        if let Some(e) = &out.evicted {
            print!(
                ", evicted #{} (last used at tick {})",
                e.insert_index(),
                e.last_access()
            );
        }
        println!();
    }

    for e in buffer.entries() {
        println!(
            "#{} key {:?} q {} count {} last_access {}",
            e.insert_index(),
            e.key().as_slice(),
            e.q(),
            e.count(),
            e.last_access()
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
