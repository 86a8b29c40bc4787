use std::fmt::Write;

use crate::error::Result;
use crate::store::{QecStore, UNLIMITED_CAPACITY};

/// Human-readable summary of a store snapshot, listing up to `max_entries`
/// entries per buffer.
pub fn describe_snapshot(bytes: &[u8], max_entries: usize) -> Result<String> {
    let store = QecStore::restore(bytes)?;
    let mut out = String::new();
    let capacity = match store.capacity() {
        UNLIMITED_CAPACITY => "unlimited".to_string(),
        c => c.to_string(),
    };
    writeln!(
        out,
        "store: {} actions, key dim {}, capacity {}, {} entries",
        store.num_actions(),
        store.dim(),
        capacity,
        store.total_size()
    )
    .unwrap();
    for (action, buffer) in store.buffers().iter().enumerate() {
        let q = buffer.entries().iter().map(|e| e.q());
        let (lo, hi) = q.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        write!(
            out,
            "action {action}: {} entries, {} aggregated experiences, tick {}",
            buffer.len(),
            buffer.total_count(),
            buffer.tick()
        )
        .unwrap();
        if !buffer.is_empty() {
            write!(out, ", q in [{lo}, {hi}]").unwrap();
        }
        out.push('\n');
        for e in buffer.entries().iter().take(max_entries) {
            let head: Vec<String> = e
                .key()
                .as_slice()
                .iter()
                .take(4)
                .map(|v| format!("{v:.4}"))
                .collect();
            let more = if e.key().dim() > 4 { ", ..." } else { "" };
            writeln!(
                out,
                "  #{:<6} q={:<12} count={:<5} last_access={:<8} key=[{}{}]",
                e.insert_index(),
                e.q(),
                e.count(),
                e.last_access(),
                head.join(", "),
                more
            )
            .unwrap();
        }
        if buffer.len() > max_entries {
            writeln!(out, "  ... {} more", buffer.len() - max_entries).unwrap();
        }
    }
    Ok(out)
}
