//! Evidence lookup over a persisted relay chain.

use std::fmt::Write as _;
use std::path::Path;

use ccrelay_core::crypto::Hash32;
use ccrelay_core::relay::{audit_trail, load_chain, SessionTrail};

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("not a session hash: {0:?}")]
    BadHash(String),
    #[error("reading chain: {0}")]
    Chain(String),
    #[error("no evidence for session {0}")]
    Unknown(Hash32),
}

/// Loads the chain in `dir` and returns the evidence for `session`. A hash
/// that does not parse or has no on-chain record is an error.
pub fn audit(dir: &Path, session: &str) -> Result<SessionTrail, AuditError> {
    let hash: Hash32 = session.trim().parse().map_err(|_| AuditError::BadHash(session.to_string()))?;
    let blocks = load_chain(dir).map_err(|e| AuditError::Chain(e.to_string()))?;
    let trail = audit_trail(&blocks, hash);
    if trail.evidence.is_empty() {
        return Err(AuditError::Unknown(hash));
    }
    Ok(trail)
}

pub fn render_text(trail: &SessionTrail) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "session {}", trail.session);
    let _ = writeln!(out, "outcome {}", serde_json::to_value(trail.outcome).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
    if let Some(d) = trail.deadline {
        let _ = writeln!(out, "deadline {d} ms");
    }
    for e in &trail.evidence {
        let _ = writeln!(
            out,
            "  height {:>5}  t={:<8} {:<12} {:<24} {} -> {}  seq {}  router {}  tx {}{}",
            e.height,
            e.block_timestamp,
            e.tx_type,
            e.verdict,
            e.src_chain,
            e.dst_chain,
            e.seq_num,
            e.router,
            e.tx_hash,
            if e.forwarded { "  forwarded" } else { "" }
        );
    }
    out
}

pub fn render_json(trail: &SessionTrail) -> String {
    serde_json::to_string_pretty(trail).expect("trail serializes") + "\n"
}
