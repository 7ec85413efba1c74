//! Shared reporting for the acceptance suite.

use std::io::Write;

/// Hilbert-dimension ladder of the scaling criteria.
pub const LADDER: [usize; 4] = [64, 128, 256, 512];

/// Writes `ACCEPTANCE <id> PASS|FAIL <name>: <detail>` to stderr, bypassing
/// the test harness's output capture so every verdict shows up in the log.
pub fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "ACCEPTANCE {id:>2} {tag} {name}: {detail}");
}
