//! The bundled benchmark pack and its acceptance assertions.

use crate::io::CliError;

/// Names and sources of the bundled problems.
pub fn core_pack() -> Vec<(&'static str, &'static str)> {
    vec![
        ("modhash", include_str!("../problems/modhash.loud")),
        ("remhash_wupo", include_str!("../problems/remhash_wupo.loud")),
        ("remhash_wpp", include_str!("../problems/remhash_wpp.loud")),
        ("philo3", include_str!("../problems/philo3.loud")),
        ("max2", include_str!("../problems/max2.loud")),
        ("max3", include_str!("../problems/max3.loud")),
        ("shuffle3", include_str!("../problems/shuffle3.loud")),
        ("rg", include_str!("../problems/rg.loud")),
    ]
}

/// Reduced-domain variants tractable for the full oracle, used by
/// `bench core --oracle-check`.
pub fn reduced_pack() -> Vec<(&'static str, &'static str)> {
    vec![
        ("modhash_small", include_str!("../problems/modhash_small.loud")),
        ("philo3", include_str!("../problems/philo3.loud")),
        ("max2_small", include_str!("../problems/max2_small.loud")),
        ("shuffle3", include_str!("../problems/shuffle3.loud")),
        ("rg", include_str!("../problems/rg.loud")),
    ]
}

pub struct BenchLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub millis: u64,
}

/// Run every pack problem and verify its acceptance assertions.
pub fn bench(pack: &str, oracle_check: bool) -> Result<Vec<BenchLine>, CliError> {
    match pack {
        "core" => Ok(assertions::run_all(oracle_check)),
        other => Err(CliError::Parse(crate::io::ParseError::Validation(format!(
            "unknown pack `{other}` (available: core)"
        )))),
    }
}

pub mod assertions;
