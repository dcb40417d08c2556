//! Built-in verification: gradient checks for every primitive, layer and
//! model, straight-line oracles, and a determinism check.

mod gradient;
mod oracle;

use std::fmt;
use std::time::Instant;

pub use gradient::{hourly_stamps, layer_checks, model_checks, op_checks, EPS, TOL};
pub use oracle::{
    attention_reference, datetime_reference, moving_average_reference, oracle_checks, resl_reference, ORACLE_TOL,
};

use crate::data::{gen_synthetic, prepare, SplitRatio, SyntheticSpec};
use crate::error::Error;
use crate::experiment::{run_cell, Cell};
use crate::models::ModelConfig;
use crate::train::TrainConfig;

/// Random inputs per oracle.
pub const ORACLE_TRIALS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub(crate) fn error(name: &str, tolerance: f64, e: Error) -> Self {
        Self {
            name: name.to_string(),
            max_error: f64::INFINITY,
            tolerance,
            passed: false,
            detail: format!("error: {e}"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SelfCheckReport {
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl SelfCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for SelfCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<36} max err {:>10.3e} (tol {:.0e})  {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.max_error,
                c.tolerance,
                c.detail
            )?;
        }
        let failed = self.failures().count();
        write!(
            f,
            "{} checks, {} failed, {:.1}s",
            self.checks.len(),
            failed,
            self.seconds
        )
    }
}

/// Train one small cell twice with the same seed and compare every bit of
/// the resulting metrics.
pub fn determinism_check() -> Check {
    let name = "determinism:sweep_cell";
    let run = || -> crate::Result<(f64, f64)> {
        let spec = SyntheticSpec {
            len: 240,
            ..SyntheticSpec::ablation(crate::DEFAULT_SEED)
        };
        let series = gen_synthetic(&spec)?;
        let mut model = ModelConfig::stl(12, 4, spec.channels, 8);
        model.dropout = 0.1;
        let p = prepare("synthetic", &series, SplitRatio::new(6, 2, 2), &model.datetime_components, 4)?;
        let mut train = TrainConfig::new(1e-3, 0.9);
        train.epochs = 2;
        let cell = Cell {
            model,
            seed: crate::DEFAULT_SEED,
            raw_metrics: false,
        };
        run_cell(&p, &cell, &train, None)
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => {
            let same = a.0.to_bits() == b.0.to_bits() && a.1.to_bits() == b.1.to_bits();
            Check {
                name: name.into(),
                max_error: (a.0 - b.0).abs().max((a.1 - b.1).abs()),
                tolerance: 0.0,
                passed: same,
                detail: format!("mse {:.12e} vs {:.12e}", a.0, b.0),
            }
        }
        (Err(e), _) | (_, Err(e)) => Check::error(name, 0.0, e),
    }
}

/// Every check, in a fixed order.
pub fn run_selfcheck() -> SelfCheckReport {
    let started = Instant::now();
    let mut checks = op_checks();
    checks.extend(layer_checks());
    checks.extend(model_checks());
    checks.extend(oracle_checks(ORACLE_TRIALS));
    checks.push(determinism_check());
    SelfCheckReport {
        checks,
        seconds: started.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests;
