//! MAG-Markov-blanket discovery by total conditioning: `y` joins the blanket
//! of `x` iff `x` and `y` are dependent given all other observed variables.

use std::collections::BTreeSet;

use crate::ci::CiBackend;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MmbResult {
    pub target: usize,
    pub mmb: BTreeSet<usize>,
    /// `mmb` plus the target itself.
    pub mmb_plus: BTreeSet<usize>,
}

/// Runs one total-conditioning sweep: exactly `observed.len() - 1` CI calls,
/// each conditioning on every other observed variable.
pub fn tc_mmb<B: CiBackend>(backend: &mut B, observed: &[usize], x: usize) -> Result<MmbResult> {
    if !observed.contains(&x) {
        return Err(Error::InvalidQuery(format!(
            "target index {x} not among observed variables"
        )));
    }
    if observed.len() < 2 {
        return Err(Error::InvalidQuery(
            "at least two observed variables required".into(),
        ));
    }
    let mut mmb = BTreeSet::new();
    for &y in observed {
        if y == x {
            continue;
        }
        let z: Vec<usize> = observed
            .iter()
            .copied()
            .filter(|&v| v != x && v != y)
            .collect();
        if !backend.ci_query(x, y, &z)?.independent {
            mmb.insert(y);
        }
    }
    let mut mmb_plus = mmb.clone();
    mmb_plus.insert(x);
    Ok(MmbResult {
        target: x,
        mmb,
        mmb_plus,
    })
}
