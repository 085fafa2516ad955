use serde::{Deserialize, Serialize};

use crate::barrier::Barrier;
use crate::sde::PathSample;

/// Alternating crossing times of `h(x_t)` against a level θ.
///
/// `pairs[i] = (η_i, ζ_i)` with `η_0 = 0`, `ζ_i = inf{t > η_i : h > θ}` and
/// `η_{i+1} = inf{t > ζ_i : h < θ}`, taken over grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingTimeRecord {
    pub theta: f64,
    /// `ζ_i` is `None` when the path ended before it occurred.
    pub pairs: Vec<(f64, Option<f64>)>,
    pub truncated: bool,
}

impl StoppingTimeRecord {
    pub fn zeta(&self, i: usize) -> Option<f64> {
        self.pairs.get(i).and_then(|p| p.1)
    }

    pub fn eta(&self, i: usize) -> Option<f64> {
        self.pairs.get(i).map(|p| p.0)
    }
}

/// Scans the grid values of `barrier` along `path` for the crossing sequence.
/// Strict inequalities: a path that sits exactly on θ never crosses.
pub fn stopping_time_sequence(path: &PathSample, barrier: &dyn Barrier, theta: f64, max_pairs: usize) -> StoppingTimeRecord {
    let h: Vec<f64> = (0..path.len()).map(|k| barrier.value(path.state(k))).collect();
    let mut pairs = Vec::new();
    let mut start = 0usize;
    let mut eta = 0.0;
    let truncated = loop {
        if pairs.len() == max_pairs {
            break false;
        }
        let Some(j) = (start..h.len()).find(|&j| h[j] > theta) else {
            pairs.push((eta, None));
            break true;
        };
        pairs.push((eta, Some(path.times[j])));
        let Some(m) = (j + 1..h.len()).find(|&m| h[m] < theta) else {
            break true;
        };
        eta = path.times[m];
        start = m + 1;
    };
    StoppingTimeRecord { theta, pairs, truncated }
}
