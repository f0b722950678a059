use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{EdgeId, RoadNetwork};

/// Route error in the style of Newson and Krumm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchError {
    /// Length of the true route, meters.
    pub d0: f64,
    /// True length missing from the prediction.
    pub d_minus: f64,
    /// Predicted length not on the true route.
    pub d_plus: f64,
    /// `(d_minus + d_plus) / d0`.
    pub err: f64,
}

/// Compares routes as sets of directed edges.
pub fn route_error(pred: &[EdgeId], truth: &[EdgeId], net: &RoadNetwork) -> Result<MatchError> {
    for &e in pred.iter().chain(truth) {
        net.check_edge(e)?;
    }
    let pred: BTreeSet<EdgeId> = pred.iter().copied().collect();
    let truth: BTreeSet<EdgeId> = truth.iter().copied().collect();
    let len = |set: &mut dyn Iterator<Item = &EdgeId>| -> f64 {
        set.map(|&e| net.edge(e).length).fold(0.0, |a, b| a + b)
    };
    let d0 = len(&mut truth.iter());
    if truth.is_empty() || d0 <= 0.0 {
        return Err(Error::EmptyTruth);
    }
    let d_minus = len(&mut truth.difference(&pred));
    let d_plus = len(&mut pred.difference(&truth));
    Ok(MatchError {
        d0,
        d_minus,
        d_plus,
        err: (d_minus + d_plus) / d0,
    })
}
