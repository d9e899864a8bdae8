//! Lloyd alternation shared by vector and kernel K-means.

pub(crate) trait LloydModel {
    /// Nearest-centroid labels (smallest index on ties) and the distance of
    /// each point to its chosen centroid.
    fn assign(&mut self) -> (Vec<usize>, Vec<f64>);
    /// Recomputes centroids from `labels`; empty clusters are re-seeded only
    /// when `reseed` is set.
    fn update(&mut self, labels: &[usize], reseed: bool);
    /// Sum of distances of every point to the centroid of its label.
    fn objective(&mut self, labels: &[usize]) -> f64;
}

pub(crate) struct LloydOutcome {
    pub labels: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Assign, then alternate update/assign until labels stop changing, the
/// relative objective decrease drops below `tol`, or `max_iter` updates ran.
/// The returned centroids (held by the model) are the means of the returned
/// labels.
pub(crate) fn run_lloyd<M: LloydModel>(model: &mut M, max_iter: usize, tol: f64) -> LloydOutcome {
    let (mut labels, dists) = model.assign();
    let mut objective: f64 = dists.iter().sum();
    let mut history = vec![objective];
    let mut iterations = 0;
    let mut stale = true;
    while iterations < max_iter {
        model.update(&labels, true);
        iterations += 1;
        let (next, dists) = model.assign();
        let next_obj: f64 = dists.iter().sum();
        history.push(next_obj);
        let stable = next == labels;
        let rel = if objective > 0.0 {
            (objective - next_obj) / objective
        } else {
            0.0
        };
        labels = next;
        objective = next_obj;
        stale = !stable;
        if stable || (tol > 0.0 && rel < tol) {
            break;
        }
    }
    if stale {
        model.update(&labels, false);
        objective = model.objective(&labels);
        history.push(objective);
    }
    LloydOutcome {
        labels,
        objective,
        iterations,
        history,
    }
}
