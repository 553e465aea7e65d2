use crate::model::EventSequence;

/// Homogeneous Poisson rate per type, `(n_k - 1) / (t_last - t_first)`:
/// the reciprocal of the mean within-type inter-arrival time. `None` for
/// types with fewer than two events or a zero span.
pub fn poisson_moment_estimate(seq: &EventSequence) -> Vec<Option<f64>> {
    (0..seq.num_types())
        .map(|k| {
            let times = seq.times_of(k);
            match (times.first(), times.last()) {
                (Some(&first), Some(&last)) if times.len() >= 2 && last > first => {
                    Some((times.len() - 1) as f64 / (last - first))
                }
                _ => None,
            }
        })
        .collect()
}
