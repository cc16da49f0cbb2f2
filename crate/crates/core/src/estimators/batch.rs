use std::time::Duration;

use web_time::Instant;

use super::{kraskov_mi, CenteredSeries, EstimatorError, MeasureKind};

/// Per-target results of a one-to-many evaluation.
#[derive(Clone, Debug)]
pub struct BatchOutput {
    pub values: Vec<Result<f64, EstimatorError>>,
    pub elapsed: Duration,
}

impl BatchOutput {
    /// Pairs evaluated per second.
    pub fn throughput(&self) -> f64 {
        let s = self.elapsed.as_secs_f64();
        if s > 0.0 {
            self.values.len() as f64 / s
        } else {
            f64::INFINITY
        }
    }
}

const CHUNK: usize = 1024;

fn run(reference: &[f64], targets: &[f64], measure: MeasureKind) -> Vec<Result<f64, EstimatorError>> {
    let e = reference.len();
    if e == 0 {
        return Vec::new();
    }
    let chunks: Vec<Vec<Result<f64, EstimatorError>>> = match measure {
        MeasureKind::Ppmcc => {
            let centered = CenteredSeries::new(reference);
            crate::par::map_chunks(targets, e * CHUNK, |chunk| {
                chunk
                    .chunks(e)
                    .map(|t| match &centered {
                        Ok(c) => c.correlate(t),
                        Err(err) => Err(err.clone()),
                    })
                    .collect()
            })
        }
        MeasureKind::Kmi => crate::par::map_chunks(targets, e * 8, |chunk| {
            chunk.chunks(e).map(|t| kraskov_mi(reference, t, None)).collect()
        }),
    };
    chunks.into_iter().flatten().collect()
}

/// Evaluates `measure` between `reference` and every length-E target in the
/// flat `targets` buffer. Results match per-pair calls bitwise; degenerate
/// pairs yield per-entry errors.
pub fn batch_correlate(reference: &[f64], targets: &[f64], measure: MeasureKind) -> BatchOutput {
    let start = Instant::now();
    assert!(reference.is_empty() || targets.len() % reference.len() == 0, "targets must be a multiple of E");
    let values = run(reference, targets, measure);
    BatchOutput { values, elapsed: start.elapsed() }
}

/// [`batch_correlate`] on a dedicated pool of `threads` workers.
#[cfg(feature = "parallel")]
pub fn batch_correlate_with_threads(
    reference: &[f64],
    targets: &[f64],
    measure: MeasureKind,
    threads: usize,
) -> BatchOutput {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool");
    pool.install(|| batch_correlate(reference, targets, measure))
}

#[cfg(not(feature = "parallel"))]
pub fn batch_correlate_with_threads(
    reference: &[f64],
    targets: &[f64],
    measure: MeasureKind,
    _threads: usize,
) -> BatchOutput {
    batch_correlate(reference, targets, measure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ppmcc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_target_is_bitwise_equal() {
        let x = [0.3, 1.7, 2.2, -0.4, 5.0];
        let y = [1.0, 0.2, 2.9, 0.0, 4.4];
        let out = batch_correlate(&x, &y, MeasureKind::Ppmcc);
        assert_eq!(out.values.len(), 1);
        assert_eq!(out.values[0].clone().unwrap().to_bits(), ppmcc(&x, &y).unwrap().to_bits());
    }

    #[test]
    fn matches_loop_and_keeps_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = 40;
        let reference: Vec<f64> = (0..e).map(|_| rng.random()).collect();
        let mut targets: Vec<f64> = (0..e * 300).map(|_| rng.random()).collect();
        targets[e * 7..e * 8].fill(2.0);
        for m in [MeasureKind::Ppmcc, MeasureKind::Kmi] {
            let out = batch_correlate(&reference, &targets, m);
            for (i, t) in targets.chunks(e).enumerate() {
                assert_eq!(out.values[i], m.evaluate(&reference, t));
            }
            assert!(out.values[7].is_err());
        }
    }
}
