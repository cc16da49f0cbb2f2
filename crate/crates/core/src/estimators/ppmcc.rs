use super::EstimatorError;

/// A series with its mean removed, reusable against many partners.
#[derive(Clone, Debug)]
pub struct CenteredSeries {
    dev: Vec<f64>,
    ss: f64,
}

impl CenteredSeries {
    pub fn new<T: Copy + Into<f64>>(x: &[T]) -> Result<Self, EstimatorError> {
        if x.len() < 2 {
            return Err(EstimatorError::TooFewSamples { needed: 2, got: x.len() });
        }
        let n = x.len() as f64;
        let mean = x.iter().map(|&v| v.into()).sum::<f64>() / n;
        let dev: Vec<f64> = x.iter().map(|&v| v.into() - mean).collect();
        let ss = dev.iter().map(|d| d * d).sum::<f64>();
        if !ss.is_finite() {
            return Err(EstimatorError::NonFinite);
        }
        if ss == 0.0 {
            return Err(EstimatorError::ZeroVariance);
        }
        Ok(Self { dev, ss })
    }

    pub fn len(&self) -> usize {
        self.dev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dev.is_empty()
    }

    /// Correlation with `y`.
    pub fn correlate<T: Copy + Into<f64>>(&self, y: &[T]) -> Result<f64, EstimatorError> {
        if y.len() != self.dev.len() {
            return Err(EstimatorError::LengthMismatch(self.dev.len(), y.len()));
        }
        let n = y.len() as f64;
        let my = y.iter().map(|&v| v.into()).sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut syy = 0.0;
        for (dx, &v) in self.dev.iter().zip(y) {
            let dy = v.into() - my;
            sxy += dx * dy;
            syy += dy * dy;
        }
        if !syy.is_finite() {
            return Err(EstimatorError::NonFinite);
        }
        if syy == 0.0 {
            return Err(EstimatorError::ZeroVariance);
        }
        Ok((sxy / (self.ss * syy).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Pearson product-moment correlation coefficient, clamped to [-1, 1].
pub fn ppmcc<T: Copy + Into<f64>>(x: &[T], y: &[T]) -> Result<f64, EstimatorError> {
    if x.len() != y.len() {
        return Err(EstimatorError::LengthMismatch(x.len(), y.len()));
    }
    CenteredSeries::new(x)?.correlate(y)
}
