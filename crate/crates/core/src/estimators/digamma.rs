use super::EstimatorError;

const G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// ψ(z) for z > 0 via the logarithmic derivative of the Lanczos series.
/// No domain check.
pub fn digamma_unchecked(z: f64) -> f64 {
    // ψ(w + 1) with w = z; then ψ(z) = ψ(z + 1) − 1/z.
    let w = z;
    let t = w + G + 0.5;
    let mut a = LANCZOS[0];
    let mut da = 0.0;
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        let d = w + k as f64;
        a += c / d;
        da -= c / (d * d);
    }
    let psi_next = t.ln() + (w + 0.5) / t - 1.0 + da / a;
    psi_next - 1.0 / z
}

/// Digamma function on the positive reals.
pub fn digamma(z: f64) -> Result<f64, EstimatorError> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(EstimatorError::Domain(z));
    }
    Ok(digamma_unchecked(z))
}
