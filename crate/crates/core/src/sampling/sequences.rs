//! Low-discrepancy sequences.

pub const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

/// Radical inverse of `index` in `base`.
pub fn halton(index: u64, base: u64) -> f64 {
    assert!(base >= 2);
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// The real root greater than one of x^(d+1) = x + 1, by bisection.
pub fn plastic_constant(d: usize) -> f64 {
    let p = (d + 1) as i32;
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid.powi(p) - mid - 1.0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Per-axis increments ρ_d^-(a+1) of the `d`-dimensional additive recurrence.
pub fn plastic_alphas(d: usize) -> Vec<f64> {
    let rho = plastic_constant(d);
    (0..d).map(|a| rho.powi(-(a as i32 + 1))).collect()
}

/// Point `index` of the unshifted `d`-dimensional plastic sequence.
pub fn plastic_point(index: u64, d: usize) -> Vec<f64> {
    plastic_alphas(d).iter().map(|a| (index as f64 * a).fract()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_examples() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-15);
        assert!((halton(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
        for i in 0..10_000u64 {
            for b in PRIMES {
                let h = halton(i, b);
                assert!((0.0..1.0).contains(&h));
            }
        }
    }

    #[test]
    fn plastic_constants() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((plastic_constant(1) - phi).abs() < 1e-14);
        assert!((plastic_point(1, 1)[0] - (phi - 1.0)).abs() < 1e-14);
        let rho = plastic_constant(2);
        assert!((rho - 1.324717957244746).abs() < 1e-14);
        let a = plastic_alphas(2);
        assert!((a[0] - 0.7548776662466927).abs() < 1e-14);
        assert!((a[1] - 0.5698402909980532).abs() < 1e-14);
    }

    #[test]
    fn plastic_constant_increment() {
        let a = plastic_alphas(3);
        for i in 1..50u64 {
            let p = plastic_point(i, 3);
            let q = plastic_point(i + 1, 3);
            for k in 0..3 {
                let step = (q[k] - p[k]).rem_euclid(1.0);
                assert!((step - a[k]).abs() < 1e-9);
            }
        }
    }
}
