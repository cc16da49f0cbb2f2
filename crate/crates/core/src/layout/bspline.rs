//! Clamped uniform B-splines evaluated with de Boor's algorithm.

/// Knot vector with `degree + 1` repeated end knots and uniform interior
/// knots on [0, 1].
pub fn clamped_knots(n_ctrl: usize, degree: usize) -> Vec<f64> {
    assert!(n_ctrl > degree, "need more control points than the degree");
    let interior = n_ctrl - degree - 1;
    let mut k = vec![0.0; degree + 1];
    for i in 1..=interior {
        k.push(i as f64 / (interior + 1) as f64);
    }
    k.extend(std::iter::repeat_n(1.0, degree + 1));
    k
}

/// Point on the curve at parameter `u ∈ [0, 1]`.
pub fn de_boor(ctrl: &[[f64; 2]], degree: usize, knots: &[f64], u: f64) -> [f64; 2] {
    let n = ctrl.len();
    debug_assert_eq!(knots.len(), n + degree + 1);
    let u = u.clamp(0.0, 1.0);
    // span s with knots[s] <= u < knots[s+1]; the last non-empty span at u = 1
    let mut s = degree;
    while s + 1 < n && knots[s + 1] <= u {
        s += 1;
    }
    let mut d: Vec<[f64; 2]> = (0..=degree).map(|j| ctrl[j + s - degree]).collect();
    for r in 1..=degree {
        for j in (r..=degree).rev() {
            let i = j + s - degree;
            let denom = knots[i + degree + 1 - r] - knots[i];
            let a = if denom > 0.0 { (u - knots[i]) / denom } else { 0.0 };
            d[j] = [(1.0 - a) * d[j - 1][0] + a * d[j][0], (1.0 - a) * d[j - 1][1] + a * d[j][1]];
        }
    }
    d[degree]
}

/// `samples` points at uniform parameters of the clamped spline of degree
/// min(3, n−1) through the control polygon.
pub fn sample_bspline(ctrl: &[[f64; 2]], samples: usize) -> Vec<[f64; 2]> {
    assert!(!ctrl.is_empty());
    if ctrl.len() == 1 {
        return vec![ctrl[0]; samples.max(1)];
    }
    let degree = 3.min(ctrl.len() - 1);
    let knots = clamped_knots(ctrl.len(), degree);
    let samples = samples.max(2);
    (0..samples).map(|i| de_boor(ctrl, degree, &knots, i as f64 / (samples - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Cox–de Boor recursion for basis function N_{i,p}(u), right-continuous,
    /// with the last span closed at u = 1.
    fn basis(i: usize, p: usize, knots: &[f64], u: f64) -> f64 {
        if p == 0 {
            let last = knots[knots.len() - 1];
            let (a, b) = (knots[i], knots[i + 1]);
            let inside = (a <= u && u < b) || (u == last && b == last && a < b);
            return if inside { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (u - knots[i]) / d1 * basis(i, p - 1, knots, u);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - u) / d2 * basis(i + 1, p - 1, knots, u);
        }
        v
    }

    fn reference(ctrl: &[[f64; 2]], p: usize, knots: &[f64], u: f64) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, c) in ctrl.iter().enumerate() {
            let b = basis(i, p, knots, u);
            out[0] += b * c[0];
            out[1] += b * c[1];
        }
        out
    }

    #[test]
    fn knot_vector_shape() {
        assert_eq!(clamped_knots(4, 3), vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(clamped_knots(5, 3), vec![0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(clamped_knots(3, 2).len(), 6);
    }

    #[test]
    fn straight_polygon_gives_straight_curve() {
        let ctrl = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]];
        for p in sample_bspline(&ctrl, 33) {
            assert!((p[0] - p[1]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn matches_cox_de_boor(
            ctrl in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..12),
            u in 0.0f64..=1.0,
            at_knot in any::<bool>(),
        ) {
            let ctrl: Vec<[f64; 2]> = ctrl.into_iter().map(|(a, b)| [a, b]).collect();
            let p = 3.min(ctrl.len() - 1);
            let knots = clamped_knots(ctrl.len(), p);
            let u = if at_knot { knots[((u * (knots.len() - 1) as f64) as usize).min(knots.len() - 1)] } else { u };
            let a = de_boor(&ctrl, p, &knots, u);
            let b = reference(&ctrl, p, &knots, u);
            prop_assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12, "{:?} vs {:?}", a, b);
        }

        #[test]
        fn interpolates_end_points(ctrl in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..12)) {
            let ctrl: Vec<[f64; 2]> = ctrl.into_iter().map(|(a, b)| [a, b]).collect();
            let s = sample_bspline(&ctrl, 64);
            let (f, l) = (s[0], s[s.len() - 1]);
            let (c0, cn) = (ctrl[0], ctrl[ctrl.len() - 1]);
            prop_assert!((f[0] - c0[0]).abs() < 1e-9 && (f[1] - c0[1]).abs() < 1e-9);
            prop_assert!((l[0] - cn[0]).abs() < 1e-9 && (l[1] - cn[1]).abs() < 1e-9);
        }
    }
}
