//! Locally biased DIviding RECTangles search with randomised tie-breaking,
//! minimising a function over the unit hypercube.

use rand::Rng;

struct Rect {
    center: Vec<f64>,
    /// Per-axis trisection count; side length is 3^-level.
    level: Vec<u32>,
    /// Smallest entry of `level`.
    class: u32,
    f: f64,
}

/// Result of a search: best probed point, its value and the number of
/// evaluations spent.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
}

/// Minimises `f` over [0,1]^dim with at most `budget` evaluations.
/// Each potentially optimal rectangle is trisected along one longest side
/// picked at random; one rectangle per size class (ties random) enters the
/// lower convex hull.
pub fn direct_minimize<R: Rng>(
    dim: usize,
    budget: usize,
    rng: &mut R,
    mut f: impl FnMut(&[f64]) -> f64,
) -> DirectResult {
    assert!(budget >= 1);
    let c0 = vec![0.5; dim];
    let f0 = f(&c0);
    let mut rects = vec![Rect { center: c0.clone(), level: vec![0; dim], class: 0, f: f0 }];
    let mut best = (c0, f0);
    let mut evals = 1;
    if dim == 0 {
        return DirectResult { x: best.0, f: best.1, evaluations: evals };
    }
    while budget - evals >= 2 {
        let selected = potentially_optimal(&rects, rng);
        if selected.is_empty() {
            break;
        }
        for ri in selected {
            if budget - evals < 2 {
                break;
            }
            let lvl = rects[ri].class;
            let longest: Vec<usize> = (0..dim).filter(|&a| rects[ri].level[a] == lvl).collect();
            let axis = longest[rng.random_range(0..longest.len())];
            let delta = 3f64.powi(-(lvl as i32 + 1));
            let mut new_level = rects[ri].level.clone();
            new_level[axis] += 1;
            let class = new_level.iter().copied().min().unwrap_or(0);
            for sign in [-1.0, 1.0] {
                let mut c = rects[ri].center.clone();
                c[axis] += sign * delta;
                let v = f(&c);
                evals += 1;
                if v < best.1 {
                    best = (c.clone(), v);
                }
                rects.push(Rect { center: c, level: new_level.clone(), class, f: v });
            }
            rects[ri].level = new_level;
            rects[ri].class = class;
        }
    }
    DirectResult { x: best.0, f: best.1, evaluations: evals }
}

/// Indices of the potentially optimal rectangles.
fn potentially_optimal<R: Rng>(rects: &[Rect], rng: &mut R) -> Vec<usize> {
    // best rectangle per size class, ties broken uniformly
    let classes = rects.iter().map(|r| r.class).max().map_or(0, |m| m as usize + 1);
    let mut per_class: Vec<Option<(usize, usize)>> = vec![None; classes];
    for (i, r) in rects.iter().enumerate() {
        match &mut per_class[r.class as usize] {
            slot @ None => *slot = Some((i, 1)),
            Some((bi, ties)) => {
                let bf = rects[*bi].f;
                if r.f < bf {
                    *bi = i;
                    *ties = 1;
                } else if r.f == bf {
                    *ties += 1;
                    if rng.random_range(0..*ties) == 0 {
                        *bi = i;
                    }
                }
            }
        }
    }
    // (size, f, index) with size increasing
    let mut pts: Vec<(f64, f64, usize)> = per_class
        .iter()
        .enumerate()
        .rev()
        .filter_map(|(k, slot)| slot.map(|(i, _)| (3f64.powi(-(k as i32)), rects[i].f, i)))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let fmin_pos = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.1 .0.total_cmp(&a.1 .0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let pts = &pts[fmin_pos..];
    let mut hull: Vec<(f64, f64, usize)> = Vec::new();
    for &p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross < 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull.into_iter().map(|h| h.2).collect()
}
