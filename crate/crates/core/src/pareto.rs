//! Pareto selection over the (instruction score, medical average) plane.
//! Both objectives are maximized.

use serde::{Deserialize, Serialize};

/// Default margin for near-frontier membership: half a point on a [0, 1] scale.
pub const DEFAULT_EPSILON: f64 = 0.005;

pub trait Objectives {
    fn instruction(&self) -> f64;
    fn medical(&self) -> f64;
}

impl Objectives for (f64, f64) {
    fn instruction(&self) -> f64 {
        self.0
    }
    fn medical(&self) -> f64 {
        self.1
    }
}

impl<T: Objectives + ?Sized> Objectives for &T {
    fn instruction(&self) -> f64 {
        (**self).instruction()
    }
    fn medical(&self) -> f64 {
        (**self).medical()
    }
}

/// `p` is at least as good as `q` in both objectives and better in one.
pub fn dominates<P: Objectives, Q: Objectives>(p: &P, q: &Q) -> bool {
    let (pi, pm) = (p.instruction(), p.medical());
    let (qi, qm) = (q.instruction(), q.medical());
    pi >= qi && pm >= qm && (pi > qi || pm > qm)
}

// -0.0 and 0.0 compare equal under `>=`; fold them for sorting
fn key<P: Objectives>(p: &P) -> (f64, f64) {
    (p.instruction() + 0.0, p.medical() + 0.0)
}

fn sort_ascending(idx: &mut [usize], keys: &[(f64, f64)]) {
    idx.sort_by(|&a, &b| {
        keys[a]
            .0
            .total_cmp(&keys[b].0)
            .then(keys[a].1.total_cmp(&keys[b].1))
            .then(a.cmp(&b))
    });
}

/// Indices of all non-dominated points, duplicates included, ordered by
/// instruction score, then medical average, then index (all ascending).
pub fn pareto_frontier<P: Objectives>(points: &[P]) -> Vec<usize> {
    let keys: Vec<(f64, f64)> = points.iter().map(key).collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    // descending instruction, descending medical
    order.sort_by(|&a, &b| {
        keys[b]
            .0
            .total_cmp(&keys[a].0)
            .then(keys[b].1.total_cmp(&keys[a].1))
    });

    let mut frontier = Vec::new();
    let mut best_medical = f64::NEG_INFINITY;
    let mut start = 0;
    while start < order.len() {
        let ins = keys[order[start]].0;
        let end = start + order[start..].iter().take_while(|&&i| keys[i].0 == ins).count();
        // first in the group has the group's highest medical score
        let group_best = keys[order[start]].1;
        if group_best > best_medical {
            frontier.extend(order[start..end].iter().copied().filter(|&i| keys[i].1 == group_best));
            best_medical = group_best;
        }
        start = end;
    }
    sort_ascending(&mut frontier, &keys);
    frontier
}

/// Indices of points not dominated by any point after shifting them up by
/// `epsilon` in both objectives. With `epsilon == 0` this is exactly the
/// Pareto frontier; membership only grows as `epsilon` grows.
pub fn near_frontier<P: Objectives>(points: &[P], epsilon: f64) -> Vec<usize> {
    assert!(epsilon >= 0.0, "epsilon must be non-negative");
    let keys: Vec<(f64, f64)> = points.iter().map(key).collect();
    // along the sorted frontier medical scores are non-increasing
    let front: Vec<(f64, f64)> = pareto_frontier(points).into_iter().map(|i| keys[i]).collect();

    let mut near: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let shifted = (keys[i].0 + epsilon, keys[i].1 + epsilon);
            let k = front.partition_point(|f| f.0 < shifted.0);
            // the first frontier point at or beyond the shifted instruction
            // score carries the highest medical score among candidates
            front.get(k).is_none_or(|f| !dominates(f, &shifted))
        })
        .collect();
    sort_ascending(&mut near, &keys);
    near
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoResult {
    pub frontier: Vec<usize>,
    pub near_frontier: Vec<usize>,
    pub epsilon: f64,
}

pub fn select<P: Objectives>(points: &[P], epsilon: f64) -> ParetoResult {
    ParetoResult {
        frontier: pareto_frontier(points),
        near_frontier: near_frontier(points, epsilon),
        epsilon,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_frontier(pts: &[(f64, f64)]) -> Vec<usize> {
        let mut out: Vec<usize> = (0..pts.len())
            .filter(|&i| !pts.iter().any(|q| dominates(q, &pts[i])))
            .collect();
        out.sort_by(|&a, &b| {
            pts[a].0.total_cmp(&pts[b].0).then(pts[a].1.total_cmp(&pts[b].1)).then(a.cmp(&b))
        });
        out
    }

    fn brute_near(pts: &[(f64, f64)], eps: f64) -> Vec<usize> {
        let mut out: Vec<usize> = (0..pts.len())
            .filter(|&i| {
                let s = (pts[i].0 + eps, pts[i].1 + eps);
                !pts.iter().any(|q| dominates(q, &s))
            })
            .collect();
        out.sort_by(|&a, &b| {
            pts[a].0.total_cmp(&pts[b].0).then(pts[a].1.total_cmp(&pts[b].1)).then(a.cmp(&b))
        });
        out
    }

    const GATOR: (f64, f64) = (0.2244, 0.6896);
    const INSTRUCT: (f64, f64) = (0.5253, 0.6845);
    const SLERP_07: (f64, f64) = (0.5166, 0.6969);

    #[test]
    fn dominance_examples() {
        assert!(dominates(&SLERP_07, &GATOR));
        assert!(!dominates(&GATOR, &GATOR));
        assert!(!dominates(&INSTRUCT, &SLERP_07));
        assert!(!dominates(&SLERP_07, &INSTRUCT));
    }

    #[test]
    fn reported_points() {
        let pts = [GATOR, INSTRUCT, SLERP_07];
        assert_eq!(pareto_frontier(&pts), vec![2, 1]);
        assert_eq!(pareto_frontier(&[GATOR]), vec![0]);
        assert!(pareto_frontier::<(f64, f64)>(&[]).is_empty());
    }

    #[test]
    fn duplicates_all_reported() {
        let pts = [(0.5, 0.5), (0.5, 0.5), (0.4, 0.4), (0.5, 0.4)];
        assert_eq!(pareto_frontier(&pts), vec![0, 1]);
        assert_eq!(near_frontier(&pts, 0.0), vec![0, 1]);
    }

    #[test]
    fn ties_in_one_objective() {
        let pts = [(0.5, 0.7), (0.5, 0.6), (0.6, 0.6)];
        assert_eq!(pareto_frontier(&pts), vec![0, 2]);
        assert_eq!(near_frontier(&pts, 0.0), vec![0, 2]);
    }

    #[test]
    fn near_examples() {
        let pts = [(0.50, 0.70), (0.495, 0.697)];
        assert_eq!(near_frontier(&pts, 0.01), vec![1, 0]);
        assert_eq!(near_frontier(&pts, 0.0), vec![0]);
        let spread = [(0.0, 0.0), (1.0, 1.0), (0.3, 0.9)];
        assert_eq!(near_frontier(&spread, 1.0).len(), 3);
        assert_eq!(near_frontier(&spread, 5.0).len(), 3);
    }

    #[test]
    fn negative_zero_is_zero() {
        let pts = [(-0.0, 0.5), (0.0, 0.5)];
        assert_eq!(pareto_frontier(&pts), vec![0, 1]);
    }

    fn point_sets() -> impl Strategy<Value = Vec<(f64, f64)>> {
        // a coarse lattice produces plenty of ties and duplicates
        let coord = prop_oneof![(0u8..=10).prop_map(|k| k as f64 / 10.0), 0.0f64..=1.0];
        proptest::collection::vec((coord.clone(), coord), 0..60)
    }

    proptest! {
        #[test]
        fn matches_brute_force(pts in point_sets()) {
            prop_assert_eq!(pareto_frontier(&pts), brute_frontier(&pts));
        }

        #[test]
        fn near_matches_brute_force(pts in point_sets(), eps in prop_oneof![Just(0.0), 0.0f64..0.3]) {
            prop_assert_eq!(near_frontier(&pts, eps), brute_near(&pts, eps));
        }

        #[test]
        fn near_is_monotone(pts in point_sets(), a in 0.0f64..0.2, b in 0.0f64..0.2) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let small = near_frontier(&pts, lo);
            let large = near_frontier(&pts, hi);
            prop_assert!(small.iter().all(|i| large.contains(i)));
            let front = pareto_frontier(&pts);
            prop_assert!(front.iter().all(|i| small.contains(i)));
        }

        #[test]
        fn permutation_invariant(pts in point_sets(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut perm: Vec<usize> = (0..pts.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled: Vec<(f64, f64)> = perm.iter().map(|&i| pts[i]).collect();
            let mut a: Vec<usize> = pareto_frontier(&pts);
            let mut b: Vec<usize> = pareto_frontier(&shuffled).into_iter().map(|j| perm[j]).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn every_point_covered(pts in point_sets()) {
            let front = pareto_frontier(&pts);
            for (i, p) in pts.iter().enumerate() {
                prop_assert!(front.contains(&i) || front.iter().any(|&f| dominates(&pts[f], p)));
            }
        }

        #[test]
        fn scale_invariant(pts in point_sets(), scale in 0.01f64..100.0) {
            let scaled: Vec<(f64, f64)> = pts.iter().map(|p| (p.0 * scale, p.1 * scale)).collect();
            let mut a = pareto_frontier(&pts);
            let mut b = pareto_frontier(&scaled);
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}
