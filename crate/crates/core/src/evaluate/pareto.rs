//! Pareto frontier over (maximize F1, minimize mean detection time).

use serde::{Deserialize, Serialize};

/// One evaluated configuration in objective space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub f1: f64,
    /// Absent when the configuration produced no true positives; such
    /// points are excluded from frontiers.
    pub mean_detection_time: Option<f64>,
    /// Full parameter assignment that produced this point.
    pub config: serde_json::Value,
}

impl ParetoPoint {
    pub fn new(f1: f64, mean_detection_time: Option<f64>, config: serde_json::Value) -> ParetoPoint {
        ParetoPoint {
            f1,
            mean_detection_time,
            config,
        }
    }
}

/// `a` dominates `b` when it is at least as good in both objectives and
/// strictly better in one.
fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    let (af1, at) = a;
    let (bf1, bt) = b;
    af1 >= bf1 && at <= bt && (af1 > bf1 || at < bt)
}

/// Non-dominated points, sorted by F1 descending (ties by time ascending).
/// Points without a mean detection time are dropped.
pub fn pareto_frontier(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let timed: Vec<(&ParetoPoint, (f64, f64))> = points
        .iter()
        .filter_map(|p| p.mean_detection_time.map(|t| (p, (p.f1, t))))
        .collect();
    let mut frontier: Vec<ParetoPoint> = timed
        .iter()
        .filter(|(_, objectives)| !timed.iter().any(|(_, other)| dominates(*other, *objectives)))
        .map(|(p, _)| (*p).clone())
        .collect();
    frontier.sort_by(|a, b| {
        b.f1.partial_cmp(&a.f1)
            .unwrap()
            .then(a.mean_detection_time.partial_cmp(&b.mean_detection_time).unwrap())
    });
    frontier
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn point(f1: f64, t: f64) -> ParetoPoint {
        ParetoPoint::new(f1, Some(t), serde_json::Value::Null)
    }

    /// O(n²) brute-force dominance filter, the oracle for the frontier.
    fn brute_force(points: &[ParetoPoint]) -> Vec<(f64, f64)> {
        let objs: Vec<(f64, f64)> = points
            .iter()
            .filter_map(|p| p.mean_detection_time.map(|t| (p.f1, t)))
            .collect();
        let mut kept: Vec<(f64, f64)> = objs
            .iter()
            .filter(|o| !objs.iter().any(|other| dominates(*other, **o)))
            .cloned()
            .collect();
        kept.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
        kept
    }

    #[test]
    fn dominated_point_is_dropped() {
        let points = vec![point(0.9, 0.5), point(0.8, 0.3), point(0.85, 0.6)];
        let frontier = pareto_frontier(&points);
        let objs: Vec<(f64, f64)> = frontier.iter().map(|p| (p.f1, p.mean_detection_time.unwrap())).collect();
        assert_eq!(objs, vec![(0.9, 0.5), (0.8, 0.3)]);
    }

    #[test]
    fn single_point_is_its_own_frontier() {
        let points = vec![point(0.5, 1.0)];
        assert_eq!(pareto_frontier(&points).len(), 1);
    }

    #[test]
    fn matches_brute_force_on_random_points() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(111);
        let points: Vec<ParetoPoint> = (0..200)
            .map(|_| point(rng.random_range(0.0..1.0), rng.random_range(0.0..2.0)))
            .collect();
        let frontier = pareto_frontier(&points);
        let got: Vec<(f64, f64)> = frontier.iter().map(|p| (p.f1, p.mean_detection_time.unwrap())).collect();
        assert_eq!(got, brute_force(&points));
    }

    #[test]
    fn frontier_is_idempotent() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(112);
        let points: Vec<ParetoPoint> = (0..100)
            .map(|_| point(rng.random_range(0.0..1.0), rng.random_range(0.0..2.0)))
            .collect();
        let once = pareto_frontier(&points);
        let twice = pareto_frontier(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn no_frontier_point_dominates_another() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(113);
        let points: Vec<ParetoPoint> = (0..150)
            .map(|_| point(rng.random_range(0.0..1.0), rng.random_range(0.0..2.0)))
            .collect();
        let frontier = pareto_frontier(&points);
        for a in &frontier {
            for b in &frontier {
                if a != b {
                    assert!(!dominates(
                        (a.f1, a.mean_detection_time.unwrap()),
                        (b.f1, b.mean_detection_time.unwrap())
                    ));
                }
            }
        }
    }

    #[test]
    fn timeless_points_are_excluded() {
        let points = vec![
            ParetoPoint::new(0.99, None, serde_json::Value::Null),
            point(0.5, 0.5),
        ];
        let frontier = pareto_frontier(&points);
        assert_eq!(frontier.len(), 1);
        assert_eq!(frontier[0].f1, 0.5);
    }

    #[test]
    fn duplicate_points_both_survive() {
        let points = vec![point(0.7, 0.4), point(0.7, 0.4)];
        assert_eq!(pareto_frontier(&points).len(), 2);
    }
}
