//! Biometric error rates. Scores are anomaly scores: a sample is accepted when
//! its score is at or below the threshold.

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ScoredSet {
    pub genuine: Vec<f64>,
    pub imposter: Vec<f64>,
}

impl ScoredSet {
    pub fn new(genuine: Vec<f64>, imposter: Vec<f64>) -> Self {
        Self { genuine, imposter }
    }

    fn check(&self) -> Result<(), EvalError> {
        if self.genuine.is_empty() || self.imposter.is_empty() {
            return Err(EvalError::EmptyClass);
        }
        if self.genuine.iter().chain(&self.imposter).any(|s| !s.is_finite()) {
            return Err(EvalError::NonFiniteScore);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
    pub tar: f64,
    pub acc: f64,
    /// Confusion counts: true accepts, false rejects, true rejects, false accepts.
    pub ta: usize,
    pub fr: usize,
    pub tr: usize,
    pub fa: usize,
}

pub fn compute_metrics(s: &ScoredSet, threshold: f64) -> Result<Metrics, EvalError> {
    s.check()?;
    let ta = s.genuine.iter().filter(|&&g| g <= threshold).count();
    let fr = s.genuine.len() - ta;
    let fa = s.imposter.iter().filter(|&&i| i <= threshold).count();
    let tr = s.imposter.len() - fa;
    let frr = fr as f64 / s.genuine.len() as f64;
    Ok(Metrics {
        threshold,
        far: fa as f64 / s.imposter.len() as f64,
        frr,
        tar: 1.0 - frr,
        acc: (ta + tr) as f64 / (s.genuine.len() + s.imposter.len()) as f64,
        ta,
        fr,
        tr,
        fa,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// Error rates at every distinct score, ascending, preceded by the
/// reject-everything point `(far 0, frr 1)` placed at the lowest score.
pub fn sweep(s: &ScoredSet) -> Result<Vec<SweepPoint>, EvalError> {
    s.check()?;
    let mut gen = s.genuine.clone();
    let mut imp = s.imposter.clone();
    gen.sort_by(f64::total_cmp);
    imp.sort_by(f64::total_cmp);
    let mut all: Vec<f64> = gen.iter().chain(&imp).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let (ng, ni) = (gen.len() as f64, imp.len() as f64);
    let mut points = Vec::with_capacity(all.len() + 1);
    points.push(SweepPoint {
        threshold: all[0],
        far: 0.0,
        frr: 1.0,
    });
    let (mut gi, mut ii) = (0, 0);
    for t in all {
        while gi < gen.len() && gen[gi] <= t {
            gi += 1;
        }
        while ii < imp.len() && imp[ii] <= t {
            ii += 1;
        }
        points.push(SweepPoint {
            threshold: t,
            far: ii as f64 / ni,
            frr: (gen.len() - gi) as f64 / ng,
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
    pub sweep: Vec<SweepPoint>,
}

/// Equal error rate, linearly interpolated on the segment of the sweep where
/// FAR - FRR changes sign.
///
/// When FAR = FRR holds on a whole interval of thresholds (for instance the
/// gap between perfectly separated classes), the returned threshold is the
/// midpoint of that interval rather than its lower end.
pub fn compute_eer(s: &ScoredSet) -> Result<EerResult, EvalError> {
    let sweep = sweep(s)?;
    let d = |p: &SweepPoint| p.far - p.frr;
    let i = sweep
        .iter()
        .position(|p| d(p) >= 0.0)
        .expect("last sweep point has far 1, frr 0");
    let hi = sweep[i];
    let (eer, threshold) = if d(&hi) == 0.0 {
        let threshold = match sweep[i..].iter().find(|p| d(p) > 0.0) {
            Some(next) => 0.5 * (hi.threshold + next.threshold),
            None => hi.threshold,
        };
        (hi.far, threshold)
    } else {
        let lo = sweep[i - 1];
        let alpha = -d(&lo) / (d(&hi) - d(&lo));
        (
            lo.far + alpha * (hi.far - lo.far),
            lo.threshold + alpha * (hi.threshold - lo.threshold),
        )
    };
    Ok(EerResult { eer, threshold, sweep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn metrics_arithmetic() {
        // TA=90, FR=10, TR=80, FA=20
        let mut genuine = vec![0.0; 90];
        genuine.extend(vec![2.0; 10]);
        let mut imposter = vec![0.5; 20];
        imposter.extend(vec![3.0; 80]);
        let m = compute_metrics(&ScoredSet::new(genuine, imposter), 1.0).unwrap();
        assert_eq!((m.ta, m.fr, m.tr, m.fa), (90, 10, 80, 20));
        assert_eq!(m.frr, 0.1);
        assert_eq!(m.tar, 0.9);
        assert_eq!(m.far, 0.2);
        assert_eq!(m.acc, 0.85);
    }

    #[test]
    fn perfect_separation() {
        let s = ScoredSet::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        let m = compute_metrics(&s, 0.5).unwrap();
        assert_eq!((m.far, m.frr, m.tar, m.acc), (0.0, 0.0, 1.0, 1.0));
        let e = compute_eer(&s).unwrap();
        assert_eq!(e.eer, 0.0);
        assert_eq!(e.threshold, 0.5);
    }

    #[test]
    fn identical_multisets_give_half() {
        let v = vec![1.0, 2.0, 3.0, 4.0, 2.0];
        let e = compute_eer(&ScoredSet::new(v.clone(), v)).unwrap();
        assert!((e.eer - 0.5).abs() < 1e-12);
    }

    #[test]
    fn threshold_at_boundary_accepts() {
        let s = ScoredSet::new(vec![1.0], vec![1.0]);
        let m = compute_metrics(&s, 1.0).unwrap();
        assert_eq!((m.frr, m.far), (0.0, 1.0));
    }

    #[test]
    fn empty_class_is_an_error() {
        assert!(matches!(compute_eer(&ScoredSet::new(vec![], vec![1.0])), Err(EvalError::EmptyClass)));
        assert!(matches!(
            compute_metrics(&ScoredSet::new(vec![1.0], vec![]), 0.0),
            Err(EvalError::EmptyClass)
        ));
        assert!(compute_eer(&ScoredSet::new(vec![f64::NAN], vec![1.0])).is_err());
    }

    #[test]
    fn interpolated_threshold_lies_between_scores() {
        let s = ScoredSet::new(vec![1.0, 2.0, 3.0], vec![2.5, 4.0, 5.0]);
        let e = compute_eer(&s).unwrap();
        // at 2.0: far 0, frr 1/3; from 2.5 up to 3.0: far 1/3, frr 1/3
        assert!((e.eer - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(e.threshold, 2.75);
    }

    fn scores() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0i32..40).prop_map(|v| v as f64 / 4.0), 1..40)
    }

    proptest! {
        #[test]
        fn far_rises_and_frr_falls_with_threshold(g in scores(), i in scores()) {
            let sw = sweep(&ScoredSet::new(g, i)).unwrap();
            for w in sw.windows(2) {
                prop_assert!(w[1].far >= w[0].far);
                prop_assert!(w[1].frr <= w[0].frr);
                prop_assert!(w[1].threshold >= w[0].threshold);
            }
        }

        #[test]
        fn eer_invariant_under_swap_and_negate(g in scores(), i in scores()) {
            let a = compute_eer(&ScoredSet::new(g.clone(), i.clone())).unwrap().eer;
            let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
            let b = compute_eer(&ScoredSet::new(neg(&i), neg(&g))).unwrap().eer;
            prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
        }

        #[test]
        fn tar_is_one_minus_frr(g in scores(), i in scores(), t in 0.0f64..10.0) {
            let m = compute_metrics(&ScoredSet::new(g, i), t).unwrap();
            prop_assert!((m.tar - (1.0 - m.frr)).abs() <= 1e-12);
            let total = (m.ta + m.fr + m.tr + m.fa) as f64;
            prop_assert!((m.acc - (m.ta + m.tr) as f64 / total).abs() <= 1e-12);
        }
    }
}
