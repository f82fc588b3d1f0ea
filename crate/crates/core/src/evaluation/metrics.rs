use serde::{Deserialize, Serialize};

use super::scd::{detect_peaks, DistanceCurve};
use crate::corpus::{Annotation, Segment};
use crate::error::{Error, Result};

/// `[extent.start, c₁, …, c_k, extent.end]` as consecutive segments. Changes
/// outside the extent are ignored.
pub fn changes_to_segments(changes: &[f64], extent: Segment) -> Vec<Segment> {
    let mut bounds = vec![extent.start];
    bounds.extend(changes.iter().copied().filter(|&c| c > extent.start && c < extent.end));
    bounds.push(extent.end);
    bounds
        .windows(2)
        .map(|w| Segment { start: w[0], end: w[1] })
        .collect()
}

/// Numerator `Σ_r max_h |r ∩ h|` and denominator `Σ_r |r|` of coverage.
pub fn coverage_parts(reference: &[Segment], hypothesis: &[Segment]) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for r in reference {
        den += r.duration();
        num += hypothesis.iter().map(|h| r.overlap(h)).fold(0.0, f64::max);
    }
    (num, den)
}

pub fn segment_coverage(reference: &[Segment], hypothesis: &[Segment]) -> Result<f64> {
    let (num, den) = coverage_parts(reference, hypothesis);
    if reference.is_empty() || den <= 0.0 {
        return Err(Error::Empty("reference"));
    }
    Ok(num / den)
}

/// Share of each reference turn covered by its best-matching hypothesis
/// segment. Speaker labels play no part.
pub fn coverage(reference: &Annotation, hypothesis: &[Segment]) -> Result<f64> {
    segment_coverage(&reference.segments(), hypothesis)
}

/// Coverage with the roles of reference and hypothesis swapped.
pub fn purity(reference: &Annotation, hypothesis: &[Segment]) -> Result<f64> {
    if hypothesis.is_empty() {
        return Err(Error::Empty("hypothesis"));
    }
    segment_coverage(hypothesis, &reference.segments())
}

/// Share of `reference` change times matched by a distinct detected change
/// within `±tolerance`. Matching is greedy in time order. No reference
/// changes gives 1.
pub fn change_recall(reference: &[f64], detected: &[f64], tolerance: f64) -> f64 {
    if reference.is_empty() {
        return 1.0;
    }
    let mut used = vec![false; detected.len()];
    let mut hits = 0;
    for &r in reference {
        let best = detected
            .iter()
            .enumerate()
            .filter(|&(k, &d)| !used[k] && (d - r).abs() <= tolerance + 1e-9)
            .min_by(|a, b| (a.1 - r).abs().total_cmp(&(b.1 - r).abs()));
        if let Some((k, _)) = best {
            used[k] = true;
            hits += 1;
        }
    }
    hits as f64 / reference.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityCoveragePoint {
    pub threshold: f64,
    pub purity: f64,
    pub coverage: f64,
    pub num_changes: usize,
}

/// One file's inputs to the change-detection metrics.
#[derive(Debug, Clone)]
pub struct ScdFile<'a> {
    pub reference: &'a Annotation,
    pub curve: &'a DistanceCurve,
    pub extent: Segment,
}

/// One point per threshold, in ascending threshold order. Over several files
/// numerators and denominators are summed before dividing, so long files weigh
/// more.
pub fn purity_coverage_curve(files: &[ScdFile<'_>], thresholds: &[f64], context: f64) -> Result<Vec<PurityCoveragePoint>> {
    if files.is_empty() {
        return Err(Error::Empty("file list"));
    }
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_iter()
        .map(|threshold| {
            let (mut pn, mut pd, mut cn, mut cd) = (0.0, 0.0, 0.0, 0.0);
            let mut num_changes = 0;
            for f in files {
                let changes = detect_peaks(f.curve, context, threshold);
                num_changes += changes.len();
                let hyp = changes_to_segments(&changes, f.extent);
                let reference = f.reference.segments();
                let (n, d) = coverage_parts(&reference, &hyp);
                cn += n;
                cd += d;
                let (n, d) = coverage_parts(&hyp, &reference);
                pn += n;
                pd += d;
            }
            if cd <= 0.0 {
                return Err(Error::Empty("reference"));
            }
            Ok(PurityCoveragePoint {
                threshold,
                purity: pn / pd,
                coverage: cn / cd,
                num_changes,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Turn;
    use proptest::prelude::*;

    fn seg(a: f64, b: f64) -> Segment {
        Segment::new(a, b).unwrap()
    }

    fn annotation(turns: &[(f64, f64, &str)]) -> Annotation {
        Annotation::new(
            "f",
            turns
                .iter()
                .map(|&(a, b, s)| Turn { segment: seg(a, b), speaker: s.into() })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn recall_matches_each_detection_once() {
        assert_eq!(change_recall(&[], &[1.0], 0.25), 1.0);
        assert_eq!(change_recall(&[5.0, 10.0], &[5.2, 9.8], 0.25), 1.0);
        assert_eq!(change_recall(&[5.0, 10.0], &[5.3, 10.0], 0.25), 0.5);
        assert_eq!(change_recall(&[5.0, 5.2], &[5.1], 0.25), 0.5);
    }

    #[test]
    fn segments_from_changes() {
        assert_eq!(changes_to_segments(&[], seg(0.0, 10.0)), vec![seg(0.0, 10.0)]);
        assert_eq!(changes_to_segments(&[5.0], seg(0.0, 10.0)), vec![seg(0.0, 5.0), seg(5.0, 10.0)]);
        assert_eq!(changes_to_segments(&[2.0, 7.0], seg(0.0, 10.0)).len(), 3);
    }

    #[test]
    fn hand_cases() {
        let two = annotation(&[(0.0, 2.0, "a"), (2.0, 4.0, "b")]);
        let whole = [seg(0.0, 4.0)];
        assert_eq!(coverage(&two, &whole).unwrap(), 1.0);
        assert_eq!(purity(&two, &whole).unwrap(), 0.5);

        let one = annotation(&[(0.0, 4.0, "a")]);
        assert_eq!(coverage(&one, &[seg(0.0, 2.0), seg(2.0, 4.0)]).unwrap(), 0.5);

        assert_eq!(coverage(&two, &two.segments()).unwrap(), 1.0);
        assert_eq!(purity(&two, &two.segments()).unwrap(), 1.0);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(segment_coverage(&[], &[seg(0.0, 1.0)]).is_err());
        assert!(purity(&annotation(&[(0.0, 1.0, "a")]), &[]).is_err());
    }

    #[test]
    fn over_segmentation_trades_coverage_for_purity() {
        let reference = annotation(&[(0.0, 3.0, "a"), (3.0, 7.0, "b"), (7.0, 10.0, "a")]);
        let changes: Vec<f64> = (1..100).map(|k| k as f64 * 0.1).collect();
        let hyp = changes_to_segments(&changes, seg(0.0, 10.0));
        assert!(purity(&reference, &hyp).unwrap() > 0.999);
        assert!(coverage(&reference, &hyp).unwrap() < 0.05);
    }

    #[test]
    fn curve_degenerate_thresholds() {
        let reference = annotation(&[(0.0, 3.0, "a"), (3.0, 6.0, "b")]);
        let curve = DistanceCurve {
            times: (0..21).map(|k| 2.0 + k as f64 * 0.1).collect(),
            values: (0..21).map(|k| 1.0 - (k as f64 - 10.0).abs() / 10.0).collect(),
        };
        let files = [ScdFile { reference: &reference, curve: &curve, extent: seg(0.0, 6.0) }];
        let points = purity_coverage_curve(&files, &[2.0, -1.0, 0.5], 1.0).unwrap();
        assert_eq!(points.iter().map(|p| p.threshold).collect::<Vec<_>>(), vec![-1.0, 0.5, 2.0]);
        assert_eq!(points[2].num_changes, 0);
        assert_eq!(points[2].coverage, 1.0);
        assert_eq!(points[2].purity, 0.5);
        assert_eq!(points[0].num_changes, 1);
        assert!((points[0].coverage - 1.0).abs() < 1e-12 && (points[0].purity - 1.0).abs() < 1e-12);
    }

    fn segmentation() -> impl Strategy<Value = Vec<Segment>> {
        prop::collection::btree_set(1u32..200, 0..12).prop_map(|cuts| {
            let changes: Vec<f64> = cuts.into_iter().map(|c| c as f64 * 0.05).collect();
            changes_to_segments(&changes, Segment { start: 0.0, end: 10.0 })
        })
    }

    proptest! {
        #[test]
        fn purity_is_dual_coverage(r in segmentation(), h in segmentation()) {
            let reference = Annotation::new(
                "f",
                r.iter().map(|s| Turn { segment: *s, speaker: "x".into() }).collect(),
            ).unwrap();
            let p = purity(&reference, &h).unwrap();
            prop_assert_eq!(p, segment_coverage(&h, &r).unwrap());
            let c = coverage(&reference, &h).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&p) && (0.0..=1.0 + 1e-12).contains(&c));
            prop_assert_eq!(segment_coverage(&r, &r).unwrap(), 1.0);
        }
    }
}
