use pdbench_core::pi::{
    dataset_pi, load_scores, parse_scores, perceptual_index, write_scores, MetricRecord, ScoreError, ScoreSet, MA, NIQE,
    LINEARITY_TOLERANCE,
};
use proptest::prelude::*;

fn table(rows: &[(String, f64)]) -> String {
    let mut s = String::from("image_id,value\n");
    for (id, v) in rows {
        s.push_str(&format!("{id},{v}\n"));
    }
    s
}

fn set_from(ma: &[f64], niqe: &[f64]) -> ScoreSet {
    let roster: Vec<String> = (0..ma.len()).map(|i| format!("img{i:03}")).collect();
    let mut set = ScoreSet::new(roster.clone());
    for (i, id) in roster.iter().enumerate() {
        for (metric, v) in [(MA, ma[i]), (NIQE, niqe[i])] {
            set.insert(MetricRecord {
                method: "m".into(),
                image_id: id.clone(),
                metric: metric.into(),
                value: v,
            })
            .unwrap();
        }
    }
    set
}

#[test]
fn hundred_row_file_loads() {
    let rows: Vec<(String, f64)> = (0..100).map(|i| (format!("{:04}", i + 801), i as f64 * 0.07)).collect();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ma.csv");
    std::fs::write(&p, table(&rows)).unwrap();
    let recs = load_scores(&p, "team", "ma", None).unwrap();
    assert_eq!(recs.len(), 100);
    assert_eq!(recs[3].image_id, "0804");
    assert!(matches!(
        load_scores(&dir.path().join("none.csv"), "t", "ma", None),
        Err(ScoreError::Io { .. })
    ));
}

#[test]
fn rejects_duplicates_nan_and_gaps() {
    let dup = "image_id,value\na,1\nb,2\na,3\n";
    match parse_scores(dup.as_bytes(), "x.csv", "m", "ma", None) {
        Err(ScoreError::Duplicate { image_id, line, .. }) => assert_eq!((image_id.as_str(), line), ("a", 4)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        parse_scores("image_id,value\na,NaN\n".as_bytes(), "x", "m", "ma", None),
        Err(ScoreError::BadRow { line: 2, .. })
    ));
    let roster = vec!["a".to_string(), "z".to_string()];
    match parse_scores("image_id,value\na,1\n".as_bytes(), "x", "m", "ma", Some(&roster)) {
        Err(ScoreError::MissingRoster { missing, .. }) => assert_eq!(missing, vec!["z".to_string()]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn dataset_pi_examples() {
    assert_eq!(dataset_pi(&set_from(&[10.0, 10.0], &[0.0, 0.0]), "m").unwrap(), 0.0);
    // PI 2.0 and 3.0.
    let set = set_from(&[8.0, 7.0], &[2.0, 3.0]);
    assert_eq!(perceptual_index(8.0, 2.0), 2.0);
    assert_eq!(perceptual_index(7.0, 3.0), 3.0);
    assert_eq!(dataset_pi(&set, "m").unwrap(), 2.5);
    assert!(matches!(dataset_pi(&set, "other"), Err(ScoreError::Incomplete { .. })));
}

proptest! {
    #[test]
    fn index_slopes_are_half(ma in -5.0..15.0f64, niqe in 0.0..30.0f64, d in 0.01..2.0f64) {
        let base = perceptual_index(ma, niqe);
        prop_assert!(perceptual_index(ma + d, niqe) < base);
        prop_assert!(perceptual_index(ma, niqe + d) > base);
        prop_assert!((perceptual_index(ma + d, niqe) - (base - d / 2.0)).abs() < 1e-12);
        prop_assert!((perceptual_index(ma, niqe + d) - (base + d / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn dataset_pi_equals_direct_resummation(values in prop::collection::vec((0.0..10.0f64, 0.0..25.0f64), 1..60)) {
        let ma: Vec<f64> = values.iter().map(|v| v.0).collect();
        let niqe: Vec<f64> = values.iter().map(|v| v.1).collect();
        let got = dataset_pi(&set_from(&ma, &niqe), "m").unwrap();
        let mut acc = 0.0;
        for (m, q) in ma.iter().zip(&niqe) {
            acc += 0.5 * ((10.0 - m) + q);
        }
        let oracle = acc / ma.len() as f64;
        prop_assert!((got - oracle).abs() <= LINEARITY_TOLERANCE * oracle.abs().max(1.0));
        let from_means = 0.5 * ((10.0 - ma.iter().sum::<f64>() / ma.len() as f64) + niqe.iter().sum::<f64>() / niqe.len() as f64);
        prop_assert!((got - from_means).abs() <= LINEARITY_TOLERANCE * got.abs().max(1.0));
    }

    #[test]
    fn score_files_round_trip(values in prop::collection::vec(-1e6..1e6f64, 0..40)) {
        let records: Vec<MetricRecord> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| MetricRecord { method: "m".into(), image_id: format!("id {i}"), metric: "lpips".into(), value: v })
            .collect();
        let mut buf = Vec::new();
        write_scores(&records, &mut buf).unwrap();
        let back = parse_scores(buf.as_slice(), "mem", "m", "lpips", None).unwrap();
        prop_assert_eq!(back, records);
    }
}
