use std::path::PathBuf;

use gdrc_core::data::{
    parse_csv, read_csv, read_feature_csv, read_svmlight, split, write_svmlight, CsvOptions, Dataset, MinMaxScaler,
    SplitSpec,
};
use gdrc_core::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn csv_opts(pos: &str, neg: Option<&str>) -> CsvOptions {
    CsvOptions { label_column: "class".into(), positive_label: pos.into(), negative_label: neg.map(Into::into) }
}

#[test]
fn wisconsin_counts() {
    let ds = parse_csv(data_dir().join("wisconsin.csv"), &csv_opts("malignant", Some("benign"))).unwrap();
    assert_eq!(ds.n(), 9);
    assert_eq!(ds.n_pos(), 239);
    assert_eq!(ds.n_neg(), 444);
    assert_eq!(ds.dropped_rows, 16);
    assert!(ds.features.iter().all(|v| (1.0..=10.0).contains(v)));
}

#[test]
fn balance_scale_drops_balanced_rows() {
    let ds = parse_csv(data_dir().join("balance_scale.csv"), &csv_opts("L", Some("R"))).unwrap();
    assert_eq!(ds.n(), 4);
    assert_eq!((ds.n_pos(), ds.n_neg()), (288, 288));
    assert_eq!(ds.dropped_rows, 49);
    // without a negative label every non-L row is negative
    let all = parse_csv(data_dir().join("balance_scale.csv"), &csv_opts("L", None)).unwrap();
    assert_eq!((all.n_pos(), all.n_neg()), (288, 337));
}

#[test]
fn csv_label_by_index_and_missing_cells() {
    let text = "a,y,b\n1,p,2\n?,p,3\n4,q,5\n6,q,\n";
    let opts = CsvOptions { label_column: "1".into(), positive_label: "p".into(), negative_label: None };
    let ds = read_csv(text.as_bytes(), "t", &opts).unwrap();
    assert_eq!(ds.labels, vec![1, -1]);
    assert_eq!(ds.features, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 5.0]));
    assert_eq!(ds.dropped_rows, 2);
}

#[test]
fn csv_errors() {
    let opts = csv_opts("1", None);
    let err = read_csv("a,class\n1,1\nx,0\n".as_bytes(), "t", &opts).unwrap_err();
    assert!(matches!(err, Error::Parse { row: 2, col: 1, .. }), "{err:?}");
    let err = read_csv("a,class\n1,1\n2,0,9\n".as_bytes(), "t", &opts).unwrap_err();
    assert!(matches!(err, Error::Parse { row: 2, .. }), "{err:?}");
    assert!(matches!(read_csv("a,b\n1,1\n".as_bytes(), "t", &opts), Err(Error::Config { .. })));
    assert!(matches!(read_csv("a,class\n1,1\n2,1\n".as_bytes(), "t", &opts), Err(Error::DegenerateDataset(_))));
    assert!(matches!(parse_csv("/nonexistent/file.csv", &opts), Err(Error::Io { .. })));
}

#[test]
fn feature_csv() {
    let m = read_feature_csv("a,b\n1,2\n3,4.5\n".as_bytes()).unwrap();
    assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.5]));
    assert!(read_feature_csv("a,b\n1\n".as_bytes()).is_err());
}

#[test]
fn svmlight_parsing() {
    let text = "+1 1:0.5 3:2 # comment\n\n-1 qid:4 2:-1\n1 3:7\n";
    let ds = read_svmlight(text.as_bytes(), "t", None).unwrap();
    assert_eq!(ds.labels, vec![1, -1, 1]);
    assert_eq!(ds.features, DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 2.0, 0.0, -1.0, 0.0, 0.0, 0.0, 7.0]));

    let multi = read_svmlight("2 1:1\n3 1:2\n2 1:3\n".as_bytes(), "t", Some("2")).unwrap();
    assert_eq!(multi.labels, vec![1, -1, 1]);

    assert!(matches!(read_svmlight("5 1:1\n".as_bytes(), "t", None), Err(Error::Label(_))));
    assert!(matches!(read_svmlight("1 2:1 1:1\n".as_bytes(), "t", None), Err(Error::Parse { row: 1, col: 2, .. })));
    assert!(matches!(read_svmlight("1 1:x\n".as_bytes(), "t", None), Err(Error::Parse { .. })));
    assert!(matches!(read_svmlight("1 1;2\n".as_bytes(), "t", None), Err(Error::Parse { .. })));
}

#[test]
fn scaler_maps_onto_unit_box() {
    let ds =
        Dataset::new("t", DMatrix::from_row_slice(3, 2, &[0.0, 5.0, 10.0, 5.0, 5.0, 5.0]), vec![1, -1, 1]).unwrap();
    let sc = MinMaxScaler::fit(&ds);
    let out = sc.transform(&ds);
    assert_eq!(out.features, DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.5, 0.0]));
}

#[test]
fn split_rejects_bad_fraction_and_tiny_classes() {
    let ds = Dataset::new("t", DMatrix::from_fn(6, 1, |i, _| i as f64), vec![1, 1, 1, -1, -1, -1]).unwrap();
    for f in [0.0, 1.0, -0.2, 1.5] {
        assert!(split(&ds, &SplitSpec { train_fraction: f, seed: 0, stratified: true }).is_err());
    }
    assert!(matches!(
        split(&ds, &SplitSpec { train_fraction: 0.2, seed: 0, stratified: true }),
        Err(Error::DegenerateSplit(_))
    ));
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..6, 4usize..40).prop_flat_map(|(n, rows)| {
        (
            prop::collection::vec(prop_oneof![Just(0.0), -1e6f64..1e6, -1e-6f64..1e-6], n * rows),
            prop::collection::vec(prop::bool::ANY, rows),
        )
            .prop_map(move |(vals, labs)| {
                let labels = labs.into_iter().map(|b| if b { 1 } else { -1 }).collect();
                Dataset::new("p", DMatrix::from_row_slice(rows, n, &vals), labels).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn svmlight_round_trip_is_exact(ds in dataset()) {
        let mut buf = Vec::new();
        write_svmlight(&ds, &mut buf).unwrap();
        let back = read_svmlight(buf.as_slice(), "p", None).unwrap();
        prop_assert_eq!(&back.labels, &ds.labels);
        // trailing all-zero columns are not recoverable from sparse text
        prop_assert!(back.n() <= ds.n());
        prop_assert_eq!(back.features.clone(), ds.features.columns(0, back.n()).into_owned());
        prop_assert!(ds.features.columns(back.n(), ds.n() - back.n()).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn split_partitions_rows(
        n_pos in 4usize..60,
        n_neg in 4usize..60,
        frac in 0.3f64..0.8,
        seed in 0u64..1000,
        stratified in prop::bool::ANY,
    ) {
        let rows = n_pos + n_neg;
        let labels: Vec<i8> = (0..rows).map(|i| if i < n_pos { 1 } else { -1 }).collect();
        let ds = Dataset::new("s", DMatrix::from_fn(rows, 1, |i, _| i as f64), labels).unwrap();
        let spec = SplitSpec { train_fraction: frac, seed, stratified };
        match split(&ds, &spec) {
            Ok((tr, te)) => {
                let mut ids: Vec<usize> =
                    tr.features.iter().chain(te.features.iter()).map(|&v| v as usize).collect();
                ids.sort_unstable();
                prop_assert_eq!(ids, (0..rows).collect::<Vec<_>>());
                if stratified {
                    prop_assert_eq!(tr.n_pos(), ((n_pos as f64) * frac).round() as usize);
                    prop_assert_eq!(tr.n_neg(), ((n_neg as f64) * frac).round() as usize);
                } else {
                    prop_assert_eq!(tr.len(), ((rows as f64) * frac).round() as usize);
                }
                let (tr2, _) = split(&ds, &spec).unwrap();
                prop_assert_eq!(tr2.features, tr.features);
            }
            Err(e) => {
                prop_assert!(matches!(e, Error::DegenerateSplit(_)));
                if stratified {
                    let k = |m: usize| ((m as f64) * frac).round() as usize;
                    prop_assert!(k(n_pos) < 2 || k(n_neg) < 2);
                }
            }
        }
    }
}
