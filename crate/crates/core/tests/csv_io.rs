use nusid::observations::{read_csv, write_csv, CsvSchema, Dataset, MaskedTrace, ObservationSet, Trace};
use proptest::prelude::*;

fn schema(n_u: usize, n_z: usize, time: bool) -> CsvSchema {
    CsvSchema {
        time: time.then(|| "t".to_string()),
        inputs: (0..n_u).map(|i| format!("u{i}")).collect(),
        outputs: (0..n_z).map(|i| format!("y{i}")).collect(),
        missing_token: None,
    }
}

fn row(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e6f64..1e6, n)
}

prop_compose! {
    fn dataset()(n_u in 0usize..3, n_z in 1usize..3, t in 1usize..40)
        (inputs in prop::collection::vec(row(n_u), t),
         outputs in prop::collection::vec(row(n_z), t),
         keep in prop::collection::vec(any::<bool>(), t),
         n_u in Just(n_u), n_z in Just(n_z), time in any::<bool>())
        -> (Dataset, bool)
    {
        let t = inputs.len();
        let mut available: Vec<usize> = (0..t).filter(|&k| keep[k]).collect();
        if available.is_empty() {
            available.push(0);
        }
        let set = if available.len() == t {
            ObservationSet::Uniform(Trace { inputs, outputs })
        } else {
            ObservationSet::Missing(MaskedTrace {
                horizon: t,
                inputs,
                outputs: available.iter().map(|&k| outputs[k].clone()).collect(),
                available,
            })
        };
        let times = time.then(|| (0..t).map(|k| 0.5 * k as f64 + 1.25).collect());
        (Dataset { set, time: times, rows: t, n_u, n_z }, time)
    }
}

proptest! {
    #[test]
    fn export_then_ingest_is_identity((ds, time) in dataset()) {
        let s = schema(ds.n_u, ds.n_z, time);
        let mut buf = Vec::new();
        write_csv(&mut buf, &ds, &s).unwrap();
        let back = read_csv(buf.as_slice(), &s).unwrap();
        prop_assert_eq!(back, ds);
    }
}

#[test]
fn missing_token_and_blank_cells() {
    let text = "t,u,y\n0,1,2\n1,1,NA\n2,1,\n3,1,5\n";
    let s = CsvSchema {
        time: Some("t".into()),
        inputs: vec!["u".into()],
        outputs: vec!["y".into()],
        missing_token: Some("NA".into()),
    };
    let ds = read_csv(text.as_bytes(), &s).unwrap();
    match ds.set {
        ObservationSet::Missing(m) => {
            assert_eq!(m.available, vec![0, 3]);
            assert_eq!(m.outputs, vec![vec![2.0], vec![5.0]]);
        }
        other => panic!("expected missing set, got {other:?}"),
    }
}
