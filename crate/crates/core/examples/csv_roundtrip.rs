//! Write a simulated missing-data record to CSV and read it back.

use nusid::harness::{preset, simulate_dataset};
use nusid::observations::{ingest_csv, export_csv, CsvSchema, DatasetMeta, ObservationSet};

fn main() {
    let config = preset("e3").unwrap();
    let (data, meta) = simulate_dataset(&config, 0).unwrap();
    let mut ds = data.to_dataset();
    // Drop every third output row.
    if let ObservationSet::Missing(m) = &mut ds.set {
        let keep: Vec<usize> = (0..m.available.len()).filter(|i| i % 3 != 0).collect();
        m.outputs = keep.iter().map(|&i| m.outputs[i].clone()).collect();
        m.available = keep.iter().map(|&i| m.available[i]).collect();
    }

    let dir = std::env::temp_dir().join("nusid_csv_roundtrip");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cstr.csv");
    let schema = CsvSchema {
        time: Some("k".into()),
        inputs: vec!["q_c".into()],
        outputs: vec!["c_a".into(), "temp".into()],
        missing_token: None,
    };
    export_csv(&path, &ds, &schema).unwrap();
    meta.write(dir.join("cstr.meta.json")).unwrap();

    let back = ingest_csv(&path, &schema).unwrap();
    let summary = DatasetMeta::describe(&back.set);
    println!("wrote {}", path.display());
    println!("rows {} observed {} (p_miss {:.3})", back.rows, summary.observed, 1.0 - summary.observed as f64 / back.rows as f64);
    println!("observations identical after round trip: {}", back.set == ds.set);
}
