//! CSV feature dumps with header `class_key,label,score,f0,...,f{n-1}`.
//!
//! Numbers are parsed as `f32` and promoted, so a CSV file and a BAMF file
//! holding the same values load to identical sets.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::features::{FeatureRecord, FeatureSet};

const FIXED: [&str; 3] = ["class_key", "label", "score"];

fn parse_f32(field: &str, row: usize, col: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f32>()
        .map(f64::from)
        .map_err(|e| Error::Format(format!("row {row}, column {col}: {e}")))
}

pub fn read<R: Read>(input: R, layer_tag: &str) -> Result<FeatureSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() < 4 || headers.iter().take(3).ne(FIXED) {
        return Err(Error::Format(
            "CSV header must start with class_key,label,score followed by feature columns".into(),
        ));
    }
    let dim = headers.len() - 3;
    for (i, h) in headers.iter().skip(3).enumerate() {
        if h != format!("f{i}") {
            return Err(Error::Format(format!(
                "feature column {i} is named {h:?}, expected f{i}"
            )));
        }
    }
    let mut set = FeatureSet::new(dim, layer_tag)?;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let label = rec[1].parse()?;
        let score = parse_f32(&rec[2], row, "score")?;
        let values = (0..dim)
            .map(|i| parse_f32(&rec[3 + i], row, &headers[3 + i]))
            .collect::<Result<Vec<_>>>()?;
        set.push(FeatureRecord::new(&rec[0], label, score, values))
            .map_err(|e| Error::Format(format!("row {row}: {e}")))?;
    }
    Ok(set)
}

/// Values are written through `f32` formatting (shortest round-tripping text).
pub fn write<W: Write>(out: W, set: &FeatureSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    header.extend((0..set.dimension()).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for r in set.records() {
        row.clear();
        row.push(r.class_key.clone());
        row.push(r.label.to_string());
        row.push((r.score as f32).to_string());
        row.extend(r.values.iter().map(|&v| (v as f32).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
