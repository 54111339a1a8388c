//! Feature-dump codecs.

pub mod bamf;
pub mod csv;

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::features::FeatureSet;

/// Reads a feature dump, choosing the codec by extension: `.csv` is CSV,
/// anything else is BAMF. CSV input gets `csv_layer_tag` as its layer tag.
pub fn read_features(path: impl AsRef<Path>, csv_layer_tag: &str) -> Result<FeatureSet> {
    let path = path.as_ref();
    let file = std::io::BufReader::new(fs::File::open(path)?);
    if is_csv(path) {
        csv::read(file, csv_layer_tag)
    } else {
        bamf::read(file)
    }
}

pub fn write_features(path: impl AsRef<Path>, set: &FeatureSet) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    if is_csv(path) {
        csv::write(&mut file, set)?;
    } else {
        bamf::write(&mut file, set)?;
    }
    std::io::Write::flush(&mut file)?;
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}
