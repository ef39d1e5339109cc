//! Prediction and augmentation files.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use augclean::data::{CellRef, Label, Schema};
use augclean::detector::Prediction;
use augclean::noisychannel::AugmentedExample;
use serde::{Deserialize, Serialize};

use crate::Usage;

#[derive(Debug, Serialize, Deserialize)]
struct PredictionRecord {
    tuple_index: usize,
    attribute: String,
    label: String,
    probability: f64,
}

pub fn write_predictions<W: Write>(predictions: &[Prediction], schema: &Schema, out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in predictions {
        w.serialize(PredictionRecord {
            tuple_index: p.cell.tuple,
            attribute: schema.name(p.cell.attr).to_string(),
            label: p.label.as_str().to_string(),
            probability: p.probability,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(path: &Path, schema: &Schema) -> anyhow::Result<Vec<Prediction>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in r.deserialize::<PredictionRecord>().enumerate() {
        let rec = rec.with_context(|| format!("{} record {}", path.display(), i + 1))?;
        let attr = schema
            .index_of(&rec.attribute)
            .ok_or_else(|| Usage(format!("unknown attribute `{}` in {}", rec.attribute, path.display())))?;
        let label = match rec.label.as_str() {
            "error" => Label::Error,
            "correct" => Label::Correct,
            other => return Err(Usage(format!("unknown label `{other}` in {}", path.display())).into()),
        };
        out.push(Prediction {
            cell: CellRef::new(rec.tuple_index, attr),
            label,
            probability: rec.probability,
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct AugmentedRecord<'a> {
    tuple_index: usize,
    attribute: &'a str,
    clean_value: &'a str,
    dirty_value: &'a str,
}

pub fn write_augmented<W: Write>(examples: &[AugmentedExample], schema: &Schema, out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in examples {
        w.serialize(AugmentedRecord {
            tuple_index: e.cell.tuple,
            attribute: schema.name(e.cell.attr),
            clean_value: &e.clean,
            dirty_value: &e.dirty,
        })?;
    }
    w.flush()?;
    Ok(())
}
