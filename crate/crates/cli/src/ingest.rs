use std::path::Path;

use lardo_chem::parse_smiles;
use lardo_core::downstream::{MoleculeDataset, Record};
use lardo_core::TaskType;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub kept: usize,
    /// Rows whose SMILES did not parse.
    pub dropped: usize,
    /// Rows with every label empty.
    pub unlabelled: usize,
}

/// Read a CSV with a header row. Empty label cells become missing labels.
pub fn ingest_csv(
    path: &Path,
    smiles_column: &str,
    label_columns: &[String],
    name: &str,
    task_type: TaskType,
) -> Result<(MoleculeDataset, IngestReport), CliError> {
    let input = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| input(e.to_string()))?;
    let headers = reader.headers().map_err(|e| input(e.to_string()))?.clone();
    let column = |c: &str| headers.iter().position(|h| h.trim() == c).ok_or_else(|| input(format!("missing column {c:?}")));
    let smiles_at = column(smiles_column)?;
    let label_at = label_columns.iter().map(|c| column(c)).collect::<Result<Vec<_>, _>>()?;

    let mut records = Vec::new();
    let mut report = IngestReport { kept: 0, dropped: 0, unlabelled: 0 };
    for (row, result) in reader.records().enumerate() {
        let line = row + 2;
        let rec = result.map_err(|e| input(format!("line {line}: {e}")))?;
        let smiles = rec.get(smiles_at).unwrap_or("").trim();
        if parse_smiles(smiles).is_err() {
            report.dropped += 1;
            continue;
        }
        let labels = label_at
            .iter()
            .map(|&k| {
                let cell = rec.get(k).unwrap_or("").trim();
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<f64>().map(Some).map_err(|_| input(format!("line {line}: label {cell:?} is not a number")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        if labels.iter().all(Option::is_none) {
            report.unlabelled += 1;
            continue;
        }
        records.push(Record { smiles: smiles.to_string(), labels });
    }
    if records.is_empty() {
        return Err(input("no valid rows".into()));
    }
    report.kept = records.len();
    let dataset = MoleculeDataset {
        name: name.to_string(),
        task_type,
        task_names: label_columns.to_vec(),
        records,
    };
    Ok((dataset, report))
}
