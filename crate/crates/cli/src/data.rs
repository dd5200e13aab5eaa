//! CSV loading: header-based column selection with missing values mapped to
//! NaN (dropped and counted by the dataset constructor).

use csv::ReaderBuilder;

use ivbound_core::reduced_form::Dataset;

use crate::app::{classify, AppError, AppResult};
use crate::config::AnalysisConfig;

fn parse_cell(raw: &str, column: &str, row: usize) -> AppResult<f64> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("na") || trimmed.eq_ignore_ascii_case("nan")
    {
        return Ok(f64::NAN);
    }
    trimmed.parse::<f64>().map_err(|_| {
        AppError::Data(format!(
            "column '{column}', data row {row}: cannot parse '{trimmed}' as a number"
        ))
    })
}

pub fn load_dataset(config: &AnalysisConfig) -> AppResult<Dataset> {
    let path = &config.data;
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| AppError::Data(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?
        .clone();
    let find = |name: &str| -> AppResult<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            AppError::Data(format!(
                "column '{name}' not found in {} header",
                path.display()
            ))
        })
    };
    let cols = &config.columns;
    let iy = find(&cols.y)?;
    let it = find(&cols.t)?;
    let iz = find(&cols.z)?;
    let ix: Vec<usize> = cols.x.iter().map(|c| find(c)).collect::<AppResult<_>>()?;

    let mut y = Vec::new();
    let mut t = Vec::new();
    let mut z = Vec::new();
    let mut x: Vec<Vec<f64>> = vec![Vec::new(); ix.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
        let cell = |idx: usize, name: &str| -> AppResult<f64> {
            let raw = record.get(idx).ok_or_else(|| {
                AppError::Data(format!("data row {}: too few fields", row + 1))
            })?;
            parse_cell(raw, name, row + 1)
        };
        y.push(cell(iy, &cols.y)?);
        t.push(cell(it, &cols.t)?);
        z.push(cell(iz, &cols.z)?);
        for (slot, (&idx, name)) in x.iter_mut().zip(ix.iter().zip(&cols.x)) {
            slot.push(cell(idx, name)?);
        }
    }
    Dataset::new(y, t, z, x, config.treatment_kind).map_err(classify)
}
