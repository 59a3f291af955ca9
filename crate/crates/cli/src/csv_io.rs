//! Panel CSV files.
//!
//! Columns: `subject_id`, `spell_index` (dense `1..J` within a subject), `y`,
//! `d` (0 or 1) and features `x1..xp`. The header row is mandatory; other
//! columns are ignored. Row numbers in errors count data rows from 1, so the
//! file line is the row number plus one.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use panelsurv_core::model::grid_cell;
use panelsurv_core::{Error as CoreError, PanelDataset, Spell, Subject};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("no feature columns x1..xp in the header")]
    NoFeatures,
    #[error("feature columns must be x1..x{p} without gaps; found {found}")]
    FeatureColumns { p: usize, found: String },
    #[error("row {row}: cannot parse {column} value `{value}`")]
    Parse { row: usize, column: String, value: String },
    #[error("row {row}: y = {y} is not a non-negative multiple of psi = {psi}")]
    OffGrid { row: usize, y: f64, psi: f64 },
    #[error("row {row}: d must be 0 or 1, found `{value}`")]
    BadIndicator { row: usize, value: String },
    #[error("row {row}: subject `{subject}` has spell_index {found} where {expected} was expected")]
    DenseIndex { row: usize, subject: String, expected: usize, found: usize },
    #[error("row {row}: {source}")]
    Record { row: usize, source: csv::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    File { path: std::path::PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dataset(#[from] CoreError),
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, CsvError> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| CsvError::MissingColumn(name.into()))
}

fn feature_columns(headers: &csv::StringRecord) -> Result<Vec<usize>, CsvError> {
    let mut found: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            let h = h.trim();
            let k = h.strip_prefix('x')?.parse::<usize>().ok()?;
            (h == format!("x{k}")).then_some((k, i))
        })
        .collect();
    if found.is_empty() {
        return Err(CsvError::NoFeatures);
    }
    found.sort_unstable();
    let p = found.len();
    if found.iter().enumerate().any(|(j, &(k, _))| k != j + 1) {
        let names: Vec<String> = found.iter().map(|(k, _)| format!("x{k}")).collect();
        return Err(CsvError::FeatureColumns { p, found: names.join(",") });
    }
    Ok(found.into_iter().map(|(_, i)| i).collect())
}

fn parse_f64(field: &str, row: usize, column: &str) -> Result<f64, CsvError> {
    field.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CsvError::Parse {
        row,
        column: column.into(),
        value: field.into(),
    })
}

/// Reads and validates a panel from CSV text.
pub fn read_panel<R: Read>(reader: R, psi: f64) -> Result<PanelDataset, CsvError> {
    if !(psi.is_finite() && psi > 0.0) {
        return Err(CoreError::InvalidParameter { name: "psi", value: psi }.into());
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = column(&headers, "subject_id")?;
    let idx_col = column(&headers, "spell_index")?;
    let y_col = column(&headers, "y")?;
    let d_col = column(&headers, "d")?;
    let x_cols = feature_columns(&headers)?;

    let mut groups: BTreeMap<String, Vec<(usize, usize, Spell)>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|source| CsvError::Record { row, source })?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let id = field(id_col).trim().to_string();
        let index = field(idx_col).trim().parse::<usize>().ok().filter(|&k| k >= 1).ok_or_else(|| CsvError::Parse {
            row,
            column: "spell_index".into(),
            value: field(idx_col).into(),
        })?;
        let y = parse_f64(field(y_col), row, "y")?;
        let cell = grid_cell(y, psi).ok_or(CsvError::OffGrid { row, y, psi })?;
        let event = match field(d_col).trim() {
            "0" => false,
            "1" => true,
            other => return Err(CsvError::BadIndicator { row, value: other.into() }),
        };
        let x = x_cols
            .iter()
            .enumerate()
            .map(|(j, &c)| parse_f64(field(c), row, &format!("x{}", j + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        groups.entry(id).or_default().push((index, row, Spell::new(cell as f64 * psi, event, x)));
    }

    let mut subjects = Vec::with_capacity(groups.len());
    for (id, mut spells) in groups {
        spells.sort_by_key(|s| (s.0, s.1));
        for (j, &(index, row, _)) in spells.iter().enumerate() {
            if index != j + 1 {
                return Err(CsvError::DenseIndex { row, subject: id, expected: j + 1, found: index });
            }
        }
        subjects.push(Subject { id, spells: spells.into_iter().map(|s| s.2).collect() });
    }
    Ok(PanelDataset::new(psi, x_cols.len(), subjects)?)
}

pub fn read_panel_csv(path: &Path, psi: f64) -> Result<PanelDataset, CsvError> {
    let file = File::open(path).map_err(|source| CsvError::File { path: path.into(), source })?;
    read_panel(file, psi)
}

/// Writes a panel as CSV with grid-exact outcomes.
pub fn write_panel<W: Write>(ds: &PanelDataset, writer: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["subject_id".to_string(), "spell_index".into(), "y".into(), "d".into()];
    header.extend((1..=ds.p()).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    let psi = ds.psi();
    for s in ds.subjects() {
        for (j, sp) in s.spells.iter().enumerate() {
            let mut rec = vec![s.id.clone(), (j + 1).to_string(), (sp.cell(psi) as f64 * psi).to_string()];
            rec.push(sp.d().to_string());
            rec.extend(sp.x.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_panel_csv(ds: &PanelDataset, path: &Path) -> Result<(), CsvError> {
    let file = File::create(path).map_err(|source| CsvError::File { path: path.into(), source })?;
    write_panel(ds, file)
}

/// SHA-256 of the canonical CSV rendering of `ds`, in lowercase hex.
pub fn data_hash(ds: &PanelDataset) -> String {
    let mut bytes = Vec::new();
    write_panel(ds, &mut bytes).expect("writing to memory cannot fail");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
