use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;

use super::{ConductivityPoint, MixtureRecord, MAX_SOLVENTS};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 17] = [
    "mixture_id",
    "solvent_smiles_1",
    "solvent_smiles_2",
    "solvent_smiles_3",
    "solvent_smiles_4",
    "weight_frac_1",
    "weight_frac_2",
    "weight_frac_3",
    "weight_frac_4",
    "mol_weight_1",
    "mol_weight_2",
    "mol_weight_3",
    "mol_weight_4",
    "salt_smiles",
    "molality_mol_per_kg",
    "temperature_K",
    "log10_conductivity_S_per_cm",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// First bad row aborts the load.
    #[default]
    Strict,
    /// Bad rows are skipped and listed in the report.
    Lenient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkippedRow {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadReport {
    pub records: Vec<MixtureRecord>,
    pub skipped: Vec<SkippedRow>,
}

pub fn load_dataset(path: impl AsRef<Path>, mode: LoadMode) -> Result<LoadReport> {
    let file = std::fs::File::open(path.as_ref())?;
    read_dataset(file, mode)
}

/// Column index of each schema field in the file's header.
struct Columns([usize; CSV_HEADER.len()]);

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let mut idx = [0; CSV_HEADER.len()];
        for (slot, name) in idx.iter_mut().zip(CSV_HEADER) {
            *slot = header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Row {
                    line: 1,
                    message: format!("missing column {name}"),
                })?;
        }
        Ok(Self(idx))
    }

    fn field<'r>(&self, row: &'r csv::StringRecord, col: usize) -> &'r str {
        row.get(self.0[col]).map(str::trim).unwrap_or("")
    }
}

fn parse_real(text: &str, column: &str) -> std::result::Result<f64, String> {
    let v: f64 = text
        .parse()
        .map_err(|_| format!("non-numeric {column}: {text:?}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite {column}: {text:?}"));
    }
    Ok(v)
}

fn parse_row(
    cols: &Columns,
    row: &csv::StringRecord,
) -> std::result::Result<(MixtureRecord, ConductivityPoint), String> {
    let id = cols.field(row, 0);
    if id.is_empty() {
        return Err("empty mixture_id".into());
    }
    let mut solvents = Vec::new();
    let mut weights = Vec::new();
    let mut overrides = Vec::new();
    let mut gap = false;
    for slot in 0..MAX_SOLVENTS {
        let smiles = cols.field(row, 1 + slot);
        let weight = cols.field(row, 5 + slot);
        let mw = cols.field(row, 9 + slot);
        if smiles.is_empty() {
            if !weight.is_empty() || !mw.is_empty() {
                return Err(format!("slot {} has values but no SMILES", slot + 1));
            }
            gap = true;
            continue;
        }
        if gap {
            return Err(format!("solvent slot {} follows a blank slot", slot + 1));
        }
        solvents.push(smiles.to_string());
        weights.push(parse_real(weight, CSV_HEADER[5 + slot])?);
        overrides.push(if mw.is_empty() {
            None
        } else {
            Some(parse_real(mw, CSV_HEADER[9 + slot])?)
        });
    }
    let record = MixtureRecord {
        mixture_id: id.to_string(),
        solvent_smiles: solvents,
        weight_fractions: weights,
        mol_weight_overrides: overrides,
        salt_smiles: cols.field(row, 13).to_string(),
        molality: parse_real(cols.field(row, 14), CSV_HEADER[14])?,
        points: vec![],
        target_298k: None,
    };
    let point = ConductivityPoint {
        temperature_k: parse_real(cols.field(row, 15), CSV_HEADER[15])?,
        log10_sigma: parse_real(cols.field(row, 16), CSV_HEADER[16])?,
    };
    record.validate().map_err(|e| e.to_string())?;
    if point.temperature_k <= 0.0 {
        return Err(format!("temperature must be positive, got {}", point.temperature_k));
    }
    Ok((record, point))
}

/// Reads the CSV schema; rows sharing a mixture_id merge into one record in
/// order of first appearance.
pub fn read_dataset(reader: impl Read, mode: LoadMode) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut report = LoadReport::default();
    if header.is_empty() || header.iter().all(|h| h.trim().is_empty()) {
        warn!("dataset is empty");
        return Ok(report);
    }
    let cols = Columns::from_header(&header)?;
    let mut index: HashMap<String, usize> = HashMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let outcome = parse_row(&cols, &row).and_then(|(record, point)| {
            match index.get(&record.mixture_id) {
                Some(&i) => {
                    let existing = &mut report.records[i];
                    if !existing.same_mixture(&record) {
                        return Err(format!(
                            "mixture {} redefined with different composition",
                            record.mixture_id
                        ));
                    }
                    existing.points.push(point);
                }
                None => {
                    index.insert(record.mixture_id.clone(), report.records.len());
                    let mut record = record;
                    record.points.push(point);
                    report.records.push(record);
                }
            }
            Ok(())
        });
        if let Err(message) = outcome {
            match mode {
                LoadMode::Strict => return Err(Error::Row { line, message }),
                LoadMode::Lenient => {
                    warn!("skipping line {line}: {message}");
                    report.skipped.push(SkippedRow { line, message });
                }
            }
        }
    }
    if report.records.is_empty() && report.skipped.is_empty() {
        warn!("dataset has a header but no rows");
    }
    Ok(report)
}

fn fmt_real(v: f64) -> String {
    format!("{v}")
}

/// One row per conductivity point. A record without points but with a
/// 298 K target is written as a single 298 K row.
pub fn write_dataset_to(writer: impl Write, records: &[MixtureRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        r.validate()
            .map_err(|e| Error::Data(format!("mixture {}: {e}", r.mixture_id)))?;
        let points = if r.points.is_empty() {
            let target = r.target_298k.ok_or_else(|| {
                Error::Data(format!("mixture {} has no points and no target", r.mixture_id))
            })?;
            vec![ConductivityPoint {
                temperature_k: super::REFERENCE_TEMPERATURE,
                log10_sigma: target,
            }]
        } else {
            r.points.clone()
        };
        for p in points {
            let mut row: Vec<String> = Vec::with_capacity(CSV_HEADER.len());
            row.push(r.mixture_id.clone());
            for slot in 0..MAX_SOLVENTS {
                row.push(r.solvent_smiles.get(slot).cloned().unwrap_or_default());
            }
            for slot in 0..MAX_SOLVENTS {
                row.push(r.weight_fractions.get(slot).map(|&w| fmt_real(w)).unwrap_or_default());
            }
            for slot in 0..MAX_SOLVENTS {
                row.push(
                    r.mol_weight_overrides
                        .get(slot)
                        .copied()
                        .flatten()
                        .map(fmt_real)
                        .unwrap_or_default(),
                );
            }
            row.push(r.salt_smiles.clone());
            row.push(fmt_real(r.molality));
            row.push(fmt_real(p.temperature_k));
            row.push(fmt_real(p.log10_sigma));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(path: impl AsRef<Path>, records: &[MixtureRecord]) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_dataset_to(std::io::BufWriter::new(file), records)
}
