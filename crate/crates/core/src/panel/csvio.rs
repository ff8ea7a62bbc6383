use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{AuditEntry, ColumnKind, PanelDataset, PanelError, Record, Result, SchemaConfig, Units};
use crate::numfmt::fmt_sig12;

/// Reads a panel CSV. Rows with an unparseable date, a non-numeric signal
/// cell, a missing target, the wrong field count or a repeated
/// (region, date, demographic labels) key are excluded and logged.
/// Percent-unit values outside `[0, 100]` are logged and the row flagged.
pub fn ingest_csv(path: &Path, schema: &SchemaConfig) -> Result<(PanelDataset, Vec<AuditEntry>)> {
    let file = std::fs::File::open(path).map_err(|source| PanelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ingest_reader(file, schema)
}

pub fn ingest_reader<R: Read>(
    reader: R,
    schema: &SchemaConfig,
) -> Result<(PanelDataset, Vec<AuditEntry>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let region_at =
        find(&schema.region_column).ok_or_else(|| PanelError::MissingHeader(schema.region_column.clone()))?;
    let date_at =
        find(&schema.date_column).ok_or_else(|| PanelError::MissingHeader(schema.date_column.clone()))?;
    if find(&schema.target).is_none() {
        return Err(PanelError::UnknownTargetColumn(schema.target.clone()));
    }
    let signal_at: Vec<usize> = (0..header.len()).filter(|&i| i != region_at && i != date_at).collect();
    let names: Vec<&str> = signal_at.iter().map(|&i| header[i].as_str()).collect();
    let columns = schema.classify(&names);
    let target_col = names.iter().position(|&n| n == schema.target).expect("checked above");

    let mut audit = Vec::new();
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx as u64 + 2;
        let rec = rec?;
        if rec.len() != header.len() {
            audit.push(AuditEntry::row(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
            continue;
        }
        let date_text = &rec[date_at];
        let Ok(date) = NaiveDate::parse_from_str(date_text, "%Y-%m-%d") else {
            audit.push(AuditEntry::row(line, format!("unparseable date `{date_text}`")));
            continue;
        };
        let mut values = Vec::with_capacity(signal_at.len());
        let mut text = BTreeMap::new();
        let mut bad = None;
        for (j, &at) in signal_at.iter().enumerate() {
            let cell = &rec[at];
            if columns[j].kind == ColumnKind::Demographic {
                values.push(parse_cell(cell).unwrap_or(f64::NAN));
                text.insert(j, cell.to_string());
                continue;
            }
            match parse_cell(cell) {
                Some(v) => values.push(v),
                None => {
                    bad = Some(format!("non-numeric value `{cell}` in column `{}`", columns[j].name));
                    break;
                }
            }
        }
        if let Some(reason) = bad {
            audit.push(AuditEntry::row(line, reason));
            continue;
        }
        if values[target_col].is_nan() {
            audit.push(AuditEntry::row(line, "missing target"));
            continue;
        }
        let key = (rec[region_at].to_string(), date, text.values().cloned().collect::<Vec<_>>());
        if !seen.insert(key) {
            audit.push(AuditEntry::row(line, "duplicate region/date"));
            continue;
        }
        for (j, c) in columns.iter().enumerate() {
            let v = values[j];
            if c.units == Units::Percent && v.is_finite() && !(0.0..=100.0).contains(&v) {
                audit.push(AuditEntry::row(
                    line,
                    format!("value {} outside [0, 100] in column `{}`", fmt_sig12(v), c.name),
                ));
            }
        }
        records.push(Record { region: rec[region_at].to_string(), date, values, text });
    }
    if records.is_empty() {
        return Err(PanelError::EmptyDataset("no admissible rows".into()));
    }
    let ds = PanelDataset::from_records(columns, &schema.target, records)?;
    Ok((ds, audit))
}

/// Empty, `NA` and `nan` are missing; anything else must parse as a number.
fn parse_cell(cell: &str) -> Option<f64> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
        return Some(f64::NAN);
    }
    cell.parse::<f64>().ok().filter(|v| !v.is_nan())
}

pub fn write_csv(ds: &PanelDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| PanelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv_to(ds, file)
}

/// Writes `region,date,<columns...>` with numbers at 12 significant digits.
pub fn write_csv_to<W: Write>(ds: &PanelDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["region".to_string(), "date".to_string()];
    header.extend(ds.columns().iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    let mut line = Vec::with_capacity(header.len());
    for i in 0..ds.n_rows() {
        line.clear();
        line.push(ds.region_name(i).to_string());
        line.push(ds.rows()[i].date.format("%Y-%m-%d").to_string());
        for j in 0..ds.columns().len() {
            line.push(ds.label(i, j));
        }
        w.write_record(&line)?;
    }
    w.flush().map_err(|source| PanelError::Io { path: "<csv writer>".into(), source })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> SchemaConfig {
        SchemaConfig::new("target")
    }

    #[test]
    fn minimal_input() {
        let csv = "region,date,sig_a_weighted,target\n\
                   A,2020-05-01,1.5,2\n\
                   A,2020-05-02,1.7,2.5\n\
                   B,2020-05-01,0.5,1\n";
        let (ds, audit) = ingest_reader(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert!(audit.is_empty());
        let kinds: Vec<_> = ds.columns().iter().map(|c| c.kind).collect();
        assert_eq!(kinds, vec![ColumnKind::WeightedSignal, ColumnKind::Target]);
    }

    #[test]
    fn bad_date_is_audited() {
        let csv = "region,date,sig_a_weighted,target\n\
                   A,2020-05-01,1.5,2\n\
                   A,not-a-date,1.7,2.5\n\
                   B,2020-05-01,0.5,1\n";
        let (ds, audit) = ingest_reader(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(audit.len(), 1);
        assert_eq!(audit[0].row, Some(3));
        assert!(audit[0].reason.contains("not-a-date"));
    }

    #[test]
    fn header_errors() {
        let csv = "region,date,sig_a_weighted\nA,2020-05-01,1\n";
        assert!(matches!(
            ingest_reader(csv.as_bytes(), &schema()),
            Err(PanelError::UnknownTargetColumn(c)) if c == "target"
        ));
        let csv = "region,sig,target\nA,1,1\n";
        assert!(matches!(
            ingest_reader(csv.as_bytes(), &schema()),
            Err(PanelError::MissingHeader(c)) if c == "date"
        ));
        assert!(matches!(ingest_reader("".as_bytes(), &schema()), Err(PanelError::MissingHeader(_))));
        let csv = "region,date,target\nA,nope,1\n";
        assert!(matches!(ingest_reader(csv.as_bytes(), &schema()), Err(PanelError::EmptyDataset(_))));
    }

    #[test]
    fn non_numeric_missing_and_range() {
        let csv = "region,date,gender,x,target\n\
                   A,2020-05-01,female,abc,2\n\
                   A,2020-05-02,female,,3\n\
                   A,2020-05-03,female,1,\n\
                   A,2020-05-04,female,1,140\n\
                   A,2020-05-04,female,2,40\n";
        let mut s = schema();
        s.demographic.push("gender".into());
        let (ds, audit) = ingest_reader(csv.as_bytes(), &s).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert!(ds.values()[[0, 1]].is_nan());
        assert_eq!(ds.flagged(), &[false, true]);
        let reasons: Vec<_> = audit.iter().map(|a| (a.row.unwrap(), a.reason.as_str())).collect();
        assert_eq!(reasons.len(), 4);
        assert!(reasons[0].1.contains("non-numeric"));
        assert_eq!(reasons[1], (4, "missing target"));
        assert!(reasons[2].1.contains("outside"));
        assert_eq!(reasons[3], (6, "duplicate region/date"));
        assert_eq!(ds.label(0, 0), "female");
    }

    #[test]
    fn write_then_ingest_is_identity() {
        let csv = "region,date,gender,x_weighted,target\n\
                   A,2020-05-01,female,0.333333333333,2\n\
                   A,2020-05-02,male,,3.5\n\
                   B,2020-05-01,female,1e52,99.125\n";
        let mut s = schema();
        s.demographic.push("gender".into());
        let (ds, _) = ingest_reader(csv.as_bytes(), &s).unwrap();
        let mut out = Vec::new();
        write_csv_to(&ds, &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), csv.replace("                   ", ""));
        let (again, _) = ingest_reader(out.as_slice(), &s).unwrap();
        assert_eq!(again.column("x_weighted").unwrap().iter().filter(|v| v.is_nan()).count(), 1);
        assert_eq!(again, ds);
        let mut out2 = Vec::new();
        write_csv_to(&again, &mut out2).unwrap();
        assert_eq!(out, out2);
    }
}
