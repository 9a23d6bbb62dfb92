use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use super::InferenceError;
use crate::numfmt::format_number;

/// Leading columns of the panel CSV, in order.
pub const REQUIRED_COLUMNS: [&str; 4] = ["household_id", "year", "outcome", "literacy_score"];
/// Optional trailing column holding observation weights.
pub const WEIGHT_COLUMN: &str = "weight";

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub household_id: String,
    pub year: i64,
    pub outcome: bool,
    /// Initial financial literacy score, 0 to 3.
    pub literacy_score: u8,
    /// Values in the order of [`PanelData::control_names`].
    pub controls: Vec<f64>,
    pub weight: Option<f64>,
}

/// Two-wave household panel. The later wave is the post-policy wave.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    control_names: Vec<String>,
    rows: Vec<PanelRow>,
}

fn schema(column: impl Into<String>, reason: impl Into<String>) -> InferenceError {
    InferenceError::Schema {
        column: column.into(),
        reason: reason.into(),
    }
}

impl PanelData {
    pub fn new(control_names: Vec<String>, rows: Vec<PanelRow>) -> Result<Self, InferenceError> {
        if rows.is_empty() {
            return Err(schema("household_id", "panel has no rows"));
        }
        let mut seen = BTreeSet::new();
        for name in &control_names {
            if REQUIRED_COLUMNS.contains(&name.as_str()) || name == WEIGHT_COLUMN {
                return Err(schema(name.clone(), "control name collides with a reserved column"));
            }
            if !seen.insert(name) {
                return Err(schema(name.clone(), "duplicate control"));
            }
        }
        let years: BTreeSet<i64> = rows.iter().map(|r| r.year).collect();
        if years.len() > 2 {
            return Err(schema("year", format!("expected at most two waves, found {}", years.len())));
        }
        let weighted = rows[0].weight.is_some();
        let mut households: HashMap<&str, (u8, Vec<i64>)> = HashMap::new();
        for r in &rows {
            if r.literacy_score > 3 {
                return Err(schema("literacy_score", format!("value {} outside 0..=3", r.literacy_score)));
            }
            if r.controls.len() != control_names.len() {
                return Err(schema("controls", "row length does not match the control names"));
            }
            if let Some((k, v)) = control_names.iter().zip(&r.controls).find(|(_, v)| !v.is_finite()) {
                return Err(schema(k.clone(), format!("non-finite value {v}")));
            }
            match r.weight {
                Some(w) if !(w > 0.0 && w.is_finite()) => {
                    return Err(schema(WEIGHT_COLUMN, format!("weights must be positive, got {w}")));
                }
                Some(_) if !weighted => return Err(schema(WEIGHT_COLUMN, "weights missing on some rows")),
                None if weighted => return Err(schema(WEIGHT_COLUMN, "weights missing on some rows")),
                _ => {}
            }
            let entry = households
                .entry(&r.household_id)
                .or_insert((r.literacy_score, Vec::new()));
            if entry.0 != r.literacy_score {
                return Err(schema(
                    "literacy_score",
                    format!("household {} changes literacy score between waves", r.household_id),
                ));
            }
            if entry.1.contains(&r.year) {
                return Err(schema(
                    "year",
                    format!("household {} appears twice in {}", r.household_id, r.year),
                ));
            }
            entry.1.push(r.year);
        }
        Ok(Self {
            control_names,
            rows,
        })
    }

    pub fn control_names(&self) -> &[String] {
        &self.control_names
    }

    pub fn rows(&self) -> &[PanelRow] {
        &self.rows
    }

    pub(super) fn rows_mut(&mut self) -> &mut [PanelRow] {
        &mut self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Year of the post-policy wave.
    pub fn policy_year(&self) -> i64 {
        self.rows.iter().map(|r| r.year).max().expect("nonempty panel")
    }

    pub fn n_households(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.household_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn is_weighted(&self) -> bool {
        self.rows[0].weight.is_some()
    }

    pub fn control_index(&self, name: &str) -> Option<usize> {
        self.control_names.iter().position(|n| n == name)
    }

    /// Reads the CSV layout `household_id,year,outcome,literacy_score,
    /// <controls...>[,weight]`. Missing values are rejected.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, InferenceError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| schema("header", e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.len() < REQUIRED_COLUMNS.len() || header.iter().all(String::is_empty) {
            return Err(schema("header", "missing or truncated header"));
        }
        for (i, want) in REQUIRED_COLUMNS.iter().enumerate() {
            if header[i] != *want {
                return Err(schema(
                    header[i].clone(),
                    format!("expected column `{want}` at position {}", i + 1),
                ));
            }
        }
        let weighted = header.last().is_some_and(|h| h == WEIGHT_COLUMN);
        let control_end = header.len() - usize::from(weighted);
        let control_names = header[REQUIRED_COLUMNS.len()..control_end].to_vec();

        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| schema("record", e.to_string()))?;
            let row_no = line + 2;
            let field = |i: usize| -> Result<&str, InferenceError> {
                match rec.get(i) {
                    Some(v) if !v.is_empty() && v != "NA" => Ok(v),
                    _ => Err(schema(header[i].clone(), format!("missing value on line {row_no}"))),
                }
            };
            let parse_f = |i: usize| -> Result<f64, InferenceError> {
                field(i)?.parse::<f64>().map_err(|_| {
                    schema(header[i].clone(), format!("not a number on line {row_no}"))
                })
            };
            let year = field(1)?
                .parse::<i64>()
                .map_err(|_| schema("year", format!("not an integer on line {row_no}")))?;
            let outcome = match field(2)? {
                "0" => false,
                "1" => true,
                other => return Err(schema("outcome", format!("`{other}` is not 0/1 on line {row_no}"))),
            };
            let literacy_score = field(3)?
                .parse::<u8>()
                .map_err(|_| schema("literacy_score", format!("not in 0..=3 on line {row_no}")))?;
            let controls = (REQUIRED_COLUMNS.len()..control_end)
                .map(parse_f)
                .collect::<Result<Vec<_>, _>>()?;
            let weight = if weighted { Some(parse_f(control_end)?) } else { None };
            rows.push(PanelRow {
                household_id: field(0)?.to_string(),
                year,
                outcome,
                literacy_score,
                controls,
                weight,
            });
        }
        Self::new(control_names, rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), InferenceError> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| InferenceError::Io(e.to_string());
        let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
        header.extend(self.control_names.iter().map(String::as_str));
        if self.is_weighted() {
            header.push(WEIGHT_COLUMN);
        }
        w.write_record(&header).map_err(io)?;
        for r in &self.rows {
            let mut rec = vec![
                r.household_id.clone(),
                r.year.to_string(),
                u8::from(r.outcome).to_string(),
                r.literacy_score.to_string(),
            ];
            rec.extend(r.controls.iter().map(|&v| format_number(v)));
            if let Some(wt) = r.weight {
                rec.push(format_number(wt));
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| InferenceError::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "household_id,year,outcome,literacy_score,age\n\
                         a,2010,0,1,40\n\
                         a,2012,1,1,42\n\
                         b,2010,0,3,55\n";

    #[test]
    fn roundtrip() {
        let p = PanelData::read_csv(SMALL.as_bytes()).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.n_households(), 2);
        assert_eq!(p.policy_year(), 2012);
        assert_eq!(p.control_names(), ["age"]);
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), SMALL);
    }

    #[test]
    fn rejects_missing_values_by_column() {
        let bad = "household_id,year,outcome,literacy_score,age\na,2010,0,1,\n";
        match PanelData::read_csv(bad.as_bytes()) {
            Err(InferenceError::Schema { column, .. }) => assert_eq!(column, "age"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_header_and_empty_input() {
        assert!(PanelData::read_csv("".as_bytes()).is_err());
        let bad = "id,year,outcome,literacy_score\n";
        match PanelData::read_csv(bad.as_bytes()) {
            Err(InferenceError::Schema { column, .. }) => assert_eq!(column, "id"),
            other => panic!("unexpected {other:?}"),
        }
        let header_only = "household_id,year,outcome,literacy_score\n";
        assert!(PanelData::read_csv(header_only.as_bytes()).is_err());
    }

    #[test]
    fn rejects_changing_literacy_and_third_wave() {
        let bad = "household_id,year,outcome,literacy_score\na,2010,0,1\na,2012,0,2\n";
        assert!(PanelData::read_csv(bad.as_bytes()).is_err());
        let bad = "household_id,year,outcome,literacy_score\na,2010,0,1\nb,2012,0,2\nc,2014,0,2\n";
        assert!(PanelData::read_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn weights_parsed() {
        let s = "household_id,year,outcome,literacy_score,weight\na,2010,0,1,2.5\n";
        let p = PanelData::read_csv(s.as_bytes()).unwrap();
        assert_eq!(p.rows()[0].weight, Some(2.5));
        assert!(p.control_names().is_empty());
    }
}
