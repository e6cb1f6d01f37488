//! Per-distance experiment records: operating point, code-mode statistics
//! and decoy gains.

use std::collections::BTreeMap;

use tfqkd_core::channel::{DecoyYields, IntensityPair, IntensitySchedule, Level};
use tfqkd_core::Probability;

use crate::error::{CliError, Result};

const PAIRS: [(&str, IntensityPair); 7] = [
    ("mu_mu", IntensityPair(Level::Mu, Level::Mu)),
    ("nu1_nu1", IntensityPair(Level::Nu1, Level::Nu1)),
    ("nu2_nu2", IntensityPair(Level::Nu2, Level::Nu2)),
    ("nu3_nu3", IntensityPair(Level::Nu3, Level::Nu3)),
    ("mu_nu3", IntensityPair(Level::Mu, Level::Nu3)),
    ("nu1_nu3", IntensityPair(Level::Nu1, Level::Nu3)),
    ("nu2_nu3", IntensityPair(Level::Nu2, Level::Nu3)),
];

/// Mirror images of the cross pairs, needed only for asymmetric records.
const MIRRORED: [(&str, IntensityPair); 3] = [
    ("nu3_mu", IntensityPair(Level::Nu3, Level::Mu)),
    ("nu3_nu1", IntensityPair(Level::Nu3, Level::Nu1)),
    ("nu3_nu2", IntensityPair(Level::Nu3, Level::Nu2)),
];

pub const HEADER: [&str; 19] = [
    "distance_km",
    "attenuation_db",
    "mu",
    "nu1",
    "nu2",
    "nu3",
    "q_code",
    "e_code",
    "mu_mu",
    "nu1_nu1",
    "nu2_nu2",
    "nu3_nu3",
    "mu_nu3",
    "nu1_nu3",
    "nu2_nu3",
    "symmetric",
    "nu3_mu",
    "nu3_nu1",
    "nu3_nu2",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub distance_km: f64,
    /// Fibre attenuation between the senders, without the station loss.
    pub attenuation_db: f64,
    pub schedule: IntensitySchedule,
    pub q_code: Probability,
    pub e_code: Probability,
    /// Recorded gains by pair. A symmetric record holds only the seven
    /// distinct pairs.
    pub gains: BTreeMap<IntensityPair, Probability>,
    pub symmetric: bool,
}

impl ExperimentRecord {
    pub fn yields(&self) -> DecoyYields {
        let mut q_decoy = self.gains.clone();
        if self.symmetric {
            for (_, pair) in MIRRORED {
                q_decoy.insert(pair, self.gains[&pair.swapped()]);
            }
        }
        DecoyYields {
            q_code: self.q_code,
            e_code: self.e_code,
            q_decoy,
        }
    }

    /// Record of simulated yields. The mirrored pairs are stored explicitly
    /// unless they agree bit for bit.
    pub fn from_yields(
        distance_km: f64,
        attenuation_db: f64,
        schedule: IntensitySchedule,
        yields: &DecoyYields,
    ) -> Result<Self> {
        let missing = yields.missing_pairs();
        if !missing.is_empty() {
            return Err(tfqkd_core::Error::IncompleteData(
                missing.iter().map(|p| p.label()).collect(),
            )
            .into());
        }
        let symmetric = MIRRORED
            .iter()
            .all(|(_, p)| yields.q_decoy[p] == yields.q_decoy[&p.swapped()]);
        let mut gains: BTreeMap<_, _> = PAIRS.iter().map(|(_, p)| (*p, yields.q_decoy[p])).collect();
        if !symmetric {
            for (_, p) in MIRRORED {
                gains.insert(p, yields.q_decoy[&p]);
            }
        }
        Ok(ExperimentRecord {
            distance_km,
            attenuation_db,
            schedule,
            q_code: yields.q_code,
            e_code: yields.e_code,
            gains,
            symmetric,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentDataFile {
    pub records: Vec<ExperimentRecord>,
}

impl ExperimentDataFile {
    pub fn record_at(&self, distance_km: f64) -> Option<&ExperimentRecord> {
        self.records
            .iter()
            .find(|r| (r.distance_km - distance_km).abs() < 1e-6)
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

/// Looks up named columns of one CSV row.
struct Row<'a> {
    source: &'a str,
    line: u64,
    record: &'a csv::StringRecord,
    columns: &'a BTreeMap<String, usize>,
}

impl Row<'_> {
    fn raw(&self, field: &str) -> Option<&str> {
        self.columns
            .get(field)
            .and_then(|&i| self.record.get(i))
            .filter(|s| !s.is_empty())
    }

    fn invalid(&self, field: &str, message: impl Into<String>) -> CliError {
        CliError::Validation {
            source_name: self.source.to_string(),
            line: self.line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn number(&self, field: &str) -> Result<f64> {
        let raw = self.raw(field).ok_or_else(|| CliError::Parse {
            source_name: self.source.to_string(),
            line: self.line,
            message: format!("missing value for {field}"),
        })?;
        let v: f64 = raw.parse().map_err(|_| CliError::Parse {
            source_name: self.source.to_string(),
            line: self.line,
            message: format!("{field}: {raw:?} is not a number"),
        })?;
        if !v.is_finite() {
            return Err(self.invalid(field, format!("{v} is not finite")));
        }
        Ok(v)
    }

    fn probability(&self, field: &str) -> Result<Probability> {
        let v = self.number(field)?;
        Probability::new(v).map_err(|_| self.invalid(field, format!("{v} outside [0, 1]")))
    }

    fn flag(&self, field: &str) -> Result<bool> {
        match self.raw(field).map(str::to_ascii_lowercase).as_deref() {
            None | Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(other) => Err(self.invalid(field, format!("{other:?} is not a boolean"))),
        }
    }
}

fn header_map(
    source: &str,
    rdr: &mut csv::Reader<&[u8]>,
    required: &[&str],
) -> Result<BTreeMap<String, usize>> {
    let headers = rdr.headers().map_err(|e| CliError::Parse {
        source_name: source.to_string(),
        line: 1,
        message: e.to_string(),
    })?;
    let columns: BTreeMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    if columns.len() == 1 && columns.contains_key("") {
        return Err(CliError::Parse {
            source_name: source.to_string(),
            line: 1,
            message: "empty file".into(),
        });
    }
    for &name in required {
        if !columns.contains_key(name) {
            return Err(CliError::Parse {
                source_name: source.to_string(),
                line: 1,
                message: format!("missing column {name}"),
            });
        }
    }
    Ok(columns)
}

fn rows<'a>(
    source: &'a str,
    rdr: &'a mut csv::Reader<&'a [u8]>,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + 'a {
    rdr.records().map(move |r| {
        let record = r.map_err(|e| CliError::Parse {
            source_name: source.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        Ok((line, record))
    })
}

/// Parses and validates a data file. `source` labels error messages.
pub fn parse(source: &str, text: &str) -> Result<ExperimentDataFile> {
    let mut rdr = reader(text);
    let required: Vec<&str> = HEADER[..16].to_vec();
    let columns = header_map(source, &mut rdr, &required)?;
    let mut records = Vec::new();
    for item in rows(source, &mut rdr) {
        let (line, record) = item?;
        let row = Row {
            source,
            line,
            record: &record,
            columns: &columns,
        };
        let distance_km = row.number("distance_km")?;
        if distance_km < 0.0 {
            return Err(row.invalid("distance_km", "negative distance"));
        }
        let attenuation_db = row.number("attenuation_db")?;
        if attenuation_db < 0.0 {
            return Err(row.invalid("attenuation_db", "negative attenuation"));
        }
        let levels = ["mu", "nu1", "nu2", "nu3"].map(|f| row.number(f));
        let [mu, nu1, nu2, nu3] = levels;
        let (mu, nu1, nu2, nu3) = (mu?, nu1?, nu2?, nu3?);
        for (field, v) in [("mu", mu), ("nu1", nu1), ("nu2", nu2), ("nu3", nu3)] {
            if v <= 0.0 {
                return Err(row.invalid(field, format!("{v} is not a positive intensity")));
            }
        }
        let schedule = IntensitySchedule::new(mu, nu1, nu2, nu3)
            .map_err(|e| row.invalid("mu", format!("intensities must satisfy mu > nu1 > nu2 > nu3: {e}")))?;
        let q_code = row.probability("q_code")?;
        let e_code = row.probability("e_code")?;
        let symmetric = row.flag("symmetric")?;
        let mut gains = BTreeMap::new();
        for (name, pair) in PAIRS {
            gains.insert(pair, row.probability(name)?);
        }
        if !symmetric {
            for (name, pair) in MIRRORED {
                gains.insert(pair, row.probability(name)?);
            }
        }
        records.push(ExperimentRecord {
            distance_km,
            attenuation_db,
            schedule,
            q_code,
            e_code,
            gains,
            symmetric,
        });
    }
    if records.is_empty() {
        return Err(CliError::Parse {
            source_name: source.to_string(),
            line: 1,
            message: "no data rows".into(),
        });
    }
    Ok(ExperimentDataFile { records })
}

pub fn load(source: &str) -> Result<ExperimentDataFile> {
    parse(source, &crate::fixtures::load(source)?)
}

/// CSV text that [`parse`] turns back into `file`.
pub fn emit(file: &ExperimentDataFile) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for r in &file.records {
        let s = &r.schedule;
        let mut fields = vec![
            r.distance_km.to_string(),
            r.attenuation_db.to_string(),
            format!("{:e}", s.mu.get()),
            format!("{:e}", s.nu1.get()),
            format!("{:e}", s.nu2.get()),
            format!("{:e}", s.nu3.get()),
            format!("{:e}", r.q_code.get()),
            format!("{:e}", r.e_code.get()),
        ];
        fields.extend(PAIRS.iter().map(|(_, p)| format!("{:e}", r.gains[p].get())));
        fields.push(r.symmetric.to_string());
        fields.extend(MIRRORED.iter().map(|(_, p)| {
            if r.symmetric {
                String::new()
            } else {
                format!("{:e}", r.gains[p].get())
            }
        }));
        w.write_record(&fields).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

/// `distance_km,key_rate` pairs used to calibrate the leakage backend.
pub fn parse_anchor_rates(source: &str, text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rdr = reader(text);
    let columns = header_map(source, &mut rdr, &["distance_km", "key_rate"])?;
    let mut out = Vec::new();
    for item in rows(source, &mut rdr) {
        let (line, record) = item?;
        let row = Row {
            source,
            line,
            record: &record,
            columns: &columns,
        };
        let km = row.number("distance_km")?;
        let rate = row.number("key_rate")?;
        if rate < 0.0 {
            return Err(row.invalid("key_rate", "negative rate"));
        }
        out.push((km, rate));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_tables_load() {
        let file = parse("tables", include_str!("../fixtures/field-trial-decoy.csv")).unwrap();
        assert_eq!(file.records.len(), 3);
        let r = file.record_at(300.0).unwrap();
        assert_eq!(r.gains[&IntensityPair(Level::Mu, Level::Mu)].get(), 2.11e-5);
        assert_eq!(r.yields().q_decoy.len(), 10);
    }

    #[test]
    fn round_trip() {
        let file = parse("tables", include_str!("../fixtures/field-trial-decoy.csv")).unwrap();
        assert_eq!(parse("emitted", &emit(&file)).unwrap(), file);
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(parse("x", ""), Err(CliError::Parse { .. })));
    }

    #[test]
    fn bad_error_rate_names_the_field() {
        let text = include_str!("../fixtures/field-trial-decoy.csv").replace("0.0186", "1.2");
        match parse("x", &text) {
            Err(CliError::Validation { field, line, .. }) => {
                assert_eq!(field, "e_code");
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_number_reports_its_line() {
        let text = include_str!("../fixtures/field-trial-decoy.csv").replace("35.5", "3x5");
        match parse("x", &text) {
            Err(CliError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("attenuation_db"));
            }
            other => panic!("{other:?}"),
        }
    }
}
