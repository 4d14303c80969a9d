//! Trial CSV and JSON summary documents.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::experiment::TrialRecord;
use crate::HarnessError;

pub const CSV_HEADER: [&str; 8] = ["trial", "mechanism", "sw", "expected_sw", "time_ns", "matches", "volunteers", "lambda"];

pub fn write_records<W: Write>(out: W, records: &[TrialRecord]) -> Result<(), HarnessError> {
    // Serde emits the header from field order, which matches CSV_HEADER.
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(HarnessError::Config(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|rec| rec.map_err(HarnessError::from)).collect()
}

pub fn write_records_file(path: &Path, records: &[TrialRecord]) -> Result<(), HarnessError> {
    write_records(BufWriter::new(File::create(path)?), records)
}

pub fn read_records_file(path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    read_records(File::open(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| HarnessError::Io(e.into()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    serde_json::from_reader(File::open(path)?).map_err(|e| HarnessError::Io(e.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use baselines::MechanismId;

    fn sample() -> Vec<TrialRecord> {
        vec![
            TrialRecord { trial: 0, mechanism: MechanismId::TwoSAuction, sw: 12.5, expected_sw: 11.0, time_ns: 900, matches: 4, volunteers: 1, lambda: 0.25 },
            TrialRecord { trial: 0, mechanism: MechanismId::TwoSAuctionNoOB, sw: 0.1, expected_sw: 0.0, time_ns: 7, matches: 0, volunteers: 0, lambda: 0.0 },
        ]
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        write_records(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert!(text.contains("TwoSAuction_NoOB"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), sample());
    }

    #[test]
    fn empty_csv_has_header() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().trim(), CSV_HEADER.join(","));
        assert!(read_records(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "trial,mech,sw\n0,TwoSAuction,1\n";
        assert!(read_records(text.as_bytes()).is_err());
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("t.csv");
        write_records_file(&csv, &sample()).unwrap();
        assert_eq!(read_records_file(&csv).unwrap(), sample());
        let json = dir.path().join("t.json");
        write_json(&json, &sample()).unwrap();
        let back: Vec<TrialRecord> = read_json(&json).unwrap();
        assert_eq!(back, sample());
    }
}
