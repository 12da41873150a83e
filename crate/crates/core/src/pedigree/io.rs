//! CSV and JSON pedigree files.
//!
//! CSV columns: `family_id,member_id,mother_id,father_id,sex,current_age,deceased,
//! bc_status,bc_onset_age,oc_status,oc_onset_age`. An empty cell is a missing
//! value. The JSON form is an array of `{"family_id", "members": [..]}` objects
//! whose member objects use the same field names.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate, Diagnosis, Member, Pedigree, Sex};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 11] = [
    "family_id",
    "member_id",
    "mother_id",
    "father_id",
    "sex",
    "current_age",
    "deceased",
    "bc_status",
    "bc_onset_age",
    "oc_status",
    "oc_onset_age",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Json,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> FileFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => FileFormat::Json,
            _ => FileFormat::Csv,
        }
    }
}

/// One member row, shared by both file forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub member_id: usize,
    pub mother_id: Option<usize>,
    pub father_id: Option<usize>,
    pub sex: u8,
    pub current_age: Option<u32>,
    pub deceased: u8,
    pub bc_status: u8,
    pub bc_onset_age: Option<u32>,
    pub oc_status: u8,
    pub oc_onset_age: Option<u32>,
}

impl From<&Member> for MemberRecord {
    fn from(m: &Member) -> Self {
        MemberRecord {
            member_id: m.id,
            mother_id: m.mother,
            father_id: m.father,
            sex: m.sex.code(),
            current_age: m.current_age,
            deceased: m.deceased as u8,
            bc_status: m.breast.affected as u8,
            bc_onset_age: m.breast.onset_age,
            oc_status: m.ovarian.affected as u8,
            oc_onset_age: m.ovarian.onset_age,
        }
    }
}

impl MemberRecord {
    fn into_member(self) -> std::result::Result<Member, String> {
        let flag = |name: &str, v: u8| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(format!("{name} must be 0 or 1, got {v}")),
        };
        Ok(Member {
            id: self.member_id,
            mother: self.mother_id,
            father: self.father_id,
            sex: Sex::from_code(self.sex).ok_or_else(|| format!("sex must be 0 or 1, got {}", self.sex))?,
            current_age: self.current_age,
            deceased: flag("deceased", self.deceased)?,
            breast: Diagnosis {
                affected: flag("bc_status", self.bc_status)?,
                onset_age: self.bc_onset_age,
            },
            ovarian: Diagnosis {
                affected: flag("oc_status", self.oc_status)?,
                onset_age: self.oc_onset_age,
            },
        })
    }
}

#[derive(Serialize, Deserialize)]
struct FamilyRecord {
    family_id: String,
    members: Vec<MemberRecord>,
}

/// Reads families from `path`, then validates each one. Invalid families are
/// reported together in [`Error::InvalidFamilies`].
pub fn read_pedigrees(path: &Path, format: FileFormat) -> Result<Vec<Pedigree>> {
    let file = BufReader::new(File::open(path)?);
    let peds = match format {
        FileFormat::Csv => parse_csv(file)?,
        FileFormat::Json => parse_json(file)?,
    };
    let invalid: Vec<_> = peds
        .iter()
        .filter_map(|p| {
            let v = validate(p);
            (!v.is_empty()).then(|| (p.family_id.clone(), v))
        })
        .collect();
    if invalid.is_empty() {
        Ok(peds)
    } else {
        Err(Error::InvalidFamilies(invalid))
    }
}

pub fn write_pedigrees(path: &Path, format: FileFormat, peds: &[Pedigree]) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    match format {
        FileFormat::Csv => write_csv(out, peds),
        FileFormat::Json => {
            let recs: Vec<FamilyRecord> = peds
                .iter()
                .map(|p| FamilyRecord {
                    family_id: p.family_id.clone(),
                    members: p.members.iter().map(MemberRecord::from).collect(),
                })
                .collect();
            let mut out = out;
            serde_json::to_writer(&mut out, &recs)?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn write_csv<W: Write>(out: W, peds: &[Pedigree]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    let opt32 = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in peds {
        for m in &p.members {
            let r = MemberRecord::from(m);
            w.write_record([
                p.family_id.clone(),
                r.member_id.to_string(),
                opt(r.mother_id),
                opt(r.father_id),
                r.sex.to_string(),
                opt32(r.current_age),
                r.deceased.to_string(),
                r.bc_status.to_string(),
                opt32(r.bc_onset_age),
                r.oc_status.to_string(),
                opt32(r.oc_onset_age),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_int<T: std::str::FromStr>(cell: &str, column: &str, line: u64) -> Result<Option<T>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<T>().map(Some).map_err(|_| Error::Parse {
        line,
        message: format!("column {column}: expected a non-negative integer, got {cell:?}"),
    })
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<Pedigree>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Ok(Vec::new());
    }
    let mut col = [0usize; 11];
    for (k, name) in CSV_HEADER.iter().enumerate() {
        col[k] = headers
            .iter()
            .position(|h| h.trim() == *name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column {name}"),
            })?;
    }
    let mut order: Vec<String> = Vec::new();
    let mut rows: std::collections::HashMap<String, Vec<(u64, MemberRecord)>> = Default::default();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let get = |k: usize| rec.get(col[k]).unwrap_or("");
        let required = |k: usize| -> Result<u8> {
            parse_int::<u8>(get(k), CSV_HEADER[k], line)?.ok_or_else(|| Error::Parse {
                line,
                message: format!("column {} is required", CSV_HEADER[k]),
            })
        };
        let family_id = get(0).trim().to_string();
        if family_id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty family_id".into(),
            });
        }
        let record = MemberRecord {
            member_id: parse_int(get(1), "member_id", line)?.ok_or_else(|| Error::Parse {
                line,
                message: "member_id is required".into(),
            })?,
            mother_id: parse_int(get(2), "mother_id", line)?,
            father_id: parse_int(get(3), "father_id", line)?,
            sex: required(4)?,
            current_age: parse_int(get(5), "current_age", line)?,
            deceased: required(6)?,
            bc_status: required(7)?,
            bc_onset_age: parse_int(get(8), "bc_onset_age", line)?,
            oc_status: required(9)?,
            oc_onset_age: parse_int(get(10), "oc_onset_age", line)?,
        };
        if !rows.contains_key(&family_id) {
            order.push(family_id.clone());
        }
        rows.entry(family_id).or_default().push((line, record));
    }
    order
        .into_iter()
        .map(|fid| {
            let recs = rows.remove(&fid).unwrap();
            assemble(fid, recs)
        })
        .collect()
}

fn parse_json<R: Read>(input: R) -> Result<Vec<Pedigree>> {
    let fams: Vec<FamilyRecord> = serde_json::from_reader(input)?;
    fams.into_iter()
        .enumerate()
        .map(|(k, f)| {
            let recs = f.members.into_iter().map(|m| (k as u64 + 1, m)).collect();
            assemble(f.family_id, recs)
        })
        .collect()
}

/// Orders members by id and checks ids are exactly 0..n.
fn assemble(family_id: String, mut recs: Vec<(u64, MemberRecord)>) -> Result<Pedigree> {
    recs.sort_by_key(|(_, r)| r.member_id);
    let mut members = Vec::with_capacity(recs.len());
    for (k, (line, r)) in recs.into_iter().enumerate() {
        if r.member_id != k {
            let message = if r.member_id < k {
                format!("family {family_id}: duplicate member_id {}", r.member_id)
            } else {
                format!("family {family_id}: member ids must be 0..n, missing {k}")
            };
            return Err(Error::Parse { line, message });
        }
        members.push(r.into_member().map_err(|message| Error::Parse { line, message })?);
    }
    Ok(Pedigree::new(family_id, members))
}
