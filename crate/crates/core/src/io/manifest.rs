//! Dataset manifests.
//!
//! CSV, UTF-8, mandatory header:
//!
//! ```text
//! ref_path,dist_path,label,domain,dtype,level,l_max
//! ```
//!
//! `label`, `dtype`, `level` and `l_max` may be empty. Lines starting with
//! `#` before the header carry provenance as `# key=value`. Relative paths
//! are resolved against the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::display::Domain;
use crate::{Error, Result};

pub const COLUMNS: [&str; 7] = [
    "ref_path", "dist_path", "label", "domain", "dtype", "level", "l_max",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub ref_path: String,
    pub dist_path: String,
    /// Higher is better; `None` for unlabeled records.
    pub label: Option<f64>,
    pub domain: Domain,
    pub dtype: Option<String>,
    pub level: Option<u32>,
    /// Peak luminance of the display the record was simulated on.
    pub l_max: Option<f64>,
}

impl DatasetRecord {
    pub fn is_labeled(&self) -> bool {
        self.label.is_some()
    }
}

#[derive(Debug, Clone, Default)]
pub struct DatasetManifest {
    pub records: Vec<DatasetRecord>,
    pub provenance: BTreeMap<String, String>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl PartialEq for DatasetManifest {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records && self.provenance == other.provenance
    }
}

impl DatasetManifest {
    pub fn new(records: Vec<DatasetRecord>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let manifest = DatasetManifest {
            records,
            provenance: BTreeMap::new(),
            base_dir: base_dir.into(),
        };
        manifest.check_unique()?;
        Ok(manifest)
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert((r.ref_path.as_str(), r.dist_path.as_str())) {
                return Err(Error::Data(format!(
                    "duplicate record ({}, {})",
                    r.ref_path, r.dist_path
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// A manifest holding `records` with the same base directory and provenance.
    pub fn with_records(&self, records: Vec<DatasetRecord>) -> Self {
        DatasetManifest {
            records,
            provenance: self.provenance.clone(),
            base_dir: self.base_dir.clone(),
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = String::new();
        for (k, v) in &self.provenance {
            if k.contains(['=', '\n', '\r']) || v.contains(['\n', '\r']) {
                return Err(Error::Data(format!("provenance entry {k:?} is not single-line")));
            }
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let csv_err = |e: csv::Error| Error::Data(e.to_string());
        w.write_record(COLUMNS).map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                r.ref_path.clone(),
                r.dist_path.clone(),
                fmt(r.label),
                match r.domain {
                    Domain::Sdr => "SDR".into(),
                    Domain::Hdr => "HDR".into(),
                },
                r.dtype.clone().unwrap_or_default(),
                r.level.map(|l| l.to_string()).unwrap_or_default(),
                fmt(r.l_max),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        out.push_str(std::str::from_utf8(&bytes).expect("csv output is UTF-8"));
        Ok(out)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut provenance = BTreeMap::new();
        let mut body_start = 0;
        let mut comment_lines = 0u64;
        for line in text.split_inclusive('\n') {
            let trimmed = line.trim_end_matches(['\n', '\r']);
            let Some(rest) = trimmed.strip_prefix('#') else {
                break;
            };
            comment_lines += 1;
            body_start += line.len();
            if let Some((k, v)) = rest.trim_start().split_once('=') {
                provenance.insert(k.trim().to_string(), v.to_string());
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(&text.as_bytes()[body_start..]);
        let line_of = |pos: Option<&csv::Position>| {
            format!("line {}", pos.map_or(0, |p| p.line()) + comment_lines)
        };
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path, line_of(e.position()), e.to_string()))?
            .clone();
        if headers.is_empty() || headers.iter().all(str::is_empty) {
            return Err(Error::parse(path, line_of(None), "missing header row"));
        }
        let mut index = [0usize; 7];
        for (slot, name) in index.iter_mut().zip(COLUMNS) {
            *slot = headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::parse(path, format!("line {}", comment_lines + 1), format!("missing column {name}")))?;
        }

        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for row in reader.records() {
            let row = row.map_err(|e| Error::parse(path, line_of(e.position()), e.to_string()))?;
            let at = line_of(row.position());
            // Paths and dtype are kept verbatim; numbers and the domain tolerate padding.
            let raw = |i: usize| row.get(index[i]).unwrap_or("");
            let cell = |i: usize| raw(i).trim();
            let number = |i: usize| -> Result<Option<f64>> {
                let s = cell(i);
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Some)
                    .ok_or_else(|| Error::parse(path, at.clone(), format!("bad {} value {s:?}", COLUMNS[i])))
            };
            let ref_path = raw(0).to_string();
            let dist_path = raw(1).to_string();
            if cell(0).is_empty() || cell(1).is_empty() {
                return Err(Error::parse(path, at, "empty image path"));
            }
            let domain: Domain = cell(3)
                .parse()
                .map_err(|_| Error::parse(path, at.clone(), format!("bad domain {:?}", cell(3))))?;
            let level = match cell(5) {
                "" => None,
                s => Some(s.parse::<u32>().map_err(|_| {
                    Error::parse(path, at.clone(), format!("bad level value {s:?}"))
                })?),
            };
            let record = DatasetRecord {
                label: number(2)?,
                domain,
                dtype: Some(raw(4).to_string()).filter(|s| !s.is_empty()),
                level,
                l_max: number(6)?,
                ref_path,
                dist_path,
            };
            if !seen.insert((record.ref_path.clone(), record.dist_path.clone())) {
                return Err(Error::parse(
                    path,
                    at,
                    format!("duplicate record ({}, {})", record.ref_path, record.dist_path),
                ));
            }
            records.push(record);
        }
        Ok(DatasetManifest {
            records,
            provenance,
            base_dir,
        })
    }
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DatasetManifest::parse(&text, path)
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    manifest.check_unique()?;
    fs::write(path, manifest.to_csv_string()?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: usize, label: Option<f64>) -> DatasetRecord {
        DatasetRecord {
            ref_path: format!("ref_{i}.png"),
            dist_path: format!("dist_{i}.png"),
            label,
            domain: if i.is_multiple_of(2) { Domain::Sdr } else { Domain::Hdr },
            dtype: Some("gauss-noise".into()),
            level: Some(3),
            l_max: Some(101.25),
        }
    }

    #[test]
    fn round_trip_with_empty_labels() {
        let mut m = DatasetManifest::new(vec![record(0, Some(-2.0)), record(1, None)], "").unwrap();
        m.provenance.insert("seed".into(), "7".into());
        let text = m.to_csv_string().unwrap();
        assert!(text.starts_with("# seed=7\nref_path,dist_path,label,domain,dtype,level,l_max\n"));
        let back = DatasetManifest::parse(&text, Path::new("data/m.csv")).unwrap();
        assert_eq!(back, m);
        assert!(!back.records[1].is_labeled());
        assert_eq!(back.resolve("ref_0.png"), PathBuf::from("data/ref_0.png"));
    }

    #[test]
    fn duplicate_pairs_rejected() {
        let text = "ref_path,dist_path,label,domain,dtype,level,l_max\na,b,1,SDR,,,\na,b,2,SDR,,,\n";
        let err = DatasetManifest::parse(text, Path::new("m.csv")).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(DatasetManifest::new(vec![record(0, None), record(0, None)], "").is_err());
    }

    #[test]
    fn missing_column_and_bad_numbers() {
        let text = "ref_path,dist_path,label,domain,dtype,level\na,b,1,SDR,,\n";
        let err = DatasetManifest::parse(text, Path::new("m.csv")).unwrap_err();
        assert!(err.to_string().contains("missing column l_max"), "{err}");

        let text = "# a=b\nref_path,dist_path,label,domain,dtype,level,l_max\na,b,1,SDR,,,\nc,d,oops,SDR,,,\n";
        let err = DatasetManifest::parse(text, Path::new("m.csv")).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");

        let text = "ref_path,dist_path,label,domain,dtype,level,l_max\na,b,1,UHD,,,\n";
        assert!(DatasetManifest::parse(text, Path::new("m.csv")).is_err());
    }

    #[test]
    fn column_order_is_free() {
        let text = "domain,ref_path,dist_path,l_max,label,dtype,level\nHDR,r,d,5000,-1,blur,1\n";
        let m = DatasetManifest::parse(text, Path::new("m.csv")).unwrap();
        assert_eq!(m.records[0].domain, Domain::Hdr);
        assert_eq!(m.records[0].l_max, Some(5000.0));
        assert_eq!(m.records[0].level, Some(1));
    }
}
