use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// How an auxiliary column is located in a CSV header.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ColumnRule {
    #[default]
    Absent,
    /// Used when present, ignored otherwise.
    Optional(String),
    /// Must be present.
    Required(String),
}

impl ColumnRule {
    fn name(&self) -> Option<&str> {
        match self {
            ColumnRule::Absent => None,
            ColumnRule::Optional(n) | ColumnRule::Required(n) => Some(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub time_column: ColumnRule,
    pub label_column: ColumnRule,
    pub trajectory_column: ColumnRule,
    /// Sensor columns in output order; `None` takes every remaining column.
    pub sensor_columns: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            time_column: ColumnRule::Optional("timestamp".into()),
            label_column: ColumnRule::Optional("label".into()),
            trajectory_column: ColumnRule::Absent,
            sensor_columns: None,
        }
    }
}

/// Column-major table of raw sensor readings. Missing cells are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub sensor_names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
    pub trajectories: Option<Vec<String>>,
    pub timestamps: Option<Vec<String>>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or_else(
            || self.labels.as_ref().map_or(0, Vec::len),
            Vec::len,
        )
    }

    pub fn n_sensors(&self) -> usize {
        self.columns.len()
    }

    pub fn missing_count(&self) -> usize {
        self.columns
            .iter()
            .flatten()
            .filter(|v| v.is_nan())
            .count()
    }

    /// Half-open row ranges of consecutive rows sharing a trajectory id.
    pub fn segment_runs(&self) -> Vec<std::ops::Range<usize>> {
        let n = self.n_rows();
        let Some(traj) = &self.trajectories else {
            return if n == 0 { vec![] } else { vec![0..n] };
        };
        let mut runs = Vec::new();
        let mut start = 0;
        for t in 1..=n {
            if t == n || traj[t] != traj[start] {
                runs.push(start..t);
                start = t;
            }
        }
        runs
    }

    /// Stacks `other` below `self`, prefixing trajectory ids so the two
    /// parts never share a segment.
    pub fn concat_split(mut self, other: RawTable, self_tag: &str, other_tag: &str) -> Result<Self> {
        if self.sensor_names != other.sensor_names {
            return Err(Error::invalid(format!(
                "split sensor columns differ: {:?} vs {:?}",
                self.sensor_names, other.sensor_names
            )));
        }
        if self.labels.is_some() != other.labels.is_some() {
            log::warn!("labels present in only one split; treating missing labels as 0");
        }
        let (n_a, n_b) = (self.n_rows(), other.n_rows());
        let tag = |t: &Option<Vec<String>>, tag: &str, n: usize| -> Vec<String> {
            match t {
                Some(v) => v.iter().map(|s| format!("{tag}:{s}")).collect(),
                None => vec![tag.to_string(); n],
            }
        };
        let mut traj = tag(&self.trajectories, self_tag, n_a);
        traj.extend(tag(&other.trajectories, other_tag, n_b));
        for (a, b) in self.columns.iter_mut().zip(other.columns) {
            a.extend(b);
        }
        self.labels = match (self.labels.take(), other.labels) {
            (None, None) => None,
            (a, b) => {
                let mut l = a.unwrap_or_else(|| vec![0; n_a]);
                l.extend(b.unwrap_or_else(|| vec![0; n_b]));
                Some(l)
            }
        };
        self.timestamps = match (self.timestamps.take(), other.timestamps) {
            (Some(mut a), Some(b)) => {
                a.extend(b);
                Some(a)
            }
            _ => None,
        };
        self.trajectories = Some(traj);
        Ok(self)
    }
}

impl RawTable {
    /// Writes `timestamp`, the sensors, and `label` when present. `NaN`
    /// cells are written empty.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.sensor_names.iter().cloned());
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for r in 0..self.n_rows() {
            let mut row = vec![self
                .timestamps
                .as_ref()
                .map_or_else(|| r.to_string(), |t| t[r].clone())];
            row.extend(self.columns.iter().map(|c| {
                if c[r].is_nan() {
                    String::new()
                } else {
                    c[r].to_string()
                }
            }));
            if let Some(l) = &self.labels {
                row.push(l[r].to_string());
            }
            w.write_record(&row).map_err(|e| csv_err(path, e))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a comma-separated file with a header row.
///
/// Blank sensor cells become `NaN`; any other non-numeric sensor cell is a
/// parse error reporting the 1-based line number.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<RawTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let index: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();

    let locate = |rule: &ColumnRule| -> Result<Option<usize>> {
        match rule {
            ColumnRule::Absent => Ok(None),
            ColumnRule::Optional(name) => Ok(index.get(name.as_str()).copied()),
            ColumnRule::Required(name) => index
                .get(name.as_str())
                .copied()
                .map(Some)
                .ok_or_else(|| Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.clone(),
                }),
        }
    };
    let time_idx = locate(&schema.time_column)?;
    let label_idx = locate(&schema.label_column)?;
    let traj_idx = locate(&schema.trajectory_column)?;

    let sensor_idx: Vec<usize> = match &schema.sensor_columns {
        Some(names) => names
            .iter()
            .map(|n| {
                index.get(n.as_str()).copied().ok_or_else(|| Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: n.clone(),
                })
            })
            .collect::<Result<_>>()?,
        None => {
            let aux: Vec<&str> = [
                &schema.time_column,
                &schema.label_column,
                &schema.trajectory_column,
            ]
            .iter()
            .filter_map(|r| r.name())
            .collect();
            (0..headers.len())
                .filter(|&i| !aux.contains(&headers[i].as_str()))
                .collect()
        }
    };

    let mut table = RawTable {
        sensor_names: sensor_idx.iter().map(|&i| headers[i].clone()).collect(),
        columns: vec![Vec::new(); sensor_idx.len()],
        labels: label_idx.map(|_| Vec::new()),
        trajectories: traj_idx.map(|_| Vec::new()),
        timestamps: time_idx.map(|_| Vec::new()),
    };

    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cell = |i: usize| record.get(i).unwrap_or("");
        for (col, &i) in table.columns.iter_mut().zip(&sensor_idx) {
            let raw = cell(i);
            let v = if raw.is_empty() || raw.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                raw.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    msg: format!("non-numeric value `{raw}` in column `{}`", headers[i]),
                })?
            };
            col.push(v);
        }
        if let (Some(labels), Some(i)) = (table.labels.as_mut(), label_idx) {
            let raw = cell(i);
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                msg: format!("invalid label `{raw}`"),
            })?;
            labels.push(u8::from(v != 0.0));
        }
        if let (Some(traj), Some(i)) = (table.trajectories.as_mut(), traj_idx) {
            traj.push(cell(i).to_string());
        }
        if let (Some(ts), Some(i)) = (table.timestamps.as_mut(), time_idx) {
            ts.push(cell(i).to_string());
        }
    }
    Ok(table)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        kind => Error::Parse {
            path: path.to_path_buf(),
            row,
            msg: format!("{kind:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn blank_cell_is_missing() {
        let f = write("timestamp,a,b,label\n0,1.0,2.0,0\n1,,3.0,0\n2,4.0,5.0,1\n");
        let t = load_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(t.sensor_names, vec!["a", "b"]);
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.missing_count(), 1);
        assert_eq!(t.labels, Some(vec![0, 0, 1]));
        assert_eq!(t.timestamps.as_ref().unwrap()[2], "2");
    }

    #[test]
    fn header_only_file() {
        let f = write("a,b,c\n");
        let t = load_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(t.n_rows(), 0);
        assert_eq!(t.n_sensors(), 3);
    }

    #[test]
    fn non_numeric_reports_line() {
        let f = write("a,b\n1,2\n3,oops\n");
        let err = load_csv(f.path(), &CsvSchema::default()).unwrap_err();
        match err {
            Error::Parse { row, msg, .. } => {
                assert_eq!(row, 3);
                assert!(msg.contains("oops"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_declared_column() {
        let f = write("a,b\n1,2\n");
        let schema = CsvSchema {
            label_column: ColumnRule::Required("label".into()),
            ..CsvSchema::default()
        };
        assert!(matches!(
            load_csv(f.path(), &schema),
            Err(Error::MissingColumn { ref column, .. }) if column == "label"
        ));
    }

    #[test]
    fn unreadable_file() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &CsvSchema::default()),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn wide_wadi_shaped_header() {
        let names: Vec<String> = (0..127).map(|i| format!("s{i}")).collect();
        let mut body = format!("timestamp,{},label\n", names.join(","));
        for r in 0..3 {
            let row: Vec<String> = (0..127).map(|i| format!("{}", r * i)).collect();
            body.push_str(&format!("{r},{},0\n", row.join(",")));
        }
        let f = write(&body);
        let t = load_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(t.n_sensors(), 127);
        assert_eq!(t.n_rows(), 3);
    }

    #[test]
    fn explicit_sensor_order() {
        let f = write("x,y,z\n1,2,3\n");
        let schema = CsvSchema {
            sensor_columns: Some(vec!["z".into(), "x".into()]),
            ..CsvSchema::default()
        };
        let t = load_csv(f.path(), &schema).unwrap();
        assert_eq!(t.sensor_names, vec!["z", "x"]);
        assert_eq!(t.columns, vec![vec![3.0], vec![1.0]]);
    }

    #[test]
    fn trajectory_runs() {
        let f = write("unit,a\n1,0\n1,1\n2,2\n2,3\n2,4\n");
        let schema = CsvSchema {
            trajectory_column: ColumnRule::Required("unit".into()),
            ..CsvSchema::default()
        };
        let t = load_csv(f.path(), &schema).unwrap();
        assert_eq!(t.segment_runs(), vec![0..2, 2..5]);
    }
}
