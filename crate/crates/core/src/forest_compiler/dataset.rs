use std::io::Read;
use std::path::Path;

use super::CompileError;

/// Labelled feature rows read from CSV: a header, one column per feature and
/// a final `label` column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn from_reader<R: Read>(rdr: R) -> Result<Self, CompileError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
        let headers = rdr
            .headers()
            .map_err(|e| CompileError::Csv(e.to_string()))?
            .clone();
        if headers.len() < 2 || headers.get(headers.len() - 1) != Some("label") {
            return Err(CompileError::Csv(
                "header must list the features followed by a `label` column".into(),
            ));
        }
        let n = headers.len() - 1;
        let mut out = Dataset {
            feature_names: headers.iter().take(n).map(str::to_string).collect(),
            ..Default::default()
        };
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| CompileError::Csv(format!("line {line}: {e}")))?;
            let field = |j: usize| rec.get(j).unwrap_or("");
            let row = (0..n)
                .map(|j| {
                    field(j).parse::<f64>().map_err(|_| {
                        CompileError::Csv(format!(
                            "line {line}, column `{}`: cannot parse {:?}",
                            out.feature_names[j],
                            field(j)
                        ))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let label = parse_label(field(n))
                .ok_or_else(|| CompileError::Csv(format!("line {line}: bad label {:?}", field(n))))?;
            out.x.push(row);
            out.labels.push(label);
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, CompileError> {
        let file = std::fs::File::open(path).map_err(|e| CompileError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_reader(file).map_err(|e| e.in_file(path))
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Errors unless rows have `n_features` columns and labels are below
    /// `n_classes`.
    pub fn check_schema(&self, n_features: usize, n_classes: usize) -> Result<(), CompileError> {
        if self.n_features() != n_features {
            return Err(CompileError::Schema(format!(
                "dataset has {} feature columns, the forest expects {n_features}",
                self.n_features()
            )));
        }
        if let Some(k) = self.labels.iter().position(|&l| l >= n_classes) {
            return Err(CompileError::Schema(format!(
                "row {k}: label {} outside the forest's {n_classes} classes",
                self.labels[k]
            )));
        }
        Ok(())
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), CompileError> {
        let mut wtr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| CompileError::Csv(e.to_string());
        let mut header = self.feature_names.clone();
        header.push("label".into());
        wtr.write_record(&header).map_err(csv_err)?;
        for (row, label) in self.x.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(label.to_string());
            wtr.write_record(&rec).map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| CompileError::Csv(e.to_string()))
    }
}

fn parse_label(s: &str) -> Option<usize> {
    if let Ok(v) = s.parse::<usize>() {
        return Some(v);
    }
    let v: f64 = s.parse().ok()?;
    (v >= 0.0 && v.fract() == 0.0 && v < usize::MAX as f64).then_some(v as usize)
}
