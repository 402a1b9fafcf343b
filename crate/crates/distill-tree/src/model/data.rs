use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column typing for one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    Continuous { min: f64, max: f64 },
    /// Ordered level list; categorical values are stored as level indices.
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Typed description of the covariate space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSchema {
    columns: Vec<Column>,
}

impl CovariateSchema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.clone()) {
                return Err(Error::SchemaParse(format!("duplicate column name {:?}", c.name)));
            }
            match &c.kind {
                ColumnKind::Continuous { min, max } => {
                    if !(min <= max) {
                        return Err(Error::SchemaParse(format!(
                            "column {:?}: min {} > max {}",
                            c.name, min, max
                        )));
                    }
                }
                ColumnKind::Categorical { levels } => {
                    if levels.len() < 2 {
                        return Err(Error::SchemaParse(format!(
                            "column {:?}: categorical needs >= 2 levels",
                            c.name
                        )));
                    }
                }
            }
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, i: usize) -> &Column {
        &self.columns[i]
    }

    /// Width of a continuous column's declared range; 0 for categorical.
    pub fn range_width(&self, i: usize) -> f64 {
        match &self.columns[i].kind {
            ColumnKind::Continuous { min, max } => max - min,
            ColumnKind::Categorical { .. } => 0.0,
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.columns.len() {
            return Err(Error::SchemaViolation(format!(
                "point has {} coordinates, schema has {}",
                x.len(),
                self.columns.len()
            )));
        }
        for (i, c) in self.columns.iter().enumerate() {
            match &c.kind {
                ColumnKind::Continuous { .. } => {
                    if !x[i].is_finite() {
                        return Err(Error::SchemaViolation(format!(
                            "column {:?}: non-finite value",
                            c.name
                        )));
                    }
                }
                ColumnKind::Categorical { levels } => {
                    let idx = x[i];
                    if idx.fract() != 0.0 || idx < 0.0 || idx as usize >= levels.len() {
                        return Err(Error::SchemaViolation(format!(
                            "column {:?}: {} is not a level index",
                            c.name, idx
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Tabular training data. Categorical covariates and labels are stored as
/// level / class indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    schema: CovariateSchema,
    rows: Vec<Vec<f64>>,
    labels: Option<Vec<usize>>,
    k: usize,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        schema: CovariateSchema,
        rows: Vec<Vec<f64>>,
        labels: Option<Vec<usize>>,
        k: usize,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig(format!("class count k = {k} must be >= 2")));
        }
        for r in &rows {
            schema.check_point(r)?;
        }
        if let Some(ls) = &labels {
            if ls.len() != rows.len() {
                return Err(Error::InvalidConfig("label count != row count".into()));
            }
            if let Some(&bad) = ls.iter().find(|&&l| l >= k) {
                return Err(Error::InvalidConfig(format!("label {bad} out of range for k = {k}")));
            }
        }
        Ok(Self { schema, rows, labels, k, class_names })
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Indices of rows lying inside `region`.
    pub fn rows_in_region(&self, region: &super::Region) -> Vec<usize> {
        (0..self.rows.len()).filter(|&i| region.contains(&self.rows[i])).collect()
    }

    /// Load a dataset from a header CSV plus a sidecar schema file.
    ///
    /// The sidecar is line-oriented `key = value` text:
    ///
    /// ```text
    /// label = outcome
    /// column.age = continuous
    /// column.score = continuous(0, 10)
    /// column.color = categorical(red, green, blue)
    /// ```
    ///
    /// Columns absent from the sidecar are treated as continuous with the
    /// observed range. Categorical levels without a declared list are ordered
    /// by first appearance in the file, as are label classes.
    pub fn from_csv<P: AsRef<Path>, Q: AsRef<Path>>(csv_path: P, schema_path: Q) -> Result<Self> {
        let sidecar = SidecarSchema::parse(&std::fs::read_to_string(schema_path)?)?;
        let mut reader = csv::Reader::from_path(csv_path)?;
        let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();

        let label_idx = match &sidecar.label {
            Some(name) => Some(
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::SchemaParse(format!("label column {name:?} not in CSV")))?,
            ),
            None => None,
        };

        let cov_idx: Vec<usize> = (0..headers.len()).filter(|i| Some(*i) != label_idx).collect();
        let mut builders: Vec<ColumnBuilder> = cov_idx
            .iter()
            .map(|&i| ColumnBuilder::new(headers[i].clone(), sidecar.decl(&headers[i])))
            .collect();
        let mut label_builder = LevelIndex::default();

        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for record in reader.records() {
            let record = record?;
            let mut row = Vec::with_capacity(cov_idx.len());
            for (b, &i) in builders.iter_mut().zip(&cov_idx) {
                row.push(b.ingest(record.get(i).unwrap_or(""))?);
            }
            rows.push(row);
            if let Some(li) = label_idx {
                labels.push(label_builder.index_of(record.get(li).unwrap_or("")));
            }
        }

        let columns: Vec<Column> =
            builders.into_iter().map(ColumnBuilder::finish).collect::<Result<_>>()?;
        let schema = CovariateSchema::new(columns)?;
        let (labels, k, class_names) = if label_idx.is_some() {
            let k = label_builder.levels.len().max(2);
            (Some(labels), k, label_builder.levels)
        } else {
            (None, 2, vec![])
        };
        Self::new(schema, rows, labels, k, class_names)
    }
}

#[derive(Debug, Default)]
struct SidecarSchema {
    label: Option<String>,
    declarations: Vec<(String, ColumnDecl)>,
}

#[derive(Debug, Clone)]
enum ColumnDecl {
    Continuous(Option<(f64, f64)>),
    Categorical(Option<Vec<String>>),
}

impl SidecarSchema {
    fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::SchemaParse(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "label" {
                out.label = Some(value.to_owned());
            } else if let Some(col) = key.strip_prefix("column.") {
                out.declarations.push((col.to_owned(), Self::parse_decl(value, lineno)?));
            } else {
                return Err(Error::SchemaParse(format!("line {}: unknown key {:?}", lineno + 1, key)));
            }
        }
        Ok(out)
    }

    fn parse_decl(value: &str, lineno: usize) -> Result<ColumnDecl> {
        let (head, args) = match value.split_once('(') {
            Some((h, rest)) => {
                let args = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::SchemaParse(format!("line {}: missing ')'", lineno + 1)))?;
                (h.trim(), Some(args.split(',').map(|s| s.trim().to_owned()).collect::<Vec<_>>()))
            }
            None => (value, None),
        };
        match head {
            "continuous" => match args {
                None => Ok(ColumnDecl::Continuous(None)),
                Some(a) if a.len() == 2 => {
                    let lo: f64 = a[0].parse().map_err(|_| {
                        Error::SchemaParse(format!("line {}: bad bound {:?}", lineno + 1, a[0]))
                    })?;
                    let hi: f64 = a[1].parse().map_err(|_| {
                        Error::SchemaParse(format!("line {}: bad bound {:?}", lineno + 1, a[1]))
                    })?;
                    Ok(ColumnDecl::Continuous(Some((lo, hi))))
                }
                Some(_) => Err(Error::SchemaParse(format!(
                    "line {}: continuous takes (min, max)",
                    lineno + 1
                ))),
            },
            "categorical" => Ok(ColumnDecl::Categorical(args)),
            other => Err(Error::SchemaParse(format!("line {}: unknown kind {:?}", lineno + 1, other))),
        }
    }

    fn decl(&self, name: &str) -> ColumnDecl {
        self.declarations
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.clone())
            .unwrap_or(ColumnDecl::Continuous(None))
    }
}

#[derive(Debug, Default)]
struct LevelIndex {
    levels: Vec<String>,
}

impl LevelIndex {
    fn index_of(&mut self, value: &str) -> usize {
        match self.levels.iter().position(|l| l == value) {
            Some(i) => i,
            None => {
                self.levels.push(value.to_owned());
                self.levels.len() - 1
            }
        }
    }
}

struct ColumnBuilder {
    name: String,
    decl: ColumnDecl,
    seen_min: f64,
    seen_max: f64,
    levels: LevelIndex,
}

impl ColumnBuilder {
    fn new(name: String, decl: ColumnDecl) -> Self {
        Self { name, decl, seen_min: f64::INFINITY, seen_max: f64::NEG_INFINITY, levels: LevelIndex::default() }
    }

    fn ingest(&mut self, raw: &str) -> Result<f64> {
        match &self.decl {
            ColumnDecl::Continuous(_) => {
                let v: f64 = raw.trim().parse().map_err(|_| {
                    Error::SchemaParse(format!("column {:?}: non-numeric value {:?}", self.name, raw))
                })?;
                self.seen_min = self.seen_min.min(v);
                self.seen_max = self.seen_max.max(v);
                Ok(v)
            }
            ColumnDecl::Categorical(Some(levels)) => levels
                .iter()
                .position(|l| l == raw.trim())
                .map(|i| i as f64)
                .ok_or_else(|| {
                    Error::SchemaParse(format!("column {:?}: undeclared level {:?}", self.name, raw))
                }),
            ColumnDecl::Categorical(None) => Ok(self.levels.index_of(raw.trim()) as f64),
        }
    }

    fn finish(self) -> Result<Column> {
        let kind = match self.decl {
            ColumnDecl::Continuous(Some((min, max))) => ColumnKind::Continuous { min, max },
            ColumnDecl::Continuous(None) => ColumnKind::Continuous {
                min: if self.seen_min.is_finite() { self.seen_min } else { 0.0 },
                max: if self.seen_max.is_finite() { self.seen_max } else { 0.0 },
            },
            ColumnDecl::Categorical(Some(levels)) => ColumnKind::Categorical { levels },
            ColumnDecl::Categorical(None) => ColumnKind::Categorical { levels: self.levels.levels },
        };
        Ok(Column { name: self.name, kind })
    }
}
