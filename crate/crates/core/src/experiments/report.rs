//! Tabular experiment output with provenance on every column.

use serde::Serialize;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// Where a column's numbers come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Experiment inputs and indices.
    Config,
    Measured,
    /// Closed form or asymptotic prediction.
    Predicted,
    /// Least-squares or other fit to measured values.
    Fitted,
}

#[derive(Clone, Debug, Serialize)]
pub struct Column {
    pub name: String,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[(&str, Provenance)]) -> Self {
        Table {
            columns: columns.iter().map(|(n, p)| Column { name: n.to_string(), provenance: *p }).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// CSV header names, which are the column names.
    pub fn headers(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }
}

/// A single summary number.
#[derive(Clone, Debug, Serialize)]
pub struct Figure {
    pub name: String,
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub tables: Vec<(String, Table)>,
    pub summary: Vec<Figure>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(experiment: &str, seed: u64, config: serde_json::Value) -> Self {
        Report {
            experiment: experiment.to_string(),
            version: VERSION.to_string(),
            seed,
            config,
            tables: Vec::new(),
            summary: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn figure(&mut self, name: &str, value: f64, provenance: Provenance) {
        self.summary.push(Figure { name: name.to_string(), value, provenance });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.summary.iter().find(|f| f.name == name).map(|f| f.value)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_lookup() {
        let mut t = Table::new(&[("k", Provenance::Config), ("norm", Provenance::Measured)]);
        t.push(vec![1.0, 2.5]);
        t.push(vec![2.0, 3.5]);
        assert_eq!(t.column("norm").unwrap(), vec![2.5, 3.5]);
        assert!(t.column("nope").is_none());
        assert!(VERSION.starts_with('v'));
    }
}
