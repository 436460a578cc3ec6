use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub model: String,
    pub p: usize,
    pub n: usize,
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub reps: usize,
    pub seed: u64,
}

impl ResultRow {
    fn key_cmp(&self, other: &Self) -> Ordering {
        (
            &self.experiment_id,
            &self.model,
            self.p,
            self.n,
            &self.method,
            &self.metric,
        )
            .cmp(&(
                &other.experiment_id,
                &other.model,
                other.p,
                other.n,
                &other.method,
                &other.metric,
            ))
    }
}

/// Long-format results, one value per row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

pub const CSV_HEADER: [&str; 9] = [
    "experiment_id",
    "model",
    "p",
    "n",
    "method",
    "metric",
    "value",
    "reps",
    "seed",
];

impl ResultTable {
    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    /// Sort rows by their key columns.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| a.key_cmp(b));
    }

    /// First row matching all the given key fields.
    pub fn find(&self, model: &str, p: usize, method: &str, metric: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.p == p && r.method == method && r.metric == metric)
    }

    pub fn value(&self, model: &str, p: usize, method: &str, metric: &str) -> Option<f64> {
        self.find(model, p, method, metric).map(|r| r.value)
    }

    /// Sorted CSV with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut sorted = self.clone();
        sorted.sort();
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &sorted.rows {
            if !r.value.is_finite() {
                return Err(Error::Degenerate(format!(
                    "non-finite value for {} {} {}",
                    r.experiment_id, r.method, r.metric
                )));
            }
            w.write_record([
                r.experiment_id.clone(),
                r.model.clone(),
                r.p.to_string(),
                r.n.to_string(),
                r.method.clone(),
                r.metric.clone(),
                format!("{:.16e}", r.value),
                r.reps.to_string(),
                r.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for rec in rdr.deserialize() {
            rows.push(rec?);
        }
        Ok(Self { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, metric: &str, value: f64) -> ResultRow {
        ResultRow {
            experiment_id: id.into(),
            model: "M1, quoted".into(),
            p: 10,
            n: 20,
            method: "gaussian".into(),
            metric: metric.into(),
            value,
            reps: 100,
            seed: 7,
        }
    }

    #[test]
    fn csv_round_trip_and_order() {
        let mut t = ResultTable::default();
        t.push(row("size:b", "rate", 0.1));
        t.push(row("size:a", "rate", 1.0 / 3.0));
        let s = t.to_csv_string().unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "experiment_id,model,p,n,method,metric,value,reps,seed");
        assert_eq!(
            lines[1],
            "size:a,\"M1, quoted\",10,20,gaussian,rate,3.3333333333333331e-1,100,7"
        );
        assert!(!s.contains('\r'));
        let back = ResultTable::read_csv(s.as_bytes()).unwrap();
        assert_eq!(back.rows[0].value, 1.0 / 3.0);
        assert_eq!(back.rows[1].experiment_id, "size:b");
    }

    #[test]
    fn non_finite_rejected() {
        let mut t = ResultTable::default();
        t.push(row("x", "rate", f64::NAN));
        assert!(t.to_csv_string().is_err());
    }
}
