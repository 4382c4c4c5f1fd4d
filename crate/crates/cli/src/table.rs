//! Numeric CSV tables keyed by case name, with mean and sd summary rows.

use polarshape::io::fmt_opt;

pub struct Table {
    columns: Vec<String>,
    rows: Vec<(String, Vec<Option<f64>>)>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, case: &str, values: Vec<Option<f64>>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push((case.to_string(), values));
    }

    /// Mean and sample sd of the defined values in column `c`.
    pub fn summary(&self, c: usize) -> (Option<f64>, Option<f64>) {
        let xs: Vec<f64> = self.rows.iter().filter_map(|(_, v)| v[c]).collect();
        if xs.is_empty() {
            return (None, None);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        (Some(mean), sd)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Per-case rows, then `mean` and `sd` rows when `aggregate` is set.
    pub fn to_csv(&self, aggregate: bool) -> String {
        let mut out = String::from("case");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        let mut line = |name: &str, values: &mut dyn Iterator<Item = Option<f64>>| {
            out.push_str(name);
            for v in values {
                out.push(',');
                out.push_str(&fmt_opt(v));
            }
            out.push('\n');
        };
        for (name, values) in &self.rows {
            line(name, &mut values.iter().copied());
        }
        if aggregate {
            let stats: Vec<_> = (0..self.columns.len()).map(|c| self.summary(c)).collect();
            line("mean", &mut stats.iter().map(|s| s.0));
            line("sd", &mut stats.iter().map(|s| s.1));
        }
        out
    }
}
