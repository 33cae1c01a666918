//! Metric tables in text, CSV, and JSON.

use serde::Serialize;
use specenc::RegressionMetrics;

pub const CSV_HEADER: &str = "model,params,mae,rmse,pearson_r,r2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

/// Mean and sample standard deviation over the replicates where a metric is
/// defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        let n = v.len();
        if n == 0 {
            return Stat { mean: None, std: None, n };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Stat { mean: Some(mean), std, n }
    }

    fn cell(&self, digits: usize) -> String {
        match (self.mean, self.std) {
            (None, _) => "nan".into(),
            (Some(m), None) => format!("{m:.digits$}"),
            (Some(m), Some(s)) => format!("{m:.digits$}±{s:.digits$}"),
        }
    }
}

/// One table row: a model and its metrics over one or more runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub model: String,
    pub params: usize,
    pub mae: Stat,
    pub rmse: Stat,
    pub pearson_r: Stat,
    pub r2: Stat,
}

impl Row {
    pub fn from_runs(model: &str, params: usize, runs: &[RegressionMetrics]) -> Self {
        Row {
            model: model.to_string(),
            params,
            mae: Stat::of(runs.iter().map(|m| Some(m.mae))),
            rmse: Stat::of(runs.iter().map(|m| Some(m.rmse))),
            pearson_r: Stat::of(runs.iter().map(|m| m.pearson_r)),
            r2: Stat::of(runs.iter().map(|m| m.r2)),
        }
    }

    fn cells(&self, digits: usize) -> [String; 6] {
        [
            self.model.clone(),
            self.params.to_string(),
            self.mae.cell(digits),
            self.rmse.cell(digits),
            self.pearson_r.cell(digits),
            self.r2.cell(digits),
        ]
    }

    pub fn csv_line(&self) -> String {
        self.cells(6).join(",")
    }
}

pub fn csv_table(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

pub fn text_table(rows: &[Row]) -> String {
    let header = CSV_HEADER.split(',').map(str::to_string).collect::<Vec<_>>();
    let body: Vec<[String; 6]> = rows.iter().map(|r| r.cells(4)).collect();
    let width = |i: usize| {
        body.iter().map(|c| c[i].chars().count()).chain([header[i].len()]).max().unwrap_or(0)
    };
    let widths: Vec<usize> = (0..6).map(width).collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(&header);
    out.push('\n');
    for cells in &body {
        out.push_str(&line(cells));
        out.push('\n');
    }
    out
}

pub fn render(rows: &[Row], format: Format) -> String {
    match format {
        Format::Text => text_table(rows),
        Format::Csv => csv_table(rows),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(rows).expect("rows serialize");
            s.push('\n');
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(mae: f64, r2: Option<f64>) -> RegressionMetrics {
        RegressionMetrics { mae, rmse: mae * 2.0, pearson_r: Some(0.5), r2, n: 10 }
    }

    #[test]
    fn sample_std_over_seeds() {
        let s = Stat::of([Some(1.0), Some(2.0), Some(3.0)]);
        assert_eq!(s.mean, Some(2.0));
        assert_eq!(s.std, Some(1.0));
        assert_eq!(Stat::of([Some(4.0)]).std, None);
        assert_eq!(Stat::of([None, None]).mean, None);
    }

    #[test]
    fn csv_row_layout() {
        let row = Row::from_runs("gat", 1981, &[m(0.1, Some(0.5)), m(0.3, None)]);
        let line = row.csv_line();
        assert_eq!(line.split(',').count(), 6);
        assert!(line.starts_with("gat,1981,0.200000±0.141421,"), "{line}");
        assert!(line.ends_with(",0.500000"), "{line}");
        assert!(csv_table(&[row]).starts_with("model,params,mae,rmse,pearson_r,r2\n"));
    }

    #[test]
    fn text_table_aligns_columns() {
        let rows = [Row::from_runs("mlp", 9, &[m(0.1, Some(0.2))]), Row::from_runs("set_transformer", 12345, &[m(0.2, None)])];
        let t = text_table(&rows);
        let lens: Vec<usize> = t.lines().map(|l| l.chars().count()).collect();
        assert!(lens.windows(2).all(|w| w[0] == w[1]), "{t}");
    }
}
