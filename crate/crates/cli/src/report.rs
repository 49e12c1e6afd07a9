//! Grouped min/max/avg summaries of result CSVs, with an optional SVG plot.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Result CSVs sharing one header.
    pub inputs: Vec<PathBuf>,
    /// Columns whose values form the groups; defaults to `method` when present.
    #[arg(long = "group-by", value_delimiter = ',')]
    pub group_by: Vec<String>,
    /// Write an SVG of one column's group averages.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Column to plot; defaults to the first numeric column.
    #[arg(long = "plot-column")]
    pub plot_column: Option<String>,
}

/// Rows of all inputs under their common header.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_tables(inputs: &[PathBuf]) -> anyhow::Result<Table> {
    if inputs.is_empty() {
        bail!("no input files");
    }
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for path in inputs {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let h: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        match &header {
            None => header = Some(h),
            Some(first) if *first != h => {
                bail!("{} has columns [{}], expected [{}]", path.display(), h.join(","), first.join(","))
            }
            Some(_) => {}
        }
        for rec in r.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
    }
    if rows.is_empty() {
        bail!("inputs hold no rows");
    }
    Ok(Table { header: header.expect("at least one input"), rows })
}

#[derive(Debug, Clone, Copy)]
struct Agg {
    min: f64,
    max: f64,
    sum: f64,
}

impl Agg {
    fn new(v: f64) -> Self {
        Self { min: v, max: v, sum: v }
    }

    fn push(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.sum += v;
    }
}

pub struct Summary {
    pub group_cols: Vec<String>,
    pub value_cols: Vec<String>,
    /// Group key, row count and per value column aggregates.
    groups: Vec<(Vec<String>, usize, Vec<Agg>)>,
}

impl Summary {
    pub fn header(&self) -> Vec<String> {
        let mut h = self.group_cols.clone();
        h.push("count".into());
        for c in &self.value_cols {
            for s in ["min", "max", "avg"] {
                h.push(format!("{c}_{s}"));
            }
        }
        h
    }

    pub fn rows(&self) -> Vec<Vec<String>> {
        self.groups
            .iter()
            .map(|(key, n, aggs)| {
                let mut row = key.clone();
                row.push(n.to_string());
                for a in aggs {
                    row.push(a.min.to_string());
                    row.push(a.max.to_string());
                    row.push((a.sum / *n as f64).to_string());
                }
                row
            })
            .collect()
    }

    pub fn averages(&self, col: &str) -> Option<Vec<(String, f64)>> {
        let k = self.value_cols.iter().position(|c| c == col)?;
        Some(self.groups.iter().map(|(key, n, aggs)| (key.join("/"), aggs[k].sum / *n as f64)).collect())
    }
}

fn numeric_key(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn summarize(table: &Table, group_by: &[String]) -> anyhow::Result<Summary> {
    let group_cols: Vec<String> = if group_by.is_empty() {
        table.header.iter().filter(|c| *c == "method").cloned().collect()
    } else {
        group_by.to_vec()
    };
    let mut group_idx = Vec::new();
    for g in &group_cols {
        match table.header.iter().position(|c| c == g) {
            Some(i) => group_idx.push(i),
            None => bail!("no column named '{g}'"),
        }
    }
    let value_idx: Vec<usize> = (0..table.header.len())
        .filter(|i| !group_idx.contains(i))
        .filter(|&i| table.rows.iter().all(|r| r.get(i).and_then(|v| numeric_key(v)).is_some()))
        .collect();
    let mut groups: BTreeMap<Vec<String>, (usize, Vec<Agg>)> = BTreeMap::new();
    for (n, row) in table.rows.iter().enumerate() {
        if row.len() != table.header.len() {
            bail!("row {} has {} fields, expected {}", n + 1, row.len(), table.header.len());
        }
        let key: Vec<String> = group_idx.iter().map(|&i| row[i].clone()).collect();
        let values = value_idx.iter().map(|&i| numeric_key(&row[i]).expect("checked numeric"));
        match groups.get_mut(&key) {
            Some((count, aggs)) => {
                *count += 1;
                for (a, v) in aggs.iter_mut().zip(values) {
                    a.push(v);
                }
            }
            None => {
                groups.insert(key, (1, values.map(Agg::new).collect()));
            }
        }
    }
    let mut groups: Vec<(Vec<String>, usize, Vec<Agg>)> = groups.into_iter().map(|(k, (n, a))| (k, n, a)).collect();
    // numeric group keys sort by value
    groups.sort_by(|a, b| {
        let na: Option<Vec<f64>> = a.0.iter().map(|s| numeric_key(s)).collect();
        let nb: Option<Vec<f64>> = b.0.iter().map(|s| numeric_key(s)).collect();
        match (na, nb) {
            (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
            _ => a.0.cmp(&b.0),
        }
    });
    Ok(Summary { group_cols, value_cols: value_idx.iter().map(|&i| table.header[i].clone()).collect(), groups })
}

/// Line chart of group averages.
pub fn svg_plot(points: &[(String, f64)], title: &str) -> String {
    let (w, h, pad) = (640.0, 400.0, 60.0);
    let lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = points.len().max(2) as f64 - 1.0;
    let xy = |k: usize, v: f64| (pad + (w - 2.0 * pad) * k as f64 / n, h - pad - (h - 2.0 * pad) * (v - lo) / span);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - pad, w - pad, h - pad);
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#, h - pad);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, pad - 6.0, h - pad, fmt_num(lo));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, pad - 6.0, pad + 4.0, fmt_num(hi));
    let path: Vec<String> = points.iter().enumerate().map(|(k, p)| {
        let (x, y) = xy(k, p.1);
        format!("{x:.1},{y:.1}")
    }).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, path.join(" "));
    for (k, (label, v)) in points.iter().enumerate() {
        let (x, y) = xy(k, *v);
        let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="steelblue"/>"#);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#, h - pad + 18.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_num(v: f64) -> String {
    format!("{v:.4}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn run(args: &ReportArgs, output: Option<&Path>) -> anyhow::Result<()> {
    let table = read_tables(&args.inputs)?;
    let summary = summarize(&table, &args.group_by)?;
    let mut w = match output {
        Some(path) => csv::Writer::from_writer(Box::new(fs::File::create(path).with_context(|| format!("writing {}", path.display()))?) as Box<dyn std::io::Write>),
        None => csv::Writer::from_writer(Box::new(std::io::stdout()) as Box<dyn std::io::Write>),
    };
    w.write_record(summary.header())?;
    for row in summary.rows() {
        w.write_record(row)?;
    }
    w.flush()?;
    if let Some(path) = &args.plot {
        let col = match &args.plot_column {
            Some(c) => c.clone(),
            None => summary.value_cols.first().cloned().context("no numeric column to plot")?,
        };
        let points = summary.averages(&col).with_context(|| format!("'{col}' is not a numeric column"))?;
        let by = if summary.group_cols.is_empty() { "all rows".to_string() } else { summary.group_cols.join("/") };
        fs::write(path, svg_plot(&points, &format!("average {col} by {by}"))).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
