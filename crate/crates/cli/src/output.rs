//! CSV, JSON and SVG artifacts.

use std::fs;
use std::io;
use std::path::Path;

use serde_json::Value;

/// Numeric table, one `Vec` per row.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// `header` lines become `# ` comments; numbers carry 17 significant digits.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            out.push_str("# ");
            out.push_str(h);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension(format!("{}.tmp", path.extension().and_then(|e| e.to_str()).unwrap_or("")));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line plot of columns `ys` against column `x`. With `log_log` both axes
/// are base-10 logarithmic and non-positive samples are dropped.
pub fn to_svg(table: &Table, x: usize, ys: &[usize], title: &str, log_log: bool) -> String {
    let map = |v: f64| if log_log { v.log10() } else { v };
    let keep = |v: f64| v.is_finite() && (!log_log || v > 0.0);
    let series: Vec<Vec<(f64, f64)>> = ys
        .iter()
        .map(|&k| {
            table
                .rows
                .iter()
                .filter(|r| keep(r[x]) && keep(r[k]))
                .map(|r| (map(r[x]), map(r[k])))
                .collect()
        })
        .collect();
    let pts = series.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(a, b) in pts {
        x0 = x0.min(a);
        x1 = x1.max(a);
        y0 = y0.min(b);
        y1 = y1.max(b);
    }
    if !(x0 < x1) {
        x1 = x0 + 1.0;
    }
    if !(y0 < y1) {
        y1 = y0 + 1.0;
    }
    let sx = |a: f64| PAD + (a - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |b: f64| H - PAD - (b - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let axis = |v: f64| if log_log { format!("1e{v:.2}") } else { format!("{v:.4}") };
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n\
         <rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W / 2.0,
        escape(title),
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for (v, px, py, anchor) in [
        (x0, PAD, H - PAD + 16.0, "start"),
        (x1, W - PAD, H - PAD + 16.0, "end"),
        (y0, PAD - 4.0, H - PAD, "end"),
        (y1, PAD - 4.0, PAD + 10.0, "end"),
    ] {
        s.push_str(&format!(
            "<text x=\"{px}\" y=\"{py}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
            axis(v)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        W / 2.0,
        H - 10.0,
        escape(&table.columns[x])
    ));
    for (n, (pts, &k)) in series.iter().zip(ys).enumerate() {
        let color = COLORS[n % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(a, b)| format!("{:.2},{:.2}", sx(a), sy(b))).collect();
        s.push_str(&format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n", path.join(" ")));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            W - PAD - 120.0,
            PAD + 16.0 + 14.0 * n as f64,
            escape(&table.columns[k])
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_fixed_precision() {
        let mut t = Table::new(&["x", "y"]);
        t.push(vec![0.1, -2.0]);
        let s = t.to_csv(&["seed = 1".into()]);
        assert_eq!(s, "# seed = 1\nx,y\n1.0000000000000001e-1,-2.0000000000000000e0\n");
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let mut t = Table::new(&["t", "a", "b"]);
        for k in 1..5 {
            let v = k as f64;
            t.push(vec![v, 1.0 / v, -v]);
        }
        let s = to_svg(&t, 0, &[1, 2], "decay", true);
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        // The negative series is dropped on log axes.
        assert!(s.contains("points=\"\""));
    }
}
