//! Bare-bones SVG line charts.

use std::fmt::Write;

use super::table::ResultTable;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One chart with axes, a polyline per series and a legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    for (v, anchor_x, anchor_y) in [(x0, sx(x0), H - PAD + 16.0), (x1, sx(x1), H - PAD + 16.0)] {
        let _ = writeln!(
            s,
            r#"<text x="{anchor_x}" y="{anchor_y}" text-anchor="middle">{v:.4}</text>"#
        );
    }
    for v in [y0, y1] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.4}</text>"#,
            PAD - 4.0,
            sy(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = PAD + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            W - PAD - 150.0,
            W - PAD - 130.0,
            W - PAD - 125.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Charts for a result table: one per `(model, metric)` for size and phase
/// tables, with `p` on the x-axis and one series per method; power tables
/// are drawn against `a` per `(model, p)`.
pub fn charts_for(table: &ResultTable) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let is_power = table.rows.iter().any(|r| r.metric == "power");
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in &table.rows {
        let key = if is_power {
            if r.metric != "power" {
                continue;
            }
            (r.model.clone(), r.p.to_string())
        } else {
            (r.model.clone(), r.metric.clone())
        };
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for (model, second) in keys {
        let mut series: Vec<Series> = Vec::new();
        for r in &table.rows {
            let (x, keep) = if is_power {
                let a = table
                    .rows
                    .iter()
                    .find(|q| q.experiment_id == r.experiment_id && q.metric == "a")
                    .map(|q| q.value);
                (a.unwrap_or(f64::NAN), r.metric == "power" && r.p.to_string() == second)
            } else {
                (r.p as f64, r.metric == second)
            };
            if r.model != model || !keep || !x.is_finite() {
                continue;
            }
            match series.iter_mut().find(|s| s.label == r.method) {
                Some(s) => s.points.push((x, r.value)),
                None => series.push(Series {
                    label: r.method.clone(),
                    points: vec![(x, r.value)],
                }),
            }
        }
        for s in &mut series {
            s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let (name, x_label) = if is_power {
            (format!("{model}_p{second}_power"), "a")
        } else {
            (format!("{model}_{second}"), "p")
        };
        let file: String = name
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let chart = line_chart(&name, x_label, if is_power { "power" } else { &second }, &series);
        out.push((format!("{file}.svg"), chart));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::table::ResultRow;

    #[test]
    fn chart_is_wellformed() {
        let svg = line_chart(
            "a<b",
            "p",
            "rate",
            &[Series {
                label: "gaussian".into(),
                points: vec![(50.0, 0.1), (100.0, 0.2)],
            }],
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b") && svg.contains("<polyline"));
    }

    #[test]
    fn one_chart_per_model_metric() {
        let mut t = ResultTable::default();
        for (p, m) in [(50, "gaussian"), (100, "gaussian"), (50, "corrected")] {
            t.push(ResultRow {
                experiment_id: format!("size:M1:{p}"),
                model: "M1".into(),
                p,
                n: 2 * p,
                method: m.into(),
                metric: "rejection_rate".into(),
                value: 0.05,
                reps: 100,
                seed: 0,
            });
        }
        let charts = charts_for(&t);
        assert_eq!(charts.len(), 1);
        assert_eq!(charts[0].0, "M1_rejection_rate.svg");
    }
}
