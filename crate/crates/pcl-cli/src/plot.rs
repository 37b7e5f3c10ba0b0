//! Self-contained SVG 1.1 rendering of benchmark summaries: per-stage
//! sample size on the x axis, out-of-sample MSE on a log y axis, one
//! median line and interquartile band per estimator. Every float goes
//! through `g6`, so equal summaries render byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{validation, CliResult};
use crate::fmt::g6;
use crate::summary::SummaryRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 470.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 370.0;

fn color_for(estimator: &str, index: usize) -> &'static str {
    match estimator {
        "dfpv" => "#1f77b4",
        "fixed_feature" => "#d62728",
        "direct_ridge" => "#7f7f7f",
        _ => ["#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"][index % 4],
    }
}

struct Axes {
    size_lo: f64,
    size_hi: f64,
    log_lo: f64,
    log_hi: f64,
}

impl Axes {
    fn x(&self, size: f64) -> f64 {
        if self.size_hi == self.size_lo {
            return 0.5 * (LEFT + RIGHT);
        }
        LEFT + (size - self.size_lo) / (self.size_hi - self.size_lo) * (RIGHT - LEFT)
    }

    fn y(&self, value: f64) -> f64 {
        let l = value.max(1e-300).log10();
        BOTTOM - (l - self.log_lo) / (self.log_hi - self.log_lo) * (BOTTOM - TOP)
    }
}

/// Render one metric plot. Rows must share a dgp; estimators with no rows
/// simply do not appear. Empty input is a validation error.
pub fn mse_plot(rows: &[SummaryRow], title: &str) -> CliResult<String> {
    if rows.is_empty() {
        return Err(validation("plot: summary is empty"));
    }
    let mut series: BTreeMap<&str, Vec<&SummaryRow>> = BTreeMap::new();
    for row in rows {
        series.entry(&row.estimator).or_default().push(row);
    }
    for list in series.values_mut() {
        list.sort_by_key(|r| r.size);
    }

    let size_lo = rows.iter().map(|r| r.size).min().unwrap() as f64;
    let size_hi = rows.iter().map(|r| r.size).max().unwrap() as f64;
    let mut log_lo = f64::INFINITY;
    let mut log_hi = f64::NEG_INFINITY;
    for r in rows {
        log_lo = log_lo.min(r.q25.max(1e-300).log10());
        log_hi = log_hi.max(r.q75.max(1e-300).log10());
    }
    if !(log_hi > log_lo) {
        log_lo -= 0.5;
        log_hi += 0.5;
    }
    let pad = 0.08 * (log_hi - log_lo);
    let axes = Axes { size_lo, size_hi, log_lo: log_lo - pad, log_hi: log_hi + pad };

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        g6(WIDTH), g6(HEIGHT), g6(WIDTH), g6(HEIGHT)
    );
    let _ = write!(svg, "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", g6(WIDTH), g6(HEIGHT));
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        g6(0.5 * (LEFT + RIGHT)),
        title
    );

    // axes and ticks
    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        g6(LEFT), g6(BOTTOM), g6(RIGHT), g6(BOTTOM)
    );
    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        g6(LEFT), g6(TOP), g6(LEFT), g6(BOTTOM)
    );
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    for &s in &sizes {
        let x = axes.x(s as f64);
        let _ = write!(
            svg,
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{y1}\" stroke=\"black\"/>\n",
            x = g6(x),
            y0 = g6(BOTTOM),
            y1 = g6(BOTTOM + 5.0)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            g6(x),
            g6(BOTTOM + 20.0),
            s
        );
    }
    for i in 0..5 {
        let l = axes.log_lo + (axes.log_hi - axes.log_lo) * i as f64 / 4.0;
        let y = axes.y(10f64.powf(l));
        let _ = write!(
            svg,
            "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"black\"/>\n",
            x0 = g6(LEFT - 5.0),
            x1 = g6(LEFT),
            y = g6(y)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
            g6(LEFT - 9.0),
            g6(y + 4.0),
            g6(10f64.powf(l))
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">per-stage sample size</text>\n",
        g6(0.5 * (LEFT + RIGHT)),
        g6(BOTTOM + 42.0)
    );
    let _ = write!(
        svg,
        "<text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">out-of-sample MSE (log)</text>\n",
        g6(0.5 * (TOP + BOTTOM)),
        g6(0.5 * (TOP + BOTTOM))
    );

    // interquartile bands under the median lines
    for (index, (estimator, list)) in series.iter().enumerate() {
        let color = color_for(estimator, index);
        if list.len() >= 2 {
            let mut points = String::new();
            for r in list.iter() {
                let _ = write!(points, "{},{} ", g6(axes.x(r.size as f64)), g6(axes.y(r.q75)));
            }
            for r in list.iter().rev() {
                let _ = write!(points, "{},{} ", g6(axes.x(r.size as f64)), g6(axes.y(r.q25)));
            }
            let _ = write!(
                svg,
                "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.18\" stroke=\"none\"/>\n",
                points.trim_end(),
                color
            );
        }
    }
    for (index, (estimator, list)) in series.iter().enumerate() {
        let color = color_for(estimator, index);
        if list.len() >= 2 {
            let mut points = String::new();
            for r in list.iter() {
                let _ = write!(points, "{},{} ", g6(axes.x(r.size as f64)), g6(axes.y(r.median)));
            }
            let _ = write!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                points.trim_end(),
                color
            );
        }
        for r in list.iter() {
            let _ = write!(
                svg,
                "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{}\"/>\n",
                g6(axes.x(r.size as f64)),
                g6(axes.y(r.median)),
                color
            );
        }
    }

    // legend, top right
    for (index, estimator) in series.keys().enumerate() {
        let color = color_for(estimator, index);
        let y = TOP + 14.0 * index as f64 + 6.0;
        let _ = write!(
            svg,
            "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"{c}\" stroke-width=\"2\"/>\n",
            x0 = g6(RIGHT + 14.0),
            x1 = g6(RIGHT + 38.0),
            y = g6(y),
            c = color
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            g6(RIGHT + 44.0),
            g6(y + 4.0),
            estimator
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(estimator: &str, size: usize, median: f64) -> SummaryRow {
        SummaryRow {
            dgp: "demand".into(),
            estimator: estimator.into(),
            size,
            count: 20,
            median,
            q25: median * 0.8,
            q75: median * 1.3,
        }
    }

    /// Minimal well-formedness scan: tags balance and attributes stay quoted.
    fn assert_well_formed_xml(text: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').expect("unclosed tag") + start;
            let tag = &rest[start + 1..end];
            assert!(!tag.is_empty());
            if let Some(name) = tag.strip_prefix('/') {
                assert_eq!(stack.pop().as_deref(), Some(name), "mismatched closing tag");
            } else if !tag.ends_with('/') {
                let name: String = tag.chars().take_while(|c| !c.is_whitespace()).collect();
                stack.push(name);
            }
            assert_eq!(rest[start + 1..end].matches('"').count() % 2, 0, "unbalanced quotes");
            rest = &rest[end + 1..];
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    }

    #[test]
    fn renders_and_parses() {
        let rows = vec![
            row("dfpv", 500, 0.05),
            row("dfpv", 1000, 0.03),
            row("fixed_feature", 500, 0.04),
            row("fixed_feature", 1000, 0.035),
            row("direct_ridge", 500, 0.3),
            row("direct_ridge", 1000, 0.29),
        ];
        let svg = mse_plot(&rows, "demand: structural MSE").unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("polygon"));
        assert_well_formed_xml(&svg);
    }

    #[test]
    fn byte_identical_for_equal_summaries() {
        let rows = vec![row("dfpv", 500, 0.05), row("dfpv", 1000, 0.03)];
        let a = mse_plot(&rows, "t").unwrap();
        let b = mse_plot(&rows.clone(), "t").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_size_series_has_no_band_but_renders() {
        let rows = vec![row("dfpv", 500, 0.05)];
        let svg = mse_plot(&rows, "t").unwrap();
        assert!(!svg.contains("polygon"));
        assert!(svg.contains("circle"));
        assert_well_formed_xml(&svg);
    }

    #[test]
    fn empty_summary_is_an_error() {
        assert!(mse_plot(&[], "t").is_err());
    }
}
