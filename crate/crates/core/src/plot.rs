//! Self-contained SVG renderings of an experiment report.
//!
//! No external assets, no timestamps, fixed-precision numbers: the bytes are
//! a pure function of the report, so golden tests can diff them directly.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::Histogram;
use crate::runner::ExperimentReport;

const PALETTE: [&str; 6] = [
    "#4878cf", "#d65f5f", "#6acc65", "#b47cc7", "#c4ad66", "#77bedb",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;

/// Emits one score-histogram SVG per method (where the report carries
/// histogram data) and one grouped bar chart of binned AuROC (where binned
/// results exist). Returns the written paths.
pub fn plot_report(report: &ExperimentReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    for method_cfg in &report.config.methods {
        let Some(method_report) = report.methods.get(&method_cfg.name) else {
            continue;
        };
        if let Some(hist) = &method_report.histogram {
            let svg = histogram_svg(&method_cfg.name, hist);
            let path = out_dir.join(format!("histogram_{}.svg", method_cfg.name));
            std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }

    if report
        .methods
        .values()
        .any(|m| m.metrics.contains_key("binned_auroc"))
    {
        let svg = binned_auroc_svg(report);
        let path = out_dir.join("binned_auroc.svg");
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    s.push_str(
        "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">\
         <path d=\"M0,6 l6,-6\" stroke=\"#999999\" stroke-width=\"1\"/></pattern></defs>\n",
    );
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    s
}

fn axes(s: &mut String) {
    let x0 = MARGIN_L;
    let y0 = HEIGHT - MARGIN_B;
    let x1 = WIDTH - MARGIN_R;
    s.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"#333333\"/>\n"
    ));
    s.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{MARGIN_T}\" x2=\"{x0}\" y2=\"{y0}\" stroke=\"#333333\"/>\n"
    ));
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

fn histogram_svg(method: &str, hist: &Histogram) -> String {
    let mut s = svg_open(&format!("score histogram: {method}"));
    axes(&mut s);
    let n = hist.counts_in.len().max(1);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let max_count = hist
        .counts_in
        .iter()
        .chain(&hist.counts_ood)
        .copied()
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let bar_w = plot_w / n as f64;
    for (series, color) in [
        (&hist.counts_in, PALETTE[0]),
        (&hist.counts_ood, PALETTE[1]),
    ] {
        for (i, &count) in series.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let h = plot_h * count as f64 / max_count;
            let x = MARGIN_L + i as f64 * bar_w;
            let y = HEIGHT - MARGIN_B - h;
            s.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\" \
                 fill-opacity=\"0.55\"/>\n",
                fmt(x),
                fmt(y),
                fmt(bar_w),
                fmt(h)
            ));
        }
    }
    // Axis annotations: score range and peak count.
    s.push_str(&format!(
        "<text x=\"{MARGIN_L}\" y=\"{}\" font-size=\"11\">{}</text>\n",
        HEIGHT - MARGIN_B + 16.0,
        fmt(hist.lo)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B + 16.0,
        fmt(hist.hi)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
        MARGIN_L - 6.0,
        MARGIN_T + 10.0,
        max_count as u64
    ));
    // Legend.
    legend(
        &mut s,
        &[
            ("in-distribution", PALETTE[0]),
            ("out-of-distribution", PALETTE[1]),
        ],
    );
    s.push_str("</svg>\n");
    s
}

fn legend(s: &mut String, items: &[(&str, &str)]) {
    let mut x = MARGIN_L + 8.0;
    for (label, color) in items {
        s.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\" \
             fill-opacity=\"0.7\"/>\n",
            fmt(x),
            MARGIN_T - 4.0
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
            fmt(x + 14.0),
            MARGIN_T + 5.0,
            escape(label)
        ));
        x += 14.0 + 8.0 * label.len() as f64 + 16.0;
    }
}

fn binned_auroc_svg(report: &ExperimentReport) -> String {
    // Bin keys in ascending lo order, pooled across methods.
    let mut bins: Vec<String> = Vec::new();
    for method in report.methods.values() {
        if let Some(map) = method.metrics.get("binned_auroc") {
            for key in map.keys() {
                if !bins.contains(key) {
                    bins.push(key.clone());
                }
            }
        }
    }
    bins.sort_by(|a, b| bin_lo(a).total_cmp(&bin_lo(b)));

    let methods: Vec<&str> = report
        .config
        .methods
        .iter()
        .map(|m| m.name.as_str())
        .filter(|name| {
            report
                .methods
                .get(*name)
                .is_some_and(|m| m.metrics.contains_key("binned_auroc"))
        })
        .collect();

    let mut s = svg_open("AuROC by OoD-pixel fraction");
    axes(&mut s);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let y_base = HEIGHT - MARGIN_B;
    // Gridlines at 0.25 steps.
    for step in 1..=4 {
        let frac = step as f64 / 4.0;
        let y = y_base - plot_h * frac;
        s.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            fmt(y),
            WIDTH - MARGIN_R,
            fmt(y)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{frac:.2}</text>\n",
            MARGIN_L - 4.0,
            fmt(y + 3.0)
        ));
    }

    let group_w = plot_w / bins.len().max(1) as f64;
    let bar_w = (group_w * 0.8) / methods.len().max(1) as f64;
    for (bi, bin) in bins.iter().enumerate() {
        let gx = MARGIN_L + bi as f64 * group_w;
        for (mi, method) in methods.iter().enumerate() {
            let cell = report
                .methods
                .get(*method)
                .and_then(|m| m.metrics.get("binned_auroc"))
                .and_then(|map| map.get(bin));
            let x = gx + group_w * 0.1 + mi as f64 * bar_w;
            let color = PALETTE[mi % PALETTE.len()];
            match cell.and_then(|c| c.value) {
                Some(value) => {
                    let h = plot_h * value;
                    s.push_str(&format!(
                        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>\n",
                        fmt(x),
                        fmt(y_base - h),
                        fmt(bar_w),
                        fmt(h)
                    ));
                }
                None => {
                    // Undefined bin: hatched zero-height placeholder plus
                    // the support annotation.
                    s.push_str(&format!(
                        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"6\" fill=\"url(#hatch)\" \
                         stroke=\"#999999\" stroke-width=\"0.5\"/>\n",
                        fmt(x),
                        fmt(y_base - 6.0),
                        fmt(bar_w)
                    ));
                    s.push_str(&format!(
                        "<text x=\"{}\" y=\"{}\" font-size=\"8\" text-anchor=\"middle\">n=0</text>\n",
                        fmt(x + bar_w / 2.0),
                        fmt(y_base - 10.0)
                    ));
                }
            }
        }
        // Bin label.
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"9\" text-anchor=\"middle\">{}</text>\n",
            fmt(gx + group_w / 2.0),
            y_base + 16.0,
            escape(bin)
        ));
    }
    let legend_items: Vec<(&str, &str)> = methods
        .iter()
        .enumerate()
        .map(|(i, m)| (*m, PALETTE[i % PALETTE.len()]))
        .collect();
    legend(&mut s, &legend_items);
    s.push_str("</svg>\n");
    s
}

fn bin_lo(key: &str) -> f64 {
    key.trim_start_matches('(')
        .split(',')
        .next()
        .and_then(|v| v.parse().ok())
        .unwrap_or(f64::NEG_INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::BinCell;
    use crate::runner::{ExperimentReport, MethodReport, RuntimeStats};
    use std::collections::BTreeMap;

    fn toy_report() -> ExperimentReport {
        let mut bins = BTreeMap::new();
        bins.insert(
            "(0,0.5]".to_string(),
            BinCell {
                value: Some(0.875),
                n_in: 4,
                n_ood: 3,
            },
        );
        bins.insert(
            "(0.5,1]".to_string(),
            BinCell {
                value: None,
                n_in: 4,
                n_ood: 0,
            },
        );
        let mut metrics = BTreeMap::new();
        metrics.insert("binned_auroc".to_string(), bins);
        let mut methods = BTreeMap::new();
        methods.insert(
            "energy".to_string(),
            MethodReport {
                skipped: None,
                metrics,
                histogram: Some(Histogram {
                    lo: 0.0,
                    hi: 1.0,
                    counts_in: vec![2, 0, 1],
                    counts_ood: vec![0, 3, 0],
                }),
            },
        );
        let config = crate::synthetic::example_config("manifest.json", 1);
        ExperimentReport {
            config_hash: "00".into(),
            config: crate::runner::ExperimentConfig {
                methods: vec![crate::runner::MethodConfig {
                    name: "energy".into(),
                    temperature: None,
                    epsilon: None,
                }],
                ..config
            },
            methods,
            per_sample: Vec::new(),
            audit: Vec::new(),
            runtime: RuntimeStats {
                total_ms: 0,
                samples: 7,
            },
        }
    }

    #[test]
    fn emits_histogram_and_binned_chart() {
        let dir = tempfile::tempdir().unwrap();
        let written = plot_report(&toy_report(), dir.path()).unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["histogram_energy.svg", "binned_auroc.svg"]);

        let chart = std::fs::read_to_string(&written[1]).unwrap();
        assert!(chart.starts_with("<svg"));
        assert!(chart.ends_with("</svg>\n"));
        // The defined bin draws a solid bar, the empty one a hatched
        // placeholder with its support annotated.
        assert!(chart.contains("url(#hatch)"));
        assert!(chart.contains(">n=0<"));
        assert!(chart.contains("(0,0.5]"));
    }

    #[test]
    fn identical_reports_yield_identical_bytes() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        plot_report(&toy_report(), dir_a.path()).unwrap();
        plot_report(&toy_report(), dir_b.path()).unwrap();
        for name in ["histogram_energy.svg", "binned_auroc.svg"] {
            assert_eq!(
                std::fs::read(dir_a.path().join(name)).unwrap(),
                std::fs::read(dir_b.path().join(name)).unwrap()
            );
        }
    }
}
