//! Deterministic SVG charts for the report stage.
//!
//! The four plots are hand-assembled vector files: loss against tokens for
//! each model, the same series in log-log space with the fitted line, the
//! general validation signal, and the data-efficiency frontier. Each file
//! embeds its data table in a leading comment so the rendered points can be
//! checked against the numbers without a plotting library. All coordinates
//! are formatted to fixed precision, so identical inputs produce identical
//! bytes; an optional timestamp comment is off by default.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;

use crate::report::RunReport;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 74.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 54.0;
const PLOT_WIDTH: f64 = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
const PLOT_HEIGHT: f64 = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum TickStyle {
    /// Scientific notation, for token counts and log-space values.
    Scientific,
    /// Three decimals, for losses and deltas.
    Fixed,
}

impl TickStyle {
    fn format(&self, v: f64) -> String {
        match self {
            TickStyle::Scientific => format!("{v:.2e}"),
            TickStyle::Fixed => format!("{v:.3}"),
        }
    }
}

struct Series {
    label: String,
    color: &'static str,
    points: Vec<(f64, f64)>,
    /// Straight line in plot space as (intercept, slope), drawn across the
    /// full x range. Log-log power-law fits are straight lines here.
    fit: Option<(f64, f64)>,
}

struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    x_ticks: TickStyle,
    y_ticks: TickStyle,
    series: Vec<Series>,
    /// Extra marker called out at a data coordinate, for the frontier origin.
    origin: Option<(f64, f64)>,
    data_comment: String,
    timestamp: bool,
}

fn pad_range(min: f64, max: f64) -> (f64, f64) {
    let span = max - min;
    if span <= 0.0 {
        (min - 1.0, max + 1.0)
    } else {
        (min - 0.05 * span, max + 0.05 * span)
    }
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

fn escape_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    fn render(&self) -> String {
        let xs = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .chain(self.origin.map(|o| o.0));
        let (x_min, x_max) = {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for x in xs {
                min = min.min(x);
                max = max.max(x);
            }
            pad_range(min, max)
        };
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .chain(self.origin.map(|o| o.1))
            .chain(self.series.iter().filter_map(|s| {
                s.fit.map(|(intercept, slope)| intercept + slope * x_min)
            }))
            .chain(self.series.iter().filter_map(|s| {
                s.fit.map(|(intercept, slope)| intercept + slope * x_max)
            }));
        let (y_min, y_max) = {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for y in ys {
                min = min.min(y);
                max = max.max(y);
            }
            pad_range(min, max)
        };

        let x_px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * PLOT_WIDTH;
        let y_px = |y: f64| MARGIN_TOP + (y_max - y) / (y_max - y_min) * PLOT_HEIGHT;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" viewBox=\"0 0 {WIDTH:.0} {HEIGHT:.0}\" font-family=\"monospace\" font-size=\"12\">"
        );
        debug_assert!(
            !self.data_comment.contains("--"),
            "double hyphen would terminate the comment early"
        );
        let _ = writeln!(svg, "<!--\n{}\n-->", self.data_comment);
        if self.timestamp {
            let _ = writeln!(
                svg,
                "<!-- rendered {} -->",
                chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ")
            );
        }
        let _ = writeln!(svg, "<rect width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" fill=\"white\"/>");
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
            px(WIDTH / 2.0),
            escape_text(&self.title)
        );

        // Axes.
        let x0 = px(MARGIN_LEFT);
        let y0 = px(MARGIN_TOP + PLOT_HEIGHT);
        let _ = writeln!(
            svg,
            "<g stroke=\"#333333\" stroke-width=\"1\">\n<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\"/>\n<line x1=\"{x0}\" y1=\"{}\" x2=\"{x0}\" y2=\"{y0}\"/>\n</g>",
            px(MARGIN_LEFT + PLOT_WIDTH),
            px(MARGIN_TOP)
        );

        for i in 0..=4 {
            let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
            let cx = px(x_px(fx));
            let _ = writeln!(
                svg,
                "<line x1=\"{cx}\" y1=\"{y0}\" x2=\"{cx}\" y2=\"{}\" stroke=\"#333333\"/>",
                px(MARGIN_TOP + PLOT_HEIGHT + 5.0)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{cx}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
                px(MARGIN_TOP + PLOT_HEIGHT + 20.0),
                self.x_ticks.format(fx)
            );

            let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
            let cy = px(y_px(fy));
            let _ = writeln!(
                svg,
                "<line x1=\"{}\" y1=\"{cy}\" x2=\"{x0}\" y2=\"{cy}\" stroke=\"#333333\"/>",
                px(MARGIN_LEFT - 5.0)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{cy}\" text-anchor=\"end\" dy=\"4\">{}</text>",
                px(MARGIN_LEFT - 8.0),
                self.y_ticks.format(fy)
            );
        }

        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            px(MARGIN_LEFT + PLOT_WIDTH / 2.0),
            px(HEIGHT - 12.0),
            escape_text(&self.x_label)
        );
        let _ = writeln!(
            svg,
            "<text x=\"16\" y=\"{mid}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {mid})\">{}</text>",
            escape_text(&self.y_label),
            mid = px(MARGIN_TOP + PLOT_HEIGHT / 2.0)
        );

        for (i, series) in self.series.iter().enumerate() {
            if let Some((intercept, slope)) = series.fit {
                let _ = writeln!(
                    svg,
                    "<polyline class=\"fit\" fill=\"none\" stroke=\"{}\" stroke-dasharray=\"6 3\" points=\"{},{} {},{}\"/>",
                    series.color,
                    px(x_px(x_min)),
                    px(y_px(intercept + slope * x_min)),
                    px(x_px(x_max)),
                    px(y_px(intercept + slope * x_max))
                );
            }
            if series.points.len() > 1 {
                let pts = series
                    .points
                    .iter()
                    .map(|(x, y)| format!("{},{}", px(x_px(*x)), px(y_px(*y))))
                    .collect::<Vec<_>>()
                    .join(" ");
                let _ = writeln!(
                    svg,
                    "<polyline class=\"series\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{pts}\"/>",
                    series.color
                );
            }
            for (x, y) in &series.points {
                let _ = writeln!(
                    svg,
                    "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>",
                    px(x_px(*x)),
                    px(y_px(*y)),
                    series.color
                );
            }
            let ly = MARGIN_TOP + 14.0 + 16.0 * i as f64;
            let _ = writeln!(
                svg,
                "<line x1=\"{}\" y1=\"{ly:.2}\" x2=\"{}\" y2=\"{ly:.2}\" stroke=\"{}\" stroke-width=\"2\"/>",
                px(MARGIN_LEFT + 10.0),
                px(MARGIN_LEFT + 34.0),
                series.color
            );
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\">{}</text>",
                px(MARGIN_LEFT + 40.0),
                px(ly + 4.0),
                escape_text(&series.label)
            );
        }

        if let Some((ox, oy)) = self.origin {
            let (cx, cy) = (x_px(ox), y_px(oy));
            let _ = writeln!(
                svg,
                "<g id=\"origin\" stroke=\"#000000\">\n<circle cx=\"{cx}\" cy=\"{cy}\" r=\"6\" fill=\"none\"/>\n<line x1=\"{}\" y1=\"{cy}\" x2=\"{}\" y2=\"{cy}\"/>\n<line x1=\"{cx}\" y1=\"{}\" x2=\"{cx}\" y2=\"{}\"/>\n</g>",
                px(cx - 10.0),
                px(cx + 10.0),
                px(cy - 10.0),
                px(cy + 10.0),
                cx = px(cx),
                cy = px(cy)
            );
        }

        svg.push_str("</svg>\n");
        svg
    }
}

fn sanitize(label: &str) -> String {
    label.replace("--", "-")
}

/// Writes the four run charts into `dir` and returns their paths.
pub fn emit_plots(report: &RunReport, dir: &Path, timestamp: bool) -> Result<Vec<PathBuf>> {
    let mut outputs = Vec::new();
    let color = |i: usize| PALETTE[i % PALETTE.len()];

    let mut linear_comment = String::from("tokens_seen,loss,model_label");
    let mut linear_series = Vec::new();
    for (i, m) in report.models.iter().enumerate() {
        for p in &m.domain_trace.points {
            let _ = write!(
                linear_comment,
                "\n{},{},{}",
                p.tokens_seen,
                p.loss,
                sanitize(&m.label)
            );
        }
        linear_series.push(Series {
            label: m.label.clone(),
            color: color(i),
            points: m
                .domain_trace
                .points
                .iter()
                .map(|p| (p.tokens_seen as f64, p.loss))
                .collect(),
            fit: None,
        });
    }
    let path = dir.join("loss_linear.svg");
    std::fs::write(
        &path,
        Chart {
            title: "domain validation loss".into(),
            x_label: "tokens seen".into(),
            y_label: "loss (nats/token)".into(),
            x_ticks: TickStyle::Scientific,
            y_ticks: TickStyle::Fixed,
            series: linear_series,
            origin: None,
            data_comment: linear_comment,
            timestamp,
        }
        .render(),
    )?;
    outputs.push(path);

    let mut loglog_comment = String::from("tokens_seen,loss,model_label");
    let mut loglog_series = Vec::new();
    for (i, m) in report.models.iter().enumerate() {
        for p in &m.domain_trace.points {
            let _ = write!(
                loglog_comment,
                "\n{},{},{}",
                p.tokens_seen,
                p.loss,
                sanitize(&m.label)
            );
        }
        let fit = &m.domain_fit.fit;
        loglog_series.push(Series {
            label: format!("{} fit b={:.4}", m.label, fit.b),
            color: color(i),
            points: m
                .domain_trace
                .points
                .iter()
                .map(|p| ((p.tokens_seen as f64).log10(), p.loss.log10()))
                .collect(),
            fit: Some((fit.a.log10(), fit.b)),
        });
    }
    let mut fit_comment = String::from("\n\nmodel_label,a,b,r2");
    for m in &report.models {
        let f = &m.domain_fit.fit;
        let _ = write!(
            fit_comment,
            "\n{},{},{},{}",
            sanitize(&m.label),
            f.a,
            f.b,
            f.r2
        );
    }
    loglog_comment.push_str(&fit_comment);
    let path = dir.join("loss_loglog.svg");
    std::fs::write(
        &path,
        Chart {
            title: "domain validation loss, log-log with power-law fit".into(),
            x_label: "log10 tokens seen".into(),
            y_label: "log10 loss (nats/token)".into(),
            x_ticks: TickStyle::Fixed,
            y_ticks: TickStyle::Fixed,
            series: loglog_series,
            origin: None,
            data_comment: loglog_comment,
            timestamp,
        }
        .render(),
    )?;
    outputs.push(path);

    let mut general_comment = String::from("tokens_seen,loss,model_label");
    let mut general_series = Vec::new();
    for (i, m) in report.models.iter().enumerate() {
        for p in &m.general_trace.points {
            let _ = write!(
                general_comment,
                "\n{},{},{}",
                p.tokens_seen,
                p.loss,
                sanitize(&m.label)
            );
        }
        general_series.push(Series {
            label: m.label.clone(),
            color: color(i),
            points: m
                .general_trace
                .points
                .iter()
                .map(|p| (p.tokens_seen as f64, p.loss))
                .collect(),
            fit: None,
        });
    }
    let path = dir.join("general_val.svg");
    std::fs::write(
        &path,
        Chart {
            title: "general validation loss".into(),
            x_label: "tokens seen".into(),
            y_label: "loss (nats/token)".into(),
            x_ticks: TickStyle::Scientific,
            y_ticks: TickStyle::Fixed,
            series: general_series,
            origin: None,
            data_comment: general_comment,
            timestamp,
        }
        .render(),
    )?;
    outputs.push(path);

    let mut frontier_comment =
        String::from("tokens_seen,delta_domain_improvement,delta_general_improvement,model_label");
    let mut frontier_series = Vec::new();
    for (i, m) in report.models.iter().enumerate() {
        for p in &m.frontier {
            let _ = write!(
                frontier_comment,
                "\n{},{},{},{}",
                p.tokens_seen,
                p.delta_domain,
                p.delta_general,
                sanitize(&m.label)
            );
        }
        frontier_series.push(Series {
            label: m.label.clone(),
            color: color(i),
            points: m.frontier.iter().map(|p| (p.delta_domain, p.delta_general)).collect(),
            fit: None,
        });
    }
    let path = dir.join("frontier.svg");
    std::fs::write(
        &path,
        Chart {
            title: "data-efficiency frontier".into(),
            x_label: "domain loss improvement (nats/token)".into(),
            y_label: "general loss improvement (nats/token)".into(),
            x_ticks: TickStyle::Fixed,
            y_ticks: TickStyle::Fixed,
            series: frontier_series,
            origin: Some((0.0, 0.0)),
            data_comment: frontier_comment,
            timestamp,
        }
        .render(),
    )?;
    outputs.push(path);

    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_law_chart() -> Chart {
        let a: f64 = 3.0;
        let b: f64 = -0.2;
        let points: Vec<(f64, f64)> = (0..6)
            .map(|i| {
                let n = 1e6 * 2f64.powi(i);
                (n.log10(), (a * n.powf(b)).log10())
            })
            .collect();
        Chart {
            title: "test".into(),
            x_label: "log10 tokens seen".into(),
            y_label: "log10 loss (nats/token)".into(),
            x_ticks: TickStyle::Fixed,
            y_ticks: TickStyle::Fixed,
            series: vec![Series {
                label: "order-2".into(),
                color: PALETTE[0],
                points,
                fit: Some((a.log10(), b)),
            }],
            origin: None,
            data_comment: "tokens_seen,loss,model_label".into(),
            timestamp: false,
        }
    }

    fn attr(tag: &str, name: &str) -> f64 {
        let key = format!("{name}=\"");
        let start = tag.find(&key).unwrap() + key.len();
        let end = tag[start..].find('"').unwrap() + start;
        tag[start..end].parse().unwrap()
    }

    #[test]
    fn fit_line_passes_through_exact_markers() {
        let svg = power_law_chart().render();

        let fit_tag = svg
            .lines()
            .find(|l| l.contains("class=\"fit\""))
            .expect("fit polyline present");
        let points_attr = {
            let key = "points=\"";
            let start = fit_tag.find(key).unwrap() + key.len();
            let end = fit_tag[start..].find('"').unwrap() + start;
            &fit_tag[start..end]
        };
        let line: Vec<(f64, f64)> = points_attr
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect();
        assert_eq!(line.len(), 2);
        let line_y = |x: f64| {
            let t = (x - line[0].0) / (line[1].0 - line[0].0);
            line[0].1 + t * (line[1].1 - line[0].1)
        };

        let mut markers = 0;
        for tag in svg.lines().filter(|l| l.starts_with("<circle")) {
            let (cx, cy) = (attr(tag, "cx"), attr(tag, "cy"));
            let err = (line_y(cx) - cy).abs();
            assert!(
                err <= 0.005 * PLOT_HEIGHT,
                "marker at {cx} off the fit line by {err} px"
            );
            markers += 1;
        }
        assert_eq!(markers, 6);
    }

    #[test]
    fn single_checkpoint_renders_a_marker_without_a_series_line() {
        let chart = Chart {
            title: "single".into(),
            x_label: "tokens seen".into(),
            y_label: "loss (nats/token)".into(),
            x_ticks: TickStyle::Scientific,
            y_ticks: TickStyle::Fixed,
            series: vec![Series {
                label: "order-2".into(),
                color: PALETTE[0],
                points: vec![(4e8, 2.5)],
                fit: None,
            }],
            origin: None,
            data_comment: "tokens_seen,loss,model_label\n400000000,2.5,order-2".into(),
            timestamp: false,
        };
        let svg = chart.render();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("class=\"series\""));
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn rendering_is_deterministic_and_timestamp_is_opt_in() {
        let a = power_law_chart().render();
        let b = power_law_chart().render();
        assert_eq!(a, b);
        assert!(!a.contains("rendered"));

        let mut stamped_chart = power_law_chart();
        stamped_chart.timestamp = true;
        assert!(stamped_chart.render().contains("<!-- rendered "));
    }

    #[test]
    fn axes_are_labeled_and_comment_survives_intact() {
        let svg = power_law_chart().render();
        assert_eq!(svg.matches("<svg").count(), 1);
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("log10 tokens seen"));
        assert!(svg.contains("log10 loss (nats/token)"));
        assert!(svg.contains("tokens_seen,loss,model_label"));
    }

    #[test]
    fn frontier_origin_marker_lands_at_the_data_origin() {
        let chart = Chart {
            title: "frontier".into(),
            x_label: "domain loss improvement (nats/token)".into(),
            y_label: "general loss improvement (nats/token)".into(),
            x_ticks: TickStyle::Fixed,
            y_ticks: TickStyle::Fixed,
            series: vec![Series {
                label: "order-2".into(),
                color: PALETTE[0],
                points: vec![(0.0, 0.0), (0.05, 0.001), (0.1, 0.002)],
                fit: None,
            }],
            origin: Some((0.0, 0.0)),
            data_comment: "frontier".into(),
            timestamp: false,
        };
        let svg = chart.render();
        let origin_tag = svg
            .lines()
            .skip_while(|l| !l.contains("id=\"origin\""))
            .find(|l| l.starts_with("<circle"))
            .expect("origin circle");
        let first_marker = svg
            .lines()
            .find(|l| l.starts_with("<circle") && l.contains("r=\"3\""))
            .expect("data marker at (0,0)");
        assert_eq!(attr(origin_tag, "cx"), attr(first_marker, "cx"));
        assert_eq!(attr(origin_tag, "cy"), attr(first_marker, "cy"));
    }
}
