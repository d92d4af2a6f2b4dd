//! Minimal static SVG bar and line charts for report output.

use std::fmt::Write;

const PALETTE: [&str; 8] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
];

pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn y_scale(max_value: f64) -> f64 {
    if max_value <= 0.0 {
        1.0
    } else {
        max_value * 1.1
    }
}

/// Grouped bar chart: one group per label, one bar per series.
pub fn grouped_bar_chart(
    title: &str,
    labels: &[String],
    series: &[Series],
    y_label: &str,
) -> String {
    let width = 840.0;
    let height = 420.0;
    let margin = 60.0;
    let plot_w = width - 2.0 * margin;
    let plot_h = height - 2.0 * margin;
    let max = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .fold(0.0f64, f64::max);
    let y_max = y_scale(max);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        width / 2.0,
        esc(title)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{}</text>",
        height / 2.0,
        height / 2.0,
        esc(y_label)
    );
    // axes and gridlines
    for tick in 0..=5 {
        let v = y_max * tick as f64 / 5.0;
        let y = height - margin - plot_h * tick as f64 / 5.0;
        let _ = write!(
            out,
            "<line x1=\"{margin}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v:.2}</text>\n",
            width - margin,
            margin - 6.0,
            y + 4.0
        );
    }

    let groups = labels.len().max(1);
    let group_w = plot_w / groups as f64;
    let bar_w = (group_w * 0.8) / series.len().max(1) as f64;
    for (gi, label) in labels.iter().enumerate() {
        let gx = margin + gi as f64 * group_w;
        for (si, s) in series.iter().enumerate() {
            let v = s.values.get(gi).copied().unwrap_or(0.0).max(0.0);
            let h = plot_h * v / y_max;
            let x = gx + group_w * 0.1 + si as f64 * bar_w;
            let y = height - margin - h;
            let _ = writeln!(
                out,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"{}\"/>",
                bar_w.max(1.0) - 1.0,
                PALETTE[si % PALETTE.len()]
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            gx + group_w / 2.0,
            height - margin + 16.0,
            esc(label)
        );
    }
    legend(&mut out, series, width, margin);
    out.push_str("</svg>\n");
    out
}

/// Line chart with shared x positions.
pub fn line_chart(title: &str, x_labels: &[String], series: &[Series], y_label: &str) -> String {
    let width = 840.0;
    let height = 420.0;
    let margin = 60.0;
    let plot_w = width - 2.0 * margin;
    let plot_h = height - 2.0 * margin;
    let max = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .fold(0.0f64, f64::max);
    let y_max = y_scale(max);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        width / 2.0,
        esc(title)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{}</text>",
        height / 2.0,
        height / 2.0,
        esc(y_label)
    );
    for tick in 0..=5 {
        let v = y_max * tick as f64 / 5.0;
        let y = height - margin - plot_h * tick as f64 / 5.0;
        let _ = write!(
            out,
            "<line x1=\"{margin}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v:.2}</text>\n",
            width - margin,
            margin - 6.0,
            y + 4.0
        );
    }

    let n = x_labels.len().max(2);
    let step = plot_w / (n - 1) as f64;
    for (i, label) in x_labels.iter().enumerate() {
        let x = margin + i as f64 * step;
        let _ = writeln!(
            out,
            "<text x=\"{x:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            height - margin + 16.0,
            esc(label)
        );
    }
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let points: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let x = margin + i as f64 * step;
                let y = height - margin - plot_h * v.max(0.0) / y_max;
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            points.join(" ")
        );
        for point in &points {
            let mut xy = point.split(',');
            let (x, y) = (xy.next().unwrap(), xy.next().unwrap());
            let _ = writeln!(
                out,
                "<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"{color}\"/>"
            );
        }
    }
    legend(&mut out, series, width, margin);
    out.push_str("</svg>\n");
    out
}

fn legend(out: &mut String, series: &[Series], width: f64, margin: f64) {
    for (si, s) in series.iter().enumerate() {
        let x = margin + 8.0;
        let y = 40.0 + si as f64 * 16.0;
        let _ = write!(
            out,
            "<rect x=\"{x}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            y - 9.0,
            PALETTE[si % PALETTE.len()],
            x + 14.0,
            y,
            esc(&s.name)
        );
        let _ = width;
    }
}
