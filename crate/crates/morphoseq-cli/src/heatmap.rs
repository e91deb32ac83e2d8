//! Attention heatmap export: CSV with full-precision weights and a static
//! grayscale SVG grid (0 maps to white, 1 to black).

use morphoseq::seq2seq::AttentionTrace;

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Header row carries the input tokens; each following row is one output
/// token with its attention weights at full precision.
pub fn trace_to_csv(trace: &AttentionTrace) -> String {
    let mut out = String::new();
    out.push_str(&std::iter::once(String::new())
        .chain(trace.col_labels().iter().map(|l| csv_field(l)))
        .collect::<Vec<_>>()
        .join(","));
    out.push('\n');
    for (label, row) in trace.row_labels().iter().zip(trace.weights()) {
        let mut fields = vec![csv_field(label)];
        fields.extend(row.iter().map(|w| w.to_string()));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const CELL: usize = 22;
const FONT: usize = 11;

/// One shaded rect per (output token, input token) cell, with axis labels.
/// Contains no timestamps, so identical traces render identical bytes.
pub fn trace_to_svg(trace: &AttentionTrace) -> String {
    let rows = trace.rows();
    let cols = trace.cols();
    let row_label_px = trace
        .row_labels()
        .iter()
        .map(|l| l.chars().count())
        .max()
        .unwrap_or(1)
        * FONT
        / 2
        + 12;
    let col_label_px = trace
        .col_labels()
        .iter()
        .map(|l| l.chars().count())
        .max()
        .unwrap_or(1)
        * FONT
        / 2
        + 12;
    let left = row_label_px;
    let top = col_label_px;
    let width = left + cols * CELL + 10;
    let height = top + rows * CELL + 10;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "<style>text {{ font-family: monospace; font-size: {FONT}px; fill: black; }}</style>\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    for (c, label) in trace.col_labels().iter().enumerate() {
        let x = left + c * CELL + CELL / 2 + FONT / 3;
        let y = top - 6;
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"start\" \
             transform=\"rotate(-60 {x} {y})\">{}</text>\n",
            escape_xml(label)
        ));
    }
    for (r, label) in trace.row_labels().iter().enumerate() {
        let x = left - 6;
        let y = top + r * CELL + CELL / 2 + FONT / 3;
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"end\">{}</text>\n",
            escape_xml(label)
        ));
    }
    for (r, row) in trace.weights().iter().enumerate() {
        for (c, &w) in row.iter().enumerate() {
            let shade = ((1.0 - w.clamp(0.0, 1.0)) * 255.0).round() as u8;
            let x = left + c * CELL;
            let y = top + r * CELL;
            svg.push_str(&format!(
                "<rect class=\"cell\" x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" \
                 fill=\"rgb({shade},{shade},{shade})\" stroke=\"#ccc\" stroke-width=\"0.5\">\
                 <title>{w}</title></rect>\n"
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
