//! Grayscale SVG heatmaps of matrices.

use std::fmt::Write;

const CELL_W: usize = 64;
const CELL_H: usize = 36;
const LEFT: usize = 140;
const TOP: usize = 96;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Gray level of a value: the maximum is black, the minimum white, and a
/// constant matrix is uniform mid-gray.
pub fn gray_level(v: f64, min: f64, max: f64) -> u8 {
    if max > min {
        (255.0 * (1.0 - (v - min) / (max - min))).round().clamp(0.0, 255.0) as u8
    } else {
        128
    }
}

/// Renders `values` (rows by columns; NaN marks a missing cell) with its axis
/// labels and the value printed in every cell.
pub fn emit_heatmap(values: &[Vec<f64>], row_labels: &[String], col_labels: &[String], title: &str) -> Result<String, String> {
    let rows = values.len();
    let cols = values.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err("cannot draw an empty matrix".into());
    }
    if values.iter().any(|r| r.len() != cols) {
        return Err("heatmap rows differ in length".into());
    }
    if row_labels.len() != rows || col_labels.len() != cols {
        return Err("heatmap labels do not match the matrix shape".into());
    }
    let finite: Vec<f64> = values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = LEFT + cols * CELL_W + 16;
    let height = TOP + rows * CELL_H + 16;

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(s, "<!-- biasbench {} -->", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>", width / 2, escape(title));
    for (j, label) in col_labels.iter().enumerate() {
        let x = LEFT + j * CELL_W + CELL_W / 2;
        let _ = writeln!(
            s,
            "<text class=\"col-label\" x=\"{x}\" y=\"{}\" text-anchor=\"start\" transform=\"rotate(-45 {x} {})\">{}</text>",
            TOP - 8,
            TOP - 8,
            escape(label)
        );
    }
    for (i, label) in row_labels.iter().enumerate() {
        let y = TOP + i * CELL_H + CELL_H / 2 + 4;
        let _ = writeln!(s, "<text class=\"row-label\" x=\"{}\" y=\"{y}\" text-anchor=\"end\">{}</text>", LEFT - 8, escape(label));
    }
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let (x, y) = (LEFT + j * CELL_W, TOP + i * CELL_H);
            let (fill, text, ink) = if v.is_finite() {
                let g = gray_level(v, min, max);
                (format!("rgb({g},{g},{g})"), format!("{v:.2}"), if g < 128 { "white" } else { "black" })
            } else {
                ("none".to_string(), "n/a".to_string(), "black")
            };
            let _ = writeln!(
                s,
                "<rect class=\"cell\" x=\"{x}\" y=\"{y}\" width=\"{CELL_W}\" height=\"{CELL_H}\" fill=\"{fill}\" stroke=\"#999\"/>"
            );
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{ink}\">{text}</text>",
                x + CELL_W / 2,
                y + CELL_H / 2 + 4
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
