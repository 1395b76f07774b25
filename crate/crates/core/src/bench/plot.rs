use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BenchError;

/// Named series over a shared step index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<(String, Vec<f64>)>,
}

/// Rows × columns of optional values (`None` marks a failed cell).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub title: String,
    pub row_label: String,
    pub col_label: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    Curves(Curves),
    Heatmap(Heatmap),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Csv,
    Svg,
}

pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 500.0;

/// `%.12g`: twelve significant digits, trailing zeros dropped.
pub fn fmt_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.11e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..12).contains(&exp) {
        trim(&format!("{v:.*}", (11 - exp) as usize))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mant), exp.abs())
    }
}

/// The `%.4f` cell annotation.
pub fn fmt_annotation(v: f64) -> String {
    format!("{v:.4}")
}

fn check_nonempty(data: &PlotData) -> Result<(), BenchError> {
    let empty = match data {
        PlotData::Curves(c) => c.series.is_empty() || c.series.iter().all(|(_, s)| s.is_empty()),
        PlotData::Heatmap(h) => h.rows.is_empty() || h.cols.is_empty(),
    };
    if empty {
        return Err(BenchError::EmptyData);
    }
    if let PlotData::Heatmap(h) = data {
        if h.values.len() != h.rows.len() || h.values.iter().any(|r| r.len() != h.cols.len()) {
            return Err(BenchError::Format("heatmap values do not match its labels".into()));
        }
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_csv(data: &PlotData) -> Result<String, BenchError> {
    check_nonempty(data)?;
    let mut out = String::new();
    match data {
        PlotData::Curves(c) => {
            let names: Vec<String> = c.series.iter().map(|(n, _)| csv_field(n)).collect();
            writeln!(out, "t,{}", names.join(",")).unwrap();
            let len = c.series.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
            for t in 0..len {
                let cells: Vec<String> =
                    c.series.iter().map(|(_, s)| s.get(t).map(|&v| fmt_sig12(v)).unwrap_or_default()).collect();
                writeln!(out, "{t},{}", cells.join(",")).unwrap();
            }
        }
        PlotData::Heatmap(h) => {
            let cols: Vec<String> = h.cols.iter().map(|c| csv_field(c)).collect();
            writeln!(out, "{},{}", csv_field(&h.row_label), cols.join(",")).unwrap();
            for (name, row) in h.rows.iter().zip(&h.values) {
                let cells: Vec<String> = row.iter().map(|v| v.map(fmt_sig12).unwrap_or_default()).collect();
                writeln!(out, "{},{}", csv_field(name), cells.join(",")).unwrap();
            }
        }
    }
    Ok(out)
}

fn parse_cell(s: &str) -> Result<Option<f64>, BenchError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| BenchError::Format(format!("bad number `{s}`")))
}

fn csv_records(text: &str) -> Result<Vec<Vec<String>>, BenchError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    rdr.records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()).map_err(|e| BenchError::Format(e.to_string())))
        .collect()
}

/// Reads a curves CSV written by [`render_csv`].
pub fn parse_curves_csv(text: &str) -> Result<Curves, BenchError> {
    let recs = csv_records(text)?;
    let header = recs.first().ok_or(BenchError::EmptyData)?;
    let mut series: Vec<(String, Vec<f64>)> = header[1..].iter().map(|n| (n.clone(), Vec::new())).collect();
    for rec in &recs[1..] {
        for (j, cell) in rec[1..].iter().enumerate() {
            if let Some(v) = parse_cell(cell)? {
                series.get_mut(j).ok_or_else(|| BenchError::Format("ragged row".into()))?.1.push(v);
            }
        }
    }
    Ok(Curves { title: String::new(), x_label: "t".into(), y_label: String::new(), series })
}

/// Reads a heatmap CSV written by [`render_csv`].
pub fn parse_heatmap_csv(text: &str) -> Result<Heatmap, BenchError> {
    let recs = csv_records(text)?;
    let header = recs.first().ok_or(BenchError::EmptyData)?;
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for rec in &recs[1..] {
        rows.push(rec[0].clone());
        values.push(rec[1..].iter().map(|c| parse_cell(c)).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(Heatmap {
        title: String::new(),
        row_label: header[0].clone(),
        col_label: String::new(),
        rows,
        cols: header[1..].to_vec(),
        values,
    })
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_open(out: &mut String, title: &str) {
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    )
    .unwrap();
    writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>").unwrap();
    writeln!(out, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>", WIDTH / 2.0, esc(title))
        .unwrap();
}

fn render_curves_svg(c: &Curves) -> String {
    let (left, right, top, bottom) = (70.0, 160.0, 40.0, 50.0);
    let (pw, ph) = (WIDTH - left - right, HEIGHT - top - bottom);
    let all = c.series.iter().flat_map(|(_, s)| s.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo <= 0.0 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        (lo, hi) = (lo - pad, hi + pad);
    }
    let len = c.series.iter().map(|(_, s)| s.len()).max().unwrap_or(1);
    let sx = |t: usize| if len <= 1 { left + pw / 2.0 } else { left + pw * t as f64 / (len - 1) as f64 };
    let sy = |v: f64| top + ph * (hi - v) / (hi - lo);

    let mut out = String::new();
    svg_open(&mut out, &c.title);
    writeln!(
        out,
        "<g stroke=\"black\"><line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/><line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\"/></g>",
        top + ph,
        left + pw,
        top + ph,
        top + ph
    )
    .unwrap();
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let y = sy(v);
        writeln!(out, "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>", left - 6.0, y + 4.0, esc(&format!("{v:.4}")))
            .unwrap();
    }
    writeln!(out, "<text x=\"{left}\" y=\"{}\" text-anchor=\"middle\">0</text>", top + ph + 16.0).unwrap();
    writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", left + pw, top + ph + 16.0, len - 1).unwrap();
    writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", left + pw / 2.0, HEIGHT - 12.0, esc(&c.x_label))
        .unwrap();
    writeln!(
        out,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>",
        top + ph / 2.0,
        top + ph / 2.0,
        esc(&c.y_label)
    )
    .unwrap();
    for (k, (name, s)) in c.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> =
            s.iter().enumerate().filter(|(_, v)| v.is_finite()).map(|(t, &v)| format!("{:.2},{:.2}", sx(t), sy(v))).collect();
        writeln!(out, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>", pts.join(" ")).unwrap();
        let ly = top + 14.0 + 18.0 * k as f64;
        let lx = left + pw + 16.0;
        writeln!(
            out,
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"3\"/><text x=\"{}\" y=\"{}\">{}</text>",
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            esc(name)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Red (low) through white to blue (high).
fn diverging(u: f64) -> String {
    let (r0, g0, b0) = (178.0, 24.0, 43.0);
    let (r1, g1, b1) = (33.0, 102.0, 172.0);
    let u = u.clamp(0.0, 1.0);
    let mix = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let (r, g, b) = if u < 0.5 {
        let t = u * 2.0;
        (mix(r0, 255.0, t), mix(g0, 255.0, t), mix(b0, 255.0, t))
    } else {
        let t = (u - 0.5) * 2.0;
        (mix(255.0, r1, t), mix(255.0, g1, t), mix(255.0, b1, t))
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn render_heatmap_svg(h: &Heatmap) -> String {
    let (left, right, top, bottom) = (110.0, 20.0, 40.0, 110.0);
    let (pw, ph) = (WIDTH - left - right, HEIGHT - top - bottom);
    let (cw, ch) = (pw / h.cols.len() as f64, ph / h.rows.len() as f64);
    let vals = h.values.iter().flatten().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let mut out = String::new();
    svg_open(&mut out, &h.title);
    for (i, (name, row)) in h.rows.iter().zip(&h.values).enumerate() {
        let y = top + ch * i as f64;
        writeln!(out, "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>", left - 6.0, y + ch / 2.0 + 4.0, esc(name))
            .unwrap();
        for (j, v) in row.iter().enumerate() {
            let x = left + cw * j as f64;
            let (fill, label) = match v {
                Some(v) if v.is_finite() => {
                    let u = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                    (diverging(u), fmt_annotation(*v))
                }
                _ => ("#cccccc".to_string(), "n/a".to_string()),
            };
            writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cw:.2}\" height=\"{ch:.2}\" fill=\"{fill}\" stroke=\"white\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{label}</text>",
                x + cw / 2.0,
                y + ch / 2.0 + 4.0
            )
            .unwrap();
        }
    }
    for (j, name) in h.cols.iter().enumerate() {
        let x = left + cw * (j as f64 + 0.5);
        let y = top + ph + 10.0;
        writeln!(out, "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"end\" transform=\"rotate(-40 {x:.2} {y:.2})\">{}</text>", esc(name))
            .unwrap();
    }
    writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", left + pw / 2.0, HEIGHT - 8.0, esc(&h.col_label))
        .unwrap();
    writeln!(out, "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">{}</text>", top + ph / 2.0, top + ph / 2.0, esc(&h.row_label))
        .unwrap();
    out.push_str("</svg>\n");
    out
}

pub fn render_svg(data: &PlotData) -> Result<String, BenchError> {
    check_nonempty(data)?;
    Ok(match data {
        PlotData::Curves(c) => render_curves_svg(c),
        PlotData::Heatmap(h) => render_heatmap_svg(h),
    })
}

/// Writes `data` to `path` in `format`.
pub fn emit_plot(data: &PlotData, format: PlotFormat, path: &Path) -> crate::Result<()> {
    let text = match format {
        PlotFormat::Csv => render_csv(data)?,
        PlotFormat::Svg => render_svg(data)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig12_matches_printf_g() {
        assert_eq!(fmt_sig12(1.0), "1");
        assert_eq!(fmt_sig12(0.1), "0.1");
        assert_eq!(fmt_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt_sig12(-2.5e-7), "-2.5e-07");
        assert_eq!(fmt_sig12(0.00012345), "0.00012345");
        assert_eq!(fmt_sig12(999999999999.5), "1e+12");
    }

    #[test]
    fn annotation_is_four_decimals() {
        assert_eq!(fmt_annotation(1.23456), "1.2346");
        assert_eq!(fmt_annotation(1.0), "1.0000");
    }
}
