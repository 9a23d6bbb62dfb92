//! Static SVG line plots of sweep CSVs.
//!
//! The drawing depends only on the CSV text, so re-rendering a saved CSV
//! reproduces the plot byte for byte. One panel per agent; pre-CBDC
//! holdings are dashed, post-CBDC holdings solid.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlotError {
    #[error("sweep CSV: {0}")]
    Csv(String),
    #[error("sweep CSV is missing column `{0}`")]
    MissingColumn(&'static str),
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 440.0;
const PANEL_W: f64 = 400.0;
const PANEL_H: f64 = 300.0;
const TOP: f64 = 50.0;
const LEFTS: [f64; 2] = [70.0, 550.0];

const HOLDINGS: [(&str, &str, &str); 3] = [
    ("a", "risky", "#1b9e77"),
    ("d", "deposits", "#d95f02"),
    ("m", "CBDC", "#7570b3"),
];

struct Row {
    x: f64,
    agent: String,
    economy: String,
    values: [Option<f64>; 3],
}

fn parse(csv_text: &str) -> Result<Vec<Row>, PlotError> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let header = rdr.headers().map_err(|e| PlotError::Csv(e.to_string()))?.clone();
    let col = |name: &'static str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or(PlotError::MissingColumn(name))
    };
    let (ix, ia, ie, ic) = (col("sweep_parameter")?, col("agent")?, col("economy")?, col("converged")?);
    let ih = [col("a")?, col("d")?, col("m")?];
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| PlotError::Csv(e.to_string()))?;
        let num = |i: usize| rec.get(i).and_then(|v| v.parse::<f64>().ok());
        let Some(x) = num(ix) else { continue };
        let ok = rec.get(ic) == Some("true");
        rows.push(Row {
            x,
            agent: rec.get(ia).unwrap_or_default().to_string(),
            economy: rec.get(ie).unwrap_or_default().to_string(),
            values: ih.map(|i| if ok { num(i) } else { None }),
        });
    }
    Ok(rows)
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" { "0.00".to_string() } else { s }
}

/// Renders the holdings in a sweep CSV as an SVG document.
pub fn render_sweep_svg(csv_text: &str) -> Result<String, PlotError> {
    let rows = parse(csv_text)?;
    let xs = rows.iter().map(|r| r.x);
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    let ymax = rows
        .iter()
        .flat_map(|r| r.values.iter().flatten().copied())
        .fold(0.0f64, f64::max);
    let y1 = if ymax > 0.0 { (ymax * 10.0).ceil() / 10.0 } else { 1.0 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let mut agents: Vec<&str> = Vec::new();
    for r in &rows {
        if !agents.contains(&r.agent.as_str()) {
            agents.push(&r.agent);
        }
    }
    for (panel, agent) in agents.iter().take(2).enumerate() {
        let left = LEFTS[panel];
        let px = |x: f64| left + (x - x0) / (x1 - x0) * PANEL_W;
        let py = |y: f64| TOP + PANEL_H - y / y1 * PANEL_H;

        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{agent}</text>"#,
            left + PANEL_W / 2.0,
            TOP - 15.0
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{left:.2}" y="{TOP:.2}" width="{PANEL_W:.2}" height="{PANEL_H:.2}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * f64::from(k) / 4.0;
            let fy = y1 * f64::from(k) / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                px(fx),
                TOP + PANEL_H + 18.0,
                tick_label(fx)
            );
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
                left,
                py(fy),
                left + PANEL_W,
                py(fy)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                left - 6.0,
                py(fy) + 4.0,
                tick_label(fy)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">sweep_parameter</text>"#,
            left + PANEL_W / 2.0,
            TOP + PANEL_H + 36.0
        );

        for economy in ["pre_cbdc", "with_cbdc"] {
            let dash = if economy == "pre_cbdc" { r#" stroke-dasharray="6 4""# } else { "" };
            for (h, (_, _, color)) in HOLDINGS.iter().enumerate() {
                let series: Vec<(f64, Option<f64>)> = rows
                    .iter()
                    .filter(|r| r.agent == *agent && r.economy == economy)
                    .map(|r| (r.x, r.values[h]))
                    .collect();
                // Holdings that are identically zero (unavailable assets) are not drawn.
                if series.iter().all(|(_, v)| v.is_none_or(|v| v == 0.0)) {
                    continue;
                }
                let mut segments: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
                for (x, v) in series {
                    match v {
                        Some(v) => segments.last_mut().expect("nonempty").push((px(x), py(v))),
                        None if !segments.last().expect("nonempty").is_empty() => segments.push(Vec::new()),
                        None => {}
                    }
                }
                for seg in segments.iter().filter(|s| !s.is_empty()) {
                    if seg.len() == 1 {
                        let _ = writeln!(
                            svg,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                            seg[0].0, seg[0].1
                        );
                        continue;
                    }
                    let pts: Vec<String> = seg.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(
                        svg,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
                        pts.join(" ")
                    );
                }
            }
        }
    }

    let legend_y = HEIGHT - 20.0;
    for (i, (_, label, color)) in HOLDINGS.iter().enumerate() {
        let x = 70.0 + 140.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="{color}" stroke-width="2"/>"#,
            x + 24.0
        );
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{label}</text>"#, x + 30.0, legend_y + 4.0);
    }
    let x = 70.0 + 140.0 * 3.0;
    let _ = writeln!(
        svg,
        r#"<line x1="{x:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="black" stroke-dasharray="6 4"/>"#,
        x + 24.0
    );
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">pre-CBDC</text>"#, x + 30.0, legend_y + 4.0);
    svg.push_str("</svg>\n");
    Ok(svg)
}
