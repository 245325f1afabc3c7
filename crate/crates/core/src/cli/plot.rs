use crate::data::{NormalizedSeries, RiskLabels};
use crate::error::{Error, Result};
use std::fmt::Write as _;

const WIDTH: f64 = 1200.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 2] = ["#1f77b4", "#ff7f0e"];

/// `date,z_ch1,z_ch2,risk` with risk `1`, `0`, or `NA` during label warm-up.
pub fn plot_csv(normalized: &NormalizedSeries, labels: &RiskLabels) -> Result<String> {
    check(normalized, labels)?;
    let mut out = String::from("date,z_ch1,z_ch2,risk\n");
    for (t, date) in normalized.dates.iter().enumerate() {
        let risk = match labels.labels[t] {
            Some(true) => "1",
            Some(false) => "0",
            None => "NA",
        };
        writeln!(out, "{date},{:.6},{:.6},{risk}", normalized.z[0][t], normalized.z[1][t]).unwrap();
    }
    Ok(out)
}

/// Both channels as polylines over the day index, with a square marker on
/// channel 1 for every high-risk day.
pub fn plot_svg(normalized: &NormalizedSeries, labels: &RiskLabels) -> Result<String> {
    check(normalized, labels)?;
    let n = normalized.len();
    let values = || normalized.z.iter().flat_map(|ch| ch.iter().copied());
    let lo = values().fold(f64::INFINITY, f64::min).min(-1.0);
    let hi = values().fold(f64::NEG_INFINITY, f64::max).max(1.0);
    let x = |t: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * t as f64 / (n.max(2) - 1) as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r##"<line x1="{MARGIN}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#999" stroke-width="0.5"/>"##,
        y(0.0),
        WIDTH - MARGIN
    )
    .unwrap();
    for (c, color) in COLORS.iter().enumerate() {
        let points: Vec<String> =
            (0..n).map(|t| format!("{:.2},{:.2}", x(t), y(normalized.z[c][t]))).collect();
        writeln!(
            svg,
            r#"<polyline class="ab-ch{}" fill="none" stroke="{color}" stroke-width="0.8" points="{}"/>"#,
            c + 1,
            points.join(" ")
        )
        .unwrap();
    }
    for t in (0..n).filter(|&t| labels.labels[t] == Some(true)) {
        writeln!(
            svg,
            r#"<rect class="high-risk" x="{:.2}" y="{:.2}" width="4" height="4" fill="red"/>"#,
            x(t) - 2.0,
            y(normalized.z[0][t]) - 2.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="12">A+B ch1 / ch2 (z-score), high-risk days marked</text>"#
    )
    .unwrap();
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn check(normalized: &NormalizedSeries, labels: &RiskLabels) -> Result<()> {
    if normalized.channels() != 2 {
        return Err(Error::Shape(format!("plot export expects 2 channels, got {}", normalized.channels())));
    }
    if labels.labels.len() != normalized.len() {
        return Err(Error::Shape(format!("{} labels for {} days", labels.labels.len(), normalized.len())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{label_days, zscore_normalize, LabelConfig};
    use crate::synth::{generate_patient, SynthConfig};

    #[test]
    fn rows_markers_and_schema() {
        let series = generate_patient(&SynthConfig { seed: 3, days: 200, ..Default::default() }).unwrap();
        let labels = label_days(&series, LabelConfig::default()).unwrap();
        let norm = zscore_normalize(&series);
        let csv = plot_csv(&norm, &labels).unwrap();
        assert_eq!(csv.lines().count(), 201);
        assert!(csv.starts_with("date,z_ch1,z_ch2,risk\n"));
        let svg = plot_svg(&norm, &labels).unwrap();
        assert_eq!(svg.matches("class=\"high-risk\"").count(), labels.high_risk_days());
        assert_eq!(svg.matches("<polyline").count(), 2);

        let quiet = SynthConfig {
            seed: 3,
            days: 200,
            weekly_amplitude: 0.0,
            multiweek_amplitude: 0.0,
            noise_scale: 0.0,
            ..Default::default()
        };
        let series = generate_patient(&quiet).unwrap();
        let labels = label_days(&series, LabelConfig::default()).unwrap();
        let svg = plot_svg(&zscore_normalize(&series), &labels).unwrap();
        assert!(!svg.contains("high-risk\""));
    }
}
