use std::fmt::Write as _;
use std::io::Write;

use super::{fill, ExportOptions, Exporter, Heatmap};
use crate::error::{Error, Result};
use crate::geocode::decode;
use crate::registry::Named;

pub const MIN_SVG_WIDTH: u32 = 64;

/// Spreadsheet-style label: 0 -> A, 25 -> Z, 26 -> AA.
fn alpha(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'A' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

/// Cell labels in reading order: northernmost row first, west to east.
/// Returned in heatmap cell order.
pub fn cell_labels(h: &Heatmap) -> Vec<String> {
    let mut order: Vec<usize> = (0..h.cells.len()).collect();
    let idx: Vec<(u64, u64)> = h.cells.iter().map(|c| c.geohash.indices()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(idx[i].1), idx[i].0));
    let mut labels = vec![String::new(); h.cells.len()];
    for (rank, i) in order.into_iter().enumerate() {
        labels[i] = alpha(rank);
    }
    labels
}

/// Equirectangular rendering with longitude scaled by the cosine of the
/// central latitude.
pub fn render_svg(h: &Heatmap, opts: &ExportOptions) -> Result<String> {
    if opts.width_px < MIN_SVG_WIDTH {
        return Err(Error::InvalidSize(format!("width {} below {MIN_SVG_WIDTH} px", opts.width_px)));
    }
    let bounds: Vec<_> = h.cells.iter().map(|c| decode(&c.geohash)).collect();
    let (mut lat_min, mut lat_max, mut lon_min, mut lon_max) = (90.0f64, -90.0f64, 180.0f64, -180.0f64);
    for b in &bounds {
        lat_min = lat_min.min(b.lat_min);
        lat_max = lat_max.max(b.lat_max);
        lon_min = lon_min.min(b.lon_min);
        lon_max = lon_max.max(b.lon_max);
    }
    let width = f64::from(opts.width_px);
    let k = ((lat_min + lat_max) / 2.0).to_radians().cos().max(1e-6);
    let (scale, height) = if bounds.is_empty() {
        (0.0, width)
    } else {
        let scale = width / ((lon_max - lon_min) * k);
        (scale, ((lat_max - lat_min) * scale).round().max(1.0))
    };
    let x = |lon: f64| (lon - lon_min) * k * scale;
    let y = |lat: f64| (lat_max - lat) * scale;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{hgt}" viewBox="0 0 {w} {hgt}">"#,
        w = opts.width_px,
        hgt = height
    );
    let labels = if opts.labels { cell_labels(h) } else { Vec::new() };
    let font = bounds.first().map(|b| ((b.lat_max - b.lat_min) * scale * 0.3).clamp(6.0, 48.0)).unwrap_or(12.0);
    for (i, (c, b)) in h.cells.iter().zip(&bounds).enumerate() {
        let (x0, x1, y0, y1) = (x(b.lon_min), x(b.lon_max), y(b.lat_max), y(b.lat_min));
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.6" stroke="#333333" stroke-width="1"><title>{} {}</title></rect>"##,
            x0,
            y0,
            x1 - x0,
            y1 - y0,
            fill(c.predicted),
            c.geohash,
            c.predicted
        );
        if let Some(label) = labels.get(i) {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="{:.1}" text-anchor="middle" dominant-baseline="central">{}</text>"#,
                (x0 + x1) / 2.0,
                (y0 + y1) / 2.0,
                font,
                label
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub struct SvgExporter;

impl Named for SvgExporter {
    fn name(&self) -> &'static str {
        "svg"
    }
}

impl Exporter for SvgExporter {
    fn media_type(&self) -> &'static str {
        "image/svg+xml"
    }

    fn extension(&self) -> &'static str {
        "svg"
    }

    fn export(&self, h: &Heatmap, opts: &ExportOptions, out: &mut dyn Write) -> Result<()> {
        out.write_all(render_svg(h, opts)?.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::Label;
    use crate::heatmap::fixtures::block;
    use crate::heatmap::{HIGH_FILL, LOW_FILL};

    #[test]
    fn three_by_three_labels() {
        let h = block(3, 3, |_| Label::Low);
        let svg = render_svg(&h, &ExportOptions::default()).unwrap();
        assert_eq!(svg.matches("<rect").count(), 9);
        for l in ["A", "B", "C", "D", "E", "F", "G", "H", "I"] {
            assert!(svg.contains(&format!(">{l}</text>")), "{l}");
        }
        // cells are stored south row first, labels start in the north-west
        assert_eq!(cell_labels(&h), vec!["G", "H", "I", "D", "E", "F", "A", "B", "C"]);
    }

    #[test]
    fn all_low_shares_fill() {
        let h = block(2, 3, |_| Label::Low);
        let svg = render_svg(&h, &ExportOptions::default()).unwrap();
        assert_eq!(svg.matches(LOW_FILL).count(), 6);
        assert!(!svg.contains(HIGH_FILL));
    }

    #[test]
    fn deterministic_and_bounded() {
        let h = block(2, 2, |i| if i == 1 { Label::High } else { Label::Low });
        let opts = ExportOptions { width_px: 200, labels: false };
        let a = render_svg(&h, &opts).unwrap();
        assert_eq!(a, render_svg(&h, &opts).unwrap());
        assert!(!a.contains("<text"));
        assert!(a.contains(r#"width="200""#));
        assert!(matches!(render_svg(&h, &ExportOptions { width_px: 63, labels: true }), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn long_labels() {
        assert_eq!(alpha(0), "A");
        assert_eq!(alpha(25), "Z");
        assert_eq!(alpha(26), "AA");
        assert_eq!(alpha(27), "AB");
        assert_eq!(alpha(26 + 26 * 26), "AAA");
    }
}
