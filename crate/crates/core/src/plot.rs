//! SVG heatmaps of aggregated grids: prior mean along x, c along y.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::experiments::{CellSummary, GridResult};

/// An RGB colour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }

    fn lerp(self, other: Rgb, t: f64) -> Rgb {
        let t = t.clamp(0.0, 1.0);
        let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
        Rgb(mix(self.0, other.0), mix(self.1, other.1), mix(self.2, other.2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Palette {
    /// Low-to-high ramp for plain metrics.
    Sequential,
    /// Negative and positive values on opposite hues, zero at the midpoint.
    Diverging,
}

/// Fixed colour anchors and geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub low: Rgb,
    pub high: Rgb,
    pub negative: Rgb,
    pub neutral: Rgb,
    pub positive: Rgb,
    pub cell_width: u32,
    pub cell_height: u32,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            low: Rgb(0xf7, 0xfb, 0xff),
            high: Rgb(0x08, 0x51, 0x9c),
            negative: Rgb(0xb2, 0x18, 0x2b),
            neutral: Rgb(0xf7, 0xf7, 0xf7),
            positive: Rgb(0x1a, 0x98, 0x50),
            cell_width: 80,
            cell_height: 50,
        }
    }
}

impl PlotStyle {
    fn color(&self, palette: Palette, v: f64, lo: f64, hi: f64) -> Rgb {
        match palette {
            Palette::Sequential => {
                let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                self.low.lerp(self.high, t)
            }
            Palette::Diverging => {
                let scale = lo.abs().max(hi.abs());
                if v == 0.0 || scale == 0.0 {
                    self.neutral
                } else if v > 0.0 {
                    self.neutral.lerp(self.positive, v / scale)
                } else {
                    self.neutral.lerp(self.negative, -v / scale)
                }
            }
        }
    }
}

/// Diff grids carry an `a-b` variant label.
pub fn default_palette(grid: &GridResult) -> Palette {
    if grid.cells.iter().any(|c| c.variant.contains('-')) {
        Palette::Diverging
    } else {
        Palette::Sequential
    }
}

fn sorted_unique(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Renders one metric of a single-variant grid.
pub fn heatmap_svg(grid: &GridResult, metric: &str, palette: Palette, style: &PlotStyle) -> Result<String> {
    let variants = grid.variants();
    if variants.len() > 1 {
        return Err(Error::GridMismatch(format!(
            "grid holds {} variants; select one before plotting",
            variants.len()
        )));
    }
    let values: Vec<f64> = grid
        .cells
        .iter()
        .map(|c| c.metric(metric).map(|s| s.mean))
        .collect::<Result<_>>()?;
    // a grid without cells still has to name a valid metric
    CellSummary::metric_known(metric)?;

    let xs = sorted_unique(grid.cells.iter().map(|c| c.prior.mean()).collect());
    let ys = sorted_unique(grid.cells.iter().map(|c| c.c).collect());
    let mut slots = vec![None; xs.len() * ys.len()];
    for (cell, &v) in grid.cells.iter().zip(&values) {
        let xi = xs.iter().position(|&x| x == cell.prior.mean()).expect("collected above");
        let yi = ys.iter().position(|&y| y == cell.c).expect("collected above");
        if slots[yi * xs.len() + xi].replace(v).is_some() {
            return Err(invalid(format!(
                "two cells share c={} and prior mean {:.3}",
                cell.c,
                cell.prior.mean()
            )));
        }
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let (cw, ch) = (style.cell_width, style.cell_height);
    let (left, top) = (70u32, 40u32);
    let width = left + cw * xs.len() as u32 + 20;
    let height = top + ch * ys.len() as u32 + 50;
    let title = match variants.first() {
        Some(v) => format!("{metric} ({v})"),
        None => metric.to_string(),
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<title>{title}</title>"#);
    let _ = writeln!(svg, r#"<text x="{left}" y="20" font-size="14">{title}</text>"#);
    for (yi, &c) in ys.iter().enumerate() {
        // c ascends upward
        let y = top + ch * (ys.len() - 1 - yi) as u32;
        let _ = writeln!(
            svg,
            r#"<text class="ylabel" x="{}" y="{}" text-anchor="end">c={c}</text>"#,
            left - 6,
            y + ch / 2 + 4
        );
        for (xi, _) in xs.iter().enumerate() {
            let Some(v) = slots[yi * xs.len() + xi] else { continue };
            let x = left + cw * xi as u32;
            let fill = style.color(palette, v, lo, hi).hex();
            let _ = writeln!(
                svg,
                r##"<rect class="cell" x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}" stroke="#ffffff"/>"##
            );
            let _ = writeln!(
                svg,
                r#"<text class="value" x="{}" y="{}" text-anchor="middle">{v:.3}</text>"#,
                x + cw / 2,
                y + ch / 2 + 4
            );
        }
    }
    let base = top + ch * ys.len() as u32;
    for (xi, &m) in xs.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text class="xlabel" x="{}" y="{}" text-anchor="middle">{m:.2}</text>"#,
            left + cw * xi as u32 + cw / 2,
            base + 16
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">prior mean trust</text>"#,
        left + cw * xs.len() as u32 / 2,
        base + 36
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

impl CellSummary {
    fn metric_known(name: &str) -> Result<()> {
        if crate::experiments::METRICS.contains(&name) {
            Ok(())
        } else {
            Err(invalid(format!(
                "unknown metric '{name}' (expected org_utility, fairness or avg_trust)"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::BetaSpec;
    use crate::experiments::Summary;

    fn grid(variant: &str, f: impl Fn(f64, f64) -> f64) -> GridResult {
        let spec = crate::experiments::GridSpec::default();
        let mut cells = Vec::new();
        for &c in &spec.c_values {
            for prior in &spec.priors {
                let v = f(c, prior.mean());
                let s = Summary { mean: v, stderr: 0.0 };
                cells.push(CellSummary {
                    variant: variant.to_string(),
                    c,
                    prior: *prior,
                    org_utility: s,
                    fairness: s,
                    avg_trust: s,
                });
            }
        }
        GridResult { cells }
    }

    fn count(svg: &str, needle: &str) -> usize {
        svg.matches(needle).count()
    }

    #[test]
    fn one_rect_per_cell() {
        let svg = heatmap_svg(&grid("aware", |c, m| c * m), "avg_trust", Palette::Sequential, &PlotStyle::default()).unwrap();
        assert_eq!(count(&svg, r#"<rect class="cell""#), 35);
        assert_eq!(count(&svg, r#"<text class="value""#), 35);
    }

    #[test]
    fn zero_diff_is_all_neutral() {
        let g = grid("aware-unaware", |_, _| 0.0);
        assert_eq!(default_palette(&g), Palette::Diverging);
        let style = PlotStyle::default();
        let svg = heatmap_svg(&g, "org_utility", Palette::Diverging, &style).unwrap();
        let neutral = format!(r#"fill="{}""#, style.neutral.hex());
        assert_eq!(count(&svg, &neutral), 35);
    }

    #[test]
    fn diverging_separates_signs() {
        let style = PlotStyle::default();
        let neg = style.color(Palette::Diverging, -0.5, -0.5, 0.5);
        let pos = style.color(Palette::Diverging, 0.5, -0.5, 0.5);
        assert_eq!(neg, style.negative);
        assert_eq!(pos, style.positive);
    }

    #[test]
    fn value_text_has_three_decimals() {
        let g = grid("learned", |c, m| c + m / 7.0);
        let svg = heatmap_svg(&g, "fairness", Palette::Sequential, &PlotStyle::default()).unwrap();
        for cell in &g.cells {
            let text = format!(">{:.3}</text>", cell.fairness.mean);
            assert!(svg.contains(&text), "{text}");
        }
    }

    #[test]
    fn unknown_metric_rejected() {
        let g = grid("aware", |_, _| 0.1);
        assert!(heatmap_svg(&g, "happiness", Palette::Sequential, &PlotStyle::default()).is_err());
        assert!(heatmap_svg(&GridResult::default(), "happiness", Palette::Sequential, &PlotStyle::default()).is_err());
    }

    #[test]
    fn multi_variant_grid_rejected() {
        let mut g = grid("aware", |_, _| 0.1);
        g.cells.extend(grid("unaware", |_, _| 0.1).cells);
        assert!(heatmap_svg(&g, "fairness", Palette::Sequential, &PlotStyle::default()).is_err());
    }

    #[test]
    fn c_ascends_upward_and_prior_mean_rightward() {
        let mut g = grid("aware", |_, _| 0.0);
        g.cells.retain(|c| (c.c == 0.0 || c.c == 1.0) && (c.prior == BetaSpec { a: 2.0, b: 8.0 } || c.prior == BetaSpec { a: 8.0, b: 2.0 }));
        for cell in &mut g.cells {
            cell.avg_trust.mean = cell.c * 10.0 + cell.prior.mean();
        }
        let svg = heatmap_svg(&g, "avg_trust", Palette::Sequential, &PlotStyle::default()).unwrap();
        let pos = |value: &str| -> (u32, u32) {
            let line = svg.lines().find(|l| l.ends_with(&format!(">{value}</text>"))).unwrap();
            let attr = |name: &str| {
                let rest = &line[line.find(&format!(" {name}=\"")).unwrap() + name.len() + 3..];
                rest[..rest.find('"').unwrap()].parse().unwrap()
            };
            (attr("x"), attr("y"))
        };
        let (low_left, low_right) = (pos("0.200"), pos("0.800"));
        let (high_left, high_right) = (pos("10.200"), pos("10.800"));
        // svg y grows downward
        assert!(high_left.1 < low_left.1 && high_right.1 < low_right.1);
        assert!(low_left.0 < low_right.0 && high_left.0 < high_right.0);
    }
}
