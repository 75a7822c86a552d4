//! PNG charts: reward curves and latency/energy bars.
//!
//! Text needs a TrueType font, loaded once at runtime from `EDGECOOP_FONT`
//! or a common system path. Without one the charts are drawn unlabelled.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use plotters::prelude::*;
use plotters::style::FontStyle;

use crate::error::{Error, Result};

const FONT_FAMILY: &str = "sans-serif";
const FONT_PATHS: [&str; 3] = [
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/TTF/DejaVuSans.ttf",
];
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

/// Registers a font on first use; true when text can be drawn.
pub fn fonts_available() -> bool {
    static LOADED: OnceLock<bool> = OnceLock::new();
    *LOADED.get_or_init(|| {
        let env = std::env::var_os("EDGECOOP_FONT").map(PathBuf::from);
        let candidates = env.into_iter().chain(FONT_PATHS.iter().map(PathBuf::from));
        for path in candidates {
            if let Ok(bytes) = std::fs::read(&path) {
                let bytes: &'static [u8] = Box::leak(bytes.into_boxed_slice());
                if plotters::style::register_font(FONT_FAMILY, FontStyle::Normal, bytes).is_ok() {
                    return true;
                }
            }
        }
        log::warn!("no usable font found; plots will have no text (set EDGECOOP_FONT to a .ttf file)");
        false
    })
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn plot_err(path: &Path) -> impl Fn(String) -> Error + '_ {
    move |msg| Error::Plot { path: path.into(), msg }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// One line per series on shared axes.
pub fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let err = plot_err(path);
    let text = fonts_available();
    let root = BitMapBackend::new(path, (960, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let mut builder = ChartBuilder::on(&root);
    builder.margin(15).x_label_area_size(if text { 45 } else { 10 }).y_label_area_size(if text { 70 } else { 10 });
    if text {
        builder.caption(title, (FONT_FAMILY, 24));
    }
    let mut chart = builder.build_cartesian_2d(x0..x1, y0..y1).map_err(|e| err(e.to_string()))?;
    let mut mesh = chart.configure_mesh();
    if text {
        mesh.x_desc(x_label).y_desc(y_label).label_style((FONT_FAMILY, 14));
    } else {
        mesh.x_labels(0).y_labels(0);
    }
    mesh.draw().map_err(|e| err(e.to_string()))?;
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let drawn = chart
            .draw_series(LineSeries::new(s.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()), color.stroke_width(2)))
            .map_err(|e| err(e.to_string()))?;
        if text {
            drawn.label(s.name.as_str()).legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        }
    }
    if text && !series.is_empty() {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .label_font((FONT_FAMILY, 14))
            .draw()
            .map_err(|e| err(e.to_string()))?;
    }
    root.present().map_err(|e| err(e.to_string()))
}

/// A bar panel: one `(mean, deviation)` per category.
pub struct BarPanel {
    pub title: String,
    pub values: Vec<(f64, f64)>,
}

/// Side-by-side bar charts sharing categories, with deviation whiskers.
pub fn bar_panels(path: &Path, categories: &[String], panels: &[BarPanel]) -> Result<()> {
    let err = plot_err(path);
    let text = fonts_available();
    let root = BitMapBackend::new(path, (480 * panels.len().max(1) as u32, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let areas = root.split_evenly((1, panels.len().max(1)));
    let n = categories.len();
    for (area, panel) in areas.iter().zip(panels) {
        let top = panel.values.iter().map(|(m, s)| m + s.max(0.0)).filter(|v| v.is_finite()).fold(0.0, f64::max);
        let top = if top > 0.0 { top * 1.1 } else { 1.0 };
        let mut builder = ChartBuilder::on(area);
        builder.margin(15).x_label_area_size(if text { 35 } else { 10 }).y_label_area_size(if text { 70 } else { 10 });
        if text {
            builder.caption(&panel.title, (FONT_FAMILY, 20));
        }
        let mut chart = builder.build_cartesian_2d(-0.5..(n as f64 - 0.5), 0.0..top).map_err(|e| err(e.to_string()))?;
        let label = |x: &f64| {
            let i = x.round();
            if (x - i).abs() < 1e-6 && i >= 0.0 { categories.get(i as usize).cloned().unwrap_or_default() } else { String::new() }
        };
        let mut mesh = chart.configure_mesh();
        mesh.disable_x_mesh();
        if text {
            mesh.x_labels(n).x_label_formatter(&label).label_style((FONT_FAMILY, 14));
            mesh.draw().map_err(|e| err(e.to_string()))?;
        } else {
            mesh.x_labels(0).y_labels(0).draw().map_err(|e| err(e.to_string()))?;
        }
        for (i, &(mean, dev)) in panel.values.iter().enumerate() {
            if !mean.is_finite() {
                continue;
            }
            let x = i as f64;
            let color = PALETTE[i % PALETTE.len()];
            chart
                .draw_series(std::iter::once(Rectangle::new([(x - 0.3, 0.0), (x + 0.3, mean)], color.filled())))
                .map_err(|e| err(e.to_string()))?;
            if dev.is_finite() && dev > 0.0 {
                chart
                    .draw_series(std::iter::once(PathElement::new(vec![(x, (mean - dev).max(0.0)), (x, mean + dev)], BLACK.stroke_width(2))))
                    .map_err(|e| err(e.to_string()))?;
            }
        }
    }
    root.present().map_err(|e| err(e.to_string()))
}
