//! Single-line plot rendering to PNG.

use image::codecs::png::PngEncoder;
use image::{ImageEncoder, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CANVAS_WIDTH: u32 = 448;
pub const CANVAS_HEIGHT: u32 = 224;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotStyle {
    pub line: [u8; 3],
    pub grid: bool,
    pub margin: u32,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            line: [31, 119, 180],
            grid: false,
            margin: 12,
        }
    }
}

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);

/// Pixel coordinates of each sample. A series with zero range sits on the
/// middle row.
pub fn plot_points(series: &[f64], style: &PlotStyle) -> Vec<(i64, i64)> {
    let (w, h, m) = (CANVAS_WIDTH as f64, CANVAS_HEIGHT as f64, style.margin as f64);
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = series.len();
    series
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = m + (w - 1.0 - 2.0 * m) * i as f64 / (n - 1) as f64;
            let y = if max > min {
                (h - 1.0 - m) - (h - 1.0 - 2.0 * m) * (v - min) / (max - min)
            } else {
                ((CANVAS_HEIGHT - 1) / 2) as f64
            };
            (x.round() as i64, y.round() as i64)
        })
        .collect()
}

fn draw_segment(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = ((x1 - x0).signum(), (y1 - y0).signum());
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

pub fn render_image(series: &[f64], style: &PlotStyle) -> Result<RgbImage> {
    if series.len() < 2 {
        return Err(Error::invalid("need at least 2 points to render"));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cannot render non-finite values"));
    }
    let mut img = RgbImage::from_pixel(CANVAS_WIDTH, CANVAS_HEIGHT, WHITE);
    if style.grid {
        for gx in (0..CANVAS_WIDTH).step_by(56) {
            draw_segment(&mut img, (gx as i64, 0), (gx as i64, CANVAS_HEIGHT as i64 - 1), GRID);
        }
        for gy in (0..CANVAS_HEIGHT).step_by(56) {
            draw_segment(&mut img, (0, gy as i64), (CANVAS_WIDTH as i64 - 1, gy as i64), GRID);
        }
    }
    let pts = plot_points(series, style);
    for w in pts.windows(2) {
        draw_segment(&mut img, w[0], w[1], Rgb(style.line));
    }
    Ok(img)
}

/// PNG bytes of a 448×224 single-line plot on white.
pub fn render_series(series: &[f64], style: &PlotStyle) -> Result<Vec<u8>> {
    let img = render_image(series, style)?;
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::Image(e.to_string()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_rows(img: &RgbImage, x: u32) -> Vec<u32> {
        (0..img.height())
            .filter(|&y| *img.get_pixel(x, y) != WHITE)
            .collect()
    }

    #[test]
    fn constant_series_is_mid_height() {
        let style = PlotStyle::default();
        let img = render_image(&[3.0; 10], &style).unwrap();
        let x = CANVAS_WIDTH / 2;
        assert_eq!(line_rows(&img, x), vec![(CANVAS_HEIGHT - 1) / 2]);
    }

    #[test]
    fn identical_inputs_identical_bytes() {
        let s: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let a = render_series(&s, &PlotStyle::default()).unwrap();
        let b = render_series(&s, &PlotStyle::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[1..4], b"PNG");
    }

    #[test]
    fn increasing_line_rises_left_to_right() {
        let s: Vec<f64> = (0..30).map(f64::from).collect();
        let png = render_series(&s, &PlotStyle::default()).unwrap();
        let img = image::load_from_memory(&png).unwrap().to_rgb8();
        assert_eq!((img.width(), img.height()), (CANVAS_WIDTH, CANVAS_HEIGHT));
        let m = PlotStyle::default().margin;
        let first = line_rows(&img, m);
        let last = line_rows(&img, CANVAS_WIDTH - 1 - m);
        assert!(!first.is_empty() && !last.is_empty());
        // y grows downward
        assert!(first.iter().min() > last.iter().max());
    }

    #[test]
    fn grid_draws_extra_pixels() {
        let s = [0.0, 1.0];
        let plain = render_image(&s, &PlotStyle::default()).unwrap();
        let grid = render_image(
            &s,
            &PlotStyle {
                grid: true,
                ..PlotStyle::default()
            },
        )
        .unwrap();
        let count = |img: &RgbImage| img.pixels().filter(|p| **p != WHITE).count();
        assert!(count(&grid) > count(&plain));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(render_series(&[1.0], &PlotStyle::default()).is_err());
        assert!(render_series(&[1.0, f64::NAN], &PlotStyle::default()).is_err());
    }
}
