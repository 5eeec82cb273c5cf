//! Built-in placeholder art, drawn procedurally so the generator works
//! without any imported images.

use alloc::string::String;
use alloc::vec::Vec;

use crate::raster::{Raster, Rgba, TRANSPARENT};

/// The eight symbol categories of the default symbol set.
pub const SYMBOL_CATEGORIES: [&str; 8] = [
    "anger",
    "quick_moving",
    "slow_moving",
    "anxious",
    "collision",
    "relieved",
    "shock",
    "big_shock",
];

const INK: Rgba = [30, 30, 40, 255];

pub fn character(body: Rgba) -> Raster {
    let mut r = Raster::new(96, 96, TRANSPARENT);
    r.fill_circle(48.0, 52.0, 40.0, INK);
    r.fill_circle(48.0, 52.0, 37.0, body);
    r.fill_circle(36.0, 44.0, 7.0, [255, 255, 255, 255]);
    r.fill_circle(60.0, 44.0, 7.0, [255, 255, 255, 255]);
    r.fill_circle(37.0, 45.0, 3.5, INK);
    r.fill_circle(61.0, 45.0, 3.5, INK);
    r.line(38.0, 68.0, 58.0, 68.0, 3.0, INK);
    r
}

pub fn scene(name: &str) -> Raster {
    let (w, h) = (256u32, 256u32);
    let (sky, ground): (Rgba, Rgba) = match name {
        "garden" => ([170, 215, 250, 255], [120, 190, 90, 255]),
        "forest" => ([150, 190, 170, 255], [50, 110, 60, 255]),
        "room" => ([235, 222, 200, 255], [160, 120, 90, 255]),
        "beach" => ([140, 200, 245, 255], [235, 215, 160, 255]),
        _ => ([200, 200, 200, 255], [150, 150, 150, 255]),
    };
    let mut r = Raster::new(w, h, sky);
    r.fill_rect(0, 170, i64::from(w), i64::from(h), ground);
    match name {
        "garden" => {
            for (i, x) in [30.0, 90.0, 150.0, 215.0].iter().enumerate() {
                let petal: Rgba = if i % 2 == 0 {
                    [240, 90, 120, 255]
                } else {
                    [250, 210, 60, 255]
                };
                r.line(*x, 200.0, *x, 185.0, 3.0, [40, 120, 40, 255]);
                r.fill_circle(*x, 182.0, 6.0, petal);
            }
            r.fill_circle(220.0, 40.0, 18.0, [255, 230, 120, 255]);
        }
        "forest" => {
            for x in [20.0, 75.0, 140.0, 200.0, 245.0] {
                r.fill_rect(x as i64 - 5, 110, x as i64 + 5, 175, [100, 70, 40, 255]);
                r.fill_polygon(
                    &[(x - 30.0, 130.0), (x + 30.0, 130.0), (x, 40.0)],
                    [30, 90, 45, 255],
                );
            }
        }
        "room" => {
            r.fill_rect(40, 50, 120, 120, [170, 210, 240, 255]);
            r.line(80.0, 50.0, 80.0, 120.0, 3.0, [250, 250, 250, 255]);
            r.line(40.0, 85.0, 120.0, 85.0, 3.0, [250, 250, 250, 255]);
            r.fill_rect(160, 120, 230, 175, [120, 80, 50, 255]);
        }
        "beach" => {
            r.fill_rect(0, 150, i64::from(w), 172, [60, 130, 200, 255]);
            r.fill_circle(40.0, 45.0, 20.0, [255, 220, 100, 255]);
        }
        _ => {}
    }
    r
}

pub fn object(name: &str) -> Raster {
    let mut r = Raster::new(48, 48, TRANSPARENT);
    match name {
        "apple" => {
            r.fill_circle(24.0, 28.0, 16.0, [210, 40, 40, 255]);
            r.line(24.0, 12.0, 27.0, 5.0, 3.0, [90, 60, 30, 255]);
            r.fill_circle(31.0, 9.0, 4.0, [60, 150, 60, 255]);
        }
        "tree" => {
            r.fill_rect(20, 28, 28, 48, [110, 75, 40, 255]);
            r.fill_circle(24.0, 18.0, 16.0, [50, 140, 60, 255]);
        }
        "rock" => {
            r.fill_polygon(
                &[
                    (4.0, 44.0),
                    (10.0, 22.0),
                    (26.0, 14.0),
                    (42.0, 24.0),
                    (45.0, 44.0),
                ],
                [130, 130, 135, 255],
            );
        }
        "flower" => {
            r.line(24.0, 46.0, 24.0, 22.0, 3.0, [50, 130, 50, 255]);
            for (dx, dy) in [(-7.0, 0.0), (7.0, 0.0), (0.0, -7.0), (0.0, 7.0)] {
                r.fill_circle(24.0 + dx, 16.0 + dy, 6.0, [240, 120, 180, 255]);
            }
            r.fill_circle(24.0, 16.0, 4.0, [250, 220, 60, 255]);
        }
        "ball" => {
            r.fill_circle(24.0, 24.0, 18.0, [60, 110, 220, 255]);
            r.line(8.0, 24.0, 40.0, 24.0, 3.0, [250, 250, 250, 255]);
        }
        _ => r.fill_rect(8, 8, 40, 40, [120, 120, 120, 255]),
    }
    r
}

pub fn symbol(name: &str) -> Raster {
    let mut r = Raster::new(48, 48, TRANSPARENT);
    let red: Rgba = [220, 30, 40, 255];
    match name {
        "anger" => {
            // Four bent strokes forming the cross-vein mark.
            for (ax, ay, bx, by) in [
                (10.0, 20.0, 20.0, 20.0),
                (20.0, 20.0, 20.0, 10.0),
                (28.0, 10.0, 28.0, 20.0),
                (28.0, 20.0, 38.0, 20.0),
                (10.0, 28.0, 20.0, 28.0),
                (20.0, 28.0, 20.0, 38.0),
                (28.0, 38.0, 28.0, 28.0),
                (28.0, 28.0, 38.0, 28.0),
            ] {
                r.line(ax, ay, bx, by, 4.0, red);
            }
        }
        "quick_moving" => {
            for (i, y) in [10.0, 18.0, 26.0, 34.0, 42.0].iter().enumerate() {
                let start = if i % 2 == 0 { 4.0 } else { 14.0 };
                r.line(start, *y, 44.0, *y, 2.5, INK);
            }
        }
        "slow_moving" => {
            for y in [14.0, 26.0, 38.0] {
                let mut prev = (6.0, y);
                for step in 1..=8 {
                    let x = 6.0 + step as f64 * 4.5;
                    let yy = y + if step % 2 == 0 { -3.0 } else { 3.0 };
                    r.line(prev.0, prev.1, x, yy, 2.0, [90, 90, 110, 255]);
                    prev = (x, yy);
                }
            }
        }
        "anxious" => {
            r.fill_polygon(
                &[(24.0, 6.0), (14.0, 26.0), (24.0, 40.0), (34.0, 26.0)],
                [90, 170, 230, 255],
            );
            r.fill_circle(24.0, 30.0, 10.0, [90, 170, 230, 255]);
            r.fill_circle(20.0, 28.0, 3.0, [230, 245, 255, 255]);
        }
        "collision" => {
            let pts = star(24.0, 24.0, 22.0, 10.0, 8);
            r.fill_polygon(&pts, [250, 200, 40, 255]);
            let inner = star(24.0, 24.0, 12.0, 6.0, 8);
            r.fill_polygon(&inner, [240, 90, 30, 255]);
        }
        "relieved" => {
            r.stroke_circle(16.0, 28.0, 9.0, 2.5, [120, 160, 200, 255]);
            r.stroke_circle(32.0, 18.0, 7.0, 2.5, [120, 160, 200, 255]);
            r.stroke_circle(38.0, 34.0, 5.0, 2.0, [120, 160, 200, 255]);
        }
        "shock" => {
            r.fill_rect(20, 4, 28, 32, INK);
            r.fill_circle(24.0, 40.0, 4.5, INK);
        }
        "big_shock" => {
            r.fill_rect(9, 4, 17, 32, red);
            r.fill_circle(13.0, 40.0, 4.5, red);
            r.fill_rect(31, 4, 39, 32, red);
            r.fill_circle(35.0, 40.0, 4.5, red);
        }
        _ => r.fill_rect(8, 8, 40, 40, [120, 120, 120, 255]),
    }
    r
}

fn star(cx: f64, cy: f64, outer: f64, inner: f64, spikes: usize) -> Vec<(f64, f64)> {
    (0..spikes * 2)
        .map(|i| {
            let r = if i % 2 == 0 { outer } else { inner };
            let a = core::f64::consts::PI * i as f64 / spikes as f64;
            (cx + r * libm::cos(a), cy + r * libm::sin(a))
        })
        .collect()
}

pub fn builtin_characters() -> Vec<(String, Raster)> {
    [
        ("blue", [70, 130, 230, 255]),
        ("pink", [240, 140, 190, 255]),
    ]
    .into_iter()
    .map(|(name, color)| (String::from(name), character(color)))
    .collect()
}

pub fn builtin_scenes() -> Vec<(String, Raster)> {
    ["garden", "forest", "room", "beach"]
        .into_iter()
        .map(|n| (String::from(n), scene(n)))
        .collect()
}

pub fn builtin_objects() -> Vec<(String, Raster)> {
    ["apple", "tree", "rock", "flower", "ball"]
        .into_iter()
        .map(|n| (String::from(n), object(n)))
        .collect()
}

pub fn builtin_symbols() -> Vec<(String, Raster)> {
    SYMBOL_CATEGORIES
        .into_iter()
        .map(|n| (String::from(n), symbol(n)))
        .collect()
}
