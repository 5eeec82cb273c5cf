//! Panel composition and rasterization.
//!
//! A panel is drawn as background, foreground sprites and symbols on a
//! white canvas, then framed by the composition viewport. All arithmetic
//! on pixels is integer or floor-based so output bytes are reproducible.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::assets::{AssetPool, VisualEntry, SYMBOLS};
use crate::layers::{default_set, visual_ref, SYMBOL_REACH};
use crate::model::{props, AttributeType, NodeId, SceneDocument, SequenceModel};
use crate::raster::{over, Raster, Rgba, WHITE};

/// Sprite height as a fraction of the panel, before node and entry scale.
pub const SPRITE_FRACTION: f64 = 0.3;
/// Symbol size as a fraction of the panel, before entry scale.
pub const SYMBOL_FRACTION: f64 = 0.14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resample {
    #[default]
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForegroundItem {
    pub node: NodeId,
    pub entry: VisualEntry,
    pub placeholder: bool,
    pub position: (f64, f64),
    pub scale: f64,
    pub flip: bool,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolItem {
    pub node: NodeId,
    pub entry: VisualEntry,
    pub owner: NodeId,
    pub offset: (f64, f64),
    pub visible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Composition {
    pub offset: (f64, f64),
    pub zoom: f64,
    pub flip: bool,
}

impl Default for Composition {
    fn default() -> Self {
        Composition {
            offset: (0.0, 0.0),
            zoom: 1.0,
            flip: false,
        }
    }
}

impl Composition {
    pub fn is_identity(&self) -> bool {
        self.zoom == 1.0 && !self.flip
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PanelLayers {
    pub panel: NodeId,
    pub background: Option<VisualEntry>,
    pub foreground: Vec<ForegroundItem>,
    pub composition: Composition,
    pub symbols: Vec<SymbolItem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StripLayout {
    pub panel_size: u32,
    pub gutter: u32,
    pub resample: Resample,
}

impl Default for StripLayout {
    fn default() -> Self {
        StripLayout {
            panel_size: 512,
            gutter: 8,
            resample: Resample::Nearest,
        }
    }
}

impl StripLayout {
    /// Width of a horizontal strip of `n` panels.
    pub fn strip_width(&self, n: usize) -> u32 {
        if n == 0 {
            0
        } else {
            n as u32 * self.panel_size + (n as u32 - 1) * self.gutter
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    /// `None` for an empty sequence.
    pub strip: Option<Raster>,
    pub panels: Vec<(NodeId, Raster)>,
    pub document: SceneDocument,
}

/// Reads a panel's subtree into drawable layers. Unknown labels become
/// placeholders, so this never fails.
pub fn compose_panel(seq: &SequenceModel, panel: NodeId, assets: &AssetPool) -> PanelLayers {
    let mut layers = PanelLayers {
        panel,
        ..PanelLayers::default()
    };
    let Some(panel_node) = seq.node(panel) else {
        return layers;
    };
    layers.composition = Composition {
        offset: panel_node
            .pair(props::VIEWPORT_OFFSET)
            .unwrap_or((0.0, 0.0)),
        zoom: panel_node.number(props::ZOOM).unwrap_or(1.0),
        flip: panel_node.flag(props::FLIP).unwrap_or(false),
    };
    for child in &panel_node.children {
        let Some(node) = seq.node(*child) else {
            continue;
        };
        let visible = node.flag(props::VISIBLE).unwrap_or(true);
        match node.kind {
            AttributeType::Scene => {
                if layers.background.is_none() && visible {
                    layers.background = Some(
                        assets
                            .resolve_ref(&visual_ref(node), default_set(&node.kind))
                            .entry,
                    );
                }
            }
            AttributeType::Character | AttributeType::VisualRef => {
                let resolved = assets.resolve_ref(&visual_ref(node), default_set(&node.kind));
                layers.foreground.push(ForegroundItem {
                    node: node.id,
                    entry: resolved.entry,
                    placeholder: resolved.placeholder,
                    position: node.pair(props::POSITION).unwrap_or((0.5, 0.5)),
                    scale: node.number(props::SCALE).unwrap_or(1.0),
                    flip: node.flag(props::FLIP).unwrap_or(false),
                    visible,
                });
                for sym in seq.children_of(node.id, &AttributeType::Symbol) {
                    let Some(s) = seq.node(sym) else { continue };
                    layers.symbols.push(SymbolItem {
                        node: s.id,
                        entry: assets.resolve_ref(&visual_ref(s), SYMBOLS).entry,
                        owner: node.id,
                        offset: s.pair(props::OFFSET).unwrap_or((0.0, 0.0)),
                        visible: visible && s.flag(props::VISIBLE).unwrap_or(true),
                    });
                }
            }
            _ => {}
        }
    }
    layers
}

/// Axis-aligned pixel rectangle, half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Rect {
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }
}

/// Placement of an image on the canvas in continuous pixel coordinates.
#[derive(Debug, Clone, Copy)]
struct Placement {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    flip: bool,
}

impl Placement {
    fn rect(&self) -> Rect {
        Rect {
            x0: libm::floor(self.x) as i64,
            y0: libm::floor(self.y) as i64,
            x1: libm::ceil(self.x + self.w) as i64,
            y1: libm::ceil(self.y + self.h) as i64,
        }
    }
}

fn sprite_placement(item: &ForegroundItem, size: f64) -> Placement {
    let img = &item.entry.image;
    let h = size * SPRITE_FRACTION * item.scale * item.entry.scale;
    let w = h * f64::from(img.width()) / f64::from(img.height().max(1));
    Placement {
        x: item.position.0 * size - item.entry.anchor.0 * w,
        y: item.position.1 * size - item.entry.anchor.1 * h,
        w,
        h,
        flip: item.flip,
    }
}

fn symbol_placement(layers: &PanelLayers, sym: &SymbolItem, size: f64) -> Placement {
    let base = layers
        .foreground
        .iter()
        .find(|f| f.node == sym.owner)
        .map(|f| f.position)
        .unwrap_or((0.5, 0.5));
    let cx = (base.0 + sym.offset.0 * SYMBOL_REACH) * size;
    let cy = (base.1 + sym.offset.1 * SYMBOL_REACH) * size;
    let s = size * SYMBOL_FRACTION * sym.entry.scale;
    let img = &sym.entry.image;
    let w = s * f64::from(img.width()) / f64::from(img.height().max(1));
    Placement {
        x: cx - w / 2.0,
        y: cy - s / 2.0,
        w,
        h: s,
        flip: false,
    }
}

fn premultiply(px: Rgba) -> [f64; 4] {
    let a = f64::from(px[3]) / 255.0;
    [
        f64::from(px[0]) * a,
        f64::from(px[1]) * a,
        f64::from(px[2]) * a,
        f64::from(px[3]),
    ]
}

/// Samples `img` at continuous texel coordinates (texel centers at +0.5).
fn sample(img: &Raster, u: f64, v: f64, mode: Resample) -> Rgba {
    let (w, h) = (img.width() as i64, img.height() as i64);
    match mode {
        Resample::Nearest => {
            let x = (libm::floor(u) as i64).clamp(0, w - 1);
            let y = (libm::floor(v) as i64).clamp(0, h - 1);
            img.get(x as u32, y as u32)
        }
        Resample::Bilinear => {
            let fx = u - 0.5;
            let fy = v - 0.5;
            let x0 = libm::floor(fx);
            let y0 = libm::floor(fy);
            let tx = fx - x0;
            let ty = fy - y0;
            let at = |x: f64, y: f64| {
                let xi = (x as i64).clamp(0, w - 1) as u32;
                let yi = (y as i64).clamp(0, h - 1) as u32;
                premultiply(img.get(xi, yi))
            };
            let (a, b, c, d) = (
                at(x0, y0),
                at(x0 + 1.0, y0),
                at(x0, y0 + 1.0),
                at(x0 + 1.0, y0 + 1.0),
            );
            let mut acc = [0.0; 4];
            for i in 0..4 {
                let top = a[i] * (1.0 - tx) + b[i] * tx;
                let bottom = c[i] * (1.0 - tx) + d[i] * tx;
                acc[i] = top * (1.0 - ty) + bottom * ty;
            }
            let alpha = acc[3];
            if alpha <= 0.0 {
                return [0, 0, 0, 0];
            }
            let k = 255.0 / alpha;
            let ch = |v: f64| libm::round(v.clamp(0.0, 255.0)) as u8;
            [ch(acc[0] * k), ch(acc[1] * k), ch(acc[2] * k), ch(alpha)]
        }
    }
}

/// Draws `img` scaled into `place`, touching only pixels inside its rect.
fn draw_scaled(canvas: &mut Raster, img: &Raster, place: Placement, mode: Resample) {
    if place.w <= 0.0 || place.h <= 0.0 || img.width() == 0 || img.height() == 0 {
        return;
    }
    let r = place.rect();
    let (cw, ch) = (i64::from(canvas.width()), i64::from(canvas.height()));
    let sx = f64::from(img.width()) / place.w;
    let sy = f64::from(img.height()) / place.h;
    for y in r.y0.max(0)..r.y1.min(ch) {
        let v = (y as f64 + 0.5 - place.y) * sy;
        if v < 0.0 || v >= f64::from(img.height()) {
            continue;
        }
        for x in r.x0.max(0)..r.x1.min(cw) {
            let mut u = (x as f64 + 0.5 - place.x) * sx;
            if u < 0.0 || u >= f64::from(img.width()) {
                continue;
            }
            if place.flip {
                u = f64::from(img.width()) - u;
            }
            let px = sample(img, u, v, mode);
            canvas.blend(x, y, px);
        }
    }
}

/// Top-left corner and span of the viewport on the unframed canvas.
fn viewport(c: &Composition, size: f64) -> (f64, f64, f64) {
    let zoom = if c.zoom >= 1.0 { c.zoom } else { 1.0 };
    let span = size / zoom;
    let free = size - span;
    let ox = (1.0 + c.offset.0.clamp(-1.0, 1.0)) / 2.0 * free;
    let oy = (1.0 + c.offset.1.clamp(-1.0, 1.0)) / 2.0 * free;
    (ox, oy, zoom)
}

/// Draws background, foreground and symbols without the viewport.
pub fn compose_canvas(layers: &PanelLayers, size: u32, mode: Resample) -> Raster {
    let mut canvas = Raster::new(size, size, WHITE);
    let s = f64::from(size);
    if let Some(bg) = &layers.background {
        draw_scaled(
            &mut canvas,
            &bg.image,
            Placement {
                x: 0.0,
                y: 0.0,
                w: s,
                h: s,
                flip: false,
            },
            mode,
        );
    }
    for item in layers.foreground.iter().filter(|i| i.visible) {
        draw_scaled(
            &mut canvas,
            &item.entry.image,
            sprite_placement(item, s),
            mode,
        );
    }
    for sym in layers.symbols.iter().filter(|i| i.visible) {
        draw_scaled(
            &mut canvas,
            &sym.entry.image,
            symbol_placement(layers, sym, s),
            mode,
        );
    }
    canvas
}

/// Rasterizes one panel into an opaque `size`×`size` image.
pub fn rasterize_panel(layers: &PanelLayers, size: u32, mode: Resample) -> Raster {
    let canvas = compose_canvas(layers, size, mode);
    if layers.composition.is_identity() {
        return canvas;
    }
    let s = f64::from(size);
    let (ox, oy, zoom) = viewport(&layers.composition, s);
    let mut out = Raster::new(size, size, WHITE);
    for y in 0..size {
        let v = oy + (f64::from(y) + 0.5) / zoom;
        for x in 0..size {
            let xx = if layers.composition.flip {
                size - 1 - x
            } else {
                x
            };
            let u = ox + (f64::from(xx) + 0.5) / zoom;
            out.put(x, y, over(sample(&canvas, u, v, mode), WHITE));
        }
    }
    out
}

/// Output-space bounds of each visible foreground item (None when hidden
/// or framed out), padded by one pixel for resampling.
pub fn foreground_bounds(layers: &PanelLayers, size: u32) -> Vec<Option<Rect>> {
    let s = f64::from(size);
    let (ox, oy, zoom) = viewport(&layers.composition, s);
    layers
        .foreground
        .iter()
        .map(|item| {
            if !item.visible {
                return None;
            }
            let p = sprite_placement(item, s);
            let mut r = Rect {
                x0: libm::floor((p.x - ox) * zoom) as i64 - 1,
                y0: libm::floor((p.y - oy) * zoom) as i64 - 1,
                x1: libm::ceil((p.x + p.w - ox) * zoom) as i64 + 1,
                y1: libm::ceil((p.y + p.h - oy) * zoom) as i64 + 1,
            };
            if layers.composition.flip {
                let (a, b) = (i64::from(size) - r.x1, i64::from(size) - r.x0);
                r.x0 = a;
                r.x1 = b;
            }
            r.x0 = r.x0.max(0);
            r.y0 = r.y0.max(0);
            r.x1 = r.x1.min(i64::from(size));
            r.y1 = r.y1.min(i64::from(size));
            (!r.is_empty()).then_some(r)
        })
        .collect()
}

/// Renders every panel and the horizontal strip.
pub fn render_sequence(
    seq: &SequenceModel,
    assets: &AssetPool,
    layout: &StripLayout,
) -> RenderOutput {
    let panels: Vec<(NodeId, Raster)> = seq
        .panels()
        .iter()
        .map(|p| {
            let layers = compose_panel(seq, *p, assets);
            (
                *p,
                rasterize_panel(&layers, layout.panel_size, layout.resample),
            )
        })
        .collect();
    let strip = (!panels.is_empty()).then(|| {
        let mut strip = Raster::new(layout.strip_width(panels.len()), layout.panel_size, WHITE);
        for (k, (_, img)) in panels.iter().enumerate() {
            strip.paste(img, k as u32 * (layout.panel_size + layout.gutter), 0);
        }
        strip
    });
    RenderOutput {
        strip,
        panels,
        document: seq.to_document(),
    }
}
