//! Schematic frame renderer.
//!
//! Layout of the 256x256 frame, top to bottom: an 18 px black band with the
//! step number in white, a top-down (x-y) view of the workspace, and a side
//! (x-z) view. Objects are filled squares, the effector is a hollow square
//! (white when open, yellow when closed).

use super::WorldState;
use crate::trajectory::{Frame, FRAME_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Rect {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

const BAND_H: u32 = 18;
const TOP_PANEL: (u32, u32) = (BAND_H, 137);
const SIDE_PANEL: (u32, u32) = (138, FRAME_SIZE);

pub const LABEL_RECT: Rect = Rect {
    x0: 0,
    y0: 0,
    x1: FRAME_SIZE,
    y1: BAND_H,
};

const GLYPH_X0: u32 = 4;
const GLYPH_Y0: u32 = 2;
const GLYPH_SCALE: u32 = 2;
const GLYPH_ADVANCE: u32 = 6 * GLYPH_SCALE;

const BG_TOP: [u8; 3] = [60, 64, 72];
const BG_SIDE: [u8; 3] = [72, 68, 60];
const SEPARATOR: [u8; 3] = [128, 128, 128];
const TABLE: [u8; 3] = [140, 100, 60];
const EFFECTOR_OPEN: [u8; 3] = [255, 255, 255];
const EFFECTOR_CLOSED: [u8; 3] = [255, 230, 0];
const PALETTE: [[u8; 3]; 4] = [[220, 40, 40], [40, 170, 60], [50, 90, 220], [230, 160, 30]];

const X_RANGE: (f64, f64) = (-0.4, 0.4);
const Y_RANGE: (f64, f64) = (-0.4, 0.4);
const Z_RANGE: (f64, f64) = (0.7, 1.3);
const TABLE_Z: f64 = 0.8;

const OBJECT_HALF: i64 = 5;
const MARKER_HALF: i64 = 4;

// 5x7 digit glyphs, one byte per row, low 5 bits used, MSB on the left.
const DIGITS: [[u8; 7]; 10] = [
    [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
    [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
    [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
    [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
    [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
    [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
    [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
    [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
];

fn map(v: f64, range: (f64, f64), lo: u32, hi: u32, invert: bool) -> i64 {
    let t = ((v - range.0) / (range.1 - range.0)).clamp(0.0, 1.0);
    let t = if invert { 1.0 - t } else { t };
    let margin = 6.0;
    let span = (hi - lo) as f64 - 2.0 * margin;
    (lo as f64 + margin + t * span).round() as i64
}

fn top_xy(p: [f64; 3]) -> (i64, i64) {
    (
        map(p[0], X_RANGE, 0, FRAME_SIZE, false),
        map(p[1], Y_RANGE, TOP_PANEL.0, TOP_PANEL.1, true),
    )
}

fn side_xy(p: [f64; 3]) -> (i64, i64) {
    (
        map(p[0], X_RANGE, 0, FRAME_SIZE, false),
        map(p[2], Z_RANGE, SIDE_PANEL.0, SIDE_PANEL.1, true),
    )
}

fn fill(frame: &mut Frame, cx: i64, cy: i64, half: i64, rgb: [u8; 3]) {
    for y in (cy - half)..=(cy + half) {
        for x in (cx - half)..=(cx + half) {
            if x >= 0 && y >= 0 {
                frame.set_pixel(x as u32, y as u32, rgb);
            }
        }
    }
}

fn outline(frame: &mut Frame, cx: i64, cy: i64, half: i64, rgb: [u8; 3]) {
    for y in (cy - half)..=(cy + half) {
        for x in (cx - half)..=(cx + half) {
            let edge = (x - cx).abs() >= half - 1 || (y - cy).abs() >= half - 1;
            let center = x == cx && y == cy;
            if (edge || center) && x >= 0 && y >= 0 {
                frame.set_pixel(x as u32, y as u32, rgb);
            }
        }
    }
}

fn marker_rect(cx: i64, cy: i64) -> Rect {
    let clamp = |v: i64| v.clamp(0, FRAME_SIZE as i64) as u32;
    Rect {
        x0: clamp(cx - MARKER_HALF),
        y0: clamp(cy - MARKER_HALF),
        x1: clamp(cx + MARKER_HALF + 1),
        y1: clamp(cy + MARKER_HALF + 1),
    }
}

/// Pixel rectangles covered by the effector marker in the two views.
pub fn marker_rects(effector: [f64; 3]) -> [Rect; 2] {
    let (tx, ty) = top_xy(effector);
    let (sx, sy) = side_xy(effector);
    [marker_rect(tx, ty), marker_rect(sx, sy)]
}

fn draw_label(frame: &mut Frame, k: u64) {
    for (i, ch) in k.to_string().bytes().enumerate() {
        let glyph = &DIGITS[(ch - b'0') as usize];
        let ox = GLYPH_X0 + i as u32 * GLYPH_ADVANCE;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..5u32 {
                if bits & (0x10 >> col) != 0 {
                    for dy in 0..GLYPH_SCALE {
                        for dx in 0..GLYPH_SCALE {
                            frame.set_pixel(
                                ox + col * GLYPH_SCALE + dx,
                                GLYPH_Y0 + row as u32 * GLYPH_SCALE + dy,
                                [255, 255, 255],
                            );
                        }
                    }
                }
            }
        }
    }
}

/// Renders one frame of `world` labelled with step `k`.
pub fn render_frame(world: &WorldState, k: u64) -> Frame {
    let mut frame = Frame::blank(k, [0, 0, 0]);
    for y in TOP_PANEL.0..TOP_PANEL.1 {
        for x in 0..FRAME_SIZE {
            frame.set_pixel(x, y, BG_TOP);
        }
    }
    for x in 0..FRAME_SIZE {
        frame.set_pixel(x, TOP_PANEL.1, SEPARATOR);
    }
    for y in SIDE_PANEL.0..SIDE_PANEL.1 {
        for x in 0..FRAME_SIZE {
            frame.set_pixel(x, y, BG_SIDE);
        }
    }
    let (_, table_y) = side_xy([0.0, 0.0, TABLE_Z]);
    for x in 0..FRAME_SIZE {
        frame.set_pixel(x, table_y as u32, TABLE);
    }

    for (i, o) in world.objects.iter().enumerate() {
        let rgb = PALETTE[i % PALETTE.len()];
        let (x, y) = top_xy(*o);
        fill(&mut frame, x, y, OBJECT_HALF, rgb);
        let (x, y) = side_xy(*o);
        fill(&mut frame, x, y, OBJECT_HALF, rgb);
    }

    let rgb = if world.gripper_closed {
        EFFECTOR_CLOSED
    } else {
        EFFECTOR_OPEN
    };
    let (x, y) = top_xy(world.effector);
    outline(&mut frame, x, y, MARKER_HALF, rgb);
    let (x, y) = side_xy(world.effector);
    outline(&mut frame, x, y, MARKER_HALF, rgb);

    draw_label(&mut frame, k);
    frame
}

/// Reads the step number back out of the label band. `None` if the band holds
/// no recognizable digits.
pub fn read_step_label(frame: &Frame) -> Option<u64> {
    let mut digits = String::new();
    for i in 0.. {
        let ox = GLYPH_X0 + i * GLYPH_ADVANCE;
        if ox + 5 * GLYPH_SCALE > frame.width {
            break;
        }
        let mut cell = [0u8; 7];
        for (row, bits) in cell.iter_mut().enumerate() {
            for col in 0..5u32 {
                let p = frame.pixel(ox + col * GLYPH_SCALE, GLYPH_Y0 + row as u32 * GLYPH_SCALE);
                if p == [255, 255, 255] {
                    *bits |= 0x10 >> col;
                }
            }
        }
        if cell == [0; 7] {
            break;
        }
        let d = DIGITS.iter().position(|g| *g == cell)?;
        digits.push(char::from(b'0' + d as u8));
    }
    digits.parse().ok()
}
