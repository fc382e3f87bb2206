//! Built-in pixel font for template rendering.
//!
//! A compact 5x7 bitmap covers A-Z and 0-9; the mainland-China province
//! glyph used by the bundled template ships as a coarser 10x12 bitmap.
//! Glyphs are stretched to each template's character anchor boxes with
//! nearest-cell sampling, so rendering is fully deterministic.

use std::collections::HashMap;
use std::sync::OnceLock;

/// A monochrome glyph bitmap.
#[derive(Debug, Clone)]
pub struct Glyph {
    pub width: u32,
    pub height: u32,
    bits: Vec<bool>,
}

impl Glyph {
    fn from_rows(rows: &[&str]) -> Glyph {
        let height = rows.len() as u32;
        let width = rows[0].len() as u32;
        let mut bits = Vec::with_capacity((width * height) as usize);
        for row in rows {
            assert_eq!(row.len() as u32, width, "ragged glyph row");
            bits.extend(row.bytes().map(|b| b == b'#'));
        }
        Glyph {
            width,
            height,
            bits,
        }
    }

    pub fn filled(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }
}

/// Character-to-glyph table.
#[derive(Debug)]
pub struct Font {
    glyphs: HashMap<char, Glyph>,
}

impl Font {
    pub fn glyph(&self, ch: char) -> Option<&Glyph> {
        self.glyphs.get(&ch)
    }

    pub fn has(&self, ch: char) -> bool {
        self.glyphs.contains_key(&ch)
    }
}

#[rustfmt::skip]
const ASCII_GLYPHS: &[(char, [&str; 7])] = &[
    ('0', [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."]),
    ('1', ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('2', [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"]),
    ('3', ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."]),
    ('4', ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."]),
    ('5', ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."]),
    ('6', ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."]),
    ('7', ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."]),
    ('8', [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."]),
    ('9', [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."]),
    ('A', [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('B', ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."]),
    ('C', [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."]),
    ('D', ["###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."]),
    ('E', ["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    ('F', ["#####", "#....", "#....", "####.", "#....", "#....", "#...."]),
    ('G', [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"]),
    ('H', ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('I', [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('J', ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."]),
    ('K', ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"]),
    ('L', ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('M', ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"]),
    ('N', ["#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"]),
    ('O', [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('P', ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('Q', [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"]),
    ('R', ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    ('S', [".####", "#....", "#....", ".###.", "....#", "....#", "####."]),
    ('T', ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    ('U', ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('V', ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('W', ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"]),
    ('X', ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
    ('Y', ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."]),
    ('Z', ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"]),
];

// Anhui province glyph, as used on the bundled mainland-China template.
#[rustfmt::skip]
const PROVINCE_WAN: [&str; 12] = [
    ".......#..",
    ".#...#####",
    "####.#...#",
    "#..#......",
    "####.#####",
    "#..#......",
    "#..#.#####",
    "####...#..",
    ".......#..",
    "......#.#.",
    ".....#...#",
    ".....#..##",
];

static FONT: OnceLock<Font> = OnceLock::new();

/// The built-in font table.
pub fn builtin_font() -> &'static Font {
    FONT.get_or_init(|| {
        let mut glyphs = HashMap::new();
        for (ch, rows) in ASCII_GLYPHS {
            glyphs.insert(*ch, Glyph::from_rows(rows));
        }
        glyphs.insert('皖', Glyph::from_rows(&PROVINCE_WAN));
        Font { glyphs }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covers_alphanumerics_and_province_glyph() {
        let font = builtin_font();
        for ch in ('A'..='Z').chain('0'..='9') {
            assert!(font.has(ch), "missing {ch}");
        }
        assert!(font.has('皖'));
        assert!(!font.has('?'));
        assert!(!font.has('a'));
    }

    #[test]
    fn glyphs_are_rectangular_and_distinct() {
        let font = builtin_font();
        let mut seen = std::collections::HashSet::new();
        for ch in ('A'..='Z').chain('0'..='9') {
            let g = font.glyph(ch).unwrap();
            assert_eq!(g.width, 5);
            assert_eq!(g.height, 7);
            assert!(seen.insert(g.bits.clone()), "glyph {ch} duplicates another");
        }
    }
}
