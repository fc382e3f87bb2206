//! Plate template registry: a directory of `<name>.png` backgrounds with
//! `<name>.json` metadata (slot pattern, character anchor boxes, text color,
//! optional letter alphabet).
//!
//! Two reference templates are built in — a Taiwan-style white plate with
//! six slots and a mainland-China-style blue plate with a province literal
//! followed by six slots — and can be materialized to disk for use as
//! fixtures or starting points.

use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::{PlatePattern, SlotClass};
use crate::{Error, Result};

/// Anchor box for one character, in template pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
enum SlotSpec {
    Letter,
    Digit,
    Either,
    Literal { char: char },
}

impl From<&SlotClass> for SlotSpec {
    fn from(slot: &SlotClass) -> Self {
        match slot {
            SlotClass::Letter => SlotSpec::Letter,
            SlotClass::Digit => SlotSpec::Digit,
            SlotClass::Either => SlotSpec::Either,
            SlotClass::Literal(c) => SlotSpec::Literal { char: *c },
        }
    }
}

impl From<&SlotSpec> for SlotClass {
    fn from(spec: &SlotSpec) -> Self {
        match spec {
            SlotSpec::Letter => SlotClass::Letter,
            SlotSpec::Digit => SlotClass::Digit,
            SlotSpec::Either => SlotClass::Either,
            SlotSpec::Literal { char } => SlotClass::Literal(*char),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TemplateMeta {
    pattern: Vec<SlotSpec>,
    boxes: Vec<CharBox>,
    foreground: [u8; 3],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    alphabet: Option<String>,
}

/// A renderable plate template.
#[derive(Debug, Clone)]
pub struct Template {
    pub name: String,
    pub image: RgbImage,
    pub boxes: Vec<CharBox>,
    pub pattern: PlatePattern,
    pub foreground: [u8; 3],
    /// Layout-specific letter alphabet; `None` means the full default.
    pub alphabet: Option<Vec<char>>,
}

impl Template {
    fn validate(&self) -> Result<()> {
        if self.boxes.len() != self.pattern.slots.len() {
            return Err(Error::Template(format!(
                "template {:?}: {} anchor boxes for {} slots",
                self.name,
                self.boxes.len(),
                self.pattern.slots.len()
            )));
        }
        let (w, h) = self.image.dimensions();
        for (i, b) in self.boxes.iter().enumerate() {
            if b.w == 0 || b.h == 0 || b.x + b.w > w || b.y + b.h > h {
                return Err(Error::Template(format!(
                    "template {:?}: anchor box {} out of bounds",
                    self.name, i
                )));
            }
        }
        Ok(())
    }
}

/// Load every `<name>.json` + `<name>.png` pair in a directory, sorted by
/// template name.
pub fn load_registry(dir: impl AsRef<Path>) -> Result<Vec<Template>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut names: Vec<String> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "json") {
            if let Some(stem) = path.file_stem() {
                names.push(stem.to_string_lossy().into_owned());
            }
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(Error::Template(format!(
            "no templates found in {}",
            dir.display()
        )));
    }
    names
        .into_iter()
        .map(|name| load_template(dir, &name))
        .collect()
}

fn load_template(dir: &Path, name: &str) -> Result<Template> {
    let json_path = dir.join(format!("{name}.json"));
    let png_path = dir.join(format!("{name}.png"));
    let text = fs::read_to_string(&json_path).map_err(|e| Error::Io {
        path: json_path.clone(),
        source: e,
    })?;
    let meta: TemplateMeta = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: json_path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })?;
    let image = crate::imaging::load_rgb(&png_path)?;
    let template = Template {
        name: name.to_string(),
        image,
        boxes: meta.boxes,
        pattern: PlatePattern::new(
            meta.pattern.iter().map(SlotClass::from).collect(),
            name.to_string(),
        )?,
        foreground: meta.foreground,
        alphabet: meta.alphabet.map(|s| s.chars().collect()),
    };
    template.validate()?;
    Ok(template)
}

/// Persist a template as `<name>.png` + `<name>.json`.
pub fn write_template(template: &Template, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let png_path = dir.join(format!("{}.png", template.name));
    template.image.save(&png_path).map_err(|e| Error::Image {
        path: png_path,
        source: e,
    })?;
    let meta = TemplateMeta {
        pattern: template.pattern.slots.iter().map(SlotSpec::from).collect(),
        boxes: template.boxes.clone(),
        foreground: template.foreground,
        alphabet: template
            .alphabet
            .as_ref()
            .map(|chars| chars.iter().collect()),
    };
    let json_path = dir.join(format!("{}.json", template.name));
    let json = serde_json::to_string_pretty(&meta).expect("template meta serializes");
    fs::write(&json_path, json).map_err(|e| Error::Io {
        path: json_path,
        source: e,
    })
}

fn plate_background(w: u32, h: u32, body: [u8; 3], border: [u8; 3]) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        let edge = x < 3 || y < 3 || x >= w - 3 || y >= h - 3;
        if edge {
            Rgb(border)
        } else {
            Rgb(body)
        }
    })
}

fn evenly_spaced_boxes(count: u32, img_w: u32, img_h: u32) -> Vec<CharBox> {
    let margin_x = img_w / 16;
    let margin_y = img_h / 6;
    let gap = 4u32;
    let usable = img_w - 2 * margin_x - gap * (count - 1);
    let box_w = usable / count;
    let box_h = img_h - 2 * margin_y;
    (0..count)
        .map(|i| CharBox {
            x: margin_x + i * (box_w + gap),
            y: margin_y,
            w: box_w,
            h: box_h,
        })
        .collect()
}

/// Letters legal on both reference layouts (I and O are not issued).
const PLATE_LETTERS: &str = "ABCDEFGHJKLMNPQRSTUVWXYZ";

/// The two built-in reference templates.
pub fn builtin_templates() -> Result<Vec<Template>> {
    // Taiwan-style: white plate, dark text, two letters then four digits.
    let tw = Template {
        name: "tw".into(),
        image: plate_background(240, 120, [244, 244, 238], [40, 40, 40]),
        boxes: evenly_spaced_boxes(6, 240, 120),
        pattern: PlatePattern::new(
            vec![
                SlotClass::Letter,
                SlotClass::Letter,
                SlotClass::Digit,
                SlotClass::Digit,
                SlotClass::Digit,
                SlotClass::Digit,
            ],
            "tw".into(),
        )?,
        foreground: [24, 24, 24],
        alphabet: Some(PLATE_LETTERS.chars().collect()),
    };
    tw.validate()?;

    // Mainland-China-style: blue plate, white text, province literal plus a
    // letter and five mixed slots.
    let cn = Template {
        name: "cn".into(),
        image: plate_background(308, 98, [0, 72, 170], [230, 233, 238]),
        boxes: evenly_spaced_boxes(7, 308, 98),
        pattern: PlatePattern::new(
            vec![
                SlotClass::Literal('皖'),
                SlotClass::Letter,
                SlotClass::Either,
                SlotClass::Either,
                SlotClass::Either,
                SlotClass::Either,
                SlotClass::Either,
            ],
            "cn".into(),
        )?,
        foreground: [248, 248, 248],
        alphabet: Some(PLATE_LETTERS.chars().collect()),
    };
    cn.validate()?;

    Ok(vec![cn, tw])
}

/// Materialize the built-in templates into a directory.
pub fn write_builtin_templates(dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    for template in builtin_templates()? {
        write_template(&template, dir)?;
    }
    Ok(())
}
