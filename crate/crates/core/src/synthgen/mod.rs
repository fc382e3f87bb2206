//! Synthetic plate generation: a slot grammar produces plate text, a
//! template renders it, and the augmentation pipeline adds variability.
//!
//! Ground truth is exact by construction — the manifest label of every
//! generated record is the string that was rendered, so re-rendering the
//! label reproduces the pre-augmentation raster bit for bit.

mod augment;
mod font;
mod template;

pub use augment::{augment, AugmentConfig, ParamRange, TransformLog, TransformParams};
pub use font::{builtin_font, Font, Glyph};
pub use template::{
    builtin_templates, load_registry, write_builtin_templates, write_template, CharBox, Template,
};

use std::fs;
use std::path::Path;

use image::RgbImage;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::{normalize_label, DatasetManifest, ImageRecord, PlateText};
use crate::rng::{derive_seed, rng_from_seed, SeededRng};
use crate::{Error, Result};

/// What one character slot may hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotClass {
    Letter,
    Digit,
    Either,
    Literal(char),
}

/// An ordered list of character slots plus the layout it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatePattern {
    pub slots: Vec<SlotClass>,
    pub layout: String,
}

impl PlatePattern {
    /// Validate and build a pattern. Literal characters must survive label
    /// normalization unchanged, so generated labels always have exactly one
    /// character per slot.
    pub fn new(slots: Vec<SlotClass>, layout: String) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::Config("pattern needs at least one slot".into()));
        }
        for slot in &slots {
            if let SlotClass::Literal(c) = slot {
                let normalized = normalize_label(&c.to_string());
                match normalized {
                    Ok(p) if p.as_str() == c.to_string() => {}
                    _ => {
                        return Err(Error::Config(format!(
                            "literal {:?} does not survive label normalization",
                            c
                        )))
                    }
                }
            }
        }
        Ok(PlatePattern { slots, layout })
    }
}

/// Letter alphabet configuration for text generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextConfig {
    pub alphabet: Vec<char>,
    pub exclusions: Vec<char>,
}

impl Default for TextConfig {
    fn default() -> Self {
        TextConfig {
            alphabet: ('A'..='Z').collect(),
            exclusions: Vec::new(),
        }
    }
}

impl TextConfig {
    /// The effective letter set: the template override (when present) or the
    /// configured alphabet, minus exclusions.
    pub fn effective_letters(&self, template_alphabet: Option<&[char]>) -> Result<Vec<char>> {
        let base: Vec<char> = match template_alphabet {
            Some(chars) => chars.to_vec(),
            None => self.alphabet.clone(),
        };
        let letters: Vec<char> = base
            .into_iter()
            .filter(|c| !self.exclusions.contains(c))
            .collect();
        if letters.is_empty() {
            return Err(Error::Config(
                "letter alphabet is empty after exclusions".into(),
            ));
        }
        Ok(letters)
    }
}

const DIGITS: [char; 10] = ['0', '1', '2', '3', '4', '5', '6', '7', '8', '9'];

/// Draw one plate text from a pattern: letter slots uniform over `letters`,
/// digit slots uniform over 0-9, either slots uniform over the union,
/// literals copied verbatim.
pub fn generate_plate_text(
    pattern: &PlatePattern,
    letters: &[char],
    rng: &mut SeededRng,
) -> Result<PlateText> {
    if letters.is_empty() {
        return Err(Error::Config("empty letter alphabet".into()));
    }
    let mut text = String::with_capacity(pattern.slots.len());
    for slot in &pattern.slots {
        let ch = match slot {
            SlotClass::Letter => letters[rng.gen_range(0..letters.len())],
            SlotClass::Digit => DIGITS[rng.gen_range(0..DIGITS.len())],
            SlotClass::Either => {
                let total = letters.len() + DIGITS.len();
                let k = rng.gen_range(0..total);
                if k < letters.len() {
                    letters[k]
                } else {
                    DIGITS[k - letters.len()]
                }
            }
            SlotClass::Literal(c) => *c,
        };
        text.push(ch);
    }
    let label = normalize_label(&text)?;
    debug_assert_eq!(label.char_count(), pattern.slots.len());
    Ok(label)
}

/// Check a label against a pattern's slot classes.
pub fn label_conforms(label: &PlateText, pattern: &PlatePattern, letters: &[char]) -> bool {
    let chars: Vec<char> = label.chars().collect();
    if chars.len() != pattern.slots.len() {
        return false;
    }
    chars.iter().zip(&pattern.slots).all(|(c, slot)| match slot {
        SlotClass::Letter => letters.contains(c),
        SlotClass::Digit => c.is_ascii_digit(),
        SlotClass::Either => letters.contains(c) || c.is_ascii_digit(),
        SlotClass::Literal(l) => c == l,
    })
}

/// Rasterize `label` onto `template`: each character's glyph is stretched
/// into its anchor box with nearest-cell sampling in the template's
/// foreground color. Deterministic for a given (label, template).
pub fn render_plate(label: &PlateText, template: &Template) -> Result<RgbImage> {
    let chars: Vec<char> = label.chars().collect();
    if chars.len() != template.boxes.len() {
        return Err(Error::Template(format!(
            "label {:?} has {} characters, template {:?} has {} slots",
            label.as_str(),
            chars.len(),
            template.name,
            template.boxes.len()
        )));
    }
    let font = builtin_font();
    let mut out = template.image.clone();
    let fg = image::Rgb(template.foreground);
    for (ch, b) in chars.iter().zip(&template.boxes) {
        let glyph = font.glyph(*ch).ok_or(Error::MissingGlyph { ch: *ch })?;
        for dy in 0..b.h {
            let gy = dy * glyph.height / b.h;
            for dx in 0..b.w {
                let gx = dx * glyph.width / b.w;
                if glyph.filled(gx, gy) {
                    out.put_pixel(b.x + dx, b.y + dy, fg);
                }
            }
        }
    }
    Ok(out)
}

/// One generated record: final raster, its exact label, and everything
/// needed to reproduce it.
#[derive(Debug, Clone)]
pub struct SynthRecord {
    pub id: String,
    pub label: PlateText,
    pub template: String,
    pub seed: u64,
    pub transform_log: TransformLog,
    /// Raster before augmentation (the pure render of `label`).
    pub base_image: RgbImage,
    /// Raster after augmentation; this is what gets written to disk.
    pub image: RgbImage,
}

/// Generate `n` records. Each record derives its own seed from
/// (`seed`, index), so generation parallelizes without affecting output.
pub fn generate_batch(
    n: usize,
    templates: &[Template],
    text_config: &TextConfig,
    aug_config: &AugmentConfig,
    seed: u64,
) -> Result<Vec<SynthRecord>> {
    if n == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if templates.is_empty() {
        return Err(Error::Template("no templates to draw from".into()));
    }
    aug_config.validate()?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let record_seed = derive_seed(seed, i as u64);
            let mut rng = rng_from_seed(record_seed);
            let template = &templates[rng.gen_range(0..templates.len())];
            let letters = text_config.effective_letters(template.alphabet.as_deref())?;
            let label = generate_plate_text(&template.pattern, &letters, &mut rng)?;
            let base_image = render_plate(&label, template)?;
            let (image, transform_log) = augment(&base_image, &mut rng, aug_config)?;
            Ok(SynthRecord {
                id: format!("synth-{i:06}"),
                label,
                template: template.name.clone(),
                seed: record_seed,
                transform_log,
                base_image,
                image,
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct TransformLine<'a> {
    id: &'a str,
    template: &'a str,
    seed: u64,
    transforms: &'a TransformLog,
}

/// Write a batch to disk: one PNG per record, a manifest CSV
/// (`synthetic.csv`, subset tag "synthetic") and a `transforms.jsonl`
/// sidecar with the per-record transform parameters.
pub fn write_batch(records: &[SynthRecord], out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    records.par_iter().try_for_each(|r| {
        let path = out_dir.join(format!("{}.png", r.id));
        r.image.save(&path).map_err(|e| Error::Image {
            path: path.clone(),
            source: e,
        })
    })?;

    let manifest_records: Vec<ImageRecord> = records
        .iter()
        .map(|r| ImageRecord {
            id: r.id.clone(),
            path: format!("{}.png", r.id),
            label: Some(r.label.clone()),
            subset: "synthetic".into(),
            quad: None,
        })
        .collect();
    let manifest = DatasetManifest::new("synthetic", manifest_records)?;
    crate::manifest::write_manifest(&manifest, out_dir.join("synthetic.csv"))?;

    let mut jsonl = String::new();
    for r in records {
        let line = TransformLine {
            id: &r.id,
            template: &r.template,
            seed: r.seed,
            transforms: &r.transform_log,
        };
        jsonl.push_str(&serde_json::to_string(&line).expect("log serializes"));
        jsonl.push('\n');
    }
    let log_path = out_dir.join("transforms.jsonl");
    fs::write(&log_path, jsonl).map_err(|e| Error::Io {
        path: log_path,
        source: e,
    })?;
    Ok(manifest)
}
