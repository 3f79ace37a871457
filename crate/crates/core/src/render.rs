//! Image-vector rendering: one row of eight coloured cells per emotional
//! token, each cell shaded from white toward its emotion's base colour.

use std::io::Cursor;
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::emotion::{Emotion, EmotionVector, EMOTION_COUNT};
use crate::error::{Error, Result};
use crate::transform::LoVMatrix;

pub const DEFAULT_GAMMA_BASE: f64 = 10.0;
pub const DEFAULT_CELL_SIZE: u32 = 32;

const WHITE: [f64; 3] = [255.0, 255.0, 255.0];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteColour {
    pub name: String,
    pub rgb: [u8; 3],
}

impl PaletteColour {
    pub fn hex(&self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.rgb[0], self.rgb[1], self.rgb[2])
    }
}

/// Base colour per emotion, indexed in the fixed emotion order. The same
/// table names the colour answers of image tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    colours: [PaletteColour; EMOTION_COUNT],
}

impl Default for Palette {
    fn default() -> Self {
        let c = |name: &str, rgb: [u8; 3]| PaletteColour {
            name: name.to_string(),
            rgb,
        };
        Palette {
            colours: [
                c("orange", [255, 140, 0]),
                c("yellow", [255, 255, 0]),
                c("light-green", [144, 238, 80]),
                c("dark-green", [0, 100, 0]),
                c("blue", [0, 0, 255]),
                c("purple", [128, 0, 128]),
                c("red", [255, 0, 0]),
                c("light-blue", [100, 180, 255]),
            ],
        }
    }
}

impl Palette {
    pub fn new(colours: [PaletteColour; EMOTION_COUNT]) -> Result<Self> {
        for (i, a) in colours.iter().enumerate() {
            if colours[..i].iter().any(|b| b.name.eq_ignore_ascii_case(&a.name)) {
                return Err(Error::domain(format!("duplicate palette colour {:?}", a.name)));
            }
        }
        Ok(Palette { colours })
    }

    pub fn colour(&self, emotion: Emotion) -> &PaletteColour {
        &self.colours[emotion.index()]
    }

    pub fn colours(&self) -> &[PaletteColour; EMOTION_COUNT] {
        &self.colours
    }

    pub fn emotion_for_colour(&self, name: &str) -> Option<Emotion> {
        let name = name.trim();
        self.colours
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name))
            .and_then(Emotion::from_index)
    }
}

/// Exponential shading curve `f(v) = (b^v - 1) / (b - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HueScale {
    base: f64,
}

impl HueScale {
    pub fn new(base: f64) -> Result<Self> {
        if !(base > 1.0 && base.is_finite()) {
            return Err(Error::domain(format!("gamma base must be > 1, got {base}")));
        }
        Ok(HueScale { base })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn factor(&self, value: f64) -> f64 {
        let v = value.clamp(0.0, 1.0);
        (self.base.powf(v) - 1.0) / (self.base - 1.0)
    }
}

impl Default for HueScale {
    fn default() -> Self {
        HueScale {
            base: DEFAULT_GAMMA_BASE,
        }
    }
}

/// Unquantized cell colour for `value` of `emotion`.
pub fn shade(palette: &Palette, scale: &HueScale, emotion: Emotion, value: f64) -> [f64; 3] {
    let f = scale.factor(value);
    let base = palette.colour(emotion).rgb;
    [0, 1, 2].map(|c| WHITE[c] + f * (f64::from(base[c]) - WHITE[c]))
}

pub fn cell_colour(palette: &Palette, scale: &HueScale, emotion: Emotion, value: f64) -> Rgb<u8> {
    Rgb(shade(palette, scale, emotion, value).map(|c| c.round().clamp(0.0, 255.0) as u8))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IVImage {
    pub sentence_id: String,
    pub drawn_rows: Vec<EmotionVector>,
    pub cell_size: u32,
    pub pixels: RgbImage,
}

impl IVImage {
    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    /// Colour of cell `(row, col)`, read from the raster.
    pub fn cell(&self, row: usize, col: usize) -> Rgb<u8> {
        *self
            .pixels
            .get_pixel(col as u32 * self.cell_size, row as u32 * self.cell_size)
    }

    /// PNG bytes with fixed encoder settings and no metadata chunks.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut buf = Cursor::new(Vec::new());
        let encoder =
            PngEncoder::new_with_quality(&mut buf, CompressionType::Default, FilterType::NoFilter);
        encoder.write_image(
            self.pixels.as_raw(),
            self.width(),
            self.height(),
            ExtendedColorType::Rgb8,
        )?;
        Ok(buf.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_png()?)?;
        Ok(())
    }
}

/// Draws the non-zero rows of `lov`. A matrix with nothing to draw is an
/// [`Error::EmptyImage`].
pub fn to_iv(
    lov: &LoVMatrix,
    palette: &Palette,
    gamma_base: f64,
    cell_size: u32,
) -> Result<IVImage> {
    let scale = HueScale::new(gamma_base)?;
    if cell_size == 0 {
        return Err(Error::domain("cell size must be positive"));
    }
    let drawn_rows: Vec<EmotionVector> =
        lov.rows.iter().copied().filter(|r| !r.is_zero()).collect();
    if drawn_rows.is_empty() {
        return Err(Error::EmptyImage {
            sentence_id: lov.sentence_id.clone(),
        });
    }

    let width = EMOTION_COUNT as u32 * cell_size;
    let height = drawn_rows.len() as u32 * cell_size;
    let mut pixels = RgbImage::new(width, height);
    for (r, row) in drawn_rows.iter().enumerate() {
        for emotion in Emotion::ALL {
            let colour = cell_colour(palette, &scale, emotion, row.get(emotion));
            let x0 = emotion.index() as u32 * cell_size;
            let y0 = r as u32 * cell_size;
            for y in y0..y0 + cell_size {
                for x in x0..x0 + cell_size {
                    pixels.put_pixel(x, y, colour);
                }
            }
        }
    }

    Ok(IVImage {
        sentence_id: lov.sentence_id.clone(),
        drawn_rows,
        cell_size,
        pixels,
    })
}
