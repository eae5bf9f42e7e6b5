use std::io::BufWriter;
use std::path::Path;

use super::{LabelGrid, Taxonomy};
use crate::error::Result;

/// Bumped whenever a palette entry changes.
pub const PALETTE_VERSION: u32 = 1;

const FULL11: [[u8; 3]; 11] = [
    [0, 0, 0],       // no cloud / missing
    [255, 128, 0],   // very low
    [255, 200, 0],   // low
    [220, 220, 60],  // mid-level
    [180, 180, 180], // high opaque
    [255, 255, 255], // very high opaque
    [230, 120, 200], // fractional
    [0, 80, 215],    // semitransparent thin
    [0, 150, 255],   // semitransparent moderately thick
    [100, 200, 255], // semitransparent thick
    [160, 90, 200],  // semitransparent above low/medium
];

const REDUCED4: [[u8; 3]; 4] = [
    [0, 0, 0],
    [255, 170, 0],
    [220, 220, 60],
    [255, 255, 255],
];

/// RGB entries indexed by class code.
pub fn palette(taxonomy: Taxonomy) -> &'static [[u8; 3]] {
    match taxonomy {
        Taxonomy::Full11 => &FULL11,
        Taxonomy::Reduced4 => &REDUCED4,
    }
}

/// Writes `grid` as an 8-bit indexed PNG using the fixed palette.
pub fn render_frame(grid: &LabelGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    {
        let mut encoder = png::Encoder::new(
            BufWriter::new(&mut bytes),
            grid.width() as u32,
            grid.height() as u32,
        );
        encoder.set_color(png::ColorType::Indexed);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_palette(palette(grid.taxonomy()).concat());
        let mut writer = encoder.write_header()?;
        writer.write_image_data(grid.labels())?;
        writer.finish()?;
    }
    super::write_file(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palettes_have_distinct_entries() {
        for tax in [Taxonomy::Full11, Taxonomy::Reduced4] {
            let p = palette(tax);
            assert_eq!(p.len(), tax.cardinality());
            for i in 0..p.len() {
                for j in i + 1..p.len() {
                    assert_ne!(p[i], p[j], "{tax:?} entries {i} and {j}");
                }
            }
        }
    }
}
