//! Semantic map file formats: a versioned JSON grid and palette-indexed PNG.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::SemanticMap;
use super::palette::CategoryPalette;
use crate::error::{Error, Result};

pub const MAP_FORMAT_VERSION: u32 = 1;

/// On-disk JSON form: `{version, K, scale, H, W, cells}` with cells row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapJson {
    pub version: u32,
    #[serde(rename = "K")]
    pub k: usize,
    pub scale: f64,
    #[serde(rename = "H")]
    pub h: usize,
    #[serde(rename = "W")]
    pub w: usize,
    pub cells: Vec<u8>,
}

impl From<&SemanticMap> for MapJson {
    fn from(m: &SemanticMap) -> Self {
        Self {
            version: MAP_FORMAT_VERSION,
            k: m.num_categories(),
            scale: m.scale(),
            h: m.height(),
            w: m.width(),
            cells: m.cells().to_vec(),
        }
    }
}

impl TryFrom<MapJson> for SemanticMap {
    type Error = Error;

    fn try_from(j: MapJson) -> Result<Self> {
        if j.version != MAP_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "unsupported map format version {}",
                j.version
            )));
        }
        SemanticMap::new(j.h, j.w, j.scale, j.k, j.cells)
    }
}

pub fn map_to_json(map: &SemanticMap) -> Result<String> {
    Ok(serde_json::to_string(&MapJson::from(map))?)
}

pub fn map_from_json(text: &str) -> Result<SemanticMap> {
    serde_json::from_str::<MapJson>(text)?.try_into()
}

pub fn write_map_json(map: &SemanticMap, path: &Path) -> Result<()> {
    write_text(path, &map_to_json(map)?)
}

pub fn read_map_json(path: &Path) -> Result<SemanticMap> {
    map_from_json(&read_text(path)?)
}

/// Encodes the map as an 8-bit palette-indexed PNG.
pub fn encode_png<W: Write>(map: &SemanticMap, palette: &CategoryPalette, out: W) -> Result<()> {
    if map.num_categories() > palette.len() {
        return Err(Error::Category(format!(
            "map has K = {} but palette only {}",
            map.num_categories(),
            palette.len()
        )));
    }
    let mut enc = png::Encoder::new(out, map.width() as u32, map.height() as u32);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette(palette.colors().concat());
    let mut writer = enc.write_header().map_err(|e| Error::Png(e.to_string()))?;
    writer
        .write_image_data(map.cells())
        .map_err(|e| Error::Png(e.to_string()))?;
    writer.finish().map_err(|e| Error::Png(e.to_string()))
}

/// Decodes an indexed PNG back into category indices.
pub fn decode_png<R: Read>(input: R, scale: f64, num_categories: usize) -> Result<SemanticMap> {
    let mut dec = png::Decoder::new(input);
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec.read_info().map_err(|e| Error::Png(e.to_string()))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Indexed || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Png("expected an 8-bit indexed PNG".into()));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Png(e.to_string()))?;
    let line = frame.line_size;
    let mut cells = Vec::with_capacity(w * h);
    for r in 0..h {
        cells.extend_from_slice(&buf[r * line..r * line + w]);
    }
    SemanticMap::new(h, w, scale, num_categories, cells)
}

pub fn write_map_png(map: &SemanticMap, palette: &CategoryPalette, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    encode_png(map, palette, BufWriter::new(file))
}

pub fn read_map_png(path: &Path, scale: f64, num_categories: usize) -> Result<SemanticMap> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode_png(BufReader::new(file), scale, num_categories)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(value)?)
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// One character per cell: `.` void, `_` floor, `D` door, `W` window, then
/// `a`, `b`, ... for object categories 4, 5, ...
pub fn map_to_text(map: &SemanticMap) -> String {
    let mut out = String::with_capacity(map.height() * (map.width() + 1));
    for row in map.cells().chunks(map.width()) {
        out.extend(row.iter().map(|&c| match c {
            0 => '.',
            1 => '_',
            2 => 'D',
            3 => 'W',
            c => char::from(b'a' + (c - 4) % 26),
        }));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SemanticMap {
        let cells = (0..6 * 5).map(|i| (i % 12) as u8).collect();
        SemanticMap::new(6, 5, 0.25, 12, cells).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let m = sample();
        let text = map_to_json(&m).unwrap();
        assert!(text.contains("\"K\":12"));
        assert_eq!(map_from_json(&text).unwrap(), m);
    }

    #[test]
    fn json_rejects_unknown_version() {
        let mut j = MapJson::from(&sample());
        j.version = 9;
        let text = serde_json::to_string(&j).unwrap();
        assert!(map_from_json(&text).is_err());
    }

    #[test]
    fn png_round_trip_and_colors() {
        let m = sample();
        let pal = CategoryPalette::desk();
        let mut bytes = Vec::new();
        encode_png(&m, &pal, &mut bytes).unwrap();
        assert_eq!(decode_png(&bytes[..], 0.25, 12).unwrap(), m);

        // expanding the palette yields the palette color of each cell
        let mut dec = png::Decoder::new(&bytes[..]);
        dec.set_transformations(png::Transformations::EXPAND);
        let mut reader = dec.read_info().unwrap();
        let mut buf = vec![0u8; reader.output_buffer_size()];
        let frame = reader.next_frame(&mut buf).unwrap();
        for r in 0..m.height() {
            for c in 0..m.width() {
                let o = r * frame.line_size + c * 3;
                assert_eq!(&buf[o..o + 3], &pal.color(m.get(r, c) as usize));
            }
        }
    }

    #[test]
    fn text_view() {
        let m = SemanticMap::new(2, 3, 0.25, 12, vec![0, 1, 2, 3, 4, 11]).unwrap();
        assert_eq!(map_to_text(&m), "._D\nWah\n");
    }
}
