use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const VOID: u8 = 0;
pub const FLOOR: u8 = 1;
pub const DOOR: u8 = 2;
pub const WINDOW: u8 = 3;
/// First palette index holding an object category.
pub const FIRST_OBJECT: u8 = 4;

const RESERVED: [&str; 4] = ["void", "floor", "door", "window"];

/// Object categories of the small default palette (K = 12).
pub const DESK_OBJECTS: [&str; 8] = [
    "bed",
    "nightstand",
    "wardrobe",
    "ceiling_lamp",
    "dining_table",
    "dining_chair",
    "sofa",
    "tv_stand",
];

const FULL_OBJECTS: [&str; 34] = [
    "kids_bed",
    "single_bed",
    "double_bed",
    "corner_side_table",
    "round_end_table",
    "coffee_table",
    "console_table",
    "tv_stand",
    "desk",
    "dressing_table",
    "table",
    "dining_table",
    "stool",
    "dressing_chair",
    "dining_chair",
    "chinese_chair",
    "armchair",
    "chair",
    "lounge_chair",
    "loveseat_sofa",
    "lazy_sofa",
    "sofa",
    "multi_seat_sofa",
    "chaise_longue_sofa",
    "l_shaped_sofa",
    "nightstand",
    "shelf",
    "bookshelf",
    "children_cabinet",
    "wine_cabinet",
    "cabinet",
    "wardrobe",
    "pendant_lamp",
    "ceiling_lamp",
];

/// Ordered category labels with the four architectural classes at fixed
/// indices 0..4 and object categories after them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryPalette {
    names: Vec<String>,
}

impl CategoryPalette {
    /// Builds a palette from object category names; the reserved classes are prepended.
    pub fn with_objects<S: AsRef<str>>(objects: &[S]) -> Result<Self> {
        let names: Vec<String> = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(objects.iter().map(|s| s.as_ref().to_string()))
            .collect();
        Self::from_names(names)
    }

    pub fn from_names(names: Vec<String>) -> Result<Self> {
        if names.len() < 5 {
            return Err(Error::Category(format!(
                "palette needs at least 5 categories, got {}",
                names.len()
            )));
        }
        if names.len() > 256 {
            return Err(Error::Category("palette larger than 256 entries".into()));
        }
        for (i, reserved) in RESERVED.iter().enumerate() {
            if names[i] != *reserved {
                return Err(Error::Category(format!(
                    "index {i} must be '{reserved}', found '{}'",
                    names[i]
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Category(format!("duplicate category '{n}'")));
            }
        }
        Ok(Self { names })
    }

    /// K = 12 palette used by the synthetic room grammars.
    pub fn desk() -> Self {
        Self::with_objects(&DESK_OBJECTS).expect("static palette is valid")
    }

    /// The 38-entry unified palette (34 object categories).
    pub fn full() -> Self {
        Self::with_objects(&FULL_OBJECTS).expect("static palette is valid")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" | "paper" => Ok(Self::full()),
            other => Err(Error::Config(format!("unknown palette preset '{other}'"))),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn num_objects(&self) -> usize {
        self.names.len() - FIRST_OBJECT as usize
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<u8> {
        self.names.iter().position(|n| n == name).map(|i| i as u8)
    }

    pub fn object_indices(&self) -> impl Iterator<Item = u8> {
        FIRST_OBJECT..self.names.len() as u8
    }

    pub fn color(&self, index: usize) -> [u8; 3] {
        category_color(index)
    }

    pub fn colors(&self) -> Vec<[u8; 3]> {
        (0..self.len()).map(category_color).collect()
    }

    /// Hex SHA-256 over the ordered names; stamped into checkpoints and manifests.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for n in &self.names {
            h.update(n.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}

pub fn is_object(category: u8) -> bool {
    category >= FIRST_OBJECT
}

/// Deterministic RGB color for a palette index.
pub fn category_color(index: usize) -> [u8; 3] {
    match index {
        0 => [0, 0, 0],
        1 => [200, 200, 200],
        2 => [230, 120, 20],
        3 => [40, 150, 230],
        _ => {
            // golden-ratio hue walk; saturation/value alternate so neighbors differ
            let hue = ((index - 4) as f64 * 0.618_033_988_749_895).fract();
            let sat = if index % 2 == 0 { 0.75 } else { 0.55 };
            let val = if index % 3 == 0 { 0.80 } else { 0.95 };
            hsv_to_rgb(hue, sat, val)
        }
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - f * s);
    let t = v * (1.0 - (1.0 - f) * s);
    let (r, g, b) = match (i as i64).rem_euclid(6) {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [
        (r * 255.0).round() as u8,
        (g * 255.0).round() as u8,
        (b * 255.0).round() as u8,
    ]
}
