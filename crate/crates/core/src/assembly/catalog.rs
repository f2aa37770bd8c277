use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::io::{read_json, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetEntry {
    pub id: String,
    pub category: u8,
    /// Local-frame (x, y, z) size in meters.
    pub size: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssetCatalog {
    entries: Vec<AssetEntry>,
}

/// (1/3) sum_d (a_d - b_d)^2
pub fn size_mse(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|d| (a[d] - b[d]).powi(2)).sum::<f64>() / 3.0
}

impl AssetCatalog {
    pub fn new(entries: Vec<AssetEntry>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for e in &entries {
            if !ids.insert(e.id.as_str()) {
                return Err(Error::Data(format!("duplicate asset id '{}'", e.id)));
            }
            if e.size.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::Data(format!("asset '{}' has a non-positive size", e.id)));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[AssetEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&AssetEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn in_category(&self, category: u8) -> impl Iterator<Item = &AssetEntry> {
        self.entries.iter().filter(move |e| e.category == category)
    }

    /// Lowest size MSE within the category; ties go to the smaller id.
    pub fn retrieve(&self, category: u8, predicted: [f64; 3]) -> Result<&AssetEntry> {
        let mut best: Option<(f64, &AssetEntry)> = None;
        for e in self.in_category(category) {
            let m = size_mse(predicted, e.size);
            let better = match best {
                None => true,
                Some((bm, be)) => m < bm || (m == bm && e.id < be.id),
            };
            if better {
                best = Some((m, e));
            }
        }
        best.map(|(_, e)| e).ok_or(Error::Retrieval(category as usize))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = read_json(path)?;
        Self::new(c.entries)
    }
}
