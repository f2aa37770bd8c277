use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::grammar::{generate_scene, Annotation, GeneratedScene, RoomGrammar};
use crate::apm::{ApmSample, AttributeTarget, OrientationStats, VerticalPriors};
use crate::assembly::{AssetCatalog, AssetEntry};
use crate::diffusion::DiffusionSample;
use crate::error::{Error, Result};
use crate::extraction::InstanceMask;
use crate::layout::io::{read_json, write_json, write_map_png, MapJson};
use crate::layout::{ArchMask, CategoryPalette, GridSpec, ObjectInstance, Orientation, RoomType, SceneLayout, SemanticMap};
use crate::metrics::CategoryHistogram;

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    /// Rounds the train and validation shares; the test split takes the rest.
    pub fn from_ratios(total: usize, ratios: [f64; 3]) -> Result<Self> {
        if ratios.iter().any(|&r| !(0.0..=1.0).contains(&r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios {ratios:?} must be in [0, 1] and sum to 1")));
        }
        let train = (total as f64 * ratios[0]).round() as usize;
        let val = ((total as f64 * ratios[1]).round() as usize).min(total - train);
        Ok(Self {
            train,
            val,
            test: total - train - val,
        })
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    /// Global scene indices belonging to `split`.
    pub fn range(&self, split: Split) -> std::ops::Range<usize> {
        match split {
            Split::Train => 0..self.train,
            Split::Val => self.train..self.train + self.val,
            Split::Test => self.train + self.val..self.total(),
        }
    }

    pub fn split_of(&self, index: usize) -> Split {
        if index < self.train {
            Split::Train
        } else if index < self.train + self.val {
            Split::Val
        } else {
            Split::Test
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub scenes: usize,
    pub seed: u64,
    pub grid: GridSpec,
    pub ratios: [f64; 3],
    /// Scene i uses grammar i mod len.
    pub grammars: Vec<RoomGrammar>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            scenes: 2000,
            seed: 0,
            grid: GridSpec::DESK,
            ratios: [0.7, 0.1, 0.2],
            grammars: RoomGrammar::defaults(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub grid: GridSpec,
    pub ratios: [f64; 3],
    pub counts: SplitCounts,
    pub palette: Vec<String>,
    pub palette_hash: String,
    pub grammar_hash: String,
}

impl DatasetManifest {
    pub fn palette(&self) -> Result<CategoryPalette> {
        CategoryPalette::from_names(self.palette.clone())
    }
}

/// Hex SHA-256 of the grammars' JSON form.
pub fn grammar_hash(grammars: &[RoomGrammar]) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(grammars)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub category: u8,
    pub size: [f64; 3],
    pub position: [f64; 3],
    pub orientation: Orientation,
    /// Mask as (start, length) runs over row-major pixel indices.
    pub runs: Vec<[usize; 2]>,
}

/// One scene file: map, room type and per-instance attributes and masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub version: u32,
    pub index: usize,
    pub split: Split,
    pub room_type: RoomType,
    pub map: MapJson,
    pub instances: Vec<InstanceRecord>,
}

impl SceneRecord {
    pub fn new(index: usize, split: Split, scene: &GeneratedScene) -> Self {
        Self {
            version: DATASET_VERSION,
            index,
            split,
            room_type: scene.layout.room_type(),
            map: MapJson::from(scene.layout.map()),
            instances: scene
                .annotations
                .iter()
                .map(|a| InstanceRecord {
                    category: a.instance.category,
                    size: a.instance.size,
                    position: a.instance.position,
                    orientation: a.instance.orientation,
                    runs: a.mask.run_lengths(),
                })
                .collect(),
        }
    }

    pub fn to_scene(&self) -> Result<GeneratedScene> {
        if self.version != DATASET_VERSION {
            return Err(Error::Data(format!("unsupported scene record version {}", self.version)));
        }
        let map: SemanticMap = self.map.clone().try_into()?;
        let mut annotations = Vec::with_capacity(self.instances.len());
        for r in &self.instances {
            let mask = InstanceMask::from_run_lengths(map.height(), map.width(), r.category, &r.runs)?;
            mask.check_against(&map)?;
            annotations.push(Annotation {
                instance: ObjectInstance::new(r.category, r.size, r.position, r.orientation)?,
                mask,
            });
        }
        Ok(GeneratedScene {
            arch: ArchMask::from_map(&map),
            layout: SceneLayout::new(map, annotations.iter().map(|a| a.instance.clone()).collect(), self.room_type)?,
            annotations,
        })
    }
}

pub fn scene_stem(index: usize) -> String {
    format!("scene_{index:06}")
}

/// Per-scene generator: the dataset seed with the scene index as stream.
pub fn scene_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Generates scene `index` of a dataset without touching the disk.
pub fn generate_indexed(config: &DatasetConfig, palette: &CategoryPalette, index: usize) -> Result<GeneratedScene> {
    if config.grammars.is_empty() {
        return Err(Error::Config("no room grammars configured".into()));
    }
    let g = &config.grammars[index % config.grammars.len()];
    generate_scene(g, palette, config.grid, &mut scene_rng(config.seed, index))
}

/// Writes `manifest.json` and `splits/{train,val,test}/scene_%06d.{png,json}`.
pub fn build_dataset(config: &DatasetConfig, palette: &CategoryPalette, out: &Path) -> Result<DatasetManifest> {
    if config.scenes == 0 {
        return Err(Error::Config("dataset needs at least one scene".into()));
    }
    for g in &config.grammars {
        g.validate(palette, config.grid)?;
    }
    let counts = SplitCounts::from_ratios(config.scenes, config.ratios)?;
    for i in 0..config.scenes {
        let scene = generate_indexed(config, palette, i)?;
        let split = counts.split_of(i);
        let dir = out.join("splits").join(split.name());
        let record = SceneRecord::new(i, split, &scene);
        write_json(&dir.join(format!("{}.json", scene_stem(i))), &record)?;
        write_map_png(scene.layout.map(), palette, &dir.join(format!("{}.png", scene_stem(i))))?;
        if (i + 1) % 500 == 0 {
            info!("synthesized {}/{} scenes", i + 1, config.scenes);
        }
    }
    let manifest = DatasetManifest {
        version: DATASET_VERSION,
        seed: config.seed,
        grid: config.grid,
        ratios: config.ratios,
        counts,
        palette: palette.names().to_vec(),
        palette_hash: palette.hash(),
        grammar_hash: grammar_hash(&config.grammars)?,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// A dataset directory opened through its manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest: DatasetManifest = read_json(&root.join("manifest.json"))?;
        if manifest.version != DATASET_VERSION {
            return Err(Error::Data(format!("unsupported dataset version {}", manifest.version)));
        }
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn record_path(&self, split: Split, index: usize) -> PathBuf {
        self.root
            .join("splits")
            .join(split.name())
            .join(format!("{}.json", scene_stem(index)))
    }

    pub fn load_split(&self, split: Split) -> Result<Vec<GeneratedScene>> {
        self.manifest
            .counts
            .range(split)
            .map(|i| read_json::<SceneRecord>(&self.record_path(split, i))?.to_scene())
            .collect()
    }
}

pub fn diffusion_samples(scenes: &[GeneratedScene]) -> Vec<DiffusionSample> {
    scenes
        .iter()
        .map(|s| DiffusionSample {
            map: s.layout.map().clone(),
            room_type: s.layout.room_type(),
        })
        .collect()
}

/// One attribute-model sample per annotated instance.
pub fn apm_samples(scenes: &[GeneratedScene]) -> Vec<ApmSample> {
    scenes
        .iter()
        .flat_map(|s| {
            s.annotations.iter().map(move |a| ApmSample {
                map: s.layout.map().clone(),
                mask: a.mask.clone(),
                target: AttributeTarget {
                    s_y: a.instance.size[1],
                    p_y: a.instance.position[1],
                    orientation: a.instance.orientation,
                },
            })
        })
        .collect()
}

pub fn orientation_stats(scenes: &[GeneratedScene]) -> OrientationStats {
    OrientationStats::from_labels(
        scenes
            .iter()
            .flat_map(|s| s.annotations.iter().map(|a| (a.instance.category, a.instance.orientation))),
    )
}

pub fn vertical_priors(scenes: &[GeneratedScene]) -> Result<VerticalPriors> {
    VerticalPriors::from_samples(scenes.iter().flat_map(|s| {
        s.annotations
            .iter()
            .map(|a| (a.instance.category, a.instance.size[1], a.instance.position[1]))
    }))
}

/// Ground-truth category histograms per room type.
pub fn histograms_by_room_type(scenes: &[GeneratedScene]) -> BTreeMap<RoomType, CategoryHistogram> {
    let mut out: BTreeMap<RoomType, CategoryHistogram> = BTreeMap::new();
    for s in scenes {
        out.entry(s.layout.room_type())
            .or_default()
            .merge(&CategoryHistogram::from_categories(s.annotations.iter().map(|a| a.instance.category)));
    }
    out
}

/// One asset per distinct grammar size variant, ids `<category>_<nn>`.
pub fn synthetic_catalog(grammars: &[RoomGrammar], palette: &CategoryPalette) -> Result<AssetCatalog> {
    let mut by_cat: BTreeMap<u8, (String, Vec<[f64; 3]>)> = BTreeMap::new();
    for g in grammars {
        for r in &g.objects {
            let cat = palette
                .index_of(&r.category)
                .ok_or_else(|| Error::Config(format!("category '{}' not in palette", r.category)))?;
            let e = by_cat.entry(cat).or_insert_with(|| (r.category.clone(), Vec::new()));
            for v in &r.variants {
                if !e.1.contains(&v.size) {
                    e.1.push(v.size);
                }
            }
        }
    }
    let mut entries = Vec::new();
    for (cat, (name, sizes)) in by_cat {
        for (j, size) in sizes.into_iter().enumerate() {
            entries.push(AssetEntry {
                id: format!("{name}_{j:02}"),
                category: cat,
                size,
            });
        }
    }
    AssetCatalog::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenes: usize, seed: u64) -> DatasetConfig {
        DatasetConfig {
            scenes,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn split_arithmetic() {
        let c = SplitCounts::from_ratios(1000, [0.7, 0.1, 0.2]).unwrap();
        assert_eq!((c.train, c.val, c.test), (700, 100, 200));
        assert_eq!(c.range(Split::Val), 700..800);
        assert_eq!(c.split_of(799), Split::Val);
        assert!(SplitCounts::from_ratios(10, [0.7, 0.2, 0.2]).is_err());
        let c = SplitCounts::from_ratios(3, [0.7, 0.1, 0.2]).unwrap();
        assert_eq!(c.total(), 3);
    }

    #[test]
    fn dataset_round_trip_and_determinism() {
        let palette = CategoryPalette::desk();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = small(12, 5);
        let ma = build_dataset(&cfg, &palette, a.path()).unwrap();
        let mb = build_dataset(&cfg, &palette, b.path()).unwrap();
        assert_eq!(ma, mb);
        for split in Split::ALL {
            for i in ma.counts.range(split) {
                for ext in ["json", "png"] {
                    let rel = format!("splits/{}/{}.{ext}", split.name(), scene_stem(i));
                    assert_eq!(std::fs::read(a.path().join(&rel)).unwrap(), std::fs::read(b.path().join(&rel)).unwrap());
                }
            }
        }
        let ds = Dataset::open(a.path()).unwrap();
        let train = ds.load_split(Split::Train).unwrap();
        assert_eq!(train.len(), ma.counts.train);
        assert_eq!(train[0], generate_indexed(&cfg, &palette, 0).unwrap());
        let png = crate::layout::io::read_map_png(
            &a.path().join("splits/train/scene_000001.png"),
            cfg.grid.scale,
            palette.len(),
        )
        .unwrap();
        assert_eq!(&png, train[1].layout.map());
    }

    #[test]
    fn catalog_covers_every_variant() {
        let palette = CategoryPalette::desk();
        let cat = synthetic_catalog(&RoomGrammar::defaults(), &palette).unwrap();
        for g in RoomGrammar::defaults() {
            for r in &g.objects {
                let c = palette.index_of(&r.category).unwrap();
                for v in &r.variants {
                    assert_eq!(cat.retrieve(c, v.size).unwrap().size, v.size);
                }
            }
        }
        // dining chairs appear in two grammars with one size
        assert_eq!(cat.in_category(palette.index_of("dining_chair").unwrap()).count(), 1);
    }

    #[test]
    fn priors_match_recomputation() {
        let palette = CategoryPalette::desk();
        let cfg = small(30, 2);
        let scenes: Vec<GeneratedScene> = (0..30).map(|i| generate_indexed(&cfg, &palette, i).unwrap()).collect();
        let priors = vertical_priors(&scenes).unwrap();
        for (&cat, &[s, p]) in &priors.per_category {
            let vals: Vec<&ObjectInstance> = scenes
                .iter()
                .flat_map(|sc| sc.annotations.iter().map(|a| &a.instance))
                .filter(|i| i.category == cat)
                .collect();
            let ms = vals.iter().map(|i| i.size[1]).sum::<f64>() / vals.len() as f64;
            let mp = vals.iter().map(|i| i.position[1]).sum::<f64>() / vals.len() as f64;
            assert!((ms - s).abs() < 1e-12 && (mp - p).abs() < 1e-12);
        }
        assert_eq!(apm_samples(&scenes).len(), scenes.iter().map(|s| s.annotations.len()).sum::<usize>());
    }
}
