use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grid::{ArchMask, SemanticMap};
use super::palette::FIRST_OBJECT;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomType {
    Bedroom,
    LivingRoom,
    DiningRoom,
}

impl RoomType {
    pub const ALL: [RoomType; 3] = [RoomType::Bedroom, RoomType::LivingRoom, RoomType::DiningRoom];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Config(format!("room type index {i} out of range")))
    }

    pub fn name(self) -> &'static str {
        match self {
            RoomType::Bedroom => "bedroom",
            RoomType::LivingRoom => "living_room",
            RoomType::DiningRoom => "dining_room",
        }
    }
}

impl fmt::Display for RoomType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RoomType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown room type '{s}'")))
    }
}

/// What the sampler is conditioned on. The discriminant is the indicator
/// fed to the condition-kind embedding (0 none, 1 floor, 2 arch).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    None,
    Floor,
    Arch,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 3] = [ConditionKind::None, ConditionKind::Floor, ConditionKind::Arch];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ConditionKind::None => "none",
            ConditionKind::Floor => "floor",
            ConditionKind::Arch => "arch",
        }
    }

    /// Mask of this kind for a ground-truth architecture.
    pub fn mask_from(self, arch: &ArchMask) -> ArchMask {
        match self {
            ConditionKind::None => ArchMask::zeros(arch.height(), arch.width()),
            ConditionKind::Floor => arch.to_floor(),
            ConditionKind::Arch => arch.clone(),
        }
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConditionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ConditionKind::None),
            "floor" => Ok(ConditionKind::Floor),
            "arch" => Ok(ConditionKind::Arch),
            other => Err(Error::Config(format!("unknown condition kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    kind: ConditionKind,
    mask: ArchMask,
    room_type: RoomType,
}

impl ConditionSpec {
    pub fn new(kind: ConditionKind, mask: ArchMask, room_type: RoomType) -> Result<Self> {
        match kind {
            ConditionKind::None if !mask.is_all_void() => {
                return Err(Error::Config("kind 'none' requires an all-zero mask".into()))
            }
            ConditionKind::Floor if !mask.is_binary() => {
                return Err(Error::Config("kind 'floor' requires a binary mask".into()))
            }
            ConditionKind::Floor | ConditionKind::Arch if mask.floor_pixels() == 0 => {
                return Err(Error::Config(format!(
                    "kind '{kind}' requires at least one floor pixel"
                )))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            mask,
            room_type,
        })
    }

    pub fn unconditional(height: usize, width: usize, room_type: RoomType) -> Self {
        Self {
            kind: ConditionKind::None,
            mask: ArchMask::zeros(height, width),
            room_type,
        }
    }

    /// Condition of `kind` derived from a ground-truth architecture.
    pub fn derive(kind: ConditionKind, arch: &ArchMask, room_type: RoomType) -> Result<Self> {
        Self::new(kind, kind.mask_from(arch), room_type)
    }

    pub fn kind(&self) -> ConditionKind {
        self.kind
    }

    pub fn mask(&self) -> &ArchMask {
        &self.mask
    }

    pub fn room_type(&self) -> RoomType {
        self.room_type
    }
}

/// Front direction class: 0, 90, 180 or 270 degrees about the vertical axis.
///
/// Class 0 faces world +z, class 1 faces +x, class 2 faces -z, class 3 faces -x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Orientation(u8);

impl Orientation {
    pub const ALL: [Orientation; 4] = [Orientation(0), Orientation(1), Orientation(2), Orientation(3)];

    pub fn new(class: u8) -> Result<Self> {
        if class > 3 {
            return Err(Error::Config(format!("orientation class {class} not in 0..=3")));
        }
        Ok(Self(class))
    }

    pub fn class(self) -> u8 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0 as f64 * 90.0
    }

    /// Exact (cos, sin) of the rotation angle.
    pub fn cos_sin(self) -> (f64, f64) {
        match self.0 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    }

    /// Unit front vector in world (x, z).
    pub fn front(self) -> (f64, f64) {
        let (c, s) = self.cos_sin();
        (s, c)
    }

    /// Local (x, z) offset rotated into world (x, z).
    pub fn rotate(self, local_x: f64, local_z: f64) -> (f64, f64) {
        let (c, s) = self.cos_sin();
        (local_x * c + local_z * s, -local_x * s + local_z * c)
    }

    pub fn is_quarter_turn(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn turned(self, quarter_turns: u8) -> Self {
        Self((self.0 + quarter_turns) % 4)
    }
}

impl TryFrom<u8> for Orientation {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Orientation> for u8 {
    fn from(o: Orientation) -> u8 {
        o.0
    }
}

/// One object: category, bounding-box size and position, orientation class.
///
/// `size` is in the object's local frame (x width, y height, z depth);
/// `position` is the footprint center in world x/z with `position[1]` the
/// height of the box bottom above the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub category: u8,
    pub size: [f64; 3],
    pub position: [f64; 3],
    pub orientation: Orientation,
}

impl ObjectInstance {
    pub fn new(
        category: u8,
        size: [f64; 3],
        position: [f64; 3],
        orientation: Orientation,
    ) -> Result<Self> {
        if category < FIRST_OBJECT {
            return Err(Error::Category(format!(
                "instance category {category} is architectural"
            )));
        }
        if size.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Config(format!("instance size must be positive: {size:?}")));
        }
        Ok(Self {
            category,
            size,
            position,
            orientation,
        })
    }

    /// World-axis extents (x, z) of the rotated footprint.
    pub fn footprint_extents(&self) -> (f64, f64) {
        footprint_extents(self.size, self.orientation)
    }

    /// Four world (x, z) footprint corners in counter-clockwise order.
    pub fn footprint_corners(&self) -> [(f64, f64); 4] {
        footprint_corners(
            (self.position[0], self.position[2]),
            (self.size[0], self.size[2]),
            self.orientation,
        )
    }

    /// Vertical interval [bottom, top].
    pub fn vertical_span(&self) -> (f64, f64) {
        (self.position[1], self.position[1] + self.size[1])
    }
}

pub fn footprint_extents(size: [f64; 3], orientation: Orientation) -> (f64, f64) {
    if orientation.is_quarter_turn() {
        (size[2], size[0])
    } else {
        (size[0], size[2])
    }
}

pub fn footprint_corners(
    center: (f64, f64),
    local_xz: (f64, f64),
    orientation: Orientation,
) -> [(f64, f64); 4] {
    let (hx, hz) = (local_xz.0 / 2.0, local_xz.1 / 2.0);
    [(-hx, -hz), (hx, -hz), (hx, hz), (-hx, hz)].map(|(lx, lz)| {
        let (dx, dz) = orientation.rotate(lx, lz);
        (center.0 + dx, center.1 + dz)
    })
}

/// A semantic map with its instance annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    map: SemanticMap,
    instances: Vec<ObjectInstance>,
    room_type: RoomType,
}

impl SceneLayout {
    pub fn new(map: SemanticMap, instances: Vec<ObjectInstance>, room_type: RoomType) -> Result<Self> {
        for inst in &instances {
            if inst.category as usize >= map.num_categories() {
                return Err(Error::Category(format!(
                    "instance category {} outside palette",
                    inst.category
                )));
            }
            if map.count(inst.category) == 0 {
                return Err(Error::Data(format!(
                    "instance category {} absent from map",
                    inst.category
                )));
            }
        }
        Ok(Self {
            map,
            instances,
            room_type,
        })
    }

    pub fn map(&self) -> &SemanticMap {
        &self.map
    }

    pub fn instances(&self) -> &[ObjectInstance] {
        &self.instances
    }

    pub fn room_type(&self) -> RoomType {
        self.room_type
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_fronts() {
        let f: Vec<_> = Orientation::ALL.iter().map(|o| o.front()).collect();
        assert_eq!(f, vec![(0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0)]);
        assert!(Orientation::new(4).is_err());
    }

    #[test]
    fn quarter_turn_swaps_extents() {
        let inst = ObjectInstance::new(4, [1.6, 0.5, 2.0], [2.0, 0.0, 2.0], Orientation(1)).unwrap();
        assert_eq!(inst.footprint_extents(), (2.0, 1.6));
        let corners = inst.footprint_corners();
        let xs: Vec<f64> = corners.iter().map(|c| c.0).collect();
        let zs: Vec<f64> = corners.iter().map(|c| c.1).collect();
        let spread = |v: &[f64]| {
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        };
        assert!((spread(&xs) - 2.0).abs() < 1e-12);
        assert!((spread(&zs) - 1.6).abs() < 1e-12);
    }

    #[test]
    fn half_turn_reflects_corners_through_center() {
        let c = (1.3, -0.7);
        for r in 0..4u8 {
            let o = Orientation(r);
            let a = footprint_corners(c, (0.9, 0.4), o);
            let b = footprint_corners(c, (0.9, 0.4), o.turned(2));
            for (p, q) in a.iter().zip(b.iter()) {
                assert!((p.0 + q.0 - 2.0 * c.0).abs() < 1e-12);
                assert!((p.1 + q.1 - 2.0 * c.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn condition_invariants() {
        let arch = ArchMask::new(1, 3, vec![0, 1, 2]).unwrap();
        assert!(ConditionSpec::new(ConditionKind::None, arch.clone(), RoomType::Bedroom).is_err());
        assert!(ConditionSpec::new(ConditionKind::Floor, arch.clone(), RoomType::Bedroom).is_err());
        assert!(ConditionSpec::new(ConditionKind::Arch, arch.clone(), RoomType::Bedroom).is_ok());
        let f = ConditionSpec::derive(ConditionKind::Floor, &arch, RoomType::Bedroom).unwrap();
        assert_eq!(f.mask().cells(), &[0, 1, 1]);
        let n = ConditionSpec::derive(ConditionKind::None, &arch, RoomType::Bedroom).unwrap();
        assert!(n.mask().is_all_void());
        assert!(ConditionSpec::new(ConditionKind::Arch, ArchMask::zeros(1, 3), RoomType::Bedroom).is_err());
    }

    #[test]
    fn instance_validation() {
        assert!(ObjectInstance::new(2, [1.0; 3], [0.0; 3], Orientation(0)).is_err());
        assert!(ObjectInstance::new(5, [1.0, 0.0, 1.0], [0.0; 3], Orientation(0)).is_err());
        let m = SemanticMap::new(1, 2, 1.0, 12, vec![1, 5]).unwrap();
        let ok = ObjectInstance::new(5, [1.0; 3], [0.0; 3], Orientation(0)).unwrap();
        let missing = ObjectInstance::new(6, [1.0; 3], [0.0; 3], Orientation(0)).unwrap();
        assert!(SceneLayout::new(m.clone(), vec![ok], RoomType::Bedroom).is_ok());
        assert!(SceneLayout::new(m, vec![missing], RoomType::Bedroom).is_err());
    }

    #[test]
    fn orientation_serde_is_plain_integer() {
        let s = serde_json::to_string(&Orientation(3)).unwrap();
        assert_eq!(s, "3");
        assert!(serde_json::from_str::<Orientation>("7").is_err());
    }
}
