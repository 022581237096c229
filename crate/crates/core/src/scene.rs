//! Scene, object and user-pose data model plus the scene file format.
//!
//! A scene file is a JSON document holding the scene name and a flat list of
//! object records. Object orientation quaternions are stored `(x, y, z, w)`.
//! Files may additionally carry a `user_pose` block (used by database
//! snapshots); plain scene loading ignores it.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Material placeholder used when a scene does not name one.
pub const UNKNOWN_MATERIAL: &str = "unknown";

const NORM_TOLERANCE: f64 = 1e-12;

/// Quaternion stored in `(x, y, z, w)` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        w: 1.0,
    };

    pub const fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.w.is_finite()
    }

    pub fn normalized(&self) -> Result<Self> {
        if !self.is_finite() {
            return Err(Error::NonFinite("quaternion"));
        }
        let n = self.norm();
        if n <= NORM_TOLERANCE {
            return Err(Error::DegenerateQuaternion(n));
        }
        // Already unit to rounding: keep the bits so reloads are exact.
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(*self);
        }
        Ok(Self::new(self.x / n, self.y / n, self.z / n, self.w / n))
    }

    /// Uniformly distributed unit quaternion (Shoemake's subgroup method).
    pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let u3: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        Self::new(a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos())
    }
}

impl From<[f64; 4]> for Quaternion {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        [q.x, q.y, q.z, q.w]
    }
}

fn default_material() -> String {
    UNKNOWN_MATERIAL.to_string()
}

fn default_true() -> bool {
    true
}

/// One scene object with all of its extracted attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    /// Owning scene; filled from the enclosing scene on load.
    #[serde(skip)]
    pub scene_name: String,
    pub category: String,
    pub instance: String,
    pub position: Vec3,
    pub orientation: Quaternion,
    #[serde(default)]
    pub interactive: bool,
    #[serde(default)]
    pub color: String,
    #[serde(default = "default_material", deserialize_with = "material_or_unknown")]
    pub material: String,
    #[serde(default = "default_true")]
    pub visible: bool,
}

fn material_or_unknown<'de, D>(de: D) -> std::result::Result<String, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let value: Option<String> = Option::deserialize(de)?;
    Ok(match value {
        Some(s) if !s.trim().is_empty() => s,
        _ => default_material(),
    })
}

impl ObjectRecord {
    /// Checks the record's invariants and normalizes its orientation in place.
    pub fn validate(&mut self) -> Result<()> {
        validate_instance_name(&self.category, &self.instance)?;
        if self.position.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "{}: non-finite position",
                self.instance
            )));
        }
        self.orientation = self
            .orientation
            .normalized()
            .map_err(|e| Error::Validation(format!("{}: orientation {e}", self.instance)))?;
        Ok(())
    }

    /// Serial number parsed from the instance id (`chair_3` -> 3).
    pub fn serial(&self) -> u32 {
        instance_serial(&self.category, &self.instance).unwrap_or(0)
    }
}

fn instance_serial(category: &str, instance: &str) -> Option<u32> {
    let digits = instance.strip_prefix(category)?.strip_prefix('_')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse::<u32>().ok().filter(|&n| n > 0)
}

/// Instance ids must read `<category>_<positive serial>`.
pub fn validate_instance_name(category: &str, instance: &str) -> Result<()> {
    if category.trim().is_empty() {
        return Err(Error::Validation(format!("{instance}: empty category")));
    }
    match instance_serial(category, instance) {
        Some(_) => Ok(()),
        None => Err(Error::Validation(format!(
            "instance `{instance}` does not match category `{category}` with a positive serial"
        ))),
    }
}

/// User (headset) pose in the global scene frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPose {
    pub position: Vec3,
    pub orientation: Quaternion,
}

impl Default for UserPose {
    fn default() -> Self {
        Self {
            position: [0.0; 3],
            orientation: Quaternion::IDENTITY,
        }
    }
}

impl UserPose {
    pub fn new(position: Vec3, orientation: Quaternion) -> Self {
        Self {
            position,
            orientation,
        }
    }

    /// Returns the pose with a unit orientation, rejecting non-finite or degenerate input.
    pub fn normalized(&self) -> Result<Self> {
        if self.position.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("user position"));
        }
        Ok(Self {
            position: self.position,
            orientation: self.orientation.normalized()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub name: String,
    pub objects: Vec<ObjectRecord>,
}

impl Scene {
    /// Validates every record, normalizes quaternions and rejects duplicate ids.
    pub fn new(name: impl Into<String>, objects: Vec<ObjectRecord>) -> Result<Self> {
        let mut scene = Scene {
            name: name.into(),
            objects,
        };
        scene.validate()?;
        Ok(scene)
    }

    fn validate(&mut self) -> Result<()> {
        let mut seen = HashSet::new();
        for obj in &mut self.objects {
            obj.scene_name = self.name.clone();
            obj.validate()?;
            if !seen.insert(obj.instance.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate instance `{}`",
                    obj.instance
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, instance: &str) -> Option<&ObjectRecord> {
        self.objects.iter().find(|o| o.instance == instance)
    }

    /// Instances per category, sorted by category name.
    pub fn categories(&self) -> BTreeMap<&str, Vec<&ObjectRecord>> {
        let mut map: BTreeMap<&str, Vec<&ObjectRecord>> = BTreeMap::new();
        for obj in &self.objects {
            map.entry(obj.category.as_str()).or_default().push(obj);
        }
        map
    }

    pub fn category_count(&self) -> usize {
        self.categories().len()
    }

    pub fn instance_count(&self) -> usize {
        self.objects.len()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Scene = serde_json::from_str(text)?;
        Scene::new(scene.name, scene.objects)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scene::from_json(&text)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scene.to_json()?).map_err(|e| Error::io(path, e))
}

/// Category vocabularies used by the synthetic scene generator.
pub mod vocab {
    pub const OFFICE: &[&str] = &[
        "desk",
        "office chair",
        "printer",
        "clock",
        "monitor",
        "keyboard",
        "filing cabinet",
        "exit sign",
        "window blind",
        "potted plant",
        "desk lamp",
        "bookshelf",
        "trash can",
        "whiteboard",
        "sofa",
        "coffee machine",
        "water cooler",
        "tray",
        "telephone",
        "projector",
    ];

    pub const VILLA: &[&str] = &[
        "bed",
        "towel",
        "low round table",
        "bedroom door",
        "courtyard door",
        "vase",
        "mirror",
        "painting",
        "armchair",
        "fireplace",
        "bathtub",
        "wardrobe",
        "rug",
        "curtain",
        "pillow",
        "candle",
        "chandelier",
        "nightstand",
        "dining table",
        "piano",
        "sink",
        "toilet",
        "staircase",
        "balcony railing",
        "bench",
        "television",
        "fridge",
        "kettle",
    ];

    pub const RESTAURANT: &[&str] = &[
        "counter",
        "cash register",
        "menu board",
        "bar stool",
        "booth seat",
        "napkin dispenser",
        "soda fountain",
        "fryer",
        "grill",
        "ketchup bottle",
        "paper cup",
        "burger",
        "straw holder",
        "ceiling fan",
        "neon sign",
        "high chair",
        "salt shaker",
        "pendant light",
        "freezer",
    ];

    pub const GROCERY: &[&str] = &[
        "shelf",
        "shopping cart",
        "basket",
        "checkout counter",
        "apple crate",
        "cereal box",
        "milk carton",
        "bread loaf",
        "scale",
        "price tag",
        "refrigerator",
        "banana bunch",
        "cash drawer",
        "flower bucket",
        "soup can",
        "egg carton",
        "display stand",
        "security camera",
    ];

    pub const VIKING: &[&str] = &[
        "longhouse",
        "barrel",
        "cart",
        "shield",
        "axe",
        "boat",
        "well",
        "fence",
        "haystack",
        "torch",
    ];
}

const COLORS: &[&str] = &[
    "red", "blue", "green", "white", "black", "brown", "gray", "yellow", "orange", "silver",
];

const MATERIALS: &[&str] = &[
    "wooden", "metal", "alloy", "plastic", "glass", "fabric", "leather", "stone", "ceramic",
];

const BOX_HALF_EXTENT: f64 = 10.0;
const BOX_HEIGHT: f64 = 3.0;

/// Generates a seeded random scene with the requested category/instance counts.
///
/// Every chosen category receives at least one instance; the surplus is spread
/// at random, so some category gets two or more whenever
/// `n_instances > n_categories`.
pub fn generate_synthetic_scene(
    name: &str,
    seed: u64,
    n_categories: usize,
    n_instances: usize,
    vocab: &[&str],
) -> Result<Scene> {
    if n_categories == 0 {
        return Err(Error::InvalidParameter(
            "n_categories must be positive".into(),
        ));
    }
    if n_categories > vocab.len() {
        return Err(Error::InvalidParameter(format!(
            "n_categories {n_categories} exceeds vocabulary size {}",
            vocab.len()
        )));
    }
    if n_instances < n_categories {
        return Err(Error::InvalidParameter(format!(
            "n_instances {n_instances} < n_categories {n_categories}"
        )));
    }
    let unique: HashSet<&str> = vocab.iter().copied().collect();
    if unique.len() != vocab.len() {
        return Err(Error::InvalidParameter("vocabulary has duplicates".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cats: Vec<&str> = vocab.to_vec();
    cats.shuffle(&mut rng);
    cats.truncate(n_categories);

    let mut per_category = vec![1usize; n_categories];
    for _ in n_categories..n_instances {
        per_category[rng.random_range(0..n_categories)] += 1;
    }

    let mut objects = Vec::with_capacity(n_instances);
    for (cat, &count) in cats.iter().zip(&per_category) {
        for serial in 1..=count {
            let position = [
                rng.random_range(-BOX_HALF_EXTENT..BOX_HALF_EXTENT),
                rng.random_range(-BOX_HALF_EXTENT..BOX_HALF_EXTENT),
                rng.random_range(0.0..BOX_HEIGHT),
            ];
            let material = if rng.random_bool(0.15) {
                UNKNOWN_MATERIAL
            } else {
                MATERIALS[rng.random_range(0..MATERIALS.len())]
            };
            objects.push(ObjectRecord {
                scene_name: name.to_string(),
                category: cat.to_string(),
                instance: format!("{cat}_{serial}"),
                position,
                orientation: Quaternion::random_unit(&mut rng),
                interactive: rng.random_bool(0.4),
                color: COLORS[rng.random_range(0..COLORS.len())].to_string(),
                material: material.to_string(),
                visible: true,
            });
        }
    }
    Scene::new(name, objects)
}
