//! Knowledge database: full object records keyed by instance id plus an
//! embedding index over visible objects keyed only by `(category, instance)`.
//!
//! Attribute updates never touch the index. Index entries appear and vanish
//! with visibility. The user pose is replaced on every query, and spatial
//! facts are computed against it at retrieval time.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use parking_lot::{RwLock, RwLockReadGuard, RwLockWriteGuard};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{ObjectRecord, Scene, UserPose};
use crate::spatial::{relative_position, RelativePosition};
use crate::two_tower::{cosine_sim, TwoTowerModel};

/// Number of entries retrieved when a caller does not say otherwise.
pub const DEFAULT_K: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedEntry {
    pub instance: String,
    pub score: f64,
    pub record: ObjectRecord,
    pub spatial: RelativePosition,
}

/// Ranked retrieval output; scores are non-increasing, ties ordered by id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub entries: Vec<RetrievedEntry>,
}

impl RetrievalResult {
    pub fn ranked(&self) -> Vec<(String, f64)> {
        self.entries
            .iter()
            .map(|e| (e.instance.clone(), e.score))
            .collect()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.instance.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Scene file contents plus the current user pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub name: String,
    pub objects: Vec<ObjectRecord>,
    #[serde(default)]
    pub user_pose: UserPose,
}

impl Snapshot {
    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text)?;
        let scene = Scene::new(snap.name, snap.objects)?;
        Ok(Snapshot {
            name: scene.name,
            objects: scene.objects,
            user_pose: snap.user_pose.normalized()?,
        })
    }

    pub fn scene(&self) -> Scene {
        Scene {
            name: self.name.clone(),
            objects: self.objects.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeDatabase {
    scene_name: String,
    records: BTreeMap<String, ObjectRecord>,
    index: BTreeMap<String, Vec<f64>>,
    current_user: UserPose,
    model: Arc<TwoTowerModel>,
    revision: u64,
}

impl KnowledgeDatabase {
    pub fn new(scene: &Scene, model: Arc<TwoTowerModel>) -> Result<Self> {
        let mut db = Self {
            scene_name: scene.name.clone(),
            records: BTreeMap::new(),
            index: BTreeMap::new(),
            current_user: UserPose::default(),
            model,
            revision: 0,
        };
        for obj in &scene.objects {
            if db.records.contains_key(&obj.instance) {
                return Err(Error::Validation(format!(
                    "duplicate instance `{}`",
                    obj.instance
                )));
            }
            db.upsert_object(obj.clone())?;
        }
        Ok(db)
    }

    pub fn from_snapshot(snapshot: &Snapshot, model: Arc<TwoTowerModel>) -> Result<Self> {
        let mut db = Self::new(&snapshot.scene(), model)?;
        db.set_user_pose(snapshot.user_pose)?;
        Ok(db)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            name: self.scene_name.clone(),
            objects: self.records.values().cloned().collect(),
            user_pose: self.current_user,
        }
    }

    pub fn scene_name(&self) -> &str {
        &self.scene_name
    }

    /// Current records as a scene, in instance-id order.
    pub fn scene(&self) -> Scene {
        self.snapshot().scene()
    }

    pub fn model(&self) -> &Arc<TwoTowerModel> {
        &self.model
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn user_pose(&self) -> UserPose {
        self.current_user
    }

    pub fn record(&self, instance: &str) -> Option<&ObjectRecord> {
        self.records.get(instance)
    }

    pub fn records(&self) -> impl Iterator<Item = &ObjectRecord> {
        self.records.values()
    }

    /// `(instance, vector)` index entries in id order.
    pub fn index_entries(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.index.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn index_len(&self) -> usize {
        self.index.len()
    }

    fn embed_entry(&self, record: &ObjectRecord) -> Vec<f64> {
        self.model
            .forward_information(&record.category, &record.instance)
    }

    fn bump(&mut self) -> u64 {
        self.revision += 1;
        self.revision
    }

    /// Inserts or replaces a record. The index changes only when visibility does.
    pub fn upsert_object(&mut self, mut record: ObjectRecord) -> Result<u64> {
        record.validate()?;
        record.scene_name = self.scene_name.clone();
        let was_visible = match self.records.get(&record.instance) {
            Some(existing) if existing.category != record.category => {
                return Err(Error::Validation(format!(
                    "instance `{}` already registered under category `{}`",
                    record.instance, existing.category
                )));
            }
            Some(existing) => Some(existing.visible),
            None => None,
        };
        if was_visible != Some(record.visible) {
            if record.visible {
                let v = self.embed_entry(&record);
                self.index.insert(record.instance.clone(), v);
            } else {
                self.index.remove(&record.instance);
            }
        }
        self.records.insert(record.instance.clone(), record);
        Ok(self.bump())
    }

    pub fn set_visibility(&mut self, instance: &str, visible: bool) -> Result<u64> {
        let record = self
            .records
            .get_mut(instance)
            .ok_or_else(|| Error::UnknownInstance(instance.to_string()))?;
        record.visible = visible;
        if visible {
            if !self.index.contains_key(instance) {
                let record = record.clone();
                let v = self.embed_entry(&record);
                self.index.insert(instance.to_string(), v);
            }
        } else {
            self.index.remove(instance);
        }
        Ok(self.bump())
    }

    pub fn set_user_pose(&mut self, pose: UserPose) -> Result<u64> {
        self.current_user = pose.normalized()?;
        Ok(self.bump())
    }

    /// Top-`k` entries by cosine similarity between the question tower output
    /// and each index vector, expanded to full records and spatial facts.
    pub fn retrieve(&self, question: &str, k: usize) -> Result<RetrievalResult> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.index.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let q = self.model.forward_question(question);
        let mut scored = Vec::with_capacity(self.index.len());
        for (id, v) in &self.index {
            scored.push((id.as_str(), cosine_sim(&q, v)?));
        }
        rank(&mut scored);
        scored.truncate(k);

        let entries = scored
            .into_iter()
            .map(|(id, score)| {
                let record = self.records[id].clone();
                let spatial = relative_position(&record.position, &self.current_user)?;
                Ok(RetrievedEntry {
                    instance: id.to_string(),
                    score,
                    record,
                    spatial,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RetrievalResult { entries })
    }
}

/// Descending score, ascending id on ties.
pub fn rank<S: AsRef<str>>(scored: &mut [(S, f64)]) {
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.0.as_ref().cmp(b.0.as_ref()))
    });
}

/// Reader–writer wrapper: retrievals share the lock, mutations are exclusive.
#[derive(Debug, Clone)]
pub struct SharedDatabase {
    inner: Arc<RwLock<KnowledgeDatabase>>,
}

impl SharedDatabase {
    pub fn new(db: KnowledgeDatabase) -> Self {
        Self {
            inner: Arc::new(RwLock::new(db)),
        }
    }

    pub fn read(&self) -> RwLockReadGuard<'_, KnowledgeDatabase> {
        self.inner.read()
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, KnowledgeDatabase> {
        self.inner.write()
    }

    /// Sets the pose and retrieves with no other writer in between. The
    /// write guard is downgraded so concurrent readers can proceed.
    pub fn query(
        &self,
        pose: UserPose,
        question: &str,
        k: usize,
    ) -> Result<(RetrievalResult, UserPose)> {
        let mut guard = self.inner.write();
        guard.set_user_pose(pose)?;
        let guard = RwLockWriteGuard::downgrade(guard);
        let result = guard.retrieve(question, k)?;
        Ok((result, guard.user_pose()))
    }
}
