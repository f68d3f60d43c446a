//! Class splitting and C-way K-shot episode sampling.

use crate::data::{ClassId, DatasetManifest};
use crate::error::{Error, Result};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

/// Disjoint train/val/test class partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_classes: Vec<ClassId>,
    pub val_classes: Vec<ClassId>,
    pub test_classes: Vec<ClassId>,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_classes.is_empty()
            || self.val_classes.is_empty()
            || self.test_classes.is_empty()
        {
            return Err(Error::Split("every split part must be nonempty".into()));
        }
        let mut seen = HashSet::new();
        for id in self
            .train_classes
            .iter()
            .chain(&self.val_classes)
            .chain(&self.test_classes)
        {
            if !seen.insert(*id) {
                return Err(Error::Split(format!("class {id} appears in two parts")));
            }
        }
        Ok(())
    }
}

/// Deterministic shuffled partition of the class ids into sizes `(a, b, c)`.
/// Input order does not matter: ids are sorted before the seeded shuffle.
pub fn split_classes(
    classes: &[ClassId],
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<SplitSpec> {
    let (a, b, c) = sizes;
    let mut ids: Vec<ClassId> = classes.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if a == 0 || b == 0 || c == 0 {
        return Err(Error::Split(format!(
            "split sizes must be positive, got {sizes:?}"
        )));
    }
    if a + b + c > ids.len() {
        return Err(Error::Split(format!(
            "split sizes {sizes:?} need {} classes, only {} available",
            a + b + c,
            ids.len()
        )));
    }
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut ids);
    Ok(SplitSpec {
        train_classes: ids[..a].to_vec(),
        val_classes: ids[a..a + b].to_vec(),
        test_classes: ids[a + b..a + b + c].to_vec(),
    })
}

/// One episode item: a video with its global and episode-local labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeItem {
    pub video_id: String,
    pub global_label: ClassId,
    pub episode_label: usize,
}

/// A C-way K-shot task with q queries per class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub way: usize,
    pub shot: usize,
    pub queries_per_class: usize,
    /// Episode label i corresponds to global class `class_map[i]`
    /// (ascending global order).
    pub class_map: Vec<ClassId>,
    pub support: Vec<EpisodeItem>,
    pub query: Vec<EpisodeItem>,
}

impl Episode {
    /// Checks every Episode invariant (used by property tests).
    pub fn validate(&self) -> Result<()> {
        if self.class_map.len() != self.way {
            return Err(Error::Sampling("class_map size != way".into()));
        }
        if !self.class_map.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Sampling("class_map not sorted/distinct".into()));
        }
        if self.support.len() != self.way * self.shot {
            return Err(Error::Sampling("support size != C*K".into()));
        }
        if self.query.len() != self.way * self.queries_per_class {
            return Err(Error::Sampling("query size != C*q".into()));
        }
        let mut ids = HashSet::new();
        let mut support_counts = vec![0usize; self.way];
        let mut query_counts = vec![0usize; self.way];
        for (items, counts) in [
            (&self.support, &mut support_counts),
            (&self.query, &mut query_counts),
        ] {
            for item in items.iter() {
                if !ids.insert(item.video_id.as_str()) {
                    return Err(Error::Sampling(format!(
                        "video {:?} appears twice",
                        item.video_id
                    )));
                }
                if item.episode_label >= self.way {
                    return Err(Error::Sampling("episode label out of range".into()));
                }
                if self.class_map[item.episode_label] != item.global_label {
                    return Err(Error::Sampling("label mapping inconsistent".into()));
                }
                counts[item.episode_label] += 1;
            }
        }
        if support_counts.iter().any(|&n| n != self.shot) {
            return Err(Error::Sampling("support not K per class".into()));
        }
        if query_counts.iter().any(|&n| n != self.queries_per_class) {
            return Err(Error::Sampling("query not q per class".into()));
        }
        Ok(())
    }
}

/// Stable bijection between an episode's global labels and `0..C`:
/// ascending global order.
pub fn relabel(globals: &[ClassId]) -> BTreeMap<ClassId, usize> {
    let mut sorted: Vec<ClassId> = globals.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, g)| (g, i))
        .collect()
}

/// Recovers the global-to-episode label mapping of an existing episode.
pub fn relabel_episode(episode: &Episode) -> BTreeMap<ClassId, usize> {
    relabel(&episode.class_map)
}

/// Samples one C-way K-shot episode from the given class pool.
///
/// Stream layout (all draws on `rng`, in order): one shuffle of the sorted
/// class pool, then one shuffle of each chosen class's sorted video list,
/// visiting chosen classes in ascending global order.
pub fn sample_episode(
    manifest: &DatasetManifest,
    class_pool: &[ClassId],
    way: usize,
    shot: usize,
    queries_per_class: usize,
    rng: &mut Rng,
) -> Result<Episode> {
    if way == 0 || shot == 0 {
        return Err(Error::Sampling("way and shot must be positive".into()));
    }
    let mut pool: Vec<ClassId> = class_pool.to_vec();
    pool.sort_unstable();
    pool.dedup();
    if pool.len() < way {
        return Err(Error::Sampling(format!(
            "need {way} classes, pool has {}",
            pool.len()
        )));
    }
    rng.shuffle(&mut pool);
    let mut chosen: Vec<ClassId> = pool[..way].to_vec();
    chosen.sort_unstable();

    let mapping = relabel(&chosen);
    let mut support = Vec::with_capacity(way * shot);
    let mut query = Vec::with_capacity(way * queries_per_class);
    for &class in &chosen {
        let mut vids: Vec<&str> = manifest.videos_of(class);
        let need = shot + queries_per_class;
        if vids.len() < need {
            return Err(Error::Sampling(format!(
                "class {class} has {} videos, episode needs {need}",
                vids.len()
            )));
        }
        rng.shuffle(&mut vids);
        let episode_label = mapping[&class];
        for &vid in &vids[..shot] {
            support.push(EpisodeItem {
                video_id: vid.to_string(),
                global_label: class,
                episode_label,
            });
        }
        for &vid in &vids[shot..need] {
            query.push(EpisodeItem {
                video_id: vid.to_string(),
                global_label: class,
                episode_label,
            });
        }
    }
    let episode = Episode {
        way,
        shot,
        queries_per_class,
        class_map: chosen,
        support,
        query,
    };
    debug_assert!(episode.validate().is_ok());
    Ok(episode)
}
