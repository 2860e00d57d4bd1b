//! Episode corpora on disk: one episode per JSON file plus a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::task::{Episode, Scenario, TaskError};

pub const CORPUS_SCHEMA_VERSION: u32 = 1;
pub const CORPUS_FILE: &str = "corpus.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub file: String,
    pub scenario: Scenario,
    pub goal_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema_version: u32,
    pub episodes: Vec<CorpusEntry>,
    /// Episode counts keyed by scenario slug.
    pub per_scenario: BTreeMap<String, usize>,
    pub mean_goal_count: f64,
}

impl CorpusManifest {
    pub fn of(episodes: &[Episode]) -> Self {
        let entries: Vec<CorpusEntry> = episodes
            .iter()
            .map(|e| CorpusEntry {
                id: e.id.clone(),
                file: format!("{}.json", e.id),
                scenario: e.scenario,
                goal_count: e.goal_count,
            })
            .collect();
        let mut per_scenario = BTreeMap::new();
        for e in &entries {
            *per_scenario.entry(e.scenario.slug().to_owned()).or_insert(0) += 1;
        }
        let mean_goal_count = if entries.is_empty() {
            0.0
        } else {
            entries.iter().map(|e| e.goal_count as f64).sum::<f64>() / entries.len() as f64
        };
        Self { schema_version: CORPUS_SCHEMA_VERSION, episodes: entries, per_scenario, mean_goal_count }
    }
}

/// Episodes addressable by id.
#[derive(Clone, Debug, Default)]
pub struct EpisodeStore {
    episodes: BTreeMap<String, Episode>,
}

impl EpisodeStore {
    pub fn new(episodes: impl IntoIterator<Item = Episode>) -> Self {
        Self { episodes: episodes.into_iter().map(|e| (e.id.clone(), e)).collect() }
    }

    pub fn get(&self, id: &str) -> Result<&Episode, SessionError> {
        self.episodes.get(id).ok_or_else(|| SessionError::UnknownEpisode(id.to_owned()))
    }

    pub fn ids(&self) -> Vec<String> {
        self.episodes.keys().cloned().collect()
    }

    pub fn episodes(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.values()
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Loads the files listed in `corpus.json`, or every `*.json` file when
    /// there is no manifest. A single episode file is accepted too.
    pub fn load(path: &Path) -> Result<Self, SessionError> {
        if path.is_file() {
            return Ok(Self::new([Episode::load(path)?]));
        }
        let manifest = path.join(CORPUS_FILE);
        let files: Vec<PathBuf> = if manifest.is_file() {
            let text = std::fs::read_to_string(&manifest)?;
            let m: CorpusManifest = serde_json::from_str(&text).map_err(|e| {
                TaskError::SchemaViolation { path: manifest.display().to_string(), message: e.to_string() }
            })?;
            m.episodes.iter().map(|e| path.join(&e.file)).collect()
        } else {
            let mut v: Vec<PathBuf> = std::fs::read_dir(path)?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            v.sort();
            v
        };
        let episodes = files.iter().map(|f| Episode::load(f)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(episodes))
    }

    /// Writes every episode and the manifest into `dir`.
    pub fn save(&self, dir: &Path) -> Result<CorpusManifest, SessionError> {
        std::fs::create_dir_all(dir)?;
        let episodes: Vec<Episode> = self.episodes.values().cloned().collect();
        let manifest = CorpusManifest::of(&episodes);
        for (e, entry) in episodes.iter().zip(&manifest.episodes) {
            e.save(&dir.join(&entry.file))?;
        }
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(dir.join(CORPUS_FILE), json + "\n")?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::generate_layout;
    use crate::task::generate_episode;

    #[test]
    fn save_and_load_round_trip() {
        let eps: Vec<Episode> =
            (0..3).map(|s| generate_episode(&generate_layout(s), Scenario::ALL[s as usize], s).unwrap()).collect();
        let store = EpisodeStore::new(eps.clone());
        let dir = tempfile::tempdir().unwrap();
        let m = store.save(dir.path()).unwrap();
        assert_eq!(m.per_scenario.values().sum::<usize>(), 3);
        let back = EpisodeStore::load(dir.path()).unwrap();
        assert_eq!(back.ids(), store.ids());
        assert_eq!(back.get(&eps[1].id).unwrap(), &eps[1]);
        assert!(matches!(back.get("nope"), Err(SessionError::UnknownEpisode(_))));
    }
}
