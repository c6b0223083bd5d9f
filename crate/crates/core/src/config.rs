//! Run configuration shared by every command.
//!
//! Config files are plain `key = value` lines; `#` at line start or after a
//! space starts a comment. Keys are the field names below. Values are read as
//! JSON when they parse as JSON and as bare strings otherwise, so
//! `backend = ssim` and `seed = 7` both work.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::artifact::{DetectOptions, DEFAULT_ARTIFACTS};
use crate::attribution::{ACTIVE_THRESHOLD, DEFAULT_EPSILON};
use crate::concepts::FusionThresholds;
use crate::edit_lab::EditOptions;
use crate::error::{Error, Result};
use crate::raster::{Background, RenderSettings, DEFAULT_RENDER_SIZE};
use crate::scoring::{BackendKind, EmbeddingClient, LooOptions, LooThresholds, SimilarityBackend};
use crate::split::DEFAULT_SPLIT_TOLERANCE;

/// Everything that affects results. `workers` and `out_dir` are not serialized
/// because they must not change report bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub render_size: u32,
    pub background: Background,
    pub backend: BackendKind,
    pub embed_url: Option<String>,
    pub embed_timeout_secs: u64,
    pub embed_retries: u32,
    pub helpful_threshold: f64,
    pub harmful_threshold: f64,
    pub active_threshold: f64,
    pub epsilon: f64,
    pub merge_iou: f64,
    pub min_instance_score: f64,
    pub min_area: f64,
    pub max_area: f64,
    pub binarize_level: f64,
    pub split_tolerance: f64,
    pub artifacts: usize,
    pub k: usize,
    pub move_px: f64,
    pub scale_factor: f64,
    pub seed: u64,
    #[serde(skip, default = "one")]
    pub workers: usize,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        let fusion = FusionThresholds::default();
        let loo = LooThresholds::default();
        let edit = EditOptions::default();
        RunConfig {
            render_size: DEFAULT_RENDER_SIZE,
            background: Background::White,
            backend: BackendKind::NegMse,
            embed_url: None,
            embed_timeout_secs: 30,
            embed_retries: 2,
            helpful_threshold: loo.helpful,
            harmful_threshold: loo.harmful,
            active_threshold: ACTIVE_THRESHOLD,
            epsilon: DEFAULT_EPSILON,
            merge_iou: fusion.merge_iou,
            min_instance_score: fusion.min_instance_score,
            min_area: fusion.min_area,
            max_area: fusion.max_area,
            binarize_level: fusion.binarize_level,
            split_tolerance: DEFAULT_SPLIT_TOLERANCE,
            artifacts: DEFAULT_ARTIFACTS,
            k: DEFAULT_ARTIFACTS,
            move_px: edit.move_px,
            scale_factor: edit.scale_factor,
            seed: 0,
            workers: 1,
            out_dir: None,
        }
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(what()))
    }
}

fn unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        check((8..=8192).contains(&self.render_size), || {
            format!("render_size {} outside [8, 8192]", self.render_size)
        })?;
        check(self.helpful_threshold >= 0.0 && self.harmful_threshold <= 0.0, || {
            "need harmful_threshold <= 0 <= helpful_threshold".into()
        })?;
        check(
            self.active_threshold >= 0.0 && self.active_threshold.is_finite(),
            || "active_threshold must be >= 0".into(),
        )?;
        check(self.epsilon >= 0.0 && self.epsilon.is_finite(), || {
            "epsilon must be >= 0".into()
        })?;
        for (name, v) in [
            ("merge_iou", self.merge_iou),
            ("min_instance_score", self.min_instance_score),
            ("min_area", self.min_area),
            ("max_area", self.max_area),
            ("binarize_level", self.binarize_level),
        ] {
            check(unit(v), || format!("{name} {v} outside [0, 1]"))?;
        }
        check(self.min_area <= self.max_area, || "min_area exceeds max_area".into())?;
        check(self.split_tolerance >= 0.0, || "split_tolerance must be >= 0".into())?;
        check(self.k >= 1, || "k must be >= 1".into())?;
        check(self.move_px.is_finite(), || "move_px must be finite".into())?;
        check(self.scale_factor > 0.0 && self.scale_factor.is_finite(), || {
            "scale_factor must be > 0".into()
        })?;
        check(self.workers >= 1, || "workers must be >= 1".into())?;
        check(
            self.backend != BackendKind::Embedding || self.embed_url.is_some(),
            || "the embedding backend needs embed_url".into(),
        )
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "workers" => {
                self.workers = value
                    .parse()
                    .map_err(|_| Error::Config(format!("workers: `{value}` is not a count")))?;
                return Ok(());
            }
            "out" | "out_dir" => {
                self.out_dir = Some(PathBuf::from(value));
                return Ok(());
            }
            _ => {}
        }
        let mut map = serde_json::to_value(&*self)?;
        let fields = map.as_object_mut().expect("config serializes to an object");
        if !fields.contains_key(key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        let parsed = serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        fields.insert(key.to_string(), parsed);
        let (workers, out_dir) = (self.workers, self.out_dir.take());
        *self = serde_json::from_value(map).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        self.workers = workers;
        self.out_dir = out_dir;
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let line = line.find(" #").map_or(line, |at| &line[..at]).trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn render(&self) -> RenderSettings {
        RenderSettings {
            size: self.render_size,
            background: self.background,
        }
    }

    pub fn similarity_backend(&self) -> Result<SimilarityBackend> {
        Ok(match self.backend {
            BackendKind::NegMse => SimilarityBackend::NegMse,
            BackendKind::Ssim => SimilarityBackend::Ssim,
            BackendKind::Embedding => {
                let url = self
                    .embed_url
                    .clone()
                    .ok_or_else(|| Error::Config("the embedding backend needs embed_url".into()))?;
                let mut client = EmbeddingClient::new(url);
                client.timeout = Duration::from_secs(self.embed_timeout_secs);
                client.retries = self.embed_retries;
                SimilarityBackend::Embedding(client)
            }
        })
    }

    pub fn loo_options(&self) -> LooOptions {
        LooOptions {
            render: self.render(),
            thresholds: LooThresholds {
                helpful: self.helpful_threshold,
                harmful: self.harmful_threshold,
            },
            workers: self.workers,
        }
    }

    pub fn fusion(&self) -> FusionThresholds {
        FusionThresholds {
            min_instance_score: self.min_instance_score,
            min_area: self.min_area,
            max_area: self.max_area,
            merge_iou: self.merge_iou,
            binarize_level: self.binarize_level,
        }
    }

    pub fn detect_options(&self) -> DetectOptions {
        DetectOptions {
            render: self.render(),
            k: self.k,
            seed: self.seed,
            workers: self.workers,
        }
    }

    pub fn edit_options(&self) -> EditOptions {
        EditOptions {
            render: self.render(),
            seed: self.seed,
            move_px: self.move_px,
            scale_factor: self.scale_factor,
            binarize_level: self.binarize_level,
            workers: self.workers,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config always serializes")
    }
}
