//! Reference-based similarity backends and the leave-one-out engine.
//!
//! One full render plus one render per ablated element yields, for every
//! element, a similarity delta (how much the element helps the match with the
//! reference) and a footprint (where removing it changes the picture).

use std::fmt;
use std::io::Read as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::raster::{self, DiffMap, Raster, RenderSettings};
use crate::svg::SvgDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    NegMse,
    Ssim,
    Embedding,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::NegMse => "neg-mse",
            BackendKind::Ssim => "ssim",
            BackendKind::Embedding => "embedding",
        })
    }
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neg-mse" => Ok(BackendKind::NegMse),
            "ssim" => Ok(BackendKind::Ssim),
            "embedding" | "embedding-service" => Ok(BackendKind::Embedding),
            _ => Err(Error::Config(format!("unknown backend `{s}`"))),
        }
    }
}

/// HTTP client for an image-embedding service.
///
/// Protocol: `POST {url}/embed` with PNG bytes as the body; the response is
/// `{"embedding": [f, ...]}`. Similarity is the cosine of two embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingClient {
    pub url: String,
    pub timeout: Duration,
    pub retries: u32,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

impl EmbeddingClient {
    pub fn new(url: impl Into<String>) -> Self {
        EmbeddingClient {
            url: url.into(),
            timeout: Duration::from_secs(30),
            retries: 2,
        }
    }

    fn endpoint(&self) -> String {
        format!("{}/embed", self.url.trim_end_matches('/'))
    }

    pub fn embed(&self, image: &Raster) -> Result<Vec<f64>> {
        let png = image.encode_png()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(true)
            .build()
            .into();
        let mut last = String::new();
        for _ in 0..=self.retries {
            match self.try_embed(&agent, &png) {
                Ok(v) => return Ok(v),
                Err(e) => last = e,
            }
        }
        Err(Error::Backend(format!("{}: {last}", self.endpoint())))
    }

    fn try_embed(&self, agent: &ureq::Agent, png: &[u8]) -> Result<Vec<f64>, String> {
        let mut response = agent
            .post(&self.endpoint())
            .header("Content-Type", "image/png")
            .send(png)
            .map_err(|e| e.to_string())?;
        let mut body = String::new();
        response
            .body_mut()
            .as_reader()
            .read_to_string(&mut body)
            .map_err(|e| e.to_string())?;
        let parsed: EmbedResponse = serde_json::from_str(&body).map_err(|e| format!("bad response: {e}"))?;
        if parsed.embedding.is_empty() {
            return Err("empty embedding".into());
        }
        Ok(parsed.embedding)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Backend(format!(
            "embedding lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Backend("zero-norm embedding".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimilarityBackend {
    NegMse,
    Ssim,
    Embedding(EmbeddingClient),
}

impl SimilarityBackend {
    pub fn kind(&self) -> BackendKind {
        match self {
            SimilarityBackend::NegMse => BackendKind::NegMse,
            SimilarityBackend::Ssim => BackendKind::Ssim,
            SimilarityBackend::Embedding(_) => BackendKind::Embedding,
        }
    }

    pub fn score(&self, image: &Raster, reference: &Raster) -> Result<f64> {
        self.prepare(reference)?.score(image)
    }

    /// Binds the backend to a reference, embedding it once when needed.
    pub fn prepare(&self, reference: &Raster) -> Result<PreparedScorer<'_>> {
        let reference_embedding = match self {
            SimilarityBackend::Embedding(client) => Some(client.embed(reference)?),
            _ => None,
        };
        Ok(PreparedScorer {
            backend: self,
            reference: reference.clone(),
            reference_embedding,
        })
    }
}

pub struct PreparedScorer<'a> {
    backend: &'a SimilarityBackend,
    reference: Raster,
    reference_embedding: Option<Vec<f64>>,
}

impl PreparedScorer<'_> {
    pub fn reference(&self) -> &Raster {
        &self.reference
    }

    pub fn score(&self, image: &Raster) -> Result<f64> {
        match self.backend {
            SimilarityBackend::NegMse => raster::neg_mse(image, &self.reference),
            SimilarityBackend::Ssim => raster::ssim(image, &self.reference),
            SimilarityBackend::Embedding(client) => {
                if image.dimensions() != self.reference.dimensions() {
                    return Err(Error::DimensionMismatch {
                        left: image.dimensions(),
                        right: self.reference.dimensions(),
                    });
                }
                let embedding = client.embed(image)?;
                cosine(&embedding, self.reference_embedding.as_deref().unwrap_or(&[]))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Helpful,
    Harmful,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooThresholds {
    pub helpful: f64,
    pub harmful: f64,
}

impl Default for LooThresholds {
    fn default() -> Self {
        LooThresholds {
            helpful: 0.005,
            harmful: -0.005,
        }
    }
}

impl LooThresholds {
    pub fn classify(&self, delta: f64) -> Classification {
        if delta > self.helpful {
            Classification::Helpful
        } else if delta < self.harmful {
            Classification::Harmful
        } else {
            Classification::Neutral
        }
    }
}

#[derive(Debug, Clone)]
pub struct LooResult {
    pub index: usize,
    pub delta: f64,
    pub classification: Classification,
    pub footprint: DiffMap,
    pub footprint_mass: f64,
}

#[derive(Debug, Clone)]
pub struct LooAnalysis {
    pub full_score: f64,
    pub results: Vec<LooResult>,
    /// Number of renders performed: one full plus one per element.
    pub renders: usize,
}

impl LooAnalysis {
    pub fn deltas(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.delta).collect()
    }

    pub fn footprints(&self) -> Vec<DiffMap> {
        self.results.iter().map(|r| r.footprint.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LooOptions {
    pub render: RenderSettings,
    pub thresholds: LooThresholds,
    pub workers: usize,
}

impl Default for LooOptions {
    fn default() -> Self {
        LooOptions {
            render: RenderSettings::default(),
            thresholds: LooThresholds::default(),
            workers: 1,
        }
    }
}

/// Leave-one-out analysis: Δ(e_i) = S(full, ref) − S(full \ e_i, ref) and
/// footprint M_i = |render(full) − render(full \ e_i)| for every element.
pub fn loo_analyze(
    doc: &SvgDocument,
    reference: &Raster,
    backend: &SimilarityBackend,
    options: &LooOptions,
) -> Result<LooAnalysis> {
    if doc.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let size = options.render.size;
    if reference.dimensions() != (size, size) {
        return Err(Error::DimensionMismatch {
            left: (size, size),
            right: reference.dimensions(),
        });
    }
    let scorer = backend.prepare(reference)?;
    let full = options.render.render(doc)?;
    let full_score = scorer.score(&full)?;

    let results = map_indexed(options.workers, doc.len(), |i| {
        let ablated = options.render.render(&doc.ablate(i)?)?;
        let delta = full_score - scorer.score(&ablated)?;
        let footprint = raster::abs_diff(&full, &ablated)?;
        let footprint_mass = footprint.mass();
        Ok(LooResult {
            index: i,
            delta,
            classification: options.thresholds.classify(delta),
            footprint,
            footprint_mass,
        })
    })?;

    Ok(LooAnalysis {
        full_score,
        renders: results.len() + 1,
        results,
    })
}
