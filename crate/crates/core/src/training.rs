//! Fitting band weights and the prominence threshold to a labelled corpus.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, Corpus, VowelSegment};
use crate::envelope::{
    compute_envelope_trace, BandAnalysis, PipelineConfig, WeightVector, NUM_BANDS,
};
use crate::error::{Error, Result};
use crate::metrics::{
    cost_inv_f, cost_mae, match_detections, EvalReport, MatchResult, UtteranceEval,
};
use crate::peaks::{count_syllables, detect_syllables, DetectionResult};
use crate::pso::{optimize, PsoConfig, SearchSpace, SwarmResult};

pub const WEIGHT_RANGE: (f64, f64) = (-2.0, 5.0);
pub const THRESHOLD_RANGE: (f64, f64) = (0.01, 10.0);

/// Position layout: seven band weights followed by the prominence threshold.
pub const PARAM_DIM: usize = NUM_BANDS + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum CostKind {
    #[serde(rename = "inv_f")]
    #[value(name = "inv_f")]
    InvF,
    #[serde(rename = "mae")]
    #[value(name = "mae")]
    Mae,
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::InvF => "inv_f",
            CostKind::Mae => "mae",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub weights: WeightVector,
    pub prominence_threshold: f64,
}

impl PipelineParams {
    pub fn from_position(x: &[f64]) -> Self {
        assert_eq!(
            x.len(),
            PARAM_DIM,
            "parameter vector must have {PARAM_DIM} entries"
        );
        PipelineParams {
            weights: WeightVector(std::array::from_fn(|i| x[i])),
            prominence_threshold: x[NUM_BANDS],
        }
    }

    pub fn to_position(&self) -> Vec<f64> {
        let mut v = self.weights.0.to_vec();
        v.push(self.prominence_threshold);
        v
    }

    pub fn validate(&self) -> Result<()> {
        if !self.weights.is_finite() {
            return Err(Error::validation("weights must be finite"));
        }
        if !(self.prominence_threshold > 0.0 && self.prominence_threshold.is_finite()) {
            return Err(Error::validation("prominence threshold must be positive"));
        }
        Ok(())
    }
}

/// Weights in [-2, 5], threshold in [0.01, 10].
pub fn default_search_space() -> SearchSpace {
    let mut lower = vec![WEIGHT_RANGE.0; NUM_BANDS];
    let mut upper = vec![WEIGHT_RANGE.1; NUM_BANDS];
    lower.push(THRESHOLD_RANGE.0);
    upper.push(THRESHOLD_RANGE.1);
    SearchSpace::new(lower, upper).expect("static bounds are valid")
}

/// Detection on one clip through the uncached pipeline.
pub fn detect_clip(
    clip: &AudioClip,
    params: &PipelineParams,
    config: &PipelineConfig,
) -> Result<DetectionResult> {
    let t = compute_envelope_trace(clip, &params.weights, config)?;
    Ok(detect_syllables(
        &t.smoothed.values,
        &t.mask,
        params.prominence_threshold,
        t.hop_s,
        clip.duration_s(),
    ))
}

/// A corpus with every weight-independent quantity precomputed.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    ids: Vec<String>,
    analyses: Vec<BandAnalysis>,
    segments: Vec<Vec<VowelSegment>>,
    counts: Vec<usize>,
}

impl TrainingSet {
    pub fn new(corpus: &Corpus, config: &PipelineConfig) -> Result<Self> {
        corpus.ensure_non_empty()?;
        config.validate()?;
        let analyses = corpus
            .utterances
            .par_iter()
            .map(|u| BandAnalysis::new(&u.audio, config).map_err(|e| e.in_utterance(&u.id)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ids: corpus.utterances.iter().map(|u| u.id.clone()).collect(),
            analyses,
            segments: corpus
                .utterances
                .iter()
                .map(|u| u.vowel_segments.clone())
                .collect(),
            counts: corpus.utterances.iter().map(|u| u.syllable_count).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.analyses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.analyses.is_empty()
    }

    pub fn detections(&self, params: &PipelineParams) -> Vec<DetectionResult> {
        self.analyses
            .iter()
            .map(|a| {
                let env = a.envelope(&params.weights);
                detect_syllables(
                    &env.values,
                    &a.mask,
                    params.prominence_threshold,
                    a.hop_s,
                    a.duration_s,
                )
            })
            .collect()
    }

    pub fn cost(&self, params: &PipelineParams, kind: CostKind) -> f64 {
        let mut env = Vec::new();
        match kind {
            CostKind::InvF => {
                let mut total = MatchResult::default();
                for (a, segs) in self.analyses.iter().zip(&self.segments) {
                    a.envelope_into(&params.weights, &mut env);
                    let det = detect_syllables(
                        &env,
                        &a.mask,
                        params.prominence_threshold,
                        a.hop_s,
                        a.duration_s,
                    );
                    total += match_detections(&det.times(), segs);
                }
                cost_inv_f(&total)
            }
            CostKind::Mae => {
                let predicted: Vec<usize> = self
                    .analyses
                    .iter()
                    .map(|a| {
                        a.envelope_into(&params.weights, &mut env);
                        count_syllables(&env, &a.mask, params.prominence_threshold)
                    })
                    .collect();
                cost_mae(&predicted, &self.counts).expect("training set is non-empty")
            }
        }
    }

    pub fn evaluate(&self, params: &PipelineParams) -> Result<EvalReport> {
        let rows = self
            .detections(params)
            .iter()
            .zip(&self.ids)
            .zip(self.segments.iter().zip(&self.analyses))
            .map(|((det, id), (segs, a))| UtteranceEval::new(id, &det.times(), segs, a.duration_s))
            .collect();
        EvalReport::from_rows(rows)
    }
}

/// Cost computed end to end from audio, without any caching.
pub fn pipeline_cost_uncached(
    corpus: &Corpus,
    params: &PipelineParams,
    kind: CostKind,
    config: &PipelineConfig,
) -> Result<f64> {
    let dets = corpus
        .utterances
        .iter()
        .map(|u| detect_clip(&u.audio, params, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(match kind {
        CostKind::InvF => cost_inv_f(
            &dets
                .iter()
                .zip(&corpus.utterances)
                .map(|(d, u)| match_detections(&d.times(), &u.vowel_segments))
                .sum(),
        ),
        CostKind::Mae => {
            let predicted: Vec<usize> = dets.iter().map(|d| d.count).collect();
            let actual: Vec<usize> = corpus.utterances.iter().map(|u| u.syllable_count).collect();
            cost_mae(&predicted, &actual)?
        }
    })
}

/// Evaluation through the uncached pipeline; utterances run concurrently, rows keep corpus order.
pub fn evaluate_corpus(
    corpus: &Corpus,
    params: &PipelineParams,
    config: &PipelineConfig,
) -> Result<EvalReport> {
    corpus.ensure_non_empty()?;
    let rows = corpus
        .utterances
        .par_iter()
        .map(|u| {
            let det = detect_clip(&u.audio, params, config).map_err(|e| e.in_utterance(&u.id))?;
            Ok(UtteranceEval::new(
                &u.id,
                &det.times(),
                &u.vowel_segments,
                u.audio.duration_s(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_rows(rows)
}

pub fn train_on_set(
    set: &TrainingSet,
    kind: CostKind,
    space: &SearchSpace,
    pso: &PsoConfig,
) -> Result<(PipelineParams, SwarmResult)> {
    if space.dim() != PARAM_DIM {
        return Err(Error::validation(format!(
            "search space must have {PARAM_DIM} dimensions"
        )));
    }
    let result = optimize(
        |x| set.cost(&PipelineParams::from_position(x), kind),
        space,
        pso,
    )?;
    Ok((PipelineParams::from_position(&result.best_position), result))
}

/// Joint swarm search over the seven weights and the threshold.
pub fn train_pipeline(
    corpus: &Corpus,
    kind: CostKind,
    config: &PipelineConfig,
    pso: &PsoConfig,
) -> Result<(PipelineParams, SwarmResult)> {
    let set = TrainingSet::new(corpus, config)?;
    train_on_set(&set, kind, &default_search_space(), pso)
}

/// Optimized parameters plus the configuration and provenance needed to reuse them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub weights: [f64; NUM_BANDS],
    pub prominence_threshold: f64,
    pub pipeline_config: PipelineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_kind: Option<CostKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ParamsFile {
    pub fn new(params: &PipelineParams, config: &PipelineConfig) -> Self {
        ParamsFile {
            weights: params.weights.0,
            prominence_threshold: params.prominence_threshold,
            pipeline_config: config.clone(),
            cost_kind: None,
            best_cost: None,
            train_size: None,
            seed: None,
        }
    }

    pub fn params(&self) -> PipelineParams {
        PipelineParams {
            weights: WeightVector(self.weights),
            prominence_threshold: self.prominence_threshold,
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Self = serde_json::from_str(&text)?;
        file.params().validate()?;
        file.pipeline_config.validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}
