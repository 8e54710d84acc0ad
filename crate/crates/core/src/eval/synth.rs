//! Seeded synthetic retrieval benchmark.
//!
//! A shared pool of prototype bit patterns stands in for the recurring local
//! structures of real images. Every class owns a small mixture whose
//! components are class-specific variants of randomly chosen prototypes, so
//! different classes produce descriptors that land near the same prototypes
//! but differ in a minority of bits. Images draw their own, bursty component
//! proportions around the class proportions before sampling descriptors.
//! Queries additionally flip every bit with a fixed probability.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::bitdesc::{BinaryDescriptor, FeatureSet};
use crate::bmm::{sample_categorical, seeded_rng, BmmModel};
use crate::error::{Error, Result};

use super::RelevanceTruth;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub refs_per_class: usize,
    pub queries_per_class: usize,
    /// Descriptors per image.
    pub descriptors_per_image: usize,
    pub dims: usize,
    /// Per-bit flip probability applied to query descriptors.
    pub flip_rate: f64,
    pub seed: u64,
    /// Extra database images drawn from classes that no query belongs to.
    pub distractors: usize,
    /// Size of the shared prototype pool.
    pub prototypes: usize,
    pub components_per_class: usize,
    /// Fraction of prototype bits rewritten to form a class-specific variant.
    pub class_variation: f64,
    /// Component bit probabilities are `peak` or `1 - peak`.
    pub peak: f64,
    /// Shape of the per-image gamma draws for component proportions; smaller
    /// values make images burstier.
    pub burstiness_shape: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes: 8,
            refs_per_class: 12,
            queries_per_class: 4,
            descriptors_per_image: 200,
            dims: 64,
            flip_rate: 0.05,
            seed: 2015,
            distractors: 0,
            prototypes: 32,
            components_per_class: 6,
            class_variation: 0.05,
            peak: 0.1,
            burstiness_shape: 0.5,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("n_classes", self.n_classes),
            ("refs_per_class", self.refs_per_class),
            ("queries_per_class", self.queries_per_class),
            ("descriptors_per_image", self.descriptors_per_image),
            ("prototypes", self.prototypes),
            ("components_per_class", self.components_per_class),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        if !(1..=crate::bitdesc::MAX_DIMS).contains(&self.dims) {
            return Err(Error::InvalidDimension(self.dims));
        }
        if !(0.0..0.5).contains(&self.flip_rate) {
            return Err(Error::param("flip_rate", format!("{} not in [0, 0.5)", self.flip_rate)));
        }
        if !(0.0..=1.0).contains(&self.class_variation) {
            return Err(Error::param("class_variation", "must be in [0, 1]"));
        }
        if !(self.peak > 0.0 && self.peak < 0.5) {
            return Err(Error::param("peak", "must be in (0, 0.5)"));
        }
        if !(self.burstiness_shape > 0.0) {
            return Err(Error::param("burstiness_shape", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthImage {
    pub id: String,
    pub class: String,
    pub features: FeatureSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub references: Vec<SynthImage>,
    pub queries: Vec<SynthImage>,
    pub distractors: Vec<SynthImage>,
    pub truth: RelevanceTruth,
}

impl SynthDataset {
    /// References followed by distractors: everything that goes in the database.
    pub fn database(&self) -> impl Iterator<Item = &SynthImage> {
        self.references.iter().chain(&self.distractors)
    }
}

// Independent streams so that e.g. adding distractors leaves references unchanged.
const STREAM_PROTOTYPES: u64 = 1;
const STREAM_CLASSES: u64 = 2;
const STREAM_IMAGES: u64 = 3;
const STREAM_DISTRACTOR_CLASSES: u64 = 4;
const STREAM_DISTRACTORS: u64 = 5;
const STREAM_TRAINING: u64 = 6;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(id);
    rng
}

struct ClassModel {
    weights: Vec<f64>,
    components: Vec<BmmModel>,
}

fn gamma_draw(rng: &mut ChaCha8Rng, shape: f64) -> f64 {
    Gamma::new(shape, 1.0).expect("shape validated").sample(rng)
}

fn make_prototypes(cfg: &SynthConfig) -> Vec<Vec<bool>> {
    let mut rng = stream(cfg.seed, STREAM_PROTOTYPES);
    (0..cfg.prototypes)
        .map(|_| (0..cfg.dims).map(|_| rng.random::<bool>()).collect())
        .collect()
}

fn make_class(cfg: &SynthConfig, prototypes: &[Vec<bool>], rng: &mut ChaCha8Rng) -> Result<ClassModel> {
    let mut weights = Vec::with_capacity(cfg.components_per_class);
    let mut components = Vec::with_capacity(cfg.components_per_class);
    for _ in 0..cfg.components_per_class {
        let proto = &prototypes[rng.random_range(0..prototypes.len())];
        let mu: Vec<f64> = proto
            .iter()
            .map(|&bit| {
                let bit = if rng.random::<f64>() < cfg.class_variation {
                    rng.random::<bool>()
                } else {
                    bit
                };
                if bit {
                    1.0 - cfg.peak
                } else {
                    cfg.peak
                }
            })
            .collect();
        components.push(BmmModel::new(vec![1.0], vec![mu], cfg.peak.min(1e-4))?);
        weights.push(0.5 + rng.random::<f64>());
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(ClassModel { weights, components })
}

fn sample_image(
    cfg: &SynthConfig,
    class: &ClassModel,
    flip_rate: f64,
    rng: &mut ChaCha8Rng,
) -> FeatureSet {
    let proportions: Vec<f64> = class
        .weights
        .iter()
        .map(|w| w * gamma_draw(rng, cfg.burstiness_shape))
        .collect();
    let proportions = if proportions.iter().sum::<f64>() > 0.0 {
        proportions
    } else {
        class.weights.clone()
    };
    let xs = (0..cfg.descriptors_per_image)
        .map(|_| {
            let c = sample_categorical(rng, &proportions);
            let x = class.components[c].sample(rng);
            if flip_rate > 0.0 {
                BinaryDescriptor::from_fn(cfg.dims, |d| x.bit(d) ^ (rng.random::<f64>() < flip_rate))
                    .expect("dims validated")
            } else {
                x
            }
        })
        .collect();
    FeatureSet::new(cfg.dims, xs).expect("dims validated")
}

/// Generates references, queries, distractors and the relevance truth
/// (same-class references are relevant).
pub fn synth_dataset(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let prototypes = make_prototypes(cfg);
    let mut class_rng = stream(cfg.seed, STREAM_CLASSES);
    let classes = (0..cfg.n_classes)
        .map(|_| make_class(cfg, &prototypes, &mut class_rng))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = stream(cfg.seed, STREAM_IMAGES);
    let mut references = Vec::new();
    let mut queries = Vec::new();
    let mut truth = RelevanceTruth::new();
    for (c, class) in classes.iter().enumerate() {
        let label = format!("class{c:02}");
        let refs: Vec<SynthImage> = (0..cfg.refs_per_class)
            .map(|j| SynthImage {
                id: format!("c{c:02}_r{j:03}"),
                class: label.clone(),
                features: sample_image(cfg, class, 0.0, &mut rng),
            })
            .collect();
        for j in 0..cfg.queries_per_class {
            let id = format!("c{c:02}_q{j:03}");
            truth.insert(id.clone(), refs.iter().map(|r| r.id.clone()).collect());
            queries.push(SynthImage {
                id,
                class: label.clone(),
                features: sample_image(cfg, class, cfg.flip_rate, &mut rng),
            });
        }
        references.extend(refs);
    }

    let mut distractors = Vec::with_capacity(cfg.distractors);
    if cfg.distractors > 0 {
        let n_extra = cfg.distractors.div_ceil(cfg.refs_per_class);
        let mut extra_rng = stream(cfg.seed, STREAM_DISTRACTOR_CLASSES);
        let extra = (0..n_extra)
            .map(|_| make_class(cfg, &prototypes, &mut extra_rng))
            .collect::<Result<Vec<_>>>()?;
        let mut rng = stream(cfg.seed, STREAM_DISTRACTORS);
        for j in 0..cfg.distractors {
            let c = j % n_extra;
            distractors.push(SynthImage {
                id: format!("d{j:05}"),
                class: format!("distractor{c:03}"),
                features: sample_image(cfg, &extra[c], 0.0, &mut rng),
            });
        }
    }

    Ok(SynthDataset {
        references,
        queries,
        distractors,
        truth,
    })
}

/// Descriptors for fitting the mixture or codebook, drawn from
/// `n_background_classes` fresh classes over the same prototype pool and
/// disjoint from every benchmark image.
pub fn synth_training_set(cfg: &SynthConfig, n_background_classes: usize, count: usize) -> Result<FeatureSet> {
    cfg.validate()?;
    if n_background_classes == 0 {
        return Err(Error::param("n_background_classes", "must be at least 1"));
    }
    let prototypes = make_prototypes(cfg);
    let mut rng = stream(cfg.seed, STREAM_TRAINING);
    let classes = (0..n_background_classes)
        .map(|_| make_class(cfg, &prototypes, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let per_image = cfg.descriptors_per_image;
    let mut out = FeatureSet::empty(cfg.dims)?;
    let mut k = 0;
    while out.len() < count {
        let img = sample_image(cfg, &classes[k % classes.len()], 0.0, &mut rng);
        let take = per_image.min(count - out.len());
        for x in &img.descriptors()[..take] {
            out.push(x.clone())?;
        }
        k += 1;
    }
    Ok(out)
}
