//! Bernoulli mixture model over packed binary descriptors.
//!
//! Densities are evaluated in log space: for each component the model caches
//! `sum_d log(1 - mu_id)` and the per-bit log-odds `log mu_id - log(1 - mu_id)`,
//! so the log density of a descriptor is the cached base plus the log-odds of
//! its set bits. Posteriors use max-subtraction before exponentiating, which
//! keeps 256-bit (and longer) descriptors well away from underflow.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bitdesc::{BinaryDescriptor, FeatureSet};
use crate::error::{Error, Result};

/// Default clamp for the Bernoulli parameters.
pub const DEFAULT_EPS: f64 = 1e-4;

/// Name of the generator used for seeded initialization, recorded in model files.
pub const RNG_NAME: &str = "chacha8";

/// Tolerance on `sum(weights) == 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixture parameters: `N` weights and an `N x D` matrix of bit probabilities.
#[derive(Clone, Debug)]
pub struct BmmModel {
    weights: Vec<f64>,
    mu: Vec<f64>,
    dims: usize,
    eps: f64,
    log_weights: Vec<f64>,
    log_base: Vec<f64>,
    log_odds: Vec<f64>,
}

impl PartialEq for BmmModel {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.eps.to_bits() == other.eps.to_bits()
            && self.weights.len() == other.weights.len()
            && self
                .weights
                .iter()
                .chain(&self.mu)
                .zip(other.weights.iter().chain(&other.mu))
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl BmmModel {
    /// Builds a model from weights and per-component bit probabilities,
    /// validating the simplex and clamp invariants.
    pub fn new(weights: Vec<f64>, mu: Vec<Vec<f64>>, eps: f64) -> Result<Self> {
        let dims = mu.first().map_or(0, Vec::len);
        if mu.len() != weights.len() {
            return Err(Error::validation(
                "mu",
                format!("{} rows for {} weights", mu.len(), weights.len()),
            ));
        }
        for (i, row) in mu.iter().enumerate() {
            if row.len() != dims {
                return Err(Error::validation(
                    format!("mu[{i}]"),
                    format!("length {} differs from {dims}", row.len()),
                ));
            }
        }
        Self::from_flat(weights, mu.concat(), dims, eps)
    }

    /// Same as [`new`](Self::new) with `mu` laid out row-major (`N * D`).
    pub fn from_flat(weights: Vec<f64>, mu: Vec<f64>, dims: usize, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::validation("eps", format!("{eps} not in (0, 0.5)")));
        }
        if weights.is_empty() {
            return Err(Error::validation("weights", "no components"));
        }
        if !(1..=crate::bitdesc::MAX_DIMS).contains(&dims) {
            return Err(Error::InvalidDimension(dims));
        }
        if mu.len() != weights.len() * dims {
            return Err(Error::validation(
                "mu",
                format!("expected {} entries, found {}", weights.len() * dims, mu.len()),
            ));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::validation(format!("weights[{i}]"), format!("{w} is not a probability")));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::validation("weights", format!("sum to {total}, expected 1")));
        }
        for (k, &m) in mu.iter().enumerate() {
            if !(m >= eps && m <= 1.0 - eps) {
                return Err(Error::validation(
                    format!("mu[{}][{}]", k / dims, k % dims),
                    format!("{m} outside [{eps}, {}]", 1.0 - eps),
                ));
            }
        }

        let log_weights = weights.iter().map(|w| w.ln()).collect();
        let log_odds = mu.iter().map(|&m| m.ln() - (1.0 - m).ln()).collect();
        let log_base = mu
            .chunks_exact(dims)
            .map(|row| row.iter().map(|&m| (1.0 - m).ln()).sum())
            .collect();
        Ok(Self {
            weights,
            mu,
            dims,
            eps,
            log_weights,
            log_base,
            log_odds,
        })
    }

    #[inline]
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn eps(&self) -> f64 {
        self.eps
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row-major `N x D` bit probabilities.
    #[inline]
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    #[inline]
    pub fn mu_row(&self, i: usize) -> &[f64] {
        &self.mu[i * self.dims..(i + 1) * self.dims]
    }

    /// Model restricted to the first `d_prime` bits. Bits are independent
    /// within a component, so the prefix of `mu` is the marginal model.
    pub fn truncate(&self, d_prime: usize) -> Result<Self> {
        if d_prime == 0 || d_prime > self.dims {
            return Err(Error::param(
                "d_prime",
                format!("must be in 1..={}, got {d_prime}", self.dims),
            ));
        }
        let mu = self
            .mu
            .chunks_exact(self.dims)
            .flat_map(|row| row[..d_prime].iter().copied())
            .collect();
        Self::from_flat(self.weights.clone(), mu, d_prime, self.eps)
    }

    /// `log p_i(x)` for component `i`.
    pub fn log_component_density(&self, i: usize, x: &BinaryDescriptor) -> Result<f64> {
        Error::check_dims(self.dims, x.dims())?;
        if i >= self.n_components() {
            return Err(Error::param(
                "component",
                format!("{i} out of range for {} components", self.n_components()),
            ));
        }
        Ok(self.log_density_unchecked(i, x))
    }

    #[inline]
    fn log_density_unchecked(&self, i: usize, x: &BinaryDescriptor) -> f64 {
        let odds = &self.log_odds[i * self.dims..(i + 1) * self.dims];
        self.log_base[i] + x.ones().map(|d| odds[d]).sum::<f64>()
    }

    /// Fills `gamma` with the posterior over components and returns `log p(x)`.
    /// `gamma.len()` must equal `N` and `x` must match `D`.
    pub(crate) fn posterior_into(&self, x: &BinaryDescriptor, gamma: &mut [f64]) -> f64 {
        debug_assert_eq!(gamma.len(), self.n_components());
        let mut max = f64::NEG_INFINITY;
        for (i, g) in gamma.iter_mut().enumerate() {
            *g = self.log_weights[i] + self.log_density_unchecked(i, x);
            max = max.max(*g);
        }
        normalize_log_in_place(gamma, max)
    }

    /// [`posterior_into`](Self::posterior_into) for a descriptor given by its
    /// ascending set-bit indices.
    pub(crate) fn posterior_from_ones(&self, ones: &[usize], gamma: &mut [f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for (i, g) in gamma.iter_mut().enumerate() {
            let odds = &self.log_odds[i * self.dims..(i + 1) * self.dims];
            *g = self.log_weights[i] + (self.log_base[i] + ones.iter().map(|&d| odds[d]).sum::<f64>());
            max = max.max(*g);
        }
        normalize_log_in_place(gamma, max)
    }

    /// Occupancy probabilities `gamma(i) = p(i | x)`.
    pub fn posterior(&self, x: &BinaryDescriptor) -> Result<Occupancy> {
        Error::check_dims(self.dims, x.dims())?;
        let mut gamma = vec![0.0; self.n_components()];
        self.posterior_into(x, &mut gamma);
        Ok(Occupancy(gamma))
    }

    /// `log p(x)` under the mixture.
    pub fn log_likelihood(&self, x: &BinaryDescriptor) -> Result<f64> {
        Error::check_dims(self.dims, x.dims())?;
        let mut gamma = vec![0.0; self.n_components()];
        Ok(self.posterior_into(x, &mut gamma))
    }

    /// Mean per-descriptor log-likelihood `(1/T) log p(X)`.
    pub fn mean_log_likelihood(&self, data: &FeatureSet) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyFeatureSet);
        }
        Error::check_dims(self.dims, data.dims())?;
        let mut gamma = vec![0.0; self.n_components()];
        let total: f64 = data.iter().map(|x| self.posterior_into(x, &mut gamma)).sum();
        Ok(total / data.len() as f64)
    }

    /// Draws one descriptor: a component by weight, then each bit by its `mu`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BinaryDescriptor {
        let component = sample_categorical(rng, &self.weights);
        let row = self.mu_row(component);
        BinaryDescriptor::from_fn(self.dims, |d| rng.random::<f64>() < row[d])
            .expect("model dims validated at construction")
    }

    /// Draws `count` descriptors into a feature set.
    pub fn sample_set<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> FeatureSet {
        let xs = (0..count).map(|_| self.sample(rng)).collect();
        FeatureSet::new(self.dims, xs).expect("model dims validated at construction")
    }
}

/// Turns log-weights into probabilities, dividing out `exp(pivot)` before
/// exponentiating. Returns the log of the original total.
fn normalize_log_in_place(values: &mut [f64], pivot: f64) -> f64 {
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v - pivot).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
    pivot + total.ln()
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let u = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Posterior over mixture components for one descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupancy(pub Vec<f64>);

impl Occupancy {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Index of the largest probability, ties to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once the relative gain in mean log-likelihood drops below this.
    pub rel_tol: f64,
    pub seed: u64,
    /// Components whose share of the posterior mass falls below this are reseeded.
    pub min_component_mass: f64,
    pub eps: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            rel_tol: 1e-5,
            seed: 0,
            min_component_mass: 1e-6,
            eps: DEFAULT_EPS,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::param("rel_tol", "must be nonnegative"));
        }
        if !(self.min_component_mass >= 0.0 && self.min_component_mass < 1.0) {
            return Err(Error::param("min_component_mass", "must be in [0, 1)"));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::param("eps", "must be in (0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReseedEvent {
    pub iteration: usize,
    pub component: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmReport {
    pub iterations_run: usize,
    /// Mean log-likelihood of the initial model followed by the model after
    /// each M-step, so `trace.len() == iterations_run + 1`.
    pub log_likelihood_trace: Vec<f64>,
    pub reseed_events: Vec<ReseedEvent>,
    pub converged: bool,
}

impl EmReport {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().expect("trace is never empty")
    }
}

/// Expected sufficient statistics of a data set under a model: per-component
/// posterior mass `S_i` and posterior-weighted bit counts `sum_s gamma_s(i) x_sd`.
#[derive(Clone, Debug, PartialEq)]
pub struct SufficientStats {
    pub count: usize,
    pub mass: Vec<f64>,
    pub bit_mass: Vec<f64>,
    pub log_likelihood: f64,
    dims: usize,
}

/// Upper bound on the number of E-step chunks. The chunk size depends only on
/// the data size, so the reduction order is the same for any thread count.
const MAX_CHUNKS: usize = 64;
const MIN_CHUNK: usize = 256;

impl SufficientStats {
    fn zeros(n: usize, dims: usize) -> Self {
        Self {
            count: 0,
            mass: vec![0.0; n],
            bit_mass: vec![0.0; n * dims],
            log_likelihood: 0.0,
            dims,
        }
    }

    fn accumulate_serial(model: &BmmModel, xs: &[BinaryDescriptor]) -> Self {
        let n = model.n_components();
        let dims = model.dims();
        let mut stats = Self::zeros(n, dims);
        let mut gamma = vec![0.0; n];
        for x in xs {
            stats.log_likelihood += model.posterior_into(x, &mut gamma);
            for (i, &g) in gamma.iter().enumerate() {
                stats.mass[i] += g;
                let row = &mut stats.bit_mass[i * dims..(i + 1) * dims];
                for d in x.ones() {
                    row[d] += g;
                }
            }
        }
        stats.count = xs.len();
        stats
    }

    fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.log_likelihood += other.log_likelihood;
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
        for (a, b) in self.bit_mass.iter_mut().zip(&other.bit_mass) {
            *a += b;
        }
    }

    /// E-step over `data`. Chunks are processed in parallel and merged in order.
    pub fn accumulate(model: &BmmModel, data: &FeatureSet) -> Result<Self> {
        Error::check_dims(model.dims(), data.dims())?;
        let xs = data.descriptors();
        let chunk = xs.len().div_ceil(MAX_CHUNKS).max(MIN_CHUNK);
        let parts: Vec<Self> = xs
            .par_chunks(chunk)
            .map(|c| Self::accumulate_serial(model, c))
            .collect();
        let mut total = Self::zeros(model.n_components(), model.dims());
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }

    pub fn mean_log_likelihood(&self) -> f64 {
        self.log_likelihood / self.count as f64
    }

    /// M-step: `w_i = S_i / S`, `mu_id = sum_s gamma_s(i) x_sd / S_i`,
    /// clamped to `[eps, 1 - eps]`. Fails when a component carries no mass.
    pub fn maximize(&self, eps: f64) -> Result<BmmModel> {
        if let Some(i) = self.mass.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::validation(format!("mass[{i}]"), "component has no posterior mass"));
        }
        let total = self.count as f64;
        let weights = self.mass.iter().map(|m| m / total).collect();
        let mu = self
            .bit_mass
            .chunks_exact(self.dims)
            .zip(&self.mass)
            .flat_map(|(row, &m)| row.iter().map(move |b| (b / m).clamp(eps, 1.0 - eps)))
            .collect();
        BmmModel::from_flat(renormalized(weights), mu, self.dims, eps)
    }
}

fn renormalized(mut weights: Vec<f64>) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// Initial model: uniform weights and `mu ~ U(0.25, 0.75)` from the seeded generator.
pub fn initial_model(n_components: usize, dims: usize, rng: &mut ChaCha8Rng, eps: f64) -> Result<BmmModel> {
    let weights = vec![1.0 / n_components as f64; n_components];
    let mu = (0..n_components * dims)
        .map(|_| 0.25 + 0.5 * rng.random::<f64>())
        .collect();
    BmmModel::from_flat(weights, mu, dims, eps)
}

/// Fits an `n_components` mixture to `data` with expectation-maximization.
pub fn fit_em(data: &FeatureSet, n_components: usize, cfg: &EmConfig) -> Result<(BmmModel, EmReport)> {
    cfg.validate()?;
    if n_components == 0 {
        return Err(Error::param("n_components", "must be at least 1"));
    }
    if data.len() < n_components {
        return Err(Error::TooFewSamples {
            needed: n_components,
            available: data.len(),
        });
    }
    let dims = data.dims();
    let mut rng = seeded_rng(cfg.seed);
    let mut model = initial_model(n_components, dims, &mut rng, cfg.eps)?;

    let mut stats = SufficientStats::accumulate(&model, data)?;
    let mut trace = vec![stats.mean_log_likelihood()];
    let mut reseed_events = Vec::new();
    let mut iterations_run = 0;
    let mut converged = false;

    for iteration in 1..=cfg.max_iters {
        let (next, reseeded) = m_step(&stats, data, cfg, &mut rng, iteration, &mut reseed_events)?;
        model = next;
        iterations_run = iteration;
        stats = SufficientStats::accumulate(&model, data)?;
        let ll = stats.mean_log_likelihood();
        let prev = *trace.last().expect("trace seeded above");
        trace.push(ll);
        if !reseeded && ll - prev < cfg.rel_tol * prev.abs() {
            converged = true;
            break;
        }
    }

    Ok((
        model,
        EmReport {
            iterations_run,
            log_likelihood_trace: trace,
            reseed_events,
            converged,
        },
    ))
}

fn m_step(
    stats: &SufficientStats,
    data: &FeatureSet,
    cfg: &EmConfig,
    rng: &mut ChaCha8Rng,
    iteration: usize,
    events: &mut Vec<ReseedEvent>,
) -> Result<(BmmModel, bool)> {
    let n = stats.mass.len();
    let dims = stats.dims;
    let total = stats.count as f64;
    let eps = cfg.eps;
    let mut weights = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n * dims);
    let mut reseeded = false;
    for i in 0..n {
        let mass = stats.mass[i];
        if !(mass / total >= cfg.min_component_mass) || !(mass > 0.0) {
            let x = &data.descriptors()[rng.random_range(0..data.len())];
            mu.extend((0..dims).map(|d| if x.bit(d) { 1.0 - eps } else { eps }));
            weights.push(1.0 / n as f64);
            events.push(ReseedEvent { iteration, component: i });
            reseeded = true;
        } else {
            weights.push(mass / total);
            let row = &stats.bit_mass[i * dims..(i + 1) * dims];
            mu.extend(row.iter().map(|b| (b / mass).clamp(eps, 1.0 - eps)));
        }
    }
    Ok((BmmModel::from_flat(renormalized(weights), mu, dims, eps)?, reseeded))
}
