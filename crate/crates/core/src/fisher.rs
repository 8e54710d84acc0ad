//! Fisher vectors of binary descriptor sets under a Bernoulli mixture.
//!
//! The score with respect to `mu_id` averages, over descriptors,
//! `gamma_t(i) / mu_id` for set bits and `-gamma_t(i) / (1 - mu_id)` for clear
//! bits. It is normalized by the inverse square root of the closed-form
//! diagonal Fisher information
//!
//! ```text
//! F_id = T w_i ( sum_j w_j mu_jd / mu_id^2 + sum_j w_j (1 - mu_jd) / (1 - mu_id)^2 )
//! ```
//!
//! The fast variant replaces the posterior with a one-hot assignment to the
//! component whose thresholded `mu` row is nearest in Hamming distance.

use std::fmt;
use std::str::FromStr;

use crate::bitdesc::{nearest, BinaryDescriptor, FeatureSet};
use crate::bmm::{argmax, seeded_rng, BmmModel};
use crate::error::{Error, Result};

/// Normalization applied to an encoded vector so far.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormState {
    Raw,
    L2,
    Power,
    PowerL2,
    Intra,
}

impl NormState {
    pub const ALL: [NormState; 5] = [
        NormState::Raw,
        NormState::L2,
        NormState::Power,
        NormState::PowerL2,
        NormState::Intra,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NormState::Raw => "raw",
            NormState::L2 => "l2",
            NormState::Power => "power",
            NormState::PowerL2 => "power_l2",
            NormState::Intra => "intra",
        }
    }

    /// Whether vectors in this state have unit Euclidean norm.
    pub fn is_unit(self) -> bool {
        matches!(self, NormState::L2 | NormState::PowerL2 | NormState::Intra)
    }
}

impl fmt::Display for NormState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NormState::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown normalization state {s:?}")))
    }
}

/// Component-major Fisher vector: block `i` holds entries `i*D .. i*D + D`.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherVec {
    values: Vec<f64>,
    n_components: usize,
    dims: usize,
    norm_state: NormState,
}

impl FisherVec {
    pub fn new(values: Vec<f64>, n_components: usize, dims: usize, norm_state: NormState) -> Result<Self> {
        if values.len() != n_components * dims {
            return Err(Error::validation(
                "values",
                format!("length {} != {n_components} x {dims}", values.len()),
            ));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("values[{k}]"), "not finite"));
        }
        Ok(Self {
            values,
            n_components,
            dims,
            norm_state,
        })
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn n_components(&self) -> usize {
        self.n_components
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn norm_state(&self) -> NormState {
        self.norm_state
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        Error::check_dims(self.len(), other.len())?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub(crate) fn with_values(&self, values: Vec<f64>, norm_state: NormState) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            n_components: self.n_components,
            dims: self.dims,
            norm_state,
        }
    }
}

/// Which descriptor count enters the Fisher information.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InformationScale {
    /// `T` is the descriptor count of the image being encoded.
    PerImage,
    /// `T = 1` for every image. Differs from `PerImage` only by a global
    /// per-image factor, which any final l2 step removes.
    Unit,
}

#[cfg(not(feature = "unit-count-information"))]
pub const DEFAULT_INFORMATION_SCALE: InformationScale = InformationScale::PerImage;
#[cfg(feature = "unit-count-information")]
pub const DEFAULT_INFORMATION_SCALE: InformationScale = InformationScale::Unit;

/// One representative bit vector per component: bit `d` is set iff `mu_id >= 0.5`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepresentativeCodebook {
    codes: Vec<BinaryDescriptor>,
}

impl RepresentativeCodebook {
    pub fn codes(&self) -> &[BinaryDescriptor] {
        &self.codes
    }

    pub fn dims(&self) -> usize {
        self.codes[0].dims()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Nearest representative, ties to the lowest component index.
    pub fn assign(&self, x: &BinaryDescriptor) -> usize {
        nearest(x, &self.codes).map(|(k, _)| k).unwrap_or(0)
    }
}

pub fn representative_codebook(model: &BmmModel) -> RepresentativeCodebook {
    let codes = (0..model.n_components())
        .map(|i| {
            let row = model.mu_row(i);
            BinaryDescriptor::from_fn(model.dims(), |d| row[d] >= 0.5)
                .expect("model dims validated at construction")
        })
        .collect();
    RepresentativeCodebook { codes }
}

/// Per-component sums over a feature set: total assignment weight `S_i` and
/// weight on set bits `A_id`. Scores follow as `(A/mu - (S - A)/(1 - mu)) / T`.
struct Accumulator {
    mass: Vec<f64>,
    ones_mass: Vec<f64>,
    dims: usize,
}

impl Accumulator {
    fn new(n: usize, dims: usize) -> Self {
        Self {
            mass: vec![0.0; n],
            ones_mass: vec![0.0; n * dims],
            dims,
        }
    }

    #[inline]
    fn add(&mut self, i: usize, weight: f64, ones: &[usize]) {
        self.mass[i] += weight;
        let row = &mut self.ones_mass[i * self.dims..(i + 1) * self.dims];
        for &d in ones {
            row[d] += weight;
        }
    }

    fn scores(&self, model: &BmmModel, count: usize) -> Vec<f64> {
        let inv_t = 1.0 / count as f64;
        let dims = self.dims;
        let mut out = Vec::with_capacity(self.ones_mass.len());
        for (i, &mass) in self.mass.iter().enumerate() {
            let mu = model.mu_row(i);
            let ones = &self.ones_mass[i * dims..(i + 1) * dims];
            out.extend(
                mu.iter()
                    .zip(ones)
                    .map(|(&m, &a)| (a / m - (mass - a) / (1.0 - m)) * inv_t),
            );
        }
        out
    }
}

fn check_input(model: &BmmModel, data: &FeatureSet) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    Error::check_dims(model.dims(), data.dims())
}

fn exact_accumulator(model: &BmmModel, data: &FeatureSet) -> Accumulator {
    let n = model.n_components();
    let mut acc = Accumulator::new(n, model.dims());
    let mut gamma = vec![0.0; n];
    let mut ones = Vec::with_capacity(model.dims());
    for x in data {
        ones.clear();
        ones.extend(x.ones());
        model.posterior_from_ones(&ones, &mut gamma);
        for (i, &g) in gamma.iter().enumerate() {
            acc.add(i, g, &ones);
        }
    }
    acc
}

fn approx_accumulator(model: &BmmModel, codebook: &RepresentativeCodebook, data: &FeatureSet) -> Accumulator {
    let mut acc = Accumulator::new(model.n_components(), model.dims());
    let mut ones = Vec::with_capacity(model.dims());
    for x in data {
        ones.clear();
        ones.extend(x.ones());
        acc.add(codebook.assign(x), 1.0, &ones);
    }
    acc
}

/// Fisher score with respect to every `mu_id`, component-major.
pub fn fisher_score(model: &BmmModel, data: &FeatureSet) -> Result<Vec<f64>> {
    check_input(model, data)?;
    Ok(exact_accumulator(model, data).scores(model, data.len()))
}

/// Score computed with one-hot Hamming assignments in place of the posterior.
pub fn fisher_score_approx(model: &BmmModel, codebook: &RepresentativeCodebook, data: &FeatureSet) -> Result<Vec<f64>> {
    check_input(model, data)?;
    check_codebook(model, codebook)?;
    Ok(approx_accumulator(model, codebook, data).scores(model, data.len()))
}

fn check_codebook(model: &BmmModel, codebook: &RepresentativeCodebook) -> Result<()> {
    Error::check_dims(model.n_components(), codebook.len())?;
    Error::check_dims(model.dims(), codebook.dims())
}

/// Closed-form diagonal Fisher information for `count` descriptors per image.
pub fn fisher_information_diag(model: &BmmModel, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    let (n, dims) = (model.n_components(), model.dims());
    let w = model.weights();
    let mut on = vec![0.0; dims];
    let mut off = vec![0.0; dims];
    for j in 0..n {
        for (d, &m) in model.mu_row(j).iter().enumerate() {
            on[d] += w[j] * m;
            off[d] += w[j] * (1.0 - m);
        }
    }
    let t = count as f64;
    let mut out = Vec::with_capacity(n * dims);
    for i in 0..n {
        out.extend(model.mu_row(i).iter().enumerate().map(|(d, &m)| {
            t * w[i] * (on[d] / (m * m) + off[d] / ((1.0 - m) * (1.0 - m)))
        }));
    }
    Ok(out)
}

/// Precomputes the information normalizer and representative codes for one
/// model so that many feature sets can be encoded cheaply.
#[derive(Clone, Debug)]
pub struct FisherEncoder<'a> {
    model: &'a BmmModel,
    codebook: RepresentativeCodebook,
    // F^{-1/2} at T = 1; zero where the information vanishes (w_i = 0).
    unit_inv_sqrt_info: Vec<f64>,
    scale: InformationScale,
}

impl<'a> FisherEncoder<'a> {
    pub fn new(model: &'a BmmModel) -> Self {
        Self::with_scale(model, DEFAULT_INFORMATION_SCALE)
    }

    pub fn with_scale(model: &'a BmmModel, scale: InformationScale) -> Self {
        let unit_inv_sqrt_info = fisher_information_diag(model, 1)
            .expect("count is positive")
            .into_iter()
            .map(|f| if f > 0.0 { 1.0 / f.sqrt() } else { 0.0 })
            .collect();
        Self {
            model,
            codebook: representative_codebook(model),
            unit_inv_sqrt_info,
            scale,
        }
    }

    pub fn model(&self) -> &BmmModel {
        self.model
    }

    pub fn codebook(&self) -> &RepresentativeCodebook {
        &self.codebook
    }

    fn finish(&self, scores: Vec<f64>, count: usize) -> Result<FisherVec> {
        let t_factor = match self.scale {
            InformationScale::PerImage => 1.0 / (count as f64).sqrt(),
            InformationScale::Unit => 1.0,
        };
        let values = scores
            .into_iter()
            .zip(&self.unit_inv_sqrt_info)
            .map(|(g, &f)| g * f * t_factor)
            .collect();
        FisherVec::new(values, self.model.n_components(), self.model.dims(), NormState::Raw)
    }

    /// Exact Fisher vector (raw, unnormalized).
    pub fn encode(&self, data: &FeatureSet) -> Result<FisherVec> {
        let scores = fisher_score(self.model, data)?;
        self.finish(scores, data.len())
    }

    /// Fast Fisher vector using Hamming hard assignment (raw, unnormalized).
    pub fn encode_approx(&self, data: &FeatureSet) -> Result<FisherVec> {
        let scores = fisher_score_approx(self.model, &self.codebook, data)?;
        self.finish(scores, data.len())
    }
}

/// Exact raw Fisher vector of `data`.
pub fn encode(model: &BmmModel, data: &FeatureSet) -> Result<FisherVec> {
    FisherEncoder::new(model).encode(data)
}

/// Fast raw Fisher vector of `data` using `codebook` for hard assignment.
pub fn encode_approx(model: &BmmModel, codebook: &RepresentativeCodebook, data: &FeatureSet) -> Result<FisherVec> {
    check_codebook(model, codebook)?;
    let encoder = FisherEncoder::new(model);
    let scores = fisher_score_approx(model, codebook, data)?;
    encoder.finish(scores, data.len())
}

/// How peaked the posteriors are on a feature set, and how often the Hamming
/// assignment picks the posterior mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Peakedness {
    /// Counts of `max_i gamma_t(i)` over equal-width bins of `[0, 1]`;
    /// a maximum of exactly 1 falls in the last bin.
    pub histogram: Vec<usize>,
    /// Fraction of descriptors whose nearest representative is the posterior argmax.
    pub agreement: f64,
    pub count: usize,
}

impl Peakedness {
    pub fn bin_lower_edge(&self, bin: usize) -> f64 {
        bin as f64 / self.histogram.len() as f64
    }
}

pub fn posterior_peakedness(model: &BmmModel, data: &FeatureSet, bins: usize) -> Result<Peakedness> {
    check_input(model, data)?;
    if bins == 0 {
        return Err(Error::param("bins", "must be at least 1"));
    }
    let codebook = representative_codebook(model);
    let mut histogram = vec![0; bins];
    let mut agree = 0usize;
    let mut gamma = vec![0.0; model.n_components()];
    for x in data {
        model.posterior_into(x, &mut gamma);
        let mode = argmax(&gamma);
        let top = gamma[mode];
        histogram[((top * bins as f64) as usize).min(bins - 1)] += 1;
        if codebook.assign(x) == mode {
            agree += 1;
        }
    }
    Ok(Peakedness {
        histogram,
        agreement: agree as f64 / data.len() as f64,
        count: data.len(),
    })
}

/// Largest `D` accepted by [`integral_identity_oracle`].
pub const MAX_ENUMERATION_DIMS: usize = 16;

/// Both sides of the two half-space integrals used to close the Fisher
/// information: exhaustive sums over all `2^D` descriptors next to the
/// closed forms `w_i sum_j w_j mu_jd` and `w_i sum_j w_j (1 - mu_jd)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegralIdentity {
    /// `sum_{x : x_d = 1} p(x) gamma_x(i)`
    pub enumerated_bit1: f64,
    /// `sum_{x : x_d = 0} p(x) gamma_x(i)`
    pub enumerated_bit0: f64,
    pub closed_form_bit1: f64,
    pub closed_form_bit0: f64,
}

pub fn integral_identity_oracle(model: &BmmModel, i: usize, d: usize) -> Result<IntegralIdentity> {
    let (n, dims) = (model.n_components(), model.dims());
    if dims > MAX_ENUMERATION_DIMS {
        return Err(Error::param(
            "dims",
            format!("enumeration needs D <= {MAX_ENUMERATION_DIMS}, model has {dims}"),
        ));
    }
    if i >= n || d >= dims {
        return Err(Error::param("index", format!("({i}, {d}) out of range for {n} x {dims}")));
    }
    let w = model.weights();
    let (mut bit1, mut bit0) = (0.0, 0.0);
    let mut joint = vec![0.0; n];
    for code in 0u32..(1 << dims) {
        for (j, p) in joint.iter_mut().enumerate() {
            let row = model.mu_row(j);
            *p = w[j]
                * (0..dims)
                    .map(|e| if code >> e & 1 == 1 { row[e] } else { 1.0 - row[e] })
                    .product::<f64>();
        }
        let p: f64 = joint.iter().sum();
        let weighted = p * (joint[i] / p);
        if code >> d & 1 == 1 {
            bit1 += weighted;
        } else {
            bit0 += weighted;
        }
    }
    let on: f64 = (0..n).map(|j| w[j] * model.mu_row(j)[d]).sum();
    let off: f64 = (0..n).map(|j| w[j] * (1.0 - model.mu_row(j)[d])).sum();
    Ok(IntegralIdentity {
        enumerated_bit1: bit1,
        enumerated_bit0: bit0,
        closed_form_bit1: w[i] * on,
        closed_form_bit0: w[i] * off,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte-Carlo estimate of `E[(d log p(x) / d mu_id)^2]` for a single
/// descriptor drawn from the model.
pub fn fisher_information_empirical(
    model: &BmmModel,
    i: usize,
    d: usize,
    sample_count: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if sample_count == 0 {
        return Err(Error::param("sample_count", "must be at least 1"));
    }
    if i >= model.n_components() || d >= model.dims() {
        return Err(Error::param("index", format!("({i}, {d}) out of range")));
    }
    let mut rng = seeded_rng(seed);
    let mu = model.mu_row(i)[d];
    let mut gamma = vec![0.0; model.n_components()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..sample_count {
        let x = model.sample(&mut rng);
        model.posterior_into(&x, &mut gamma);
        let g = if x.bit(d) { gamma[i] / mu } else { -gamma[i] / (1.0 - mu) };
        let v = g * g;
        sum += v;
        sum_sq += v * v;
    }
    let k = sample_count as f64;
    let mean = sum / k;
    let var = if sample_count > 1 {
        ((sum_sq - k * mean * mean) / (k - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / k).sqrt(),
        samples: sample_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmm::DEFAULT_EPS;

    fn bd(s: &str) -> BinaryDescriptor {
        BinaryDescriptor::from_bit_str(s).unwrap()
    }

    fn fs(rows: &[&str]) -> FeatureSet {
        let xs: Vec<_> = rows.iter().map(|r| bd(r)).collect();
        FeatureSet::new(xs[0].dims(), xs).unwrap()
    }

    fn uniform(dims: usize) -> BmmModel {
        BmmModel::new(vec![1.0], vec![vec![0.5; dims]], DEFAULT_EPS).unwrap()
    }

    #[test]
    fn score_examples() {
        let m = uniform(2);
        assert_eq!(fisher_score(&m, &fs(&["10"])).unwrap(), vec![2.0, -2.0]);
        assert!(matches!(
            fisher_score(&m, &FeatureSet::empty(2).unwrap()),
            Err(Error::EmptyFeatureSet)
        ));
        assert!(fisher_score(&m, &fs(&["101"])).is_err());
    }

    #[test]
    fn information_examples() {
        assert_eq!(fisher_information_diag(&uniform(3), 100).unwrap(), vec![400.0; 3]);

        let m = BmmModel::new(vec![1.0], vec![vec![0.3]], DEFAULT_EPS).unwrap();
        let f = fisher_information_diag(&m, 1).unwrap()[0];
        assert!((f - (1.0 / 0.3 + 1.0 / 0.7)).abs() < 1e-12);

        let m = BmmModel::new(vec![0.3, 0.7], vec![vec![0.2], vec![0.6]], DEFAULT_EPS).unwrap();
        let f = fisher_information_diag(&m, 10).unwrap();
        let on = 0.3 * 0.2 + 0.7 * 0.6;
        let off = 0.3 * 0.8 + 0.7 * 0.4;
        let want0 = 10.0 * 0.3 * (on / 0.04 + off / 0.64);
        let want1 = 10.0 * 0.7 * (on / 0.36 + off / 0.16);
        assert!((f[0] - want0).abs() < 1e-12 * want0);
        assert!((f[1] - want1).abs() < 1e-12 * want1);
        assert!(fisher_information_diag(&m, 0).is_err());
    }

    #[test]
    fn encode_examples() {
        let v = encode(&uniform(4), &fs(&["1111"])).unwrap();
        assert_eq!(v.values(), &[1.0; 4]);
        assert_eq!(v.norm_state(), NormState::Raw);

        let v = encode(&uniform(2), &fs(&["10", "11", "00", "01"])).unwrap();
        assert_eq!(v.values(), &[0.0, 0.0]);
    }

    #[test]
    fn codebook_examples() {
        let m = BmmModel::new(
            vec![0.5, 0.25, 0.25],
            vec![vec![0.7, 0.2], vec![0.5, 0.49], vec![0.9, 0.5]],
            DEFAULT_EPS,
        )
        .unwrap();
        let cb = representative_codebook(&m);
        assert_eq!(cb.codes(), &[bd("10"), bd("10"), bd("11")]);
    }

    #[test]
    fn approx_examples() {
        let m = BmmModel::new(vec![1.0], vec![vec![0.3, 0.6, 0.8]], DEFAULT_EPS).unwrap();
        let x = fs(&["101", "011", "000"]);
        assert_eq!(
            encode_approx(&m, &representative_codebook(&m), &x).unwrap(),
            encode(&m, &x).unwrap()
        );

        // 1100 is at distance 2 from both codes; the lower index wins.
        let m = BmmModel::new(vec![0.5, 0.5], vec![vec![0.9, 0.9, 0.9, 0.9], vec![0.1; 4]], DEFAULT_EPS).unwrap();
        let cb = representative_codebook(&m);
        assert_eq!(cb.assign(&bd("1100")), 0);
        let v = encode_approx(&m, &cb, &fs(&["1100"])).unwrap();
        assert!(v.block(1).iter().all(|&e| e == 0.0));
        assert!(v.block(0).iter().all(|&e| e != 0.0));
    }

    #[test]
    fn peakedness_examples() {
        let m = BmmModel::new(vec![1.0], vec![vec![0.3, 0.6]], DEFAULT_EPS).unwrap();
        let p = posterior_peakedness(&m, &fs(&["10", "01", "11"]), 10).unwrap();
        assert_eq!(p.histogram[9], 3);
        assert_eq!(p.agreement, 1.0);

        let m = BmmModel::new(vec![0.5, 0.5], vec![vec![0.3, 0.6]; 2], DEFAULT_EPS).unwrap();
        let p = posterior_peakedness(&m, &fs(&["10", "01"]), 4).unwrap();
        assert_eq!(p.histogram, vec![0, 0, 2, 0]);
        assert_eq!(p.agreement, 1.0);
    }

    #[test]
    fn enumeration_examples() {
        let m = BmmModel::new(vec![1.0], vec![vec![0.3, 0.8, 0.6]], DEFAULT_EPS).unwrap();
        let r = integral_identity_oracle(&m, 0, 1).unwrap();
        assert!((r.enumerated_bit1 - 0.8).abs() < 1e-12);
        assert!((r.closed_form_bit1 - 0.8).abs() < 1e-12);

        let m = BmmModel::new(vec![0.4, 0.6], vec![vec![0.2, 0.7], vec![0.9, 0.3]], DEFAULT_EPS).unwrap();
        let r = integral_identity_oracle(&m, 0, 0).unwrap();
        assert!((r.enumerated_bit1 - 0.4 * 0.2).abs() < 1e-12);
        assert!((r.enumerated_bit1 + r.enumerated_bit0 - 0.4).abs() < 1e-12);
        // 0.4 * (0.4 * 0.2 + 0.6 * 0.9) = 0.248, not 0.08
        assert!((r.closed_form_bit1 - 0.248).abs() < 1e-12);

        assert!(integral_identity_oracle(&uniform(17), 0, 0).is_err());
    }

    #[test]
    fn empirical_information_single_component() {
        let est = fisher_information_empirical(&uniform(3), 0, 1, 1000, 4).unwrap();
        // Every sample has squared score exactly 4 when mu = 0.5.
        assert_eq!(est.mean, 4.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn norm_state_strings() {
        for s in NormState::ALL {
            assert_eq!(s.as_str().parse::<NormState>().unwrap(), s);
        }
        assert!("bogus".parse::<NormState>().is_err());
    }
}
