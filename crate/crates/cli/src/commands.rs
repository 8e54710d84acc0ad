use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use binfv::bitdesc::FeatureSet;
use binfv::bmm::{fit_em, BmmModel, EmConfig};
use binfv::bovw::{encode_bow, train_codebook};
use binfv::eval::{evaluate, synth_dataset, synth_training_set, RetrievalIndex, SynthConfig};
use binfv::fisher::{integral_identity_oracle, posterior_peakedness, fisher_score, FisherEncoder, NormState, MAX_ENUMERATION_DIMS};
use binfv::io::{self as bio, CodebookFile, Manifest, ManifestEntry, ModelFile, Role, TrainingMeta, VectorFile, VectorKind};
use binfv::normalize::{apply_norm, NormScheme};

use crate::{
    BenchArgs, CliError, CliResult, CodebookArgs, ConvertArgs, EncodeArgs, EvalArgs, IndexArgs, QueryArgs, SynthArgs,
    TrainArgs, VerifyArgs,
};

const GRADIENT_TOL: f64 = 1e-5;
const ENUMERATION_TOL: f64 = 1e-12;
// Widest prefix used for the enumeration check on larger models.
const ENUMERATION_PREFIX: usize = 10;

fn load_concatenated(paths: &[PathBuf]) -> CliResult<FeatureSet> {
    let mut iter = paths.iter();
    let first = iter.next().ok_or_else(|| CliError::Usage("no feature files given".into()))?;
    let mut all = bio::read_features(first)?;
    for p in iter {
        all.extend_from(&bio::read_features(p)?)?;
    }
    Ok(all)
}

fn file_stem_id(path: &Path) -> CliResult<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| CliError::Usage(format!("cannot derive an id from {}", path.display())))
}

pub fn train(a: TrainArgs) -> CliResult {
    let data = load_concatenated(&a.features)?;
    let cfg = EmConfig {
        max_iters: a.em.max_iters,
        rel_tol: a.em.rel_tol,
        seed: a.em.seed,
        ..EmConfig::default()
    };
    let (model, report) = fit_em(&data, a.components, &cfg)?;
    bio::save_model(
        &a.out,
        &ModelFile {
            model,
            seed: Some(cfg.seed),
            training: Some(TrainingMeta::from_report(&report, data.len())),
        },
    )?;
    println!("descriptors\t{}", data.len());
    println!("components\t{}", a.components);
    println!("iterations\t{}", report.iterations_run);
    println!("converged\t{}", report.converged);
    println!("reseeds\t{}", report.reseed_events.len());
    println!("mean_log_likelihood\t{}", report.final_log_likelihood());
    Ok(())
}

fn encode_inputs(a: &EncodeArgs) -> CliResult<Vec<(String, PathBuf)>> {
    if let Some(m) = &a.manifest {
        let manifest = bio::load_manifest(m)?;
        return Ok(manifest.images.into_iter().map(|e| (e.id, e.features)).collect());
    }
    a.features.iter().map(|p| Ok((file_stem_id(p)?, p.clone()))).collect()
}

fn prefix(data: FeatureSet, bits: Option<usize>) -> binfv::Result<FeatureSet> {
    match bits {
        Some(b) if b != data.dims() => data.truncate(b),
        _ => Ok(data),
    }
}

pub fn encode(a: EncodeArgs) -> CliResult {
    let inputs = encode_inputs(&a)?;
    if inputs.is_empty() {
        return Err(CliError::Usage("nothing to encode".into()));
    }
    let file = if let Some(path) = &a.codebook {
        if a.norm.is_some() || a.approx {
            return Err(CliError::Usage(
                "--norm and --approx apply to Fisher vectors only; histograms are always l2-normalized".into(),
            ));
        }
        let mut cb = bio::load_codebook(path)?.codebook;
        if let Some(b) = a.bits {
            cb = cb.truncate(b)?;
        }
        let records = inputs
            .par_iter()
            .map(|(id, p)| {
                let data = prefix(bio::read_features(p)?, a.bits)?;
                Ok((id.clone(), encode_bow(&cb, &data)?.into_values()))
            })
            .collect::<binfv::Result<Vec<_>>>()?;
        VectorFile {
            kind: VectorKind::BagOfWords,
            norm_state: NormState::L2,
            blocks: 1,
            block_len: cb.len() as u32,
            records,
        }
    } else {
        let path = a.model.as_ref().expect("clap requires --model or --codebook");
        let mut model = bio::load_model(path)?.model;
        if let Some(b) = a.bits {
            model = model.truncate(b)?;
        }
        let scheme = a.norm.unwrap_or(NormScheme::Intra);
        let encoder = FisherEncoder::new(&model);
        let results = inputs
            .par_iter()
            .map(|(id, p)| {
                let data = prefix(bio::read_features(p)?, a.bits)?;
                let raw = if a.approx { encoder.encode_approx(&data) } else { encoder.encode(&data) }?;
                let n = apply_norm(raw, scheme, a.alpha)?;
                Ok((id.clone(), n.vector.into_values(), n.zero_blocks))
            })
            .collect::<binfv::Result<Vec<_>>>()?;
        let zero_blocks: usize = results.iter().map(|r| r.2).sum();
        if zero_blocks > 0 {
            eprintln!("note: {zero_blocks} all-zero blocks left unnormalized");
        }
        VectorFile {
            kind: VectorKind::Fisher,
            norm_state: scheme.output_state(),
            blocks: model.n_components() as u32,
            block_len: model.dims() as u32,
            records: results.into_iter().map(|(id, v, _)| (id, v)).collect(),
        }
    };
    bio::save_vectors(&a.out, &file)?;
    println!(
        "encoded {} sets: {} x {} {} vectors, {}",
        file.records.len(),
        file.blocks,
        file.block_len,
        file.kind.as_str(),
        file.norm_state
    );
    Ok(())
}

pub fn codebook(a: CodebookArgs) -> CliResult {
    let data = load_concatenated(&a.features)?;
    let (codebook, report) = train_codebook(&data, a.k, a.seed, a.max_iters)?;
    bio::save_codebook(
        &a.out,
        &CodebookFile {
            codebook,
            seed: Some(a.seed),
            iterations: Some(report.iterations),
        },
    )?;
    println!("descriptors\t{}", data.len());
    println!("words\t{}", a.k);
    println!("iterations\t{}", report.iterations);
    println!("converged\t{}", report.converged);
    println!("reseeded\t{}", report.reseeded);
    println!("objective\t{}", report.objective_trace.last().copied().unwrap_or(0));
    Ok(())
}

pub fn index(a: IndexArgs) -> CliResult {
    let files = a.vectors.iter().map(bio::load_vectors).collect::<binfv::Result<Vec<_>>>()?;
    let merged = bio::merge_vectors(files)?;
    bio::save_vectors(&a.out, &merged)?;
    println!("indexed {} vectors ({})", merged.records.len(), merged.norm_state);
    Ok(())
}

pub fn query(a: QueryArgs) -> CliResult {
    let (index, db) = bio::load_index(&a.index)?;
    let queries = bio::load_vectors(&a.queries)?;
    if queries.norm_state != db.norm_state || queries.kind != db.kind {
        return Err(binfv::Error::validation(
            "norm_state",
            format!("queries are `{}` but the index is `{}`", queries.norm_state, db.norm_state),
        )
        .into());
    }
    let selected: Vec<_> = queries
        .records
        .iter()
        .filter(|(id, _)| a.id.as_deref().is_none_or(|want| want == id))
        .collect();
    if selected.is_empty() {
        return Err(CliError::Usage("no matching query id".into()));
    }
    let mut out = io::stdout().lock();
    for (id, v) in selected {
        for (rank, (hit, dist)) in index.rank(v)?.into_iter().take(a.top).enumerate() {
            writeln!(out, "{id}\t{}\t{hit}\t{dist}", rank + 1)?;
        }
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> CliResult {
    let manifest = bio::load_manifest(&a.manifest)?;
    let (_, vectors) = bio::load_index(&a.vectors)?;
    let lookup: BTreeMap<&str, &Vec<f64>> = vectors.records.iter().map(|(id, v)| (id.as_str(), v)).collect();
    let get = |id: &str| {
        lookup
            .get(id)
            .map(|v| (*v).clone())
            .ok_or_else(|| binfv::Error::validation("vectors", format!("no vector for image {id:?}")))
    };
    let mut index = RetrievalIndex::new();
    for e in manifest.images.iter().filter(|e| e.role != Role::Query) {
        index.insert(e.id.clone(), get(&e.id)?)?;
    }
    let queries = manifest
        .with_role(Role::Query)
        .map(|e| Ok((e.id.clone(), get(&e.id)?)))
        .collect::<binfv::Result<Vec<_>>>()?;
    let result = evaluate(&index, &queries, &manifest.relevance, Some(&manifest.query_classes()))?;
    result.write_table(io::stdout().lock())?;
    if let Some(path) = &a.records {
        let mut f = io::BufWriter::new(fs::File::create(path)?);
        result.write_records(&mut f)?;
        f.flush()?;
    }
    Ok(())
}

fn random_model(rng: &mut ChaCha8Rng, n: usize, dims: usize) -> CliResult<BmmModel> {
    if n == 0 {
        return Err(CliError::Usage("--components must be at least 1".into()));
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let mu = (0..n * dims).map(|_| rng.random_range(0.05..0.95)).collect();
    Ok(BmmModel::from_flat(
        raw.iter().map(|w| w / total).collect(),
        mu,
        dims,
        binfv::bmm::DEFAULT_EPS,
    )?)
}

fn load_or_random(path: &Option<PathBuf>, n: usize, dims: usize, rng: &mut ChaCha8Rng) -> CliResult<BmmModel> {
    match path {
        Some(p) => Ok(bio::load_model(p)?.model),
        None => random_model(rng, n, dims),
    }
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

pub fn bench(a: BenchArgs) -> CliResult {
    if a.reps == 0 || a.count == 0 {
        return Err(CliError::Usage("--reps and --count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let model = load_or_random(&a.model, a.components, a.dims, &mut rng)?;
    let data = model.sample_set(&mut rng, a.count);
    let encoder = FisherEncoder::new(&model);
    let time = |approx: bool| -> CliResult<Duration> {
        let mut runs = Vec::with_capacity(a.reps);
        for _ in 0..a.reps {
            let t = Instant::now();
            let v = if approx { encoder.encode_approx(&data) } else { encoder.encode(&data) }?;
            runs.push(t.elapsed());
            std::hint::black_box(v);
        }
        Ok(median(runs))
    };
    let exact = time(false)?;
    let approx = time(true)?;
    println!("N\tD\tT\treps\texact_ms\tapprox_ms\tratio");
    println!(
        "{}\t{}\t{}\t{}\t{:.3}\t{:.3}\t{:.2}",
        model.n_components(),
        model.dims(),
        a.count,
        a.reps,
        exact.as_secs_f64() * 1e3,
        approx.as_secs_f64() * 1e3,
        exact.as_secs_f64() / approx.as_secs_f64()
    );
    Ok(())
}

fn gradient_check(model: &BmmModel, data: &FeatureSet) -> binfv::Result<f64> {
    let score = fisher_score(model, data)?;
    let h: f64 = 1e-4;
    let mut worst = 0.0f64;
    for (k, &g) in score.iter().enumerate() {
        let mu = model.mu()[k];
        // Keep the stencil inside the valid parameter range.
        let step = h.min((mu - model.eps()) / 2.0).min((1.0 - model.eps() - mu) / 2.0);
        if step <= 0.0 {
            continue;
        }
        let at = |delta: f64| -> binfv::Result<f64> {
            let mut m = model.mu().to_vec();
            m[k] += delta;
            BmmModel::from_flat(model.weights().to_vec(), m, model.dims(), model.eps())?.mean_log_likelihood(data)
        };
        let fd = (8.0 * (at(step)? - at(-step)?) - (at(2.0 * step)? - at(-2.0 * step)?)) / (12.0 * step);
        worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
    }
    Ok(worst)
}

pub fn verify(a: VerifyArgs) -> CliResult {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let model = load_or_random(&a.model, a.components, a.dims, &mut rng)?;
    if a.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let data = model.sample_set(&mut rng, a.count);
    let mut failures = Vec::new();

    let grad_data = model.sample_set(&mut rng, a.count.min(32));
    let grad_err = gradient_check(&model, &grad_data)?;
    let grad_ok = grad_err <= GRADIENT_TOL;
    println!(
        "gradient check\tmax rel err {grad_err:.3e}\t{}",
        if grad_ok { "pass" } else { "FAIL" }
    );
    if !grad_ok {
        failures.push("gradient check");
    }

    let enum_model = if model.dims() > MAX_ENUMERATION_DIMS {
        println!("enumeration\tusing the first {ENUMERATION_PREFIX} bits of the model");
        model.truncate(ENUMERATION_PREFIX)?
    } else {
        model.clone()
    };
    println!("enumeration\ti\td\tenumerated\tw_i*mu_id\tw_i*sum_j(w_j*mu_jd)");
    let mut worst = 0.0f64;
    for i in 0..enum_model.n_components() {
        for d in 0..enum_model.dims() {
            let id = integral_identity_oracle(&enum_model, i, d)?;
            let w = enum_model.weights()[i];
            let mu = enum_model.mu_row(i)[d];
            worst = worst
                .max((id.enumerated_bit1 - w * mu).abs())
                .max((id.enumerated_bit0 - w * (1.0 - mu)).abs());
            if d < 4 {
                println!(
                    "enumeration\t{i}\t{d}\t{:.12}\t{:.12}\t{:.12}",
                    id.enumerated_bit1,
                    w * mu,
                    id.closed_form_bit1
                );
            }
        }
    }
    let enum_ok = worst <= ENUMERATION_TOL;
    println!(
        "enumeration\tmax |enumerated - w_i*mu_id| {worst:.3e}\t{}",
        if enum_ok { "pass" } else { "FAIL" }
    );
    if !enum_ok {
        failures.push("enumeration");
    }

    let peak = posterior_peakedness(&model, &data, a.bins)?;
    println!("peakedness\tbin_low\tcount");
    for (b, c) in peak.histogram.iter().enumerate() {
        println!("peakedness\t{:.2}\t{c}", peak.bin_lower_edge(b));
    }
    println!("peakedness\thamming argmax agreement {:.4}", peak.agreement);

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numeric(failures.join(", ")))
    }
}

pub fn synth(a: SynthArgs) -> CliResult {
    let cfg = SynthConfig {
        n_classes: a.classes,
        refs_per_class: a.refs,
        queries_per_class: a.queries,
        descriptors_per_image: a.count,
        dims: a.dims,
        flip_rate: a.flip_rate,
        seed: a.seed,
        distractors: a.distractors,
        ..SynthConfig::default()
    };
    let ds = synth_dataset(&cfg)?;
    let feature_dir = a.out.join("features");
    fs::create_dir_all(&feature_dir)?;
    let mut entries = Vec::new();
    let groups = [
        (&ds.references, Role::Reference),
        (&ds.queries, Role::Query),
        (&ds.distractors, Role::Distractor),
    ];
    for (images, role) in groups {
        for im in images {
            let rel = Path::new("features").join(format!("{}.bfvf", im.id));
            bio::write_features(a.out.join(&rel), &im.features)?;
            entries.push(ManifestEntry {
                id: im.id.clone(),
                class: im.class.clone(),
                features: rel,
                role,
            });
        }
    }
    bio::save_manifest(a.out.join("manifest.json"), &Manifest::new(entries, ds.truth.clone()))?;
    if a.training_descriptors > 0 {
        let train = synth_training_set(&cfg, a.background_classes, a.training_descriptors)?;
        bio::write_features(a.out.join("training.bfvf"), &train)?;
    }
    println!(
        "wrote {} references, {} queries, {} distractors and {} training descriptors to {}",
        ds.references.len(),
        ds.queries.len(),
        ds.distractors.len(),
        a.training_descriptors,
        a.out.display()
    );
    Ok(())
}

pub fn convert(a: ConvertArgs) -> CliResult {
    if a.to_hex {
        let data = bio::read_features(&a.input)?;
        let mut f = io::BufWriter::new(fs::File::create(&a.out)?);
        bio::write_hex_lines_to(&mut f, &data)?;
        println!("wrote {} descriptors of {} bits", data.len(), data.dims());
    } else {
        let data = bio::read_hex_lines(&a.input, a.dims)?;
        bio::write_features(&a.out, &data)?;
        println!("wrote {} descriptors of {} bits", data.len(), data.dims());
    }
    Ok(())
}
