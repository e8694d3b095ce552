use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use ust_core::batch_file::{read_batch, write_batch, BatchReader};
use ust_core::features::{achievable_sigma, channel_moments, channel_stats, split_adain_vector};
use ust_core::fixtures::{synthetic_corpus, twin_patch_image};
use ust_core::image_io::{crop_and_resize, load_image, save_image};
use ust_core::{
    adain_vector, apply_adain, distance_matrix, extract_features, invariance_check, load_model,
    nearest_neighbors, save_model, ConvNetSpec, GaussianSampler, ImageTensor, Metric,
    StreamingEstimator, StyleVector, VectorBatch,
};

use crate::error::{CliError, CliResult, Context};
use crate::manifest::{file_stem_for, group_by_label, parse_manifest};
use crate::report::{AdainChannel, AdainLayer, AdainReport, InvarianceLayer, InvarianceSummary};
use crate::{
    AdainArgs, DistArgs, ExtractArgs, FitArgs, InvarianceArgs, SampleArgs, StyleSource, SynthArgs,
};

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).context(dir.display())
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("serialising report: {e}")))?;
    text.push('\n');
    fs::write(path, text).context(path.display())
}

fn load_prepared_image(path: &Path, crop_size: usize) -> CliResult<ImageTensor> {
    let img = load_image(path)?;
    Ok(crop_and_resize(&img, crop_size)?)
}

fn style_vector_of(img: &ImageTensor, net_seed: u64) -> CliResult<StyleVector> {
    let spec = ConvNetSpec::default_for(img.channels(), net_seed);
    Ok(adain_vector(&extract_features(img, &spec)?)?)
}

pub fn extract(args: &ExtractArgs, out: &mut dyn Write) -> CliResult<()> {
    let text = fs::read_to_string(&args.manifest).context(args.manifest.display())?;
    let base = args.manifest.parent().unwrap_or(Path::new(""));
    let rows = parse_manifest(&text, base)?;

    let groups = group_by_label(&rows);
    let mut stems: HashMap<String, &str> = HashMap::new();
    for (label, _) in &groups {
        if let Some(other) = stems.insert(file_stem_for(label), label) {
            return Err(CliError::Data(format!(
                "labels `{other}` and `{label}` map to the same output file"
            )));
        }
    }

    // Images are independent; results are gathered in manifest order and the
    // first failing row is reported, whatever the scheduling.
    let vectors: Vec<CliResult<StyleVector>> = rows
        .par_iter()
        .map(|r| {
            load_prepared_image(&r.path, args.crop_size)
                .and_then(|img| style_vector_of(&img, args.net.net_seed))
                .context(format_args!(
                    "manifest row {} ({})",
                    r.row,
                    r.path.display()
                ))
        })
        .collect();
    let vectors = vectors.into_iter().collect::<CliResult<Vec<_>>>()?;
    let dim = vectors[0].dim();
    if let Some((r, v)) = rows.iter().zip(&vectors).find(|(_, v)| v.dim() != dim) {
        return Err(CliError::Data(format!(
            "manifest row {} ({}): style vector has {} entries, earlier rows have {dim}",
            r.row,
            r.path.display(),
            v.dim()
        )));
    }

    create_dir(&args.out_dir)?;
    let by_row: HashMap<usize, &StyleVector> = rows.iter().map(|r| r.row).zip(&vectors).collect();
    for (label, members) in &groups {
        let batch = VectorBatch::from_vectors(
            &members
                .iter()
                .map(|r| by_row[&r.row].clone())
                .collect::<Vec<_>>(),
        )?;
        let path = args.out_dir.join(format!("{}.ustv", file_stem_for(label)));
        write_batch(&batch, &path).context(path.display())?;
        writeln!(
            out,
            "{label}\t{} vectors\tdim {dim}\t{}",
            batch.count(),
            path.display()
        )?;
    }
    Ok(())
}

fn model_label(path: &Path) -> CliResult<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .ok_or_else(|| {
            CliError::Data(format!(
                "{}: cannot derive a label from the file name",
                path.display()
            ))
        })
}

pub fn fit(args: &FitArgs, out: &mut dyn Write) -> CliResult<()> {
    // Validate every header before fitting anything.
    let mut inputs = Vec::with_capacity(args.files.len());
    let mut seen: HashMap<String, &PathBuf> = HashMap::new();
    for path in &args.files {
        let reader = BatchReader::open(path).context(path.display())?;
        let label = model_label(path)?;
        if reader.count() < 2 {
            return Err(CliError::Data(format!(
                "{}: insufficient data: {} vector(s), need at least 2",
                path.display(),
                reader.count()
            )));
        }
        if let Some(other) = seen.insert(label.clone(), path) {
            return Err(CliError::Data(format!(
                "{} and {} both yield label `{label}`",
                other.display(),
                path.display()
            )));
        }
        inputs.push((path, label, reader));
    }
    let dim = inputs[0].2.dim();
    if let Some((path, _, r)) = inputs.iter().find(|(_, _, r)| r.dim() != dim) {
        return Err(CliError::Data(format!(
            "dimension mismatch: {} has dim {}, {} has dim {dim}",
            path.display(),
            r.dim(),
            inputs[0].0.display()
        )));
    }

    create_dir(&args.out_dir)?;
    for (path, label, mut reader) in inputs {
        let mut est = StreamingEstimator::new(dim)?;
        while let Some(chunk) = reader.next_chunk(args.batch_size).context(path.display())? {
            est.update(&chunk).context(path.display())?;
        }
        let model = est.finalize(label.as_str()).context(path.display())?;
        let target = args.out_dir.join(format!("{label}.ustm"));
        save_model(&model, &target).context(target.display())?;
        writeln!(
            out,
            "{label}\tn={}\tdim {dim}\t{}",
            model.count(),
            target.display()
        )?;
    }
    Ok(())
}

pub fn dist(args: &DistArgs, out: &mut dyn Write) -> CliResult<()> {
    let metric = match (Metric::from(args.metric), args.squared) {
        (m, false) => m,
        (Metric::W2 | Metric::W2Squared, true) => Metric::W2Squared,
        (m, true) => {
            return Err(CliError::Usage(format!(
                "--squared only applies to w2, not {}",
                m.id()
            )));
        }
    };
    let models = args
        .models
        .iter()
        .map(|p| load_model(p).context(p.display()))
        .collect::<CliResult<Vec<_>>>()?;
    let matrix = distance_matrix(&models, metric)?;

    let mut csv = Vec::new();
    matrix.write_csv(&mut csv)?;
    fs::write(&args.out, csv).context(args.out.display())?;

    writeln!(
        out,
        "{} x {} {} matrix -> {}",
        matrix.len(),
        matrix.len(),
        metric.id(),
        args.out.display()
    )?;
    for label in matrix.labels() {
        let nearest = nearest_neighbors(&matrix, label, 1)?;
        let (other, d) = &nearest[0];
        writeln!(out, "{label}\tnearest {other}\t{d:.6e}")?;
    }
    Ok(())
}

pub fn sample(args: &SampleArgs, out: &mut dyn Write) -> CliResult<()> {
    let model = load_model(&args.model).context(args.model.display())?;
    let batch = GaussianSampler::new(&model)
        .and_then(|s| s.sample(args.seed, args.count))
        .context(format_args!("model `{}`", model.label()))?;
    write_batch(&batch, &args.out).context(args.out.display())?;
    writeln!(
        out,
        "{} vectors of dim {} from `{}` (seed {}) -> {}",
        batch.count(),
        batch.dim(),
        model.label(),
        args.seed,
        args.out.display()
    )?;
    Ok(())
}

fn style_target(source: &StyleSource) -> CliResult<(Vec<f64>, String)> {
    if let Some(path) = &source.choice.model {
        let model = load_model(path).context(path.display())?;
        let drawn = GaussianSampler::new(&model)
            .and_then(|s| s.sample(source.seed, 1))
            .context(format_args!("model `{}`", model.label()))?;
        let desc = format!(
            "sample from model `{}` (seed {})",
            model.label(),
            source.seed
        );
        return Ok((drawn.as_slice().to_vec(), desc));
    }
    let path = source.choice.vectors.as_ref().ok_or_else(|| {
        CliError::Usage("a style source (--model or --vectors) is required".into())
    })?;
    let batch = read_batch(path).context(path.display())?;
    let row = batch.row(source.row).ok_or_else(|| {
        CliError::Data(format!(
            "{}: row {} out of range ({} rows)",
            path.display(),
            source.row,
            batch.count()
        ))
    })?;
    Ok((
        row.to_vec(),
        format!("row {} of {}", source.row, path.display()),
    ))
}

pub fn adain(args: &AdainArgs, out: &mut dyn Write) -> CliResult<()> {
    let content =
        load_prepared_image(&args.content, args.crop_size).context(args.content.display())?;
    let spec = ConvNetSpec::default_for(content.channels(), args.net.net_seed);
    let (target, source) = style_target(&args.style)?;
    let channels: Vec<usize> = spec.layers.iter().map(|l| l.out_channels).collect();
    if target.len() != spec.adain_dim() {
        return Err(CliError::Data(format!(
            "style vector has {} entries but the network produces {}",
            target.len(),
            spec.adain_dim()
        )));
    }
    let per_layer = split_adain_vector(&target, &channels)?;
    let maps = extract_features(&content, &spec)?;

    let mut layers = Vec::with_capacity(maps.len());
    for (map, (means, sigmas)) in maps.iter().zip(&per_layer) {
        let (content_means, content_sigmas) = channel_stats(map);
        let styled = apply_adain(map, means, sigmas)?;
        let (got_means, got_sigmas) = channel_stats(&styled);
        let channels = (0..map.channels())
            .map(|c| {
                let (_, var) = channel_moments(map.channel(c));
                AdainChannel {
                    channel: c,
                    content_mean: content_means[c],
                    content_sigma: content_sigmas[c],
                    target_mean: means[c],
                    target_sigma: sigmas[c],
                    achievable_sigma: achievable_sigma(sigmas[c], var),
                    achieved_mean: got_means[c],
                    achieved_sigma: got_sigmas[c],
                }
            })
            .collect();
        layers.push(AdainLayer::new(map.layer(), channels));
    }
    let report = AdainReport::new(args.content.display().to_string(), source, args.tol, layers);
    write_json(&report, &args.out)?;

    for l in &report.layers {
        writeln!(
            out,
            "layer {}: {} channels, max deviation {:.3e}",
            l.layer,
            l.channels.len(),
            l.max_deviation
        )?;
    }
    writeln!(
        out,
        "max deviation {:.3e} (tol {:.1e}), {} channel(s) limited to the sqrt(eps) floor -> {}",
        report.max_deviation,
        report.tol,
        report.clamped_channels,
        args.out.display()
    )?;
    if !report.within_tolerance {
        return Err(CliError::Numerical(format!(
            "achieved statistics deviate by {:.3e}, above tolerance {:.1e}",
            report.max_deviation, report.tol
        )));
    }
    Ok(())
}

pub fn invariance(args: &InvarianceArgs, out: &mut dyn Write) -> CliResult<()> {
    let img = load_image(&args.image).context(args.image.display())?;
    let spec = ConvNetSpec::default_for(img.channels(), args.net.net_seed);
    let report = invariance_check(&img, args.rect_a, args.rect_b, &spec, args.tol)?;
    let summary = InvarianceSummary {
        image: args.image.display().to_string(),
        rect_a: args.rect_a.into(),
        rect_b: args.rect_b.into(),
        tol: report.tol,
        required_margin: report.required_margin,
        homogeneous: report.homogeneous,
        layers: report
            .layers
            .iter()
            .map(|l| InvarianceLayer {
                layer: l.layer,
                adain_max_deviation: l.adain,
                gram_max_deviation: l.gram,
            })
            .collect(),
        max_adain_deviation: report.max_adain_deviation(),
        max_gram_deviation: report.max_gram_deviation(),
        within_tolerance: report.within_tolerance(),
        consistent: report.consistent(),
    };
    if let Some(path) = &args.out {
        write_json(&summary, path)?;
    }

    writeln!(
        out,
        "homogeneous surroundings (margin {}): {}",
        summary.required_margin,
        if summary.homogeneous { "yes" } else { "no" }
    )?;
    for l in &summary.layers {
        writeln!(
            out,
            "layer {}: adain {:.3e}  gram {:.3e}",
            l.layer, l.adain_max_deviation, l.gram_max_deviation
        )?;
    }
    let verdict = match (summary.homogeneous, summary.within_tolerance) {
        (true, true) => "invariant",
        (true, false) => "VIOLATED",
        (false, true) => "invariant (precondition not met)",
        (false, false) => "changed (precondition not met)",
    };
    writeln!(out, "verdict: {verdict} at tol {:.1e}", summary.tol)?;
    if !summary.consistent {
        return Err(CliError::Numerical(
            "style statistics changed under a swap of homogeneous regions".into(),
        ));
    }
    Ok(())
}

pub fn synth(args: &SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    create_dir(&args.out_dir)?;
    let mut manifest = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Data(format!("writing manifest: {e}"));
    manifest.write_record(["path", "label"]).map_err(csv_err)?;
    for (label, images) in synthetic_corpus(args.per_label, args.side, args.seed) {
        for (i, img) in images.iter().enumerate() {
            let name = format!("{label}_{i:02}.ppm");
            let path = args.out_dir.join(&name);
            save_image(img, &path).context(path.display())?;
            manifest
                .write_record([name.as_str(), label.as_str()])
                .map_err(csv_err)?;
        }
    }
    let bytes = manifest
        .into_inner()
        .map_err(|e| CliError::Data(format!("writing manifest: {e}")))?;
    let manifest_path = args.out_dir.join("manifest.csv");
    fs::write(&manifest_path, bytes).context(manifest_path.display())?;

    let (twin, a, b) = twin_patch_image();
    let twin_path = args.out_dir.join("twin.usti");
    save_image(&twin, &twin_path).context(twin_path.display())?;

    writeln!(out, "manifest -> {}", manifest_path.display())?;
    writeln!(
        out,
        "invariance fixture -> {} (regions {},{},{},{} and {},{},{},{})",
        twin_path.display(),
        a.x,
        a.y,
        a.width,
        a.height,
        b.x,
        b.y,
        b.width,
        b.height
    )?;
    Ok(())
}
