use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use svgloo::artifact::{self, ArtifactKind, DetectionMethod, DetectionResult};
use svgloo::concepts::{load_heatmaps, write_heatmaps};
use svgloo::edit_lab::{summarize, EditOutcome};
use svgloo::pipeline::{self, ScoredDocument};
use svgloo::scoring::Classification;
use svgloo::split::split_verified;
use svgloo::svg::Origin;
use svgloo::{synth, EditKind, ErrorClass, Raster, RunConfig, StructuralReport, SvgDocument};

use crate::output::{
    companion, csv_field, discover, document_seed, file_name, io_error, mean, opt, out_dir, stem, write_json,
    write_text, Envelope, InputFile,
};
use crate::{CliError, CliResult, Context};

struct Loaded {
    path: PathBuf,
    input: InputFile,
    doc: SvgDocument,
}

fn load_svg(path: &Path) -> CliResult<Loaded> {
    let (input, bytes) = InputFile::read(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::new(ErrorClass::Parse, format!("{}: not valid UTF-8", path.display())))?;
    let doc = SvgDocument::parse(&text).context(path.display())?;
    Ok(Loaded {
        path: path.to_path_buf(),
        input,
        doc,
    })
}

fn load_reference(base: Option<&Path>, svg: &Path, corpus: bool) -> CliResult<Option<(Raster, InputFile)>> {
    let Some(base) = base else { return Ok(None) };
    let path = companion(base, svg, corpus, ".png");
    if !path.is_file() {
        return Err(CliError::new(
            ErrorClass::Io,
            format!("reference image {} not found", path.display()),
        ));
    }
    let (input, _) = InputFile::read(&path)?;
    let raster = Raster::load_png(&path).context(path.display())?;
    Ok(Some((raster, input)))
}

fn corpus_mode(path: &Path) -> bool {
    path.is_dir()
}

fn score_one(
    loaded: &Loaded,
    reference: Option<&Path>,
    corpus: bool,
    config: &RunConfig,
) -> CliResult<(ScoredDocument, Vec<InputFile>)> {
    let mut inputs = vec![loaded.input.clone()];
    let reference = load_reference(reference, &loaded.path, corpus)?;
    let raster = reference.map(|(r, input)| {
        inputs.push(input);
        r
    });
    let scored = pipeline::score_document(&loaded.doc, raster.as_ref(), config).context(&loaded.input.file)?;
    Ok((scored, inputs))
}

#[derive(Serialize)]
struct ElementEntry {
    index: usize,
    kind: String,
    origin: &'static str,
    subpath: Option<usize>,
    delta: f64,
    classification: Classification,
    footprint_mass: f64,
}

#[derive(Serialize)]
struct LooReport {
    n_elements: usize,
    full_score: f64,
    renders: usize,
    counts: BTreeMap<Classification, usize>,
    elements: Vec<ElementEntry>,
    warnings: Vec<String>,
}

pub fn score(path: &Path, reference: Option<&Path>, export_footprints: bool, config: &RunConfig) -> CliResult<()> {
    let corpus = corpus_mode(path);
    let out = out_dir(config)?;
    for svg in discover(path)? {
        let loaded = load_svg(&svg)?;
        let (scored, inputs) = score_one(&loaded, reference, corpus, config)?;
        let mut counts = BTreeMap::new();
        let elements = scored
            .loo
            .results
            .iter()
            .map(|r| {
                *counts.entry(r.classification).or_insert(0) += 1;
                let el = &scored.document.elements()[r.index];
                let (origin, subpath) = match el.origin {
                    Origin::Node { .. } => ("node", None),
                    Origin::SubpathSplit { ordinal, .. } => ("subpath-split", Some(ordinal)),
                    Origin::Synthetic => ("synthetic", None),
                };
                ElementEntry {
                    index: r.index,
                    kind: el.kind.to_string(),
                    origin,
                    subpath,
                    delta: r.delta,
                    classification: r.classification,
                    footprint_mass: r.footprint_mass,
                }
            })
            .collect();
        let report = LooReport {
            n_elements: scored.document.len(),
            full_score: scored.loo.full_score,
            renders: scored.loo.renders,
            counts,
            elements,
            warnings: scored.warnings(),
        };
        let name = stem(&svg);
        write_json(
            &out.join(format!("{name}.loo.json")),
            &Envelope::new("score", inputs, config, &report),
        )?;
        if export_footprints {
            let dir = out.join(format!("{name}.footprints"));
            fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
            for r in &scored.loo.results {
                r.footprint
                    .save_png(&dir.join(format!("element_{:04}.png", r.index)))
                    .context(&loaded.input.file)?;
            }
        }
    }
    Ok(())
}

fn manifest_for(heatmaps: &Path, svg: &Path, corpus: bool) -> CliResult<PathBuf> {
    let manifest = if corpus {
        heatmaps.join(stem(svg)).join("manifest.json")
    } else {
        heatmaps.to_path_buf()
    };
    if !manifest.is_file() {
        return Err(CliError::new(
            ErrorClass::Io,
            format!(
                "heatmap manifest {} not found; produce one with the grounding sidecar or write a file-based manifest (see README)",
                manifest.display()
            ),
        ));
    }
    Ok(manifest)
}

#[derive(Serialize)]
struct AttributionDump<'a> {
    concepts: Vec<String>,
    rows: &'a [Vec<f64>],
    active: &'a [bool],
    primary: &'a [usize],
    purity: &'a [f64],
    epsilon: f64,
}

#[derive(Serialize)]
struct MetricsBody<'a> {
    report: &'a StructuralReport,
    attribution: AttributionDump<'a>,
    warnings: &'a [String],
}

fn structural(
    loaded: &Loaded,
    reference: Option<&Path>,
    heatmaps: &Path,
    corpus: bool,
    config: &RunConfig,
) -> CliResult<(ScoredDocument, pipeline::StructuralAnalysis, Vec<InputFile>)> {
    let manifest = manifest_for(heatmaps, &loaded.path, corpus)?;
    let (scored, mut inputs) = score_one(loaded, reference, corpus, config)?;
    inputs.push(InputFile::read(&manifest)?.0);
    let candidates = load_heatmaps(&manifest, config.render_size).context(manifest.display())?;
    let analysis = pipeline::structural_analysis(&scored, &candidates, config).context(&loaded.input.file)?;
    Ok((scored, analysis, inputs))
}

pub fn metrics(path: &Path, reference: Option<&Path>, heatmaps: &Path, config: &RunConfig) -> CliResult<()> {
    let corpus = corpus_mode(path);
    let out = out_dir(config)?;
    let mut rows = Vec::new();
    for svg in discover(path)? {
        let loaded = load_svg(&svg)?;
        let (_, analysis, inputs) = structural(&loaded, reference, heatmaps, corpus, config)?;
        let a = &analysis.attribution;
        let names = analysis.concepts.names();
        let body = MetricsBody {
            report: &analysis.report,
            attribution: AttributionDump {
                concepts: names.clone(),
                rows: a.rows(),
                active: a.active(),
                primary: a.primaries(),
                purity: a.purities(),
                epsilon: a.epsilon(),
            },
            warnings: &analysis.warnings,
        };
        let name = stem(&svg);
        write_json(
            &out.join(format!("{name}.metrics.json")),
            &Envelope::new("metrics", inputs, config, &body),
        )?;
        write_text(&out.join(format!("{name}.attribution.csv")), &a.to_csv(&names))?;
        rows.push((file_name(&svg), analysis.report.clone()));
    }
    write_text(&out.join("metrics.csv"), &metrics_csv(&rows))
}

const METRICS_HEADER: &str = "document,purity,coverage,compactness,locality,crosstalk,n_elements,n_active,n_concepts";

fn metrics_csv(rows: &[(String, StructuralReport)]) -> String {
    let mut csv = format!("{METRICS_HEADER}\n");
    for (doc, r) in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(doc),
            opt(r.purity),
            r.coverage,
            opt(r.compactness.mean),
            opt(r.locality.mean),
            opt(r.crosstalk),
            r.n_elements,
            r.n_active,
            r.n_concepts
        );
    }
    csv
}

pub fn aggregate(dir: &Path, out: Option<&Path>) -> CliResult<()> {
    let mut reports: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| file_name(p).ends_with(".metrics.json"))
        .collect();
    reports.sort();
    let mut rows = Vec::with_capacity(reports.len());
    for path in reports {
        let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::new(ErrorClass::Io, format!("{}: {e}", path.display())))?;
        let report: StructuralReport = serde_json::from_value(value["report"].clone())
            .map_err(|e| CliError::new(ErrorClass::Io, format!("{}: {e}", path.display())))?;
        let document = value["inputs"][0]["file"].as_str().unwrap_or_default().to_string();
        rows.push((document, report));
    }
    let target = out.map_or_else(|| dir.join("aggregate.csv"), Path::to_path_buf);
    write_text(&target, &metrics_csv(&rows))
}

/// Parses, splits and injects artifacts with the document's derived seed.
fn injected(loaded: &Loaded, config: &RunConfig) -> CliResult<(SvgDocument, artifact::InjectionRecord, Vec<String>)> {
    let split = split_verified(&loaded.doc, &config.render(), config.split_tolerance).context(&loaded.input.file)?;
    let seed = document_seed(config.seed, &loaded.path);
    let record = artifact::inject(&split.document, config.artifacts, seed).context(&loaded.input.file)?;
    Ok((split.document.clone(), record, split.warnings()))
}

#[derive(Serialize)]
struct InjectionBody<'a> {
    seed: u64,
    n_source: usize,
    n_injected: usize,
    truth: &'a [usize],
    kinds: &'a [ArtifactKind],
    warnings: Vec<String>,
}

pub fn inject(path: &Path, config: &RunConfig) -> CliResult<()> {
    let out = out_dir(config)?;
    for svg in discover(path)? {
        let loaded = load_svg(&svg)?;
        let (_, record, warnings) = injected(&loaded, config)?;
        let name = stem(&svg);
        write_text(
            &out.join(format!("{name}.injected.svg")),
            &record.injected.to_svg_string(),
        )?;
        let body = InjectionBody {
            seed: record.seed,
            n_source: record.source.len(),
            n_injected: record.injected.len(),
            truth: &record.truth,
            kinds: &record.kinds,
            warnings,
        };
        write_json(
            &out.join(format!("{name}.injection.json")),
            &Envelope::new("inject", vec![loaded.input.clone()], config, &body),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DetectBody<'a> {
    seed: u64,
    k: usize,
    truth: &'a [usize],
    kinds: &'a [ArtifactKind],
    results: &'a [DetectionResult],
    warnings: Vec<String>,
}

pub fn detect(path: &Path, reference: Option<&Path>, methods: &[DetectionMethod], config: &RunConfig) -> CliResult<()> {
    let corpus = corpus_mode(path);
    let out = out_dir(config)?;
    let backend = config.similarity_backend()?;
    let mut csv = String::from("document,method,precision,recall,f1,delta_ssim\n");
    let mut by_method: BTreeMap<&'static str, Vec<&DetectionResult>> = BTreeMap::new();
    let mut all: Vec<(String, Vec<DetectionResult>)> = Vec::new();
    for svg in discover(path)? {
        let loaded = load_svg(&svg)?;
        let mut inputs = vec![loaded.input.clone()];
        let (clean, record, warnings) = injected(&loaded, config)?;
        let reference = match load_reference(reference, &svg, corpus)? {
            Some((r, input)) => {
                inputs.push(input);
                r
            }
            None => config.render().render(&clean).context(&loaded.input.file)?,
        };
        let options = artifact::DetectOptions {
            seed: record.seed,
            ..config.detect_options()
        };
        let results = methods
            .iter()
            .map(|&m| {
                artifact::detect(&record.injected, &reference, &record.truth, m, &backend, &options)
                    .context(&loaded.input.file)
            })
            .collect::<CliResult<Vec<_>>>()?;
        let body = DetectBody {
            seed: record.seed,
            k: config.k,
            truth: &record.truth,
            kinds: &record.kinds,
            results: &results,
            warnings,
        };
        write_json(
            &out.join(format!("{}.detect.json", stem(&svg))),
            &Envelope::new("detect", inputs, config, &body),
        )?;
        all.push((file_name(&svg), results));
    }
    for (doc, results) in &all {
        for r in results {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                csv_field(doc),
                r.method,
                r.precision,
                r.recall,
                r.f1,
                r.delta_ssim
            );
            by_method.entry(r.method.as_str()).or_default().push(r);
        }
    }
    write_text(&out.join("detect.csv"), &csv)?;
    let mut summary = String::from("method,precision,recall,f1,delta_ssim,documents\n");
    for m in methods {
        let rs = &by_method[m.as_str()];
        let avg = |f: fn(&DetectionResult) -> f64| opt(mean(rs.iter().map(|r| Some(f(r)))));
        let _ = writeln!(
            summary,
            "{m},{},{},{},{},{}",
            avg(|r| r.precision),
            avg(|r| r.recall),
            avg(|r| r.f1),
            avg(|r| r.delta_ssim),
            rs.len()
        );
    }
    write_text(&out.join("detect_summary.csv"), &summary)
}

#[derive(Serialize)]
struct EditBody<'a> {
    outcomes: &'a [EditOutcome],
    skipped: &'a [String],
    warnings: &'a [String],
}

pub fn edit_eval(path: &Path, reference: Option<&Path>, heatmaps: &Path, config: &RunConfig) -> CliResult<()> {
    let corpus = corpus_mode(path);
    let out = out_dir(config)?;
    let mut edits = String::from("document,concept,kind,target_change,collateral,precision,definition\n");
    let mut summary = String::from("document,color,delete,move,scale,regroup,overall\n");
    let mut everything: Vec<EditOutcome> = Vec::new();
    let summary_row = |label: &str, outcomes: &[EditOutcome]| {
        let s = summarize(outcomes);
        let cells: Vec<String> = EditKind::ALL.iter().map(|k| opt(s.per_kind[k])).collect();
        format!("{},{},{}\n", csv_field(label), cells.join(","), opt(s.overall))
    };
    for svg in discover(path)? {
        let loaded = load_svg(&svg)?;
        let (scored, analysis, inputs) = structural(&loaded, reference, heatmaps, corpus, config)?;
        let protocol = pipeline::edit_evaluation(&scored, &analysis, config).context(&loaded.input.file)?;
        let body = EditBody {
            outcomes: &protocol.outcomes,
            skipped: &protocol.skipped,
            warnings: &analysis.warnings,
        };
        write_json(
            &out.join(format!("{}.edits.json", stem(&svg))),
            &Envelope::new("edit-eval", inputs, config, &body),
        )?;
        let doc = file_name(&svg);
        for o in &protocol.outcomes {
            let _ = writeln!(
                edits,
                "{},{},{},{},{},{},{}",
                csv_field(&doc),
                csv_field(&o.concept),
                o.kind,
                o.target_change,
                o.collateral,
                opt(o.precision),
                o.definition
            );
        }
        summary.push_str(&summary_row(&doc, &protocol.outcomes));
        everything.extend(protocol.outcomes);
    }
    summary.push_str(&summary_row("mean", &everything));
    write_text(&out.join("edits.csv"), &edits)?;
    write_text(&out.join("edit_summary.csv"), &summary)
}

pub fn synth(count: usize, config: &RunConfig) -> CliResult<()> {
    let out = out_dir(config)?;
    for (k, doc) in synth::separable_corpus(count, config.seed).iter().enumerate() {
        write_text(
            &out.join("separable").join(format!("doc_{k:03}.svg")),
            &doc.to_svg_string(),
        )?;
    }
    for (k, doc) in synth::compound_path_corpus(20, config.seed).iter().enumerate() {
        write_text(
            &out.join("compound").join(format!("compound_{k:03}.svg")),
            &doc.to_svg_string(),
        )?;
    }
    let size = config.render_size;
    let cases = [
        ("isolated", synth::isolated_concepts(size)),
        ("entangled", synth::entangled_concepts(size)),
        ("two", synth::two_concepts(size)),
    ];
    let dir = out.join("concepts");
    for (name, case) in cases {
        write_text(&dir.join(format!("{name}.svg")), &case.document.to_svg_string())?;
        write_heatmaps(&dir.join(name), size, &case.concepts).context(name)?;
    }
    Ok(())
}
