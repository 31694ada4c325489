use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use elt_core::detector::{
    detect_with, detections_from_json, detections_to_json, DetectError, Detection,
};
use elt_core::eval::{
    evaluate, evaluate_suite, generate_synthetic, labels_from_json, labels_to_json, EvalReport,
    SyntheticSpec, PRESSURE, VOLUME,
};
use elt_core::model::{load_csv, CsvOptions};
use elt_core::predicates::{PredicateRegistry, RuleBasedScorer};
use elt_core::schema::{parse_schema_bytes, parse_schema_with, EventCatalog};
use elt_core::{GroundTruthEvent, ModelError, SeriesFrame};

use crate::render::{render_svg, RenderOptions};
use crate::{
    read_text, write_text, CliError, Config, CsvArgs, DetectArgs, EvalArgs, RenderArgs, SynthArgs,
    ValidateArgs,
};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_catalog(path: &Path, registry: &PredicateRegistry) -> Result<EventCatalog, CliError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let catalog = match std::str::from_utf8(&bytes) {
        Ok(text) => parse_schema_with(text, registry)?,
        Err(_) => parse_schema_bytes(&bytes)?,
    };
    Ok(catalog)
}

pub fn validate(args: &ValidateArgs) -> Result<(), CliError> {
    let cfg = Config::load(args.config.config.as_deref())?;
    let catalog = load_catalog(&args.schema, &cfg.registry()?)?;
    println!(
        "ok: {} event type(s): {}",
        catalog.len(),
        catalog.event_types().join(", ")
    );
    Ok(())
}

fn csv_options(csv: &CsvArgs) -> Result<CsvOptions, CliError> {
    if !csv.delimiter.is_ascii() {
        return Err(CliError::Usage(
            "delimiter must be a single ASCII character".into(),
        ));
    }
    Ok(CsvOptions {
        delimiter: csv.delimiter as u8,
        timestamp_column: csv.timestamp_column.clone(),
        ..CsvOptions::default()
    })
}

/// Loads the schema channels from a CSV file, renaming mapped columns to
/// their channel names.
fn load_mapped(
    path: &Path,
    catalog: &EventCatalog,
    mapping: &[(String, String)],
    opts: &CsvOptions,
) -> Result<SeriesFrame, CliError> {
    let channels: Vec<String> = catalog
        .declared_channels()
        .into_iter()
        .map(String::from)
        .collect();
    let map: BTreeMap<&str, &str> = mapping
        .iter()
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect();
    if let Some(k) = map.keys().find(|k| !channels.iter().any(|c| c == *k)) {
        return Err(DetectError::ChannelMismatch(k.to_string()).into());
    }
    let columns: Vec<String> = channels
        .iter()
        .map(|c| map.get(c.as_str()).map_or(c.clone(), |v| v.to_string()))
        .collect();
    let frame = load_csv(path, &columns, opts).map_err(|e| match e {
        ModelError::MissingColumn(col) => {
            let ch = channels[columns.iter().position(|c| *c == col).unwrap_or(0)].clone();
            CliError::Detect(DetectError::ChannelMismatch(ch))
        }
        ModelError::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other.into(),
    })?;
    let data = (0..frame.n_channels())
        .map(|i| frame.column(i).to_vec())
        .collect();
    Ok(SeriesFrame::new(channels, data, frame.sample_period())?)
}

fn sorted_entries(dir: &Path, suffix: &str) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(stem) = name.strip_suffix(suffix) {
            if path.is_file() && !stem.is_empty() {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn detect(args: &DetectArgs) -> Result<(), CliError> {
    let mut cfg = Config::load(args.config.config.as_deref())?;
    if let Some(v) = args.min_confidence {
        cfg.detector.min_confidence = v;
    }
    if let Some(v) = args.nms_iou {
        cfg.detector.nms_iou = v;
    }
    if let Some(v) = args.beam_width {
        cfg.search.beam_width = v;
    }
    let registry = cfg.registry()?;
    let catalog = load_catalog(&args.schema, &registry)?;
    let scorer = RuleBasedScorer::new(registry);
    let opts = csv_options(&args.csv)?;

    let mut trace = match &args.trace {
        Some(p) => Some(BufWriter::new(File::create(p).map_err(io_err(p))?)),
        None => None,
    };
    let mut run = |data: &Path| -> Result<String, CliError> {
        let frame = load_mapped(data, &catalog, &args.map, &opts)?;
        let det_cfg = cfg.detector(frame.len())?;
        let sink = trace.as_mut().map(|w| w as &mut dyn Write);
        let dets = detect_with(&frame, &catalog, &scorer, &det_cfg, sink)?;
        Ok(detections_to_json(&dets))
    };

    if args.data.is_dir() {
        let out = args.out.as_ref().ok_or_else(|| {
            CliError::Usage("--out must name a directory when --data is one".into())
        })?;
        std::fs::create_dir_all(out).map_err(io_err(out))?;
        let files = sorted_entries(&args.data, ".csv")?;
        for (stem, path) in &files {
            let json = run(path)?;
            write_text(&out.join(format!("{stem}.detections.json")), &json)?;
        }
        eprintln!("processed {} file(s) into {}", files.len(), out.display());
    } else {
        let json = run(&args.data)?;
        match &args.out {
            Some(p) => write_text(p, &json)?,
            None => print!("{json}"),
        }
    }
    if let Some(w) = trace.as_mut() {
        w.flush()
            .map_err(io_err(args.trace.as_deref().unwrap_or(Path::new("trace"))))?;
    }
    Ok(())
}

fn read_detections(path: &Path) -> Result<Vec<Detection>, CliError> {
    Ok(detections_from_json(&read_text(path)?)?)
}

fn read_labels(path: &Path) -> Result<Vec<GroundTruthEvent>, CliError> {
    Ok(labels_from_json(&read_text(path)?)?)
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let cfg = Config::load(args.config.config.as_deref())?;
    let thresholds = args.thresholds.clone().unwrap_or(cfg.eval.thresholds);
    let report: EvalReport = if args.labels.is_dir() {
        if !args.detections.is_dir() {
            return Err(CliError::Usage(
                "--detections must be a directory when --labels is one".into(),
            ));
        }
        let mut pairs = Vec::new();
        for (stem, path) in sorted_entries(&args.labels, ".labels.json")? {
            let det_path = args.detections.join(format!("{stem}.detections.json"));
            pairs.push((read_detections(&det_path)?, read_labels(&path)?));
        }
        let refs: Vec<(&[Detection], &[GroundTruthEvent])> = pairs
            .iter()
            .map(|(d, l)| (d.as_slice(), l.as_slice()))
            .collect();
        evaluate_suite(&refs, &thresholds)?
    } else {
        let dets = read_detections(&args.detections)?;
        let labels = read_labels(&args.labels)?;
        evaluate(&dets, &labels, &thresholds)?
    };
    print!("{}", report.to_table());
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        write_text(out, &json)?;
    }
    Ok(())
}

/// Every CSV column except the timestamp column, in file order.
fn all_channels(path: &Path, opts: &CsvOptions) -> Result<Vec<String>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(headers
        .iter()
        .filter(|h| Some(*h) != opts.timestamp_column.as_deref())
        .map(String::from)
        .collect())
}

pub fn render(args: &RenderArgs) -> Result<(), CliError> {
    let opts = csv_options(&args.csv)?;
    let channels = all_channels(&args.data, &opts)?;
    let frame = load_csv(&args.data, &channels, &opts)?;
    let dets = match &args.detections {
        Some(p) => read_detections(p)?,
        None => Vec::new(),
    };
    if !(args.width.is_finite() && args.width > 0.0) {
        return Err(CliError::Usage("--width must be positive".into()));
    }
    let svg = render_svg(&frame, &dets, &RenderOptions { width: args.width });
    write_text(&args.out, &svg)
}

fn write_frame_csv(path: &Path, frame: &SeriesFrame) -> Result<(), CliError> {
    let to_usage = |e: csv::Error| CliError::Usage(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(to_usage)?;
    w.write_record(frame.channels()).map_err(to_usage)?;
    for t in 0..frame.len() {
        let row: Vec<String> = (0..frame.n_channels())
            .map(|c| frame.value(t, c).to_string())
            .collect();
        w.write_record(&row).map_err(to_usage)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut spec: SyntheticSpec = match &args.spec {
        Some(p) => toml::from_str(&read_text(p)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => Config::load(args.config.config.as_deref())?.synth,
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(n) = args.n_samples {
        spec.n_samples = n;
    }
    spec.validate()?;
    let samples = generate_synthetic(&spec)?;
    std::fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;
    for (i, s) in samples.iter().enumerate() {
        debug_assert_eq!(s.frame.channels(), [PRESSURE, VOLUME]);
        write_frame_csv(&args.out_dir.join(format!("frame_{i:03}.csv")), &s.frame)?;
        write_text(
            &args.out_dir.join(format!("frame_{i:03}.labels.json")),
            &labels_to_json(&s.events),
        )?;
    }
    eprintln!(
        "wrote {} frame(s) to {}",
        samples.len(),
        args.out_dir.display()
    );
    Ok(())
}
