use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use hhot::analysis::{format_report_csv, knn_loocv, read_transfer_records, transfer_report, LabeledMatrix};
use hhot::bench::{run_bench, BenchConfig};
use hhot::hierarchy::{
    centroid_matrix, dataset_distance_with, flat_dataset_distance_with, slide_cost_matrix_with, slide_distance_with,
    tile_coupling, Dataset, DirectSolver, MatrixMetadata, PairSolver, Slide, METRIC_FLAT, METRIC_HHOT,
};
use hhot::io::{
    read_distance_matrix, read_labels, read_manifest, subsample_dataset, subsample_tiles, write_distance_matrix,
    write_labels, CachedSolver,
};
use hhot::{ErrorClass, VERSION};

use crate::config::RunArgs;
use crate::{exit, Cli, Command, Metric, ReportFormat};

pub struct Outcome {
    pub converged: bool,
    pub unconverged: usize,
}

impl Outcome {
    fn ok() -> Self {
        Self {
            converged: true,
            unconverged: 0,
        }
    }

    fn from_count(unconverged: usize) -> Self {
        Self {
            converged: unconverged == 0,
            unconverged,
        }
    }
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<hhot::Error>() {
            return match err.class() {
                ErrorClass::Input => exit::INPUT,
                ErrorClass::Io => exit::IO,
                ErrorClass::Budget => exit::BUDGET,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return exit::IO;
        }
    }
    exit::INPUT
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let args = &cli.run;
    args.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers())
        .build()
        .context("starting worker pool")?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let args = &cli.run;
    match &cli.command {
        Command::SlideDist {
            manifest_a,
            slide_a,
            manifest_b,
            slide_b,
            coupling,
        } => slide_dist(args, manifest_a, slide_a, manifest_b, slide_b, coupling.as_deref()),
        Command::Couple {
            manifest_a,
            slide_a,
            manifest_b,
            slide_b,
        } => {
            let out = args
                .out
                .as_deref()
                .ok_or_else(|| anyhow!(hhot::Error::InvalidConfig("couple needs --out".into())))?;
            let a = load_slide(args, manifest_a, slide_a)?;
            let b = load_slide(args, manifest_b, slide_b)?;
            write_coupling(args, &a, &b, out)
        }
        Command::DatasetDist {
            manifest_a,
            manifest_b,
            flat: false,
        } => dataset_dist(args, manifest_a, manifest_b),
        Command::DatasetDist {
            manifest_a,
            manifest_b,
            flat: true,
        } => flat_dist(args, manifest_a, manifest_b),
        Command::Matrix { manifests, metric } => matrix(args, manifests, *metric),
        Command::Knn {
            matrix,
            labels,
            k_min,
            k_max,
        } => knn(args, matrix, labels.as_deref(), *k_min, *k_max),
        Command::Bench {
            n_min,
            n_max,
            n,
            tiles,
            dim,
            repeats,
        } => bench(args, *n_min, *n_max, n, *tiles, *dim, *repeats),
        Command::Transfer {
            records,
            pooled,
            format,
        } => transfer(args, records, *pooled, *format),
    }
}

/// Writes `text` to `--out`, or to stdout when no path is given.
fn emit(args: &RunArgs, text: &str) -> Result<()> {
    match &args.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_slide(args: &RunArgs, manifest: &Path, id: &str) -> Result<Slide> {
    let m = read_manifest(manifest)?;
    let i = m.slide_index(id).ok_or_else(|| {
        anyhow!(hhot::Error::InvalidConfig(format!(
            "slide `{id}` not found in {}",
            manifest.display()
        )))
    })?;
    let s = m.load_slide(i)?;
    Ok(match args.subsample_spec() {
        Some((k, seed)) => subsample_tiles(&s, k, seed)?,
        None => s,
    })
}

fn load_dataset(args: &RunArgs, manifest: &Path) -> Result<Dataset> {
    let d = read_manifest(manifest)?.load()?;
    Ok(match args.subsample_spec() {
        Some((k, seed)) => subsample_dataset(&d, k, seed)?,
        None => d,
    })
}

/// Runs `f` against a cache-backed solver when `--cache` is set.
fn with_solver<T>(args: &RunArgs, f: impl FnOnce(&dyn PairSolver) -> Result<T>) -> Result<T> {
    match &args.cache_dir {
        Some(dir) => {
            let solver = CachedSolver::new(dir)?.with_subsample(args.subsample_spec());
            let out = f(&solver);
            log::info!("cache: {} hits, {} misses", solver.hits(), solver.misses());
            out
        }
        None => f(&DirectSolver),
    }
}

fn base_metadata(args: &RunArgs, metric: &str) -> MatrixMetadata {
    let mut md = MatrixMetadata {
        epsilon_inner: Some(args.epsilon_inner),
        debiased: args.is_debiased(),
        metric: metric.into(),
        ..MatrixMetadata::default()
    };
    args.stamp(&mut md);
    md
}

#[derive(Serialize)]
struct ScalarReport<'a> {
    command: &'a str,
    a: &'a str,
    b: &'a str,
    value: f64,
    linear_cost: f64,
    converged: bool,
    iterations: usize,
    metadata: MatrixMetadata,
}

fn report_scalar(args: &RunArgs, report: ScalarReport<'_>) -> Result<()> {
    println!("{}", report.value);
    if let Some(p) = &args.out {
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn slide_dist(
    args: &RunArgs,
    manifest_a: &Path,
    id_a: &str,
    manifest_b: &Path,
    id_b: &str,
    coupling: Option<&Path>,
) -> Result<Outcome> {
    let a = load_slide(args, manifest_a, id_a)?;
    let b = load_slide(args, manifest_b, id_b)?;
    let r = with_solver(args, |s| Ok(slide_distance_with(s, &a, &b, &args.inner())?))?;
    report_scalar(
        args,
        ScalarReport {
            command: "slide-dist",
            a: id_a,
            b: id_b,
            value: r.value(),
            linear_cost: r.linear_cost,
            converged: r.converged,
            iterations: r.iterations,
            metadata: base_metadata(args, METRIC_HHOT),
        },
    )?;
    let mut outcome = Outcome::from_count(usize::from(!r.converged));
    if let Some(path) = coupling {
        let c = write_coupling(args, &a, &b, path)?;
        outcome.converged &= c.converged;
        outcome.unconverged += c.unconverged;
    }
    Ok(outcome)
}

/// Coupling CSV: metadata comments, then one row per tile of `a`.
fn write_coupling(args: &RunArgs, a: &Slide, b: &Slide, path: &Path) -> Result<Outcome> {
    let c = tile_coupling(a, b, &args.inner())?;
    let converged = c.row_residual.max(c.col_residual) <= args.tolerance;
    let mut text = String::new();
    writeln!(text, "# slide_a={}", a.id)?;
    writeln!(text, "# slide_b={}", b.id)?;
    writeln!(text, "# epsilon={}", args.epsilon_inner)?;
    writeln!(text, "# row_residual={}", c.row_residual)?;
    writeln!(text, "# col_residual={}", c.col_residual)?;
    for (k, v) in args.metadata_extra() {
        writeln!(text, "# {k}={v}")?;
    }
    writeln!(text, "# version={VERSION}")?;
    let header: Vec<String> = (0..b.n_tiles()).map(|j| j.to_string()).collect();
    writeln!(text, "tile,{}", header.join(","))?;
    for (i, row) in c.matrix.outer_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(text, "{i},{}", cells.join(","))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(Outcome::from_count(usize::from(!converged)))
}

fn dataset_dist(args: &RunArgs, manifest_a: &Path, manifest_b: &Path) -> Result<Outcome> {
    let a = load_dataset(args, manifest_a)?;
    let b = load_dataset(args, manifest_b)?;
    let h = args.hierarchy();
    let d = with_solver(args, |s| Ok(dataset_distance_with(s, &a, &b, &h)?))?;
    let mut md = base_metadata(args, METRIC_HHOT);
    md.epsilon_outer = Some(args.epsilon_outer);
    md.unconverged = d.cross.metadata.unconverged
        + d.self_a.as_ref().map_or(0, |m| m.metadata.unconverged)
        + d.self_b.as_ref().map_or(0, |m| m.metadata.unconverged);
    let unconverged = md.unconverged + usize::from(md.unconverged == 0 && !d.result.converged);
    report_scalar(
        args,
        ScalarReport {
            command: "dataset-dist",
            a: &a.name,
            b: &b.name,
            value: d.result.value(),
            linear_cost: d.result.linear_cost,
            converged: d.result.converged,
            iterations: d.result.iterations,
            metadata: md,
        },
    )?;
    Ok(Outcome::from_count(unconverged))
}

fn flat_dist(args: &RunArgs, manifest_a: &Path, manifest_b: &Path) -> Result<Outcome> {
    let a = load_dataset(args, manifest_a)?;
    let b = load_dataset(args, manifest_b)?;
    let budget = Some(args.memory_budget());
    let r = with_solver(args, |s| {
        Ok(flat_dataset_distance_with(s, &a, &b, &args.inner(), budget)?)
    })?;
    report_scalar(
        args,
        ScalarReport {
            command: "dataset-dist --flat",
            a: &a.name,
            b: &b.name,
            value: r.value(),
            linear_cost: r.linear_cost,
            converged: r.converged,
            iterations: r.iterations,
            metadata: base_metadata(args, METRIC_FLAT),
        },
    )?;
    Ok(Outcome::from_count(usize::from(!r.converged)))
}

/// Companion file holding slide labels next to a matrix file.
pub fn labels_path(matrix: &Path) -> PathBuf {
    matrix.with_extension("labels.csv")
}

fn matrix(args: &RunArgs, manifests: &[PathBuf], metric: Metric) -> Result<Outcome> {
    let mut slides = Vec::new();
    for p in manifests {
        slides.extend(load_dataset(args, p)?.slides().iter().cloned());
    }
    let union = Dataset::uniform("union", slides)?;
    let mut m = match metric {
        Metric::Hhot => with_solver(args, |s| Ok(slide_cost_matrix_with(s, &union, &union, &args.inner())?))?,
        Metric::Centroid => centroid_matrix(&union, &union)?,
    };
    let unconverged = m.metadata.unconverged;
    let mut md = base_metadata(args, &m.metadata.metric);
    md.epsilon_inner = m.metadata.epsilon_inner;
    md.debiased = m.metadata.debiased;
    md.unconverged = unconverged;
    m.metadata = md;

    match &args.out {
        Some(path) => {
            write_distance_matrix(&m, path)?;
            let labels: Vec<(String, String)> = union
                .slides()
                .iter()
                .filter_map(|s| s.label.clone().map(|l| (s.id.clone(), l)))
                .collect();
            if !labels.is_empty() {
                write_labels(labels_path(path), &labels)?;
            }
        }
        None => print!("{}", hhot::io::format_distance_matrix(&m)?),
    }
    Ok(Outcome::from_count(unconverged))
}

fn knn(args: &RunArgs, matrix: &Path, labels: Option<&Path>, k_min: usize, k_max: usize) -> Result<Outcome> {
    let m = read_distance_matrix(matrix)?;
    let labels_file = labels.map(Path::to_path_buf).unwrap_or_else(|| labels_path(matrix));
    let pairs = read_labels(&labels_file)?;
    let lm = LabeledMatrix::from_id_labels(m, &pairs)?;
    if k_min == 0 || k_min > k_max {
        return Err(anyhow!(hhot::Error::InvalidConfig(format!(
            "empty k range {k_min}..={k_max}"
        ))));
    }
    let results = (k_min..=k_max)
        .map(|k| knn_loocv(&lm, k))
        .collect::<hhot::Result<Vec<_>>>()?;
    let classes: Vec<String> = results[0].recall.keys().cloned().collect();
    let mut text = String::from("k,accuracy");
    for c in &classes {
        write!(text, ",recall:{c}")?;
    }
    text.push('\n');
    for r in &results {
        write!(text, "{},{}", r.k, r.accuracy)?;
        for c in &classes {
            write!(text, ",{}", r.recall[c])?;
        }
        text.push('\n');
    }
    emit(args, &text)?;
    Ok(Outcome::ok())
}

#[allow(clippy::too_many_arguments)]
fn bench(
    args: &RunArgs,
    n_min: usize,
    n_max: usize,
    n: &[usize],
    tiles: usize,
    dim: usize,
    repeats: usize,
) -> Result<Outcome> {
    let n_slides = if n.is_empty() {
        (n_min..=n_max).collect()
    } else {
        n.to_vec()
    };
    if n_slides.is_empty() {
        return Err(anyhow!(hhot::Error::InvalidConfig(format!(
            "empty slide range {n_min}..={n_max}"
        ))));
    }
    let cfg = BenchConfig {
        n_slides,
        tiles_per_slide: tiles,
        dim,
        repeats,
        seed: args.seed,
        hierarchy: args.hierarchy(),
        memory_budget: Some(args.memory_budget()),
        workers: rayon::current_num_threads(),
    };
    let rows = run_bench(&cfg)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut text = String::from(
        "n_slides,tiles_per_slide,dim,workers,t_hier,t_flat,hier_cost,hier_solve,flat_cost,flat_solve,flat_status,hier_value,flat_value\n",
    );
    for r in &rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n_slides,
            r.tiles_per_slide,
            r.dim,
            r.workers,
            r.t_hier,
            opt(r.t_flat),
            r.hier_cost,
            r.hier_solve,
            opt(r.flat_cost),
            opt(r.flat_solve),
            r.flat_status,
            r.hier_value,
            opt(r.flat_value)
        )?;
    }
    emit(args, &text)?;
    Ok(Outcome::ok())
}

fn transfer(args: &RunArgs, records: &Path, pooled: bool, format: Option<ReportFormat>) -> Result<Outcome> {
    let recs = read_transfer_records(records)?;
    let report = transfer_report(&recs, !pooled)?;
    let format = format.unwrap_or_else(|| match args.out.as_ref().and_then(|p| p.extension()) {
        Some(e) if e == "json" => ReportFormat::Json,
        _ => ReportFormat::Csv,
    });
    let text = match format {
        ReportFormat::Csv => format_report_csv(&report),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report)?;
            s.push('\n');
            s
        }
    };
    emit(args, &text)?;
    Ok(Outcome::ok())
}
