use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use neurotopo::diagram::{quantile_summary, quantiles_to_csv, stats_to_csv};
use neurotopo::experiments::{parse_sizes, ClassMatrixExperiment, ExperimentRequest, LofConfig};
use neurotopo::persistence::{betti_from_pairs, DEFAULT_ENGINE};
use neurotopo::plot::{boxplot_svg, diagram_svg, embedding_svg, parse_embedding_csv, parse_quantile_csv};
use neurotopo::rips::DEFAULT_MEMORY_BUDGET;
use neurotopo::{
    bottleneck_distance, build_filtration, diagram_stats, distance_matrix, filter_outliers, load_cloud,
    load_diagram, lof_scores, normalize_cloud, pairwise_distances, CloudFormat, CloudSet, CsvOptions,
    EmbedderRegistry, EngineRegistry, Error, ExperimentRegistry, FiltrationConfig, PersistenceDiagram,
    PipelineConfig, PointCloud, Scale, SourceMeta,
};

const MEMORY_BUDGET_ENV: &str = "NEUROTOPO_MEMORY_BUDGET_MB";

#[derive(Parser)]
#[command(name = "neurotopo", version, about = "Persistent homology of neural representation point clouds")]
struct Cli {
    /// Worker threads (default: number of logical cores). Output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Persistence diagram of one point cloud.
    Persist(PersistArgs),
    /// Betti numbers of one point cloud at a fixed scale.
    Betti(BettiArgs),
    /// Bottleneck distance between two diagram files.
    Bottleneck(BottleneckArgs),
    /// Labeled matrix of pairwise bottleneck distances.
    Distmat(DistmatArgs),
    /// Per-dimension summary statistics of diagrams, optionally with boxplot quantiles.
    Stats(StatsArgs),
    /// Local outlier factor scores of one point cloud.
    Lof(LofArgs),
    /// Planar embedding of a distance matrix.
    Embed(EmbedArgs),
    /// Run an experiment protocol.
    Experiment(ExperimentArgs),
    /// Render a result CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Point cloud file (CSV or tdac binary, detected from the extension or magic bytes).
    #[arg(long)]
    input: PathBuf,

    /// The CSV input starts with a header line.
    #[arg(long)]
    header: bool,
}

#[derive(Args, Clone)]
struct FiltrationArgs {
    /// Highest homology dimension (0, 1 or 2).
    #[arg(long, default_value_t = 1)]
    max_dim: usize,

    /// Filtration value convention: diameter or radius (= diameter / 2).
    #[arg(long, default_value_t = Scale::Diameter)]
    scale: Scale,

    /// Truncation scale in --scale units [default: enclosing radius].
    #[arg(long)]
    threshold: Option<f64>,

    /// Reduction engine.
    #[arg(long, default_value = DEFAULT_ENGINE)]
    engine: String,

    /// Keep zero-lifetime pairs in the diagram.
    #[arg(long)]
    include_zero: bool,
}

#[derive(Args, Clone)]
struct LofFlags {
    /// LOF neighborhood size.
    #[arg(long, default_value_t = neurotopo::outlier::DEFAULT_K)]
    lof_k: usize,

    /// LOF score above which a point is an outlier ("inf" disables removal).
    #[arg(long, default_value_t = neurotopo::outlier::DEFAULT_THRESHOLD)]
    lof_threshold: f64,
}

#[derive(Args)]
struct MetaArgs {
    /// Model key recorded in the diagram header.
    #[arg(long)]
    model: Option<String>,
    /// Layer name recorded in the diagram header.
    #[arg(long)]
    layer: Option<String>,
    /// Class name recorded in the diagram header.
    #[arg(long)]
    class: Option<String>,
}

#[derive(Args)]
struct PersistArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    filtration: FiltrationArgs,
    /// Z-score every activation vector before anything else.
    #[arg(long)]
    normalize: bool,
    /// Drop LOF outliers before building the filtration.
    #[arg(long)]
    lof: bool,
    #[command(flatten)]
    lof_flags: LofFlags,
    #[command(flatten)]
    meta: MetaArgs,
    /// Also write the filtration (value,dimension,vertices) to this file.
    #[arg(long)]
    dump_filtration: Option<PathBuf>,
    /// Output diagram CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BettiArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    filtration: FiltrationArgs,
    /// Scale at which to count features, in --scale units.
    #[arg(long)]
    epsilon: f64,
    /// Z-score every activation vector first.
    #[arg(long)]
    normalize: bool,
    /// Output CSV (dim,betti) [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BottleneckArgs {
    /// First diagram CSV.
    a: PathBuf,
    /// Second diagram CSV.
    b: PathBuf,
    /// Homology dimension to compare.
    #[arg(long)]
    dim: usize,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistmatArgs {
    /// Diagram CSVs; labels come from their metadata, else from the file stem.
    #[arg(required = true, num_args = 2..)]
    diagrams: Vec<PathBuf>,
    /// Homology dimension to compare.
    #[arg(long)]
    dim: usize,
    /// Output matrix CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Diagram CSVs.
    #[arg(required = true)]
    diagrams: Vec<PathBuf>,
    /// Output statistics CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write boxplot quantiles grouped by layer to this file.
    #[arg(long)]
    quantiles: Option<PathBuf>,
}

#[derive(Args)]
struct LofArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Neighborhood size.
    #[arg(long, default_value_t = neurotopo::outlier::DEFAULT_K)]
    k: usize,
    /// Score above which a point is flagged.
    #[arg(long, default_value_t = neurotopo::outlier::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Z-score every activation vector first.
    #[arg(long)]
    normalize: bool,
    /// Output CSV (index,score,flagged) [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the cloud without flagged points (CSV).
    #[arg(long)]
    filtered: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Distance matrix CSV as written by distmat.
    #[arg(long)]
    matrix: PathBuf,
    /// Embedding method.
    #[arg(long, default_value = neurotopo::embed::DEFAULT_EMBEDDER)]
    embedder: String,
    /// Output CSV (label,x,y) [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Protocol: subsample, lof-compare, heatmap or class-matrix.
    name: String,
    /// Single point cloud (subsample).
    #[arg(long)]
    input: Option<PathBuf>,
    /// The CSV input starts with a header line.
    #[arg(long)]
    header: bool,
    /// Manifest CSV with model,layer,class,path (lof-compare, heatmap, class-matrix).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Subsample sizes as start:stop:step (inclusive) or a comma list.
    #[arg(long)]
    sizes: Option<String>,
    /// Random seed for subsampling, half splits and pair sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Homology dimensions to report, comma separated [default: 0..=max-dim].
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    #[command(flatten)]
    filtration: FiltrationArgs,
    /// Skip the per-vector z-scoring.
    #[arg(long)]
    no_normalize: bool,
    /// Drop LOF outliers inside the pipeline (subsample, heatmap, class-matrix).
    #[arg(long)]
    lof: bool,
    #[command(flatten)]
    lof_flags: LofFlags,
    /// Cap on the number of "all" pairs in lof-compare (0 = all pairs).
    #[arg(long, default_value_t = 0)]
    pair_budget: usize,
    /// Layer order for heatmap, comma separated.
    #[arg(long, value_delimiter = ',')]
    layers: Vec<String>,
    /// Layer for class-matrix.
    #[arg(long)]
    layer: Option<String>,
    /// Embedding method for class-matrix.
    #[arg(long, default_value = neurotopo::embed::DEFAULT_EMBEDDER)]
    embedder: String,
    /// Output CSV; extra tables go next to it as <stem>.<suffix>.csv [default: stdout, main table only].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    /// Birth/death scatter of a diagram CSV.
    Diagram,
    /// Boxplots from a quantile CSV.
    Boxplot,
    /// Scatter of an embedding CSV.
    Embedding,
}

#[derive(Args)]
struct PlotArgs {
    /// What the input file holds.
    kind: PlotKind,
    /// Result CSV to render.
    #[arg(long)]
    input: PathBuf,
    /// Output SVG [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Title [default: input file name].
    #[arg(long)]
    title: Option<String>,
    /// Statistic to plot (boxplot).
    #[arg(long, default_value = "life_mean")]
    stat: String,
    /// Homology dimension (boxplot).
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Labels sharing the text before this separator share a color (embedding).
    #[arg(long, default_value = "/")]
    group_sep: String,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::Usage(msg.into()).into()
}

/// Writes to `path` through a temporary file in the same directory, or to stdout.
fn emit(path: Option<&Path>, contents: &[u8]) -> anyhow::Result<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents)?;
            out.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
            tmp.write_all(contents)?;
            // temporary files are created owner-only
            #[cfg(unix)]
            {
                use std::os::unix::fs::PermissionsExt;
                tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
            }
            tmp.persist(path)
                .with_context(|| format!("cannot write {}", path.display()))?;
            info!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn read_cloud(args: &InputArgs) -> anyhow::Result<PointCloud> {
    let format = CloudFormat::detect(&args.input)?;
    let cloud = load_cloud(&args.input, format, CsvOptions { header: args.header })?;
    info!("{}: {} points in {} dimensions", args.input.display(), cloud.len(), cloud.dim());
    Ok(cloud)
}

fn memory_budget() -> anyhow::Result<u64> {
    match std::env::var(MEMORY_BUDGET_ENV) {
        Err(_) => Ok(DEFAULT_MEMORY_BUDGET),
        Ok(v) => {
            let mb: u64 = v
                .trim()
                .parse()
                .map_err(|_| usage(format!("{MEMORY_BUDGET_ENV} must be a whole number of megabytes, got '{v}'")))?;
            Ok(mb.saturating_mul(1 << 20))
        }
    }
}

fn filtration_config(args: &FiltrationArgs) -> anyhow::Result<FiltrationConfig> {
    if args.max_dim > neurotopo::rips::MAX_SUPPORTED_DIM {
        return Err(usage(format!("--max-dim {} is above the supported maximum of 2", args.max_dim)));
    }
    if let Some(t) = args.threshold {
        if t.is_nan() || t < 0.0 {
            return Err(usage(format!("--threshold must be nonnegative, got {t}")));
        }
    }
    Ok(FiltrationConfig {
        max_dim: args.max_dim,
        scale: args.scale,
        threshold: args.threshold,
        memory_budget: memory_budget()?,
    })
}

fn lof_config(flags: &LofFlags) -> anyhow::Result<LofConfig> {
    if flags.lof_k == 0 {
        return Err(usage("--lof-k must be at least 1"));
    }
    if flags.lof_threshold.is_nan() {
        return Err(usage("--lof-threshold must be a number"));
    }
    Ok(LofConfig {
        k: flags.lof_k,
        threshold: flags.lof_threshold,
    })
}

fn pipeline(
    filtration: &FiltrationArgs,
    normalize: bool,
    lof: Option<LofConfig>,
) -> anyhow::Result<PipelineConfig> {
    Ok(PipelineConfig {
        normalize,
        lof,
        filtration: filtration_config(filtration)?,
        keep_zero_lifetime: filtration.include_zero,
        engine: EngineRegistry::default().get(&filtration.engine)?,
    })
}

fn meta_of(args: &MetaArgs) -> Option<SourceMeta> {
    if args.model.is_none() && args.layer.is_none() && args.class.is_none() {
        return None;
    }
    let get = |s: &Option<String>| s.clone().unwrap_or_default();
    Some(SourceMeta::new(get(&args.model), get(&args.layer), get(&args.class)))
}

fn persist(args: PersistArgs) -> anyhow::Result<()> {
    let lof = if args.lof { Some(lof_config(&args.lof_flags)?) } else { None };
    let cfg = pipeline(&args.filtration, args.normalize, lof)?;
    let mut cloud = read_cloud(&args.input)?;
    if let Some(meta) = meta_of(&args.meta) {
        cloud = cloud.with_meta(meta);
    }
    let result = neurotopo::experiments::cloud_diagram(&cloud, &cfg)?;
    if result.removed > 0 {
        info!("LOF removed {} of {} points", result.removed, cloud.len());
    }
    if let Some(path) = &args.dump_filtration {
        // rebuild on the points that entered the pipeline's filtration
        let mut kept = if cfg.normalize { normalize_cloud(&cloud)? } else { cloud.clone() };
        if let Some(l) = cfg.lof {
            kept = filter_outliers(&kept, l.k, l.threshold)?.0;
        }
        let f = build_filtration(&distance_matrix(&kept), &cfg.filtration)?;
        emit(Some(path), f.to_debug_csv().as_bytes())?;
    }
    emit(args.out.as_deref(), result.diagram.to_csv().as_bytes())
}

fn betti(args: BettiArgs) -> anyhow::Result<()> {
    let cfg = filtration_config(&args.filtration)?;
    let mut cloud = read_cloud(&args.input)?;
    if args.normalize {
        cloud = normalize_cloud(&cloud)?;
    }
    let engine = EngineRegistry::default().get(&args.filtration.engine)?;
    let f = build_filtration(&distance_matrix(&cloud), &cfg)?;
    let pairs = engine.compute(&f)?;
    let betti = betti_from_pairs(&pairs, f.max_dim(), args.epsilon, f.threshold())?;
    let mut out = String::from("dim,betti\n");
    for (k, b) in betti.iter().enumerate() {
        out.push_str(&format!("{k},{b}\n"));
    }
    emit(args.out.as_deref(), out.as_bytes())
}

fn bottleneck(args: BottleneckArgs) -> anyhow::Result<()> {
    let a = load_diagram(&args.a)?;
    let b = load_diagram(&args.b)?;
    let d = bottleneck_distance(&a, &b, args.dim)?;
    emit(args.out.as_deref(), format!("{d}\n").as_bytes())
}

fn label_for(d: &PersistenceDiagram, path: &Path) -> String {
    d.label().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    })
}

fn distmat(args: DistmatArgs) -> anyhow::Result<()> {
    let diagrams = args
        .diagrams
        .iter()
        .map(|p| {
            let d = load_diagram(p)?;
            Ok((label_for(&d, p), d))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let m = pairwise_distances(&diagrams, args.dim)?;
    emit(args.out.as_deref(), m.to_csv().as_bytes())
}

fn stats(args: StatsArgs) -> anyhow::Result<()> {
    let records = args
        .diagrams
        .iter()
        .map(|p| {
            let d = load_diagram(p)?;
            let mut s = diagram_stats(&d);
            if s.meta.is_none() {
                s.meta = Some(SourceMeta::new("", "", label_for(&d, p)));
            }
            Ok(s)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    if let Some(q) = &args.quantiles {
        emit(Some(q), quantiles_to_csv(&quantile_summary(&records)?).as_bytes())?;
    }
    emit(args.out.as_deref(), stats_to_csv(&records).as_bytes())
}

fn lof(args: LofArgs) -> anyhow::Result<()> {
    if args.threshold.is_nan() {
        return Err(usage("--threshold must be a number"));
    }
    let mut cloud = read_cloud(&args.input)?;
    if args.normalize {
        cloud = normalize_cloud(&cloud)?;
    }
    let report = lof_scores(&distance_matrix(&cloud), args.k)?.with_threshold(args.threshold);
    info!("{} of {} points flagged", report.flagged.len(), cloud.len());
    if let Some(path) = &args.filtered {
        let kept = cloud.select(&report.kept())?;
        let mut out = String::new();
        for row in kept.rows() {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        emit(Some(path), out.as_bytes())?;
    }
    emit(args.out.as_deref(), report.to_csv().as_bytes())
}

fn embed(args: EmbedArgs) -> anyhow::Result<()> {
    let m = neurotopo::bottleneck::load_distance_matrix(&args.matrix)?;
    let e = EmbedderRegistry::default().get(&args.embedder)?.embed(&m)?;
    info!("embedding stress {}", e.stress);
    emit(args.out.as_deref(), e.to_csv().as_bytes())
}

fn artifact_path(out: &Path, suffix: &str) -> PathBuf {
    if suffix.is_empty() {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

fn experiment(args: ExperimentArgs) -> anyhow::Result<()> {
    let mut registry = ExperimentRegistry::default();
    registry.register(Arc::new(ClassMatrixExperiment {
        embedder: EmbedderRegistry::default().get(&args.embedder)?,
    }));
    let exp = registry.get(&args.name)?;
    let lof = lof_config(&args.lof_flags)?;
    let cfg = pipeline(&args.filtration, !args.no_normalize, args.lof.then_some(lof))?;
    let dims = if args.dims.is_empty() {
        (0..=cfg.filtration.max_dim).collect()
    } else {
        args.dims.clone()
    };
    let sizes = args.sizes.as_deref().map(parse_sizes).transpose()?.unwrap_or_default();
    let input = args
        .input
        .as_ref()
        .map(|p| read_cloud(&InputArgs { input: p.clone(), header: args.header }))
        .transpose()?;
    let set = args
        .manifest
        .as_ref()
        .map(|m| {
            let mut s = CloudSet::load(m)?;
            s.csv_options = CsvOptions { header: args.header };
            Ok::<_, Error>(s)
        })
        .transpose()?;
    let req = ExperimentRequest {
        input,
        set,
        pipeline: cfg,
        sizes,
        seed: args.seed,
        dims,
        lof,
        pair_budget: (args.pair_budget > 0).then_some(args.pair_budget),
        layer_order: args.layers.clone(),
        layer: args.layer.clone(),
    };
    info!("running experiment {}", exp.name());
    let artifacts = exp.run(&req)?;
    match &args.out {
        Some(out) => {
            for a in &artifacts {
                emit(Some(&artifact_path(out, &a.suffix)), a.contents.as_bytes())?;
            }
        }
        None => emit(None, artifacts[0].contents.as_bytes())?,
    }
    Ok(())
}

fn plot(args: PlotArgs) -> anyhow::Result<()> {
    let title = args.title.clone().unwrap_or_else(|| {
        args.input
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("cannot read {}", args.input.display()))?;
    let svg = match args.kind {
        PlotKind::Diagram => diagram_svg(&PersistenceDiagram::from_csv(&text, &args.input)?, &title),
        PlotKind::Boxplot => boxplot_svg(&parse_quantile_csv(&text, &args.input)?, &args.stat, args.dim)?,
        PlotKind::Embedding => embedding_svg(&parse_embedding_csv(&text, &args.input)?, &args.group_sep, &title),
    };
    emit(args.out.as_deref(), svg.as_bytes())
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Persist(a) => persist(a),
        Command::Betti(a) => betti(a),
        Command::Bottleneck(a) => bottleneck(a),
        Command::Distmat(a) => distmat(a),
        Command::Stats(a) => stats(a),
        Command::Lof(a) => lof(a),
        Command::Embed(a) => embed(a),
        Command::Experiment(a) => experiment(a),
        Command::Plot(a) => plot(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Usage(_)) | Some(Error::UnknownStrategy { .. }) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    let result = (|| -> anyhow::Result<()> {
        if cli.jobs == Some(0) {
            bail!(Error::Usage("--jobs must be at least 1".into()));
        }
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.jobs {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().context("cannot start the worker pool")?;
        pool.install(|| run(cli.command))
    })();

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", error_message(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The context chain joined by ": ", skipping causes already spelled out by an outer message.
fn error_message(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
    }
    msg
}
