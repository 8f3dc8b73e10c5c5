use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use delaylab::dimension::{
    box_counting_dimension, correlation_dimension, hausdorff_proxies, information_dimension, local_dimension,
    DimensionEstimate, ScaleLadder,
};
use delaylab::harness::{self, default_config, run_scenario, summary_text, ScenarioConfig, ScenarioId};
use delaylab::observables::{probe_basis, sample_alpha, BaseObservable, DelayMap, Observable, Probes};
use delaylab::prediction::{
    aggregate_verdict, default_epsilon_ladder, delta_ladder, exceedance_scan, predictability_verdict, scaling_exponent,
    EmbeddedCloud, EpsilonLadderOptions, ExceedanceCurve, ScalingFit, ScanOptions, Verdict, VerdictRule,
};
use delaylab::slices::{geometric_slice, image_slice_spread, slice_dimension, SliceSidecar};
use delaylab::systems::{SampleOptions, SampledMeasure, SystemSpec};
use delaylab::LabError;

const EXIT_DATA: u8 = 3;
const EXIT_SCENARIO_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "delaylab", version, about = "Delay-coordinate reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a point cloud from a system's invariant measure.
    Sample(SampleArgs),
    /// Delay-embed a point cloud into (φ(x), φ(Tx)) pairs.
    Embed(EmbedArgs),
    /// Exceedance curves of the prediction error over an ε ladder.
    SigmaScan(ScanArgs),
    /// Dimension estimate of a point cloud.
    Dim(DimArgs),
    /// Phase points whose delay vectors fall in a ball.
    Slice(SliceArgs),
    /// Run registered scenarios and report pass or fail.
    Verify(VerifyArgs),
    /// Summarize stored scenario results.
    Report(ReportArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// System tag: solenoid, solenoid_single, corner_cantor:<λ>, tent, identity:<d>, union_chain:<λ1>:<λ2>.
    #[arg(long)]
    system: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = delaylab::systems::DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Coding depth for IFS samplers.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Cloud CSV written by `sample`.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    /// Base observable: zero, cos_angle or coord_<i>.
    #[arg(long, default_value = "zero")]
    observable: String,
    /// Draw the perturbation α from this seed; no perturbation when absent.
    #[arg(long)]
    alpha_seed: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    alpha_radius: f64,
    /// Probe polynomial degree (default 2k+1).
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Pairs CSV written by `embed`.
    #[arg(long, short)]
    input: PathBuf,
    /// Comma-separated δ values; defaults to a ladder scaled to the image spread.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Comma-separated ε values; defaults to a ladder scaled to the data.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10_000)]
    max_queries: usize,
    /// Directory for per-δ curve CSV files.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DimMethod {
    Correlation,
    Box,
    Local,
    Information,
    Proxies,
}

#[derive(Args)]
struct DimArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "correlation")]
    method: DimMethod,
    /// Cloud row for the local method.
    #[arg(long, default_value_t = 0)]
    point: usize,
    /// Sampled centers for the information and proxies methods.
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated scales; defaults to a ladder derived from the cloud.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
}

#[derive(Args)]
struct SliceArgs {
    /// Pairs CSV written by `embed` (must carry phase points).
    #[arg(long, short)]
    input: PathBuf,
    /// Center the ball on this pair's delay vector.
    #[arg(long, conflicts_with = "y")]
    center: Option<usize>,
    /// Explicit ball center, comma-separated.
    #[arg(long, value_delimiter = ',')]
    y: Option<Vec<f64>>,
    #[arg(long)]
    delta: f64,
    /// Also estimate the slice's correlation dimension after this many steps of T.
    #[arg(long)]
    iterate: Option<usize>,
    /// Slice members as CSV.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Scenario ids, comma-separated, or `all`.
    #[arg(long, default_value = "all", conflicts_with = "config")]
    scenario: String,
    /// Scenario configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parent directory for artifacts; each scenario writes to `<out>/<id>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the pair count of default configurations.
    #[arg(long)]
    n_pairs: Option<usize>,
    /// Write the default configuration of the scenario instead of running it.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding `result.json` files directly or one level down.
    #[arg(long, short)]
    results: PathBuf,
    /// Where to write `summary.tsv` and `plot/`; defaults to the results directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

enum Failure {
    Data(String),
    ScenarioFailed(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sample(a) => sample_cmd(a),
        Command::Embed(a) => embed_cmd(a),
        Command::SigmaScan(a) => scan_cmd(a),
        Command::Dim(a) => dim_cmd(a),
        Command::Slice(a) => slice_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Report(a) => report_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::ScenarioFailed(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_SCENARIO_FAILED)
        }
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn read_cloud(path: &Path) -> Result<SampledMeasure, Failure> {
    SampledMeasure::read_csv(open(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn read_pairs(path: &Path) -> Result<EmbeddedCloud, Failure> {
    EmbeddedCloud::read_csv(open(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn sample_cmd(a: SampleArgs) -> CliResult {
    let system = SystemSpec::from_tag(&a.system)?.build()?;
    let cloud = system.sample(a.n, a.seed, SampleOptions { burn_in: a.burn_in, depth: a.depth })?;
    let mut w = output(a.out.as_deref())?;
    cloud.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn embed_cmd(a: EmbedArgs) -> CliResult {
    let cloud = read_cloud(&a.input)?;
    let system = SystemSpec::from_tag(&cloud.system)?.build()?;
    if cloud.dim() != system.dim() {
        return Err(LabError::DimensionMismatch { expected: system.dim(), got: cloud.dim() }.into());
    }
    let base = BaseObservable::parse(&a.observable)?;
    if let BaseObservable::Coord(i) = base {
        if i >= system.dim() {
            return Err(Failure::Data(format!("coord_{i} out of range")));
        }
    }
    let probes = Probes::for_system(probe_basis(system.dim(), a.k, a.degree)?, &system)?;
    let mut h = Observable::new(base, probes);
    if let Some(seed) = a.alpha_seed {
        h = h.perturb(&sample_alpha(h.alpha().len(), a.alpha_radius, seed)?)?;
    }
    let dm = DelayMap::new(h, a.k, system)?;
    let pairs = EmbeddedCloud::embed(&cloud, &dm)?;
    let mut w = output(a.out.as_deref())?;
    pairs.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ScanOutput {
    n_pairs: usize,
    k: usize,
    verdict_rule: VerdictRule,
    verdict: Verdict,
    verdicts: Vec<Verdict>,
    fits: Vec<ScalingFit>,
    curves: Vec<ExceedanceCurve>,
}

fn scan_cmd(a: ScanArgs) -> CliResult {
    let pairs = read_pairs(&a.input)?;
    let ladder = match a.epsilons {
        Some(e) => ScaleLadder::new(e)?,
        None => default_epsilon_ladder(&pairs, EpsilonLadderOptions::default())?,
    };
    let deltas = a.deltas.unwrap_or_else(|| delta_ladder(&pairs));
    let curves = exceedance_scan(&pairs, &deltas, &ladder, ScanOptions { max_queries: a.max_queries })?;
    let rule = VerdictRule::default();
    let verdicts: Vec<Verdict> = curves.iter().map(|c| predictability_verdict(c, rule)).collect();
    if let Some(dir) = &a.curves {
        std::fs::create_dir_all(dir)?;
        for (j, c) in curves.iter().enumerate() {
            std::fs::write(dir.join(format!("curve_d{j}.csv")), c.to_csv())?;
        }
    }
    print_json(&ScanOutput {
        n_pairs: pairs.len(),
        k: pairs.k(),
        verdict_rule: rule,
        verdict: aggregate_verdict(&verdicts),
        fits: curves.iter().map(scaling_exponent).collect(),
        verdicts,
        curves,
    })
}

fn dim_cmd(a: DimArgs) -> CliResult {
    let cloud = read_cloud(&a.input)?;
    let ladder = a.scales.map(ScaleLadder::new).transpose()?;
    let est: DimensionEstimate = match a.method {
        DimMethod::Correlation => correlation_dimension(&cloud, ladder.as_ref())?,
        DimMethod::Box => box_counting_dimension(&cloud, ladder.as_ref())?,
        DimMethod::Information => information_dimension(&cloud, ladder.as_ref(), a.samples, a.seed)?,
        DimMethod::Local => {
            if a.point >= cloud.len() {
                return Err(Failure::Data(format!("point {} out of range for {} rows", a.point, cloud.len())));
            }
            local_dimension(&cloud, cloud.point(a.point), ladder.as_ref())?
        }
        DimMethod::Proxies => {
            let p = hausdorff_proxies(&cloud, ladder.as_ref(), a.samples, 0.05, 0.95, a.seed)?;
            return print_json(&p);
        }
    };
    print_json(&est)
}

#[derive(Serialize)]
struct SliceOutput {
    #[serde(flatten)]
    sidecar: SliceSidecar,
    image_spread: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    dimension: Option<DimensionEstimate>,
}

fn slice_cmd(a: SliceArgs) -> CliResult {
    let pairs = read_pairs(&a.input)?;
    let y = match (a.center, a.y) {
        (Some(i), _) if i < pairs.len() => pairs.u(i).to_vec(),
        (Some(i), _) => return Err(Failure::Data(format!("center {i} out of range for {} pairs", pairs.len()))),
        (None, Some(y)) => y,
        (None, None) => return Err(Failure::Data("give --center or --y".into())),
    };
    let slice = geometric_slice(&pairs, &y, a.delta)?;
    let dimension = match a.iterate {
        Some(n) => {
            let phase = pairs.phase().ok_or_else(|| Failure::Data("pairs file has no phase points".into()))?;
            let system = SystemSpec::from_tag(&phase.system)?.build()?;
            Some(slice_dimension(&slice, &system, phase, n)?)
        }
        None => None,
    };
    if let Some(p) = &a.out {
        let mut w = output(Some(p))?;
        slice.write_csv(&mut w)?;
        w.flush()?;
    }
    print_json(&SliceOutput { sidecar: slice.sidecar(), image_spread: image_slice_spread(&slice), dimension })
}

fn verify_cmd(a: VerifyArgs) -> CliResult {
    let configs: Vec<ScenarioConfig> = match &a.config {
        Some(p) => vec![ScenarioConfig::from_json(&std::fs::read_to_string(p)?)?],
        None => {
            let ids: Vec<ScenarioId> = if a.scenario == "all" {
                ScenarioId::ALL.to_vec()
            } else {
                a.scenario
                    .split(',')
                    .map(|s| s.trim().parse::<ScenarioId>())
                    .collect::<Result<_, _>>()?
            };
            ids.into_iter()
                .map(|id| {
                    let mut c = default_config(id);
                    if let Some(n) = a.n_pairs {
                        c.n_pairs = n;
                    }
                    c
                })
                .collect()
        }
    };
    if a.print_config {
        for c in &configs {
            println!("{}", c.to_json());
        }
        return Ok(());
    }
    let mut failed = Vec::new();
    for mut cfg in configs {
        if let Some(out) = &a.out {
            cfg.output_dir = Some(out.join(cfg.id.to_string()));
        }
        let result = run_scenario(&cfg)?;
        print!("{}", summary_text(&result));
        if !result.passed {
            failed.push(result.id.to_string());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::ScenarioFailed(format!("failed scenarios: {}", failed.join(", "))))
    }
}

fn report_cmd(a: ReportArgs) -> CliResult {
    let out = a.out.unwrap_or_else(|| a.results.clone());
    let report = harness::report(&a.results, &out)?;
    print!("{}", report.table());
    Ok(())
}
