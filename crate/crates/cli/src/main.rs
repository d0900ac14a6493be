use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use kpam_core::gradcheck::run_gradcheck;
use kpam_core::harness::{records_to_csv, summary_to_markdown, SuccessPredicate};
use kpam_core::integral::{parse_intrinsics, read_heatmap};
use kpam_core::scenes::{parse_scenes, serialize_scenes};
use kpam_core::taskspec::{parse_observation, KeypointObservation};
use kpam_core::{
    apply_approach_offset, baseline, generate_scenes, instantiate_problem, parse_task_spec, run_benchmark, shipped,
    solve, summarize, Benchmark, CategoryModel, KeypointSet, KpamError, Method, PoseDistribution, RigidTransform,
    SolveResult, SolverConfig,
};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

/// Keypoint-based pick-and-place planning.
#[derive(Parser, Debug)]
#[command(name = "kpam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a task for one set of observed keypoints.
    Solve {
        /// Task specification (JSON)
        #[arg(long)]
        spec: PathBuf,
        /// Keypoint observation, or a bare list of {name, xyz}
        #[arg(long)]
        keypoints: PathBuf,
        /// Seed for the multistart orientations
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic category instances.
    Gen {
        /// mug or shoe
        #[arg(long)]
        category: String,
        #[arg(long)]
        count: usize,
        /// Standard deviation of keypoint noise in meters
        #[arg(long)]
        noise_sigma: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// identity, upright, side_lying, mixed or uniform
        #[arg(long, default_value = "mixed")]
        pose: String,
    },
    /// Evaluate planning methods on a scene file.
    Eval {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Comma-separated: kpam, pose_baseline
        #[arg(long, value_delimiter = ',', default_value = "kpam,pose_baseline")]
        methods: Vec<String>,
        #[arg(long)]
        out_csv: PathBuf,
        /// Template for the pose baseline; defaults to the shipped template
        /// with the spec's name
        #[arg(long)]
        template: Option<PathBuf>,
        /// JSON list of success predicates replacing the defaults
        #[arg(long)]
        predicates: Option<PathBuf>,
        /// Also write Markdown summary tables
        #[arg(long)]
        markdown: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Turn heatmaps and depth maps into camera-frame keypoints.
    DetectSim {
        /// Heatmap file (KPHM binary or JSON)
        #[arg(long)]
        heatmap: PathBuf,
        /// Camera intrinsics (JSON with fx, fy, cx, cy)
        #[arg(long)]
        intrinsics: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated keypoint names, one per heatmap channel
        #[arg(long, value_delimiter = ',')]
        names: Option<Vec<String>>,
        #[arg(long, default_value = "unknown")]
        category: String,
        #[arg(long, default_value = "detected")]
        object_id: String,
    },
    /// Compare analytic term Jacobians with finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Validation(String),
    NotConverged,
}

impl From<KpamError> for Failure {
    fn from(e: KpamError) -> Self {
        match e {
            KpamError::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable output");
    out.push(b'\n');
    out
}

fn read_keypoints(bytes: &[u8]) -> CliResult<KeypointSet> {
    match parse_observation(bytes) {
        Ok(obs) => Ok(obs.keypoints),
        Err(first) => serde_json::from_slice::<KeypointSet>(bytes).map_err(|_| first.into()),
    }
}

#[derive(Serialize)]
struct SolveOutput {
    #[serde(flatten)]
    result: SolveResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    approach_transform: Option<RigidTransform>,
}

fn cmd_solve(spec: &Path, keypoints: &Path, seed: u64, out: Option<&Path>) -> CliResult {
    let spec = parse_task_spec(&read(spec)?)?;
    let kp = read_keypoints(&read(keypoints)?)?;
    let problem = instantiate_problem(&spec, &kp)?;
    let result = solve(&problem, &SolverConfig::default().with_seed(seed))?;
    let approach_transform = match &spec.approach {
        Some(a) => Some(apply_approach_offset(&result.transform, &a.direction, a.distance)?),
        None => None,
    };
    let converged = result.converged;
    let bytes = to_json(&SolveOutput { result, approach_transform });
    match out {
        Some(p) => write(p, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    if converged {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}

fn cmd_gen(category: &str, count: usize, sigma: f64, seed: u64, out: &Path, pose: &str) -> CliResult {
    let model = CategoryModel::builtin(category)?;
    let dist: PoseDistribution = pose.parse()?;
    let scenes = generate_scenes(&model, dist, sigma, seed, count)?;
    write(out, &serialize_scenes(&scenes))
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    scenes: &Path,
    spec: &Path,
    methods: &[String],
    out_csv: &Path,
    template: Option<&Path>,
    predicates: Option<&Path>,
    markdown: Option<&Path>,
    seed: u64,
) -> CliResult {
    let methods = methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>()?;
    let scenes = parse_scenes(&read(scenes)?)?;
    let spec = parse_task_spec(&read(spec)?)?;
    let template = match template {
        Some(p) => Some(baseline::parse_template(&read(p)?)?),
        None if methods.contains(&Method::PoseBaseline) => Some(shipped::template(&spec.name).map_err(|_| {
            Failure::Validation(format!("pose_baseline needs --template (no shipped template for '{}')", spec.name))
        })?),
        None => None,
    };
    let mut bench = Benchmark::new(spec, template);
    bench.config = bench.config.with_seed(seed);
    if let Some(p) = predicates {
        bench.predicates = serde_json::from_slice::<Vec<SuccessPredicate>>(&read(p)?)
            .map_err(|e| Failure::Validation(format!("predicates: {e}")))?;
    }
    let records = run_benchmark(&scenes, &bench, &methods)?;
    write(out_csv, records_to_csv(&records)?.as_bytes())?;
    if let Some(p) = markdown {
        write(p, summary_to_markdown(&summarize(&records)?).as_bytes())?;
    }
    Ok(())
}

fn cmd_detect(
    heatmap: &Path,
    intrinsics: &Path,
    out: &Path,
    names: Option<Vec<String>>,
    category: &str,
    object_id: &str,
) -> CliResult {
    let hm = read_heatmap(&read(heatmap)?)?;
    let intrinsics = parse_intrinsics(&read(intrinsics)?)?;
    let points = kpam_core::detect(&hm, &intrinsics)?;
    let names = names.unwrap_or_else(|| (0..points.len()).map(|i| format!("kp{i}")).collect());
    if names.len() != points.len() {
        return Err(Failure::Validation(format!("{} names for {} heatmap channels", names.len(), points.len())));
    }
    let keypoints = KeypointSet::new(names, points)?;
    let obs = KeypointObservation { object_id: object_id.to_string(), category: category.to_string(), keypoints };
    write(out, &kpam_core::taskspec::serialize_observation(&obs))
}

fn cmd_gradcheck(trials: usize, seed: u64) -> CliResult {
    let reports = run_gradcheck(trials, seed)?;
    let mut all = true;
    for r in &reports {
        println!(
            "{:<16} {:>5} trials  max rel err {:.3e}  {}",
            r.variant,
            r.trials,
            r.max_relative_error,
            if r.passed { "PASS" } else { "FAIL" }
        );
        all &= r.passed;
    }
    if all {
        Ok(())
    } else {
        Err(Failure::Validation("gradient check failed".into()))
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Solve { spec, keypoints, seed, out } => cmd_solve(&spec, &keypoints, seed, out.as_deref()),
        Command::Gen { category, count, noise_sigma, seed, out, pose } => {
            cmd_gen(&category, count, noise_sigma, seed, &out, &pose)
        }
        Command::Eval { scenes, spec, methods, out_csv, template, predicates, markdown, seed } => cmd_eval(
            &scenes,
            &spec,
            &methods,
            &out_csv,
            template.as_deref(),
            predicates.as_deref(),
            markdown.as_deref(),
            seed,
        ),
        Command::DetectSim { heatmap, intrinsics, out, names, category, object_id } => {
            cmd_detect(&heatmap, &intrinsics, &out, names, &category, &object_id)
        }
        Command::Gradcheck { trials, seed } => cmd_gradcheck(trials, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::NotConverged) => {
            eprintln!("error: solver did not reach a feasible solution");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
    }
}
