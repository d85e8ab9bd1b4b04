//! Command-line front end: `train`, `predict`, `verify` and `bench`.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 input error,
//! 3 the solver did not converge (outputs are still written).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::{GramStorage, KernelExpansion, RkbsModel, TrainingSet};
use crate::kernels::{canonical_pair_check, SpectralKernel};
use crate::oracle::quadrature::{quad_evaluate, quad_phi, quad_reproduction, QuadratureGrid};
use crate::oracle::{finite_difference_gradient, Verdict};
use crate::solver::{
    classify, fixed_point_solve, gradient_norm, predict, InitStrategy, LossSpec, Mode, Problem, RegularizerSpec,
    Solution, SolverConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "RKBS_SVM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "rkbs-svm",
    version,
    about = "Support vector machines in Matérn reproducing kernel Banach spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV data set and write the model document.
    Train(TrainArgs),
    /// Evaluate a saved model at the points of a CSV file.
    Predict(PredictArgs),
    /// Run the oracle suite on a synthetic one-dimensional instance.
    Verify(VerifyArgs),
    /// Compare p = 2 and p = 4 classifiers on a synthetic two-class problem.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub seed_override: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Optional JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed_override: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed_override: Option<u64>,
}

/// Shape of the regularizer in a [`RunConfig`]; its weight is the top-level `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegularizerKind {
    LambdaTSquared,
    LambdaTPower { power: f64 },
}

/// Optional settings of `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Number of synthetic data points.
    pub points: usize,
    /// Number of random query points for the quadrature checks.
    pub queries: usize,
    /// Absolute tolerance of the quadrature checks, relative to `1 + |value|`.
    pub tolerance: f64,
    /// Tolerance of the kernel inverse-transform check.
    pub kernel_tolerance: f64,
    /// Relative tolerance of the finite-difference gradient check.
    pub gradient_tolerance: f64,
    /// Largest admissible objective decrease from one extra center.
    pub representer_tolerance: f64,
    /// Fixed grid replacing the automatically sized ones.
    pub grid: Option<GridOverride>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            points: 3,
            queries: 5,
            tolerance: 1e-4,
            kernel_tolerance: 1e-6,
            gradient_tolerance: 1e-5,
            representer_tolerance: 1e-6,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOverride {
    pub half_width: f64,
    pub nodes: usize,
}

/// Settings of `bench`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub train_size: usize,
    pub test_size: usize,
    /// Distance between the two class means.
    pub separation: f64,
}

/// The run configuration document. Apart from the optional sections every
/// field is required; the solver section falls back to [`SolverConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub p: usize,
    pub theta: f64,
    pub n: f64,
    pub loss: LossSpec,
    pub lambda: f64,
    pub regularizer: RegularizerKind,
    pub seed: u64,
    pub real_mode: bool,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
    #[serde(default)]
    pub bench: Option<BenchConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.solver.seed = config.seed;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.solver.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || !self.p.is_multiple_of(2) {
            return Err(Error::Config(format!("p must be an even integer >= 2, got {}", self.p)));
        }
        SpectralKernel::new(self.theta, self.n, 1)?;
        self.regularizer_spec().validate()?;
        self.solver.validate()?;
        if let Some(v) = &self.verify {
            if v.points == 0 || v.queries == 0 {
                return Err(Error::Config("verify needs at least one point and one query".into()));
            }
            for t in [
                v.tolerance,
                v.kernel_tolerance,
                v.gradient_tolerance,
                v.representer_tolerance,
            ] {
                if !(t > 0.0) {
                    return Err(Error::Config(format!("verify tolerances must be positive, got {t}")));
                }
            }
        }
        Ok(())
    }

    pub fn regularizer_spec(&self) -> RegularizerSpec {
        match self.regularizer {
            RegularizerKind::LambdaTSquared => RegularizerSpec::LambdaTSquared { lambda: self.lambda },
            RegularizerKind::LambdaTPower { power } => RegularizerSpec::LambdaTPower {
                lambda: self.lambda,
                power,
            },
        }
    }

    pub fn kernel(&self, dim: usize) -> Result<SpectralKernel> {
        let kernel = SpectralKernel::new(self.theta, self.n, dim)?;
        kernel.check_exponent(self.p as f64)?;
        Ok(kernel)
    }
}

/// Rows of a numeric CSV file. A first row that does not parse as numbers
/// is taken to be a header.
pub fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Data(format!("row {} has a non-finite value", i + 1)));
                }
                rows.push(row);
            }
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Data(format!("row {}: {e}", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{} contains no data rows", path.display())));
    }
    let width = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Data(format!(
            "row {} has {} columns, expected {width}",
            i + 1,
            rows[i].len()
        )));
    }
    Ok(rows)
}

/// Features followed by one label column.
pub fn read_training_csv(path: &Path) -> Result<TrainingSet> {
    let rows = read_csv(path)?;
    if rows[0].len() < 2 {
        return Err(Error::Data(
            "training data needs at least one feature column and a label column".into(),
        ));
    }
    let (points, labels): (Vec<Vec<f64>>, Vec<f64>) = rows
        .into_iter()
        .map(|mut r| {
            let y = r.pop().expect("nonempty row");
            (r, y)
        })
        .unzip();
    TrainingSet::from_real(points, &labels)
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(contents.as_bytes())?;
    Ok(())
}

/// Solves and returns the solution along with whether it converged.
fn solve(problem: &Problem, config: &SolverConfig) -> Result<(Solution, bool)> {
    match fixed_point_solve(problem, config) {
        Ok(s) => Ok((s, true)),
        Err(Error::NonConvergence { reason, best }) => {
            eprintln!("warning: {reason}");
            Ok((*best, false))
        }
        Err(e) => Err(e),
    }
}

pub fn train(config: &RunConfig, data: &TrainingSet) -> Result<(RkbsModel, Solution, bool)> {
    let kernel = config.kernel(data.dim())?;
    let problem = Problem::from_data(
        config.p,
        kernel,
        data,
        config.loss,
        config.regularizer_spec(),
        config.real_mode,
        GramStorage::default(),
    )?;
    let (solution, converged) = solve(&problem, &config.solver)?;
    let model = RkbsModel::new(problem.expansion().clone(), solution.coefficients.clone())?.with_converged(converged);
    Ok((model, solution, converged))
}

fn cmd_train(args: &TrainArgs) -> Result<i32> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed_override {
        config = config.with_seed(seed);
    }
    let data = read_training_csv(&args.data)?;
    let (model, solution, converged) = train(&config, &data)?;
    write_atomic(&args.model, &(model.to_json()? + "\n"))?;
    println!("objective      {:.12e}", solution.objective);
    println!("gradient_norm  {:.3e}", solution.diagnostics.gradient_norm);
    println!("iterations     {}", solution.diagnostics.iterations);
    println!("rkbs_norm      {:.12e}", model.rkbs_norm()?);
    println!("mode           {:?}", solution.diagnostics.mode);
    println!("converged      {converged}");
    Ok(if converged { EXIT_OK } else { EXIT_NONCONVERGENCE })
}

fn cmd_predict(args: &PredictArgs) -> Result<i32> {
    let text = fs::read_to_string(&args.model)
        .map_err(|e| Error::Data(format!("cannot read model {}: {e}", args.model.display())))?;
    let model = RkbsModel::from_json(&text)?;
    let d = model.kernel().dim();
    let rows = read_csv(&args.data)?;
    let width = rows[0].len();
    if width != d && width != d + 1 {
        return Err(Error::Data(format!(
            "model expects {d} feature columns, data has {width}"
        )));
    }
    let xs: Vec<Vec<f64>> = rows.into_iter().map(|r| r[..d].to_vec()).collect();
    let values = predict(&model, &xs)?;
    let labels = classify(&values);
    let mut writer = csv::Writer::from_path(&args.out)?;
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.extend(["re".into(), "im".into(), "class".into()]);
    writer.write_record(&header)?;
    for ((x, v), l) in xs.iter().zip(&values).zip(&labels) {
        let mut record: Vec<String> = x.iter().map(|a| a.to_string()).collect();
        record.extend([v.re.to_string(), v.im.to_string(), l.to_string()]);
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(EXIT_OK)
}

/// One line of the `verify` report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub verdict: Verdict,
    pub discrepancy: f64,
    pub refinement_delta: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub solver_converged: bool,
    pub checks: Vec<CheckReport>,
}

impl VerifyReport {
    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.verdict == Verdict::Fail)
    }

    pub fn inconclusive(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| c.verdict == Verdict::Inconclusive)
    }
}

/// Well separated points in `[−2, 2]` with targets suited to the loss.
fn synthetic_line(count: usize, loss: LossSpec, rng: &mut ChaCha8Rng) -> Result<TrainingSet> {
    let spacing = 4.0 / count as f64;
    let points: Vec<Vec<f64>> = (0..count)
        .map(|k| vec![-2.0 + spacing * (k as f64 + 0.5 + rng.gen_range(-0.25..0.25))])
        .collect();
    let labels: Vec<f64> = (0..count)
        .map(|_| {
            if loss.needs_labels() {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            } else {
                rng.gen_range(-1.0..1.0)
            }
        })
        .collect();
    TrainingSet::from_real(points, &labels)
}

fn grid_or(
    override_grid: Option<GridOverride>,
    automatic: impl FnOnce() -> Result<QuadratureGrid>,
) -> Result<QuadratureGrid> {
    match override_grid {
        Some(g) => QuadratureGrid::new(g.half_width, g.nodes),
        None => automatic(),
    }
}

/// Runs the oracle suite on a seeded one-dimensional instance.
pub fn verify(config: &RunConfig) -> Result<VerifyReport> {
    let vc = config.verify.clone().unwrap_or_default();
    let kernel = config.kernel(1)?;
    let p = config.p;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let data = synthetic_line(vc.points, config.loss, &mut rng)?;
    let reg = config.regularizer_spec();
    let problem = Problem::from_data(
        p,
        kernel,
        &data,
        config.loss,
        reg,
        config.real_mode,
        GramStorage::default(),
    )?;
    let (solution, converged) = solve(&problem, &config.solver)?;
    let model = RkbsModel::new(problem.expansion().clone(), solution.coefficients.clone())?;
    let centers: Vec<f64> = data.points().iter().map(|x| x[0]).collect();
    let c = solution.coefficients.entries().to_vec();
    let mut checks = Vec::new();

    // kernel closed form against its spectral density
    let xs = [0.5, 1.0, 2.0];
    let kgrid = grid_or(vc.grid, || {
        let grids: Vec<QuadratureGrid> = xs
            .iter()
            .map(|&x| QuadratureGrid::for_inverse_transform(config.theta, 2.0 * config.n, 1.0, x, vc.kernel_tolerance))
            .collect::<Result<_>>()?;
        let half = grids.iter().map(|g| g.half_width()).fold(0.0, f64::max);
        let step = grids.iter().map(|g| g.step()).fold(f64::INFINITY, f64::min);
        let intervals = (2.0 * half / step).ceil() as usize;
        QuadratureGrid::new(half, intervals + intervals % 2 + 1)
    })?;
    let pair = canonical_pair_check(&kernel, &kgrid, &xs, vc.kernel_tolerance)?;
    checks.push(CheckReport {
        name: "kernel_inverse_transform".into(),
        verdict: pair.verdict,
        discrepancy: pair.max_discrepancy,
        refinement_delta: pair.refinement_delta,
        tolerance: vc.kernel_tolerance,
    });

    // closed-form evaluation, φ and reproduction against spectral quadrature
    let queries: Vec<f64> = (0..vc.queries).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let mgrid = grid_or(vc.grid, || {
        QuadratureGrid::for_model(&kernel, p as f64, &centers, &c, 3.0, vc.tolerance)
    })?;
    let mut worst = (0.0f64, 0.0f64);
    for &x in &queries {
        let closed = model.evaluate(&[x])?;
        let q = quad_evaluate(&mgrid, &kernel, p as f64, &centers, &c, x)?;
        let scale = 1.0 + closed.norm();
        worst.0 = worst.0.max((q.value - closed).norm() / scale);
        worst.1 = worst.1.max(q.refinement_delta / scale);
    }
    checks.push(quad_report("evaluate_vs_quadrature", worst, vc.tolerance));

    let phi = model.phi()?;
    let mut worst = (0.0f64, 0.0f64);
    for (j, closed) in phi.iter().enumerate() {
        let q = quad_phi(&mgrid, &kernel, p as f64, &centers, &c, j)?;
        let scale = 1.0 + closed.norm();
        worst.0 = worst.0.max((q.value - closed).norm() / scale);
        worst.1 = worst.1.max(q.refinement_delta / scale);
    }
    checks.push(quad_report("phi_vs_quadrature", worst, vc.tolerance));

    let mut worst = (0.0f64, 0.0f64);
    for &x in &queries {
        let r = quad_reproduction(&mgrid, &model, x)?;
        let scale = 1.0 + r.evaluation.norm();
        worst.0 = worst.0.max(r.residual / scale);
        worst.1 = worst.1.max(r.refinement_delta / scale);
    }
    checks.push(quad_report("reproduction", worst, vc.tolerance));

    // analytic gradient against central differences at random coefficients
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let z: Vec<Complex64> = (0..data.len())
            .map(|_| {
                let im = if config.real_mode {
                    0.0
                } else {
                    rng.gen_range(-1.0..1.0)
                };
                Complex64::new(rng.gen_range(-1.0..1.0), im)
            })
            .collect();
        let analytic = problem.gradient(&z)?;
        let analytic: Vec<Complex64> = if config.real_mode {
            analytic.iter().map(|v| Complex64::new(v.re, 0.0)).collect()
        } else {
            analytic
        };
        let numeric =
            finite_difference_gradient(|c| problem.objective(c).unwrap_or(f64::NAN), &z, 1e-6, config.real_mode)?;
        let diff: Vec<Complex64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = gradient_norm(&diff) / gradient_norm(&analytic).max(1e-12);
        worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
    }
    checks.push(CheckReport {
        name: "gradient_vs_finite_differences".into(),
        verdict: Verdict::judge(worst, 0.0, vc.gradient_tolerance),
        discrepancy: worst,
        refinement_delta: 0.0,
        tolerance: vc.gradient_tolerance,
    });

    // one extra center off the data must not lower the optimum
    let extra = representer_gain(&problem, &solution, config, &mut rng)?;
    checks.push(CheckReport {
        name: "representer".into(),
        verdict: Verdict::judge(extra.max(0.0), 0.0, vc.representer_tolerance),
        discrepancy: extra,
        refinement_delta: 0.0,
        tolerance: vc.representer_tolerance,
    });

    Ok(VerifyReport {
        solver_converged: converged,
        checks,
    })
}

fn quad_report(name: &str, (discrepancy, delta): (f64, f64), tolerance: f64) -> CheckReport {
    CheckReport {
        name: name.into(),
        verdict: Verdict::judge(discrepancy, delta, tolerance),
        discrepancy,
        refinement_delta: delta,
        tolerance,
    }
}

/// Objective decrease obtained by adding one center away from the data and
/// re-optimizing over all coefficients, starting from the current optimum.
pub fn representer_gain(
    problem: &Problem,
    solution: &Solution,
    config: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let exp = problem.expansion();
    let mut centers = exp.centers().to_vec();
    let dim = exp.kernel().dim();
    let extra: Vec<f64> = loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.5..2.5)).collect();
        let far = centers
            .iter()
            .all(|c| c.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() > 0.2);
        if far {
            break x;
        }
    };
    centers.push(extra);
    let expansion = KernelExpansion::new(exp.p(), *exp.kernel(), centers, GramStorage::default())?;
    let augmented = Problem::new(
        expansion,
        problem.targets().to_vec(),
        problem.loss(),
        problem.regularizer(),
        solution.diagnostics.mode == Mode::Real,
    )?;
    let mut start = solution.coefficients.entries().to_vec();
    start.push(Complex64::new(0.0, 0.0));
    let solver = SolverConfig {
        init: InitStrategy::Given(start),
        ..config.solver.clone()
    };
    let (better, _) = solve(&augmented, &solver)?;
    Ok(solution.objective - better.objective)
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed_override {
        config = config.with_seed(seed);
    }
    let report = verify(&config)?;
    for c in &report.checks {
        println!(
            "{:<32} {:<13} discrepancy {:.3e}  refinement {:.3e}  tolerance {:.1e}",
            c.name,
            format!("{:?}", c.verdict).to_lowercase(),
            c.discrepancy,
            c.refinement_delta,
            c.tolerance
        );
    }
    let inconclusive: Vec<&str> = report.inconclusive().map(|c| c.name.as_str()).collect();
    if !inconclusive.is_empty() {
        eprintln!("warning: inconclusive (grid too coarse): {}", inconclusive.join(", "));
    }
    if !report.solver_converged {
        eprintln!("warning: the solver did not reach its gradient tolerance");
    }
    if let Some(out) = &args.out {
        write_atomic(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    Ok(if report.failed() { EXIT_CHECK_FAILED } else { EXIT_OK })
}

/// Per-exponent line of the bench report.
#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub p: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub dim: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub theta: f64,
    pub n: f64,
    pub loss: LossSpec,
    pub lambda: f64,
    pub results: Vec<BenchResult>,
    pub note: String,
}

/// Two Gaussian clouds in the plane with means `±(s/2√2)(1, 1)`.
pub fn two_class_sample(size: usize, separation: f64, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let shift = 0.5 * separation / std::f64::consts::SQRT_2;
    (0..size)
        .map(|_| {
            let y = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (vec![y * shift + a, y * shift + b], y)
        })
        .unzip()
}

fn accuracy(predicted: &[f64], labels: &[f64]) -> f64 {
    let hits = predicted.iter().zip(labels).filter(|(a, b)| a == b).count();
    hits as f64 / labels.len() as f64
}

pub fn bench(config: &RunConfig) -> Result<BenchReport> {
    let bc = config
        .bench
        .ok_or_else(|| Error::Config("bench needs a \"bench\" section".into()))?;
    if bc.train_size == 0 || bc.test_size == 0 {
        return Err(Error::Data(format!(
            "bench needs nonempty train and test sets, got N = {} and {}",
            bc.train_size, bc.test_size
        )));
    }
    if !(bc.separation >= 0.0) || !bc.separation.is_finite() {
        return Err(Error::Config(format!(
            "separation must be finite and nonnegative, got {}",
            bc.separation
        )));
    }
    let dim = 2;
    // both exponents are validated before any work
    for p in [2usize, 4] {
        SpectralKernel::new(config.theta, config.n, dim)?.check_exponent(p as f64)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (train_x, train_y) = two_class_sample(bc.train_size, bc.separation, &mut rng);
    let (test_x, test_y) = two_class_sample(bc.test_size, bc.separation, &mut rng);
    let data = TrainingSet::from_real(train_x.clone(), &train_y)?;
    let mut results = Vec::new();
    for p in [2usize, 4] {
        let run = RunConfig { p, ..config.clone() };
        let start = Instant::now();
        let (model, solution, converged) = train(&run, &data)?;
        let runtime_seconds = start.elapsed().as_secs_f64();
        results.push(BenchResult {
            p,
            train_accuracy: accuracy(&classify(&predict(&model, &train_x)?), &train_y),
            test_accuracy: accuracy(&classify(&predict(&model, &test_x)?), &test_y),
            objective: solution.objective,
            gradient_norm: solution.diagnostics.gradient_norm,
            iterations: solution.diagnostics.iterations,
            converged,
            runtime_seconds,
        });
    }
    Ok(BenchReport {
        seed: config.seed,
        dim,
        train_size: bc.train_size,
        test_size: bc.test_size,
        theta: config.theta,
        n: config.n,
        loss: config.loss,
        lambda: config.lambda,
        results,
        note: "accuracies are observations on one synthetic draw; no ordering between p = 2 and p = 4 is implied"
            .into(),
    })
}

fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed_override {
        config = config.with_seed(seed);
    }
    let report = bench(&config)?;
    write_atomic(&args.out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    for r in &report.results {
        println!(
            "p = {}  train accuracy {:.3}  test accuracy {:.3}  objective {:.6e}  {:.2}s{}",
            r.p,
            r.train_accuracy,
            r.test_accuracy,
            r.objective,
            r.runtime_seconds,
            if r.converged { "" } else { "  (not converged)" }
        );
    }
    Ok(if report.results.iter().all(|r| r.converged) {
        EXIT_OK
    } else {
        EXIT_NONCONVERGENCE
    })
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // a pool set up earlier in the process stays in effect
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = configure_threads().and_then(|()| match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
                _ => EXIT_INPUT,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_json() -> serde_json::Value {
        serde_json::json!({
            "p": 4, "theta": 1.0, "n": 2.0,
            "loss": {"kind": "squared"},
            "lambda": 0.1,
            "regularizer": {"kind": "lambda_t_squared"},
            "seed": 7, "real_mode": true
        })
    }

    #[test]
    fn config_round_trip_and_defaults() {
        let cfg = RunConfig::from_json(&base_json().to_string()).unwrap();
        assert_eq!(cfg.p, 4);
        assert_eq!(cfg.solver.seed, 7);
        assert_eq!(cfg.solver.max_iters, SolverConfig::default().max_iters);
        assert_eq!(cfg.regularizer_spec(), RegularizerSpec::LambdaTSquared { lambda: 0.1 });
        let again = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn config_rejections() {
        let mut v = base_json();
        v["extra"] = serde_json::json!(1);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
        let mut v = base_json();
        v.as_object_mut().unwrap().remove("seed");
        assert!(RunConfig::from_json(&v.to_string()).is_err());
        for (k, bad) in [
            ("p", serde_json::json!(3)),
            ("theta", serde_json::json!(-1.0)),
            ("lambda", serde_json::json!(0.0)),
        ] {
            let mut v = base_json();
            v[k] = bad;
            assert!(RunConfig::from_json(&v.to_string()).is_err(), "{k}");
        }
        let mut v = base_json();
        v["solver"] = serde_json::json!({"backtracking": 1.5});
        assert!(RunConfig::from_json(&v.to_string()).is_err());
        let mut v = base_json();
        v["regularizer"] = serde_json::json!({"kind": "lambda_t_power", "power": 0.5});
        assert!(RunConfig::from_json(&v.to_string()).is_err());
        assert!(RunConfig::from_json("{").is_err());
    }

    #[test]
    fn exponent_precondition_in_kernel() {
        let mut v = base_json();
        v["n"] = serde_json::json!(1.6);
        let cfg = RunConfig::from_json(&v.to_string()).unwrap();
        assert!(cfg.kernel(1).is_ok());
        let msg = cfg.kernel(2).unwrap_err().to_string();
        assert!(msg.contains("n > 3d/2"), "{msg}");
    }

    #[test]
    fn csv_header_detection() {
        let dir = tempfile::tempdir().unwrap();
        let with = dir.path().join("a.csv");
        fs::write(&with, "x,y\n1.0,2.0\n3.0,-1\n").unwrap();
        assert_eq!(read_csv(&with).unwrap(), vec![vec![1.0, 2.0], vec![3.0, -1.0]]);
        let without = dir.path().join("b.csv");
        fs::write(&without, "1.0,2.0\n3.0,-1\n").unwrap();
        assert_eq!(read_csv(&without).unwrap().len(), 2);
        let empty = dir.path().join("c.csv");
        fs::write(&empty, "").unwrap();
        assert!(read_csv(&empty).is_err());
        let header_only = dir.path().join("d.csv");
        fs::write(&header_only, "x,y\n").unwrap();
        assert!(read_csv(&header_only).is_err());
        let bad = dir.path().join("e.csv");
        fs::write(&bad, "1,2\nfoo,3\n").unwrap();
        assert!(read_csv(&bad).is_err());
        let dup = dir.path().join("f.csv");
        fs::write(&dup, "1,2\n1,3\n").unwrap();
        assert!(read_training_csv(&dup)
            .unwrap_err()
            .to_string()
            .contains("pairwise distinct"));
    }

    #[test]
    fn two_class_sample_is_seeded_and_labeled() {
        let a = two_class_sample(50, 3.0, &mut ChaCha8Rng::seed_from_u64(1));
        let b = two_class_sample(50, 3.0, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert!(a.1.iter().all(|y| *y == 1.0 || *y == -1.0));
        assert!(a.1.contains(&1.0) && a.1.iter().any(|y| *y == -1.0));
        // class means sit on the correct side of the separating diagonal
        let mean = |label: f64| {
            let pts: Vec<&Vec<f64>> =
                a.0.iter()
                    .zip(&a.1)
                    .filter(|(_, y)| **y == label)
                    .map(|(x, _)| x)
                    .collect();
            pts.iter().map(|x| x[0] + x[1]).sum::<f64>() / pts.len() as f64
        };
        assert!(mean(1.0) > 0.0 && mean(-1.0) < 0.0);
    }

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[1.0, -1.0, 1.0, 1.0], &[1.0, 1.0, 1.0, -1.0]), 0.5);
    }
}
