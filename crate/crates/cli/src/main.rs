//! `annulus`: JSON reports and CSV plot data for operators on `r < |z| < 1`.
//!
//! Exit codes: 0 clean, 2 class violation or failed invariant (the report is
//! still written), 1 on errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use annulus_core::alpha_class::{classify_zero_defect, is_in_c_1r, is_in_c_alpha, is_in_c_beta, Verdict};
use annulus_core::asymptotics::{broken_line, norm_identity_residual, ModelData};
use annulus_core::catalog;
use annulus_core::lifting::{gramian_residual, intertwining_residual, lifting_isometry_residual};
use annulus_core::linalg::c;
use annulus_core::spectral_bounds::{k_ratio, k_search, KReport, LaurentRational};
use annulus_core::verify::{run_suite, SUITES};
use annulus_core::{CMatrix, CVector, Execution, Membership, OperatorInstance, Tolerances};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// √2 plus the acceptance slack.
const K_BOUND: f64 = std::f64::consts::SQRT_2 + 1e-6;

#[derive(Parser)]
#[command(name = "annulus", version, about = "Analyses for the operator class C_α on the annulus r < |z| < 1")]
struct Cli {
    /// Tolerances JSON; unlisted fields keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run sequentially instead of on the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Membership, defect, limit gramians and identity residuals.
    Analyze {
        #[command(flatten)]
        input: MatrixInput,
        /// β-class parameters to test (repeatable).
        #[arg(long = "s")]
        s: Vec<f64>,
        /// Membership tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Window for series, lifting and intertwining.
        #[arg(long)]
        window: Option<usize>,
        /// Test functions for an optional K-search (0 skips it).
        #[arg(long, default_value_t = 0)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Boundary samples per circle for the K-search.
        #[arg(long, default_value_t = 4096)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized invariant suites.
    Verify {
        /// Suite name or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Random samples per suite.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lower estimate of the spectral constant for one operator.
    EstimateK {
        #[command(flatten)]
        input: MatrixInput,
        /// Evaluate a single LaurentRational JSON file instead of searching.
        #[arg(long)]
        function: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        budget: usize,
        /// Boundary samples per circle.
        #[arg(long, default_value_t = 4096)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vertices (r^{2n}, ‖Tⁿx‖²) as CSV `n,x,y`, plus a concavity verdict on stderr.
    BrokenLine {
        #[command(flatten)]
        input: MatrixInput,
        /// Vector as JSON `[[re,im],...]`; defaults to e₁.
        #[arg(long)]
        x: Option<String>,
        #[arg(long, default_value_t = -10, allow_hyphen_values = true)]
        n_min: i64,
        #[arg(long, default_value_t = 10, allow_hyphen_values = true)]
        n_max: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in worked examples.
    Catalog {
        #[arg(value_enum)]
        action: CatalogAction,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CatalogAction {
    List,
    Run,
}

#[derive(Args)]
struct MatrixInput {
    /// Matrix JSON `{"rows":n,"cols":n,"entries":[[re,im],...]}`.
    matrix: PathBuf,
    /// Inner radius of the annulus.
    #[arg(long)]
    r: f64,
}

impl MatrixInput {
    fn load(&self) -> Result<(OperatorInstance, String)> {
        let text = read(&self.matrix)?;
        let m = CMatrix::from_json(&text).with_context(|| format!("parsing {}", self.matrix.display()))?;
        let hash = matrix_hash(&m);
        let op = OperatorInstance::new(m, self.r)?;
        Ok((op, hash))
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// SHA-256 of the compact Matrix JSON, so equal matrices hash equally
/// whatever the input formatting.
fn matrix_hash(m: &CMatrix) -> String {
    hex::encode(Sha256::digest(m.to_json().as_bytes()))
}

/// Key-sorted pretty JSON with a trailing newline.
fn render<T: Serialize>(v: &T) -> Result<String> {
    let value: Value = serde_json::to_value(v)?;
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn basis(n: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[i] = c(1.0, 0.0);
    v
}

#[derive(Serialize)]
struct Input {
    matrix_sha256: String,
    dim: usize,
    r: f64,
}

#[derive(Serialize)]
struct BetaEntry {
    s: f64,
    membership: Membership,
}

#[derive(Serialize)]
struct Model {
    /// `max(‖T*Q₊T − Q₊‖₂, ‖r²(T⁻¹)*Q₋T⁻¹ − Q₋‖₂)`.
    gramian_fixed_point: f64,
    /// `‖O*O + Q₊ + Q₋ − I‖₂` with `O*O` summed independently.
    gramian_total: f64,
    gramian_doublings: usize,
    q_plus_norm: f64,
    q_minus_norm: f64,
    norm_identity: f64,
    /// Largest residual over the standard basis vectors.
    lifting: f64,
    intertwining: f64,
}

#[derive(Serialize)]
struct AnalysisReport {
    input: Input,
    c_alpha: Membership,
    c_1r: Membership,
    c_beta: Vec<BetaEntry>,
    defect_rank: Option<usize>,
    alpha_min_eig: f64,
    eigenvalue_moduli: Vec<f64>,
    zero_defect: annulus_core::alpha_class::ZeroDefectReport,
    model: Option<Model>,
    /// Concavity of the broken line on `[-10, 10]` for every basis vector.
    broken_line_concave: bool,
    k: Option<KReport>,
    tolerances: Tolerances,
}

fn analyze(
    input: &MatrixInput,
    s: &[f64],
    tol: &Tolerances,
    k: (usize, u64, usize),
    exec: Execution,
) -> Result<(AnalysisReport, bool)> {
    let (op, hash) = input.load()?;
    let n = op.dim();
    let c_alpha = is_in_c_alpha(&op, tol.psd)?;
    let c_1r = is_in_c_1r(&op, tol.psd);
    let c_beta = s
        .iter()
        .map(|&s| Ok(BetaEntry { s, membership: is_in_c_beta(&op, s, tol.psd)? }))
        .collect::<Result<Vec<_>>>()?;
    let alpha_min_eig = annulus_core::alpha_class::alpha_form(&op).herm_eig()?.min();
    let mut moduli: Vec<f64> = op.t().eigenvalues()?.iter().map(|z| z.norm()).collect();
    moduli.sort_by(f64::total_cmp);
    let zero_defect = classify_zero_defect(&op, 1e-12, tol.normality)?;

    let (defect_rank, model) = if c_alpha.is_member() && c_1r.is_member() {
        let m = ModelData::new(&op, tol)?;
        let mut lifting: f64 = 0.0;
        let mut intertwining: f64 = 0.0;
        for i in 0..n {
            let x = basis(n, i);
            lifting = lifting.max(lifting_isometry_residual(&m, &x, tol.window)?);
            intertwining = intertwining.max(intertwining_residual(&m, &x, tol.window)?);
        }
        let model = Model {
            gramian_fixed_point: m.gramians.residual,
            gramian_total: gramian_residual(&m, 1e-11, tol.max_doublings)?,
            gramian_doublings: m.gramians.iterations,
            q_plus_norm: m.gramians.q_plus.opnorm(),
            q_minus_norm: m.gramians.q_minus.opnorm(),
            norm_identity: norm_identity_residual(&m, tol.window),
            lifting,
            intertwining,
        };
        (Some(m.defect.defect_rank), Some(model))
    } else {
        (None, None)
    };

    let mut concave = true;
    for i in 0..n {
        concave &= broken_line(&op, &basis(n, i), -10, 10, tol.concavity)?.concave;
    }

    let (budget, seed, samples) = k;
    let k = if budget > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Some(k_search(&op, budget, samples, &mut rng, exec)?.0)
    } else {
        None
    };

    let finding = c_alpha.verdict == Verdict::Out || c_1r.verdict == Verdict::Out || !concave;
    let report = AnalysisReport {
        input: Input {
            matrix_sha256: hash,
            dim: n,
            r: op.r(),
        },
        c_alpha,
        c_1r,
        c_beta,
        defect_rank,
        alpha_min_eig,
        eigenvalue_moduli: moduli,
        zero_defect,
        model,
        broken_line_concave: concave,
        k,
        tolerances: tol.clone(),
    };
    Ok((report, finding))
}

#[derive(Serialize)]
struct KOutput {
    input: Input,
    report: KReport,
    function: Value,
    c_alpha: Membership,
    within_bound: bool,
}

fn parse_vector(text: &str, n: usize) -> Result<CVector> {
    let pairs: Vec<[f64; 2]> = serde_json::from_str(text).context("vector must be JSON [[re,im],...]")?;
    if pairs.len() != n {
        bail!("vector has length {}, matrix dimension is {n}", pairs.len());
    }
    Ok(CVector::from_iterator(n, pairs.iter().map(|p| c(p[0], p[1]))))
}

fn run(cli: Cli) -> Result<bool> {
    let mut tol = match &cli.config {
        Some(p) => Tolerances::from_json(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => Tolerances::default(),
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Analyze {
            input,
            s,
            tol: t,
            window,
            budget,
            seed,
            samples,
            out,
        } => {
            if let Some(t) = t {
                tol.psd = t;
            }
            if let Some(w) = window {
                tol.window = w;
            }
            let (report, finding) = analyze(&input, &s, &tol, (budget, seed, samples), exec)?;
            emit(&render(&report)?, out.as_deref())?;
            Ok(finding)
        }
        Command::Verify {
            suite,
            seed,
            samples,
            out,
        } => {
            let names: Vec<&str> = if suite == "all" {
                SUITES.to_vec()
            } else {
                vec![suite.as_str()]
            };
            let summaries = names
                .iter()
                .map(|s| run_suite(s, seed, samples, &tol, exec))
                .collect::<annulus_core::Result<Vec<_>>>()?;
            let failed = summaries.iter().any(|s| !s.ok());
            let doc = serde_json::json!({ "seed": seed, "samples": samples, "suites": summaries, "ok": !failed });
            emit(&render(&doc)?, out.as_deref())?;
            Ok(failed)
        }
        Command::EstimateK {
            input,
            function,
            budget,
            samples,
            seed,
            out,
        } => {
            let (op, hash) = input.load()?;
            let (report, f) = match function {
                Some(p) => {
                    let f = LaurentRational::from_json(&read(&p)?)?;
                    f.validate(op.r(), tol.pole_margin)?;
                    (k_ratio(&f, &op, samples, exec)?, f)
                }
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    k_search(&op, budget, samples, &mut rng, exec)?
                }
            };
            let c_alpha = is_in_c_alpha(&op, tol.psd)?;
            let within_bound = report.ratio <= K_BOUND;
            let doc = KOutput {
                input: Input {
                    matrix_sha256: hash,
                    dim: op.dim(),
                    r: op.r(),
                },
                report,
                function: serde_json::from_str(&f.to_json())?,
                c_alpha,
                within_bound,
            };
            emit(&render(&doc)?, out.as_deref())?;
            Ok(c_alpha.verdict == Verdict::Out || (c_alpha.is_member() && !within_bound))
        }
        Command::BrokenLine {
            input,
            x,
            n_min,
            n_max,
            out,
        } => {
            let (op, _) = input.load()?;
            let x = match x {
                Some(s) => parse_vector(&s, op.dim())?,
                None => basis(op.dim(), 0),
            };
            let line = broken_line(&op, &x, n_min, n_max, tol.concavity)?;
            emit(&line.to_csv(), out.as_deref())?;
            eprintln!(
                "concave: {} (worst normalized second difference {:e})",
                line.concave, line.worst_defect
            );
            Ok(!line.concave)
        }
        Command::Catalog { action, out } => {
            let entries = catalog::all()?;
            match action {
                CatalogAction::List => {
                    emit(&render(&entries)?, out.as_deref())?;
                    Ok(false)
                }
                CatalogAction::Run => {
                    let results: Vec<Value> = entries
                        .iter()
                        .map(|e| {
                            let checks = e.run();
                            let pass = checks.iter().all(|c| c.pass);
                            serde_json::json!({ "name": e.name, "params": e.params, "checks": checks, "pass": pass })
                        })
                        .collect();
                    let passed = results.iter().filter(|v| v["pass"] == Value::Bool(true)).count();
                    let doc = serde_json::json!({
                        "entries": results,
                        "passed": passed,
                        "failed": results.len() - passed,
                    });
                    emit(&render(&doc)?, out.as_deref())?;
                    Ok(passed != results.len())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
