//! Command-line front end: scoring, descriptives, factor analysis,
//! projections, sample comparison, response simulation, and the
//! leave-one-question-out ablation.
//!
//! Usage errors exit with code 2 (argument parsing); domain errors exit
//! with code 1 and print `ErrorName: message` on standard error. Every run
//! that writes files also writes a `manifest.json` echoing the
//! configuration and seeds, so outputs can be reproduced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use persim::cfa::{build_ffm_spec, build_tfm_spec, fit_ml, sample_covariance, CfaFit, CfaOptions};
use persim::nalgebra::DMatrix;
use persim::criterion::CriterionSpec;
use persim::io;
use persim::pca::{fit_pca2, project};
use persim::report::{
    ablation_rows, compare_samples, emit_report, format_sig6, CompareOptions, CriterionInput,
    PipelineError, ReportFormat,
};
use persim::scale::{
    apply_reverse_coding, bfi2, score, Coding, Level, MissingPolicy, ScaleSpec,
    ScoredSample,
};
use persim::sim::{
    run_simulation, HttpResponder, Method, MockResponder, Responder, SimulationConfig,
    SubjectProfile,
};
use persim::stats;

#[derive(Parser)]
#[command(
    name = "persim",
    version,
    about = "Score hierarchical Likert scales and evaluate simulated samples against a reference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a response CSV at item, facet, and domain level.
    Score(ScoreArgs),
    /// Descriptive statistics per unit at one level.
    Describe(DescribeArgs),
    /// Full comparison report between a reference and a simulated sample.
    Compare(CompareArgs),
    /// Factor models (one per domain plus the five-factor model) on one sample.
    Cfa(CfaArgs),
    /// Two-component projection of scored responses.
    Pca(PcaArgs),
    /// Generate simulated responses from subject profiles.
    Simulate(SimulateArgs),
    /// Leave-one-question-out ablation over interview transcripts.
    Ablate(AblateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CodingArg {
    /// Responses as collected; reverse-keyed items still need recoding.
    Raw,
    /// Reverse coding already applied.
    Reversed,
}

impl From<CodingArg> for Coding {
    fn from(value: CodingArg) -> Coding {
        match value {
            CodingArg::Raw => Coding::Raw,
            CodingArg::Reversed => Coding::ReverseApplied,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Psi,
    Persona,
    Shape,
}

impl From<MethodArg> for Method {
    fn from(value: MethodArg) -> Method {
        match value {
            MethodArg::Psi => Method::Psi,
            MethodArg::Persona => Method::Persona,
            MethodArg::Shape => Method::Shape,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ResponderArg {
    /// Deterministic seeded responder, no network.
    Mock,
    /// Chat-completions HTTP endpoint; reads RESPONDER_API_KEY if set.
    Http,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LevelArg {
    Item,
    Facet,
    Domain,
}

impl From<LevelArg> for Level {
    fn from(value: LevelArg) -> Level {
        match value {
            LevelArg::Item => Level::Item,
            LevelArg::Facet => Level::Facet,
            LevelArg::Domain => Level::Domain,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl std::fmt::Display for FormatArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FormatArg::Json => "json",
            FormatArg::Csv => "csv",
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    /// Drop subjects with any missing item.
    Listwise,
    /// Tolerate one missing item per facet, imputing the facet mean.
    Impute,
}

impl From<PolicyArg> for MissingPolicy {
    fn from(value: PolicyArg) -> MissingPolicy {
        match value {
            PolicyArg::Listwise => MissingPolicy::ListwiseDelete,
            PolicyArg::Impute => MissingPolicy::FacetMeanImpute,
        }
    }
}

#[derive(Args)]
struct ScaleOpt {
    /// Scale definition JSON; the bundled BFI-2 when omitted.
    #[arg(long)]
    scale: Option<PathBuf>,
}

impl ScaleOpt {
    fn load(&self) -> Result<ScaleSpec, PipelineError> {
        match &self.scale {
            Some(path) => Ok(io::load_scale_spec(path)?),
            None => Ok(bfi2().clone()),
        }
    }
}

#[derive(Args)]
struct ResponderOpt {
    #[arg(long, value_enum, default_value_t = ResponderArg::Mock)]
    responder: ResponderArg,
    /// Seed for the mock responder.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Base URL of a chat-completions API (required with --responder http).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name sent to the HTTP endpoint.
    #[arg(long)]
    model: Option<String>,
    /// Sampling temperature for the HTTP endpoint.
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Concurrent in-flight requests.
    #[arg(long, default_value_t = 4)]
    max_parallel: usize,
}

impl ResponderOpt {
    fn build(&self, spec: &ScaleSpec) -> Result<Box<dyn Responder>, PipelineError> {
        match self.responder {
            ResponderArg::Mock => Ok(Box::new(MockResponder::for_scale(self.seed, &spec.likert))),
            ResponderArg::Http => {
                let endpoint = self.endpoint.as_deref().ok_or_else(|| {
                    PipelineError::Config("--endpoint is required with --responder http".into())
                })?;
                let model = self.model.as_deref().ok_or_else(|| {
                    PipelineError::Config("--model is required with --responder http".into())
                })?;
                let api_key = std::env::var("RESPONDER_API_KEY").ok();
                let responder = HttpResponder::new(endpoint, model, self.temperature, api_key)
                    .map_err(|e| PipelineError::Config(e.to_string()))?;
                Ok(Box::new(responder))
            }
        }
    }

    fn config(&self, method: Method) -> SimulationConfig {
        let mut cfg = SimulationConfig::new(method);
        cfg.temperature = self.temperature;
        cfg.max_parallel = self.max_parallel;
        cfg
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "responder": match self.responder {
                ResponderArg::Mock => "mock",
                ResponderArg::Http => "http",
            },
            "seed": self.seed,
            "endpoint": self.endpoint,
            "model": self.model,
            "temperature": self.temperature,
            "max_parallel": self.max_parallel,
        })
    }
}

#[derive(Args)]
struct ScoreArgs {
    /// Response CSV with Item{id} columns.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    scale: ScaleOpt,
    #[arg(long, value_enum, default_value_t = CodingArg::Raw)]
    coding: CodingArg,
    #[arg(long, value_enum, default_value_t = PolicyArg::Listwise)]
    policy: PolicyArg,
    /// Output directory; domain scores go to standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DescribeArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    scale: ScaleOpt,
    #[arg(long, value_enum, default_value_t = CodingArg::Raw)]
    coding: CodingArg,
    #[arg(long, value_enum, default_value_t = PolicyArg::Listwise)]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value_t = LevelArg::Domain)]
    level: LevelArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Reference (human) response CSV.
    #[arg(long)]
    human: PathBuf,
    /// Simulated response CSV.
    #[arg(long)]
    sim: PathBuf,
    #[command(flatten)]
    scale: ScaleOpt,
    /// Declared coding of both input files.
    #[arg(long, value_enum, default_value_t = CodingArg::Raw)]
    coding: CodingArg,
    #[arg(long, value_enum, default_value_t = PolicyArg::Listwise)]
    policy: PolicyArg,
    /// Organizational citizenship behavior CSV (OCB1..OCB10).
    #[arg(long)]
    ocb: Option<PathBuf>,
    /// Counterproductive work behavior CSV (CWB1..CWB10).
    #[arg(long)]
    cwb: Option<PathBuf>,
    /// Seed to record in the report metadata (for reruns of the simulation
    /// that produced --sim).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Output formats.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [FormatArg::Json, FormatArg::Csv])]
    format: Vec<FormatArg>,
}

#[derive(Args)]
struct CfaArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    scale: ScaleOpt,
    #[arg(long, value_enum, default_value_t = CodingArg::Raw)]
    coding: CodingArg,
    #[arg(long, value_enum, default_value_t = PolicyArg::Listwise)]
    policy: PolicyArg,
    /// Fit a single model: a domain name or "FFM". All six when omitted.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PcaArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    scale: ScaleOpt,
    #[arg(long, value_enum, default_value_t = CodingArg::Raw)]
    coding: CodingArg,
    #[arg(long, value_enum, default_value_t = PolicyArg::Listwise)]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value_t = LevelArg::Domain)]
    level: LevelArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Profile CSV: transcripts (Q1..Q32), personas (S1..S5), or shapes
    /// (Low1..High5, Level), matching --method.
    #[arg(long)]
    profiles: PathBuf,
    #[command(flatten)]
    scale: ScaleOpt,
    #[command(flatten)]
    responder: ResponderOpt,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    /// Interview transcript CSV (Q1..Q32 per subject).
    #[arg(long)]
    transcripts: PathBuf,
    /// Reference response CSV for the same subjects.
    #[arg(long)]
    human: PathBuf,
    #[command(flatten)]
    scale: ScaleOpt,
    #[arg(long, value_enum, default_value_t = CodingArg::Raw)]
    coding: CodingArg,
    #[arg(long, value_enum, default_value_t = PolicyArg::Listwise)]
    policy: PolicyArg,
    #[command(flatten)]
    responder: ResponderOpt,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(args) => cmd_score(args),
        Command::Describe(args) => cmd_describe(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Cfa(args) => cmd_cfa(args),
        Command::Pca(args) => cmd_pca(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Ablate(args) => cmd_ablate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {e}", e.name());
            ExitCode::FAILURE
        }
    }
}

fn load_scored(
    path: &Path,
    spec: &ScaleSpec,
    coding: CodingArg,
    policy: PolicyArg,
) -> Result<ScoredSample, PipelineError> {
    let matrix = io::load_responses_path(path, spec, coding.into())?;
    let coded = match matrix.coding() {
        Coding::Raw => apply_reverse_coding(&matrix, spec)?,
        Coding::ReverseApplied => matrix,
    };
    Ok(score(&coded, spec, policy.into())?)
}

fn write_manifest(
    out: &Path,
    command: &str,
    config: serde_json::Value,
    seeds: &BTreeMap<String, u64>,
    outputs: &[PathBuf],
    warnings: &[String],
) -> Result<(), PipelineError> {
    let manifest = serde_json::json!({
        "command": command,
        "config": config,
        "outputs": outputs
            .iter()
            .map(|p| p.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default())
            .collect::<Vec<_>>(),
        "seeds": seeds,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "warnings": warnings,
    });
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(PipelineError::Json)?;
    text.push('\n');
    std::fs::write(out.join("manifest.json"), text)?;
    Ok(())
}

fn write_grid_csv(
    path: &Path,
    subject_ids: &[String],
    labels: &[String],
    grid: &DMatrix<f64>,
) -> Result<(), PipelineError> {
    let mut writer = csv::Writer::from_writer(std::fs::File::create(path)?);
    let mut header = vec!["subject_id".to_string()];
    header.extend(labels.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    for (i, id) in subject_ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        for j in 0..labels.len() {
            row.push(format_sig6(grid[(i, j)]));
        }
        writer
            .write_record(&row)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes to standard output, treating a closed pipe (for example
/// `persim ... | head`) as a normal early exit.
fn write_stdout(text: &str) -> Result<(), PipelineError> {
    use std::io::Write;
    match std::io::stdout().write_all(text.as_bytes()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(PipelineError::Io(e)),
    }
}

fn grid_stdout(
    subject_ids: &[String],
    labels: &[String],
    grid: &DMatrix<f64>,
) -> Result<(), PipelineError> {
    let mut text = format!("subject_id,{}\n", labels.join(","));
    for (i, id) in subject_ids.iter().enumerate() {
        let cells: Vec<String> = (0..labels.len()).map(|j| format_sig6(grid[(i, j)])).collect();
        text.push_str(&format!("{id},{}\n", cells.join(",")));
    }
    write_stdout(&text)
}

fn cmd_score(args: ScoreArgs) -> Result<(), PipelineError> {
    let spec = args.scale.load()?;
    let scored = load_scored(&args.input, &spec, args.coding, args.policy)?;
    let Some(out) = &args.out else {
        return grid_stdout(&scored.subject_ids, &scored.domain_names, &scored.domain_scores);
    };
    std::fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    for (name, labels, grid) in [
        ("scores_item.csv", &scored.item_labels, &scored.item_scores),
        ("scores_facet.csv", &scored.facet_names, &scored.facet_scores),
        ("scores_domain.csv", &scored.domain_names, &scored.domain_scores),
    ] {
        let path = out.join(name);
        write_grid_csv(&path, &scored.subject_ids, labels, grid)?;
        outputs.push(path);
    }
    let warnings = if scored.dropped_subjects.is_empty() {
        Vec::new()
    } else {
        vec![format!(
            "{} subject(s) dropped by the missing-data policy",
            scored.dropped_subjects.len()
        )]
    };
    write_manifest(
        out,
        "score",
        serde_json::json!({
            "coding": coding_name(args.coding),
            "input": args.input,
            "policy": policy_name(args.policy),
            "scale": spec.name,
        }),
        &BTreeMap::new(),
        &outputs,
        &warnings,
    )
}

fn coding_name(c: CodingArg) -> &'static str {
    match c {
        CodingArg::Raw => "raw",
        CodingArg::Reversed => "reversed",
    }
}

fn policy_name(p: PolicyArg) -> &'static str {
    match p {
        PolicyArg::Listwise => "listwise",
        PolicyArg::Impute => "impute",
    }
}

fn cmd_describe(args: DescribeArgs) -> Result<(), PipelineError> {
    let spec = args.scale.load()?;
    let scored = load_scored(&args.input, &spec, args.coding, args.policy)?;
    let level: Level = args.level.into();
    let labels = scored.labels(level);
    let grid = scored.grid(level);
    let mut rows = Vec::with_capacity(labels.len());
    for (j, unit) in labels.iter().enumerate() {
        let column: Vec<f64> = grid.column(j).iter().copied().collect();
        let d = stats::describe(&column)?;
        rows.push(vec![
            unit.clone(),
            d.n.to_string(),
            format_sig6(d.mu),
            format_sig6(d.sigma),
            d.skewness.map(format_sig6).unwrap_or_default(),
            d.excess_kurtosis.map(format_sig6).unwrap_or_default(),
        ]);
    }
    let header = ["unit", "n", "mu", "sigma", "skewness", "excess_kurtosis"];
    let Some(out) = &args.out else {
        let mut text = format!("{}\n", header.join(","));
        for row in rows {
            text.push_str(&format!("{}\n", row.join(",")));
        }
        return write_stdout(&text);
    };
    std::fs::create_dir_all(out)?;
    let level_name = match level {
        Level::Item => "item",
        Level::Facet => "facet",
        Level::Domain => "domain",
    };
    let path = out.join(format!("describe_{level_name}.csv"));
    let mut writer = csv::Writer::from_writer(std::fs::File::create(&path)?);
    writer
        .write_record(header)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    for row in &rows {
        writer
            .write_record(row)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    writer.flush()?;
    write_manifest(
        out,
        "describe",
        serde_json::json!({
            "coding": coding_name(args.coding),
            "input": args.input,
            "level": level_name,
            "policy": policy_name(args.policy),
            "scale": spec.name,
        }),
        &BTreeMap::new(),
        &[path],
        &[],
    )
}

fn cmd_compare(args: CompareArgs) -> Result<(), PipelineError> {
    let spec = args.scale.load()?;
    let human = io::load_responses_path(&args.human, &spec, args.coding.into())?;
    let sim = io::load_responses_path(&args.sim, &spec, args.coding.into())?;
    let mut options = CompareOptions {
        missing_policy: args.policy.into(),
        ..CompareOptions::default()
    };
    if let Some(seed) = args.seed {
        options.seeds.insert("simulation".into(), seed);
    }
    for (path, criterion) in [
        (&args.ocb, CriterionSpec::ocb()),
        (&args.cwb, CriterionSpec::cwb()),
    ] {
        if let Some(path) = path {
            let responses = io::load_criterion_path(path, &criterion)?;
            options.criteria.push(CriterionInput {
                spec: criterion,
                responses,
            });
        }
    }
    let report = compare_samples(&human, &sim, &spec, &options)?;
    let formats: Vec<ReportFormat> = args
        .format
        .iter()
        .map(|f| match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        })
        .collect();
    let outputs = emit_report(&report, &formats, &args.out)?;
    write_manifest(
        &args.out,
        "compare",
        serde_json::json!({
            "coding": coding_name(args.coding),
            "cwb": args.cwb,
            "human": args.human,
            "ocb": args.ocb,
            "policy": policy_name(args.policy),
            "scale": spec.name,
            "sim": args.sim,
        }),
        &report.metadata.seeds,
        &outputs,
        &report.metadata.warnings,
    )
}

fn fit_detail(fit: &CfaFit) -> serde_json::Value {
    let model = &fit.model;
    let p = model.n_indicators();
    let m = model.n_factors();
    let loadings: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..m).map(|j| fit.loadings_std[(i, j)]).collect())
        .collect();
    let phi: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..m).map(|k| fit.phi[(j, k)]).collect())
        .collect();
    serde_json::json!({
        "chi2": fit.chi2,
        "chi2_null": fit.chi2_null,
        "converged": fit.converged,
        "df": fit.df,
        "df_null": fit.df_null,
        "error_var_std": fit.error_var_std,
        "f_ml": fit.f_ml,
        "factors": model.factor_names(),
        "indicators": model.indicator_names(),
        "indices": {
            "cfi": fit.indices.cfi,
            "rmsea": fit.indices.rmsea,
            "srmr": fit.indices.srmr,
            "tli": fit.indices.tli,
        },
        "iterations": fit.iterations,
        "loadings_std": loadings,
        "n": fit.n,
        "phi": phi,
        "warnings": fit.warnings.iter().map(|w| w.label()).collect::<Vec<_>>(),
    })
}

fn cmd_cfa(args: CfaArgs) -> Result<(), PipelineError> {
    let spec = args.scale.load()?;
    let scored = load_scored(&args.input, &spec, args.coding, args.policy)?;
    let mut plans: Vec<(String, persim::cfa::CfaModelSpec, Level)> = Vec::new();
    for domain in &spec.domains {
        plans.push((domain.name.clone(), build_tfm_spec(domain, &spec)?, Level::Item));
    }
    plans.push(("FFM".into(), build_ffm_spec(&spec)?, Level::Facet));
    if let Some(wanted) = &args.model {
        plans.retain(|(name, _, _)| name.eq_ignore_ascii_case(wanted));
        if plans.is_empty() {
            return Err(PipelineError::Config(format!(
                "unknown model {wanted:?}: expected a domain name or FFM"
            )));
        }
    }
    let options = CfaOptions::default();
    let mut results = serde_json::Map::new();
    let mut lines = Vec::new();
    for (name, model, level) in &plans {
        let labels = model.indicator_names().to_vec();
        let grid = scored.grid(*level);
        let all_labels = scored.labels(*level);
        let mut sub = DMatrix::zeros(grid.nrows(), labels.len());
        for (k, label) in labels.iter().enumerate() {
            let j = all_labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| PipelineError::Config(format!("missing column {label}")))?;
            sub.set_column(k, &grid.column(j));
        }
        let cov = sample_covariance(&sub, labels)?;
        let fit = fit_ml(&cov, model, &options)?;
        lines.push(format!(
            "{name}: chi2={} df={} cfi={} tli={} rmsea={} srmr={} converged={}",
            format_sig6(fit.chi2),
            fit.df,
            fit.indices.cfi.map(format_sig6).unwrap_or_else(|| "-".into()),
            fit.indices.tli.map(format_sig6).unwrap_or_else(|| "-".into()),
            fit.indices.rmsea.map(format_sig6).unwrap_or_else(|| "-".into()),
            format_sig6(fit.indices.srmr),
            fit.converged,
        ));
        results.insert(name.clone(), fit_detail(&fit));
    }
    let Some(out) = &args.out else {
        let mut text = String::new();
        for line in lines {
            text.push_str(&line);
            text.push('\n');
        }
        return write_stdout(&text);
    };
    std::fs::create_dir_all(out)?;
    let path = out.join("cfa.json");
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(results))
        .map_err(PipelineError::Json)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    write_manifest(
        out,
        "cfa",
        serde_json::json!({
            "coding": coding_name(args.coding),
            "input": args.input,
            "model": args.model,
            "policy": policy_name(args.policy),
            "scale": spec.name,
        }),
        &BTreeMap::new(),
        &[path],
        &[],
    )
}

fn cmd_pca(args: PcaArgs) -> Result<(), PipelineError> {
    let spec = args.scale.load()?;
    let scored = load_scored(&args.input, &spec, args.coding, args.policy)?;
    let level: Level = args.level.into();
    let basis = fit_pca2(scored.grid(level))?;
    let projection = project(&basis, scored.grid(level))?;
    let level_name = match level {
        Level::Item => "item",
        Level::Facet => "facet",
        Level::Domain => "domain",
    };
    let Some(out) = &args.out else {
        let mut text = String::from("subject_id,dim1,dim2\n");
        for (i, id) in scored.subject_ids.iter().enumerate() {
            text.push_str(&format!(
                "{id},{},{}\n",
                format_sig6(projection.coords[(i, 0)]),
                format_sig6(projection.coords[(i, 1)])
            ));
        }
        return write_stdout(&text);
    };
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("pca_{level_name}.csv"));
    let mut writer = csv::Writer::from_writer(std::fs::File::create(&path)?);
    writer
        .write_record(["subject_id", "dim1", "dim2"])
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    for (i, id) in scored.subject_ids.iter().enumerate() {
        writer
            .write_record([
                id.as_str(),
                &format_sig6(projection.coords[(i, 0)]),
                &format_sig6(projection.coords[(i, 1)]),
            ])
            .map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    writer.flush()?;
    write_manifest(
        out,
        "pca",
        serde_json::json!({
            "coding": coding_name(args.coding),
            "eigenvalues": basis.eigenvalues,
            "input": args.input,
            "level": level_name,
            "policy": policy_name(args.policy),
            "scale": spec.name,
        }),
        &BTreeMap::new(),
        &[path],
        &[],
    )
}

fn load_profiles(method: Method, path: &Path) -> Result<Vec<SubjectProfile>, PipelineError> {
    Ok(match method {
        Method::Psi => io::load_transcripts_path(path)?
            .into_iter()
            .map(SubjectProfile::Interview)
            .collect(),
        Method::Persona => io::load_personas_path(path)?
            .into_iter()
            .map(SubjectProfile::Persona)
            .collect(),
        Method::Shape => io::load_shapes_path(path)?
            .into_iter()
            .map(SubjectProfile::Shape)
            .collect(),
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), PipelineError> {
    let spec = args.scale.load()?;
    let method: Method = args.method.into();
    let profiles = load_profiles(method, &args.profiles)?;
    let responder = args.responder.build(&spec)?;
    let cfg = args.responder.config(method);
    let outcome = run_simulation(&profiles, &spec, &cfg, responder.as_ref())?;
    std::fs::create_dir_all(&args.out)?;
    let matrix_path = args.out.join("simulated.csv");
    io::write_responses_path(&matrix_path, &outcome.matrix)?;
    let mut outputs = vec![matrix_path];
    let mut warnings = Vec::new();
    if !outcome.failures.is_empty() {
        let failures_path = args.out.join("failures.csv");
        let mut writer = csv::Writer::from_writer(std::fs::File::create(&failures_path)?);
        writer
            .write_record(["subject_id", "item_id", "attempts", "error"])
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        for f in &outcome.failures {
            writer
                .write_record([
                    f.subject_id.as_str(),
                    &f.item_id.to_string(),
                    &f.attempts.to_string(),
                    f.error.as_str(),
                ])
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        writer.flush()?;
        warnings.push(format!(
            "{} cell(s) failed and are missing in the matrix",
            outcome.failures.len()
        ));
        outputs.push(failures_path);
    }
    let mut seeds = BTreeMap::new();
    if args.responder.responder == ResponderArg::Mock {
        seeds.insert("responder".to_string(), args.responder.seed);
    }
    write_manifest(
        &args.out,
        "simulate",
        serde_json::json!({
            "method": method.label(),
            "profiles": args.profiles,
            "responder": args.responder.describe(),
            "scale": spec.name,
            "subjects": profiles.len(),
        }),
        &seeds,
        &outputs,
        &warnings,
    )
}

fn cmd_ablate(args: AblateArgs) -> Result<(), PipelineError> {
    let spec = args.scale.load()?;
    let transcripts = io::load_transcripts_path(&args.transcripts)?;
    let human = load_scored(&args.human, &spec, args.coding, args.policy)?;
    let responder = args.responder.build(&spec)?;
    let cfg = args.responder.config(Method::Psi);
    let results = persim::criterion::run_ablation(
        &transcripts,
        &spec,
        &cfg,
        responder.as_ref(),
        &human,
    )?;
    let rows = ablation_rows(&results);
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("ablation.csv");
    let domains: Vec<String> = rows
        .iter()
        .find(|r| !r.cells.is_empty())
        .map(|r| r.cells.iter().map(|c| c.domain.clone()).collect())
        .unwrap_or_default();
    let mut writer = csv::Writer::from_writer(std::fs::File::create(&path)?);
    let mut header = vec!["removed_question".to_string(), "aligned_subjects".to_string()];
    header.extend(domains.iter().cloned());
    header.push("failure".into());
    writer
        .write_record(&header)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let mut warnings = Vec::new();
    for row in &rows {
        let mut record = vec![row.removed_question.to_string(), row.aligned_subjects.to_string()];
        for domain in &domains {
            record.push(
                row.cells
                    .iter()
                    .find(|c| &c.domain == domain)
                    .map(|c| c.r_squared.render())
                    .unwrap_or_default(),
            );
        }
        record.push(row.failure.clone().unwrap_or_default());
        if let Some(failure) = &row.failure {
            warnings.push(format!("question {}: {failure}", row.removed_question));
        }
        writer
            .write_record(&record)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    writer.flush()?;
    let mut seeds = BTreeMap::new();
    if args.responder.responder == ResponderArg::Mock {
        seeds.insert("responder".to_string(), args.responder.seed);
    }
    write_manifest(
        &args.out,
        "ablate",
        serde_json::json!({
            "coding": coding_name(args.coding),
            "human": args.human,
            "policy": policy_name(args.policy),
            "responder": args.responder.describe(),
            "scale": spec.name,
            "transcripts": args.transcripts,
        }),
        &seeds,
        &[path],
        &warnings,
    )
}
