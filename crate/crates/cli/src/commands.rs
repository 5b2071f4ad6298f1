use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde_json::json;
use sparsereg_core::batch::{fit_all, sample_all, Dataset, Penalty};
use sparsereg_core::crossval::{make_folds, LambdaGrid};
use sparsereg_core::evaluation::{
    count_validated_hits, default_alpha_ladder, default_threshold_ladder, generate_synthetic, predicted_pairs,
    roc_from_scores, Pair, SyntheticSpec, ValidatedSet,
};
use sparsereg_core::execution::with_threads;
use sparsereg_core::{
    compute_aci, BayesMethod, Execution, InteractionModel, PointMethod, RegressorLabel, SamplerConfig,
    SignConvention,
};

use crate::error::{CliError, CliResult, Stage};
use crate::io::{
    check_file_stem, chain_files, read_candidates, read_chain, read_expression, read_pairs, read_tsv, write_chain,
    write_expression, write_file, write_pairs, ChainFormat, ChainTable, Tsv,
};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Lsr,
    Ridge,
    Lasso,
    Nlasso,
    Blasso,
    Nblasso,
}

enum Method {
    Point(PointMethod),
    Bayes(BayesMethod),
}

impl MethodArg {
    fn resolve(self) -> Method {
        match self {
            MethodArg::Lsr => Method::Point(PointMethod::Lsr),
            MethodArg::Ridge => Method::Point(PointMethod::Ridge),
            MethodArg::Lasso => Method::Point(PointMethod::Lasso),
            MethodArg::Nlasso => Method::Point(PointMethod::NLasso),
            MethodArg::Blasso => Method::Bayes(BayesMethod::Blasso),
            MethodArg::Nblasso => Method::Bayes(BayesMethod::NBlasso),
        }
    }

    fn name(self) -> &'static str {
        match self.resolve() {
            Method::Point(m) => m.as_str(),
            Method::Bayes(m) => m.as_str(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    /// miRNA expression columns.
    Direct,
    /// miRNA x Argonaute product columns.
    Risc,
}

impl ModelArg {
    fn resolve(self) -> InteractionModel {
        match self {
            ModelArg::Direct => InteractionModel::DirectA,
            ModelArg::Risc => InteractionModel::RiscB,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModelArg::Direct => "direct",
            ModelArg::Risc => "risc",
        }
    }
}

fn execution(jobs: usize) -> Execution {
    if jobs == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub mrna: PathBuf,
    #[arg(long)]
    pub mirna: PathBuf,
    /// Argonaute expression (Ago2, Ago134 columns); required for --model risc.
    #[arg(long)]
    pub ago: Option<PathBuf>,
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "direct")]
    pub model: ModelArg,
    /// Fixed penalty for ridge, lasso and nlasso.
    #[arg(long, conflicts_with = "cv_k")]
    pub lambda: Option<f64>,
    /// Choose the penalty by K-fold cross-validation.
    #[arg(long)]
    pub cv_k: Option<usize>,
    #[arg(long, default_value_t = 10.0)]
    pub grid_j0: f64,
    #[arg(long, default_value_t = 2)]
    pub grid_c: u32,
    #[arg(long, default_value_t = 10)]
    pub grid_a: u32,
    /// Retained Gibbs iterations before thinning.
    #[arg(long, default_value_t = 5000)]
    pub nsamps: usize,
    #[arg(long, default_value_t = 2000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Independent chains per gene, pooled.
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, env = "SPARSEREG_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub chain_format: ChainFormat,
    /// Worker threads; 0 uses all cores, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let method = args.method.resolve();
    let model = args.model.resolve();
    match (&method, args.lambda.is_some() || args.cv_k.is_some()) {
        (Method::Point(PointMethod::Lsr), true) => {
            return Err(CliError::Usage("lsr takes neither --lambda nor --cv-k".into()))
        }
        (Method::Point(PointMethod::Lsr), false) | (Method::Point(_), true) => {}
        (Method::Point(_), false) => {
            return Err(CliError::Usage(format!("{} needs --lambda or --cv-k", args.method.name())))
        }
        (Method::Bayes(_), true) => {
            return Err(CliError::Usage("--lambda and --cv-k apply only to point methods".into()))
        }
        (Method::Bayes(_), false) => {}
    }
    match (model, &args.ago) {
        (InteractionModel::RiscB, None) => return Err(CliError::Usage("--model risc needs --ago".into())),
        (InteractionModel::DirectA, Some(_)) => {
            return Err(CliError::Usage("--ago applies only to --model risc".into()))
        }
        _ => {}
    }

    let mut manifest_inputs = vec![("mrna", &args.mrna), ("mirna", &args.mirna), ("candidates", &args.candidates)];
    if let Some(ago) = &args.ago {
        manifest_inputs.push(("ago", ago));
    }
    let dataset = Dataset {
        mrna: read_expression(&args.mrna)?,
        mirna: read_expression(&args.mirna)?,
        ago: args.ago.as_deref().map(read_expression).transpose()?,
        candidates: read_candidates(&args.candidates)?,
        model,
        sign: SignConvention::NegatedDesign,
    };
    let problems = dataset.problems().stage("design")?;
    let exec = execution(args.jobs);

    let mut config = json!({
        "method": args.method.name(),
        "model": args.model.name(),
        "sign": "negated_design",
        "seed": args.seed,
    });

    match method {
        Method::Point(pm) => {
            let penalty = match (args.lambda, args.cv_k) {
                (Some(l), _) => {
                    config["lambda"] = json!(l);
                    Penalty::Fixed(l)
                }
                (None, Some(k)) => {
                    let grid = LambdaGrid::new(args.grid_j0, args.grid_c, args.grid_a).stage("cross-validation")?;
                    let n = dataset.mrna.n_samples();
                    let folds = make_folds(n, k, args.seed).stage("cross-validation")?;
                    config["cv"] = json!({
                        "k": k,
                        "fold_sizes": folds.iter().map(Vec::len).collect::<Vec<_>>(),
                        "fold_seed": args.seed,
                        "grid": { "j0": args.grid_j0, "c": args.grid_c, "a": args.grid_a, "n_values": grid.len() },
                    });
                    Penalty::CrossValidated {
                        grid,
                        k,
                        seed: args.seed,
                    }
                }
                (None, None) => Penalty::Fixed(0.0),
            };
            let fits = with_threads(args.jobs, || fit_all(&problems, pm, &penalty, exec)).stage("fit")?;

            let mut table = Tsv::new(&["gene", "regressor", "beta", "lambda"]);
            for g in &fits {
                if !g.fit.converged {
                    eprintln!(
                        "warning: coordinate descent for gene `{}` stopped after {} sweeps without converging",
                        g.fit.gene_id, g.fit.iterations
                    );
                }
                for (label, b) in g.fit.labels.iter().zip(g.fit.beta.iter()) {
                    table.row([g.fit.gene_id.clone(), label.to_string(), b.to_string(), g.fit.lambda.to_string()]);
                }
            }
            table.save(&args.out_dir.join("fits.tsv"))?;

            if matches!(penalty, Penalty::CrossValidated { .. }) {
                let mut cv = Tsv::new(&["gene", "lambda", "mean_error", "chosen"]);
                for g in &fits {
                    let r = g.cv.as_ref().expect("cross-validated fit carries its curve");
                    for (i, (l, e)) in r.per_lambda_mean_error.iter().enumerate() {
                        cv.row([g.fit.gene_id.clone(), l.to_string(), e.to_string(), (i == r.chosen_index).to_string()]);
                    }
                }
                cv.save(&args.out_dir.join("cv.tsv"))?;
            }
        }
        Method::Bayes(bm) => {
            for p in &problems {
                check_file_stem(p.gene_id())?;
            }
            let cfg = SamplerConfig {
                n_samples: args.nsamps,
                burn_in: args.burnin,
                thin: args.thin,
                ..SamplerConfig::with_seed(args.seed)
            };
            config["sampler"] = json!({
                "n_samples": cfg.n_samples,
                "burn_in": cfg.burn_in,
                "thin": cfg.thin,
                "alpha_lambda0": cfg.alpha_lambda0,
                "beta_lambda0": cfg.beta_lambda0,
                "replicates": args.replicates,
            });
            config["chain_format"] = json!(args.chain_format.extension());
            let chains =
                with_threads(args.jobs, || sample_all(&problems, bm, &cfg, args.replicates, exec)).stage("sample")?;
            for c in &chains {
                let path = args
                    .out_dir
                    .join("chains")
                    .join(format!("{}.{}", c.gene_id, args.chain_format.extension()));
                write_chain(&path, &ChainTable::from(c), args.chain_format)?;
            }
        }
    }

    let mut manifest = RunManifest::new("fit", config);
    for (role, path) in manifest_inputs {
        manifest.add_input(role, path)?;
    }
    manifest.save(&args.out_dir)
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Directory of chain files, or a fit output directory containing `chains/`.
    #[arg(long)]
    pub chains: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Also list coefficients that are not selected.
    #[arg(long)]
    pub all: bool,
    /// Decimal places for significance and interval bounds.
    #[arg(long, default_value_t = 3)]
    pub digits: usize,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn select(args: &SelectArgs) -> CliResult<()> {
    let files = chain_files(&args.chains)?;
    let tables = files.iter().map(|f| read_chain(f)).collect::<CliResult<Vec<_>>>()?;
    let exec = execution(args.jobs);
    let reports = with_threads(args.jobs, || {
        exec.try_map(&tables, |t| {
            (0..t.labels.len())
                .map(|j| compute_aci(t.labels[j].clone(), &t.beta_column(j), args.tau, args.alpha))
                .collect::<sparsereg_core::Result<Vec<_>>>()
                .map_err(|e| CliError::input(Path::new(&t.gene_id), e.to_string()))
        })
    })?;

    let mut rows: Vec<(&str, String, &sparsereg_core::AciReport)> = Vec::new();
    for (t, rs) in tables.iter().zip(&reports) {
        for r in rs {
            if args.all || r.selected {
                rows.push((&t.gene_id, r.regressor_label.to_string(), r));
            }
        }
    }
    rows.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));

    let d = args.digits;
    let mut table = Tsv::new(&["gene", "regressor", "significance", "interval_low", "interval_high", "selected"]);
    for (gene, label, r) in rows {
        let (lo, hi) = match r.interval {
            Some((a, b)) => (format!("{a:.d$}"), format!("{b:.d$}")),
            None => ("NA".into(), "NA".into()),
        };
        table.row([gene.to_string(), label, format!("{:.d$}", r.significance), lo, hi, r.selected.to_string()]);
    }
    table.save(&args.out_dir.join("selection.tsv"))?;

    let mut manifest = RunManifest::new(
        "select",
        json!({ "tau": args.tau, "alpha": args.alpha, "all": args.all, "digits": args.digits }),
    );
    for f in &files {
        let name = f.file_name().and_then(|s| s.to_str()).unwrap_or_default();
        manifest.add_input(format!("chain:{name}"), f)?;
    }
    manifest.save(&args.out_dir)
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("predictions").required(true).args(["fits", "selection"])))]
pub struct EvaluateArgs {
    /// fits.tsv from a point-method fit.
    #[arg(long)]
    pub fits: Option<PathBuf>,
    /// selection.tsv written with --all.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub validated: PathBuf,
    /// Comma-separated thresholds (fits) or significance levels (selection).
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<f64>>,
    /// Operating point for hits.txt: beta threshold for fits, alpha for selections.
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Pair score per (gene, miRNA): the largest value over the miRNA's columns.
fn collapse_scores(
    path: &Path,
    rows: Vec<(u64, BTreeMap<String, String>)>,
    score: impl Fn(&BTreeMap<String, String>) -> Result<f64, String>,
) -> CliResult<BTreeMap<Pair, f64>> {
    let mut scores = BTreeMap::new();
    for (line, row) in rows {
        let label: RegressorLabel = row["regressor"]
            .parse()
            .map_err(|e: sparsereg_core::Error| CliError::parse(path, line, e.to_string()))?;
        let s = score(&row).map_err(|m| CliError::parse(path, line, m))?;
        let e = scores
            .entry((row["gene"].clone(), label.mirna_id().to_string()))
            .or_insert(f64::NEG_INFINITY);
        *e = f64::max(*e, s);
    }
    Ok(scores)
}

fn number(row: &BTreeMap<String, String>, col: &str) -> Result<f64, String> {
    row[col].parse().map_err(|_| format!("column `{col}`: `{}` is not a number", row[col]))
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let candidates = read_candidates(&args.candidates)?;
    let validated =
        ValidatedSet::new(read_pairs(&args.validated)?, &candidates).map_err(|e| CliError::input(&args.validated, e.to_string()))?;

    let (kind, input, scores, ladder, cutoff) = if let Some(path) = &args.fits {
        let rows = read_tsv(path, &["gene", "regressor", "beta"])?;
        let scores = collapse_scores(path, rows, |r| number(r, "beta"))?;
        (
            "fits",
            path,
            scores,
            args.ladder.clone().unwrap_or_else(default_threshold_ladder),
            args.cutoff.unwrap_or(0.0),
        )
    } else {
        let path = args.selection.as_ref().expect("clap requires one prediction source");
        let rows = read_tsv(path, &["gene", "regressor", "significance", "interval_low"])?;
        let scores = collapse_scores(path, rows, |r| {
            if r["interval_low"] == "NA" {
                Ok(0.0)
            } else {
                number(r, "significance")
            }
        })?;
        (
            "selection",
            path,
            scores,
            args.ladder.clone().unwrap_or_else(default_alpha_ladder),
            args.cutoff.unwrap_or(0.05),
        )
    };
    for (g, m) in scores.keys() {
        if !candidates.contains_pair(g, m) {
            return Err(CliError::input(input, format!("pair {g}/{m} is not in the candidate universe")));
        }
    }

    let roc = roc_from_scores(&scores, &candidates, &validated, &ladder).stage("evaluate")?;
    let mut table = Tsv::new(&["ladder", "fpr", "tpr"]);
    for p in &roc.points {
        table.row([p.ladder.to_string(), p.fpr.to_string(), p.tpr.to_string()]);
    }
    table.save(&args.out_dir.join("roc.tsv"))?;
    write_file(&args.out_dir.join("auc.txt"), format!("{:.4}\n", roc.partial_auc).as_bytes())?;
    let hits = count_validated_hits(&predicted_pairs(&scores, cutoff), &validated);
    write_file(&args.out_dir.join("hits.txt"), format!("{hits}\n").as_bytes())?;

    let mut manifest = RunManifest::new("evaluate", json!({ "source": kind, "ladder": ladder, "cutoff": cutoff }));
    manifest.add_input(kind, input)?;
    manifest.add_input("candidates", &args.candidates)?;
    manifest.add_input("validated", &args.validated)?;
    manifest.save(&args.out_dir)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 60)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 40)]
    pub n_genes: usize,
    #[arg(long, default_value_t = 30)]
    pub n_mirnas: usize,
    #[arg(long, default_value_t = 8)]
    pub candidates_per_gene: usize,
    #[arg(long, default_value_t = 2)]
    pub active_per_gene: usize,
    #[arg(long, default_value_t = 1.0)]
    pub effect_size: f64,
    #[arg(long, default_value_t = 0.5)]
    pub noise_sd: f64,
    #[arg(long, value_enum, default_value = "direct")]
    pub model: ModelArg,
    /// Mean Argonaute level for --model risc.
    #[arg(long, default_value_t = 3.0)]
    pub ago_baseline: f64,
    #[arg(long, default_value_t = -0.8, allow_hyphen_values = true)]
    pub ago_correlation: f64,
    #[arg(long, env = "SPARSEREG_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let spec = SyntheticSpec {
        n_samples: args.n_samples,
        n_genes: args.n_genes,
        n_mirnas: args.n_mirnas,
        candidates_per_gene: args.candidates_per_gene,
        active_per_gene: args.active_per_gene,
        effect_size: args.effect_size,
        noise_sd: args.noise_sd,
        model: args.model.resolve(),
        seed: args.seed,
        ago_baseline: args.ago_baseline,
        ago_correlation: args.ago_correlation,
    };
    let data = generate_synthetic(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let dir = &args.out_dir;
    write_expression(&dir.join("mrna.csv"), &data.mrna)?;
    write_expression(&dir.join("mirna.csv"), &data.mirna)?;
    if let Some(ago) = &data.ago {
        write_expression(&dir.join("ago.csv"), ago)?;
    }
    write_pairs(&dir.join("candidates.csv"), data.candidates.pairs())?;
    let truth: BTreeSet<&Pair> = data.truth.pairs().iter().collect();
    write_pairs(&dir.join("truth.csv"), truth.into_iter().map(|(g, m)| (g.as_str(), m.as_str())))?;

    RunManifest::new(
        "simulate",
        json!({
            "n_samples": spec.n_samples,
            "n_genes": spec.n_genes,
            "n_mirnas": spec.n_mirnas,
            "candidates_per_gene": spec.candidates_per_gene,
            "active_per_gene": spec.active_per_gene,
            "effect_size": spec.effect_size,
            "noise_sd": spec.noise_sd,
            "model": args.model.name(),
            "ago_baseline": spec.ago_baseline,
            "ago_correlation": spec.ago_correlation,
            "seed": spec.seed,
        }),
    )
    .save(dir)
}
