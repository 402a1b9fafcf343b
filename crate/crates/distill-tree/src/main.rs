//! Thin command-line surface over the `distill_tree` library.
//!
//! See the examples directory for programmatic usage; every subcommand here
//! is a direct wrapper around one library entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use distill_tree::builder::{build_tree, log_to_jsonl, BuildConfig, StopGate};
use distill_tree::forest::{fit_forest, ForestConfig, ForestModel};
use distill_tree::model::{ApproxTree, Dataset, Region};
use distill_tree::node_test::{test_node, DfMode, NodeTestConfig};
use distill_tree::report::{agreement, stability_audit};
use distill_tree::sampler::{draw_pseudo, SamplerConfig};
use distill_tree::sim::{gen_sim_step2, gen_sim_tree5};
use distill_tree::stabilizer::{SplitMode, StabilizerConfig};
use distill_tree::{Error, Result};

#[derive(Parser)]
#[command(name = "distill-tree", version, about = "Statistically stabilized decision-tree distillation")]
struct Cli {
    /// Base seed for all randomized steps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Optional TOML configuration file overriding built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory where outputs are written.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the subsampled random-forest teacher from a CSV dataset.
    FitTeacher(FitTeacherArgs),
    /// Distill a serialized teacher into an approximation tree.
    Distill(DistillArgs),
    /// Re-run the teacher-is-constant stopping test on every tree node.
    NodeTest(NodeTestArgs),
    /// Rebuild the tree repeatedly and report structure stability.
    Stability(StabilityArgs),
    /// Measure tree/teacher agreement on fresh pseudo points.
    Agree(AgreeArgs),
    /// Generate a simulated dataset as CSV plus sidecar schema.
    Simgen(SimgenArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Training data CSV (header row required).
    #[arg(long)]
    data: PathBuf,
    /// Sidecar schema file (key = value lines).
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args)]
struct FitTeacherArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of trees.
    #[arg(long)]
    trees: Option<usize>,
    /// Subsample size per tree.
    #[arg(long)]
    subsample: Option<usize>,
}

#[derive(Args)]
struct DistillArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Serialized teacher produced by fit-teacher.
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long, default_value_t = 5)]
    max_depth: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Adaptive)]
    mode: ModeArg,
}

#[derive(Args)]
struct NodeTestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    teacher: PathBuf,
    /// Serialized tree produced by distill.
    #[arg(long)]
    tree: PathBuf,
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long, default_value_t = 20)]
    replications: usize,
    /// Comma-separated depths to fingerprint at.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    depths: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    max_depth: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Adaptive)]
    mode: ModeArg,
}

#[derive(Args)]
struct AgreeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long)]
    tree: PathBuf,
    /// Number of fresh evaluation points drawn from the pseudo-sampler.
    #[arg(long, default_value_t = 10_000)]
    eval_n: usize,
}

#[derive(Args)]
struct SimgenArgs {
    #[arg(long, value_enum)]
    generator: GeneratorArg,
    #[arg(long, default_value_t = 1000)]
    n: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Adaptive,
    OneShot,
}

impl From<ModeArg> for SplitMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Adaptive => SplitMode::Adaptive,
            ModeArg::OneShot => SplitMode::OneShot,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorArg {
    /// Five-covariate near-tree-structured binary generator.
    Tree5,
    /// Two-covariate step generator with sign-binarized noisy response.
    Step2,
}

/// Optional TOML overrides; every field falls back to the library default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    forest: ForestFileConfig,
    #[serde(default)]
    stabilizer: StabilizerFileConfig,
    #[serde(default)]
    sampler: SamplerFileConfig,
    #[serde(default)]
    builder: BuilderFileConfig,
    #[serde(default)]
    node_test: NodeTestFileConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForestFileConfig {
    m_n: Option<usize>,
    k_n: Option<usize>,
    mtry: Option<usize>,
    min_leaf: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StabilizerFileConfig {
    alpha: Option<f64>,
    n_init: Option<usize>,
    n_ps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplerFileConfig {
    bandwidth_fraction: Option<f64>,
    jump_prob: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuilderFileConfig {
    min_support: Option<usize>,
    one_shot_multiplier: Option<f64>,
    /// Stop-gate behavior: "off", "annotate", or a threshold in (0, 1).
    stop_gate: Option<toml::Value>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeTestFileConfig {
    s: Option<usize>,
    sets: Option<usize>,
    df_mode: Option<String>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str(&text)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))
            }
        }
    }

    fn forest_config(&self, n: usize, m: usize, seed: u64) -> ForestConfig {
        let mut cfg = ForestConfig::default_for(n, m, seed);
        if let Some(v) = self.forest.m_n {
            cfg.m_n = v;
        }
        if let Some(v) = self.forest.k_n {
            cfg.k_n = v;
        }
        if let Some(v) = self.forest.mtry {
            cfg.mtry = v;
        }
        if let Some(v) = self.forest.min_leaf {
            cfg.min_leaf = v;
        }
        cfg
    }

    fn build_config(&self, max_depth: usize, mode: SplitMode, seed: u64) -> Result<BuildConfig> {
        let mut cfg = BuildConfig::new(max_depth).with_seed(seed);
        cfg.stabilizer = StabilizerConfig {
            alpha: self.stabilizer.alpha.unwrap_or(cfg.stabilizer.alpha),
            n_init: self.stabilizer.n_init.unwrap_or(cfg.stabilizer.n_init),
            n_ps: self.stabilizer.n_ps.unwrap_or(cfg.stabilizer.n_ps),
            mode,
        };
        cfg.sampler = self.sampler_config(cfg.sampler.seed);
        if let Some(v) = self.builder.min_support {
            cfg.min_support = v;
        }
        if let Some(v) = self.builder.one_shot_multiplier {
            cfg.one_shot_multiplier = v;
        }
        cfg.stop_gate = match &self.builder.stop_gate {
            None => cfg.stop_gate,
            Some(toml::Value::String(s)) if s == "off" => StopGate::Off,
            Some(toml::Value::String(s)) if s == "annotate" => StopGate::Annotate,
            Some(toml::Value::Float(t)) => StopGate::Enforce { threshold: *t },
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "stop_gate must be \"off\", \"annotate\", or a threshold, got {other}"
                )))
            }
        };
        cfg.node_test = self.node_test_config(cfg.node_test.seed)?;
        Ok(cfg)
    }

    fn sampler_config(&self, seed: u64) -> SamplerConfig {
        let mut cfg = SamplerConfig { seed, ..Default::default() };
        if let Some(v) = self.sampler.bandwidth_fraction {
            cfg.bandwidth_fraction = v;
        }
        if let Some(v) = self.sampler.jump_prob {
            cfg.jump_prob = v;
        }
        cfg
    }

    fn node_test_config(&self, seed: u64) -> Result<NodeTestConfig> {
        let mut cfg = NodeTestConfig { seed, ..Default::default() };
        if let Some(v) = self.node_test.s {
            cfg.s = v;
        }
        if let Some(v) = self.node_test.sets {
            cfg.sets = v;
        }
        cfg.df_mode = match self.node_test.df_mode.as_deref() {
            None => cfg.df_mode,
            Some("rank_adjusted") => DfMode::RankAdjusted,
            Some("paper_literal") => DfMode::PaperLiteral,
            Some(other) => {
                return Err(Error::InvalidConfig(format!("unknown df_mode {other:?}")))
            }
        };
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {e}", e.class());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out)?;
    let file_cfg = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::FitTeacher(args) => fit_teacher(cli, &file_cfg, args),
        Command::Distill(args) => distill(cli, &file_cfg, args),
        Command::NodeTest(args) => node_test(cli, &file_cfg, args),
        Command::Stability(args) => stability(cli, &file_cfg, args),
        Command::Agree(args) => agree(cli, &file_cfg, args),
        Command::Simgen(args) => simgen(cli, args),
    }
}

fn load_data(args: &DataArgs) -> Result<Dataset> {
    Dataset::from_csv(&args.data, &args.schema)
}

fn fit_teacher(cli: &Cli, file_cfg: &FileConfig, args: &FitTeacherArgs) -> Result<()> {
    let data = load_data(&args.data)?;
    let mut cfg = file_cfg.forest_config(data.n(), data.schema().len(), cli.seed);
    if let Some(t) = args.trees {
        cfg.m_n = t;
    }
    if let Some(k) = args.subsample {
        cfg.k_n = k;
    }
    let forest = fit_forest(&data, &cfg)?;
    let path = cli.out.join("teacher.json");
    forest.save(&path)?;
    println!(
        "fitted {} trees (subsample {}) on n = {}; training accuracy {:.4}",
        cfg.m_n,
        cfg.k_n,
        data.n(),
        forest.accuracy(&data)?
    );
    println!("teacher written to {}", path.display());
    Ok(())
}

fn distill(cli: &Cli, file_cfg: &FileConfig, args: &DistillArgs) -> Result<()> {
    let data = load_data(&args.data)?;
    let teacher = ForestModel::load(&args.teacher)?;
    let cfg = file_cfg.build_config(args.max_depth, args.mode.into(), cli.seed)?;
    let (tree, log) = build_tree(&data, &teacher, &cfg)?;

    let tree_path = cli.out.join("tree.json");
    std::fs::write(&tree_path, tree.to_json()?)?;
    std::fs::write(cli.out.join("tree.dot"), tree.to_dot(data.schema()))?;
    std::fs::write(cli.out.join("build_log.jsonl"), log_to_jsonl(&log)?)?;
    println!(
        "distilled tree: {} nodes, depth {}; outputs in {}",
        tree.nodes().len(),
        tree.depth(),
        cli.out.display()
    );
    Ok(())
}

fn node_test(cli: &Cli, file_cfg: &FileConfig, args: &NodeTestArgs) -> Result<()> {
    let data = load_data(&args.data)?;
    let teacher = ForestModel::load(&args.teacher)?;
    let tree = ApproxTree::from_json(&std::fs::read_to_string(&args.tree)?)?;
    let sampler = file_cfg.sampler_config(cli.seed);
    let test_cfg = file_cfg.node_test_config(cli.seed)?;

    let mut annotated = tree.clone();
    for id in 0..tree.nodes().len() {
        let node = tree.node(id);
        let channel = if tree.k() == 2 { 1 } else { node.stat.class_estimate.argmax() };
        let report = test_node(&teacher, &data, &node.region, &sampler, &test_cfg, channel)?;
        annotated.set_stop_pvalue(id, report.averaged_p);
        println!("node {id} (depth {}): averaged p = {:.4}", node.depth, report.averaged_p);
    }
    let path = cli.out.join("annotated_tree.json");
    std::fs::write(&path, annotated.to_json()?)?;
    println!("annotated tree written to {}", path.display());
    Ok(())
}

fn stability(cli: &Cli, file_cfg: &FileConfig, args: &StabilityArgs) -> Result<()> {
    let data = load_data(&args.data)?;
    let teacher = ForestModel::load(&args.teacher)?;
    let cfg = file_cfg.build_config(args.max_depth, args.mode.into(), cli.seed)?;
    let report = stability_audit(&teacher, &data, &cfg, args.replications, &args.depths)?;
    print!("{}", report.to_table());
    let path = cli.out.join("stability.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    println!("report written to {}", path.display());
    Ok(())
}

fn agree(cli: &Cli, file_cfg: &FileConfig, args: &AgreeArgs) -> Result<()> {
    let data = load_data(&args.data)?;
    let teacher = ForestModel::load(&args.teacher)?;
    let tree = ApproxTree::from_json(&std::fs::read_to_string(&args.tree)?)?;
    let sampler = file_cfg.sampler_config(cli.seed);
    let region = Region::full(data.schema());
    let points: Vec<Vec<f64>> = draw_pseudo(&data, &region, &teacher, args.eval_n, &sampler)?
        .into_iter()
        .map(|s| s.x)
        .collect();
    let report = agreement(&tree, &teacher, &points)?;
    println!(
        "class agreement {:.4}, mean L1 probability distance {:.4} over {} points",
        report.class_agreement, report.l1_prob_distance, report.evaluation_n
    );
    let path = cli.out.join("agreement.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    println!("report written to {}", path.display());
    Ok(())
}

fn simgen(cli: &Cli, args: &SimgenArgs) -> Result<()> {
    let (data, name) = match args.generator {
        GeneratorArg::Tree5 => (gen_sim_tree5(args.n, cli.seed), "tree5"),
        GeneratorArg::Step2 => (gen_sim_step2(args.n, cli.seed).0, "step2"),
    };

    let csv_path = cli.out.join(format!("{name}.csv"));
    let mut writer = csv::Writer::from_path(&csv_path)?;
    let mut header: Vec<String> =
        data.schema().columns().iter().map(|c| c.name.clone()).collect();
    header.push("label".into());
    writer.write_record(&header)?;
    let labels = data.labels().expect("generators emit labels");
    for (row, &label) in data.rows().iter().zip(labels) {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        record.push(data.class_names()[label].clone());
        writer.write_record(&record)?;
    }
    writer.flush()?;

    let schema_path = cli.out.join(format!("{name}.schema"));
    let mut sidecar = String::from("label = label\n");
    for c in data.schema().columns() {
        use std::fmt::Write as _;
        let _ = writeln!(sidecar, "column.{} = continuous(0, 1)", c.name);
    }
    std::fs::write(&schema_path, sidecar)?;
    println!("wrote {} and {}", csv_path.display(), schema_path.display());
    Ok(())
}
