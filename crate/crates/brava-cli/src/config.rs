//! Pipeline configuration: a flat `key = value` text format with bracketed
//! section headers, every key overridable by a CLI flag of the same name.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use brava_core::model::Hyperparams;

/// Training-mix ablation knob.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMix {
    ScaleFreeOnly,
    HyperbolicOnly,
    Mix,
}

impl std::str::FromStr for TrainMix {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sf" => Ok(TrainMix::ScaleFreeOnly),
            "hrg" => Ok(TrainMix::HyperbolicOnly),
            "mix" => Ok(TrainMix::Mix),
            other => bail!("train_mix must be one of sf|hrg|mix, got `{other}`"),
        }
    }
}

impl std::fmt::Display for TrainMix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainMix::ScaleFreeOnly => "sf",
            TrainMix::HyperbolicOnly => "hrg",
            TrainMix::Mix => "mix",
        })
    }
}

/// Everything a pipeline run needs. Desk-scale defaults: 3 scale-free plus
/// 3 hyperbolic training graphs of 2,000 nodes, 10 epochs, 5 seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub sf_count: usize,
    pub hrg_count: usize,
    pub nodes: usize,
    pub attach_m: usize,
    pub train_mix: TrainMix,
    /// Base seed for training-graph generation.
    pub seed: u64,
    /// Optional CSV overriding the built-in (avg_degree, gamma) table.
    pub param_table: Option<PathBuf>,

    pub hyperparams: Hyperparams,

    pub epochs: usize,
    pub learning_rate: f64,
    pub pairs_per_node: usize,
    /// One independent training run per seed.
    pub seeds: Vec<u64>,

    pub workdir: PathBuf,
    pub test_graphs: Vec<PathBuf>,
    /// Whether the test-graph edge lists are directed.
    pub directed: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sf_count: 3,
            hrg_count: 3,
            nodes: 2000,
            attach_m: 4,
            train_mix: TrainMix::Mix,
            seed: 0,
            param_table: None,
            hyperparams: Hyperparams::default(),
            epochs: 10,
            learning_rate: 5e-3,
            pairs_per_node: 20,
            seeds: vec![0, 1, 2, 3, 4],
            workdir: PathBuf::from("out"),
            test_graphs: Vec::new(),
            directed: false,
        }
    }
}

impl PipelineConfig {
    /// Training-graph counts after applying the mix knob. The single-family
    /// modes keep the total count so ablations stay comparable.
    pub fn counts_for_mix(&self) -> (usize, usize) {
        let total = self.sf_count + self.hrg_count;
        match self.train_mix {
            TrainMix::Mix => (self.sf_count, self.hrg_count),
            TrainMix::ScaleFreeOnly => (total, 0),
            TrainMix::HyperbolicOnly => (0, total),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sf_count + self.hrg_count == 0 {
            bail!("config needs at least one training graph");
        }
        if self.nodes < 2 {
            bail!("training graphs need at least 2 nodes");
        }
        if self.seeds.is_empty() {
            bail!("config needs at least one training seed");
        }
        self.hyperparams
            .validate()
            .map_err(|e| anyhow!("invalid hyperparameters: {e}"))?;
        Ok(())
    }
}

/// Sections of `key = value` lines; `#` and `;` start comments.
#[derive(Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {}: unterminated section header", idx + 1))?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", idx + 1))?;
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(RawConfig { sections })
    }

    pub fn load(path: &std::path::Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(String::as_str)
    }

    fn set_parsed<T: std::str::FromStr>(&self, section: &str, key: &str, slot: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(value) = self.get(section, key) {
            *slot = value
                .parse()
                .map_err(|e| anyhow!("[{section}] {key} = {value}: {e}"))?;
        }
        Ok(())
    }

    /// Build a config starting from the defaults.
    pub fn into_pipeline_config(self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        self.set_parsed("recipe", "sf_count", &mut cfg.sf_count)?;
        self.set_parsed("recipe", "hrg_count", &mut cfg.hrg_count)?;
        self.set_parsed("recipe", "nodes", &mut cfg.nodes)?;
        self.set_parsed("recipe", "attach_m", &mut cfg.attach_m)?;
        self.set_parsed("generate", "seed", &mut cfg.seed)?;
        self.set_parsed("generate", "train_mix", &mut cfg.train_mix)?;
        if let Some(path) = self.get("generate", "param_table") {
            if !path.is_empty() {
                cfg.param_table = Some(PathBuf::from(path));
            }
        }

        self.set_parsed("model", "hop_order", &mut cfg.hyperparams.hop_order)?;
        self.set_parsed("model", "hidden", &mut cfg.hyperparams.hidden)?;
        self.set_parsed("model", "depth", &mut cfg.hyperparams.depth)?;
        self.set_parsed("model", "dropout", &mut cfg.hyperparams.dropout)?;
        self.set_parsed("model", "zero_layer_mlp", &mut cfg.hyperparams.zero_layer_mlp)?;
        if let Some(widths) = self.get("model", "mlp_widths") {
            cfg.hyperparams.mlp_hidden = parse_list(widths).context("[model] mlp_widths")?;
        }

        self.set_parsed("train", "epochs", &mut cfg.epochs)?;
        self.set_parsed("train", "learning_rate", &mut cfg.learning_rate)?;
        self.set_parsed("train", "pairs_per_node", &mut cfg.pairs_per_node)?;
        if let Some(seeds) = self.get("train", "seeds") {
            cfg.seeds = parse_list(seeds).context("[train] seeds")?;
        }

        if let Some(workdir) = self.get("paths", "workdir") {
            cfg.workdir = PathBuf::from(workdir);
        }
        if let Some(graphs) = self.get("eval", "test_graphs") {
            cfg.test_graphs = graphs
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(PathBuf::from)
                .collect();
        }
        self.set_parsed("eval", "directed", &mut cfg.directed)?;
        Ok(cfg)
    }
}

fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| anyhow!("bad list item `{s}`: {e}")))
        .collect()
}

/// CLI flags mirroring config keys; any set flag wins over the file.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub workdir: Option<PathBuf>,
    /// Base seed for training-graph generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Training seeds (comma-separated), one run per seed.
    #[arg(long, global = true, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, global = true)]
    pub sf_count: Option<usize>,
    #[arg(long, global = true)]
    pub hrg_count: Option<usize>,
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    #[arg(long, global = true)]
    pub attach_m: Option<usize>,
    #[arg(long, global = true)]
    pub train_mix: Option<String>,
    #[arg(long, global = true)]
    pub param_table: Option<PathBuf>,
    #[arg(long, global = true)]
    pub hop_order: Option<usize>,
    #[arg(long, global = true)]
    pub hidden: Option<usize>,
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub dropout: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub mlp_widths: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    #[arg(long, global = true)]
    pub pairs_per_node: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub test_graphs: Option<Vec<PathBuf>>,
    #[arg(long, global = true)]
    pub directed: Option<bool>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        macro_rules! copy {
            ($field:ident) => {
                if let Some(value) = &self.$field {
                    cfg.$field = value.clone();
                }
            };
        }
        copy!(workdir);
        copy!(seed);
        copy!(seeds);
        copy!(sf_count);
        copy!(hrg_count);
        copy!(nodes);
        copy!(attach_m);
        copy!(epochs);
        copy!(learning_rate);
        copy!(pairs_per_node);
        copy!(test_graphs);
        copy!(directed);
        if let Some(mix) = &self.train_mix {
            cfg.train_mix = mix.parse()?;
        }
        if let Some(path) = &self.param_table {
            cfg.param_table = Some(path.clone());
        }
        if let Some(v) = self.hop_order {
            cfg.hyperparams.hop_order = v;
        }
        if let Some(v) = self.hidden {
            cfg.hyperparams.hidden = v;
        }
        if let Some(v) = self.depth {
            cfg.hyperparams.depth = v;
        }
        if let Some(v) = self.dropout {
            cfg.hyperparams.dropout = v;
        }
        if let Some(v) = &self.mlp_widths {
            cfg.hyperparams.mlp_hidden = v.clone();
        }
        Ok(())
    }
}

/// Resolve the effective config: defaults, then file, then flags.
pub fn resolve_config(path: Option<&std::path::Path>, overrides: &Overrides) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(path) => RawConfig::load(path)?.into_pipeline_config()?,
        None => PipelineConfig::default(),
    };
    overrides.apply(&mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}
