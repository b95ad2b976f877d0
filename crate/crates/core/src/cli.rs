//! The `gridcast` command line.
//!
//! Every subcommand writes its artifacts into `--out <dir>` together with a
//! `manifest.json` recording the command line, input hashes, effective
//! config and output hashes. `gridcast replay` re-runs a manifest.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::embedpath::{build_embedding_dataset, Encoder, FileEncoder, StubEncoder};
use crate::error::{Error, Result};
use crate::evalreport::{
    baseline_reports, control_model_eval, daily_max_c, detect_heatwaves, evaluate_model,
    events_csv, HeatwaveDefinition, HeatwaveMode, Provenance, RunReport,
};
use crate::fsutil;
use crate::geograph::build_graph;
use crate::griddata::{
    generate_synthetic, DataFormat, Dataset, GridDomain, SynthConfig,
};
use crate::model::{encode_checkpoint, load_checkpoint};
use crate::train::{load_run_config, log_line, Experiment, TrainConfig};

pub const MANIFEST: &str = "manifest.json";
pub const THREADS_ENV: &str = "GRIDCAST_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gridcast", version, about = "Graph forecasting of gridded 2 m temperature")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Binary,
}

impl From<FormatArg> for DataFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => DataFormat::Csv,
            FormatArg::Binary => DataFormat::Binary,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "binary")]
        format: FormatArg,
        #[arg(long, default_value_t = 12)]
        rows: usize,
        #[arg(long, default_value_t = 12)]
        cols: usize,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        stride: u32,
        /// t2m noise standard deviation in K.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Validate an extraction file and store it in canonical form.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "binary")]
        format: FormatArg,
    },
    /// Build the distance-threshold graph and write its edge list.
    BuildGraph {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write the selected checkpoint.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        stride: Option<u32>,
    },
    /// Score a checkpoint, or the random-weight control, on the test split.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, required_unless_present = "control")]
        checkpoint: Option<PathBuf>,
        /// Evaluate untrained weights drawn with the config seed.
        #[arg(long)]
        control: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        stride: Option<u32>,
    },
    /// Train and score on PCA-reduced text embeddings.
    Embed {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// GEMB1 file of precomputed vectors; the built-in stub encoder otherwise.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        stride: Option<u32>,
    },
    /// Detect heatwaves in daily-maximum t2m.
    Heatwaves {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Absolute threshold in °C.
        #[arg(long, conflicts_with = "percentile", required_unless_present = "percentile")]
        threshold: Option<f64>,
        /// Per-node percentile of the reference period.
        #[arg(long)]
        percentile: Option<f64>,
        /// Dataset for percentile thresholds; defaults to the input.
        #[arg(long, requires = "percentile")]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        min_days: usize,
    },
    /// Tabulate one or more evaluation reports.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the command recorded in a manifest into a new directory.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Arguments after the program name, `--out` included.
    pub args: Vec<String>,
    pub seed: Option<u64>,
    /// Effective run config in file syntax, when the command uses one.
    pub config: Option<String>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub gridcast_version: String,
    pub threads: usize,
}

/// Artifacts collected in memory and written only once the command succeeded.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    fn commit(self) -> Result<Vec<FileHash>> {
        let mut hashes = Vec::new();
        for (name, bytes) in &self.files {
            fsutil::write_atomic(&self.dir.join(name), bytes)?;
            hashes.push(FileHash {
                path: name.clone(),
                sha256: fsutil::sha256_hex(bytes),
            });
        }
        Ok(hashes)
    }
}

struct Run {
    inputs: Vec<FileHash>,
    config: Option<TrainConfig>,
    seed: Option<u64>,
}

impl Run {
    fn new() -> Self {
        Run {
            inputs: Vec::new(),
            config: None,
            seed: None,
        }
    }

    /// Reads and hashes an input file.
    fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fsutil::read_bytes(path)?;
        self.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256: fsutil::sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    fn dataset(&mut self, path: &Path) -> Result<(Dataset, String)> {
        let bytes = self.read(path)?;
        let hash = fsutil::sha256_hex(&bytes);
        let d = match DataFormat::from_path(path) {
            DataFormat::Csv => crate::griddata::io::parse_csv(&String::from_utf8_lossy(&bytes))?,
            DataFormat::Binary => crate::griddata::io::decode_binary(&bytes)?,
        };
        Ok((d, hash))
    }

    fn config(
        &mut self,
        path: &Path,
        seed: Option<u64>,
        stride: Option<u32>,
        threads: usize,
    ) -> Result<TrainConfig> {
        self.read(path)?;
        let mut cfg = load_run_config(path)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(s) = stride {
            cfg = cfg.with_stride(s)?;
        }
        cfg.threads = threads;
        cfg.validate()?;
        self.seed = Some(cfg.seed);
        self.config = Some(cfg.clone());
        Ok(cfg)
    }
}

/// Worker threads from `GRIDCAST_THREADS`, 1 when unset.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::config(THREADS_ENV, format!("`{v}` is not a positive integer"))),
        },
    }
}

fn check_inputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(Error::config(
                "input",
                format!("{} does not exist or is not a file", p.display()),
            ));
        }
    }
    Ok(())
}

fn out_of(cmd: &Command) -> &Path {
    match cmd {
        Command::Synth { out, .. }
        | Command::Ingest { out, .. }
        | Command::BuildGraph { out, .. }
        | Command::Train { out, .. }
        | Command::Evaluate { out, .. }
        | Command::Embed { out, .. }
        | Command::Heatwaves { out, .. }
        | Command::Report { out, .. }
        | Command::Replay { out, .. } => out,
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Synth { .. } => "synth",
        Command::Ingest { .. } => "ingest",
        Command::BuildGraph { .. } => "build-graph",
        Command::Train { .. } => "train",
        Command::Evaluate { .. } => "evaluate",
        Command::Embed { .. } => "embed",
        Command::Heatwaves { .. } => "heatwaves",
        Command::Report { .. } => "report",
        Command::Replay { .. } => "replay",
    }
}

/// Parses `args` (without the program name) and runs the command.
pub fn run(args: Vec<OsString>) -> Result<()> {
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(std::iter::once(OsString::from("gridcast")).chain(args)) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(Error::config("arguments", e.render().to_string()));
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    execute(cli.command, argv)
}

fn execute(cmd: Command, argv: Vec<String>) -> Result<()> {
    if let Command::Replay { manifest, out } = &cmd {
        return replay(manifest, out);
    }
    let threads = threads_from_env()?;
    let out_dir = out_of(&cmd).to_path_buf();
    if out_dir.is_file() {
        return Err(Error::config("out", format!("{} is a file", out_dir.display())));
    }
    let name = command_name(&cmd);
    let mut run = Run::new();
    let mut outputs = Outputs::new(&out_dir);
    match cmd {
        Command::Synth {
            seed,
            format,
            rows,
            cols,
            steps,
            stride,
            noise,
            ..
        } => {
            let mut cfg = SynthConfig::default();
            if let Some(n) = noise {
                cfg.noise_std_k = n;
            }
            run.seed = Some(seed);
            let domain = GridDomain::region_a(rows, cols)?;
            let d = generate_synthetic(&domain, steps, stride, seed, &cfg)?;
            let format: DataFormat = format.into();
            outputs.add(dataset_name(format), encode_dataset(&d, format));
        }
        Command::Ingest { input, format, .. } => {
            check_inputs(&[&input])?;
            let (d, _) = run.dataset(&input)?;
            let format: DataFormat = format.into();
            let summary = serde_json::json!({
                "n_times": d.n_times(),
                "n_nodes": d.n_nodes(),
                "variables": d.variables().iter().map(|v| v.abbreviation()).collect::<Vec<_>>(),
                "stride_hours": d.stride_hours(),
                "start": crate::griddata::io::format_timestamp(d.start()),
                "missing_values": d.missing_count(),
            });
            outputs.add(dataset_name(format), encode_dataset(&d, format));
            outputs.add("ingest.json", pretty(&summary));
        }
        Command::BuildGraph { input, config, .. } => {
            check_inputs(&[&input, &config])?;
            let cfg = run.config(&config, None, None, threads)?;
            let (d, _) = run.dataset(&input)?;
            let g = build_graph(d.domain(), cfg.dist_km)?;
            let degrees: Vec<usize> = (0..g.node_count()).map(|i| g.degree(i)).collect();
            let summary = serde_json::json!({
                "nodes": g.node_count(),
                "edges": g.edges().len(),
                "dist_km": cfg.dist_km,
                "isolated_nodes": g.isolated_nodes(),
                "min_degree": degrees.iter().min(),
                "max_degree": degrees.iter().max(),
            });
            outputs.add("graph.edges", g.to_edge_list());
            outputs.add("graph.json", pretty(&summary));
        }
        Command::Train {
            input,
            config,
            seed,
            stride,
            ..
        } => {
            check_inputs(&[&input, &config])?;
            let cfg = run.config(&config, seed, stride, threads)?;
            let (d, _) = run.dataset(&input)?;
            let ex = Experiment::prepare(&d, &cfg)?;
            let outcome = ex.train(&cfg, |e| info!("{}", log_line(e).trim_end()))?;
            outputs.add("checkpoint.gckpt", encode_checkpoint(&outcome.model, &outcome.params)?);
            outputs.add("train_log.tsv", outcome.history.to_log());
            outputs.add("config.cfg", cfg.to_cfg_text());
        }
        Command::Evaluate {
            input,
            config,
            checkpoint,
            control,
            seed,
            stride,
            ..
        } => {
            let mut needed: Vec<&Path> = vec![&input, &config];
            if !control {
                needed.extend(checkpoint.as_deref());
            }
            check_inputs(&needed)?;
            let cfg = run.config(&config, seed, stride, threads)?;
            let (d, data_hash) = run.dataset(&input)?;
            let ex = Experiment::prepare(&d, &cfg)?;
            let (model_report, ckpt_hash) = if control {
                (control_model_eval(&ex, &cfg)?, None)
            } else {
                let path = checkpoint.expect("required unless control");
                let hash = fsutil::sha256_hex(&run.read(&path)?);
                let want = cfg.model_config(ex.inputs.n_features());
                let (_, params) = load_checkpoint(&path, Some(&want))?;
                (evaluate_model(&ex, &cfg, &params, "gcn-gru")?, Some(hash))
            };
            let report = RunReport::new(
                cfg.clone(),
                model_report,
                baseline_reports(&ex, &cfg)?,
                Provenance::new(data_hash, ckpt_hash),
            );
            outputs.add("report.json", report.to_json());
            add_node_map(&mut outputs, ex.dataset.domain(), &report.model.node_mae_c)?;
        }
        Command::Embed {
            input,
            config,
            embeddings,
            seed,
            stride,
            ..
        } => {
            let mut needed: Vec<&Path> = vec![&input, &config];
            needed.extend(embeddings.as_deref());
            check_inputs(&needed)?;
            let cfg = run.config(&config, seed, stride, threads)?;
            let (d, data_hash) = run.dataset(&input)?;
            let encoder: Box<dyn Encoder> = match &embeddings {
                Some(p) => {
                    run.read(p)?;
                    Box::new(FileEncoder::load(p)?)
                }
                None => Box::new(StubEncoder::new(cfg.seed)),
            };
            let ex = Experiment::prepare(&d, &cfg)?;
            let emb = build_embedding_dataset(
                &ex.dataset,
                encoder.as_ref(),
                cfg.embed_components,
                &ex.splits,
                ex.inputs.scale(),
            )?;
            let ex = ex.with_inputs(emb.inputs)?;
            let outcome = ex.train(&cfg, |e| info!("{}", log_line(e).trim_end()))?;
            let ckpt = encode_checkpoint(&outcome.model, &outcome.params)?;
            let report = RunReport::new(
                cfg.clone(),
                evaluate_model(&ex, &cfg, &outcome.params, "embeddings (pca)")?,
                vec![control_model_eval(&ex, &cfg)?],
                Provenance::new(data_hash, Some(fsutil::sha256_hex(&ckpt))),
            );
            outputs.add("checkpoint.gckpt", ckpt);
            outputs.add("train_log.tsv", outcome.history.to_log());
            outputs.add("embedding_audit.json", pretty(&emb.audit));
            outputs.add("report.json", report.to_json());
            add_node_map(&mut outputs, ex.dataset.domain(), &report.model.node_mae_c)?;
        }
        Command::Heatwaves {
            input,
            threshold,
            percentile,
            reference,
            min_days,
            ..
        } => {
            let mut needed: Vec<&Path> = vec![&input];
            needed.extend(reference.as_deref());
            check_inputs(&needed)?;
            let (d, _) = run.dataset(&input)?;
            let (days, series) = daily_max_c(&d)?;
            let mode = match (threshold, percentile) {
                (Some(t), _) => HeatwaveMode::Absolute { threshold_c: t },
                (None, Some(p)) => HeatwaveMode::Percentile { percentile: p },
                (None, None) => unreachable!("clap requires one of them"),
            };
            let def = HeatwaveDefinition { mode, min_days };
            let ref_series = match (&mode, &reference) {
                (HeatwaveMode::Percentile { .. }, Some(p)) => Some(daily_max_c(&run.dataset(p)?.0)?.1),
                (HeatwaveMode::Percentile { .. }, None) => Some(series.clone()),
                _ => None,
            };
            let events = detect_heatwaves(&series, &def, ref_series.as_deref())?;
            info!("{} heatwave events", events.len());
            outputs.add("heatwaves.csv", events_csv(&events, &days));
        }
        Command::Report { reports, .. } => {
            let refs: Vec<&Path> = reports.iter().map(PathBuf::as_path).collect();
            check_inputs(&refs)?;
            let mut table = String::from("source\tlabel\tcontrol\tmean_mae_c");
            let mut parsed = Vec::new();
            for p in &reports {
                let r = RunReport::from_json(&String::from_utf8_lossy(&run.read(p)?))?;
                parsed.push((p.display().to_string(), r));
            }
            let horizons = parsed[0].1.model.horizons_hours.clone();
            for h in &horizons {
                table.push_str(&format!("\tmae_{h}h\trmse_{h}h"));
            }
            table.push('\n');
            for (src, r) in &parsed {
                for e in std::iter::once(&r.model).chain(&r.baselines) {
                    table.push_str(&format!("{src}\t{}\t{}\t{:.4}", e.label, e.control, e.mean_mae_c));
                    for h in &horizons {
                        match e.horizons_hours.iter().position(|x| x == h) {
                            Some(k) => table.push_str(&format!("\t{:.4}\t{:.4}", e.mae_c[k], e.rmse_c[k])),
                            None => table.push_str("\t\t"),
                        }
                    }
                    table.push('\n');
                }
            }
            outputs.add("summary.tsv", table);
        }
        Command::Replay { .. } => unreachable!("handled above"),
    }
    let produced = outputs.commit()?;
    let manifest = Manifest {
        command: name.to_string(),
        args: argv,
        seed: run.seed,
        config: run.config.as_ref().map(TrainConfig::to_cfg_text),
        inputs: run.inputs,
        outputs: produced,
        gridcast_version: env!("CARGO_PKG_VERSION").to_string(),
        threads,
    };
    fsutil::write_atomic(&out_dir.join(MANIFEST), pretty(&manifest).as_bytes())?;
    Ok(())
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn dataset_name(format: DataFormat) -> &'static str {
    match format {
        DataFormat::Csv => "dataset.csv",
        DataFormat::Binary => "dataset.gcd",
    }
}

fn encode_dataset(d: &Dataset, format: DataFormat) -> Vec<u8> {
    match format {
        DataFormat::Csv => crate::griddata::io::to_csv(d).into_bytes(),
        DataFormat::Binary => crate::griddata::io::encode_binary(d),
    }
}

fn add_node_map(outputs: &mut Outputs, domain: &GridDomain, mae: &[f64]) -> Result<()> {
    let (pgm, (lo, hi)) = crate::evalreport::node_map_pgm(domain, mae)?;
    outputs.add("node_mae.csv", crate::evalreport::node_map_csv(domain, mae)?);
    outputs.add("node_mae.pgm", pgm);
    outputs.add(
        "node_mae.scale.txt",
        format!("min_mae_c = {lo:.6}\nmax_mae_c = {hi:.6}\n"),
    );
    Ok(())
}

/// Re-runs a manifest's command with `--out` replaced, after checking that every input is unchanged.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<()> {
    let m: Manifest = serde_json::from_str(&fsutil::read_string(manifest_path)?)
        .map_err(|e| Error::format("manifest", e.to_string()))?;
    for input in &m.inputs {
        let now = fsutil::sha256_file(Path::new(&input.path))?;
        if now != input.sha256 {
            return Err(Error::config(
                "manifest",
                format!("input {} changed since the recorded run", input.path),
            ));
        }
    }
    let args = replace_out(&m.args, out)?;
    if m.command == "replay" {
        return Err(Error::config("manifest", "cannot replay a replay"));
    }
    info!("replaying `{}` into {}", m.command, out.display());
    let result = run(args.into_iter().map(OsString::from).collect());
    if result.is_err() {
        warn!("replay failed");
    }
    result
}

fn replace_out(args: &[String], out: &Path) -> Result<Vec<String>> {
    let out = out.display().to_string();
    let mut res = Vec::with_capacity(args.len());
    let mut found = false;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
            res.push(a.clone());
            res.push(out.clone());
            found = true;
        } else if a.starts_with("--out=") {
            res.push(format!("--out={out}"));
            found = true;
        } else {
            res.push(a.clone());
        }
    }
    if !found {
        return Err(Error::config("manifest", "recorded arguments have no --out"));
    }
    Ok(res)
}

/// Process exit code for a command result: 0 ok, 1 invalid input, 2 runtime failure.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_validation() => 1,
        Err(_) => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_is_replaced_in_both_spellings() {
        let a: Vec<String> = ["train", "--out", "a", "--seed", "1"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            replace_out(&a, Path::new("b")).unwrap(),
            vec!["train", "--out", "b", "--seed", "1"]
        );
        let a = vec!["synth".to_string(), "--out=x".to_string()];
        assert_eq!(replace_out(&a, Path::new("y")).unwrap(), vec!["synth", "--out=y"]);
        assert!(replace_out(&["synth".to_string()], Path::new("y")).is_err());
    }

    #[test]
    fn parses_documented_flags() {
        let cli = Cli::try_parse_from([
            "gridcast", "evaluate", "--input", "d.gcd", "--config", "c.cfg", "--out", "o", "--control",
            "--stride", "6", "--seed", "3",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::Evaluate { control: true, stride: Some(6), .. }));
        assert!(Cli::try_parse_from(["gridcast", "evaluate", "--input", "d", "--config", "c", "--out", "o"]).is_err());
    }

    #[test]
    fn usage_errors_are_validation_errors() {
        let r = run(vec!["frobnicate".into()]);
        assert_eq!(exit_code(&r), 1);
    }
}
