//! Command-line workflows: detect, optimize, evaluate, synth and trace.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::audio::{load_corpus, read_wav, write_corpus};
use crate::envelope::{compute_envelope_trace, PipelineConfig, NUM_BANDS};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::peaks::detect_syllables;
use crate::pso::PsoConfig;
use crate::synth::{gen_corpus, SynthCorpusSpec};
use crate::training::{
    default_search_space, detect_clip, evaluate_corpus, train_on_set, CostKind, ParamsFile,
    TrainingSet,
};

#[derive(Debug, Parser)]
#[command(
    name = "sylrate",
    version,
    about = "Syllable nucleus detection and speech rate estimation"
)]
pub struct Cli {
    /// Pipeline configuration (TOML, or JSON with a .json extension); overrides the params file's.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads for corpus-level work (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect syllable nuclei in one WAV file.
    Detect {
        wav: PathBuf,
        #[arg(long, value_name = "PATH")]
        params: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
        /// Write here instead of standard output.
        #[arg(long, short, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Fit band weights and prominence threshold on a labelled corpus.
    Optimize {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "inv_f")]
        cost: CostKind,
        /// Swarm settings file (TOML or JSON).
        #[arg(long, value_name = "PATH")]
        pso_config: Option<PathBuf>,
        /// Train on the first N utterances after a seeded shuffle. A comma list runs a sweep.
        #[arg(long, value_name = "N", value_delimiter = ',')]
        train_size: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output params file. In a sweep each size gets `<stem>_n<size>.json`.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Convergence CSV (default: `<out stem>.trace.csv`).
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Held-out corpus evaluated after each run and added to the sweep table.
        #[arg(long, value_name = "PATH")]
        test_manifest: Option<PathBuf>,
    },
    /// Score detections against a labelled corpus.
    Evaluate {
        manifest: PathBuf,
        #[arg(long, value_name = "PATH")]
        params: PathBuf,
        /// Report path; `.json` and `.csv` files are written next to each other.
        #[arg(long, value_name = "PATH")]
        report: PathBuf,
    },
    /// Generate a synthetic labelled corpus.
    Synth {
        /// Corpus spec JSON (defaults apply to missing fields).
        #[arg(long, value_name = "PATH")]
        spec: Option<PathBuf>,
        #[arg(long, short)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Per-frame band energies, envelopes, speech flags and detections as CSV.
    Trace {
        wav: PathBuf,
        #[arg(long, value_name = "PATH")]
        params: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
}

#[derive(Debug, Serialize)]
struct NucleusRow {
    t: f64,
    value: f64,
    prominence: f64,
}

#[derive(Debug, Serialize)]
pub struct DetectionReport {
    id: String,
    count: usize,
    speech_rate_sps: f64,
    nuclei: Vec<NucleusRow>,
}

impl DetectionReport {
    pub fn new(id: &str, det: &crate::peaks::DetectionResult) -> Self {
        DetectionReport {
            id: id.to_string(),
            count: det.count,
            speech_rate_sps: det.speech_rate_sps,
            nuclei: det
                .nuclei
                .iter()
                .map(|p| NucleusRow {
                    t: p.time_s,
                    value: p.value,
                    prominence: p.prominence,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,index,t,value,prominence,count,speech_rate_sps\n");
        for (i, n) in self.nuclei.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.id, i, n.t, n.value, n.prominence, self.count, self.speech_rate_sps
            ));
        }
        s
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "utterance".into())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    path.with_file_name(format!("{}{}", file_stem(path), suffix))
}

/// Params from file, with the pipeline config optionally replaced.
fn load_params(
    path: &Path,
    config_override: Option<&PipelineConfig>,
) -> Result<(ParamsFile, PipelineConfig)> {
    let file = ParamsFile::read(path)?;
    let config = config_override
        .cloned()
        .unwrap_or_else(|| file.pipeline_config.clone());
    Ok((file, config))
}

pub fn run(cli: &Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    let config_override = cli
        .config
        .as_deref()
        .map(PipelineConfig::from_file)
        .transpose()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| dispatch(&cli.command, config_override.as_ref(), out, err))
}

fn dispatch(
    command: &Command,
    config_override: Option<&PipelineConfig>,
    out: &mut (dyn Write + Send),
    err: &mut (dyn Write + Send),
) -> Result<()> {
    match command {
        Command::Detect {
            wav,
            params,
            format,
            output,
        } => cmd_detect(
            wav,
            params,
            *format,
            output.as_deref(),
            config_override,
            out,
        ),
        Command::Optimize {
            manifest,
            cost,
            pso_config,
            train_size,
            seed,
            out: out_path,
            trace,
            test_manifest,
        } => cmd_optimize(
            &OptimizeArgs {
                manifest,
                cost: *cost,
                pso_config: pso_config.as_deref(),
                train_sizes: train_size,
                seed: *seed,
                out: out_path,
                trace: trace.as_deref(),
                test_manifest: test_manifest.as_deref(),
            },
            config_override,
            out,
        ),
        Command::Evaluate {
            manifest,
            params,
            report,
        } => cmd_evaluate(manifest, params, report, config_override, out, err),
        Command::Synth {
            spec,
            n,
            seed,
            out_dir,
        } => cmd_synth(spec.as_deref(), *n, *seed, out_dir, out),
        Command::Trace {
            wav,
            params,
            out: out_csv,
        } => cmd_trace(wav, params, out_csv, config_override),
    }
}

pub fn cmd_detect(
    wav: &Path,
    params_path: &Path,
    format: OutputFormat,
    output: Option<&Path>,
    config_override: Option<&PipelineConfig>,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    let (file, config) = load_params(params_path, config_override)?;
    let clip = read_wav(wav)?;
    let det = detect_clip(&clip, &file.params(), &config)?;
    let report = DetectionReport::new(&file_stem(wav), &det);
    let text = match format {
        OutputFormat::Json => report.to_json()?,
        OutputFormat::Csv => report.to_csv(),
    };
    match output {
        Some(path) => write_file(path, text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

pub struct OptimizeArgs<'a> {
    pub manifest: &'a Path,
    pub cost: CostKind,
    pub pso_config: Option<&'a Path>,
    pub train_sizes: &'a [usize],
    pub seed: u64,
    pub out: &'a Path,
    pub trace: Option<&'a Path>,
    pub test_manifest: Option<&'a Path>,
}

fn opt_csv(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn summary_line(label: &str, r: &EvalReport) -> String {
    format!(
        "{label}: P={:.4} R={:.4} F={:.4} MAE={:.4} SR_err={} corr={}",
        r.precision,
        r.recall,
        r.f_score,
        r.mae_count,
        r.sr_error_rate_pct
            .map(|v| format!("{v:.2}%"))
            .unwrap_or_else(|| "n/a".into()),
        r.pearson_count_corr
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into()),
    )
}

pub fn cmd_optimize(
    args: &OptimizeArgs<'_>,
    config_override: Option<&PipelineConfig>,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    let config = config_override.cloned().unwrap_or_default();
    config.validate()?;
    let mut pso = match args.pso_config {
        Some(p) => PsoConfig::from_file(p)?,
        None => PsoConfig::default(),
    };
    pso.seed = args.seed;
    let corpus = load_corpus(args.manifest)?;
    let test = args.test_manifest.map(load_corpus).transpose()?;
    let sweep = args.train_sizes.len() > 1;
    let sizes: Vec<Option<usize>> = if args.train_sizes.is_empty() {
        vec![None]
    } else {
        args.train_sizes.iter().map(|&n| Some(n)).collect()
    };

    let mut sweep_rows = String::from(
        "train_size,best_cost,iterations,train_precision,train_recall,train_f_score,train_mae_count,train_sr_error_rate_pct,train_pearson_count_corr,test_precision,test_recall,test_f_score,test_mae_count,test_sr_error_rate_pct,test_pearson_count_corr\n",
    );
    let io_out = |e| Error::io("<stdout>", e);
    for size in sizes {
        let train = match size {
            Some(n) => corpus.subsample(n, args.seed)?,
            None => corpus.clone(),
        };
        let set = TrainingSet::new(&train, &config)?;
        let (params, swarm) = train_on_set(&set, args.cost, &default_search_space(), &pso)?;

        let (params_path, trace_path) = if sweep {
            let n = train.len();
            (
                with_suffix(args.out, &format!("_n{n}.json")),
                with_suffix(args.out, &format!("_n{n}.trace.csv")),
            )
        } else {
            (
                args.out.to_path_buf(),
                args.trace
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|| with_suffix(args.out, ".trace.csv")),
            )
        };
        let mut file = ParamsFile::new(&params, &config);
        file.cost_kind = Some(args.cost);
        file.best_cost = Some(swarm.best_cost);
        file.train_size = Some(train.len());
        file.seed = Some(args.seed);
        write_file(&params_path, file.to_json()?)?;
        let mut trace = Vec::new();
        swarm
            .write_trace_csv(&mut trace)
            .map_err(|e| Error::io(&trace_path, e))?;
        write_file(&trace_path, trace)?;

        let train_report = set.evaluate(&params)?;
        writeln!(
            out,
            "cost={} train_size={} best_cost={} iterations={} params={}",
            args.cost,
            train.len(),
            swarm.best_cost,
            swarm.iterations_run,
            params_path.display()
        )
        .map_err(io_out)?;
        writeln!(out, "{}", summary_line("train", &train_report)).map_err(io_out)?;
        let test_report = match &test {
            Some(t) => {
                let r = evaluate_corpus(t, &params, &config)?;
                writeln!(out, "{}", summary_line("test", &r)).map_err(io_out)?;
                Some(r)
            }
            None => None,
        };
        let t = test_report.as_ref();
        sweep_rows.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            train.len(),
            swarm.best_cost,
            swarm.iterations_run,
            train_report.precision,
            train_report.recall,
            train_report.f_score,
            train_report.mae_count,
            opt_csv(train_report.sr_error_rate_pct),
            opt_csv(train_report.pearson_count_corr),
            opt_csv(t.map(|r| r.precision)),
            opt_csv(t.map(|r| r.recall)),
            opt_csv(t.map(|r| r.f_score)),
            opt_csv(t.map(|r| r.mae_count)),
            opt_csv(t.and_then(|r| r.sr_error_rate_pct)),
            opt_csv(t.and_then(|r| r.pearson_count_corr)),
        ));
    }
    if sweep {
        write_file(&with_suffix(args.out, "_sweep.csv"), sweep_rows)?;
    }
    Ok(())
}

/// `.json` and `.csv` paths for a report argument.
pub fn report_paths(report: &Path) -> (PathBuf, PathBuf) {
    let is_ext = |e: &str| {
        report
            .extension()
            .is_some_and(|x| x.eq_ignore_ascii_case(e))
    };
    if is_ext("json") || is_ext("csv") {
        (report.with_extension("json"), report.with_extension("csv"))
    } else {
        let name = report
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        (
            report.with_file_name(format!("{name}.json")),
            report.with_file_name(format!("{name}.csv")),
        )
    }
}

pub fn cmd_evaluate(
    manifest: &Path,
    params_path: &Path,
    report: &Path,
    config_override: Option<&PipelineConfig>,
    out: &mut (dyn Write + Send),
    err: &mut (dyn Write + Send),
) -> Result<()> {
    let (file, config) = load_params(params_path, config_override)?;
    let corpus = load_corpus(manifest)?;
    let mut rep = evaluate_corpus(&corpus, &file.params(), &config)?;
    rep.per_utterance.sort_by(|a, b| a.id.cmp(&b.id));
    write_report(&rep, report)?;
    for w in &rep.warnings {
        writeln!(err, "warning: {w}").map_err(|e| Error::io("<stderr>", e))?;
    }
    writeln!(out, "{}", summary_line("evaluate", &rep)).map_err(|e| Error::io("<stdout>", e))
}

pub fn write_report(rep: &EvalReport, report: &Path) -> Result<()> {
    let (json_path, csv_path) = report_paths(report);
    let mut json = serde_json::to_string_pretty(rep)?;
    json.push('\n');
    write_file(&json_path, json)?;
    let mut csv = Vec::new();
    rep.write_csv(&mut csv)
        .map_err(|e| Error::io(&csv_path, e))?;
    write_file(&csv_path, csv)
}

pub fn cmd_synth(
    spec_path: Option<&Path>,
    n: usize,
    seed: u64,
    out_dir: &Path,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    if n == 0 {
        return Err(Error::validation("--n must be at least 1"));
    }
    let spec = match spec_path {
        Some(p) => SynthCorpusSpec::from_file(p)?,
        None => SynthCorpusSpec::default(),
    };
    let corpus = gen_corpus(&spec, n, seed)?;
    let manifest = write_corpus(&corpus, out_dir, "manifest.json")?;
    let mut spec_json = serde_json::to_string_pretty(&spec)?;
    spec_json.push('\n');
    write_file(&out_dir.join("synth_spec.json"), spec_json)?;
    writeln!(
        out,
        "wrote {} utterances, manifest {}",
        corpus.len(),
        manifest.display()
    )
    .map_err(|e| Error::io("<stdout>", e))
}

pub fn cmd_trace(
    wav: &Path,
    params_path: &Path,
    out_csv: &Path,
    config_override: Option<&PipelineConfig>,
) -> Result<()> {
    let (file, config) = load_params(params_path, config_override)?;
    let params = file.params();
    let clip = read_wav(wav)?;
    let t = compute_envelope_trace(&clip, &params.weights, &config)?;
    let det = detect_syllables(
        &t.smoothed.values,
        &t.mask,
        params.prominence_threshold,
        t.hop_s,
        clip.duration_s(),
    );
    let mut is_nucleus = vec![false; t.smoothed.len()];
    for p in &det.nuclei {
        is_nucleus[p.frame_index] = true;
    }
    let mut s = String::from("frame_time_s");
    for b in 1..=NUM_BANDS {
        s.push_str(&format!(",log_energy_band{b}"));
    }
    s.push_str(",raw_envelope,smoothed_envelope,speech_flag,is_detected_nucleus\n");
    for (i, row) in t.matrix.values.iter().enumerate() {
        s.push_str(&format!("{}", i as f64 * t.hop_s));
        for v in row {
            s.push_str(&format!(",{v}"));
        }
        s.push_str(&format!(
            ",{},{},{},{}\n",
            t.raw.values[i], t.smoothed.values[i], t.mask.flags[i], is_nucleus[i]
        ));
    }
    write_file(out_csv, s)
}
