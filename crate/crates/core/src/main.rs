use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use frameprobe::confidence::{self, AblationRow, Feature, FeatureMask, LinearModel, TrainConfig};
use frameprobe::corpus::{self, DatasetFormat, Loaded, LineFailure};
use frameprobe::frame::{self, TokenizeOptions};
use frameprobe::oracle::{self, OracleKind, OraclePair};
use frameprobe::perturb::{self, ModeEdit, ProbProfile, SynthesisConfig};
use frameprobe::record::PredictionRecord;
use frameprobe::report::{self, Report};
use frameprobe::taxonomy::{self, BucketBy, ErrorType, OodRule};

const SCHEMA_HELP: &str = "\
File formats:
  dataset TSV    utterance<TAB>frame[<TAB>language[<TAB>domain]]
  dataset JSONL  {\"utterance\": str, \"frame\": str, \"language\"?: str, \"domain\"?: str}
  predictions    JSONL, one record per line:
                 {\"schema_version\"?: 1, \"utterance\": str, \"gold\": frame, \"pred\": frame,
                  \"token_probs\"?: [p per pred token, each in (0,1]], \"forced_pred\"?: frame,
                  \"language\"?: str, \"domain\"?: str}
  frames         [IN:LABEL opens an intent, [SL:LABEL opens a slot, ] closes,
                 any other whitespace-separated token is copied from the utterance";

#[derive(Parser)]
#[command(name = "frameprobe", version, about = "Analyze linearized semantic frames and parser predictions")]
#[command(after_help = SCHEMA_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct FrameOpts {
    /// Accept lowercase `[in:` / `[sl:` prefixes and upper-case their labels
    #[arg(long, global = true)]
    case_insensitive: bool,
}

impl FrameOpts {
    fn tokenize(self) -> TokenizeOptions {
        TokenizeOptions {
            case_insensitive: self.case_insensitive,
        }
    }
}

#[derive(Args)]
struct ReportOut {
    /// Write the JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the markdown table here instead of stdout
    #[arg(long)]
    markdown: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().step_size)]
    step_size: f64,
    #[arg(long, default_value_t = TrainConfig::default().lambda)]
    lambda: f64,
    #[arg(long, env = "FRAMEPROBE_SEED", default_value_t = 0)]
    seed: u64,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            step_size: self.step_size,
            lambda: self.lambda,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check bracket balance and schema validity of frames
    Validate {
        input: PathBuf,
        /// Input layout: one frame per line, or a dataset file
        #[arg(long, default_value = "lines", value_parser = ["lines", "tsv", "jsonl"])]
        format: String,
        #[command(flatten)]
        frame: FrameOpts,
        /// Write per-line validity reports as JSONL
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify the first error of every incorrect prediction
    Analyze {
        predictions: PathBuf,
        #[arg(long, default_value = "all", value_parser = ["language", "domain", "depth", "all"])]
        bucket_by: String,
        /// Additional out-of-domain intent labels
        #[arg(long = "ood-label")]
        ood_labels: Vec<String>,
        /// Label prefix that marks out-of-domain intents
        #[arg(long, default_value = "UNSUPPORTED")]
        ood_prefix: String,
        #[command(flatten)]
        frame: FrameOpts,
        #[command(flatten)]
        output: ReportOut,
    },
    /// Build span-oracle or structure-oracle training pairs
    Oracle {
        dataset: PathBuf,
        #[arg(long)]
        kind: OracleKind,
        #[arg(long)]
        out: PathBuf,
        /// Dataset layout; inferred from the extension when omitted
        #[arg(long)]
        dataset_format: Option<DatasetFormat>,
        /// Pair file layout
        #[arg(long, default_value = "jsonl")]
        output_format: DatasetFormat,
        #[command(flatten)]
        frame: FrameOpts,
    },
    /// Inject controlled errors into a gold dataset
    Perturb {
        dataset: PathBuf,
        /// intent, slot, ood, mode, leaf, or mixed (cycle through all five)
        #[arg(long = "type")]
        error_type: String,
        #[arg(long, env = "FRAMEPROBE_SEED", default_value_t = 0)]
        seed: u64,
        /// correct_mean,incorrect_mean,jitter
        #[arg(long, default_value = "0.9,0.6,0.02")]
        prob_profile: ProbProfile,
        /// Restrict mode errors to one edit
        #[arg(long, value_parser = ["close-to-copy", "copy-to-close", "delete-close"])]
        mode_edit: Option<String>,
        /// Probability that a record is kept correct
        #[arg(long, default_value_t = 0.0)]
        correct_fraction: f64,
        #[arg(long)]
        dataset_format: Option<DatasetFormat>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        frame: FrameOpts,
    },
    /// Train a confidence estimator on predictions
    CeTrain {
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Leave a feature out of the model
        #[arg(long)]
        drop: Vec<Feature>,
        /// Pick the F1-maximizing threshold on the training predictions
        #[arg(long)]
        tune_threshold: bool,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        frame: FrameOpts,
    },
    /// Evaluate a trained confidence estimator
    CeEval {
        predictions: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        frame: FrameOpts,
        #[command(flatten)]
        output: ReportOut,
    },
    /// Retrain with each feature removed and compare
    CeAblate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[command(flatten)]
        train_args: TrainArgs,
        #[command(flatten)]
        frame: FrameOpts,
        #[command(flatten)]
        output: ReportOut,
    },
    /// Exact match and tree validity by gold depth
    Report {
        predictions: PathBuf,
        #[command(flatten)]
        frame: FrameOpts,
        #[command(flatten)]
        output: ReportOut,
    },
}

fn warn_failures(path: &Path, failures: &[LineFailure], what: &str) {
    for f in failures {
        eprintln!("{}:{}: {what}: {}", path.display(), f.line, f.reason);
    }
}

fn load_predictions(path: &Path, opts: FrameOpts) -> Result<Loaded<PredictionRecord>> {
    let loaded = corpus::load_predictions(path, opts.tokenize())?;
    warn_failures(path, &loaded.failures, "quarantined");
    Ok(loaded)
}

fn emit(report: &Report, output: &ReportOut) -> Result<()> {
    if let Some(path) = &output.out {
        corpus::write_text(path, &report.to_json())?;
    }
    let md = report.to_markdown();
    match &output.markdown {
        Some(path) => corpus::write_text(path, &md)?,
        None => print!("{md}"),
    }
    Ok(())
}

fn validate(input: &Path, format: &str, opts: FrameOpts, out: Option<&Path>) -> Result<()> {
    let format = match format {
        "tsv" => Some(DatasetFormat::Tsv),
        "jsonl" => Some(DatasetFormat::Jsonl),
        _ => None,
    };
    let loaded = corpus::load_frame_lines(input, format)?;
    let mut valid = 0;
    let mut balanced = 0;
    let mut invalid = loaded.failures.len();
    warn_failures(input, &loaded.failures, "invalid");
    let mut lines = String::new();
    for (line, text) in &loaded.items {
        let entry = match frame::tokenize_with(text, opts.tokenize()) {
            Ok(seq) => {
                let r = frame::check_validity(&seq);
                if r.schema_valid {
                    valid += 1;
                } else {
                    invalid += 1;
                    let why = frame::parse(&seq).err().map(|e| e.to_string()).unwrap_or_default();
                    eprintln!("{}:{line}: invalid: {why}", input.display());
                }
                balanced += usize::from(r.balanced);
                serde_json::json!({ "line": line, "validity": r })
            }
            Err(e) => {
                invalid += 1;
                eprintln!("{}:{line}: invalid: {e}", input.display());
                serde_json::json!({ "line": line, "error": e.to_string() })
            }
        };
        lines.push_str(&entry.to_string());
        lines.push('\n');
    }
    if let Some(path) = out {
        corpus::write_text(path, &lines)?;
    }
    println!("{valid} valid / {invalid} invalid ({balanced} bracket-balanced)");
    Ok(())
}

fn parse_bucket(s: &str) -> BucketBy {
    s.parse().expect("clap restricts the values")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate {
            input,
            format,
            frame,
            out,
        } => validate(&input, &format, frame, out.as_deref()),

        Command::Analyze {
            predictions,
            bucket_by,
            ood_labels,
            ood_prefix,
            frame,
            output,
        } => {
            let loaded = load_predictions(&predictions, frame)?;
            let rule = OodRule {
                labels: ood_labels.into_iter().collect(),
                prefix: (!ood_prefix.is_empty()).then_some(ood_prefix),
            };
            let dists = taxonomy::aggregate(&loaded.items, parse_bucket(&bucket_by), &rule)?;
            emit(&report::report_error_distribution(&dists, loaded.failures.len()), &output)
        }

        Command::Oracle {
            dataset,
            kind,
            out,
            dataset_format,
            output_format,
            frame,
        } => {
            let format = dataset_format.unwrap_or_else(|| DatasetFormat::infer(&dataset));
            let loaded = corpus::load_dataset(&dataset, format, frame.tokenize())?;
            warn_failures(&dataset, &loaded.failures, "skipped");
            let mut pairs: Vec<OraclePair> = Vec::with_capacity(loaded.items.len());
            let mut skipped = loaded.failures.len();
            for entry in &loaded.items {
                match oracle::build_oracle(kind, &entry.utterance, &entry.frame_seq()?) {
                    Ok(pair) => pairs.push(pair),
                    Err(e) => {
                        eprintln!("{}: skipped {:?}: {e}", dataset.display(), entry.utterance);
                        skipped += 1;
                    }
                }
            }
            let body = match output_format {
                DatasetFormat::Jsonl => corpus::to_jsonl(&pairs),
                DatasetFormat::Tsv => pairs.iter().map(|p| p.to_tsv_line() + "\n").collect(),
            };
            corpus::write_text(&out, &body)?;
            let meta = serde_json::json!({
                "kind": kind,
                "format": output_format,
                "pairs": pairs.len(),
                "skipped": skipped,
                "separator": oracle::SEPARATOR,
                "marker_format": "[spanK], K = 1..N in left-to-right frame order",
                "target": "full gold frame",
                "tool_version": report::TOOL_VERSION,
            });
            let mut meta_path = out.clone().into_os_string();
            meta_path.push(".meta.json");
            corpus::write_text(Path::new(&meta_path), &(serde_json::to_string_pretty(&meta)? + "\n"))?;
            println!("{} {kind} pairs written to {} ({skipped} skipped)", pairs.len(), out.display());
            Ok(())
        }

        Command::Perturb {
            dataset,
            error_type,
            seed,
            prob_profile,
            mode_edit,
            correct_fraction,
            dataset_format,
            out,
            frame,
        } => {
            let error_type = match error_type.as_str() {
                "mixed" => None,
                other => Some(other.parse::<ErrorType>().map_err(anyhow::Error::msg)?),
            };
            if !(0.0..=1.0).contains(&correct_fraction) {
                bail!("--correct-fraction must lie in [0, 1]");
            }
            let format = dataset_format.unwrap_or_else(|| DatasetFormat::infer(&dataset));
            let loaded = corpus::load_dataset(&dataset, format, frame.tokenize())?;
            warn_failures(&dataset, &loaded.failures, "skipped");
            let frames = loaded
                .items
                .iter()
                .map(|e| e.frame_seq())
                .collect::<Result<Vec<_>, _>>()?;
            let ontology = perturb::scan_ontology(&frames, &OodRule::default())?;
            let config = SynthesisConfig {
                error_type,
                seed,
                prob_profile,
                mode_edit: mode_edit.map(|m| m.parse::<ModeEdit>().expect("clap restricts the values")),
                correct_fraction,
            };
            let synth = perturb::synthesize(&loaded.items, &ontology, &config)?;
            corpus::write_text(&out, &corpus::to_jsonl(&synth.records))?;
            println!(
                "{} records written to {} ({} not applicable)",
                synth.records.len(),
                out.display(),
                synth.skipped.len()
            );
            Ok(())
        }

        Command::CeTrain {
            predictions,
            out,
            drop,
            tune_threshold,
            train,
            frame,
        } => {
            let loaded = load_predictions(&predictions, frame)?;
            let mask = drop.iter().fold(FeatureMask::ALL, |m, f| m.without(*f));
            let examples = confidence::label_records(&loaded.items, mask)?;
            let mut model = confidence::train(&examples, &train.config())?;
            if tune_threshold {
                model.threshold = confidence::tune_threshold(&model, &examples)?;
            }
            corpus::write_text(&out, &(model.to_json() + "\n"))?;
            let positives = examples.iter().filter(|e| e.correct).count();
            println!(
                "trained on {} records ({} correct / {} incorrect), features {}, final loss {:.6}, threshold {}",
                examples.len(),
                positives,
                examples.len() - positives,
                mask,
                model.final_loss,
                model.threshold
            );
            Ok(())
        }

        Command::CeEval {
            predictions,
            model,
            frame,
            output,
        } => {
            let text = corpus::read_text(&model)?;
            let model = LinearModel::from_json(&text)
                .map_err(anyhow::Error::msg)
                .with_context(|| format!("cannot load model {}", model.display()))?;
            let loaded = load_predictions(&predictions, frame)?;
            let examples = confidence::label_records(&loaded.items, model.mask())?;
            let prf = confidence::evaluate(&model, &examples)?;
            let row = AblationRow { dropped: None, prf };
            emit(&report::report_ce(&[row], examples.len(), loaded.failures.len()), &output)
        }

        Command::CeAblate {
            train,
            test,
            train_args,
            frame,
            output,
        } => {
            let train_set = load_predictions(&train, frame)?;
            let test_set = load_predictions(&test, frame)?;
            let train_examples = confidence::label_records(&train_set.items, FeatureMask::ALL)?;
            let test_examples = confidence::label_records(&test_set.items, FeatureMask::ALL)?;
            let rows = confidence::ablate(&train_examples, &test_examples, &train_args.config())?;
            let quarantined = train_set.failures.len() + test_set.failures.len();
            let mut report = report::report_ce(&rows, test_examples.len(), quarantined);
            report
                .metadata
                .extra
                .insert("training records".to_owned(), train_examples.len().to_string());
            emit(&report, &output)
        }

        Command::Report {
            predictions,
            frame,
            output,
        } => {
            let loaded = load_predictions(&predictions, frame)?;
            emit(&report::report_em_tv_by_depth(&loaded.items, loaded.failures.len()), &output)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            if !usage {
                return ExitCode::SUCCESS;
            }
            eprintln!("\n{SCHEMA_HELP}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
