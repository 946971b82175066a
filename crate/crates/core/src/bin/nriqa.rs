use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use nriqa::config::Config;
use nriqa::frmetrics::{MeasureKind, SimilarityMeasure};
use nriqa::harness::{
    fit_regressor, run_cross_protocol, run_protocol, score_zero_shot, DatasetManifest, FeatureModels, FeatureTable,
    ProtocolConfig, RegressorKind, RegressorModel, ZeroShotModel,
};
use nriqa::highlevel::{bootstrap_anchors, train_highlevel, AnchorPair};
use nriqa::imaging::{distort, load_image, DistortionKind, DistortionSpec, Image};
use nriqa::lowlevel::{compute_pristine_stats, load_stats, save_stats, train_lowlevel};
use nriqa::nnet::{init_encoder, load_params, save_params, EncoderConfig, EncoderParams};
use nriqa::{Error, Result};

#[derive(Parser)]
#[command(name = "nriqa", version, about = "No-reference image quality toolkit")]
struct Cli {
    /// Global seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply one synthetic distortion to an image.
    Distort {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        kind: DistortionKind,
        #[arg(long)]
        level: u8,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compute a full-reference measure for an image pair.
    Simcheck {
        #[arg(long, default_value = "fsim")]
        measure: MeasureKind,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Train the low-level encoder with the quality-aware contrastive loss.
    TrainLow {
        /// Manifest of training images (a `path` column is enough).
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        measure: Option<MeasureKind>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV of per-step losses.
        #[arg(long)]
        losses: Option<PathBuf>,
    },
    /// Compute pristine patch statistics for zero-shot scoring.
    PristineStats {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        pristine: PathBuf,
        #[arg(long)]
        patch: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tune the high-level encoder with the group-contrastive loss.
    TrainHigh(TrainHighArgs),
    /// Extract concatenated features for every manifest entry.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        low: PathBuf,
        #[arg(long)]
        high: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a regressor on a feature table with MOS.
    Fit {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        regressor: Option<RegressorKind>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Feature table to score with the fitted model.
        #[arg(long, requires = "scores")]
        predict: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Run the random-split label-budget protocol.
    Eval {
        #[arg(long)]
        features: PathBuf,
        /// Separate test table; budgets are then drawn from all of `--features`.
        #[arg(long)]
        test_features: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<usize>>,
        #[arg(long)]
        splits: Option<usize>,
        #[arg(long)]
        regressor: Option<RegressorKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label-free scores for every manifest entry.
    ScoreZs {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        low: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        high: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainHighArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, conflicts_with_all = ["bootstrap_good", "bootstrap_bad"])]
    anchors: Option<PathBuf>,
    #[arg(long, requires = "bootstrap_bad")]
    bootstrap_good: Option<PathBuf>,
    #[arg(long, requires = "bootstrap_good")]
    bootstrap_bad: Option<PathBuf>,
    /// Where to write bootstrapped anchors.
    #[arg(long)]
    anchors_out: Option<PathBuf>,
    /// Starting parameters (default: fresh initialization).
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn load_manifest_images(path: &Path) -> Result<Vec<Image>> {
    DatasetManifest::load(path)?.paths().iter().map(load_image).collect()
}

fn load_or_init(path: Option<&Path>, cfg: &EncoderConfig) -> Result<EncoderParams> {
    match path {
        Some(p) => load_params(p, cfg),
        None => init_encoder(cfg),
    }
}

fn write_csv_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let data = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(data)?;
    for r in rows {
        w.write_record(r).map_err(data)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.low.seed = cli.seed;
    cfg.low.encoder.seed = cli.seed;
    cfg.high.seed = cli.seed;
    cfg.high.encoder.seed = cli.seed;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let print_err = |e: std::io::Error| Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };

    match cli.command {
        Command::Distort {
            input,
            kind,
            level,
            output,
        } => {
            let img = load_image(&input)?;
            distort(&img, DistortionSpec::new(kind, level)?, cli.seed)?.save_png(&output)?;
        }
        Command::Simcheck {
            measure,
            reference,
            test,
        } => {
            let m = SimilarityMeasure {
                kind: measure,
                ..cfg.low.measure
            };
            let score = m.score(&load_image(&reference)?, &load_image(&test)?)?;
            writeln!(out, "measure,score,weight").map_err(print_err)?;
            writeln!(out, "{measure},{score},{}", m.to_weight(score)).map_err(print_err)?;
        }
        Command::TrainLow {
            corpus,
            measure,
            epochs,
            out: dest,
            losses,
        } => {
            if let Some(m) = measure {
                cfg.low.measure.kind = m;
            }
            if let Some(e) = epochs {
                cfg.low.epochs = e;
            }
            let images = load_manifest_images(&corpus)?;
            let result = train_lowlevel(&images, &cfg.low)?;
            save_params(&result.params, &dest)?;
            if let Some(p) = losses {
                let rows: Vec<Vec<String>> = result
                    .step_losses
                    .iter()
                    .enumerate()
                    .map(|(i, l)| vec![i.to_string(), l.to_string()])
                    .collect();
                write_csv_rows(&p, &["step", "loss"], &rows)?;
            }
            info!("wrote {}", dest.display());
        }
        Command::PristineStats {
            params,
            pristine,
            patch,
            out: dest,
        } => {
            let p = load_params(&params, &cfg.low.encoder)?;
            let images = load_manifest_images(&pristine)?;
            let side = patch.unwrap_or(cfg.zero_shot.patch_side);
            let stats = compute_pristine_stats(&p, &images, side)?;
            save_stats(&stats, &p, &dest)?;
            writeln!(out, "{} patches of side {side}", stats.count).map_err(print_err)?;
        }
        Command::TrainHigh(a) => {
            if let Some(b) = a.batch {
                cfg.high.batch = b;
            }
            if let Some(k) = a.k {
                cfg.high.k = k;
            }
            if let Some(e) = a.epochs {
                cfg.high.epochs = e;
            }
            let init = load_or_init(a.init.as_deref(), &cfg.high.encoder)?;
            let anchors = match (&a.anchors, &a.bootstrap_good, &a.bootstrap_bad) {
                (Some(p), _, _) => AnchorPair::load(p)?,
                (None, Some(g), Some(b)) => {
                    let pair =
                        bootstrap_anchors(&init, &load_manifest_images(g)?, &load_manifest_images(b)?, cfg.high.crop)?;
                    if let Some(p) = &a.anchors_out {
                        pair.save(p)?;
                    }
                    pair
                }
                _ => {
                    return Err(Error::InvalidArgument(
                        "give --anchors or both --bootstrap-good and --bootstrap-bad".into(),
                    ))
                }
            };
            let images = load_manifest_images(&a.corpus)?;
            let result = train_highlevel(init, &images, &anchors, &cfg.high)?;
            save_params(&result.params, &a.out)?;
        }
        Command::Features {
            manifest,
            low,
            high,
            out: dest,
        } => {
            let models = FeatureModels {
                low: load_params(&low, &cfg.low.encoder)?,
                high: load_params(&high, &cfg.high.encoder)?,
                patch_side: cfg.zero_shot.patch_side,
                crop: cfg.high.crop,
            };
            FeatureTable::from_manifest(&DatasetManifest::load(&manifest)?, &models)?.save(&dest)?;
        }
        Command::Fit {
            features,
            regressor,
            lambda,
            out: dest,
            predict,
            scores,
        } => {
            if let Some(k) = regressor {
                cfg.regressor.kind = k;
            }
            if let Some(l) = lambda {
                cfg.regressor.lambda = l;
            }
            let table = FeatureTable::load(&features)?;
            let model = fit_regressor(&table.features, &table.require_mos()?, &cfg.regressor)?;
            model.save(&dest)?;
            if let (Some(p), Some(s)) = (predict, scores) {
                write_predictions(&model, &FeatureTable::load(&p)?, &s)?;
            }
        }
        Command::Eval {
            features,
            test_features,
            budgets,
            splits,
            regressor,
            out: dest,
        } => {
            if let Some(k) = regressor {
                cfg.regressor.kind = k;
            }
            let pc = ProtocolConfig {
                budgets: budgets.unwrap_or(cfg.eval.budgets.clone()),
                n_splits: splits.unwrap_or(cfg.eval.splits),
                seed: cli.seed,
                regressor: cfg.regressor,
            };
            let train = FeatureTable::load(&features)?;
            let report = match test_features {
                None => run_protocol(&train.features, &train.require_mos()?, &pc)?,
                Some(t) => {
                    let test = FeatureTable::load(&t)?;
                    run_cross_protocol(
                        &train.features,
                        &train.require_mos()?,
                        &test.features,
                        &test.require_mos()?,
                        &pc,
                    )?
                }
            };
            report.save_csv(&dest)?;
            write!(out, "{}", report.to_text()).map_err(print_err)?;
        }
        Command::ScoreZs {
            manifest,
            low,
            stats,
            high,
            anchors,
            out: dest,
        } => {
            let low = load_params(&low, &cfg.low.encoder)?;
            let stats = load_stats(&stats, &low)?;
            let model = ZeroShotModel {
                low,
                stats,
                high: load_params(&high, &cfg.high.encoder)?,
                anchors: AnchorPair::load(&anchors)?,
                k1: cfg.zero_shot.k1,
                k2: cfg.high.k2,
                crop: cfg.high.crop,
            };
            let report = score_zero_shot(&DatasetManifest::load(&manifest)?, &model)?;
            report.save_csv(&dest)?;
            if let Some(s) = report.srcc {
                writeln!(out, "SRCC {s:.4}").map_err(print_err)?;
            }
        }
    }
    Ok(())
}

fn write_predictions(model: &RegressorModel, table: &FeatureTable, dest: &Path) -> Result<()> {
    let with_mos = table.mos.iter().all(Option::is_some);
    let rows = table
        .names
        .iter()
        .zip(&table.features)
        .zip(&table.mos)
        .map(|((n, f), m)| {
            let mut r = vec![n.clone(), model.predict(f)?.to_string()];
            if let (true, Some(m)) = (with_mos, m) {
                r.push(m.to_string());
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let header: &[&str] = if with_mos { &["path", "score", "mos"] } else { &["path", "score"] };
    write_csv_rows(dest, header, &rows)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
