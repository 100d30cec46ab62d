use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;

use qcd_fcm::error::{Error, Result};
use qcd_fcm::eval::{classical_mds, parse_grid, run_benchmark, BenchmarkConfig, FeatureKind, Method};
use qcd_fcm::fuzzy::{cluster, delta_scan, Beta, ClusterConfig, NoiseDistance, Variant};
use qcd_fcm::qcd::{distance_matrix, qcd_features, read_features, write_features, Bandwidth, QcdConfig, QuantileLevels};
use qcd_fcm::series::{load_csv, Layout};
use qcd_fcm::simulation::{build_scenario, InnovationLaw, MtcReading, Scenario, ScenarioOptions};
use qcd_fcm::transform::{feature_matrix, pca_scores, write_pca};

#[derive(Parser)]
#[command(name = "qcdfcm", version, about = "Robust fuzzy clustering of multivariate time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract QCD feature vectors from a series CSV.
    Features {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "wide")]
        layout: Layout,
        #[arg(long, default_value = "0.1,0.5,0.9")]
        quantiles: String,
        #[arg(long, default_value = "auto")]
        bandwidth: Bandwidth,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster feature vectors (after PCA) with one of the fuzzy C-means variants.
    Cluster {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "fcm")]
        variant: String,
        #[arg(long, default_value_t = 2)]
        clusters: usize,
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        /// β value or `auto`.
        #[arg(long, default_value = "auto")]
        beta: String,
        /// Scale multiplier of the noise distance.
        #[arg(long)]
        lambda: Option<f64>,
        /// Fixed noise distance (overrides --lambda).
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, default_value_t = 0.9)]
        pca_variance: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Also write the fitted PCA model here.
        #[arg(long)]
        pca_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a benchmark scenario to `<out>/series.csv` and `<out>/truth.json`.
    Simulate {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value = "gaussian")]
        innovations: InnovationLaw,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "wide")]
        layout: Layout,
        /// `printed` (level frozen at t0) or `transitory`.
        #[arg(long, default_value = "printed")]
        mtc_reading: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo success rates over a hyperparameter grid.
    Benchmark {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 1.8)]
        m: f64,
        /// fcm, exp, noise (grid = λ), noise-delta (grid = δ) or trimmed.
        #[arg(long)]
        variant: Method,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "0:2:0.05")]
        grid: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "gaussian")]
        innovations: InnovationLaw,
        /// `qcd` or `correlation`.
        #[arg(long, default_value = "qcd")]
        feature_kind: String,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, default_value = "printed")]
        mtc_reading: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Classical two-dimensional scaling of the QCD distances.
    Mds {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Noise-cluster runs over a decreasing λ grid.
    DeltaScan {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 2)]
        clusters: usize,
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        #[arg(long, default_value = "4,2,1,0.5,0.25")]
        lambdas: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.9)]
        pca_variance: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_levels(s: &str) -> Result<QuantileLevels> {
    let levels = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad quantile level '{p}'"))))
        .collect::<Result<Vec<_>>>()?;
    QuantileLevels::new(levels)
}

fn parse_reading(s: &str) -> Result<MtcReading> {
    match s {
        "printed" => Ok(MtcReading::Printed),
        "transitory" => Ok(MtcReading::Transitory),
        _ => Err(Error::Config(format!("unknown MTC reading '{s}' (printed, transitory)"))),
    }
}

fn feature_scores(path: &Path, variance: f64) -> Result<(Vec<String>, DMatrix<f64>, qcd_fcm::transform::PcaModel)> {
    let (ids, features, _) = read_features(path)?;
    let rows: Vec<Vec<f64>> = features.iter().map(|f| f.to_flat()).collect();
    let (model, scores) = pca_scores(&feature_matrix(&rows)?, variance)?;
    Ok((ids, scores, model))
}

fn write_out(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Features { input, layout, quantiles, bandwidth, out } => {
            let dataset = load_csv(&input, layout)?;
            let config = QcdConfig { levels: parse_levels(&quantiles)?, bandwidth };
            let (features, meta) = qcd_features(&dataset, &config)?;
            let ids: Vec<String> = dataset.series().iter().map(|s| s.id().to_string()).collect();
            write_features(&out, &ids, &features, &meta)?;
            eprintln!("{} series, {} values per feature vector", ids.len(), features.first().map_or(0, |f| f.len()));
        }
        Command::Cluster {
            features,
            variant,
            clusters,
            m,
            beta,
            lambda,
            delta,
            alpha,
            seed,
            restarts,
            pca_variance,
            max_iter,
            tol,
            pca_out,
            out,
        } => {
            let variant = match variant.as_str() {
                "fcm" => Variant::Standard,
                "exp" => Variant::Exponential {
                    beta: if beta == "auto" {
                        Beta::Auto
                    } else {
                        Beta::Fixed(beta.parse().map_err(|_| Error::Config(format!("bad β '{beta}'")))?)
                    },
                },
                "noise" => Variant::Noise {
                    distance: match (delta, lambda) {
                        (Some(d), _) => NoiseDistance::Fixed(d),
                        (None, Some(l)) => NoiseDistance::Scale(l),
                        (None, None) => return Err(Error::Config("noise variant needs --lambda or --delta".into())),
                    },
                },
                "trimmed" => Variant::Trimmed {
                    alpha: alpha.ok_or_else(|| Error::Config("trimmed variant needs --alpha".into()))?,
                },
                other => return Err(Error::Config(format!("unknown variant '{other}' (fcm, exp, noise, trimmed)"))),
            };
            let (ids, scores, model) = feature_scores(&features, pca_variance)?;
            if let Some(p) = pca_out {
                write_pca(&model, p)?;
            }
            let config = ClusterConfig { clusters, fuzziness: m, max_iter, tol, seed, restarts };
            let partition = cluster(&scores, &config, &variant)?;
            let mut json = serde_json::to_value(&partition)?;
            json["series_ids"] = serde_json::to_value(&ids)?;
            json["pca_components"] = scores.ncols().into();
            write_out(&out, &serde_json::to_string_pretty(&json)?)?;
            eprintln!(
                "{} series, {} components, objective {:.6e}, {} iterations{}",
                ids.len(),
                scores.ncols(),
                partition.objective(),
                partition.iterations,
                if partition.converged { "" } else { " (not converged)" }
            );
        }
        Command::Simulate { scenario, length, innovations, seed, layout, mtc_reading, out } => {
            let options = ScenarioOptions { innovation: innovations, mtc_reading: parse_reading(&mtc_reading)? };
            let data = build_scenario(scenario, length, seed, &options)?;
            fs::create_dir_all(&out)?;
            data.write(out.join("series.csv"), layout, out.join("truth.json"))?;
            eprintln!("scenario {scenario}: {} series of length {length} in {}", data.dataset.len(), out.display());
        }
        Command::Benchmark {
            scenario,
            length,
            m,
            variant,
            grid,
            trials,
            seed,
            innovations,
            feature_kind,
            restarts,
            mtc_reading,
            out,
            curves,
        } => {
            let mut config = BenchmarkConfig::new(scenario, length, m, variant, parse_grid(&grid)?, trials, seed);
            config.innovation = innovations;
            config.restarts = restarts;
            config.mtc_reading = parse_reading(&mtc_reading)?;
            config.features = match feature_kind.as_str() {
                "qcd" => FeatureKind::Qcd,
                "correlation" => FeatureKind::Correlation,
                other => return Err(Error::Config(format!("unknown feature kind '{other}' (qcd, correlation)"))),
            };
            let report = run_benchmark(&config)?;
            write_out(&out, &serde_json::to_string_pretty(&report)?)?;
            if let Some(c) = curves {
                write_out(&c, &report.curves_csv())?;
            }
            println!(
                "scenario {scenario} T={length} m={m}: max rate {:.3}, AUC {:.4}, {} failed runs, {:.1}s",
                report.max_rate, report.auc, report.failed_runs, report.elapsed_secs
            );
        }
        Command::Mds { features, out } => {
            let (ids, features, _) = read_features(&features)?;
            let d = distance_matrix(&features)?;
            let n = d.len();
            let mds = classical_mds(&DMatrix::from_fn(n, n, |i, j| d[i][j]))?;
            let mut csv = String::from("series_id,x,y\n");
            for (i, id) in ids.iter().enumerate() {
                csv.push_str(&format!("{id},{},{}\n", mds.coords[(i, 0)], mds.coords[(i, 1)]));
            }
            write_out(&out, &csv)?;
            if let Some(w) = &mds.warning {
                eprintln!("warning: {w}");
            }
            println!("R2={:.6}", mds.r_squared);
        }
        Command::DeltaScan { features, clusters, m, lambdas, seed, pca_variance, out } => {
            let (_, scores, _) = feature_scores(&features, pca_variance)?;
            let config = ClusterConfig { clusters, fuzziness: m, seed, ..ClusterConfig::default() };
            let rows = delta_scan(&scores, &config, &parse_grid(&lambdas)?)?;
            let mut csv = String::from("lambda,delta,noise_fraction\n");
            for r in rows {
                csv.push_str(&format!("{},{},{}\n", r.lambda, r.delta, r.noise_fraction));
            }
            write_out(&out, &csv)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
