//! Command-line front end.
//!
//! Subcommands cover the whole pipeline: layout generation, LOS maps,
//! oracle validation, Monte-Carlo campaigns, radio maps, and statistics
//! recomputation. Exit codes: 0 success, 1 validation mismatch or runtime
//! failure, 2 usage/config error. All randomness flows from the config's
//! master seed (or `--seed`).

use clap::{Parser, Subcommand};
use isca2g::campaign::{
    aggregate, derive_rng, radio_map, run_campaign, stream, validate_gbsp_vs_rt, CampaignConfig,
    CampaignStats, RealizationResult,
};
use isca2g::environment::generate_manhattan;
use isca2g::geojson::{
    cdf_to_csv, layout_from_geojson, layout_to_geojson, radio_map_to_csv, region_to_geojson,
    FeatureCollection,
};
use isca2g::geometry::{
    building_shadow, los_map, los_probability, union_shadows, AbsState, Point2,
};
use isca2g::{environment, Error};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "isca2g", version, about = "Spatially consistent air-to-ground channel simulator")]
struct Cli {
    /// Campaign configuration file (JSON); defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed override
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Extra per-realization outputs and progress messages
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Manhattan-grid city layout and write it as GeoJSON
    GenerateEnv,
    /// Compute building shadows and the LOS map for a layout and ABS pose
    Losmap {
        /// Layout GeoJSON written by generate-env
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        abs_x: f64,
        #[arg(long)]
        abs_y: f64,
        #[arg(long, default_value_t = 120.0)]
        abs_height: f64,
    },
    /// Compare shadow-projection LOS labels against the ray-traced oracle
    Validate {
        #[arg(long, default_value_t = 100)]
        scenes: usize,
        #[arg(long, default_value_t = 10.0)]
        samples_per_meter: f64,
        /// Boundary exclusion band, meters
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        /// Test hook: flip one oracle label per scene
        #[arg(long, hide = true)]
        inject_flip: bool,
    },
    /// Run a Monte-Carlo campaign and write CDF/summary outputs
    Simulate {
        /// Override the config's realization count
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Compute a radio-map raster of channel loss
    Radiomap {
        /// Layout GeoJSON; generated from the config when omitted
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        abs_x: f64,
        #[arg(long)]
        abs_y: f64,
        #[arg(long, default_value_t = 120.0)]
        abs_height: f64,
        /// Cell size in meters; defaults to the config's grid spacing
        #[arg(long)]
        spacing: Option<f64>,
    },
    /// Recompute summary.json from a simulate results directory
    Stats {
        /// Directory holding summary.json and realizations.jsonl
        #[arg(long)]
        results: PathBuf,
    },
}

/// Top-level summary written by simulate and recomputed by stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Summary {
    config: CampaignConfig,
    stats: CampaignStats,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::InvalidEnvironment(_)
        | Error::InvalidParameters(_)
        | Error::InvalidRoute(_)
        | Error::Json(_) => 2,
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // a pre-existing global pool (tests) is fine; ignore the error
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn load_config(cli: &Cli) -> isca2g::Result<CampaignConfig> {
    let mut config = match &cli.config {
        Some(path) => CampaignConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => CampaignConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> isca2g::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn run(cli: &Cli) -> isca2g::Result<ExitCode> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::GenerateEnv => {
            let params = config.environment.resolve()?;
            let mut rng = derive_rng(config.master_seed, 0, stream::LAYOUT);
            let layout = generate_manhattan(&params, config.target_side_m, &mut rng)?;
            let mut fc = layout_to_geojson(&layout);
            fc.metadata.insert("alpha".into(), json!(params.alpha));
            fc.metadata.insert("beta".into(), json!(params.beta));
            fc.metadata.insert("gamma".into(), json!(params.gamma));
            fc.metadata.insert("environment".into(), json!(params.name));
            fc.metadata.insert("seed".into(), json!(config.master_seed));
            let path = write_file(&cli.out, "layout.geojson", &fc.to_json()?)?;
            println!("wrote {} ({} buildings)", path.display(), layout.building_count());
            Ok(ExitCode::SUCCESS)
        }
        Command::Losmap { layout, abs_x, abs_y, abs_height } => {
            let fc: FeatureCollection =
                serde_json::from_str(&std::fs::read_to_string(layout)?)?;
            let layout = layout_from_geojson(&fc)?;
            let abs = AbsState::new(Point2::new(*abs_x, *abs_y), *abs_height)?;
            let shadows = layout
                .buildings
                .iter()
                .map(|b| building_shadow(b, &abs, layout.bounds))
                .collect::<isca2g::Result<Vec<_>>>()?;
            let total = union_shadows(&shadows, layout.bounds)?;
            let outdoor = environment::outdoor_area(&layout)?;
            let los = los_map(&outdoor, &total)?;
            let (p_los, _) = los_probability(&total, &outdoor)?;
            let mut out = region_to_geojson(&total, "shadow");
            out.features.extend(region_to_geojson(&los, "los").features);
            out.metadata.insert("p_los".into(), json!(p_los));
            let path = write_file(&cli.out, "losmap.geojson", &out.to_json()?)?;
            println!("P_LOS {p_los:.4}");
            if cli.verbose {
                eprintln!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { scenes, samples_per_meter, epsilon, inject_flip } => {
            let report =
                validate_gbsp_vs_rt(&config, *scenes, *samples_per_meter, *epsilon, *inject_flip)?;
            println!(
                "scenes {} points {} excluded {} mismatches {}",
                report.scenes,
                report.points_compared,
                report.points_excluded,
                report.mismatch_count()
            );
            std::fs::create_dir_all(&cli.out)?;
            std::fs::write(
                cli.out.join("validation.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            if report.mismatch_count() == 0 {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Simulate { realizations } => {
            let mut config = config;
            if let Some(n) = realizations {
                config.realizations = *n;
            }
            let results = run_campaign(&config)?;
            write_outputs(&cli.out, &config, &results.stats)?;
            if cli.verbose {
                let mut file =
                    std::io::BufWriter::new(std::fs::File::create(cli.out.join("realizations.jsonl"))?);
                for r in &results.realizations {
                    serde_json::to_writer(&mut file, r)?;
                    file.write_all(b"\n")?;
                }
                file.flush()?;
            }
            for o in &results.stats.outage {
                println!(
                    "eirp {} dBm: outage probability {:.4}",
                    o.eirp_dbm, o.outage_probability
                );
            }
            println!("P_LOS mean {:.4}", results.stats.p_los_mean);
            Ok(ExitCode::SUCCESS)
        }
        Command::Radiomap { layout, abs_x, abs_y, abs_height, spacing } => {
            let layout = match layout {
                Some(path) => {
                    let fc: FeatureCollection =
                        serde_json::from_str(&std::fs::read_to_string(path)?)?;
                    layout_from_geojson(&fc)?
                }
                None => {
                    let params = config.environment.resolve()?;
                    let mut rng = derive_rng(config.master_seed, 0, stream::LAYOUT);
                    generate_manhattan(&params, config.target_side_m, &mut rng)?
                }
            };
            let abs = AbsState::new(Point2::new(*abs_x, *abs_y), *abs_height)?;
            let spacing = spacing.unwrap_or(config.grid_spacing_m);
            let mut rng = derive_rng(config.master_seed, 0, stream::RADIO_MAP);
            let map = radio_map(
                &layout.buildings,
                layout.bounds,
                &abs,
                spacing,
                &config.channel,
                &mut rng,
            )?;
            let path = write_file(&cli.out, "radiomap.csv", &radio_map_to_csv(&map))?;
            println!("wrote {} ({}x{} cells)", path.display(), map.width, map.height);
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { results } => {
            let summary_path = results.join("summary.json");
            let summary: Summary =
                serde_json::from_str(&std::fs::read_to_string(&summary_path)?)?;
            let jsonl_path = results.join("realizations.jsonl");
            let text = std::fs::read_to_string(&jsonl_path)?;
            let realizations: Vec<RealizationResult> = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect::<std::result::Result<_, _>>()?;
            if realizations.len() < summary.config.realizations {
                eprintln!(
                    "warning: {} of {} realizations present; summarizing the partial set",
                    realizations.len(),
                    summary.config.realizations
                );
            }
            let stats = aggregate(&summary.config, &realizations)?;
            write_outputs(&cli.out, &summary.config, &stats)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Writes the campaign CDF CSVs and summary.json.
fn write_outputs(out: &Path, config: &CampaignConfig, stats: &CampaignStats) -> isca2g::Result<()> {
    std::fs::create_dir_all(out)?;
    let env = &stats.environment;
    write_file(out, "cdf_nlos.csv", &cdf_with_env(&stats.nlos_lengths_cdf, "length_m", env))?;
    write_file(out, "cdf_los.csv", &cdf_with_env(&stats.los_lengths_cdf, "length_m", env))?;
    write_file(out, "cdf_channel.csv", &cdf_with_env(&stats.loss_cdf, "loss_db", env))?;
    let mut outage_csv = String::from("length_m,cdf,environment,eirp_dbm\n");
    for o in &stats.outage {
        for (v, p) in &o.outage_lengths_cdf {
            outage_csv.push_str(&format!("{v},{p},{env},{}\n", o.eirp_dbm));
        }
    }
    write_file(out, "cdf_outage.csv", &outage_csv)?;
    let summary = Summary { config: config.clone(), stats: stats.clone() };
    write_file(out, "summary.json", &serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn cdf_with_env(cdf: &[(f64, f64)], value_header: &str, env: &str) -> String {
    let base = cdf_to_csv(cdf, value_header);
    let mut lines = base.lines();
    let mut out = format!("{},environment\n", lines.next().unwrap_or_default());
    for line in lines {
        out.push_str(&format!("{line},{env}\n"));
    }
    out
}
