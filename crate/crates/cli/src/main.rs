use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use wafersim::adapt::{adapt_pipeline, AdaptationConfig};
use wafersim::analysis::{
    analyze_record, histograms_csv, phase_sweep, rates_csv, write_sweep_csv, AnalysisConfig,
    SweepConfig,
};
use wafersim::bench::{reference_table, throughput_metrics};
use wafersim::hardware::{build_wafer, capacity_report, WaferConfig};
use wafersim::mapper::{apply_loss, map_network, mapping_report, MappingResult};
use wafersim::models::ExternalDrive;
use wafersim::network::{read_network, write_network, NetworkSpec};
use wafersim::pipeline::{run_pipeline, ModelConfig, PipelineConfig};
use wafersim::sim::{
    read_spikes_binary, read_spikes_csv, simulate, write_spikes_binary, write_spikes_csv,
    write_traces_csv, SimulationConfig,
};

#[derive(Parser)]
#[command(name = "wafersim", version, about = "Wafer-scale neuromorphic workflow on a desk machine")]
struct Cli {
    /// Master seed; overrides seeds in the config document.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON document with sections model, adaptation, topology,
    /// simulation, analysis, sweep.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Brunel,
    Microcircuit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Identity,
    Brunel,
    Microcircuit,
}

#[derive(Subcommand)]
enum Command {
    /// Build a model network.
    Build {
        model: Model,
        #[arg(long)]
        g: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        /// Neuron-count factor for the microcircuit.
        #[arg(long)]
        scale: Option<f64>,
        /// Draw the connectivity now instead of leaving it probabilistic.
        #[arg(long)]
        sample: bool,
    },
    /// Apply the hardware adaptation steps to a network file.
    Adapt {
        spec: PathBuf,
        /// Used when the config has no adaptation section.
        #[arg(long, value_enum, default_value = "identity")]
        preset: Preset,
    },
    /// Place and route a network on the wafer.
    Map {
        spec: PathBuf,
        /// Also write the network with lost synapses removed.
        #[arg(long)]
        apply_loss: bool,
    },
    /// Run the LIF simulation.
    Simulate {
        spec: PathBuf,
        /// Remove the synapses this mapping could not route first.
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Biological time (ms).
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Rates, CVs, synchrony and regime of a spike file (.csv or .bin).
    Analyze {
        spikes: PathBuf,
        #[arg(long)]
        warmup: Option<f64>,
    },
    /// (g, eta) phase sweep of the balanced random network.
    Sweep {
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Map every cell with the default wafer.
        #[arg(long)]
        map: bool,
    },
    /// Measure synaptic events per second on a Brunel cell.
    Bench {
        #[arg(long, default_value_t = 6.0)]
        g: f64,
        #[arg(long, default_value_t = 4.0)]
        eta: f64,
        #[arg(long, default_value_t = 1000.0)]
        duration: f64,
        /// Only print the reference table.
        #[arg(long)]
        table: bool,
    },
    /// Wafer resources, optionally against a network.
    Wafer {
        #[command(subcommand)]
        command: WaferCommand,
    },
    /// Whole pipeline from the config document.
    Run {
        #[arg(long, value_enum)]
        preset: Option<Model>,
    },
}

#[derive(Subcommand)]
enum WaferCommand {
    Report {
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

/// The optional config document, split into sections on demand.
struct Doc(Value);

impl Doc {
    fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Doc(Value::Null)),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(Doc(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?))
            }
        }
    }

    fn section<T: serde::de::DeserializeOwned>(&self, name: &str) -> anyhow::Result<Option<T>> {
        match self.0.get(name) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => Ok(Some(
                serde_json::from_value(v.clone()).with_context(|| format!("config section `{name}`"))?,
            )),
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_vec_pretty(v)?).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load_spec(path: &Path) -> anyhow::Result<NetworkSpec> {
    read_network(path).with_context(|| format!("reading network {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let doc = Doc::load(cli.config.as_deref())?;
    let out = &cli.out_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let seed_or = |s: u64| cli.seed.unwrap_or(s);

    match cli.command {
        Command::Build {
            model,
            g,
            eta,
            scale,
            sample,
        } => {
            let mut m = match (doc.section::<ModelConfig>("model")?, model) {
                (Some(m @ ModelConfig::Brunel(_)), Model::Brunel) => m,
                (Some(m @ ModelConfig::Microcircuit { .. }), Model::Microcircuit) => m,
                (_, Model::Brunel) => ModelConfig::Brunel(Default::default()),
                (_, Model::Microcircuit) => ModelConfig::Microcircuit {
                    scale: 1.0,
                    external: ExternalDrive::Poisson,
                    map_file: None,
                },
            };
            match &mut m {
                ModelConfig::Brunel(p) => {
                    p.g = g.unwrap_or(p.g);
                    p.eta = eta.unwrap_or(p.eta);
                }
                ModelConfig::Microcircuit { scale: s, .. } => *s = scale.unwrap_or(*s),
            }
            let mut spec = m.build(seed_or(0))?;
            if sample {
                spec.sample()?;
            }
            let path = out.join("network.json");
            write_network(&path, &spec)?;
            println!("wrote {} ({} neurons)", path.display(), spec.total_neurons());
        }
        Command::Adapt { spec, preset } => {
            let input = load_spec(&spec)?;
            let mut config = match doc.section::<AdaptationConfig>("adaptation")? {
                Some(c) => c,
                None => match preset {
                    Preset::Identity => AdaptationConfig::identity(0),
                    Preset::Brunel => AdaptationConfig::brunel_hardware(0),
                    Preset::Microcircuit => AdaptationConfig::microcircuit_hardware(0),
                },
            };
            config.seed = seed_or(config.seed);
            let (adapted, report) = adapt_pipeline(&input, &config)?;
            let path = out.join("adapted.json");
            write_network(&path, &adapted)?;
            println!("wrote {}", path.display());
            write_json(&out.join("adaptation_report.json"), &report)?;
            fs::write(out.join("adaptation_report.txt"), report.to_text())?;
            print!("{}", report.to_text());
        }
        Command::Map { spec, apply_loss: prune } => {
            let mut input = load_spec(&spec)?;
            if !input.is_sampled() {
                input.sample()?;
            }
            let wafer = doc.section::<WaferConfig>("topology")?.unwrap_or_default();
            let topology = build_wafer(&wafer)?;
            let result = map_network(&input, &topology, seed_or(input.seed))?;
            write_json(&out.join("mapping.json"), &result)?;
            write_json(&out.join("mapping_report.json"), &mapping_report(&result, &topology))?;
            println!(
                "synapses: requested {} realized {} lost {} ({:.2}%)",
                result.requested(),
                result.realized(),
                result.lost(),
                100.0 * result.loss_fraction()
            );
            if prune {
                let path = out.join("mapped.json");
                write_network(&path, &apply_loss(&input, &result)?)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Simulate {
            spec,
            mapping,
            duration,
            dt,
        } => {
            let mut input = load_spec(&spec)?;
            if let Some(m) = mapping {
                let text = fs::read(&m).with_context(|| format!("reading {}", m.display()))?;
                let result: MappingResult = serde_json::from_slice(&text)?;
                input = apply_loss(&input, &result)?;
            }
            if !input.is_sampled() {
                input.sample()?;
            }
            let mut config = doc.section::<SimulationConfig>("simulation")?.unwrap_or_default();
            config.seed = seed_or(config.seed);
            config.duration = duration.unwrap_or(config.duration);
            config.dt = dt.unwrap_or(config.dt);
            let record = simulate(&input, &config)?;
            write_spikes_csv(&out.join("spikes.csv"), &record)?;
            write_spikes_binary(&out.join("spikes.bin"), &record)?;
            if !record.traces.is_empty() {
                write_traces_csv(&out.join("traces.csv"), &record.traces, record.dt)?;
            }
            println!(
                "{} spikes, {} deliveries in {:.3} s wall; wrote spikes.csv, spikes.bin",
                record.spike_count(),
                record.deliveries,
                record.wall_time
            );
        }
        Command::Analyze { spikes, warmup } => {
            let record = match spikes.extension().and_then(|e| e.to_str()) {
                Some("bin") => read_spikes_binary(&spikes)?,
                _ => read_spikes_csv(&spikes)?,
            };
            let mut config = doc.section::<AnalysisConfig>("analysis")?.unwrap_or_default();
            config.warmup = warmup.unwrap_or(config.warmup);
            let analysis = analyze_record(&record, &config)?;
            write_json(&out.join("analysis.json"), &analysis)?;
            fs::write(out.join("rates.csv"), rates_csv(&record, &analysis.rates))?;
            fs::write(out.join("histograms.csv"), histograms_csv(&analysis.histograms))?;
            for p in &analysis.rates.populations {
                println!("{:<8} {:>8.2} Hz", p.population, p.mean);
            }
            println!("regime: {}", analysis.regime);
        }
        Command::Sweep { duration, repeats, map } => {
            let mut config = match doc.section::<SweepConfig>("sweep")? {
                Some(c) => c,
                None => SweepConfig::default(),
            };
            config.seed = seed_or(config.seed);
            config.simulation.duration = duration.unwrap_or(config.simulation.duration);
            config.repeats = repeats.unwrap_or(config.repeats);
            if map && config.wafer.is_none() {
                config.wafer = Some(WaferConfig::default());
            }
            let grid = phase_sweep(&config)?;
            let csv = write_sweep_csv(&grid);
            fs::write(out.join("sweep.csv"), &csv)?;
            write_json(&out.join("sweep.json"), &grid)?;
            print!("{csv}");
        }
        Command::Bench {
            g,
            eta,
            duration,
            table,
        } => {
            if table {
                print!("{}", reference_table().to_text());
                return Ok(());
            }
            let mut config = PipelineConfig::brunel(g, eta, seed_or(0));
            config.simulation.duration = duration;
            config.write_network = false;
            let outcome = run_pipeline(&config, out)?;
            let report = throughput_metrics(&outcome.record)?;
            print!("{}", report.to_text());
        }
        Command::Wafer {
            command: WaferCommand::Report { spec },
        } => {
            let wafer = doc.section::<WaferConfig>("topology")?.unwrap_or_default();
            let topology = build_wafer(&wafer)?;
            let spec = match spec {
                Some(p) => load_spec(&p)?,
                None => NetworkSpec::new(0),
            };
            let report = capacity_report(&topology, &spec)?;
            write_json(&out.join("capacity_report.json"), &report)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Run { preset } => {
            let mut config = match (&cli.config, preset) {
                (_, Some(Model::Brunel)) => PipelineConfig::brunel(6.0, 4.0, 0),
                (_, Some(Model::Microcircuit)) => PipelineConfig::microcircuit(0),
                (Some(p), None) => PipelineConfig::from_file(p)?,
                (None, None) => bail!("run needs --config or --preset"),
            };
            config.seed = seed_or(config.seed);
            let outcome = run_pipeline(&config, out)?;
            match outcome.cache_hit {
                Some(true) => println!("mapping: cache hit"),
                Some(false) => println!("mapping: computed"),
                None => {}
            }
            for (stage, hash) in &outcome.stage_hashes {
                println!("{stage:<10} {}", &hash[..16]);
            }
            println!("regime: {}", outcome.analysis.regime);
            println!("results in {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<wafersim::Error>())
                .map_or(1, |e| e.exit_code());
            ExitCode::from(code as u8)
        }
    }
}
