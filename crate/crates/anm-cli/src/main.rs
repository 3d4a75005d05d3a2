//! `anm` — generate, evaluate, and catalogue artificial neural
//! microcircuits from the command line.
//!
//! Every run resolves its settings from defaults, then the `--config`
//! file, then command-line flags (flags win), and writes a manifest
//! alongside its outputs so any artifact can be regenerated from the
//! manifest plus the input files. Exit codes: 0 success, 1 usage error,
//! 2 input/validation error, 3 runtime failure.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand};

use anm_core::catalogue::{
    heatmap_csv, load_catalogue, load_stimulus, makeup_csv, novelty_trace_csv, over_counts_csv,
    save_catalogue, save_genome, save_ideal_responses, save_stimulus, stimulus_trace_csv,
    targeted_trace_csv, write_text, CatalogueError, RunManifest,
};
use anm_core::motif::{MotifProfile, MotifSet};
use anm_core::search::{
    evolve_targeted, optimize_stimulus, run_novelty_search, NoveltySettings, SearchError,
    StimulusOptSettings, TargetedSettings, SEPARABILITY_THRESHOLD,
};
use anm_core::sim::NeuronParams;
use anm_core::stimulus::{
    correlation_report, encode_patterns, encode_text, ideal_responses, motif_makeup, separability,
    EncodingParams, StimulusProgram,
};

use config::Config;

#[derive(Parser)]
#[command(
    name = "anm",
    version,
    about = "Generate, evaluate, and catalogue artificial neural microcircuits"
)]
struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Flat key=value configuration file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory the run writes its artifacts into (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Sample interval of the distance grid, in milliseconds.
    #[arg(long, global = true, value_name = "MS")]
    sample_dt: Option<f64>,

    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode text or byte patterns into a stimulus file.
    Encode(EncodeArgs),
    /// Run novelty search against a stimulus and write the catalogue.
    Generate(GenerateArgs),
    /// Correlation and motif-makeup reports for a catalogue.
    Analyze(AnalyzeArgs),
    /// Write the ideal response train of every pattern in a stimulus.
    Ideal(IdealArgs),
    /// Pairwise separability of a stimulus' ideal responses.
    Separability(SeparabilityArgs),
    /// Evolve a stimulus whose ideal responses are maximally separable.
    OptimizeStimulus(OptimizeArgs),
    /// Evolve a microcircuit toward the ideal response of one pattern.
    Evolve(EvolveArgs),
}

#[derive(Args)]
#[command(group = ArgGroup::new("source").required(true).args(["text", "text_file", "patterns"]))]
struct EncodeArgs {
    /// Text to encode, one character per window.
    #[arg(long)]
    text: Option<String>,

    /// File whose contents are encoded as text.
    #[arg(long, value_name = "FILE")]
    text_file: Option<PathBuf>,

    /// Comma-separated byte patterns, each in 1-255.
    #[arg(long, value_name = "LIST")]
    patterns: Option<String>,

    /// Also materialise the eight channel trains in the stimulus file.
    #[arg(long)]
    with_trains: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// Stimulus file driving the behaviour evaluations.
    #[arg(long, value_name = "FILE")]
    stimulus: PathBuf,

    /// Motif profile: initial, expanded, or expanded_no_cpg.
    #[arg(long, value_name = "PROFILE")]
    motifs: Option<String>,

    /// Population size.
    #[arg(long, value_name = "N")]
    population: Option<usize>,

    /// Number of generations.
    #[arg(long, value_name = "N")]
    generations: Option<u32>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Catalogue file to analyse.
    #[arg(long, value_name = "FILE")]
    catalogue: PathBuf,

    /// Stimulus the catalogue was generated against.
    #[arg(long, value_name = "FILE")]
    stimulus: PathBuf,
}

#[derive(Args)]
struct IdealArgs {
    /// Stimulus file.
    #[arg(long, value_name = "FILE")]
    stimulus: PathBuf,
}

#[derive(Args)]
struct SeparabilityArgs {
    /// Stimulus file.
    #[arg(long, value_name = "FILE")]
    stimulus: PathBuf,

    /// Distance at or above which a pair counts as separable.
    #[arg(long, value_name = "D")]
    threshold: Option<f64>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Population size.
    #[arg(long, value_name = "N")]
    population: Option<usize>,

    /// Number of generations.
    #[arg(long, value_name = "N")]
    generations: Option<u32>,
}

#[derive(Args)]
struct EvolveArgs {
    /// Stimulus file.
    #[arg(long, value_name = "FILE")]
    stimulus: PathBuf,

    /// Pattern whose ideal response is the target: a single character,
    /// or a decimal byte value.
    #[arg(long, value_name = "PATTERN")]
    target_pattern: String,

    /// Motif profile: initial, expanded, or expanded_no_cpg.
    #[arg(long, value_name = "PROFILE")]
    motifs: Option<String>,

    /// Population size.
    #[arg(long, value_name = "N")]
    population: Option<usize>,

    /// Number of generations.
    #[arg(long, value_name = "N")]
    generations: Option<u32>,

    /// Stop early once the best distance reaches this value.
    #[arg(long, value_name = "D")]
    goal: Option<f64>,
}

/// A failure with the exit code it maps to. Usage errors (exit 1) come
/// from the argument parser itself.
enum CliError {
    /// Exit 2: inputs or settings do not validate.
    Input(String),
    /// Exit 3: the run failed after validation.
    Runtime(String),
}

type CliResult<T> = Result<T, CliError>;

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Engine errors: settings problems are validation, the rest happen
/// mid-run.
fn search_err(e: SearchError) -> CliError {
    match e {
        SearchError::BadSettings(_) => CliError::Input(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Run-wide context resolved from defaults, config file, and flags.
struct Ctx {
    config: Config,
    seed: u64,
    sample_dt: f64,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn progress(&self, message: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", message.as_ref());
        }
    }

    /// Create the output directory and return the path of a file in it.
    fn out_file(&self, name: &str) -> CliResult<PathBuf> {
        fs::create_dir_all(&self.out).map_err(|e| {
            CliError::Runtime(format!("cannot create output directory {}: {e}", self.out.display()))
        })?;
        Ok(self.out.join(name))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    init_thread_pool()?;
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(CliError::Input)?,
        None => Config::default(),
    };
    let mut seed = 0u64;
    config.apply("seed", &mut seed).map_err(CliError::Input)?;
    let mut sample_dt = 0.5f64;
    config.apply("sample_dt", &mut sample_dt).map_err(CliError::Input)?;
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(seed),
        sample_dt: cli.sample_dt.unwrap_or(sample_dt),
        out: cli.out,
        quiet: cli.quiet,
        config,
    };
    if !(ctx.sample_dt.is_finite() && ctx.sample_dt > 0.0) {
        return Err(CliError::Input(format!("sample_dt {} must be positive", ctx.sample_dt)));
    }
    match cli.command {
        Command::Encode(args) => cmd_encode(&ctx, args),
        Command::Generate(args) => cmd_generate(&ctx, args),
        Command::Analyze(args) => cmd_analyze(&ctx, args),
        Command::Ideal(args) => cmd_ideal(&ctx, args),
        Command::Separability(args) => cmd_separability(&ctx, args),
        Command::OptimizeStimulus(args) => cmd_optimize_stimulus(&ctx, args),
        Command::Evolve(args) => cmd_evolve(&ctx, args),
    }
}

/// Size the global thread pool from ANM_THREADS when set; engine results
/// do not depend on it.
fn init_thread_pool() -> CliResult<()> {
    match std::env::var("ANM_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let threads: usize = raw
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| {
                    CliError::Input(format!("ANM_THREADS={raw} is not a positive thread count"))
                })?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| CliError::Runtime(format!("cannot size thread pool: {e}")))
        }
    }
}

/// Input-file loads are validation failures (exit 2), whatever went wrong.
fn load_input<T>(
    what: &str,
    path: &Path,
    loader: impl FnOnce(&Path) -> Result<T, CatalogueError>,
) -> CliResult<T> {
    loader(path).map_err(|e| CliError::Input(format!("cannot load {what}: {e}")))
}

fn encoding_params(ctx: &Ctx) -> CliResult<EncodingParams> {
    let mut params = EncodingParams::default();
    let c = &ctx.config;
    c.apply("window_ms", &mut params.window_ms).map_err(CliError::Input)?;
    c.apply("burst_ms", &mut params.burst_ms).map_err(CliError::Input)?;
    c.apply("spike_rate_per_ms", &mut params.spike_rate_per_ms).map_err(CliError::Input)?;
    c.apply("lsb_channel_zero", &mut params.lsb_channel_zero).map_err(CliError::Input)?;
    params.validate().map_err(input_err)?;
    Ok(params)
}

fn neuron_params(ctx: &Ctx) -> CliResult<NeuronParams> {
    let mut neuron = NeuronParams::default();
    let c = &ctx.config;
    c.apply("tau_ms", &mut neuron.tau_ms).map_err(CliError::Input)?;
    c.apply("v_threshold", &mut neuron.v_threshold).map_err(CliError::Input)?;
    c.apply("v_reset", &mut neuron.v_reset).map_err(CliError::Input)?;
    c.apply("refractory_steps", &mut neuron.refractory_steps).map_err(CliError::Input)?;
    c.apply("dt_ms", &mut neuron.dt_ms).map_err(CliError::Input)?;
    Ok(neuron)
}

fn motif_profile(ctx: &Ctx, flag: &Option<String>) -> CliResult<MotifProfile> {
    let name = match flag {
        Some(name) => Some(name.clone()),
        None => ctx.config.get::<String>("motifs").map_err(CliError::Input)?,
    };
    match name {
        None => Ok(MotifProfile::Initial),
        Some(name) => MotifProfile::from_str(&name).map_err(|_| {
            CliError::Input(format!(
                "unknown motif profile {name:?}; expected initial, expanded, or expanded_no_cpg"
            ))
        }),
    }
}

fn novelty_settings(ctx: &Ctx, args: &GenerateArgs) -> CliResult<NoveltySettings> {
    let mut s = NoveltySettings {
        neuron: neuron_params(ctx)?,
        sample_dt: ctx.sample_dt,
        seed: ctx.seed,
        ..NoveltySettings::default()
    };
    let c = &ctx.config;
    c.apply("population_size", &mut s.population_size).map_err(CliError::Input)?;
    c.apply("generations", &mut s.generations).map_err(CliError::Input)?;
    c.apply("initial_motifs", &mut s.initial_motifs).map_err(CliError::Input)?;
    c.apply("k_neighbours", &mut s.k_neighbours).map_err(CliError::Input)?;
    c.apply("threshold_initial", &mut s.threshold.initial).map_err(CliError::Input)?;
    c.apply("stagnation_gens", &mut s.threshold.stagnation_gens).map_err(CliError::Input)?;
    c.apply("burst_additions", &mut s.threshold.burst_additions).map_err(CliError::Input)?;
    c.apply("burst_window", &mut s.threshold.burst_window).map_err(CliError::Input)?;
    c.apply("lower_factor", &mut s.threshold.lower_factor).map_err(CliError::Input)?;
    c.apply("raise_factor", &mut s.threshold.raise_factor).map_err(CliError::Input)?;
    c.apply("prune_start", &mut s.pruning.prune_start).map_err(CliError::Input)?;
    c.apply("prune_end", &mut s.pruning.prune_end).map_err(CliError::Input)?;
    apply_rates(ctx, &mut s.rates)?;
    c.apply("ratio_low", &mut s.ratio_low).map_err(CliError::Input)?;
    c.apply("p_conn", &mut s.p_conn).map_err(CliError::Input)?;
    if let Some(population) = args.population {
        s.population_size = population;
    }
    if let Some(generations) = args.generations {
        s.generations = generations;
    }
    Ok(s)
}

fn apply_rates(ctx: &Ctx, rates: &mut anm_core::genome::MutationRates) -> CliResult<()> {
    let c = &ctx.config;
    c.apply("add_motif", &mut rates.add_motif).map_err(CliError::Input)?;
    c.apply("remove_motif", &mut rates.remove_motif).map_err(CliError::Input)?;
    c.apply("replace_motif", &mut rates.replace_motif).map_err(CliError::Input)?;
    c.apply("reweight_edge", &mut rates.reweight_edge).map_err(CliError::Input)?;
    c.apply("retarget_output", &mut rates.retarget_output).map_err(CliError::Input)?;
    Ok(())
}

fn targeted_settings(ctx: &Ctx, args: &EvolveArgs) -> CliResult<TargetedSettings> {
    let mut s = TargetedSettings {
        neuron: neuron_params(ctx)?,
        sample_dt: ctx.sample_dt,
        seed: ctx.seed,
        ..TargetedSettings::default()
    };
    let c = &ctx.config;
    c.apply("population_size", &mut s.population_size).map_err(CliError::Input)?;
    c.apply("generations", &mut s.generations).map_err(CliError::Input)?;
    c.apply("initial_motifs", &mut s.initial_motifs).map_err(CliError::Input)?;
    c.apply("goal", &mut s.goal).map_err(CliError::Input)?;
    apply_rates(ctx, &mut s.rates)?;
    c.apply("ratio_low", &mut s.ratio_low).map_err(CliError::Input)?;
    c.apply("p_conn", &mut s.p_conn).map_err(CliError::Input)?;
    if let Some(population) = args.population {
        s.population_size = population;
    }
    if let Some(generations) = args.generations {
        s.generations = generations;
    }
    if let Some(goal) = args.goal {
        s.goal = goal;
    }
    Ok(s)
}

fn stimopt_settings(ctx: &Ctx, args: &OptimizeArgs) -> CliResult<StimulusOptSettings> {
    let mut s = StimulusOptSettings {
        encoding: encoding_params(ctx)?,
        sample_dt: ctx.sample_dt,
        seed: ctx.seed,
        ..StimulusOptSettings::default()
    };
    let c = &ctx.config;
    c.apply("population_size", &mut s.population_size).map_err(CliError::Input)?;
    c.apply("generations", &mut s.generations).map_err(CliError::Input)?;
    c.apply("min_length", &mut s.min_length).map_err(CliError::Input)?;
    c.apply("max_length", &mut s.max_length).map_err(CliError::Input)?;
    c.apply("elite_fraction", &mut s.elite_fraction).map_err(CliError::Input)?;
    c.apply("pattern_mutation", &mut s.pattern_mutation).map_err(CliError::Input)?;
    if let Some(population) = args.population {
        s.population_size = population;
    }
    if let Some(generations) = args.generations {
        s.generations = generations;
    }
    Ok(s)
}

fn cmd_encode(ctx: &Ctx, args: EncodeArgs) -> CliResult<()> {
    let params = encoding_params(ctx)?;
    let (program, source): (StimulusProgram, &str) = if let Some(text) = &args.text {
        (encode_text(text, &params).map_err(input_err)?, "text")
    } else if let Some(path) = &args.text_file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        (encode_text(text.trim_end_matches('\n'), &params).map_err(input_err)?, "text-file")
    } else {
        let list = args.patterns.as_deref().expect("clap enforces one source");
        let patterns = list
            .split(',')
            .map(|p| p.trim().parse::<u8>())
            .collect::<Result<Vec<u8>, _>>()
            .map_err(|e| CliError::Input(format!("bad pattern list {list:?}: {e}")))?;
        (encode_patterns(&patterns, &params).map_err(input_err)?, "patterns")
    };

    let mut manifest = RunManifest::new(
        "encode",
        ctx.seed,
        &serde_json::json!({
            "params": params,
            "source": source,
            "pattern_count": program.patterns.len(),
            "with_trains": args.with_trains,
        }),
    );
    if let Some(path) = &args.text_file {
        manifest.add_input("text", path).map_err(input_err)?;
    }

    let stimulus_path = ctx.out_file("stimulus.json")?;
    save_stimulus(&program, args.with_trains, &stimulus_path).map_err(runtime_err)?;
    manifest.save(&ctx.out_file("manifest.json")?).map_err(runtime_err)?;
    ctx.progress(format!(
        "encoded {} windows over {} distinct patterns -> {}",
        program.window_count(),
        program.alphabet().len(),
        stimulus_path.display()
    ));
    Ok(())
}

fn cmd_generate(ctx: &Ctx, args: GenerateArgs) -> CliResult<()> {
    let program = load_input("stimulus", &args.stimulus, load_stimulus)?;
    let profile = motif_profile(ctx, &args.motifs)?;
    let motif_set = MotifSet::from_profile(profile);
    let settings = novelty_settings(ctx, &args)?;

    let mut manifest = RunManifest::new(
        "generate",
        ctx.seed,
        &serde_json::json!({ "engine": settings, "motifs": profile }),
    );
    manifest.add_input("stimulus", &args.stimulus).map_err(input_err)?;
    let hash = manifest.hash();

    ctx.progress(format!(
        "novelty search: population {}, {} generations, profile {:?}",
        settings.population_size, settings.generations, profile
    ));
    let archive = run_novelty_search(&settings, &program, &motif_set).map_err(search_err)?;
    ctx.progress(format!("archive holds {} entries", archive.len()));

    let catalogue_path = ctx.out_file("catalogue.json")?;
    manifest.save(&ctx.out_file("manifest.json")?).map_err(runtime_err)?;
    write_text(&ctx.out_file("novelty_trace.csv")?, &novelty_trace_csv(&archive, &hash))
        .map_err(runtime_err)?;
    save_catalogue(&archive, manifest, settings.neuron.dt_ms, &catalogue_path)
        .map_err(runtime_err)?;
    ctx.progress(format!("wrote {}", catalogue_path.display()));
    Ok(())
}

fn cmd_analyze(ctx: &Ctx, args: AnalyzeArgs) -> CliResult<()> {
    let (archive, _) = load_input("catalogue", &args.catalogue, load_catalogue)?;
    if archive.is_empty() {
        return Err(CliError::Input(format!(
            "catalogue {} contains no entries; nothing to analyze",
            args.catalogue.display()
        )));
    }
    let program = load_input("stimulus", &args.stimulus, load_stimulus)?;

    let mut manifest = RunManifest::new("analyze", ctx.seed, &serde_json::json!({}));
    manifest.add_input("catalogue", &args.catalogue).map_err(input_err)?;
    manifest.add_input("stimulus", &args.stimulus).map_err(input_err)?;
    let hash = manifest.hash();

    let mut correlation = format!("# manifest {hash}\ngenome_id,pattern,count,mean,class\n");
    for entry in &archive.entries {
        let report = correlation_report(&program, &entry.behaviour.outputs).map_err(|e| {
            CliError::Input(format!(
                "catalogue behaviours do not match the stimulus: {e}"
            ))
        })?;
        for row in &report.rows {
            correlation.push_str(&format!(
                "{},{},{},{:.6},{}\n",
                entry.genome.id, row.pattern, row.occurrences, row.mean_spikes, row.strength
            ));
        }
    }

    let genomes: Vec<_> = archive.entries.iter().map(|e| e.genome.clone()).collect();
    let makeup = motif_makeup(&genomes).map_err(runtime_err)?;

    write_text(&ctx.out_file("correlation.csv")?, &correlation).map_err(runtime_err)?;
    write_text(&ctx.out_file("makeup.csv")?, &makeup_csv(&makeup, &hash)).map_err(runtime_err)?;
    manifest.save(&ctx.out_file("manifest.json")?).map_err(runtime_err)?;
    ctx.progress(format!(
        "analyzed {} entries over {} distinct patterns",
        archive.len(),
        program.alphabet().len()
    ));
    Ok(())
}

fn cmd_ideal(ctx: &Ctx, args: IdealArgs) -> CliResult<()> {
    let program = load_input("stimulus", &args.stimulus, load_stimulus)?;
    let mut manifest = RunManifest::new("ideal", ctx.seed, &serde_json::json!({}));
    manifest.add_input("stimulus", &args.stimulus).map_err(input_err)?;

    let path = ctx.out_file("ideal_responses.json")?;
    save_ideal_responses(&program, &path).map_err(runtime_err)?;
    manifest.save(&ctx.out_file("manifest.json")?).map_err(runtime_err)?;
    ctx.progress(format!(
        "wrote {} ideal responses -> {}",
        program.alphabet().len(),
        path.display()
    ));
    Ok(())
}

fn cmd_separability(ctx: &Ctx, args: SeparabilityArgs) -> CliResult<()> {
    let program = load_input("stimulus", &args.stimulus, load_stimulus)?;
    let mut threshold = SEPARABILITY_THRESHOLD;
    ctx.config.apply("separability_threshold", &mut threshold).map_err(CliError::Input)?;
    if let Some(t) = args.threshold {
        threshold = t;
    }

    let mut manifest = RunManifest::new(
        "separability",
        ctx.seed,
        &serde_json::json!({ "threshold": threshold, "sample_dt": ctx.sample_dt }),
    );
    manifest.add_input("stimulus", &args.stimulus).map_err(input_err)?;
    let hash = manifest.hash();

    let report = separability(&program, ctx.sample_dt, threshold).map_err(runtime_err)?;
    write_text(&ctx.out_file("heatmap.csv")?, &heatmap_csv(&report, &hash))
        .map_err(runtime_err)?;
    write_text(&ctx.out_file("over_counts.csv")?, &over_counts_csv(&report, &hash))
        .map_err(runtime_err)?;
    manifest.save(&ctx.out_file("manifest.json")?).map_err(runtime_err)?;
    ctx.progress(format!(
        "{} patterns, {} pairs at or above {}",
        report.patterns.len(),
        report.pairs_over,
        threshold
    ));
    Ok(())
}

fn cmd_optimize_stimulus(ctx: &Ctx, args: OptimizeArgs) -> CliResult<()> {
    let settings = stimopt_settings(ctx, &args)?;
    let manifest = RunManifest::new("optimize-stimulus", ctx.seed, &settings);
    let hash = manifest.hash();

    ctx.progress(format!(
        "stimulus optimisation: population {}, {} generations, lengths {}..={}",
        settings.population_size, settings.generations, settings.min_length, settings.max_length
    ));
    let outcome = optimize_stimulus(&settings).map_err(search_err)?;
    ctx.progress(format!(
        "best fitness {:.6} with {} separable pairs",
        outcome.best_fitness, outcome.best_over_threshold
    ));

    save_stimulus(&outcome.best, false, &ctx.out_file("best_stimulus.json")?)
        .map_err(runtime_err)?;
    write_text(&ctx.out_file("fitness_trace.csv")?, &stimulus_trace_csv(&outcome.trace, &hash))
        .map_err(runtime_err)?;
    manifest.save(&ctx.out_file("manifest.json")?).map_err(runtime_err)?;
    Ok(())
}

fn parse_target_pattern(raw: &str) -> CliResult<u8> {
    let mut chars = raw.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if !c.is_ascii_digit() {
            let code = c as u32;
            if (1..=255).contains(&code) {
                return Ok(code as u8);
            }
            return Err(CliError::Input(format!("pattern character {c:?} is not a byte")));
        }
    }
    raw.parse::<u8>()
        .ok()
        .filter(|&p| p != 0)
        .ok_or_else(|| {
            CliError::Input(format!(
                "target pattern {raw:?} must be a single character or a byte value in 1-255"
            ))
        })
}

fn cmd_evolve(ctx: &Ctx, args: EvolveArgs) -> CliResult<()> {
    let program = load_input("stimulus", &args.stimulus, load_stimulus)?;
    let pattern = parse_target_pattern(&args.target_pattern)?;
    let ideals = ideal_responses(&program);
    let target = ideals.get(&pattern).ok_or_else(|| {
        CliError::Input(format!(
            "pattern {pattern} does not occur in the stimulus; present: {:?}",
            program.distinct_patterns()
        ))
    })?;
    let profile = motif_profile(ctx, &args.motifs)?;
    let motif_set = MotifSet::from_profile(profile);
    let settings = targeted_settings(ctx, &args)?;

    let mut manifest = RunManifest::new(
        "evolve",
        ctx.seed,
        &serde_json::json!({
            "engine": settings,
            "motifs": profile,
            "target_pattern": pattern,
        }),
    );
    manifest.add_input("stimulus", &args.stimulus).map_err(input_err)?;
    let hash = manifest.hash();

    ctx.progress(format!(
        "targeted evolution toward pattern {pattern}: population {}, {} generations",
        settings.population_size, settings.generations
    ));
    let outcome = evolve_targeted(&settings, &program, target, &motif_set).map_err(search_err)?;
    ctx.progress(format!("best distance {:.6}", outcome.best_fitness));

    save_genome(&outcome.best, Some(outcome.best_fitness), &ctx.out_file("best_genome.json")?)
        .map_err(runtime_err)?;
    write_text(&ctx.out_file("distance_trace.csv")?, &targeted_trace_csv(&outcome.trace, &hash))
        .map_err(runtime_err)?;
    manifest.save(&ctx.out_file("manifest.json")?).map_err(runtime_err)?;
    Ok(())
}
