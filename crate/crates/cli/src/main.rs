use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ecsgfx::bench::{self, BenchConfig, BenchScene};
use ecsgfx::gallery::{self, EXAMPLES};
use ecsgfx::gpu::Device;
use ecsgfx::{Resources, Strategy};

#[derive(Parser)]
#[command(name = "ecsgfx", version, about = "Headless ECS renderer: benchmarks and example renders")]
struct Cli {
    /// Asset directory (defaults to $ECSGFX_ASSETS or the bundled assets).
    #[arg(long, global = true)]
    assets: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the benchmark scenes offscreen and report frame rates.
    Bench(BenchArgs),
    /// List or render the example gallery.
    Examples(ExamplesArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Scene index 1-5, or `all`.
    #[arg(long, default_value = "all")]
    scene: String,
    /// `instanced`, `per-object` or `both`.
    #[arg(long, default_value = "both")]
    strategy: String,
    #[arg(long, default_value_t = 1000)]
    frames: usize,
    #[arg(long, default_value_t = 120)]
    warmup: usize,
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
    /// Write the records to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Accepted for compatibility; rendering is always offscreen.
    #[arg(long)]
    headless: bool,
}

#[derive(Args)]
struct ExamplesArgs {
    /// Print the example names and exit.
    #[arg(long)]
    list: bool,
    #[command(subcommand)]
    action: Option<ExampleAction>,
}

#[derive(Subcommand)]
enum ExampleAction {
    /// Render one example to a PNG file.
    Run {
        name: String,
        /// Output path; defaults to `<name>.png`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        size: u32,
    },
}

fn parse_scenes(arg: &str) -> Result<Vec<usize>, String> {
    if arg == "all" {
        return Ok(BenchScene::ALL.iter().map(|s| s.index).collect());
    }
    let index: usize = arg.parse().map_err(|_| format!("invalid scene `{arg}`; expected 1-5 or all"))?;
    BenchScene::get(index).map_err(|e| e.to_string())?;
    Ok(vec![index])
}

fn parse_strategies(arg: &str) -> Result<Vec<Strategy>, String> {
    if arg == "both" {
        return Ok(Strategy::BOTH.to_vec());
    }
    Strategy::parse(arg)
        .map(|s| vec![s])
        .ok_or_else(|| format!("invalid strategy `{arg}`; expected instanced, per-object or both"))
}

fn run_bench(args: BenchArgs, assets: PathBuf) -> Result<(), Box<dyn std::error::Error>> {
    let scenes = parse_scenes(&args.scene)?;
    let strategies = parse_strategies(&args.strategy)?;
    let config = BenchConfig {
        warmup: args.warmup,
        frames: args.frames,
        width: args.width,
        height: args.height,
    };
    let device = Device::new();
    let mut resources = Resources::new(&device, assets)?;
    bench::register_bench_resources(&mut resources)?;
    let records = bench::run_suite(&resources, &scenes, &strategies, &config)?;

    println!(
        "{:>5}  {:<10}  {:>6}  {:>10}  {:>9}  {:>5}  {:>8}  {:>8}",
        "scene", "strategy", "frames", "fps", "ms", "draws", "cpu MB", "gpu MB"
    );
    for r in &records {
        let gpu = r.gpu_mb.map_or_else(|| "-".to_owned(), |g| format!("{g:.2}"));
        println!(
            "{:>5}  {:<10}  {:>6}  {:>10.2}  {:>9.3}  {:>5}  {:>8.1}  {:>8}",
            r.scene, r.strategy, r.frames, r.avg_fps, r.avg_ms, r.draw_calls, r.cpu_mb, gpu
        );
    }
    if let Some(path) = args.csv {
        bench::write_csv(&records, &path)?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn run_examples(args: ExamplesArgs, assets: PathBuf) -> Result<(), Box<dyn std::error::Error>> {
    match args.action {
        None => {
            if !args.list {
                log::warn!("no example given; listing them");
            }
            for ex in EXAMPLES {
                println!("{:<16}{}", ex.name, ex.description);
            }
        }
        Some(ExampleAction::Run { name, out, size }) => {
            let device = Device::new();
            let run = gallery::run_example(&name, &device, &assets, size, size)?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("{name}.png")));
            run.image.save_png(&out)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let assets = cli.assets.unwrap_or_else(gallery::default_assets_root);
    let result = match cli.command {
        Command::Bench(args) => run_bench(args, assets),
        Command::Examples(args) => run_examples(args, assets),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
