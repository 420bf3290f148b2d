mod ingest;
mod run;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use epsraster::{Aggregate, AttrFilter, JoinOptions, RasterMode};
use ingest::{Inputs, PointOptions};
use run::{BenchSpec, Engine, IndexBuild, QuerySpec};
use std::path::PathBuf;

/// Distance-bounded approximate spatial aggregation.
///
/// Log level comes from the EPSRASTER_LOG environment variable
/// (error, warn, info, debug, trace); default is warn.
#[derive(Parser, Debug)]
#[command(name = "epsraster", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Read and normalize inputs; print a summary with rejected records.
    Ingest {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump region coverings as `region_id level code I|B` lines.
    Rasterize {
        #[command(flatten)]
        input: InputArgs,
        /// Distance bound in input units.
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Conservative)]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the boundary mask of all regions as a PGM image.
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Point index operations.
    Index {
        #[command(subcommand)]
        cmd: IndexCmd,
    },
    /// Aggregate per region using a saved point index.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        regions: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate points per region with one or more engines.
    Join {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "act")]
        engine: Vec<EngineArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time engines and audit their answers against exact point-in-polygon
    /// counts. Without input files a seeded synthetic workload is used.
    Bench {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
        engine: Vec<EngineArg>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Synthetic workload size.
        #[arg(long, default_value_t = 100_000)]
        n_points: usize,
        #[arg(long, default_value_t = 20)]
        n_regions: usize,
        /// Write null timings, making the output byte-identical across runs.
        #[arg(long)]
        no_timings: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that every misclassified point lies within the bound, and
    /// optionally the spline error of a saved index.
    Audit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert JSON-lines output (join, query, bench, audit) to CSV.
    ExportCsv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum IndexCmd {
    /// Sort points by Z-order code and write prefix sums and a spline.
    Build {
        #[command(flatten)]
        input: InputArgs,
        /// Distance bound in input units; sets the index level.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Explicit index level (overrides --epsilon).
        #[arg(long)]
        level: Option<u8>,
        /// Attributes to keep SUM prefixes for.
        #[arg(long = "sum", value_delimiter = ',')]
        sums: Vec<String>,
        #[arg(long)]
        filter: Option<AttrFilter>,
        #[arg(long, default_value_t = epsraster::pointindex::DEFAULT_RADIX_BITS)]
        radix_bits: u8,
        #[arg(long, default_value_t = epsraster::pointindex::DEFAULT_MAX_ERROR)]
        max_error: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Points CSV with a header row.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Regions as GeoJSON, or WKT with one polygon per line.
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Location columns (default: x/lon/lng/longitude and y/lat/latitude).
    #[arg(long)]
    x_col: Option<String>,
    #[arg(long)]
    y_col: Option<String>,
    /// Attribute columns (default: every fully numeric column).
    #[arg(long, value_delimiter = ',')]
    attrs: Vec<String>,
}

impl InputArgs {
    fn inputs(&self) -> Inputs {
        Inputs {
            points: self.points.clone(),
            regions: self.regions.clone(),
            point_opts: PointOptions { x_col: self.x_col.clone(), y_col: self.y_col.clone(), attrs: self.attrs.clone() },
        }
    }
}

#[derive(Args, Debug)]
struct QueryArgs {
    /// Distance bounds in input units, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    epsilon: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Conservative)]
    mode: ModeArg,
    /// count, sum:<attr> or avg:<attr>.
    #[arg(long, default_value = "count")]
    agg: Aggregate,
    /// Point predicate such as `fare>=10`.
    #[arg(long)]
    filter: Option<AttrFilter>,
    /// Parallelize the point scan.
    #[arg(long)]
    parallel: bool,
}

impl QueryArgs {
    fn spec(&self) -> QuerySpec {
        QuerySpec {
            epsilons: self.epsilon.clone(),
            mode: self.mode.into(),
            agg: self.agg.clone(),
            filter: self.filter.clone(),
            opts: JoinOptions { parallel: self.parallel, ..JoinOptions::default() },
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Conservative,
    Center,
}

impl From<ModeArg> for RasterMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Conservative => RasterMode::Conservative,
            ModeArg::Center => RasterMode::CenterSampled,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum EngineArg {
    Act,
    Pointindex,
    Canvas,
    All,
}

fn engines(args: &[EngineArg]) -> Vec<Engine> {
    let mut out = Vec::new();
    for a in args {
        let add: &[Engine] = match a {
            EngineArg::Act => &[Engine::Act],
            EngineArg::Pointindex => &[Engine::PointIndex],
            EngineArg::Canvas => &[Engine::Canvas],
            EngineArg::All => &Engine::ALL,
        };
        for e in add {
            if !out.contains(e) {
                out.push(*e);
            }
        }
    }
    out
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("EPSRASTER_LOG", "warn")).init();
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Ingest { input, out } => run::cmd_ingest(&input.inputs(), out.as_deref()),
        Cmd::Rasterize { input, epsilon, mode, out, pgm } => {
            run::cmd_rasterize(&input.inputs(), epsilon, mode.into(), out.as_deref(), pgm.as_deref())
        }
        Cmd::Index { cmd: IndexCmd::Build { input, epsilon, level, sums, filter, radix_bits, max_error, out } } => {
            let b = IndexBuild { epsilon, level, sums, filter, radix_bits, max_error };
            run::cmd_index_build(&input.inputs(), &b, &out)
        }
        Cmd::Query { index, regions, query, out } => run::cmd_query(&index, &regions, &query.spec(), out.as_deref()),
        Cmd::Join { input, query, engine, out } => {
            run::cmd_join(&input.inputs(), &query.spec(), &engines(&engine), out.as_deref())
        }
        Cmd::Bench { input, query, engine, seed, n_points, n_regions, no_timings, out } => {
            let b = BenchSpec { seed, n_points, n_regions, timings: !no_timings };
            run::cmd_bench(&input.inputs(), &query.spec(), &engines(&engine), &b, out.as_deref())
        }
        Cmd::Audit { input, query, index, out } => {
            run::cmd_audit(&input.inputs(), &query.spec(), index.as_deref(), out.as_deref())
        }
        Cmd::ExportCsv { input, out } => run::cmd_export_csv(&input, out.as_deref()),
    }
}
