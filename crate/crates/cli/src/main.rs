use clap::{Parser, Subcommand};
use ibb_cli::commands::GlobalOpts;
use ibb_cli::{run_verb, Verb};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CODES: &str = "Exit status: 0 success, 1 requirement failure or other error, 2 config parse or \
validation error (with line and column), 3 simulation divergence, 4 infeasible design set or empty core \
database. The configuration schema is documented in SCHEMA.md.";

#[derive(Parser)]
#[command(name = "ibb", version, about = "Three-phase inverting buck-boost converter workflows", after_help = EXIT_CODES)]
struct Cli {
    /// Artifact directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed for randomized candidate corpora.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    verb: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-loop (rectifier, inverter) or open-loop (dc-dc-phase) time-domain run.
    ///
    /// Writes trace.csv, kpis.csv and waveforms.svg; a `[sweep]` section writes
    /// sweep_NNN/ per value plus sweep.csv.
    Simulate {
        config: PathBuf,
        /// Halve the integration step (convergence check).
        #[arg(long)]
        dt_half: bool,
    },
    /// Steady-state comparison of PWM, DPWM and BCM.
    ///
    /// modulations.csv columns, in order: scheme, i_l_rms_A, i_l_max_A, f_sw_avg_Hz,
    /// f_sw_max_Hz, f_sw_min_Hz, i_o_A, soft_count_1, soft_v_max_V, soft_v_avg_V,
    /// soft_i_max_A, soft_i_avg_A, hard_count_1, hard_v_max_V, hard_v_avg_V,
    /// hard_i_max_A, hard_i_avg_A; then p_cond_hb_W, p_sw_hb_W, p_semi_hb_W when
    /// `[losses] map` is set; then i_l_rms_rel_1, f_sw_avg_rel_1 (ratios to the
    /// first row) when more than one scheme is listed. Transition columns are
    /// empty when a scheme has no transitions of that kind.
    CompareModulations { config: PathBuf },
    /// Inductor current envelope over DC voltage for a set of inductances.
    Envelope { config: PathBuf },
    /// Enumerates inductor designs and extracts the Pareto front.
    DesignInductor { config: PathBuf },
    /// Per-device dissipation, junction temperature and heatsink budget.
    ThermalCheck { config: PathBuf },
    /// Calorimetric setup limits and brass block sizing.
    Calorimetric { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let mut opts = GlobalOpts { seed: cli.seed, dt_half: false };
    let (verb, config) = match cli.verb {
        Cmd::Simulate { config, dt_half } => {
            opts.dt_half = dt_half;
            (Verb::Simulate, config)
        }
        Cmd::CompareModulations { config } => (Verb::CompareModulations, config),
        Cmd::Envelope { config } => (Verb::Envelope, config),
        Cmd::DesignInductor { config } => (Verb::DesignInductor, config),
        Cmd::ThermalCheck { config } => (Verb::ThermalCheck, config),
        Cmd::Calorimetric { config } => (Verb::Calorimetric, config),
    };
    ExitCode::from(run_verb(verb, &config, cli.out_dir.as_deref(), &opts) as u8)
}
