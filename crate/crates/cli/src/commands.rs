//! The six workflows. Each returns its artifacts in memory; [`crate::write_outcome`]
//! puts them on disk.

use crate::config::{CmChoice, CoreSource, Document, MapSource, Mode, RunConfig};
use crate::error::CliError;
use crate::plot::{render, Bars, Chart, Panel, Series, Style};
use crate::table::{Cell, Table};
use ibb_core::converter::{ac_current_amplitude, steady_duty};
use ibb_core::design::{
    ac_cap_limit, brass_block, builtin_cores, calorimetric_limits, cores_from_csv_str, dimensioning_sweep,
    efficiency_point, evaluate_inductor, pareto_front, select_min_product, Core, CoreLossModel, CurrentWaveform,
    DesignPoint, InductorDesign, InductorLosses,
};
use ibb_core::loss_thermal::{
    cspi_scale, evaluate_semiconductor_losses, heatsink_budget, junction_temperature, per_device_worst,
    via_stack_rth, LossMap, ThermalStack,
};
use ibb_core::modulation::{
    classify_transitions, profile_kpis, synthesize, ModulationOptions, PowerFlow, TransitionStats,
};
use ibb_core::{ConverterParams, OperatingPoint};
use ibb_sim::circuit::FixedDuty;
use ibb_sim::control::{Bandwidths, CmMode, RectifierController, RectifierGains};
use ibb_sim::scenario::{
    dcdc_circuit, inverter_load, rectifier_circuit, run_inverter, DCDC_SAMPLES_PER_PERIOD,
};
use ibb_sim::{run, trace_kpis, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Options shared by every verb.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlobalOpts {
    pub seed: u64,
    /// Halve the integration step of `simulate`.
    pub dt_half: bool,
}

/// Artifacts of one verb.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Relative file name and content, in write order.
    pub files: Vec<(String, String)>,
    /// Terminal report.
    pub summary: String,
    /// Set when the verb produced artifacts but must exit nonzero.
    pub failure: Option<CliError>,
}

impl Outcome {
    fn add(&mut self, name: impl Into<String>, content: String) {
        self.files.push((name.into(), content));
    }
}

fn flow(mode: Mode) -> PowerFlow {
    match mode {
        Mode::Inverter => PowerFlow::Inverter,
        _ => PowerFlow::Rectifier,
    }
}

fn cm_mode(cfg: &RunConfig) -> CmMode {
    match cfg.controller.cm {
        CmChoice::Dpwm => CmMode::Dpwm,
        CmChoice::Smoothing => CmMode::Smoothing { v_var: cfg.controller.v_var * cfg.op.v_ac_hat },
    }
}

fn load_map(src: &MapSource) -> Result<LossMap, CliError> {
    Ok(match src {
        MapSource::Gan600 => LossMap::gan_600v(),
        MapSource::Sic900 => LossMap::sic_900v(),
        MapSource::Lossless => LossMap::lossless(),
        MapSource::Csv(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            LossMap::from_csv_str(&text).map_err(|e| {
                CliError::Config(crate::config::ConfigError { at: None, msg: format!("{}: {e}", p.display()) })
            })?
        }
    })
}

// ---------------------------------------------------------------- simulate

/// KPI requirement: measured column and whether the limit is a floor.
fn requirement_target(name: &str) -> (&'static str, bool) {
    match name {
        "thd_i_max" => ("thd_i_1", false),
        "thd_v_max" => ("thd_v_dm_1", false),
        "pf_min" => ("pf_1", true),
        "v_dc_min" => ("v_dc_mean_V", true),
        "v_dc_max" => ("v_dc_mean_V", false),
        "v_dc_ripple_max" => ("v_dc_ripple_1", false),
        "audit_max" => ("audit_residue_1", false),
        _ => ("duty_error_1", false),
    }
}

fn requirement_header(name: &str) -> String {
    let unit = if name.starts_with("v_dc_m") { "V" } else { "1" };
    format!("{name}_{unit}")
}

struct SimRun {
    trace_csv: String,
    kpis: Table,
    svg: String,
    failed: Vec<String>,
}

fn ac_kpi_table(cfg: &RunConfig, tr: &Trace) -> Result<Table, CliError> {
    let k = trace_kpis(tr, cfg.sim.kpi_periods)?;
    let vals = [k.thd_i, k.thd_v_dm, k.pf, k.v_dc_mean, k.v_dc_ripple, k.p_in, k.p_out, k.p_loss, k.audit_residue];
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Diverged("non-finite KPI over the evaluation window".into()));
    }
    let mut t = Table::new([
        "mode",
        "sim_dt_s",
        "thd_i_1",
        "thd_v_dm_1",
        "pf_1",
        "v_dc_mean_V",
        "v_dc_ripple_1",
        "p_in_W",
        "p_out_W",
        "p_loss_W",
        "audit_residue_1",
    ]);
    let mut row: Vec<Cell> = vec![cfg.mode.name().into(), tr.sim_dt.into()];
    row.extend(vals.map(Cell::from));
    t.push(row);
    Ok(t)
}

fn dcdc_kpi_table(cfg: &RunConfig, tr: &Trace) -> Result<Table, CliError> {
    let n = tr.samples.len();
    let half = (cfg.sim.switching_periods as usize / 2) * DCDC_SAMPLES_PER_PERIOD;
    let w = &tr.samples[n - 1 - half..n - 1];
    let v_c = w.iter().map(|s| -s.v_c[0]).sum::<f64>() / w.len() as f64;
    let (a, b) = (&tr.samples[n - 1 - half], &tr.samples[n - 1]);
    let span = b.t - a.t;
    let p_in = (b.e_in - a.e_in) / span;
    let p_out = (b.e_out - a.e_out) / span;
    let ratio = v_c / cfg.op.v_dc;
    let d = cfg.sim.duty;
    let want = d / (1.0 - d);
    if !(ratio.is_finite() && p_in.is_finite()) {
        return Err(CliError::Diverged("non-finite capacitor voltage".into()));
    }
    let d_back = steady_duty(cfg.op.v_dc, v_c.max(0.0)).map_err(CliError::from)?;
    let mut t = Table::new([
        "mode",
        "sim_dt_s",
        "duty_1",
        "v_c_mean_V",
        "ratio_1",
        "ratio_analytic_1",
        "duty_error_1",
        "duty_from_ratio_1",
        "p_in_W",
        "p_out_W",
        "efficiency_1",
    ]);
    t.push(vec![
        cfg.mode.name().into(),
        tr.sim_dt.into(),
        d.into(),
        v_c.into(),
        ratio.into(),
        want.into(),
        ((ratio - want) / want).abs().into(),
        d_back.into(),
        p_in.into(),
        p_out.into(),
        (p_out / p_in).into(),
    ]);
    Ok(t)
}

fn waveform_svg(cfg: &RunConfig, trace_csv: &str, tr: &Trace) -> String {
    let t_end = tr.samples.last().map_or(0.0, |s| s.t);
    let span = match cfg.mode {
        Mode::DcDcPhase => 10.0 / cfg.op.f_s,
        _ => 2.0 / cfg.op.f_o,
    };
    let mut table = Table::from_csv_str(trace_csv).expect("trace CSV is well formed");
    let tcol = table.col("t_s").expect("time column");
    table.rows.retain(|r| r[tcol].as_f64().is_some_and(|t| t >= t_end - span));
    let time = |title: &str, y: &str, cols: &[&str]| {
        Panel::Xy(Chart::new(title, "t [s]", y).from_table(&table, "t_s", cols, Style::Line))
    };
    let panels = match cfg.mode {
        Mode::DcDcPhase => vec![
            time("Inductor current", "A", &["iL_a_A"]),
            time("Capacitor voltage", "V", &["vC_a_V"]),
        ],
        _ => vec![
            time("AC currents", "A", &["iac_a_A", "iac_b_A", "iac_c_A"]),
            time("Capacitor voltages", "V", &["vC_a_V", "vC_b_V", "vC_c_V"]),
            time("Inductor currents", "A", &["iL_a_A", "iL_b_A", "iL_c_A"]),
            time("DC voltage", "V", &["vdc_V"]),
        ],
    };
    render(&panels)
}

fn simulate_trace(cfg: &RunConfig, opts: &GlobalOpts) -> Result<Trace, CliError> {
    let steps = cfg.sim.steps_per_period * if opts.dt_half { 2 } else { 1 };
    let dt = 1.0 / (steps as f64 * cfg.op.f_s);
    let (op, params) = (&cfg.op, &cfg.params);
    Ok(match cfg.mode {
        Mode::Rectifier => {
            let c = rectifier_circuit(op, params);
            let bw = Bandwidths::cascade(op.f_s / cfg.controller.bw_divider, cfg.controller.bw_ratio);
            let gains = RectifierGains::from_plant(params, op.v_dc, op.p_out, op.v_ac_hat, bw);
            let mut ctl = RectifierController::new(params, &gains, op.f_s, op.v_dc, 0.0, op.omega(), cm_mode(cfg))?;
            run(&c, &mut ctl, cfg.sim.periods / op.f_o, dt)?
        }
        Mode::Inverter => {
            let load = inverter_load(op, cfg.sim.load_l);
            run_inverter(op, params, load, cm_mode(cfg), cfg.sim.periods, steps)?
        }
        Mode::DcDcPhase => {
            let mut c = dcdc_circuit(params, op.v_dc, cfg.sim.r_load, cfg.sim.duty);
            c.record_interval = 1.0 / (DCDC_SAMPLES_PER_PERIOD as f64 * op.f_s);
            let mut drv = FixedDuty { f_s: op.f_s, duty: [cfg.sim.duty, 0.0, 0.0] };
            run(&c, &mut drv, cfg.sim.switching_periods as f64 / op.f_s, dt)?
        }
    })
}

fn simulate_one(cfg: &RunConfig, opts: &GlobalOpts) -> Result<SimRun, CliError> {
    let tr = simulate_trace(cfg, opts)?;
    let mut kpis = match cfg.mode {
        Mode::DcDcPhase => dcdc_kpi_table(cfg, &tr)?,
        _ => ac_kpi_table(cfg, &tr)?,
    };
    let mut failed = Vec::new();
    let mut all = true;
    let mut extra: Vec<(String, Cell)> = Vec::new();
    for r in &cfg.requirements {
        let (col, floor) = requirement_target(r.name);
        let v = kpis.get(0, col).and_then(Cell::as_f64).unwrap_or(f64::NAN);
        let ok = if floor { v >= r.limit } else { v <= r.limit };
        if !ok {
            failed.push(format!("{} = {} violates {} = {}", col, crate::table::fmt_num(v), r.name, crate::table::fmt_num(r.limit)));
        }
        all &= ok;
        extra.push((requirement_header(r.name), r.limit.into()));
        extra.push((format!("{}_pass", r.name), ok.into()));
    }
    if !cfg.requirements.is_empty() {
        extra.push(("requirements_pass".into(), all.into()));
    }
    for (h, c) in extra {
        kpis.headers.push(h);
        kpis.rows[0].push(c);
    }
    let trace_csv = tr.to_csv();
    let svg = waveform_svg(cfg, &trace_csv, &tr);
    Ok(SimRun { trace_csv, kpis, svg, failed })
}

fn check_requirements_apply(cfg: &RunConfig, doc: &Document) -> Result<(), CliError> {
    for r in &cfg.requirements {
        let dcdc_only = r.name == "duty_error_max";
        if dcdc_only != (cfg.mode == Mode::DcDcPhase) {
            return Err(doc
                .error_at("requirements", r.name, format!("`{}` does not apply to mode {}", r.name, cfg.mode.name()))
                .into());
        }
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig, doc: &Document, opts: &GlobalOpts) -> Result<Outcome, CliError> {
    check_requirements_apply(cfg, doc)?;
    let mut out = Outcome::default();
    let Some(sweep) = &cfg.sweep else {
        let r = simulate_one(cfg, opts)?;
        out.summary = r.kpis.describe();
        out.add("trace.csv", r.trace_csv);
        out.add("kpis.csv", r.kpis.to_csv());
        out.add("waveforms.svg", r.svg);
        if !r.failed.is_empty() {
            out.failure = Some(CliError::Requirements(r.failed.join("; ")));
        }
        return Ok(out);
    };
    let configs = sweep
        .raw_values
        .iter()
        .map(|raw| RunConfig::from_document(&doc.with_value(&sweep.section, &sweep.key, raw)))
        .collect::<Result<Vec<_>, _>>()?;
    let runs: Vec<Result<SimRun, CliError>> = configs.par_iter().map(|c| simulate_one(c, opts)).collect();
    let swept = format!("{}_{}", sweep.key, sweep.unit.label().replace('/', "_per_"));
    let mut agg: Option<Table> = None;
    let mut failed = Vec::new();
    let mut diverged = Vec::new();
    for (i, r) in runs.into_iter().enumerate() {
        let dir = format!("sweep_{i:03}");
        match r {
            Ok(r) => {
                // A swept key that is also a KPI column is listed once.
                let keep: Vec<usize> = (0..r.kpis.headers.len()).filter(|&k| r.kpis.headers[k] != swept).collect();
                let t = agg.get_or_insert_with(|| {
                    let mut h = vec!["index".to_string(), swept.clone()];
                    h.extend(keep.iter().map(|&k| r.kpis.headers[k].clone()));
                    Table::new(h)
                });
                let mut row: Vec<Cell> = vec![i.into(), sweep.values[i].into()];
                row.extend(keep.iter().map(|&k| r.kpis.rows[0][k].clone()));
                if row.len() == t.headers.len() {
                    t.push(row);
                }
                out.add(format!("{dir}/trace.csv"), r.trace_csv);
                out.add(format!("{dir}/kpis.csv"), r.kpis.to_csv());
                out.add(format!("{dir}/waveforms.svg"), r.svg);
                failed.extend(r.failed.into_iter().map(|m| format!("{dir}: {m}")));
            }
            Err(CliError::Diverged(m)) => diverged.push(format!("{dir}: {m}")),
            Err(e) => return Err(e),
        }
    }
    if let Some(t) = agg {
        out.summary = t.describe();
        out.add("sweep.csv", t.to_csv());
    }
    out.failure = if !diverged.is_empty() {
        Some(CliError::Diverged(diverged.join("; ")))
    } else if !failed.is_empty() {
        Some(CliError::Requirements(failed.join("; ")))
    } else {
        None
    };
    Ok(out)
}

// ------------------------------------------------------ compare-modulations

/// Column order of `modulations.csv`.
pub const MODULATION_COLUMNS: &[&str] = &[
    "scheme",
    "i_l_rms_A",
    "i_l_max_A",
    "f_sw_avg_Hz",
    "f_sw_max_Hz",
    "f_sw_min_Hz",
    "i_o_A",
    "soft_count_1",
    "soft_v_max_V",
    "soft_v_avg_V",
    "soft_i_max_A",
    "soft_i_avg_A",
    "hard_count_1",
    "hard_v_max_V",
    "hard_v_avg_V",
    "hard_i_max_A",
    "hard_i_avg_A",
];

/// Appended when `[losses] map` is set.
pub const LOSS_COLUMNS: &[&str] = &["p_cond_hb_W", "p_sw_hb_W", "p_semi_hb_W"];

/// Appended when more than one scheme is compared: ratios to the first row.
pub const COMPARISON_COLUMNS: &[&str] = &["i_l_rms_rel_1", "f_sw_avg_rel_1"];

fn stats_cells(s: &Option<TransitionStats>) -> Vec<Cell> {
    match s {
        Some(s) => vec![s.count.into(), s.v_max.into(), s.v_avg.into(), s.i_max.into(), s.i_avg.into()],
        None => vec![Cell::Empty; 5],
    }
}

pub fn modulation_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let opts = ModulationOptions {
        cm_margin: cfg.modulation.cm_margin,
        samples_per_period: cfg.modulation.samples_per_period,
        include_cap_current: cfg.modulation.include_cap_current,
        flow: flow(cfg.mode),
        i_o: cfg.modulation.i_o,
    };
    let map = cfg.losses.as_ref().map(load_map).transpose()?;
    let rows: Vec<Result<Vec<Cell>, CliError>> = cfg
        .modulation
        .schemes
        .par_iter()
        .map(|&s| {
            let p = synthesize(s, &cfg.op, &cfg.params, &opts)?;
            let tr = classify_transitions(&p, p.i_o);
            let k = profile_kpis(&p, &tr);
            let mut row: Vec<Cell> = vec![
                s.name().into(),
                k.i_l_rms.into(),
                k.i_l_max.into(),
                k.f_sw_avg.into(),
                k.f_sw_max.into(),
                k.f_sw_min.into(),
                p.i_o.into(),
            ];
            row.extend(stats_cells(&k.soft));
            row.extend(stats_cells(&k.hard));
            if let Some(m) = &map {
                let l = evaluate_semiconductor_losses(&tr, &p, m, &cfg.params);
                row.extend([l.p_cond, l.p_sw, l.p_tot].map(Cell::from));
            }
            Ok(row)
        })
        .collect();
    let mut headers: Vec<&str> = MODULATION_COLUMNS.to_vec();
    if map.is_some() {
        headers.extend(LOSS_COLUMNS);
    }
    let compare = cfg.modulation.schemes.len() > 1;
    if compare {
        headers.extend(COMPARISON_COLUMNS);
    }
    let mut t = Table::new(headers);
    for r in rows {
        t.rows.push(r?);
    }
    if compare {
        let (rms, fsw) = (t.column("i_l_rms_A").unwrap(), t.column("f_sw_avg_Hz").unwrap());
        for (j, row) in t.rows.iter_mut().enumerate() {
            row.push((rms[j] / rms[0]).into());
            row.push((fsw[j] / fsw[0]).into());
        }
    }
    Ok(t)
}

pub fn compare_modulations(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let t = modulation_table(cfg)?;
    let cats: Vec<String> = t.rows.iter().map(|r| r[0].render()).collect();
    let group = |name: &str| (name.to_string(), t.column(name).unwrap_or_default());
    let mut panels = vec![
        Panel::Bars(Bars {
            title: "Inductor current".into(),
            y_label: "A".into(),
            categories: cats.clone(),
            groups: vec![group("i_l_rms_A"), group("i_l_max_A")],
        }),
        Panel::Bars(Bars {
            title: "Switching frequency".into(),
            y_label: "Hz".into(),
            categories: cats.clone(),
            groups: vec![group("f_sw_avg_Hz"), group("f_sw_max_Hz"), group("f_sw_min_Hz")],
        }),
    ];
    if t.col("p_semi_hb_W").is_some() {
        panels.push(Panel::Bars(Bars {
            title: "Semiconductor loss per half-bridge".into(),
            y_label: "W".into(),
            categories: cats,
            groups: vec![group("p_cond_hb_W"), group("p_sw_hb_W")],
        }));
    }
    let mut out = Outcome { summary: t.describe(), ..Default::default() };
    out.add("modulations.csv", t.to_csv());
    out.add("modulations.svg", render(&panels));
    Ok(out)
}

// ---------------------------------------------------------------- envelope

pub fn envelope(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = cfg.envelope.v_dc_grid();
    let curves = cfg
        .envelope
        .l_set
        .par_iter()
        .map(|&l| dimensioning_sweep(&cfg.op, &cfg.params, &[l], &grid).map(|mut v| v.remove(0)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut long = Table::new(["l_H", "v_dc_V", "i_pk_A", "i_rms_A", "i_pk_i_rms_A2"]);
    let mut summary = Table::new([
        "l_H",
        "i_pk_max_A",
        "i_rms_max_A",
        "argmax_i_pk_v_dc_V",
        "argmax_i_rms_v_dc_V",
        "argmax_product_v_dc_V",
    ]);
    let mut pk = Chart::new("Peak inductor current", "V_dc [V]", "A");
    let mut rms = Chart::new("rms inductor current", "V_dc [V]", "A");
    for c in &curves {
        for j in 0..c.v_dc.len() {
            long.push(vec![c.l.into(), c.v_dc[j].into(), c.i_pk[j].into(), c.i_rms[j].into(), (c.i_pk[j] * c.i_rms[j]).into()]);
        }
        summary.push(vec![
            c.l.into(),
            c.i_pk[c.argmax_pk].into(),
            c.i_rms[c.argmax_rms].into(),
            c.v_dc[c.argmax_pk].into(),
            c.v_dc[c.argmax_rms].into(),
            c.v_dc[c.argmax_product].into(),
        ]);
        let name = format!("L = {} uH", crate::table::fmt_num(c.l * 1e6));
        pk.series.push(Series { name: name.clone(), x: c.v_dc.clone(), y: c.i_pk.clone(), style: Style::Line });
        rms.series.push(Series { name, x: c.v_dc.clone(), y: c.i_rms.clone(), style: Style::Line });
    }
    let mut out = Outcome { summary: summary.describe(), ..Default::default() };
    out.add("envelope.csv", long.to_csv());
    out.add("envelope_summary.csv", summary.to_csv());
    out.add("envelope.svg", render(&[Panel::Xy(pk), Panel::Xy(rms)]));
    if cfg.envelope.efficiency {
        let t = efficiency_table(cfg, &grid)?;
        let chart = |title: &str, y: &str, cols: &[&str]| {
            Panel::Xy(Chart::new(title, "V_dc [V]", y).from_table(&t, "v_dc_V", cols, Style::Line))
        };
        out.add(
            "efficiency.svg",
            render(&[
                chart("Efficiency", "1", &["efficiency_1"]),
                chart("Loss breakdown", "W", &["p_semi_hb_W", "p_inductor_W", "p_total_W"]),
            ]),
        );
        out.add("efficiency.csv", t.to_csv());
    }
    Ok(out)
}

/// Efficiency of the reference 10 uH design over `grid` with the configured map
/// (600 V GaN when unset).
pub fn efficiency_table(cfg: &RunConfig, grid: &[f64]) -> Result<Table, CliError> {
    let map = load_map(cfg.losses.as_ref().unwrap_or(&MapSource::Gan600))?;
    let design = InductorDesign::reference_10uh();
    let pts = grid
        .par_iter()
        .map(|&v_dc| efficiency_point(&OperatingPoint { v_dc, ..cfg.op }, &cfg.params, &map, &design))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(["v_dc_V", "p_semi_hb_W", "p_inductor_W", "p_total_W", "efficiency_1", "semi_share_1"]);
    for p in pts {
        t.push(vec![
            p.v_dc.into(),
            p.p_semi_hb.into(),
            p.p_inductor.into(),
            p.p_total.into(),
            p.efficiency.into(),
            p.semi_share.into(),
        ]);
    }
    Ok(t)
}

// --------------------------------------------------------- design-inductor

struct Candidate {
    core: usize,
    n: u32,
    strands: u32,
}

fn load_cores(src: &CoreSource) -> Result<Vec<Core>, CliError> {
    match src {
        CoreSource::Builtin => Ok(builtin_cores()),
        CoreSource::Csv(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            cores_from_csv_str(&text).map_err(|e| {
                CliError::Config(crate::config::ConfigError { at: None, msg: format!("{}: {e}", p.display()) })
            })
        }
    }
}

pub fn design_inductor(cfg: &RunConfig, opts: &GlobalOpts) -> Result<Outcome, CliError> {
    let d = &cfg.design;
    let cores = load_cores(&d.cores)?;
    if cores.is_empty() {
        return Err(CliError::Infeasible("core database is empty".into()));
    }
    let params = ConverterParams { l_bb: d.l_target, ..cfg.params };
    let mopts = ModulationOptions {
        cm_margin: cfg.modulation.cm_margin,
        samples_per_period: cfg.modulation.samples_per_period,
        include_cap_current: cfg.modulation.include_cap_current,
        flow: flow(cfg.mode),
        i_o: cfg.modulation.i_o,
    };
    let profile = synthesize(cfg.modulation.design_scheme, &cfg.op, &params, &mopts)?;
    let wave = CurrentWaveform::from_profile(&profile, 0);

    let mut cands = Vec::new();
    for core in 0..cores.len() {
        for n in d.turns.0..=d.turns.1 {
            for &strands in &d.strands {
                cands.push(Candidate { core, n, strands });
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let s_lo = *d.strands.iter().min().expect("validated non-empty");
    let s_hi = *d.strands.iter().max().expect("validated non-empty");
    for _ in 0..d.random_designs {
        cands.push(Candidate {
            core: rng.gen_range(0..cores.len()),
            n: rng.gen_range(d.turns.0..=d.turns.1),
            strands: rng.gen_range(s_lo..=s_hi),
        });
    }
    let model = if d.steinmetz_only { CoreLossModel::Steinmetz } else { CoreLossModel::Igse };
    let evals: Vec<Result<InductorLosses, String>> = cands
        .par_iter()
        .map(|c| {
            let core = cores[c.core].clone();
            let design = InductorDesign {
                gap: InductorDesign::gap_for(&core, c.n, d.l_target),
                core,
                n_turns: c.n,
                strands: c.strands,
                strand_diameter: d.strand_diameter,
                layers: d.layers,
                fill: d.fill,
                j_max: d.j_max,
                p_loss_max: d.p_loss_max,
                model,
            };
            evaluate_inductor(&design, &wave).map_err(|e| e.to_string())
        })
        .collect();

    let headers = [
        "index",
        "core",
        "n_turns_1",
        "strands_1",
        "gap_m",
        "volume_L",
        "p_core_W",
        "p_cu_W",
        "p_loss_W",
        "b_pk_T",
        "j_rms_A_per_mm2",
        "feasible",
        "reason",
    ];
    let mut all = Table::new(headers);
    let mut points = Vec::with_capacity(cands.len());
    let mut histogram: BTreeMap<String, usize> = BTreeMap::new();
    for (i, (c, e)) in cands.iter().zip(&evals).enumerate() {
        let gap = InductorDesign::gap_for(&cores[c.core], c.n, d.l_target);
        let head: Vec<Cell> = vec![i.into(), cores[c.core].name.as_str().into(), c.n.into(), c.strands.into(), gap.into()];
        let (tail, point): (Vec<Cell>, DesignPoint) = match e {
            Ok(l) => {
                let reason = l.point.infeasibility_reason.map(|r| r.name());
                if let Some(r) = reason {
                    *histogram.entry(r.to_string()).or_default() += 1;
                }
                (
                    vec![
                        l.point.volume.into(),
                        l.p_core.into(),
                        l.p_cu.into(),
                        l.point.p_loss.into(),
                        l.b_pk.into(),
                        l.j_rms.into(),
                        l.point.feasible.into(),
                        reason.into(),
                    ],
                    l.point,
                )
            }
            Err(m) => {
                *histogram.entry("invalid".into()).or_default() += 1;
                let mut v = vec![Cell::Empty; 6];
                v.extend([false.into(), format!("invalid: {m}").into()]);
                (v, DesignPoint { volume: f64::NAN, p_loss: f64::NAN, feasible: false, infeasibility_reason: None })
            }
        };
        all.push([head, tail].concat());
        points.push(point);
    }

    let i_o_hat = ac_current_amplitude(cfg.op.p_out, cfg.op.v_ac_hat);
    let c_max = ac_cap_limit(i_o_hat, cfg.op.omega(), cfg.op.v_ac_hat, d.cap_fraction)?;
    let mut cap = Table::new(["i_o_hat_A", "omega_o_rad_per_s", "v_o_hat_V", "fraction_1", "c_ac_max_F"]);
    cap.push(vec![i_o_hat.into(), cfg.op.omega().into(), cfg.op.v_ac_hat.into(), d.cap_fraction.into(), c_max.into()]);

    let mut out = Outcome::default();
    out.add("designs.csv", all.to_csv());
    out.add("cap_limit.csv", cap.to_csv());

    let front = pareto_front(&points);
    if front.is_empty() {
        let mut h = Table::new(["reason", "count_1"]);
        for (r, n) in &histogram {
            h.push(vec![r.as_str().into(), (*n).into()]);
        }
        out.summary = format!("no feasible design among {} candidates\n{}", points.len(), h.describe());
        out.add("infeasible.csv", h.to_csv());
        let hist = histogram.iter().map(|(r, n)| format!("{r}: {n}")).collect::<Vec<_>>().join(", ");
        out.failure = Some(CliError::Infeasible(format!("no feasible inductor design ({hist})")));
        return Ok(out);
    }
    let best = select_min_product(&points);
    let mut order = front.clone();
    order.sort_by(|&a, &b| points[a].volume.total_cmp(&points[b].volume).then(a.cmp(&b)));
    let mut pareto = Table::new(headers.iter().copied().chain(["selected"]));
    for &i in &order {
        let mut row = all.rows[i].clone();
        row.push((Some(i) == best).into());
        pareto.push(row);
    }
    let feasible: Vec<usize> = (0..points.len()).filter(|&i| points[i].feasible).collect();
    let scatter = Chart {
        title: "Inductor design space".into(),
        x_label: "volume [L]".into(),
        y_label: "loss [W]".into(),
        series: vec![
            Series {
                name: "feasible".into(),
                x: feasible.iter().map(|&i| points[i].volume).collect(),
                y: feasible.iter().map(|&i| points[i].p_loss).collect(),
                style: Style::Scatter,
            },
            Series {
                name: "Pareto front".into(),
                x: order.iter().map(|&i| points[i].volume).collect(),
                y: order.iter().map(|&i| points[i].p_loss).collect(),
                style: Style::Line,
            },
        ],
    };
    out.summary = format!(
        "{} candidates, {} feasible, {} on the Pareto front\n{}",
        points.len(),
        feasible.len(),
        front.len(),
        {
            let mut sel = Table::new(headers);
            if let Some(b) = best {
                sel.push(all.rows[b].clone());
            }
            sel.describe()
        }
    );
    out.add("pareto.csv", pareto.to_csv());
    out.add("designs.svg", render(&[Panel::Xy(scatter)]));
    Ok(out)
}

// ------------------------------------------------------------ thermal-check

pub fn thermal_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let th = &cfg.thermal;
    let p_calc = per_device_worst(th.p_tot_hb, th.split, th.n_par)?;
    let p_pd = th.p_pd.unwrap_or(p_calc);
    let open = ThermalStack { r_jc: th.r_jc, r_chs_pd: 0.0, r_hsa_pd: th.r_ca_min, t_amb: th.t_amb_open, t_j_max: th.t_j_max_device };
    open.validate()?;
    let t_j_open = junction_temperature(p_pd, &open);
    let r_chs = match th.r_chs_pd {
        Some(r) => r,
        None => via_stack_rth(&ibb_core::loss_thermal::ViaStackParams::reference(), th.n_vias)?,
    };
    let budget = heatsink_budget(th.r_jc, r_chs, th.t_amb, th.t_j_max, p_pd, th.n_hb)?;
    let fan = cspi_scale(th.cspi, th.v2, th.n_fans)?;
    let mut t = Table::new([
        "p_tot_hb_W",
        "split_1",
        "n_par_1",
        "p_max_pd_calc_W",
        "p_max_pd_W",
        "r_jc_K_per_W",
        "r_ca_min_K_per_W",
        "t_amb_open_degC",
        "t_j_open_degC",
        "t_j_max_device_degC",
        "cooling_required",
        "r_chs_pd_K_per_W",
        "t_amb_degC",
        "t_j_max_degC",
        "r_hsa_pd_max_K_per_W",
        "r_hsa_max_K_per_W",
        "budget_infeasible",
        "cspi_W_per_K_L",
        "v2_L",
        "n_fans_1",
        "r_th2_K_per_W",
        "r_hsa_K_per_W",
        "heatsink_ok",
    ]);
    t.push(vec![
        th.p_tot_hb.into(),
        th.split.into(),
        th.n_par.into(),
        p_calc.into(),
        p_pd.into(),
        th.r_jc.into(),
        th.r_ca_min.into(),
        th.t_amb_open.into(),
        t_j_open.into(),
        th.t_j_max_device.into(),
        (t_j_open > th.t_j_max_device).into(),
        r_chs.into(),
        th.t_amb.into(),
        th.t_j_max.into(),
        budget.r_hsa_pd_max.into(),
        budget.r_hsa_max.into(),
        budget.infeasible.into(),
        th.cspi.into(),
        th.v2.into(),
        th.n_fans.into(),
        fan.r_th2.into(),
        fan.r_hsa.into(),
        (!budget.infeasible && fan.r_hsa <= budget.r_hsa_max).into(),
    ]);
    Ok(t)
}

pub fn thermal_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let t = thermal_table(cfg)?;
    let mut out = Outcome { summary: t.describe(), ..Default::default() };
    if t.get(0, "heatsink_ok") == Some(&Cell::Flag(false)) {
        out.failure = Some(CliError::Infeasible(if t.get(0, "budget_infeasible") == Some(&Cell::Flag(true)) {
            "no heatsink resistance meets the junction limit".into()
        } else {
            "fan-heatsink resistance exceeds the budget".into()
        }));
    }
    out.add("thermal.csv", t.to_csv());
    Ok(out)
}

// ------------------------------------------------------------ calorimetric

pub struct CalorimetricTables {
    pub limits: Table,
    pub block: Table,
    pub vias: Table,
}

pub fn calorimetric_tables(cfg: &RunConfig) -> Result<CalorimetricTables, CliError> {
    let spec = &cfg.calorimetric.spec;
    let lim = calorimetric_limits(spec)?;
    let mut limits = Table::new([
        "regime",
        "i_rms_A",
        "e_sw_J",
        "p_max_pd_W",
        "p_cond_hb_W",
        "p_cond_pd_W",
        "p_sw_pd_W",
        "f_max_Hz",
        "infeasible",
    ]);
    for (name, l, i_rms, e) in [
        ("soft", &lim.soft, spec.i_ss_hat / 3f64.sqrt(), spec.e_ss_hat),
        ("hard", &lim.hard, spec.i_hs_hat, spec.e_hs_hat),
    ] {
        limits.push(vec![
            name.into(),
            i_rms.into(),
            e.into(),
            l.p_max_pd.into(),
            l.p_cond.into(),
            l.p_cond_pd.into(),
            l.p_sw_pd.into(),
            l.f_max.into(),
            l.infeasible.into(),
        ]);
    }
    let b = brass_block(spec, cfg.calorimetric.l_br, cfg.calorimetric.w_br)?;
    let mut block = Table::new(["c_th_J_per_K", "v_br_m3", "l_br_m", "w_br_m", "h_br_m"]);
    block.push(vec![b.c_th.into(), b.v_br.into(), cfg.calorimetric.l_br.into(), cfg.calorimetric.w_br.into(), b.h_br.into()]);
    let v = &spec.via;
    let mut vias = Table::new(["r_via_single_K_per_W", "r_pad_K_per_W", "n_vias_1", "r_chs_pd_K_per_W"]);
    vias.push(vec![v.single_via().into(), v.pad().into(), v.n_vias.into(), via_stack_rth(v, v.n_vias)?.into()]);
    Ok(CalorimetricTables { limits, block, vias })
}

pub fn calorimetric(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let t = calorimetric_tables(cfg)?;
    let mut out = Outcome {
        summary: format!("{}\n{}{}", t.limits.describe(), t.block.describe(), t.vias.describe()),
        ..Default::default()
    };
    let bad: Vec<String> = t
        .limits
        .rows
        .iter()
        .filter(|r| r.last() == Some(&Cell::Flag(true)))
        .map(|r| r[0].render())
        .collect();
    if !bad.is_empty() {
        out.failure = Some(CliError::Infeasible(format!("conduction alone exceeds the device budget ({})", bad.join(", "))));
    }
    out.add("calorimetric.csv", t.limits.to_csv());
    out.add("brass_block.csv", t.block.to_csv());
    out.add("via_stack.csv", t.vias.to_csv());
    Ok(out)
}
