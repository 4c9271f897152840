use ibb_cli::table::{Cell, Table};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");

fn shipped(name: &str) -> PathBuf {
    Path::new(CONFIGS).join(name)
}

fn ibb(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibb"))
        .args(args)
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("spawn ibb")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn table(path: &Path) -> Table {
    Table::from_csv_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn num(t: &Table, row: usize, col: &str) -> f64 {
    match t.get(row, col) {
        Some(Cell::Num(x)) => *x,
        other => panic!("{col}: {other:?}"),
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn malformed_value_exits_2_and_names_the_key() {
    let d = TempDir::new().unwrap();
    let c = write_config(&d, "bad.ini", "[converter]\nmode = inverter\n\n[params]\nl_bb = 10uF\n");
    let o = ibb(&["simulate"], &c, &d.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 5") && e.contains("l_bb"), "{e}");
}

#[test]
fn unknown_key_exits_2_with_location() {
    let d = TempDir::new().unwrap();
    let c = write_config(&d, "bad.ini", "[thermal]\np_tot_hb = 9.5W\n  r_ja = 3K/W\n");
    let o = ibb(&["thermal-check"], &c, &d.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 3, column 3") && e.contains("r_ja"), "{e}");
}

#[test]
fn empty_core_database_exits_4() {
    let d = TempDir::new().unwrap();
    let cores = write_config(&d, "cores.csv", "name, a_c_m2, a_w_m2, volume_l, b_sat_T, k, alpha, beta\n");
    let c = write_config(
        &d,
        "inductor.ini",
        &format!("[converter]\nmode = inverter\n[design]\ncores = {}\n", cores.display()),
    );
    let o = ibb(&["design-inductor"], &c, &d.path().join("out"));
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn thermal_check_reproduces_the_budget_chain() {
    let d = TempDir::new().unwrap();
    let o = ibb(&["thermal-check"], &shipped("thermal.ini"), d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t = table(&d.path().join("thermal.csv"));
    assert_eq!(t.rows.len(), 1);
    assert!((num(&t, 0, "p_max_pd_calc_W") - 9.5 * 0.65 / 2.0).abs() < 1e-9);
    assert!((num(&t, 0, "t_j_open_degC") - (25.0 + 3.1 * 65.0)).abs() < 1e-6);
    let r_chs = num(&t, 0, "r_chs_pd_K_per_W");
    let pd = (120.0 - 40.0) / 3.1 - 1.0 - r_chs;
    assert!((num(&t, 0, "r_hsa_pd_max_K_per_W") - pd).abs() < 1e-5 * pd);
    assert!((num(&t, 0, "r_hsa_max_K_per_W") - pd / 12.0).abs() < 1e-5 * pd);
    assert!((num(&t, 0, "r_hsa_pd_max_K_per_W") - 20.84).abs() < 0.01 * 20.84);
    assert!((num(&t, 0, "r_th2_K_per_W") - 1.0 / (22.37 * 0.01)).abs() < 1e-5);
    assert_eq!(t.get(0, "heatsink_ok"), Some(&Cell::Flag(true)));
}

#[test]
fn thermal_check_without_headroom_exits_4() {
    let d = TempDir::new().unwrap();
    let c = write_config(&d, "hot.ini", "[thermal]\np_pd = 30W\n");
    let o = ibb(&["thermal-check"], &c, &d.path().join("out"));
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn calorimetric_rows_follow_the_power_budget() {
    let d = TempDir::new().unwrap();
    let o = ibb(&["calorimetric"], &shipped("calorimetric.ini"), d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t = table(&d.path().join("calorimetric.csv"));
    assert_eq!(t.rows.len(), 2);
    let p_max = (120.0 - 40.0) / (1.0 + 4.8);
    for (row, i_rms, e) in [(0, 40.0 / 3f64.sqrt(), 3.2e-6), (1, 10.0, 40e-6)] {
        assert!((num(&t, row, "p_max_pd_W") - p_max).abs() < 1e-5);
        let p_cond = i_rms * i_rms * 0.1 / 2.0;
        assert!((num(&t, row, "p_cond_hb_W") - p_cond).abs() < 1e-5 * p_cond);
        let f = (p_max - p_cond / 4.0) / e;
        assert!((num(&t, row, "f_max_Hz") - f).abs() < 1e-5 * f);
    }
    let b = table(&d.path().join("brass_block.csv"));
    let c_th = 4.0 * p_max * 120.0 / 10.0;
    assert!((num(&b, 0, "c_th_J_per_K") - c_th).abs() < 1e-5 * c_th);
    assert!((num(&b, 0, "h_br_m") - c_th / 3205e3 / (0.06 * 0.05)).abs() < 1e-8);
}

#[test]
fn single_scheme_has_no_comparison_columns() {
    let d = TempDir::new().unwrap();
    let c = write_config(
        &d,
        "one.ini",
        "[converter]\nmode = rectifier\n[modulation]\nschemes = bcm\nsamples_per_period = 2000\n",
    );
    let o = ibb(&["compare-modulations"], &c, d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t = table(&d.path().join("modulations.csv"));
    assert!(t.col("i_l_rms_rel_1").is_none());
    assert!(t.col("f_sw_avg_rel_1").is_none());
    // BCM never hard-switches, so every hard-transition cell is empty.
    for h in ["hard_count_1", "hard_v_max_V", "hard_v_avg_V", "hard_i_max_A", "hard_i_avg_A"] {
        assert_eq!(t.get(0, h), Some(&Cell::Empty), "{h}");
    }
}

#[test]
fn modulation_comparison_ratios_refer_to_the_first_row() {
    let d = TempDir::new().unwrap();
    let o = ibb(&["compare-modulations"], &shipped("modulations.ini"), d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t = table(&d.path().join("modulations.csv"));
    assert_eq!(t.rows.len(), 3);
    let base = num(&t, 0, "i_l_rms_A");
    for r in 0..3 {
        assert!((num(&t, r, "i_l_rms_rel_1") - num(&t, r, "i_l_rms_A") / base).abs() < 1e-6);
    }
    assert!(d.path().join("modulations.svg").exists());
}

#[test]
fn design_inductor_is_reproducible_per_seed() {
    let d = TempDir::new().unwrap();
    let c = write_config(
        &d,
        "ind.ini",
        "[converter]\nmode = inverter\n[modulation]\nsamples_per_period = 64\n\
         [design]\nturns_min = 6\nturns_max = 10\nstrands = 200, 300\nrandom_designs = 40\n",
    );
    let run = |seed: &str, dir: &str| {
        let out = d.path().join(dir);
        let o = ibb(&["design-inductor", "--seed", seed], &c, &out);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        ["designs.csv", "pareto.csv", "designs.svg"].map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let (a, b, other) = (run("3", "a"), run("3", "b"), run("4", "c"));
    assert_eq!(a, b);
    assert_ne!(a[0], other[0]);
    let p = table(&d.path().join("a/pareto.csv"));
    let sel: Vec<_> = (0..p.rows.len()).filter(|&r| p.get(r, "selected") == Some(&Cell::Flag(true))).collect();
    assert_eq!(sel.len(), 1);
    for r in 1..p.rows.len() {
        assert!(num(&p, r, "volume_L") >= num(&p, r - 1, "volume_L"));
        assert!(num(&p, r, "p_loss_W") < num(&p, r - 1, "p_loss_W"));
    }
}

#[test]
fn envelope_peaks_at_the_lowest_dc_voltage() {
    let d = TempDir::new().unwrap();
    let o = ibb(&["envelope"], &shipped("envelope.ini"), d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = table(&d.path().join("envelope_summary.csv"));
    assert_eq!(s.rows.len(), 4);
    for r in 0..4 {
        assert_eq!(num(&s, r, "argmax_i_pk_v_dc_V"), 80.0);
        assert_eq!(num(&s, r, "argmax_i_rms_v_dc_V"), 80.0);
    }
    let e = table(&d.path().join("efficiency.csv"));
    assert_eq!(e.rows.len(), 17);
    for f in ["envelope.csv", "envelope.svg", "efficiency.svg"] {
        assert!(d.path().join(f).exists(), "{f}");
    }
}

#[test]
fn dcdc_run_matches_volt_second_balance_and_is_deterministic() {
    let d = TempDir::new().unwrap();
    let run = |dir: &str, extra: &[&str]| {
        let out = d.path().join(dir);
        let mut args = vec!["simulate"];
        args.extend(extra);
        let o = ibb(&args, &shipped("dcdc.ini"), &out);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a", &[]), run("b", &[]));
    for f in ["trace.csv", "kpis.csv", "waveforms.svg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let k = table(&a.join("kpis.csv"));
    let ratio = num(&k, 0, "ratio_1");
    assert!((ratio - 0.376 / 0.624).abs() < 0.01 * 0.376 / 0.624);
    let h = table(&run("half", &["--dt-half"]).join("kpis.csv"));
    assert!(num(&h, 0, "sim_dt_s") < num(&k, 0, "sim_dt_s"));
    assert!((num(&h, 0, "ratio_1") - ratio).abs() < 0.002 * ratio);
}

#[test]
fn failed_requirement_exits_1_but_keeps_artifacts() {
    let d = TempDir::new().unwrap();
    let text = std::fs::read_to_string(shipped("dcdc.ini")).unwrap().replace("duty_error_max = 1%", "duty_error_max = 0.01%");
    let c = write_config(&d, "strict.ini", &text);
    let o = ibb(&["simulate"], &c, &d.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let k = table(&d.path().join("out/kpis.csv"));
    assert_eq!(k.get(0, "duty_error_max_pass"), Some(&Cell::Flag(false)));
    assert_eq!(k.get(0, "requirements_pass"), Some(&Cell::Flag(false)));
}

#[test]
fn ac_requirement_in_dcdc_mode_is_rejected() {
    let d = TempDir::new().unwrap();
    let c = write_config(&d, "mixed.ini", "[converter]\nmode = dc-dc-phase\n[requirements]\npf_min = 0.99\n");
    let o = ibb(&["simulate"], &c, &d.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let d = TempDir::new().unwrap();
    let c = write_config(
        &d,
        "sweep.ini",
        "[converter]\nmode = dc-dc-phase\n[operating]\nv_dc = 100V\n[params]\nr_ds_on = 0Ohm\ndead_time = 0s\n\
         [simulation]\nswitching_periods = 120\n[sweep]\nparameter = simulation.duty\nvalues = 0.25, 0.5\n",
    );
    let o = ibb(&["simulate", "--jobs", "2"], &c, d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t = table(&d.path().join("sweep.csv"));
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.headers.iter().filter(|h| h.as_str() == "duty_1").count(), 1);
    assert_eq!(num(&t, 1, "duty_1"), 0.5);
    for i in 0..2 {
        assert!(d.path().join(format!("sweep_{i:03}/kpis.csv")).exists());
    }
}

#[test]
fn sweep_of_an_unknown_key_exits_2() {
    let d = TempDir::new().unwrap();
    let c = write_config(&d, "sweep.ini", "[sweep]\nparameter = simulation.colour\nvalues = 1, 2\n");
    let o = ibb(&["simulate"], &c, &d.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn output_dir_comes_from_the_config_when_not_given() {
    let d = TempDir::new().unwrap();
    let c = write_config(&d, "t.ini", "[thermal]\np_pd = 3.1W\n[output]\ndir = results\n");
    let o = Command::new(env!("CARGO_BIN_EXE_ibb")).arg("thermal-check").arg(&c).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(d.path().join("results/thermal.csv").exists());
}

#[test]
fn help_documents_exit_codes() {
    let o = Command::new(env!("CARGO_BIN_EXE_ibb")).arg("--help").output().unwrap();
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.contains("3 simulation divergence") && s.contains("4 infeasible"), "{s}");
}
