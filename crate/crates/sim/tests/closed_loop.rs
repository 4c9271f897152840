use ibb_core::{ConverterParams, OperatingPoint};
use ibb_sim::circuit::FixedDuty;
use ibb_sim::control::CmMode;
use ibb_sim::kpi::{fourier, window};
use ibb_sim::scenario::*;
use ibb_sim::{run, trace_kpis};
use proptest::prelude::*;

#[test]
fn rectifier_meets_grid_quality_at_full_load() {
    let op = OperatingPoint::rectifier();
    let p = ConverterParams::rectifier();
    let tr = run_rectifier(&op, &p, default_smoothing(op.v_ac_hat), 10.0, DEFAULT_STEPS_PER_PERIOD).unwrap();
    let k = trace_kpis(&tr, 3).unwrap();
    assert!((k.v_dc_mean - 270.0).abs() <= 0.05 * 270.0, "{k:?}");
    assert!(k.v_dc_ripple <= 0.10, "{k:?}");
    assert!(k.thd_i < 0.05, "{k:?}");
    assert!(k.pf > 0.99, "{k:?}");
    assert!(k.audit_residue < 0.005, "{k:?}");
}

#[test]
fn dpwm_rectifier_never_switches_the_clamped_phase() {
    let op = OperatingPoint::rectifier();
    let p = ConverterParams::rectifier();
    let tr = run_rectifier(&op, &p, CmMode::Dpwm, 3.0, DEFAULT_STEPS_PER_PERIOD).unwrap();
    for s in &tr.samples {
        assert_eq!(s.clamped.iter().filter(|&&c| c).count(), 1);
        for k in 0..3 {
            if s.clamped[k] {
                assert_eq!(s.duty[k], 0.0);
            }
        }
    }
}

fn inverter(v_dc: f64) -> (OperatingPoint, ConverterParams) {
    (OperatingPoint::inverter(v_dc), ConverterParams::inverter())
}

#[test]
fn nominal_inverter_output_is_sinusoidal() {
    let (op, p) = inverter(80.0);
    let load = inverter_load(&op, INVERTER_LOAD_L);
    let tr = run_inverter(&op, &p, load, default_smoothing(op.v_ac_hat), 6.0, DEFAULT_STEPS_PER_PERIOD).unwrap();
    let k = trace_kpis(&tr, 2).unwrap();
    assert!(k.thd_v_dm < 0.05, "{k:?}");
    assert!((k.p_out - op.p_out).abs() < 0.05 * op.p_out, "{k:?}");
}

#[test]
fn inverter_amplitude_step_settles() {
    let (op, p) = inverter(240.0);
    let mut low = op;
    low.v_ac_hat = 40.0;
    let load = inverter_load(&op, INVERTER_LOAD_L);
    let c = inverter_circuit(&low, &p, load);
    let mut ctl = inverter_controller(&low, &p, default_smoothing(op.v_ac_hat));
    let t_step = 3.0 / op.f_o;
    ctl.v_hat = vec![(0.0, 40.0), (t_step, 80.0)];
    let tr = run(&c, &mut ctl, 13.0 / op.f_o, 1.0 / (DEFAULT_STEPS_PER_PERIOD as f64 * op.f_s)).unwrap();
    let r = window(&tr, 1).unwrap();
    let s = &tr.samples[r];
    let v: Vec<f64> = s.iter().map(|x| x.v_c[0] - x.v_c.iter().sum::<f64>() / 3.0).collect();
    let (a, b) = fourier(&v, tr.dt, s[0].t, op.f_o, 1);
    let amp = a.hypot(b);
    assert!((amp - 80.0).abs() < 0.02 * 80.0, "{amp}");
}

#[test]
fn halving_dt_leaves_kpis_unchanged() {
    let (op, p) = inverter(80.0);
    let load = inverter_load(&op, INVERTER_LOAD_L);
    let run_at = |steps| {
        let tr = run_inverter(&op, &p, load, default_smoothing(op.v_ac_hat), 4.0, steps).unwrap();
        trace_kpis(&tr, 2).unwrap()
    };
    let (a, b) = (run_at(DEFAULT_STEPS_PER_PERIOD), run_at(2 * DEFAULT_STEPS_PER_PERIOD));
    assert!((a.thd_v_dm - b.thd_v_dm).abs() < 0.002, "{a:?} {b:?}");
    assert!((a.pf - b.pf).abs() < 0.002, "{a:?} {b:?}");
    assert!((a.p_out - b.p_out).abs() < 0.002 * a.p_out, "{a:?} {b:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn open_loop_inverter_stays_bounded(
        da in 0.0..0.9f64, db in 0.0..0.9f64, dc in 0.0..0.9f64, v_dc in 80.0..240.0f64
    ) {
        let (op, p) = inverter(v_dc);
        let load = inverter_load(&op, INVERTER_LOAD_L);
        let c = inverter_circuit(&op, &p, load);
        let mut drv = FixedDuty { f_s: op.f_s, duty: [da, db, dc] };
        let tr = run(&c, &mut drv, 0.5 / op.f_o, 1.0 / (200.0 * op.f_s)).unwrap();
        // Steady state of the R-L loaded phases: |v_c| <= v_dc d / (1 - d).
        let v_max = v_dc * 0.9 / 0.1;
        for s in &tr.samples {
            for k in 0..3 {
                prop_assert!(s.v_c[k].abs() <= 2.0 * v_max && s.i_l[k].is_finite());
            }
        }
    }
}
