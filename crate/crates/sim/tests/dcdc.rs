use ibb_core::converter::steady_duty;
use ibb_core::ConverterParams;
use ibb_sim::scenario::{dcdc_circuit, run_dcdc, DCDC_SAMPLES_PER_PERIOD as SPP};
use ibb_sim::{run, Trace};

fn ideal() -> ConverterParams {
    ConverterParams { r_ds_on: 0.0, dead_time: 0.0, ..ConverterParams::rectifier() }
}

const F_S: f64 = 140e3;

/// Mean `|v_c|` over the last `n` switching periods.
fn mean_v_c(tr: &Trace, n: usize) -> f64 {
    let s = &tr.samples[tr.samples.len() - 1 - n * SPP..tr.samples.len() - 1];
    s.iter().map(|x| -x.v_c[0]).sum::<f64>() / s.len() as f64
}

#[test]
fn output_follows_volt_second_balance() {
    for (v_dc, d) in [(100.0, 0.2), (100.0, 0.5), (270.0, 0.376), (80.0, 0.65), (240.0, 0.3)] {
        let tr = run_dcdc(&ideal(), F_S, v_dc, 50.0, d, 300.0 / F_S).unwrap();
        let ratio = mean_v_c(&tr, 100) / v_dc;
        let want = d / (1.0 - d);
        assert!((ratio - want).abs() <= 0.01 * want, "d = {d}: {ratio} vs {want}");
        let back = steady_duty(v_dc, ratio * v_dc).unwrap();
        assert!((back - d).abs() <= 0.01 * d);
    }
}

#[test]
fn half_duty_mirrors_the_input() {
    let tr = run_dcdc(&ideal(), F_S, 100.0, 50.0, 0.5, 300.0 / F_S).unwrap();
    let v = mean_v_c(&tr, 100);
    assert!((v - 100.0).abs() <= 1.0, "{v}");
}

#[test]
fn lossless_phase_delivers_its_input_power() {
    let tr = run_dcdc(&ideal(), F_S, 100.0, 50.0, 0.4, 300.0 / F_S).unwrap();
    let (a, b) = (&tr.samples[tr.samples.len() - 1 - 100 * SPP], &tr.samples[tr.samples.len() - 1]);
    let p_in = b.e_in - a.e_in;
    let p_out = b.e_out - a.e_out;
    let stored = b.e_stored - a.e_stored;
    assert!(b.e_loss - a.e_loss < 1e-12 * p_in);
    assert!((p_in - p_out - stored).abs() <= 1e-3 * p_in, "{p_in} {p_out} {stored}");
    assert!((p_in - p_out).abs() <= 1e-3 * p_in);
}

#[test]
fn cap_diodes_clamp_positive_voltage() {
    let mut c = dcdc_circuit(&ideal(), 100.0, 50.0, 0.0);
    c.cap_diodes = true;
    c.v_f_cap = 0.7;
    c.initial.v_c[0] = 20.0;
    c.initial.i_l[0] = 2.0;
    c.record_interval = 0.1 / F_S;
    let mut drv = ibb_sim::circuit::FixedDuty { f_s: F_S, duty: [0.0; 3] };
    let tr = run(&c, &mut drv, 20.0 / F_S, 1.0 / (500.0 * F_S)).unwrap();
    for s in &tr.samples[1..] {
        assert!(s.v_c[0] <= 0.7 + 1e-9, "{}", s.v_c[0]);
    }
    let last = tr.samples.last().unwrap();
    let closure = last.e_in - last.e_out - last.e_loss - last.e_stored;
    let e0 = c.stored_energy(&c.initial);
    assert!((closure + e0).abs() < 1e-9 * e0.max(1e-12), "{closure} {e0}");
}
