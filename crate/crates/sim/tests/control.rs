use ibb_core::converter::{balanced_dm, cm_offset_dpwm, steady_duty};
use ibb_core::{ConverterParams, OperatingPoint};
use ibb_sim::circuit::Measurement;
use ibb_sim::control::*;
use std::f64::consts::{PI, TAU};

const F_CTRL: f64 = 140e3;

fn angle_error(a: f64, b: f64) -> f64 {
    ((a - b + PI).rem_euclid(TAU) - PI).abs()
}

/// Runs the default PLL on a clean grid whose frequency follows `f(t)`;
/// returns the largest angle error over the last fundamental period.
fn pll_track(f: impl Fn(f64) -> f64, periods_at: f64, pll: &mut Pll) -> f64 {
    let dt = 1.0 / F_CTRL;
    let mut th = 0.0;
    let mut t = 0.0;
    let mut worst: f64 = 0.0;
    while t < periods_at {
        let v = balanced_dm(115.0 * 2f64.sqrt(), th);
        pll_step(v, pll, dt);
        th += TAU * f(t) * dt;
        t += dt;
        if t > periods_at - 1.0 / f(t) {
            worst = worst.max(angle_error(pll.theta, th));
        }
    }
    worst
}

fn default_pll() -> Pll {
    let op = OperatingPoint::rectifier();
    Pll::new(0.0, op.omega(), PllGains::critically_damped(PLL_BANDWIDTH))
}

#[test]
fn pll_locks_within_five_periods_across_the_range() {
    for f in [360.0, 400.0, 500.0, 650.0, 800.0] {
        let mut pll = default_pll();
        let err = pll_track(|_| f, 5.0 / f, &mut pll);
        assert!(err.to_degrees() < 0.1, "{f} Hz: {} deg", err.to_degrees());
        assert!((pll.omega - TAU * f).abs() < 1e-3 * TAU * f);
    }
}

#[test]
fn pll_relocks_after_frequency_step() {
    let mut pll = default_pll();
    let f = |t: f64| if t < 10.0 / 360.0 { 360.0 } else { 800.0 };
    let err = pll_track(f, 10.0 / 360.0 + 10.0 / 800.0, &mut pll);
    assert!(pll.theta.is_finite() && pll.omega.is_finite());
    assert!(err.to_degrees() < 0.1, "{}", err.to_degrees());
}

#[test]
fn pll_freewheels_without_input() {
    let mut pll = default_pll();
    let w = pll.omega;
    for _ in 0..1000 {
        pll_step([0.0; 3], &mut pll, 1.0 / F_CTRL);
    }
    assert_eq!(pll.omega, w);
}

fn cascade() -> InnerCascade {
    let op = OperatingPoint::rectifier();
    let bw = Bandwidths::cascade(op.f_s / 5.0, 4.0);
    InnerCascade::new(&ConverterParams::rectifier(), &bw, 10.0, CmMode::Dpwm)
}

/// Measurement at which every loop of `cascade()` sees zero error for the
/// constant references `dm`.
fn settled(c: &InnerCascade, dm: [f64; 3], i_ac: [f64; 3], v_dc: f64) -> Measurement {
    let refs = cm_offset_dpwm(dm);
    let mut m = Measurement { t: 0.0, v_dc, v_c: refs.total, i_l: [0.0; 3], i_ac, e: dm, i_load_dc: 0.0 };
    for k in 0..3 {
        // Fixed point of `v_c = ref - offset(|v_c|)`.
        for _ in 0..60 {
            let v = (-m.v_c[k]).max(0.0);
            let d = steady_duty(v_dc, v).unwrap();
            m.v_c[k] = refs.total[k] - cap_ripple_offset(v, d, 1.0 / F_CTRL, c.l_bb, c.c_ac);
        }
        m.i_l[k] = -i_ac[k] * (1.0 + (-m.v_c[k]) / v_dc);
    }
    m
}

#[test]
fn zero_error_gives_feedforward_duties() {
    let mut c = cascade();
    let dm = balanced_dm(160.0, 0.4);
    let i_ac = balanced_dm(2.4, 0.4);
    let m = settled(&c, dm, i_ac, 270.0);
    let out = c.step(&m, dm, dm, dm, 1.0 / F_CTRL).unwrap();
    for k in 0..3 {
        if out.command.clamped[k] {
            continue;
        }
        let v = -m.v_c[k];
        let d_ss = v / (v + 270.0);
        let r = cap_ripple_offset(v, d_ss, 1.0 / F_CTRL, c.l_bb, c.c_ac) / (1.0 + 2.0 * d_ss);
        let want = steady_duty(270.0, v - r).unwrap();
        assert!((out.command.duty[k] - want).abs() < 1e-12, "{} {want}", out.command.duty[k]);
    }
}

#[test]
fn inductor_reference_scales_switch_current() {
    let mut c = cascade();
    for th in [0.1, 1.3, 2.9, 4.4] {
        let dm = balanced_dm(160.0, th);
        let m = settled(&c, dm, balanced_dm(2.4, th + 0.2), 270.0);
        let out = c.step(&m, dm, dm, dm, 1.0 / F_CTRL).unwrap();
        for k in 0..3 {
            if out.command.clamped[k] {
                continue;
            }
            let d = steady_duty(270.0, -m.v_c[k]).unwrap();
            let lhs = out.command.i_l_ref[k] * (1.0 - d);
            assert!((lhs - out.i_sw_ref[k]).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }
}

#[test]
fn clamped_phase_gets_zero_duty() {
    let mut c = cascade();
    for n in 0..200 {
        let th = TAU * n as f64 / 200.0;
        let dm = balanced_dm(160.0, th);
        let m = settled(&c, dm, [0.0; 3], 270.0);
        let out = c.step(&m, dm, dm, dm, 1.0 / F_CTRL).unwrap();
        let k = cm_offset_dpwm(dm).clamped.unwrap();
        assert!(out.command.clamped[k]);
        assert_eq!(out.command.duty[k], 0.0);
        assert_eq!(out.command.clamped.iter().filter(|&&x| x).count(), 1);
    }
}

/// Integrating plant `k y' = u` under `pi`; `hold` steps with the output
/// forced into a zero-width limit first. Returns the peak overshoot.
fn step_overshoot(hold: usize) -> f64 {
    let k = 1e-6;
    let dt = 1.0 / F_CTRL;
    let mut pi = Pi::new(PiGains::for_integrator(k, 5e3, 50.0));
    let mut y = 0.0;
    for _ in 0..hold {
        let (u, _) = pi.step_limited(1.0 - y, 0.0, dt, 0.0, 0.0);
        y += u * dt / k;
    }
    let mut peak: f64 = 0.0;
    for _ in 0..5000 {
        let (u, _) = pi.step(1.0 - y, 0.0, dt);
        y += u * dt / k;
        peak = peak.max(y - 1.0);
    }
    assert!((y - 1.0).abs() < 1e-3);
    peak
}

#[test]
fn anti_windup_recovers_without_extra_overshoot() {
    let free = step_overshoot(0);
    let held = step_overshoot(1000);
    assert!(held <= 2.0 * free + 1e-12, "{held} vs {free}");
}

#[test]
fn cm_reference_has_no_sharp_edge() {
    let op = OperatingPoint::rectifier();
    let v = op.v_ac_hat;
    let step = op.omega() / F_CTRL;
    let v_var = 0.2 * v;
    let n = (TAU / step) as usize;
    let cm_s: Vec<f64> = (0..n).map(|j| cm_smoothing(balanced_dm(v, j as f64 * step), v_var).0.cm).collect();
    let cm_d: Vec<f64> = (0..n).map(|j| cm_offset_dpwm(balanced_dm(v, j as f64 * step)).cm).collect();
    let d1 = |x: &[f64]| x.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let d2 = |x: &[f64]| x.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).fold(0.0, f64::max);
    let slope_bound = (1.0 + 3f64.sqrt() / 2.0) * v * step;
    assert!(d1(&cm_s) <= slope_bound, "{} > {slope_bound}", d1(&cm_s));
    assert!(d2(&cm_s) < 0.25 * d2(&cm_d), "{} vs {}", d2(&cm_s), d2(&cm_d));
}

#[test]
fn default_bandwidths_keep_cascade_separation() {
    let op = OperatingPoint::rectifier();
    let g = RectifierGains::from_plant(
        &ConverterParams::rectifier(),
        op.v_dc,
        op.p_out,
        op.v_ac_hat,
        Bandwidths::cascade(op.f_s / 5.0, 4.0),
    );
    let b = g.bandwidths;
    assert!(b.i_l > b.v_c && b.v_c > b.i_grid && b.i_grid > b.v_dc);
    assert!(b.min_ratio() >= 4.0 - 1e-12);
}
