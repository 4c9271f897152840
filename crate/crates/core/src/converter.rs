//! Closed-form per-phase relations of the inverting buck-boost cell and the
//! three-phase common-mode algebra.
//!
//! Sign convention: the inductor current `i_L` is positive when it flows from
//! the DC- rail through the inductor into the switched node. AC capacitor
//! voltages are the physical node voltages with respect to DC-, so
//! `v_C <= 0` in normal operation. `d` is the duty cycle of the DC-side
//! switch T1; the AC-side switch T2 conducts for `1 - d`.

use crate::error::{domain, require_positive, Result};
use std::f64::consts::{FRAC_PI_3, PI, TAU};

/// Phase displacement of phase `k` (0 = a, 1 = b, 2 = c).
pub fn phase_shift(k: usize) -> f64 {
    k as f64 * 2.0 * FRAC_PI_3
}

/// Electrical operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    /// DC-side voltage (V).
    pub v_dc: f64,
    /// AC phase voltage amplitude referred to the star point (V).
    pub v_ac_hat: f64,
    /// Active power (W).
    pub p_out: f64,
    /// Fundamental frequency (Hz).
    pub f_o: f64,
    /// Nominal switching frequency (Hz).
    pub f_s: f64,
    /// Switching-frequency ceiling for boundary conduction mode (Hz).
    pub f_s_max: f64,
}

impl OperatingPoint {
    /// 600 W rectifier: 115 V rms grid at 400 Hz, 270 V DC, 140 kHz.
    pub fn rectifier() -> Self {
        Self {
            v_dc: 270.0,
            v_ac_hat: 115.0 * 2f64.sqrt(),
            p_out: 600.0,
            f_o: 400.0,
            f_s: 140e3,
            f_s_max: 300e3,
        }
    }

    /// 1 kW inverter: 80 V amplitude at 1 kHz, 300 kHz switching.
    pub fn inverter(v_dc: f64) -> Self {
        Self {
            v_dc,
            v_ac_hat: 80.0,
            p_out: 1000.0,
            f_o: 1000.0,
            f_s: 300e3,
            f_s_max: 600e3,
        }
    }

    /// Checks positivity and the `f_s >= 20 f_o` separation.
    pub fn validate(&self) -> Result<()> {
        require_positive("v_dc", self.v_dc)?;
        require_positive("v_ac_hat", self.v_ac_hat)?;
        require_positive("p_out", self.p_out)?;
        require_positive("f_o", self.f_o)?;
        require_positive("f_s", self.f_s)?;
        require_positive("f_s_max", self.f_s_max)?;
        if self.f_s < 20.0 * self.f_o {
            return Err(domain(format!(
                "f_s = {} Hz must be at least 20 f_o = {} Hz",
                self.f_s,
                20.0 * self.f_o
            )));
        }
        Ok(())
    }

    /// Fundamental angular frequency (rad/s).
    pub fn omega(&self) -> f64 {
        TAU * self.f_o
    }

    /// Fundamental period (s).
    pub fn period(&self) -> f64 {
        1.0 / self.f_o
    }

    /// AC phase current amplitude at unity power factor, `2P / (3 V)`.
    pub fn i_ac_hat(&self) -> f64 {
        ac_current_amplitude(self.p_out, self.v_ac_hat)
    }
}

/// Phase current amplitude `2P / (3 V_hat)` of a balanced three-phase system.
pub fn ac_current_amplitude(p: f64, v_hat: f64) -> f64 {
    2.0 * p / (3.0 * v_hat)
}

/// Passive components and semiconductor abstractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterParams {
    /// Buck-boost inductance per phase (H).
    pub l_bb: f64,
    /// AC-side capacitance per phase (F).
    pub c_ac: f64,
    /// DC-link capacitance (F).
    pub c_dc: f64,
    /// Grid filter inductance per phase, rectifier only (H).
    pub l_f: f64,
    /// DC load resistance, rectifier only (ohm).
    pub r_load_dc: f64,
    /// Effective output capacitance of one switch position (F).
    pub c_oss: f64,
    /// On-resistance of one device at operating temperature (ohm).
    pub r_ds_on: f64,
    /// Parallel devices per switch position.
    pub n_par: u32,
    /// Devices per half-bridge.
    pub n_hb: u32,
    /// Dead time between complementary gates (s).
    pub dead_time: f64,
}

impl ConverterParams {
    /// Rectifier passives with one 30 mOhm SiC device per switch.
    pub fn rectifier() -> Self {
        let op = OperatingPoint::rectifier();
        Self {
            l_bb: 75e-6,
            c_ac: 1e-6,
            c_dc: 10e-6,
            l_f: 75e-6,
            r_load_dc: op.v_dc * op.v_dc / op.p_out,
            c_oss: 160e-12,
            r_ds_on: 30e-3,
            n_par: 1,
            n_hb: 2,
            dead_time: 20e-9,
        }
    }

    /// Inverter passives with two paralleled GaN devices per switch (hot on-resistance).
    pub fn inverter() -> Self {
        Self {
            l_bb: 10e-6,
            c_ac: 3e-6,
            c_dc: 70e-6,
            l_f: 0.0,
            r_load_dc: 0.0,
            c_oss: 140e-12,
            r_ds_on: 100e-3,
            n_par: 2,
            n_hb: 4,
            dead_time: 20e-9,
        }
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        require_positive("l_bb", self.l_bb)?;
        require_positive("c_ac", self.c_ac)?;
        require_positive("c_dc", self.c_dc)?;
        if self.n_par == 0 || self.n_hb != 2 * self.n_par {
            return Err(domain(format!(
                "n_hb ({}) must equal 2 n_par ({})",
                self.n_hb, self.n_par
            )));
        }
        for (name, v) in [
            ("l_f", self.l_f),
            ("r_load_dc", self.r_load_dc),
            ("c_oss", self.c_oss),
            ("r_ds_on", self.r_ds_on),
            ("dead_time", self.dead_time),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// On-resistance of one switch position (parallel devices combined).
    pub fn r_on_eff(&self) -> f64 {
        self.r_ds_on / self.n_par as f64
    }
}

/// Steady-state duty `d = |V_an| / (V_dc + |V_an|)` from volt-second balance.
pub fn steady_duty(v_dc: f64, v_an_abs: f64) -> Result<f64> {
    require_positive("v_dc", v_dc)?;
    if !(v_an_abs.is_finite() && v_an_abs >= 0.0) {
        return Err(domain(format!("|v_an| must be >= 0, got {v_an_abs}")));
    }
    Ok(v_an_abs / (v_dc + v_an_abs))
}

/// Peak-to-peak inductor ripple `|V_an| V_dc / (L f_s (|V_an| + V_dc))`.
pub fn ripple_pkpk(v_dc: f64, v_an_abs: f64, l: f64, f_s: f64) -> Result<f64> {
    require_positive("l", l)?;
    require_positive("f_s", f_s)?;
    let (a, b) = (v_dc.abs(), v_an_abs.abs());
    if a + b == 0.0 {
        return Ok(0.0);
    }
    Ok(a * b / (l * f_s * (a + b)))
}

/// Minimum commutation current for a complete soft transition, `v_max sqrt(c_oss / l)`.
pub fn zvs_current_threshold(v_max: f64, c_oss: f64, l: f64) -> Result<f64> {
    require_positive("v_max", v_max)?;
    require_positive("l", l)?;
    if !(c_oss.is_finite() && c_oss >= 0.0) {
        return Err(domain(format!("c_oss must be >= 0, got {c_oss}")));
    }
    Ok(v_max * (c_oss / l).sqrt())
}

/// Differential-mode, common-mode and total AC capacitor voltage references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRefs {
    /// Differential-mode references (V).
    pub dm: [f64; 3],
    /// Common-mode offset (V).
    pub cm: f64,
    /// Total references `dm + cm` (V).
    pub total: [f64; 3],
    /// Clamped phase, if any.
    pub clamped: Option<usize>,
    /// Two references tied for the maximum (sector boundary).
    pub boundary: bool,
}

impl PhaseRefs {
    /// Builds the totals from a DM triple and a CM offset.
    pub fn from_cm(dm: [f64; 3], cm: f64, clamped: Option<usize>, boundary: bool) -> Self {
        Self {
            dm,
            cm,
            total: [dm[0] + cm, dm[1] + cm, dm[2] + cm],
            clamped,
            boundary,
        }
    }
}

/// Index of the largest reference; ties go to the lower index.
pub fn argmax3(x: [f64; 3]) -> usize {
    let mut k = 0;
    for i in 1..3 {
        if x[i] > x[k] {
            k = i;
        }
    }
    k
}

/// DPWM common-mode offset `cm = -max(dm)`; the maximal phase is clamped to zero.
pub fn cm_offset_dpwm(dm: [f64; 3]) -> PhaseRefs {
    let k = argmax3(dm);
    let boundary = (0..3).any(|i| i != k && dm[i] == dm[k]);
    let mut refs = PhaseRefs::from_cm(dm, -dm[k], Some(k), boundary);
    refs.total[k] = 0.0;
    refs
}

/// Balanced DM references `v_hat cos(theta - k 2pi/3)`.
pub fn balanced_dm(v_hat: f64, theta: f64) -> [f64; 3] {
    [0, 1, 2].map(|k| v_hat * (theta - phase_shift(k)).cos())
}

/// Time derivative of the balanced DM references.
pub fn balanced_dm_dot(v_hat: f64, omega: f64, theta: f64) -> [f64; 3] {
    [0, 1, 2].map(|k| -v_hat * omega * (theta - phase_shift(k)).sin())
}

/// Duty command produced by the modulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCommand {
    /// Duty of the DC-side switch, clamped to `[0, 1]`.
    pub duty: f64,
    /// The unclamped value fell outside `[0, 1]`.
    pub saturated: bool,
}

/// Modulator `d = (|V_C| - V_L) / (|V_C| + V_dc)` for a desired average inductor voltage `V_L`.
pub fn modulator_duty(v_l_ref: f64, v_c_meas: f64, v_dc: f64) -> Result<DutyCommand> {
    require_positive("v_dc", v_dc)?;
    let vc = (-v_c_meas).max(0.0);
    let raw = (vc - v_l_ref) / (vc + v_dc);
    if !raw.is_finite() {
        return Err(domain("non-finite modulator input"));
    }
    Ok(DutyCommand {
        duty: raw.clamp(0.0, 1.0),
        saturated: !(0.0..=1.0).contains(&raw),
    })
}

/// Rotating-frame components with the zero-sequence part kept apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dq0 {
    pub d: f64,
    pub q: f64,
    pub zero: f64,
}

/// Amplitude-invariant inverse Park transform.
pub fn dq_to_abc(d: f64, q: f64, theta: f64) -> [f64; 3] {
    [0, 1, 2].map(|k| {
        let a = theta - phase_shift(k);
        d * a.cos() - q * a.sin()
    })
}

/// Amplitude-invariant Park transform.
pub fn abc_to_dq(abc: [f64; 3], theta: f64) -> Dq0 {
    let (mut d, mut q) = (0.0, 0.0);
    for (k, x) in abc.iter().enumerate() {
        let a = theta - phase_shift(k);
        d += x * a.cos();
        q -= x * a.sin();
    }
    Dq0 {
        d: 2.0 / 3.0 * d,
        q: 2.0 / 3.0 * q,
        zero: (abc[0] + abc[1] + abc[2]) / 3.0,
    }
}

/// One evaluation of the inductor current envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSample {
    /// Phase-a capacitor voltage under DPWM (V, <= 0).
    pub v_c: f64,
    /// Its time derivative (V/s).
    pub dv_c: f64,
    /// Phase-a load current (A).
    pub i_load: f64,
    /// Local average inductor current (A).
    pub i_avg: f64,
    /// Half of the peak-to-peak ripple (A).
    pub i_ripple: f64,
    /// Peak inductor current magnitude `|i_avg| + i_ripple` (A).
    pub i_pk: f64,
}

/// Phase-a DPWM capacitor voltage and its derivative at angle `theta`.
pub fn dpwm_phase_voltage(v_hat: f64, omega: f64, theta: f64) -> (f64, f64) {
    let dm = balanced_dm(v_hat, theta);
    let dot = balanced_dm_dot(v_hat, omega, theta);
    let k = argmax3(dm);
    (dm[0] - dm[k], dot[0] - dot[k])
}

/// Inverter inductor current envelope of phase a at time `t` under DPWM.
///
/// `i_avg = (I_a + C dV_Ca/dt)(1 + |V_Ca|/V_dc)`,
/// `i_ripple = V_dc |V_Ca| / (2 f_s L (V_dc + |V_Ca|))`.
/// The load current is in phase with the DM voltage.
pub fn inductor_envelope(t: f64, op: &OperatingPoint, params: &ConverterParams) -> EnvelopeSample {
    let w = op.omega();
    let theta = w * t;
    let (v_c, dv_c) = dpwm_phase_voltage(op.v_ac_hat, w, theta);
    let i_load = op.i_ac_hat() * theta.cos();
    let vabs = v_c.abs();
    let i_avg = (i_load + params.c_ac * dv_c) * (1.0 + vabs / op.v_dc);
    let i_ripple = op.v_dc * vabs / (2.0 * op.f_s * params.l_bb * (op.v_dc + vabs));
    EnvelopeSample {
        v_c,
        dv_c,
        i_load,
        i_avg,
        i_ripple,
        i_pk: i_avg.abs() + i_ripple,
    }
}

/// Location and value of the envelope maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePeak {
    /// Time within the fundamental period (s).
    pub t: f64,
    /// Peak magnitude (A).
    pub i_pk: f64,
}

/// Maximum of the envelope over one fundamental period.
///
/// The envelope is smooth between the DPWM sector boundaries (multiples of
/// 60 degrees), so each sector is bracketed on a coarse grid and the best
/// brackets are refined by golden-section search.
pub fn envelope_peak(op: &OperatingPoint, params: &ConverterParams) -> EnvelopePeak {
    let w = op.omega();
    let f = |theta: f64| inductor_envelope(theta / w, op, params).i_pk;
    let mut best = EnvelopePeak { t: 0.0, i_pk: f(0.0) };
    const SECTORS: usize = 6;
    const COARSE: usize = 64;
    for s in 0..SECTORS {
        let a0 = s as f64 * PI / 3.0;
        let h = (PI / 3.0) / COARSE as f64;
        // Slightly inside the sector so the active argmax stays fixed.
        let eps = 1e-12;
        let xs: Vec<f64> = (0..=COARSE)
            .map(|j| (a0 + j as f64 * h).clamp(a0 + eps, a0 + PI / 3.0 - eps))
            .collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        for j in 0..=COARSE {
            let (lo, hi) = (j.saturating_sub(1), (j + 1).min(COARSE));
            if ys[j] >= ys[lo] && ys[j] >= ys[hi] {
                let (x, y) = golden_max(&f, xs[lo], xs[hi]);
                let (x, y) = if y >= ys[j] { (x, y) } else { (xs[j], ys[j]) };
                if y > best.i_pk {
                    best = EnvelopePeak { t: x / w, i_pk: y };
                }
            }
        }
    }
    best
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-13 {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duty_examples() {
        assert!((steady_duty(100.0, 100.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(steady_duty(42.0, 0.0).unwrap(), 0.0);
        assert!((steady_duty(270.0, 162.6).unwrap() - 0.3758).abs() < 1e-4);
        assert!(steady_duty(0.0, 1.0).is_err());
        assert!(steady_duty(-5.0, 1.0).is_err());
    }

    #[test]
    fn ripple_examples() {
        assert_eq!(ripple_pkpk(300.0, 0.0, 1e-6, 1e5).unwrap(), 0.0);
        let r = ripple_pkpk(270.0, 162.6, 75e-6, 140e3).unwrap();
        assert!((r - 9.665).abs() < 1e-3, "{r}");
        let r = ripple_pkpk(80.0, 80.0, 10e-6, 300e3).unwrap();
        assert!((r - 13.333).abs() < 1e-3, "{r}");
        assert!(ripple_pkpk(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(ripple_pkpk(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn zvs_examples() {
        assert!((zvs_current_threshold(400.0, 1e-9, 10e-6).unwrap() - 4.0).abs() < 1e-12);
        assert!((zvs_current_threshold(400.0, 4e-9, 10e-6).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(zvs_current_threshold(400.0, 0.0, 10e-6).unwrap(), 0.0);
    }

    #[test]
    fn dpwm_examples() {
        let r = cm_offset_dpwm([10.0, -5.0, -5.0]);
        assert_eq!(r.cm, -10.0);
        assert_eq!(r.total, [0.0, -15.0, -15.0]);
        assert_eq!(r.clamped, Some(0));
        assert!(!r.boundary);
        let r = cm_offset_dpwm([0.0, 0.0, 0.0]);
        assert_eq!(r.total, [0.0; 3]);
        assert_eq!(r.clamped, Some(0));
        assert!(r.boundary);
        let r = cm_offset_dpwm([1.0, 3.0, 3.0]);
        assert_eq!(r.clamped, Some(1));
        assert!(r.boundary);
    }

    #[test]
    fn dpwm_clamps_each_phase_one_third() {
        let n = 30_000;
        let mut count = [0usize; 3];
        for j in 0..n {
            let th = TAU * (j as f64 + 0.5) / n as f64;
            count[cm_offset_dpwm(balanced_dm(100.0, th)).clamped.unwrap()] += 1;
        }
        for c in count {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 1e-3);
        }
    }

    #[test]
    fn modulator_examples() {
        assert!((modulator_duty(0.0, -100.0, 100.0).unwrap().duty - 0.5).abs() < 1e-15);
        assert_eq!(modulator_duty(0.0, 0.0, 50.0).unwrap().duty, 0.0);
        assert!((modulator_duty(-10.0, -100.0, 100.0).unwrap().duty - 0.55).abs() < 1e-15);
        let sat = modulator_duty(500.0, -100.0, 100.0).unwrap();
        assert_eq!(sat.duty, 0.0);
        assert!(sat.saturated);
        let sat = modulator_duty(-500.0, -100.0, 100.0).unwrap();
        assert_eq!(sat.duty, 1.0);
        assert!(sat.saturated);
    }

    #[test]
    fn park_examples() {
        let abc = dq_to_abc(1.0, 0.0, 0.0);
        assert!((abc[0] - 1.0).abs() < 1e-15);
        assert_eq!(dq_to_abc(0.0, 0.0, 1.3), [0.0, 0.0, 0.0]);
        let dq = abc_to_dq([1.0, 1.0, 1.0], 0.4);
        assert!(dq.d.abs() < 1e-15 && dq.q.abs() < 1e-15);
        assert!((dq.zero - 1.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_zero_voltage_has_no_ripple() {
        let op = OperatingPoint::inverter(80.0);
        let p = ConverterParams::inverter();
        // Phase a is clamped around theta = 0.
        let e = inductor_envelope(0.0, &op, &p);
        assert_eq!(e.v_c, 0.0);
        assert_eq!(e.i_ripple, 0.0);
    }

    #[test]
    fn envelope_peak_matches_dense_sampling() {
        for v_dc in [80.0, 160.0, 240.0] {
            let op = OperatingPoint::inverter(v_dc);
            let p = ConverterParams::inverter();
            let peak = envelope_peak(&op, &p);
            let n = 10_000;
            let dense = (0..n)
                .map(|j| inductor_envelope(j as f64 / n as f64 / op.f_o, &op, &p).i_pk)
                .fold(0.0, f64::max);
            assert!(peak.i_pk >= dense * (1.0 - 1e-12));
            assert!((peak.i_pk - dense) / dense < 5e-3, "{} vs {}", peak.i_pk, dense);
        }
    }

    #[test]
    fn params_validate() {
        assert!(ConverterParams::rectifier().validate().is_ok());
        assert!(ConverterParams::inverter().validate().is_ok());
        let mut p = ConverterParams::inverter();
        p.n_hb = 3;
        assert!(p.validate().is_err());
        let mut op = OperatingPoint::rectifier();
        assert!(op.validate().is_ok());
        op.f_s = 10.0 * op.f_o;
        assert!(op.validate().is_err());
    }

    #[test]
    fn rectifier_load_resistance() {
        assert!((ConverterParams::rectifier().r_load_dc - 121.5).abs() < 1e-12);
        assert!((OperatingPoint::inverter(80.0).i_ac_hat() - 8.3333).abs() < 1e-4);
    }
}
