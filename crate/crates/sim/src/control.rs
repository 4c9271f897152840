//! Cascaded controllers: SRF-PLL, DC-voltage and dq grid-current loops of the
//! rectifier, and the per-phase capacitor-voltage / inductor-current cascade
//! shared with the inverter.

use crate::circuit::{Command, Driver, Measurement};
use crate::error::{config, Result};
use ibb_core::converter::{
    abc_to_dq, argmax3, balanced_dm, cm_offset_dpwm, dq_to_abc, modulator_duty, PhaseRefs,
};
use ibb_core::ConverterParams;
use std::f64::consts::{PI, TAU};

/// PI gains with output limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
    pub lo: f64,
    pub hi: f64,
}

impl PiGains {
    /// `kp = k_plant w_c`, `ki = kp w_c / 4` for an integrating plant `1 / (k_plant s)`.
    pub fn for_integrator(k_plant: f64, f_c: f64, limit: f64) -> Self {
        let w = TAU * f_c;
        let kp = k_plant * w;
        Self { kp, ki: kp * w / 4.0, lo: -limit, hi: limit }
    }
}

/// PI with conditional-integration anti-windup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pi {
    pub gains: PiGains,
    pub integ: f64,
}

impl Pi {
    pub fn new(gains: PiGains) -> Self {
        Self { gains, integ: 0.0 }
    }

    /// Output `ff + kp e + integ` limited to `[lo, hi]`; returns `(output, saturated)`.
    pub fn step(&mut self, err: f64, ff: f64, dt: f64) -> (f64, bool) {
        self.step_limited(err, ff, dt, self.gains.lo, self.gains.hi)
    }

    pub fn step_limited(&mut self, err: f64, ff: f64, dt: f64, lo: f64, hi: f64) -> (f64, bool) {
        let g = self.gains;
        let raw = ff + g.kp * err + self.integ;
        let out = raw.clamp(lo, hi);
        let pushing = (raw > hi && err > 0.0) || (raw < lo && err < 0.0);
        if !pushing {
            self.integ += g.ki * err * dt;
            self.integ = self.integ.clamp(lo, hi);
        }
        (out, raw != out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllGains {
    pub kp: f64,
    pub ki: f64,
}

impl PllGains {
    /// Critically damped second-order loop with natural frequency `f_n`.
    pub fn critically_damped(f_n: f64) -> Self {
        let w = TAU * f_n;
        Self { kp: 2.0 * w, ki: w * w }
    }
}

/// Default PLL natural frequency (Hz).
pub const PLL_BANDWIDTH: f64 = 400.0;

/// Synchronous-reference-frame PLL on the normalized q component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pll {
    pub theta: f64,
    pub omega: f64,
    /// Frequency integrator (rad/s).
    pub integ: f64,
    pub gains: PllGains,
}

impl Pll {
    pub fn new(theta: f64, omega: f64, gains: PllGains) -> Self {
        Self { theta, omega, integ: omega, gains }
    }
}

/// Advances the PLL by `dt` from the sample `v_grid`; returns the new `(theta, omega)`.
pub fn pll_step(v_grid: [f64; 3], state: &mut Pll, dt: f64) -> (f64, f64) {
    let dq = abc_to_dq(v_grid, state.theta);
    let amp = dq.d.hypot(dq.q);
    let err = if amp > 1e-9 { dq.q / amp } else { 0.0 };
    state.integ += state.gains.ki * err * dt;
    state.omega = state.integ + state.gains.kp * err;
    state.theta = (state.theta + state.omega * dt).rem_euclid(TAU);
    (state.theta, state.omega)
}

/// Common-mode selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CmMode {
    /// Clamp the phase with the largest DM reference.
    Dpwm,
    /// DPWM with a smooth CM transfer when the two largest references are within `v_var`.
    Smoothing { v_var: f64 },
}

/// Offset added on top of `-max(dm)` inside the window, `g` the gap between
/// the two largest references. Decays from `v/4` at `g = 0` to zero with zero
/// slope and curvature at `g = v`.
fn window_lift(g: f64, v: f64) -> f64 {
    v / 4.0 * (1.0 - g / v) - v / (4.0 * PI) * (PI * g / v).sin()
}

/// DPWM references with the CM edge smoothed; returns the references and the driven phases.
pub fn cm_smoothing(dm: [f64; 3], v_var: f64) -> (PhaseRefs, [bool; 3]) {
    let plain = cm_offset_dpwm(dm);
    let k1 = argmax3(dm);
    let top2 = (0..3).filter(|&k| k != k1).map(|k| dm[k]).fold(f64::NEG_INFINITY, f64::max);
    let g = dm[k1] - top2;
    if !(v_var > 0.0) || g >= v_var {
        let mut active = [true; 3];
        active[k1] = false;
        return (plain, active);
    }
    let cm = -(dm[k1] + window_lift(g, v_var));
    (PhaseRefs::from_cm(dm, cm, None, plain.boundary), [true; 3])
}

fn apply_cm(dm: [f64; 3], mode: CmMode) -> PhaseRefs {
    match mode {
        CmMode::Dpwm => cm_offset_dpwm(dm),
        CmMode::Smoothing { v_var } => cm_smoothing(dm, v_var).0,
    }
}

/// Period-average minus period-start capacitor voltage of a driven phase in
/// steady state: the centred carrier starts mid-way through the T2 interval,
/// where the inductor ripple ramps the capacitor current linearly.
pub fn cap_ripple_offset(v_abs: f64, d: f64, t_s: f64, l: f64, c: f64) -> f64 {
    v_abs * (1.0 - d).powi(2) * t_s * t_s * (1.0 + 2.0 * d) / (24.0 * l * c)
}

/// Loop crossover frequencies (Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidths {
    pub i_l: f64,
    pub v_c: f64,
    pub i_grid: f64,
    pub v_dc: f64,
}

impl Bandwidths {
    /// Inductor loop at `i_l`, each outer loop `ratio` times slower.
    pub fn cascade(i_l: f64, ratio: f64) -> Self {
        Self { i_l, v_c: i_l / ratio, i_grid: i_l / ratio.powi(2), v_dc: i_l / ratio.powi(3) }
    }

    /// Smallest ratio between adjacent loops.
    pub fn min_ratio(&self) -> f64 {
        (self.i_l / self.v_c).min(self.v_c / self.i_grid).min(self.i_grid / self.v_dc)
    }
}

/// Per-phase capacitor-voltage and inductor-current loops.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerCascade {
    pub l_bb: f64,
    pub c_ac: f64,
    pub v_c_gains: PiGains,
    pub i_l_gains: PiGains,
    pub cm: CmMode,
    /// Upper duty limit.
    pub d_max: f64,
    pub pi_c: [Pi; 3],
    pub pi_l: [Pi; 3],
    prev_i_l_ref: [Option<f64>; 3],
}

/// Per-phase output of the inner cascade.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InnerOutput {
    pub command: Command,
    /// AC-switch current references `i_C* - i_ac` (A).
    pub i_sw_ref: [f64; 3],
    pub saturated: [bool; 3],
}

impl InnerCascade {
    pub fn new(params: &ConverterParams, bw: &Bandwidths, i_c_max: f64, cm: CmMode) -> Self {
        let v_c_gains = PiGains::for_integrator(params.c_ac, bw.v_c, i_c_max);
        let i_l_gains = PiGains::for_integrator(params.l_bb, bw.i_l, f64::INFINITY);
        Self {
            l_bb: params.l_bb,
            c_ac: params.c_ac,
            v_c_gains,
            i_l_gains,
            cm,
            d_max: 0.95,
            pi_c: [Pi::new(v_c_gains); 3],
            pi_l: [Pi::new(i_l_gains); 3],
            prev_i_l_ref: [None; 3],
        }
    }

    /// One control period. `dm_now`, `dm_mid`, `dm_next` are the DM references at
    /// the sampling instant, half a period and one period later.
    pub fn step(
        &mut self,
        meas: &Measurement,
        dm_now: [f64; 3],
        dm_mid: [f64; 3],
        dm_next: [f64; 3],
        t_s: f64,
    ) -> Result<InnerOutput> {
        let now = apply_cm(dm_now, self.cm);
        let mid = apply_cm(dm_mid, self.cm);
        let next = apply_cm(dm_next, self.cm);
        let mut out = InnerOutput::default();
        out.command.v_cm = mid.cm;
        out.command.v_c_ref = mid.total;
        let v_dc = meas.v_dc.max(1e-3);
        for k in 0..3 {
            if mid.clamped == Some(k) {
                out.command.clamped[k] = true;
                self.prev_i_l_ref[k] = None;
                continue;
            }
            // Mid-period capacitor voltage predicted along the reference slope.
            let v_c = meas.v_c[k] + 0.5 * (next.total[k] - now.total[k]);
            let v_abs = (-v_c).max(0.0);
            let d_ss = v_abs / (v_abs + v_dc);
            let ripple = cap_ripple_offset(v_abs, d_ss, t_s, self.l_bb, self.c_ac);
            let ff = self.c_ac * (next.total[k] - now.total[k]) / t_s;
            // The sample sits `ripple` below the period average.
            let (i_c, _) = self.pi_c[k].step(now.total[k] - ripple - meas.v_c[k], ff, t_s);
            let i_sw = i_c - meas.i_ac[k];
            let i_l_ref = i_sw * (1.0 + v_abs / v_dc);
            let v_l_ff = match self.prev_i_l_ref[k] {
                Some(prev) => self.l_bb * (i_l_ref - prev) / t_s,
                None => 0.0,
            };
            let (v_l, sat) = self.pi_l[k].step_limited(i_l_ref - meas.i_l[k], v_l_ff, t_s, -v_dc, v_abs);
            // Capacitor voltage averaged over the T2 interval.
            let d = modulator_duty(v_l, v_c + ripple / (1.0 + 2.0 * d_ss), v_dc)?;
            out.command.duty[k] = d.duty.min(self.d_max);
            out.command.i_l_ref[k] = i_l_ref;
            self.prev_i_l_ref[k] = Some(i_l_ref);
            out.i_sw_ref[k] = i_sw;
            out.saturated[k] = sat || d.saturated;
        }
        Ok(out)
    }
}

/// Resonant terms at multiples of the fundamental in the dq frame: each error
/// component is demodulated at `h theta`, integrated and remodulated, giving
/// infinite loop gain at `h omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicComp {
    pub orders: Vec<u32>,
    /// Integral gain (V/(A s)).
    pub k_r: f64,
    /// Loop delay compensated by phase-advancing the remodulated output (s).
    pub lead: f64,
    states: Vec<[(f64, f64); 2]>,
}

impl HarmonicComp {
    pub fn new(orders: Vec<u32>, k_r: f64, lead: f64) -> Self {
        let states = vec![[(0.0, 0.0); 2]; orders.len()];
        Self { orders, k_r, lead, states }
    }

    /// Outputs added to the dq PI outputs for errors `(e_d, e_q)`.
    pub fn step(&mut self, err: [f64; 2], theta: f64, omega: f64, dt: f64) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (h, st) in self.orders.iter().zip(self.states.iter_mut()) {
            let ang = *h as f64 * theta;
            let (s, c) = ang.sin_cos();
            let (sl, cl) = (ang + *h as f64 * omega * self.lead).sin_cos();
            for k in 0..2 {
                st[k].0 += 2.0 * self.k_r * dt * err[k] * c;
                st[k].1 += 2.0 * self.k_r * dt * err[k] * s;
                out[k] += st[k].0 * cl + st[k].1 * sl;
            }
        }
        out
    }
}

/// Gains of the rectifier cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifierGains {
    pub bandwidths: Bandwidths,
    pub v_dc: PiGains,
    pub i_dq: PiGains,
    pub pll: PllGains,
    /// Limit of the capacitor-current reference (A).
    pub i_c_max: f64,
    /// Integral gain of the dq harmonic terms (V/(A s)).
    pub k_r: f64,
}

/// Harmonic orders in the dq frame compensated by default. DPWM clamps each
/// phase for a third of the period, so its errors repeat at `3 omega` in dq.
pub const DEFAULT_HARMONIC_ORDERS: [u32; 4] = [3, 6, 9, 12];

/// Loop delay compensated by the harmonic terms, in control periods.
pub const HARMONIC_LEAD_PERIODS: f64 = 6.0;

impl RectifierGains {
    pub fn from_plant(params: &ConverterParams, v_dc: f64, p_nom: f64, v_hat: f64, bw: Bandwidths) -> Self {
        Self {
            bandwidths: bw,
            v_dc: PiGains::for_integrator(params.c_dc, bw.v_dc, 3.0 * p_nom / v_dc),
            i_dq: PiGains::for_integrator(params.l_f, bw.i_grid, v_hat),
            pll: PllGains::critically_damped(PLL_BANDWIDTH),
            i_c_max: 4.0 * p_nom / v_hat,
            k_r: PiGains::for_integrator(params.l_f, bw.i_grid, v_hat).kp * TAU * 50.0,
        }
    }
}

/// Rectifier control: PLL, DC voltage, dq grid current, then the inner cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct RectifierController {
    pub f_s: f64,
    pub v_dc_ref: f64,
    pub l_f: f64,
    pub pll: Pll,
    pub pi_v_dc: Pi,
    pub pi_d: Pi,
    pub pi_q: Pi,
    pub harmonics: HarmonicComp,
    pub inner: InnerCascade,
}

impl RectifierController {
    pub fn new(
        params: &ConverterParams,
        gains: &RectifierGains,
        f_s: f64,
        v_dc_ref: f64,
        theta0: f64,
        omega0: f64,
        cm: CmMode,
    ) -> Result<Self> {
        if gains.bandwidths.min_ratio() < 4.0 - 1e-12 {
            return Err(config("adjacent loop bandwidths must differ by at least 4x"));
        }
        Ok(Self {
            f_s,
            v_dc_ref,
            l_f: params.l_f,
            pll: Pll::new(theta0, omega0, gains.pll),
            pi_v_dc: Pi::new(gains.v_dc),
            pi_d: Pi::new(gains.i_dq),
            pi_q: Pi::new(gains.i_dq),
            harmonics: HarmonicComp::new(DEFAULT_HARMONIC_ORDERS.to_vec(), gains.k_r, HARMONIC_LEAD_PERIODS / f_s),
            inner: InnerCascade::new(params, &gains.bandwidths, gains.i_c_max, cm),
        })
    }

    /// One control period from the measurements.
    pub fn rectifier_step(&mut self, meas: &Measurement) -> Result<InnerOutput> {
        let t_s = 1.0 / self.f_s;
        let theta = self.pll.theta;
        let (_, omega) = pll_step(meas.e, &mut self.pll, t_s);
        let (i_tdc, _) = self.pi_v_dc.step(self.v_dc_ref - meas.v_dc, meas.i_load_dc, t_s);
        let p_ref = meas.v_dc * i_tdc;
        let e = abc_to_dq(meas.e, theta);
        let i = abc_to_dq(meas.i_ac, theta);
        let i_d_ref = 2.0 * p_ref / (3.0 * e.d.max(1.0));
        let (u_d, _) = self.pi_d.step(i_d_ref - i.d, 0.0, t_s);
        let (u_q, _) = self.pi_q.step(-i.q, 0.0, t_s);
        let [h_d, h_q] = self.harmonics.step([i_d_ref - i.d, -i.q], theta, omega, t_s);
        let (u_d, u_q) = (u_d + h_d, u_q + h_q);
        let w_l = omega * self.l_f;
        let v_d = e.d + w_l * i.q - u_d;
        let v_q = e.q - w_l * i.d - u_q;
        let dm = |dth: f64| dq_to_abc(v_d, v_q, theta + dth);
        let wt = omega * t_s;
        self.inner.step(meas, dm(0.0), dm(0.5 * wt), dm(wt), t_s)
    }
}

impl Driver for RectifierController {
    fn period(&self) -> f64 {
        1.0 / self.f_s
    }

    fn update(&mut self, meas: &Measurement) -> Result<Command> {
        Ok(self.rectifier_step(meas)?.command)
    }
}

/// Inverter control: balanced DM voltage references into the inner cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct InverterController {
    pub f_s: f64,
    pub f_o: f64,
    pub theta0: f64,
    /// Amplitude schedule `(t_from, v_hat)`, sorted by time.
    pub v_hat: Vec<(f64, f64)>,
    pub inner: InnerCascade,
}

impl InverterController {
    pub fn new(params: &ConverterParams, f_s: f64, f_o: f64, v_hat: f64, i_c_max: f64, cm: CmMode) -> Self {
        let bw = Bandwidths::cascade(f_s / 20.0, 4.0);
        Self {
            f_s,
            f_o,
            theta0: 0.0,
            v_hat: vec![(0.0, v_hat)],
            inner: InnerCascade::new(params, &bw, i_c_max, cm),
        }
    }

    fn amplitude(&self, t: f64) -> f64 {
        self.v_hat.iter().take_while(|(t0, _)| *t0 <= t).last().map_or(0.0, |x| x.1)
    }

    /// One control period tracking `v_c_dm*` given at the sampling instant,
    /// half a period and one period later.
    pub fn inverter_inner_step(
        &mut self,
        meas: &Measurement,
        refs: [[f64; 3]; 3],
    ) -> Result<InnerOutput> {
        self.inner.step(meas, refs[0], refs[1], refs[2], 1.0 / self.f_s)
    }
}

impl Driver for InverterController {
    fn period(&self) -> f64 {
        1.0 / self.f_s
    }

    fn update(&mut self, meas: &Measurement) -> Result<Command> {
        let t_s = 1.0 / self.f_s;
        let at = |dt: f64| {
            let t = meas.t + dt;
            balanced_dm(self.amplitude(t), TAU * self.f_o * t + self.theta0)
        };
        let refs = [at(0.0), at(0.5 * t_s), at(t_s)];
        Ok(self.inverter_inner_step(meas, refs)?.command)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_matches_dpwm_far_from_boundaries() {
        let dm = balanced_dm(160.0, 0.4);
        let (refs, active) = cm_smoothing(dm, 8.0);
        assert_eq!(refs, cm_offset_dpwm(dm));
        assert_eq!(active, [false, true, true]);
    }

    #[test]
    fn smoothing_is_active_at_a_tie() {
        let dm = [100.0, 100.0, -200.0];
        let (refs, active) = cm_smoothing(dm, 8.0);
        assert_eq!(active, [true; 3]);
        assert!(refs.clamped.is_none());
        assert!((refs.cm + 102.0).abs() < 1e-12);
        assert!(refs.total.iter().all(|v| *v < 0.0));
    }

    #[test]
    fn window_lift_is_c2_at_the_edge() {
        let v = 10.0;
        let h = 1e-4;
        assert!((window_lift(v, v)).abs() < 1e-12);
        let slope = (window_lift(v, v) - window_lift(v - h, v)) / h;
        assert!(slope.abs() < 1e-6);
        assert!((window_lift(0.0, v) - v / 4.0).abs() < 1e-12);
    }

    #[test]
    fn pi_holds_integrator_while_pushing_into_limit() {
        let mut pi = Pi::new(PiGains { kp: 1.0, ki: 100.0, lo: -1.0, hi: 1.0 });
        for _ in 0..1000 {
            let (u, sat) = pi.step(5.0, 0.0, 1e-3);
            assert_eq!(u, 1.0);
            assert!(sat);
        }
        assert!(pi.integ <= 2.0);
    }

    #[test]
    fn cascade_bandwidths_are_separated() {
        let bw = Bandwidths::cascade(7e3, 4.0);
        assert!((bw.min_ratio() - 4.0).abs() < 1e-12);
        assert!(bw.i_l > bw.v_c && bw.v_c > bw.i_grid && bw.i_grid > bw.v_dc);
    }
}
