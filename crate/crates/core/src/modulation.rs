//! Ideal switching activity over one fundamental period for PWM, DPWM and
//! boundary conduction mode (BCM), with soft/hard classification of every
//! commutation and the comparison KPI set.
//!
//! Waveforms are ideal: the local average inductor current follows from the
//! AC current and the `(1 + |V_C|/V_dc)` factor, the ripple from volt-second
//! balance. The capacitive current `C dV_C/dt` is excluded unless
//! [`ModulationOptions::include_cap_current`] is set.
//!
//! Every switching cycle uses a centered carrier: T2 conducts at both ends and
//! T1 in the middle. The T2 -> T1 commutation (switched node low -> high)
//! happens at the current peak, the T1 -> T2 commutation (high -> low) at the
//! valley.

use crate::converter::{
    argmax3, balanced_dm, balanced_dm_dot, cm_offset_dpwm, phase_shift, ripple_pkpk, steady_duty,
    zvs_current_threshold, ConverterParams, OperatingPoint, PhaseRefs,
};
use crate::error::Result;

/// Modulation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Pwm,
    Dpwm,
    Bcm,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Pwm, Scheme::Dpwm, Scheme::Bcm];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Pwm => "PWM",
            Scheme::Dpwm => "DPWM",
            Scheme::Bcm => "BCM",
        }
    }

    /// Parses a case-insensitive scheme name.
    pub fn parse(s: &str) -> Option<Scheme> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pwm" => Some(Scheme::Pwm),
            "dpwm" => Some(Scheme::Dpwm),
            "bcm" | "tcm" => Some(Scheme::Bcm),
            _ => None,
        }
    }
}

/// Direction of active power flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerFlow {
    /// AC to DC: the phase current flows into the capacitor node.
    Rectifier,
    /// DC to AC: the phase current flows out of the capacitor node.
    Inverter,
}

/// Synthesis options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationOptions {
    /// Constant CM offset of PWM and BCM is `-(1 + margin) V_hat`.
    pub cm_margin: f64,
    /// Uniform samples per fundamental period in the exported series.
    pub samples_per_period: usize,
    /// Add the capacitive current `C dV_C/dt` to the AC current.
    pub include_cap_current: bool,
    /// Power-flow direction.
    pub flow: PowerFlow,
    /// Override of the soft-switching threshold (A); derived from `c_oss` when `None`.
    pub i_o: Option<f64>,
}

impl Default for ModulationOptions {
    fn default() -> Self {
        Self {
            cm_margin: 0.1,
            samples_per_period: 20_000,
            include_cap_current: false,
            flow: PowerFlow::Rectifier,
            i_o: None,
        }
    }
}

/// One uniform sample of a phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSample {
    pub t: f64,
    pub duty: f64,
    /// Switching frequency of the enclosing cycle, zero while clamped (Hz).
    pub f_s: f64,
    pub v_c: f64,
    pub i_l_avg: f64,
    /// Peak-to-peak ripple of the enclosing cycle (A).
    pub i_l_ripple: f64,
}

/// One switching cycle of a phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchingCycle {
    pub t_start: f64,
    /// Cycle length (s).
    pub period: f64,
    /// Portion of the cycle inside the fundamental period (s).
    pub weight: f64,
    pub duty: f64,
    pub v_c: f64,
    pub i_avg: f64,
    /// Peak-to-peak ripple (A).
    pub i_ripple: f64,
    /// Phase clamped for this cycle (no commutation).
    pub clamped: bool,
    /// BCM period limited by the `20 f_o` floor.
    pub clipped: bool,
}

impl SwitchingCycle {
    /// Switching frequency, zero for a clamped cycle.
    pub fn frequency(&self) -> f64 {
        if self.clamped {
            0.0
        } else {
            1.0 / self.period
        }
    }

    /// Mean-square current over the cycle (average plus triangular ripple).
    pub fn mean_square(&self) -> f64 {
        self.i_avg * self.i_avg + self.i_ripple * self.i_ripple / 12.0
    }

    /// Largest current magnitude within the cycle.
    pub fn peak_abs(&self) -> f64 {
        self.i_avg.abs() + 0.5 * self.i_ripple
    }
}

/// Commutation edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    /// T2 off, T1 on: switched node low to high, at the current peak.
    Rising,
    /// T1 off, T2 on: switched node high to low, at the current valley.
    Falling,
}

/// Soft-switching classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionKind {
    Soft,
    Partial,
    Hard,
}

impl TransitionKind {
    pub fn name(self) -> &'static str {
        match self {
            TransitionKind::Soft => "soft",
            TransitionKind::Partial => "partial",
            TransitionKind::Hard => "hard",
        }
    }
}

/// One half-bridge commutation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchingTransition {
    pub t: f64,
    pub phase: usize,
    pub edge: Edge,
    /// Blocked voltage `V_dc + |V_C|` (V).
    pub v_block: f64,
    /// Inductor current at the commutation, signed (A).
    pub i_switched: f64,
    pub kind: TransitionKind,
}

/// Classifies one commutation against the threshold `i_o`.
///
/// A rising edge needs current into the switched node (`i >= i_o`), a
/// falling edge current out of it (`i <= -i_o`). Correct polarity below the
/// threshold is partial, wrong polarity is hard.
pub fn classify(edge: Edge, i: f64, i_o: f64) -> TransitionKind {
    let assist = match edge {
        Edge::Rising => i,
        Edge::Falling => -i,
    };
    if assist >= i_o {
        TransitionKind::Soft
    } else if assist >= 0.0 {
        TransitionKind::Partial
    } else {
        TransitionKind::Hard
    }
}

/// Switching activity of all three phases over one fundamental period.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationProfile {
    pub scheme: Scheme,
    pub op: OperatingPoint,
    pub params: ConverterParams,
    pub options: ModulationOptions,
    /// Soft-switching threshold used for classification (A).
    pub i_o: f64,
    pub phase_series: [Vec<PhaseSample>; 3],
    pub cycles: [Vec<SwitchingCycle>; 3],
    pub events: Vec<SwitchingTransition>,
    pub clamp_mask: [Vec<bool>; 3],
}

impl ModulationProfile {
    /// Number of BCM cycles held at the `20 f_o` floor.
    pub fn clipped_cycles(&self) -> usize {
        self.cycles.iter().flatten().filter(|c| c.clipped).count()
    }

    /// Fraction of the fundamental period each phase spends clamped.
    pub fn clamp_fraction(&self, phase: usize) -> f64 {
        let tot: f64 = self.cycles[phase].iter().map(|c| c.weight).sum();
        let cl: f64 = self.cycles[phase]
            .iter()
            .filter(|c| c.clamped)
            .map(|c| c.weight)
            .sum();
        cl / tot
    }
}

fn refs_at(scheme: Scheme, op: &OperatingPoint, margin: f64, theta: f64) -> PhaseRefs {
    let dm = balanced_dm(op.v_ac_hat, theta);
    match scheme {
        Scheme::Dpwm => cm_offset_dpwm(dm),
        Scheme::Pwm | Scheme::Bcm => {
            PhaseRefs::from_cm(dm, -(1.0 + margin) * op.v_ac_hat, None, false)
        }
    }
}

/// Capacitor voltage, its derivative, and clamp state of `phase` at `theta`.
fn phase_voltage(
    scheme: Scheme,
    op: &OperatingPoint,
    margin: f64,
    theta: f64,
    phase: usize,
) -> (f64, f64, bool) {
    let refs = refs_at(scheme, op, margin, theta);
    let dot = balanced_dm_dot(op.v_ac_hat, op.omega(), theta);
    let (dv, clamped) = match scheme {
        Scheme::Dpwm => {
            let k = argmax3(refs.dm);
            (dot[phase] - dot[k], k == phase)
        }
        _ => (dot[phase], false),
    };
    (refs.total[phase].min(0.0), dv, clamped)
}

/// Local average inductor current at `theta`.
fn average_current(
    op: &OperatingPoint,
    params: &ConverterParams,
    opts: &ModulationOptions,
    theta: f64,
    phase: usize,
    v_c: f64,
    dv_c: f64,
) -> f64 {
    let i_ac = op.i_ac_hat() * (theta - phase_shift(phase)).cos();
    let i_out = match opts.flow {
        PowerFlow::Inverter => i_ac,
        PowerFlow::Rectifier => -i_ac,
    };
    let i_cap = if opts.include_cap_current {
        params.c_ac * dv_c
    } else {
        0.0
    };
    (i_out + i_cap) * (1.0 + v_c.abs() / op.v_dc)
}

/// Soft-switching threshold for a scheme: `v_max sqrt(c_oss / L)` with
/// `v_max = max(V_dc, max |V_C|)`.
pub fn scheme_threshold(
    scheme: Scheme,
    op: &OperatingPoint,
    params: &ConverterParams,
    margin: f64,
) -> Result<f64> {
    let v_c_max = match scheme {
        Scheme::Dpwm => 3f64.sqrt() * op.v_ac_hat,
        _ => (2.0 + margin) * op.v_ac_hat,
    };
    zvs_current_threshold(op.v_dc.max(v_c_max), params.c_oss, params.l_bb)
}

/// Synthesizes one fundamental period of `scheme` at `op`.
///
/// BCM chooses each period so that the triangle spans from the valley `-i_o`
/// to the peak (for positive average current; mirrored otherwise):
/// `T = L dI (1/V_dc + 1/|V_C|)` with `dI = 2(|i_avg| + i_o)`. The period is
/// limited to `1/f_s_max` from below; periods longer than `1/(20 f_o)` are
/// held there and flagged as clipped.
pub fn synthesize(
    scheme: Scheme,
    op: &OperatingPoint,
    params: &ConverterParams,
    opts: &ModulationOptions,
) -> Result<ModulationProfile> {
    op.validate()?;
    params.validate()?;
    let i_o = match opts.i_o {
        Some(v) => v,
        None => scheme_threshold(scheme, op, params, opts.cm_margin)?,
    };
    let t_o = op.period();
    let w = op.omega();
    let l = params.l_bb;
    let mut cycles: [Vec<SwitchingCycle>; 3] = Default::default();
    let mut events = Vec::new();

    for (phase, phase_cycles) in cycles.iter_mut().enumerate() {
        let mut t = 0.0;
        let mut n = 0usize;
        while t < t_o - 1e-15 * t_o {
            let theta = w * t;
            let (v_c, dv_c, clamped) = phase_voltage(scheme, op, opts.cm_margin, theta, phase);
            let vabs = v_c.abs();
            let i_avg = average_current(op, params, opts, theta, phase, v_c, dv_c);
            let mut clipped = false;
            let period = match scheme {
                Scheme::Pwm | Scheme::Dpwm => 1.0 / op.f_s,
                Scheme::Bcm => {
                    let t_min = 1.0 / op.f_s_max;
                    let t_max = 1.0 / (20.0 * op.f_o);
                    let req = if vabs > 0.0 {
                        l * 2.0 * (i_avg.abs() + i_o) * (1.0 / op.v_dc + 1.0 / vabs)
                    } else {
                        f64::INFINITY
                    };
                    if req > t_max {
                        clipped = true;
                        t_max
                    } else {
                        req.max(t_min)
                    }
                }
            };
            // Fixed-frequency schemes advance on an exact grid.
            let t_next = match scheme {
                Scheme::Bcm => t + period,
                _ => (n + 1) as f64 / op.f_s,
            };
            let weight = t_next.min(t_o) - t;
            let (duty, i_ripple) = if clamped {
                (0.0, 0.0)
            } else {
                let rip = ripple_pkpk(op.v_dc, vabs, l, 1.0 / period)?;
                (steady_duty(op.v_dc, vabs)?, rip)
            };
            let cyc = SwitchingCycle {
                t_start: t,
                period,
                weight,
                duty,
                v_c,
                i_avg,
                i_ripple,
                clamped,
                clipped,
            };
            if !clamped && duty > 0.0 {
                let v_block = op.v_dc + vabs;
                let (mut i_peak, mut i_valley) = (i_avg + 0.5 * i_ripple, i_avg - 0.5 * i_ripple);
                if scheme == Scheme::Bcm && !clipped {
                    // The BCM period reaches +-i_o exactly; drop round-off.
                    i_peak = i_peak.max(i_o);
                    i_valley = i_valley.min(-i_o);
                }
                for (edge, frac, i) in [
                    (Edge::Rising, 0.5 * (1.0 - duty), i_peak),
                    (Edge::Falling, 0.5 * (1.0 + duty), i_valley),
                ] {
                    let te = t + frac * period;
                    if te < t_o {
                        events.push(SwitchingTransition {
                            t: te,
                            phase,
                            edge,
                            v_block,
                            i_switched: i,
                            kind: classify(edge, i, i_o),
                        });
                    }
                }
            }
            phase_cycles.push(cyc);
            t = t_next;
            n += 1;
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.phase.cmp(&b.phase)));

    let ns = opts.samples_per_period.max(1);
    let mut phase_series: [Vec<PhaseSample>; 3] = Default::default();
    let mut clamp_mask: [Vec<bool>; 3] = Default::default();
    for phase in 0..3 {
        let cs = &cycles[phase];
        let mut ci = 0;
        for j in 0..ns {
            let t = t_o * j as f64 / ns as f64;
            while ci + 1 < cs.len() && cs[ci + 1].t_start <= t {
                ci += 1;
            }
            let theta = w * t;
            let (v_c, dv_c, clamped) = phase_voltage(scheme, op, opts.cm_margin, theta, phase);
            let c = &cs[ci];
            phase_series[phase].push(PhaseSample {
                t,
                duty: if clamped { 0.0 } else { steady_duty(op.v_dc, v_c.abs())? },
                f_s: c.frequency(),
                v_c,
                i_l_avg: average_current(op, params, opts, theta, phase, v_c, dv_c),
                i_l_ripple: c.i_ripple,
            });
            clamp_mask[phase].push(clamped);
        }
    }

    Ok(ModulationProfile {
        scheme,
        op: *op,
        params: *params,
        options: *opts,
        i_o,
        phase_series,
        cycles,
        events,
        clamp_mask,
    })
}

/// Reclassifies all commutations of `profile` against a new threshold.
pub fn classify_transitions(profile: &ModulationProfile, i_o: f64) -> Vec<SwitchingTransition> {
    profile
        .events
        .iter()
        .map(|e| SwitchingTransition {
            kind: classify(e.edge, e.i_switched, i_o),
            ..*e
        })
        .collect()
}

/// Voltage and current statistics of a set of transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionStats {
    pub count: usize,
    pub v_max: f64,
    pub v_avg: f64,
    pub i_max: f64,
    pub i_avg: f64,
}

impl TransitionStats {
    fn of<'a>(it: impl Iterator<Item = &'a SwitchingTransition>) -> Option<Self> {
        let (mut n, mut vm, mut vs, mut im, mut is) = (0usize, 0f64, 0f64, 0f64, 0f64);
        for e in it {
            n += 1;
            vm = vm.max(e.v_block);
            vs += e.v_block;
            im = im.max(e.i_switched.abs());
            is += e.i_switched.abs();
        }
        (n > 0).then(|| TransitionStats {
            count: n,
            v_max: vm,
            v_avg: vs / n as f64,
            i_max: im,
            i_avg: is / n as f64,
        })
    }
}

/// Comparison KPIs of one modulation profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationKpis {
    pub i_l_rms: f64,
    pub i_l_max: f64,
    pub f_sw_avg: f64,
    pub f_sw_max: f64,
    pub f_sw_min: f64,
    /// Soft and partial transitions.
    pub soft: Option<TransitionStats>,
    /// Hard transitions; `None` when there are none.
    pub hard: Option<TransitionStats>,
}

/// KPIs from the per-cycle closed forms, averaged over the three phases.
pub fn profile_kpis(profile: &ModulationProfile, transitions: &[SwitchingTransition]) -> ModulationKpis {
    let t_o = profile.op.period();
    let mut ms = 0.0;
    let mut i_max = 0f64;
    let mut f_avg = 0.0;
    let mut f_max = 0f64;
    let mut f_min = f64::INFINITY;
    for cs in &profile.cycles {
        for c in cs {
            ms += c.mean_square() * c.weight;
            i_max = i_max.max(c.peak_abs());
            let f = c.frequency();
            f_avg += f * c.weight;
            f_max = f_max.max(f);
            f_min = f_min.min(f);
        }
    }
    let soft = TransitionStats::of(transitions.iter().filter(|e| e.kind != TransitionKind::Hard));
    let hard = TransitionStats::of(transitions.iter().filter(|e| e.kind == TransitionKind::Hard));
    ModulationKpis {
        i_l_rms: (ms / (3.0 * t_o)).sqrt(),
        i_l_max: i_max,
        f_sw_avg: f_avg / (3.0 * t_o),
        f_sw_max: f_max,
        f_sw_min: f_min,
        soft,
        hard,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(scheme: Scheme) -> ModulationProfile {
        synthesize(
            scheme,
            &OperatingPoint::rectifier(),
            &ConverterParams::rectifier(),
            &ModulationOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn classification_rules() {
        assert_eq!(classify(Edge::Rising, 2.0, 1.0), TransitionKind::Soft);
        assert_eq!(classify(Edge::Rising, 0.5, 1.0), TransitionKind::Partial);
        assert_eq!(classify(Edge::Rising, -0.1, 1.0), TransitionKind::Hard);
        assert_eq!(classify(Edge::Falling, -2.0, 1.0), TransitionKind::Soft);
        assert_eq!(classify(Edge::Falling, -0.5, 1.0), TransitionKind::Partial);
        assert_eq!(classify(Edge::Falling, 0.1, 1.0), TransitionKind::Hard);
        for i in [-3.0, -0.0, 0.0, 1e-9, 2.0] {
            assert_ne!(classify(Edge::Rising, i, 0.0), TransitionKind::Partial);
            assert_ne!(classify(Edge::Falling, i, 0.0), TransitionKind::Partial);
        }
    }

    #[test]
    fn dpwm_clamps_one_third() {
        let p = rect(Scheme::Dpwm);
        let ts = 1.0 / p.op.f_s;
        for k in 0..3 {
            let f = p.clamp_fraction(k);
            assert!((f - 1.0 / 3.0).abs() <= ts * p.op.f_o + 1e-12, "{f}");
        }
        let k = profile_kpis(&p, &p.events);
        assert_eq!(k.f_sw_min, 0.0);
        assert!((k.soft.unwrap().v_max - 551.6).abs() / 551.6 < 0.01);
    }

    #[test]
    fn pwm_has_constant_frequency_and_hard_events() {
        let p = rect(Scheme::Pwm);
        let k = profile_kpis(&p, &p.events);
        assert!((k.f_sw_max - 140e3).abs() < 1e-6 && (k.f_sw_min - 140e3).abs() < 1e-6);
        assert!(k.hard.is_some());
    }

    #[test]
    fn bcm_unclipped_cycles_reach_threshold() {
        let p = rect(Scheme::Bcm);
        assert_eq!(p.clipped_cycles(), 0);
        for c in p.cycles.iter().flatten() {
            let valley = c.i_avg - 0.5 * c.i_ripple;
            let peak = c.i_avg + 0.5 * c.i_ripple;
            assert!(valley <= -p.i_o + 1e-9 && peak >= p.i_o - 1e-9);
            assert!(c.frequency() <= p.op.f_s_max * (1.0 + 1e-12));
        }
        let bad: Vec<_> = p.events.iter().filter(|e| e.kind != TransitionKind::Soft).collect();
        assert!(bad.is_empty(), "{} {:?} {}", bad.len(), bad.first(), p.i_o);
    }

    #[test]
    fn bcm_without_margin_hits_the_floor() {
        let opts = ModulationOptions {
            cm_margin: 0.0,
            ..Default::default()
        };
        let p = synthesize(
            Scheme::Bcm,
            &OperatingPoint::rectifier(),
            &ConverterParams::rectifier(),
            &opts,
        )
        .unwrap();
        assert!(p.clipped_cycles() > 0);
    }

    #[test]
    fn zero_ac_voltage_pwm_is_flat() {
        let mut op = OperatingPoint::rectifier();
        op.v_ac_hat = 1e-9;
        let p = synthesize(Scheme::Pwm, &op, &ConverterParams::rectifier(), &Default::default()).unwrap();
        let d0 = p.phase_series[0][0].duty;
        assert!(p.phase_series[0].iter().all(|s| (s.duty - d0).abs() < 1e-9));
    }

    #[test]
    fn reclassification_with_zero_threshold() {
        let p = rect(Scheme::Pwm);
        let tr = classify_transitions(&p, 0.0);
        assert!(tr.iter().all(|e| e.kind != TransitionKind::Partial));
    }

    #[test]
    fn smaller_inductance_raises_peak() {
        let op = OperatingPoint::rectifier();
        let mut prev = 0.0;
        for l in [150e-6, 100e-6, 75e-6, 50e-6] {
            let params = ConverterParams {
                l_bb: l,
                ..ConverterParams::rectifier()
            };
            let p = synthesize(Scheme::Dpwm, &op, &params, &Default::default()).unwrap();
            let k = profile_kpis(&p, &p.events);
            assert!(k.i_l_max > prev);
            prev = k.i_l_max;
        }
    }

    #[test]
    fn series_has_requested_resolution() {
        let p = rect(Scheme::Dpwm);
        for k in 0..3 {
            assert_eq!(p.phase_series[k].len(), 20_000);
            assert!(p.phase_series[k].iter().all(|s| (0.0..=1.0).contains(&s.duty)));
        }
    }
}
