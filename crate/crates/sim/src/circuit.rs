//! Fixed-step switched simulation of the three phase modules with their
//! AC-side network and DC side.
//!
//! Within a fixed switch configuration the circuit is linear; each step is
//! the trapezoidal map of that linear system, which conserves the energy of
//! the reactive elements exactly. Gate events and freewheeling-diode
//! current zeros inside a step split the step at the event times.

use crate::error::{config, Result, SimError};
use ibb_core::converter::phase_shift;
use ibb_core::ConverterParams;
use nalgebra::{SMatrix, SVector};
use std::f64::consts::TAU;

/// Ideal balanced three-phase source `v_hat cos(2 pi f t + theta0 - k 2pi/3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcSource {
    pub v_hat: f64,
    pub f_o: f64,
    pub theta0: f64,
}

impl AcSource {
    pub fn angle(&self, t: f64) -> f64 {
        TAU * self.f_o * t + self.theta0
    }

    pub fn voltages(&self, t: f64) -> [f64; 3] {
        let th = self.angle(t);
        [0, 1, 2].map(|k| self.v_hat * (th - phase_shift(k)).cos())
    }
}

/// Per-phase series R-L load with optional back-EMF, star point floating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcLoad {
    pub r: f64,
    pub l: f64,
    pub emf: AcSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    /// Grid EMF behind `l_f`, DC link `c_dc` loaded by `r_dc`.
    Rectifier { grid: AcSource, r_dc: f64 },
    /// Stiff DC source feeding an R-L(-EMF) load.
    Inverter { v_dc: f64, load: AcLoad },
    /// Phase a only: stiff DC source, AC capacitor loaded by `r_load`.
    DcDcPhase { v_dc: f64, r_load: f64 },
}

impl Topology {
    pub fn name(&self) -> &'static str {
        match self {
            Topology::Rectifier { .. } => "rectifier",
            Topology::Inverter { .. } => "inverter",
            Topology::DcDcPhase { .. } => "dc-dc-phase",
        }
    }

    pub fn phases(&self) -> usize {
        match self {
            Topology::DcDcPhase { .. } => 1,
            _ => 3,
        }
    }

    /// Fundamental frequency of the AC side, if any.
    pub fn f_o(&self) -> Option<f64> {
        match self {
            Topology::Rectifier { grid, .. } => Some(grid.f_o),
            Topology::Inverter { load, .. } => Some(load.emf.f_o),
            Topology::DcDcPhase { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitState {
    pub t: f64,
    /// Buck-boost inductor currents (A).
    pub i_l: [f64; 3],
    /// AC capacitor node voltages with respect to DC- (V).
    pub v_c: [f64; 3],
    pub v_dc: f64,
    /// AC-side branch currents into the capacitor nodes: grid filter
    /// inductors (rectifier) or load currents with reversed sign (inverter) (A).
    pub i_lf: [f64; 3],
}

impl CircuitState {
    pub fn zero(v_dc: f64) -> Self {
        Self {
            t: 0.0,
            i_l: [0.0; 3],
            v_c: [0.0; 3],
            v_dc,
            i_lf: [0.0; 3],
        }
    }
}

/// Circuit, device abstractions and numerical guards of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub params: ConverterParams,
    pub topology: Topology,
    /// Forward drop of the switch body diodes (V).
    pub v_f_diode: f64,
    /// Anti-parallel diodes across the AC capacitors.
    pub cap_diodes: bool,
    /// Forward drop of the AC-capacitor diodes (V).
    pub v_f_cap: f64,
    /// Divergence bounds on |voltage| and |current|.
    pub v_bound: f64,
    pub i_bound: f64,
    /// Trace sampling interval, rounded to a whole number of steps (s).
    pub record_interval: f64,
    pub initial: CircuitState,
}

impl Circuit {
    pub fn new(params: ConverterParams, topology: Topology) -> Self {
        let v_dc = match topology {
            Topology::Rectifier { .. } => 0.0,
            Topology::Inverter { v_dc, .. } | Topology::DcDcPhase { v_dc, .. } => v_dc,
        };
        Self {
            params,
            topology,
            v_f_diode: 0.0,
            cap_diodes: false,
            v_f_cap: 0.0,
            v_bound: 1e4,
            i_bound: 1e3,
            record_interval: 0.0,
            initial: CircuitState::zero(v_dc),
        }
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(config(format!("{name} must be positive, got {v}")))
            }
        };
        match self.topology {
            Topology::Rectifier { grid, r_dc } => {
                pos("l_f", self.params.l_f)?;
                pos("r_dc", r_dc)?;
                pos("f_o", grid.f_o)?;
            }
            Topology::Inverter { v_dc, load } => {
                pos("v_dc", v_dc)?;
                pos("load l", load.l)?;
                if !(load.r >= 0.0) {
                    return Err(config("load r must be >= 0"));
                }
            }
            Topology::DcDcPhase { v_dc, r_load } => {
                pos("v_dc", v_dc)?;
                pos("r_load", r_load)?;
            }
        }
        if !(self.v_f_diode >= 0.0 && self.v_f_cap >= 0.0) {
            return Err(config("diode drops must be >= 0"));
        }
        Ok(())
    }

    fn ac_branch(&self) -> Option<(f64, f64, AcSource)> {
        match self.topology {
            Topology::Rectifier { grid, .. } => Some((self.params.l_f, 0.0, grid)),
            Topology::Inverter { load, .. } => Some((load.l, load.r, load.emf)),
            Topology::DcDcPhase { .. } => None,
        }
    }

    fn emf(&self, t: f64) -> [f64; 3] {
        self.ac_branch().map_or([0.0; 3], |(_, _, s)| s.voltages(t))
    }

    /// Energy held in the reactive elements (stiff sources excluded) (J).
    pub fn stored_energy(&self, s: &CircuitState) -> f64 {
        let p = &self.params;
        let n = self.topology.phases();
        let mut e = 0.0;
        for k in 0..n {
            e += 0.5 * p.l_bb * s.i_l[k] * s.i_l[k] + 0.5 * p.c_ac * s.v_c[k] * s.v_c[k];
        }
        if let Some((l, _, _)) = self.ac_branch() {
            e += 0.5 * l * s.i_lf.iter().map(|i| i * i).sum::<f64>();
        }
        if let Topology::Rectifier { .. } = self.topology {
            e += 0.5 * p.c_dc * s.v_dc * s.v_dc;
        }
        e
    }
}

/// Sensor readings handed to a driver at each control instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub t: f64,
    pub v_dc: f64,
    pub v_c: [f64; 3],
    pub i_l: [f64; 3],
    /// AC-side currents into the capacitor nodes (A).
    pub i_ac: [f64; 3],
    /// Grid or back-EMF voltages (V).
    pub e: [f64; 3],
    /// DC load current (A).
    pub i_load_dc: f64,
}

/// Gate command for one control period.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Command {
    /// T1 duties.
    pub duty: [f64; 3],
    /// Phases held with T2 on for the whole period.
    pub clamped: [bool; 3],
    /// Internals recorded in the trace.
    pub v_cm: f64,
    pub v_c_ref: [f64; 3],
    pub i_l_ref: [f64; 3],
}

/// Anything that produces gate commands at a fixed control rate.
pub trait Driver {
    /// Control and switching period (s).
    fn period(&self) -> f64;
    fn update(&mut self, meas: &Measurement) -> Result<Command>;
}

/// Constant duty triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedDuty {
    pub f_s: f64,
    pub duty: [f64; 3],
}

impl Driver for FixedDuty {
    fn period(&self) -> f64 {
        1.0 / self.f_s
    }

    fn update(&mut self, _meas: &Measurement) -> Result<Command> {
        Ok(Command {
            duty: self.duty,
            ..Command::default()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Switch {
    /// AC-side switch T2 on.
    T2 = 0,
    /// DC-side switch T1 on.
    T1 = 1,
    /// Both gates off (dead time).
    Dead = 2,
}

/// Gate events of one period for duty `d` on the centered carrier:
/// T2 on `[0, a)`, T1 on `[a + t_d, b)`, T2 on `[b + t_d, T)`.
pub fn gate_events(d: f64, clamped: bool, period: f64, t_dead: f64) -> Vec<(f64, Switch)> {
    if clamped || d <= 0.0 {
        return Vec::new();
    }
    let d = d.min(1.0);
    let a = 0.5 * (1.0 - d) * period;
    let b = (a + d * period).min(period - t_dead);
    if a + t_dead < b {
        vec![(a, Switch::Dead), (a + t_dead, Switch::T1), (b, Switch::Dead), (b + t_dead, Switch::T2)]
    } else {
        vec![(a, Switch::Dead), (b.max(a) + t_dead, Switch::T2)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub i_l: [f64; 3],
    pub v_c: [f64; 3],
    pub v_dc: f64,
    pub i_lf: [f64; 3],
    pub e: [f64; 3],
    pub duty: [f64; 3],
    pub clamped: [bool; 3],
    pub switch: [Switch; 3],
    pub v_cm_ref: f64,
    pub v_c_ref: [f64; 3],
    pub i_l_ref: [f64; 3],
    /// Cumulative energies since the start of the run (J).
    pub e_in: f64,
    pub e_out: f64,
    pub e_loss: f64,
    pub e_stored: f64,
}

/// Uniformly sampled record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub mode: &'static str,
    /// Sample spacing (s).
    pub dt: f64,
    /// Integration step (s).
    pub sim_dt: f64,
    pub f_o: Option<f64>,
    pub f_s: f64,
    pub samples: Vec<TraceSample>,
}

impl Trace {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t) - self.samples.first().map_or(0.0, |s| s.t)
    }

    /// CSV with unit-suffixed column names.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let ph = ["a", "b", "c"];
        let mut head = vec!["t_s".to_string()];
        for (pre, unit) in [("iL", "A"), ("vC", "V")] {
            head.extend(ph.iter().map(|p| format!("{pre}_{p}_{unit}")));
        }
        head.push("vdc_V".into());
        for (pre, unit) in [("iac", "A"), ("e", "V"), ("d", "1"), ("clamp", "1"), ("sw", "1")] {
            head.extend(ph.iter().map(|p| format!("{pre}_{p}_{unit}")));
        }
        head.push("vcm_ref_V".into());
        for (pre, unit) in [("vC_ref", "V"), ("iL_ref", "A")] {
            head.extend(ph.iter().map(|p| format!("{pre}_{p}_{unit}")));
        }
        head.extend(["E_in_J", "E_out_J", "E_loss_J", "E_stored_J"].map(String::from));
        out.push_str(&head.join(","));
        out.push('\n');
        for s in &self.samples {
            let mut row: Vec<String> = vec![fmt(s.t)];
            row.extend(s.i_l.iter().chain(&s.v_c).map(|x| fmt(*x)));
            row.push(fmt(s.v_dc));
            row.extend(s.i_lf.iter().chain(&s.e).chain(&s.duty).map(|x| fmt(*x)));
            row.extend(s.clamped.iter().map(|&c| (c as u8).to_string()));
            row.extend(s.switch.iter().map(|&w| (w as u8).to_string()));
            row.push(fmt(s.v_cm_ref));
            row.extend(s.v_c_ref.iter().chain(&s.i_l_ref).map(|x| fmt(*x)));
            row.extend([s.e_in, s.e_out, s.e_loss, s.e_stored].map(fmt));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.9e}")
}

type Mat = SMatrix<f64, 10, 10>;
type Vec10 = SVector<f64, 10>;

const IL: usize = 0;
const IAC: usize = 3;
const VC: usize = 6;
const VDC: usize = 9;

/// Conduction path of one phase during a sub-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Path {
    T1,
    T2,
    /// Dead time, positive current through the T1 body diode.
    DiodeDc,
    /// Dead time, negative current through the T2 body diode.
    DiodeAc,
    Open,
}

impl Path {
    fn of(sw: Switch, i: f64) -> Self {
        match sw {
            Switch::T1 => Path::T1,
            Switch::T2 => Path::T2,
            Switch::Dead if i > 0.0 => Path::DiodeDc,
            Switch::Dead if i < 0.0 => Path::DiodeAc,
            Switch::Dead => Path::Open,
        }
    }

    fn code(self) -> usize {
        self as usize
    }

    fn is_diode(self) -> bool {
        matches!(self, Path::DiodeDc | Path::DiodeAc)
    }

    fn to_dc(self) -> bool {
        matches!(self, Path::T1 | Path::DiodeDc)
    }

    fn to_ac(self) -> bool {
        matches!(self, Path::T2 | Path::DiodeAc)
    }
}

/// Energy flows of one sub-step (J).
#[derive(Default)]
struct Flows {
    e_in: f64,
    e_out: f64,
    e_loss: f64,
}

struct Engine<'a> {
    c: &'a Circuit,
    x: Vec10,
    n: usize,
    sw: [Switch; 3],
    dt: f64,
    cache: Vec<Option<(Mat, Mat)>>,
    e_in: f64,
    e_out: f64,
    e_loss: f64,
}

impl<'a> Engine<'a> {
    fn new(c: &'a Circuit, dt: f64) -> Self {
        let s = &c.initial;
        let mut x = Vec10::zeros();
        for k in 0..3 {
            x[IL + k] = s.i_l[k];
            x[IAC + k] = s.i_lf[k];
            x[VC + k] = s.v_c[k];
        }
        x[VDC] = s.v_dc;
        if c.topology.phases() == 1 {
            for k in 1..3 {
                x[IL + k] = 0.0;
                x[IAC + k] = 0.0;
                x[VC + k] = 0.0;
            }
        }
        if c.ac_branch().is_none() {
            x[IAC] = 0.0;
        }
        Self {
            c,
            x,
            n: c.topology.phases(),
            sw: [Switch::T2; 3],
            dt,
            cache: vec![None; 125],
            e_in: 0.0,
            e_out: 0.0,
            e_loss: 0.0,
        }
    }

    fn state(&self, t: f64) -> CircuitState {
        let x = &self.x;
        CircuitState {
            t,
            i_l: [x[IL], x[IL + 1], x[IL + 2]],
            v_c: [x[VC], x[VC + 1], x[VC + 2]],
            v_dc: x[VDC],
            i_lf: [x[IAC], x[IAC + 1], x[IAC + 2]],
        }
    }

    fn paths(&self) -> [Path; 3] {
        let mut p = [Path::Open; 3];
        for k in 0..self.n {
            p[k] = Path::of(self.sw[k], self.x[IL + k]);
        }
        p
    }

    fn system(&self, paths: &[Path; 3]) -> Mat {
        let c = self.c;
        let p = &c.params;
        let (l, cap) = (p.l_bb, p.c_ac);
        let r = p.r_on_eff();
        let rect = matches!(c.topology, Topology::Rectifier { .. });
        let mut a = Mat::zeros();
        for k in 0..self.n {
            let path = paths[k];
            if matches!(path, Path::T1 | Path::T2) {
                a[(IL + k, IL + k)] = -r / l;
            }
            if path.to_dc() {
                a[(IL + k, VDC)] = -1.0 / l;
                if rect {
                    a[(VDC, IL + k)] = 1.0 / p.c_dc;
                }
            }
            if path.to_ac() {
                a[(IL + k, VC + k)] = -1.0 / l;
                a[(VC + k, IL + k)] = 1.0 / cap;
            }
        }
        if let Some((l_ac, r_ac, _)) = c.ac_branch() {
            for k in 0..3 {
                a[(IAC + k, IAC + k)] = -r_ac / l_ac;
                for j in 0..3 {
                    let m = if j == k { 2.0 / 3.0 } else { -1.0 / 3.0 };
                    a[(IAC + k, VC + j)] = -m / l_ac;
                }
                a[(VC + k, IAC + k)] = 1.0 / cap;
            }
        }
        match c.topology {
            Topology::Rectifier { r_dc, .. } => a[(VDC, VDC)] = -1.0 / (r_dc * p.c_dc),
            Topology::DcDcPhase { r_load, .. } => a[(VC, VC)] = -1.0 / (r_load * cap),
            Topology::Inverter { .. } => {}
        }
        a
    }

    /// Trapezoidal map `x' = M x + N b` for the given paths and step.
    fn discretize(&self, paths: &[Path; 3], h: f64) -> (Mat, Mat) {
        let a = self.system(paths) * (0.5 * h);
        let lhs = Mat::identity() - a;
        let inv = lhs.try_inverse().expect("trapezoidal matrix is regular for h > 0");
        (inv * (Mat::identity() + a), inv * h)
    }

    fn forcing(&self, paths: &[Path; 3], t_mid: f64) -> Vec10 {
        let c = self.c;
        let mut b = Vec10::zeros();
        let vf = c.v_f_diode / c.params.l_bb;
        for k in 0..self.n {
            match paths[k] {
                Path::DiodeDc => b[IL + k] = -vf,
                Path::DiodeAc => b[IL + k] = vf,
                _ => {}
            }
        }
        if let Some((l_ac, _, src)) = c.ac_branch() {
            let e = src.voltages(t_mid);
            let mean = e.iter().sum::<f64>() / 3.0;
            for k in 0..3 {
                b[IAC + k] = (e[k] - mean) / l_ac;
            }
        }
        b
    }

    /// Advances by `h` with fixed `paths`; returns the new state and the flows.
    fn advance(&mut self, paths: &[Path; 3], t0: f64, h: f64) -> (Vec10, Flows) {
        let t_mid = t0 + 0.5 * h;
        let b = self.forcing(paths, t_mid);
        let x_new = if h == self.dt {
            let code = paths.iter().rev().fold(0, |acc, p| acc * 5 + p.code());
            if self.cache[code].is_none() {
                self.cache[code] = Some(self.discretize(paths, h));
            }
            let (m, n) = self.cache[code].as_ref().expect("cached above");
            m * self.x + n * b
        } else {
            let (m, n) = self.discretize(paths, h);
            m * self.x + n * b
        };
        let xm = (self.x + x_new) * 0.5;
        let c = self.c;
        let r = c.params.r_on_eff();
        let mut f = Flows::default();
        let mut i_dc = 0.0;
        for k in 0..self.n {
            let i = xm[IL + k];
            f.e_loss += h * match paths[k] {
                Path::T1 | Path::T2 => r * i * i,
                Path::DiodeDc | Path::DiodeAc => c.v_f_diode * i.abs(),
                Path::Open => 0.0,
            };
            if paths[k].to_dc() {
                i_dc += i;
            }
        }
        let i_ac = [xm[IAC], xm[IAC + 1], xm[IAC + 2]];
        match c.topology {
            Topology::Rectifier { grid, r_dc } => {
                let e = grid.voltages(t_mid);
                f.e_in += h * (0..3).map(|k| e[k] * i_ac[k]).sum::<f64>();
                f.e_out += h * xm[VDC] * xm[VDC] / r_dc;
            }
            Topology::Inverter { v_dc, load } => {
                let e = load.emf.voltages(t_mid);
                f.e_in -= h * v_dc * i_dc;
                f.e_out += h * (0..3).map(|k| load.r * i_ac[k] * i_ac[k] - e[k] * i_ac[k]).sum::<f64>();
            }
            Topology::DcDcPhase { v_dc, r_load } => {
                f.e_in -= h * v_dc * i_dc;
                f.e_out += h * xm[VC] * xm[VC] / r_load;
            }
        }
        (x_new, f)
    }

    fn commit(&mut self, x: Vec10, f: Flows) {
        self.x = x;
        self.e_in += f.e_in;
        self.e_out += f.e_out;
        self.e_loss += f.e_loss;
    }

    /// Advances by `h`, splitting where a freewheeling diode current reaches zero.
    fn substep(&mut self, t0: f64, h: f64) {
        let (mut t, mut rem) = (t0, h);
        for _ in 0..8 {
            let paths = self.paths();
            let (x_new, f) = self.advance(&paths, t, rem);
            let mut first: Option<(usize, f64)> = None;
            for k in 0..self.n {
                let (i0, i1) = (self.x[IL + k], x_new[IL + k]);
                if paths[k].is_diode() && i1 * i0 <= 0.0 {
                    let frac = i0 / (i0 - i1);
                    if first.map_or(true, |(_, f0)| frac < f0) {
                        first = Some((k, frac));
                    }
                }
            }
            let Some((k, frac)) = first else {
                self.commit(x_new, f);
                break;
            };
            let tau = rem * frac;
            if tau > 1e-6 * self.dt {
                let (x1, f1) = self.advance(&paths, t, tau);
                self.commit(x1, f1);
            }
            let i = self.x[IL + k];
            self.e_loss += 0.5 * self.c.params.l_bb * i * i;
            self.x[IL + k] = 0.0;
            t += tau;
            rem -= tau;
            if rem <= 1e-6 * self.dt {
                break;
            }
        }
        let c = self.c;
        if c.cap_diodes {
            for k in 0..self.n {
                let v = self.x[VC + k];
                if v > c.v_f_cap {
                    self.e_loss += 0.5 * c.params.c_ac * (v * v - c.v_f_cap * c.v_f_cap);
                    self.x[VC + k] = c.v_f_cap;
                }
            }
        }
    }

    fn stored_energy(&self, t: f64) -> f64 {
        self.c.stored_energy(&self.state(t))
    }

    fn check(&self, step: u64, t: f64) -> Result<()> {
        let s = self.state(t);
        let c = self.c;
        let bad = |what: String| Err(SimError::Diverged { step, t, what });
        for k in 0..3 {
            for (name, x, bound) in [
                ("i_l", s.i_l[k], c.i_bound),
                ("i_lf", s.i_lf[k], c.i_bound),
                ("v_c", s.v_c[k], c.v_bound),
            ] {
                if !x.is_finite() || x.abs() > bound {
                    return bad(format!("{name}[{k}] = {x:.4e} exceeds bound {bound:.3e}"));
                }
            }
        }
        if !s.v_dc.is_finite() || s.v_dc.abs() > c.v_bound {
            return bad(format!("v_dc = {:.4e} exceeds bound {:.3e}", s.v_dc, c.v_bound));
        }
        Ok(())
    }

    fn measure(&self, t: f64) -> Measurement {
        let s = self.state(t);
        let i_load_dc = match self.c.topology {
            Topology::Rectifier { r_dc, .. } => s.v_dc / r_dc,
            _ => 0.0,
        };
        Measurement {
            t,
            v_dc: s.v_dc,
            v_c: s.v_c,
            i_l: s.i_l,
            i_ac: s.i_lf,
            e: self.c.emf(t),
            i_load_dc,
        }
    }

    fn sample(&self, t: f64, cmd: &Command) -> TraceSample {
        let s = self.state(t);
        TraceSample {
            t,
            i_l: s.i_l,
            v_c: s.v_c,
            v_dc: s.v_dc,
            i_lf: s.i_lf,
            e: self.c.emf(t),
            duty: cmd.duty,
            clamped: cmd.clamped,
            switch: self.sw,
            v_cm_ref: cmd.v_cm,
            v_c_ref: cmd.v_c_ref,
            i_l_ref: cmd.i_l_ref,
            e_in: self.e_in,
            e_out: self.e_out,
            e_loss: self.e_loss,
            e_stored: self.stored_energy(t),
        }
    }
}


/// Integrates `circuit` from its initial state for `horizon` seconds with step `dt`.
///
/// `dt` must divide the driver period into a whole number of steps.
pub fn run(circuit: &Circuit, driver: &mut dyn Driver, horizon: f64, dt: f64) -> Result<Trace> {
    circuit.validate()?;
    let t_s = driver.period();
    if !(t_s.is_finite() && t_s > 0.0) {
        return Err(config(format!("control period must be positive, got {t_s}")));
    }
    if !(dt > 0.0 && dt <= t_s / 200.0 * (1.0 + 1e-9)) {
        return Err(config(format!("dt = {dt:.3e} s must be in (0, T_s/200]")));
    }
    let ratio = t_s / dt;
    let steps_per_period = ratio.round() as u64;
    if (ratio - steps_per_period as f64).abs() > 1e-6 * ratio {
        return Err(config(format!("T_s / dt = {ratio} is not an integer")));
    }
    let dt = t_s / steps_per_period as f64;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(config("horizon must be positive"));
    }
    let periods = (horizon / t_s).round().max(1.0) as u64;
    let rec_every = ((circuit.record_interval / dt).round() as u64).max(1);
    let t_dead = circuit.params.dead_time;
    if 2.0 * t_dead >= t_s {
        return Err(config("dead time exceeds half the switching period"));
    }

    let mut eng = Engine::new(circuit, dt);
    let total = periods * steps_per_period;
    let mut samples = Vec::with_capacity((total / rec_every + 1) as usize);
    let mut events: Vec<(f64, usize, Switch)> = Vec::with_capacity(12);
    let mut cmd = Command::default();
    let mut step: u64 = 0;
    for period in 0..periods {
        let t_p = period as f64 * t_s;
        cmd = driver.update(&eng.measure(t_p))?;
        events.clear();
        for k in 0..eng.n {
            let d = cmd.duty[k];
            if !d.is_finite() {
                return Err(SimError::Diverged { step, t: t_p, what: format!("duty[{k}] = {d}") });
            }
            events.extend(gate_events(d, cmd.clamped[k], t_s, t_dead).into_iter().map(|(tau, w)| (tau, k, w)));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        eng.sw = [Switch::T2; 3];
        let mut next = 0;
        for m in 0..steps_per_period {
            if step % rec_every == 0 {
                samples.push(eng.sample(step as f64 * dt, &cmd));
            }
            let (a, b) = (m as f64 * dt, (m + 1) as f64 * dt);
            let mut cur = a;
            while next < events.len() && events[next].0 < b - 1e-9 * dt {
                let tau = events[next].0;
                if tau > cur {
                    eng.substep(t_p + cur, tau - cur);
                    cur = tau;
                }
                eng.sw[events[next].1] = events[next].2;
                next += 1;
            }
            eng.substep(t_p + cur, b - cur);
            step += 1;
            eng.check(step, step as f64 * dt)?;
        }
    }
    if step % rec_every == 0 {
        samples.push(eng.sample(step as f64 * dt, &cmd));
    }
    Ok(Trace {
        mode: circuit.topology.name(),
        dt: rec_every as f64 * dt,
        sim_dt: dt,
        f_o: circuit.topology.f_o(),
        f_s: 1.0 / t_s,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_events_follow_the_centered_carrier() {
        let ev = gate_events(0.5, false, 1.0, 0.01);
        assert_eq!(ev.len(), 4);
        assert!((ev[0].0 - 0.25).abs() < 1e-15 && ev[0].1 == Switch::Dead);
        assert!((ev[1].0 - 0.26).abs() < 1e-15 && ev[1].1 == Switch::T1);
        assert!((ev[2].0 - 0.75).abs() < 1e-15 && ev[2].1 == Switch::Dead);
        assert!((ev[3].0 - 0.76).abs() < 1e-15 && ev[3].1 == Switch::T2);
        assert!(gate_events(0.3, true, 1.0, 0.01).is_empty());
        assert!(gate_events(0.0, false, 1.0, 0.01).is_empty());
        assert_eq!(gate_events(0.005, false, 1.0, 0.01).len(), 2);
    }

    #[test]
    fn rejects_misaligned_step() {
        let c = Circuit::new(
            ConverterParams::rectifier(),
            Topology::DcDcPhase { v_dc: 100.0, r_load: 50.0 },
        );
        let mut drv = FixedDuty { f_s: 100e3, duty: [0.5; 3] };
        assert!(run(&c, &mut drv, 1e-4, 1e-5 / 333.3).is_err());
        assert!(run(&c, &mut drv, 1e-4, 1e-7).is_err());
    }

    #[test]
    fn divergence_reports_the_step() {
        let mut c = Circuit::new(
            ConverterParams::rectifier(),
            Topology::DcDcPhase { v_dc: 100.0, r_load: 1e6 },
        );
        c.i_bound = 1.0;
        let mut drv = FixedDuty { f_s: 100e3, duty: [0.9; 3] };
        match run(&c, &mut drv, 1e-3, 1e-8) {
            Err(SimError::Diverged { step, .. }) => assert!(step > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
