//! Ready-made circuits, drivers and runs for the reference operating points.

use crate::circuit::{run, AcLoad, AcSource, Circuit, CircuitState, FixedDuty, Topology, Trace};
use crate::control::{Bandwidths, CmMode, InverterController, RectifierController, RectifierGains};
use crate::error::Result;
use ibb_core::converter::{
    ac_current_amplitude, balanced_dm, cm_offset_dpwm, dq_to_abc, phase_shift, steady_duty,
};
use ibb_core::{ConverterParams, OperatingPoint};

/// Integration steps per switching period.
pub const DEFAULT_STEPS_PER_PERIOD: u32 = 500;

/// Rectifier circuit started close to its DPWM steady state.
pub fn rectifier_circuit(op: &OperatingPoint, params: &ConverterParams) -> Circuit {
    let grid = AcSource { v_hat: op.v_ac_hat, f_o: op.f_o, theta0: 0.0 };
    let mut c = Circuit::new(*params, Topology::Rectifier { grid, r_dc: params.r_load_dc });
    let i_hat = ac_current_amplitude(op.p_out, op.v_ac_hat);
    let w_l = op.omega() * params.l_f;
    let i_g = [0, 1, 2].map(|k| i_hat * (-phase_shift(k)).cos());
    let refs = cm_offset_dpwm(dq_to_abc(op.v_ac_hat, -w_l * i_hat, 0.0));
    let i_l = [0, 1, 2].map(|k| -i_g[k] * (1.0 + refs.total[k].abs() / op.v_dc));
    c.initial = CircuitState { t: 0.0, i_l, v_c: refs.total, v_dc: op.v_dc, i_lf: i_g };
    c.record_interval = 50.0 / (DEFAULT_STEPS_PER_PERIOD as f64 * op.f_s);
    c
}

/// Rectifier controller with the default cascade gains.
pub fn rectifier_controller(op: &OperatingPoint, params: &ConverterParams, cm: CmMode) -> Result<RectifierController> {
    let bw = Bandwidths::cascade(op.f_s / RECTIFIER_BW_DIVIDER, 4.0);
    let gains = RectifierGains::from_plant(params, op.v_dc, op.p_out, op.v_ac_hat, bw);
    RectifierController::new(params, &gains, op.f_s, op.v_dc, 0.0, op.omega(), cm)
}

/// Inductor-loop bandwidth as a fraction of the switching frequency.
pub const RECTIFIER_BW_DIVIDER: f64 = 5.0;

/// Default smoothing threshold as a fraction of the AC amplitude.
pub const DEFAULT_V_VAR_FRACTION: f64 = 0.2;

/// Closed-loop rectifier run for `periods` fundamental periods.
pub fn run_rectifier(op: &OperatingPoint, params: &ConverterParams, cm: CmMode, periods: f64, steps: u32) -> Result<Trace> {
    let mut c = rectifier_circuit(op, params);
    c.record_interval = 50.0 / (DEFAULT_STEPS_PER_PERIOD as f64 * op.f_s);
    let mut ctl = rectifier_controller(op, params, cm)?;
    run(&c, &mut ctl, periods / op.f_o, 1.0 / (steps as f64 * op.f_s))
}

/// Single-phase open-loop DC-DC circuit at steady state for duty `d`.
pub fn dcdc_circuit(params: &ConverterParams, v_dc: f64, r_load: f64, d: f64) -> Circuit {
    let mut c = Circuit::new(*params, Topology::DcDcPhase { v_dc, r_load });
    let v = v_dc * d / (1.0 - d);
    c.initial.v_c[0] = -v;
    c.initial.i_l[0] = -v / r_load / (1.0 - d);
    c
}

/// Trace samples per switching period of a DC-DC run.
pub const DCDC_SAMPLES_PER_PERIOD: usize = 50;

/// Open-loop DC-DC run at a fixed duty.
pub fn run_dcdc(params: &ConverterParams, f_s: f64, v_dc: f64, r_load: f64, d: f64, horizon: f64) -> Result<Trace> {
    let mut c = dcdc_circuit(params, v_dc, r_load, d);
    c.record_interval = 1.0 / (DCDC_SAMPLES_PER_PERIOD as f64 * f_s);
    let mut drv = FixedDuty { f_s, duty: [d, 0.0, 0.0] };
    run(&c, &mut drv, horizon, 1.0 / (DEFAULT_STEPS_PER_PERIOD as f64 * f_s))
}

/// Resistive-inductive load drawing `op.p_out` at `op.v_ac_hat`.
pub fn inverter_load(op: &OperatingPoint, l_load: f64) -> AcLoad {
    let i_hat = ac_current_amplitude(op.p_out, op.v_ac_hat);
    AcLoad {
        r: op.v_ac_hat / i_hat,
        l: l_load,
        emf: AcSource { v_hat: 0.0, f_o: op.f_o, theta0: 0.0 },
    }
}

/// Inverter circuit started at its DPWM steady state.
pub fn inverter_circuit(op: &OperatingPoint, params: &ConverterParams, load: AcLoad) -> Circuit {
    let mut c = Circuit::new(*params, Topology::Inverter { v_dc: op.v_dc, load });
    let z = load.r.hypot(op.omega() * load.l);
    let phi = (op.omega() * load.l).atan2(load.r);
    let refs = cm_offset_dpwm(balanced_dm(op.v_ac_hat, 0.0));
    let i_o = [0, 1, 2].map(|k| op.v_ac_hat / z * (-phase_shift(k) - phi).cos());
    let i_l = [0, 1, 2].map(|k| {
        let d = steady_duty(op.v_dc, refs.total[k].abs()).unwrap_or(0.0);
        i_o[k] / (1.0 - d)
    });
    c.initial = CircuitState { t: 0.0, i_l, v_c: refs.total, v_dc: op.v_dc, i_lf: i_o.map(|x| -x) };
    c.record_interval = 20.0 / (DEFAULT_STEPS_PER_PERIOD as f64 * op.f_s);
    c
}

/// Inverter controller with the default cascade gains.
pub fn inverter_controller(op: &OperatingPoint, params: &ConverterParams, cm: CmMode) -> InverterController {
    let i_hat = ac_current_amplitude(op.p_out, op.v_ac_hat);
    InverterController::new(params, op.f_s, op.f_o, op.v_ac_hat, 4.0 * i_hat, cm)
}

/// Smoothed DPWM with the default window for amplitude `v_hat`.
pub fn default_smoothing(v_hat: f64) -> CmMode {
    CmMode::Smoothing { v_var: DEFAULT_V_VAR_FRACTION * v_hat }
}

/// Closed-loop inverter run into `load` for `periods` fundamental periods.
pub fn run_inverter(
    op: &OperatingPoint,
    params: &ConverterParams,
    load: AcLoad,
    cm: CmMode,
    periods: f64,
    steps: u32,
) -> Result<Trace> {
    let c = inverter_circuit(op, params, load);
    let mut ctl = inverter_controller(op, params, cm);
    run(&c, &mut ctl, periods / op.f_o, 1.0 / (steps as f64 * op.f_s))
}

/// Load inductance of the reference inverter runs (H).
pub const INVERTER_LOAD_L: f64 = 50e-6;
