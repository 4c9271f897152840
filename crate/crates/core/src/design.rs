//! Component sizing: AC-capacitor limit, area-product dimensioning, inductor
//! evaluation, Pareto selection, the measurement divider and the calorimetric
//! setup calculators.

use crate::converter::{inductor_envelope, ConverterParams, OperatingPoint};
use crate::error::{domain, require_positive, CoreError, Result};
use crate::loss_thermal::{evaluate_semiconductor_losses, LossMap, ViaStackParams};
use crate::modulation::{synthesize, ModulationOptions, ModulationProfile, PowerFlow, Scheme};
use std::f64::consts::PI;

/// Vacuum permeability (H/m).
pub const MU_0: f64 = 4e-7 * PI;
/// Copper resistivity near 100 degC (Ohm m).
pub const RHO_CU: f64 = 2.3e-8;

/// Largest AC capacitance that draws at most `fraction` of the rated current:
/// `C_max = fraction I_o / (omega_o V_o)`.
pub fn ac_cap_limit(i_o_hat: f64, omega_o: f64, v_o_hat: f64, fraction: f64) -> Result<f64> {
    require_positive("i_o_hat", i_o_hat)?;
    require_positive("omega_o", omega_o)?;
    require_positive("v_o_hat", v_o_hat)?;
    if !(fraction >= 0.0 && fraction.is_finite()) {
        return Err(domain(format!("fraction must be >= 0, got {fraction}")));
    }
    Ok(fraction * i_o_hat / (omega_o * v_o_hat))
}

/// Composite constant of the area-product estimate, `fill j_max b_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaProductFactor {
    /// Copper fill factor of the window.
    pub fill: f64,
    /// Current density (A/m^2).
    pub j_max: f64,
    /// Peak flux density (T).
    pub b_max: f64,
}

impl Default for AreaProductFactor {
    fn default() -> Self {
        Self {
            fill: 0.4,
            j_max: 6e6,
            b_max: 0.3,
        }
    }
}

impl AreaProductFactor {
    pub fn k(&self) -> f64 {
        self.fill * self.j_max * self.b_max
    }
}

/// Area product `A_c A_w = L I_pk I_rms / k` (m^4).
pub fn area_product(l: f64, i_pk: f64, i_rms: f64, k_factor: f64) -> Result<f64> {
    require_positive("l", l)?;
    require_positive("k_factor", k_factor)?;
    if !(i_pk >= 0.0 && i_rms >= 0.0) {
        return Err(domain("currents must be >= 0"));
    }
    Ok(l * i_pk * i_rms / k_factor)
}

/// Peak and rms inductor current versus DC voltage for one inductance.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensioningCurve {
    pub l: f64,
    pub v_dc: Vec<f64>,
    pub i_pk: Vec<f64>,
    pub i_rms: Vec<f64>,
    /// Index of the largest `i_pk`.
    pub argmax_pk: usize,
    /// Index of the largest `i_rms`.
    pub argmax_rms: usize,
    /// Index of the largest `i_pk i_rms`.
    pub argmax_product: usize,
}

/// Samples per fundamental period of the rms integral.
const RMS_SAMPLES: usize = 4096;

/// rms of the envelope over one period, average plus triangular ripple.
pub fn envelope_rms(op: &OperatingPoint, params: &ConverterParams) -> f64 {
    let t_o = op.period();
    let ms: f64 = (0..RMS_SAMPLES)
        .map(|k| {
            let e = inductor_envelope(t_o * k as f64 / RMS_SAMPLES as f64, op, params);
            e.i_avg * e.i_avg + (2.0 * e.i_ripple).powi(2) / 12.0
        })
        .sum();
    (ms / RMS_SAMPLES as f64).sqrt()
}

fn argmax(x: &[f64]) -> usize {
    let mut k = 0;
    for (j, v) in x.iter().enumerate() {
        if *v > x[k] {
            k = j;
        }
    }
    k
}

/// Evaluates the inductor envelope for every inductance and DC voltage.
pub fn dimensioning_sweep(
    op_template: &OperatingPoint,
    params: &ConverterParams,
    l_set: &[f64],
    v_dc_range: &[f64],
) -> Result<Vec<DimensioningCurve>> {
    if l_set.is_empty() || v_dc_range.is_empty() {
        return Err(domain("sweep needs at least one inductance and one DC voltage"));
    }
    let mut out = Vec::with_capacity(l_set.len());
    for &l in l_set {
        require_positive("l", l)?;
        let p = ConverterParams { l_bb: l, ..*params };
        let mut i_pk = Vec::with_capacity(v_dc_range.len());
        let mut i_rms = Vec::with_capacity(v_dc_range.len());
        for &v_dc in v_dc_range {
            let op = OperatingPoint { v_dc, ..*op_template };
            op.validate()?;
            i_pk.push(crate::converter::envelope_peak(&op, &p).i_pk);
            i_rms.push(envelope_rms(&op, &p));
        }
        let prod: Vec<f64> = i_pk.iter().zip(&i_rms).map(|(a, b)| a * b).collect();
        out.push(DimensioningCurve {
            l,
            v_dc: v_dc_range.to_vec(),
            argmax_pk: argmax(&i_pk),
            argmax_rms: argmax(&i_rms),
            argmax_product: argmax(&prod),
            i_pk,
            i_rms,
        });
    }
    Ok(out)
}

/// Steinmetz parameters in SI units (W/m^3, Hz, T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Steinmetz {
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Steinmetz {
    /// MnZn power ferrite near 100 degC.
    pub fn ferrite() -> Self {
        Self {
            k: 7.0,
            alpha: 1.3,
            beta: 2.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("k", self.k)?;
        if !(self.alpha > 1.0 && self.beta > 2.0) {
            return Err(domain(format!(
                "need alpha > 1 and beta > 2, got {} and {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    /// Coefficient of the improved generalized Steinmetz equation.
    pub fn k_i(&self) -> f64 {
        const N: usize = 2000;
        let h = 2.0 * PI / N as f64;
        let f = |x: f64| x.cos().abs().powf(self.alpha);
        let mut s = f(0.0) + f(2.0 * PI);
        for j in 1..N {
            s += f(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
        }
        let integral = s * h / 3.0;
        self.k / ((2.0 * PI).powf(self.alpha - 1.0) * integral * 2f64.powf(self.beta - self.alpha))
    }
}

/// Magnetic core geometry and material.
#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    pub name: String,
    /// Effective cross-section (m^2).
    pub a_c: f64,
    /// Winding window (m^2).
    pub a_w: f64,
    /// Boxed volume (liters).
    pub volume_l: f64,
    pub b_sat: f64,
    pub steinmetz: Steinmetz,
}

/// Share of the boxed volume that is ferrite.
pub const CORE_VOLUME_FRACTION: f64 = 0.65;

impl Core {
    fn elp(name: &str, a_c_mm2: f64, a_w_mm2: f64, volume_cm3: f64) -> Self {
        Self {
            name: name.into(),
            a_c: a_c_mm2 * 1e-6,
            a_w: a_w_mm2 * 1e-6,
            volume_l: volume_cm3 * 1e-3,
            b_sat: 0.35,
            steinmetz: Steinmetz::ferrite(),
        }
    }

    /// ELP 32/6/20 planar E-core pair.
    pub fn elp_32_6_20() -> Self {
        Self::elp("ELP 32/6/20", 130.0, 60.0, 8.2)
    }

    /// Ferrite volume (m^3).
    pub fn v_e(&self) -> f64 {
        CORE_VOLUME_FRACTION * self.volume_l * 1e-3
    }

    /// Mean length of one turn (m).
    pub fn mlt(&self) -> f64 {
        PI * ((4.0 * self.a_c / PI).sqrt() + self.a_w.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("a_c", self.a_c)?;
        require_positive("a_w", self.a_w)?;
        require_positive("volume", self.volume_l)?;
        require_positive("b_sat", self.b_sat)?;
        self.steinmetz.validate()
    }
}

/// Built-in planar core table.
pub fn builtin_cores() -> Vec<Core> {
    vec![
        Core::elp("ELP 18/4/10", 39.5, 14.0, 1.44),
        Core::elp("ELP 22/6/16", 78.5, 30.0, 4.0),
        Core::elp_32_6_20(),
        Core::elp("ELP 38/8/25", 194.0, 96.0, 15.6),
        Core::elp("ELP 43/10/28", 229.0, 140.0, 22.9),
        Core::elp("ELP 58/11/38", 308.0, 210.0, 46.0),
    ]
}

/// Parses a core table `name, a_c_m2, a_w_m2, volume_l, b_sat_T, k, alpha, beta`.
pub fn cores_from_csv_str(text: &str) -> Result<Vec<Core>> {
    const HEADER: [&str; 8] = ["name", "a_c_m2", "a_w_m2", "volume_l", "b_sat_T", "k", "alpha", "beta"];
    let mut out = Vec::new();
    let mut header_seen = false;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let err = |msg: String| CoreError::Table { line: ln + 1, msg };
        if !header_seen {
            header_seen = true;
            if cols != HEADER {
                return Err(err(format!("expected header `{}`", HEADER.join(", "))));
            }
            continue;
        }
        if cols.len() != 8 {
            return Err(err(format!("expected 8 columns, got {}", cols.len())));
        }
        let mut x = [0.0; 7];
        for (k, c) in cols[1..].iter().enumerate() {
            x[k] = c.parse().map_err(|_| err(format!("not a number: `{c}`")))?;
        }
        let core = Core {
            name: cols[0].to_string(),
            a_c: x[0],
            a_w: x[1],
            volume_l: x[2],
            b_sat: x[3],
            steinmetz: Steinmetz {
                k: x[4],
                alpha: x[5],
                beta: x[6],
            },
        };
        core.validate().map_err(|e| err(e.to_string()))?;
        out.push(core);
    }
    Ok(out)
}

/// Core loss evaluation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoreLossModel {
    /// Improved generalized Steinmetz over the two segments of each cycle.
    #[default]
    Igse,
    /// Plain Steinmetz with the cycle frequency and half the flux swing.
    Steinmetz,
}

/// One inductor realization.
#[derive(Debug, Clone, PartialEq)]
pub struct InductorDesign {
    pub core: Core,
    pub n_turns: u32,
    /// Total air gap (m).
    pub gap: f64,
    /// Parallel litz strands.
    pub strands: u32,
    pub strand_diameter: f64,
    /// Effective winding layers for the proximity factor.
    pub layers: u32,
    /// Window fill factor.
    pub fill: f64,
    /// Current density limit (A/mm^2).
    pub j_max: f64,
    /// Loss limit (W).
    pub p_loss_max: f64,
    pub model: CoreLossModel,
}

impl InductorDesign {
    /// Gap giving inductance `l` with `n` turns on `core`: `mu_0 N^2 A_c / L`.
    pub fn gap_for(core: &Core, n: u32, l: f64) -> f64 {
        MU_0 * (n as f64).powi(2) * core.a_c / l
    }

    /// Eight turns of 200 x 0.1 mm litz on an ELP 32/6/20 for 10 uH.
    pub fn reference_10uh() -> Self {
        let core = Core::elp_32_6_20();
        let gap = Self::gap_for(&core, 8, 10e-6);
        Self {
            core,
            n_turns: 8,
            gap,
            strands: 200,
            strand_diameter: 0.1e-3,
            layers: 2,
            fill: 0.4,
            j_max: 8.0,
            p_loss_max: 4.0,
            model: CoreLossModel::Igse,
        }
    }

    /// `L = mu_0 N^2 A_c / gap`.
    pub fn inductance(&self) -> f64 {
        MU_0 * (self.n_turns as f64).powi(2) * self.core.a_c / self.gap
    }

    /// Copper cross-section of the conductor (m^2).
    pub fn a_cu(&self) -> f64 {
        self.strands as f64 * PI * self.strand_diameter.powi(2) / 4.0
    }

    /// DC winding resistance (Ohm).
    pub fn r_dc(&self) -> f64 {
        RHO_CU * self.n_turns as f64 * self.core.mlt() / self.a_cu()
    }

    /// Resistance factor at frequency `f` from the layer-based Dowell
    /// approximation `F_R = 1 + (5 m^2 - 1)/45 xi^4`, `xi = (pi/4)^0.75 d / delta`.
    pub fn f_r(&self, f: f64) -> f64 {
        if f <= 0.0 {
            return 1.0;
        }
        let delta = (RHO_CU / (PI * f * MU_0)).sqrt();
        let xi = (PI / 4.0).powf(0.75) * self.strand_diameter / delta;
        let m = self.layers as f64;
        1.0 + (5.0 * m * m - 1.0) / 45.0 * xi.powi(4)
    }

    pub fn validate(&self) -> Result<()> {
        self.core.validate()?;
        require_positive("gap", self.gap)?;
        require_positive("strand_diameter", self.strand_diameter)?;
        require_positive("fill", self.fill)?;
        require_positive("j_max", self.j_max)?;
        require_positive("p_loss_max", self.p_loss_max)?;
        if self.n_turns == 0 || self.strands == 0 || self.layers == 0 {
            return Err(domain("turns, strands and layers must be >= 1"));
        }
        Ok(())
    }
}

/// One switching cycle of the inductor current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveCycle {
    /// Cycle length (s).
    pub period: f64,
    /// Portion counted within the fundamental period (s).
    pub weight: f64,
    pub duty: f64,
    pub i_avg: f64,
    /// Peak-to-peak ripple (A).
    pub i_ripple: f64,
}

/// Inductor current over one fundamental period as average plus ripple.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentWaveform {
    pub f_o: f64,
    pub cycles: Vec<WaveCycle>,
}

impl CurrentWaveform {
    /// Phase `phase` of a modulation profile; clamped cycles carry no ripple.
    pub fn from_profile(profile: &ModulationProfile, phase: usize) -> Self {
        let cycles = profile.cycles[phase]
            .iter()
            .map(|c| WaveCycle {
                period: c.period,
                weight: c.weight,
                duty: c.duty,
                i_avg: c.i_avg,
                i_ripple: if c.clamped { 0.0 } else { c.i_ripple },
            })
            .collect();
        Self {
            f_o: profile.op.f_o,
            cycles,
        }
    }

    fn t_o(&self) -> f64 {
        1.0 / self.f_o
    }

    pub fn i_rms(&self) -> f64 {
        let ms: f64 = self
            .cycles
            .iter()
            .map(|c| (c.i_avg * c.i_avg + c.i_ripple * c.i_ripple / 12.0) * c.weight)
            .sum();
        (ms / self.t_o()).sqrt()
    }

    pub fn i_pk(&self) -> f64 {
        self.cycles
            .iter()
            .map(|c| c.i_avg.abs() + 0.5 * c.i_ripple)
            .fold(0.0, f64::max)
    }

    /// Peak-to-peak of the average current over the period.
    pub fn avg_swing(&self) -> f64 {
        let hi = self.cycles.iter().map(|c| c.i_avg).fold(f64::NEG_INFINITY, f64::max);
        let lo = self.cycles.iter().map(|c| c.i_avg).fold(f64::INFINITY, f64::min);
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }
}

/// Why a design point is infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Infeasibility {
    Saturation,
    Thermal,
    Window,
}

impl Infeasibility {
    pub fn name(self) -> &'static str {
        match self {
            Infeasibility::Saturation => "saturation",
            Infeasibility::Thermal => "thermal",
            Infeasibility::Window => "window",
        }
    }
}

/// Evaluated design candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignPoint {
    /// Boxed volume (liters).
    pub volume: f64,
    pub p_loss: f64,
    pub feasible: bool,
    pub infeasibility_reason: Option<Infeasibility>,
}

impl DesignPoint {
    pub fn feasible(volume: f64, p_loss: f64) -> Self {
        Self {
            volume,
            p_loss,
            feasible: true,
            infeasibility_reason: None,
        }
    }
}

/// Detailed inductor evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InductorLosses {
    pub p_core: f64,
    pub p_cu: f64,
    pub b_pk: f64,
    pub j_rms: f64,
    pub point: DesignPoint,
}

/// Ripple harmonics used for the winding loss.
const CU_HARMONICS: usize = 15;

/// Core and copper loss of `design` carrying `wave`.
///
/// Core loss sums, per switching cycle, the iGSE density
/// `k_i dB^beta T^-alpha (d^(1-alpha) + (1-d)^(1-alpha))` with
/// `dB = L dI / (N A_c)`, plus the major loop of the average current at the
/// fundamental. Copper loss applies `R_dc` to the average current and
/// `R_dc F_R(n f_s)` to each harmonic of the triangular ripple.
pub fn evaluate_inductor(design: &InductorDesign, wave: &CurrentWaveform) -> Result<InductorLosses> {
    design.validate()?;
    require_positive("f_o", wave.f_o)?;
    let l = design.inductance();
    let n_ac = design.n_turns as f64 * design.core.a_c;
    let st = design.core.steinmetz;
    let k_i = st.k_i();
    let t_o = 1.0 / wave.f_o;
    let r_dc = design.r_dc();

    let mut e_core = 0.0;
    let mut e_cu = 0.0;
    for c in &wave.cycles {
        e_cu += c.i_avg * c.i_avg * r_dc * c.weight;
        if c.i_ripple <= 0.0 || c.period <= 0.0 {
            continue;
        }
        let db = l * c.i_ripple / n_ac;
        let d = c.duty.clamp(1e-6, 1.0 - 1e-6);
        let p_v = match design.model {
            CoreLossModel::Igse => {
                k_i * db.powf(st.beta)
                    * c.period.powf(-st.alpha)
                    * (d.powf(1.0 - st.alpha) + (1.0 - d).powf(1.0 - st.alpha))
            }
            CoreLossModel::Steinmetz => st.k * (1.0 / c.period).powf(st.alpha) * (0.5 * db).powf(st.beta),
        };
        e_core += p_v * c.weight;
        let f_s = 1.0 / c.period;
        let denom = PI * PI * d * (1.0 - d);
        for n in 1..=CU_HARMONICS {
            let nf = n as f64;
            let amp = c.i_ripple * (PI * nf * d).sin().abs() / (denom * nf * nf);
            e_cu += 0.5 * amp * amp * r_dc * design.f_r(nf * f_s) * c.weight;
        }
    }
    let db_lf = l * wave.avg_swing() / n_ac;
    let p_v_lf = st.k * wave.f_o.powf(st.alpha) * (0.5 * db_lf).powf(st.beta);
    let p_core = design.core.v_e() * (e_core / t_o + p_v_lf);
    let p_cu = e_cu / t_o;
    let b_pk = l * wave.i_pk() / n_ac;
    let j_rms = wave.i_rms() / (design.a_cu() * 1e6);
    let p_loss = p_core + p_cu;
    let window_needed = design.n_turns as f64 * design.a_cu() / design.fill;
    let reason = if window_needed > design.core.a_w {
        Some(Infeasibility::Window)
    } else if b_pk > design.core.b_sat {
        Some(Infeasibility::Saturation)
    } else if p_loss > design.p_loss_max || j_rms > design.j_max {
        Some(Infeasibility::Thermal)
    } else {
        None
    };
    Ok(InductorLosses {
        p_core,
        p_cu,
        b_pk,
        j_rms,
        point: DesignPoint {
            volume: design.core.volume_l,
            p_loss,
            feasible: reason.is_none(),
            infeasibility_reason: reason,
        },
    })
}

/// Selection rule over design points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    Pareto,
    MinVolumeLossProduct,
}

fn usable(p: &DesignPoint) -> bool {
    p.feasible && p.volume.is_finite() && p.p_loss.is_finite()
}

/// Indices (ascending) of feasible points not dominated in (volume, loss).
///
/// `q` dominates `p` when it is no worse in both and strictly better in one;
/// exact duplicates do not dominate each other.
pub fn pareto_front(points: &[DesignPoint]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).filter(|&k| usable(&points[k])).collect();
    idx.sort_by(|&a, &b| {
        points[a]
            .volume
            .total_cmp(&points[b].volume)
            .then(points[a].p_loss.total_cmp(&points[b].p_loss))
    });
    let mut out = Vec::new();
    let mut best_prev = f64::INFINITY;
    let mut g = 0;
    while g < idx.len() {
        let v = points[idx[g]].volume;
        let mut end = g;
        while end < idx.len() && points[idx[end]].volume == v {
            end += 1;
        }
        let m = points[idx[g]].p_loss;
        if m < best_prev {
            out.extend(idx[g..end].iter().filter(|&&k| points[k].p_loss == m));
            best_prev = m;
        }
        g = end;
    }
    out.sort_unstable();
    out
}

/// Feasible point with the smallest `volume p_loss`; ties go to the smaller
/// volume, then the lower index.
pub fn select_min_product(points: &[DesignPoint]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, p) in points.iter().enumerate() {
        if !usable(p) {
            continue;
        }
        best = match best {
            None => Some(k),
            Some(b) => {
                let q = &points[b];
                let (pp, pq) = (p.volume * p.p_loss, q.volume * q.p_loss);
                if pp < pq || (pp == pq && p.volume < q.volume) {
                    Some(k)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Applies `rule`; the result is empty when no point is feasible.
pub fn pareto_and_select(points: &[DesignPoint], rule: SelectionRule) -> Vec<usize> {
    match rule {
        SelectionRule::Pareto => pareto_front(points),
        SelectionRule::MinVolumeLossProduct => select_min_product(points).into_iter().collect(),
    }
}

/// Converter efficiency at one DC voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyPoint {
    pub v_dc: f64,
    /// Semiconductor loss of one half-bridge (W).
    pub p_semi_hb: f64,
    /// Loss of one inductor (W).
    pub p_inductor: f64,
    pub p_total: f64,
    pub efficiency: f64,
    /// Semiconductor share of the total loss.
    pub semi_share: f64,
}

/// Efficiency `P / (P + 3 P_semi,hb + 3 P_ind)` of the DPWM inverter.
pub fn efficiency_point(
    op: &OperatingPoint,
    params: &ConverterParams,
    map: &LossMap,
    design: &InductorDesign,
) -> Result<EfficiencyPoint> {
    let params = ConverterParams {
        l_bb: design.inductance(),
        ..*params
    };
    let opts = ModulationOptions {
        flow: PowerFlow::Inverter,
        include_cap_current: true,
        samples_per_period: 64,
        ..Default::default()
    };
    let profile = synthesize(Scheme::Dpwm, op, &params, &opts)?;
    let semi = evaluate_semiconductor_losses(&profile.events, &profile, map, &params);
    let ind = evaluate_inductor(design, &CurrentWaveform::from_profile(&profile, 0))?;
    let p_total = 3.0 * semi.p_tot + 3.0 * ind.point.p_loss;
    Ok(EfficiencyPoint {
        v_dc: op.v_dc,
        p_semi_hb: semi.p_tot,
        p_inductor: ind.point.p_loss,
        p_total,
        efficiency: op.p_out / (op.p_out + p_total),
        semi_share: 3.0 * semi.p_tot / p_total,
    })
}

/// Differential amplifier with divider inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DividerSpec {
    pub r_p1: f64,
    pub r_p2: f64,
    pub r_n1: f64,
    pub r_f: f64,
    /// Offset potential at the foot of `r_p2` (V).
    pub phi: f64,
    /// Differential input `V_p - V_n` range (V).
    pub v_in_range: (f64, f64),
    /// Output range (V).
    pub v_out_range: (f64, f64),
}

/// Output supply rails (V).
pub const OPV_RAILS: (f64, f64) = (0.0, 3.0);

impl DividerSpec {
    /// DC-link measurement: 0..250 V to 0..3 V.
    pub fn dc_link() -> Self {
        Self {
            r_p1: 500e3,
            r_p2: 6e3,
            r_n1: 500e3,
            r_f: 6e3,
            phi: 0.0,
            v_in_range: (0.0, 250.0),
            v_out_range: (0.0, 3.0),
        }
    }

    /// AC capacitor voltage measurement, `V_p` at DC-, `V_n` at the capacitor:
    /// `V_n` from +10 V to -200 V.
    pub fn ac_phase() -> Self {
        Self {
            r_p1: 500e3,
            r_p2: 4e3,
            r_n1: 500e3,
            r_f: 4e3,
            phi: 1.2,
            v_in_range: (-10.0, 200.0),
            v_out_range: (1.12, 2.8),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (n, v) in [("r_p1", self.r_p1), ("r_p2", self.r_p2), ("r_n1", self.r_n1), ("r_f", self.r_f)] {
            require_positive(n, v)?;
        }
        Ok(())
    }
}

/// `V_out = (V_p R_p2 + phi R_p1)/(R_p1 + R_p2) (R_n1 + R_f)/R_n1 - V_n R_f / R_n1`.
pub fn opv_output(v_p: f64, v_n: f64, spec: &DividerSpec) -> Result<f64> {
    spec.validate()?;
    let v_plus = (v_p * spec.r_p2 + spec.phi * spec.r_p1) / (spec.r_p1 + spec.r_p2);
    Ok(v_plus * (spec.r_n1 + spec.r_f) / spec.r_n1 - v_n * spec.r_f / spec.r_n1)
}

/// Symmetric divider (`R_p1 = R_n1`, `R_p2 = R_f`) mapping the differential
/// input range onto the output range: `V_out = r (V_p - V_n) + phi`.
pub fn design_divider(in_range: (f64, f64), out_range: (f64, f64), r_n1: f64) -> Result<DividerSpec> {
    require_positive("r_n1", r_n1)?;
    let (a, b) = in_range;
    let (c, d) = out_range;
    if !(b - a).is_finite() || b == a {
        return Err(domain("input range must have nonzero width"));
    }
    let r = (d - c) / (b - a);
    if !(r > 0.0 && r.is_finite()) {
        return Err(CoreError::Infeasible(
            "output range direction needs a negative resistance ratio".into(),
        ));
    }
    if c.min(d) < OPV_RAILS.0 || c.max(d) > OPV_RAILS.1 {
        return Err(CoreError::Infeasible(format!(
            "output range [{c}, {d}] V outside the supply rails"
        )));
    }
    Ok(DividerSpec {
        r_p1: r_n1,
        r_p2: r * r_n1,
        r_n1,
        r_f: r * r_n1,
        phi: c - r * a,
        v_in_range: in_range,
        v_out_range: out_range,
    })
}

/// Calorimetric setup parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalorimetricSpec {
    pub v_dc_max: f64,
    pub n_par: u32,
    pub n_hb: u32,
    pub r_ds_on: f64,
    pub c_dc: f64,
    pub i_ss_hat: f64,
    pub i_hs_hat: f64,
    pub t_dead: f64,
    pub duty: f64,
    /// Soft-switched energy per device (J).
    pub e_ss_hat: f64,
    /// Hard-switched energy per device (J).
    pub e_hs_hat: f64,
    pub r_jc_pd: f64,
    pub r_chs_pd: f64,
    pub t_amb: f64,
    pub t_j_max: f64,
    pub t_br_min: f64,
    pub t_br_max: f64,
    /// Time for the block to rise from `t_br_min` to `t_br_max` (s).
    pub t_min: f64,
    /// Volumetric heat capacity (J/(K m^3)).
    pub s_rho: f64,
    pub via: ViaStackParams,
}

impl CalorimetricSpec {
    /// Two paralleled 600 V GaN devices per switch on a brass block.
    pub fn reference() -> Self {
        Self {
            v_dc_max: 400.0,
            n_par: 2,
            n_hb: 4,
            r_ds_on: 0.1,
            c_dc: 30e-6,
            i_ss_hat: 40.0,
            i_hs_hat: 10.0,
            t_dead: 20e-9,
            duty: 0.5,
            e_ss_hat: 3.2e-6,
            e_hs_hat: 40e-6,
            r_jc_pd: 1.0,
            r_chs_pd: 4.8,
            t_amb: 25.0,
            t_j_max: 120.0,
            t_br_min: 30.0,
            t_br_max: 40.0,
            t_min: 120.0,
            s_rho: 3205e3,
            via: ViaStackParams::reference(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_amb < self.t_br_min && self.t_br_min < self.t_br_max && self.t_br_max < self.t_j_max) {
            return Err(domain("need t_amb < t_br_min < t_br_max < t_j_max"));
        }
        require_positive("t_min", self.t_min)?;
        require_positive("s_rho", self.s_rho)?;
        require_positive("e_ss_hat", self.e_ss_hat)?;
        require_positive("e_hs_hat", self.e_hs_hat)?;
        if self.n_par == 0 || self.n_hb == 0 {
            return Err(domain("n_par and n_hb must be >= 1"));
        }
        Ok(())
    }

    /// `(T_j,max - T_br,max)/(R_jc,pd + R_chs,pd)`.
    pub fn p_max_pd(&self) -> f64 {
        (self.t_j_max - self.t_br_max) / (self.r_jc_pd + self.r_chs_pd)
    }
}

/// One switching-frequency limit and its chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyLimit {
    pub p_max_pd: f64,
    /// Conduction loss per half-bridge (W).
    pub p_cond: f64,
    pub p_cond_pd: f64,
    /// Switching-loss margin per device (W).
    pub p_sw_pd: f64,
    pub f_max: f64,
    /// Conduction alone exceeds the device budget.
    pub infeasible: bool,
}

/// Soft- and hard-switching frequency limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalorimetricLimits {
    pub soft: FrequencyLimit,
    pub hard: FrequencyLimit,
}

fn limit(spec: &CalorimetricSpec, i_rms: f64, e: f64) -> FrequencyLimit {
    let p_max_pd = spec.p_max_pd();
    let p_cond = i_rms * i_rms * spec.r_ds_on / spec.n_par as f64;
    let p_cond_pd = p_cond / spec.n_hb as f64;
    let p_sw_pd = p_max_pd - p_cond_pd;
    FrequencyLimit {
        p_max_pd,
        p_cond,
        p_cond_pd,
        p_sw_pd,
        f_max: (p_sw_pd / e).max(0.0),
        infeasible: p_sw_pd < 0.0,
    }
}

/// Soft switching carries a triangular current (`rms = I/sqrt 3`), hard
/// switching a DC current.
pub fn calorimetric_limits(spec: &CalorimetricSpec) -> Result<CalorimetricLimits> {
    spec.validate()?;
    Ok(CalorimetricLimits {
        soft: limit(spec, spec.i_ss_hat / 3f64.sqrt(), spec.e_ss_hat),
        hard: limit(spec, spec.i_hs_hat, spec.e_hs_hat),
    })
}

/// Brass block sizing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrassBlock {
    /// Thermal capacitance (J/K).
    pub c_th: f64,
    /// Volume (m^3).
    pub v_br: f64,
    /// Height (m).
    pub h_br: f64,
}

/// `C_th = N_HB P_max,pd t_min / dT`, `V = C_th / S rho`, `h = V / (l w)`.
pub fn brass_block(spec: &CalorimetricSpec, l_br: f64, w_br: f64) -> Result<BrassBlock> {
    spec.validate()?;
    require_positive("l_br", l_br)?;
    require_positive("w_br", w_br)?;
    let c_th = spec.n_hb as f64 * spec.p_max_pd() * spec.t_min / (spec.t_br_max - spec.t_br_min);
    let v_br = c_th / spec.s_rho;
    Ok(BrassBlock {
        c_th,
        v_br,
        h_br: v_br / (l_br * w_br),
    })
}
