//! Switching-loss maps, semiconductor loss evaluation and the steady-state
//! thermal chain (per-device split, via stack, heatsink budget, fan scaling).

use crate::converter::ConverterParams;
use crate::error::{domain, require_positive, CoreError, Result};
use crate::modulation::{profile_kpis, ModulationProfile, SwitchingTransition, TransitionKind};
use std::f64::consts::PI;

/// Which of the two tabulated energies to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    Soft,
    Hard,
}

/// Gridded switching energies per half-bridge and per transition.
///
/// Energies are stored row-major by voltage: `e[iv * n_i + ii]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMap {
    pub v_grid: Vec<f64>,
    pub i_grid: Vec<f64>,
    pub e_soft: Vec<f64>,
    pub e_hard: Vec<f64>,
}

/// Result of a map lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossLookup {
    /// Interpolated energy (J).
    pub energy: f64,
    /// The query fell outside the grid and was clamped to its edge.
    pub clamped: bool,
}

/// Anchors of a synthetic map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticMapSpec {
    /// Soft energy per half-bridge at the anchor (J).
    pub e_soft_anchor: f64,
    pub v_soft_anchor: f64,
    pub i_soft_anchor: f64,
    /// Hard energy per half-bridge at the anchor (J).
    pub e_hard_anchor: f64,
    pub v_hard_anchor: f64,
    pub i_hard_anchor: f64,
    /// Output capacitance giving the zero-current hard loss `C V^2 / 2` (F).
    pub c_oss: f64,
    pub v_max: f64,
    pub i_max: f64,
    pub n_v: usize,
    pub n_i: usize,
}

impl SyntheticMapSpec {
    /// Two paralleled 600 V GaN devices per switch, each dissipating 3.2 uJ
    /// soft at (400 V, 20 A) and 40 uJ hard at (400 V, 5 A); the anchors are
    /// the sums at twice the device current.
    pub fn gan_600v() -> Self {
        Self {
            e_soft_anchor: 2.0 * 3.2e-6,
            v_soft_anchor: 400.0,
            i_soft_anchor: 40.0,
            e_hard_anchor: 2.0 * 40e-6,
            v_hard_anchor: 400.0,
            i_hard_anchor: 10.0,
            c_oss: ConverterParams::inverter().c_oss,
            v_max: 600.0,
            i_max: 60.0,
            n_v: 25,
            n_i: 61,
        }
    }

    /// Single 900 V SiC device per switch, scaled from the same anchors.
    pub fn sic_900v() -> Self {
        Self {
            c_oss: ConverterParams::rectifier().c_oss,
            v_max: 900.0,
            i_max: 40.0,
            n_v: 37,
            n_i: 41,
            ..Self::gan_600v()
        }
    }
}

impl LossMap {
    /// Validates and builds a map.
    pub fn new(v_grid: Vec<f64>, i_grid: Vec<f64>, e_soft: Vec<f64>, e_hard: Vec<f64>) -> Result<Self> {
        if v_grid.is_empty() || i_grid.is_empty() {
            return Err(CoreError::EmptyMap("loss map has no grid points".into()));
        }
        let n = v_grid.len() * i_grid.len();
        if e_soft.len() != n || e_hard.len() != n {
            return Err(domain(format!(
                "loss map needs {n} energies per kind, got {} and {}",
                e_soft.len(),
                e_hard.len()
            )));
        }
        for g in [&v_grid, &i_grid] {
            if g.windows(2).any(|w| !(w[1] > w[0])) || g.iter().any(|x| !x.is_finite()) {
                return Err(domain("loss map grid must be finite and strictly increasing"));
            }
        }
        if e_soft.iter().chain(&e_hard).any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(domain("loss map energies must be finite and >= 0"));
        }
        Ok(Self {
            v_grid,
            i_grid,
            e_soft,
            e_hard,
        })
    }

    /// Synthetic map: soft `k_s v i`, hard `c_oss v^2 / 2 + k_h v i`, with the
    /// bilinear slopes fixed by the anchors.
    pub fn synthetic(spec: &SyntheticMapSpec) -> Result<Self> {
        let k_s = spec.e_soft_anchor / (spec.v_soft_anchor * spec.i_soft_anchor);
        let e_oss_anchor = 0.5 * spec.c_oss * spec.v_hard_anchor * spec.v_hard_anchor;
        let k_h = (spec.e_hard_anchor - e_oss_anchor) / (spec.v_hard_anchor * spec.i_hard_anchor);
        if k_h < k_s {
            return Err(domain("hard anchor below soft slope"));
        }
        let v_grid: Vec<f64> = (0..spec.n_v)
            .map(|j| spec.v_max * j as f64 / (spec.n_v - 1) as f64)
            .collect();
        let i_grid: Vec<f64> = (0..spec.n_i)
            .map(|j| spec.i_max * j as f64 / (spec.n_i - 1) as f64)
            .collect();
        let mut e_soft = Vec::with_capacity(spec.n_v * spec.n_i);
        let mut e_hard = Vec::with_capacity(spec.n_v * spec.n_i);
        for &v in &v_grid {
            for &i in &i_grid {
                e_soft.push(k_s * v * i);
                e_hard.push(0.5 * spec.c_oss * v * v + k_h * v * i);
            }
        }
        Self::new(v_grid, i_grid, e_soft, e_hard)
    }

    /// The shipped GaN map.
    pub fn gan_600v() -> Self {
        Self::synthetic(&SyntheticMapSpec::gan_600v()).expect("valid built-in map")
    }

    /// The shipped SiC map.
    pub fn sic_900v() -> Self {
        Self::synthetic(&SyntheticMapSpec::sic_900v()).expect("valid built-in map")
    }

    /// All-zero map on a small grid.
    pub fn lossless() -> Self {
        Self::new(vec![0.0, 1000.0], vec![0.0, 100.0], vec![0.0; 4], vec![0.0; 4]).unwrap()
    }

    fn table(&self, kind: EnergyKind) -> &[f64] {
        match kind {
            EnergyKind::Soft => &self.e_soft,
            EnergyKind::Hard => &self.e_hard,
        }
    }

    /// Bilinear lookup; queries outside the grid are clamped to the edge and flagged.
    pub fn energy(&self, v: f64, i: f64, kind: EnergyKind) -> LossLookup {
        let (iv, tv, cv) = locate(&self.v_grid, v);
        let (ii, ti, ci) = locate(&self.i_grid, i);
        let e = self.table(kind);
        let n_i = self.i_grid.len();
        let at = |a: usize, b: usize| e[a * n_i + b];
        let iv1 = (iv + 1).min(self.v_grid.len() - 1);
        let ii1 = (ii + 1).min(n_i - 1);
        let e0 = at(iv, ii) * (1.0 - ti) + at(iv, ii1) * ti;
        let e1 = at(iv1, ii) * (1.0 - ti) + at(iv1, ii1) * ti;
        LossLookup {
            energy: e0 * (1.0 - tv) + e1 * tv,
            clamped: cv || ci,
        }
    }

    /// Parses the CSV format `v_V, i_A, e_soft_J, e_hard_J`, rows ordered by
    /// voltage then current on a rectangular grid.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if !header_seen {
                header_seen = true;
                if cols != ["v_V", "i_A", "e_soft_J", "e_hard_J"] {
                    return Err(CoreError::Table {
                        line: ln + 1,
                        msg: "expected header `v_V, i_A, e_soft_J, e_hard_J`".into(),
                    });
                }
                continue;
            }
            if cols.len() != 4 {
                return Err(CoreError::Table {
                    line: ln + 1,
                    msg: format!("expected 4 columns, got {}", cols.len()),
                });
            }
            let mut r = [0.0; 4];
            for (k, c) in cols.iter().enumerate() {
                r[k] = c.parse().map_err(|_| CoreError::Table {
                    line: ln + 1,
                    msg: format!("not a number: `{c}`"),
                })?;
            }
            rows.push((ln + 1, r));
        }
        if rows.is_empty() {
            return Err(CoreError::EmptyMap("loss map CSV has no data rows".into()));
        }
        let mut v_grid: Vec<f64> = Vec::new();
        let mut i_grid: Vec<f64> = Vec::new();
        for (_, r) in &rows {
            if v_grid.last() != Some(&r[0]) {
                v_grid.push(r[0]);
            }
        }
        for (_, r) in rows.iter().take_while(|(_, r)| r[0] == rows[0].1[0]) {
            i_grid.push(r[1]);
        }
        if rows.len() != v_grid.len() * i_grid.len() {
            return Err(CoreError::Table {
                line: rows.last().unwrap().0,
                msg: "ragged grid".into(),
            });
        }
        for (k, (ln, r)) in rows.iter().enumerate() {
            if r[0] != v_grid[k / i_grid.len()] || r[1] != i_grid[k % i_grid.len()] {
                return Err(CoreError::Table {
                    line: *ln,
                    msg: "ragged grid".into(),
                });
            }
        }
        Self::new(
            v_grid,
            i_grid,
            rows.iter().map(|(_, r)| r[2]).collect(),
            rows.iter().map(|(_, r)| r[3]).collect(),
        )
    }

    /// Serializes in the CSV format read by [`LossMap::from_csv_str`].
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("v_V, i_A, e_soft_J, e_hard_J\n");
        let n_i = self.i_grid.len();
        for (a, v) in self.v_grid.iter().enumerate() {
            for (b, i) in self.i_grid.iter().enumerate() {
                s += &format!(
                    "{v}, {i}, {:e}, {:e}\n",
                    self.e_soft[a * n_i + b],
                    self.e_hard[a * n_i + b]
                );
            }
        }
        s
    }
}

fn locate(grid: &[f64], x: f64) -> (usize, f64, bool) {
    let n = grid.len();
    if n == 1 {
        return (0, 0.0, x != grid[0]);
    }
    if x <= grid[0] {
        return (0, 0.0, x < grid[0]);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0, x > grid[n - 1]);
    }
    let k = grid.partition_point(|g| *g <= x) - 1;
    let k = k.min(n - 2);
    (k, (x - grid[k]) / (grid[k + 1] - grid[k]), false)
}

/// Map lookup at `(v, i)`.
pub fn loss_energy(map: &LossMap, v: f64, i: f64, kind: EnergyKind) -> Result<LossLookup> {
    if map.v_grid.is_empty() || map.i_grid.is_empty() {
        return Err(CoreError::EmptyMap("loss map has no grid points".into()));
    }
    if !(v >= 0.0 && i >= 0.0) {
        return Err(domain(format!("loss lookup needs v, i >= 0, got ({v}, {i})")));
    }
    Ok(map.energy(v, i, kind))
}

/// Energy of one classified transition.
///
/// Partial transitions leave a residual voltage that shrinks roughly linearly
/// with the commutation current, so the zero-current hard loss is weighted by
/// `(1 - |i|/i_o)^2` on top of the soft loss. The blend equals the soft value at
/// `|i| = i_o` and the zero-current hard value at `i = 0`.
pub fn transition_energy(map: &LossMap, t: &SwitchingTransition, i_o: f64) -> f64 {
    let i = t.i_switched.abs();
    match t.kind {
        TransitionKind::Soft => map.energy(t.v_block, i, EnergyKind::Soft).energy,
        TransitionKind::Hard => map.energy(t.v_block, i, EnergyKind::Hard).energy,
        TransitionKind::Partial => {
            let w = if i_o > 0.0 { (1.0 - i / i_o).clamp(0.0, 1.0).powi(2) } else { 0.0 };
            map.energy(t.v_block, i, EnergyKind::Soft).energy
                + w * map.energy(t.v_block, 0.0, EnergyKind::Hard).energy
        }
    }
}

/// Semiconductor losses of one half-bridge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiconductorLosses {
    pub p_cond: f64,
    pub p_sw: f64,
    pub p_tot: f64,
}

/// Per-half-bridge losses averaged over the three phases.
///
/// `p_sw = f_o sum(E) / 3`, `p_cond = I_rms^2 r_ds_on / n_par`.
pub fn evaluate_semiconductor_losses(
    transitions: &[SwitchingTransition],
    profile: &ModulationProfile,
    map: &LossMap,
    params: &ConverterParams,
) -> SemiconductorLosses {
    let e: f64 = transitions
        .iter()
        .map(|t| transition_energy(map, t, profile.i_o))
        .sum();
    let p_sw = profile.op.f_o * e / 3.0;
    let i_rms = profile_kpis(profile, transitions).i_l_rms;
    let p_cond = i_rms * i_rms * params.r_on_eff();
    SemiconductorLosses {
        p_cond,
        p_sw,
        p_tot: p_cond + p_sw,
    }
}

/// Worst-case per-device dissipation `p_tot_hb split / n_par`.
pub fn per_device_worst(p_tot_hb: f64, split: f64, n_par: u32) -> Result<f64> {
    if !(split > 0.0 && split < 1.0) {
        return Err(domain(format!("split must lie in (0, 1), got {split}")));
    }
    if n_par == 0 {
        return Err(domain("n_par must be >= 1"));
    }
    Ok(p_tot_hb * split / n_par as f64)
}

/// Per-device thermal path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalStack {
    pub r_jc: f64,
    pub r_chs_pd: f64,
    pub r_hsa_pd: f64,
    pub t_amb: f64,
    pub t_j_max: f64,
}

impl ThermalStack {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [("r_jc", self.r_jc), ("r_chs_pd", self.r_chs_pd), ("r_hsa_pd", self.r_hsa_pd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(domain(format!("{n} must be >= 0, got {v}")));
            }
        }
        if !(self.t_j_max > self.t_amb) {
            return Err(domain("t_j_max must exceed t_amb"));
        }
        Ok(())
    }

    /// Junction-to-ambient resistance.
    pub fn r_total(&self) -> f64 {
        self.r_jc + self.r_chs_pd + self.r_hsa_pd
    }
}

/// Steady-state junction temperature `T_amb + p R_total`.
pub fn junction_temperature(p_pd: f64, stack: &ThermalStack) -> f64 {
    stack.t_amb + p_pd * stack.r_total()
}

/// Thermal-via array and pad under one device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViaStackParams {
    /// Via length (board thickness) (m).
    pub l_via: f64,
    pub k_cu: f64,
    pub k_s: f64,
    pub r_out: f64,
    pub r_in: f64,
    /// Pad thickness (m).
    pub d_pad: f64,
    pub lambda_pad: f64,
    pub a_pad: f64,
    pub n_vias: u32,
}

impl ViaStackParams {
    /// 1.7 mm board, 36 solder-filled vias of 0.15/0.10 mm radius, 0.3 mm pad.
    pub fn reference() -> Self {
        Self {
            l_via: 1.7e-3,
            k_cu: 385.0,
            k_s: 60.0,
            r_out: 0.15e-3,
            r_in: 0.10e-3,
            d_pad: 0.3e-3,
            lambda_pad: 17.0,
            a_pad: 13.6e-6,
            n_vias: 36,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (n, v) in [
            ("l_via", self.l_via),
            ("k_cu", self.k_cu),
            ("k_s", self.k_s),
            ("r_in", self.r_in),
            ("lambda_pad", self.lambda_pad),
            ("a_pad", self.a_pad),
        ] {
            require_positive(n, v)?;
        }
        if !(self.r_out > self.r_in) {
            return Err(domain("r_out must exceed r_in"));
        }
        if !(self.d_pad >= 0.0) || self.n_vias == 0 {
            return Err(domain("d_pad >= 0 and n_vias >= 1 required"));
        }
        Ok(())
    }

    /// Thermal resistance of one via: solder core and copper barrel in parallel.
    pub fn single_via(&self) -> f64 {
        let g = self.k_s * PI * self.r_in * self.r_in
            + self.k_cu * PI * (self.r_out * self.r_out - self.r_in * self.r_in);
        self.l_via / g
    }

    /// Thermal resistance of the pad.
    pub fn pad(&self) -> f64 {
        self.d_pad / (self.lambda_pad * self.a_pad)
    }
}

/// Case-to-heatsink resistance of the pad plus `n` vias in parallel.
pub fn via_stack_rth(p: &ViaStackParams, n: u32) -> Result<f64> {
    p.validate()?;
    if n == 0 {
        return Err(domain("via count must be >= 1"));
    }
    Ok(p.pad() + p.single_via() / n as f64)
}

/// Heatsink resistance limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatsinkBudget {
    /// Per-device heatsink-to-ambient limit (K/W); infinite at zero power.
    pub r_hsa_pd_max: f64,
    /// Limit for one heatsink shared by all `3 n_hb` devices (K/W).
    pub r_hsa_max: f64,
    /// No positive resistance meets the junction limit.
    pub infeasible: bool,
    /// Zero dissipation: any heatsink suffices.
    pub unbounded: bool,
}

/// `R_hsa,pd <= (T_j,max - T_amb)/P - R_jc - R_chs,pd`, `R_hsa <= R_hsa,pd / (3 n_hb)`.
pub fn heatsink_budget(
    r_jc: f64,
    r_chs_pd: f64,
    t_amb: f64,
    t_j_max: f64,
    p_max_pd: f64,
    n_hb: u32,
) -> Result<HeatsinkBudget> {
    if !(t_j_max > t_amb) {
        return Err(domain("t_j_max must exceed t_amb"));
    }
    if !(p_max_pd >= 0.0) || n_hb == 0 {
        return Err(domain("p_max_pd >= 0 and n_hb >= 1 required"));
    }
    if p_max_pd == 0.0 {
        return Ok(HeatsinkBudget {
            r_hsa_pd_max: f64::INFINITY,
            r_hsa_max: f64::INFINITY,
            infeasible: false,
            unbounded: true,
        });
    }
    let r = (t_j_max - t_amb) / p_max_pd - r_jc - r_chs_pd;
    Ok(HeatsinkBudget {
        r_hsa_pd_max: r,
        r_hsa_max: r / (3.0 * n_hb as f64),
        infeasible: r <= 0.0,
        unbounded: false,
    })
}

/// Fan-heatsink resistances from the cooling performance index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingResult {
    /// Resistance of one fan section (K/W).
    pub r_th2: f64,
    /// Resistance of all sections in parallel (K/W).
    pub r_hsa: f64,
}

/// `R_th2 = 1/(CSPI V_2)` with `V_2` in liters and CSPI in W/(K L); `R_hsa = R_th2 / n_fans`.
pub fn cspi_scale(cspi: f64, v2_liters: f64, n_fans: u32) -> Result<CoolingResult> {
    require_positive("cspi", cspi)?;
    require_positive("v2", v2_liters)?;
    if n_fans == 0 {
        return Err(domain("n_fans must be >= 1"));
    }
    let r_th2 = 1.0 / (cspi * v2_liters);
    Ok(CoolingResult {
        r_th2,
        r_hsa: r_th2 / n_fans as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulation::{synthesize, Edge, ModulationOptions, PowerFlow, Scheme};
    use crate::OperatingPoint;

    #[test]
    fn map_nodes_and_midpoints() {
        let m = LossMap::gan_600v();
        for (a, v) in m.v_grid.iter().enumerate() {
            for (b, i) in m.i_grid.iter().enumerate() {
                let e = m.energy(*v, *i, EnergyKind::Hard);
                assert_eq!(e.energy, m.e_hard[a * m.i_grid.len() + b]);
                assert!(!e.clamped);
            }
        }
        let (v0, v1, i0, i1) = (m.v_grid[3], m.v_grid[4], m.i_grid[7], m.i_grid[8]);
        let mid = m.energy(0.5 * (v0 + v1), 0.5 * (i0 + i1), EnergyKind::Soft).energy;
        let mean = [(v0, i0), (v0, i1), (v1, i0), (v1, i1)]
            .iter()
            .map(|(v, i)| m.energy(*v, *i, EnergyKind::Soft).energy)
            .sum::<f64>()
            / 4.0;
        assert!((mid - mean).abs() <= 1e-15 * mean.max(1e-30));
    }

    #[test]
    fn map_anchor_values() {
        let m = LossMap::gan_600v();
        let e = m.energy(400.0, 40.0, EnergyKind::Soft).energy;
        assert!((e - 6.4e-6).abs() < 1e-12);
        let e = m.energy(400.0, 10.0, EnergyKind::Hard).energy;
        assert!((e - 80e-6).abs() < 1e-12);
        let zcs = m.energy(400.0, 0.0, EnergyKind::Hard).energy;
        assert!((zcs - 0.5 * 140e-12 * 400.0 * 400.0).abs() < 1e-12);
        for k in 0..m.e_soft.len() {
            assert!(m.e_soft[k] <= m.e_hard[k]);
        }
    }

    #[test]
    fn map_clamps_outside() {
        let m = LossMap::gan_600v();
        let e = m.energy(1e4, 1e3, EnergyKind::Soft);
        assert!(e.clamped);
        assert_eq!(e.energy, *m.e_soft.last().unwrap());
        assert!(loss_energy(&m, -1.0, 0.0, EnergyKind::Soft).is_err());
    }

    #[test]
    fn csv_round_trip_and_ragged() {
        let m = LossMap::sic_900v();
        let back = LossMap::from_csv_str(&m.to_csv_string()).unwrap();
        assert_eq!(back.v_grid, m.v_grid);
        assert_eq!(back.i_grid, m.i_grid);
        for k in 0..m.e_soft.len() {
            assert!((back.e_soft[k] - m.e_soft[k]).abs() <= 1e-12 * m.e_soft[k].max(1e-30));
        }
        let ragged = "v_V, i_A, e_soft_J, e_hard_J\n0, 0, 0, 0\n0, 1, 0, 0\n1, 0, 0, 0\n";
        assert!(matches!(LossMap::from_csv_str(ragged), Err(CoreError::Table { .. })));
        assert!(matches!(
            LossMap::from_csv_str("v_V, i_A, e_soft_J, e_hard_J\n"),
            Err(CoreError::EmptyMap(_))
        ));
    }

    #[test]
    fn partial_blend_is_continuous() {
        let m = LossMap::gan_600v();
        let mk = |i: f64, kind| SwitchingTransition {
            t: 0.0,
            phase: 0,
            edge: Edge::Rising,
            v_block: 300.0,
            i_switched: i,
            kind,
        };
        let i_o = 2.0;
        let at_io = transition_energy(&m, &mk(i_o, TransitionKind::Partial), i_o);
        let soft = transition_energy(&m, &mk(i_o, TransitionKind::Soft), i_o);
        assert!((at_io - soft).abs() < 1e-18);
        let at0 = transition_energy(&m, &mk(0.0, TransitionKind::Partial), i_o);
        let hard0 = transition_energy(&m, &mk(0.0, TransitionKind::Hard), i_o);
        assert!((at0 - hard0).abs() < 1e-18);
    }

    #[test]
    fn lossless_gives_zero() {
        let op = OperatingPoint::inverter(80.0);
        let mut params = ConverterParams::inverter();
        params.r_ds_on = 0.0;
        let opts = ModulationOptions {
            flow: PowerFlow::Inverter,
            ..Default::default()
        };
        let p = synthesize(Scheme::Dpwm, &op, &params, &opts).unwrap();
        let l = evaluate_semiconductor_losses(&p.events, &p, &LossMap::lossless(), &params);
        assert_eq!((l.p_cond, l.p_sw, l.p_tot), (0.0, 0.0, 0.0));
    }

    #[test]
    fn per_device_examples() {
        assert!((per_device_worst(9.5, 0.65, 2).unwrap() - 3.0875).abs() < 1e-12);
        assert!((per_device_worst(7.0, 0.5, 1).unwrap() - 3.5).abs() < 1e-12);
        assert!((per_device_worst(9.5, 0.35, 2).unwrap() - 1.6625).abs() < 1e-12);
        assert!(per_device_worst(9.5, 1.0, 2).is_err());
    }

    #[test]
    fn via_stack_examples() {
        let p = ViaStackParams::reference();
        let r = via_stack_rth(&p, p.n_vias).unwrap();
        assert!((r - 4.08).abs() / 4.08 < 0.02, "{r}");
        let inf = ViaStackParams {
            lambda_pad: 1e30,
            ..p
        };
        assert!((via_stack_rth(&inf, 36).unwrap() - p.single_via() / 36.0).abs() < 1e-12);
        let r36 = via_stack_rth(&p, 36).unwrap() - p.pad();
        let r72 = via_stack_rth(&p, 72).unwrap() - p.pad();
        assert!((r36 / r72 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn heatsink_examples() {
        let r_chs = via_stack_rth(&ViaStackParams::reference(), 36).unwrap();
        let b = heatsink_budget(1.0, r_chs, 40.0, 120.0, 3.1, 4).unwrap();
        assert!((b.r_hsa_pd_max - 20.84).abs() / 20.84 < 0.01);
        assert!((b.r_hsa_max - 1.74).abs() / 1.74 < 0.01);
        let z = heatsink_budget(1.0, r_chs, 40.0, 120.0, 0.0, 4).unwrap();
        assert!(z.unbounded && z.r_hsa_pd_max.is_infinite());
        let bad = heatsink_budget(1.0, r_chs, 40.0, 120.0, 100.0, 4).unwrap();
        assert!(bad.infeasible);
    }

    #[test]
    fn budget_boundary_returns_tj_max() {
        let r_chs = via_stack_rth(&ViaStackParams::reference(), 36).unwrap();
        let b = heatsink_budget(1.0, r_chs, 40.0, 120.0, 3.1, 4).unwrap();
        let st = ThermalStack {
            r_jc: 1.0,
            r_chs_pd: r_chs,
            r_hsa_pd: b.r_hsa_pd_max,
            t_amb: 40.0,
            t_j_max: 120.0,
        };
        assert!((junction_temperature(3.1, &st) - 120.0).abs() < 1e-12);
    }

    #[test]
    fn junction_examples() {
        let st = ThermalStack {
            r_jc: 1.0,
            r_chs_pd: 0.0,
            r_hsa_pd: 64.0,
            t_amb: 25.0,
            t_j_max: 150.0,
        };
        assert!((junction_temperature(3.1, &st) - 226.5).abs() < 1e-9);
        assert_eq!(junction_temperature(0.0, &st), 25.0);
        assert!((junction_temperature(4.1, &st) - junction_temperature(3.1, &st) - 65.0).abs() < 1e-9);
    }

    #[test]
    fn cspi_examples() {
        let c = cspi_scale(22.37, 0.01, 8).unwrap();
        assert!((c.r_th2 - 4.62).abs() / 4.62 < 0.04);
        assert!((c.r_hsa - 0.58).abs() / 0.58 < 0.04);
        let c2 = cspi_scale(22.37, 0.02, 8).unwrap();
        assert!((c.r_th2 / c2.r_th2 - 2.0).abs() < 1e-12);
        let one = cspi_scale(22.37, 0.02, 1).unwrap();
        assert!((one.r_th2 - 2.235).abs() < 1e-3);
    }
}
