//! Run configuration: `[section]` headers, `key = value` lines, SI suffixes.
//!
//! Parsing checks every section, key and value against [`SCHEMA`]; typed
//! values are then resolved onto mode presets by [`RunConfig::from_document`].

use crate::units::{parse_quantity, Unit};
use ibb_core::modulation::Scheme;
use ibb_core::{ConverterParams, OperatingPoint};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// Parse or validation failure, located when it stems from one line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line and column.
    pub at: Option<(usize, usize)>,
    pub msg: String,
}

impl ConfigError {
    fn at(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Self { at: Some((line, col)), msg: msg.into() }
    }

    fn global(msg: impl Into<String>) -> Self {
        Self { at: None, msg: msg.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.at {
            Some((l, c)) => write!(f, "line {l}, column {c}: {}", self.msg),
            None => write!(f, "{}", self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Value type of a key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Quantity(Unit),
    /// Non-negative integer.
    Integer,
    Boolean,
    /// Free text, or one of the listed words when non-empty.
    Text(&'static [&'static str]),
    QuantityList(Unit),
    IntegerList,
    TextList(&'static [&'static str]),
    /// Comma-separated values in the unit of the swept key.
    SweepValues,
}

impl Kind {
    fn describe(&self) -> String {
        match self {
            Kind::Quantity(Unit::None) => "number".into(),
            Kind::Quantity(u) => format!("quantity [{}]", u.label()),
            Kind::Integer => "integer".into(),
            Kind::Boolean => "true or false".into(),
            Kind::Text(w) if w.is_empty() => "text".into(),
            Kind::Text(w) => format!("one of {}", w.join(", ")),
            Kind::QuantityList(u) => format!("list of quantities [{}]", u.label()),
            Kind::IntegerList => "list of integers".into(),
            Kind::TextList(w) => format!("list of {}", w.join(", ")),
            Kind::SweepValues => "list in the unit of `parameter`".into(),
        }
    }
}

pub struct KeySpec {
    pub key: &'static str,
    pub kind: Kind,
    pub doc: &'static str,
}

pub struct SectionSpec {
    pub name: &'static str,
    pub doc: &'static str,
    pub keys: &'static [KeySpec],
}

const fn k(key: &'static str, kind: Kind, doc: &'static str) -> KeySpec {
    KeySpec { key, kind, doc }
}

use Kind::*;
use Unit::{
    Ampere, Celsius, Conductivity, Cspi, CurrentDensity, Farad, Henry, Hertz, Joule, KelvinPerWatt, Liter, Meter, Ohm,
    Second, SquareMeter, VolumetricHeat, Volt, Watt,
};

const MODES: &[&str] = &["rectifier", "inverter", "dc-dc-phase"];
const SCHEMES: &[&str] = &["pwm", "dpwm", "bcm"];

/// Every accepted section and key.
pub static SCHEMA: &[SectionSpec] = &[
    SectionSpec {
        name: "converter",
        doc: "Topology mode; selects the preset that unset keys fall back to.",
        keys: &[k("mode", Text(MODES), "rectifier (600 W, 115 V rms, 400 Hz), inverter (1 kW, 80 V, 1 kHz) or dc-dc-phase (phase a only, open loop)")],
    },
    SectionSpec {
        name: "operating",
        doc: "Electrical operating point.",
        keys: &[
            k("v_dc", Quantity(Volt), "DC-side voltage"),
            k("v_ac_hat", Quantity(Volt), "AC phase voltage amplitude"),
            k("v_ac_rms", Quantity(Volt), "AC phase voltage rms; alternative to v_ac_hat"),
            k("p_out", Quantity(Watt), "active power"),
            k("f_o", Quantity(Hertz), "fundamental frequency"),
            k("f_s", Quantity(Hertz), "nominal switching frequency"),
            k("f_s_max", Quantity(Hertz), "BCM switching-frequency ceiling"),
        ],
    },
    SectionSpec {
        name: "params",
        doc: "Passive components and semiconductor abstractions.",
        keys: &[
            k("l_bb", Quantity(Henry), "buck-boost inductance per phase"),
            k("c_ac", Quantity(Farad), "AC-side capacitance per phase"),
            k("c_dc", Quantity(Farad), "DC-link capacitance"),
            k("l_f", Quantity(Henry), "grid filter inductance (rectifier)"),
            k("r_load_dc", Quantity(Ohm), "DC load resistance (rectifier)"),
            k("c_oss", Quantity(Farad), "effective output capacitance of one switch position"),
            k("r_ds_on", Quantity(Ohm), "on-resistance of one device"),
            k("n_par", Integer, "parallel devices per switch position"),
            k("n_hb", Integer, "devices per half-bridge"),
            k("dead_time", Quantity(Second), "dead time between complementary gates"),
        ],
    },
    SectionSpec {
        name: "controller",
        doc: "Closed-loop control (simulate).",
        keys: &[
            k("cm", Text(&["dpwm", "smoothing"]), "common-mode shaping"),
            k("v_var", Quantity(Unit::None), "smoothing window as a fraction of v_ac_hat"),
            k("bw_divider", Quantity(Unit::None), "inductor-loop bandwidth is f_s / bw_divider (rectifier)"),
            k("bw_ratio", Quantity(Unit::None), "bandwidth ratio between adjacent loops, >= 4 (rectifier)"),
        ],
    },
    SectionSpec {
        name: "simulation",
        doc: "Time-domain run settings (simulate).",
        keys: &[
            k("periods", Quantity(Unit::None), "simulated fundamental periods (ac modes)"),
            k("steps_per_period", Integer, "integration steps per switching period, >= 200"),
            k("kpi_periods", Integer, "trailing fundamental periods evaluated for KPIs"),
            k("load_l", Quantity(Henry), "series inductance of the inverter load"),
            k("duty", Quantity(Unit::None), "fixed duty (dc-dc-phase)"),
            k("r_load", Quantity(Ohm), "capacitor load resistance (dc-dc-phase)"),
            k("switching_periods", Integer, "simulated switching periods (dc-dc-phase)"),
        ],
    },
    SectionSpec {
        name: "requirements",
        doc: "Optional pass/fail limits on simulate KPIs; any failure gives exit status 1.",
        keys: &[
            k("thd_i_max", Quantity(Unit::None), "largest AC current THD"),
            k("thd_v_max", Quantity(Unit::None), "largest DM capacitor voltage THD"),
            k("pf_min", Quantity(Unit::None), "smallest power factor"),
            k("v_dc_min", Quantity(Volt), "smallest mean DC voltage"),
            k("v_dc_max", Quantity(Volt), "largest mean DC voltage"),
            k("v_dc_ripple_max", Quantity(Unit::None), "largest DC peak-to-peak ripple over mean"),
            k("audit_max", Quantity(Unit::None), "largest per-period energy-audit residue"),
            k("duty_error_max", Quantity(Unit::None), "largest relative error of |v_c|/v_dc against d/(1-d) (dc-dc-phase)"),
        ],
    },
    SectionSpec {
        name: "sweep",
        doc: "One swept key; each value runs independently and is written under sweep_NNN/.",
        keys: &[
            k("parameter", Text(&[]), "swept key as section.key, e.g. operating.v_dc"),
            k("values", SweepValues, "values of the swept key"),
        ],
    },
    SectionSpec {
        name: "modulation",
        doc: "Steady-state modulation synthesis (compare-modulations, design-inductor).",
        keys: &[
            k("schemes", TextList(SCHEMES), "schemes to compare, in row order"),
            k("scheme", Text(SCHEMES), "scheme whose current drives design-inductor"),
            k("cm_margin", Quantity(Unit::None), "PWM/BCM common-mode offset margin over v_ac_hat"),
            k("samples_per_period", Integer, "uniform samples per fundamental period"),
            k("include_cap_current", Boolean, "add the AC capacitor current"),
            k("i_o", Quantity(Ampere), "soft-switching current threshold; derived from c_oss when unset"),
        ],
    },
    SectionSpec {
        name: "losses",
        doc: "Switching-loss map for compare-modulations and efficiency.",
        keys: &[k("map", Text(&[]), "gan600, sic900, lossless, or a CSV file path")],
    },
    SectionSpec {
        name: "envelope",
        doc: "Inductor current envelope sweep (envelope).",
        keys: &[
            k("l_set", QuantityList(Henry), "inductances"),
            k("v_dc_min", Quantity(Volt), "lowest DC voltage"),
            k("v_dc_max", Quantity(Volt), "highest DC voltage"),
            k("v_dc_points", Integer, "DC voltage grid points, >= 2"),
        ],
    },
    SectionSpec {
        name: "efficiency",
        doc: "Efficiency versus DC voltage with the reference 10 uH inductor (envelope).",
        keys: &[k("enabled", Boolean, "emit efficiency.csv and efficiency.svg")],
    },
    SectionSpec {
        name: "design",
        doc: "Inductor design-space enumeration (design-inductor).",
        keys: &[
            k("cores", Text(&[]), "builtin, or a CSV core table path"),
            k("l_target", Quantity(Henry), "inductance every candidate is gapped to"),
            k("turns_min", Integer, "fewest turns"),
            k("turns_max", Integer, "most turns"),
            k("strands", IntegerList, "litz strand counts"),
            k("strand_diameter", Quantity(Meter), "litz strand diameter"),
            k("layers", Integer, "winding layers for the proximity factor"),
            k("fill", Quantity(Unit::None), "window fill factor"),
            k("j_max", Quantity(CurrentDensity), "current density limit"),
            k("p_loss_max", Quantity(Watt), "loss limit per inductor"),
            k("model", Text(&["igse", "steinmetz"]), "core loss model"),
            k("random_designs", Integer, "extra candidates drawn with --seed"),
            k("cap_fraction", Quantity(Unit::None), "AC capacitor current as a fraction of the rated current"),
        ],
    },
    SectionSpec {
        name: "thermal",
        doc: "Per-device dissipation, junction temperature and heatsink budget (thermal-check).",
        keys: &[
            k("p_tot_hb", Quantity(Watt), "worst-case loss of one half-bridge"),
            k("split", Quantity(Unit::None), "worst-case share of the hotter device position"),
            k("n_par", Integer, "parallel devices per switch position"),
            k("n_hb", Integer, "half-bridges sharing the heatsink budget"),
            k("p_pd", Quantity(Watt), "per-device power override (e.g. a rounded value)"),
            k("r_jc", Quantity(KelvinPerWatt), "junction-to-case resistance"),
            k("r_ca_min", Quantity(KelvinPerWatt), "case-to-ambient resistance without heatsink"),
            k("t_amb_open", Quantity(Celsius), "ambient temperature without heatsink"),
            k("t_j_max_device", Quantity(Celsius), "datasheet junction limit"),
            k("r_chs_pd", Quantity(KelvinPerWatt), "case-to-heatsink resistance; via stack when unset"),
            k("n_vias", Integer, "thermal vias under one device"),
            k("t_amb", Quantity(Celsius), "ambient temperature of the heatsink design"),
            k("t_j_max", Quantity(Celsius), "junction limit of the heatsink design"),
            k("cspi", Quantity(Cspi), "cooling system performance index"),
            k("v2", Quantity(Liter), "volume of one fan-heatsink section"),
            k("n_fans", Integer, "fan-heatsink sections in parallel"),
        ],
    },
    SectionSpec {
        name: "calorimetric",
        doc: "Calorimetric loss measurement setup (calorimetric).",
        keys: &[
            k("v_dc_max", Quantity(Volt), "largest DC voltage"),
            k("n_par", Integer, "parallel devices per switch"),
            k("n_hb", Integer, "devices per half-bridge"),
            k("r_ds_on", Quantity(Ohm), "on-resistance of one device"),
            k("i_ss_hat", Quantity(Ampere), "peak of the triangular soft-switching current"),
            k("i_hs_hat", Quantity(Ampere), "DC hard-switching current"),
            k("e_ss_hat", Quantity(Joule), "soft-switching energy per period"),
            k("e_hs_hat", Quantity(Joule), "hard-switching energy per period"),
            k("r_jc_pd", Quantity(KelvinPerWatt), "junction-to-case resistance per device"),
            k("r_chs_pd", Quantity(KelvinPerWatt), "case-to-heatsink resistance per device"),
            k("t_amb", Quantity(Celsius), "ambient temperature"),
            k("t_j_max", Quantity(Celsius), "junction limit"),
            k("t_br_min", Quantity(Celsius), "brass block start temperature"),
            k("t_br_max", Quantity(Celsius), "brass block end temperature"),
            k("t_min", Quantity(Second), "shortest measurement duration"),
            k("s_rho", Quantity(VolumetricHeat), "volumetric heat capacity of the block"),
            k("l_br", Quantity(Meter), "block length"),
            k("w_br", Quantity(Meter), "block width"),
            k("l_via", Quantity(Meter), "via length (board thickness)"),
            k("k_cu", Quantity(Conductivity), "copper conductivity"),
            k("k_s", Quantity(Conductivity), "via fill conductivity"),
            k("r_out", Quantity(Meter), "via outer radius"),
            k("r_in", Quantity(Meter), "via inner radius"),
            k("d_pad", Quantity(Meter), "thermal pad thickness"),
            k("lambda_pad", Quantity(Conductivity), "thermal pad conductivity"),
            k("a_pad", Quantity(SquareMeter), "thermal pad area"),
            k("n_vias", Integer, "vias under one device"),
        ],
    },
    SectionSpec {
        name: "output",
        doc: "Artifact location; --out-dir takes precedence.",
        keys: &[k("dir", Text(&[]), "output directory, relative to the config file")],
    },
];

fn section_spec(name: &str) -> Option<&'static SectionSpec> {
    SCHEMA.iter().find(|s| s.name == name)
}

fn key_spec(section: &str, key: &str) -> Option<&'static KeySpec> {
    section_spec(section)?.keys.iter().find(|k| k.key == key)
}

/// Raw value with its location.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub raw: String,
    pub line: usize,
    /// Column of the first value character.
    pub col: usize,
}

/// Schema-checked key/value text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    header_line: BTreeMap<String, usize>,
    /// Directory relative paths resolve against.
    pub base_dir: PathBuf,
}

fn split_list(raw: &str) -> Vec<&str> {
    raw.split(',').map(str::trim).collect()
}

fn unquote(raw: &str) -> &str {
    let t = raw.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        &t[1..t.len() - 1]
    } else {
        t
    }
}

fn check_value(kind: Kind, raw: &str) -> Result<(), String> {
    let word = |w: &str, allowed: &[&str]| {
        if allowed.is_empty() || allowed.contains(&w.to_ascii_lowercase().as_str()) {
            Ok(())
        } else {
            Err(format!("`{w}` is not one of {}", allowed.join(", ")))
        }
    };
    match kind {
        Quantity(u) => parse_quantity(raw, u).map(|_| ()),
        Integer => parse_int(raw).map(|_| ()),
        Boolean => parse_bool(raw).map(|_| ()),
        Text(allowed) => {
            if unquote(raw).is_empty() {
                return Err("empty value".into());
            }
            word(unquote(raw), allowed)
        }
        QuantityList(u) => split_list(raw).into_iter().try_for_each(|v| parse_quantity(v, u).map(|_| ())),
        IntegerList => split_list(raw).into_iter().try_for_each(|v| parse_int(v).map(|_| ())),
        TextList(allowed) => split_list(raw).into_iter().try_for_each(|v| word(v, allowed)),
        SweepValues => {
            if split_list(raw).iter().any(|v| v.is_empty()) {
                Err("empty list element".into())
            } else {
                Ok(())
            }
        }
    }
}

fn parse_int(raw: &str) -> Result<u64, String> {
    raw.trim().parse::<u64>().map_err(|_| format!("`{}` is not a non-negative integer", raw.trim()))
}

fn parse_bool(raw: &str) -> Result<bool, String> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        other => Err(format!("`{other}` is not true or false")),
    }
}

/// Strips a `#` or `;` comment outside double quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' | ';' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn col_of(line: &str, byte: usize) -> usize {
    line[..byte].chars().count() + 1
}

impl Document {
    /// Parses and schema-checks `text`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc = Document::default();
        let mut current: Option<String> = None;
        for (i, full) in text.lines().enumerate() {
            let ln = i + 1;
            let line = strip_comment(full);
            let body = line.trim();
            if body.is_empty() {
                continue;
            }
            let lead = line.len() - line.trim_start().len();
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(ln, col_of(line, lead), "section header is missing `]`"))?
                    .trim();
                if section_spec(name).is_none() {
                    return Err(ConfigError::at(ln, col_of(line, lead + 1), format!("unknown section `[{name}]`")));
                }
                if doc.header_line.contains_key(name) {
                    return Err(ConfigError::at(ln, col_of(line, lead), format!("section `[{name}]` repeated")));
                }
                doc.header_line.insert(name.to_string(), ln);
                doc.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let eq = line
                .find('=')
                .ok_or_else(|| ConfigError::at(ln, col_of(line, lead), "expected `key = value`"))?;
            let key = line[..eq].trim();
            let section = current
                .as_deref()
                .ok_or_else(|| ConfigError::at(ln, col_of(line, lead), format!("key `{key}` appears before any section")))?;
            let Some(spec) = key_spec(section, key) else {
                return Err(ConfigError::at(ln, col_of(line, lead), format!("unknown key `{key}` in section `[{section}]`")));
            };
            let value = &line[eq + 1..];
            let vlead = value.len() - value.trim_start().len();
            let vcol = col_of(line, eq + 1 + vlead);
            let raw = value.trim();
            if raw.is_empty() {
                return Err(ConfigError::at(ln, vcol, format!("key `{key}` has no value")));
            }
            check_value(spec.kind, raw).map_err(|m| ConfigError::at(ln, vcol, format!("key `{key}`: {m}")))?;
            let entries = doc.sections.get_mut(section).expect("section inserted at its header");
            if entries.contains_key(key) {
                return Err(ConfigError::at(ln, col_of(line, lead), format!("key `{key}` repeated")));
            }
            entries.insert(key.to_string(), Entry { raw: raw.to_string(), line: ln, col: vcol });
        }
        Ok(doc)
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::global(format!("cannot read {}: {e}", path.display())))?;
        let mut doc = Self::parse(&text)?;
        doc.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(doc)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section)?.get(key)
    }

    fn located<T>(&self, section: &str, key: &str, f: impl FnOnce(&Entry) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => f(e).map(Some).map_err(|m| ConfigError::at(e.line, e.col, format!("key `{key}`: {m}"))),
        }
    }

    fn unit_of(section: &str, key: &str) -> Unit {
        match key_spec(section, key).map(|k| k.kind) {
            Some(Quantity(u)) | Some(QuantityList(u)) => u,
            _ => Unit::None,
        }
    }

    pub fn quantity(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        let u = Self::unit_of(section, key);
        self.located(section, key, |e| parse_quantity(&e.raw, u))
    }

    pub fn quantities(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let u = Self::unit_of(section, key);
        self.located(section, key, |e| split_list(&e.raw).into_iter().map(|v| parse_quantity(v, u)).collect())
    }

    pub fn integer(&self, section: &str, key: &str) -> Result<Option<u64>, ConfigError> {
        self.located(section, key, |e| parse_int(&e.raw))
    }

    pub fn integers(&self, section: &str, key: &str) -> Result<Option<Vec<u64>>, ConfigError> {
        self.located(section, key, |e| split_list(&e.raw).into_iter().map(parse_int).collect())
    }

    pub fn boolean(&self, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
        self.located(section, key, |e| parse_bool(&e.raw))
    }

    pub fn text(&self, section: &str, key: &str) -> Option<String> {
        self.entry(section, key).map(|e| unquote(&e.raw).to_string())
    }

    pub fn texts(&self, section: &str, key: &str) -> Option<Vec<String>> {
        self.entry(section, key).map(|e| split_list(&e.raw).into_iter().map(String::from).collect())
    }

    /// Error located at `section.key`, or at the section header.
    pub fn error_at(&self, section: &str, key: &str, msg: impl Into<String>) -> ConfigError {
        if let Some(e) = self.entry(section, key) {
            ConfigError::at(e.line, e.col, msg)
        } else if let Some(&l) = self.header_line.get(section) {
            ConfigError::at(l, 1, msg)
        } else {
            ConfigError::global(msg)
        }
    }

    /// Copy with `section.key` replaced by `raw` (used by sweeps).
    pub fn with_value(&self, section: &str, key: &str, raw: &str) -> Self {
        let mut d = self.clone();
        let at = self.entry("sweep", "values").map_or((0, 0), |e| (e.line, e.col));
        d.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), Entry { raw: raw.to_string(), line: at.0, col: at.1 });
        d
    }

    pub fn resolve_path(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Topology selected by `[converter] mode`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Rectifier,
    Inverter,
    DcDcPhase,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Rectifier => "rectifier",
            Mode::Inverter => "inverter",
            Mode::DcDcPhase => "dc-dc-phase",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmChoice {
    Dpwm,
    Smoothing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub cm: CmChoice,
    /// Smoothing window as a fraction of the AC amplitude.
    pub v_var: f64,
    pub bw_divider: f64,
    pub bw_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub periods: f64,
    pub steps_per_period: u32,
    pub kpi_periods: usize,
    pub load_l: f64,
    pub duty: f64,
    pub r_load: f64,
    pub switching_periods: u32,
}

/// KPI limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Requirement {
    pub name: &'static str,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationConfig {
    pub schemes: Vec<Scheme>,
    pub design_scheme: Scheme,
    pub cm_margin: f64,
    pub samples_per_period: usize,
    pub include_cap_current: bool,
    pub i_o: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeConfig {
    pub l_set: Vec<f64>,
    pub v_dc_min: f64,
    pub v_dc_max: f64,
    pub v_dc_points: usize,
    pub efficiency: bool,
}

impl EnvelopeConfig {
    pub fn v_dc_grid(&self) -> Vec<f64> {
        let n = self.v_dc_points;
        (0..n)
            .map(|j| self.v_dc_min + (self.v_dc_max - self.v_dc_min) * j as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoreSource {
    Builtin,
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignConfig {
    pub cores: CoreSource,
    pub l_target: f64,
    pub turns: (u32, u32),
    pub strands: Vec<u32>,
    pub strand_diameter: f64,
    pub layers: u32,
    pub fill: f64,
    pub j_max: f64,
    pub p_loss_max: f64,
    pub steinmetz_only: bool,
    pub random_designs: usize,
    pub cap_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalConfig {
    pub p_tot_hb: f64,
    pub split: f64,
    pub n_par: u32,
    pub n_hb: u32,
    pub p_pd: Option<f64>,
    pub r_jc: f64,
    pub r_ca_min: f64,
    pub t_amb_open: f64,
    pub t_j_max_device: f64,
    pub r_chs_pd: Option<f64>,
    pub n_vias: u32,
    pub t_amb: f64,
    pub t_j_max: f64,
    pub cspi: f64,
    pub v2: f64,
    pub n_fans: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalorimetricConfig {
    pub spec: ibb_core::design::CalorimetricSpec,
    pub l_br: f64,
    pub w_br: f64,
}

/// Loss map selection.
#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    Gan600,
    Sic900,
    Lossless,
    Csv(PathBuf),
}

/// One swept key.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub section: String,
    pub key: String,
    pub unit: Unit,
    pub raw_values: Vec<String>,
    pub values: Vec<f64>,
}

/// Keys a sweep may vary.
pub const SWEEPABLE: &[&str] = &[
    "operating.v_dc",
    "operating.v_ac_hat",
    "operating.p_out",
    "operating.f_o",
    "operating.f_s",
    "params.l_bb",
    "params.c_ac",
    "params.c_dc",
    "params.l_f",
    "params.r_load_dc",
    "params.r_ds_on",
    "params.dead_time",
    "controller.v_var",
    "simulation.duty",
    "simulation.r_load",
];

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub op: OperatingPoint,
    pub params: ConverterParams,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
    pub requirements: Vec<Requirement>,
    pub modulation: ModulationConfig,
    pub losses: Option<MapSource>,
    pub envelope: EnvelopeConfig,
    pub design: DesignConfig,
    pub thermal: ThermalConfig,
    pub calorimetric: CalorimetricConfig,
    pub sweep: Option<Sweep>,
    pub out_dir: Option<PathBuf>,
}

fn to_u32(doc: &Document, section: &str, key: &str, v: u64) -> Result<u32, ConfigError> {
    u32::try_from(v).map_err(|_| doc.error_at(section, key, format!("`{key}` = {v} is too large")))
}

impl RunConfig {
    /// Resolves `doc` onto the preset of its mode.
    pub fn from_document(doc: &Document) -> Result<Self, ConfigError> {
        let mode = match doc.text("converter", "mode").as_deref() {
            None | Some("rectifier") => Mode::Rectifier,
            Some("inverter") => Mode::Inverter,
            Some(_) => Mode::DcDcPhase,
        };
        let (mut op, mut params) = match mode {
            Mode::Inverter => (OperatingPoint::inverter(80.0), ConverterParams::inverter()),
            _ => (OperatingPoint::rectifier(), ConverterParams::rectifier()),
        };
        let q = |s: &str, key: &str| doc.quantity(s, key);
        let set = |slot: &mut f64, s: &str, key: &str| -> Result<(), ConfigError> {
            if let Some(v) = doc.quantity(s, key)? {
                *slot = v;
            }
            Ok(())
        };
        let set_u32 = |slot: &mut u32, s: &str, key: &str| -> Result<(), ConfigError> {
            if let Some(v) = doc.integer(s, key)? {
                *slot = to_u32(doc, s, key, v)?;
            }
            Ok(())
        };

        set(&mut op.v_dc, "operating", "v_dc")?;
        if doc.entry("operating", "v_ac_hat").is_some() && doc.entry("operating", "v_ac_rms").is_some() {
            return Err(doc.error_at("operating", "v_ac_rms", "set either v_ac_hat or v_ac_rms, not both"));
        }
        set(&mut op.v_ac_hat, "operating", "v_ac_hat")?;
        if let Some(v) = q("operating", "v_ac_rms")? {
            op.v_ac_hat = v * 2f64.sqrt();
        }
        set(&mut op.p_out, "operating", "p_out")?;
        set(&mut op.f_o, "operating", "f_o")?;
        set(&mut op.f_s, "operating", "f_s")?;
        set(&mut op.f_s_max, "operating", "f_s_max")?;
        op.validate().map_err(|e| doc.error_at("operating", "f_s", e.to_string()))?;

        for (slot, key) in [
            (&mut params.l_bb, "l_bb"),
            (&mut params.c_ac, "c_ac"),
            (&mut params.c_dc, "c_dc"),
            (&mut params.l_f, "l_f"),
            (&mut params.r_load_dc, "r_load_dc"),
            (&mut params.c_oss, "c_oss"),
            (&mut params.r_ds_on, "r_ds_on"),
            (&mut params.dead_time, "dead_time"),
        ] {
            set(slot, "params", key)?;
        }
        set_u32(&mut params.n_par, "params", "n_par")?;
        set_u32(&mut params.n_hb, "params", "n_hb")?;
        params.validate().map_err(|e| doc.error_at("params", "l_bb", e.to_string()))?;

        let controller = ControllerConfig {
            cm: match doc.text("controller", "cm").as_deref() {
                Some("dpwm") => CmChoice::Dpwm,
                _ => CmChoice::Smoothing,
            },
            v_var: q("controller", "v_var")?.unwrap_or(ibb_sim::scenario::DEFAULT_V_VAR_FRACTION),
            bw_divider: q("controller", "bw_divider")?.unwrap_or(ibb_sim::scenario::RECTIFIER_BW_DIVIDER),
            bw_ratio: q("controller", "bw_ratio")?.unwrap_or(4.0),
        };
        if !(controller.v_var > 0.0 && controller.v_var < 1.0) {
            return Err(doc.error_at("controller", "v_var", "v_var must lie in (0, 1)"));
        }
        if !(controller.bw_divider >= 2.0) {
            return Err(doc.error_at("controller", "bw_divider", "bw_divider must be >= 2"));
        }
        if !(controller.bw_ratio >= 4.0) {
            return Err(doc.error_at("controller", "bw_ratio", "bw_ratio must be >= 4"));
        }

        let mut sim = SimConfig {
            periods: 10.0,
            steps_per_period: ibb_sim::scenario::DEFAULT_STEPS_PER_PERIOD,
            kpi_periods: 3,
            load_l: ibb_sim::scenario::INVERTER_LOAD_L,
            duty: 0.376,
            r_load: 50.0,
            switching_periods: 300,
        };
        set(&mut sim.periods, "simulation", "periods")?;
        set_u32(&mut sim.steps_per_period, "simulation", "steps_per_period")?;
        if let Some(v) = doc.integer("simulation", "kpi_periods")? {
            sim.kpi_periods = v as usize;
        }
        set(&mut sim.load_l, "simulation", "load_l")?;
        set(&mut sim.duty, "simulation", "duty")?;
        set(&mut sim.r_load, "simulation", "r_load")?;
        set_u32(&mut sim.switching_periods, "simulation", "switching_periods")?;
        if sim.steps_per_period < 200 {
            return Err(doc.error_at("simulation", "steps_per_period", "steps_per_period must be >= 200"));
        }
        if sim.kpi_periods == 0 || sim.kpi_periods as f64 > sim.periods {
            return Err(doc.error_at("simulation", "kpi_periods", "kpi_periods must lie in [1, periods]"));
        }
        if !(sim.duty > 0.0 && sim.duty < 1.0) {
            return Err(doc.error_at("simulation", "duty", "duty must lie in (0, 1)"));
        }
        if sim.switching_periods < 4 {
            return Err(doc.error_at("simulation", "switching_periods", "switching_periods must be >= 4"));
        }

        let mut requirements = Vec::new();
        for spec in section_spec("requirements").expect("schema").keys {
            if let Some(limit) = q("requirements", spec.key)? {
                requirements.push(Requirement { name: spec.key, limit });
            }
        }

        let schemes = match doc.texts("modulation", "schemes") {
            Some(list) => list.iter().map(|s| Scheme::parse(s).expect("checked at parse")).collect(),
            None => Scheme::ALL.to_vec(),
        };
        let mut dedup = schemes.clone();
        dedup.sort();
        dedup.dedup();
        if dedup.len() != schemes.len() {
            return Err(doc.error_at("modulation", "schemes", "schemes must not repeat"));
        }
        let modulation = ModulationConfig {
            schemes,
            design_scheme: doc.text("modulation", "scheme").and_then(|s| Scheme::parse(&s)).unwrap_or(Scheme::Dpwm),
            cm_margin: q("modulation", "cm_margin")?.unwrap_or(0.1),
            samples_per_period: doc.integer("modulation", "samples_per_period")?.unwrap_or(20_000) as usize,
            include_cap_current: doc.boolean("modulation", "include_cap_current")?.unwrap_or(false),
            i_o: q("modulation", "i_o")?,
        };
        if modulation.samples_per_period < 16 {
            return Err(doc.error_at("modulation", "samples_per_period", "samples_per_period must be >= 16"));
        }

        let losses = doc.text("losses", "map").map(|m| match m.to_ascii_lowercase().as_str() {
            "gan600" => MapSource::Gan600,
            "sic900" => MapSource::Sic900,
            "lossless" => MapSource::Lossless,
            _ => MapSource::Csv(doc.resolve_path(&m)),
        });

        let envelope = EnvelopeConfig {
            l_set: doc.quantities("envelope", "l_set")?.unwrap_or_else(|| vec![8e-6, 10e-6, 12e-6, 14e-6]),
            v_dc_min: q("envelope", "v_dc_min")?.unwrap_or(80.0),
            v_dc_max: q("envelope", "v_dc_max")?.unwrap_or(240.0),
            v_dc_points: doc.integer("envelope", "v_dc_points")?.unwrap_or(17) as usize,
            efficiency: doc.boolean("efficiency", "enabled")?.unwrap_or(false),
        };
        if envelope.v_dc_points < 2 {
            return Err(doc.error_at("envelope", "v_dc_points", "v_dc_points must be >= 2"));
        }
        if !(envelope.v_dc_min > 0.0 && envelope.v_dc_max > envelope.v_dc_min) {
            return Err(doc.error_at("envelope", "v_dc_max", "need 0 < v_dc_min < v_dc_max"));
        }
        if envelope.l_set.iter().any(|&l| !(l > 0.0)) {
            return Err(doc.error_at("envelope", "l_set", "inductances must be > 0"));
        }

        let reference = ibb_core::design::InductorDesign::reference_10uh();
        let mut design = DesignConfig {
            cores: match doc.text("design", "cores") {
                Some(s) if s.eq_ignore_ascii_case("builtin") => CoreSource::Builtin,
                Some(s) => CoreSource::Csv(doc.resolve_path(&s)),
                None => CoreSource::Builtin,
            },
            l_target: q("design", "l_target")?.unwrap_or(10e-6),
            turns: (4, 16),
            strands: doc
                .integers("design", "strands")?
                .map(|v| v.into_iter().map(|x| x as u32).collect())
                .unwrap_or_else(|| vec![100, 200, 300, 400]),
            strand_diameter: q("design", "strand_diameter")?.unwrap_or(reference.strand_diameter),
            layers: reference.layers,
            fill: q("design", "fill")?.unwrap_or(reference.fill),
            j_max: q("design", "j_max")?.unwrap_or(reference.j_max),
            p_loss_max: q("design", "p_loss_max")?.unwrap_or(reference.p_loss_max),
            steinmetz_only: doc.text("design", "model").as_deref() == Some("steinmetz"),
            random_designs: doc.integer("design", "random_designs")?.unwrap_or(0) as usize,
            cap_fraction: q("design", "cap_fraction")?.unwrap_or(0.2),
        };
        set_u32(&mut design.turns.0, "design", "turns_min")?;
        set_u32(&mut design.turns.1, "design", "turns_max")?;
        set_u32(&mut design.layers, "design", "layers")?;
        if design.turns.0 == 0 || design.turns.1 < design.turns.0 {
            return Err(doc.error_at("design", "turns_max", "need 1 <= turns_min <= turns_max"));
        }
        if design.strands.is_empty() || design.strands.contains(&0) {
            return Err(doc.error_at("design", "strands", "strand counts must be >= 1"));
        }

        let mut thermal = ThermalConfig {
            p_tot_hb: 9.5,
            split: 0.65,
            n_par: 2,
            n_hb: 4,
            p_pd: q("thermal", "p_pd")?,
            r_jc: 1.0,
            r_ca_min: 64.0,
            t_amb_open: 25.0,
            t_j_max_device: 150.0,
            r_chs_pd: q("thermal", "r_chs_pd")?,
            n_vias: 36,
            t_amb: 40.0,
            t_j_max: 120.0,
            cspi: 22.37,
            v2: 0.01,
            n_fans: 8,
        };
        for (slot, key) in [
            (&mut thermal.p_tot_hb, "p_tot_hb"),
            (&mut thermal.split, "split"),
            (&mut thermal.r_jc, "r_jc"),
            (&mut thermal.r_ca_min, "r_ca_min"),
            (&mut thermal.t_amb_open, "t_amb_open"),
            (&mut thermal.t_j_max_device, "t_j_max_device"),
            (&mut thermal.t_amb, "t_amb"),
            (&mut thermal.t_j_max, "t_j_max"),
            (&mut thermal.cspi, "cspi"),
            (&mut thermal.v2, "v2"),
        ] {
            set(slot, "thermal", key)?;
        }
        set_u32(&mut thermal.n_par, "thermal", "n_par")?;
        set_u32(&mut thermal.n_hb, "thermal", "n_hb")?;
        set_u32(&mut thermal.n_vias, "thermal", "n_vias")?;
        set_u32(&mut thermal.n_fans, "thermal", "n_fans")?;

        let mut cal = CalorimetricConfig {
            spec: ibb_core::design::CalorimetricSpec::reference(),
            l_br: 0.06,
            w_br: 0.05,
        };
        let s = &mut cal.spec;
        for (slot, key) in [
            (&mut s.v_dc_max, "v_dc_max"),
            (&mut s.r_ds_on, "r_ds_on"),
            (&mut s.i_ss_hat, "i_ss_hat"),
            (&mut s.i_hs_hat, "i_hs_hat"),
            (&mut s.e_ss_hat, "e_ss_hat"),
            (&mut s.e_hs_hat, "e_hs_hat"),
            (&mut s.r_jc_pd, "r_jc_pd"),
            (&mut s.r_chs_pd, "r_chs_pd"),
            (&mut s.t_amb, "t_amb"),
            (&mut s.t_j_max, "t_j_max"),
            (&mut s.t_br_min, "t_br_min"),
            (&mut s.t_br_max, "t_br_max"),
            (&mut s.t_min, "t_min"),
            (&mut s.s_rho, "s_rho"),
            (&mut s.via.l_via, "l_via"),
            (&mut s.via.k_cu, "k_cu"),
            (&mut s.via.k_s, "k_s"),
            (&mut s.via.r_out, "r_out"),
            (&mut s.via.r_in, "r_in"),
            (&mut s.via.d_pad, "d_pad"),
            (&mut s.via.lambda_pad, "lambda_pad"),
            (&mut s.via.a_pad, "a_pad"),
        ] {
            set(slot, "calorimetric", key)?;
        }
        set_u32(&mut s.n_par, "calorimetric", "n_par")?;
        set_u32(&mut s.n_hb, "calorimetric", "n_hb")?;
        set_u32(&mut s.via.n_vias, "calorimetric", "n_vias")?;
        set(&mut cal.l_br, "calorimetric", "l_br")?;
        set(&mut cal.w_br, "calorimetric", "w_br")?;

        let sweep = match (doc.text("sweep", "parameter"), doc.entry("sweep", "values")) {
            (None, None) => None,
            (Some(p), Some(e)) => {
                if !SWEEPABLE.contains(&p.as_str()) {
                    return Err(doc.error_at("sweep", "parameter", format!("`{p}` cannot be swept; use one of {}", SWEEPABLE.join(", "))));
                }
                let (section, key) = p.split_once('.').expect("sweepable names contain a dot");
                let unit = Document::unit_of(section, key);
                let raw_values: Vec<String> = split_list(&e.raw).into_iter().map(String::from).collect();
                let values = raw_values
                    .iter()
                    .map(|v| parse_quantity(v, unit))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|m| ConfigError::at(e.line, e.col, format!("key `values`: {m}")))?;
                Some(Sweep { section: section.into(), key: key.into(), unit, raw_values, values })
            }
            (Some(_), None) => return Err(doc.error_at("sweep", "parameter", "sweep needs `values`")),
            (None, Some(_)) => return Err(doc.error_at("sweep", "values", "sweep needs `parameter`")),
        };

        Ok(RunConfig {
            mode,
            op,
            params,
            controller,
            sim,
            requirements,
            modulation,
            losses,
            envelope,
            design,
            thermal,
            calorimetric: cal,
            sweep,
            out_dir: doc.text("output", "dir").map(|d| doc.resolve_path(&d)),
        })
    }
}

/// Markdown reference of [`SCHEMA`].
pub fn schema_markdown() -> String {
    let mut s = String::from(
        "# Configuration schema\n\n\
         UTF-8 text with `[section]` headers and `key = value` lines. `#` and `;` start comments.\n\
         Quantities take a metric prefix (p n u m k M G) and the unit shown, e.g. `75uH`, `140kHz`,\n\
         `30 mOhm`; a bare number is read in the base unit. Dimensionless values accept `%`.\n\
         Lists are comma-separated. Unknown sections or keys are rejected with their line and column.\n\
         Unset keys take the preset of `[converter] mode`.\n",
    );
    for sec in SCHEMA {
        s.push_str(&format!("\n## [{}]\n\n{}\n\n| key | type | meaning |\n|---|---|---|\n", sec.name, sec.doc));
        for k in sec.keys {
            s.push_str(&format!("| `{}` | {} | {} |\n", k.key, k.kind.describe(), k.doc));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_suffixes() {
        let d = Document::parse("# c\n[operating]\nf_s = 140kHz ; trailing\n[params]\nl_bb = 75uH\n").unwrap();
        assert_eq!(d.quantity("operating", "f_s").unwrap(), Some(140e3));
        assert_eq!(d.quantity("params", "l_bb").unwrap(), Some(75e-6));
        let c = RunConfig::from_document(&d).unwrap();
        assert_eq!(c.params.l_bb, 75e-6);
        assert_eq!(c.op.v_dc, 270.0);
    }

    #[test]
    fn unknown_key_reports_location() {
        let e = Document::parse("[params]\n  l_bq = 75uH\n").unwrap_err();
        assert_eq!(e.at, Some((2, 3)));
        assert!(e.msg.contains("l_bq"));
        let e = Document::parse("[nope]\n").unwrap_err();
        assert_eq!(e.at, Some((1, 2)));
        let e = Document::parse("[params]\nl_bb = 75uF\n").unwrap_err();
        assert_eq!(e.at, Some((2, 8)));
    }

    #[test]
    fn rejects_structural_errors() {
        assert!(Document::parse("l_bb = 1\n").is_err());
        assert!(Document::parse("[params]\nl_bb\n").is_err());
        assert!(Document::parse("[params]\nl_bb = 1uH\nl_bb = 2uH\n").is_err());
        assert!(Document::parse("[params\n").is_err());
        assert!(Document::parse("[converter]\nmode = boost\n").is_err());
    }

    #[test]
    fn sweep_values_take_the_swept_unit() {
        let d = Document::parse("[sweep]\nparameter = operating.v_dc\nvalues = 80V, 0.16kV\n").unwrap();
        let c = RunConfig::from_document(&d).unwrap();
        assert_eq!(c.sweep.unwrap().values, vec![80.0, 160.0]);
        let d = Document::parse("[sweep]\nparameter = operating.v_dc\nvalues = 80V, 3uH\n").unwrap();
        assert!(RunConfig::from_document(&d).unwrap_err().at.is_some());
    }

    #[test]
    fn shipped_schema_doc_is_current() {
        let shipped = include_str!("../SCHEMA.md");
        assert_eq!(shipped, schema_markdown(), "regenerate SCHEMA.md from config::schema_markdown");
    }
}
