//! Steady-state indicators computed from a trace.

use crate::circuit::Trace;
use crate::error::{config, Result, SimError};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimKpis {
    /// Worst-phase AC current THD, harmonics 2..=50 (fraction).
    pub thd_i: f64,
    /// Worst-phase differential-mode capacitor voltage THD (fraction).
    pub thd_v_dm: f64,
    /// `P / sum(V_rms I_rms)` at the AC terminals.
    pub pf: f64,
    pub v_dc_mean: f64,
    /// Peak-to-peak over mean of the DC voltage.
    pub v_dc_ripple: f64,
    pub p_in: f64,
    pub p_out: f64,
    /// Component losses plus the change of stored energy over the window (W).
    pub p_loss: f64,
    /// Worst per-period energy-audit residue relative to the input energy.
    pub audit_residue: f64,
}

/// Fourier coefficient `(a, b)` of harmonic `h` of `x` sampled at spacing `dt`,
/// `x ~ a cos(h w t) + b sin(h w t)`, over a whole number of periods.
pub fn fourier(x: &[f64], dt: f64, t0: f64, f_o: f64, h: usize) -> (f64, f64) {
    let w = TAU * f_o * h as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for (n, v) in x.iter().enumerate() {
        let (s, c) = (w * (t0 + n as f64 * dt)).sin_cos();
        a += v * c;
        b += v * s;
    }
    let k = 2.0 / x.len() as f64;
    (a * k, b * k)
}

/// THD of `x` over a whole number of fundamental periods, harmonics 2..=50.
pub fn thd(x: &[f64], dt: f64, f_o: f64) -> f64 {
    let amp = |h| {
        let (a, b) = fourier(x, dt, 0.0, f_o, h);
        a * a + b * b
    };
    let fund = amp(1);
    if fund == 0.0 {
        return 0.0;
    }
    ((2..=50).map(amp).sum::<f64>() / fund).sqrt()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Three-phase power factor `mean(sum v i) / sum(V_rms I_rms)`.
pub fn power_factor(v: &[Vec<f64>; 3], i: &[Vec<f64>; 3]) -> f64 {
    let n = v[0].len();
    let p: f64 = (0..n).map(|j| (0..3).map(|k| v[k][j] * i[k][j]).sum::<f64>()).sum::<f64>() / n as f64;
    let s: f64 = (0..3).map(|k| rms(&v[k]) * rms(&i[k])).sum();
    if s == 0.0 {
        0.0
    } else {
        (p / s).clamp(0.0, 1.0)
    }
}

/// Peak-to-peak over mean.
pub fn ripple(x: &[f64]) -> f64 {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    (hi - lo) / mean.abs()
}

/// Ideal FFT band-pass of `x` to `[f_lo, f_hi]`.
pub fn band_pass(x: &[f64], dt: f64, f_lo: f64, f_hi: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dt);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * df;
        if f < f_lo || f > f_hi {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Energy `sum x^2 dt` of the band-passed signal restricted to `mask`.
pub fn masked_band_energy(x: &[f64], mask: &[bool], dt: f64, f_lo: f64, f_hi: f64) -> f64 {
    band_pass(x, dt, f_lo, f_hi)
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| v * v * dt)
        .sum()
}

/// Index range of the last `periods` fundamental periods of `trace`.
pub fn window(trace: &Trace, periods: usize) -> Result<std::ops::Range<usize>> {
    let f_o = trace.f_o.ok_or_else(|| config("trace has no fundamental frequency"))?;
    let per = 1.0 / (f_o * trace.dt);
    let want = (periods as f64 * per).round() as usize;
    let have = trace.samples.len().saturating_sub(1);
    if periods == 0 || want > have {
        return Err(SimError::Window { want: periods, have: have as f64 / per });
    }
    let end = trace.samples.len() - 1;
    Ok(end - want..end)
}

/// KPIs over the last `periods` fundamental periods.
pub fn trace_kpis(trace: &Trace, periods: usize) -> Result<SimKpis> {
    let r = window(trace, periods)?;
    let f_o = trace.f_o.unwrap_or_default();
    let s = &trace.samples[r.clone()];
    let col = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..s.len()).map(f).collect() };
    let i: [Vec<f64>; 3] = [0, 1, 2].map(|k| col(&|j| s[j].i_lf[k]));
    let e: [Vec<f64>; 3] = [0, 1, 2].map(|k| col(&|j| s[j].e[k]));
    let v_dm: [Vec<f64>; 3] = [0, 1, 2].map(|k| {
        col(&|j| s[j].v_c[k] - s[j].v_c.iter().sum::<f64>() / 3.0)
    });
    let v_dc = col(&|j| s[j].v_dc);
    let thd_i = i.iter().map(|x| thd(x, trace.dt, f_o)).fold(0.0, f64::max);
    let thd_v_dm = v_dm.iter().map(|x| thd(x, trace.dt, f_o)).fold(0.0, f64::max);
    let pf = match trace.mode {
        "inverter" => power_factor(&v_dm, &i.clone().map(|x| x.iter().map(|v| -v).collect())),
        _ => power_factor(&e, &i),
    };
    let (a, b) = (&trace.samples[r.start], &trace.samples[r.end]);
    let span = b.t - a.t;
    let p_in = (b.e_in - a.e_in) / span;
    let p_out = (b.e_out - a.e_out) / span;
    let p_loss = (b.e_loss - a.e_loss + b.e_stored - a.e_stored) / span;
    let per = ((r.end - r.start) / periods).max(1);
    let mut audit_residue: f64 = 0.0;
    for p in 0..periods {
        let (x, y) = (&trace.samples[r.start + p * per], &trace.samples[r.start + (p + 1) * per]);
        let e_in = y.e_in - x.e_in;
        let res = e_in - (y.e_out - x.e_out) - (y.e_loss - x.e_loss) - (y.e_stored - x.e_stored);
        audit_residue = audit_residue.max((res / e_in).abs());
    }
    let v_dc_mean = v_dc.iter().sum::<f64>() / v_dc.len() as f64;
    Ok(SimKpis {
        thd_i,
        thd_v_dm,
        pf,
        v_dc_mean,
        v_dc_ripple: ripple(&v_dc),
        p_in,
        p_out,
        p_loss,
        audit_residue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(f: impl Fn(f64) -> f64, n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| f(k as f64 * dt)).collect()
    }

    #[test]
    fn pure_sine_has_no_distortion() {
        let (f_o, n) = (400.0, 3 * 2000);
        let dt = 1.0 / (f_o * 2000.0);
        let x = signal(|t| 3.0 * (TAU * f_o * t + 0.3).cos(), n, dt);
        assert!(thd(&x, dt, f_o) < 1e-9);
        let v = [0, 1, 2].map(|k| signal(|t| (TAU * f_o * t - k as f64 * TAU / 3.0).cos(), n, dt));
        assert!((power_factor(&v, &v.clone()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fifth_harmonic_gives_its_ratio() {
        let (f_o, n) = (400.0, 4 * 1000);
        let dt = 1.0 / (f_o * 1000.0);
        let x = signal(|t| (TAU * f_o * t).sin() + 0.05 * (5.0 * TAU * f_o * t + 1.0).cos(), n, dt);
        assert!((thd(&x, dt, f_o) - 0.05).abs() < 1e-6);
    }

    #[test]
    fn displaced_current_gives_cosine_pf() {
        let (f_o, n) = (50.0, 1000);
        let dt = 1.0 / (f_o * n as f64);
        let v = [0, 1, 2].map(|k| signal(|t| (TAU * f_o * t - k as f64 * TAU / 3.0).cos(), n, dt));
        let i = [0, 1, 2].map(|k| signal(|t| (TAU * f_o * t - k as f64 * TAU / 3.0 - 0.5).cos(), n, dt));
        assert!((power_factor(&v, &i) - 0.5f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn band_pass_keeps_in_band_tone_only() {
        let n = 4096;
        let dt = 1e-6;
        let df = 1.0 / (n as f64 * dt);
        let x = signal(|t| (TAU * 10.0 * df * t).sin() + (TAU * 300.0 * df * t).sin(), n, dt);
        let y = band_pass(&x, dt, 100.0 * df, 500.0 * df);
        for (k, v) in y.iter().enumerate() {
            let want = (TAU * 300.0 * df * k as f64 * dt).sin();
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn ripple_is_peak_to_peak_over_mean() {
        assert!((ripple(&[9.0, 10.0, 11.0, 10.0]) - 0.2).abs() < 1e-15);
    }
}
