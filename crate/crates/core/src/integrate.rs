//! Explicit Runge–Kutta integration over flat real vectors.
//!
//! Two methods: classical fixed-step RK4 and the embedded Dormand–Prince
//! 5(4) pair with adaptive step control. Both land exactly on every
//! requested sample time by shortening the step that would overshoot it,
//! so no interpolation is involved. Complex-valued states are handled by
//! the callers, which interleave real and imaginary parts.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};

/// Right-hand side of `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Hook run after every accepted step. It may repair `y` in place (and
    /// must then return `Ok(true)`) or abort the integration.
    fn after_step(&self, _t: f64, _y: &mut [f64]) -> Result<bool> {
        Ok(false)
    }
}

impl<F> OdeSystem for F
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        self(t, y, dy)
    }
}

#[derive(Clone, Debug)]
pub struct OdeProblem<S> {
    pub system: S,
    pub t0: f64,
    pub t1: f64,
    pub y0: Vec<f64>,
}

impl<S: OdeSystem> OdeProblem<S> {
    pub fn new(system: S, t0: f64, t1: f64, y0: Vec<f64>) -> Result<Self> {
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::InvalidParameter { name: "t1", reason: "must be finite and exceed t0" });
        }
        if y0.is_empty() {
            return Err(Error::InvalidParameter { name: "y0", reason: "empty state" });
        }
        Ok(Self { system, t0, t1, y0 })
    }

    pub fn dimension(&self) -> usize {
        self.y0.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct IntegratorConfig {
    pub method: Method,
    /// Step for [`Method::Rk4Fixed`]; also caps the first trial step of the adaptive method.
    pub step: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { method: Method::Rk45Adaptive, step: 1e-3, rtol: 1e-9, atol: 1e-12, max_steps: 5_000_000 }
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        Self { method: Method::Rk4Fixed, step, ..Self::default() }
    }

    pub fn rk45(rtol: f64, atol: f64) -> Self {
        Self { method: Method::Rk45Adaptive, rtol, atol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter { name: "step", reason: "must be positive" });
        }
        if !(self.rtol > 0.0) {
            return Err(Error::InvalidParameter { name: "rtol", reason: "must be positive" });
        }
        if !(self.atol > 0.0) {
            return Err(Error::InvalidParameter { name: "atol", reason: "must be positive" });
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter { name: "max_steps", reason: "must be positive" });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntegrationStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    /// Largest scaled local error estimate among accepted adaptive steps (`<= 1`).
    pub max_accepted_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().copied().zip(self.states.iter().map(Vec::as_slice))
    }
}

/// `count` evenly spaced times covering `[t0, t1]` inclusive.
pub fn linspace(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![t1],
        _ => {
            let h = (t1 - t0) / (count - 1) as f64;
            let mut v: Vec<f64> = (0..count).map(|i| t0 + h * i as f64).collect();
            v[count - 1] = t1;
            v
        }
    }
}

/// Integrates `problem`, returning the state at each of `sample_times`
/// (ascending, within `[t0, t1]`). An empty sample list samples `t1` only.
pub fn integrate<S: OdeSystem>(
    problem: &OdeProblem<S>,
    config: &IntegratorConfig,
    sample_times: &[f64],
) -> Result<Trajectory> {
    config.validate()?;
    let fallback = [problem.t1];
    let samples = if sample_times.is_empty() { &fallback[..] } else { sample_times };
    let span_tol = 1e-12 * problem.t1.abs().max(1.0);
    for (i, &t) in samples.iter().enumerate() {
        if !(t >= problem.t0 - span_tol && t <= problem.t1 + span_tol) {
            return Err(Error::InvalidParameter { name: "sample_times", reason: "sample outside [t0, t1]" });
        }
        if i > 0 && !(t > samples[i - 1]) {
            return Err(Error::InvalidParameter { name: "sample_times", reason: "must be strictly increasing" });
        }
    }
    let mut driver = Driver::new(problem, config);
    let mut times = Vec::with_capacity(samples.len());
    let mut states = Vec::with_capacity(samples.len());
    for &target in samples {
        driver.advance_to(target)?;
        times.push(target);
        states.push(driver.y.clone());
    }
    Ok(Trajectory { times, states, stats: driver.stats })
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order minus embedded 4th-order weights
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

struct Driver<'a, S> {
    problem: &'a OdeProblem<S>,
    config: &'a IntegratorConfig,
    t: f64,
    y: Vec<f64>,
    /// Adaptive step proposal carried between calls.
    h: f64,
    /// Derivative at `(t, y)` when still valid (first-same-as-last reuse).
    k_first: Option<Vec<f64>>,
    stats: IntegrationStats,
    steps: usize,
}

impl<'a, S: OdeSystem> Driver<'a, S> {
    fn new(problem: &'a OdeProblem<S>, config: &'a IntegratorConfig) -> Self {
        Self {
            problem,
            config,
            t: problem.t0,
            y: problem.y0.clone(),
            h: 0.0,
            k_first: None,
            stats: IntegrationStats::default(),
            steps: 0,
        }
    }

    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self.problem.system.rhs(t, y, dy);
        self.stats.rhs_evaluations += 1;
        match dy.iter().position(|v| !v.is_finite()) {
            Some(component) => Err(Error::NonFinite { t, component }),
            None => Ok(()),
        }
    }

    fn advance_to(&mut self, target: f64) -> Result<()> {
        let snap = 1e-12 * target.abs().max(1.0);
        if target - self.t <= snap {
            return Ok(());
        }
        match self.config.method {
            Method::Rk4Fixed => self.rk4_to(target, snap),
            Method::Rk45Adaptive => self.dopri_to(target, snap),
        }
    }

    fn count_step(&mut self) -> Result<()> {
        self.steps += 1;
        if self.steps > self.config.max_steps {
            return Err(Error::StepLimit { t: self.t, max_steps: self.config.max_steps });
        }
        Ok(())
    }

    fn finish_step(&mut self, t_new: f64, y_new: Vec<f64>, k_last: Option<Vec<f64>>) -> Result<()> {
        self.t = t_new;
        self.y = y_new;
        self.stats.accepted_steps += 1;
        let modified = self.problem.system.after_step(self.t, &mut self.y)?;
        self.k_first = if modified { None } else { k_last };
        Ok(())
    }

    fn rk4_to(&mut self, target: f64, snap: f64) -> Result<()> {
        let n = self.y.len();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        while target - self.t > snap {
            self.count_step()?;
            let mut h = self.config.step;
            if self.t + h >= target - snap {
                h = target - self.t;
            }
            let (t, y) = (self.t, self.y.clone());
            self.eval(t, &y, &mut k1)?;
            axpy_into(&mut tmp, &y, 0.5 * h, &k1);
            self.eval(t + 0.5 * h, &tmp, &mut k2)?;
            axpy_into(&mut tmp, &y, 0.5 * h, &k2);
            self.eval(t + 0.5 * h, &tmp, &mut k3)?;
            axpy_into(&mut tmp, &y, h, &k3);
            self.eval(t + h, &tmp, &mut k4)?;
            let y_new: Vec<f64> =
                (0..n).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
            let t_new = if h == target - t { target } else { t + h };
            self.finish_step(t_new, y_new, None)?;
        }
        Ok(())
    }

    fn initial_step(&mut self, k0: &[f64]) -> Result<f64> {
        // Hairer–Nørsett–Wanner starting-step heuristic.
        let (rtol, atol) = (self.config.rtol, self.config.atol);
        let scale: Vec<f64> = self.y.iter().map(|v| atol + rtol * v.abs()).collect();
        let d0 = rms_scaled(&self.y, &scale);
        let d1 = rms_scaled(k0, &scale);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(self.problem.t1 - self.problem.t0);
        let y1: Vec<f64> = self.y.iter().zip(k0).map(|(y, k)| y + h0 * k).collect();
        let mut k1 = vec![0.0; self.y.len()];
        self.eval(self.t + h0, &y1, &mut k1)?;
        let diff: Vec<f64> = k1.iter().zip(k0).map(|(a, b)| a - b).collect();
        let d2 = rms_scaled(&diff, &scale) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { Float::powf(0.01 / d1.max(d2), 0.2) };
        Ok((100.0 * h0).min(h1).min(self.config.step.max(h0)))
    }

    fn dopri_to(&mut self, target: f64, snap: f64) -> Result<()> {
        let n = self.y.len();
        let mut k: [Vec<f64>; 7] = core::array::from_fn(|_| vec![0.0; n]);
        let mut stage = vec![0.0; n];
        let (rtol, atol) = (self.config.rtol, self.config.atol);

        while target - self.t > snap {
            self.count_step()?;
            match self.k_first.take() {
                Some(k0) => k[0] = k0,
                None => {
                    let (t, y) = (self.t, self.y.clone());
                    self.eval(t, &y, &mut k[0])?;
                }
            }
            if self.h == 0.0 {
                let k0 = k[0].clone();
                self.h = self.initial_step(&k0)?;
            }

            let mut last_rejected = false;
            loop {
                let mut h = self.h;
                let hits_target = self.t + h >= target - snap;
                if hits_target {
                    h = target - self.t;
                }
                if h < 1e-14 * self.t.abs().max(1.0) {
                    return Err(Error::StepSizeUnderflow { t: self.t, step: h });
                }
                for s in 1..7 {
                    stage.copy_from_slice(&self.y);
                    for (j, kj) in k.iter().enumerate().take(s) {
                        let a = A[s][j];
                        if a != 0.0 {
                            for (st, kv) in stage.iter_mut().zip(kj) {
                                *st += h * a * kv;
                            }
                        }
                    }
                    let ts = self.t + C[s] * h;
                    self.problem.system.rhs(ts, &stage, &mut k[s]);
                    self.stats.rhs_evaluations += 1;
                    // the last stage sits at the candidate solution and is checked on acceptance
                    if s < 6 {
                        if let Some(component) = k[s].iter().position(|v| !v.is_finite()) {
                            return Err(Error::NonFinite { t: ts, component });
                        }
                    }
                }
                // `stage` now holds the 5th-order solution (row 7 of A = b).
                let mut acc = 0.0;
                for i in 0..n {
                    let err: f64 = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
                    let sc = atol + rtol * self.y[i].abs().max(stage[i].abs());
                    acc += (err / sc) * (err / sc);
                }
                let err_norm = Float::sqrt(acc / n as f64);
                if !err_norm.is_finite() {
                    if let Some(component) = k[6].iter().position(|v| !v.is_finite()) {
                        return Err(Error::NonFinite { t: self.t + h, component });
                    }
                }

                if err_norm <= 1.0 {
                    let factor = if err_norm == 0.0 {
                        MAX_FACTOR
                    } else {
                        (SAFETY * Float::powf(err_norm, -0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                    };
                    let factor = if last_rejected { factor.min(1.0) } else { factor };
                    if !(hits_target && h < self.h) {
                        self.h = h * factor;
                    }
                    if let Some(component) = k[6].iter().position(|v| !v.is_finite()) {
                        return Err(Error::NonFinite { t: self.t + h, component });
                    }
                    self.stats.max_accepted_error = self.stats.max_accepted_error.max(err_norm);
                    let t_new = if hits_target { target } else { self.t + h };
                    let y_new = stage.clone();
                    let k_last = k[6].clone();
                    self.finish_step(t_new, y_new, Some(k_last))?;
                    break;
                }
                self.stats.rejected_steps += 1;
                last_rejected = true;
                let factor = (SAFETY * Float::powf(err_norm, -0.2)).clamp(MIN_FACTOR, 1.0);
                self.h = h * factor;
                self.count_step()?;
            }
        }
        Ok(())
    }
}

fn axpy_into(out: &mut [f64], y: &[f64], a: f64, x: &[f64]) {
    for ((o, &yv), &xv) in out.iter_mut().zip(y).zip(x) {
        *o = yv + a * xv;
    }
}

fn rms_scaled(v: &[f64], scale: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(scale).map(|(a, s)| (a / s) * (a / s)).sum();
    Float::sqrt(s / v.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn decay(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = -y[0];
    }

    fn oscillator(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    #[test]
    fn exponential_decay_adaptive() {
        let p = OdeProblem::new(decay, 0.0, 1.0, vec![1.0]).unwrap();
        let cfg = IntegratorConfig::rk45(1e-10, 1e-12);
        let tr = integrate(&p, &cfg, &[1.0]).unwrap();
        assert!((tr.states[0][0] - (-1.0f64).exp()).abs() <= 1e-9);
        assert!(tr.stats.max_accepted_error <= 1.0);
    }

    #[test]
    fn zero_field_is_exactly_constant() {
        let zero = |_t: f64, _y: &[f64], dy: &mut [f64]| dy.fill(0.0);
        let p = OdeProblem::new(zero, 0.0, 3.0, vec![0.25, -7.5]).unwrap();
        for cfg in [IntegratorConfig::default(), IntegratorConfig::rk4(0.1)] {
            let tr = integrate(&p, &cfg, &linspace(0.0, 3.0, 7)).unwrap();
            assert!(tr.states.iter().all(|s| s == &[0.25, -7.5]));
        }
    }

    #[test]
    fn harmonic_oscillator_full_period() {
        let p = OdeProblem::new(oscillator, 0.0, 2.0 * PI, vec![1.0, 0.0]).unwrap();
        let samples = linspace(0.0, 2.0 * PI, 9);
        let tr = integrate(&p, &IntegratorConfig::default(), &samples).unwrap();
        for (t, y) in tr.iter() {
            assert!((y[0] - t.cos()).abs() <= 1e-7, "t = {t}");
            assert!((y[1] + t.sin()).abs() <= 1e-7, "t = {t}");
        }
        let last = tr.states.last().unwrap();
        assert!((last[0] - 1.0).abs() <= 1e-7 && last[1].abs() <= 1e-7);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |h: f64| {
            let p = OdeProblem::new(decay, 0.0, 1.0, vec![1.0]).unwrap();
            let tr = integrate(&p, &IntegratorConfig::rk4(h), &[1.0]).unwrap();
            (tr.states[0][0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
        let ratio = err(0.05) / err(0.025);
        assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn samples_land_exactly() {
        let p = OdeProblem::new(decay, 0.0, 2.0, vec![1.0]).unwrap();
        let samples = [0.0, 0.3, 0.31, 1.7, 2.0];
        let tr = integrate(&p, &IntegratorConfig::default(), &samples).unwrap();
        assert_eq!(tr.times, samples);
        assert_eq!(tr.states[0], vec![1.0]);
        for (t, y) in tr.iter() {
            assert!((y[0] - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let p = OdeProblem::new(oscillator, 0.0, 10.0, vec![0.3, 0.8]).unwrap();
        let s = linspace(0.0, 10.0, 11);
        let a = integrate(&p, &IntegratorConfig::default(), &s).unwrap();
        let b = integrate(&p, &IntegratorConfig::default(), &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(OdeProblem::new(decay, 1.0, 1.0, vec![1.0]).is_err());
        let p = OdeProblem::new(decay, 0.0, 1.0, vec![1.0]).unwrap();
        assert!(integrate(&p, &IntegratorConfig::default(), &[0.5, 0.2]).is_err());
        assert!(integrate(&p, &IntegratorConfig::default(), &[1.5]).is_err());
        let bad = IntegratorConfig { rtol: 0.0, ..IntegratorConfig::default() };
        assert!(integrate(&p, &bad, &[1.0]).is_err());
    }

    #[test]
    fn step_limit_is_reported() {
        let p = OdeProblem::new(decay, 0.0, 1.0, vec![1.0]).unwrap();
        let cfg = IntegratorConfig { max_steps: 5, ..IntegratorConfig::rk4(0.01) };
        assert!(matches!(integrate(&p, &cfg, &[1.0]), Err(Error::StepLimit { .. })));
    }

    #[test]
    fn non_finite_derivative_is_reported() {
        let blowup = |t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = 0.0;
            dy[1] = if t > 0.5 { f64::NAN } else { y[1] };
        };
        let p = OdeProblem::new(blowup, 0.0, 1.0, vec![1.0, 1.0]).unwrap();
        for cfg in [IntegratorConfig::default(), IntegratorConfig::rk4(0.01)] {
            match integrate(&p, &cfg, &[1.0]) {
                Err(Error::NonFinite { t, component }) => {
                    assert_eq!(component, 1);
                    assert!(t > 0.5);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    struct Clamped;

    impl OdeSystem for Clamped {
        fn rhs(&self, _t: f64, _y: &[f64], dy: &mut [f64]) {
            dy[0] = 1.0;
        }

        fn after_step(&self, _t: f64, y: &mut [f64]) -> Result<bool> {
            if y[0] > 0.5 {
                y[0] = 0.5;
                return Ok(true);
            }
            Ok(false)
        }
    }

    #[test]
    fn projection_hook_runs_after_each_step() {
        let p = OdeProblem::new(Clamped, 0.0, 1.0, vec![0.0]).unwrap();
        let tr = integrate(&p, &IntegratorConfig::rk4(0.1), &[0.3, 1.0]).unwrap();
        assert!((tr.states[0][0] - 0.3).abs() < 1e-12);
        assert_eq!(tr.states[1][0], 0.5);
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 1.0, 11);
        assert_eq!(v.len(), 11);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[10], 1.0);
    }
}
