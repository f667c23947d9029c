//! Stochastic field synthesis and two-time correlation estimates.
//!
//! Fields are complex analytic signals ε(t) = A·p(t)·e^{-i(ω₀t + φ(t))} with
//! a piecewise-constant (or linearly drifting) random phase φ(t). Ensemble
//! averages ⟨ε(t′)ε*(t″)⟩ of the three source types:
//!
//! * CW with Poisson phase interruptions at rate 1/τ_d:
//!   A² e^{-iω₀(t′-t″)} e^{-|t′-t″|/τ_d} for t′, t″ ≥ t₀.
//! * Gaussian pulse p(t) = e^{-(t-t_m)²/τ_p²} whose carrier frequency is
//!   jittered by ν ~ N(0, 1/τ_d²):
//!   A² p(t′)p(t″) e^{-iω₀(t′-t″)} e^{-(t′-t″)²/(2τ_d²)}.
//! * White noise 𝓡δ(t′-t″), which is never sampled.

use std::f64::consts::TAU;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};

use crate::ensemble::{pairwise_reduce, realization_seed, rng_from_seed};
use crate::error::{Error, Result};
use crate::io::fmt_num;
use crate::model::C64;

/// Phase-diffusion CW source switched on abruptly at `turn_on`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwSource {
    pub carrier: f64,
    pub amplitude: f64,
    pub tau_d: f64,
    pub turn_on: f64,
}

/// Gaussian pulse with phase jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSource {
    pub carrier: f64,
    pub amplitude: f64,
    pub tau_d: f64,
    pub tau_p: f64,
    pub center: f64,
}

/// Delta-correlated source with pump power 𝓡 (rad²/fs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhiteNoiseSource {
    pub amplitude: f64,
    pub pump_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSpec {
    Cw(CwSource),
    Pulse(PulseSource),
    WhiteNoise(WhiteNoiseSource),
}

fn check_positive(what: &'static str, name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(
            what,
            format!("{name} must be positive, got {v}"),
        ));
    }
    Ok(())
}

fn check_amplitude(what: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::invalid(
            what,
            format!("amplitude must be >= 0, got {v}"),
        ));
    }
    Ok(())
}

impl FieldSpec {
    pub fn cw(carrier: f64, amplitude: f64, tau_d: f64, turn_on: f64) -> Result<Self> {
        check_amplitude("CW field", amplitude)?;
        check_positive("CW field", "tau_d", tau_d)?;
        if !(carrier.is_finite() && turn_on.is_finite()) {
            return Err(Error::invalid(
                "CW field",
                "carrier and turn-on must be finite",
            ));
        }
        Ok(FieldSpec::Cw(CwSource {
            carrier,
            amplitude,
            tau_d,
            turn_on,
        }))
    }

    pub fn pulse(
        carrier: f64,
        amplitude: f64,
        tau_d: f64,
        tau_p: f64,
        center: f64,
    ) -> Result<Self> {
        check_amplitude("pulse field", amplitude)?;
        check_positive("pulse field", "tau_d", tau_d)?;
        check_positive("pulse field", "tau_p", tau_p)?;
        if !(carrier.is_finite() && center.is_finite()) {
            return Err(Error::invalid(
                "pulse field",
                "carrier and center must be finite",
            ));
        }
        Ok(FieldSpec::Pulse(PulseSource {
            carrier,
            amplitude,
            tau_d,
            tau_p,
            center,
        }))
    }

    pub fn white_noise(amplitude: f64, pump_power: f64) -> Result<Self> {
        check_amplitude("white noise", amplitude)?;
        check_positive("white noise", "pump_power", pump_power)?;
        Ok(FieldSpec::WhiteNoise(WhiteNoiseSource {
            amplitude,
            pump_power,
        }))
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            FieldSpec::Cw(s) => s.amplitude,
            FieldSpec::Pulse(s) => s.amplitude,
            FieldSpec::WhiteNoise(s) => s.amplitude,
        }
    }

    pub fn tau_d(&self) -> Option<f64> {
        match self {
            FieldSpec::Cw(s) => Some(s.tau_d),
            FieldSpec::Pulse(s) => Some(s.tau_d),
            FieldSpec::WhiteNoise(_) => None,
        }
    }

    pub fn carrier(&self) -> Option<f64> {
        match self {
            FieldSpec::Cw(s) => Some(s.carrier),
            FieldSpec::Pulse(s) => Some(s.carrier),
            FieldSpec::WhiteNoise(_) => None,
        }
    }

    /// Same source with the amplitude multiplied by `factor`.
    pub fn with_amplitude_scaled(&self, factor: f64) -> Self {
        let mut out = *self;
        match &mut out {
            FieldSpec::Cw(s) => s.amplitude *= factor,
            FieldSpec::Pulse(s) => s.amplitude *= factor,
            FieldSpec::WhiteNoise(s) => s.amplitude *= factor,
        }
        out
    }
}

impl PulseSource {
    /// Real amplitude envelope e^{-(t-t_m)²/τ_p²}.
    pub fn envelope(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.tau_p;
        (-x * x).exp()
    }
}

/// How phase interruptions are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpModel {
    /// Jumps at Poisson times with rate 1/τ_d; phase increments uniform on
    /// [0, 2π). Reproduces e^{-|τ|/τ_d} exactly in expectation.
    PoissonRate,
    /// Per realization a collision count b uniform in `[b_min, b_max]`;
    /// successive inter-collision intervals are magnitudes of Wiener
    /// increments, |ξ|·`drift` with ξ ~ N(0, 1). Phase increments uniform.
    WienerCollision { drift: f64, b_min: u32, b_max: u32 },
    /// No jumps; the phase drifts linearly at a per-realization frequency
    /// offset ν ~ N(0, 1/τ_d²), giving e^{-τ²/(2τ_d²)} in expectation.
    FrequencyJitter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModelConfig {
    pub jump_model: JumpModel,
}

impl Default for NoiseModelConfig {
    fn default() -> Self {
        Self {
            jump_model: JumpModel::PoissonRate,
        }
    }
}

impl NoiseModelConfig {
    pub fn new(jump_model: JumpModel) -> Result<Self> {
        if let JumpModel::WienerCollision {
            drift,
            b_min,
            b_max,
        } = jump_model
        {
            check_positive("noise model", "drift", drift)?;
            if b_min > b_max {
                return Err(Error::invalid("noise model", "b_min must not exceed b_max"));
            }
        }
        Ok(Self { jump_model })
    }

    /// The model whose ensemble reproduces the source's analytic kernel:
    /// Poisson jumps for CW, frequency jitter for pulses.
    pub fn matching(spec: &FieldSpec) -> Self {
        let jump_model = match spec {
            FieldSpec::Pulse(_) => JumpModel::FrequencyJitter,
            _ => JumpModel::PoissonRate,
        };
        Self { jump_model }
    }
}

/// Uniform sample times `start + n·step`, n = 0..len.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("time grid", "grid is empty"));
        }
        if !(start.is_finite() && step.is_finite() && step > 0.0) {
            return Err(Error::invalid(
                "time grid",
                "start must be finite and step positive",
            ));
        }
        Ok(Self { start, step, len })
    }

    /// Grid from `start` to `end` inclusive; `end - start` must be a whole
    /// number of steps to within 1e-9 of a step.
    pub fn spanning(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(end > start) {
            return Err(Error::invalid("time grid", "end must exceed start"));
        }
        let intervals = (end - start) / step;
        let rounded = intervals.round();
        if (intervals - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::invalid(
                "time grid",
                format!("span {} is not a multiple of step {}", end - start, step),
            ));
        }
        Self::new(start, step, rounded as usize + 1)
    }

    pub fn time(&self, n: usize) -> f64 {
        self.start + self.step * n as f64
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|n| self.time(n))
    }
}

/// One sampled field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub grid: TimeGrid,
    pub values: Vec<C64>,
    /// Phase interruption times, strictly increasing, inside the grid span.
    pub jump_times: Vec<f64>,
    /// Phase on each segment between jumps (one more than `jump_times`),
    /// wrapped to [0, 2π).
    pub phases: Vec<f64>,
    /// Carrier offset ν of the frequency-jitter model (0 otherwise).
    pub frequency_offset: f64,
    /// Carrier ω₀ and coherence time τ_d of the source.
    pub carrier: f64,
    pub tau_d: f64,
    pub seed: u64,
}

impl FieldRealization {
    /// Phase changes at each jump, wrapped to [0, 2π).
    pub fn phase_increments(&self) -> Vec<f64> {
        self.phases
            .windows(2)
            .map(|w| (w[1] - w[0]).rem_euclid(TAU))
            .collect()
    }

    /// Samples with the carrier removed, ε(t)e^{iω₀t}.
    pub fn envelope_samples(&self) -> Vec<C64> {
        self.grid
            .times()
            .zip(&self.values)
            .map(|(t, v)| v * C64::from_polar(1.0, self.carrier * t))
            .collect()
    }
}

struct PhaseHistory {
    jump_times: Vec<f64>,
    phases: Vec<f64>,
    frequency_offset: f64,
}

impl PhaseHistory {
    fn draw<R: Rng>(rng: &mut R, model: JumpModel, tau_d: f64, from: f64, to: f64) -> Self {
        let phi0: f64 = rng.random::<f64>() * TAU;
        let mut jump_times = Vec::new();
        let mut phases = vec![phi0];
        let mut frequency_offset = 0.0;
        let push_jump = |t: f64, rng: &mut R, jt: &mut Vec<f64>, ph: &mut Vec<f64>| {
            let inc: f64 = rng.random::<f64>() * TAU;
            let last = *ph.last().unwrap();
            jt.push(t);
            ph.push((last + inc).rem_euclid(TAU));
        };
        match model {
            JumpModel::PoissonRate => {
                let waiting = Exp::new(1.0 / tau_d).expect("positive rate");
                let mut t = from;
                loop {
                    t += waiting.sample(rng);
                    if t > to {
                        break;
                    }
                    push_jump(t, rng, &mut jump_times, &mut phases);
                }
            }
            JumpModel::WienerCollision {
                drift,
                b_min,
                b_max,
            } => {
                let b = rng.random_range(b_min..=b_max);
                let mut t = from;
                for _ in 0..b {
                    let xi: f64 = StandardNormal.sample(rng);
                    let dt = xi.abs() * drift;
                    if dt == 0.0 {
                        continue;
                    }
                    t += dt;
                    if t > to {
                        break;
                    }
                    push_jump(t, rng, &mut jump_times, &mut phases);
                }
            }
            JumpModel::FrequencyJitter => {
                let nu = Normal::new(0.0, 1.0 / tau_d).expect("positive width");
                frequency_offset = nu.sample(rng);
            }
        }
        Self {
            jump_times,
            phases,
            frequency_offset,
        }
    }

    /// φ(t) on ascending grid times.
    fn sample_on(&self, grid: &TimeGrid, reference: f64) -> Vec<f64> {
        let mut seg = 0;
        grid.times()
            .map(|t| {
                while seg < self.jump_times.len() && self.jump_times[seg] <= t {
                    seg += 1;
                }
                self.phases[seg] + self.frequency_offset * (t - reference)
            })
            .collect()
    }
}

fn check_step(grid: &TimeGrid, tau_d: f64) -> Result<()> {
    if grid.step > tau_d / 20.0 * (1.0 + 1e-12) {
        return Err(Error::pre(format!(
            "grid step {} fs exceeds tau_d/20 = {} fs",
            grid.step,
            tau_d / 20.0
        )));
    }
    Ok(())
}

/// Phase-interrupted CW realization; identically zero before turn-on.
pub fn sample_cw(
    spec: &FieldSpec,
    noise: &NoiseModelConfig,
    grid: &TimeGrid,
    seed: u64,
) -> Result<FieldRealization> {
    let FieldSpec::Cw(src) = spec else {
        return Err(Error::pre("sample_cw requires a CW field"));
    };
    check_step(grid, src.tau_d)?;
    let mut rng = rng_from_seed(seed);
    let from = src.turn_on.max(grid.start);
    let to = grid.end();
    let history = PhaseHistory::draw(&mut rng, noise.jump_model, src.tau_d, from, to);
    let phase = history.sample_on(grid, src.turn_on);
    let values = grid
        .times()
        .zip(phase)
        .map(|(t, phi)| {
            if t < src.turn_on {
                C64::new(0.0, 0.0)
            } else {
                C64::from_polar(src.amplitude, -(src.carrier * t + phi))
            }
        })
        .collect();
    Ok(FieldRealization {
        grid: *grid,
        values,
        jump_times: history.jump_times,
        phases: history.phases,
        frequency_offset: history.frequency_offset,
        carrier: src.carrier,
        tau_d: src.tau_d,
        seed,
    })
}

/// Noisy Gaussian pulse realization. The grid must cover t_m ± 4τ_p.
pub fn sample_pulse(
    spec: &FieldSpec,
    noise: &NoiseModelConfig,
    grid: &TimeGrid,
    seed: u64,
) -> Result<FieldRealization> {
    let FieldSpec::Pulse(src) = spec else {
        return Err(Error::pre("sample_pulse requires a pulse field"));
    };
    check_step(grid, src.tau_d)?;
    let slack = 1e-9 * src.tau_p;
    if grid.start > src.center - 4.0 * src.tau_p + slack
        || grid.end() < src.center + 4.0 * src.tau_p - slack
    {
        return Err(Error::pre(format!(
            "grid [{}, {}] fs does not cover the pulse support [{}, {}] fs",
            grid.start,
            grid.end(),
            src.center - 4.0 * src.tau_p,
            src.center + 4.0 * src.tau_p
        )));
    }
    let mut rng = rng_from_seed(seed);
    let history = PhaseHistory::draw(
        &mut rng,
        noise.jump_model,
        src.tau_d,
        grid.start,
        grid.end(),
    );
    let phase = history.sample_on(grid, src.center);
    let values = grid
        .times()
        .zip(phase)
        .map(|(t, phi)| C64::from_polar(src.amplitude * src.envelope(t), -(src.carrier * t + phi)))
        .collect();
    Ok(FieldRealization {
        grid: *grid,
        values,
        jump_times: history.jump_times,
        phases: history.phases,
        frequency_offset: history.frequency_offset,
        carrier: src.carrier,
        tau_d: src.tau_d,
        seed,
    })
}

/// Dispatches to the sampler of the source type.
pub fn sample(
    spec: &FieldSpec,
    noise: &NoiseModelConfig,
    grid: &TimeGrid,
    seed: u64,
) -> Result<FieldRealization> {
    match spec {
        FieldSpec::Cw(_) => sample_cw(spec, noise, grid, seed),
        FieldSpec::Pulse(_) => sample_pulse(spec, noise, grid, seed),
        FieldSpec::WhiteNoise(_) => Err(Error::pre(
            "white noise is handled analytically and cannot be sampled",
        )),
    }
}

/// Analytic ⟨ε(t1)ε*(t2)⟩.
///
/// White noise has no pointwise value; with `grid_step = Some(Δt)` it is
/// returned as the discretized delta A²𝓡/Δt on coincident times and 0
/// elsewhere.
pub fn analytic_kernel(spec: &FieldSpec, t1: f64, t2: f64, grid_step: Option<f64>) -> Result<C64> {
    match spec {
        FieldSpec::Cw(s) => {
            if t1 < s.turn_on || t2 < s.turn_on {
                return Ok(C64::new(0.0, 0.0));
            }
            let lag = t1 - t2;
            let mag = s.amplitude * s.amplitude * (-lag.abs() / s.tau_d).exp();
            Ok(C64::from_polar(mag, -s.carrier * lag))
        }
        FieldSpec::Pulse(s) => {
            let lag = t1 - t2;
            let mag = s.amplitude
                * s.amplitude
                * s.envelope(t1)
                * s.envelope(t2)
                * (-lag * lag / (2.0 * s.tau_d * s.tau_d)).exp();
            Ok(C64::from_polar(mag, -s.carrier * lag))
        }
        FieldSpec::WhiteNoise(s) => {
            let dt = grid_step.ok_or_else(|| {
                Error::pre(
                    "white-noise kernel is a delta; a grid step is required to discretize it",
                )
            })?;
            if (t1 - t2).abs() < 0.5 * dt {
                Ok(C64::new(s.amplitude * s.amplitude * s.pump_power / dt, 0.0))
            } else {
                Ok(C64::new(0.0, 0.0))
            }
        }
    }
}

/// Monte Carlo estimate of the two-time correlation on a sub-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    /// Kernel sample times.
    pub times: Vec<f64>,
    /// K̂(t_a, t_b), row-major.
    pub kernel: Vec<C64>,
    /// Standard error of each entry, sqrt(E|z - K̂|² / (n - 1) / n)... see
    /// [`estimate_kernel`].
    pub stderr: Vec<f64>,
    pub n_realizations: usize,
}

impl CorrelationEstimate {
    pub fn dim(&self) -> usize {
        self.times.len()
    }

    pub fn at(&self, a: usize, b: usize) -> C64 {
        self.kernel[a * self.dim() + b]
    }

    pub fn stderr_at(&self, a: usize, b: usize) -> f64 {
        self.stderr[a * self.dim() + b]
    }

    /// Compares against [`analytic_kernel`] with per-entry tolerance
    /// max(`abs_frac`·A², `k_sigma`·stderr).
    pub fn check_against(
        &self,
        spec: &FieldSpec,
        abs_frac: f64,
        k_sigma: f64,
    ) -> Result<KernelCheck> {
        let a2 = spec.amplitude() * spec.amplitude();
        let m = self.dim();
        let mut report = KernelCheck {
            max_deviation: 0.0,
            worst_ratio: 0.0,
            worst_entry: (0, 0),
            abs_tolerance: abs_frac * a2,
            k_sigma,
        };
        for a in 0..m {
            for b in 0..m {
                let exact = analytic_kernel(spec, self.times[a], self.times[b], None)?;
                let dev = (self.at(a, b) - exact).norm();
                let tol = (abs_frac * a2).max(k_sigma * self.stderr_at(a, b));
                report.max_deviation = report.max_deviation.max(dev);
                let ratio = if tol > 0.0 {
                    dev / tol
                } else if dev > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                if ratio > report.worst_ratio {
                    report.worst_ratio = ratio;
                    report.worst_entry = (a, b);
                }
            }
        }
        Ok(report)
    }

    /// CSV dump: header `t1_fs,t2_fs,re_K,im_K,stderr`, row-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t1_fs,t2_fs,re_K,im_K,stderr")?;
        let m = self.dim();
        for a in 0..m {
            for b in 0..m {
                let k = self.at(a, b);
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_num(self.times[a]),
                    fmt_num(self.times[b]),
                    fmt_num(k.re),
                    fmt_num(k.im),
                    fmt_num(self.stderr_at(a, b))
                )?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCheck {
    pub max_deviation: f64,
    /// Largest deviation/tolerance over all entries; ≤ 1 passes.
    pub worst_ratio: f64,
    pub worst_entry: (usize, usize),
    pub abs_tolerance: f64,
    pub k_sigma: f64,
}

impl KernelCheck {
    pub fn passed(&self) -> bool {
        self.worst_ratio <= 1.0
    }
}

struct KernelSums {
    sum: Vec<C64>,
    sum_sq: Vec<f64>,
}

impl KernelSums {
    fn merge(mut self, other: KernelSums) -> KernelSums {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += *b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += *b;
        }
        self
    }
}

/// K̂(t_a, t_b) = (1/n) Σ_k ε_k(t_a) ε_k*(t_b) on every `stride`-th sample of
/// `grid`, realization k seeded by `realization_seed(master_seed, k)`.
///
/// Only the upper triangle is accumulated; the lower is its conjugate, so
/// K̂ is Hermitian exactly. The per-entry standard error is
/// sqrt((mean|z|² - |K̂|²)/(n - 1)) with z = ε(t_a)ε*(t_b).
pub fn estimate_kernel(
    spec: &FieldSpec,
    noise: &NoiseModelConfig,
    n: usize,
    grid: &TimeGrid,
    master_seed: u64,
    stride: usize,
) -> Result<CorrelationEstimate> {
    if n < 2 {
        return Err(Error::pre(
            "kernel estimation needs at least 2 realizations",
        ));
    }
    if stride == 0 {
        return Err(Error::pre("kernel stride must be positive"));
    }
    let picks: Vec<usize> = (0..grid.len).step_by(stride).collect();
    let m = picks.len();
    let tri = m * (m + 1) / 2;
    let map = |k: usize| -> Result<KernelSums> {
        let seed = realization_seed(master_seed, k as u64);
        let field = sample(spec, noise, grid, seed).map_err(|e| Error::Realization {
            index: k as u64,
            seed,
            source: Box::new(e),
        })?;
        let v: Vec<C64> = picks.iter().map(|&p| field.values[p]).collect();
        let mut sum = Vec::with_capacity(tri);
        let mut sum_sq = Vec::with_capacity(tri);
        for a in 0..m {
            for b in a..m {
                let z = v[a] * v[b].conj();
                sum.push(z);
                sum_sq.push(z.norm_sqr());
            }
        }
        Ok(KernelSums { sum, sum_sq })
    };
    let sums = pairwise_reduce(n, &map, &KernelSums::merge)?;
    let nf = n as f64;
    let mut kernel = vec![C64::new(0.0, 0.0); m * m];
    let mut stderr = vec![0.0; m * m];
    let mut idx = 0;
    for a in 0..m {
        for b in a..m {
            let mean = sums.sum[idx] / nf;
            let var = (sums.sum_sq[idx] / nf - mean.norm_sqr()).max(0.0) * nf / (nf - 1.0);
            let se = (var / nf).sqrt();
            kernel[a * m + b] = mean;
            kernel[b * m + a] = mean.conj();
            stderr[a * m + b] = se;
            stderr[b * m + a] = se;
            idx += 1;
        }
    }
    Ok(CorrelationEstimate {
        times: picks.iter().map(|&p| grid.time(p)).collect(),
        kernel,
        stderr,
        n_realizations: n,
    })
}
