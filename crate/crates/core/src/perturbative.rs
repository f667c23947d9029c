//! First-order closed forms for the excited-state block and a brute-force
//! double-integral oracle.
//!
//! To first order in the field, with c_k = μ_k A/i and δ_k = ω_kg − ω₀,
//!
//! ρ_ij(t) = c_i c_j* e^{-iω_ij t} ∫∫_{t₀}^{t} e^{iω_ig t′} e^{-iω_jg t″} K(t′, t″) dt′ dt″ / A²
//!
//! where K is the two-time field correlation. For the CW kernel the integral
//! is elementary; writing s = t − t₀, γ = 1/τ_d, P = 1/(γ − iδ_j),
//! Q = 1/(γ + iδ_i) and ω = ω_ij,
//!
//! ρ_ij / (c_i c_j*) = (P + Q)(1 − e^{-iωs})/(iω) − P·X₁ − Q·X₂
//!
//! X₁ = (e^{(iδ_j − γ)s} − e^{-iωs}) / (iδ_i − γ)
//! X₂ = (e^{-iωs} − e^{-(iδ_i + γ)s}) / (γ + iδ_j)
//!
//! Splitting P = 𝒰(ω_jg)/2 + iR(δ_j) and Q = 𝒰(ω_ig)/2 − iR(δ_i) gives the
//! four terms of [`PairEta`]. The long-time term carries (P + Q), which is
//! 𝒰(ω_ig) on the diagonal; the prefactor 𝒰(ω_jg) alone would break the
//! Hermiticity of the block off resonance and disagrees with the oracle.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::fieldgen::{analytic_kernel, CwSource, FieldSpec, PulseSource, WhiteNoiseSource};
use crate::model::{ExcitedBlock, VSystem, C64, LEVEL_2, LEVEL_3};
use crate::quadrature::{integrate_square, GaussRule};

const I: C64 = C64::new(0.0, 1.0);

/// e^z − 1 without cancellation for small |z|.
pub(crate) fn expm1c(z: C64) -> C64 {
    let half = (0.5 * z.im).sin();
    C64::new(
        z.re.exp_m1() * z.im.cos() - 2.0 * half * half,
        z.re.exp() * z.im.sin(),
    )
}

/// (e^{zs} − 1)/z, equal to s at z = 0.
fn growth(z: C64, s: f64) -> C64 {
    if z == C64::new(0.0, 0.0) {
        C64::new(s, 0.0)
    } else {
        expm1c(z * s) / z
    }
}

fn lorentzian(detuning: f64, tau_d: f64) -> f64 {
    2.0 * tau_d / (1.0 + tau_d * tau_d * detuning * detuning)
}

/// R(δ) = δ/(γ² + δ²), the dispersive partner of 𝒰.
pub fn lorentzian_r(detuning: f64, tau_d: f64) -> f64 {
    let g = 1.0 / tau_d;
    detuning / (g * g + detuning * detuning)
}

/// 𝒰(ω) = 2τ_d / (1 + τ_d²(ω − ω₀)²), in fs.
pub fn lorentzian_u(omega: f64, src: &CwSource) -> f64 {
    lorentzian(omega - src.carrier, src.tau_d)
}

fn cw_source(spec: &FieldSpec) -> Result<&CwSource> {
    match spec {
        FieldSpec::Cw(s) => Ok(s),
        _ => Err(Error::pre("a CW field is required")),
    }
}

fn pulse_source(spec: &FieldSpec) -> Result<&PulseSource> {
    match spec {
        FieldSpec::Pulse(s) => Ok(s),
        _ => Err(Error::pre("a pulse field is required")),
    }
}

fn white_source(spec: &FieldSpec) -> Result<&WhiteNoiseSource> {
    match spec {
        FieldSpec::WhiteNoise(s) => Ok(s),
        _ => Err(Error::pre("a white-noise field is required")),
    }
}

fn detunings(sys: &VSystem, carrier: f64) -> [f64; 2] {
    [
        sys.transition_freq(0) - carrier,
        sys.transition_freq(1) - carrier,
    ]
}

/// Index into the (2, 3) detuning and coupling pairs.
fn slot(level: usize) -> Result<usize> {
    match level {
        LEVEL_2 => Ok(0),
        LEVEL_3 => Ok(1),
        _ => Err(Error::invalid(
            "level pair",
            format!("{level} is not an excited level"),
        )),
    }
}

/// The four time-integrated kernel factors of one level pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEta {
    pub i: usize,
    pub j: usize,
    pub delta_i: f64,
    pub delta_j: f64,
    /// R(δ_j)
    pub lorentzian_r: f64,
    pub eta_lt: C64,
    pub eta_1: C64,
    pub eta_2: C64,
    pub eta_3: C64,
}

impl PairEta {
    pub fn total(&self) -> C64 {
        self.eta_lt + self.eta_1 + self.eta_2 + self.eta_3
    }
}

/// Per-pair factors for (2,2), (3,3) and (2,3), in that order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaBreakdown {
    pub pairs: [PairEta; 3],
}

/// Kernel factors for detunings `delta_i`, `delta_j` after `elapsed` fs of
/// CW drive. Continuous through δ_i = δ_j, where the long-time term becomes
/// 𝒰·elapsed.
pub fn pair_eta(delta_i: f64, delta_j: f64, tau_d: f64, elapsed: f64) -> PairEta {
    let g = 1.0 / tau_d;
    let s = elapsed;
    let omega = delta_i - delta_j;
    let p = 1.0 / C64::new(g, -delta_j);
    let q = 1.0 / C64::new(g, delta_i);
    let carrier = C64::from_polar(1.0, -omega * s);
    let x1 = carrier * growth(C64::new(-g, delta_i), s);
    let x2 = carrier * growth(C64::new(-g, -delta_j), s);
    let u_i = lorentzian(delta_i, tau_d);
    let u_j = lorentzian(delta_j, tau_d);
    let r_i = lorentzian_r(delta_i, tau_d);
    let r_j = lorentzian_r(delta_j, tau_d);
    PairEta {
        i: 0,
        j: 0,
        delta_i,
        delta_j,
        lorentzian_r: r_j,
        eta_lt: (p + q) * growth(C64::new(0.0, -omega), s),
        eta_1: -0.5 * u_j * x1,
        eta_2: -0.5 * u_i * x2,
        eta_3: -I * r_j * x1 + I * r_i * x2,
    }
}

/// Kernel factors `elapsed` fs after turn-on.
pub fn eta_breakdown(sys: &VSystem, spec: &FieldSpec, elapsed: f64) -> Result<EtaBreakdown> {
    let src = cw_source(spec)?;
    if !(elapsed >= 0.0) {
        return Err(Error::pre(format!("elapsed time {elapsed} fs is negative")));
    }
    let d = detunings(sys, src.carrier);
    let pair = |a: usize, b: usize| {
        let mut e = pair_eta(d[a], d[b], src.tau_d, elapsed);
        e.i = LEVEL_2 + a;
        e.j = LEVEL_2 + b;
        e
    };
    Ok(EtaBreakdown {
        pairs: [pair(0, 0), pair(1, 1), pair(0, 1)],
    })
}

fn couplings(sys: &VSystem, amplitude: f64) -> [f64; 2] {
    let [m2, m3] = sys.dipole_rates();
    [m2 * amplitude, m3 * amplitude]
}

/// Sudden turn-on CW block at absolute time `t`; zero before turn-on.
pub fn excited_block_cw(sys: &VSystem, spec: &FieldSpec, t: f64) -> Result<ExcitedBlock> {
    let src = cw_source(spec)?;
    let elapsed = t - src.turn_on;
    if elapsed <= 0.0 {
        return Ok(ExcitedBlock::zero());
    }
    let eta = eta_breakdown(sys, spec, elapsed)?;
    let [c2, c3] = couplings(sys, src.amplitude);
    Ok(ExcitedBlock {
        pop_i: c2 * c2 * eta.pairs[0].total().re,
        pop_j: c3 * c3 * eta.pairs[1].total().re,
        coh_ij: c2 * c3 * eta.pairs[2].total(),
    })
}

/// Oracle quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Gauss–Legendre nodes per tile edge, at least 8.
    pub order: usize,
    /// Tile edge as a fraction of min(τ_d, 2π/max|δ|, τ_p).
    pub tile_fraction: f64,
    /// Largest accepted relative change when the tiles are halved.
    pub refine_tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            order: 8,
            tile_fraction: 0.5,
            refine_tol: 1e-8,
        }
    }
}

/// ρ_e(t) from the double time integral over [t0, t]², with
/// [`analytic_kernel`] as the integrand kernel. CW and pulse fields only.
///
/// The result on a given tiling is accepted only if halving every tile
/// changes it by less than `quad.refine_tol` relative.
pub fn excited_block_oracle(
    sys: &VSystem,
    spec: &FieldSpec,
    t0: f64,
    t: f64,
    quad: &QuadConfig,
) -> Result<ExcitedBlock> {
    if t < t0 {
        return Err(Error::pre(format!(
            "end time {t} fs precedes start {t0} fs"
        )));
    }
    if quad.order < 8 {
        return Err(Error::pre(
            "oracle quadrature needs at least 8 nodes per tile",
        ));
    }
    if !(quad.tile_fraction > 0.0 && quad.tile_fraction <= 1.0) {
        return Err(Error::pre("tile fraction must lie in (0, 1]"));
    }
    let (carrier, tau_d, amplitude) = match spec {
        FieldSpec::Cw(s) => (s.carrier, s.tau_d, s.amplitude),
        FieldSpec::Pulse(s) => (s.carrier, s.tau_d, s.amplitude),
        FieldSpec::WhiteNoise(_) => {
            return Err(Error::pre("the oracle integrates CW or pulse kernels only"))
        }
    };
    // The CW kernel vanishes before turn-on; starting there keeps the kink
    // on a tile edge.
    let lo = match spec {
        FieldSpec::Cw(s) => t0.max(s.turn_on),
        _ => t0,
    };
    if t <= lo {
        return Ok(ExcitedBlock::zero());
    }
    let d = detunings(sys, carrier);
    let mut scale = tau_d;
    let max_detuning = d[0].abs().max(d[1].abs());
    if max_detuning > 0.0 {
        scale = scale.min(TAU / max_detuning);
    }
    if let FieldSpec::Pulse(p) = spec {
        scale = scale.min(p.tau_p);
    }
    let tiles = ((t - lo) / (scale * quad.tile_fraction)).ceil().max(1.0) as usize;
    let rule = GaussRule::new(quad.order)?;
    let w2 = sys.transition_freq(0);
    let w3 = sys.transition_freq(1);

    let integrand = |x: f64, y: f64| -> [C64; 3] {
        let k = analytic_kernel(spec, x, y, None).unwrap_or_default();
        let (xr, yr) = (x - lo, y - lo);
        [
            k * C64::from_polar(1.0, w2 * (xr - yr)),
            k * C64::from_polar(1.0, w3 * (xr - yr)),
            k * C64::from_polar(1.0, w2 * xr - w3 * yr),
        ]
    };
    let skip = |xa: f64, xb: f64, ya: f64, yb: f64| -> bool {
        let gap = (ya - xb).max(xa - yb).max(0.0);
        match spec {
            FieldSpec::Cw(_) => gap > 45.0 * tau_d,
            FieldSpec::Pulse(p) => {
                let (a, b) = (p.center - 7.0 * p.tau_p, p.center + 7.0 * p.tau_p);
                gap > 9.5 * tau_d || xb < a || xa > b || yb < a || ya > b
            }
            FieldSpec::WhiteNoise(_) => false,
        }
    };
    let [c2, c3] = couplings(sys, amplitude);
    let assemble = |v: [C64; 3]| {
        let a2 = amplitude * amplitude;
        let (p2, p3) = if a2 > 0.0 {
            (c2 * c2 / a2, c3 * c3 / a2)
        } else {
            (0.0, 0.0)
        };
        let mixed = if a2 > 0.0 { c2 * c3 / a2 } else { 0.0 };
        ExcitedBlock {
            pop_i: p2 * v[0].re,
            pop_j: p3 * v[1].re,
            coh_ij: mixed * C64::from_polar(1.0, -(w2 - w3) * (t - lo)) * v[2],
        }
    };
    let coarse = assemble(integrate_square(&rule, lo, t, tiles, &integrand, &skip));
    let fine = assemble(integrate_square(&rule, lo, t, 2 * tiles, &integrand, &skip));
    let change = coarse.relative_error(&fine);
    if !(change <= quad.refine_tol) {
        return Err(Error::Unconverged(format!(
            "halving {tiles} tiles over [{lo}, {t}] fs changed the block by {change:.3e} (limit {:.1e})",
            quad.refine_tol
        )));
    }
    Ok(fine)
}

/// η_p^{ij} = π τ_p T e^{iω_ij t_m} e^{-τ_p²ω_ij²/8} e^{-T²(δ_i+δ_j)²/8},
/// T = τ_pτ_d/√(τ_p² + τ_d²), for excited levels `i`, `j`.
pub fn pulse_eta(sys: &VSystem, spec: &FieldSpec, i: usize, j: usize) -> Result<C64> {
    let src = pulse_source(spec)?;
    let d = detunings(sys, src.carrier);
    let (di, dj) = (d[slot(i)?], d[slot(j)?]);
    let omega = di - dj;
    let big_t = pulse_width_t(src);
    let sum = di + dj;
    let mag = PI
        * src.tau_p
        * big_t
        * (-src.tau_p * src.tau_p * omega * omega / 8.0).exp()
        * (-big_t * big_t * sum * sum / 8.0).exp();
    Ok(C64::from_polar(mag, omega * src.center))
}

/// T = τ_pτ_d/√(τ_p² + τ_d²)
pub fn pulse_width_t(src: &PulseSource) -> f64 {
    src.tau_p * src.tau_d / src.tau_p.hypot(src.tau_d)
}

/// Post-pulse block at `t ≥ t_m + 4τ_p`.
pub fn excited_block_pulse_longtime(
    sys: &VSystem,
    spec: &FieldSpec,
    t: f64,
) -> Result<ExcitedBlock> {
    let src = pulse_source(spec)?;
    if t - src.center < 4.0 * src.tau_p {
        return Err(Error::pre(format!(
            "t - t_m = {} fs is below 4 tau_p = {} fs; the post-pulse form does not apply",
            t - src.center,
            4.0 * src.tau_p
        )));
    }
    let [c2, c3] = couplings(sys, src.amplitude);
    let omega = sys.transition_freq(0) - sys.transition_freq(1);
    Ok(ExcitedBlock {
        pop_i: c2 * c2 * pulse_eta(sys, spec, LEVEL_2, LEVEL_2)?.re,
        pop_j: c3 * c3 * pulse_eta(sys, spec, LEVEL_3, LEVEL_3)?.re,
        coh_ij: c2
            * c3
            * C64::from_polar(1.0, -omega * t)
            * pulse_eta(sys, spec, LEVEL_2, LEVEL_3)?,
    })
}

/// Post-pulse 𝒞 in its several closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseCoherence {
    /// Ratio of the η_p factors weighted by the couplings.
    pub direct: f64,
    /// e^{-τ_p²ω²/8} e^{-T²(δ_i+δ_j)²/8} / (e^{-T²δ_i²/2} + e^{-T²δ_j²/2}),
    /// valid for equal couplings.
    pub general: f64,
    /// ½ e^{-τ_p²ω²/8} e^{T²δ_i²/2}, when ω₀ is centered between the levels.
    pub centered: Option<f64>,
    /// ½ e^{(τ_d² − τ_p²)ω²/8}, the T → τ_d limit, when τ_p ≥ 5τ_d.
    pub long_pulse: Option<f64>,
    /// ½ e^{-τ_p²ω²/8}, the leading term of the same limit.
    pub long_pulse_leading: Option<f64>,
}

pub fn c_pulse_forms(sys: &VSystem, spec: &FieldSpec) -> Result<PulseCoherence> {
    let src = pulse_source(spec)?;
    let [c2, c3] = couplings(sys, 1.0);
    let e22 = pulse_eta(sys, spec, LEVEL_2, LEVEL_2)?.re;
    let e33 = pulse_eta(sys, spec, LEVEL_3, LEVEL_3)?.re;
    let e23 = pulse_eta(sys, spec, LEVEL_2, LEVEL_3)?.norm();
    let direct = c2 * c3 * e23 / (c2 * c2 * e22 + c3 * c3 * e33);

    let [di, dj] = detunings(sys, src.carrier);
    let omega = di - dj;
    let big_t = pulse_width_t(src);
    let (tp2, t2) = (src.tau_p * src.tau_p, big_t * big_t);
    let general = (-tp2 * omega * omega / 8.0).exp() * (-t2 * (di + dj).powi(2) / 8.0).exp()
        / ((-t2 * di * di / 2.0).exp() + (-t2 * dj * dj / 2.0).exp());
    let is_centered = (di + dj).abs() <= 1e-12 * omega.abs();
    let centered =
        is_centered.then(|| 0.5 * (-tp2 * omega * omega / 8.0).exp() * (t2 * di * di / 2.0).exp());
    let long = src.tau_p >= 5.0 * src.tau_d;
    let long_pulse = (is_centered && long)
        .then(|| 0.5 * ((src.tau_d * src.tau_d - tp2) * omega * omega / 8.0).exp());
    let long_pulse_leading =
        (is_centered && long).then(|| 0.5 * (-tp2 * omega * omega / 8.0).exp());
    Ok(PulseCoherence {
        direct,
        general,
        centered,
        long_pulse,
        long_pulse_leading,
    })
}

/// Post-pulse 𝒞: the closed general form for equal couplings, the direct
/// η_p ratio otherwise.
pub fn c_pulse(sys: &VSystem, spec: &FieldSpec) -> Result<f64> {
    let forms = c_pulse_forms(sys, spec)?;
    let [c2, c3] = sys.dipole_rates();
    Ok(if c2 == c3 {
        forms.general
    } else {
        forms.direct
    })
}

/// CW block averaged over turn-on times: populations as for a sudden
/// turn-on, coherence replaced by its stationary value c_i c_j* F.
/// Requires t − turn-on ≥ 10τ_d, where the dropped e^{-t/τ_d} terms are
/// below e^{-10}.
pub fn turnon_averaged_block(sys: &VSystem, spec: &FieldSpec, t: f64) -> Result<ExcitedBlock> {
    let src = cw_source(spec)?;
    if t - src.turn_on < 10.0 * src.tau_d {
        return Err(Error::pre(format!(
            "t - t0 = {} fs is below 10 tau_d = {} fs; the averaged form does not apply",
            t - src.turn_on,
            10.0 * src.tau_d
        )));
    }
    let mut block = excited_block_cw(sys, spec, t)?;
    let [c2, c3] = couplings(sys, src.amplitude);
    block.coh_ij = c2 * c3 * stationary_coherence(sys, spec)?.f_value;
    Ok(block)
}

/// Stationary coherence factor of the turn-on-averaged CW drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryCoherence {
    /// F = (P + Q)/(iω_ij)
    pub f_value: C64,
    /// τ_d²(4 + ω²τ_d²) / (ω²(1 + δ_i²τ_d²)(1 + δ_j²τ_d²))
    pub f_squared: f64,
    /// 16τ_d² / (ω²(4 + τ_d²ω²)), the value for a centered carrier.
    pub centered_f_squared: f64,
    /// 16/ω⁴, the τ_d → ∞ limit of the centered value.
    pub saturation: f64,
}

pub fn stationary_coherence(sys: &VSystem, spec: &FieldSpec) -> Result<StationaryCoherence> {
    let src = cw_source(spec)?;
    let [di, dj] = detunings(sys, src.carrier);
    let omega = di - dj;
    if omega == 0.0 {
        return Err(Error::Degenerate(
            "stationary coherence needs distinct excited levels",
        ));
    }
    let tau = src.tau_d;
    let g = 1.0 / tau;
    let p = 1.0 / C64::new(g, -dj);
    let q = 1.0 / C64::new(g, di);
    let w2 = omega * omega;
    let t2 = tau * tau;
    Ok(StationaryCoherence {
        f_value: (p + q) / (I * omega),
        f_squared: t2 * (4.0 + w2 * t2) / (w2 * (1.0 + di * di * t2) * (1.0 + dj * dj * t2)),
        centered_f_squared: 16.0 * t2 / (w2 * (4.0 + t2 * w2)),
        saturation: 16.0 / (w2 * w2),
    })
}

/// White-noise block at `t` after switch-on: ρ_ii = |c_i|²𝓡t and
/// ρ_ij = c_i c_j* 𝓡 (1 − e^{-iω_ij t})/(iω_ij).
pub fn white_noise_block(sys: &VSystem, spec: &FieldSpec, t: f64) -> Result<ExcitedBlock> {
    let src = white_source(spec)?;
    if !(t >= 0.0) {
        return Err(Error::pre(format!("time {t} fs is negative")));
    }
    let [c2, c3] = couplings(sys, src.amplitude);
    let omega = sys.transition_freq(0) - sys.transition_freq(1);
    let r = src.pump_power;
    Ok(ExcitedBlock {
        pop_i: c2 * c2 * r * t,
        pop_j: c3 * c3 * r * t,
        coh_ij: c2 * c3 * r * growth(C64::new(0.0, -omega), t),
    })
}

/// 𝒞 = |1 − e^{-iωt}|/(2|ω|t) = |sin(ωt/2)|/|ωt|, with the t → 0⁺ limit ½.
pub fn c_white(omega: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::pre(format!("time {t} fs is negative")));
    }
    let x = omega * t;
    if x == 0.0 {
        return Ok(0.5);
    }
    Ok((0.5 * x).sin().abs() / x.abs())
}
