//! Scalar diagnostics of states and comparison of time series.

use crate::error::{Error, Result};
use crate::model::{DensityMatrix, ExcitedBlock, GROUND, LEVEL_2, LEVEL_3};

/// Excited populations below this are treated as absent.
pub const UNDERFLOW: f64 = 1e-300;

/// 𝒞 = |ρ₂₃| / (ρ₂₂ + ρ₃₃)
pub fn c_measure(block: &ExcitedBlock) -> Result<f64> {
    let pop = block.population_sum();
    if !(pop > 0.0) {
        return Err(Error::ZeroPopulation("coherence measure"));
    }
    Ok(block.coh_ij.norm() / pop)
}

/// 𝒞, or `None` where the excited populations underflow.
pub fn c_measure_opt(block: &ExcitedBlock) -> Option<f64> {
    if block.population_sum() < UNDERFLOW {
        None
    } else {
        c_measure(block).ok()
    }
}

/// Tr ρ²
pub fn purity(rho: &DensityMatrix) -> f64 {
    // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ.
    rho.entries.iter().map(|z| z.norm_sqr()).sum()
}

/// Tr ρ_e² / (Tr ρ_e)² of the excited 2×2 block.
pub fn excited_purity(rho: &DensityMatrix) -> Result<f64> {
    block_purity(&rho.excited_block())
}

pub fn block_purity(b: &ExcitedBlock) -> Result<f64> {
    let tr = b.population_sum();
    if !(tr > 0.0) {
        return Err(Error::ZeroPopulation("excited purity"));
    }
    Ok((b.pop_i * b.pop_i + b.pop_j * b.pop_j + 2.0 * b.coh_ij.norm_sqr()) / (tr * tr))
}

/// Diagnostics at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureRecord {
    pub t: f64,
    pub pop_g: f64,
    pub pop_2: f64,
    pub pop_3: f64,
    pub coh_re: f64,
    pub coh_im: f64,
    pub coh_abs: f64,
    /// Missing where the excited populations underflow.
    pub c_measure: Option<f64>,
    pub purity: f64,
    pub excited_purity: Option<f64>,
}

impl MeasureRecord {
    pub fn from_state(t: f64, rho: &DensityMatrix) -> Self {
        let b = rho.excited_block();
        Self {
            t,
            pop_g: rho.population(GROUND),
            pop_2: rho.population(LEVEL_2),
            pop_3: rho.population(LEVEL_3),
            coh_re: b.coh_ij.re,
            coh_im: b.coh_ij.im,
            coh_abs: b.coh_ij.norm(),
            c_measure: c_measure_opt(&b),
            purity: purity(rho),
            excited_purity: if b.population_sum() < UNDERFLOW {
                None
            } else {
                block_purity(&b).ok()
            },
        }
    }

    /// Record of the full state whose excited manifold is `block` and whose
    /// remaining weight sits in |g⟩.
    pub fn from_block(t: f64, block: &ExcitedBlock) -> Self {
        Self::from_state(t, &DensityMatrix::from_excited(block))
    }
}

/// Least-squares line y = intercept + slope·x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::pre(
            "linear fit needs two equally long series of at least 2 points",
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::pre("linear fit over a single abscissa"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Relative agreement of two series on the same grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesComparison {
    /// sqrt(Σ|a − b|² / Σ|b|²) of the complex coherence ρ₂₃.
    pub coherence_rms_rel: f64,
    /// max|a − b| / max|b| of the coherence.
    pub coherence_max_rel: f64,
    /// Same aggregates over both excited populations.
    pub population_rms_rel: f64,
    pub population_max_rel: f64,
    /// Fitted population slopes of `a` over those of `b`, for ρ₂₂ and ρ₃₃.
    pub slope_ratio: [f64; 2],
}

/// Compares `a` against the reference `b`. Slopes are fitted over records
/// with t ≥ `fit_start`.
pub fn compare_series(
    a: &[MeasureRecord],
    b: &[MeasureRecord],
    fit_start: f64,
) -> Result<SeriesComparison> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::pre(format!(
            "series lengths differ or are empty ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    for (ra, rb) in a.iter().zip(b) {
        if (ra.t - rb.t).abs() > 1e-9 * rb.t.abs().max(1.0) {
            return Err(Error::pre(format!(
                "grids differ at t = {} vs {}",
                ra.t, rb.t
            )));
        }
    }
    let rel = |dev: &dyn Fn(&MeasureRecord, &MeasureRecord) -> f64,
               mag: &dyn Fn(&MeasureRecord) -> f64| {
        let (mut num, mut den, mut dmax, mut mmax) = (0.0, 0.0, 0.0f64, 0.0f64);
        for (ra, rb) in a.iter().zip(b) {
            let d = dev(ra, rb);
            let m = mag(rb);
            num += d * d;
            den += m * m;
            dmax = dmax.max(d);
            mmax = mmax.max(m);
        }
        let ratio = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x / y };
        (ratio(num, den).sqrt(), ratio(dmax, mmax))
    };
    let (coh_rms, coh_max) = rel(
        &|x, y| (x.coh_re - y.coh_re).hypot(x.coh_im - y.coh_im),
        &|y| y.coh_re.hypot(y.coh_im),
    );
    let (pop_rms, pop_max) = rel(&|x, y| (x.pop_2 - y.pop_2).hypot(x.pop_3 - y.pop_3), &|y| {
        y.pop_2.hypot(y.pop_3)
    });
    let window: Vec<usize> = (0..a.len()).filter(|&k| a[k].t >= fit_start).collect();
    let ts: Vec<f64> = window.iter().map(|&k| a[k].t).collect();
    let pick = |s: &[MeasureRecord], f: fn(&MeasureRecord) -> f64| -> Vec<f64> {
        window.iter().map(|&k| f(&s[k])).collect()
    };
    let mut slope_ratio = [0.0; 2];
    for (n, f) in [
        (|r: &MeasureRecord| r.pop_2) as fn(&MeasureRecord) -> f64,
        |r| r.pop_3,
    ]
    .into_iter()
    .enumerate()
    {
        let sa = linear_fit(&ts, &pick(a, f))?.slope;
        let sb = linear_fit(&ts, &pick(b, f))?.slope;
        slope_ratio[n] = if sa == sb { 1.0 } else { sa / sb };
    }
    Ok(SeriesComparison {
        coherence_rms_rel: coh_rms,
        coherence_max_rel: coh_max,
        population_rms_rel: pop_rms,
        population_max_rel: pop_max,
        slope_ratio,
    })
}
