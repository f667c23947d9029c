//! Von Neumann propagation of single field realizations and their ensemble
//! average.
//!
//! Each trajectory starts in |g⟩⟨g| and is integrated with classical RK4 in
//! the interaction picture of the free Hamiltonian H₀, where
//! dρ_I/dt = −i[V_I(t), ρ_I] and (V_I)_mn = e^{i(ω_m−ω_n)t} V_mn. The
//! transformation is exact, so the free phases e^{−iω_kg t} are not
//! discretized. Between grid samples the carrier-free envelope ε(t)e^{iω₀t}
//! is interpolated linearly and the carrier restored exactly.

use nalgebra::Matrix3;

use crate::ensemble::{pairwise_reduce, realization_seed, with_workers};
use crate::error::{Error, Result};
use crate::fieldgen::{sample, FieldRealization, FieldSpec, NoiseModelConfig, TimeGrid};
use crate::model::{DensityMatrix, VSystem, C64, GROUND, LEVEL_2, LEVEL_3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegratorConfig {
    /// RK4 steps per field sample interval.
    pub substeps: usize,
    /// A state is recorded at every `record_stride`-th field sample.
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            substeps: 1,
            record_stride: 1,
        }
    }
}

/// States of one realization at the recorded times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub seed: u64,
}

/// Largest admissible RK4 step: min(2π/ω_max/40, τ_d/20).
pub fn max_step(sys: &VSystem, tau_d: f64) -> f64 {
    let mut limit = tau_d / 20.0;
    let w = sys.max_level_freq().abs();
    if w > 0.0 {
        limit = limit.min(std::f64::consts::TAU / w / 40.0);
    }
    limit
}

fn recorded_indices(len: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..len).step_by(stride)
}

/// Integrates one realization from |g⟩⟨g| at the first grid time.
pub fn propagate(
    sys: &VSystem,
    field: &FieldRealization,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if cfg.substeps == 0 || cfg.record_stride == 0 {
        return Err(Error::pre("substeps and record stride must be positive"));
    }
    let grid = field.grid;
    let h = grid.step / cfg.substeps as f64;
    let limit = max_step(sys, field.tau_d);
    if h > limit * (1.0 + 1e-12) {
        return Err(Error::pre(format!(
            "integrator step {h} fs exceeds the limit {limit} fs"
        )));
    }
    let env = field.envelope_samples();
    let [m2, m3] = sys.dipole_rates();
    let d2 = sys.transition_freq(0) - field.carrier;
    let d3 = sys.transition_freq(1) - field.carrier;
    let w = sys.levels();

    let coupling = |t: f64, e: C64| -> Matrix3<C64> {
        let mut v = Matrix3::zeros();
        let a2 = -m2 * e * C64::from_polar(1.0, d2 * t);
        let a3 = -m3 * e * C64::from_polar(1.0, d3 * t);
        v[(LEVEL_2, GROUND)] = a2;
        v[(LEVEL_3, GROUND)] = a3;
        v[(GROUND, LEVEL_2)] = a2.conj();
        v[(GROUND, LEVEL_3)] = a3.conj();
        v
    };
    let minus_i = C64::new(0.0, -1.0);
    let rhs = |v: &Matrix3<C64>, r: &Matrix3<C64>| (v * r - r * v) * minus_i;
    let to_lab = |t: f64, r: &Matrix3<C64>| {
        DensityMatrix::new(Matrix3::from_fn(|m, n| {
            r[(m, n)] * C64::from_polar(1.0, -(w[m] - w[n]) * t)
        }))
    };

    let mut rho = DensityMatrix::ground().entries;
    let capacity = grid.len.div_ceil(cfg.record_stride);
    let mut times = Vec::with_capacity(capacity);
    let mut states = Vec::with_capacity(capacity);
    let mut step = 0usize;
    for n in 0..grid.len {
        if n % cfg.record_stride == 0 {
            let t = grid.time(n);
            times.push(t);
            states.push(to_lab(t, &rho));
        }
        if n + 1 == grid.len {
            break;
        }
        let t_n = grid.time(n);
        let (e0, e1) = (env[n], env[n + 1]);
        let at = |k: f64| e0 + (e1 - e0) * (k / cfg.substeps as f64);
        for s in 0..cfg.substeps {
            let t = t_n + h * s as f64;
            let k = s as f64;
            let v0 = coupling(t, at(k));
            let vm = coupling(t + 0.5 * h, at(k + 0.5));
            let v1 = coupling(t + h, at(k + 1.0));
            let k1 = rhs(&v0, &rho);
            let k2 = rhs(&vm, &(rho + k1 * C64::new(0.5 * h, 0.0)));
            let k3 = rhs(&vm, &(rho + k2 * C64::new(0.5 * h, 0.0)));
            let k4 = rhs(&v1, &(rho + k3 * C64::new(h, 0.0)));
            rho += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
            step += 1;
            if !rho.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite {
                    step,
                    seed: field.seed,
                });
            }
        }
    }
    Ok(Trajectory {
        times,
        states,
        seed: field.seed,
    })
}

/// Ensemble mean with per-time standard errors of ρ₂₂, ρ₃₃, Re ρ₂₃, Im ρ₂₃.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean_states: Vec<DensityMatrix>,
    pub n: usize,
    pub stderr: Vec<[f64; 4]>,
    pub master_seed: u64,
}

struct StateSums {
    sum: Vec<Matrix3<C64>>,
    sum_sq: Vec<[f64; 4]>,
}

fn observables(r: &DensityMatrix) -> [f64; 4] {
    let c = r.entries[(LEVEL_2, LEVEL_3)];
    [r.population(LEVEL_2), r.population(LEVEL_3), c.re, c.im]
}

/// Averages `n` trajectories, realization k seeded by
/// `realization_seed(master_seed, k)`, on a pool of `workers` threads
/// (0 = all cores). The reduction tree depends only on `n`, so the result
/// is bit-identical for every worker count.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_run(
    sys: &VSystem,
    spec: &FieldSpec,
    noise: &NoiseModelConfig,
    n: usize,
    grid: &TimeGrid,
    master_seed: u64,
    workers: usize,
    cfg: &IntegratorConfig,
) -> Result<EnsembleResult> {
    if n < 2 {
        return Err(Error::pre("an ensemble needs at least 2 realizations"));
    }
    let map = |k: usize| -> Result<StateSums> {
        let seed = realization_seed(master_seed, k as u64);
        let wrap = |e: Error| Error::Realization {
            index: k as u64,
            seed,
            source: Box::new(e),
        };
        let field = sample(spec, noise, grid, seed).map_err(wrap)?;
        let traj = propagate(sys, &field, cfg).map_err(wrap)?;
        let sum_sq = traj
            .states
            .iter()
            .map(|s| observables(s).map(|x| x * x))
            .collect();
        Ok(StateSums {
            sum: traj.states.into_iter().map(|s| s.entries).collect(),
            sum_sq,
        })
    };
    let merge = |mut a: StateSums, b: StateSums| {
        for (x, y) in a.sum.iter_mut().zip(&b.sum) {
            *x += y;
        }
        for (x, y) in a.sum_sq.iter_mut().zip(&b.sum_sq) {
            for (p, q) in x.iter_mut().zip(y) {
                *p += q;
            }
        }
        a
    };
    let sums = with_workers(workers, || pairwise_reduce(n, &map, &merge))??;
    let nf = n as f64;
    let mean_states: Vec<DensityMatrix> = sums
        .sum
        .iter()
        .map(|m| DensityMatrix::new(m / C64::new(nf, 0.0)))
        .collect();
    let stderr = mean_states
        .iter()
        .zip(&sums.sum_sq)
        .map(|(m, sq)| {
            let mean = observables(m);
            let mut se = [0.0; 4];
            for q in 0..4 {
                let var = (sq[q] / nf - mean[q] * mean[q]).max(0.0) * nf / (nf - 1.0);
                se[q] = (var / nf).sqrt();
            }
            se
        })
        .collect();
    Ok(EnsembleResult {
        times: recorded_indices(grid.len, cfg.record_stride)
            .map(|i| grid.time(i))
            .collect(),
        mean_states,
        n,
        stderr,
        master_seed,
    })
}
