//! The three-level V system and its driven Hamiltonian.
//!
//! Units: ħ = 1, times in fs, every frequency stored as an angular rate in
//! rad/fs. Basis order is always (|g⟩, |2⟩, |3⟩).

use std::f64::consts::TAU;

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Index of the ground state in the (g, 2, 3) basis.
pub const GROUND: usize = 0;
/// Index of the lower excited level.
pub const LEVEL_2: usize = 1;
/// Index of the upper excited level.
pub const LEVEL_3: usize = 2;

/// Ordinary frequency in THz to angular frequency in rad/fs.
pub fn angular(nu_thz: f64) -> f64 {
    TAU * nu_thz * 1e-3
}

/// Level structure and couplings of the V system.
///
/// `dipole_rates[k]` is μ_k ε₀/ħ at unit field amplitude, in rad/fs. The
/// actual field strength enters as a dimensionless multiplier carried by the
/// field description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VSystem {
    ground_freq: f64,
    excited_freqs: [f64; 2],
    dipole_rates: [f64; 2],
}

impl VSystem {
    pub fn new(ground_freq: f64, excited_freqs: [f64; 2], dipole_rates: [f64; 2]) -> Result<Self> {
        let finite = ground_freq.is_finite()
            && excited_freqs.iter().all(|w| w.is_finite())
            && dipole_rates.iter().all(|d| d.is_finite());
        if !finite {
            return Err(Error::invalid("VSystem", "parameters must be finite"));
        }
        if !(excited_freqs[0] < excited_freqs[1]) {
            return Err(Error::invalid(
                "VSystem",
                "excited frequencies must be strictly ascending",
            ));
        }
        if !(excited_freqs[0] > ground_freq) {
            return Err(Error::invalid(
                "VSystem",
                "excited levels must lie above the ground level",
            ));
        }
        if dipole_rates.iter().any(|&d| d <= 0.0) {
            return Err(Error::invalid("VSystem", "dipole rates must be positive"));
        }
        Ok(Self {
            ground_freq,
            excited_freqs,
            dipole_rates,
        })
    }

    /// Builds a system from ordinary frequencies in THz. Couplings are also
    /// given in THz and converted with [`angular`].
    pub fn from_thz(ground: f64, excited: [f64; 2], couplings: [f64; 2]) -> Result<Self> {
        Self::new(
            angular(ground),
            [angular(excited[0]), angular(excited[1])],
            [angular(couplings[0]), angular(couplings[1])],
        )
    }

    /// Ground at zero, excited pair placed symmetrically around `center`
    /// with splitting `split` (both rad/fs) and equal couplings.
    pub fn symmetric(center: f64, split: f64, dipole_rate: f64) -> Result<Self> {
        Self::new(
            0.0,
            [center - 0.5 * split, center + 0.5 * split],
            [dipole_rate, dipole_rate],
        )
    }

    pub fn ground_freq(&self) -> f64 {
        self.ground_freq
    }

    pub fn excited_freqs(&self) -> [f64; 2] {
        self.excited_freqs
    }

    pub fn dipole_rates(&self) -> [f64; 2] {
        self.dipole_rates
    }

    /// Level energies in basis order.
    pub fn levels(&self) -> [f64; 3] {
        [
            self.ground_freq,
            self.excited_freqs[0],
            self.excited_freqs[1],
        ]
    }

    /// ω_kg for excited level `k` ∈ {0, 1} (level 2 and level 3).
    pub fn transition_freq(&self, k: usize) -> f64 {
        self.excited_freqs[k] - self.ground_freq
    }

    /// ω₃₂, the excited-state splitting.
    pub fn splitting(&self) -> f64 {
        self.excited_freqs[1] - self.excited_freqs[0]
    }

    /// Carrier frequency that excites both transitions equally.
    pub fn center_carrier(&self) -> f64 {
        0.5 * (self.transition_freq(0) + self.transition_freq(1))
    }

    /// Largest magnitude level frequency.
    pub fn max_level_freq(&self) -> f64 {
        self.levels().iter().fold(0.0_f64, |m, w| m.max(w.abs()))
    }

    pub fn scaled_couplings(&self, factor: f64) -> Self {
        Self {
            dipole_rates: [self.dipole_rates[0] * factor, self.dipole_rates[1] * factor],
            ..*self
        }
    }
}

/// τ_c = 2π/ω₃₂.
pub fn characteristic_time(sys: &VSystem) -> Result<f64> {
    let split = sys.splitting();
    if split == 0.0 {
        return Err(Error::Degenerate("characteristic time is infinite"));
    }
    Ok(TAU / split)
}

/// Driven Hamiltonian for complex analytic field value `field`.
///
/// The field enters the excitation entries (k, g) and its conjugate the
/// de-excitation entries (g, k), so that an e^{-iω₀t} carrier drives the
/// g → k transitions resonantly.
pub fn build_hamiltonian(sys: &VSystem, field: C64) -> Matrix3<C64> {
    let [wg, w2, w3] = sys.levels();
    let [d2, d3] = sys.dipole_rates;
    let mut h = Matrix3::from_diagonal(&nalgebra::Vector3::new(
        C64::new(wg, 0.0),
        C64::new(w2, 0.0),
        C64::new(w3, 0.0),
    ));
    h[(LEVEL_2, GROUND)] = -field * d2;
    h[(LEVEL_3, GROUND)] = -field * d3;
    h[(GROUND, LEVEL_2)] = -field.conj() * d2;
    h[(GROUND, LEVEL_3)] = -field.conj() * d3;
    h
}

/// 3×3 density matrix in the (g, 2, 3) basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    pub entries: Matrix3<C64>,
}

impl DensityMatrix {
    pub fn new(entries: Matrix3<C64>) -> Self {
        Self { entries }
    }

    /// |g⟩⟨g|
    pub fn ground() -> Self {
        let mut m = Matrix3::zeros();
        m[(GROUND, GROUND)] = C64::new(1.0, 0.0);
        Self { entries: m }
    }

    /// Full state whose excited manifold is `block`, the remaining weight in
    /// |g⟩ and no ground/excited coherence.
    pub fn from_excited(block: &ExcitedBlock) -> Self {
        let mut m = Matrix3::zeros();
        m[(GROUND, GROUND)] = C64::new(1.0 - block.pop_i - block.pop_j, 0.0);
        m[(LEVEL_2, LEVEL_2)] = C64::new(block.pop_i, 0.0);
        m[(LEVEL_3, LEVEL_3)] = C64::new(block.pop_j, 0.0);
        m[(LEVEL_2, LEVEL_3)] = block.coh_ij;
        m[(LEVEL_3, LEVEL_2)] = block.coh_ij.conj();
        Self { entries: m }
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// Largest entrywise |ρ_ij − ρ*_ji|.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.entries - self.entries.adjoint();
        d.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn population(&self, k: usize) -> f64 {
        self.entries[(k, k)].re
    }

    pub fn excited_block(&self) -> ExcitedBlock {
        ExcitedBlock {
            pop_i: self.entries[(LEVEL_2, LEVEL_2)].re,
            pop_j: self.entries[(LEVEL_3, LEVEL_3)].re,
            coh_ij: self.entries[(LEVEL_2, LEVEL_3)],
        }
    }
}

/// Excited-manifold sub-block: populations ρ₂₂, ρ₃₃ and coherence ρ₂₃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitedBlock {
    pub pop_i: f64,
    pub pop_j: f64,
    pub coh_ij: C64,
}

impl ExcitedBlock {
    pub fn zero() -> Self {
        Self {
            pop_i: 0.0,
            pop_j: 0.0,
            coh_ij: C64::new(0.0, 0.0),
        }
    }

    pub fn population_sum(&self) -> f64 {
        self.pop_i + self.pop_j
    }

    /// pop_i·pop_j − |coh|² ≥ −1e-10·max(pop)²
    pub fn is_psd(&self) -> bool {
        let scale = self.pop_i.abs().max(self.pop_j.abs());
        let tol = 1e-10 * scale * scale;
        self.pop_i >= -tol
            && self.pop_j >= -tol
            && self.pop_i * self.pop_j - self.coh_ij.norm_sqr() >= -tol
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            pop_i: self.pop_i * factor,
            pop_j: self.pop_j * factor,
            coh_ij: self.coh_ij * factor,
        }
    }

    /// Largest entry difference relative to the largest entry of `reference`.
    /// Two exactly-zero blocks compare as equal.
    pub fn relative_error(&self, reference: &ExcitedBlock) -> f64 {
        let diff = (self.pop_i - reference.pop_i)
            .abs()
            .max((self.pop_j - reference.pop_j).abs())
            .max((self.coh_ij - reference.coh_ij).norm());
        let scale = reference
            .pop_i
            .abs()
            .max(reference.pop_j.abs())
            .max(reference.coh_ij.norm());
        if diff == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sys() -> VSystem {
        VSystem::new(0.1, [1.0, 1.2], [0.3, 0.7]).unwrap()
    }

    #[test]
    fn angular_values() {
        assert_eq!(angular(0.0), 0.0);
        assert_relative_eq!(angular(19.0), 0.119381, max_relative = 5e-6);
        assert_relative_eq!(angular(529.0), 3.32380, max_relative = 5e-6);
    }

    #[test]
    fn free_hamiltonian_is_diagonal() {
        let h = build_hamiltonian(&sys(), C64::new(0.0, 0.0));
        for r in 0..3 {
            for c in 0..3 {
                if r != c {
                    assert_eq!(h[(r, c)], C64::new(0.0, 0.0));
                }
            }
        }
        assert_eq!(h[(0, 0)].re, 0.1);
        assert_eq!(h[(1, 1)].re, 1.0);
        assert_eq!(h[(2, 2)].re, 1.2);
    }

    #[test]
    fn conjugate_placement() {
        let s = VSystem::new(0.0, [1.0, 2.0], [1.0, 1.0]).unwrap();
        let h = build_hamiltonian(&s, C64::new(0.0, 1.0));
        assert_eq!(h[(LEVEL_2, GROUND)], C64::new(0.0, -1.0));
        assert_eq!(h[(GROUND, LEVEL_2)], C64::new(0.0, 1.0));
        assert_eq!(h[(LEVEL_2, LEVEL_3)], C64::new(0.0, 0.0));
    }

    #[test]
    fn characteristic_times() {
        let s = VSystem::symmetric(1.0, 0.10472, 1e-3).unwrap();
        assert_relative_eq!(characteristic_time(&s).unwrap(), 60.0, max_relative = 1e-4);
        let s = VSystem::symmetric(10.0, TAU, 1e-3).unwrap();
        assert_relative_eq!(characteristic_time(&s).unwrap(), 1.0, max_relative = 1e-12);
        let s = VSystem::from_thz(0.0, [510.0, 529.0], [1.0, 1.0]).unwrap();
        assert_relative_eq!(
            characteristic_time(&s).unwrap(),
            1000.0 / 19.0,
            max_relative = 1e-9
        );
        assert_relative_eq!(1000.0 / 19.0, 52.63, max_relative = 1e-4);
    }

    #[test]
    fn invalid_systems() {
        assert!(VSystem::new(0.0, [1.0, 1.0], [1.0, 1.0]).is_err());
        assert!(VSystem::new(0.0, [1.2, 1.0], [1.0, 1.0]).is_err());
        assert!(VSystem::new(1.5, [1.0, 2.0], [1.0, 1.0]).is_err());
        assert!(VSystem::new(0.0, [1.0, 2.0], [0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn hamiltonian_hermitian(re in -1e3..1e3f64, im in -1e3..1e3f64) {
            let h = build_hamiltonian(&sys(), C64::new(re, im));
            prop_assert_eq!(h, h.adjoint());
        }

        #[test]
        fn tau_c_times_split(center in 0.5..5.0f64, split in 1e-4..0.4f64) {
            let s = VSystem::symmetric(center, split, 1.0).unwrap();
            let tc = characteristic_time(&s).unwrap();
            prop_assert!((tc * s.splitting() - TAU).abs() < 1e-12);
        }

        #[test]
        fn angular_linear(a in -1e3..1e3f64, b in -1e3..1e3f64) {
            prop_assert!((angular(a + b) - angular(a) - angular(b)).abs() < 1e-12);
        }
    }
}
