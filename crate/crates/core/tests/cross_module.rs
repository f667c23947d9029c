use vcoh_core::dynamics::{ensemble_run, IntegratorConfig};
use vcoh_core::fieldgen::{FieldSpec, NoiseModelConfig, TimeGrid};
use vcoh_core::measures::{c_measure, MeasureRecord};
use vcoh_core::model::{angular, VSystem};
use vcoh_core::perturbative::{
    c_pulse, eta_breakdown, excited_block_cw, excited_block_oracle, excited_block_pulse_longtime,
    turnon_averaged_block, QuadConfig,
};

fn generic() -> VSystem {
    VSystem::from_thz(0.0, [80.0 - 25.0 / 3.0, 80.0 + 25.0 / 3.0], [1.0, 1.0]).unwrap()
}

#[test]
fn post_pulse_block_matches_oracle() {
    let sys = VSystem::from_thz(0.0, [78.5, 81.0], [1.0, 0.7]).unwrap();
    let spec = FieldSpec::pulse(angular(79.0), 0.5, 40.0, 150.0, 100.0).unwrap();
    let t = 100.0 + 8.0 * 150.0;
    let oracle =
        excited_block_oracle(&sys, &spec, 100.0 - 8.0 * 150.0, t, &QuadConfig::default()).unwrap();
    let closed = excited_block_pulse_longtime(&sys, &spec, t).unwrap();
    assert!(
        closed.relative_error(&oracle) < 1e-8,
        "{}",
        closed.relative_error(&oracle)
    );
    assert!((c_measure(&closed).unwrap() - c_pulse(&sys, &spec).unwrap()).abs() < 1e-12);
}

#[test]
fn weak_pulse_ensemble_matches_first_order() {
    let sys = generic();
    let spec = FieldSpec::pulse(angular(80.0), 0.01, 30.0, 40.0, 0.0).unwrap();
    let grid = TimeGrid::spanning(-300.0, 300.0, 0.25).unwrap();
    let cfg = IntegratorConfig {
        substeps: 1,
        record_stride: 100,
    };
    let noise = NoiseModelConfig::matching(&spec);
    let res = ensemble_run(&sys, &spec, &noise, 400, &grid, 3, 0, &cfg).unwrap();
    let (last, err) = (res.mean_states.last().unwrap(), res.stderr.last().unwrap());
    let got = MeasureRecord::from_state(*res.times.last().unwrap(), last);
    let want = excited_block_pulse_longtime(&sys, &spec, 300.0).unwrap();
    for (g, w, e) in [
        (got.pop_2, want.pop_i, err[0]),
        (got.pop_3, want.pop_j, err[1]),
    ] {
        assert!((g - w).abs() < 4.0 * e + 0.03 * w, "{g} vs {w} ± {e}");
    }
}

#[test]
fn eta_terms_sum_to_closed_block() {
    let sys = VSystem::from_thz(0.0, [79.0, 81.5], [1.2, 0.8]).unwrap();
    let spec = FieldSpec::cw(angular(80.0), 0.7, 90.0, 25.0).unwrap();
    let t = 25.0 + 210.0;
    let block = excited_block_cw(&sys, &spec, t).unwrap();
    let eta = eta_breakdown(&sys, &spec, 210.0).unwrap();
    let [c2, c3] = sys.dipole_rates().map(|c| c * 0.7);
    assert!((c2 * c2 * eta.pairs[0].total().re - block.pop_i).abs() < 1e-12 * block.pop_i);
    assert!((c3 * c3 * eta.pairs[1].total().re - block.pop_j).abs() < 1e-12 * block.pop_j);
    assert!(
        ((c2 * c3 * eta.pairs[2].total()).norm() - block.coh_ij.norm()).abs()
            < 1e-12 * block.coh_ij.norm()
    );
}

#[test]
fn averaged_coherence_is_stationary() {
    let sys = generic();
    let spec = FieldSpec::cw(angular(80.0), 1.0, 50.0, 0.0).unwrap();
    let a = turnon_averaged_block(&sys, &spec, 600.0).unwrap();
    let b = turnon_averaged_block(&sys, &spec, 913.7).unwrap();
    assert_eq!(a.coh_ij, b.coh_ij);
    assert!(b.pop_i > a.pop_i);
}
