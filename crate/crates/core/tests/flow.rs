use std::sync::Arc;

use zcrit::flow::*;
use zcrit::functions::{Field, Product, RadialBump};
use zcrit::KahlerModel;

#[test]
fn calabi_flow_rounds_the_sphere() {
    let m = KahlerModel::fubini_study_with_level(1, 1.0, 64)
        .unwrap()
        .perturb(Arc::new(RadialBump { coord: 0, m: 2 }), 0.1)
        .unwrap();
    let run = run_flow(&m, 1, FlowParams::default()).unwrap();
    assert!(run.converged);
    assert!(run.last().max_deviation < 1e-4);
    assert!(run.energy_monotone());
    let (z_drift, vol_drift) = run.invariant_drift();
    assert!(z_drift < 1e-8 && vol_drift < 1e-8);
    assert!(round_profile_deviation(&run.final_model).unwrap() < 1e-3);
    // fixed point in both directions: constant curvature and small energy
    let terminal = energy(&run.final_model, 1).unwrap();
    assert!(terminal.energy < 1e-8 && terminal.max_deviation < 1e-4);
}

#[test]
fn j2_flow_on_product_reduces_energy() {
    let cp1 = KahlerModel::fubini_study_with_level(1, 1.0, 10).unwrap();
    let bump: Field = Arc::new(Product(
        Arc::new(RadialBump { coord: 0, m: 2 }),
        Arc::new(RadialBump { coord: 1, m: 2 }),
    ));
    let m = KahlerModel::product(&cp1, &cp1).unwrap().perturb(bump, 0.2).unwrap();
    let params = FlowParams {
        basis_size: 2,
        t_max: 0.25,
        tol: 1e-9,
        ..FlowParams::default()
    };
    let run = run_flow(&m, 2, params).unwrap();
    assert!(run.energy_monotone());
    assert!(run.last().energy < run.trajectory[0].energy / 100.0);
}

#[test]
fn energy_gradient_is_second_order() {
    let m = KahlerModel::fubini_study_with_level(1, 1.0, 32)
        .unwrap()
        .perturb(Arc::new(RadialBump { coord: 0, m: 2 }), 0.1)
        .unwrap();
    let dir: Field = Arc::new(RadialBump { coord: 0, m: 4 });
    let a = energy_gradient_check(&m, 1, dir.clone(), 2e-3).unwrap();
    let b = energy_gradient_check(&m, 1, dir, 1e-3).unwrap();
    let ea = (a.finite_difference - a.predicted).abs();
    let eb = (b.finite_difference - b.predicted).abs();
    assert!(b.relative_error < 1e-4);
    assert!((3.0..5.0).contains(&(ea / eb)), "error ratio {}", ea / eb);
}
