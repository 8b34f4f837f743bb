use std::time::Instant;

use thinlayer_core::mms::{order_2d, order_3d};
use thinlayer_core::thermo::ThermoParams;

#[test]
fn layer_solver_is_second_order() {
    let t0 = Instant::now();
    let r = order_3d(ThermoParams::default(), 1.0, 0.25, 32, 8, 0.05).unwrap();
    eprintln!("3d: {:?} order {:.3} in {:.1?}", r, r.order(), t0.elapsed());
    assert!((1.7..=2.3).contains(&r.order()), "order {}", r.order());
}

#[test]
fn planar_solver_is_second_order() {
    let t0 = Instant::now();
    let r = order_2d(ThermoParams::default(), 1.0, 32, 0.1).unwrap();
    eprintln!("2d: {:?} order {:.3} in {:.1?}", r, r.order(), t0.elapsed());
    assert!((1.7..=2.3).contains(&r.order()), "order {}", r.order());
}
