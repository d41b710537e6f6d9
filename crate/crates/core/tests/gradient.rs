mod common;

use bfl_core::network::NetworkParams;
use bfl_core::seeded_rng;
use common::{finite_difference_error, fit_xor, mse, XOR};
use rand::Rng;

#[test]
fn backprop_matches_finite_differences() {
    let mut rng = seeded_rng(11);
    for instance in 0..100 {
        let depth = rng.random_range(1..=3);
        let mut dims = vec![rng.random_range(1..=5)];
        for _ in 0..depth {
            dims.push(rng.random_range(1..=6));
        }
        let mut net = NetworkParams::init(&dims, &mut rng).unwrap();
        // Random biases keep pre-activations off the ReLU kink at zero.
        for l in 0..depth {
            for row in 0..dims[l + 1] {
                net.set_bias(l, row, rng.random_range(-0.5..0.5));
            }
        }
        let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let action = rng.random_range(0..*dims.last().unwrap());
        let target = rng.random_range(-2.0..2.0);
        let (grads, _) = net.td_gradient(&x, action, target).unwrap();
        let err = finite_difference_error(&net, &grads, &x, action, target, 1e-5);
        assert!(
            err < 1e-4,
            "instance {instance} dims {dims:?}: relative error {err:e}"
        );
    }
}

#[test]
fn xor_fit() {
    let mut net = NetworkParams::init(&[2, 8, 1], &mut seeded_rng(5)).unwrap();
    let start = mse(&net, &XOR);
    let curve = fit_xor(&mut net, 0.5, 5000);
    let end = *curve.last().unwrap();
    assert!(end < 0.01, "mse {start} -> {end}");
}

#[test]
fn identical_updates_give_identical_parameters() {
    let run = || {
        let mut net = NetworkParams::init(&[2, 8, 1], &mut seeded_rng(9)).unwrap();
        fit_xor(&mut net, 0.5, 200);
        net.to_json().unwrap()
    };
    assert_eq!(run(), run());
}
