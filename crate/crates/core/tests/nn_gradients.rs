mod common;

use mtl::nn::{
    binary_cross_entropy, cross_entropy_loss, fd_gradient, mse_loss, HiddenActivation, Mlp,
    OptimizerState, OutputActivation,
};
use ndarray::Array2;
use proptest::prelude::*;

fn arb_net() -> impl Strategy<Value = (Mlp, Vec<f64>, Vec<f64>)> {
    (
        1usize..=4,
        prop::collection::vec(1usize..=16, 0..=3),
        1usize..=3,
        any::<u64>(),
        prop_oneof![
            Just(HiddenActivation::Tanh),
            Just(HiddenActivation::Sigmoid)
        ],
    )
        .prop_flat_map(|(input, hidden, output, seed, act)| {
            let mut sizes = vec![input];
            sizes.extend(&hidden);
            sizes.push(output);
            let net = Mlp::new(&sizes, act, OutputActivation::Identity, seed).unwrap();
            (
                Just(net),
                prop::collection::vec(-1.0f64..1.0, input),
                prop::collection::vec(-1.0f64..1.0, output),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn backward_matches_central_differences((net, x, t) in arb_net()) {
        let pred = net.forward(&x).unwrap();
        let (_, upstream) = mse_loss(&pred, &t).unwrap();
        let analytic = net.backward(&x, &upstream).unwrap();
        let numeric = fd_gradient(|n| Ok(mse_loss(&n.forward(&x)?, &t)?.0), &net, 1e-6).unwrap();
        let err = analytic.relative_error(&numeric);
        prop_assert!(err < 1e-4, "relative error {err}");
        // entries above the finite-difference noise floor agree one by one
        prop_assert!(analytic.max_relative_error(&numeric, 1e-5) < 1e-4);
    }

    #[test]
    fn batched_forward_matches_loops((net, x, _t) in arb_net()) {
        let batch = Array2::from_shape_vec((1, x.len()), x.clone()).unwrap();
        let y = net.forward_batch(batch.view()).unwrap();
        let oracle = common::loop_forward(&net, &x);
        for (a, b) in y.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sgd_moves_against_the_gradient((net, x, t) in arb_net(), lr in 1e-4f64..1e-1) {
        let pred = net.forward(&x).unwrap();
        let (_, up) = mse_loss(&pred, &t).unwrap();
        let g = net.backward(&x, &up).unwrap();
        let mut stepped = net.clone();
        OptimizerState::sgd(lr).unwrap().step(&mut stepped, &g).unwrap();
        let before = net.weights().iter().flat_map(|w| w.iter().copied()).collect::<Vec<_>>();
        let after = stepped.weights().iter().flat_map(|w| w.iter().copied()).collect::<Vec<_>>();
        let grads = g.weights.iter().flat_map(|w| w.iter().copied()).collect::<Vec<_>>();
        for ((b, a), gw) in before.iter().zip(&after).zip(&grads) {
            prop_assert!((a - (b - lr * gw)).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }
}

#[test]
fn softmax_cross_entropy_gradient() {
    let net = Mlp::new(
        &[3, 6, 4],
        HiddenActivation::Tanh,
        OutputActivation::Softmax,
        21,
    )
    .unwrap();
    let x = [0.2, -0.4, 0.9];
    let target = [0.0, 0.0, 1.0, 0.0];
    let probs = net.forward(&x).unwrap();
    let (_, up) = cross_entropy_loss(&probs, &target).unwrap();
    let analytic = net.backward(&x, &up).unwrap();
    let numeric = fd_gradient(
        |n| Ok(cross_entropy_loss(&n.forward(&x)?, &target)?.0),
        &net,
        1e-6,
    )
    .unwrap();
    assert!(analytic.relative_error(&numeric) < 1e-4);
}

#[test]
fn sigmoid_binary_cross_entropy_gradient() {
    let net = Mlp::new(
        &[2, 5, 3],
        HiddenActivation::Tanh,
        OutputActivation::Sigmoid,
        4,
    )
    .unwrap();
    let x = [0.7, -0.1];
    let labels = [1.0, 0.0, 0.0];
    let c = net.forward(&x).unwrap();
    let (_, up) = binary_cross_entropy(&c, &labels).unwrap();
    let analytic = net.backward(&x, &up).unwrap();
    let numeric = fd_gradient(
        |n| Ok(binary_cross_entropy(&n.forward(&x)?, &labels)?.0),
        &net,
        1e-6,
    )
    .unwrap();
    assert!(analytic.relative_error(&numeric) < 1e-4);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let net = Mlp::new(
        &[3, 32, 32, 32, 1],
        HiddenActivation::Tanh,
        OutputActivation::Identity,
        8,
    )
    .unwrap();
    let path = dir.path().join("net.json");
    net.save(&path).unwrap();
    let back = Mlp::load(&path).unwrap();
    assert_eq!(back, net);
    let first = std::fs::read(&path).unwrap();
    back.save(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    let x = [0.1, 0.5, -0.3];
    assert_eq!(
        back.forward(&x).unwrap()[0].to_bits(),
        net.forward(&x).unwrap()[0].to_bits()
    );
}
