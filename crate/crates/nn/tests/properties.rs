use fran_nn::{Activation, AdamState, Mlp, Topology};
use ndarray::Array2;
use proptest::prelude::*;

fn topo(input: usize, output: usize) -> Topology {
    Topology {
        input,
        hidden: vec![7, 5],
        output,
        hidden_activation: Activation::Relu,
        output_activation: Activation::Sigmoid,
    }
}

proptest! {
    #[test]
    fn forward_is_pure(seed in any::<u64>(), x in prop::collection::vec(-5.0f64..5.0, 4)) {
        let net = Mlp::init(&topo(4, 3), seed);
        let a = net.predict(&x).unwrap();
        let b = net.predict(&x).unwrap();
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn adam_keeps_shapes_and_finiteness(
        seed in any::<u64>(),
        scale in prop::sample::select(vec![1e-8, 1.0, 1e6, 1e12]),
        steps in 1usize..20,
    ) {
        let mut net = Mlp::init(&topo(3, 2), seed);
        let layout = net.layout();
        let mut opt = AdamState::new(net.parameter_count(), 1e-3);
        let input = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64 - j as f64) * 0.3);
        for _ in 0..steps {
            let (_, cache) = net.forward_batch(input.view()).unwrap();
            let grad = Array2::from_elem((4, 2), scale);
            let g = net.backward(&cache, &grad).unwrap();
            net.adam_step(&g, &mut opt).unwrap();
        }
        prop_assert_eq!(net.layout(), layout);
        prop_assert!(net.all_finite());
    }
}
