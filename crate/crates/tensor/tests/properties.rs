use proptest::prelude::*;
use stpotr_tensor::{concat, Graph, Tensor};

fn shape_and_axis() -> impl Strategy<Value = (Vec<usize>, usize, usize, usize)> {
    prop::collection::vec(1usize..5, 1..4).prop_flat_map(|shape| {
        let rank = shape.len();
        (Just(shape), 0..rank).prop_flat_map(|(shape, axis)| {
            let len = shape[axis];
            (Just(shape), Just(axis), 0..=len).prop_flat_map(move |(s, a, start)| {
                (Just(s), Just(a), Just(start), start..=len)
            })
        })
    })
}

proptest! {
    #[test]
    fn slice_complement_concat_restores_tensor((shape, axis, start, end) in shape_and_axis(), seed in any::<u64>()) {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|i| (i as f64 + 0.25) * ((seed % 97) as f64 + 1.0)).collect();
        let x = Tensor::new(shape.clone(), data).unwrap();
        let g = Graph::new();
        let v = g.constant(x.clone());
        let len = shape[axis];
        let parts: Vec<_> = [(0, start), (start, end), (end, len)]
            .into_iter()
            .filter(|(a, b)| b > a)
            .map(|(a, b)| v.slice(axis, a, b).unwrap())
            .collect();
        let back = concat(&parts, axis).unwrap();
        prop_assert_eq!(&*back.value(), &x);
    }

    #[test]
    fn permute_then_inverse_is_identity(perm in Just(vec![0usize, 1, 2]).prop_shuffle(), dims in prop::collection::vec(1usize..5, 3)) {
        let n: usize = dims.iter().product();
        let x = Tensor::new(dims, (0..n).map(|i| i as f64).collect()).unwrap();
        let mut inverse = vec![0; 3];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let g = Graph::new();
        let y = g.constant(x.clone()).permute(&perm).unwrap().permute(&inverse).unwrap();
        prop_assert_eq!(&*y.value(), &x);
    }

    #[test]
    fn softmax_is_shift_invariant(xs in prop::collection::vec(-50.0f64..50.0, 1..10), shift in -100.0f64..100.0) {
        let n = xs.len();
        let g = Graph::new();
        let a = g.constant(Tensor::new(vec![n], xs.clone()).unwrap()).softmax(0).unwrap().value();
        let b = g
            .constant(Tensor::new(vec![n], xs.iter().map(|x| x + shift).collect()).unwrap())
            .softmax(0)
            .unwrap()
            .value();
        prop_assert!(a.max_abs_diff(&b) < 1e-12);
    }
}
