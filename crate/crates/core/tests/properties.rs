use proptest::prelude::*;

use rndcnn::data::{augment, flip_horizontal, AugmentConfig, ImageSample};
use rndcnn::layers::{relu_forward, softmax, ConvLayer, PoolLayer};
use rndcnn::metrics::{concordance_auc, roc_auc, ConfusionMatrix};
use rndcnn::oracle::naive_conv;
use rndcnn::{Rng, Tensor};

fn tensor(shape: Vec<usize>, seed: u64, scale: f64) -> Tensor<f64> {
    let mut rng = Rng::new(seed);
    Tensor::from_fn(&shape, |_| scale * rng.uniform(-1.0, 1.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_sum_to_one(rows in 1usize..6, k in 2usize..8, seed in any::<u64>(), scale in 0.1f64..60.0) {
        let p = softmax(&tensor(vec![rows, k], seed, scale)).unwrap();
        for r in 0..rows {
            let row = p.row(r);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn relu_is_idempotent_and_nonnegative(n in 1usize..50, seed in any::<u64>()) {
        let x = tensor(vec![n], seed, 3.0);
        let y = relu_forward(&x);
        prop_assert_eq!(relu_forward(&y), y.clone());
        prop_assert!(y.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn pool_picks_window_maxima(h in 2usize..9, w in 2usize..9, c in 1usize..4, seed in any::<u64>()) {
        let x = tensor(vec![1, h, w, c], seed, 1.0);
        let (y, _) = PoolLayer.forward(&x).unwrap();
        prop_assert_eq!(y.shape(), &[1, h / 2, w / 2, c][..]);
        for i in 0..h / 2 {
            for j in 0..w / 2 {
                for ch in 0..c {
                    let at = |yy: usize, xx: usize| x.data()[(yy * w + xx) * c + ch];
                    let m = at(2 * i, 2 * j).max(at(2 * i, 2 * j + 1)).max(at(2 * i + 1, 2 * j)).max(at(2 * i + 1, 2 * j + 1));
                    prop_assert_eq!(y.data()[(i * (w / 2) + j) * c + ch], m);
                }
            }
        }
    }

    #[test]
    fn conv_matches_naive(n in 1usize..3, h in 1usize..7, w in 1usize..7, c in 1usize..5, o in 1usize..5, seed in any::<u64>()) {
        let layer = ConvLayer::new(tensor(vec![3, 3, c, o], seed, 1.0), tensor(vec![o], seed ^ 1, 1.0)).unwrap();
        let x = tensor(vec![n, h, w, c], seed ^ 2, 1.0);
        let fast = layer.forward(&x).unwrap();
        let slow = naive_conv(&x, &layer.kernel, &layer.bias).unwrap();
        for (a, b) in fast.data().iter().zip(slow.data()) {
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1e-8) + 1e-12);
        }
    }

    #[test]
    fn conv_is_linear_in_input_without_bias(seed in any::<u64>(), k in -4i32..4) {
        // power-of-two scaling commutes with every rounding step
        let layer = ConvLayer::new(tensor(vec![3, 3, 2, 3], seed, 1.0), Tensor::zeros(&[3]).unwrap()).unwrap();
        let x = tensor(vec![1, 5, 4, 2], seed ^ 3, 1.0);
        let s = 2f64.powi(k);
        prop_assert_eq!(layer.forward(&x.scale(s)).unwrap(), layer.forward(&x).unwrap().scale(s));
    }

    #[test]
    fn flip_is_an_involution(h in 1usize..8, w in 1usize..8, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let img = Tensor::from_fn(&[h, w, 3], |_| rng.unit() as f32).unwrap();
        prop_assert_eq!(flip_horizontal(&flip_horizontal(&img)), img);
    }

    #[test]
    fn augmentation_stays_in_range(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let sample = ImageSample { pixels: Tensor::from_fn(&[12, 12, 3], |_| rng.unit() as f32).unwrap(), label: 0 };
        let out = augment(&sample, &AugmentConfig::default(), &mut rng);
        prop_assert_eq!(out.pixels.shape(), sample.pixels.shape());
        prop_assert!(out.pixels.data().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(out.label, 0);
    }

    #[test]
    fn confusion_matches_direct_count(pairs in prop::collection::vec((0usize..4, 0usize..4), 0..60)) {
        let (truth, pred): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let cm = ConfusionMatrix::new(&truth, &pred, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let direct = pairs.iter().filter(|&&(t, p)| t == i && p == j).count() as u64;
                prop_assert_eq!(cm.get(i, j), direct);
            }
            prop_assert_eq!(cm.binary(i).total(), pairs.len() as u64);
        }
    }

    #[test]
    fn trapezoid_equals_concordance(scores in prop::collection::vec(0u8..5, 2..40), flags in prop::collection::vec(any::<bool>(), 40)) {
        let mut truths: Vec<bool> = flags[..scores.len()].to_vec();
        truths[0] = true;
        truths[1] = false;
        let s: Vec<f64> = scores.iter().map(|&v| v as f64 / 4.0).collect();
        let roc = roc_auc(&s, &truths).unwrap();
        prop_assert_eq!(roc.auc, concordance_auc(&s, &truths).unwrap());
        for pair in roc.points.windows(2) {
            prop_assert!(pair[1].fpr >= pair[0].fpr && pair[1].tpr >= pair[0].tpr);
            prop_assert!(pair[1].threshold < pair[0].threshold);
        }
    }
}
