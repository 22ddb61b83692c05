use iadmm::image::{decode_pgm, encode_pgm};
use iadmm::linsolve::NormalOperator;
use iadmm::metrics::{self, should_stop, StopReason};
use iadmm::prox::{prox_scalar, prox_objective};
use iadmm::vecops;
use iadmm::{degrade, BlurOperator, DegradationSpec, DiffOperator, DiffVariant, Image, StackedOperator};
use proptest::prelude::*;

fn image(max_n: usize) -> impl Strategy<Value = Image> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0..=1.0f64, n * n).prop_map(move |px| Image::new(n, px).unwrap())
    })
}

fn variant() -> impl Strategy<Value = DiffVariant> {
    prop_oneof![Just(DiffVariant::Banded), Just(DiffVariant::Circulant)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vectorize_roundtrip(img in image(12)) {
        let back = Image::devectorize(img.vectorize(), img.n()).unwrap();
        prop_assert_eq!(back, img);
    }

    #[test]
    fn degrade_preserves_mean(img in image(12), size in prop::sample::select(vec![1usize, 3, 5, 7]), sigma in 0.3..4.0f64) {
        let blur = BlurOperator::gaussian(img.n(), size, sigma).unwrap();
        let spec = DegradationSpec { kernel_size: size, kernel_sigma: sigma, ..Default::default() };
        let out = degrade(&img, &spec, &blur).unwrap();
        prop_assert!((out.mean() - img.mean()).abs() <= 1e-10 * img.mean().abs().max(1e-3));
    }

    #[test]
    fn pgm_roundtrip_is_byte_exact((n, raster) in (1usize..10).prop_flat_map(|n| (Just(n), prop::collection::vec(any::<u8>(), n * n)))) {
        let mut bytes = format!("P5\n{n} {n}\n255\n").into_bytes();
        bytes.extend(raster);
        let img = decode_pgm(&bytes).unwrap();
        prop_assert_eq!(encode_pgm(&img), bytes);
    }

    #[test]
    fn t_adjoint_identity(n in 2usize..10, v in variant(), x in prop::collection::vec(-1.0..1.0f64, 200), y in prop::collection::vec(-1.0..1.0f64, 200)) {
        let t = DiffOperator::new(n, v).unwrap();
        let (x, y) = (&x[..t.stacked_len()], &y[..t.edge_len()]);
        let lhs = vecops::dot(&t.apply(x).unwrap(), y);
        let rhs = vecops::dot(x, &t.adjoint(y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn k_adjoint_identity(n in 2usize..12, beta in 0.0..5.0f64, x in prop::collection::vec(-1.0..1.0f64, 288), y in prop::collection::vec(-1.0..1.0f64, 288)) {
        let k = StackedOperator::new(BlurOperator::gaussian(n, 5, 1.2).unwrap(), beta).unwrap();
        let len = k.stacked_len();
        let (x, y) = (&x[..len], &y[..len]);
        let lhs = vecops::dot(&k.apply(x).unwrap(), y);
        let rhs = vecops::dot(x, &k.adjoint(y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn normal_operator_symmetric_positive(x in prop::collection::vec(-1.0..1.0f64, 128), y in prop::collection::vec(-1.0..1.0f64, 128)) {
        let k = StackedOperator::new(BlurOperator::gaussian(8, 3, 1.0).unwrap(), 1.0).unwrap();
        let op = NormalOperator::new(k, DiffOperator::new(8, DiffVariant::Banded).unwrap(), 1.0).unwrap();
        let lhs = vecops::dot(&op.apply(&x).unwrap(), &y);
        let rhs = vecops::dot(&x, &op.apply(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        if vecops::norm(&x) > 0.0 {
            prop_assert!(vecops::dot(&x, &op.apply(&x).unwrap()) > 0.0);
        }
    }

    #[test]
    fn prox_shrinks_and_is_odd(q in prop::sample::select(vec![1.0, 0.5, 0.8, 0.3]), tau in 1e-3..2.0f64, x in -10.0..10.0f64) {
        let y = prox_scalar(q, tau, x).unwrap();
        prop_assert!(y.abs() <= x.abs());
        prop_assert!(y == 0.0 || y.signum() == x.signum());
        prop_assert_eq!(prox_scalar(q, tau, -x).unwrap(), -y);
        // Never worse than either trivial candidate.
        prop_assert!(prox_objective(q, tau, x, y) <= prox_objective(q, tau, x, 0.0));
        prop_assert!(prox_objective(q, tau, x, y) <= prox_objective(q, tau, x, x) + 1e-12);
    }

    #[test]
    fn prox_nonconvex_dead_zone(q in prop::sample::select(vec![0.5, 0.8, 0.3]), tau in 1e-2..2.0f64) {
        // Scanning up from 0, outputs stay zero and then jump past a positive gap.
        let mut first_nonzero = None;
        for i in 1..4000 {
            let x = i as f64 * 1e-3;
            let y = prox_scalar(q, tau, x).unwrap();
            if y != 0.0 {
                first_nonzero = Some(y);
                break;
            }
        }
        if let Some(y) = first_nonzero {
            prop_assert!(y > 1e-3);
        }
        prop_assert_eq!(prox_scalar(q, tau, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn residual_nonnegative_zero_iff_equal(u in prop::collection::vec(-5.0..5.0f64, 6), p in prop::collection::vec(-5.0..5.0f64, 3), du in prop::collection::vec(-1.0..1.0f64, 6)) {
        let r = metrics::residual(&u, &p, &u, &p).unwrap();
        prop_assert_eq!(r, 0.0);
        let moved: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + b).collect();
        let r = metrics::residual(&moved, &p, &u, &p).unwrap();
        prop_assert!(r >= 0.0);
        prop_assert_eq!(r == 0.0, moved == u);
    }

    #[test]
    fn stop_rule_consistency(prev in proptest::option::of(0.0..1.0f64), curr in 0.0..1.0f64, eps in 1e-6..0.5f64, k in 1usize..20, warmup in 0usize..5) {
        let d = should_stop(prev, curr, eps, k, warmup);
        prop_assert_eq!(d, should_stop(prev, curr, eps, k, warmup));
        prop_assert_eq!(d.stop, d.reason.is_some());
        if curr < eps {
            prop_assert_eq!(d.reason, Some(StopReason::ToleranceMet));
        } else if k <= warmup {
            prop_assert!(!d.stop);
        }
    }

    #[test]
    fn snr_monotone_along_path(img in image(8), noise in prop::collection::vec(-1.0..1.0f64, 64)) {
        let n = img.n();
        let far: Vec<f64> = img.pixels().iter().zip(&noise).map(|(a, b)| a + b).collect();
        if img.max() > img.min() && far.as_slice() != img.pixels() {
            let mut last = f64::NEG_INFINITY;
            for s in [1.0, 0.8, 0.5, 0.3, 0.1, 0.01] {
                let px: Vec<f64> = img.pixels().iter().zip(&far).map(|(a, b)| a + s * (b - a)).collect();
                let v = metrics::snr(&img, &Image::new(n, px).unwrap()).unwrap();
                prop_assert!(v > last);
                last = v;
            }
        }
    }
}
