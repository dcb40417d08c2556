use proptest::prelude::*;
use stl_core::autodiff::Tape;
use stl_core::calendar::CalendarStamps;
use stl_core::data::Batch;
use stl_core::models::{make_model, moving_average_matrix, BaselineModel, ModelConfig, Route, Variant};
use stl_core::selfcheck::hourly_stamps;
use stl_core::train::{batch_gradients, AdamState};
use stl_core::{Rng, Tensor};

const B: usize = 2;

fn batch(t: usize, tau: usize, c: usize, seed: u64) -> Batch {
    let mut rng = Rng::new(seed);
    Batch {
        x: Tensor::uniform(&[B, t, c], -2.0, 2.0, &mut rng).unwrap(),
        y: Tensor::uniform(&[B, tau, c], -2.0, 2.0, &mut rng).unwrap(),
        obs_stamps: hourly_stamps(B, t, 0),
        target_stamps: hourly_stamps(B, tau, t),
    }
}

fn plain_batch(t: usize, tau: usize, c: usize, seed: u64) -> Batch {
    Batch {
        obs_stamps: CalendarStamps::empty(B * t),
        target_stamps: CalendarStamps::empty(B * tau),
        ..batch(t, tau, c, seed)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zeroed_side_routes_leave_the_core_route(seed in any::<u64>()) {
        let cfg = ModelConfig::stl(6, 3, 3, 5);
        let mut full = make_model(&cfg, seed).unwrap();
        full.params_mut().zero_prefix("temporal.");
        full.params_mut().zero_prefix("spatial.");
        let mut core = make_model(&cfg.clone().with_routes(&[Route::Core]), seed ^ 7).unwrap();
        for p in core.params_mut().iter_mut() {
            p.value = full.params().by_name(&p.name).unwrap().clone();
        }
        let b = batch(6, 3, 3, seed);
        let a = full.predict(&b.x, &b.obs_stamps, &b.target_stamps).unwrap();
        let c = core.predict(&b.x, &b.obs_stamps, &b.target_stamps).unwrap();
        prop_assert!(a.bit_eq(&c));
    }

    #[test]
    fn inactive_temporal_route_is_inert(seed in any::<u64>()) {
        let mut cfg = ModelConfig::stl(6, 3, 2, 4);
        cfg.theta_t = 5;
        let model = make_model(&cfg, seed).unwrap();
        let mut perturbed = model.clone();
        let mut rng = Rng::new(seed ^ 3);
        for p in perturbed.params_mut().iter_mut().filter(|p| p.name.starts_with("temporal.")) {
            p.value = Tensor::normal(p.value.shape(), 0.0, 1.0, &mut rng).unwrap();
        }
        let b = batch(6, 3, 2, seed);
        let ya = model.predict(&b.x, &b.obs_stamps, &b.target_stamps).unwrap();
        let yb = perturbed.predict(&b.x, &b.obs_stamps, &b.target_stamps).unwrap();
        prop_assert!(ya.bit_eq(&yb));
        let (la, ga) = batch_gradients(&model, &b, None).unwrap();
        let (lb, gb) = batch_gradients(&perturbed, &b, None).unwrap();
        prop_assert_eq!(la.to_bits(), lb.to_bits());
        for ((p, a), g) in model.params().iter().zip(&ga).zip(&gb) {
            let zero = |g: &Option<Tensor>| g.as_ref().is_none_or(|t| t.data().iter().all(|&v| v == 0.0));
            if p.name.starts_with("temporal.") {
                prop_assert!(zero(a) && zero(g), "{} receives gradient", p.name);
            } else {
                prop_assert!(a.as_ref().unwrap().bit_eq(g.as_ref().unwrap()), "{}", p.name);
            }
        }
    }

    #[test]
    fn nlinear_commutes_with_level_shifts(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let cfg = ModelConfig::stl(8, 4, 3, 4).with_variant(Variant::Nlinear);
        let model = make_model(&cfg, seed).unwrap();
        let b = plain_batch(8, 4, 3, seed);
        let y = model.predict(&b.x, &b.obs_stamps, &b.target_stamps).unwrap();
        let ys = model.predict(&b.x.map(|v| v + shift), &b.obs_stamps, &b.target_stamps).unwrap();
        prop_assert!(ys.max_abs_diff(&y.map(|v| v + shift)).unwrap() <= 1e-10);
    }

    #[test]
    fn decomposition_parts_sum_to_the_input(seed in any::<u64>(), t in 2usize..40, kernel in 1usize..30) {
        let kernel = kernel | 1;
        let x = Tensor::uniform(&[2, 3, t], -2.0, 2.0, &mut Rng::new(seed)).unwrap();
        let mut tape = Tape::new();
        let v = tape.constant(x.clone());
        let (trend, rem) = BaselineModel::decompose(&mut tape, &moving_average_matrix(t, kernel), v).unwrap();
        let sum = tape.add(trend, rem).unwrap();
        // x − trend rounds once, so the sum is exact up to that rounding.
        for (a, b) in tape.value(sum).data().iter().zip(x.data()) {
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0));
        }
    }

    #[test]
    fn adam_ignores_zero_gradients(seed in any::<u64>(), lr in 1e-5f64..1e-1) {
        let mut model = make_model(&ModelConfig::stl(4, 2, 2, 3), seed).unwrap();
        let before = model.params().clone();
        let zeros: Vec<Option<Tensor>> =
            before.iter().map(|p| Some(Tensor::zeros(p.value.shape()).unwrap())).collect();
        let mut adam = AdamState::new(model.params());
        for _ in 0..3 {
            adam.step(model.params_mut(), &zeros, lr).unwrap();
        }
        prop_assert!(model.params().bit_eq(&before));
    }
}
