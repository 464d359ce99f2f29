use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uhe_core::benchmarks::{branin, by_name, deceptive, h1, hartmann3, OBJECTIVE_NAMES};
use uhe_core::{Error, Objective};

fn grid_max(obj: &Objective, lo: [f64; 2], hi: [f64; 2], n: usize) -> (Vec<f64>, f64) {
    let mut best = (vec![], f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..n {
            let x = vec![
                lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64,
            ];
            let v = obj.value(&x).unwrap();
            if v > best.1 {
                best = (x, v);
            }
        }
    }
    best
}

fn full_grid(obj: &Objective) -> (Vec<f64>, f64) {
    let b = obj.bounds();
    grid_max(obj, [b.lower(0), b.lower(1)], [b.upper(0), b.upper(1)], 400)
}

#[test]
fn branin_and_deceptive_optima_match_dense_grid() {
    for obj in [branin(), deceptive(2).unwrap()] {
        let f_star = obj.known_optimum().unwrap().value;
        let (_, g) = full_grid(&obj);
        assert!((g - f_star).abs() <= 1e-3, "{}: grid {g} vs known {f_star}", obj.name());
    }
}

#[test]
fn h1_optimum_matches_refined_grid() {
    let obj = h1();
    let f_star = obj.known_optimum().unwrap().value;
    let (x, g) = full_grid(&obj);
    assert!(g <= f_star + 1e-3);
    let h = 50.0 / 399.0;
    let (_, local) = grid_max(&obj, [x[0] - h, x[1] - h], [x[0] + h, x[1] + h], 400);
    assert!((local - f_star).abs() <= 1e-3, "refined grid {local} vs known {f_star}");
}

#[test]
fn registry_knows_every_name() {
    for name in OBJECTIVE_NAMES {
        let obj = by_name(name, None).unwrap();
        assert_eq!(obj.name(), name);
        assert!(obj.known_optimum().is_some());
    }
    assert_eq!(by_name("deceptive", Some(4)).unwrap().dim(), 4);
    assert!(matches!(by_name("ackley", None), Err(Error::Config(_))));
}

#[test]
fn noise_only_touches_observations() {
    let obj = hartmann3().with_noise_std(0.5).unwrap();
    let x = [0.2, 0.4, 0.6];
    let clean = obj.value(&x).unwrap();
    assert_eq!(clean.to_bits(), obj.value(&x).unwrap().to_bits());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let noisy: Vec<f64> = (0..2000).map(|_| obj.observe(&x, &mut rng).unwrap()).collect();
    let mean = noisy.iter().sum::<f64>() / noisy.len() as f64;
    let sd = (noisy.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (noisy.len() - 1) as f64).sqrt();
    assert!((mean - clean).abs() < 0.05 && (sd - 0.5).abs() < 0.05);

    let quiet = hartmann3();
    let mut a = ChaCha8Rng::seed_from_u64(1);
    let b = a.clone();
    assert_eq!(quiet.observe(&x, &mut a).unwrap(), clean);
    assert_eq!(a, b);
}

#[test]
fn out_of_bounds_and_failing_objectives_error() {
    assert!(branin().value(&[11.0, 0.0]).is_err());
    let failing = Objective::fallible("flaky", uhe_core::Bounds::unit(1), |x: &[f64]| {
        if x[0] > 0.5 {
            Err("sensor offline".to_string())
        } else {
            Ok(x[0])
        }
    });
    assert!(matches!(failing.value(&[0.7]), Err(Error::Objective { .. })));
    let nan = Objective::new("nan", uhe_core::Bounds::unit(1), |_| f64::NAN);
    assert!(nan.value(&[0.1]).is_err());
}
