use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tadacap_core::synthgen::{
    gen_dataset, gen_physics_series, gen_stock_series, read_dataset, regime_matches, sample_params_in, write_dataset,
    GenOptions, NoiseMode, PlotStyle, StockCatalog, StockOptions, TrendMode, CANVAS_HEIGHT, CANVAS_WIDTH,
};
use tadacap_core::{DatasetKind, PhysicsParams, StockParams};

fn sd(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn stock_series_is_non_negative(
        mean in 0.01f64..300.0,
        kappa in 0.0f64..=1.0,
        sigma in 0.0f64..3.0,
        trend in -10.0f64..10.0,
        shock_prob in 0.0f64..=1.0,
        shock_sigma in 0.0f64..50.0,
        seed in any::<u64>(),
        relative in any::<bool>(),
        drift in any::<bool>(),
    ) {
        let p = StockParams {
            mean, kappa, sigma, trend, shock_prob, shock_sigma, length: 256, seed,
            noise_mode: if relative { NoiseMode::Relative } else { NoiseMode::Absolute },
            trend_mode: if drift { TrendMode::AnchorDrift } else { TrendMode::Additive },
            shock_regime: false,
        };
        let s = gen_stock_series(&p).unwrap();
        prop_assert_eq!(s.len(), 256);
        prop_assert!(s.iter().all(|v| v.is_finite() && *v >= 0.0));
        prop_assert_eq!(s, gen_stock_series(&p).unwrap());
    }
}

#[test]
fn shock_increments_match_shock_scale() {
    let mut p = StockParams::flat(1e6, 100_001);
    p.shock_prob = 1.0;
    p.shock_sigma = 2.5;
    p.noise_mode = NoiseMode::Absolute;
    p.seed = 17;
    let s = gen_stock_series(&p).unwrap();
    let deltas: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
    let got = sd(&deltas);
    assert!((got / 2.5 - 1.0).abs() < 0.1, "increment std {got}");
}

#[test]
fn noiseless_trend_up_increases() {
    let catalog = StockCatalog::bundled();
    let regime = catalog.get("trend-up").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut p = sample_params_in(regime, &StockOptions::default(), &mut rng, 4);
    p.sigma = 0.0;
    p.shock_prob = 0.0;
    let s = gen_stock_series(&p).unwrap();
    assert!(s.windows(2).skip(1).all(|w| w[1] > w[0]));
}

#[test]
fn generated_params_match_their_regime() {
    let catalog = StockCatalog::bundled();
    let ds = gen_dataset(DatasetKind::Stock, 400, 12, &GenOptions::default()).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for s in &ds {
        let name = s.regime.as_deref().unwrap();
        let params: StockParams = serde_json::from_value(s.params.clone()).unwrap();
        assert!(regime_matches(catalog.get(name).unwrap(), &params), "{} params outside {name}", s.id);
        assert_eq!(gen_stock_series(&params).unwrap(), s.series);
        let regime = catalog.get(name).unwrap();
        let in_bank = |bank: &[String], text: &str| bank.iter().any(|p| text.to_lowercase().contains(&p.to_lowercase()));
        assert!(in_bank(&regime.agnostic, s.agnostic.as_deref().unwrap()));
        assert!(in_bank(&regime.domain, &s.in_domain[0]));
        seen.insert(name.to_string());
    }
    assert_eq!(seen.len(), catalog.regimes.len());
}

#[test]
fn physics_samples_replay_from_params() {
    let ds = gen_dataset(DatasetKind::Physics, 100, 3, &GenOptions::default()).unwrap();
    for s in &ds {
        let params: PhysicsParams = serde_json::from_value(s.params.clone()).unwrap();
        assert_eq!(gen_physics_series(&params).unwrap(), s.series);
        assert!(s.series.len() >= 8);
        let cap = &s.in_domain[0];
        assert!(cap.ends_with('.') && cap.starts_with(|c: char| c.is_uppercase()), "{cap}");
    }
}

#[test]
fn dataset_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = gen_dataset(DatasetKind::Stock, 12, 5, &GenOptions::default()).unwrap();
    write_dataset(dir.path(), &ds, &PlotStyle::default()).unwrap();
    assert_eq!(read_dataset(&dir.path().join("dataset.jsonl")).unwrap(), ds);
    for s in &ds {
        let img = image::open(dir.path().join(s.image_path.as_ref().unwrap())).unwrap();
        assert_eq!((img.width(), img.height()), (CANVAS_WIDTH, CANVAS_HEIGHT));
    }
}
