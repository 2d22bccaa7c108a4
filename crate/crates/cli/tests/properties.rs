use std::path::Path;

use bclp_cli::pgm::{decode, encode, GrayImage};
use bclp_cli::phantom::{binary_gratings, disk, from_image, random};
use bclp_cli::RunConfig;
use bclp_core::make_grid;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(
        p in 0.1f64..30.0,
        q in 0.5f64..3.0,
        eps in 0.0f64..0.5,
        eta in 1e-4f64..10.0,
        iters in 1usize..5000,
        bins in 1usize..200,
    ) {
        let mut cfg = RunConfig::default();
        for (k, v) in [
            ("loss.p", p.to_string()),
            ("loss.q", q.to_string()),
            ("tolerance.value", eps.to_string()),
            ("optimizer.eta", eta.to_string()),
            ("optimizer.max_iters", iters.to_string()),
            ("output.histogram_bins", bins.to_string()),
        ] {
            cfg.set(k, &v).unwrap();
        }
        let back = RunConfig::parse_text(&cfg.to_text(), "round trip", None).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn pgm_round_trips(width in 1usize..20, height in 1usize..20, maxval in 1u16..=65535, seed in any::<u64>()) {
        let pixels = (0..width * height)
            .map(|i| ((seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) >> 17) % (maxval as u64 + 1)) as u16)
            .collect();
        let img = GrayImage { width, height, maxval, pixels };
        prop_assert_eq!(decode(&encode(&img), Path::new("mem")).unwrap(), img);
    }

    #[test]
    fn binary_phantoms_stay_binary(n in 4usize..40, periods in 0.5f64..8.0, radius in 0.0f64..0.1) {
        let grid = make_grid(n, n, 1, 0.002).unwrap();
        for f in [binary_gratings(&grid, periods), disk(&grid, radius, 1.0)] {
            prop_assert!(f.values().iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }

    #[test]
    fn random_phantom_is_seeded(n in 2usize..24, seed in any::<u64>()) {
        let grid = make_grid(n, n, 1, 0.002).unwrap();
        let a = random(&grid, seed);
        prop_assert_eq!(&a, &random(&grid, seed));
        prop_assert!(a.values().iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn same_size_image_is_copied(n in 1usize..16, seed in any::<u64>()) {
        let pixels: Vec<u16> = (0..n * n).map(|i| ((seed >> (i % 56)) & 0xff) as u16).collect();
        let img = GrayImage { width: n, height: n, maxval: 255, pixels };
        let grid = make_grid(n, n, 1, 0.002).unwrap();
        let f = from_image(&grid, &img);
        // the top image row is the highest y
        for j in 0..n {
            for i in 0..n {
                let expect = img.pixels[(n - 1 - j) * n + i] as f64 / 255.0;
                prop_assert!((f.at(i, j, 0) - expect).abs() < 1e-12);
            }
        }
    }
}
