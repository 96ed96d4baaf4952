use proptest::prelude::*;

use fracsvt::bench::{encode_pgm, gen_mask, parse_pgm, sample_count};
use fracsvt::thresholding::{matrix_prox, scalar_prox_general, threshold_general};
use fracsvt::{DenseMatrix, Regime, SamplingMask};

proptest! {
    #[test]
    fn scalar_prox_is_odd_monotone_and_shrinking(
        a in 0.05f64..20.0,
        lam in 1e-3f64..20.0,
        g1 in -30.0f64..30.0,
        g2 in -30.0f64..30.0,
    ) {
        let h1 = scalar_prox_general(a, lam, g1).unwrap();
        let h2 = scalar_prox_general(a, lam, g2).unwrap();
        let t = threshold_general(a, lam).unwrap();

        prop_assert_eq!(scalar_prox_general(a, lam, -g1).unwrap(), -h1);
        prop_assert!(h1.abs() <= g1.abs());
        prop_assert!(h1 == 0.0 || h1.signum() == g1.signum());
        prop_assert_eq!(h1 == 0.0, g1.abs() <= t);
        if g1 <= g2 {
            prop_assert!(h1 <= h2 + 1e-12, "h({g1}) = {h1} > h({g2}) = {h2}");
        }
    }

    #[test]
    fn matrix_prox_never_raises_rank_or_norm(
        rows in 1usize..7,
        cols in 1usize..7,
        seed in any::<u64>(),
        a in 0.1f64..5.0,
        lam in 0.01f64..5.0,
    ) {
        let mut state = seed | 1;
        let y = DenseMatrix::from_fn(rows, cols, |_, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        });
        let t = threshold_general(a, lam).unwrap();
        let x = matrix_prox(&y, a, lam, Regime::General).unwrap();
        let sy = y.singular_values().unwrap();
        let sx = x.singular_values().unwrap();
        prop_assert!(sx.count_above(1e-10) <= sy.count_above(t));
        prop_assert!(x.frobenius_norm() <= y.frobenius_norm() + 1e-10);
    }

    #[test]
    fn generated_masks_have_exact_distinct_counts(
        m in 1usize..30,
        n in 1usize..30,
        sr in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let mask = gen_mask(m, n, sr, seed).unwrap();
        prop_assert_eq!(mask.len(), sample_count(m, n, sr));
        let entries = mask.entries();
        prop_assert!(entries.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(entries.iter().all(|&(i, j)| i < m && j < n));
    }

    #[test]
    fn mask_file_round_trip(m in 1usize..12, n in 1usize..12, sr in 0.0f64..=1.0, seed in any::<u64>()) {
        let mask = gen_mask(m, n, sr, seed).unwrap();
        let mut buf = Vec::new();
        mask.write_to(&mut buf).unwrap();
        let back = SamplingMask::read_from(&buf[..], std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back, mask);
    }

    #[test]
    fn pgm_round_trip_within_quantization(
        pixels in prop::collection::vec(-0.2f64..1.2, 1..60),
        width in 1usize..8,
    ) {
        let h = pixels.len() / width;
        prop_assume!(h > 0);
        let m = DenseMatrix::from_vec(h, width, pixels[..h * width].to_vec()).unwrap();
        let back = parse_pgm(&encode_pgm(&m), std::path::Path::new("mem")).unwrap();
        for (x, y) in m.as_slice().iter().zip(back.as_slice()) {
            prop_assert!((x.clamp(0.0, 1.0) - y).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
