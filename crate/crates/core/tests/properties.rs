use proptest::prelude::*;

use juliaspec::chain::{row, sample, Base, ProbParam, RngStream};
use juliaspec::numeration::{
    binary_decode, binary_encode, binary_increment, transductor_trace, zeckendorf_decode,
    zeckendorf_encode, zeckendorf_increment, ZeckendorfWord,
};
use juliaspec::qseq::QOrbit;
use juliaspec::Complex64;

fn base() -> impl Strategy<Value = Base> {
    prop_oneof![Just(Base::Binary), Just(Base::Fibonacci)]
}

proptest! {
    #[test]
    fn binary_round_trip(n in any::<u64>()) {
        prop_assert_eq!(binary_decode(&binary_encode(n)).unwrap(), n);
        if n < u64::MAX {
            prop_assert_eq!(binary_decode(&binary_increment(&binary_encode(n))).unwrap(), n + 1);
        }
    }

    #[test]
    fn zeckendorf_round_trip(n in 0u64..(1 << 62)) {
        let w = zeckendorf_encode(n);
        prop_assert_eq!(zeckendorf_decode(&w).unwrap(), n);
        prop_assert_eq!(ZeckendorfWord::from_digits(w.digits().to_vec()).unwrap(), w.clone());
        prop_assert_eq!(zeckendorf_increment(&w), zeckendorf_encode(n + 1));
        let path = transductor_trace(&w).unwrap();
        prop_assert_eq!(path.printed_order().len(), path.reading_order().len());
    }

    #[test]
    fn rows_are_stochastic(b in base(), n in 0u64..(1 << 40), p in 0.01f64..0.99) {
        let r = row(b, n, ProbParam::new(p).unwrap());
        prop_assert!((r.sum() - 1.0).abs() < 1e-12);
        prop_assert!(r.entries.iter().all(|&(t, v)| v > 0.0 && t <= n + 1));
        prop_assert!(r.entries.windows(2).all(|w| w[0].0 < w[1].0));
        prop_assert_eq!(r.get(n), 1.0 - p);
    }

    #[test]
    fn samples_land_in_row_support(b in base(), n in 0u64..100_000, p in 0.05f64..0.95, seed in any::<u64>()) {
        let q = ProbParam::new(p).unwrap();
        let mut rng = RngStream::new(seed);
        let r = row(b, n, q);
        for _ in 0..20 {
            let t = sample(b, n, q, &mut rng);
            prop_assert!(r.get(t) > 0.0, "sampled {} from {}", t, n);
        }
    }

    #[test]
    fn q_is_multiplicative_over_digits(a in 0u64..512, b in 0u64..512, re in -1.0f64..1.0, im in -1.0f64..1.0) {
        // q_(m+n) = q_m q_n whenever the binary digits of m and n are disjoint
        let (m, n) = (a & !b, b & !a);
        let mut orbit = QOrbit::new(Base::Binary, Complex64::new(re, im), ProbParam::new(0.6).unwrap());
        if let (Ok(x), Ok(y), Ok(z)) = (orbit.q(m), orbit.q(n), orbit.q(m + n)) {
            prop_assert!((x * y - z).norm() <= 1e-12 * z.norm().max(1.0));
        }
    }
}
