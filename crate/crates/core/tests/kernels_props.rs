mod common;

use mtls_core::experiment::ExperimentRng;
use mtls_core::kernels::{self, kron, qr_partition, spectral_norm, VecPermutation};
use mtls_core::{Config, Matrix};
use proptest::prelude::*;

fn randn(seed: u64, stream: u64, r: usize, c: usize) -> Matrix {
    ExperimentRng::derived(seed, stream).randn_matrix(r, c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn vec_of_product_is_kronecker_action(seed in any::<u64>(), p in 1usize..5, q in 1usize..5, r in 1usize..5, s in 1usize..5) {
        let a = randn(seed, 0, p, q);
        let x = randn(seed, 1, q, r);
        let b = randn(seed, 2, r, s);
        let lhs = kernels::vec(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a, &Config::default()).unwrap() * kernels::vec(&x);
        prop_assert!(common::rel_diff_vec(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn kronecker_commutes_with_abs_and_transpose(seed in any::<u64>(), p in 1usize..5, q in 1usize..5, r in 1usize..5, s in 1usize..5) {
        let cfg = Config::default();
        let a = randn(seed, 0, p, q);
        let b = randn(seed, 1, r, s);
        let k = kron(&a, &b, &cfg).unwrap();
        prop_assert_eq!(kernels::abs(&k), kron(&kernels::abs(&a), &kernels::abs(&b), &cfg).unwrap());
        prop_assert_eq!(k.transpose(), kron(&a.transpose(), &b.transpose(), &cfg).unwrap());
    }

    #[test]
    fn vec_permutation_transposes(seed in any::<u64>(), m in 1usize..7, n in 1usize..7) {
        let c = randn(seed, 0, m, n);
        let pi = VecPermutation::new(m, n);
        prop_assert_eq!(pi.apply(&kernels::vec(&c)), kernels::vec(&c.transpose()));
        let dense = pi.to_dense(&Config::default()).unwrap();
        prop_assert_eq!(&dense * kernels::vec(&c), kernels::vec(&c.transpose()));
    }

    #[test]
    fn qr_partition_reconstructs_and_is_orthogonal(seed in any::<u64>()) {
        let (m, n, n1) = common::random_shape(seed, 50, 30);
        let a = randn(seed, 0, m, n);
        let b = ExperimentRng::derived(seed, 1).randn_vector(m);
        let f = qr_partition(&a, &b, n1, &Config::default()).unwrap();
        let q = f.q().unwrap();
        let mut ab = Matrix::zeros(m, n + 1);
        ab.view_mut((0, 0), (m, n)).copy_from(&a);
        ab.set_column(n, &b);
        let recon = q * f.r_tilde_full();
        prop_assert!((&recon - &ab).norm() <= 1e-12 * ab.norm());
        let orth = q.tr_mul(q) - Matrix::identity(m, m);
        prop_assert!(orth.norm() <= 1e-12 * (m as f64).sqrt());
        prop_assert!(f.r_tilde().diagonal().iter().all(|d| *d >= 0.0));
        prop_assert!(common::rel_diff_vec(&f.apply_qt(&b), &q.tr_mul(&b)) <= 1e-12);
    }

    #[test]
    fn spectral_norm_is_transpose_invariant(seed in any::<u64>(), r in 1usize..12, c in 1usize..12) {
        let cfg = Config::default();
        let m = randn(seed, 0, r, c);
        let a = spectral_norm(&m, &cfg).unwrap();
        let b = spectral_norm(&m.transpose(), &cfg).unwrap();
        prop_assert!(common::rel_diff(a, b) <= 1e-12);
    }
}
