//! Property tests for the numeric kernels and the two-stage algebra.

use pcl_core::datagen::gen_mastouri;
use pcl_core::numkit::{kron_vec, median_heuristic, row_kron, solve_spd, DenseMatrix};
use pcl_core::two_stage::{
    fit_fixed_feature, fit_stage1_weights, fit_stage2_weights, FixedDictionaries,
};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn vec_strategy(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, len)
}

fn matrix_strategy(
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> impl Strategy<Value = DenseMatrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0..3.0f64, r * c)
            .prop_map(move |data| DenseMatrix::from_vec(r, c, data).unwrap())
    })
}

/// Partial-pivot Gaussian elimination, the slow oracle for `solve_spd`.
fn gauss_solve(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = a.rows();
    let k = b.cols();
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| a.row(i).iter().chain(b.row(i)).copied().collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap())
            .unwrap();
        aug.swap(col, pivot);
        for row in (col + 1)..n {
            let f = aug[row][col] / aug[col][col];
            for j in col..(n + k) {
                aug[row][j] -= f * aug[col][j];
            }
        }
    }
    let mut x = DenseMatrix::zeros(n, k);
    for j in 0..k {
        for i in (0..n).rev() {
            let mut s = aug[i][n + j];
            for l in (i + 1)..n {
                s -= aug[i][l] * x.get(l, j);
            }
            x.set(i, j, s / aug[i][i]);
        }
    }
    x
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn kron_layout_and_scaling(
        a in vec_strategy(1..5),
        b in vec_strategy(1..5),
        c in -2.0..2.0f64,
    ) {
        let k = kron_vec(&a, &b).unwrap();
        prop_assert_eq!(k.len(), a.len() * b.len());
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                prop_assert_eq!(k[i * b.len() + j], ai * bj);
            }
        }
        let scaled_a: Vec<f64> = a.iter().map(|x| c * x).collect();
        let ka = kron_vec(&scaled_a, &b).unwrap();
        let kb = kron_vec(&a, &b.iter().map(|x| c * x).collect::<Vec<_>>()).unwrap();
        for ((x, y), z) in ka.iter().zip(&kb).zip(&k) {
            prop_assert!((x - c * z).abs() <= 1e-12 * (1.0 + (c * z).abs()));
            prop_assert!((y - c * z).abs() <= 1e-12 * (1.0 + (c * z).abs()));
        }
    }

    #[test]
    fn row_kron_matches_per_row_kron(
        rc in (1usize..6, 1usize..4, 1usize..4),
        seed_data in prop::collection::vec(-3.0..3.0f64, 6 * 4 + 6 * 4),
    ) {
        let (r, p, q) = rc;
        let a = DenseMatrix::from_vec(r, p, seed_data[..r * p].to_vec()).unwrap();
        let b = DenseMatrix::from_vec(r, q, seed_data[6 * 4..6 * 4 + r * q].to_vec()).unwrap();
        let rk = row_kron(&a, &b).unwrap();
        prop_assert_eq!(rk.rows(), r);
        prop_assert_eq!(rk.cols(), p * q);
        for i in 0..r {
            let expect = kron_vec(a.row(i), b.row(i)).unwrap();
            prop_assert_eq!(rk.row(i), expect.as_slice());
        }
    }

    #[test]
    fn median_heuristic_permutation_and_scale(
        points in matrix_strategy(2..10, 1..4),
        c in 0.5..3.0f64,
    ) {
        let Ok(h) = median_heuristic(&points) else {
            // all rows coincide: degenerate bandwidth is the contract
            return Ok(());
        };
        let reversed: Vec<Vec<f64>> =
            (0..points.rows()).rev().map(|i| points.row(i).to_vec()).collect();
        let reversed = DenseMatrix::from_rows(&reversed).unwrap();
        prop_assert_eq!(median_heuristic(&reversed).unwrap(), h);

        let mut scaled = points.clone();
        scaled.scale(c);
        let hs = median_heuristic(&scaled).unwrap();
        prop_assert!((hs - c * h).abs() <= 1e-9 * c * h);
    }

    #[test]
    fn stage1_solution_satisfies_normal_equations(
        dims in (4usize..16, 1usize..4, 1usize..3),
        lambda1 in 1e-3..1.0f64,
        data in prop::collection::vec(-3.0..3.0f64, 16 * 4 + 16 * 3),
    ) {
        let (m, p, q) = dims;
        let phi = DenseMatrix::from_vec(m, p, data[..m * p].to_vec()).unwrap();
        let psi = DenseMatrix::from_vec(m, q, data[16 * 4..16 * 4 + m * q].to_vec()).unwrap();
        let v = fit_stage1_weights(&psi, &phi, lambda1, m).unwrap();
        let mut g = phi.gram();
        g.add_diag(m as f64 * lambda1);
        let rhs = phi.t_matmul(&psi).unwrap();
        let resid = g.matmul(&v.transpose()).unwrap().sub(&rhs).unwrap();
        prop_assert!(resid.frob_norm() <= 1e-8 * (1.0 + rhs.frob_norm()));
    }

    #[test]
    fn ridge_fit_error_is_nondecreasing_in_lambda(
        dims in (4usize..16, 1usize..4),
        data in prop::collection::vec(-3.0..3.0f64, 16 * 4 + 16),
    ) {
        let (n, p) = dims;
        let phi = DenseMatrix::from_vec(n, p, data[..n * p].to_vec()).unwrap();
        let y = &data[16 * 4..16 * 4 + n];
        let mut last = -1.0f64;
        for lambda in [0.0, 0.1, 1.0, 10.0] {
            let u = fit_stage2_weights(&phi, y, lambda, n).unwrap();
            let pred = phi.mul_vec(&u).unwrap();
            let mse = pred.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
            prop_assert!(mse + 1e-9 * (1.0 + mse) >= last);
            last = mse;
        }
    }

    #[test]
    fn solve_spd_matches_gaussian_elimination(
        n in 1usize..8,
        k in 1usize..4,
        data in prop::collection::vec(-2.0..2.0f64, 8 * 8 + 8 * 4),
    ) {
        let m = DenseMatrix::from_vec(n, n, data[..n * n].to_vec()).unwrap();
        let mut a = m.gram();
        a.add_diag(0.5);
        let b = DenseMatrix::from_vec(n, k, data[8 * 8..8 * 8 + n * k].to_vec()).unwrap();
        let x = solve_spd(&a, &b).unwrap();
        let oracle = gauss_solve(&a, &b);
        let diff = x.sub(&oracle).unwrap().frob_norm();
        prop_assert!(diff <= 1e-8 * (1.0 + oracle.frob_norm()));
    }
}

proptest! {
    #![proptest_config(config(24))]

    /// Scaling the stage-1 target features by c (and λ₂ by c²) must leave
    /// structural predictions unchanged: V̂ absorbs c, û sheds it.
    #[test]
    fn rescaled_proxy_features_leave_predictions_invariant(
        dims in (5usize..12, 5usize..12, 1usize..3, 1usize..3, 1usize..3, 1usize..3),
        c in prop::sample::select(vec![0.5, 2.0, 3.0]),
        lambda in (1e-3..1.0f64, 1e-3..1.0f64),
        data in prop::collection::vec(-2.0..2.0f64, 12 * 3 * 5 + 12 * 3 + 12 + 3),
    ) {
        let (m, n, pa, pz, ra, q) = dims;
        let (l1, l2) = lambda;
        let mut take = {
            let mut offset = 0;
            move |count: usize| {
                let slice = data[offset..offset + count].to_vec();
                offset += count;
                slice
            }
        };
        let fa1 = DenseMatrix::from_vec(m, pa, take(m * pa)).unwrap();
        let fz1 = DenseMatrix::from_vec(m, pz, take(m * pz)).unwrap();
        let psi1 = DenseMatrix::from_vec(m, q, take(m * q)).unwrap();
        let fa1_s2 = DenseMatrix::from_vec(n, pa, take(n * pa)).unwrap();
        let fz1_s2 = DenseMatrix::from_vec(n, pz, take(n * pz)).unwrap();
        let fa2 = DenseMatrix::from_vec(n, ra, take(n * ra)).unwrap();
        let y = take(n);
        let fa_test = take(ra);

        let run = |psi: &DenseMatrix, l2: f64| -> f64 {
            let phi1 = row_kron(&fa1, &fz1).unwrap();
            let v = fit_stage1_weights(psi, &phi1, l1, m).unwrap();
            let ew = row_kron(&fa1_s2, &fz1_s2).unwrap().matmul_t(&v).unwrap();
            let phi2 = row_kron(&fa2, &ew).unwrap();
            let u = fit_stage2_weights(&phi2, &y, l2, n).unwrap();
            let mu = psi.mean_row().unwrap();
            kron_vec(&fa_test, &mu)
                .unwrap()
                .iter()
                .zip(&u)
                .map(|(a, b)| a * b)
                .sum()
        };

        let base = run(&psi1, l2);
        let mut scaled = psi1.clone();
        scaled.scale(c);
        let rescaled = run(&scaled, c * c * l2);
        prop_assert!(
            (base - rescaled).abs() <= 1e-6 * (1.0 + base.abs()),
            "base {base} vs rescaled {rescaled}"
        );
    }
}

proptest! {
    #![proptest_config(config(8))]

    /// Small sample with wide dictionaries forces the kernelized dual route;
    /// an explicit primal solve over the Kronecker features is the oracle.
    #[test]
    fn dual_route_matches_explicit_primal(
        seed in 0u64..1000,
        lambda in (0.05..1.0f64, 0.05..1.0f64),
    ) {
        let (l1, l2) = lambda;
        let data = gen_mastouri(12, 12, seed).unwrap();
        let dicts = FixedDictionaries::from_stage1(&data, 12, seed).unwrap();
        prop_assume!(dicts.phi_a1.dim() * dicts.phi_z.dim() > data.m());
        let model = fit_fixed_feature(&data, &dicts, l1, l2).unwrap();

        let fa1 = dicts.phi_a1.features_batch(data.stage1_a()).unwrap();
        let fz1 = dicts.phi_z.features_batch(data.stage1_z()).unwrap();
        let psi1 = dicts.psi_w.features_batch(data.stage1_w()).unwrap();
        let phi1 = row_kron(&fa1, &fz1).unwrap();
        let v = fit_stage1_weights(&psi1, &phi1, l1, data.m()).unwrap();
        let fa1_s2 = dicts.phi_a1.features_batch(data.stage2_a()).unwrap();
        let fz1_s2 = dicts.phi_z.features_batch(data.stage2_z()).unwrap();
        let ew = row_kron(&fa1_s2, &fz1_s2).unwrap().matmul_t(&v).unwrap();
        let fa2 = dicts.psi_a2.features_batch(data.stage2_a()).unwrap();
        let phi2 = row_kron(&fa2, &ew).unwrap();
        let u = fit_stage2_weights(&phi2, data.stage2_y(), l2, data.n()).unwrap();
        let mu = dicts.psi_w.features_batch(data.mean_feature_w()).unwrap().mean_row().unwrap();

        for a in pcl_core::datagen::mastouri_grid() {
            let fa = dicts.psi_a2.features(&[a]).unwrap();
            let oracle: f64 =
                kron_vec(&fa, &mu).unwrap().iter().zip(&u).map(|(x, w)| x * w).sum();
            let got = model.predict_structural(&[a]).unwrap();
            prop_assert!(
                (got - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
                "a = {a}: dual {got} vs primal {oracle}"
            );
        }
    }
}
