use std::sync::{Arc, OnceLock};

use kwr_core::collision::{collision_operator, kernel_kstar_closed, FrequencyGrid, KernelTable, SpectralDensity, TableConfig};
use kwr_core::interaction::{interaction_integral_closed, FrequencyQuad};
use kwr_core::microsim::{evolve_nls, prepared_data, shell_average, PhiSpec, TorusModel};
use kwr_core::solver::{step, EvolutionState, StepConfig};
use kwr_core::specfun::{bessel_j, lambda_d, RadialArgument};
use kwr_core::spectrum_synth::{kinetic_constant, ManifoldModel};
use kwr_core::stats::Welford;
use kwr_core::Dimension;
use proptest::prelude::*;

fn dim() -> impl Strategy<Value = Dimension> {
    prop_oneof![Just(Dimension::ONE), Just(Dimension::TWO), Just(Dimension::THREE)]
}

const PERMS: [[usize; 4]; 6] = [[0, 1, 2, 3], [1, 0, 3, 2], [2, 3, 0, 1], [0, 3, 2, 1], [2, 1, 0, 3], [3, 2, 1, 0]];

fn small_table() -> &'static (Arc<FrequencyGrid>, KernelTable) {
    static T: OnceLock<(Arc<FrequencyGrid>, KernelTable)> = OnceLock::new();
    T.get_or_init(|| {
        let grid = Arc::new(FrequencyGrid::uniform(1e-3, 6.0, 40).unwrap());
        let table = KernelTable::build_rows(Dimension::THREE, grid.clone(), TableConfig::coarse(), &[10, 20, 30]).unwrap();
        (grid, table)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lambda_closed_forms(q in 1e-6f64..100.0) {
        let a = RadialArgument::new(q).unwrap();
        prop_assert!((lambda_d(Dimension::ONE, a) - q.cos()).abs() < 1e-10);
        prop_assert!((lambda_d(Dimension::THREE, a) - q.sin() / q).abs() < 1e-10);
        let j0 = bessel_j(0.0, a).unwrap();
        prop_assert!((lambda_d(Dimension::TWO, a) - j0).abs() < 1e-10);
    }

    #[test]
    fn lambda_is_bounded_by_one(d in dim(), q in 0.0f64..200.0) {
        prop_assert!(lambda_d(d, RadialArgument::new(q).unwrap()).abs() <= 1.0 + 1e-15);
    }

    #[test]
    fn closed_interaction_is_symmetric(w in prop::array::uniform4(0.05f64..6.0), three in any::<bool>()) {
        let d = if three { Dimension::THREE } else { Dimension::TWO };
        let q = FrequencyQuad::from_array(w).unwrap();
        let base = interaction_integral_closed(d, &q).unwrap();
        for p in PERMS {
            let v = interaction_integral_closed(d, &q.permuted(p)).unwrap();
            // exact zeros beyond the closure boundary come out at roundoff level
            prop_assert!((v - base).abs() <= 1e-9 * base.abs() + 1e-11, "{p:?}: {v} vs {base}");
        }
    }

    #[test]
    fn closed_interaction_scales(w in prop::array::uniform4(0.05f64..6.0), l in 0.5f64..5.0) {
        // I_d(ω/L²) = L^d I_d(ω) in d = 3, where ∫ q^{d−1} ∏Λ dq rescales with q ↦ Lq
        let q = FrequencyQuad::from_array(w).unwrap();
        let a = interaction_integral_closed(Dimension::THREE, &q).unwrap();
        let b = interaction_integral_closed(Dimension::THREE, &q.divided(l * l).unwrap()).unwrap();
        prop_assert!((b - l.powi(3) * a).abs() <= 1e-9 * (l.powi(3) * a).abs() + 1e-11 * l.powi(3));
    }

    #[test]
    fn kernel_symmetric_in_outer_pair(w in prop::array::uniform4(0.05f64..6.0)) {
        let q = FrequencyQuad::from_array(w).unwrap();
        let s = q.permuted([0, 3, 2, 1]);
        let (a, b) = (kernel_kstar_closed(Dimension::THREE, &q).unwrap(), kernel_kstar_closed(Dimension::THREE, &s).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.abs() + 1e-15);
    }

    #[test]
    fn kinetic_constant_identity(d in dim(), l in 1.0f64..100.0, eps in 1e-4f64..1.0, t in 0.0f64..1e6) {
        let k = kinetic_constant(&ManifoldModel::new(d, 1.0, l).unwrap(), eps, t);
        prop_assert!(k.relative_difference <= 1e-12, "{k:?}");
    }

    #[test]
    fn welford_merge_is_order_free(xs in prop::collection::vec(-1e3f64..1e3, 2..60), cut in 1usize..59) {
        let cut = cut.min(xs.len() - 1);
        let mut all = Welford::new();
        xs.iter().for_each(|x| all.push(*x));
        let (mut a, mut b) = (Welford::new(), Welford::new());
        xs[..cut].iter().for_each(|x| a.push(*x));
        xs[cut..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        prop_assert_eq!(a.count, all.count);
        prop_assert!((a.mean - all.mean).abs() <= 1e-12 * (1.0 + all.mean.abs()));
        prop_assert!((a.variance() - all.variance()).abs() <= 1e-9 * (1.0 + all.variance()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn collision_is_cubic(scale in 0.05f64..20.0, center in 1.0f64..3.0) {
        let (grid, table) = small_table();
        let rho = SpectralDensity::from_fn(grid.clone(), |w| (-(w - center).powi(2)).exp()).unwrap();
        let scaled = rho.scaled(scale).unwrap();
        for i in [10, 20, 30] {
            let w = grid.nodes()[i];
            let a = collision_operator(Dimension::THREE, &rho, w, table).unwrap();
            let b = collision_operator(Dimension::THREE, &scaled, w, table).unwrap();
            prop_assert!((b - scale.powi(3) * a).abs() <= 1e-10 * (scale.powi(3) * a).abs().max(1e-300));
        }
    }

    #[test]
    fn free_evolution_is_exact(seed in any::<u64>(), t in 0.0f64..3.0) {
        let m = TorusModel::new(Dimension::TWO, 8.0, 16, 0.0).unwrap();
        let p = PhiSpec::default_gaussian();
        let a = prepared_data(&m, &|w| p.eval(w), seed).unwrap();
        let b = evolve_nls(&a, &m, t, 0.4 / m.max_omega()).unwrap();
        for i in 0..m.len() {
            let expect = a.amplitudes[i] * num_complex::Complex64::from_polar(1.0, -m.omega(i) * t);
            prop_assert!((b.amplitudes[i] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn nonlinear_evolution_conserves_mass(seed in any::<u64>(), eps in -5.0f64..5.0) {
        let m = TorusModel::new(Dimension::TWO, 8.0, 16, eps).unwrap();
        let p = PhiSpec::default_gaussian();
        let a = prepared_data(&m, &|w| p.eval(w), seed).unwrap();
        let b = evolve_nls(&a, &m, 1.0, 0.4 / m.max_omega()).unwrap();
        prop_assert!(((b.mass() - a.mass()) / a.mass()).abs() < 1e-10);
    }

    #[test]
    fn shell_merge_is_the_pooled_mean(s1 in any::<u64>(), s2 in any::<u64>()) {
        let m = TorusModel::new(Dimension::TWO, 8.0, 16, 0.0).unwrap();
        let p = PhiSpec::Gaussian { center: 2.0, width: 1.0, amplitude: 1.3 };
        let edges = [0.0, 1.0, 2.5, 4.0, 100.0];
        let fa = prepared_data(&m, &|w| p.eval(w), s1).unwrap();
        let fb = prepared_data(&m, &|w| p.eval(w), s2).unwrap();
        let mut a = shell_average(&fa, &m, &edges).unwrap();
        let b = shell_average(&fb, &m, &edges).unwrap();
        let (ma, mb): (Vec<_>, Vec<_>) = (0..a.len()).map(|j| (a.mean(j), b.mean(j))).unzip();
        a.merge(&b).unwrap();
        for j in 0..a.len() {
            match (ma[j], mb[j]) {
                (Some(x), Some(y)) => prop_assert!((a.mean(j).unwrap() - 0.5 * (x + y)).abs() <= 1e-12 * (x + y).abs()),
                _ => prop_assert!(a.mean(j).is_none()),
            }
        }
    }

    #[test]
    fn solver_steps_stay_nonnegative(center in 0.5f64..4.0, width in 0.2f64..1.5) {
        let (grid, _) = small_table();
        let g = Arc::new(FrequencyGrid::uniform(grid.omega_min(), grid.omega_max(), 16).unwrap());
        let table = KernelTable::build(Dimension::THREE, g.clone(), TableConfig::coarse()).unwrap();
        let rho = SpectralDensity::from_fn(g, |w| (-((w - center) / width).powi(2)).exp()).unwrap();
        let mut s = EvolutionState::new(rho);
        let cfg = StepConfig::default();
        for _ in 0..5 {
            s = step(&s, &table, &cfg).unwrap();
            prop_assert!(s.rho.values().iter().all(|v| *v >= 0.0));
        }
    }
}
