use std::sync::{Arc, OnceLock};

use grouppdo::expcalc::{fourier_exp, DualLattice};
use grouppdo::group::{
    affine_kernel_factor, build_grid, exp_map, inverse, log_map, modular, multiply, theta, GridConfig, GroupGrid,
    GroupPoint, LieVector,
};
use grouppdo::lspace::SampledFunction;
use grouppdo::plancherel::PlancherelPair;
use grouppdo::repfield::Dual;
use grouppdo::C64;
use proptest::prelude::*;

fn baseline() -> &'static Arc<GroupGrid> {
    static GRID: OnceLock<Arc<GroupGrid>> = OnceLock::new();
    GRID.get_or_init(|| Arc::new(build_grid(&GridConfig::affine_baseline()).unwrap()))
}

fn point() -> impl Strategy<Value = GroupPoint> {
    (-10.0..10.0f64, -3.0..3.0f64).prop_map(|(b, l)| GroupPoint::affine(b, l.exp()).unwrap())
}

fn close(x: &GroupPoint, y: &GroupPoint, tol: f64) -> bool {
    let ((b0, a0), (b1, a1)) = (x.affine_coords().unwrap(), y.affine_coords().unwrap());
    (b0 - b1).abs() <= tol * (1.0 + b0.abs()) && (a0 - a1).abs() <= tol * a0
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C64::new(re, im)), n)
}

proptest! {
    #[test]
    fn multiplication_is_associative(x in point(), y in point(), z in point()) {
        let l = multiply(&multiply(&x, &y).unwrap(), &z).unwrap();
        let r = multiply(&x, &multiply(&y, &z).unwrap()).unwrap();
        prop_assert!(close(&l, &r, 1e-12));
    }

    #[test]
    fn inverse_gives_identity(x in point()) {
        let e = multiply(&x, &inverse(&x)).unwrap();
        prop_assert!(close(&e, &GroupPoint::affine(0.0, 1.0).unwrap(), 1e-12));
    }

    #[test]
    fn modular_function_is_a_homomorphism(x in point(), y in point()) {
        let xy = multiply(&x, &y).unwrap();
        let lhs = modular(&xy).value();
        let rhs = modular(&x).value() * modular(&y).value();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn exp_log_roundtrip(beta in -8.0..8.0f64, alpha in prop_oneof![-3.0..3.0f64, -1e-9..1e-9f64]) {
        let x = LieVector::new(beta, alpha);
        let back = log_map(&exp_map(&x)).unwrap();
        prop_assert!((back.beta - beta).abs() <= 1e-12 * (1.0 + beta.abs()));
        prop_assert!((back.alpha - alpha).abs() <= 1e-12);
    }

    #[test]
    fn theta_is_positive_and_matches_closed_form(beta in -5.0..5.0f64, alpha in -3.0..3.0f64) {
        let t = theta(&LieVector::new(beta, alpha));
        prop_assert!(t > 0.0);
        if alpha.abs() > 1e-3 {
            prop_assert!((t - (1.0 - (-alpha).exp()) / alpha).abs() <= 1e-12 * t);
        }
    }

    #[test]
    fn kernel_factor_is_continuous_near_one(eps in -1e-6..1e-6f64) {
        let q = 1.0 + eps;
        prop_assert!((affine_kernel_factor(q) - 1.0).abs() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn semi_invariance_on_both_signs(b in -8.0..8.0f64, k in -4i32..=4) {
        let grid = baseline();
        let dual = Dual::for_grid(grid).unwrap();
        let a = grid.affine().unwrap().a(k);
        let x = GroupPoint::affine(b, a).unwrap();
        for i in 0..dual.len() {
            prop_assert!(dual.semi_invariance_residual(i, &x).unwrap() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn plancherel_is_linear(u in complex_vec(1024), v in complex_vec(1024), re in -2.0..2.0f64, im in -2.0..2.0f64) {
        let grid = baseline().clone();
        let pair = PlancherelPair::new(grid.clone()).unwrap();
        let z = C64::new(re, im);
        let fu = SampledFunction::new(grid.clone(), u).unwrap();
        let fv = SampledFunction::new(grid, v).unwrap();
        let lhs = pair.plancherel_fwd(&fu.add(&fv.scale(z)).unwrap()).unwrap();
        let rhs = pair.plancherel_fwd(&fu).unwrap().add(&pair.plancherel_fwd(&fv).unwrap().scale(z)).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().norm_sqr().sqrt() <= 1e-12 * rhs.norm_sqr().sqrt());
    }

    #[test]
    fn exponential_fourier_is_linear(u in complex_vec(1024), v in complex_vec(1024), re in -2.0..2.0f64) {
        let grid = baseline().clone();
        let lattice = DualLattice::for_grid(&grid).unwrap();
        let z = C64::new(re, 0.5);
        let fu = SampledFunction::new(grid.clone(), u).unwrap();
        let fv = SampledFunction::new(grid, v).unwrap();
        let lhs = fourier_exp(&fu.add(&fv.scale(z)).unwrap(), &lattice).unwrap();
        let a = fourier_exp(&fu, &lattice).unwrap();
        let b = fourier_exp(&fv, &lattice).unwrap();
        let diff: f64 = lhs.values.iter().zip(a.values.iter().zip(&b.values)).map(|(l, (x, y))| (l - x - y * z).norm_sqr()).sum();
        let scale: f64 = lhs.values.iter().map(|l| l.norm_sqr()).sum();
        prop_assert!(diff.sqrt() <= 1e-12 * scale.sqrt());
    }
}
