//! Residuals that are not exact on the affine grid but must shrink under
//! refinement.

use std::sync::Arc;

use grouppdo::expcalc::{gaussian_window, l_inv, l_map, CotangentVector, DualLattice};
use grouppdo::group::{build_grid, GridConfig, GroupPoint};
use grouppdo::plancherel::PlancherelPair;
use grouppdo::quantizer::covariance_residual;
use grouppdo::samples::{random_symbol, PacketFamily, Patch};

fn levels(n: usize) -> Vec<PlancherelPair> {
    let mut cfg = GridConfig::affine_baseline();
    (0..n)
        .map(|_| {
            let p = PlancherelPair::new(Arc::new(build_grid(&cfg).unwrap())).unwrap();
            cfg = cfg.refined().unwrap();
            p
        })
        .collect()
}

#[test]
fn covariance_with_dilation_and_off_grid_shift_converges() {
    let pairs = levels(2);
    let quarter = 2f64.powf(0.25);
    for (b, a) in [(0.5, 1.0), (0.3, 1.0), (0.0, quarter), (0.5, 1.0 / quarter)] {
        let y = GroupPoint::affine(b, a).unwrap();
        let res: Vec<f64> = pairs
            .iter()
            .map(|p| covariance_residual(&y, &random_symbol(p, 0, Patch::interior(), PacketFamily::default())).unwrap())
            .collect();
        assert!(res[1] < 0.75 * res[0], "y = ({b}, {a}): {res:?}");
        assert!(res[1] < 1e-2, "y = ({b}, {a}): {res:?}");
    }
}

#[test]
fn l_map_unitarity_and_roundtrip_improve() {
    let (mut unit, mut rt) = (Vec::new(), Vec::new());
    for p in levels(2) {
        let lattice = DualLattice::for_grid(p.grid()).unwrap();
        let w = gaussian_window(lattice, CotangentVector { y: -1.2, x: 0.0 }, 0.5, 1.0 / 0.3);
        let field = l_map(&w, &p).unwrap();
        unit.push((field.norm_sqr().sqrt() - w.norm()).abs() / w.norm());
        rt.push(l_inv(&field, &p).unwrap().sub(&w).unwrap().norm() / w.norm());
    }
    assert!(rt[0] <= 5e-2 && rt[1] < rt[0], "roundtrip {rt:?}");
    assert!(unit[1] < unit[0], "unitarity {unit:?}");
}
