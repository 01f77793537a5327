use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spectral_lab::algebra::random::{random_observable, random_state};
use spectral_lab::algebra::{make_identity, pair, HasBlocks};
use spectral_lab::evolution::{asymptotic_state, evolve};
use spectral_lab::localization::{
    covariance, covariance_volume, gaussian_ensemble, PhaseFlow, Shear,
};
use spectral_lab::spectral_model::{CscoSpec, Scheme, SpectrumGrid};
use spectral_lab::{SpectrumGrid64, StateFunctional64};

fn grid<T: spectral_lab::Real>(nodes: usize) -> Arc<SpectrumGrid<T>> {
    Arc::new(SpectrumGrid::build(Scheme::GaussLegendre, nodes, T::lit(10.0)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn evolution_never_touches_diagonal_blocks(seed in any::<u64>(), t in -50.0f64..50.0) {
        let g: Arc<SpectrumGrid64> = grid(24);
        let csco = CscoSpec::continuum(2).with_bound(-0.5).unwrap();
        let rho: StateFunctional64 = random_state(g.clone(), csco, &mut ChaCha8Rng::seed_from_u64(seed), 0.7);
        let moved = evolve(&rho, t);
        prop_assert_eq!(&moved.blocks().diag, &rho.blocks().diag);
        prop_assert_eq!(&moved.blocks().bound, &rho.blocks().bound);
        let id = make_identity(g, csco);
        prop_assert_eq!(pair(&moved, &id).unwrap(), pair(&rho, &id).unwrap());
    }

    #[test]
    fn incoherent_state_is_stationary(seed in any::<u64>()) {
        let g: Arc<SpectrumGrid64> = grid(24);
        let csco = CscoSpec::continuum(1);
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(g.clone(), csco, &mut r, 0.0);
        let obs = random_observable(g, csco, &mut r, 2);
        let star = asymptotic_state(&rho);
        prop_assert_eq!(pair(&rho, &obs).unwrap(), pair(&star, &obs).unwrap());
    }

    #[test]
    fn shear_keeps_phase_volume(seed in 0u64..1000, t in 0.0f64..20.0) {
        let pts = gaussian_ensemble(1500, &[0.0, 0.0], &[1.0, 0.2], seed).unwrap();
        let flow = Shear { pairs: 1 };
        let mut moved = pts.clone();
        for i in 0..pts.nrows() {
            let y = PhaseFlow::<f64>::apply(&flow, &[pts[(i, 0)], pts[(i, 1)]], t);
            moved[(i, 0)] = y[0];
            moved[(i, 1)] = y[1];
        }
        let (v0, _) = covariance_volume(&covariance(&pts, &[0, 1]));
        let (v1, _) = covariance_volume(&covariance(&moved, &[0, 1]));
        prop_assert!((v1 / v0 - 1.0).abs() < 1e-9);
    }
}

#[test]
fn single_precision_pipeline() {
    let g: Arc<SpectrumGrid<f32>> = grid(32);
    let csco = CscoSpec::continuum(2);
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let rho = random_state(g.clone(), csco, &mut r, 0.5);
    let id = make_identity(g, csco);
    let n0 = pair(&rho, &id).unwrap();
    assert!((n0 - 1.0).abs() < 1e-5, "{n0}");
    assert_eq!(pair(&evolve(&rho, 3.0f32), &id).unwrap(), n0);
}
