use approx::{assert_abs_diff_eq, assert_relative_eq};
use madelung_lab::bohm::{relative_entropy, sample_equilibrium, HistogramGrid};
use madelung_lab::conditional::{conditional_wavefunction, ConfigWaveField};
use madelung_lab::interp::sample_scalar;
use madelung_lab::madelung::{decompose, quantum_potential};
use madelung_lab::oracle::{split_step_evolve, Potential, PropagatorState};
use madelung_lab::spectral::gradient;
use madelung_lab::{Complex64, Constants, Grid64, ScalarField64, WaveField64};
use proptest::prelude::*;

fn packet(g: Grid64, x0: f64, s: f64, k: f64) -> WaveField64 {
    WaveField64::from_fn(g, |x, _| {
        Complex64::from_polar((-(x - x0) * (x - x0) / (4.0 * s * s)).exp(), k * x)
    })
    .normalized()
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cell_volume_tiles_the_domain(n in 8usize..300, m in 8usize..40, lx in 0.5f64..50.0, ly in 0.5f64..50.0) {
        let g = Grid64::plane([-1.0, 2.0], [lx, ly], [n, m]).unwrap();
        assert_relative_eq!(g.cell_volume() * g.len() as f64, lx * ly, max_relative = 1e-14);
    }

    #[test]
    fn wrap_lands_in_the_domain(x in -1e3f64..1e3, origin in -5.0f64..5.0, l in 0.1f64..20.0) {
        let g = Grid64::line(origin, l, 16).unwrap();
        let w = g.wrap(0, x);
        prop_assert!(w >= origin && w < origin + l);
        assert_abs_diff_eq!(g.wrap(0, w), w, epsilon = 1e-12 * l.max(1.0));
        let k = ((x - w) / l).round();
        assert_abs_diff_eq!(x - w, k * l, epsilon = 1e-9 * x.abs().max(l));
    }

    #[test]
    fn interpolation_stays_between_neighbours(x in -20.0f64..20.0, seed in 0u64..1000) {
        let g = Grid64::centered_line(4.0, 32).unwrap();
        let f = ScalarField64::from_fn(g, |x, _| (x * (1.0 + seed as f64 * 1e-3)).sin());
        let v = sample_scalar(&f, &[x]).unwrap();
        let (lo, hi) = f.values().iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        prop_assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
    }

    #[test]
    fn spectral_gradient_is_exact_on_resolved_modes(m in 1i32..15, a in -2.0f64..2.0) {
        let l = 6.0;
        let g = Grid64::line(0.0, l, 32).unwrap();
        let k = std::f64::consts::TAU * m as f64 / l;
        let f = ScalarField64::from_fn(g, |x, _| a * (k * x).sin() + 3.0);
        let d = gradient(&f).unwrap();
        for (i, v) in d.component(0).iter().enumerate() {
            assert_abs_diff_eq!(*v, a * k * (k * g.coord(0, i)).cos(), epsilon = 1e-10 * (1.0 + k));
        }
    }

    #[test]
    fn global_phase_leaves_hydrodynamics_unchanged(c in -10.0f64..10.0, k in -2.0f64..2.0) {
        let g = Grid64::centered_line(10.0, 128).unwrap();
        let consts = Constants::default();
        let psi = packet(g, 0.5, 1.0, k);
        let shifted = psi.scale(Complex64::from_polar(1.0, c));
        let a = decompose(&psi, &consts).unwrap();
        let b = decompose(&shifted, &consts).unwrap();
        for (p, q) in a.rho().values().iter().zip(b.rho().values()) {
            assert_abs_diff_eq!(*p, *q, epsilon = 1e-15);
        }
        let mask = a.resolved_mask();
        for ((p, q), m) in a.v().component(0).iter().zip(b.v().component(0)).zip(&mask) {
            if *m {
                assert_abs_diff_eq!(*p, *q, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn quantum_potential_ignores_density_scale(scale in -10i32..10) {
        let g = Grid64::centered_line(10.0, 128).unwrap();
        let c = Constants::default();
        let rho = packet(g, 0.0, 1.3, 0.0).density();
        let q0 = quantum_potential(&rho, &c).unwrap();
        let q1 = quantum_potential(&rho.scale(4f64.powi(scale)), &c).unwrap();
        prop_assert_eq!(q0.values(), q1.values());
    }

    #[test]
    fn split_step_preserves_the_norm(x0 in -2.0f64..2.0, s in 0.5f64..1.5, k in -3.0f64..3.0, w in 0.2f64..2.0) {
        let g = Grid64::centered_line(12.0, 256).unwrap();
        let psi = packet(g, x0, s, k);
        let state = PropagatorState::new(&psi, 1e-2, Constants::default()).unwrap();
        let out = split_step_evolve(state, &Potential::Harmonic { omega: w }, 200).unwrap();
        assert_abs_diff_eq!(out.psi.norm_sqr(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn histogram_is_normalized(xs in prop::collection::vec(-100.0f64..100.0, 1..400), bins in prop::sample::select(vec![1usize, 2, 4, 8, 16, 32])) {
        let g = Grid64::centered_line(5.0, 64).unwrap();
        let mut h = HistogramGrid::aligned(&g, bins).unwrap();
        let pts: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
        h.fill(&pts, None);
        assert_abs_diff_eq!(h.integral(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn relative_entropy_is_non_negative(p in prop::collection::vec(0.0f64..1.0, 2..30), seed in 1u64..100) {
        let n = p.len();
        let q: Vec<f64> = (0..n).map(|i| 0.1 + ((i as u64 * seed) % 7) as f64).collect();
        let sp: f64 = p.iter().sum();
        prop_assume!(sp > 0.0);
        let sq: f64 = q.iter().sum();
        let p: Vec<f64> = p.iter().map(|v| v / sp).collect();
        let q: Vec<f64> = q.iter().map(|v| v / sq).collect();
        prop_assert!(relative_entropy(&p, &q) >= -1e-15);
        prop_assert!(relative_entropy(&p, &p).abs() <= 1e-15);
    }

    #[test]
    fn same_seed_same_ensemble(seed in any::<u64>(), n in 1usize..300) {
        let g = Grid64::centered_plane(3.0, 16).unwrap();
        let rho = ScalarField64::from_fn(g, |x, y| (-(x * x + 2.0 * y * y)).exp());
        let a = sample_equilibrium(&rho, n, seed, Constants::default()).unwrap();
        let b = sample_equilibrium(&rho, n, seed, Constants::default()).unwrap();
        prop_assert_eq!(a.positions(), b.positions());
        for p in a.positions() {
            prop_assert!(p[0] >= -3.0 && p[0] < 3.0 && p[1] >= -3.0 && p[1] < 3.0);
        }
    }

    #[test]
    fn product_conditional_does_not_depend_on_the_partner(x2 in -3.0f64..3.0, k in -1.5f64..1.5) {
        let g = Grid64::centered_line(8.0, 64).unwrap();
        let a = packet(g, -0.7, 0.9, k);
        let b = packet(g, 0.4, 1.2, -k);
        let psi = ConfigWaveField::product(&a, &b, Constants::default()).unwrap();
        let phi = conditional_wavefunction(&psi, 0, x2).unwrap().wave.normalized().unwrap();
        prop_assert!(phi.l2_distance_up_to_phase(&a).unwrap() <= 1e-8);
    }
}
