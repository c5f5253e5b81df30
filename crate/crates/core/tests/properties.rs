//! Invariants of the norms and operators on random data.

use asymflat::evolution::flat_dirac_propagator;
use asymflat::harness::random_tapered_field;
use asymflat::metric::MetricParams;
use asymflat::norms::{is_admissible, lp_norm_mh, sobolev_norm, AdmissibleTriple, LocalSmoothing, Strichartz};
use asymflat::operators::dirac::{apply_dirac, inner_mh, scalar_laplace_beltrami};
use asymflat::operators::{wavepacket, GeometryField, Grid, SpinorField};
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

fn grid() -> Grid {
    Grid::new(8.0, 16).unwrap()
}

fn curved() -> &'static GeometryField {
    static GEO: OnceLock<GeometryField> = OnceLock::new();
    GEO.get_or_init(|| GeometryField::new(grid(), &MetricParams::conformal(0.1)).unwrap())
}

fn off_diagonal() -> &'static GeometryField {
    static GEO: OnceLock<GeometryField> = OnceLock::new();
    GEO.get_or_init(|| GeometryField::new(grid(), &MetricParams::off_diagonal(0.1)).unwrap())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn sum(a: &SpinorField, b: &SpinorField) -> SpinorField {
    let mut s = a.clone();
    s.add_scaled(Complex64::new(1.0, 0.0), b);
    s
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 12,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn norms_are_homogeneous(seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0, p in 1.0f64..8.0) {
        let c = Complex64::new(re, im);
        prop_assume!(c.norm() > 1e-3);
        let geo = curved();
        let f = random_tapered_field(grid(), seed);
        let cf = f.scaled(c);
        prop_assert!(close(lp_norm_mh(&cf, geo, p), c.norm() * lp_norm_mh(&f, geo, p), 1e-12));
        prop_assert!(close(lp_norm_mh(&cf, geo, f64::INFINITY), c.norm() * lp_norm_mh(&f, geo, f64::INFINITY), 1e-12));
        let s = sobolev_norm(&cf, geo, 0.5, p.max(1.5), false).unwrap();
        prop_assert!(close(s, c.norm() * sobolev_norm(&f, geo, 0.5, p.max(1.5), false).unwrap(), 1e-12));
    }

    #[test]
    fn triangle_inequality(a in 0u64..1000, b in 0u64..1000, p in 1.0f64..8.0, s in -1.0f64..1.5) {
        let geo = curved();
        let f = random_tapered_field(grid(), a);
        let g = random_tapered_field(grid(), b + 5000);
        let fg = sum(&f, &g);
        let slack = 1.0 + 1e-12;
        prop_assert!(lp_norm_mh(&fg, geo, p) <= slack * (lp_norm_mh(&f, geo, p) + lp_norm_mh(&g, geo, p)));
        let r = p.max(1.5);
        let n = |u: &SpinorField| sobolev_norm(u, geo, s, r, false).unwrap();
        prop_assert!(n(&fg) <= slack * (n(&f) + n(&g)));
    }

    #[test]
    fn wave_triples_from_r_are_admissible(r in 2.01f64..1e6) {
        let q = 1.0 / (0.5 - 1.0 / r);
        let s = 1.0 - 2.0 / r;
        prop_assert!(is_admissible(&AdmissibleTriple::wave(s, q, r)));
        prop_assert!(!is_admissible(&AdmissibleTriple::wave(s + 1e-6, q, r)));
        prop_assert!(!AdmissibleTriple::wave(s, q, r).excluded_endpoint());
    }

    #[test]
    fn klein_gordon_triples_from_r_are_admissible(r in 2.01f64..6.0) {
        let q = 2.0 / (1.5 - 3.0 / r);
        let s = 0.5 - 1.0 / r + 1.0 / q;
        let t = AdmissibleTriple::klein_gordon(s, q, r);
        prop_assert!(is_admissible(&t));
        prop_assert!(!t.excluded_endpoint());
        prop_assert!(!is_admissible(&AdmissibleTriple::klein_gordon(s, q * 1.01, r)));
    }

    #[test]
    fn dirac_and_laplacian_are_symmetric(a in 0u64..1000, b in 0u64..1000, m in 0.0f64..2.0, diag in any::<bool>()) {
        let geo = if diag { curved() } else { off_diagonal() };
        let u = random_tapered_field(grid(), a);
        let v = random_tapered_field(grid(), b + 5000);
        let scale = (inner_mh(&u, &u, geo).re * inner_mh(&v, &v, geo).re).sqrt();
        let lhs = inner_mh(&apply_dirac(&u, geo, m).unwrap(), &v, geo);
        let rhs = inner_mh(&u, &apply_dirac(&v, geo, m).unwrap(), geo);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * scale, "{lhs} vs {rhs}");
        let lhs = inner_mh(&scalar_laplace_beltrami(&u, geo).unwrap(), &v, geo);
        let rhs = inner_mh(&u, &scalar_laplace_beltrami(&v, geo).unwrap(), geo);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * scale, "{lhs} vs {rhs}");
    }
}

fn flat64() -> &'static GeometryField {
    static GEO: OnceLock<GeometryField> = OnceLock::new();
    GEO.get_or_init(|| GeometryField::flat(Grid::new(8.0, 32).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    /// Both functionals are time integrals of non-negative integrands.
    #[test]
    fn functionals_grow_with_t(k in 0.5f64..2.5, m in 0.0f64..1.5, c in 0.1f64..10.0) {
        let geo = flat64();
        let u0 = wavepacket(*geo.grid(), [0.0; 3], 1.0, [k, 0.0, 0.0], 1);
        let triple = AdmissibleTriple::wave(0.5, 4.0, 4.0);
        let cu0 = u0.scaled(Complex64::new(c, 0.0));
        let mut ls = LocalSmoothing::new(&u0, geo, m, 0.05).unwrap();
        let mut st = Strichartz::new(&u0, geo, triple, 0.0).unwrap();
        let mut st_scaled = Strichartz::new(&cu0, geo, triple, 0.0).unwrap();
        let mut last = (0.0, 0.0);
        for i in 0..=12 {
            let t = 0.1 * i as f64;
            let u = flat_dirac_propagator(&u0, geo, m, t).unwrap();
            ls.observe(t, &u).unwrap();
            st_scaled.observe(t, &flat_dirac_propagator(&cu0, geo, 0.0, t).unwrap()).unwrap();
            st.observe(t, &flat_dirac_propagator(&u0, geo, 0.0, t).unwrap()).unwrap();
            if i % 4 == 0 && i > 0 {
                let (a, b) = (ls.clone().finish().value, st.clone().finish().value);
                prop_assert!(a >= last.0 && b >= last.1);
                last = (a, b);
            }
        }
        let (plain, scaled) = (st.finish(), st_scaled.finish());
        prop_assert!(close(scaled.value, c * plain.value, 1e-12));
        prop_assert!(close(scaled.ratio, plain.ratio, 1e-12));
    }
}
