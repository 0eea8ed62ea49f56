use approx::assert_relative_eq;
use blowup_core::dynsys::*;
use blowup_core::model::*;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = Params> {
    (1.01f64..8.0, 0.01f64..8.0).prop_map(|(m, s)| Params::new(m, s).unwrap())
}

#[test]
fn hand_computed_exponents_and_sigma_star() {
    let e = Params::new(2.0, 2.0).unwrap().exponents();
    assert_eq!((e.alpha, e.beta), (2.0, 0.5));
    assert_relative_eq!(sigma_star(2.0).unwrap(), 6f64.sqrt(), epsilon = 1e-15);
}

#[test]
fn explicit_profile_vanishes_at_its_edge() {
    for m in [1.5, 2.0, 3.0, 5.0] {
        let x1 = explicit_support_edge(m);
        let (v, w) = explicit_pressure(m, x1 * (1.0 - 1e-9));
        assert!(v >= 0.0 && v < 1e-6);
        assert!(w < 0.0);
        assert_eq!(explicit_profile(m, 2.0 * x1), 0.0);
        assert_relative_eq!(explicit_support_edge_from_gamma(m), x1, max_relative = 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn phase_profile_round_trip(p in params(), xi in 1e-3f64..20.0, v in 1e-6f64..1e3, w in -1e3f64..1e3) {
        let s = ProfileState::new(xi, v, w);
        let back = phase_to_profile(&p, &profile_to_phase(&p, &s).unwrap()).unwrap();
        prop_assert!((back.v - v).abs() <= 1e-12 * v);
        prop_assert!((back.w - w).abs() <= 1e-12 * w.abs().max(1e-300));
    }

    #[test]
    fn coordinate_planes_are_invariant(p in params(), x in 0.0f64..10.0, y in -10.0f64..10.0, z in 0.0f64..10.0) {
        let (dx, _, _) = phase_rhs(&p, &PhaseState::new(0.0, y, z));
        let (_, _, dz) = phase_rhs(&p, &PhaseState::new(x, y, 0.0));
        prop_assert_eq!(dx, 0.0);
        prop_assert_eq!(dz, 0.0);
    }

    #[test]
    fn z_grows_in_the_positive_quadrant(p in params(), x in 1e-6f64..10.0, y in -10.0f64..10.0, z in 1e-6f64..10.0) {
        let (_, _, dz) = phase_rhs(&p, &PhaseState::new(x, y, z));
        prop_assert!(dz > 0.0);
    }

    #[test]
    fn explicit_line_is_invariant(m in 1.05f64..8.0, x in 0.0f64..2.0) {
        let p = Params::at_sigma_star(m).unwrap();
        let s = PhaseState::new(x, explicit_line_y(m, x), explicit_line_z(m, x));
        prop_assert!(explicit_line_distance(m, &s) <= 1e-12 * (1.0 + s.z.abs() + s.y.abs()));
        let (dx, dy, dz) = phase_rhs(&p, &s);
        let d = explicit_line_direction(m);
        let norm = (dx * dx + dy * dy + dz * dz).sqrt();
        if norm > 1e-12 {
            let along = (dx * d[0] + dy * d[1] + dz * d[2]).abs();
            prop_assert!((norm - along) <= 1e-10 * norm);
        }
    }

    #[test]
    fn explicit_profile_solves_the_ode(m in 1.1f64..8.0, frac in 0.02f64..0.98) {
        let p = Params::at_sigma_star(m).unwrap();
        let xi = frac * explicit_support_edge(m);
        let (v, w) = explicit_pressure(m, xi);
        let s = ProfileState::new(xi, v, w);
        let f = s.f(&p);
        let r = profile_residual_f(&p, xi, f, s.fprime(&p), s.fsecond(&p).unwrap());
        prop_assert!(r.abs() <= 1e-9 * (1.0 + f));
    }

    #[test]
    fn center_integral_is_conserved_by_its_flow(p in params(), x in 0.01f64..5.0, w in 0.01f64..5.0) {
        let cond = 1.0 + (p.sigma() + 2.0) / p.sigma() * w / x;
        prop_assume!(cond < 500.0);
        let (dx, dw) = center_flow_rhs(&p, x, w);
        let h = 1e-6;
        let lc = |x: f64, w: f64| center_flow_integral(&p, x, w).unwrap().ln();
        let gx = (lc(x * (1.0 + h), w) - lc(x * (1.0 - h), w)) / (2.0 * h * x);
        let gw = (lc(x, w * (1.0 + h)) - lc(x, w * (1.0 - h))) / (2.0 * h * w);
        let scale = dx.abs() / x + dw.abs() / w;
        prop_assert!((gx * dx + gw * dw).abs() <= 1e-6 * cond * scale);
    }

    #[test]
    fn center_integral_scales_linearly(p in params(), x in 0.01f64..5.0, w in 0.01f64..5.0, lam in 0.1f64..10.0) {
        let a = center_flow_integral(&p, x, w).unwrap();
        let b = center_flow_integral(&p, lam * x, lam * w).unwrap();
        let cond = 1.0 + (p.sigma() + 2.0) / p.sigma() * w / x;
        prop_assume!(cond < 500.0);
        prop_assert!((b - lam * a).abs() <= 1e-14 * cond * b.abs());
    }

    #[test]
    fn p2_eigenpairs_have_small_residuals(p in params()) {
        let lin = linearize(&p, &critical_point(&p, PointTag::P2, None).unwrap()).unwrap();
        // Eigenvalues closer than the clustering tolerance are reported as their mean.
        let l = lin.matrix.complex_eigenvalues();
        let gap = [(l[0] - l[1]).norm(), (l[1] - l[2]).norm(), (l[0] - l[2]).norm()]
            .into_iter()
            .filter(|&g| g <= 1e-6 * lin.matrix.norm())
            .fold(0.0, f64::max);
        prop_assert!(lin.max_pair_residual() <= 1e-9 + gap / lin.matrix.norm());
    }

    #[test]
    fn origin_coefficient_round_trip(p in params(), c in 1e-3f64..1e3) {
        let k = origin_coefficient_to_k(&p, c).unwrap();
        let back = k_to_origin_coefficient(&p, k).unwrap();
        prop_assert!((back - c).abs() <= 1e-10 * c);
    }

    #[test]
    fn tail_residual_forms_agree(p in params(), xi in 0.1f64..5.0, f in 1e-5f64..1e3) {
        let a = tail_residual(&p, xi, f).unwrap();
        let b = tail_residual_from_pressure(&p, xi, f.powf(p.m() - 1.0)).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn selfsimilar_form_is_even_and_scales(m in 1.1f64..6.0, x in -3.0f64..3.0, t in -2.0f64..0.99) {
        let p = Params::at_sigma_star(m).unwrap();
        let prof = ExplicitProfile { m };
        let u = selfsimilar_eval(&prof, &p, 1.0, x, t).unwrap();
        let u_neg = selfsimilar_eval(&prof, &p, 1.0, -x, t).unwrap();
        prop_assert_eq!(u, u_neg);
        let Exponents { alpha, beta } = p.exponents();
        let tau: f64 = 1.0 - t;
        let expect = tau.powf(-alpha) * explicit_profile(m, x.abs() * tau.powf(beta));
        prop_assert!((u - expect).abs() <= 1e-12 * expect.abs().max(1e-300));
    }
}

#[test]
fn selfsimilar_rejects_times_past_blowup() {
    let p = Params::at_sigma_star(3.0).unwrap();
    assert!(selfsimilar_eval(&ExplicitProfile { m: 3.0 }, &p, 1.0, 0.5, 1.0).is_err());
}
