use blowup_core::analysis::*;
use blowup_core::model::*;
use blowup_core::shooting::*;
use blowup_core::Error;

#[test]
fn explicit_edge_backward_run_matches_closed_form_at_origin() {
    let p = Params::at_sigma_star(3.0).unwrap();
    let cfg = ShootConfig::default();
    let o = shoot_from_interface(&p, explicit_support_edge(3.0), &cfg).unwrap();
    assert!(matches!(o.kind, BackwardKind::GoodCandidate { .. }));
    let fit = fit_origin(&o.trajectory, &p, o.origin_window(cfg.tol.capture_radius)).unwrap();
    assert_eq!(fit.matched_law, OriginLaw::TwoOverM1);
}

#[test]
fn invalid_inputs_are_rejected() {
    let p = Params::new(3.0, 2.0).unwrap();
    let cfg = ShootConfig::default();
    assert!(shoot_from_interface(&p, 0.0, &cfg).is_err());
    assert!(shoot_from_origin(&p, -1.0, &cfg).is_err());
    assert!(matches!(find_good_profile(&p, Some((2.0, 1.0)), &cfg), Err(Error::InvalidBracket(_))));
    assert!(classify_c_intervals(&p, &[2.0, 1.0], &cfg).is_err());
    assert!(regime_scan(3.0, &[], &[1.0], &cfg).is_err());
}

#[test]
fn interface_search_lands_between_tail_and_transversal() {
    let p = Params::new(4.0, 4.0).unwrap();
    let cfg = ShootConfig::default();
    let s = find_interface_c(&p, (2.1544346900318843, 3.1622776601683795), &cfg).unwrap();
    assert!(s.c_star > 2.15 && s.c_star < 3.17);
    let ForwardKind::Interface { xi0, gamma } = s.outcome.kind else {
        panic!("expected an interface, got {:?}", s.outcome.kind);
    };
    assert!((interface_point(&p, gamma) - xi0).abs() <= 1e-12 * xi0);
    let below = shoot_from_origin(&p, s.c_star * 0.99, &cfg).unwrap();
    let above = shoot_from_origin(&p, s.c_star * 1.01, &cfg).unwrap();
    assert_eq!(below.kind.class(), ForwardClass::Tail);
    assert_eq!(above.kind.class(), ForwardClass::TransversalZero);
}

#[test]
fn tail_constants_increase_with_origin_coefficient() {
    let p = Params::new(3.0, 0.5).unwrap();
    let cfg = ShootConfig::default();
    let k = classify_c_intervals(&p, &logspace(-1.0, 1.0, 5), &cfg).unwrap();
    let lnk: Vec<f64> = k
        .entries
        .iter()
        .map(|(_, kind)| match kind {
            ForwardKind::Tail { ln_k } => *ln_k,
            other => panic!("expected a tail, got {other:?}"),
        })
        .collect();
    assert!(lnk.windows(2).all(|w| w[1] > w[0]));
}
