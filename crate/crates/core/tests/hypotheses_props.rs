use std::sync::Arc;

use impdde::hypotheses::{
    assemble_constants, check_hypotheses, estimate_k_psi, estimate_lipschitz_g, estimate_lipschitz_impulses,
    find_rho, Constant, PairEnvelope, RhoSearch, ScalarEnvelope, LOWER_BOUND_WARNING, RHO_SCAN,
};
use impdde::{ConstantSet, OperatorParams, Partition, SystemSpec};
use nalgebra::{dvector, DVector};
use proptest::prelude::*;

mod common;

fn constants(m: f64, l: f64, nq: f64, q: usize, psi: f64, k: f64) -> ConstantSet {
    ConstantSet {
        m: Constant::declared(m),
        l: Constant::declared(l),
        n_q: Constant::declared(nq),
        q,
        // linear envelopes with the given slopes
        k: PairEnvelope::Declared(Arc::new(move |u, v| Ok(k * (u + v)))),
        psi: ScalarEnvelope::Declared(Arc::new(move |x| Ok(psi * x))),
        nonlocal_zero_residual: None,
        impulse_zero_residual: None,
    }
}

fn partition(tau: f64) -> Partition {
    Partition::new(0.5, tau, vec![], vec![])
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

#[test]
fn all_zero_constants_pass() {
    let c = ConstantSet::zero(3.0, 0);
    let rep = check_hypotheses(&c, &partition(2.0), 1.0, 1.0, &[0.0], &[0.0]);
    assert!(rep.overall);
    assert!(rep.checks().iter().all(|(_, c)| c.lhs == 0.0));
    assert!(rep.warning.is_none());
}

#[test]
fn worked_arithmetic_with_quadratic_growth() {
    let mut c = constants(1.05, 0.01, 0.01, 2, 0.0, 0.0);
    c.psi = ScalarEnvelope::Declared(Arc::new(|x| Ok(x * x / 100.0)));
    c.k = PairEnvelope::Declared(Arc::new(|u, v| Ok((u + v) / 50.0)));
    let rep = check_hypotheses(&c, &partition(2.0), 1.0, 1.0, &[0.0, 0.0], &[0.0, 0.0]);
    assert!((rep.h1_ii.lhs - 0.03).abs() < 1e-15 && rep.h1_ii.pass);
    assert!((rep.h3_i.lhs - 0.126).abs() < 1e-12 && rep.h3_i.pass);
    assert!((rep.h4_i.lhs - 0.189).abs() < 1e-12 && rep.h4_i.pass);
    assert!(rep.overall);
}

#[test]
fn impulse_and_nonlocal_budget_exceeded() {
    let c = constants(1.0, 0.3, 0.1, 3, 0.0, 0.0);
    let rep = check_hypotheses(&c, &partition(2.0), 1.0, 1.0, &[0.0], &[0.0]);
    assert!((rep.h1_ii.lhs - 0.6).abs() < 1e-12);
    assert!(!rep.h1_ii.pass && !rep.overall);
}

#[test]
fn rho_search_linear_case() {
    let c = constants(1.0, 0.1, 0.0, 0, 0.0, 0.0);
    let RhoSearch::Feasible { rho } = find_rho(&c, &partition(2.0), 1.0, &[0.0], &[0.0], 10.0, false) else {
        panic!("expected a feasible radius");
    };
    assert!((rho - 1.0 / 9.0).abs() < 1e-9, "{rho}");
    let resolution = 10.0 / RHO_SCAN as f64;
    let back = check_hypotheses(&c, &partition(2.0), 1.0, rho, &[0.0], &[0.0]);
    assert!(back.h3_i.pass && back.h3_ii.pass && back.h3_iii.pass);
    let below = check_hypotheses(&c, &partition(2.0), 1.0, rho - 10.0 * resolution, &[0.0], &[0.0]);
    assert!(!(below.h3_i.pass && below.h3_ii.pass && below.h3_iii.pass));
}

#[test]
fn rho_search_trivial_and_infeasible() {
    let c = ConstantSet::zero(1.0, 0);
    assert_eq!(
        find_rho(&c, &partition(2.0), 1.0, &[0.0], &[0.0], 5.0, true),
        RhoSearch::Feasible { rho: 5.0 / RHO_SCAN as f64 }
    );
    let c = constants(1.0, 0.0, 0.0, 0, 1.0, 0.0);
    assert_eq!(
        find_rho(&c, &partition(2.0), 1.0, &[0.0], &[0.0], 100.0, false),
        RhoSearch::Infeasible { binding: "H3(i)".into() }
    );
}

#[test]
fn declared_scenario_constants_certify() {
    let params = OperatorParams::zeros(2, 1.0);
    let p = common::impulsive(100.0, None);
    let c = assemble_constants(&p, None).unwrap();
    let norm = p.phi_tilde(&params).unwrap().sup_norm();
    let rep = check_hypotheses(&c, &p.spec().partition, norm, 1.0, &params.alpha, &params.beta);
    assert!(rep.overall, "{}", rep.summary());
    assert!(rep.h1_ii.lhs <= 0.03);
    assert!(rep.warning.is_none());

    let p = common::impulsive(1.0, None);
    let c = assemble_constants(&p, None).unwrap();
    let rep = check_hypotheses(&c, &p.spec().partition, norm, 1.0, &params.alpha, &params.beta);
    assert!((rep.h1_ii.lhs - (1f64.cos() + 2.0)).abs() < 1e-12);
    assert!(!rep.h1_ii.pass && !rep.overall);
}

#[test]
fn sampled_constants_carry_the_warning() {
    let mut spec = common::impulsive_spec(100.0);
    spec.declared = Default::default();
    let p = impdde::Problem::new(spec, None).unwrap();
    assert!(assemble_constants(&p, None).is_err());
    let opts = impdde::hypotheses::EstimateOptions { samples: 300, seed: 4, radius: 2.0, radii: vec![0.5, 1.0, 2.0, 4.0] };
    let c = assemble_constants(&p, Some(&opts)).unwrap();
    let rep = check_hypotheses(&c, &p.spec().partition, 0.8, 1.0, &[0.0; 2], &[0.0; 2]);
    assert_eq!(rep.warning.as_deref(), Some(LOWER_BOUND_WARNING));
}

fn scenario_g() -> SystemSpec {
    common::impulsive_spec(100.0)
}

#[test]
fn nonlocal_estimates() {
    let e = estimate_lipschitz_g(&scenario_g(), 10_000, 2.0, 1).unwrap();
    assert!(within(e.value, 0.01, 0.05), "{}", e.value);
    assert!(e.zero_residual <= 1e-12);

    let zero = SystemSpec::new(2, Partition::new(0.5, 2.0, vec![], vec![0.3]));
    assert_eq!(estimate_lipschitz_g(&zero, 500, 2.0, 1).unwrap().value, 0.0);

    let double = SystemSpec::new(1, Partition::new(0.5, 2.0, vec![], vec![0.3]))
        .with_nonlocal(|t, ys| dvector![2.0 * ys[0].component(0, t)]);
    let e = estimate_lipschitz_g(&double, 10_000, 2.0, 1).unwrap();
    assert!(within(e.value, 2.0, 0.05), "{}", e.value);

    let none = SystemSpec::new(1, partition(2.0));
    assert!(estimate_lipschitz_g(&none, 10, 1.0, 1).is_err());
}

#[test]
fn impulse_estimates() {
    let e = estimate_lipschitz_impulses(&scenario_g(), 10_000, 2.0, 2).unwrap();
    assert!(within(e.value, 1f64.cos() / 100.0, 0.05), "{}", e.value);

    let p = Partition::new(0.5, 2.0, vec![(0.5, 0.7)], vec![]);
    let zero = SystemSpec::new(2, p.clone());
    assert_eq!(estimate_lipschitz_impulses(&zero, 500, 2.0, 2).unwrap().value, 0.0);
    let third = SystemSpec::new(2, p).with_impulse_maps(vec![|_: f64, x: &DVector<f64>| x / 3.0]);
    let e = estimate_lipschitz_impulses(&third, 10_000, 2.0, 2).unwrap();
    assert!(within(e.value, 1.0 / 3.0, 0.05), "{}", e.value);

    assert!(estimate_lipschitz_impulses(&SystemSpec::new(1, partition(2.0)), 10, 1.0, 1).is_err());
}

#[test]
fn growth_and_lipschitz_envelopes() {
    let radii = [0.5, 1.0, 2.0, 4.0];
    let sq = SystemSpec::new(1, partition(2.0)).with_drift(|_, h| dvector![h.component(0, -0.5).powi(2) / 100.0]);
    let (_, psi) = estimate_k_psi(&sq, 10_000, &radii, 3).unwrap();
    for &u in &radii {
        assert!(within(psi.eval(u), u * u / 100.0, 0.1), "Psi({u}) = {}", psi.eval(u));
    }

    let (k, psi) = estimate_k_psi(&SystemSpec::new(2, partition(2.0)), 500, &radii, 3).unwrap();
    assert!(radii.iter().all(|&u| psi.eval(u) == 0.0 && k.eval(u, u) == 0.0));

    let id = SystemSpec::new(2, partition(2.0)).with_drift(|_, h| h.eval(0.0));
    let (k, psi) = estimate_k_psi(&id, 10_000, &radii, 3).unwrap();
    for &u in &radii {
        assert!(within(psi.eval(u), u, 0.05), "Psi({u}) = {}", psi.eval(u));
        for &v in &radii {
            assert!(within(k.eval(u, v), 1.0, 0.05), "K({u}, {v}) = {}", k.eval(u, v));
        }
    }
}

#[test]
fn more_samples_never_lower_an_estimate() {
    let spec = scenario_g();
    let radii = [0.5, 1.0, 2.0];
    let mut prev = (0.0, 0.0, 0.0, 0.0);
    for samples in [50, 100, 200, 400, 800] {
        let g = estimate_lipschitz_g(&spec, samples, 2.0, 9).unwrap().value;
        let l = estimate_lipschitz_impulses(&spec, samples, 2.0, 9).unwrap().value;
        let (k, psi) = estimate_k_psi(&spec, samples, &radii, 9).unwrap();
        let cur = (g, l, k.eval(2.0, 2.0), psi.eval(2.0));
        assert!(cur.0 >= prev.0 && cur.1 >= prev.1 && cur.2 >= prev.2 && cur.3 >= prev.3, "{prev:?} -> {cur:?}");
        prev = cur;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn raising_a_constant_never_turns_fail_into_pass(
        base in prop::array::uniform6(0.0f64..0.4),
        which in 0usize..6,
        bump in 0.0f64..1.0,
        rho in 0.05f64..3.0,
    ) {
        let [m, l, nq, psi, k, ab] = base;
        let m = 1.0 + 2.0 * m;
        let part = partition(1.5);
        let report = |c: &ConstantSet, a: f64| {
            check_hypotheses(c, &part, 0.7, rho, &[a, 0.0], &[a, 0.0])
        };
        let c0 = constants(m, l, nq, 2, psi, k);
        let mut v = [m, l, nq, psi, k, ab];
        v[which] += bump;
        let c1 = constants(v[0], v[1], v[2], 2, v[3], v[4]);
        let (r0, r1) = (report(&c0, ab), report(&c1, v[5]));
        for ((_, a), (_, b)) in r0.checks().iter().zip(r1.checks().iter()) {
            prop_assert!(a.pass || !b.pass);
        }
    }
}
