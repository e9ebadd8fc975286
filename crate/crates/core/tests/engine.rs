use nnverify_core::{
    brute_force_oracle, verify, Config, Error, LinearConstraint, NetworkBuilder, NodeId, Status, VerificationProblem,
};
use proptest::prelude::*;

/// `m = max(ReLU(a·x + b), ReLU(c·y + d))` over the unit square, asking
/// for `m ≥ t`.
fn problem(a: f64, b: f64, c: f64, d: f64, t: f64) -> VerificationProblem {
    let mut nb = NetworkBuilder::new();
    nb.input("x").input("y").relu("r", b, &[(a, "x")]).relu("s", d, &[(c, "y")]).maxpool("m", &["r", "s"]);
    let mut prop = Vec::new();
    for i in 0..2 {
        prop.push(LinearConstraint::at_least(vec![(1.0, NodeId(i))], 0.0));
        prop.push(LinearConstraint::at_most(vec![(1.0, NodeId(i))], 1.0));
    }
    prop.push(LinearConstraint::at_least(vec![(1.0, NodeId(4))], t));
    VerificationProblem::new(nb.build().unwrap(), prop).unwrap()
}

#[test]
fn analytic_threshold() {
    // max over the square is max(ReLU(a + b), ReLU(c + d)) for positive slopes
    let reachable = problem(1.0, 0.2, 0.5, 0.1, 1.19);
    match verify(&reachable, &Config::default()).unwrap().status {
        Status::Satisfiable { inputs, .. } => assert!(reachable.check_witness(&inputs, 1e-4).unwrap()),
        Status::Unsatisfiable => panic!("1.2 is reachable"),
    }
    let unreachable = problem(1.0, 0.2, 0.5, 0.1, 1.21);
    assert_eq!(verify(&unreachable, &Config::default()).unwrap().status, Status::Unsatisfiable);
}

#[test]
fn builder_rejects_invalid_networks() {
    let mut nb = NetworkBuilder::new();
    nb.input("x").relu("y", 0.0, &[(1.0, "z")]);
    assert!(matches!(nb.build(), Err(Error::UnknownNode(_))));
    let mut nb = NetworkBuilder::new();
    nb.input("x");
    let net = nb.build().unwrap();
    let only_upper = vec![LinearConstraint::at_most(vec![(1.0, NodeId(0))], 1.0)];
    assert!(matches!(VerificationProblem::new(net, only_upper), Err(Error::UnboundedInput(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agrees_with_oracle(a in -1.0f64..1.0, b in -0.5f64..0.5, c in -1.0f64..1.0, d in -0.5f64..0.5, t in 0.0f64..1.2) {
        let p = problem(a, b, c, d, t);
        let r = verify(&p, &Config::default()).unwrap();
        let o = brute_force_oracle(&p).unwrap();
        prop_assert_eq!(r.status.is_sat(), o.witness.is_some());
        let ablated = Config { cache: false, inference: false, refine: false, ..Config::default() };
        prop_assert_eq!(verify(&p, &ablated).unwrap().status.is_sat(), o.witness.is_some());
    }
}
