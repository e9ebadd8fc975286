use nnverify::{gen_random_network, parse_problem, read_lp, write_problem, Shape};
use nnverify_core::lp::export_lp;
use nnverify_core::relaxation::{build_relaxation, compute_initial_bounds};
use nnverify_core::{NodeId, NodeKind, Relation};
use proptest::prelude::*;

const RELU: &str = "Input x\nReLU y 0.0 1.0 x\nAssert >= 1.0 1.0 x\nAssert <= -1.0 1.0 x\nAssert <= 0.5 1.0 y";

fn code(text: &str) -> &'static str {
    parse_problem(text).unwrap_err().code()
}

#[test]
fn relu_example_parses() {
    let p = parse_problem(RELU).unwrap();
    let net = p.network();
    assert_eq!(net.inputs(), &[NodeId(0)]);
    assert_eq!(net.node(NodeId(1)).kind, NodeKind::Relu);
    assert_eq!(p.input_box(), &[(-1.0, 1.0)]);
    let last = p.property().last().unwrap();
    assert_eq!(last.relation, Relation::AtLeast);
    assert_eq!((last.rhs, last.terms.clone()), (0.5, vec![(1.0, NodeId(1))]));
}

#[test]
fn witness_checks_on_relu_example() {
    let p = parse_problem(RELU).unwrap();
    assert!(p.check_witness(&[0.5], 1e-4).unwrap());
    assert!(!p.check_witness(&[0.4], 1e-4).unwrap());
}

#[test]
fn error_codes() {
    assert_eq!(code("Input x\nReLU y 0.0 1.0 z"), "E_UNKNOWN_NODE");
    assert_eq!(code("Input x\nAssert <= 0.5 1.0 x"), "E_UNBOUNDED_INPUT");
    assert_eq!(code("Input x\nInput x\n"), "E_DUPLICATE_ID");
    assert_eq!(code("Input x\nReLU a 0 1 b\nReLU b 0 1 a\n"), "E_CYCLE");
    assert_eq!(code("Input x\nReLU y 0.0 1.0\n"), "E_PARSE");
    assert_eq!(code("Input x\nReLU y 0.0 1.0 x 2.0\n"), "E_PARSE");
    assert_eq!(code("Input x-1\n"), "E_PARSE");
    assert_eq!(code("Input x\nAssert == 1 1 x\n"), "E_PARSE");
    assert_eq!(code("Input x\nSoftmax y x\n"), "E_PARSE");
    assert_eq!(code("Input x\nAssert <= 0 1 x\nAssert >= 1 1 x\nAssert <= 0 1 q\n"), "E_UNKNOWN_NODE");
    assert_eq!(code("Input x\nAssert <= 0 1 x 1 x\n"), "E_PARSE");
    assert_eq!(code("Input x\nReLU y 0 1 x 1 x\n"), "E_PARSE");
}

#[test]
fn error_messages_carry_line_numbers() {
    let e = parse_problem("Input x\n\n# c\nReLU y 0.0 1.0 z").unwrap_err();
    assert!(e.to_string().contains("line 4"), "{e}");
}

#[test]
fn golden_lp_export() {
    let problem = parse_problem(include_str!("data/relu.pnet")).unwrap();
    let relax = build_relaxation(&problem, &compute_initial_bounds(&problem));
    let golden = include_str!("data/relu.lp");
    assert_eq!(export_lp(&relax.lp), golden);
    let reread = read_lp(golden).unwrap();
    assert_eq!(export_lp(&reread), golden);
    assert_eq!(reread.rows(), relax.lp.rows());
    assert_eq!(reread.vars(), relax.lp.vars());
}

fn shape_strategy() -> impl Strategy<Value = String> {
    (1usize..=4, 1usize..=5, 0usize..=2, 1usize..=3, 1usize..=3).prop_map(|(n, r, pools, fan, out)| {
        let mut s = format!("input:{n},relu:{r}");
        if pools > 0 {
            s.push_str(&format!(",maxpool:{pools}x{}", fan.min(r)));
        }
        s.push_str(&format!(",linear:{out}"));
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_files_parse_and_round_trip(seed in any::<u64>(), shape in shape_strategy(), k in 0usize..3) {
        let text = gen_random_network(seed, &Shape::parse(&shape).unwrap(), k);
        prop_assert_eq!(&text, &gen_random_network(seed, &Shape::parse(&shape).unwrap(), k));
        let p = parse_problem(&text).unwrap();
        let again = parse_problem(&write_problem(&p)).unwrap();
        prop_assert_eq!(&p, &again);
        prop_assert_eq!(p.property().len(), 2 * p.network().inputs().len() + k);
    }

    #[test]
    fn lp_export_reparses_to_identical_text(seed in any::<u64>(), shape in shape_strategy()) {
        let p = parse_problem(&gen_random_network(seed, &Shape::parse(&shape).unwrap(), 1)).unwrap();
        let relax = build_relaxation(&p, &compute_initial_bounds(&p));
        let text = export_lp(&relax.lp);
        let reread = read_lp(&text).unwrap();
        prop_assert_eq!(export_lp(&reread), text);
        prop_assert_eq!(reread.vars(), relax.lp.vars());
    }
}
