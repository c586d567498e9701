use std::sync::Arc;

use super::*;
use crate::behaviors::{binding, TableMachine};
use crate::streams::{channels, Alphabet, Message};

fn bounds(h: usize) -> EnumerationBounds {
    let bit = Arc::new(Alphabet::new("Bit", ["0", "1"].map(Message::from_static)));
    let map = ["v", "w", "x", "y", "z"]
        .into_iter()
        .map(|c| (ChannelId::from_static(c), bit.clone()))
        .collect();
    EnumerationBounds::new(h, 1, map).unwrap()
}

fn ch(c: &'static str) -> ChannelId {
    ChannelId::from_static(c)
}

/// Copies each input message to `output` one step later.
fn delay(input: &'static str, output: &'static str) -> IntervalTransducer {
    let mut b = TableMachine::builder("delay", channels(&[input]), channels(&[output]));
    for s in ["e", "m0", "m1"] {
        b = b.state(s);
    }
    b = b
        .emit("e", Assignment::default())
        .emit("m0", binding(&[(output, "<0>")]))
        .emit("m1", binding(&[(output, "<1>")]));
    for s in ["e", "m0", "m1"] {
        for (iv, t) in [("<>", "e"), ("<0>", "m0"), ("<1>", "m1")] {
            b = b.transition(s, Assignment::default(), binding(&[(input, iv)]), &[t]);
        }
    }
    IntervalTransducer::table(b.build().unwrap())
}

/// Never writes anything.
fn silent(input: &'static str, output: &'static str) -> IntervalTransducer {
    let m = TableMachine::builder("silent", channels(&[input]), channels(&[output]))
        .state("s")
        .emit("s", Assignment::default())
        .transition("s", Assignment::default(), Assignment::default(), &["s"])
        .build()
        .unwrap();
    IntervalTransducer::table(m)
}

fn comp(name: &str, m: IntervalTransducer) -> Component {
    Component::from_behavior(name, m).unwrap()
}

/// `x -> A -> y -> B -> z`
fn pipeline(h: usize) -> System {
    System::new(
        channels(&["x"]),
        channels(&["z"]),
        vec![comp("A", delay("x", "y")), comp("B", delay("y", "z"))],
        bounds(h),
    )
}

fn equal_black_boxes(a: &System, b: &System) -> bool {
    check_system_equivalence(a, b, a.bounds()).unwrap().holds()
}

fn rejected_unchanged(before: &System, outcome: &RuleOutcome, tag: &str) {
    assert!(!outcome.accepted());
    assert!(
        outcome.report.failures().any(|v| v.tag == tag),
        "expected failure {tag}:\n{}",
        outcome.report
    );
    assert_eq!(&outcome.system, before);
}

#[test]
fn refining_by_the_same_behavior_is_accepted() {
    let s = pipeline(2);
    let out = refine_component_behavior(&s, "A", &delay("x", "y")).unwrap();
    assert!(out.accepted(), "{}", out.report);
}

#[test]
fn chaos_is_refined_by_a_deterministic_machine() {
    let s = pipeline(2);
    let s = s
        .with_component("A", comp("A", chaos(channels(&["x"]), channels(&["y"]))))
        .unwrap();
    let out = refine_component_behavior(&s, "A", &delay("x", "y")).unwrap();
    assert!(out.accepted(), "{}", out.report);
    assert!(check_system_refinement(&s, &out.system, s.bounds())
        .unwrap()
        .holds());
}

#[test]
fn silent_machine_is_not_refined_by_chaos() {
    let s = pipeline(2)
        .with_component("A", comp("A", silent("x", "y")))
        .unwrap();
    let c = chaos(channels(&["x"]), channels(&["y"]));
    let out = refine_component_behavior(&s, "A", &c).unwrap();
    rejected_unchanged(&s, &out, "inclusion");
    let Some(Counterexample::Trace { input, output }) = out.report.counterexample() else {
        panic!("expected a trace witness");
    };
    let b = s.bounds();
    assert!(behavior_of(&c, input, b).unwrap().contains(output));
    assert!(!behavior_of(&silent("x", "y"), input, b)
        .unwrap()
        .contains(output));
}

#[test]
fn refinement_requires_the_same_interface() {
    assert!(refine_component_behavior(&pipeline(2), "A", &delay("x", "w")).is_err());
    assert!(refine_component_behavior(&pipeline(2), "Q", &delay("x", "y")).is_err());
}

#[test]
fn true_invariant_agrees_with_the_plain_rule() {
    let chaotic = pipeline(2)
        .with_component("A", comp("A", chaos(channels(&["x"]), channels(&["y"]))))
        .unwrap();
    let quiet = pipeline(2)
        .with_component("A", comp("A", silent("x", "y")))
        .unwrap();
    let c = chaos(channels(&["x"]), channels(&["y"]));
    for (s, m) in [
        (&chaotic, delay("x", "y")),
        (&quiet, c.clone()),
        (&quiet, delay("x", "y")),
    ] {
        let plain = refine_component_behavior(s, "A", &m).unwrap().accepted();
        let with = refine_with_invariant(s, "A", &m, &Invariant::True).unwrap();
        assert_eq!(plain, with.accepted(), "{}", with.report);
    }
}

#[test]
fn invariant_rule_uses_the_context() {
    // A never writes y, so B may stop copying it
    let s = pipeline(2)
        .with_component("A", comp("A", silent("x", "y")))
        .unwrap();
    let relaxed = silent("y", "z");
    let inv = Invariant::Empty(ch("y"));
    let out = refine_with_invariant(&s, "B", &relaxed, &inv).unwrap();
    assert!(out.accepted(), "{}", out.report);
    // without the invariant, silent B does not refine the delay
    assert!(!refine_component_behavior(&s, "B", &relaxed)
        .unwrap()
        .accepted());
    assert!(check_system_refinement(&s, &out.system, s.bounds())
        .unwrap()
        .holds());
}

#[test]
fn invariant_violated_by_a_run_is_rejected() {
    let s = pipeline(2);
    let out = refine_with_invariant(&s, "B", &delay("y", "z"), &Invariant::Empty(ch("y"))).unwrap();
    rejected_unchanged(&s, &out, "premise 1");
    let Some(Counterexample::Run { run }) = out.report.counterexample() else {
        panic!("expected a run witness");
    };
    assert!(!Invariant::Empty(ch("y")).holds(run));
}

#[test]
fn invariant_constraining_inputs_is_rejected() {
    let s = pipeline(2);
    let out = refine_with_invariant(&s, "B", &delay("y", "z"), &Invariant::Empty(ch("x"))).unwrap();
    rejected_unchanged(&s, &out, "inputs unconstrained");
}

#[test]
fn output_channels_add_and_remove() {
    let s = pipeline(2);
    let added = add_output_channel(&s, "A", &ch("w")).unwrap();
    assert!(added.accepted(), "{}", added.report);
    assert!(added
        .system
        .component("A")
        .unwrap()
        .outputs()
        .contains(&ch("w")));
    assert!(equal_black_boxes(&s, &added.system));
    let removed = remove_output_channel(&added.system, "A", &ch("w")).unwrap();
    assert!(removed.accepted(), "{}", removed.report);
    assert!(equal_black_boxes(&s, &removed.system));

    rejected_unchanged(&s, &add_output_channel(&s, "A", &ch("x")).unwrap(), "fresh");
    rejected_unchanged(
        &s,
        &remove_output_channel(&s, "A", &ch("y")).unwrap(),
        "unused",
    );
    rejected_unchanged(
        &s,
        &remove_output_channel(&s, "B", &ch("z")).unwrap(),
        "unused",
    );
}

#[test]
fn input_channels_add_and_remove() {
    let s = pipeline(2);
    let added = add_input_channel(&s, "B", &ch("x")).unwrap();
    assert!(added.accepted(), "{}", added.report);
    assert!(equal_black_boxes(&s, &added.system));
    let removed = remove_input_channel(&added.system, "B", &ch("x")).unwrap();
    assert!(removed.accepted(), "{}", removed.report);
    assert!(equal_black_boxes(&s, &removed.system));

    rejected_unchanged(
        &s,
        &add_input_channel(&s, "B", &ch("v")).unwrap(),
        "connected",
    );
}

#[test]
fn removing_a_data_input_is_rejected_with_a_dependence_pair() {
    let s = pipeline(2);
    let out = remove_input_channel(&s, "A", &ch("x")).unwrap();
    rejected_unchanged(&s, &out, "independent");
    let Some(Counterexample::Dependence {
        first,
        second,
        output,
    }) = out.report.counterexample()
    else {
        panic!("expected a dependence witness");
    };
    let m = delay("x", "y");
    assert!(behavior_of(&m, first, s.bounds()).unwrap().contains(output));
    assert!(!behavior_of(&m, second, s.bounds())
        .unwrap()
        .contains(output));
}

#[test]
fn components_add_and_remove() {
    let s = pipeline(2);
    let added = add_component(&s, "N").unwrap();
    assert!(added.accepted());
    assert!(equal_black_boxes(&s, &added.system));
    let removed = remove_component(&added.system, "N").unwrap();
    assert!(removed.accepted());
    assert_eq!(removed.system, s);

    rejected_unchanged(&s, &add_component(&s, "A").unwrap(), "fresh name");
    rejected_unchanged(&s, &remove_component(&s, "A").unwrap(), "no outputs");
}

#[test]
fn fold_then_expand_restores_the_architecture() {
    let s = pipeline(2);
    let names = vec!["A".to_string(), "B".to_string()];
    let folded = fold_subsystem(&s, &names, &channels(&["x"]), &channels(&["z"]), "F").unwrap();
    assert!(folded.accepted(), "{}", folded.report);
    assert_eq!(
        folded
            .system
            .component_names()
            .into_iter()
            .collect::<Vec<_>>(),
        ["F"]
    );
    assert!(equal_black_boxes(&s, &folded.system));

    let expanded = expand_component(&folded.system, "F", &s).unwrap();
    assert!(expanded.accepted(), "{}", expanded.report);
    assert_eq!(expanded.system.component_names(), s.component_names());
    assert!(equal_black_boxes(&s, &expanded.system));
}

#[test]
fn expanding_into_a_different_behavior_is_rejected() {
    // z first carries a message at step 2
    let s = pipeline(3);
    let names = vec!["A".to_string(), "B".to_string()];
    let folded = fold_subsystem(&s, &names, &channels(&["x"]), &channels(&["z"]), "F")
        .unwrap()
        .system;
    let wrong = s.with_component("B", comp("B", silent("y", "z"))).unwrap();
    let out = expand_component(&folded, "F", &wrong).unwrap();
    rejected_unchanged(&folded, &out, "behavior");
    assert!(out.report.counterexample().is_some());
}

#[test]
fn expanding_onto_a_used_channel_is_rejected() {
    // C already writes y, which the subsystem uses internally
    let s = System::new(
        channels(&["x"]),
        channels(&["z", "y"]),
        vec![comp("F", delay("x", "z")), comp("C", delay("x", "y"))],
        bounds(2),
    );
    let t = System::new(
        channels(&["x"]),
        channels(&["z"]),
        vec![comp("A", delay("x", "y")), comp("B", delay("y", "z"))],
        bounds(2),
    );
    let out = expand_component(&s, "F", &t).unwrap();
    assert!(!out.accepted());
    assert_eq!(out.system, s);
}

#[test]
fn fold_must_export_consumed_channels() {
    let s = pipeline(2);
    let out = fold_subsystem(
        &s,
        &["A".to_string()],
        &channels(&["x"]),
        &ChannelSet::new(),
        "F",
    )
    .unwrap();
    rejected_unchanged(&s, &out, "outputs cover");
}

#[test]
fn renaming_is_internal_only() {
    let s = pipeline(2);
    let out = rename_channel(&s, &ch("y"), &ch("w")).unwrap();
    assert!(out.accepted(), "{}", out.report);
    assert!(out
        .system
        .component("A")
        .unwrap()
        .outputs()
        .contains(&ch("w")));
    assert!(equal_black_boxes(&s, &out.system));

    rejected_unchanged(
        &s,
        &rename_channel(&s, &ch("y"), &ch("z")).unwrap(),
        "new unused",
    );
    rejected_unchanged(
        &s,
        &rename_channel(&s, &ch("x"), &ch("w")).unwrap(),
        "internal",
    );
}

#[test]
fn system_refinement_requires_matching_interfaces() {
    let s = pipeline(2);
    assert!(check_system_refinement(&s, &s, s.bounds()).unwrap().holds());
    let other = System::new(
        channels(&["x"]),
        channels(&["y"]),
        vec![comp("A", delay("x", "y"))],
        bounds(2),
    );
    assert!(check_system_refinement(&s, &other, s.bounds()).is_err());
}

#[test]
fn step_display_names_the_rule() {
    let step = RefinementStep::Fold {
        name: "F".into(),
        components: vec!["A".into(), "B".into()],
        inputs: channels(&["x"]),
        outputs: channels(&["z"]),
    };
    assert_eq!(step.to_string(), "fold F components A B in x out z");
    assert!(step.is_architectural());
    assert_eq!(step.referenced_components(), ["A", "B"]);
}
