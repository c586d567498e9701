use std::collections::BTreeMap;
use std::sync::Arc;

use super::*;
use crate::rules::Counterexample;
use crate::streams::{channels, Alphabet, TimedStream};

fn bit() -> Arc<Alphabet> {
    Arc::new(Alphabet::new("Bit", ["0", "1"].map(Message::from_static)))
}

fn bounds(h: usize) -> EnumerationBounds {
    let map = ["x", "y", "z", "w"]
        .into_iter()
        .map(|c| (ChannelId::from_static(c), bit()))
        .collect();
    EnumerationBounds::new(h, 1, map).unwrap()
}

fn ch(c: &'static str) -> ChannelId {
    ChannelId::from_static(c)
}

/// Repeats each input message on `output` one step later.
fn delay(name: &str, input: &'static str, output: &'static str) -> IntervalTransducer {
    let mut b = TableMachine::builder(name, channels(&[input]), channels(&[output]));
    for s in ["e", "m0", "m1"] {
        b = b.state(s);
    }
    b = b
        .emit("e", Assignment::default())
        .emit("m0", binding(&[(output, "<0>")]))
        .emit("m1", binding(&[(output, "<1>")]));
    for s in ["e", "m0", "m1"] {
        b = b
            .transition(s, Assignment::default(), binding(&[(input, "<>")]), &["e"])
            .transition(
                s,
                Assignment::default(),
                binding(&[(input, "<0>")]),
                &["m0"],
            )
            .transition(
                s,
                Assignment::default(),
                binding(&[(input, "<1>")]),
                &["m1"],
            );
    }
    IntervalTransducer::table(b.build().unwrap())
}

fn stream(c: &'static str, ivs: &[&str]) -> NamedStreamTuple {
    let s = TimedStream::new(ivs.iter().map(|i| i.parse().unwrap()).collect());
    NamedStreamTuple::new(ivs.len(), [(ch(c), s)].into_iter().collect()).unwrap()
}

#[test]
fn delay_shifts_by_one_step() {
    let m = delay("d", "x", "y");
    let outs = behavior_of(&m, &stream("x", &["<1>", "<0>", "<>"]), &bounds(3)).unwrap();
    assert_eq!(outs.len(), 1);
    assert_eq!(
        outs.into_iter().next().unwrap(),
        stream("y", &["<>", "<1>", "<0>"])
    );
}

#[test]
fn chaos_produces_every_in_bounds_output() {
    let m = chaos(channels(&["x"]), channels(&["y"]));
    let outs = behavior_of(&m, &stream("x", &["<>", "<>"]), &bounds(2)).unwrap();
    // three intervals per step: <>, <0>, <1>
    assert_eq!(outs.len(), 9);
}

#[test]
fn feedback_is_seen_in_the_same_step() {
    // y = delay(x), z = delay(y): a two-step pipeline through an internal channel
    let m = compose(vec![delay("a", "x", "y"), delay("b", "y", "z")]).unwrap();
    assert_eq!(m.inputs(), &channels(&["x"]));
    assert_eq!(m.outputs(), &channels(&["y", "z"]));
    let hidden = adapt(&m, &channels(&["x"]), &channels(&["z"])).unwrap();
    let outs = behavior_of(&hidden, &stream("x", &["<1>", "<>", "<>"]), &bounds(3)).unwrap();
    assert_eq!(
        outs.into_iter().collect::<Vec<_>>(),
        [stream("z", &["<>", "<>", "<1>"])]
    );
}

#[test]
fn composing_two_writers_of_one_channel_fails() {
    assert!(compose(vec![delay("a", "x", "y"), delay("b", "z", "y")]).is_err());
}

#[test]
fn adapt_ignores_added_inputs() {
    let m = adapt(
        &delay("d", "x", "y"),
        &channels(&["w", "x"]),
        &channels(&["y"]),
    )
    .unwrap();
    let b = bounds(2);
    let mut x = stream("x", &["<0>", "<>"]);
    let quiet = behavior_of(&m, &x.merge(&stream("w", &["<>", "<>"])).unwrap(), &b).unwrap();
    x = x.merge(&stream("w", &["<1>", "<0>"])).unwrap();
    assert_eq!(quiet, behavior_of(&m, &x, &b).unwrap());
}

#[test]
fn adapt_collapses_and_checks_its_interface() {
    let d = delay("d", "x", "y");
    assert_eq!(adapt(&d, d.inputs(), d.outputs()).unwrap(), d);
    let once = adapt(&d, &channels(&["w", "x"]), &channels(&["y"])).unwrap();
    let twice = adapt(&once, &channels(&["w", "x", "z"]), &channels(&["y"])).unwrap();
    let direct = adapt(&d, &channels(&["w", "x", "z"]), &channels(&["y"])).unwrap();
    assert_eq!(twice, direct);
    assert!(adapt(&d, &channels(&["w"]), &channels(&["y"])).is_err());
    assert!(adapt(&d, &channels(&["x"]), &channels(&["z"])).is_err());
}

#[test]
fn rename_relabels_the_interface() {
    let map: BTreeMap<_, _> = [(ch("x"), ch("z")), (ch("y"), ch("w"))]
        .into_iter()
        .collect();
    let m = rename(&delay("d", "x", "y"), &map).unwrap();
    assert_eq!(m.inputs(), &channels(&["z"]));
    assert_eq!(m.outputs(), &channels(&["w"]));
    let outs = behavior_of(&m, &stream("z", &["<0>", "<>"]), &bounds(2)).unwrap();
    assert_eq!(
        outs.into_iter().collect::<Vec<_>>(),
        [stream("w", &["<>", "<0>"])]
    );
    let merge: BTreeMap<_, _> = [(ch("x"), ch("y"))].into_iter().collect();
    assert!(rename(&delay("d", "x", "y"), &merge).is_err());
}

#[test]
fn unplug_feeds_silence() {
    let m = compose(vec![delay("a", "x", "y"), delay("b", "z", "w")]).unwrap();
    let u = unplug(&m, &ch("z")).unwrap();
    assert_eq!(u.inputs(), &channels(&["x"]));
    let b = bounds(2);
    let x = stream("x", &["<1>", "<>"]);
    let silent = x.merge(&stream("z", &["<>", "<>"])).unwrap();
    assert_eq!(
        behavior_of(&u, &x, &b).unwrap(),
        behavior_of(&m, &silent, &b).unwrap()
    );
    assert!(unplug(&u, &ch("z")).is_err());
}

#[test]
fn unplug_shrinks_an_adaption() {
    let d = delay("d", "x", "y");
    let a = adapt(&d, &channels(&["w", "x"]), &channels(&["y"])).unwrap();
    assert_eq!(unplug(&a, &ch("w")).unwrap(), d);
}

#[test]
fn deterministic_machine_refines_chaos_but_not_conversely() {
    let b = bounds(2);
    let d = delay("d", "x", "y");
    let c = chaos(channels(&["x"]), channels(&["y"]));
    assert!(refines_behavior(&d, &c, &b).unwrap().holds());
    let v = refines_behavior(&c, &d, &b).unwrap();
    let Some(Counterexample::Trace { input, output }) = v.counterexample() else {
        panic!("expected a trace witness, got {v:?}");
    };
    // the witness is a real trace of chaos the delay cannot produce
    assert!(behavior_of(&c, input, &b).unwrap().contains(output));
    assert!(!behavior_of(&d, input, &b).unwrap().contains(output));
}

#[test]
fn equivalence_is_reflexive_and_interface_checked() {
    let b = bounds(2);
    let d = delay("d", "x", "y");
    assert!(equivalent(&d, &d, &b).unwrap().holds());
    assert!(refines_behavior(&d, &delay("e", "x", "z"), &b).is_err());
}

#[test]
fn validation_flags_burst_and_empty_choices() {
    let b = bounds(2);
    let burst = TableMachine::builder("b", ChannelSet::new(), channels(&["y"]))
        .state("s")
        .emit("s", binding(&[("y", "<0,1>")]))
        .transition("s", Assignment::default(), Assignment::default(), &["s"])
        .build()
        .unwrap();
    let report = validate_transducer(&IntervalTransducer::table(burst), &b);
    assert!(report.failures().any(|v| v.tag == "burst exceeded"));

    let stuck = TableMachine::builder("s", channels(&["x"]), channels(&["y"]))
        .state("s")
        .emit("s", Assignment::default())
        .transition("s", Assignment::default(), binding(&[("x", "<>")]), &["s"])
        .build()
        .unwrap();
    let report = validate_transducer(&IntervalTransducer::table(stuck), &b);
    assert!(report.failures().any(|v| v.tag == "empty choice set"));
    assert!(validate_transducer(&delay("d", "x", "y"), &b).holds());
}
