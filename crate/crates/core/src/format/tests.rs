use super::*;
use crate::rules::{Invariant, RefinementStep};
use crate::streams::{channels, ChannelId};

const TOGGLE: &str = "\
bounds horizon 3 burst 1

alphabet Bit = 0 1

channel x y z : Bit

machine copy
  in x
  out y
  initial idle
  state idle
    emit
    advance / x=<0> -> zero
    advance / x=<1> -> one
    advance / x=<> -> idle
  end
  state one
    emit y=<1>
    advance y=<1> / -> idle
  end
  state zero
    emit y=<0>
    advance / -> idle one
  end
end

system
  in x
  out z
  component A
    in x
    out y
    behavior machine copy
  end
  component B
    in y
    out z
    behavior chaos y -> z
  end
end
";

fn messages(e: &ParseErrors) -> Vec<String> {
    e.0.iter().map(|e| e.message.clone()).collect()
}

#[test]
fn canonical_architecture_round_trips() {
    let arch = parse_architecture(TOGGLE).unwrap();
    assert_eq!(arch.machines["copy"].states().len(), 3);
    assert_eq!(render_architecture(&arch.system).unwrap(), TOGGLE);
    let again = parse_architecture(&render_architecture(&arch.system).unwrap()).unwrap();
    assert_eq!(again, arch);
}

#[test]
fn nested_behaviors_round_trip() {
    let text = TOGGLE.replace("  component B\n    in y\n", "  component B\n    in x y\n").replace(
        "    behavior chaos y -> z\n",
        "    behavior adapt x y -> z\n      compose\n        chaos y -> z\n        unplug x\n          rename y->x\n            chaos y ->\n          end\n        end\n      end\n    end\n",
    );
    let arch = parse_architecture(&text).unwrap();
    assert_eq!(render_architecture(&arch.system).unwrap(), text);
}

#[test]
fn undeclared_channels_are_reported_with_positions() {
    let text = TOGGLE.replace("behavior chaos y -> z", "behavior chaos y -> v w");
    let err = parse_architecture_unchecked(&text).unwrap_err();
    let unknown: Vec<&ParseError> = err
        .0
        .iter()
        .filter(|e| e.message.starts_with("unknown"))
        .collect();
    assert_eq!(unknown.len(), 2, "{err}");
    assert_eq!(unknown[0].message, "unknown channel v");
    assert_eq!((unknown[0].line, unknown[0].col), (38, 25));
    assert!(messages(&err)
        .iter()
        .any(|m| m.starts_with("interface mismatch")));
}

#[test]
fn empty_input_defines_no_system() {
    let err = parse_architecture("# nothing here\n").unwrap_err();
    assert_eq!(messages(&err), ["no system defined"]);
}

#[test]
fn duplicate_component_names_cite_condition_one() {
    let text = "\
bounds horizon 1 burst 1
alphabet Bit = 0 1
channel x : Bit
system
  in x
  out
  component A
    in x
    out
    behavior chaos x ->
  end
  component A
    in
    out
    behavior chaos ->
  end
end
";
    assert!(parse_architecture_unchecked(text).is_ok());
    let err = parse_architecture(text).unwrap_err();
    assert_eq!(err.0.len(), 1);
    assert!(err.0[0].message.contains("condition (1)"), "{err}");
    assert_eq!(err.0[0].line, 4);
}

#[test]
fn messages_must_belong_to_the_alphabet() {
    let text = TOGGLE.replace("emit y=<1>", "emit y=<2>");
    let err = parse_architecture_unchecked(&text).unwrap_err();
    assert!(messages(&err)
        .iter()
        .any(|m| m == "message 2 is not in alphabet Bit of channel y"));
}

#[test]
fn structural_errors_stop_parsing() {
    let err = parse_architecture("bounds horizon 1 burst 1\nsystem\n  in\n").unwrap_err();
    assert!(
        messages(&err)[0].starts_with("unterminated system block"),
        "{err}"
    );
    let err = parse_architecture("bounds horizon one burst 1\n").unwrap_err();
    assert_eq!(err.0[0].line, 1);
    let err = parse_architecture("system\nend\n").unwrap_err();
    assert!(messages(&err)[0].contains("bounds must be declared"));
}

#[test]
fn unknown_machine_and_state_are_reported() {
    let text = TOGGLE.replace("behavior machine copy", "behavior machine paste");
    assert!(messages(&parse_architecture_unchecked(&text).unwrap_err())
        .contains(&"unknown machine paste".to_string()));
    let text = TOGGLE.replace("-> idle one", "-> idle two");
    assert!(messages(&parse_architecture_unchecked(&text).unwrap_err())
        .contains(&"unknown state two".to_string()));
}

#[test]
fn scripts_parse_each_rule() {
    let text = "\
alphabet Bit = 0 1
channel w : Bit

step one
  add-component N
  add-output N w
  refine-with-invariant B
    invariant prefix z y and empty w
    chaos y -> z
  end
  fold F components A B in x out z
  rename y v
end

step two
  expand F
    system
      in x
      out z
      component C
        in x
        out z
        behavior chaos x -> z
      end
    end
  end
end
";
    let script = parse_script(text).unwrap();
    assert_eq!(script.channels.len(), 1);
    assert_eq!(script.steps.len(), 2);
    let rules: Vec<&str> = script.steps[0]
        .applications
        .iter()
        .map(|a| a.rule_name())
        .collect();
    assert_eq!(
        rules,
        [
            "add-component",
            "add-output",
            "refine-with-invariant",
            "fold",
            "rename"
        ]
    );
    let RefinementStep::RefineWithInvariant { invariant, .. } = &script.steps[0].applications[2]
    else {
        panic!();
    };
    assert_eq!(
        invariant,
        &Invariant::and(vec![
            Invariant::Prefix {
                follower: ChannelId::from_static("z"),
                leader: ChannelId::from_static("y"),
            },
            Invariant::Empty(ChannelId::from_static("w")),
        ])
    );
    let RefinementStep::Expand { subsystem, .. } = &script.steps[1].applications[0] else {
        panic!();
    };
    assert_eq!(
        subsystem.component_names().into_iter().collect::<Vec<_>>(),
        ["C"]
    );
    assert_eq!(
        parse_script(&render_script(&script).unwrap()).unwrap(),
        script
    );
}

#[test]
fn empty_script_has_no_steps() {
    let script = parse_script("").unwrap();
    assert!(script.steps.is_empty() && script.channels.is_empty());
    assert_eq!(render_script(&script).unwrap(), "");
}

#[test]
fn unknown_rules_are_errors() {
    let err = parse_script("step s\n  merge A B\nend\n").unwrap_err();
    assert_eq!(messages(&err), ["unknown rule \"merge\""]);
    assert_eq!((err.0[0].line, err.0[0].col), (2, 3));
}

#[test]
fn environments_parse_and_render() {
    let x = parse_env("x = <0> <> <1,0>\ny = <> <> <>\n").unwrap();
    assert_eq!(x.horizon(), 3);
    assert_eq!(x.domain(), channels(&["x", "y"]));
    assert_eq!(render_env(&x), "x = <0> <> <1,0>\ny = <> <> <>\n");
    let err = parse_env("x = <0>\ny = <> <>\n").unwrap_err();
    assert!(messages(&err)[0].contains("earlier channels have 1"));
    assert_eq!(parse_env("").unwrap().horizon(), 0);
}
