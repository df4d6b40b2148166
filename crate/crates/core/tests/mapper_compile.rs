mod common;

use std::collections::BTreeMap;

use common::*;
use proptest::prelude::*;
use smsauth::mapper::{compile, from_portable, render_challenge, step_similarity, to_portable, MapperError};
use smsauth::workflow::{Step, StepType};

#[test]
fn compiled_fixture_shape() {
    let def = definition();
    assert_eq!(def.workflow_id, "order_financing");
    let types: Vec<_> = def.steps.iter().map(|s| s.step_type).collect();
    assert_eq!(types, [StepType::Confirmation, StepType::OptionSelection, StepType::Notification]);
    assert_eq!(def.templates.len(), 1);
    assert_eq!(def.templates[0].answer_slot, "amount");
    assert_eq!(def.sensitive_slots().into_iter().collect::<Vec<_>>(), ["amount"]);
    assert!(def.template_for_event("OrderConfirmation").is_some());
    assert!(def.template_for_event("RequestForLoan").is_none());
}

#[test]
fn order_question_is_the_confirmation_with_the_amount_blanked() {
    let def = definition();
    let payload = BTreeMap::from([("order_no".to_string(), "2987".to_string()), ("amount".to_string(), "1000".to_string())]);
    let (q, a) = render_challenge(&def.templates[0], &payload).unwrap();
    assert_eq!(q, "What was the amount of your last order: Order No 2987 of ___ confirmed");
    assert_eq!(a, "1000");
}

#[test]
fn carried_over_slot_stays_readable_in_four_step_flow() {
    let def = compile(FLOW_4).unwrap();
    assert_eq!(def.steps.len(), 4);
    // order_no is answered at the repayment step but produced by the first step
    assert!(!def.sensitive_slots().contains("order_no"));
    assert!(def.steps[0].template_ref.is_some());
}

#[test]
fn portable_roundtrip() {
    for src in [FLOW, FLOW_4] {
        let def = compile(src).unwrap();
        let text = to_portable(&def);
        assert_eq!(text.lines().count(), 1 + def.steps.len() + def.templates.len());
        assert_eq!(from_portable(&text).unwrap(), def);
    }
}

#[test]
fn portable_errors_carry_line_numbers() {
    let text = to_portable(&definition());
    let mut lines: Vec<_> = text.lines().map(str::to_string).collect();
    lines[2] = "{not json".into();
    match from_portable(&lines.join("\n")) {
        Err(MapperError::Portable { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn script_errors() {
    let dup = format!("{FLOW}step confirm_order type=Notification actor=seller reply=buyer text=\"again\"\n");
    match compile(&dup) {
        Err(MapperError::Parse { line, .. }) => assert_eq!(line, FLOW.lines().count() + 1),
        other => panic!("{other:?}"),
    }
    let unbound = FLOW.replace("approved: {choice}", "approved: {rate}");
    assert!(matches!(compile(&unbound), Err(MapperError::UnboundSlot { .. })));
}

fn steps() -> Vec<Step> {
    compile(FLOW_4).unwrap().steps
}

proptest! {
    #[test]
    fn similarity_is_a_symmetric_unit_measure(i in 0usize..4, j in 0usize..4) {
        let s = steps();
        let ab = step_similarity(&s[i], &s[j]);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, step_similarity(&s[j], &s[i]));
        prop_assert_eq!(step_similarity(&s[i], &s[i]), 1.0);
    }

    #[test]
    fn literal_values_do_not_change_similarity(a in 1u32..100_000, b in 1u32..100_000) {
        let base = &steps()[0];
        let mut x = base.clone();
        x.message_template = format!("Order No {a} of {b} confirmed");
        let mut y = base.clone();
        y.message_template = format!("Order No {b} of {a} confirmed");
        prop_assert_eq!(step_similarity(&x, &y), 1.0);
    }
}
