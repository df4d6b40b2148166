mod common;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::thread;

use chrono::{FixedOffset, TimeZone};
use common::*;
use smsauth::authenticator::{AuthPolicy, Decision};
use smsauth::gateway::{
    Directory, Gateway, GatewayConfig, Mode, UserEntry, AWAITING_VERIFICATION, BLOCKED, FLAGGED, NOT_YOUR_TURN,
    WRONG_ANSWER,
};
use smsauth::ledger::Ledger;
use smsauth::risk::{discretize, fit_profile, UserProfile};
use smsauth::workflow::InstanceStatus;

const APPROVED: &str = "Loan for Order No 2987 approved: Pay 1050 in 30 days";
const QUESTION: &str = "What was the amount of your last order: Order No 2987 of ___ confirmed";

/// Twenty mid-morning purchases, the kind of history that makes a 2am
/// transaction look out of character.
fn daytime_profile() -> UserProfile {
    let tz = FixedOffset::east_opt(3 * 3600).unwrap();
    let mut prev = None;
    let mut history = Vec::new();
    for day in 0..20 {
        let ts = tz.with_ymd_and_hms(2024, 2, 10 + day, 9, 15 + day, 0).unwrap().timestamp();
        let amount = if day % 4 == 3 { 2500.0 } else { 600.0 + day as f64 };
        history.push(discretize(amount, ts, prev, 3 * 3600).unwrap());
        prev = Some(ts);
    }
    fit_profile("buyer1", &history, 1.0)
}

fn suspicious_gateway(policy: AuthPolicy) -> Gateway {
    let profiles = BTreeMap::from([("buyer1".to_string(), daytime_profile())]);
    gateway_with(profiles, GatewayConfig { policy, ..Default::default() })
}

fn open_order(gw: &Gateway, order_no: u32, amount: u32, ts: i64) {
    let out = send(gw, SELLER, &format!("@buyer1 Order No {order_no} of {amount}"), ts);
    assert!(texts(&out).contains(&format!("Order No {order_no} of {amount} confirmed")), "{out:?}");
}

#[test]
fn off_hours_loan_request_is_challenged_then_approved() {
    let gw = suspicious_gateway(AuthPolicy::default());
    open_order(&gw, 2987, 1000, T0);
    let out = send(&gw, BUYER, "1", T0 + 300);
    assert_eq!(texts(&out), vec![QUESTION]);
    let report = gw.session_snapshot(BUYER).unwrap().last_report.unwrap();
    assert_eq!(report.decision, Decision::Challenge(1));
    assert!(report.risk >= report.threshold);

    let out = send(&gw, BUYER, "KES 1,000", T0 + 360);
    assert!(texts(&out).contains(&APPROVED.to_string()), "{out:?}");
    assert_eq!(
        event_names(&gw),
        vec!["OrderConfirmation", "ChallengeIssued", "AugmentedAuthentication", "RequestForLoan"]
    );
    let id = gw.instance_of("buyer1").unwrap();
    assert_eq!(gw.instance_snapshot(&id).unwrap().status, InstanceStatus::Completed);
    assert!(gw.with_ledger(|l| l.verify_chain().ok));
}

#[test]
fn nobody_else_can_move_a_challenged_instance() {
    let gw = suspicious_gateway(AuthPolicy::default());
    open_order(&gw, 2987, 1000, T0);
    send(&gw, BUYER, "1", T0 + 300);
    assert_eq!(texts(&send(&gw, SELLER, "@buyer1 Order No 5 of 5", T0 + 301)), vec![AWAITING_VERIFICATION]);
    assert_eq!(texts(&send(&gw, BANK, "1", T0 + 302)), vec![AWAITING_VERIFICATION]);
    // nothing past the challenge was recorded
    assert_eq!(event_names(&gw), vec!["OrderConfirmation", "ChallengeIssued"]);
}

#[test]
fn wrong_answer_with_no_older_material_flags_then_admin_resets() {
    let gw = suspicious_gateway(AuthPolicy::default());
    open_order(&gw, 2987, 1000, T0);
    send(&gw, BUYER, "1", T0 + 300);
    assert_eq!(texts(&send(&gw, BUYER, "999", T0 + 310)), vec![FLAGGED]);
    let id = gw.instance_of("buyer1").unwrap();
    assert_eq!(gw.instance_snapshot(&id).unwrap().status, InstanceStatus::FraudFlagged);
    assert_eq!(texts(&send(&gw, BUYER, "1000", T0 + 320)), vec![BLOCKED]);
    assert_eq!(gw.profile_snapshot("buyer1").unwrap().invalid_window.len(), 1);

    // only an admin may lift the flag
    assert!(gw.reset(&id, "seller1", T0 + 330).is_err());
    assert_eq!(texts(&send(&gw, ADMIN, &format!("RESET {id}"), T0 + 340)), vec![format!("Reset {id}")]);
    let inst = gw.instance_snapshot(&id).unwrap();
    assert_eq!(inst.status, InstanceStatus::Active);
    let names = event_names(&gw);
    assert_eq!(names[names.len() - 2..], ["TransactionFlagged", "FraudReset"]);
    // the reset instance asks the buyer again, without the stale challenge
    assert!(inst.pending_challenges().is_empty());
}

#[test]
fn second_round_draws_on_older_transactions() {
    let policy = AuthPolicy { k_questions: 1, ..Default::default() };
    let gw = suspicious_gateway(policy);

    // first order, verified and completed
    open_order(&gw, 2987, 1000, T0);
    assert_eq!(texts(&send(&gw, BUYER, "1", T0 + 300)), vec![QUESTION]);
    assert!(texts(&send(&gw, BUYER, "1000", T0 + 330)).contains(&APPROVED.to_string()));

    // second order: round one asks about it, round two about the first
    open_order(&gw, 3001, 700, T0 + 600);
    let q1 = texts(&send(&gw, BUYER, "2", T0 + 900));
    assert_eq!(q1, vec!["What was the amount of your last order: Order No 3001 of ___ confirmed"]);
    let q2 = texts(&send(&gw, BUYER, "123", T0 + 910));
    assert_eq!(q2, vec![format!("{WRONG_ANSWER} {QUESTION}")]);
    let s = gw.session_snapshot(BUYER).unwrap();
    assert_eq!(s.round, 2);
    assert_eq!(s.used_sources.len(), 2);
    // rounds exhausted
    assert_eq!(texts(&send(&gw, BUYER, "456", T0 + 920)), vec![FLAGGED]);
    let id = gw.instance_of("buyer1").unwrap();
    assert_eq!(gw.instance_snapshot(&id).unwrap().status, InstanceStatus::FraudFlagged);
    assert!(gw.with_ledger(|l| l.verify_chain().ok));
}

#[test]
fn second_round_can_still_pass() {
    let policy = AuthPolicy { k_questions: 1, ..Default::default() };
    let gw = suspicious_gateway(policy);
    open_order(&gw, 2987, 1000, T0);
    send(&gw, BUYER, "1", T0 + 300);
    send(&gw, BUYER, "1000", T0 + 330);
    open_order(&gw, 3001, 700, T0 + 600);
    send(&gw, BUYER, "2", T0 + 900);
    send(&gw, BUYER, "123", T0 + 910);
    let out = texts(&send(&gw, BUYER, "1,000", T0 + 920));
    assert!(out.contains(&"Loan for Order No 3001 approved: Pay 1100 in 60 days".to_string()), "{out:?}");
}

#[test]
fn invalid_inputs_accumulate_on_the_profile() {
    let gw = gateway();
    open_order(&gw, 2987, 1000, T0);
    assert_eq!(texts(&send(&gw, SELLER, "1", T0 + 1)), vec![NOT_YOUR_TURN]);
    for i in 0..3 {
        assert!(send(&gw, BUYER, "7", T0 + 2 + i)[0].text.starts_with("Invalid input"));
    }
    let p = gw.profile_snapshot("buyer1").unwrap();
    assert_eq!(p.invalid_window.len(), 3);
    assert_eq!(gw.profile_snapshot("seller1").unwrap().invalid_window.len(), 1);
    // three invalid inputs saturate the rate signal, so the real input is not waved through
    send(&gw, BUYER, "1", T0 + 10);
    let report = gw.session_snapshot(BUYER).unwrap().last_report.unwrap();
    assert_eq!(report.rate_risk, 1.0);
    assert_ne!(report.decision, Decision::Accept);
}

#[test]
fn ussd_session_gets_numbered_menu() {
    let gw = gateway();
    open_order(&gw, 2987, 1000, T0);
    let out = send(&gw, BUYER, "*384*7#", T0 + 5);
    assert_eq!(out[0].text, "1) Pay 1050 in 30 days\n2) Pay 1100 in 60 days\nReply with choice");
    assert_eq!(gw.session_snapshot(BUYER).unwrap().mode, Mode::Ussd);
    let out = send(&gw, BUYER, "2", T0 + 10);
    assert!(texts(&out).contains(&"Loan for Order No 2987 approved: Pay 1100 in 60 days".to_string()));
}

#[test]
fn independent_sessions_run_concurrently() {
    const PAIRS: usize = 8;
    let mut entries = vec![UserEntry { msisdn: BANK.into(), user_id: "bank1".into(), role: "intermediary".into() }];
    for i in 0..PAIRS {
        entries.push(UserEntry { msisdn: format!("+1000{i}"), user_id: format!("seller{i}"), role: "seller".into() });
        entries.push(UserEntry { msisdn: format!("+2000{i}"), user_id: format!("buyer{i}"), role: "buyer".into() });
    }
    let gw = Arc::new(
        Gateway::new(definition(), Directory::new(entries).unwrap(), BTreeMap::new(), Ledger::in_memory(), GatewayConfig::default())
            .unwrap(),
    );
    let handles: Vec<_> = (0..PAIRS)
        .map(|i| {
            let gw = Arc::clone(&gw);
            thread::spawn(move || {
                let order = 100 + i;
                send(&gw, &format!("+1000{i}"), &format!("@buyer{i} Order No {order} of 50"), T0 + i as i64);
                let out = send(&gw, &format!("+2000{i}"), "1", T0 + 100 + i as i64);
                assert!(texts(&out).contains(&format!("Loan for Order No {order} approved: Pay 1050 in 30 days")), "{out:?}");
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(gw.with_ledger(|l| l.len()), 2 * PAIRS);
    assert!(gw.with_ledger(|l| l.verify_chain().ok));
    for i in 0..PAIRS {
        let id = gw.instance_of(&format!("buyer{i}")).unwrap();
        assert_eq!(gw.instance_snapshot(&id).unwrap().status, InstanceStatus::Completed);
    }
}
