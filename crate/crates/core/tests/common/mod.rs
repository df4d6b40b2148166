#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use smsauth::gateway::{Directory, Gateway, GatewayConfig, SmsFrame, UserEntry};
use smsauth::ledger::Ledger;
use smsauth::mapper::compile;
use smsauth::risk::UserProfile;
use smsauth::workflow::{WorkflowDefinition, WorkflowInstance};

pub const FLOW: &str = include_str!("../../fixtures/order_financing.flow");
pub const FLOW_4: &str = include_str!("../../fixtures/order_financing_4step.flow");

pub const BUYER: &str = "+254700000001";
pub const SELLER: &str = "+254700000002";
pub const BANK: &str = "+254700000003";
pub const ADMIN: &str = "+254700000009";

/// 2024-03-01 01:55 in UTC+3.
pub const T0: i64 = 1_709_247_300;

pub fn definition() -> WorkflowDefinition {
    compile(FLOW).expect("fixture compiles")
}

pub fn directory() -> Directory {
    let e = |m: &str, u: &str, r: &str| UserEntry { msisdn: m.into(), user_id: u.into(), role: r.into() };
    Directory::new([
        e(BUYER, "buyer1", "buyer"),
        e(SELLER, "seller1", "seller"),
        e(BANK, "bank1", "intermediary"),
        e(ADMIN, "ops1", "admin"),
    ])
    .unwrap()
}

pub fn gateway_with(profiles: BTreeMap<String, UserProfile>, config: GatewayConfig) -> Gateway {
    Gateway::new(definition(), directory(), profiles, Ledger::in_memory(), config).unwrap()
}

pub fn gateway() -> Gateway {
    gateway_with(BTreeMap::new(), GatewayConfig::default())
}

pub fn send(gw: &Gateway, msisdn: &str, text: &str, ts: i64) -> Vec<SmsFrame> {
    gw.handle_frame(&SmsFrame::inbound(msisdn, text, ts)).unwrap()
}

pub fn texts(frames: &[SmsFrame]) -> Vec<String> {
    frames.iter().map(|f| f.text.clone()).collect()
}

pub fn event_names(gw: &Gateway) -> Vec<String> {
    gw.with_ledger(|l| l.events().iter().map(|e| e.event_name.clone()).collect())
}

pub fn instance(id: &str) -> WorkflowInstance {
    let parts = BTreeMap::from([
        ("buyer".to_string(), "buyer1".to_string()),
        ("seller".to_string(), "seller1".to_string()),
        ("intermediary".to_string(), "bank1".to_string()),
    ]);
    WorkflowInstance::instantiate(id, Arc::new(definition()), parts).unwrap()
}
