use proptest::prelude::*;
use sha2::{Digest, Sha256};

use smsauth::ledger::{verify_bytes, EventDraft, EventFilter, EventStatus, Ledger, LedgerError, GENESIS_HASH};

fn draft(i: u64, payload: &[(String, String)]) -> EventDraft {
    let mut d = EventDraft::new(format!("wf-{}", i % 3), "OrderConfirmation", format!("user{}", i % 4), "buyer", i as i64);
    for (k, v) in payload {
        d = d.with_payload(k.clone(), v.clone());
    }
    d
}

fn chain(n: u64) -> Ledger {
    let mut l = Ledger::in_memory();
    for i in 0..n {
        l.append(draft(i, &[("order_no".into(), format!("{}", 1000 + i))]), &["buyer"]).unwrap();
    }
    l
}

#[test]
fn hashes_follow_the_record_definition() {
    let l = chain(3);
    let mut prev = GENESIS_HASH.to_string();
    for e in l.events() {
        assert_eq!(e.prev_hash, prev);
        let digest = hex::encode(Sha256::digest(format!("{}{}", e.prev_hash, e.canonical_body()).as_bytes()));
        assert_eq!(e.this_hash, digest);
        prev = e.this_hash.clone();
    }
}

#[test]
fn event_ids_are_assigned_by_position() {
    let l = chain(2);
    assert_eq!(l.events()[0].event_id, "evt-000000");
    assert_eq!(l.events()[1].event_id, "evt-000001");
}

#[test]
fn file_reload_matches_memory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.log");
    let mut l = Ledger::open(&path).unwrap();
    for i in 0..5 {
        l.append(draft(i, &[]), &["buyer"]).unwrap();
    }
    drop(l);
    let bytes = std::fs::read(&path).unwrap();
    let reopened = Ledger::open(&path).unwrap();
    assert_eq!(reopened.len(), 5);
    assert_eq!(reopened.to_bytes(), bytes);
    assert!(verify_bytes(&bytes).ok);
}

#[test]
fn corrupt_file_refused_at_open() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.log");
    let mut bytes = chain(4).to_bytes();
    let at = bytes.len() / 2;
    bytes[at] ^= 0x01;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(Ledger::open(&path), Err(LedgerError::Corrupt { .. })));
}

#[test]
fn query_by_status_and_actor() {
    let mut l = chain(8);
    l.append(draft(9, &[]).with_status(EventStatus::Pending), &["buyer"]).unwrap();
    let pending = l.query_events(&EventFilter { status: Some(EventStatus::Pending), ..Default::default() });
    assert_eq!(pending.len(), 1);
    let last = l.last_completed("user1", 2);
    assert_eq!(last.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![5, 1]);
}

proptest! {
    #[test]
    fn appended_chains_verify(
        payloads in prop::collection::vec(
            prop::collection::vec(("[a-z_]{1,8}", "[ -~]{0,20}"), 0..4),
            0..20,
        )
    ) {
        let mut l = Ledger::in_memory();
        for (i, p) in payloads.iter().enumerate() {
            let clean: Vec<_> = p.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            l.append(draft(i as u64, &clean), &["buyer"]).unwrap();
        }
        prop_assert!(l.verify_chain().ok);
        let report = verify_bytes(&l.to_bytes());
        prop_assert!(report.ok);
        prop_assert_eq!(report.length, payloads.len() as u64);
    }

    #[test]
    fn any_bit_flip_is_detected(n in 1u64..12, pick in any::<prop::sample::Index>(), bit in 0u8..8) {
        let bytes = chain(n).to_bytes();
        let mut bad = bytes.clone();
        let at = pick.index(bad.len());
        bad[at] ^= 1 << bit;
        let mutated_seq = bytes[..at].windows(2).filter(|w| w == b"\n\n").count() as u64;
        let report = verify_bytes(&bad);
        prop_assert!(!report.ok);
        prop_assert!(report.first_bad_seq.unwrap() <= mutated_seq);
    }

    #[test]
    fn line_breaks_in_values_are_rejected(v in "[a-z]{0,4}[\n\r][a-z]{0,4}") {
        let mut l = Ledger::in_memory();
        let r = l.append(draft(0, &[("k".into(), v)]), &["buyer"]);
        prop_assert!(matches!(r, Err(LedgerError::SerializationInvalid(_))));
        prop_assert!(l.is_empty());
    }
}
