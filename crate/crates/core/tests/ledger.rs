use std::collections::BTreeSet;

use chainfl::ledger::*;
use proptest::prelude::*;

fn init(sid: &str, reward: f64) -> Transaction {
    Transaction::TT1(InitTx {
        session_id: sid.into(),
        owner_id: "owner".into(),
        public_key_ref: "pk".into(),
        encryption_context: EncryptionContext { poly_degree: 4096 },
        total_rounds: 2,
        session_reward: reward,
    })
}

fn store(sid: &str, round: u32, client: &str, model: &str) -> Transaction {
    Transaction::TT2(StorageTx {
        session_id: sid.into(),
        round,
        client_id: client.into(),
        model_id: model.into(),
        offset_cipher: "b64".into(),
    })
}

fn score(sid: &str, round: u32, model: &str, c: f64) -> Transaction {
    Transaction::TT3(ScoreTx {
        session_id: sid.into(),
        round,
        model_id: model.into(),
        score: c,
    })
}

fn penalty(sid: &str, r_c: f64) -> Transaction {
    Transaction::TT4(PrivacyTx {
        session_id: sid.into(),
        contract_reward: r_c,
    })
}

#[test]
fn fresh_ledger_is_empty() {
    let l = Ledger::new();
    assert_eq!(l.count(TxType::TT1), 0);
    assert!(l.query(&Filter::of(TxType::TT3)).is_empty());
    assert_eq!(l.height(), 0);
    l.verify().unwrap();
}

#[test]
fn scores_come_back_in_append_order() {
    let mut l = Ledger::new();
    let c = l.register_client("w").unwrap().client_id;
    l.append(init("s", 100.0)).unwrap();
    for m in ["a", "b", "c"] {
        l.append(store("s", 1, &c, m)).unwrap();
    }
    for (m, v) in [("b", 0.2), ("a", 0.1), ("c", 0.3)] {
        l.append(score("s", 1, m, v)).unwrap();
    }
    let got: Vec<f64> = l
        .query(&Filter::of(TxType::TT3).session("s").round(1))
        .into_iter()
        .map(|t| match t {
            Transaction::TT3(s) => s.score,
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(got, vec![0.2, 0.1, 0.3]);
    assert!(matches!(l.append(score("s", 1, "a", 0.5)), Err(LedgerError::DuplicateScore(_))));
    assert!(matches!(l.append(score("s", 1, "zz", 0.5)), Err(LedgerError::UnknownModel { .. })));
}

#[test]
fn dangling_session_is_rejected() {
    let mut l = Ledger::new();
    assert!(matches!(l.append(store("nope", 1, "c", "m")), Err(LedgerError::UnknownSession(_))));
    assert!(matches!(l.append(penalty("nope", 1.0)), Err(LedgerError::UnknownSession(_))));
}

#[test]
fn sessions_and_anomalies_are_counted_globally() {
    let mut l = Ledger::new();
    for k in 0..5 {
        l.append(init(&format!("s{k}"), 100.0)).unwrap();
    }
    l.append(penalty("s0", 3.0)).unwrap();
    l.append(penalty("s3", 2.0)).unwrap();
    assert_eq!(l.count(TxType::TT1), 5);
    assert_eq!(l.count(TxType::TT4), 2);
    assert_eq!(l.query(&Filter::of(TxType::TT4)).len(), 2);
    assert!(matches!(l.append(penalty("s1", -1.0)), Err(LedgerError::InvalidValue(_))));
}

#[test]
fn membership_issues_unique_identities() {
    let mut l = Ledger::new();
    let ids: BTreeSet<String> = (0..30)
        .map(|k| l.register_client(&format!("wallet-{k}")).unwrap().client_id)
        .collect();
    assert_eq!(ids.len(), 30);
    assert!(matches!(l.register_client("wallet-3"), Err(LedgerError::DuplicateWallet(_))));
    for id in &ids {
        assert_eq!(l.balance(id), 0.0);
        assert!(l.is_registered(id));
    }
}

#[test]
fn group_split_must_cover_the_round() {
    let mut l = Ledger::new();
    let c = l.register_client("w").unwrap().client_id;
    l.append(init("s", 100.0)).unwrap();
    l.append(store("s", 1, &c, "a")).unwrap();
    l.append(store("s", 1, &c, "b")).unwrap();
    let group = |benign: &[&str], malicious: &[&str]| {
        Transaction::TT5(GroupTx {
            session_id: "s".into(),
            round: 1,
            benign_ids: benign.iter().map(|s| s.to_string()).collect(),
            malicious_ids: malicious.iter().map(|s| s.to_string()).collect(),
        })
    };
    assert!(matches!(l.append(group(&["a"], &[])), Err(LedgerError::GroupMismatch(_))));
    assert!(matches!(l.append(group(&["a", "b"], &["b"])), Err(LedgerError::GroupMismatch(_))));
    l.append(group(&["a"], &["b"])).unwrap();
    assert!(matches!(l.append(group(&["a"], &["b"])), Err(LedgerError::DuplicateRecord { .. })));
}

#[test]
fn tampering_is_detected_after_import() {
    let mut l = Ledger::new();
    let c = l.register_client("w").unwrap().client_id;
    l.append(init("s", 100.0)).unwrap();
    l.append(store("s", 1, &c, "a")).unwrap();
    l.append(score("s", 1, "a", 0.25)).unwrap();
    let text = l.export_string();
    assert_eq!(text.lines().count(), 3);
    let back = Ledger::import_jsonl(text.as_bytes()).unwrap();
    assert_eq!(back.export_string(), text);
    back.verify().unwrap();

    let mut blocks = l.blocks().to_vec();
    if let Transaction::TT3(s) = &mut blocks[2].tx_list[0] {
        s.score = 0.0;
    }
    assert!(matches!(verify_blocks(&blocks), Err(LedgerError::BrokenChain(2))));
}

#[test]
fn export_lines_use_schema_field_names() {
    let mut l = Ledger::new();
    l.append(init("s", 100.0)).unwrap();
    let line = l.export_string();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    for key in ["type", "session_id", "owner_id", "public_key_ref", "encryption_context", "total_rounds", "session_reward"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

proptest! {
    #[test]
    fn counts_never_decrease(ops in proptest::collection::vec(0u8..3, 1..40)) {
        let mut l = Ledger::new();
        let c = l.register_client("w").unwrap().client_id;
        l.append(init("s", 100.0)).unwrap();
        let mut prev = [0usize; 3];
        let mut models = 0;
        for op in ops {
            let _ = match op {
                0 => l.append(init(&format!("x{}", l.count(TxType::TT1)), 10.0)),
                1 => { models += 1; l.append(store("s", 1, &c, &format!("m{models}"))) }
                _ => l.append(penalty("s", 1.0)),
            };
            let now = [l.count(TxType::TT1), l.count(TxType::TT2), l.count(TxType::TT4)];
            for k in 0..3 {
                prop_assert!(now[k] >= prev[k]);
            }
            prev = now;
        }
        prop_assert!(l.verify().is_ok());
        prop_assert_eq!(l.height() as usize, l.transactions().count());
    }
}
