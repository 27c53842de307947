use chainfl::oracle::*;

fn doc(id: &str) -> ModelDocument {
    ModelDocument {
        model_id: id.into(),
        client_id: "client-1".into(),
        cipher_texts: vec!["QUJD".into(), "REVG".into()],
        offset_cipher: "R0hJ".into(),
    }
}

fn key(sid: &str) -> KeyRecord {
    KeyRecord {
        session_id: sid.into(),
        secret_key: vec![1, 2, 3, 250],
    }
}

fn exercise(models: ModelOracle, keys: KeyOracle) {
    let gw = Capability::issue(Role::Gateway);
    let df = Capability::issue(Role::Defender);

    models.store_model(&gw, &doc("m001-a")).unwrap();
    assert_eq!(models.load_model(&gw, "m001-a").unwrap(), doc("m001-a"));
    assert!(matches!(models.load_model(&gw, "m001-b"), Err(OracleError::NotFound(_))));
    assert!(matches!(models.load_model(&df, "m001-a"), Err(OracleError::AccessDenied { .. })));
    assert!(matches!(models.store_model(&df, &doc("m001-c")), Err(OracleError::AccessDenied { .. })));

    keys.store_key(&df, &key("session-0001")).unwrap();
    assert_eq!(keys.load_key(&df, "session-0001").unwrap().secret_key, vec![1, 2, 3, 250]);
    assert!(matches!(keys.load_key(&gw, "session-0001"), Err(OracleError::AccessDenied { .. })));
    assert!(matches!(keys.load_key(&df, "session-0002"), Err(OracleError::NotFound(_))));
}

#[test]
fn in_memory_oracles_enforce_roles() {
    exercise(ModelOracle::in_memory(), KeyOracle::in_memory());
}

#[test]
fn on_disk_oracles_enforce_roles_and_persist() {
    let dir = tempfile::tempdir().unwrap();
    exercise(
        ModelOracle::on_disk(dir.path().join("a")).unwrap(),
        KeyOracle::on_disk(dir.path().join("b")).unwrap(),
    );
    // a fresh handle on the same directory sees the stored document
    let again = ModelOracle::on_disk(dir.path().join("a")).unwrap();
    let gw = Capability::issue(Role::Gateway);
    assert_eq!(again.load_model(&gw, "m001-a").unwrap(), doc("m001-a"));
    assert!(dir.path().join("a").join("m001-a.json").exists());
}

#[test]
fn key_records_do_not_print_secrets() {
    let text = format!("{:?}", key("s"));
    assert!(!text.contains("250"), "{text}");
}

#[test]
fn path_like_ids_are_refused() {
    let gw = Capability::issue(Role::Gateway);
    let models = ModelOracle::in_memory();
    assert!(matches!(models.store_model(&gw, &doc("../escape")), Err(OracleError::InvalidId(_))));
    assert!(matches!(models.load_model(&gw, "a/b"), Err(OracleError::InvalidId(_))));
}
