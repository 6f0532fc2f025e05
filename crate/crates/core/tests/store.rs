use std::collections::BTreeSet;
use std::path::Path;

use neuronhub_core::domain::NeuronId;
use neuronhub_core::fixture::{demo_specs, generate, write_tree, FixtureSpec};
use neuronhub_core::layout::{ingest_dir, record_path};
use neuronhub_core::n2g::{parse_graph, token_sets};
use neuronhub_core::neuroscope::{activation_extremes, parse_snippets};
use neuronhub_core::store::{GraphPayload, IngestError, RecordKey, Store, StoreError, StoreParams};
use neuronhub_core::{NeuronMetadata, ServiceKind};
use sha2::{Digest, Sha256};

fn hash(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

fn small_spec() -> FixtureSpec {
    let mut spec = FixtureSpec::new("small", 3, 12, 5);
    spec.snippet_tokens = 16;
    spec.twins = 2;
    spec
}

#[test]
fn four_graph_model_index_is_token_set_union() {
    let mut spec = FixtureSpec::new("four", 1, 4, 4);
    spec.services = [ServiceKind::Neuron2Graph].into_iter().collect();
    let fixture = generate(&spec).unwrap();
    let mut expected_act = BTreeSet::new();
    let mut expected_imp = BTreeSet::new();
    for (_, bytes) in &fixture.records {
        let sets = token_sets(&parse_graph::<f64>(bytes).unwrap(), 0.5);
        expected_act.extend(sets.activating);
        expected_imp.extend(sets.important);
    }
    let mut store = Store::new(StoreParams::default(), 0);
    store.ingest_model(fixture.meta, fixture.records).unwrap();
    let index = store.index("four").unwrap();
    assert_eq!(index.activating.keys().cloned().collect::<BTreeSet<_>>(), expected_act);
    assert_eq!(index.important.keys().cloned().collect::<BTreeSet<_>>(), expected_imp);
}

#[test]
fn persistence_round_trip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let spec = small_spec();
    write_tree(&spec, &data).unwrap();

    let (store, _) = ingest_dir(&data, StoreParams::default(), 1_700_000_000).unwrap();
    let first = dir.path().join("a.store");
    let second = dir.path().join("b.store");
    store.save(&first).unwrap();
    let (again, _) = ingest_dir(&data, StoreParams::default(), 1_700_000_000).unwrap();
    again.save(&second).unwrap();
    assert_eq!(hash(&first), hash(&second));

    let reopened = Store::open(&first).unwrap();
    assert_eq!(reopened, store);
    for (service, id) in store.keys("small").unwrap() {
        assert_eq!(
            reopened.get("small", service, id.layer.into(), id.neuron.into()).unwrap(),
            store.get("small", service, id.layer.into(), id.neuron.into()).unwrap()
        );
    }
}

#[test]
fn stored_payloads_preserve_input() {
    let fixture = generate(&small_spec()).unwrap();
    let mut store = Store::new(StoreParams::default(), 0);
    store.ingest_model(fixture.meta.clone(), fixture.records.clone()).unwrap();
    for (key, bytes) in &fixture.records {
        let input: serde_json::Value = serde_json::from_slice(bytes).unwrap();
        let stored: serde_json::Value = serde_json::from_slice(
            store
                .get(&key.model, key.service, key.layer.into(), key.neuron.into())
                .unwrap(),
        )
        .unwrap();
        for (field, value) in input.as_object().unwrap() {
            assert_eq!(&stored[field], value, "{key} field {field}");
        }
    }
}

#[test]
fn invalid_record_leaves_store_file_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.bin");
    let fixture = generate(&small_spec()).unwrap();
    let mut store = Store::new(StoreParams::default(), 0);
    store.ingest_model(fixture.meta, fixture.records).unwrap();
    store.save(&path).unwrap();
    let before = hash(&path);

    let mut other = FixtureSpec::new("other", 1, 4, 9);
    other.snippet_tokens = 4;
    let mut bad = generate(&other).unwrap();
    let slot = bad
        .records
        .iter_mut()
        .find(|(k, _)| k.service == ServiceKind::Neuroscope)
        .unwrap();
    slot.1 = br#"{"texts":[{"tokens":["a","b","c"],"activations":[0.1,0.2],"max_activation":0.2,"max_index":1}]}"#.to_vec();

    let mut reopened = Store::open(&path).unwrap();
    let err = reopened.ingest_model(bad.meta, bad.records).unwrap_err();
    assert!(matches!(err, IngestError::ValidationFailed { ref rejected } if rejected.len() == 1));
    assert!(reopened.model("other").is_err());
    // A failed ingest never reaches save; the file is untouched.
    assert_eq!(hash(&path), before);
    assert_eq!(Store::open(&path).unwrap(), store);
}

#[test]
fn availability_matches_stored_keys() {
    let mut store = Store::new(StoreParams::default(), 0);
    for spec in demo_specs() {
        let fixture = generate(&spec).unwrap();
        store.ingest_model(fixture.meta, fixture.records).unwrap();
    }
    for meta in store.models().cloned().collect::<Vec<_>>() {
        let present: BTreeSet<ServiceKind> = store.keys(&meta.name).unwrap().map(|(s, _)| s).collect();
        let declared: BTreeSet<ServiceKind> = meta.available_services.iter().collect();
        assert_eq!(present, declared, "{}", meta.name);

        for (service, id) in store.keys(&meta.name).unwrap() {
            assert!(meta.validate_path(id.layer.into(), id.neuron.into()).is_ok());
            let all = store.get_all(&meta.name, id.layer.into(), id.neuron.into()).unwrap();
            assert_eq!(all.len(), meta.available_services.len());
            let (_, payload) = all.iter().find(|(s, _)| *s == service).unwrap();
            assert_eq!(
                payload.unwrap(),
                store.get(&meta.name, service, id.layer.into(), id.neuron.into()).unwrap()
            );
        }
    }
}

#[test]
fn neuron_max_activation_matches_snippets() {
    let fixture = generate(&small_spec()).unwrap();
    let mut store = Store::new(StoreParams::default(), 0);
    store.ingest_model(fixture.meta, fixture.records).unwrap();
    for (service, id) in store.keys("small").unwrap().filter(|(s, _)| *s == ServiceKind::Neuroscope) {
        let snips = parse_snippets::<f64>(store.get("small", service, id.layer.into(), id.neuron.into()).unwrap()).unwrap();
        let stats: NeuronMetadata = serde_json::from_slice(
            store.get("small", ServiceKind::Metadata, id.layer.into(), id.neuron.into()).unwrap(),
        )
        .unwrap();
        let (_, max) = activation_extremes(&snips).unwrap();
        assert_eq!(stats.max_activation, Some(max));
        assert_eq!(max, snips.texts[0].max_activation);
        assert!(snips.texts.windows(2).all(|w| w[0].max_activation >= w[1].max_activation));
    }
}

#[test]
fn twins_are_each_others_best_match() {
    let spec = small_spec();
    let fixture = generate(&spec).unwrap();
    let twins = fixture.manifest.twins.clone();
    let mut store = Store::new(StoreParams::default(), 0);
    store.ingest_model(fixture.meta, fixture.records).unwrap();
    for (a, b) in twins {
        let payload: GraphPayload<f64> = serde_json::from_slice(
            store.get("small", ServiceKind::Neuron2Graph, a.layer.into(), a.neuron.into()).unwrap(),
        )
        .unwrap();
        let hit = payload.similar.iter().find(|h| h.id() == b).expect("twin listed");
        assert_eq!(hit.similarity.value(), 1.0);
    }
}

#[test]
fn demo_address_is_served() {
    let spec = demo_specs().into_iter().find(|s| s.model == "solu-8l").unwrap();
    let fixture = generate(&spec).unwrap();
    let expected = fixture
        .records
        .iter()
        .find(|(k, _)| *k == RecordKey::new("solu-8l", ServiceKind::Neuroscope, 7, 1423))
        .map(|(_, b)| parse_snippets::<f64>(b).unwrap())
        .unwrap();
    let mut store = Store::new(StoreParams::default(), 0);
    store.ingest_model(fixture.meta, fixture.records).unwrap();
    let got = parse_snippets::<f64>(store.get("solu-8l", ServiceKind::Neuroscope, 7, 1423).unwrap()).unwrap();
    assert_eq!(got, expected);
    assert!(fixture.manifest.neurons.contains(&NeuronId::new(7, 1423)));
}

#[test]
fn version_mismatch_on_open() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.bin");
    Store::new(StoreParams::default(), 0).save(&path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[8] = 99;
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(Store::open(&path), Err(StoreError::VersionMismatch { found: 99, .. })));
}

#[test]
fn record_paths_follow_layout() {
    let key = RecordKey::new("solu-8l", ServiceKind::Neuroscope, 7, 1423);
    assert_eq!(
        record_path(Path::new("/data"), &key),
        Path::new("/data/solu-8l/neuroscope/7/1423.json")
    );
}
