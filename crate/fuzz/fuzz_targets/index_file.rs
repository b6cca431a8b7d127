#![no_main]

use libfuzzer_sys::fuzz_target;
use netmas::knowledge::KnowledgeStore;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(store) = KnowledgeStore::from_index_json(text) else { return };
    let saved = store.to_index_json();
    let reloaded = KnowledgeStore::from_index_json(&saved).expect("saved index loads");
    assert_eq!(reloaded.to_index_json(), saved);
    let _ = reloaded.retrieve("power failure", 3);
});
