#![no_main]
use libfuzzer_sys::fuzz_target;
use sasv_core::data::{decode_store, encode_store};

// Anything that decodes must re-encode to the same bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(store) = decode_store(data) {
        let bytes = encode_store(&store).expect("decoded store encodes");
        assert_eq!(bytes, data);
    }
});
