#![no_main]
use libfuzzer_sys::fuzz_target;
use sasv_core::model::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = decode_checkpoint(data) {
        let bytes = encode_checkpoint(&model).expect("decoded model encodes");
        assert_eq!(decode_checkpoint(&bytes).expect("re-decodes").flat_params(), model.flat_params());
    }
});
