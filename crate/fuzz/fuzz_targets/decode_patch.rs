#![no_main]

use libfuzzer_sys::fuzz_target;
use sarcolor::dataio::{decode_patch, encode_patch};

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = decode_patch(data) {
        assert_eq!(decode_patch(&encode_patch(&p)).unwrap(), p);
    }
});
