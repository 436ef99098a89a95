#![no_main]
use libfuzzer_sys::fuzz_target;

use eyeshift::io::{decode_float_map, encode_float_map};

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = decode_float_map(data) {
        let bytes = encode_float_map(&map);
        let again = decode_float_map(&bytes).expect("re-encoded map must decode");
        assert_eq!(encode_float_map(&again), bytes);
    }
});
