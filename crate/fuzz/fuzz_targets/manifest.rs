#![no_main]
use libfuzzer_sys::fuzz_target;

use eyeshift::model::asset::Manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(m) = Manifest::parse(s) {
            assert_eq!(Manifest::parse(&m.format()).ok(), Some(m));
        }
    }
});
