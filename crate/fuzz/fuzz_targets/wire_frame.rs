#![no_main]

use libfuzzer_sys::fuzz_target;
use netmas::bus::wire::{decode_frame, encode_frame};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(frame) = decode_frame(text) {
        let encoded = encode_frame(&frame);
        assert_eq!(decode_frame(&encoded).as_ref(), Ok(&frame), "{encoded}");
    }
});
