#![no_main]

use libfuzzer_sys::fuzz_target;
use manet_core::wire::ControlPacket;

// Decoding never panics, and anything decoded re-encodes to the same bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(packet) = ControlPacket::decode(data) {
        let bytes = packet.encode().expect("decoded packet encodes");
        assert_eq!(bytes.len(), packet.encoded_len());
        assert_eq!(ControlPacket::decode(&bytes).as_ref(), Ok(&packet));
    }
});
