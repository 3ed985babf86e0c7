#![no_main]

use libfuzzer_sys::fuzz_target;
use tweezer_sim::coherence::PulseSequence;

fuzz_target!(|data: &str| {
    if let Ok(seq) = PulseSequence::from_json(data) {
        let text = seq.to_json().expect("valid sequence serializes");
        let back = PulseSequence::from_json(&text).expect("serialized sequence parses");
        assert_eq!(back.events().len(), seq.events().len());
    }
});
