#![no_main]

use libfuzzer_sys::fuzz_target;
use tweezer_sim::coherence::FringeRecord;

fuzz_target!(|data: &[u8]| {
    if let Ok(rec) = FringeRecord::read_csv(data) {
        assert!(rec.fitted_amplitude >= 0.0 || rec.fitted_amplitude.is_nan());
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).expect("write to memory");
        let back = FringeRecord::read_csv(buf.as_slice()).expect("written record reads back");
        assert_eq!(back.populations.len(), rec.populations.len());
    }
});
