#![no_main]

use libfuzzer_sys::fuzz_target;
use tweezer_sim::thermometry::RecaptureCurve;

fuzz_target!(|data: &[u8]| {
    if let Ok(curve) = RecaptureCurve::read_csv(data) {
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).expect("write to memory");
        let back = RecaptureCurve::read_csv(buf.as_slice()).expect("written curve reads back");
        assert_eq!(back.off_times().len(), curve.off_times().len());
    }
});
