#![no_main]
use libfuzzer_sys::fuzz_target;
use saddlekit::sv::TestFunction;

fuzz_target!(|data: &str| {
    let _ = TestFunction::from_json(data);
});
