#![no_main]
use libfuzzer_sys::fuzz_target;
use saddlekit::exactplane::parse_rational;

fuzz_target!(|data: &str| {
    let _ = parse_rational(data);
});
