#![no_main]
use libfuzzer_sys::fuzz_target;
use saddlekit::surface::TranslationSurface;

fuzz_target!(|data: &str| {
    let _ = TranslationSurface::from_json(data);
});
