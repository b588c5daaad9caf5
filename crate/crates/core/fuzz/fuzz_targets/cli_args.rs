#![no_main]
use libfuzzer_sys::fuzz_target;
use saddlekit::cli::run_with;

// sampling commands can run for as long as their arguments ask
const SLOW: [&str; 6] = ["mc-torus", "mc-stratum", "variance", "tails", "bc-table", "--budget"];

fuzz_target!(|data: &str| {
    let args: Vec<&str> = data.split_whitespace().collect();
    if args.len() > 8 || args.iter().any(|a| SLOW.contains(a)) {
        return;
    }
    let mut sink = std::io::sink();
    let mut err = std::io::sink();
    let _ = run_with(std::iter::once("saddlekit").chain(args), &mut sink, &mut err);
});
