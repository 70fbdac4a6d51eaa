#![no_main]
use libfuzzer_sys::fuzz_target;
use molchan::config::ExperimentConfig;
use molchan::Error;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match ExperimentConfig::parse(text) {
        Ok(cfg) => {
            let q = cfg.alphabet();
            assert!((2..=256).contains(&q));
            assert!(cfg.n() >= 1);
            assert!(cfg.fpt_model().is_ok());
        }
        Err(Error::Config { line, column, .. } | Error::ConfigGuard { line, column, .. }) => {
            assert!(line >= 1 && column >= 1);
            assert!(line <= text.lines().count().max(1) + 1);
        }
        Err(e) => panic!("unexpected error kind: {e:?}"),
    }
});
