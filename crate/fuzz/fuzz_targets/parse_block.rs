#![no_main]
use libfuzzer_sys::fuzz_target;
use molchan::block::{block_at, block_index, parse_block};

fuzz_target!(|data: &[u8]| {
    let Some((&q, rest)) = data.split_first() else { return };
    let q = q as usize + 1;
    let Ok(text) = std::str::from_utf8(rest) else { return };
    if let Ok(block) = parse_block(text, q) {
        assert!(!block.is_empty());
        assert!(block.iter().all(|&s| (s as usize) < q));
        // Comma form always parses back to the same block.
        let listed: Vec<String> = block.iter().map(|s| s.to_string()).collect();
        assert_eq!(parse_block(&listed.join(","), q).unwrap(), block);
        if block.len() <= 8 {
            assert_eq!(block_at(block_index(&block, q), q, block.len()), block);
        }
    }
});
