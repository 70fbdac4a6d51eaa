#![no_main]
use arbitrary::Arbitrary;
use libfuzzer_sys::fuzz_target;
use molchan::block::block_at;
use molchan::coding::{ml_decode, BlockCode, TIE_TOL};
use molchan::receiver::{dmc_block, DmcSpec};

#[derive(Debug, Arbitrary)]
struct Input {
    n: u8,
    alphabet: u8,
    weights: Vec<u8>,
    codewords: Vec<u16>,
    received: u16,
}

fuzz_target!(|input: Input| {
    let n = 1 + input.n as usize % 4;
    let q = 2 + input.alphabet as usize % 2;
    let blocks = q.pow(n as u32);
    let rows: Vec<Vec<f64>> = (0..q)
        .map(|a| {
            let raw: Vec<f64> = (0..q)
                .map(|b| 1.0 + *input.weights.get(a * q + b).unwrap_or(&0) as f64)
                .collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let channel = dmc_block(&DmcSpec::new(rows).unwrap(), n).unwrap();
    let mut words: Vec<Vec<u8>> = Vec::new();
    for &c in input.codewords.iter().take(16) {
        let w = block_at(c as usize % blocks, q, n);
        if !words.contains(&w) {
            words.push(w);
        }
    }
    let Ok(code) = BlockCode::new(q, words) else { return };
    let y = block_at(input.received as usize % blocks, q, n);
    let i = ml_decode(&y, &code, &channel).unwrap();
    assert!(i < code.len());
    let best = code
        .codewords()
        .iter()
        .map(|w| channel.likelihood(w, &y).unwrap())
        .fold(0.0f64, f64::max);
    assert!(channel.likelihood(code.codeword(i), &y).unwrap() >= best * (1.0 - TIE_TOL) - TIE_TOL);
});
