use adapterd_core::profiler::rouge_l;

use super::Xs;

/// LCS by enumerating every subsequence of the shorter list.
pub fn brute_lcs(a: &[u8], b: &[u8]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let picked: Vec<u8> = (0..short.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| short[i])
            .collect();
        if picked.len() <= best {
            continue;
        }
        let mut it = long.iter();
        if picked.iter().all(|p| it.any(|x| x == p)) {
            best = picked.len();
        }
    }
    best
}

pub fn brute_f1(cand: &[u8], reference: &[u8]) -> f64 {
    if cand.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let l = brute_lcs(cand, reference) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / cand.len() as f64;
    let r = l / reference.len() as f64;
    2.0 * p * r / (p + r)
}

pub fn words(tokens: &[u8]) -> String {
    tokens
        .iter()
        .map(|t| format!("w{t}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Compares `rouge_l` with the brute-force F1 on `pairs` random token lists
/// of length 0 to 12. Returns the mismatching pairs.
pub fn rouge_mismatches(pairs: usize, seed: u64) -> Vec<(Vec<u8>, Vec<u8>)> {
    let mut rng = Xs(seed | 1);
    let mut bad = Vec::new();
    for _ in 0..pairs {
        let mut list = || -> Vec<u8> {
            let len = rng.below(13) as usize;
            (0..len).map(|_| rng.below(6) as u8).collect()
        };
        let (a, b) = (list(), list());
        if rouge_l(&words(&a), &words(&b)) != brute_f1(&a, &b) {
            bad.push((a, b));
        }
    }
    bad
}
