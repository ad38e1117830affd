//! Lexicographic enumeration of k-subsets with random access by rank.

/// Binomial coefficient as a float (exact below 2^53).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial_u64(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// The `rank`-th k-subset of `0..n` in lexicographic order.
pub fn unrank(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0usize;
    for slot in 0..k {
        let remaining = k - slot;
        loop {
            let count = binomial_u64(n - next - 1, remaining - 1).expect("rank in range");
            if rank < count {
                break;
            }
            rank -= count;
            next += 1;
        }
        out.push(next);
        next += 1;
    }
    out
}

/// Advances `c` to the next k-subset of `0..n`; false when `c` was the last.
pub fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Splits the ranks `0..total` into contiguous blocks of at most `block`.
pub fn rank_blocks(total: u64, block: u64) -> impl Iterator<Item = (u64, u64)> {
    (0..total.div_ceil(block)).map(move |b| (b * block, ((b + 1) * block).min(total)))
}
