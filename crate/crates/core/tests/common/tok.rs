//! Tokenizer oracles computed from scratch on a segmentation snapshot.

use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Distinct units with their current segmentation and count.
pub type Segmentation<'a> = [(Vec<&'a str>, u64)];

pub fn pair_counts(seg: &Segmentation) -> BTreeMap<(String, String), u64> {
    let mut out = BTreeMap::new();
    for (symbols, c) in seg {
        for w in symbols.windows(2) {
            *out.entry((w[0].to_string(), w[1].to_string())).or_insert(0) += c;
        }
    }
    out
}

pub fn symbol_counts(seg: &Segmentation) -> HashMap<String, u64> {
    let mut out = HashMap::new();
    for (symbols, c) in seg {
        for s in symbols {
            *out.entry(s.to_string()).or_insert(0) += c;
        }
    }
    out
}

/// Most frequent pair seen at least twice; ties go to the smallest pair.
pub fn bpe_choice(seg: &Segmentation) -> Option<(String, String)> {
    let mut best: Option<((String, String), u64)> = None;
    // ascending order, so only a strictly larger count replaces the best
    for (pair, c) in pair_counts(seg) {
        if c >= 2 && best.as_ref().is_none_or(|(_, b)| c > *b) {
            best = Some((pair, c));
        }
    }
    best.map(|(p, _)| p)
}

/// Pair maximizing `P(l r) / (P(l) P(r))` among pairs seen at least twice,
/// with relative frequencies from the current segmentation. Compared as
/// exact fractions; ties go to the smallest pair.
pub fn wordpiece_choice(seg: &Segmentation) -> Option<(String, String)> {
    let singles = symbol_counts(seg);
    let pairs = pair_counts(seg);
    let n_sym: u64 = singles.values().sum();
    let n_pair: u64 = pairs.values().sum();
    // ratio = (c / n_pair) / ((cl / n_sym) (cr / n_sym)); the common factor
    // n_sym^2 / n_pair does not change the argmax but is kept to mirror the
    // definition
    let frac = |c: u64, l: &str, r: &str| -> (u128, u128) {
        (c as u128 * (n_sym as u128).pow(2), n_pair as u128 * singles[l] as u128 * singles[r] as u128)
    };
    let mut best: Option<((String, String), (u128, u128))> = None;
    for ((l, r), c) in pairs {
        if c < 2 {
            continue;
        }
        let f = frac(c, &l, &r);
        let better = match &best {
            None => true,
            Some((_, b)) => f.0 * b.1 > b.0 * f.1,
        };
        if better {
            best = Some(((l, r), f));
        }
    }
    best.map(|(p, _)| p)
}

/// Every segmentation of `chars` into pieces with positive probability, as
/// (pieces, product of probabilities).
pub fn segmentations(chars: &[char], probs: &HashMap<String, f64>) -> Vec<(Vec<String>, f64)> {
    if chars.is_empty() {
        return vec![(Vec::new(), 1.0)];
    }
    let mut out = Vec::new();
    for cut in 1..=chars.len() {
        let head: String = chars[..cut].iter().collect();
        let Some(&p) = probs.get(&head) else { continue };
        if p <= 0.0 {
            continue;
        }
        for (mut rest, q) in segmentations(&chars[cut..], probs) {
            rest.insert(0, head.clone());
            out.push((rest, p * q));
        }
    }
    out
}

/// Negative log-likelihood of `units` under the unigram model `probs`.
pub fn unigram_loss(units: &[(String, u64)], probs: &HashMap<String, f64>) -> f64 {
    units
        .iter()
        .map(|(u, c)| {
            let chars: Vec<char> = u.chars().collect();
            let z: f64 = segmentations(&chars, probs).iter().map(|(_, p)| p).sum();
            -(*c as f64) * z.ln()
        })
        .sum()
}

/// One EM update by enumeration. Single characters with an expected count
/// below `floor` are lifted to it.
pub fn unigram_em(units: &[(String, u64)], probs: &HashMap<String, f64>, floor: f64) -> HashMap<String, f64> {
    let mut counts: HashMap<String, f64> = probs.keys().map(|k| (k.clone(), 0.0)).collect();
    for (u, c) in units {
        let chars: Vec<char> = u.chars().collect();
        let segs = segmentations(&chars, probs);
        let z: f64 = segs.iter().map(|(_, p)| p).sum();
        for (pieces, p) in &segs {
            for piece in pieces {
                *counts.get_mut(piece).unwrap() += *c as f64 * p / z;
            }
        }
    }
    for (k, v) in counts.iter_mut() {
        if k.chars().count() == 1 && *v < floor {
            *v = floor;
        }
    }
    let total: f64 = counts.values().sum();
    counts.into_iter().map(|(k, v)| (k, v / total)).collect()
}

/// Loss increase from removing `piece`: drop it, renormalize, run
/// `iterations` EM updates and compare with the loss under `probs`.
pub fn unigram_removal_delta(
    units: &[(String, u64)],
    probs: &HashMap<String, f64>,
    piece: &str,
    iterations: usize,
    floor: f64,
) -> f64 {
    let before = unigram_loss(units, probs);
    let mut q: HashMap<String, f64> = probs.iter().filter(|(k, _)| *k != piece).map(|(k, v)| (k.clone(), *v)).collect();
    let total: f64 = q.values().sum();
    q.values_mut().for_each(|v| *v /= total);
    for _ in 0..iterations {
        q = unigram_em(units, &q, floor);
    }
    unigram_loss(units, &q) - before
}

/// Alphabet of a text, sorted.
pub fn alphabet(text: &str) -> Vec<char> {
    text.chars().filter(|c| !c.is_whitespace()).collect::<BTreeSet<_>>().into_iter().collect()
}
