//! Ranking metrics by enumeration.

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// The one ordering in which scores never increase and equal scores keep
/// their index order, found by checking every permutation.
pub fn brute_ranking(scores: &[f64]) -> Vec<usize> {
    let ok = |p: &[usize]| {
        p.windows(2).all(|w| scores[w[0]] > scores[w[1]] || (scores[w[0]] == scores[w[1]] && w[0] < w[1]))
    };
    let found: Vec<Vec<usize>> = permutations(scores.len()).into_iter().filter(|p| ok(p)).collect();
    assert_eq!(found.len(), 1, "ranking must be unique");
    found.into_iter().next().unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupMetrics {
    pub ap: f64,
    pub rr: f64,
    pub p1: f64,
}

/// `None` when no candidate is relevant.
pub fn brute_metrics(scores: &[f64], relevance: &[bool]) -> Option<GroupMetrics> {
    if !relevance.contains(&true) {
        return None;
    }
    let order = brute_ranking(scores);
    let mut ap = 0.0;
    let mut found = 0;
    let mut rr = 0.0;
    for (r, &c) in order.iter().enumerate() {
        if relevance[c] {
            found += 1;
            ap += found as f64 / (r + 1) as f64;
            if found == 1 {
                rr = 1.0 / (r + 1) as f64;
            }
        }
    }
    Some(GroupMetrics {
        ap: ap / found as f64,
        rr,
        p1: if relevance[order[0]] { 1.0 } else { 0.0 },
    })
}
