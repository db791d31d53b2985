//! One check per acceptance criterion. Each returns a detail line on
//! success and the first violated condition on failure.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use objforge::cluster::ClusterMap;
use objforge::corpus::{sample_span, Corpus, Document, LengthDistribution, Paragraph};
use objforge::corruption::{
    crts_corrupt, crts_update, mlm_corrupt, rts_corrupt, slm_corrupt, target_cluster_distribution, CrtsConfig,
    FMatrix, MlmConfig, Prediction, TokenSpace,
};
use objforge::generators::{
    gen_context, gen_mspp, gen_pairs, gen_sds, sds_accepts, ContextKind, GenConfig, Label, MsppQuota, Objective,
    TextRef,
};
use objforge::metrics::{
    average_precision, head_cost, jointwise_latency_ratio, map, mrr, p_at_k, precision_at_k, reciprocal_rank,
    HeadObjective, RankedGroup,
};
use objforge::model::{encoder_forward, EncoderInput};
use objforge::rng::seeded;
use objforge::tokenizer::{
    train_bpe, train_unigram, train_wordpiece, BoundaryMode, MergeRule, MergeTrainer, UnigramOptions, Vocabulary,
    SPACE_SYMBOL,
};
use objforge::train::{loss_ratio, parse_weights, ToySetup};

use super::{grid, nets, rank, sentence, shaped, stats, tok, Check};
use crate::ensure;

pub fn head_accounting() -> Check {
    let t = Instant::now();
    let rts768 = head_cost(HeadObjective::Rts, 768, 30522).params;
    let rts256 = head_cost(HeadObjective::Rts, 256, 30522).params;
    let crts768 = head_cost(HeadObjective::Crts, 768, 30522).params;
    let mlm = head_cost(HeadObjective::Mlm, 768, 30522).params;
    ensure!(rts768 == 1536, "RTS head at d=768 has {rts768} parameters");
    ensure!(rts256 == 512, "RTS head at d=256 has {rts256} parameters");
    ensure!(crts768 == 1536, "C-RTS head at d=768 has {crts768} parameters");
    ensure!(mlm == 23_440_896, "MLM head at (30522, 768) has {mlm} parameters");
    let took = t.elapsed().as_secs_f64();
    ensure!(took < 1.0, "took {took:.3} s");
    Ok(format!("RTS 1536 / 512, MLM 23440896 ({took:.4} s)"))
}

pub fn latency_ratio() -> Check {
    let r = jointwise_latency_ratio(5).map_err(|e| e.to_string())?;
    ensure!(r == 1.8, "ratio at k=5 is {r}");
    Ok(format!("k=5 -> {r}"))
}

fn regular_stream(space: &TokenSpace, n: usize, seed: u64) -> Vec<u32> {
    let mut rng = seeded(seed);
    let pool = space.regular();
    (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

pub fn corruption_statistics() -> Check {
    let t = Instant::now();
    let specials = nets::specials();
    let space = TokenSpace::new(100, specials);
    let n = 1_000_000;
    let chunk = 1000;
    let stream = regular_stream(&space, n, 1);
    let p = 0.15;
    let mut rng = seeded(2);

    let (mut sel, mut masked, mut random, mut kept) = (0, 0, 0, 0);
    for ids in stream.chunks(chunk) {
        let out = mlm_corrupt(ids, &MlmConfig::default(), &space, &mut rng).map_err(|e| e.to_string())?;
        for i in 0..ids.len() {
            if out.mask[i] {
                sel += 1;
                if out.ids[i] == specials.mask {
                    masked += 1;
                } else if out.ids[i] != ids[i] {
                    random += 1;
                } else {
                    kept += 1;
                }
            }
        }
    }
    ensure!(stats::within_3_sigma(sel, n, p), "MLM selected {sel} of {n}");
    ensure!(stats::within_3_sigma(masked, sel, 0.8), "MLM mask branch {masked} of {sel}");
    ensure!(stats::within_3_sigma(random, sel, 0.1), "MLM random branch {random} of {sel}");
    ensure!(stats::within_3_sigma(kept, sel, 0.1), "MLM keep branch {kept} of {sel}");

    let mut rts = 0;
    let mut slm = 0;
    let mut slm_masks = 0;
    for ids in stream.chunks(chunk) {
        rts += rts_corrupt(ids, p, &space, &mut rng).map_err(|e| e.to_string())?.selected();
        let out = slm_corrupt(ids, p, &space, &mut rng).map_err(|e| e.to_string())?;
        slm += out.selected();
        slm_masks += out.ids.iter().filter(|&&id| id == specials.mask).count();
    }
    ensure!(stats::within_3_sigma(rts, n, p), "RTS selected {rts} of {n}");
    ensure!(stats::within_3_sigma(slm, n, p), "SLM selected {slm} of {n}");
    ensure!(slm_masks == 0, "SLM output holds {slm_masks} mask ids");

    let clusters = ClusterMap::new(4, (0..100).map(|id| id % 4).collect()).map_err(|e| e.to_string())?;
    let f = FMatrix::from_counts(4, (0..16).map(|i| (i * 7 % 11) as i64 - 5).collect()).map_err(|e| e.to_string())?;
    let mut crts = 0;
    for ids in stream.chunks(chunk) {
        crts += crts_corrupt(ids, &CrtsConfig::default(), &clusters, &f, &space, &mut rng)
            .map_err(|e| e.to_string())?
            .selected();
    }
    ensure!(stats::within_3_sigma(crts, n, p), "C-RTS selected {crts} of {n}");
    let took = t.elapsed().as_secs_f64();
    ensure!(took < 30.0, "took {took:.1} s");
    Ok(format!(
        "selected MLM {sel}, RTS {rts}, SLM {slm}, C-RTS {crts} of {n}; MLM split {masked}/{random}/{kept}; {took:.1} s"
    ))
}

/// Frozen high-precision values of the normalized softmax of [2, 0, -2]
/// at gamma = 1, i.e. e^1, e^0.5, e^0 over their sum.
pub const SOFTMAX_2_0_M2: [f64; 3] = [0.506_480_391_055_654, 0.307_195_885_718_498_4, 0.186_323_723_225_847_6];

pub fn cluster_distribution() -> Check {
    let got = target_cluster_distribution(&[2, 0, -2], 1.0);
    let oracle = stats::gamma_softmax_oracle(&[2, 0, -2], 1.0);
    for i in 0..3 {
        ensure!((oracle[i] - SOFTMAX_2_0_M2[i]).abs() < 1e-12, "oracle drifted at {i}: {}", oracle[i]);
        ensure!((got[i] - SOFTMAX_2_0_M2[i]).abs() < 1e-6, "entry {i}: {} vs {}", got[i], SOFTMAX_2_0_M2[i]);
    }
    for n in 1..10 {
        let u = target_cluster_distribution(&vec![7; n], 0.5);
        ensure!(u == vec![1.0 / n as f64; n], "constant row of {n} gives {u:?}");
    }
    let mut rng = seeded(4);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let len = rng.random_range(1..=16);
        let row: Vec<i64> = (0..len).map(|_| rng.random_range(-1000..=1000)).collect();
        let gamma = rng.random_range(0.05..5.0);
        let d = target_cluster_distribution(&row, gamma);
        worst = worst.max((d.iter().sum::<f64>() - 1.0).abs());
    }
    ensure!(worst <= 1e-12, "a row sums to 1 +- {worst:e}");
    Ok(format!("[{:.9}, {:.9}, {:.9}]; worst sum error {worst:e}", got[0], got[1], got[2]))
}

type Batch = (Vec<Prediction>, Vec<(u32, u32)>);

pub fn random_batches(n_clusters: u32, count: usize, seed: u64) -> Vec<Batch> {
    let mut rng = seeded(seed);
    (0..count)
        .map(|_| {
            let len = rng.random_range(0..40);
            let preds = (0..len)
                .map(|_| if rng.random_bool(0.5) { Prediction::Original } else { Prediction::Replaced })
                .collect();
            let prov = (0..len).map(|_| (rng.random_range(0..n_clusters), rng.random_range(0..n_clusters))).collect();
            (preds, prov)
        })
        .collect()
}

/// F computed by tallying every prediction directly.
pub fn tally(n: usize, batches: &[Batch]) -> Vec<i64> {
    let mut f = vec![0i64; n * n];
    for (preds, prov) in batches {
        for (p, (a, b)) in preds.iter().zip(prov) {
            f[*a as usize * n + *b as usize] += if *p == Prediction::Original { 1 } else { -1 };
        }
    }
    f
}

pub fn crts_order_independence() -> Check {
    let n = 6;
    let batches = random_batches(n as u32, 30, 5);
    let expected = tally(n, &batches);
    let mut rng = seeded(6);
    let mut order: Vec<usize> = (0..batches.len()).collect();
    for trial in 0..100 {
        order.shuffle(&mut rng);
        let mut f = FMatrix::zeros(n);
        for &i in &order {
            crts_update(&mut f, &batches[i].0, &batches[i].1).map_err(|e| e.to_string())?;
        }
        ensure!(f.counts() == expected.as_slice(), "order {trial} produced a different F");
    }
    Ok(format!("100 orders of {} batches agree with the direct tally", batches.len()))
}

/// Label implied by where the two texts come from.
pub fn pair_label(obj: Objective, l: &TextRef, r: &TextRef) -> Label {
    match obj {
        Objective::Psd if l.doc == r.doc && l.para != r.para => Label::Positive,
        Objective::Psd => Label::EasyNegative,
        _ if l.same_paragraph(r) => Label::Positive,
        _ if l.doc == r.doc => Label::HardNegative,
        _ => Label::EasyNegative,
    }
}

fn group_shape(labels: &BTreeMap<u64, Vec<Label>>, what: &str) -> Check {
    for (g, ls) in labels {
        let pos = ls.iter().filter(|l| l.is_positive()).count();
        ensure!(ls.len() == 5 && pos == 1, "{what} group {g} has {} examples, {pos} positive", ls.len());
    }
    Ok(String::new())
}

/// First paragraph lengths chosen to hit both SDS filters and their edges.
pub fn sds_corpus() -> Corpus {
    let word = |n: usize, c: char| -> String {
        let mut s: String = std::iter::once(c.to_ascii_uppercase()).chain(std::iter::repeat_n(c, n - 2)).collect();
        s.push('.');
        s
    };
    let base = grid(50, 5, 8);
    let docs = base
        .documents()
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            let mut doc: Document = doc.clone();
            let first = match d % 6 {
                1 => vec![sentence(&word(80, 'a'))],
                2 => vec![sentence("Hi there."), sentence("Ok then.")],
                3 => vec![sentence(&word(24, 'b')), sentence(&word(25, 'c'))],
                4 => vec![sentence(&word(24, 'b')), sentence(&word(24, 'c'))],
                5 => {
                    doc.paragraphs.truncate(1);
                    doc.paragraphs[0].sentences.clone()
                }
                _ => doc.paragraphs[0].sentences.clone(),
            };
            doc.paragraphs[0] = Paragraph::new(first);
            doc
        })
        .collect();
    Corpus::new(docs).unwrap()
}

/// Document-level SDS filter, from the definition.
pub fn sds_oracle(doc: &Document) -> bool {
    let Some(first) = doc.paragraphs.first() else { return false };
    let chars: usize = first.sentences.iter().map(|s| s.text().chars().count()).sum::<usize>() + first.len() - 1;
    doc.paragraphs.len() >= 2 && first.len() >= 2 && chars >= 50
}

pub fn generator_audit() -> Check {
    let t = Instant::now();
    let corpus = grid(50, 5, 8);
    let cfg = |seed| GenConfig { seed, ..GenConfig::default() };
    let mut detail = Vec::new();

    for obj in [Objective::Ssp, Objective::Sp, Objective::Psd] {
        let ex = gen_pairs(&corpus, obj, cfg(11)).map_err(|e| e.to_string())?;
        let mut groups: BTreeMap<u64, Vec<Label>> = BTreeMap::new();
        for e in &ex {
            let derived = pair_label(obj, &e.prov.l, &e.prov.r);
            ensure!(derived == e.y, "{obj} example labelled {:?}, provenance says {derived:?}", e.y);
            ensure!(e.l == e.prov.l.text(&corpus) && e.r == e.prov.r.text(&corpus), "{obj} text differs from provenance");
            groups.entry(e.prov.group).or_default().push(e.y);
        }
        group_shape(&groups, obj.name())?;
        ensure!(groups.len() == 250, "{obj} produced {} of 250 groups", groups.len());
        detail.push(format!("{obj} {}", groups.len()));
    }

    for (kind, expected) in [(ContextKind::Sdc, 200), (ContextKind::Dpc, 250), (ContextKind::Dslc, 250)] {
        let ex = gen_context(&corpus, kind, cfg(12)).map_err(|e| e.to_string())?;
        let mut groups: BTreeMap<u64, Vec<Label>> = BTreeMap::new();
        for e in &ex {
            let derived = pair_label(Objective::Ssp, &e.prov.a, &e.prov.b);
            ensure!(derived == e.y, "{kind:?} example labelled {:?}, provenance says {derived:?}", e.y);
            let texts = [(&e.a, &e.prov.a), (&e.b, &e.prov.b), (&e.c, &e.prov.c)];
            ensure!(texts.iter().all(|(s, r)| **s == r.text(&corpus)), "{kind:?} text differs from provenance");
            groups.entry(e.prov.group).or_default().push(e.y);
        }
        group_shape(&groups, &format!("{kind:?}"))?;
        ensure!(groups.len() == expected, "{kind:?} produced {} of {expected} groups", groups.len());
        detail.push(format!("{kind:?} {}", groups.len()));
    }

    let backfill = mspp_backfill_corpus();
    let (checked, shortfalls) = audit_mspp(&backfill, MsppQuota { k1: 1, k2: 2, k3: 2 }, 13)?;
    ensure!(shortfalls > 0, "no MSPP backfill case was exercised");
    detail.push(format!("MSPP {checked} ({shortfalls} backfilled)"));

    let sds = sds_corpus();
    let expected: BTreeSet<usize> = (0..sds.len()).filter(|&d| sds_oracle(sds.document(d))).collect();
    let got: BTreeSet<usize> = gen_sds(&sds, cfg(14)).map_err(|e| e.to_string())?.iter().map(|e| e.prov.doc).collect();
    ensure!(got == expected, "SDS kept {got:?}, filter definition keeps {expected:?}");
    for d in 0..sds.len() {
        let doc = sds.document(d);
        ensure!(sds_accepts(doc, 2, 50) == sds_oracle(doc), "sds_accepts disagrees on document {d}");
    }
    detail.push(format!("SDS kept {} of {}", got.len(), sds.len()));

    let took = t.elapsed().as_secs_f64();
    ensure!(took < 60.0, "took {took:.1} s");
    Ok(format!("{}; {took:.1} s", detail.join(", ")))
}

/// The audit grid plus documents whose structure forces MSPP shortfalls.
pub fn mspp_backfill_corpus() -> Corpus {
    let mut shape = vec![vec![8; 5]; 50];
    shape.extend([vec![8], vec![3], vec![8, 1], vec![1, 4], vec![2, 1, 1], vec![1, 1, 2]]);
    shaped(&shape)
}

/// Checks every MSPP example against the quota rule; returns the number of
/// examples and how many needed backfill.
pub fn audit_mspp(corpus: &Corpus, quota: MsppQuota, seed: u64) -> Result<(usize, usize), String> {
    let ex = gen_mspp(corpus, GenConfig { seed, mspp_quota: quota, ..GenConfig::default() }).map_err(|e| e.to_string())?;
    let k = quota.k1 + quota.k2 + quota.k3;
    let mut shortfalls = 0;
    let mut seen = BTreeSet::new();
    for e in &ex {
        let (d, p) = (e.prov.pivot.doc, e.prov.pivot.para);
        seen.insert((d, p));
        let para = corpus.paragraph(d, p).len();
        let elsewhere = corpus.document(d).sentence_count() - para;
        let n1 = quota.k1.min(para - 1);
        let n2 = quota.k2.min(elsewhere);
        let want = [n1, n2, k - n1 - n2];
        if n1 < quota.k1 || n2 < quota.k2 {
            shortfalls += 1;
        }
        ensure!(e.cands.len() == k && e.ys.len() == k, "example at {d}:{p} has {} candidates", e.cands.len());
        let mut got = [0; 3];
        for ((r, kind), &y) in e.prov.cands.iter().zip(&e.prov.kinds).zip(&e.ys) {
            let derived = pair_label(Objective::Ssp, &e.prov.pivot, r);
            ensure!(derived == *kind, "candidate {r:?} of {d}:{p} is {kind:?}, provenance says {derived:?}");
            ensure!((y == 1) == kind.is_positive(), "label {y} for a {kind:?} candidate");
            ensure!(r != &e.prov.pivot, "pivot offered as its own candidate");
            got[match kind {
                Label::Positive => 0,
                Label::HardNegative => 1,
                Label::EasyNegative => 2,
            }] += 1;
        }
        ensure!(got == want, "example at {d}:{p} has kinds {got:?}, quota rule gives {want:?}");
        let sum: u32 = e.ys.iter().map(|&y| y as u32).sum();
        ensure!(sum as usize == n1, "label sum {sum} at {d}:{p}, expected {n1}");
    }
    // every paragraph able to host a pivot and a same-paragraph candidate
    let eligible: BTreeSet<(usize, usize)> =
        corpus.paragraph_refs().into_iter().filter(|&(d, p)| corpus.paragraph(d, p).len() >= 2).collect();
    ensure!(seen == eligible, "MSPP covered {} paragraphs, {} are eligible", seen.len(), eligible.len());
    Ok((ex.len(), shortfalls))
}

pub fn span_samplers() -> Check {
    let cfg = GenConfig::default();
    let para = Paragraph::new((0..10).map(|i| sentence(&format!("Sentence number {i}."))).collect());
    let mut rng = seeded(7);
    let mut detail = Vec::new();
    for (name, probs, expected) in [
        ("left", cfg.left_lengths.clone(), vec![0.7, 0.2, 0.1]),
        ("right", cfg.right_lengths.clone(), vec![0.14, 0.24, 0.24, 0.24, 0.14]),
    ] {
        let dist = LengthDistribution::new(probs).map_err(|e| e.to_string())?;
        let mut counts = vec![0u64; expected.len()];
        for _ in 0..100_000 {
            let span = sample_span(&para, (0, 0), &dist, &mut rng, &[]).map_err(|e| e.to_string())?;
            ensure!(span.len() <= expected.len(), "{name} span of length {}", span.len());
            counts[span.len() - 1] += 1;
        }
        let p = stats::chi_square_p(&counts, &expected);
        ensure!(p > 0.01, "{name} lengths {counts:?} give p = {p:.4}");
        detail.push(format!("{name} p = {p:.3}"));
    }
    Ok(detail.join(", "))
}

/// Sennrich-style toy corpus: low x5, lower x2, newest x6, widest x3.
pub fn documented_bpe_corpus() -> Corpus {
    let mut words = Vec::new();
    for (w, n) in [("low", 5), ("lower", 2), ("newest", 6), ("widest", 3)] {
        words.extend(std::iter::repeat_n(w, n));
    }
    super::word_corpus(&[&words.join(" ")])
}

/// Hand-executed frequency merges on [`documented_bpe_corpus`]; equal counts
/// resolve to the smallest pair.
pub const DOCUMENTED_BPE_MERGES: [(&str, &str); 12] = [
    ("e", "s"),
    ("es", "t"),
    ("l", "o"),
    ("lo", "w"),
    ("e", "w"),
    ("ew", "est"),
    ("n", "ewest"),
    ("d", "est"),
    ("i", "dest"),
    ("w", "idest"),
    ("e", "r"),
    ("low", "er"),
];

/// Runs a merge trainer to exhaustion, comparing every step with `oracle`.
pub fn merges_match(
    units: Vec<String>,
    rule: MergeRule,
    oracle: impl Fn(&tok::Segmentation) -> Option<(String, String)>,
) -> Result<usize, String> {
    let mut t = MergeTrainer::from_units(units, rule, BoundaryMode::Word);
    let mut steps = 0;
    loop {
        let want = oracle(&t.segmentation());
        let got = t.step();
        ensure!(got == want, "step {steps}: trainer merged {got:?}, oracle picks {want:?}");
        if got.is_none() {
            return Ok(steps);
        }
        steps += 1;
    }
}

/// Random small corpora over a four-letter alphabet, at most 1000
/// characters each.
pub fn random_units(seed: u64) -> Vec<String> {
    let mut rng = seeded(seed);
    let letters = ['a', 'b', 'c', 'd'];
    let mut units = Vec::new();
    let mut chars = 0;
    while chars < 900 {
        let len = rng.random_range(1..=6);
        let w: String = (0..len).map(|_| letters[rng.random_range(0..letters.len())]).collect();
        chars += w.len();
        units.push(w);
    }
    units
}

pub fn round_trip(vocab: &Vocabulary, strings: usize, seed: u64) -> Result<(), String> {
    let alphabet: Vec<char> = vocab
        .tokens()
        .iter()
        .filter(|t| t.chars().count() == 1)
        .map(|t| t.chars().next().unwrap())
        .filter(|&c| !c.is_whitespace() && c != SPACE_SYMBOL)
        .collect();
    ensure!(!alphabet.is_empty(), "vocabulary has no characters");
    let mut rng = seeded(seed);
    let gaps = [" ", "  ", "\t", " \n "];
    for _ in 0..strings {
        let words: Vec<String> = (0..rng.random_range(1..=6))
            .map(|_| (0..rng.random_range(1..=8)).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect())
            .collect();
        let mut text = String::new();
        if rng.random_bool(0.2) {
            text.push(' ');
        }
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                text.push_str(gaps[rng.random_range(0..gaps.len())]);
            }
            text.push_str(w);
        }
        let seq = vocab.encode(&text);
        ensure!(!seq.ids.contains(&vocab.specials().unk), "OOV in {text:?}");
        let back = vocab.decode(&seq).map_err(|e| e.to_string())?;
        ensure!(back == words.join(" "), "{text:?} decoded to {back:?}");
    }
    Ok(())
}

pub fn english_corpus() -> Corpus {
    super::word_corpus(&[
        "Harry Potter and the Philosopher's Stone is a fantasy novel.",
        "The stone grants immortality to whoever holds it, and the novel follows a young wizard.",
        "Tokenizers split rare words into pieces while frequent words stay whole.",
        "A fixed vocabulary keeps the embedding table small and the softmax cheap.",
    ])
}

pub fn tokenizers() -> Check {
    let merges: Vec<(String, String)> = train_bpe(&documented_bpe_corpus(), 100, BoundaryMode::Word)
        .map_err(|e| e.to_string())?
        .merges()
        .to_vec();
    let expected: Vec<(String, String)> =
        DOCUMENTED_BPE_MERGES.iter().map(|(l, r)| (l.to_string(), r.to_string())).collect();
    ensure!(merges == expected, "BPE merges {merges:?}");

    let mut wp_steps = 0;
    for seed in 0..20 {
        wp_steps += merges_match(random_units(seed), MergeRule::LikelihoodRatio, tok::wordpiece_choice)?;
    }
    let words: Vec<String> = documented_bpe_corpus().sentences().flat_map(|s| s.text().split(' ').map(String::from).collect::<Vec<_>>()).collect();
    wp_steps += merges_match(words, MergeRule::LikelihoodRatio, tok::wordpiece_choice)?;

    let english = english_corpus();
    let vocabs = [
        train_bpe(&english, 200, BoundaryMode::Word),
        train_wordpiece(&english, 200, BoundaryMode::Word),
        train_unigram(&english, 80, BoundaryMode::Word, UnigramOptions::default()),
        train_bpe(&english, 200, BoundaryMode::Whitespace),
    ];
    for (i, v) in vocabs.into_iter().enumerate() {
        let v = v.map_err(|e| e.to_string())?;
        round_trip(&v, 2500, 100 + i as u64)?;
    }
    Ok(format!("12 hand-derived BPE merges; {wp_steps} WordPiece steps match the ratio oracle; 10000 round trips"))
}

pub fn model_numerics() -> Check {
    let mut worst_grad = 0.0f64;
    for tie in [false, true] {
        let (cfg, p) = nets::check_model(tie);
        for (name, err) in nets::gradient_check(&cfg, &p, &nets::check_input(), 1e-5) {
            ensure!(err < 1e-4, "gradient of {name} (tied = {tie}) off by {err:e}");
            worst_grad = worst_grad.max(err);
        }
    }

    let (cfg, p) = nets::check_model(false);
    let input = nets::check_input();
    let enc = encoder_forward(&input, &cfg, &p).map_err(|e| e.to_string())?;
    let mut worst_row = 0.0f64;
    for l in 0..cfg.n_layers {
        for probs in enc.attention(l) {
            for row in probs.rows() {
                worst_row = worst_row.max((row.sum() - 1.0).abs());
            }
        }
    }
    ensure!(worst_row <= 1e-6, "attention row off by {worst_row:e}");

    let (mut cfg_perm, mut q) = nets::check_model(false);
    cfg_perm.layout = objforge::model::Layout::Pairwise;
    q.pos.fill(0.0);
    q.seq.fill(0.0);
    let ids = vec![5, 9, 3, 11, 7, 6, 10];
    let perm = [3, 0, 6, 2, 5, 1, 4];
    let base = nets::rows(&encoder_forward(&EncoderInput::plain(ids.clone()), &cfg_perm, &q).map_err(|e| e.to_string())?.hidden);
    let permuted_ids: Vec<u32> = perm.iter().map(|&i| ids[i]).collect();
    let moved = nets::rows(&encoder_forward(&EncoderInput::plain(permuted_ids), &cfg_perm, &q).map_err(|e| e.to_string())?.hidden);
    let expected: nets::Rows = perm.iter().map(|&i| base[i].clone()).collect();
    let perm_err = nets::max_abs_diff(&moved, &expected);
    ensure!(perm_err < 1e-10, "permutation changed outputs by {perm_err:e}");

    let mut other = input.clone();
    for i in 0..other.ids.len() {
        if !other.mask[i] {
            other.ids[i] = 11;
        }
    }
    ensure!(other.ids != input.ids, "input has no padding");
    let h1 = enc.hidden;
    let h2 = encoder_forward(&other, &cfg, &p).map_err(|e| e.to_string())?.hidden;
    for i in 0..input.ids.len() {
        if input.mask[i] {
            let same = h1.row(i).iter().zip(h2.row(i)).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure!(same, "row {i} changed with the padding");
        }
    }
    Ok(format!(
        "gradient error <= {worst_grad:.2e}; attention rows within {worst_row:.1e}; permutation {perm_err:.1e}; padding bit-identical"
    ))
}

pub fn training_smoke() -> Check {
    let t = Instant::now();
    let setup = ToySetup::new(0).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    let mut failed = Vec::new();
    for name in ["mlm", "rts", "crts", "slm", "ssp", "sp", "psd", "mspp"] {
        let trace = setup
            .trainer(parse_weights(name).map_err(|e| e.to_string())?)
            .and_then(|mut t| t.run())
            .map_err(|e| format!("{name}: {e}"))?;
        let losses = trace.losses(name);
        ensure!(losses.len() == 500, "{name} logged {} steps", losses.len());
        let r = loss_ratio(&losses, 10, 100).unwrap();
        if !(r <= 0.7) {
            failed.push(format!("{name} {r:.3}"));
        }
        detail.push(format!("{name} {r:.2}"));
    }
    let took = t.elapsed().as_secs_f64();
    ensure!(failed.is_empty(), "loss ratio above 0.7: {}", failed.join(", "));
    ensure!(took < 300.0, "took {took:.0} s");
    Ok(format!("last-100 / first-10 loss: {}; {took:.0} s", detail.join(", ")))
}

pub fn random_group(rng: &mut impl Rng) -> (Vec<f64>, Vec<bool>) {
    let n = rng.random_range(1..=6);
    // few distinct values, so ties are common
    let scores = (0..n).map(|_| rng.random_range(0..4) as f64 * 0.5 - 1.0).collect();
    let rel = (0..n).map(|_| rng.random_bool(0.4)).collect();
    (scores, rel)
}

pub fn ranking_metrics() -> Check {
    let mut rng = seeded(9);
    let mut groups = Vec::new();
    let mut oracle = Vec::new();
    for _ in 0..10_000 {
        let (s, r) = random_group(&mut rng);
        let g = RankedGroup::new(s.clone(), r.clone()).map_err(|e| e.to_string())?;
        let want = rank::brute_metrics(&s, &r);
        ensure!(g.ranking() == rank::brute_ranking(&s), "ranking of {s:?}");
        ensure!(average_precision(&g) == want.map(|m| m.ap), "AP of {s:?} / {r:?}");
        ensure!(reciprocal_rank(&g) == want.map(|m| m.rr), "RR of {s:?} / {r:?}");
        ensure!(precision_at_k(&g, 1) == want.map(|m| m.p1), "P@1 of {s:?} / {r:?}");
        if let Some(m) = want {
            oracle.push(m);
        }
        groups.push(g);
    }
    let mean = |f: fn(&rank::GroupMetrics) -> f64| oracle.iter().map(f).sum::<f64>() / oracle.len() as f64;
    let err = |e: objforge::Error| e.to_string();
    let (m, r, p) = (map(&groups).map_err(err)?, mrr(&groups).map_err(err)?, p_at_k(&groups, 1).map_err(err)?);
    ensure!(m == mean(|x| x.ap), "MAP {m}");
    ensure!(r == mean(|x| x.rr), "MRR {r}");
    ensure!(p == mean(|x| x.p1), "P@1 {p}");

    let transforms: [fn(f64) -> f64; 4] = [|x| 3.0 * x + 7.0, |x| x.exp(), |x| x * x * x, |x| (x + 2.0).ln()];
    for g in groups.iter().take(2000) {
        for f in transforms {
            let t = RankedGroup::new(g.scores().iter().map(|&x| f(x)).collect(), g.relevance().to_vec())
                .map_err(|e| e.to_string())?;
            ensure!(t.ranking() == g.ranking(), "monotone transform reordered {:?}", g.scores());
            ensure!(average_precision(&t) == average_precision(g), "monotone transform changed AP");
        }
    }
    Ok(format!("10000 groups match enumeration; MAP {:.4}, MRR {:.4}, P@1 {:.4}", m, r, p))
}
