//! One line per acceptance criterion. Exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use privlabel_core::aggregate::aggregate_sentence;
use privlabel_core::analyze::{
    analyze, difference_to_text, distribution, dominant_agreement, enforce_task_exclusivity, filter_contributors,
    spearman, ExclusionReason, FilterConfig,
};
use privlabel_core::lexicon::normalize_counts;
use privlabel_core::privacy::{lexicon_permutations, theoretical_permutations};
use privlabel_core::render::{cell_colour, shade, to_iv, HueScale, Palette};
use privlabel_core::transform::{
    compute_tfidf, to_lov, GoldSentence, LoVMatrix, Sentence, TfIdfTable, TransformOptions,
};
use privlabel_core::{AnnotationRecord, Emotion, EmotionVector, Lexicon, PrivacyLevel};
use privlabel_taskhub::store::load_records;
use privlabel_taskhub::{build_bundle, AnnotationStore, BundleOptions, NextItem, TaskHub};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn v(values: [f64; 8]) -> EmotionVector {
    EmotionVector::from_values(&values).unwrap()
}

fn random_hundredths(rng: &mut ChaCha8Rng, zero_chance: f64) -> [u8; 8] {
    std::array::from_fn(|_| if rng.random_bool(zero_chance) { 0 } else { rng.random_range(0..=100) })
}

fn normalization() -> Outcome {
    let got = normalize_counts(&[0, 3, 4, 0, 0, 0, 0, 0]).map_err(|e| e.to_string())?;
    ensure!(got.values() == [0., 0.75, 1., 0., 0., 0., 0., 0.], "got {:?}", got.values());
    Ok(format!("{:?}", got.values()))
}

fn privacy_math() -> Outcome {
    let theoretical = theoretical_permutations(3).map_err(|e| e.to_string())?;
    ensure!(theoretical == BigUint::from(101u32).pow(24), "theoretical count {theoretical}");
    ensure!(theoretical > BigUint::from(10u32).pow(48), "101^24 not above 10^48");

    // 1502 distinct vectors, each normalized so its largest entry is 1
    let mut rng = ChaCha8Rng::seed_from_u64(1502);
    let mut seen = BTreeSet::new();
    while seen.len() < 1502 {
        let mut h = random_hundredths(&mut rng, 0.5);
        h[rng.random_range(0..8)] = 100;
        seen.insert(h);
    }
    let names: Vec<String> = (0..seen.len()).map(|i| format!("term{i:04}")).collect();
    let lexicon = Lexicon::from_vectors(
        "synthetic",
        names.iter().map(String::as_str).zip(seen.iter().map(|h| EmotionVector::from_hundredths(*h).unwrap())),
    )
    .map_err(|e| e.to_string())?;
    ensure!(lexicon.stats().distinct_vector_count == 1502, "{} distinct vectors", lexicon.stats().distinct_vector_count);
    let count = lexicon_permutations(3, &lexicon).map_err(|e| e.to_string())?;
    ensure!(count == BigUint::from(3_388_518_008u64), "lexicon count {count}");
    ensure!(count == BigUint::from(1502u32).pow(3), "not 1502^3");
    Ok(format!("101^24 has {} digits; 1502^3 = {count}", theoretical.to_string().len()))
}

fn example_lexicon() -> Lexicon {
    Lexicon::from_vectors(
        "example",
        [
            ("have", v([0., 0., 0., 0., 0., 0., 0.25, 0.])),
            ("corruption", v([0., 0., 0., 0.33, 0.33, 0.33, 0., 0.])),
            ("issues", v([0., 0.15, 0., 0.85, 0., 0., 0., 0.])),
        ],
    )
    .unwrap()
}

fn lov_golden() -> Outcome {
    let sentence = Sentence::new("example", "news", "They have corruption issues");
    let lov = to_lov(&sentence, &example_lexicon(), None).map_err(|e| e.to_string())?;
    let expected = [
        [0., 0., 0., 0., 0., 0., 0., 0.],
        [0., 0., 0., 0., 0., 0., 0.25, 0.],
        [0., 0., 0., 0.33, 0.33, 0.33, 0., 0.],
        [0., 0.15, 0., 0.85, 0., 0., 0., 0.],
    ];
    let got: Vec<[f64; 8]> = lov.rows.iter().map(|r| r.values()).collect();
    ensure!(got == expected, "rows {got:?}");
    let iv = to_iv(&lov, &Palette::default(), 10.0, 32).map_err(|e| e.to_string())?;
    ensure!(iv.drawn_rows.len() == 3, "{} rows drawn", iv.drawn_rows.len());
    ensure!(iv.drawn_rows[..] == lov.rows[1..], "drawn rows out of order");
    ensure!(iv.height() == 3 * 32 && iv.width() == 8 * 32, "image is {}x{}", iv.width(), iv.height());
    Ok("4 rows reproduced, 3 drawn".into())
}

fn tfidf_weighting() -> Outcome {
    let lexicon = Lexicon::from_vectors("w", [("insult", v([0., 0., 0., 0., 0., 1., 0., 0.]))]).unwrap();
    let mut table = TfIdfTable::default();
    table.weights.insert(privlabel_core::text::stem("insult"), 0.48);
    let lov = to_lov(&Sentence::new("w", "book", "insult"), &lexicon, Some(&table)).map_err(|e| e.to_string())?;
    ensure!(lov.rows[0].values() == [0., 0., 0., 0., 0., 0.48, 0., 0.], "weighted row {:?}", lov.rows[0].values());

    let words: Vec<String> = (0..40).map(|i| format!("word{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let mut rows_checked = 0;
    for fixture in 0..1000 {
        let lexicon = Lexicon::from_vectors(
            "random",
            words
                .iter()
                .take(rng.random_range(1..=40))
                .map(|w| (w.as_str(), EmotionVector::from_hundredths(random_hundredths(&mut rng, 0.3)).unwrap()))
                .collect::<Vec<_>>(),
        )
        .map_err(|e| e.to_string())?;
        let corpus: Vec<Sentence> = (0..rng.random_range(1..=8))
            .map(|i| {
                let len = rng.random_range(1..=10);
                let text: Vec<&str> = (0..len).map(|_| words[rng.random_range(0..40)].as_str()).collect();
                Sentence::new(format!("s{i}"), "book", text.join(" "))
            })
            .collect();
        let table = compute_tfidf(&corpus).map_err(|e| e.to_string())?;
        for s in &corpus {
            let plain = to_lov(s, &lexicon, None).map_err(|e| e.to_string())?;
            let weighted = to_lov(s, &lexicon, Some(&table)).map_err(|e| e.to_string())?;
            for (p, w) in plain.rows.iter().zip(&weighted.rows) {
                let ok = p.hundredths().iter().zip(w.hundredths()).all(|(a, b)| b <= *a);
                ensure!(ok, "fixture {fixture}, sentence {}: {:?} above {:?}", s.id, w.values(), p.values());
                rows_checked += 1;
            }
        }
    }
    Ok(format!("0.48 row exact; {rows_checked} weighted rows bounded over 1000 fixtures"))
}

const VOCAB: [&str; 30] = [
    "anger", "bright", "calm", "danger", "delight", "disaster", "faith", "fear", "gift", "grief", "harbor", "hope",
    "horror", "justice", "lament", "lonely", "marvel", "murder", "orchard", "panic", "quarrel", "riot", "sorrow",
    "storm", "surprise", "thanks", "trust", "vile", "wedding", "wonder",
];
const FILLER: [&str; 12] = [
    "the", "a", "of", "near", "under", "window", "table", "seven", "walked", "said", "into", "yesterday",
];

fn scan_lexicon() -> Lexicon {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let rows: Vec<(&str, EmotionVector)> = VOCAB
        .iter()
        .map(|w| {
            let mut h = random_hundredths(&mut rng, 0.6);
            h[rng.random_range(0..8)] = 100;
            (*w, EmotionVector::from_hundredths(h).unwrap())
        })
        .collect();
    Lexicon::from_vectors("scan", rows).unwrap()
}

fn scan_corpus(n: usize, seed: u64) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(3..=12);
            let mut words: Vec<&str> = (0..len)
                .map(|_| {
                    if rng.random_bool(0.4) {
                        VOCAB[rng.random_range(0..VOCAB.len())]
                    } else {
                        FILLER[rng.random_range(0..FILLER.len())]
                    }
                })
                .collect();
            // every sentence carries at least one emotional term
            words.push(VOCAB[i % VOCAB.len()]);
            Sentence::new(format!("s{i:03}"), "news", words.join(" "))
        })
        .collect()
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    needle.is_empty() || haystack.windows(needle.len()).any(|w| w == needle)
}

fn png_chunks(png: &[u8]) -> Vec<String> {
    let mut chunks = Vec::new();
    let mut at = 8;
    while at + 8 <= png.len() {
        let len = u32::from_be_bytes(png[at..at + 4].try_into().unwrap()) as usize;
        chunks.push(String::from_utf8_lossy(&png[at + 4..at + 8]).into_owned());
        at += 12 + len;
    }
    chunks
}

fn iv_determinism_and_privacy() -> Outcome {
    let lexicon = scan_lexicon();
    let corpus = scan_corpus(100, 5);
    let sentence = &corpus[0];
    let lov = to_lov(sentence, &lexicon, None).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    to_iv(&lov, &Palette::default(), 10.0, 32).and_then(|i| i.save_png(&a)).map_err(|e| e.to_string())?;
    to_iv(&lov, &Palette::default(), 10.0, 32).and_then(|i| i.save_png(&b)).map_err(|e| e.to_string())?;
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    ensure!(!a.is_empty() && a == b, "renders differ");

    // what annotators receive: payload bodies as served and as written to the bundle directory
    let mut scanned = 0;
    let by_id: BTreeMap<&str, &Sentence> = corpus.iter().map(|s| (s.id.as_str(), s)).collect();
    for level in [PrivacyLevel::Medium, PrivacyLevel::High] {
        let bundle = build_bundle(&corpus, &lexicon, level, &[], 9, &BundleOptions::default()).map_err(|e| e.to_string())?;
        ensure!(bundle.items.len() == 100, "{level}: {} items", bundle.items.len());
        let out = dir.path().join(level.as_str());
        bundle.write_to(&out).map_err(|e| e.to_string())?;
        for item in &bundle.items {
            let on_disk = std::fs::read(out.join(&item.file)).map_err(|e| e.to_string())?;
            ensure!(on_disk == item.body, "{}: file differs from served body", item.item_id);
            let tokens = &by_id[item.sentence_id.as_str()].tokens;
            match level {
                PrivacyLevel::Medium => {
                    ensure!(
                        !item.body.iter().any(u8::is_ascii_alphabetic),
                        "{}: matrix payload contains letters",
                        item.item_id
                    );
                    for t in tokens {
                        ensure!(!contains(&item.body, t.as_bytes()), "{}: token {t:?} in matrix", item.item_id);
                    }
                }
                _ => {
                    let chunks = png_chunks(&item.body);
                    ensure!(
                        chunks.iter().all(|c| ["IHDR", "IDAT", "IEND"].contains(&c.as_str())),
                        "{}: unexpected chunks {chunks:?}",
                        item.item_id
                    );
                    // one- and two-letter tokens turn up in compressed bytes by chance
                    for t in tokens.iter().filter(|t| t.len() >= 3) {
                        ensure!(!contains(&item.body, t.as_bytes()), "{}: token {t:?} in image", item.item_id);
                    }
                }
            }
            scanned += 1;
        }
    }
    Ok(format!("renders byte-identical ({} bytes); {scanned} payloads clean", a.len()))
}

fn distance(a: [f64; 3], b: [u8; 3]) -> f64 {
    (0..3).map(|c| (a[c] - f64::from(b[c])).powi(2)).sum::<f64>().sqrt()
}

fn hue_monotonicity() -> Outcome {
    let palette = Palette::default();
    let scale = HueScale::new(10.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut pairs = 0;
    for e in Emotion::ALL {
        let base = palette.colour(e).rgb;
        let mut done = 0;
        while done < 100 {
            let (x, y): (f64, f64) = (rng.random(), rng.random());
            if x == y {
                continue;
            }
            let (v1, v2) = (x.min(y), x.max(y));
            let (d1, d2) = (distance(shade(&palette, &scale, e, v1), base), distance(shade(&palette, &scale, e, v2), base));
            ensure!(d2 < d1, "{e}: distance {d2} at {v2} not below {d1} at {v1}");
            let quantized = |v| distance(cell_colour(&palette, &scale, e, v).0.map(f64::from), base);
            ensure!(quantized(v2) <= quantized(v1), "{e}: pixel distance rises between {v1} and {v2}");
            done += 1;
            pairs += 1;
        }
    }
    Ok(format!("{pairs} pairs strictly decreasing"))
}

const AGG_WORDS: [&str; 10] = ["alarm", "bliss", "crave", "dread", "gloom", "grime", "havoc", "marvel", "trust", "yearn"];

fn aggregation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let table: Vec<[u8; 8]> = (0..10).map(|_| random_hundredths(&mut rng, 0.4)).collect();
    let lexicon = Lexicon::from_vectors(
        "ten",
        AGG_WORDS.iter().copied().zip(table.iter().map(|h| EmotionVector::from_hundredths(*h).unwrap())),
    )
    .map_err(|e| e.to_string())?;
    let lexicon_mean = lexicon.mean_vector();
    let oracle_mean: [f64; 8] = std::array::from_fn(|k| table.iter().map(|h| u64::from(h[k])).sum::<u64>() as f64 / 1000.0);
    ensure!(lexicon_mean == oracle_mean, "lexicon mean {lexicon_mean:?} vs {oracle_mean:?}");

    // each word's row as the lexicon returns it; sentences are assembled from these
    let word_rows: Vec<EmotionVector> = AGG_WORDS
        .iter()
        .map(|w| to_lov(&Sentence::new("w", "enum", *w), &lexicon, None).map(|l| l.rows[0]))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut checked = 0u64;
    let mut digits = Vec::with_capacity(6);
    let mut lov = LoVMatrix {
        sentence_id: String::new(),
        rows: Vec::with_capacity(6),
        weighted: false,
    };
    for len in 1..=6u32 {
        for code in 0..10u64.pow(len) {
            digits.clear();
            let mut c = code;
            for _ in 0..len {
                digits.push((c % 10) as usize);
                c /= 10;
            }
            lov.rows.clear();
            lov.rows.extend(digits.iter().map(|&d| word_rows[d]));
            let got = aggregate_sentence(&lov, &lexicon_mean).map_err(|e| e.to_string())?;

            // brute force: integer column sums, one correctly rounded division each
            let mut sums = [0u64; 8];
            for &d in &digits {
                for k in 0..8 {
                    sums[k] += u64::from(table[d][k]);
                }
            }
            let denom = f64::from(len * 100);
            let simple: [f64; 8] = sums.map(|s| s as f64 / denom);
            let diff: [f64; 8] = std::array::from_fn(|k| simple[k] - oracle_mean[k]);
            let first_max = |xs: &[f64; 8]| (1..8).fold(0, |best, k| if xs[k] > xs[best] { k } else { best });
            let int_best = (1..8).fold(0, |best, k| if sums[k] > sums[best] { k } else { best });
            ensure!(
                got.simple_scores == simple
                    && got.diff_scores == diff
                    && got.predicted_simple.index() == int_best
                    && got.predicted_diff.index() == first_max(&diff),
                "mismatch on {:?}: {got:?}",
                digits.iter().map(|&d| AGG_WORDS[d]).collect::<Vec<_>>()
            );
            checked += 1;
        }
    }
    ensure!(checked == 1_111_110, "enumerated {checked}");

    let (mut shifted, mut ties) = (0, 0);
    while shifted < 1000 {
        let n = rng.random_range(1..=12);
        let rows: Vec<EmotionVector> =
            (0..n).map(|_| EmotionVector::from_hundredths(random_hundredths(&mut rng, 0.3)).unwrap()).collect();
        let lov = LoVMatrix {
            sentence_id: format!("shift{shifted}"),
            rows,
            weighted: false,
        };
        let mean: [f64; 8] = std::array::from_fn(|_| f64::from(rng.random_range(0..=100u8)) / 100.0);
        let c = f64::from(rng.random_range(-100i32..=100)) / 100.0;
        let moved = mean.map(|m| m + c);
        let a = aggregate_sentence(&lov, &mean).map_err(|e| e.to_string())?;
        let b = aggregate_sentence(&lov, &moved).map_err(|e| e.to_string())?;
        // a shift can only reorder emotions whose differences are within rounding of each other
        let top = a.diff_scores[a.predicted_diff.index()];
        let near_tie = a.diff_scores.iter().filter(|&&d| (top - d).abs() < 1e-9).count() > 1;
        if near_tie {
            ties += 1;
            continue;
        }
        ensure!(a.predicted_diff == b.predicted_diff, "shift {c} moved argmax on {}", lov.sentence_id);
        ensure!(a.predicted_simple == b.predicted_simple, "simple prediction depends on the baseline");
        shifted += 1;
    }
    Ok(format!("{checked} sentences exact; 1000 shifts invariant ({ties} near-ties redrawn)"))
}

fn record(
    contributor: &str,
    source: &str,
    level: PrivacyLevel,
    sentence: &str,
    answer: &str,
    gold: Option<Emotion>,
) -> AnnotationRecord {
    AnnotationRecord {
        task_id: format!("{source}-{level}"),
        item_id: format!("{source}-{level}-{sentence}"),
        sentence_id: sentence.into(),
        source: source.into(),
        contributor_id: contributor.into(),
        level,
        answer: answer.into(),
        is_gold: gold.is_some(),
        gold_answer: gold,
        timestamp: 0,
    }
}

fn answer_label(level: PrivacyLevel, e: Emotion, palette: &Palette) -> String {
    if level == PrivacyLevel::High {
        palette.colour(e).name.clone()
    } else {
        e.name().to_string()
    }
}

/// Ten honest annotators per level over ten sentences. Annotator `i < 8`
/// answers emotion `(i + j + shift) % 8` on sentence `j`, annotators 8 and 9
/// answer `(j + shift) % 8`, so sentence `j` is dominated by that emotion
/// with 3 of 10 votes and no annotator repeats an answer more than twice.
fn planted_records(palette: &Palette) -> Vec<AnnotationRecord> {
    let mut out = Vec::new();
    let gold_truth = |g: usize| Emotion::ALL[g % 8];
    for (shift, level) in PrivacyLevel::ALL.iter().enumerate() {
        for i in 0..10 {
            let who = format!("{level}-honest{i}");
            for g in 0..10 {
                let truth = gold_truth(g);
                out.push(record(&who, "book", *level, &format!("gold{g}"), &answer_label(*level, truth, palette), Some(truth)));
            }
            for j in 0..10 {
                let e = if i < 8 { (i + j + shift) % 8 } else { (j + shift) % 8 };
                out.push(record(&who, "book", *level, &format!("s{j}"), &answer_label(*level, Emotion::ALL[e], palette), None));
            }
        }
    }
    // perfect gold, but the same answer everywhere else
    for g in 0..10 {
        let truth = gold_truth(g);
        out.push(record("spammer", "book", PrivacyLevel::NoPrivacy, &format!("gold{g}"), truth.name(), Some(truth)));
    }
    for j in 0..10 {
        out.push(record("spammer", "book", PrivacyLevel::NoPrivacy, &format!("s{j}"), "anger", None));
    }
    // nine of ten gold answers right, varied answers otherwise
    for g in 0..10 {
        let truth = gold_truth(g);
        let answer = if g == 0 { Emotion::Surprise } else { truth };
        out.push(record("borderline", "book", PrivacyLevel::Medium, &format!("gold{g}"), answer.name(), Some(truth)));
    }
    for j in 0..10 {
        out.push(record("borderline", "book", PrivacyLevel::Medium, &format!("s{j}"), Emotion::ALL[(3 * j) % 8].name(), None));
    }
    out
}

fn analysis_triad() -> Outcome {
    let palette = Palette::default();
    let records = planted_records(&palette);
    let config = FilterConfig::default();
    let (kept, stats) = filter_contributors(&records, &config, &palette).map_err(|e| e.to_string())?;
    let stat = |id: &str| stats.iter().find(|s| s.contributor_id == id).unwrap();
    ensure!(stat("spammer").reasons == [ExclusionReason::Spam], "spammer: {:?}", stat("spammer").reasons);
    ensure!(stat("borderline").confidence == 0.9, "borderline confidence {}", stat("borderline").confidence);
    ensure!(stat("borderline").reasons == [ExclusionReason::LowConfidence], "borderline: {:?}", stat("borderline").reasons);
    let excluded: Vec<&str> = stats.iter().filter(|s| s.excluded).map(|s| s.contributor_id.as_str()).collect();
    ensure!(excluded == ["spammer", "borderline"], "excluded {excluded:?}");
    ensure!(kept.len() == 4 * 10 * 10, "{} records kept", kept.len());

    for level in PrivacyLevel::ALL {
        let d = distribution(&kept, level, &palette).map_err(|e| e.to_string())?.ok_or("missing level")?;
        let total: f64 = d.iter().sum();
        ensure!((total - 1.0).abs() <= 1e-9, "{level} distribution sums to {total}");
    }
    let diff = difference_to_text(&kept, &palette).map_err(|e| e.to_string())?;
    ensure!(diff[&PrivacyLevel::NoPrivacy] == [0.0; 8], "Text difference {:?}", diff[&PrivacyLevel::NoPrivacy]);
    ensure!(diff.len() == 4, "difference covers {} levels", diff.len());

    let dominance = dominant_agreement(&kept, &palette).map_err(|e| e.to_string())?;
    ensure!(dominance.sentences.len() == 40, "{} dominance rows", dominance.sentences.len());
    for row in &dominance.sentences {
        let shift = PrivacyLevel::ALL.iter().position(|l| *l == row.level).unwrap();
        let j: usize = row.sentence_id[1..].parse().unwrap();
        ensure!(
            row.dominant == Emotion::ALL[(j + shift) % 8] && row.strength == 0.3 && row.annotations == 10,
            "{} at {}: {:?} {}",
            row.sentence_id,
            row.level,
            row.dominant,
            row.strength
        );
    }

    let report = analyze(&records, &config, &palette).map_err(|e| e.to_string())?;
    ensure!(report.kept_records == kept.len(), "report kept {}", report.kept_records);
    Ok("2 planted contributors excluded; sums, zero Text difference and 40 strengths match".into())
}

fn oracle_ranks(xs: &[f64]) -> Vec<f64> {
    // rank = 1 + number below + half the other ties
    xs.iter()
        .map(|&x| {
            let below = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle_rho(x: &[f64], y: &[f64]) -> Option<f64> {
    let (rx, ry) = (oracle_ranks(x), oracle_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn spearman_correctness() -> Outcome {
    let counts = [5., 1., 0., 3., 2., 2., 7., 4.];
    ensure!(spearman(&counts, &counts) == Some(1.0), "identical: {:?}", spearman(&counts, &counts));
    let up = [0., 1., 2., 3., 4., 5., 6., 7.];
    let down = [9., 8., 7., 6., 5., 4., 3., 2.];
    ensure!(spearman(&up, &down) == Some(-1.0), "reversal: {:?}", spearman(&up, &down));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    while compared < 1000 {
        let x: [f64; 8] = std::array::from_fn(|_| f64::from(rng.random_range(0..=10u8)));
        let y: [f64; 8] = std::array::from_fn(|_| f64::from(rng.random_range(0..=10u8)));
        let (got, want) = (spearman(&x, &y), oracle_rho(&x, &y));
        match (got, want) {
            (Some(g), Some(w)) => {
                worst = worst.max((g - w).abs());
                ensure!((g - w).abs() <= 1e-12, "{x:?} {y:?}: {g} vs {w}");
                compared += 1;
            }
            (None, None) => {}
            _ => return Err(format!("{x:?} {y:?}: {got:?} vs {want:?}")),
        }
    }
    Ok(format!("extremes exact; 1000 random pairs, max error {worst:.1e}"))
}

fn end_to_end() -> Outcome {
    let lexicon = scan_lexicon();
    let corpus = scan_corpus(20, 20);
    let gold: Vec<GoldSentence> = [("gold-joy", "delight wedding thanks", Emotion::Joy), ("gold-fear", "panic horror fear", Emotion::Fear)]
        .into_iter()
        .map(|(id, text, answer)| GoldSentence {
            sentence: Sentence::new(id, "news", text),
            answer,
        })
        .collect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bundles = Vec::new();
    for level in PrivacyLevel::ALL {
        let options = BundleOptions {
            transform: TransformOptions::default(),
            ..BundleOptions::default()
        };
        let bundle = build_bundle(&corpus, &lexicon, level, &gold, 2024, &options).map_err(|e| e.to_string())?;
        ensure!(bundle.gold_count == 2 && bundle.items.len() == 22, "{}: {} items", bundle.task_id, bundle.items.len());
        bundle.write_to(dir.path().join("bundles").join(&bundle.task_id)).map_err(|e| e.to_string())?;
        bundles.push(bundle);
    }
    let bundles = privlabel_taskhub::bundle::load_bundles(dir.path().join("bundles")).map_err(|e| e.to_string())?;
    let store = AnnotationStore::open(dir.path().join("store.jsonl")).map_err(|e| e.to_string())?;
    let hub = TaskHub::new(bundles.clone(), store).map_err(|e| e.to_string())?;
    let palette = Palette::default();

    for bundle in &bundles {
        for c in 0..10 {
            let who = hub.join(&bundle.task_id).map_err(|e| e.to_string())?;
            if c == 0 {
                let other = bundles.iter().find(|b| b.task_id != bundle.task_id).unwrap();
                ensure!(hub.next_item(&other.task_id, &who).is_err(), "{who} served a second task");
            }
            while let NextItem::Item(item) = hub.next_item(&bundle.task_id, &who).map_err(|e| e.to_string())? {
                let meta = bundle.item(&item.item_id).ok_or("unknown item served")?.1;
                let emotion = match meta.gold_answer {
                    Some(truth) => truth,
                    None => {
                        let h = privlabel_core::transform::derive_seed(c, &item.item_id);
                        Emotion::ALL[(h % 8) as usize]
                    }
                };
                hub.submit_annotation(&bundle.task_id, &who, &item.item_id, &answer_label(bundle.level, emotion, &palette))
                    .map_err(|e| e.to_string())?;
            }
        }
        let counts = hub.item_counts(&bundle.task_id).map_err(|e| e.to_string())?;
        for item in bundle.items.iter().filter(|i| !i.is_gold) {
            ensure!(counts[&item.item_id] == 10, "{}: {} annotations", item.item_id, counts[&item.item_id]);
        }
    }

    let export = dir.path().join("export.jsonl");
    let written = hub
        .write_export(None, std::fs::File::create(&export).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let records = load_records(&export).map_err(|e| e.to_string())?;
    ensure!(records.len() == written && written == 4 * 10 * 22, "{written} records exported");
    let violations = enforce_task_exclusivity(&records);
    ensure!(violations.is_empty(), "violations {violations:?}");

    let report = analyze(&records, &FilterConfig::default(), &palette).map_err(|e| e.to_string())?;
    let out = dir.path().join("report");
    report.write_to(&out).map_err(|e| e.to_string())?;
    ensure!(out.join("report.json").is_file() && out.join("distribution_news.csv").is_file(), "report files missing");
    ensure!(report.exclusivity_violations.is_empty(), "report lists violations");
    Ok(format!(
        "4 tasks x 20 items x 10 annotations; {} records, {} kept after filtering",
        records.len(),
        report.kept_records
    ))
}

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "normalization", limit: Duration::from_secs(1), run: normalization },
        Criterion { name: "privacy_math", limit: Duration::from_secs(1), run: privacy_math },
        Criterion { name: "lov_golden", limit: Duration::from_secs(1), run: lov_golden },
        Criterion { name: "tfidf_weighting", limit: Duration::from_secs(1), run: tfidf_weighting },
        Criterion { name: "iv_determinism_and_privacy", limit: Duration::from_secs(10), run: iv_determinism_and_privacy },
        Criterion { name: "hue_monotonicity", limit: Duration::from_secs(1), run: hue_monotonicity },
        Criterion { name: "aggregation_oracle", limit: Duration::from_secs(30), run: aggregation_oracle },
        Criterion { name: "analysis_triad", limit: Duration::from_secs(5), run: analysis_triad },
        Criterion { name: "spearman_correctness", limit: Duration::from_secs(5), run: spearman_correctness },
        Criterion { name: "end_to_end_round_trip", limit: Duration::from_secs(60), run: end_to_end },
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.limit => Err(format!("{detail}; took {elapsed:.2?}, limit {:?}", c.limit)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {:<28} {:>9.3?}  {detail}", c.name, elapsed),
            Err(why) => {
                failed += 1;
                println!("FAIL {:<28} {:>9.3?}  {why}", c.name, elapsed);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
