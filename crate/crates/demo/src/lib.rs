//! Browser demo: three small views over the weighting and alignment code,
//! exported through wasm-bindgen. Every export takes and returns plain
//! strings or numbers so the same functions run natively in tests.

use gecweight::align::{align_to_tags, apply_tags};
use gecweight::corpus::ParallelSample;
use gecweight::signal::{entropy_norm, PositionStat, TeacherSignal};
use gecweight::weights::{default_epsilon, diversity, sentence_weight, token_weight};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn error(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

#[wasm_bindgen]
pub fn default_eps() -> f64 {
    default_epsilon()
}

/// Sentence weight at one diversity value.
#[wasm_bindgen]
pub fn sentence_weight_at(div: f64, epsilon: f64) -> f64 {
    sentence_weight(div.clamp(0.0, 1.0), epsilon)
}

/// `points` evenly spaced samples of the sentence-weight curve on `[0, 1]`,
/// as a JSON array of `[div, weight]` pairs.
#[wasm_bindgen]
pub fn weight_curve(epsilon: f64, points: usize) -> String {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return error(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let n = points.max(2);
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let d = i as f64 / (n - 1) as f64;
            [d, sentence_weight(d, epsilon)]
        })
        .collect();
    json!(pts).to_string()
}

/// Weights for one sentence given per-slot teacher distributions.
///
/// Input: JSON `{"dists": [[..], ..], "gold": [i, ..]}`. Output: per-slot
/// `p_gold`, `entropy_norm` and `w_token`, plus `div` and `w_sent`.
#[wasm_bindgen]
pub fn weights_from_distributions(input: &str, epsilon: f64) -> String {
    let v: Value = match serde_json::from_str(input) {
        Ok(v) => v,
        Err(e) => return error(e),
    };
    let dists: Vec<Vec<f64>> = match serde_json::from_value(v["dists"].clone()) {
        Ok(d) => d,
        Err(e) => return error(format!("dists: {e}")),
    };
    let gold: Vec<usize> = match serde_json::from_value(v["gold"].clone()) {
        Ok(g) => g,
        Err(e) => return error(format!("gold: {e}")),
    };
    match TeacherSignal::from_distributions(0, dists, &gold, false) {
        Ok(sig) => signal_report(&sig, epsilon),
        Err(e) => error(e),
    }
}

/// Same as [`weights_from_distributions`] but from precomputed statistics:
/// JSON `{"p_gold": [..], "entropy_norm": [..]}`.
#[wasm_bindgen]
pub fn weights_from_stats(input: &str, epsilon: f64) -> String {
    let v: Value = match serde_json::from_str(input) {
        Ok(v) => v,
        Err(e) => return error(e),
    };
    let p: Vec<f64> = serde_json::from_value(v["p_gold"].clone()).unwrap_or_default();
    let h: Vec<f64> = serde_json::from_value(v["entropy_norm"].clone()).unwrap_or_default();
    if p.len() != h.len() || p.is_empty() {
        return error("p_gold and entropy_norm need the same, non-zero length");
    }
    if p.iter().chain(&h).any(|x| !(0.0..=1.0).contains(x)) {
        return error("values must lie in [0, 1]");
    }
    let sig = TeacherSignal {
        sample_id: 0,
        vocab_size: 2,
        positions: p.iter().zip(&h).map(|(&p_gold, &entropy_norm)| PositionStat { p_gold, entropy_norm }).collect(),
        full_dist: None,
    };
    signal_report(&sig, epsilon)
}

fn signal_report(sig: &TeacherSignal, epsilon: f64) -> String {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return error(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let div = match diversity(sig) {
        Ok(d) => d,
        Err(e) => return error(e),
    };
    let slots: Vec<Value> = sig
        .positions
        .iter()
        .map(|p| json!({ "p_gold": p.p_gold, "entropy_norm": p.entropy_norm, "w_token": token_weight(p) }))
        .collect();
    json!({ "slots": slots, "div": div, "w_sent": sentence_weight(div, epsilon) }).to_string()
}

/// Normalized entropy of one distribution, or -1 when it is invalid.
#[wasm_bindgen]
pub fn normalized_entropy(dist_json: &str) -> f64 {
    serde_json::from_str::<Vec<f64>>(dist_json)
        .ok()
        .and_then(|d| entropy_norm(&d, d.len()).ok())
        .unwrap_or(-1.0)
}

/// Edit tags for a whitespace-tokenized sentence pair, one row per slot.
#[wasm_bindgen]
pub fn align_pair(source: &str, target: &str, a_max: usize) -> String {
    if source.trim().is_empty() {
        return error("source sentence is empty");
    }
    let sample = ParallelSample::from_strs(0, source, target);
    let seq = match align_to_tags(&sample, a_max) {
        Ok(s) => s,
        Err(e) => return error(e),
    };
    let rows: Vec<Value> = seq
        .tags
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let token = if i == 0 { "<s>" } else { sample.source[i - 1].as_str() };
            json!({ "slot": i, "token": token, "tag": t.render() })
        })
        .collect();
    let rebuilt = apply_tags(&sample.source, &seq.tags).map(|t| t.join(" ")).unwrap_or_default();
    json!({ "rows": rows, "rebuilt": rebuilt }).to_string()
}
