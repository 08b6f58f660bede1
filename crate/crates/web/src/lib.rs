//! Browser bindings for the detector.
//!
//! Each exported function takes plain values and returns a JSON string, either
//! the result object or `{"error": "..."}`. The `*_json` functions hold the
//! logic and are what the native tests call.

use halludetect::calibration::{min_calibration_size, CalibrationSizeSpec, ScanStrategy};
use halludetect::conformal::{combined_statistic, detect, DetectorConfig, PValueVector};
use halludetect::numerics::{symmetric_eigenvalues, RngSeed};
use halludetect::scores::{
    cluster_bidirectional, eigv_score, score_record, GenerationRecord, MassMode, ScoreConfig,
};
use halludetect::textsim::{pairwise_matrix, EquivalenceOracle, Measure};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_GENERATIONS: usize = 64;
const MAX_SIZE_SCAN: usize = 200_000;

fn render(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

/// Scores one line-per-generation block of text.
pub fn score_generations_json(text: &str, threshold: f64, alpha: f64, seed: u64) -> Result<Value, String> {
    let generations: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if generations.is_empty() {
        return Err("enter at least one generation, one per line".into());
    }
    if generations.len() > MAX_GENERATIONS {
        return Err(format!("at most {MAX_GENERATIONS} generations"));
    }
    let record = GenerationRecord::new("demo", generations);
    let oracle = EquivalenceOracle::BidirectionalRouge { threshold };
    let config = ScoreConfig {
        oracle,
        alpha,
        seed: RngSeed(seed),
        ..ScoreConfig::default()
    };
    let scores = score_record(&record, &config).map_err(|e| e.to_string())?;
    let sim = pairwise_matrix(&record.tokenized_generations(), Measure::RougeL).map_err(|e| e.to_string())?;
    let partition = cluster_bidirectional(&record, &oracle, MassMode::Frequency).map_err(|e| e.to_string())?;

    let m = sim.dim();
    let degrees: Vec<f64> = sim.rows().iter().map(|r| r.iter().sum()).collect();
    let laplacian: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let v = sim.get(i, j) / (degrees[i] * degrees[j]).sqrt();
                    if i == j { 1.0 - v } else { -v }
                })
                .collect()
        })
        .collect();
    let spectrum = symmetric_eigenvalues(&laplacian).map_err(|e| e.to_string())?;
    Ok(json!({
        "m": m,
        "similarity": sim.rows(),
        "clusters": partition.assignment(),
        "cluster_mass": partition.cluster_mass(),
        "laplacian_eigenvalues": spectrum.eigenvalues(),
        "eigv": eigv_score(&sim).map_err(|e| e.to_string())?,
        "scores": scores.scores,
    }))
}

/// Runs the global-null test on p-values given as a comma- or space-separated list.
pub fn detect_json(p_values: &str, alpha: f64, epsilon: f64) -> Result<Value, String> {
    let qs = p_values
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number")))
        .collect::<Result<Vec<f64>, String>>()?;
    if qs.is_empty() {
        return Err("enter at least one p-value".into());
    }
    if let Some(q) = qs.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
        return Err(format!("p-values must lie in (0, 1], got {q}"));
    }
    let k = qs.len();
    let pvec = PValueVector {
        id: "demo".into(),
        q: qs.iter().enumerate().map(|(i, &q)| (format!("score-{:02}", i + 1), q)).collect(),
    };
    let detector = DetectorConfig::theoretical(alpha, epsilon, k);
    detector.validate().map_err(|e| e.to_string())?;
    let decision = detect(&pvec, &detector).map_err(|e| e.to_string())?;
    let sorted: Vec<Value> = pvec.sorted().iter().map(|(n, q)| json!({ "name": n, "q": q })).collect();
    Ok(json!({
        "k": k,
        "coefficient": detector.coefficient().map_err(|e| e.to_string())?,
        "thresholds": detector.thresholds().map_err(|e| e.to_string())?,
        "sorted": sorted,
        "hallucination": decision.hallucination,
        "triggering_rank": decision.triggering_rank,
        "combined_stat": combined_statistic(&pvec).map_err(|e| e.to_string())?,
    }))
}

/// Per-rank terms of the calibration-size condition at `n`, plus the smallest passing size.
pub fn calibration_size_json(alpha: f64, epsilon: f64, delta: f64, k: usize, n: usize) -> Result<Value, String> {
    let spec = CalibrationSizeSpec { alpha, epsilon, delta, k };
    let terms = spec.terms(n).map_err(|e| e.to_string())?;
    let min_n = min_calibration_size(&spec, MAX_SIZE_SCAN, ScanStrategy::default()).map_err(|e| e.to_string())?;
    Ok(json!({
        "n": n,
        "required_level": spec.required_level(),
        "holds": terms.iter().all(|t| t.passes),
        "terms": terms,
        "min_n": min_n,
        "scan_limit": MAX_SIZE_SCAN,
    }))
}

#[wasm_bindgen]
pub fn score_generations(text: &str, threshold: f64, alpha: f64, seed: u32) -> String {
    render(score_generations_json(text, threshold, alpha, u64::from(seed)))
}

#[wasm_bindgen]
pub fn run_detector(p_values: &str, alpha: f64, epsilon: f64) -> String {
    render(detect_json(p_values, alpha, epsilon))
}

#[wasm_bindgen]
pub fn calibration_size(alpha: f64, epsilon: f64, delta: f64, k: u32, n: u32) -> String {
    render(calibration_size_json(alpha, epsilon, delta, k as usize, n as usize))
}
