//! Browser bindings for a small interactive zero-shot demo.
//!
//! Every export takes plain numbers and returns a JSON string. The native
//! functions in [`demo`] back them and are tested without a browser.

use wasm_bindgen::prelude::*;

pub mod demo;

fn to_js<T: serde::Serialize>(r: propnsm::Result<T>) -> Result<String, JsValue> {
    match r {
        Ok(v) => serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())),
        Err(e) => Err(JsValue::from_str(&e.to_string())),
    }
}

/// Gram matrices before and after fitting seen-label property vectors.
#[wasm_bindgen]
pub fn property_fit(
    alpha: f64,
    lambda_w: f64,
    n_prime: usize,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(demo::property_fit(alpha, lambda_w, n_prime, seed as u64))
}

/// Mean binary zero-shot accuracy of each method over random held-out pairs.
#[wasm_bindgen]
pub fn zero_shot_trials(semantic_noise: f64, trials: usize, seed: u32) -> Result<String, JsValue> {
    to_js(demo::zero_shot_trials(semantic_noise, trials, seed as u64))
}

/// Instances mapped into a two-dimensional property space.
#[wasm_bindgen]
pub fn property_plane(alpha: f64, lambda_v: f64, seed: u32) -> Result<String, JsValue> {
    to_js(demo::property_plane(alpha, lambda_v, seed as u64))
}
