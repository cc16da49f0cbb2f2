//! wasm-bindgen bindings for `www/index.html`: a synthetic context chord
//! diagram, click-to-focus navigation and a sampling-strategy explorer.

mod demo;

use wasm_bindgen::prelude::*;

pub use demo::{strategy_curve, Demo};

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen]
pub struct Explorer {
    inner: Demo,
}

#[wasm_bindgen]
impl Explorer {
    #[wasm_bindgen(constructor)]
    pub fn new(x: usize, y: usize, z: usize, members: usize, seed: u64) -> Result<Explorer, JsError> {
        Ok(Self { inner: Demo::new([x, y, z], members, seed).map_err(js)? })
    }

    /// Computes the context view; returns the diagram JSON.
    pub fn context(&mut self, strategy: &str, budget: usize, seed: u64, brick_edge: usize) -> Result<String, JsError> {
        Ok(self.inner.context(strategy, budget, seed, brick_edge).map_err(js)?.to_json())
    }

    #[wasm_bindgen(js_name = focusNode)]
    pub fn focus_node(&mut self, node: usize) -> Result<String, JsError> {
        Ok(self.inner.focus_node(node).map_err(js)?.to_json())
    }

    #[wasm_bindgen(js_name = focusEdge)]
    pub fn focus_edge(&mut self, id: &str) -> Result<String, JsError> {
        Ok(self.inner.focus_edge(id).map_err(js)?.to_json())
    }

    pub fn back(&mut self, k: usize) -> Result<String, JsError> {
        Ok(self.inner.back(k).map_err(js)?.to_json())
    }

    pub fn depth(&self) -> usize {
        self.inner.depth()
    }

    pub fn svg(&self, size: u32) -> Result<String, JsError> {
        self.inner.svg(size).map_err(js)
    }
}

/// JSON list of `{strategy, budget, mean_error, ...}` rows.
#[wasm_bindgen(js_name = strategyCurve)]
pub fn strategy_curve_json(strategy: &str, max_budget: usize, seed: u64) -> Result<String, JsError> {
    let rows = strategy_curve(strategy, max_budget, seed).map_err(js)?;
    serde_json::to_string(&rows).map_err(|e| js(e.to_string()))
}
