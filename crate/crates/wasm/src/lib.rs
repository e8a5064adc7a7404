//! WebAssembly bindings for the demo page in `web/`. The plain functions do
//! the work and are tested natively; the exported wrappers only turn errors
//! into JavaScript exceptions.

use juliaspec::julia::{membership_grid, GridSpec};
use juliaspec::spectra::residual;
use juliaspec::{chain, Base, Complex64, ProbParam};
use wasm_bindgen::prelude::*;

/// Pixel view of the complex plane shared by all renders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub width: usize,
    pub height: usize,
}

impl View {
    fn grid(&self) -> Result<GridSpec, String> {
        GridSpec::new(
            (self.re_min, self.re_max),
            (self.im_min, self.im_max),
            self.width,
            self.height,
        )
        .map_err(|e| e.to_string())
    }
}

fn prob(p: f64) -> Result<ProbParam, String> {
    ProbParam::new(p).map_err(|e| e.to_string())
}

fn parse_base(base: &str) -> Result<Base, String> {
    base.parse().map_err(|_| format!("unknown base `{base}`"))
}

/// RGBA escape-time image: `J(f)` for binary, `E_p` for Fibonacci. Bounded
/// pixels are dark blue, escaping ones fade to white with the escape time.
pub fn render_rgba(base: Base, p: f64, view: View, max_iter: u32) -> Result<Vec<u8>, String> {
    if max_iter == 0 || max_iter > 10_000 {
        return Err("iterations must be in 1..=10000".into());
    }
    if view.width * view.height > 4_000_000 {
        return Err("at most 4 million pixels".into());
    }
    let raster = membership_grid(base, prob(p)?, view.grid()?, max_iter);
    let mut rgba = Vec::with_capacity(4 * view.width * view.height);
    for (i, &n) in raster.iterations().iter().enumerate() {
        if n == juliaspec::julia::EscapeRaster::BOUNDED {
            rgba.extend_from_slice(&[16, 24, 64, 255]);
        } else {
            let g = raster.shade(i);
            rgba.extend_from_slice(&[g, g, g, 255]);
        }
    }
    Ok(rgba)
}

/// Exact transition row of state `n` as a JSON object `{"state": prob}`.
pub fn row_json(base: Base, n: u64, p: f64) -> Result<String, String> {
    let row = chain::row(base, n, prob(p)?);
    let map: serde_json::Map<String, serde_json::Value> = row
        .entries
        .iter()
        .map(|&(t, v)| (t.to_string(), v.into()))
        .collect();
    Ok(serde_json::Value::Object(map).to_string())
}

/// Residuals at depths `first..=last` (binary from 1, Fibonacci from 2);
/// `NaN` marks depths whose `q` values escaped.
pub fn residual_decay(base: Base, re: f64, im: f64, p: f64, last: u32) -> Result<Vec<f64>, String> {
    let q = prob(p)?;
    let (first, cap) = match base {
        Base::Binary => (1, 22),
        Base::Fibonacci => (2, 30),
    };
    if last < first || last > cap {
        return Err(format!("depth must be in {first}..={cap}"));
    }
    let lambda = Complex64::new(re, im);
    (first..=last)
        .map(|n| match residual(base, lambda, q, n, 2.0) {
            Ok(r) => Ok(r),
            Err(juliaspec::Error::Escaped { .. }) => Ok(f64::NAN),
            Err(e) => Err(e.to_string()),
        })
        .collect()
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn render(
    base: &str,
    p: f64,
    re_min: f64,
    re_max: f64,
    im_min: f64,
    im_max: f64,
    width: usize,
    height: usize,
    max_iter: u32,
) -> Result<Vec<u8>, JsError> {
    let view = View {
        re_min,
        re_max,
        im_min,
        im_max,
        width,
        height,
    };
    js(parse_base(base).and_then(|b| render_rgba(b, p, view, max_iter)))
}

#[wasm_bindgen]
pub fn transition_row(base: &str, n: u64, p: f64) -> Result<String, JsError> {
    js(parse_base(base).and_then(|b| row_json(b, n, p)))
}

#[wasm_bindgen]
pub fn residuals(base: &str, re: f64, im: f64, p: f64, last: u32) -> Result<Vec<f64>, JsError> {
    js(parse_base(base).and_then(|b| residual_decay(b, re, im, p, last)))
}
