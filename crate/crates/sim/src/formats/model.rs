//! NARX model files.
//!
//! ```text
//! underlay-narx-model 1
//! d_u1 7
//! d_u2 7
//! d_y 7
//! hidden_nodes 50
//! norm_u1 <shift> <scale>
//! norm_u2 <shift> <scale>
//! norm_y <shift> <scale>
//! input_weights
//! w <R values>            (H lines, row-major)
//! input_biases <H values>
//! output_weights <H values>
//! output_bias <value>
//! ```

use std::fs;
use std::path::Path;

use underlay_core::narx::{Affine, NarxModel, Normalization};

use super::{fmt_exact, push_record, Lines};
use crate::error::{Result, SimError};

const MAGIC: &str = "underlay-narx-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn model_to_string(m: &NarxModel) -> String {
    let mut out = format!("{MAGIC} {MODEL_FORMAT_VERSION}\n");
    push_record(&mut out, "d_u1", [m.d_u1.to_string()]);
    push_record(&mut out, "d_u2", [m.d_u2.to_string()]);
    push_record(&mut out, "d_y", [m.d_y.to_string()]);
    push_record(&mut out, "hidden_nodes", [m.hidden_nodes.to_string()]);
    let n = &m.normalization;
    for (key, a) in [("norm_u1", n.u1), ("norm_u2", n.u2), ("norm_y", n.y)] {
        push_record(&mut out, key, [fmt_exact(a.shift), fmt_exact(a.scale)]);
    }
    out.push_str("input_weights\n");
    for row in m.input_weights.chunks(m.regressor_len().max(1)) {
        push_record(&mut out, "w", row.iter().map(|&v| fmt_exact(v)));
    }
    push_record(&mut out, "input_biases", m.input_biases.iter().map(|&v| fmt_exact(v)));
    push_record(&mut out, "output_weights", m.output_weights.iter().map(|&v| fmt_exact(v)));
    push_record(&mut out, "output_bias", [fmt_exact(m.output_bias)]);
    out
}

pub fn model_from_str(text: &str) -> Result<NarxModel> {
    let mut l = Lines::new(text);
    l.header(MAGIC, "model", MODEL_FORMAT_VERSION)?;
    let d_u1: usize = l.uint("d_u1")?;
    let d_u2: usize = l.uint("d_u2")?;
    let d_y: usize = l.uint("d_y")?;
    let hidden_nodes: usize = l.uint("hidden_nodes")?;
    let mut affine = |key: &str| -> Result<Affine> {
        let toks = l.record(key)?;
        let v = l.floats(&toks, Some(2))?;
        Ok(Affine { shift: v[0], scale: v[1] })
    };
    let normalization = Normalization { u1: affine("norm_u1")?, u2: affine("norm_u2")?, y: affine("norm_y")? };
    let r = (d_u1 + 1) + (d_u2 + 1) + d_y;
    l.record("input_weights")?;
    let mut input_weights = Vec::with_capacity(hidden_nodes * r);
    for _ in 0..hidden_nodes {
        let toks = l.record("w")?;
        input_weights.extend(l.floats(&toks, Some(r))?);
    }
    let toks = l.record("input_biases")?;
    let input_biases = l.floats(&toks, Some(hidden_nodes))?;
    let toks = l.record("output_weights")?;
    let output_weights = l.floats(&toks, Some(hidden_nodes))?;
    let output_bias = l.float("output_bias")?;
    l.finish()?;
    let m = NarxModel {
        d_u1,
        d_u2,
        d_y,
        hidden_nodes,
        input_weights,
        input_biases,
        output_weights,
        output_bias,
        normalization,
    };
    m.validate()?;
    Ok(m)
}

pub fn save_model(path: &Path, m: &NarxModel) -> Result<()> {
    fs::write(path, model_to_string(m)).map_err(|e| SimError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<NarxModel> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    model_from_str(&text)
}
