//! Weight file layout (UTF-8 text):
//!
//! ```text
//! careflow-weights 1
//! scalar f64
//! layer tss_hidden <inputs> <outputs>
//! <outputs lines, each with <inputs> space-separated weights>
//! bias <outputs space-separated values>
//! layer tss_out ...
//! ```
//!
//! Layers appear in the order tss_hidden, tss_out, demo_hidden,
//! head_hidden, head_out, output. Values are written in the shortest
//! decimal form that parses back to the identical float, so a round trip is
//! bit-exact.

use std::io::{BufRead, Write};

use super::network::LAYER_NAMES;
use super::{Dense, ModelError, NetworkWeights, Result};
use crate::scalar::Scalar;

const MAGIC: &str = "careflow-weights 1";

pub fn write_weights<T: Scalar, W: Write>(w: &NetworkWeights<T>, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "scalar {}", T::NAME)?;
    for (name, layer) in LAYER_NAMES.iter().zip(w.layers()) {
        writeln!(out, "layer {name} {} {}", layer.inputs, layer.outputs)?;
        for row in layer.weights.chunks(layer.inputs.max(1)) {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        let bias: Vec<String> = layer.bias.iter().map(|x| x.to_string()).collect();
        writeln!(out, "bias {}", bias.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.number += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(self.error("unexpected end of file")),
        }
    }

    fn error(&self, reason: impl Into<String>) -> ModelError {
        ModelError::Parse {
            file: "weights",
            line: self.number,
            reason: reason.into(),
        }
    }

    fn values<T: Scalar>(&self, text: &str, expected: usize) -> Result<Vec<T>> {
        let values = text
            .split_whitespace()
            .map(|s| {
                s.parse::<T>()
                    .map_err(|_| self.error(format!("`{s}` is not a number")))
            })
            .collect::<Result<Vec<T>>>()?;
        if values.len() != expected {
            return Err(self.error(format!(
                "expected {expected} values, found {}",
                values.len()
            )));
        }
        Ok(values)
    }
}

pub fn read_weights<T: Scalar, R: BufRead>(input: R) -> Result<NetworkWeights<T>> {
    let mut lines = Lines {
        inner: input.lines(),
        number: 0,
    };
    if lines.next()?.trim() != MAGIC {
        return Err(lines.error("not a careflow weight file"));
    }
    let scalar = lines.next()?;
    if scalar.trim() != format!("scalar {}", T::NAME) {
        return Err(lines.error(format!("expected `scalar {}`", T::NAME)));
    }
    let mut layers = Vec::with_capacity(LAYER_NAMES.len());
    for name in LAYER_NAMES {
        let header = lines.next()?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let dims = match parts.as_slice() {
            ["layer", n, i, o] if *n == name => {
                i.parse::<usize>().ok().zip(o.parse::<usize>().ok())
            }
            _ => None,
        };
        let (inputs, outputs) =
            dims.ok_or_else(|| lines.error(format!("expected `layer {name} <in> <out>`")))?;
        let mut weights = Vec::with_capacity(inputs * outputs);
        for _ in 0..outputs {
            let row = lines.next()?;
            weights.extend(lines.values::<T>(&row, inputs)?);
        }
        let bias_line = lines.next()?;
        let bias_text = bias_line
            .strip_prefix("bias")
            .ok_or_else(|| lines.error("expected bias line"))?;
        let bias = lines.values::<T>(bias_text, outputs)?;
        layers.push(Dense {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    let mut it = layers.into_iter();
    let mut take = || it.next().expect("six layers parsed");
    let w = NetworkWeights {
        tss_hidden: take(),
        tss_out: take(),
        demo_hidden: take(),
        head_hidden: take(),
        head_out: take(),
        output: take(),
    };
    let expected = NetworkWeights::<T>::zeros(w.tss_width());
    for (got, want) in w.layers().iter().zip(expected.layers()) {
        if (got.inputs, got.outputs) != (want.inputs, want.outputs) {
            return Err(ModelError::Width {
                what: "layer",
                expected: want.inputs * want.outputs,
                found: got.inputs * got.outputs,
            });
        }
    }
    Ok(w)
}
