//! Deterministic JSON output: floats carry 17 significant digits and object
//! keys follow declaration order (or sorted order for maps).

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use super::PipelineConfig;
use crate::error::Result;

/// Writes every float as `d.ddddddddddddddddde±x`.
pub struct SigFigFormatter<F> {
    inner: F,
}

fn write_float<W: ?Sized + io::Write>(w: &mut W, v: f64) -> io::Result<()> {
    if v == 0.0 {
        // Avoid a separate `-0` spelling.
        return w.write_all(b"0.0000000000000000e0");
    }
    write!(w, "{v:.16e}")
}

macro_rules! delegate {
    ($($name:ident),* $(,)?) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.inner.$name(w)
            }
        )*
    };
}

impl<F: Formatter> Formatter for SigFigFormatter<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write_float(w, v)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write_float(w, v as f64)
    }

    delegate!(
        begin_array,
        end_array,
        begin_object,
        end_object,
        end_array_value,
        end_object_value
    );

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
}

fn serialize<T: Serialize + ?Sized, F: Formatter>(value: &T, inner: F) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFigFormatter { inner });
    value.serialize(&mut ser)?;
    Ok(out)
}

/// Single-line canonical JSON.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    serialize(value, CompactFormatter)
}

/// Indented canonical JSON with a trailing newline.
pub fn to_canonical_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = serialize(value, PrettyFormatter::new())?;
    out.push(b'\n');
    Ok(out)
}

/// Stable id of running `config` on the dataset `dataset_id`.
pub fn run_id(dataset_id: &str, config: &PipelineConfig) -> Result<String> {
    // Going through `Value` sorts keys.
    let canonical = to_canonical_json(&serde_json::to_value(config)?)?;
    let mut h = Sha256::new();
    h.update(dataset_id.as_bytes());
    h.update(b"\n");
    h.update(&canonical);
    Ok(hex::encode(&h.finalize()[..12]))
}

/// Every view payload is wrapped with the inputs that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub run_id: &'a str,
    pub seed: u64,
    pub config: &'a PipelineConfig,
    pub data: T,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let out = String::from_utf8(to_canonical_json(&vec![0.1, 1.0, -0.0, 2152.0, 1e-300]).unwrap()).unwrap();
        assert_eq!(
            out,
            "[1.0000000000000001e-1,1.0000000000000000e0,0.0000000000000000e0,2.1520000000000000e3,1.0000000000000000e-300]"
        );
        let back: Vec<f64> = serde_json::from_str(&out).unwrap();
        assert_eq!(back[0], 0.1);
        assert_eq!(
            String::from_utf8(to_canonical_json(&(f64::NAN, 3u32)).unwrap()).unwrap(),
            "[null,3]"
        );
    }

    #[test]
    fn run_id_depends_on_inputs() {
        let c = PipelineConfig::default();
        let a = run_id("abc", &c).unwrap();
        assert_eq!(a, run_id("abc", &c).unwrap());
        assert_ne!(a, run_id("abd", &c).unwrap());
        assert_ne!(a, run_id("abc", &PipelineConfig { seed: 1, ..c }).unwrap());
        assert_eq!(a.len(), 24);
    }
}
