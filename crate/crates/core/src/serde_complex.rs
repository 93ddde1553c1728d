//! Serialization of high-precision values as decimal strings.
//!
//! JSON consumers frequently parse numbers into `f64`; values are therefore
//! written as strings carrying enough decimal digits to round-trip at their
//! binary precision, together with that precision.

use rug::{Complex, Float};
use serde::ser::{SerializeSeq, SerializeStruct};
use serde::Serializer;

/// Round-trip decimal representation of `x`.
pub fn decimal(x: &Float) -> String {
    x.to_string_radix(10, None)
}

pub fn serialize<S: Serializer>(value: &Complex, s: S) -> Result<S::Ok, S::Error> {
    let mut st = s.serialize_struct("Complex", 3)?;
    st.serialize_field("re", &decimal(value.real()))?;
    st.serialize_field("im", &decimal(value.imag()))?;
    st.serialize_field("bits", &value.prec().0)?;
    st.end()
}

struct Wrapped<'a>(&'a Complex);

impl serde::Serialize for Wrapped<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serialize(self.0, s)
    }
}

pub fn serialize_vec<S: Serializer>(values: &[Complex], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(values.len()))?;
    for v in values {
        seq.serialize_element(&Wrapped(v))?;
    }
    seq.end()
}

pub fn serialize_opt<S: Serializer>(value: &Option<Complex>, s: S) -> Result<S::Ok, S::Error> {
    match value {
        Some(v) => serialize(v, s),
        None => s.serialize_none(),
    }
}

pub fn serialize_integer<S: Serializer>(value: &rug::Integer, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&value.to_string())
}
