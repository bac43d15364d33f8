//! Serde helpers: non-finite floats are written as the strings `"inf"`,
//! `"-inf"` or `"nan"` since JSON has no literal for them.

use serde::ser::SerializeSeq;
use serde::Serializer;

pub fn f64_or_inf<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn vec_f64_or_inf<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    struct Wrap(f64);
    impl serde::Serialize for Wrap {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            f64_or_inf(&self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for &x in v {
        seq.serialize_element(&Wrap(x))?;
    }
    seq.end()
}
