//! `f64` fields that may be non-finite: written as numbers when finite and as
//! the strings `"inf"`, `"-inf"`, `"nan"` otherwise, since JSON has no such numbers.

use serde::{Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Num(f64),
    Str(String),
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    match Repr::deserialize(d)? {
        Repr::Num(x) => Ok(x),
        Repr::Str(s) => match s.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            other => Err(serde::de::Error::custom(format!(
                "expected a number, got {other:?}"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super")] f64);

    #[test]
    fn non_finite_values_survive_json() {
        for x in [1.5, -0.0, f64::INFINITY, f64::NEG_INFINITY] {
            let text = serde_json::to_string(&Wrap(x)).unwrap();
            let back: Wrap = serde_json::from_str(&text).unwrap();
            assert_eq!(back.0.to_bits(), x.to_bits(), "{text}");
        }
        let text = serde_json::to_string(&Wrap(f64::NAN)).unwrap();
        assert_eq!(text, "\"nan\"");
        assert!(serde_json::from_str::<Wrap>(&text).unwrap().0.is_nan());
        assert!(serde_json::from_str::<Wrap>("\"big\"").is_err());
    }
}
