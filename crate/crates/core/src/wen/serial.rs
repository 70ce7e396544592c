//! TOML form of a Wen datum. Only `k` and `n` are read back; the derived
//! fields are written for the reader's benefit and recomputed on parse.

use serde::{Deserialize, Serialize};

use super::{validate_wen, WenDatum, WenError};

#[derive(Serialize, Deserialize)]
struct Doc {
    k: Vec<Vec<i64>>,
    n: Vec<i64>,
    #[serde(default, skip_deserializing)]
    derived: Option<Derived>,
}

#[derive(Serialize, Deserialize)]
struct Derived {
    d: i64,
    delta: i64,
    n_total: i64,
    u: Vec<String>,
    epsilon_k: i8,
    cyclic: bool,
    invariant_factors: Vec<i64>,
}

pub(super) fn to_text(w: &WenDatum) -> String {
    let doc = Doc {
        k: w.k.clone(),
        n: w.n_vec.clone(),
        derived: Some(Derived {
            d: w.d,
            delta: w.delta,
            n_total: w.n_total,
            u: w.u.iter().map(|x| x.to_string()).collect(),
            epsilon_k: w.epsilon_k,
            cyclic: w.cyclic,
            invariant_factors: w.invariant_factors.clone(),
        }),
    };
    toml::to_string(&doc).expect("plain integer tables serialize")
}

pub(super) fn from_text(text: &str) -> Result<WenDatum, WenError> {
    let doc: Doc = toml::from_str(text).map_err(|e| WenError::Parse(e.to_string()))?;
    validate_wen(&doc.k, &doc.n)
}
