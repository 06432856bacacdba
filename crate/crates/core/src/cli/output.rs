use std::io::Write;

use serde::{Serialize, Serializer};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::estimators::EstimateResult;

/// One line of the result stream.
#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub kind: String,
    pub scenario: Option<String>,
    pub x: Value,
    #[serde(serialize_with = "number_or_tag")]
    pub value: f64,
    pub stderr: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<u64>,
    #[serde(rename = "N_rejected")]
    pub n_rejected: Option<u64>,
    pub r_min: Option<f64>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
}

/// JSON has no infinities: `+∞` becomes `"inf"`, NaN `"nan"`.
fn number_or_tag<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
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

impl Record {
    pub fn plain(kind: &str, x: Value, value: f64) -> Self {
        Record {
            kind: kind.into(),
            scenario: None,
            x,
            value,
            stderr: None,
            n: None,
            n_rejected: None,
            r_min: None,
            p: None,
            seed: None,
        }
    }

    pub fn estimate(r: &EstimateResult, scenario: &str, x: &[f64], p: f64) -> Self {
        Record {
            kind: r.kind.to_string(),
            scenario: Some(scenario.into()),
            x: Value::from(x.to_vec()),
            value: r.value,
            stderr: r.stderr,
            n: Some(r.n_used + r.n_rejected),
            n_rejected: Some(r.n_rejected),
            r_min: Some(r.r_min_used),
            p: Some(p),
            seed: Some(r.seed),
        }
    }

    pub fn with_scenario(mut self, scenario: &str) -> Self {
        self.scenario = Some(scenario.into());
        self
    }
}

#[derive(Serialize)]
struct Header<'a> {
    version: &'a str,
    seed: u64,
    config_hash: String,
}

pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Line-JSON sink plus the human summaries on stderr.
pub struct Emitter {
    out: Box<dyn Write>,
    quiet: bool,
}

impl Emitter {
    pub fn new(out: Box<dyn Write>, seed: u64, canonical_config: &str) -> Result<Self> {
        let mut e = Emitter { out, quiet: false };
        let h = Header { version: env!("CARGO_PKG_VERSION"), seed, config_hash: config_hash(canonical_config) };
        e.line(&h)?;
        Ok(e)
    }

    pub fn quiet(mut self, quiet: bool) -> Self {
        self.quiet = quiet;
        self
    }

    fn line<T: Serialize>(&mut self, v: &T) -> Result<()> {
        let text = serde_json::to_string(v).expect("records serialize");
        writeln!(self.out, "{text}")?;
        Ok(())
    }

    pub fn record(&mut self, r: &Record, summary: &str) -> Result<()> {
        self.line(r)?;
        if !self.quiet {
            eprintln!("{summary}");
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_has_exactly_the_documented_fields() {
        let r = Record::plain("distance", Value::Null, f64::INFINITY);
        let v: Value = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(keys, ["N", "N_rejected", "kind", "p", "r_min", "scenario", "seed", "stderr", "value", "x"]);
        assert_eq!(v["value"], "inf");
    }

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(config_hash("").len(), 64);
        assert!(config_hash("").starts_with("e3b0c442"));
    }
}
